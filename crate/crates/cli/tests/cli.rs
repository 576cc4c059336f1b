//! End-to-end behaviour of the `corrlab` binary.

mod common;

use std::fs;

use common::{corrlab, networked_session, record, records, stdout, BIN};

fn round_trip(args: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("report.txt");
    let mut first_args = args.to_vec();
    first_args.extend(["--out", saved.to_str().unwrap()]);
    let first = corrlab(&first_args);
    assert!(first.status.success(), "{args:?}: {}", String::from_utf8_lossy(&first.stderr));
    let report = stdout(&first);
    assert_eq!(fs::read_to_string(&saved).unwrap(), report);

    let again = corrlab(&["--config", saved.to_str().unwrap()]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(stdout(&again), report, "replaying the provenance of {args:?}");
}

#[test]
fn reports_replay_from_their_provenance() {
    round_trip(&["--preset", "vorobev-table1"]);
    round_trip(&["--preset", "vorobev-uniform"]);
    round_trip(&["--preset", "bell-infeasible"]);
    round_trip(&["--preset", "chsh-qm"]);
    round_trip(&["--preset", "aspect-qm", "--trials", "20000", "--seed", "7"]);
    round_trip(&["--preset", "gamma-max", "--trials", "5000"]);
    round_trip(&["--preset", "source-models", "--trials", "500", "--seed", "3"]);
    round_trip(&["--preset", "ghz-table5", "--trials", "300", "--seed", "11"]);
}

#[test]
fn seed_changes_stochastic_results() {
    let a = stdout(&corrlab(&["--preset", "aspect-qm", "--trials", "5000", "--seed", "1"]));
    let b = stdout(&corrlab(&["--preset", "aspect-qm", "--trials", "5000", "--seed", "2"]));
    assert_ne!(records(&a), records(&b));
}

#[test]
fn summary_is_one_line() {
    let out = corrlab(&["--preset", "vorobev-table1", "--summary"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("INFEASIBLE"), "{text}");
}

#[test]
fn config_errors_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "mode = chsh\nsigmas = 3/2, 0, 0, 0\nangles = 1deg, 2deg, 3deg, 4deg\ncolour = blue\n").unwrap();
    let out = corrlab(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour"), "{err}");
    assert!(err.contains("3/2"), "{err}");
    assert!(err.contains("`angles`"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn stochastic_modes_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noseed.cfg");
    fs::write(&path, "mode = aspect\ntrials = 10\nsigmas = 0, 0, 0, 0\n").unwrap();
    let out = corrlab(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let out = corrlab(&["--config", path.to_str().unwrap(), "--seed", "4"]);
    assert!(out.status.success());
}

#[test]
fn arity_above_the_cap_is_a_capacity_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.cfg");
    fs::write(&path, "mode = check\narity = 13\npairs = 0:1\ncells = 1/4, 1/4, 1/4, 1/4\n").unwrap();
    let out = corrlab(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let out = corrlab(&["--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghz-table5"));
}

#[test]
fn unreachable_nodes_exit_with_the_network_code() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let closed = listener.local_addr().unwrap().to_string();
    drop(listener);
    let nodes = format!("{closed},{closed},{closed}");
    let out = std::process::Command::new(BIN)
        .args(["--role", "coordinator", "--nodes", &nodes, "--seed", "1", "--trials", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn networked_session_matches_in_process_run_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let (out, nodes) = networked_session(dir.path(), 42, 50);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = records(&stdout(&out));
    assert_eq!(record(&recs, "status"), "complete");
    assert_eq!(record(&recs, "trials_completed"), "200");
    assert_eq!(record(&recs, "transcript.mismatches"), "0");
    for (code, report) in &nodes {
        assert_eq!(*code, Some(0));
        assert_eq!(record(&records(report), "answered"), "200");
    }

    let local = common::local_trial_log(dir.path(), 42, 50);
    assert!(local.status.success());
    let net = fs::read(dir.path().join("net_trials.txt")).unwrap();
    assert_eq!(net, fs::read(dir.path().join("local_trials.txt")).unwrap());

    let transcript = dir.path().join("transcript.txt");
    let clean = corrlab(&["--verify-transcript", transcript.to_str().unwrap()]);
    assert!(clean.status.success());

    // Flip one recorded outcome; replay must name exactly that result.
    let text = fs::read_to_string(&transcript).unwrap();
    let target = text.lines().position(|l| l.contains(" RESULT ")).unwrap();
    let tampered: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let l = if i == target {
                let (head, last) = l.rsplit_once(' ').unwrap();
                format!("{head} {}", if last == "+1" { "-1" } else { "+1" })
            } else {
                l.to_string()
            };
            l + "\n"
        })
        .collect();
    fs::write(&transcript, tampered).unwrap();
    let dirty = stdout(&corrlab(&["--verify-transcript", transcript.to_str().unwrap()]));
    assert!(stdout(&clean).contains("mismatches = 0\n"));
    assert!(dirty.contains("mismatches = 1\n"), "{dirty}");
    assert_eq!(dirty.lines().filter(|l| l.starts_with("mismatch = ")).count(), 1);
}
