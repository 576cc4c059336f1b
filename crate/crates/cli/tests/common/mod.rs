//! Helpers for driving the `corrlab` binary.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::process::{Child, ChildStdout, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_corrlab");

pub fn corrlab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn corrlab")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

/// `key = value` records after `[result]`, in order.
pub fn records(report: &str) -> Vec<(String, String)> {
    report
        .lines()
        .skip_while(|l| *l != "[result]")
        .skip(1)
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn record<'a>(records: &'a [(String, String)], key: &str) -> &'a str {
    records
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .unwrap_or_else(|| panic!("missing record `{key}`"))
}

/// Exact fraction on machine integers, for checking report values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    pub fn new(num: i128, den: i128) -> Frac {
        assert!(den != 0);
        let g = gcd(num, den).max(1) * den.signum();
        Frac { num: num / g, den: den / g }
    }

    pub fn parse(s: &str) -> Frac {
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => Frac::new(n.parse().unwrap(), d.parse().unwrap()),
            None => Frac::new(s.parse().unwrap(), 1),
        }
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn mul(self, o: Frac) -> Frac {
        Frac::new(self.num * o.num, self.den * o.den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub fn fracs(list: &str) -> Vec<Frac> {
    list.split(',').map(Frac::parse).collect()
}

/// A node process that has announced its listening address.
pub struct NodeProc {
    pub child: Child,
    pub addr: String,
    rest: BufReader<ChildStdout>,
}

impl NodeProc {
    pub fn spawn(id: u8) -> NodeProc {
        let mut child = Command::new(BIN)
            .args(["--role", "node", "--node-id", &id.to_string(), "--listen", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .expect("spawn node");
        let mut rest = BufReader::new(child.stdout.take().unwrap());
        let mut line = String::new();
        rest.read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening ").unwrap_or_else(|| panic!("node said {line:?}")).to_string();
        NodeProc { child, addr, rest }
    }

    /// Waits for exit; returns the status code and the report text.
    pub fn finish(mut self) -> (Option<i32>, String) {
        let status = self.child.wait().unwrap();
        let mut text = String::new();
        self.rest.read_to_string(&mut text).unwrap();
        (status.code(), text)
    }
}

/// Three nodes and a coordinator as separate processes.
pub fn networked_session(dir: &Path, seed: u64, trials: u64) -> (Output, Vec<(Option<i32>, String)>) {
    let nodes: Vec<NodeProc> = (1..=3).map(NodeProc::spawn).collect();
    let addrs = nodes.iter().map(|n| n.addr.clone()).collect::<Vec<_>>().join(",");
    let transcript = dir.join("transcript.txt");
    let log = dir.join("net_trials.txt");
    let out = corrlab(&[
        "--role",
        "coordinator",
        "--nodes",
        &addrs,
        "--seed",
        &seed.to_string(),
        "--trials",
        &trials.to_string(),
        "--transcript",
        transcript.to_str().unwrap(),
        "--trial-log",
        log.to_str().unwrap(),
    ]);
    let finished = nodes.into_iter().map(NodeProc::finish).collect();
    (out, finished)
}

/// The in-process run for the same seed and trial count.
pub fn local_trial_log(dir: &Path, seed: u64, trials: u64) -> Output {
    let log = dir.join("local_trials.txt");
    corrlab(&[
        "--preset",
        "ghz-table5",
        "--seed",
        &seed.to_string(),
        "--trials",
        &trials.to_string(),
        "--trial-log",
        log.to_str().unwrap(),
    ])
}
