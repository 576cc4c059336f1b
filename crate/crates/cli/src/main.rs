use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use corrlab_cli::config::{validate_with, ConfigError, RawConfig};
use corrlab_cli::presets::{preset, NAMES};
use corrlab_cli::report::Report;
use corrlab_cli::run::{run, verify_transcript_file};
use corrlab_cli::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Role {
    Coordinator,
    Node,
}

/// Correlation-consistency laboratory.
#[derive(Debug, Parser)]
#[command(name = "corrlab", version)]
struct Args {
    /// Config file in `key = value` form.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named built-in config; applied before `--config` and flags.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Also write the full report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a one-line summary instead of the report.
    #[arg(long)]
    summary: bool,
    /// Networked GHZ role; selects the matching mode.
    #[arg(long, value_enum)]
    role: Option<Role>,
    /// Node listen address.
    #[arg(long)]
    listen: Option<String>,
    /// Comma-separated addresses of nodes 1, 2 and 3.
    #[arg(long)]
    nodes: Option<String>,
    /// Node id (1, 2 or 3) for `--role node`.
    #[arg(long)]
    node_id: Option<u8>,
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    trial_log: Option<PathBuf>,
    /// Check a saved session transcript instead of running an experiment.
    #[arg(long)]
    verify_transcript: Option<PathBuf>,
    /// List preset names and exit.
    #[arg(long)]
    list_presets: bool,
}

fn build(args: &Args) -> Result<(RawConfig, Vec<ConfigError>), CliError> {
    let mut raw = RawConfig::default();
    let mut errors = Vec::new();
    let mut overlay = |text: &str, raw: &mut RawConfig| {
        let (layer, errs) = RawConfig::parse_partial(text);
        errors.extend(errs);
        for key in layer.keys() {
            raw.set(key, layer.get(key).expect("listed key"));
        }
    };
    if let Some(name) = &args.preset {
        let text = preset(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}`; known: {}", NAMES.join(", "))))?;
        overlay(&text, &mut raw);
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        overlay(&text, &mut raw);
    }
    if let Some(role) = args.role {
        raw.set("mode", match role {
            Role::Coordinator => "ghz-net-coordinator",
            Role::Node => "ghz-net-node",
        });
    }
    let path = |p: &PathBuf| p.display().to_string();
    let flags: [(&str, Option<String>); 7] = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("trials", args.trials.map(|v| v.to_string())),
        ("listen", args.listen.clone()),
        ("nodes", args.nodes.clone()),
        ("node", args.node_id.map(|v| v.to_string())),
        ("transcript", args.transcript.as_ref().map(path)),
        ("trial_log", args.trial_log.as_ref().map(path)),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            raw.set(key, v);
        }
    }
    Ok((raw, errors))
}

fn emit(args: &Args, report: &Report) -> Result<(), CliError> {
    let text = report.to_string();
    if let Some(out) = &args.out {
        std::fs::write(out, &text)?;
    }
    let mut stdout = std::io::stdout().lock();
    if args.summary {
        writeln!(stdout, "{}", report.summary)?;
    } else {
        stdout.write_all(text.as_bytes())?;
    }
    Ok(())
}

fn main_inner(args: &Args) -> Result<(), CliError> {
    if args.list_presets {
        println!("{}", NAMES.join("\n"));
        return Ok(());
    }
    if let Some(path) = &args.verify_transcript {
        print!("{}", verify_transcript_file(path, [1, 2, 3])?);
        return Ok(());
    }
    let (raw, errors) = build(args)?;
    let config = validate_with(&raw, errors)?;
    let mut listening = |addr| {
        println!("listening {addr}");
        let _ = std::io::stdout().flush();
    };
    match run(&config, &mut listening) {
        Ok(report) => emit(args, &report),
        Err(CliError::Aborted { reason, report }) => {
            emit(args, &report)?;
            Err(CliError::Aborted { reason, report })
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("corrlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
