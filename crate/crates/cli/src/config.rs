//! `key = value` experiment configs.
//!
//! One setting per line; `#` starts a comment line. A `[provenance]` header is
//! skipped and a `[result]` header ends the config, so a saved report can be
//! read back as the config that produced it. Lists are comma-separated,
//! rationals are `n`, `n/d` or decimals, angles carry a `deg` or `rad` suffix.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use corrlab::dist::{Covariance, Sign};
use corrlab::ghz::{NodeId, Schedule};
use corrlab::rational::{format_rational, int, parse_rational, Rational, DEFAULT_PRECISION};
use num_traits::{One, Signed};
use thiserror::Error;

pub const KEYS: [&str; 22] = [
    "mode",
    "seed",
    "trials",
    "precision",
    "arity",
    "pairs",
    "sigmas",
    "angles",
    "cells",
    "matrix",
    "probabilities",
    "responses",
    "models",
    "schedule",
    "rademacher",
    "probe",
    "nodes",
    "listen",
    "node",
    "transcript",
    "trial_log",
    "timeout_ms",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("`{key}` given more than once")]
    Duplicate { key: String },
    #[error("missing `mode`")]
    MissingMode,
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("mode {mode} requires `{key}`")]
    Missing { mode: Mode, key: &'static str },
    #[error("mode {mode} does not use `{key}`")]
    Unused { mode: Mode, key: String },
    #[error("`{key}`: {detail}")]
    Invalid { key: String, detail: String },
    #[error("`{a}` and `{b}` cannot both be given")]
    Conflict { a: &'static str, b: &'static str },
}

fn invalid(key: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), detail: detail.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Check,
    Bell,
    Chsh,
    Aspect,
    Source,
    Ghz,
    GhzNetCoordinator,
    GhzNetNode,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Check,
        Mode::Bell,
        Mode::Chsh,
        Mode::Aspect,
        Mode::Source,
        Mode::Ghz,
        Mode::GhzNetCoordinator,
        Mode::GhzNetNode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Check => "check",
            Mode::Bell => "bell",
            Mode::Chsh => "chsh",
            Mode::Aspect => "aspect",
            Mode::Source => "source",
            Mode::Ghz => "ghz",
            Mode::GhzNetCoordinator => "ghz-net-coordinator",
            Mode::GhzNetNode => "ghz-net-node",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Mode::Check => &["precision", "arity", "pairs", "sigmas", "angles", "cells"],
            Mode::Bell | Mode::Chsh => &["precision", "sigmas", "angles"],
            Mode::Aspect => &["seed", "trials", "precision", "sigmas", "angles", "matrix"],
            Mode::Source => &["seed", "trials", "probabilities", "responses", "models"],
            Mode::Ghz => &["seed", "trials", "schedule", "rademacher", "probe", "trial_log"],
            Mode::GhzNetCoordinator => {
                &["seed", "trials", "schedule", "rademacher", "nodes", "transcript", "trial_log", "timeout_ms"]
            }
            Mode::GhzNetNode => &["rademacher", "listen", "node"],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings as written, before any interpretation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, Vec<ConfigError>> {
        let (raw, errors) = Self::parse_partial(text);
        if errors.is_empty() {
            Ok(raw)
        } else {
            Err(errors)
        }
    }

    /// Keeps every well-formed line and returns the problems alongside, so
    /// later validation can report them together.
    pub fn parse_partial(text: &str) -> (Self, Vec<ConfigError>) {
        let mut raw = RawConfig::default();
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "[provenance]" {
                continue;
            }
            if line == "[result]" {
                break;
            }
            match line.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() => raw.push(k.trim(), v.trim(), &mut errors),
                _ => errors.push(ConfigError::Syntax { line: i + 1 }),
            }
        }
        (raw, errors)
    }

    fn push(&mut self, key: &str, value: &str, errors: &mut Vec<ConfigError>) {
        if !KEYS.contains(&key) {
            errors.push(ConfigError::UnknownKey { key: key.to_string() });
        } else if self.get(key).is_some() {
            errors.push(ConfigError::Duplicate { key: key.to_string() });
        } else {
            self.entries.push((key.to_string(), value.to_string()));
        }
    }

    /// Sets or replaces a value, as command-line flags do.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleUnit {
    Deg,
    Rad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    pub value: f64,
    pub unit: AngleUnit,
}

impl Angle {
    pub fn radians(self) -> f64 {
        match self.unit {
            AngleUnit::Deg => self.value.to_radians(),
            AngleUnit::Rad => self.value,
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = match self.unit {
            AngleUnit::Deg => "deg",
            AngleUnit::Rad => "rad",
        };
        write!(f, "{}{unit}", self.value)
    }
}

/// Where a set of covariances comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSource {
    Sigmas(Vec<Covariance>),
    /// Singlet correlations `-cos(angle)`, rationalized at `precision`.
    Angles(Vec<Angle>),
}

impl CovarianceSource {
    pub fn len(&self) -> usize {
        match self {
            CovarianceSource::Sigmas(s) => s.len(),
            CovarianceSource::Angles(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckInput {
    Covariances(CovarianceSource),
    /// Four cells per pair in the order `++, +-, -+, --`.
    Cells(Vec<Rational>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub arity: usize,
    pub pairs: Vec<(usize, usize)>,
    pub input: CheckInput,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityConfig {
    pub source: CovarianceSource,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    Covariances(CovarianceSource),
    /// Sixteen entries, row-major, rows `ab, ac, db, dc`.
    Entries(Vec<Rational>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AspectConfig {
    pub seed: u64,
    pub trials: u64,
    pub matrix: MatrixSource,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    /// Per state: probability and responses `A(a) A(d) B(b) B(c)`.
    Explicit(Vec<(Rational, [Sign; 4])>),
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub seed: u64,
    pub trials: u64,
    pub models: ModelSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhzConfig {
    pub seed: u64,
    pub trials: u64,
    pub schedule: Schedule,
    pub rademacher: [u32; 3],
    pub probe: u64,
    pub trial_log: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorSettings {
    pub seed: u64,
    pub trials: u64,
    pub schedule: Schedule,
    pub rademacher: [u32; 3],
    pub nodes: [String; 3],
    pub transcript: Option<PathBuf>,
    pub trial_log: Option<PathBuf>,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSettings {
    pub node: NodeId,
    pub listen: String,
    pub rademacher: [u32; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Check(CheckConfig),
    Bell(InequalityConfig),
    Chsh(InequalityConfig),
    Aspect(AspectConfig),
    Source(SourceConfig),
    Ghz(GhzConfig),
    GhzNetCoordinator(CoordinatorSettings),
    GhzNetNode(NodeSettings),
}

pub const DEFAULT_ASPECT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SOURCE_TRIALS: u64 = 100_000;
pub const DEFAULT_GHZ_TRIALS: u64 = 1_000;
pub const DEFAULT_PROBE: u64 = 1_000;
pub const DEFAULT_TIMEOUT_MS: u64 = 5_000;
pub const DEFAULT_LISTEN: &str = "127.0.0.1:0";

pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let (raw, errors) = RawConfig::parse_partial(text);
    validate_with(&raw, errors)
}

/// Like [`validate`], with earlier errors prepended to any found here.
pub fn validate_with(raw: &RawConfig, mut errors: Vec<ConfigError>) -> Result<ExperimentConfig, Vec<ConfigError>> {
    match validate(raw) {
        Ok(config) if errors.is_empty() => Ok(config),
        Ok(_) => Err(errors),
        Err(more) => {
            errors.extend(more);
            Err(errors)
        }
    }
}

/// Interprets raw settings for their mode, reporting every problem found.
pub fn validate(raw: &RawConfig) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mode = match raw.get("mode") {
        None => return Err(vec![ConfigError::MissingMode]),
        Some(m) => Mode::parse(m).ok_or_else(|| vec![ConfigError::UnknownMode(m.to_string())])?,
    };
    let mut v = Validator { raw, mode, errors: Vec::new() };
    for key in raw.keys() {
        if key != "mode" && !mode.keys().contains(&key) {
            v.errors.push(ConfigError::Unused { mode, key: key.to_string() });
        }
    }
    let config = match mode {
        Mode::Check => v.check().map(ExperimentConfig::Check),
        Mode::Bell => v.inequality(3).map(ExperimentConfig::Bell),
        Mode::Chsh => v.inequality(4).map(ExperimentConfig::Chsh),
        Mode::Aspect => v.aspect().map(ExperimentConfig::Aspect),
        Mode::Source => v.source().map(ExperimentConfig::Source),
        Mode::Ghz => v.ghz().map(ExperimentConfig::Ghz),
        Mode::GhzNetCoordinator => v.coordinator().map(ExperimentConfig::GhzNetCoordinator),
        Mode::GhzNetNode => v.node().map(ExperimentConfig::GhzNetNode),
    };
    match config {
        Some(c) if v.errors.is_empty() => Ok(c),
        _ => Err(v.errors),
    }
}

struct Validator<'a> {
    raw: &'a RawConfig,
    mode: Mode,
    errors: Vec<ConfigError>,
}

impl Validator<'_> {
    /// Parses `key` when present; records the error and yields `Err(())` when malformed.
    fn opt<T>(&mut self, key: &'static str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, ()> {
        match self.raw.get(key) {
            None => Ok(None),
            Some(text) => parse(text).map(Some).map_err(|e| self.errors.push(invalid(key, e))),
        }
    }

    fn required<T>(&mut self, key: &'static str, parse: impl FnOnce(&str) -> Result<T, String>) -> Option<T> {
        match self.opt(key, parse) {
            Ok(Some(v)) => Some(v),
            Ok(None) => {
                self.errors.push(ConfigError::Missing { mode: self.mode, key });
                None
            }
            Err(()) => None,
        }
    }

    fn with_default<T>(&mut self, key: &'static str, default: T, parse: impl FnOnce(&str) -> Result<T, String>) -> Option<T> {
        self.opt(key, parse).ok().map(|v| v.unwrap_or(default))
    }

    fn precision(&mut self) -> Option<f64> {
        self.with_default("precision", DEFAULT_PRECISION, |s| {
            s.parse::<f64>()
                .ok()
                .filter(|p| p.is_finite() && *p > 0.0 && *p < 1.0)
                .ok_or_else(|| format!("`{s}` is not a tolerance in (0, 1)"))
        })
    }

    fn seed(&mut self) -> Option<u64> {
        self.required("seed", parse_u64)
    }

    fn trials(&mut self, default: u64) -> Option<u64> {
        self.with_default("trials", default, parse_positive)
    }

    /// `sigmas` or `angles`, with an optional required count.
    fn covariances(&mut self, count: Option<usize>) -> Option<Option<CovarianceSource>> {
        let sigmas = self.opt("sigmas", parse_sigmas);
        let angles = self.opt("angles", |s| list(s, parse_angle));
        if self.raw.get("sigmas").is_some() && self.raw.get("angles").is_some() {
            self.errors.push(ConfigError::Conflict { a: "sigmas", b: "angles" });
            return None;
        }
        let source = match (sigmas, angles) {
            (Ok(Some(s)), Ok(None)) => Some(CovarianceSource::Sigmas(s)),
            (Ok(None), Ok(Some(a))) => Some(CovarianceSource::Angles(a)),
            (Ok(None), Ok(None)) => None,
            _ => return None,
        };
        if let (Some(src), Some(n)) = (&source, count) {
            if src.len() != n {
                let key = if matches!(src, CovarianceSource::Sigmas(_)) { "sigmas" } else { "angles" };
                self.errors.push(invalid(key, format!("expected {n} values, got {}", src.len())));
                return None;
            }
        }
        Some(source)
    }

    fn check(&mut self) -> Option<CheckConfig> {
        let precision = self.precision();
        let covariances = self.covariances(None);
        let cells = self.opt("cells", |s| list(s, parse_rational_field)).ok();
        let pairs = self.opt("pairs", parse_pairs).ok();
        let arity = self.opt("arity", |s| {
            s.parse::<usize>().ok().filter(|&a| a >= 2).ok_or_else(|| format!("`{s}` is not an arity of at least 2"))
        });
        let (covariances, cells, pairs, arity) = (covariances?, cells?, pairs?, arity.ok()?);
        let (input, count) = match (covariances, cells) {
            (Some(_), Some(_)) => {
                self.errors.push(ConfigError::Conflict { a: "cells", b: "sigmas/angles" });
                return None;
            }
            (Some(c), None) => {
                let n = c.len();
                (CheckInput::Covariances(c), n)
            }
            (None, Some(cells)) => {
                if cells.is_empty() || cells.len() % 4 != 0 {
                    self.errors.push(invalid("cells", format!("{} values is not a multiple of 4", cells.len())));
                    return None;
                }
                let n = cells.len() / 4;
                let mut ok = true;
                for (p, table) in cells.chunks(4).enumerate() {
                    if table.iter().any(Signed::is_negative) {
                        self.errors.push(invalid("cells", format!("pair {p} has a negative entry")));
                        ok = false;
                    }
                    let total: Rational = table.iter().sum();
                    if !total.is_one() {
                        self.errors.push(invalid("cells", format!("pair {p} sums to {}", format_rational(&total))));
                        ok = false;
                    }
                }
                if !ok {
                    return None;
                }
                (CheckInput::Cells(cells), n)
            }
            (None, None) => {
                self.errors.push(ConfigError::Missing { mode: self.mode, key: "sigmas, angles or cells" });
                return None;
            }
        };
        let pairs = match pairs {
            Some(p) => p,
            None if count == 3 => vec![(0, 1), (0, 2), (1, 2)],
            None if count == 4 => vec![(0, 2), (0, 3), (1, 2), (1, 3)],
            None => {
                self.errors.push(ConfigError::Missing { mode: self.mode, key: "pairs" });
                return None;
            }
        };
        if pairs.len() != count {
            self.errors.push(invalid("pairs", format!("{} pairs for {count} tables", pairs.len())));
            return None;
        }
        let needed = pairs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(2);
        let arity = arity.unwrap_or(needed);
        if arity < needed {
            self.errors.push(invalid("arity", format!("pairs use variable {} but arity is {arity}", needed - 1)));
            return None;
        }
        Some(CheckConfig { arity, pairs, input, precision: precision? })
    }

    fn inequality(&mut self, count: usize) -> Option<InequalityConfig> {
        let precision = self.precision();
        let source = match self.covariances(Some(count))? {
            Some(s) => s,
            None => {
                self.errors.push(ConfigError::Missing { mode: self.mode, key: "sigmas or angles" });
                return None;
            }
        };
        Some(InequalityConfig { source, precision: precision? })
    }

    fn aspect(&mut self) -> Option<AspectConfig> {
        let seed = self.seed();
        let trials = self.trials(DEFAULT_ASPECT_TRIALS);
        let precision = self.precision();
        let covariances = self.covariances(Some(4));
        let matrix = self.opt("matrix", |s| {
            let m = list(s, parse_rational_field)?;
            if m.len() != 16 {
                return Err(format!("expected 16 entries, got {}", m.len()));
            }
            Ok(m)
        });
        let matrix = match (covariances?, matrix.ok()?) {
            (Some(_), Some(_)) => {
                self.errors.push(ConfigError::Conflict { a: "matrix", b: "sigmas/angles" });
                return None;
            }
            (Some(c), None) => MatrixSource::Covariances(c),
            (None, Some(m)) => MatrixSource::Entries(m),
            (None, None) => {
                self.errors.push(ConfigError::Missing { mode: self.mode, key: "matrix, sigmas or angles" });
                return None;
            }
        };
        Some(AspectConfig { seed: seed?, trials: trials?, matrix, precision: precision? })
    }

    fn source(&mut self) -> Option<SourceConfig> {
        let seed = self.seed();
        let trials = self.trials(DEFAULT_SOURCE_TRIALS);
        let probabilities = self.opt("probabilities", |s| list(s, parse_rational_field)).ok();
        let responses = self.opt("responses", |s| list(s, parse_responses)).ok();
        let models = self.opt("models", parse_positive).ok();
        let models = match (probabilities?, responses?, models?) {
            (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
                self.errors.push(ConfigError::Conflict { a: "models", b: "probabilities/responses" });
                return None;
            }
            (Some(p), Some(r), None) => {
                if p.len() != r.len() {
                    self.errors.push(invalid("responses", format!("{} states but {} probabilities", r.len(), p.len())));
                    return None;
                }
                if p.iter().any(|x| !x.is_positive()) {
                    self.errors.push(invalid("probabilities", "every probability must be positive"));
                    return None;
                }
                let total: Rational = p.iter().sum();
                if !total.is_one() {
                    self.errors.push(invalid("probabilities", format!("sum to {}", format_rational(&total))));
                    return None;
                }
                ModelSource::Explicit(p.into_iter().zip(r).collect())
            }
            (Some(_), None, None) => {
                self.errors.push(ConfigError::Missing { mode: self.mode, key: "responses" });
                return None;
            }
            (None, Some(_), None) => {
                self.errors.push(ConfigError::Missing { mode: self.mode, key: "probabilities" });
                return None;
            }
            (None, None, m) => ModelSource::Random(m.unwrap_or(1)),
        };
        Some(SourceConfig { seed: seed?, trials: trials?, models })
    }

    fn schedule(&mut self) -> Option<Schedule> {
        self.with_default("schedule", Schedule::standard(), |s| {
            Schedule::decode(&s.replace(',', " ")).map_err(|e| e.to_string())
        })
    }

    fn rademacher(&mut self) -> Option<[u32; 3]> {
        self.with_default("rademacher", [1, 2, 3], |s| {
            let k = list(s, |x| {
                x.parse::<u32>().ok().filter(|&k| (1..=60).contains(&k)).ok_or_else(|| format!("`{x}` is not an index in 1..=60"))
            })?;
            k.try_into().map_err(|k: Vec<u32>| format!("expected 3 indices, got {}", k.len()))
        })
    }

    fn ghz(&mut self) -> Option<GhzConfig> {
        let seed = self.seed();
        let trials = self.trials(DEFAULT_GHZ_TRIALS);
        let schedule = self.schedule();
        let rademacher = self.rademacher();
        let probe = self.with_default("probe", DEFAULT_PROBE, parse_positive);
        let trial_log = self.opt("trial_log", parse_path).ok();
        Some(GhzConfig {
            seed: seed?,
            trials: trials?,
            schedule: schedule?,
            rademacher: rademacher?,
            probe: probe?,
            trial_log: trial_log?,
        })
    }

    fn coordinator(&mut self) -> Option<CoordinatorSettings> {
        let seed = self.seed();
        let trials = self.trials(DEFAULT_GHZ_TRIALS);
        let schedule = self.schedule();
        let rademacher = self.rademacher();
        let nodes = self.required("nodes", |s| {
            let n = list(s, |x| Ok(x.to_string()))?;
            n.try_into().map_err(|n: Vec<String>| format!("expected 3 addresses, got {}", n.len()))
        });
        let transcript = self.opt("transcript", parse_path).ok();
        let trial_log = self.opt("trial_log", parse_path).ok();
        let timeout_ms = self.with_default("timeout_ms", DEFAULT_TIMEOUT_MS, parse_positive);
        Some(CoordinatorSettings {
            seed: seed?,
            trials: trials?,
            schedule: schedule?,
            rademacher: rademacher?,
            nodes: nodes?,
            transcript: transcript?,
            trial_log: trial_log?,
            timeout_ms: timeout_ms?,
        })
    }

    fn node(&mut self) -> Option<NodeSettings> {
        let node = self.required("node", |s| {
            s.parse::<u8>().ok().and_then(|n| NodeId::new(n).ok()).ok_or_else(|| format!("`{s}` is not 1, 2 or 3"))
        });
        let listen = self.with_default("listen", DEFAULT_LISTEN.to_string(), |s| Ok(s.to_string()));
        let rademacher = self.rademacher();
        Some(NodeSettings { node: node?, listen: listen?, rademacher: rademacher? })
    }
}

fn list<T>(text: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if text.trim().is_empty() {
        return Err("empty list".into());
    }
    text.split(',').map(|x| item(x.trim())).collect()
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse::<u64>().map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_positive(s: &str) -> Result<u64, String> {
    parse_u64(s).and_then(|n| if n == 0 { Err("must be at least 1".into()) } else { Ok(n) })
}

fn parse_path(s: &str) -> Result<PathBuf, String> {
    if s.is_empty() {
        Err("empty path".into())
    } else {
        Ok(PathBuf::from(s))
    }
}

fn parse_rational_field(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| format!("`{s}`: {e}"))
}

fn parse_sigmas(s: &str) -> Result<Vec<Covariance>, String> {
    let values = list(s, parse_rational_field)?;
    let mut out = Vec::new();
    for (i, v) in values.into_iter().enumerate() {
        if v.abs() > int(1) {
            return Err(format!("value {} = {} is outside [-1, 1]", i + 1, format_rational(&v)));
        }
        out.push(Covariance::new(v).expect("range checked"));
    }
    Ok(out)
}

fn parse_angle(s: &str) -> Result<Angle, String> {
    let (number, unit) = if let Some(n) = s.strip_suffix("deg") {
        (n, AngleUnit::Deg)
    } else if let Some(n) = s.strip_suffix("rad") {
        (n, AngleUnit::Rad)
    } else {
        return Err(format!("`{s}` needs a `deg` or `rad` suffix"));
    };
    let value: f64 = number.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(Angle { value, unit })
}

fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>, String> {
    let pairs = list(s, |p| {
        let (i, j) = p.split_once(':').ok_or_else(|| format!("`{p}` is not `i:j`"))?;
        let idx = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("`{x}` is not a variable index"));
        let (i, j) = (idx(i)?, idx(j)?);
        if i == j {
            return Err(format!("`{p}` repeats a variable"));
        }
        Ok((i, j))
    })?;
    let distinct: BTreeSet<(usize, usize)> = pairs.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect();
    if distinct.len() != pairs.len() {
        return Err("a pair appears twice".into());
    }
    Ok(pairs)
}

fn parse_responses(s: &str) -> Result<[Sign; 4], String> {
    let signs: Vec<Sign> = s
        .chars()
        .map(|c| match c {
            '+' => Ok(Sign::Plus),
            '-' => Ok(Sign::Minus),
            _ => Err(format!("`{s}` must use only `+` and `-`")),
        })
        .collect::<Result<_, _>>()?;
    signs.try_into().map_err(|_| format!("`{s}` must have four signs: A(a) A(d) B(b) B(c)"))
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

fn covariance_lines(source: &CovarianceSource, out: &mut Vec<(&'static str, String)>) {
    match source {
        CovarianceSource::Sigmas(s) => out.push(("sigmas", join(s, |c| format_rational(c.value())))),
        CovarianceSource::Angles(a) => out.push(("angles", join(a, |a| a.to_string()))),
    }
}

fn schedule_text(s: &Schedule) -> String {
    join(s.windows(), |w| format!("{} {} {}", w.regime, format_rational(&w.start), format_rational(&w.end)))
}

fn path_text(p: &std::path::Path) -> String {
    p.display().to_string()
}

impl ExperimentConfig {
    pub fn mode(&self) -> Mode {
        match self {
            ExperimentConfig::Check(_) => Mode::Check,
            ExperimentConfig::Bell(_) => Mode::Bell,
            ExperimentConfig::Chsh(_) => Mode::Chsh,
            ExperimentConfig::Aspect(_) => Mode::Aspect,
            ExperimentConfig::Source(_) => Mode::Source,
            ExperimentConfig::Ghz(_) => Mode::Ghz,
            ExperimentConfig::GhzNetCoordinator(_) => Mode::GhzNetCoordinator,
            ExperimentConfig::GhzNetNode(_) => Mode::GhzNetNode,
        }
    }

    /// Every effective setting, defaults included, in a fixed order.
    /// Parsing the result gives back an equal config.
    pub fn settings(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("mode", self.mode().name().to_string())];
        match self {
            ExperimentConfig::Check(c) => {
                out.push(("precision", c.precision.to_string()));
                out.push(("arity", c.arity.to_string()));
                out.push(("pairs", join(&c.pairs, |(i, j)| format!("{i}:{j}"))));
                match &c.input {
                    CheckInput::Covariances(s) => covariance_lines(s, &mut out),
                    CheckInput::Cells(cells) => out.push(("cells", join(cells, format_rational))),
                }
            }
            ExperimentConfig::Bell(c) | ExperimentConfig::Chsh(c) => {
                out.push(("precision", c.precision.to_string()));
                covariance_lines(&c.source, &mut out);
            }
            ExperimentConfig::Aspect(c) => {
                out.push(("seed", c.seed.to_string()));
                out.push(("trials", c.trials.to_string()));
                out.push(("precision", c.precision.to_string()));
                match &c.matrix {
                    MatrixSource::Covariances(s) => covariance_lines(s, &mut out),
                    MatrixSource::Entries(m) => out.push(("matrix", join(m, format_rational))),
                }
            }
            ExperimentConfig::Source(c) => {
                out.push(("seed", c.seed.to_string()));
                out.push(("trials", c.trials.to_string()));
                match &c.models {
                    ModelSource::Random(n) => out.push(("models", n.to_string())),
                    ModelSource::Explicit(states) => {
                        out.push(("probabilities", join(states, |(p, _)| format_rational(p))));
                        out.push((
                            "responses",
                            join(states, |(_, r)| r.iter().map(|s| if s.is_plus() { '+' } else { '-' }).collect()),
                        ));
                    }
                }
            }
            ExperimentConfig::Ghz(c) => {
                out.push(("seed", c.seed.to_string()));
                out.push(("trials", c.trials.to_string()));
                out.push(("schedule", schedule_text(&c.schedule)));
                out.push(("rademacher", join(&c.rademacher, u32::to_string)));
                out.push(("probe", c.probe.to_string()));
                if let Some(p) = &c.trial_log {
                    out.push(("trial_log", path_text(p)));
                }
            }
            ExperimentConfig::GhzNetCoordinator(c) => {
                out.push(("seed", c.seed.to_string()));
                out.push(("trials", c.trials.to_string()));
                out.push(("schedule", schedule_text(&c.schedule)));
                out.push(("rademacher", join(&c.rademacher, u32::to_string)));
                out.push(("nodes", c.nodes.join(", ")));
                if let Some(p) = &c.transcript {
                    out.push(("transcript", path_text(p)));
                }
                if let Some(p) = &c.trial_log {
                    out.push(("trial_log", path_text(p)));
                }
                out.push(("timeout_ms", c.timeout_ms.to_string()));
            }
            ExperimentConfig::GhzNetNode(c) => {
                out.push(("node", c.node.to_string()));
                out.push(("listen", c.listen.clone()));
                out.push(("rademacher", join(&c.rademacher, u32::to_string)));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.settings().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
