//! Three independent stations reproducing the GHZ product pattern.
//!
//! Each station answers with a signed product of Rademacher functions
//! `r_k(t) = sign(sin(2^k π t))` chosen by its node id and the current
//! setting regime. The only shared input is the measurement time `t`, yet
//! the products `Y1 Y2 X3`, `Y1 X2 Y3`, `X1 Y2 Y3` are `-1` and `X1 X2 X3` is
//! `+1` at every `t`.
//!
//! Times are exact rationals. `r_k(t)` is evaluated from the parity of
//! `floor(2^k t)`, and the sine's zeros (where `2^k t` is an integer) map to
//! `+1`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::RngCore;
use thiserror::Error;

use crate::dist::Sign;
use crate::rational::{format_fraction, format_rational, int, parse_rational, ratio, Rational};
use crate::rng::{stream, Purpose};

/// Denominator of the measurement-time grid.
pub const TIME_GRID_BITS: u32 = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GhzError {
    #[error("time {0} is not positive")]
    NonPositiveTime(String),
    #[error("Rademacher index must be at least 1")]
    ZeroIndex,
    #[error("node id {0} is not 1, 2 or 3")]
    BadNode(u8),
    #[error("no {0} window in the schedule")]
    MissingWindow(Regime),
    #[error("time {t} is outside the {regime} window")]
    OutsideWindow { regime: Regime, t: String },
    #[error("schedule: {0}")]
    BadSchedule(String),
    #[error("unknown regime `{0}`")]
    UnknownRegime(String),
    #[error("no trials to summarize")]
    Empty,
    #[error("sample count must be at least 1")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    Yyx,
    Yxy,
    Xyy,
    Xxx,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Yyx, Regime::Yxy, Regime::Xyy, Regime::Xxx];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Yyx => "yyx",
            Regime::Yxy => "yxy",
            Regime::Xyy => "xyy",
            Regime::Xxx => "xxx",
        }
    }

    pub fn parse(s: &str) -> Result<Self, GhzError> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| GhzError::UnknownRegime(s.to_string()))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// The triple product quantum mechanics predicts for this regime.
    pub fn expected_product(self) -> Sign {
        if self == Regime::Xxx {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn observable(self, node: NodeId) -> Observable {
        match self.name().as_bytes()[node.index()] {
            b'x' => Observable::X,
            _ => Observable::Y,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u8);

impl NodeId {
    pub const ALL: [NodeId; 3] = [NodeId(1), NodeId(2), NodeId(3)];

    pub fn new(id: u8) -> Result<Self, GhzError> {
        if (1..=3).contains(&id) {
            Ok(NodeId(id))
        } else {
            Err(GhzError::BadNode(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RademacherIndex(u32);

impl RademacherIndex {
    pub fn new(k: u32) -> Result<Self, GhzError> {
        if k == 0 {
            Err(GhzError::ZeroIndex)
        } else {
            Ok(RademacherIndex(k))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// `sign(sin(2^k π t))` for `t > 0`, with `sign(0) = +1`.
pub fn rademacher(k: RademacherIndex, t: &Rational) -> Result<Sign, GhzError> {
    if !t.is_positive() {
        return Err(GhzError::NonPositiveTime(format_rational(t)));
    }
    let scaled: BigInt = t.numer() << k.0 as usize;
    let (floor, rem) = scaled.div_rem(t.denom());
    Ok(Sign::from_bool(rem.is_zero() || floor.is_even()))
}

/// `±r_{k1} r_{k2} ...`; an empty product is the constant `±1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResponseFn {
    pub negated: bool,
    pub indices: Vec<RademacherIndex>,
}

impl ResponseFn {
    pub fn new(negated: bool, indices: &[u32]) -> Result<Self, GhzError> {
        Ok(ResponseFn {
            negated,
            indices: indices.iter().map(|&k| RademacherIndex::new(k)).collect::<Result<_, _>>()?,
        })
    }

    pub fn evaluate(&self, t: &Rational) -> Result<Sign, GhzError> {
        let mut out = Sign::from_bool(!self.negated);
        for &k in &self.indices {
            out = out * rademacher(k, t)?;
        }
        Ok(out)
    }

    /// Symbolic product, using `r_k^2 = 1`. The result is in canonical form:
    /// sorted indices, each present at most once.
    pub fn times(&self, other: &ResponseFn) -> ResponseFn {
        let mut counts: BTreeMap<RademacherIndex, u32> = BTreeMap::new();
        for &k in self.indices.iter().chain(&other.indices) {
            *counts.entry(k).or_default() += 1;
        }
        ResponseFn {
            negated: self.negated ^ other.negated,
            indices: counts.into_iter().filter(|(_, c)| c % 2 == 1).map(|(k, _)| k).collect(),
        }
    }

    /// `Some(sign)` when the function is constant.
    pub fn as_constant(&self) -> Option<Sign> {
        let canonical = self.times(&ResponseFn { negated: false, indices: Vec::new() });
        canonical.indices.is_empty().then(|| Sign::from_bool(!canonical.negated))
    }
}

impl fmt::Display for ResponseFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("-")?;
        }
        if self.indices.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.indices.iter().map(|k| format!("r{}", k.0)).collect();
        f.write_str(&parts.join("."))
    }
}

/// Response function of every node under every regime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeAssignment {
    cells: [[ResponseFn; 4]; 3],
}

impl NodeAssignment {
    pub fn new(cells: [[ResponseFn; 4]; 3]) -> Self {
        NodeAssignment { cells }
    }

    /// The reference construction with `r1, r2, r3`.
    pub fn standard() -> Self {
        Self::with_indices([1, 2, 3]).expect("indices 1, 2, 3 are valid")
    }

    /// The reference construction with `(r1, r2, r3)` replaced by
    /// `(r_k1, r_k2, r_k3)`. Columns: yyx, yxy, xyy, xxx.
    ///
    /// ```text
    /// node 1:  -r1     -r1     r2.r3   r2.r3
    /// node 2:   r2     r1.r3   r2      r1.r3
    /// node 3:   r1.r2  r3     -r3      r1.r2
    /// ```
    pub fn with_indices(k: [u32; 3]) -> Result<Self, GhzError> {
        let f = |neg: bool, idx: &[usize]| {
            ResponseFn::new(neg, &idx.iter().map(|&i| k[i - 1]).collect::<Vec<_>>())
        };
        Ok(NodeAssignment {
            cells: [
                [f(true, &[1])?, f(true, &[1])?, f(false, &[2, 3])?, f(false, &[2, 3])?],
                [f(false, &[2])?, f(false, &[1, 3])?, f(false, &[2])?, f(false, &[1, 3])?],
                [f(false, &[1, 2])?, f(false, &[3])?, f(true, &[3])?, f(false, &[1, 2])?],
            ],
        })
    }

    pub fn response(&self, node: NodeId, regime: Regime) -> &ResponseFn {
        &self.cells[node.index()][regime.index()]
    }

    /// Output at `t` regardless of any schedule; used for counterfactual evaluation.
    pub fn evaluate(&self, node: NodeId, regime: Regime, t: &Rational) -> Result<Sign, GhzError> {
        self.response(node, regime).evaluate(t)
    }

    /// The triple product of a regime as a symbolic response function.
    pub fn symbolic_product(&self, regime: Regime) -> ResponseFn {
        NodeId::ALL
            .iter()
            .map(|&n| self.response(n, regime).clone())
            .fold(ResponseFn { negated: false, indices: Vec::new() }, |acc, f| acc.times(&f))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub regime: Regime,
    pub start: Rational,
    pub end: Rational,
}

impl Window {
    /// Open interval membership.
    pub fn contains(&self, t: &Rational) -> bool {
        *t > self.start && *t < self.end
    }
}

/// Ordered, disjoint setting windows; gaps between them are switching time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    windows: Vec<Window>,
}

impl Schedule {
    pub fn new(windows: Vec<Window>) -> Result<Self, GhzError> {
        if windows.is_empty() {
            return Err(GhzError::BadSchedule("no windows".into()));
        }
        let mut prev_end: Option<&Rational> = None;
        for (i, w) in windows.iter().enumerate() {
            if !w.start.is_positive() {
                return Err(GhzError::BadSchedule(format!("{} window starts at {}", w.regime, format_rational(&w.start))));
            }
            if w.start >= w.end {
                return Err(GhzError::BadSchedule(format!("{} window is empty", w.regime)));
            }
            if prev_end.is_some_and(|e| w.start < *e) {
                return Err(GhzError::BadSchedule(format!("{} window overlaps its predecessor", w.regime)));
            }
            if windows[..i].iter().any(|o| o.regime == w.regime) {
                return Err(GhzError::BadSchedule(format!("{} appears twice", w.regime)));
            }
            prev_end = Some(&w.end);
        }
        Ok(Schedule { windows })
    }

    /// Four unit windows in the order yyx, yxy, xyy, xxx, starting at 1 with
    /// gaps of 1/4.
    pub fn standard() -> Self {
        let windows = Regime::ALL
            .iter()
            .enumerate()
            .map(|(i, &regime)| {
                let start = int(1) + ratio(5 * i as i64, 4);
                Window { regime, end: &start + int(1), start }
            })
            .collect();
        Schedule::new(windows).expect("standard schedule is well formed")
    }

    /// Boundaries `t0 t1 t2 ...` for windows in the order yyx, yxy, xyy, xxx.
    pub fn from_boundaries(bounds: &[Rational]) -> Result<Self, GhzError> {
        if bounds.len() != 8 {
            return Err(GhzError::BadSchedule(format!("expected 8 boundaries, got {}", bounds.len())));
        }
        Schedule::new(
            Regime::ALL
                .iter()
                .enumerate()
                .map(|(i, &regime)| Window { regime, start: bounds[2 * i].clone(), end: bounds[2 * i + 1].clone() })
                .collect(),
        )
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn window(&self, regime: Regime) -> Result<&Window, GhzError> {
        self.windows.iter().find(|w| w.regime == regime).ok_or(GhzError::MissingWindow(regime))
    }

    /// `regime start end` triples separated by spaces, as sent on the wire.
    pub fn encode(&self) -> String {
        self.windows
            .iter()
            .map(|w| format!("{} {} {}", w.regime, format_fraction(&w.start), format_fraction(&w.end)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn decode(text: &str) -> Result<Self, GhzError> {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.is_empty() || !fields.len().is_multiple_of(3) {
            return Err(GhzError::BadSchedule(format!("malformed schedule `{text}`")));
        }
        let parse = |s: &str| parse_rational(s).map_err(|e| GhzError::BadSchedule(e.to_string()));
        let windows = fields
            .chunks(3)
            .map(|c| Ok(Window { regime: Regime::parse(c[0])?, start: parse(c[1])?, end: parse(c[2])? }))
            .collect::<Result<Vec<_>, GhzError>>()?;
        Schedule::new(windows)
    }
}

/// Output of `node` under `regime` at `t`, refusing times outside the regime's window.
pub fn node_output(
    assignment: &NodeAssignment,
    schedule: &Schedule,
    node: NodeId,
    regime: Regime,
    t: &Rational,
) -> Result<Sign, GhzError> {
    let window = schedule.window(regime)?;
    if !window.contains(t) {
        return Err(GhzError::OutsideWindow { regime, t: format_rational(t) });
    }
    assignment.evaluate(node, regime, t)
}

/// What a measurement station may see: the regime and the shared time.
pub trait Station {
    fn observe(&self, regime: Regime, t: &Rational) -> Result<Sign, GhzError>;
}

pub struct LocalStation<'a> {
    pub node: NodeId,
    pub assignment: &'a NodeAssignment,
    pub schedule: &'a Schedule,
}

impl Station for LocalStation<'_> {
    fn observe(&self, regime: Regime, t: &Rational) -> Result<Sign, GhzError> {
        node_output(self.assignment, self.schedule, self.node, regime, t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialTriple {
    pub regime: Regime,
    pub t: Rational,
    pub outputs: [Sign; 3],
}

impl TrialTriple {
    pub fn product(&self) -> Sign {
        self.outputs[0] * self.outputs[1] * self.outputs[2]
    }

    /// `id regime t o1 o2 o3 product`, with `t` as `num/den`.
    pub fn to_line(&self, id: u64) -> String {
        format!(
            "{id} {} {} {} {} {} {}",
            self.regime,
            format_fraction(&self.t),
            self.outputs[0],
            self.outputs[1],
            self.outputs[2],
            self.product()
        )
    }
}

/// Writes trials as numbered lines, the format shared by in-process and networked runs.
pub fn format_trial_log(trials: &[TrialTriple]) -> String {
    trials.iter().enumerate().map(|(i, t)| t.to_line(i as u64) + "\n").collect()
}

/// `samples` times drawn uniformly on the open window grid
/// `start + (end - start) k / 2^32`, `k` in `1..2^32`, from the regime's own stream.
pub fn measurement_times(
    schedule: &Schedule,
    regime: Regime,
    samples: u64,
    seed: u64,
) -> Result<Vec<Rational>, GhzError> {
    if samples == 0 {
        return Err(GhzError::NoSamples);
    }
    let window = schedule.window(regime)?;
    let rng = stream(seed, Purpose::MeasurementTime, regime.index() as u64);
    Ok(grid_times(rng, &window.start, &(&window.end - &window.start), samples))
}

/// `start + length k / 2^32` with `k` uniform in `1..2^32`.
fn grid_times(mut rng: impl RngCore, start: &Rational, length: &Rational, count: u64) -> Vec<Rational> {
    let grid = Rational::from_integer(BigInt::one() << TIME_GRID_BITS);
    (0..count)
        .map(|_| loop {
            let k = rng.next_u64() >> (64 - TIME_GRID_BITS);
            if k != 0 {
                break start + length * Rational::from_integer(BigInt::from(k)) / &grid;
            }
        })
        .collect()
}

/// `count` times on the same dyadic grid, spread over the whole schedule
/// from the first window's start to the last window's end, gaps included.
pub fn probe_times(schedule: &Schedule, count: u64, seed: u64) -> Result<Vec<Rational>, GhzError> {
    if count == 0 {
        return Err(GhzError::NoSamples);
    }
    let windows = schedule.windows();
    let start = &windows[0].start;
    let length = &windows[windows.len() - 1].end - start;
    Ok(grid_times(stream(seed, Purpose::ProbeTime, 0), start, &length, count))
}

pub fn run_window_with(
    schedule: &Schedule,
    stations: [&dyn Station; 3],
    regime: Regime,
    samples: u64,
    seed: u64,
) -> Result<Vec<TrialTriple>, GhzError> {
    measurement_times(schedule, regime, samples, seed)?
        .into_iter()
        .map(|t| {
            let outputs = [
                stations[0].observe(regime, &t)?,
                stations[1].observe(regime, &t)?,
                stations[2].observe(regime, &t)?,
            ];
            Ok(TrialTriple { regime, t, outputs })
        })
        .collect()
}

pub fn run_window(
    schedule: &Schedule,
    assignment: &NodeAssignment,
    regime: Regime,
    samples: u64,
    seed: u64,
) -> Result<Vec<TrialTriple>, GhzError> {
    let stations = NodeId::ALL.map(|node| LocalStation { node, assignment, schedule });
    run_window_with(schedule, [&stations[0], &stations[1], &stations[2]], regime, samples, seed)
}

/// Every window of the schedule in order, `samples` trials each.
pub fn run_schedule(
    schedule: &Schedule,
    assignment: &NodeAssignment,
    samples: u64,
    seed: u64,
) -> Result<Vec<TrialTriple>, GhzError> {
    let mut out = Vec::new();
    for w in schedule.windows() {
        out.extend(run_window(schedule, assignment, w.regime, samples, seed)?);
    }
    Ok(out)
}

/// Fraction of `+1` outputs of `node`.
pub fn marginal_balance(trials: &[TrialTriple], node: NodeId) -> Result<f64, GhzError> {
    if trials.is_empty() {
        return Err(GhzError::Empty);
    }
    let plus = trials.iter().filter(|t| t.outputs[node.index()].is_plus()).count();
    Ok(plus as f64 / trials.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeReport {
    pub t: Rational,
    pub y3_yxy: Sign,
    pub y3_xyy: Sign,
    /// `Y3` under yxy times `Y3` under xyy at the same `t`; `-1` for the reference assignment.
    pub y3_product: Sign,
    pub y1_yyx: Sign,
    pub y1_yxy: Sign,
    pub y1_product: Sign,
}

/// Evaluates the same station's `Y` under two regimes at one time.
pub fn counterfactual_probe(assignment: &NodeAssignment, t: &Rational) -> Result<ProbeReport, GhzError> {
    let [n1, _, n3] = NodeId::ALL;
    let y3_yxy = assignment.evaluate(n3, Regime::Yxy, t)?;
    let y3_xyy = assignment.evaluate(n3, Regime::Xyy, t)?;
    let y1_yyx = assignment.evaluate(n1, Regime::Yyx, t)?;
    let y1_yxy = assignment.evaluate(n1, Regime::Yxy, t)?;
    Ok(ProbeReport {
        t: t.clone(),
        y3_yxy,
        y3_xyy,
        y3_product: y3_yxy * y3_xyy,
        y1_yyx,
        y1_yxy,
        y1_product: y1_yyx * y1_yxy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(i: u32) -> RademacherIndex {
        RademacherIndex::new(i).unwrap()
    }

    fn r(text: &str) -> Rational {
        parse_rational(text).unwrap()
    }

    #[test]
    fn rademacher_examples() {
        assert_eq!(rademacher(k(1), &r("1/4")).unwrap(), Sign::Plus);
        assert_eq!(rademacher(k(2), &r("3/10")).unwrap(), Sign::Minus);
        assert_eq!(rademacher(k(1), &r("3/4")).unwrap(), Sign::Minus);
        for t in ["1/7", "2/9", "5/8", "13/16"] {
            let t = r(t);
            assert_eq!(rademacher(k(1), &t).unwrap(), rademacher(k(1), &(&t + int(1))).unwrap());
            // r_3 has period 1/4.
            assert_eq!(rademacher(k(3), &t).unwrap(), rademacher(k(3), &(&t + ratio(1, 4))).unwrap());
        }
    }

    #[test]
    fn rademacher_zero_convention_and_domain() {
        // sin(2π · 1/2) = 0 maps to +1.
        assert_eq!(rademacher(k(1), &r("1/2")).unwrap(), Sign::Plus);
        assert_eq!(rademacher(k(1), &r("1")).unwrap(), Sign::Plus);
        assert!(matches!(rademacher(k(1), &int(0)), Err(GhzError::NonPositiveTime(_))));
        assert!(matches!(rademacher(k(1), &r("-1/3")), Err(GhzError::NonPositiveTime(_))));
        assert_eq!(RademacherIndex::new(0), Err(GhzError::ZeroIndex));
    }

    #[test]
    fn rademacher_matches_floating_sine_away_from_zeros() {
        for num in (1..400i64).filter(|n| n % 97 != 0) {
            let t = ratio(num, 97);
            for kk in 1..=5 {
                let s = ((1u64 << kk) as f64 * std::f64::consts::PI * num as f64 / 97.0).sin();
                assert_eq!(rademacher(k(kk), &t).unwrap(), Sign::from_bool(s > 0.0), "k={kk} t={num}/97");
            }
        }
    }

    #[test]
    fn regimes_assign_observables() {
        let [n1, n2, n3] = NodeId::ALL;
        assert_eq!(Regime::Yyx.observable(n3), Observable::X);
        assert_eq!(Regime::Yyx.observable(n1), Observable::Y);
        assert_eq!(Regime::Xyy.observable(n1), Observable::X);
        assert_eq!(Regime::Yxy.observable(n2), Observable::X);
        assert_eq!(Regime::parse("xxx").unwrap(), Regime::Xxx);
        assert!(Regime::parse("zzz").is_err());
    }

    #[test]
    fn symbolic_products_are_constant() {
        let a = NodeAssignment::standard();
        for regime in Regime::ALL {
            assert_eq!(a.symbolic_product(regime).as_constant(), Some(regime.expected_product()));
        }
    }

    #[test]
    fn larger_indices_keep_the_identities() {
        let a = NodeAssignment::with_indices([5, 9, 17]).unwrap();
        for regime in Regime::ALL {
            assert_eq!(a.symbolic_product(regime).as_constant(), Some(regime.expected_product()));
        }
        assert!(NodeAssignment::with_indices([0, 2, 3]).is_err());
    }

    #[test]
    fn node_output_examples() {
        let a = NodeAssignment::standard();
        let s = Schedule::standard();
        let [n1, _, n3] = NodeId::ALL;
        let t = r("2.3");
        assert_eq!(node_output(&a, &s, n3, Regime::Yxy, &t).unwrap(), rademacher(k(3), &t).unwrap());
        let t2 = &t + int(5) / int(4);
        assert_eq!(node_output(&a, &s, n3, Regime::Xyy, &t2).unwrap(), rademacher(k(3), &t2).unwrap().flip());
        // floor(4 · 5.3) = 21 and floor(8 · 5.3) = 42.
        let t3 = r("5.3");
        assert_eq!(rademacher(k(2), &t3).unwrap(), Sign::Minus);
        assert_eq!(rademacher(k(3), &t3).unwrap(), Sign::Plus);
        assert_eq!(node_output(&a, &s, n1, Regime::Xxx, &t3).unwrap(), Sign::Minus);
        assert!(matches!(
            node_output(&a, &s, n1, Regime::Xxx, &r("2")),
            Err(GhzError::OutsideWindow { .. })
        ));
    }

    #[test]
    fn schedule_validation() {
        let s = Schedule::standard();
        assert_eq!(s.window(Regime::Yxy).unwrap().start, r("9/4"));
        assert_eq!(Schedule::decode(&s.encode()).unwrap(), s);
        let w = |regime, a: &str, b: &str| Window { regime, start: r(a), end: r(b) };
        assert!(Schedule::new(vec![]).is_err());
        assert!(Schedule::new(vec![w(Regime::Yyx, "0", "1")]).is_err());
        assert!(Schedule::new(vec![w(Regime::Yyx, "2", "1")]).is_err());
        assert!(Schedule::new(vec![w(Regime::Yyx, "1", "2"), w(Regime::Xxx, "3/2", "3")]).is_err());
        assert!(Schedule::new(vec![w(Regime::Yyx, "1", "2"), w(Regime::Yyx, "3", "4")]).is_err());
        // Touching windows are allowed.
        assert!(Schedule::new(vec![w(Regime::Yyx, "1", "2"), w(Regime::Xxx, "2", "3")]).is_ok());
        let partial = Schedule::new(vec![w(Regime::Yyx, "1", "2")]).unwrap();
        assert_eq!(
            run_window(&partial, &NodeAssignment::standard(), Regime::Xxx, 3, 1),
            Err(GhzError::MissingWindow(Regime::Xxx))
        );
    }

    #[test]
    fn run_window_products_and_determinism() {
        let a = NodeAssignment::standard();
        let s = Schedule::standard();
        for regime in Regime::ALL {
            let trials = run_window(&s, &a, regime, 500, 11).unwrap();
            assert!(trials.iter().all(|t| t.product() == regime.expected_product()));
            assert!(trials.iter().all(|t| s.window(regime).unwrap().contains(&t.t)));
            assert_eq!(trials, run_window(&s, &a, regime, 500, 11).unwrap());
        }
        assert_eq!(run_window(&s, &a, Regime::Yyx, 0, 1), Err(GhzError::NoSamples));
    }

    #[test]
    fn times_sit_on_the_dyadic_grid() {
        let s = Schedule::standard();
        let times = measurement_times(&s, Regime::Yxy, 50, 3).unwrap();
        let grid = BigInt::one() << TIME_GRID_BITS;
        for t in times {
            assert!((&grid % t.denom()).is_zero());
        }
    }

    #[test]
    fn marginal_balance_examples() {
        let one = TrialTriple { regime: Regime::Yyx, t: r("3/2"), outputs: [Sign::Plus; 3] };
        assert_eq!(marginal_balance(&[one], NodeId::ALL[0]).unwrap(), 1.0);
        assert_eq!(marginal_balance(&[], NodeId::ALL[0]), Err(GhzError::Empty));
    }

    #[test]
    fn counterfactual_probe_examples() {
        let a = NodeAssignment::standard();
        for t in ["1/8", "3/16", "5/16", "7/3"] {
            let t = r(t);
            let p = counterfactual_probe(&a, &t).unwrap();
            assert_eq!(p.y3_product, Sign::Minus);
            assert_eq!(p.y1_product, Sign::Plus);
        }
        assert!(counterfactual_probe(&a, &int(0)).is_err());
    }

    #[test]
    fn trial_line_format() {
        let t = TrialTriple { regime: Regime::Xxx, t: r("5"), outputs: [Sign::Plus, Sign::Minus, Sign::Minus] };
        assert_eq!(t.to_line(7), "7 xxx 5/1 +1 -1 -1 +1");
    }
}
