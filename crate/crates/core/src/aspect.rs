//! Monte Carlo sampling of Aspect-style runs.
//!
//! Two generators feed the same ⟨γ⟩ statistic
//! `mean(ab) + mean(ac) + mean(db) - mean(dc)` of outcome products:
//!
//! * [`sample_delayed_choice`] draws a row of a 4x4 stochastic matrix
//!   uniformly, then one outcome pair from that row. Nothing ties the rows
//!   together, so ⟨γ⟩ can reach 4.
//! * [`sample_source_model`] draws a hidden state λ and two independent
//!   settings; the outcomes are fixed functions of setting and λ. Here ⟨γ⟩
//!   stays within [-2, 2] and [`reorder_demonstration`] exhibits why.
//!
//! Trials are generated in fixed blocks of [`BLOCK_TRIALS`], each block from
//! its own random streams, so serial and parallel runs agree draw for draw.

use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use thiserror::Error;

use crate::dist::{pair_table_from_covariance, qm_covariance, Covariance, DistError, Sign};
use crate::inequalities::{ChshQuad, ChshTerm};
use crate::rational::{format_rational, int, ratio, to_f64, Rational};
use crate::rng::{pick, stream, unit_f64, Purpose};

pub const BLOCK_TRIALS: u64 = 1 << 16;

/// A sampling row: which setting pair was measured.
pub type Row = ChshTerm;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AspectError {
    #[error("row {row}: {reason}")]
    BadRow { row: &'static str, reason: String },
    #[error("no trials recorded for row {0}")]
    InsufficientData(&'static str),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("source model: {0}")]
    BadModel(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

fn row_index(row: Row) -> usize {
    match row {
        ChshTerm::Ab => 0,
        ChshTerm::Ac => 1,
        ChshTerm::Db => 2,
        ChshTerm::Dc => 3,
    }
}

const CELLS: [(Sign, Sign); 4] = [
    (Sign::Plus, Sign::Plus),
    (Sign::Plus, Sign::Minus),
    (Sign::Minus, Sign::Plus),
    (Sign::Minus, Sign::Minus),
];

/// Rows `ab, ac, db, dc`, each a law on `(+,+) (+,-) (-,+) (-,-)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticMatrix {
    rows: [[Rational; 4]; 4],
}

impl StochasticMatrix {
    pub fn new(rows: [[Rational; 4]; 4]) -> Result<Self, AspectError> {
        for (row, label) in rows.iter().zip(ChshTerm::ALL) {
            if row.iter().any(|p| p.is_negative()) {
                return Err(AspectError::BadRow { row: label.name(), reason: "negative entry".into() });
            }
            let total: Rational = row.iter().sum();
            if !total.is_one() {
                return Err(AspectError::BadRow {
                    row: label.name(),
                    reason: format!("sums to {}", format_rational(&total)),
                });
            }
        }
        Ok(StochasticMatrix { rows })
    }

    pub fn from_covariances(quad: &ChshQuad) -> Self {
        let row = |s: &Covariance| pair_table_from_covariance(0, 1, s).table;
        StochasticMatrix {
            rows: [row(&quad.sigma_ab), row(&quad.sigma_ac), row(&quad.sigma_db), row(&quad.sigma_dc)],
        }
    }

    /// Rows `ab, ac, db` perfectly correlated, row `dc` perfectly anti-correlated.
    pub fn gamma_max() -> Self {
        let half = ratio(1, 2);
        let z = Rational::zero;
        let same = [half.clone(), z(), z(), half.clone()];
        let differ = [z(), half.clone(), half, z()];
        StochasticMatrix { rows: [same.clone(), same.clone(), same, differ] }
    }

    pub fn rows(&self) -> &[[Rational; 4]; 4] {
        &self.rows
    }

    pub fn row(&self, row: Row) -> &[Rational; 4] {
        &self.rows[row_index(row)]
    }

    /// Expected outcome product of a row.
    pub fn row_correlation(&self, row: Row) -> Rational {
        let [pp, pm, mp, mm] = self.row(row);
        pp - pm - mp + mm
    }

    /// Exact expectation of ⟨γ⟩ under delayed-choice sampling.
    pub fn population_gamma(&self) -> Rational {
        self.row_correlation(ChshTerm::Ab) + self.row_correlation(ChshTerm::Ac)
            + self.row_correlation(ChshTerm::Db)
            - self.row_correlation(ChshTerm::Dc)
    }

    fn cumulative(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = Rational::zero();
            for (c, p) in row.iter().enumerate() {
                acc += p;
                out[r][c] = to_f64(&acc);
            }
        }
        out
    }
}

/// Rows from singlet correlations `-cos(angle)` for `ab, ac, db, dc`.
pub fn qm_matrix(angles_radians: [f64; 4], tolerance: f64) -> Result<StochasticMatrix, AspectError> {
    let s = angles_radians
        .iter()
        .map(|&a| qm_covariance(a, tolerance))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StochasticMatrix::from_covariances(&ChshQuad {
        sigma_ab: s[0].clone(),
        sigma_ac: s[1].clone(),
        sigma_db: s[2].clone(),
        sigma_dc: s[3].clone(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunRecord {
    pub trial: u64,
    pub row: Row,
    pub outcome: (Sign, Sign),
}

impl RunRecord {
    pub fn product(&self) -> Sign {
        self.outcome.0 * self.outcome.1
    }
}

fn run_blocks<T: Send>(trials: u64, exec: Execution, f: impl Fn(u64, u64) -> Vec<T> + Sync) -> Vec<T> {
    let count = trials.div_ceil(BLOCK_TRIALS) as usize;
    let block = |b: usize| {
        let b = b as u64;
        f(b, (trials - b * BLOCK_TRIALS).min(BLOCK_TRIALS))
    };
    // Blocks are collected in index order either way.
    let per_block: Vec<Vec<T>> = match exec {
        Execution::Serial => (0..count).map(block).collect(),
        Execution::Parallel => (0..count).into_par_iter().map(block).collect(),
    };
    per_block.into_iter().flatten().collect()
}

/// One uniformly chosen row per trial, then one outcome from that row.
///
/// The row is the top two bits of one draw from the row stream; the outcome
/// compares a 53-bit uniform from the outcome stream with the row's
/// cumulative probabilities.
pub fn sample_delayed_choice(
    matrix: &StochasticMatrix,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<RunRecord>, AspectError> {
    if trials == 0 {
        return Err(AspectError::NoTrials);
    }
    let cumulative = matrix.cumulative();
    Ok(run_blocks(trials, exec, |block, n| {
        let mut rows = stream(seed, Purpose::RowChoice, block);
        let mut outcomes = stream(seed, Purpose::OutcomeChoice, block);
        (0..n)
            .map(|k| {
                let r = (rows.next_u64() >> 62) as usize;
                let cell = pick(&cumulative[r], unit_f64(&mut outcomes));
                RunRecord { trial: block * BLOCK_TRIALS + k, row: ChshTerm::ALL[r], outcome: CELLS[cell] }
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    /// Mean outcome product per row, order `ab, ac, db, dc`.
    pub means: [f64; 4],
    pub counts: [u64; 4],
    pub gamma: f64,
    /// Per-row sample variances combined as independent: `sqrt(sum var_r / n_r)`.
    pub standard_error: f64,
}

impl GammaEstimate {
    /// `|gamma - target| <= k * standard_error`
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.gamma - target).abs() <= k * self.standard_error
    }
}

impl fmt::Display for GammaEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma={:.6} se={:.6}", self.gamma, self.standard_error)
    }
}

pub fn estimate_gamma(records: &[RunRecord]) -> Result<GammaEstimate, AspectError> {
    let mut counts = [0u64; 4];
    let mut sums = [0i64; 4];
    for r in records {
        let i = row_index(r.row);
        counts[i] += 1;
        sums[i] += r.product().value();
    }
    for (i, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(AspectError::InsufficientData(ChshTerm::ALL[i].name()));
        }
    }
    let mut means = [0.0; 4];
    let mut variance_of_mean = 0.0;
    for i in 0..4 {
        let n = counts[i] as f64;
        let mean = sums[i] as f64 / n;
        means[i] = mean;
        // Products are ±1, so the unbiased sample variance is n/(n-1) (1 - mean^2).
        if counts[i] > 1 {
            let var = (n / (n - 1.0)) * (1.0 - mean * mean).max(0.0);
            variance_of_mean += var / n;
        }
    }
    Ok(GammaEstimate {
        means,
        counts,
        gamma: means[0] + means[1] + means[2] - means[3],
        standard_error: variance_of_mean.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettingA {
    A,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettingB {
    B,
    C,
}

pub fn row_for(x: SettingA, y: SettingB) -> Row {
    match (x, y) {
        (SettingA::A, SettingB::B) => ChshTerm::Ab,
        (SettingA::A, SettingB::C) => ChshTerm::Ac,
        (SettingA::D, SettingB::B) => ChshTerm::Db,
        (SettingA::D, SettingB::C) => ChshTerm::Dc,
    }
}

/// One value λ_s of the hidden source parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenState {
    pub probability: Rational,
    /// Responses `A(a, λ), A(d, λ)`.
    pub station_a: [Sign; 2],
    /// Responses `B(b, λ), B(c, λ)`.
    pub station_b: [Sign; 2],
}

impl HiddenState {
    pub fn response_a(&self, x: SettingA) -> Sign {
        self.station_a[match x {
            SettingA::A => 0,
            SettingA::D => 1,
        }]
    }

    pub fn response_b(&self, y: SettingB) -> Sign {
        self.station_b[match y {
            SettingB::B => 0,
            SettingB::C => 1,
        }]
    }

    /// `A(a)B(b) + A(a)B(c) + A(d)B(b) - A(d)B(c)`, always ±2.
    pub fn gamma(&self) -> i64 {
        let p = |x, y| (self.response_a(x) * self.response_b(y)).value();
        p(SettingA::A, SettingB::B) + p(SettingA::A, SettingB::C) + p(SettingA::D, SettingB::B)
            - p(SettingA::D, SettingB::C)
    }
}

/// A finitely supported source parameter with deterministic responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceModel {
    states: Vec<HiddenState>,
}

impl SourceModel {
    pub fn new(states: Vec<HiddenState>) -> Result<Self, AspectError> {
        if states.is_empty() {
            return Err(AspectError::BadModel("empty support".into()));
        }
        if let Some(s) = states.iter().find(|s| !s.probability.is_positive()) {
            return Err(AspectError::BadModel(format!(
                "probability {} is not positive",
                format_rational(&s.probability)
            )));
        }
        let total: Rational = states.iter().map(|s| &s.probability).sum();
        if !total.is_one() {
            return Err(AspectError::BadModel(format!("probabilities sum to {}", format_rational(&total))));
        }
        Ok(SourceModel { states })
    }

    /// Random support of 1 to 6 states with integer weights 1..=9 and random responses.
    pub fn random(rng: &mut impl Rng) -> Self {
        let m = rng.random_range(1..=6);
        let weights: Vec<i64> = (0..m).map(|_| rng.random_range(1..=9)).collect();
        let total: i64 = weights.iter().sum();
        let mut sign = || Sign::from_bool(rng.random_bool(0.5));
        let states = weights
            .iter()
            .map(|&w| HiddenState {
                probability: ratio(w, total),
                station_a: [sign(), sign()],
                station_b: [sign(), sign()],
            })
            .collect();
        SourceModel::new(states).expect("weights are positive and normalized")
    }

    pub fn states(&self) -> &[HiddenState] {
        &self.states
    }

    /// Exact expectation of ⟨γ⟩: `sum_s p_s γ(λ_s)`.
    pub fn population_gamma(&self) -> Rational {
        self.states.iter().map(|s| &s.probability * int(s.gamma())).sum()
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = Rational::zero();
        self.states
            .iter()
            .map(|s| {
                acc += &s.probability;
                to_f64(&acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceRecord {
    pub trial: u64,
    pub state: usize,
    pub row: Row,
    pub outcome: (Sign, Sign),
}

impl SourceRecord {
    pub fn product(&self) -> Sign {
        self.outcome.0 * self.outcome.1
    }

    pub fn as_run(&self) -> RunRecord {
        RunRecord { trial: self.trial, row: self.row, outcome: self.outcome }
    }
}

/// Per trial: λ from the hidden-state stream, then the two settings from the
/// top two bits of one settings-stream draw (bit 63 picks `a`/`d`, bit 62
/// picks `b`/`c`).
pub fn sample_source_model(
    model: &SourceModel,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<SourceRecord>, AspectError> {
    if trials == 0 {
        return Err(AspectError::NoTrials);
    }
    let cumulative = model.cumulative();
    Ok(run_blocks(trials, exec, |block, n| {
        let mut hidden = stream(seed, Purpose::HiddenState, block);
        let mut settings = stream(seed, Purpose::Settings, block);
        (0..n)
            .map(|k| {
                let s = pick(&cumulative, unit_f64(&mut hidden));
                let bits = settings.next_u64();
                let x = if bits >> 63 == 0 { SettingA::A } else { SettingA::D };
                let y = if (bits >> 62) & 1 == 0 { SettingB::B } else { SettingB::C };
                let state = &model.states[s];
                SourceRecord {
                    trial: block * BLOCK_TRIALS + k,
                    state: s,
                    row: row_for(x, y),
                    outcome: (state.response_a(x), state.response_b(y)),
                }
            })
            .collect()
    }))
}

pub fn simulate_source_model(
    model: &SourceModel,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<GammaEstimate, AspectError> {
    let records = sample_source_model(model, trials, seed, exec)?;
    let runs: Vec<RunRecord> = records.iter().map(SourceRecord::as_run).collect();
    estimate_gamma(&runs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGroup {
    pub state: usize,
    pub records: u64,
    pub quadruples: u64,
    pub discarded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReorderReport {
    pub trials: u64,
    pub groups: Vec<StateGroup>,
    pub quadruples: u64,
    pub discarded: u64,
    pub gamma_plus_two: u64,
    pub gamma_minus_two: u64,
    /// Complete quadruples whose γ is not ±2; zero for every source model.
    pub exceptions: u64,
    /// ⟨a.b⟩ + ⟨a.c⟩ + ⟨d.b⟩ - ⟨d.c⟩ over the reordered quadruples, `None` if none formed.
    pub reordered_gamma: Option<f64>,
}

impl ReorderReport {
    pub const POLICY: &'static str =
        "greedy arrival-order grouping per hidden state; incomplete remainders discarded";
}

/// Regroups source-model trials by λ into complete setting quadruples.
///
/// Within each λ, the k-th quadruple takes the k-th record of each of the
/// four rows in arrival order; records beyond the shortest row are discarded.
pub fn reorder_demonstration(
    model: &SourceModel,
    trials: u64,
    seed: u64,
) -> Result<ReorderReport, AspectError> {
    let records = sample_source_model(model, trials, seed, Execution::Serial)?;
    let mut queues: Vec<[Vec<Sign>; 4]> = vec![Default::default(); model.states.len()];
    for r in &records {
        queues[r.state][row_index(r.row)].push(r.product());
    }

    let mut report = ReorderReport {
        trials,
        groups: Vec::new(),
        quadruples: 0,
        discarded: 0,
        gamma_plus_two: 0,
        gamma_minus_two: 0,
        exceptions: 0,
        reordered_gamma: None,
    };
    let mut gamma_sum = 0i64;
    for (state, rows) in queues.iter().enumerate() {
        let records: u64 = rows.iter().map(|q| q.len() as u64).sum();
        let quads = rows.iter().map(Vec::len).min().unwrap_or(0);
        for k in 0..quads {
            let g = rows[0][k].value() + rows[1][k].value() + rows[2][k].value() - rows[3][k].value();
            match g {
                2 => report.gamma_plus_two += 1,
                -2 => report.gamma_minus_two += 1,
                _ => report.exceptions += 1,
            }
            gamma_sum += g;
        }
        let discarded = records - 4 * quads as u64;
        report.groups.push(StateGroup { state, records, quadruples: quads as u64, discarded });
        report.quadruples += quads as u64;
        report.discarded += discarded;
    }
    if report.quadruples > 0 {
        report.reordered_gamma = Some(gamma_sum as f64 / report.quadruples as f64);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::DEFAULT_PRECISION;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    fn state(p: Rational, a: [i64; 2], b: [i64; 2]) -> HiddenState {
        let s = |v: i64| Sign::from_bool(v > 0);
        HiddenState { probability: p, station_a: [s(a[0]), s(a[1])], station_b: [s(b[0]), s(b[1])] }
    }

    #[test]
    fn matrix_validation() {
        let q = ratio(1, 4);
        let good = std::array::from_fn(|_| std::array::from_fn(|_| q.clone()));
        assert!(StochasticMatrix::new(good).is_ok());
        let mut bad: [[Rational; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| q.clone()));
        bad[3][0] = ratio(1, 2);
        assert!(matches!(StochasticMatrix::new(bad), Err(AspectError::BadRow { row: "dc", .. })));
    }

    #[test]
    fn qm_matrix_examples() {
        let m = qm_matrix([deg(135.0), deg(135.0), deg(135.0), deg(45.0)], DEFAULT_PRECISION).unwrap();
        let s = Covariance::from_f64(std::f64::consts::FRAC_1_SQRT_2, DEFAULT_PRECISION).unwrap();
        assert_eq!(m.row_correlation(ChshTerm::Ab), s.value().clone());
        assert_eq!(m.row_correlation(ChshTerm::Dc), -s.value().clone());
        assert_eq!(m.population_gamma(), s.value() * int(4));

        let flat = qm_matrix([deg(90.0); 4], DEFAULT_PRECISION).unwrap();
        assert!(flat.rows().iter().flatten().all(|p| *p == ratio(1, 4)));

        let aligned = qm_matrix([deg(180.0); 4], DEFAULT_PRECISION).unwrap();
        for row in aligned.rows() {
            assert_eq!(row, &[ratio(1, 2), int(0), int(0), ratio(1, 2)]);
        }
    }

    #[test]
    fn gamma_max_population_is_four() {
        assert_eq!(StochasticMatrix::gamma_max().population_gamma(), int(4));
    }

    #[test]
    fn delayed_choice_is_seed_deterministic() {
        let m = StochasticMatrix::gamma_max();
        let a = sample_delayed_choice(&m, 1000, 9, Execution::Serial).unwrap();
        let b = sample_delayed_choice(&m, 1000, 9, Execution::Serial).unwrap();
        assert_eq!(a, b);
        let c = sample_delayed_choice(&m, 1000, 10, Execution::Serial).unwrap();
        assert_ne!(a, c);
        assert_eq!(sample_delayed_choice(&m, 0, 9, Execution::Serial), Err(AspectError::NoTrials));
    }

    #[test]
    fn serial_and_parallel_agree_across_blocks() {
        let m = qm_matrix([deg(135.0), deg(135.0), deg(135.0), deg(45.0)], DEFAULT_PRECISION).unwrap();
        let trials = 3 * BLOCK_TRIALS + 17;
        let a = sample_delayed_choice(&m, trials, 4, Execution::Serial).unwrap();
        let b = sample_delayed_choice(&m, trials, 4, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.last().unwrap().trial, trials - 1);
    }

    #[test]
    fn gamma_max_sampling_gives_exactly_four() {
        let records = sample_delayed_choice(&StochasticMatrix::gamma_max(), 10_000, 2, Execution::Serial).unwrap();
        let est = estimate_gamma(&records).unwrap();
        assert_eq!(est.gamma, 4.0);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn missing_row_is_reported() {
        let records = vec![
            RunRecord { trial: 0, row: ChshTerm::Ab, outcome: (Sign::Plus, Sign::Plus) },
            RunRecord { trial: 1, row: ChshTerm::Ac, outcome: (Sign::Plus, Sign::Plus) },
            RunRecord { trial: 2, row: ChshTerm::Dc, outcome: (Sign::Plus, Sign::Plus) },
        ];
        assert_eq!(estimate_gamma(&records), Err(AspectError::InsufficientData("db")));
    }

    #[test]
    fn constant_model_gamma_is_two() {
        let model = SourceModel::new(vec![state(int(1), [1, 1], [1, 1])]).unwrap();
        let est = simulate_source_model(&model, 5_000, 3, Execution::Serial).unwrap();
        assert_eq!(est.gamma, 2.0);
        assert_eq!(model.population_gamma(), int(2));
    }

    #[test]
    fn two_state_mirror_model_gamma_is_two() {
        // Every response flips between λ1 and λ2, so every product is +1.
        let model = SourceModel::new(vec![
            state(ratio(1, 2), [1, 1], [1, 1]),
            state(ratio(1, 2), [-1, -1], [-1, -1]),
        ])
        .unwrap();
        let est = simulate_source_model(&model, 5_000, 3, Execution::Serial).unwrap();
        assert_eq!(est.gamma, 2.0);
        assert_eq!(est.means, [1.0; 4]);
    }

    #[test]
    fn model_validation() {
        assert!(SourceModel::new(vec![]).is_err());
        assert!(SourceModel::new(vec![state(ratio(1, 2), [1, 1], [1, 1])]).is_err());
        assert!(SourceModel::new(vec![state(int(0), [1, 1], [1, 1]), state(int(1), [1, 1], [1, 1])]).is_err());
    }

    #[test]
    fn hidden_state_gamma_is_always_two_in_magnitude() {
        for bits in 0..16u32 {
            let s = |i: u32| Sign::from_bool(bits >> i & 1 == 0);
            let h = HiddenState { probability: int(1), station_a: [s(0), s(1)], station_b: [s(2), s(3)] };
            assert_eq!(h.gamma().abs(), 2);
        }
    }

    #[test]
    fn reorder_on_tiny_runs_discards() {
        let model = SourceModel::new(vec![state(int(1), [1, -1], [1, 1])]).unwrap();
        let rep = reorder_demonstration(&model, 3, 1).unwrap();
        assert_eq!(rep.quadruples, 0);
        assert_eq!(rep.discarded, 3);
        assert_eq!(rep.reordered_gamma, None);
    }
}
