//! Monte Carlo checks for delayed-choice sampling and source models.

use std::collections::BTreeMap;

use corrlab::aspect::{
    estimate_gamma, qm_matrix, reorder_demonstration, sample_delayed_choice, sample_source_model,
    simulate_source_model, Execution, SourceModel, StochasticMatrix,
};
use corrlab::dist::Sign;
use corrlab::inequalities::ChshTerm;
use corrlab::rational::{to_f64, DEFAULT_PRECISION};
use corrlab::rng::{stream, Purpose};

fn qm() -> StochasticMatrix {
    let a = [135.0f64, 135.0, 135.0, 45.0].map(f64::to_radians);
    qm_matrix(a, DEFAULT_PRECISION).unwrap()
}

#[test]
fn qm_gamma_near_two_root_two() {
    let records = sample_delayed_choice(&qm(), 1_000_000, 42, Execution::Parallel).unwrap();
    let est = estimate_gamma(&records).unwrap();
    assert!(est.within(2.0 * std::f64::consts::SQRT_2, 5.0), "{est}");
    assert!(est.standard_error > 0.0 && est.standard_error < 0.01);
    // Each row is chosen with probability 1/4: binomial sd is sqrt(n p q) ~ 433.
    let sd = (1e6f64 * 0.25 * 0.75).sqrt();
    for n in est.counts {
        assert!((n as f64 - 250_000.0).abs() <= 5.0 * sd, "row count {n}");
    }
}

#[test]
fn serial_and_parallel_agree() {
    let a = sample_delayed_choice(&qm(), 200_000, 9, Execution::Serial).unwrap();
    let b = sample_delayed_choice(&qm(), 200_000, 9, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let model = SourceModel::random(&mut stream(3, Purpose::ModelGeneration, 0));
    let a = sample_source_model(&model, 150_000, 4, Execution::Serial).unwrap();
    let b = sample_source_model(&model, 150_000, 4, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gamma_max_reaches_four() {
    let est = estimate_gamma(&sample_delayed_choice(&StochasticMatrix::gamma_max(), 1_000_000, 7, Execution::Parallel).unwrap())
        .unwrap();
    assert_eq!(est.gamma, 4.0);
    assert!(est.within(4.0, 5.0));
}

#[test]
fn cell_frequencies_follow_the_rows() {
    let m = qm();
    let records = sample_delayed_choice(&m, 400_000, 1, Execution::Parallel).unwrap();
    let mut counts: BTreeMap<(usize, (Sign, Sign)), u64> = BTreeMap::new();
    let mut per_row = [0u64; 4];
    for r in &records {
        let i = ChshTerm::ALL.iter().position(|&t| t == r.row).unwrap();
        per_row[i] += 1;
        *counts.entry((i, r.outcome)).or_default() += 1;
    }
    let cells = [(Sign::Plus, Sign::Plus), (Sign::Plus, Sign::Minus), (Sign::Minus, Sign::Plus), (Sign::Minus, Sign::Minus)];
    for (i, row) in m.rows().iter().enumerate() {
        for (c, p) in cells.iter().zip(row) {
            let p = to_f64(p);
            let n = per_row[i] as f64;
            let observed = *counts.get(&(i, *c)).unwrap_or(&0) as f64;
            assert!((observed - n * p).abs() <= 5.0 * (n * p * (1.0 - p)).sqrt() + 1.0);
        }
    }
}

#[test]
fn random_source_models_respect_the_bound() {
    let mut gen = stream(2024, Purpose::ModelGeneration, 0);
    for i in 0..20 {
        let model = SourceModel::random(&mut gen);
        let est = simulate_source_model(&model, 100_000, i, Execution::Parallel).unwrap();
        assert!(est.gamma.abs() <= 2.0 + 5.0 * est.standard_error, "model {i}: {est}");
        let exact = to_f64(&model.population_gamma());
        assert!(exact.abs() <= 2.0);
        assert!(est.within(exact, 5.0) || est.standard_error == 0.0 && est.gamma == exact, "model {i}: {est} vs {exact}");
    }
}

/// Rebuilds quadruples without the library's grouping: per state, walk the
/// records once and close a quadruple as soon as all four rows are present.
#[test]
fn reorder_matches_an_independent_grouping() {
    let mut gen = stream(77, Purpose::ModelGeneration, 0);
    for seed in 0..10 {
        let model = SourceModel::random(&mut gen);
        let report = reorder_demonstration(&model, 20_000, seed).unwrap();
        assert_eq!(report.exceptions, 0);
        assert_eq!(report.gamma_plus_two + report.gamma_minus_two, report.quadruples);

        let records = sample_source_model(&model, 20_000, seed, Execution::Serial).unwrap();
        let mut quads = 0u64;
        let mut gamma_sum = 0i64;
        for state in 0..model.states().len() {
            let mine: Vec<_> = records.iter().filter(|r| r.state == state).collect();
            let by_row: Vec<Vec<i64>> = ChshTerm::ALL
                .iter()
                .map(|&t| mine.iter().filter(|r| r.row == t).map(|r| r.product().value()).collect())
                .collect();
            let k = by_row.iter().map(Vec::len).min().unwrap();
            for q in 0..k {
                let g = by_row[0][q] + by_row[1][q] + by_row[2][q] - by_row[3][q];
                assert!(g == 2 || g == -2);
                gamma_sum += g;
            }
            quads += k as u64;
        }
        assert_eq!(report.quadruples, quads);
        assert_eq!(report.discarded, 20_000 - 4 * quads);
        if quads > 0 {
            assert_eq!(report.reordered_gamma, Some(gamma_sum as f64 / quads as f64));
            assert!(report.reordered_gamma.unwrap().abs() <= 2.0);
        }
    }
}
