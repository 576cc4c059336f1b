//! Exactness, balance and locality of the three-station construction.

use std::cell::RefCell;

use corrlab::dist::Sign;
use corrlab::ghz::{
    counterfactual_probe, marginal_balance, measurement_times, node_output, run_schedule, run_window, run_window_with,
    GhzError, LocalStation, NodeAssignment, NodeId, Regime, Schedule, Station,
};
use corrlab::rational::{ratio, Rational};
use proptest::prelude::*;

fn window_time(regime: Regime, k: u64) -> Rational {
    let w = Schedule::standard().window(regime).unwrap().clone();
    // k in 1..1000 lands strictly inside the window.
    &w.start + (&w.end - &w.start) * ratio(k as i64, 1000)
}

proptest! {
    #[test]
    fn products_hold_at_every_time(k in 1u64..1000, r in 0usize..4) {
        let regime = Regime::ALL[r];
        let t = window_time(regime, k);
        let a = NodeAssignment::standard();
        let s = Schedule::standard();
        let product = NodeId::ALL
            .iter()
            .map(|&n| node_output(&a, &s, n, regime, &t).unwrap())
            .fold(Sign::Plus, |x, y| x * y);
        prop_assert_eq!(product, regime.expected_product());
    }

    #[test]
    fn products_hold_for_any_indices(k1 in 1u32..12, k2 in 1u32..12, k3 in 1u32..12, num in 1i64..10_000) {
        let a = NodeAssignment::with_indices([k1, k2, k3]).unwrap();
        let t = ratio(num, 997);
        for regime in Regime::ALL {
            let p = NodeId::ALL.iter().map(|&n| a.evaluate(n, regime, &t).unwrap()).fold(Sign::Plus, |x, y| x * y);
            prop_assert_eq!(p, regime.expected_product());
        }
    }

    #[test]
    fn probe_refutes_regime_independence(num in 1i64..1_000_000, den in 1i64..100_000) {
        let p = counterfactual_probe(&NodeAssignment::standard(), &ratio(num, den)).unwrap();
        prop_assert_eq!(p.y3_product, Sign::Minus);
    }
}

#[test]
fn every_trial_is_exact_at_scale() {
    let trials = run_schedule(&Schedule::standard(), &NodeAssignment::standard(), 20_000, 99).unwrap();
    assert_eq!(trials.len(), 80_000);
    assert!(trials.iter().all(|t| t.product() == t.regime.expected_product()));
}

#[test]
fn outputs_are_balanced_over_full_periods() {
    // Unit windows span whole periods of r1, r2 and r3.
    let n = 100_000;
    let sd = (0.25f64 / n as f64).sqrt();
    for regime in Regime::ALL {
        let trials = run_window(&Schedule::standard(), &NodeAssignment::standard(), regime, n, 5).unwrap();
        for node in NodeId::ALL {
            let f = marginal_balance(&trials, node).unwrap();
            assert!((f - 0.5).abs() <= 5.0 * sd, "{regime} node {node}: {f}");
        }
    }
}

/// Wraps a station and records every input it is shown.
struct Recording<'a> {
    inner: LocalStation<'a>,
    seen: RefCell<Vec<(Regime, Rational)>>,
}

impl Station for Recording<'_> {
    fn observe(&self, regime: Regime, t: &Rational) -> Result<Sign, GhzError> {
        self.seen.borrow_mut().push((regime, t.clone()));
        self.inner.observe(regime, t)
    }
}

struct Constant(Sign);

impl Station for Constant {
    fn observe(&self, _: Regime, _: &Rational) -> Result<Sign, GhzError> {
        Ok(self.0)
    }
}

#[test]
fn stations_see_only_the_regime_and_shared_time() {
    let a = NodeAssignment::standard();
    let s = Schedule::standard();
    let rec = NodeId::ALL.map(|node| Recording { inner: LocalStation { node, assignment: &a, schedule: &s }, seen: RefCell::new(vec![]) });
    let trials = run_window_with(&s, [&rec[0], &rec[1], &rec[2]], Regime::Yxy, 200, 3).unwrap();
    let times = measurement_times(&s, Regime::Yxy, 200, 3).unwrap();
    for r in &rec {
        let seen = r.seen.borrow();
        assert_eq!(seen.len(), 200);
        assert!(seen.iter().all(|(regime, _)| *regime == Regime::Yxy));
        assert_eq!(seen.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>(), times);
    }

    // Replacing station 2 with anything leaves stations 1 and 3 unchanged.
    for stub in [Sign::Plus, Sign::Minus] {
        let st = NodeId::ALL.map(|node| LocalStation { node, assignment: &a, schedule: &s });
        let stubbed = run_window_with(&s, [&st[0], &Constant(stub), &st[2]], Regime::Yxy, 200, 3).unwrap();
        for (x, y) in trials.iter().zip(&stubbed) {
            assert_eq!((x.outputs[0], x.outputs[2]), (y.outputs[0], y.outputs[2]));
        }
    }
}
