//! Named configs for the reference experiments.

use corrlab::aspect::StochasticMatrix;
use corrlab::rational::{format_rational, int, rationalize, ratio, DEFAULT_PRECISION};

pub const NAMES: [&str; 8] = [
    "vorobev-table1",
    "vorobev-uniform",
    "bell-infeasible",
    "chsh-qm",
    "aspect-qm",
    "gamma-max",
    "source-models",
    "ghz-table5",
];

/// Config text for a preset, or `None` for an unknown name.
pub fn preset(name: &str) -> Option<String> {
    let text = match name {
        // Pair tables (1 ± s)/4 for (A,B) and (A,C) with s ~ 1/sqrt(2); (B,C) uniform.
        "vorobev-table1" => {
            let s = rationalize(std::f64::consts::FRAC_1_SQRT_2, DEFAULT_PRECISION).expect("finite");
            let hi = format_rational(&((int(1) + &s) / int(4)));
            let lo = format_rational(&((int(1) - &s) / int(4)));
            let q = format_rational(&ratio(1, 4));
            let row = format!("{hi}, {lo}, {lo}, {hi}");
            format!("mode = check\npairs = 0:1, 0:2, 1:2\ncells = {row}, {row}, {q}, {q}, {q}, {q}\n")
        }
        "vorobev-uniform" => {
            let cells = ["1/4"; 12].join(", ");
            format!("mode = check\npairs = 0:1, 0:2, 1:2\ncells = {cells}\n")
        }
        // sigma = (s, s, 0): the identity Bell variant holds but a rotation fails.
        "bell-infeasible" => "mode = bell\nangles = 135deg, 135deg, 90deg\n".to_string(),
        "chsh-qm" => "mode = chsh\nangles = 135deg, 135deg, 135deg, 45deg\n".to_string(),
        "aspect-qm" => "mode = aspect\nseed = 1\ntrials = 1000000\nangles = 135deg, 135deg, 135deg, 45deg\n".to_string(),
        "gamma-max" => {
            let entries: Vec<String> = StochasticMatrix::gamma_max().rows().iter().flatten().map(format_rational).collect();
            format!("mode = aspect\nseed = 1\ntrials = 1000000\nmatrix = {}\n", entries.join(", "))
        }
        "source-models" => "mode = source\nseed = 1\ntrials = 100000\nmodels = 100\n".to_string(),
        "ghz-table5" => "mode = ghz\nseed = 1\ntrials = 100000\nrademacher = 1, 2, 3\nprobe = 1000\n".to_string(),
        _ => return None,
    };
    Some(text)
}
