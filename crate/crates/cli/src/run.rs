//! Dispatch from a validated config to the library.

use std::fs;
use std::net::{SocketAddr, TcpListener};
use std::path::Path;
use std::time::Duration;

use corrlab::aspect::{
    estimate_gamma, qm_matrix, reorder_demonstration, sample_delayed_choice, simulate_source_model, AspectError,
    Execution, HiddenState, ReorderReport, SourceModel, StochasticMatrix,
};
use corrlab::dist::{covariance_of, qm_covariance, Covariance, PairMarginal};
use corrlab::ghz::{
    counterfactual_probe, format_trial_log, marginal_balance, probe_times, run_schedule, GhzError, NodeAssignment,
    NodeId, Regime, TrialTriple,
};
use corrlab::inequalities::{
    bell_check_all, chsh_check_all, chsh_value, family_satisfied, BellTriple, BellVariant, ChshQuad, Convention,
    InequalityVerdict, Variant,
};
use corrlab::net::{
    coordinator_run, format_session_log, serve, verify_transcript, CoordinatorConfig, Mismatch, SessionStatus,
    Transcript,
};
use corrlab::rational::{format_rational, to_f64, Rational};
use corrlab::realizability::{
    build_constraint_system, check_realizability, closed_loop_system, triangle_system, verify_certificate,
    FeasibilityResult, MarginalSystem, RealizabilityConfig, RealizabilityError,
};
use corrlab::rng::{stream, Purpose};

use crate::config::{
    AspectConfig, CheckConfig, CheckInput, CoordinatorSettings, CovarianceSource, ExperimentConfig, GhzConfig,
    InequalityConfig, MatrixSource, ModelSource, NodeSettings, SourceConfig,
};
use crate::report::{float, Report};
use crate::CliError;

pub const MARGIN_NOTE: &str =
    "minimal total absolute violation of the marginal equations over all distributions on the atoms";
pub const CONTEXT_NOTE: &str =
    "laboratory GHZ rates (0.15 +- 0.02 error, 0.87 +- 0.04 success) are context only; this construction is noise-free";

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn realizability_error(e: RealizabilityError) -> CliError {
    match e {
        RealizabilityError::Capacity { .. } => CliError::Capacity(e.to_string()),
        other => domain(other),
    }
}

/// Runs one experiment. `listening` is told the bound address before a node starts serving.
pub fn run(config: &ExperimentConfig, listening: &mut dyn FnMut(SocketAddr)) -> Result<Report, CliError> {
    match config {
        ExperimentConfig::Check(c) => check(config, c),
        ExperimentConfig::Bell(c) => bell(config, c),
        ExperimentConfig::Chsh(c) => chsh(config, c),
        ExperimentConfig::Aspect(c) => aspect(config, c),
        ExperimentConfig::Source(c) => source(config, c),
        ExperimentConfig::Ghz(c) => ghz(config, c),
        ExperimentConfig::GhzNetCoordinator(c) => coordinator(config, c),
        ExperimentConfig::GhzNetNode(c) => node(config, c, listening),
    }
}

fn resolve(source: &CovarianceSource, precision: f64) -> Result<Vec<Covariance>, CliError> {
    match source {
        CovarianceSource::Sigmas(s) => Ok(s.clone()),
        CovarianceSource::Angles(a) => a.iter().map(|a| qm_covariance(a.radians(), precision).map_err(domain)).collect(),
    }
}

fn frac(r: &Rational) -> String {
    format_rational(r)
}

/// Verdict, margin, evidence and its replay, under `prefix`.
fn push_feasibility(report: &mut Report, prefix: &str, system: &MarginalSystem, result: &FeasibilityResult) -> Result<(), CliError> {
    let valid = verify_certificate(system, result).map_err(realizability_error)?;
    report.push(format!("{prefix}verdict"), result.verdict.label());
    report.push(format!("{prefix}margin"), frac(&result.margin));
    report.push(format!("{prefix}margin_decimal"), float(to_f64(&result.margin)));
    report.push(format!("{prefix}margin_definition"), MARGIN_NOTE);
    if let Some(w) = &result.witness {
        let atoms: Vec<String> = w.atoms().map(|(v, p)| format!("{v}={}", frac(p))).collect();
        report.push(format!("{prefix}witness"), atoms.join("; "));
    }
    if let Some(c) = &result.certificate {
        report.push(format!("{prefix}certificate"), c.iter().map(frac).collect::<Vec<_>>().join(", "));
        report.push(format!("{prefix}certificate_layout"), "one weight per constraint cell (++, +-, -+, --), then normalization");
    }
    report.push(format!("{prefix}evidence_valid"), valid);
    Ok(())
}

fn check(config: &ExperimentConfig, c: &CheckConfig) -> Result<Report, CliError> {
    let system = match &c.input {
        CheckInput::Covariances(src) => {
            let covs = resolve(src, c.precision)?;
            let triples: Vec<_> = c.pairs.iter().zip(covs).map(|(&(i, j), s)| (i, j, s)).collect();
            MarginalSystem::from_covariances(c.arity, &triples)
        }
        CheckInput::Cells(cells) => {
            let pairs = c
                .pairs
                .iter()
                .zip(cells.chunks(4))
                .map(|(&(i, j), t)| PairMarginal::new(i, j, [t[0].clone(), t[1].clone(), t[2].clone(), t[3].clone()]))
                .collect::<Result<Vec<_>, _>>()
                .map_err(domain)?;
            MarginalSystem::from_pairs(c.arity, &pairs)
        }
    }
    .map_err(realizability_error)?;
    let rc = RealizabilityConfig::default();
    let cs = build_constraint_system(&system, &rc).map_err(realizability_error)?;
    let result = check_realizability(&system, &rc).map_err(realizability_error)?;

    let mut report = Report::new(config);
    report.push("variables", system.arity());
    report.push("constraints", system.constraints().len());
    report.push("rows", cs.row_count());
    report.push("columns", cs.columns);
    for (k, constraint) in system.constraints().iter().enumerate() {
        let (i, j) = c.pairs[k];
        let sigma = covariance_of(&constraint.table, 0, 1).map_err(domain)?;
        report.push(format!("covariance.{i}:{j}"), frac(sigma.value()));
    }
    push_feasibility(&mut report, "", &system, &result)?;
    report.summary = format!("{} (margin {}, evidence valid)", result.verdict.label(), float(to_f64(&result.margin)));
    Ok(report)
}

fn push_verdicts(report: &mut Report, verdicts: &[InequalityVerdict]) {
    for v in verdicts {
        report.push(
            v.variant.to_string(),
            format!(
                "lhs={} bound={} {}",
                frac(&v.lhs),
                frac(&v.bound),
                if v.satisfied { "satisfied" } else { "violated" }
            ),
        );
    }
}

fn bell(config: &ExperimentConfig, c: &InequalityConfig) -> Result<Report, CliError> {
    let s = resolve(&c.source, c.precision)?;
    let triple = BellTriple { sigma_ab: s[0].clone(), sigma_ac: s[1].clone(), sigma_bc: s[2].clone() };
    let verdicts = bell_check_all(&triple);
    let system = triangle_system(&s[0], &s[1], &s[2]).map_err(realizability_error)?;
    let result = check_realizability(&system, &RealizabilityConfig::default()).map_err(realizability_error)?;

    let mut report = Report::new(config);
    for (name, sigma) in ["sigma_ab", "sigma_ac", "sigma_bc"].iter().zip(&s) {
        report.push(*name, frac(sigma.value()));
    }
    push_verdicts(&mut report, &verdicts);
    let identity = verdicts.iter().find(|v| v.variant == Variant::Bell(BellVariant::IDENTITY)).expect("family has identity");
    let direct = family_satisfied(&verdicts, Convention::Direct);
    let violated = |conv: Convention| {
        verdicts.iter().filter(|v| matches!(v.variant, Variant::Bell(b) if b.convention == conv) && !v.satisfied).count()
    };
    report.push("identity_variant_satisfied", identity.satisfied);
    report.push("direct_family_violations", violated(Convention::Direct));
    report.push("singlet_family_violations", violated(Convention::Singlet));
    report.push("all_variants_satisfied", direct);
    push_feasibility(&mut report, "realizability.", &system, &result)?;
    report.push("agreement", direct == result.is_feasible());
    report.summary = format!(
        "identity variant {}, {} of 12 variants violated, realizability {}",
        if identity.satisfied { "satisfied" } else { "violated" },
        violated(Convention::Direct),
        result.verdict.label()
    );
    Ok(report)
}

fn chsh(config: &ExperimentConfig, c: &InequalityConfig) -> Result<Report, CliError> {
    let s = resolve(&c.source, c.precision)?;
    let quad = ChshQuad { sigma_ab: s[0].clone(), sigma_ac: s[1].clone(), sigma_db: s[2].clone(), sigma_dc: s[3].clone() };
    let verdicts = chsh_check_all(&quad);
    let system = closed_loop_system(&s[0], &s[1], &s[2], &s[3]).map_err(realizability_error)?;
    let result = check_realizability(&system, &RealizabilityConfig::default()).map_err(realizability_error)?;

    let mut report = Report::new(config);
    for (name, sigma) in ["sigma_ab", "sigma_ac", "sigma_db", "sigma_dc"].iter().zip(&s) {
        report.push(*name, frac(sigma.value()));
    }
    let value = chsh_value(&quad);
    report.push("chsh_value", frac(&value));
    report.push("chsh_value_decimal", float(to_f64(&value)));
    push_verdicts(&mut report, &verdicts);
    let all = verdicts.iter().all(|v| v.satisfied);
    report.push("all_variants_satisfied", all);
    push_feasibility(&mut report, "realizability.", &system, &result)?;
    report.push("agreement", all == result.is_feasible());
    report.summary = format!("chsh value {}, realizability {}", float(to_f64(&value)), result.verdict.label());
    Ok(report)
}

fn aspect_error(e: AspectError) -> CliError {
    domain(e)
}

fn aspect(config: &ExperimentConfig, c: &AspectConfig) -> Result<Report, CliError> {
    let matrix = match &c.matrix {
        MatrixSource::Covariances(CovarianceSource::Angles(a)) => {
            let radians = [a[0].radians(), a[1].radians(), a[2].radians(), a[3].radians()];
            qm_matrix(radians, c.precision).map_err(aspect_error)?
        }
        MatrixSource::Covariances(src) => {
            let s = resolve(src, c.precision)?;
            StochasticMatrix::from_covariances(&ChshQuad {
                sigma_ab: s[0].clone(),
                sigma_ac: s[1].clone(),
                sigma_db: s[2].clone(),
                sigma_dc: s[3].clone(),
            })
        }
        MatrixSource::Entries(e) => {
            StochasticMatrix::new(std::array::from_fn(|r| std::array::from_fn(|k| e[4 * r + k].clone()))).map_err(aspect_error)?
        }
    };
    let records = sample_delayed_choice(&matrix, c.trials, c.seed, Execution::Parallel).map_err(aspect_error)?;
    let est = estimate_gamma(&records).map_err(aspect_error)?;
    let population = matrix.population_gamma();
    let target = to_f64(&population);

    let mut report = Report::new(config);
    for (row, name) in matrix.rows().iter().zip(["ab", "ac", "db", "dc"]) {
        report.push(format!("matrix.{name}"), row.iter().map(frac).collect::<Vec<_>>().join(", "));
    }
    report.push("population_gamma", frac(&population));
    report.push("population_gamma_decimal", float(target));
    for (i, name) in ["ab", "ac", "db", "dc"].iter().enumerate() {
        report.push(format!("count.{name}"), est.counts[i]);
        report.push(format!("mean.{name}"), float(est.means[i]));
    }
    report.push("gamma", float(est.gamma));
    report.push("standard_error", float(est.standard_error));
    let deviation = if est.standard_error > 0.0 { (est.gamma - target) / est.standard_error } else { 0.0 };
    report.push("deviation_in_se", float(deviation));
    report.push("within_5_se_of_population", est.within(target, 5.0));
    report.push("exceeds_2", est.gamma > 2.0);
    report.summary = format!("gamma {} +- {} (population {})", float(est.gamma), float(est.standard_error), float(target));
    Ok(report)
}

fn states_text(model: &SourceModel) -> String {
    let signs = |s: &[corrlab::dist::Sign]| s.iter().map(|x| if x.is_plus() { '+' } else { '-' }).collect::<String>();
    model
        .states()
        .iter()
        .map(|s| format!("{}:{}{}", frac(&s.probability), signs(&s.station_a), signs(&s.station_b)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn source(config: &ExperimentConfig, c: &SourceConfig) -> Result<Report, CliError> {
    let models: Vec<SourceModel> = match &c.models {
        ModelSource::Explicit(states) => vec![SourceModel::new(
            states
                .iter()
                .map(|(p, r)| HiddenState { probability: p.clone(), station_a: [r[0], r[1]], station_b: [r[2], r[3]] })
                .collect(),
        )
        .map_err(aspect_error)?],
        ModelSource::Random(n) => {
            let mut rng = stream(c.seed, Purpose::ModelGeneration, 0);
            (0..*n).map(|_| SourceModel::random(&mut rng)).collect()
        }
    };
    let mut report = Report::new(config);
    report.push("models", models.len());
    report.push("model_seed_rule", "model i samples with seed + i");
    report.push("reorder_policy", ReorderReport::POLICY);
    let mut violations = 0;
    let mut exceptions = 0;
    let mut max_abs = 0.0f64;
    for (i, model) in models.iter().enumerate() {
        let seed = c.seed.wrapping_add(i as u64);
        let est = simulate_source_model(model, c.trials, seed, Execution::Parallel).map_err(aspect_error)?;
        let reorder = reorder_demonstration(model, c.trials, seed).map_err(aspect_error)?;
        let within = est.gamma.abs() <= 2.0 + 5.0 * est.standard_error;
        violations += usize::from(!within);
        exceptions += reorder.exceptions;
        max_abs = max_abs.max(est.gamma.abs());
        let p = format!("model.{i}.");
        report.push(format!("{p}states"), states_text(model));
        report.push(format!("{p}population_gamma"), frac(&model.population_gamma()));
        report.push(format!("{p}gamma"), float(est.gamma));
        report.push(format!("{p}standard_error"), float(est.standard_error));
        report.push(format!("{p}within_bound"), within);
        report.push(format!("{p}quadruples"), reorder.quadruples);
        report.push(format!("{p}gamma_plus_two"), reorder.gamma_plus_two);
        report.push(format!("{p}gamma_minus_two"), reorder.gamma_minus_two);
        report.push(format!("{p}discarded"), reorder.discarded);
        report.push(format!("{p}exceptions"), reorder.exceptions);
        report.push(
            format!("{p}reordered_gamma"),
            reorder.reordered_gamma.map(float).unwrap_or_else(|| "none".into()),
        );
    }
    report.push("max_abs_gamma", float(max_abs));
    report.push("bound_violations", violations);
    report.push("reorder_exceptions", exceptions);
    report.summary = format!(
        "{} models, max |gamma| {}, {violations} bound violations, {exceptions} reorder exceptions",
        models.len(),
        float(max_abs)
    );
    Ok(report)
}

fn ghz_error(e: GhzError) -> CliError {
    domain(e)
}

fn assignment_lines(report: &mut Report, a: &NodeAssignment) {
    for node in NodeId::ALL {
        let cells: Vec<String> = Regime::ALL.iter().map(|&r| format!("{r}:{}", a.response(node, r))).collect();
        report.push(format!("assignment.node{node}"), cells.join(" "));
    }
}

/// Product counts and exactness per regime.
fn product_lines(report: &mut Report, trials: &[TrialTriple]) -> bool {
    let mut exact = true;
    for regime in Regime::ALL {
        let of: Vec<&TrialTriple> = trials.iter().filter(|t| t.regime == regime).collect();
        if of.is_empty() {
            continue;
        }
        let plus = of.iter().filter(|t| t.product().is_plus()).count();
        let expected = regime.expected_product();
        let wrong = if expected.is_plus() { of.len() - plus } else { plus };
        exact &= wrong == 0;
        report.push(format!("products.{regime}"), format!("+1:{plus} -1:{}", of.len() - plus));
        report.push(format!("expected.{regime}"), expected);
    }
    report.push("products_exact", exact);
    exact
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::Io)
}

fn ghz(config: &ExperimentConfig, c: &GhzConfig) -> Result<Report, CliError> {
    let assignment = NodeAssignment::with_indices(c.rademacher).map_err(ghz_error)?;
    let trials = run_schedule(&c.schedule, &assignment, c.trials, c.seed).map_err(ghz_error)?;
    let mut report = Report::new(config);
    assignment_lines(&mut report, &assignment);
    report.push("trials", trials.len());
    let exact = product_lines(&mut report, &trials);

    let sd = (0.25 / c.trials as f64).sqrt();
    let mut balanced = true;
    for w in c.schedule.windows() {
        let of: Vec<TrialTriple> = trials.iter().filter(|t| t.regime == w.regime).cloned().collect();
        for node in NodeId::ALL {
            let f = marginal_balance(&of, node).map_err(ghz_error)?;
            balanced &= (f - 0.5).abs() <= 5.0 * sd;
            report.push(format!("balance.{}.node{node}", w.regime), float(f));
        }
    }
    report.push("balance_within_5_sigma", balanced);

    let times = probe_times(&c.schedule, c.probe, c.seed).map_err(ghz_error)?;
    let (mut y3_minus, mut y1_plus) = (0, 0);
    for t in &times {
        let p = counterfactual_probe(&assignment, t).map_err(ghz_error)?;
        y3_minus += usize::from(!p.y3_product.is_plus());
        y1_plus += usize::from(p.y1_product.is_plus());
    }
    report.push("probe.times", times.len());
    report.push("probe.y3_yxy_times_y3_xyy", format!("+1:{} -1:{y3_minus}", times.len() - y3_minus));
    report.push("probe.y1_yyx_times_y1_yxy", format!("+1:{y1_plus} -1:{}", times.len() - y1_plus));
    if let Some(path) = &c.trial_log {
        write_file(path, &format_trial_log(&trials))?;
        report.push("trial_log_lines", trials.len());
    }
    report.push("context", CONTEXT_NOTE);
    report.summary = format!(
        "{} trials, products {}, probe Y3 products -1 at {y3_minus} of {} times",
        trials.len(),
        if exact { "exact" } else { "NOT exact" },
        times.len()
    );
    Ok(report)
}

fn coordinator(config: &ExperimentConfig, c: &CoordinatorSettings) -> Result<Report, CliError> {
    let assignment = NodeAssignment::with_indices(c.rademacher).map_err(ghz_error)?;
    if let Some(p) = &c.transcript {
        write_file(p, "")?;
    }
    let mut cc = CoordinatorConfig::new(c.schedule.clone(), c.trials, c.seed, c.nodes.clone());
    cc.result_timeout = Duration::from_millis(c.timeout_ms);
    cc.transcript_path = c.transcript.clone();
    let session = coordinator_run(&cc).map_err(|e| CliError::Network(e.to_string()))?;
    let verify = verify_transcript(&session.transcript, &assignment);

    let mut report = Report::new(config);
    report.push(
        "status",
        match &session.status {
            SessionStatus::Complete => "complete",
            SessionStatus::Aborted(_) => "aborted",
        },
    );
    if let SessionStatus::Aborted(reason) = &session.status {
        report.push("abort_reason", reason);
    }
    report.push("trials_completed", session.trials.len());
    report.push("trials_void", session.void.len());
    report.push("trials_unsent", session.unsent);
    for v in &session.void {
        report.push(format!("void.{}", v.trial), &v.reason);
    }
    let triples: Vec<TrialTriple> = session.trials.iter().map(|(_, t)| t.clone()).collect();
    product_lines(&mut report, &triples);
    let forwarded = verify.mismatches.iter().filter(|m| matches!(m, Mismatch::Forwarded { .. })).count();
    report.push("transcript.records", session.transcript.entries().len());
    report.push("transcript.mismatches", verify.mismatches.len());
    report.push("transcript.forwarded_to_nodes", forwarded);
    for m in &verify.mismatches {
        report.push("transcript.mismatch", m);
    }
    if let Some(path) = &c.trial_log {
        write_file(path, &format_session_log(&session.trials))?;
        report.push("trial_log_lines", session.trials.len());
    }
    report.summary = format!(
        "{} trials complete, {} void, {} transcript mismatches",
        session.trials.len(),
        session.void.len(),
        verify.mismatches.len()
    );
    match session.status {
        SessionStatus::Complete => Ok(report),
        SessionStatus::Aborted(reason) => Err(CliError::Aborted { reason, report: Box::new(report) }),
    }
}

fn node(config: &ExperimentConfig, c: &NodeSettings, listening: &mut dyn FnMut(SocketAddr)) -> Result<Report, CliError> {
    let assignment = NodeAssignment::with_indices(c.rademacher).map_err(ghz_error)?;
    let listener = TcpListener::bind(&c.listen).map_err(|e| CliError::Network(format!("bind {}: {e}", c.listen)))?;
    listening(listener.local_addr()?);
    let summary = serve(&listener, c.node, &assignment).map_err(|e| CliError::Network(e.to_string()))?;
    let mut report = Report::new(config);
    report.push("answered", summary.answered);
    report.push("refused", summary.refused);
    report.summary = format!("node {} answered {} and refused {}", c.node, summary.answered, summary.refused);
    Ok(report)
}

/// Replays a saved transcript against the assignment with the given indices.
pub fn verify_transcript_file(path: &Path, rademacher: [u32; 3]) -> Result<String, CliError> {
    let text = fs::read_to_string(path)?;
    let transcript = Transcript::parse(&text).map_err(domain)?;
    let assignment = NodeAssignment::with_indices(rademacher).map_err(ghz_error)?;
    Ok(verify_transcript(&transcript, &assignment).to_string())
}
