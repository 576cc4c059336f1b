//! Can a family of marginal tables be realized by one joint distribution?
//!
//! The question is a linear feasibility problem over the `2^n` atom masses
//! of `{-1,+1}^n`. [`check_realizability`] solves the L1 phase-1 version of
//! it exactly, so the answer comes with either a witness joint table or a
//! Farkas-type certificate that anyone can re-check with
//! [`verify_certificate`] without trusting the solver.
//!
//! A certificate `y` has one entry per constraint cell followed by one for
//! the normalization row. It proves infeasibility because
//!
//! * `<y, rhs> > 0`, where `rhs` lists the cell targets followed by `1`, and
//! * every atom column scores `<y, column> <= 0`,
//!
//! so no nonnegative combination of columns can reproduce `rhs`. With every
//! cell entry also in `[-1, 1]`, `<y, rhs>` is a lower bound on the total
//! absolute violation of any distribution, and for the solver's certificate
//! it equals the reported margin.

mod simplex;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::dist::{
    marginalize, pair_table_from_covariance, validate_subset, Covariance, DistError, JointTable,
    PairMarginal, SignVector,
};
use crate::rational::{int, Rational};

pub const DEFAULT_ARITY_CAP: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RealizabilityError {
    #[error("arity {arity} exceeds the configured cap of {cap}")]
    Capacity { arity: usize, cap: usize },
    #[error("constraint {index}: table arity {table} does not match subset size {subset}")]
    ConstraintShape { index: usize, table: usize, subset: usize },
    #[error("result arity {result} does not match system arity {system}")]
    ArityMismatch { result: usize, system: usize },
    #[error("constraint {index}: {source}")]
    Constraint { index: usize, source: DistError },
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalConstraint {
    pub subset: Vec<usize>,
    pub table: JointTable,
}

/// Marginal tables on (possibly overlapping) subsets of `arity` variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalSystem {
    arity: usize,
    constraints: Vec<MarginalConstraint>,
}

impl MarginalSystem {
    pub fn new(arity: usize, constraints: Vec<MarginalConstraint>) -> Result<Self, RealizabilityError> {
        if arity == 0 {
            return Err(DistError::ZeroArity.into());
        }
        for (index, c) in constraints.iter().enumerate() {
            validate_subset(&c.subset, arity)
                .map_err(|source| RealizabilityError::Constraint { index, source })?;
            if c.table.arity() != c.subset.len() {
                return Err(RealizabilityError::ConstraintShape {
                    index,
                    table: c.table.arity(),
                    subset: c.subset.len(),
                });
            }
        }
        Ok(MarginalSystem { arity, constraints })
    }

    pub fn from_pairs(arity: usize, pairs: &[PairMarginal]) -> Result<Self, RealizabilityError> {
        Self::new(
            arity,
            pairs
                .iter()
                .map(|p| MarginalConstraint { subset: vec![p.var_i, p.var_j], table: p.to_joint() })
                .collect(),
        )
    }

    /// Pair tables with uniform marginals, one per `(i, j, sigma)`.
    pub fn from_covariances(
        arity: usize,
        pairs: &[(usize, usize, Covariance)],
    ) -> Result<Self, RealizabilityError> {
        let tables: Vec<PairMarginal> = pairs
            .iter()
            .map(|(i, j, s)| {
                if i == j {
                    Err(DistError::RepeatedIndex(*i))
                } else {
                    Ok(pair_table_from_covariance(*i, *j, s))
                }
            })
            .collect::<Result<_, _>>()?;
        Self::from_pairs(arity, &tables)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn constraints(&self) -> &[MarginalConstraint] {
        &self.constraints
    }

    pub fn without_constraint(&self, index: usize) -> Self {
        let mut constraints = self.constraints.clone();
        constraints.remove(index);
        MarginalSystem { arity: self.arity, constraints }
    }
}

/// Row labels of the constraint matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowLabel {
    Cell { constraint: usize, outcome: SignVector },
    Normalization,
}

/// `A x = rhs, x >= 0` with one column per atom of `{-1,+1}^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub columns: usize,
    /// 0/1 incidence, one row per constraint cell and a final all-ones row.
    pub rows: Vec<Vec<bool>>,
    pub labels: Vec<RowLabel>,
    pub rhs: Vec<Rational>,
}

impl ConstraintSystem {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// `<weights, column j>`
    pub fn column_score(&self, weights: &[Rational], j: usize) -> Rational {
        self.rows
            .iter()
            .zip(weights)
            .filter(|(row, _)| row[j])
            .fold(Rational::zero(), |acc, (_, w)| acc + w)
    }

    pub fn rhs_score(&self, weights: &[Rational]) -> Rational {
        self.rhs.iter().zip(weights).fold(Rational::zero(), |acc, (b, w)| acc + b * w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RealizabilityConfig {
    pub arity_cap: usize,
}

impl Default for RealizabilityConfig {
    fn default() -> Self {
        RealizabilityConfig { arity_cap: DEFAULT_ARITY_CAP }
    }
}

pub fn build_constraint_system(
    system: &MarginalSystem,
    config: &RealizabilityConfig,
) -> Result<ConstraintSystem, RealizabilityError> {
    let n = system.arity();
    if n > config.arity_cap {
        return Err(RealizabilityError::Capacity { arity: n, cap: config.arity_cap });
    }
    let columns = 1usize << n;
    let atoms: Vec<SignVector> = SignVector::all(n).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut rhs = Vec::new();
    for (ci, c) in system.constraints().iter().enumerate() {
        let k = c.subset.len();
        for outcome in SignVector::all(k) {
            // Cells are indexed by the restricted outcome's table index.
            let cell = outcome.index();
            rows.push(atoms.iter().map(|a| a.restrict(&c.subset).index() == cell).collect());
            rhs.push(c.table.mass(&outcome));
            labels.push(RowLabel::Cell { constraint: ci, outcome });
        }
    }
    rows.push(vec![true; columns]);
    labels.push(RowLabel::Normalization);
    rhs.push(int(1));
    Ok(ConstraintSystem { columns, rows, labels, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Feasible => "FEASIBLE",
            Verdict::Infeasible => "INFEASIBLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityResult {
    pub verdict: Verdict,
    /// Present iff feasible.
    pub witness: Option<JointTable>,
    /// Present iff infeasible; cell weights then the normalization weight.
    pub certificate: Option<Vec<Rational>>,
    /// Minimal total absolute cell violation over all joint distributions.
    pub margin: Rational,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }
}

pub fn check_realizability(
    system: &MarginalSystem,
    config: &RealizabilityConfig,
) -> Result<FeasibilityResult, RealizabilityError> {
    let cs = build_constraint_system(system, config)?;
    let m = cs.row_count() - 1;
    let solution = simplex::solve_l1(&cs.rows[..m], &cs.rhs, cs.columns);
    if solution.objective.is_zero() {
        let witness = JointTable::from_dense(system.arity(), solution.atoms)?;
        Ok(FeasibilityResult {
            verdict: Verdict::Feasible,
            witness: Some(witness),
            certificate: None,
            margin: Rational::zero(),
        })
    } else {
        Ok(FeasibilityResult {
            verdict: Verdict::Infeasible,
            witness: None,
            certificate: Some(solution.duals),
            margin: solution.objective,
        })
    }
}

/// Replays a result against its system in exact arithmetic.
pub fn verify_certificate(
    system: &MarginalSystem,
    result: &FeasibilityResult,
) -> Result<bool, RealizabilityError> {
    match result.verdict {
        Verdict::Feasible => {
            let Some(witness) = &result.witness else { return Ok(false) };
            if witness.arity() != system.arity() {
                return Err(RealizabilityError::ArityMismatch {
                    result: witness.arity(),
                    system: system.arity(),
                });
            }
            if result.certificate.is_some() || !result.margin.is_zero() {
                return Ok(false);
            }
            for c in system.constraints() {
                if marginalize(witness, &c.subset)? != c.table {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Verdict::Infeasible => {
            let Some(cert) = &result.certificate else { return Ok(false) };
            if result.witness.is_some() || !result.margin.is_positive() {
                return Ok(false);
            }
            // No cap here: verification must work for any system a result claims to cover.
            let cs = build_constraint_system(system, &RealizabilityConfig { arity_cap: usize::MAX })?;
            if cert.len() != cs.row_count() {
                return Err(RealizabilityError::ArityMismatch {
                    result: cert.len(),
                    system: cs.row_count(),
                });
            }
            let cells = &cert[..cert.len() - 1];
            if cells.iter().any(|w| w.abs() > int(1)) {
                return Ok(false);
            }
            let value = cs.rhs_score(cert);
            if !value.is_positive() || value != result.margin {
                return Ok(false);
            }
            Ok((0..cs.columns).all(|j| !cs.column_score(cert, j).is_positive()))
        }
    }
}

/// The three-variable system `(A,B), (A,C), (B,C)` with uniform marginals.
pub fn triangle_system(
    ab: &Covariance,
    ac: &Covariance,
    bc: &Covariance,
) -> Result<MarginalSystem, RealizabilityError> {
    MarginalSystem::from_covariances(3, &[(0, 1, ab.clone()), (0, 2, ac.clone()), (1, 2, bc.clone())])
}

/// Variable order of [`closed_loop_system`].
pub const LOOP_VARIABLES: [&str; 4] = ["A(a)", "A(d)", "B(b)", "B(c)"];

/// The four-variable closed loop `(a,b), (a,c), (d,b), (d,c)` over
/// variables `A(a)=0, A(d)=1, B(b)=2, B(c)=3`.
pub fn closed_loop_system(
    ab: &Covariance,
    ac: &Covariance,
    db: &Covariance,
    dc: &Covariance,
) -> Result<MarginalSystem, RealizabilityError> {
    MarginalSystem::from_covariances(
        4,
        &[(0, 2, ab.clone()), (0, 3, ac.clone()), (1, 2, db.clone()), (1, 3, dc.clone())],
    )
}
