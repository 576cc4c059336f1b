//! Finite joint distributions over ±1-valued variables.
//!
//! Outcomes are [`SignVector`]s ordered lexicographically with `+1` before
//! `-1`, so a two-variable table lists its cells as `(+,+) (+,-) (-,+) (-,-)`.
//! Masses are exact [`Rational`]s and tables are sparse: an absent key has
//! mass zero.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{format_rational, int, ratio, rationalize, Rational, RationalError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DistError {
    #[error("covariance {0} outside [-1, 1]")]
    CovarianceRange(String),
    #[error("negative mass {mass} at {outcome}")]
    NegativeMass { outcome: String, mass: String },
    #[error("masses sum to {0}, expected 1")]
    NotNormalized(String),
    #[error("outcome {outcome} has length {len}, table arity is {arity}")]
    ArityMismatch { outcome: String, len: usize, arity: usize },
    #[error("arity must be positive")]
    ZeroArity,
    #[error("variable index {index} out of range for arity {arity}")]
    IndexOutOfRange { index: usize, arity: usize },
    #[error("variable index {0} repeated")]
    RepeatedIndex(usize),
    #[error("empty variable subset")]
    EmptySubset,
    #[error(transparent)]
    Rational(#[from] RationalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_bool(plus: bool) -> Self {
        if plus {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn is_plus(self) -> bool {
        self == Sign::Plus
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_bool(self == rhs)
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// An outcome of `arity` ±1 variables, indexed by position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignVector(Vec<Sign>);

impl SignVector {
    pub fn new(values: Vec<Sign>) -> Self {
        SignVector(values)
    }

    /// The `index`-th outcome in table order: bit `arity-1-i` set means
    /// variable `i` is `-1`.
    pub fn from_index(index: usize, arity: usize) -> Self {
        SignVector(
            (0..arity)
                .map(|i| Sign::from_bool(index >> (arity - 1 - i) & 1 == 0))
                .collect(),
        )
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .fold(0, |acc, s| (acc << 1) | usize::from(*s == Sign::Minus))
    }

    /// All `2^arity` outcomes in table order.
    pub fn all(arity: usize) -> impl Iterator<Item = SignVector> {
        (0..1usize << arity).map(move |i| SignVector::from_index(i, arity))
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, i: usize) -> Sign {
        self.0[i]
    }

    pub fn values(&self) -> &[Sign] {
        &self.0
    }

    pub fn restrict(&self, subset: &[usize]) -> SignVector {
        SignVector(subset.iter().map(|&i| self.0[i]).collect())
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(s.symbol())?;
        }
        f.write_str(")")
    }
}

/// A probability distribution on `{-1,+1}^arity` with exact masses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointTable {
    arity: usize,
    atoms: BTreeMap<SignVector, Rational>,
}

impl JointTable {
    pub fn new(
        arity: usize,
        masses: impl IntoIterator<Item = (SignVector, Rational)>,
    ) -> Result<Self, DistError> {
        if arity == 0 {
            return Err(DistError::ZeroArity);
        }
        let mut atoms = BTreeMap::new();
        let mut total = Rational::zero();
        for (outcome, mass) in masses {
            if outcome.arity() != arity {
                return Err(DistError::ArityMismatch {
                    outcome: outcome.to_string(),
                    len: outcome.arity(),
                    arity,
                });
            }
            if mass.is_negative() {
                return Err(DistError::NegativeMass {
                    outcome: outcome.to_string(),
                    mass: format_rational(&mass),
                });
            }
            total += &mass;
            let slot: &mut Rational = atoms.entry(outcome).or_insert_with(Rational::zero);
            *slot += mass;
        }
        if !total.is_one() {
            return Err(DistError::NotNormalized(format_rational(&total)));
        }
        atoms.retain(|_, m| !m.is_zero());
        Ok(JointTable { arity, atoms })
    }

    /// Builds from a dense mass vector in table order.
    pub fn from_dense(arity: usize, masses: Vec<Rational>) -> Result<Self, DistError> {
        if masses.len() != 1 << arity {
            return Err(DistError::ArityMismatch {
                outcome: format!("<{} dense masses>", masses.len()),
                len: masses.len(),
                arity,
            });
        }
        Self::new(
            arity,
            masses
                .into_iter()
                .enumerate()
                .map(|(i, m)| (SignVector::from_index(i, arity), m)),
        )
    }

    pub fn uniform(arity: usize) -> Result<Self, DistError> {
        let mass = ratio(1, 1 << arity);
        Self::new(arity, SignVector::all(arity).map(|v| (v, mass.clone())))
    }

    pub fn point_mass(outcome: SignVector) -> Result<Self, DistError> {
        Self::new(outcome.arity(), [(outcome, int(1))])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn mass(&self, outcome: &SignVector) -> Rational {
        self.atoms.get(outcome).cloned().unwrap_or_else(Rational::zero)
    }

    /// Atoms with nonzero mass in table order.
    pub fn atoms(&self) -> impl Iterator<Item = (&SignVector, &Rational)> {
        self.atoms.iter()
    }

    pub fn dense(&self) -> Vec<Rational> {
        SignVector::all(self.arity).map(|v| self.mass(&v)).collect()
    }

    fn check_index(&self, i: usize) -> Result<(), DistError> {
        if i >= self.arity {
            Err(DistError::IndexOutOfRange { index: i, arity: self.arity })
        } else {
            Ok(())
        }
    }
}

/// Checks that `subset` is non-empty, in range and free of repeats.
pub fn validate_subset(subset: &[usize], arity: usize) -> Result<(), DistError> {
    if subset.is_empty() {
        return Err(DistError::EmptySubset);
    }
    for (k, &i) in subset.iter().enumerate() {
        if i >= arity {
            return Err(DistError::IndexOutOfRange { index: i, arity });
        }
        if subset[..k].contains(&i) {
            return Err(DistError::RepeatedIndex(i));
        }
    }
    Ok(())
}

/// E[X_i X_j] for ±1 variables; with uniform single marginals this is the covariance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Covariance(Rational);

impl Covariance {
    pub fn new(value: Rational) -> Result<Self, DistError> {
        if value.abs() > int(1) {
            return Err(DistError::CovarianceRange(format_rational(&value)));
        }
        Ok(Covariance(value))
    }

    /// Rationalizes a real covariance at `tolerance`; values within tolerance of ±1
    /// outside the range are rejected rather than clamped.
    pub fn from_f64(value: f64, tolerance: f64) -> Result<Self, DistError> {
        Self::new(rationalize(value, tolerance)?)
    }

    pub fn zero() -> Self {
        Covariance(Rational::zero())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }
}

impl fmt::Display for Covariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

/// Joint law of the pair `(var_i, var_j)`, cells in table order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMarginal {
    pub var_i: usize,
    pub var_j: usize,
    pub table: [Rational; 4],
}

impl PairMarginal {
    pub fn new(var_i: usize, var_j: usize, table: [Rational; 4]) -> Result<Self, DistError> {
        if var_i == var_j {
            return Err(DistError::RepeatedIndex(var_i));
        }
        // Reuse the joint-table validation for nonnegativity and normalization.
        JointTable::from_dense(2, table.to_vec())?;
        Ok(PairMarginal { var_i, var_j, table })
    }

    pub fn to_joint(&self) -> JointTable {
        JointTable::from_dense(2, self.table.to_vec()).expect("validated on construction")
    }

    /// Single-variable marginals `(P(X_i=+1), P(X_j=+1))`.
    pub fn single_marginals(&self) -> (Rational, Rational) {
        let [pp, pm, mp, _] = &self.table;
        (pp + pm, pp + mp)
    }
}

/// Pair table with uniform ±1 marginals and correlation `sigma`:
/// `(1+σ)/4` on the diagonal cells, `(1-σ)/4` off it.
pub fn pair_table_from_covariance(var_i: usize, var_j: usize, sigma: &Covariance) -> PairMarginal {
    let quarter = ratio(1, 4);
    let same = (int(1) + sigma.value()) * &quarter;
    let differ = (int(1) - sigma.value()) * &quarter;
    PairMarginal::new(var_i, var_j, [same.clone(), differ.clone(), differ, same])
        .expect("|sigma| <= 1 keeps every cell in [0, 1/2]")
}

pub fn covariance_of(joint: &JointTable, i: usize, j: usize) -> Result<Covariance, DistError> {
    joint.check_index(i)?;
    joint.check_index(j)?;
    if i == j {
        return Err(DistError::RepeatedIndex(i));
    }
    let mut total = Rational::zero();
    for (outcome, mass) in joint.atoms() {
        if outcome.get(i) == outcome.get(j) {
            total += mass;
        } else {
            total -= mass;
        }
    }
    Covariance::new(total)
}

pub fn marginalize(joint: &JointTable, subset: &[usize]) -> Result<JointTable, DistError> {
    validate_subset(subset, joint.arity())?;
    let mut out: BTreeMap<SignVector, Rational> = BTreeMap::new();
    for (outcome, mass) in joint.atoms() {
        *out.entry(outcome.restrict(subset)).or_insert_with(Rational::zero) += mass;
    }
    JointTable::new(subset.len(), out)
}

/// `-cos(angle)` rationalized at `tolerance`, the singlet-state correlation
/// for analyzers separated by `angle`.
pub fn qm_covariance(angle_radians: f64, tolerance: f64) -> Result<Covariance, DistError> {
    if !angle_radians.is_finite() {
        return Err(RationalError::NonFinite(angle_radians.to_string()).into());
    }
    let raw = rationalize(-angle_radians.cos(), tolerance)?;
    // cos is bounded by 1, but guard against a convergent landing just outside.
    let clamped = raw.clamp(int(-1), int(1));
    Covariance::new(clamped)
}
