//! Bell and CHSH inequalities over pairwise correlations, evaluated exactly.
//!
//! The three-variable Bell form used here is
//! `|σ_xy - σ_xz| <= 1 - σ_yz`, which holds for any ±1 variables on one
//! probability space because `xy - xz = xy (1 - yz)`. The textbook form with
//! `1 + σ_yz` belongs to the anti-correlated singlet convention and is kept
//! as [`Convention::Singlet`] for comparison.
//!
//! A family variant is a cyclic relabeling of `(A, B, C)` together with an
//! optional sign flip of one variable, which negates the two correlations
//! it takes part in. Rotations alone cover three facets of the triangle
//! correlation polytope; the flips supply the fourth, `σ_AB + σ_AC + σ_BC >= -1`.

use std::fmt;

use num_traits::Signed;

use crate::dist::Covariance;
use crate::rational::{format_rational, int, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BellTriple {
    pub sigma_ab: Covariance,
    pub sigma_ac: Covariance,
    pub sigma_bc: Covariance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChshQuad {
    pub sigma_ab: Covariance,
    pub sigma_ac: Covariance,
    pub sigma_db: Covariance,
    pub sigma_dc: Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Convention {
    /// `|σ_xy - σ_xz| <= 1 - σ_yz`
    Direct,
    /// `|σ_xy - σ_xz| <= 1 + σ_yz`
    Singlet,
}

impl Convention {
    pub fn name(self) -> &'static str {
        match self {
            Convention::Direct => "direct",
            Convention::Singlet => "singlet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    A,
    B,
    C,
}

impl Var {
    const ALL: [Var; 3] = [Var::A, Var::B, Var::C];

    fn letter(self) -> char {
        match self {
            Var::A => 'A',
            Var::B => 'B',
            Var::C => 'C',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BellVariant {
    /// 0: (x,y,z) = (A,B,C); 1: (B,C,A); 2: (C,A,B).
    pub rotation: u8,
    pub negated: Option<Var>,
    pub convention: Convention,
}

impl BellVariant {
    pub const IDENTITY: BellVariant =
        BellVariant { rotation: 0, negated: None, convention: Convention::Direct };

    pub fn family(convention: Convention) -> impl Iterator<Item = BellVariant> {
        (0..3u8).flat_map(move |rotation| {
            [None, Some(Var::A), Some(Var::B), Some(Var::C)]
                .into_iter()
                .map(move |negated| BellVariant { rotation, negated, convention })
        })
    }

    fn roles(self) -> [Var; 3] {
        let r = self.rotation as usize % 3;
        [Var::ALL[r], Var::ALL[(r + 1) % 3], Var::ALL[(r + 2) % 3]]
    }
}

impl fmt::Display for BellVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y, z] = self.roles();
        write!(f, "bell/{}/{}{}{}", self.convention.name(), x.letter(), y.letter(), z.letter())?;
        if let Some(v) = self.negated {
            write!(f, "/-{}", v.letter())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChshTerm {
    Ab,
    Ac,
    Db,
    Dc,
}

impl ChshTerm {
    pub const ALL: [ChshTerm; 4] = [ChshTerm::Ab, ChshTerm::Ac, ChshTerm::Db, ChshTerm::Dc];

    pub fn name(self) -> &'static str {
        match self {
            ChshTerm::Ab => "ab",
            ChshTerm::Ac => "ac",
            ChshTerm::Db => "db",
            ChshTerm::Dc => "dc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Bell(BellVariant),
    /// The term carrying the minus sign; the absolute value covers both global signs.
    Chsh { minus: ChshTerm },
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Bell(b) => b.fmt(f),
            Variant::Chsh { minus } => write!(f, "chsh/minus-{}", minus.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InequalityVerdict {
    pub variant: Variant,
    /// Nonnegative left-hand side (already an absolute value).
    pub lhs: Rational,
    pub bound: Rational,
    pub satisfied: bool,
}

impl InequalityVerdict {
    fn new(variant: Variant, lhs: Rational, bound: Rational) -> Self {
        let satisfied = lhs <= bound;
        InequalityVerdict { variant, lhs, bound, satisfied }
    }
}

impl fmt::Display for InequalityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} lhs={} bound={} {}",
            self.variant,
            format_rational(&self.lhs),
            format_rational(&self.bound),
            if self.satisfied { "satisfied" } else { "VIOLATED" }
        )
    }
}

impl BellTriple {
    fn sigma(&self, p: Var, q: Var) -> &Rational {
        match (p, q) {
            (Var::A, Var::B) | (Var::B, Var::A) => self.sigma_ab.value(),
            (Var::A, Var::C) | (Var::C, Var::A) => self.sigma_ac.value(),
            (Var::B, Var::C) | (Var::C, Var::B) => self.sigma_bc.value(),
            _ => unreachable!("pairs of distinct variables only"),
        }
    }

    fn signed_sigma(&self, p: Var, q: Var, negated: Option<Var>) -> Rational {
        let s = self.sigma(p, q).clone();
        if negated == Some(p) || negated == Some(q) {
            -s
        } else {
            s
        }
    }
}

pub fn bell_check(triple: &BellTriple, variant: BellVariant) -> InequalityVerdict {
    let [x, y, z] = variant.roles();
    let xy = triple.signed_sigma(x, y, variant.negated);
    let xz = triple.signed_sigma(x, z, variant.negated);
    let yz = triple.signed_sigma(y, z, variant.negated);
    let lhs = (xy - xz).abs();
    let bound = match variant.convention {
        Convention::Direct => int(1) - yz,
        Convention::Singlet => int(1) + yz,
    };
    InequalityVerdict::new(Variant::Bell(variant), lhs, bound)
}

/// Every rotation and sign flip under both conventions, direct convention first.
pub fn bell_check_all(triple: &BellTriple) -> Vec<InequalityVerdict> {
    [Convention::Direct, Convention::Singlet]
        .into_iter()
        .flat_map(BellVariant::family)
        .map(|v| bell_check(triple, v))
        .collect()
}

/// True when every Bell verdict of `convention` in `verdicts` is satisfied.
pub fn family_satisfied(verdicts: &[InequalityVerdict], convention: Convention) -> bool {
    verdicts
        .iter()
        .filter(|v| matches!(v.variant, Variant::Bell(b) if b.convention == convention))
        .all(|v| v.satisfied)
}

/// `σ_ab + σ_ac + σ_db - σ_dc`, signed.
pub fn chsh_value(quad: &ChshQuad) -> Rational {
    chsh_with_minus(quad, ChshTerm::Dc)
}

fn chsh_with_minus(quad: &ChshQuad, minus: ChshTerm) -> Rational {
    ChshTerm::ALL
        .iter()
        .map(|&t| {
            let s = match t {
                ChshTerm::Ab => quad.sigma_ab.value(),
                ChshTerm::Ac => quad.sigma_ac.value(),
                ChshTerm::Db => quad.sigma_db.value(),
                ChshTerm::Dc => quad.sigma_dc.value(),
            };
            if t == minus {
                -s.clone()
            } else {
                s.clone()
            }
        })
        .sum()
}

pub fn chsh_check_all(quad: &ChshQuad) -> Vec<InequalityVerdict> {
    ChshTerm::ALL
        .iter()
        .map(|&minus| {
            InequalityVerdict::new(Variant::Chsh { minus }, chsh_with_minus(quad, minus).abs(), int(2))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{ratio, DEFAULT_PRECISION};

    fn cov(r: Rational) -> Covariance {
        Covariance::new(r).unwrap()
    }

    fn s() -> Covariance {
        Covariance::from_f64(std::f64::consts::FRAC_1_SQRT_2, DEFAULT_PRECISION).unwrap()
    }

    fn triple(ab: Covariance, ac: Covariance, bc: Covariance) -> BellTriple {
        BellTriple { sigma_ab: ab, sigma_ac: ac, sigma_bc: bc }
    }

    #[test]
    fn identity_variant_is_satisfied_for_vorobev_triple() {
        let t = triple(s(), s(), Covariance::zero());
        let v = bell_check(&t, BellVariant::IDENTITY);
        assert_eq!(v.lhs, int(0));
        assert_eq!(v.bound, int(1));
        assert!(v.satisfied);
    }

    #[test]
    fn rotated_variant_is_violated_for_vorobev_triple() {
        let t = triple(s(), s(), Covariance::zero());
        // x = B: |σ_BA - σ_BC| <= 1 - σ_CA
        let v = bell_check(&t, BellVariant { rotation: 1, ..BellVariant::IDENTITY });
        assert_eq!(v.lhs, s().into_inner());
        assert_eq!(v.bound, int(1) - s().into_inner());
        assert!(!v.satisfied);
        assert_eq!(v.variant.to_string(), "bell/direct/BCA");
        assert!(!family_satisfied(&bell_check_all(&t), Convention::Direct));
    }

    #[test]
    fn independent_and_identical_variables_satisfy_all() {
        let z = Covariance::zero();
        let verdicts = bell_check_all(&triple(z.clone(), z.clone(), z));
        assert!(verdicts.iter().all(|v| v.satisfied));
        assert_eq!(verdicts.len(), 24);

        let one = cov(int(1));
        let verdicts = bell_check_all(&triple(one.clone(), one.clone(), one));
        assert!(family_satisfied(&verdicts, Convention::Direct));
    }

    #[test]
    fn sign_flips_catch_the_all_negative_facet() {
        // σ = -3/5 on every pair: the sum -9/5 < -1 is infeasible, yet every
        // unflipped rotation reads 0 <= 8/5.
        let m = cov(ratio(-3, 5));
        let t = triple(m.clone(), m.clone(), m);
        let unflipped_ok = BellVariant::family(Convention::Direct)
            .filter(|v| v.negated.is_none())
            .all(|v| bell_check(&t, v).satisfied);
        assert!(unflipped_ok);
        assert!(!family_satisfied(&bell_check_all(&t), Convention::Direct));
    }

    #[test]
    fn singlet_convention_flags_realizable_points() {
        // A = B = -C is realizable, but 1 + σ_BC = 0 < |σ_AB - σ_AC| = 2.
        let t = triple(cov(int(1)), cov(int(-1)), cov(int(-1)));
        let v = bell_check(&t, BellVariant { convention: Convention::Singlet, ..BellVariant::IDENTITY });
        assert!(!v.satisfied);
        assert!(family_satisfied(&bell_check_all(&t), Convention::Direct));
    }

    #[test]
    fn chsh_values() {
        let quad = ChshQuad { sigma_ab: s(), sigma_ac: s(), sigma_db: s(), sigma_dc: cov(-s().into_inner()) };
        assert_eq!(chsh_value(&quad), s().into_inner() * int(4));
        let f = crate::rational::to_f64(&chsh_value(&quad));
        assert!((f - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-8);
        let verdicts = chsh_check_all(&quad);
        let dc = verdicts.iter().find(|v| v.variant == Variant::Chsh { minus: ChshTerm::Dc }).unwrap();
        assert!(!dc.satisfied);

        let z = Covariance::zero();
        let zq = ChshQuad { sigma_ab: z.clone(), sigma_ac: z.clone(), sigma_db: z.clone(), sigma_dc: z };
        assert_eq!(chsh_value(&zq), int(0));
        assert!(chsh_check_all(&zq).iter().all(|v| v.satisfied));

        let one = cov(int(1));
        let oq = ChshQuad { sigma_ab: one.clone(), sigma_ac: one.clone(), sigma_db: one.clone(), sigma_dc: one };
        assert_eq!(chsh_value(&oq), int(2));
        assert!(chsh_check_all(&oq).iter().all(|v| v.satisfied));
    }

    proptest::proptest! {
        #[test]
        fn chsh_is_bounded_and_linear(a in -20i64..=20, b in -20i64..=20, c in -20i64..=20, d in -20i64..=20, e in -20i64..=20) {
            let q = |x: i64| cov(ratio(x, 20));
            let base = ChshQuad { sigma_ab: q(a), sigma_ac: q(b), sigma_db: q(c), sigma_dc: q(d) };
            let v = chsh_value(&base);
            proptest::prop_assert!(v.abs() <= int(4));
            // Linear in σ_ab: f(e) - f(a) = (e - a)/20.
            let moved = ChshQuad { sigma_ab: q(e), ..base.clone() };
            proptest::prop_assert_eq!(chsh_value(&moved) - v, ratio(e - a, 20));
        }
    }
}
