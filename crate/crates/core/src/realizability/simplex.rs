//! Dense exact simplex for the L1 phase-1 problem
//!
//! ```text
//! minimize   sum(u) + sum(v)
//! subject to A x + u - v = b      (one row per constraint cell)
//!            sum(x)      = 1
//!            x, u, v >= 0
//! ```
//!
//! Bland's rule picks both the entering and the leaving column, so the pivot
//! sequence is a pure function of the input and cannot cycle.

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

pub(crate) struct L1Solution {
    /// Optimal atom masses; a point of the probability simplex.
    pub atoms: Vec<Rational>,
    /// Minimal total absolute violation over all cells.
    pub objective: Rational,
    /// Optimal dual vector, one entry per cell row then the normalization row.
    pub duals: Vec<Rational>,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    reduced: Vec<Rational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.rows[row][col].recip();
        if !inv.is_one() {
            for v in self.rows[row].iter_mut().filter(|v| !v.is_zero()) {
                *v *= &inv;
            }
            self.rhs[row] *= &inv;
        }
        let support: Vec<usize> = self.rows[row]
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, _)| j)
            .collect();
        let (pivot_row, pivot_rhs) = (self.rows[row].clone(), self.rhs[row].clone());

        for r in 0..self.rows.len() {
            if r == row || self.rows[r][col].is_zero() {
                continue;
            }
            let factor = self.rows[r][col].clone();
            for &j in &support {
                let delta = &factor * &pivot_row[j];
                self.rows[r][j] -= delta;
            }
            self.rhs[r] -= &factor * &pivot_rhs;
        }
        if !self.reduced[col].is_zero() {
            let factor = self.reduced[col].clone();
            for &j in &support {
                let delta = &factor * &pivot_row[j];
                self.reduced[j] -= delta;
            }
        }
        self.basis[row] = col;
    }
}

/// `cells[i][j]` is true when atom `j` contributes to cell row `i`.
pub(crate) fn solve_l1(cells: &[Vec<bool>], rhs: &[Rational], atoms: usize) -> L1Solution {
    let m = cells.len();
    let u = |i: usize| atoms + i;
    let v = |i: usize| atoms + m + i;
    let ghost = atoms + 2 * m;
    let width = ghost + 1;

    let mut rows = Vec::with_capacity(m + 1);
    for (i, cell) in cells.iter().enumerate() {
        let mut row = vec![Rational::zero(); width];
        for (j, &hit) in cell.iter().enumerate() {
            if hit {
                row[j] = Rational::one();
            }
        }
        row[u(i)] = Rational::one();
        row[v(i)] = -Rational::one();
        rows.push(row);
    }
    let mut norm = vec![Rational::zero(); width];
    for x in norm.iter_mut().take(atoms) {
        *x = Rational::one();
    }
    // The ghost column is the identity column of the normalization row. It
    // leaves the basis at once and never re-enters; its reduced cost yields
    // the normalization dual.
    norm[ghost] = Rational::one();
    rows.push(norm);

    let mut basis: Vec<usize> = (0..m).map(u).collect();
    basis.push(ghost);
    let mut rhs_all: Vec<Rational> = rhs[..m].to_vec();
    rhs_all.push(Rational::one());

    let mut tab = Tableau { rows, rhs: rhs_all, reduced: vec![Rational::zero(); width], basis };

    // Feasible start: all mass on atom 0, every cell residual carried by u or v.
    tab.pivot(m, 0);
    for i in 0..m {
        if tab.rhs[i].is_negative() {
            tab.pivot(i, v(i));
        }
    }

    let cost = |j: usize| -> Rational {
        if j >= atoms && j < ghost {
            Rational::one()
        } else {
            Rational::zero()
        }
    };
    for (j, d) in tab.reduced.iter_mut().enumerate() {
        *d = cost(j);
    }
    for r in 0..=m {
        let cb = cost(tab.basis[r]);
        if cb.is_zero() {
            continue;
        }
        for j in 0..width {
            if !tab.rows[r][j].is_zero() {
                let delta = &cb * &tab.rows[r][j];
                tab.reduced[j] -= delta;
            }
        }
    }

    while let Some(enter) = (0..ghost).find(|&j| tab.reduced[j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for r in 0..=m {
            let a = &tab.rows[r][enter];
            if !a.is_positive() {
                continue;
            }
            let ratio = &tab.rhs[r] / a;
            let better = match &leave {
                None => true,
                Some((best_r, best)) => {
                    ratio < *best || (ratio == *best && tab.basis[r] < tab.basis[*best_r])
                }
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        let (row, _) = leave.expect("objective is bounded below by zero");
        tab.pivot(row, enter);
    }

    let mut x = vec![Rational::zero(); atoms];
    let mut objective = Rational::zero();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < atoms {
            x[b] = tab.rhs[r].clone();
        } else if b < ghost {
            objective += &tab.rhs[r];
        }
    }
    let mut duals: Vec<Rational> = (0..m).map(|i| Rational::one() - &tab.reduced[u(i)]).collect();
    duals.push(-tab.reduced[ghost].clone());

    L1Solution { atoms: x, objective, duals }
}
