//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

/// Covariance vectors of the deterministic ±1 assignments of `arity`
/// variables over the given pairs, with duplicates removed.
pub fn vertices(arity: usize, pairs: &[(usize, usize)]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = Vec::new();
    for mask in 0..1u32 << arity {
        let s = |i: usize| if mask >> i & 1 == 0 { 1 } else { -1 };
        let v: Vec<i64> = pairs.iter().map(|&(i, j)| s(i) * s(j)).collect();
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Determinant by fraction-free Gaussian elimination.
pub fn det(mut m: Vec<Vec<i128>>) -> i128 {
    let n = m.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&r| m[r][k] != 0) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut with: Vec<Vec<usize>> = subsets(n - 1, k - 1);
    for s in &mut with {
        s.push(n - 1);
    }
    with.extend(subsets(n - 1, k));
    with
}

/// Whether `num / den` lies in the convex hull of `points`, decided exactly
/// by Cramer's rule on every simplex of `dim + 1` points. The hull must be
/// full-dimensional; then any member lies in one of its simplices.
pub fn in_hull(points: &[Vec<i64>], num: &[i64], den: i64) -> bool {
    assert!(den > 0);
    let dim = num.len();
    for subset in subsets(points.len(), dim + 1) {
        // Columns (v; 1), right-hand side (num; den).
        let column = |c: usize| -> Vec<i128> {
            let mut col: Vec<i128> = points[subset[c]].iter().map(|&x| x as i128).collect();
            col.push(1);
            col
        };
        let matrix = |replace: Option<usize>| -> Vec<Vec<i128>> {
            let cols: Vec<Vec<i128>> = (0..=dim)
                .map(|c| {
                    if Some(c) == replace {
                        num.iter().map(|&x| x as i128).chain([den as i128]).collect()
                    } else {
                        column(c)
                    }
                })
                .collect();
            (0..=dim).map(|r| cols.iter().map(|col| col[r]).collect()).collect()
        };
        let d = det(matrix(None));
        if d == 0 {
            continue;
        }
        if (0..=dim).all(|c| det(matrix(Some(c))) * d.signum() >= 0) {
            return true;
        }
    }
    false
}

pub const TRIANGLE_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
pub const LOOP_PAIRS: [(usize, usize); 4] = [(0, 2), (0, 3), (1, 2), (1, 3)];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_sanity() {
        assert_eq!(det(vec![vec![2, 0], vec![0, 3]]), 6);
        assert_eq!(det(vec![vec![0, 1], vec![1, 0]]), -1);
        let tri = vertices(3, &TRIANGLE_PAIRS);
        assert_eq!(tri.len(), 4);
        assert!(in_hull(&tri, &[0, 0, 0], 1));
        assert!(in_hull(&tri, &[1, 1, 1], 1));
        assert!(!in_hull(&tri, &[-1, -1, -1], 1));
        assert_eq!(vertices(4, &LOOP_PAIRS).len(), 8);
    }
}
