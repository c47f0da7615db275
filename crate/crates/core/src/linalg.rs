//! Small dense symmetric solves.
//!
//! Everything here is desk scale: per-node covariance systems are `d x d`
//! with `d` in the single digits, and the global regression's normal
//! equations stay well under a hundred unknowns. A root-free LDL^T
//! factorization with a relative pivot floor is exact enough and keeps the
//! failure mode (rank deficiency) explicit.

use crate::scalar::Real;

/// LDL^T factorization of a symmetric positive-semidefinite matrix.
#[derive(Debug, Clone)]
pub(crate) struct SymFactor<R> {
    n: usize,
    /// Unit lower triangle, row-major, diagonal implied.
    lower: Vec<Vec<R>>,
    diag: Vec<R>,
    /// Smallest over largest absolute pivot: a cheap reciprocal condition
    /// estimate.
    rcond: R,
}

/// Why a factorization was refused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PivotBreakdown<R> {
    pub index: usize,
    pub rcond: R,
}

/// Factors `a` (symmetric, size `n x n`) with pivots required to stay above
/// `rel_floor` times the largest diagonal magnitude seen in `a`.
pub(crate) fn factor_spd<R: Real>(
    a: &[Vec<R>],
    rel_floor: R,
) -> Result<SymFactor<R>, PivotBreakdown<R>> {
    let n = a.len();
    let mut scale = R::zero();
    for (i, row) in a.iter().enumerate() {
        let m = row[i].abs();
        if m > scale {
            scale = m;
        }
    }
    if scale == R::zero() {
        scale = R::one();
    }
    let floor = rel_floor * scale;

    let mut lower = vec![vec![R::zero(); n]; n];
    let mut diag = vec![R::zero(); n];
    let mut max_pivot = R::zero();
    let mut min_pivot = R::infinity();
    for j in 0..n {
        let mut dj = a[j][j];
        for k in 0..j {
            dj = dj - lower[j][k] * lower[j][k] * diag[k];
        }
        let mag = dj.abs();
        if mag > max_pivot {
            max_pivot = mag;
        }
        if mag < min_pivot {
            min_pivot = mag;
        }
        let rcond = if max_pivot > R::zero() {
            min_pivot / max_pivot
        } else {
            R::zero()
        };
        if mag <= floor {
            return Err(PivotBreakdown { index: j, rcond });
        }
        diag[j] = dj;
        for i in (j + 1)..n {
            let mut v = a[i][j];
            for k in 0..j {
                v = v - lower[i][k] * lower[j][k] * diag[k];
            }
            lower[i][j] = v / dj;
        }
    }
    let rcond = if max_pivot > R::zero() {
        min_pivot / max_pivot
    } else {
        R::zero()
    };
    Ok(SymFactor {
        n,
        lower,
        diag,
        rcond,
    })
}

impl<R: Real> SymFactor<R> {
    pub fn rcond(&self) -> R {
        self.rcond
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[R]) -> Vec<R> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let delta = self.lower[i][k] * x[k];
                x[i] = x[i] - delta;
            }
        }
        for i in 0..n {
            x[i] = x[i] / self.diag[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let delta = self.lower[k][i] * x[k];
                x[i] = x[i] - delta;
            }
        }
        x
    }

    /// Dense inverse, built column by column.
    pub fn inverse(&self) -> Vec<Vec<R>> {
        let n = self.n;
        let mut inv = vec![vec![R::zero(); n]; n];
        for j in 0..n {
            let mut e = vec![R::zero(); n];
            e[j] = R::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[i][j] = col[i];
            }
        }
        inv
    }
}

/// Max-norm of `A A_inv - I`; used to sanity-check stored inverses.
pub(crate) fn inverse_defect<R: Real>(a: &[Vec<R>], inv: &[Vec<R>]) -> R {
    let n = a.len();
    let mut worst = R::zero();
    for i in 0..n {
        for j in 0..n {
            let mut acc = R::zero();
            for (k, inv_row) in inv.iter().enumerate() {
                acc = acc + a[i][k] * inv_row[j];
            }
            let target = if i == j { R::one() } else { R::zero() };
            let gap = (acc - target).abs();
            if gap > worst {
                worst = gap;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = vec![vec![4.0f64, 1.0], vec![1.0, 3.0]];
        let f = factor_spd(&a, 1e-12).unwrap();
        let x = f.solve(&[1.0, 2.0]);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        assert!(inverse_defect(&a, &f.inverse()) < 1e-14);
    }

    #[test]
    fn refuses_singular_matrix() {
        let a = vec![vec![1.0f64, 1.0], vec![1.0, 1.0]];
        let err = factor_spd(&a, 1e-10).unwrap_err();
        assert_eq!(err.index, 1);
    }
}
