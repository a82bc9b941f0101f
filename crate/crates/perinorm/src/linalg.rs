//! Small complex linear-algebra helpers built on nalgebra's real kernels.
//!
//! Complex SVD questions (condition numbers, ranks, pseudo-inverses) are
//! answered through the standard realification [[Re, -Im], [Im, Re]], which
//! is an isometry and turns each complex singular value into a pair of equal
//! real ones.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

pub fn realify(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Singular values of a complex matrix (each one once), descending.
pub fn singular_values(a: &DMatrix<Complex64>) -> Vec<f64> {
    let mut sv: Vec<f64> = realify(a).singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    // Realification doubles every singular value; keep one of each pair.
    sv.into_iter().step_by(2).collect()
}

/// 2-norm condition number; infinite when singular.
pub fn condition_number(a: &DMatrix<Complex64>) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

/// Rank with a relative singular-value cutoff.
pub fn rank(a: &DMatrix<Complex64>, rel: f64) -> usize {
    let sv = singular_values(a);
    let cut = sv.first().copied().unwrap_or(0.0) * rel;
    sv.iter().filter(|&&s| s > cut && s > 0.0).count()
}

/// Inverse through LU, guarded by a condition-number check.
pub fn inverse(a: &DMatrix<Complex64>, what: &str) -> Result<DMatrix<Complex64>> {
    let cond = condition_number(a);
    if !cond.is_finite() || cond > tol::COND_LIMIT {
        return Err(Error::IllConditioned {
            what: what.to_string(),
            cond,
        });
    }
    a.clone().lu().try_inverse().ok_or(Error::IllConditioned {
        what: what.to_string(),
        cond: f64::INFINITY,
    })
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn solve(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    a.clone().lu().solve(b)
}

/// Real part of a complex matrix whose imaginary part must be rounding dust.
pub fn real_part_checked(a: &DMatrix<Complex64>, rel: f64, what: &str) -> Result<DMatrix<f64>> {
    let scale = 1.0 + a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let worst_im = a.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_im > rel * scale {
        return Err(Error::ToleranceFailure {
            what: what.to_string(),
            residual: worst_im,
            tol: rel * scale,
        });
    }
    Ok(a.map(|z| z.re))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_complex_diagonal() {
        let mut a = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        a[(0, 0)] = Complex64::new(0.0, 3.0);
        a[(1, 1)] = Complex64::new(4.0, 0.0);
        let sv = singular_values(&a);
        assert_eq!(sv.len(), 2);
        assert!((sv[0] - 4.0).abs() < 1e-12);
        assert!((sv[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 1.0),
                Complex64::new(0.0, -2.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(3.0, 1.0),
            ],
        );
        let ai = inverse(&a, "test").unwrap();
        let id = &a * &ai;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_detects_deficiency() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(4.0, 0.0),
            ],
        );
        assert_eq!(rank(&a, tol::RANK), 1);
    }
}
