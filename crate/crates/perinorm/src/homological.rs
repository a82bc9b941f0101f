//! The homological operators of both reductions and their exact per-mode
//! solves.
//!
//! At degree n the construction has to invert a linear operator on
//! homogeneous parts. For uncoupling it is
//!
//!   (A Phi)(u0, t) = D_u0 Phi . L0 u0 - L1 Phi + dPhi/dt,
//!
//! for the normal form it is
//!
//!   (B Phi)(x, t) = D_x Phi . L x - L Phi + dPhi/dt
//!
//! (plus the resonant part kept in the equation). Passing the domain to the
//! eigenbasis of the driving block turns the directional-derivative term
//! into multiplication by <alpha, lambda>, so each monomial/Fourier pair
//! decouples into a small dense solve (uncoupling) or a scalar division
//! per eigen-direction (normal form). Everything is finite and exact up to
//! rounding; the forward operator is re-applied to every solution and the
//! residual has to vanish to[`tol::SOLVE_RESIDUAL`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::algebra::{compose, EigenBasis, HomoPoly, PolyMap, TrigPoly};
use crate::error::{Error, Result};
use crate::linalg;
use crate::norms::graded_norm;
use crate::spectrum::ScanTuple;
use crate::tol;

/// Wrap a homogeneous part as a single-part map.
fn as_map(p: &HomoPoly) -> PolyMap {
    let mut map = PolyMap::zero(p.vars(), p.dim(), p.codomain(), p.period());
    map.set_part(p.clone()).expect("single part");
    map
}

/// Substitute `x -> M x` into the domain of a homogeneous part.
pub(crate) fn conjugate_domain(p: &HomoPoly, m: &DMatrix<Complex64>) -> Result<HomoPoly> {
    let inner = PolyMap::linear(m, p.period());
    let composed = compose(&as_map(p), &inner, p.degree())?;
    Ok(composed
        .part(p.degree())
        .cloned()
        .unwrap_or_else(|| HomoPoly::zero(p.vars(), p.degree(), p.dim(), p.codomain(), p.period())))
}

/// Apply the forward homological operator
/// D_x Phi . (L_src x) - L_tgt Phi + dPhi/dt.
///
/// For the uncoupling operator pass the first-block matrix as `l_src` and
/// the second-block matrix as `l_tgt`; for the normal-form operator pass
/// the full linear part twice.
pub fn apply_forward(
    l_src: &DMatrix<f64>,
    l_tgt: &DMatrix<f64>,
    phi: &HomoPoly,
) -> Result<HomoPoly> {
    if l_src.nrows() != phi.vars() {
        return Err(Error::DimensionMismatch {
            context: "forward operator domain",
            left: l_src.nrows(),
            right: phi.vars(),
        });
    }
    if l_tgt.nrows() != phi.dim() {
        return Err(Error::DimensionMismatch {
            context: "forward operator codomain",
            left: l_tgt.nrows(),
            right: phi.dim(),
        });
    }
    let lin = PolyMap::linear(&linalg::to_complex(l_src), phi.period());
    // A zero generator has no stored linear part; the transport term is zero.
    let transport = match lin.part(1) {
        Some(g) => crate::algebra::directional_derivative(phi, g)?,
        None => HomoPoly::zero(phi.vars(), phi.degree(), phi.dim(), phi.codomain(), phi.period()),
    };
    let damping = phi.apply_matrix(&linalg::to_complex(l_tgt), phi.codomain())?;
    transport.sub(&damping)?.add(&phi.dt())
}

/// Solution of one homological stage.
#[derive(Debug, Clone)]
pub struct HomologicalSolution {
    pub phi: HomoPoly,
    /// Relative norm of (forward operator applied to phi) - rhs.
    pub residual: f64,
    /// Smallest distance from a divisor point to the target spectrum seen
    /// while solving.
    pub min_divisor: f64,
}

/// Solve D_u0 Phi . L0 u0 - L1 Phi + dPhi/dt = rhs for a single degree.
///
/// `basis0` diagonalizes `l0`; the solve runs per monomial (in the
/// eigen-coordinates of the first block) and per Fourier mode as a dense
/// complex system in the second block. Divisors closer to the spectrum of
/// `l1` than `tol_res` are a non-resonance violation.
pub fn solve_uncoupling_stage(
    basis0: &EigenBasis,
    l0: &DMatrix<f64>,
    l1: &DMatrix<f64>,
    rhs: &HomoPoly,
    tol_res: f64,
    enforce_real: bool,
) -> Result<HomologicalSolution> {
    let m1 = rhs.dim();
    if l1.nrows() != m1 {
        return Err(Error::DimensionMismatch {
            context: "uncoupling stage codomain",
            left: l1.nrows(),
            right: m1,
        });
    }
    let n = rhs.degree();
    let freq = std::f64::consts::TAU / rhs.period();
    let lambda1: Vec<Complex64> = l1.clone().complex_eigenvalues().iter().copied().collect();
    let l1c = linalg::to_complex(l1);
    let id = DMatrix::<Complex64>::identity(m1, m1);

    let rhs_t = conjugate_domain(rhs, &basis0.vectors)?;
    let mut phi_t = HomoPoly::zero(rhs.vars(), n, m1, rhs.codomain(), rhs.period());
    let mut min_divisor = f64::INFINITY;

    for (alpha, coeff) in rhs_t.terms() {
        let pairing: Complex64 = alpha
            .exponents()
            .iter()
            .enumerate()
            .map(|(i, &e)| Complex64::new(e as f64, 0.0) * basis0.values[i])
            .sum();
        let mut modes: Vec<(i64, DVector<Complex64>)> = Vec::new();
        for (k, f) in coeff.modes() {
            let d = pairing + Complex64::new(0.0, k as f64 * freq);
            let gap = lambda1.iter().map(|l| (d - l).norm()).fold(f64::INFINITY, f64::min);
            min_divisor = min_divisor.min(gap);
            if gap <= tol_res {
                let j = lambda1
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (d - a.1).norm().total_cmp(&(d - b.1).norm()))
                    .map(|(j, _)| j)
                    .unwrap_or(0);
                return Err(Error::NonResonance {
                    alpha: alpha.clone(),
                    k,
                    j,
                    divisor_abs: gap,
                });
            }
            let a = &id * d - &l1c;
            let cond = linalg::condition_number(&a);
            if cond > tol::COND_LIMIT {
                return Err(Error::IllConditioned {
                    what: format!("stage-{n} solve at {alpha}, mode {k}"),
                    cond,
                });
            }
            let sol = linalg::solve(&a, &f.clone_owned()).ok_or(Error::IllConditioned {
                what: format!("stage-{n} factorization at {alpha}, mode {k}"),
                cond,
            })?;
            modes.push((k, sol));
        }
        if !modes.is_empty() {
            let t = TrigPoly::from_modes(rhs.period(), m1, modes, false)?;
            phi_t.add_term(alpha.clone(), t)?;
        }
    }

    let mut phi = conjugate_domain(&phi_t, &basis0.inverse)?;
    if enforce_real {
        phi.assert_real(tol::REAL_ROUNDTRIP)?;
    }

    let forward = apply_forward(l0, l1, &phi)?;
    let defect = forward.sub(rhs)?;
    let scale = graded_norm(rhs, 0)?.max(f64::MIN_POSITIVE);
    let residual = graded_norm(&defect, 0)? / scale;
    if residual > tol::SOLVE_RESIDUAL {
        return Err(Error::ToleranceFailure {
            what: format!("stage-{n} forward residual"),
            residual,
            tol: tol::SOLVE_RESIDUAL,
        });
    }
    Ok(HomologicalSolution {
        phi,
        residual,
        min_divisor,
    })
}

/// Solution of one normal-form stage: the transformation part, the resonant
/// part kept in the equation, and diagnostics.
#[derive(Debug, Clone)]
pub struct NormalFormStage {
    pub phi: HomoPoly,
    pub resonant: HomoPoly,
    pub residual: f64,
    /// Smallest divisor modulus actually divided by.
    pub min_divisor_used: f64,
    /// Tuples routed to the resonant part.
    pub resonant_tuples: Vec<ScanTuple>,
}

/// Solve D_x Phi . L x - L Phi + dPhi/dt + N = rhs for a single degree,
/// with N collecting every coefficient whose divisor is below `tol_res`.
///
/// `basis` diagonalizes `l` (the full linear part); the split happens in
/// its eigen-coordinates where the operator is diagonal.
pub fn solve_normal_form_stage(
    basis: &EigenBasis,
    l: &DMatrix<f64>,
    rhs: &HomoPoly,
    tol_res: f64,
    enforce_real: bool,
) -> Result<NormalFormStage> {
    let m = rhs.dim();
    if rhs.vars() != m || l.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "normal-form stage shape",
            left: rhs.vars(),
            right: m,
        });
    }
    let n = rhs.degree();
    let freq = std::f64::consts::TAU / rhs.period();

    // g_t = Q^-1 (rhs o Q): coefficients in eigen-coordinates.
    let g_t = conjugate_domain(rhs, &basis.vectors)?
        .apply_matrix(&basis.inverse, rhs.codomain())?;

    let mut phi_t = HomoPoly::zero(m, n, m, rhs.codomain(), rhs.period());
    let mut res_t = HomoPoly::zero(m, n, m, rhs.codomain(), rhs.period());
    let mut min_divisor_used = f64::INFINITY;
    let mut resonant_tuples = Vec::new();

    for (alpha, coeff) in g_t.terms() {
        let pairing: Complex64 = alpha
            .exponents()
            .iter()
            .enumerate()
            .map(|(i, &e)| Complex64::new(e as f64, 0.0) * basis.values[i])
            .sum();
        let mut phi_modes: Vec<(i64, DVector<Complex64>)> = Vec::new();
        let mut res_modes: Vec<(i64, DVector<Complex64>)> = Vec::new();
        for (k, f) in coeff.modes() {
            let base = pairing + Complex64::new(0.0, k as f64 * freq);
            let mut phi_v = DVector::<Complex64>::zeros(m);
            let mut res_v = DVector::<Complex64>::zeros(m);
            let mut any_phi = false;
            let mut any_res = false;
            for j in 0..m {
                let d = base - basis.values[j];
                let fj = f[j];
                if fj == Complex64::new(0.0, 0.0) {
                    continue;
                }
                if d.norm() <= tol_res {
                    res_v[j] = fj;
                    any_res = true;
                    resonant_tuples.push(ScanTuple {
                        alpha: alpha.clone(),
                        k,
                        j,
                        divisor_abs: d.norm(),
                    });
                } else {
                    min_divisor_used = min_divisor_used.min(d.norm());
                    phi_v[j] = fj / d;
                    any_phi = true;
                }
            }
            if any_phi {
                phi_modes.push((k, phi_v));
            }
            if any_res {
                res_modes.push((k, res_v));
            }
        }
        if !phi_modes.is_empty() {
            phi_t.add_term(alpha.clone(), TrigPoly::from_modes(rhs.period(), m, phi_modes, false)?)?;
        }
        if !res_modes.is_empty() {
            res_t.add_term(alpha.clone(), TrigPoly::from_modes(rhs.period(), m, res_modes, false)?)?;
        }
    }

    let mut phi = conjugate_domain(&phi_t, &basis.inverse)?
        .apply_matrix(&basis.vectors, rhs.codomain())?;
    let mut resonant = conjugate_domain(&res_t, &basis.inverse)?
        .apply_matrix(&basis.vectors, rhs.codomain())?;
    if enforce_real {
        phi.assert_real(tol::REAL_ROUNDTRIP)?;
        resonant.assert_real(tol::REAL_ROUNDTRIP)?;
    }

    let forward = apply_forward(l, l, &phi)?.add(&resonant)?;
    let defect = forward.sub(rhs)?;
    let scale = graded_norm(rhs, 0)?.max(f64::MIN_POSITIVE);
    let residual = graded_norm(&defect, 0)? / scale;
    if residual > tol::SOLVE_RESIDUAL {
        return Err(Error::ToleranceFailure {
            what: format!("stage-{n} forward residual"),
            residual,
            tol: tol::SOLVE_RESIDUAL,
        });
    }
    Ok(NormalFormStage {
        phi,
        resonant,
        residual,
        min_divisor_used,
        resonant_tuples,
    })
}
