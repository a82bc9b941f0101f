//! Independent verification of the constructions by routes that share no
//! solver code with them.
//!
//! Three layers:
//!
//! * an **oracle** that re-solves the homological stages by dense operator
//!   assembly and a realified SVD pseudo-inverse. The production route
//!   conjugates the domain to the eigenbasis and divides by scalar
//!   divisors; the oracle writes the operator entrywise from its defining
//!   formula in physical coordinates and never factors it, so agreement at
//!   [`tol::ORACLE_GAP`] checks formula, conjugation, and division at once.
//!   For the normal form the resonant directions are adjoined as explicit
//!   extra columns and the dense rank deficiency is cross-checked against
//!   the divisor count.
//! * a fixed-step **integrator** (classic fourth-order Runge-Kutta) used to
//!   confirm dynamical statements: an orbit started on the invariant graph
//!   stays within the certified remainder budget of it, the remainder-free
//!   transformed system keeps the graph exactly, and orbits of the
//!   transformed system push forward to orbits of the original one.
//! * a **radius sweep** running the whole construction per radius (in
//!   parallel) and checking that the certified bound decreases strictly
//!   and at least at half the certified exponential rate.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{
    compose, dense_indices, directional_derivative_map, Codomain, HomoPoly, MultiIndex, PolyMap,
    SystemSpec, TrigPoly,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::normalform::NormalFormRun;
use crate::spectrum::{EigenData, Reduction};
use crate::tol;
use crate::uncouple::{embed_block, run_uncoupling, RunOptions, UncouplingRun};

/// Hard cap on dense unknowns per degree; the oracle is meant for spot
/// checks at low degree, not production sizes.
const ORACLE_MAX_UNKNOWNS: usize = 5000;

/// Highest degree the oracle re-solves.
pub const ORACLE_MAX_DEGREE: u32 = 3;

// ---------------------------------------------------------------------------
// Dense oracle
// ---------------------------------------------------------------------------

/// Dense coefficient layout for one degree: monomials x Fourier modes x
/// components, in the square-root-factorial-scaled basis that makes the
/// minimal-norm solution the graded-norm-minimal one.
struct DenseLayout {
    indices: Vec<MultiIndex>,
    pos: BTreeMap<MultiIndex, usize>,
    k_max: i64,
    comps: usize,
    scale: Vec<f64>,
}

impl DenseLayout {
    fn new(degree: u32, vars: usize, k_max: i64, comps: usize) -> Result<Self> {
        let indices = dense_indices(degree, vars);
        let pos: BTreeMap<MultiIndex, usize> = indices
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        let n_fact: f64 = (1..=degree as u64).map(|v| v as f64).product();
        let scale = indices
            .iter()
            .map(|a| (a.factorial() / n_fact).sqrt())
            .collect();
        let layout = DenseLayout {
            indices,
            pos,
            k_max,
            comps,
            scale,
        };
        if layout.len() > ORACLE_MAX_UNKNOWNS {
            return Err(Error::InvalidArgument(format!(
                "oracle stage would need {} dense unknowns (cap {})",
                layout.len(),
                ORACLE_MAX_UNKNOWNS
            )));
        }
        Ok(layout)
    }

    fn len(&self) -> usize {
        self.indices.len() * (2 * self.k_max as usize + 1) * self.comps
    }

    fn id(&self, alpha_pos: usize, k: i64, c: usize) -> usize {
        let modes = 2 * self.k_max as usize + 1;
        (alpha_pos * modes + (k + self.k_max) as usize) * self.comps + c
    }

    fn weight(&self, alpha_pos: usize) -> f64 {
        self.scale[alpha_pos]
    }

    /// Operator matrix of
    /// D_x Phi . (L_src x) - L_tgt Phi + dPhi/dt
    /// on this layout, written entry by entry from the formula.
    fn operator(&self, l_src: &DMatrix<f64>, l_tgt: &DMatrix<f64>, freq: f64) -> DMatrix<Complex64> {
        let n = self.len();
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        for (ap, alpha) in self.indices.iter().enumerate() {
            for k in -self.k_max..=self.k_max {
                for c in 0..self.comps {
                    let col = self.id(ap, k, c);
                    let w_col = self.weight(ap);
                    // d/dt: multiplication by i k freq.
                    a[(col, col)] += Complex64::new(0.0, k as f64 * freq);
                    // -L_tgt Phi: component mixing at fixed monomial.
                    for r in 0..self.comps {
                        let row = self.id(ap, k, r);
                        a[(row, col)] -= Complex64::new(l_tgt[(r, c)], 0.0);
                    }
                    // D_x (x^alpha) . (L_src x) = sum_{r,s} alpha_r
                    // L_src[r,s] x^(alpha - e_r + e_s).
                    for r in 0..alpha.len() {
                        let e_r = alpha.get(r);
                        if e_r == 0 {
                            continue;
                        }
                        let down = alpha.sub_unit(r).expect("positive exponent");
                        for s in 0..alpha.len() {
                            let entry = l_src[(r, s)];
                            if entry == 0.0 {
                                continue;
                            }
                            let target = down.add(&MultiIndex::unit(alpha.len(), s)).expect("same arity");
                            let tp = self.pos[&target];
                            let row = self.id(tp, k, c);
                            let w_row = self.weight(tp);
                            a[(row, col)] +=
                                Complex64::new(e_r as f64 * entry, 0.0) * (w_row / w_col);
                        }
                    }
                }
            }
        }
        // Scale the remaining diagonal families: d/dt and L_tgt terms keep
        // the monomial, so their weight ratio is one and only the transport
        // entries above carried a ratio.
        a
    }

    fn vector(&self, part: &HomoPoly) -> DVector<Complex64> {
        let mut b = DVector::<Complex64>::zeros(self.len());
        for (alpha, coeff) in part.terms() {
            let ap = self.pos[alpha];
            let w = self.weight(ap);
            for (k, v) in coeff.modes() {
                if k.abs() > self.k_max {
                    continue;
                }
                for c in 0..self.comps {
                    b[self.id(ap, k, c)] = v[c] * w;
                }
            }
        }
        b
    }

    fn part(
        &self,
        x: &DVector<Complex64>,
        vars: usize,
        degree: u32,
        codomain: Codomain,
        period: f64,
    ) -> Result<HomoPoly> {
        let mut out = HomoPoly::zero(vars, degree, self.comps, codomain, period);
        for (ap, alpha) in self.indices.iter().enumerate() {
            let w = self.weight(ap);
            let mut modes: Vec<(i64, DVector<Complex64>)> = Vec::new();
            for k in -self.k_max..=self.k_max {
                let mut v = DVector::<Complex64>::zeros(self.comps);
                let mut any = false;
                for c in 0..self.comps {
                    let val = x[self.id(ap, k, c)] / w;
                    if val.norm() > 0.0 {
                        v[c] = val;
                        any = true;
                    }
                }
                if any {
                    modes.push((k, v));
                }
            }
            if !modes.is_empty() {
                out.add_term(alpha.clone(), TrigPoly::from_modes(period, self.comps, modes, false)?)?;
            }
        }
        Ok(out)
    }
}

/// Realified least-squares solve; returns the minimal-norm solution and the
/// relative residual of the normal equations fit.
fn dense_solve(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
) -> Result<(DVector<Complex64>, f64)> {
    let ar = linalg::realify(a);
    let n = a.ncols();
    let mut br = DVector::<f64>::zeros(2 * b.len());
    for (i, z) in b.iter().enumerate() {
        br[i] = z.re;
        br[b.len() + i] = z.im;
    }
    let svd = ar.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let xr = svd
        .solve(&br, sigma_max * tol::RANK)
        .map_err(|e| Error::InvalidArgument(format!("dense solve failed: {e}")))?;
    let mut x = DVector::<Complex64>::zeros(n);
    for i in 0..n {
        x[i] = Complex64::new(xr[i], xr[n + i]);
    }
    let fit = (&ar * &xr - &br).norm() / br.norm().max(f64::MIN_POSITIVE);
    Ok((x, fit))
}

/// Report of one oracle comparison.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub reduction: Reduction,
    /// Highest degree re-solved.
    pub p: u32,
    /// Total dense unknowns over all degrees.
    pub unknowns: usize,
    /// Worst relative coefficient gap for the transformation.
    pub phi_gap: f64,
    /// Worst relative coefficient gap for the resonant part (zero for
    /// uncoupling, which keeps nothing).
    pub resonant_gap: f64,
    /// Dense rank deficiency matched the divisor count at every degree.
    pub kernel_match: bool,
    pub ok: bool,
}

fn relative_gap(ours: Option<&HomoPoly>, theirs: Option<&HomoPoly>) -> Result<f64> {
    let scale = 1.0
        + ours.map(|p| p.max_coeff()).unwrap_or(0.0)
        + theirs.map(|p| p.max_coeff()).unwrap_or(0.0);
    let gap = match (ours, theirs) {
        (Some(a), Some(b)) => a.sub(b)?.max_coeff(),
        (Some(a), None) | (None, Some(a)) => a.max_coeff(),
        (None, None) => 0.0,
    };
    Ok(gap / scale)
}

/// Re-solve the uncoupling stages densely and compare. The stage operator
/// is invertible under the certified non-resonance, so the comparison is
/// coefficient-by-coefficient with no quotienting.
pub fn oracle_uncoupling(spec: &SystemSpec, run: &UncouplingRun) -> Result<OracleReport> {
    spec.validate()?;
    let m0 = spec.m0;
    let m1 = spec.m1;
    let m = spec.m();
    let p = run.p.min(ORACLE_MAX_DEGREE);
    let freq = spec.omega();
    let mut phi = PolyMap::zero(m0, m1, Codomain::E1, spec.period);
    let mut unknowns = 0usize;
    let mut phi_gap = 0.0f64;

    for n in 2..=p {
        // Same recursion, fresh solver: RHS_n from the oracle's own phi.
        let iota = {
            let mut incl = DMatrix::<Complex64>::zeros(m, m0);
            for i in 0..m0 {
                incl[(i, i)] = Complex64::new(1.0, 0.0);
            }
            let lifted = phi.apply_matrix(&embed_block(m, m0, m1), Codomain::Full)?;
            PolyMap::linear(&incl, spec.period).add(&lifted)?
        };
        let w = compose(&spec.v, &iota, n)?;
        let w0 = w.slice_components(0, m0, Codomain::E0);
        let w1 = w.slice_components(m0, m1, Codomain::E1);
        let transport = directional_derivative_map(&phi, &w0, n)?;
        let mut rhs = w1
            .part(n)
            .cloned()
            .unwrap_or_else(|| HomoPoly::zero(m0, n, m1, Codomain::E1, spec.period));
        if let Some(t) = transport.part(n) {
            rhs = rhs.sub(t)?;
        }

        let layout = DenseLayout::new(n, m0, spec.k_needed(n), m1)?;
        unknowns += layout.len();
        if rhs.is_zero() {
            continue;
        }
        let a = layout.operator(&spec.l0, &spec.l1, freq);
        let b = layout.vector(&rhs);
        let (x, fit) = dense_solve(&a, &b)?;
        if fit > tol::ORACLE_GAP {
            return Err(Error::ToleranceFailure {
                what: format!("oracle stage-{n} dense fit"),
                residual: fit,
                tol: tol::ORACLE_GAP,
            });
        }
        let part = layout.part(&x, m0, n, Codomain::E1, spec.period)?;
        phi_gap = phi_gap.max(relative_gap(Some(&part), run.phi.part(n))?);
        phi.set_part(part)?;
    }

    let ok = phi_gap <= tol::ORACLE_GAP;
    Ok(OracleReport {
        reduction: Reduction::Uncoupling,
        p,
        unknowns,
        phi_gap,
        resonant_gap: 0.0,
        kernel_match: true,
        ok,
    })
}

/// Expand an eigen-coordinate monomial prod_i (sum_j Qinv[i,j] x_j)^alpha_i
/// into physical monomial coefficients, by direct convolution.
fn eigen_monomial(qinv: &DMatrix<Complex64>, alpha: &MultiIndex) -> Vec<(MultiIndex, Complex64)> {
    let m = alpha.len();
    let mut acc: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
    acc.insert(MultiIndex::zeros(m), Complex64::new(1.0, 0.0));
    for i in 0..m {
        for _ in 0..alpha.get(i) {
            let mut next: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
            for (idx, coeff) in &acc {
                for j in 0..m {
                    let q = qinv[(i, j)];
                    if q.norm() == 0.0 {
                        continue;
                    }
                    let grown = idx.add(&MultiIndex::unit(m, j)).expect("same arity");
                    *next.entry(grown).or_insert(Complex64::new(0.0, 0.0)) += coeff * q;
                }
            }
            acc = next;
        }
    }
    acc.into_iter().collect()
}

/// Re-solve the normal-form stages densely and compare. The resonant
/// directions are adjoined as explicit physical-coordinate columns, the
/// dense rank deficiency of the bare operator is compared against the
/// divisor count, and both the transformation and the resonant part are
/// compared coefficient-by-coefficient.
pub fn oracle_normal_form(spec: &SystemSpec, run: &NormalFormRun) -> Result<OracleReport> {
    spec.validate()?;
    let basis = spec.full_eigen()?;
    let eig = EigenData::from_spec(spec, Reduction::NormalForm)?;
    let l = spec.l_full();
    let m = spec.m();
    let p = run.p.min(ORACLE_MAX_DEGREE);
    let freq = spec.omega();
    let tol_res = run.scan.tol_res;
    let mut phi = PolyMap::zero(m, m, Codomain::Full, spec.period);
    let mut resonant = PolyMap::zero(m, m, Codomain::Full, spec.period);
    let mut unknowns = 0usize;
    let mut phi_gap = 0.0f64;
    let mut resonant_gap = 0.0f64;
    let mut kernel_match = true;

    for n in 2..=p {
        let j_map = PolyMap::identity(m, spec.period).add(&phi)?;
        let w = compose(&spec.v, &j_map, n)?;
        let mut rhs = w
            .part(n)
            .cloned()
            .unwrap_or_else(|| HomoPoly::zero(m, n, m, Codomain::Full, spec.period));
        if let Some(t) = directional_derivative_map(&phi, &resonant, n)?.part(n) {
            rhs = rhs.sub(t)?;
        }

        let layout = DenseLayout::new(n, m, spec.k_needed(n), m)?;
        unknowns += layout.len();

        // Independent resonant enumeration straight from the divisor
        // formula.
        let mut tuples: Vec<(MultiIndex, i64, usize)> = Vec::new();
        for alpha in &layout.indices {
            for k in -layout.k_max..=layout.k_max {
                for j in 0..m {
                    if eig.divisor(alpha, k, j).norm() <= tol_res {
                        tuples.push((alpha.clone(), k, j));
                    }
                }
            }
        }

        let a = layout.operator(&l, &l, freq);
        let rank = linalg::rank(&a, tol::RANK);
        if rank + tuples.len() != layout.len() {
            kernel_match = false;
        }
        if rhs.is_zero() {
            continue;
        }

        // Adjoin one column per resonant tuple: the physical coefficients
        // of the eigen-monomial carried by mode k.
        let cols = layout.len() + tuples.len();
        let mut ext = DMatrix::<Complex64>::zeros(layout.len(), cols);
        ext.view_mut((0, 0), (layout.len(), layout.len())).copy_from(&a);
        for (ti, (alpha, k, j)) in tuples.iter().enumerate() {
            for (idx, dom_coeff) in eigen_monomial(&basis.inverse, alpha) {
                let ap = layout.pos[&idx];
                let w_row = layout.weight(ap);
                for c in 0..m {
                    let val = dom_coeff * basis.vectors[(c, *j)];
                    if val.norm() == 0.0 {
                        continue;
                    }
                    ext[(layout.id(ap, *k, c), layout.len() + ti)] = val * w_row;
                }
            }
        }

        let b = layout.vector(&rhs);
        let (x, fit) = dense_solve(&ext, &b)?;
        if fit > tol::ORACLE_GAP {
            return Err(Error::ToleranceFailure {
                what: format!("oracle stage-{n} dense fit"),
                residual: fit,
                tol: tol::ORACLE_GAP,
            });
        }
        let part = layout.part(&x.rows(0, layout.len()).into_owned(), m, n, Codomain::Full, spec.period)?;
        let mut res_part = HomoPoly::zero(m, n, m, Codomain::Full, spec.period);
        for (ti, (alpha, k, j)) in tuples.iter().enumerate() {
            let amp = x[layout.len() + ti];
            if amp.norm() == 0.0 {
                continue;
            }
            for (idx, dom_coeff) in eigen_monomial(&basis.inverse, alpha) {
                let mut v = DVector::<Complex64>::zeros(m);
                for c in 0..m {
                    v[c] = amp * dom_coeff * basis.vectors[(c, *j)];
                }
                res_part.add_term(idx, TrigPoly::from_modes(spec.period, m, vec![(*k, v)], false)?)?;
            }
        }

        phi_gap = phi_gap.max(relative_gap(Some(&part), run.phi.part(n))?);
        resonant_gap = resonant_gap.max(relative_gap(Some(&res_part), run.resonant.part(n))?);
        phi.set_part(part)?;
        if !res_part.is_zero() {
            resonant.set_part(res_part)?;
        }
    }

    let ok = phi_gap <= tol::ORACLE_GAP && resonant_gap <= tol::ORACLE_GAP && kernel_match;
    Ok(OracleReport {
        reduction: Reduction::NormalForm,
        p,
        unknowns,
        phi_gap,
        resonant_gap,
        kernel_match,
        ok,
    })
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// A fixed-step trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

/// Classic fourth-order Runge-Kutta for du/dt = L u + F(u, t) with fixed
/// step. Non-finite state aborts with the blow-up time.
pub fn integrate(
    l: &DMatrix<f64>,
    forcing: &PolyMap,
    u0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    let m = l.nrows();
    if forcing.vars() != m || forcing.dim() != m || u0.len() != m {
        return Err(Error::DimensionMismatch {
            context: "integration shapes",
            left: forcing.vars(),
            right: m,
        });
    }
    if steps == 0 || !(t_end > t0) {
        return Err(Error::InvalidArgument(
            "integration needs t_end > t0 and at least one step".into(),
        ));
    }
    let h = (t_end - t0) / steps as f64;
    let f = |t: f64, u: &DVector<f64>| -> Result<DVector<f64>> { Ok(l * u + forcing.eval(u, t)?) };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut u = u0.clone();
    times.push(t0);
    states.push(u.clone());
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &u)?;
        let k2 = f(t + 0.5 * h, &(&u + &k1 * (0.5 * h)))?;
        let k3 = f(t + 0.5 * h, &(&u + &k2 * (0.5 * h)))?;
        let k4 = f(t + h, &(&u + &k3 * h))?;
        u += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t + h });
        }
        times.push(t + h);
        states.push(u.clone());
    }
    Ok(Trajectory { times, states })
}

// ---------------------------------------------------------------------------
// Graph invariance under the flow
// ---------------------------------------------------------------------------

/// Dynamical confirmation of one uncoupling run.
#[derive(Debug, Clone)]
pub struct DriftReport {
    /// sup over the orbit of |u1(t) - Phi(u0(t), t)|.
    pub sup_drift: f64,
    /// Budget [`tol::DRIFT_FACTOR`] x t_end x certified bound.
    pub allowed_drift: f64,
    pub ok_drift: bool,
    /// sup of the same quantity for the transformed system with the
    /// remainder removed, where the graph is exactly invariant.
    pub zeroed_drift: f64,
    pub ok_zeroed: bool,
    /// sup relative gap between the original orbit and the transformed
    /// orbit pushed through the change of variables.
    pub pushforward_defect: f64,
    pub ok_pushforward: bool,
    pub t_end: f64,
    pub steps: usize,
    pub ok: bool,
}

/// Assemble the transformed vector field on the full state, optionally
/// including the remainder forcing in the second block.
fn transformed_field(
    spec: &SystemSpec,
    run: &UncouplingRun,
    with_remainder: bool,
) -> Result<PolyMap> {
    let m0 = spec.m0;
    let m1 = spec.m1;
    let m = spec.m();
    let lift0 = run
        .transformed
        .v0
        .apply_matrix(&embed_block(m, 0, m0), Codomain::Full)?;
    let lift1 = run
        .transformed
        .v1
        .apply_matrix(&embed_block(m, m0, m1), Codomain::Full)?;
    let mut field = lift0.add(&lift1)?;
    if with_remainder {
        let wide = run.remainder.widen_domain(m0, m1);
        field = field.add(&wide.apply_matrix(&embed_block(m, m0, m1), Codomain::Full)?)?;
    }
    Ok(field)
}

/// Start an orbit exactly on the graph u1 = Phi(u0, t) and confirm the
/// certified picture three ways: the original orbit drifts off the graph no
/// further than the remainder budget allows, the remainder-free transformed
/// system keeps the graph exactly, and the transformed orbit pushed through
/// the change of variables retraces the original one.
pub fn manifold_drift(
    spec: &SystemSpec,
    run: &UncouplingRun,
    u0_first: &DVector<f64>,
    t_end: f64,
    steps: usize,
) -> Result<DriftReport> {
    let m0 = spec.m0;
    let m1 = spec.m1;
    let m = spec.m();
    if u0_first.len() != m0 {
        return Err(Error::DimensionMismatch {
            context: "drift start",
            left: u0_first.len(),
            right: m0,
        });
    }
    let l = spec.l_full();
    let phi0 = run.phi.eval(u0_first, 0.0)?;
    let mut u_init = DVector::<f64>::zeros(m);
    u_init.rows_mut(0, m0).copy_from(u0_first);
    u_init.rows_mut(m0, m1).copy_from(&phi0);

    let orbit = integrate(&l, &spec.v, &u_init, 0.0, t_end, steps)?;
    let mut sup_drift = 0.0f64;
    for (t, u) in orbit.times.iter().zip(&orbit.states) {
        let head = u.rows(0, m0).into_owned();
        let graph = run.phi.eval(&head, *t)?;
        sup_drift = sup_drift.max((u.rows(m0, m1) - graph).norm());
    }
    let allowed_drift = tol::DRIFT_FACTOR * t_end * run.certified_bound;

    let mut v_init = DVector::<f64>::zeros(m);
    v_init.rows_mut(0, m0).copy_from(u0_first);

    let zeroed = integrate(&l, &transformed_field(spec, run, false)?, &v_init, 0.0, t_end, steps)?;
    let zeroed_drift = zeroed
        .states
        .iter()
        .map(|v| v.rows(m0, m1).norm())
        .fold(0.0, f64::max);

    let moved = integrate(&l, &transformed_field(spec, run, true)?, &v_init, 0.0, t_end, steps)?;
    let mut pushforward_defect = 0.0f64;
    for ((t, v), u) in moved.times.iter().zip(&moved.states).zip(&orbit.states) {
        let head = v.rows(0, m0).into_owned();
        let graph = run.phi.eval(&head, *t)?;
        let mut pushed = v.clone();
        for i in 0..m1 {
            pushed[m0 + i] += graph[i];
        }
        pushforward_defect =
            pushforward_defect.max((pushed - u).norm() / (1.0 + u.norm()));
    }

    let ok_drift = sup_drift <= allowed_drift;
    let ok_zeroed = zeroed_drift <= tol::ZEROED_DRIFT;
    let ok_pushforward = pushforward_defect <= tol::PUSHFORWARD;
    Ok(DriftReport {
        sup_drift,
        allowed_drift,
        ok_drift,
        zeroed_drift,
        ok_zeroed,
        pushforward_defect,
        ok_pushforward,
        t_end,
        steps,
        ok: ok_drift && ok_zeroed && ok_pushforward,
    })
}

// ---------------------------------------------------------------------------
// Radius sweep
// ---------------------------------------------------------------------------

/// One row of a radius sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub delta: f64,
    pub p: u32,
    pub p_opt: u32,
    pub certified_bound: f64,
    pub sampled_sup: f64,
    pub a_priori_bound: f64,
    pub a_priori_applicable: bool,
}

/// Result of a radius sweep.
#[derive(Debug, Clone)]
pub struct SweepReport {
    /// Rows ordered by decreasing radius.
    pub rows: Vec<SweepRow>,
    /// Certified bound strictly decreases with the radius.
    pub strictly_decreasing: bool,
    /// Least-squares slope of ln(certified bound) against delta^(-b).
    pub log_slope: Option<f64>,
    /// Slope at most -omega/2.
    pub slope_ok: bool,
    pub omega: f64,
    pub b: f64,
}

/// Run the whole uncoupling per radius (in parallel when `threads` says so)
/// and check the certified bound's decay against the certified rate.
pub fn delta_sweep(
    spec: &SystemSpec,
    deltas: &[f64],
    base: &RunOptions,
    threads: Option<usize>,
) -> Result<SweepReport> {
    if deltas.len() < 2 {
        return Err(Error::InvalidArgument(
            "a sweep needs at least two radii".into(),
        ));
    }
    let mut sorted: Vec<f64> = deltas.to_vec();
    if sorted.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument("sweep radii must be positive".into()));
    }
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite radii"));
    sorted.dedup();

    let one = |delta: f64| -> Result<(SweepRow, f64, f64)> {
        let opts = RunOptions {
            delta,
            ..base.clone()
        };
        let run = run_uncoupling(spec, &opts)?;
        Ok((
            SweepRow {
                delta,
                p: run.p,
                p_opt: run.p_opt,
                certified_bound: run.certified_bound,
                sampled_sup: run.sampled_sup,
                a_priori_bound: run.a_priori_bound,
                a_priori_applicable: run.a_priori_applicable,
            },
            run.constants.omega_decay,
            run.constants.b,
        ))
    };

    let results: Vec<Result<(SweepRow, f64, f64)>> = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| sorted.par_iter().map(|d| one(*d)).collect()),
        None => sorted.par_iter().map(|d| one(*d)).collect(),
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut omega = 0.0;
    let mut b = 0.0;
    for r in results {
        let (row, w, bb) = r?;
        omega = w;
        b = bb;
        rows.push(row);
    }

    let strictly_decreasing = rows
        .windows(2)
        .all(|w| w[1].certified_bound < w[0].certified_bound);

    // ln(bound) against x = delta^(-b): certified decay predicts slope
    // -omega; at least half of it must show.
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.certified_bound > 0.0)
        .map(|r| (r.delta.powf(-b), r.certified_bound.ln()))
        .collect();
    let log_slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() > 0.0 {
            Some((n * sxy - sx * sy) / denom)
        } else {
            None
        }
    } else {
        None
    };
    let slope_ok = log_slope.map(|s| s <= -0.5 * omega).unwrap_or(false);

    Ok(SweepReport {
        rows,
        strictly_decreasing,
        log_slope,
        slope_ok,
        omega,
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalform::run_normal_form;

    fn scalar_field(coeff: f64) -> PolyMap {
        use crate::algebra::MultiIndex;
        let period = std::f64::consts::TAU;
        let mut v = PolyMap::zero(1, 1, Codomain::Full, period);
        let mut q = HomoPoly::zero(1, 2, 1, Codomain::Full, period);
        q.add_term(
            MultiIndex::new(vec![2]),
            TrigPoly::constant(period, nalgebra::dvector![coeff]),
        )
        .unwrap();
        v.set_part(q).unwrap();
        v
    }

    #[test]
    fn rk4_matches_closed_form_at_fourth_order() {
        // du/dt = -u + u^2 has the closed form
        // u(t) = 1 / (1 + (1/u0 - 1) e^t).
        let l = DMatrix::from_element(1, 1, -1.0);
        let v = scalar_field(1.0);
        let u0 = nalgebra::dvector![0.1];
        let exact = |t: f64| 1.0 / (1.0 + (1.0 / 0.1 - 1.0) * t.exp());

        let err = |steps: usize| -> f64 {
            let traj = integrate(&l, &v, &u0, 0.0, 1.0, steps).unwrap();
            (traj.states.last().unwrap()[0] - exact(1.0)).abs()
        };
        let e1 = err(50);
        let e2 = err(100);
        let ratio = e1 / e2;
        assert!(
            (10.0..=24.0).contains(&ratio),
            "fourth order means halving the step divides the error by about 16, got {ratio}"
        );
    }

    #[test]
    fn rk4_reports_blow_up() {
        // Above the unstable equilibrium the same field blows up in finite
        // time.
        let l = DMatrix::from_element(1, 1, -1.0);
        let v = scalar_field(1.0);
        let u0 = nalgebra::dvector![2.0];
        let err = integrate(&l, &v, &u0, 0.0, 3.0, 3000).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn oracle_agrees_on_the_coupled_fixture() {
        let spec = SystemSpec::basic();
        let opts = RunOptions {
            delta: 0.1,
            p_override: Some(3),
            samples: 50,
            ..RunOptions::default()
        };
        let run = run_uncoupling(&spec, &opts).unwrap();
        let report = oracle_uncoupling(&spec, &run).unwrap();
        assert!(report.ok, "{report:?}");
        assert!(report.phi_gap <= tol::ORACLE_GAP);
        assert!(report.unknowns > 0);
    }

    #[test]
    fn oracle_agrees_on_the_rotation_fixture() {
        let spec = SystemSpec::hopf();
        let opts = RunOptions {
            delta: 0.05,
            p_override: Some(3),
            samples: 50,
            ..RunOptions::default()
        };
        let run = run_normal_form(&spec, &opts).unwrap();
        let report = oracle_normal_form(&spec, &run).unwrap();
        assert!(report.kernel_match, "rank deficiency must match the divisor count");
        assert!(report.phi_gap <= tol::ORACLE_GAP, "phi gap {}", report.phi_gap);
        assert!(
            report.resonant_gap <= tol::ORACLE_GAP,
            "resonant gap {}",
            report.resonant_gap
        );
        assert!(report.ok);
    }

    #[test]
    fn orbit_stays_near_the_graph() {
        let spec = SystemSpec::basic();
        let opts = RunOptions {
            delta: 0.1,
            samples: 50,
            ..RunOptions::default()
        };
        let run = run_uncoupling(&spec, &opts).unwrap();
        let report = manifold_drift(&spec, &run, &nalgebra::dvector![0.05], 3.0, 1500).unwrap();
        assert!(report.ok_drift, "drift {} vs {}", report.sup_drift, report.allowed_drift);
        assert_eq!(report.zeroed_drift, 0.0, "factorized forcing keeps the graph exactly");
        assert!(report.ok_pushforward, "pushforward {}", report.pushforward_defect);
        assert!(report.ok);
    }

    #[test]
    fn sweep_decays_at_the_certified_rate() {
        let spec = SystemSpec::basic();
        let base = RunOptions {
            samples: 50,
            ..RunOptions::default()
        };
        let report = delta_sweep(&spec, &[0.1, 0.05, 0.025], &base, Some(2)).unwrap();
        assert!(report.strictly_decreasing);
        assert!(report.slope_ok, "slope {:?} vs -omega/2 = {}", report.log_slope, -0.5 * report.omega);
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows[0].delta > report.rows[2].delta);
    }
}
