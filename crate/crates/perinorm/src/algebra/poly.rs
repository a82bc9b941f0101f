use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::multi_index::{enumerate_indices, MultiIndex};
use super::trig::TrigPoly;
use crate::error::{Error, Result};

/// Degree bound meaning "no truncation".
pub const DEG_INF: u32 = u32::MAX;

/// Which block of the phase space a polynomial maps into. The tag is
/// bookkeeping for readers and reports; arithmetic is carried by `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Codomain {
    /// The uncoupled block (first m0 coordinates).
    E0,
    /// The block being slaved (last m1 coordinates).
    E1,
    /// The whole space.
    Full,
}

/// Homogeneous polynomial of fixed degree in `vars` variables with
/// trigonometric-polynomial coefficients: f(X, t) = sum_alpha f_alpha(t) X^alpha
/// with |alpha| = degree and each f_alpha a vector of dimension `dim`.
#[derive(Debug, Clone)]
pub struct HomoPoly {
    vars: usize,
    degree: u32,
    dim: usize,
    codomain: Codomain,
    period: f64,
    coeffs: BTreeMap<MultiIndex, TrigPoly>,
}

impl HomoPoly {
    pub fn zero(vars: usize, degree: u32, dim: usize, codomain: Codomain, period: f64) -> Self {
        HomoPoly {
            vars,
            degree,
            dim,
            codomain,
            period,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codomain(&self) -> Codomain {
        self.codomain
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &TrigPoly)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Option<&TrigPoly> {
        self.coeffs.get(alpha)
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Accumulate `value` into the coefficient of X^alpha.
    pub fn add_term(&mut self, alpha: MultiIndex, value: TrigPoly) -> Result<()> {
        if alpha.len() != self.vars {
            return Err(Error::DimensionMismatch {
                context: "term index length",
                left: alpha.len(),
                right: self.vars,
            });
        }
        if alpha.degree() != self.degree {
            return Err(Error::InvalidArgument(format!(
                "term degree {} does not match polynomial degree {}",
                alpha.degree(),
                self.degree
            )));
        }
        if value.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "term coefficient dimension",
                left: value.dim(),
                right: self.dim,
            });
        }
        if value.period() != self.period {
            return Err(Error::PeriodMismatch {
                left: value.period(),
                right: self.period,
            });
        }
        match self.coeffs.get_mut(&alpha) {
            Some(existing) => {
                let sum = existing.add(&value)?;
                if sum.is_zero() {
                    self.coeffs.remove(&alpha);
                } else {
                    *existing = sum;
                }
            }
            None => {
                if !value.is_zero() {
                    self.coeffs.insert(alpha, value);
                }
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &HomoPoly) -> Result<HomoPoly> {
        let mut out = self.clone();
        for (alpha, v) in other.terms() {
            out.add_term(alpha.clone(), v.clone())?;
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> HomoPoly {
        let mut out = HomoPoly::zero(self.vars, self.degree, self.dim, self.codomain, self.period);
        if factor.norm_sqr() == 0.0 {
            return out;
        }
        for (alpha, v) in self.terms() {
            out.coeffs.insert(alpha.clone(), v.scale(factor));
        }
        out
    }

    pub fn sub(&self, other: &HomoPoly) -> Result<HomoPoly> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Product of homogeneous polynomials; degrees add, coefficient shapes
    /// follow the trig-poly broadcast rules (scalar times vector allowed).
    pub fn mul(&self, other: &HomoPoly) -> Result<HomoPoly> {
        if self.vars != other.vars {
            return Err(Error::DimensionMismatch {
                context: "poly mul vars",
                left: self.vars,
                right: other.vars,
            });
        }
        let dim = if self.dim == other.dim {
            self.dim
        } else if self.dim == 1 {
            other.dim
        } else if other.dim == 1 {
            self.dim
        } else {
            return Err(Error::DimensionMismatch {
                context: "poly mul dims",
                left: self.dim,
                right: other.dim,
            });
        };
        let codomain = if self.dim == 1 { other.codomain } else { self.codomain };
        let mut out = HomoPoly::zero(
            self.vars,
            self.degree + other.degree,
            dim,
            codomain,
            self.period,
        );
        for (a, va) in self.terms() {
            for (b, vb) in other.terms() {
                out.add_term(a.add(b)?, va.mul(vb)?)?;
            }
        }
        Ok(out)
    }

    /// Apply a constant matrix to every coefficient vector.
    pub fn apply_matrix(&self, m: &DMatrix<Complex64>, codomain: Codomain) -> Result<HomoPoly> {
        let mut out = HomoPoly::zero(self.vars, self.degree, m.nrows(), codomain, self.period);
        for (alpha, v) in self.terms() {
            out.add_term(alpha.clone(), v.apply_matrix(m)?)?;
        }
        Ok(out)
    }

    pub fn component(&self, i: usize) -> HomoPoly {
        let mut out = HomoPoly::zero(self.vars, self.degree, 1, Codomain::Full, self.period);
        for (alpha, v) in self.terms() {
            let c = v.component(i);
            if !c.is_zero() {
                out.coeffs.insert(alpha.clone(), c);
            }
        }
        out
    }

    /// Keep a contiguous range of output components.
    pub fn slice_components(&self, start: usize, len: usize, codomain: Codomain) -> HomoPoly {
        let rows: Vec<usize> = (start..start + len).collect();
        let mut out = HomoPoly::zero(self.vars, self.degree, len, codomain, self.period);
        for (alpha, v) in self.terms() {
            let mut modes = Vec::new();
            for (k, coeff) in v.modes() {
                modes.push((k, DVector::from_iterator(len, rows.iter().map(|&r| coeff[r]))));
            }
            if let Ok(t) = TrigPoly::from_modes(self.period, len, modes, false) {
                if !t.is_zero() {
                    let mut t = t;
                    if v.is_real() {
                        // component selection of a real vector stays real
                        let _ = t.assert_real(crate::tol::REAL_OP);
                    }
                    out.coeffs.insert(alpha.clone(), t);
                }
            }
        }
        out
    }

    pub fn dt(&self) -> HomoPoly {
        let mut out = HomoPoly::zero(self.vars, self.degree, self.dim, self.codomain, self.period);
        for (alpha, v) in self.terms() {
            let d = v.dt();
            if !d.is_zero() {
                out.coeffs.insert(alpha.clone(), d);
            }
        }
        out
    }

    /// Largest coefficient magnitude over all terms and modes.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.values().map(|v| v.max_coeff()).fold(0.0, f64::max)
    }

    pub fn max_mode(&self) -> i64 {
        self.coeffs.values().map(|v| v.max_mode()).max().unwrap_or(0)
    }

    /// Widen the domain: insert `extra` fresh variables (exponent 0) at
    /// position `at`.
    pub fn widen_domain(&self, at: usize, extra: usize) -> HomoPoly {
        let mut out = HomoPoly::zero(self.vars + extra, self.degree, self.dim, self.codomain, self.period);
        for (alpha, v) in self.terms() {
            out.coeffs.insert(alpha.widen(at, extra), v.clone());
        }
        out
    }

    /// Evaluate at a numeric point, leaving time symbolic. Exact in the
    /// Fourier data: the result is still a trigonometric polynomial.
    pub fn eval_point(&self, x: &DVector<f64>) -> Result<TrigPoly> {
        if x.len() != self.vars {
            return Err(Error::DimensionMismatch {
                context: "eval point",
                left: x.len(),
                right: self.vars,
            });
        }
        let mut acc = TrigPoly::zero(self.period, self.dim);
        for (alpha, v) in self.terms() {
            let mut mono = 1.0;
            for (j, &e) in alpha.exponents().iter().enumerate() {
                mono *= x[j].powi(e as i32);
            }
            acc = acc.add(&v.scale(Complex64::new(mono, 0.0)))?;
        }
        Ok(acc)
    }

    /// Evaluate with trigonometric-polynomial arguments substituted for the
    /// variables. Used to check multilinear bounds without leaving exact
    /// Fourier arithmetic.
    pub fn eval_trig_args(&self, args: &[TrigPoly]) -> Result<TrigPoly> {
        if args.len() != self.vars {
            return Err(Error::DimensionMismatch {
                context: "eval trig args",
                left: args.len(),
                right: self.vars,
            });
        }
        let mut acc = TrigPoly::zero(self.period, self.dim);
        for (alpha, v) in self.terms() {
            let mut mono = TrigPoly::constant_scalar(self.period, 1.0);
            for (j, &e) in alpha.exponents().iter().enumerate() {
                for _ in 0..e {
                    mono = mono.mul(&args[j])?;
                }
            }
            acc = acc.add(&v.mul(&mono)?)?;
        }
        Ok(acc)
    }

    /// Max conjugate-symmetry defect over coefficients.
    pub fn symmetry_defect(&self) -> f64 {
        self.coeffs
            .values()
            .map(|v| v.symmetry_defect())
            .fold(0.0, f64::max)
    }

    pub fn assert_real(&mut self, rel: f64) -> Result<()> {
        let mut coeffs = std::mem::take(&mut self.coeffs);
        for v in coeffs.values_mut() {
            v.assert_real(rel)?;
        }
        coeffs.retain(|_, v| !v.is_zero());
        self.coeffs = coeffs;
        Ok(())
    }

    pub fn clear_real_flags(&mut self) {
        for v in self.coeffs.values_mut() {
            v.clear_real_flag();
        }
    }
}

/// Graded polynomial map: a finite collection of homogeneous parts indexed by
/// degree. Missing degrees are zero.
#[derive(Debug, Clone)]
pub struct PolyMap {
    vars: usize,
    dim: usize,
    codomain: Codomain,
    period: f64,
    parts: BTreeMap<u32, HomoPoly>,
}

impl PolyMap {
    pub fn zero(vars: usize, dim: usize, codomain: Codomain, period: f64) -> Self {
        PolyMap {
            vars,
            dim,
            codomain,
            period,
            parts: BTreeMap::new(),
        }
    }

    /// The identity embedding X -> X as a degree-1 part.
    pub fn identity(vars: usize, period: f64) -> Self {
        let mut part = HomoPoly::zero(vars, 1, vars, Codomain::Full, period);
        for j in 0..vars {
            let mut e = DVector::from_element(vars, 0.0);
            e[j] = 1.0;
            part.add_term(MultiIndex::unit(vars, j), TrigPoly::constant(period, e))
                .expect("identity term");
        }
        let mut map = PolyMap::zero(vars, vars, Codomain::Full, period);
        map.set_part(part).expect("identity part");
        map
    }

    /// A linear map X -> M X as a degree-1 polynomial (column j of M is the
    /// coefficient of X_j).
    pub fn linear(m: &DMatrix<Complex64>, period: f64) -> Self {
        let vars = m.ncols();
        let dim = m.nrows();
        let mut part = HomoPoly::zero(vars, 1, dim, Codomain::Full, period);
        for j in 0..vars {
            let col: DVector<Complex64> = m.column(j).into_owned();
            let t = TrigPoly::from_modes(period, dim, vec![(0i64, col)], false)
                .expect("linear coefficient");
            if !t.is_zero() {
                part.add_term(MultiIndex::unit(vars, j), t).expect("linear term");
            }
        }
        let mut map = PolyMap::zero(vars, dim, Codomain::Full, period);
        map.set_part(part).expect("linear part");
        map
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codomain(&self) -> Codomain {
        self.codomain
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn lo(&self) -> Option<u32> {
        self.parts.keys().next().copied()
    }

    pub fn hi(&self) -> Option<u32> {
        self.parts.keys().next_back().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn parts(&self) -> impl Iterator<Item = (u32, &HomoPoly)> {
        self.parts.iter().map(|(d, p)| (*d, p))
    }

    pub fn part(&self, degree: u32) -> Option<&HomoPoly> {
        self.parts.get(&degree)
    }

    /// Install a homogeneous part at its own degree, replacing any existing one.
    pub fn set_part(&mut self, part: HomoPoly) -> Result<()> {
        if part.vars() != self.vars || part.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "poly map part shape",
                left: part.vars() * 1000 + part.dim(),
                right: self.vars * 1000 + self.dim,
            });
        }
        if part.period() != self.period {
            return Err(Error::PeriodMismatch {
                left: part.period(),
                right: self.period,
            });
        }
        if part.is_zero() {
            self.parts.remove(&part.degree());
        } else {
            self.parts.insert(part.degree(), part);
        }
        Ok(())
    }

    pub fn add_part(&mut self, part: &HomoPoly) -> Result<()> {
        match self.parts.get(&part.degree()) {
            Some(existing) => {
                let sum = existing.add(part)?;
                self.set_part(sum)
            }
            None => self.set_part(part.clone()),
        }
    }

    pub fn add(&self, other: &PolyMap) -> Result<PolyMap> {
        let mut out = self.clone();
        for (_, p) in other.parts() {
            out.add_part(p)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &PolyMap) -> Result<PolyMap> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> PolyMap {
        let mut out = PolyMap::zero(self.vars, self.dim, self.codomain, self.period);
        if factor.norm_sqr() == 0.0 {
            return out;
        }
        for (d, p) in self.parts() {
            out.parts.insert(d, p.scale(factor));
        }
        out
    }

    /// Degrees lo..=hi of the map (projection onto a degree window). Use
    /// [`DEG_INF`] for an unbounded upper end.
    pub fn project(&self, lo: u32, hi: u32) -> Result<PolyMap> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "projection window lo {lo} > hi {hi}"
            )));
        }
        let mut out = PolyMap::zero(self.vars, self.dim, self.codomain, self.period);
        for (d, p) in self.parts() {
            if d >= lo && d <= hi {
                out.parts.insert(d, p.clone());
            }
        }
        Ok(out)
    }

    pub fn apply_matrix(&self, m: &DMatrix<Complex64>, codomain: Codomain) -> Result<PolyMap> {
        let mut out = PolyMap::zero(self.vars, m.nrows(), codomain, self.period);
        for (_, p) in self.parts() {
            out.set_part(p.apply_matrix(m, codomain)?)?;
        }
        Ok(out)
    }

    pub fn slice_components(&self, start: usize, len: usize, codomain: Codomain) -> PolyMap {
        let mut out = PolyMap::zero(self.vars, len, codomain, self.period);
        for (_, p) in self.parts() {
            let sliced = p.slice_components(start, len, codomain);
            out.set_part(sliced).expect("slice part");
        }
        out
    }

    pub fn component(&self, i: usize) -> PolyMap {
        let mut out = PolyMap::zero(self.vars, 1, Codomain::Full, self.period);
        for (_, p) in self.parts() {
            out.set_part(p.component(i)).expect("component part");
        }
        out
    }

    pub fn dt(&self) -> PolyMap {
        let mut out = PolyMap::zero(self.vars, self.dim, self.codomain, self.period);
        for (_, p) in self.parts() {
            out.set_part(p.dt()).expect("dt part");
        }
        out
    }

    pub fn widen_domain(&self, at: usize, extra: usize) -> PolyMap {
        let mut out = PolyMap::zero(self.vars + extra, self.dim, self.codomain, self.period);
        for (_, p) in self.parts() {
            out.set_part(p.widen_domain(at, extra)).expect("widen part");
        }
        out
    }

    pub fn max_coeff(&self) -> f64 {
        self.parts.values().map(|p| p.max_coeff()).fold(0.0, f64::max)
    }

    pub fn max_mode(&self) -> i64 {
        self.parts.values().map(|p| p.max_mode()).max().unwrap_or(0)
    }

    pub fn max_degree_bound(&self) -> u32 {
        self.hi().unwrap_or(0)
    }

    pub fn assert_real(&mut self, rel: f64) -> Result<()> {
        let mut parts = std::mem::take(&mut self.parts);
        for p in parts.values_mut() {
            p.assert_real(rel)?;
        }
        parts.retain(|_, p| !p.is_zero());
        self.parts = parts;
        Ok(())
    }

    pub fn clear_real_flags(&mut self) {
        for p in self.parts.values_mut() {
            p.clear_real_flags();
        }
    }

    /// Evaluate at a numeric point, leaving time symbolic.
    pub fn eval_point(&self, x: &DVector<f64>) -> Result<TrigPoly> {
        let mut acc = TrigPoly::zero(self.period, self.dim);
        for (_, p) in self.parts() {
            acc = acc.add(&p.eval_point(x)?)?;
        }
        Ok(acc)
    }

    /// Evaluate at a numeric point and time.
    pub fn eval(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        Ok(self.eval_point(x)?.eval_real(t))
    }

    pub fn eval_trig_args(&self, args: &[TrigPoly]) -> Result<TrigPoly> {
        let mut acc = TrigPoly::zero(self.period, self.dim);
        for (_, p) in self.parts() {
            acc = acc.add(&p.eval_trig_args(args)?)?;
        }
        Ok(acc)
    }

    /// Total number of stored (index, mode) coefficients.
    pub fn coeff_count(&self) -> usize {
        self.parts
            .values()
            .map(|p| p.terms().map(|(_, v)| v.support().len()).sum::<usize>())
            .sum()
    }
}

/// Composition (outer ∘ inner) truncated at `max_deg`. `inner` must have no
/// degree-0 part, so the composition of graded maps is again graded and the
/// degree-n output only involves inner parts of degree <= n - (q - 1) for a
/// degree-q outer monomial.
pub fn compose(outer: &PolyMap, inner: &PolyMap, max_deg: u32) -> Result<PolyMap> {
    if let Some(lo) = inner.lo() {
        if lo == 0 {
            return Err(Error::DegreeZeroPart);
        }
    }
    if outer.vars() != inner.dim() {
        return Err(Error::DimensionMismatch {
            context: "compose arity",
            left: outer.vars(),
            right: inner.dim(),
        });
    }
    if outer.period() != inner.period() {
        return Err(Error::PeriodMismatch {
            left: outer.period(),
            right: inner.period(),
        });
    }
    let period = outer.period();
    let vars = inner.vars();
    let mut out = PolyMap::zero(vars, outer.dim(), outer.codomain(), period);

    // Scalar components of the inner map and a lazily grown power cache.
    let comps: Vec<PolyMap> = (0..inner.dim()).map(|j| inner.component(j)).collect();
    let unit = {
        let mut p = HomoPoly::zero(vars, 0, 1, Codomain::Full, period);
        p.add_term(MultiIndex::zeros(vars), TrigPoly::constant_scalar(period, 1.0))?;
        let mut m = PolyMap::zero(vars, 1, Codomain::Full, period);
        m.set_part(p)?;
        m
    };
    let mut powers: Vec<Vec<PolyMap>> = comps.iter().map(|_| vec![unit.clone()]).collect();

    for (_, outer_part) in outer.parts() {
        for (beta, c_beta) in outer_part.terms() {
            // Product over components of inner^beta, truncated as we go.
            let mut term = unit.clone();
            let mut dead = false;
            for (j, &e) in beta.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[j].len() <= e as usize {
                    let prev = powers[j].last().unwrap();
                    let next = mul_truncated(prev, &comps[j], max_deg)?;
                    powers[j].push(next);
                }
                term = mul_truncated(&term, &powers[j][e as usize], max_deg)?;
                if term.is_zero() {
                    dead = true;
                    break;
                }
            }
            if dead {
                continue;
            }
            for (_, term_part) in term.parts() {
                for (gamma, s) in term_part.terms() {
                    let mut hp = HomoPoly::zero(
                        vars,
                        term_part.degree(),
                        outer.dim(),
                        outer.codomain(),
                        period,
                    );
                    hp.add_term(gamma.clone(), s.mul(c_beta)?)?;
                    out.add_part(&hp)?;
                }
            }
        }
    }
    Ok(out)
}

/// Product of scalar graded maps, dropping degrees above `max_deg`.
fn mul_truncated(a: &PolyMap, b: &PolyMap, max_deg: u32) -> Result<PolyMap> {
    let mut out = PolyMap::zero(a.vars(), 1, Codomain::Full, a.period());
    for (da, pa) in a.parts() {
        for (db, pb) in b.parts() {
            if da.saturating_add(db) > max_deg {
                continue;
            }
            out.add_part(&pa.mul(pb)?)?;
        }
    }
    Ok(out)
}

/// Directional derivative D_X phi . g: differentiate the homogeneous part
/// `phi` along the vector field `g` (whose dimension must match phi's domain).
/// Degrees: deg(phi) - 1 + deg(g).
pub fn directional_derivative(phi: &HomoPoly, g: &HomoPoly) -> Result<HomoPoly> {
    if phi.degree() == 0 {
        return Err(Error::InvalidArgument(
            "directional derivative of a degree-0 part".into(),
        ));
    }
    if g.dim() != phi.vars() {
        return Err(Error::DimensionMismatch {
            context: "directional derivative field dimension",
            left: g.dim(),
            right: phi.vars(),
        });
    }
    if g.vars() != phi.vars() {
        return Err(Error::DimensionMismatch {
            context: "directional derivative domain",
            left: g.vars(),
            right: phi.vars(),
        });
    }
    let mut out = HomoPoly::zero(
        phi.vars(),
        phi.degree() - 1 + g.degree(),
        phi.dim(),
        phi.codomain(),
        phi.period(),
    );
    for (alpha, phi_a) in phi.terms() {
        for j in 0..phi.vars() {
            let e = alpha.get(j);
            if e == 0 {
                continue;
            }
            let lowered = alpha.sub_unit(j).expect("positive exponent");
            for (beta, g_b) in g.terms() {
                let target = lowered.add(beta)?;
                let scaled = phi_a
                    .scale(Complex64::new(e as f64, 0.0))
                    .mul(&g_b.component(j))?;
                out.add_term(target, scaled)?;
            }
        }
    }
    Ok(out)
}

/// Sum of directional derivatives of all parts of `phi` along all parts of
/// `g`, truncated at `max_deg`. Parts of degree 0 in `phi` are not allowed.
pub fn directional_derivative_map(phi: &PolyMap, g: &PolyMap, max_deg: u32) -> Result<PolyMap> {
    let mut out = PolyMap::zero(phi.vars(), phi.dim(), phi.codomain(), phi.period());
    for (dp, phi_part) in phi.parts() {
        for (dg, g_part) in g.parts() {
            if (dp - 1).saturating_add(dg) > max_deg {
                continue;
            }
            out.add_part(&directional_derivative(phi_part, g_part)?)?;
        }
    }
    Ok(out)
}

/// Dense coefficient listing for a degree: all indices of that degree in
/// lexicographic order, including absent (zero) ones.
pub fn dense_indices(degree: u32, vars: usize) -> Vec<MultiIndex> {
    enumerate_indices(degree, vars)
}
