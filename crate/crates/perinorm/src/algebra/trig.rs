use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

/// Vector-valued trigonometric polynomial of one period: a finite map from
/// Fourier mode k to a complex coefficient vector. Everything downstream
/// (norms, solves, remainders) stays exact because the mode support is finite;
/// no quadrature appears anywhere in the crate.
///
/// `real == true` asserts conjugate symmetry f(-k) = conj(f(k)), which is the
/// coefficient-level statement that the function is real-valued. Operations
/// that preserve realness re-canonicalize the symmetry exactly so that the
/// flag never decays into "approximately real".
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    period: f64,
    dim: usize,
    modes: BTreeMap<i64, DVector<Complex64>>,
    real: bool,
}

impl TrigPoly {
    pub fn zero(period: f64, dim: usize) -> Self {
        TrigPoly {
            period,
            dim,
            modes: BTreeMap::new(),
            real: true,
        }
    }

    /// Time-independent value (mode 0 only).
    pub fn constant(period: f64, value: DVector<f64>) -> Self {
        let dim = value.len();
        let v: DVector<Complex64> = value.map(|x| Complex64::new(x, 0.0));
        let mut p = TrigPoly {
            period,
            dim,
            modes: BTreeMap::new(),
            real: true,
        };
        if v.iter().any(|c| c.norm_sqr() != 0.0) {
            p.modes.insert(0, v);
        }
        p
    }

    pub fn constant_scalar(period: f64, value: f64) -> Self {
        Self::constant(period, DVector::from_element(1, value))
    }

    /// amplitude * cos(2 pi h t / T), scalar valued.
    pub fn cosine(period: f64, harmonic: i64, amplitude: f64) -> Self {
        let mut p = TrigPoly::zero(period, 1);
        if amplitude != 0.0 {
            let half = Complex64::new(amplitude / 2.0, 0.0);
            p.add_mode(harmonic, DVector::from_element(1, half));
            p.add_mode(-harmonic, DVector::from_element(1, half));
        }
        p
    }

    /// amplitude * sin(2 pi h t / T), scalar valued.
    pub fn sine(period: f64, harmonic: i64, amplitude: f64) -> Self {
        let mut p = TrigPoly::zero(period, 1);
        if amplitude != 0.0 {
            p.add_mode(
                harmonic,
                DVector::from_element(1, Complex64::new(0.0, -amplitude / 2.0)),
            );
            p.add_mode(
                -harmonic,
                DVector::from_element(1, Complex64::new(0.0, amplitude / 2.0)),
            );
        }
        p
    }

    /// Build from explicit modes. With `real == true` the constructor checks
    /// conjugate symmetry against [`tol::REAL_OP`] and then canonicalizes it.
    pub fn from_modes<I>(period: f64, dim: usize, modes: I, real: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, DVector<Complex64>)>,
    {
        let mut p = TrigPoly {
            period,
            dim,
            modes: BTreeMap::new(),
            real: false,
        };
        for (k, v) in modes {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "trig mode coefficient",
                    left: v.len(),
                    right: dim,
                });
            }
            p.add_mode(k, v);
        }
        if real {
            p.assert_real(tol::REAL_OP)?;
        }
        Ok(p)
    }

    fn add_mode(&mut self, k: i64, v: DVector<Complex64>) {
        if v.iter().all(|c| c.norm_sqr() == 0.0) {
            return;
        }
        match self.modes.get_mut(&k) {
            Some(existing) => {
                *existing += v;
                if existing.iter().all(|c| c.norm_sqr() == 0.0) {
                    self.modes.remove(&k);
                }
            }
            None => {
                self.modes.insert(k, v);
            }
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, &DVector<Complex64>)> {
        self.modes.iter().map(|(k, v)| (*k, v))
    }

    pub fn mode(&self, k: i64) -> Option<&DVector<Complex64>> {
        self.modes.get(&k)
    }

    pub fn support(&self) -> Vec<i64> {
        self.modes.keys().copied().collect()
    }

    pub fn max_mode(&self) -> i64 {
        self.modes.keys().map(|k| k.abs()).max().unwrap_or(0)
    }

    /// Largest coefficient magnitude over all modes and components.
    pub fn max_coeff(&self) -> f64 {
        self.modes
            .values()
            .flat_map(|v| v.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    fn check_period(&self, other: &TrigPoly) -> Result<()> {
        if self.period != other.period {
            return Err(Error::PeriodMismatch {
                left: self.period,
                right: other.period,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.check_period(other)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "trig add",
                left: self.dim,
                right: other.dim,
            });
        }
        let mut out = self.clone();
        out.real = self.real && other.real;
        for (k, v) in &other.modes {
            out.add_mode(*k, v.clone());
        }
        if out.real {
            out.canonicalize_real();
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> TrigPoly {
        let mut out = TrigPoly {
            period: self.period,
            dim: self.dim,
            modes: BTreeMap::new(),
            real: self.real && factor.im == 0.0,
        };
        if factor.norm_sqr() == 0.0 {
            return out;
        }
        for (k, v) in &self.modes {
            out.modes.insert(*k, v * factor);
        }
        out
    }

    /// Pointwise product. Modes convolve: supp(fg) is contained in the
    /// Minkowski sum supp(f) + supp(g). Shapes: equal dims multiply
    /// componentwise, and a scalar factor broadcasts over a vector one.
    pub fn mul(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.check_period(other)?;
        let dim = if self.dim == other.dim {
            self.dim
        } else if self.dim == 1 {
            other.dim
        } else if other.dim == 1 {
            self.dim
        } else {
            return Err(Error::DimensionMismatch {
                context: "trig mul",
                left: self.dim,
                right: other.dim,
            });
        };
        let mut out = TrigPoly {
            period: self.period,
            dim,
            modes: BTreeMap::new(),
            real: self.real && other.real,
        };
        for (ka, va) in &self.modes {
            for (kb, vb) in &other.modes {
                let prod = if self.dim == other.dim {
                    va.component_mul(vb)
                } else if self.dim == 1 {
                    vb * va[0]
                } else {
                    va * vb[0]
                };
                out.add_mode(ka + kb, prod);
            }
        }
        if out.real {
            out.canonicalize_real();
        }
        Ok(out)
    }

    /// Time derivative: mode k picks up the factor i k 2 pi / T.
    pub fn dt(&self) -> TrigPoly {
        let omega = 2.0 * std::f64::consts::PI / self.period;
        let mut out = TrigPoly {
            period: self.period,
            dim: self.dim,
            modes: BTreeMap::new(),
            real: self.real,
        };
        for (k, v) in &self.modes {
            if *k == 0 {
                continue;
            }
            let factor = Complex64::new(0.0, *k as f64 * omega);
            out.modes.insert(*k, v * factor);
        }
        if out.real {
            out.canonicalize_real();
        }
        out
    }

    /// Apply a constant matrix to every mode coefficient (codomain change).
    pub fn apply_matrix(&self, m: &nalgebra::DMatrix<Complex64>) -> Result<TrigPoly> {
        if m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "matrix apply",
                left: m.ncols(),
                right: self.dim,
            });
        }
        let real = self.real && m.iter().all(|c| c.im == 0.0);
        let mut out = TrigPoly {
            period: self.period,
            dim: m.nrows(),
            modes: BTreeMap::new(),
            real,
        };
        for (k, v) in &self.modes {
            out.add_mode(*k, m * v);
        }
        if out.real {
            out.canonicalize_real();
        }
        Ok(out)
    }

    pub fn component(&self, i: usize) -> TrigPoly {
        let mut out = TrigPoly {
            period: self.period,
            dim: 1,
            modes: BTreeMap::new(),
            real: self.real,
        };
        for (k, v) in &self.modes {
            out.add_mode(*k, DVector::from_element(1, v[i]));
        }
        out
    }

    pub fn eval(&self, t: f64) -> DVector<Complex64> {
        let omega = 2.0 * std::f64::consts::PI / self.period;
        let mut acc = DVector::from_element(self.dim, Complex64::new(0.0, 0.0));
        for (k, v) in &self.modes {
            let phase = Complex64::new(0.0, *k as f64 * omega * t).exp();
            acc += v * phase;
        }
        acc
    }

    /// Evaluate a real-valued polynomial at time t. The imaginary dust left
    /// by pairing conjugate modes is discarded.
    pub fn eval_real(&self, t: f64) -> DVector<f64> {
        self.eval(t).map(|c| c.re)
    }

    /// Largest deviation from conjugate symmetry, absolute.
    pub fn symmetry_defect(&self) -> f64 {
        let zero = DVector::from_element(self.dim, Complex64::new(0.0, 0.0));
        let mut worst: f64 = 0.0;
        for (k, v) in &self.modes {
            if *k < 0 {
                continue;
            }
            let mirror = self.modes.get(&-k).unwrap_or(&zero);
            for i in 0..self.dim {
                let d = (v[i].conj() - mirror[i]).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Check conjugate symmetry against `rel` times the coefficient scale,
    /// then enforce it exactly and set the realness flag.
    pub fn assert_real(&mut self, rel: f64) -> Result<()> {
        let scale = 1.0 + self.max_coeff();
        let defect = self.symmetry_defect();
        if defect > rel * scale {
            return Err(Error::ToleranceFailure {
                what: "conjugate symmetry".into(),
                residual: defect,
                tol: rel * scale,
            });
        }
        self.real = true;
        self.canonicalize_real();
        Ok(())
    }

    /// Make conjugate symmetry bit-exact: the k >= 0 half is canonical (with
    /// the mode-0 imaginary part averaged away) and k < 0 is its mirror.
    fn canonicalize_real(&mut self) {
        debug_assert!(self.real);
        let keys: Vec<i64> = self.modes.keys().copied().collect();
        for k in keys {
            if k < 0 {
                continue;
            }
            if k == 0 {
                if let Some(v) = self.modes.get_mut(&0) {
                    let cleaned: DVector<Complex64> = v.map(|c| Complex64::new(c.re, 0.0));
                    if cleaned.iter().all(|c| c.norm_sqr() == 0.0) {
                        self.modes.remove(&0);
                    } else {
                        *v = cleaned;
                    }
                }
                continue;
            }
            let plus = self.modes.get(&k).cloned();
            let minus = self.modes.get(&-k).cloned();
            let canon: Option<DVector<Complex64>> = match (plus, minus) {
                (Some(p), Some(m)) => Some((p + m.map(|c| c.conj())) * Complex64::new(0.5, 0.0)),
                (Some(p), None) => Some(p * Complex64::new(0.5, 0.0)),
                (None, Some(m)) => Some(m.map(|c| c.conj()) * Complex64::new(0.5, 0.0)),
                (None, None) => None,
            };
            if let Some(c) = canon {
                if c.iter().all(|x| x.norm_sqr() == 0.0) {
                    self.modes.remove(&k);
                    self.modes.remove(&-k);
                } else {
                    self.modes.insert(-k, c.map(|x| x.conj()));
                    self.modes.insert(k, c);
                }
            }
        }
    }

    /// Mark as complex (used before feeding real data through a complex
    /// eigenbasis, where intermediate values are legitimately asymmetric).
    pub fn clear_real_flag(&mut self) {
        self.real = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn cosine_squared_is_half_plus_half_cos_two() {
        let c = TrigPoly::cosine(TAU, 1, 1.0);
        let p = c.mul(&c).unwrap();
        // 1/2 + (1/2) cos 2t
        assert_eq!(p.support(), vec![-2, 0, 2]);
        assert!((p.mode(0).unwrap()[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((p.mode(2).unwrap()[0] - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!((p.mode(-2).unwrap()[0] - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!(p.is_real());
    }

    #[test]
    fn cosine_times_sine_is_half_sin_two() {
        let c = TrigPoly::cosine(TAU, 1, 1.0);
        let s = TrigPoly::sine(TAU, 1, 1.0);
        let p = c.mul(&s).unwrap();
        // (1/2) sin 2t: the k = 0 contributions cancel exactly
        assert_eq!(p.support(), vec![-2, 2]);
        assert!((p.mode(2).unwrap()[0] - Complex64::new(0.0, -0.25)).norm() < 1e-15);
        assert!((p.mode(-2).unwrap()[0] - Complex64::new(0.0, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn eval_matches_closed_form() {
        let p = TrigPoly::cosine(TAU, 3, 2.0);
        for i in 0..17 {
            let t = i as f64 * 0.37;
            let want = 2.0 * (3.0 * t).cos();
            assert!((p.eval_real(t)[0] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_cosine_is_minus_sine() {
        let p = TrigPoly::cosine(TAU, 2, 1.0).dt();
        let want = TrigPoly::sine(TAU, 2, -2.0);
        let diff = p.sub(&want).unwrap();
        assert!(diff.max_coeff() < 1e-15);
    }

    #[test]
    fn period_mismatch_rejected() {
        let a = TrigPoly::cosine(TAU, 1, 1.0);
        let b = TrigPoly::cosine(1.0, 1, 1.0);
        assert!(matches!(a.mul(&b), Err(Error::PeriodMismatch { .. })));
    }

    #[test]
    fn broadcast_scalar_times_vector() {
        let s = TrigPoly::cosine(TAU, 1, 2.0);
        let v = TrigPoly::constant(TAU, DVector::from_vec(vec![1.0, -3.0]));
        let p = s.mul(&v).unwrap();
        assert_eq!(p.dim(), 2);
        let at0 = p.eval_real(0.0);
        assert!((at0[0] - 2.0).abs() < 1e-14);
        assert!((at0[1] + 6.0).abs() < 1e-14);
    }

    #[test]
    fn non_symmetric_modes_rejected_as_real() {
        let m = vec![(1i64, DVector::from_element(1, Complex64::new(1.0, 0.0)))];
        let r = TrigPoly::from_modes(TAU, 1, m, true);
        assert!(matches!(r, Err(Error::ToleranceFailure { .. })));
    }

    #[test]
    fn zero_modes_are_pruned() {
        let a = TrigPoly::cosine(TAU, 1, 1.0);
        let diff = a.sub(&a).unwrap();
        assert!(diff.is_zero());
        assert!(diff.support().is_empty());
    }
}
