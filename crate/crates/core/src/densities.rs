//! Convex energy densities `W : R^{m×2} → R` with derivatives and, where
//! available in closed form, convex conjugates.
//!
//! Matrices are passed row-major as slices of length `2m`; row `c` is the
//! gradient of component `c`.

use crate::real::{dot, norm_sq, Real};
use std::fmt::Debug;

pub trait EnergyDensity<T: Real>: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// Number of solution components `m`.
    fn components(&self) -> usize;

    /// Growth exponent `p`.
    fn growth(&self) -> T;

    /// Exponent used to size quadrature rules: nonlinear integrands on
    /// degree-`k` reconstructions are integrated exactly to degree
    /// `quadrature_exponent() · (k + 1)`.
    fn quadrature_exponent(&self) -> usize;

    fn value(&self, a: &[T]) -> T;

    fn derivative(&self, a: &[T], out: &mut [T]);

    /// Second derivative as a row-major `2m × 2m` matrix. Where the density
    /// is not twice differentiable a one-sided value is returned.
    fn hessian(&self, a: &[T], out: &mut [T]);

    /// `W*(s) = sup_a (s : a − W(a))` when known in closed form.
    fn conjugate(&self, _s: &[T]) -> Option<T> {
        None
    }
}

/// `W(a) = |a|^p / p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PLaplace<T> {
    pub p: T,
    pub components: usize,
}

impl<T: Real> PLaplace<T> {
    pub fn new(p: T) -> Self {
        Self { p, components: 1 }
    }

    pub fn conjugate_exponent(&self) -> T {
        self.p / (self.p - T::one())
    }
}

impl<T: Real> EnergyDensity<T> for PLaplace<T> {
    fn name(&self) -> &'static str {
        "p-laplace"
    }

    fn components(&self) -> usize {
        self.components
    }

    fn growth(&self) -> T {
        self.p
    }

    fn quadrature_exponent(&self) -> usize {
        self.p.ceil().to_usize().unwrap_or(2).max(2)
    }

    fn value(&self, a: &[T]) -> T {
        norm_sq(a).powf(self.p / T::lit(2.0)) / self.p
    }

    fn derivative(&self, a: &[T], out: &mut [T]) {
        let n2 = norm_sq(a);
        let f = if n2 > T::zero() {
            n2.powf((self.p - T::lit(2.0)) / T::lit(2.0))
        } else if self.p > T::lit(2.0) {
            T::zero()
        } else {
            T::one()
        };
        for (o, &x) in out.iter_mut().zip(a) {
            *o = f * x;
        }
    }

    fn hessian(&self, a: &[T], out: &mut [T]) {
        // |a|^{p-2} (I + (p-2) â âᵀ)
        let n = a.len();
        let n2 = norm_sq(a);
        let two = T::lit(2.0);
        for o in out.iter_mut() {
            *o = T::zero();
        }
        if n2 == T::zero() {
            let d = if self.p > two { T::zero() } else { T::one() };
            for i in 0..n {
                out[i * n + i] = d;
            }
            return;
        }
        let f = n2.powf((self.p - two) / two);
        let g = (self.p - two) * f / n2;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = g * a[i] * a[j];
            }
            out[i * n + i] += f;
        }
    }

    fn conjugate(&self, s: &[T]) -> Option<T> {
        let q = self.conjugate_exponent();
        Some(norm_sq(s).powf(q / T::lit(2.0)) / q)
    }
}

/// Relaxed optimal-design density `W(a) = ψ(|a|)` with the piecewise
/// quadratic/affine profile determined by two material parameters and a
/// volume multiplier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalDesign<T> {
    pub mu1: T,
    pub mu2: T,
    pub lambda: T,
    pub xi1: T,
    pub xi2: T,
}

impl<T: Real> OptimalDesign<T> {
    /// Transition points `ξ1 = sqrt(2 λ μ1 / μ2)` and `ξ2 = μ2 ξ1 / μ1`.
    pub fn new(mu1: T, mu2: T, lambda: T) -> Self {
        let xi1 = (T::lit(2.0) * lambda * mu1 / mu2).sqrt();
        let xi2 = mu2 * xi1 / mu1;
        Self {
            mu1,
            mu2,
            lambda,
            xi1,
            xi2,
        }
    }

    /// Benchmark parameters `μ1 = 1`, `μ2 = 2`, `λ = 0.0145`.
    pub fn standard() -> Self {
        Self::new(T::one(), T::lit(2.0), T::lit(0.0145))
    }

    pub fn profile(&self, xi: T) -> T {
        let half = T::lit(0.5);
        if xi <= self.xi1 {
            self.mu2 * xi * xi * half
        } else if xi <= self.xi2 {
            self.xi1 * self.mu2 * (xi - self.xi1 * half)
        } else {
            self.mu1 * xi * xi * half - self.xi1 * self.mu2 * (self.xi1 * half - self.xi2 * half)
        }
    }

    pub fn profile_derivative(&self, xi: T) -> T {
        if xi <= self.xi1 {
            self.mu2 * xi
        } else if xi <= self.xi2 {
            self.xi1 * self.mu2
        } else {
            self.mu1 * xi
        }
    }

    fn profile_second(&self, xi: T) -> T {
        if xi <= self.xi1 {
            self.mu2
        } else if xi <= self.xi2 {
            T::zero()
        } else {
            self.mu1
        }
    }

    /// Legendre transform of the profile.
    pub fn conjugate_profile(&self, t: T) -> T {
        let half = T::lit(0.5);
        if t <= self.mu2 * self.xi1 {
            t * t / (T::lit(2.0) * self.mu2)
        } else {
            t * t / (T::lit(2.0) * self.mu1)
                + self.xi1 * self.mu2 * (self.xi1 * half - self.xi2 * half)
        }
    }
}

impl<T: Real> EnergyDensity<T> for OptimalDesign<T> {
    fn name(&self) -> &'static str {
        "optimal-design"
    }

    fn components(&self) -> usize {
        1
    }

    fn growth(&self) -> T {
        T::lit(2.0)
    }

    fn quadrature_exponent(&self) -> usize {
        2
    }

    fn value(&self, a: &[T]) -> T {
        self.profile(norm_sq(a).sqrt())
    }

    fn derivative(&self, a: &[T], out: &mut [T]) {
        let xi = norm_sq(a).sqrt();
        let f = if xi > T::zero() {
            self.profile_derivative(xi) / xi
        } else {
            self.mu2
        };
        for (o, &x) in out.iter_mut().zip(a) {
            *o = f * x;
        }
    }

    fn hessian(&self, a: &[T], out: &mut [T]) {
        // ψ''(ξ) â âᵀ + ψ'(ξ)/ξ (I − â âᵀ)
        let n = a.len();
        let xi = norm_sq(a).sqrt();
        for o in out.iter_mut() {
            *o = T::zero();
        }
        if xi == T::zero() {
            for i in 0..n {
                out[i * n + i] = self.mu2;
            }
            return;
        }
        let radial = self.profile_second(xi);
        let tangential = self.profile_derivative(xi) / xi;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (radial - tangential) * a[i] * a[j] / (xi * xi);
            }
            out[i * n + i] += tangential;
        }
    }

    fn conjugate(&self, s: &[T]) -> Option<T> {
        Some(self.conjugate_profile(norm_sq(s).sqrt()))
    }
}

/// Convex envelope of `|F − F1|² |F − F2|²` for two wells in `R²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoWell<T> {
    pub f1: [T; 2],
    pub f2: [T; 2],
}

impl<T: Real> TwoWell<T> {
    /// Wells `∓ (3, 2) / √13`.
    pub fn standard() -> Self {
        let s = T::lit(13.0).sqrt();
        let w = [T::lit(3.0) / s, T::lit(2.0) / s];
        Self {
            f1: [-w[0], -w[1]],
            f2: w,
        }
    }

    fn half_gap(&self) -> [T; 2] {
        let h = T::lit(0.5);
        [(self.f2[0] - self.f1[0]) * h, (self.f2[1] - self.f1[1]) * h]
    }

    fn center(&self) -> [T; 2] {
        let h = T::lit(0.5);
        [(self.f1[0] + self.f2[0]) * h, (self.f1[1] + self.f2[1]) * h]
    }
}

impl<T: Real> EnergyDensity<T> for TwoWell<T> {
    fn name(&self) -> &'static str {
        "two-well"
    }

    fn components(&self) -> usize {
        1
    }

    fn growth(&self) -> T {
        T::lit(4.0)
    }

    fn quadrature_exponent(&self) -> usize {
        4
    }

    fn value(&self, f: &[T]) -> T {
        let a = self.half_gap();
        let b = self.center();
        let d = [f[0] - b[0], f[1] - b[1]];
        let a2 = norm_sq(&a);
        let d2 = norm_sq(&d);
        let ad = dot(&a, &d);
        let outer = (d2 - a2).max(T::zero());
        outer * outer + T::lit(4.0) * (a2 * d2 - ad * ad)
    }

    fn derivative(&self, f: &[T], out: &mut [T]) {
        let a = self.half_gap();
        let b = self.center();
        let d = [f[0] - b[0], f[1] - b[1]];
        let a2 = norm_sq(&a);
        let d2 = norm_sq(&d);
        let ad = dot(&a, &d);
        let outer = (d2 - a2).max(T::zero());
        for i in 0..2 {
            out[i] = T::lit(4.0) * outer * d[i] + T::lit(8.0) * (a2 * d[i] - ad * a[i]);
        }
    }

    fn hessian(&self, f: &[T], out: &mut [T]) {
        let a = self.half_gap();
        let b = self.center();
        let d = [f[0] - b[0], f[1] - b[1]];
        let a2 = norm_sq(&a);
        let d2 = norm_sq(&d);
        let active = d2 > a2;
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { T::one() } else { T::zero() };
                let mut h = T::lit(8.0) * (a2 * delta - a[i] * a[j]);
                if active {
                    h += T::lit(4.0) * (d2 - a2) * delta + T::lit(8.0) * d[i] * d[j];
                }
                out[i * 2 + j] = h;
            }
        }
    }
}

/// Polyconvex-type density `W(A) = (|A|² − 2 det A)^4 + |A|²/2` on `R^{2×2}`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Fhm;

impl Fhm {
    /// `|A|² − 2 det A = (a11 − a22)² + (a12 + a21)²` and its gradient.
    fn defect<T: Real>(a: &[T]) -> (T, [T; 4]) {
        let u1 = a[0] - a[3];
        let u2 = a[1] + a[2];
        let two = T::lit(2.0);
        (u1 * u1 + u2 * u2, [two * u1, two * u2, two * u2, -two * u1])
    }
}

impl<T: Real> EnergyDensity<T> for Fhm {
    fn name(&self) -> &'static str {
        "fhm"
    }

    fn components(&self) -> usize {
        2
    }

    fn growth(&self) -> T {
        T::lit(2.0)
    }

    /// The density is a polynomial of degree eight.
    fn quadrature_exponent(&self) -> usize {
        8
    }

    fn value(&self, a: &[T]) -> T {
        let (q, _) = Self::defect(a);
        let q2 = q * q;
        q2 * q2 + norm_sq(a) * T::lit(0.5)
    }

    fn derivative(&self, a: &[T], out: &mut [T]) {
        let (q, dq) = Self::defect(a);
        let f = T::lit(4.0) * q * q * q;
        for i in 0..4 {
            out[i] = f * dq[i] + a[i];
        }
    }

    fn hessian(&self, a: &[T], out: &mut [T]) {
        let (q, dq) = Self::defect(a);
        let outer = T::lit(12.0) * q * q;
        let curv = T::lit(8.0) * q * q * q;
        // Second derivative of the defect divided by two.
        const D2: [[i8; 4]; 4] = [[1, 0, 0, -1], [0, 1, 1, 0], [0, 1, 1, 0], [-1, 0, 0, 1]];
        for i in 0..4 {
            for j in 0..4 {
                let delta = if i == j { T::one() } else { T::zero() };
                out[i * 4 + j] = outer * dq[i] * dq[j] + curv * T::lit(D2[i][j] as f64) + delta;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // [DERIVED]
    #[test]
    fn p_laplace_values() {
        let w = PLaplace::new(4.0f64);
        assert!((w.value(&[1.0, 0.0]) - 0.25).abs() < 1e-15);
        assert!((w.value(&[3.0, 4.0]) - 625.0 / 4.0).abs() < 1e-12);
        let mut d = [0.0; 2];
        w.derivative(&[3.0, 4.0], &mut d);
        assert_eq!(d, [75.0, 100.0]);
    }

    // [PAPER]
    #[test]
    fn optimal_design_transitions() {
        let w = OptimalDesign::<f64>::standard();
        assert!((w.xi1 - 0.0145f64.sqrt()).abs() < 1e-15);
        assert!((w.xi2 - 2.0 * w.xi1).abs() < 1e-15);
        assert!((w.xi1 * w.mu2 - w.xi2 * w.mu1).abs() < 1e-15);
        for xi in [w.xi1, w.xi2] {
            let below = w.profile(xi * (1.0 - 1e-12));
            let above = w.profile(xi * (1.0 + 1e-12));
            assert!((below - above).abs() < 1e-12);
        }
    }

    // [PAPER]
    #[test]
    fn two_well_vanishes_on_wells() {
        let w = TwoWell::<f64>::standard();
        assert!(w.value(&w.f1).abs() < 1e-15);
        assert!(w.value(&w.f2).abs() < 1e-15);
        let mid = [0.0, 0.0];
        assert!(w.value(&mid).abs() < 1e-15);
    }

    // [PAPER]
    #[test]
    fn fhm_on_conformal_gradient() {
        // A conformal matrix has zero defect, so W = |A|²/2.
        let a = [0.3, -0.7, 0.7, 0.3];
        let w = Fhm;
        let v: f64 = w.value(&a);
        assert!((v - 0.5 * (0.09 + 0.49 + 0.49 + 0.09)).abs() < 1e-15);
    }
}
