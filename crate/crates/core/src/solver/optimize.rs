//! Minimization of smooth convex functionals on `R^n`.
//!
//! Two methods share the Armijo backtracking line search: a regularized
//! Newton method using assembled sparse Hessians, and L-BFGS preconditioned
//! by a fixed symmetric positive definite metric.

use crate::linalg::{CholeskyFactor, CholeskySolver, LinalgError, SymmetricPattern};
use crate::real::{dot, norm_sq, Real};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub trait Objective<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn energy(&self, x: &[T]) -> T;

    /// Writes the gradient into `g` and returns the energy.
    fn energy_gradient(&self, x: &[T], g: &mut [T]) -> T;

    fn pattern(&self) -> &SymmetricPattern;

    /// Hessian values on [`Objective::pattern`].
    fn hessian(&self, x: &[T]) -> Vec<T>;

    /// Symmetric positive definite metric on the same pattern; used to
    /// regularize Newton steps and to precondition L-BFGS.
    fn metric(&self) -> &[T];

    fn linear_solver(&self) -> &CholeskySolver;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Newton,
    Lbfgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub method: Method,
    /// Converged once the Euclidean norm of the gradient drops below this value.
    pub tolerance: f64,
    /// Together with `energy_tolerance`: give up when a step changes neither
    /// the iterate nor the energy relative to these values.
    pub step_tolerance: f64,
    pub energy_tolerance: f64,
    pub max_iterations: usize,
    /// History length of L-BFGS.
    pub memory: usize,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            method: Method::Newton,
            tolerance: 1e-10,
            step_tolerance: 1e-15,
            energy_tolerance: 1e-15,
            max_iterations: 500,
            memory: 10,
            armijo: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeReport<T> {
    pub iterations: usize,
    pub energy: T,
    pub gradient_norm: T,
    pub converged: bool,
    /// Energy after each accepted step, starting with the initial energy.
    pub energy_history: Vec<T>,
}

pub fn minimize<T: Real, O: Objective<T>>(
    obj: &O,
    x0: Vec<T>,
    settings: &SolverSettings,
) -> (Vec<T>, OptimizeReport<T>) {
    match settings.method {
        Method::Newton => newton(obj, x0, settings),
        Method::Lbfgs => lbfgs(obj, x0, settings),
    }
}

fn axpy<T: Real>(x: &[T], alpha: T, d: &[T]) -> Vec<T> {
    x.iter().zip(d).map(|(&a, &b)| a + alpha * b).collect()
}

fn stalled<T: Real>(x: &[T], xt: &[T], e: T, et: T, settings: &SolverSettings) -> bool {
    let step: T = x
        .iter()
        .zip(xt)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        .sqrt();
    let scale = norm_sq(x).sqrt().max(T::one());
    step <= T::lit(settings.step_tolerance) * scale
        && (e - et).abs() <= T::lit(settings.energy_tolerance) * e.abs().max(T::one())
}

/// Energy differences below this size are rounding noise.
fn unresolvable<T: Real>(slope: T, energy: T) -> bool {
    slope.abs() <= T::lit(1e3) * T::epsilon() * energy.abs().max(T::one())
}

/// Backtracking search along `d` with the Armijo rule. When the predicted
/// decrease is below the rounding level of the energy, the energy change is
/// estimated by the trapezoidal rule on directional derivatives instead,
/// which avoids cancellation and is exact for quadratics.
fn line_search<T: Real, O: Objective<T>>(
    obj: &O,
    x: &[T],
    energy: T,
    g: &[T],
    d: &[T],
    armijo: T,
) -> Option<(Vec<T>, T, T)> {
    let slope = dot(g, d);
    if !(slope < T::zero()) {
        return None;
    }
    let noisy = unresolvable(slope, energy);
    let mut gt = vec![T::zero(); x.len()];
    let mut alpha = T::one();
    for _ in 0..60 {
        let xt = axpy(x, alpha, d);
        let accepted = if noisy {
            let et = obj.energy_gradient(&xt, &mut gt);
            let change = alpha * (slope + dot(&gt, d)) * T::lit(0.5);
            (change <= armijo * alpha * slope).then_some(et)
        } else {
            let et = obj.energy(&xt);
            (et <= energy + armijo * alpha * slope).then_some(et)
        };
        if let Some(et) = accepted {
            return Some((xt, et, alpha));
        }
        alpha *= T::lit(0.5);
    }
    None
}

fn newton<T: Real, O: Objective<T>>(
    obj: &O,
    x0: Vec<T>,
    settings: &SolverSettings,
) -> (Vec<T>, OptimizeReport<T>) {
    let n = obj.dim();
    let tol = T::lit(settings.tolerance);
    let armijo = T::lit(settings.armijo);
    let mut x = x0;
    let mut g = vec![T::zero(); n];
    let mut energy = obj.energy_gradient(&x, &mut g);
    let mut gnorm = norm_sq(&g).sqrt();
    let mut history = vec![energy];
    let metric = obj.metric();
    let mut shift = T::lit(1e-3);
    let shift_min = T::lit(1e-12);
    let shift_max = T::lit(1e12);
    let mut iterations = 0;
    let mut failures = 0;
    while iterations < settings.max_iterations && gnorm > tol && n > 0 {
        iterations += 1;
        let hess = obj.hessian(&x);
        let factor = loop {
            let vals: Vec<T> = hess
                .iter()
                .zip(metric)
                .map(|(&h, &m)| h + shift * m)
                .collect();
            match obj.linear_solver().factor(&vals) {
                Ok(f) => break Some(f),
                Err(LinalgError::NotPositiveDefinite) if shift < shift_max => {
                    shift = (shift * T::lit(10.0)).max(T::lit(1e-8));
                }
                Err(_) => break None,
            }
        };
        let Some(factor) = factor else { break };
        let d: Vec<T> = factor.solve(&g).into_iter().map(|v| -v).collect();
        match line_search(obj, &x, energy, &g, &d, armijo) {
            Some((xt, et, alpha)) => {
                let stall = stalled(&x, &xt, energy, et, settings);
                x = xt;
                energy = obj.energy_gradient(&x, &mut g);
                gnorm = norm_sq(&g).sqrt();
                history.push(energy);
                shift = if alpha == T::one() {
                    (shift * T::lit(0.1)).max(shift_min)
                } else {
                    (shift * T::lit(10.0)).min(shift_max)
                };
                failures = 0;
                if stall {
                    break;
                }
            }
            None => {
                failures += 1;
                if failures > 8 || shift >= shift_max {
                    break;
                }
                shift = (shift * T::lit(100.0)).min(shift_max);
            }
        }
    }
    let converged = gnorm <= tol;
    (
        x,
        OptimizeReport {
            iterations,
            energy,
            gradient_norm: gnorm,
            converged,
            energy_history: history,
        },
    )
}

fn lbfgs<T: Real, O: Objective<T>>(
    obj: &O,
    x0: Vec<T>,
    settings: &SolverSettings,
) -> (Vec<T>, OptimizeReport<T>) {
    let n = obj.dim();
    let tol = T::lit(settings.tolerance);
    let armijo = T::lit(settings.armijo);
    let precond: Option<CholeskyFactor> = obj.linear_solver().factor(obj.metric()).ok();
    let apply_precond = |q: &[T]| -> Vec<T> {
        match &precond {
            Some(f) => f.solve(q),
            None => q.to_vec(),
        }
    };
    let mut x = x0;
    let mut g = vec![T::zero(); n];
    let mut energy = obj.energy_gradient(&x, &mut g);
    let mut gnorm = norm_sq(&g).sqrt();
    let mut history = vec![energy];
    let mut pairs: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::new();
    let mut iterations = 0;
    while iterations < settings.max_iterations && gnorm > tol && n > 0 {
        iterations += 1;
        // Two-loop recursion with the preconditioner as initial inverse.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = *rho * dot(s, &q);
            for (qi, &yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let mut r = apply_precond(&q);
        if let Some((s, y, _)) = pairs.back() {
            let hy = apply_precond(y);
            let gamma = dot(s, y) / dot(y, &hy);
            for ri in r.iter_mut() {
                *ri *= gamma;
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
            let b = *rho * dot(y, &r);
            for (ri, &si) in r.iter_mut().zip(s) {
                *ri += (a - b) * si;
            }
        }
        let mut d: Vec<T> = r.into_iter().map(|v| -v).collect();
        if !(dot(&g, &d) < T::zero()) {
            pairs.clear();
            d = apply_precond(&g).into_iter().map(|v| -v).collect();
        }
        let Some((xt, _, _)) = line_search(obj, &x, energy, &g, &d, armijo) else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };
        let mut gt = vec![T::zero(); n];
        let et = obj.energy_gradient(&xt, &mut gt);
        let s: Vec<T> = xt.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gt.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * norm_sq(&s).sqrt() * norm_sq(&y).sqrt() {
            if pairs.len() == settings.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, T::one() / sy));
        }
        let stall = stalled(&x, &xt, energy, et, settings);
        x = xt;
        g = gt;
        energy = et;
        gnorm = norm_sq(&g).sqrt();
        history.push(energy);
        if stall {
            break;
        }
    }
    let converged = gnorm <= tol;
    (
        x,
        OptimizeReport {
            iterations,
            energy,
            gradient_norm: gnorm,
            converged,
            energy_history: history,
        },
    )
}
