//! Quantities computed from a solved level: errors against exact solutions,
//! the lower energy bound, the dual-energy bound, extrapolation and rates.

pub mod courant;
pub mod invariants;

use crate::adaptivity::LevelOutcome;
use crate::benchmarks::{Benchmark, ExactSolution};
use crate::companion::companion;
use crate::hho::{FluxField, HhoSpace, Variant};
use crate::poly::{LineRule, TriangleRule};
use crate::real::{dot, Real};
use crate::solver::{DiscreteProblem, Field, ProblemData};
use rayon::prelude::*;
use serde::Serialize;

/// Errors of a discrete solution; `None` where the exact field is unknown.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms<T> {
    /// `|E(u) − E_ℓ(u_ℓ)|` against the reference energy.
    pub energy: T,
    /// `‖∇u − G u_ℓ‖_{L^p}`.
    pub gradient: Option<T>,
    /// `‖σ − DW(G u_ℓ)‖_{L^{p'}}` with the exact stress `σ`.
    pub stress: Option<T>,
    /// `‖u − u_T‖_{L²}`.
    pub volume: Option<T>,
}

/// Exactness degree for integrals against non-polynomial exact fields.
pub fn error_degree<T: Real>(problem: &DiscreteProblem<T>) -> usize {
    let p = problem.growth().ceil().to_usize().unwrap_or(2);
    p * (problem.space().degree() + 1) + 4
}

fn conjugate_exponent<T: Real>(p: T) -> T {
    p / (p - T::one())
}

/// Sums `f(t, x, w)` over the error rule of every triangle, graded towards
/// the data singularity.
fn integrate<T: Real>(
    problem: &DiscreteProblem<T>,
    degree: usize,
    f: impl Fn(usize, [T; 2]) -> T + Sync,
) -> T {
    let space = problem.space();
    let rule = TriangleRule::<T>::new(degree);
    let singular = problem.data().singularity;
    (0..space.mesh().n_triangles())
        .into_par_iter()
        .map(|t| {
            let el = space.element(t);
            let (pts, wts) = rule.on_triangle_graded(&el.points, el.area, singular);
            pts.iter().zip(&wts).map(|(x, &w)| w * f(t, *x)).sum::<T>()
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum()
}

pub fn error_norms<T: Real>(
    problem: &DiscreteProblem<T>,
    u: &[T],
    energy: T,
    exact: &ExactSolution<T>,
    reference_energy: T,
) -> ErrorNorms<T> {
    let space = problem.space();
    let m = space.components();
    let p = problem.growth();
    let pp = conjugate_exponent(p);
    let half = T::lit(0.5);
    let deg = error_degree(problem);
    let grad = space.gradient_field(u);
    let diff_pow = |a: &[T], b: &[T], r: T| -> T {
        let sq: T = a.iter().zip(b).map(|(x, y)| (*x - *y).powi(2)).sum();
        sq.powf(r * half)
    };
    let gradient = exact.gradient.as_ref().map(|du| {
        integrate(problem, deg, |t, x| {
            let mut a = vec![T::zero(); 2 * m];
            let mut e = vec![T::zero(); 2 * m];
            grad.eval(t, x, &mut a);
            du(x, &mut e);
            diff_pow(&a, &e, p)
        })
        .powf(T::one() / p)
    });
    let stress = exact.stress.as_ref().map(|sigma| {
        integrate(problem, deg, |t, x| {
            let mut a = vec![T::zero(); 2 * m];
            let mut dw = vec![T::zero(); 2 * m];
            let mut e = vec![T::zero(); 2 * m];
            grad.eval(t, x, &mut a);
            problem.density().derivative(&a, &mut dw);
            sigma(x, &mut e);
            diff_pow(&dw, &e, pp)
        })
        .powf(T::one() / pp)
    });
    let cells = space.cell_field(u);
    let volume = exact.u.as_ref().map(|ue| {
        integrate(problem, deg, |t, x| {
            let mut a = vec![T::zero(); m];
            let mut e = vec![T::zero(); m];
            cells.eval(t, x, &mut a);
            ue(x, &mut e);
            diff_pow(&a, &e, T::lit(2.0))
        })
        .sqrt()
    });
    ErrorNorms {
        energy: (reference_energy - energy).abs(),
        gradient,
        stress,
        volume,
    }
}

/// `(Σ_T h_T ‖(1 − Π_T^k) f‖_{L^{p'}(T)}^{p'})^{1/p'}` with `h_T = |T|^{1/2}`
/// for the sum of the given volume fields.
pub fn volume_oscillation<T: Real>(problem: &DiscreteProblem<T>, fields: &[&Field<T>]) -> T {
    if fields.is_empty() {
        return T::zero();
    }
    let space = problem.space();
    let m = space.components();
    let nc = space.n_cell_basis();
    let k = space.degree();
    let pp = conjugate_exponent(problem.growth());
    let rule = TriangleRule::<T>::new(problem.data_degree());
    let singular = problem.data().singularity;
    let sum: T = (0..space.mesh().n_triangles())
        .into_par_iter()
        .map(|t| {
            let el = space.element(t);
            let (pts, wts) = rule.on_triangle_graded(&el.points, el.area, singular);
            let mut vals = vec![T::zero(); pts.len() * m];
            let mut tmp = vec![T::zero(); m];
            for (q, x) in pts.iter().enumerate() {
                for f in fields {
                    f(*x, &mut tmp);
                    for c in 0..m {
                        vals[q * m + c] += tmp[c];
                    }
                }
            }
            let mut phi = vec![T::zero(); nc];
            let mut rhs = vec![T::zero(); m * nc];
            for (q, (x, &w)) in pts.iter().zip(&wts).enumerate() {
                el.frame.eval(k, *x, &mut phi);
                for c in 0..m {
                    for i in 0..nc {
                        rhs[c * nc + i] += w * vals[q * m + c] * phi[i];
                    }
                }
            }
            let lu = el.cell_mass.lu().expect("cell mass matrix is invertible");
            let proj: Vec<Vec<T>> = (0..m)
                .map(|c| lu.solve_vec(&rhs[c * nc..(c + 1) * nc]))
                .collect();
            let mut acc = T::zero();
            for (q, (x, &w)) in pts.iter().zip(&wts).enumerate() {
                el.frame.eval(k, *x, &mut phi);
                let sq: T = (0..m)
                    .map(|c| (vals[q * m + c] - dot(&phi, &proj[c])).powi(2))
                    .sum();
                acc += w * sq.powf(pp / T::lit(2.0));
            }
            el.area.sqrt() * acc
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum();
    sum.powf(T::one() / pp)
}

/// `(Σ_F h_F ‖(1 − Π_F^k) g‖_{L^{p'}(F)}^{p'})^{1/p'}` over boundary sides,
/// restricted to the components without an essential condition.
pub fn neumann_oscillation<T: Real>(problem: &DiscreteProblem<T>) -> T {
    let Some(g) = &problem.data().neumann else {
        return T::zero();
    };
    let space = problem.space();
    let mesh = space.mesh();
    let m = space.components();
    let nf = space.n_side_basis();
    let k = space.degree();
    let pp = conjugate_exponent(problem.growth());
    let rule = LineRule::<T>::new(problem.data_degree());
    let mut sum = T::zero();
    for s in 0..mesh.n_sides() {
        let side = mesh.side(s);
        if !side.is_boundary() {
            continue;
        }
        let free: Vec<usize> = (0..m).filter(|&c| !side.label.constrains(c)).collect();
        if free.is_empty() {
            continue;
        }
        let sf = space.side_frame(s);
        let mut vals = vec![T::zero(); rule.len() * m];
        for (q, &tq) in rule.nodes.iter().enumerate() {
            g(sf.point(tq), side.normal, &mut vals[q * m..(q + 1) * m]);
        }
        let mut psi = vec![T::zero(); nf];
        let mut rhs = vec![T::zero(); m * nf];
        for (q, (&tq, &wq)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            sf.eval(k, tq, &mut psi);
            for c in 0..m {
                for j in 0..nf {
                    rhs[c * nf + j] += wq * sf.length * vals[q * m + c] * psi[j];
                }
            }
        }
        let lu = space
            .side_mass(s)
            .lu()
            .expect("side mass matrix is invertible");
        let proj: Vec<Vec<T>> = (0..m)
            .map(|c| lu.solve_vec(&rhs[c * nf..(c + 1) * nf]))
            .collect();
        let mut acc = T::zero();
        for (q, (&tq, &wq)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            sf.eval(k, tq, &mut psi);
            let sq: T = free
                .iter()
                .map(|&c| (vals[q * m + c] - dot(&psi, &proj[c])).powi(2))
                .sum();
            acc += wq * sf.length * sq.powf(pp / T::lit(2.0));
        }
        sum += sf.length * acc;
    }
    sum.powf(T::one() / pp)
}

/// Data oscillation entering the energy bounds: of `f` (plus `cζ` when the
/// lower-order term is present) and of the Neumann data.
pub fn data_oscillation<T: Real>(problem: &DiscreteProblem<T>) -> T {
    let data: &ProblemData<T> = problem.data();
    let weighted = data.lower_order.as_ref().map(|l| l.weighted());
    let fields: Vec<&Field<T>> = data.source.iter().chain(weighted.iter()).collect();
    volume_oscillation(problem, &fields) + neumann_oscillation(problem)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound<T> {
    /// Bound with the oscillation constant set to one.
    pub with_oscillation: T,
    /// Bound with the oscillation term dropped.
    pub without_oscillation: T,
}

/// `E_ℓ(u_ℓ) + ∫ (DW(G u_ℓ) − σ_ℓ) : ∇u − s(u_ℓ; I u) − osc`, where the
/// stabilization term is present for the stabilized variant only.
pub fn lower_energy_bound<T: Real>(
    problem: &DiscreteProblem<T>,
    u: &[T],
    energy: T,
    sigma: &FluxField<T>,
    exact: &ExactSolution<T>,
) -> Option<LowerBound<T>> {
    let du = exact.gradient.as_ref()?;
    let space = problem.space();
    let m = space.components();
    let grad = space.gradient_field(u);
    let deg = error_degree(problem);
    let correction = integrate(problem, deg, |t, x| {
        let mut a = vec![T::zero(); 2 * m];
        let mut dw = vec![T::zero(); 2 * m];
        let mut s = vec![T::zero(); 2 * m];
        let mut e = vec![T::zero(); 2 * m];
        grad.eval(t, x, &mut a);
        problem.density().derivative(&a, &mut dw);
        sigma.eval(t, x, &mut s);
        du(x, &mut e);
        (0..2 * m).map(|i| (dw[i] - s[i]) * e[i]).sum()
    });
    let mut base = energy + correction;
    if space.variant() == Variant::Stabilized {
        let ue = exact.u.as_ref()?;
        let iu = space.interpolate(ue.as_ref(), problem.data_degree());
        base -= problem.stabilization_form(u, &iu);
    }
    Some(LowerBound {
        with_oscillation: base - data_oscillation(problem),
        without_oscillation: base,
    })
}

/// Dual energy `−∫ W*(σ) + ∫_{Γ_D} u_D · σν`; `None` when the density has
/// no closed-form conjugate.
pub fn dual_energy<T: Real>(problem: &DiscreteProblem<T>, sigma: &FluxField<T>) -> Option<T> {
    let space = problem.space();
    let mesh = space.mesh();
    let m = space.components();
    let density = problem.density();
    density.conjugate(&vec![T::zero(); 2 * m])?;
    let rule = TriangleRule::<T>::new(problem.nonlinear_degree());
    let bulk: T = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let el = space.element(t);
            let (pts, wts) = rule.on_triangle(&el.points, el.area);
            let mut s = vec![T::zero(); 2 * m];
            pts.iter()
                .zip(&wts)
                .map(|(x, &w)| {
                    sigma.eval(t, *x, &mut s);
                    w * density.conjugate(&s).expect("checked above")
                })
                .sum::<T>()
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum();
    let mut boundary = T::zero();
    if let Some(ud) = &problem.data().dirichlet {
        let line = LineRule::<T>::new(problem.data_degree());
        let mut s = vec![T::zero(); 2 * m];
        let mut g = vec![T::zero(); m];
        for si in 0..mesh.n_sides() {
            let side = mesh.side(si);
            if !side.is_boundary() || !side.label.constrains_any() {
                continue;
            }
            let sf = space.side_frame(si);
            for (&tq, &wq) in line.nodes.iter().zip(&line.weights) {
                let x = sf.point(tq);
                sigma.eval(side.owner, x, &mut s);
                ud(x, &mut g);
                for c in (0..m).filter(|&c| side.label.constrains(c)) {
                    boundary += wq
                        * sf.length
                        * g[c]
                        * (s[2 * c] * side.normal[0] + s[2 * c + 1] * side.normal[1]);
                }
            }
        }
    }
    Some(boundary - bulk)
}

/// `‖G u − ∇J u‖²_{L²}` with the conforming companion `J`.
pub fn companion_defect<T: Real>(space: &HhoSpace<T>, u: &[T]) -> T {
    let j = companion(space, u);
    let grad = space.gradient_field(u);
    let m = space.components();
    let rule = TriangleRule::<T>::new(2 * (space.degree() + 3));
    (0..space.mesh().n_triangles())
        .into_par_iter()
        .map(|t| {
            let el = space.element(t);
            let (pts, wts) = rule.on_triangle(&el.points, el.area);
            let mut a = vec![T::zero(); 2 * m];
            let mut b = vec![T::zero(); 2 * m];
            pts.iter()
                .zip(&wts)
                .map(|(x, &w)| {
                    grad.eval(t, *x, &mut a);
                    j.eval_grad(t, *x, &mut b);
                    w * a.iter().zip(&b).map(|(p, q)| (*p - *q).powi(2)).sum::<T>()
                })
                .sum::<T>()
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum()
}

/// Split of the guaranteed bound `E_ℓ(u_ℓ) − E*(σ_ℓ) + osc(f) + ‖G u − ∇J u‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualBound<T> {
    pub dual_energy: T,
    pub gap: T,
    pub oscillation: T,
    pub companion: T,
    pub rhs: T,
}

/// Available for the Raviart-Thomas variant, whose discrete stress is
/// equilibrated, and densities with a closed-form conjugate.
pub fn dual_bound<T: Real>(
    problem: &DiscreteProblem<T>,
    u: &[T],
    energy: T,
    sigma: &FluxField<T>,
) -> Option<DualBound<T>> {
    if problem.space().variant() != Variant::RaviartThomas || problem.data().lower_order.is_some() {
        return None;
    }
    let dual = dual_energy(problem, sigma)?;
    let fields: Vec<&Field<T>> = problem.data().source.iter().collect();
    let oscillation = volume_oscillation(problem, &fields);
    let companion = companion_defect(problem.space(), u);
    let gap = energy - dual;
    Some(DualBound {
        dual_energy: dual,
        gap,
        oscillation,
        companion,
        rhs: gap + oscillation + companion,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aitken<T> {
    pub limit: T,
    /// The second difference vanished (relative to the data); `limit` is
    /// then the last value.
    pub degenerate: bool,
}

/// Aitken's Δ² extrapolation of the last three values.
pub fn aitken<T: Real>(values: &[T]) -> Option<Aitken<T>> {
    let [a, b, c] = values.get(values.len().checked_sub(3)?..)? else {
        return None;
    };
    let (a, b, c) = (*a, *b, *c);
    let d1 = c - b;
    let d2 = c - T::lit(2.0) * b + a;
    let scale = a
        .abs()
        .max(b.abs())
        .max(c.abs())
        .max(T::min_positive_value());
    if d2.abs() <= T::epsilon() * scale * T::lit(16.0) {
        return Some(Aitken {
            limit: c,
            degenerate: true,
        });
    }
    Some(Aitken {
        limit: c - d1 * d1 / d2,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals in log space.
    pub residual: f64,
}

/// Least-squares slope of `log(value)` against `log(ndof)` over the last
/// `window` points (all when `None`). Needs at least two positive points.
pub fn fit_rate(ndof: &[f64], values: &[f64], window: Option<usize>) -> Option<RateFit> {
    let n = ndof.len().min(values.len());
    let start = window.map_or(0, |w| n.saturating_sub(w));
    let pts: Vec<(f64, f64)> = (start..n)
        .filter(|&i| ndof[i] > 0.0 && values[i] > 0.0)
        .map(|i| (ndof[i].ln(), values[i].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / len)
        .sqrt();
    Some(RateFit {
        slope,
        intercept,
        residual,
    })
}

/// One row of a convergence history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub ndof: usize,
    pub ntriangles: usize,
    pub energy: f64,
    pub estimator: f64,
    /// `s(u; u)`, stabilized variant only.
    pub stab: Option<f64>,
    pub err_energy: f64,
    pub err_grad: Option<f64>,
    pub err_stress: Option<f64>,
    pub err_vol: Option<f64>,
    pub leb: Option<f64>,
    pub leb_without_osc: Option<f64>,
    pub rhs: Option<f64>,
    pub dual_energy: Option<f64>,
    pub seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Smallest and largest `|T|^{1/2}`.
    pub min_h: f64,
    pub max_h: f64,
}

pub fn level_report<T: Real>(benchmark: &Benchmark<T>, outcome: &LevelOutcome<T>) -> LevelReport {
    let problem = &*outcome.problem;
    let sol = &outcome.solution;
    let mesh = outcome.mesh();
    let errors = error_norms(
        problem,
        &sol.u,
        sol.energy,
        &benchmark.exact,
        benchmark.reference_energy,
    );
    let leb = lower_energy_bound(
        problem,
        &sol.u,
        sol.energy,
        &outcome.stress,
        &benchmark.exact,
    );
    let dual = dual_bound(problem, &sol.u, sol.energy, &outcome.stress);
    let stab = (problem.space().variant() == Variant::Stabilized)
        .then(|| problem.energy_parts(&sol.u).stabilization.as_f64());
    let hs: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| mesh.mesh_size(t).as_f64())
        .collect();
    LevelReport {
        level: outcome.level,
        ndof: outcome.ndof(),
        ntriangles: mesh.n_triangles(),
        energy: sol.energy.as_f64(),
        estimator: outcome.estimate.total.as_f64(),
        stab,
        err_energy: errors.energy.as_f64(),
        err_grad: errors.gradient.map(Real::as_f64),
        err_stress: errors.stress.map(Real::as_f64),
        err_vol: errors.volume.map(Real::as_f64),
        leb: leb.map(|l| l.with_oscillation.as_f64()),
        leb_without_osc: leb.map(|l| l.without_oscillation.as_f64()),
        rhs: dual.map(|d| d.rhs.as_f64()),
        dual_energy: dual.map(|d| d.dual_energy.as_f64()),
        seconds: outcome.seconds,
        iterations: sol.iterations,
        converged: sol.converged,
        gradient_norm: sol.gradient_norm.as_f64(),
        min_h: hs.iter().copied().fold(f64::INFINITY, f64::min),
        max_h: hs.iter().copied().fold(0.0, f64::max),
    }
}
