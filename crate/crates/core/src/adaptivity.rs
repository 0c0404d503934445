//! Refinement indicators, Dörfler marking, prolongation between nested
//! meshes, and the adaptive solve-estimate-mark-refine loop.

use crate::benchmarks::{Benchmark, IndicatorFamily};
use crate::companion::companion;
use crate::hho::{FluxField, HhoSpace, Variant};
use crate::mesh::Triangulation;
use crate::poly::{LineRule, TriangleRule};
use crate::real::{dot, Real};
use crate::solver::optimize::SolverSettings;
use crate::solver::{DiscreteProblem, DiscreteSolution, SolverError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

/// Term set of the refinement indicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Projected volume and trace terms; requires the Raviart-Thomas space.
    RaviartThomas,
    /// Unprojected volume and trace terms; requires the stabilized space.
    Stabilized,
    /// Either of the above plus the oscillation of the lower-order data.
    TwoWellExtended,
    /// Quadratic volume, boundary, jump and trace terms only.
    FhmModified,
}

impl EstimatorKind {
    pub fn for_benchmark(family: IndicatorFamily, variant: Variant) -> Self {
        match (family, variant) {
            (IndicatorFamily::Standard, Variant::RaviartThomas) => Self::RaviartThomas,
            (IndicatorFamily::Standard, Variant::Stabilized) => Self::Stabilized,
            (IndicatorFamily::TwoWell, _) => Self::TwoWellExtended,
            (IndicatorFamily::Fhm, _) => Self::FhmModified,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorParams {
    /// Exponent `ε` of the mesh-size weights.
    pub epsilon: f64,
    /// Bulk parameter of the marking.
    pub theta: f64,
    pub kind: EstimatorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("theta = {0} violates 0 < theta < 1")]
    Theta(f64),
    #[error("eps = {eps} violates 0 < eps <= k+1 = {bound}")]
    EpsilonRt { eps: f64, bound: f64 },
    #[error("eps = {eps} violates 0 < eps <= min(k+1, (k+1)/(p-1)) = {bound}")]
    EpsilonStabilized { eps: f64, bound: f64 },
    #[error("{kind:?} indicator needs the {needed} space")]
    VariantMismatch {
        kind: EstimatorKind,
        needed: &'static str,
    },
    #[error("two-well indicator needs lower-order data")]
    MissingLowerOrder,
    #[error("modified indicator needs a problem with 2 components, got {0}")]
    ComponentCount(usize),
}

impl EstimatorParams {
    /// Upper bound on `ε` for polynomial degree `k`, growth `p`, and the
    /// given variant.
    pub fn epsilon_bound(k: usize, p: f64, variant: Variant) -> f64 {
        let k1 = (k + 1) as f64;
        match variant {
            Variant::RaviartThomas => k1,
            Variant::Stabilized => k1.min(k1 / (p - 1.0)),
        }
    }

    /// Checks `θ` and `ε` against the admissible ranges. `ε = 0` passes; see
    /// [`EstimatorParams::is_degenerate`].
    pub fn validate(&self, k: usize, p: f64, variant: Variant) -> Result<(), ParamError> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(ParamError::Theta(self.theta));
        }
        let bound = Self::epsilon_bound(k, p, variant);
        if !(self.epsilon >= 0.0 && self.epsilon <= bound) {
            return Err(match variant {
                Variant::RaviartThomas => ParamError::EpsilonRt {
                    eps: self.epsilon,
                    bound,
                },
                Variant::Stabilized => ParamError::EpsilonStabilized {
                    eps: self.epsilon,
                    bound,
                },
            });
        }
        match (self.kind, variant) {
            (EstimatorKind::RaviartThomas, Variant::Stabilized) => {
                Err(ParamError::VariantMismatch {
                    kind: self.kind,
                    needed: "Raviart-Thomas",
                })
            }
            (EstimatorKind::Stabilized, Variant::RaviartThomas) => {
                Err(ParamError::VariantMismatch {
                    kind: self.kind,
                    needed: "stabilized",
                })
            }
            _ => Ok(()),
        }
    }

    /// `ε = 0` drops the positive mesh-size power that the convergence
    /// theory relies on.
    pub fn is_degenerate(&self) -> bool {
        self.epsilon == 0.0
    }
}

/// Contributions to the indicator of one triangle, each already weighted by
/// its power of `|T|`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementEstimate<T> {
    /// Difference of the potential reconstruction and the cell unknown.
    pub volume: T,
    /// `σ − DW(G u)`.
    pub stress: T,
    pub oscillation_f: T,
    pub oscillation_g: T,
    pub dirichlet: T,
    pub jumps: T,
    pub traces: T,
    /// Oscillation of the lower-order data `ζ`.
    pub oscillation_zeta: T,
}

impl<T: Real> ElementEstimate<T> {
    pub fn total(&self) -> T {
        self.volume
            + self.stress
            + self.oscillation_f
            + self.oscillation_g
            + self.dirichlet
            + self.jumps
            + self.traces
            + self.oscillation_zeta
    }
}

#[derive(Clone, Debug)]
pub struct Estimate<T> {
    pub elements: Vec<ElementEstimate<T>>,
    pub total: T,
}

impl<T: Real> Estimate<T> {
    pub fn indicators(&self) -> Vec<T> {
        self.elements.iter().map(ElementEstimate::total).collect()
    }
}

/// L² projection onto `P_k(T)` of a field sampled at quadrature points:
/// component-major coefficients.
fn project_samples<T: Real>(
    space: &HhoSpace<T>,
    t: usize,
    pts: &[[T; 2]],
    wts: &[T],
    values: &[T],
) -> Vec<T> {
    let el = space.element(t);
    let m = space.components();
    let nc = space.n_cell_basis();
    let k = space.degree();
    let mut rhs = vec![T::zero(); m * nc];
    let mut phi = vec![T::zero(); nc];
    for (q, (x, &w)) in pts.iter().zip(wts).enumerate() {
        el.frame.eval(k, *x, &mut phi);
        for c in 0..m {
            for i in 0..nc {
                rhs[c * nc + i] += w * values[q * m + c] * phi[i];
            }
        }
    }
    let lu = el.cell_mass.lu().expect("cell mass matrix is invertible");
    (0..m)
        .flat_map(|c| lu.solve_vec(&rhs[c * nc..(c + 1) * nc]))
        .collect()
}

/// Same on `P_k(F)` for samples along a side at the given line rule.
fn project_side_samples<T: Real>(
    space: &HhoSpace<T>,
    s: usize,
    rule: &LineRule<T>,
    values: &[T],
) -> Vec<T> {
    let m = space.components();
    let nf = space.n_side_basis();
    let k = space.degree();
    let sf = space.side_frame(s);
    let mut rhs = vec![T::zero(); m * nf];
    let mut psi = vec![T::zero(); nf];
    for (q, (&tq, &wq)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        sf.eval(k, tq, &mut psi);
        for c in 0..m {
            for j in 0..nf {
                rhs[c * nf + j] += wq * sf.length * values[q * m + c] * psi[j];
            }
        }
    }
    let lu = space
        .side_mass(s)
        .lu()
        .expect("side mass matrix is invertible");
    (0..m)
        .flat_map(|c| lu.solve_vec(&rhs[c * nf..(c + 1) * nf]))
        .collect()
}

/// `∫ |a|^r` over sampled vectors `a` of length `m`, restricted to the
/// components with `mask[c]`.
fn lp_pow<T: Real>(values: &[T], wts: &[T], m: usize, mask: &[bool], r: T) -> T {
    let two = T::lit(2.0);
    wts.iter()
        .enumerate()
        .map(|(q, &w)| {
            let sq: T = (0..m)
                .filter(|&c| mask[c])
                .map(|c| values[q * m + c].powi(2))
                .sum();
            w * sq.powf(r / two)
        })
        .sum()
}

/// Values at `pts` of the cell polynomial with component-major `coeffs`.
fn cell_poly_values<T: Real>(
    space: &HhoSpace<T>,
    t: usize,
    pts: &[[T; 2]],
    coeffs: &[T],
) -> Vec<T> {
    let el = space.element(t);
    let m = space.components();
    let nc = space.n_cell_basis();
    let mut phi = vec![T::zero(); nc];
    let mut out = Vec::with_capacity(pts.len() * m);
    for x in pts {
        el.frame.eval(space.degree(), *x, &mut phi);
        out.extend((0..m).map(|c| dot(&phi, &coeffs[c * nc..(c + 1) * nc])));
    }
    out
}

/// Values at the nodes of `rule` of the side polynomial with
/// component-major `coeffs`.
fn side_poly_values<T: Real>(
    space: &HhoSpace<T>,
    s: usize,
    rule: &LineRule<T>,
    coeffs: &[T],
) -> Vec<T> {
    let m = space.components();
    let nf = space.n_side_basis();
    let sf = space.side_frame(s);
    let mut psi = vec![T::zero(); nf];
    let mut out = Vec::with_capacity(rule.nodes.len() * m);
    for &tq in &rule.nodes {
        sf.eval(space.degree(), tq, &mut psi);
        out.extend((0..m).map(|c| dot(&psi, &coeffs[c * nf..(c + 1) * nf])));
    }
    out
}

fn sub_assign<T: Real>(a: &mut [T], b: &[T]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= *y;
    }
}

/// Exactness degree of the rules for `|polynomial|^p` terms.
pub fn estimator_degree<T: Real>(problem: &DiscreteProblem<T>) -> usize {
    let k = problem.space().degree();
    let p = problem.growth().ceil().to_usize().unwrap_or(2);
    problem.nonlinear_degree().max(p * (k + 1)) + 2
}

/// Refinement indicators of the discrete solution `u` with discrete stress
/// `sigma` (the projection of `DW(G u)`).
pub fn estimate<T: Real>(
    problem: &DiscreteProblem<T>,
    u: &[T],
    sigma: &FluxField<T>,
    params: &EstimatorParams,
) -> Result<Estimate<T>, ParamError> {
    let space = &**problem.space();
    let mesh = space.mesh();
    let m = space.components();
    let k = space.degree();
    let variant = space.variant();
    let data = problem.data();
    params.validate(k, problem.growth().as_f64(), variant)?;
    match params.kind {
        EstimatorKind::TwoWellExtended if data.lower_order.is_none() => {
            return Err(ParamError::MissingLowerOrder)
        }
        EstimatorKind::FhmModified if m != 2 => return Err(ParamError::ComponentCount(m)),
        _ => {}
    }
    let fhm = params.kind == EstimatorKind::FhmModified;
    let projected = variant == Variant::RaviartThomas;
    let p = if fhm { T::lit(2.0) } else { problem.growth() };
    let pp = p / (p - T::one());
    let eps = T::lit(params.epsilon);
    let half = T::lit(0.5);

    let potential = space.potential_field(u);
    let gradient = space.gradient_field(u);
    let deg = estimator_degree(problem);
    let rule = TriangleRule::<T>::new(deg);
    let data_rule = TriangleRule::<T>::new(problem.data_degree());
    let line = LineRule::<T>::new(deg.max(problem.data_degree()));
    let all = vec![true; m];

    let elements: Vec<ElementEstimate<T>> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let el = space.element(t);
            let area = el.area;
            let mut est = ElementEstimate::default();
            let mut val = vec![T::zero(); m];

            // Potential minus cell unknown.
            let (pts, wts) = rule.on_triangle(&el.points, area);
            let mut diff = vec![T::zero(); pts.len() * m];
            for (q, x) in pts.iter().enumerate() {
                potential.eval(t, *x, &mut diff[q * m..(q + 1) * m]);
            }
            let cells: Vec<T> = (0..m)
                .flat_map(|c| space.cell_coeffs(u, t, c).to_vec())
                .collect();
            if projected {
                let mut coeffs = project_samples(space, t, &pts, &wts, &diff);
                sub_assign(&mut coeffs, &cells);
                diff = cell_poly_values(space, t, &pts, &coeffs);
            } else {
                sub_assign(&mut diff, &cell_poly_values(space, t, &pts, &cells));
            }
            est.volume = area.powf((eps * p - p) * half) * lp_pow(&diff, &wts, m, &all, p);

            if !fhm {
                let mut a = vec![T::zero(); 2 * m];
                let mut dw = vec![T::zero(); 2 * m];
                let mut s = vec![T::zero(); 2 * m];
                let mut acc = T::zero();
                for (x, &w) in pts.iter().zip(&wts) {
                    gradient.eval(t, *x, &mut a);
                    problem.density().derivative(&a, &mut dw);
                    sigma.eval(t, *x, &mut s);
                    let sq: T = s.iter().zip(&dw).map(|(si, di)| (*si - *di).powi(2)).sum();
                    acc += w * sq.powf(pp * half);
                }
                est.stress = area.powf(eps * pp * half) * acc;

                if let Some(f) = &data.source {
                    let (dp, dw) = data_rule.on_triangle_graded(&el.points, area, data.singularity);
                    let mut vals = vec![T::zero(); dp.len() * m];
                    for (q, x) in dp.iter().enumerate() {
                        f(*x, &mut vals[q * m..(q + 1) * m]);
                    }
                    let proj = project_samples(space, t, &dp, &dw, &vals);
                    sub_assign(&mut vals, &cell_poly_values(space, t, &dp, &proj));
                    est.oscillation_f = area.powf(pp * half) * lp_pow(&vals, &dw, m, &all, pp);
                }
            }
            if params.kind == EstimatorKind::TwoWellExtended {
                let zeta = &data.lower_order.as_ref().expect("checked above").zeta;
                let (dp, dw) = data_rule.on_triangle_graded(&el.points, area, data.singularity);
                let mut vals = vec![T::zero(); dp.len() * m];
                for (q, x) in dp.iter().enumerate() {
                    zeta(*x, &mut vals[q * m..(q + 1) * m]);
                }
                let proj = project_samples(space, t, &dp, &dw, &vals);
                sub_assign(&mut vals, &cell_poly_values(space, t, &dp, &proj));
                est.oscillation_zeta = area * lp_pow(&vals, &dw, m, &all, T::lit(2.0));
            }

            // Side terms.
            let side_weight = area.powf((eps * p + T::one() - p) * half);
            for e in 0..3 {
                let s = el.sides[e];
                let side = mesh.side(s);
                let sf = space.side_frame(s);
                let wts: Vec<T> = line.weights.iter().map(|&w| w * sf.length).collect();
                let xs: Vec<[T; 2]> = line.nodes.iter().map(|&tq| sf.point(tq)).collect();
                let mut r_here = vec![T::zero(); xs.len() * m];
                for (q, x) in xs.iter().enumerate() {
                    potential.eval(t, *x, &mut r_here[q * m..(q + 1) * m]);
                }

                let mut trace = r_here.clone();
                let side_coeffs: Vec<T> = (0..m)
                    .flat_map(|c| space.side_coeffs(u, s, c).to_vec())
                    .collect();
                if projected {
                    let mut coeffs = project_side_samples(space, s, &line, &trace);
                    sub_assign(&mut coeffs, &side_coeffs);
                    trace = side_poly_values(space, s, &line, &coeffs);
                } else {
                    sub_assign(&mut trace, &side_poly_values(space, s, &line, &side_coeffs));
                }
                est.traces += side_weight * lp_pow(&trace, &wts, m, &all, p);

                if let Some(other) = side.neighbor {
                    let nb = if other == t { side.owner } else { other };
                    let mut jump = r_here.clone();
                    for (q, x) in xs.iter().enumerate() {
                        potential.eval(nb, *x, &mut val);
                        for c in 0..m {
                            jump[q * m + c] -= val[c];
                        }
                    }
                    est.jumps += side_weight * lp_pow(&jump, &wts, m, &all, p);
                    continue;
                }

                let constrained: Vec<bool> = (0..m).map(|c| side.label.constrains(c)).collect();
                if constrained.iter().any(|&b| b) {
                    let mut res = r_here;
                    if let Some(ud) = &data.dirichlet {
                        for (q, x) in xs.iter().enumerate() {
                            ud(*x, &mut val);
                            for c in 0..m {
                                res[q * m + c] -= val[c];
                            }
                        }
                    }
                    est.dirichlet += side_weight * lp_pow(&res, &wts, m, &constrained, p);
                }
                let natural: Vec<bool> = constrained.iter().map(|&b| !b).collect();
                if !fhm && natural.iter().any(|&b| b) {
                    if let Some(g) = &data.neumann {
                        let normal = side.normal;
                        let mut vals = vec![T::zero(); xs.len() * m];
                        for (q, x) in xs.iter().enumerate() {
                            g(*x, normal, &mut vals[q * m..(q + 1) * m]);
                        }
                        let proj = project_side_samples(space, s, &line, &vals);
                        sub_assign(&mut vals, &side_poly_values(space, s, &line, &proj));
                        est.oscillation_g += area.sqrt() * lp_pow(&vals, &wts, m, &natural, pp);
                    }
                }
            }
            est
        })
        .collect();
    let total = elements.iter().map(ElementEstimate::total).sum();
    Ok(Estimate { elements, total })
}

/// Minimal-cardinality set of indices whose values sum to at least
/// `theta` times the total: the largest values first, ties by index.
/// Returns the empty set when the total vanishes.
pub fn mark_doerfler<T: Real>(values: &[T], theta: T) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let total: T = values.iter().copied().sum();
    if !(total > T::zero()) {
        return Vec::new();
    }
    let goal = theta * total;
    let mut acc = T::zero();
    let mut marked = Vec::new();
    for i in order {
        if acc >= goal {
            break;
        }
        acc += values[i];
        marked.push(i);
    }
    marked
}

/// Whether `x` lies in the closed triangle `p`, up to rounding.
fn contains<T: Real>(p: &[[T; 2]; 3], x: [T; 2]) -> bool {
    let cross = |a: [T; 2], b: [T; 2], c: [T; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    };
    let area = cross(p[0], p[1], p[2]).abs();
    let tol = T::lit(-1e-10) * area;
    (0..3).all(|i| cross(p[i], p[(i + 1) % 3], x) * cross(p[0], p[1], p[2]).signum() >= tol)
}

#[derive(Debug, thiserror::Error)]
pub enum ProlongError {
    #[error(
        "fine mesh is not a refinement of the coarse mesh (triangle {0} has no parent in range)"
    )]
    NotNested(usize),
    #[error("coarse and fine spaces differ in degree or components")]
    SpaceMismatch,
}

/// `I_fine(J u_coarse)` with the Dirichlet unknowns prescribed by `fine`.
pub fn prolong<T: Real>(
    coarse: &HhoSpace<T>,
    u_coarse: &[T],
    fine: &DiscreteProblem<T>,
) -> Result<Vec<T>, ProlongError> {
    let fs = &**fine.space();
    if fs.degree() != coarse.degree() || fs.components() != coarse.components() {
        return Err(ProlongError::SpaceMismatch);
    }
    let fmesh = fs.mesh();
    let nt_coarse = coarse.mesh().n_triangles();
    let cmesh = coarse.mesh();
    let parent = |t: usize| match fmesh.parent(t) {
        Some(pt) if pt < nt_coarse && contains(&cmesh.triangle_points(pt), fmesh.centroid(t)) => {
            Ok(pt)
        }
        _ => Err(ProlongError::NotNested(t)),
    };
    let parents = (0..fmesh.n_triangles())
        .map(parent)
        .collect::<Result<Vec<_>, _>>()?;
    let j = companion(coarse, u_coarse);
    let deg = 2 * coarse.degree() + 4;
    let mut v = vec![T::zero(); fs.ndof()];
    let cells: Vec<Vec<T>> = (0..fmesh.n_triangles())
        .into_par_iter()
        .map(|t| fs.project_cell(t, &|x, out: &mut [T]| j.eval(parents[t], x, out), deg))
        .collect();
    for (t, coeffs) in cells.into_iter().enumerate() {
        let start = fs.cell_dof(t, 0, 0);
        v[start..start + coeffs.len()].copy_from_slice(&coeffs);
    }
    for s in 0..fmesh.n_sides() {
        let pt = parents[fmesh.side(s).owner];
        let coeffs = fs.project_side(s, &|x, out: &mut [T]| j.eval(pt, x, out), deg);
        let start = fs.side_dof(s, 0, 0);
        v[start..start + coeffs.len()].copy_from_slice(&coeffs);
    }
    fine.impose_dirichlet(&mut v);
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefinementMode {
    Adaptive,
    Uniform,
}

#[derive(Clone, Debug)]
pub struct DriverSettings {
    pub degree: usize,
    pub variant: Variant,
    pub mode: RefinementMode,
    pub params: EstimatorParams,
    /// Stop before solving on a mesh with more free unknowns than this.
    pub max_ndof: usize,
    pub max_levels: Option<usize>,
    pub solver: SolverSettings,
    /// Estimators at or below this value count as zero and end the loop.
    pub zero_estimator: f64,
}

/// Everything computed on one level.
#[derive(Debug)]
pub struct LevelOutcome<T: Real> {
    pub level: usize,
    pub problem: Arc<DiscreteProblem<T>>,
    pub solution: DiscreteSolution<T>,
    pub stress: FluxField<T>,
    pub estimate: Estimate<T>,
    /// Wall time of solve and estimate.
    pub seconds: f64,
}

impl<T: Real> LevelOutcome<T> {
    pub fn mesh(&self) -> &Triangulation<T> {
        self.problem.space().mesh()
    }

    pub fn ndof(&self) -> usize {
        self.problem.n_free()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxNdof,
    MaxLevels,
    ZeroEstimator,
    /// The callback asked to stop.
    Requested,
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError<E> {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Prolong(#[from] ProlongError),
    #[error("optimizer did not converge on level {level} (gradient norm {gradient_norm:e})")]
    NotConverged { level: usize, gradient_norm: f64 },
    #[error("{0}")]
    Callback(E),
}

/// Number of free unknowns of the degree-`k` space with `m` components on
/// `mesh`.
pub fn free_dof_count<T: Real>(mesh: &Triangulation<T>, k: usize, m: usize) -> usize {
    let nc = (k + 1) * (k + 2) / 2;
    let nf = k + 1;
    let free_sides: usize = mesh
        .sides()
        .iter()
        .map(|s| (0..m).filter(|&c| !s.label.constrains(c)).count())
        .sum();
    mesh.n_triangles() * m * nc + free_sides * nf
}

/// Runs the adaptive (or uniform) loop on `benchmark`. `on_level` sees every
/// level in order, including a final level whose optimizer failed to
/// converge; returning `Ok(false)` stops the loop.
pub fn run<T: Real, E>(
    benchmark: &Benchmark<T>,
    settings: &DriverSettings,
    mut on_level: impl FnMut(&LevelOutcome<T>) -> Result<bool, E>,
) -> Result<StopReason, DriverError<E>> {
    let k = settings.degree;
    let m = benchmark.components();
    settings
        .params
        .validate(k, benchmark.density.growth().as_f64(), settings.variant)?;
    let mut mesh = Arc::new(benchmark.initial_mesh.clone());
    let mut previous: Option<(Arc<HhoSpace<T>>, Vec<T>)> = None;
    let mut level = 0;
    loop {
        let start = Instant::now();
        let space = Arc::new(HhoSpace::new(mesh.clone(), k, m, settings.variant));
        let problem = Arc::new(DiscreteProblem::new(
            space.clone(),
            benchmark.density.clone(),
            benchmark.data.clone(),
        )?);
        let initial = match &previous {
            None => problem.constant_guess(T::one()),
            Some((coarse, u)) => prolong(coarse, u, &problem)?,
        };
        let solution = problem.minimize(&initial, &settings.solver);
        let stress = problem.stress(&solution.u);
        let estimate = estimate(&problem, &solution.u, &stress, &settings.params)?;
        let outcome = LevelOutcome {
            level,
            problem,
            solution,
            stress,
            estimate,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "level {level}: ndof {} energy {:e} estimator {:e} ({} iterations)",
            outcome.ndof(),
            outcome.solution.energy,
            outcome.estimate.total,
            outcome.solution.iterations
        );
        let go_on = on_level(&outcome).map_err(DriverError::Callback)?;
        if !outcome.solution.converged {
            return Err(DriverError::NotConverged {
                level,
                gradient_norm: outcome.solution.gradient_norm.as_f64(),
            });
        }
        if !go_on {
            return Ok(StopReason::Requested);
        }
        if outcome.estimate.total <= T::lit(settings.zero_estimator) {
            return Ok(StopReason::ZeroEstimator);
        }
        if settings.max_levels.is_some_and(|n| level + 1 >= n) {
            return Ok(StopReason::MaxLevels);
        }
        let next = match settings.mode {
            RefinementMode::Uniform => mesh.refine_uniform(),
            RefinementMode::Adaptive => {
                let marked = mark_doerfler(
                    &outcome.estimate.indicators(),
                    T::lit(settings.params.theta),
                );
                mesh.refine(&marked)
                    .expect("marked indices come from this mesh")
            }
        };
        if free_dof_count(&next, k, m) > settings.max_ndof {
            return Ok(StopReason::MaxNdof);
        }
        previous = Some((space, outcome.solution.u));
        mesh = Arc::new(next);
        level += 1;
    }
}

#[cfg(test)]
mod tests;
