//! Discrete energy over hybrid unknowns, its derivatives, and minimization.
//!
//! Dirichlet unknowns are eliminated: the optimizer works on the vector of
//! free unknowns, and [`DiscreteProblem::expand`] inserts the prescribed
//! values.

pub mod optimize;

use crate::densities::EnergyDensity;
use crate::hho::{FluxField, HhoSpace, Variant};
use crate::linalg::{CholeskySolver, DMat, LinalgError, SymmetricPattern, NONE};
use crate::poly::{eval_flux, LineRule, TriangleRule};
use crate::real::{dot, norm_sq, Real};
use optimize::{minimize, Objective, SolverSettings};
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

/// Vector-valued function of a point; writes one value per component.
pub type Field<T> = Arc<dyn Fn([T; 2], &mut [T]) + Send + Sync>;

/// Boundary data depending on the point and the outward unit normal.
pub type BoundaryField<T> = Arc<dyn Fn([T; 2], [T; 2], &mut [T]) + Send + Sync>;

/// Data of the continuous problem. Absent entries are zero.
#[derive(Clone, Default)]
pub struct ProblemData<T> {
    /// Volume load `f`.
    pub source: Option<Field<T>>,
    /// Neumann traction `g`, applied on boundary sides to the components
    /// that are not constrained there.
    pub neumann: Option<BoundaryField<T>>,
    /// Dirichlet values `u_D`.
    pub dirichlet: Option<Field<T>>,
    /// Adds `c‖ζ − v_T‖²/2` to the energy.
    pub lower_order: Option<LowerOrder<T>>,
    /// Mesh vertex at which the data may be singular; volume integrals of
    /// data on triangles touching it use graded quadrature.
    pub singularity: Option<[T; 2]>,
}

/// Quadratic lower-order term `c‖ζ − v_T‖²/2` with weight `c > 0`.
#[derive(Clone)]
pub struct LowerOrder<T> {
    pub zeta: Field<T>,
    pub weight: T,
}

impl<T: Real> LowerOrder<T> {
    /// `cζ`, the load the term exerts at `v_T = 0`.
    pub fn weighted(&self) -> Field<T> {
        let (zeta, c) = (self.zeta.clone(), self.weight);
        Arc::new(move |x, out: &mut [T]| {
            zeta(x, out);
            out.iter_mut().for_each(|o| *o *= c);
        })
    }
}

impl<T> fmt::Debug for ProblemData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("source", &self.source.is_some())
            .field("neumann", &self.neumann.is_some())
            .field("dirichlet", &self.dirichlet.is_some())
            .field("lower_order", &self.lower_order.is_some())
            .field("singularity", &self.singularity.is_some())
            .finish()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("density has {density} components but the space has {space}")]
    ComponentMismatch { density: usize, space: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Split of the discrete energy into its contributions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts<T> {
    /// `∫ W(G v)`.
    pub bulk: T,
    /// `∫ f·v_T + ∫_{Γ_N} g·v_F`.
    pub load: T,
    /// `s(v; v)`; zero without stabilization.
    pub stabilization: T,
    /// `c‖ζ − v_T‖²/2`; zero without the lower-order term.
    pub lower_order: T,
}

#[derive(Clone, Debug)]
pub struct DiscreteSolution<T> {
    pub u: Vec<T>,
    pub energy: T,
    pub iterations: usize,
    pub gradient_norm: T,
    pub converged: bool,
    pub energy_history: Vec<T>,
}

/// Gradient reconstruction evaluated at the quadrature points of one
/// triangle: `ops[(q * 2 + d) * nl + l]` is component `d` of `G` applied to
/// local unknown `l` at point `q`.
#[derive(Clone, Debug)]
struct BulkQuad<T> {
    weights: Vec<T>,
    ops: Vec<T>,
}

/// Stabilization residual evaluated at side quadrature points; weights
/// include `h_F^{1-p}`.
#[derive(Clone, Debug)]
struct StabQuad<T> {
    weights: Vec<T>,
    rows: Vec<T>,
}

pub struct DiscreteProblem<T> {
    space: Arc<HhoSpace<T>>,
    density: Arc<dyn EnergyDensity<T>>,
    data: ProblemData<T>,
    p: T,
    nonlinear_degree: usize,
    data_degree: usize,
    /// Global unknown to free index, or [`NONE`] for Dirichlet unknowns.
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
    /// Prescribed values on Dirichlet unknowns, zero elsewhere.
    lifting: Vec<T>,
    load: Vec<T>,
    zeta_load: Vec<T>,
    zeta_sq: T,
    bulk: Vec<BulkQuad<T>>,
    stab: Vec<StabQuad<T>>,
    cliques: Vec<Vec<usize>>,
    pattern: SymmetricPattern,
    solver: CholeskySolver,
    metric: Vec<T>,
}

impl<T: Real> fmt::Debug for DiscreteProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteProblem")
            .field("density", &self.density)
            .field("data", &self.data)
            .field("ndof", &self.space.ndof())
            .field("free", &self.free_dofs.len())
            .finish()
    }
}

impl<T: Real> DiscreteProblem<T> {
    pub fn new(
        space: Arc<HhoSpace<T>>,
        density: Arc<dyn EnergyDensity<T>>,
        data: ProblemData<T>,
    ) -> Result<Self, SolverError> {
        if density.components() != space.components() {
            return Err(SolverError::ComponentMismatch {
                density: density.components(),
                space: space.components(),
            });
        }
        let k = space.degree();
        let p = density.growth();
        let nonlinear_degree = (density.quadrature_exponent() * (k + 1)).max(2 * k + 2);
        let data_degree = 2 * k + 10;
        let mesh = space.mesh();
        let m = space.components();
        let nf = space.n_side_basis();
        let ndof = space.ndof();

        let mut free_index = vec![0usize; ndof];
        let mut lifting = vec![T::zero(); ndof];
        for s in 0..mesh.n_sides() {
            let label = mesh.side(s).label;
            if !label.constrains_any() {
                continue;
            }
            let values = match &data.dirichlet {
                Some(u_d) => space.project_side(s, u_d.as_ref(), data_degree),
                None => vec![T::zero(); m * nf],
            };
            for c in (0..m).filter(|&c| label.constrains(c)) {
                for j in 0..nf {
                    let g = space.side_dof(s, c, j);
                    free_index[g] = NONE;
                    lifting[g] = values[c * nf + j];
                }
            }
        }
        let mut free_dofs = Vec::new();
        for (g, slot) in free_index.iter_mut().enumerate() {
            if *slot != NONE {
                *slot = free_dofs.len();
                free_dofs.push(g);
            }
        }

        let (load, zeta_load, zeta_sq) = assemble_data(&space, &data, data_degree);
        let bulk = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| bulk_quad(&space, t, nonlinear_degree))
            .collect();
        let stab = if space.variant() == Variant::Stabilized {
            (0..mesh.n_triangles())
                .into_par_iter()
                .map(|t| stab_quad(&space, t, nonlinear_degree, p))
                .collect()
        } else {
            Vec::new()
        };
        let cliques: Vec<Vec<usize>> = (0..mesh.n_triangles())
            .map(|t| {
                space
                    .element_dofs(t)
                    .into_iter()
                    .map(|g| free_index[g])
                    .collect()
            })
            .collect();
        let pattern = SymmetricPattern::from_cliques(free_dofs.len(), &cliques);
        let solver = CholeskySolver::new(&pattern)?;
        let mut problem = Self {
            space,
            density,
            data,
            p,
            nonlinear_degree,
            data_degree,
            free_index,
            free_dofs,
            lifting,
            load,
            zeta_load,
            zeta_sq,
            bulk,
            stab,
            cliques,
            pattern,
            solver,
            metric: Vec::new(),
        };
        problem.metric = problem.assemble_metric();
        Ok(problem)
    }

    pub fn space(&self) -> &Arc<HhoSpace<T>> {
        &self.space
    }

    pub fn density(&self) -> &Arc<dyn EnergyDensity<T>> {
        &self.density
    }

    pub fn data(&self) -> &ProblemData<T> {
        &self.data
    }

    pub fn growth(&self) -> T {
        self.p
    }

    /// Exactness degree of the rules used for nonlinear integrands.
    pub fn nonlinear_degree(&self) -> usize {
        self.nonlinear_degree
    }

    /// Exactness degree of the rules used for data integrals.
    pub fn data_degree(&self) -> usize {
        self.data_degree
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn is_free(&self, g: usize) -> bool {
        self.free_index[g] != NONE
    }

    /// Full vector with the free unknowns `x` and the Dirichlet values.
    pub fn expand(&self, x: &[T]) -> Vec<T> {
        let mut v = self.lifting.clone();
        for (&g, &xi) in self.free_dofs.iter().zip(x) {
            v[g] = xi;
        }
        v
    }

    pub fn restrict(&self, v: &[T]) -> Vec<T> {
        self.free_dofs.iter().map(|&g| v[g]).collect()
    }

    /// Overwrites the Dirichlet unknowns of `v` with the prescribed values.
    pub fn impose_dirichlet(&self, v: &mut [T]) {
        for (g, slot) in self.free_index.iter().enumerate() {
            if *slot == NONE {
                v[g] = self.lifting[g];
            }
        }
    }

    /// Every free unknown equal to `value`, Dirichlet unknowns prescribed.
    pub fn constant_guess(&self, value: T) -> Vec<T> {
        let mut v = vec![value; self.space.ndof()];
        self.impose_dirichlet(&mut v);
        v
    }

    /// Load functional `v ↦ ∫ f·v_T + ∫_{Γ_N} g·v_F` as a vector.
    pub fn load_vector(&self) -> &[T] {
        &self.load
    }

    pub fn energy_parts(&self, v: &[T]) -> EnergyParts<T> {
        let space = &*self.space;
        let m = space.components();
        let parts: Vec<(T, T)> = (0..space.mesh().n_triangles())
            .into_par_iter()
            .map(|t| {
                let loc: Vec<T> = space.element_dofs(t).into_iter().map(|g| v[g]).collect();
                let bulk = self.element_bulk(t, &loc, None, None);
                let stab = if self.stab.is_empty() {
                    T::zero()
                } else {
                    self.element_stab(t, &loc, m, None, None) * self.p
                };
                (bulk, stab)
            })
            .collect();
        let bulk = parts.iter().map(|x| x.0).sum();
        let stabilization = parts.iter().map(|x| x.1).sum();
        let lower_order = if self.data.lower_order.is_some() {
            self.lower_order_energy(v)
        } else {
            T::zero()
        };
        EnergyParts {
            bulk,
            load: dot(&self.load, v),
            stabilization,
            lower_order,
        }
    }

    /// `s(u; v) = Σ h_F^{1-p} ∫_F |S u|^{p-2} S u · S v`, the derivative of
    /// `s(u; u)/p` in direction `v`; zero without stabilization.
    pub fn stabilization_form(&self, u: &[T], v: &[T]) -> T {
        if self.stab.is_empty() {
            return T::zero();
        }
        let space = &*self.space;
        let m = space.components();
        let nl = space.n_local();
        let two = T::lit(2.0);
        (0..space.mesh().n_triangles())
            .into_par_iter()
            .map(|t| {
                let dofs = space.element_dofs(t);
                let lu: Vec<T> = dofs.iter().map(|&g| u[g]).collect();
                let lv: Vec<T> = dofs.iter().map(|&g| v[g]).collect();
                let sq = &self.stab[t];
                let mut acc = T::zero();
                for (r, &w) in sq.weights.iter().enumerate() {
                    let row = &sq.rows[r * nl..(r + 1) * nl];
                    let yu: Vec<T> = (0..m)
                        .map(|c| dot(row, &lu[c * nl..(c + 1) * nl]))
                        .collect();
                    let yv: Vec<T> = (0..m)
                        .map(|c| dot(row, &lv[c * nl..(c + 1) * nl]))
                        .collect();
                    let y2 = norm_sq(&yu);
                    if y2 > T::zero() {
                        acc += w * y2.powf((self.p - two) / two) * dot(&yu, &yv);
                    }
                }
                acc
            })
            .sum()
    }

    /// `E_ℓ(v)` for a full vector `v`.
    pub fn energy(&self, v: &[T]) -> T {
        let e = self.energy_parts(v);
        e.bulk - e.load + e.stabilization / self.p + e.lower_order
    }

    /// `E_ℓ(v)` and its gradient with respect to every unknown.
    pub fn energy_gradient_full(&self, v: &[T]) -> (T, Vec<T>) {
        let space = &*self.space;
        let m = space.components();
        let locals: Vec<(T, Vec<T>)> = (0..space.mesh().n_triangles())
            .into_par_iter()
            .map(|t| {
                let loc: Vec<T> = space.element_dofs(t).into_iter().map(|g| v[g]).collect();
                let mut grad = vec![T::zero(); loc.len()];
                let mut e = self.element_bulk(t, &loc, Some(&mut grad), None);
                if !self.stab.is_empty() {
                    e += self.element_stab(t, &loc, m, Some(&mut grad), None);
                }
                (e, grad)
            })
            .collect();
        let mut g: Vec<T> = self.load.iter().map(|&l| -l).collect();
        let mut energy = -dot(&self.load, v);
        for (t, (e, grad)) in locals.into_iter().enumerate() {
            energy += e;
            for (gi, val) in space.element_dofs(t).into_iter().zip(grad) {
                g[gi] += val;
            }
        }
        if self.data.lower_order.is_some() {
            energy += self.lower_order_energy(v);
            self.lower_order_gradient(v, &mut g);
        }
        (energy, g)
    }

    /// Hessian of the energy on the free unknowns at the full vector `v`.
    pub fn hessian_full(&self, v: &[T]) -> Vec<T> {
        let space = &*self.space;
        let m = space.components();
        let locals: Vec<Vec<T>> = (0..space.mesh().n_triangles())
            .into_par_iter()
            .map(|t| {
                let loc: Vec<T> = space.element_dofs(t).into_iter().map(|g| v[g]).collect();
                let n = loc.len();
                let mut h = vec![T::zero(); n * n];
                self.element_bulk(t, &loc, None, Some(&mut h));
                if !self.stab.is_empty() {
                    self.element_stab(t, &loc, m, None, Some(&mut h));
                }
                if self.data.lower_order.is_some() {
                    self.add_cell_mass(t, &mut h);
                }
                h
            })
            .collect();
        let mut values = vec![T::zero(); self.pattern.nnz()];
        for (t, h) in locals.iter().enumerate() {
            self.pattern.add_local(&mut values, t, &self.cliques[t], h);
        }
        values
    }

    /// Discrete stress: the per-triangle L² projection of `DW(G u)` onto the
    /// gradient space, integrated with the nonlinear rule.
    pub fn stress(&self, u: &[T]) -> FluxField<T> {
        let space = &*self.space;
        let m = space.components();
        let ns = space.n_flux();
        let k = space.degree();
        let flux = space.variant().flux_space();
        let rule = TriangleRule::<T>::new(self.nonlinear_degree);
        let mut coeffs = vec![T::zero(); space.mesh().n_triangles() * m * ns];
        coeffs
            .par_chunks_mut(m * ns)
            .enumerate()
            .for_each(|(t, out)| {
                let el = space.element(t);
                let loc: Vec<T> = space.element_dofs(t).into_iter().map(|g| u[g]).collect();
                let (pts, _) = rule.on_triangle(&el.points, el.area);
                let bq = &self.bulk[t];
                let nl = space.n_local();
                let mut a = vec![T::zero(); 2 * m];
                let mut dw = vec![T::zero(); 2 * m];
                let mut tau = vec![[T::zero(); 2]; ns];
                let mut rhs = vec![T::zero(); m * ns];
                for (q, x) in pts.iter().enumerate() {
                    eval_at_point(&bq.ops, q, nl, m, &loc, &mut a);
                    self.density.derivative(&a, &mut dw);
                    eval_flux(flux, &el.frame, k, *x, &mut tau);
                    let w = bq.weights[q];
                    for c in 0..m {
                        for j in 0..ns {
                            rhs[c * ns + j] +=
                                w * (dw[2 * c] * tau[j][0] + dw[2 * c + 1] * tau[j][1]);
                        }
                    }
                }
                let lu = el.flux_mass.lu().expect("flux mass matrix is invertible");
                for c in 0..m {
                    out[c * ns..(c + 1) * ns]
                        .copy_from_slice(&lu.solve_vec(&rhs[c * ns..(c + 1) * ns]));
                }
            });
        FluxField {
            space: flux,
            degree: k,
            components: m,
            frames: (0..space.mesh().n_triangles())
                .map(|t| space.element(t).frame)
                .collect(),
            coeffs,
        }
    }

    /// Minimizes the energy starting from the full vector `initial`, whose
    /// Dirichlet unknowns are overwritten with the prescribed values.
    pub fn minimize(&self, initial: &[T], settings: &SolverSettings) -> DiscreteSolution<T> {
        let x0 = self.restrict(initial);
        let (x, report) = minimize(self, x0, settings);
        DiscreteSolution {
            u: self.expand(&x),
            energy: report.energy,
            iterations: report.iterations,
            gradient_norm: report.gradient_norm,
            converged: report.converged,
            energy_history: report.energy_history,
        }
    }

    /// Bulk energy of one triangle; optionally accumulates the local
    /// gradient and Hessian (component-major local unknowns).
    fn element_bulk(
        &self,
        t: usize,
        loc: &[T],
        mut grad: Option<&mut [T]>,
        mut hess: Option<&mut [T]>,
    ) -> T {
        let bq = &self.bulk[t];
        let m = self.space.components();
        let nl = self.space.n_local();
        let n = m * nl;
        let mut a = vec![T::zero(); 2 * m];
        let mut dw = vec![T::zero(); 2 * m];
        let mut d2w = vec![T::zero(); 4 * m * m];
        let mut z = vec![T::zero(); 2 * m * n];
        let mut energy = T::zero();
        for (q, &w) in bq.weights.iter().enumerate() {
            eval_at_point(&bq.ops, q, nl, m, loc, &mut a);
            energy += w * self.density.value(&a);
            let op = &bq.ops[q * 2 * nl..(q + 1) * 2 * nl];
            if let Some(g) = grad.as_deref_mut() {
                self.density.derivative(&a, &mut dw);
                for c in 0..m {
                    for l in 0..nl {
                        g[c * nl + l] += w * (op[l] * dw[2 * c] + op[nl + l] * dw[2 * c + 1]);
                    }
                }
            }
            if let Some(h) = hess.as_deref_mut() {
                self.density.hessian(&a, &mut d2w);
                // z[(r, (c', l'))] = Σ_{d'} D²W[r, 2c'+d'] op[d'][l']
                for r in 0..2 * m {
                    for c2 in 0..m {
                        let h0 = d2w[r * 2 * m + 2 * c2];
                        let h1 = d2w[r * 2 * m + 2 * c2 + 1];
                        for l2 in 0..nl {
                            z[r * n + c2 * nl + l2] = h0 * op[l2] + h1 * op[nl + l2];
                        }
                    }
                }
                for c in 0..m {
                    for l in 0..nl {
                        let (o0, o1) = (w * op[l], w * op[nl + l]);
                        let row = &mut h[(c * nl + l) * n..(c * nl + l + 1) * n];
                        let z0 = &z[(2 * c) * n..(2 * c + 1) * n];
                        let z1 = &z[(2 * c + 1) * n..(2 * c + 2) * n];
                        for j in 0..n {
                            row[j] += o0 * z0[j] + o1 * z1[j];
                        }
                    }
                }
            }
        }
        energy
    }

    /// `s_T(v; v)/p` on one triangle with optional derivatives.
    fn element_stab(
        &self,
        t: usize,
        loc: &[T],
        m: usize,
        mut grad: Option<&mut [T]>,
        mut hess: Option<&mut [T]>,
    ) -> T {
        let sq = &self.stab[t];
        let nl = self.space.n_local();
        let n = m * nl;
        let two = T::lit(2.0);
        let p = self.p;
        let mut y = vec![T::zero(); m];
        let mut energy = T::zero();
        for (r, &w) in sq.weights.iter().enumerate() {
            let row = &sq.rows[r * nl..(r + 1) * nl];
            for c in 0..m {
                y[c] = dot(row, &loc[c * nl..(c + 1) * nl]);
            }
            let y2 = norm_sq(&y);
            energy += w * y2.powf(p / two) / p;
            let f = if y2 > T::zero() {
                y2.powf((p - two) / two)
            } else if p > two {
                T::zero()
            } else {
                T::one()
            };
            if let Some(g) = grad.as_deref_mut() {
                for c in 0..m {
                    for l in 0..nl {
                        g[c * nl + l] += w * f * y[c] * row[l];
                    }
                }
            }
            if let Some(h) = hess.as_deref_mut() {
                let curv = if y2 > T::zero() {
                    (p - two) * f / y2
                } else {
                    T::zero()
                };
                for c in 0..m {
                    for c2 in 0..m {
                        let mut coef = curv * y[c] * y[c2];
                        if c == c2 {
                            coef += f;
                        }
                        let coef = w * coef;
                        for l in 0..nl {
                            let base = (c * nl + l) * n + c2 * nl;
                            for l2 in 0..nl {
                                h[base + l2] += coef * row[l] * row[l2];
                            }
                        }
                    }
                }
            }
        }
        energy
    }

    fn add_cell_mass(&self, t: usize, h: &mut [T]) {
        let space = &*self.space;
        let m = space.components();
        let nl = space.n_local();
        let n = m * nl;
        let mass = &space.element(t).cell_mass;
        let w = self.lower_order_weight();
        for c in 0..m {
            for i in 0..mass.rows() {
                for j in 0..mass.cols() {
                    h[(c * nl + i) * n + c * nl + j] += w * mass[(i, j)];
                }
            }
        }
    }

    fn lower_order_energy(&self, v: &[T]) -> T {
        let space = &*self.space;
        let m = space.components();
        let quad: T = (0..space.mesh().n_triangles())
            .map(|t| {
                let mass = &space.element(t).cell_mass;
                (0..m)
                    .map(|c| {
                        let vc = space.cell_coeffs(v, t, c);
                        let mv = mass.mul_vec(vc);
                        dot(vc, &mv)
                    })
                    .sum::<T>()
            })
            .sum();
        let half = T::lit(0.5);
        self.lower_order_weight()
            * (half * quad - dot(&self.zeta_load, &v[..self.zeta_load.len()]) + half * self.zeta_sq)
    }

    fn lower_order_weight(&self) -> T {
        self.data
            .lower_order
            .as_ref()
            .map_or(T::zero(), |l| l.weight)
    }

    fn lower_order_gradient(&self, v: &[T], g: &mut [T]) {
        let space = &*self.space;
        let m = space.components();
        let w = self.lower_order_weight();
        for t in 0..space.mesh().n_triangles() {
            let mass = &space.element(t).cell_mass;
            for c in 0..m {
                let mv = mass.mul_vec(space.cell_coeffs(v, t, c));
                let start = space.cell_dof(t, c, 0);
                for (i, val) in mv.into_iter().enumerate() {
                    g[start + i] += w * val;
                }
            }
        }
        for (gi, &z) in g.iter_mut().zip(&self.zeta_load) {
            *gi -= w * z;
        }
    }

    /// Hessian of `½∫|G v|²` (plus the quadratic stabilization and the
    /// lower-order mass when present) on the free unknowns.
    fn assemble_metric(&self) -> Vec<T> {
        let space = &*self.space;
        let m = space.components();
        let nl = space.n_local();
        let n = m * nl;
        let mut values = vec![T::zero(); self.pattern.nnz()];
        for t in 0..space.mesh().n_triangles() {
            let el = space.element(t);
            let stiff = el.gradient.tr_matmul(&el.flux_mass.matmul(&el.gradient));
            let mut h = vec![T::zero(); n * n];
            for c in 0..m {
                for i in 0..nl {
                    for j in 0..nl {
                        h[(c * nl + i) * n + c * nl + j] = stiff[(i, j)];
                    }
                }
            }
            for (e, s) in el.stabilization.iter().enumerate() {
                let side = space.mesh().side(el.sides[e]);
                let mf = space.side_mass(el.sides[e]);
                let mut q = s.tr_matmul(&mf.matmul(s));
                q.scale(T::one() / side.length);
                for c in 0..m {
                    for i in 0..nl {
                        for j in 0..nl {
                            h[(c * nl + i) * n + c * nl + j] += q[(i, j)];
                        }
                    }
                }
            }
            if self.data.lower_order.is_some() {
                self.add_cell_mass(t, &mut h);
            }
            self.pattern.add_local(&mut values, t, &self.cliques[t], &h);
        }
        values
    }
}

impl<T: Real> Objective<T> for DiscreteProblem<T> {
    fn dim(&self) -> usize {
        self.free_dofs.len()
    }

    fn energy(&self, x: &[T]) -> T {
        DiscreteProblem::energy(self, &self.expand(x))
    }

    fn energy_gradient(&self, x: &[T], g: &mut [T]) -> T {
        let (e, full) = self.energy_gradient_full(&self.expand(x));
        for (gi, &d) in g.iter_mut().zip(&self.free_dofs) {
            *gi = full[d];
        }
        e
    }

    fn pattern(&self) -> &SymmetricPattern {
        &self.pattern
    }

    fn hessian(&self, x: &[T]) -> Vec<T> {
        self.hessian_full(&self.expand(x))
    }

    fn metric(&self) -> &[T] {
        &self.metric
    }

    fn linear_solver(&self) -> &CholeskySolver {
        &self.solver
    }
}

fn eval_at_point<T: Real>(ops: &[T], q: usize, nl: usize, m: usize, loc: &[T], a: &mut [T]) {
    let op = &ops[q * 2 * nl..(q + 1) * 2 * nl];
    for c in 0..m {
        let lc = &loc[c * nl..(c + 1) * nl];
        a[2 * c] = dot(&op[..nl], lc);
        a[2 * c + 1] = dot(&op[nl..], lc);
    }
}

fn bulk_quad<T: Real>(space: &HhoSpace<T>, t: usize, degree: usize) -> BulkQuad<T> {
    let el = space.element(t);
    let k = space.degree();
    let ns = space.n_flux();
    let nl = space.n_local();
    let flux = space.variant().flux_space();
    let rule = TriangleRule::<T>::new(degree);
    let (pts, weights) = rule.on_triangle(&el.points, el.area);
    let mut tau = vec![[T::zero(); 2]; ns];
    let mut ops = vec![T::zero(); pts.len() * 2 * nl];
    for (q, x) in pts.iter().enumerate() {
        eval_flux(flux, &el.frame, k, *x, &mut tau);
        for d in 0..2 {
            let row = &mut ops[(q * 2 + d) * nl..(q * 2 + d + 1) * nl];
            for j in 0..ns {
                let tj = tau[j][d];
                for (r, &gv) in row.iter_mut().zip(el.gradient.row(j)) {
                    *r += tj * gv;
                }
            }
        }
    }
    BulkQuad { weights, ops }
}

fn stab_quad<T: Real>(space: &HhoSpace<T>, t: usize, degree: usize, p: T) -> StabQuad<T> {
    let el = space.element(t);
    let k = space.degree();
    let nf = space.n_side_basis();
    let nl = space.n_local();
    let rule = LineRule::<T>::new(degree);
    let mut psi = vec![T::zero(); nf];
    let mut weights = Vec::with_capacity(3 * rule.len());
    let mut rows = Vec::with_capacity(3 * rule.len() * nl);
    for e in 0..3 {
        let sf = &el.side_frames[e];
        let scale = sf.length.powf(T::one() - p) * sf.length;
        let s: &DMat<T> = &el.stabilization[e];
        for (&tq, &wq) in rule.nodes.iter().zip(&rule.weights) {
            sf.eval(k, tq, &mut psi);
            weights.push(wq * scale);
            let mut row = vec![T::zero(); nl];
            s.tr_mul_vec_add(&psi, &mut row);
            rows.extend(row);
        }
    }
    StabQuad { weights, rows }
}

/// Load vector, lower-order load and `∫ζ²`.
fn assemble_data<T: Real>(
    space: &HhoSpace<T>,
    data: &ProblemData<T>,
    degree: usize,
) -> (Vec<T>, Vec<T>, T) {
    let mesh = space.mesh();
    let m = space.components();
    let k = space.degree();
    let nc = space.n_cell_basis();
    let nf = space.n_side_basis();
    let mut load = vec![T::zero(); space.ndof()];
    let mut zeta_load = Vec::new();
    let mut zeta_sq = T::zero();
    let tri = TriangleRule::<T>::new(degree);
    let cell_moments = |f: &Field<T>| -> (Vec<T>, T) {
        let per: Vec<(Vec<T>, T)> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let el = space.element(t);
                let (pts, wts) = tri.on_triangle_graded(&el.points, el.area, data.singularity);
                let mut phi = vec![T::zero(); nc];
                let mut val = vec![T::zero(); m];
                let mut out = vec![T::zero(); m * nc];
                let mut sq = T::zero();
                for (x, &w) in pts.iter().zip(&wts) {
                    f(*x, &mut val);
                    el.frame.eval(k, *x, &mut phi);
                    sq += w * norm_sq(&val);
                    for c in 0..m {
                        for i in 0..nc {
                            out[c * nc + i] += w * val[c] * phi[i];
                        }
                    }
                }
                (out, sq)
            })
            .collect();
        let sq = per.iter().map(|x| x.1).sum();
        (per.into_iter().flat_map(|x| x.0).collect(), sq)
    };
    if let Some(f) = &data.source {
        let (moments, _) = cell_moments(f);
        load[..moments.len()].copy_from_slice(&moments);
    }
    if let Some(lower) = &data.lower_order {
        let (moments, sq) = cell_moments(&lower.zeta);
        zeta_load = moments;
        zeta_sq = sq;
    }
    if let Some(g) = &data.neumann {
        let line = LineRule::<T>::new(degree);
        let mut psi = vec![T::zero(); nf];
        let mut val = vec![T::zero(); m];
        for s in 0..mesh.n_sides() {
            let side = mesh.side(s);
            if !side.label.is_boundary() {
                continue;
            }
            let free: Vec<usize> = (0..m).filter(|&c| !side.label.constrains(c)).collect();
            if free.is_empty() {
                continue;
            }
            let sf = space.side_frame(s);
            for (&tq, &wq) in line.nodes.iter().zip(&line.weights) {
                let w = wq * sf.length;
                g(sf.point(tq), side.normal, &mut val);
                sf.eval(k, tq, &mut psi);
                for &c in &free {
                    for j in 0..nf {
                        load[space.side_dof(s, c, j)] += w * val[c] * psi[j];
                    }
                }
            }
        }
    }
    (load, zeta_load, zeta_sq)
}
