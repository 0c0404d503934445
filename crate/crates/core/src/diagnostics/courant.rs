//! Conforming piecewise-affine (Courant) discretization of the same
//! minimization problem. Used as a reference: a conforming method cannot go
//! below the infimum over Lipschitz functions.

use crate::densities::EnergyDensity;
use crate::linalg::{CholeskySolver, LinalgError, SymmetricPattern, NONE};
use crate::mesh::Triangulation;
use crate::poly::{LineRule, TriangleRule};
use crate::real::Real;
use crate::solver::optimize::SolverSettings;
use crate::solver::optimize::{minimize, Objective, OptimizeReport};
use crate::solver::{ProblemData, SolverError};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum CourantError {
    #[error("the conforming reference does not support a lower-order term")]
    LowerOrder,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Nodal unknowns `vertex * m + c`.
pub struct CourantProblem<T> {
    mesh: Arc<Triangulation<T>>,
    density: Arc<dyn EnergyDensity<T>>,
    m: usize,
    /// Constant gradients of the barycentric coordinates per triangle.
    shape: Vec<[[T; 2]; 3]>,
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
    lifting: Vec<T>,
    load: Vec<T>,
    cliques: Vec<Vec<usize>>,
    pattern: SymmetricPattern,
    solver: CholeskySolver,
    metric: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct CourantSolution<T> {
    pub u: Vec<T>,
    pub energy: T,
    pub report: OptimizeReport<T>,
}

fn shape_gradients<T: Real>(p: &[[T; 2]; 3]) -> [[T; 2]; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[T::zero(); 2]; 3];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        g[i] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    g
}

impl<T: Real> CourantProblem<T> {
    pub fn new(
        mesh: Arc<Triangulation<T>>,
        density: Arc<dyn EnergyDensity<T>>,
        data: &ProblemData<T>,
    ) -> Result<Self, CourantError> {
        if data.lower_order.is_some() {
            return Err(CourantError::LowerOrder);
        }
        let m = density.components();
        let nv = mesh.n_vertices();
        let n = nv * m;
        let mut free_index = vec![0usize; n];
        let mut lifting = vec![T::zero(); n];
        let mut value = vec![T::zero(); m];
        for side in mesh.sides().iter().filter(|s| s.label.constrains_any()) {
            for &v in &side.vertices {
                if let Some(ud) = &data.dirichlet {
                    ud(mesh.vertex(v), &mut value);
                }
                for c in (0..m).filter(|&c| side.label.constrains(c)) {
                    free_index[v * m + c] = NONE;
                    lifting[v * m + c] = if data.dirichlet.is_some() {
                        value[c]
                    } else {
                        T::zero()
                    };
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
        let shape: Vec<[[T; 2]; 3]> = (0..mesh.n_triangles())
            .map(|t| shape_gradients(&mesh.triangle_points(t)))
            .collect();

        // load vector: ∫ f · φ + ∫_{Γ_N} g · φ with P1 hat functions
        let mut load = vec![T::zero(); n];
        let data_degree = 12;
        if let Some(f) = &data.source {
            let rule = TriangleRule::<T>::new(data_degree);
            for t in 0..mesh.n_triangles() {
                let pts = mesh.triangle_points(t);
                let (xs, ws) = rule.on_triangle_graded(&pts, mesh.area(t), data.singularity);
                let tri = mesh.triangle(t);
                for (x, &w) in xs.iter().zip(&ws) {
                    f(*x, &mut value);
                    let lam = barycentric(&pts, &shape[t], *x);
                    for i in 0..3 {
                        for c in 0..m {
                            load[tri[i] * m + c] += w * value[c] * lam[i];
                        }
                    }
                }
            }
        }
        if let Some(g) = &data.neumann {
            let rule = LineRule::<T>::new(data_degree);
            for side in mesh.sides().iter().filter(|s| s.is_boundary()) {
                let free: Vec<usize> = (0..m).filter(|&c| !side.label.constrains(c)).collect();
                if free.is_empty() {
                    continue;
                }
                let [a, b] = side.vertices;
                let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
                for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    g(x, side.normal, &mut value);
                    for &c in &free {
                        load[a * m + c] += w * side.length * value[c] * (T::one() - s);
                        load[b * m + c] += w * side.length * value[c] * s;
                    }
                }
            }
        }

        let cliques: Vec<Vec<usize>> = (0..mesh.n_triangles())
            .map(|t| {
                let tri = mesh.triangle(t);
                (0..m)
                    .flat_map(|c| tri.iter().map(move |&v| v * m + c))
                    .map(|g| free_index[g])
                    .collect()
            })
            .collect();
        let pattern = SymmetricPattern::from_cliques(free_dofs.len(), &cliques);
        let solver = CholeskySolver::new(&pattern)?;
        let mut problem = Self {
            mesh,
            density,
            m,
            shape,
            free_index,
            free_dofs,
            lifting,
            load,
            cliques,
            pattern,
            solver,
            metric: Vec::new(),
        };
        problem.metric = problem.assemble_metric();
        Ok(problem)
    }

    pub fn ndof(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn expand(&self, x: &[T]) -> Vec<T> {
        let mut v = self.lifting.clone();
        for (&g, &xi) in self.free_dofs.iter().zip(x) {
            v[g] = xi;
        }
        v
    }

    /// `∇v` on triangle `t` as an `m × 2` row-major matrix.
    pub fn gradient(&self, v: &[T], t: usize) -> Vec<T> {
        let tri = self.mesh.triangle(t);
        let mut a = vec![T::zero(); 2 * self.m];
        for c in 0..self.m {
            for i in 0..3 {
                let vi = v[tri[i] * self.m + c];
                a[2 * c] += vi * self.shape[t][i][0];
                a[2 * c + 1] += vi * self.shape[t][i][1];
            }
        }
        a
    }

    /// Local index `c * 3 + i` to the row of the element gradient operator.
    fn local_gradient_entry(&self, t: usize, l: usize) -> (usize, [T; 2]) {
        (l / 3, self.shape[t][l % 3])
    }

    pub fn energy_full(&self, v: &[T]) -> T {
        let bulk: T = (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| self.mesh.area(t) * self.density.value(&self.gradient(v, t)))
            .collect::<Vec<T>>()
            .into_iter()
            .sum();
        bulk - self.load.iter().zip(v).map(|(&l, &x)| l * x).sum::<T>()
    }

    fn element_terms(&self, v: &[T], t: usize, grad: Option<&mut [T]>, hess: Option<&mut [T]>) {
        let a = self.gradient(v, t);
        let area = self.mesh.area(t);
        let nl = 3 * self.m;
        let dim = 2 * self.m;
        if let Some(g) = grad {
            let mut dw = vec![T::zero(); dim];
            self.density.derivative(&a, &mut dw);
            for l in 0..nl {
                let (c, s) = self.local_gradient_entry(t, l);
                g[l] = area * (dw[2 * c] * s[0] + dw[2 * c + 1] * s[1]);
            }
        }
        if let Some(h) = hess {
            let mut d2 = vec![T::zero(); dim * dim];
            self.density.hessian(&a, &mut d2);
            for i in 0..nl {
                let (ci, si) = self.local_gradient_entry(t, i);
                for j in 0..nl {
                    let (cj, sj) = self.local_gradient_entry(t, j);
                    let mut acc = T::zero();
                    for di in 0..2 {
                        for dj in 0..2 {
                            acc += d2[(2 * ci + di) * dim + 2 * cj + dj] * si[di] * sj[dj];
                        }
                    }
                    h[i * nl + j] = area * acc;
                }
            }
        }
    }

    /// Stiffness plus lumped mass on the free unknowns.
    fn assemble_metric(&self) -> Vec<T> {
        let nl = 3 * self.m;
        let mut values = vec![T::zero(); self.pattern.nnz()];
        for t in 0..self.mesh.n_triangles() {
            let area = self.mesh.area(t);
            let mut h = vec![T::zero(); nl * nl];
            for i in 0..nl {
                let (ci, si) = self.local_gradient_entry(t, i);
                for j in 0..nl {
                    let (cj, sj) = self.local_gradient_entry(t, j);
                    if ci == cj {
                        h[i * nl + j] = area * (si[0] * sj[0] + si[1] * sj[1]);
                    }
                }
                h[i * nl + i] += area / T::lit(3.0);
            }
            self.pattern.add_local(&mut values, t, &self.cliques[t], &h);
        }
        values
    }

    pub fn solve(&self, settings: &SolverSettings) -> CourantSolution<T> {
        let x0 = vec![T::zero(); self.ndof()];
        let (x, report) = minimize(self, x0, settings);
        let u = self.expand(&x);
        CourantSolution {
            energy: self.energy_full(&u),
            u,
            report,
        }
    }

    pub fn free_index(&self, g: usize) -> Option<usize> {
        (self.free_index[g] != NONE).then_some(self.free_index[g])
    }
}

fn barycentric<T: Real>(p: &[[T; 2]; 3], shape: &[[T; 2]; 3], x: [T; 2]) -> [T; 3] {
    let mut lam = [T::zero(); 3];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        lam[i] = shape[i][0] * (x[0] - a[0]) + shape[i][1] * (x[1] - a[1]);
    }
    lam
}

impl<T: Real> Objective<T> for CourantProblem<T> {
    fn dim(&self) -> usize {
        self.free_dofs.len()
    }

    fn energy(&self, x: &[T]) -> T {
        self.energy_full(&self.expand(x))
    }

    fn energy_gradient(&self, x: &[T], g: &mut [T]) -> T {
        let v = self.expand(x);
        let nl = 3 * self.m;
        let mut full: Vec<T> = self.load.iter().map(|&l| -l).collect();
        let locals: Vec<Vec<T>> = (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let mut gl = vec![T::zero(); nl];
                self.element_terms(&v, t, Some(&mut gl), None);
                gl
            })
            .collect();
        for (t, gl) in locals.iter().enumerate() {
            let tri = self.mesh.triangle(t);
            for (l, &val) in gl.iter().enumerate() {
                full[tri[l % 3] * self.m + l / 3] += val;
            }
        }
        for (gi, &d) in g.iter_mut().zip(&self.free_dofs) {
            *gi = full[d];
        }
        self.energy_full(&v)
    }

    fn pattern(&self) -> &SymmetricPattern {
        &self.pattern
    }

    fn hessian(&self, x: &[T]) -> Vec<T> {
        let v = self.expand(x);
        let nl = 3 * self.m;
        let locals: Vec<Vec<T>> = (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let mut h = vec![T::zero(); nl * nl];
                self.element_terms(&v, t, None, Some(&mut h));
                h
            })
            .collect();
        let mut values = vec![T::zero(); self.pattern.nnz()];
        for (t, h) in locals.iter().enumerate() {
            self.pattern.add_local(&mut values, t, &self.cliques[t], h);
        }
        values
    }

    fn metric(&self) -> &[T] {
        &self.metric
    }

    fn linear_solver(&self) -> &CholeskySolver {
        &self.solver
    }
}
