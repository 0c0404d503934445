//! Hybrid high-order space, interpolation and the element reconstructions.
//!
//! A discrete function carries per component a degree-`k` polynomial on each
//! triangle and a degree-`k` polynomial on each side. Global unknowns are
//! numbered cells first (triangle, component, basis function), then sides
//! (side, component, basis function).
//!
//! On a triangle the local unknowns of one component are ordered as the cell
//! coefficients followed by the coefficients of its three local sides.

use crate::linalg::DMat;
use crate::mesh::Triangulation;
use crate::poly::{
    dim_poly, eval_flux, eval_flux_div, CellFrame, FluxSpace, LineRule, SideFrame, TriangleRule,
};
use crate::real::Real;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Choice of gradient space and stabilization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Gradient in Raviart-Thomas fields; no stabilization.
    #[serde(rename = "rt")]
    RaviartThomas,
    #[serde(rename = "stabilized")]
    /// Gradient in full polynomial fields plus a side stabilization.
    Stabilized,
}

impl Variant {
    pub fn flux_space(self) -> FluxSpace {
        match self {
            Self::RaviartThomas => FluxSpace::RaviartThomas,
            Self::Stabilized => FluxSpace::Polynomial,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::RaviartThomas => "rt",
            Self::Stabilized => "stabilized",
        }
    }
}

/// Precomputed local operators of one triangle.
#[derive(Clone, Debug)]
pub struct ElementData<T> {
    pub points: [[T; 2]; 3],
    pub area: T,
    pub frame: CellFrame<T>,
    pub sides: [usize; 3],
    /// Side parametrizations in the global side orientation.
    pub side_frames: [SideFrame<T>; 3],
    pub normals: [[T; 2]; 3],
    pub cell_mass: DMat<T>,
    pub flux_mass: DMat<T>,
    /// Gradient reconstruction: local unknowns to flux coefficients.
    pub gradient: DMat<T>,
    /// Potential reconstruction: local unknowns to degree `k+1` coefficients.
    pub potential: DMat<T>,
    /// Per local side, local unknowns to the side coefficients of the
    /// stabilization residual (empty without stabilization).
    pub stabilization: Vec<DMat<T>>,
}

#[derive(Debug)]
pub struct HhoSpace<T> {
    mesh: Arc<Triangulation<T>>,
    degree: usize,
    components: usize,
    variant: Variant,
    elements: Vec<ElementData<T>>,
    side_mass: Vec<DMat<T>>,
}

impl<T: Real> HhoSpace<T> {
    pub fn new(
        mesh: Arc<Triangulation<T>>,
        degree: usize,
        components: usize,
        variant: Variant,
    ) -> Self {
        assert!(components >= 1);
        let tri_rule = TriangleRule::<T>::new(2 * degree + 2);
        let line_rule = LineRule::<T>::new(2 * degree + 2);
        let elements = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| build_element(&mesh, t, degree, variant, &tri_rule, &line_rule))
            .collect();
        let nf = degree + 1;
        let side_mass = (0..mesh.n_sides())
            .map(|s| {
                let len = mesh.side(s).length;
                let mut m = DMat::zeros(nf, nf);
                let mut psi = vec![T::zero(); nf];
                let frame = side_frame(&mesh, s);
                for (&tq, &wq) in line_rule.nodes.iter().zip(&line_rule.weights) {
                    frame.eval(degree, tq, &mut psi);
                    for i in 0..nf {
                        for j in 0..nf {
                            m[(i, j)] += wq * len * psi[i] * psi[j];
                        }
                    }
                }
                m
            })
            .collect();
        Self {
            mesh,
            degree,
            components,
            variant,
            elements,
            side_mass,
        }
    }

    pub fn mesh(&self) -> &Triangulation<T> {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Triangulation<T>> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn element(&self, t: usize) -> &ElementData<T> {
        &self.elements[t]
    }

    pub fn side_mass(&self, s: usize) -> &DMat<T> {
        &self.side_mass[s]
    }

    pub fn n_cell_basis(&self) -> usize {
        dim_poly(self.degree)
    }

    pub fn n_side_basis(&self) -> usize {
        self.degree + 1
    }

    pub fn n_local(&self) -> usize {
        self.n_cell_basis() + 3 * self.n_side_basis()
    }

    pub fn n_flux(&self) -> usize {
        self.variant.flux_space().dim(self.degree)
    }

    pub fn n_potential(&self) -> usize {
        dim_poly(self.degree + 1)
    }

    pub fn n_cell_dofs(&self) -> usize {
        self.mesh.n_triangles() * self.components * self.n_cell_basis()
    }

    pub fn ndof(&self) -> usize {
        self.n_cell_dofs() + self.mesh.n_sides() * self.components * self.n_side_basis()
    }

    #[inline]
    pub fn cell_dof(&self, t: usize, c: usize, i: usize) -> usize {
        (t * self.components + c) * self.n_cell_basis() + i
    }

    #[inline]
    pub fn side_dof(&self, s: usize, c: usize, j: usize) -> usize {
        self.n_cell_dofs() + (s * self.components + c) * self.n_side_basis() + j
    }

    /// Global indices of the local unknowns of component `c` on `t`.
    pub fn local_dofs(&self, t: usize, c: usize) -> Vec<usize> {
        let nc = self.n_cell_basis();
        let nf = self.n_side_basis();
        let mut out = Vec::with_capacity(self.n_local());
        out.extend((0..nc).map(|i| self.cell_dof(t, c, i)));
        for &s in &self.elements[t].sides {
            out.extend((0..nf).map(|j| self.side_dof(s, c, j)));
        }
        out
    }

    /// Local unknowns of every component on `t`, component-major.
    pub fn element_dofs(&self, t: usize) -> Vec<usize> {
        (0..self.components)
            .flat_map(|c| self.local_dofs(t, c))
            .collect()
    }

    pub fn gather(&self, v: &[T], t: usize, c: usize) -> Vec<T> {
        self.local_dofs(t, c).into_iter().map(|g| v[g]).collect()
    }

    pub fn cell_coeffs<'a>(&self, v: &'a [T], t: usize, c: usize) -> &'a [T] {
        let start = self.cell_dof(t, c, 0);
        &v[start..start + self.n_cell_basis()]
    }

    pub fn side_coeffs<'a>(&self, v: &'a [T], s: usize, c: usize) -> &'a [T] {
        let start = self.side_dof(s, c, 0);
        &v[start..start + self.n_side_basis()]
    }

    /// Interpolation by L² projections onto cells and sides; `f` writes the
    /// `m` components at a point. `quad_degree` sizes the quadrature.
    pub fn interpolate(&self, f: &(dyn Fn([T; 2], &mut [T]) + Sync), quad_degree: usize) -> Vec<T> {
        let mut v = vec![T::zero(); self.ndof()];
        let cells: Vec<Vec<T>> = (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| self.project_cell(t, f, quad_degree))
            .collect();
        for (t, coeffs) in cells.into_iter().enumerate() {
            let start = self.cell_dof(t, 0, 0);
            v[start..start + coeffs.len()].copy_from_slice(&coeffs);
        }
        for s in 0..self.mesh.n_sides() {
            let coeffs = self.project_side(s, f, quad_degree);
            let start = self.side_dof(s, 0, 0);
            v[start..start + coeffs.len()].copy_from_slice(&coeffs);
        }
        v
    }

    /// L² projection onto `P_k(T)` of every component, component-major.
    pub fn project_cell(
        &self,
        t: usize,
        f: &(dyn Fn([T; 2], &mut [T]) + Sync),
        quad_degree: usize,
    ) -> Vec<T> {
        self.project_cell_graded(t, f, quad_degree, None)
    }

    /// As [`Self::project_cell`], with the rule graded towards `singular`
    /// when it is a vertex of `T`.
    pub fn project_cell_graded(
        &self,
        t: usize,
        f: &(dyn Fn([T; 2], &mut [T]) + Sync),
        quad_degree: usize,
        singular: Option<[T; 2]>,
    ) -> Vec<T> {
        let el = &self.elements[t];
        let m = self.components;
        let nc = self.n_cell_basis();
        let rule = TriangleRule::<T>::new(quad_degree.max(2 * self.degree));
        let (pts, wts) = rule.on_triangle_graded(&el.points, el.area, singular);
        let mut rhs = vec![T::zero(); m * nc];
        let mut phi = vec![T::zero(); nc];
        let mut val = vec![T::zero(); m];
        for (x, &w) in pts.iter().zip(&wts) {
            f(*x, &mut val);
            el.frame.eval(self.degree, *x, &mut phi);
            for c in 0..m {
                for i in 0..nc {
                    rhs[c * nc + i] += w * val[c] * phi[i];
                }
            }
        }
        let lu = el.cell_mass.lu().expect("cell mass matrix is invertible");
        (0..m)
            .flat_map(|c| lu.solve_vec(&rhs[c * nc..(c + 1) * nc]))
            .collect()
    }

    /// L² projection onto `P_k(F)` of every component, component-major.
    pub fn project_side(
        &self,
        s: usize,
        f: &(dyn Fn([T; 2], &mut [T]) + Sync),
        quad_degree: usize,
    ) -> Vec<T> {
        let m = self.components;
        let nf = self.n_side_basis();
        let frame = side_frame(&self.mesh, s);
        let rule = LineRule::<T>::new(quad_degree.max(2 * self.degree));
        let mut rhs = vec![T::zero(); m * nf];
        let mut psi = vec![T::zero(); nf];
        let mut val = vec![T::zero(); m];
        for (&tq, &wq) in rule.nodes.iter().zip(&rule.weights) {
            let w = wq * frame.length;
            f(frame.point(tq), &mut val);
            frame.eval(self.degree, tq, &mut psi);
            for c in 0..m {
                for j in 0..nf {
                    rhs[c * nf + j] += w * val[c] * psi[j];
                }
            }
        }
        let lu = self.side_mass[s]
            .lu()
            .expect("side mass matrix is invertible");
        (0..m)
            .flat_map(|c| lu.solve_vec(&rhs[c * nf..(c + 1) * nf]))
            .collect()
    }

    /// Discrete gradient of `v` as a piecewise flux field.
    pub fn gradient_field(&self, v: &[T]) -> FluxField<T> {
        let m = self.components;
        let ns = self.n_flux();
        let mut coeffs = vec![T::zero(); self.mesh.n_triangles() * m * ns];
        coeffs
            .par_chunks_mut(m * ns)
            .enumerate()
            .for_each(|(t, out)| {
                for c in 0..m {
                    let loc = self.gather(v, t, c);
                    self.elements[t]
                        .gradient
                        .mul_vec_into(&loc, &mut out[c * ns..(c + 1) * ns]);
                }
            });
        FluxField {
            space: self.variant.flux_space(),
            degree: self.degree,
            components: m,
            frames: self.elements.iter().map(|e| e.frame).collect(),
            coeffs,
        }
    }

    /// Potential reconstruction of `v` (degree `k+1` on each triangle).
    pub fn potential_field(&self, v: &[T]) -> PiecewisePolynomial<T> {
        let m = self.components;
        let nr = self.n_potential();
        let mut coeffs = vec![T::zero(); self.mesh.n_triangles() * m * nr];
        coeffs
            .par_chunks_mut(m * nr)
            .enumerate()
            .for_each(|(t, out)| {
                for c in 0..m {
                    let loc = self.gather(v, t, c);
                    self.elements[t]
                        .potential
                        .mul_vec_into(&loc, &mut out[c * nr..(c + 1) * nr]);
                }
            });
        PiecewisePolynomial {
            degree: self.degree + 1,
            components: m,
            frames: self.elements.iter().map(|e| e.frame).collect(),
            coeffs,
        }
    }

    /// Cell components of `v` as a piecewise polynomial.
    pub fn cell_field(&self, v: &[T]) -> PiecewisePolynomial<T> {
        PiecewisePolynomial {
            degree: self.degree,
            components: self.components,
            frames: self.elements.iter().map(|e| e.frame).collect(),
            coeffs: v[..self.n_cell_dofs()].to_vec(),
        }
    }

    /// Evaluates the side polynomial of component `c` on side `s` at the
    /// parameter `t` of the global side orientation.
    pub fn eval_side(&self, v: &[T], s: usize, c: usize, t: T) -> T {
        let nf = self.n_side_basis();
        let mut psi = vec![T::zero(); nf];
        side_frame(&self.mesh, s).eval(self.degree, t, &mut psi);
        crate::real::dot(&psi, self.side_coeffs(v, s, c))
    }

    /// Side parametrization in the global orientation.
    pub fn side_frame(&self, s: usize) -> SideFrame<T> {
        side_frame(&self.mesh, s)
    }

    /// Stabilization residual coefficients on local side `e` of `t` for the
    /// local unknowns `loc` of one component.
    pub fn stabilization_residual(&self, t: usize, e: usize, loc: &[T]) -> Vec<T> {
        self.elements[t].stabilization[e].mul_vec(loc)
    }

    /// `‖D_pw v_T‖_p^p + Σ_T Σ_F h_F^{1-p} ‖v_T − v_F‖_{L^p(F)}^p`.
    pub fn seminorm_pow(&self, v: &[T], p: T) -> T {
        let k = self.degree;
        let m = self.components;
        let nc = self.n_cell_basis();
        let nf = self.n_side_basis();
        let deg = (p.ceil().to_usize().unwrap_or(2)) * (k + 1);
        let tri = TriangleRule::<T>::new(deg);
        let line = LineRule::<T>::new(deg);
        (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let el = &self.elements[t];
                let (pts, wts) = tri.on_triangle(&el.points, el.area);
                let mut grad = vec![[T::zero(); 2]; nc];
                let mut phi = vec![T::zero(); nc];
                let mut psi = vec![T::zero(); nf];
                let mut acc = T::zero();
                for (x, &w) in pts.iter().zip(&wts) {
                    el.frame.eval_grad(k, *x, &mut grad);
                    let mut n2 = T::zero();
                    for c in 0..m {
                        let vc = self.cell_coeffs(v, t, c);
                        let mut g = [T::zero(); 2];
                        for i in 0..nc {
                            g[0] += vc[i] * grad[i][0];
                            g[1] += vc[i] * grad[i][1];
                        }
                        n2 += g[0] * g[0] + g[1] * g[1];
                    }
                    acc += w * n2.powf(p / T::lit(2.0));
                }
                for e in 0..3 {
                    let s = el.sides[e];
                    let sf = &el.side_frames[e];
                    let hf = sf.length;
                    let mut side_acc = T::zero();
                    for (&tq, &wq) in line.nodes.iter().zip(&line.weights) {
                        let x = sf.point(tq);
                        el.frame.eval(k, x, &mut phi);
                        sf.eval(k, tq, &mut psi);
                        let mut n2 = T::zero();
                        for c in 0..m {
                            let d = crate::real::dot(&phi, self.cell_coeffs(v, t, c))
                                - crate::real::dot(&psi, self.side_coeffs(v, s, c));
                            n2 += d * d;
                        }
                        side_acc += wq * hf * n2.powf(p / T::lit(2.0));
                    }
                    acc += hf.powf(T::one() - p) * side_acc;
                }
                acc
            })
            .collect::<Vec<T>>()
            .into_iter()
            .sum()
    }
}

pub(crate) fn side_frame<T: Real>(mesh: &Triangulation<T>, s: usize) -> SideFrame<T> {
    let side = mesh.side(s);
    SideFrame::new(mesh.vertex(side.vertices[0]), mesh.vertex(side.vertices[1]))
}

fn build_element<T: Real>(
    mesh: &Triangulation<T>,
    t: usize,
    k: usize,
    variant: Variant,
    tri_rule: &TriangleRule<T>,
    line_rule: &LineRule<T>,
) -> ElementData<T> {
    let points = mesh.triangle_points(t);
    let area = mesh.area(t);
    let frame = CellFrame::new(&points);
    let sides = mesh.triangle_sides(t);
    let side_frames = [0, 1, 2].map(|e| side_frame(mesh, sides[e]));
    let normals = [0, 1, 2].map(|e| mesh.outward_normal(t, e));
    let flux = variant.flux_space();
    let nc = dim_poly(k);
    let nf = k + 1;
    let nl = nc + 3 * nf;
    let ns = flux.dim(k);
    let nr = dim_poly(k + 1);

    let (qp, qw) = tri_rule.on_triangle(&points, area);
    let mut phi = vec![T::zero(); nc];
    let mut psi_r = vec![T::zero(); nr];
    let mut grad_r = vec![[T::zero(); 2]; nr];
    let mut tau = vec![[T::zero(); 2]; ns];
    let mut div = vec![T::zero(); ns];

    let mut cell_mass = DMat::zeros(nc, nc);
    let mut flux_mass = DMat::zeros(ns, ns);
    let mut b = DMat::zeros(ns, nl);
    let mut stiff = DMat::zeros(nr, nr);
    let mut cross_flux = DMat::zeros(nr, ns);
    let mut mean_r = vec![T::zero(); nr];
    let mut mean_c = vec![T::zero(); nc];
    let mut cross_cell = DMat::zeros(nc, nr);
    for (x, &w) in qp.iter().zip(&qw) {
        frame.eval(k, *x, &mut phi);
        frame.eval(k + 1, *x, &mut psi_r);
        frame.eval_grad(k + 1, *x, &mut grad_r);
        eval_flux(flux, &frame, k, *x, &mut tau);
        eval_flux_div(flux, &frame, k, *x, &mut div);
        for i in 0..nc {
            mean_c[i] += w * phi[i];
            for j in 0..nc {
                cell_mass[(i, j)] += w * phi[i] * phi[j];
            }
            for a in 0..nr {
                cross_cell[(i, a)] += w * phi[i] * psi_r[a];
            }
        }
        for i in 0..ns {
            for j in 0..ns {
                flux_mass[(i, j)] += w * (tau[i][0] * tau[j][0] + tau[i][1] * tau[j][1]);
            }
            for l in 0..nc {
                b[(i, l)] -= w * phi[l] * div[i];
            }
        }
        for a in 0..nr {
            mean_r[a] += w * psi_r[a];
            for bb in 0..nr {
                stiff[(a, bb)] += w * (grad_r[a][0] * grad_r[bb][0] + grad_r[a][1] * grad_r[bb][1]);
            }
            for j in 0..ns {
                cross_flux[(a, j)] += w * (grad_r[a][0] * tau[j][0] + grad_r[a][1] * tau[j][1]);
            }
        }
    }
    let mut psi = vec![T::zero(); nf];
    for e in 0..3 {
        let sf = &side_frames[e];
        let nu = normals[e];
        for (&tq, &wq) in line_rule.nodes.iter().zip(&line_rule.weights) {
            let x = sf.point(tq);
            let w = wq * sf.length;
            sf.eval(k, tq, &mut psi);
            eval_flux(flux, &frame, k, x, &mut tau);
            for i in 0..ns {
                let tn = tau[i][0] * nu[0] + tau[i][1] * nu[1];
                for l in 0..nf {
                    b[(i, nc + e * nf + l)] += w * psi[l] * tn;
                }
            }
        }
    }
    let gradient = flux_mass.solve(&b).expect("flux mass matrix is invertible");

    // Potential: Neumann problem with the mean fixed by a multiplier.
    let mut saddle = DMat::zeros(nr + 1, nr + 1);
    for a in 0..nr {
        for bb in 0..nr {
            saddle[(a, bb)] = stiff[(a, bb)];
        }
        saddle[(a, nr)] = mean_r[a];
        saddle[(nr, a)] = mean_r[a];
    }
    let ng = cross_flux.matmul(&gradient);
    let mut rhs = DMat::zeros(nr + 1, nl);
    for a in 0..nr {
        rhs.row_mut(a).copy_from_slice(ng.row(a));
    }
    for l in 0..nc {
        rhs[(nr, l)] = mean_c[l];
    }
    let sol = saddle
        .solve(&rhs)
        .expect("potential saddle system is invertible");
    let potential = DMat::from_fn(nr, nl, |a, l| sol[(a, l)]);

    let stabilization = if variant == Variant::Stabilized {
        let cell_lu = cell_mass.lu().expect("cell mass matrix is invertible");
        // Π_T^k R as a map from local unknowns to cell coefficients.
        let proj = cell_lu.solve_mat(&cross_cell.matmul(&potential));
        let mut cell_minus_proj = DMat::zeros(nc, nl);
        for i in 0..nc {
            for l in 0..nl {
                cell_minus_proj[(i, l)] = -proj[(i, l)];
            }
            cell_minus_proj[(i, i)] += T::one();
        }
        (0..3)
            .map(|e| {
                let sf = &side_frames[e];
                let mut mf = DMat::zeros(nf, nf);
                let mut tc = DMat::zeros(nf, nc);
                let mut tr = DMat::zeros(nf, nr);
                for (&tq, &wq) in line_rule.nodes.iter().zip(&line_rule.weights) {
                    let x = sf.point(tq);
                    let w = wq * sf.length;
                    sf.eval(k, tq, &mut psi);
                    frame.eval(k, x, &mut phi);
                    frame.eval(k + 1, x, &mut psi_r);
                    for l in 0..nf {
                        for j in 0..nf {
                            mf[(l, j)] += w * psi[l] * psi[j];
                        }
                        for i in 0..nc {
                            tc[(l, i)] += w * psi[l] * phi[i];
                        }
                        for a in 0..nr {
                            tr[(l, a)] += w * psi[l] * psi_r[a];
                        }
                    }
                }
                // S = v_S − Π_S (v_K + (1 − Π_K) R v)
                let mut trace = tc.matmul(&cell_minus_proj);
                trace.add_assign(&tr.matmul(&potential));
                let mut s = mf.solve(&trace).expect("side mass matrix is invertible");
                s.scale(-T::one());
                for l in 0..nf {
                    s[(l, nc + e * nf + l)] += T::one();
                }
                s
            })
            .collect()
    } else {
        Vec::new()
    };

    ElementData {
        points,
        area,
        frame,
        sides,
        side_frames,
        normals,
        cell_mass,
        flux_mass,
        gradient,
        potential,
        stabilization,
    }
}

/// Broken polynomial field with `m` components.
#[derive(Clone, Debug)]
pub struct PiecewisePolynomial<T> {
    pub degree: usize,
    pub components: usize,
    pub frames: Vec<CellFrame<T>>,
    /// Coefficients ordered by (triangle, component, basis function).
    pub coeffs: Vec<T>,
}

impl<T: Real> PiecewisePolynomial<T> {
    pub fn n_basis(&self) -> usize {
        dim_poly(self.degree)
    }

    pub fn coeffs_of(&self, t: usize, c: usize) -> &[T] {
        let n = self.n_basis();
        let start = (t * self.components + c) * n;
        &self.coeffs[start..start + n]
    }

    pub fn eval(&self, t: usize, x: [T; 2], out: &mut [T]) {
        let n = self.n_basis();
        let mut phi = vec![T::zero(); n];
        self.frames[t].eval(self.degree, x, &mut phi);
        for (c, o) in out.iter_mut().enumerate().take(self.components) {
            *o = crate::real::dot(&phi, self.coeffs_of(t, c));
        }
    }

    /// Gradient, row-major `m × 2`.
    pub fn eval_grad(&self, t: usize, x: [T; 2], out: &mut [T]) {
        let n = self.n_basis();
        let mut g = vec![[T::zero(); 2]; n];
        self.frames[t].eval_grad(self.degree, x, &mut g);
        for c in 0..self.components {
            let coeffs = self.coeffs_of(t, c);
            let mut acc = [T::zero(); 2];
            for i in 0..n {
                acc[0] += coeffs[i] * g[i][0];
                acc[1] += coeffs[i] * g[i][1];
            }
            out[2 * c] = acc[0];
            out[2 * c + 1] = acc[1];
        }
    }
}

/// Broken flux field (rows of an `m × 2` matrix in the local gradient space).
#[derive(Clone, Debug)]
pub struct FluxField<T> {
    pub space: FluxSpace,
    pub degree: usize,
    pub components: usize,
    pub frames: Vec<CellFrame<T>>,
    /// Coefficients ordered by (triangle, component, basis field).
    pub coeffs: Vec<T>,
}

impl<T: Real> FluxField<T> {
    pub fn n_basis(&self) -> usize {
        self.space.dim(self.degree)
    }

    pub fn coeffs_of(&self, t: usize, c: usize) -> &[T] {
        let n = self.n_basis();
        let start = (t * self.components + c) * n;
        &self.coeffs[start..start + n]
    }

    /// Value, row-major `m × 2`.
    pub fn eval(&self, t: usize, x: [T; 2], out: &mut [T]) {
        let n = self.n_basis();
        let mut tau = vec![[T::zero(); 2]; n];
        eval_flux(self.space, &self.frames[t], self.degree, x, &mut tau);
        for c in 0..self.components {
            let coeffs = self.coeffs_of(t, c);
            let mut acc = [T::zero(); 2];
            for j in 0..n {
                acc[0] += coeffs[j] * tau[j][0];
                acc[1] += coeffs[j] * tau[j][1];
            }
            out[2 * c] = acc[0];
            out[2 * c + 1] = acc[1];
        }
    }

    /// Row-wise divergence, length `m`.
    pub fn eval_div(&self, t: usize, x: [T; 2], out: &mut [T]) {
        let n = self.n_basis();
        let mut d = vec![T::zero(); n];
        eval_flux_div(self.space, &self.frames[t], self.degree, x, &mut d);
        for (c, o) in out.iter_mut().enumerate().take(self.components) {
            *o = crate::real::dot(&d, self.coeffs_of(t, c));
        }
    }
}
