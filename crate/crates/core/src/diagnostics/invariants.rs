//! Structural identities of the discretization, evaluated independently of
//! the code paths that rely on them. Each function returns a defect that
//! should vanish up to rounding (or the solver tolerance).

use crate::companion::companion;
use crate::densities::EnergyDensity;
use crate::hho::{FluxField, HhoSpace, Variant};
use crate::poly::{eval_flux, LineRule, TriangleRule};
use crate::real::{dot, Real};
use crate::solver::DiscreteProblem;

/// `max_T ‖G I v − Π ∇v‖` over the gradient coefficients, with `Π` the L²
/// projection onto the gradient space. `grad` is the exact `∇v` of `v`.
pub fn commutativity_defect<T: Real>(
    space: &HhoSpace<T>,
    v: &(dyn Fn([T; 2], &mut [T]) + Sync),
    grad: &(dyn Fn([T; 2], &mut [T]) + Sync),
    quad_degree: usize,
) -> T {
    let m = space.components();
    let k = space.degree();
    let ns = space.n_flux();
    let flux = space.variant().flux_space();
    let iv = space.interpolate(v, quad_degree);
    let g = space.gradient_field(&iv);
    let rule = TriangleRule::<T>::new(quad_degree);
    let mut worst = T::zero();
    let mut tau = vec![[T::zero(); 2]; ns];
    let mut du = vec![T::zero(); 2 * m];
    for t in 0..space.mesh().n_triangles() {
        let el = space.element(t);
        let (pts, wts) = rule.on_triangle(&el.points, el.area);
        let mut rhs = vec![T::zero(); m * ns];
        for (x, &w) in pts.iter().zip(&wts) {
            eval_flux(flux, &el.frame, k, *x, &mut tau);
            grad(*x, &mut du);
            for c in 0..m {
                for j in 0..ns {
                    rhs[c * ns + j] += w * (du[2 * c] * tau[j][0] + du[2 * c + 1] * tau[j][1]);
                }
            }
        }
        let lu = el.flux_mass.lu().expect("flux mass matrix is invertible");
        for c in 0..m {
            let proj = lu.solve_vec(&rhs[c * ns..(c + 1) * ns]);
            for (a, b) in proj.iter().zip(g.coeffs_of(t, c)) {
                worst = worst.max((*a - *b).abs());
            }
        }
    }
    worst
}

/// Largest deviation of the cell and side moments of the companion `J v`
/// from the unknowns of `v`.
pub fn companion_moment_defect<T: Real>(space: &HhoSpace<T>, v: &[T]) -> T {
    let j = companion(space, v);
    let mesh = space.mesh();
    let m = space.components();
    let k = space.degree();
    let deg = 2 * (k + 3);
    let rule = TriangleRule::<T>::new(deg);
    let line = LineRule::<T>::new(deg);
    let mut worst = T::zero();
    let mut val = vec![T::zero(); m];
    for t in 0..mesh.n_triangles() {
        let el = space.element(t);
        let (pts, wts) = rule.on_triangle(&el.points, el.area);
        let nc = space.n_cell_basis();
        let mut phi = vec![T::zero(); nc];
        let mut moments = vec![T::zero(); m * nc];
        for (x, &w) in pts.iter().zip(&wts) {
            j.eval(t, *x, &mut val);
            el.frame.eval(k, *x, &mut phi);
            for c in 0..m {
                for i in 0..nc {
                    moments[c * nc + i] += w * val[c] * phi[i];
                }
            }
        }
        for c in 0..m {
            let target = el.cell_mass.mul_vec(space.cell_coeffs(v, t, c));
            for (a, b) in moments[c * nc..(c + 1) * nc].iter().zip(&target) {
                worst = worst.max((*a - *b).abs());
            }
        }
    }
    let nf = space.n_side_basis();
    let mut psi = vec![T::zero(); nf];
    for s in 0..mesh.n_sides() {
        let sf = space.side_frame(s);
        let owner = mesh.side(s).owner;
        let mut moments = vec![T::zero(); m * nf];
        for (&tq, &wq) in line.nodes.iter().zip(&line.weights) {
            j.eval(owner, sf.point(tq), &mut val);
            sf.eval(k, tq, &mut psi);
            for c in 0..m {
                for i in 0..nf {
                    moments[c * nf + i] += wq * sf.length * val[c] * psi[i];
                }
            }
        }
        for c in 0..m {
            let target = space.side_mass(s).mul_vec(space.side_coeffs(v, s, c));
            for (a, b) in moments[c * nf..(c + 1) * nf].iter().zip(&target) {
                worst = worst.max((*a - *b).abs());
            }
        }
    }
    worst
}

/// Jump of the companion across interior sides at the line quadrature
/// points; zero for a continuous function.
pub fn companion_jump<T: Real>(space: &HhoSpace<T>, v: &[T]) -> T {
    let j = companion(space, v);
    let mesh = space.mesh();
    let m = space.components();
    let line = LineRule::<T>::new(2 * (space.degree() + 3));
    let mut a = vec![T::zero(); m];
    let mut b = vec![T::zero(); m];
    let mut worst = T::zero();
    for s in 0..mesh.n_sides() {
        let side = mesh.side(s);
        let Some(nb) = side.neighbor else { continue };
        let sf = space.side_frame(s);
        for &tq in &line.nodes {
            let x = sf.point(tq);
            j.eval(side.owner, x, &mut a);
            j.eval(nb, x, &mut b);
            for c in 0..m {
                worst = worst.max((a[c] - b[c]).abs());
            }
        }
    }
    worst
}

/// Discrete Euler–Lagrange residual `∫ σ : G w + s(u; w) + c∫ (u_T − ζ) · w_T
/// − F(w)` for free test vectors `w`, assembled from the stress coefficients
/// and the gradient-space mass matrix. Returns the largest `|residual|`
/// relative to the Euclidean norm of `w`.
pub fn euler_lagrange_residual<T: Real>(
    problem: &DiscreteProblem<T>,
    u: &[T],
    sigma: &FluxField<T>,
    tests: &[Vec<T>],
) -> T {
    let space = problem.space();
    let m = space.components();
    let mut worst = T::zero();
    for w in tests {
        let mut w = w.clone();
        for (g, wi) in w.iter_mut().enumerate() {
            if !problem.is_free(g) {
                *wi = T::zero();
            }
        }
        let gw = space.gradient_field(&w);
        let mut bulk = T::zero();
        for t in 0..space.mesh().n_triangles() {
            let el = space.element(t);
            for c in 0..m {
                let mg = el.flux_mass.mul_vec(gw.coeffs_of(t, c));
                bulk += dot(sigma.coeffs_of(t, c), &mg);
            }
        }
        let stab = problem.stabilization_form(u, &w);
        // the lower-order energy is quadratic, so a central difference is exact
        let plus: Vec<T> = u.iter().zip(&w).map(|(a, b)| *a + *b).collect();
        let minus: Vec<T> = u.iter().zip(&w).map(|(a, b)| *a - *b).collect();
        let lower = (problem.energy_parts(&plus).lower_order
            - problem.energy_parts(&minus).lower_order)
            / T::lit(2.0);
        let load = problem.energy_parts(&w).load;
        let norm = dot(&w, &w).sqrt().max(T::min_positive_value());
        worst = worst.max((bulk + stab + lower - load).abs() / norm);
    }
    worst
}

/// Defects of the Raviart–Thomas stress: normal jumps across interior sides,
/// `div σ + Π f` (plus `c(Π ζ − u_T)` for the lower-order term) and
/// `σν − Π_F g` on Neumann sides for free components. Jumps and traces are
/// pointwise maxima at quadrature points; the divergence defect is
/// `max_T |T|^{1/2} ‖·‖_{L²(T)}`, the scaling of a residual in `H⁻¹`, so
/// that it stays comparable to the solver tolerance on tiny triangles.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EquilibriumDefects<T> {
    pub normal_jump: T,
    pub divergence: T,
    pub neumann: T,
}

pub fn equilibrium_defects<T: Real>(
    problem: &DiscreteProblem<T>,
    u: &[T],
    sigma: &FluxField<T>,
) -> Option<EquilibriumDefects<T>> {
    let space = problem.space();
    if space.variant() != Variant::RaviartThomas {
        return None;
    }
    let mesh = space.mesh();
    let m = space.components();
    let k = space.degree();
    let data = problem.data();
    let deg = problem.data_degree();
    let mut out = EquilibriumDefects::<T>::default();
    let line = LineRule::<T>::new(2 * k + 4);
    let mut a = vec![T::zero(); 2 * m];
    let mut b = vec![T::zero(); 2 * m];
    let normal = |s: &[T], c: usize, n: [T; 2]| s[2 * c] * n[0] + s[2 * c + 1] * n[1];
    for si in 0..mesh.n_sides() {
        let side = mesh.side(si);
        let sf = space.side_frame(si);
        match side.neighbor {
            Some(nb) => {
                for &tq in &line.nodes {
                    let x = sf.point(tq);
                    sigma.eval(side.owner, x, &mut a);
                    sigma.eval(nb, x, &mut b);
                    for c in 0..m {
                        out.normal_jump = out
                            .normal_jump
                            .max((normal(&a, c, side.normal) - normal(&b, c, side.normal)).abs());
                    }
                }
            }
            None => {
                let free: Vec<usize> = (0..m).filter(|&c| !side.label.constrains(c)).collect();
                if free.is_empty() {
                    continue;
                }
                let pg = match &data.neumann {
                    Some(g) => {
                        let n = side.normal;
                        let gf = |x: [T; 2], out: &mut [T]| g(x, n, out);
                        space.project_side(si, &gf, deg)
                    }
                    None => vec![T::zero(); m * space.n_side_basis()],
                };
                let nf = space.n_side_basis();
                let mut psi = vec![T::zero(); nf];
                for &tq in &line.nodes {
                    let x = sf.point(tq);
                    sigma.eval(side.owner, x, &mut a);
                    sf.eval(k, tq, &mut psi);
                    for &c in &free {
                        let target = dot(&psi, &pg[c * nf..(c + 1) * nf]);
                        out.neumann = out.neumann.max((normal(&a, c, side.normal) - target).abs());
                    }
                }
            }
        }
    }
    let rule = TriangleRule::<T>::new(2 * k + 2);
    let cells = space.cell_field(u);
    let mut div = vec![T::zero(); m];
    let mut ut = vec![T::zero(); m];
    let nc = space.n_cell_basis();
    let mut phi = vec![T::zero(); nc];
    for t in 0..mesh.n_triangles() {
        let el = space.element(t);
        let pf = match &data.source {
            Some(f) => space.project_cell_graded(t, f.as_ref(), deg, data.singularity),
            None => vec![T::zero(); m * nc],
        };
        let pz = data.lower_order.as_ref().map(|l| {
            (
                space.project_cell_graded(t, l.zeta.as_ref(), deg, data.singularity),
                l.weight,
            )
        });
        let (pts, wts) = rule.on_triangle(&el.points, el.area);
        let mut sq = T::zero();
        for (x, wq) in pts.into_iter().zip(wts) {
            sigma.eval_div(t, x, &mut div);
            cells.eval(t, x, &mut ut);
            el.frame.eval(k, x, &mut phi);
            for c in 0..m {
                let mut r = div[c] + dot(&phi, &pf[c * nc..(c + 1) * nc]);
                if let Some((pz, c_lo)) = &pz {
                    r += *c_lo * (dot(&phi, &pz[c * nc..(c + 1) * nc]) - ut[c]);
                }
                sq += wq * r * r;
            }
        }
        out.divergence = out.divergence.max(el.area.sqrt() * sq.sqrt());
    }
    Some(out)
}

/// Largest relative deviation of `DW(a)` from central differences of `W`,
/// and of the Hessian from differences of `DW`, over the sample points.
pub fn density_derivative_defect<T: Real>(
    density: &dyn EnergyDensity<T>,
    samples: &[Vec<T>],
    step: T,
) -> T {
    let n = 2 * density.components();
    let two = T::lit(2.0);
    let mut worst = T::zero();
    let mut dw = vec![T::zero(); n];
    let mut dp = vec![T::zero(); n];
    let mut dm = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n * n];
    for a in samples {
        density.derivative(a, &mut dw);
        density.hessian(a, &mut hess);
        let scale = T::one() + dw.iter().fold(T::zero(), |s, x| s.max(x.abs()));
        for i in 0..n {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[i] += step;
            am[i] -= step;
            let fd = (density.value(&ap) - density.value(&am)) / (two * step);
            worst = worst.max((fd - dw[i]).abs() / scale);
            density.derivative(&ap, &mut dp);
            density.derivative(&am, &mut dm);
            let hscale = T::one() + hess.iter().fold(T::zero(), |s, x| s.max(x.abs()));
            for j in 0..n {
                let fd = (dp[j] - dm[j]) / (two * step);
                worst = worst.max((fd - hess[j * n + i]).abs() / hscale);
            }
        }
    }
    worst
}
