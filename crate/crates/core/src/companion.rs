//! Conforming companion of a discrete function.
//!
//! The companion is a globally continuous piecewise polynomial of degree
//! `k+3` whose cell moments up to degree `k` equal the cell unknowns and whose
//! side moments up to degree `k` equal the side unknowns. Construction:
//! average the potential reconstruction at the Lagrange nodes of continuous
//! `P_{k+1}`, add edge bubbles to fix the side moments, then element bubbles to
//! fix the cell moments.

use crate::hho::{HhoSpace, PiecewisePolynomial};
use crate::linalg::DMat;
use crate::poly::{dim_poly, LineRule, TriangleRule};
use crate::real::Real;
use rayon::prelude::*;

/// Barycentric multi-indices `(a0, a1, a2)` with `a0 + a1 + a2 = n`.
fn lattice(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(dim_poly(n));
    for a1 in 0..=n {
        for a2 in 0..=n - a1 {
            out.push([n - a1 - a2, a1, a2]);
        }
    }
    out
}

fn lattice_point<T: Real>(p: &[[T; 2]; 3], a: [usize; 3], n: usize) -> [T; 2] {
    let f = |i: usize| T::from_usize_lossy(a[i]) / T::from_usize_lossy(n);
    [
        f(0) * p[0][0] + f(1) * p[1][0] + f(2) * p[2][0],
        f(0) * p[0][1] + f(1) * p[1][1] + f(2) * p[2][1],
    ]
}

fn barycentric<T: Real>(p: &[[T; 2]; 3], x: [T; 2]) -> [T; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let l1 =
        ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
    let l2 =
        ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
    [T::one() - l1 - l2, l1, l2]
}

/// Edge bubble `λa^{i+1} λb^{k-i+1}` of a side with endpoints `a`, `b`.
fn edge_bubble<T: Real>(la: T, lb: T, i: usize, k: usize) -> T {
    la.powi(i as i32 + 1) * lb.powi((k - i) as i32 + 1)
}

/// Companion of `v` as a piecewise polynomial of degree `k+3`.
pub fn companion<T: Real>(space: &HhoSpace<T>, v: &[T]) -> PiecewisePolynomial<T> {
    let mesh = space.mesh();
    let k = space.degree();
    let m = space.components();
    let d = k + 1;
    let nt = mesh.n_triangles();
    let ns = mesh.n_sides();
    let potential = space.potential_field(v);

    // Nodal averages of the potential on continuous P_{k+1}.
    let mut vertex_sum = vec![T::zero(); mesh.n_vertices() * m];
    let mut vertex_cnt = vec![0usize; mesh.n_vertices()];
    let side_nodes = d - 1;
    let mut side_sum = vec![T::zero(); ns * side_nodes * m];
    let mut side_cnt = vec![0usize; ns * side_nodes];
    let nodes = lattice(d);
    let mut val = vec![T::zero(); m];
    for t in 0..nt {
        let el = space.element(t);
        let tri = mesh.triangle(t);
        for &a in &nodes {
            let x = lattice_point(&el.points, a, d);
            match node_kind(a, d) {
                NodeKind::Vertex(i) => {
                    potential.eval(t, x, &mut val);
                    let g = tri[i];
                    for c in 0..m {
                        vertex_sum[g * m + c] += val[c];
                    }
                    vertex_cnt[g] += 1;
                }
                NodeKind::Side(e) => {
                    potential.eval(t, x, &mut val);
                    let s = el.sides[e];
                    let idx = side_node_index(&el.side_frames[e].param(x), d);
                    for c in 0..m {
                        side_sum[(s * side_nodes + idx) * m + c] += val[c];
                    }
                    side_cnt[s * side_nodes + idx] += 1;
                }
                NodeKind::Interior => {}
            }
        }
    }

    // Continuous P_{k+1} function on each triangle in monomial coefficients.
    let np = dim_poly(d);
    let base: Vec<Vec<T>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let el = space.element(t);
            let tri = mesh.triangle(t);
            let mut vand = DMat::zeros(np, np);
            let mut rhs = DMat::zeros(np, m);
            let mut val = vec![T::zero(); m];
            for (r, &a) in nodes.iter().enumerate() {
                let x = lattice_point(&el.points, a, d);
                el.frame.eval(d, x, vand.row_mut(r));
                match node_kind(a, d) {
                    NodeKind::Vertex(i) => {
                        let g = tri[i];
                        for c in 0..m {
                            rhs[(r, c)] =
                                vertex_sum[g * m + c] / T::from_usize_lossy(vertex_cnt[g]);
                        }
                    }
                    NodeKind::Side(e) => {
                        let s = el.sides[e];
                        let idx = side_node_index(&el.side_frames[e].param(x), d) + s * side_nodes;
                        for c in 0..m {
                            rhs[(r, c)] =
                                side_sum[idx * m + c] / T::from_usize_lossy(side_cnt[idx]);
                        }
                    }
                    NodeKind::Interior => {
                        potential.eval(t, x, &mut val);
                        for c in 0..m {
                            rhs[(r, c)] = val[c];
                        }
                    }
                }
            }
            let sol = vand.solve(&rhs).expect("Lagrange nodes are unisolvent");
            let mut out = vec![T::zero(); m * np];
            for c in 0..m {
                for i in 0..np {
                    out[c * np + i] = sol[(i, c)];
                }
            }
            out
        })
        .collect();
    let eval_base = |t: usize, c: usize, x: [T; 2]| -> T {
        let phi = space.element(t).frame.eval_vec(d, x);
        crate::real::dot(&phi, &base[t][c * np..(c + 1) * np])
    };

    // Edge bubbles: per side and component, coefficients of λa^{i+1} λb^{k-i+1}.
    let nf = k + 1;
    let line = LineRule::<T>::new(2 * k + 4);
    let edge: Vec<Vec<T>> = (0..ns)
        .into_par_iter()
        .map(|s| {
            let side = mesh.side(s);
            let sf = space.side_frame(s);
            let owner = side.owner;
            let mut mat = DMat::zeros(nf, nf);
            let mut rhs = DMat::zeros(nf, m);
            let mut psi = vec![T::zero(); nf];
            for (&tq, &wq) in line.nodes.iter().zip(&line.weights) {
                let w = wq * sf.length;
                let x = sf.point(tq);
                sf.eval(k, tq, &mut psi);
                let (la, lb) = (T::one() - tq, tq);
                for l in 0..nf {
                    for i in 0..nf {
                        mat[(l, i)] += w * psi[l] * edge_bubble(la, lb, i, k);
                    }
                }
                for c in 0..m {
                    let target = crate::real::dot(&psi, space.side_coeffs(v, s, c));
                    let r = target - eval_base(owner, c, x);
                    for l in 0..nf {
                        rhs[(l, c)] += w * psi[l] * r;
                    }
                }
            }
            let sol = mat
                .solve(&rhs)
                .expect("edge bubble moment matrix is invertible");
            let mut out = vec![T::zero(); m * nf];
            for c in 0..m {
                for i in 0..nf {
                    out[c * nf + i] = sol[(i, c)];
                }
            }
            out
        })
        .collect();

    // Element bubbles and conversion to degree k+3 monomials.
    let nq = dim_poly(k + 3);
    let nc = dim_poly(k);
    let tri_rule = TriangleRule::<T>::new(2 * k + 4);
    let coeffs: Vec<Vec<T>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let el = space.element(t);
            let tri = mesh.triangle(t);
            let eval_w2 = |c: usize, x: [T; 2]| -> T {
                let lam = barycentric(&el.points, x);
                let mut acc = eval_base(t, c, x);
                for e in 0..3 {
                    let s = el.sides[e];
                    let [va, vb] = mesh.side(s).vertices;
                    let ia = tri
                        .iter()
                        .position(|&g| g == va)
                        .expect("side vertex in triangle");
                    let ib = tri
                        .iter()
                        .position(|&g| g == vb)
                        .expect("side vertex in triangle");
                    for i in 0..nf {
                        acc += edge[s][c * nf + i] * edge_bubble(lam[ia], lam[ib], i, k);
                    }
                }
                acc
            };
            let (qp, qw) = tri_rule.on_triangle(&el.points, el.area);
            let mut mat = DMat::<T>::zeros(nc, nc);
            let mut rhs = DMat::zeros(nc, m);
            let mut phi = vec![T::zero(); nc];
            for (x, &w) in qp.iter().zip(&qw) {
                el.frame.eval(k, *x, &mut phi);
                let lam = barycentric(&el.points, *x);
                let bt = lam[0] * lam[1] * lam[2];
                for i in 0..nc {
                    for j in 0..nc {
                        mat[(i, j)] += w * bt * phi[i] * phi[j];
                    }
                }
                for c in 0..m {
                    let target = crate::real::dot(&phi, space.cell_coeffs(v, t, c));
                    let r = target - eval_w2(c, *x);
                    for i in 0..nc {
                        rhs[(i, c)] += w * phi[i] * r;
                    }
                }
            }
            let delta = mat
                .solve(&rhs)
                .expect("element bubble moment matrix is invertible");

            let fine = lattice(k + 3);
            let mut vand = DMat::zeros(nq, nq);
            let mut vals = DMat::zeros(nq, m);
            for (r, &a) in fine.iter().enumerate() {
                let x = lattice_point(&el.points, a, k + 3);
                el.frame.eval(k + 3, x, vand.row_mut(r));
                el.frame.eval(k, x, &mut phi);
                let lam = barycentric(&el.points, x);
                let bt = lam[0] * lam[1] * lam[2];
                for c in 0..m {
                    let mut b = T::zero();
                    for j in 0..nc {
                        b += delta[(j, c)] * phi[j];
                    }
                    vals[(r, c)] = eval_w2(c, x) + bt * b;
                }
            }
            let sol = vand.solve(&vals).expect("Lagrange nodes are unisolvent");
            let mut out = vec![T::zero(); m * nq];
            for c in 0..m {
                for i in 0..nq {
                    out[c * nq + i] = sol[(i, c)];
                }
            }
            out
        })
        .collect();

    PiecewisePolynomial {
        degree: k + 3,
        components: m,
        frames: (0..nt).map(|t| space.element(t).frame).collect(),
        coeffs: coeffs.into_iter().flatten().collect(),
    }
}

enum NodeKind {
    Vertex(usize),
    /// Interior node of the local side opposite the given vertex.
    Side(usize),
    Interior,
}

fn node_kind(a: [usize; 3], d: usize) -> NodeKind {
    if let Some(i) = a.iter().position(|&x| x == d) {
        return NodeKind::Vertex(i);
    }
    match a.iter().position(|&x| x == 0) {
        Some(e) => NodeKind::Side(e),
        None => NodeKind::Interior,
    }
}

/// Index `0..d-1` of an interior side node at parameter `t = (i+1)/d`.
fn side_node_index<T: Real>(t: &T, d: usize) -> usize {
    let i = (*t * T::from_usize_lossy(d))
        .round()
        .to_usize()
        .expect("finite parameter");
    i - 1
}
