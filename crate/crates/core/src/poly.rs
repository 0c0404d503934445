//! Polynomial bases on triangles and sides, Raviart-Thomas fields, and
//! Gauss quadrature of arbitrary degree.
//!
//! Cell polynomials use scaled monomials `((x - c) / h)^α` about the
//! centroid `c` with `h` the triangle diameter, ordered by total degree and
//! then by the power of the second coordinate. Side polynomials use powers of
//! `t - 1/2` where `t ∈ [0, 1]` runs from the first to the second side vertex.

use crate::real::Real;
use faer::{Mat, Side};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Dimension of the polynomials of total degree at most `d` in two variables.
pub const fn dim_poly(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Exponent pairs of the cell monomials of degree at most `d`.
pub fn exponents(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_poly(d));
    for s in 0..=d {
        for b in 0..=s {
            out.push((s - b, b));
        }
    }
    out
}

/// Affine frame of a triangle used to scale the monomial basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellFrame<T> {
    pub center: [T; 2],
    pub scale: T,
}

impl<T: Real> CellFrame<T> {
    pub fn new(points: &[[T; 2]; 3]) -> Self {
        let third = T::lit(1.0 / 3.0);
        let center = [
            (points[0][0] + points[1][0] + points[2][0]) * third,
            (points[0][1] + points[1][1] + points[2][1]) * third,
        ];
        let mut scale = T::zero();
        for i in 0..3 {
            let j = (i + 1) % 3;
            let d = [points[j][0] - points[i][0], points[j][1] - points[i][1]];
            scale = scale.max((d[0] * d[0] + d[1] * d[1]).sqrt());
        }
        Self { center, scale }
    }

    #[inline]
    pub fn local(&self, x: [T; 2]) -> [T; 2] {
        [
            (x[0] - self.center[0]) / self.scale,
            (x[1] - self.center[1]) / self.scale,
        ]
    }

    /// Values of the degree-`d` monomials at `x`.
    pub fn eval(&self, d: usize, x: [T; 2], out: &mut [T]) {
        let [px, py] = powers(self.local(x), d);
        let mut i = 0;
        for s in 0..=d {
            for b in 0..=s {
                out[i] = px[s - b] * py[b];
                i += 1;
            }
        }
    }

    pub fn eval_vec(&self, d: usize, x: [T; 2]) -> Vec<T> {
        let mut out = vec![T::zero(); dim_poly(d)];
        self.eval(d, x, &mut out);
        out
    }

    /// Gradients of the degree-`d` monomials at `x`.
    pub fn eval_grad(&self, d: usize, x: [T; 2], out: &mut [[T; 2]]) {
        let [px, py] = powers(self.local(x), d);
        let inv = T::one() / self.scale;
        let mut i = 0;
        for s in 0..=d {
            for b in 0..=s {
                let a = s - b;
                let gx = if a > 0 {
                    T::from_usize_lossy(a) * px[a - 1] * py[b]
                } else {
                    T::zero()
                };
                let gy = if b > 0 {
                    T::from_usize_lossy(b) * px[a] * py[b - 1]
                } else {
                    T::zero()
                };
                out[i] = [gx * inv, gy * inv];
                i += 1;
            }
        }
    }

    /// Laplacians of the degree-`d` monomials at `x`.
    pub fn eval_laplacian(&self, d: usize, x: [T; 2], out: &mut [T]) {
        let [px, py] = powers(self.local(x), d);
        let inv2 = T::one() / (self.scale * self.scale);
        let mut i = 0;
        for s in 0..=d {
            for b in 0..=s {
                let a = s - b;
                let mut v = T::zero();
                if a > 1 {
                    v += T::from_usize_lossy(a * (a - 1)) * px[a - 2] * py[b];
                }
                if b > 1 {
                    v += T::from_usize_lossy(b * (b - 1)) * px[a] * py[b - 2];
                }
                out[i] = v * inv2;
                i += 1;
            }
        }
    }
}

#[inline]
fn powers<T: Real>(x: [T; 2], d: usize) -> [Vec<T>; 2] {
    let mut px = Vec::with_capacity(d + 1);
    let mut py = Vec::with_capacity(d + 1);
    px.push(T::one());
    py.push(T::one());
    for i in 1..=d {
        px.push(px[i - 1] * x[0]);
        py.push(py[i - 1] * x[1]);
    }
    [px, py]
}

/// Parametrization of a side from its first to its second vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SideFrame<T> {
    pub start: [T; 2],
    pub end: [T; 2],
    pub length: T,
}

impl<T: Real> SideFrame<T> {
    pub fn new(start: [T; 2], end: [T; 2]) -> Self {
        let d = [end[0] - start[0], end[1] - start[1]];
        Self {
            start,
            end,
            length: (d[0] * d[0] + d[1] * d[1]).sqrt(),
        }
    }

    pub fn point(&self, t: T) -> [T; 2] {
        [
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
        ]
    }

    /// Parameter of the orthogonal projection of `x` onto the side line.
    pub fn param(&self, x: [T; 2]) -> T {
        let d = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        ((x[0] - self.start[0]) * d[0] + (x[1] - self.start[1]) * d[1])
            / (self.length * self.length)
    }

    /// Values of the side basis of degree `k` at parameter `t`.
    pub fn eval(&self, k: usize, t: T, out: &mut [T]) {
        let s = t - T::lit(0.5);
        out[0] = T::one();
        for j in 1..=k {
            out[j] = out[j - 1] * s;
        }
    }
}

/// Local space for the discrete gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FluxSpace {
    /// `RT_k = P_k(T;R²) + x P̃_k(T)`.
    RaviartThomas,
    /// `P_k(T;R²)`.
    Polynomial,
}

impl FluxSpace {
    pub fn dim(self, k: usize) -> usize {
        match self {
            Self::RaviartThomas => (k + 1) * (k + 3),
            Self::Polynomial => 2 * dim_poly(k),
        }
    }
}

/// Values of the flux basis at `x`: first `(φ_i, 0)`, then `(0, φ_i)` for
/// the cell monomials `φ_i` of degree `k`, then (Raviart-Thomas only) `X m`
/// for the homogeneous degree-`k` monomials `m` with `X = (x - c) / h`.
pub fn eval_flux<T: Real>(
    space: FluxSpace,
    frame: &CellFrame<T>,
    k: usize,
    x: [T; 2],
    out: &mut [[T; 2]],
) {
    let loc = frame.local(x);
    let [px, py] = powers(loc, k);
    let nk = dim_poly(k);
    let mut i = 0;
    for s in 0..=k {
        for b in 0..=s {
            let v = px[s - b] * py[b];
            out[i] = [v, T::zero()];
            out[nk + i] = [T::zero(), v];
            i += 1;
        }
    }
    if space == FluxSpace::RaviartThomas {
        for b in 0..=k {
            let m = px[k - b] * py[b];
            out[2 * nk + b] = [loc[0] * m, loc[1] * m];
        }
    }
}

/// Divergences of the flux basis at `x`.
pub fn eval_flux_div<T: Real>(
    space: FluxSpace,
    frame: &CellFrame<T>,
    k: usize,
    x: [T; 2],
    out: &mut [T],
) {
    let loc = frame.local(x);
    let [px, py] = powers(loc, k);
    let inv = T::one() / frame.scale;
    let nk = dim_poly(k);
    let mut i = 0;
    for s in 0..=k {
        for b in 0..=s {
            let a = s - b;
            out[i] = if a > 0 {
                T::from_usize_lossy(a) * px[a - 1] * py[b] * inv
            } else {
                T::zero()
            };
            out[nk + i] = if b > 0 {
                T::from_usize_lossy(b) * px[a] * py[b - 1] * inv
            } else {
                T::zero()
            };
            i += 1;
        }
    }
    if space == FluxSpace::RaviartThomas {
        // div(X m) = (2 + k) m / h by Euler's identity for homogeneous m.
        for b in 0..=k {
            out[2 * nk + b] = T::from_usize_lossy(k + 2) * px[k - b] * py[b] * inv;
        }
    }
}

/// Quadrature on the reference triangle `{ξ, η ≥ 0, ξ + η ≤ 1}`; weights sum
/// to 1/2.
#[derive(Clone, Debug)]
pub struct TriangleRule<T> {
    pub degree: usize,
    pub points: Vec<[T; 2]>,
    pub weights: Vec<T>,
}

/// Quadrature on `[0, 1]`; weights sum to 1.
#[derive(Clone, Debug)]
pub struct LineRule<T> {
    pub degree: usize,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> TriangleRule<T> {
    /// Rule exact for polynomials of total degree `degree`.
    pub fn new(degree: usize) -> Self {
        let r = cached_triangle_rule(degree);
        Self {
            degree,
            points: r
                .points
                .iter()
                .map(|p| [T::lit(p[0]), T::lit(p[1])])
                .collect(),
            weights: r.weights.iter().map(|&w| T::lit(w)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points and weights on the triangle with vertices `p`.
    pub fn on_triangle(&self, p: &[[T; 2]; 3], area: T) -> (Vec<[T; 2]>, Vec<T>) {
        let scale = T::lit(2.0) * area;
        let pts = self
            .points
            .iter()
            .map(|&[xi, eta]| {
                [
                    p[0][0] + xi * (p[1][0] - p[0][0]) + eta * (p[2][0] - p[0][0]),
                    p[0][1] + xi * (p[1][1] - p[0][1]) + eta * (p[2][1] - p[0][1]),
                ]
            })
            .collect();
        let w = self.weights.iter().map(|&w| w * scale).collect();
        (pts, w)
    }

    /// Like [`TriangleRule::on_triangle`], but when `singular` is a vertex of
    /// the triangle the rule is applied on a geometric subdivision graded
    /// towards it. Suited to integrands with an algebraic point singularity.
    pub fn on_triangle_graded(
        &self,
        p: &[[T; 2]; 3],
        area: T,
        singular: Option<[T; 2]>,
    ) -> (Vec<[T; 2]>, Vec<T>) {
        let Some(x0) = singular else {
            return self.on_triangle(p, area);
        };
        let tol = T::lit(1e-12) * area.sqrt();
        let Some(i) = p
            .iter()
            .position(|v| (v[0] - x0[0]).abs() <= tol && (v[1] - x0[1]).abs() <= tol)
        else {
            return self.on_triangle(p, area);
        };
        let mid = |a: [T; 2], b: [T; 2]| [(a[0] + b[0]) * T::lit(0.5), (a[1] + b[1]) * T::lit(0.5)];
        let (v, mut a, mut b) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
        let mut child_area = area;
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        for _ in 0..GRADED_LEVELS {
            child_area *= T::lit(0.25);
            let (ma, mb, mab) = (mid(v, a), mid(v, b), mid(a, b));
            for tri in [[ma, a, mab], [mb, mab, b], [ma, mab, mb]] {
                let (q, w) = self.on_triangle(&tri, child_area);
                pts.extend(q);
                wts.extend(w);
            }
            a = ma;
            b = mb;
        }
        let (q, w) = self.on_triangle(&[v, a, b], child_area);
        pts.extend(q);
        wts.extend(w);
        (pts, wts)
    }
}

/// Subdivision depth of graded rules; the innermost triangle has area
/// `4^{-GRADED_LEVELS}` of the original.
const GRADED_LEVELS: usize = 40;

impl<T: Real> LineRule<T> {
    pub fn new(degree: usize) -> Self {
        let r = cached_line_rule(degree);
        Self {
            degree,
            nodes: r.nodes.iter().map(|&x| T::lit(x)).collect(),
            weights: r.weights.iter().map(|&w| T::lit(w)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn cached_triangle_rule(degree: usize) -> Arc<TriangleRule<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TriangleRule<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(degree)
        .or_insert_with(|| Arc::new(build_triangle_rule(degree)))
        .clone()
}

fn cached_line_rule(degree: usize) -> Arc<LineRule<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<LineRule<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(degree)
        .or_insert_with(|| {
            let n = degree / 2 + 1;
            let (x, w) = gauss_jacobi(n, 0.0, 0.0);
            Arc::new(LineRule {
                degree,
                nodes: x.iter().map(|&x| 0.5 * (x + 1.0)).collect(),
                weights: w.iter().map(|&w| 0.5 * w).collect(),
            })
        })
        .clone()
}

/// Collapsed product rule: Gauss-Jacobi in ξ with weight `1 - ξ` and
/// Gauss-Legendre along the collapsed direction.
fn build_triangle_rule(degree: usize) -> TriangleRule<f64> {
    let n = degree / 2 + 1;
    let (xj, wj) = gauss_jacobi(n, 1.0, 0.0);
    let (xl, wl) = gauss_jacobi(n, 0.0, 0.0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&x, &w) in xj.iter().zip(&wj) {
        let xi = 0.5 * (x + 1.0);
        for (&t, &v) in xl.iter().zip(&wl) {
            let s = 0.5 * (t + 1.0);
            points.push([xi, (1.0 - xi) * s]);
            weights.push(0.25 * w * 0.5 * v);
        }
    }
    TriangleRule {
        degree,
        points,
        weights,
    }
}

/// Golub-Welsch nodes and weights on `[-1, 1]` for the weight
/// `(1 - x)^α (1 + x)^β`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let ab = alpha + beta;
    let mut jac = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let fi = i as f64;
        jac[(i, i)] = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * fi + ab) * (2.0 * fi + ab + 2.0))
        };
        if i + 1 < n {
            let k = fi + 1.0;
            let num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
            let den = (2.0 * k + ab).powi(2) * (2.0 * k + ab + 1.0) * (2.0 * k + ab - 1.0);
            let b = (num / den).sqrt();
            jac[(i, i + 1)] = b;
            jac[(i + 1, i)] = b;
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0);
    let eig = jac
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric tridiagonal eigenproblem converges");
    let s = eig.S().column_vector();
    let u = eig.U();
    let nodes = (0..n).map(|i| s[i]).collect();
    let weights = (0..n).map(|i| mu0 * u[(0, i)] * u[(0, i)]).collect();
    (nodes, weights)
}

/// Gamma function at the small non-negative integers and half-integers the
/// rules need.
fn gamma(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-12 && r >= 1.0 {
        (1..r as u64).map(|k| k as f64).product()
    } else {
        panic!("gamma is only needed at positive integers, got {x}")
    }
}
