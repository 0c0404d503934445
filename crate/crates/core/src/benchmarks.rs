//! Benchmark problems: initial meshes, data, densities and exact solutions.

use crate::densities::{EnergyDensity, Fhm, OptimalDesign, PLaplace, TwoWell};
use crate::mesh::{BoundaryLabel, Triangulation};
use crate::real::Real;
use crate::solver::{Field, LowerOrder, ProblemData};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkName {
    #[serde(rename = "p-laplace-lshape")]
    PLaplaceLshape,
    #[serde(rename = "odp-lshape")]
    OdpLshape,
    #[serde(rename = "two-well-rect")]
    TwoWellRect,
    #[serde(rename = "fhm-rect")]
    FhmRect,
    #[serde(rename = "manufactured-affine")]
    ManufacturedAffine,
}

impl BenchmarkName {
    pub const ALL: [Self; 5] = [
        Self::PLaplaceLshape,
        Self::OdpLshape,
        Self::TwoWellRect,
        Self::FhmRect,
        Self::ManufacturedAffine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PLaplaceLshape => "p-laplace-lshape",
            Self::OdpLshape => "odp-lshape",
            Self::TwoWellRect => "two-well-rect",
            Self::FhmRect => "fhm-rect",
            Self::ManufacturedAffine => "manufactured-affine",
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown benchmark `{0}` (expected one of p-laplace-lshape, odp-lshape, two-well-rect, fhm-rect, manufactured-affine)")]
pub struct UnknownBenchmark(pub String);

impl FromStr for BenchmarkName {
    type Err = UnknownBenchmark;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| UnknownBenchmark(s.to_string()))
    }
}

/// Which refinement indicator a benchmark calls for, on top of the choice
/// between the Raviart-Thomas and the stabilized variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndicatorFamily {
    Standard,
    /// Adds the oscillation of the lower-order data `ζ`.
    TwoWell,
    /// Quadratic terms only, component-wise boundary conditions, no stress
    /// or data terms.
    Fhm,
}

/// Exact minimizer, where known. Gradients and stresses are row-major
/// `m × 2`.
#[derive(Clone, Default)]
pub struct ExactSolution<T> {
    pub u: Option<Field<T>>,
    pub gradient: Option<Field<T>>,
    pub stress: Option<Field<T>>,
}

impl<T> fmt::Debug for ExactSolution<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("u", &self.u.is_some())
            .field("gradient", &self.gradient.is_some())
            .field("stress", &self.stress.is_some())
            .finish()
    }
}

#[derive(Debug)]
pub struct Benchmark<T> {
    pub name: BenchmarkName,
    pub initial_mesh: Triangulation<T>,
    pub density: Arc<dyn EnergyDensity<T>>,
    pub data: ProblemData<T>,
    pub exact: ExactSolution<T>,
    /// Minimal energy: exact where the minimizer is known, otherwise a
    /// published extrapolated value.
    pub reference_energy: T,
    pub indicator: IndicatorFamily,
}

impl<T: Real> Benchmark<T> {
    pub fn components(&self) -> usize {
        self.density.components()
    }

    pub fn new(name: BenchmarkName) -> Self {
        match name {
            BenchmarkName::PLaplaceLshape => p_laplace_lshape(),
            BenchmarkName::OdpLshape => odp_lshape(),
            BenchmarkName::TwoWellRect => two_well_rect(),
            BenchmarkName::FhmRect => fhm_rect(),
            BenchmarkName::ManufacturedAffine => manufactured_affine(),
        }
    }
}

fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

fn near<T: Real>(a: T, b: f64) -> bool {
    (a - T::lit(b)).abs() < T::lit(1e-10)
}

/// Polar angle in `[0, 2π)`.
fn angle<T: Real>(x: [T; 2]) -> T {
    let phi = x[1].atan2(x[0]);
    if phi < T::zero() {
        phi + T::TAU()
    } else {
        phi
    }
}

fn radius<T: Real>(x: [T; 2]) -> T {
    x[0].hypot(x[1])
}

fn points<T: Real>(p: &[[f64; 2]]) -> Vec<[T; 2]> {
    p.iter().map(|&[x, y]| [lit(x), lit(y)]).collect()
}

/// `(-1,1)² \ [0,1)×(-1,0]` in six triangles whose longest sides meet at the
/// re-entrant corner.
pub fn lshape_mesh<T: Real>(labeler: impl Fn([T; 2]) -> BoundaryLabel) -> Triangulation<T> {
    let vertices = points(&[
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
        [-1.0, 1.0],
        [-1.0, 0.0],
        [-1.0, -1.0],
        [0.0, -1.0],
    ]);
    let triangles = vec![
        [0, 1, 2],
        [0, 2, 3],
        [0, 3, 4],
        [0, 4, 5],
        [0, 5, 6],
        [0, 6, 7],
    ];
    Triangulation::new(vertices, triangles, |x| Some(labeler(x))).expect("valid L-shaped mesh")
}

/// `nx × ny` squares of side `h` with lower-left corner `origin`, each cut by
/// its rising diagonal.
pub fn grid_mesh<T: Real>(
    origin: [f64; 2],
    h: f64,
    nx: usize,
    ny: usize,
    labeler: impl Fn([T; 2]) -> BoundaryLabel,
) -> Triangulation<T> {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([lit(origin[0] + h * i as f64), lit(origin[1] + h * j as f64)]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Triangulation::new(vertices, triangles, |x| Some(labeler(x))).expect("valid grid mesh")
}

fn scalar_field<T: Real>(f: impl Fn([T; 2]) -> T + Send + Sync + 'static) -> Field<T> {
    Arc::new(move |x, out: &mut [T]| out[0] = f(x))
}

fn p_laplace_lshape<T: Real>() -> Benchmark<T> {
    let mesh = lshape_mesh(|x: [T; 2]| {
        if (near(x[0], 0.0) && x[1] < T::zero()) || (near(x[1], 0.0) && x[0] > T::zero()) {
            BoundaryLabel::Dirichlet
        } else {
            BoundaryLabel::Neumann
        }
    });
    let u = |x: [T; 2]| radius(x).powf(lit(7.0 / 8.0)) * (lit::<T>(7.0 / 8.0) * angle(x)).sin();
    let grad = |x: [T; 2]| -> [T; 2] {
        let (r, phi) = (radius(x), angle(x));
        let s = lit::<T>(7.0 / 8.0) * r.powf(lit(-1.0 / 8.0));
        let a = phi / lit(8.0);
        [-s * a.sin(), s * a.cos()]
    };
    let stress = move |x: [T; 2]| -> [T; 2] {
        let g = grad(x);
        let n2 = g[0] * g[0] + g[1] * g[1];
        [n2 * g[0], n2 * g[1]]
    };
    let data = ProblemData {
        source: Some(scalar_field(|x: [T; 2]| {
            lit::<T>(343.0 / 2048.0)
                * radius(x).powf(lit(-11.0 / 8.0))
                * (lit::<T>(7.0 / 8.0) * angle(x)).sin()
        })),
        neumann: Some(Arc::new(move |x: [T; 2], n: [T; 2], out: &mut [T]| {
            let s = stress(x);
            out[0] = s[0] * n[0] + s[1] * n[1];
        })),
        dirichlet: Some(scalar_field(u)),
        lower_order: None,
        singularity: Some([T::zero(), T::zero()]),
    };
    Benchmark {
        name: BenchmarkName::PLaplaceLshape,
        initial_mesh: mesh,
        density: Arc::new(PLaplace::new(lit(4.0))),
        data,
        exact: ExactSolution {
            u: Some(scalar_field(u)),
            gradient: Some(Arc::new(move |x, out: &mut [T]| {
                out[..2].copy_from_slice(&grad(x))
            })),
            stress: Some(Arc::new(move |x, out: &mut [T]| {
                out[..2].copy_from_slice(&stress(x))
            })),
        },
        reference_energy: lit(-1.4423089582447),
        indicator: IndicatorFamily::Standard,
    }
}

fn odp_lshape<T: Real>() -> Benchmark<T> {
    let mesh = lshape_mesh(|_: [T; 2]| BoundaryLabel::Dirichlet);
    Benchmark {
        name: BenchmarkName::OdpLshape,
        initial_mesh: mesh,
        density: Arc::new(OptimalDesign::standard()),
        data: ProblemData {
            source: Some(scalar_field(|_: [T; 2]| T::one())),
            ..Default::default()
        },
        exact: ExactSolution::default(),
        reference_energy: lit(-0.0745512),
        indicator: IndicatorFamily::Standard,
    }
}

/// Signed distance-like coordinate across the wells' normal direction.
fn two_well_rho<T: Real>(x: [T; 2]) -> T {
    (lit::<T>(3.0) * (x[0] - T::one()) + lit::<T>(2.0) * x[1]) / lit::<T>(13.0).sqrt()
}

/// Fidelity target; also the solution where the wells mix.
fn two_well_target<T: Real>(rho: T) -> T {
    -lit::<T>(3.0) * rho.powi(5) / lit(128.0) - rho.powi(3) / lit(3.0)
}

/// Solution on the side where the gradient leaves the wells' hull.
fn two_well_outer<T: Real>(rho: T) -> T {
    rho.powi(3) / lit(24.0) + rho
}

fn two_well_rect<T: Real>() -> Benchmark<T> {
    let mesh = grid_mesh([0.0, 0.0], 0.5, 2, 3, |_: [T; 2]| BoundaryLabel::Dirichlet);
    let u = |x: [T; 2]| {
        let rho = two_well_rho(x);
        if rho <= T::zero() {
            two_well_target(rho)
        } else {
            two_well_outer(rho)
        }
    };
    let grad = |x: [T; 2]| -> [T; 2] {
        let rho = two_well_rho(x);
        let du = if rho <= T::zero() {
            -lit::<T>(15.0) * rho.powi(4) / lit(128.0) - rho * rho
        } else {
            rho * rho / lit(8.0) + T::one()
        };
        let s = lit::<T>(13.0).sqrt();
        [du * lit::<T>(3.0) / s, du * lit::<T>(2.0) / s]
    };
    let density = TwoWell::<T>::standard();
    Benchmark {
        name: BenchmarkName::TwoWellRect,
        initial_mesh: mesh,
        density: Arc::new(density),
        data: ProblemData {
            // the fidelity term ‖v − target‖² with no separate load
            source: None,
            neumann: None,
            dirichlet: Some(scalar_field(u)),
            lower_order: Some(LowerOrder {
                zeta: scalar_field(|x: [T; 2]| two_well_target(two_well_rho(x))),
                weight: lit(2.0),
            }),
            singularity: None,
        },
        exact: ExactSolution {
            u: Some(scalar_field(u)),
            gradient: Some(Arc::new(move |x, out: &mut [T]| {
                out[..2].copy_from_slice(&grad(x))
            })),
            stress: Some(Arc::new(move |x, out: &mut [T]| {
                density.derivative(&grad(x), out)
            })),
        },
        reference_energy: lit(0.1078147674),
        indicator: IndicatorFamily::TwoWell,
    }
}

fn fhm_rect<T: Real>() -> Benchmark<T> {
    let vertices = points(&[
        [-1.0, 0.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
        [-1.0, 1.0],
    ]);
    let triangles = vec![[1, 2, 3], [1, 3, 4], [0, 1, 5], [1, 4, 5]];
    let mesh = Triangulation::new(vertices, triangles, |x: [T; 2]| {
        Some(if near(x[1], 0.0) && x[0] < T::zero() {
            BoundaryLabel::Gamma1
        } else if near(x[1], 0.0) {
            BoundaryLabel::Gamma2
        } else {
            BoundaryLabel::Gamma3
        })
    })
    .expect("valid rectangle mesh");
    // Square root of z = x1 + i x2 on the closed upper half-plane.
    let u = |x: [T; 2], out: &mut [T]| {
        let (r, phi) = (radius(x).sqrt(), angle(x) * lit(0.5));
        out[0] = r * phi.cos();
        out[1] = r * phi.sin();
    };
    let grad = |x: [T; 2], out: &mut [T]| {
        let (s, phi) = (lit::<T>(0.5) / radius(x).sqrt(), angle(x) * lit(0.5));
        let (c, si) = (s * phi.cos(), s * phi.sin());
        out[..4].copy_from_slice(&[c, si, -si, c]);
    };
    Benchmark {
        name: BenchmarkName::FhmRect,
        initial_mesh: mesh,
        density: Arc::new(Fhm),
        data: ProblemData {
            dirichlet: Some(Arc::new(u)),
            singularity: Some([T::zero(), T::zero()]),
            ..Default::default()
        },
        exact: ExactSolution {
            u: Some(Arc::new(u)),
            gradient: Some(Arc::new(grad)),
            // The gradient is conformal, where DW(A) = A.
            stress: Some(Arc::new(grad)),
        },
        reference_energy: lit(0.88137023556),
        indicator: IndicatorFamily::Fhm,
    }
}

/// Gradient of the affine exact solution of the manufactured problem.
pub const AFFINE_SLOPE: [f64; 2] = [1.0, -0.5];

fn manufactured_affine<T: Real>() -> Benchmark<T> {
    let mesh = grid_mesh([0.0, 0.0], 0.5, 2, 2, |x: [T; 2]| {
        if near(x[0], 0.0) || near(x[1], 0.0) {
            BoundaryLabel::Dirichlet
        } else {
            BoundaryLabel::Neumann
        }
    });
    let b: [T; 2] = [lit(AFFINE_SLOPE[0]), lit(AFFINE_SLOPE[1])];
    let u = move |x: [T; 2]| lit::<T>(0.5) + b[0] * x[0] + b[1] * x[1];
    // E(u) = |b|²/2 − ∫_{x=1} b₁ u − ∫_{y=1} b₂ u.
    let right = b[0] * (lit::<T>(0.5) + b[0] + b[1] * lit(0.5));
    let top = b[1] * (lit::<T>(0.5) + b[0] * lit(0.5) + b[1]);
    let energy = (b[0] * b[0] + b[1] * b[1]) * lit(0.5) - right - top;
    Benchmark {
        name: BenchmarkName::ManufacturedAffine,
        initial_mesh: mesh,
        density: Arc::new(PLaplace::new(lit(2.0))),
        data: ProblemData {
            source: None,
            neumann: Some(Arc::new(move |_, n: [T; 2], out: &mut [T]| {
                out[0] = b[0] * n[0] + b[1] * n[1]
            })),
            dirichlet: Some(scalar_field(u)),
            lower_order: None,
            singularity: None,
        },
        exact: ExactSolution {
            u: Some(scalar_field(u)),
            gradient: Some(Arc::new(move |_, out: &mut [T]| {
                out[..2].copy_from_slice(&b)
            })),
            stress: Some(Arc::new(move |_, out: &mut [T]| {
                out[..2].copy_from_slice(&b)
            })),
        },
        reference_energy: energy,
        indicator: IndicatorFamily::Standard,
    }
}
