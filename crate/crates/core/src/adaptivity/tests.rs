use super::*;
use crate::benchmarks::BenchmarkName;
use crate::densities::PLaplace;
use crate::mesh::BoundaryLabel;
use crate::solver::ProblemData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(kind: EstimatorKind) -> EstimatorParams {
    EstimatorParams {
        epsilon: 0.01,
        theta: 0.5,
        kind,
    }
}

fn square() -> Arc<Triangulation<f64>> {
    let mesh = Triangulation::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
        |x| {
            Some(if x[0] < 1e-12 || x[1] < 1e-12 {
                BoundaryLabel::Dirichlet
            } else {
                BoundaryLabel::Neumann
            })
        },
    )
    .unwrap()
    .refine_uniform();
    Arc::new(mesh)
}

fn data() -> ProblemData<f64> {
    ProblemData {
        source: Some(Arc::new(|x: [f64; 2], out: &mut [f64]| {
            out[0] = (3.0 * x[0]).sin() + x[1]
        })),
        neumann: Some(Arc::new(|x: [f64; 2], n: [f64; 2], out: &mut [f64]| {
            out[0] = x[0].exp() * n[0] - x[1] * x[1] * n[1];
        })),
        dirichlet: Some(Arc::new(|x: [f64; 2], out: &mut [f64]| {
            out[0] = x[0] * x[0] - 2.0 * x[1] + x[0] * x[1]
        })),
        lower_order: None,
        singularity: None,
    }
}

// [TRIVIAL]
#[test]
fn doerfler_small_examples() {
    assert_eq!(mark_doerfler(&[4.0, 3.0, 2.0, 1.0], 0.5), vec![0, 1]);
    assert_eq!(mark_doerfler(&[1.0, 4.0, 3.0, 2.0], 1e-9), vec![1]);
    assert_eq!(mark_doerfler(&[2.0, 2.0, 1.0], 0.5), vec![0, 1]);
    assert!(mark_doerfler(&[0.0, 0.0], 0.5).is_empty());
    assert!(mark_doerfler::<f64>(&[], 0.5).is_empty());
}

/// Brute force over all subsets on dyadic values, for which every partial
/// sum is exact.
// [DERIVED]
#[test]
fn doerfler_matches_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        let values: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0..1024) as f64 / 1024.0)
            .collect();
        let theta = rng.gen_range(1..1024) as f64 / 1024.0;
        let total: f64 = values.iter().sum();
        let marked = mark_doerfler(&values, theta);
        if total == 0.0 {
            assert!(marked.is_empty());
            continue;
        }
        let best = (0u32..1 << n)
            .filter(|mask| {
                let s: f64 = (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| values[i])
                    .sum();
                s >= theta * total
            })
            .map(u32::count_ones)
            .min()
            .unwrap();
        let s: f64 = marked.iter().map(|&i| values[i]).sum();
        assert!(s >= theta * total);
        assert_eq!(marked.len(), best as usize, "{values:?} {theta}");
    }
}

// [PAPER]
#[test]
fn epsilon_ranges() {
    let mut p = params(EstimatorKind::RaviartThomas);
    p.epsilon = 5.0;
    let err = p.validate(0, 4.0, Variant::RaviartThomas).unwrap_err();
    assert!(err.to_string().contains("0 < eps <= k+1"));
    p.epsilon = 1.0;
    assert!(p.validate(0, 4.0, Variant::RaviartThomas).is_ok());
    let mut s = params(EstimatorKind::Stabilized);
    s.epsilon = 0.5;
    assert!(matches!(
        s.validate(0, 4.0, Variant::Stabilized),
        Err(ParamError::EpsilonStabilized { .. })
    ));
    s.epsilon = 1.0 / 3.0;
    assert!(s.validate(0, 4.0, Variant::Stabilized).is_ok());
    assert!(matches!(
        s.validate(0, 4.0, Variant::RaviartThomas),
        Err(ParamError::VariantMismatch { .. })
    ));
    s.epsilon = 0.0;
    assert!(s.validate(0, 4.0, Variant::Stabilized).is_ok() && s.is_degenerate());
    s.theta = 1.0;
    assert_eq!(
        s.validate(0, 4.0, Variant::Stabilized),
        Err(ParamError::Theta(1.0))
    );
}

/// Every term vanishes at the exact discrete solution of the affine problem
/// for the Raviart-Thomas indicator. The stabilized indicator compares the
/// potential with the unprojected cell and side unknowns, which differ for an
/// affine function when `k = 0`; its remaining terms vanish.
// [TRIVIAL]
#[test]
fn estimator_vanishes_for_affine_solution() {
    let b = Benchmark::<f64>::new(BenchmarkName::ManufacturedAffine);
    for variant in [Variant::RaviartThomas, Variant::Stabilized] {
        for k in 0..3 {
            let space = Arc::new(HhoSpace::new(
                Arc::new(b.initial_mesh.clone()),
                k,
                1,
                variant,
            ));
            let problem =
                DiscreteProblem::new(space.clone(), b.density.clone(), b.data.clone()).unwrap();
            let u = space.interpolate(b.exact.u.as_ref().unwrap().as_ref(), 2 * k + 4);
            let sigma = problem.stress(&u);
            let kind = EstimatorKind::for_benchmark(b.indicator, variant);
            let est = estimate(&problem, &u, &sigma, &params(kind)).unwrap();
            let rest: f64 = est
                .elements
                .iter()
                .map(|e| e.stress + e.oscillation_f + e.oscillation_g + e.dirichlet + e.jumps)
                .sum();
            assert!(rest < 1e-20, "{variant:?} k={k}: {rest:e}");
            match (variant, k) {
                (Variant::RaviartThomas, _) | (Variant::Stabilized, 1..) => {
                    assert!(est.total < 1e-20, "{variant:?} k={k}: {:e}", est.total)
                }
                _ => assert!(est.total > 1e-6),
            }
        }
    }
}

/// Volume, jump, trace and Dirichlet terms of the stabilized indicator
/// against direct pointwise evaluation with finer rules.
// [DERIVED]
#[test]
fn stabilized_terms_match_direct_quadrature() {
    let mesh = square();
    for k in [0, 1] {
        let space = Arc::new(HhoSpace::new(mesh.clone(), k, 1, Variant::Stabilized));
        let problem =
            DiscreteProblem::new(space.clone(), Arc::new(PLaplace::new(4.0)), data()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3 + k as u64);
        let mut u: Vec<f64> = (0..space.ndof())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        problem.impose_dirichlet(&mut u);
        let sigma = problem.stress(&u);
        let mut prm = params(EstimatorKind::Stabilized);
        prm.epsilon = 0.3;
        let est = estimate(&problem, &u, &sigma, &prm).unwrap();

        let (p, eps) = (4.0, 0.3);
        let r = space.potential_field(&u);
        let cell = space.cell_field(&u);
        let tri = TriangleRule::<f64>::new(4 * (k + 1) + 8);
        let line = LineRule::<f64>::new(4 * (k + 1) + 8);
        let ud = data().dirichlet.unwrap();
        let (mut a, mut b) = ([0.0], [0.0]);
        for t in 0..mesh.n_triangles() {
            let el = space.element(t);
            let (pts, wts) = tri.on_triangle(&el.points, el.area);
            let vol: f64 = pts
                .iter()
                .zip(&wts)
                .map(|(x, w)| {
                    r.eval(t, *x, &mut a);
                    cell.eval(t, *x, &mut b);
                    w * (a[0] - b[0]).abs().powf(p)
                })
                .sum();
            let vol = el.area.powf((eps * p - p) / 2.0) * vol;
            let (mut jumps, mut traces, mut dir) = (0.0, 0.0, 0.0);
            for e in 0..3 {
                let s = el.sides[e];
                let side = mesh.side(s);
                let sf = space.side_frame(s);
                for (&tq, &wq) in line.nodes.iter().zip(&line.weights) {
                    let x = sf.point(tq);
                    let w = wq * sf.length;
                    r.eval(t, x, &mut a);
                    traces += w * (a[0] - space.eval_side(&u, s, 0, tq)).abs().powf(p);
                    match side.neighbor {
                        Some(o) => {
                            let nb = if o == t { side.owner } else { o };
                            r.eval(nb, x, &mut b);
                            jumps += w * (a[0] - b[0]).abs().powf(p);
                        }
                        None if side.label == BoundaryLabel::Dirichlet => {
                            ud(x, &mut b);
                            dir += w * (a[0] - b[0]).abs().powf(p);
                        }
                        None => {}
                    }
                }
            }
            let sw = el.area.powf((eps * p + 1.0 - p) / 2.0);
            let got = &est.elements[t];
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-10 * y.abs().max(1e-14);
            assert!(close(got.volume, vol), "{} {}", got.volume, vol);
            assert!(close(got.jumps, sw * jumps));
            assert!(close(got.traces, sw * traces));
            assert!(
                close(got.dirichlet, sw * dir),
                "{} {}",
                got.dirichlet,
                sw * dir
            );
            assert!(got.oscillation_f > 0.0 && got.stress >= 0.0);
        }
        let sum: f64 = est.indicators().iter().sum();
        assert!((sum - est.total).abs() <= 1e-14 * est.total);
    }
}

/// For `p = 2` the projected Raviart-Thomas volume term is a mass-matrix
/// quadratic form in the coefficients of `Π_T^k R u − u_T`.
// [DERIVED]
#[test]
fn projected_volume_term_is_mass_form() {
    let mesh = square();
    let k = 1;
    let space = Arc::new(HhoSpace::new(mesh.clone(), k, 1, Variant::RaviartThomas));
    let problem =
        DiscreteProblem::new(space.clone(), Arc::new(PLaplace::new(2.0)), data()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut u: Vec<f64> = (0..space.ndof())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    problem.impose_dirichlet(&mut u);
    let sigma = problem.stress(&u);
    let mut prm = params(EstimatorKind::RaviartThomas);
    prm.epsilon = 1.5;
    let est = estimate(&problem, &u, &sigma, &prm).unwrap();
    let r = space.potential_field(&u);
    for t in 0..mesh.n_triangles() {
        let el = space.element(t);
        let proj = space.project_cell(t, &|x, out: &mut [f64]| r.eval(t, x, out), 2 * k + 2);
        let d: Vec<f64> = proj
            .iter()
            .zip(space.cell_coeffs(&u, t, 0))
            .map(|(a, b)| a - b)
            .collect();
        let md = el.cell_mass.mul_vec(&d);
        let expected = el.area.powf(1.5 - 1.0) * dot(&d, &md);
        assert!((est.elements[t].volume - expected).abs() <= 1e-10 * expected.max(1e-14));
    }
}

fn nested_pair(
    k: usize,
    dirichlet: crate::solver::Field<f64>,
) -> (Arc<HhoSpace<f64>>, DiscreteProblem<f64>) {
    let coarse = square();
    let fine = Arc::new(coarse.refine(&[0, 3, 5]).unwrap());
    let cs = Arc::new(HhoSpace::new(coarse, k, 1, Variant::RaviartThomas));
    let fs = Arc::new(HhoSpace::new(fine, k, 1, Variant::RaviartThomas));
    let data = ProblemData {
        dirichlet: Some(dirichlet),
        ..Default::default()
    };
    (
        cs,
        DiscreteProblem::new(fs, Arc::new(PLaplace::new(2.0)), data).unwrap(),
    )
}

// [DERIVED]
#[test]
fn prolongation_reproduces_polynomials() {
    for k in 0..3 {
        let q: crate::solver::Field<f64> = Arc::new(move |x: [f64; 2], out: &mut [f64]| {
            let mut v = 0.5 - x[0] + 2.0 * x[1];
            if k >= 1 {
                v += x[0] * x[0] - 0.7 * x[0] * x[1];
            }
            if k >= 2 {
                v += x[1].powi(3) - x[0] * x[0] * x[1];
            }
            out[0] = v;
        });
        let (cs, fine) = nested_pair(k, q.clone());
        let uc = cs.interpolate(q.as_ref(), 2 * k + 6);
        let v = prolong(&cs, &uc, &fine).unwrap();
        let expected = fine.space().interpolate(q.as_ref(), 2 * k + 6);
        for (a, b) in v.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-11, "k={k}: {a} vs {b}");
        }
    }
}

// [TRIVIAL]
#[test]
fn prolongation_keeps_constants() {
    let c: crate::solver::Field<f64> = Arc::new(|_, out: &mut [f64]| out[0] = 1.25);
    let (cs, fine) = nested_pair(1, c);
    let uc = cs.interpolate(&|_, out: &mut [f64]| out[0] = 1.25, 4);
    let v = prolong(&cs, &uc, &fine).unwrap();
    let nc = cs.n_cell_basis();
    for t in 0..fine.space().mesh().n_triangles() {
        let coeffs = fine.space().cell_coeffs(&v, t, 0);
        let val = coeffs[0];
        assert!((val - 1.25).abs() < 1e-12 && coeffs[1..nc].iter().all(|x| x.abs() < 1e-12));
    }
}

// [TRIVIAL]
#[test]
fn prolongation_rejects_unrelated_meshes() {
    let coarse = Arc::new(HhoSpace::new(
        Arc::new(square().refine_uniform()),
        0,
        1,
        Variant::RaviartThomas,
    ));
    let other = Arc::new(HhoSpace::new(square(), 0, 1, Variant::RaviartThomas));
    let problem =
        DiscreteProblem::new(other, Arc::new(PLaplace::new(2.0)), ProblemData::default()).unwrap();
    let u = vec![0.0; coarse.ndof()];
    assert!(matches!(
        prolong(&coarse, &u, &problem),
        Err(ProlongError::NotNested(_))
    ));
}

fn settings(
    mode: RefinementMode,
    variant: Variant,
    kind: EstimatorKind,
    max_ndof: usize,
) -> DriverSettings {
    DriverSettings {
        degree: 0,
        variant,
        mode,
        params: params(kind),
        max_ndof,
        max_levels: None,
        solver: SolverSettings::default(),
        zero_estimator: 1e-20,
    }
}

// [TRIVIAL]
#[test]
fn affine_run_stops_on_zero_estimator() {
    let b = Benchmark::<f64>::new(BenchmarkName::ManufacturedAffine);
    let mut levels = 0;
    let stop = run(
        &b,
        &settings(
            RefinementMode::Adaptive,
            Variant::RaviartThomas,
            EstimatorKind::RaviartThomas,
            10_000,
        ),
        |o| {
            levels += 1;
            assert!((o.solution.energy - b.reference_energy).abs() < 1e-12);
            Ok::<_, ()>(true)
        },
    )
    .unwrap();
    assert_eq!((stop, levels), (StopReason::ZeroEstimator, 1));
}

// [DERIVED]
#[test]
fn uniform_run_grows_fourfold_and_respects_budget() {
    let b = Benchmark::<f64>::new(BenchmarkName::PLaplaceLshape);
    let mut ndofs = Vec::new();
    let stop = run(
        &b,
        &settings(
            RefinementMode::Uniform,
            Variant::RaviartThomas,
            EstimatorKind::RaviartThomas,
            400,
        ),
        |o| {
            ndofs.push(o.ndof());
            assert_eq!(o.mesh().n_triangles(), 6 << (2 * o.level));
            Ok::<_, ()>(true)
        },
    )
    .unwrap();
    assert_eq!(stop, StopReason::MaxNdof);
    assert!(ndofs.len() >= 3 && ndofs.iter().all(|&n| n <= 400));
    assert!(ndofs.windows(2).all(|w| w[1] > 3 * w[0]));
}

// [PAPER]
#[test]
fn adaptive_run_refines_towards_the_corner() {
    let b = Benchmark::<f64>::new(BenchmarkName::PLaplaceLshape);
    let mut min_h = Vec::new();
    run(
        &b,
        &settings(
            RefinementMode::Adaptive,
            Variant::RaviartThomas,
            EstimatorKind::RaviartThomas,
            600,
        ),
        |o| {
            let mesh = o.mesh();
            let (t, _) = (0..mesh.n_triangles())
                .map(|t| (t, mesh.area(t)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let [x, y] = mesh.centroid(t);
            min_h.push((mesh.mesh_size(t), x.hypot(y)));
            Ok::<_, ()>(true)
        },
    )
    .unwrap();
    let (h, r) = *min_h.last().unwrap();
    assert!(min_h.len() >= 4);
    assert!(h < min_h[0].0 / 4.0 && r < 0.1, "{min_h:?}");
}
