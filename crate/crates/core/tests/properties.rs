//! Property tests over random refinements, markings and discrete functions.

use hho::adaptivity::{estimate, mark_doerfler, EstimatorKind, EstimatorParams};
use hho::benchmarks::{Benchmark, BenchmarkName};
use hho::diagnostics::invariants::{commutativity_defect, companion_jump, companion_moment_defect};
use hho::hho::{HhoSpace, Variant};
use hho::mesh::Triangulation;
use hho::solver::DiscreteProblem;
use proptest::prelude::*;
use std::sync::Arc;

/// Refines the L-shape `rounds` times, marking the triangles selected by
/// `picks` (taken modulo the current count).
fn refined(rounds: &[Vec<usize>]) -> Triangulation<f64> {
    let mut mesh = Benchmark::<f64>::new(BenchmarkName::PLaplaceLshape).initial_mesh;
    for picks in rounds {
        let n = mesh.n_triangles();
        let marked: Vec<usize> = picks.iter().map(|p| p % n).collect();
        mesh = mesh.refine(&marked).unwrap();
    }
    mesh
}

fn rounds() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..10_000, 1..6), 0..5)
}

/// Angles of a triangle, sorted; similar triangles give the same triple.
fn angles(p: &[[f64; 2]; 3]) -> [f64; 3] {
    let mut a = [0.0; 3];
    for i in 0..3 {
        let u = [p[(i + 1) % 3][0] - p[i][0], p[(i + 1) % 3][1] - p[i][1]];
        let v = [p[(i + 2) % 3][0] - p[i][0], p[(i + 2) % 3][1] - p[i][1]];
        a[i] = (u[0] * v[1] - u[1] * v[0])
            .abs()
            .atan2(u[0] * v[0] + u[1] * v[1]);
    }
    a.sort_by(f64::total_cmp);
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // [TRIVIAL]
    #[test]
    fn mesh_text_round_trip(r in rounds()) {
        let mesh = refined(&r);
        let text = mesh.to_text();
        let back = Triangulation::<f64>::from_text(&text).unwrap();
        prop_assert_eq!(back.to_text(), text);
        prop_assert_eq!(back.n_sides(), mesh.n_sides());
    }

    /// Bisection halves areas, keeps the domain, and produces at most four
    /// similarity classes per initial triangle.
    // [DERIVED]
    #[test]
    fn bisection_is_area_preserving_and_shape_regular(r in rounds()) {
        let initial = Benchmark::<f64>::new(BenchmarkName::PLaplaceLshape).initial_mesh;
        let mesh = refined(&r);
        prop_assert!((mesh.total_area() - initial.total_area()).abs() < 1e-12);
        let mut classes: Vec<Vec<[f64; 3]>> = vec![Vec::new(); initial.n_triangles()];
        let mut current = initial.clone();
        // the parent map of a refined mesh points one step back; rebuild the
        // ancestry by replaying the refinements
        let mut origin: Vec<usize> = (0..current.n_triangles()).collect();
        for picks in &r {
            let n = current.n_triangles();
            let marked: Vec<usize> = picks.iter().map(|p| p % n).collect();
            let next = current.refine(&marked).unwrap();
            origin = (0..next.n_triangles()).map(|t| origin[next.parent(t).unwrap()]).collect();
            current = next;
        }
        for t in 0..mesh.n_triangles() {
            let ratio = initial.area(origin[t]) / mesh.area(t);
            let level = ratio.log2().round();
            prop_assert!((ratio - level.exp2()).abs() < 1e-9 * ratio);
            let a = angles(&mesh.triangle_points(t));
            let list = &mut classes[origin[t]];
            if !list.iter().any(|b| (0..3).all(|i| (a[i] - b[i]).abs() < 1e-9)) {
                list.push(a);
            }
        }
        for list in &classes {
            prop_assert!(list.len() <= 4, "{} classes", list.len());
        }
    }

    // [DERIVED]
    #[test]
    fn doerfler_selects_a_sufficient_prefix(
        values in prop::collection::vec(0.0f64..10.0, 0..40),
        theta in 0.01f64..0.99,
    ) {
        let marked = mark_doerfler(&values, theta);
        let total: f64 = values.iter().sum();
        if total == 0.0 {
            prop_assert!(marked.is_empty());
        } else {
            let sum: f64 = marked.iter().map(|&i| values[i]).sum();
            prop_assert!(sum >= theta * total * (1.0 - 1e-12));
            // dropping the last selected value must fall short
            let last = values[*marked.last().unwrap()];
            prop_assert!(sum - last < theta * total);
            let min_marked = marked.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
            for i in (0..values.len()).filter(|i| !marked.contains(i)) {
                prop_assert!(values[i] <= min_marked);
            }
        }
    }

    // [PAPER]
    #[test]
    fn reconstruction_commutes_with_interpolation(
        r in rounds(),
        k in 0usize..3,
        c in prop::array::uniform6(-2.0f64..2.0),
        rt in any::<bool>(),
    ) {
        let variant = if rt { Variant::RaviartThomas } else { Variant::Stabilized };
        let space = HhoSpace::new(Arc::new(refined(&r[..r.len().min(2)])), k, 1, variant);
        let v = move |x: [f64; 2], out: &mut [f64]| {
            out[0] = c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * (c[4] * x[0] - x[1]).sin() + c[5] * x[0] * x[1] * x[1];
        };
        let g = move |x: [f64; 2], out: &mut [f64]| {
            let cs = (c[4] * x[0] - x[1]).cos();
            out[0] = c[1] + c[3] * c[4] * cs + c[5] * x[1] * x[1];
            out[1] = c[2] - c[3] * cs + 2.0 * c[5] * x[0] * x[1];
        };
        prop_assert!(commutativity_defect(&space, &v, &g, 2 * k + 14) < 1e-9);
    }

    // [PAPER]
    #[test]
    fn companion_matches_moments(
        r in rounds(),
        k in 0usize..3,
        seed in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let space = HhoSpace::new(Arc::new(refined(&r[..r.len().min(2)])), k, 1, Variant::RaviartThomas);
        let v: Vec<f64> = (0..space.ndof()).map(|i| seed[i % seed.len()] * (1.0 + (i / seed.len()) as f64).sqrt()).collect();
        prop_assert!(companion_moment_defect(&space, &v) < 1e-9);
        prop_assert!(companion_jump(&space, &v) < 1e-9);
    }

    // [DERIVED]
    #[test]
    fn estimator_terms_are_nonnegative(
        r in rounds(),
        seed in prop::collection::vec(-1.0f64..1.0, 32),
        rt in any::<bool>(),
    ) {
        let b = Benchmark::<f64>::new(BenchmarkName::PLaplaceLshape);
        let (variant, kind) = if rt {
            (Variant::RaviartThomas, EstimatorKind::RaviartThomas)
        } else {
            (Variant::Stabilized, EstimatorKind::Stabilized)
        };
        let space = Arc::new(HhoSpace::new(Arc::new(refined(&r[..r.len().min(2)])), 0, 1, variant));
        let problem = DiscreteProblem::new(space, b.density.clone(), b.data.clone()).unwrap();
        let mut u: Vec<f64> = (0..problem.space().ndof()).map(|i| seed[i % seed.len()]).collect();
        problem.impose_dirichlet(&mut u);
        let sigma = problem.stress(&u);
        let params = EstimatorParams { epsilon: 0.01, theta: 0.5, kind };
        let est = estimate(&problem, &u, &sigma, &params).unwrap();
        for e in &est.elements {
            for term in [e.volume, e.stress, e.oscillation_f, e.oscillation_g, e.dirichlet, e.jumps, e.traces, e.oscillation_zeta] {
                prop_assert!(term >= 0.0 && term.is_finite());
            }
        }
        let sum: f64 = est.indicators().iter().sum();
        prop_assert!((sum - est.total).abs() <= 1e-12 * est.total.max(1.0));
    }
}
