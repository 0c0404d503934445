//! One run: solve the levels, write tables, meshes and a summary.

use crate::config::RunConfig;
use crate::output::{bounds_row, convergence_row, Table, BOUNDS_COLUMNS, CONVERGENCE_COLUMNS};
use anyhow::Context;
use hho::adaptivity::{self, DriverError, StopReason};
use hho::benchmarks::Benchmark;
use hho::diagnostics::{aitken, fit_rate, level_report, LevelReport, RateFit};
use serde::Serialize;
use std::path::Path;

#[derive(Clone, Debug, Serialize)]
pub struct Rate {
    pub quantity: &'static str,
    pub slope: f64,
    pub residual: f64,
}

/// Written to `summary.json` after a completed run.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub benchmark: String,
    pub levels: usize,
    pub stop: String,
    pub reference_energy: f64,
    /// Aitken extrapolation of the last three energies.
    pub extrapolated_energy: Option<f64>,
    pub extrapolation_degenerate: Option<bool>,
    /// Slopes against the number of unknowns, in log-log scale, over the
    /// last four levels.
    pub rates: Vec<Rate>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub reports: Vec<LevelReport>,
    pub stop: StopReason,
    pub summary: Summary,
}

#[derive(Serialize)]
struct RunEcho<'a> {
    config: &'a RunConfig,
    epsilon: f64,
    estimator: adaptivity::EstimatorKind,
    density: &'static str,
    reference_energy: f64,
    initial_vertices: usize,
    initial_triangles: usize,
}

/// Window of the fitted slopes in the summary.
const RATE_WINDOW: usize = 4;

fn rate(
    quantity: &'static str,
    reports: &[LevelReport],
    f: impl Fn(&LevelReport) -> Option<f64>,
) -> Option<Rate> {
    let (n, v): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .filter_map(|r| Some((r.ndof as f64, f(r)?)))
        .unzip();
    let RateFit {
        slope, residual, ..
    } = fit_rate(&n, &v, Some(RATE_WINDOW))?;
    Some(Rate {
        quantity,
        slope,
        residual,
    })
}

pub fn summarize(benchmark: &Benchmark<f64>, reports: &[LevelReport], stop: StopReason) -> Summary {
    let energies: Vec<f64> = reports.iter().map(|r| r.energy).collect();
    let extrapolation = aitken(&energies);
    let rates = [
        rate("err_energy", reports, |r| Some(r.err_energy)),
        rate("estimator", reports, |r| Some(r.estimator)),
        rate("err_grad_Lp", reports, |r| r.err_grad),
        rate("err_stress_Lpprime", reports, |r| r.err_stress),
        rate("rhs", reports, |r| r.rhs),
        rate("stab", reports, |r| r.stab),
    ]
    .into_iter()
    .flatten()
    .collect();
    Summary {
        benchmark: benchmark.name.to_string(),
        levels: reports.len(),
        stop: format!("{stop:?}"),
        reference_energy: benchmark.reference_energy,
        extrapolated_energy: extrapolation.map(|a| a.limit),
        extrapolation_degenerate: extrapolation.map(|a| a.degenerate),
        rates,
    }
}

/// Runs `config` and writes into `config.out`:
/// `convergence.csv`, `bounds.csv`, `level_###.mesh`, `run.json` and, on
/// success, `summary.json`.
pub fn execute(config: &RunConfig) -> anyhow::Result<RunOutcome> {
    let benchmark = Benchmark::<f64>::new(config.benchmark);
    let settings = config.driver_settings(&benchmark)?;
    if settings.params.is_degenerate() {
        log::warn!(
            "eps = 0 is accepted but the reliability and convergence theory requires eps > 0"
        );
    }
    let out = &config.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let echo = RunEcho {
        config,
        epsilon: settings.params.epsilon,
        estimator: settings.params.kind,
        density: benchmark.density.name(),
        reference_energy: benchmark.reference_energy,
        initial_vertices: benchmark.initial_mesh.n_vertices(),
        initial_triangles: benchmark.initial_mesh.n_triangles(),
    };
    write_json(&out.join("run.json"), &echo)?;
    let mut convergence = Table::create(&out.join("convergence.csv"), &CONVERGENCE_COLUMNS)?;
    let mut bounds = Table::create(&out.join("bounds.csv"), &BOUNDS_COLUMNS)?;
    let mut reports = Vec::new();
    let result = adaptivity::run(&benchmark, &settings, |outcome| {
        let report = level_report(&benchmark, outcome);
        convergence.push(&convergence_row(&report, config.timing))?;
        bounds.push(&bounds_row(&report))?;
        let mesh_path = out.join(format!("level_{:03}.mesh", report.level));
        std::fs::write(&mesh_path, outcome.mesh().to_text())
            .with_context(|| format!("writing {}", mesh_path.display()))?;
        reports.push(report);
        anyhow::Ok(true)
    });
    let stop = match result {
        Ok(stop) => stop,
        Err(DriverError::Callback(e)) => return Err(e),
        Err(DriverError::NotConverged {
            level,
            gradient_norm,
        }) => {
            anyhow::bail!("solver did not converge on level {level} (gradient norm {gradient_norm:e}); completed levels are kept")
        }
        Err(e) => return Err(anyhow::anyhow!("{e}")),
    };
    let summary = summarize(&benchmark, &reports, stop);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(RunOutcome {
        reports,
        stop,
        summary,
    })
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
