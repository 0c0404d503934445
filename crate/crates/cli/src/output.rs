//! Convergence tables. Numbers are written in the shortest form that parses
//! back to the same `f64`, so reruns give identical bytes.

use hho::diagnostics::LevelReport;

pub const CONVERGENCE_COLUMNS: [&str; 13] = [
    "level",
    "ndof",
    "ntriangles",
    "energy",
    "estimator",
    "stab",
    "err_energy",
    "err_grad_Lp",
    "err_stress_Lpprime",
    "err_vol_L2",
    "leb",
    "rhs",
    "seconds",
];

pub const BOUNDS_COLUMNS: [&str; 7] = [
    "level",
    "ndof",
    "energy",
    "leb",
    "leb_without_osc",
    "dual_energy",
    "rhs",
];

pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn convergence_row(r: &LevelReport, timing: bool) -> Vec<String> {
    vec![
        r.level.to_string(),
        r.ndof.to_string(),
        r.ntriangles.to_string(),
        format_float(r.energy),
        format_float(r.estimator),
        opt(r.stab),
        format_float(r.err_energy),
        opt(r.err_grad),
        opt(r.err_stress),
        opt(r.err_vol),
        opt(r.leb),
        opt(r.rhs),
        if timing {
            format_float(r.seconds)
        } else {
            String::new()
        },
    ]
}

pub fn bounds_row(r: &LevelReport) -> Vec<String> {
    vec![
        r.level.to_string(),
        r.ndof.to_string(),
        format_float(r.energy),
        opt(r.leb),
        opt(r.leb_without_osc),
        opt(r.dual_energy),
        opt(r.rhs),
    ]
}

/// A CSV file written row by row and flushed after each row, so a failed
/// run leaves the completed levels on disk.
pub struct Table {
    writer: csv::Writer<std::fs::File>,
}

impl Table {
    pub fn create(path: &std::path::Path, header: &[&str]) -> anyhow::Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        writer.write_record(header)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn push(&mut self, row: &[String]) -> anyhow::Result<()> {
        self.writer.write_record(row)?;
        self.writer.flush()?;
        Ok(())
    }
}
