//! Monte Carlo reports: JSON, aligned text and per-replicate CSV.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::engine::{Centering, McRun};
use crate::error::{Error, Result};

/// Current JSON report schema.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub name: String,
    pub empirical: f64,
    pub theory: f64,
    pub se: f64,
    /// `(empirical - theory) / se`
    pub z_score: f64,
    pub pass: bool,
}

impl TargetResult {
    pub fn new(name: String, empirical: f64, theory: f64, se: f64, z: f64) -> Self {
        let z_score = z_score(empirical, theory, se);
        TargetResult {
            name,
            empirical,
            theory,
            se,
            z_score,
            pass: z_score.abs() < z,
        }
    }
}

fn z_score(empirical: f64, theory: f64, se: f64) -> f64 {
    let diff = empirical - theory;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCReport {
    pub schema: u32,
    pub experiment: String,
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub discarded: usize,
    pub master_seed: u64,
    pub centering: Centering,
    pub z: f64,
    pub y: Option<f64>,
    pub p: Option<usize>,
    pub n: usize,
    pub separation_warnings: usize,
    pub targets: Vec<TargetResult>,
    pub pass: bool,
}

impl MCReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        experiment: String,
        replicates_requested: usize,
        replicates_used: usize,
        master_seed: u64,
        centering: Centering,
        z: f64,
        y: Option<f64>,
        p: Option<usize>,
        n: usize,
        separation_warnings: usize,
        targets: Vec<TargetResult>,
    ) -> Self {
        let pass = targets.iter().all(|t| t.pass);
        MCReport {
            schema: REPORT_SCHEMA,
            experiment,
            replicates_requested,
            replicates_used,
            discarded: replicates_requested - replicates_used,
            master_seed,
            centering,
            z,
            y,
            p,
            n,
            separation_warnings,
            targets,
            pass,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: MCReport = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::Config(format!("unsupported report schema {}", report.schema)));
        }
        Ok(report)
    }

    /// Aligned-column text table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "experiment {}  R = {} (discarded {})  seed = {}  z = {}",
            self.experiment, self.replicates_used, self.discarded, self.master_seed, self.z
        );
        let width = self.targets.iter().map(|t| t.name.len()).max().unwrap_or(6).max(6);
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:>14}  {:>12}  {:>8}  verdict",
            "target", "empirical", "theory", "SE", "z"
        );
        for t in &self.targets {
            let _ = writeln!(
                out,
                "{:<width$}  {:>14.6}  {:>14.6}  {:>12.6}  {:>8.3}  {}",
                t.name,
                t.empirical,
                t.theory,
                t.se,
                t.z_score,
                if t.pass { "pass" } else { "FAIL" }
            );
        }
        out
    }

    /// The targets as CSV rows.
    pub fn write_targets_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["target", "empirical", "theory", "se", "z_score", "pass"])?;
        for t in &self.targets {
            wr.write_record([
                t.name.clone(),
                t.empirical.to_string(),
                t.theory.to_string(),
                t.se.to_string(),
                t.z_score.to_string(),
                t.pass.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Outcome of [`verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub pass: bool,
    /// Names of the targets outside the band.
    pub failures: Vec<String>,
    pub table: String,
}

/// Re-evaluates every target against `|empirical - theory| < z · SE`.
pub fn verify(report: &MCReport, z: f64) -> Verification {
    let mut rescored = report.clone();
    rescored.z = z;
    for t in &mut rescored.targets {
        *t = TargetResult::new(t.name.clone(), t.empirical, t.theory, t.se, z);
    }
    rescored.pass = rescored.targets.iter().all(|t| t.pass);
    if rescored.targets.is_empty() {
        log::warn!("report has no targets; nothing to verify");
    }
    let failures: Vec<String> = rescored.targets.iter().filter(|t| !t.pass).map(|t| t.name.clone()).collect();
    let mut table = rescored.render_table();
    if !failures.is_empty() {
        let _ = writeln!(table, "failed: {}", failures.join(", "));
    }
    Verification {
        pass: failures.is_empty(),
        failures,
        table,
    }
}

/// Per-replicate observables: `replicate, <observable names...>`.
pub fn write_replicates_csv<W: Write>(run: &McRun, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["replicate".to_string()];
    header.extend(run.observable_names.iter().cloned());
    wr.write_record(&header)?;
    for (r, values) in &run.replicates {
        let mut row = vec![r.to_string()];
        row.extend(values.iter().map(|v| v.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
