//! `reproduce` subcommand: the two-spike desk experiment against the
//! published empirical values.

use std::fmt::Write;

use anyhow::{Context, Result};
use spiked_clt::simulate::mc_run;

use crate::config::ExperimentConfig;
use crate::theory::sig;

pub const GAUSSIAN_CONFIG: &str = include_str!("../configs/gaussian_two_spike.toml");
pub const ELLIPSE_CONFIG: &str = include_str!("../configs/ellipse_two_spike.toml");

/// `(case, bundled config, published empirical cov(l1, l2) at n = 300)`.
const CASES: [(&str, &str, f64); 2] = [
    ("ellipse", ELLIPSE_CONFIG, -0.0371),
    ("gaussian", GAUSSIAN_CONFIG, 0.0019),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub case: &'static str,
    pub theory: f64,
    pub published: f64,
    pub empirical: f64,
    pub se: f64,
    pub pass: bool,
}

/// Runs both cases on the per-sample scale `cov(l1, l2)`.
pub fn run(seed: Option<u64>, reps: Option<usize>, z: Option<f64>) -> Result<Vec<Row>> {
    CASES
        .iter()
        .map(|&(case, text, published)| {
            let mut cfg = ExperimentConfig::parse(text)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.reps = reps.unwrap_or(cfg.reps);
            cfg.z = z.unwrap_or(cfg.z);
            let exp = cfg.experiment()?;
            let n = exp.dims().2 as f64;
            let run = mc_run(&exp, &cfg.mc_config()).with_context(|| format!("{case} case"))?;
            let t = &run.report.targets[0];
            Ok(Row {
                case,
                theory: t.theory / n,
                published,
                empirical: t.empirical / n,
                se: t.se / n,
                pass: t.pass,
            })
        })
        .collect()
}

pub fn render(rows: &[Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>20} {:>14} {:>10}  verdict",
        "case", "theory", "published-empirical", "our-empirical", "SE"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>20} {:>14} {:>10}  {}",
            r.case,
            sig(r.theory, 6),
            r.published,
            sig(r.empirical, 4),
            sig(r.se, 3),
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    out
}
