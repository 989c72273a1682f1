//! Experiment configuration files (TOML, `schema = 1`).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::Deserialize;
use spiked_clt::simulate::{
    seeded_symmetric, Centering, Experiment, LatentDist, McConfig, PopulationDist, QuadFormExperiment,
    SesquilinearExperiment, SpikedExperiment, SpikedTarget,
};
use spiked_clt::spiked_theory::SpikedModel;
use spiked_clt::AspectRatio;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default)]
    pub centering: Centering,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_z() -> f64 {
    4.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    Spiked {
        /// `(value, multiplicity)` pairs.
        spikes: Vec<(f64, usize)>,
        y: Option<f64>,
        p: Option<usize>,
        n: usize,
        dist: PopulationDist,
        targets: Vec<SpikedTarget>,
    },
    /// `A` and `B` are seeded symmetric test matrices of order `n`.
    Sesquilinear {
        n: usize,
        a_seed: u64,
        b_seed: u64,
        #[serde(default)]
        a_diag_mean: f64,
        #[serde(default)]
        b_diag_mean: f64,
        lx: Vec<Vec<f64>>,
        ly: Vec<Vec<f64>>,
        latent: Vec<LatentDist>,
    },
    Quadform {
        n: usize,
        k: usize,
        i: usize,
        latent: LatentDist,
    },
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        bail!("`{what}` must be a non-empty rectangular array of rows");
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("invalid experiment config")?;
        if cfg.schema != CONFIG_SCHEMA {
            bail!("unsupported config schema {} (expected {CONFIG_SCHEMA})", cfg.schema);
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let exp = match &self.experiment {
            ExperimentSpec::Spiked {
                spikes,
                y,
                p,
                n,
                dist,
                targets,
            } => {
                let model = match (y, p) {
                    (None, None) => bail!("give `y`, `p`, or both"),
                    (None, Some(p)) => SpikedModel::from_dims(spikes, *p, *n)?,
                    (Some(y), p) => {
                        let p = p.unwrap_or((y * *n as f64).round() as usize);
                        SpikedModel::new(spikes, AspectRatio::new(*y)?, p, *n)?
                    }
                };
                Experiment::Spiked(SpikedExperiment {
                    model,
                    dist: dist.clone(),
                    targets: targets.clone(),
                })
            }
            ExperimentSpec::Sesquilinear {
                n,
                a_seed,
                b_seed,
                a_diag_mean,
                b_diag_mean,
                lx,
                ly,
                latent,
            } => Experiment::Sesquilinear(SesquilinearExperiment {
                a: seeded_symmetric(*n, *a_seed, *a_diag_mean),
                b: seeded_symmetric(*n, *b_seed, *b_diag_mean),
                lx: matrix(lx, "lx")?,
                ly: matrix(ly, "ly")?,
                latent: latent.clone(),
            }),
            ExperimentSpec::Quadform { n, k, i, latent } => Experiment::QuadForm(QuadFormExperiment {
                n: *n,
                k: *k,
                i: *i,
                latent: *latent,
            }),
        };
        exp.validate()?;
        Ok(exp)
    }

    pub fn mc_config(&self) -> McConfig {
        let mut cfg = McConfig::new(self.reps, self.seed);
        cfg.z = self.z;
        cfg.centering = self.centering;
        cfg
    }
}
