//! Population samplers.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spiked_theory::{PopulationMoments, SpikedModel};

/// A user-supplied law for the spike block `ξ`, together with its exact moments.
pub trait SpikeSampler: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn moments(&self) -> PopulationMoments;
    /// Writes one draw of `ξ` into `out` (length [`SpikeSampler::dim`]).
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]);
}

/// Law of the spike coordinates `ξ`. The noise block `η` is always i.i.d.
/// standard normal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationDist {
    /// Independent centered normals with the given variances.
    GaussianDiag { variances: Vec<f64> },
    /// Uniform inside the ellipse with semi-axes `(alpha, beta)`.
    UniformEllipse { alpha: f64, beta: f64 },
    /// Independent centered Laplace coordinates (kurtosis coefficient 3).
    IndependentLaplace { variances: Vec<f64> },
    #[serde(skip)]
    Custom(Arc<dyn SpikeSampler>),
}

impl PopulationDist {
    pub fn dim(&self) -> usize {
        match self {
            PopulationDist::GaussianDiag { variances } | PopulationDist::IndependentLaplace { variances } => {
                variances.len()
            }
            PopulationDist::UniformEllipse { .. } => 2,
            PopulationDist::Custom(s) => s.dim(),
        }
    }

    pub fn moments(&self) -> PopulationMoments {
        match self {
            PopulationDist::GaussianDiag { variances } => PopulationMoments::gaussian_diag(variances),
            PopulationDist::UniformEllipse { alpha, beta } => PopulationMoments::uniform_ellipse(*alpha, *beta),
            PopulationDist::IndependentLaplace { variances } => {
                let fourth: Vec<f64> = variances.iter().map(|v| 6.0 * v * v).collect();
                PopulationMoments::independent(variances, &fourth).expect("lengths agree")
            }
            PopulationDist::Custom(s) => s.moments(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            PopulationDist::GaussianDiag { .. } => "gaussian".into(),
            PopulationDist::UniformEllipse { alpha, beta } => format!("ellipse({alpha}, {beta})"),
            PopulationDist::IndependentLaplace { .. } => "laplace".into(),
            PopulationDist::Custom(s) => format!("custom({s:?})"),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        let ok = match self {
            PopulationDist::GaussianDiag { variances } | PopulationDist::IndependentLaplace { variances } => {
                !variances.is_empty() && positive(variances)
            }
            PopulationDist::UniformEllipse { alpha, beta } => positive(&[*alpha, *beta]),
            PopulationDist::Custom(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid parameters for population {}", self.name())))
        }
    }

    /// One draw of `ξ` into `out`.
    pub fn sample_spike<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            PopulationDist::GaussianDiag { variances } => {
                for (o, v) in out.iter_mut().zip(variances) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = v.sqrt() * z;
                }
            }
            PopulationDist::IndependentLaplace { variances } => {
                for (o, v) in out.iter_mut().zip(variances) {
                    let e: f64 = Exp1.sample(rng);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *o = sign * e * (v / 2.0).sqrt();
                }
            }
            PopulationDist::UniformEllipse { alpha, beta } => loop {
                let u: f64 = rng.random_range(-1.0..=1.0);
                let v: f64 = rng.random_range(-1.0..=1.0);
                if u * u + v * v <= 1.0 {
                    out[0] = alpha * u;
                    out[1] = beta * v;
                    break;
                }
            },
            PopulationDist::Custom(s) => {
                let mut adapter = RngAdapter(rng);
                s.sample(&mut adapter, out)
            }
        }
    }
}

struct RngAdapter<'a, R: Rng + ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Unit-variance laws for latent coordinates of the form experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentDist {
    Gaussian,
    Laplace,
    Uniform,
    Rademacher,
}

impl LatentDist {
    /// `E z⁴` for the unit-variance law.
    pub fn fourth_moment(self) -> f64 {
        match self {
            LatentDist::Gaussian => 3.0,
            LatentDist::Laplace => 6.0,
            LatentDist::Uniform => 1.8,
            LatentDist::Rademacher => 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            LatentDist::Gaussian => StandardNormal.sample(rng),
            LatentDist::Laplace => {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e * std::f64::consts::FRAC_1_SQRT_2
            }
            LatentDist::Uniform => 3f64.sqrt() * rng.random_range(-1.0..=1.0),
            LatentDist::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// `n` i.i.d. observations `x = (ξ, η)` as the columns of a `(M + p) × n` matrix.
pub fn sample_population<R: Rng + ?Sized>(
    dist: &PopulationDist,
    model: &SpikedModel,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    dist.validate()?;
    let m = model.spike_dim();
    if dist.dim() != m {
        return Err(Error::Config(format!(
            "population {} has {} coordinates but the model has {m} spikes",
            dist.name(),
            dist.dim()
        )));
    }
    dist.moments().check_against(model)?;
    let rows = model.total_dim();
    let n = model.n();
    let mut data = DMatrix::zeros(rows, n);
    for col in data.as_mut_slice().chunks_exact_mut(rows) {
        let (spike, noise) = col.split_at_mut(m);
        dist.sample_spike(rng, spike);
        for v in noise {
            *v = StandardNormal.sample(rng);
        }
    }
    Ok(data)
}

/// `S = X Xᵀ / n`, exactly symmetric.
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = data.ncols();
    if n == 0 {
        return Err(Error::Dimension("sample covariance needs at least one observation".into()));
    }
    let mut s = data * data.transpose();
    s /= n as f64;
    let d = s.nrows();
    for j in 0..d {
        for i in 0..j {
            s[(j, i)] = s[(i, j)];
        }
    }
    Ok(s)
}

/// Deterministic symmetric `n × n` test matrix: diagonal `N(diag_mean, 1)` and
/// off-diagonal `N(0, 1/n)` entries.
pub fn seeded_symmetric(n: usize, seed: u64, diag_mean: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n.max(1) as f64).sqrt();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        a[(j, j)] = diag_mean + z;
        for i in 0..j {
            let z: f64 = StandardNormal.sample(&mut rng);
            a[(i, j)] = z * scale;
            a[(j, i)] = z * scale;
        }
    }
    a
}
