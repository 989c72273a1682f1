//! Monte Carlo replicate engine.
//!
//! Every replicate draws from its own ChaCha8 stream derived from the master
//! seed, results are collected in replicate order and reduced sequentially, so
//! a run is bit-identical for any number of worker threads.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eigen::top_eigenpairs;
use super::population::{sample_covariance, sample_population, LatentDist, PopulationDist};
use super::report::{MCReport, TargetResult};
use super::stats::{covariance_estimate, mean_estimate, Estimate};
use crate::error::{Error, Result};
use crate::mp_core::AspectRatio;
use crate::sesquilinear::{covariance_blocks, quadform_covariance, trace_limits_pair, JointMomentTable};
use crate::spiked_theory::{
    eigen_joint_cov, eigen_variance, eigvec_joint, PopulationMoments, SpikedModel,
};

/// Fraction of replicates that may fail before a run is aborted.
pub const FAILURE_BUDGET: f64 = 1e-3;
pub const MIN_REPLICATES: usize = 100;

/// Replicate `r` uses stream `r` of a ChaCha8 generator keyed by `master_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master_seed: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        SeedPolicy { master_seed }
    }

    pub fn stream(&self, replicate: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replicate);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Center at the replicate means.
    #[default]
    Empirical,
    /// Center at the theoretical limits (useful for diagnosing bias).
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Data-parallel over replicates; `None` uses the global rayon pool.
    /// Without the `parallel` feature this runs sequentially.
    #[default]
    Parallel,
    ParallelWith(usize),
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub replicates: usize,
    pub seed: SeedPolicy,
    pub centering: Centering,
    pub z: f64,
    pub execution: Execution,
}

impl McConfig {
    pub fn new(replicates: usize, master_seed: u64) -> Self {
        McConfig {
            replicates,
            seed: SeedPolicy::new(master_seed),
            centering: Centering::Empirical,
            z: 4.0,
            execution: Execution::Parallel,
        }
    }
}

/// Replicate statistic compared against a theoretical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stat", rename_all = "snake_case")]
pub enum Statistic {
    Mean { obs: usize },
    /// `scale · cov(obs_a, obs_b)`.
    Cov { a: usize, b: usize, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub statistic: Statistic,
    pub theory: f64,
}

/// Targets of a spiked-model run. Indices are 1-based spike coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpikedTarget {
    /// `n · cov(l_i, l_j)`
    EigCov { i: usize, j: usize },
    /// `n · var(l_i)`
    EigVar { i: usize },
    /// `mean(u_i(i)²)`
    ProjMean { i: usize },
    /// `n · var(u_i(i)²)`
    ProjVar { i: usize },
    /// `n · cov(u_i(i)², l_i)`
    ProjEigCov { i: usize },
}

impl SpikedTarget {
    pub fn label(&self) -> String {
        match *self {
            SpikedTarget::EigCov { i, j } => format!("n*cov(l{i},l{j})"),
            SpikedTarget::EigVar { i } => format!("n*var(l{i})"),
            SpikedTarget::ProjMean { i } => format!("mean(u{i}({i})^2)"),
            SpikedTarget::ProjVar { i } => format!("n*var(u{i}({i})^2)"),
            SpikedTarget::ProjEigCov { i } => format!("n*cov(u{i}({i})^2,l{i})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpikedExperiment {
    pub model: SpikedModel,
    pub dist: PopulationDist,
    pub targets: Vec<SpikedTarget>,
}

/// `(U(l), V(l))` for `x = Lx z`, `y = Ly z` with independent latent `z`.
#[derive(Debug, Clone)]
pub struct SesquilinearExperiment {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub lx: DMatrix<f64>,
    pub ly: DMatrix<f64>,
    pub latent: Vec<LatentDist>,
}

/// `√(n/2)(s₁ᵀ(S₁S₁ᵀ)^m s₁ - tr(S₁S₁ᵀ)^m / n)` for `m = 1..=i` and
/// `√(n/2)(s₁ᵀs₁ - 1)`, where `S₁` is `n × k` and entries are `v / √n`.
#[derive(Debug, Clone)]
pub struct QuadFormExperiment {
    pub n: usize,
    pub k: usize,
    pub i: usize,
    pub latent: LatentDist,
}

#[derive(Debug, Clone)]
pub enum Experiment {
    Spiked(SpikedExperiment),
    Sesquilinear(SesquilinearExperiment),
    QuadForm(QuadFormExperiment),
}

/// One replicate's observables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutput {
    pub values: Vec<f64>,
    pub separation_warnings: usize,
}

/// `l_i` and `u_i(i)²` for one above-bulk spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEstimate {
    pub l: f64,
    pub proj_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeEstimates {
    pub estimates: Vec<SpikeEstimate>,
    /// Outliers that landed within the guard band of the bulk edge.
    pub separation_warnings: usize,
}

/// Outlier eigenvalues and projections for the above-bulk spikes of `model`.
///
/// The `i`-th largest eigenvalue is matched with the `i`-th largest spike.
pub fn spike_estimates(s: &DMatrix<f64>, model: &SpikedModel) -> Result<SpikeEstimates> {
    let k = model.above_bulk_dim();
    if s.nrows() != model.total_dim() {
        return Err(Error::Dimension(format!(
            "sample covariance is {}x{}, model dimension is {}",
            s.nrows(),
            s.ncols(),
            model.total_dim()
        )));
    }
    let eig = top_eigenpairs(s, k)?;
    let (_, b_y) = model.y().support();
    let guard = b_y * (1.0 + (model.n() as f64).powf(-2.0 / 3.0)) + 1e-6;
    let mut warnings = 0;
    let estimates = (0..k)
        .map(|i| {
            let l = eig.values[i];
            if l <= guard {
                warnings += 1;
                log::warn!("outlier l{} = {l} is not separated from the bulk edge {b_y}", i + 1);
            }
            let u = eig.vectors[(i, i)];
            SpikeEstimate { l, proj_sq: u * u }
        })
        .collect();
    Ok(SpikeEstimates {
        estimates,
        separation_warnings: warnings,
    })
}

impl SpikedExperiment {
    fn moments(&self) -> PopulationMoments {
        self.dist.moments()
    }

    fn check(&self) -> Result<()> {
        self.moments().check_against(&self.model)?;
        let k = self.model.above_bulk_dim();
        if k == 0 {
            return Err(Error::Config("no spike lies above the bulk".into()));
        }
        for t in &self.targets {
            let idx: &[usize] = match t {
                SpikedTarget::EigCov { i, j } => &[*i, *j],
                SpikedTarget::EigVar { i }
                | SpikedTarget::ProjMean { i }
                | SpikedTarget::ProjVar { i }
                | SpikedTarget::ProjEigCov { i } => &[*i],
            };
            for &i in idx {
                if i == 0 || i > k {
                    return Err(Error::Config(format!(
                        "target {} refers to spike {i}, only 1..={k} lie above the bulk",
                        t.label()
                    )));
                }
                let group = self.model.group_of(i - 1)?;
                if self.model.spikes()[group].1 != 1 {
                    return Err(Error::Config(format!("target {} needs a simple spike", t.label())));
                }
            }
        }
        Ok(())
    }

    fn observable_names(&self) -> Vec<String> {
        let k = self.model.above_bulk_dim();
        let mut names: Vec<String> = (1..=k).map(|i| format!("l{i}")).collect();
        names.extend((1..=k).map(|i| format!("proj{i}")));
        names
    }

    fn theoretical_means(&self) -> Result<Vec<f64>> {
        let k = self.model.above_bulk_dim();
        let y = self.model.y();
        let mut out = Vec::with_capacity(2 * k);
        for i in 0..k {
            out.push(self.model.lambda(self.model.group_of(i)?)?);
        }
        for i in 0..k {
            let a = self.model.spike(self.model.group_of(i)?)?;
            out.push(eigvec_joint(a, y, 0.0)?.mean_proj);
        }
        Ok(out)
    }

    fn targets(&self) -> Result<Vec<Target>> {
        self.check()?;
        let k = self.model.above_bulk_dim();
        let n = self.model.n() as f64;
        let y = self.model.y();
        let mom = self.moments();
        let spike = |i: usize| -> Result<_> { self.model.spike(self.model.group_of(i - 1)?) };
        let nu4 = |i: usize| mom.nu4(i - 1);
        let (l, proj) = (|i: usize| i - 1, |i: usize| k + i - 1);
        let mut out = Vec::new();
        for t in &self.targets {
            let (statistic, theory) = match *t {
                SpikedTarget::EigCov { i, j } => (
                    Statistic::Cov { a: l(i), b: l(j), scale: n },
                    eigen_joint_cov(spike(i)?, spike(j)?, y, &mom.pair(i - 1, j - 1)?)?,
                ),
                SpikedTarget::EigVar { i } => {
                    let s = mom.sigma()[(i - 1, i - 1)];
                    (
                        Statistic::Cov { a: l(i), b: l(i), scale: n },
                        eigen_variance(spike(i)?, y, mom.xi4(i - 1), s),
                    )
                }
                SpikedTarget::ProjMean { i } => (
                    Statistic::Mean { obs: proj(i) },
                    eigvec_joint(spike(i)?, y, nu4(i))?.mean_proj,
                ),
                SpikedTarget::ProjVar { i } => (
                    Statistic::Cov { a: proj(i), b: proj(i), scale: n },
                    eigvec_joint(spike(i)?, y, nu4(i))?.v11,
                ),
                SpikedTarget::ProjEigCov { i } => (
                    Statistic::Cov { a: proj(i), b: l(i), scale: n },
                    eigvec_joint(spike(i)?, y, nu4(i))?.v12,
                ),
            };
            out.push(Target {
                name: t.label(),
                statistic,
                theory,
            });
        }
        Ok(out)
    }

    fn replicate(&self, rng: &mut ChaCha8Rng) -> Result<ReplicateOutput> {
        let data = sample_population(&self.dist, &self.model, rng)?;
        let s = sample_covariance(&data)?;
        let est = spike_estimates(&s, &self.model)?;
        let mut values: Vec<f64> = est.estimates.iter().map(|e| e.l).collect();
        values.extend(est.estimates.iter().map(|e| e.proj_sq));
        Ok(ReplicateOutput {
            values,
            separation_warnings: est.separation_warnings,
        })
    }
}

impl SesquilinearExperiment {
    fn n(&self) -> usize {
        self.a.nrows()
    }

    fn coords(&self) -> usize {
        self.lx.nrows()
    }

    fn moments(&self) -> Result<JointMomentTable<f64>> {
        let fourth: Vec<f64> = self.latent.iter().map(|l| l.fourth_moment()).collect();
        JointMomentTable::from_linear_mixing(&self.lx, &self.ly, &fourth)
    }

    fn observable_names(&self) -> Vec<String> {
        let k = self.coords();
        (1..=k).map(|l| format!("U{l}")).chain((1..=k).map(|l| format!("V{l}"))).collect()
    }

    fn targets(&self) -> Result<Vec<Target>> {
        let tl_aa = trace_limits_pair(&self.a, &self.a)?;
        let tl_bb = trace_limits_pair(&self.b, &self.b)?;
        let tl_ab = trace_limits_pair(&self.a, &self.b)?;
        let cov = covariance_blocks(&tl_aa, &tl_bb, &tl_ab, &self.moments()?);
        let names = self.observable_names();
        Ok(upper_triangle_targets(cov.matrix(), &names))
    }

    fn replicate(&self, rng: &mut ChaCha8Rng) -> Result<ReplicateOutput> {
        let n = self.n();
        let d = self.latent.len();
        let z = DMatrix::from_fn(d, n, |t, _| self.latent[t].sample(rng));
        let x = &self.lx * &z;
        let yv = &self.ly * &z;
        let xy = &self.lx * self.ly.transpose();
        let (tr_a, tr_b) = (self.a.trace(), self.b.trace());
        let sn = (n as f64).sqrt();
        let k = self.coords();
        let mut u = Vec::with_capacity(2 * k);
        let mut v = Vec::with_capacity(k);
        for l in 0..k {
            let xl: DVector<f64> = x.row(l).transpose();
            let yl: DVector<f64> = yv.row(l).transpose();
            let rho = xy[(l, l)];
            u.push((xl.dot(&(&self.a * &yl)) - rho * tr_a) / sn);
            v.push((xl.dot(&(&self.b * &yl)) - rho * tr_b) / sn);
        }
        u.extend(v);
        Ok(ReplicateOutput {
            values: u,
            separation_warnings: 0,
        })
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        if self.b.nrows() != n || !self.a.is_square() || !self.b.is_square() {
            return Err(Error::Shape("A and B must be square matrices of equal size".into()));
        }
        if self.ly.shape() != self.lx.shape() || self.lx.ncols() != self.latent.len() || self.lx.nrows() == 0 {
            return Err(Error::Dimension(
                "mixing matrices must both be K x d with d latent laws".into(),
            ));
        }
        Ok(())
    }
}

impl QuadFormExperiment {
    fn y(&self) -> Result<AspectRatio> {
        AspectRatio::from_dims(self.k, self.n)
    }

    fn observable_names(&self) -> Vec<String> {
        (1..=self.i + 1).map(|m| format!("Q{m}")).collect()
    }

    fn targets(&self) -> Result<Vec<Target>> {
        let cov = quadform_covariance(self.i, self.y()?, self.latent.fourth_moment())?;
        Ok(upper_triangle_targets(cov.matrix(), &self.observable_names()))
    }

    fn replicate(&self, rng: &mut ChaCha8Rng) -> Result<ReplicateOutput> {
        let (n, k) = (self.n, self.k);
        let scale = 1.0 / (n as f64).sqrt();
        let s1 = DMatrix::from_fn(n, k, |_, _| self.latent.sample(rng) * scale);
        let s = DVector::from_fn(n, |_, _| self.latent.sample(rng) * scale);
        let g = s1.transpose() * &s1;
        // powers G^0 .. G^ceil(i/2) give every tr(G^m) = <G^floor(m/2), G^ceil(m/2)>
        let half = self.i.div_ceil(2);
        let mut powers = vec![DMatrix::<f64>::identity(k, k), g.clone()];
        for _ in 2..=half {
            let next = powers.last().unwrap() * &g;
            powers.push(next);
        }
        let root = (n as f64 / 2.0).sqrt();
        let mut values = Vec::with_capacity(self.i + 1);
        let mut r = s.clone();
        for m in 1..=self.i {
            r = &s1 * (s1.transpose() * &r);
            let trace = powers[m / 2].dot(&powers[m.div_ceil(2)]);
            values.push(root * (s.dot(&r) - trace / n as f64));
        }
        values.push(root * (s.dot(&s) - 1.0));
        Ok(ReplicateOutput {
            values,
            separation_warnings: 0,
        })
    }

    fn check(&self) -> Result<()> {
        if self.i == 0 || self.k == 0 || self.k >= self.n {
            return Err(Error::Config(format!(
                "quadratic-form experiment needs i >= 1 and 0 < k < n (i = {}, k = {}, n = {})",
                self.i, self.k, self.n
            )));
        }
        Ok(())
    }
}

fn upper_triangle_targets(cov: &DMatrix<f64>, names: &[String]) -> Vec<Target> {
    let d = cov.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d {
        for b in a..d {
            out.push(Target {
                name: format!("cov({},{})", names[a], names[b]),
                statistic: Statistic::Cov { a, b, scale: 1.0 },
                theory: cov[(a, b)],
            });
        }
    }
    out
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Spiked(_) => "spiked",
            Experiment::Sesquilinear(_) => "sesquilinear",
            Experiment::QuadForm(_) => "quadform",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Experiment::Spiked(e) => e.check(),
            Experiment::Sesquilinear(e) => e.check(),
            Experiment::QuadForm(e) => e.check(),
        }
    }

    pub fn observable_names(&self) -> Vec<String> {
        match self {
            Experiment::Spiked(e) => e.observable_names(),
            Experiment::Sesquilinear(e) => e.observable_names(),
            Experiment::QuadForm(e) => e.observable_names(),
        }
    }

    /// Limits of the observables, used with [`Centering::Theoretical`].
    pub fn theoretical_means(&self) -> Result<Vec<f64>> {
        match self {
            Experiment::Spiked(e) => e.theoretical_means(),
            // the forms are centered by construction
            _ => Ok(vec![0.0; self.observable_names().len()]),
        }
    }

    /// Statistics to compare, with their theoretical values.
    pub fn targets(&self) -> Result<Vec<Target>> {
        self.validate()?;
        match self {
            Experiment::Spiked(e) => e.targets(),
            Experiment::Sesquilinear(e) => e.targets(),
            Experiment::QuadForm(e) => e.targets(),
        }
    }

    pub fn replicate(&self, rng: &mut ChaCha8Rng) -> Result<ReplicateOutput> {
        match self {
            Experiment::Spiked(e) => e.replicate(rng),
            Experiment::Sesquilinear(e) => e.replicate(rng),
            Experiment::QuadForm(e) => e.replicate(rng),
        }
    }

    /// `(y, p, n)` as recorded in reports.
    pub fn dims(&self) -> (Option<f64>, Option<usize>, usize) {
        match self {
            Experiment::Spiked(e) => (Some(e.model.y().value()), Some(e.model.p()), e.model.n()),
            Experiment::Sesquilinear(e) => (None, None, e.n()),
            Experiment::QuadForm(e) => (Some(e.k as f64 / e.n as f64), Some(e.k), e.n),
        }
    }
}

/// A finished run: the report plus the per-replicate observables.
#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub report: MCReport,
    pub observable_names: Vec<String>,
    /// `(replicate index, observables)` for every replicate that succeeded.
    pub replicates: Vec<(u64, Vec<f64>)>,
}

fn run_replicates(exp: &Experiment, cfg: &McConfig) -> Result<Vec<Result<ReplicateOutput>>> {
    let work = |r: usize| {
        let mut rng = cfg.seed.stream(r as u64);
        exp.replicate(&mut rng)
    };
    match cfg.execution {
        Execution::Sequential => Ok((0..cfg.replicates).map(work).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            Ok((0..cfg.replicates).into_par_iter().map(work).collect())
        }
        #[cfg(feature = "parallel")]
        Execution::ParallelWith(threads) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(|| (0..cfg.replicates).into_par_iter().map(work).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::ParallelWith(_) => Ok((0..cfg.replicates).map(work).collect()),
    }
}

/// Runs `cfg.replicates` independent replicates and compares every target with
/// its theoretical value.
pub fn mc_run(exp: &Experiment, cfg: &McConfig) -> Result<McRun> {
    if cfg.replicates < MIN_REPLICATES {
        return Err(Error::Config(format!(
            "at least {MIN_REPLICATES} replicates are required, got {}",
            cfg.replicates
        )));
    }
    let targets = exp.targets()?;
    let means = exp.theoretical_means()?;
    let names = exp.observable_names();

    let outputs = run_replicates(exp, cfg)?;
    let mut replicates = Vec::with_capacity(outputs.len());
    let mut separation_warnings = 0;
    let mut first_error = None;
    for (r, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => {
                separation_warnings += o.separation_warnings;
                replicates.push((r as u64, o.values));
            }
            Err(e) => {
                log::warn!("replicate {r} discarded: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    let discarded = cfg.replicates - replicates.len();
    if discarded as f64 > FAILURE_BUDGET * cfg.replicates as f64 {
        return Err(first_error.expect("at least one failure"));
    }

    let column = |j: usize| -> Vec<f64> { replicates.iter().map(|(_, v)| v[j]).collect() };
    let results = targets
        .iter()
        .map(|t| {
            let est: Estimate = match t.statistic {
                Statistic::Mean { obs } => mean_estimate(&column(obs)),
                Statistic::Cov { a, b, scale } => {
                    let centers = match cfg.centering {
                        Centering::Empirical => None,
                        Centering::Theoretical => Some((means[a], means[b])),
                    };
                    let e = covariance_estimate(&column(a), &column(b), centers);
                    Estimate {
                        value: scale * e.value,
                        se: scale * e.se,
                    }
                }
            };
            TargetResult::new(t.name.clone(), est.value, t.theory, est.se, cfg.z)
        })
        .collect();

    let (y, p, n) = exp.dims();
    let report = MCReport::new(
        exp.kind().to_string(),
        cfg.replicates,
        replicates.len(),
        cfg.seed.master_seed,
        cfg.centering,
        cfg.z,
        y,
        p,
        n,
        separation_warnings,
        results,
    );
    Ok(McRun {
        report,
        observable_names: names,
        replicates,
    })
}
