//! Closed-form asymptotics for spiked population models.
//!
//! The population is `x = (ξ, η)` where `ξ ∈ R^M` carries the spikes (with
//! covariance `Σ`, here always diagonal) and `η ∈ R^p` has i.i.d. unit-variance
//! coordinates. A spike `a` outside `[1 - √y, 1 + √y]` produces a sample
//! eigenvalue converging to `λ = φ(a)`, and the normalized fluctuations
//! `√n (l - λ)` are described through the random matrices `R(λ_m)` whose
//! covariances are computed here.
//!
//! Most quantities exist in two forms: an integral route through the
//! Marčenko–Pastur integrals `m0..m7` at `λ`, and a simplified rational function
//! of `(a, y)`. The public functions return the rational form; the `*_from`
//! variants evaluate the integral route from any [`MpIntegrals`], so the two can
//! be cross-checked (including against quadrature).
//!
//! Throughout, `b = a - 1` and `d = b² - y`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp_core::{phase_phi, AspectRatio, MpIntegrals, Side, SpikeValue};
use crate::sesquilinear::{covariance_blocks, CovBlock, JointMomentTable, TraceLimits};

/// Spikes closer than this are treated as equal.
pub const DEGENERATE_SPIKE_TOLERANCE: f64 = 1e-9;
/// Maximum relative gap between `p / n` and `y` for a finite instantiation.
pub const DIMENSION_RATIO_SLACK: f64 = 0.10;
/// Tolerance used by [`independence_condition`].
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-12;

/// Population spikes with multiplicities, plus the finite sizes `(p, n)`.
///
/// Spikes are stored in decreasing order; coordinate `i` of `ξ` belongs to the
/// spike group whose index range [`SpikedModel::index_set`] contains `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikedModel {
    spikes: Vec<(SpikeValue, usize)>,
    y: AspectRatio,
    p: usize,
    n: usize,
}

impl SpikedModel {
    /// `spikes` holds `(a, multiplicity)` pairs in any order; `p` is the noise
    /// dimension and must satisfy `|p/n - y| ≤ 0.1 y`.
    pub fn new(spikes: &[(f64, usize)], y: AspectRatio, p: usize, n: usize) -> Result<Self> {
        if spikes.is_empty() {
            return Err(Error::Config("a spiked model needs at least one spike".into()));
        }
        if n == 0 || p == 0 {
            return Err(Error::Config(format!("dimensions must be positive (p = {p}, n = {n})")));
        }
        let ratio = p as f64 / n as f64;
        if (ratio - y.value()).abs() > DIMENSION_RATIO_SLACK * y.value() {
            return Err(Error::Config(format!(
                "p/n = {ratio} is more than 10% away from y = {}",
                y.value()
            )));
        }
        let mut list = Vec::with_capacity(spikes.len());
        for &(a, mult) in spikes {
            if mult == 0 {
                return Err(Error::Config(format!("spike {a} has multiplicity 0")));
            }
            list.push((SpikeValue::new(a, y)?, mult));
        }
        list.sort_by(|l, r| r.0.value().total_cmp(&l.0.value()));
        for pair in list.windows(2) {
            if (pair[0].0.value() - pair[1].0.value()).abs() < DEGENERATE_SPIKE_TOLERANCE {
                return Err(Error::DegenerateSpikes {
                    a_i: pair[0].0.value(),
                    a_j: pair[1].0.value(),
                });
            }
        }
        Ok(SpikedModel { spikes: list, y, p, n })
    }

    /// Model with `y = p / n`.
    pub fn from_dims(spikes: &[(f64, usize)], p: usize, n: usize) -> Result<Self> {
        SpikedModel::new(spikes, AspectRatio::from_dims(p, n)?, p, n)
    }

    pub fn spikes(&self) -> &[(SpikeValue, usize)] {
        &self.spikes
    }

    pub fn y(&self) -> AspectRatio {
        self.y
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct spike values.
    pub fn groups(&self) -> usize {
        self.spikes.len()
    }

    /// Total multiplicity `M`, the dimension of `ξ`.
    pub fn spike_dim(&self) -> usize {
        self.spikes.iter().map(|s| s.1).sum()
    }

    /// Dimension of the full observation `x`.
    pub fn total_dim(&self) -> usize {
        self.spike_dim() + self.p
    }

    /// Coordinates of group `m` (zero based).
    pub fn index_set(&self, m: usize) -> Result<std::ops::Range<usize>> {
        if m >= self.groups() {
            return Err(Error::Index(format!("spike group {m} of {}", self.groups())));
        }
        let start: usize = self.spikes[..m].iter().map(|s| s.1).sum();
        Ok(start..start + self.spikes[m].1)
    }

    /// Group containing coordinate `i`.
    pub fn group_of(&self, i: usize) -> Result<usize> {
        let mut end = 0;
        for (m, s) in self.spikes.iter().enumerate() {
            end += s.1;
            if i < end {
                return Ok(m);
            }
        }
        Err(Error::Index(format!("coordinate {i} of {}", self.spike_dim())))
    }

    pub fn spike(&self, m: usize) -> Result<SpikeValue> {
        self.spikes
            .get(m)
            .map(|s| s.0)
            .ok_or_else(|| Error::Index(format!("spike group {m} of {}", self.groups())))
    }

    /// Limit `λ_m = φ(a_m)` of the sample eigenvalues of group `m`.
    pub fn lambda(&self, m: usize) -> Result<f64> {
        phase_phi(self.spike(m)?.value(), self.y)
    }

    /// Diagonal of `Σ`, one entry per coordinate of `ξ`.
    pub fn sigma_diag(&self) -> Vec<f64> {
        self.spikes
            .iter()
            .flat_map(|&(a, mult)| std::iter::repeat_n(a.value(), mult))
            .collect()
    }

    /// Number of spikes above the bulk, counted with multiplicity.
    pub fn above_bulk_dim(&self) -> usize {
        self.spikes
            .iter()
            .filter(|s| s.0.side() == Side::AboveBulk)
            .map(|s| s.1)
            .sum()
    }
}

/// Second- and fourth-order moments of the spike coordinates `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMoments {
    sigma: DMatrix<f64>,
    fourth: Vec<f64>,
}

impl PopulationMoments {
    /// Moments from `Σ` and a full fourth-moment tensor `E[ξ_i ξ_j ξ_k ξ_l]`
    /// stored row-major in `M⁴` entries.
    pub fn new(sigma: DMatrix<f64>, fourth: Vec<f64>) -> Result<Self> {
        let m = sigma.nrows();
        if !sigma.is_square() || fourth.len() != m.pow(4) {
            return Err(Error::Dimension(format!(
                "Σ is {}x{} with {} fourth moments",
                sigma.nrows(),
                sigma.ncols(),
                fourth.len()
            )));
        }
        Ok(PopulationMoments { sigma, fourth })
    }

    /// Centered Gaussian with diagonal covariance (Isserlis' theorem).
    pub fn gaussian_diag(variances: &[f64]) -> Self {
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(variances));
        let fourth = isserlis(&sigma);
        PopulationMoments { sigma, fourth }
    }

    /// Independent centered coordinates with the given variances and fourth moments.
    pub fn independent(variances: &[f64], fourth_moments: &[f64]) -> Result<Self> {
        if variances.len() != fourth_moments.len() {
            return Err(Error::Dimension(format!(
                "{} variances but {} fourth moments",
                variances.len(),
                fourth_moments.len()
            )));
        }
        let m = variances.len();
        let mut fourth = vec![0.0; m.pow(4)];
        for i in 0..m {
            for j in 0..m {
                let v = if i == j { fourth_moments[i] } else { variances[i] * variances[j] };
                // pairings (i,i,j,j), (i,j,i,j), (i,j,j,i)
                fourth[idx4(m, i, i, j, j)] = v;
                fourth[idx4(m, i, j, i, j)] = v;
                fourth[idx4(m, i, j, j, i)] = v;
            }
        }
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(variances));
        Ok(PopulationMoments { sigma, fourth })
    }

    /// Uniform distribution inside the ellipse with semi-axes `(alpha, beta)`.
    ///
    /// `E ξ₁² = α²/4`, `E ξ₂² = β²/4`, `E ξ₁⁴ = α⁴/8`, `E ξ₂⁴ = β⁴/8`,
    /// `E ξ₁²ξ₂² = α²β²/24`, all odd moments zero.
    pub fn uniform_ellipse(alpha: f64, beta: f64) -> Self {
        let (a2, b2) = (alpha * alpha, beta * beta);
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a2 / 4.0, b2 / 4.0]));
        let mut fourth = vec![0.0; 16];
        fourth[idx4(2, 0, 0, 0, 0)] = a2 * a2 / 8.0;
        fourth[idx4(2, 1, 1, 1, 1)] = b2 * b2 / 8.0;
        for (i, j) in [(0, 1), (1, 0)] {
            fourth[idx4(2, i, i, j, j)] = a2 * b2 / 24.0;
            fourth[idx4(2, i, j, i, j)] = a2 * b2 / 24.0;
            fourth[idx4(2, i, j, j, i)] = a2 * b2 / 24.0;
        }
        PopulationMoments { sigma, fourth }
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn fourth(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.fourth[idx4(self.dim(), i, j, k, l)]
    }

    /// `E ξ_i⁴`.
    pub fn xi4(&self, i: usize) -> f64 {
        self.fourth(i, i, i, i)
    }

    /// Kurtosis coefficient `E ξ_i⁴ / Σ_ii² - 3`.
    pub fn nu4(&self, i: usize) -> f64 {
        self.xi4(i) / (self.sigma[(i, i)] * self.sigma[(i, i)]) - 3.0
    }

    pub fn pair(&self, i: usize, j: usize) -> Result<PairMoments> {
        let m = self.dim();
        if i >= m || j >= m {
            return Err(Error::Index(format!("coordinate pair ({i}, {j}) of {m}")));
        }
        Ok(PairMoments {
            e_sq_sq: self.fourth(i, i, j, j),
            s_ii: self.sigma[(i, i)],
            s_jj: self.sigma[(j, j)],
            s_ij: self.sigma[(i, j)],
        })
    }

    /// Checks that the diagonal of `Σ` matches the spikes of `model`.
    pub fn check_against(&self, model: &SpikedModel) -> Result<()> {
        let diag = model.sigma_diag();
        if diag.len() != self.dim() {
            return Err(Error::Config(format!(
                "population has {} spike coordinates, model has {}",
                self.dim(),
                diag.len()
            )));
        }
        for (i, a) in diag.iter().enumerate() {
            let s = self.sigma[(i, i)];
            if (s - a).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "coordinate {i}: population variance {s} does not match spike {a}"
                )));
            }
        }
        Ok(())
    }
}

fn idx4(m: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * m + j) * m + k) * m + l
}

fn isserlis(sigma: &DMatrix<f64>) -> Vec<f64> {
    let m = sigma.nrows();
    let mut out = vec![0.0; m.pow(4)];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    out[idx4(m, i, j, k, l)] =
                        sigma[(i, j)] * sigma[(k, l)] + sigma[(i, k)] * sigma[(j, l)] + sigma[(i, l)] * sigma[(j, k)];
                }
            }
        }
    }
    out
}

/// The moments of a coordinate pair that enter the eigenvalue covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMoments {
    /// `E[ξ_i² ξ_j²]`
    pub e_sq_sq: f64,
    pub s_ii: f64,
    pub s_jj: f64,
    pub s_ij: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaW {
    pub theta: f64,
    pub w: f64,
}

/// `1 + y m3(λ) a`, the normalization linking `R(λ)` to the eigenvalue.
fn eigen_factor(a: f64, y: f64) -> f64 {
    let b = a - 1.0;
    b * (b + y) / (b * b - y)
}

/// `θ` and `w` for a single spike, in rational form.
pub fn theta_w_single(a: SpikeValue, y: AspectRatio) -> ThetaW {
    let (b, y) = (a.value() - 1.0, y.value());
    ThetaW {
        theta: (b + y).powi(2) / (b * b - y),
        w: (b + y).powi(2) / (b * b),
    }
}

/// `θ = 1 + 2y m1 + y m2` and `w = 1 + 2y m1 + (y(1+m1)/(λ - y(1+m1)))²`.
pub fn theta_w_single_from(ints: &MpIntegrals, y: AspectRatio) -> ThetaW {
    let y = y.value();
    let r = y * (1.0 + ints.m1) / (ints.lambda - y * (1.0 + ints.m1));
    ThetaW {
        theta: 1.0 + 2.0 * y * ints.m1 + y * ints.m2,
        w: 1.0 + 2.0 * y * ints.m1 + r * r,
    }
}

fn check_distinct(a_i: SpikeValue, a_j: SpikeValue) -> Result<()> {
    if (a_i.value() - a_j.value()).abs() < DEGENERATE_SPIKE_TOLERANCE {
        return Err(Error::DegenerateSpikes {
            a_i: a_i.value(),
            a_j: a_j.value(),
        });
    }
    Ok(())
}

/// `θ(i, j)` and `w(i, j)` for two distinct spikes, in rational form.
pub fn theta_w_cross(a_i: SpikeValue, a_j: SpikeValue, y: AspectRatio) -> Result<ThetaW> {
    check_distinct(a_i, a_j)?;
    let (bi, bj, y) = (a_i.value() - 1.0, a_j.value() - 1.0, y.value());
    let w = (y + bi) * (y + bj) / (bi * bj);
    Ok(ThetaW {
        theta: w + y * w / (bi * bj - y),
        w,
    })
}

/// Integral route for `θ(i, j)` and `w(i, j)`, from the integrals at `λ_i` and `λ_j`.
pub fn theta_w_cross_from(ints_i: &MpIntegrals, ints_j: &MpIntegrals, y: AspectRatio) -> Result<ThetaW> {
    let (li, lj) = (ints_i.lambda, ints_j.lambda);
    if (li - lj).abs() < DEGENERATE_SPIKE_TOLERANCE {
        return Err(Error::DegenerateSpikes { a_i: li, a_j: lj });
    }
    let y = y.value();
    let (m1i, m1j) = (ints_i.m1, ints_j.m1);
    let base = 1.0 + y * m1i + y * m1j;
    let theta = base + y * (lj / (li - lj) * m1j + li / (lj - li) * m1i);
    let w = base + y * y * (1.0 + m1i) * (1.0 + m1j) / ((li - y * (1.0 + m1i)) * (lj - y * (1.0 + m1j)));
    Ok(ThetaW { theta, w })
}

fn theta_w_groups(model: &SpikedModel, m: usize, mp: usize) -> Result<ThetaW> {
    let (a, ap) = (model.spike(m)?, model.spike(mp)?);
    if m == mp {
        Ok(theta_w_single(a, model.y()))
    } else {
        theta_w_cross(a, ap, model.y())
    }
}

/// Covariance of `R(λ_m)(i, j)` with `R(λ_m')(i', j')`:
///
/// ```text
/// w {E[ξ_i ξ_j ξ_i' ξ_j'] - Σ_ij Σ_i'j'} + (θ - w)(Σ_ij' Σ_i'j + Σ_ii' Σ_jj')
/// ```
///
/// with `θ, w` the cross functionals for `m ≠ m'` and the single-spike ones
/// for `m = m'`. Indices are zero based.
#[allow(clippy::too_many_arguments)]
pub fn cross_block_cov(
    model: &SpikedModel,
    moments: &PopulationMoments,
    m: usize,
    mp: usize,
    i: usize,
    j: usize,
    ip: usize,
    jp: usize,
) -> Result<f64> {
    let dim = moments.dim();
    if dim != model.spike_dim() {
        return Err(Error::Dimension(format!(
            "population has {dim} spike coordinates, model has {}",
            model.spike_dim()
        )));
    }
    for idx in [i, j, ip, jp] {
        if idx >= dim {
            return Err(Error::Index(format!("coordinate {idx} of {dim}")));
        }
    }
    let tw = theta_w_groups(model, m, mp)?;
    let s = moments.sigma();
    Ok(tw.w * (moments.fourth(i, j, ip, jp) - s[(i, j)] * s[(ip, jp)])
        + (tw.theta - tw.w) * (s[(i, jp)] * s[(ip, j)] + s[(i, ip)] * s[(j, jp)]))
}

fn require_above(a: SpikeValue, y: AspectRatio) -> Result<()> {
    if a.side() != Side::AboveBulk {
        return Err(Error::Phase {
            a: a.value(),
            y: y.value(),
            reason: "this limit is stated for spikes above 1 + sqrt(y)".into(),
        });
    }
    Ok(())
}

/// Asymptotic variance of `√n (l_i - λ_i)` for a simple spike.
pub fn eigen_variance(a: SpikeValue, y: AspectRatio, xi4: f64, sigma_ii: f64) -> f64 {
    let tw = theta_w_single(a, y);
    let f = eigen_factor(a.value(), y.value());
    let s2 = sigma_ii * sigma_ii;
    (tw.w * (xi4 - 3.0 * s2) + 2.0 * tw.theta * s2) / (f * f)
}

/// Asymptotic covariance of `√n (l_i - λ_i)` and `√n (l_j - λ_j)` for two
/// simple spikes.
///
/// At a finite sample size `n` the raw covariance of `(l_i, l_j)` is about
/// this value divided by `n`.
pub fn eigen_joint_cov(a_i: SpikeValue, a_j: SpikeValue, y: AspectRatio, pair: &PairMoments) -> Result<f64> {
    let tw = theta_w_cross(a_i, a_j, y)?;
    let fi = eigen_factor(a_i.value(), y.value());
    let fj = eigen_factor(a_j.value(), y.value());
    let r = tw.w * (pair.e_sq_sq - pair.s_ii * pair.s_jj) + 2.0 * (tw.theta - tw.w) * pair.s_ij * pair.s_ij;
    Ok(r / (fi * fj))
}

/// `cov(ξ_i, ξ_j) = 0` and `cov(ξ_i², ξ_j²) = 0`, the condition under which two
/// outliers on the same side of the bulk are asymptotically independent.
pub fn independence_condition(pair: &PairMoments) -> bool {
    let scale = (pair.s_ii * pair.s_jj).abs().max(1.0);
    pair.s_ij.abs() <= INDEPENDENCE_TOLERANCE * scale.sqrt()
        && (pair.e_sq_sq - pair.s_ii * pair.s_jj).abs() <= INDEPENDENCE_TOLERANCE * scale
}

/// Joint limit of the eigenvector projection `u_i(i)²` and the eigenvalue `l_i`.
///
/// `√n (u_i(i)² - mean_proj, l_i - λ_i)` is asymptotically centered Gaussian
/// with covariance `[[v11, v12], [v12, v22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigvecJointLaw {
    pub mean_proj: f64,
    pub v11: f64,
    pub v12: f64,
    pub v22: f64,
}

/// Eigenvector–eigenvalue law for a simple spike above the bulk.
/// `nu4 = E ξ⁴ / a² - 3`.
pub fn eigvec_joint(a: SpikeValue, y: AspectRatio, nu4: f64) -> Result<EigvecJointLaw> {
    require_above(a, y)?;
    let (a, y) = (a.value(), y.value());
    let b = a - 1.0;
    let c = b + y;
    let d = b * b - y;
    let a2 = a * a;
    let v11 = a2 * y * y * (a2 + y - 1.0).powi(2) / (b.powi(4) * c.powi(4)) * nu4
        + 2.0 * a2 * y * (c * c + y * a2) / (d * c.powi(4));
    // The cross term carries (a-1+y)² in the denominator. This is what D·B·Dᵀ
    // gives, and a non-Gaussian Monte Carlo run confirms it.
    let v12 = y * a2 * (a2 - 1.0 + y) * d / (b.powi(4) * c * c) * nu4 + 2.0 * a2 * a * y / (b * c * c);
    let v22 = a2 * d * d / b.powi(4) * nu4 + 2.0 * a2 * d / (b * b);
    Ok(EigvecJointLaw {
        mean_proj: d / (b * c),
        v11,
        v12,
        v22,
    })
}

/// The same law assembled as `D B Dᵀ` from the blocks of [`abjoint_quantities`],
/// with `D = [[2 a y m5 / f³, -1/f²], [1/f, 0]]` and `f = 1 + y m3 a`.
pub fn eigvec_joint_from(ints: &MpIntegrals, a: SpikeValue, y: AspectRatio, nu4: f64) -> Result<EigvecJointLaw> {
    require_above(a, y)?;
    let q = abjoint_from(ints, a, y, nu4);
    let (av, yv) = (a.value(), y.value());
    let f = 1.0 + yv * ints.m3 * av;
    let d = DMatrix::from_row_slice(2, 2, &[2.0 * av * yv * ints.m5 / f.powi(3), -1.0 / (f * f), 1.0 / f, 0.0]);
    let bmat = DMatrix::from_row_slice(2, 2, &[q.b11, q.b12, q.b12, q.b22]);
    let v = &d * bmat * d.transpose();
    Ok(EigvecJointLaw {
        mean_proj: 1.0 / f,
        v11: v[(0, 0)],
        v12: v[(0, 1)],
        v22: v[(1, 1)],
    })
}

/// Trace functionals and covariance blocks behind the eigenvector CLT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbJoint {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub b11: f64,
    pub b12: f64,
    pub b22: f64,
}

impl AbJoint {
    fn with_blocks(w: [f64; 3], tau: [f64; 3], a: f64, nu4: f64) -> Self {
        let block = |k: usize| a * a * w[k] * nu4 + 2.0 * tau[k] * a * a;
        AbJoint {
            w1: w[0],
            w2: w[1],
            w3: w[2],
            tau1: tau[0],
            tau2: tau[1],
            tau3: tau[2],
            b11: block(0),
            b12: block(2),
            b22: block(1),
        }
    }

    /// Trace limits `(w, θ = τ, τ)` for the pairs `(A, A)`, `(B, B)`, `(A, B)`.
    pub fn trace_limits(&self) -> [TraceLimits<f64>; 3] {
        [
            TraceLimits::new(self.w1, self.tau1, self.tau1),
            TraceLimits::new(self.w2, self.tau2, self.tau2),
            TraceLimits::new(self.w3, self.tau3, self.tau3),
        ]
    }

    /// The blocks re-assembled by the general sesquilinear covariance formula,
    /// with `x = y = ξ(i)`, `ρ = a` and `E ξ⁴ = a²(3 + ν4)`.
    pub fn via_sesquilinear(&self, a: f64, nu4: f64) -> Result<CovBlock<f64>> {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        let moments = JointMomentTable::new(one(a), one(a), one(a), one(a * a * (3.0 + nu4)))?;
        let [aa, bb, ab] = self.trace_limits();
        Ok(covariance_blocks(&aa, &bb, &ab, &moments))
    }
}

/// Rational forms of `w1..w3`, `τ1..τ3` and the blocks `B11, B12, B22`.
pub fn abjoint_quantities(a: SpikeValue, y: AspectRatio, nu4: f64) -> Result<AbJoint> {
    require_above(a, y)?;
    let (av, y) = (a.value(), y.value());
    let b = av - 1.0;
    let c = b + y;
    let d = b * b - y;
    let w = [c * c / (b * b), y * y / (d * d), y * c / (b * d)];
    let tau = [
        c * c / d,
        y * b.powi(4) * (c * c + av * av * y) / d.powi(5),
        av * y * c * b * b / d.powi(3),
    ];
    Ok(AbJoint::with_blocks(w, tau, av, nu4))
}

/// Integral route for [`abjoint_quantities`].
pub fn abjoint_from(ints: &MpIntegrals, a: SpikeValue, y: AspectRatio, nu4: f64) -> AbJoint {
    let y = y.value();
    let r = y * (1.0 + ints.m1) / (ints.lambda - y * (1.0 + ints.m1));
    let g = y * ints.m4 / (1.0 - y * ints.m0).powi(2);
    let w = [1.0 + 2.0 * y * ints.m1 + r * r, g * g, r * g + y * ints.m3];
    let tau = [1.0 + 2.0 * y * ints.m1 + y * ints.m2, y * ints.m6, y * (ints.m3 + ints.m7)];
    AbJoint::with_blocks(w, tau, a.value(), nu4)
}
