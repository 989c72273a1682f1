//! Limiting covariance of groups of random sesquilinear forms.
//!
//! For i.i.d. pairs `(x_u, y_u) ∈ C^K × C^K`, `u = 1..n`, and Hermitian
//! matrices `A_1, …, A_k`, the forms
//!
//! ```text
//! U^m(l) = (X(l)* A_m Y(l) - ρ(l) tr A_m) / √n
//! ```
//!
//! are jointly asymptotically Gaussian. Entry `(l, l')` of block `(m, m')` of
//! the limiting covariance is
//!
//! ```text
//! w·A1(l,l') + (τ - w)·A2(l,l') + (θ - w)·A3(l,l')
//! ```
//!
//! with `w, θ, τ` the normalized traces of `A_m ∘ A_m'`, `A_m A_m'*` and
//! `A_m A_m'`, and `A1, A2, A3` built from second and fourth moments of the
//! coordinates.
//!
//! Trace functionals are evaluated at the supplied finite `n`; comparisons with
//! simulations at that `n` therefore carry only the `O(n^{-1/2})` error of the
//! Gaussian approximation itself.

use nalgebra::{ComplexField, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mp_core::{mp_moment, AspectRatio};
use crate::simulate::eigen::sym_eigen;

/// Hermitian check tolerance on the largest entry-wise asymmetry.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Floor on the smallest eigenvalue below which an assembled real covariance is
/// reported as not positive semidefinite.
pub const PSD_FLOOR: f64 = -1e-10;

/// Scalars the covariance assembly works over: `f64` or `Complex<f64>`.
pub trait MomentScalar: ComplexField<RealField = f64> + Copy {
    /// Smallest eigenvalue when the matrix is a real covariance, `None` when the
    /// notion does not apply.
    fn min_eigenvalue(m: &DMatrix<Self>) -> Option<f64>;
}

impl MomentScalar for f64 {
    fn min_eigenvalue(m: &DMatrix<f64>) -> Option<f64> {
        sym_eigen(m).ok().and_then(|e| e.values.iter().copied().reduce(f64::min))
    }
}

impl MomentScalar for nalgebra::Complex<f64> {
    fn min_eigenvalue(_: &DMatrix<Self>) -> Option<f64> {
        None
    }
}

/// Normalized traces `(1/n) tr[A∘B]`, `(1/n) tr[A B*]`, `(1/n) tr[A B]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceLimits<T> {
    pub w: T,
    pub theta: T,
    pub tau: T,
}

impl<T: MomentScalar> TraceLimits<T> {
    pub fn new(w: T, theta: T, tau: T) -> Self {
        TraceLimits { w, theta, tau }
    }
}

fn max_abs<T: MomentScalar>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|v| v.modulus()).fold(0.0, f64::max)
}

fn check_hermitian<T: MomentScalar>(m: &DMatrix<T>) -> Result<()> {
    let n = m.nrows();
    let scale = max_abs(m).max(1.0);
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            let d = (m[(i, j)] - m[(j, i)].conjugate()).modulus();
            worst = worst.max(d);
        }
    }
    if worst > HERMITIAN_TOLERANCE * scale {
        return Err(Error::Symmetry { max_asymmetry: worst });
    }
    Ok(())
}

/// Finite-`n` values of the three trace functionals for a pair of Hermitian
/// matrices.
pub fn trace_limits_pair<T: MomentScalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<TraceLimits<T>> {
    let n = a.nrows();
    if !a.is_square() || !b.is_square() || b.nrows() != n || n == 0 {
        return Err(Error::Shape(format!(
            "expected two non-empty square matrices of equal size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    check_hermitian(a)?;
    check_hermitian(b)?;
    let mut w = T::zero();
    let mut theta = T::zero();
    let mut tau = T::zero();
    for u in 0..n {
        w += a[(u, u)] * b[(u, u)];
        for v in 0..n {
            theta += a[(u, v)] * b[(u, v)].conjugate();
            tau += a[(u, v)] * b[(v, u)];
        }
    }
    let inv = T::from_real(1.0 / n as f64);
    Ok(TraceLimits {
        w: w * inv,
        theta: theta * inv,
        tau: tau * inv,
    })
}

/// Second and fourth moments of the coordinate pairs `(x_l, y_l)`.
///
/// * `xx[(l, l')] = E[x̄_l x̄_l']`
/// * `yy[(l, l')] = E[y_l y_l']`
/// * `xy[(l, l')] = E[x̄_l y_l']`, so `ρ(l) = xy[(l, l)]`
/// * `fourth[(l, l')] = E[x̄_l y_l x̄_l' y_l']`
#[derive(Debug, Clone, PartialEq)]
pub struct JointMomentTable<T: MomentScalar> {
    xx: DMatrix<T>,
    yy: DMatrix<T>,
    xy: DMatrix<T>,
    fourth: DMatrix<T>,
}

fn check_symmetric<T: MomentScalar>(name: &str, m: &DMatrix<T>) -> Result<()> {
    let scale = max_abs(m).max(1.0);
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).modulus());
        }
    }
    if worst > 1e-12 * scale {
        return Err(Error::Dimension(format!(
            "moment table '{name}' must be symmetric in (l, l'), asymmetry {worst:e}"
        )));
    }
    Ok(())
}

impl<T: MomentScalar> JointMomentTable<T> {
    pub fn new(xx: DMatrix<T>, yy: DMatrix<T>, xy: DMatrix<T>, fourth: DMatrix<T>) -> Result<Self> {
        let k = xx.nrows();
        if k == 0 {
            return Err(Error::Dimension("moment table needs K >= 1".into()));
        }
        for (name, m) in [("xx", &xx), ("yy", &yy), ("xy", &xy), ("fourth", &fourth)] {
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::Dimension(format!(
                    "moment table '{name}' is {}x{}, expected {k}x{k}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        check_symmetric("xx", &xx)?;
        check_symmetric("yy", &yy)?;
        check_symmetric("fourth", &fourth)?;
        Ok(JointMomentTable { xx, yy, xy, fourth })
    }

    /// Number of coordinates `K`.
    pub fn dim(&self) -> usize {
        self.xx.nrows()
    }

    pub fn rho(&self, l: usize) -> T {
        self.xy[(l, l)]
    }

    pub fn a1(&self, l: usize, lp: usize) -> T {
        self.fourth[(l, lp)] - self.rho(l) * self.rho(lp)
    }

    pub fn a2(&self, l: usize, lp: usize) -> T {
        self.xx[(l, lp)] * self.yy[(l, lp)]
    }

    pub fn a3(&self, l: usize, lp: usize) -> T {
        self.xy[(l, lp)] * self.xy[(lp, l)]
    }

    /// Covariance `w A1 + (τ - w) A2 + (θ - w) A3` for one coordinate pair.
    pub fn entry(&self, tl: &TraceLimits<T>, l: usize, lp: usize) -> T {
        tl.w * self.a1(l, lp) + (tl.tau - tl.w) * self.a2(l, lp) + (tl.theta - tl.w) * self.a3(l, lp)
    }
}

impl JointMomentTable<f64> {
    /// Moments of `x = Lx z`, `y = Ly z` where `z` has independent zero-mean,
    /// unit-variance coordinates with fourth moments `z_fourth`.
    pub fn from_linear_mixing(lx: &DMatrix<f64>, ly: &DMatrix<f64>, z_fourth: &[f64]) -> Result<Self> {
        let k = lx.nrows();
        let d = lx.ncols();
        if ly.nrows() != k || ly.ncols() != d || z_fourth.len() != d {
            return Err(Error::Dimension(format!(
                "mixing matrices {}x{} and {}x{} with {} latent fourth moments",
                lx.nrows(),
                lx.ncols(),
                ly.nrows(),
                ly.ncols(),
                z_fourth.len()
            )));
        }
        let second = |c1: &[f64], c2: &[f64]| c1.iter().zip(c2).map(|(a, b)| a * b).sum::<f64>();
        let fourth = |c: [&[f64]; 4]| {
            let mut s = second(c[0], c[1]) * second(c[2], c[3])
                + second(c[0], c[2]) * second(c[1], c[3])
                + second(c[0], c[3]) * second(c[1], c[2]);
            for (t, kappa) in z_fourth.iter().enumerate() {
                s += (kappa - 3.0) * c[0][t] * c[1][t] * c[2][t] * c[3][t];
            }
            s
        };
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..k).map(|l| m.row(l).iter().copied().collect()).collect()
        };
        let rx = rows(lx);
        let ry = rows(ly);
        let xx = DMatrix::from_fn(k, k, |l, lp| second(&rx[l], &rx[lp]));
        let yy = DMatrix::from_fn(k, k, |l, lp| second(&ry[l], &ry[lp]));
        let xy = DMatrix::from_fn(k, k, |l, lp| second(&rx[l], &ry[lp]));
        let f = DMatrix::from_fn(k, k, |l, lp| fourth([&rx[l], &ry[l], &rx[lp], &ry[lp]]));
        JointMomentTable::new(xx, yy, xy, f)
    }
}

/// A dense covariance matrix made of `forms × forms` blocks of size `K × K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovBlock<T: MomentScalar> {
    matrix: DMatrix<T>,
    forms: usize,
    coords: usize,
    min_eigenvalue: Option<f64>,
}

impl<T: MomentScalar> CovBlock<T> {
    fn assemble(forms: usize, coords: usize, entry: impl Fn(usize, usize, usize, usize) -> T) -> Self {
        let dim = forms * coords;
        let mut matrix = DMatrix::from_element(dim, dim, T::zero());
        for c in 0..dim {
            for r in 0..=c {
                let v = entry(r / coords, c / coords, r % coords, c % coords);
                matrix[(r, c)] = v;
                matrix[(c, r)] = v;
            }
        }
        let min_eigenvalue = T::min_eigenvalue(&matrix);
        if let Some(min) = min_eigenvalue {
            if min < PSD_FLOOR {
                log::warn!(
                    "assembled covariance is not positive semidefinite (min eigenvalue {min:e}); \
                     check the moment table for consistency"
                );
            }
        }
        CovBlock {
            matrix,
            forms,
            coords,
            min_eigenvalue,
        }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    /// Number of form groups (`k`).
    pub fn forms(&self) -> usize {
        self.forms
    }

    /// Coordinates per group (`K`).
    pub fn coords(&self) -> usize {
        self.coords
    }

    /// Block `(i, j)` as a `K × K` matrix.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<T> {
        let k = self.coords;
        self.matrix.view((i * k, j * k), (k, k)).into_owned()
    }

    /// Smallest eigenvalue for real covariances.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.min_eigenvalue
    }

    /// `false` only when a real covariance has an eigenvalue below [`PSD_FLOOR`].
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue.is_none_or(|m| m >= PSD_FLOOR)
    }
}

/// The `2K × 2K` covariance of `(U(1..K), V(1..K))` for the pair `(A, B)`.
pub fn covariance_blocks<T: MomentScalar>(
    tl_aa: &TraceLimits<T>,
    tl_bb: &TraceLimits<T>,
    tl_ab: &TraceLimits<T>,
    moments: &JointMomentTable<T>,
) -> CovBlock<T> {
    CovBlock::assemble(2, moments.dim(), |bi, bj, l, lp| {
        let tl = match (bi, bj) {
            (0, 0) => tl_aa,
            (1, 1) => tl_bb,
            _ => tl_ab,
        };
        // assemble() only asks for the upper triangle, so (bi, bj) = (0, 1) here
        // and the lower block comes out as the transpose.
        moments.entry(tl, l, lp)
    })
}

/// Trace functionals for every pair `(m, m')` of `k` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLimitGrid<T: MomentScalar> {
    k: usize,
    entries: Vec<Option<TraceLimits<T>>>,
}

impl<T: MomentScalar> TraceLimitGrid<T> {
    pub fn new(k: usize) -> Self {
        TraceLimitGrid {
            k,
            entries: vec![None; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sets the triple for `(m, m')`; order of the pair does not matter.
    pub fn set(&mut self, m: usize, mp: usize, tl: TraceLimits<T>) -> Result<()> {
        if m >= self.k || mp >= self.k {
            return Err(Error::Index(format!("pair ({m}, {mp}) with k = {}", self.k)));
        }
        let (i, j) = if m <= mp { (m, mp) } else { (mp, m) };
        self.entries[i * self.k + j] = Some(tl);
        Ok(())
    }

    pub fn get(&self, m: usize, mp: usize) -> Option<&TraceLimits<T>> {
        let (i, j) = if m <= mp { (m, mp) } else { (mp, m) };
        self.entries.get(i * self.k + j).and_then(Option::as_ref)
    }

    /// All `k(k+1)/2` triples from a list of Hermitian matrices.
    pub fn from_matrices(mats: &[DMatrix<T>]) -> Result<Self> {
        let mut grid = TraceLimitGrid::new(mats.len());
        for i in 0..mats.len() {
            for j in i..mats.len() {
                grid.set(i, j, trace_limits_pair(&mats[i], &mats[j])?)?;
            }
        }
        Ok(grid)
    }
}

/// The `(K·k) × (K·k)` covariance of `k` groups of forms.
pub fn k_form_covariance<T: MomentScalar>(
    tl: &TraceLimitGrid<T>,
    moments: &JointMomentTable<T>,
) -> Result<CovBlock<T>> {
    let k = tl.k();
    if k == 0 {
        return Err(Error::Dimension("need at least one group of forms".into()));
    }
    for i in 0..k {
        for j in i..k {
            if tl.get(i, j).is_none() {
                return Err(Error::Dimension(format!("missing trace limits for pair ({i}, {j})")));
            }
        }
    }
    Ok(CovBlock::assemble(k, moments.dim(), |bi, bj, l, lp| {
        let t = tl.get(bi, bj).expect("checked above");
        moments.entry(t, l, lp)
    }))
}

/// `f(m) = lim (1/n) tr (S₁S₁ᵀ)^m = y ∫ x^m dF_y(x)` for the companion matrix
/// `S₁` with `y n` columns.
pub fn quadform_f(m: u32, y: AspectRatio) -> Result<f64> {
    Ok(y.value() * mp_moment(m, y)?)
}

/// Limiting covariance of
/// `√(n/2) (s₁ᵀ(S₁S₁ᵀ)^m s₁ - f_n(m))`, `m = 1..i`, together with
/// `√(n/2) (s₁ᵀs₁ - 1)` in the last slot. `fourth` is `E v⁴` of the
/// unit-variance entries.
pub fn quadform_covariance(i: usize, y: AspectRatio, fourth: f64) -> Result<CovBlock<f64>> {
    if i == 0 {
        return Err(Error::Domain("need at least one power (i >= 1)".into()));
    }
    if fourth.is_nan() || fourth < 1.0 {
        return Err(Error::Domain(format!("fourth moment must be at least 1, got {fourth}")));
    }
    let f = (0..=2 * i as u32)
        .map(|m| quadform_f(m, y))
        .collect::<Result<Vec<_>>>()?;
    let c = 0.5 * (fourth - 1.0);
    Ok(CovBlock::assemble(i + 1, 1, |r, s, _, _| {
        let (r, s) = (r + 1, s + 1);
        match (r <= i, s <= i) {
            (true, true) => c * f[r] * f[s] + f[r + s] - f[r] * f[s],
            (true, false) => c * f[r],
            (false, true) => c * f[s],
            (false, false) => c,
        }
    }))
}
