//! Marčenko–Pastur primitives.
//!
//! The law `F_y` with ratio `y ∈ (0, 1)` has density
//! `sqrt((x - a_y)(b_y - x)) / (2π x y)` on `[a_y, b_y]`, where
//! `a_y = (1 - √y)²` and `b_y = (1 + √y)²`.
//!
//! Integrals against `F_y` are evaluated after the substitution
//! `x = c + h·sin t` (`c`, `h` the centre and half-width of the support),
//! which turns the square-root edges into a smooth `cos² t` factor, followed by
//! Gauss–Legendre rules of doubling order until two successive orders agree.
//!
//! The eight integrals `m_0 … m_7` are
//!
//! | kind | integrand            |
//! |------|----------------------|
//! | M0   | `1 / (λ - x)`        |
//! | M1   | `x / (λ - x)`        |
//! | M2   | `x² / (λ - x)²`      |
//! | M3   | `x / (λ - x)²`       |
//! | M4   | `1 / (λ - x)²`       |
//! | M5   | `x / (λ - x)³`       |
//! | M6   | `x² / (λ - x)⁴`      |
//! | M7   | `x² / (λ - x)³`      |
//!
//! and at `λ = φ(a)` each has a rational closed form in `(a, y)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Distance from the critical interval `[1 - √y, 1 + √y]` below which a spike
/// counts as inside the bulk.
pub const BULK_TOLERANCE: f64 = 1e-9;

const QUADRATURE_RTOL: f64 = 1e-12;

/// Limiting dimension-to-sample-size ratio, restricted to `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AspectRatio(f64);

impl AspectRatio {
    pub fn new(y: f64) -> Result<Self> {
        if y.is_finite() && y > 0.0 && y < 1.0 {
            Ok(AspectRatio(y))
        } else {
            Err(Error::Domain(format!("aspect ratio must lie in (0, 1), got {y}")))
        }
    }

    /// `p / n` as a ratio.
    pub fn from_dims(p: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        Self::new(p as f64 / n as f64)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `(a_y, b_y)`.
    pub fn support(self) -> (f64, f64) {
        let s = self.0.sqrt();
        ((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s))
    }

    /// The critical interval `[1 - √y, 1 + √y]` for spikes.
    pub fn critical_interval(self) -> (f64, f64) {
        let s = self.0.sqrt();
        (1.0 - s, 1.0 + s)
    }
}

impl TryFrom<f64> for AspectRatio {
    type Error = Error;
    fn try_from(y: f64) -> Result<Self> {
        AspectRatio::new(y)
    }
}

impl From<AspectRatio> for f64 {
    fn from(y: AspectRatio) -> f64 {
        y.0
    }
}

/// Which side of the bulk a spike's outlier escapes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    AboveBulk,
    BelowBulk,
}

/// A population spike that produces an outlier sample eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeValue {
    a: f64,
    side: Side,
}

impl SpikeValue {
    /// Classifies `a` against the critical interval for `y`.
    pub fn new(a: f64, y: AspectRatio) -> Result<Self> {
        let phase = |reason: &str| Error::Phase {
            a,
            y: y.value(),
            reason: reason.to_string(),
        };
        if !a.is_finite() || a <= 0.0 {
            return Err(phase("spike must be positive and finite"));
        }
        let (lo, hi) = y.critical_interval();
        if a >= lo - BULK_TOLERANCE && a <= hi + BULK_TOLERANCE {
            return Err(phase("spike lies inside the critical interval [1-√y, 1+√y]"));
        }
        let side = if a > hi { Side::AboveBulk } else { Side::BelowBulk };
        Ok(SpikeValue { a, side })
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.a
    }

    #[inline]
    pub fn side(self) -> Side {
        self.side
    }
}

/// Support endpoints `(a_y, b_y)`.
pub fn mp_support(y: AspectRatio) -> (f64, f64) {
    y.support()
}

/// Marčenko–Pastur density; zero off the support.
pub fn mp_density(x: f64, y: AspectRatio) -> f64 {
    let (lo, hi) = y.support();
    if x <= lo || x >= hi {
        return 0.0;
    }
    ((x - lo) * (hi - x)).sqrt() / (2.0 * PI * x * y.value())
}

/// Integrates `g` against `F_y`.
pub fn integrate_mp<G: Fn(f64) -> f64>(g: G, y: AspectRatio) -> Result<f64> {
    let (lo, hi) = y.support();
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let yv = y.value();
    let integrand = |t: f64| {
        let x = c + h * t.sin();
        let cos = t.cos();
        g(x) * h * h * cos * cos / (2.0 * PI * x * yv)
    };
    let half_pi = 0.5 * PI;
    let mut prev = quadrature::rule(0).integrate(-half_pi, half_pi, integrand);
    for idx in 1..quadrature::ORDERS.len() {
        let next = quadrature::rule(idx).integrate(-half_pi, half_pi, integrand);
        if (next - prev).abs() <= QUADRATURE_RTOL * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Convergence {
        what: "Marchenko-Pastur quadrature",
        iterations: quadrature::ORDERS.len(),
    })
}

/// The integrals `m_0 … m_7`, plus the combination `m_3 + m_7` that has its own
/// closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MpKind {
    M0,
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
    M3PlusM7,
}

impl MpKind {
    pub const EIGHT: [MpKind; 8] = [
        MpKind::M0,
        MpKind::M1,
        MpKind::M2,
        MpKind::M3,
        MpKind::M4,
        MpKind::M5,
        MpKind::M6,
        MpKind::M7,
    ];

    pub const ALL: [MpKind; 9] = [
        MpKind::M0,
        MpKind::M1,
        MpKind::M2,
        MpKind::M3,
        MpKind::M4,
        MpKind::M5,
        MpKind::M6,
        MpKind::M7,
        MpKind::M3PlusM7,
    ];

    fn integrand(self, lambda: f64) -> impl Fn(f64) -> f64 {
        move |x: f64| {
            let d = lambda - x;
            match self {
                MpKind::M0 => 1.0 / d,
                MpKind::M1 => x / d,
                MpKind::M2 => x * x / (d * d),
                MpKind::M3 => x / (d * d),
                MpKind::M4 => 1.0 / (d * d),
                MpKind::M5 => x / (d * d * d),
                MpKind::M6 => x * x / (d * d * d * d),
                MpKind::M7 => x * x / (d * d * d),
                MpKind::M3PlusM7 => x / (d * d) + x * x / (d * d * d),
            }
        }
    }
}

impl std::fmt::Display for MpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MpKind::M0 => "m0",
            MpKind::M1 => "m1",
            MpKind::M2 => "m2",
            MpKind::M3 => "m3",
            MpKind::M4 => "m4",
            MpKind::M5 => "m5",
            MpKind::M6 => "m6",
            MpKind::M7 => "m7",
            MpKind::M3PlusM7 => "m3+m7",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for MpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "m0" => MpKind::M0,
            "m1" => MpKind::M1,
            "m2" => MpKind::M2,
            "m3" => MpKind::M3,
            "m4" => MpKind::M4,
            "m5" => MpKind::M5,
            "m6" => MpKind::M6,
            "m7" => MpKind::M7,
            "m3+m7" | "m3plusm7" => MpKind::M3PlusM7,
            other => return Err(Error::Domain(format!("unknown integral kind '{other}'"))),
        })
    }
}

fn check_outside_support(lambda: f64, y: AspectRatio) -> Result<()> {
    let (lower, upper) = y.support();
    if !lambda.is_finite() || (lambda >= lower && lambda <= upper) {
        return Err(Error::Support { lambda, lower, upper });
    }
    Ok(())
}

/// `m_kind(λ)` by quadrature.
pub fn mp_integral(kind: MpKind, lambda: f64, y: AspectRatio) -> Result<f64> {
    check_outside_support(lambda, y)?;
    integrate_mp(kind.integrand(lambda), y)
}

/// `m_kind(φ(a))` from its rational closed form.
pub fn mp_integral_closed(kind: MpKind, a: SpikeValue, y: AspectRatio) -> f64 {
    let a = a.value();
    let y = y.value();
    let b = a - 1.0;
    let d = b * b - y;
    let m3_plus_m7 = a * (b + y) * b * b / (d * d * d);
    match kind {
        MpKind::M0 => 1.0 / (b + y),
        MpKind::M1 => 1.0 / b,
        MpKind::M2 => (b + y * (a + 1.0)) / (b * d),
        MpKind::M3 => 1.0 / d,
        MpKind::M4 => b * b / (d * (b + y) * (b + y)),
        MpKind::M5 => b * b * b / (d * d * d),
        MpKind::M6 => b.powi(4) * ((b + y) * (b + y) + a * a * y) / d.powi(5),
        MpKind::M7 => m3_plus_m7 - 1.0 / d,
        MpKind::M3PlusM7 => m3_plus_m7,
    }
}

/// Outlier location `φ(a) = a + y a / (a - 1)`.
pub fn phase_phi(a: f64, y: AspectRatio) -> Result<f64> {
    if !a.is_finite() || (a - 1.0).abs() < 1e-12 {
        return Err(Error::Phase {
            a,
            y: y.value(),
            reason: "φ is undefined at a = 1".into(),
        });
    }
    Ok(a + y.value() * a / (a - 1.0))
}

/// `∫ x^m F_y(dx)`.
pub fn mp_moment(m: u32, y: AspectRatio) -> Result<f64> {
    match m {
        0 | 1 => Ok(1.0),
        _ => integrate_mp(|x| x.powi(m as i32), y),
    }
}

/// The eight integrals at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpIntegrals {
    pub lambda: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub m6: f64,
    pub m7: f64,
}

impl MpIntegrals {
    /// All eight integrals by quadrature at `lambda`.
    pub fn quadrature(lambda: f64, y: AspectRatio) -> Result<Self> {
        let mut v = [0.0; 8];
        for (slot, kind) in v.iter_mut().zip(MpKind::EIGHT) {
            *slot = mp_integral(kind, lambda, y)?;
        }
        Ok(Self::from_array(lambda, v))
    }

    /// All eight integrals at `λ = φ(a)` from the closed forms.
    pub fn closed(a: SpikeValue, y: AspectRatio) -> Self {
        let lambda = a.value() + y.value() * a.value() / (a.value() - 1.0);
        let mut v = [0.0; 8];
        for (slot, kind) in v.iter_mut().zip(MpKind::EIGHT) {
            *slot = mp_integral_closed(kind, a, y);
        }
        Self::from_array(lambda, v)
    }

    fn from_array(lambda: f64, v: [f64; 8]) -> Self {
        MpIntegrals {
            lambda,
            m0: v[0],
            m1: v[1],
            m2: v[2],
            m3: v[3],
            m4: v[4],
            m5: v[5],
            m6: v[6],
            m7: v[7],
        }
    }

    pub fn get(&self, kind: MpKind) -> f64 {
        match kind {
            MpKind::M0 => self.m0,
            MpKind::M1 => self.m1,
            MpKind::M2 => self.m2,
            MpKind::M3 => self.m3,
            MpKind::M4 => self.m4,
            MpKind::M5 => self.m5,
            MpKind::M6 => self.m6,
            MpKind::M7 => self.m7,
            MpKind::M3PlusM7 => self.m3 + self.m7,
        }
    }
}
