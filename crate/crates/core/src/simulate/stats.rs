//! Replicate-level estimators with Monte Carlo standard errors.

use serde::{Deserialize, Serialize};

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample mean with standard error `sd / √R`.
pub fn mean_estimate(x: &[f64]) -> Estimate {
    let r = x.len() as f64;
    let m = mean(x);
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (r - 1.0);
    Estimate {
        value: m,
        se: (var / r).sqrt(),
    }
}

/// Covariance of paired replicates with a jackknife standard error.
///
/// With `centers = None` the data are centered at their sample means and the
/// usual `R - 1` denominator is used; with known centers the plain average of
/// products is taken.
pub fn covariance_estimate(x: &[f64], y: &[f64], centers: Option<(f64, f64)>) -> Estimate {
    assert_eq!(x.len(), y.len());
    let r = x.len();
    let rf = r as f64;
    match centers {
        None => {
            let (mx, my) = (mean(x), mean(y));
            let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
            let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
            let sx: f64 = dx.iter().sum();
            let sy: f64 = dy.iter().sum();
            let sxy: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
            let value = (sxy - sx * sy / rf) / (rf - 1.0);
            let loo: Vec<f64> = dx
                .iter()
                .zip(&dy)
                .map(|(a, b)| ((sxy - a * b) - (sx - a) * (sy - b) / (rf - 1.0)) / (rf - 2.0))
                .collect();
            Estimate {
                value,
                se: jackknife_se(&loo),
            }
        }
        Some((mx, my)) => {
            let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
            let s: f64 = prods.iter().sum();
            let loo: Vec<f64> = prods.iter().map(|p| (s - p) / (rf - 1.0)).collect();
            Estimate {
                value: s / rf,
                se: jackknife_se(&loo),
            }
        }
    }
}

fn jackknife_se(loo: &[f64]) -> f64 {
    let r = loo.len() as f64;
    let m = mean(loo);
    ((r - 1.0) / r * loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sqrt()
}

/// Sample skewness and excess kurtosis.
pub fn shape_moments(x: &[f64]) -> (f64, f64) {
    let m = mean(x);
    let r = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= r;
    m3 /= r;
    m4 /= r;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}
