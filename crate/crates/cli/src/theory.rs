//! `theory` subcommand: named closed-form quantities.

use std::fmt::Write;

use anyhow::{anyhow, bail, Context, Result};
use spiked_clt::mp_core::{mp_integral_closed, phase_phi};
use spiked_clt::sesquilinear::quadform_covariance;
use spiked_clt::spiked_theory::{
    abjoint_quantities, eigen_joint_cov, eigen_variance, eigvec_joint, theta_w_cross, theta_w_single,
    PopulationMoments,
};
use spiked_clt::{AspectRatio, MpKind, SpikeValue};

/// Every formula name `theory` accepts.
pub const REGISTRY: &[&str] = &[
    "phi",
    "m0",
    "m1",
    "m2",
    "m3",
    "m4",
    "m5",
    "m6",
    "m7",
    "theta",
    "w",
    "theta-cross",
    "w-cross",
    "eig-var",
    "eig-cov",
    "eigvec-joint",
    "abjoint",
    "quadform",
];

pub fn registry_listing() -> String {
    format!("known formulas: {}", REGISTRY.join(", "))
}

/// Population law for the eigenvalue formulas.
#[derive(Debug, Clone, PartialEq)]
pub enum DistArg {
    Gaussian,
    Ellipse { alpha: f64, beta: f64 },
}

impl std::str::FromStr for DistArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "gaussian" {
            return Ok(DistArg::Gaussian);
        }
        let params = s
            .strip_prefix("ellipse:")
            .ok_or_else(|| format!("unknown distribution `{s}`; use gaussian or ellipse:ALPHA,BETA"))?;
        let (a, b) = params
            .split_once(',')
            .ok_or_else(|| format!("ellipse needs two parameters, got `{params}`"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad ellipse parameter `{v}`: {e}"));
        Ok(DistArg::Ellipse {
            alpha: parse(a)?,
            beta: parse(b)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TheoryArgs {
    pub name: String,
    pub a: Option<f64>,
    pub a2: Option<f64>,
    pub y: f64,
    pub nu4: f64,
    pub dist: DistArg,
    pub n: Option<usize>,
    pub i: usize,
}

/// Rounds to 12 significant digits.
pub fn sig12(v: f64) -> String {
    sig(v, 12)
}

/// Rounds to `digits` significant digits, dropping trailing zeros.
pub fn sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..=12).contains(&mag) {
        let p = digits - 1;
        return format!("{v:.p$e}");
    }
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn spike(value: Option<f64>, flag: &str, y: AspectRatio) -> Result<SpikeValue> {
    let a = value.ok_or_else(|| anyhow!("`{flag}` is required for this formula"))?;
    Ok(SpikeValue::new(a, y)?)
}

/// Moments of the spike block `(a, a2)` under `dist`.
fn pair_population(dist: &DistArg, a: f64, a2: f64) -> Result<PopulationMoments> {
    match *dist {
        DistArg::Gaussian => Ok(PopulationMoments::gaussian_diag(&[a, a2])),
        DistArg::Ellipse { alpha, beta } => {
            let pop = PopulationMoments::uniform_ellipse(alpha, beta);
            let (v1, v2) = (pop.sigma()[(0, 0)], pop.sigma()[(1, 1)]);
            if (v1 - a).abs() > 1e-9 * a || (v2 - a2).abs() > 1e-9 * a2 {
                bail!("ellipse:{alpha},{beta} has variances ({v1}, {v2}), which do not match the spikes ({a}, {a2})");
            }
            Ok(pop)
        }
    }
}

/// Evaluates the formula and renders `label = value` lines.
pub fn evaluate(args: &TheoryArgs) -> Result<String> {
    let y = AspectRatio::new(args.y).context("invalid --y")?;
    let mut out = String::new();
    let mut line = |label: &str, v: f64| {
        let _ = writeln!(out, "{label} = {}", sig12(v));
    };
    match args.name.as_str() {
        "phi" => {
            let a = args.a.ok_or_else(|| anyhow!("`--a` is required for this formula"))?;
            line("phi(a) = a + y a/(a-1)", phase_phi(a, y)?);
        }
        m if m.len() == 2 && m.starts_with('m') => {
            let kind: MpKind = m.parse().map_err(|_| anyhow!("unknown formula `{m}`\n{}", registry_listing()))?;
            let a = spike(args.a, "--a", y)?;
            line(&format!("{kind} at phi(a)"), mp_integral_closed(kind, a, y));
        }
        "theta" | "w" => {
            let tw = theta_w_single(spike(args.a, "--a", y)?, y);
            if args.name == "theta" {
                line("theta(a) = (a-1+y)^2/((a-1)^2-y)", tw.theta);
            } else {
                line("w(a) = ((a-1+y)/(a-1))^2", tw.w);
            }
        }
        "theta-cross" | "w-cross" => {
            let tw = theta_w_cross(spike(args.a, "--a", y)?, spike(args.a2, "--a2", y)?, y)?;
            if args.name == "theta-cross" {
                line("theta(a,a2)", tw.theta);
            } else {
                line("w(a,a2) = (a-1+y)(a2-1+y)/((a-1)(a2-1))", tw.w);
            }
        }
        "eig-var" => {
            let a = spike(args.a, "--a", y)?;
            let (xi4, sigma) = match args.dist {
                DistArg::Gaussian => (3.0 * a.value() * a.value() * (1.0 + args.nu4 / 3.0), a.value()),
                DistArg::Ellipse { .. } => {
                    let a2 = args.a2.unwrap_or(a.value());
                    let pop = pair_population(&args.dist, a.value(), a2)?;
                    (pop.xi4(0), pop.sigma()[(0, 0)])
                }
            };
            let v = eigen_variance(a, y, xi4, sigma);
            line("n var(l)", v);
            if let Some(n) = args.n {
                line("var(l)", v / n as f64);
            }
        }
        "eig-cov" => {
            let (a, a2) = (spike(args.a, "--a", y)?, spike(args.a2, "--a2", y)?);
            let pop = pair_population(&args.dist, a.value(), a2.value())?;
            let v = eigen_joint_cov(a, a2, y, &pop.pair(0, 1)?)?;
            line("n cov(l1,l2)", v);
            if let Some(n) = args.n {
                line("cov(l1,l2)", v / n as f64);
            }
        }
        "eigvec-joint" => {
            let law = eigvec_joint(spike(args.a, "--a", y)?, y, args.nu4)?;
            line("mean u(1)^2", law.mean_proj);
            line("n var(u(1)^2)", law.v11);
            line("n cov(u(1)^2,l)", law.v12);
            line("n var(l)", law.v22);
        }
        "abjoint" => {
            let q = abjoint_quantities(spike(args.a, "--a", y)?, y, args.nu4)?;
            for (label, v) in [
                ("w1", q.w1),
                ("w2", q.w2),
                ("w3", q.w3),
                ("tau1", q.tau1),
                ("tau2", q.tau2),
                ("tau3", q.tau3),
                ("B11", q.b11),
                ("B12", q.b12),
                ("B22", q.b22),
            ] {
                line(label, v);
            }
        }
        "quadform" => {
            let cov = quadform_covariance(args.i, y, args.nu4 + 3.0)?;
            let m = cov.matrix();
            let _ = writeln!(out, "covariance of (Q1..Q{}, Q{}):", args.i, args.i + 1);
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| sig12(m[(r, c)])).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        other => bail!("unknown formula `{other}`\n{}", registry_listing()),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(name: &str) -> TheoryArgs {
        TheoryArgs {
            name: name.into(),
            a: Some(9.0),
            a2: Some(4.0),
            y: 2.0 / 3.0,
            nu4: 0.0,
            dist: DistArg::Gaussian,
            n: None,
            i: 1,
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(sig12(9.75), "9.75");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(-10.995370370370372), "-10.9953703704");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1.5e-9), "1.50000000000e-9");
    }

    #[test]
    fn dist_parsing() {
        assert_eq!("ellipse:6,4".parse::<DistArg>().unwrap(), DistArg::Ellipse { alpha: 6.0, beta: 4.0 });
        assert!("ellipse:6".parse::<DistArg>().is_err());
        assert!("cauchy".parse::<DistArg>().is_err());
    }

    #[test]
    fn every_registry_entry_evaluates() {
        for name in REGISTRY {
            assert!(evaluate(&args(name)).is_ok(), "{name}");
        }
        assert!(evaluate(&args("m8")).is_err());
    }

    #[test]
    fn ellipse_must_match_spikes() {
        let mut a = args("eig-cov");
        a.dist = DistArg::Ellipse { alpha: 6.0, beta: 5.0 };
        assert!(evaluate(&a).is_err());
    }
}
