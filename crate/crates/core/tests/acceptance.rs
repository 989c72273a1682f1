//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spiked_clt::mp_core::{mp_integral, mp_integral_closed, phase_phi, AspectRatio, MpIntegrals, MpKind, SpikeValue};
use spiked_clt::simulate::{
    mc_run, sym_eigen, Execution, Experiment, LatentDist, McConfig, McRun, PopulationDist, QuadFormExperiment,
    SesquilinearExperiment, SpikedExperiment, SpikedTarget,
};
use spiked_clt::spiked_theory::{
    abjoint_from, abjoint_quantities, independence_condition, theta_w_cross, theta_w_cross_from, theta_w_single,
    theta_w_single_from, PopulationMoments, SpikedModel,
};
use spiked_clt::Side;

const Z: f64 = 4.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn report_lines(run: &McRun) -> String {
    run.report
        .targets
        .iter()
        .map(|t| {
            format!(
                "{} emp={:.6} theory={:.6} se={:.6} z={:.2}",
                t.name, t.empirical, t.theory, t.se, t.z_score
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn spiked_run(spikes: &[(f64, usize)], dist: PopulationDist, targets: Vec<SpikedTarget>, reps: usize, seed: u64) -> McRun {
    let model = SpikedModel::from_dims(spikes, 200, 300).expect("model");
    let exp = Experiment::Spiked(SpikedExperiment { model, dist, targets });
    mc_run(&exp, &McConfig::new(reps, seed)).expect("run")
}

/// Two-spike eigenvalue covariance: our n·cov(l1, l2) and the published
/// empirical value (raw scale) must both sit within Z·SE of the theory.
fn two_spike_case(dist: PopulationDist, published_raw: f64, seed: u64) -> Outcome {
    let run = spiked_run(
        &[(9.0, 1), (4.0, 1)],
        dist,
        vec![SpikedTarget::EigCov { i: 1, j: 2 }],
        10_000,
        seed,
    );
    let t = &run.report.targets[0];
    let published_scaled = published_raw * 300.0;
    let published_inside = (published_scaled - t.theory).abs() < Z * t.se;
    outcome(
        t.pass && published_inside,
        format!(
            "n*cov(l1,l2) emp={:.4} theory={:.4} se={:.4} z={:.2} | raw emp={:.5} theory={:.5}; published {published_raw} inside band: {published_inside}",
            t.empirical,
            t.theory,
            t.se,
            t.z_score,
            t.empirical / 300.0,
            t.theory / 300.0
        ),
    )
}

fn ac1() -> Outcome {
    two_spike_case(PopulationDist::UniformEllipse { alpha: 6.0, beta: 4.0 }, -0.0371, 1)
}

fn ac2() -> Outcome {
    two_spike_case(PopulationDist::GaussianDiag { variances: vec![9.0, 4.0] }, 0.0019, 2)
}

/// `(a, y)` pairs on both sides of the bulk, at least 0.05 from the critical points.
fn grid() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for y in [0.1, 0.25, 0.5, 2.0 / 3.0, 0.9] {
        let r = f64::sqrt(y);
        for a in [1.1 + r, 1.5 + r, 2.0 + r, 3.5, 5.0, 10.0] {
            out.push((a, y));
        }
        let hi = 1.0 - r - 0.05;
        if hi > 0.05 {
            for t in [0.0, 0.5, 1.0] {
                out.push((0.05 + t * (hi - 0.05), y));
            }
        }
    }
    out
}

fn ac3() -> Outcome {
    let g = grid();
    let below = g.iter().filter(|(a, y)| *a < 1.0 - y.sqrt()).count();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for &(a, y) in &g {
        let y = AspectRatio::new(y).unwrap();
        let s = SpikeValue::new(a, y).unwrap();
        let lambda = phase_phi(a, y).unwrap();
        for kind in MpKind::ALL {
            let err = (mp_integral_closed(kind, s, y) - mp_integral(kind, lambda, y).unwrap()).abs();
            if err > worst {
                worst = err;
                worst_at = format!("{kind} at a={a:.4}, y={:.4}", y.value());
            }
        }
    }
    outcome(
        g.len() >= 40 && below > 0 && worst < 1e-8,
        format!(
            "{} grid points ({below} below bulk), 9 kinds each; max |closed - quadrature| = {worst:.2e} ({worst_at})",
            g.len()
        ),
    )
}

fn ac4() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut checks = 0usize;
    let mut track = |name: &str, x: f64, y: f64, at: String| {
        let err = (x - y).abs() / y.abs().max(1.0);
        checks += 1;
        if err > worst {
            worst = err;
            worst_at = format!("{name} {at}");
        }
    };
    let g = grid();
    for &(a, yv) in &g {
        let y = AspectRatio::new(yv).unwrap();
        let s = SpikeValue::new(a, y).unwrap();
        let ints = MpIntegrals::closed(s, y);
        let at = format!("a={a:.4} y={yv:.4}");
        let closed = theta_w_single(s, y);
        let route = theta_w_single_from(&ints, y);
        track("theta", route.theta, closed.theta, at.clone());
        track("w", route.w, closed.w, at.clone());
        if s.side() == Side::AboveBulk {
            for nu4 in [0.0, 3.0] {
                let c = abjoint_quantities(s, y, nu4).unwrap();
                let r = abjoint_from(&ints, s, y, nu4);
                for (name, x, z) in [
                    ("w1", r.w1, c.w1),
                    ("w2", r.w2, c.w2),
                    ("w3", r.w3, c.w3),
                    ("tau1", r.tau1, c.tau1),
                    ("tau2", r.tau2, c.tau2),
                    ("tau3", r.tau3, c.tau3),
                    ("B11", r.b11, c.b11),
                    ("B12", r.b12, c.b12),
                    ("B22", r.b22, c.b22),
                ] {
                    track(name, x, z, format!("{at} nu4={nu4}"));
                }
            }
        }
        for &(a2, y2) in &g {
            if y2 != yv || a2 == a {
                continue;
            }
            let s2 = SpikeValue::new(a2, y).unwrap();
            let c = theta_w_cross(s, s2, y).unwrap();
            let r = theta_w_cross_from(&ints, &MpIntegrals::closed(s2, y), y).unwrap();
            let at2 = format!("a_i={a:.4} a_j={a2:.4} y={yv:.4}");
            track("theta(i,j)", r.theta, c.theta, at2.clone());
            track("w(i,j)", r.w, c.w, at2);
        }
    }
    outcome(
        worst < 1e-10,
        format!("{checks} identities; max relative gap (scaled by max(1,|value|)) = {worst:.2e} ({worst_at})"),
    )
}

fn sesq_case(lx: DMatrix<f64>, ly: DMatrix<f64>, latent: Vec<LatentDist>, seed: u64) -> McRun {
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
    let mut sym = |diag: f64| {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            m[(j, j)] = diag + z;
            for i in 0..j {
                let z: f64 = StandardNormal.sample(&mut rng);
                m[(i, j)] = z / (n as f64).sqrt();
                m[(j, i)] = m[(i, j)];
            }
        }
        m
    };
    let a = sym(1.0);
    let b = sym(-0.5);
    let exp = Experiment::Sesquilinear(SesquilinearExperiment { a, b, lx, ly, latent });
    mc_run(&exp, &McConfig::new(20_000, seed)).expect("run")
}

fn ac5() -> Outcome {
    let one = DMatrix::from_element(1, 1, 1.0);
    let k1 = sesq_case(one.clone(), one, vec![LatentDist::Gaussian], 5);
    let lx = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 0.0, 0.0, 1.0, 0.0]);
    let ly = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.6, 0.4, 1.0, 0.0]);
    let k2 = sesq_case(lx, ly, vec![LatentDist::Laplace, LatentDist::Uniform, LatentDist::Gaussian], 6);
    outcome(
        k1.report.pass && k2.report.pass,
        format!(
            "K=1 [{}]  K=2 ({} entries, worst |z| = {:.2})",
            report_lines(&k1),
            k2.report.targets.len(),
            k2.report.targets.iter().map(|t| t.z_score.abs()).fold(0.0, f64::max)
        ),
    )
}

/// Alternative reading of the eigenvector-eigenvalue cross term, with `(a-1)⁶ (a-1+y)⁴` in the kurtosis coefficient.
fn v12_alternative_form(a: f64, y: f64, nu4: f64) -> f64 {
    let (b, c, d) = (a - 1.0, a - 1.0 + y, (a - 1.0).powi(2) - y);
    y * a * a * (a * a - 1.0 + y) * d / (b.powi(6) * c.powi(4)) * nu4 + 2.0 * a.powi(3) * y / (b * c * c)
}

fn ac6() -> Outcome {
    let targets = vec![
        SpikedTarget::ProjMean { i: 1 },
        SpikedTarget::EigVar { i: 1 },
        SpikedTarget::ProjVar { i: 1 },
        SpikedTarget::ProjEigCov { i: 1 },
    ];
    let gauss = spiked_run(&[(9.0, 1)], PopulationDist::GaussianDiag { variances: vec![9.0] }, targets.clone(), 10_000, 7);
    let laplace = spiked_run(
        &[(9.0, 1)],
        PopulationDist::IndependentLaplace { variances: vec![9.0] },
        targets,
        10_000,
        8,
    );
    let cov = &laplace.report.targets[3];
    let alt = v12_alternative_form(9.0, 2.0 / 3.0, 3.0);
    let alt_z = (cov.empirical - alt) / cov.se;
    outcome(
        gauss.report.pass && laplace.report.pass,
        format!(
            "gaussian [{}] | laplace nu4=3 [{}] | alternative v12={alt:.4} would give z={alt_z:.1}",
            report_lines(&gauss),
            report_lines(&laplace)
        ),
    )
}

fn ac7() -> Outcome {
    let n = 400;
    let k = (2.0f64 / 3.0 * n as f64).ceil() as usize;
    let exp = Experiment::QuadForm(QuadFormExperiment {
        n,
        k,
        i: 2,
        latent: LatentDist::Gaussian,
    });
    let run = mc_run(&exp, &McConfig::new(2000, 9)).expect("run");
    outcome(run.report.pass, format!("n={n} k={k} [{}]", report_lines(&run)))
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| -> f64 { StandardNormal.sample(rng) });
    (&m + m.transpose()) * 0.5
}

fn ac8() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // eigensolver bounds
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_res = 0.0f64;
    let mut worst_orth = 0.0f64;
    for n in [2, 17, 64, 150, 300] {
        let s = random_symmetric(n, &mut rng);
        let e = sym_eigen(&s).unwrap();
        let snorm = s.norm();
        for (v, l) in e.vectors.column_iter().zip(e.values.iter()) {
            worst_res = worst_res.max((&s * v - v * *l).norm() / snorm);
        }
        let gram = e.vectors.transpose() * &e.vectors;
        worst_orth = worst_orth.max((gram - DMatrix::<f64>::identity(n, n)).amax());
        pass &= e.values.as_slice().windows(2).all(|w| w[0] >= w[1]);
    }
    pass &= worst_res <= 1e-8 && worst_orth <= 1e-10;
    notes.push(format!("eigensolver residual/|S| {worst_res:.1e}, orthonormality {worst_orth:.1e}"));

    // determinism across worker counts
    let model = SpikedModel::from_dims(&[(9.0, 1), (4.0, 1)], 100, 150).unwrap();
    let exp = Experiment::Spiked(SpikedExperiment {
        model,
        dist: PopulationDist::UniformEllipse { alpha: 6.0, beta: 4.0 },
        targets: vec![SpikedTarget::EigCov { i: 1, j: 2 }, SpikedTarget::ProjVar { i: 1 }],
    });
    let runs: Vec<McRun> = [Execution::Sequential, Execution::ParallelWith(1), Execution::ParallelWith(4)]
        .into_iter()
        .map(|ex| {
            let mut cfg = McConfig::new(200, 77);
            cfg.execution = ex;
            mc_run(&exp, &cfg).unwrap()
        })
        .collect();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    pass &= same;
    notes.push(format!("bit-identical across 1/1/4 workers: {same}"));

    // sign laws of θ(i,j) - w(i,j)
    let mut sign_ok = true;
    let mut pairs = 0;
    for &(a, yv) in &grid() {
        for &(a2, y2) in &grid() {
            if y2 != yv || a2 == a {
                continue;
            }
            let y = AspectRatio::new(yv).unwrap();
            let (s1, s2) = (SpikeValue::new(a, y).unwrap(), SpikeValue::new(a2, y).unwrap());
            let tw = theta_w_cross(s1, s2, y).unwrap();
            let gap = tw.theta - tw.w;
            match (s1.side(), s2.side()) {
                (Side::AboveBulk, Side::AboveBulk) => sign_ok &= gap > 0.0,
                (Side::AboveBulk, Side::BelowBulk) | (Side::BelowBulk, Side::AboveBulk) => sign_ok &= gap < 0.0,
                _ => continue,
            }
            pairs += 1;
        }
    }
    pass &= sign_ok;
    notes.push(format!("sign law on {pairs} spike pairs: {sign_ok}"));

    // condition (*) on the bundled populations
    let indep = PopulationMoments::independent(&[9.0, 4.0], &[6.0 * 81.0, 6.0 * 16.0]).unwrap();
    let gauss = PopulationMoments::gaussian_diag(&[9.0, 4.0]);
    let ellipse = PopulationMoments::uniform_ellipse(6.0, 4.0);
    let verdicts = [
        independence_condition(&indep.pair(0, 1).unwrap()),
        independence_condition(&gauss.pair(0, 1).unwrap()),
        independence_condition(&ellipse.pair(0, 1).unwrap()),
    ];
    let cond_ok = verdicts == [true, true, false];
    pass &= cond_ok;
    notes.push(format!("independence condition (independent, gaussian, ellipse) = {verdicts:?}"));

    outcome(pass, notes.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1 ellipse eigenvalue covariance", ac1),
        ("AC2 gaussian eigenvalue covariance", ac2),
        ("AC3 closed-form integrals vs quadrature", ac3),
        ("AC4 dual-path identities", ac4),
        ("AC5 sesquilinear covariance Monte Carlo", ac5),
        ("AC6 eigenvector-eigenvalue Monte Carlo", ac6),
        ("AC7 quadratic-form covariance Monte Carlo", ac7),
        ("AC8 property suites", ac8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = std::time::Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
