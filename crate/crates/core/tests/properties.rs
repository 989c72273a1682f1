use nalgebra::DMatrix;
use proptest::prelude::*;

use spiked_clt::mp_core::{AspectRatio, MpIntegrals, Side, SpikeValue};
use spiked_clt::sesquilinear::{covariance_blocks, trace_limits_pair, JointMomentTable};
use spiked_clt::simulate::{
    mc_run, sym_eigen, top_eigenpairs, Execution, Experiment, LatentDist, McConfig, SesquilinearExperiment,
};
use spiked_clt::spiked_theory::{
    abjoint_quantities, eigvec_joint, theta_w_cross, theta_w_cross_from, theta_w_single, theta_w_single_from,
};

fn symmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut it = entries.iter().cycle();
    for j in 0..n {
        for i in 0..=j {
            let v = *it.next().unwrap();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn symmetric_strategy(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-10.0f64..10.0, n * (n + 1) / 2).prop_map(move |e| symmetric(n, &e))
    })
}

/// Spike above the bulk for `y`, as an offset beyond `1 + √y`.
fn above(y: f64, offset: f64) -> f64 {
    1.0 + y.sqrt() + offset
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigensolver_bounds(s in symmetric_strategy(60)) {
        let n = s.nrows();
        let e = sym_eigen(&s).unwrap();
        let snorm = s.norm().max(f64::MIN_POSITIVE);
        for (v, l) in e.vectors.column_iter().zip(e.values.iter()) {
            prop_assert!((&s * v - v * *l).norm() <= 1e-8 * snorm);
            let (imax, _) = v.iter().enumerate().fold((0, -1.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
            prop_assert!(v[imax] >= 0.0);
        }
        prop_assert!((e.vectors.transpose() * &e.vectors - DMatrix::<f64>::identity(n, n)).amax() <= 1e-10);
        prop_assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let recon = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
        prop_assert!((recon - &s).amax() <= 1e-8 * snorm);
    }

    #[test]
    fn top_pairs_agree_with_full_spectrum(s in symmetric_strategy(80), k in 1usize..4) {
        let k = k.min(s.nrows());
        let full = sym_eigen(&s).unwrap();
        let top = top_eigenpairs(&s, k).unwrap();
        let snorm = s.norm().max(1.0);
        for i in 0..k {
            prop_assert!((top.values[i] - full.values[i]).abs() <= 1e-8 * snorm);
            let v = top.vectors.column(i);
            prop_assert!((&s * v - v * top.values[i]).norm() <= 1e-8 * snorm);
        }
    }

    #[test]
    fn cross_functionals_are_symmetric(y in 0.05f64..0.95, o1 in 0.05f64..10.0, o2 in 0.05f64..10.0) {
        prop_assume!((o1 - o2).abs() > 1e-3);
        let r = AspectRatio::new(y).unwrap();
        let (a, b) = (SpikeValue::new(above(y, o1), r).unwrap(), SpikeValue::new(above(y, o2), r).unwrap());
        let ab = theta_w_cross(a, b, r).unwrap();
        let ba = theta_w_cross(b, a, r).unwrap();
        prop_assert!((ab.theta - ba.theta).abs() <= 1e-12 * ab.theta.abs());
        prop_assert!((ab.w - ba.w).abs() <= 1e-12 * ab.w.abs());
    }

    #[test]
    fn sign_law_same_and_opposite_sides(y in 0.05f64..0.8, o1 in 0.05f64..10.0, o2 in 0.05f64..10.0, frac in 0.05f64..0.95) {
        let r = AspectRatio::new(y).unwrap();
        let hi = SpikeValue::new(above(y, o1), r).unwrap();
        let hi2 = SpikeValue::new(above(y, o2), r).unwrap();
        let lo = SpikeValue::new(frac * (1.0 - y.sqrt()), r).unwrap();
        prop_assert_eq!(lo.side(), Side::BelowBulk);
        if (o1 - o2).abs() > 1e-3 {
            let tw = theta_w_cross(hi, hi2, r).unwrap();
            prop_assert!(tw.theta - tw.w > 0.0);
        }
        let tw = theta_w_cross(hi, lo, r).unwrap();
        prop_assert!(tw.theta - tw.w < 0.0);
    }

    #[test]
    fn dual_routes_agree(y in 0.05f64..0.95, o1 in 0.05f64..10.0, o2 in 0.05f64..10.0) {
        prop_assume!((o1 - o2).abs() > 1e-3);
        let r = AspectRatio::new(y).unwrap();
        let (a, b) = (SpikeValue::new(above(y, o1), r).unwrap(), SpikeValue::new(above(y, o2), r).unwrap());
        let (ia, ib) = (MpIntegrals::closed(a, r), MpIntegrals::closed(b, r));
        let close = |x: f64, z: f64| (x - z).abs() <= 1e-10 * z.abs().max(1.0);
        let s = theta_w_single(a, r);
        let sr = theta_w_single_from(&ia, r);
        prop_assert!(close(sr.theta, s.theta) && close(sr.w, s.w));
        let c = theta_w_cross(a, b, r).unwrap();
        let cr = theta_w_cross_from(&ia, &ib, r).unwrap();
        prop_assert!(close(cr.theta, c.theta) && close(cr.w, c.w));
    }

    #[test]
    fn eigvec_law_is_a_covariance(y in 0.05f64..0.95, o in 0.05f64..20.0, nu4 in -2.0f64..10.0) {
        let r = AspectRatio::new(y).unwrap();
        let a = SpikeValue::new(above(y, o), r).unwrap();
        let law = eigvec_joint(a, r, nu4).unwrap();
        prop_assert!(law.mean_proj > 0.0 && law.mean_proj < 1.0);
        prop_assert!(law.v11 > 0.0 && law.v22 > 0.0);
        prop_assert!(law.v12 * law.v12 <= law.v11 * law.v22 * (1.0 + 1e-12));
    }

    #[test]
    fn ab_blocks_via_general_formula(y in 0.05f64..0.95, o in 0.05f64..20.0, nu4 in -2.0f64..10.0) {
        let r = AspectRatio::new(y).unwrap();
        let a = SpikeValue::new(above(y, o), r).unwrap();
        let q = abjoint_quantities(a, r, nu4).unwrap();
        let m = q.via_sesquilinear(a.value(), nu4).unwrap().into_matrix();
        let close = |x: f64, z: f64| (x - z).abs() <= 1e-12 * z.abs().max(1.0);
        prop_assert!(close(m[(0, 0)], q.b11) && close(m[(0, 1)], q.b12) && close(m[(1, 1)], q.b22));
        prop_assert!(close(m[(1, 0)], q.b12));
    }

    #[test]
    fn permuting_coordinates_permutes_blocks(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = 3;
        let lx = DMatrix::from_fn(k, 4, |_, _| rng.random_range(-1.0..1.0));
        let ly = DMatrix::from_fn(k, 4, |_, _| rng.random_range(-1.0..1.0));
        let kurt = [3.0, 6.0, 1.8, 1.0];
        let a = symmetric(6, &(0..21).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        let b = symmetric(6, &(0..21).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        let (taa, tbb, tab) = (trace_limits_pair(&a, &a).unwrap(), trace_limits_pair(&b, &b).unwrap(), trace_limits_pair(&a, &b).unwrap());
        let base = covariance_blocks(&taa, &tbb, &tab, &JointMomentTable::from_linear_mixing(&lx, &ly, &kurt).unwrap());
        let perm = [2usize, 0, 1];
        let px = DMatrix::from_fn(k, 4, |i, j| lx[(perm[i], j)]);
        let py = DMatrix::from_fn(k, 4, |i, j| ly[(perm[i], j)]);
        let permuted = covariance_blocks(&taa, &tbb, &tab, &JointMomentTable::from_linear_mixing(&px, &py, &kurt).unwrap());
        for bi in 0..2 {
            for bj in 0..2 {
                let (p, q) = (base.block(bi, bj), permuted.block(bi, bj));
                for i in 0..k {
                    for j in 0..k {
                        prop_assert!((q[(i, j)] - p[(perm[i], perm[j])]).abs() <= 1e-12);
                    }
                }
            }
        }
        prop_assert_eq!(base.matrix(), &base.matrix().transpose());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn large_eigensolver_bounds(n in 200usize..=300, seed in 0u64..100) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<f64> = (0..n * (n + 1) / 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = symmetric(n, &entries);
        let e = sym_eigen(&s).unwrap();
        let snorm = s.norm();
        for (v, l) in e.vectors.column_iter().zip(e.values.iter()) {
            prop_assert!((&s * v - v * *l).norm() <= 1e-8 * snorm);
        }
        prop_assert!((e.vectors.transpose() * &e.vectors - DMatrix::<f64>::identity(n, n)).amax() <= 1e-10);
    }

    #[test]
    fn runs_are_bit_identical_across_worker_counts(seed in any::<u64>(), workers in 2usize..6) {
        let n = 40;
        let a = symmetric(n, &(0..n * (n + 1) / 2).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect::<Vec<_>>());
        let b = DMatrix::<f64>::identity(n, n);
        let exp = Experiment::Sesquilinear(SesquilinearExperiment {
            a,
            b,
            lx: DMatrix::from_element(1, 1, 1.0),
            ly: DMatrix::from_element(1, 1, 1.0),
            latent: vec![LatentDist::Laplace],
        });
        let mut cfg = McConfig::new(150, seed);
        cfg.execution = Execution::Sequential;
        let seq = mc_run(&exp, &cfg).unwrap();
        cfg.execution = Execution::ParallelWith(workers);
        let par = mc_run(&exp, &cfg).unwrap();
        prop_assert_eq!(seq, par);
    }
}
