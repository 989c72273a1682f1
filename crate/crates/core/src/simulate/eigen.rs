//! Symmetric eigensolvers.
//!
//! [`sym_eigen`] is a cyclic Jacobi solver for the full spectrum. The
//! Monte Carlo loop only needs the few outlier eigenpairs, which
//! [`top_eigenpairs`] extracts with a fully reorthogonalized Lanczos iteration,
//! falling back to Jacobi if the Ritz pairs do not meet the residual bound.
//!
//! Both return eigenvalues in descending order, and every eigenvector is signed
//! so that its entry of largest magnitude is positive.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Stop once the off-diagonal Frobenius norm drops below this times `‖S‖_F`.
pub const JACOBI_OFF_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 30;
/// Largest tolerated asymmetry relative to the largest entry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Residual bound `‖S v - l v‖ ≤ RESIDUAL_TOLERANCE · ‖S‖_F` for accepted pairs.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

const LANCZOS_RITZ_TOLERANCE: f64 = 1e-11;
const LANCZOS_MAX_STEPS: usize = 300;

/// Eigenvalues (descending) with eigenvectors in matching columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_symmetric(s: &DMatrix<f64>) -> Result<()> {
    if !s.is_square() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", s.nrows(), s.ncols())));
    }
    let n = s.nrows();
    let scale = s.amax().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Symmetry { max_asymmetry: worst });
    }
    Ok(())
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn sorted_descending(values: &[f64], vectors: &DMatrix<f64>, keep: usize) -> SymEigen {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order.truncate(keep);
    let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| values[i]));
    let mut vecs = DMatrix::zeros(vectors.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &vectors.column(src));
    }
    fix_signs(&mut vecs);
    SymEigen {
        values: vals,
        vectors: vecs,
    }
}

/// Full eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eigen(s: &DMatrix<f64>) -> Result<SymEigen> {
    check_symmetric(s)?;
    let n = s.nrows();
    // work on the symmetrized copy so rounding asymmetry never accumulates
    let mut a = DMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = JACOBI_OFF_TOLERANCE * a.norm();

    let mut converged = false;
    for _sweep in 0..=JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_p = c * akp - sn * akq;
                    let new_q = sn * akp + c * akq;
                    a[(k, p)] = new_p;
                    a[(p, k)] = new_p;
                    a[(k, q)] = new_q;
                    a[(q, k)] = new_q;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Convergence {
            what: "Jacobi eigensolver",
            iterations: JACOBI_MAX_SWEEPS,
        });
    }
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    Ok(sorted_descending(&diag, &v, n))
}

fn lanczos_start(n: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a4c_2057_5eed);
    let v = DVector::from_iterator(n, (0..n).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
    let norm = v.norm();
    v / norm
}

fn residuals_ok(s: &DMatrix<f64>, eig: &SymEigen, bound: f64) -> bool {
    eig.vectors.column_iter().zip(eig.values.iter()).all(|(v, &l)| {
        let r = s * v - v * l;
        r.norm() <= bound
    })
}

/// The `k` largest eigenpairs.
pub fn top_eigenpairs(s: &DMatrix<f64>, k: usize) -> Result<SymEigen> {
    check_symmetric(s)?;
    let n = s.nrows();
    if k == 0 {
        return Ok(SymEigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(n, 0),
        });
    }
    if k > n {
        return Err(Error::Dimension(format!("asked for {k} eigenpairs of a {n}x{n} matrix")));
    }
    if n <= 32 || 2 * k >= n {
        let full = sym_eigen(s)?;
        return Ok(truncate(full, k));
    }
    match lanczos(s, k) {
        Some(eig) => Ok(eig),
        None => {
            log::debug!("Lanczos did not meet the residual bound; falling back to Jacobi");
            Ok(truncate(sym_eigen(s)?, k))
        }
    }
}

fn truncate(full: SymEigen, k: usize) -> SymEigen {
    SymEigen {
        values: full.values.rows(0, k).into_owned(),
        vectors: full.vectors.columns(0, k).into_owned(),
    }
}

fn lanczos(s: &DMatrix<f64>, k: usize) -> Option<SymEigen> {
    let n = s.nrows();
    let snorm = s.norm();
    if snorm == 0.0 {
        return None;
    }
    let max_steps = n.min(LANCZOS_MAX_STEPS);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_steps);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_steps);
    let mut beta: Vec<f64> = Vec::with_capacity(max_steps);
    let mut q = lanczos_start(n);
    let mut w = DVector::zeros(n);

    for j in 0..max_steps {
        w.gemv(1.0, s, &q, 0.0);
        let a = q.dot(&w);
        w.axpy(-a, &q, 1.0);
        if j > 0 {
            w.axpy(-beta[j - 1], &basis[j - 1], 1.0);
        }
        basis.push(q.clone());
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let b = w.norm();
        let m = j + 1;
        let exhausted = b <= 1e-14 * snorm || m == max_steps;
        if m >= k && (m % 5 == 0 || exhausted) {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c || c + 1 == r {
                    beta[r.min(c)]
                } else {
                    0.0
                }
            });
            let ritz = sym_eigen(&t).ok()?;
            let ready = (0..k).all(|i| b * ritz.vectors[(m - 1, i)].abs() <= LANCZOS_RITZ_TOLERANCE * snorm);
            if ready || exhausted {
                let mut vecs = DMatrix::zeros(n, k);
                for i in 0..k {
                    let mut y = DVector::zeros(n);
                    for (r, qb) in basis.iter().enumerate() {
                        y.axpy(ritz.vectors[(r, i)], qb, 1.0);
                    }
                    let norm = y.norm();
                    vecs.set_column(i, &(y / norm));
                }
                let values: Vec<f64> = (0..k).map(|i| ritz.values[i]).collect();
                let eig = sorted_descending(&values, &vecs, k);
                return residuals_ok(s, &eig, RESIDUAL_TOLERANCE * snorm).then_some(eig);
            }
        }
        if exhausted {
            return None;
        }
        beta.push(b);
        q = &w / b;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        (&m + m.transpose()) * 0.5
    }

    #[test]
    fn diagonal_input() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 1.0]));
        let e = sym_eigen(&s).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 2.0, 1.0]);
        assert_eq!(e.vectors.column(0).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(e.vectors.column(1).as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(e.vectors.column(2).as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn two_by_two() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = sym_eigen(&s).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors[(0, 0)], r, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[(1, 0)], r, epsilon = 1e-14);
        // ties on magnitude resolve to the first entry being positive
        assert_abs_diff_eq!(e.vectors[(0, 1)], r, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[(1, 1)], -r, epsilon = 1e-14);
    }

    #[test]
    fn reconstruction_50() {
        let s = random_symmetric(50, 3);
        let e = sym_eigen(&s).unwrap();
        let recon = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
        assert!((recon - &s).amax() < 1e-8);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut s = random_symmetric(6, 1);
        s[(0, 3)] += 1e-3;
        assert!(matches!(sym_eigen(&s), Err(Error::Symmetry { .. })));
        assert!(matches!(top_eigenpairs(&s, 2), Err(Error::Symmetry { .. })));
    }

    #[test]
    fn empty_and_scalar() {
        let e = sym_eigen(&DMatrix::zeros(0, 0)).unwrap();
        assert!(e.is_empty());
        let e = sym_eigen(&DMatrix::from_element(1, 1, -4.0)).unwrap();
        assert_eq!(e.values[0], -4.0);
        assert_eq!(e.vectors[(0, 0)], 1.0);
    }

    #[test]
    fn lanczos_agrees_with_jacobi_on_spiked_matrix() {
        let n = 120;
        let mut s = random_symmetric(n, 8) * 0.1;
        s[(0, 0)] += 9.0;
        s[(1, 1)] += 4.0;
        let full = sym_eigen(&s).unwrap();
        let top = top_eigenpairs(&s, 2).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(top.values[i], full.values[i], epsilon = 1e-10);
            let dot = top.vectors.column(i).dot(&full.vectors.column(i));
            assert_abs_diff_eq!(dot, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn top_k_bounds() {
        let s = random_symmetric(40, 2);
        assert!(top_eigenpairs(&s, 41).is_err());
        assert_eq!(top_eigenpairs(&s, 0).unwrap().len(), 0);
    }
}
