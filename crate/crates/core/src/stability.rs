//! Pseudo-Jacobian of the VI map and the negative-definiteness certificate.
//!
//! `H(x)` is the `NK x NK` matrix with entries `h^{nk}_{ml} = 1/2 dF_nk/dx_ml`,
//! laid out in `N x N` blocks of `K x K`. If `H + H^T` is negative definite
//! then `F` is strictly monotone there. The certificate is evaluated at sample
//! points only; it is evidence, not a global proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MarketError, Result};
use crate::market::{AllocationMatrix, MarketInstance};
use crate::vi::vi_map;

/// `lambda_max(H + H^T)` must be below `-CERT_MARGIN` to certify.
pub const CERT_MARGIN: f64 = 1e-10;

pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Off-diagonal threshold of the Jacobi iteration, relative to `max(1, max |a_ij|)`.
pub const JACOBI_TOL: f64 = 1e-12;

pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoJacobian {
    dim: usize,
    entries: Vec<f64>,
    evaluation_point: Option<AllocationMatrix>,
}

impl PseudoJacobian {
    /// Wraps an explicit row-major square matrix.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim || dim == 0 {
            return Err(MarketError::Domain(format!("{} entries do not form a {dim}x{dim} matrix", entries.len())));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(MarketError::Domain("pseudo-Jacobian entries must be finite".into()));
        }
        Ok(Self {
            dim,
            entries,
            evaluation_point: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn evaluation_point(&self) -> Option<&AllocationMatrix> {
        self.evaluation_point.as_ref()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    /// `H + H^T`, exactly symmetric by construction.
    pub fn symmetrized(&self) -> Vec<f64> {
        let d = self.dim;
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                s[i * d + j] = self.entries[i * d + j] + self.entries[j * d + i];
            }
        }
        s
    }
}

/// Central-difference pseudo-Jacobian at an interior point.
///
/// Row `n*K + k`, column `m*K + l` holds `1/2 (F_nk(x + h e_ml) - F_nk(x - h e_ml)) / (2h)`.
pub fn assemble_h(market: &MarketInstance, x: &AllocationMatrix, fd_step: f64) -> Result<PseudoJacobian> {
    if !(fd_step > 0.0) {
        return Err(MarketError::Domain("finite-difference step must be positive".into()));
    }
    let min_entry = x.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    if min_entry < 10.0 * fd_step {
        return Err(MarketError::Domain(format!(
            "smallest allocation {min_entry:e} is too close to the boundary for step {fd_step:e}"
        )));
    }
    let dim = x.as_slice().len();
    let mut entries = vec![0.0; dim * dim];
    for col in 0..dim {
        let mut up = x.clone();
        let mut down = x.clone();
        up.as_mut_slice()[col] += fd_step;
        down.as_mut_slice()[col] -= fd_step;
        let f_up = vi_map(market, &up)?;
        let f_down = vi_map(market, &down)?;
        for (row, (a, b)) in f_up.as_slice().iter().zip(f_down.as_slice()).enumerate() {
            entries[row * dim + col] = 0.5 * (a - b) / (2.0 * fd_step);
        }
    }
    let mut h = PseudoJacobian::from_entries(dim, entries)?;
    h.evaluation_point = Some(x.clone());
    Ok(h)
}

/// Eigenvalues of a symmetric matrix (row-major) by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(matrix: &[f64], dim: usize) -> Result<Vec<f64>> {
    assert_eq!(matrix.len(), dim * dim, "matrix is not {dim}x{dim}");
    let mut a = matrix.to_vec();
    let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = JACOBI_TOL * scale;
    let off_max = |a: &[f64]| {
        let mut m: f64 = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                m = m.max(a[i * dim + j].abs());
            }
        }
        m
    };

    let mut sweeps = 0;
    while off_max(&a) >= tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(MarketError::EigensolverStalled {
                sweeps,
                off_diagonal: off_max(&a),
            });
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * dim + p];
                let aqq = a[q * dim + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * dim + p];
                    let akq = a[k * dim + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * dim + p] = new_kp;
                    a[p * dim + k] = new_kp;
                    a[k * dim + q] = new_kq;
                    a[q * dim + k] = new_kq;
                }
                a[p * dim + p] = app - t * apq;
                a[q * dim + q] = aqq + t * apq;
                a[p * dim + q] = 0.0;
                a[q * dim + p] = 0.0;
            }
        }
        sweeps += 1;
    }
    let mut eig: Vec<f64> = (0..dim).map(|i| a[i * dim + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    StrictlyMonotoneAtPoint,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCertificate {
    /// Largest eigenvalue of `H + H^T`, worst case over samples.
    pub lambda_max: f64,
    pub verdict: Verdict,
    pub sample_points: usize,
    /// Per-sample `lambda_max`, in evaluation order.
    pub sample_lambdas: Vec<f64>,
}

fn verdict_for(lambda_max: f64) -> Verdict {
    if lambda_max < -CERT_MARGIN {
        Verdict::StrictlyMonotoneAtPoint
    } else {
        Verdict::Inconclusive
    }
}

pub fn certify_monotone(h: &PseudoJacobian) -> Result<MonotonicityCertificate> {
    let eig = symmetric_eigenvalues(&h.symmetrized(), h.dim())?;
    let lambda_max = *eig.last().expect("dim >= 1");
    Ok(MonotonicityCertificate {
        lambda_max,
        verdict: verdict_for(lambda_max),
        sample_points: 1,
        sample_lambdas: vec![lambda_max],
    })
}

/// Certificate over explicit points; the verdict passes only if every point passes.
pub fn certify_points(market: &MarketInstance, points: &[AllocationMatrix], fd_step: f64) -> Result<MonotonicityCertificate> {
    if points.is_empty() {
        return Err(MarketError::Domain("certificate needs at least one sample point".into()));
    }
    let sample_lambdas = points
        .iter()
        .map(|x| Ok(certify_monotone(&assemble_h(market, x, fd_step)?)?.lambda_max))
        .collect::<Result<Vec<f64>>>()?;
    let lambda_max = sample_lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MonotonicityCertificate {
        lambda_max,
        verdict: verdict_for(lambda_max),
        sample_points: points.len(),
        sample_lambdas,
    })
}

/// Random strictly interior feasible allocation.
///
/// Each column is an exponential-weight draw over the buyers plus a slack
/// slot, mixed 90/10 with the uniform split, so every entry is at least
/// `0.1 / (N + 1)` and every column sums to less than one.
pub fn sample_interior_allocation(rng: &mut impl Rng, n_buyers: usize, n_goods: usize) -> AllocationMatrix {
    let slots = n_buyers + 1;
    let mut x = AllocationMatrix::zeros(n_buyers, n_goods);
    for k in 0..n_goods {
        let w: Vec<f64> = (0..slots).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = w.iter().sum();
        for n in 0..n_buyers {
            x[(n, k)] = 0.9 * w[n] / total + 0.1 / slots as f64;
        }
    }
    x
}

/// Evaluates the certificate at `n_samples` seeded interior points.
pub fn sample_certificate(market: &MarketInstance, n_samples: usize, seed: u64) -> Result<MonotonicityCertificate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<AllocationMatrix> = (0..n_samples)
        .map(|_| sample_interior_allocation(&mut rng, market.n_buyers(), market.n_goods()))
        .collect();
    certify_points(market, &points, DEFAULT_FD_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{random_instance, UtilityFamily, UtilityModel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn negative_identity_is_certified() {
        let mut e = vec![0.0; 16];
        for i in 0..4 {
            e[i * 4 + i] = -1.0;
        }
        let cert = certify_monotone(&PseudoJacobian::from_entries(4, e).unwrap()).unwrap();
        assert_eq!(cert.lambda_max, -2.0);
        assert_eq!(cert.verdict, Verdict::StrictlyMonotoneAtPoint);
    }

    #[test]
    fn antisymmetric_matrix_is_inconclusive() {
        let h = PseudoJacobian::from_entries(2, vec![0.0, 1.0, -1.0, 0.0]).unwrap();
        let cert = certify_monotone(&h).unwrap();
        assert_eq!(cert.lambda_max, 0.0);
        assert_eq!(cert.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn single_cobb_douglas_buyer() {
        // F_k = a_k / x_k, so H = 1/2 diag(-a_k / x_k^2) = diag(-1, -1).
        let market = MarketInstance::new(vec![1.0], vec![UtilityModel::CobbDouglas { a: vec![0.5, 0.5] }]).unwrap();
        let x = AllocationMatrix::filled(1, 2, 0.5);
        let h = assemble_h(&market, &x, DEFAULT_FD_STEP).unwrap();
        assert_abs_diff_eq!(h.get(0, 0), -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h.get(1, 1), -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h.get(0, 1), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h.get(1, 0), 0.0, epsilon = 1e-6);
        let cert = certify_monotone(&h).unwrap();
        assert_abs_diff_eq!(cert.lambda_max, -2.0, epsilon = 1e-5);
        assert_eq!(cert.verdict, Verdict::StrictlyMonotoneAtPoint);
        assert_eq!(assemble_h(&market, &x, DEFAULT_FD_STEP).unwrap(), h);
    }

    #[test]
    fn single_linear_buyer_is_symmetric() {
        // F_k = B v_k / <v, x>, dF_k/dx_l = -B v_k v_l / <v, x>^2.
        let v = [2.0, 3.0];
        let market = MarketInstance::new(vec![1.0], vec![UtilityModel::Linear { v: v.to_vec() }]).unwrap();
        let x = AllocationMatrix::allocation(vec![vec![0.4, 0.7]]).unwrap();
        let h = assemble_h(&market, &x, DEFAULT_FD_STEP).unwrap();
        let vx = v[0] * 0.4 + v[1] * 0.7;
        for k in 0..2 {
            for l in 0..2 {
                assert_abs_diff_eq!(h.get(k, l), -0.5 * v[k] * v[l] / (vx * vx), epsilon = 1e-7);
                assert_abs_diff_eq!(h.get(k, l), h.get(l, k), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn boundary_points_are_rejected() {
        let market = random_instance(1, 2, 2, UtilityFamily::Tullock);
        let x = AllocationMatrix::allocation(vec![vec![1e-6, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(assemble_h(&market, &x, 1e-6), Err(MarketError::Domain(_))));
    }

    #[test]
    fn one_sample_equals_pointwise_certificate() {
        let market = random_instance(9, 3, 2, UtilityFamily::Tullock);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = sample_interior_allocation(&mut rng, 3, 2);
        let sampled = sample_certificate(&market, 1, 21).unwrap();
        let direct = certify_monotone(&assemble_h(&market, &x, DEFAULT_FD_STEP).unwrap()).unwrap();
        assert_eq!(sampled.lambda_max, direct.lambda_max);
        assert_eq!(sampled, sample_certificate(&market, 1, 21).unwrap());
    }

    #[test]
    fn interior_samples_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = sample_interior_allocation(&mut rng, 5, 3);
            assert!(x.is_feasible(0.0));
            assert!(x.as_slice().iter().all(|&v| v >= 0.1 / 6.0 - 1e-15));
        }
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        assert!(PseudoJacobian::from_entries(2, vec![1.0, f64::NAN, 0.0, 1.0]).is_err());
        assert!(PseudoJacobian::from_entries(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn jacobi_on_a_known_spectrum() {
        // [[2, 1, 0], [1, 2, 1], [0, 1, 2]] has eigenvalues 2 - sqrt 2, 2, 2 + sqrt 2.
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0];
        let eig = symmetric_eigenvalues(&a, 3).unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(eig[0], 2.0 - r2, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[2], 2.0 + r2, epsilon = 1e-12);
    }
}
