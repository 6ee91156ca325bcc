//! Regularized canonical correlation between two views, its gradient with
//! respect to both views, and the linear CCA projection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center_columns, column_means, inv_sqrt_sym};

/// Intermediate quantities of one correlation evaluation (rows are samples).
#[derive(Debug, Clone)]
pub struct CorrState {
    pub h1_centered: DMatrix<f64>,
    pub h2_centered: DMatrix<f64>,
    pub sigma11: DMatrix<f64>,
    pub sigma22: DMatrix<f64>,
    pub sigma12: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    s11_inv_sqrt: DMatrix<f64>,
    s22_inv_sqrt: DMatrix<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

/// Correlation objective and its gradients with respect to `H1` and `H2`.
#[derive(Debug, Clone)]
pub struct CorrOutput {
    pub corr: f64,
    pub grad1: DMatrix<f64>,
    pub grad2: DMatrix<f64>,
    pub state: CorrState,
}

fn covariances(h1: &DMatrix<f64>, h2: &DMatrix<f64>, r1: f64, r2: f64) -> Result<CorrState> {
    let m = h1.nrows();
    if h2.nrows() != m {
        return Err(Error::param(format!("views have {} and {} samples", m, h2.nrows())));
    }
    let (k1, k2) = (h1.ncols(), h2.ncols());
    if m <= k1.max(k2) {
        return Err(Error::param(format!("batch of {m} samples must exceed the output dimension {}", k1.max(k2))));
    }
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::param(format!("regularizers must be positive, got {r1}, {r2}")));
    }
    if h1.iter().chain(h2.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite value in a view"));
    }
    let scale = 1.0 / (m as f64 - 1.0);
    let h1c = center_columns(h1);
    let h2c = center_columns(h2);
    let sigma11 = h1c.tr_mul(&h1c) * scale + DMatrix::identity(k1, k1) * r1;
    let sigma22 = h2c.tr_mul(&h2c) * scale + DMatrix::identity(k2, k2) * r2;
    let sigma12 = h1c.tr_mul(&h2c) * scale;
    let s11 = inv_sqrt_sym(&sigma11)?;
    let s22 = inv_sqrt_sym(&sigma22)?;
    let t = &s11 * &sigma12 * &s22;
    let svd = t.clone().try_svd(true, true, 1e-15, 10_000).ok_or_else(|| Error::numerical("SVD of T did not converge"))?;
    let u = svd.u.ok_or_else(|| Error::numerical("SVD returned no U"))?;
    let v = svd.v_t.ok_or_else(|| Error::numerical("SVD returned no V"))?.transpose();
    Ok(CorrState {
        h1_centered: h1c,
        h2_centered: h2c,
        sigma11,
        sigma22,
        sigma12,
        t,
        singular_values: svd.singular_values.iter().copied().collect(),
        s11_inv_sqrt: s11,
        s22_inv_sqrt: s22,
        u,
        v,
    })
}

/// `corr = ‖Σ11^{-1/2} Σ12 Σ22^{-1/2}‖_tr` with `Σii` regularized by `ri·I`,
/// plus `∂corr/∂H1` and `∂corr/∂H2` (rows are samples).
pub fn cca_corr(h1: &DMatrix<f64>, h2: &DMatrix<f64>, r1: f64, r2: f64) -> Result<CorrOutput> {
    let st = covariances(h1, h2, r1, r2)?;
    let corr: f64 = st.singular_values.iter().sum();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(st.singular_values.clone()));

    // ∂corr/∂Σ12, ∂corr/∂Σ11, ∂corr/∂Σ22.
    let g12 = &st.s11_inv_sqrt * &st.u * st.v.transpose() * &st.s22_inv_sqrt;
    let g11 = (&st.s11_inv_sqrt * &st.u * &d * st.u.transpose() * &st.s11_inv_sqrt) * -0.5;
    let g22 = (&st.s22_inv_sqrt * &st.v * &d * st.v.transpose() * &st.s22_inv_sqrt) * -0.5;

    let scale = 1.0 / (h1.nrows() as f64 - 1.0);
    let grad1 = (&st.h1_centered * &g11 * 2.0 + &st.h2_centered * g12.transpose()) * scale;
    let grad2 = (&st.h2_centered * &g22 * 2.0 + &st.h1_centered * &g12) * scale;
    Ok(CorrOutput { corr, grad1, grad2, state: st })
}

/// Linear CCA fit on two views: centered inputs times `A` / `B` give canonical variates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaProjection {
    pub mean1: Vec<f64>,
    pub mean2: Vec<f64>,
    /// Row-major `k1 × r`.
    pub a: Vec<f64>,
    /// Row-major `k2 × r`.
    pub b: Vec<f64>,
    pub k1: usize,
    pub k2: usize,
    pub rank: usize,
    pub correlations: Vec<f64>,
}

impl CcaProjection {
    pub fn fit(h1: &DMatrix<f64>, h2: &DMatrix<f64>, r1: f64, r2: f64) -> Result<Self> {
        let st = covariances(h1, h2, r1, r2)?;
        let rank = st.singular_values.len();
        let a = &st.s11_inv_sqrt * st.u.columns(0, rank);
        let b = &st.s22_inv_sqrt * st.v.columns(0, rank);
        Ok(Self {
            mean1: column_means(h1),
            mean2: column_means(h2),
            a: a.transpose().iter().copied().collect(),
            b: b.transpose().iter().copied().collect(),
            k1: h1.ncols(),
            k2: h2.ncols(),
            rank,
            correlations: st.singular_values,
        })
    }

    fn apply(x: &DMatrix<f64>, mean: &[f64], w: &[f64], k: usize, rank: usize) -> Result<DMatrix<f64>> {
        if x.ncols() != k {
            return Err(Error::param(format!("view has {} columns, projection expects {k}", x.ncols())));
        }
        let mut c = x.clone();
        for (j, mut col) in c.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        Ok(c * DMatrix::from_row_slice(k, rank, w))
    }

    pub fn project1(&self, h1: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Self::apply(h1, &self.mean1, &self.a, self.k1, self.rank)
    }

    pub fn project2(&self, h2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Self::apply(h2, &self.mean2, &self.b, self.k2, self.rank)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn self_correlation_saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = gaussian(&mut rng, 200, 4);
        let out = cca_corr(&h, &h, 1e-12, 1e-12).unwrap();
        assert!((out.corr - 4.0).abs() < 1e-6, "{}", out.corr);
    }

    #[test]
    fn independent_views_are_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = cca_corr(&gaussian(&mut rng, 10_000, 2), &gaussian(&mut rng, 10_000, 2), 1e-4, 1e-4).unwrap();
        assert!(out.corr < 0.1, "{}", out.corr);
    }

    #[test]
    fn symmetric_in_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(&mut rng, 50, 3);
        let b = &a * gaussian(&mut rng, 3, 3) + gaussian(&mut rng, 50, 3);
        let ab = cca_corr(&a, &b, 1e-3, 1e-2).unwrap().corr;
        let ba = cca_corr(&b, &a, 1e-2, 1e-3).unwrap().corr;
        assert!((ab - ba).abs() < 1e-10);
    }

    #[test]
    fn too_small_batch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian(&mut rng, 3, 3);
        assert!(matches!(cca_corr(&a, &a, 1e-4, 1e-4), Err(Error::Parameter(_))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h1 = gaussian(&mut rng, 20, 3);
        let h2 = &h1 * gaussian(&mut rng, 3, 3) * 0.5 + gaussian(&mut rng, 20, 3);
        let out = cca_corr(&h1, &h2, 1e-3, 1e-3).unwrap();
        let eps = 1e-5;
        for (which, analytic) in [(0, &out.grad1), (1, &out.grad2)] {
            for i in 0..20 {
                for j in 0..3 {
                    let bump = |delta: f64| {
                        let (mut a, mut b) = (h1.clone(), h2.clone());
                        if which == 0 {
                            a[(i, j)] += delta;
                        } else {
                            b[(i, j)] += delta;
                        }
                        cca_corr(&a, &b, 1e-3, 1e-3).unwrap().corr
                    };
                    let fd = (bump(eps) - bump(-eps)) / (2.0 * eps);
                    let an = analytic[(i, j)];
                    assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3), "{which} ({i},{j}): fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn projection_whitens_and_correlates() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = gaussian(&mut rng, 500, 2);
        let h1 = DMatrix::from_fn(500, 3, |i, j| if j < 2 { z[(i, j)] } else { 0.0 }) + gaussian(&mut rng, 500, 3) * 0.3;
        let h2 = &z * gaussian(&mut rng, 2, 4) + gaussian(&mut rng, 500, 4) * 0.3;
        let p = CcaProjection::fit(&h1, &h2, 1e-8, 1e-8).unwrap();
        let a = p.project1(&h1).unwrap();
        let b = p.project2(&h2).unwrap();
        let cross = a.tr_mul(&b) / 499.0;
        let auto = a.tr_mul(&a) / 499.0;
        for k in 0..p.rank {
            assert!((cross[(k, k)] - p.correlations[k]).abs() < 1e-6);
            assert!((auto[(k, k)] - 1.0).abs() < 1e-6);
        }
    }
}
