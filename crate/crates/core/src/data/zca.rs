//! ZCA whitening: `W = E diag(1/√(λᵢ + ε)) Eᵀ` from the eigendecomposition
//! of the training covariance, applied as `(x − μ) W`. Samples are flattened
//! across channels before fitting.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::{gemm, Layout, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ZcaTransform {
    pub mean: Vec<f64>,
    /// Symmetric `D×D` whitening matrix.
    pub whitening: Tensor,
    pub epsilon: f64,
}

impl ZcaTransform {
    /// Fits on raw `[N, ...]` samples. Covariance uses the `1/N` normalization.
    pub fn fit_samples(samples: &Tensor, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::config(format!("ZCA epsilon must be > 0, got {epsilon}")));
        }
        let n = samples.rows();
        if n < 2 {
            return Err(Error::config("ZCA needs at least two samples"));
        }
        let d = samples.row_len();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(samples.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut centered = samples.data().to_vec();
        for row in centered.chunks_mut(d) {
            for (v, m) in row.iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let mut cov = vec![0.0; d * d];
        gemm(d, n, d, &centered, Layout::Transposed, &centered, Layout::RowMajor, &mut cov, false);
        cov.iter_mut().for_each(|c| *c /= n as f64);

        let eigen = SymmetricEigen::try_new(DMatrix::from_row_slice(d, d, &cov), 1e-12, 10_000)
            .ok_or_else(|| Error::Numeric("covariance eigendecomposition did not converge".into()))?;
        let vectors = &eigen.eigenvectors;
        let scale: Vec<f64> = eigen.eigenvalues.iter().map(|&l| 1.0 / (l.max(0.0) + epsilon).sqrt()).collect();
        let mut w = vec![0.0; d * d];
        for r in 0..d {
            for c in r..d {
                let mut acc = 0.0;
                for (k, s) in scale.iter().enumerate() {
                    acc += vectors[(r, k)] * s * vectors[(c, k)];
                }
                w[r * d + c] = acc;
                w[c * d + r] = acc;
            }
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite whitening matrix".into()));
        }
        Ok(ZcaTransform {
            mean,
            whitening: Tensor::new(vec![d, d], w)?,
            epsilon,
        })
    }

    pub fn apply_samples(&self, samples: &Tensor) -> Result<Tensor> {
        let d = self.mean.len();
        if samples.row_len() != d {
            return Err(Error::shape(format!("ZCA fitted on {d} features, got {}", samples.row_len())));
        }
        let n = samples.rows();
        let mut centered = samples.data().to_vec();
        for row in centered.chunks_mut(d) {
            for (v, m) in row.iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        let mut out = vec![0.0; n * d];
        gemm(n, d, d, &centered, Layout::RowMajor, self.whitening.data(), Layout::RowMajor, &mut out, false);
        Tensor::new(samples.shape().to_vec(), out)
    }
}

/// Fits ZCA on a training split; any other split is refused.
pub fn fit_zca(train: &Dataset, epsilon: f64) -> Result<ZcaTransform> {
    if train.split != Split::Train {
        return Err(Error::config(format!("ZCA must be fitted on the training split, got {}", train.split)));
    }
    ZcaTransform::fit_samples(&train.samples, epsilon)
}

pub fn apply_zca(t: &ZcaTransform, data: &Dataset) -> Result<Dataset> {
    let samples = t.apply_samples(&data.samples)?;
    data.with_samples(samples, format!("zca(eps={}, fitted on train)", t.epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn covariance(x: &Tensor) -> Vec<f64> {
        let (n, d) = (x.rows(), x.row_len());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for k in 0..d {
                mean[k] += x.row(i)[k] / n as f64;
            }
        }
        let mut cov = vec![0.0; d * d];
        for i in 0..n {
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] += (x.row(i)[a] - mean[a]) * (x.row(i)[b] - mean[b]) / n as f64;
                }
            }
        }
        cov
    }

    fn gaussian_fixture() -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        // correlated 4-D Gaussian via a fixed mixing matrix
        let mix = [[2.0, 0.0, 0.0, 0.0], [1.0, 0.5, 0.0, 0.0], [0.3, -0.2, 1.5, 0.0], [0.0, 0.7, 0.1, 0.2]];
        let mut data = Vec::new();
        for _ in 0..500 {
            let z: Vec<f64> = (0..4).map(|_| normal.sample(&mut rng)).collect();
            for row in &mix {
                data.push(row.iter().zip(&z).map(|(m, v)| m * v).sum::<f64>() + 3.0);
            }
        }
        Tensor::new(vec![500, 4], data).unwrap()
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let x = gaussian_fixture();
        let t = ZcaTransform::fit_samples(&x, 1e-8).unwrap();
        let w = t.whitening.data();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(w[r * 4 + c], w[c * 4 + r]);
            }
        }
        let cov = covariance(&t.apply_samples(&x).unwrap());
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((cov[r * 4 + c] - want).abs() < 1e-3, "{r},{c}: {}", cov[r * 4 + c]);
            }
        }
    }

    #[test]
    fn rewhitening_barely_changes_variance() {
        let x = gaussian_fixture();
        let once = ZcaTransform::fit_samples(&x, 1e-8).unwrap().apply_samples(&x).unwrap();
        let twice = ZcaTransform::fit_samples(&once, 1e-8).unwrap().apply_samples(&once).unwrap();
        let (c1, c2) = (covariance(&once), covariance(&twice));
        for k in 0..4 {
            assert!(((c2[k * 5] - c1[k * 5]) / c1[k * 5]).abs() < 0.05);
        }
    }

    #[test]
    fn huge_epsilon_is_uniform_scaling() {
        let x = gaussian_fixture();
        let eps = 1e10;
        let t = ZcaTransform::fit_samples(&x, eps).unwrap();
        let y = t.apply_samples(&x).unwrap();
        for i in 0..10 {
            for k in 0..4 {
                let expected = (x.row(i)[k] - t.mean[k]) / eps.sqrt();
                assert!((y.row(i)[k] - expected).abs() < 1e-9 * expected.abs().max(1e-5));
            }
        }
    }

    #[test]
    fn duplicated_samples_stay_finite() {
        let x = Tensor::from_fn(&[5, 3], |i| (i % 3) as f64);
        let t = ZcaTransform::fit_samples(&x, 0.01).unwrap();
        assert!(t.apply_samples(&x).unwrap().is_finite());
    }

    #[test]
    fn refuses_test_split() {
        let d = Dataset::new(gaussian_fixture(), vec![0; 500], 2, Split::Test, "g").unwrap();
        assert!(fit_zca(&d, 0.01).is_err());
        let train = Dataset { split: Split::Train, ..d.clone() };
        let t = fit_zca(&train, 0.01).unwrap();
        let out = apply_zca(&t, &d).unwrap();
        assert_eq!(out.provenance.last().unwrap(), "zca(eps=0.01, fitted on train)");
    }
}
