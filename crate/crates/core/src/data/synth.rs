use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Isotropic unit-variance Gaussian clusters whose centers are pairwise at
/// least `separation` apart. Samples are grouped by class.
pub fn synth_blobs(classes: usize, per_class: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || per_class == 0 || dim == 0 {
        return Err(Error::config("blobs need >= 2 classes, >= 1 sample per class and dim >= 1"));
    }
    if !(separation >= 0.0) {
        return Err(Error::config("blob separation must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radius = separation.max(1.0) * classes as f64;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(classes);
    let mut attempts = 0;
    while centers.len() < classes {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
        let far = centers
            .iter()
            .all(|o| o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= separation);
        if far {
            centers.push(c);
        } else {
            attempts += 1;
            if attempts % 1000 == 0 {
                radius *= 2.0;
            }
        }
    }
    let mut data = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            data.extend(center.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
            labels.push(k);
        }
    }
    let samples = Tensor::new(vec![classes * per_class, dim], data)?;
    Dataset::new(
        samples,
        labels,
        classes,
        Split::Train,
        format!("blobs(classes={classes}, per_class={per_class}, dim={dim}, separation={separation}, seed={seed})"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_separated() {
        let a = synth_blobs(3, 50, 2, 8.0, 1).unwrap();
        assert_eq!(a, synth_blobs(3, 50, 2, 8.0, 1).unwrap());
        assert_ne!(a.samples, synth_blobs(3, 50, 2, 8.0, 2).unwrap().samples);
        let mean = |k: usize| -> Vec<f64> {
            let mut m = vec![0.0; 2];
            for i in (k * 50)..(k * 50 + 50) {
                m[0] += a.samples.row(i)[0] / 50.0;
                m[1] += a.samples.row(i)[1] / 50.0;
            }
            m
        };
        for p in 0..3 {
            for q in p + 1..3 {
                let (u, v) = (mean(p), mean(q));
                assert!(((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt() > 6.0);
            }
        }
    }
}
