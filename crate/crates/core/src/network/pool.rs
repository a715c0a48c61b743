use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Non-overlapping max pooling over the trailing two axes of `map`.
///
/// Returns the pooled tensor and, for every pooled cell, the flat index into
/// `map` of the maximum that produced it. Ties go to the first maximum in
/// row-major scan order of the window.
pub fn max_pool_forward(map: &Tensor, window: usize) -> Result<(Tensor, Vec<usize>)> {
    let shape = map.shape();
    if shape.len() < 2 || window == 0 {
        return Err(Error::shape(format!("max pool needs a map of rank >= 2, got {shape:?}")));
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if h % window != 0 || w % window != 0 {
        return Err(Error::shape(format!(
            "max pool: {h}x{w} map not divisible by window {window}"
        )));
    }
    let (oh, ow) = (h / window, w / window);
    let planes = map.len() / (h * w);
    let src = map.data();
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    for plane in 0..planes {
        let base = plane * h * w;
        for p in 0..oh {
            for q in 0..ow {
                let mut best = base + p * window * w + q * window;
                for u in 0..window {
                    for v in 0..window {
                        let idx = base + (p * window + u) * w + q * window + v;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                }
                out.push(src[best]);
                argmax.push(best);
            }
        }
    }
    let mut out_shape = shape.to_vec();
    let r = out_shape.len();
    out_shape[r - 2] = oh;
    out_shape[r - 1] = ow;
    Ok((Tensor::new(out_shape, out)?, argmax))
}

/// Scatters `error` (pooled shape) back to the argmax positions of an input
/// of `input_shape`; every other position receives zero.
pub fn max_pool_backward(error: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if error.len() != argmax.len() {
        return Err(Error::shape(format!(
            "max pool backward: {} errors for {} argmax entries",
            error.len(),
            argmax.len()
        )));
    }
    let mut out = Tensor::zeros(input_shape);
    let dst = out.data_mut();
    for (&idx, &e) in argmax.iter().zip(error.data()) {
        if idx >= dst.len() {
            return Err(Error::shape(format!("argmax index {idx} out of range")));
        }
        dst[idx] += e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn picks_the_maximum() {
        let m = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (p, arg) = max_pool_forward(&m, 2).unwrap();
        assert_eq!(p.shape(), &[1, 1]);
        assert_eq!(p.data(), &[4.0]);
        assert_eq!(arg, vec![3]);
    }

    #[test]
    fn ties_go_to_first_scan_position() {
        let m = Tensor::filled(&[4, 4], 7.0);
        let (p, arg) = max_pool_forward(&m, 2).unwrap();
        assert_eq!(p.data(), &[7.0; 4]);
        assert_eq!(arg, vec![0, 2, 8, 10]);
    }

    #[test]
    fn indivisible_extent_is_an_error() {
        assert!(max_pool_forward(&Tensor::zeros(&[3, 4]), 2).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::from_fn(&[2, 4, 6], |_| rng.random_range(-1.0..1.0));
        let weights = Tensor::from_fn(&[2, 2, 3], |_| rng.random_range(-1.0..1.0));
        // f(x) = <weights, pool(x)>
        let f = |x: &Tensor| max_pool_forward(x, 2).unwrap().0.dot(&weights).unwrap();
        let (_, arg) = max_pool_forward(&x, 2).unwrap();
        let grad = max_pool_backward(&weights, &arg, x.shape()).unwrap();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((fd - grad.data()[i]).abs() < 1e-8, "{i}: {fd} vs {}", grad.data()[i]);
        }
    }
}
