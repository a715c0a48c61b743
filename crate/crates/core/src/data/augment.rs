use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn geometry(samples: &Tensor, crop: (usize, usize)) -> Result<(usize, usize, usize, usize)> {
    let s = samples.shape();
    if s.len() != 4 {
        return Err(Error::shape(format!("cropping needs [n, c, h, w] samples, got {s:?}")));
    }
    let (c, h, w) = (s[1], s[2], s[3]);
    if crop.0 == 0 || crop.1 == 0 || crop.0 > h || crop.1 > w {
        return Err(Error::shape(format!("crop {}x{} does not fit {h}x{w}", crop.0, crop.1)));
    }
    Ok((s[0], c, h, w))
}

fn crop_into(
    src: &[f64],
    (c, h, w): (usize, usize, usize),
    (ch, cw): (usize, usize),
    (top, left): (usize, usize),
    mirror: bool,
    out: &mut Vec<f64>,
) {
    for m in 0..c {
        for r in 0..ch {
            let row = &src[m * h * w + (top + r) * w + left..][..cw];
            if mirror {
                out.extend(row.iter().rev());
            } else {
                out.extend_from_slice(row);
            }
        }
    }
}

/// Random crops of size `crop`, each horizontally mirrored with probability
/// ½ when `flip` is set.
pub fn augment(samples: &Tensor, crop: (usize, usize), flip: bool, rng: &mut impl Rng) -> Result<Tensor> {
    let (n, c, h, w) = geometry(samples, crop)?;
    let mut out = Vec::with_capacity(n * c * crop.0 * crop.1);
    for i in 0..n {
        let top = rng.random_range(0..=h - crop.0);
        let left = rng.random_range(0..=w - crop.1);
        let mirror = flip && rng.random_bool(0.5);
        crop_into(samples.row(i), (c, h, w), crop, (top, left), mirror, &mut out);
    }
    Tensor::new(vec![n, c, crop.0, crop.1], out)
}

/// The deterministic center crop used at evaluation time.
pub fn center_crop(samples: &Tensor, crop: (usize, usize)) -> Result<Tensor> {
    let (n, c, h, w) = geometry(samples, crop)?;
    let origin = ((h - crop.0) / 2, (w - crop.1) / 2);
    let mut out = Vec::with_capacity(n * c * crop.0 * crop.1);
    for i in 0..n {
        crop_into(samples.row(i), (c, h, w), crop, origin, false, &mut out);
    }
    Tensor::new(vec![n, c, crop.0, crop.1], out)
}
