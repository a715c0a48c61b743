//! CIFAR-10 binary batches: records of one label byte followed by 3072
//! pixel bytes (1024 red, 1024 green, 1024 blue, each 32×32 row-major).

use std::fs;
use std::path::Path;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CIFAR_RECORD_LEN: usize = 3073;
const SIDE: usize = 32;

/// Decodes records into `[n, 3, 32, 32]` pixels in `[0, 1]` and labels.
pub fn parse_cifar10(bytes: &[u8]) -> Result<(Vec<f64>, Vec<usize>)> {
    if bytes.is_empty() {
        return Err(Error::format(0, "empty CIFAR-10 batch"));
    }
    if bytes.len() % CIFAR_RECORD_LEN != 0 {
        let whole = bytes.len() / CIFAR_RECORD_LEN * CIFAR_RECORD_LEN;
        return Err(Error::format(
            whole as u64,
            format!("size {} is not a multiple of {CIFAR_RECORD_LEN}", bytes.len()),
        ));
    }
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD_LEN - 1));
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        if rec[0] >= 10 {
            return Err(Error::format((i * CIFAR_RECORD_LEN) as u64, format!("label {} out of range", rec[0])));
        }
        labels.push(rec[0] as usize);
        pixels.extend(rec[1..].iter().map(|&p| p as f64 / 255.0));
    }
    Ok((pixels, labels))
}

/// Concatenates the given batch files in order.
pub fn load_cifar10(paths: &[&Path], split: Split) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::config("no CIFAR-10 batch files given"));
    }
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let (p, l) = parse_cifar10(&fs::read(path)?)?;
        pixels.extend(p);
        labels.extend(l);
    }
    let n = labels.len();
    let samples = Tensor::new(vec![n, 3, SIDE, SIDE], pixels)?;
    let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    Dataset::new(samples, labels, 10, split, format!("cifar10({})", names.join(",")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_checks() {
        assert!(matches!(parse_cifar10(&[]), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(parse_cifar10(&vec![0u8; CIFAR_RECORD_LEN + 5]), Err(Error::Format { offset: 3073, .. })));
        let mut rec = vec![0u8; CIFAR_RECORD_LEN];
        rec[0] = 10;
        assert!(parse_cifar10(&rec).is_err());
    }
}
