use std::path::{Path, PathBuf};

use mrnet::data::{apply_zca, fit_zca, load_cifar10, load_idx, synth_blobs, Dataset, Split};

use crate::config::{DataConfig, DatasetKind};
use crate::error::CliError;

fn existing(dir: &Path, stem: &str) -> Result<PathBuf, CliError> {
    [dir.join(format!("{stem}.gz")), dir.join(stem)]
        .into_iter()
        .find(|p| p.is_file())
        .ok_or_else(|| CliError::data(format!("missing {stem}[.gz] in {}", dir.display())))
}

fn data_dir(cfg: &DataConfig) -> Result<&Path, CliError> {
    let dir = cfg
        .path
        .as_deref()
        .ok_or_else(|| CliError::config("[data] path is required for this dataset"))?;
    if !dir.is_dir() {
        return Err(CliError::data(format!("data directory {} not found", dir.display())));
    }
    Ok(dir)
}

fn mnist(cfg: &DataConfig) -> Result<(Dataset, Dataset), CliError> {
    let dir = data_dir(cfg)?;
    let mut train = load_idx(
        &existing(dir, "train-images-idx3-ubyte")?,
        &existing(dir, "train-labels-idx1-ubyte")?,
        Split::Train,
    )?;
    let mut test = load_idx(
        &existing(dir, "t10k-images-idx3-ubyte")?,
        &existing(dir, "t10k-labels-idx1-ubyte")?,
        Split::Test,
    )?;
    train.classes = 10;
    test.classes = 10;
    Ok((train, test))
}

fn cifar10(cfg: &DataConfig) -> Result<(Dataset, Dataset), CliError> {
    let mut dir = data_dir(cfg)?.to_path_buf();
    if dir.join("cifar-10-batches-bin").is_dir() {
        dir = dir.join("cifar-10-batches-bin");
    }
    let batches: Vec<PathBuf> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
    let test_batch = dir.join("test_batch.bin");
    for p in batches.iter().chain([&test_batch]) {
        if !p.is_file() {
            return Err(CliError::data(format!("missing CIFAR-10 batch {}", p.display())));
        }
    }
    let refs: Vec<&Path> = batches.iter().map(PathBuf::as_path).collect();
    Ok((load_cifar10(&refs, Split::Train)?, load_cifar10(&[&test_batch], Split::Test)?))
}

/// Even-indexed draws train, odd-indexed draws test, same cluster centers.
fn blobs(cfg: &DataConfig) -> Result<(Dataset, Dataset), CliError> {
    let b = &cfg.blobs;
    let all = synth_blobs(b.classes, 2 * b.per_class, b.dim, b.separation, b.seed)?;
    let even: Vec<usize> = (0..all.len()).step_by(2).collect();
    let odd: Vec<usize> = (1..all.len()).step_by(2).collect();
    let train = all.select(&even, "train half (even draws)");
    let mut test = all.select(&odd, "test half (odd draws)");
    test.split = Split::Test;
    Ok((train, test))
}

/// Loads both splits, truncates them and fits any whitening on the
/// training split only.
pub fn load(cfg: &DataConfig) -> Result<(Dataset, Dataset), CliError> {
    let (mut train, mut test) = match cfg.dataset {
        DatasetKind::Mnist => mnist(cfg)?,
        DatasetKind::Cifar10 => cifar10(cfg)?,
        DatasetKind::Blobs => blobs(cfg)?,
    };
    if let Some(n) = cfg.subset {
        train = train.truncate(n);
    }
    if let Some(n) = cfg.test_subset {
        test = test.truncate(n);
    }
    if train.is_empty() || test.is_empty() {
        return Err(CliError::data("empty dataset after subsetting"));
    }
    if let Some(eps) = cfg.zca_epsilon {
        let zca = fit_zca(&train, eps)?;
        train = apply_zca(&zca, &train)?;
        test = apply_zca(&zca, &test)?;
    }
    Ok((train, test))
}

/// Network input shape for the loaded samples after any cropping.
pub fn input_shape(cfg: &DataConfig, train: &Dataset) -> Vec<usize> {
    let mut shape = train.feature_shape().to_vec();
    if let (Some((h, w)), 3) = (cfg.crop, shape.len()) {
        shape[1] = h;
        shape[2] = w;
    }
    shape
}
