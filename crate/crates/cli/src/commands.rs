use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mrnet::adversarial::{calibrate_beta, BetaReport, CalibrationConfig};
use mrnet::data::{center_crop, Dataset};
use mrnet::embedding::{dunn_index, knn_query, pairwise_distances, silhouette, silhouette_csv, EmbeddingSet};
use mrnet::manifold::ObjectiveConfig;
use mrnet::network::{load_checkpoint, save_checkpoint};
use mrnet::optim::{
    adversarial_accuracy, embeddings, init_params, train, ProbeRecord, StepRecord, TrainConfig, TrainData,
    TrainObserver, METRICS_HEADER,
};
use mrnet::{Architecture, Params, Tensor};

use crate::config::{Origin, RunConfig};
use crate::dataset;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `μ ± σ` with the sample standard deviation (σ = 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn format_mean_std(values: &[f64], scale: f64, digits: usize) -> String {
    let (m, s) = mean_std(values);
    format!("{:.*} ± {:.*}", digits, m * scale, digits, s * scale)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn eval_inputs(cfg: &RunConfig, d: &Dataset) -> Result<Tensor, CliError> {
    Ok(match cfg.data.crop {
        Some(c) => center_crop(&d.samples, c)?,
        None => d.samples.clone(),
    })
}

fn architecture(cfg: &RunConfig, train: &Dataset) -> Result<Architecture, CliError> {
    Ok(Architecture::parse(&dataset::input_shape(&cfg.data, train), cfg.hidden()?, train.classes)?)
}

fn calibration_config(cfg: &RunConfig) -> CalibrationConfig {
    CalibrationConfig {
        max_pairs: cfg.calibrate.max_pairs,
        fraction: cfg.calibrate.fraction,
        bins: cfg.calibrate.bins,
        seed: cfg.calibrate.seed,
    }
}

fn load_model(cfg: &RunConfig, path: &Path, expected: &Architecture) -> Result<Params, CliError> {
    let (arch, params) = load_checkpoint(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if &arch != expected {
        return Err(CliError::config(format!(
            "checkpoint {} holds input {:?}, hidden {:?}, {} classes; configuration expects input {:?}, hidden {:?}, {} classes",
            path.display(),
            arch.input_shape(),
            arch.hidden_string(),
            arch.classes(),
            expected.input_shape(),
            cfg.hidden()?,
            expected.classes()
        )));
    }
    Ok(params)
}

struct RunFiles<'a> {
    dir: &'a Path,
    arch: &'a Architecture,
    metrics: BufWriter<File>,
    probes: BufWriter<File>,
}

impl<'a> RunFiles<'a> {
    fn create(dir: &'a Path, arch: &'a Architecture) -> Result<Self, CliError> {
        let open = |name: &str| -> Result<BufWriter<File>, CliError> {
            let p = dir.join(name);
            File::create(&p)
                .map(BufWriter::new)
                .map_err(|e| CliError::data(format!("cannot create {}: {e}", p.display())))
        };
        let mut metrics = open("metrics.csv")?;
        let mut probes = open("probes.csv")?;
        writeln!(metrics, "{METRICS_HEADER}")?;
        writeln!(probes, "step,mean_distance,per_unit")?;
        Ok(RunFiles { dir, arch, metrics, probes })
    }

    fn finish(&mut self) -> Result<(), CliError> {
        self.metrics.flush()?;
        self.probes.flush()?;
        Ok(())
    }
}

impl TrainObserver for RunFiles<'_> {
    fn on_step(&mut self, r: &StepRecord) -> mrnet::Result<()> {
        writeln!(self.metrics, "{}", r.csv_row())?;
        Ok(())
    }

    fn on_probe(&mut self, r: &ProbeRecord) -> mrnet::Result<()> {
        writeln!(self.probes, "{},{},{}", r.step, r.mean, r.per_unit)?;
        Ok(())
    }

    fn on_stage_end(&mut self, stage: usize, _epoch: usize, params: &Params) -> mrnet::Result<()> {
        save_checkpoint(&self.dir.join(format!("stage-{}.ckpt", stage + 1)), self.arch, params)
    }
}

/// Results of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub dir: PathBuf,
    pub train_acc: Option<f64>,
    pub test_acc: f64,
    /// `(β, accuracy)` for every configured evaluation level.
    pub adversarial: Vec<(f64, f64)>,
    pub dunn: Option<f64>,
    pub probes: Vec<ProbeRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub beta: Option<f64>,
    pub runs: Vec<RunSummary>,
}

impl TrainReport {
    pub fn aggregate(&self) -> String {
        let mut s = String::new();
        let acc: Vec<f64> = self.runs.iter().map(|r| r.test_acc).collect();
        writeln!(s, "runs: {}", self.runs.len()).unwrap();
        writeln!(s, "test accuracy (%): {}", format_mean_std(&acc, 100.0, 3)).unwrap();
        if let Some(first) = self.runs.first() {
            for (k, (beta, _)) in first.adversarial.iter().enumerate() {
                let v: Vec<f64> = self.runs.iter().map(|r| r.adversarial[k].1).collect();
                writeln!(s, "adversarial accuracy at beta={beta} (%): {}", format_mean_std(&v, 100.0, 3)).unwrap();
            }
        }
        let dunn: Vec<f64> = self.runs.iter().filter_map(|r| r.dunn).collect();
        if dunn.len() == self.runs.len() && !dunn.is_empty() {
            writeln!(s, "test-embedding Dunn index: {}", format_mean_std(&dunn, 1.0, 5)).unwrap();
        }
        s
    }
}

fn dunn_of(cfg: &RunConfig, arch: &Architecture, params: &Params, x: &Tensor, labels: &[usize], tag: &str) -> Result<Option<f64>, CliError> {
    let set = EmbeddingSet::new(embeddings(arch, params, x)?, labels.to_vec(), tag)?;
    let (set, _) = if cfg.embed.full { (set, None) } else { set.subsample(cfg.embed.max_points, cfg.calibrate.seed)? };
    match dunn_index(&set) {
        Ok(d) => Ok(Some(d)),
        Err(_) => Ok(None),
    }
}

/// Trains `runs` models (seeds `seed`, `seed + 1`, ...) and writes, per run,
/// `manifest.txt`, `metrics.csv`, `probes.csv`, stage checkpoints,
/// `final.ckpt` and `summary.txt` under `<out>/seed-<seed>/`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport, CliError> {
    let t = &cfg.train;
    let schedule = t.schedule.ok_or_else(|| CliError::config("missing required key [train] schedule"))?;
    let weight_decay = t.weight_decay.ok_or_else(|| CliError::config("missing required key [train] weight_decay"))?;
    let manifold_weight =
        t.manifold_weight.ok_or_else(|| CliError::config("missing required key [train] manifold_weight"))?;
    let manifold_start =
        t.manifold_start.ok_or_else(|| CliError::config("missing required key [train] manifold_start"))?;
    cfg.hidden()?;
    if manifold_weight > 0.0 && t.beta.is_none() && !t.calibrate_beta {
        return Err(CliError::config(
            "manifold_weight > 0 needs [train] beta or calibrate_beta = true",
        ));
    }
    let objective = ObjectiveConfig::new(weight_decay, manifold_weight, manifold_start)?;

    let (train_set, test_set) = dataset::load(&cfg.data)?;
    let arch = architecture(cfg, &train_set)?;
    create_dir(&cfg.out)?;

    let mut calibrated = None;
    let beta = match t.beta {
        Some(b) => Some(b),
        None if t.calibrate_beta => {
            let report = calibrate_beta(&train_set.samples, &train_set.labels, &calibration_config(cfg))?;
            write_file(&cfg.out.join("beta_report.txt"), &report.to_text())?;
            if !(report.recommended > 0.0) {
                return Err(CliError::data("calibration recommended a zero perturbation level"));
            }
            calibrated = Some(report.recommended);
            Some(report.recommended)
        }
        None => None,
    };
    let perturbation = beta.map(|b| cfg.perturbation(b)).transpose()?;
    let test_x = eval_inputs(cfg, &test_set)?;

    let mut runs = Vec::with_capacity(t.runs);
    for r in 0..t.runs {
        let seed = t.seed + r as u64;
        let dir = cfg.out.join(format!("seed-{seed}"));
        create_dir(&dir)?;

        let mut raw = cfg.raw.clone();
        raw.set_with("train", "seed", seed.to_string(), Origin::Run);
        raw.set_with("train", "runs", "1", Origin::Run);
        if let Some(b) = calibrated {
            raw.set_with("train", "beta", b.to_string(), Origin::Calibrated);
            raw.set_with("train", "calibrate_beta", "false", Origin::Calibrated);
        }
        let mut manifest = String::new();
        writeln!(manifest, "# mrnet {VERSION} train, run {} of {}", r + 1, t.runs).unwrap();
        writeln!(manifest, "# seed: {seed}").unwrap();
        writeln!(manifest, "# architecture: input {:?}, hidden {}, classes {}", arch.input_shape(), arch.hidden_string(), arch.classes()).unwrap();
        writeln!(manifest, "# parameters: {}", init_params(&arch, seed).count()).unwrap();
        writeln!(manifest, "# train data: {} samples; {}", train_set.len(), train_set.provenance.join(" -> ")).unwrap();
        writeln!(manifest, "# test data: {} samples; {}", test_set.len(), test_set.provenance.join(" -> ")).unwrap();
        writeln!(manifest, "# adversarial input gradient: {:?}-mode forward pass", t.adversarial_gradient).unwrap();
        manifest.push_str(&raw.manifest());
        write_file(&dir.join("manifest.txt"), &manifest)?;

        let mut tc = TrainConfig::new(schedule, objective.clone(), seed);
        tc.batch_size = t.batch_size;
        tc.momentum = t.momentum;
        tc.perturbation = perturbation.clone();
        tc.adversarial_gradient = t.adversarial_gradient;
        tc.share_masks = t.share_masks;
        tc.crop = cfg.data.crop;
        tc.flip = cfg.data.flip;
        tc.track_accuracy = t.track_accuracy;
        let data = TrainData {
            train: &train_set,
            test: Some(&test_set),
            probe: t.probe.then_some(&test_set),
        };

        let mut files = RunFiles::create(&dir, &arch)?;
        let outcome = train(&arch, init_params(&arch, seed), data, &tc, &mut files);
        files.finish()?;
        let (params, stats) = match outcome {
            Ok(done) => done,
            Err(failure) => {
                save_checkpoint(&dir.join("last-good.ckpt"), &arch, &failure.params)?;
                return Err(match CliError::from_core(failure.error) {
                    CliError::Divergence(m) => CliError::Divergence(format!(
                        "seed {seed}: {m}; last finite parameters kept in {}",
                        dir.join("last-good.ckpt").display()
                    )),
                    other => other,
                });
            }
        };
        save_checkpoint(&dir.join("final.ckpt"), &arch, &params)?;

        let test_acc = mrnet::optim::accuracy(&arch, &params, &test_x, &test_set.labels)?;
        let mut adversarial = Vec::new();
        for &b in &cfg.eval_betas {
            let template = match &perturbation {
                Some(p) => p.clone(),
                None => cfg.perturbation(b)?,
            };
            adversarial.push((b, adversarial_accuracy(&arch, &params, &test_x, &test_set.labels, b, &template)?));
        }
        let dunn = dunn_of(cfg, &arch, &params, &test_x, &test_set.labels, "test")?;
        let summary = RunSummary {
            seed,
            dir: dir.clone(),
            train_acc: stats.last_train_acc(),
            test_acc,
            adversarial,
            dunn,
            probes: stats.probes.clone(),
        };
        let mut text = String::new();
        writeln!(text, "seed: {seed}").unwrap();
        writeln!(text, "steps: {}", stats.steps.len()).unwrap();
        if let Some(a) = summary.train_acc {
            writeln!(text, "train accuracy: {a}").unwrap();
        }
        writeln!(text, "test accuracy: {test_acc}").unwrap();
        for (b, a) in &summary.adversarial {
            writeln!(text, "adversarial accuracy at beta={b}: {a}").unwrap();
        }
        if let Some(d) = dunn {
            writeln!(text, "test-embedding Dunn index: {d}").unwrap();
        }
        if let (Some(first), Some(last)) = (stats.probes.first(), stats.probes.last()) {
            writeln!(text, "probe distance: {} at step {} -> {} at step {}", first.mean, first.step, last.mean, last.step).unwrap();
        }
        if stats.degenerate > 0 {
            writeln!(text, "degenerate adversarial samples: {}", stats.degenerate).unwrap();
        }
        write_file(&dir.join("summary.txt"), &text)?;
        runs.push(summary);
    }
    let report = TrainReport { beta, runs };
    if report.runs.len() > 1 {
        write_file(&cfg.out.join("aggregate.txt"), &report.aggregate())?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub betas: Vec<f64>,
    /// `accuracy[checkpoint][beta]`.
    pub accuracy: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "checkpoints: {}", self.accuracy.len()).unwrap();
        for (k, b) in self.betas.iter().enumerate() {
            let v: Vec<f64> = self.accuracy.iter().map(|a| a[k]).collect();
            let label = if *b == 0.0 { "clean accuracy".to_string() } else { format!("adversarial accuracy at beta={b}") };
            writeln!(s, "{label} (%): {}", format_mean_std(&v, 100.0, 3)).unwrap();
        }
        s
    }
}

/// Clean and adversarial test accuracy of each checkpoint at every β,
/// written to `<out>/eval.csv` and `<out>/eval_summary.txt`.
pub fn cmd_eval(cfg: &RunConfig, checkpoints: &[PathBuf]) -> Result<EvalReport, CliError> {
    if checkpoints.is_empty() {
        return Err(CliError::config("eval needs at least one --checkpoint"));
    }
    let (train_set, test_set) = dataset::load(&cfg.data)?;
    let arch = architecture(cfg, &train_set)?;
    let x = eval_inputs(cfg, &test_set)?;
    let template = cfg.perturbation(cfg.train.beta.unwrap_or(1.0))?;
    let mut csv = String::from("checkpoint,beta,accuracy\n");
    let mut accuracy = Vec::new();
    for path in checkpoints {
        let params = load_model(cfg, path, &arch)?;
        let mut row = Vec::new();
        for &b in &cfg.eval_betas {
            let a = adversarial_accuracy(&arch, &params, &x, &test_set.labels, b, &template)?;
            writeln!(csv, "{},{b},{a}", path.display()).unwrap();
            row.push(a);
        }
        accuracy.push(row);
    }
    let report = EvalReport { betas: cfg.eval_betas.clone(), accuracy };
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("eval.csv"), &csv)?;
    write_file(&cfg.out.join("eval_summary.txt"), &report.summary())?;
    Ok(report)
}

/// Pairwise-distance histograms and the β recommendation for the training
/// split. With `derived`, also writes a copy of the configuration with the
/// recommended β filled in.
pub fn cmd_calibrate(cfg: &RunConfig, derived: Option<&Path>) -> Result<BetaReport, CliError> {
    let (train_set, _) = dataset::load(&cfg.data)?;
    let report = calibrate_beta(&train_set.samples, &train_set.labels, &calibration_config(cfg))?;
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("beta_histogram.csv"), &report.histogram.to_csv())?;
    write_file(&cfg.out.join("intra_histogram.csv"), &report.intra_histogram.to_csv())?;
    write_file(&cfg.out.join("beta_report.txt"), &report.to_text())?;
    if let Some(path) = derived {
        let mut raw = cfg.raw.clone();
        raw.set_with("train", "beta", report.recommended.to_string(), Origin::Calibrated);
        write_file(path, &raw.manifest())?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedReport {
    pub points: usize,
    pub subsampled: bool,
    pub dunn: f64,
    pub silhouette_mean: f64,
}

/// Embedding analysis of the test split: class-sorted distance matrix,
/// silhouettes, k-NN retrieval for the configured queries, Dunn index.
pub fn cmd_embed(cfg: &RunConfig, checkpoint: &Path) -> Result<EmbedReport, CliError> {
    let (train_set, test_set) = dataset::load(&cfg.data)?;
    let arch = architecture(cfg, &train_set)?;
    let params = load_model(cfg, checkpoint, &arch)?;
    let x = eval_inputs(cfg, &test_set)?;
    let set = EmbeddingSet::new(embeddings(&arch, &params, &x)?, test_set.labels.clone(), checkpoint.display().to_string())?;
    let (set, kept) = if cfg.embed.full { (set, None) } else { set.subsample(cfg.embed.max_points, cfg.calibrate.seed)? };

    let dunn = dunn_index(&set)?;
    let sil = silhouette(&set)?;
    let mut knn = String::from("query,query_label,rank,neighbor,neighbor_label,distance\n");
    for &q in &cfg.embed.queries {
        for (rank, (j, d)) in knn_query(&set, q, cfg.embed.k)?.into_iter().enumerate() {
            writeln!(knn, "{q},{},{},{j},{},{d}", set.labels[q], rank + 1, set.labels[j]).unwrap();
        }
    }
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("distances.csv"), &pairwise_distances(&set, true).to_csv())?;
    write_file(&cfg.out.join("silhouette.csv"), &silhouette_csv(&set, &sil))?;
    write_file(&cfg.out.join("knn.csv"), &knn)?;
    let report = EmbedReport {
        points: set.len(),
        subsampled: kept.is_some(),
        dunn,
        silhouette_mean: sil.mean,
    };
    let mut text = String::new();
    writeln!(text, "points: {} (subsampled: {})", report.points, report.subsampled).unwrap();
    writeln!(text, "dunn index: {dunn}").unwrap();
    writeln!(text, "silhouette mean: {}", sil.mean).unwrap();
    write_file(&cfg.out.join("embed_summary.txt"), &text)?;
    Ok(report)
}
