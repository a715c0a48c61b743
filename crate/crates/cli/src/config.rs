//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers, `#` starting a comment. Every key is known in advance; anything
//! else is rejected so a misspelled hyper-parameter cannot go unnoticed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use mrnet::adversarial::{PerturbationConfig, PerturbationNorm};
use mrnet::network::Mode;
use mrnet::optim::{parse_schedule, ScheduleSpec};

use crate::error::CliError;

/// `(section, key, default)`. A `None` default means the key has no
/// fallback and must be given whenever it is needed.
const KEYS: &[(&str, &str, Option<&str>)] = &[
    ("data", "dataset", None),
    ("data", "path", None),
    ("data", "subset", None),
    ("data", "test_subset", None),
    ("data", "zca_epsilon", None),
    ("data", "crop", None),
    ("data", "flip", Some("false")),
    ("data", "blobs_classes", Some("3")),
    ("data", "blobs_per_class", Some("50")),
    ("data", "blobs_dim", Some("2")),
    ("data", "blobs_separation", Some("6")),
    ("data", "blobs_seed", Some("0")),
    ("network", "hidden", None),
    ("train", "schedule", None),
    ("train", "batch_size", Some("100")),
    ("train", "momentum", Some("0.9")),
    ("train", "weight_decay", None),
    ("train", "manifold_weight", None),
    ("train", "manifold_start", None),
    ("train", "beta", None),
    ("train", "calibrate_beta", Some("false")),
    ("train", "perturbation_norm", Some("constant")),
    ("train", "clip", None),
    ("train", "regenerate_every_batch", Some("true")),
    ("train", "adversarial_gradient", Some("eval")),
    ("train", "share_masks", Some("true")),
    ("train", "track_accuracy", Some("true")),
    ("train", "probe", Some("test")),
    ("train", "seed", Some("0")),
    ("train", "runs", Some("1")),
    ("eval", "betas", Some("0")),
    ("embed", "queries", Some("0,1,2,3,4")),
    ("embed", "k", Some("10")),
    ("embed", "max_points", Some("5000")),
    ("embed", "full", Some("false")),
    ("calibrate", "max_pairs", None),
    ("calibrate", "fraction", Some("0.5")),
    ("calibrate", "bins", Some("50")),
    ("calibrate", "seed", Some("0")),
    ("output", "dir", Some("runs")),
];

/// Where a value came from, as recorded in the run manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    File(usize),
    Flag,
    /// Fixed per run by the command (the seed of one of several runs).
    Run,
    Calibrated,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<(String, String), (String, Origin)>,
}

fn known(section: &str, key: &str) -> Option<Option<&'static str>> {
    KEYS.iter().find(|(s, k, _)| *s == section && *k == key).map(|(_, _, d)| *d)
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::config(format!("line {line_no}: unterminated section header")))?
                    .trim();
                if !KEYS.iter().any(|(s, _, _)| *s == name) {
                    return Err(CliError::config(format!("line {line_no}: unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {line_no}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| CliError::config(format!("line {line_no}: key {key:?} outside any section")))?;
            if known(sec, key).is_none() {
                return Err(CliError::config(format!("line {line_no}: unknown key {key:?} in [{sec}]")));
            }
            let slot = (sec.to_string(), key.to_string());
            if values.contains_key(&slot) {
                return Err(CliError::config(format!("line {line_no}: duplicate key {key:?} in [{sec}]")));
            }
            values.insert(slot, (value.to_string(), Origin::File(line_no)));
        }
        Ok(RawConfig { values })
    }

    /// Sets a value from a command-line flag, replacing any file value.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.set_with(section, key, value, Origin::Flag);
    }

    pub fn set_with(&mut self, section: &str, key: &str, value: impl Into<String>, origin: Origin) {
        assert!(known(section, key).is_some(), "unknown key [{section}] {key}");
        self.values
            .insert((section.to_string(), key.to_string()), (value.into(), origin));
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(|(v, _)| v.as_str())
    }

    fn value(&self, section: &str, key: &str) -> Option<&str> {
        self.get(section, key).or_else(|| known(section, key).flatten())
    }

    fn parsed<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.value(section, key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::config(format!("[{section}] {key} = {v:?}: {e}")))
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, section: &str, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(section, key)?
            .ok_or_else(|| CliError::config(format!("missing required key [{section}] {key}")))
    }

    /// All keys with their resolved values, tagged with their origin or as
    /// a documented default; unset keys without a default are listed as
    /// comments.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, default) in KEYS {
            if *section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                writeln!(out, "[{section}]").unwrap();
                current = section;
            }
            match (self.values.get(&(section.to_string(), key.to_string())), default) {
                (Some((v, Origin::File(line))), _) => writeln!(out, "{key} = {v}  # config line {line}").unwrap(),
                (Some((v, Origin::Flag)), _) => writeln!(out, "{key} = {v}  # command-line flag").unwrap(),
                (Some((v, Origin::Run)), _) => writeln!(out, "{key} = {v}  # this run").unwrap(),
                (Some((v, Origin::Calibrated)), _) => writeln!(out, "{key} = {v}  # calibrated").unwrap(),
                (None, Some(d)) => writeln!(out, "{key} = {d}  # default").unwrap(),
                (None, None) => writeln!(out, "# {key} unset").unwrap(),
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Blobs,
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" => Ok(DatasetKind::Cifar10),
            "blobs" => Ok(DatasetKind::Blobs),
            other => Err(format!("unknown dataset {other:?} (mnist, cifar10, blobs)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlobsConfig {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub dataset: DatasetKind,
    pub path: Option<PathBuf>,
    pub subset: Option<usize>,
    pub test_subset: Option<usize>,
    pub zca_epsilon: Option<f64>,
    pub crop: Option<(usize, usize)>,
    pub flip: bool,
    pub blobs: BlobsConfig,
}

/// Training hyper-parameters. The objective weights and the activation step
/// have no defaults, so they are `None` until given.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSection {
    pub hidden: Option<String>,
    pub schedule: Option<ScheduleSpec>,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: Option<f64>,
    pub manifold_weight: Option<f64>,
    pub manifold_start: Option<usize>,
    pub beta: Option<f64>,
    pub calibrate_beta: bool,
    pub norm: PerturbationNorm,
    pub clip: Option<(f64, f64)>,
    pub regenerate_every_batch: bool,
    pub adversarial_gradient: Mode,
    pub share_masks: bool,
    pub track_accuracy: bool,
    pub probe: bool,
    pub seed: u64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedSection {
    pub queries: Vec<usize>,
    pub k: usize,
    pub max_points: usize,
    pub full: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrateSection {
    pub max_pairs: Option<usize>,
    pub fraction: f64,
    pub bins: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub data: DataConfig,
    pub train: TrainSection,
    pub eval_betas: Vec<f64>,
    pub embed: EmbedSection,
    pub calibrate: CalibrateSection,
    pub out: PathBuf,
}

fn list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| CliError::config(format!("{what}: {s:?}: {e}"))))
        .collect()
}

fn pair<T: FromStr>(text: &str, sep: char, what: &str) -> Result<(T, T), CliError> {
    let bad = || CliError::config(format!("{what}: expected two values separated by '{sep}', got {text:?}"));
    let (a, b) = text.split_once(sep).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let data = DataConfig {
            dataset: raw.required("data", "dataset")?,
            path: raw.get("data", "path").map(PathBuf::from),
            subset: raw.parsed("data", "subset")?,
            test_subset: raw.parsed("data", "test_subset")?,
            zca_epsilon: raw.parsed("data", "zca_epsilon")?,
            crop: raw.get("data", "crop").map(|c| pair(c, 'x', "[data] crop")).transpose()?,
            flip: raw.required("data", "flip")?,
            blobs: BlobsConfig {
                classes: raw.required("data", "blobs_classes")?,
                per_class: raw.required("data", "blobs_per_class")?,
                dim: raw.required("data", "blobs_dim")?,
                separation: raw.required("data", "blobs_separation")?,
                seed: raw.required("data", "blobs_seed")?,
            },
        };
        let schedule = raw
            .get("train", "schedule")
            .map(|s| parse_schedule(s).map_err(|e| CliError::config(format!("[train] schedule = {s:?}: {e}"))))
            .transpose()?;
        let norm = match raw.value("train", "perturbation_norm").unwrap() {
            "constant" => PerturbationNorm::Constant,
            "max" => PerturbationNorm::Max,
            other => return Err(CliError::config(format!("[train] perturbation_norm: unknown {other:?} (constant, max)"))),
        };
        let adversarial_gradient = match raw.value("train", "adversarial_gradient").unwrap() {
            "eval" => Mode::Eval,
            "train" => Mode::Train,
            other => return Err(CliError::config(format!("[train] adversarial_gradient: unknown {other:?} (eval, train)"))),
        };
        let probe = match raw.value("train", "probe").unwrap() {
            "test" => true,
            "none" => false,
            other => return Err(CliError::config(format!("[train] probe: unknown {other:?} (test, none)"))),
        };
        let train = TrainSection {
            hidden: raw.get("network", "hidden").map(str::to_string),
            schedule,
            batch_size: raw.required("train", "batch_size")?,
            momentum: raw.required("train", "momentum")?,
            weight_decay: raw.parsed("train", "weight_decay")?,
            manifold_weight: raw.parsed("train", "manifold_weight")?,
            manifold_start: raw.parsed("train", "manifold_start")?,
            beta: raw.parsed("train", "beta")?,
            calibrate_beta: raw.required("train", "calibrate_beta")?,
            norm,
            clip: raw.get("train", "clip").map(|c| pair(c, ',', "[train] clip")).transpose()?,
            regenerate_every_batch: raw.required("train", "regenerate_every_batch")?,
            adversarial_gradient,
            share_masks: raw.required("train", "share_masks")?,
            track_accuracy: raw.required("train", "track_accuracy")?,
            probe,
            seed: raw.required("train", "seed")?,
            runs: raw.required("train", "runs")?,
        };
        if train.runs == 0 {
            return Err(CliError::config("[train] runs must be >= 1"));
        }
        if let Some(b) = train.beta {
            PerturbationConfig::new(b).map_err(|e| CliError::config(format!("[train] beta: {e}")))?;
        }
        let embed = EmbedSection {
            queries: list(raw.value("embed", "queries").unwrap(), "[embed] queries")?,
            k: raw.required("embed", "k")?,
            max_points: raw.required("embed", "max_points")?,
            full: raw.required("embed", "full")?,
        };
        let calibrate = CalibrateSection {
            max_pairs: raw.parsed("calibrate", "max_pairs")?,
            fraction: raw.required("calibrate", "fraction")?,
            bins: raw.required("calibrate", "bins")?,
            seed: raw.required("calibrate", "seed")?,
        };
        let eval_betas = list(raw.value("eval", "betas").unwrap(), "[eval] betas")?;
        if eval_betas.iter().any(|b: &f64| !(*b >= 0.0)) {
            return Err(CliError::config("[eval] betas must be >= 0"));
        }
        let out = PathBuf::from(raw.value("output", "dir").unwrap());
        Ok(RunConfig { raw, data, train, eval_betas, embed, calibrate, out })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn hidden(&self) -> Result<&str, CliError> {
        self.train
            .hidden
            .as_deref()
            .ok_or_else(|| CliError::config("missing required key [network] hidden"))
    }

    /// The perturbation template (norm, clipping, caching) at level `beta`.
    pub fn perturbation(&self, beta: f64) -> Result<PerturbationConfig, CliError> {
        let mut p = PerturbationConfig::new(beta).map_err(CliError::from_core)?;
        p.norm = self.train.norm;
        p.clip = self.train.clip;
        p.regenerate_every_batch = self.train.regenerate_every_batch;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[data]\ndataset = blobs\n[network]\nhidden = dense:8\n";

    #[test]
    fn parses_sections_and_comments() {
        let c = RunConfig::parse(&format!("{MINIMAL}[train]  # hyper-parameters\nschedule = 0.1 (2-1-1)\nseed = 7 # seven\n")).unwrap();
        assert_eq!(c.data.dataset, DatasetKind::Blobs);
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.train.batch_size, 100);
        assert_eq!(c.train.schedule.unwrap().epochs, [2, 1, 1]);
        assert_eq!(c.eval_betas, vec![0.0]);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        for text in [
            format!("{MINIMAL}[train]\nlearning_rate = 0.1\n"),
            format!("{MINIMAL}[training]\n"),
            format!("{MINIMAL}[network]\nhidden = dense:4\n"),
            "dataset = blobs\n".to_string(),
            format!("{MINIMAL}[train]\nseed\n"),
            format!("{MINIMAL}[train]\nseed = x\n"),
            format!("{MINIMAL}[train]\nschedule = 0.1 (2-1)\n"),
        ] {
            let err = RunConfig::parse(&text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}");
        }
    }

    #[test]
    fn manifest_marks_origins() {
        let mut raw = RawConfig::parse(MINIMAL).unwrap();
        raw.set("train", "seed", "3");
        let m = raw.manifest();
        assert!(m.contains("dataset = blobs  # config line 2"));
        assert!(m.contains("seed = 3  # command-line flag"));
        assert!(m.contains("batch_size = 100  # default"));
        assert!(m.contains("# weight_decay unset"));
        // a manifest is itself a valid configuration
        let again = RunConfig::parse(&m).unwrap();
        assert_eq!(again.train.seed, 3);
        assert_eq!(again.data.dataset, DatasetKind::Blobs);
    }
}
