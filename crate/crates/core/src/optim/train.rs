use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::eval::{accuracy, probe_distance};
use super::schedule::ScheduleSpec;
use super::sgd::{sgd_step, MomentumState};
use crate::adversarial::{gen_adversarial_batch, input_gradient, loss_input_gradient, PerturbationConfig};
use crate::data::{augment, center_crop, Dataset};
use crate::embedding::manifold_distance;
use crate::error::{Error, Result};
use crate::manifold::{backward_manifold, manifold_loss, seed_errors, total_gradient, DualTrace, ObjectiveConfig};
use crate::network::{backward_classification, cross_entropy, forward, Architecture, Mode, Params};
use crate::tensor::Tensor;

pub const DEFAULT_BATCH: usize = 100;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

pub const METRICS_HEADER: &str = "step,epoch,rate,L,omega,phi,J_m,manifold_distance,train_acc,test_acc";

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;
const STREAM_AUGMENT: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// He-initialized parameters drawn from the seed's initialization stream.
pub fn init_params(arch: &Architecture, seed: u64) -> Params {
    Params::init(arch, &mut stream(seed, STREAM_INIT))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub schedule: ScheduleSpec,
    pub objective: ObjectiveConfig,
    /// Required whenever the manifold term can activate.
    pub perturbation: Option<PerturbationConfig>,
    /// Forward mode used for the input gradient that crafts `x′`.
    pub adversarial_gradient: Mode,
    /// Reuse the clean pass's dropout masks in the adversarial pass.
    pub share_masks: bool,
    /// Random training crops (center crops at evaluation) of this size.
    pub crop: Option<(usize, usize)>,
    pub flip: bool,
    /// Evaluate train/test accuracy at every epoch end.
    pub track_accuracy: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(schedule: ScheduleSpec, objective: ObjectiveConfig, seed: u64) -> Self {
        TrainConfig {
            batch_size: DEFAULT_BATCH,
            momentum: DEFAULT_MOMENTUM,
            schedule,
            objective,
            perturbation: None,
            adversarial_gradient: Mode::Eval,
            share_masks: true,
            crop: None,
            flip: false,
            track_accuracy: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if self.objective.manifold_weight > 0.0 && self.perturbation.is_none() {
            return Err(Error::config("a positive manifold weight needs a perturbation level β"));
        }
        if self.flip && self.crop.is_none() {
            return Err(Error::config("flip augmentation is applied together with cropping; set a crop size"));
        }
        if let Some(p) = &self.perturbation {
            if !p.regenerate_every_batch && self.crop.is_some() {
                return Err(Error::config("cached adversarial examples cannot be combined with random crops"));
            }
        }
        Ok(())
    }
}

/// One optimizer step. `phi` and `manifold_distance` are present once the
/// manifold term is active; accuracies only on an epoch's last step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub rate: f64,
    pub loss: f64,
    pub omega: f64,
    pub phi: Option<f64>,
    /// `L + λΩ (+ λ_m Φ)`.
    pub objective: f64,
    pub manifold_distance: Option<f64>,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl StepRecord {
    /// A row in [`METRICS_HEADER`] column order.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.epoch,
            self.rate,
            self.loss,
            self.omega,
            opt(self.phi),
            self.objective,
            opt(self.manifold_distance),
            opt(self.train_acc),
            opt(self.test_acc)
        )
    }
}

/// Mean clean/adversarial embedding distance on the probe set, measured
/// after `step` updates.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRecord {
    pub step: usize,
    pub mean: f64,
    pub per_unit: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainStats {
    pub steps: Vec<StepRecord>,
    pub probes: Vec<ProbeRecord>,
    /// Adversarial samples left unperturbed because their gradient vanished.
    pub degenerate: usize,
}

impl TrainStats {
    pub fn last_test_acc(&self) -> Option<f64> {
        self.steps.iter().rev().find_map(|s| s.test_acc)
    }

    pub fn last_train_acc(&self) -> Option<f64> {
        self.steps.iter().rev().find_map(|s| s.train_acc)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = format!("{METRICS_HEADER}\n");
        for s in &self.steps {
            out.push_str(&s.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Hooks for streaming progress out of [`train`].
pub trait TrainObserver {
    fn on_step(&mut self, _record: &StepRecord) -> Result<()> {
        Ok(())
    }

    fn on_probe(&mut self, _record: &ProbeRecord) -> Result<()> {
        Ok(())
    }

    /// Called after the last epoch of each non-empty schedule stage.
    fn on_stage_end(&mut self, _stage: usize, _epoch: usize, _params: &Params) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub train: &'a Dataset,
    pub test: Option<&'a Dataset>,
    /// Set on which the clean/adversarial embedding distance is tracked.
    pub probe: Option<&'a Dataset>,
}

/// A run that stopped early. `params` are the last finite parameters.
pub struct TrainFailure {
    pub error: Error,
    pub params: Params,
    pub stats: TrainStats,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "training stopped after {} steps: {}", self.stats.steps.len(), self.error)
    }
}

impl fmt::Debug for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrainFailure")
            .field("error", &self.error)
            .field("steps", &self.stats.steps.len())
            .finish_non_exhaustive()
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub type TrainResult = std::result::Result<(Params, TrainStats), Box<TrainFailure>>;

struct Eval {
    x: Tensor,
    labels: Vec<usize>,
}

impl Eval {
    fn new(d: &Dataset, crop: Option<(usize, usize)>) -> Result<Self> {
        let x = match crop {
            Some(c) => center_crop(&d.samples, c)?,
            None => d.samples.clone(),
        };
        Ok(Eval { x, labels: d.labels.clone() })
    }
}

struct Trainer<'a> {
    arch: &'a Architecture,
    cfg: &'a TrainConfig,
    data: TrainData<'a>,
    params: Params,
    state: MomentumState,
    stats: TrainStats,
    shuffle_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    augment_rng: ChaCha8Rng,
    train_eval: Option<Eval>,
    test_eval: Option<Eval>,
    probe_eval: Option<Eval>,
    cache: Vec<Option<Vec<f64>>>,
}

/// Mini-batch momentum SGD on `J_m = L + λΩ + λ_mΦ`.
///
/// Each step runs the clean forward pass and classification backprop; once
/// the manifold term is active it also crafts `x′`, runs the adversarial
/// forward pass and the manifold backprop before the combined update. Before
/// activation the same loop runs with the manifold branch skipped.
pub fn train(
    arch: &Architecture,
    init: Params,
    data: TrainData<'_>,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> TrainResult {
    let fail = |error, params: &Params| {
        Box::new(TrainFailure {
            error,
            params: params.clone(),
            stats: TrainStats::default(),
        })
    };
    let setup = || -> Result<Trainer<'_>> {
        cfg.validate()?;
        init.validate(arch)?;
        if data.train.is_empty() {
            return Err(Error::config("empty training set"));
        }
        let state = MomentumState::new(&init, cfg.momentum)?;
        let eval = |d: Option<&Dataset>| d.map(|d| Eval::new(d, cfg.crop)).transpose();
        Ok(Trainer {
            arch,
            cfg,
            data,
            params: init.clone(),
            state,
            stats: TrainStats::default(),
            shuffle_rng: stream(cfg.seed, STREAM_SHUFFLE),
            dropout_rng: stream(cfg.seed, STREAM_DROPOUT),
            augment_rng: stream(cfg.seed, STREAM_AUGMENT),
            train_eval: if cfg.track_accuracy { Some(Eval::new(data.train, cfg.crop)?) } else { None },
            test_eval: if cfg.track_accuracy { eval(data.test)? } else { None },
            probe_eval: if cfg.perturbation.is_some() { eval(data.probe)? } else { None },
            cache: vec![None; data.train.len()],
        })
    };
    let mut trainer = match setup() {
        Ok(t) => t,
        Err(e) => return Err(fail(e, &init)),
    };
    match trainer.run(observer) {
        Ok(()) => Ok((trainer.params, trainer.stats)),
        Err(error) => Err(Box::new(TrainFailure {
            error,
            params: trainer.params,
            stats: trainer.stats,
        })),
    }
}

impl Trainer<'_> {
    fn run(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        let n = self.data.train.len();
        let per_epoch = n.div_ceil(self.cfg.batch_size);
        let start = self.cfg.objective.manifold_start;
        let mut order: Vec<usize> = (0..n).collect();
        let mut step = 0;
        for epoch in 0..self.cfg.schedule.total_epochs() {
            let rate = self.cfg.schedule.rate(epoch).expect("epoch within schedule");
            order.shuffle(&mut self.shuffle_rng);
            for (b, batch) in order.chunks(self.cfg.batch_size).enumerate() {
                if step == start {
                    self.probe(step, observer)?;
                }
                let mut record = self.step(step, epoch, rate, batch)?;
                step += 1;
                if b + 1 == per_epoch {
                    if let Some(e) = &self.train_eval {
                        record.train_acc = Some(accuracy(self.arch, &self.params, &e.x, &e.labels)?);
                    }
                    if let Some(e) = &self.test_eval {
                        record.test_acc = Some(accuracy(self.arch, &self.params, &e.x, &e.labels)?);
                    }
                }
                observer.on_step(&record)?;
                self.stats.steps.push(record);
            }
            if step > start {
                self.probe(step, observer)?;
            }
            let stage = self.cfg.schedule.stage(epoch).unwrap();
            if self.cfg.schedule.stage(epoch + 1) != Some(stage) {
                observer.on_stage_end(stage, epoch, &self.params)?;
            }
        }
        Ok(())
    }

    fn probe(&mut self, step: usize, observer: &mut dyn TrainObserver) -> Result<()> {
        let (Some(e), Some(p)) = (&self.probe_eval, &self.cfg.perturbation) else {
            return Ok(());
        };
        let d = probe_distance(self.arch, &self.params, &e.x, &e.labels, p)?;
        let record = ProbeRecord { step, mean: d.mean, per_unit: d.per_unit };
        observer.on_probe(&record)?;
        self.stats.probes.push(record);
        Ok(())
    }

    fn adversarial_batch(
        &mut self,
        batch: &[usize],
        xb: &Tensor,
        yb: &[usize],
        clean: &crate::network::ActivationTrace,
        layer2_error: &Tensor,
        pert: &PerturbationConfig,
    ) -> Result<Tensor> {
        if !pert.regenerate_every_batch && batch.iter().all(|&i| self.cache[i].is_some()) {
            let data = batch.iter().flat_map(|&i| self.cache[i].clone().unwrap()).collect();
            return Tensor::new(xb.shape().to_vec(), data);
        }
        let grad = match self.cfg.adversarial_gradient {
            Mode::Eval => loss_input_gradient(self.arch, &self.params, xb, yb, Mode::Eval, None, &mut self.dropout_rng)?.1,
            Mode::Train => input_gradient(self.arch, &self.params, clean, layer2_error)?,
        };
        let (x_adv, degenerate) = gen_adversarial_batch(xb, &grad, pert)?;
        self.stats.degenerate += degenerate;
        if !pert.regenerate_every_batch {
            for (r, &i) in batch.iter().enumerate() {
                self.cache[i] = Some(x_adv.row(r).to_vec());
            }
        }
        Ok(x_adv)
    }

    fn step(&mut self, step: usize, epoch: usize, rate: f64, batch: &[usize]) -> Result<StepRecord> {
        let arch = self.arch;
        let (raw, yb) = self.data.train.batch(batch);
        let xb = match self.cfg.crop {
            Some(c) => augment(&raw, c, self.cfg.flip, &mut self.augment_rng)?,
            None => raw,
        };
        let clean = forward(arch, &self.params, &xb, Mode::Train, None, &mut self.dropout_rng)?;
        let loss = cross_entropy(clean.probs(), &yb)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss at step {step}")));
        }
        let omega = self.params.weight_decay();
        let grads = backward_classification(arch, &self.params, &clean, &yb)?;

        let objective = &self.cfg.objective;
        let mut phi = None;
        let mut distance = None;
        let mut manifold_grad = None;
        if objective.manifold_active(step) {
            let pert = self.cfg.perturbation.clone().expect("validated");
            let x_adv = self.adversarial_batch(batch, &xb, &yb, &clean, &grads.layer2_error, &pert)?;
            let masks = self.cfg.share_masks.then_some(&clean.masks);
            let adv = forward(arch, &self.params, &x_adv, Mode::Train, masks, &mut self.dropout_rng)?;
            let dual = DualTrace::new(clean, adv)?;
            let (a, a_adv) = (dual.clean.embedding(arch), dual.adv.embedding(arch));
            phi = Some(manifold_loss(a, a_adv)?);
            distance = Some(manifold_distance(a, a_adv)?.mean);
            let seeds = seed_errors(a, a_adv)?;
            manifold_grad = Some(backward_manifold(arch, &self.params, &dual, &seeds)?);
        }
        let total = total_gradient(&grads.params, &self.params, manifold_grad.as_ref(), objective, step)?;
        let value = loss + objective.weight_decay * omega + phi.map_or(0.0, |p| objective.manifold_weight * p);

        let before = self.params.clone();
        sgd_step(&mut self.params, &total, &mut self.state, rate)?;
        if let Some(layer) = self.params.first_non_finite() {
            self.params = before;
            return Err(Error::layer(layer, format!("parameters diverged at step {step}")));
        }
        Ok(StepRecord {
            step,
            epoch,
            rate,
            loss,
            omega,
            phi,
            objective: value,
            manifold_distance: distance,
            train_acc: None,
            test_acc: None,
        })
    }
}
