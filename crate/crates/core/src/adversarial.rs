//! Input gradients, adversarial examples and perturbation-level calibration.
//!
//! An adversarial example moves a sample a fixed distance `β` along the
//! normalized input gradient of its classification loss:
//! `x′ = x + β ∇ₓL / ‖∇ₓL‖₂`. The sign ascends the loss.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{forward, propagate, ActivationTrace, Architecture, DropoutMasks, LayerSpec, Mode, Params};
use crate::tensor::{convolve_full_scatter, gemm, Layout, Tensor};

/// Gradient norms below this are treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationNorm {
    /// `x + β g / ‖g‖₂`, so `‖x′ − x‖₂ = β`.
    Constant,
    /// `x + β sign(g)`.
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationConfig {
    pub beta: f64,
    pub norm: PerturbationNorm,
    /// Clamp `x′` into `[lo, hi]`; off by default.
    pub clip: Option<(f64, f64)>,
    /// Regenerate adversarial examples from the current parameters every mini-batch.
    pub regenerate_every_batch: bool,
}

impl PerturbationConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::config(format!("perturbation level β must be finite and >= 0, got {beta}")));
        }
        Ok(PerturbationConfig {
            beta,
            norm: PerturbationNorm::Constant,
            clip: None,
            regenerate_every_batch: true,
        })
    }
}

/// `∇ₓL` per sample from the first layer's output error `δ⁽²⁾`.
///
/// Dense first layer: `(δ⁽²⁾ ∘ g(a⁽²⁾)) W⁽¹⁾`. Convolutional first layer: for
/// each input map `i`, `Σⱼ ([δ⁽²⁾]ⱼ ∘ g([a⁽²⁾]ⱼ)) ★ Wᵢⱼ⁽¹⁾` with `★` the
/// full-mode convolution. The result is shaped like the input batch.
pub fn input_gradient(arch: &Architecture, params: &Params, trace: &ActivationTrace, delta2: &Tensor) -> Result<Tensor> {
    let layer = &arch.layers()[0];
    let a1 = trace.input();
    let a2 = &trace.activations[1];
    if delta2.len() != a2.len() {
        return Err(Error::shape(format!("δ⁽²⁾ {:?} does not match a⁽²⁾ {:?}", delta2.shape(), a2.shape())));
    }
    let n = a1.rows();
    let mut dz = delta2.data().to_vec();
    if layer.relu {
        for (d, a) in dz.iter_mut().zip(a2.data()) {
            if *a <= 0.0 {
                *d = 0.0;
            }
        }
    }
    let p = match (&layer.spec, params.layers[0].as_ref()) {
        (LayerSpec::Dense { .. } | LayerSpec::Conv { .. }, Some(p)) => p,
        (LayerSpec::Dense { .. } | LayerSpec::Conv { .. }, None) => return Err(Error::layer(0, "missing parameters")),
        (spec, _) => {
            return Err(Error::config(format!(
                "input gradient needs a learnable first layer, found {spec}"
            )))
        }
    };
    let mut grad = Tensor::zeros(a1.shape());
    match layer.spec {
        LayerSpec::Dense { units } => {
            let fan_in = a1.row_len();
            gemm(n, units, fan_in, &dz, Layout::RowMajor, p.weights.data(), Layout::RowMajor, grad.data_mut(), false);
        }
        LayerSpec::Conv { maps, height, width } => {
            let (cin, h, w) = (layer.input[0], layer.input[1], layer.input[2]);
            let (oh, ow) = (layer.output[1], layer.output[2]);
            let (ksz, osz, isz) = (height * width, oh * ow, h * w);
            for s in 0..n {
                let dz_s = &dz[s * maps * osz..(s + 1) * maps * osz];
                let out = grad.row_mut(s);
                for c in 0..cin {
                    for j in 0..maps {
                        let kernel = &p.weights.data()[(j * cin + c) * ksz..(j * cin + c + 1) * ksz];
                        convolve_full_scatter(&dz_s[j * osz..(j + 1) * osz], oh, ow, kernel, height, width, &mut out[c * isz..(c + 1) * isz]);
                    }
                }
            }
        }
        _ => unreachable!("checked above"),
    }
    Ok(grad)
}

/// Per-sample `∇ₓL(θ; xₙ, yₙ)` for a batch: one forward pass in `mode`, the
/// classification error propagated to layer 2 without accumulating parameter
/// gradients, then [`input_gradient`].
pub fn loss_input_gradient(
    arch: &Architecture,
    params: &Params,
    x: &Tensor,
    labels: &[usize],
    mode: Mode,
    masks: Option<&DropoutMasks>,
    rng: &mut impl Rng,
) -> Result<(ActivationTrace, Tensor)> {
    let trace = forward(arch, params, x, mode, masks, rng)?;
    if labels.len() != trace.batch_size() {
        return Err(Error::shape(format!("{} labels for a batch of {}", labels.len(), trace.batch_size())));
    }
    let mut residual = trace.probs().clone();
    for (i, &y) in labels.iter().enumerate() {
        if y >= arch.classes() {
            return Err(Error::Label { label: y, classes: arch.classes() });
        }
        residual.row_mut(i)[y] -= 1.0;
    }
    let top = arch.layers().len();
    let mut errors = propagate(arch, params, &trace, top, residual, None, false)?;
    let delta2 = errors[1].take().ok_or_else(|| Error::config("network has no layer-2 activation"))?;
    let grad = input_gradient(arch, params, &trace, &delta2)?;
    Ok((trace, grad))
}

/// One adversarial sample; `degenerate` marks a (near-)zero gradient, in
/// which case `x′ = x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adversarial {
    pub x: Vec<f64>,
    pub degenerate: bool,
}

/// `x′ = x + β·g/‖g‖₂` (or `x + β·sign(g)` for [`PerturbationNorm::Max`]).
pub fn gen_adversarial(x: &[f64], grad: &[f64], cfg: &PerturbationConfig) -> Result<Adversarial> {
    if x.len() != grad.len() {
        return Err(Error::shape(format!("sample has {} values, gradient {}", x.len(), grad.len())));
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm < DEGENERATE_NORM || cfg.beta == 0.0 {
        return Ok(Adversarial {
            x: x.to_vec(),
            degenerate: norm < DEGENERATE_NORM,
        });
    }
    let mut out: Vec<f64> = match cfg.norm {
        PerturbationNorm::Constant => {
            let step = cfg.beta / norm;
            x.iter().zip(grad).map(|(v, g)| v + step * g).collect()
        }
        PerturbationNorm::Max => x
            .iter()
            .zip(grad)
            .map(|(v, g)| if *g == 0.0 { *v } else { v + cfg.beta * g.signum() })
            .collect(),
    };
    if let Some((lo, hi)) = cfg.clip {
        out.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    }
    Ok(Adversarial { x: out, degenerate: false })
}

/// [`gen_adversarial`] over every row of a batch. Gradients may be flattened
/// per sample; the result keeps the batch's shape. Also returns the number
/// of degenerate samples.
pub fn gen_adversarial_batch(x: &Tensor, grads: &Tensor, cfg: &PerturbationConfig) -> Result<(Tensor, usize)> {
    if x.rows() != grads.rows() || x.row_len() != grads.row_len() {
        return Err(Error::shape(format!("batch {:?} vs gradients {:?}", x.shape(), grads.shape())));
    }
    let mut out = Vec::with_capacity(x.len());
    let mut degenerate = 0;
    for i in 0..x.rows() {
        let adv = gen_adversarial(x.row(i), grads.row(i), cfg)?;
        degenerate += adv.degenerate as usize;
        out.extend(adv.x);
    }
    Ok((Tensor::new(x.shape().to_vec(), out)?, degenerate))
}

/// Equal-width histogram over `[0, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let upper = values.iter().cloned().fold(0.0, f64::max);
        let width = if upper > 0.0 { upper / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = ((v / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }

    /// `bin_left,bin_right,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", self.edges[i], self.edges[i + 1], c);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationConfig {
    /// Pair budget for each of the intra-class and all-pairs scans; exhaustive when `None`.
    pub max_pairs: Option<usize>,
    /// Recommended β as a fraction of the smallest intra-class distance.
    pub fraction: f64,
    pub bins: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            max_pairs: None,
            fraction: 0.5,
            bins: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaReport {
    /// All sampled pairwise distances.
    pub histogram: Histogram,
    /// Intra-class distances only.
    pub intra_histogram: Histogram,
    /// Smallest intra-class distance per class with at least two samples.
    pub class_minima: BTreeMap<usize, f64>,
    /// Classes skipped for having fewer than two samples.
    pub omitted: Vec<usize>,
    pub global_min: f64,
    pub fraction: f64,
    pub recommended: f64,
    /// The smallest intra-class distance is zero (duplicate samples).
    pub degenerate: bool,
    pub pairs_used: usize,
    pub intra_pairs_used: usize,
    pub subsampled: bool,
    pub seed: u64,
}

impl BetaReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "beta calibration");
        let _ = writeln!(s, "pairs: {} (intra-class: {}), subsampled: {}, seed: {}", self.pairs_used, self.intra_pairs_used, self.subsampled, self.seed);
        for (c, d) in &self.class_minima {
            let _ = writeln!(s, "class {c}: min intra-class distance {d}");
        }
        for c in &self.omitted {
            let _ = writeln!(s, "warning: class {c} has fewer than 2 samples, omitted");
        }
        let _ = writeln!(s, "global min intra-class distance: {}", self.global_min);
        let _ = writeln!(s, "recommended beta: {} ({} x min)", self.recommended, self.fraction);
        if self.degenerate {
            let _ = writeln!(s, "warning: degenerate recommendation (duplicate samples within a class)");
        }
        s
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Visits index pairs `i < j` drawn from `items`, exhaustively when the pair
/// count fits `budget`, otherwise `budget` seeded random pairs.
fn for_pairs(items: &[usize], budget: Option<usize>, rng: &mut ChaCha8Rng, mut f: impl FnMut(usize, usize)) -> (usize, bool) {
    let m = items.len();
    let total = m * m.saturating_sub(1) / 2;
    match budget {
        Some(b) if total > b => {
            for _ in 0..b {
                let i = rng.random_range(0..m);
                let mut j = rng.random_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                f(items[i.min(j)], items[i.max(j)]);
            }
            (b, true)
        }
        _ => {
            for a in 0..m {
                for b in a + 1..m {
                    f(items[a], items[b]);
                }
            }
            (total, false)
        }
    }
}

/// Pairwise-distance statistics for choosing `β`: the recommendation is
/// `cfg.fraction` times the smallest intra-class distance.
pub fn calibrate_beta(samples: &Tensor, labels: &[usize], cfg: &CalibrationConfig) -> Result<BetaReport> {
    if samples.rows() != labels.len() {
        return Err(Error::shape(format!("{} samples for {} labels", samples.rows(), labels.len())));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut class_minima = BTreeMap::new();
    let mut omitted = Vec::new();
    let mut intra = Vec::new();
    let mut intra_pairs = 0;
    let mut subsampled = false;
    for (&class, members) in &by_class {
        if members.len() < 2 {
            omitted.push(class);
            continue;
        }
        let mut min = f64::INFINITY;
        let (used, sub) = for_pairs(members, cfg.max_pairs, &mut rng, |i, j| {
            let d = distance(samples.row(i), samples.row(j));
            min = min.min(d);
            intra.push(d);
        });
        intra_pairs += used;
        subsampled |= sub;
        class_minima.insert(class, min);
    }
    if class_minima.is_empty() {
        return Err(Error::config("no class has at least two samples"));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut distances = Vec::new();
    let (pairs_used, sub) = for_pairs(&all, cfg.max_pairs, &mut rng, |i, j| {
        distances.push(distance(samples.row(i), samples.row(j)));
    });
    subsampled |= sub;
    let global_min = class_minima.values().cloned().fold(f64::INFINITY, f64::min);
    Ok(BetaReport {
        histogram: Histogram::build(&distances, cfg.bins),
        intra_histogram: Histogram::build(&intra, cfg.bins),
        class_minima,
        omitted,
        global_min,
        fraction: cfg.fraction,
        recommended: cfg.fraction * global_min,
        degenerate: global_min == 0.0,
        pairs_used,
        intra_pairs_used: intra_pairs,
        subsampled,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{backward_classification, cross_entropy};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn loss_of(arch: &Architecture, params: &Params, x: &Tensor, y: &[usize]) -> f64 {
        let t = forward(arch, params, x, Mode::Eval, None, &mut rng(0)).unwrap();
        cross_entropy(t.probs(), y).unwrap()
    }

    fn check_input_gradient(arch: &Architecture, seed: u64) {
        let params = Params::init(arch, &mut rng(seed));
        let mut r = rng(seed + 1);
        let x = Tensor::from_fn(&[1, arch.input_len()], |_| r.random_range(-1.0..1.0));
        let y = [1usize];
        let (_, grad) = loss_input_gradient(arch, &params, &x, &y, Mode::Eval, None, &mut r).unwrap();
        let h = 1e-5;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let fd = (loss_of(arch, &params, &xp, &y) - loss_of(arch, &params, &xm, &y)) / (2.0 * h);
            let g = grad.data()[i];
            let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-8);
            assert!(rel < 1e-4 || (fd - g).abs() < 1e-9, "pixel {i}: fd {fd} analytic {g}");
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences_dense() {
        check_input_gradient(&Architecture::parse(&[5], "dense:7", 4).unwrap(), 10);
    }

    #[test]
    fn input_gradient_matches_finite_differences_conv() {
        check_input_gradient(&Architecture::parse(&[1, 6, 6], "conv:2x3x3,pool:2,dense:5", 3).unwrap(), 20);
    }

    /// One hidden unit with positive weights and bias stays active, so
    /// `∇ₓL = (p − onehot)·V·w` in closed form.
    #[test]
    fn input_gradient_closed_form_single_unit() {
        let arch = Architecture::parse(&[3], "dense:1", 2).unwrap();
        let mut params = Params::zeros(&arch);
        let w = [0.5, 0.25, 1.0];
        let v = [1.5, -0.5];
        {
            let l0 = params.layers[0].as_mut().unwrap();
            l0.weights.data_mut().copy_from_slice(&w);
            l0.bias.data_mut()[0] = 1.0;
            params.layers[1].as_mut().unwrap().weights.data_mut().copy_from_slice(&v);
        }
        let x = Tensor::new(vec![1, 3], vec![0.2, 0.4, 0.6]).unwrap();
        let (trace, grad) = loss_input_gradient(&arch, &params, &x, &[0], Mode::Eval, None, &mut rng(0)).unwrap();
        let p = trace.probs().row(0).to_vec();
        let coeff = (p[0] - 1.0) * v[0] + p[1] * v[1];
        for k in 0..3 {
            assert!((grad.data()[k] - coeff * w[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_residual_gives_zero_input_gradient() {
        let arch = Architecture::parse(&[4], "dense:3", 2).unwrap();
        let mut params = Params::init(&arch, &mut rng(1));
        params.layers[1].as_mut().unwrap().bias = Tensor::new(vec![2], vec![1e4, -1e4]).unwrap();
        let x = Tensor::filled(&[2, 4], 0.3);
        let (_, g) = loss_input_gradient(&arch, &params, &x, &[0, 0], Mode::Eval, None, &mut rng(2)).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_gradient_agrees_with_backward_classification() {
        let arch = Architecture::parse(&[6], "dense:5,dropout:0.5,dense:4", 3).unwrap();
        let params = Params::init(&arch, &mut rng(3));
        let mut r = rng(4);
        let x = Tensor::from_fn(&[3, 6], |_| r.random_range(-1.0..1.0));
        let y = [2, 0, 1];
        let trace = forward(&arch, &params, &x, Mode::Train, None, &mut r).unwrap();
        let g = backward_classification(&arch, &params, &trace, &y).unwrap();
        let via_trace = input_gradient(&arch, &params, &trace, &g.layer2_error).unwrap();
        let (_, direct) = loss_input_gradient(&arch, &params, &x, &y, Mode::Train, Some(&trace.masks), &mut r).unwrap();
        assert_eq!(via_trace, direct);

        // linear in δ⁽²⁾ with activations frozen
        let scaled = input_gradient(&arch, &params, &trace, &g.layer2_error.map(|v| 3.0 * v)).unwrap();
        for (a, b) in scaled.data().iter().zip(via_trace.data()) {
            assert!((a - 3.0 * b).abs() < 1e-13);
        }
    }

    #[test]
    fn pooling_first_layer_is_rejected() {
        let arch = Architecture::parse(&[1, 4, 4], "pool:2,dense:3", 2).unwrap();
        let params = Params::init(&arch, &mut rng(5));
        let x = Tensor::filled(&[1, 16], 0.1);
        let err = loss_input_gradient(&arch, &params, &x, &[0], Mode::Eval, None, &mut rng(6)).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn constant_norm_step_has_length_beta() {
        let mut r = rng(7);
        let cfg = PerturbationConfig::new(0.37).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..20).map(|_| r.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..20).map(|_| r.random_range(-1.0..1.0)).collect();
            let adv = gen_adversarial(&x, &g, &cfg).unwrap();
            assert!(!adv.degenerate);
            let d = distance(&adv.x, &x);
            assert!(((d - 0.37) / 0.37).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gradient_is_degenerate_and_keeps_x() {
        let cfg = PerturbationConfig::new(1.0).unwrap();
        let adv = gen_adversarial(&[1.0, 2.0], &[0.0, 0.0], &cfg).unwrap();
        assert!(adv.degenerate);
        assert_eq!(adv.x, vec![1.0, 2.0]);
    }

    #[test]
    fn zero_beta_keeps_x() {
        let cfg = PerturbationConfig::new(0.0).unwrap();
        let adv = gen_adversarial(&[1.0, 2.0], &[0.3, -0.1], &cfg).unwrap();
        assert_eq!(adv.x, vec![1.0, 2.0]);
        assert!(PerturbationConfig::new(-0.1).is_err());
        assert!(PerturbationConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn max_norm_and_clip() {
        let mut cfg = PerturbationConfig::new(0.1).unwrap();
        cfg.norm = PerturbationNorm::Max;
        cfg.clip = Some((0.0, 1.0));
        let adv = gen_adversarial(&[0.95, 0.5, 0.02], &[2.0, 0.0, -3.0], &cfg).unwrap();
        assert_eq!(adv.x, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn batch_generation_leaves_clean_batch_untouched() {
        let x = Tensor::from_fn(&[3, 4], |i| i as f64);
        let before = x.clone();
        let g = Tensor::from_fn(&[3, 4], |i| if i < 4 { 0.0 } else { 1.0 });
        let (adv, degenerate) = gen_adversarial_batch(&x, &g, &PerturbationConfig::new(2.0).unwrap()).unwrap();
        assert_eq!(x, before);
        assert_eq!(degenerate, 1);
        assert_eq!(adv.row(0), x.row(0));
        assert!((distance(adv.row(1), x.row(1)) - 2.0).abs() < 1e-12);
    }

    /// Brute-force all-pairs histogram on four known points.
    #[test]
    fn calibration_matches_all_pairs() {
        let pts = [[0.0, 0.0], [3.0, 0.0], [0.0, 4.0], [10.0, 10.0]];
        let labels = [0, 0, 1, 1];
        let x = Tensor::from_fn(&[4, 2], |i| pts[i / 2][i % 2]);
        let cfg = CalibrationConfig { bins: 4, ..Default::default() };
        let report = calibrate_beta(&x, &labels, &cfg).unwrap();

        let mut all = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                all.push(distance(&pts[i], &pts[j]));
            }
        }
        let upper = all.iter().cloned().fold(0.0, f64::max);
        let mut counts = vec![0u64; 4];
        for d in &all {
            counts[((d / (upper / 4.0)) as usize).min(3)] += 1;
        }
        assert_eq!(report.histogram.counts, counts);
        assert_eq!(report.pairs_used, 6);
        assert_eq!(report.class_minima[&0], 3.0);
        assert_eq!(report.class_minima[&1], distance(&pts[2], &pts[3]));
        assert_eq!(report.recommended, 1.5);
        assert!(!report.subsampled);
        assert!(report.histogram.to_csv().starts_with("bin_left,bin_right,count\n"));
    }

    #[test]
    fn calibration_duplicates_and_singletons() {
        let x = Tensor::new(vec![3, 2], vec![1.0, 1.0, 1.0, 1.0, 5.0, 5.0]).unwrap();
        let report = calibrate_beta(&x, &[0, 0, 1], &CalibrationConfig::default()).unwrap();
        assert_eq!(report.global_min, 0.0);
        assert!(report.degenerate);
        assert_eq!(report.omitted, vec![1]);
        assert!(report.to_text().contains("warning: class 1"));

        assert!(calibrate_beta(&x, &[0, 1, 2], &CalibrationConfig::default()).is_err());
    }

    #[test]
    fn calibration_subsampling_is_seeded() {
        let mut r = rng(8);
        let x = Tensor::from_fn(&[40, 3], |_| r.random_range(0.0..1.0));
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let cfg = CalibrationConfig { max_pairs: Some(50), seed: 3, ..Default::default() };
        let a = calibrate_beta(&x, &labels, &cfg).unwrap();
        let b = calibrate_beta(&x, &labels, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.subsampled);
        assert_eq!(a.pairs_used, 50);
    }
}
