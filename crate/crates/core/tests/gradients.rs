//! Finite-difference checks of every hand-written backward pass.

use mrnet::adversarial::{gen_adversarial_batch, loss_input_gradient, PerturbationConfig};
use mrnet::manifold::{backward_manifold, manifold_loss, seed_errors, DualTrace};
use mrnet::network::{backward_classification, cross_entropy, forward, Mode};
use mrnet::{Architecture, Params, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_batch(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn nets() -> Vec<(Architecture, Vec<usize>)> {
    vec![
        (Architecture::parse(&[5], "dense:7", 4).unwrap(), vec![3, 5]),
        (Architecture::parse(&[1, 6, 6], "conv:2x3x3,pool:2,dense:5", 3).unwrap(), vec![3, 1, 6, 6]),
        (Architecture::parse(&[2, 7, 7], "conv:3x2x2,pool:3,conv:2x2x2", 3).unwrap(), vec![2, 2, 7, 7]),
    ]
}

fn eval(arch: &Architecture, p: &Params, x: &Tensor) -> mrnet::network::ActivationTrace {
    forward(arch, p, x, Mode::Eval, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn check_params(arch: &Architecture, params: &Params, analytic: &Params, f: impl Fn(&Params) -> f64) {
    let grad = analytic.flatten();
    let mut worst: f64 = 0.0;
    for (i, g) in grad.iter().enumerate() {
        let mut plus = params.clone();
        *plus.scalar_mut(i).unwrap() += STEP;
        let mut minus = params.clone();
        *minus.scalar_mut(i).unwrap() -= STEP;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * STEP);
        worst = worst.max(rel_err(*g, numeric));
    }
    assert!(worst < 1e-4, "{:?}: worst relative error {worst}", arch.hidden_string());
}

#[test]
fn classification_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (arch, shape) in nets() {
        let params = Params::init(&arch, &mut rng);
        let x = random_batch(&shape, &mut rng);
        let labels: Vec<usize> = (0..shape[0]).map(|i| i % arch.classes()).collect();
        let trace = eval(&arch, &params, &x);
        let grads = backward_classification(&arch, &params, &trace, &labels).unwrap();
        check_params(&arch, &params, &grads.params, |p| cross_entropy(eval(&arch, p, &x).probs(), &labels).unwrap());
    }
}

#[test]
fn manifold_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (arch, shape) in nets() {
        let params = Params::init(&arch, &mut rng);
        let x = random_batch(&shape, &mut rng);
        let x_adv = {
            let mut t = x.clone();
            t.add_scaled(&random_batch(&shape, &mut rng), 0.3).unwrap();
            t
        };
        let dual = DualTrace::new(eval(&arch, &params, &x), eval(&arch, &params, &x_adv)).unwrap();
        let seeds = seed_errors(dual.clean.embedding(&arch), dual.adv.embedding(&arch)).unwrap();
        let analytic = backward_manifold(&arch, &params, &dual, &seeds).unwrap();
        check_params(&arch, &params, &analytic, |p| {
            manifold_loss(eval(&arch, p, &x).embedding(&arch), eval(&arch, p, &x_adv).embedding(&arch)).unwrap()
        });
    }
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (arch, shape) in nets() {
        let params = Params::init(&arch, &mut rng);
        let x = random_batch(&shape, &mut rng);
        let labels: Vec<usize> = (0..shape[0]).map(|i| (i + 1) % arch.classes()).collect();
        let (_, grad) = loss_input_gradient(&arch, &params, &x, &labels, Mode::Eval, None, &mut rng).unwrap();
        // per-sample loss is n times the batch mean restricted to that sample
        for s in 0..shape[0] {
            let xs = x.select_rows(&[s]);
            let loss = |v: &Tensor| cross_entropy(eval(&arch, &params, v).probs(), &labels[s..=s]).unwrap();
            for k in 0..xs.len() {
                let mut plus = xs.clone();
                plus.data_mut()[k] += STEP;
                let mut minus = xs.clone();
                minus.data_mut()[k] -= STEP;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * STEP);
                let analytic = grad.row(s)[k];
                assert!(rel_err(analytic, numeric) < 1e-4, "sample {s} input {k}: {analytic} vs {numeric}");
            }
        }
    }
}

#[test]
fn dropout_masks_are_constants_of_the_manifold_gradient() {
    let arch = Architecture::parse(&[4], "dense:6,dropout:0.5,dense:5,dropout:0.7", 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let params = Params::init(&arch, &mut rng);
    let x = random_batch(&[4, 4], &mut rng);
    let x_adv = random_batch(&[4, 4], &mut rng);
    let clean = forward(&arch, &params, &x, Mode::Train, None, &mut rng).unwrap();
    let masks = clean.masks.clone();
    let adv = forward(&arch, &params, &x_adv, Mode::Train, Some(&masks), &mut rng).unwrap();
    let dual = DualTrace::new(clean, adv).unwrap();
    assert!(dual.shared_masks);
    let seeds = seed_errors(dual.clean.embedding(&arch), dual.adv.embedding(&arch)).unwrap();
    let analytic = backward_manifold(&arch, &params, &dual, &seeds).unwrap();
    let phi = |p: &Params| {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let a = forward(&arch, p, &x, Mode::Train, Some(&masks), &mut r).unwrap();
        let b = forward(&arch, p, &x_adv, Mode::Train, Some(&masks), &mut r).unwrap();
        manifold_loss(a.embedding(&arch), b.embedding(&arch)).unwrap()
    };
    check_params(&arch, &params, &analytic, phi);
}

#[test]
fn ascent_direction_raises_loss_to_first_order() {
    let arch = Architecture::parse(&[6], "dense:8,dense:8", 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let params = Params::init(&arch, &mut rng);
    let x = random_batch(&[20, 6], &mut rng);
    let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
    let (_, grad) = loss_input_gradient(&arch, &params, &x, &labels, Mode::Eval, None, &mut rng).unwrap();
    let (x_adv, degenerate) = gen_adversarial_batch(&x, &grad, &PerturbationConfig::new(1e-3).unwrap()).unwrap();
    assert_eq!(degenerate, 0);
    for s in 0..20 {
        let before = cross_entropy(eval(&arch, &params, &x.select_rows(&[s])).probs(), &labels[s..=s]).unwrap();
        let after = cross_entropy(eval(&arch, &params, &x_adv.select_rows(&[s])).probs(), &labels[s..=s]).unwrap();
        assert!(after > before, "sample {s}: {before} -> {after}");
    }
}
