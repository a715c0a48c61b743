use mrnet::adversarial::PerturbationConfig;
use mrnet::data::{synth_blobs, Dataset};
use mrnet::manifold::ObjectiveConfig;
use mrnet::network::{cross_entropy, forward, Mode};
use mrnet::optim::{init_params, parse_schedule, train, TrainConfig, TrainData, TrainObserver};
use mrnet::{Architecture, Params};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn blobs() -> Dataset {
    synth_blobs(3, 40, 2, 6.0, 4).unwrap()
}

fn arch() -> Architecture {
    Architecture::parse(&[2], "dense:12,dense:6", 3).unwrap()
}

fn config(schedule: &str, lm: f64, start: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(parse_schedule(schedule).unwrap(), ObjectiveConfig::new(5e-4, lm, start).unwrap(), 9);
    cfg.batch_size = 10;
    cfg
}

fn run(data: &Dataset, cfg: &TrainConfig) -> (Params, mrnet::optim::TrainStats) {
    let a = arch();
    train(&a, init_params(&a, cfg.seed), TrainData { train: data, test: None, probe: None }, cfg, &mut ()).unwrap()
}

#[test]
fn zero_manifold_weight_is_bit_identical_to_vanilla() {
    let data = blobs();
    let vanilla = config("0.05 (3-2-1)", 0.0, 0);
    let mut zero = config("0.05 (3-2-1)", 0.0, 0);
    zero.perturbation = Some(PerturbationConfig::new(0.5).unwrap());
    let (pa, sa) = run(&data, &vanilla);
    let (pb, sb) = run(&data, &zero);
    assert_eq!(pa, pb);
    assert_eq!(sa.metrics_csv(), sb.metrics_csv());
}

#[test]
fn separable_blobs_reach_low_cross_entropy() {
    let data = blobs();
    let cfg = config("0.05 (30-15-5)", 0.0, 0);
    let a = arch();
    let (params, _) = run(&data, &cfg);
    let trace = forward(&a, &params, &data.samples, Mode::Eval, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let loss = cross_entropy(trace.probs(), &data.labels).unwrap();
    assert!(loss < 0.1, "cross-entropy {loss}");
}

#[test]
fn logged_objective_is_the_sum_of_its_terms() {
    let data = blobs();
    let mut cfg = config("0.05 (3-2-1)", 0.2, 10);
    cfg.perturbation = Some(PerturbationConfig::new(0.5).unwrap());
    let (_, stats) = run(&data, &cfg);
    for s in &stats.steps {
        let expect = s.loss + 5e-4 * s.omega + 0.2 * s.phi.unwrap_or(0.0);
        assert!((s.objective - expect).abs() <= 1e-9, "step {}", s.step);
        assert_eq!(s.phi.is_some(), s.step >= 10, "step {}", s.step);
        assert_eq!(s.manifold_distance.is_some(), s.phi.is_some());
    }
}

#[test]
fn same_seed_same_run() {
    let data = blobs();
    let mut cfg = config("0.05 (2-1-1)", 0.1, 5);
    cfg.perturbation = Some(PerturbationConfig::new(0.5).unwrap());
    let (pa, sa) = run(&data, &cfg);
    let (pb, sb) = run(&data, &cfg);
    assert_eq!(pa, pb);
    assert_eq!(sa.metrics_csv(), sb.metrics_csv());
    cfg.seed = 10;
    let (pc, _) = run(&data, &cfg);
    assert_ne!(pa, pc);
}

#[test]
fn rates_follow_the_three_stages() {
    let data = blobs();
    for text in ["0.001 (100-20-10)", "0.1 (40-40-20)"] {
        let mut cfg = config(text, 0.0, 0);
        cfg.batch_size = 120;
        let (_, stats) = run(&data, &cfg);
        let schedule = parse_schedule(text).unwrap();
        assert_eq!(stats.steps.len(), schedule.total_epochs());
        for s in &stats.steps {
            assert_eq!(s.rate, schedule.rate(s.epoch).unwrap());
        }
        let (a, b, c) = (schedule.epochs[0], schedule.epochs[1], schedule.epochs[2]);
        assert_eq!(stats.steps[a - 1].rate, schedule.base);
        assert_eq!(stats.steps[a].rate, schedule.base * 0.1);
        assert_eq!(stats.steps[a + b].rate, schedule.base * 0.05);
        assert_eq!(stats.steps.len(), a + b + c);
    }
}

#[derive(Default)]
struct Stages(Vec<(usize, usize)>);

impl TrainObserver for Stages {
    fn on_stage_end(&mut self, stage: usize, epoch: usize, _: &Params) -> mrnet::Result<()> {
        self.0.push((stage, epoch));
        Ok(())
    }
}

#[test]
fn stage_ends_are_reported() {
    let data = blobs();
    let cfg = config("0.05 (2-3-1)", 0.0, 0);
    let a = arch();
    let mut obs = Stages::default();
    train(&a, init_params(&a, 1), TrainData { train: &data, test: None, probe: None }, &cfg, &mut obs).unwrap();
    assert_eq!(obs.0.len(), 3);
    assert_eq!(obs.0.iter().map(|s| s.0).collect::<Vec<_>>(), [0, 1, 2]);
}

#[test]
fn divergence_stops_with_finite_parameters() {
    let data = blobs();
    let cfg = config("1e6 (5-1-1)", 0.0, 0);
    let a = arch();
    let failure = train(&a, init_params(&a, 1), TrainData { train: &data, test: None, probe: None }, &cfg, &mut ())
        .expect_err("a huge rate diverges");
    assert!(failure.params.first_non_finite().is_none());
    assert!(failure.params.flatten().iter().all(|v| v.is_finite()));
}

#[test]
fn manifold_term_needs_a_perturbation() {
    let data = blobs();
    let cfg = config("0.05 (1-1-1)", 0.5, 0);
    let a = arch();
    assert!(train(&a, init_params(&a, 1), TrainData { train: &data, test: None, probe: None }, &cfg, &mut ()).is_err());
}
