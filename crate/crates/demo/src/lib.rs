//! WebAssembly bindings for the browser page in `www/`.
//!
//! A [`BlobDemo`] holds a 2-D blob dataset and at most one trained network.
//! The page trains one demo with `λ_m = 0` and one with the manifold term,
//! then draws their decision fields, adversarial displacements, β histogram
//! and embedding distance matrices.

use mrnet::adversarial::{calibrate_beta, CalibrationConfig, PerturbationConfig};
use mrnet::data::{synth_blobs, Dataset};
use mrnet::embedding::{dunn_index, pairwise_distances, EmbeddingSet};
use mrnet::manifold::ObjectiveConfig;
use mrnet::optim::{accuracy, adversarial_set, embeddings, init_params, predict, probe_distance, train, ScheduleSpec, TrainConfig, TrainData};
use mrnet::{Architecture, Params, Tensor};
use wasm_bindgen::prelude::*;

const HIDDEN: &str = "dense:16,dense:8";
const BATCH: usize = 20;
const BASE_RATE: f64 = 0.05;

fn js(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Zero mean, unit variance per coordinate.
fn standardized(x: &Tensor) -> Tensor {
    let n = x.rows() as f64;
    let mut out = x.clone();
    for c in 0..2 {
        let mean = (0..x.rows()).map(|i| x.row(i)[c]).sum::<f64>() / n;
        let var = (0..x.rows()).map(|i| (x.row(i)[c] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(1e-12);
        for i in 0..x.rows() {
            out.row_mut(i)[c] = (x.row(i)[c] - mean) / sd;
        }
    }
    out
}

#[wasm_bindgen]
pub struct BlobDemo {
    data: Dataset,
    arch: Architecture,
    params: Option<Params>,
    template: PerturbationConfig,
}

#[wasm_bindgen]
impl BlobDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(classes: usize, per_class: usize, separation: f64, seed: u32) -> Result<BlobDemo, String> {
        let raw = synth_blobs(classes, per_class, 2, separation, u64::from(seed)).map_err(js)?;
        let data = raw.with_samples(standardized(&raw.samples), "standardized").map_err(js)?;
        let arch = Architecture::parse(&[2], HIDDEN, classes).map_err(js)?;
        let template = PerturbationConfig::new(1.0).map_err(js)?;
        Ok(BlobDemo { data, arch, params: None, template })
    }

    /// Interleaved `x, y` coordinates.
    pub fn points(&self) -> Vec<f64> {
        self.data.samples.data().to_vec()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.data.labels.iter().map(|&l| l as u32).collect()
    }

    /// `[x_min, x_max, y_min, y_max]` of the points, padded by 15%.
    pub fn bounds(&self) -> Vec<f64> {
        let pts = self.data.samples.data();
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in pts.chunks(2) {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].max(p[0]);
            b[2] = b[2].min(p[1]);
            b[3] = b[3].max(p[1]);
        }
        let (px, py) = (0.15 * (b[1] - b[0]), 0.15 * (b[3] - b[2]));
        vec![b[0] - px, b[1] + px, b[2] - py, b[3] + py]
    }

    /// Trains from scratch and returns the training accuracy. With
    /// `lambda_m > 0` the manifold term switches on halfway through the
    /// first stage.
    pub fn train(&mut self, lambda_m: f64, beta: f64, epochs: usize, seed: u32) -> Result<f64, String> {
        let epochs = epochs.max(3);
        let first = epochs * 6 / 10;
        let second = (epochs - first) / 2;
        let schedule = ScheduleSpec::new(BASE_RATE, [first, second, epochs - first - second]).map_err(js)?;
        let steps_per_epoch = self.data.len().div_ceil(BATCH);
        let objective = ObjectiveConfig::new(5e-4, lambda_m, steps_per_epoch * first / 2).map_err(js)?;
        let mut cfg = TrainConfig::new(schedule, objective, u64::from(seed));
        cfg.batch_size = BATCH;
        cfg.track_accuracy = false;
        if lambda_m > 0.0 {
            cfg.perturbation = Some(PerturbationConfig::new(beta).map_err(js)?);
        }
        let data = TrainData { train: &self.data, test: None, probe: None };
        let (params, _) = train(&self.arch, init_params(&self.arch, u64::from(seed)), data, &cfg, &mut ()).map_err(js)?;
        let acc = accuracy(&self.arch, &params, &self.data.samples, &self.data.labels).map_err(js)?;
        self.params = Some(params);
        Ok(acc)
    }

    pub fn trained(&self) -> bool {
        self.params.is_some()
    }

    fn model(&self) -> Result<&Params, String> {
        self.params.as_ref().ok_or_else(|| "train the network first".to_string())
    }

    /// Predicted class on a `resolution × resolution` grid over
    /// [`bounds`](Self::bounds), top row first.
    pub fn decision_field(&self, resolution: usize) -> Result<Vec<u8>, String> {
        let params = self.model()?;
        let r = resolution.clamp(2, 400);
        let b = self.bounds();
        let mut grid = Vec::with_capacity(2 * r * r);
        for row in 0..r {
            let y = b[3] - (row as f64 + 0.5) / r as f64 * (b[3] - b[2]);
            for col in 0..r {
                grid.push(b[0] + (col as f64 + 0.5) / r as f64 * (b[1] - b[0]));
                grid.push(y);
            }
        }
        let grid = Tensor::new(vec![r * r, 2], grid).map_err(js)?;
        Ok(predict(&self.arch, params, &grid).map_err(js)?.into_iter().map(|c| c as u8).collect())
    }

    /// Adversarial counterparts of every point at level `beta`, interleaved `x, y`.
    pub fn adversarial(&self, beta: f64) -> Result<Vec<f64>, String> {
        PerturbationConfig::new(beta).map_err(js)?;
        let cfg = PerturbationConfig { beta, ..self.template.clone() };
        let adv = adversarial_set(&self.arch, self.model()?, &self.data.samples, &self.data.labels, &cfg).map_err(js)?;
        Ok(adv.into_data())
    }

    /// Accuracy on the adversarial counterparts at level `beta`.
    pub fn adversarial_accuracy(&self, beta: f64) -> Result<f64, String> {
        let adv = Tensor::new(vec![self.data.len(), 2], self.adversarial(beta)?).map_err(js)?;
        accuracy(&self.arch, self.model()?, &adv, &self.data.labels).map_err(js)
    }

    /// Mean last-hidden-layer distance between points and their adversarial counterparts.
    pub fn manifold_distance(&self, beta: f64) -> Result<f64, String> {
        let cfg = PerturbationConfig::new(beta).map_err(js)?;
        Ok(probe_distance(&self.arch, self.model()?, &self.data.samples, &self.data.labels, &cfg).map_err(js)?.mean)
    }

    fn embedding(&self) -> Result<EmbeddingSet, String> {
        let e = embeddings(&self.arch, self.model()?, &self.data.samples).map_err(js)?;
        EmbeddingSet::new(e, self.data.labels.clone(), "demo").map_err(js)
    }

    pub fn dunn(&self) -> Result<f64, String> {
        dunn_index(&self.embedding()?).map_err(js)
    }

    /// Row-major class-sorted distance matrix of the embedding.
    pub fn distance_matrix(&self) -> Result<Vec<f64>, String> {
        Ok(pairwise_distances(&self.embedding()?, true).values)
    }

    /// Labels in the order used by [`distance_matrix`](Self::distance_matrix).
    pub fn sorted_labels(&self) -> Vec<u32> {
        let mut l = self.labels();
        l.sort_unstable();
        l
    }

    /// Intra-class distance histogram and recommended β for the standardized points.
    pub fn calibrate(&self, bins: usize, fraction: f64) -> Result<Calibration, String> {
        let cfg = CalibrationConfig { fraction, bins: bins.max(1), ..CalibrationConfig::default() };
        let r = calibrate_beta(&self.data.samples, &self.data.labels, &cfg).map_err(js)?;
        Ok(Calibration {
            recommended: r.recommended,
            global_min: r.global_min,
            edges: r.intra_histogram.edges,
            counts: r.intra_histogram.counts.iter().map(|&c| c as f64).collect(),
        })
    }
}

#[wasm_bindgen]
pub struct Calibration {
    recommended: f64,
    global_min: f64,
    edges: Vec<f64>,
    counts: Vec<f64>,
}

#[wasm_bindgen]
impl Calibration {
    #[wasm_bindgen(getter)]
    pub fn recommended(&self) -> f64 {
        self.recommended
    }

    #[wasm_bindgen(getter)]
    pub fn global_min(&self) -> f64 {
        self.global_min
    }

    /// `bins + 1` bin edges.
    pub fn edges(&self) -> Vec<f64> {
        self.edges.clone()
    }

    pub fn counts(&self) -> Vec<f64> {
        self.counts.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trains_and_reports_shapes() {
        let mut demo = BlobDemo::new(3, 30, 6.0, 1).unwrap();
        assert!(demo.decision_field(10).is_err());
        let acc = demo.train(0.0, 0.5, 20, 0).unwrap();
        assert!(acc > 0.9, "accuracy {acc}");
        assert_eq!(demo.decision_field(12).unwrap().len(), 144);
        let adv = demo.adversarial(0.5).unwrap();
        assert_eq!(adv.len(), demo.points().len());
        let pts = demo.points();
        let moved = adv.chunks(2).zip(pts.chunks(2)).map(|(a, p)| ((a[0] - p[0]).powi(2) + (a[1] - p[1]).powi(2)).sqrt());
        assert!(moved.into_iter().all(|d| d < 0.5 + 1e-9));
        assert_eq!(demo.distance_matrix().unwrap().len(), 90 * 90);
        assert!(demo.dunn().unwrap() > 0.0);
    }

    #[test]
    fn manifold_run_differs_from_vanilla() {
        let mut a = BlobDemo::new(2, 30, 3.0, 2).unwrap();
        let mut b = BlobDemo::new(2, 30, 3.0, 2).unwrap();
        a.train(0.0, 0.5, 10, 0).unwrap();
        b.train(0.5, 0.5, 10, 0).unwrap();
        assert_ne!(a.distance_matrix().unwrap(), b.distance_matrix().unwrap());
    }

    #[test]
    fn calibration_histogram_is_consistent() {
        let demo = BlobDemo::new(2, 10, 4.0, 3).unwrap();
        let c = demo.calibrate(8, 0.5).unwrap();
        assert_eq!(c.edges().len(), 9);
        assert_eq!(c.counts().iter().sum::<f64>(), 2.0 * 45.0);
        assert_eq!(c.recommended, 0.5 * c.global_min);
    }
}
