//! Embedding-quality metrics on last-hidden-layer activations.
//!
//! Distances here are always computed directly as `√Σ(aₖ − bₖ)²` rather than
//! through a Gram matrix, so duplicates come out at exactly zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Above this many points, pairwise work is subsampled unless asked otherwise.
pub const DEFAULT_MAX_POINTS: usize = 5000;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub vectors: Tensor,
    pub labels: Vec<usize>,
    pub source: String,
}

impl EmbeddingSet {
    pub fn new(vectors: Tensor, labels: Vec<usize>, source: impl Into<String>) -> Result<Self> {
        if vectors.shape().len() != 2 {
            return Err(Error::shape(format!("embeddings must be [N, D], got {:?}", vectors.shape())));
        }
        if vectors.rows() != labels.len() {
            return Err(Error::shape(format!("{} vectors but {} labels", vectors.rows(), labels.len())));
        }
        if vectors.rows() < 2 {
            return Err(Error::config("an embedding set needs at least two points"));
        }
        if !vectors.is_finite() {
            return Err(Error::Numeric("non-finite embedding entries".into()));
        }
        Ok(EmbeddingSet {
            vectors,
            labels,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.row_len()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.vectors.row(i), self.vectors.row(j))
    }

    fn class_count(&self) -> usize {
        let mut seen: Vec<usize> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// A seeded random subset of `max_points` points when the set is larger;
    /// otherwise a clone. The kept indices are sorted.
    pub fn subsample(&self, max_points: usize, seed: u64) -> Result<(EmbeddingSet, Option<Vec<usize>>)> {
        if self.len() <= max_points {
            return Ok((self.clone(), None));
        }
        if max_points < 2 {
            return Err(Error::config("subsample size must be at least 2"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kept = sample(&mut rng, self.len(), max_points).into_vec();
        kept.sort_unstable();
        let set = EmbeddingSet {
            vectors: self.vectors.select_rows(&kept),
            labels: kept.iter().map(|&i| self.labels[i]).collect(),
            source: self.source.clone(),
        };
        Ok((set, Some(kept)))
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    /// Original index of each row/column.
    pub order: Vec<usize>,
    pub labels: Vec<usize>,
    /// Row-major `N×N`.
    pub values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.len() + c]
    }

    /// Header row holds the original indices; each line starts with its index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for i in &self.order {
            write!(out, ",{i}").unwrap();
        }
        out.push('\n');
        for (r, i) in self.order.iter().enumerate() {
            write!(out, "{i}").unwrap();
            for c in 0..self.len() {
                write!(out, ",{}", self.get(r, c)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// All-pairs Euclidean distances. With `class_sorted`, rows are ordered by
/// label (stable within a class) so intra-class blocks sit on the diagonal.
pub fn pairwise_distances(e: &EmbeddingSet, class_sorted: bool) -> DistanceMatrix {
    let n = e.len();
    let mut order: Vec<usize> = (0..n).collect();
    if class_sorted {
        order.sort_by_key(|&i| e.labels[i]);
    }
    let mut values = vec![0.0; n * n];
    for r in 0..n {
        for c in r + 1..n {
            let d = e.distance(order[r], order[c]);
            values[r * n + c] = d;
            values[c * n + r] = d;
        }
    }
    DistanceMatrix {
        labels: order.iter().map(|&i| e.labels[i]).collect(),
        order,
        values,
    }
}

/// Single-linkage Dunn index: the smallest distance between points of
/// different classes over the largest within-class diameter.
pub fn dunn_index(e: &EmbeddingSet) -> Result<f64> {
    if e.class_count() < 2 {
        return Err(Error::config("the Dunn index needs at least two classes"));
    }
    let mut separation = f64::INFINITY;
    let mut diameter: f64 = 0.0;
    let mut any_pair_within = false;
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            let d = e.distance(i, j);
            if e.labels[i] == e.labels[j] {
                any_pair_within = true;
                diameter = diameter.max(d);
            } else {
                separation = separation.min(d);
            }
        }
    }
    if !any_pair_within {
        return Err(Error::config("the Dunn index is undefined when every class is a singleton"));
    }
    if diameter == 0.0 {
        return Ok(if separation == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(separation / diameter)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Silhouette {
    pub scores: Vec<f64>,
    pub mean: f64,
}

pub fn silhouette(e: &EmbeddingSet) -> Result<Silhouette> {
    if e.class_count() < 2 {
        return Err(Error::config("the silhouette is undefined for a single class"));
    }
    let n = e.len();
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        // class -> (sum of distances, count)
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for j in 0..n {
            if j != i {
                let entry = sums.entry(e.labels[j]).or_insert((0.0, 0));
                entry.0 += e.distance(i, j);
                entry.1 += 1;
            }
        }
        let own = match sums.get(&e.labels[i]) {
            Some(&(s, c)) => s / c as f64,
            None => {
                scores.push(0.0);
                continue;
            }
        };
        let nearest = sums
            .iter()
            .filter(|(&k, _)| k != e.labels[i])
            .map(|(_, &(s, c))| s / c as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = own.max(nearest);
        scores.push(if denom == 0.0 { 0.0 } else { (nearest - own) / denom });
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { scores, mean })
}

/// The `k` nearest other points to `query`, ascending by distance, ties
/// going to the lower index.
pub fn knn_query(e: &EmbeddingSet, query: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    if query >= e.len() {
        return Err(Error::config(format!("query index {query} out of range for {} points", e.len())));
    }
    if k == 0 || k >= e.len() {
        return Err(Error::config(format!("k must be in 1..{}, got {k}", e.len())));
    }
    let mut found: Vec<(usize, f64)> = (0..e.len()).filter(|&j| j != query).map(|j| (j, e.distance(query, j))).collect();
    found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    found.truncate(k);
    Ok(found)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldDistance {
    pub per_sample: Vec<f64>,
    pub mean: f64,
    /// `√(mean² / D)`: the mean distance spread evenly over the units.
    pub per_unit: f64,
}

/// Per-sample `‖a − a′‖₂` between matched clean and adversarial embeddings.
pub fn manifold_distance(clean: &Tensor, adv: &Tensor) -> Result<ManifoldDistance> {
    if clean.shape() != adv.shape() || clean.shape().is_empty() {
        return Err(Error::shape(format!(
            "clean {:?} and adversarial {:?} embeddings differ",
            clean.shape(),
            adv.shape()
        )));
    }
    let n = clean.rows();
    if n == 0 {
        return Err(Error::shape("empty embedding batch"));
    }
    let per_sample: Vec<f64> = (0..n).map(|i| euclidean(clean.row(i), adv.row(i))).collect();
    let mean = per_sample.iter().sum::<f64>() / n as f64;
    let per_unit = (mean * mean / clean.row_len() as f64).sqrt();
    Ok(ManifoldDistance { per_sample, mean, per_unit })
}

pub fn silhouette_csv(e: &EmbeddingSet, s: &Silhouette) -> String {
    let mut out = String::from("index,label,silhouette\n");
    for (i, score) in s.scores.iter().enumerate() {
        writeln!(out, "{i},{},{score}", e.labels[i]).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], labels: &[usize]) -> EmbeddingSet {
        EmbeddingSet::new(Tensor::matrix(points.len(), 1, points.to_vec()).unwrap(), labels.to_vec(), "t").unwrap()
    }

    #[test]
    fn distances_on_a_line() {
        let m = pairwise_distances(&line(&[0.0, 3.0, 4.0], &[0, 1, 0]), false);
        assert_eq!((m.get(0, 1), m.get(0, 2), m.get(1, 2)), (3.0, 4.0, 1.0));
        for i in 0..3 {
            assert_eq!(m.get(i, i), 0.0);
        }
        let sorted = pairwise_distances(&line(&[0.0, 3.0, 4.0], &[0, 1, 0]), true);
        assert_eq!(sorted.order, vec![0, 2, 1]);
        assert_eq!(sorted.get(0, 1), 4.0);
    }

    #[test]
    fn dunn_cases() {
        let d = dunn_index(&line(&[0.0, 0.1, 10.0, 10.1], &[0, 0, 1, 1])).unwrap();
        assert!((d - 99.0).abs() < 1e-9, "{d}");
        assert_eq!(dunn_index(&line(&[0.0, 1.0, 1.0], &[0, 0, 1])).unwrap(), 0.0);
        assert!(dunn_index(&line(&[0.0, 1.0, 2.0], &[0, 1, 2])).is_err());
        assert!(dunn_index(&line(&[0.0, 1.0], &[0, 0])).is_err());
    }

    #[test]
    fn silhouette_cases() {
        let s = silhouette(&line(&[0.0, 0.1, 10.0, 10.1], &[0, 0, 1, 1])).unwrap();
        assert!(s.mean > 0.9);
        // point 1 at mean distance 1 from its own class and from class 1
        let s = silhouette(&line(&[0.0, 1.0, 2.0, 5.0], &[0, 0, 1, 2])).unwrap();
        assert_eq!(s.scores[1], 0.0);
        assert_eq!(s.scores[2], 0.0);
        assert!(silhouette(&line(&[0.0, 1.0], &[3, 3])).is_err());
    }

    #[test]
    fn knn_cases() {
        let e = line(&[0.0, 5.0, 2.0, 0.0, 2.0], &[0; 5]);
        assert_eq!(knn_query(&e, 0, 1).unwrap(), vec![(3, 0.0)]);
        assert_eq!(knn_query(&e, 0, 3).unwrap(), vec![(3, 0.0), (2, 2.0), (4, 2.0)]);
        assert!(knn_query(&e, 0, 5).is_err());
        assert!(knn_query(&e, 0, 0).is_err());
    }

    #[test]
    fn manifold_distance_cases() {
        let a = Tensor::from_fn(&[3, 4], |i| i as f64);
        let z = manifold_distance(&a, &a).unwrap();
        assert!(z.per_sample.iter().all(|&d| d == 0.0));
        let mut b = a.clone();
        b.data_mut()[0] += 3.0;
        b.data_mut()[1] += 4.0;
        let m = manifold_distance(&a, &b).unwrap();
        assert_eq!(m.per_sample, vec![5.0, 0.0, 0.0]);
        assert!((m.per_unit - (m.mean * m.mean / 4.0).sqrt()).abs() < 1e-15);
        assert!(manifold_distance(&a, &Tensor::zeros(&[3, 5])).is_err());
    }

    #[test]
    fn per_unit_diagnostic_matches_reference_arithmetic() {
        // a mean distance of 3.57 over 1024 units is about 0.1 per unit
        let clean = Tensor::zeros(&[1, 1024]);
        let mut adv = Tensor::zeros(&[1, 1024]);
        adv.data_mut()[0] = 3.57;
        let m = manifold_distance(&clean, &adv).unwrap();
        assert!((m.per_unit - 0.1116).abs() < 1e-3);
    }

    #[test]
    fn subsample_is_seeded() {
        let e = EmbeddingSet::new(Tensor::from_fn(&[20, 2], |i| i as f64), (0..20).map(|i| i % 2).collect(), "t").unwrap();
        let (a, ka) = e.subsample(5, 3).unwrap();
        let (b, kb) = e.subsample(5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(ka.unwrap().len(), 5);
        assert!(kb.is_some());
        assert!(e.subsample(50, 3).unwrap().1.is_none());
    }
}
