//! One-vs-rest linear SVM, class balancing and macro-averaged metrics.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

use super::{Label, N_CLASSES};

/// Resamples every class present in `items` to exactly `target` members.
///
/// Larger classes are subsampled without replacement, smaller ones drawn
/// with replacement. Output is grouped by ascending label.
pub fn balance_classes<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> Label,
    target: usize,
    seed: u64,
) -> Vec<T> {
    let mut by_class: BTreeMap<Label, Vec<&T>> = BTreeMap::new();
    for it in items {
        by_class.entry(label(it)).or_default().push(it);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(by_class.len() * target);
    for members in by_class.values() {
        if members.len() >= target {
            let mut picked = index::sample(&mut rng, members.len(), target).into_vec();
            picked.sort_unstable();
            out.extend(picked.into_iter().map(|i| members[i].clone()));
        } else {
            out.extend((0..target).map(|_| members[rng.random_range(0..members.len())].clone()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// L2 penalty.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 30,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub dim: usize,
    /// Per-feature centre and scale applied before scoring.
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    /// One weight vector per class, labels `1..=N_CLASSES`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Most frequent training label; returned for all-zero inputs.
    pub majority: Label,
}

impl SvmModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardize(x);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, &z) + b)
            .collect()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Highest-scoring class; ties go to the lowest label.
    pub fn classify(&self, x: &[f64]) -> Label {
        if x.iter().all(|&v| v == 0.0) {
            return self.majority;
        }
        let scores = self.scores(x);
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        best as Label + 1
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pegasos-style subgradient descent on the hinge loss, one binary problem
/// per class with an unregularized bias.
pub fn train_svm(vectors: &[Vec<f64>], labels: &[Label], config: &SvmConfig) -> Result<SvmModel> {
    ensure!(
        vectors.len() == labels.len(),
        InvalidArgument,
        "{} vectors but {} labels",
        vectors.len(),
        labels.len()
    );
    ensure!(config.lambda > 0.0, Config, "SVM lambda must be positive");
    ensure!(
        labels.iter().all(|&l| (1..=N_CLASSES as Label).contains(&l)),
        InvalidArgument,
        "labels must lie in 1..={N_CLASSES}"
    );
    let mut hist = [0usize; N_CLASSES];
    for &l in labels {
        hist[l as usize - 1] += 1;
    }
    ensure!(
        hist.iter().filter(|&&c| c > 0).count() >= 2,
        InvalidArgument,
        "need at least two distinct labels to train"
    );
    let majority = (0..N_CLASSES).max_by_key(|&k| (hist[k], std::cmp::Reverse(k))).unwrap() as Label + 1;

    let dim = vectors[0].len();
    ensure!(
        vectors.iter().all(|v| v.len() == dim),
        InvalidArgument,
        "vectors have inconsistent dimensions"
    );
    let n = vectors.len() as f64;
    let shift: Vec<f64> = (0..dim).map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            let var = vectors.iter().map(|v| (v[j] - shift[j]).powi(2)).sum::<f64>() / n;
            if var > 1e-24 { var.sqrt() } else { 1.0 }
        })
        .collect();
    let z: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(shift.iter().zip(&scale)).map(|(x, (m, s))| (x - m) / s).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut weights = vec![vec![0.0; dim]; N_CLASSES];
    let mut bias = vec![0.0; N_CLASSES];
    let mut t = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (config.lambda * (t as f64 + 1.0 / config.lambda).max(1.0));
            for k in 0..N_CLASSES {
                let y = if labels[i] as usize == k + 1 { 1.0 } else { -1.0 };
                let margin = y * (dot(&weights[k], &z[i]) + bias[k]);
                let decay = 1.0 - eta * config.lambda;
                weights[k].iter_mut().for_each(|w| *w *= decay);
                if margin < 1.0 {
                    for (w, x) in weights[k].iter_mut().zip(&z[i]) {
                        *w += eta * y * x;
                    }
                    bias[k] += eta * y;
                }
            }
        }
    }
    ensure!(
        weights.iter().flatten().chain(&bias).all(|w| w.is_finite()),
        Numerical,
        "SVM weights diverged"
    );
    Ok(SvmModel {
        dim,
        shift,
        scale,
        weights,
        bias,
        majority,
    })
}

/// Macro-averaged scores over the classes seen in either input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub f1: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Per-class precision and recall are 0 when undefined.
pub fn classification_metrics(predicted: &[Label], actual: &[Label]) -> Result<ClassifierMetrics> {
    ensure!(
        predicted.len() == actual.len() && !actual.is_empty(),
        InvalidArgument,
        "need equally many predictions and labels, got {} and {}",
        predicted.len(),
        actual.len()
    );
    let mut classes: Vec<Label> = predicted.iter().chain(actual).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let correct = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for &c in &classes {
        let tp = predicted.iter().zip(actual).filter(|&(&p, &a)| p == c && a == c).count() as f64;
        let pred_c = predicted.iter().filter(|&&p| p == c).count() as f64;
        let true_c = actual.iter().filter(|&&a| a == c).count() as f64;
        let p = if pred_c > 0.0 { tp / pred_c } else { 0.0 };
        let r = if true_c > 0.0 { tp / true_c } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        p_sum += p;
        r_sum += r;
        f_sum += f;
    }
    let k = classes.len() as f64;
    Ok(ClassifierMetrics {
        f1: f_sum / k,
        accuracy: correct as f64 / actual.len() as f64,
        precision: p_sum / k,
        recall: r_sum / k,
    })
}

pub fn evaluate_classifier(
    model: &SvmModel,
    vectors: &[Vec<f64>],
    labels: &[Label],
) -> Result<ClassifierMetrics> {
    let predicted: Vec<Label> = vectors.iter().map(|v| model.classify(v)).collect();
    classification_metrics(&predicted, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn histogram(labels: impl IntoIterator<Item = Label>) -> BTreeMap<Label, usize> {
        let mut h = BTreeMap::new();
        for l in labels {
            *h.entry(l).or_default() += 1;
        }
        h
    }

    #[test]
    fn balancing_rules() {
        let items: Vec<(u32, Label)> = (0..50).map(|i| (i, (i % 5) as Label + 1)).collect();
        let out = balance_classes(&items, |x| x.1, 10, 3);
        let mut a = out.clone();
        let mut b = items.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);

        let mut items: Vec<(u32, Label)> = (0..3).map(|i| (i, 1)).collect();
        items.extend((100..120).map(|i| (i, 2)));
        let out = balance_classes(&items, |x| x.1, 10, 3);
        assert_eq!(histogram(out.iter().map(|x| x.1)), BTreeMap::from([(1, 10), (2, 10)]));
        let ones: Vec<u32> = out.iter().filter(|x| x.1 == 1).map(|x| x.0).collect();
        assert!(ones.iter().all(|&i| i < 3));
        let mut twos: Vec<u32> = out.iter().filter(|x| x.1 == 2).map(|x| x.0).collect();
        twos.dedup();
        assert_eq!(twos.len(), 10);
        assert_eq!(out, balance_classes(&items, |x| x.1, 10, 3));
    }

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let (c, label) = if i % 2 == 0 { ([2.0, 2.0], 1) } else { ([-2.0, -1.0], 3) };
            xs.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
            ys.push(label);
        }
        (xs, ys)
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (xs, ys) = blobs(200, 5);
        let m = train_svm(&xs, &ys, &SvmConfig::default()).unwrap();
        let acc = evaluate_classifier(&m, &xs, &ys).unwrap().accuracy;
        assert_eq!(acc, 1.0);
        assert_eq!(m.weights.len(), N_CLASSES);
        assert_eq!(m, train_svm(&xs, &ys, &SvmConfig::default()).unwrap());
    }

    #[test]
    fn degenerate_inputs() {
        let xs = vec![vec![0.0, 0.0]; 5];
        let m = train_svm(&xs, &[2, 2, 2, 4, 4], &SvmConfig::default()).unwrap();
        assert_eq!(m.classify(&[0.0, 0.0]), 2);
        assert!(train_svm(&xs, &[3; 5], &SvmConfig::default()).is_err());
        assert!(train_svm(&xs, &[0, 1, 1, 1, 1], &SvmConfig::default()).is_err());
    }

    #[test]
    fn ties_go_to_lowest_label() {
        let m = SvmModel {
            dim: 1,
            shift: vec![0.0],
            scale: vec![1.0],
            weights: vec![vec![0.0]; N_CLASSES],
            bias: vec![0.0, 1.0, 1.0, 0.0, 1.0],
            majority: 1,
        };
        assert_eq!(m.classify(&[1.0]), 2);
    }

    #[test]
    fn metric_cases() {
        let y = [1, 2, 3, 4, 5, 1, 2, 3, 4, 5];
        let m = classification_metrics(&y, &y).unwrap();
        assert_eq!((m.f1, m.accuracy, m.precision, m.recall), (1.0, 1.0, 1.0, 1.0));
        let m = classification_metrics(&[1; 10], &y).unwrap();
        assert_eq!(m.accuracy, 0.2);
        assert_eq!(m.recall, 0.2);
        assert!(classification_metrics(&[], &[]).is_err());
    }
}
