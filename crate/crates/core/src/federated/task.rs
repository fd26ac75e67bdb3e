//! Gaussian-blob classification with a softmax-regression model.
//!
//! The model vector stacks one row of `F` weights plus a bias per class, so
//! `d = C (F + 1)`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskParams {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub samples_per_class: usize,
    /// Distance between any two class means, in units of the cluster std.
    pub separation: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            num_classes: 10,
            feature_dim: 100,
            samples_per_class: 1000,
            separation: 3.0,
        }
    }
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.feature_dim == 0 || self.samples_per_class == 0 {
            return Err(Error::Domain(format!("task sizes must be positive: {self:?}")));
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(Error::Domain(format!("separation must be positive, got {}", self.separation)));
        }
        Ok(())
    }

    pub fn model_dim(&self) -> usize {
        self.num_classes * (self.feature_dim + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningTask {
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Row-major `D x F`.
    pub train_features: Vec<f64>,
    pub train_labels: Vec<usize>,
    pub test_features: Vec<f64>,
    pub test_labels: Vec<usize>,
}

/// Draws class means pairwise `separation` apart (scaled simplex corners when
/// `F >= C`, otherwise random directions), unit-variance isotropic clusters,
/// and an 80/20 train/test split of a shuffled sample.
pub fn make_synthetic_task<R: Rng + ?Sized>(params: &TaskParams, rng: &mut R) -> Result<LearningTask> {
    params.validate()?;
    let (c, f) = (params.num_classes, params.feature_dim);
    let radius = params.separation / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..c)
        .map(|class| {
            if f >= c {
                let mut m = vec![0.0; f];
                m[class] = radius;
                m
            } else {
                let v: Vec<f64> = (0..f).map(|_| StandardNormal.sample(rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.into_iter().map(|x| x / norm * radius).collect()
            }
        })
        .collect();

    let mut samples: Vec<(Vec<f64>, usize)> = Vec::with_capacity(c * params.samples_per_class);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..params.samples_per_class {
            let x = mean
                .iter()
                .map(|m| {
                    let e: f64 = StandardNormal.sample(rng);
                    m + e
                })
                .collect();
            samples.push((x, class));
        }
    }
    samples.shuffle(rng);
    let n_train = (samples.len() * 4).div_ceil(5);
    let mut task = LearningTask {
        num_classes: c,
        feature_dim: f,
        train_features: Vec::with_capacity(n_train * f),
        train_labels: Vec::with_capacity(n_train),
        test_features: Vec::new(),
        test_labels: Vec::new(),
    };
    for (i, (x, y)) in samples.into_iter().enumerate() {
        if i < n_train {
            task.train_features.extend(x);
            task.train_labels.push(y);
        } else {
            task.test_features.extend(x);
            task.test_labels.push(y);
        }
    }
    Ok(task)
}

impl LearningTask {
    pub fn model_dim(&self) -> usize {
        self.num_classes * (self.feature_dim + 1)
    }

    pub fn num_train(&self) -> usize {
        self.train_labels.len()
    }

    fn logits(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let stride = self.feature_dim + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[c * stride..(c + 1) * stride];
            *o = row[..self.feature_dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[self.feature_dim];
        }
    }

    fn softmax_in_place(z: &mut [f64]) {
        let peak = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in z.iter_mut() {
            *v = (*v - peak).exp();
            total += *v;
        }
        z.iter_mut().for_each(|v| *v /= total);
    }

    fn train_row(&self, i: usize) -> &[f64] {
        &self.train_features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// Mean cross-entropy over the given training samples.
    pub fn loss(&self, w: &[f64], indices: &[usize]) -> f64 {
        let mut z = vec![0.0; self.num_classes];
        let mut total = 0.0;
        for &i in indices {
            self.logits(w, self.train_row(i), &mut z);
            let peak = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = peak + z.iter().map(|v| (v - peak).exp()).sum::<f64>().ln();
            total += log_sum - z[self.train_labels[i]];
        }
        total / indices.len().max(1) as f64
    }

    /// Gradient of [`LearningTask::loss`] with respect to `w`.
    pub fn gradient(&self, w: &[f64], indices: &[usize]) -> Vec<f64> {
        let stride = self.feature_dim + 1;
        let mut grad = vec![0.0; self.model_dim()];
        let mut z = vec![0.0; self.num_classes];
        for &i in indices {
            let x = self.train_row(i);
            self.logits(w, x, &mut z);
            Self::softmax_in_place(&mut z);
            z[self.train_labels[i]] -= 1.0;
            for (c, &err) in z.iter().enumerate() {
                let row = &mut grad[c * stride..(c + 1) * stride];
                for (g, xj) in row[..self.feature_dim].iter_mut().zip(x) {
                    *g += err * xj;
                }
                row[self.feature_dim] += err;
            }
        }
        let scale = 1.0 / indices.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        grad
    }

    /// Fraction of test samples whose largest logit is the true class.
    pub fn accuracy(&self, w: &[f64]) -> f64 {
        if self.test_labels.is_empty() {
            return 1.0;
        }
        let mut z = vec![0.0; self.num_classes];
        let correct = self
            .test_labels
            .iter()
            .enumerate()
            .filter(|(i, &y)| {
                let x = &self.test_features[i * self.feature_dim..(i + 1) * self.feature_dim];
                self.logits(w, x, &mut z);
                let best = z
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc });
                best.0 == y
            })
            .count();
        correct as f64 / self.test_labels.len() as f64
    }
}
