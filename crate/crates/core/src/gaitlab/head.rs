//! Embedding head: flatten, linear map, then per-dimension standardization
//! with an affine (the inference-time role of a BNNeck).

use crate::error::{Error, Result};
use crate::gaitlab::pooling::StripeFeature;

/// Dense `out × in` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl LinearMap {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != weights.len() {
            return Err(Error::Embed(format!(
                "{rows}x{cols} map cannot hold {} weights",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Embed("non-finite weight".into()));
        }
        Ok(LinearMap { rows, cols, weights })
    }

    pub fn identity(n: usize) -> Self {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        LinearMap {
            rows: n,
            cols: n,
            weights: w,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinearMap {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Embed(format!(
                "input has {} values, map expects {}",
                x.len(),
                self.cols
            )));
        }
        Ok(self
            .weights
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }
}

/// `y = gamma * (x - mean) / sqrt(var + eps) + beta`, per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BnNeck {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
}

impl BnNeck {
    /// Zero mean, unit variance, identity affine, `eps = 0`: a passthrough.
    pub fn identity(d: usize) -> Self {
        BnNeck {
            mean: vec![0.0; d],
            var: vec![1.0; d],
            gamma: vec![1.0; d],
            beta: vec![0.0; d],
            eps: 0.0,
        }
    }

    /// Running statistics estimated from `samples` (population variance),
    /// identity affine.
    pub fn fit(samples: &[Vec<f64>], eps: f64) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Embed("cannot fit statistics on no samples".into()))?;
        let d = first.len();
        if samples.iter().any(|s| s.len() != d) {
            return Err(Error::Embed("samples differ in dimension".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::Embed(format!("fit needs eps > 0, got {eps}")));
        }
        let n = samples.len() as f64;
        let mut mean = vec![0.0; d];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        Ok(BnNeck {
            mean,
            var,
            gamma: vec![1.0; d],
            beta: vec![0.0; d],
            eps,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if [self.var.len(), self.gamma.len(), self.beta.len(), x.len()]
            .iter()
            .any(|&l| l != d)
        {
            return Err(Error::Embed(format!(
                "normalization of dimension {d} applied to {} values",
                x.len()
            )));
        }
        (0..d)
            .map(|i| {
                let den = (self.var[i] + self.eps).sqrt();
                if !(den > 0.0) {
                    return Err(Error::Embed(format!("dimension {i} has zero variance and eps")));
                }
                Ok(self.gamma[i] * (x[i] - self.mean[i]) / den + self.beta[i])
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub sample_id: String,
    pub identity: String,
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(sample_id: impl Into<String>, identity: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embed("embedding must be non-empty and finite".into()));
        }
        Ok(Embedding {
            sample_id: sample_id.into(),
            identity: identity.into(),
            values,
        })
    }
}

/// Flatten (stripe-major), apply `weights`, then `neck`.
pub fn embed(f_prime: &StripeFeature, weights: &LinearMap, neck: &BnNeck) -> Result<Vec<f64>> {
    let y = weights.apply(&f_prime.values)?;
    neck.apply(&y)
}
