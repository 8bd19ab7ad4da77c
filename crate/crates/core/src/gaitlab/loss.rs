//! Cross-entropy and triplet losses with analytic gradients.

use crate::error::{Error, Result};
use crate::gaitlab::head::Embedding;

/// Distance to the hinge kink below which the triplet gradient is refused.
pub const KINK_TOLERANCE: f64 = 1e-6;

/// `-ln(p[label])` for a probability vector.
pub fn cross_entropy(predicted: &[f64], label: usize) -> Result<f64> {
    if label >= predicted.len() {
        return Err(Error::Loss(format!(
            "label {label} out of range for {} classes",
            predicted.len()
        )));
    }
    if predicted.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Loss("probabilities must be finite and non-negative".into()));
    }
    let sum: f64 = predicted.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Loss(format!("probabilities sum to {sum}, not 1")));
    }
    // -ln(1) is -0.0; report +0.
    Ok((-predicted[label].ln()).max(0.0))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn check_logits(logits: &[f64], label: usize) -> Result<()> {
    if label >= logits.len() {
        return Err(Error::Loss(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Loss("non-finite logit".into()));
    }
    Ok(())
}

/// Cross-entropy of `softmax(logits)`, computed as logsumexp minus the label
/// logit.
pub fn cross_entropy_logits(logits: &[f64], label: usize) -> Result<f64> {
    check_logits(logits, label)?;
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    Ok((lse - logits[label]).max(0.0))
}

/// d CE / d logits = softmax - onehot.
pub fn cross_entropy_gradient(logits: &[f64], label: usize) -> Result<Vec<f64>> {
    check_logits(logits, label)?;
    let mut g = softmax(logits);
    g[label] -= 1.0;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub anchor: Embedding,
    pub positive: Embedding,
    pub negative: Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    triplets: Vec<Triplet>,
    margin: f64,
}

impl TripletBatch {
    pub fn new(triplets: Vec<Triplet>, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::Loss(format!("margin must be positive, got {margin}")));
        }
        for (i, t) in triplets.iter().enumerate() {
            if t.anchor.identity != t.positive.identity {
                return Err(Error::Loss(format!("triplet {i}: positive has another identity")));
            }
            if t.anchor.identity == t.negative.identity {
                return Err(Error::Loss(format!("triplet {i}: negative shares the anchor identity")));
            }
            let d = t.anchor.values.len();
            if t.positive.values.len() != d || t.negative.values.len() != d {
                return Err(Error::Loss(format!("triplet {i}: dimension mismatch")));
            }
            let all = [&t.anchor, &t.positive, &t.negative];
            if all.iter().any(|e| e.values.iter().any(|v| !v.is_finite())) {
                return Err(Error::Loss(format!("triplet {i}: non-finite embedding")));
            }
        }
        Ok(TripletBatch { triplets, margin })
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Hinge argument `d²(a,p) - d²(a,n) + margin` per triplet.
    pub fn hinge_arguments(&self) -> Vec<f64> {
        self.triplets
            .iter()
            .map(|t| sq_dist(&t.anchor.values, &t.positive.values) - sq_dist(&t.anchor.values, &t.negative.values) + self.margin)
            .collect()
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum over triplets of `max(0, d²(a,p) - d²(a,n) + margin)`.
pub fn triplet_loss(batch: &TripletBatch) -> f64 {
    batch.hinge_arguments().into_iter().map(|h| h.max(0.0)).sum()
}

/// Gradient of one triplet's term with respect to its three embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGradient {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

pub fn triplet_gradient(batch: &TripletBatch) -> Result<Vec<TripletGradient>> {
    let hinge = batch.hinge_arguments();
    batch
        .triplets
        .iter()
        .zip(hinge)
        .enumerate()
        .map(|(i, (t, h))| {
            if h.abs() <= KINK_TOLERANCE {
                return Err(Error::NonDifferentiable(format!(
                    "triplet {i} hinge argument {h:e} is within {KINK_TOLERANCE:e} of the kink"
                )));
            }
            let d = t.anchor.values.len();
            if h < 0.0 {
                return Ok(TripletGradient {
                    anchor: vec![0.0; d],
                    positive: vec![0.0; d],
                    negative: vec![0.0; d],
                });
            }
            let (a, p, n) = (&t.anchor.values, &t.positive.values, &t.negative.values);
            Ok(TripletGradient {
                anchor: (0..d).map(|k| 2.0 * (n[k] - p[k])).collect(),
                positive: (0..d).map(|k| 2.0 * (p[k] - a[k])).collect(),
                negative: (0..d).map(|k| 2.0 * (a[k] - n[k])).collect(),
            })
        })
        .collect()
}

pub enum LossInput<'a> {
    CrossEntropy { logits: &'a [f64], label: usize },
    Triplet(&'a TripletBatch),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossGradient {
    Logits(Vec<f64>),
    Triplets(Vec<TripletGradient>),
}

pub fn loss_gradient(input: LossInput<'_>) -> Result<LossGradient> {
    match input {
        LossInput::CrossEntropy { logits, label } => cross_entropy_gradient(logits, label).map(LossGradient::Logits),
        LossInput::Triplet(b) => triplet_gradient(b).map(LossGradient::Triplets),
    }
}

/// Weighted objective `w_ce * ce + w_tri * triplet`.
pub fn combined_objective(ce: f64, triplet: f64, ce_weight: f64, triplet_weight: f64) -> f64 {
    ce_weight * ce + triplet_weight * triplet
}
