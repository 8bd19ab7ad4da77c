//! Feature, pooling, embedding, loss and metric laboratory.
//!
//! A fused sequence goes through [`features::extract_frame_features`],
//! [`pooling::temporal_pool`], [`pooling::horizontal_pool`] and
//! [`head::embed`]. Nothing is trained: the linear map is the identity and the
//! normalization statistics are estimated from the gallery.

pub mod features;
pub mod head;
pub mod loss;
pub mod metrics;
pub mod pooling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedSample;
use features::extract_frame_features;
use head::{embed, BnNeck, Embedding, LinearMap};
use loss::{combined_objective, cross_entropy_logits, sq_dist, triplet_loss, Triplet, TripletBatch};
use pooling::{horizontal_pool, temporal_pool, StripeFeature};

/// Epsilon used when statistics are fitted from data.
pub const NECK_EPS: f64 = 1e-5;

/// Features → TP → HP for one sequence.
pub fn sequence_feature(frames: &[FusedSample], bands: usize, stripes: usize) -> Result<StripeFeature> {
    let f = extract_frame_features(frames, bands)?;
    let z = temporal_pool(&f);
    let mut s = horizontal_pool(&z, stripes)?;
    Ok(s.remove(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitModel {
    pub weights: LinearMap,
    pub neck: BnNeck,
}

impl GaitModel {
    /// Identity map and passthrough normalization.
    pub fn identity(dim: usize) -> Self {
        GaitModel {
            weights: LinearMap::identity(dim),
            neck: BnNeck::identity(dim),
        }
    }

    /// Identity map; normalization statistics from `reference`.
    pub fn fit(reference: &[StripeFeature]) -> Result<Self> {
        let first = reference
            .first()
            .ok_or_else(|| Error::Embed("no reference features".into()))?;
        let weights = LinearMap::identity(first.len());
        let mapped = reference
            .iter()
            .map(|f| weights.apply(&f.values))
            .collect::<Result<Vec<_>>>()?;
        Ok(GaitModel {
            neck: BnNeck::fit(&mapped, NECK_EPS)?,
            weights,
        })
    }

    pub fn embed(&self, sample_id: &str, identity: &str, f: &StripeFeature) -> Result<Embedding> {
        Embedding::new(sample_id, identity, embed(f, &self.weights, &self.neck)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub cross_entropy: f64,
    pub triplet: f64,
    pub total: f64,
}

/// Training objective evaluated on a labelled set without training.
///
/// Classification logits are negative squared distances to per-identity
/// centroids. Each sample anchors one triplet with its farthest positive and
/// nearest negative (ties by input order). Both terms are averaged over
/// samples. Samples whose identity has no other member anchor no triplet.
pub fn objective(set: &[Embedding], margin: f64, ce_weight: f64, triplet_weight: f64) -> Result<Objective> {
    if set.is_empty() {
        return Err(Error::Loss("objective over an empty set".into()));
    }
    let mut ids: Vec<&str> = set.iter().map(|e| e.identity.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let d = set[0].values.len();
    let mut centroids = vec![vec![0.0; d]; ids.len()];
    let mut counts = vec![0usize; ids.len()];
    let class_of = |e: &Embedding| ids.binary_search(&e.identity.as_str()).expect("identity listed");
    for e in set {
        let k = class_of(e);
        counts[k] += 1;
        for (c, v) in centroids[k].iter_mut().zip(&e.values) {
            *c += v;
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n as f64);
    }
    let mut ce = 0.0;
    for e in set {
        let logits: Vec<f64> = centroids.iter().map(|c| -sq_dist(&e.values, c)).collect();
        ce += cross_entropy_logits(&logits, class_of(e))?;
    }
    ce /= set.len() as f64;

    let mut triplets = Vec::new();
    for (i, a) in set.iter().enumerate() {
        let mut pos: Option<(f64, usize)> = None;
        let mut neg: Option<(f64, usize)> = None;
        for (j, b) in set.iter().enumerate() {
            if i == j {
                continue;
            }
            let dist = sq_dist(&a.values, &b.values);
            if b.identity == a.identity {
                if pos.is_none_or(|(pd, _)| dist > pd) {
                    pos = Some((dist, j));
                }
            } else if neg.is_none_or(|(nd, _)| dist < nd) {
                neg = Some((dist, j));
            }
        }
        if let (Some((_, p)), Some((_, n))) = (pos, neg) {
            triplets.push(Triplet {
                anchor: a.clone(),
                positive: set[p].clone(),
                negative: set[n].clone(),
            });
        }
    }
    let tri = triplet_loss(&TripletBatch::new(triplets, margin)?) / set.len() as f64;
    Ok(Objective {
        cross_entropy: ce,
        triplet: tri,
        total: combined_objective(ce, tri, ce_weight, triplet_weight),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LabelRaster;

    #[test]
    fn sequence_feature_shape() {
        let frames = vec![FusedSample::Crf(LabelRaster::filled(44, 64, 1)); 4];
        let f = sequence_feature(&frames, 64, 16).unwrap();
        assert_eq!((f.stripes, f.channels), (16, 13));
        assert_eq!(f.get(3, 1), 2.0);
        assert_eq!(f.get(3, 0), 0.0);
    }

    #[test]
    fn identity_model_passes_features_through() {
        let f = StripeFeature {
            stripes: 1,
            channels: 2,
            values: vec![0.5, 1.5],
        };
        let e = GaitModel::identity(2).embed("s", "i", &f).unwrap();
        assert_eq!(e.values, f.values);
    }

    #[test]
    fn objective_of_separated_clusters() {
        let set: Vec<Embedding> = (0..4)
            .map(|i| Embedding::new(format!("s{i}"), if i < 2 { "a" } else { "b" }, vec![if i < 2 { 0.0 } else { 10.0 }, i as f64 * 0.01]).unwrap())
            .collect();
        let o = objective(&set, 0.2, 1.0, 1.0).unwrap();
        assert_eq!(o.triplet, 0.0);
        assert!(o.cross_entropy < 1e-9);
        assert_eq!(o.total, o.cross_entropy);
    }
}
