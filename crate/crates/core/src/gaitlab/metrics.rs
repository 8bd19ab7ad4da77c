//! Retrieval metrics: Rank-k, mAP and mINP over euclidean rankings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gaitlab::head::Embedding;
use crate::gaitlab::loss::sq_dist;

/// Whether a gallery item with the probe's own sample id may be retrieved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfMatch {
    /// Every gallery item competes, including the probe itself.
    #[default]
    Include,
    /// Gallery items sharing the probe's sample id are dropped.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub probes: usize,
    pub gallery: usize,
    pub rank1: f64,
    pub rank5: f64,
    pub map: f64,
    pub minp: f64,
}

/// Per-probe retrieval outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    /// 1-based rank of the first correct match.
    pub first_hit: usize,
    pub average_precision: f64,
    pub inverse_negative_penalty: f64,
}

impl ProbeResult {
    /// Scores a ranked relevance list (true = same identity).
    pub fn from_ranking(relevant: &[bool]) -> Option<ProbeResult> {
        let positives = relevant.iter().filter(|&&r| r).count();
        if positives == 0 {
            return None;
        }
        let mut hits = 0usize;
        let mut ap = 0.0;
        let mut first_hit = 0;
        let mut last_hit = 0;
        for (i, &r) in relevant.iter().enumerate() {
            if r {
                hits += 1;
                ap += hits as f64 / (i + 1) as f64;
                if first_hit == 0 {
                    first_hit = i + 1;
                }
                last_hit = i + 1;
            }
        }
        Some(ProbeResult {
            first_hit,
            average_precision: ap / positives as f64,
            inverse_negative_penalty: positives as f64 / last_hit as f64,
        })
    }
}

/// Ranks `gallery` by euclidean distance to `probe`; ties keep gallery order.
pub fn rank_gallery(probe: &Embedding, gallery: &[Embedding], self_match: SelfMatch) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = gallery
        .iter()
        .enumerate()
        .filter(|(_, g)| self_match == SelfMatch::Include || g.sample_id != probe.sample_id)
        .map(|(i, g)| (sq_dist(&probe.values, &g.values), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx.into_iter().map(|(_, i)| i).collect()
}

pub fn evaluate(gallery: &[Embedding], probe: &[Embedding], self_match: SelfMatch, exec: Exec) -> Result<EvalReport> {
    let first = gallery
        .first()
        .ok_or_else(|| Error::Evaluation("gallery is empty".into()))?;
    if probe.is_empty() {
        return Err(Error::Evaluation("probe set is empty".into()));
    }
    let d = first.values.len();
    if let Some(e) = gallery.iter().chain(probe).find(|e| e.values.len() != d) {
        return Err(Error::Evaluation(format!(
            "{} has dimension {}, expected {d}",
            e.sample_id,
            e.values.len()
        )));
    }
    let results = exec.try_map(probe, |p| {
        let order = rank_gallery(p, gallery, self_match);
        let relevant: Vec<bool> = order.iter().map(|&i| gallery[i].identity == p.identity).collect();
        ProbeResult::from_ranking(&relevant).ok_or_else(|| {
            Error::Evaluation(format!(
                "probe {} has identity {} with no gallery match",
                p.sample_id, p.identity
            ))
        })
    })?;
    let n = results.len() as f64;
    let frac = |k: usize| results.iter().filter(|r| r.first_hit <= k).count() as f64 / n;
    Ok(EvalReport {
        probes: results.len(),
        gallery: gallery.len(),
        rank1: frac(1),
        rank5: frac(5),
        map: results.iter().map(|r| r.average_precision).sum::<f64>() / n,
        minp: results.iter().map(|r| r.inverse_negative_penalty).sum::<f64>() / n,
    })
}
