//! Ranking metrics: ROC AUC, average precision, precision@K.
//!
//! Wherever a ranking decides the outcome, equal scores are ordered by
//! ascending node id.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::injector::{AnomalyKind, GroundTruth};
use crate::scalar::Scalar;
use crate::scoring::ScoreTable;

fn check_lengths<T>(scores: &[T], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

fn as_f64<T: Scalar>(scores: &[T]) -> Result<Vec<f64>> {
    scores
        .iter()
        .map(|s| {
            let v = s.as_f64();
            if v.is_nan() {
                Err(Error::UndefinedMetric("NaN score".into()))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Indices by descending score, ties by ascending index.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Area under the ROC curve with tied scores counted as half a win
/// (midrank form of the Mann-Whitney statistic).
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC AUC needs both positive and negative labels".into(),
        ));
    }
    let s = as_f64(scores)?;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && s[idx[j + 1]] == s[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// ROC curve points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per
/// distinct score threshold.
pub fn roc_curve<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::UndefinedMetric(
            "ROC curve needs both positive and negative labels".into(),
        ));
    }
    let s = as_f64(scores)?;
    let order = ranking(&s);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (i, &k) in order.iter().enumerate() {
        if labels[k] {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        let last_of_tie = order.get(i + 1).is_none_or(|&next| s[next] != s[k]);
        if last_of_tie {
            points.push((fp / neg, tp / pos));
        }
    }
    Ok(points)
}

/// Mean of precision@rank over the ranks holding positives.
pub fn average_precision<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let total = labels.iter().filter(|&&l| l).count();
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs at least one positive".into(),
        ));
    }
    let order = ranking(&as_f64(scores)?);
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &k) in order.iter().enumerate() {
        if labels[k] {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Ok(sum / total as f64)
}

/// Fraction of positives among the `k` highest scores.
pub fn precision_at_k<T: Scalar>(scores: &[T], labels: &[bool], k: usize) -> Result<f64> {
    check_lengths(scores, labels)?;
    if k == 0 || k > scores.len() {
        return Err(Error::NodeRange {
            id: k as i64,
            node_count: scores.len(),
        });
    }
    let order = ranking(&as_f64(scores)?);
    let hits = order[..k].iter().filter(|&&i| labels[i]).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub positives: usize,
    pub auc: f64,
    pub auprc: f64,
    /// Keyed by K.
    pub precision_at_k: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub auprc: f64,
    pub precision_at_k: BTreeMap<usize, f64>,
    pub roc_points: Vec<(f64, f64)>,
    /// Topology anomalies against non-anomalous nodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<MetricSet>,
    /// Attribute anomalies against non-anomalous nodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribute: Option<MetricSet>,
}

impl EvalReport {
    pub fn write_roc_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "fpr,tpr")?;
        for (f, t) in &self.roc_points {
            writeln!(w, "{f},{t}")?;
        }
        Ok(())
    }
}

pub const DEFAULT_K_LIST: [usize; 6] = [50, 100, 150, 200, 250, 300];

/// Keeps the K values not exceeding the anomaly count (and the node count);
/// falls back to the anomaly count itself when none survive.
pub fn clip_k_list(k_list: &[usize], positives: usize, n: usize) -> Vec<usize> {
    let cap = positives.min(n);
    let mut ks: Vec<usize> = k_list.iter().copied().filter(|&k| k >= 1 && k <= cap).collect();
    if ks.is_empty() && cap >= 1 {
        ks.push(cap);
    }
    ks.sort_unstable();
    ks.dedup();
    ks
}

fn precision_map(scores: &[f64], labels: &[bool], ks: &[usize]) -> Result<BTreeMap<usize, f64>> {
    ks.iter()
        .map(|&k| Ok((k, precision_at_k(scores, labels, k)?)))
        .collect()
}

/// Per-kind metrics. AUC and AP use only the kind's anomalies plus normal
/// nodes; precision@K ranks the whole population and counts only the
/// kind's anomalies as hits.
fn kind_metrics(scores: &[f64], truth: &GroundTruth, kind: AnomalyKind, k_list: &[usize]) -> Result<Option<MetricSet>> {
    let positives = truth.count(kind);
    if positives == 0 || truth.count(AnomalyKind::None) == 0 {
        return Ok(None);
    }
    let mut sub_scores = Vec::new();
    let mut sub_labels = Vec::new();
    for (i, &s) in scores.iter().enumerate() {
        match truth.kind(i) {
            k if k == kind => {
                sub_scores.push(s);
                sub_labels.push(true);
            }
            AnomalyKind::None => {
                sub_scores.push(s);
                sub_labels.push(false);
            }
            _ => {}
        }
    }
    let full_labels: Vec<bool> = truth.kinds().iter().map(|&k| k == kind).collect();
    let ks = clip_k_list(k_list, positives, scores.len());
    Ok(Some(MetricSet {
        positives,
        auc: roc_auc(&sub_scores, &sub_labels)?,
        auprc: average_precision(&sub_scores, &sub_labels)?,
        precision_at_k: precision_map(scores, &full_labels, &ks)?,
    }))
}

/// All metrics for the fused score, overall and per anomaly kind.
pub fn evaluate<T: Scalar>(table: &ScoreTable<T>, truth: &GroundTruth, k_list: &[usize]) -> Result<EvalReport> {
    evaluate_scores(&table.final_score, truth, k_list)
}

pub fn evaluate_scores<T: Scalar>(scores: &[T], truth: &GroundTruth, k_list: &[usize]) -> Result<EvalReport> {
    let labels = truth.labels();
    check_lengths(scores, &labels)?;
    let s = as_f64(scores)?;
    let ks = clip_k_list(k_list, truth.anomaly_count(), s.len());
    Ok(EvalReport {
        auc: roc_auc(&s, &labels)?,
        auprc: average_precision(&s, &labels)?,
        precision_at_k: precision_map(&s, &labels, &ks)?,
        roc_points: roc_curve(&s, &labels)?,
        topology: kind_metrics(&s, truth, AnomalyKind::Topology, k_list)?,
        attribute: kind_metrics(&s, truth, AnomalyKind::Attribute, k_list)?,
    })
}
