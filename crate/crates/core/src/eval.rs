//! Classification metrics against labels, and memorization audit summaries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::content::SimilarityResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: String,
    pub score: f64,
    pub label: bool,
}

/// Scores with binary labels; ids unique, scores finite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredSet {
    pairs: Vec<Scored>,
}

impl ScoredSet {
    pub fn new(pairs: Vec<Scored>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &pairs {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
            if !p.score.is_finite() {
                return Err(Error::InvalidData(format!(
                    "score of {} is not finite",
                    p.id
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// Build from parallel slices, ids are positions.
    pub fn from_slices(scores: &[f64], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        Self::new(
            scores
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (&score, &label))| Scored {
                    id: i.to_string(),
                    score,
                    label,
                })
                .collect(),
        )
    }

    pub fn pairs(&self) -> &[Scored] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.label).count()
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from midranks.
pub fn auc(set: &ScoredSet) -> Result<f64> {
    let pos = set.positives();
    let neg = set.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidData(format!(
            "AUC needs both classes ({pos} positive, {neg} negative)"
        )));
    }
    let mut order: Vec<&Scored> = set.pairs.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score));
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && order[j + 1].score == order[i].score {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|p| p.label).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    /// 0 when precision + recall is 0.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64
        }
    }
}

/// Predictions are positive iff `score >= threshold`.
pub fn confusion_at(set: &ScoredSet, threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for p in &set.pairs {
        match (p.score >= threshold, p.label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn f1_at(set: &ScoredSet, threshold: f64) -> f64 {
    confusion_at(set, threshold).f1()
}

/// Highest F1 over the observed scores and `+inf` as thresholds; the lowest
/// threshold wins ties. Returns `(threshold, f1)`.
pub fn best_f1(set: &ScoredSet) -> (f64, f64) {
    let mut sorted: Vec<&Scored> = set.pairs.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let total_pos = set.positives();
    // Walking thresholds upward: everything at index >= i is predicted positive.
    let mut best = (f64::INFINITY, 0.0);
    let mut pos_below = 0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        let tp = total_pos - pos_below;
        let predicted = sorted.len() - i;
        let fp = predicted - tp;
        let fn_ = pos_below;
        let f1 = if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        if f1 > best.1 || (f1 == best.1 && t < best.0) {
            best = (t, f1);
        }
        while i < sorted.len() && sorted[i].score == t {
            pos_below += usize::from(sorted[i].label);
            i += 1;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestF1 {
    pub threshold: f64,
    pub f1: f64,
}

/// AUC, best F1, and optionally F1 at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub n: usize,
    pub positives: usize,
    pub auc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_at_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Confusion>,
    pub best_f1: BestF1,
}

pub fn evaluate(set: &ScoredSet, threshold: Option<f64>) -> Result<Evaluation> {
    let auc = auc(set)?;
    let (t, f1) = best_f1(set);
    let confusion = threshold.map(|t| confusion_at(set, t));
    Ok(Evaluation {
        n: set.len(),
        positives: set.positives(),
        auc,
        threshold,
        f1_at_threshold: confusion.map(|c| c.f1()),
        confusion,
        best_f1: BestF1 { threshold: t, f1 },
    })
}

/// Thresholds and OFS settings for memorization audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub gsscd_threshold: f64,
    pub ofs_threshold: f64,
    pub k: usize,
    pub nmf_enabled: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            gsscd_threshold: 0.4,
            ofs_threshold: 0.5,
            k: 3,
            nmf_enabled: true,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gsscd_threshold", self.gsscd_threshold),
            ("ofs_threshold", self.ofs_threshold),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} outside [-1, 1]"
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Best training match for one generated item under one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchOutcome {
    pub train_id: String,
    #[serde(flatten)]
    pub result: SimilarityResult,
    pub memorized: bool,
}

/// One generated item's comparison against the training set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub gen_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content: Option<MatchOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion: Option<MatchOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemorizationStats {
    /// Share of items at or above the threshold, in percent.
    pub percent_memorized: f64,
    /// Mean score over all items, memorized or not.
    pub mean_similarity: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditSummary {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content: Option<MemorizationStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion: Option<MemorizationStats>,
}

fn stats(scores: impl Iterator<Item = f64>, threshold: f64) -> Option<MemorizationStats> {
    let (mut count, mut hits, mut sum) = (0usize, 0usize, 0.0f64);
    for s in scores {
        count += 1;
        hits += usize::from(s >= threshold);
        sum += s;
    }
    (count > 0).then(|| MemorizationStats {
        percent_memorized: 100.0 * hits as f64 / count as f64,
        mean_similarity: sum / count as f64,
        count,
    })
}

pub fn summarize(records: &[AuditRecord], cfg: &AuditConfig) -> Result<AuditSummary> {
    if records.is_empty() {
        return Err(Error::Empty("audit records".into()));
    }
    Ok(AuditSummary {
        n: records.len(),
        content: stats(
            records
                .iter()
                .filter_map(|r| r.content.as_ref())
                .map(|m| m.result.score),
            cfg.gsscd_threshold,
        ),
        motion: stats(
            records
                .iter()
                .filter_map(|r| r.motion.as_ref())
                .map(|m| m.result.score),
            cfg.ofs_threshold,
        ),
    })
}
