//! Manifest-level audits: load every referenced file, search the training
//! set for each generated item, and join scores with labels.

use std::collections::HashMap;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::content::{best_match, BestMatch};
use crate::detection::{aggregate, magnitude_series_prefix, AggregationStrategy, MagnitudeSeries};
use crate::error::{Error, Result};
use crate::eval::{AuditConfig, AuditRecord, MatchOutcome, Scored, ScoredSet};
use crate::io::{
    load_trajectory, DatasetManifest, EmbeddingSequence, FlowSequence, LabelFile, LatentTrajectory,
    ManifestEntry,
};
use crate::motion::{ofs_batch_prepared, NmfConfig, PreparedFlows};

/// Default tile edge for blocked similarity scans.
pub const DEFAULT_BLOCK: usize = 1024;

fn required<'a>(
    e: &'a ManifestEntry,
    field: &'static str,
    get: impl Fn(&ManifestEntry) -> &Option<PathBuf>,
) -> Result<&'a PathBuf> {
    get(e).as_ref().ok_or_else(|| Error::MissingField {
        id: e.id.clone(),
        field,
    })
}

pub fn load_embeddings(m: &DatasetManifest) -> Result<Vec<EmbeddingSequence>> {
    if m.is_empty() {
        return Err(Error::Empty("manifest".into()));
    }
    m.entries
        .par_iter()
        .map(|e| {
            EmbeddingSequence::load(&e.id, required(e, "embedding_path", |e| &e.embedding_path)?)
        })
        .collect()
}

pub fn load_flows(m: &DatasetManifest) -> Result<Vec<FlowSequence>> {
    if m.is_empty() {
        return Err(Error::Empty("manifest".into()));
    }
    m.entries
        .par_iter()
        .map(|e| FlowSequence::load(&e.id, required(e, "flow_path", |e| &e.flow_path)?))
        .collect()
}

/// Trajectories keep the manifest id rather than the directory name.
pub fn load_trajectories(m: &DatasetManifest) -> Result<Vec<LatentTrajectory>> {
    if m.is_empty() {
        return Err(Error::Empty("manifest".into()));
    }
    m.entries
        .par_iter()
        .map(|e| {
            let t = load_trajectory(required(e, "latent_dir", |e| &e.latent_dir)?)?;
            LatentTrajectory::new(e.id.clone(), t.steps().to_vec())
        })
        .collect()
}

fn outcome(m: BestMatch, threshold: f64) -> MatchOutcome {
    MatchOutcome {
        train_id: m.train_id,
        memorized: m.result.score >= threshold,
        result: m.result,
    }
}

/// GSSCD best match of every generated video, flagged at `cfg.gsscd_threshold`.
pub fn audit_content(
    gen: &[EmbeddingSequence],
    train: &[EmbeddingSequence],
    cfg: &AuditConfig,
    block_frames: usize,
) -> Result<Vec<AuditRecord>> {
    cfg.validate()?;
    gen.iter()
        .map(|g| {
            Ok(AuditRecord {
                gen_id: g.video_id().to_string(),
                content: Some(outcome(
                    best_match(g, train, block_frames)?,
                    cfg.gsscd_threshold,
                )),
                motion: None,
            })
        })
        .collect()
}

/// OFS-k best match of every generated flow video, flagged at
/// `cfg.ofs_threshold`.
pub fn audit_motion(
    gen: &[FlowSequence],
    train: &[FlowSequence],
    cfg: &AuditConfig,
    nmf: &NmfConfig,
) -> Result<Vec<AuditRecord>> {
    cfg.validate()?;
    nmf.validate()?;
    let index: Vec<PreparedFlows> = train
        .par_iter()
        .map(|s| PreparedFlows::new(s, nmf))
        .collect();
    gen.iter()
        .map(|g| {
            let g = PreparedFlows::new(g, nmf);
            Ok(AuditRecord {
                gen_id: g.video_id().to_string(),
                content: None,
                motion: Some(outcome(
                    ofs_batch_prepared(&g, &index, cfg.k, cfg.nmf_enabled)?,
                    cfg.ofs_threshold,
                )),
            })
        })
        .collect()
}

/// Aggregated `(content, motion)` signals of one trajectory, with the per-step
/// magnitudes of the steps the strategy reads. Later steps are never touched.
pub fn detect(
    traj: &LatentTrajectory,
    strategy: AggregationStrategy,
) -> Result<(MagnitudeSeries, (f64, f64))> {
    let total = traj.steps().len();
    let n = strategy.steps_used(total);
    if n == 0 || n > total {
        return Err(Error::InvalidParameter(format!(
            "{strategy:?} needs {n} steps, trajectory {} has {total}",
            traj.trajectory_id()
        )));
    }
    let series = magnitude_series_prefix(traj, n)?;
    let signals = aggregate(&series, strategy)?;
    Ok((series, signals))
}

/// Pairs each score with the label of the same id. Every scored id must be
/// labelled; extra labels are ignored.
pub fn join_labels<'a>(
    scores: impl IntoIterator<Item = (&'a str, f64)>,
    labels: &LabelFile,
) -> Result<ScoredSet> {
    let map: HashMap<&str, bool> = labels.as_map();
    let pairs = scores
        .into_iter()
        .map(|(id, score)| {
            let label = *map.get(id).ok_or_else(|| Error::MissingField {
                id: id.to_string(),
                field: "label",
            })?;
            Ok(Scored {
                id: id.to_string(),
                score,
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScoredSet::new(pairs)
}

/// Which score of an [`AuditRecord`] to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Content,
    Motion,
}

pub fn record_scores(records: &[AuditRecord], signal: Signal) -> Vec<(&str, f64)> {
    records
        .iter()
        .filter_map(|r| {
            let m = match signal {
                Signal::Content => r.content.as_ref(),
                Signal::Motion => r.motion.as_ref(),
            }?;
            Some((r.gen_id.as_str(), m.result.score))
        })
        .collect()
}
