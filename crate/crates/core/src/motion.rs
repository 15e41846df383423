//! Motion memorization: optical-flow similarity over aligned windows of
//! consecutive flows, with camera panning and static flows filtered out.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::{BestMatch, Metric, SimilarityResult};
use crate::error::{Error, Result};
use crate::io::{FlowField, FlowSequence};

/// Natural motion filter settings. Defaults: 36 direction bins (10 degrees
/// each), 1 nat entropy floor, 0.5 px static floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmfConfig {
    pub bins: usize,
    /// Direction entropy (nats) below which a flow counts as camera panning.
    pub entropy_threshold: f64,
    /// Mean displacement (pixels) below which a flow counts as static.
    pub static_magnitude_threshold: f64,
    /// Pixels whose vector is shorter than this have no direction.
    pub pixel_norm_epsilon: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            bins: 36,
            entropy_threshold: 1.0,
            static_magnitude_threshold: 0.5,
            pixel_norm_epsilon: 1e-8,
        }
    }
}

impl NmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "bins = {} (need >= 2)",
                self.bins
            )));
        }
        for (name, v) in [
            ("entropy_threshold", self.entropy_threshold),
            (
                "static_magnitude_threshold",
                self.static_magnitude_threshold,
            ),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if !self.pixel_norm_epsilon.is_finite() || self.pixel_norm_epsilon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "pixel_norm_epsilon = {}",
                self.pixel_norm_epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Informative,
    Panning,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowPairClassification {
    pub flow_index: usize,
    pub kind: FlowKind,
    /// Direction entropy in nats.
    pub entropy: f64,
    /// Mean displacement in pixels.
    pub mean_magnitude: f64,
}

#[inline]
fn pixel_cos(gx: f64, gy: f64, gn: f64, tx: f64, ty: f64, tn: f64, eps: f64) -> f64 {
    if gn < eps || tn < eps {
        0.0
    } else {
        (gx * tx + gy * ty) / (gn * tn)
    }
}

fn check_spatial(a: &FlowField<'_>, b: &FlowField<'_>) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Shape(format!(
            "flow fields {}x{} and {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// Per-pixel cosine between two flow fields, row-major `[H, W]`. Pixels where
/// either vector is shorter than `epsilon` get 0.
pub fn pixel_flow_cosine(fg: FlowField<'_>, ft: FlowField<'_>, epsilon: f64) -> Result<Vec<f64>> {
    check_spatial(&fg, &ft)?;
    let (gx, gy, tx, ty) = (fg.xs(), fg.ys(), ft.xs(), ft.ys());
    Ok((0..fg.pixels())
        .map(|p| {
            let (a, b) = (f64::from(gx[p]), f64::from(gy[p]));
            let (c, d) = (f64::from(tx[p]), f64::from(ty[p]));
            pixel_cos(a, b, a.hypot(b), c, d, c.hypot(d), epsilon)
        })
        .collect())
}

/// Mean of [`pixel_flow_cosine`] over every pixel.
pub fn mean_flow_similarity(fg: FlowField<'_>, ft: FlowField<'_>, epsilon: f64) -> Result<f64> {
    let map = pixel_flow_cosine(fg, ft, epsilon)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// Shannon entropy (nats) of the direction histogram over `[-pi, pi)`,
/// counting only pixels whose vector is at least `epsilon` long. A field with
/// no such pixel has entropy 0.
pub fn direction_entropy(f: FlowField<'_>, bins: usize, epsilon: f64) -> f64 {
    let mut hist = vec![0u64; bins];
    let mut total = 0u64;
    for (&x, &y) in f.xs().iter().zip(f.ys()) {
        let (x, y) = (f64::from(x), f64::from(y));
        if x.hypot(y) < epsilon {
            continue;
        }
        let theta = y.atan2(x);
        let mut b = ((theta + PI) / (2.0 * PI) * bins as f64).floor() as usize;
        // atan2 can return exactly +pi, which is the same direction as -pi.
        if b >= bins {
            b = 0;
        }
        hist[b] += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let h = -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

pub fn mean_magnitude(f: FlowField<'_>) -> f64 {
    let sum: f64 = f
        .xs()
        .iter()
        .zip(f.ys())
        .map(|(&x, &y)| f64::from(x).hypot(f64::from(y)))
        .sum();
    sum / f.pixels() as f64
}

/// Static wins over panning when both apply.
pub fn classify_flow_pair(f: FlowField<'_>, cfg: &NmfConfig) -> FlowPairClassification {
    let mean_magnitude = mean_magnitude(f);
    let entropy = direction_entropy(f, cfg.bins, cfg.pixel_norm_epsilon);
    let kind = if mean_magnitude < cfg.static_magnitude_threshold {
        FlowKind::Static
    } else if entropy < cfg.entropy_threshold {
        FlowKind::Panning
    } else {
        FlowKind::Informative
    };
    FlowPairClassification {
        flow_index: 0,
        kind,
        entropy,
        mean_magnitude,
    }
}

pub fn classify_sequence(seq: &FlowSequence, cfg: &NmfConfig) -> Vec<FlowPairClassification> {
    seq.fields()
        .enumerate()
        .map(|(i, f)| FlowPairClassification {
            flow_index: i,
            ..classify_flow_pair(f, cfg)
        })
        .collect()
}

/// A flow sequence widened to `f64` with per-pixel norms and NMF labels
/// computed once, for repeated comparisons.
#[derive(Debug, Clone)]
pub struct PreparedFlows {
    video_id: String,
    flows: usize,
    height: usize,
    width: usize,
    // Per flow, per pixel: (x, y, norm).
    vectors: Vec<(f64, f64, f64)>,
    classes: Vec<FlowPairClassification>,
    epsilon: f64,
}

impl PreparedFlows {
    pub fn new(seq: &FlowSequence, cfg: &NmfConfig) -> Self {
        let mut vectors = Vec::with_capacity(seq.flows() * seq.height() * seq.width());
        for f in seq.fields() {
            for (&x, &y) in f.xs().iter().zip(f.ys()) {
                let (x, y) = (f64::from(x), f64::from(y));
                vectors.push((x, y, x.hypot(y)));
            }
        }
        Self {
            video_id: seq.video_id().to_string(),
            flows: seq.flows(),
            height: seq.height(),
            width: seq.width(),
            vectors,
            classes: classify_sequence(seq, cfg),
            epsilon: cfg.pixel_norm_epsilon,
        }
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn flows(&self) -> usize {
        self.flows
    }

    pub fn classes(&self) -> &[FlowPairClassification] {
        &self.classes
    }

    fn informative(&self, i: usize) -> bool {
        self.classes[i].kind == FlowKind::Informative
    }

    fn flow(&self, i: usize) -> &[(f64, f64, f64)] {
        let n = self.height * self.width;
        &self.vectors[i * n..(i + 1) * n]
    }

    fn mean_similarity(&self, i: usize, other: &Self, j: usize) -> f64 {
        let a = self.flow(i);
        let b = other.flow(j);
        let sum: f64 = a
            .iter()
            .zip(b)
            .map(|(&(gx, gy, gn), &(tx, ty, tn))| pixel_cos(gx, gy, gn, tx, ty, tn, self.epsilon))
            .sum();
        sum / a.len() as f64
    }
}

/// Mean per-pixel flow cosine for every (generated flow, training flow) pair.
/// `valid` is false wherever NMF is on and either flow is panning or static.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl FlowSimilarityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[i * self.cols + j]
    }

    /// Best mean along aligned diagonals of length `k` whose every cell is valid.
    pub fn best_window(&self, k: usize) -> SimilarityResult {
        let mut best = SimilarityResult {
            score: 0.0,
            argmax: None,
            metric: Metric::Ofs,
        };
        let mut best_sum = f64::NEG_INFINITY;
        for i in 0..=self.rows - k {
            for j in 0..=self.cols - k {
                if !(0..k).all(|n| self.is_valid(i + n, j + n)) {
                    continue;
                }
                let sum: f64 = (0..k).map(|n| self.get(i + n, j + n)).sum();
                if sum > best_sum {
                    best_sum = sum;
                    best.argmax = Some((i, j));
                }
            }
        }
        if best.argmax.is_some() {
            best.score = best_sum / k as f64;
        }
        best
    }
}

fn check_prepared(gen: &PreparedFlows, train: &PreparedFlows) -> Result<()> {
    if gen.height != train.height || gen.width != train.width {
        return Err(Error::Shape(format!(
            "flow grids differ: {}x{} ({}) vs {}x{} ({})",
            gen.height, gen.width, gen.video_id, train.height, train.width, train.video_id
        )));
    }
    Ok(())
}

fn prepared_matrix(gen: &PreparedFlows, train: &PreparedFlows, nmf: bool) -> FlowSimilarityMatrix {
    let (rows, cols) = (gen.flows, train.flows);
    let mut values = Vec::with_capacity(rows * cols);
    let mut valid = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            values.push(gen.mean_similarity(i, train, j));
            valid.push(!nmf || (gen.informative(i) && train.informative(j)));
        }
    }
    FlowSimilarityMatrix {
        rows,
        cols,
        values,
        valid,
    }
}

pub fn flow_similarity_matrix(
    gen: &FlowSequence,
    train: &FlowSequence,
    cfg: &NmfConfig,
    nmf_enabled: bool,
) -> Result<FlowSimilarityMatrix> {
    let (g, t) = (PreparedFlows::new(gen, cfg), PreparedFlows::new(train, cfg));
    check_prepared(&g, &t)?;
    Ok(prepared_matrix(&g, &t, nmf_enabled))
}

fn check_k(k: usize, seqs: &[&PreparedFlows]) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let short: Vec<String> = seqs
        .iter()
        .filter(|s| s.flows < k)
        .map(|s| format!("{} ({} flows)", s.video_id, s.flows))
        .collect();
    if !short.is_empty() {
        return Err(Error::WindowTooLong { k, ids: short });
    }
    Ok(())
}

/// OFS-k on prepared sequences; see [`ofs_k`].
pub fn ofs_k_prepared(
    gen: &PreparedFlows,
    train: &PreparedFlows,
    k: usize,
    nmf_enabled: bool,
) -> Result<SimilarityResult> {
    check_k(k, &[gen, train])?;
    check_prepared(gen, train)?;
    Ok(prepared_matrix(gen, train, nmf_enabled).best_window(k))
}

/// Maximum, over aligned windows of `k` consecutive flows, of the mean flow
/// similarity along the window diagonal. Windows start at flow indices
/// `0..=M-k`. With NMF on, a window counts only if all `k` flows of both
/// videos are informative; if none does the score is 0 with no location.
pub fn ofs_k(
    gen: &FlowSequence,
    train: &FlowSequence,
    k: usize,
    cfg: &NmfConfig,
    nmf_enabled: bool,
) -> Result<SimilarityResult> {
    cfg.validate()?;
    ofs_k_prepared(
        &PreparedFlows::new(gen, cfg),
        &PreparedFlows::new(train, cfg),
        k,
        nmf_enabled,
    )
}

/// OFS-k search of `gen` against every item of `index`, in parallel on the
/// current rayon pool. Ties go to the lowest index position. Every sequence
/// shorter than `k` is reported in one error.
pub fn ofs_batch_prepared(
    gen: &PreparedFlows,
    index: &[PreparedFlows],
    k: usize,
    nmf_enabled: bool,
) -> Result<BestMatch> {
    if index.is_empty() {
        return Err(Error::Empty("training index".into()));
    }
    let all: Vec<&PreparedFlows> = std::iter::once(gen).chain(index.iter()).collect();
    check_k(k, &all)?;
    for t in index {
        check_prepared(gen, t)?;
    }
    let results: Vec<SimilarityResult> = index
        .par_iter()
        .map(|t| prepared_matrix(gen, t, nmf_enabled).best_window(k))
        .collect();
    let (position, result) = results
        .into_iter()
        .enumerate()
        .reduce(|best, cur| {
            if cur.1.score > best.1.score {
                cur
            } else {
                best
            }
        })
        .expect("index is non-empty");
    Ok(BestMatch {
        position,
        train_id: index[position].video_id.clone(),
        result,
    })
}

pub fn ofs_batch(
    gen: &FlowSequence,
    index: &[FlowSequence],
    k: usize,
    cfg: &NmfConfig,
    nmf_enabled: bool,
) -> Result<BestMatch> {
    cfg.validate()?;
    let g = PreparedFlows::new(gen, cfg);
    let idx: Vec<PreparedFlows> = index
        .par_iter()
        .map(|s| PreparedFlows::new(s, cfg))
        .collect();
    ofs_batch_prepared(&g, &idx, k, nmf_enabled)
}
