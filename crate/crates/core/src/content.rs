//! Content memorization: frame-level copy similarity between a generated video
//! and a training video or image.

use rayon::prelude::*;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::io::{EmbeddingSequence, TensorF32};

/// Norms below this make a cosine meaningless.
pub const MIN_NORM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Gsscd,
    Ofs,
}

/// A maximum similarity together with where it was attained.
///
/// `argmax` is `(generated index, training index)`; it is `None` only for an
/// OFS search in which every window was filtered out (score 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityResult {
    pub score: f64,
    pub argmax: Option<(usize, usize)>,
    pub metric: Metric,
}

impl SimilarityResult {
    pub fn gen_index(&self) -> Option<usize> {
        self.argmax.map(|(i, _)| i)
    }

    pub fn train_index(&self) -> Option<usize> {
        self.argmax.map(|(_, j)| j)
    }

    /// Whether `self` should replace `other` as the running maximum: higher
    /// score, or equal score at an earlier row-major location.
    pub(crate) fn beats(&self, other: &Self) -> bool {
        let key = |r: &Self| r.argmax.unwrap_or((usize::MAX, usize::MAX));
        self.score > other.score || (self.score == other.score && key(self) < key(other))
    }
}

// Indices are written as -1 when absent.
impl Serialize for SimilarityResult {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let idx = |v: Option<usize>| v.map_or(-1, |x| x as i64);
        let mut st = s.serialize_struct("SimilarityResult", 4)?;
        st.serialize_field("score", &self.score)?;
        st.serialize_field("gen_index", &idx(self.gen_index()))?;
        st.serialize_field("train_index", &idx(self.train_index()))?;
        st.serialize_field("metric", &self.metric)?;
        st.end()
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vector widths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    for n in [na, nb] {
        if n < MIN_NORM {
            return Err(Error::DegenerateVector(n));
        }
    }
    Ok(dot(a, b) / (na * nb))
}

fn check_widths(gen: &EmbeddingSequence, train: &EmbeddingSequence) -> Result<()> {
    if gen.width() != train.width() {
        return Err(Error::Shape(format!(
            "embedding widths differ: {} ({}) vs {} ({})",
            gen.width(),
            gen.video_id(),
            train.width(),
            train.video_id()
        )));
    }
    Ok(())
}

/// Cosine of every (generated frame, training frame) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FrameSimilarityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_tensor(&self) -> TensorF32 {
        TensorF32::new(
            vec![self.rows, self.cols],
            self.values.iter().map(|&v| v as f32).collect(),
        )
        .expect("cosines are finite")
    }

    /// Row-major first maximum.
    pub fn max(&self) -> SimilarityResult {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, &v) in self.values.iter().enumerate() {
            if v > best.0 {
                best = (v, k);
            }
        }
        SimilarityResult {
            score: best.0,
            argmax: Some((best.1 / self.cols, best.1 % self.cols)),
            metric: Metric::Gsscd,
        }
    }
}

pub fn frame_similarity_matrix(
    gen: &EmbeddingSequence,
    train: &EmbeddingSequence,
) -> Result<FrameSimilarityMatrix> {
    check_widths(gen, train)?;
    // Rows are unit-norm after load, so the cosine is a plain dot product.
    let mut values = Vec::with_capacity(gen.frames() * train.frames());
    for i in 0..gen.frames() {
        for j in 0..train.frames() {
            values.push(dot(gen.row(i), train.row(j)));
        }
    }
    Ok(FrameSimilarityMatrix {
        rows: gen.frames(),
        cols: train.frames(),
        values,
    })
}

/// Maximum frame-pair cosine over all pairs. A one-frame `train` compares the
/// video against an image.
pub fn gsscd(gen: &EmbeddingSequence, train: &EmbeddingSequence) -> Result<SimilarityResult> {
    Ok(frame_similarity_matrix(gen, train)?.max())
}

/// Cosine of the concatenated per-frame embeddings. Both videos must have
/// the same number of frames.
pub fn vsscd(gen: &EmbeddingSequence, train: &EmbeddingSequence) -> Result<f64> {
    check_widths(gen, train)?;
    if gen.frames() != train.frames() {
        return Err(Error::FrameCountMismatch(gen.frames(), train.frames()));
    }
    cosine(gen.as_flat(), train.as_flat())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestMatch {
    /// Position of the winner in the searched index.
    pub position: usize,
    pub train_id: String,
    pub result: SimilarityResult,
}

/// Exact GSSCD search of `gen` against every item of `index`.
///
/// Training frames are visited in blocks of at most `block_size` frames (a
/// block may span several items), so only a `frames(gen) x block_size` tile
/// of the similarity matrix exists at a time. Blocks are scored in parallel
/// on the current rayon pool. Ties go to the lowest index position.
pub fn best_match(
    gen: &EmbeddingSequence,
    index: &[EmbeddingSequence],
    block_size: usize,
) -> Result<BestMatch> {
    if index.is_empty() {
        return Err(Error::Empty("training index".into()));
    }
    if block_size == 0 {
        return Err(Error::InvalidParameter(
            "block size must be positive".into(),
        ));
    }
    for item in index {
        check_widths(gen, item)?;
    }

    // (item, first frame, frame count) spans, cut at block boundaries.
    let mut blocks: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new()];
    let mut fill = 0;
    for (pos, item) in index.iter().enumerate() {
        let mut start = 0;
        while start < item.frames() {
            if fill == block_size {
                blocks.push(Vec::new());
                fill = 0;
            }
            let take = (block_size - fill).min(item.frames() - start);
            blocks.last_mut().unwrap().push((pos, start, take));
            fill += take;
            start += take;
        }
    }

    let partials: Vec<Vec<(usize, SimilarityResult)>> = blocks
        .par_iter()
        .map(|spans| {
            let width: usize = spans.iter().map(|s| s.2).sum();
            let mut tile = vec![0.0f64; gen.frames() * width];
            let mut col = 0;
            for &(pos, start, take) in spans {
                for j in 0..take {
                    let t = index[pos].row(start + j);
                    for i in 0..gen.frames() {
                        tile[i * width + col + j] = dot(gen.row(i), t);
                    }
                }
                col += take;
            }
            let mut out = Vec::with_capacity(spans.len());
            let mut col = 0;
            for &(pos, start, take) in spans {
                let mut best: Option<SimilarityResult> = None;
                for i in 0..gen.frames() {
                    for j in 0..take {
                        let cand = SimilarityResult {
                            score: tile[i * width + col + j],
                            argmax: Some((i, start + j)),
                            metric: Metric::Gsscd,
                        };
                        if best.is_none_or(|b| cand.beats(&b)) {
                            best = Some(cand);
                        }
                    }
                }
                out.push((pos, best.expect("span is non-empty")));
                col += take;
            }
            out
        })
        .collect();

    let mut per_item: Vec<Option<SimilarityResult>> = vec![None; index.len()];
    for (pos, r) in partials.into_iter().flatten() {
        let slot = &mut per_item[pos];
        if slot.is_none_or(|s| r.beats(&s)) {
            *slot = Some(r);
        }
    }
    let mut winner: Option<(usize, SimilarityResult)> = None;
    for (pos, r) in per_item.into_iter().enumerate() {
        let r = r.expect("every item has at least one frame");
        if winner.is_none_or(|(_, w)| r.score > w.score) {
            winner = Some((pos, r));
        }
    }
    let (position, result) = winner.expect("index is non-empty");
    Ok(BestMatch {
        position,
        train_id: index[position].video_id().to_string(),
        result,
    })
}
