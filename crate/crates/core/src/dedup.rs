//! Dataset duplication analysis and curation of duplication-prone prompts.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{read_id_captions, read_tensor, DatasetManifest, TensorF32};

/// Row-normalized `[N, D]` dataset features with ids and optional captions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureIndex {
    ids: Vec<String>,
    captions: Vec<Option<String>>,
    dim: usize,
    features: Vec<f32>,
}

impl FeatureIndex {
    pub fn new(
        ids: Vec<String>,
        captions: Vec<Option<String>>,
        features: TensorF32,
    ) -> Result<Self> {
        let [n, dim] = *features.dims() else {
            return Err(Error::Shape(format!(
                "features must be [N, D], got {:?}",
                features.dims()
            )));
        };
        if ids.len() != n || captions.len() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but {} ids and {} captions",
                ids.len(),
                captions.len()
            )));
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let (_, mut features) = features.into_parts();
        for (r, row) in features.chunks_exact_mut(dim).enumerate() {
            let norm = row
                .iter()
                .map(|&v| f64::from(v).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNorm {
                    id: ids[r].clone(),
                    row: r,
                });
            }
            row.iter_mut()
                .for_each(|v| *v = (f64::from(*v) / norm) as f32);
        }
        Ok(Self {
            ids,
            captions,
            dim,
            features,
        })
    }

    /// One feature file (`[D]` or `[1, D]`) per manifest entry.
    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        let mut ids = Vec::with_capacity(manifest.len());
        let mut captions = Vec::with_capacity(manifest.len());
        let mut data = Vec::new();
        let mut dim = None;
        for e in manifest.iter() {
            let path = e.feature_path.as_ref().ok_or_else(|| Error::MissingField {
                id: e.id.clone(),
                field: "feature_path",
            })?;
            let t = read_tensor(path)?;
            let d = match *t.dims() {
                [d] | [1, d] => d,
                ref other => {
                    return Err(Error::Shape(format!(
                        "{}: feature must be [D] or [1, D], got {other:?}",
                        e.id
                    )))
                }
            };
            if *dim.get_or_insert(d) != d {
                return Err(Error::Shape(format!(
                    "{}: feature width {d}, expected {}",
                    e.id,
                    dim.unwrap()
                )));
            }
            data.extend_from_slice(t.data());
            ids.push(e.id.clone());
            captions.push(e.caption.clone());
        }
        let Some(dim) = dim else {
            return Err(Error::Empty("feature manifest".into()));
        };
        Self::new(
            ids,
            captions,
            TensorF32::new(vec![data.len() / dim, dim], data)?,
        )
    }

    /// A single `[N, D]` matrix plus an `id,caption` CSV with N rows.
    pub fn from_matrix(matrix: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<Self> {
        let t = read_tensor(matrix)?;
        let (ids, captions) = read_id_captions(sidecar)?.into_iter().unzip();
        Self::new(ids, captions, t)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn captions(&self) -> &[Option<String>] {
        &self.captions
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// Dot product with eight independent partial sums (vectorizes well). Every
/// pair goes through this one function, so results never depend on tiling.
#[inline]
pub fn feature_dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    pub index: usize,
    pub similarity: f32,
}

impl Neighbor {
    /// Higher similarity first, then lower index.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .similarity
            .total_cmp(&self.similarity)
            .then(self.index.cmp(&other.index))
    }
}

// Heap order: the worst-ranked neighbor is the maximum.
struct Worst(Neighbor);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

struct TopK {
    k: usize,
    heap: BinaryHeap<Worst>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, n: Neighbor) {
        if self.heap.len() < self.k {
            self.heap.push(Worst(n));
        } else if n.rank_cmp(&self.heap.peek().unwrap().0) == Ordering::Less {
            self.heap.pop();
            self.heap.push(Worst(n));
        }
    }

    fn into_sorted(self) -> Vec<Neighbor> {
        let mut v: Vec<Neighbor> = self.heap.into_iter().map(|w| w.0).collect();
        v.sort_by(Neighbor::rank_cmp);
        v
    }
}

/// Exact top-k cosine neighbors of every item, self excluded. Lists are sorted
/// by similarity descending, then index ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLists {
    pub k: usize,
    pub neighbors: Vec<Vec<Neighbor>>,
}

fn check_k(index: &FeatureIndex, k: usize) -> Result<()> {
    if index.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 items, got {}",
            index.len()
        )));
    }
    if k == 0 || k >= index.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be in 1..{} for {} items",
            index.len(),
            index.len()
        )));
    }
    Ok(())
}

/// Blocked all-pairs search: rows are split into `block_rows` groups scored
/// in parallel, each sweeping the columns `block_cols` at a time.
pub fn topk_neighbors(
    index: &FeatureIndex,
    k: usize,
    block_rows: usize,
    block_cols: usize,
) -> Result<NeighborLists> {
    check_k(index, k)?;
    if block_rows == 0 || block_cols == 0 {
        return Err(Error::InvalidParameter(format!(
            "block sizes must be positive (rows {block_rows}, cols {block_cols})"
        )));
    }
    let n = index.len();
    let row_starts: Vec<usize> = (0..n).step_by(block_rows).collect();
    let neighbors: Vec<Vec<Neighbor>> = row_starts
        .par_iter()
        .flat_map_iter(|&r0| {
            let r1 = (r0 + block_rows).min(n);
            let mut heaps: Vec<TopK> = (r0..r1).map(|_| TopK::new(k)).collect();
            for c0 in (0..n).step_by(block_cols) {
                let c1 = (c0 + block_cols).min(n);
                for (i, heap) in (r0..r1).zip(heaps.iter_mut()) {
                    let a = index.row(i);
                    for j in c0..c1 {
                        if j != i {
                            heap.offer(Neighbor {
                                index: j,
                                similarity: feature_dot(a, index.row(j)),
                            });
                        }
                    }
                }
            }
            heaps.into_iter().map(TopK::into_sorted)
        })
        .collect();
    Ok(NeighborLists { k, neighbors })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborEntry {
    pub id: String,
    pub similarity: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuplicationItem {
    pub id: String,
    pub duplication_count: usize,
    /// The k-th neighbor already reaches tau, so the true count may be larger.
    pub clipped: bool,
    pub neighbors: Vec<NeighborEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuplicationReport {
    pub tau: f64,
    pub k: usize,
    pub items: Vec<DuplicationItem>,
}

impl DuplicationReport {
    pub fn clipped_items(&self) -> usize {
        self.items.iter().filter(|i| i.clipped).count()
    }
}

/// Count neighbors with similarity `>= tau` for every item.
pub fn duplication_counts(
    index: &FeatureIndex,
    lists: &NeighborLists,
    tau: f64,
) -> Result<DuplicationReport> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tau = {tau} outside (0, 1]"
        )));
    }
    if lists.neighbors.len() != index.len() {
        return Err(Error::Shape(format!(
            "{} neighbor lists for {} items",
            lists.neighbors.len(),
            index.len()
        )));
    }
    let items: Vec<DuplicationItem> = lists
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let count = nbrs
                .iter()
                .filter(|n| f64::from(n.similarity) >= tau)
                .count();
            DuplicationItem {
                id: index.ids[i].clone(),
                duplication_count: count,
                clipped: nbrs.len() == lists.k && count == lists.k,
                neighbors: nbrs
                    .iter()
                    .map(|n| NeighborEntry {
                        id: index.ids[n.index].clone(),
                        similarity: n.similarity,
                    })
                    .collect(),
            }
        })
        .collect();
    let report = DuplicationReport {
        tau,
        k: lists.k,
        items,
    };
    let clipped = report.clipped_items();
    if clipped > 0 {
        log::warn!(
            "{clipped} items have all {} neighbors at or above tau = {tau}; their counts may be clipped",
            lists.k
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptEntry {
    pub caption: String,
    pub source_video_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptDataset {
    pub entries: Vec<PromptEntry>,
    pub limit: usize,
}

impl PromptDataset {
    /// How many prompts short of `limit` the dataset came out.
    pub fn shortfall(&self) -> usize {
        self.limit - self.entries.len()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path, &self.to_csv_bytes())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["caption", "source_video_id"])
            .expect("in-memory write");
        for e in &self.entries {
            w.write_record([e.caption.as_str(), e.source_video_id.as_str()])
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

/// Walk items by descending duplication count (ties by index position) and
/// keep each trimmed caption the first time it appears, up to `limit`.
pub fn curate_prompts(
    index: &FeatureIndex,
    report: &DuplicationReport,
    limit: usize,
) -> Result<PromptDataset> {
    if limit == 0 {
        return Err(Error::InvalidParameter("limit must be at least 1".into()));
    }
    if report.items.len() != index.len() {
        return Err(Error::Shape(format!(
            "report has {} items, index {}",
            report.items.len(),
            index.len()
        )));
    }
    let mut order: Vec<usize> = (0..index.len()).collect();
    order.sort_by(|&a, &b| {
        report.items[b]
            .duplication_count
            .cmp(&report.items[a].duplication_count)
            .then(a.cmp(&b))
    });
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for i in order {
        if entries.len() == limit {
            break;
        }
        let Some(caption) = index.captions[i].as_deref().map(str::trim) else {
            continue;
        };
        if caption.is_empty() || !seen.insert(caption.to_string()) {
            continue;
        }
        entries.push(PromptEntry {
            caption: caption.to_string(),
            source_video_id: index.ids[i].clone(),
        });
    }
    if entries.len() < limit {
        log::info!("curated {} of {limit} requested prompts", entries.len());
    }
    Ok(PromptDataset { entries, limit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(rows: &[Vec<f32>], captions: &[Option<&str>]) -> FeatureIndex {
        let d = rows[0].len();
        FeatureIndex::new(
            (0..rows.len()).map(|i| format!("v{}", i + 1)).collect(),
            captions.iter().map(|c| c.map(String::from)).collect(),
            TensorF32::new(vec![rows.len(), d], rows.concat()).unwrap(),
        )
        .unwrap()
    }

    fn three() -> FeatureIndex {
        // cos(v1, v2) = 0.99, v3 orthogonal to both
        let s = (1.0f32 - 0.99 * 0.99).sqrt();
        index(
            &[vec![1.0, 0.0, 0.0], vec![0.99, s, 0.0], vec![0.0, 0.0, 1.0]],
            &[Some("a"), Some("b"), Some("c")],
        )
    }

    #[test]
    fn three_point_example() {
        let idx = three();
        let l = topk_neighbors(&idx, 1, 2, 2).unwrap();
        assert_eq!(l.neighbors[0][0].index, 1);
        assert_eq!(l.neighbors[1][0].index, 0);
        assert!((l.neighbors[0][0].similarity - 0.99).abs() < 1e-6);
        assert_eq!(l.neighbors[2][0].similarity, 0.0);
        // v3 ties at 0.0 with both; lower index wins
        assert_eq!(l.neighbors[2][0].index, 0);

        let r = duplication_counts(&idx, &l, 0.95).unwrap();
        let counts: Vec<usize> = r.items.iter().map(|i| i.duplication_count).collect();
        assert_eq!(counts, vec![1, 1, 0]);
    }

    #[test]
    fn identical_rows() {
        let idx = index(&vec![vec![0.5, 0.5]; 5], &[None; 5]);
        let l = topk_neighbors(&idx, 4, 3, 2).unwrap();
        assert!(l
            .neighbors
            .iter()
            .flatten()
            .all(|n| (n.similarity - 1.0).abs() < 1e-6));
        let r = duplication_counts(&idx, &l, 0.99).unwrap();
        assert!(r.items.iter().all(|i| i.duplication_count == 4));
    }

    #[test]
    fn parameter_errors() {
        let idx = three();
        assert!(topk_neighbors(&idx, 3, 1, 1).is_err());
        assert!(topk_neighbors(&idx, 0, 1, 1).is_err());
        assert!(topk_neighbors(&idx, 1, 0, 1).is_err());
        let l = topk_neighbors(&idx, 1, 1, 1).unwrap();
        assert!(duplication_counts(&idx, &l, 1.0 + 1e-9).is_err());
        assert!(duplication_counts(&idx, &l, 0.0).is_err());
        assert!(duplication_counts(&idx, &l, 1.0).is_ok());
    }

    #[test]
    fn curation_walk() {
        let idx = index(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            &[Some("A"), Some("B"), Some(" A ")],
        );
        let item = |id: &str, c| DuplicationItem {
            id: id.into(),
            duplication_count: c,
            clipped: false,
            neighbors: vec![],
        };
        let report = DuplicationReport {
            tau: 0.9,
            k: 1,
            items: vec![item("v1", 5), item("v2", 3), item("v3", 3)],
        };
        let p = curate_prompts(&idx, &report, 2).unwrap();
        let got: Vec<(&str, &str)> = p
            .entries
            .iter()
            .map(|e| (e.caption.as_str(), e.source_video_id.as_str()))
            .collect();
        assert_eq!(got, vec![("A", "v1"), ("B", "v2")]);
        let csv = String::from_utf8(p.to_csv_bytes()).unwrap();
        assert_eq!(csv, "caption,source_video_id\nA,v1\nB,v2\n");
        assert!(curate_prompts(&idx, &report, 0).is_err());
    }

    #[test]
    fn identical_captions_give_one_prompt() {
        let idx = index(&vec![vec![1.0, 0.0]; 4], &[Some("same"); 4]);
        let l = topk_neighbors(&idx, 3, 4, 4).unwrap();
        let r = duplication_counts(&idx, &l, 0.95).unwrap();
        let p = curate_prompts(&idx, &r, 500).unwrap();
        assert_eq!(p.entries.len(), 1);
        assert_eq!(p.shortfall(), 499);
    }

    #[test]
    fn dot_matches_scalar_sum() {
        let a: Vec<f32> = (0..19).map(|i| i as f32 * 0.25).collect();
        let b: Vec<f32> = (0..19).map(|i| 1.0 - i as f32 * 0.125).collect();
        let naive: f64 = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| f64::from(x) * f64::from(y))
            .sum();
        assert!((f64::from(feature_dot(&a, &b)) - naive).abs() < 1e-4);
    }
}
