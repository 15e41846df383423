//! Deterministic synthetic fixtures with planted memorization.
//!
//! Everything is written in the ordinary VMT/manifest/label formats, so the
//! audit pipeline reads fixtures exactly as it would read extractor output.
//!
//! # Random source
//!
//! [`CounterRng`] is SplitMix64 run in counter mode so any implementation can
//! reproduce a fixture bit for bit:
//!
//! ```text
//! mix(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!          z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!          z ^ (z >> 31)
//! key      = mix(seed ^ mix(stream))
//! u64 #n   = mix(key + n * 0x9E3779B97F4A7C15)      n = 1, 2, ...
//! uniform  = (u64 >> 11) * 2^-53                    in [0, 1)
//! normal   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)     two uniforms per draw
//! below(n) = floor(uniform * n)
//! ```
//!
//! All arithmetic is wrapping `u64`. Each fixture element draws from its own
//! stream, numbered by the `STREAM_*` constants plus an item offset.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    write_labels, write_manifest, write_tensor, write_trajectory, LabelFile, LabelRecord,
    LatentStep, LatentTrajectory, ManifestEntry, TensorF32,
};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub const STREAM_PLAN: u64 = 1;
pub const STREAM_TRAIN: u64 = 1 << 32;
pub const STREAM_GEN: u64 = 2 << 32;
pub const STREAM_PLANT: u64 = 3 << 32;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-mode SplitMix64; see the module docs for the exact algorithm.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: mix(seed ^ mix(stream)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    /// `count` distinct values from `0..n`, in draw order (partial Fisher-Yates).
    pub fn sample_distinct(&mut self, n: usize, count: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count.min(n) {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count.min(n));
        pool
    }
}

fn default_steps() -> usize {
    50
}
fn default_channels() -> usize {
    4
}
fn default_offset() -> f64 {
    0.5
}
fn default_run_length() -> usize {
    3
}

/// Fixture dimensions and planting plan. Which fields matter depends on the
/// fixture kind; unused ones are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_generated: usize,
    pub planted_pairs: usize,
    pub noise_sigma: f64,
    pub frames: usize,
    pub dim: usize,
    pub height: usize,
    pub width: usize,
    /// Latent fixtures: inference steps per trajectory.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Latent fixtures: latent channels.
    #[serde(default = "default_channels")]
    pub channels: usize,
    /// Latent fixtures: scale of the persistent conditional offset.
    #[serde(default = "default_offset")]
    pub offset: f64,
    /// Motion fixtures: generated items copying a panning or static run.
    #[serde(default)]
    pub distractor_pairs: usize,
    /// Motion fixtures: generated items sharing a single informative flow.
    #[serde(default)]
    pub coincidental_pairs: usize,
    /// Motion fixtures: length of each planted run of copied flows.
    #[serde(default = "default_run_length")]
    pub run_length: usize,
}

impl FixtureSpec {
    /// 300 generated / 30 planted content fixture with 64-wide embeddings.
    pub fn content_default(seed: u64) -> Self {
        Self {
            seed,
            n_train: 100,
            n_generated: 300,
            planted_pairs: 30,
            noise_sigma: 0.01,
            frames: 8,
            dim: 64,
            height: 0,
            width: 0,
            steps: default_steps(),
            channels: default_channels(),
            offset: default_offset(),
            distractor_pairs: 0,
            coincidental_pairs: 0,
            run_length: default_run_length(),
        }
    }

    pub fn motion_default(seed: u64) -> Self {
        Self {
            n_train: 60,
            n_generated: 120,
            planted_pairs: 20,
            noise_sigma: 0.0,
            frames: 8,
            dim: 0,
            height: 8,
            width: 8,
            distractor_pairs: 20,
            coincidental_pairs: 0,
            ..Self::content_default(seed)
        }
    }

    /// 100 trajectories, half memorized.
    pub fn latent_default(seed: u64) -> Self {
        Self {
            n_train: 0,
            n_generated: 100,
            planted_pairs: 50,
            noise_sigma: 1.0,
            frames: 8,
            dim: 0,
            height: 4,
            width: 4,
            ..Self::content_default(seed)
        }
    }

    pub fn features_default(seed: u64) -> Self {
        Self {
            n_train: 200,
            n_generated: 0,
            planted_pairs: 5,
            noise_sigma: 0.01,
            frames: 1,
            dim: 64,
            ..Self::content_default(seed)
        }
    }

    fn require(&self, ok: bool, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("fixture spec: {what}")))
        }
    }

    fn validate_common(&self) -> Result<()> {
        self.require(
            self.noise_sigma.is_finite() && self.noise_sigma >= 0.0,
            "noise_sigma >= 0",
        )
    }
}

/// Paths written by a generator, relative names already resolved against `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFiles {
    pub root: PathBuf,
    pub train_manifest: Option<PathBuf>,
    pub gen_manifest: PathBuf,
    pub labels: Option<PathBuf>,
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn labels_from(ids: &[String], positives: &[usize]) -> LabelFile {
    LabelFile {
        records: ids
            .iter()
            .enumerate()
            .map(|(i, id)| LabelRecord {
                id: id.clone(),
                label: positives.contains(&i),
            })
            .collect(),
    }
}

// Content fixtures split the embedding axis in two halves. Training content
// lives in the first half. Novel generated content lives mostly in the second
// half and overlaps the first with weight NOVEL_OVERLAP, which keeps chance
// frame matches well below memorization thresholds at small widths.
const NOVEL_OVERLAP: f64 = 0.35;
const FRAME_JITTER: f64 = 0.3;

fn content_video(rng: &mut CounterRng, frames: usize, dim: usize, novel: bool) -> Vec<Vec<f64>> {
    let half = dim / 2;
    let draw = |rng: &mut CounterRng| -> Vec<f64> {
        (0..dim)
            .map(|c| match (novel, c < half) {
                (false, true) => rng.normal(),
                (false, false) => 0.0,
                (true, true) => NOVEL_OVERLAP * rng.normal(),
                (true, false) => rng.normal(),
            })
            .collect()
    };
    let base = draw(rng);
    (0..frames)
        .map(|_| {
            let jitter = draw(rng);
            let mut f: Vec<f64> = base
                .iter()
                .zip(&jitter)
                .map(|(b, j)| b + FRAME_JITTER * j)
                .collect();
            unit(&mut f);
            f
        })
        .collect()
}

fn write_embedding(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let flat: Vec<f64> = rows.concat();
    write_tensor(
        &TensorF32::new(vec![rows.len(), rows[0].len()], to_f32(&flat))?,
        path,
    )
}

/// Training and generated embedding videos; `planted_pairs` generated videos
/// get one frame copied from a distinct training video, perturbed by a random
/// direction of length `noise_sigma` and renormalized.
pub fn generate_content_fixture(spec: &FixtureSpec, out: impl AsRef<Path>) -> Result<FixtureFiles> {
    spec.validate_common()?;
    spec.require(
        spec.dim >= 2 && spec.frames >= 1,
        "dim >= 2 and frames >= 1",
    )?;
    spec.require(
        spec.n_train >= 1 && spec.n_generated >= 1,
        "non-empty train and generated sets",
    )?;
    spec.require(
        spec.planted_pairs <= spec.n_train.min(spec.n_generated),
        "planted_pairs <= min(n_train, n_generated)",
    )?;
    let out = out.as_ref();
    mkdir(&out.join("train"))?;
    mkdir(&out.join("gen"))?;

    let train: Vec<Vec<Vec<f64>>> = (0..spec.n_train)
        .map(|i| {
            content_video(
                &mut CounterRng::new(spec.seed, STREAM_TRAIN + i as u64),
                spec.frames,
                spec.dim,
                false,
            )
        })
        .collect();
    let mut gen: Vec<Vec<Vec<f64>>> = (0..spec.n_generated)
        .map(|i| {
            content_video(
                &mut CounterRng::new(spec.seed, STREAM_GEN + i as u64),
                spec.frames,
                spec.dim,
                true,
            )
        })
        .collect();

    let mut plan = CounterRng::new(spec.seed, STREAM_PLAN);
    let planted = plan.sample_distinct(spec.n_generated, spec.planted_pairs);
    let sources = plan.sample_distinct(spec.n_train, spec.planted_pairs);
    for (p, (&g, &t)) in planted.iter().zip(&sources).enumerate() {
        let mut rng = CounterRng::new(spec.seed, STREAM_PLANT + p as u64);
        let src_frame = rng.below(spec.frames);
        let dst_frame = rng.below(spec.frames);
        let mut dir: Vec<f64> = (0..spec.dim).map(|_| rng.normal()).collect();
        unit(&mut dir);
        let mut copy: Vec<f64> = train[t][src_frame]
            .iter()
            .zip(&dir)
            .map(|(x, d)| x + spec.noise_sigma * d)
            .collect();
        unit(&mut copy);
        gen[g][dst_frame] = copy;
    }

    let mut train_entries = Vec::with_capacity(spec.n_train);
    for (i, video) in train.iter().enumerate() {
        let rel = format!("train/train_{i:04}.vmt");
        write_embedding(&out.join(&rel), video)?;
        train_entries.push(ManifestEntry {
            embedding_path: Some(rel.into()),
            frames: Some(spec.frames as u32),
            ..ManifestEntry::new(format!("train_{i:04}"))
        });
    }
    let mut gen_entries = Vec::with_capacity(spec.n_generated);
    for (i, video) in gen.iter().enumerate() {
        let rel = format!("gen/gen_{i:04}.vmt");
        write_embedding(&out.join(&rel), video)?;
        gen_entries.push(ManifestEntry {
            embedding_path: Some(rel.into()),
            frames: Some(spec.frames as u32),
            ..ManifestEntry::new(format!("gen_{i:04}"))
        });
    }
    finish(out, &train_entries, &gen_entries, &planted)
}

fn finish(
    out: &Path,
    train: &[ManifestEntry],
    gen: &[ManifestEntry],
    positives: &[usize],
) -> Result<FixtureFiles> {
    let files = FixtureFiles {
        root: out.to_path_buf(),
        train_manifest: Some(out.join("train.jsonl")),
        gen_manifest: out.join("gen.jsonl"),
        labels: Some(out.join("labels.csv")),
    };
    write_manifest(train, files.train_manifest.as_ref().unwrap())?;
    write_manifest(gen, &files.gen_manifest)?;
    let ids: Vec<String> = gen.iter().map(|e| e.id.clone()).collect();
    write_labels(
        &labels_from(&ids, positives),
        files.labels.as_ref().unwrap(),
    )?;
    Ok(files)
}

/// One `[2, H, W]` field as (xs, ys).
type Field = (Vec<f64>, Vec<f64>);

/// Rotation plus divergence about a random centre, overlaid with per-pixel
/// noise, scaled to a mean displacement near 2 px. Direction entropy is high.
fn informative_field(rng: &mut CounterRng, h: usize, w: usize) -> Field {
    let cx = rng.uniform() * w as f64;
    let cy = rng.uniform() * h as f64;
    let rot = rng.normal();
    let div = rng.normal();
    let scale = 0.5 / (h.max(w) as f64);
    let mut xs = Vec::with_capacity(h * w);
    let mut ys = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = ((x as f64 + 0.5 - cx) * scale, (y as f64 + 0.5 - cy) * scale);
            xs.push(rot * -dy + div * dx + rng.normal());
            ys.push(rot * dx + div * dy + rng.normal());
        }
    }
    let mean = xs.iter().zip(&ys).map(|(a, b)| a.hypot(*b)).sum::<f64>() / (h * w) as f64;
    let s = 2.0 / mean;
    (
        xs.iter().map(|v| v * s).collect(),
        ys.iter().map(|v| v * s).collect(),
    )
}

/// Uniform translation of 2-4 px in a random direction.
fn panning_field(rng: &mut CounterRng, h: usize, w: usize) -> Field {
    let theta = rng.uniform() * 2.0 * PI;
    let mag = 2.0 + 2.0 * rng.uniform();
    (
        vec![mag * theta.cos(); h * w],
        vec![mag * theta.sin(); h * w],
    )
}

/// Near-zero jitter: 0.1 px in random per-pixel directions.
fn static_field(rng: &mut CounterRng, h: usize, w: usize) -> Field {
    let (mut xs, mut ys) = (Vec::with_capacity(h * w), Vec::with_capacity(h * w));
    for _ in 0..h * w {
        let theta = rng.uniform() * 2.0 * PI;
        xs.push(0.1 * theta.cos());
        ys.push(0.1 * theta.sin());
    }
    (xs, ys)
}

fn perturbed(f: &Field, rng: &mut CounterRng, sigma: f64) -> Field {
    if sigma == 0.0 {
        return f.clone();
    }
    (
        f.0.iter().map(|v| v + sigma * rng.normal()).collect(),
        f.1.iter().map(|v| v + sigma * rng.normal()).collect(),
    )
}

fn write_flows(path: &Path, flows: &[Field], h: usize, w: usize) -> Result<()> {
    let mut data = Vec::with_capacity(flows.len() * 2 * h * w);
    for (xs, ys) in flows {
        data.extend(xs.iter().map(|&v| v as f32));
        data.extend(ys.iter().map(|&v| v as f32));
    }
    write_tensor(&TensorF32::new(vec![flows.len(), 2, h, w], data)?, path)
}

/// Flow videos of `frames - 1` informative fields each.
///
/// Generated items are assigned, in a seeded random order, to three roles:
/// `planted_pairs` copy a run of `run_length` consecutive flows from a
/// distinct training video (label 1); `distractor_pairs` share an identical
/// run with a training video that is pure panning (even distractors) or
/// static (odd ones); `coincidental_pairs` share one single informative flow.
/// Only planted items are labelled positive.
pub fn generate_motion_fixture(spec: &FixtureSpec, out: impl AsRef<Path>) -> Result<FixtureFiles> {
    spec.validate_common()?;
    let (h, w) = (spec.height, spec.width);
    let flows = spec.frames.saturating_sub(1);
    spec.require(h >= 1 && w >= 1, "height, width >= 1")?;
    spec.require(
        spec.run_length >= 1 && flows >= spec.run_length,
        "frames - 1 >= run_length >= 1",
    )?;
    let special = spec.planted_pairs + spec.distractor_pairs + spec.coincidental_pairs;
    spec.require(
        special <= spec.n_generated && special <= spec.n_train,
        "planted + distractor + coincidental items <= min(n_train, n_generated)",
    )?;
    let out = out.as_ref();
    mkdir(&out.join("train"))?;
    mkdir(&out.join("gen"))?;

    let video = |seed_stream: u64| -> Vec<Field> {
        let mut rng = CounterRng::new(spec.seed, seed_stream);
        (0..flows)
            .map(|_| informative_field(&mut rng, h, w))
            .collect()
    };
    let mut train: Vec<Vec<Field>> = (0..spec.n_train)
        .map(|i| video(STREAM_TRAIN + i as u64))
        .collect();
    let mut gen: Vec<Vec<Field>> = (0..spec.n_generated)
        .map(|i| video(STREAM_GEN + i as u64))
        .collect();

    let mut plan = CounterRng::new(spec.seed, STREAM_PLAN);
    let gens = plan.sample_distinct(spec.n_generated, special);
    let trains = plan.sample_distinct(spec.n_train, special);
    let planted: Vec<usize> = gens[..spec.planted_pairs].to_vec();
    for (p, (&g, &t)) in gens.iter().zip(&trains).enumerate() {
        let mut rng = CounterRng::new(spec.seed, STREAM_PLANT + p as u64);
        let role = p;
        if role < spec.planted_pairs {
            let run = spec.run_length;
            let (ts, gs) = (rng.below(flows - run + 1), rng.below(flows - run + 1));
            for n in 0..run {
                gen[g][gs + n] = perturbed(&train[t][ts + n], &mut rng, spec.noise_sigma);
            }
        } else if role < spec.planted_pairs + spec.distractor_pairs {
            let run = spec.run_length;
            let (ts, gs) = (rng.below(flows - run + 1), rng.below(flows - run + 1));
            let panning = (role - spec.planted_pairs).is_multiple_of(2);
            for n in 0..run {
                let f = if panning {
                    panning_field(&mut rng, h, w)
                } else {
                    static_field(&mut rng, h, w)
                };
                train[t][ts + n] = f.clone();
                gen[g][gs + n] = f;
            }
        } else {
            let (ts, gs) = (rng.below(flows), rng.below(flows));
            gen[g][gs] = train[t][ts].clone();
        }
    }

    let entry = |prefix: &str, i: usize| ManifestEntry {
        flow_path: Some(format!("{prefix}/{prefix}_{i:04}.vmt").into()),
        frames: Some(spec.frames as u32),
        height: Some(h as u32),
        width: Some(w as u32),
        ..ManifestEntry::new(format!("{prefix}_{i:04}"))
    };
    let mut train_entries = Vec::new();
    for (i, v) in train.iter().enumerate() {
        let e = entry("train", i);
        write_flows(&out.join(e.flow_path.as_ref().unwrap()), v, h, w)?;
        train_entries.push(e);
    }
    let mut gen_entries = Vec::new();
    for (i, v) in gen.iter().enumerate() {
        let e = entry("gen", i);
        write_flows(&out.join(e.flow_path.as_ref().unwrap()), v, h, w)?;
        gen_entries.push(e);
    }
    finish(out, &train_entries, &gen_entries, &planted)
}

/// Sampling trajectories of `[channels, frames, height, width]` predictions.
///
/// At every step the unconditional prediction is standard normal noise and
/// the conditional one adds a difference: `noise_sigma` times fresh noise,
/// plus, for the `planted_pairs` memorized trajectories, `offset` times a
/// per-trajectory pattern that is fixed across steps and varies across frames.
pub fn generate_latent_fixture(spec: &FixtureSpec, out: impl AsRef<Path>) -> Result<FixtureFiles> {
    spec.validate_common()?;
    spec.require(
        spec.channels >= 1 && spec.frames >= 2 && spec.height >= 1 && spec.width >= 1,
        "channels, height, width >= 1 and frames >= 2",
    )?;
    spec.require(spec.steps >= 1, "steps >= 1")?;
    spec.require(
        spec.planted_pairs <= spec.n_generated,
        "planted_pairs <= n_generated",
    )?;
    spec.require(spec.offset.is_finite(), "finite offset")?;
    let out = out.as_ref();
    mkdir(out)?;
    let dims = vec![spec.channels, spec.frames, spec.height, spec.width];
    let len: usize = dims.iter().product();

    let mut plan = CounterRng::new(spec.seed, STREAM_PLAN);
    let memorized = plan.sample_distinct(spec.n_generated, spec.planted_pairs);
    let mut entries = Vec::with_capacity(spec.n_generated);
    for i in 0..spec.n_generated {
        let mut rng = CounterRng::new(spec.seed, STREAM_GEN + i as u64);
        let pattern: Vec<f64> = if memorized.contains(&i) {
            (0..len).map(|_| spec.offset * rng.normal()).collect()
        } else {
            vec![0.0; len]
        };
        let steps = (0..spec.steps)
            .map(|s| {
                let uncond: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
                let cond: Vec<f64> = uncond
                    .iter()
                    .zip(&pattern)
                    .map(|(u, p)| u + p + spec.noise_sigma * rng.normal())
                    .collect();
                Ok(LatentStep {
                    step: s as u32,
                    eps_cond: TensorF32::new(dims.clone(), to_f32(&cond))?,
                    eps_uncond: TensorF32::new(dims.clone(), to_f32(&uncond))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let id = format!("traj_{i:04}");
        write_trajectory(&LatentTrajectory::new(id.clone(), steps)?, out.join(&id))?;
        entries.push(ManifestEntry {
            latent_dir: Some(id.clone().into()),
            frames: Some(spec.frames as u32),
            ..ManifestEntry::new(id)
        });
    }
    let files = FixtureFiles {
        root: out.to_path_buf(),
        train_manifest: None,
        gen_manifest: out.join("trajectories.jsonl"),
        labels: Some(out.join("labels.csv")),
    };
    write_manifest(&entries, &files.gen_manifest)?;
    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    write_labels(
        &labels_from(&ids, &memorized),
        files.labels.as_ref().unwrap(),
    )?;
    Ok(files)
}

/// Cluster sizes planted by [`generate_feature_fixture`], largest first.
pub const FEATURE_CLUSTERS: [usize; 3] = [5, 3, 2];

/// Dataset features (`n_train` items of width `dim`) with captions. Planted
/// near-duplicate clusters of [`FEATURE_CLUSTERS`] sizes share one caption and
/// a base vector perturbed by `noise_sigma`; every other item is independent
/// with its own caption. Labels mark cluster members.
pub fn generate_feature_fixture(spec: &FixtureSpec, out: impl AsRef<Path>) -> Result<FixtureFiles> {
    spec.validate_common()?;
    let members: usize = FEATURE_CLUSTERS.iter().sum();
    spec.require(spec.dim >= 2, "dim >= 2")?;
    spec.require(
        spec.n_train > members,
        "n_train larger than the planted clusters",
    )?;
    let out = out.as_ref();
    mkdir(&out.join("features"))?;

    let mut plan = CounterRng::new(spec.seed, STREAM_PLAN);
    let slots = plan.sample_distinct(spec.n_train, members);
    let mut cluster_of = vec![None; spec.n_train];
    let mut at = 0;
    for (c, &size) in FEATURE_CLUSTERS.iter().enumerate() {
        for &slot in &slots[at..at + size] {
            cluster_of[slot] = Some(c);
        }
        at += size;
    }
    let bases: Vec<Vec<f64>> = (0..FEATURE_CLUSTERS.len())
        .map(|c| {
            let mut rng = CounterRng::new(spec.seed, STREAM_PLANT + c as u64);
            (0..spec.dim).map(|_| rng.normal()).collect()
        })
        .collect();

    let mut entries = Vec::with_capacity(spec.n_train);
    for (i, cluster) in cluster_of.iter().enumerate() {
        let mut rng = CounterRng::new(spec.seed, STREAM_TRAIN + i as u64);
        let (mut v, caption) = match *cluster {
            Some(c) => {
                let norm = bases[c].iter().map(|x| x * x).sum::<f64>().sqrt();
                let v: Vec<f64> = bases[c]
                    .iter()
                    .map(|b| b / norm + spec.noise_sigma * rng.normal() / (spec.dim as f64).sqrt())
                    .collect();
                (v, format!("duplicated clip {c}"))
            }
            None => (
                (0..spec.dim).map(|_| rng.normal()).collect(),
                format!("clip {i:04}"),
            ),
        };
        unit(&mut v);
        let rel = format!("features/item_{i:04}.vmt");
        write_tensor(&TensorF32::new(vec![spec.dim], to_f32(&v))?, out.join(&rel))?;
        entries.push(ManifestEntry {
            caption: Some(caption),
            feature_path: Some(rel.into()),
            ..ManifestEntry::new(format!("item_{i:04}"))
        });
    }
    let files = FixtureFiles {
        root: out.to_path_buf(),
        train_manifest: None,
        gen_manifest: out.join("features.jsonl"),
        labels: Some(out.join("labels.csv")),
    };
    write_manifest(&entries, &files.gen_manifest)?;
    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    let positives: Vec<usize> = (0..spec.n_train)
        .filter(|&i| cluster_of[i].is_some())
        .collect();
    write_labels(
        &labels_from(&ids, &positives),
        files.labels.as_ref().unwrap(),
    )?;
    Ok(files)
}
