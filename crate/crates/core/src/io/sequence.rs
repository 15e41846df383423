use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::tensor::{read_tensor, write_tensor, TensorF32};

/// Per-frame embedding matrix `[N, D]` for one video, or one image when `N == 1`.
/// Rows are L2-normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    video_id: String,
    frames: usize,
    width: usize,
    rows: Vec<f32>,
}

impl EmbeddingSequence {
    /// Accepts `[N, D]`, or `[D]` as a single frame. Zero-norm rows are an error.
    pub fn from_tensor(video_id: impl Into<String>, tensor: TensorF32) -> Result<Self> {
        let video_id = video_id.into();
        let (frames, width) = match *tensor.dims() {
            [d] => (1, d),
            [n, d] => (n, d),
            ref dims => {
                return Err(Error::Shape(format!(
                    "{video_id}: embeddings must be [N, D], got {dims:?}"
                )))
            }
        };
        let (_, mut rows) = tensor.into_parts();
        for (r, row) in rows.chunks_exact_mut(width).enumerate() {
            let norm = row
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNorm {
                    id: video_id,
                    row: r,
                });
            }
            for v in row.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
        Ok(Self {
            video_id,
            frames,
            width,
            rows,
        })
    }

    pub fn from_rows(video_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Shape("ragged embedding rows".into()));
        }
        let t = TensorF32::new(vec![rows.len(), width], rows.concat())?;
        Self::from_tensor(video_id, t)
    }

    pub fn load(video_id: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(video_id, read_tensor(path)?)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    /// All rows back to back, i.e. the concatenated per-frame embedding.
    pub fn as_flat(&self) -> &[f32] {
        &self.rows
    }

    pub fn to_tensor(&self) -> TensorF32 {
        TensorF32::new(vec![self.frames, self.width], self.rows.clone())
            .expect("validated on construction")
    }
}

/// A single `[2, H, W]` displacement field; x components first, then y.
#[derive(Debug, Clone, Copy)]
pub struct FlowField<'a> {
    height: usize,
    width: usize,
    data: &'a [f32],
}

impl<'a> FlowField<'a> {
    pub fn new(height: usize, width: usize, data: &'a [f32]) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != 2 * height * width {
            return Err(Error::Shape(format!(
                "flow field [2, {height}, {width}] needs {} values, got {}",
                2 * height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn xs(&self) -> &'a [f32] {
        &self.data[..self.pixels()]
    }

    pub fn ys(&self) -> &'a [f32] {
        &self.data[self.pixels()..]
    }
}

/// Optical flow between consecutive frames of one video: `[M, 2, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSequence {
    video_id: String,
    flows: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FlowSequence {
    /// Accepts `[M, 2, H, W]`, or `[2, H, W]` as a single flow.
    pub fn from_tensor(video_id: impl Into<String>, tensor: TensorF32) -> Result<Self> {
        let video_id = video_id.into();
        let (flows, comps, height, width) = match *tensor.dims() {
            [c, h, w] => (1, c, h, w),
            [m, c, h, w] => (m, c, h, w),
            ref dims => {
                return Err(Error::Shape(format!(
                    "{video_id}: flows must be [M, 2, H, W], got {dims:?}"
                )))
            }
        };
        if comps != 2 {
            return Err(Error::Shape(format!(
                "{video_id}: flow component axis has extent {comps}, expected 2"
            )));
        }
        let (_, data) = tensor.into_parts();
        Ok(Self {
            video_id,
            flows,
            height,
            width,
            data,
        })
    }

    pub fn load(video_id: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(video_id, read_tensor(path)?)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn flows(&self) -> usize {
        self.flows
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn field(&self, i: usize) -> FlowField<'_> {
        let len = 2 * self.height * self.width;
        FlowField {
            height: self.height,
            width: self.width,
            data: &self.data[i * len..(i + 1) * len],
        }
    }

    pub fn fields(&self) -> impl Iterator<Item = FlowField<'_>> {
        (0..self.flows).map(|i| self.field(i))
    }

    pub fn to_tensor(&self) -> TensorF32 {
        TensorF32::new(
            vec![self.flows, 2, self.height, self.width],
            self.data.clone(),
        )
        .expect("validated on construction")
    }
}

/// Conditional and unconditional noise predictions captured at one inference step.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStep {
    pub step: u32,
    pub eps_cond: TensorF32,
    pub eps_uncond: TensorF32,
}

/// Per-step `[C, F, H, W]` noise predictions for one sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    trajectory_id: String,
    steps: Vec<LatentStep>,
}

impl LatentTrajectory {
    pub fn new(trajectory_id: impl Into<String>, steps: Vec<LatentStep>) -> Result<Self> {
        let trajectory_id = trajectory_id.into();
        let first = steps
            .first()
            .ok_or_else(|| Error::Empty(format!("trajectory {trajectory_id} has no steps")))?;
        let dims = first.eps_cond.dims().to_vec();
        if dims.len() != 4 {
            return Err(Error::Step {
                step: first.step,
                message: format!("latents must be [C, F, H, W], got {dims:?}"),
            });
        }
        for (i, s) in steps.iter().enumerate() {
            if s.eps_cond.dims() != dims.as_slice() || s.eps_uncond.dims() != dims.as_slice() {
                return Err(Error::Step {
                    step: s.step,
                    message: format!(
                        "shape {:?} / {:?} differs from {dims:?}",
                        s.eps_cond.dims(),
                        s.eps_uncond.dims()
                    ),
                });
            }
            if i > 0 && s.step <= steps[i - 1].step {
                return Err(Error::Step {
                    step: s.step,
                    message: "step indices must be strictly increasing".into(),
                });
            }
        }
        Ok(Self {
            trajectory_id,
            steps,
        })
    }

    pub fn trajectory_id(&self) -> &str {
        &self.trajectory_id
    }

    pub fn steps(&self) -> &[LatentStep] {
        &self.steps
    }

    /// `[C, F, H, W]` shared by every step.
    pub fn dims(&self) -> &[usize] {
        self.steps[0].eps_cond.dims()
    }
}

fn parse_step_name(name: &str) -> Option<(u32, bool)> {
    let rest = name.strip_prefix("step_")?;
    let (digits, cond) = if let Some(d) = rest.strip_suffix("_uncond.vmt") {
        (d, false)
    } else {
        (rest.strip_suffix("_cond.vmt")?, true)
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(|s| (s, cond))
}

/// Load a trajectory directory of `step_{t:04}_cond.vmt` / `step_{t:04}_uncond.vmt`
/// pairs. Unrelated files are ignored; the trajectory id is the directory name.
pub fn load_trajectory(dir: impl AsRef<Path>) -> Result<LatentTrajectory> {
    let dir = dir.as_ref();
    let mut pairs: BTreeMap<u32, (Option<TensorF32>, Option<TensorF32>)> = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some((step, cond)) = name.to_str().and_then(parse_step_name) else {
            continue;
        };
        let t = read_tensor(entry.path())?;
        let slot = pairs.entry(step).or_default();
        let target = if cond { &mut slot.0 } else { &mut slot.1 };
        if target.replace(t).is_some() {
            return Err(Error::Step {
                step,
                message: "more than one file for the same role".into(),
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::Empty(format!(
            "{} contains no step files",
            dir.display()
        )));
    }
    let steps = pairs
        .into_iter()
        .map(|(step, pair)| match pair {
            (Some(eps_cond), Some(eps_uncond)) => Ok(LatentStep {
                step,
                eps_cond,
                eps_uncond,
            }),
            (None, _) => Err(Error::Step {
                step,
                message: "missing conditional prediction".into(),
            }),
            (_, None) => Err(Error::Step {
                step,
                message: "missing unconditional prediction".into(),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    LatentTrajectory::new(id, steps)
}

pub fn write_trajectory(traj: &LatentTrajectory, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in traj.steps() {
        write_tensor(
            &s.eps_cond,
            dir.join(format!("step_{:04}_cond.vmt", s.step)),
        )?;
        write_tensor(
            &s.eps_uncond,
            dir.join(format!("step_{:04}_uncond.vmt", s.step)),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeddings_are_normalized() {
        let e = EmbeddingSequence::from_rows("v", &[vec![3.0, 4.0], vec![0.0, -2.0]]).unwrap();
        assert_eq!(e.row(0), &[0.6, 0.8]);
        assert_eq!(e.row(1), &[0.0, -1.0]);
    }

    #[test]
    fn zero_row_is_rejected() {
        let err = EmbeddingSequence::from_rows("v", &[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::ZeroNorm { row: 1, .. }));
    }

    #[test]
    fn vector_is_single_frame() {
        let t = TensorF32::new(vec![3], vec![1.0, 2.0, 2.0]).unwrap();
        let e = EmbeddingSequence::from_tensor("img", t).unwrap();
        assert_eq!((e.frames(), e.width()), (1, 3));
    }

    #[test]
    fn flow_component_axis_must_be_two() {
        let t = TensorF32::zeros(vec![2, 3, 4, 4]).unwrap();
        assert!(FlowSequence::from_tensor("f", t).is_err());
        let t = TensorF32::zeros(vec![2, 2, 4, 5]).unwrap();
        let f = FlowSequence::from_tensor("f", t).unwrap();
        assert_eq!((f.flows(), f.height(), f.width()), (2, 4, 5));
        assert_eq!(f.field(1).xs().len(), 20);
    }

    #[test]
    fn step_names() {
        assert_eq!(parse_step_name("step_0003_cond.vmt"), Some((3, true)));
        assert_eq!(parse_step_name("step_0012_uncond.vmt"), Some((12, false)));
        assert_eq!(parse_step_name("step__cond.vmt"), None);
        assert_eq!(parse_step_name("step_00x1_cond.vmt"), None);
        assert_eq!(parse_step_name("notes.txt"), None);
    }

    fn latent(c: usize, f: usize, fill: f32) -> TensorF32 {
        TensorF32::new(vec![c, f, 1, 1], vec![fill; c * f]).unwrap()
    }

    #[test]
    fn trajectory_validation() {
        let step = |s, f| LatentStep {
            step: s,
            eps_cond: latent(1, f, 1.0),
            eps_uncond: latent(1, f, 0.0),
        };
        assert!(LatentTrajectory::new("t", vec![]).is_err());
        assert!(LatentTrajectory::new("t", vec![step(1, 2), step(1, 2)]).is_err());
        assert!(LatentTrajectory::new("t", vec![step(0, 2), step(1, 3)]).is_err());
        assert!(LatentTrajectory::new("t", vec![step(0, 2), step(5, 2)]).is_ok());
    }

    #[test]
    fn trajectory_dir_roundtrip_and_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("traj_a");
        let steps = (0..3)
            .map(|s| LatentStep {
                step: s * 2,
                eps_cond: latent(2, 3, s as f32),
                eps_uncond: latent(2, 3, 0.5),
            })
            .collect();
        let traj = LatentTrajectory::new("traj_a", steps).unwrap();
        write_trajectory(&traj, &dir).unwrap();
        assert_eq!(load_trajectory(&dir).unwrap(), traj);

        fs::remove_file(dir.join("step_0002_uncond.vmt")).unwrap();
        let err = load_trajectory(&dir).unwrap_err();
        assert!(matches!(err, Error::Step { step: 2, .. }), "{err}");

        let empty = tmp.path().join("empty");
        fs::create_dir(&empty).unwrap();
        assert!(matches!(load_trajectory(&empty), Err(Error::Empty(_))));
    }
}
