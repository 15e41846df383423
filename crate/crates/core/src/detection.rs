//! Inference-time memorization signals from conditional and unconditional
//! noise predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{LatentTrajectory, TensorF32};

fn check_same(cond: &TensorF32, uncond: &TensorF32) -> Result<()> {
    if cond.dims() != uncond.dims() {
        return Err(Error::Shape(format!(
            "conditional {:?} vs unconditional {:?}",
            cond.dims(),
            uncond.dims()
        )));
    }
    Ok(())
}

/// `(frames, H * W)` of a `[C, F, H, W]` tensor.
fn frames_of(t: &TensorF32) -> Result<(usize, usize)> {
    match *t.dims() {
        [_, f, h, w] => Ok((f, h * w)),
        ref d => Err(Error::Shape(format!("expected [C, F, H, W], got {d:?}"))),
    }
}

/// `||eps_cond - eps_uncond||_2` over every element.
pub fn step_magnitude_image(eps_cond: &TensorF32, eps_uncond: &TensorF32) -> Result<f64> {
    check_same(eps_cond, eps_uncond)?;
    Ok(eps_cond
        .data()
        .iter()
        .zip(eps_uncond.data())
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// Squared norm over (c, h, w) of `value(c, hw)` for one frame position.
fn frame_sq_norm(
    channels: usize,
    frames: usize,
    hw: usize,
    mut value: impl FnMut(usize) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for c in 0..channels {
        let base = c * frames * hw;
        for p in 0..hw {
            let v = value(base + p);
            acc += v * v;
        }
    }
    acc
}

/// Largest per-frame L2 norm of the conditional minus unconditional
/// prediction, for `[C, F, H, W]` inputs.
pub fn content_magnitude(eps_cond: &TensorF32, eps_uncond: &TensorF32) -> Result<f64> {
    check_same(eps_cond, eps_uncond)?;
    let (frames, hw) = frames_of(eps_cond)?;
    let channels = eps_cond.dims()[0];
    let (a, b) = (eps_cond.data(), eps_uncond.data());
    let best = (0..frames)
        .map(|i| {
            let off = i * hw;
            frame_sq_norm(channels, frames, hw, |k| {
                f64::from(a[k + off]) - f64::from(b[k + off])
            })
        })
        .fold(0.0, f64::max);
    Ok(best.sqrt())
}

/// Largest L2 norm, over consecutive frame pairs, of the conditional frame
/// transition minus the unconditional one. Needs at least two frames.
pub fn motion_magnitude(eps_cond: &TensorF32, eps_uncond: &TensorF32) -> Result<f64> {
    check_same(eps_cond, eps_uncond)?;
    let (frames, hw) = frames_of(eps_cond)?;
    if frames < 2 {
        return Err(Error::Shape(format!(
            "motion magnitude needs at least 2 frames, got {frames}"
        )));
    }
    let channels = eps_cond.dims()[0];
    let (a, b) = (eps_cond.data(), eps_uncond.data());
    let best = (0..frames - 1)
        .map(|i| {
            let (cur, next) = (i * hw, (i + 1) * hw);
            frame_sq_norm(channels, frames, hw, |k| {
                let dc = f64::from(a[k + next]) - f64::from(a[k + cur]);
                let du = f64::from(b[k + next]) - f64::from(b[k + cur]);
                dc - du
            })
        })
        .fold(0.0, f64::max);
    Ok(best.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMagnitude {
    pub step: u32,
    pub m_content: f64,
    pub m_motion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeSeries {
    pub trajectory_id: String,
    pub steps: Vec<StepMagnitude>,
}

pub fn magnitude_series(traj: &LatentTrajectory) -> Result<MagnitudeSeries> {
    magnitude_series_prefix(traj, traj.steps().len())
}

/// Magnitudes of the first `n` steps only (all of them if `n` is larger).
pub fn magnitude_series_prefix(traj: &LatentTrajectory, n: usize) -> Result<MagnitudeSeries> {
    let steps = traj
        .steps()
        .iter()
        .take(n)
        .map(|s| {
            let tag = |e: Error| Error::Step {
                step: s.step,
                message: e.to_string(),
            };
            Ok(StepMagnitude {
                step: s.step,
                m_content: content_magnitude(&s.eps_cond, &s.eps_uncond).map_err(tag)?,
                m_motion: motion_magnitude(&s.eps_cond, &s.eps_uncond).map_err(tag)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MagnitudeSeries {
        trajectory_id: traj.trajectory_id().to_string(),
        steps,
    })
}

/// How per-step magnitudes collapse into one signal per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "n", rename_all = "snake_case")]
pub enum AggregationStrategy {
    /// Values at the first inference step.
    FirstStep,
    /// Mean over the first `n` steps.
    FirstN(usize),
    /// Mean over every step.
    AllSteps,
}

impl AggregationStrategy {
    /// Number of leading steps this strategy reads, given `total` available.
    pub fn steps_used(&self, total: usize) -> usize {
        match *self {
            AggregationStrategy::FirstStep => 1,
            AggregationStrategy::FirstN(n) => n,
            AggregationStrategy::AllSteps => total,
        }
    }
}

/// `(content_signal, motion_signal)`.
pub fn aggregate(series: &MagnitudeSeries, strategy: AggregationStrategy) -> Result<(f64, f64)> {
    let total = series.steps.len();
    let n = strategy.steps_used(total);
    if n == 0 || n > total {
        return Err(Error::InvalidParameter(format!(
            "{strategy:?} needs {n} steps, trajectory {} has {total}",
            series.trajectory_id
        )));
    }
    let used = &series.steps[..n];
    let c = used.iter().map(|s| s.m_content).sum::<f64>() / n as f64;
    let m = used.iter().map(|s| s.m_motion).sum::<f64>() / n as f64;
    Ok((c, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::LatentStep;

    fn t(dims: &[usize], data: &[f32]) -> TensorF32 {
        TensorF32::new(dims.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn image_step_magnitude() {
        let a = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[1, 2, 2], &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(step_magnitude_image(&a, &a).unwrap(), 0.0);
        assert_eq!(step_magnitude_image(&a, &b).unwrap(), 2.0);
        let c = t(&[1, 4], &[0.0; 4]);
        assert!(step_magnitude_image(&a, &c).is_err());
    }

    #[test]
    fn content_example() {
        let cond = t(&[1, 2, 1, 1], &[3.0, -4.0]);
        let zero = t(&[1, 2, 1, 1], &[0.0, 0.0]);
        assert_eq!(content_magnitude(&cond, &zero).unwrap(), 4.0);
        assert_eq!(content_magnitude(&cond, &cond).unwrap(), 0.0);
    }

    #[test]
    fn motion_example() {
        let cond = t(&[1, 3, 1, 1], &[0.0, 1.0, 3.0]);
        let zero = t(&[1, 3, 1, 1], &[0.0; 3]);
        assert_eq!(motion_magnitude(&cond, &zero).unwrap(), 2.0);
        assert_eq!(motion_magnitude(&cond, &cond).unwrap(), 0.0);
        let one = t(&[1, 1, 1, 1], &[1.0]);
        assert!(motion_magnitude(&one, &one).is_err());
    }

    #[test]
    fn aggregation_examples() {
        let s = MagnitudeSeries {
            trajectory_id: "x".into(),
            steps: vec![
                StepMagnitude {
                    step: 0,
                    m_content: 2.0,
                    m_motion: 1.0,
                },
                StepMagnitude {
                    step: 1,
                    m_content: 4.0,
                    m_motion: 3.0,
                },
            ],
        };
        assert_eq!(
            aggregate(&s, AggregationStrategy::FirstStep).unwrap(),
            (2.0, 1.0)
        );
        assert_eq!(
            aggregate(&s, AggregationStrategy::AllSteps).unwrap(),
            (3.0, 2.0)
        );
        assert_eq!(
            aggregate(&s, AggregationStrategy::FirstN(2)).unwrap(),
            (3.0, 2.0)
        );
        assert!(aggregate(&s, AggregationStrategy::FirstN(3)).is_err());
        assert!(aggregate(&s, AggregationStrategy::FirstN(0)).is_err());
    }

    #[test]
    fn single_frame_series_names_step() {
        let one = t(&[1, 1, 1, 1], &[1.0]);
        let traj = LatentTrajectory::new(
            "single",
            vec![
                LatentStep {
                    step: 7,
                    eps_cond: one.clone(),
                    eps_uncond: one.clone(),
                },
                LatentStep {
                    step: 8,
                    eps_cond: one.clone(),
                    eps_uncond: one,
                },
            ],
        )
        .unwrap();
        let err = magnitude_series(&traj).unwrap_err();
        assert!(matches!(err, Error::Step { step: 7, .. }));
    }
}
