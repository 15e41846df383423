//! Inference-time detection: magnitudes of the conditional minus
//! unconditional prediction, aggregated over more steps for better AUC.

use vidmem::audit::{detect, join_labels, load_trajectories};
use vidmem::detection::AggregationStrategy;
use vidmem::eval::auc;
use vidmem::io::{load_manifest, read_labels};
use vidmem::synth::{generate_latent_fixture, FixtureSpec};

fn main() -> vidmem::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_latent_fixture(&FixtureSpec::latent_default(5), dir.path())?;
    let trajs = load_trajectories(&load_manifest(&files.gen_manifest)?)?;
    let labels = read_labels(files.labels.as_ref().unwrap())?;

    let (series, _) = detect(&trajs[0], AggregationStrategy::AllSteps)?;
    println!(
        "{}: first steps {:?}",
        series.trajectory_id,
        &series.steps[..2]
    );

    for strategy in [
        AggregationStrategy::FirstStep,
        AggregationStrategy::FirstN(10),
        AggregationStrategy::AllSteps,
    ] {
        let start = std::time::Instant::now();
        let signals = trajs
            .iter()
            .map(|t| Ok((t.trajectory_id(), detect(t, strategy)?.1)))
            .collect::<vidmem::Result<Vec<_>>>()?;
        let elapsed = start.elapsed();
        let content = auc(&join_labels(
            signals.iter().map(|(id, s)| (*id, s.0)),
            &labels,
        )?)?;
        let motion = auc(&join_labels(
            signals.iter().map(|(id, s)| (*id, s.1)),
            &labels,
        )?)?;
        println!("{strategy:?}: AUC content {content:.3}, motion {motion:.3}, {elapsed:?}");
    }
    Ok(())
}
