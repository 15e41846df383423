//! Exact top-k near-duplicate search over dataset features, duplication
//! counts, and a prompt set ranked by duplication.

use vidmem::dedup::{curate_prompts, duplication_counts, topk_neighbors, FeatureIndex};
use vidmem::io::load_manifest;
use vidmem::synth::{generate_feature_fixture, FixtureSpec};

fn main() -> vidmem::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_feature_fixture(&FixtureSpec::features_default(9), dir.path())?;
    let index = FeatureIndex::from_manifest(&load_manifest(&files.gen_manifest)?)?;

    let lists = topk_neighbors(&index, 10, 64, 64)?;
    let report = duplication_counts(&index, &lists, 0.95)?;
    let prompts = curate_prompts(&index, &report, 5)?;

    for e in &prompts.entries {
        let pos = index
            .ids()
            .iter()
            .position(|id| *id == e.source_video_id)
            .unwrap();
        println!(
            "{:>3} duplicates  {:<20} {}",
            report.items[pos].duplication_count, e.caption, e.source_video_id
        );
    }
    print!("{}", String::from_utf8(prompts.to_csv_bytes()).unwrap());
    Ok(())
}
