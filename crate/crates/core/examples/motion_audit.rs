//! Motion audit with OFS-3: the natural motion filter drops panning and
//! static windows, so copied camera moves stop counting as memorization.

use vidmem::audit::{audit_motion, join_labels, load_flows, record_scores, Signal};
use vidmem::eval::{f1_at, AuditConfig};
use vidmem::io::{load_manifest, read_labels};
use vidmem::motion::{classify_sequence, NmfConfig};
use vidmem::synth::{generate_motion_fixture, FixtureSpec};

fn main() -> vidmem::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_motion_fixture(&FixtureSpec::motion_default(3), dir.path())?;
    let train = load_flows(&load_manifest(files.train_manifest.as_ref().unwrap())?)?;
    let gen = load_flows(&load_manifest(&files.gen_manifest)?)?;
    let labels = read_labels(files.labels.as_ref().unwrap())?;
    let nmf = NmfConfig::default();

    let kinds: Vec<_> = train
        .iter()
        .flat_map(|s| classify_sequence(s, &nmf))
        .map(|c| c.kind)
        .collect();
    for kind in [
        vidmem::motion::FlowKind::Informative,
        vidmem::motion::FlowKind::Panning,
        vidmem::motion::FlowKind::Static,
    ] {
        println!(
            "{kind:?}: {} training flows",
            kinds.iter().filter(|&&k| k == kind).count()
        );
    }

    for nmf_enabled in [true, false] {
        let cfg = AuditConfig {
            nmf_enabled,
            ..AuditConfig::default()
        };
        let records = audit_motion(&gen, &train, &cfg, &nmf)?;
        let set = join_labels(record_scores(&records, Signal::Motion), &labels)?;
        let flagged = records
            .iter()
            .filter(|r| r.motion.as_ref().unwrap().memorized)
            .count();
        println!(
            "NMF {nmf_enabled}: {flagged} flagged, F1 {:.3}",
            f1_at(&set, cfg.ofs_threshold)
        );
    }
    Ok(())
}
