//! Frame-level content audit of a synthetic fixture: GSSCD best match per
//! generated video, flagged at 0.4, scored against the planted labels.

use vidmem::audit::{
    audit_content, join_labels, load_embeddings, record_scores, Signal, DEFAULT_BLOCK,
};
use vidmem::content::{frame_similarity_matrix, gsscd, vsscd};
use vidmem::eval::{evaluate, summarize, AuditConfig};
use vidmem::io::{load_manifest, read_labels, EmbeddingSequence};
use vidmem::synth::{generate_content_fixture, FixtureSpec};

fn main() -> vidmem::Result<()> {
    let a = EmbeddingSequence::from_rows("a", &[vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let b = EmbeddingSequence::from_rows("b", &[vec![0.0, 1.0], vec![1.0, 1.0]])?;
    let s = frame_similarity_matrix(&a, &b)?;
    println!("S = {:?}", s.values());
    println!("GSSCD {:?}, VSSCD {:.3}", gsscd(&a, &b)?, vsscd(&a, &b)?);

    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_content_fixture(&FixtureSpec::content_default(7), dir.path())?;
    let train = load_embeddings(&load_manifest(files.train_manifest.as_ref().unwrap())?)?;
    let gen = load_embeddings(&load_manifest(&files.gen_manifest)?)?;

    let cfg = AuditConfig::default();
    let records = audit_content(&gen, &train, &cfg, DEFAULT_BLOCK)?;
    println!(
        "{}",
        serde_json::to_string(&summarize(&records, &cfg)?).unwrap()
    );

    let labels = read_labels(files.labels.as_ref().unwrap())?;
    let set = join_labels(record_scores(&records, Signal::Content), &labels)?;
    let e = evaluate(&set, Some(cfg.gsscd_threshold))?;
    println!(
        "AUC {:.3}, F1 at 0.4 {:.3}",
        e.auc,
        e.f1_at_threshold.unwrap()
    );
    for r in records
        .iter()
        .filter(|r| r.content.as_ref().unwrap().memorized)
        .take(3)
    {
        let m = r.content.as_ref().unwrap();
        println!(
            "{} copies {} (frame {:?}, score {:.4})",
            r.gen_id, m.train_id, m.result.argmax, m.result.score
        );
    }
    Ok(())
}
