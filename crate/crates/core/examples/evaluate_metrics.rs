//! AUC with tied scores, F1 at a fixed threshold, and the best threshold.

use vidmem::eval::{auc, best_f1, confusion_at, evaluate, ScoredSet};

fn main() -> vidmem::Result<()> {
    let set = ScoredSet::from_slices(&[0.9, 0.6, 0.4, 0.2], &[true, false, true, false])?;
    println!("AUC {}", auc(&set)?);
    let c = confusion_at(&set, 0.5);
    println!(
        "at 0.5: {c:?}, precision {}, recall {}, F1 {}",
        c.precision(),
        c.recall(),
        c.f1()
    );
    let (t, f1) = best_f1(&set);
    println!("best F1 {f1} at threshold {t}");

    let tied = ScoredSet::from_slices(&[0.5, 0.5, 0.5, 0.1], &[true, false, true, false])?;
    println!(
        "{}",
        serde_json::to_string_pretty(&evaluate(&tied, Some(0.5))?).unwrap()
    );
    Ok(())
}
