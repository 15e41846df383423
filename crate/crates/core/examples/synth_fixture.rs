//! Fixtures are a pure function of the spec: two runs give identical files.

use std::collections::BTreeMap;
use std::path::Path;

use vidmem::synth::{generate_motion_fixture, CounterRng, FixtureSpec};

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn main() -> vidmem::Result<()> {
    let mut rng = CounterRng::new(42, 0);
    println!(
        "u64 {:#018x}, uniform {:.6}, normal {:.6}",
        rng.next_u64(),
        rng.uniform(),
        rng.normal()
    );

    let spec = FixtureSpec {
        n_train: 10,
        n_generated: 12,
        planted_pairs: 3,
        distractor_pairs: 2,
        ..FixtureSpec::motion_default(42)
    };
    println!("{}", serde_json::to_string(&spec).unwrap());
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate_motion_fixture(&spec, a.path())?;
    generate_motion_fixture(&spec, b.path())?;
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    println!("{} files, identical: {}", ta.len(), ta == tb);
    print!(
        "{}",
        String::from_utf8_lossy(&ta["labels.csv"])
            .lines()
            .take(4)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!();
    Ok(())
}
