//! Write a tensor, a manifest and a label file, read them back, and show how
//! a damaged tensor file is reported.

use vidmem::io::{
    load_manifest, read_labels, read_tensor, write_labels, write_manifest, write_tensor, LabelFile,
    LabelRecord, ManifestEntry, TensorF32,
};
use vidmem::{Error, FormatError};

fn main() -> vidmem::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("clip.vmt");

    let t = TensorF32::new(vec![2, 3], vec![0.0, -0.0, 1.5, -2.25, 1e-40, 3.0e38])?;
    write_tensor(&t, &path)?;
    let back = read_tensor(&path)?;
    println!(
        "dims {:?}, {} bytes on disk",
        back.dims(),
        std::fs::metadata(&path).unwrap().len()
    );
    assert_eq!(
        back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );

    let entries = vec![ManifestEntry {
        embedding_path: Some("clip.vmt".into()),
        caption: Some("a red kite".into()),
        frames: Some(2),
        ..ManifestEntry::new("clip")
    }];
    write_manifest(&entries, dir.path().join("manifest.jsonl"))?;
    let m = load_manifest(dir.path().join("manifest.jsonl"))?;
    println!(
        "manifest entry resolves to {}",
        m.entries[0].embedding_path.as_ref().unwrap().display()
    );

    let labels = LabelFile {
        records: vec![LabelRecord {
            id: "clip".into(),
            label: true,
        }],
    };
    write_labels(&labels, dir.path().join("labels.csv"))?;
    println!(
        "labels: {:?}",
        read_labels(dir.path().join("labels.csv"))?.as_map()
    );

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 2);
    std::fs::write(&path, bytes).unwrap();
    match read_tensor(&path) {
        Err(Error::Format {
            source: FormatError::Truncated { expected, found },
            ..
        }) => {
            println!("truncated file rejected: expected {expected} bytes, found {found}")
        }
        other => panic!("unexpected: {other:?}"),
    }
    Ok(())
}
