//! File formats: VMT tensors, JSON Lines manifests, CSV label/score files and
//! latent trajectory directories.

mod labels;
mod manifest;
mod sequence;
mod tensor;

use std::io::Write;
use std::path::Path;

pub use labels::{
    read_id_captions, read_labels, read_scores, write_labels, LabelFile, LabelRecord, ScoreRow,
};
pub use manifest::{load_manifest, write_manifest, DatasetManifest, ManifestEntry};
pub use sequence::{
    load_trajectory, write_trajectory, EmbeddingSequence, FlowField, FlowSequence, LatentStep,
    LatentTrajectory,
};
pub use tensor::{read_tensor, write_tensor, TensorF32, DTYPE_F32, MAGIC, VERSION};

use crate::error::{Error, Result};

/// Write `bytes` to a temporary file next to `path`, then rename it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
