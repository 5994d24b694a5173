//! Criterion benchmarks for the parsing, verification and solving stages.

use std::path::PathBuf;

/// The bundled mini-corpus manifest.
pub fn corpus_manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/manifest.json")
}
