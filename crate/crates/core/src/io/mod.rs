//! On-disk formats.
//!
//! * Descriptor corpora: a little-endian binary container (`HBDC`).
//! * Vocabularies: the ORB-SLAM / DBoW2 text layout (canonical) and a JSON dump of the
//!   in-memory tree (native; keeps the training strategy).
//!
//! Every writer goes through a temporary file in the target directory that is renamed
//! into place, so an interrupted run never leaves a truncated file behind.

mod descriptors;
mod vocab_text;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use descriptors::{
    decode_descriptors, encode_descriptors, read_descriptors, write_descriptors,
};
pub use vocab_text::{parse_vocab_text, read_vocab_text, vocab_to_text, write_vocab_text};

use crate::error::Result;
use crate::vocabulary::Vocabulary;

/// Writes `bytes` to `path` via write-temp-then-rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_vocab_json(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let bytes = serde_json::to_vec(vocab)?;
    write_atomic(path, &bytes)
}

pub fn read_vocab_json(path: &Path) -> Result<Vocabulary> {
    let vocab: Vocabulary = serde_json::from_slice(&fs::read(path)?)?;
    vocab.validate()?;
    Ok(vocab)
}

/// Reads a vocabulary, choosing the format by extension (`.json` native, else text).
pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    if is_json(path) {
        read_vocab_json(path)
    } else {
        read_vocab_text(path)
    }
}

/// Writes a vocabulary, choosing the format by extension (`.json` native, else text).
pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    if is_json(path) {
        write_vocab_json(path, vocab)
    } else {
        write_vocab_text(path, vocab)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
