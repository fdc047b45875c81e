//! On-disk checkpoints for long block sums.
//!
//! A checkpoint file holds the certified partial sums of a contiguous run of
//! blocks ("chunk"). Files are named by verb, `j`, block range and a hash of
//! the configuration that determines the sums, so runs with different
//! settings never read each other's files. Floats are stored as their bit
//! patterns so that resumed runs are bit-identical to uninterrupted ones.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::CertifiedValue;
use crate::SCHEMA_VERSION;

/// Hex SHA-256 of the JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub index: u64,
    pub lo: u64,
    pub hi: u64,
    pub value_bits: String,
    pub radius_bits: String,
}

impl BlockRecord {
    pub fn new(index: u64, lo: u64, hi: u64, v: CertifiedValue) -> Self {
        Self {
            index,
            lo,
            hi,
            value_bits: format!("{:016x}", v.value.to_bits()),
            radius_bits: format!("{:016x}", v.error_radius.to_bits()),
        }
    }

    pub fn value(&self) -> Result<CertifiedValue> {
        let parse = |s: &str| {
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|e| Error::Checkpoint(format!("bad float encoding {s:?}: {e}")))
        };
        CertifiedValue::new(parse(&self.value_bits)?, parse(&self.radius_bits)?)
            .map_err(|e| Error::Checkpoint(format!("invalid stored value: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub schema_version: u32,
    pub verb: String,
    pub j: u32,
    pub config_hash: String,
    pub chunk_index: u64,
    pub blocks: Vec<BlockRecord>,
}

/// Identifies the sum a set of checkpoint files belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointKey {
    pub verb: String,
    pub j: u32,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct CheckpointStore {
    dir: PathBuf,
}

impl CheckpointStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CheckpointKey, first_block: u64, last_block: u64) -> PathBuf {
        self.dir.join(format!(
            "{}-j{}-b{}-{}-{}.json",
            key.verb,
            key.j,
            first_block,
            last_block,
            &key.config_hash[..16.min(key.config_hash.len())]
        ))
    }

    /// Loads the chunk covering blocks `first_block..=last_block`, if present.
    pub fn load(&self, key: &CheckpointKey, chunk_index: u64, first_block: u64, last_block: u64) -> Result<Option<ChunkRecord>> {
        let path = self.path_for(key, first_block, last_block);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let rec: ChunkRecord = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        let expected_blocks = (last_block - first_block + 1) as usize;
        if rec.schema_version != SCHEMA_VERSION
            || rec.verb != key.verb
            || rec.j != key.j
            || rec.config_hash != key.config_hash
            || rec.chunk_index != chunk_index
            || rec.blocks.len() != expected_blocks
            || rec.blocks.iter().zip(first_block..).any(|(b, i)| b.index != i)
        {
            return Err(Error::Checkpoint(format!(
                "{} does not match the current configuration",
                path.display()
            )));
        }
        Ok(Some(rec))
    }

    /// Writes a chunk atomically (temp file, then rename).
    pub fn save(&self, key: &CheckpointKey, rec: &ChunkRecord) -> Result<()> {
        let first = rec.blocks.first().map_or(0, |b| b.index);
        let last = rec.blocks.last().map_or(0, |b| b.index);
        let path = self.path_for(key, first, last);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(rec)?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Number of checkpoint files currently in the directory.
    pub fn file_count(&self) -> Result<usize> {
        let mut n = 0;
        for entry in fs::read_dir(&self.dir)? {
            if entry?.path().extension().is_some_and(|e| e == "json") {
                n += 1;
            }
        }
        Ok(n)
    }
}
