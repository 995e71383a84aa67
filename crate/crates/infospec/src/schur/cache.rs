//! On-disk cache for symmetric-power sector blocks.
//!
//! One file per block. Layout, all little-endian:
//! bytes 0..8   magic `SYMBLOCK`
//! bytes 8..16  u64 block dimension `d`
//! bytes 16..24 f64 `ln_scale`
//! then `d * d` entries of (re, im) f64 pairs, row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::operator::{HermitianOperator, C64};

const MAGIC: &[u8; 8] = b"SYMBLOCK";

/// Cache key for one sector block of one operator: digest over the
/// operator entries, its role tag, the blocklength, and the sector.
pub fn block_key(op: &HermitianOperator, tag: &str, n: u32, k: u32) -> String {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update((op.dim() as u64).to_le_bytes());
    for z in op.matrix().iter() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    h.update(n.to_le_bytes());
    h.update(k.to_le_bytes());
    let digest = h.finalize();
    hex::encode(&digest[..16])
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    dir: PathBuf,
}

impl BlockCache {
    /// Opens (creating if needed) a cache directory.
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.blk"))
    }

    pub fn store_block(&self, key: &str, ln_scale: f64, mat: &DMatrix<C64>) -> Result<PathBuf> {
        let d = mat.nrows();
        let mut buf = Vec::with_capacity(24 + 16 * d * d);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(d as u64).to_le_bytes());
        buf.extend_from_slice(&ln_scale.to_le_bytes());
        for i in 0..d {
            for j in 0..d {
                buf.extend_from_slice(&mat[(i, j)].re.to_le_bytes());
                buf.extend_from_slice(&mat[(i, j)].im.to_le_bytes());
            }
        }
        let path = self.path(key);
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Loads a block if present. Corrupt files are reported as errors,
    /// never silently recomputed.
    pub fn load_block(&self, key: &str) -> Result<Option<(f64, DMatrix<C64>)>> {
        let path = self.path(key);
        let mut f = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        if buf.len() < 24 || &buf[0..8] != MAGIC {
            return Err(Error::Input(format!(
                "cache file {} has a bad header",
                path.display()
            )));
        }
        let d = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        let expected = 24 + 16 * d * d;
        if buf.len() != expected {
            return Err(Error::Input(format!(
                "cache file {} is {} bytes, expected {expected}",
                path.display(),
                buf.len()
            )));
        }
        let ln_scale = f64::from_le_bytes(buf[16..24].try_into().unwrap());
        let mut mat = DMatrix::zeros(d, d);
        let mut off = 24;
        for i in 0..d {
            for j in 0..d {
                let re = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
                let im = f64::from_le_bytes(buf[off + 8..off + 16].try_into().unwrap());
                mat[(i, j)] = C64::new(re, im);
                off += 16;
            }
        }
        Ok(Some((ln_scale, mat)))
    }
}
