//! Binary checkpoint container for [`RlscState`].
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "IRLSCKPT"
//! version  u32      1
//! dim      u64
//! classes  u64
//! seen     u64
//! lambda   f64
//! alpha    f64
//! counts   classes x u64
//! factor   dim*dim x f64   (row-major, lower part zero)
//! cross    dim*classes x f64 (row-major)
//! ```
//!
//! Floats are stored as raw bits, so a reload reproduces `weights()` exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{check_alpha, check_lambda, ClassifierError, Result, RlscState};
use crate::linalg::{Matrix, UpperTriangular};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"IRLSCKPT";
const VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> ClassifierError {
    ClassifierError::Checkpoint(msg.into())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| corrupt(format!("truncated while reading {what}: {e}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64(what)).collect()
    }
}

impl RlscState {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.num_classes() as u64).to_le_bytes())?;
        w.write_all(&self.seen.to_le_bytes())?;
        w.write_all(&self.lambda.to_le_bytes())?;
        w.write_all(&self.alpha.to_le_bytes())?;
        for c in &self.counts {
            w.write_all(&c.to_le_bytes())?;
        }
        for v in self.factor.as_slice().iter().chain(self.cross.as_slice()) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader { inner: r };
        let magic: [u8; 8] = r.bytes("magic")?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let dim = r.u64("dim")? as usize;
        let classes = r.u64("class count")? as usize;
        let seen = r.u64("example count")?;
        let lambda = r.f64("lambda")?;
        let alpha = r.f64("alpha")?;
        if dim == 0 {
            return Err(ClassifierError::ZeroDimension);
        }
        check_lambda(lambda)?;
        check_alpha(alpha)?;
        let counts = (0..classes)
            .map(|_| r.u64("counts"))
            .collect::<Result<Vec<_>>>()?;
        if counts.iter().sum::<u64>() != seen {
            return Err(corrupt("class counts do not sum to the example count"));
        }
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(ClassifierError::ZeroCount { class });
        }
        let factor = UpperTriangular::from_raw(dim, r.f64s(dim * dim, "factor")?)?;
        let cross = Matrix::from_row_major(dim, classes, r.f64s(dim * classes, "cross")?)?;
        let mut trailing = [0u8; 1];
        if r.inner.read(&mut trailing)? != 0 {
            return Err(corrupt("trailing bytes after payload"));
        }
        Ok(Self {
            lambda,
            alpha,
            dim,
            factor,
            cross,
            counts,
            seen,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_checkpoint(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_checkpoint(BufReader::new(File::open(path)?))
    }
}
