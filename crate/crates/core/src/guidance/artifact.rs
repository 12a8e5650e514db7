//! Binary containers for precomputed guidance artifacts.
//!
//! Embedding file (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "GRVEC\0\0\0"
//! version  u32      1
//! dim      u32      vector length
//! count    u32      number of records
//! record × count:
//!   id_len u32, id (UTF-8, id_len bytes), dim × f32
//! ```
//!
//! Mask file:
//!
//! ```text
//! magic    8 bytes  "GRMASK\0\0"
//! version  u32      1
//! count    u32      number of records
//! record × count:
//!   id_len u32, id bytes, height u32, width u32, n_masks u32
//!   mask × n_masks:
//!     n_runs u32, n_runs × u32 run lengths over the row-major pixels,
//!     alternating inactive/active and starting with an inactive run
//!     (which may be 0)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::masks::SemanticMaskSet;
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"GRVEC\0\0\0";
pub const MASK_MAGIC: &[u8; 8] = b"GRMASK\0\0";
pub const ARTIFACT_VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Provider(format!("artifact truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Provider("artifact id is not UTF-8".into()))
    }

    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(Error::Provider("artifact has the wrong magic bytes".into()));
        }
        let v = self.u32()?;
        if v != ARTIFACT_VERSION {
            return Err(Error::Provider(format!("unsupported artifact version {v}")));
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

/// `id → f32 vector` records of one fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    dim: usize,
    records: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingFile {
    pub fn new(dim: usize) -> Self {
        EmbeddingFile {
            dim,
            records: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, v: Vec<f32>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Validation(format!(
                "vector has {} entries, container dimension is {}",
                v.len(),
                self.dim
            )));
        }
        self.records.insert(id.into(), v);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.records.get(id).map(Vec::as_slice)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(EMBEDDING_MAGIC);
        put_u32(&mut out, ARTIFACT_VERSION as usize);
        put_u32(&mut out, self.dim);
        put_u32(&mut out, self.records.len());
        for (id, v) in &self.records {
            put_str(&mut out, id);
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        r.header(EMBEDDING_MAGIC)?;
        let dim = r.u32()? as usize;
        let count = r.u32()?;
        let mut file = EmbeddingFile::new(dim);
        for _ in 0..count {
            let id = r.string()?;
            let v = (0..dim).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
            file.records.insert(id, v);
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// `id → mask set` records with run-length encoded masks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaskFile {
    records: BTreeMap<String, SemanticMaskSet>,
}

fn encode_runs(mask: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0;
    for &b in mask {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

fn decode_runs(runs: &[u32], n: usize) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(n);
    for (i, &r) in runs.iter().enumerate() {
        out.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
    }
    if out.len() != n {
        return Err(Error::Provider(format!("mask runs cover {} pixels, expected {n}", out.len())));
    }
    Ok(out)
}

impl MaskFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, masks: SemanticMaskSet) {
        self.records.insert(id.into(), masks);
    }

    pub fn get(&self, id: &str) -> Option<&SemanticMaskSet> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MASK_MAGIC);
        put_u32(&mut out, ARTIFACT_VERSION as usize);
        put_u32(&mut out, self.records.len());
        for (id, ms) in &self.records {
            put_str(&mut out, id);
            put_u32(&mut out, ms.height());
            put_u32(&mut out, ms.width());
            put_u32(&mut out, ms.len());
            for m in ms.masks() {
                let runs = encode_runs(m);
                put_u32(&mut out, runs.len());
                for r in runs {
                    put_u32(&mut out, r);
                }
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        r.header(MASK_MAGIC)?;
        let count = r.u32()?;
        let mut file = MaskFile::new();
        for _ in 0..count {
            let id = r.string()?;
            let h = r.u32()? as usize;
            let w = r.u32()? as usize;
            let n = r.u32()?;
            let mut masks = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let nr = r.u32()?;
                let runs = (0..nr).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                masks.push(decode_runs(&runs, h * w)?);
            }
            let ms = SemanticMaskSet::new(h, w, masks).map_err(|e| Error::Provider(format!("masks for `{id}`: {e}")))?;
            file.records.insert(id, ms);
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}
