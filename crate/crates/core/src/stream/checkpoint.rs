//! Stream checkpoint container.
//!
//! ```text
//! magic    b"SMRS"
//! version  u32 (currently 1)
//! config   u64  model config hash
//! count    u32  number of sections
//! section  name_len u32 | name (UTF-8) | kind u8 (0 = f32, 1 = u64) | len u64 | len values
//! ```
//!
//! All integers and floats are little-endian. Complex arrays are stored as
//! interleaved `(re, im)` f32 pairs.

use indexmap::IndexMap;
use num_complex::Complex32;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SMRS";
pub const VERSION: u32 = 1;

const KIND_F32: u8 = 0;
const KIND_U64: u8 = 1;

#[derive(Debug)]
pub struct CheckpointWriter {
    config_hash: u64,
    sections: Vec<u8>,
    count: u32,
}

impl CheckpointWriter {
    pub fn new(config_hash: u64) -> Self {
        Self {
            config_hash,
            sections: Vec::new(),
            count: 0,
        }
    }

    fn header(&mut self, name: &str, kind: u8, len: usize) {
        self.sections
            .extend_from_slice(&(name.len() as u32).to_le_bytes());
        self.sections.extend_from_slice(name.as_bytes());
        self.sections.push(kind);
        self.sections.extend_from_slice(&(len as u64).to_le_bytes());
        self.count += 1;
    }

    pub fn f32s(&mut self, name: &str, values: &[f32]) {
        self.header(name, KIND_F32, values.len());
        for v in values {
            self.sections.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn u64s(&mut self, name: &str, values: &[u64]) {
        self.header(name, KIND_U64, values.len());
        for v in values {
            self.sections.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn complex(&mut self, name: &str, values: &[Complex32]) {
        self.header(name, KIND_F32, 2 * values.len());
        for c in values {
            self.sections.extend_from_slice(&c.re.to_le_bytes());
            self.sections.extend_from_slice(&c.im.to_le_bytes());
        }
    }

    pub fn finish(self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.sections.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_hash.to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&self.sections);
        out
    }
}

#[derive(Debug)]
enum Section {
    F32(Vec<f32>),
    U64(Vec<u64>),
}

#[derive(Debug)]
pub struct CheckpointReader {
    config_hash: u64,
    sections: IndexMap<String, Section>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl CheckpointReader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0 };
        if c.take(4)? != MAGIC {
            return Err(Error::Format("not a stream checkpoint (bad magic)".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let config_hash = c.u64()?;
        let count = c.u32()?;
        let mut sections = IndexMap::new();
        for _ in 0..count {
            let name_len = c.u32()? as usize;
            let name = std::str::from_utf8(c.take(name_len)?)
                .map_err(|_| Error::Format("section name is not UTF-8".into()))?
                .to_string();
            let kind = c.take(1)?[0];
            let len = c.u64()? as usize;
            let section = match kind {
                KIND_F32 => Section::F32(
                    c.take(
                        len.checked_mul(4)
                            .ok_or_else(|| Error::Format("section too large".into()))?,
                    )?
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
                ),
                KIND_U64 => Section::U64(
                    c.take(
                        len.checked_mul(8)
                            .ok_or_else(|| Error::Format("section too large".into()))?,
                    )?
                    .chunks_exact(8)
                    .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
                ),
                k => return Err(Error::Format(format!("unknown section kind {k}"))),
            };
            if sections.insert(name.clone(), section).is_some() {
                return Err(Error::Format(format!("duplicate section '{name}'")));
            }
        }
        if c.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            config_hash,
            sections,
        })
    }

    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    pub fn f32s(&self, name: &str, len: usize) -> Result<Vec<f32>> {
        match self.sections.get(name) {
            Some(Section::F32(v)) if v.len() == len => Ok(v.clone()),
            Some(Section::F32(v)) => Err(Error::Format(format!(
                "section '{name}' has {} values, expected {len}",
                v.len()
            ))),
            Some(_) => Err(Error::Format(format!("section '{name}' is not f32"))),
            None => Err(Error::Format(format!("missing section '{name}'"))),
        }
    }

    pub fn u64s(&self, name: &str, len: usize) -> Result<Vec<u64>> {
        match self.sections.get(name) {
            Some(Section::U64(v)) if v.len() == len => Ok(v.clone()),
            Some(Section::U64(v)) => Err(Error::Format(format!(
                "section '{name}' has {} values, expected {len}",
                v.len()
            ))),
            Some(_) => Err(Error::Format(format!("section '{name}' is not u64"))),
            None => Err(Error::Format(format!("missing section '{name}'"))),
        }
    }

    pub fn complex(&self, name: &str, len: usize) -> Result<Vec<Complex32>> {
        Ok(self
            .f32s(name, 2 * len)?
            .chunks_exact(2)
            .map(|p| Complex32::new(p[0], p[1]))
            .collect())
    }
}
