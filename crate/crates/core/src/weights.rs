//! Weight container and deterministic initialization.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! magic   b"SMRW"
//! version u32 (= 1)
//! hash    u64   ModelConfig::hash of the graph the weights belong to
//! count   u32
//! count × { name_len u32, name utf-8, ndims u32, dims u32 × ndims,
//!           data f32 × prod(dims) }
//! ```

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::model::{fnv1a64, parameter_specs, ModelConfig};
use crate::tensor::{seeded_init, SplitMix64, Tensor};

pub const MAGIC: &[u8; 4] = b"SMRW";
pub const VERSION: u32 = 1;

/// Ordered map of parameter name to tensor, tagged with a config hash.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore {
    config_hash: u64,
    tensors: IndexMap<String, Tensor>,
}

impl WeightStore {
    pub fn new(config_hash: u64) -> Self {
        Self {
            config_hash,
            tensors: IndexMap::new(),
        }
    }

    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }

    /// Inserts a tensor; a name may only be used once.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::Format(format!("duplicate parameter '{name}'")));
        }
        self.tensors.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * self.parameter_count() + 64 * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_hash.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a weight file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported weight file version {version}"
            )));
        }
        let mut store = Self::new(r.u64()?);
        let count = r.u32()?;
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
                .to_string();
            let ndims = r.u32()? as usize;
            let shape = (0..ndims)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n
                .filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| Error::Format(format!("tensor '{name}' is truncated")))?;
            let data = r
                .take(4 * n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            store.insert(name, Tensor::from_vec(&shape, data)?)?;
        }
        if r.remaining() != 0 {
            return Err(Error::Format(format!(
                "{} trailing bytes after last tensor",
                r.remaining()
            )));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Reads a weight file and checks that it was made for `cfg`.
    pub fn load(path: impl AsRef<Path>, cfg: &ModelConfig) -> Result<Self> {
        let store = Self::load_unchecked(path)?;
        if store.config_hash != cfg.hash() {
            return Err(Error::Format(format!(
                "weight file config hash {:016x} does not match config '{}' ({:016x})",
                store.config_hash,
                cfg.preset,
                cfg.hash()
            )));
        }
        Ok(store)
    }

    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Format("weight file truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(a))
    }
}

/// Seed of one parameter, derived from the model seed and its name.
pub fn parameter_seed(seed: u64, name: &str) -> u64 {
    SplitMix64::new(seed ^ fnv1a64(name.as_bytes())).next_u64()
}

/// Seeded initialization of every graph parameter.
pub fn init_weights(cfg: &ModelConfig, seed: u64) -> Result<WeightStore> {
    cfg.validate()?;
    let mut store = WeightStore::new(cfg.hash());
    for spec in parameter_specs(cfg) {
        let t = seeded_init(&spec.shape, parameter_seed(seed, &spec.name), spec.init);
        store.insert(spec.name, t)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::shapes::parameter_count;

    #[test]
    fn init_is_deterministic() {
        let cfg = ModelConfig::with_embed_dim(4);
        let a = init_weights(&cfg, 7).unwrap();
        let b = init_weights(&cfg, 7).unwrap();
        let c = init_weights(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.parameter_count(), parameter_count(&cfg));
    }

    #[test]
    fn bytes_round_trip() {
        let cfg = ModelConfig::with_embed_dim(3);
        let a = init_weights(&cfg, 1).unwrap();
        let b = WeightStore::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(a, b);
        assert!(a.names().eq(b.names()));
    }

    #[test]
    fn hash_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let cfg = ModelConfig::with_embed_dim(3);
        init_weights(&cfg, 1).unwrap().save(&path).unwrap();
        assert!(WeightStore::load(&path, &cfg).is_ok());
        let other = ModelConfig::with_embed_dim(4);
        assert!(matches!(
            WeightStore::load(&path, &other),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn corrupt_files_rejected() {
        let cfg = ModelConfig::with_embed_dim(2);
        let bytes = init_weights(&cfg, 1).unwrap().to_bytes();
        assert!(WeightStore::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(WeightStore::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(WeightStore::from_bytes(&extra).is_err());
        assert!(WeightStore::from_bytes(&[]).is_err());
    }
}
