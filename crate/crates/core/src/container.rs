//! Versioned binary snapshot container.
//!
//! Layout (all integers little endian):
//!
//! ```text
//! magic    8 bytes  "ISOSCAT\0"
//! version  u32
//! kind     u32 length + UTF-8 bytes
//! header   u64 length + UTF-8 JSON
//! count    u64 number of arrays
//! arrays   per array: u64 name length, name bytes, u64 element count, f64 values
//! digest   32 bytes SHA-256 of everything above
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ISOSCAT\0";
pub const VERSION: u32 = 1;

/// Named f64 arrays plus a JSON header, tagged with a kind string.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub header: serde_json::Value,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl Container {
    pub fn new(kind: impl Into<String>, header: serde_json::Value) -> Self {
        Self { kind: kind.into(), header, arrays: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.arrays.push((name.into(), values));
    }

    pub fn array(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Format(format!("missing array '{name}'")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(self.kind.len() as u32).to_le_bytes());
        b.extend_from_slice(self.kind.as_bytes());
        let h = serde_json::to_vec(&self.header).expect("json value serializes");
        b.extend_from_slice(&(h.len() as u64).to_le_bytes());
        b.extend_from_slice(&h);
        b.extend_from_slice(&(self.arrays.len() as u64).to_le_bytes());
        for (name, vals) in &self.arrays {
            b.extend_from_slice(&(name.len() as u64).to_le_bytes());
            b.extend_from_slice(name.as_bytes());
            b.extend_from_slice(&(vals.len() as u64).to_le_bytes());
            for v in vals {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        let d = Sha256::digest(&b);
        b.extend_from_slice(&d);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 32 {
            return Err(Error::CacheCorrupt("container truncated".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::CacheCorrupt("container digest mismatch".into()));
        }
        let mut r = Reader { b: body, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let kl = r.u32()? as usize;
        let kind = String::from_utf8(r.take(kl)?.to_vec()).map_err(|e| Error::Format(e.to_string()))?;
        let hl = r.u64()? as usize;
        let header = serde_json::from_slice(r.take(hl)?)?;
        let count = r.u64()? as usize;
        let mut arrays = Vec::new();
        for _ in 0..count {
            let nl = r.u64()? as usize;
            let name = String::from_utf8(r.take(nl)?.to_vec()).map_err(|e| Error::Format(e.to_string()))?;
            let n = r.u64()? as usize;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("array too large".into()))?)?;
            let vals = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            arrays.push((name, vals));
        }
        if r.pos != body.len() {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(Self { kind, header, arrays })
    }

    /// Writes through a temporary file and renames, so readers never see a partial file.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn expect_kind(self, kind: &str) -> Result<Self> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected a '{kind}' container, found '{}'", self.kind)));
        }
        Ok(self)
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.b.len()).ok_or_else(|| Error::Format("unexpected end of container".into()))?;
        let s = &self.b[self.pos..end];
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

/// Hex SHA-256 of a byte string, used for cache keys and config hashes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        let mut c = Container::new("test", serde_json::json!({"level": 2, "name": "x"}));
        c.push("a", vec![1.0, -2.5, f64::MIN_POSITIVE]);
        c.push("empty", vec![]);
        c
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let back = Container::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.array("a").unwrap()[1], -2.5);
    }

    #[test]
    fn flipped_byte_is_detected() {
        let mut b = sample().to_bytes();
        b[20] ^= 1;
        assert!(matches!(Container::from_bytes(&b), Err(Error::CacheCorrupt(_))));
    }

    #[test]
    fn layout_starts_with_magic_and_version() {
        let b = sample().to_bytes();
        assert_eq!(&b[..8], b"ISOSCAT\0");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), VERSION);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 4);
        assert_eq!(&b[16..20], b"test");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        sample().write(&p).unwrap();
        assert_eq!(Container::read(&p).unwrap(), sample());
        assert!(Container::read(&p).unwrap().expect_kind("other").is_err());
    }
}
