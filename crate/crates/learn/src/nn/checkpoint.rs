//! Binary weight checkpoints.
//!
//! Layout (all integers little-endian):
//! `"QTNN"`, u32 version, u32 length + model-kind tag, u32 length + metadata
//! text (`key=value` lines), u32 tensor count, per tensor (u32 length + name,
//! u32 rows, u32 cols), u64 value count, then the flat parameters as f64.

use std::collections::BTreeMap;
use std::path::Path;

use qtomo_core::{Error, Result};

use super::weights::ModelWeights;

pub const MAGIC: &[u8; 4] = b"QTNN";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub weights: ModelWeights,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("checkpoint string is not UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.weights.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        let meta: String = self
            .meta
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        put_str(&mut out, &meta);
        out.extend_from_slice(&(self.weights.specs().len() as u32).to_le_bytes());
        for s in self.weights.specs() {
            put_str(&mut out, &s.name);
            out.extend_from_slice(&(s.rows as u32).to_le_bytes());
            out.extend_from_slice(&(s.cols as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.weights.len() as u64).to_le_bytes());
        for v in self.weights.flat() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {version}, expected {VERSION}"
            )));
        }
        let kind = r.string()?;
        let mut meta = BTreeMap::new();
        for line in r.string()?.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad metadata line {line:?}")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let count = r.u32()? as usize;
        let mut weights = ModelWeights::new();
        for _ in 0..count {
            let name = r.string()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            weights.register(&name, rows, cols);
        }
        let n = r.u64()? as usize;
        if n != weights.len() {
            return Err(Error::Format(format!(
                "{n} values for a shape table of {} parameters",
                weights.len()
            )));
        }
        let raw = r.take(8 * n)?;
        for (dst, chunk) in weights.flat_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        if r.pos != buf.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            kind,
            meta,
            weights,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn meta_get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta
            .get(key)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks metadata key {key}")))?
            .parse()
            .map_err(|_| Error::Format(format!("bad value for metadata key {key}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut w = ModelWeights::new();
        let a = w.register("a.w", 2, 2);
        w.register("a.b", 1, 2);
        w.view_mut(a)[[1, 0]] = -3.25;
        let mut meta = BTreeMap::new();
        meta.insert("n_qubits".into(), "2".into());
        Checkpoint {
            kind: "CORR_M".into(),
            meta,
            weights: w,
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.meta_get::<usize>("n_qubits").unwrap(), 2);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(Checkpoint::from_bytes(&long).is_err());
    }
}
