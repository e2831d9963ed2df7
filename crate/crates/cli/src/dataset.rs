//! QTDS dataset files.
//!
//! `"QTDS"`, u32 version, u32 n_qubits, u64 count, then per state the 4^N
//! entries row-major as (re, im) f64 pairs, then a CRC32 of those entries.
//! Integers and floats are little-endian.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use qtomo_core::states::validate;
use qtomo_core::{ComplexMatrix, DensityMatrix, C64};

pub const MAGIC: &[u8; 4] = b"QTDS";
pub const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub version: u32,
    pub n_qubits: usize,
    pub count: usize,
    pub crc: u32,
}

pub fn to_bytes(n_qubits: usize, states: &[DensityMatrix]) -> Vec<u8> {
    let d = 1usize << n_qubits;
    let mut out = Vec::with_capacity(HEADER + states.len() * d * d * 16 + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n_qubits as u32).to_le_bytes());
    out.extend_from_slice(&(states.len() as u64).to_le_bytes());
    for s in states {
        for z in s.matrix().as_slice() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[HEADER..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn read_header(buf: &[u8]) -> Result<DatasetHeader> {
    ensure!(buf.len() >= HEADER + 4, "dataset file truncated");
    ensure!(&buf[..4] == MAGIC, "not a QTDS dataset");
    let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        bail!("unsupported dataset version {version}");
    }
    let n_qubits = u32_at(8) as usize;
    ensure!((1..=4).contains(&n_qubits), "bad qubit count {n_qubits}");
    let count = u64::from_le_bytes(buf[12..20].try_into().unwrap()) as usize;
    let d2 = 1usize << (2 * n_qubits);
    let expected = count
        .checked_mul(d2 * 16)
        .and_then(|p| p.checked_add(HEADER + 4))
        .context("dataset count overflows")?;
    ensure!(
        buf.len() == expected,
        "dataset length {} does not match header ({expected})",
        buf.len()
    );
    let crc = u32_at(buf.len() - 4);
    ensure!(
        crc32fast::hash(&buf[HEADER..buf.len() - 4]) == crc,
        "dataset checksum mismatch"
    );
    Ok(DatasetHeader {
        version,
        n_qubits,
        count,
        crc,
    })
}

pub fn from_bytes(buf: &[u8]) -> Result<(DatasetHeader, Vec<DensityMatrix>)> {
    let h = read_header(buf)?;
    let d = 1usize << h.n_qubits;
    let f64_at = |i: usize| f64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
    let states = (0..h.count)
        .map(|k| {
            let base = HEADER + k * d * d * 16;
            let entries = (0..d * d)
                .map(|e| C64::new(f64_at(base + 16 * e), f64_at(base + 16 * e + 8)))
                .collect();
            let m = ComplexMatrix::from_vec(d, d, entries)?;
            validate(m).with_context(|| format!("state {k} is not a density matrix"))
        })
        .collect::<Result<_>>()?;
    Ok((h, states))
}

pub fn save(path: &Path, n_qubits: usize, states: &[DensityMatrix]) -> Result<()> {
    std::fs::write(path, to_bytes(n_qubits, states))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn load(path: &Path) -> Result<(DatasetHeader, Vec<DensityMatrix>)> {
    let buf = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    from_bytes(&buf).with_context(|| format!("loading {}", path.display()))
}
