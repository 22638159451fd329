//! Binary checkpoints. All integers and floats little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `AXMH` |
//! | 4 | format version (u32) |
//! | 8 + 8 | Nr, Nz (u64) |
//! | 8 + 8 | R, Lz (f64) |
//! | 8 | t (f64) |
//! | 8 | step count (u64) |
//! | 8 | dt (f64) |
//! | 8 | seed (u64) |
//! | 32 | SHA-256 config digest |
//! | 8·Nr·Nz | Γ, z index fastest then r |
//! | 8·Nr·Nz | Π, same layout |
//! | 8 | monitor state length m (u64) |
//! | 8·m | monitor state (f64) |
//!
//! The file must end exactly after the monitor state.

use crate::error::{Error, Result};
use crate::grid::{build_grid, GridRZ, Parity, ScalarFieldRZ};
use crate::solver::State;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub const MAGIC: &[u8; 4] = b"AXMH";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 * 8 + 32;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub nr: usize,
    pub nz: usize,
    pub r_extent: f64,
    pub lz: f64,
    pub t: f64,
    pub step: usize,
    pub dt: f64,
    pub seed: u64,
    pub digest: [u8; 32],
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub state: State,
    pub monitor: Vec<f64>,
}

pub fn encode(state: &State, step: usize, dt: f64, seed: u64, digest: [u8; 32], monitor: &[f64]) -> Vec<u8> {
    let g = state.grid();
    let n = g.nr * g.nz;
    let mut b = Vec::with_capacity(HEADER_LEN + 16 * n + 8 + 8 * monitor.len());
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    b.extend_from_slice(&(g.nr as u64).to_le_bytes());
    b.extend_from_slice(&(g.nz as u64).to_le_bytes());
    b.extend_from_slice(&g.r_extent.to_le_bytes());
    b.extend_from_slice(&g.lz.to_le_bytes());
    b.extend_from_slice(&state.t.to_le_bytes());
    b.extend_from_slice(&(step as u64).to_le_bytes());
    b.extend_from_slice(&dt.to_le_bytes());
    b.extend_from_slice(&seed.to_le_bytes());
    b.extend_from_slice(&digest);
    for v in state.gamma.values.iter().chain(state.pi.values.iter()) {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&(monitor.len() as u64).to_le_bytes());
    for v in monitor {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.b.len());
        match end {
            Some(e) => {
                let s = &self.b[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(Error::Checkpoint(format!("truncated at byte {} of {}", self.b.len(), self.pos.saturating_add(n)))),
        }
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { b: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not an AXMH checkpoint".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("format version {version} unsupported (expected {FORMAT_VERSION})")));
    }
    let nr = r.u64()? as usize;
    let nz = r.u64()? as usize;
    let r_extent = r.f64()?;
    let lz = r.f64()?;
    let t = r.f64()?;
    let step = r.u64()? as usize;
    let dt = r.f64()?;
    let seed = r.u64()?;
    let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    let n = nr.checked_mul(nz).ok_or_else(|| Error::Checkpoint("grid size overflow".into()))?;
    let gamma = r.f64s(n)?;
    let pi = r.f64s(n)?;
    let m = r.u64()? as usize;
    let monitor = r.f64s(m)?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let grid: Arc<GridRZ> = build_grid(nr, nz, r_extent, lz).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let state = State::new(
        t,
        ScalarFieldRZ::with_values(&grid, Parity::Even, gamma),
        ScalarFieldRZ::with_values(&grid, Parity::Even, pi),
    );
    Ok(Checkpoint { header: CheckpointHeader { nr, nz, r_extent, lz, t, step, dt, seed, digest }, state, monitor })
}

/// Writes to a sibling temporary file and renames, so readers never see a partial checkpoint.
pub fn write_checkpoint(
    path: &Path,
    state: &State,
    step: usize,
    dt: f64,
    seed: u64,
    digest: [u8; 32],
    monitor: &[f64],
) -> Result<()> {
    let bytes = encode(state, step, dt, seed, digest, monitor);
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode(&std::fs::read(path)?)
}

/// Refuses a checkpoint written under a different configuration.
pub fn check_digest(ck: &Checkpoint, digest: &[u8; 32]) -> Result<()> {
    if &ck.header.digest != digest {
        return Err(Error::Checkpoint("config digest mismatch: checkpoint was written under a different configuration".into()));
    }
    Ok(())
}
