//! Artifact writers. Every file is written to a temporary name in the target
//! directory and renamed into place.
//!
//! Binary density snapshots (`density_<k>.bin`) are little-endian:
//!
//! ```text
//! magic   b"LSVD"
//! version u32 = 1
//! n_s     u64         n_y u64
//! t       f64
//! s_min   f64         ds  f64
//! y_min   f64         dy  f64
//! payload n_s * n_y f64, row-major with y fastest: p(S_i, y_j) at i * n_y + j
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::grid::{Field3, GridSpec};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"LSVD";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

/// CSV of one or more `(t, S)` fields sharing the grid.
pub fn ts_csv(header: &str, grid: &GridSpec, fields: &[&Field3]) -> String {
    let nt = fields[0].nt;
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for k in 0..nt {
        for i in 0..grid.n_s() {
            let _ = write!(out, "{},{}", grid.t(k), grid.s(i));
            for f in fields {
                let _ = write!(out, ",{}", f.get(k, i, 0));
            }
            out.push('\n');
        }
    }
    out
}

pub fn snapshot_csv(p: &[f64], grid: &GridSpec) -> String {
    let mut out = String::from("S,y,p\n");
    for i in 0..grid.n_s() {
        for j in 0..grid.n_y() {
            let _ = writeln!(out, "{},{},{}", grid.s(i), grid.y(j), p[grid.idx(i, j)]);
        }
    }
    out
}

pub fn snapshot_bin(p: &[f64], t: f64, grid: &GridSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 + 16 + 40 + 8 * p.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n_s() as u64).to_le_bytes());
    out.extend_from_slice(&(grid.n_y() as u64).to_le_bytes());
    for v in [t, grid.s_min, grid.ds(), grid.y_min, grid.dy()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in p {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decoded binary snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_s: usize,
    pub n_y: usize,
    pub t: f64,
    pub s_min: f64,
    pub ds: f64,
    pub y_min: f64,
    pub dy: f64,
    pub data: Vec<f64>,
}

pub fn read_snapshot_bin(bytes: &[u8]) -> Option<Snapshot> {
    if bytes.len() < 64 || &bytes[..4] != SNAPSHOT_MAGIC {
        return None;
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != SNAPSHOT_VERSION {
        return None;
    }
    let (n_s, n_y) = (u64_at(8) as usize, u64_at(16) as usize);
    let payload = &bytes[64..];
    if payload.len() != 8 * n_s * n_y {
        return None;
    }
    Some(Snapshot {
        n_s,
        n_y,
        t: f64_at(24),
        s_min: f64_at(32),
        ds: f64_at(40),
        y_min: f64_at(48),
        dy: f64_at(56),
        data: payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_snapshot_round_trips() {
        let g = GridSpec {
            s_min: 1.0,
            s_max: 2.0,
            y_min: -1.0,
            y_max: 1.0,
            ns: 3,
            ny: 2,
            t_end: 1.0,
            nt: 4,
            holder: 0.5,
        };
        let p: Vec<f64> = (0..g.slice_len()).map(|q| q as f64 * 0.25).collect();
        let snap = read_snapshot_bin(&snapshot_bin(&p, 0.5, &g)).unwrap();
        assert_eq!((snap.n_s, snap.n_y), (g.n_s(), g.n_y()));
        assert_eq!(snap.t, 0.5);
        assert_eq!(snap.ds, g.ds());
        assert_eq!(snap.data, p);
        assert!(read_snapshot_bin(b"nope").is_none());
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("out");
        write_atomic(&sub, "a.txt", b"hello").unwrap();
        let names: Vec<_> = fs::read_dir(&sub).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.txt")]);
        assert_eq!(fs::read(sub.join("a.txt")).unwrap(), b"hello");
    }
}
