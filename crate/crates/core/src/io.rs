//! Trajectory persistence: metadata JSON, per-snapshot CSV and flat binary
//! field dumps.
//!
//! Dump layout (little-endian): the 8-byte magic `NLSDUMP1`, the crate
//! version as 16 zero-padded ASCII bytes, the config hash as 64 zero-padded
//! ASCII hex bytes, then `n: u64`, `L: f64`, `dt: f64`, `count: u64`, then
//! `count` records of `n` complex samples stored as interleaved `re, im`
//! `f64` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::evolution::{Snapshot, Trajectory, TrajectoryMeta};
use crate::field::ComplexField;
use crate::modulation::{Decomposer, ModulationRecord};

pub const META_FILE: &str = "trajectory.json";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const FIELD_FILE: &str = "fields.bin";
pub const Z_FILE: &str = "z_series.bin";

pub const DUMP_MAGIC: &[u8; 8] = b"NLSDUMP1";
const VERSION_BYTES: usize = 16;
const HASH_BYTES: usize = 64;
pub const DUMP_HEADER_LEN: usize = 8 + VERSION_BYTES + HASH_BYTES + 32;

/// Version and config hash stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: String::new(),
        }
    }
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Provenance {
            config_hash: config_hash.into(),
            ..Default::default()
        }
    }

    /// `# nlslab <version> config_hash=<hash>`
    pub fn comment_line(&self) -> String {
        format!("# nlslab {} config_hash={}", self.version, self.config_hash)
    }
}

fn padded<const N: usize>(s: &str, what: &str) -> Result<[u8; N]> {
    let b = s.as_bytes();
    if b.len() > N || !s.is_ascii() {
        return Err(LabError::InvalidParameter(format!("{what} `{s}` does not fit {N} ASCII bytes")));
    }
    let mut out = [0u8; N];
    out[..b.len()].copy_from_slice(b);
    Ok(out)
}

fn unpadded(b: &[u8]) -> Result<String> {
    let end = b.iter().position(|&c| c == 0).unwrap_or(b.len());
    std::str::from_utf8(&b[..end])
        .map(str::to_string)
        .map_err(|_| LabError::Parse("non-ASCII dump header".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub provenance: Provenance,
    pub n: usize,
    pub half_width: f64,
    pub dt: f64,
    pub records: Vec<Vec<Complex64>>,
}

pub fn write_dump<W: Write>(mut w: W, dump: &FieldDump) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&padded::<VERSION_BYTES>(&dump.provenance.version, "version")?)?;
    w.write_all(&padded::<HASH_BYTES>(&dump.provenance.config_hash, "config hash")?)?;
    w.write_all(&(dump.n as u64).to_le_bytes())?;
    w.write_all(&dump.half_width.to_le_bytes())?;
    w.write_all(&dump.dt.to_le_bytes())?;
    w.write_all(&(dump.records.len() as u64).to_le_bytes())?;
    for rec in &dump.records {
        if rec.len() != dump.n {
            return Err(LabError::InvalidParameter(format!(
                "dump record has {} samples, header says {}",
                rec.len(),
                dump.n
            )));
        }
        for v in rec {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_dump<R: Read>(mut r: R) -> Result<FieldDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(LabError::Parse("not a field dump (bad magic)".into()));
    }
    let mut version = [0u8; VERSION_BYTES];
    r.read_exact(&mut version)?;
    let mut hash = [0u8; HASH_BYTES];
    r.read_exact(&mut hash)?;
    let provenance = Provenance {
        version: unpadded(&version)?,
        config_hash: unpadded(&hash)?,
    };
    let n = read_u64(&mut r)? as usize;
    let half_width = read_f64(&mut r)?;
    let dt = read_f64(&mut r)?;
    let count = read_u64(&mut r)? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let mut rec = Vec::with_capacity(n);
        for _ in 0..n {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            rec.push(Complex64::new(re, im));
        }
        records.push(rec);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(LabError::Parse("trailing bytes after field dump".into()));
    }
    Ok(FieldDump {
        provenance,
        n,
        half_width,
        dt,
        records,
    })
}

/// One CSV row per snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub step: usize,
    pub t: f64,
    pub z_re: f64,
    pub z_im: f64,
    pub z_abs: f64,
    pub eta_l2: f64,
    pub eta_h1: f64,
    pub energy_level: f64,
    pub mass: f64,
    pub energy: f64,
    pub absorbed: f64,
    pub constraint_residual: f64,
}

impl From<&Snapshot> for SnapshotRow {
    fn from(s: &Snapshot) -> Self {
        SnapshotRow {
            step: s.step,
            t: s.t,
            z_re: s.state.z.re,
            z_im: s.state.z.im,
            z_abs: s.state.z.norm(),
            eta_l2: s.state.eta.norm(),
            eta_h1: s.state.eta.h1_norm(),
            energy_level: s.energy_level,
            mass: s.mass,
            energy: s.energy,
            absorbed: s.absorbed,
            constraint_residual: s.state.residual_norm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulationRow {
    pub t: f64,
    pub z_re: f64,
    pub z_im: f64,
    pub z_abs: f64,
    pub residual_a_re: f64,
    pub residual_a_im: f64,
    pub residual_b_re: f64,
    pub residual_b_im: f64,
    pub gram_condition: f64,
    pub eta_sigma_tilde: f64,
}

impl From<&ModulationRecord> for ModulationRow {
    fn from(r: &ModulationRecord) -> Self {
        ModulationRow {
            t: r.t,
            z_re: r.z.re,
            z_im: r.z.im,
            z_abs: r.z.norm(),
            residual_a_re: r.residual_fd.re,
            residual_a_im: r.residual_fd.im,
            residual_b_re: r.residual_projected.re,
            residual_b_im: r.residual_projected.im,
            gram_condition: r.gram_condition,
            eta_sigma_tilde: r.eta_sigma_tilde,
        }
    }
}

/// Comma-separated, header row, LF line endings, optionally preceded by the
/// provenance comment line.
pub fn write_csv<W: Write, T: Serialize>(mut w: W, rows: &[T], prov: Option<&Provenance>) -> Result<()> {
    if let Some(p) = prov {
        writeln!(w, "{}", p.comment_line())?;
    }
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| LabError::Parse(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(r)
        .deserialize()
        .map(|row| row.map_err(|e| LabError::Parse(e.to_string())))
        .collect()
}

/// Everything beyond the fields needed to rebuild a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub provenance: Provenance,
    pub meta: TrajectoryMeta,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub absorbed: Vec<f64>,
    pub wavefront_time: Option<f64>,
    pub truncated: Option<String>,
}

/// Writes `trajectory.json`, `snapshots.csv`, `fields.bin` and `z_series.bin`
/// into `dir`.
pub fn save_trajectory(dir: &Path, traj: &Trajectory, prov: &Provenance) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let index = TrajectoryIndex {
        provenance: prov.clone(),
        meta: traj.meta.clone(),
        steps: traj.snapshots.iter().map(|s| s.step).collect(),
        times: traj.times(),
        absorbed: traj.snapshots.iter().map(|s| s.absorbed).collect(),
        wavefront_time: traj.wavefront_time,
        truncated: traj.truncated.clone(),
    };
    let json = serde_json::to_string_pretty(&index).map_err(|e| LabError::Parse(e.to_string()))?;
    std::fs::write(dir.join(META_FILE), json + "\n")?;
    let rows: Vec<SnapshotRow> = traj.snapshots.iter().map(SnapshotRow::from).collect();
    write_csv(BufWriter::new(File::create(dir.join(SNAPSHOT_FILE))?), &rows, Some(prov))?;
    let fields = FieldDump {
        provenance: prov.clone(),
        n: traj.meta.n,
        half_width: traj.meta.half_width,
        dt: traj.config.dt,
        records: traj.snapshots.iter().map(|s| s.u.values().to_vec()).collect(),
    };
    write_dump(BufWriter::new(File::create(dir.join(FIELD_FILE))?), &fields)?;
    let zs = FieldDump {
        provenance: prov.clone(),
        n: traj.z_series.len(),
        half_width: traj.meta.half_width,
        dt: traj.config.dt,
        records: vec![traj.z_series.clone()],
    };
    write_dump(BufWriter::new(File::create(dir.join(Z_FILE))?), &zs)?;
    Ok(())
}

pub fn load_index(dir: &Path) -> Result<TrajectoryIndex> {
    let text = std::fs::read_to_string(dir.join(META_FILE))?;
    serde_json::from_str(&text).map_err(|e| LabError::Parse(e.to_string()))
}

/// Rebuilds a saved trajectory, re-decomposing every stored field.
pub fn load_trajectory(dir: &Path, decomposer: &Decomposer) -> Result<Trajectory> {
    let index = load_index(dir)?;
    let grid = decomposer.branch().spectral().grid().clone();
    if grid.len() != index.meta.n || grid.half_width() != index.meta.half_width {
        return Err(LabError::GridMismatch);
    }
    let fields = read_dump(BufReader::new(File::open(dir.join(FIELD_FILE))?))?;
    let zs = read_dump(BufReader::new(File::open(dir.join(Z_FILE))?))?;
    if fields.records.len() != index.steps.len() || zs.records.len() != 1 {
        return Err(LabError::Parse("trajectory files disagree on record counts".into()));
    }
    let branch = decomposer.branch();
    let nl = branch.nonlinearity();
    let mut snapshots = Vec::with_capacity(index.steps.len());
    for (k, rec) in fields.records.into_iter().enumerate() {
        let u = ComplexField::from_values(&grid, rec)?;
        let t = index.times[k];
        let (state, point) = decomposer.decompose(&u, t)?;
        let (energy, mass) = nl.energy_mass(branch.hamiltonian(), &u)?;
        snapshots.push(Snapshot {
            step: index.steps[k],
            t,
            u,
            state,
            energy_level: point.e,
            mass,
            energy,
            absorbed: index.absorbed[k],
        });
    }
    Ok(Trajectory {
        config: index.meta.config,
        meta: index.meta,
        snapshots,
        z_series: zs.records.into_iter().next().unwrap_or_default(),
        wavefront_time: index.wavefront_time,
        truncated: index.truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let d = FieldDump {
            provenance: Provenance::new("ab"),
            n: 2,
            half_width: 40.0,
            dt: 1e-3,
            records: vec![vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.0)]],
        };
        let mut buf = Vec::new();
        write_dump(&mut buf, &d).unwrap();
        let o = DUMP_HEADER_LEN;
        assert_eq!(buf.len(), o + 32);
        assert_eq!(&buf[0..8], b"NLSDUMP1");
        assert_eq!(&buf[24..26], b"ab");
        assert_eq!(buf[26], 0);
        assert_eq!(&buf[o - 32..o - 24], &2u64.to_le_bytes());
        assert_eq!(&buf[o - 24..o - 16], &40.0f64.to_le_bytes());
        assert_eq!(&buf[o - 8..o], &1u64.to_le_bytes());
        assert_eq!(&buf[o..o + 8], &1.0f64.to_le_bytes());
        assert_eq!(&buf[o + 8..o + 16], &(-2.0f64).to_le_bytes());
        assert_eq!(read_dump(&buf[..]).unwrap(), d);
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let d = FieldDump {
            provenance: Provenance::default(),
            n: 3,
            half_width: 1.0,
            dt: 0.1,
            records: vec![vec![Complex64::new(1.0, 1.0); 3]],
        };
        let mut buf = Vec::new();
        write_dump(&mut buf, &d).unwrap();
        assert!(read_dump(&buf[..buf.len() - 4]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_dump(&bad[..]).is_err());
        buf.push(0);
        assert!(read_dump(&buf[..]).is_err());
    }

    #[test]
    fn csv_uses_lf_and_header() {
        let rows = vec![ModulationRow {
            t: 0.5,
            z_re: 0.01,
            z_im: 0.0,
            z_abs: 0.01,
            residual_a_re: 1e-9,
            residual_a_im: 0.0,
            residual_b_re: 1e-9,
            residual_b_im: 0.0,
            gram_condition: 1.0,
            eta_sigma_tilde: 0.0,
        }];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows, Some(&Provenance::new("00ff"))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# nlslab "));
        assert!(text.lines().nth(1).unwrap().starts_with("t,z_re,z_im,z_abs,residual_a_re"));
        assert!(!text.contains('\r'));
        let back: Vec<ModulationRow> = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back[0].residual_b_re, 1e-9);
    }

    proptest! {
        #[test]
        fn dump_roundtrip(vals in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..40), count in 1usize..4) {
            let rec: Vec<Complex64> = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let d = FieldDump { provenance: Provenance::new("c0ffee"), n: rec.len(), half_width: 12.5, dt: 0.01, records: vec![rec; count] };
            let mut buf = Vec::new();
            write_dump(&mut buf, &d).unwrap();
            prop_assert_eq!(read_dump(&buf[..]).unwrap(), d);
        }
    }
}
