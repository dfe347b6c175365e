//! On-disk layout of a run directory.
//!
//! Fields are stored as raw little-endian `f64` samples next to a JSON
//! sidecar `{n, length}`. Tables are CSV with fixed headers. Every file
//! written through a [`RunDir`] is listed in `manifest.json` together with
//! a content hash.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::EnergyReport;
use crate::envelope::{ConvergenceRow, Envelope};
use crate::error::{Error, Result};
use crate::grid::{Grid, SpectralField};
use crate::schemes::FlowReport;

/// Hash of `bytes` in the style of a git blob id, but with SHA-256:
/// `sha256("blob {len}\0" ++ bytes)`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn field_bytes(f: &SpectralField) -> Vec<u8> {
    f.samples().iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn field_hash(f: &SpectralField) -> String {
    content_hash(&field_bytes(f))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    n: usize,
    length: f64,
}

fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes `path` (samples) and the sidecar next to it with extension
/// `.json`. Returns both paths.
pub fn write_field(path: &Path, f: &SpectralField) -> Result<[PathBuf; 2]> {
    fs::write(path, field_bytes(f))?;
    let side = sidecar_path(path);
    let meta = Sidecar {
        n: f.grid().n(),
        length: f.grid().length(),
    };
    fs::write(&side, serde_json::to_vec_pretty(&meta)?)?;
    Ok([path.to_path_buf(), side])
}

pub fn read_field(path: &Path) -> Result<SpectralField> {
    let meta: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let grid = Grid::new(meta.n, meta.length)?;
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * meta.n {
        return Err(Error::MalformedData(format!(
            "{} holds {} bytes, expected {} for n = {}",
            path.display(),
            bytes.len(),
            8 * meta.n,
            meta.n
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    SpectralField::from_samples(grid, samples)
}

pub fn write_field_csv(path: &Path, f: &SpectralField) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "value"])?;
    for (x, v) in f.grid().points().iter().zip(f.samples()) {
        w.write_record([x.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_energies(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(r)?;
    }
    if reports.is_empty() {
        w.write_record([
            "t", "e1", "e2_gauge", "beta", "e_tilde", "hs_high", "linf", "h1", "h1s",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_energies(path: &Path) -> Result<Vec<EnergyReport>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_flow(path: &Path, flow: &FlowReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "sup_u_low", "min_qx"])?;
    for s in &flow.samples {
        w.write_record([
            s.t.to_string(),
            s.sup_u_low.to_string(),
            s.min_qx.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_envelope(path: &Path, env: &Envelope) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "a_k", "c_k"])?;
    for (k, (a, c)) in env.base.iter().zip(&env.c).enumerate() {
        w.write_record([k.to_string(), a.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["h", "distance", "c_geq_h", "ratio"])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    Sentinel,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// [`field_hash`] of the initial data, when there is one.
    pub u0_hash: Option<String>,
    pub status: ExitStatus,
    pub message: Option<String>,
    pub wall_time_s: f64,
    /// Experiment-specific summary numbers.
    pub results: serde_json::Map<String, serde_json::Value>,
    pub files: Vec<FileEntry>,
}

/// An output directory that remembers what was written into it.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

pub const MANIFEST: &str = "manifest.json";

impl RunDir {
    /// Creates `root`. An existing non-empty directory is an error unless
    /// `overwrite` is set, in which case it is emptied first.
    pub fn create(root: &Path, overwrite: bool) -> Result<Self> {
        if root.exists() {
            let occupied = fs::read_dir(root)?.next().is_some();
            if occupied && !overwrite {
                return Err(Error::InvalidConfig(format!(
                    "output directory {} exists and is not empty",
                    root.display()
                )));
            }
            if occupied {
                fs::remove_dir_all(root)?;
            }
        }
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn track(&mut self, path: PathBuf) {
        if !self.files.contains(&path) {
            self.files.push(path);
        }
    }

    pub fn field(&mut self, name: &str, f: &SpectralField) -> Result<()> {
        let paths = write_field(&self.path(name), f)?;
        for p in paths {
            self.track(p);
        }
        Ok(())
    }

    pub fn field_csv(&mut self, name: &str, f: &SpectralField) -> Result<()> {
        let p = self.path(name);
        write_field_csv(&p, f)?;
        self.track(p);
        Ok(())
    }

    pub fn energies(&mut self, reports: &[EnergyReport]) -> Result<()> {
        let p = self.path("energies.csv");
        write_energies(&p, reports)?;
        self.track(p);
        Ok(())
    }

    pub fn flow(&mut self, flow: &FlowReport) -> Result<()> {
        let p = self.path("flow.csv");
        write_flow(&p, flow)?;
        self.track(p);
        Ok(())
    }

    pub fn envelope(&mut self, env: &Envelope) -> Result<()> {
        let p = self.path("envelope.csv");
        write_envelope(&p, env)?;
        self.track(p);
        Ok(())
    }

    pub fn convergence(&mut self, rows: &[ConvergenceRow]) -> Result<()> {
        let p = self.path("convergence.csv");
        write_convergence(&p, rows)?;
        self.track(p);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, serde_json::to_vec_pretty(value)?)?;
        self.track(p);
        Ok(())
    }

    /// Hashes every tracked file and writes `manifest.json`, replacing
    /// `manifest.files`.
    pub fn finish(&self, mut manifest: Manifest) -> Result<Manifest> {
        manifest.files = self
            .files
            .iter()
            .map(|p| {
                Ok(FileEntry {
                    path: p
                        .strip_prefix(&self.root)
                        .unwrap_or(p)
                        .to_string_lossy()
                        .into_owned(),
                    hash: content_hash(&fs::read(p)?),
                })
            })
            .collect::<Result<_>>()?;
        fs::write(self.path(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(manifest)
    }
}
