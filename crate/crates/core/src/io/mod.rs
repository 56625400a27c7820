//! File formats: dataset CSVs, checkpoints, embeddings, rankings, manifests.

mod dataset;
mod synth;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hgnn::HgnnParams;
use crate::numerics::Matrix;
use crate::objective::LossBreakdown;
use crate::trust::TrustRanking;

pub use dataset::{
    export_dataset, load_dataset, Collaboration, Dataset, Device, COLLABORATIONS_FILE,
    FRIENDSHIPS_FILE, INTERESTS_FILE, LINKS_FILE, NODES_FILE,
};
/// The five dataset files, in export order.
pub const DATASET_FILES: [&str; 5] = [
    NODES_FILE,
    LINKS_FILE,
    FRIENDSHIPS_FILE,
    INTERESTS_FILE,
    COLLABORATIONS_FILE,
];

pub use synth::{
    benchmark_dataset, generate_synthetic, SynthKnobs, BENCHMARK_DEVICES, BENCHMARK_SEED,
};

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// First 8 bytes (little-endian) of SHA-256 over `text`.
pub fn config_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters plus the `key=value` config that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub params: HgnnParams<f64>,
}

/// Layout, all little-endian:
///
/// ```text
/// "TGCK" | version u32 | config hash u64 | config len u32 | config utf-8
/// | matrix count u32 | (rows u64, cols u64) per matrix | f64 values, row-major
/// ```
pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let flat = ckpt.params.to_flat();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&config_hash(&ckpt.config).to_le_bytes());
    out.extend_from_slice(&(ckpt.config.len() as u32).to_le_bytes());
    out.extend_from_slice(ckpt.config.as_bytes());
    out.extend_from_slice(&(flat.len() as u32).to_le_bytes());
    for m in &flat {
        out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    }
    for m in &flat {
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let hash = c.u64()?;
    let len = c.u32()? as usize;
    let config = std::str::from_utf8(c.take(len)?)
        .map_err(|_| Error::Checkpoint("config block is not utf-8".into()))?
        .to_string();
    if config_hash(&config) != hash {
        return Err(Error::Checkpoint("config hash mismatch".into()));
    }
    let count = c.u32()? as usize;
    let mut shapes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        shapes.push((c.u64()? as usize, c.u64()? as usize));
    }
    let mut flat = Vec::with_capacity(shapes.len());
    for (rows, cols) in shapes {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint("shape overflow".into()))?;
        let raw = c.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("shape overflow".into()))?,
        )?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        flat.push(Matrix::from_vec(rows, cols, values)?);
    }
    if c.at != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - c.at
        )));
    }
    let params = HgnnParams::from_flat(flat).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(Checkpoint { config, params })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ckpt))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// `device_id,e0,…` with shortest round-trip decimals.
pub fn embeddings_csv(x: &Matrix<f64>) -> String {
    let mut s = String::from("device_id");
    for c in 0..x.cols() {
        write!(s, ",e{c}").unwrap();
    }
    s.push('\n');
    for r in 0..x.rows() {
        write!(s, "{r}").unwrap();
        for v in x.row(r) {
            write!(s, ",{v:?}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn parse_embeddings_csv(text: &str, file: impl AsRef<Path>) -> Result<Matrix<f64>> {
    let file = file.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let cols = rdr
        .headers()
        .map_err(|e| Error::data(file, 1, e.to_string()))?
        .len()
        .saturating_sub(1);
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::data(file, line, e.to_string()))?;
        if rec.get(0).and_then(|v| v.parse::<usize>().ok()) != Some(rows) {
            return Err(Error::data(
                file,
                line,
                format!("expected device_id {rows}"),
            ));
        }
        for f in rec.iter().skip(1) {
            values.push(
                f.parse::<f64>()
                    .map_err(|_| Error::data(file, line, format!("bad number {f:?}")))?,
            );
        }
        rows += 1;
    }
    Matrix::from_f64_checked(rows, cols, &values)
}

/// `initiator,rank,device_id,trust`; ranks start at 1.
pub fn ranking_csv(r: &TrustRanking, top: Option<usize>) -> String {
    let entries = match top {
        Some(k) => r.top(k),
        None => &r.entries,
    };
    let mut s = String::from("initiator,rank,device_id,trust\n");
    for (i, e) in entries.iter().enumerate() {
        writeln!(s, "{},{},{},{:?}", r.initiator, i + 1, e.device, e.trust).unwrap();
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub ranking: TrustRanking,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
}

pub fn loss_history_csv(history: &[LossBreakdown]) -> String {
    let mut s = String::from("epoch,inv_dev,dec_dev,inv_hyp,dec_hyp,reg,total\n");
    for (e, b) in history.iter().enumerate() {
        writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            e + 1,
            b.inv_dev,
            b.dec_dev,
            b.inv_hyp,
            b.dec_hyp,
            b.reg,
            b.total
        )
        .unwrap();
    }
    s
}

/// What a command read and wrote. Holds no timestamps so reruns compare equal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// SHA-256 of each output file, keyed like `outputs`.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, name: &str, path: impl AsRef<Path>) {
        self.inputs
            .insert(name.into(), path.as_ref().display().to_string());
    }

    /// Records an output file and hashes its current contents.
    pub fn output(&mut self, name: &str, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.outputs.insert(name.into(), path.display().to_string());
        self.artifacts.insert(name.into(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}
