//! Little-endian binary formats for embeddings (`WDR1`), TransR projection
//! matrices (`WDRP`) and gate checkpoints (`WDRG`). Identifiers live in a
//! text sidecar next to the payload (`<path>.ids`, one per line).

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mf::EmbeddingMatrix;

pub const EMBEDDING_MAGIC: [u8; 4] = *b"WDR1";
pub const EMBEDDING_VERSION: u32 = 1;
pub const PROJECTION_MAGIC: [u8; 4] = *b"WDRP";
pub const GATE_MAGIC: [u8; 4] = *b"WDRG";

pub const EMBEDDING_HEADER_LEN: usize = 24;

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

fn create_locked(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(false)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.lock().map_err(|e| Error::io(path, e))?;
    file.set_len(0).map_err(|e| Error::io(path, e))?;
    Ok(file)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = create_locked(path)?;
    let mut w = BufWriter::new(&file);
    w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    file.sync_all().map_err(|e| Error::io(path, e))?;
    file.unlock().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn write_ids(path: &Path, ids: &[String]) -> Result<()> {
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    write_file(&sidecar_path(path), text.as_bytes())
}

fn read_ids(path: &Path, expected: u64) -> Result<Vec<String>> {
    let side = sidecar_path(path);
    let text = String::from_utf8(read_file(&side)?).map_err(|e| {
        Error::io(&side, std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    })?;
    let ids: Vec<String> = text.lines().map(str::to_string).collect();
    if ids.len() as u64 != expected {
        return Err(Error::SidecarMismatch {
            path: side,
            expected,
            found: ids.len() as u64,
        });
    }
    Ok(ids)
}

fn push_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect()
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Cursor { path, bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                expected: (self.pos + n) as u64,
                found: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.take(4)?.try_into().expect("4 bytes");
        if found != expected {
            return Err(Error::BadMagic {
                path: self.path.to_path_buf(),
                expected,
                found,
            });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// Reads exactly `count` floats and requires the file to end there.
    fn payload(&mut self, count: u64) -> Result<Vec<f32>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::InvalidArgument("payload size overflows".into()))?;
        let expected = self.pos as u64 + len;
        if self.bytes.len() as u64 != expected {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                expected,
                found: self.bytes.len() as u64,
            });
        }
        Ok(f32s(self.take(len as usize)?))
    }
}

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMBEDDING_HEADER_LEN + m.data().len() * 4);
    out.extend_from_slice(&EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u64).to_le_bytes());
    push_f32s(&mut out, m.data().iter().copied());
    out
}

/// Writes the payload and its `.ids` sidecar, fsyncing both.
pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_file(path, &encode_embeddings(m))?;
    write_ids(path, m.ids())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let mut cur = Cursor::new(path, &bytes);
    cur.magic(EMBEDDING_MAGIC)?;
    let version = cur.u32()?;
    if version != EMBEDDING_VERSION {
        return Err(Error::BadVersion {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let rows = cur.u64()?;
    let dim = cur.u64()?;
    let data = cur.payload(rows.saturating_mul(dim))?;
    let ids = read_ids(path, rows)?;
    EmbeddingMatrix::new(ids, dim as usize, data)
}

/// Per-relation `dim × dim` projection matrices, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub relation_ids: Vec<String>,
    pub dim: usize,
    pub data: Vec<f32>,
}

pub fn write_projections(p: &ProjectionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if p.data.len() != p.relation_ids.len() * p.dim * p.dim {
        return Err(Error::InvalidArgument("projection payload size mismatch".into()));
    }
    let mut out = Vec::with_capacity(20 + p.data.len() * 4);
    out.extend_from_slice(&PROJECTION_MAGIC);
    out.extend_from_slice(&(p.relation_ids.len() as u64).to_le_bytes());
    out.extend_from_slice(&(p.dim as u64).to_le_bytes());
    push_f32s(&mut out, p.data.iter().copied());
    write_file(path, &out)?;
    write_ids(path, &p.relation_ids)
}

pub fn read_projections(path: impl AsRef<Path>) -> Result<ProjectionSet> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let mut cur = Cursor::new(path, &bytes);
    cur.magic(PROJECTION_MAGIC)?;
    let relations = cur.u64()?;
    let dim = cur.u64()?;
    let data = cur.payload(relations.saturating_mul(dim).saturating_mul(dim))?;
    let relation_ids = read_ids(path, relations)?;
    Ok(ProjectionSet {
        relation_ids,
        dim: dim as usize,
        data,
    })
}

/// Raw gate checkpoint: `dim`, hidden width and the layers in order as
/// `(weights out×in row-major, bias out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCheckpoint {
    pub dim: usize,
    pub hidden: usize,
    pub layers: Vec<(Vec<f32>, Vec<f32>)>,
}

/// Channel plan of the gate network for a hidden width.
pub fn gate_layer_shapes(hidden: usize) -> [(usize, usize); 3] {
    [(hidden, 3), (hidden, hidden), (3, hidden)]
}

pub fn write_gate(g: &GateCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let shapes = gate_layer_shapes(g.hidden);
    if g.layers.len() != 3
        || g.layers
            .iter()
            .zip(shapes)
            .any(|((w, b), (o, i))| w.len() != o * i || b.len() != o)
    {
        return Err(Error::InvalidArgument("gate layer shapes do not match hidden width".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(&GATE_MAGIC);
    out.extend_from_slice(&(g.dim as u64).to_le_bytes());
    out.extend_from_slice(&(g.hidden as u64).to_le_bytes());
    for (w, b) in &g.layers {
        push_f32s(&mut out, w.iter().copied());
        push_f32s(&mut out, b.iter().copied());
    }
    write_file(path, &out)
}

pub fn read_gate(path: impl AsRef<Path>) -> Result<GateCheckpoint> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let mut cur = Cursor::new(path, &bytes);
    cur.magic(GATE_MAGIC)?;
    let dim = cur.u64()? as usize;
    let hidden = cur.u64()? as usize;
    let shapes = gate_layer_shapes(hidden);
    let total: u64 = shapes.iter().map(|&(o, i)| (o * i + o) as u64).sum();
    let all = cur.payload(total)?;
    let mut layers = Vec::with_capacity(3);
    let mut at = 0;
    for (o, i) in shapes {
        let w = all[at..at + o * i].to_vec();
        at += o * i;
        let b = all[at..at + o].to_vec();
        at += o;
        layers.push((w, b));
    }
    Ok(GateCheckpoint { dim, hidden, layers })
}
