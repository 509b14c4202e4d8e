//! File layout under the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use wdrec_core::ingest::InteractionMatrix;
use wdrec_core::mf::EmbeddingMatrix;
use wdrec_core::{store, Error, Result};

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Ok(d)
    }

    pub fn corpus(&self, file: &str) -> PathBuf {
        self.root.join("corpus").join(file)
    }

    pub fn model(&self, file: &str) -> PathBuf {
        self.root.join("models").join(file)
    }

    pub fn corpus_dir(&self) -> Result<PathBuf> {
        self.dir("corpus")
    }

    pub fn models_dir(&self) -> Result<PathBuf> {
        self.dir("models")
    }

    pub fn logs_dir(&self) -> Result<PathBuf> {
        self.dir("logs")
    }

    pub fn eval_dir(&self) -> Result<PathBuf> {
        self.dir("eval")
    }

    pub fn slices_dir(&self) -> Result<PathBuf> {
        self.dir("slices")
    }
}

/// Fails with a dependency error unless `path` exists.
pub fn require(path: &Path, what: &str, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Dependency(format!(
            "missing {what} ({}); run `wdrec {producer}` first",
            path.display()
        )))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &format!("{text}\n"))
}

pub fn write_matrix(path: &Path, m: &InteractionMatrix) -> Result<()> {
    let mut buf = Vec::new();
    m.write_pairs(&mut buf)?;
    write_text(path, std::str::from_utf8(&buf).expect("csv output is utf-8"))
}

pub fn read_matrix(path: &Path) -> Result<InteractionMatrix> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    InteractionMatrix::read_pairs(f)
}

pub fn read_matrix_like(like: &InteractionMatrix, path: &Path) -> Result<InteractionMatrix> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    InteractionMatrix::read_pairs_like(like, f)
}

/// `epoch,loss` rows; `first_epoch` is 0 when the log starts with the
/// value before training.
pub fn write_loss_log(path: &Path, losses: &[f64], first_epoch: usize) -> Result<()> {
    let mut text = String::from("epoch,loss\n");
    for (k, l) in losses.iter().enumerate() {
        text.push_str(&format!("{},{l}\n", first_epoch + k));
    }
    write_text(path, &text)
}

pub fn read_embeddings(path: &Path, what: &str, producer: &str) -> Result<EmbeddingMatrix> {
    require(path, what, producer)?;
    store::read_embeddings(path)
}
