//! Output staging: files are written into a hidden directory inside the
//! output directory and renamed into place only once every file is complete.
//! Dropping an uncommitted stage leaves no files behind.

use std::fs;
use std::path::{Path, PathBuf};

use atdev::{Error, Result};
use tempfile::TempDir;

pub struct Stage {
    root: PathBuf,
    created_root: bool,
    dir: Option<TempDir>,
    files: Vec<PathBuf>,
}

impl Stage {
    pub fn new(root: &Path) -> Result<Self> {
        let created_root = !root.exists();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let dir = tempfile::Builder::new()
            .prefix(".atdev-stage-")
            .tempdir_in(root)
            .map_err(|e| Error::io(root, e))?;
        Ok(Stage {
            root: root.to_path_buf(),
            created_root,
            dir: Some(dir),
            files: Vec::new(),
        })
    }

    /// Staged location for `rel`; parent directories are created.
    pub fn path(&mut self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let rel = rel.as_ref();
        let full = self.dir.as_ref().expect("stage is live").path().join(rel);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.files.push(rel.to_path_buf());
        Ok(full)
    }

    pub fn write_json<T: serde::Serialize>(&mut self, rel: impl AsRef<Path>, body: &T) -> Result<()> {
        let p = self.path(rel)?;
        atdev::export::write_json(p, body)
    }

    pub fn write_with<F>(&mut self, rel: impl AsRef<Path>, f: F) -> Result<()>
    where
        F: FnOnce(&mut fs::File) -> Result<()>,
    {
        let p = self.path(rel)?;
        let mut file = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        f(&mut file)
    }

    /// Moves every staged file into the output directory and returns their
    /// final paths in the order they were staged.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let dir = self.dir.take().expect("stage is live");
        let mut out = Vec::with_capacity(self.files.len());
        for rel in std::mem::take(&mut self.files) {
            let src = dir.path().join(&rel);
            let dst = self.root.join(&rel);
            if let Some(parent) = dst.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::rename(&src, &dst).map_err(|e| Error::io(&dst, e))?;
            out.push(dst);
        }
        self.created_root = false;
        Ok(out)
    }
}

impl Drop for Stage {
    fn drop(&mut self) {
        drop(self.dir.take());
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}
