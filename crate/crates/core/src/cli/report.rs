use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub bytes: u64,
    pub description: &'static str,
}

/// Files written into one output directory, recorded in `manifest.json`.
#[derive(Debug)]
pub struct ReportWriter {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl ReportWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records a file produced by some other writer.
    pub fn record(&mut self, name: &str, description: &'static str) -> Result<()> {
        let path = self.path(name);
        let bytes = fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
        if bytes == 0 {
            return Err(Error::Input(format!("{} was written empty", path.display())));
        }
        self.entries.push(ManifestEntry { path, bytes, description });
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T, description: &'static str) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
        text.push('\n');
        self.text(name, &text, description)
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R], description: &'static str) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Input(e.to_string()))?;
        for row in rows {
            w.serialize(row).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.record(name, description)
    }

    pub fn text(&mut self, name: &str, text: &str, description: &'static str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.record(name, description)
    }

    /// Writes `manifest.json` and returns every entry including it.
    pub fn finish(mut self) -> Result<Vec<ManifestEntry>> {
        let listed = self.entries.clone();
        self.json("manifest.json", &listed, "list of report files")?;
        Ok(self.entries)
    }
}

/// Top-level document shape: deterministic results, then run timing.
#[derive(Debug, Serialize)]
pub struct Payload<'a, R: Serialize, T: Serialize> {
    pub result: &'a R,
    pub timing: &'a T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<&'a [ManifestEntry]>,
}
