//! Paired dataset manifests: one `degraded<TAB>clean<TAB>tag` record per line.
//! Relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub degraded: PathBuf,
    pub clean: PathBuf,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(base_dir: PathBuf, rows: Vec<ManifestRow>) -> Self {
        Manifest { base_dir, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::Dataset(format!(
                    "manifest line {} must have 3 tab-separated fields",
                    lineno + 1
                )));
            }
            rows.push(ManifestRow {
                degraded: PathBuf::from(fields[0]),
                clean: PathBuf::from(fields[1]),
                tag: fields[2].to_string(),
            });
        }
        Ok(Manifest { base_dir, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_text(&self) -> String {
        self.rows
            .iter()
            .map(|r| format!("{}\t{}\t{}\n", r.degraded.display(), r.clean.display(), r.tag))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads the `(degraded, clean)` pair of row `i`.
    pub fn load_pair(&self, i: usize) -> Result<(ImageTensor, ImageTensor)> {
        let row = &self.rows[i];
        let d = ImageTensor::load_png(&self.resolve(&row.degraded))?;
        let c = ImageTensor::load_png(&self.resolve(&row.clean))?;
        if d.shape() != c.shape() {
            return Err(Error::Dataset(format!(
                "pair {} has mismatched shapes {:?} vs {:?}",
                i,
                d.shape(),
                c.shape()
            )));
        }
        Ok((d, c))
    }

    /// Stable identifier of row `i` (its degraded file stem).
    pub fn id(&self, i: usize) -> String {
        self.rows[i]
            .degraded
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("row{i}"))
    }
}
