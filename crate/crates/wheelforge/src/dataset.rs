//! On-disk layout of a dataset and the small CSV helpers shared by stages.

use std::path::{Path, PathBuf};

use crate::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Generate,
    Depth,
    Recon,
    Simulate,
    Analyze,
}

impl Stage {
    pub const DESIGN_STAGES: [Stage; 4] = [Stage::Generate, Stage::Depth, Stage::Recon, Stage::Simulate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Depth => "depth",
            Stage::Recon => "recon",
            Stage::Simulate => "simulate",
            Stage::Analyze => "analyze",
        }
    }

    pub fn predecessor(self) -> Option<Stage> {
        match self {
            Stage::Generate => None,
            Stage::Depth => Some(Stage::Generate),
            Stage::Recon => Some(Stage::Depth),
            Stage::Simulate => Some(Stage::Recon),
            Stage::Analyze => Some(Stage::Simulate),
        }
    }

    /// Directory holding the per-design artifacts this stage writes.
    pub fn artifact_dir(self) -> &'static str {
        match self {
            Stage::Generate => "masks",
            Stage::Depth => "depths",
            Stage::Recon => "meshes",
            Stage::Simulate => "modal",
            Stage::Analyze => "plots",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn design_id(index: usize) -> String {
    format!("d{index:04}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub root: PathBuf,
}

impl Dataset {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn mask_png(&self, id: &str) -> PathBuf {
        self.path(format!("masks/{id}.png"))
    }

    pub fn mask_meta(&self, id: &str) -> PathBuf {
        self.path(format!("masks/{id}.txt"))
    }

    pub fn depth_png(&self, id: &str) -> PathBuf {
        self.path(format!("depths/{id}.png"))
    }

    pub fn mesh_stl(&self, id: &str) -> PathBuf {
        self.path(format!("meshes/{id}.stl"))
    }

    pub fn modal_csv(&self, id: &str) -> PathBuf {
        self.path(format!("modal/{id}.csv"))
    }

    /// Files a design must have once `stage` succeeded for it.
    pub fn artifacts(&self, stage: Stage, id: &str) -> Vec<PathBuf> {
        match stage {
            Stage::Generate => vec![self.mask_png(id), self.mask_meta(id)],
            Stage::Depth => vec![self.depth_png(id), self.depth_png(id).with_extension("txt")],
            Stage::Recon => vec![self.mesh_stl(id)],
            Stage::Simulate => vec![self.modal_csv(id)],
            Stage::Analyze => Vec::new(),
        }
    }

    pub fn report_csv(&self, stage: Stage) -> PathBuf {
        self.path(format!("reports/{}.csv", stage.name()))
    }

    pub fn ensure_dir(&self, rel: &str) -> Result<PathBuf, PipelineError> {
        let dir = self.path(rel);
        std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        Ok(dir)
    }
}

/// A CSV table held as strings so that written files are byte-stable.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        let csv_err = |e: csv::Error| PipelineError::Csv { path: path.into(), message: e.to_string() };
        let tmp = path.with_extension("csv.tmp");
        {
            let mut w = csv::Writer::from_path(&tmp).map_err(csv_err)?;
            w.write_record(&self.header).map_err(csv_err)?;
            for r in &self.rows {
                w.write_record(r).map_err(csv_err)?;
            }
            w.flush().map_err(|e| PipelineError::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let csv_err = |e: csv::Error| PipelineError::Csv { path: path.into(), message: e.to_string() };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(csv_err)?;
        Ok(Self { header, rows })
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn parse_f64(s: &str, path: &Path) -> Result<f64, PipelineError> {
    s.parse().map_err(|_| PipelineError::Csv { path: path.into(), message: format!("not a number: {s:?}") })
}
