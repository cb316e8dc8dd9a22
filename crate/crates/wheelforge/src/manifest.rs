//! Per-stage reports and the dataset manifest derived from them.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dataset::{design_id, Dataset, Stage, Table};
use crate::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Reference,
    Topo,
}

impl Provenance {
    /// Even designs are procedural references; each odd design is optimized
    /// against the reference just before it.
    pub fn of_index(index: usize) -> Self {
        if index % 2 == 0 {
            Provenance::Reference
        } else {
            Provenance::Topo
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Provenance::Reference => "reference",
            Provenance::Topo => "topo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub design_id: String,
    pub ok: bool,
    pub error: String,
}

/// Outcome of one stage for every design that reached it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageReport {
    pub stage: Stage,
    pub rows: Vec<ReportRow>,
    /// Designs whose earlier result was reused instead of recomputed.
    pub skipped: usize,
}

impl StageReport {
    pub fn ok_count(&self) -> usize {
        self.rows.iter().filter(|r| r.ok).count()
    }

    pub fn failed_count(&self) -> usize {
        self.rows.len() - self.ok_count()
    }

    pub fn ok_ids(&self) -> Vec<String> {
        self.rows.iter().filter(|r| r.ok).map(|r| r.design_id.clone()).collect()
    }

    pub fn row(&self, id: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.design_id == id)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["design_id", "status", "error"]);
        for r in &self.rows {
            t.push(vec![r.design_id.clone(), if r.ok { "ok" } else { "failed" }.into(), r.error.clone()]);
        }
        t
    }

    pub fn write(&self, ds: &Dataset) -> Result<(), PipelineError> {
        self.to_table().write(&ds.report_csv(self.stage))
    }

    /// Previously written report, or `None` when the stage never ran.
    pub fn read(ds: &Dataset, stage: Stage) -> Result<Option<Self>, PipelineError> {
        let path = ds.report_csv(stage);
        if !path.exists() {
            return Ok(None);
        }
        let t = Table::read(&path)?;
        let rows = t
            .rows
            .into_iter()
            .map(|r| match r.as_slice() {
                [id, status, error] => Ok(ReportRow { design_id: id.clone(), ok: status == "ok", error: error.clone() }),
                _ => Err(PipelineError::Csv { path: path.clone(), message: "expected 3 columns".into() }),
            })
            .collect::<Result<_, _>>()?;
        Ok(Some(Self { stage, rows, skipped: 0 }))
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} ok, {} failed, {} reused",
            self.stage,
            self.ok_count(),
            self.failed_count(),
            self.skipped
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub design_id: String,
    pub provenance: Provenance,
    pub mask: String,
    pub depth: String,
    pub mesh: String,
    /// `ok`, `pending` or `failed:<stage>`.
    pub status: String,
    pub score: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    /// Combines the stage reports found on disk into one row per design.
    pub fn build(ds: &Dataset, designs: usize, scores: &BTreeMap<String, f64>) -> Result<Self, PipelineError> {
        let mut reports = Vec::new();
        for stage in Stage::DESIGN_STAGES {
            reports.push((stage, StageReport::read(ds, stage)?));
        }
        let rel = |stage: Stage, id: &str, ext: &str| format!("{}/{id}.{ext}", stage.artifact_dir());
        let rows = (0..designs)
            .map(|i| {
                let id = design_id(i);
                let mut row = ManifestRow {
                    design_id: id.clone(),
                    provenance: Provenance::of_index(i),
                    mask: String::new(),
                    depth: String::new(),
                    mesh: String::new(),
                    status: "pending".into(),
                    score: None,
                    error: String::new(),
                };
                for (stage, report) in &reports {
                    let Some(r) = report.as_ref().and_then(|rep| rep.row(&id)) else {
                        return row;
                    };
                    if !r.ok {
                        row.status = format!("failed:{stage}");
                        row.error = r.error.clone();
                        return row;
                    }
                    match stage {
                        Stage::Generate => row.mask = rel(*stage, &id, "png"),
                        Stage::Depth => row.depth = rel(*stage, &id, "png"),
                        Stage::Recon => row.mesh = rel(*stage, &id, "stl"),
                        _ => {}
                    }
                }
                row.status = "ok".into();
                row.score = scores.get(&id).copied();
                row
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn ok_count(&self) -> usize {
        self.rows.iter().filter(|r| r.status == "ok").count()
    }

    pub fn failed_count(&self) -> usize {
        self.rows.iter().filter(|r| r.status.starts_with("failed:")).count()
    }

    pub fn pending_count(&self) -> usize {
        self.rows.iter().filter(|r| r.status == "pending").count()
    }

    /// Names of `ok` rows whose artifact files are missing.
    pub fn missing_artifacts(&self, ds: &Dataset) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| r.status == "ok")
            .flat_map(|r| [&r.mask, &r.depth, &r.mesh])
            .filter(|p| p.is_empty() || !ds.path(p.as_str()).exists())
            .cloned()
            .collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["design_id", "provenance", "mask", "depth", "mesh", "status", "score", "error"]);
        for r in &self.rows {
            t.push(vec![
                r.design_id.clone(),
                r.provenance.name().into(),
                r.mask.clone(),
                r.depth.clone(),
                r.mesh.clone(),
                r.status.clone(),
                r.score.map(crate::dataset::fmt_f64).unwrap_or_default(),
                r.error.clone(),
            ]);
        }
        t
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        self.to_table().write(path)
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let t = Table::read(path)?;
        let bad = |m: &str| PipelineError::Csv { path: path.into(), message: m.into() };
        let rows = t
            .rows
            .into_iter()
            .map(|r| {
                let [id, prov, mask, depth, mesh, status, score, error] = <[String; 8]>::try_from(r).map_err(|_| bad("expected 8 columns"))?;
                let provenance = match prov.as_str() {
                    "reference" => Provenance::Reference,
                    "topo" => Provenance::Topo,
                    _ => return Err(bad("unknown provenance")),
                };
                let score = if score.is_empty() { None } else { Some(crate::dataset::parse_f64(&score, path)?) };
                Ok(ManifestRow { design_id: id, provenance, mask, depth, mesh, status, score, error })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rows })
    }
}
