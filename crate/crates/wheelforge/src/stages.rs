//! Stage runners. Each design-level stage fans out over the designs that
//! passed the previous stage and records one report row per design.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;
use wheelforge_core::depthsynth::{load_depth, save_depth, synthesize_depth};
use wheelforge_core::mesh::TriMesh;
use wheelforge_core::modal::{modal_analysis_with, performance_score, voxel_hex_mesh, ModalResult};
use wheelforge_core::raster::Raster8;
use wheelforge_core::recon::reconstruct_wheel;
use wheelforge_core::sparse::use_sequential_kernels;

use crate::analysis::{self, PerformanceRow};
use crate::config::PipelineConfig;
use crate::dataset::{design_id, fmt_f64, parse_f64, Dataset, Stage, Table};
use crate::designs::{design_spec, designs_table, generate_mask, DesignSpec};
use crate::manifest::{DatasetManifest, Provenance, ReportRow, StageReport};
use crate::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Recompute designs that already succeeded.
    pub force: bool,
}

pub const MANIFEST: &str = "manifest.csv";
pub const RESULTS: &str = "results.csv";
pub const DESIGNS: &str = "designs.csv";

pub fn run_all(cfg: &PipelineConfig, opts: RunOptions) -> Result<Vec<StageReport>, PipelineError> {
    [Stage::Generate, Stage::Depth, Stage::Recon, Stage::Simulate, Stage::Analyze]
        .into_iter()
        .map(|s| run_stage(s, cfg, opts))
        .collect()
}

pub fn run_stage(stage: Stage, cfg: &PipelineConfig, opts: RunOptions) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    use_sequential_kernels();
    let ds = Dataset::new(&cfg.output_root);
    let entering = entering_ids(stage, cfg, &ds)?;
    let report = match stage {
        Stage::Generate => {
            let specs = (0..cfg.designs).map(|i| design_spec(cfg, i)).collect::<Result<Vec<_>, _>>()?;
            designs_table(&specs).write(&ds.path(DESIGNS))?;
            ds.ensure_dir(stage.artifact_dir())?;
            let by_id: BTreeMap<&str, &DesignSpec> = specs.iter().map(|s| (s.id.as_str(), s)).collect();
            run_designs(stage, cfg, &ds, &entering, opts, |id| generate_one(cfg, &ds, by_id[id]))?
        }
        Stage::Depth => {
            ds.ensure_dir(stage.artifact_dir())?;
            run_designs(stage, cfg, &ds, &entering, opts, |id| depth_one(cfg, &ds, id))?
        }
        Stage::Recon => {
            ds.ensure_dir(stage.artifact_dir())?;
            run_designs(stage, cfg, &ds, &entering, opts, |id| recon_one(cfg, &ds, id))?
        }
        Stage::Simulate => {
            ds.ensure_dir(stage.artifact_dir())?;
            let report = run_designs(stage, cfg, &ds, &entering, opts, |id| simulate_one(cfg, &ds, id))?;
            write_results(cfg, &ds, &report)?;
            report
        }
        Stage::Analyze => {
            let pool = worker_pool(cfg.workers)?;
            pool.install(|| analysis::analyze(cfg, &ds))?;
            let rows = entering.iter().map(|id| ReportRow { design_id: id.clone(), ok: true, error: String::new() }).collect();
            let report = StageReport { stage, rows, skipped: 0 };
            report.write(&ds)?;
            report
        }
    };
    write_manifest(cfg, &ds)?;
    Ok(report)
}

/// Designs that reached `stage`, in id order.
fn entering_ids(stage: Stage, cfg: &PipelineConfig, ds: &Dataset) -> Result<Vec<String>, PipelineError> {
    let Some(pred) = stage.predecessor() else {
        return Ok((0..cfg.designs).map(design_id).collect());
    };
    let missing = |p: std::path::PathBuf| PipelineError::MissingPredecessor { stage, predecessor: pred, missing: p };
    let dir = ds.path(pred.artifact_dir());
    if pred != Stage::Simulate && !dir.is_dir() {
        return Err(missing(dir));
    }
    if pred == Stage::Simulate && !ds.path(RESULTS).is_file() {
        return Err(missing(ds.path(RESULTS)));
    }
    let report = StageReport::read(ds, pred)?.ok_or_else(|| missing(ds.report_csv(pred)))?;
    let wanted: Vec<String> = (0..cfg.designs).map(design_id).collect();
    Ok(report.ok_ids().into_iter().filter(|id| wanted.contains(id)).collect())
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| PipelineError::WorkerPool(e.to_string()))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "worker panicked".into())
}

fn run_designs<F>(
    stage: Stage,
    cfg: &PipelineConfig,
    ds: &Dataset,
    ids: &[String],
    opts: RunOptions,
    work: F,
) -> Result<StageReport, PipelineError>
where
    F: Fn(&str) -> Result<(), String> + Sync,
{
    let prior = if opts.force { None } else { StageReport::read(ds, stage)? };
    let pool = worker_pool(cfg.workers)?;
    let outcomes: Vec<(ReportRow, bool)> = pool.install(|| {
        ids.par_iter()
            .map(|id| {
                if let Some(r) = prior.as_ref().and_then(|p| p.row(id)) {
                    if r.ok && ds.artifacts(stage, id).iter().all(|p| p.is_file()) {
                        return (r.clone(), true);
                    }
                }
                let result = catch_unwind(AssertUnwindSafe(|| work(id))).unwrap_or_else(|p| Err(panic_message(p)));
                let row = match result {
                    Ok(()) => ReportRow { design_id: id.clone(), ok: true, error: String::new() },
                    Err(e) => ReportRow { design_id: id.clone(), ok: false, error: e },
                };
                (row, false)
            })
            .collect()
    });
    let skipped = outcomes.iter().filter(|(_, s)| *s).count();
    let report = StageReport { stage, rows: outcomes.into_iter().map(|(r, _)| r).collect(), skipped };
    report.write(ds)?;
    Ok(report)
}

fn write_text(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn generate_one(cfg: &PipelineConfig, ds: &Dataset, spec: &DesignSpec) -> Result<(), String> {
    let mask = generate_mask(cfg, spec)?;
    let png = ds.mask_png(&spec.id);
    let file = std::fs::File::create(&png).map_err(|e| format!("{}: {e}", png.display()))?;
    mask.raster.write_png(std::io::BufWriter::new(file)).map_err(|e| e.to_string())?;
    let notes: String = mask.notes.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write_text(&ds.mask_meta(&spec.id), &notes)
}

fn depth_one(cfg: &PipelineConfig, ds: &Dataset, id: &str) -> Result<(), String> {
    let png = ds.mask_png(id);
    let file = std::fs::File::open(&png).map_err(|e| format!("{}: {e}", png.display()))?;
    let mask = Raster8::read_png(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
    let depth = synthesize_depth(&mask, &cfg.template()).map_err(|e| e.to_string())?;
    save_depth(&depth, &ds.depth_png(id)).map_err(|e| e.to_string())
}

fn recon_one(cfg: &PipelineConfig, ds: &Dataset, id: &str) -> Result<(), String> {
    let depth = load_depth(&ds.depth_png(id)).map_err(|e| e.to_string())?;
    let mesh = reconstruct_wheel(&depth, &cfg.template(), &cfg.recon_config()).map_err(|e| e.to_string())?;
    let path = ds.mesh_stl(id);
    let file = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    mesh.write_stl(std::io::BufWriter::new(file)).map_err(|e| e.to_string())
}

pub fn read_mesh(path: &Path) -> Result<TriMesh, String> {
    let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    TriMesh::read_stl(std::io::BufReader::new(file)).map_err(|e| e.to_string())
}

fn modal_header(n_modes: usize) -> Vec<String> {
    let mut h: Vec<String> = ["design_id", "elements", "mass_kg"].map(String::from).to_vec();
    h.extend((1..=n_modes).map(|m| format!("f{m}_hz")));
    h
}

fn simulate_one(cfg: &PipelineConfig, ds: &Dataset, id: &str) -> Result<(), String> {
    let mesh = read_mesh(&ds.mesh_stl(id))?;
    let model = voxel_hex_mesh(&mesh, cfg.modal.elem_size).map_err(|e| e.to_string())?;
    let result = modal_analysis_with(&model, &cfg.material(), cfg.modal.n_modes, &cfg.eigen_options()).map_err(|e| e.to_string())?;
    let mut t = Table::new(modal_header(cfg.modal.n_modes));
    let mut row = vec![id.to_string(), model.n_elements().to_string(), fmt_f64(result.mass_kg)];
    row.extend(result.frequencies_hz.iter().map(|&f| fmt_f64(f)));
    t.push(row);
    t.write(&ds.modal_csv(id)).map_err(|e| e.to_string())
}

/// Cached modal result of one design.
pub fn read_modal(cfg: &PipelineConfig, ds: &Dataset, id: &str) -> Result<ModalResult, PipelineError> {
    let path = ds.modal_csv(id);
    let t = Table::read(&path)?;
    if t.header != modal_header(cfg.modal.n_modes) || t.rows.len() != 1 {
        return Err(PipelineError::Csv { path, message: "modal cache does not match the configured mode count; rerun with --force".into() });
    }
    let row = &t.rows[0];
    let mass_kg = parse_f64(&row[2], &path)?;
    let frequencies_hz = row[3..].iter().map(|s| parse_f64(s, &path)).collect::<Result<Vec<_>, _>>()?;
    Ok(ModalResult {
        mass_kg,
        rigid_mode_count: frequencies_hz.iter().filter(|&&f| f < wheelforge_core::modal::RIGID_MODE_HZ).count(),
        mode7_hz: frequencies_hz[6],
        mode11_hz: frequencies_hz[10],
        frequencies_hz,
        converged: true,
    })
}

fn write_results(cfg: &PipelineConfig, ds: &Dataset, report: &StageReport) -> Result<(), PipelineError> {
    let ids = report.ok_ids();
    let results = ids.iter().map(|id| read_modal(cfg, ds, id)).collect::<Result<Vec<_>, _>>()?;
    let scores: Vec<Option<f64>> = match performance_score(&results) {
        Ok(table) => table.scores.iter().map(|s| Some(s.overall)).collect(),
        Err(_) => vec![None; results.len()],
    };
    let mut header: Vec<String> = ["design_id", "provenance", "mass_kg"].map(String::from).to_vec();
    header.extend((1..=cfg.modal.n_modes).map(|m| format!("f{m}_hz")));
    header.extend(["mode7_hz", "mode11_hz", "score"].map(String::from));
    let mut t = Table { header, rows: Vec::new() };
    for ((id, r), score) in ids.iter().zip(&results).zip(&scores) {
        let index: usize = id[1..].parse().unwrap_or(0);
        let mut row = vec![id.clone(), Provenance::of_index(index).name().into(), fmt_f64(r.mass_kg)];
        row.extend(r.frequencies_hz.iter().map(|&f| fmt_f64(f)));
        row.extend([fmt_f64(r.mode7_hz), fmt_f64(r.mode11_hz), score.map(fmt_f64).unwrap_or_default()]);
        t.push(row);
    }
    t.write(&ds.path(RESULTS))
}

/// Rows of `results.csv`.
pub fn read_results(ds: &Dataset) -> Result<Vec<PerformanceRow>, PipelineError> {
    let path = ds.path(RESULTS);
    let t = Table::read(&path)?;
    let col = |name: &str| t.column(name).ok_or_else(|| PipelineError::Csv { path: path.clone(), message: format!("missing column {name}") });
    let (id, prov, mass, m7, m11, score) = (col("design_id")?, col("provenance")?, col("mass_kg")?, col("mode7_hz")?, col("mode11_hz")?, col("score")?);
    t.rows
        .iter()
        .map(|r| {
            Ok(PerformanceRow {
                design_id: r[id].clone(),
                provenance: if r[prov] == "topo" { Provenance::Topo } else { Provenance::Reference },
                mass_kg: parse_f64(&r[mass], &path)?,
                mode7_hz: parse_f64(&r[m7], &path)?,
                mode11_hz: parse_f64(&r[m11], &path)?,
                score: if r[score].is_empty() { None } else { Some(parse_f64(&r[score], &path)?) },
            })
        })
        .collect()
}

fn write_manifest(cfg: &PipelineConfig, ds: &Dataset) -> Result<(), PipelineError> {
    let scores: BTreeMap<String, f64> = if ds.path(RESULTS).is_file() {
        read_results(ds)?.into_iter().filter_map(|r| r.score.map(|s| (r.design_id, s))).collect()
    } else {
        BTreeMap::new()
    };
    DatasetManifest::build(ds, cfg.designs, &scores)?.write(&ds.path(MANIFEST))
}
