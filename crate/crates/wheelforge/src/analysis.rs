//! Design-space analysis over the simulated designs: features, embedding,
//! clusters, LHS picks, diversity, depth centroids and pairwise evaluation.

use rayon::prelude::*;
use wheelforge_core::depthsynth::{centroid_statistics_of, depth_centroid, load_depth, DepthMap};
use wheelforge_core::designspace::{cluster_quality, depth_features, diversity, kmeans, lhs_sample, reduce_2d, FeatureVector};
use wheelforge_core::metrics3d::{chamfer, depth_errors, mesh_iou};

use crate::config::PipelineConfig;
use crate::dataset::{fmt_f64, Dataset, Stage, Table};
use crate::manifest::{Provenance, StageReport};
use crate::plots::{export_plots, PlotInput};
use crate::stages::{read_mesh, read_results};
use crate::PipelineError;

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceRow {
    pub design_id: String,
    pub provenance: Provenance,
    pub mass_kg: f64,
    pub mode7_hz: f64,
    pub mode11_hz: f64,
    pub score: Option<f64>,
}

impl PerformanceRow {
    pub fn vector(&self) -> Vec<f64> {
        vec![self.mass_kg, self.mode7_hz, self.mode11_hz]
    }
}

fn index_of(id: &str) -> usize {
    id.trim_start_matches('d').parse().unwrap_or(usize::MAX)
}

fn analysis_err(what: &str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Analysis(format!("{what}: {e}"))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn analyze(cfg: &PipelineConfig, ds: &Dataset) -> Result<(), PipelineError> {
    let perf = read_results(ds)?;
    if perf.is_empty() {
        return Err(PipelineError::EmptyManifest);
    }
    let load = |id: &str| load_depth(&ds.depth_png(id)).map_err(|e| analysis_err(id, e));
    let depths: Vec<DepthMap> = perf.par_iter().map(|r| load(&r.design_id)).collect::<Result<_, _>>()?;

    let grid = cfg.sampling.feature_grid;
    let features: Vec<FeatureVector> = perf
        .iter()
        .zip(&depths)
        .map(|(r, d)| FeatureVector { design_id: index_of(&r.design_id), values: depth_features(d, grid) })
        .collect();
    let mut t = Table::new(std::iter::once("design_id".to_string()).chain((0..grid * grid).map(|i| format!("f{i}"))));
    for (r, f) in perf.iter().zip(&features) {
        t.push(std::iter::once(r.design_id.clone()).chain(f.values.iter().map(|&v| fmt_f64(v))).collect());
    }
    t.write(&ds.path("features.csv"))?;

    let reduction = reduce_2d(&features).map_err(|e| analysis_err("embedding", e))?;
    let points: Vec<[f64; 2]> = reduction.embeddings.iter().map(|e| e.point()).collect();
    let mut t = Table::new(["design_id", "x", "y"]);
    for (r, p) in perf.iter().zip(&points) {
        t.push(vec![r.design_id.clone(), fmt_f64(p[0]), fmt_f64(p[1])]);
    }
    t.write(&ds.path("embedding.csv"))?;

    let k = cfg.sampling.clusters.min(points.len());
    let km = kmeans(&points, k, cfg.seed).map_err(|e| analysis_err("clustering", e))?;
    let mut t = Table::new(["design_id", "label"]);
    for (r, l) in perf.iter().zip(&km.labels) {
        t.push(vec![r.design_id.clone(), l.to_string()]);
    }
    t.write(&ds.path("clusters.csv"))?;
    let mut t = Table::new(["k", "inertia", "iterations", "silhouette", "davies_bouldin", "calinski_harabasz", "note"]);
    let (q, note) = match cluster_quality(&points, &km.labels) {
        Ok(q) => (Some(q), String::new()),
        Err(e) => (None, e.to_string()),
    };
    t.push(vec![
        k.to_string(),
        fmt_f64(km.inertia),
        km.iterations.to_string(),
        opt(q.map(|q| q.silhouette)),
        opt(q.map(|q| q.davies_bouldin)),
        opt(q.map(|q| q.calinski_harabasz)),
        note,
    ]);
    t.write(&ds.path("cluster_quality.csv"))?;

    let n_lhs = cfg.sampling.lhs_samples.min(points.len());
    let lhs = lhs_sample(&reduction.embeddings, n_lhs, cfg.seed).map_err(|e| analysis_err("sampling", e))?;
    let mut t = Table::new(["sample", "design_id", "lhs_x", "lhs_y"]);
    for (s, (id, p)) in lhs.design_ids.iter().zip(&lhs.lhs_points).enumerate() {
        t.push(vec![s.to_string(), crate::dataset::design_id(*id), fmt_f64(p[0]), fmt_f64(p[1])]);
    }
    t.write(&ds.path("lhs.csv"))?;

    let mut t = Table::new(["group", "dsd", "psd"]);
    for (group, keep) in [
        ("reference", Some(Provenance::Reference)),
        ("topo", Some(Provenance::Topo)),
        ("overall", None),
    ] {
        let members: Vec<usize> = (0..perf.len()).filter(|&i| keep.is_none_or(|p| perf[i].provenance == p)).collect();
        let design: Vec<Vec<f64>> = members.iter().map(|&i| features[i].values.clone()).collect();
        let performance: Vec<Vec<f64>> = members.iter().map(|&i| perf[i].vector()).collect();
        let mean = |v: &[Vec<f64>]| diversity(v, v.len(), cfg.seed).ok().map(|d| d.mean);
        t.push(vec![group.into(), opt(mean(&design)), opt(mean(&performance))]);
    }
    t.write(&ds.path("diversity.csv"))?;

    write_centroids(cfg, ds)?;
    write_evaluation(cfg, ds, &perf, &depths)?;

    let embedding = perf.iter().zip(&points).map(|(r, p)| (r.design_id.clone(), r.provenance, p[0], p[1])).collect();
    export_plots(&ds.path(Stage::Analyze.artifact_dir()), &PlotInput { performance: perf, embedding, bins: cfg.sampling.histogram_bins })?;
    Ok(())
}

/// Depth centroids of every design with a depth map.
fn write_centroids(cfg: &PipelineConfig, ds: &Dataset) -> Result<(), PipelineError> {
    let Some(report) = StageReport::read(ds, Stage::Depth)? else {
        return Ok(());
    };
    let ids: Vec<String> = report.ok_ids().into_iter().filter(|id| index_of(id) < cfg.designs).collect();
    let measured: Vec<(f64, f64, usize)> = ids
        .par_iter()
        .map(|id| {
            let d = load_depth(&ds.depth_png(id)).map_err(|e| analysis_err(id, e))?;
            let c = depth_centroid(&d).map_err(|e| analysis_err(id, e))?;
            Ok((c.0, c.1, d.width))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut t = Table::new(["design_id", "cx", "cy"]);
    for (id, c) in ids.iter().zip(&measured) {
        t.push(vec![id.clone(), fmt_f64(c.0), fmt_f64(c.1)]);
    }
    t.write(&ds.path("centroids.csv"))?;
    let mut t = Table::new(["n", "mean_x", "mean_y", "std_x", "std_y", "center"]);
    if let Ok(s) = centroid_statistics_of(&measured.iter().map(|c| (c.0, c.1)).collect::<Vec<_>>()) {
        let center = (measured[0].2 as f64 - 1.0) / 2.0;
        t.push(vec![
            measured.len().to_string(),
            fmt_f64(s.mean.0),
            fmt_f64(s.mean.1),
            fmt_f64(s.stddev.0),
            fmt_f64(s.stddev.1),
            fmt_f64(center),
        ]);
    }
    t.write(&ds.path("centroid_summary.csv"))
}

/// Each optimized design compared with the reference it was derived from.
fn write_evaluation(cfg: &PipelineConfig, ds: &Dataset, perf: &[PerformanceRow], depths: &[DepthMap]) -> Result<(), PipelineError> {
    let pairs: Vec<(usize, usize)> = perf
        .iter()
        .enumerate()
        .filter(|(_, r)| r.provenance == Provenance::Topo)
        .filter_map(|(i, r)| {
            let reference = crate::dataset::design_id(index_of(&r.design_id) - 1);
            perf.iter().position(|q| q.design_id == reference).map(|j| (i, j))
        })
        .collect();
    let rows: Vec<Vec<String>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (pred, gt) = (&perf[i].design_id, &perf[j].design_id);
            let mut row = vec![format!("{pred}~{gt}"), pred.clone(), gt.clone()];
            let meshes = read_mesh(&ds.mesh_stl(pred)).and_then(|a| read_mesh(&ds.mesh_stl(gt)).map(|b| (a, b)));
            let mut notes = Vec::new();
            let (iou, cd) = match &meshes {
                Ok((a, b)) => (
                    mesh_iou(a, b, cfg.sampling.iou_voxel).map_err(|e| notes.push(e.to_string())).ok(),
                    chamfer(a, b, cfg.sampling.chamfer_points, cfg.seed).map_err(|e| notes.push(e.to_string())).ok(),
                ),
                Err(e) => {
                    notes.push(e.clone());
                    (None, None)
                }
            };
            let de = depth_errors(&depths[i], &depths[j]).map_err(|e| notes.push(e.to_string())).ok();
            row.extend([
                opt(iou),
                opt(cd),
                opt(de.map(|d| d.rmse)),
                opt(de.map(|d| d.absrel)),
                opt(de.map(|d| d.delta_125)),
                notes.join("; "),
            ]);
            row
        })
        .collect();
    let mut t = Table::new(["pair_id", "pred", "gt", "iou", "chamfer", "rmse", "absrel", "delta125", "note"]);
    rows.into_iter().for_each(|r| t.push(r));
    t.write(&ds.path("evaluation.csv"))
}
