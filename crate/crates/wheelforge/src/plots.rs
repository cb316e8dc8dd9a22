//! Histogram and scatter tables for external plotting.

use std::path::{Path, PathBuf};

use crate::analysis::PerformanceRow;
use crate::dataset::{fmt_f64, Table};
use crate::manifest::Provenance;
use crate::PipelineError;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotInput {
    pub performance: Vec<PerformanceRow>,
    /// `(design_id, provenance, x, y)`.
    pub embedding: Vec<(String, Provenance, f64, f64)>,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins over `[lo, hi]`; the last bin is closed. A zero-width
/// domain is widened by half a unit on each side.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<Bin> {
    let bins = bins.max(1);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|b| Bin { lo: lo + b as f64 * width, hi: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width }, count: 0 })
        .collect();
    for &v in values {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

fn data_range(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

fn histogram_table(bins: &[Bin]) -> Table {
    let mut t = Table::new(["bin_lo", "bin_hi", "count"]);
    for b in bins {
        t.push(vec![fmt_f64(b.lo), fmt_f64(b.hi), b.count.to_string()]);
    }
    t
}

/// Writes `hist_{mass,mode7,mode11,score}.csv`, `scatter_embedding.csv` and
/// `scatter_performance.csv` into `dir` and returns their paths.
pub fn export_plots(dir: &Path, input: &PlotInput) -> Result<Vec<PathBuf>, PipelineError> {
    let perf = &input.performance;
    if perf.is_empty() {
        return Err(PipelineError::EmptyManifest);
    }
    let mut written = Vec::new();
    let mut emit = |name: &str, t: Table| -> Result<(), PipelineError> {
        let path = dir.join(name);
        t.write(&path)?;
        written.push(path);
        Ok(())
    };
    let columns: [(&str, Vec<f64>); 3] = [
        ("mass", perf.iter().map(|r| r.mass_kg).collect()),
        ("mode7", perf.iter().map(|r| r.mode7_hz).collect()),
        ("mode11", perf.iter().map(|r| r.mode11_hz).collect()),
    ];
    for (name, values) in columns {
        let (lo, hi) = data_range(&values);
        emit(&format!("hist_{name}.csv"), histogram_table(&histogram(&values, lo, hi, input.bins)))?;
    }
    let scores: Vec<f64> = perf.iter().filter_map(|r| r.score).collect();
    emit("hist_score.csv", histogram_table(&histogram(&scores, 0.0, 1.0, input.bins)))?;

    let mut t = Table::new(["design_id", "provenance", "x", "y"]);
    for (id, p, x, y) in &input.embedding {
        t.push(vec![id.clone(), p.name().into(), fmt_f64(*x), fmt_f64(*y)]);
    }
    emit("scatter_embedding.csv", t)?;
    let mut t = Table::new(["design_id", "provenance", "mass_kg", "mode7_hz", "mode11_hz", "score"]);
    for r in perf {
        t.push(vec![
            r.design_id.clone(),
            r.provenance.name().into(),
            fmt_f64(r.mass_kg),
            fmt_f64(r.mode7_hz),
            fmt_f64(r.mode11_hz),
            r.score.map(fmt_f64).unwrap_or_default(),
        ]);
    }
    emit("scatter_performance.csv", t)?;
    Ok(written)
}
