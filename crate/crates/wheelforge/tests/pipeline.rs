use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use wheelforge::analysis::PerformanceRow;
use wheelforge::dataset::Table;
use wheelforge::plots::{export_plots, PlotInput};
use wheelforge::{run_all, run_stage, DatasetManifest, PipelineConfig, PipelineError, Provenance, RunOptions, Stage, StageReport};

const SMALL: &str = r#"
output_root = "out"
seed = 3
designs = 4
raster_size = 160
workers = 2

[topo]
max_iters = 30

[recon]
voxel_size = 6.0
target_triangles = 12000

[modal]
elem_size = 12.0

[sampling]
clusters = 2
lhs_samples = 3
chamfer_points = 500
iou_voxel = 6.0
"#;

fn small_config(dir: &Path) -> PipelineConfig {
    let path = dir.join("wheelforge.toml");
    std::fs::write(&path, SMALL).unwrap();
    PipelineConfig::load(&path).unwrap()
}

fn csv_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn config_paths_resolve_against_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert_eq!(cfg.output_root, dir.path().join("out"));
    assert_eq!(cfg.designs, 4);
}

#[test]
fn generate_twice_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = run_stage(Stage::Generate, &cfg, RunOptions::default()).unwrap();
    assert_eq!((first.ok_count(), first.skipped), (4, 0));
    let before = csv_files(&cfg.output_root);
    let mask = std::fs::read(cfg.output_root.join("masks/d0001.png")).unwrap();
    let second = run_stage(Stage::Generate, &cfg, RunOptions::default()).unwrap();
    assert_eq!(second.skipped, 4);
    assert_eq!(second.rows, first.rows);
    assert_eq!(csv_files(&cfg.output_root), before);
    let forced = run_stage(Stage::Generate, &cfg, RunOptions { force: true }).unwrap();
    assert_eq!(forced.skipped, 0);
    assert_eq!(std::fs::read(cfg.output_root.join("masks/d0001.png")).unwrap(), mask);
    assert_eq!(csv_files(&cfg.output_root), before);
}

#[test]
fn stages_need_their_predecessor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let err = run_stage(Stage::Recon, &cfg, RunOptions::default()).unwrap_err();
    assert!(
        matches!(err, PipelineError::MissingPredecessor { stage: Stage::Recon, predecessor: Stage::Depth, .. }),
        "{err}"
    );
    run_stage(Stage::Generate, &cfg, RunOptions::default()).unwrap();
    let err = run_stage(Stage::Simulate, &cfg, RunOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::MissingPredecessor { predecessor: Stage::Recon, .. }), "{err}");
    let err = run_stage(Stage::Analyze, &cfg, RunOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::MissingPredecessor { predecessor: Stage::Simulate, .. }), "{err}");
}

#[test]
fn invalid_config_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.topo.volume_fractions = vec![1.5];
    let err = run_stage(Stage::Generate, &cfg, RunOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::ConfigInvalid(_)));
    assert!(!cfg.output_root.join("manifest.csv").exists());
}

#[test]
fn full_run_accounts_for_every_design() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let reports = run_all(&cfg, RunOptions::default()).unwrap();
    let mut entering = cfg.designs;
    let mut failed = 0;
    for r in &reports[..4] {
        assert_eq!(r.ok_count() + r.failed_count(), entering, "{}", r.summary());
        entering = r.ok_count();
        failed += r.failed_count();
    }
    assert_eq!(failed + entering, cfg.designs);
    let ds = wheelforge::Dataset::new(&cfg.output_root);
    let manifest = DatasetManifest::read(&cfg.output_root.join("manifest.csv")).unwrap();
    assert_eq!(manifest.rows.len(), cfg.designs);
    assert_eq!(manifest.ok_count(), entering);
    assert_eq!(manifest.ok_count() + manifest.failed_count(), cfg.designs);
    assert!(manifest.missing_artifacts(&ds).is_empty());
    assert!(manifest.ok_count() >= 2, "{manifest:?}");
    for row in manifest.rows.iter().filter(|r| r.status == "ok") {
        let s = row.score.unwrap();
        assert!((0.0..=1.0).contains(&s));
    }

    let plots = cfg.output_root.join("plots");
    for name in ["mass", "mode7", "mode11", "score"] {
        let t = Table::read(&plots.join(format!("hist_{name}.csv"))).unwrap();
        let total: usize = t.rows.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
        assert_eq!(total, manifest.ok_count(), "{name}");
        if name == "score" {
            assert_eq!(t.rows[0][0], "0");
            assert_eq!(t.rows.last().unwrap()[1], "1");
        }
    }
    for name in ["scatter_embedding.csv", "scatter_performance.csv"] {
        assert_eq!(Table::read(&plots.join(name)).unwrap().rows.len(), manifest.ok_count());
    }
    for name in ["features.csv", "embedding.csv", "clusters.csv", "lhs.csv", "diversity.csv", "evaluation.csv", "centroids.csv", "results.csv"] {
        assert!(cfg.output_root.join(name).is_file(), "{name}");
    }
    let features = Table::read(&cfg.output_root.join("features.csv")).unwrap();
    assert_eq!(features.header.len(), 1 + 256);

    let before = csv_files(&cfg.output_root);
    let again = run_all(&cfg, RunOptions::default()).unwrap();
    assert!(again[..4].iter().all(|r| r.skipped == r.rows.len()));
    assert_eq!(csv_files(&cfg.output_root), before);
}

#[test]
fn one_broken_design_does_not_stop_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig { designs: 3, ..small_config(dir.path()) };
    run_stage(Stage::Generate, &cfg, RunOptions::default()).unwrap();
    std::fs::write(cfg.output_root.join("masks/d0001.png"), b"not a png").unwrap();
    let depth = run_stage(Stage::Depth, &cfg, RunOptions::default()).unwrap();
    assert_eq!((depth.ok_count(), depth.failed_count()), (2, 1));
    assert!(!depth.row("d0001").unwrap().ok);
    let manifest = DatasetManifest::read(&cfg.output_root.join("manifest.csv")).unwrap();
    assert_eq!(manifest.rows[1].status, "failed:depth");
    assert!(!manifest.rows[1].error.is_empty());
    assert_eq!(manifest.pending_count(), 2);
    let recon = run_stage(Stage::Recon, &cfg, RunOptions::default()).unwrap();
    assert_eq!(recon.rows.len(), 2);
    let written = StageReport::read(&wheelforge::Dataset::new(&cfg.output_root), Stage::Depth).unwrap().unwrap();
    assert_eq!(written.rows, depth.rows);
}

fn perf(id: &str, mass: f64, score: f64) -> PerformanceRow {
    PerformanceRow { design_id: id.into(), provenance: Provenance::Reference, mass_kg: mass, mode7_hz: 300.0 + mass, mode11_hz: 900.0, score: Some(score) }
}

#[test]
fn two_design_plots() {
    let dir = tempfile::tempdir().unwrap();
    let input = PlotInput {
        performance: vec![perf("d0000", 20.0, 0.0), perf("d0001", 25.0, 1.0)],
        embedding: vec![("d0000".into(), Provenance::Reference, 0.0, 1.0), ("d0001".into(), Provenance::Topo, 1.0, 0.0)],
        bins: 5,
    };
    let files = export_plots(dir.path(), &input).unwrap();
    let hists: Vec<&PathBuf> = files.iter().filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("hist_")).collect();
    assert_eq!(hists.len(), 4);
    for h in hists {
        let t = Table::read(h).unwrap();
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.rows.iter().map(|r| r[2].parse::<usize>().unwrap()).sum::<usize>(), 2);
    }
    let empty = PlotInput { performance: Vec::new(), embedding: Vec::new(), bins: 5 };
    assert!(matches!(export_plots(dir.path(), &empty), Err(PipelineError::EmptyManifest)));
}

#[test]
fn cli_overrides_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let exe = env!("CARGO_BIN_EXE_wheelforge");
    let cfg = dir.path().join("wheelforge.toml");
    let out = Command::new(exe).args(["generate", "--config"]).arg(&cfg).args(["--designs", "2", "--workers", "1"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = DatasetManifest::read(&dir.path().join("out/manifest.csv")).unwrap();
    assert_eq!(manifest.rows.len(), 2);
    let out = Command::new(exe).args(["recon", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("depth"));
    let out = Command::new(exe).args(["generate", "--config"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert!(!out.status.success());
}
