//! Pipeline configuration read from a TOML file, with CLI overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use wheelforge_core::modal::{EigenOptions, Material};
use wheelforge_core::recon::ReconConfig;
use wheelforge_core::topo::{SegmentSetup, SweepGrid, TopoParams};
use wheelforge_core::wheel::{RimTemplate, SpokeDepthProfile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Relative paths are taken from the configuration file's directory.
    pub output_root: PathBuf,
    pub seed: u64,
    pub designs: usize,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub raster_size: usize,
    pub segment: SegmentSettings,
    pub topo: TopoSettings,
    pub template: TemplateSettings,
    pub recon: ReconSettings,
    pub modal: ModalSettings,
    pub sampling: SamplingSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_root: PathBuf::from("out"),
            seed: 7,
            designs: 20,
            workers: 0,
            raster_size: 512,
            segment: SegmentSettings::default(),
            topo: TopoSettings::default(),
            template: TemplateSettings::default(),
            recon: ReconSettings::default(),
            modal: ModalSettings::default(),
            sampling: SamplingSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSettings {
    pub nx: usize,
    pub ny: usize,
    pub hub_rows: usize,
    pub rim_rows: usize,
    pub load_span: usize,
}

impl Default for SegmentSettings {
    fn default() -> Self {
        let s = SegmentSetup::default();
        Self { nx: s.nx, ny: s.ny, hub_rows: s.hub_rows, rim_rows: s.rim_rows, load_span: s.load_span }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopoSettings {
    pub lambdas: Vec<f64>,
    pub volume_fractions: Vec<f64>,
    pub normal_shear_ratios: Vec<f64>,
    pub n_segs: Vec<usize>,
    pub filter_radius: f64,
    pub max_iters: usize,
    pub move_limit: f64,
    pub change_tol: f64,
}

impl Default for TopoSettings {
    fn default() -> Self {
        let p = TopoParams::default();
        Self {
            lambdas: vec![0.0, 0.5, 2.0],
            volume_fractions: vec![0.2, 0.35, 0.5],
            normal_shear_ratios: vec![0.25, 1.0, 4.0],
            n_segs: vec![4, 5, 6],
            filter_radius: p.filter_radius,
            max_iters: 80,
            move_limit: p.move_limit,
            change_tol: p.change_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSettings {
    pub rim_diameter: f64,
    pub rim_width: f64,
    pub offset: f64,
    pub pcd: f64,
    pub hub_bore: f64,
    pub disc_diameter: f64,
    pub n_bolts: usize,
    pub bolt_hole_diameter: f64,
    pub hub_depth: f64,
    pub rim_depth: f64,
    pub barrel_thickness: f64,
    pub spoke_thickness: f64,
    pub flange_height: f64,
}

impl Default for TemplateSettings {
    fn default() -> Self {
        let t = RimTemplate::default();
        let SpokeDepthProfile::Linear { hub_depth, rim_depth } = t.spoke_depth_profile;
        Self {
            rim_diameter: t.rim_diameter,
            rim_width: t.rim_width,
            offset: t.offset,
            pcd: t.pcd,
            hub_bore: t.hub_bore,
            disc_diameter: t.disc_diameter,
            n_bolts: t.n_bolts,
            bolt_hole_diameter: t.bolt_hole_diameter,
            hub_depth,
            rim_depth,
            barrel_thickness: t.barrel_thickness,
            spoke_thickness: t.spoke_thickness,
            flange_height: t.flange_height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconSettings {
    pub voxel_size: f64,
    pub iso: f64,
    pub smooth_iters: usize,
    pub target_triangles: usize,
    pub scale_tolerance: f64,
}

impl Default for ReconSettings {
    fn default() -> Self {
        let r = ReconConfig::default();
        Self {
            voxel_size: 4.0,
            iso: r.iso,
            smooth_iters: r.smooth_iters,
            target_triangles: 30_000,
            scale_tolerance: r.scale_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModalSettings {
    /// Hexahedron edge in mm.
    pub elem_size: f64,
    pub n_modes: usize,
    pub shift_hz: f64,
    pub density: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub yield_strength: f64,
    pub ultimate_strength: f64,
}

impl Default for ModalSettings {
    fn default() -> Self {
        let m = Material::aluminium_a356();
        Self {
            elem_size: 10.0,
            n_modes: 12,
            shift_hz: EigenOptions::default().shift_hz,
            density: m.density,
            youngs_modulus: m.youngs_modulus,
            poisson_ratio: m.poisson_ratio,
            yield_strength: m.yield_strength,
            ultimate_strength: m.ultimate_strength,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSettings {
    pub feature_grid: usize,
    pub clusters: usize,
    pub lhs_samples: usize,
    pub histogram_bins: usize,
    /// IoU lattice spacing in mm.
    pub iou_voxel: f64,
    pub chamfer_points: usize,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        Self { feature_grid: 16, clusters: 10, lhs_samples: 10, histogram_bins: 10, iou_voxel: 2.0, chamfer_points: 4000 }
    }
}

impl PipelineConfig {
    /// Reads a configuration file and resolves `output_root` against it.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        if cfg.output_root.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.output_root = base.join(&cfg.output_root);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.designs == 0 {
            return bad("designs must be positive".into());
        }
        if self.raster_size < 64 {
            return bad(format!("raster_size {} is below 64", self.raster_size));
        }
        self.template().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let grid = self.sweep_grid();
        for p in grid.combinations().map_err(|e| ConfigError::Invalid(e.to_string()))? {
            p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let s = &self.segment;
        if s.nx < 2 || s.ny < 3 || s.hub_rows + s.rim_rows >= s.ny || s.load_span == 0 || s.load_span > s.nx + 1 {
            return bad("segment grid is too small for its hub, rim and load rows".into());
        }
        let r = &self.recon;
        if !(r.voxel_size > 0.0 && r.iso > 0.0 && r.iso < 1.0 && r.scale_tolerance > 0.0 && r.target_triangles >= 4) {
            return bad("recon settings out of range".into());
        }
        self.material().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.modal.elem_size > 0.0 && self.modal.shift_hz > 0.0) || self.modal.n_modes < 12 {
            return bad("modal needs elem_size > 0, shift_hz > 0 and at least 12 modes".into());
        }
        let sm = &self.sampling;
        if sm.feature_grid == 0 || sm.clusters == 0 || sm.lhs_samples == 0 || sm.histogram_bins == 0 {
            return bad("sampling counts must be positive".into());
        }
        if !(sm.iou_voxel > 0.0) || sm.chamfer_points < 100 {
            return bad("iou_voxel must be positive and chamfer_points at least 100".into());
        }
        Ok(())
    }

    pub fn template(&self) -> RimTemplate {
        let t = &self.template;
        RimTemplate {
            rim_diameter: t.rim_diameter,
            rim_width: t.rim_width,
            offset: t.offset,
            pcd: t.pcd,
            hub_bore: t.hub_bore,
            disc_diameter: t.disc_diameter,
            n_bolts: t.n_bolts,
            bolt_hole_diameter: t.bolt_hole_diameter,
            spoke_depth_profile: SpokeDepthProfile::Linear { hub_depth: t.hub_depth, rim_depth: t.rim_depth },
            barrel_thickness: t.barrel_thickness,
            spoke_thickness: t.spoke_thickness,
            flange_height: t.flange_height,
        }
    }

    pub fn segment_setup(&self) -> SegmentSetup {
        let s = &self.segment;
        SegmentSetup { nx: s.nx, ny: s.ny, hub_rows: s.hub_rows, rim_rows: s.rim_rows, load_span: s.load_span, ..SegmentSetup::default() }
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        let t = &self.topo;
        SweepGrid {
            lambdas: t.lambdas.clone(),
            volume_fractions: t.volume_fractions.clone(),
            normal_shear_ratios: t.normal_shear_ratios.clone(),
            n_segs: t.n_segs.clone(),
            base: TopoParams {
                filter_radius: t.filter_radius,
                max_iters: t.max_iters,
                move_limit: t.move_limit,
                change_tol: t.change_tol,
                ..TopoParams::default()
            },
        }
    }

    pub fn recon_config(&self) -> ReconConfig {
        let r = &self.recon;
        ReconConfig {
            voxel_size: r.voxel_size,
            iso: r.iso,
            smooth_iters: r.smooth_iters,
            target_triangles: r.target_triangles,
            scale_tolerance: r.scale_tolerance,
        }
    }

    pub fn material(&self) -> Material {
        let m = &self.modal;
        Material {
            density: m.density,
            youngs_modulus: m.youngs_modulus,
            poisson_ratio: m.poisson_ratio,
            yield_strength: m.yield_strength,
            ultimate_strength: m.ultimate_strength,
        }
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions { shift_hz: self.modal.shift_hz, ..EigenOptions::default() }
    }
}
