//! Deterministic design recipes: which spoke style, segment count and
//! optimizer settings each design id gets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wheelforge_core::raster::Raster8;
use wheelforge_core::reference::SpokeStyle;
use wheelforge_core::topo::{optimize_segment, replicate_segment, ReferenceDesign, TopoParams};

use crate::config::PipelineConfig;
use crate::dataset::{design_id, fmt_f64, Table};
use crate::manifest::Provenance;
use crate::PipelineError;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub index: usize,
    pub id: String,
    pub provenance: Provenance,
    /// Spoke style of the design itself (reference) or of its reference (topo).
    pub style: SpokeStyle,
    pub n_seg: usize,
    /// Optimizer settings; `None` for reference designs.
    pub params: Option<TopoParams>,
    pub reference_id: Option<String>,
}

fn design_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Recipe of design `index`; depends only on the seed, the index and the sweep grid.
pub fn design_spec(cfg: &PipelineConfig, index: usize) -> Result<DesignSpec, PipelineError> {
    let invalid = |e: String| PipelineError::ConfigInvalid(crate::ConfigError::Invalid(e));
    match Provenance::of_index(index) {
        Provenance::Reference => {
            let mut rng = design_rng(cfg.seed, index);
            let style = SpokeStyle::sample(&mut rng);
            let n_segs = &cfg.topo.n_segs;
            if n_segs.is_empty() {
                return Err(invalid("n_segs is empty".into()));
            }
            let n_seg = n_segs[rng.random_range(0..n_segs.len())];
            Ok(DesignSpec { index, id: design_id(index), provenance: Provenance::Reference, style, n_seg, params: None, reference_id: None })
        }
        Provenance::Topo => {
            let reference = design_spec(cfg, index - 1)?;
            let combos = cfg.sweep_grid().combinations().map_err(|e| invalid(e.to_string()))?;
            let mut rng = design_rng(cfg.seed, index);
            let params = combos[rng.random_range(0..combos.len())].clone();
            Ok(DesignSpec {
                index,
                id: design_id(index),
                provenance: Provenance::Topo,
                style: reference.style,
                n_seg: params.n_seg,
                params: Some(params),
                reference_id: Some(reference.id),
            })
        }
    }
}

/// Full-wheel mask together with key/value notes for its sidecar file.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedMask {
    pub raster: Raster8,
    pub notes: Vec<(String, String)>,
}

pub fn generate_mask(cfg: &PipelineConfig, spec: &DesignSpec) -> Result<GeneratedMask, String> {
    let setup = cfg.segment_setup();
    let reference = spec.style.rasterize(&setup);
    let mut notes = vec![
        ("design_id".to_string(), spec.id.clone()),
        ("provenance".into(), spec.provenance.name().into()),
        ("n_seg".into(), spec.n_seg.to_string()),
    ];
    let segment = match &spec.params {
        None => reference,
        Some(params) => {
            let reference = ReferenceDesign { densities: reference, source_id: spec.reference_id.clone().unwrap_or_default() };
            let loads = setup.loads(params.normal_shear_ratio);
            let passive = setup.passive();
            let opt = optimize_segment(params, &reference, &setup.model(), &loads, Some(&passive)).map_err(|e| e.to_string())?;
            let last = opt.trace.records.last();
            notes.extend([
                ("reference_id".into(), reference.source_id.clone()),
                ("lambda_sim".into(), fmt_f64(params.lambda_sim)),
                ("volume_fraction".into(), fmt_f64(params.volume_fraction)),
                ("normal_shear_ratio".into(), fmt_f64(params.normal_shear_ratio)),
                ("iterations".into(), opt.trace.records.len().to_string()),
                ("converged".into(), opt.trace.converged.to_string()),
                ("compliance".into(), last.map(|r| fmt_f64(r.compliance)).unwrap_or_default()),
            ]);
            opt.densities
        }
    };
    let raster = replicate_segment(&segment, setup.nx, setup.ny, spec.n_seg, cfg.raster_size, &cfg.template());
    let solid = raster.data.iter().filter(|&&v| v >= 128).count() as f64 / raster.data.len() as f64;
    notes.push(("solid_fraction".into(), fmt_f64(solid)));
    Ok(GeneratedMask { raster, notes })
}

/// One row per design describing its recipe.
pub fn designs_table(specs: &[DesignSpec]) -> Table {
    let mut t = Table::new([
        "design_id",
        "provenance",
        "reference_id",
        "n_seg",
        "lambda_sim",
        "volume_fraction",
        "normal_shear_ratio",
        "spokes",
        "hub_width",
        "taper",
        "twist",
        "fork_at",
        "fork_spread",
    ]);
    for s in specs {
        let p = |f: fn(&TopoParams) -> f64| s.params.as_ref().map(|p| fmt_f64(f(p))).unwrap_or_default();
        t.push(vec![
            s.id.clone(),
            s.provenance.name().into(),
            s.reference_id.clone().unwrap_or_default(),
            s.n_seg.to_string(),
            p(|p| p.lambda_sim),
            p(|p| p.volume_fraction),
            p(|p| p.normal_shear_ratio),
            s.style.spokes.to_string(),
            fmt_f64(s.style.hub_width),
            fmt_f64(s.style.taper),
            fmt_f64(s.style.twist),
            fmt_f64(s.style.fork_at),
            fmt_f64(s.style.fork_spread),
        ]);
    }
    t
}
