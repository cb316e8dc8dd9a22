//! Wheel segment topology optimization and full-wheel replication.
//!
//! A segment is optimized on a regular `nx × ny` grid read in polar index
//! space: columns run along the angle of one sector, rows run outward from
//! the hub. The objective is compliance plus an L1 pull toward a reference
//! layout,
//!
//! ```text
//! min  Uᵀ K(x) U + λ ‖x_r − x‖₁   s.t.  K(x) U = F,  mean(x) = f,  0 ≤ x ≤ 1
//! ```
//!
//! solved with an optimality-criteria scheme on cone-filtered compliance
//! sensitivities. Replication tiles the segment `n_seg` times around the
//! axis, which makes the wheel exactly `n_seg`-fold symmetric in polar index
//! space.

use std::f64::consts::PI;

use thiserror::Error;

use crate::fem2d::{element_compliances, FemError, GridModel2D, LoadCase2D, PlaneStressSolver};
use crate::raster::Raster8;
use crate::wheel::{RimTemplate, WheelLayout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopoError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no volume multiplier meets the target (mean {achieved:.6} vs {target:.6})")]
    BisectionFailure { target: f64, achieved: f64 },
    #[error("parameter grid is empty ({0})")]
    EmptyGrid(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoParams {
    pub lambda_sim: f64,
    pub volume_fraction: f64,
    pub normal_shear_ratio: f64,
    pub n_seg: usize,
    pub filter_radius: f64,
    pub max_iters: usize,
    pub move_limit: f64,
    pub change_tol: f64,
}

impl Default for TopoParams {
    fn default() -> Self {
        Self {
            lambda_sim: 0.0,
            volume_fraction: 0.5,
            normal_shear_ratio: 1.0,
            n_seg: 5,
            filter_radius: 1.5,
            max_iters: 200,
            move_limit: 0.2,
            change_tol: 0.01,
        }
    }
}

impl TopoParams {
    pub fn validate(&self) -> Result<(), TopoError> {
        let bad = |m: String| Err(TopoError::InvalidParams(m));
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return bad(format!("volume fraction {} not in (0, 1)", self.volume_fraction));
        }
        if !(self.lambda_sim >= 0.0) {
            return bad(format!("similarity weight {} is negative", self.lambda_sim));
        }
        if !(4..=6).contains(&self.n_seg) {
            return bad(format!("n_seg {} not in {{4, 5, 6}}", self.n_seg));
        }
        if !(self.filter_radius >= 1.0) {
            return bad(format!("filter radius {} < 1", self.filter_radius));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return bad(format!("move limit {} not in (0, 1]", self.move_limit));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.normal_shear_ratio >= 0.0) {
            return bad("normal/shear ratio must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDesign {
    pub densities: Vec<f64>,
    pub source_id: String,
}

/// Segment densities together with the replicated full-wheel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub segment: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub n_seg: usize,
    pub wheel_raster: Raster8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub compliance: f64,
    pub similarity: f64,
    pub volume: f64,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    /// False when the run stopped at `max_iters` (not fatal).
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedSegment {
    pub densities: Vec<f64>,
    pub trace: ConvergenceTrace,
}

/// Cone-weighted sensitivity filter with precomputed neighbourhoods.
#[derive(Debug, Clone)]
pub struct SensitivityFilter {
    neighbours: Vec<Vec<(usize, f64)>>,
}

impl SensitivityFilter {
    pub fn new(nx: usize, ny: usize, radius: f64) -> Self {
        let reach = radius.ceil() as isize - 1;
        let neighbours = (0..nx * ny)
            .map(|e| {
                let (ex, ey) = ((e % nx) as isize, (e / nx) as isize);
                let mut list = Vec::new();
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let (x, y) = (ex + dx, ey + dy);
                        if x < 0 || y < 0 || x >= nx as isize || y >= ny as isize {
                            continue;
                        }
                        let w = radius - ((dx * dx + dy * dy) as f64).sqrt();
                        if w > 0.0 {
                            list.push((y as usize * nx + x as usize, w));
                        }
                    }
                }
                list
            })
            .collect();
        Self { neighbours }
    }

    /// `Σ Hₑᵢ xᵢ dcᵢ / (max(1e-3, xₑ) Σ Hₑᵢ)`
    pub fn apply(&self, x: &[f64], dc: &[f64]) -> Vec<f64> {
        self.neighbours
            .iter()
            .enumerate()
            .map(|(e, nb)| {
                let (mut num, mut den) = (0.0, 0.0);
                for &(i, w) in nb {
                    num += w * x[i] * dc[i];
                    den += w;
                }
                num / (x[e].max(1e-3) * den)
            })
            .collect()
    }
}

/// `λ · sign(x − x_r)` with `sign(0) = 0`: the subgradient of the similarity term.
pub fn similarity_subgradient(x: &[f64], reference: &[f64], lambda_sim: f64) -> Vec<f64> {
    assert_eq!(x.len(), reference.len());
    x.iter()
        .zip(reference)
        .map(|(&a, &b)| {
            let d = a - b;
            if d > 0.0 {
                lambda_sim
            } else if d < 0.0 {
                -lambda_sim
            } else {
                0.0
            }
        })
        .collect()
}

pub fn similarity_term(x: &[f64], reference: &[f64], lambda_sim: f64) -> f64 {
    lambda_sim * x.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Settings of one optimality-criteria step.
#[derive(Debug, Clone, Copy)]
pub struct OcStep<'a> {
    pub volume_fraction: f64,
    pub move_limit: f64,
    pub lambda_sim: f64,
    pub reference: Option<&'a [f64]>,
    /// Elements frozen at density 1.
    pub passive: Option<&'a [bool]>,
}

impl<'a> OcStep<'a> {
    pub fn new(volume_fraction: f64, move_limit: f64) -> Self {
        Self { volume_fraction, move_limit, lambda_sim: 0.0, reference: None, passive: None }
    }
}

/// Minimizer of `a/y + μ y + λ|y − r|` over `[lo, hi]` for `a ≥ 0`, given
/// `plus = μ + λ > 0` and `minus = μ − λ`.
///
/// With `λ = 0` this is the classic OC fixed point `y = x √(−dc/μ)` where
/// `a = −dc x²` (x floored at 1e-3 so void elements can regrow). With
/// `λ > 0` the L1 subgradient is taken at the updated density, so a dominant
/// similarity weight lands exactly on `r`.
fn prox_update(a: f64, plus: f64, minus: f64, lambda: f64, r: f64, lo: f64, hi: f64) -> f64 {
    let root = |d: f64| if a > 0.0 { (a / d).sqrt() } else { 0.0 };
    let y = if lambda == 0.0 {
        root(plus)
    } else {
        let above = root(plus);
        if above > r {
            above
        } else if minus > 0.0 {
            root(minus).min(r)
        } else {
            r
        }
    };
    y.clamp(lo, hi)
}

/// Optimality-criteria density update with a bisection on the volume multiplier.
///
/// `sensitivities` are (filtered) compliance sensitivities, expected
/// non-positive; `volume_sensitivities` are positive element volumes.
/// The step honours the move limit and box bounds and returns a design with
/// `mean(x) = volume_fraction` within 1e-4.
pub fn oc_update(
    x: &[f64],
    sensitivities: &[f64],
    volume_sensitivities: &[f64],
    step: &OcStep<'_>,
) -> Result<Vec<f64>, TopoError> {
    let n = x.len();
    for len in [sensitivities.len(), volume_sensitivities.len()]
        .into_iter()
        .chain(step.reference.map(|r| r.len()))
        .chain(step.passive.map(|p| p.len()))
    {
        if len != n {
            return Err(TopoError::DimensionMismatch { expected: n, found: len });
        }
    }
    let is_passive = |e: usize| step.passive.is_some_and(|p| p[e]);
    let target = step.volume_fraction * n as f64;
    let m = step.move_limit;

    let lambda = if step.reference.is_some() { step.lambda_sim } else { 0.0 };
    let dv_max = volume_sensitivities.iter().cloned().fold(0.0, f64::max);
    if !(dv_max > 0.0) {
        return Err(TopoError::InvalidParams("volume sensitivities must be positive".into()));
    }

    // The equality constraint admits μ down to −λ; bisect on t with μ = eᵗ − λ/max(dv).
    let evaluate = |t: f64, out: &mut Vec<f64>| -> f64 {
        let shift = t.exp();
        out.clear();
        let mut sum = 0.0;
        for e in 0..n {
            let y = if is_passive(e) {
                1.0
            } else {
                let xe = x[e].max(1e-3);
                let a = (-sensitivities[e]).max(0.0) * xe * xe;
                let r = step.reference.map_or(0.0, |r| r[e]);
                let lo = (x[e] - m).max(0.0);
                let hi = (x[e] + m).min(1.0);
                let dv = volume_sensitivities[e];
                let plus = shift * dv + lambda * (1.0 - dv / dv_max);
                prox_update(a, plus, plus - 2.0 * lambda, lambda, r, lo, hi)
            };
            sum += y;
            out.push(y);
        }
        sum
    };

    // The element update is non-increasing in t.
    let mut buf = Vec::with_capacity(n);
    let (mut lo, mut hi) = (-700.0f64, 700.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let sum = evaluate(mid, &mut buf);
        if (sum - target).abs() <= 1e-12 * n as f64 {
            return Ok(buf);
        }
        if sum > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    // The update jumps where an element's optimum is set-valued; any convex
    // combination of the two one-sided limits is optimal there.
    let mut x_hi = Vec::with_capacity(n);
    let s_lo = evaluate(lo, &mut buf);
    let s_hi = evaluate(hi, &mut x_hi);
    if !(s_lo >= target && target >= s_hi) {
        let achieved = if s_lo < target { s_lo } else { s_hi };
        return Err(TopoError::BisectionFailure { target: step.volume_fraction, achieved: achieved / n as f64 });
    }
    let t = if s_lo > s_hi { (s_lo - target) / (s_lo - s_hi) } else { 0.0 };
    let x_next: Vec<f64> = buf.iter().zip(&x_hi).map(|(a, b)| a + t * (b - a)).collect();
    let achieved = x_next.iter().sum::<f64>() / n as f64;
    if (achieved - step.volume_fraction).abs() > 1e-4 {
        return Err(TopoError::BisectionFailure { target: step.volume_fraction, achieved });
    }
    Ok(x_next)
}

/// Runs the optimizer on one segment. `passive` marks elements frozen solid.
pub fn optimize_segment(
    params: &TopoParams,
    reference: &ReferenceDesign,
    model: &GridModel2D,
    loads: &LoadCase2D,
    passive: Option<&[bool]>,
) -> Result<OptimizedSegment, TopoError> {
    params.validate()?;
    let n = model.n_elems();
    if reference.densities.len() != n {
        return Err(TopoError::DimensionMismatch { expected: n, found: reference.densities.len() });
    }
    if let Some(p) = passive {
        if p.len() != n {
            return Err(TopoError::DimensionMismatch { expected: n, found: p.len() });
        }
        let n_passive = p.iter().filter(|&&b| b).count();
        if n_passive as f64 > params.volume_fraction * n as f64 {
            return Err(TopoError::InvalidParams(format!(
                "{n_passive} passive elements exceed volume fraction {}",
                params.volume_fraction
            )));
        }
    }
    let solver = PlaneStressSolver::new(model, loads)?;
    let filter = SensitivityFilter::new(model.nx, model.ny, params.filter_radius);
    let dv = vec![1.0; n];
    let step = OcStep {
        volume_fraction: params.volume_fraction,
        move_limit: params.move_limit,
        lambda_sim: params.lambda_sim,
        reference: Some(&reference.densities),
        passive,
    };

    let initial = {
        let mut x = vec![params.volume_fraction; n];
        if let Some(p) = passive {
            let n_passive = p.iter().filter(|&&b| b).count();
            let fill = (params.volume_fraction * n as f64 - n_passive as f64) / (n - n_passive).max(1) as f64;
            for (xe, &pe) in x.iter_mut().zip(p) {
                *xe = if pe { 1.0 } else { fill };
            }
        }
        x
    };

    let analyze = |x: &[f64]| -> Result<(f64, Vec<f64>), TopoError> {
        let u = solver.solve(x)?;
        let ce = element_compliances(model, x, &u)?;
        let c = solver.compliance(&u);
        let dc: Vec<f64> = x.iter().zip(&ce).map(|(&xe, &c)| -model.modulus_derivative(xe) / model.youngs_modulus_solid * c).collect();
        Ok((c, dc))
    };
    let record = |iteration: usize, x: &[f64], c: f64, change: f64| {
        let similarity = similarity_term(x, &reference.densities, params.lambda_sim);
        IterationRecord {
            iteration,
            objective: c + similarity,
            compliance: c,
            similarity,
            volume: x.iter().sum::<f64>() / n as f64,
            change,
        }
    };

    let mut x = initial;
    let mut trace = ConvergenceTrace::default();
    for iteration in 1..=params.max_iters {
        let (c, dc) = analyze(&x)?;
        let dc = filter.apply(&x, &dc);
        let x_next = oc_update(&x, &dc, &dv, &step)?;
        let change = x.iter().zip(&x_next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        trace.records.push(record(iteration, &x, c, change));
        x = x_next;
        if change < params.change_tol {
            trace.converged = true;
            break;
        }
    }
    let (c, _) = analyze(&x)?;
    trace.records.push(record(trace.records.len() + 1, &x, c, 0.0));
    Ok(OptimizedSegment { densities: x, trace })
}

/// Grid, supports and passive rows for a wheel segment.
///
/// The bottom row of nodes is bolted to the hub (all dofs fixed); the tyre
/// load acts on the centre of the rim edge with a radial (normal) and a
/// tangential (shear) component whose ratio is `normal_shear_ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSetup {
    pub nx: usize,
    pub ny: usize,
    pub hub_rows: usize,
    pub rim_rows: usize,
    /// Number of rim-edge nodes sharing the load.
    pub load_span: usize,
    pub load_magnitude: f64,
}

impl Default for SegmentSetup {
    fn default() -> Self {
        Self { nx: 24, ny: 16, hub_rows: 1, rim_rows: 1, load_span: 3, load_magnitude: 1.0 }
    }
}

impl SegmentSetup {
    pub fn model(&self) -> GridModel2D {
        GridModel2D::new(self.nx, self.ny)
    }

    pub fn loads(&self, normal_shear_ratio: f64) -> LoadCase2D {
        let model = self.model();
        let mut loads = LoadCase2D { normal_shear_ratio, ..LoadCase2D::default() };
        for i in 0..=self.nx {
            let node = model.node_id(i, 0);
            loads.fixed_dofs.insert(2 * node);
            loads.fixed_dofs.insert(2 * node + 1);
        }
        let span = self.load_span.clamp(1, self.nx + 1);
        let first = (self.nx + 1 - span) / 2;
        let norm = (1.0 + normal_shear_ratio * normal_shear_ratio).sqrt();
        let radial = -self.load_magnitude * normal_shear_ratio / norm / span as f64;
        let tangential = self.load_magnitude / norm / span as f64;
        for i in first..first + span {
            let node = model.node_id(i, self.ny);
            if tangential != 0.0 {
                loads.nodal_forces.insert(2 * node, tangential);
            }
            if radial != 0.0 {
                loads.nodal_forces.insert(2 * node + 1, radial);
            }
        }
        loads
    }

    pub fn passive(&self) -> Vec<bool> {
        (0..self.nx * self.ny)
            .map(|e| {
                let row = e / self.nx;
                row < self.hub_rows || row >= self.ny - self.rim_rows.min(self.ny)
            })
            .collect()
    }
}

/// Segment tiled around the axis on a `ny × (n_seg·nx)` polar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarRaster {
    pub n_radial: usize,
    pub n_angular: usize,
    pub values: Vec<f64>,
}

impl PolarRaster {
    pub fn get(&self, radial: usize, angular: usize) -> f64 {
        self.values[radial * self.n_angular + angular % self.n_angular]
    }
}

pub fn polar_replicate(segment: &[f64], nx: usize, ny: usize, n_seg: usize) -> PolarRaster {
    assert_eq!(segment.len(), nx * ny);
    let n_angular = nx * n_seg;
    let values = (0..ny)
        .flat_map(|i| (0..n_angular).map(move |k| segment[i * nx + k % nx]))
        .collect();
    PolarRaster { n_radial: ny, n_angular, values }
}

/// Polar angle in `[0, 2π)` after folding the point by the exact lattice
/// symmetries (half turns for even `n_seg`, quarter turns when `4 | n_seg`),
/// so rotated pixel centres map to bit-identical angles.
fn folded_angle(x: f64, y: f64, n_seg: usize) -> f64 {
    let (mut x, mut y) = (x, y);
    if n_seg % 2 == 0 && (y < 0.0 || (y == 0.0 && x < 0.0)) {
        x = -x;
        y = -y;
    }
    if n_seg % 4 == 0 && x <= 0.0 && y > 0.0 {
        (x, y) = (y, -x);
    }
    let t = y.atan2(x);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Region of the wheel face a point falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceRegion {
    Outside,
    Rim,
    /// Design ring cell `(radial row, angular column)` of the segment grid.
    Design(usize, usize),
    Hub,
    Bore,
}

/// Classifies a millimetre point on the wheel face.
pub fn face_region(template: &RimTemplate, nx: usize, ny: usize, n_seg: usize, x: f64, y: f64) -> FaceRegion {
    let r = (x * x + y * y).sqrt();
    let (r_in, r_out) = (template.disc_radius(), template.barrel_inner_radius());
    if r > template.rim_radius() {
        FaceRegion::Outside
    } else if r >= r_out {
        FaceRegion::Rim
    } else if r >= r_in {
        let row = (((r - r_in) / (r_out - r_in)) * ny as f64) as usize;
        let sector = 2.0 * PI / n_seg as f64;
        let phi = folded_angle(x, y, n_seg) % sector;
        let col = ((phi / sector) * nx as f64) as usize;
        FaceRegion::Design(row.min(ny - 1), col.min(nx - 1))
    } else if r >= template.bore_radius() {
        FaceRegion::Hub
    } else {
        FaceRegion::Bore
    }
}

/// Rasterizes the replicated wheel: 255 solid, 0 void, gray for intermediate
/// densities. Rim ring and hub are solid; bore and background are void.
pub fn replicate_segment(
    segment: &[f64],
    nx: usize,
    ny: usize,
    n_seg: usize,
    raster_size: usize,
    template: &RimTemplate,
) -> Raster8 {
    assert_eq!(segment.len(), nx * ny);
    let layout = WheelLayout::for_template(template, raster_size);
    let mut raster = Raster8::new(raster_size, raster_size);
    for py in 0..raster_size {
        for px in 0..raster_size {
            let (x, y) = layout.pixel_to_mm(px, py);
            let v = match face_region(template, nx, ny, n_seg, x, y) {
                FaceRegion::Outside | FaceRegion::Bore => 0,
                FaceRegion::Rim | FaceRegion::Hub => 255,
                FaceRegion::Design(row, col) => (segment[row * nx + col].clamp(0.0, 1.0) * 255.0).round() as u8,
            };
            raster.set(px, py, v);
        }
    }
    raster
}

/// Axes of a Cartesian sweep over the four design parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub volume_fractions: Vec<f64>,
    pub normal_shear_ratios: Vec<f64>,
    pub n_segs: Vec<usize>,
    /// Filter, move limit and stopping rules shared by every item.
    pub base: TopoParams,
}

impl SweepGrid {
    /// Parameter combinations in deterministic order (λ outermost, n_seg innermost).
    pub fn combinations(&self) -> Result<Vec<TopoParams>, TopoError> {
        if self.lambdas.is_empty() {
            return Err(TopoError::EmptyGrid("lambdas"));
        }
        if self.volume_fractions.is_empty() {
            return Err(TopoError::EmptyGrid("volume_fractions"));
        }
        if self.normal_shear_ratios.is_empty() {
            return Err(TopoError::EmptyGrid("normal_shear_ratios"));
        }
        if self.n_segs.is_empty() {
            return Err(TopoError::EmptyGrid("n_segs"));
        }
        let mut out = Vec::new();
        for &lambda_sim in &self.lambdas {
            for &volume_fraction in &self.volume_fractions {
                for &normal_shear_ratio in &self.normal_shear_ratios {
                    for &n_seg in &self.n_segs {
                        out.push(TopoParams { lambda_sim, volume_fraction, normal_shear_ratio, n_seg, ..self.base.clone() });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepItem {
    pub reference_id: String,
    pub params: TopoParams,
    pub result: Result<(DensityField, ConvergenceTrace), TopoError>,
}

/// Optimizes every (reference, parameter combination) pair. Per-item failures
/// are recorded and the sweep continues.
pub fn sweep_designs(
    grid: &SweepGrid,
    references: &[ReferenceDesign],
    setup: &SegmentSetup,
    template: &RimTemplate,
    raster_size: usize,
) -> Result<Vec<SweepItem>, TopoError> {
    let combos = grid.combinations()?;
    if references.is_empty() {
        return Err(TopoError::EmptyGrid("references"));
    }
    let model = setup.model();
    let passive = setup.passive();
    let mut items = Vec::with_capacity(references.len() * combos.len());
    for reference in references {
        for params in &combos {
            let loads = setup.loads(params.normal_shear_ratio);
            let result = optimize_segment(params, reference, &model, &loads, Some(&passive)).map(|opt| {
                let wheel_raster = replicate_segment(&opt.densities, setup.nx, setup.ny, params.n_seg, raster_size, template);
                (
                    DensityField { segment: opt.densities, nx: setup.nx, ny: setup.ny, n_seg: params.n_seg, wheel_raster },
                    opt.trace,
                )
            });
            items.push(SweepItem { reference_id: reference.source_id.clone(), params: params.clone(), result });
        }
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subgradient_cases() {
        assert_eq!(similarity_subgradient(&[0.2, 0.7], &[0.2, 0.7], 3.0), vec![0.0, 0.0]);
        assert!(similarity_subgradient(&[0.1, 0.9], &[0.5, 0.5], 0.0).iter().all(|&v| v == 0.0));
        assert_eq!(similarity_subgradient(&[0.8, 0.2], &[0.5, 0.5], 2.0), vec![2.0, -2.0]);
    }

    #[test]
    fn uniform_sensitivities_are_stationary() {
        let x = vec![0.4; 32];
        let dc = vec![-1.3; 32];
        let next = oc_update(&x, &dc, &vec![1.0; 32], &OcStep::new(0.4, 0.2)).unwrap();
        for v in next {
            assert!((v - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn dominant_element_hits_move_limit() {
        let x = vec![0.5; 10];
        let mut dc = vec![-1.0; 10];
        dc[3] = -100.0;
        let next = oc_update(&x, &dc, &vec![1.0; 10], &OcStep::new(0.5, 0.2)).unwrap();
        assert_eq!(next[3], 0.7);
        assert!((next.iter().sum::<f64>() / 10.0 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_volume_fails_bisection() {
        // every element can move at most 0.1 from 0.2, so mean 0.9 is unreachable
        let x = vec![0.2; 8];
        let err = oc_update(&x, &vec![-1.0; 8], &vec![1.0; 8], &OcStep::new(0.9, 0.1)).unwrap_err();
        assert!(matches!(err, TopoError::BisectionFailure { .. }));
    }

    #[test]
    fn prox_update_lands_on_reference_for_large_lambda() {
        assert_eq!(prox_update(0.3, 1e9 + 1.0, 1.0 - 1e9, 1e9, 0.6, 0.0, 1.0), 0.6);
        // λ = 0 reduces to the OC fixed point
        assert!((prox_update(0.25, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn filter_preserves_uniform_fields() {
        let f = SensitivityFilter::new(6, 4, 1.5);
        let out = f.apply(&vec![0.5; 24], &vec![-2.0; 24]);
        assert!(out.iter().all(|v| (v + 2.0).abs() < 1e-12));
    }

    #[test]
    fn polar_replication_is_periodic() {
        let seg: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let p = polar_replicate(&seg, 4, 3, 5);
        for r in 0..3 {
            for k in 0..p.n_angular {
                assert_eq!(p.get(r, k), p.get(r, k + 4));
            }
        }
    }

    #[test]
    fn empty_axis_is_rejected() {
        let grid = SweepGrid {
            lambdas: vec![],
            volume_fractions: vec![0.5],
            normal_shear_ratios: vec![1.0],
            n_segs: vec![5],
            base: TopoParams::default(),
        };
        assert_eq!(grid.combinations().unwrap_err(), TopoError::EmptyGrid("lambdas"));
    }

    #[test]
    fn setup_loads_follow_ratio() {
        let setup = SegmentSetup::default();
        let loads = setup.loads(2.0);
        let fx: f64 = loads.nodal_forces.iter().filter(|(d, _)| *d % 2 == 0).map(|(_, f)| f).sum();
        let fy: f64 = loads.nodal_forces.iter().filter(|(d, _)| *d % 2 == 1).map(|(_, f)| f).sum();
        assert!((fy.abs() / fx - 2.0).abs() < 1e-12);
        assert!(((fx * fx + fy * fy).sqrt() - 1.0).abs() < 1e-12);
    }
}
