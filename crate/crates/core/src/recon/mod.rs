//! Depth map to watertight wheel mesh.
//!
//! Spokes come from back-projecting the depth map and extruding it into a
//! solid; the rim barrel, flanges and hub mounting face come from a surface
//! of revolution built from the rim template. Both are splatted onto one
//! occupancy grid, blurred, and meshed with marching cubes at level 0.5,
//! then cleaned up by [`postprocess`].

mod mc;
mod post;

use std::f64::consts::PI;

use thiserror::Error;

use crate::depthsynth::DepthMap;
use crate::mesh::{TriMesh, Vec3};
use crate::wheel::{RimTemplate, TemplateError, WheelLayout};

pub use mc::marching_cubes;
pub use post::{postprocess, postprocess_with_report, PostprocessReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("depth map has no valid pixels in the spoke region")]
    EmptyMask,
    #[error("field does not cross the iso level")]
    NoSurface,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("mesh lost manifoldness: {0}")]
    DegenerateMesh(String),
    #[error("mesh is not watertight ({boundary} boundary, {non_manifold} non-manifold edges)")]
    NotWatertight { boundary: usize, non_manifold: usize },
    #[error("mesh diameter {diameter:.1} mm is off the rim diameter {expected:.1} mm by more than {tolerance}")]
    ScaleMismatch { diameter: f64, expected: f64, tolerance: f64 },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceTag {
    Spoke,
    RimOuter,
    RimInner,
    Flange,
    Disc,
}

impl SourceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Spoke => "spoke",
            SourceTag::RimOuter => "rim_outer",
            SourceTag::RimInner => "rim_inner",
            SourceTag::Flange => "flange",
            SourceTag::Disc => "disc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub source_tag: SourceTag,
}

/// Scalar field sampled at grid nodes `origin + (i, j, k) * voxel_size`,
/// stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub origin: Vec3,
    pub field: Vec<f64>,
}

impl VoxelGrid {
    pub fn from_fn(dims: [usize; 3], voxel_size: f64, origin: Vec3, f: impl Fn(Vec3) -> f64) -> Self {
        let mut field = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    field.push(f([
                        origin[0] + i as f64 * voxel_size,
                        origin[1] + j as f64 * voxel_size,
                        origin[2] + k as f64 * voxel_size,
                    ]));
                }
            }
        }
        Self { dims, voxel_size, origin, field }
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.origin[0] + i as f64 * self.voxel_size,
            self.origin[1] + j as f64 * self.voxel_size,
            self.origin[2] + k as f64 * self.voxel_size,
        ]
    }

    /// Centre of the grid in world coordinates.
    pub fn center(&self) -> Vec3 {
        std::array::from_fn(|a| self.origin[a] + (self.dims[a] - 1) as f64 * self.voxel_size / 2.0)
    }
}

/// Back-projects every valid pixel inside the barrel's inner radius to
/// `(x, y, depth)` in mm, with y pointing up.
pub fn spoke_to_points(d: &DepthMap, template: &RimTemplate) -> Result<PointCloud, ReconError> {
    let layout = WheelLayout { raster_size: d.width, mm_per_pixel: d.mm_per_pixel };
    let r_max = template.barrel_inner_radius();
    let mut points = Vec::new();
    for py in 0..d.height {
        for px in 0..d.width {
            if let Some(z) = d.get(px, py) {
                let (x, y) = layout.pixel_to_mm(px, py);
                if (x * x + y * y).sqrt() <= r_max {
                    points.push([x, y, z]);
                }
            }
        }
    }
    if points.is_empty() {
        return Err(ReconError::EmptyMask);
    }
    Ok(PointCloud { points, source_tag: SourceTag::Spoke })
}

/// Fills the spoke solid behind the visible surface with points spaced at
/// most `spacing` apart. Hub pixels extend back to the mounting face, spoke
/// pixels by the template's spoke thickness.
pub fn spoke_volume_points(d: &DepthMap, template: &RimTemplate, spacing: f64) -> Result<PointCloud, ReconError> {
    let surface = spoke_to_points(d, template)?;
    let sub = (d.mm_per_pixel / spacing).ceil().max(1.0) as usize;
    let mut points = Vec::new();
    for p in &surface.points {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let back = if r <= template.disc_radius() { template.mounting_face_depth() } else { p[2] + template.spoke_thickness };
        let n_z = ((back - p[2]) / spacing).ceil().max(1.0) as usize;
        for a in 0..sub {
            for b in 0..sub {
                let x = p[0] + ((a as f64 + 0.5) / sub as f64 - 0.5) * d.mm_per_pixel;
                let y = p[1] + ((b as f64 + 0.5) / sub as f64 - 0.5) * d.mm_per_pixel;
                for k in 0..=n_z {
                    points.push([x, y, p[2] + (back - p[2]) * k as f64 / n_z as f64]);
                }
            }
        }
    }
    Ok(PointCloud { points, source_tag: SourceTag::Spoke })
}

/// Surface-of-revolution samples of the rim: barrel outer surface, barrel
/// wall, flanges and the hub mounting face. Every ring has `angular_samples`
/// points starting on +x; `axial_samples` sets the spacing across the rim
/// width, which also sets the radial layer spacing.
pub fn rim_reference_points(
    template: &RimTemplate,
    angular_samples: usize,
    axial_samples: usize,
) -> Result<Vec<PointCloud>, ReconError> {
    template.validate()?;
    if angular_samples < 4 || axial_samples < 2 {
        return Err(ReconError::InvalidParams(format!(
            "need at least 4 angular and 2 axial samples, got {angular_samples} and {axial_samples}"
        )));
    }
    let ring = |r: f64, z: f64, out: &mut Vec<Vec3>| {
        for k in 0..angular_samples {
            let a = 2.0 * PI * k as f64 / angular_samples as f64;
            out.push([r * a.cos(), r * a.sin(), z]);
        }
    };
    let z0 = template.rim_face_depth();
    let z1 = z0 + template.rim_width;
    let dz = template.rim_width / (axial_samples - 1) as f64;
    let zs: Vec<f64> = (0..axial_samples).map(|i| z0 + i as f64 * dz).collect();
    let big_r = template.rim_radius();
    let layers = |from: f64, to: f64| -> Vec<f64> {
        let n = ((to - from) / dz).ceil().max(1.0) as usize;
        (0..n).map(|i| from + (to - from) * i as f64 / n as f64).collect()
    };

    let mut outer = Vec::new();
    for &z in &zs {
        ring(big_r, z, &mut outer);
    }
    let mut inner = Vec::new();
    for r in layers(template.barrel_inner_radius(), big_r) {
        for &z in &zs {
            ring(r, z, &mut inner);
        }
    }
    let mut flange = Vec::new();
    if template.flange_height > 0.0 {
        let thickness = template.barrel_thickness.min(template.rim_width / 4.0);
        let mut radii = layers(big_r, big_r + template.flange_height);
        radii.remove(0);
        radii.push(big_r + template.flange_height);
        for r in radii {
            for z in layers(z0, z0 + thickness).into_iter().chain([z0 + thickness]) {
                ring(r, z, &mut flange);
            }
            for z in layers(z1 - thickness, z1).into_iter().chain([z1]) {
                ring(r, z, &mut flange);
            }
        }
    }
    let mut disc = Vec::new();
    let zm = template.mounting_face_depth();
    for r in layers(template.bore_radius(), template.disc_radius()).into_iter().chain([template.disc_radius()]) {
        for k in 0..angular_samples {
            let a = 2.0 * PI * k as f64 / angular_samples as f64;
            let (x, y) = (r * a.cos(), r * a.sin());
            if !template.in_bolt_hole(x, y) {
                disc.push([x, y, zm]);
            }
        }
    }
    Ok(vec![
        PointCloud { points: outer, source_tag: SourceTag::RimOuter },
        PointCloud { points: inner, source_tag: SourceTag::RimInner },
        PointCloud { points: flange, source_tag: SourceTag::Flange },
        PointCloud { points: disc, source_tag: SourceTag::Disc },
    ])
}

/// Nodes of empty space kept around the splatted points.
const PAD: usize = 3;

/// Splats all points onto the nearest node of a grid centred on their
/// common centroid, then applies a separable `[1, 2, 1] / 4` blur. Values
/// are in `[0, 1]`; occupied interiors stay at 1.
pub fn fuse_to_grid(clouds: &[PointCloud], voxel_size: f64) -> Result<VoxelGrid, ReconError> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(ReconError::InvalidParams(format!("voxel size {voxel_size}")));
    }
    let all = || clouds.iter().flat_map(|c| c.points.iter());
    let n = all().count();
    if n == 0 {
        return Err(ReconError::EmptyMask);
    }
    let mut c = [0.0; 3];
    for p in all() {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    let c = c.map(|v| v / n as f64);
    let mut half = [0usize; 3];
    for p in all() {
        for a in 0..3 {
            half[a] = half[a].max(((p[a] - c[a]).abs() / voxel_size).ceil() as usize);
        }
    }
    let half = half.map(|h| h + PAD);
    let dims = half.map(|h| 2 * h + 1);
    let origin: Vec3 = std::array::from_fn(|a| c[a] - half[a] as f64 * voxel_size);
    let mut grid = VoxelGrid { dims, voxel_size, origin, field: vec![0.0; dims[0] * dims[1] * dims[2]] };
    for p in all() {
        let idx: [usize; 3] = std::array::from_fn(|a| ((p[a] - origin[a]) / voxel_size).round() as usize);
        let i = grid.index(idx[0], idx[1], idx[2]);
        grid.field[i] = 1.0;
    }
    blur_121(&mut grid);
    Ok(grid)
}

fn blur_121(grid: &mut VoxelGrid) {
    let dims = grid.dims;
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut tmp = vec![0.0; grid.field.len()];
    for axis in 0..3 {
        let (s, len) = (strides[axis], dims[axis]);
        for (i, out) in tmp.iter_mut().enumerate() {
            let pos = (i / s) % len;
            let left = if pos > 0 { grid.field[i - s] } else { 0.0 };
            let right = if pos + 1 < len { grid.field[i + s] } else { 0.0 };
            *out = 0.25 * left + 0.5 * grid.field[i] + 0.25 * right;
        }
        std::mem::swap(&mut grid.field, &mut tmp);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub voxel_size: f64,
    pub iso: f64,
    pub smooth_iters: usize,
    pub target_triangles: usize,
    /// Allowed relative deviation of the mesh diameter from the rim diameter.
    pub scale_tolerance: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self { voxel_size: 3.0, iso: 0.5, smooth_iters: 10, target_triangles: 50_000, scale_tolerance: 0.05 }
    }
}

/// Twice the largest distance of a vertex from the wheel axis.
pub fn radial_diameter(mesh: &TriMesh) -> f64 {
    2.0 * mesh.vertices.iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt()).fold(0.0, f64::max)
}

/// Full reconstruction of one wheel from its depth map.
pub fn reconstruct_wheel(d: &DepthMap, template: &RimTemplate, cfg: &ReconConfig) -> Result<TriMesh, ReconError> {
    template.validate()?;
    let h = cfg.voxel_size;
    if !(h > 0.0) {
        return Err(ReconError::InvalidParams(format!("voxel size {h}")));
    }
    let spacing = h / 2.0;
    let outer = template.rim_radius() + template.flange_height;
    let angular = (2.0 * PI * outer / spacing).ceil() as usize;
    let axial = (template.rim_width / spacing).ceil() as usize + 1;
    let mut clouds = vec![spoke_volume_points(d, template, spacing)?];
    clouds.extend(rim_reference_points(template, angular, axial)?);
    let grid = fuse_to_grid(&clouds, h)?;
    let raw = marching_cubes(&grid, cfg.iso)?;
    let mesh = postprocess(&raw, cfg.smooth_iters, cfg.target_triangles)?;
    if !mesh.watertight {
        let s = mesh.edge_stats();
        return Err(ReconError::NotWatertight { boundary: s.boundary, non_manifold: s.non_manifold });
    }
    let diameter = radial_diameter(&mesh);
    if (diameter - template.rim_diameter).abs() > cfg.scale_tolerance * template.rim_diameter {
        return Err(ReconError::ScaleMismatch {
            diameter,
            expected: template.rim_diameter,
            tolerance: cfg.scale_tolerance,
        });
    }
    Ok(mesh)
}
