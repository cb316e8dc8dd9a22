//! Depth-prediction errors and mesh similarity (volumetric IoU, Chamfer).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::depthsynth::DepthMap;
use crate::mesh::{add, scale, sub, TriMesh, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("maps are {0:?} and {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("no pixel is valid in both maps")]
    NoOverlap,
    #[error("ground truth depth {0} is not positive")]
    NonPositiveGroundTruth(f64),
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("neither mesh occupies any voxel")]
    EmptyVolume,
    #[error("mesh has no surface area")]
    EmptyMesh,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthErrorReport {
    pub rmse: f64,
    pub absrel: f64,
    pub delta_125: f64,
    pub valid_pixels: usize,
}

/// RMSE, mean absolute relative error and the fraction of pixels with
/// `max(p/g, g/p) < 1.25`, over pixels valid in both maps.
pub fn depth_errors(pred: &DepthMap, gt: &DepthMap) -> Result<DepthErrorReport, MetricsError> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(MetricsError::DimensionMismatch((pred.width, pred.height), (gt.width, gt.height)));
    }
    let (mut sq, mut rel, mut good, mut m) = (0.0, 0.0, 0usize, 0usize);
    for i in 0..gt.values.len() {
        if !(pred.valid[i] && gt.valid[i]) {
            continue;
        }
        let (p, g) = (pred.values[i], gt.values[i]);
        if g <= 0.0 {
            return Err(MetricsError::NonPositiveGroundTruth(g));
        }
        sq += (p - g) * (p - g);
        rel += (p - g).abs() / g;
        if (p / g).max(g / p) < 1.25 {
            good += 1;
        }
        m += 1;
    }
    if m == 0 {
        return Err(MetricsError::NoOverlap);
    }
    Ok(DepthErrorReport {
        rmse: (sq / m as f64).sqrt(),
        absrel: rel / m as f64,
        delta_125: good as f64 / m as f64,
        valid_pixels: m,
    })
}

/// Intersection over union of the solid voxelizations of both meshes on one
/// lattice anchored at the minimum of their joint bounding box.
pub fn mesh_iou(pred: &TriMesh, gt: &TriMesh, voxel_size: f64) -> Result<f64, MetricsError> {
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(MetricsError::InvalidParams("voxel size must be positive".into()));
    }
    if !pred.watertight || !gt.watertight {
        return Err(MetricsError::NotWatertight);
    }
    let (Some((alo, ahi)), Some((blo, bhi))) = (pred.bounding_box(), gt.bounding_box()) else {
        return Err(MetricsError::EmptyVolume);
    };
    let lo: Vec3 = std::array::from_fn(|a| alo[a].min(blo[a]));
    let hi: Vec3 = std::array::from_fn(|a| ahi[a].max(bhi[a]));
    let dims: [usize; 3] = std::array::from_fn(|a| (((hi[a] - lo[a]) / voxel_size) - 1e-9).ceil().max(1.0) as usize);
    let va = pred.solid_voxels(lo, dims, voxel_size);
    let vb = gt.solid_voxels(lo, dims, voxel_size);
    let inter = va.iter().zip(&vb).filter(|(a, b)| **a && **b).count();
    let union = va.iter().zip(&vb).filter(|(a, b)| **a || **b).count();
    if union == 0 {
        return Err(MetricsError::EmptyVolume);
    }
    Ok(inter as f64 / union as f64)
}

/// Area-weighted uniform samples on the surface.
pub fn sample_surface(mesh: &TriMesh, n_points: usize, seed: u64) -> Result<Vec<Vec3>, MetricsError> {
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MetricsError::EmptyMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_points)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let t = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
            let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
            if r1 + r2 > 1.0 {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            let [a, b, c] = mesh.triangle(t);
            add(a, add(scale(sub(b, a), r1), scale(sub(c, a), r2)))
        })
        .collect())
}

/// Static k-d tree for exact nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    nodes: Vec<KdNode>,
}

#[derive(Debug, Clone, Copy)]
struct KdNode {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

fn d2(a: Vec3, b: Vec3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

impl KdTree {
    pub fn new(points: Vec<Vec3>) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut tree = Self { points, nodes: Vec::with_capacity(idx.len()) };
        tree.build(&mut idx, 0);
        tree
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> Option<usize> {
        if idx.is_empty() {
            return None;
        }
        let axis = depth % 3;
        let mid = idx.len() / 2;
        let pts = &self.points;
        idx.select_nth_unstable_by(mid, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b)));
        let id = self.nodes.len();
        self.nodes.push(KdNode { point: idx[mid], axis, left: None, right: None });
        let (lo, rest) = idx.split_at_mut(mid);
        let left = self.build(lo, depth + 1);
        let right = self.build(&mut rest[1..], depth + 1);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        Some(id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance to the nearest stored point.
    pub fn nearest_d2(&self, q: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        if !self.nodes.is_empty() {
            self.search(0, q, &mut best);
        }
        best
    }

    fn search(&self, node: usize, q: Vec3, best: &mut f64) {
        let n = self.nodes[node];
        let p = self.points[n.point];
        *best = best.min(d2(p, q));
        let diff = q[n.axis] - p[n.axis];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        if let Some(c) = near {
            self.search(c, q, best);
        }
        if diff * diff < *best {
            if let Some(c) = far {
                self.search(c, q, best);
            }
        }
    }
}

/// Symmetric sum of mean squared nearest-neighbour distances.
pub fn chamfer_points(p: &[Vec3], q: &[Vec3]) -> Result<f64, MetricsError> {
    if p.is_empty() || q.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    let one_way = |a: &[Vec3], b: &[Vec3]| {
        let tree = KdTree::new(b.to_vec());
        a.iter().map(|x| tree.nearest_d2(*x)).sum::<f64>() / a.len() as f64
    };
    Ok(one_way(p, q) + one_way(q, p))
}

/// Chamfer distance between `n_points` surface samples of each mesh, both
/// drawn with the same seed.
pub fn chamfer(pred: &TriMesh, gt: &TriMesh, n_points: usize, seed: u64) -> Result<f64, MetricsError> {
    if n_points < 100 {
        return Err(MetricsError::InvalidParams("at least 100 sample points are required".into()));
    }
    chamfer_points(&sample_surface(pred, n_points, seed)?, &sample_surface(gt, n_points, seed)?)
}
