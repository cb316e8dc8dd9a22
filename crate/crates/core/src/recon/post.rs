//! Mesh clean-up: largest component, Taubin smoothing, quadric decimation
//! and removal of near-zero-area triangles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::ReconError;
use crate::mesh::{add, cross, dot, norm, normalize, scale, sub, TriMesh, Vec3};

/// Triangles below this area (mm²) are collapsed away.
pub const DEGENERATE_AREA: f64 = 1e-6;

const TAUBIN_LAMBDA: f64 = 0.5;
const TAUBIN_MU: f64 = -0.53;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PostprocessReport {
    pub components_removed: usize,
    pub triangles_before: usize,
    pub triangles_after: usize,
    /// Signed volume after the component filter.
    pub volume_before: f64,
    pub volume_after: f64,
}

impl PostprocessReport {
    /// Relative volume change caused by smoothing and decimation.
    pub fn volume_change(&self) -> f64 {
        if self.volume_before == 0.0 {
            0.0
        } else {
            (self.volume_after - self.volume_before).abs() / self.volume_before.abs()
        }
    }
}

pub fn postprocess(mesh: &TriMesh, smooth_iters: usize, target_triangles: usize) -> Result<TriMesh, ReconError> {
    postprocess_with_report(mesh, smooth_iters, target_triangles).map(|(m, _)| m)
}

/// Keeps the largest connected component, applies `smooth_iters` rounds of
/// Taubin smoothing, decimates to at most `target_triangles` and collapses
/// degenerate triangles. A closed input that stops being closed is an error.
pub fn postprocess_with_report(
    mesh: &TriMesh,
    smooth_iters: usize,
    target_triangles: usize,
) -> Result<(TriMesh, PostprocessReport), ReconError> {
    if mesh.is_empty() {
        return Err(ReconError::DegenerateMesh("empty mesh".into()));
    }
    let comps = mesh.components();
    let mut m = if comps.len() == 1 { mesh.clone() } else { mesh.with_triangles(&comps[0]) };
    m.refresh_topology();
    let was_closed = m.watertight;
    let mut report = PostprocessReport {
        components_removed: comps.len() - 1,
        triangles_before: m.triangles.len(),
        volume_before: m.signed_volume(),
        ..Default::default()
    };

    if smooth_iters > 0 {
        taubin_smooth(&mut m, smooth_iters);
    }
    let has_degenerate = (0..m.triangles.len()).any(|t| m.triangle_area(t) < DEGENERATE_AREA);
    if m.triangles.len() > target_triangles || has_degenerate {
        let mut dec = Decimator::new(&m);
        if m.triangles.len() > target_triangles {
            dec.decimate(target_triangles);
        }
        dec.remove_degenerate();
        m = dec.into_mesh();
        if m.triangles.len() > target_triangles {
            return Err(ReconError::DegenerateMesh(format!(
                "decimation stalled at {} triangles (target {target_triangles})",
                m.triangles.len()
            )));
        }
        if let Some(t) = (0..m.triangles.len()).find(|&t| m.triangle_area(t) < DEGENERATE_AREA) {
            return Err(ReconError::DegenerateMesh(format!("triangle {t} has near-zero area")));
        }
    }
    m.refresh_topology();
    if was_closed && !m.watertight {
        let s = m.edge_stats();
        return Err(ReconError::DegenerateMesh(format!(
            "{} boundary and {} non-manifold edges after clean-up",
            s.boundary, s.non_manifold
        )));
    }
    report.triangles_after = m.triangles.len();
    report.volume_after = m.signed_volume();
    Ok((m, report))
}

fn vertex_neighbours(m: &TriMesh) -> Vec<Vec<u32>> {
    let mut nb: Vec<Vec<u32>> = vec![Vec::new(); m.vertices.len()];
    for t in &m.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            nb[a as usize].push(b);
            nb[b as usize].push(a);
        }
    }
    for list in &mut nb {
        list.sort_unstable();
        list.dedup();
    }
    nb
}

/// Uniform-weight Taubin smoothing (alternating shrink and inflate steps).
pub fn taubin_smooth(m: &mut TriMesh, iters: usize) {
    let nb = vertex_neighbours(m);
    let mut next = m.vertices.clone();
    for _ in 0..iters {
        for factor in [TAUBIN_LAMBDA, TAUBIN_MU] {
            for (v, list) in nb.iter().enumerate() {
                if list.is_empty() {
                    continue;
                }
                let mut c = [0.0; 3];
                for &u in list {
                    c = add(c, m.vertices[u as usize]);
                }
                let lap = sub(scale(c, 1.0 / list.len() as f64), m.vertices[v]);
                next[v] = add(m.vertices[v], scale(lap, factor));
            }
            std::mem::swap(&mut m.vertices, &mut next);
        }
    }
}

/// Symmetric 4x4 error quadric, upper triangle row by row.
type Quadric = [f64; 10];

fn plane_quadric(n: Vec3, d: f64, w: f64) -> Quadric {
    let [a, b, c] = n;
    [a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d].map(|x| x * w)
}

fn quadric_error(q: &Quadric, p: Vec3) -> f64 {
    let [x, y, z] = p;
    q[0] * x * x + 2.0 * q[1] * x * y + 2.0 * q[2] * x * z + 2.0 * q[3] * x + q[4] * y * y + 2.0 * q[5] * y * z
        + 2.0 * q[6] * y
        + q[7] * z * z
        + 2.0 * q[8] * z
        + q[9]
}

/// Minimizer of the quadric when well conditioned.
fn quadric_optimum(q: &Quadric) -> Option<Vec3> {
    let a = [[q[0], q[1], q[2]], [q[1], q[4], q[5]], [q[2], q[5], q[7]]];
    let b = [-q[3], -q[6], -q[8]];
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let scale = (q[0] + q[4] + q[7]).powi(3);
    if !(det.abs() > 1e-10 * scale) {
        return None;
    }
    let col = |k: usize| -> f64 {
        let mut m = a;
        for r in 0..3 {
            m[r][k] = b[r];
        }
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    Some([col(0) / det, col(1) / det, col(2) / det])
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    va: u32,
    vb: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // reversed so the max-heap pops the cheapest collapse
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.a.cmp(&self.a)).then(other.b.cmp(&self.b))
    }
}

struct Decimator {
    pos: Vec<Vec3>,
    tris: Vec<[u32; 3]>,
    alive: Vec<bool>,
    vtris: Vec<Vec<u32>>,
    quadric: Vec<Quadric>,
    version: Vec<u32>,
    removed: Vec<bool>,
    n_alive: usize,
}

impl Decimator {
    fn new(m: &TriMesh) -> Self {
        let nv = m.vertices.len();
        let mut vtris = vec![Vec::new(); nv];
        let mut quadric = vec![[0.0; 10]; nv];
        for (t, tri) in m.triangles.iter().enumerate() {
            let [p0, p1, p2] = m.triangle(t);
            let nrm = cross(sub(p1, p0), sub(p2, p0));
            let area = 0.5 * norm(nrm);
            let n = normalize(nrm);
            let q = plane_quadric(n, -dot(n, p0), area);
            for &v in tri {
                vtris[v as usize].push(t as u32);
                for k in 0..10 {
                    quadric[v as usize][k] += q[k];
                }
            }
        }
        Self {
            pos: m.vertices.clone(),
            tris: m.triangles.clone(),
            alive: vec![true; m.triangles.len()],
            vtris,
            quadric,
            version: vec![0; nv],
            removed: vec![false; nv],
            n_alive: m.triangles.len(),
        }
    }

    fn live_tris(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.vtris[v as usize].iter().copied().filter(|&t| self.alive[t as usize])
    }

    fn neighbours(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.live_tris(v).flat_map(|t| self.tris[t as usize]).filter(|&u| u != v).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn placement(&self, a: u32, b: u32) -> (Vec3, f64) {
        let mut q = self.quadric[a as usize];
        for k in 0..10 {
            q[k] += self.quadric[b as usize][k];
        }
        let (pa, pb) = (self.pos[a as usize], self.pos[b as usize]);
        let mut best = (pa, quadric_error(&q, pa));
        let mid = scale(add(pa, pb), 0.5);
        for p in [pb, mid].into_iter().chain(quadric_optimum(&q)) {
            // keep the optimum near the edge so slivers do not shoot off
            if norm(sub(p, mid)) > norm(sub(pa, pb)) {
                continue;
            }
            let e = quadric_error(&q, p);
            if e < best.1 {
                best = (p, e);
            }
        }
        (best.0, best.1.max(0.0))
    }

    fn candidate(&self, a: u32, b: u32) -> Candidate {
        let (a, b) = (a.min(b), a.max(b));
        let (_, cost) = self.placement(a, b);
        Candidate { cost, a, b, va: self.version[a as usize], vb: self.version[b as usize] }
    }

    /// Checks that collapsing `b` into `a` at `p` keeps a closed 2-manifold
    /// and flips no triangle.
    fn valid(&self, a: u32, b: u32, p: Vec3, check_normals: bool) -> bool {
        if self.n_alive <= 4 {
            return false;
        }
        let shared: Vec<u32> = self.live_tris(a).filter(|&t| self.tris[t as usize].contains(&b)).collect();
        if shared.len() != 2 {
            return false;
        }
        let (na, nb) = (self.neighbours(a), self.neighbours(b));
        let common = na.iter().filter(|v| nb.binary_search(v).is_ok()).count();
        if common != 2 {
            return false;
        }
        for v in [a, b] {
            for t in self.live_tris(v) {
                let tri = self.tris[t as usize];
                if tri.contains(&a) && tri.contains(&b) {
                    continue;
                }
                let old = tri.map(|u| self.pos[u as usize]);
                let new = tri.map(|u| if u == a || u == b { p } else { self.pos[u as usize] });
                let n_new = cross(sub(new[1], new[0]), sub(new[2], new[0]));
                if check_normals {
                    let n_old = cross(sub(old[1], old[0]), sub(old[2], old[0]));
                    if 0.5 * norm(n_new) < DEGENERATE_AREA || dot(normalize(n_old), normalize(n_new)) < 0.2 {
                        return false;
                    }
                } else if 0.5 * norm(n_new) < DEGENERATE_AREA && !is_degenerate(&old) {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, a: u32, b: u32, p: Vec3) {
        for t in self.vtris[b as usize].clone() {
            if !self.alive[t as usize] {
                continue;
            }
            let tri = &mut self.tris[t as usize];
            if tri.contains(&a) {
                self.alive[t as usize] = false;
                self.n_alive -= 1;
            } else {
                for u in tri.iter_mut() {
                    if *u == b {
                        *u = a;
                    }
                }
                self.vtris[a as usize].push(t);
            }
        }
        self.vtris[b as usize].clear();
        let alive = &self.alive;
        self.vtris[a as usize].retain(|&t| alive[t as usize]);
        for k in 0..10 {
            self.quadric[a as usize][k] += self.quadric[b as usize][k];
        }
        self.pos[a as usize] = p;
        self.removed[b as usize] = true;
        self.version[a as usize] += 1;
        self.version[b as usize] += 1;
    }

    fn decimate(&mut self, target: usize) {
        let mut heap = BinaryHeap::new();
        for t in 0..self.tris.len() {
            let tri = self.tris[t];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if a < b {
                    heap.push(self.candidate(a, b));
                }
            }
        }
        while self.n_alive > target {
            let Some(c) = heap.pop() else { break };
            let (a, b) = (c.a, c.b);
            if self.removed[a as usize]
                || self.removed[b as usize]
                || self.version[a as usize] != c.va
                || self.version[b as usize] != c.vb
            {
                continue;
            }
            let (p, _) = self.placement(a, b);
            if !self.valid(a, b, p, true) {
                continue;
            }
            self.collapse(a, b, p);
            for n in self.neighbours(a) {
                heap.push(self.candidate(a, n));
            }
        }
    }

    fn remove_degenerate(&mut self) {
        loop {
            let mut progress = false;
            for t in 0..self.tris.len() {
                if !self.alive[t] {
                    continue;
                }
                let tri = self.tris[t];
                let pts = tri.map(|u| self.pos[u as usize]);
                if !is_degenerate(&pts) {
                    continue;
                }
                // try edges from shortest to longest
                let mut edges: Vec<(f64, u32, u32)> =
                    (0..3).map(|k| (norm(sub(pts[k], pts[(k + 1) % 3])), tri[k], tri[(k + 1) % 3])).collect();
                edges.sort_by(|x, y| x.0.total_cmp(&y.0));
                for (_, a, b) in edges {
                    let (a, b) = (a.min(b), a.max(b));
                    let p = scale(add(self.pos[a as usize], self.pos[b as usize]), 0.5);
                    if self.valid(a, b, p, false) {
                        self.collapse(a, b, p);
                        progress = true;
                        break;
                    }
                }
            }
            if !progress {
                break;
            }
        }
    }

    fn into_mesh(self) -> TriMesh {
        let triangles = self.tris.iter().zip(&self.alive).filter(|(_, &ok)| ok).map(|(t, _)| *t).collect();
        let mut m = TriMesh { vertices: self.pos, triangles, watertight: false, euler_characteristic: 0 };
        m.compact();
        m.refresh_topology();
        m
    }
}

fn is_degenerate(p: &[Vec3; 3]) -> bool {
    0.5 * norm(cross(sub(p[1], p[0]), sub(p[2], p[0]))) < DEGENERATE_AREA
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_mesh, sphere_mesh};

    #[test]
    fn smooth_sphere_is_left_alone() {
        let m = sphere_mesh([0.0; 3], 1.0, 3);
        let out = postprocess(&m, 0, m.triangles.len()).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn small_artifact_is_dropped() {
        let s = sphere_mesh([0.0; 3], 1.0, 3);
        let b = box_mesh([3.0; 3], [3.1; 3]);
        let off = s.vertices.len() as u32;
        let mut v = s.vertices.clone();
        v.extend(&b.vertices);
        let mut t = s.triangles.clone();
        t.extend(b.triangles.iter().map(|t| t.map(|i| i + off)));
        let (out, rep) = postprocess_with_report(&TriMesh::new(v, t), 0, usize::MAX).unwrap();
        assert_eq!(rep.components_removed, 1);
        assert_eq!(out.triangles.len(), s.triangles.len());
        assert!(out.watertight);
    }

    #[test]
    fn decimation_keeps_sphere_closed() {
        let m = sphere_mesh([0.0; 3], 1.0, 5);
        let (out, rep) = postprocess_with_report(&m, 0, 2000).unwrap();
        assert!(out.triangles.len() <= 2000);
        assert!(out.watertight);
        assert_eq!(out.euler_characteristic, 2);
        assert!(rep.volume_change() < 0.02);
    }

    #[test]
    fn taubin_limits_shrinkage() {
        let mut m = sphere_mesh([0.0; 3], 1.0, 4);
        let v0 = m.signed_volume();
        taubin_smooth(&mut m, 10);
        assert!((m.signed_volume() - v0).abs() / v0 < 0.02);
    }

    #[test]
    fn quadric_optimum_recovers_corner() {
        // three orthogonal planes through (1, 2, 3)
        let mut q = [0.0; 10];
        for (n, d) in [([1.0, 0.0, 0.0], -1.0), ([0.0, 1.0, 0.0], -2.0), ([0.0, 0.0, 1.0], -3.0)] {
            let p = plane_quadric(n, d, 1.0);
            for k in 0..10 {
                q[k] += p[k];
            }
        }
        let x = quadric_optimum(&q).unwrap();
        assert!(norm(sub(x, [1.0, 2.0, 3.0])) < 1e-12);
        assert!(quadric_error(&q, x).abs() < 1e-12);
    }
}
