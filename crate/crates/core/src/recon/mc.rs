//! Marching cubes with face-consistent ambiguity resolution.
//!
//! Each cube's surface is built from per-face crossing segments. Faces with
//! alternating corners are resolved with the asymptotic decider, so two
//! cubes sharing a face always agree on its segments. Segments are chained
//! into loops; a three-edge loop becomes one triangle and longer loops are
//! fanned around an added centre vertex, so no diagonal is ever shared
//! between cubes. The result is edge-manifold wherever the surface stays away
//! from the grid border.

use std::collections::HashMap;

use super::{ReconError, VoxelGrid};
use crate::mesh::{TriMesh, Vec3};

/// Cube corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const FACES: [[usize; 4]; 6] = [
    [0, 4, 6, 2], // -x
    [1, 3, 7, 5], // +x
    [0, 1, 5, 4], // -y
    [2, 6, 7, 3], // +y
    [0, 2, 3, 1], // -z
    [4, 5, 7, 6], // +z
];

fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

struct Extractor<'a> {
    grid: &'a VoxelGrid,
    iso: f64,
    vertices: Vec<Vec3>,
    edge_vertex: HashMap<usize, u32>,
    triangles: Vec<[u32; 3]>,
}

impl Extractor<'_> {
    fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.grid.dims[1] + j) * self.grid.dims[0] + i
    }

    /// Vertex on the cube edge between corners `a` and `b` of cube `(i, j, k)`.
    fn edge_vertex(&mut self, cube: [usize; 3], a: usize, b: usize) -> u32 {
        let (oa, ob) = (corner_offset(a), corner_offset(b));
        let axis = (0..3).find(|&d| oa[d] != ob[d]).unwrap();
        let lo = if oa[axis] < ob[axis] { oa } else { ob };
        let base = [cube[0] + lo[0], cube[1] + lo[1], cube[2] + lo[2]];
        let key = 3 * self.node(base[0], base[1], base[2]) + axis;
        if let Some(&v) = self.edge_vertex.get(&key) {
            return v;
        }
        let mut top = base;
        top[axis] += 1;
        let f0 = self.grid.field[self.node(base[0], base[1], base[2])];
        let f1 = self.grid.field[self.node(top[0], top[1], top[2])];
        let t = ((self.iso - f0) / (f1 - f0)).clamp(1e-6, 1.0 - 1e-6);
        let mut p = self.grid.node_position(base[0], base[1], base[2]);
        p[axis] += t * self.grid.voxel_size;
        let id = self.vertices.len() as u32;
        self.vertices.push(p);
        self.edge_vertex.insert(key, id);
        id
    }

    fn cube(&mut self, cube: [usize; 3]) {
        let mut vals = [0.0; 8];
        let mut inside = [false; 8];
        let mut n_in = 0;
        for c in 0..8 {
            let o = corner_offset(c);
            vals[c] = self.grid.field[self.node(cube[0] + o[0], cube[1] + o[1], cube[2] + o[2])];
            inside[c] = vals[c] > self.iso;
            n_in += inside[c] as usize;
        }
        if n_in == 0 || n_in == 8 {
            return;
        }

        // Directed segments between cube edges; an edge is keyed `8 * lo + hi`
        // by its corner pair.
        const NONE: u8 = u8::MAX;
        let mut next = [NONE; 64];
        let edge = |a: usize, b: usize| (8 * a.min(b) + a.max(b)) as u8;
        for face in FACES {
            let fin: [bool; 4] = std::array::from_fn(|k| inside[face[k]]);
            let crossings = (0..4).filter(|&k| fin[k] != fin[(k + 1) % 4]).count();
            let e = |k: usize| edge(face[k % 4], face[(k + 1) % 4]);
            match crossings {
                0 => {}
                2 => {
                    let from = (0..4).find(|&k| fin[k] && !fin[(k + 1) % 4]).unwrap();
                    let to = (0..4).find(|&k| !fin[k] && fin[(k + 1) % 4]).unwrap();
                    next[e(from) as usize] = e(to);
                }
                4 => {
                    let f: [f64; 4] = std::array::from_fn(|k| vals[face[k]]);
                    let saddle = (f[0] * f[2] - f[1] * f[3]) / (f[0] + f[2] - f[1] - f[3]);
                    let joined = saddle > self.iso;
                    for k in (0..4).filter(|&k| fin[k]) {
                        // edge k runs inside -> outside
                        let to = if joined { k + 1 } else { k + 3 };
                        next[e(k) as usize] = e(to);
                    }
                }
                _ => unreachable!("a face has an even number of crossings"),
            }
        }

        let mut used = [false; 64];
        let mut lp = Vec::with_capacity(12);
        for start in 0..64 {
            if next[start] == NONE || used[start] {
                continue;
            }
            lp.clear();
            let mut cur = start;
            loop {
                used[cur] = true;
                lp.push(self.edge_vertex(cube, cur / 8, cur % 8));
                cur = next[cur] as usize;
                if cur == start {
                    break;
                }
            }
            self.emit_loop(&lp);
        }
    }

    fn emit_loop(&mut self, lp: &[u32]) {
        match lp.len() {
            3 => self.triangles.push([lp[0], lp[1], lp[2]]),
            _ => {
                let mut c = [0.0; 3];
                for &v in lp {
                    for d in 0..3 {
                        c[d] += self.vertices[v as usize][d];
                    }
                }
                let centre = self.vertices.len() as u32;
                self.vertices.push(c.map(|x| x / lp.len() as f64));
                for k in 0..lp.len() {
                    self.triangles.push([lp[k], lp[(k + 1) % lp.len()], centre]);
                }
            }
        }
    }
}

/// Extracts the `iso` level set of the grid field (inside where `field > iso`).
/// The returned mesh is oriented to enclose positive volume.
pub fn marching_cubes(grid: &VoxelGrid, iso: f64) -> Result<TriMesh, ReconError> {
    let [nx, ny, nz] = grid.dims;
    if nx < 2 || ny < 2 || nz < 2 || grid.field.len() != nx * ny * nz {
        return Err(ReconError::InvalidGrid(format!("dims {:?} with {} values", grid.dims, grid.field.len())));
    }
    let above = grid.field.iter().filter(|&&v| v > iso).count();
    if above == 0 || above == grid.field.len() {
        return Err(ReconError::NoSurface);
    }
    let mut ex = Extractor { grid, iso, vertices: Vec::new(), edge_vertex: HashMap::new(), triangles: Vec::new() };
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                ex.cube([i, j, k]);
            }
        }
    }
    let mut mesh = TriMesh::new(ex.vertices, ex.triangles);
    if mesh.signed_volume() < 0.0 {
        mesh.flip_orientation();
    }
    Ok(mesh)
}
