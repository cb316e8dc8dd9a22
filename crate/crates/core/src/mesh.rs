//! Indexed triangle meshes, topology queries and binary STL.

use std::collections::HashMap;
use std::io::{Read, Write};

use thiserror::Error;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error)]
pub enum StlError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("truncated or malformed STL: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Every edge is shared by exactly two triangles.
    pub watertight: bool,
    pub euler_characteristic: i64,
}

/// Edge-use counts of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeStats {
    pub edges: usize,
    pub boundary: usize,
    pub non_manifold: usize,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        let mut m = Self { vertices, triangles, watertight: false, euler_characteristic: 0 };
        m.refresh_topology();
        m
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Recomputes `watertight` and `euler_characteristic`.
    pub fn refresh_topology(&mut self) {
        let stats = self.edge_stats();
        self.watertight = !self.triangles.is_empty() && stats.boundary == 0 && stats.non_manifold == 0;
        let used = self.referenced_vertices().iter().filter(|&&u| u).count();
        self.euler_characteristic = used as i64 - stats.edges as i64 + self.triangles.len() as i64;
    }

    fn edge_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn edge_stats(&self) -> EdgeStats {
        let counts = self.edge_counts();
        EdgeStats {
            edges: counts.len(),
            boundary: counts.values().filter(|&&c| c == 1).count(),
            non_manifold: counts.values().filter(|&&c| c > 2).count(),
        }
    }

    /// True when every directed edge appears once and its reverse once,
    /// i.e. the surface is closed and consistently oriented.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        directed.iter().all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn referenced_vertices(&self) -> Vec<bool> {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        used
    }

    /// Drops unreferenced vertices, keeping the order of the rest.
    pub fn compact(&mut self) {
        let used = self.referenced_vertices();
        if used.iter().all(|&u| u) {
            return;
        }
        let mut map = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if used[i] {
                map[i] = vertices.len() as u32;
                vertices.push(*v);
            }
        }
        for t in &mut self.triangles {
            for v in t.iter_mut() {
                *v = map[*v as usize];
            }
        }
        self.vertices = vertices;
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Signed enclosed volume (positive for outward-facing triangles).
    pub fn signed_volume(&self) -> f64 {
        // shift to the first vertex to limit cancellation
        let o = self.vertices.first().copied().unwrap_or([0.0; 3]);
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (pa, pb, pc) = (
                    sub(self.vertices[a as usize], o),
                    sub(self.vertices[b as usize], o),
                    sub(self.vertices[c as usize], o),
                );
                dot(pa, cross(pb, pc))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn flip_orientation(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let used = self.referenced_vertices();
        let mut it = self.vertices.iter().zip(&used).filter(|(_, &u)| u).map(|(v, _)| *v);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| {
            (
                [lo[0].min(p[0]), lo[1].min(p[1]), lo[2].min(p[2])],
                [hi[0].max(p[0]), hi[1].max(p[1]), hi[2].max(p[2])],
            )
        }))
    }

    /// Solid occupancy of the cubic cells of a lattice with low corner `lo`,
    /// `dims` cells per axis and spacing `h`, indexed `(k * ny + j) * nx + i`.
    /// A cell is solid when its centre lies inside by ray parity along +z.
    pub fn solid_voxels(&self, lo: Vec3, dims: [usize; 3], h: f64) -> Vec<bool> {
        if dims.contains(&0) {
            return Vec::new();
        }
        let (nx, ny) = (dims[0], dims[1]);
        // Column probes are nudged off the lattice so they never graze an edge.
        let jitter = [0.3183098861837907e-6 * h, 0.2718281828459045e-6 * h];
        let probe = |i: usize, j: usize| {
            [
                lo[0] + (i as f64 + 0.5) * h + jitter[0],
                lo[1] + (j as f64 + 0.5) * h + jitter[1],
            ]
        };
        let mut hits: Vec<Vec<f64>> = vec![Vec::new(); nx * ny];
        for t in &self.triangles {
            let p = t.map(|v| self.vertices[v as usize]);
            let cmin = |a: usize| p.iter().map(|q| q[a]).fold(f64::INFINITY, f64::min);
            let cmax = |a: usize| p.iter().map(|q| q[a]).fold(f64::NEG_INFINITY, f64::max);
            let range = |a: usize, n: usize| {
                let first = ((cmin(a) - lo[a]) / h - 0.5).floor().max(0.0) as usize;
                let last = (((cmax(a) - lo[a]) / h - 0.5).ceil().max(0.0) as usize).min(n - 1);
                first..=last
            };
            let area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            if area == 0.0 {
                continue;
            }
            for j in range(1, ny) {
                for i in range(0, nx) {
                    let q = probe(i, j);
                    let w: [f64; 3] = std::array::from_fn(|k| {
                        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                        ((b[0] - a[0]) * (q[1] - a[1]) - (q[0] - a[0]) * (b[1] - a[1])) / area
                    });
                    if w.iter().all(|&x| x >= 0.0) {
                        hits[j * nx + i].push(w[0] * p[0][2] + w[1] * p[1][2] + w[2] * p[2][2]);
                    }
                }
            }
        }
        let mut occupied = vec![false; nx * ny * dims[2]];
        for j in 0..ny {
            for i in 0..nx {
                let col = &mut hits[j * nx + i];
                col.sort_by(f64::total_cmp);
                for k in 0..dims[2] {
                    let z = lo[2] + (k as f64 + 0.5) * h;
                    occupied[(k * ny + j) * nx + i] = col.partition_point(|&c| c < z) % 2 == 1;
                }
            }
        }
        occupied
    }

    /// Triangle sets of the vertex-connected components, largest first
    /// (ties broken by lowest triangle index).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(p: &mut [u32], mut x: u32) -> u32 {
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        for t in &self.triangles {
            for k in 1..3 {
                let (ra, rb) = (find(&mut parent, t[0]), find(&mut parent, t[k]));
                if ra != rb {
                    parent[ra.max(rb) as usize] = ra.min(rb);
                }
            }
        }
        let mut groups: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, t) in self.triangles.iter().enumerate() {
            groups.entry(find(&mut parent, t[0])).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        out
    }

    pub fn with_triangles(&self, keep: &[usize]) -> Self {
        let mut m = Self {
            vertices: self.vertices.clone(),
            triangles: keep.iter().map(|&t| self.triangles[t]).collect(),
            watertight: false,
            euler_characteristic: 0,
        };
        m.compact();
        m.refresh_topology();
        m
    }

    /// Binary STL: 80-byte header, triangle count, 50 bytes per triangle.
    pub fn write_stl<W: Write>(&self, mut w: W) -> Result<(), StlError> {
        let mut header = [0u8; 80];
        let tag = b"wheelforge binary stl";
        header[..tag.len()].copy_from_slice(tag);
        w.write_all(&header)?;
        w.write_all(&(self.triangles.len() as u32).to_le_bytes())?;
        let mut rec = [0u8; 50];
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            let n = normalize(cross(sub(b, a), sub(c, a)));
            for (k, v) in [n, a, b, c].iter().enumerate() {
                for j in 0..3 {
                    let o = 12 * k + 4 * j;
                    rec[o..o + 4].copy_from_slice(&(v[j] as f32).to_le_bytes());
                }
            }
            w.write_all(&rec)?;
        }
        Ok(())
    }

    /// Reads a binary STL and merges bit-identical vertices.
    pub fn read_stl<R: Read>(mut r: R) -> Result<Self, StlError> {
        let mut head = [0u8; 84];
        r.read_exact(&mut head).map_err(|e| StlError::Malformed(e.to_string()))?;
        let n = u32::from_le_bytes([head[80], head[81], head[82], head[83]]) as usize;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() < 50 * n {
            return Err(StlError::Malformed(format!("{} triangles need {} bytes, found {}", n, 50 * n, body.len())));
        }
        let mut index: HashMap<[u32; 3], u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(n);
        for t in 0..n {
            let rec = &body[50 * t..50 * t + 50];
            let mut tri = [0u32; 3];
            for (k, slot) in tri.iter_mut().enumerate() {
                let bits: [u32; 3] = std::array::from_fn(|j| {
                    let o = 12 + 12 * k + 4 * j;
                    u32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]])
                });
                *slot = *index.entry(bits).or_insert_with(|| {
                    vertices.push(bits.map(|b| f32::from_bits(b) as f64));
                    (vertices.len() - 1) as u32
                });
            }
            triangles.push(tri);
        }
        Ok(Self::new(vertices, triangles))
    }
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        [0.0; 3]
    }
}

/// Axis-aligned box `[lo, hi]` as a closed 12-triangle mesh.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriMesh {
    let v: Vec<Vec3> = (0..8)
        .map(|c| {
            [
                if c & 1 == 0 { lo[0] } else { hi[0] },
                if c & 2 == 0 { lo[1] } else { hi[1] },
                if c & 4 == 0 { lo[2] } else { hi[2] },
            ]
        })
        .collect();
    let quads = [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]];
    let mut t = Vec::new();
    for q in quads {
        t.push([q[0], q[1], q[2]]);
        t.push([q[0], q[2], q[3]]);
    }
    TriMesh::new(v, t)
}

/// Geodesic sphere from a subdivided octahedron, outward oriented.
pub fn sphere_mesh(center: Vec3, radius: f64, subdivisions: usize) -> TriMesh {
    let mut verts: Vec<Vec3> = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let mut tris: Vec<[u32; 3]> =
        vec![[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(normalize(scale(add(verts[a as usize], verts[b as usize]), 0.5)));
                (verts.len() - 1) as u32
            })
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        tris = next;
    }
    let verts = verts.into_iter().map(|v| add(center, scale(v, radius))).collect();
    TriMesh::new(verts, tris)
}
