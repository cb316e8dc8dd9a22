//! Free-free modal analysis of voxelized solids.
//!
//! A watertight mesh is filled with cubic 8-node hexahedra by parity ray
//! casting. Element stiffness uses the incompatible-mode formulation
//! (nine internal bubble modes condensed out), which keeps coarse voxel
//! meshes free of shear locking in bending. Mass is consistent. The lowest
//! modes come from a shift-inverted block Krylov method with full
//! M-orthogonalization and Rayleigh-Ritz extraction.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mesh::{TriMesh, Vec3};
use crate::sparse::{dot, Cholesky, SymmetricCsc};

/// Frequencies below this are counted as rigid-body modes.
pub const RIGID_MODE_HZ: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModalError {
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("voxel model has {0} disconnected parts")]
    Disconnected(usize),
    #[error("voxelization produced no elements")]
    EmptyModel,
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("eigensolver converged {converged} of {wanted} modes")]
    EigenNonConvergence { converged: usize, wanted: usize },
    #[error("shifted stiffness is not positive definite")]
    Factorization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// kg/m³
    pub density: f64,
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Pa
    pub yield_strength: f64,
    /// Pa
    pub ultimate_strength: f64,
}

impl Material {
    pub fn aluminium_a356() -> Self {
        Self {
            density: 2680.0,
            youngs_modulus: 72e9,
            poisson_ratio: 0.33,
            yield_strength: 175e6,
            ultimate_strength: 250e6,
        }
    }

    pub fn steel() -> Self {
        Self {
            density: 7850.0,
            youngs_modulus: 210e9,
            poisson_ratio: 0.3,
            yield_strength: 250e6,
            ultimate_strength: 400e6,
        }
    }

    pub fn validate(&self) -> Result<(), ModalError> {
        let positive = [self.density, self.youngs_modulus, self.poisson_ratio, self.yield_strength, self.ultimate_strength];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ModalError::InvalidMaterial("all properties must be positive".into()));
        }
        if self.poisson_ratio >= 0.5 {
            return Err(ModalError::InvalidMaterial("poisson ratio must be below 0.5".into()));
        }
        Ok(())
    }

    /// Isotropic elasticity matrix in Voigt order xx, yy, zz, xy, yz, zx.
    fn elasticity(&self) -> [[f64; 6]; 6] {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        let mut d = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = lam;
            }
            d[i][i] = lam + 2.0 * mu;
            d[i + 3][i + 3] = mu;
        }
        d
    }
}

/// Solid made of equal cubic voxels. Lengths are in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct HexModel {
    pub elem_size: f64,
    /// Position of lattice point (0, 0, 0).
    pub origin: Vec3,
    /// Lattice coordinates of each element's low corner, sorted by (k, j, i).
    pub cells: Vec<[usize; 3]>,
}

fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

impl HexModel {
    pub fn from_cells(elem_size: f64, origin: Vec3, mut cells: Vec<[usize; 3]>) -> Self {
        cells.sort_by_key(|c| (c[2], c[1], c[0]));
        cells.dedup();
        Self { elem_size, origin, cells }
    }

    pub fn n_elements(&self) -> usize {
        self.cells.len()
    }

    pub fn volume_mm3(&self) -> f64 {
        self.cells.len() as f64 * self.elem_size.powi(3)
    }

    pub fn mass_kg(&self, mat: &Material) -> f64 {
        mat.density * self.cells.len() as f64 * (self.elem_size * 1e-3).powi(3)
    }

    /// Node lattice coordinates and the 8 node ids of every element.
    pub fn connectivity(&self) -> (Vec<[usize; 3]>, Vec<[usize; 8]>) {
        let mut nodes: Vec<[usize; 3]> = Vec::with_capacity(self.cells.len() * 2);
        for c in &self.cells {
            for k in 0..8 {
                let o = corner_offset(k);
                nodes.push([c[0] + o[0], c[1] + o[1], c[2] + o[2]]);
            }
        }
        nodes.sort_by_key(|p| (p[2], p[1], p[0]));
        nodes.dedup();
        let find = |p: [usize; 3]| nodes.binary_search_by_key(&(p[2], p[1], p[0]), |q| (q[2], q[1], q[0])).unwrap();
        let elems = self
            .cells
            .iter()
            .map(|c| {
                std::array::from_fn(|k| {
                    let o = corner_offset(k);
                    find([c[0] + o[0], c[1] + o[1], c[2] + o[2]])
                })
            })
            .collect();
        (nodes, elems)
    }

    pub fn node_position(&self, lattice: [usize; 3]) -> Vec3 {
        std::array::from_fn(|a| self.origin[a] + lattice[a] as f64 * self.elem_size)
    }

    /// Number of face-connected groups of elements.
    pub fn component_count(&self) -> usize {
        let n = self.cells.len();
        let key = |c: &[usize; 3]| (c[2], c[1], c[0]);
        let find = |c: [usize; 3]| self.cells.binary_search_by_key(&key(&c), key).ok();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(e) = queue.pop_front() {
                let c = self.cells[e];
                for a in 0..3 {
                    for up in [false, true] {
                        let mut d = c;
                        if up {
                            d[a] += 1;
                        } else if d[a] == 0 {
                            continue;
                        } else {
                            d[a] -= 1;
                        }
                        if let Some(f) = find(d) {
                            if label[f] == usize::MAX {
                                label[f] = count;
                                queue.push_back(f);
                            }
                        }
                    }
                }
            }
            count += 1;
        }
        count
    }
}

/// Fills the interior of a watertight mesh with cubes of side `elem_size`.
/// The lattice starts at the mesh bounding-box minimum; a cube is kept when
/// its centre lies inside the mesh by ray parity along +z.
pub fn voxel_hex_mesh(mesh: &TriMesh, elem_size: f64) -> Result<HexModel, ModalError> {
    if !(elem_size.is_finite() && elem_size > 0.0) {
        return Err(ModalError::InvalidParams("element size must be positive".into()));
    }
    if !mesh.watertight {
        return Err(ModalError::NotWatertight);
    }
    let (lo, hi) = mesh.bounding_box().ok_or(ModalError::EmptyModel)?;
    let dims: [usize; 3] = std::array::from_fn(|a| (((hi[a] - lo[a]) / elem_size) - 1e-9).ceil().max(1.0) as usize);
    let occupied = mesh.solid_voxels(lo, dims, elem_size);
    let mut cells = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                if occupied[(k * dims[1] + j) * dims[0] + i] {
                    cells.push([i, j, k]);
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(ModalError::EmptyModel);
    }
    let model = HexModel::from_cells(elem_size, lo, cells);
    let parts = model.component_count();
    if parts > 1 {
        return Err(ModalError::Disconnected(parts));
    }
    Ok(model)
}

const GAUSS: f64 = 0.577_350_269_189_625_8;

/// Element stiffness (24x24) of a cube with side `h` metres.
pub fn hex_stiffness(mat: &Material, h: f64) -> [[f64; 24]; 24] {
    let d = mat.elasticity();
    let jac = h / 2.0;
    let det = jac.powi(3);
    // 24 nodal columns followed by 9 incompatible-mode columns
    let mut kf = vec![[0.0f64; 33]; 33];
    for g in 0..8 {
        let xi = [(g & 1) as f64, ((g >> 1) & 1) as f64, ((g >> 2) & 1) as f64].map(|s| (2.0 * s - 1.0) * GAUSS);
        let mut grads = [[0.0; 3]; 11];
        for (n, grad) in grads.iter_mut().enumerate().take(8) {
            let s = corner_offset(n).map(|o| 2.0 * o as f64 - 1.0);
            let f: [f64; 3] = std::array::from_fn(|a| 1.0 + s[a] * xi[a]);
            *grad = [s[0] * f[1] * f[2] / 8.0 / jac, f[0] * s[1] * f[2] / 8.0 / jac, f[0] * f[1] * s[2] / 8.0 / jac];
        }
        for a in 0..3 {
            let mut gr = [0.0; 3];
            gr[a] = -2.0 * xi[a] / jac;
            grads[8 + a] = gr;
        }
        let mut b = [[0.0; 33]; 6];
        for (m, gr) in grads.iter().enumerate() {
            for comp in 0..3 {
                let col = if m < 8 { 3 * m + comp } else { 24 + 3 * (m - 8) + comp };
                b[comp][col] = gr[comp];
                let (sa, sb, row) = match comp {
                    0 => (1, 2, [3, 5]),
                    1 => (0, 2, [3, 4]),
                    _ => (0, 1, [5, 4]),
                };
                b[row[0]][col] = gr[sa];
                b[row[1]][col] = gr[sb];
            }
        }
        let mut db = [[0.0; 33]; 6];
        for r in 0..6 {
            for c in 0..33 {
                db[r][c] = (0..6).map(|k| d[r][k] * b[k][c]).sum();
            }
        }
        for r in 0..33 {
            for c in 0..33 {
                kf[r][c] += det * (0..6).map(|k| b[k][r] * db[k][c]).sum::<f64>();
            }
        }
    }
    // condense the internal modes: K = Kcc - Kci Kii^-1 Kic
    let mut kii: Vec<Vec<f64>> = (0..9).map(|r| kf[24 + r][24..33].to_vec()).collect();
    let mut rhs: Vec<Vec<f64>> = (0..9).map(|r| kf[24 + r][..24].to_vec()).collect();
    for p in 0..9 {
        let piv = kii[p][p];
        for r in 0..9 {
            if r == p {
                continue;
            }
            let f = kii[r][p] / piv;
            if f == 0.0 {
                continue;
            }
            for c in 0..9 {
                kii[r][c] -= f * kii[p][c];
            }
            for c in 0..24 {
                rhs[r][c] -= f * rhs[p][c];
            }
        }
    }
    let x: Vec<Vec<f64>> = (0..9).map(|r| rhs[r].iter().map(|v| v / kii[r][r]).collect()).collect();
    let mut k = [[0.0; 24]; 24];
    for r in 0..24 {
        for c in 0..24 {
            k[r][c] = kf[r][c] - (0..9).map(|m| kf[r][24 + m] * x[m][c]).sum::<f64>();
        }
    }
    for r in 0..24 {
        for c in 0..r {
            let v = 0.5 * (k[r][c] + k[c][r]);
            k[r][c] = v;
            k[c][r] = v;
        }
    }
    k
}

/// Consistent mass (24x24) of a cube with side `h` metres.
pub fn hex_mass(mat: &Material, h: f64) -> [[f64; 24]; 24] {
    let vol = h.powi(3);
    let mut m = [[0.0; 24]; 24];
    for a in 0..8 {
        for b in 0..8 {
            let (oa, ob) = (corner_offset(a), corner_offset(b));
            let w: f64 = (0..3).map(|d| if oa[d] == ob[d] { 2.0 } else { 1.0 }).product();
            let v = mat.density * vol * w / 216.0;
            for c in 0..3 {
                m[3 * a + c][3 * b + c] = v;
            }
        }
    }
    m
}

/// Global stiffness and mass matrices sharing one sparsity pattern.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub stiffness: SymmetricCsc,
    pub mass: SymmetricCsc,
    pub node_lattice: Vec<[usize; 3]>,
}

pub fn assemble(model: &HexModel, mat: &Material) -> Assembled {
    let (nodes, elems) = model.connectivity();
    let n_nodes = nodes.len();
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for e in &elems {
        for &a in e {
            neighbours[a].extend(e.iter().copied().filter(|&b| b >= a));
        }
    }
    for nb in &mut neighbours {
        nb.sort_unstable();
        nb.dedup();
    }
    let n = 3 * n_nodes;
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    col_ptr.push(0);
    for (a, nb) in neighbours.iter().enumerate() {
        for ca in 0..3 {
            for &b in nb {
                for cb in 0..3 {
                    if b > a || cb >= ca {
                        row_idx.push(3 * b + cb);
                    }
                }
            }
            col_ptr.push(row_idx.len());
        }
    }
    let h = model.elem_size * 1e-3;
    let ke = hex_stiffness(mat, h);
    let me = hex_mass(mat, h);
    let mut kv = vec![0.0; row_idx.len()];
    let mut mv = vec![0.0; row_idx.len()];
    for e in &elems {
        for la in 0..24 {
            let c = 3 * e[la / 3] + la % 3;
            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            for lb in 0..24 {
                let r = 3 * e[lb / 3] + lb % 3;
                if r < c {
                    continue;
                }
                let pos = col_ptr[c] + rows.binary_search(&r).unwrap();
                kv[pos] += ke[lb][la];
                mv[pos] += me[lb][la];
            }
        }
    }
    Assembled {
        stiffness: SymmetricCsc::from_raw(n, col_ptr.clone(), row_idx.clone(), kv),
        mass: SymmetricCsc::from_raw(n, col_ptr, row_idx, mv),
        node_lattice: nodes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Spectral shift expressed as a frequency in Hz.
    pub shift_hz: f64,
    /// Relative residual bound in the M-norm for accepting a Ritz pair.
    pub tol: f64,
    pub block_size: usize,
    pub max_basis: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { shift_hz: 10.0, tol: 1e-8, block_size: 8, max_basis: 240, seed: 0 }
    }
}

/// Lowest eigenpairs of `K φ = λ M φ`, ascending, with M-normalized vectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub basis_size: usize,
}

pub fn lowest_eigenpairs(
    k: &SymmetricCsc,
    m: &SymmetricCsc,
    count: usize,
    opts: &EigenOptions,
) -> Result<EigenPairs, ModalError> {
    let n = k.dim();
    if count == 0 || count > n || opts.block_size == 0 || !(opts.shift_hz > 0.0) {
        return Err(ModalError::InvalidParams(format!("{count} modes from {n} dofs")));
    }
    let sigma = (2.0 * PI * opts.shift_hz).powi(2);
    let chol = Cholesky::factor(&k.linear_combination(1.0, m, sigma)).map_err(|_| ModalError::Factorization)?;
    let max_basis = opts.max_basis.max(count + opts.block_size).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut m_basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut proj: Vec<Vec<f64>> = Vec::new();
    let mut candidates: Vec<Vec<f64>> =
        (0..opts.block_size).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    let mut mw = vec![0.0; n];

    loop {
        let first_new = basis.len();
        for mut w in candidates.drain(..) {
            if basis.len() == max_basis {
                break;
            }
            let mut accepted = false;
            for _attempt in 0..3 {
                let before = { m.mul_vec(&w, &mut mw); dot(&w, &mw).sqrt() };
                for _pass in 0..2 {
                    for (v, mv) in basis.iter().zip(&m_basis) {
                        let c = dot(mv, &w);
                        w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                    }
                }
                m.mul_vec(&w, &mut mw);
                let after = dot(&w, &mw).sqrt();
                if after > 1e-8 * before && after > 0.0 {
                    w.iter_mut().for_each(|x| *x /= after);
                    mw.iter_mut().for_each(|x| *x /= after);
                    accepted = true;
                    break;
                }
                w = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            }
            if accepted {
                basis.push(w);
                m_basis.push(mw.clone());
            }
        }
        let added = basis.len() - first_new;
        if added == 0 {
            return Err(ModalError::EigenNonConvergence { converged: 0, wanted: count });
        }
        let mut block: Vec<f64> = m_basis[first_new..].iter().flatten().copied().collect();
        chol.solve_columns_in_place(&mut block, added);
        images.extend(block.chunks(n).map(<[f64]>::to_vec));
        for row in proj.iter_mut() {
            row.resize(basis.len(), 0.0);
        }
        for i in 0..basis.len() {
            if i >= proj.len() {
                proj.push(vec![0.0; basis.len()]);
            }
            let start = if i >= first_new { 0 } else { first_new };
            for j in start..basis.len() {
                proj[i][j] = dot(&m_basis[i], &images[j]);
            }
        }

        let size = basis.len();
        let t = faer::Mat::<f64>::from_fn(size, size, |i, j| 0.5 * (proj[i][j] + proj[j][i]));
        let eig = t
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|_| ModalError::EigenNonConvergence { converged: 0, wanted: count })?;
        let theta = eig.S().column_vector();
        let u = eig.U();
        let wanted = count.min(size);
        let mut converged = 0;
        let mut ritz = Vec::with_capacity(wanted);
        for r in 0..wanted {
            let idx = size - 1 - r;
            let th = theta[idx];
            let y: Vec<f64> = (0..size).map(|i| u[(i, idx)]).collect();
            let mut x = vec![0.0; n];
            let mut ox = vec![0.0; n];
            for i in 0..size {
                x.iter_mut().zip(&basis[i]).for_each(|(a, b)| *a += y[i] * b);
                ox.iter_mut().zip(&images[i]).for_each(|(a, b)| *a += y[i] * b);
            }
            let res: Vec<f64> = ox.iter().zip(&x).map(|(a, b)| a - th * b).collect();
            m.mul_vec(&res, &mut mw);
            let res_norm = dot(&res, &mw).max(0.0).sqrt();
            if th > 0.0 && res_norm <= opts.tol * th {
                converged += 1;
            }
            ritz.push(x);
        }
        if converged == count {
            let mut pairs: Vec<(f64, Vec<f64>)> = ritz
                .into_iter()
                .map(|mut x| {
                    m.mul_vec(&x, &mut mw);
                    let mass = dot(&x, &mw);
                    let scale = 1.0 / mass.sqrt();
                    x.iter_mut().for_each(|v| *v *= scale);
                    (k.quad_form(&x), x)
                })
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (values, vectors) = pairs.into_iter().unzip();
            return Ok(EigenPairs { values, vectors, basis_size: size });
        }
        if size >= max_basis {
            return Err(ModalError::EigenNonConvergence { converged, wanted: count });
        }
        candidates = images[first_new..].to_vec();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalResult {
    pub mass_kg: f64,
    /// Modes 1..N in Hz, ascending, rigid-body modes included.
    pub frequencies_hz: Vec<f64>,
    pub rigid_mode_count: usize,
    pub mode7_hz: f64,
    pub mode11_hz: f64,
    pub converged: bool,
}

pub fn eigenvalue_to_hz(lambda: f64) -> f64 {
    lambda.max(0.0).sqrt() / (2.0 * PI)
}

pub fn modal_analysis(model: &HexModel, mat: &Material, n_modes: usize) -> Result<ModalResult, ModalError> {
    modal_analysis_with(model, mat, n_modes, &EigenOptions::default())
}

pub fn modal_analysis_with(
    model: &HexModel,
    mat: &Material,
    n_modes: usize,
    opts: &EigenOptions,
) -> Result<ModalResult, ModalError> {
    mat.validate()?;
    if n_modes < 12 {
        return Err(ModalError::InvalidParams("at least 12 modes are required".into()));
    }
    if model.cells.is_empty() {
        return Err(ModalError::EmptyModel);
    }
    let parts = model.component_count();
    if parts > 1 {
        return Err(ModalError::Disconnected(parts));
    }
    let sys = assemble(model, mat);
    let pairs = lowest_eigenpairs(&sys.stiffness, &sys.mass, n_modes, opts)?;
    let frequencies_hz: Vec<f64> = pairs.values.iter().map(|&l| eigenvalue_to_hz(l)).collect();
    Ok(ModalResult {
        mass_kg: model.mass_kg(mat),
        rigid_mode_count: frequencies_hz.iter().filter(|&&f| f < RIGID_MODE_HZ).count(),
        mode7_hz: frequencies_hz[6],
        mode11_hz: frequencies_hz[10],
        frequencies_hz,
        converged: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceScore {
    pub norm_mode7: f64,
    pub norm_mode11: f64,
    pub norm_mass: f64,
    pub overall: f64,
}

/// Scores of a batch; `degenerate` lists metrics whose batch range was zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub scores: Vec<PerformanceScore>,
    pub degenerate: Vec<&'static str>,
}

fn min_max(values: &[f64]) -> Option<Vec<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        Some(values.iter().map(|v| (v - lo) / (hi - lo)).collect())
    } else {
        None
    }
}

/// Min-max normalizes mode 7, mode 11 and inverted mass across the batch
/// and averages them with equal weights.
pub fn performance_score(results: &[ModalResult]) -> Result<ScoreTable, ModalError> {
    if results.len() < 2 {
        return Err(ModalError::InvalidParams("need at least two results to score".into()));
    }
    let mut degenerate = Vec::new();
    let mut column = |name: &'static str, values: Vec<f64>, invert: bool| match min_max(&values) {
        Some(v) => v.into_iter().map(|x| if invert { 1.0 - x } else { x }).collect(),
        None => {
            degenerate.push(name);
            vec![0.5; values.len()]
        }
    };
    let m7 = column("mode7_hz", results.iter().map(|r| r.mode7_hz).collect(), false);
    let m11 = column("mode11_hz", results.iter().map(|r| r.mode11_hz).collect(), false);
    let mass = column("mass_kg", results.iter().map(|r| r.mass_kg).collect(), true);
    let scores = (0..results.len())
        .map(|i| PerformanceScore {
            norm_mode7: m7[i],
            norm_mode11: m11[i],
            norm_mass: mass[i],
            overall: (m7[i] + m11[i] + mass[i]) / 3.0,
        })
        .collect();
    Ok(ScoreTable { scores, degenerate })
}
