//! Plane-stress finite elements on a regular grid of bilinear quads.
//!
//! Nodes are numbered row by row from the bottom-left corner:
//! node `(i, j)` has id `j * (nx + 1) + i` and owns dofs `2*id` (x) and
//! `2*id + 1` (y). Element `(ex, ey)` has id `ey * nx + ex` and its nodes are
//! listed counter-clockwise starting at the bottom-left corner.
//!
//! Element stiffness follows the SIMP law
//! `E(x) = E_void + x^p (E_solid - E_void)`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::sparse::{Cholesky, CholeskyPattern, SymmetricCsc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("invalid grid model: {0}")]
    InvalidModel(String),
    #[error("invalid load case: {0}")]
    InvalidLoads(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("density {value} at element {index} is outside [0, 1]")]
    DensityOutOfRange { index: usize, value: f64 },
    #[error("constrained stiffness matrix is singular (insufficient supports?)")]
    SingularSystem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridModel2D {
    pub nx: usize,
    pub ny: usize,
    pub elem_size: f64,
    pub youngs_modulus_solid: f64,
    pub youngs_modulus_void: f64,
    pub poisson_ratio: f64,
    pub penal: f64,
}

impl GridModel2D {
    /// Unit-size elements, E = 1, ν = 0.3, p = 3, E_void = 1e-9 E.
    pub fn new(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            elem_size: 1.0,
            youngs_modulus_solid: 1.0,
            youngs_modulus_void: 1e-9,
            poisson_ratio: 0.3,
            penal: 3.0,
        }
    }

    pub fn validate(&self) -> Result<(), FemError> {
        let bad = |m: &str| Err(FemError::InvalidModel(m.to_string()));
        if self.nx == 0 || self.ny == 0 {
            return bad("grid needs at least one element per axis");
        }
        if !(self.elem_size > 0.0) {
            return bad("element size must be positive");
        }
        if !(self.youngs_modulus_void > 0.0 && self.youngs_modulus_void < self.youngs_modulus_solid) {
            return bad("require 0 < E_void < E_solid");
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return bad("Poisson ratio must lie in (0, 0.5)");
        }
        if !(self.penal >= 1.0) {
            return bad("penalization exponent must be >= 1");
        }
        Ok(())
    }

    pub fn n_elems(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn node_id(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = (e % self.nx, e / self.nx);
        [
            self.node_id(ex, ey),
            self.node_id(ex + 1, ey),
            self.node_id(ex + 1, ey + 1),
            self.node_id(ex, ey + 1),
        ]
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.element_nodes(e);
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    /// SIMP-interpolated Young's modulus for density `x`.
    pub fn modulus(&self, x: f64) -> f64 {
        self.youngs_modulus_void + x.powf(self.penal) * (self.youngs_modulus_solid - self.youngs_modulus_void)
    }

    /// d E / d x
    pub fn modulus_derivative(&self, x: f64) -> f64 {
        self.penal * x.powf(self.penal - 1.0) * (self.youngs_modulus_solid - self.youngs_modulus_void)
    }

    /// Solid element stiffness (unit thickness), 2x2 Gauss quadrature.
    pub fn element_stiffness(&self) -> [[f64; 8]; 8] {
        let nu = self.poisson_ratio;
        let c = self.youngs_modulus_solid / (1.0 - nu * nu);
        let d = [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * (1.0 - nu) / 2.0]];
        let a = self.elem_size;
        let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        let g = 1.0 / 3f64.sqrt();
        let det_j = a * a / 4.0;
        let mut ke = [[0.0; 8]; 8];
        for &xi in &[-g, g] {
            for &eta in &[-g, g] {
                let mut b = [[0.0; 8]; 3];
                for (k, &(xk, yk)) in corners.iter().enumerate() {
                    let dndx = 0.25 * xk * (1.0 + eta * yk) * 2.0 / a;
                    let dndy = 0.25 * yk * (1.0 + xi * xk) * 2.0 / a;
                    b[0][2 * k] = dndx;
                    b[1][2 * k + 1] = dndy;
                    b[2][2 * k] = dndy;
                    b[2][2 * k + 1] = dndx;
                }
                for i in 0..8 {
                    for j in 0..8 {
                        let mut s = 0.0;
                        for p in 0..3 {
                            for q in 0..3 {
                                s += b[p][i] * d[p][q] * b[q][j];
                            }
                        }
                        ke[i][j] += s * det_j;
                    }
                }
            }
        }
        ke
    }

    fn check_densities(&self, densities: &[f64]) -> Result<(), FemError> {
        if densities.len() != self.n_elems() {
            return Err(FemError::DimensionMismatch { expected: self.n_elems(), found: densities.len() });
        }
        if let Some((index, &value)) = densities.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(FemError::DensityOutOfRange { index, value });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadCase2D {
    pub fixed_dofs: BTreeSet<usize>,
    pub nodal_forces: BTreeMap<usize, f64>,
    /// Ratio of normal to shear load that produced `nodal_forces`; informational.
    pub normal_shear_ratio: f64,
}

impl LoadCase2D {
    /// Left edge clamped, unit downward load at the bottom-right node.
    pub fn cantilever_tip(model: &GridModel2D) -> Self {
        let mut fixed = BTreeSet::new();
        for j in 0..=model.ny {
            let n = model.node_id(0, j);
            fixed.insert(2 * n);
            fixed.insert(2 * n + 1);
        }
        let tip = model.node_id(model.nx, 0);
        Self {
            fixed_dofs: fixed,
            nodal_forces: BTreeMap::from([(2 * tip + 1, -1.0)]),
            normal_shear_ratio: f64::INFINITY,
        }
    }

    pub fn validate(&self, model: &GridModel2D) -> Result<(), FemError> {
        let n = model.n_dofs();
        if self.fixed_dofs.is_empty() {
            return Err(FemError::InvalidLoads("no fixed degrees of freedom".into()));
        }
        if let Some(&d) = self.fixed_dofs.iter().find(|&&d| d >= n) {
            return Err(FemError::InvalidLoads(format!("fixed dof {d} out of range")));
        }
        if let Some(&d) = self.nodal_forces.keys().find(|&&d| d >= n) {
            return Err(FemError::InvalidLoads(format!("loaded dof {d} out of range")));
        }
        if !self.nodal_forces.iter().any(|(d, f)| *f != 0.0 && !self.fixed_dofs.contains(d)) {
            return Err(FemError::InvalidLoads("no nonzero force on a free dof".into()));
        }
        Ok(())
    }

    pub fn force_vector(&self, n_dofs: usize) -> Vec<f64> {
        let mut f = vec![0.0; n_dofs];
        for (&d, &v) in &self.nodal_forces {
            f[d] += v;
        }
        f
    }
}

/// Assembles the full (unconstrained) global stiffness matrix.
pub fn assemble_stiffness(model: &GridModel2D, densities: &[f64]) -> Result<SymmetricCsc, FemError> {
    model.validate()?;
    model.check_densities(densities)?;
    let ke = model.element_stiffness();
    let mut triplets = Vec::with_capacity(model.n_elems() * 36);
    for (e, &x) in densities.iter().enumerate() {
        let scale = model.modulus(x) / model.youngs_modulus_solid;
        let dofs = model.element_dofs(e);
        for a in 0..8 {
            for b in 0..=a {
                let (r, c) = if dofs[a] >= dofs[b] { (dofs[a], dofs[b]) } else { (dofs[b], dofs[a]) };
                triplets.push((r, c, scale * ke[a][b]));
            }
        }
    }
    Ok(SymmetricCsc::from_triplets(model.n_dofs(), &triplets))
}

/// Reusable solver for one model and load case; caches the symbolic
/// factorization so repeated solves with new densities only refactor numerically.
#[derive(Debug, Clone)]
pub struct PlaneStressSolver {
    model: GridModel2D,
    loads: LoadCase2D,
    ke: [[f64; 8]; 8],
    free_index: Vec<usize>,
    n_free: usize,
    pattern: CholeskyPattern,
}

const FIXED: usize = usize::MAX;

impl PlaneStressSolver {
    pub fn new(model: &GridModel2D, loads: &LoadCase2D) -> Result<Self, FemError> {
        model.validate()?;
        loads.validate(model)?;
        let mut free_index = vec![FIXED; model.n_dofs()];
        let mut n_free = 0;
        for (d, slot) in free_index.iter_mut().enumerate() {
            if !loads.fixed_dofs.contains(&d) {
                *slot = n_free;
                n_free += 1;
            }
        }
        let mut solver = Self {
            model: model.clone(),
            loads: loads.clone(),
            ke: model.element_stiffness(),
            free_index,
            n_free,
            pattern: CholeskyPattern::analyze(&SymmetricCsc::from_triplets(0, &[])),
        };
        let probe = solver.reduced_stiffness(&vec![1.0; model.n_elems()]);
        solver.pattern = CholeskyPattern::analyze(&probe);
        Ok(solver)
    }

    pub fn model(&self) -> &GridModel2D {
        &self.model
    }

    pub fn loads(&self) -> &LoadCase2D {
        &self.loads
    }

    pub fn element_stiffness(&self) -> &[[f64; 8]; 8] {
        &self.ke
    }

    fn reduced_stiffness(&self, densities: &[f64]) -> SymmetricCsc {
        let mut triplets = Vec::with_capacity(self.model.n_elems() * 36);
        for (e, &x) in densities.iter().enumerate() {
            let scale = self.model.modulus(x) / self.model.youngs_modulus_solid;
            let dofs = self.model.element_dofs(e);
            for a in 0..8 {
                let ra = self.free_index[dofs[a]];
                if ra == FIXED {
                    continue;
                }
                for b in 0..=a {
                    let rb = self.free_index[dofs[b]];
                    if rb == FIXED {
                        continue;
                    }
                    let (r, c) = if ra >= rb { (ra, rb) } else { (rb, ra) };
                    triplets.push((r, c, scale * self.ke[a][b]));
                }
            }
        }
        SymmetricCsc::from_triplets(self.n_free, &triplets)
    }

    /// Solves `K(x) U = F` with the fixed dofs eliminated. The returned vector
    /// spans all dofs (zeros at supports).
    pub fn solve(&self, densities: &[f64]) -> Result<Vec<f64>, FemError> {
        self.model.check_densities(densities)?;
        let k = self.reduced_stiffness(densities);
        let chol = Cholesky::factor_with(&self.pattern, &k).map_err(|_| FemError::SingularSystem)?;
        let full_f = self.loads.force_vector(self.model.n_dofs());
        let mut f = vec![0.0; self.n_free];
        for (d, &r) in self.free_index.iter().enumerate() {
            if r != FIXED {
                f[r] = full_f[d];
            }
        }
        let mut u = chol.solve(&f);

        // One step of iterative refinement, then verify the residual.
        let mut ku = vec![0.0; self.n_free];
        k.mul_vec(&u, &mut ku);
        let mut r: Vec<f64> = f.iter().zip(&ku).map(|(a, b)| a - b).collect();
        let du = chol.solve(&r);
        u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
        k.mul_vec(&u, &mut ku);
        r.iter_mut().zip(f.iter().zip(&ku)).for_each(|(ri, (a, b))| *ri = a - b);
        let f_norm = crate::sparse::norm(&f);
        let r_norm = crate::sparse::norm(&r);
        if !u.iter().all(|v| v.is_finite()) || r_norm > 1e-8 * f_norm {
            return Err(FemError::SingularSystem);
        }

        let mut full = vec![0.0; self.model.n_dofs()];
        for (d, &r) in self.free_index.iter().enumerate() {
            if r != FIXED {
                full[d] = u[r];
            }
        }
        Ok(full)
    }

    pub fn compliance(&self, u: &[f64]) -> f64 {
        self.loads.nodal_forces.iter().map(|(&d, &f)| f * u[d]).sum()
    }
}

/// One-shot solve of `K(x) U = F`.
pub fn assemble_and_solve(model: &GridModel2D, densities: &[f64], loads: &LoadCase2D) -> Result<Vec<f64>, FemError> {
    PlaneStressSolver::new(model, loads)?.solve(densities)
}

/// Per-element `uₑᵀ k₀ uₑ` with `k₀` the solid element stiffness. The total
/// compliance is `Σ E(xₑ)/E_solid · cₑ`.
pub fn element_compliances(model: &GridModel2D, densities: &[f64], u: &[f64]) -> Result<Vec<f64>, FemError> {
    model.check_densities(densities)?;
    if u.len() != model.n_dofs() {
        return Err(FemError::DimensionMismatch { expected: model.n_dofs(), found: u.len() });
    }
    let ke = model.element_stiffness();
    Ok((0..model.n_elems())
        .map(|e| {
            let dofs = model.element_dofs(e);
            let ue: [f64; 8] = std::array::from_fn(|i| u[dofs[i]]);
            let mut c = 0.0;
            for a in 0..8 {
                for b in 0..8 {
                    c += ue[a] * ke[a][b] * ue[b];
                }
            }
            c
        })
        .collect())
}

/// `Σ E(xₑ)/E_solid · cₑ`, equal to `UᵀK(x)U`.
pub fn total_compliance(model: &GridModel2D, densities: &[f64], element_compliance: &[f64]) -> f64 {
    densities
        .iter()
        .zip(element_compliance)
        .map(|(&x, &c)| model.modulus(x) / model.youngs_modulus_solid * c)
        .sum()
}
