//! Textbook compliance-minimization code in the compact educational style:
//! column-major node numbering from the top-left corner, closed-form element
//! stiffness, banded Cholesky solve and the classic bisection OC loop.
#![allow(dead_code)]

pub struct Oracle {
    pub nelx: usize,
    pub nely: usize,
    pub nu: f64,
    pub e0: f64,
    pub emin: f64,
    pub penal: f64,
}

impl Oracle {
    pub fn new(nelx: usize, nely: usize) -> Self {
        Self { nelx, nely, nu: 0.3, e0: 1.0, emin: 1e-9, penal: 3.0 }
    }

    pub fn ke(&self) -> [[f64; 8]; 8] {
        let nu = self.nu;
        let a11 = [[12., 3., -6., -3.], [3., 12., 3., 0.], [-6., 3., 12., -3.], [-3., 0., -3., 12.]];
        let a12 = [[-6., -3., 0., 3.], [-3., -6., -3., -6.], [0., -3., -6., 3.], [3., -6., 3., -6.]];
        let b11 = [[-4., 3., -2., 9.], [3., -4., -9., 4.], [-2., -9., -4., -3.], [9., 4., -3., -4.]];
        let b12 = [[2., -3., 4., -9.], [-3., 2., 9., -2.], [4., 9., 2., 3.], [-9., -2., 3., 2.]];
        let mut k = [[0.0; 8]; 8];
        for i in 0..4 {
            for j in 0..4 {
                let s = 1.0 / (1.0 - nu * nu) / 24.0;
                k[i][j] = s * (a11[i][j] + nu * b11[i][j]);
                k[i][j + 4] = s * (a12[i][j] + nu * b12[i][j]);
                k[i + 4][j] = s * (a12[j][i] + nu * b12[j][i]);
                k[i + 4][j + 4] = s * (a11[i][j] + nu * b11[i][j]);
            }
        }
        k
    }

    pub fn ndof(&self) -> usize {
        2 * (self.nelx + 1) * (self.nely + 1)
    }

    /// Element index `ely + elx*nely` (column-major, row 0 on top).
    pub fn edof(&self, elx: usize, ely: usize) -> [usize; 8] {
        let n1 = (self.nely + 1) * elx + ely;
        let n2 = (self.nely + 1) * (elx + 1) + ely;
        [2 * n1 + 2, 2 * n1 + 3, 2 * n2 + 2, 2 * n2 + 3, 2 * n2, 2 * n2 + 1, 2 * n1, 2 * n1 + 1]
    }

    /// Left edge clamped, unit downward force at the bottom-right node.
    pub fn cantilever(&self) -> (Vec<usize>, Vec<f64>) {
        let fixed: Vec<usize> = (0..2 * (self.nely + 1)).collect();
        let mut f = vec![0.0; self.ndof()];
        let last = self.ndof() - 1;
        f[last] = -1.0;
        (fixed, f)
    }

    /// Solves K(xPhys) U = F. `x[ely + elx*nely]`.
    pub fn fe(&self, x: &[f64], fixed: &[usize], f: &[f64]) -> Vec<f64> {
        let ndof = self.ndof();
        let mut free_map = vec![usize::MAX; ndof];
        let mut free = Vec::new();
        for d in 0..ndof {
            if !fixed.contains(&d) {
                free_map[d] = free.len();
                free.push(d);
            }
        }
        let n = free.len();
        let bw = 2 * self.nely + 5;
        let mut band = Band::new(n, bw);
        let ke = self.ke();
        for elx in 0..self.nelx {
            for ely in 0..self.nely {
                let xe = x[ely + elx * self.nely];
                let e = self.emin + xe.powf(self.penal) * (self.e0 - self.emin);
                let ed = self.edof(elx, ely);
                for a in 0..8 {
                    for b in 0..8 {
                        let (ra, rb) = (free_map[ed[a]], free_map[ed[b]]);
                        if ra != usize::MAX && rb != usize::MAX && ra >= rb {
                            band.add(ra, rb, e * ke[a][b]);
                        }
                    }
                }
            }
        }
        band.factor();
        let mut rhs: Vec<f64> = free.iter().map(|&d| f[d]).collect();
        band.solve(&mut rhs);
        let mut u = vec![0.0; ndof];
        for (i, &d) in free.iter().enumerate() {
            u[d] = rhs[i];
        }
        u
    }

    pub fn element_compliances(&self, u: &[f64]) -> Vec<f64> {
        let ke = self.ke();
        let mut ce = vec![0.0; self.nelx * self.nely];
        for elx in 0..self.nelx {
            for ely in 0..self.nely {
                let ed = self.edof(elx, ely);
                let mut c = 0.0;
                for a in 0..8 {
                    for b in 0..8 {
                        c += u[ed[a]] * ke[a][b] * u[ed[b]];
                    }
                }
                ce[ely + elx * self.nely] = c;
            }
        }
        ce
    }

    /// Runs the classic loop and returns `(xPhys, compliance of xPhys)`.
    pub fn top(&self, volfrac: f64, rmin: f64) -> (Vec<f64>, f64) {
        let (nelx, nely) = (self.nelx, self.nely);
        let ne = nelx * nely;
        let (fixed, f) = self.cantilever();
        // filter weights
        let r = rmin.ceil() as isize - 1;
        let mut h: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ne];
        let mut hs = vec![0.0; ne];
        for i1 in 0..nelx as isize {
            for j1 in 0..nely as isize {
                let e1 = (i1 * nely as isize + j1) as usize;
                for i2 in (i1 - r).max(0)..=(i1 + r).min(nelx as isize - 1) {
                    for j2 in (j1 - r).max(0)..=(j1 + r).min(nely as isize - 1) {
                        let e2 = (i2 * nely as isize + j2) as usize;
                        let w = (rmin - (((i1 - i2).pow(2) + (j1 - j2).pow(2)) as f64).sqrt()).max(0.0);
                        h[e1].push((e2, w));
                        hs[e1] += w;
                    }
                }
            }
        }
        let mut x = vec![volfrac; ne];
        let mut change = 1.0;
        let mut iter = 0;
        while change > 0.01 && iter < 1000 {
            iter += 1;
            let u = self.fe(&x, &fixed, &f);
            let ce = self.element_compliances(&u);
            let dc: Vec<f64> =
                (0..ne).map(|e| -self.penal * (self.e0 - self.emin) * x[e].powf(self.penal - 1.0) * ce[e]).collect();
            let dc: Vec<f64> = (0..ne)
                .map(|e| h[e].iter().map(|&(j, w)| w * x[j] * dc[j]).sum::<f64>() / hs[e] / x[e].max(1e-3))
                .collect();
            let (mut l1, mut l2, mv) = (0.0f64, 1e9f64, 0.2);
            let mut xnew = x.clone();
            while (l2 - l1) / (l1 + l2) > 1e-3 {
                let lmid = 0.5 * (l2 + l1);
                for e in 0..ne {
                    let cand = x[e] * (-dc[e] / lmid).sqrt();
                    xnew[e] = 0f64.max((x[e] - mv).max(1f64.min((x[e] + mv).min(cand))));
                }
                if xnew.iter().sum::<f64>() > volfrac * ne as f64 {
                    l1 = lmid;
                } else {
                    l2 = lmid;
                }
            }
            change = x.iter().zip(&xnew).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = xnew;
        }
        let u = self.fe(&x, &fixed, &f);
        let ce = self.element_compliances(&u);
        let c = (0..ne).map(|e| (self.emin + x[e].powf(self.penal) * (self.e0 - self.emin)) * ce[e]).sum();
        (x, c)
    }
}

/// Symmetric banded matrix, lower band stored row-wise.
struct Band {
    n: usize,
    bw: usize,
    a: Vec<f64>,
}

impl Band {
    fn new(n: usize, bw: usize) -> Self {
        Self { n, bw, a: vec![0.0; n * (bw + 1)] }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        assert!(i >= j && i - j <= self.bw, "entry outside band");
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.a[k] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i < j || i - j > self.bw {
            0.0
        } else {
            self.a[self.idx(i, j)]
        }
    }

    fn factor(&mut self) {
        for j in 0..self.n {
            let mut d = self.get(j, j);
            for k in j.saturating_sub(self.bw)..j {
                d -= self.get(j, k).powi(2);
            }
            assert!(d > 0.0, "matrix not positive definite");
            let d = d.sqrt();
            let kjj = self.idx(j, j);
            self.a[kjj] = d;
            for i in j + 1..(j + self.bw + 1).min(self.n) {
                let mut s = self.get(i, j);
                for k in i.saturating_sub(self.bw)..j {
                    s -= self.get(i, k) * self.get(j, k);
                }
                let kij = self.idx(i, j);
                self.a[kij] = s / d;
            }
        }
    }

    fn solve(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.get(i, k) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s -= self.get(k, i) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
    }
}

/// Maps oracle element `(elx, ely)` to the crate's row-major-from-bottom index.
pub fn crate_element(nelx: usize, nely: usize, elx: usize, ely: usize) -> usize {
    (nely - 1 - ely) * nelx + elx
}

/// Maps oracle node `(column, row from top)` to the crate's node id.
pub fn crate_node(nelx: usize, nely: usize, col: usize, row: usize) -> usize {
    (nely - row) * (nelx + 1) + col
}
