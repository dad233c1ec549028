//! Vertical discretization of the strip `[−H, 0]`: graded spectral elements
//! with Gauss–Lobatto–Legendre nodes, plus banded SPD factorizations of the
//! flat (η = 0) operator mode by mode.
//!
//! Element breakpoints are `z_e = −H·expm1(α s_e)/expm1(α)` for uniform
//! `s_e ∈ [0, 1]`, so elements shrink towards the free surface where the high
//! modes live. `α = 0` gives uniform elements. Global node 0 is the surface
//! `z = 0`; the last node is the bottom `z = −H`.

/// Gauss–Lobatto–Legendre rule of degree `p` on `[−1, 1]`, ascending nodes.
#[derive(Debug, Clone)]
pub struct GllRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `d[i][j] = ℓ_j'(x_i)` for the Lagrange basis on the nodes.
    pub diff: Vec<Vec<f64>>,
}

impl GllRule {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1, "element degree must be at least 1");
        let n = p + 1;
        // Newton iteration on (1 − x²)P_p'(x) from the Chebyshev–Lobatto guess
        let mut x: Vec<f64> =
            (0..n).map(|j| -(std::f64::consts::PI * j as f64 / p as f64).cos()).collect();
        let mut pp = vec![0.0; n];
        for _ in 0..100 {
            let mut delta: f64 = 0.0;
            for xi in x.iter_mut() {
                let (pn, pn1) = legendre_pair(p, *xi);
                let step = (*xi * pn - pn1) / ((p + 1) as f64 * pn);
                *xi -= step;
                delta = delta.max(step.abs());
            }
            if delta < 1e-16 {
                break;
            }
        }
        x[0] = -1.0;
        x[p] = 1.0;
        for (i, xi) in x.iter().enumerate() {
            pp[i] = legendre_pair(p, *xi).0;
        }
        let pf = p as f64;
        let weights: Vec<f64> = pp.iter().map(|v| 2.0 / (pf * (pf + 1.0) * v * v)).collect();
        let mut diff = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    diff[i][j] = pp[i] / pp[j] / (x[i] - x[j]);
                }
            }
        }
        diff[0][0] = -pf * (pf + 1.0) / 4.0;
        diff[p][p] = pf * (pf + 1.0) / 4.0;
        Self { nodes: x, weights, diff }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// `(P_p(x), P_{p−1}(x))` by the three-term recurrence.
fn legendre_pair(p: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    if p == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=p {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * cur - (kf - 1.0) * prev) / kf;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Node layout, quadrature and derivative data for the whole column.
#[derive(Debug, Clone)]
pub struct VerticalGrid {
    depth: f64,
    degree: usize,
    grading: f64,
    /// Node depths, `z[0] = 0`, decreasing.
    z: Vec<f64>,
    /// Per element: `|dz/dr|·w_q` for each local node.
    elem_weights: Vec<Vec<f64>>,
    /// Per element: derivative matrix in `z`.
    elem_diff: Vec<Vec<Vec<f64>>>,
    /// Assembled nodal weights (sum over elements sharing the node).
    weights: Vec<f64>,
}

impl VerticalGrid {
    /// `nz` nodes on `[−depth, 0]` with elements of degree `degree`.
    /// Requires `(nz − 1) % degree == 0`.
    pub fn new(depth: f64, nz: usize, degree: usize, grading: f64) -> Self {
        assert!(depth > 0.0 && nz >= 3 && degree >= 1);
        assert_eq!((nz - 1) % degree, 0, "nz − 1 must be a multiple of the element degree");
        let rule = GllRule::new(degree);
        let ne = (nz - 1) / degree;
        let breaks: Vec<f64> = (0..=ne)
            .map(|e| {
                let s = e as f64 / ne as f64;
                if grading.abs() < 1e-12 {
                    -depth * s
                } else {
                    -depth * (grading * s).exp_m1() / grading.exp_m1()
                }
            })
            .collect();
        let mut z = vec![0.0; nz];
        let mut weights = vec![0.0; nz];
        let mut elem_weights = Vec::with_capacity(ne);
        let mut elem_diff = Vec::with_capacity(ne);
        for e in 0..ne {
            let (top, bot) = (breaks[e], breaks[e + 1]);
            let jac = 0.5 * (bot - top);
            let w: Vec<f64> = rule.weights.iter().map(|w| w * jac.abs()).collect();
            let d: Vec<Vec<f64>> =
                rule.diff.iter().map(|row| row.iter().map(|v| v / jac).collect()).collect();
            for q in 0..=degree {
                let j = e * degree + q;
                z[j] = top + (rule.nodes[q] + 1.0) * jac;
                weights[j] += w[q];
            }
            elem_weights.push(w);
            elem_diff.push(d);
        }
        z[0] = 0.0;
        z[nz - 1] = -depth;
        Self { depth, degree, grading, z, elem_weights, elem_diff, weights }
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn num_nodes(&self) -> usize {
        self.z.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elem_diff.len()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn elem_weights(&self, e: usize) -> &[f64] {
        &self.elem_weights[e]
    }

    pub fn elem_diff(&self, e: usize) -> &[Vec<f64>] {
        &self.elem_diff[e]
    }

    /// Spacing of the first (finest) element.
    pub fn surface_spacing(&self) -> f64 {
        -self.z[self.degree]
    }

    /// Stiffness `K = Σ_e D_eᵀ W_e D_e` plus `shift·diag(W)` in band form.
    pub fn flat_matrix(&self, shift: f64) -> BandMatrix {
        let nz = self.num_nodes();
        let p = self.degree;
        let mut m = BandMatrix::zeros(nz, p);
        for e in 0..self.num_elements() {
            let d = &self.elem_diff[e];
            let w = &self.elem_weights[e];
            for a in 0..=p {
                for b in 0..=a {
                    let mut s = 0.0;
                    for q in 0..=p {
                        s += w[q] * d[q][a] * d[q][b];
                    }
                    m.add(e * p + a, e * p + b, s);
                }
            }
        }
        for j in 0..nz {
            m.add(j, j, shift * self.weights[j]);
        }
        m
    }

    /// Discrete flat Dirichlet-to-Neumann value for horizontal wavenumber `k`:
    /// the Schur complement of `K + k²W` onto the surface node.
    pub fn flat_dtn_symbol(&self, k: f64) -> f64 {
        let full = self.flat_matrix(k * k);
        let interior = full.without_first().cholesky();
        let nz = self.num_nodes();
        let mut rhs = vec![0.0; nz - 1];
        for (i, r) in rhs.iter_mut().enumerate().take(self.degree) {
            *r = full.get(i + 1, 0);
        }
        let y = interior.solve(&rhs);
        let mut s = full.get(0, 0);
        for (i, yi) in y.iter().enumerate().take(self.degree) {
            s -= full.get(0, i + 1) * yi;
        }
        s
    }
}

/// Symmetric band matrix, lower band stored row-wise: `band[i][d] = A(i, i−d)`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, band: vec![0.0; n * (bw + 1)] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Adds to `A(i, j)` (and its mirror). Requires `|i − j| ≤ bw`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        assert!(d <= self.bw);
        self.band[i * (self.bw + 1) + d] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        if d > self.bw {
            0.0
        } else {
            self.band[i * (self.bw + 1) + d]
        }
    }

    /// Drops the first row and column.
    pub fn without_first(&self) -> Self {
        let n = self.n - 1;
        let mut m = Self::zeros(n, self.bw);
        for i in 0..n {
            for d in 0..=self.bw.min(i) {
                m.band[i * (self.bw + 1) + d] = self.get(i + 1, i + 1 - d);
            }
        }
        m
    }

    /// Decouples the first unknown: `A(0, 0) = 1` and the rest of its row
    /// and column zeroed.
    pub fn pin_first(&mut self) {
        let w = self.bw + 1;
        self.band[0] = 1.0;
        for i in 1..=self.bw.min(self.n - 1) {
            self.band[i * w + i] = 0.0;
        }
    }

    pub fn cholesky(&self) -> BandCholesky {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = self.band.clone();
        for i in 0..n {
            for d in (0..=bw.min(i)).rev() {
                let j = i - d;
                let mut s = l[i * w + d];
                // Σ_k L(i,k) L(j,k) for k < j within both bands
                let kmin = i.saturating_sub(bw);
                for k in kmin..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if d == 0 {
                    assert!(s > 0.0, "band matrix is not positive definite");
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + d] = s / l[j * w];
                }
            }
        }
        BandCholesky { n, bw, l }
    }
}

/// `A = L Lᵀ` in band storage.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.l[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// `L(i, i − d)`, zero outside the band.
    pub fn lower(&self, i: usize, d: usize) -> f64 {
        if d > self.bw || d > i {
            0.0
        } else {
            self.l[i * (self.bw + 1) + d]
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
