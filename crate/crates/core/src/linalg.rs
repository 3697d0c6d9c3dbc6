//! Banded symmetric matrices, band Cholesky, a restarted Krylov eigensolver
//! and Sturm-sequence tools for symmetric tridiagonal matrices.

use faer::Mat;

use crate::error::{Error, Result};

/// Symmetric band matrix, upper band stored row by row:
/// `data[i * (bw + 1) + d] = A[i][i + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > self.bw || j >= self.n {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j - i)]
        }
    }

    /// Sets `A[i][j] = A[j][i] = v`; `|i - j|` must not exceed the bandwidth.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j - i <= self.bw && j < self.n, "entry ({i}, {j}) outside the band");
        self.data[i * (self.bw + 1) + (j - i)] = v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let row = &self.data[i * (bw + 1)..(i + 1) * (bw + 1)];
            let mut acc = row[0] * x[i];
            let xi = x[i];
            for d in 1..=bw.min(n - 1 - i) {
                let a = row[d];
                acc += a * x[i + d];
                y[i + d] += a * xi;
            }
            y[i] += acc;
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.n];
        let mut out = vec![0.0; self.n];
        self.matvec(&ones, &mut out);
        out
    }

    /// `D A D` for a diagonal `D`.
    pub fn scaled(&self, d: &[f64]) -> BandedSym {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in 0..=self.bw.min(self.n - 1 - i) {
                out.data[i * (self.bw + 1) + k] *= d[i] * d[i + k];
            }
        }
        out
    }

    /// Principal submatrix on the index range `lo..hi`.
    pub fn principal(&self, lo: usize, hi: usize) -> BandedSym {
        let m = hi - lo;
        let mut out = BandedSym::zeros(m, self.bw);
        for i in 0..m {
            for d in 0..=self.bw.min(m.saturating_sub(1 + i)) {
                out.data[i * (self.bw + 1) + d] = self.get(lo + i, lo + i + d);
            }
        }
        out
    }

    /// Principal submatrix on an arbitrary increasing index set; the result
    /// is dense.
    pub fn principal_dense(&self, idx: &[usize]) -> Mat<f64> {
        Mat::from_fn(idx.len(), idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    pub fn to_dense(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `A - s I`.
    pub fn shifted(&self, s: f64) -> BandedSym {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * (self.bw + 1)] -= s;
        }
        out
    }

    /// `s I - A`.
    pub fn reflected(&self, s: f64) -> BandedSym {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = -*v);
        for i in 0..self.n {
            out.data[i * (self.bw + 1)] += s;
        }
        out
    }

    /// Nonzero entries as `(row, col, value)`, full (both triangles).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..(i + self.bw + 1).min(self.n) {
                let v = self.get(i, j);
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

/// Cholesky factor of a positive definite band matrix, stored as
/// `l[i * (bw + 1) + d] = L[i][i - d]`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &BandedSym) -> Result<Self> {
        let (n, bw) = (a.n, a.bw);
        let mut l = vec![0.0; n * (bw + 1)];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let mut s = a.get(i, j);
                let k0 = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i * (bw + 1) + (i - k)] * l[j * (bw + 1) + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::domain(
                            "band Cholesky",
                            format!("matrix not positive definite at pivot {i} ({s:e})"),
                        ));
                    }
                    l[i * (bw + 1)] = s.sqrt();
                } else {
                    l[i * (bw + 1) + (i - j)] = s / l[j * (bw + 1)];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * (bw + 1) + (i - k)] * b[k];
            }
            b[i] = s / self.l[i * (bw + 1)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * (bw + 1) + (k - i)] * b[k];
            }
            b[i] = s / self.l[i * (bw + 1)];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Deterministic start vector without symmetry in the index.
pub(crate) fn start_vector(n: usize, salt: u64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n as u64)
        .map(|i| {
            let mut z = i.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x632B_E59B_D9B4_E019);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Eigenpairs returned by the iterative solvers, largest value first.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Largest algebraic eigenpairs of a symmetric operator by Krylov-Schur
/// restarted Lanczos with full reorthogonalisation.
pub fn krylov_top<F: FnMut(&[f64], &mut [f64])>(
    n: usize,
    nev: usize,
    mut apply: F,
    tol: f64,
    max_restarts: usize,
) -> Result<EigenPairs> {
    if n == 0 || nev == 0 {
        return Ok(EigenPairs {
            values: vec![],
            vectors: vec![],
            iterations: 0,
        });
    }
    let nev = nev.min(n);
    let m = (2 * nev + 20).max(32).min(n);
    if m <= nev + 1 || n <= 64 {
        // tiny problem: dense is cheaper and exact
        let mut a = Mat::<f64>::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            apply(&e, &mut col);
            for i in 0..n {
                a[(i, j)] = col[i];
            }
        }
        let a = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let (vals, vecs) = dense_eigh(&a)?;
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        for idx in (0..n).rev().take(nev) {
            values.push(vals[idx]);
            vectors.push((0..n).map(|i| vecs[(i, idx)]).collect());
        }
        return Ok(EigenPairs {
            values,
            vectors,
            iterations: n,
        });
    }

    let mut basis: Vec<Vec<f64>> = vec![start_vector(n, 1)];
    let mut hmat = vec![0.0; m * m];
    let mut k = 0usize;
    let mut w = vec![0.0; n];
    let mut matvecs = 0usize;
    let mut salt = 2u64;

    for restart in 0..=max_restarts {
        let mut beta = 0.0;
        for j in k..m {
            apply(&basis[j], &mut w);
            matvecs += 1;
            let mut h = vec![0.0; j + 1];
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate().take(j + 1) {
                    let c = dot(v, &w);
                    h[i] += c;
                    axpy(-c, v, &mut w);
                }
            }
            for i in 0..j {
                if i + 1 < j && i >= k {
                    continue;
                }
                hmat[i * m + j] = h[i];
                hmat[j * m + i] = h[i];
            }
            hmat[j * m + j] = h[j];
            beta = norm(&w);
            let scale = h.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
            if beta < 1e-13 * scale {
                // invariant subspace: continue with a fresh orthogonal direction
                let mut r = start_vector(n, salt);
                salt += 1;
                for _ in 0..2 {
                    for v in basis.iter().take(j + 1) {
                        let c = dot(v, &r);
                        axpy(-c, v, &mut r);
                    }
                }
                let nr = norm(&r);
                r.iter_mut().for_each(|x| *x /= nr);
                w.copy_from_slice(&r);
                beta = 0.0;
                if j + 1 < m {
                    hmat[(j + 1) * m + j] = 0.0;
                    hmat[j * m + j + 1] = 0.0;
                }
                basis.truncate(j + 1);
                basis.push(w.clone());
                continue;
            }
            if j + 1 < m {
                hmat[(j + 1) * m + j] = beta;
                hmat[j * m + j + 1] = beta;
            }
            basis.truncate(j + 1);
            basis.push(w.iter().map(|x| x / beta).collect());
        }

        let hm = Mat::from_fn(m, m, |i, j| 0.5 * (hmat[i * m + j] + hmat[j * m + i]));
        let (theta, y) = dense_eigh(&hm)?;
        // descending order
        let order: Vec<usize> = (0..m).rev().collect();
        let resid = |c: usize| (beta * y[(m - 1, c)]).abs();
        let converged = order
            .iter()
            .take(nev)
            .all(|&c| resid(c) <= tol * theta[c].abs().max(1.0));
        if converged || restart == max_restarts {
            if !converged {
                return Err(Error::NoConvergence {
                    what: "Krylov-Schur eigensolver",
                    iterations: matvecs,
                });
            }
            let mut values = Vec::with_capacity(nev);
            let mut vectors = Vec::with_capacity(nev);
            for &c in order.iter().take(nev) {
                let mut x = vec![0.0; n];
                for (jj, v) in basis.iter().enumerate().take(m) {
                    axpy(y[(jj, c)], v, &mut x);
                }
                let nx = norm(&x);
                x.iter_mut().for_each(|v| *v /= nx);
                values.push(theta[c]);
                vectors.push(x);
            }
            return Ok(EigenPairs {
                values,
                vectors,
                iterations: matvecs,
            });
        }

        // thick restart on the leading Ritz vectors
        let keep = (nev + (m - nev) / 2).min(m - 2);
        let mut new_basis = Vec::with_capacity(m + 1);
        for &c in order.iter().take(keep) {
            let mut x = vec![0.0; n];
            for (jj, v) in basis.iter().enumerate().take(m) {
                axpy(y[(jj, c)], v, &mut x);
            }
            new_basis.push(x);
        }
        new_basis.push(basis[m].clone());
        hmat.iter_mut().for_each(|v| *v = 0.0);
        for (i, &c) in order.iter().take(keep).enumerate() {
            hmat[i * m + i] = theta[c];
            let s = beta * y[(m - 1, c)];
            hmat[i * m + keep] = s;
            hmat[keep * m + i] = s;
        }
        basis = new_basis;
        k = keep;
    }
    unreachable!()
}

/// Eigenvalues in ascending order and eigenvectors as columns.
pub fn dense_eigh(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    let e = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence {
            what: "dense symmetric eigensolver",
            iterations: n,
        })?;
    let s = e.S().column_vector();
    let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let u = e.U().to_owned();
    Ok((vals, u))
}

/// Eigenvalues only, ascending.
pub fn dense_eigvalsh(a: &Mat<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let v = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence {
            what: "dense symmetric eigensolver",
            iterations: n,
        })?;
    Ok(v)
}

/// Eigenpairs of a symmetric band matrix closest to `sigma` from below,
/// `sigma` strictly above the spectrum, by Krylov iteration on
/// `(sigma I - A)^{-1}`.
pub fn top_eigs_shift_invert(a: &BandedSym, sigma: f64, nev: usize) -> Result<EigenPairs> {
    let chol = BandCholesky::factor(&a.reflected(sigma))?;
    let n = a.dim();
    let inv = |x: &[f64], y: &mut [f64]| {
        y.copy_from_slice(x);
        chol.solve(y);
    };
    let pairs = krylov_top(n, nev, inv, 1e-12, 400)?;
    let mut values: Vec<f64> = pairs.values.iter().map(|&th| sigma - 1.0 / th).collect();
    let mut vectors = pairs.vectors;
    // refine each value by its Rayleigh quotient
    let mut av = vec![0.0; n];
    for (val, v) in values.iter_mut().zip(vectors.iter_mut()) {
        a.matvec(v, &mut av);
        *val = dot(v, &av) / dot(v, v);
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let values2 = idx.iter().map(|&i| values[i]).collect();
    let vectors2 = idx.iter().map(|&i| std::mem::take(&mut vectors[i])).collect();
    values = values2;
    vectors = vectors2;
    Ok(EigenPairs {
        values,
        vectors,
        iterations: pairs.iterations,
    })
}

/// `||A v - lambda v||` for a unit vector `v`.
pub fn residual(a: &BandedSym, lambda: f64, v: &[f64]) -> f64 {
    let mut av = vec![0.0; v.len()];
    a.matvec(v, &mut av);
    av.iter()
        .zip(v)
        .map(|(x, y)| (x - lambda * y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.d.len() {
            let qq = if q == 0.0 { f64::EPSILON * (self.e[i - 1].abs() + 1.0) } else { q };
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// All eigenvalues below `upper`, ascending, by bisection.
    pub fn eigenvalues_below(&self, upper: f64) -> Vec<f64> {
        let (lo, hi) = self.gershgorin();
        let upper = upper.min(hi + 1.0);
        let count = self.count_below(upper);
        let scale = lo.abs().max(hi.abs()).max(1.0);
        (0..count)
            .map(|j| {
                let (mut a, mut b) = (lo - 1.0, upper);
                while b - a > 4.0 * f64::EPSILON * scale {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if self.count_below(m) > j {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                0.5 * (a + b)
            })
            .collect()
    }

    /// Unit eigenvector for an accurately known eigenvalue, by inverse
    /// iteration with partial pivoting.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.d.len();
        let shift = lambda + 1e3 * f64::EPSILON * lambda.abs().max(1.0);
        let mut x = start_vector(n, 7);
        for _ in 0..3 {
            x = self.solve_shifted(shift, &x);
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
        }
        x
    }

    /// Solves `(T - s I) x = b` by Gaussian elimination with partial pivoting.
    fn solve_shifted(&self, s: f64, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        // rows hold up to three upper entries after pivoting
        let mut u0: Vec<f64> = self.d.iter().map(|v| v - s).collect();
        let mut u1: Vec<f64> = (0..n).map(|i| if i + 1 < n { self.e[i] } else { 0.0 }).collect();
        let mut u2 = vec![0.0; n];
        let mut rhs = b.to_vec();
        let mut low: Vec<f64> = (0..n).map(|i| if i + 1 < n { self.e[i] } else { 0.0 }).collect();
        for i in 0..n.saturating_sub(1) {
            // candidate rows: i (u0[i], u1[i], u2[i]) and i+1 (low[i], d[i+1]-s, e[i+1])
            let below_diag = low[i];
            let next_d = u0[i + 1];
            let next_e = u1[i + 1];
            if below_diag.abs() > u0[i].abs() {
                // swap rows i and i+1
                let (a0, a1, a2) = (u0[i], u1[i], u2[i]);
                u0[i] = below_diag;
                u1[i] = next_d;
                u2[i] = next_e;
                rhs.swap(i, i + 1);
                let f = a0 / u0[i];
                u0[i + 1] = a1 - f * u1[i];
                u1[i + 1] = a2 - f * u2[i];
                rhs[i + 1] -= f * rhs[i];
            } else {
                let piv = if u0[i] == 0.0 { f64::EPSILON } else { u0[i] };
                u0[i] = piv;
                let f = below_diag / piv;
                u0[i + 1] = next_d - f * u1[i];
                u1[i + 1] = next_e - f * u2[i];
                rhs[i + 1] -= f * rhs[i];
            }
            low[i] = 0.0;
        }
        if u0[n - 1] == 0.0 {
            u0[n - 1] = f64::EPSILON;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = rhs[i];
            if i + 1 < n {
                v -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= u2[i] * x[i + 2];
            }
            x[i] = v / u0[i];
        }
        x
    }
}
