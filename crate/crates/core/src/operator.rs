//! Fourier-mode operators `K_{h,k}` discretised on a uniform `t` grid.
//!
//! For a function `f(t) e^{2 pi i k y / ell}` the walk acts on the mode as
//! `(K_{h,k} f)(t) = |B_h(t)|^{-1} int 2 sinc_k(alpha) alpha e^{-mu(t')} f(t') dt'`
//! with `alpha = alpha_h(t, t')`. The kernel density
//! `q(t, t') = 2 sinc_k(alpha) alpha e^{-mu(t) - mu(t')}` is symmetric, so the
//! discretisation keeps a symmetric matrix `G` of cell integrals of `q` and
//! divides by discrete ball volumes `w_i = sum_j G0_ij` (the `k = 0` row sums).
//!
//! Cells are centred at `t_i = t_min + (i + 1/2) delta`. Each row integrates
//! `q(t_i, .)` exactly over every cell meeting the ball (Gauss-Legendre, with
//! a square-root substitution at the ball's top and bottom and splits at the
//! points where the slice starts to wrap), and the two one-sided estimates
//! are averaged. The outermost cell of a row also absorbs the sliver of ball
//! beyond it, so `G_ij = 0` exactly when `|t_i - t_j| > h`. Cells outside the
//! grid are dropped: the truncated walk is renormalised, i.e. reflected.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BallSlice, CuspProfile};
use crate::linalg::{krylov_top, BandedSym};
use crate::quadrature::gauss_legendre_rule;

/// Largest `|t|` for which `e^t` and the closed-form half-widths stay finite
/// with room to spare.
const T_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
    pub delta: f64,
}

impl GridSpec {
    /// Cell-centred grid of spacing `delta` starting at `t_min`; `t_max` is
    /// moved up to the next whole cell.
    pub fn new(t_min: f64, t_max: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) || !(t_max > t_min) {
            return Err(Error::InvalidParameter(format!(
                "grid [{t_min}, {t_max}] with spacing {delta}"
            )));
        }
        let n = ((t_max - t_min) / delta - 1e-9).ceil().max(1.0) as usize;
        Ok(GridSpec {
            t_min,
            t_max: t_min + n as f64 * delta,
            n,
            delta,
        })
    }

    /// Grid on `[-t_max, t_max]`, symmetric about zero.
    pub fn symmetric(t_max: f64, delta: f64) -> Result<Self> {
        let half = (t_max / delta - 1e-9).ceil().max(1.0) * delta;
        GridSpec::new(-half, half, delta)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.t_min + (i as f64 + 0.5) * self.delta
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Cell containing `t`, if any.
    pub fn cell_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_min) / self.delta;
        if x < 0.0 || x >= self.n as f64 {
            None
        } else {
            Some((x as usize).min(self.n - 1))
        }
    }

    /// Number of cells on each side of the diagonal that a ball of radius
    /// `h` reaches.
    pub fn band(&self, h: f64) -> usize {
        (h / self.delta * (1.0 + 1e-12)).floor() as usize
    }
}

/// `sin(x) / x` with `x = 2 pi k alpha / ell`; identically one for `k = 0`.
pub fn sinc_k(k: i64, alpha: f64, ell: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let x = 2.0 * std::f64::consts::PI * k as f64 * alpha / ell;
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Geometric data shared by all Fourier modes on one grid: for every row,
/// quadrature nodes `(alpha(t_i, t'), weight * e^{-mu(t')})` per neighbouring
/// cell.
#[derive(Debug, Clone)]
pub struct KernelGeometry {
    profile: CuspProfile,
    h: f64,
    grid: GridSpec,
    band: usize,
    mu: Vec<f64>,
    /// `offsets[i * (2 band + 1) + (d + band)]` starts the nodes of cell
    /// `i + d` in row `i`.
    offsets: Vec<usize>,
    alpha: Vec<f64>,
    weight: Vec<f64>,
}

struct RowNodes {
    counts: Vec<usize>,
    alpha: Vec<f64>,
    weight: Vec<f64>,
}

impl KernelGeometry {
    pub fn new(profile: &CuspProfile, h: f64, grid: &GridSpec) -> Result<Self> {
        profile.check_step(h)?;
        if grid.delta > h / 8.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing {} does not resolve h = {h} (need delta <= h/8)",
                grid.delta
            )));
        }
        if grid.t_min.abs().max(grid.t_max.abs()) + h > T_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "grid [{}, {}] reaches heights where e^t overflows",
                grid.t_min, grid.t_max
            )));
        }
        let band = grid.band(h);
        let gl4 = gauss_legendre_rule(4);
        let gl8 = gauss_legendre_rule(8);
        let rows: Vec<RowNodes> = (0..grid.n)
            .into_par_iter()
            .map(|i| row_nodes(profile, h, grid, band, i, &gl4, &gl8))
            .collect();
        let width = 2 * band + 1;
        let mut offsets = Vec::with_capacity(grid.n * width + 1);
        let total: usize = rows.iter().map(|r| r.alpha.len()).sum();
        let mut alpha = Vec::with_capacity(total);
        let mut weight = Vec::with_capacity(total);
        for r in rows {
            let mut pos = alpha.len();
            for c in r.counts {
                offsets.push(pos);
                pos += c;
            }
            alpha.extend_from_slice(&r.alpha);
            weight.extend_from_slice(&r.weight);
        }
        offsets.push(alpha.len());
        let mu = grid.points().iter().map(|&t| profile.mu(t)).collect();
        Ok(KernelGeometry {
            profile: *profile,
            h,
            grid: *grid,
            band,
            mu,
            offsets,
            alpha,
            weight,
        })
    }

    pub fn profile(&self) -> &CuspProfile {
        &self.profile
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn band(&self) -> usize {
        self.band
    }

    /// `int_{cell i + d} q_k(t_i, t') dt'` (zero outside the grid).
    fn row_cell_integral(&self, k: i64, i: usize, d: isize) -> f64 {
        let width = 2 * self.band + 1;
        let slot = i * width + (d + self.band as isize) as usize;
        let (a, b) = (self.offsets[slot], self.offsets[slot + 1]);
        let ell = self.profile.ell();
        let mut s = 0.0;
        for m in a..b {
            let al = self.alpha[m];
            s += 2.0 * sinc_k(k, al, ell) * al * self.weight[m];
        }
        s * (-self.mu[i]).exp()
    }

    /// Symmetric cell-integral matrix `G_k`.
    pub fn cell_matrix(&self, k: i64) -> Result<BandedSym> {
        let n = self.grid.n;
        let b = self.band;
        let delta = self.grid.delta;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..=b.min(n - 1 - i))
                    .map(|d| {
                        let j = i + d;
                        let r_ij = self.row_cell_integral(k, i, d as isize);
                        let r_ji = self.row_cell_integral(k, j, -(d as isize));
                        0.5 * delta * (r_ij + r_ji)
                    })
                    .collect()
            })
            .collect();
        let mut g = BandedSym::zeros(n, b);
        for (i, row) in rows.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::domain("kernel assembly", format!("entry ({i}, {}) = {v}", i + d)));
                }
                g.set(i, i + d, v);
            }
        }
        Ok(g)
    }
}

fn row_nodes(
    profile: &CuspProfile,
    h: f64,
    grid: &GridSpec,
    band: usize,
    i: usize,
    gl4: &[(f64, f64)],
    gl8: &[(f64, f64)],
) -> RowNodes {
    let t = grid.point(i);
    let slice = BallSlice::new(profile, h, t);
    let cap = slice.cap_offsets();
    let delta = grid.delta;
    let b = band as isize;
    let mut counts = Vec::with_capacity(2 * band + 1);
    let mut alpha = Vec::new();
    let mut weight = Vec::new();
    // all positions are offsets from t
    for d in -b..=b {
        let j = i as isize + d;
        let before = alpha.len();
        if j >= 0 && (j as usize) < grid.n {
            let lo = if d == -b { -h } else { ((d as f64 - 0.5) * delta).max(-h) };
            let hi = if d == b { h } else { ((d as f64 + 0.5) * delta).min(h) };
            let mut knots = vec![lo];
            if let Some((c0, c1)) = cap {
                for c in [c0, c1] {
                    if c > lo && c < hi {
                        knots.push(c);
                    }
                }
            }
            knots.push(hi);
            let near_end = d.unsigned_abs() + 3 >= band;
            for w in knots.windows(2) {
                let (p, q) = (w[0], w[1]);
                if q <= p {
                    continue;
                }
                let mut push = |off: f64, wt: f64| {
                    alpha.push(slice.half_width_offset(off));
                    weight.push(wt * (-profile.mu(t + off)).exp());
                };
                if q == h {
                    // off = h - u^2
                    let r = (q - p).sqrt();
                    for &(xi, wi) in gl8 {
                        let u = 0.5 * r * (xi + 1.0);
                        push(h - u * u, r * wi * u);
                    }
                } else if p == -h {
                    let r = (q - p).sqrt();
                    for &(xi, wi) in gl8 {
                        let u = 0.5 * r * (xi + 1.0);
                        push(u * u - h, r * wi * u);
                    }
                } else {
                    let rule = if near_end || knots.len() > 2 { gl8 } else { gl4 };
                    let (c, r) = (0.5 * (p + q), 0.5 * (q - p));
                    for &(xi, wi) in rule {
                        push(c + r * xi, r * wi);
                    }
                }
            }
        }
        counts.push(alpha.len() - before);
    }
    RowNodes { counts, alpha, weight }
}

/// Discretised `K_{h,k}`: `M = W^{-1} G_k`, self-adjoint for the weights `w`.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    k: i64,
    h: f64,
    profile: CuspProfile,
    grid: GridSpec,
    g: BandedSym,
    w: Vec<f64>,
    s: BandedSym,
}

impl ModeOperator {
    pub fn from_geometry(geom: &KernelGeometry, k: i64) -> Result<Self> {
        let t_top = geom.grid.t_max.abs().max(geom.grid.t_min.abs());
        let arg = k.unsigned_abs() as f64 * t_top.exp() / geom.profile.ell();
        if !arg.is_finite() || k.unsigned_abs() > 1 << 40 {
            return Err(Error::InvalidParameter(format!(
                "mode k = {k} is not representable up to t = {t_top}"
            )));
        }
        let g0 = geom.cell_matrix(0)?;
        let w = g0.row_sums();
        if let Some(i) = w.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::domain("ball volume", format!("row {i} has weight {}", w[i])));
        }
        let g = if k == 0 { g0 } else { geom.cell_matrix(k)? };
        let inv_sqrt: Vec<f64> = w.iter().map(|v| 1.0 / v.sqrt()).collect();
        let s = g.scaled(&inv_sqrt);
        Ok(ModeOperator {
            k,
            h: geom.h,
            profile: geom.profile,
            grid: geom.grid,
            g,
            w,
            s,
        })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn profile(&self) -> &CuspProfile {
        &self.profile
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.n
    }

    pub fn band(&self) -> usize {
        self.g.bandwidth()
    }

    /// Discrete `|B_h(t_i)| e^{-mu(t_i)} delta`.
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// `W^{-1/2} G W^{-1/2}`.
    pub fn symmetrized(&self) -> &BandedSym {
        &self.s
    }

    pub fn cell_matrix(&self) -> &BandedSym {
        &self.g
    }

    /// `M_ij = G_ij / w_i`.
    pub fn kernel_entry(&self, i: usize, j: usize) -> f64 {
        self.g.get(i, j) / self.w[i]
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.grid.n {
            return Err(Error::Dimension {
                expected: self.grid.n,
                got: f.len(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let mut out = vec![0.0; f.len()];
        self.g.matvec(f, &mut out);
        for (o, w) in out.iter_mut().zip(&self.w) {
            *o /= w;
        }
        Ok(out)
    }

    /// `M^T x`: pushes a vector of masses forward one step.
    pub fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let scaled: Vec<f64> = x.iter().zip(&self.w).map(|(a, w)| a / w).collect();
        let mut out = vec![0.0; x.len()];
        self.g.matvec(&scaled, &mut out);
        Ok(out)
    }

    /// Row sums of `M`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.grid.n]).expect("length matches")
    }

    /// Writes the nonzero entries of `M` as `row col value` lines.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# cuspwalk kernel v1 k={} h={} n={}", self.k, self.h, self.grid.n)?;
        for (i, j, v) in self.g.triplets() {
            writeln!(out, "{i} {j} {:.17e}", v / self.w[i])?;
        }
        Ok(())
    }
}

pub fn assemble_mode_operator(profile: &CuspProfile, h: f64, k: i64, grid: &GridSpec) -> Result<ModeOperator> {
    let geom = KernelGeometry::new(profile, h, grid)?;
    ModeOperator::from_geometry(&geom, k)
}

/// `(K_{h,k} f)(t)` evaluated on the continuous kernel with composite
/// Gauss rules (4 panels of 16 nodes per smooth piece of the ball).
pub fn continuous_action<F: Fn(f64) -> f64>(profile: &CuspProfile, h: f64, k: i64, t: f64, f: F) -> f64 {
    let slice = BallSlice::new(profile, h, t);
    let ell = profile.ell();
    let (mut num, mut vol) = (0.0, 0.0);
    for (off, a, w) in slice.gauss_nodes(4, 16) {
        let x = t + off;
        let m = 2.0 * a * w * (-profile.mu(x)).exp();
        num += sinc_k(k, a, ell) * m * f(x);
        vol += m;
    }
    num / vol
}

/// `sigma(z, xi) = int_{t_-}^{t_+} e^{-(1 + i xi) T} dT` with
/// `t_+- = log(cosh h +- sqrt(sinh^2 h - z^2))`, in closed form.
pub fn symbol_sigma(h: f64, z: f64, xi: f64) -> Result<Complex64> {
    let s = h.sinh();
    if z.abs() > s * (1.0 + 1e-14) {
        return Err(Error::domain("symbol_sigma", format!("|z| = {} exceeds sinh h = {s}", z.abs())));
    }
    let c = h.cosh();
    let w = ((s - z.abs()) * (s + z.abs())).max(0.0).sqrt();
    let a = Complex64::new(1.0, xi);
    let plus = Complex64::from(c + w).powc(a);
    let minus = Complex64::from((1.0 + z * z) / (c + w)).powc(a);
    Ok((plus - minus) / (a * Complex64::from(1.0 + z * z).powc(a)))
}

/// Stationary measure `nu_h` restricted to the grid.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryMeasure {
    pub z_h: f64,
    pub t: Vec<f64>,
    /// Cell masses, summing to one.
    pub masses: Vec<f64>,
    /// Density of the `t`-marginal at the cell centres.
    pub density: Vec<f64>,
    /// Estimated continuum mass beyond the grid, relative to `z_h`.
    pub tail_mass: f64,
    /// Mass of the cells within `h` of either grid end.
    pub boundary_defect: f64,
}

pub fn stationary_measure(op: &ModeOperator) -> StationaryMeasure {
    let grid = op.grid;
    let ell = op.profile.ell();
    let total: f64 = op.w.iter().sum();
    let z_h = ell * total;
    let masses: Vec<f64> = op.w.iter().map(|w| w / total).collect();
    let density = masses.iter().map(|m| m / grid.delta).collect();
    let t = grid.points();
    let h = op.h;
    let boundary_defect = t
        .iter()
        .zip(&masses)
        .filter(|(&ti, _)| ti - grid.t_min < h || grid.t_max - ti < h)
        .map(|(_, m)| m)
        .sum();
    // |B_h(t)| ~ 2 ell sinh h e^{-t} high in the cusps
    let tail = |edge: f64| ell * ell * h.sinh() * (-2.0 * edge.abs()).exp();
    let tail_mass = (tail(grid.t_min) + tail(grid.t_max)) / z_h;
    StationaryMeasure {
        z_h,
        t,
        masses,
        density,
        tail_mass,
        boundary_defect,
    }
}

/// Norms of `d/dt K` and of `e^{mu} (2 pi k / ell) K` on `L^2(e^{-mu} dt)`,
/// and of `K` into the full `H^1` norm built from both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingNorm {
    pub k: i64,
    pub h: f64,
    pub dt: f64,
    pub dy: Option<f64>,
    pub h1: f64,
}

pub fn h1_smoothing_norm(profile: &CuspProfile, h: f64, k: i64, grid: &GridSpec) -> Result<SmoothingNorm> {
    let op = assemble_mode_operator(profile, h, k, grid)?;
    smoothing_norm(&op)
}

pub fn smoothing_norm(op: &ModeOperator) -> Result<SmoothingNorm> {
    let n = op.grid.n;
    let delta = op.grid.delta;
    let r: Vec<f64> = op
        .grid
        .points()
        .iter()
        .map(|&t| ((-op.profile.mu(t)).exp() * delta).sqrt())
        .collect();
    let deriv = |y: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = if i == 0 {
                (y[1] - y[0]) / delta
            } else if i == n - 1 {
                (y[n - 1] - y[n - 2]) / delta
            } else {
                (y[i + 1] - y[i - 1]) / (2.0 * delta)
            };
        }
    };
    let deriv_t = |a: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            if i == 0 {
                out[1] += a[0] / delta;
                out[0] -= a[0] / delta;
            } else if i == n - 1 {
                out[n - 1] += a[i] / delta;
                out[n - 2] -= a[i] / delta;
            } else {
                out[i + 1] += a[i] / (2.0 * delta);
                out[i - 1] -= a[i] / (2.0 * delta);
            }
        }
    };
    // B = R L M R^{-1}, B^T = R^{-1} M^T L^T R for left factors L stacked
    // on top of each other
    type Factor<'a> = (&'a dyn Fn(&[f64], &mut [f64]), &'a dyn Fn(&[f64], &mut [f64]));
    let top_singular = |factors: &[Factor]| -> Result<f64> {
        let apply = |v: &[f64], out: &mut [f64]| {
            let x: Vec<f64> = v.iter().zip(&r).map(|(a, b)| a / b).collect();
            let y = op.apply(&x).expect("length matches");
            let mut acc = vec![0.0; n];
            let mut z = vec![0.0; n];
            let mut tmp = vec![0.0; n];
            for (left, left_t) in factors {
                left(&y, &mut z);
                let a: Vec<f64> = z.iter().zip(&r).map(|(a, b)| a * b * b).collect();
                left_t(&a, &mut tmp);
                acc.iter_mut().zip(&tmp).for_each(|(s, t)| *s += t);
            }
            let c = op.apply_transpose(&acc).expect("length matches");
            for i in 0..n {
                out[i] = c[i] / r[i];
            }
        };
        let pairs = krylov_top(n, 1, apply, 1e-10, 300)?;
        Ok(pairs.values[0].max(0.0).sqrt())
    };
    let ident = |y: &[f64], out: &mut [f64]| out.copy_from_slice(y);
    let dt = top_singular(&[(&deriv, &deriv_t)])?;
    let (dy, h1) = if op.k != 0 {
        let scale: Vec<f64> = op
            .grid
            .points()
            .iter()
            .map(|&t| 2.0 * std::f64::consts::PI * op.k as f64 * op.profile.mu(t).exp() / op.profile.ell())
            .collect();
        let mul = |y: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = scale[i] * y[i];
            }
        };
        let dy = top_singular(&[(&mul, &mul)])?;
        let h1 = top_singular(&[(&ident, &ident), (&deriv, &deriv_t), (&mul, &mul)])?;
        (Some(dy), h1)
    } else {
        (None, top_singular(&[(&ident, &ident), (&deriv, &deriv_t)])?)
    };
    Ok(SmoothingNorm { k: op.k, h: op.h, dt, dy, h1 })
}
