//! Spectra of the mode operators and of the Laplace mode operators.
//!
//! Eigenvalues of `K_{h,k}` are computed from the symmetrised matrix
//! `S = W^{1/2} M W^{-1/2}`, which has the same spectrum as `M` and whose
//! eigenvectors are `W^{1/2}`-weighted versions of those of `M`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{overlap_threshold, CuspProfile};
use crate::linalg::{dense_eigh, dot, krylov_top, residual, top_eigs_shift_invert, BandedSym, Tridiagonal};
use crate::operator::{continuous_action, stationary_measure, GridSpec, KernelGeometry, ModeOperator};
use crate::quadrature::{sinc_min_point, sinc_min_value};

/// Above this dimension the full spectrum is not computed.
pub const DENSE_LIMIT: usize = 4000;
/// Largest accepted eigen-residual `||S v - lambda v||`.
pub const RESIDUAL_BOUND: f64 = 1e-8;
/// Margin around the essential band used when counting.
pub const BAND_MARGIN: f64 = 1e-3;
/// Upper cutoff for Laplace eigenvalues.
pub const LAPLACE_CUTOFF: f64 = 4.0 / 3.0;
/// Shift above the spectrum for the shift-invert solver.
const SHIFT: f64 = 1e-5;

/// `[A h / sinh h, h / sinh h]` with `A = min sin(x)/x`.
pub fn essential_band(h: f64) -> (f64, f64) {
    let r = h / h.sinh();
    (sinc_min_value() * r, r)
}

/// Shortest default truncation. Modes near the top of the band converge
/// like `1 / t_max^2`, which matters once no eigenvalue sits above it.
pub const MIN_TRUNCATION: f64 = 20.0;

/// `max(t_h, t0) + 6`, but at least [`MIN_TRUNCATION`].
pub fn default_truncation(profile: &CuspProfile, h: f64) -> f64 {
    (overlap_threshold(profile, h).max(profile.t0()) + 6.0).max(MIN_TRUNCATION)
}

/// Grid used by the scans: symmetric out to [`default_truncation`], with
/// `delta = h / 8`.
pub fn default_grid(profile: &CuspProfile, h: f64) -> Result<GridSpec> {
    GridSpec::symmetric(default_truncation(profile, h), h / 8.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub k: i64,
    pub h: f64,
    /// Descending. The full spectrum when `complete`, else the leading part.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors of `S` for the leading eigenvalues.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// `||S v - lambda v||` for each returned eigenvector.
    pub residuals: Vec<f64>,
    pub complete: bool,
    pub gap_contribution: f64,
    pub band: (f64, f64),
    pub inside_band: usize,
    pub above_band: usize,
}

impl SpectrumResult {
    fn new(op: &ModeOperator, eigenvalues: Vec<f64>, eigenvectors: Vec<Vec<f64>>, complete: bool) -> Result<Self> {
        let s = op.symmetrized();
        let residuals: Vec<f64> = eigenvalues
            .iter()
            .zip(&eigenvectors)
            .map(|(&l, v)| residual(s, l, v))
            .collect();
        if let Some(r) = residuals.iter().find(|&&r| !(r <= RESIDUAL_BOUND)) {
            return Err(Error::domain(
                "eigenpair residual",
                format!("{r:e} exceeds {RESIDUAL_BOUND:e}"),
            ));
        }
        let idx = if op.k() == 0 { 1 } else { 0 };
        let gap_contribution = 1.0 - eigenvalues.get(idx).copied().unwrap_or(0.0);
        let band = essential_band(op.h());
        let (lo, hi) = (band.0 - BAND_MARGIN, band.1 + BAND_MARGIN);
        let inside_band = eigenvalues.iter().filter(|&&l| l >= lo && l <= hi).count();
        let above_band = eigenvalues.iter().filter(|&&l| l > hi).count();
        Ok(SpectrumResult {
            k: op.k(),
            h: op.h(),
            eigenvalues,
            eigenvectors,
            residuals,
            complete,
            gap_contribution,
            band,
            inside_band,
            above_band,
        })
    }

    pub fn top(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn bottom(&self) -> Option<f64> {
        self.complete.then(|| *self.eigenvalues.last().unwrap())
    }

    /// One row per eigenvalue: `k,h,index,value,residual` (empty residual
    /// where no vector was kept).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "h", "index", "value", "residual"])?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            let r = self.residuals.get(i).map(|r| format!("{r:e}")).unwrap_or_default();
            w.write_record([self.k.to_string(), self.h.to_string(), i.to_string(), format!("{l:.15e}"), r])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full spectrum (dense) up to [`DENSE_LIMIT`], otherwise the `n_eigs`
/// leading eigenvalues by shift-invert Krylov iteration. Eigenvectors are
/// kept for the `n_eigs` leading values.
pub fn spectrum_of_mode(op: &ModeOperator, n_eigs: usize) -> Result<SpectrumResult> {
    let n = op.dim();
    if n > DENSE_LIMIT {
        return leading_spectrum(op, n_eigs);
    }
    let (vals, vecs) = dense_eigh(&op.symmetrized().to_dense())?;
    let eigenvalues: Vec<f64> = vals.iter().rev().copied().collect();
    let eigenvectors = (0..n_eigs.min(n))
        .map(|c| {
            let col = n - 1 - c;
            (0..n).map(|i| vecs[(i, col)]).collect()
        })
        .collect();
    SpectrumResult::new(op, eigenvalues, eigenvectors, true)
}

/// The `n_eigs` leading eigenpairs by shift-invert Krylov iteration.
pub fn leading_spectrum(op: &ModeOperator, n_eigs: usize) -> Result<SpectrumResult> {
    let pairs = top_eigs_shift_invert(op.symmetrized(), 1.0 + SHIFT, n_eigs.max(1))?;
    SpectrumResult::new(op, pairs.values, pairs.vectors, false)
}

/// Spectral norm of the principal block of `S` on `|t| >= tau`.
pub fn restricted_norm(op: &ModeOperator, tau: f64) -> Result<f64> {
    let pts = op.grid().points();
    let s = op.symmetrized();
    let mut best: f64 = 0.0;
    let upper: Vec<usize> = (0..pts.len()).filter(|&i| pts[i] >= tau).collect();
    let lower: Vec<usize> = (0..pts.len()).filter(|&i| pts[i] <= -tau).collect();
    for idx in [upper, lower] {
        if idx.is_empty() {
            continue;
        }
        let block = s.principal(idx[0], idx[idx.len() - 1] + 1);
        best = best.max(block_norm(&block)?);
    }
    Ok(best)
}

fn block_norm(a: &BandedSym) -> Result<f64> {
    let n = a.dim();
    let top = krylov_top(n, 1, |x, y| a.matvec(x, y), 1e-10, 500)?.values[0];
    let bottom = krylov_top(
        n,
        1,
        |x, y| {
            a.matvec(x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        },
        1e-10,
        500,
    )?
    .values[0];
    Ok(top.abs().max(bottom.abs()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OccupancyRow {
    pub t_max: f64,
    pub dim: usize,
    pub inside: usize,
    pub above: usize,
    pub below: usize,
}

/// Counts of `k = 0` eigenvalues inside and above the essential band for
/// each truncation at spacing `delta`.
pub fn essential_band_occupancy(profile: &CuspProfile, h: f64, delta: f64, t_max: &[f64]) -> Result<Vec<OccupancyRow>> {
    t_max
        .iter()
        .map(|&tm| {
            let grid = GridSpec::symmetric(tm, delta)?;
            let geom = KernelGeometry::new(profile, h, &grid)?;
            let op = ModeOperator::from_geometry(&geom, 0)?;
            if op.dim() > DENSE_LIMIT {
                return Err(Error::InvalidParameter(format!(
                    "t_max = {tm} needs {} grid cells, above the dense limit {DENSE_LIMIT}",
                    op.dim()
                )));
            }
            let spec = spectrum_of_mode(&op, 1)?;
            let lo = spec.band.0 - BAND_MARGIN;
            Ok(OccupancyRow {
                t_max: tm,
                dim: op.dim(),
                inside: spec.inside_band,
                above: spec.above_band,
                below: spec.eigenvalues.iter().filter(|&&l| l < lo).count(),
            })
        })
        .collect()
}

/// `sin(lambda h) / (lambda sinh h)`, the cusp multiplier.
pub fn band_multiplier(h: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        h / h.sinh()
    } else {
        (lambda * h).sin() / (lambda * h.sinh())
    }
}

/// `lambda` at which the multiplier reaches the bottom of the band.
pub fn band_bottom_frequency(h: f64) -> f64 {
    sinc_min_point() / h
}

/// Relative residual of `2^{-n/2} e^{i lambda t} 1_{[2^n, 2^{n+1}]}` for
/// `K_{h,0} - sin(lambda h)/(lambda sinh h)`, measured in the symmetrised
/// coordinates where the walk high in the cusp acts on `L^2(dt)`.
pub fn weyl_residual(profile: &CuspProfile, h: f64, lambda: f64, n: u32, delta: f64) -> Result<f64> {
    if lambda != 0.0 && delta > 0.1 / lambda.abs() {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} does not resolve the frequency {lambda} (need delta <= {})",
            0.1 / lambda.abs()
        )));
    }
    let a = 2f64.powi(n as i32);
    let b = 2.0 * a;
    // room so that rows touching the support never see the truncation
    let grid = GridSpec::new(a - 3.0 * h, b + 3.0 * h, delta)?;
    let geom = KernelGeometry::new(profile, h, &grid)?;
    let op = ModeOperator::from_geometry(&geom, 0)?;
    let s = op.symmetrized();
    let m = band_multiplier(h, lambda);
    let scale = a.powf(-0.5) * delta.sqrt();
    let pts = grid.points();
    let mut num = 0.0;
    let mut den = 0.0;
    for part in [f64::cos, f64::sin] {
        let x: Vec<f64> = pts
            .iter()
            .map(|&t| if (a..=b).contains(&t) { scale * part(lambda * t) } else { 0.0 })
            .collect();
        let mut y = vec![0.0; x.len()];
        s.matvec(&x, &mut y);
        num += y.iter().zip(&x).map(|(yi, xi)| (yi - m * xi).powi(2)).sum::<f64>();
        den += dot(&x, &x);
    }
    Ok((num / den).sqrt())
}

/// Eigen-data of `P_k = -d^2/dt^2 + V_k` on a truncated interval.
#[derive(Debug, Clone, Serialize)]
pub struct LaplaceModeResult {
    pub k: i64,
    /// Interior vertices.
    pub t: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Eigenfunctions `f = e^{mu/2} u`, normalised in `L^2(e^{-mu} dt)`.
    #[serde(skip)]
    pub eigenfunctions: Vec<Vec<f64>>,
    pub threshold: f64,
}

impl LaplaceModeResult {
    /// Eigenfunction `j` as an interpolating function (zero outside).
    pub fn mode(&self, j: usize) -> ModeFunction {
        ModeFunction {
            t0: self.t[0],
            delta: self.t[1] - self.t[0],
            values: self.eigenfunctions[j].clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "index", "value"])?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            w.write_record([self.k.to_string(), i.to_string(), format!("{l:.15e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Potential `mu'^2/4 - mu''/2 + (2 pi k / ell)^2 e^{2 mu}` of the
/// conjugated mode operator.
pub fn mode_potential(profile: &CuspProfile, k: i64, t: f64) -> f64 {
    let m1 = profile.mu1(t);
    let c = 2.0 * std::f64::consts::PI * k as f64 / profile.ell();
    0.25 * m1 * m1 - 0.5 * profile.mu2(t) + c * c * (2.0 * profile.mu(t)).exp()
}

/// Second-order finite differences on the vertices of `grid` (spacing
/// `grid.delta`) with Dirichlet ends; eigenvalues below 4/3.
pub fn laplace_mode_eigs(profile: &CuspProfile, k: i64, grid: &GridSpec) -> Result<LaplaceModeResult> {
    let delta = grid.delta;
    let n = ((grid.t_max - grid.t_min) / delta).round() as usize;
    if n < 3 {
        return Err(Error::InvalidParameter("Laplace grid needs at least two interior vertices".into()));
    }
    let t: Vec<f64> = (1..n).map(|i| grid.t_min + i as f64 * delta).collect();
    let inv = 1.0 / (delta * delta);
    let d: Vec<f64> = t.iter().map(|&x| 2.0 * inv + mode_potential(profile, k, x)).collect();
    let e = vec![-inv; t.len() - 1];
    let tri = Tridiagonal { d, e };
    let eigenvalues = tri.eigenvalues_below(LAPLACE_CUTOFF);
    let eigenfunctions = eigenvalues
        .par_iter()
        .map(|&l| {
            let u = tri.eigenvector(l);
            let mut f: Vec<f64> = u.iter().zip(&t).map(|(ui, &x)| ui * (0.5 * profile.mu(x)).exp()).collect();
            // unit norm in L^2(e^{-mu} dt), positive where largest
            let nrm = (u.iter().map(|v| v * v).sum::<f64>() * delta).sqrt();
            let big = f.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            let sign = if big < 0.0 { -1.0 } else { 1.0 };
            f.iter_mut().for_each(|v| *v *= sign / nrm);
            f
        })
        .collect();
    Ok(LaplaceModeResult {
        k,
        t,
        eigenvalues,
        eigenfunctions,
        threshold: 0.25,
    })
}

/// Eigenvalue `j` (counting from zero) of the same Dirichlet problem by
/// Prüfer-angle shooting: `theta' = cos^2 + (lambda - V) sin^2`, with
/// `theta(t_max) = (j + 1) pi` at an eigenvalue.
pub fn prufer_eigenvalue(profile: &CuspProfile, k: i64, t_min: f64, t_max: f64, j: usize) -> Result<f64> {
    let angle = |lambda: f64| -> f64 {
        let f = |x: f64, th: f64| {
            let (s, c) = th.sin_cos();
            c * c + (lambda - mode_potential(profile, k, x)) * s * s
        };
        let mut x = t_min;
        let mut th = 0.0;
        while x < t_max {
            let stiff = (mode_potential(profile, k, x) - lambda).abs() + 1.0;
            let step = (1e-3f64).min(0.5 / stiff).min(t_max - x);
            let k1 = f(x, th);
            let k2 = f(x + 0.5 * step, th + 0.5 * step * k1);
            let k3 = f(x + 0.5 * step, th + 0.5 * step * k2);
            let k4 = f(x + step, th + step * k3);
            th += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x += step;
        }
        th
    };
    let target = (j as f64 + 1.0) * std::f64::consts::PI;
    // theta(t_max) increases with lambda; below min V it stays under pi
    let samples = ((t_max - t_min) / 1e-2).ceil() as usize;
    let v_min = (0..=samples)
        .map(|i| mode_potential(profile, k, (t_min + i as f64 * 1e-2).min(t_max)))
        .fold(f64::MAX, f64::min);
    let mut lo = v_min - 1.0;
    let mut hi = lo + 1.0;
    let mut tries = 0;
    while angle(hi) < target {
        hi = lo + 2.0 * (hi - lo);
        tries += 1;
        if tries > 60 {
            return Err(Error::NoConvergence {
                what: "Prufer bracket",
                iterations: tries,
            });
        }
    }
    while hi - lo > 1e-12 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if angle(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A sampled mode on a uniform vertex grid, interpolated by local cubics and
/// zero outside.
#[derive(Debug, Clone)]
pub struct ModeFunction {
    pub t0: f64,
    pub delta: f64,
    pub values: Vec<f64>,
}

impl ModeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = (t - self.t0) / self.delta;
        if x < -1.0 || x > n as f64 {
            return 0.0;
        }
        let get = |i: isize| {
            if i < 0 || i >= n as isize {
                0.0
            } else {
                self.values[i as usize]
            }
        };
        let i = (x.floor() as isize).clamp(0, n as isize - 2);
        let s = x - i as f64;
        let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
        // cubic Lagrange through i-1..i+2
        -s * (s - 1.0) * (s - 2.0) / 6.0 * p0 + (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0 * p1
            - (s + 1.0) * s * (s - 2.0) / 2.0 * p2
            + (s + 1.0) * s * (s - 1.0) / 6.0 * p3
    }

    pub fn support(&self) -> (f64, f64) {
        (self.t0 - self.delta, self.t0 + self.values.len() as f64 * self.delta)
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// `||K_{h,k} psi - (1 - lambda h^2 / 8) psi||` in `L^2(e^{-mu} dt)`, with
/// the continuous kernel evaluated by quadrature on a composite Simpson
/// grid of spacing `h / 16`.
pub fn quasimode_residual(profile: &CuspProfile, h: f64, k: i64, psi: &ModeFunction, lambda: f64) -> Result<f64> {
    profile.check_step(h)?;
    let (a, b) = psi.support();
    let (a, b) = (a - h, b + h);
    let cells = (((b - a) / (h / 16.0)).ceil() as usize).max(2);
    let cells = cells + cells % 2;
    let step = (b - a) / cells as f64;
    let floor = 1e-15 * psi.max_abs();
    let target = 1.0 - lambda * h * h / 8.0;
    let terms: Vec<f64> = (0..=cells)
        .into_par_iter()
        .map(|i| {
            let t = a + i as f64 * step;
            // nothing to resolve where psi vanishes on the whole ball
            let quiet = (-16..=16).all(|m| psi.eval(t + h * m as f64 / 16.0).abs() <= floor);
            if quiet {
                return 0.0;
            }
            let r = continuous_action(profile, h, k, t, |x| psi.eval(x)) - target * psi.eval(t);
            let wgt = if i == 0 || i == cells {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            wgt * r * r * (-profile.mu(t)).exp()
        })
        .collect();
    Ok((terms.iter().sum::<f64>() * step / 3.0).sqrt())
}

/// Eigenvalue of the discrete `K_{h,k}` nearest `target` at spacings `h/8`
/// and `h/16`, and their Richardson extrapolation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NearestEigenvalue {
    pub coarse: f64,
    pub fine: f64,
    pub extrapolated: f64,
}

pub fn nearest_eigenvalue(profile: &CuspProfile, h: f64, k: i64, t_max: f64, target: f64) -> Result<NearestEigenvalue> {
    let solve = |delta: f64| -> Result<f64> {
        let grid = GridSpec::symmetric(t_max, delta)?;
        let geom = KernelGeometry::new(profile, h, &grid)?;
        let op = ModeOperator::from_geometry(&geom, k)?;
        let spec = leading_spectrum(&op, 6)?;
        Ok(spec
            .eigenvalues
            .iter()
            .copied()
            .min_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()))
            .unwrap())
    };
    let coarse = solve(h / 8.0)?;
    let fine = solve(h / 16.0)?;
    Ok(NearestEigenvalue {
        coarse,
        fine,
        extrapolated: (4.0 * fine - coarse) / 3.0,
    })
}

/// Gap over the modes `0..=k_max` at one step size.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub h: f64,
    pub gap: f64,
    /// `(k, 1 - lambda)` with `lambda` the second eigenvalue for `k = 0` and
    /// the top one otherwise.
    pub contributions: Vec<(i64, f64)>,
    /// Mode attaining the minimum.
    pub argmin: i64,
    /// First `k >= 1` whose contribution exceeds that of `k = 0`.
    pub crossover: Option<i64>,
    /// Every mode from the crossover up to `k_max` contributes more than
    /// `k = 0`.
    pub tail_dominated: bool,
    /// Top `k = 0` eigenvalue.
    pub top: f64,
    /// Smallest eigenvalue seen over all modes (full spectra only).
    pub bottom: Option<f64>,
    pub boundary_defect: f64,
    pub tol: f64,
}

/// Options for [`spectral_gap_on`].
#[derive(Debug, Clone, Copy)]
pub struct GapOptions {
    pub k_max: i64,
    /// Also compute full spectra to report the bottom of the spectrum.
    pub with_bottom: bool,
}

pub fn spectral_gap(profile: &CuspProfile, h: f64, k_max: i64) -> Result<GapReport> {
    let grid = default_grid(profile, h)?;
    spectral_gap_on(profile, h, &grid, GapOptions { k_max, with_bottom: false })
}

pub fn spectral_gap_on(profile: &CuspProfile, h: f64, grid: &GridSpec, opts: GapOptions) -> Result<GapReport> {
    if opts.k_max < 1 {
        return Err(Error::InvalidParameter(format!("k_max = {} must be at least 1", opts.k_max)));
    }
    let geom = KernelGeometry::new(profile, h, grid)?;
    let results: Vec<(i64, f64, f64, Option<f64>, f64)> = (0..=opts.k_max)
        .into_par_iter()
        .map(|k| {
            let op = ModeOperator::from_geometry(&geom, k)?;
            let lead = leading_spectrum(&op, 2)?;
            let bottom = if opts.with_bottom { Some(bottom_eigenvalue(&op)?) } else { None };
            let defect = if k == 0 { stationary_measure(&op).boundary_defect } else { 0.0 };
            Ok((k, lead.gap_contribution, lead.top(), bottom, defect))
        })
        .collect::<Result<_>>()?;
    let contributions: Vec<(i64, f64)> = results.iter().map(|r| (r.0, r.1)).collect();
    let (argmin, gap) = contributions
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let g0 = contributions[0].1;
    let crossover = contributions.iter().skip(1).find(|c| c.1 > g0).map(|c| c.0);
    let tail_dominated = match crossover {
        Some(kc) => contributions.iter().filter(|c| c.0 >= kc).all(|c| c.1 > g0),
        None => false,
    };
    let bottom = if opts.with_bottom {
        results.iter().filter_map(|r| r.3).reduce(f64::min)
    } else {
        None
    };
    let boundary_defect = results[0].4;
    let tol = boundary_defect.max(10.0 * (grid.delta / h).powi(2));
    Ok(GapReport {
        h,
        gap,
        contributions,
        argmin,
        crossover,
        tail_dominated,
        top: results[0].2,
        bottom,
        boundary_defect,
        tol,
    })
}

/// Smallest eigenvalue of `S`, by Krylov iteration on `-S`.
pub fn bottom_eigenvalue(op: &ModeOperator) -> Result<f64> {
    let s = op.symmetrized();
    let pairs = krylov_top(
        op.dim(),
        1,
        |x, y| {
            s.matvec(x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        },
        1e-10,
        2000,
    )?;
    Ok(-pairs.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_op(k: i64) -> ModeOperator {
        let p = CuspProfile::default();
        let grid = GridSpec::symmetric(3.0, 0.05).unwrap();
        let geom = KernelGeometry::new(&p, 0.4, &grid).unwrap();
        ModeOperator::from_geometry(&geom, k).unwrap()
    }

    #[test]
    fn band_endpoints() {
        assert!((sinc_min_value() + 0.217_233_628_211_221_7).abs() < 1e-12);
        assert!((sinc_min_point() - 4.493_409_457_909_064).abs() < 1e-12);
        let (lo, hi) = essential_band(0.5);
        assert!((hi - 0.959_517_7).abs() < 1e-6);
        assert!((lo - sinc_min_value() * hi).abs() < 1e-15);
        assert!((band_multiplier(0.5, band_bottom_frequency(0.5)) - lo).abs() < 1e-12);
        assert!((band_multiplier(0.5, 1e-9) - hi).abs() < 1e-12);
    }

    #[test]
    fn top_is_one_and_solvers_agree() {
        let op = small_op(0);
        let full = spectrum_of_mode(&op, 4).unwrap();
        assert!(full.complete);
        assert!((full.top() - 1.0).abs() < 1e-10);
        let lead = leading_spectrum(&op, 3).unwrap();
        for i in 0..3 {
            assert!((full.eigenvalues[i] - lead.eigenvalues[i]).abs() < 1e-9);
        }
        assert!((full.gap_contribution - lead.gap_contribution).abs() < 1e-9);
        assert!(full.residuals.iter().all(|&r| r <= RESIDUAL_BOUND));
        assert!(full.bottom().unwrap() >= -1.0);
        assert!((bottom_eigenvalue(&op).unwrap() - full.bottom().unwrap()).abs() < 1e-7);
    }

    #[test]
    fn nonzero_modes_contract() {
        let op = small_op(2);
        let lead = leading_spectrum(&op, 1).unwrap();
        assert!(lead.top() < 1.0);
        assert!((lead.gap_contribution - (1.0 - lead.top())).abs() < 1e-15);
    }

    #[test]
    fn restricted_norm_shrinks_with_the_block() {
        let op = small_op(0);
        let full = spectrum_of_mode(&op, 1).unwrap();
        let a = restricted_norm(&op, 0.5).unwrap();
        let b = restricted_norm(&op, 1.5).unwrap();
        assert!(b <= a + 1e-12);
        assert!(a <= full.top() + 1e-12);
    }

    #[test]
    fn constant_wave_sits_at_the_band_top() {
        let p = CuspProfile::default();
        let r2 = weyl_residual(&p, 0.4, 0.0, 2, 0.05).unwrap();
        let r4 = weyl_residual(&p, 0.4, 0.0, 4, 0.05).unwrap();
        assert!(r4 < r2);
        assert!(r4 < 0.1);
        assert!(weyl_residual(&p, 0.4, 10.0, 2, 0.05).is_err());
    }

    #[test]
    fn laplace_ground_state_and_prufer() {
        let p = CuspProfile::default();
        let grid = GridSpec::new(-10.0, 10.0, 0.01).unwrap();
        let res = laplace_mode_eigs(&p, 0, &grid).unwrap();
        assert!(res.eigenvalues[0].abs() < 1e-3);
        let shoot = prufer_eigenvalue(&p, 0, grid.t_min, grid.t_max, 0).unwrap();
        assert!((shoot - res.eigenvalues[0]).abs() < 1e-4);
        let p = CuspProfile::new(20.0, 1.0).unwrap();
        let grid = GridSpec::new(-5.0, 5.0, 0.005).unwrap();
        let res = laplace_mode_eigs(&p, 1, &grid).unwrap();
        let shoot = prufer_eigenvalue(&p, 1, -5.0, 5.0, 0).unwrap();
        assert!((shoot - res.eigenvalues[0]).abs() < 1e-5);
        assert!(res.eigenvalues[0] > 0.25 && res.eigenvalues[0] < LAPLACE_CUTOFF);
    }

    #[test]
    fn mode_function_interpolates_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.25 * t * t * t;
        let m = ModeFunction {
            t0: -1.0,
            delta: 0.1,
            values: (0..21).map(|i| f(-1.0 + 0.1 * i as f64)).collect(),
        };
        for t in [-0.83, -0.05, 0.0, 0.37, 0.85] {
            assert!((m.eval(t) - f(t)).abs() < 1e-12, "t = {t}");
        }
        assert_eq!(m.eval(1.5), 0.0);
    }

    #[test]
    fn gap_report_is_consistent() {
        let p = CuspProfile::default();
        let grid = GridSpec::symmetric(4.0, 0.05).unwrap();
        let r = spectral_gap_on(&p, 0.4, &grid, GapOptions { k_max: 3, with_bottom: false }).unwrap();
        assert!((r.top - 1.0).abs() < 1e-10);
        assert_eq!(r.contributions.len(), 4);
        let min = r.contributions.iter().map(|c| c.1).fold(f64::MAX, f64::min);
        assert_eq!(r.gap, min);
        assert!(r.gap > 0.0);
        assert!(spectral_gap_on(&p, 0.4, &grid, GapOptions { k_max: 0, with_bottom: false }).is_err());
    }
}
