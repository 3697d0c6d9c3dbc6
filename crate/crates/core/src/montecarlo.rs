//! Exact sampling from geodesic balls, walker ensembles on the full surface
//! and total-variation estimates against the stationary measure.
//!
//! Total variation is estimated on the `t`-marginal with bins of width
//! `h / 2` plus two unbounded tail bins. This is a lower bound on the true
//! distance: both marginalising and binning restrict the supremum over sets.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ball_half_width, cusp_raw_offset, BallSlice, CuspProfile};
use crate::operator::{stationary_measure, GridSpec, KernelGeometry, ModeOperator, StationaryMeasure};
use crate::spectral::default_grid;

/// Proposals tried before the sampler gives up. The acceptance probability
/// is bounded below, so hitting this means a bug.
pub const MAX_PROPOSALS: usize = 1_000_000;
const TABLE_T: usize = 65;
const TABLE_PHI: usize = 64;
const WALKER_CHUNK: usize = 64;

/// Half-widths of balls centred in the blend region `0 <= t <= t0 + h`,
/// stored as `beta = alpha / (h sin phi)` with `off = h cos phi`, which
/// removes the square-root zeros at the top and bottom of the ball.
#[derive(Debug, Clone)]
struct WidthTable {
    t_max: f64,
    beta: Vec<f64>,
    /// Bound on the bilinear interpolation error of `beta`.
    margin: f64,
}

impl WidthTable {
    fn phi(j: usize) -> f64 {
        std::f64::consts::PI * (j as f64 + 0.5) / TABLE_PHI as f64
    }

    fn build(profile: &CuspProfile, h: f64) -> Self {
        let t_max = profile.t0() + h;
        let beta: Vec<f64> = (0..TABLE_T)
            .into_par_iter()
            .flat_map_iter(|i| {
                let t = t_max * i as f64 / (TABLE_T - 1) as f64;
                let slice = BallSlice::new(profile, h, t);
                (0..TABLE_PHI)
                    .map(|j| {
                        let phi = Self::phi(j);
                        slice.raw_half_width_offset(h * phi.cos()) / (h * phi.sin())
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let at = |i: usize, j: usize| beta[i * TABLE_PHI + j];
        // a node predicted from its neighbours two spacings apart is off by
        // about four times the error of the full table
        let mut margin: f64 = 0.0;
        for i in 1..TABLE_T - 1 {
            for j in 0..TABLE_PHI {
                margin = margin.max((at(i, j) - 0.5 * (at(i - 1, j) + at(i + 1, j))).abs());
            }
        }
        for i in 0..TABLE_T {
            for j in 1..TABLE_PHI - 1 {
                margin = margin.max((at(i, j) - 0.5 * (at(i, j - 1) + at(i, j + 1))).abs());
            }
        }
        WidthTable {
            t_max,
            beta,
            margin: margin + 1e-10,
        }
    }

    /// Interpolated `beta` at `(t, phi)` with `t >= 0`, or `None` outside
    /// the node hull in `phi`.
    fn beta(&self, t: f64, phi: f64) -> Option<f64> {
        let x = t / self.t_max * (TABLE_T - 1) as f64;
        let z = phi / std::f64::consts::PI * TABLE_PHI as f64 - 0.5;
        if z < 0.0 || z > (TABLE_PHI - 1) as f64 || x > (TABLE_T - 1) as f64 {
            return None;
        }
        let i = (x.floor() as usize).min(TABLE_T - 2);
        let j = (z.floor() as usize).min(TABLE_PHI - 2);
        let (a, b) = (x - i as f64, z - j as f64);
        let v = |ii: usize, jj: usize| self.beta[ii * TABLE_PHI + jj];
        Some(
            (1.0 - a) * ((1.0 - b) * v(i, j) + b * v(i, j + 1))
                + a * ((1.0 - b) * v(i + 1, j) + b * v(i + 1, j + 1)),
        )
    }
}

/// Rejection sampler for the uniform distribution on `B_h(m)` with respect
/// to the Riemannian area.
///
/// Proposals are uniform on `[t - h, t + h] x [-A, A]` with
/// `A = min(h e^{max mu}, ell / 2)`, which contains the ball because a path
/// of length `h` moves `y` by at most `h e^{max mu}`. A proposal is kept
/// with probability `1{|u| <= alpha(t, t')} e^{min mu - mu(t')}`.
#[derive(Debug, Clone)]
pub struct BallSampler {
    profile: CuspProfile,
    h: f64,
    table: WidthTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Membership {
    Inside,
    Outside,
    Unsure,
}

impl BallSampler {
    pub fn new(profile: &CuspProfile, h: f64) -> Result<Self> {
        profile.check_step(h)?;
        Ok(BallSampler {
            profile: *profile,
            h,
            table: WidthTable::build(profile, h),
        })
    }

    pub fn profile(&self) -> &CuspProfile {
        &self.profile
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `mu` is even and non-decreasing in `|t|`.
    fn mu_range(&self, t: f64) -> (f64, f64) {
        let (a, b) = (t - self.h, t + self.h);
        let near = if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
        (self.profile.mu(near), self.profile.mu(a.abs().max(b.abs())))
    }

    fn classify(&self, t: f64, off: f64, u: f64) -> Membership {
        let half = 0.5 * self.profile.ell();
        let h = self.h;
        if self.profile.ball_in_cusp(h, t) {
            let a = cusp_raw_offset(h, t, off).min(half);
            return if u.abs() <= a { Membership::Inside } else { Membership::Outside };
        }
        // the ball at -t is the mirror image of the ball at t
        let (tc, off) = if t >= 0.0 { (t, off) } else { (-t, -off) };
        let c = (off / h).clamp(-1.0, 1.0);
        let phi = c.acos();
        let Some(beta) = self.table.beta(tc, phi) else {
            return Membership::Unsure;
        };
        let s = h * phi.sin();
        let lo = ((beta - self.table.margin) * s).min(half);
        let hi = ((beta + self.table.margin) * s).min(half);
        let u = u.abs();
        if u <= lo {
            Membership::Inside
        } else if u > hi {
            Membership::Outside
        } else {
            Membership::Unsure
        }
    }

    /// One exact draw from `B_h(center)`; `y` is reduced to `[0, ell)`.
    pub fn sample<R: Rng + ?Sized>(&self, center: (f64, f64), rng: &mut R) -> Result<(f64, f64)> {
        let (t, y) = center;
        let h = self.h;
        let ell = self.profile.ell();
        let (mu_min, mu_max) = self.mu_range(t);
        let a = (h * mu_max.exp()).min(0.5 * ell);
        for _ in 0..MAX_PROPOSALS {
            let off = h * (2.0 * rng.random::<f64>() - 1.0);
            let u = a * (2.0 * rng.random::<f64>() - 1.0);
            let v: f64 = rng.random();
            let t2 = t + off;
            if v >= (mu_min - self.profile.mu(t2)).exp() {
                continue;
            }
            let inside = match self.classify(t, off, u) {
                Membership::Inside => true,
                Membership::Outside => false,
                Membership::Unsure => u.abs() <= ball_half_width(&self.profile, h, t, t2)?,
            };
            if inside {
                let mut y2 = (y + u).rem_euclid(ell);
                if y2 >= ell {
                    y2 = 0.0;
                }
                return Ok((t2, y2));
            }
        }
        Err(Error::NoConvergence {
            what: "ball rejection sampler",
            iterations: MAX_PROPOSALS,
        })
    }
}

/// Single draw; builds a [`BallSampler`] each call, so prefer the sampler
/// for repeated use.
pub fn sample_ball<R: Rng + ?Sized>(profile: &CuspProfile, h: f64, center: (f64, f64), rng: &mut R) -> Result<(f64, f64)> {
    BallSampler::new(profile, h)?.sample(center, rng)
}

/// RNG of walker `index`: one ChaCha8 key from `seed`, one stream per walker.
pub fn walker_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Fixed `t` bins of width `h / 2` on `[-T, T]` and two tail bins.
#[derive(Debug, Clone, Serialize)]
pub struct TBins {
    pub half_width: f64,
    pub width: f64,
    inner: usize,
}

impl TBins {
    /// `T` is `t_max` rounded up to a whole number of bins.
    pub fn new(t_max: f64, h: f64) -> Self {
        let width = 0.5 * h;
        let per_side = (t_max / width - 1e-9).ceil().max(1.0) as usize;
        TBins {
            half_width: per_side as f64 * width,
            width,
            inner: 2 * per_side,
        }
    }

    pub fn len(&self) -> usize {
        self.inner + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, t: f64) -> usize {
        if t < -self.half_width {
            0
        } else if t >= self.half_width {
            self.inner + 1
        } else {
            1 + (((t + self.half_width) / self.width) as usize).min(self.inner - 1)
        }
    }

    /// Edges of the bounded bins.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.inner).map(|i| -self.half_width + i as f64 * self.width).collect()
    }

    /// `nu_h` bin masses from grid cell masses. With `with_tails`, the
    /// estimated continuum mass beyond the grid goes to the tail bins.
    pub fn reference(&self, measure: &StationaryMeasure, with_tails: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let scale = if with_tails { 1.0 / (1.0 + measure.tail_mass) } else { 1.0 };
        for (t, m) in measure.t.iter().zip(&measure.masses) {
            out[self.index(*t)] += m * scale;
        }
        if with_tails {
            let tail = 0.5 * measure.tail_mass * scale;
            out[0] += tail;
            out[self.inner + 1] += tail;
        }
        out
    }
}

/// `(1/2) sum |p - q|` over bins.
pub fn tv_lower_bound(empirical: &[f64], reference: &[f64]) -> f64 {
    0.5 * empirical.iter().zip(reference).map(|(p, q)| (p - q).abs()).sum::<f64>()
}

/// Expected binned TV of `N` exact draws from `reference`:
/// `(1/2) sum sqrt(2 p (1 - p) / (pi N))`.
pub fn noise_floor(reference: &[f64], n_walkers: usize) -> f64 {
    let n = n_walkers as f64;
    0.5 * reference
        .iter()
        .map(|p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n)).sqrt())
        .sum::<f64>()
}

/// Walkers after the last step.
#[derive(Debug, Clone, Serialize)]
pub struct WalkerEnsemble {
    pub h: f64,
    pub seed: u64,
    pub steps: usize,
    /// `(t, y)` with `y` in `[0, ell)`.
    pub walkers: Vec<(f64, f64)>,
}

/// Binned `t`-marginal counts after each step `0..=steps`.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleHistory {
    pub ensemble: WalkerEnsemble,
    pub bins: TBins,
    pub counts: Vec<Vec<u64>>,
}

impl EnsembleHistory {
    pub fn n_walkers(&self) -> usize {
        self.ensemble.walkers.len()
    }

    pub fn empirical(&self, step: usize) -> Vec<f64> {
        let n = self.n_walkers() as f64;
        self.counts[step].iter().map(|&c| c as f64 / n).collect()
    }
}

/// Runs one chain per start point. Walker `i` uses stream `i` of `seed`;
/// counts are integers, so the reduction does not depend on scheduling.
pub fn run_walkers(
    sampler: &BallSampler,
    starts: &[(f64, f64)],
    n_steps: usize,
    seed: u64,
    bins: &TBins,
) -> Result<EnsembleHistory> {
    let nb = bins.len();
    let parts: Vec<(Vec<Vec<u64>>, Vec<(f64, f64)>)> = starts
        .par_chunks(WALKER_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut counts = vec![vec![0u64; nb]; n_steps + 1];
            let mut finals = Vec::with_capacity(chunk.len());
            for (k, &start) in chunk.iter().enumerate() {
                let mut rng = walker_rng(seed, (c * WALKER_CHUNK + k) as u64);
                let mut m = start;
                counts[0][bins.index(m.0)] += 1;
                for row in counts.iter_mut().skip(1) {
                    m = sampler.sample(m, &mut rng)?;
                    row[bins.index(m.0)] += 1;
                }
                finals.push(m);
            }
            Ok((counts, finals))
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![vec![0u64; nb]; n_steps + 1];
    let mut walkers = Vec::with_capacity(starts.len());
    for (c, f) in parts {
        for (row, part) in counts.iter_mut().zip(c) {
            row.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
        walkers.extend(f);
    }
    Ok(EnsembleHistory {
        ensemble: WalkerEnsemble {
            h: sampler.h(),
            seed,
            steps: n_steps,
            walkers,
        },
        bins: bins.clone(),
        counts,
    })
}

/// `n_walkers` chains from one start point.
pub fn run_ensemble(
    sampler: &BallSampler,
    start: (f64, f64),
    n_walkers: usize,
    n_steps: usize,
    seed: u64,
    bins: &TBins,
) -> Result<EnsembleHistory> {
    if n_walkers < 1000 {
        return Err(Error::InvalidParameter(format!("{n_walkers} walkers, need at least 1000")));
    }
    run_walkers(sampler, &vec![start; n_walkers], n_steps, seed, bins)
}

/// Start points drawn from the grid version of `nu_h`: a cell by mass, then
/// `t` uniform in the cell and `y` uniform.
pub fn sample_stationary<R: Rng + ?Sized>(measure: &StationaryMeasure, grid: &GridSpec, ell: f64, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let mut cdf = Vec::with_capacity(measure.masses.len());
    let mut acc = 0.0;
    for m in &measure.masses {
        acc += m;
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let x = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
            let t = grid.t_min + (i as f64 + rng.random::<f64>()) * grid.delta;
            (t, rng.random::<f64>() * ell)
        })
        .collect()
}

/// Least-squares decay rate `-d log tv / dn` over the points with
/// `tv > floor`, if at least three remain.
pub fn fit_decay_rate(tv: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = tv
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &v)| v > floor)
        .map(|(n, &v)| (n as f64, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    Some(-num / den)
}

#[derive(Debug, Clone, Serialize)]
pub struct TvReport {
    pub h: f64,
    pub seed: u64,
    pub n_walkers: usize,
    /// Height of the start point.
    pub tau: f64,
    pub edges: Vec<f64>,
    pub tv: Vec<f64>,
    pub noise_floor: f64,
    /// Fitted over the steps with TV above five noise floors.
    pub fitted_rate: Option<f64>,
}

impl TvReport {
    pub fn from_history(history: &EnsembleHistory, reference: &[f64], tau: f64) -> Self {
        let n = history.n_walkers();
        let tv: Vec<f64> = (0..history.counts.len())
            .map(|s| tv_lower_bound(&history.empirical(s), reference))
            .collect();
        let floor = noise_floor(reference, n);
        TvReport {
            h: history.ensemble.h,
            seed: history.ensemble.seed,
            n_walkers: n,
            tau,
            edges: history.bins.edges(),
            fitted_rate: fit_decay_rate(&tv, 5.0 * floor),
            tv,
            noise_floor: floor,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "tv_lower", "noise_floor", "N", "h", "seed"])?;
        for (n, v) in self.tv.iter().enumerate() {
            w.write_record([
                n.to_string(),
                format!("{v:.12e}"),
                format!("{:.12e}", self.noise_floor),
                self.n_walkers.to_string(),
                self.h.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Binned TV of `(M^T)^n x` against the grid masses, for `n = 0..=steps`.
#[derive(Debug, Clone, Serialize)]
pub struct DeterministicCurve {
    pub tv: Vec<f64>,
    /// Fitted over the second half of the steps.
    pub rate: Option<f64>,
}

/// Evolves a `y`-invariant initial law (cell masses) with the `k = 0`
/// operator and tracks its binned distance to `nu_h`.
pub fn deterministic_evolution(op: &ModeOperator, initial: &[f64], n_steps: usize, bins: &TBins) -> Result<DeterministicCurve> {
    if op.k() != 0 {
        return Err(Error::InvalidParameter(format!("mode {} is not the y-invariant channel", op.k())));
    }
    let measure = stationary_measure(op);
    let reference = bins.reference(&measure, false);
    let pts = op.grid().points();
    let binned = |x: &[f64]| {
        let mut out = vec![0.0; bins.len()];
        for (t, m) in pts.iter().zip(x) {
            out[bins.index(*t)] += m;
        }
        out
    };
    let mut x = initial.to_vec();
    let mut tv = Vec::with_capacity(n_steps + 1);
    tv.push(tv_lower_bound(&binned(&x), &reference));
    for _ in 0..n_steps {
        x = op.apply_transpose(&x)?;
        tv.push(tv_lower_bound(&binned(&x), &reference));
    }
    let half = n_steps / 2;
    let rate = fit_decay_rate(&tv[half..], 1e-13).map(|r| r.max(0.0));
    Ok(DeterministicCurve { tv, rate })
}

/// Point mass in the cell containing `t`.
pub fn point_mass(grid: &GridSpec, t: f64) -> Result<Vec<f64>> {
    let i = grid
        .cell_of(t)
        .ok_or_else(|| Error::domain("point_mass", format!("t = {t} is off the grid")))?;
    let mut x = vec![0.0; grid.n];
    x[i] = 1.0;
    Ok(x)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EscapeReport {
    pub h: f64,
    pub n: usize,
    pub start: f64,
    pub n_walkers: usize,
    /// Fraction of walkers above `n h` after `n` steps.
    pub above: f64,
    /// `nu_h(t > n h)`.
    pub nu_above: f64,
    /// `|above - nu_above|`, the witness `1{t > nh} - 1{t < nh}` bound.
    pub tv_lower: f64,
    pub std_error: f64,
}

/// `nu_h(t > a)`: grid masses where the default grid reaches, the closed
/// form `ell^2 sinh h e^{-2a} / Z_h` of the wrapped cusp beyond.
pub fn stationary_mass_above(profile: &CuspProfile, h: f64, a: f64) -> Result<f64> {
    let grid = default_grid(profile, h)?;
    let geom = KernelGeometry::new(profile, h, &grid)?;
    let op = ModeOperator::from_geometry(&geom, 0)?;
    let m = stationary_measure(&op);
    let z = m.z_h * (1.0 + m.tail_mass);
    let ell = profile.ell();
    let closed = |x: f64| ell * ell * h.sinh() * (-2.0 * x).exp() / z;
    if a >= grid.t_max {
        return Ok(closed(a));
    }
    let inside: f64 = m.t.iter().zip(&m.masses).filter(|(t, _)| **t > a).map(|(_, p)| p).sum();
    Ok(inside / (1.0 + m.tail_mass) + closed(grid.t_max))
}

/// Walkers started at height `start` (default `2 n h`), run for `n` steps,
/// tested against the witness set `{t > n h}`.
pub fn escape_experiment(
    sampler: &BallSampler,
    n: usize,
    start: Option<f64>,
    n_walkers: usize,
    seed: u64,
) -> Result<EscapeReport> {
    let h = sampler.h();
    let level = n as f64 * h;
    let start = start.unwrap_or(2.0 * level);
    let bins = TBins::new(start + (n as f64 + 1.0) * h, h);
    let history = run_ensemble(sampler, (start, 0.0), n_walkers, n, seed, &bins)?;
    let above = history.ensemble.walkers.iter().filter(|w| w.0 > level).count() as f64 / n_walkers as f64;
    let nu_above = stationary_mass_above(sampler.profile(), h, level)?;
    Ok(EscapeReport {
        h,
        n,
        start,
        n_walkers,
        above,
        nu_above,
        tv_lower: (above - nu_above).abs(),
        std_error: (above * (1.0 - above) / n_walkers as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_volume, distance_numeric};

    #[test]
    fn profile_is_monotone_in_height() {
        let p = CuspProfile::default();
        for i in 0..=400 {
            let t = 3.0 * i as f64 / 400.0;
            assert!(p.mu1(t) >= 0.0);
            assert!((p.mu(t) - p.mu(-t)).abs() < 1e-15);
        }
    }

    #[test]
    fn table_margin_is_small() {
        let s = BallSampler::new(&CuspProfile::default(), 0.5).unwrap();
        assert!(s.table.margin < 1e-2, "{}", s.table.margin);
    }

    #[test]
    fn squeeze_agrees_with_exact_widths() {
        let p = CuspProfile::new(20.0, 1.0).unwrap();
        let h = 0.4;
        let s = BallSampler::new(&p, h).unwrap();
        let mut rng = walker_rng(3, 0);
        let mut checked = 0;
        while checked < 300 {
            let t = 2.8 * rng.random::<f64>() - 1.4;
            let off = h * (2.0 * rng.random::<f64>() - 1.0);
            let exact = ball_half_width(&p, h, t, t + off).unwrap();
            let u = exact * (0.9 + 0.2 * rng.random::<f64>());
            match s.classify(t, off, u) {
                Membership::Inside => assert!(u <= exact, "t {t} off {off}"),
                Membership::Outside => assert!(u > exact, "t {t} off {off}"),
                Membership::Unsure => {}
            }
            checked += 1;
        }
    }

    #[test]
    fn draws_stay_in_the_ball() {
        let p = CuspProfile::default();
        let s = BallSampler::new(&p, 0.4).unwrap();
        let mut rng = walker_rng(7, 1);
        for center in [(0.2, 0.3), (-0.9, 0.0), (2.5, 0.7)] {
            for _ in 0..25 {
                let q = s.sample(center, &mut rng).unwrap();
                assert!(q.1 >= 0.0 && q.1 < p.ell());
                let d = distance_numeric(&p, center, q, 1e-12).unwrap();
                assert!(d <= 0.4 + 1e-9, "{center:?} -> {q:?}: {d}");
            }
        }
    }

    #[test]
    fn drift_matches_quadrature() {
        let p = CuspProfile::new(20.0, 1.0).unwrap();
        let (h, t) = (0.3, 2.0);
        let s = BallSampler::new(&p, h).unwrap();
        let mut rng = walker_rng(11, 0);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| s.sample((t, 0.0), &mut rng).unwrap().0 - t).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let slice = BallSlice::new(&p, h, t);
        let vol = ball_volume(&p, h, t);
        let exact = slice.integrate(t - h, t + h, |x, a| (x - t) * 2.0 * a * (-p.mu(x)).exp(), 1e-11) / vol;
        assert!((mean - exact).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {exact}");
        assert!(exact < 0.0);
        let half = draws.iter().filter(|d| d.abs() <= 0.5 * h).count() as f64 / n as f64;
        let exact = slice.integrate(t - 0.5 * h, t + 0.5 * h, |x, a| 2.0 * a * (-p.mu(x)).exp(), 1e-11) / vol;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((half - exact).abs() < 3.0 * se, "{half} vs {exact}");
    }

    #[test]
    fn same_seed_same_history() {
        let p = CuspProfile::default();
        let s = BallSampler::new(&p, 0.5).unwrap();
        let bins = TBins::new(4.0, 0.5);
        let a = run_ensemble(&s, (0.5, 0.0), 1000, 5, 42, &bins).unwrap();
        let b = run_ensemble(&s, (0.5, 0.0), 1000, 5, 42, &bins).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.ensemble.walkers, b.ensemble.walkers);
        let c = run_ensemble(&s, (0.5, 0.0), 1000, 5, 43, &bins).unwrap();
        assert_ne!(a.ensemble.walkers, c.ensemble.walkers);
        assert!(run_ensemble(&s, (0.5, 0.0), 10, 5, 42, &bins).is_err());
    }

    #[test]
    fn tv_edge_cases() {
        let p = vec![0.2, 0.3, 0.5];
        assert_eq!(tv_lower_bound(&p, &p), 0.0);
        assert!((tv_lower_bound(&[1.0, 0.0, 0.0], &[0.0, 0.4, 0.6]) - 1.0).abs() < 1e-15);
        assert!((tv_lower_bound(&[0.0, 1.0, 0.0], &p) - 0.7).abs() < 1e-15);
        let bins = TBins::new(1.0, 0.5);
        assert_eq!(bins.len(), 10);
        assert_eq!(bins.index(-5.0), 0);
        assert_eq!(bins.index(1.0), 9);
        assert_eq!(bins.index(0.0), 5);
        assert_eq!(bins.edges().len(), 9);
    }

    #[test]
    fn stationary_start_does_not_move() {
        let p = CuspProfile::default();
        let h = 0.5;
        let grid = default_grid(&p, h).unwrap();
        let geom = KernelGeometry::new(&p, h, &grid).unwrap();
        let op = ModeOperator::from_geometry(&geom, 0).unwrap();
        let bins = TBins::new(grid.t_max, h);
        let m = stationary_measure(&op);
        let curve = deterministic_evolution(&op, &m.masses, 20, &bins).unwrap();
        assert!(curve.tv.iter().all(|&v| v <= m.boundary_defect + 1e-12));
        assert!(deterministic_evolution(&ModeOperator::from_geometry(&geom, 1).unwrap(), &m.masses, 2, &bins).is_err());
    }

    #[test]
    fn decay_rate_of_a_clean_exponential() {
        let tv: Vec<f64> = (0..40).map(|n| 0.7 * (-0.03 * n as f64).exp()).collect();
        assert!((fit_decay_rate(&tv, 0.0).unwrap() - 0.03).abs() < 1e-12);
        assert!(fit_decay_rate(&tv[..2], 0.0).is_none());
    }
}
