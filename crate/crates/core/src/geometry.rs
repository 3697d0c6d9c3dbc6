//! Geometry of the two-cusp surface of revolution
//! `W = R_t x (R / ell Z)_y` with metric `dt^2 + exp(-2 mu(t)) dy^2`.
//!
//! The warp `mu` equals `|t|` outside `[-t0, t0]` and is an even polynomial
//! blend inside, matched to second order at `+-t0`. Where a geodesic ball
//! lies entirely in `|t| >= t0` the half-width of its horizontal slices has a
//! closed form; elsewhere it is obtained by geodesic shooting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_rule, golden_max, illinois, integrate_sqrt_ends_abs, solve_dense};

/// Fixed RK4 steps per geodesic of length `h`.
pub const SHOOT_STEPS: usize = 50;
const SPHERE_NODES: usize = 32;
const THETA_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileParams", into = "ProfileParams")]
pub struct CuspProfile {
    ell: f64,
    t0: f64,
    /// `mu(t) = t0 * (c[0] s^2 + c[1] s^4 + c[2] s^6)` with `s = t / t0`.
    blend: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileParams {
    #[serde(default = "default_ell")]
    pub ell: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
}

fn default_ell() -> f64 {
    1.0
}
fn default_t0() -> f64 {
    1.0
}

impl TryFrom<ProfileParams> for CuspProfile {
    type Error = Error;
    fn try_from(p: ProfileParams) -> Result<Self> {
        CuspProfile::new(p.ell, p.t0)
    }
}

impl From<CuspProfile> for ProfileParams {
    fn from(p: CuspProfile) -> Self {
        ProfileParams { ell: p.ell, t0: p.t0 }
    }
}

impl Default for CuspProfile {
    fn default() -> Self {
        CuspProfile::new(1.0, 1.0).expect("default profile is valid")
    }
}

/// Coefficients of the even sextic `c0 s^2 + c1 s^4 + c2 s^6` whose value,
/// slope and curvature match those of `s` at `s = 1`.
fn blend_coefficients() -> Result<[f64; 3]> {
    let a = vec![
        vec![1.0, 1.0, 1.0],
        vec![2.0, 4.0, 6.0],
        vec![2.0, 12.0, 30.0],
    ];
    let c = solve_dense(a, vec![1.0, 1.0, 0.0])?;
    Ok([c[0], c[1], c[2]])
}

impl CuspProfile {
    pub fn new(ell: f64, t0: f64) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidParameter(format!("ell must be positive, got {ell}")));
        }
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::InvalidParameter(format!("t0 must be positive, got {t0}")));
        }
        Ok(CuspProfile {
            ell,
            t0,
            blend: blend_coefficients()?,
        })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn blend_coeffs(&self) -> [f64; 3] {
        self.blend
    }

    pub fn mu(&self, t: f64) -> f64 {
        let a = t.abs();
        if a >= self.t0 {
            return a;
        }
        let s2 = (a / self.t0).powi(2);
        let [c0, c1, c2] = self.blend;
        self.t0 * s2 * (c0 + s2 * (c1 + s2 * c2))
    }

    pub fn mu1(&self, t: f64) -> f64 {
        let a = t.abs();
        if a >= self.t0 {
            return t.signum();
        }
        let s = t / self.t0;
        let s2 = s * s;
        let [c0, c1, c2] = self.blend;
        s * (2.0 * c0 + s2 * (4.0 * c1 + s2 * 6.0 * c2))
    }

    pub fn mu2(&self, t: f64) -> f64 {
        let a = t.abs();
        if a >= self.t0 {
            return 0.0;
        }
        let s2 = (a / self.t0).powi(2);
        let [c0, c1, c2] = self.blend;
        (2.0 * c0 + s2 * (12.0 * c1 + s2 * 30.0 * c2)) / self.t0
    }

    /// Gaussian curvature `mu'' - mu'^2` of the warped metric.
    pub fn curvature(&self, t: f64) -> f64 {
        self.mu2(t) - self.mu1(t).powi(2)
    }

    /// Largest constant `c0` with `exp(-mu(t)) >= c0 exp(-|t|)` everywhere.
    pub fn density_floor(&self) -> f64 {
        let n = 2000;
        let worst = (0..=n)
            .map(|i| {
                let t = self.t0 * i as f64 / n as f64;
                self.mu(t) - t
            })
            .fold(0.0, f64::max);
        (-worst).exp()
    }

    /// Largest admissible step: half the conjugate distance for the maximal
    /// positive curvature, capped at one.
    pub fn max_step(&self) -> f64 {
        let n = 2000;
        let kmax = (0..=n)
            .map(|i| self.curvature(self.t0 * i as f64 / n as f64))
            .fold(0.0, f64::max);
        if kmax <= 0.0 {
            1.0
        } else {
            (0.5 * std::f64::consts::PI / kmax.sqrt()).min(1.0)
        }
    }

    pub fn check_step(&self, h: f64) -> Result<()> {
        if !(h.is_finite() && h > 0.0 && h <= self.max_step()) {
            return Err(Error::InvalidParameter(format!(
                "step h = {h} outside (0, {:.4}]",
                self.max_step()
            )));
        }
        Ok(())
    }

    /// Whether the whole ball of radius `h` around height `t` lies where the
    /// metric is exactly hyperbolic.
    pub fn ball_in_cusp(&self, h: f64, t: f64) -> bool {
        t.abs() >= self.t0 + h
    }

    /// Geodesic flow in the state `(t, y, phi)`. With `dir = 1`, `phi` is the
    /// angle from the `+t` direction; with `dir = -1` it is measured from
    /// `-t`, which keeps nearly vertical downward geodesics well resolved.
    fn geodesic_rhs(&self, s: [f64; 3], dir: f64) -> [f64; 3] {
        let (t, ph) = (s[0], s[2]);
        let (sn, cs) = ph.sin_cos();
        [dir * cs, self.mu(t).exp() * sn, dir * self.mu1(t) * sn]
    }

    /// One classical RK4 step of the unit-speed geodesic flow.
    pub(crate) fn rk4_step(&self, s: [f64; 3], ds: f64) -> [f64; 3] {
        self.rk4_step_dir(s, ds, 1.0)
    }

    fn rk4_step_dir(&self, s: [f64; 3], ds: f64, dir: f64) -> [f64; 3] {
        let add = |a: [f64; 3], k: [f64; 3], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]];
        let k1 = self.geodesic_rhs(s, dir);
        let k2 = self.geodesic_rhs(add(s, k1, 0.5 * ds), dir);
        let k3 = self.geodesic_rhs(add(s, k2, 0.5 * ds), dir);
        let k4 = self.geodesic_rhs(add(s, k3, ds), dir);
        [
            s[0] + ds / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + ds / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            s[2] + ds / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    }

    /// Endpoint `(t, y)` of the geodesic of length `len` leaving `(t, 0)` at
    /// angle `theta`, `y` unwrapped.
    pub fn shoot(&self, t: f64, theta: f64, len: f64, steps: usize) -> (f64, f64) {
        let ds = len / steps as f64;
        let mut s = [t, 0.0, theta];
        for _ in 0..steps {
            s = self.rk4_step(s, ds);
        }
        (s[0], s[1])
    }
}

/// `log(ell / (2 sinh h))`: above this height a ball of radius `h` wraps
/// around the cusp and overlaps itself.
pub fn overlap_threshold(profile: &CuspProfile, h: f64) -> f64 {
    (profile.ell / (2.0 * h.sinh())).ln()
}

/// Distance between two points of one exact cusp, computed in the
/// upper half-plane model and minimised over deck translations.
pub fn distance_cusp(profile: &CuspProfile, p: (f64, f64), q: (f64, f64)) -> Result<f64> {
    let t0 = profile.t0;
    if p.0.abs() < t0 || q.0.abs() < t0 || p.0.signum() != q.0.signum() {
        return Err(Error::domain(
            "distance_cusp",
            format!("points {p:?}, {q:?} are not in one exact cusp (t0 = {t0})"),
        ));
    }
    let (t1, t2) = (p.0.abs(), q.0.abs());
    let dy = reduce_offset(q.1 - p.1, profile.ell).abs();
    // cosh d = 1 + 2 x, x = (dy^2 e^{-t1-t2} / 4 + sinh^2((t1 - t2) / 2))
    let x = 0.25 * dy * dy * (-t1 - t2).exp() + (0.5 * (t1 - t2)).sinh().powi(2);
    Ok(2.0 * x.sqrt().asinh())
}

/// Representative of `dy` modulo `ell` in `[-ell/2, ell/2]`.
pub fn reduce_offset(dy: f64, ell: f64) -> f64 {
    let r = dy.rem_euclid(ell);
    if r > 0.5 * ell {
        r - ell
    } else {
        r
    }
}

/// Geodesic distance by shooting, valid at short range anywhere on `W`.
///
/// Geodesics from `p` are integrated until their `y` coordinate reaches the
/// reduced offset of `q`; the launch angle is adjusted until the arrival
/// height matches. `tol` bounds the arrival-height error.
pub fn distance_numeric(profile: &CuspProfile, p: (f64, f64), q: (f64, f64), tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let dy = reduce_offset(q.1 - p.1, profile.ell).abs();
    let dt = q.0 - p.0;
    if dy < 1e-15 {
        return Ok(dt.abs());
    }
    let horiz = dy * (-profile.mu(p.0).max(profile.mu(q.0))).exp();
    let bound = dt.abs() + horiz;
    let s_max = 3.0 * bound;
    let steps_total = 600usize;
    let ds = s_max / steps_total as f64;
    let dir = if dt < 0.0 { -1.0 } else { 1.0 };

    // Arrival (t, s) where y first reaches dy, or the final state otherwise.
    // The search variable is u = ln(phi).
    let arrive = |u: f64| -> (f64, Option<f64>) {
        let mut s = [p.0, 0.0, u.exp()];
        for i in 0..steps_total {
            let next = profile.rk4_step_dir(s, ds, dir);
            if next[1] >= dy {
                let frac = crate::quadrature::bisect(
                    |sig| profile.rk4_step_dir(s, sig, dir)[1] - dy,
                    0.0,
                    ds,
                    1e-16 * ds,
                )
                .unwrap_or(ds);
                let hit = profile.rk4_step_dir(s, frac, dir);
                return (hit[0], Some(i as f64 * ds + frac));
            }
            s = next;
        }
        (s[0], None)
    };
    let mismatch = |u: f64| arrive(u).0 - q.0;

    // log-spaced small angles, then linear up to nearly pi
    let phi_min = (1e-3 * horiz / (bound + 1.0)).min(1e-3);
    let mut grid: Vec<f64> = Vec::new();
    let n_log = 40;
    let (l0, l1) = (phi_min.ln(), 0.5f64.ln());
    for i in 0..n_log {
        grid.push(l0 + (l1 - l0) * i as f64 / n_log as f64);
    }
    let n_lin = 24;
    for i in 0..=n_lin {
        let ph = 0.5 + (std::f64::consts::PI - 1e-9 - 0.5) * i as f64 / n_lin as f64;
        grid.push(ph.ln());
    }
    let values: Vec<f64> = grid.iter().map(|&u| mismatch(u)).collect();
    let mut best: Option<f64> = None;
    for i in 0..grid.len() - 1 {
        let (fa, fb) = (values[i], values[i + 1]);
        if fa.signum() == fb.signum() {
            continue;
        }
        let xtol = 1e-14 * (1.0 + grid[i].abs());
        let u = illinois(mismatch, grid[i], grid[i + 1], fa, fb, xtol, 300)?;
        let (t_hit, s_hit) = arrive(u);
        if let Some(s) = s_hit {
            if (t_hit - q.0).abs() <= tol {
                best = Some(best.map_or(s, |b: f64| b.min(s)));
            }
        }
    }
    best.ok_or(Error::NoConvergence {
        what: "distance_numeric shooting",
        iterations: grid.len(),
    })
}

/// Horizontal slice structure of one geodesic ball: for each height `t'`
/// in `[t - h, t + h]` the ball meets the circle at height `t'` in an arc of
/// half-width `alpha(t, t')` (in `y` units, capped at `ell / 2`).
#[derive(Debug, Clone)]
pub struct BallSlice {
    profile: CuspProfile,
    h: f64,
    t: f64,
    kind: SliceKind,
}

#[derive(Debug, Clone)]
enum SliceKind {
    Cusp,
    Shot(SphereTable),
}

#[derive(Debug, Clone)]
struct SphereTable {
    theta: Vec<f64>,
    t_end: Vec<f64>,
    y_end: Vec<f64>,
}

impl BallSlice {
    pub fn new(profile: &CuspProfile, h: f64, t: f64) -> Self {
        let kind = if profile.ball_in_cusp(h, t) {
            SliceKind::Cusp
        } else {
            let n = SPHERE_NODES;
            let mut theta = Vec::with_capacity(n + 1);
            let mut t_end = Vec::with_capacity(n + 1);
            let mut y_end = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let th = std::f64::consts::PI * i as f64 / n as f64;
                let (te, ye) = if i == 0 {
                    (t + h, 0.0)
                } else if i == n {
                    (t - h, 0.0)
                } else {
                    profile.shoot(t, th, h, SHOOT_STEPS)
                };
                theta.push(th);
                t_end.push(te);
                y_end.push(ye);
            }
            SliceKind::Shot(SphereTable { theta, t_end, y_end })
        };
        BallSlice {
            profile: *profile,
            h,
            t,
            kind,
        }
    }

    pub fn center(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> f64 {
        self.h
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.kind, SliceKind::Cusp)
    }

    fn shoot(&self, theta: f64) -> (f64, f64) {
        self.profile.shoot(self.t, theta, self.h, SHOOT_STEPS)
    }

    /// Uncapped half-width of the slice at height `t2`.
    pub fn raw_half_width(&self, t2: f64) -> f64 {
        self.raw_half_width_offset(t2 - self.t)
    }

    /// Uncapped half-width of the slice at height `t + off`. Working with the
    /// offset avoids cancellation next to the top and bottom of the ball.
    pub fn raw_half_width_offset(&self, off: f64) -> f64 {
        if off.abs() >= self.h {
            return 0.0;
        }
        match &self.kind {
            SliceKind::Cusp => cusp_raw_offset(self.h, self.t, off),
            SliceKind::Shot(tab) => {
                let t2 = self.t + off;
                // t_end decreases along the table
                let k = tab.t_end.partition_point(|&te| te > t2).clamp(1, tab.theta.len() - 1);
                let (a, b) = (tab.theta[k - 1], tab.theta[k]);
                let (fa, fb) = (tab.t_end[k - 1] - t2, tab.t_end[k] - t2);
                let theta = illinois(|th| self.shoot(th).0 - t2, a, b, fa, fb, THETA_TOL, 200)
                    .unwrap_or(0.5 * (a + b));
                self.shoot(theta).1.max(0.0)
            }
        }
    }

    pub fn half_width(&self, t2: f64) -> f64 {
        self.half_width_offset(t2 - self.t)
    }

    pub fn half_width_offset(&self, off: f64) -> f64 {
        self.raw_half_width_offset(off).min(0.5 * self.profile.ell)
    }

    /// Largest uncapped half-width over the ball.
    pub fn max_raw_half_width(&self) -> f64 {
        match &self.kind {
            SliceKind::Cusp => self.t.abs().exp() * self.h.sinh(),
            SliceKind::Shot(tab) => {
                let (_, k) = tab
                    .y_end
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| (y, i))
                    .fold((f64::MIN, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
                let lo = tab.theta[k.saturating_sub(1)];
                let hi = tab.theta[(k + 1).min(tab.theta.len() - 1)];
                golden_max(|th| self.shoot(th).1, lo, hi, 1e-10).1
            }
        }
    }

    /// Heights `(lo, hi)` between which the slice is the whole circle.
    pub fn cap_interval(&self) -> Option<(f64, f64)> {
        self.cap_offsets().map(|(lo, hi)| (self.t + lo, self.t + hi))
    }

    /// As [`BallSlice::cap_interval`], relative to the centre.
    pub fn cap_offsets(&self) -> Option<(f64, f64)> {
        let half = 0.5 * self.profile.ell;
        match &self.kind {
            SliceKind::Cusp => {
                let z = half * (-self.t.abs()).exp();
                let s = self.h.sinh();
                if z >= s {
                    return None;
                }
                let c = self.h.cosh();
                let w = ((s - z) * (s + z)).sqrt();
                // e^T = cosh h -+ w, with (c - w)(c + w) = 1 + z^2
                let lo = ((1.0 + z * z) / (c + w)).ln();
                let hi = (c + w).ln();
                Some(if self.t >= 0.0 { (lo, hi) } else { (-hi, -lo) })
            }
            SliceKind::Shot(tab) => {
                let k = (0..tab.y_end.len())
                    .max_by(|&i, &j| tab.y_end[i].total_cmp(&tab.y_end[j]))
                    .unwrap();
                let lo_b = tab.theta[k.saturating_sub(1)];
                let hi_b = tab.theta[(k + 1).min(tab.theta.len() - 1)];
                let (th_max, y_max) = golden_max(|th| self.shoot(th).1, lo_b, hi_b, 1e-12);
                if y_max <= half {
                    return None;
                }
                let g = |th: f64| self.shoot(th).1 - half;
                // small angles reach the top of the ball
                let ka = tab.y_end[..=k].partition_point(|&y| y <= half).max(1);
                let (a0, a1) = (tab.theta[ka - 1].min(th_max), tab.theta[ka].min(th_max));
                let th_a = illinois(g, a0, a1.max(a0), g(a0), g(a1.max(a0)), THETA_TOL, 200)
                    .unwrap_or(th_max);
                let kb = k + tab.y_end[k..].partition_point(|&y| y > half);
                let kb = kb.clamp(1, tab.theta.len() - 1);
                let (b0, b1) = (tab.theta[kb - 1].max(th_max), tab.theta[kb].max(th_max));
                let th_b = illinois(g, b0, b1, g(b0), g(b1), THETA_TOL, 200).unwrap_or(th_max);
                let hi = self.shoot(th_a).0 - self.t;
                let lo = self.shoot(th_b).0 - self.t;
                Some((lo, hi))
            }
        }
    }

    /// `integral of g(t', alpha(t, t'))` over `[a, b]` clipped to the ball's
    /// height range, splitting at the cap boundaries and removing the
    /// square-root zeros at `t +- h`.
    pub fn integrate<G: Fn(f64, f64) -> f64>(&self, a: f64, b: f64, g: G, rel_tol: f64) -> f64 {
        let snap = |x: f64| {
            let off = x - self.t;
            if off <= -self.h * (1.0 - 1e-12) {
                -self.h
            } else if off >= self.h * (1.0 - 1e-12) {
                self.h
            } else {
                off
            }
        };
        self.integrate_offsets(snap(a), snap(b), g, rel_tol)
    }

    /// Fixed composite Gauss nodes `(offset, alpha, weight)` over the whole
    /// ball. Pieces are split at the cap ends and at the junctions `+-t0`
    /// where the profile loses smoothness; pieces touching `+-h` use the
    /// square-root substitution.
    pub fn gauss_nodes(&self, panels: usize, order: usize) -> Vec<(f64, f64, f64)> {
        let h = self.h;
        let mut knots = vec![-h, h];
        if let Some((lo, hi)) = self.cap_offsets() {
            knots.extend([lo, hi]);
        }
        if !self.is_closed_form() {
            let t0 = self.profile.t0;
            knots.extend([t0 - self.t, -t0 - self.t]);
        }
        knots.retain(|&x| x >= -h && x <= h);
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * h);
        if knots.len() == 2 {
            knots.insert(1, 0.0);
        }
        let rule = gauss_legendre_rule(order);
        let half = 0.5 * self.profile.ell;
        let cap = self.cap_offsets();
        let mut out = Vec::with_capacity((knots.len() - 1) * panels * order);
        for w in knots.windows(2) {
            let (p, q) = (w[0], w[1]);
            let mid = 0.5 * (p + q);
            let capped = cap.is_some_and(|(lo, hi)| mid > lo && mid < hi);
            let width = |off: f64| if capped { half } else { self.half_width_offset(off) };
            let from_top = q == h;
            let from_bottom = p == -h;
            if from_top || from_bottom {
                let r = (q - p).sqrt();
                for pi in 0..panels {
                    let u0 = r * pi as f64 / panels as f64;
                    let u1 = r * (pi + 1) as f64 / panels as f64;
                    for &(xi, wi) in &rule {
                        let u = 0.5 * (u0 + u1) + 0.5 * (u1 - u0) * xi;
                        let off = if from_top { h - u * u } else { u * u - h };
                        out.push((off, width(off), (u1 - u0) * wi * u));
                    }
                }
            } else {
                for pi in 0..panels {
                    let x0 = p + (q - p) * pi as f64 / panels as f64;
                    let x1 = p + (q - p) * (pi + 1) as f64 / panels as f64;
                    for &(xi, wi) in &rule {
                        let off = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * xi;
                        out.push((off, width(off), 0.5 * (x1 - x0) * wi));
                    }
                }
            }
        }
        out
    }

    /// As [`BallSlice::integrate`] with limits given as offsets from the
    /// centre; `g` still receives the absolute height.
    pub fn integrate_offsets<G: Fn(f64, f64) -> f64>(&self, a: f64, b: f64, g: G, rel_tol: f64) -> f64 {
        let h = self.h;
        let a = a.max(-h);
        let b = b.min(h);
        if b <= a {
            return 0.0;
        }
        let mut knots = vec![a];
        let cap = self.cap_offsets();
        if let Some((lo, hi)) = cap {
            for x in [lo, hi] {
                if x > a && x < b {
                    knots.push(x);
                }
            }
        }
        knots.push(b);
        let half = 0.5 * self.profile.ell;
        let f = |off: f64| g(self.t + off, self.half_width_offset(off));
        // one absolute tolerance for all pieces: thin uncapped slivers next
        // to a wide cap must not be resolved to their own relative accuracy
        let scale = crate::quadrature::coarse_abs(&f, a, b)
            + knots.windows(2).map(|w| crate::quadrature::coarse_abs(&f, w[0], w[1])).sum::<f64>();
        let tol = rel_tol * scale.max(1e-300) / knots.len() as f64;
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (p, q) = (w[0], w[1]);
            let mid = 0.5 * (p + q);
            let capped = cap.is_some_and(|(lo, hi)| mid > lo && mid < hi);
            if capped {
                total += integrate_sqrt_ends_abs(&|off| g(self.t + off, half), p, q, false, false, tol);
            } else {
                total += integrate_sqrt_ends_abs(&f, p, q, p == -h, q == h, tol);
            }
        }
        total
    }
}

/// Closed-form uncapped half-width for a ball inside an exact cusp, at
/// height `t + off`.
pub(crate) fn cusp_raw_offset(h: f64, t: f64, off: f64) -> f64 {
    let (tc, off) = if t >= 0.0 { (t, off) } else { (-t, -off) };
    // sinh^2 h - (cosh h - e^T)^2 = (e^T - e^{-h}) (e^h - e^T)
    let r = (-h).exp() * (off + h).exp_m1() * off.exp() * (h - off).exp_m1();
    if r <= 0.0 {
        return 0.0;
    }
    tc.exp() * r.sqrt()
}

/// Half-width `alpha_h(t, t')` of the slice at height `t'` of the ball of
/// radius `h` centred at height `t`.
pub fn ball_half_width(profile: &CuspProfile, h: f64, t: f64, t2: f64) -> Result<f64> {
    let off = (t2 - t).abs();
    if off > h * (1.0 + 1e-12) {
        return Err(Error::domain(
            "ball_half_width",
            format!("|t - t'| = {off} exceeds h = {h}"),
        ));
    }
    if off >= h {
        return Ok(0.0);
    }
    let half = 0.5 * profile.ell;
    if profile.ball_in_cusp(h, t) {
        return Ok(cusp_raw_offset(h, t, t2 - t).min(half));
    }
    let f = |th: f64| profile.shoot(t, th, h, SHOOT_STEPS).0 - t2;
    let theta = illinois(f, 0.0, std::f64::consts::PI, h - (t2 - t), -h - (t2 - t), THETA_TOL, 300)?;
    Ok(profile.shoot(t, theta, h, SHOOT_STEPS).1.max(0.0).min(half))
}

/// Volume `|B_h(t)| = integral of 2 alpha(t, t') exp(-mu(t')) dt'`.
pub fn ball_volume(profile: &CuspProfile, h: f64, t: f64) -> f64 {
    let slice = BallSlice::new(profile, h, t);
    slice_volume(&slice)
}

pub(crate) fn slice_volume(slice: &BallSlice) -> f64 {
    let p = slice.profile;
    slice.integrate(
        slice.t - slice.h,
        slice.t + slice.h,
        |x, a| 2.0 * a * (-p.mu(x)).exp(),
        1e-11,
    )
}

/// Summary of one ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallGeometry {
    pub h: f64,
    pub t_center: f64,
    pub alpha_max: f64,
    pub volume: f64,
    pub overlapping: bool,
}

pub fn ball_geometry(profile: &CuspProfile, h: f64, t: f64) -> BallGeometry {
    let slice = BallSlice::new(profile, h, t);
    let raw_max = slice.max_raw_half_width();
    let half = 0.5 * profile.ell;
    BallGeometry {
        h,
        t_center: t,
        alpha_max: raw_max.min(half),
        volume: slice_volume(&slice),
        overlapping: raw_max >= half,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mu_values() {
        let p = CuspProfile::default();
        assert_eq!(p.mu(2.0), 2.0);
        assert_eq!(p.mu(0.0), 0.0);
        assert!(close(p.mu(0.5), 0.396_484_375, 1e-12));
        let c = p.blend_coeffs();
        assert!(close(c[0], 15.0 / 8.0, 1e-13));
        assert!(close(c[1], -10.0 / 8.0, 1e-13));
        assert!(close(c[2], 3.0 / 8.0, 1e-13));
    }

    #[test]
    fn mu_is_c2_at_junction() {
        for t0 in [0.5, 1.0, 2.5] {
            let p = CuspProfile::new(1.0, t0).unwrap();
            let e = 1e-12;
            for s in [1.0, -1.0] {
                let x = s * t0;
                assert!(close(p.mu(x - s * e), t0, 1e-10));
                assert!(close(p.mu1(x - s * e), s, 1e-9));
                assert!(close(p.mu2(x - s * e), 0.0, 1e-9));
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = CuspProfile::default();
        let e = 1e-5;
        for &t in &[-0.9, -0.3, 0.0, 0.2, 0.7] {
            let d1 = (p.mu(t + e) - p.mu(t - e)) / (2.0 * e);
            let d2 = (p.mu1(t + e) - p.mu1(t - e)) / (2.0 * e);
            assert!(close(d1, p.mu1(t), 1e-8));
            assert!(close(d2, p.mu2(t), 1e-7));
        }
    }

    #[test]
    fn density_floor_positive() {
        let p = CuspProfile::default();
        let c0 = p.density_floor();
        assert!(c0 > 0.0 && c0 <= 1.0);
        for i in 0..100 {
            let t = -3.0 + 0.06 * i as f64;
            assert!((-p.mu(t)).exp() >= c0 * (-t.abs()).exp() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn overlap_threshold_values() {
        let p = CuspProfile::default();
        assert!(close(overlap_threshold(&p, 0.1), 1.607_77, 1e-5));
        let p2 = CuspProfile::new(2.0, 1.0).unwrap();
        assert!(close(
            overlap_threshold(&p2, 0.3),
            overlap_threshold(&p, 0.3) + 2f64.ln(),
            1e-14
        ));
        assert!(overlap_threshold(&p, 0.01) > overlap_threshold(&p, 0.1));
    }

    #[test]
    fn cusp_distance_basic() {
        let p = CuspProfile::default();
        assert_eq!(distance_cusp(&p, (2.0, 0.0), (2.0, 0.0)).unwrap(), 0.0);
        assert!(close(distance_cusp(&p, (2.0, 0.3), (2.0, 1.3)).unwrap(), 0.0, 1e-12));
        assert!(close(distance_cusp(&p, (2.0, 0.0), (2.2, 0.0)).unwrap(), 0.2, 1e-14));
        assert!(distance_cusp(&p, (0.5, 0.0), (2.0, 0.0)).is_err());
        assert!(distance_cusp(&p, (-2.0, 0.0), (2.0, 0.0)).is_err());
    }

    #[test]
    fn numeric_distance_basic() {
        let p = CuspProfile::default();
        assert!(close(distance_numeric(&p, (0.0, 0.0), (0.3, 0.0), 1e-10).unwrap(), 0.3, 1e-14));
        let d = distance_numeric(&p, (2.0, 0.0), (2.0, 0.1), 1e-11).unwrap();
        let e = distance_cusp(&p, (2.0, 0.0), (2.0, 0.1)).unwrap();
        assert!(close(d, e, 1e-8), "{d} vs {e}");
        let dy = 1e-4;
        let d = distance_numeric(&p, (0.0, 0.0), (0.0, dy), 1e-12).unwrap();
        assert!(close(d, dy, 1e-10), "{d}");
    }

    #[test]
    fn half_width_examples() {
        let p = CuspProfile::default();
        assert_eq!(ball_half_width(&p, 0.5, 4.0, 4.5).unwrap(), 0.0);
        let th = overlap_threshold(&p, 0.5);
        assert_eq!(ball_half_width(&p, 0.5, th + 3.0, th + 3.0).unwrap(), 0.5);
        assert!(ball_half_width(&p, 0.1, 5.0, 5.2).is_err());
        // centre slice: e^t * 2 sinh(h/2) in coordinates, i.e. h e^{mu} to O(h^2)
        let raw = BallSlice::new(&p, 0.1, 5.0).raw_half_width(5.0);
        assert!(((raw - 0.1 * 5f64.exp()) / raw).abs() < 1e-3);
    }

    #[test]
    fn half_width_matches_closed_form_near_junction() {
        // centres just below the cusp threshold use shooting; compare with the
        // closed form from the partner centre, which is in the cusp
        let p = CuspProfile::default();
        let h = 0.2;
        for &(t, t2) in &[(1.15, 1.25), (1.1, 1.28), (1.19, 1.21), (-1.12, -1.3)] {
            let shot = ball_half_width(&p, h, t, t2).unwrap();
            let closed = ball_half_width(&p, h, t2, t).unwrap();
            assert!(!p.ball_in_cusp(h, t) && p.ball_in_cusp(h, t2));
            assert!(close(shot, closed, 1e-10), "{t} {t2}: {shot} vs {closed}");
        }
    }

    #[test]
    fn slice_table_agrees_with_direct_shooting() {
        let p = CuspProfile::default();
        let h = 0.3;
        for &t in &[0.0, 0.4, -0.8, 1.1] {
            let s = BallSlice::new(&p, h, t);
            for i in 1..20 {
                let t2 = t - h + 2.0 * h * i as f64 / 20.0;
                let a = s.half_width(t2);
                let b = ball_half_width(&p, h, t, t2).unwrap();
                assert!(close(a, b, 1e-11), "{t} {t2} {a} {b}");
            }
        }
    }

    #[test]
    fn half_width_by_distance_bisection() {
        // the slice boundary is where the distance to the centre equals h
        let p = CuspProfile::default();
        let h = 0.3;
        for &(t, t2) in &[(0.0, 0.1), (0.5, 0.3), (-0.7, -0.55), (0.9, 1.18)] {
            let a = ball_half_width(&p, h, t, t2).unwrap();
            assert!(a < 0.49, "slice wraps at {t} {t2}");
            let y = crate::quadrature::bisect(
                |y| distance_numeric(&p, (t, 0.0), (t2, y), 1e-12).unwrap() - h,
                1e-9,
                (a * 1.5).min(0.5),
                1e-12,
            )
            .unwrap();
            assert!(close(a, y, 1e-8), "{t} {t2}: {a} vs {y}");
        }
    }

    #[test]
    fn volume_hyperbolic_disc() {
        // a wide cusp so that small balls near the junction do not wrap
        let p = CuspProfile::new(20.0, 1.0).unwrap();
        for h in [0.05, 0.1, 0.2, 0.4] {
            let t = p.t0() + h;
            assert!(p.ball_in_cusp(h, t) && t < overlap_threshold(&p, h));
            let v = ball_volume(&p, h, t);
            let exact = 2.0 * std::f64::consts::PI * (h.cosh() - 1.0);
            assert!(((v - exact) / exact).abs() < 1e-8, "h = {h}: {v} vs {exact}");
        }
        let p = CuspProfile::default();
        let v = ball_volume(&p, 0.1, 1.2);
        assert!(((v - 0.031_442_1) / 0.031_442_1).abs() < 1e-4, "{v}");
    }

    fn z_volume(p: &CuspProfile, h: f64, t: f64) -> f64 {
        let s = h.sinh();
        let zm = (0.5 * p.ell() * (-t.abs()).exp()).min(s);
        let f = |z: f64| 2.0 * ((s - z) * (s + z)).max(0.0).sqrt() / (1.0 + z * z);
        crate::quadrature::integrate_sqrt_ends(&f, -zm, zm, zm >= s, zm >= s, 1e-12)
    }

    #[test]
    fn volume_matches_z_integral() {
        let p = CuspProfile::default();
        for &h in &[0.05, 0.1, 0.2, 0.4] {
            let th = overlap_threshold(&p, h);
            for dt in [0.05, 0.5, 1.0, 3.0, 8.0] {
                let t = th + dt;
                if !p.ball_in_cusp(h, t) {
                    continue;
                }
                let v = ball_volume(&p, h, t);
                let z = z_volume(&p, h, t);
                assert!(((v - z) / z).abs() < 1e-8, "h {h} t {t}: {v} vs {z}");
                let v2 = ball_volume(&p, h, -t);
                assert!(((v2 - v) / v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn volume_asymptotics() {
        let p = CuspProfile::default();
        let h = 0.1;
        let t = overlap_threshold(&p, h) + 4.0;
        let v = ball_volume(&p, h, t);
        let lead = 2.0 * h.sinh() * (-t).exp();
        let rel = (v - lead).abs() / lead;
        assert!(rel < 5.0 * (-2.0 * t).exp() / h.sinh().powi(2), "{rel}");
        let t = overlap_threshold(&p, h) + 1.0;
        assert!(ball_volume(&p, h, t) >= 0.5 * h * (-t).exp());
    }

    #[test]
    fn volume_in_blend_is_continuous() {
        let p = CuspProfile::default();
        let h = 0.2;
        let a = ball_volume(&p, h, 1.2 - 1e-9);
        let b = ball_volume(&p, h, 1.2 + 1e-9);
        assert!(((a - b) / a).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn cap_interval_closed_form_matches_shooting() {
        let p = CuspProfile::default();
        let h = 0.5;
        // ball centred at 1.55 is in the cusp, and wraps around
        let t = 1.55;
        let closed = BallSlice::new(&p, h, t);
        let (lo, hi) = closed.cap_interval().unwrap();
        assert!(close(closed.raw_half_width(lo), 0.5, 1e-10));
        assert!(close(closed.raw_half_width(hi), 0.5, 1e-10));
        let shot = BallSlice::new(&p, h, 0.9);
        if let Some((lo, hi)) = shot.cap_interval() {
            assert!(close(shot.raw_half_width(lo), 0.5, 1e-9));
            assert!(close(shot.raw_half_width(hi), 0.5, 1e-9));
        }
    }

    #[test]
    fn geometry_summary() {
        let p = CuspProfile::default();
        let g = ball_geometry(&p, 0.1, 5.0);
        assert!(g.overlapping);
        assert_eq!(g.alpha_max, 0.5);
        let g = ball_geometry(&p, 0.1, 1.2);
        assert!(!g.overlapping);
        assert!(g.volume > 0.0);
    }

    #[test]
    fn max_step_reasonable() {
        let p = CuspProfile::default();
        assert!(p.max_step() > 0.5 && p.max_step() <= 1.0);
        assert!(p.check_step(0.5).is_ok());
        assert!(p.check_step(2.0).is_err());
    }

    #[test]
    fn profile_serde_round_trip() {
        let p = CuspProfile::new(2.5, 0.75).unwrap();
        let s = toml::to_string(&p).unwrap();
        let q: CuspProfile = toml::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn gauss_nodes_match_adaptive() {
        let p = CuspProfile::new(20.0, 1.0).unwrap();
        // default profile caps high up, the wide one crosses the junction
        let cases = [(p, 0.4, 0.7), (p, 0.1, 0.95), (p, 0.3, -1.1), (CuspProfile::default(), 0.3, 2.0)];
        for (prof, h, t) in cases {
            let f = |x: f64, a: f64| a * (-prof.mu(x)).exp() * (1.0 + 0.3 * x.sin());
            let slice = BallSlice::new(&prof, h, t);
            let exact = slice.integrate(t - h, t + h, f, 1e-13);
            let gauss: f64 = slice.gauss_nodes(4, 16).iter().map(|&(o, a, w)| w * f(t + o, a)).sum();
            assert!((gauss - exact).abs() < 1e-10 * exact, "h {h} t {t}: {gauss} vs {exact}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn half_width_symmetric(t in -2.5f64..2.5, frac in -0.999f64..0.999, h in 0.05f64..0.5) {
            let p = CuspProfile::default();
            let t2 = t + frac * h;
            let a = ball_half_width(&p, h, t, t2).unwrap();
            let b = ball_half_width(&p, h, t2, t).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{} {} {} {}", t, t2, a, b);
            prop_assert!(a <= 0.5 + 1e-15);
        }

        #[test]
        fn cusp_half_width_monotone_in_height(t in 1.5f64..6.0, frac in -0.99f64..0.99, h in 0.05f64..0.5) {
            let p = CuspProfile::default();
            if p.ball_in_cusp(h, t) {
                let off = frac * h;
                let a = ball_half_width(&p, h, t, t + off).unwrap();
                let b = ball_half_width(&p, h, t + 0.1, t + 0.1 + off).unwrap();
                prop_assert!(b >= a);
            }
        }

        #[test]
        fn numeric_distance_matches_cusp(t in 2.0f64..4.0, dt in -0.3f64..0.3, dy in 0.0f64..0.5) {
            let p = CuspProfile::default();
            let a = (t, 0.1);
            let b = (t + dt, 0.1 + dy * (-t).exp());
            let d1 = distance_cusp(&p, a, b).unwrap();
            let d2 = distance_numeric(&p, a, b, 1e-11).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-6, "{} vs {}", d1, d2);
        }
    }
}
