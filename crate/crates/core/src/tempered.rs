//! One-dimensional walks `K^rho_h f(t) = rho([t-h, t+h])^{-1} int_{|t-t'|<=h} f rho`
//! with a reference density `rho`, self-adjoint for
//! `d nu^rho_h = rho([t-h, t+h]) rho(t) dt / Z^rho_h`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{top_eigs_shift_invert, BandedSym};
use crate::operator::GridSpec;
use crate::quadrature::gauss_legendre_rule;

/// Quintic Hermite interpolant matching value, slope and curvature at both
/// ends of `[x0, x1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticBridge {
    x0: f64,
    x1: f64,
    /// `(value, slope, curvature)` at each end.
    left: (f64, f64, f64),
    right: (f64, f64, f64),
}

impl QuinticBridge {
    pub fn new(x0: f64, left: (f64, f64, f64), x1: f64, right: (f64, f64, f64)) -> Self {
        QuinticBridge { x0, x1, left, right }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let l = self.x1 - self.x0;
        let s = (x - self.x0) / l;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
        let h3 = 0.5 * s3 - s4 + 0.5 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let (y0, d0, c0) = self.left;
        let (y1, d1, c1) = self.right;
        y0 * h0 + l * d0 * h1 + l * l * c0 * h2 + l * l * c1 * h3 + l * d1 * h4 + y1 * h5
    }
}

/// Reference densities.
#[derive(Clone)]
pub enum RhoSpec {
    /// `e^{-t}` on `(-1, inf)`, `e^{t}` on `(-inf, -2)`, bridged in between.
    DecayOne,
    /// `e^{-|t|/2}` outside `(-1, 0)`, bridged inside.
    DecayHalf,
    /// Constant density on `[0, length]`.
    Uniform { length: f64 },
    /// Any positive function; the walk lives on the grid it is given.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RhoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoSpec::DecayOne => write!(f, "DecayOne"),
            RhoSpec::DecayHalf => write!(f, "DecayHalf"),
            RhoSpec::Uniform { length } => write!(f, "Uniform {{ length: {length} }}"),
            RhoSpec::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl RhoSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RhoSpec::DecayOne => "exp",
            RhoSpec::DecayHalf => "exp-half",
            RhoSpec::Uniform { .. } => "uniform",
            RhoSpec::Custom(_) => "custom",
        }
    }

    /// Parses `exp`, `exp-half` or `uniform` (length 2).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "exp" => Ok(RhoSpec::DecayOne),
            "exp-half" => Ok(RhoSpec::DecayHalf),
            "uniform" => Ok(RhoSpec::Uniform { length: 2.0 }),
            other => Err(Error::Config(format!(
                "unknown density `{other}` (expected exp, exp-half or uniform)"
            ))),
        }
    }

    pub fn log_density(&self, t: f64) -> f64 {
        match self {
            RhoSpec::DecayOne => {
                if t >= -1.0 {
                    -t
                } else if t <= -2.0 {
                    t
                } else {
                    QuinticBridge::new(-2.0, (-2.0, 1.0, 0.0), -1.0, (1.0, -1.0, 0.0)).eval(t)
                }
            }
            RhoSpec::DecayHalf => {
                if t >= 0.0 {
                    -0.5 * t
                } else if t <= -1.0 {
                    0.5 * t
                } else {
                    QuinticBridge::new(-1.0, (-0.5, 0.5, 0.0), 0.0, (0.0, -0.5, 0.0)).eval(t)
                }
            }
            RhoSpec::Uniform { .. } => 0.0,
            RhoSpec::Custom(f) => f(t).ln(),
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        match self {
            RhoSpec::Custom(f) => f(t),
            _ => self.log_density(t).exp(),
        }
    }

    /// Grid used by [`tempered_walk_gap`]: `delta = h / 8` on `[-12, 12]`
    /// for the decaying densities, on the whole box for the uniform one.
    pub fn default_grid(&self, h: f64) -> Result<GridSpec> {
        match self {
            RhoSpec::Uniform { length } => GridSpec::new(0.0, *length, *length / (*length / (h / 8.0)).ceil()),
            _ => GridSpec::symmetric(12.0, h / 8.0),
        }
    }
}

/// Discretised `K^rho_h` with cell-pair integrals
/// `G_ij = int_{cell i} int_{cell j, |t - t'| <= h} rho(t) rho(t')`.
#[derive(Debug, Clone)]
pub struct TemperedWalk {
    pub rho: RhoSpec,
    pub h: f64,
    pub grid: GridSpec,
    g: BandedSym,
    w: Vec<f64>,
    s: BandedSym,
}

impl TemperedWalk {
    pub fn new(rho: RhoSpec, h: f64, grid: &GridSpec) -> Result<Self> {
        if !(h > 0.0) || grid.delta > h / 4.0 {
            return Err(Error::InvalidParameter(format!(
                "step {h} needs a grid spacing of at most h/4, got {}",
                grid.delta
            )));
        }
        let n = grid.n;
        let delta = grid.delta;
        let band = (h / delta).ceil() as usize + 1;
        let rule = gauss_legendre_rule(8);
        let mass = |a: f64, b: f64| -> f64 {
            if b <= a {
                return 0.0;
            }
            let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
            rule.iter().map(|&(x, w)| r * w * rho.density(c + r * x)).sum()
        };
        let edge = |i: usize| grid.t_min + i as f64 * delta;
        let pair = |i: usize, j: usize| -> f64 {
            let (a, b) = (edge(i), edge(i + 1));
            let (c, d) = (edge(j), edge(j + 1));
            // pieces of cell i on which the clipped inner interval moves smoothly
            let mut knots = vec![a, b];
            for x in [c - h, c + h, d - h, d + h] {
                if x > a && x < b {
                    knots.push(x);
                }
            }
            knots.sort_by(f64::total_cmp);
            let mut total = 0.0;
            for win in knots.windows(2) {
                let (p, q) = (win[0], win[1]);
                let (mid, r) = (0.5 * (p + q), 0.5 * (q - p));
                for &(x, wx) in &rule {
                    let t = mid + r * x;
                    total += r * wx * rho.density(t) * mass(c.max(t - h), d.min(t + h));
                }
            }
            total
        };
        let mut g = BandedSym::zeros(n, band);
        for i in 0..n {
            for j in i..(i + band + 1).min(n) {
                let v = 0.5 * (pair(i, j) + pair(j, i));
                if !v.is_finite() {
                    return Err(Error::domain("tempered kernel", format!("entry ({i}, {j}) = {v}")));
                }
                g.set(i, j, v);
            }
        }
        let w = g.row_sums();
        if let Some(i) = w.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::domain("tempered kernel", format!("row {i} has weight {}", w[i])));
        }
        let inv_sqrt: Vec<f64> = w.iter().map(|v| 1.0 / v.sqrt()).collect();
        let s = g.scaled(&inv_sqrt);
        Ok(TemperedWalk {
            rho,
            h,
            grid: *grid,
            g,
            w,
            s,
        })
    }

    /// `w_i = sum_j G_ij`, the unnormalised measure of cell `i`.
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// `Z^rho_h = sum w_i`.
    pub fn normalizer(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn symmetrized(&self) -> &BandedSym {
        &self.s
    }

    pub fn kernel_entry(&self, i: usize, j: usize) -> f64 {
        self.g.get(i, j) / self.w[i]
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.g.matvec(f, &mut out);
        out.iter_mut().zip(&self.w).for_each(|(o, w)| *o /= w);
        out
    }

    /// `1 - lambda_2`.
    pub fn gap(&self) -> Result<f64> {
        let pairs = top_eigs_shift_invert(&self.s, 1.0 + 1e-5, 2)?;
        Ok(1.0 - pairs.values[1])
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TemperedGap {
    pub h: f64,
    pub gap: f64,
    pub normalizer: f64,
}

pub fn tempered_walk_gap(rho: &RhoSpec, h: f64) -> Result<TemperedGap> {
    let grid = rho.default_grid(h)?;
    let walk = TemperedWalk::new(rho.clone(), h, &grid)?;
    Ok(TemperedGap {
        h,
        gap: walk.gap()?,
        normalizer: walk.normalizer(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridges_are_c2() {
        // outside the bridges log rho is linear, so a C^2 join leaves a
        // cubic defect: halving the distance divides it by about 8
        let cases = [
            (RhoSpec::DecayOne, -2.0, 1.0, 1.0),
            (RhoSpec::DecayOne, -1.0, -1.0, -1.0),
            (RhoSpec::DecayHalf, -1.0, 0.5, 1.0),
            (RhoSpec::DecayHalf, 0.0, -0.5, -1.0),
        ];
        for (rho, x, slope, side) in cases {
            let defect = |s: f64| {
                let t = x + side * s;
                (rho.log_density(t) - rho.log_density(x) - slope * side * s).abs()
            };
            let ratio = defect(0.02) / defect(0.01);
            assert!((ratio - 8.0).abs() < 0.5, "{rho:?} at {x}: {ratio}");
        }
    }

    #[test]
    fn walk_is_reversible_and_stochastic() {
        let grid = GridSpec::symmetric(4.0, 0.05).unwrap();
        let walk = TemperedWalk::new(RhoSpec::DecayOne, 0.4, &grid).unwrap();
        let ones = vec![1.0; grid.n];
        for v in walk.apply(&ones) {
            assert!((v - 1.0).abs() < 1e-13);
        }
        let w = walk.weights();
        for i in 0..grid.n {
            for j in i..(i + 12).min(grid.n) {
                let a = w[i] * walk.kernel_entry(i, j);
                let b = w[j] * walk.kernel_entry(j, i);
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn normalizer_scales_with_h() {
        // Z ~ 2h int rho^2 for small h
        let rho = RhoSpec::Uniform { length: 2.0 };
        let grid = rho.default_grid(0.1).unwrap();
        let walk = TemperedWalk::new(rho, 0.1, &grid).unwrap();
        let exact = 2.0 * 0.1 * 2.0 - 0.1 * 0.1;
        assert!((walk.normalizer() - exact).abs() < 1e-12);
    }

    #[test]
    fn uniform_box_gap() {
        let rho = RhoSpec::Uniform { length: 2.0 };
        let g = tempered_walk_gap(&rho, 0.1).unwrap();
        let approx = 0.01 / 6.0 * (std::f64::consts::PI / 2.0).powi(2);
        assert!((g.gap / approx - 1.0).abs() < 0.1, "{} vs {approx}", g.gap);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(RhoSpec::from_name("gauss").is_err());
        assert_eq!(RhoSpec::from_name("exp-half").unwrap().name(), "exp-half");
    }
}
