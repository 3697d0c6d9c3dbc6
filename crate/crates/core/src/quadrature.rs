//! One-dimensional quadrature and scalar root finding.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 32;

/// Adaptive Simpson rule with the usual Richardson correction.
///
/// The interval is halved until the two-panel estimate agrees with the
/// one-panel estimate to `15 * tol` (tolerance split between halves).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol.max(f64::MIN_POSITIVE), MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // the second test stops refinement once the panels agree to roundoff
    if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 64.0 * f64::EPSILON * (left.abs() + right.abs()) {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Trapezoid estimate of `integral |f|` from 17 equally spaced samples, so
/// that narrow features are not missed by a three-point first panel.
pub fn coarse_abs<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let n = 16;
    let step = (b - a) / n as f64;
    let mut coarse = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        coarse += w * f(a + step * i as f64).abs();
    }
    coarse * step.abs()
}

/// Adaptive Simpson with a tolerance relative to a coarse first estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let tol = rel_tol * coarse_abs(f, a, b).max(1e-300);
    integrate_abs(f, a, b, tol)
}

/// Adaptive Simpson on four equal pieces with an absolute tolerance.
pub fn integrate_abs<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    let pieces = 4;
    let width = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let lo = a + width * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + width };
        total += adaptive_simpson(f, lo, hi, abs_tol / pieces as f64);
    }
    total
}

/// Integral of `f` over `[a, b]` where `f` vanishes like a square root at
/// `a` (`at_lo`) and/or at `b` (`at_hi`). The singular ends are removed by
/// the substitution `x = a + u^2` (resp. `x = b - u^2`).
pub fn integrate_sqrt_ends<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    at_lo: bool,
    at_hi: bool,
    rel_tol: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let tol = rel_tol * coarse_abs(f, a, b).max(1e-300);
    integrate_sqrt_ends_abs(f, a, b, at_lo, at_hi, tol)
}

/// As [`integrate_sqrt_ends`] with an absolute tolerance.
pub fn integrate_sqrt_ends_abs<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    at_lo: bool,
    at_hi: bool,
    abs_tol: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    match (at_lo, at_hi) {
        (false, false) => integrate_abs(f, a, b, abs_tol),
        (true, false) => {
            let g = |u: f64| 2.0 * u * f(a + u * u);
            integrate_abs(&g, 0.0, (b - a).sqrt(), abs_tol)
        }
        (false, true) => {
            let g = |u: f64| 2.0 * u * f(b - u * u);
            integrate_abs(&g, 0.0, (b - a).sqrt(), abs_tol)
        }
        (true, true) => {
            let m = 0.5 * (a + b);
            integrate_sqrt_ends_abs(f, a, m, true, false, 0.5 * abs_tol)
                + integrate_sqrt_ends_abs(f, m, b, false, true, 0.5 * abs_tol)
        }
    }
}

/// Gauss-Legendre rule of order 8 on `[a, b]`.
pub fn gauss_legendre8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..4 {
        s += W[i] * (f(c - r * X[i]) + f(c + r * X[i]));
    }
    s * r
}

/// Nodes and weights of the `m`-point Gauss-Legendre rule on `[-1, 1]`,
/// ascending, by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre_rule(m: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[m - 1 - i] = (x, w);
    }
    out
}

/// Bracketed root of a continuous function by the Illinois variant of
/// regula falsi. `fa` and `fb` must have opposite signs.
pub fn illinois<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::domain(
            "root bracket",
            format!("f({a}) = {fa} and f({b}) = {fb} share a sign"),
        ));
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < xtol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < xtol {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Err(Error::NoConvergence {
        what: "illinois root",
        iterations: max_iter,
    })
}

/// Plain bisection, used where robustness matters more than speed.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::domain("bisection bracket", format!("[{a}, {b}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() < xtol {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Maximiser of a unimodal function on `[a, b]` by golden-section search.
/// Returns the abscissa and the value.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// First positive root of `tan x = x` above pi, i.e. the point where
/// `sin x / x` attains its global minimum.
pub fn sinc_min_point() -> f64 {
    // On (pi, 3pi/2) the function x cos x - sin x changes sign exactly once.
    let g = |x: f64| x * x.cos() - x.sin();
    let lo = std::f64::consts::PI + 1e-9;
    let hi = 1.5 * std::f64::consts::PI - 1e-9;
    bisect(g, lo, hi, 1e-15).expect("tan x = x is bracketed on (pi, 3pi/2)")
}

/// Global minimum of `sin x / x` over `x > 0`.
pub fn sinc_min_value() -> f64 {
    let x = sinc_min_point();
    x.sin() / x
}

/// Small dense linear solve by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::InvalidParameter("singular linear system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_exact() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_end_integral() {
        // integral of sqrt(1 - x^2) over [-1, 1] is pi / 2
        let f = |x: f64| (1.0 - x * x).max(0.0).sqrt();
        let v = integrate_sqrt_ends(&f, -1.0, 1.0, true, true, 1e-12);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-10, "{v}");
    }

    #[test]
    fn sinc_minimum() {
        let x = sinc_min_point();
        assert!((x - 4.493_409_457_909_064).abs() < 1e-12);
        assert!((sinc_min_value() + 0.217_233_628_211_221_6).abs() < 1e-12);
    }

    #[test]
    fn illinois_cubic() {
        let f = |x: f64| x * x * x - 2.0;
        let r = illinois(f, 0.0, 2.0, -2.0, 6.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_degree_15() {
        let v = gauss_legendre8(&|x: f64| x.powi(14) + x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_rules() {
        for m in [1, 3, 4, 8, 16] {
            let rule = gauss_legendre_rule(m);
            let wsum: f64 = rule.iter().map(|r| r.1).sum();
            assert!((wsum - 2.0).abs() < 1e-14);
            // exact up to degree 2m - 1
            let deg = 2 * m - 2;
            let v: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
            assert!((v - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "{m}");
        }
        let r4 = gauss_legendre_rule(4);
        assert!((r4[3].0 - 0.861_136_311_594_052_6).abs() < 1e-15);
    }

    #[test]
    fn dense_solve() {
        let x = solve_dense(
            vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]],
            vec![3.0, 5.0, 5.0],
        )
        .unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
