//! Dirichlet form, variance and Rayleigh-quotient gap for the discretised
//! walk. All inner products are taken in `L^2(d nu_h)` with the grid masses
//! `m_i = w_i / sum w`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::CuspProfile;
use crate::linalg::{dense_eigh, dot, norm, start_vector, BandCholesky};
use crate::operator::{GridSpec, KernelGeometry, ModeOperator};

fn check_len(op: &ModeOperator, f: &[f64]) -> Result<()> {
    if f.len() != op.dim() {
        return Err(Error::Dimension {
            expected: op.dim(),
            got: f.len(),
        });
    }
    Ok(())
}

fn masses(op: &ModeOperator) -> Vec<f64> {
    let total: f64 = op.weights().iter().sum();
    op.weights().iter().map(|w| w / total).collect()
}

/// `<(1 - K_{h,k}) f, f>` in `L^2(nu_h)`, through the operator.
pub fn dirichlet_form(op: &ModeOperator, f: &[f64]) -> Result<f64> {
    check_len(op, f)?;
    let kf = op.apply(f)?;
    let m = masses(op);
    Ok(f.iter().zip(&kf).zip(&m).map(|((fi, ki), mi)| mi * fi * (fi - ki)).sum())
}

/// The same form as a sum over pairs of cells:
/// `(1 / 2Z) sum G_ij (f_i - f_j)^2 + (1 / Z) sum_i f_i^2 (w_i - sum_j G_ij)`.
/// The second term vanishes for `k = 0`.
pub fn dirichlet_form_pairs(op: &ModeOperator, f: &[f64]) -> Result<f64> {
    check_len(op, f)?;
    let g = op.cell_matrix();
    let w = op.weights();
    let n = op.dim();
    let b = g.bandwidth();
    let z: f64 = w.iter().sum();
    let mut pairs = 0.0;
    let mut leak = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in i.saturating_sub(b)..(i + b + 1).min(n) {
            let gij = g.get(i, j);
            row += gij;
            pairs += gij * (f[i] - f[j]).powi(2);
        }
        leak += f[i] * f[i] * (w[i] - row);
    }
    Ok((0.5 * pairs + leak) / z)
}

/// `||f||^2 - <f, 1>^2` in `L^2(nu_h)`.
pub fn variance(op: &ModeOperator, f: &[f64]) -> Result<f64> {
    check_len(op, f)?;
    Ok(variance_with(&masses(op), f))
}

pub fn variance_with(m: &[f64], f: &[f64]) -> f64 {
    let mean: f64 = m.iter().zip(f).map(|(a, b)| a * b).sum();
    m.iter().zip(f).map(|(a, b)| a * (b - mean).powi(2)).sum()
}

/// `(1/2) sum_ij m_i m_j (f_i - f_j)^2` over all pairs.
pub fn variance_pairs(m: &[f64], f: &[f64]) -> f64 {
    let n = f.len();
    (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| m[i] * m[j] * (f[i] - f[j]).powi(2)).sum::<f64>())
        .sum::<f64>()
        * 0.5
}

/// `V^{[a,b]}(f) = (1/2) int int_{t, t' in [a,b]} (f - f')^2 d nu d nu`.
pub fn restricted_variance(op: &ModeOperator, f: &[f64], a: f64, b: f64) -> Result<f64> {
    check_len(op, f)?;
    let m = masses(op);
    let idx = window(op, a, b);
    let (m0, m1, m2) = moments(&m, f, &idx);
    Ok(m0 * m2 - m1 * m1)
}

/// `I^c(f) = (1/2) int_{t in [a,c]} int_{t' in [c,b]} (f - f')^2 d nu d nu`.
pub fn interaction(op: &ModeOperator, f: &[f64], a: f64, c: f64, b: f64) -> Result<f64> {
    check_len(op, f)?;
    let m = masses(op);
    let (l0, l1, l2) = moments(&m, f, &window(op, a, c));
    let (r0, r1, r2) = moments(&m, f, &window(op, c, b));
    Ok(0.5 * (r0 * l2 + l0 * r2) - l1 * r1)
}

/// Cells with `a <= t_i < b` (the last window also keeps `t_i = b`).
fn window(op: &ModeOperator, a: f64, b: f64) -> Vec<usize> {
    let pts = op.grid().points();
    (0..pts.len())
        .filter(|&i| pts[i] >= a && (pts[i] < b || (pts[i] == b && b >= op.grid().t_max)))
        .collect()
}

fn moments(m: &[f64], f: &[f64], idx: &[usize]) -> (f64, f64, f64) {
    idx.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &i| {
        (a + m[i], b + m[i] * f[i], c + m[i] * f[i] * f[i])
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FunctionalReport {
    pub energy: f64,
    pub variance: f64,
    pub ratio: f64,
}

pub fn functional_report(op: &ModeOperator, f: &[f64]) -> Result<FunctionalReport> {
    let energy = dirichlet_form(op, f)?;
    let variance = variance(op, f)?;
    Ok(FunctionalReport {
        energy,
        variance,
        ratio: energy / variance,
    })
}

/// `min E(f) / V(f)` over `f` orthogonal to constants for one mode, by
/// inverse subspace iteration on `I - S` (the constants are projected out for
/// `k = 0`).
pub fn rayleigh_gap_of_mode(op: &ModeOperator) -> Result<f64> {
    let n = op.dim();
    let s = op.symmetrized();
    let v0: Option<Vec<f64>> = (op.k() == 0).then(|| {
        let r: Vec<f64> = op.weights().iter().map(|w| w.sqrt()).collect();
        let nr = norm(&r);
        r.iter().map(|x| x / nr).collect()
    });
    let deflate = |x: &mut [f64]| {
        if let Some(v) = &v0 {
            let c = dot(v, x);
            x.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
        }
    };
    // (1 + eps) I - S is positive definite and shares eigenvectors with I - S
    let eps = 1e-9;
    let chol = BandCholesky::factor(&s.reflected(1.0 + eps))?;
    let block = 4.min(n.saturating_sub(1)).max(1);
    let mut q: Vec<Vec<f64>> = (0..block).map(|j| start_vector(n, 11 + j as u64)).collect();
    let mut prev = f64::MAX;
    let mut sv = vec![0.0; n];
    for it in 0..500 {
        for x in q.iter_mut() {
            deflate(x);
            chol.solve(x);
            deflate(x);
        }
        orthonormalize(&mut q);
        // Rayleigh-Ritz on I - S
        let proj: Vec<Vec<f64>> = q
            .iter()
            .map(|x| {
                s.matvec(x, &mut sv);
                x.iter().zip(&sv).map(|(a, b)| a - b).collect()
            })
            .collect();
        let m = faer::Mat::from_fn(block, block, |i, j| 0.5 * (dot(&q[i], &proj[j]) + dot(&q[j], &proj[i])));
        let (vals, vecs) = dense_eigh(&m)?;
        let rotated: Vec<Vec<f64>> = (0..block)
            .map(|c| {
                let mut x = vec![0.0; n];
                for (j, qj) in q.iter().enumerate() {
                    let y = vecs[(j, c)];
                    x.iter_mut().zip(qj).for_each(|(a, b)| *a += y * b);
                }
                x
            })
            .collect();
        q = rotated;
        let val = vals[0];
        if it > 2 && (prev - val).abs() <= 1e-15 * val.abs().max(1e-300) + 1e-17 {
            return Ok(val);
        }
        prev = val;
    }
    Err(Error::NoConvergence {
        what: "inverse subspace iteration",
        iterations: 500,
    })
}

fn orthonormalize(q: &mut [Vec<f64>]) {
    for j in 0..q.len() {
        for _ in 0..2 {
            for i in 0..j {
                let c = dot(&q[i], &q[j]);
                let (head, tail) = q.split_at_mut(j);
                tail[0].iter_mut().zip(&head[i]).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nq = norm(&q[j]);
        q[j].iter_mut().for_each(|x| *x /= nq);
    }
}

/// Minimum of [`rayleigh_gap_of_mode`] over `k = 0..=k_max` on `grid`.
pub fn rayleigh_gap(profile: &CuspProfile, h: f64, k_max: i64, grid: &GridSpec) -> Result<f64> {
    let geom = KernelGeometry::new(profile, h, grid)?;
    let gaps: Vec<f64> = (0..=k_max)
        .into_par_iter()
        .map(|k| rayleigh_gap_of_mode(&ModeOperator::from_geometry(&geom, k)?))
        .collect::<Result<_>>()?;
    Ok(gaps.into_iter().fold(f64::MAX, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectral_gap_on;
    use crate::spectral::GapOptions;
    use proptest::prelude::*;

    fn setup(k: i64) -> ModeOperator {
        let p = CuspProfile::default();
        let grid = GridSpec::symmetric(3.0, 0.05).unwrap();
        let geom = KernelGeometry::new(&p, 0.4, &grid).unwrap();
        ModeOperator::from_geometry(&geom, k).unwrap()
    }

    fn test_function(op: &ModeOperator) -> Vec<f64> {
        op.grid().points().iter().map(|t| (1.3 * t).sin() + 0.2 * t * t).collect()
    }

    #[test]
    fn energy_two_ways() {
        for k in [0, 1, 3] {
            let op = setup(k);
            let f = test_function(&op);
            let a = dirichlet_form(&op, &f).unwrap();
            let b = dirichlet_form_pairs(&op, &f).unwrap();
            assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn constants_have_no_energy() {
        let op = setup(0);
        let f = vec![2.5; op.dim()];
        assert!(dirichlet_form(&op, &f).unwrap().abs() < 1e-13);
        assert!(variance(&op, &f).unwrap().abs() < 1e-13);
        assert!(dirichlet_form(&setup(1), &f).unwrap() > 0.0);
    }

    #[test]
    fn variance_pairwise_and_split() {
        let op = setup(0);
        let f = test_function(&op);
        let m = masses(&op);
        let v = variance(&op, &f).unwrap();
        assert!((v - variance_pairs(&m, &f)).abs() < 1e-10);
        let (a, b) = (op.grid().t_min, op.grid().t_max);
        assert!((restricted_variance(&op, &f, a, b).unwrap() - v).abs() < 1e-10);
        for c in [-1.0, 0.3, 2.0] {
            let whole = restricted_variance(&op, &f, a, b).unwrap();
            let left = restricted_variance(&op, &f, a, c).unwrap();
            let right = restricted_variance(&op, &f, c, b).unwrap();
            let cross = interaction(&op, &f, a, c, b).unwrap();
            assert!((whole - left - right - 2.0 * cross).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_is_checked() {
        let op = setup(0);
        assert!(matches!(dirichlet_form(&op, &[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn rayleigh_matches_the_spectral_gap() {
        let p = CuspProfile::default();
        let grid = GridSpec::symmetric(3.0, 0.05).unwrap();
        let r = rayleigh_gap(&p, 0.4, 2, &grid).unwrap();
        let s = spectral_gap_on(&p, 0.4, &grid, GapOptions { k_max: 2, with_bottom: false }).unwrap();
        assert!((r - s.gap).abs() < 1e-6, "{r} vs {}", s.gap);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ratio_bounded_below_by_the_gap(coef in prop::collection::vec(-1.0f64..1.0, 6)) {
            let op = setup(0);
            let gap = rayleigh_gap_of_mode(&op).unwrap();
            let f: Vec<f64> = op.grid().points().iter().map(|&t| {
                coef.iter().enumerate().map(|(j, c)| c * (0.5 * (j + 1) as f64 * t).cos() + c * t.powi(j as i32 % 3)).sum()
            }).collect();
            let rep = functional_report(&op, &f).unwrap();
            prop_assume!(rep.variance > 1e-8);
            prop_assert!(rep.ratio >= gap - 1e-8);
        }
    }
}
