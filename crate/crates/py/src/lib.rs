//! Python bindings: the profile geometry, gaps, the ball sampler and the
//! experiment checks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use num_complex::Complex64;

use cuspwalk::cli::{run_experiment, ExperimentConfig, ExperimentKind};
use cuspwalk::montecarlo::{walker_rng, BallSampler};
use cuspwalk::tempered::{tempered_walk_gap, RhoSpec};
use cuspwalk::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Domain { .. } | Error::Config(_) | Error::Dimension { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Surface of revolution with `mu = |t|` outside `[-t0, t0]`.
#[pyclass(name = "CuspProfile", frozen)]
#[derive(Clone)]
struct PyProfile {
    inner: cuspwalk::CuspProfile,
}

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (ell = 1.0, t0 = 1.0))]
    fn new(ell: f64, t0: f64) -> PyResult<Self> {
        Ok(PyProfile {
            inner: cuspwalk::CuspProfile::new(ell, t0).map_err(py_err)?,
        })
    }

    #[getter]
    fn ell(&self) -> f64 {
        self.inner.ell()
    }

    #[getter]
    fn t0(&self) -> f64 {
        self.inner.t0()
    }

    fn mu(&self, t: f64) -> f64 {
        self.inner.mu(t)
    }

    fn ball_volume(&self, h: f64, t: f64) -> PyResult<f64> {
        self.inner.check_step(h).map_err(py_err)?;
        Ok(cuspwalk::ball_volume(&self.inner, h, t))
    }

    fn ball_half_width(&self, h: f64, t: f64, t2: f64) -> PyResult<f64> {
        cuspwalk::ball_half_width(&self.inner, h, t, t2).map_err(py_err)
    }

    fn overlap_threshold(&self, h: f64) -> f64 {
        cuspwalk::overlap_threshold(&self.inner, h)
    }

    /// Gap `1 - lambda` over the modes `0..=k_max` and the mode attaining it.
    #[pyo3(signature = (h, k_max = 8))]
    fn spectral_gap(&self, py: Python<'_>, h: f64, k_max: i64) -> PyResult<(f64, i64)> {
        let r = py
            .allow_threads(|| cuspwalk::spectral::spectral_gap(&self.inner, h, k_max))
            .map_err(py_err)?;
        Ok((r.gap, r.argmin))
    }

    /// `n` independent uniform draws from the ball of radius `h` at `(t, y)`.
    #[pyo3(signature = (h, t, y, n, seed = 0))]
    fn sample_ball(&self, py: Python<'_>, h: f64, t: f64, y: f64, n: usize, seed: u64) -> PyResult<Vec<(f64, f64)>> {
        py.allow_threads(|| {
            let sampler = BallSampler::new(&self.inner, h)?;
            let mut rng = walker_rng(seed, 0);
            (0..n).map(|_| sampler.sample((t, y), &mut rng)).collect::<cuspwalk::Result<Vec<_>>>()
        })
        .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("CuspProfile(ell={:?}, t0={:?})", self.inner.ell(), self.inner.t0())
    }
}

/// Gap of the one-dimensional walk tempered by `density` ("exp", "exp-half"
/// or "uniform").
#[pyfunction]
fn tempered_gap(density: &str, h: f64) -> PyResult<f64> {
    let rho = RhoSpec::from_name(density).map_err(py_err)?;
    Ok(tempered_walk_gap(&rho, h).map_err(py_err)?.gap)
}

#[pyfunction]
fn symbol_sigma(h: f64, z: f64, xi: f64) -> PyResult<Complex64> {
    cuspwalk::operator::symbol_sigma(h, z, xi).map_err(py_err)
}

/// Runs experiments from a TOML config (empty string for the defaults) and
/// returns `(experiment, check, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (config = "", experiments = None))]
fn check(py: Python<'_>, config: &str, experiments: Option<Vec<String>>) -> PyResult<Vec<(String, String, bool, String)>> {
    let mut cfg = ExperimentConfig::from_toml(config).map_err(py_err)?;
    if let Some(names) = experiments {
        cfg.experiments = names
            .iter()
            .map(|n| n.parse::<ExperimentKind>().map_err(py_err))
            .collect::<PyResult<_>>()?;
    }
    py.allow_threads(|| {
        let mut rows = Vec::new();
        for &kind in &cfg.experiments {
            let out = run_experiment(&cfg, kind)?;
            for c in out.checks {
                rows.push((kind.name().to_string(), c.name, c.passed, c.detail));
            }
        }
        Ok(rows)
    })
    .map_err(py_err)
}

#[pymodule]
fn cuspwalk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(tempered_gap, m)?)?;
    m.add_function(wrap_pyfunction!(symbol_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
