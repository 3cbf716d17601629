//! Python bindings: `import anecdote`.
//!
//! Schemes are passed as a float offset (targeting) or the strings
//! `"minimum"` / `"maximum"`. Monte Carlo functions take `replicates` and
//! `seed` explicitly.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use anecdote_core as core;
use anecdote_core::{McParams, PosteriorMode, SolverParams, TargetingScheme};

fn to_py(err: core::Error) -> PyErr {
    match err {
        core::Error::Domain(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn mode_from(name: &str) -> PyResult<PosteriorMode> {
    PosteriorMode::from_name(name).map_err(to_py)
}

fn scheme_from(obj: &Bound<'_, PyAny>) -> PyResult<TargetingScheme> {
    if let Ok(offset) = obj.extract::<f64>() {
        return Ok(TargetingScheme::targeting(offset));
    }
    match obj.extract::<String>()?.as_str() {
        "minimum" | "min" => Ok(TargetingScheme::Minimum),
        "maximum" | "max" => Ok(TargetingScheme::Maximum),
        other => Err(PyValueError::new_err(format!(
            "scheme must be a float offset, 'minimum' or 'maximum', got '{other}'"
        ))),
    }
}

fn mc_from(replicates: usize, seed: u64) -> PyResult<McParams> {
    McParams::new(replicates, seed).map_err(to_py)
}

#[pyclass(name = "NoiseDistribution", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNoise {
    inner: core::NoiseDistribution,
}

#[pymethods]
impl PyNoise {
    #[new]
    fn new(kind: &str, scale: f64) -> PyResult<Self> {
        let inner = core::NoiseDistribution::from_name(kind, scale).map_err(to_py)?;
        Ok(PyNoise { inner })
    }

    #[staticmethod]
    fn gaussian(scale: f64) -> PyResult<Self> {
        Self::new("gaussian", scale)
    }

    #[staticmethod]
    fn laplace(scale: f64) -> PyResult<Self> {
        Self::new("laplace", scale)
    }

    #[staticmethod]
    fn uniform(halfwidth: f64) -> PyResult<Self> {
        Self::new("uniform", halfwidth)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    /// `count` draws from a stream seeded with `seed`.
    fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = core::stream::seeded(seed);
        (0..count).map(|_| self.inner.sample(&mut rng)).collect()
    }

    fn __repr__(&self) -> String {
        format!("NoiseDistribution({})", self.inner)
    }
}

#[pyclass(name = "GameConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGameConfig {
    inner: core::GameConfig,
}

#[pymethods]
impl PyGameConfig {
    #[new]
    #[pyo3(signature = (n, noise, m_sender=0.0, m_receiver=0.0, mode="foresight"))]
    fn new(n: usize, noise: &PyNoise, m_sender: f64, m_receiver: f64, mode: &str) -> PyResult<Self> {
        let inner = core::GameConfig::new(n, m_sender, m_receiver, noise.inner, mode_from(mode)?)
            .map_err(to_py)?;
        Ok(PyGameConfig { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.name()
    }

    fn with_delta(&self, delta: f64) -> Self {
        PyGameConfig {
            inner: self.inner.with_delta(delta),
        }
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "GameConfig(n={}, noise={}, m_sender={}, m_receiver={}, mode={})",
            c.n,
            c.noise,
            c.m_sender,
            c.m_receiver,
            c.mode.name()
        )
    }
}

#[pyclass(name = "Estimate", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyEstimate {
    #[pyo3(get)]
    value: f64,
    #[pyo3(get)]
    std_error: f64,
    #[pyo3(get)]
    replicates: usize,
}

impl From<core::Estimate> for PyEstimate {
    fn from(e: core::Estimate) -> Self {
        PyEstimate {
            value: e.value,
            std_error: e.std_error,
            replicates: e.replicates,
        }
    }
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate(value={}, std_error={}, replicates={})",
            self.value, self.std_error, self.replicates
        )
    }
}

#[pyclass(name = "EquilibriumResult", frozen)]
struct PyEquilibrium {
    #[pyo3(get)]
    delta: f64,
    #[pyo3(get)]
    offset_r: f64,
    #[pyo3(get)]
    bias_delta: f64,
    #[pyo3(get)]
    bias_std_error: f64,
    #[pyo3(get)]
    receiver_shift: f64,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    receiver_loss: PyEstimate,
    #[pyo3(get)]
    sender_total: PyEstimate,
    #[pyo3(get)]
    info_loss: PyEstimate,
    #[pyo3(get)]
    persuasion_term: PyEstimate,
}

#[pymethods]
impl PyEquilibrium {
    fn __repr__(&self) -> String {
        format!(
            "EquilibriumResult(delta={}, offset_r={}, bias_delta={}, residual={})",
            self.delta, self.offset_r, self.bias_delta, self.residual
        )
    }
}

#[pyfunction]
#[pyo3(signature = (noise, anecdotes, mode="no_foresight", y=0.0))]
fn posterior_mean(noise: &PyNoise, anecdotes: Vec<f64>, mode: &str, y: f64) -> PyResult<f64> {
    core::posterior_mean(&noise.inner, &anecdotes, mode_from(mode)?, y).map_err(to_py)
}

/// `(index, value)` of the anecdote the scheme sends.
#[pyfunction]
fn select_anecdote(
    scheme: &Bound<'_, PyAny>,
    anecdotes: Vec<f64>,
    posterior_mean: f64,
) -> PyResult<(usize, f64)> {
    if anecdotes.is_empty() {
        return Err(PyValueError::new_err("anecdotes must be nonempty"));
    }
    Ok(scheme_from(scheme)?.select(&anecdotes, posterior_mean))
}

#[pyfunction]
fn estimate_bias(
    py: Python<'_>,
    config: &PyGameConfig,
    scheme: &Bound<'_, PyAny>,
    replicates: usize,
    seed: u64,
) -> PyResult<PyEstimate> {
    let scheme = scheme_from(scheme)?;
    let mc = mc_from(replicates, seed)?;
    let c = config.inner;
    py.detach(|| core::estimate_bias(&scheme, &c, &mc))
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn estimate_h(
    py: Python<'_>,
    config: &PyGameConfig,
    r: f64,
    replicates: usize,
    seed: u64,
) -> PyResult<PyEstimate> {
    let mc = mc_from(replicates, seed)?;
    let c = config.inner;
    py.detach(|| core::estimate_h(r, &c, &mc))
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn estimate_anecdote_variance(
    py: Python<'_>,
    config: &PyGameConfig,
    scheme: &Bound<'_, PyAny>,
    replicates: usize,
    seed: u64,
) -> PyResult<PyEstimate> {
    let scheme = scheme_from(scheme)?;
    let mc = mc_from(replicates, seed)?;
    let c = config.inner;
    py.detach(|| core::estimate_anecdote_variance(&scheme, &c, &mc))
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn estimate_receiver_loss(
    py: Python<'_>,
    config: &PyGameConfig,
    scheme: &Bound<'_, PyAny>,
    replicates: usize,
    seed: u64,
) -> PyResult<PyEstimate> {
    let scheme = scheme_from(scheme)?;
    let mc = mc_from(replicates, seed)?;
    let c = config.inner;
    py.detach(|| core::estimate_receiver_loss(&scheme, &c, &mc))
        .map(Into::into)
        .map_err(to_py)
}

/// `[(r, Estimate), ...]` for a strictly increasing grid.
#[pyfunction]
fn scan_h(
    py: Python<'_>,
    config: &PyGameConfig,
    r_grid: Vec<f64>,
    replicates: usize,
    seed: u64,
) -> PyResult<Vec<(f64, PyEstimate)>> {
    let mc = mc_from(replicates, seed)?;
    let c = config.inner;
    let curve = py.detach(|| core::scan_h(&c, &r_grid, &mc)).map_err(to_py)?;
    Ok(curve.points.into_iter().map(|(r, e)| (r, e.into())).collect())
}

#[pyfunction]
#[pyo3(signature = (config, replicates, seed, tol_r=1e-3, bracket=None, max_iter=60))]
fn solve_equilibrium(
    py: Python<'_>,
    config: &PyGameConfig,
    replicates: usize,
    seed: u64,
    tol_r: f64,
    bracket: Option<(f64, f64)>,
    max_iter: usize,
) -> PyResult<PyEquilibrium> {
    let params = SolverParams {
        bracket,
        tol_r,
        max_iter,
        mc: mc_from(replicates, seed)?,
    };
    let c = config.inner;
    let res = py
        .detach(|| core::solve_equilibrium(&c, &params))
        .map_err(to_py)?;
    Ok(PyEquilibrium {
        delta: res.delta,
        offset_r: res.offset_r,
        bias_delta: res.bias_delta,
        bias_std_error: res.bias_std_error,
        receiver_shift: res.receiver_shift,
        residual: res.residual,
        iterations: res.iterations,
        receiver_loss: res.receiver_loss.into(),
        sender_total: res.sender_loss.total.into(),
        info_loss: res.sender_loss.info_loss.into(),
        persuasion_term: res.sender_loss.persuasion_term.into(),
    })
}

#[pyfunction]
fn commitment_scan<'py>(
    py: Python<'py>,
    config: &PyGameConfig,
    r_grid: Vec<f64>,
    replicates: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mc = mc_from(replicates, seed)?;
    let c = config.inner;
    let res = py
        .detach(|| core::commitment_scan(&c, &r_grid, &mc))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("grid", res.grid)?;
    let variances: Vec<PyEstimate> = res.variance_at.into_iter().map(Into::into).collect();
    out.set_item("variance_at", variances)?;
    out.set_item("argmin_offset", res.argmin_offset)?;
    out.set_item("min_variance", PyEstimate::from(res.min_variance))?;
    Ok(out)
}

#[pyfunction]
fn three_uniform_targeted_loss(r: f64) -> PyResult<f64> {
    core::three_uniform_targeted_loss(r).map_err(to_py)
}

#[pyfunction]
fn three_uniform_unbiased_loss() -> f64 {
    core::three_uniform_unbiased_loss()
}

#[pyfunction]
fn asymptotic_commit_loss(noise: &PyNoise, n: usize, delta: f64) -> PyResult<f64> {
    core::asymptotic_commit_loss(&noise.inner, n, delta).map_err(to_py)
}

#[pyfunction]
fn extreme_value_params<'py>(
    py: Python<'py>,
    noise: &PyNoise,
    n: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let s = core::extreme_value_params(&noise.inner, n).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("a_n", s.a_n)?;
    out.set_item("b_n", s.b_n)?;
    out.set_item("gumbel_mean", s.gumbel_mean)?;
    out.set_item("gumbel_variance", s.gumbel_variance)?;
    Ok(out)
}

#[pyfunction]
fn closest_of_n_variance(
    py: Python<'_>,
    noise: &PyNoise,
    n: usize,
    replicates: usize,
    seed: u64,
) -> PyResult<PyEstimate> {
    let mc = mc_from(replicates, seed)?;
    let d = noise.inner;
    py.detach(|| core::closest_of_n_variance(&d, n, &mc))
        .map(Into::into)
        .map_err(to_py)
}

/// Returns `(loss_aligned, loss_expert, preferred)`.
#[pyfunction]
fn expert_compare(
    py: Python<'_>,
    aligned: &PyGameConfig,
    expert: &PyGameConfig,
    scheme: &Bound<'_, PyAny>,
    replicates: usize,
    seed: u64,
) -> PyResult<(PyEstimate, PyEstimate, &'static str)> {
    let scheme = scheme_from(scheme)?;
    let mc = mc_from(replicates, seed)?;
    let (a, e) = (aligned.inner, expert.inner);
    let res = py
        .detach(|| core::expert_compare(&a, &e, &mc, &scheme))
        .map_err(to_py)?;
    Ok((
        res.loss_aligned.into(),
        res.loss_expert.into(),
        res.preferred.name(),
    ))
}

#[pymodule]
fn anecdote(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNoise>()?;
    m.add_class::<PyGameConfig>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add_function(wrap_pyfunction!(posterior_mean, m)?)?;
    m.add_function(wrap_pyfunction!(select_anecdote, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_bias, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_h, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_anecdote_variance, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_receiver_loss, m)?)?;
    m.add_function(wrap_pyfunction!(scan_h, m)?)?;
    m.add_function(wrap_pyfunction!(solve_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(commitment_scan, m)?)?;
    m.add_function(wrap_pyfunction!(three_uniform_targeted_loss, m)?)?;
    m.add_function(wrap_pyfunction!(three_uniform_unbiased_loss, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_commit_loss, m)?)?;
    m.add_function(wrap_pyfunction!(extreme_value_params, m)?)?;
    m.add_function(wrap_pyfunction!(closest_of_n_variance, m)?)?;
    m.add_function(wrap_pyfunction!(expert_compare, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
