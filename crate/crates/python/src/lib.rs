//! Python bindings for `qudit_sim`.

use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyMemoryError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use qudit_sim::harness::{self, WidthMode};
use qudit_sim::{
    BrickworkCircuit, ChainConfig, ChargeProfile, Error, ExperimentSpec, LocalLabel, ModifiedCircuit, SchmidtSpectrum,
    StateVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::ResourceCap(msg) => PyMemoryError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for qudit_sim::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Parses labels such as `"z0"` or `"x2"`.
fn parse_label(s: &str) -> PyResult<LocalLabel> {
    let bad = || PyValueError::new_err(format!("label {s:?} is not of the form z<k> or x<k>"));
    let (kind, digits) = s.split_at_checked(1).ok_or_else(bad)?;
    let k: usize = digits.parse().map_err(|_| bad())?;
    match kind {
        "z" | "Z" => Ok(LocalLabel::Z(k)),
        "x" | "X" => Ok(LocalLabel::X(k)),
        _ => Err(bad()),
    }
}

/// Statevector of a qudit chain.
#[pyclass(name = "State", module = "qudit_sim_py", frozen)]
pub struct PyState {
    inner: StateVector,
}

#[pymethods]
impl PyState {
    /// Product state from per-site labels `"z<k>"` / `"x<k>"`.
    #[staticmethod]
    fn product(labels: Vec<String>, d: usize) -> PyResult<Self> {
        let labels = labels.iter().map(|l| parse_label(l)).collect::<PyResult<Vec<_>>>()?;
        let cfg = ChainConfig::new(labels.len(), d, 0).py()?;
        Ok(Self { inner: qudit_sim::product_state(&labels, cfg).py()? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, d, seed = 0))]
    fn random(n: usize, d: usize, seed: u64) -> PyResult<Self> {
        let cfg = ChainConfig::new(n, d, seed).py()?;
        Ok(Self { inner: StateVector::random(cfg, &mut ChaCha8Rng::seed_from_u64(seed)) })
    }

    #[staticmethod]
    fn from_amplitudes(amplitudes: Vec<Complex64>, n: usize, d: usize) -> PyResult<Self> {
        let cfg = ChainConfig::new(n, d, 0).py()?;
        Ok(Self { inner: StateVector::from_amplitudes(amplitudes, cfg).py()? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.config().sites()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.config().dim()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().to_vec()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn inner_product(&self, other: &PyState) -> PyResult<Complex64> {
        self.inner.inner(&other.inner).py()
    }

    fn charge_expectation(&self, site: usize) -> PyResult<f64> {
        self.inner.charge_expectation(site).py()
    }

    /// `<Q_i>` for every site.
    fn charge_profile(&self) -> PyResult<Vec<f64>> {
        Ok(qudit_sim::charge_profile(&self.inner).py()?.values)
    }

    /// Reduced-density-matrix eigenvalues across the cut after `cut`.
    fn schmidt_spectrum(&self, cut: usize) -> PyResult<Vec<f64>> {
        Ok(qudit_sim::schmidt_spectrum(&self.inner, cut).py()?.values().to_vec())
    }

    fn renyi_entropy(&self, cut: usize, alpha: f64) -> PyResult<f64> {
        qudit_sim::renyi_entropy(&self.spectrum(cut)?, alpha).py()
    }

    fn min_entropy(&self, cut: usize) -> PyResult<f64> {
        qudit_sim::min_entropy(&self.spectrum(cut)?).py()
    }

    fn von_neumann(&self, cut: usize) -> PyResult<f64> {
        qudit_sim::von_neumann(&self.spectrum(cut)?).py()
    }

    fn __len__(&self) -> usize {
        self.inner.amplitudes().len()
    }

    fn __repr__(&self) -> String {
        format!("State(n={}, d={})", self.n(), self.d())
    }
}

impl PyState {
    fn spectrum(&self, cut: usize) -> PyResult<SchmidtSpectrum> {
        qudit_sim::schmidt_spectrum(&self.inner, cut).py()
    }
}

/// Brickwork circuit of charge-conserving Haar gates.
#[pyclass(name = "Circuit", module = "qudit_sim_py", frozen)]
pub struct PyCircuit {
    inner: Arc<BrickworkCircuit>,
}

#[pymethods]
impl PyCircuit {
    #[staticmethod]
    #[pyo3(signature = (n, d, depth, key = 0))]
    fn sample(n: usize, d: usize, depth: usize, key: u64) -> PyResult<Self> {
        let cfg = ChainConfig::new(n, d, key).py()?;
        Ok(Self { inner: Arc::new(qudit_sim::sample_circuit(cfg, depth, key).py()?) })
    }

    #[staticmethod]
    fn load_json(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(BrickworkCircuit::load_json(path).py()?) })
    }

    fn save_json(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save_json(path).py()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    /// `U(t, 0) psi`.
    fn evolve(&self, py: Python<'_>, state: &PyState, t: usize) -> PyResult<PyState> {
        let out = py.detach(|| self.inner.evolve(&state.inner, t)).py()?;
        Ok(PyState { inner: out })
    }

    /// The circuit with its middle-bond gates replaced by their `<00|U|00>` phase.
    fn modified(&self) -> PyResult<PyModifiedCircuit> {
        Ok(PyModifiedCircuit { inner: ModifiedCircuit::new(self.inner.clone()).py()? })
    }
}

#[pyclass(name = "ModifiedCircuit", module = "qudit_sim_py", frozen)]
pub struct PyModifiedCircuit {
    inner: ModifiedCircuit,
}

#[pymethods]
impl PyModifiedCircuit {
    fn evolve(&self, py: Python<'_>, state: &PyState, t: usize) -> PyResult<PyState> {
        let out = py.detach(|| self.inner.evolve(&state.inner, t)).py()?;
        Ok(PyState { inner: out })
    }

    fn phases(&self) -> Vec<Complex64> {
        self.inner.phases().to_vec()
    }
}

/// Classical averaging map applied `t` times to a charge profile.
#[pyfunction]
fn random_walk_oracle(profile: Vec<f64>, t: usize) -> Vec<f64> {
    qudit_sim::random_walk_oracle(&ChargeProfile::new(profile, 0), t).values
}

fn experiment(
    n: usize,
    d: usize,
    depth: usize,
    alpha: f64,
    m: Option<usize>,
    scaling_c: f64,
    seed: u64,
) -> PyResult<ExperimentSpec> {
    let mode = m.map_or(WidthMode::Scaling { c: scaling_c }, WidthMode::Fixed);
    ExperimentSpec::new(ChainConfig::new(n, d, seed).py()?, depth, mode, alpha).py()
}

/// Certificates for `t = 0..=depth` of one realization, as a list of dicts.
#[pyfunction]
#[pyo3(signature = (n, d, depth, alpha = 2.0, m = None, scaling_c = 2.0, seed = 0, realization = 0))]
#[allow(clippy::too_many_arguments)]
fn run_instance<'py>(
    py: Python<'py>,
    n: usize,
    d: usize,
    depth: usize,
    alpha: f64,
    m: Option<usize>,
    scaling_c: f64,
    seed: u64,
    realization: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = experiment(n, d, depth, alpha, m, scaling_c, seed)?;
    let certs = py.detach(|| harness::run_instance(&spec, realization)).py()?;
    certs
        .iter()
        .map(|c| {
            let out = PyDict::new(py);
            out.set_item("realization", c.realization)?;
            out.set_item("t", c.t)?;
            out.set_item("m", c.m)?;
            out.set_item("alpha", c.alpha)?;
            out.set_item("overlap0", c.overlap0)?;
            out.set_item("overlap_t", c.overlap_t)?;
            out.set_item("delta_norm", c.delta_norm)?;
            out.set_item("telescoping_bound", c.telescoping_bound)?;
            out.set_item("v_overlap", c.v_overlap)?;
            out.set_item("lambda1", c.lambda1)?;
            out.set_item("R_alpha", c.r_alpha)?;
            out.set_item("R_inf", c.r_inf)?;
            out.set_item("bound", c.bound)?;
            out.set_item("q_mid", c.q_mid)?;
            out.set_item("slacks", c.slacks.to_vec())?;
            out.set_item("holds", c.holds)?;
            Ok(out)
        })
        .collect()
}

/// Enumerates the central X-basis family at time `t` and reports the Markov subset.
#[pyfunction]
#[pyo3(signature = (n, d, depth, t, m, p_degree = 2, seed = 0, realization = 0))]
#[allow(clippy::too_many_arguments)]
fn enumerate_s_prime<'py>(
    py: Python<'py>,
    n: usize,
    d: usize,
    depth: usize,
    t: usize,
    m: usize,
    p_degree: u32,
    seed: u64,
    realization: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = experiment(n, d, depth, 2.0, Some(m), 2.0, seed)?.with_p_degree(p_degree);
    let rep = py.detach(|| harness::enumerate_s_prime(&spec, t, realization)).py()?;
    let out = PyDict::new(py);
    out.set_item("m", rep.m)?;
    out.set_item("t", rep.t)?;
    out.set_item("threshold", rep.threshold)?;
    out.set_item("fraction", rep.fraction)?;
    out.set_item("size", rep.size)?;
    out.set_item("delta_norm", rep.delta_norm)?;
    out.set_item("sum_sq", rep.sum_sq)?;
    out.set_item("markov_holds", rep.markov_holds)?;
    out.set_item("bessel_holds", rep.bessel_holds)?;
    out.set_item("overlaps", rep.overlaps)?;
    Ok(out)
}

#[pymodule]
fn qudit_sim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyModifiedCircuit>()?;
    m.add_function(wrap_pyfunction!(random_walk_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_instance, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_s_prime, m)?)?;
    Ok(())
}
