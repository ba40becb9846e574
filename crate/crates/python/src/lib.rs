//! Python bindings.

use fsparse_core::exact::{distance_from_ranked, exact_hashing_error, exact_spectrum, exact_top_s_energy};
use fsparse_core::instances::{self, CoeffLaw};
use fsparse_core::oracle::{squared_norm_exact, Backing};
use fsparse_core::{
    CosetHash, CubePoint, EstimatorParams, FunctionOracle as CoreOracle, QueryLedger as CoreLedger, SparseSpectrum,
    SpectralTable,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn py_err(e: fsparse_core::Error) -> PyErr {
    match e {
        fsparse_core::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for fsparse_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn table_from(values: Vec<f64>) -> PyResult<SpectralTable> {
    let len = values.len();
    if !len.is_power_of_two() {
        return Err(PyValueError::new_err(format!("length {len} is not a power of two")));
    }
    SpectralTable::new(len.trailing_zeros(), values).py()
}

/// Query access to a real function on {0,1}^n. Points and frequencies are
/// integers whose bit i is coordinate i.
#[pyclass(name = "FunctionOracle", frozen)]
struct PyOracle {
    inner: CoreOracle,
}

#[pymethods]
impl PyOracle {
    /// Oracle backed by a table of 2^n values.
    #[staticmethod]
    fn dense(values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: CoreOracle::dense(table_from(values)?) })
    }

    /// Oracle backed by Fourier coefficients given as (alpha, value) pairs.
    #[staticmethod]
    fn sparse(n: u32, coeffs: Vec<(u64, f64)>) -> PyResult<Self> {
        Ok(Self { inner: CoreOracle::sparse(SparseSpectrum::from_pairs(n, &coeffs).py()?) })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreOracle::from_json(text).py()? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreOracle::load(path).py()? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).py()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }

    #[getter]
    fn is_sparse(&self) -> bool {
        matches!(self.inner.backing(), Backing::Sparse(_))
    }

    /// Values at the given points, charged to `ledger` when one is passed.
    #[pyo3(signature = (points, ledger=None))]
    fn evaluate(&self, points: Vec<u64>, ledger: Option<&PyLedger>) -> PyResult<Vec<f64>> {
        let n = self.inner.n();
        let pts = points.into_iter().map(|p| CubePoint::new(p, n)).collect::<Result<Vec<_>, _>>().py()?;
        let scratch = CoreLedger::new();
        self.inner.evaluate_batch(ledger.map_or(&scratch, |l| &l.inner), &pts).py()
    }

    /// All 2^n values.
    fn values(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.to_table().py()?.into_values())
    }

    fn squared_norm(&self) -> f64 {
        squared_norm_exact(&self.inner)
    }

    fn normalized(&self) -> PyResult<Self> {
        Ok(Self { inner: self.inner.normalized().py()? })
    }

    fn densified(&self) -> PyResult<Self> {
        Ok(Self { inner: self.inner.densified().py()? })
    }

    fn __repr__(&self) -> String {
        let kind = if self.is_sparse() { "sparse" } else { "dense" };
        format!("FunctionOracle(n={}, {kind})", self.inner.n())
    }
}

/// Counts oracle queries; optionally records every queried point.
#[pyclass(name = "QueryLedger", frozen)]
struct PyLedger {
    inner: CoreLedger,
}

#[pymethods]
impl PyLedger {
    #[new]
    #[pyo3(signature = (recording=false))]
    fn new(recording: bool) -> Self {
        Self { inner: if recording { CoreLedger::recording() } else { CoreLedger::new() } }
    }

    #[getter]
    fn count(&self) -> u64 {
        self.inner.count()
    }

    /// Sorted multiset of queried points, or None when not recording.
    fn recorded(&self) -> Option<Vec<u64>> {
        self.inner.recorded_multiset()
    }

    fn reset(&self) {
        self.inner.reset()
    }
}

#[allow(clippy::too_many_arguments)]
fn params(
    s: u64,
    eps: f64,
    delta: f64,
    known_norm: f64,
    gamma_mult: Option<f64>,
    ell: Option<u32>,
    reps: Option<u32>,
    d_override: Option<u32>,
) -> EstimatorParams {
    let mut p = EstimatorParams::new(s, eps, delta).with_known_norm(known_norm);
    if let Some(m) = gamma_mult {
        p.c_gamma = m;
    }
    p.ell_override = ell;
    p.reps_override = reps;
    p.d_override = d_override;
    p
}

/// Forward transform, scaled by 2^-n.
#[pyfunction]
fn wht_forward(values: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(fsparse_core::wht_forward(&table_from(values)?).into_values())
}

/// Inverse transform, unscaled.
#[pyfunction]
fn wht_inverse(coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(fsparse_core::wht_inverse(&table_from(coeffs)?).into_values())
}

#[pyfunction]
#[pyo3(signature = (s, eps, delta, n, gamma_mult=None, ell=None, reps=None, d_override=None))]
#[allow(clippy::too_many_arguments)]
fn derive_params<'py>(
    py: Python<'py>,
    s: u64,
    eps: f64,
    delta: f64,
    n: u32,
    gamma_mult: Option<f64>,
    ell: Option<u32>,
    reps: Option<u32>,
    d_override: Option<u32>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(s, eps, delta, 1.0, gamma_mult, ell, reps, d_override);
    let r = fsparse_core::derive_params(&p, n).py()?;
    let d = PyDict::new(py);
    d.set_item("s", r.s)?;
    d.set_item("d", r.d)?;
    d.set_item("gamma", r.gamma)?;
    d.set_item("ell", r.ell)?;
    d.set_item("reps", r.reps)?;
    d.set_item("query_budget", r.query_budget())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (oracle, s, eps, delta=0.1, seed=0, known_norm=1.0, gamma_mult=None, ell=None, reps=None, d_override=None, ledger=None))]
#[allow(clippy::too_many_arguments)]
fn estimate_distance<'py>(
    py: Python<'py>,
    oracle: &PyOracle,
    s: u64,
    eps: f64,
    delta: f64,
    seed: u64,
    known_norm: f64,
    gamma_mult: Option<f64>,
    ell: Option<u32>,
    reps: Option<u32>,
    d_override: Option<u32>,
    ledger: Option<&PyLedger>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(s, eps, delta, known_norm, gamma_mult, ell, reps, d_override);
    let scratch = CoreLedger::new();
    let l = ledger.map_or(&scratch, |l| &l.inner);
    let est = py.detach(|| fsparse_core::estimate_distance(&oracle.inner, l, &p, seed)).py()?;
    let r = est.energy.params;
    let d = PyDict::new(py);
    d.set_item("distance", est.distance)?;
    d.set_item("xi", est.energy.xi)?;
    d.set_item("run_xis", est.energy.run_xis)?;
    d.set_item("known_norm", est.known_norm)?;
    d.set_item("d", r.d)?;
    d.set_item("gamma", r.gamma)?;
    d.set_item("ell", r.ell)?;
    d.set_item("reps", r.reps)?;
    d.set_item("queries_used", est.energy.queries_used)?;
    d.set_item("seed", seed)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (oracle, s, eps, delta=0.1, seed=0, known_norm=1.0, gamma_mult=None, ell=None, reps=None, d_override=None, ledger=None))]
#[allow(clippy::too_many_arguments)]
fn ffst_test<'py>(
    py: Python<'py>,
    oracle: &PyOracle,
    s: u64,
    eps: f64,
    delta: f64,
    seed: u64,
    known_norm: f64,
    gamma_mult: Option<f64>,
    ell: Option<u32>,
    reps: Option<u32>,
    d_override: Option<u32>,
    ledger: Option<&PyLedger>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(s, eps, delta, known_norm, gamma_mult, ell, reps, d_override);
    let scratch = CoreLedger::new();
    let l = ledger.map_or(&scratch, |l| &l.inner);
    let v = py.detach(|| fsparse_core::ffst_test(&oracle.inner, l, &p, seed)).py()?;
    let d = PyDict::new(py);
    d.set_item("accept", v.accept)?;
    d.set_item("xi", v.xi)?;
    d.set_item("threshold", v.threshold)?;
    d.set_item("d", v.params.d)?;
    d.set_item("gamma", v.params.gamma)?;
    d.set_item("ell", v.params.ell)?;
    d.set_item("reps", v.params.reps)?;
    d.set_item("queries_used", v.queries_used)?;
    Ok(d)
}

/// Exact squared distance to the nearest s-sparse function (n <= 24).
#[pyfunction]
fn exact_distance(oracle: &PyOracle, s: u64) -> PyResult<f64> {
    Ok(distance_from_ranked(&exact_spectrum(&oracle.inner.to_table().py()?).py()?, s))
}

#[pyfunction]
fn exact_top_s(oracle: &PyOracle, s: u64) -> PyResult<f64> {
    Ok(exact_top_s_energy(&exact_spectrum(&oracle.inner.to_table().py()?).py()?, s))
}

/// Exact hashing error of a random codimension-d hash drawn from `seed`.
#[pyfunction]
#[pyo3(signature = (oracle, s, d, seed=0))]
fn hashing_error(oracle: &PyOracle, s: u64, d: u32, seed: u64) -> PyResult<f64> {
    let ranked = exact_spectrum(&oracle.inner.to_table().py()?).py()?;
    let hash = CosetHash::sample(d, oracle.inner.n(), &mut ChaCha8Rng::seed_from_u64(seed)).py()?;
    exact_hashing_error(&ranked, &hash, s).py()
}

/// Generate an instance. `kind` is one of sparse, noisy, flat, dyes, dno, dense.
#[pyfunction]
#[pyo3(signature = (kind, n, s=1, seed=0, rho=0.1))]
fn generate(kind: &str, n: u32, s: u64, seed: u64, rho: f64) -> PyResult<PyOracle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner = match kind {
        "sparse" => instances::gen_sparse(n, s, &mut rng, CoeffLaw::default()).py()?.oracle,
        "noisy" => instances::gen_noisy_sparse(n, s, rho, &mut rng).py()?.oracle,
        "flat" => instances::gen_flat(n, s, &mut rng).py()?.oracle,
        "dyes" => instances::gen_dyes(n, s, &mut rng).py()?.oracle,
        "dno" => instances::gen_dno(n, &mut rng).py()?.oracle,
        "dense" => instances::gen_random_dense(n, &mut rng).py()?,
        other => return Err(PyValueError::new_err(format!("unknown instance kind {other:?}"))),
    };
    Ok(PyOracle { inner })
}

#[pymodule]
fn fsparse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOracle>()?;
    m.add_class::<PyLedger>()?;
    m.add_function(wrap_pyfunction!(wht_forward, m)?)?;
    m.add_function(wrap_pyfunction!(wht_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(derive_params, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_distance, m)?)?;
    m.add_function(wrap_pyfunction!(ffst_test, m)?)?;
    m.add_function(wrap_pyfunction!(exact_distance, m)?)?;
    m.add_function(wrap_pyfunction!(exact_top_s, m)?)?;
    m.add_function(wrap_pyfunction!(hashing_error, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
