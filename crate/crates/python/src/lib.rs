use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use actfs_core::afs::{afs_run, AfsConfig, Aggregation};
use actfs_core::baselines::{self, BaselineKind};
use actfs_core::confbounds::{self, BoundFamily, ConfInterval, Shape};
use actfs_core::dataset::{self, DatasetOracle, LabelOracle, QuantizedDataset};
use actfs_core::harness::{self, SingleFeatureScenario};
use actfs_core::single_feature::{run_single_feature as run_one, BernoulliValues, Strategy};
use actfs_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// A categorical table with optional binary labels.
#[pyclass(name = "Dataset", module = "actfs", frozen)]
struct PyDataset {
    inner: QuantizedDataset,
}

#[pymethods]
impl PyDataset {
    /// Load a CSV with a header row; numeric columns are binned into `bins`.
    #[staticmethod]
    #[pyo3(signature = (path, label=None, bins=dataset::DEFAULT_BINS))]
    fn from_csv(path: &str, label: Option<&str>, bins: usize) -> PyResult<Self> {
        let inner = dataset::load_csv(path, label, bins).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Build from value-index columns.
    #[staticmethod]
    #[pyo3(signature = (columns, labels=None))]
    fn from_columns(columns: Vec<Vec<u32>>, labels: Option<Vec<u8>>) -> PyResult<Self> {
        let inner = QuantizedDataset::from_columns(columns, labels).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Binary table where only feature 0 carries label information.
    #[staticmethod]
    #[pyo3(signature = (m, d, q=(0.05, 0.95), seed=0))]
    fn planted(m: usize, d: usize, q: (f64, f64), seed: u64) -> PyResult<Self> {
        let inner = dataset::planted_dataset(m, d, [q.0, q.1], seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<u8>> {
        self.inner.labels().map(<[u8]>::to_vec)
    }

    fn column(&self, j: usize) -> PyResult<Vec<u32>> {
        if j >= self.inner.d() {
            return Err(PyValueError::new_err(format!("feature {j} out of range")));
        }
        Ok(self.inner.column(j).to_vec())
    }

    /// Conditional entropy of every feature under the stored labels.
    fn exact_entropies(&self) -> PyResult<Vec<f64>> {
        baselines::exact_entropies(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(m={}, d={}, labeled={})",
            self.inner.m(),
            self.inner.d(),
            self.inner.labels().is_some()
        )
    }
}

/// Confidence interval for a Bernoulli rate.
#[pyfunction]
#[pyo3(signature = (successes, n, delta=0.05, family="cp"))]
fn interval(successes: u64, n: u64, delta: f64, family: &str) -> PyResult<(f64, f64)> {
    let family: BoundFamily = parse(family)?;
    let iv = confbounds::interval(family, successes, n, delta).map_err(to_py)?;
    Ok((iv.lower, iv.upper))
}

/// Maximum of `hb`, `var` or `g` over `[lower, upper]`.
#[pyfunction]
fn ucb_shaped(shape: &str, lower: f64, upper: f64) -> PyResult<f64> {
    let shape = match shape {
        "hb" => Shape::Hb,
        "var" => Shape::Fvar,
        "g" => Shape::G,
        other => return Err(PyValueError::new_err(format!("unknown shape `{other}`"))),
    };
    let iv = ConfInterval::new(lower, upper).map_err(to_py)?;
    Ok(confbounds::ucb_shaped(shape, iv))
}

/// Minimum of the binary entropy over `[lower, upper]`.
#[pyfunction]
fn lcb_hb(lower: f64, upper: f64) -> PyResult<f64> {
    Ok(confbounds::lcb_hb(ConfInterval::new(lower, upper).map_err(to_py)?))
}

#[pyfunction]
fn binary_entropy(q: f64) -> f64 {
    confbounds::binary_entropy(q)
}

/// Estimate one feature's conditional entropy with `budget` simulated labels.
///
/// Returns `(estimate, per-value label counts)`.
#[pyfunction]
#[pyo3(signature = (p, q, budget, strategy="I-CP", delta=0.05, seed=0))]
fn run_single_feature(
    p: Vec<f64>,
    q: Vec<f64>,
    budget: usize,
    strategy: &str,
    delta: f64,
    seed: u64,
) -> PyResult<(f64, Vec<u64>)> {
    if p.len() != q.len() {
        return Err(PyValueError::new_err("p and q must have the same length"));
    }
    let strategy: Strategy = parse(strategy)?;
    let mut source = BernoulliValues::new(q, seed).map_err(to_py)?;
    let run = run_one(&p, &mut source, budget, strategy, delta).map_err(to_py)?;
    Ok((run.estimate, run.state.counts().to_vec()))
}

/// Mean estimation error per strategy and budget.
#[pyfunction]
#[pyo3(signature = (q, budgets, replicates=1000, strategies=None, p=None, seed=0))]
fn single_feature_bench<'py>(
    py: Python<'py>,
    q: Vec<f64>,
    budgets: Vec<usize>,
    replicates: usize,
    strategies: Option<Vec<String>>,
    p: Option<Vec<f64>>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut sc = SingleFeatureScenario::uniform_p("scenario", q, budgets, replicates);
    if let Some(names) = strategies {
        sc.strategies = names.iter().map(|n| parse(n)).collect::<PyResult<_>>()?;
    }
    if let Some(p) = p {
        sc.p = p;
    }
    let rows = py
        .detach(|| harness::run_single_feature_bench(&sc, seed))
        .map_err(to_py)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("strategy", r.method)?;
            d.set_item("budget", r.budget)?;
            d.set_item("mean_err", r.summary.mean)?;
            d.set_item("ci_lo", r.summary.lower())?;
            d.set_item("ci_hi", r.summary.upper())?;
            d.set_item("win", r.win)?;
            d.set_item("clear_win", r.clear_win)?;
            Ok(d)
        })
        .collect()
}

/// Labels from a Python callable `index -> 0 | 1`.
struct CallableOracle<'py> {
    callback: Bound<'py, PyAny>,
}

impl LabelOracle for CallableOracle<'_> {
    fn label(&mut self, index: usize) -> actfs_core::Result<u8> {
        let answer = self
            .callback
            .call1((index,))
            .and_then(|v| v.extract::<u8>())
            .map_err(|e| Error::OracleAborted(e.to_string()))?;
        if answer > 1 {
            return Err(Error::OracleAborted(format!("label {answer} for row {index} is not 0 or 1")));
        }
        Ok(answer)
    }
}

/// Run active feature selection. Labels come from `oracle(index)` when
/// given, otherwise from the dataset's label column.
#[pyfunction]
#[pyo3(signature = (dataset, k, budget, delta=0.05, safeguard=Some(30), psi="l1", seed=0, oracle=None))]
#[allow(clippy::too_many_arguments)]
fn afs_select<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    k: usize,
    budget: usize,
    delta: f64,
    safeguard: Option<usize>,
    psi: &str,
    seed: u64,
    oracle: Option<Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyDict>> {
    let ds = &dataset.inner;
    let mut cfg = AfsConfig::new(k, budget);
    cfg.delta = delta;
    cfg.lambda = safeguard;
    cfg.psi = parse::<Aggregation>(psi)?;
    cfg.seed = seed;
    let out = match oracle {
        Some(callback) => afs_run(ds, &mut CallableOracle { callback }, &cfg),
        None => {
            let mut stored = DatasetOracle::new(ds).map_err(to_py)?;
            py.detach(|| afs_run(ds, &mut stored, &cfg))
        }
    }
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("selected", &out.selected)?;
    let names: Vec<&str> = out.selected.iter().map(|&j| ds.names()[j].as_str()).collect();
    d.set_item("names", names)?;
    d.set_item("estimates", &out.estimates)?;
    d.set_item("labeled", &out.labeled)?;
    d.set_item("safeguard_step", out.trace.safeguard_step)?;
    d.set_item("converged_step", out.trace.converged_step)?;
    d.set_item("unspent", out.trace.unspent)?;
    Ok(d)
}

/// Example indices chosen by `random` or `coreset`.
#[pyfunction]
#[pyo3(signature = (dataset, kind, budget, seed=0))]
fn baseline_select(dataset: &PyDataset, kind: &str, budget: usize, seed: u64) -> PyResult<Vec<usize>> {
    let kind: BaselineKind = parse(kind)?;
    baselines::select_examples(&dataset.inner, budget, kind, seed).map_err(to_py)
}

/// The `k` features with smallest estimated entropy given `(index, label)` pairs.
#[pyfunction]
fn rank_from_labels(dataset: &PyDataset, labeled: Vec<(usize, u8)>, k: usize) -> PyResult<Vec<usize>> {
    baselines::rank_from_labels(&dataset.inner, &labeled, k).map_err(to_py)
}

#[pymodule]
fn actfs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(interval, m)?)?;
    m.add_function(wrap_pyfunction!(ucb_shaped, m)?)?;
    m.add_function(wrap_pyfunction!(lcb_hb, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(run_single_feature, m)?)?;
    m.add_function(wrap_pyfunction!(single_feature_bench, m)?)?;
    m.add_function(wrap_pyfunction!(afs_select, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_select, m)?)?;
    m.add_function(wrap_pyfunction!(rank_from_labels, m)?)?;
    Ok(())
}
