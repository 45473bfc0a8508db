//! Python bindings: model construction, spectra, the displaced-basis
//! kernel, the scaling law and the acceptance suite.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rabi_lab::acceptance::{self, ForcedCutoff, VerifyOptions};
use rabi_lab::displaced::{self, TwoSpinParams};
use rabi_lab::models::{self, IonParams};
use rabi_lab::spectra::{self, eigendecompose, solve_converged};
use rabi_lab::{scaling, BosonBasis, IsingAxis};

create_exception!(rabi_lab, NumericalError, PyException, "A solve failed to converge or a check failed.");

fn to_py(e: rabi_lab::Error) -> PyErr {
    let msg = format!("{}: {e}", e.code());
    if e.is_numerical() {
        NumericalError::new_err(msg)
    } else {
        PyValueError::new_err(msg)
    }
}

fn axis(name: &str) -> PyResult<IsingAxis> {
    match name.to_ascii_lowercase().as_str() {
        "zz" => Ok(IsingAxis::ZZ),
        "xx" => Ok(IsingAxis::XX),
        _ => Err(PyValueError::new_err(format!("ising axis must be 'zz' or 'xx', got {name:?}"))),
    }
}

#[pyclass(name = "ModelSpec", module = "rabi_lab", from_py_object)]
#[derive(Clone)]
pub struct PyModelSpec {
    inner: rabi_lab::ModelSpec,
}

#[pymethods]
impl PyModelSpec {
    #[staticmethod]
    #[pyo3(signature = (delta, omega=1.0, coupling=0.0, bias=0.0))]
    fn biased_rabi(delta: f64, omega: f64, coupling: f64, bias: f64) -> PyResult<Self> {
        checked(rabi_lab::ModelSpec::biased_rabi(delta, omega, coupling, bias))
    }

    #[staticmethod]
    #[pyo3(signature = (delta, epsilon, eta=0.0, omega=1.0, coupling=0.0, axis="xx"))]
    fn two_spin(delta: f64, epsilon: f64, eta: f64, omega: f64, coupling: f64, axis: &str) -> PyResult<Self> {
        checked(rabi_lab::ModelSpec::two_spin(delta, omega, coupling, epsilon, eta, self::axis(axis)?))
    }

    #[staticmethod]
    #[pyo3(signature = (delta, epsilons, eta=0.0, omega=1.0, coupling=0.0, axis="xx"))]
    fn star(delta: f64, epsilons: Vec<f64>, eta: f64, omega: f64, coupling: f64, axis: &str) -> PyResult<Self> {
        checked(rabi_lab::ModelSpec::star(delta, omega, coupling, &epsilons, eta, self::axis(axis)?))
    }

    /// Bias sits on the last spin.
    #[staticmethod]
    #[pyo3(signature = (delta, epsilons, eta=0.0, omega=1.0, coupling=0.0, axis="xx"))]
    fn chain(delta: f64, epsilons: Vec<f64>, eta: f64, omega: f64, coupling: f64, axis: &str) -> PyResult<Self> {
        checked(rabi_lab::ModelSpec::chain(delta, omega, coupling, &epsilons, eta, self::axis(axis)?))
    }

    /// Model from a TOML document; a `cutoff` key is accepted and ignored.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let doc = models::ModelDocument::from_toml(text).map_err(to_py)?;
        Ok(PyModelSpec { inner: doc.spec })
    }

    /// Two-spin model read off trapped-ion parameters.
    #[staticmethod]
    fn from_ion(rabi: f64, detuning: f64, trap_freq: f64, lamb_dicke: f64, splitting: f64, ion_coupling: f64) -> PyResult<Self> {
        let p = IonParams { rabi, detuning, trap_freq, lamb_dicke, splitting, ion_coupling };
        models::ion_param_map(&p).map(|inner| PyModelSpec { inner }).map_err(to_py)
    }

    #[getter]
    fn n_spins(&self) -> usize {
        self.inner.n_spins
    }

    #[getter]
    fn tunneling(&self) -> Vec<f64> {
        self.inner.tunneling.clone()
    }

    #[getter]
    fn boson_freq(&self) -> f64 {
        self.inner.boson_freq
    }

    #[getter]
    fn coupling(&self) -> f64 {
        self.inner.coupling
    }

    #[getter]
    fn bias(&self) -> Vec<f64> {
        self.inner.bias.clone()
    }

    #[getter]
    fn ising_axis(&self) -> &'static str {
        self.inner.ising_axis.as_str()
    }

    /// (i, j, strength) with 1-based spin labels.
    #[getter]
    fn ising_edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.ising_edges.iter().map(|e| (e.i, e.j, e.strength)).collect()
    }

    fn with_coupling(&self, coupling: f64) -> PyResult<Self> {
        checked(rabi_lab::ModelSpec { coupling, ..self.inner.clone() })
    }

    fn displacement(&self) -> f64 {
        self.inner.displacement()
    }

    fn dim(&self, cutoff: usize) -> usize {
        self.inner.dim(BosonBasis::new(cutoff))
    }

    fn is_parity_symmetric(&self) -> bool {
        self.inner.is_parity_symmetric()
    }

    fn to_json(&self) -> String {
        self.inner.digest()
    }

    fn __repr__(&self) -> String {
        format!("ModelSpec({})", self.inner.digest())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

fn checked(inner: rabi_lab::ModelSpec) -> PyResult<PyModelSpec> {
    inner.validate().map_err(to_py)?;
    Ok(PyModelSpec { inner })
}

/// Lowest `k` levels (all when `k` is None). Without a cutoff the cutoff is
/// raised until the levels stop moving. Returns (cutoff, energies).
#[pyfunction]
#[pyo3(signature = (spec, cutoff=None, k=None))]
fn spectrum(py: Python<'_>, spec: &PyModelSpec, cutoff: Option<usize>, k: Option<usize>) -> PyResult<(usize, Vec<f64>)> {
    let spec = spec.inner.clone();
    py.detach(move || match cutoff {
        Some(c) => {
            let h = models::build_hamiltonian(&spec, BosonBasis::new(c))?;
            Ok((c, eigendecompose(&h, k)?.eigenvalues().to_vec()))
        }
        None => {
            let solved = solve_converged(&spec, k.unwrap_or(4), 10)?;
            Ok((solved.cutoff, solved.spectrum.eigenvalues().to_vec()))
        }
    })
    .map_err(to_py)
}

/// Parity label (+1/−1) of each of the lowest `k` levels at a fixed cutoff.
#[pyfunction]
#[pyo3(signature = (spec, cutoff, k=None))]
fn parity_labels(py: Python<'_>, spec: &PyModelSpec, cutoff: usize, k: Option<usize>) -> PyResult<Vec<i8>> {
    let spec = spec.inner.clone();
    py.detach(move || {
        let basis = BosonBasis::new(cutoff);
        let h = models::build_hamiltonian(&spec, basis)?;
        let s = eigendecompose(&h, k)?;
        Ok(models::parity_sectors(&spec, basis, &s)?.labels)
    })
    .map_err(to_py)
}

/// Frobenius and spectral norms of [H, P] at a fixed cutoff.
#[pyfunction]
fn parity_commutator(spec: &PyModelSpec, cutoff: usize) -> PyResult<(f64, f64)> {
    let basis = BosonBasis::new(cutoff);
    let h = models::build_hamiltonian(&spec.inner, basis).map_err(to_py)?;
    let p = models::build_parity(spec.inner.n_spins, basis).map_err(to_py)?;
    let norms = models::commutator_norms(&h, &p).map_err(to_py)?;
    Ok((norms.frobenius, norms.spectral))
}

/// Ground-state ⟨σᶻ⟩ of a 1-based site with a converged cutoff.
#[pyfunction]
#[pyo3(signature = (spec, site=1))]
fn ground_sigma_z(py: Python<'_>, spec: &PyModelSpec, site: usize) -> PyResult<f64> {
    let spec = spec.inner.clone();
    py.detach(move || {
        let solved = solve_converged(&spec, 2, 10)?;
        let ground = spectra::ground_state(&solved.spectrum);
        let sz = rabi_lab::hilbert::embed_spin(
            spec.n_spins,
            site,
            rabi_lab::hilbert::Axis::Z,
            BosonBasis::new(solved.cutoff),
        )?;
        spectra::expectation(&ground.vector, &sz)
    })
    .map_err(to_py)
}

/// ⟨m|D(−2q)|n⟩ between displaced Fock states.
#[pyfunction]
fn overlap_d(m: usize, n: usize, q: f64) -> f64 {
    displaced::overlap_d(m, n, q)
}

fn two_spin(delta: f64, epsilon: f64, eta: f64, omega: f64, coupling: f64) -> TwoSpinParams {
    TwoSpinParams { delta, omega, lambda: coupling, epsilon, eta }
}

/// Closed-form levels at level m: [E_m1−, E_m1+, E_m2−, E_m2+].
#[pyfunction]
#[pyo3(signature = (m, delta, epsilon, eta=0.0, omega=1.0, coupling=0.0))]
fn adiabatic_energies(m: usize, delta: f64, epsilon: f64, eta: f64, omega: f64, coupling: f64) -> [f64; 4] {
    displaced::adiabatic_energies(m, &two_spin(delta, epsilon, eta, omega, coupling)).map(|l| l.energy)
}

/// Lowest `k` levels of the XX pair from the displaced-basis equations,
/// cutoff converged. Returns (cutoff, energies).
#[pyfunction]
#[pyo3(signature = (delta, epsilon, eta=0.0, omega=1.0, coupling=0.0, k=4))]
fn displaced_spectrum(
    py: Python<'_>,
    delta: f64,
    epsilon: f64,
    eta: f64,
    omega: f64,
    coupling: f64,
    k: usize,
) -> PyResult<(usize, Vec<f64>)> {
    let p = two_spin(delta, epsilon, eta, omega, coupling);
    py.detach(move || displaced::solve_displaced_converged(&p, k, 10))
        .map(|d| (d.cutoff, d.levels))
        .map_err(to_py)
}

#[pyfunction]
fn kappa_of(spec: &PyModelSpec) -> PyResult<f64> {
    scaling::kappa_of(&spec.inner).map_err(to_py)
}

#[pyfunction]
fn beta_c(kappa: f64) -> PyResult<f64> {
    scaling::beta_c_of(kappa).map_err(to_py)
}

#[pyfunction]
fn alpha_of(beta: f64, beta_c: f64) -> f64 {
    scaling::alpha_of(beta, beta_c)
}

#[pyfunction]
fn sigma_z_beta(kappa: f64, beta: f64) -> f64 {
    scaling::sigma_z_beta(kappa, beta)
}

#[pyfunction]
fn sigma_z_alpha(alpha: f64, branch_sign: f64) -> f64 {
    scaling::sigma_z_alpha(alpha, branch_sign)
}

/// Analytic and numeric ⟨σ₁ᶻ⟩ over β = (λ/ω)², one dict per point.
#[pyfunction]
fn scaling_curve<'py>(py: Python<'py>, spec: &PyModelSpec, betas: Vec<f64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = spec.inner.clone();
    let curve = py.detach(move || scaling::scaling_curve(&spec, &betas)).map_err(to_py)?;
    curve
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("kappa", curve.kappa)?;
            d.set_item("beta", r.beta)?;
            d.set_item("beta_over_beta_c", r.beta_over_beta_c)?;
            d.set_item("alpha", r.alpha)?;
            d.set_item("sigma_z_analytic", r.sigma_z_analytic)?;
            d.set_item("sigma_z_numeric", r.sigma_z_numeric)?;
            d.set_item("cutoff", r.cutoff)?;
            d.set_item("error", r.error.clone())?;
            Ok(d)
        })
        .collect()
}

/// Runs acceptance criteria (all when `criteria` is None); `force_cutoff`
/// is (q, cutoff). Returns one dict per criterion.
#[pyfunction]
#[pyo3(signature = (criteria=None, inject_d_sign_error=false, force_cutoff=None))]
fn verify<'py>(
    py: Python<'py>,
    criteria: Option<Vec<u8>>,
    inject_d_sign_error: bool,
    force_cutoff: Option<(f64, usize)>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let opts = VerifyOptions {
        inject_d_sign_error,
        forced_cutoff: force_cutoff.map(|(q, cutoff)| ForcedCutoff { q, cutoff }),
    };
    let ids = criteria.unwrap_or_else(|| acceptance::CRITERIA.iter().map(|c| c.0).collect());
    let reports = py
        .detach(move || ids.iter().map(|&id| acceptance::run_criterion(id, &opts)).collect::<rabi_lab::Result<Vec<_>>>())
        .map_err(to_py)?;
    reports
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("id", r.id)?;
            d.set_item("name", r.name)?;
            d.set_item("passed", r.passed)?;
            d.set_item("seconds", r.seconds)?;
            d.set_item("detail", &r.detail)?;
            Ok(d)
        })
        .collect()
}

#[pymodule(name = "rabi_lab")]
fn rabi_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelSpec>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(parity_labels, m)?)?;
    m.add_function(wrap_pyfunction!(parity_commutator, m)?)?;
    m.add_function(wrap_pyfunction!(ground_sigma_z, m)?)?;
    m.add_function(wrap_pyfunction!(overlap_d, m)?)?;
    m.add_function(wrap_pyfunction!(adiabatic_energies, m)?)?;
    m.add_function(wrap_pyfunction!(displaced_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_of, m)?)?;
    m.add_function(wrap_pyfunction!(beta_c, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_of, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_z_beta, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_z_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_curve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
