use std::path::PathBuf;

use outcoupler::cli::{self, Preset, RunPlan};
use outcoupler::dressed;
use outcoupler::error::Error;
use outcoupler::phys::{make_rb87, Constants, Scheme, TrapConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain { .. } | Error::Duration { .. } | Error::Fit(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn scheme(name: &str) -> PyResult<Scheme> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown scheme {name:?}; use rf_three_state, raman_two_state or raman_three_state")))
}

fn trap(omega_z: Option<f64>) -> TrapConfig {
    let mut t = TrapConfig::standard_trap();
    if let Some(w) = omega_z {
        t.omega_z = w;
    }
    t
}

/// Gravitational sag of the condensate in metres.
#[pyfunction]
#[pyo3(signature = (omega_z=None))]
fn sag(omega_z: Option<f64>) -> f64 {
    dressed::gravitational_sag(&Constants::default(), &trap(omega_z))
}

/// Rabi frequency (rad/s) above which the bound dressed state holds atoms.
#[pyfunction]
#[pyo3(signature = (omega_z=None, big_delta=None))]
fn critical_rabi(omega_z: Option<f64>, big_delta: Option<f64>) -> PyResult<f64> {
    let t = trap(omega_z);
    let d = big_delta.unwrap_or_else(|| dressed::sag_detuning(&Constants::default(), &t, &make_rb87()));
    dressed::strong_coupling_threshold(t.omega_z, d).map_err(err)
}

#[pyfunction]
fn oscillation_frequency(rabi_omega: f64, scheme_name: &str) -> PyResult<f64> {
    Ok(dressed::oscillation_frequency(rabi_omega, scheme(scheme_name)?))
}

/// Dressed and bare potentials (J) on the given positions for the standard
/// trap; the detuning defaults to resonance at the sag.
#[pyfunction]
#[pyo3(signature = (z, rabi_omega, big_delta=None))]
fn dressed_potentials<'py>(py: Python<'py>, z: Vec<f64>, rabi_omega: f64, big_delta: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let c = Constants::default();
    let t = TrapConfig::standard_trap();
    let s = make_rb87();
    let d = big_delta.unwrap_or_else(|| dressed::sag_detuning(&c, &t, &s));
    let sys = dressed::dressed_potentials(&dressed::detuning_profile(&c, &t, &s, d), rabi_omega).map_err(err)?;
    let rows: Vec<_> = z.iter().map(|&zi| sys.sample(zi)).collect();
    let out = PyDict::new(py);
    out.set_item("z", z)?;
    out.set_item("delta", rows.iter().map(|r| r.delta).collect::<Vec<_>>())?;
    out.set_item("v_plus", rows.iter().map(|r| r.v_plus).collect::<Vec<_>>())?;
    out.set_item("v_minus", rows.iter().map(|r| r.v_minus).collect::<Vec<_>>())?;
    out.set_item("v_bare_t", rows.iter().map(|r| r.v_bare_t).collect::<Vec<_>>())?;
    out.set_item("v_bare_u", rows.iter().map(|r| r.v_bare_u).collect::<Vec<_>>())?;
    Ok(out)
}

/// Fit `A(1 − exp(−(x − x0)/r))` to a shutdown curve.
#[pyfunction]
fn fit_shutdown<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let f = outcoupler::analysis::fit_saturating_exponential(&x, &y, None).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("A", f.a)?;
    out.set_item("x0", f.x0)?;
    out.set_item("r", f.r)?;
    out.set_item("knee", f.knee())?;
    out.set_item("stderr", f.stderr().to_vec())?;
    out.set_item("residual_norm", f.residual_norm)?;
    out.set_item("converged", f.converged)?;
    Ok(out)
}

#[pyfunction]
fn presets() -> Vec<(&'static str, &'static str, &'static str)> {
    cli::list_presets().into_iter().map(|p| (p.name, p.figure, p.description)).collect()
}

/// Run a preset into `out`, as the command-line tool does.
#[pyfunction]
#[pyo3(signature = (preset, out, config=None, workers=None, refine=false))]
fn run_preset<'py>(
    py: Python<'py>,
    preset: &str,
    out: PathBuf,
    config: Option<PathBuf>,
    workers: Option<usize>,
    refine: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let preset = Preset::from_name(preset).map_err(err)?;
    let mut plan = RunPlan::new(preset, out);
    plan.config = config;
    plan.refine = refine;
    if let Some(w) = workers {
        plan.workers = w.max(1);
    }
    let report = py.detach(|| cli::execute(&plan)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("success", report.success)?;
    d.set_item("outputs", report.outputs)?;
    d.set_item("problems", report.problems)?;
    d.set_item("r_ratio", report.r_ratio)?;
    let fits = PyDict::new(py);
    for s in &report.schemes {
        if let Some(f) = &s.fit {
            fits.set_item(s.scheme.label(), (f.a, f.x0, f.r))?;
        }
    }
    d.set_item("fits", fits)?;
    Ok(d)
}

#[pymodule]
fn outcoupler_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sag, m)?)?;
    m.add_function(wrap_pyfunction!(critical_rabi, m)?)?;
    m.add_function(wrap_pyfunction!(oscillation_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(dressed_potentials, m)?)?;
    m.add_function(wrap_pyfunction!(fit_shutdown, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
