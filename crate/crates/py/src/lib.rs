use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use dilute_bose::bogoliubov::{self, AssembleConfig, BoundRegime};
use dilute_bose::born::{self, BornConfig, SamplerConfig};
use dilute_bose::fock::{self, FockBasis, LanczosConfig, ModeSet, Sector, Variant};
use dilute_bose::jastrow::{self, JastrowState, McConfig};
use dilute_bose::lattice::{self, Acceleration, MomentumLattice};
use dilute_bose::potential::{RadialPotential, ScaledPotential};
use dilute_bose::scattering;

fn to_py(e: dilute_bose::Error) -> PyErr {
    match e.exit_code() {
        2 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Serialized through `json.loads`, so results arrive as plain dicts.
fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn potential(kind: &str, kappa: f64, radius: f64) -> PyResult<RadialPotential> {
    match kind {
        "soft-sphere" | "soft_sphere" => RadialPotential::soft_sphere(kappa, radius).map_err(to_py),
        "hard-core" | "hard_core" => RadialPotential::hard_core(radius).map_err(to_py),
        other => Err(PyValueError::new_err(format!("unknown potential kind {other:?}"))),
    }
}

fn acceleration(name: &str) -> PyResult<Acceleration> {
    match name {
        "none" => Ok(Acceleration::None),
        "cesaro" => Ok(Acceleration::CesaroAverage),
        "richardson" => Ok(Acceleration::Richardson),
        other => Err(PyValueError::new_err(format!("unknown acceleration {other:?}"))),
    }
}

/// Scattering length of a soft sphere or hard core.
#[pyfunction]
#[pyo3(signature = (kind = "soft-sphere", kappa = 1.0, radius = 1.0))]
fn scattering_length(kind: &str, kappa: f64, radius: f64) -> PyResult<f64> {
    Ok(scattering::scattering_length(&potential(kind, kappa, radius)?).map_err(to_py)?.value)
}

/// Radial Fourier transform of a soft sphere at momentum `p`.
#[pyfunction]
#[pyo3(signature = (p, kappa = 1.0, radius = 1.0))]
fn fourier_hat(p: f64, kappa: f64, radius: f64) -> PyResult<f64> {
    potential("soft-sphere", kappa, radius)?.fourier_hat(p).map_err(to_py)
}

/// Neumann eigenvalue of the hard-core problem on the ball of radius `ell`.
#[pyfunction]
fn hard_core_eigenvalue(a: f64, n: u64, ell: f64) -> PyResult<f64> {
    Ok(scattering::solve_hard_core(a, n, ell).map_err(to_py)?.lambda)
}

/// Born series for the scaled soft sphere.
#[pyfunction]
#[pyo3(signature = (n, beta, kappa = 1.0, radius = 1.0, samples = 1_000_000, seed = 0xc0ffee))]
fn born_series(py: Python<'_>, n: u64, beta: f64, kappa: f64, radius: f64, samples: u64, seed: u64) -> PyResult<Py<PyAny>> {
    let s = ScaledPotential::new(potential("soft-sphere", kappa, radius)?, n, beta).map_err(to_py)?;
    let cfg = BornConfig {
        sampler: SamplerConfig {
            samples,
            seed,
            ..SamplerConfig::default()
        },
        ..BornConfig::default()
    };
    let lat = born::default_lattice(&s).map_err(to_py)?;
    let series = py.detach(|| born::born_scattering_length(&s, &lat, &cfg)).map_err(to_py)?;
    to_dict(py, &series)
}

/// Bogoliubov correction sum with coupling `a` up to the Euclidean cutoff.
#[pyfunction]
#[pyo3(signature = (a, cutoff = 400.0 * std::f64::consts::PI))]
fn correction_sum(py: Python<'_>, a: f64, cutoff: f64) -> PyResult<Py<PyAny>> {
    let lat = MomentumLattice::euclidean(cutoff).map_err(to_py)?;
    let sum = py.detach(|| lattice::bogoliubov_correction_sum(a, &lat)).map_err(to_py)?;
    to_dict(py, &sum)
}

/// Finite-size constant from accelerated cube partial sums.
#[pyfunction]
#[pyo3(signature = (m_max = 128, accel = "cesaro"))]
fn e_lambda(py: Python<'_>, m_max: u32, accel: &str) -> PyResult<Py<PyAny>> {
    let acc = acceleration(accel)?;
    let e = py.detach(|| lattice::e_lambda(m_max, acc)).map_err(to_py)?;
    to_dict(py, &e)
}

/// Upper-bound breakdown for a hard core (`regime = "hc"`) or the
/// Gross-Pitaevskii form (`regime = "gp"`).
#[pyfunction]
#[pyo3(signature = (a, n, regime = "hc"))]
fn bound(py: Python<'_>, a: f64, n: u64, regime: &str) -> PyResult<Py<PyAny>> {
    let regime = match regime {
        "hc" => BoundRegime::HardCore { scattering_length: a, particles: n },
        "gp" => BoundRegime::Gp { scattering_length: a, particles: n },
        other => Err(PyValueError::new_err(format!("unknown regime {other:?}")))?,
    };
    let b = py
        .detach(|| bogoliubov::assemble_bound(&regime, &AssembleConfig::default()))
        .map_err(to_py)?;
    to_dict(py, &b)
}

/// Truncated-Fock ground energy of `Σ F(n_p + n_{-p}) + G(pair terms)` over
/// the first pairs, returned as `(ground_energy, closed_form)`.
#[pyfunction]
#[pyo3(signature = (f, g, n_max = 64))]
fn fock_ground_energy(py: Python<'_>, f: Vec<f64>, g: Vec<f64>, n_max: u32) -> PyResult<(f64, f64)> {
    if f.len() != g.len() || f.is_empty() {
        return Err(PyValueError::new_err("f and g need the same nonzero length (one entry per pair)"));
    }
    let per_mode = |v: &[f64]| v.iter().flat_map(|x| [*x, *x]).collect::<Vec<f64>>();
    let (fm, gm) = (per_mode(&f), per_mode(&g));
    py.detach(|| {
        let basis = FockBasis::new(ModeSet::first_pairs(f.len())?, n_max, Sector::PairDiagonal)?;
        let q = fock::build_quadratic(&fm, &gm, &basis, Variant::A, None)?;
        let e = fock::ground_state(&q, &LanczosConfig::default())?.energy;
        Ok((e, fock::pair_formula(&fm, &gm)?))
    })
    .map_err(to_py)
}

/// Metropolis estimate of the kinetic energy of the pair-product state.
#[pyfunction]
#[pyo3(signature = (n, a, ell, steps = 20_000, chains = 4, seed = 1))]
fn jastrow_energy(py: Python<'_>, n: usize, a: f64, ell: f64, steps: usize, chains: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let state = JastrowState::new(n, a, ell).map_err(to_py)?;
    let cfg = McConfig {
        steps,
        chains,
        seed,
        ..McConfig::default()
    };
    let e = py.detach(|| jastrow::metropolis_run(&state, &cfg)).map_err(to_py)?;
    to_dict(py, &e)
}

/// Run the command-line interface with `argv` (without the program name).
#[pyfunction]
fn run_cli(py: Python<'_>, argv: Vec<String>) -> i32 {
    py.detach(|| dilute_bose::cli::run(std::iter::once("dilute-bose".to_string()).chain(argv)))
}

#[pymodule]
fn dilute_bose_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(scattering_length, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_hat, m)?)?;
    m.add_function(wrap_pyfunction!(hard_core_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(born_series, m)?)?;
    m.add_function(wrap_pyfunction!(correction_sum, m)?)?;
    m.add_function(wrap_pyfunction!(e_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(bound, m)?)?;
    m.add_function(wrap_pyfunction!(fock_ground_energy, m)?)?;
    m.add_function(wrap_pyfunction!(jastrow_energy, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
