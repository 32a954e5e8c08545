//! Python bindings: the sine basis, drift assembly, path simulation, the
//! constants table and the 1-D resolvent oracle, enough to drive the lab
//! from a notebook.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use kolmo::drift::{self, NoiseSpec, NonlinearityModel};
use kolmo::sde::{self, Drift, IntegratorConfig};
use kolmo::spectral::{self, SpectralVector};

fn err(e: kolmo::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Sine eigenbasis with its quadrature grid.
#[pyclass]
struct Basis {
    inner: spectral::Basis,
}

#[pymethods]
impl Basis {
    #[new]
    #[pyo3(signature = (n, m=None))]
    fn new(n: usize, m: Option<usize>) -> PyResult<Self> {
        let inner = match m {
            Some(m) => spectral::Basis::new(n, m).map_err(err)?,
            None => spectral::Basis::with_default_grid(n).map_err(err)?,
        };
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes.clone()
    }

    /// Grid values of x = Σ a_k η_k.
    fn synthesize(&self, a: Vec<f64>) -> PyResult<Vec<f64>> {
        if a.len() > self.inner.n {
            return Err(PyValueError::new_err(format!(
                "{} coefficients exceed the basis size {}",
                a.len(),
                self.inner.n
            )));
        }
        Ok(self.inner.synthesize(&SpectralVector::new(a)).v)
    }

    /// First `n_target` sine coefficients of a grid function.
    fn analyze(&self, grid: Vec<f64>, n_target: usize) -> PyResult<Vec<f64>> {
        let g = spectral::GridFunction::new(grid);
        Ok(self.inner.analyze(&g, n_target).map_err(err)?.a)
    }

    fn norm_p(&self, a: Vec<f64>, p: f64) -> PyResult<f64> {
        self.inner.norm_p(&SpectralVector::new(a), p).map_err(err)
    }
}

/// A reaction-diffusion model preset with its regularized Galerkin drift.
#[pyclass]
struct Model {
    model: NonlinearityModel,
    reg: drift::RegularizedDrift,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (preset, n=16, seed=42))]
    fn new(preset: &str, n: usize, seed: u64) -> PyResult<Self> {
        let model = NonlinearityModel::by_name(preset).map_err(err)?;
        let noise = NoiseSpec::power_law(n, 1.0, 2.0).map_err(err)?;
        let reg = drift::build_fn(&model, &noise, n, seed).map_err(err)?;
        Ok(Self { model, reg })
    }

    #[getter]
    fn name(&self) -> String {
        self.model.name.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.reg.n
    }

    /// Coefficients of F_N(x).
    fn drift(&self, a: Vec<f64>) -> PyResult<Vec<f64>> {
        if a.len() != self.reg.n {
            return Err(PyValueError::new_err(format!(
                "state has {} coefficients, drift lives on {} modes",
                a.len(),
                self.reg.n
            )));
        }
        Ok(self.reg.eval(&SpectralVector::new(a)).a)
    }

    /// Minimum drift-inequality margin over `count` standard probes.
    #[pyo3(signature = (p=2.0, count=1000, seed=42))]
    fn drift_margin(&self, p: f64, count: usize, seed: u64) -> PyResult<f64> {
        let noise = NoiseSpec::power_law(self.reg.n, 1.0, 2.0).map_err(err)?;
        let sc = kolmo::lyapunov::standard_constants(&self.model, &noise, p.max(3.0)).map_err(err)?;
        let (lp, lambda, m) = if p == 2.0 {
            (
                kolmo::lyapunov::LyapunovParams::new(2.0, sc.kappa).map_err(err)?,
                sc.lambda,
                sc.m_kappa_lambda,
            )
        } else {
            (
                kolmo::lyapunov::LyapunovParams::new(p, sc.kappa).map_err(err)?,
                sc.lambda_q_kappa,
                sc.m_q_kappa,
            )
        };
        let probes = kolmo::lyapunov::standard_probes(self.reg.n, count, sc.kappa, seed);
        let (margin, _) = kolmo::lyapunov::margin_batch(&self.reg, &noise, &lp, lambda, m, &probes);
        Ok(margin)
    }
}

/// Integrate one path; returns (times, states) with states[i] the
/// coefficient list at checkpoint i.
#[pyfunction]
#[pyo3(signature = (preset="ginzburg-landau", n=16, t=0.5, dt=5e-4, seed=42, a=1.0, gamma=2.0, every=5))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    preset: &str,
    n: usize,
    t: f64,
    dt: f64,
    seed: u64,
    a: f64,
    gamma: f64,
    every: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let noise = NoiseSpec::power_law(n, a, gamma).map_err(err)?;
    let cfg = IntegratorConfig::uniform(dt, t, every).map_err(err)?;
    let x0 = SpectralVector::zero(n);
    let dump = if preset == "ou" {
        sde::simulate(&x0, t, &cfg, &noise, &Drift::Zero, n, seed).map_err(err)?
    } else {
        let model = NonlinearityModel::by_name(preset).map_err(err)?;
        let reg = drift::build_fn(&model, &noise, n, seed).map_err(err)?;
        sde::simulate(&x0, t, &cfg, &noise, &Drift::Reg(&reg), n, seed).map_err(err)?
    };
    Ok((dump.times, dump.states.into_iter().map(|s| s.a).collect()))
}

/// The constants table for a preset, as text.
#[pyfunction]
#[pyo3(signature = (preset, n=16, q=4.0))]
fn describe(preset: &str, n: usize, q: f64) -> PyResult<String> {
    let model = NonlinearityModel::by_name(preset).map_err(err)?;
    let noise = NoiseSpec::power_law(n, 1.0, 2.0).map_err(err)?;
    kolmo::cli::describe_text(&model, &noise, q).map_err(err)
}

/// Solve the 1-D resolvent (λ − L₁)u = f for f(x) = cos x + 1; returns
/// (nodes, u).
#[pyfunction]
#[pyo3(signature = (alpha1=1.0, lam=5.0, preset=None))]
fn oracle_resolvent(
    alpha1: f64,
    lam: f64,
    preset: Option<&str>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let reg1 = match preset {
        Some(name) => {
            let model = NonlinearityModel::by_name(name).map_err(err)?;
            let noise1 = NoiseSpec::from_alphas(vec![alpha1]).map_err(err)?;
            Some(drift::build_fn(&model, &noise1, 1, 42).map_err(err)?)
        }
        None => None,
    };
    let f1 = |a: f64| reg1.as_ref().map(|r| r.f1_scalar(a)).unwrap_or(0.0);
    let mesh = kolmo::oracle1d::Mesh1D::standard(alpha1, &f1).map_err(err)?;
    let op = kolmo::oracle1d::build(mesh, lam).map_err(err)?;
    let f: Vec<f64> = op.mesh.nodes.iter().map(|x| x.cos() + 1.0).collect();
    let u = op.solve(&f);
    Ok((op.mesh.nodes.clone(), u))
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[pymodule]
fn kolmo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Basis>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_resolvent, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
