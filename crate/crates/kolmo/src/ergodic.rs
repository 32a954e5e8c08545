//! Invariant-measure estimation by single-long-path time averaging, with
//! batch-means error bars, and the stationarity / moment-bound / invariance
//! residuals for the estimated measure.

use crate::cylinder::{apply_l, CylinderFunction};
use crate::lyapunov::{theta_weight, v_weight, LyapunovParams};
use crate::rng;
use crate::sde::{ensemble_reduce, PathIntegrator, StepEngine};
use crate::semigroup::{Dynamics, Estimate};
use crate::spectral::{Basis, SpectralVector};
use crate::util::{batch_means, mean_se};
use crate::{Error, Result};

/// Long-run averaging parameters (time units; thinning in steps).
#[derive(Debug, Clone, Copy)]
pub struct ErgodicConfig {
    pub burn_in: f64,
    pub horizon: f64,
    pub thinning: usize,
    pub dt: f64,
    pub seed: u64,
}

impl ErgodicConfig {
    pub fn standard(seed: u64) -> Self {
        Self { burn_in: 5.0, horizon: 200.0, thinning: 10, dt: 5e-4, seed }
    }

    fn sample_steps(&self) -> Result<(usize, Vec<usize>)> {
        if !(self.dt > 0.0) || self.thinning == 0 || self.horizon <= 0.0 {
            return Err(Error::Parameter("ergodic config needs dt, horizon, thinning > 0".into()));
        }
        let burn = (self.burn_in / self.dt).round() as usize;
        let total = ((self.burn_in + self.horizon) / self.dt).round() as usize;
        let ckpts: Vec<usize> = (burn..=total).step_by(self.thinning).collect();
        if ckpts.len() < 40 {
            return Err(Error::Parameter("horizon too short for batch means".into()));
        }
        Ok((total, ckpts))
    }
}

const BATCHES: usize = 20;

/// Time average of f(x_t) along one thinned path after burn-in; SE by batch
/// means over 20 batches.
pub fn ergodic_average<F>(f: F, cfg: &ErgodicConfig, dy: &Dynamics) -> Result<Estimate>
where
    F: FnMut(&SpectralVector, &SpectralVector) -> f64,
{
    let mut f = f;
    let (total, ckpts) = cfg.sample_steps()?;
    let integ = PathIntegrator {
        engine: StepEngine::new(dy.noise, cfg.dt, dy.n),
        drift: dy.drift,
        seed: cfg.seed,
    };
    let mut vals = Vec::with_capacity(ckpts.len());
    let x0 = SpectralVector::zero(dy.n);
    integ.run_path(&x0, total, &ckpts, 0, |_, _, x, fx| {
        vals.push(f(x, fx));
    })?;
    let (value, se) = batch_means(&vals, BATCHES);
    Ok(Estimate { value, se, k: vals.len(), param: cfg.horizon, seed: cfg.seed })
}

/// Ergodic average of Lu: zero for μ-integrable cylinder functions.
pub fn stationarity_residual(
    u: &CylinderFunction,
    cfg: &ErgodicConfig,
    dy: &Dynamics,
) -> Result<Estimate> {
    let noise = dy.noise;
    ergodic_average(|x, fx| apply_l(u, x, &fx.a, noise), cfg, dy)
}

/// Stationarity residuals for several u's from a single long path.
pub fn stationarity_residual_multi(
    us: &[CylinderFunction],
    cfg: &ErgodicConfig,
    dy: &Dynamics,
) -> Result<Vec<Estimate>> {
    let (total, ckpts) = cfg.sample_steps()?;
    let integ = PathIntegrator {
        engine: StepEngine::new(dy.noise, cfg.dt, dy.n),
        drift: dy.drift,
        seed: cfg.seed,
    };
    let noise = dy.noise;
    let mut vals: Vec<Vec<f64>> = vec![Vec::with_capacity(ckpts.len()); us.len()];
    let x0 = SpectralVector::zero(dy.n);
    integ.run_path(&x0, total, &ckpts, 0, |_, _, x, fx| {
        for (j, u) in us.iter().enumerate() {
            vals[j].push(apply_l(u, x, &fx.a, noise));
        }
    })?;
    Ok(vals
        .into_iter()
        .map(|v| {
            let (value, se) = batch_means(&v, BATCHES);
            Estimate { value, se, k: v.len(), param: cfg.horizon, seed: cfg.seed }
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct ThetaMomentReport {
    pub estimate: Estimate,
    pub bound: f64,
    /// true when the bound's sup was sampled (p > 2) rather than closed-form
    pub bound_estimated: bool,
}

/// ∫Θ dμ̂ against the drift-inequality constant C = λ·sup{V : |x′|₂ ≤ 2λ/m};
/// closed form for p = 2, sampled sup otherwise.
pub fn theta_moment_check(
    b: &Basis,
    lp: &LyapunovParams,
    lambda: f64,
    m: f64,
    cfg: &ErgodicConfig,
    dy: &Dynamics,
) -> Result<ThetaMomentReport> {
    let estimate = ergodic_average(|x, _| theta_weight(b, x, lp), cfg, dy)?;
    let c_radius = 2.0 * lambda / m;
    let (bound, bound_estimated) = if lp.p == 2.0 {
        // |x|₂ ≤ |x′|₂/π, so sup V = e^{κ(c/π)²}
        (lambda * (lp.kappa * (c_radius / std::f64::consts::PI).powi(2)).exp(), false)
    } else {
        let probes = crate::drift::h1_ball_probes(
            dy.n,
            4_000,
            c_radius,
            cfg.seed,
            rng::purpose::PROBE,
        );
        let sup = probes
            .iter()
            .map(|x| v_weight(b, x, lp))
            .filter(|v| v.is_finite())
            .fold(1.0f64, f64::max);
        (lambda * sup, true)
    };
    Ok(ThetaMomentReport { estimate, bound, bound_estimated })
}

/// ∫p_t f dμ̂ − ∫f dμ̂: start states are drawn from the thinned long path and
/// each is evolved for t with fresh noise (a disjoint stream).
pub fn invariance_residual<F>(
    f: F,
    t: f64,
    starts: usize,
    cfg: &ErgodicConfig,
    dy: &Dynamics,
) -> Result<Estimate>
where
    F: Fn(&SpectralVector) -> f64 + Sync,
{
    let (total, ckpts) = cfg.sample_steps()?;
    let integ = PathIntegrator {
        engine: StepEngine::new(dy.noise, cfg.dt, dy.n),
        drift: dy.drift,
        seed: cfg.seed,
    };
    let stride = (ckpts.len() / starts).max(1);
    let mut pool = Vec::with_capacity(starts);
    let mut before = Vec::with_capacity(ckpts.len());
    let x0 = SpectralVector::zero(dy.n);
    integ.run_path(&x0, total, &ckpts, 0, |i, _, x, _| {
        before.push(f(x));
        if i % stride == 0 && pool.len() < starts {
            pool.push(x.clone());
        }
    })?;
    let (mean_before, se_before) = batch_means(&before, BATCHES);

    let steps = (t / cfg.dt).round() as usize;
    if (t - steps as f64 * cfg.dt).abs() > 1e-12 * (1.0 + t) {
        return Err(Error::Parameter(format!("t = {t} not on the step grid")));
    }
    let fresh = PathIntegrator {
        engine: StepEngine::new(dy.noise, cfg.dt, dy.n),
        drift: dy.drift,
        seed: rng::chain(&[cfg.seed, rng::purpose::INVARIANCE]),
    };
    let (after, _) = ensemble_reduce(pool.len(), |p| {
        let xt = fresh.run_path(&pool[p as usize], steps, &[], p, |_, _, _, _| {})?;
        Ok(f(&xt))
    })?;
    let (mean_after, se_after) = mean_se(&after);
    Ok(Estimate {
        value: mean_after - mean_before,
        se: se_after + se_before,
        k: after.len(),
        param: t,
        seed: cfg.seed,
    })
}
