//! Exponential-Euler integrator for the Galerkin SDE
//! da_k = (−π²k² a_k + f_k(x))dt + √α_k dW_k on E_N: the linear decay and the
//! noise convolution are exact per step, so the scheme is the exact OU
//! transition whenever F_N ≡ 0. Noise is counter-based: every normal draw is
//! a pure function of (seed, path, step, mode), making ensembles independent
//! of thread scheduling.

use rayon::prelude::*;

use crate::drift::{DriftScratch, NoiseSpec, RegularizedDrift};
use crate::rng;
use crate::spectral::{SpectralVector, PI};
use crate::{Error, Result};

/// Any coefficient beyond this magnitude flags the path as diverged.
pub const DIVERGENCE_CAP: f64 = 1e8;

/// Fraction of diverged paths an ensemble tolerates before erroring out.
pub const DIVERGENCE_BUDGET: f64 = 0.01;

/// Step size plus checkpoint times; checkpoints must sit on the step grid.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub checkpoints: Vec<f64>,
}

impl IntegratorConfig {
    pub fn new(dt: f64, checkpoints: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
        }
        let mut prev = -1.0;
        for &t in &checkpoints {
            let steps = (t / dt).round();
            if (t - steps * dt).abs() > 1e-12 * (1.0 + t.abs()) {
                return Err(Error::Parameter(format!(
                    "checkpoint {t} is not an integer multiple of dt = {dt}"
                )));
            }
            if t <= prev {
                return Err(Error::Parameter("checkpoints must be strictly increasing".into()));
            }
            prev = t;
        }
        Ok(Self { dt, checkpoints })
    }

    /// Checkpoints every `every` steps from 0 to t_end inclusive.
    pub fn uniform(dt: f64, t_end: f64, every: usize) -> Result<Self> {
        if !(dt > 0.0) || every == 0 {
            return Err(Error::Parameter("need dt > 0 and every ≥ 1".into()));
        }
        let steps = (t_end / dt).round() as usize;
        if (t_end - steps as f64 * dt).abs() > 1e-12 * (1.0 + t_end) {
            return Err(Error::Parameter(format!(
                "t_end = {t_end} is not an integer multiple of dt = {dt}"
            )));
        }
        let checkpoints = (0..=steps)
            .step_by(every)
            .chain(if steps % every != 0 { Some(steps) } else { None })
            .map(|s| s as f64 * dt)
            .collect();
        Ok(Self { dt, checkpoints })
    }

    pub fn steps_for(&self, t: f64) -> Result<usize> {
        let steps = (t / self.dt).round();
        if (t - steps * self.dt).abs() > 1e-12 * (1.0 + t.abs()) || steps < 0.0 {
            return Err(Error::Parameter(format!(
                "time {t} is not on the step grid dt = {}",
                self.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn ckpt_steps(&self) -> Vec<usize> {
        self.checkpoints
            .iter()
            .map(|&t| (t / self.dt).round() as usize)
            .collect()
    }
}

/// Precomputed per-mode decay e^{−π²k²dt} and noise scale
/// √(α_k(1−e^{−2π²k²dt})/(2π²k²)) for one (noise, dt) pair.
#[derive(Debug, Clone)]
pub struct StepEngine {
    pub n: usize,
    pub dt: f64,
    decay: Vec<f64>,
    sig: Vec<f64>,
}

impl StepEngine {
    pub fn new(noise: &NoiseSpec, dt: f64, n: usize) -> Self {
        let mut decay = Vec::with_capacity(n);
        let mut sig = Vec::with_capacity(n);
        for k in 1..=n {
            let mu = PI * PI * (k * k) as f64;
            decay.push((-mu * dt).exp());
            let alpha = noise.alpha.get(k - 1).copied().unwrap_or(0.0);
            sig.push((alpha * (1.0 - (-2.0 * mu * dt).exp()) / (2.0 * mu)).sqrt());
        }
        Self { n, dt, decay, sig }
    }

    pub fn noise_scale(&self, k: usize) -> f64 {
        self.sig[k - 1]
    }

    /// a_k ← e^{−μ_k dt}(a_k + dt f_k) + sig_k ξ_k.
    pub fn step_into(&self, a: &mut [f64], f: &[f64], xi: &[f64]) {
        for k in 0..self.n {
            a[k] = self.decay[k] * (a[k] + self.dt * f[k]) + self.sig[k] * xi[k];
        }
    }
}

/// Drift selector: the zero drift, a regularized F_N, or an arbitrary map.
pub enum Drift<'a> {
    Zero,
    Reg(&'a RegularizedDrift),
    Map(&'a (dyn Fn(&SpectralVector) -> SpectralVector + Sync)),
}

impl Clone for Drift<'_> {
    fn clone(&self) -> Self {
        *self
    }
}

impl Copy for Drift<'_> {}

impl Drift<'_> {
    fn eval_into(&self, a: &[f64], scratch: &mut Option<DriftScratch>, out: &mut [f64]) {
        match self {
            Drift::Zero => out.fill(0.0),
            Drift::Reg(reg) => {
                let sc = scratch.get_or_insert_with(|| DriftScratch::new(reg.basis.m));
                reg.eval_into(a, sc, out);
            }
            Drift::Map(f) => {
                let v = f(&SpectralVector::new(a.to_vec()));
                for (i, o) in out.iter_mut().enumerate() {
                    *o = v.a.get(i).copied().unwrap_or(0.0);
                }
            }
        }
    }
}

/// One path's integration context; paths are identified by index so that the
/// noise stream is a pure function of (seed, path).
pub struct PathIntegrator<'a> {
    pub engine: StepEngine,
    pub drift: Drift<'a>,
    pub seed: u64,
}

impl PathIntegrator<'_> {
    /// Runs `steps` steps from x0. `ckpt_steps` is an ascending list of step
    /// indices (0 = initial state allowed); at each, `on_ckpt(i, t, x, fx)`
    /// receives the checkpoint ordinal, time, state, and drift at the state —
    /// the same drift evaluation that advances the step, so residual
    /// estimators pay nothing extra. Returns the final state.
    pub fn run_path<F>(
        &self,
        x0: &SpectralVector,
        steps: usize,
        ckpt_steps: &[usize],
        path: u64,
        mut on_ckpt: F,
    ) -> Result<SpectralVector>
    where
        F: FnMut(usize, f64, &SpectralVector, &SpectralVector),
    {
        let n = self.engine.n;
        let mut x = SpectralVector::zero(n);
        for (i, v) in x0.a.iter().enumerate().take(n) {
            x.a[i] = *v;
        }
        let mut fx = vec![0.0; n];
        let mut xi = vec![0.0; n];
        let mut scratch = None;
        let mut next_ckpt = 0usize;
        for s in 0..=steps {
            self.drift.eval_into(&x.a, &mut scratch, &mut fx);
            if next_ckpt < ckpt_steps.len() && ckpt_steps[next_ckpt] == s {
                let fview = SpectralVector::new(fx.clone());
                on_ckpt(next_ckpt, s as f64 * self.engine.dt, &x, &fview);
                next_ckpt += 1;
            }
            if s == steps {
                break;
            }
            rng::fill_normals(rng::cell(self.seed, rng::purpose::NOISE, path, s as u64), &mut xi);
            self.engine.step_into(&mut x.a, &fx, &xi);
            if x.a.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_CAP) {
                return Err(Error::Ensemble(format!("path {path} diverged at step {s}")));
            }
        }
        Ok(x)
    }

    /// Two trajectories driven by the same noise (common random numbers).
    pub fn run_coupled<F>(
        &self,
        x0: &SpectralVector,
        y0: &SpectralVector,
        steps: usize,
        ckpt_steps: &[usize],
        path: u64,
        mut on_ckpt: F,
    ) -> Result<(SpectralVector, SpectralVector)>
    where
        F: FnMut(usize, f64, &SpectralVector, &SpectralVector),
    {
        let n = self.engine.n;
        let mut x = SpectralVector::zero(n);
        let mut y = SpectralVector::zero(n);
        for (i, v) in x0.a.iter().enumerate().take(n) {
            x.a[i] = *v;
        }
        for (i, v) in y0.a.iter().enumerate().take(n) {
            y.a[i] = *v;
        }
        let mut fx = vec![0.0; n];
        let mut fy = vec![0.0; n];
        let mut xi = vec![0.0; n];
        let mut scratch = None;
        let mut next_ckpt = 0usize;
        for s in 0..=steps {
            if next_ckpt < ckpt_steps.len() && ckpt_steps[next_ckpt] == s {
                on_ckpt(next_ckpt, s as f64 * self.engine.dt, &x, &y);
                next_ckpt += 1;
            }
            if s == steps {
                break;
            }
            self.drift.eval_into(&x.a, &mut scratch, &mut fx);
            self.drift.eval_into(&y.a, &mut scratch, &mut fy);
            rng::fill_normals(rng::cell(self.seed, rng::purpose::NOISE, path, s as u64), &mut xi);
            self.engine.step_into(&mut x.a, &fx, &xi);
            self.engine.step_into(&mut y.a, &fy, &xi);
            let bad = |v: &f64| !v.is_finite() || v.abs() > DIVERGENCE_CAP;
            if x.a.iter().any(bad) || y.a.iter().any(bad) {
                return Err(Error::Ensemble(format!("coupled path {path} diverged at step {s}")));
            }
        }
        Ok((x, y))
    }
}

/// Runs `per_path` over path indices 0..k in parallel and collects the
/// successes in path order, plus the diverged count. Errors if more than
/// DIVERGENCE_BUDGET of paths diverge. The reduction over the ordered vector
/// is the caller's job, so results cannot depend on thread count.
pub fn ensemble_reduce<T: Send>(
    k: usize,
    per_path: impl (Fn(u64) -> Result<T>) + Sync,
) -> Result<(Vec<T>, usize)> {
    let raw: Vec<Result<T>> = (0..k as u64).into_par_iter().map(&per_path).collect();
    let mut out = Vec::with_capacity(k);
    let mut diverged = 0usize;
    for r in raw {
        match r {
            Ok(v) => out.push(v),
            Err(_) => diverged += 1,
        }
    }
    if (diverged as f64) > DIVERGENCE_BUDGET * k as f64 {
        return Err(Error::Ensemble(format!(
            "{diverged} of {k} paths diverged (budget {:.0}%)",
            DIVERGENCE_BUDGET * 100.0
        )));
    }
    Ok((out, diverged))
}

/// One stored path: checkpoint times and states.
#[derive(Debug, Clone)]
pub struct PathDump {
    pub times: Vec<f64>,
    pub states: Vec<SpectralVector>,
}

/// Integrates a single path (index 0) and stores every checkpoint state.
pub fn simulate(
    x0: &SpectralVector,
    t_end: f64,
    cfg: &IntegratorConfig,
    noise: &NoiseSpec,
    drift: &Drift,
    n: usize,
    seed: u64,
) -> Result<PathDump> {
    let steps = cfg.steps_for(t_end)?;
    let integ = PathIntegrator {
        engine: StepEngine::new(noise, cfg.dt, n),
        drift: *drift,
        seed,
    };
    let ckpt_steps: Vec<usize> = cfg.ckpt_steps().into_iter().filter(|&s| s <= steps).collect();
    let mut dump = PathDump { times: Vec::new(), states: Vec::new() };
    integ.run_path(x0, steps, &ckpt_steps, 0, |_, t, x, _| {
        dump.times.push(t);
        dump.states.push(x.clone());
    })?;
    Ok(dump)
}

/// Full stored ensemble; size-guarded because K·checkpoints·N floats add up.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub k: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    /// states[path][checkpoint]
    pub states: Vec<Vec<SpectralVector>>,
    pub finals: Vec<SpectralVector>,
    pub diverged: usize,
}

const ENSEMBLE_GUARD_BYTES: usize = 1 << 28;

pub fn ensemble(
    x0: &SpectralVector,
    k: usize,
    t_end: f64,
    cfg: &IntegratorConfig,
    noise: &NoiseSpec,
    drift: &Drift,
    n: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let steps = cfg.steps_for(t_end)?;
    let ckpt_steps: Vec<usize> = cfg.ckpt_steps().into_iter().filter(|&s| s <= steps).collect();
    let bytes = k * ckpt_steps.len() * n * std::mem::size_of::<f64>();
    if bytes > ENSEMBLE_GUARD_BYTES {
        return Err(Error::Ensemble(format!(
            "stored ensemble would need {bytes} bytes; reduce K or checkpoints, or stream"
        )));
    }
    let engine = StepEngine::new(noise, cfg.dt, n);
    let times: Vec<f64> = ckpt_steps.iter().map(|&s| s as f64 * cfg.dt).collect();
    let (rows, diverged) = ensemble_reduce(k, |p| {
        let integ = PathIntegrator { engine: engine.clone(), drift: *drift, seed };
        let mut row = Vec::with_capacity(ckpt_steps.len());
        let fin = integ.run_path(x0, steps, &ckpt_steps, p, |_, _, x, _| row.push(x.clone()))?;
        Ok((row, fin))
    })?;
    let mut states = Vec::with_capacity(rows.len());
    let mut finals = Vec::with_capacity(rows.len());
    for (row, fin) in rows {
        states.push(row);
        finals.push(fin);
    }
    Ok(PathEnsemble { k, seed, times, states, finals, diverged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{build_fn, NonlinearityModel};
    use approx::assert_relative_eq;

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, vec![]).is_err());
        assert!(IntegratorConfig::new(1e-3, vec![0.1, 0.05]).is_err());
        assert!(IntegratorConfig::new(1e-3, vec![0.0005]).is_err());
        let cfg = IntegratorConfig::new(1e-3, vec![0.0, 0.01, 0.1]).unwrap();
        assert_eq!(cfg.ckpt_steps(), vec![0, 10, 100]);
        assert_eq!(cfg.steps_for(0.1).unwrap(), 100);
        assert!(cfg.steps_for(0.0105).is_err());
        let u = IntegratorConfig::uniform(5e-4, 0.1, 10).unwrap();
        assert_eq!(u.checkpoints.len(), 21);
        assert_relative_eq!(u.checkpoints[20], 0.1);
    }

    #[test]
    fn heat_decay_exact() {
        let n = 4;
        let noise = NoiseSpec::zero(n);
        let engine = StepEngine::new(&noise, 5e-4, n);
        let integ = PathIntegrator { engine, drift: Drift::Zero, seed: 9 };
        let x0 = SpectralVector::new(vec![1.0, -0.5, 0.25, 0.0]);
        let xt = integ.run_path(&x0, 200, &[], 0, |_, _, _, _| {}).unwrap();
        for k in 1..=n {
            let want = x0.a[k - 1] * (-PI * PI * (k * k) as f64 * 0.1).exp();
            assert_relative_eq!(xt.a[k - 1], want, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn noise_variance_small_dt() {
        let noise = NoiseSpec::from_alphas(vec![1.0]).unwrap();
        for dt in [1e-3, 1e-5, 1e-7] {
            let engine = StepEngine::new(&noise, dt, 1);
            let v = engine.noise_scale(1).powi(2);
            assert_relative_eq!(v / dt, 1.0, max_relative = 2e-2 * (dt / 1e-7).max(1.0));
        }
        // exact identity at any dt
        let dt = 3e-3;
        let engine = StepEngine::new(&noise, dt, 1);
        assert_relative_eq!(
            engine.noise_scale(1).powi(2),
            (1.0 - (-2.0 * PI * PI * dt).exp()) / (2.0 * PI * PI),
            max_relative = 1e-15
        );
    }

    #[test]
    fn determinism_and_t0() {
        let n = 8;
        let noise = NoiseSpec::power_law(n, 1.0, 2.0).unwrap();
        let cfg = IntegratorConfig::uniform(1e-3, 0.05, 10).unwrap();
        let x0 = SpectralVector::mode(n, 1, 1.0);
        let a = simulate(&x0, 0.05, &cfg, &noise, &Drift::Zero, n, 42).unwrap();
        let b = simulate(&x0, 0.05, &cfg, &noise, &Drift::Zero, n, 42).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            assert_eq!(sa.a, sb.a);
        }
        let c = simulate(&x0, 0.0, &cfg, &noise, &Drift::Zero, n, 42).unwrap();
        assert_eq!(c.states.len(), 1);
        assert_eq!(c.states[0].a, x0.a);
        // different seed → different states
        let d = simulate(&x0, 0.05, &cfg, &noise, &Drift::Zero, n, 43).unwrap();
        assert_ne!(a.states.last().unwrap().a, d.states.last().unwrap().a);
    }

    #[test]
    fn ou_transient_moments() {
        // K paths of the exact OU mode: sample mean and variance at T = 0.2.
        let n = 4;
        let noise = NoiseSpec::power_law(n, 1.0, 2.0).unwrap();
        let cfg = IntegratorConfig::uniform(1e-3, 0.2, 200).unwrap();
        let engine = StepEngine::new(&noise, cfg.dt, n);
        let x0 = SpectralVector::mode(n, 1, 1.0);
        let k = 4000usize;
        let (vals, div) = ensemble_reduce(k, |p| {
            let integ = PathIntegrator { engine: engine.clone(), drift: Drift::Zero, seed: 7 };
            let xt = integ.run_path(&x0, 200, &[], p, |_, _, _, _| {})?;
            Ok(xt.a[0])
        })
        .unwrap();
        assert_eq!(div, 0);
        let mean = vals.iter().sum::<f64>() / k as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        let mu = PI * PI;
        let want_mean = (-mu * 0.2f64).exp();
        let want_var = (1.0 - (-2.0 * mu * 0.2f64).exp()) / (2.0 * mu);
        let se_mean = (want_var / k as f64).sqrt();
        assert!((mean - want_mean).abs() <= 3.0 * se_mean, "{mean} vs {want_mean}");
        let se_var = want_var * (2.0 / (k as f64 - 1.0)).sqrt();
        assert!((var - want_var).abs() <= 3.0 * se_var, "{var} vs {want_var}");
    }

    #[test]
    fn thread_count_invariance() {
        // same reduction input independent of the pool running it
        let n = 8;
        let noise = NoiseSpec::power_law(n, 1.0, 2.0).unwrap();
        let engine = StepEngine::new(&noise, 1e-3, n);
        let x0 = SpectralVector::mode(n, 2, 0.7);
        let run = || {
            let (vals, _) = ensemble_reduce(64, |p| {
                let integ =
                    PathIntegrator { engine: engine.clone(), drift: Drift::Zero, seed: 5 };
                let xt = integ.run_path(&x0, 50, &[], p, |_, _, _, _| {})?;
                Ok(xt.a[1])
            })
            .unwrap();
            vals
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn coupled_paths() {
        let n = 8;
        let noise = NoiseSpec::power_law(n, 1.0, 2.0).unwrap();
        let engine = StepEngine::new(&noise, 1e-3, n);
        let x0 = SpectralVector::mode(n, 1, 1.0);
        // identical starts → identical paths
        let integ = PathIntegrator { engine: engine.clone(), drift: Drift::Zero, seed: 3 };
        let (x, y) = integ.run_coupled(&x0, &x0, 100, &[], 0, |_, _, _, _| {}).unwrap();
        assert_eq!(x.a, y.a);
        // F≡0: the difference decays deterministically
        let y0 = SpectralVector::mode(n, 1, 0.5);
        let (x, y) = integ.run_coupled(&x0, &y0, 100, &[], 0, |_, _, _, _| {}).unwrap();
        let diff = x.axpy(-1.0, &y);
        assert_relative_eq!(
            diff.a[0],
            0.5 * (-PI * PI * 0.1f64).exp(),
            max_relative = 1e-12
        );
        // GL preset: small perturbation stays finite over T = 1
        let model = NonlinearityModel::ginzburg_landau();
        let reg = build_fn(&model, &noise, n, 1).unwrap();
        let integ = PathIntegrator { engine, drift: Drift::Reg(&reg), seed: 3 };
        let y0 = x0.axpy(1e-3, &SpectralVector::mode(n, 2, 1.0));
        let (x, y) = integ.run_coupled(&x0, &y0, 1000, &[], 0, |_, _, _, _| {}).unwrap();
        assert!(x.a.iter().all(|v| v.is_finite()));
        assert!(x.axpy(-1.0, &y).l2().is_finite());
    }

    #[test]
    fn divergence_flagging() {
        let n = 2;
        let noise = NoiseSpec::zero(n);
        let engine = StepEngine::new(&noise, 1e-3, n);
        let blowup = |x: &SpectralVector| x.scale(1e6);
        let integ = PathIntegrator { engine, drift: Drift::Map(&blowup), seed: 0 };
        let x0 = SpectralVector::mode(n, 1, 1.0);
        assert!(integ.run_path(&x0, 1000, &[], 0, |_, _, _, _| {}).is_err());
    }

    #[test]
    fn ensemble_storage() {
        let n = 4;
        let noise = NoiseSpec::power_law(n, 1.0, 2.0).unwrap();
        let cfg = IntegratorConfig::uniform(1e-3, 0.02, 10).unwrap();
        let x0 = SpectralVector::mode(n, 1, 1.0);
        let ens = ensemble(&x0, 16, 0.02, &cfg, &noise, &Drift::Zero, n, 11).unwrap();
        assert_eq!(ens.states.len(), 16);
        assert_eq!(ens.times.len(), 3);
        assert_eq!(ens.finals.len(), 16);
        // ensemble mean of mode 1 at T: e^{−π²T}x₀ within 3 SE
        let t = 0.02;
        let mean = ens.finals.iter().map(|x| x.a[0]).sum::<f64>() / 16.0;
        let var = (1.0 - (-2.0 * PI * PI * t).exp()) / (2.0 * PI * PI);
        let want = (-PI * PI * t).exp();
        assert!((mean - want).abs() <= 3.0 * (var / 16.0).sqrt() + 1e-12);
        // guard trips on absurd requests
        let cfg_big = IntegratorConfig::uniform(1e-3, 1.0, 1).unwrap();
        assert!(ensemble(&x0, 200_000, 1.0, &cfg_big, &noise, &Drift::Zero, n, 1).is_err());
    }

    #[test]
    fn weak_increment_refinement() {
        // E[(η₁, x_{t+dt} − x_t)²] shrinks as dt → 0 (weak path continuity proxy).
        let n = 4;
        let noise = NoiseSpec::power_law(n, 1.0, 2.0).unwrap();
        let x0 = SpectralVector::mode(n, 1, 1.0);
        let mut ms = Vec::new();
        for dt in [4e-3f64, 2e-3, 1e-3] {
            let steps = (0.1 / dt).round() as usize;
            let engine = StepEngine::new(&noise, dt, n);
            let (vals, _) = ensemble_reduce(400, |p| {
                let integ = PathIntegrator { engine: engine.clone(), drift: Drift::Zero, seed: 21 };
                let mut last_two = [0.0f64; 2];
                integ.run_path(&x0, steps, &[steps - 1, steps], p, |i, _, x, _| {
                    last_two[i] = x.a[0];
                })?;
                Ok((last_two[1] - last_two[0]).powi(2))
            })
            .unwrap();
            ms.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        assert!(ms[1] < ms[0] && ms[2] < ms[1], "{ms:?}");
    }
}
