//! Monte-Carlo estimators of the transition semigroup p_t and the resolvent
//! g_λ, plus the kernel-identity checks: Kolmogorov equation, martingale
//! property, quadratic variation, weighted growth, coupling contraction,
//! dissipativity, and resolvent convergence in the Galerkin dimension.
//!
//! Every identity check evaluates both sides on one shared ensemble so the
//! residual cancels common sampling noise; every estimator is a deterministic
//! function of (inputs, seed) regardless of thread count.

use crate::cylinder::{apply_l, gamma, CylinderFunction};
use crate::drift::{NoiseSpec, RegularizedDrift};
use crate::lyapunov::{lipschitz_seminorm, theta_weight, v_weight, LyapunovParams};
use crate::sde::{ensemble_reduce, Drift, PathIntegrator, StepEngine};
use crate::spectral::{Basis, SpectralVector};
use crate::util::mean_se;
use crate::{Error, Result};

/// Monte-Carlo budget: path count, step size, checkpoint spacing in steps.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub k: usize,
    pub dt: f64,
    pub ckpt_every: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn quick(seed: u64) -> Self {
        Self { k: 5_000, dt: 5e-4, ckpt_every: 5, seed }
    }

    pub fn heavy(seed: u64) -> Self {
        Self { k: 20_000, dt: 5e-4, ckpt_every: 5, seed }
    }

    fn steps_for(&self, t: f64) -> Result<usize> {
        let steps = (t / self.dt).round();
        if steps < 0.0 || (t - steps * self.dt).abs() > 1e-12 * (1.0 + t.abs()) {
            return Err(Error::Parameter(format!(
                "time {t} is not on the step grid dt = {}",
                self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// One scalar estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub k: usize,
    /// t or λ, whichever parametrizes the estimate.
    pub param: f64,
    pub seed: u64,
}

impl Estimate {
    /// |value| ≤ 3·SE + bias allowance.
    pub fn within(&self, bias: f64) -> bool {
        self.value.abs() <= 3.0 * self.se + bias
    }
}

/// The dynamics under study: dimension, noise, and drift selector.
pub struct Dynamics<'a> {
    pub n: usize,
    pub noise: &'a NoiseSpec,
    pub drift: Drift<'a>,
}

impl<'a> Dynamics<'a> {
    pub fn regularized(noise: &'a NoiseSpec, reg: &'a RegularizedDrift) -> Self {
        Self { n: reg.n, noise, drift: Drift::Reg(reg) }
    }

    pub fn free(noise: &'a NoiseSpec, n: usize) -> Self {
        Self { n, noise, drift: Drift::Zero }
    }

    fn integrator(&self, mc: &McConfig) -> PathIntegrator<'a> {
        PathIntegrator {
            engine: StepEngine::new(self.noise, mc.dt, self.n),
            drift: self.drift,
            seed: mc.seed,
        }
    }
}

/// p_t f(x) ≈ ensemble mean of f(x_t).
pub fn pt_estimate<F>(f: F, x: &SpectralVector, t: f64, mc: &McConfig, dy: &Dynamics) -> Result<Estimate>
where
    F: Fn(&SpectralVector) -> f64 + Sync,
{
    let steps = mc.steps_for(t)?;
    let integ = dy.integrator(mc);
    let (vals, _) = ensemble_reduce(mc.k, |p| {
        let xt = integ.run_path(x, steps, &[], p, |_, _, _, _| {})?;
        let v = f(&xt);
        if !v.is_finite() {
            return Err(Error::Ensemble(format!("functional overflowed on path {p}")));
        }
        Ok(v)
    })?;
    let (value, se) = mean_se(&vals);
    Ok(Estimate { value, se, k: vals.len(), param: t, seed: mc.seed })
}

/// g_λ f(x) = ∫₀^∞ e^{−λτ} p_τ f(x) dτ over the checkpoint grid up to T_max
/// (default 12/λ). Each interval uses product integration: p_τf is taken
/// piecewise linear and the e^{−λτ} factor is integrated exactly, so λg_λ1
/// has no step-size error and only the truncation tail remains, which is
/// folded into the standard error as e^{−λT_max}·(max |f| seen)/λ.
pub fn resolvent_estimate<F>(
    f: F,
    x: &SpectralVector,
    lambda: f64,
    mc: &McConfig,
    dy: &Dynamics,
    t_max: Option<f64>,
) -> Result<Estimate>
where
    F: Fn(&SpectralVector) -> f64 + Sync,
{
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("resolvent needs lambda > 0, got {lambda}")));
    }
    let h = mc.ckpt_every as f64 * mc.dt;
    let want_t = t_max.unwrap_or(12.0 / lambda);
    let nck = (want_t / h).ceil().max(2.0) as usize; // intervals
    let steps = nck * mc.ckpt_every;
    let t_end = steps as f64 * mc.dt;
    let ckpt_steps: Vec<usize> = (0..=nck).map(|i| i * mc.ckpt_every).collect();
    // ∫₀^h e^{−λτ}((1−τ/h)v₀ + (τ/h)v₁)dτ = h(c0·v₀ + c1·v₁), z = λh
    let z = lambda * h;
    let (c0, c1) = if z < 1e-4 {
        (0.5 - z / 6.0 + z * z / 24.0, 0.5 - z / 3.0 + z * z / 8.0)
    } else {
        let e = (-z).exp();
        ((z - 1.0 + e) / (z * z), (1.0 - (1.0 + z) * e) / (z * z))
    };
    let integ = dy.integrator(mc);
    let (vals, _) = ensemble_reduce(mc.k, |p| {
        let mut acc = 0.0;
        let mut fmax = 0.0f64;
        let mut prev = 0.0;
        integ.run_path(x, steps, &ckpt_steps, p, |i, t, xt, _| {
            let v = f(xt);
            fmax = fmax.max(v.abs());
            if i > 0 {
                acc += h * (-lambda * (t - h)).exp() * (c0 * prev + c1 * v);
            }
            prev = v;
        })?;
        if !acc.is_finite() {
            return Err(Error::Ensemble(format!("resolvent overflow on path {p}")));
        }
        Ok((acc, fmax))
    })?;
    let series: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let fmax = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    let (value, mut se) = mean_se(&series);
    se += (-lambda * t_end).exp() * fmax / lambda;
    Ok(Estimate { value, se, k: series.len(), param: lambda, seed: mc.seed })
}

/// Residual of p_t u(x) − u(x) = ∫₀^t p_τ(Lu)(x) dτ, both sides on one
/// ensemble; Lu uses the drift of `dy` along the path.
pub fn kolmogorov_residual(
    u: &CylinderFunction,
    x: &SpectralVector,
    t: f64,
    mc: &McConfig,
    dy: &Dynamics,
) -> Result<Estimate> {
    let mut v = kolmogorov_residual_multi(std::slice::from_ref(u), x, t, mc, dy)?;
    Ok(v.pop().unwrap())
}

/// Same residual for several test functions sharing one ensemble; the path
/// cost dominates, so batching the u's is nearly free.
pub fn kolmogorov_residual_multi(
    us: &[CylinderFunction],
    x: &SpectralVector,
    t: f64,
    mc: &McConfig,
    dy: &Dynamics,
) -> Result<Vec<Estimate>> {
    let steps = mc.steps_for(t)?;
    if steps % mc.ckpt_every != 0 && steps != 0 {
        return Err(Error::Parameter(format!(
            "t = {t} must be a multiple of the checkpoint spacing {}",
            mc.ckpt_every as f64 * mc.dt
        )));
    }
    let nck = steps / mc.ckpt_every;
    let ckpt_steps: Vec<usize> = (0..=nck).map(|i| i * mc.ckpt_every).collect();
    let h = mc.ckpt_every as f64 * mc.dt;
    let u0: Vec<f64> = us.iter().map(|u| u.eval(x)).collect();
    let integ = dy.integrator(mc);
    let noise = dy.noise;
    let (vals, _) = ensemble_reduce(mc.k, |p| {
        let mut int_lu = vec![0.0; us.len()];
        let xt = integ.run_path(x, steps, &ckpt_steps, p, |i, _, xs, fs| {
            if nck > 0 {
                let w = if i == 0 || i == nck { 0.5 * h } else { h };
                for (j, u) in us.iter().enumerate() {
                    int_lu[j] += w * apply_l(u, xs, &fs.a, noise);
                }
            }
        })?;
        let row: Vec<f64> = us
            .iter()
            .enumerate()
            .map(|(j, u)| u.eval(&xt) - u0[j] - int_lu[j])
            .collect();
        Ok(row)
    })?;
    let mut out = Vec::with_capacity(us.len());
    for j in 0..us.len() {
        let col: Vec<f64> = vals.iter().map(|r| r[j]).collect();
        let (value, se) = mean_se(&col);
        out.push(Estimate { value, se, k: col.len(), param: t, seed: mc.seed });
    }
    Ok(out)
}

/// E[(u(x_t) − u(x_s) − ∫_s^t Lu dr)·w(x_s)] for each weight w: all zero for
/// a martingale increment orthogonal to F_s-measurable weights.
pub fn martingale_residual(
    u: &CylinderFunction,
    x: &SpectralVector,
    s: f64,
    t: f64,
    weights: &[CylinderFunction],
    mc: &McConfig,
    dy: &Dynamics,
) -> Result<Vec<Estimate>> {
    let s_steps = mc.steps_for(s)?;
    let t_steps = mc.steps_for(t)?;
    if t_steps <= s_steps {
        return Err(Error::Parameter("need s < t".into()));
    }
    let span = t_steps - s_steps;
    if span % mc.ckpt_every != 0 || s_steps % mc.ckpt_every != 0 {
        return Err(Error::Parameter(
            "s and t−s must be multiples of the checkpoint spacing".into(),
        ));
    }
    let nck = span / mc.ckpt_every;
    let ckpt_steps: Vec<usize> = (0..=nck).map(|i| s_steps + i * mc.ckpt_every).collect();
    let h = mc.ckpt_every as f64 * mc.dt;
    let integ = dy.integrator(mc);
    let noise = dy.noise;
    let (rows, _) = ensemble_reduce(mc.k, |p| {
        let mut int_lu = 0.0;
        let mut u_s = 0.0;
        let mut w_s = vec![0.0; weights.len()];
        let xt = integ.run_path(x, t_steps, &ckpt_steps, p, |i, _, xs, fs| {
            let w = if i == 0 || i == nck { 0.5 * h } else { h };
            int_lu += w * apply_l(u, xs, &fs.a, noise);
            if i == 0 {
                u_s = u.eval(xs);
                for (j, wf) in weights.iter().enumerate() {
                    w_s[j] = wf.eval(xs);
                }
            }
        })?;
        let incr = u.eval(&xt) - u_s - int_lu;
        Ok(w_s.iter().map(|w| incr * w).collect::<Vec<f64>>())
    })?;
    let mut out = Vec::with_capacity(weights.len());
    for j in 0..weights.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (value, se) = mean_se(&col);
        out.push(Estimate { value, se, k: col.len(), param: t, seed: mc.seed });
    }
    Ok(out)
}

/// E[M_t] with M_t = (u(x_t) − u(x_0) − ∫₀^t Lu dr)² − ∫₀^t Γ(u)(x_r) dr.
pub fn qv_residual(
    u: &CylinderFunction,
    x: &SpectralVector,
    t: f64,
    mc: &McConfig,
    dy: &Dynamics,
) -> Result<Estimate> {
    let steps = mc.steps_for(t)?;
    if steps % mc.ckpt_every != 0 {
        return Err(Error::Parameter(
            "t must be a multiple of the checkpoint spacing".into(),
        ));
    }
    let nck = steps / mc.ckpt_every;
    let ckpt_steps: Vec<usize> = (0..=nck).map(|i| i * mc.ckpt_every).collect();
    let h = mc.ckpt_every as f64 * mc.dt;
    let u0 = u.eval(x);
    let integ = dy.integrator(mc);
    let noise = dy.noise;
    let (vals, _) = ensemble_reduce(mc.k, |p| {
        let mut int_lu = 0.0;
        let mut int_gamma = 0.0;
        let xt = integ.run_path(x, steps, &ckpt_steps, p, |i, _, xs, fs| {
            if nck > 0 {
                let w = if i == 0 || i == nck { 0.5 * h } else { h };
                int_lu += w * apply_l(u, xs, &fs.a, noise);
                int_gamma += w * gamma(u, xs, noise);
            }
        })?;
        let m = (u.eval(&xt) - u0 - int_lu).powi(2) - int_gamma;
        Ok(m)
    })?;
    let (value, se) = mean_se(&vals);
    Ok(Estimate { value, se, k: vals.len(), param: t, seed: mc.seed })
}

/// e^{λt}V(x) − p̂_t V(x): nonnegative (within noise) under the growth bound.
pub fn growth_check(
    b: &Basis,
    x: &SpectralVector,
    t: f64,
    lp: &LyapunovParams,
    lambda_pk: f64,
    mc: &McConfig,
    dy: &Dynamics,
) -> Result<Estimate> {
    let vx = v_weight(b, x, lp);
    if !vx.is_finite() {
        return Err(Error::Parameter("start state outside the finite-weight region".into()));
    }
    let est = pt_estimate(|y| v_weight(b, y, lp), x, t, mc, dy)?;
    Ok(Estimate {
        value: (lambda_pk * t).exp() * vx - est.value,
        se: est.se,
        k: est.k,
        param: t,
        seed: mc.seed,
    })
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// per-pair ratio |p̂f(y₁)−p̂f(y₂)| / ((V∨V)|y₁−y₂|₂)
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// e^{tλ′}·(sampled seminorm of f)
    pub bound: f64,
    /// SE of the worst pair's ratio
    pub se_max: f64,
    /// true if max_ratio exceeds bound + 3·se_max (soft: reported, not fatal)
    pub flagged: bool,
}

/// Coupling (common-random-numbers) check of the weighted-Lipschitz
/// contraction: each pair evolves under identical noise.
#[allow(clippy::too_many_arguments)]
pub fn contraction_check<F>(
    f: F,
    pairs: &[(SpectralVector, SpectralVector)],
    t: f64,
    lp: &LyapunovParams,
    lambda_prime: f64,
    mc: &McConfig,
    dy: &Dynamics,
    b: &Basis,
) -> Result<ContractionReport>
where
    F: Fn(&SpectralVector) -> f64 + Sync,
{
    let steps = mc.steps_for(t)?;
    let integ = dy.integrator(mc);
    let mut ratios = Vec::with_capacity(pairs.len());
    let mut se_of = Vec::with_capacity(pairs.len());
    for (pi, (y1, y2)) in pairs.iter().enumerate() {
        let den = v_weight(b, y1, lp).max(v_weight(b, y2, lp)) * y1.axpy(-1.0, y2).l2();
        if den == 0.0 || !den.is_finite() {
            ratios.push(0.0);
            se_of.push(0.0);
            continue;
        }
        let (vals, _) = ensemble_reduce(mc.k, |p| {
            // distinct noise per pair, shared within the pair
            let (xt, yt) =
                integ.run_coupled(y1, y2, steps, &[], p ^ ((pi as u64) << 32), |_, _, _, _| {})?;
            Ok(f(&xt) - f(&yt))
        })?;
        let (diff, se) = mean_se(&vals);
        ratios.push(diff.abs() / den);
        se_of.push(se / den);
    }
    let (mut max_ratio, mut se_max) = (0.0f64, 0.0f64);
    for (r, s) in ratios.iter().zip(&se_of) {
        if *r > max_ratio {
            max_ratio = *r;
            se_max = *s;
        }
    }
    let semi = lipschitz_seminorm(&|x: &SpectralVector| f(x), pairs, 0, b, lp);
    let bound = (t * lambda_prime).exp() * semi;
    Ok(ContractionReport {
        ratios,
        max_ratio,
        bound,
        se_max,
        flagged: max_ratio > bound + 3.0 * se_max,
    })
}

/// (1/m)·‖λu − Lu‖_{1,q,κ} − ‖u‖_{q,κ}, both sups sampled on the same probe
/// census. The state maximizing |u|/V is appended to the Θ-census so the
/// proved inequality direction survives sampling.
pub fn dissipativity_check(
    us: &[CylinderFunction],
    lambda: f64,
    lp: &LyapunovParams,
    probes: &[SpectralVector],
    b: &Basis,
    dy: &Dynamics,
    m: f64,
) -> Vec<f64> {
    let mut scratch = None;
    let mut fx_at = |x: &SpectralVector| -> Vec<f64> {
        match dy.drift {
            Drift::Zero => vec![0.0; dy.n],
            Drift::Reg(reg) => {
                let sc = scratch.get_or_insert_with(|| crate::drift::DriftScratch::new(reg.basis.m));
                let mut out = vec![0.0; reg.n];
                reg.eval_into(&x.a, sc, &mut out);
                out
            }
            Drift::Map(f) => f(x).a,
        }
    };
    let mut out = Vec::with_capacity(us.len());
    for u in us {
        let mut sup_u = 0.0f64;
        let mut witness = 0usize;
        for (i, x) in probes.iter().enumerate() {
            let v = v_weight(b, x, lp);
            if !v.is_finite() {
                continue;
            }
            let r = u.eval(x).abs() / v;
            if r > sup_u {
                sup_u = r;
                witness = i;
            }
        }
        let mut sup_res = 0.0f64;
        let mut census: Vec<&SpectralVector> = probes.iter().collect();
        census.push(&probes[witness]);
        for x in census {
            let th = theta_weight(b, x, lp);
            if !th.is_finite() {
                continue;
            }
            let fx = fx_at(x);
            let lu = apply_l(u, x, &fx, dy.noise);
            let r = (lambda * u.eval(x) - lu).abs() / th;
            if r > sup_res {
                sup_res = r;
            }
        }
        out.push(sup_res / m - sup_u);
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct NConvRow {
    pub n: usize,
    pub n2: usize,
    pub diff: f64,
    pub se: f64,
}

/// |λg_λ^{(N)}f(x) − λg_λ^{(2N)}f(x)| per consecutive level pair; the
/// counter-based draws couple the shared modes across levels.
pub fn resolvent_n_convergence<F>(
    f: F,
    x: &SpectralVector,
    lambda: f64,
    levels: &[(&NoiseSpec, &RegularizedDrift)],
    mc: &McConfig,
) -> Result<Vec<NConvRow>>
where
    F: Fn(&SpectralVector) -> f64 + Sync,
{
    let mut ests = Vec::with_capacity(levels.len());
    for (noise, reg) in levels {
        let dy = Dynamics::regularized(noise, reg);
        let e = resolvent_estimate(&f, x, lambda, mc, &dy, None)?;
        ests.push((reg.n, e));
    }
    let mut rows = Vec::new();
    for w in ests.windows(2) {
        let (n1, e1) = (w[0].0, w[0].1);
        let (n2, e2) = (w[1].0, w[1].1);
        rows.push(NConvRow {
            n: n1,
            n2,
            diff: lambda * (e1.value - e2.value).abs(),
            se: lambda * (e1.se + e2.se),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::trig_family;
    use crate::drift::{build_fn, NonlinearityModel};
    use crate::spectral::PI;

    fn quick(seed: u64) -> McConfig {
        McConfig { k: 800, dt: 1e-3, ckpt_every: 5, seed }
    }

    #[test]
    fn pt_basics() {
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let dy = Dynamics::free(&noise, 8);
        let x = SpectralVector::mode(8, 1, 1.0);
        let mc = quick(1);
        let one = pt_estimate(|_| 1.0, &x, 0.1, &mc, &dy).unwrap();
        assert_eq!(one.value, 1.0);
        assert_eq!(one.se, 0.0);
        let at0 = pt_estimate(|y| y.a[0], &x, 0.0, &mc, &dy).unwrap();
        assert_eq!(at0.value, 1.0);
        let m1 = pt_estimate(|y| y.a[0], &x, 0.1, &mc, &dy).unwrap();
        let want = (-PI * PI * 0.1f64).exp();
        assert!((m1.value - want).abs() <= 3.0 * m1.se, "{} vs {want}", m1.value);
        // SE scaling under K-doubling (within factor 2)
        let mc2 = McConfig { k: 3200, ..mc };
        let m2 = pt_estimate(|y| y.a[0], &x, 0.1, &mc2, &dy).unwrap();
        let ratio = m1.se / m2.se;
        assert!(ratio > 1.0 && ratio < 4.0, "{ratio}");
    }

    #[test]
    fn resolvent_markov_identity() {
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let dy = Dynamics::free(&noise, 8);
        let x = SpectralVector::mode(8, 1, 0.5);
        let mc = McConfig { k: 64, dt: 1e-3, ckpt_every: 5, seed: 2 };
        for lambda in [1.0, 10.0] {
            let g1 = resolvent_estimate(|_| 1.0, &x, lambda, &mc, &dy, None).unwrap();
            assert!(
                (lambda * g1.value - 1.0).abs() < 1e-4,
                "λ={lambda}: {}",
                lambda * g1.value
            );
        }
        // OU mode: g_λ(η₁,·)(x) = x₁/(λ+π²)
        let mc = quick(3);
        let e = resolvent_estimate(|y| y.a[0], &x, 5.0, &mc, &dy, None).unwrap();
        let want = 0.5 / (5.0 + PI * PI);
        assert!((e.value - want).abs() <= 3.0 * e.se + 1e-3, "{} vs {want}", e.value);
    }

    #[test]
    fn resolvent_large_lambda_approach() {
        let noise = NoiseSpec::power_law(4, 1.0, 2.0).unwrap();
        let dy = Dynamics::free(&noise, 4);
        let x = SpectralVector::mode(4, 1, 0.8);
        let f = |y: &SpectralVector| (y.a[0]).cos() + 1.0;
        let fx = f(&x);
        let mc = McConfig { k: 2_000, dt: 1e-4, ckpt_every: 5, seed: 4 };
        let mut errs = Vec::new();
        for lambda in [10.0, 50.0, 250.0] {
            let e = resolvent_estimate(f, &x, lambda, &mc, &dy, None).unwrap();
            errs.push((lambda * e.value - fx).abs());
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn kolmogorov_ou_case() {
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let dy = Dynamics::free(&noise, 8);
        let x = SpectralVector::mode(8, 1, 1.0);
        let u = CylinderFunction::coordinate(1);
        let mc = quick(5);
        let r0 = kolmogorov_residual(&u, &x, 0.0, &mc, &dy).unwrap();
        assert_eq!(r0.value, 0.0);
        let rc = kolmogorov_residual(&CylinderFunction::constant(3.0), &x, 0.1, &mc, &dy).unwrap();
        assert_eq!(rc.value, 0.0);
        let r = kolmogorov_residual(&u, &x, 0.2, &mc, &dy).unwrap();
        assert!(r.within(0.01), "residual {} se {}", r.value, r.se);
    }

    #[test]
    fn martingale_and_qv() {
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let model = NonlinearityModel::ginzburg_landau();
        let reg = build_fn(&model, &noise, 8, 1).unwrap();
        let dy = Dynamics::regularized(&noise, &reg);
        let x = SpectralVector::mode(8, 1, 1.0);
        let (u, _) = trig_family(1);
        let (_, w) = trig_family(2);
        let mc = quick(6);
        let res =
            martingale_residual(&u, &x, 0.05, 0.15, &[CylinderFunction::constant(1.0), w], &mc, &dy)
                .unwrap();
        for r in &res {
            assert!(r.within(0.01), "martingale residual {} se {}", r.value, r.se);
        }
        let qv = qv_residual(&u, &x, 0.2, &mc, &dy).unwrap();
        assert!(qv.within(0.02), "qv residual {} se {}", qv.value, qv.se);
    }

    #[test]
    fn qv_ou_isometry() {
        // F≡0, u=(η₁,·), x=0: increment variance equals the Γ-compensator
        let noise = NoiseSpec::from_alphas(vec![1.0]).unwrap();
        let dy = Dynamics::free(&noise, 1);
        let u = CylinderFunction::coordinate(1);
        let mc = McConfig { k: 4_000, dt: 1e-3, ckpt_every: 5, seed: 7 };
        let qv = qv_residual(&u, &SpectralVector::zero(1), 0.2, &mc, &dy).unwrap();
        assert!(qv.within(0.01), "{} se {}", qv.value, qv.se);
    }

    #[test]
    fn growth_margin() {
        use crate::lyapunov::standard_constants;
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let model = NonlinearityModel::burgers();
        let sc = standard_constants(&model, &noise, 4.0).unwrap();
        let reg = build_fn(&model, &noise, 8, 1).unwrap();
        let dy = Dynamics::regularized(&noise, &reg);
        let b = Basis::with_default_grid(8).unwrap();
        let lp = LyapunovParams::new(2.0, sc.kappa).unwrap();
        let x = SpectralVector::mode(8, 1, 1.0);
        let mc = quick(8);
        let g = growth_check(&b, &x, 0.25, &lp, sc.lambda, &mc, &dy).unwrap();
        assert!(g.value >= -3.0 * g.se, "growth margin {} se {}", g.value, g.se);
        // deterministic decay: margin ≥ 0 exactly at α≡0
        let silent = NoiseSpec::zero(8);
        let dy0 = Dynamics::free(&silent, 8);
        let g0 = growth_check(&b, &x, 0.25, &lp, sc.lambda, &mc, &dy0).unwrap();
        // identical paths: se is pure accumulation roundoff, not exactly 0
        assert!(g0.value >= 0.0 && g0.se <= 1e-9 * (1.0 + g0.value.abs()), "{} {}", g0.value, g0.se);
    }

    #[test]
    fn contraction_linear_case() {
        let noise = NoiseSpec::power_law(4, 1.0, 2.0).unwrap();
        let dy = Dynamics::free(&noise, 4);
        let b = Basis::with_default_grid(4).unwrap();
        let lp = LyapunovParams::new(2.0, 0.5).unwrap();
        let pairs: Vec<_> = (0..10)
            .map(|i| {
                let c = 0.1 * (i + 1) as f64;
                (SpectralVector::mode(4, 1, c), SpectralVector::mode(4, 1, -c))
            })
            .collect();
        let mc = McConfig { k: 400, dt: 1e-3, ckpt_every: 5, seed: 9 };
        let rep = contraction_check(|y: &SpectralVector| y.a[0], &pairs, 0.1, &lp, 0.0, &mc, &dy, &b)
            .unwrap();
        // linear coupling: every ratio is exactly e^{−π²t}/(V∨V) ≤ 1
        for r in &rep.ratios {
            assert!(*r <= (-PI * PI * 0.1f64).exp() + 1e-10);
        }
        assert!(!rep.flagged, "max {} bound {}", rep.max_ratio, rep.bound);
        let repc =
            contraction_check(|_: &SpectralVector| 5.0, &pairs, 0.1, &lp, 0.0, &mc, &dy, &b).unwrap();
        assert!(repc.max_ratio == 0.0);
    }

    #[test]
    fn dissipativity_constant_case() {
        use crate::lyapunov::standard_probes;
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let dy = Dynamics::free(&noise, 8);
        let b = Basis::with_default_grid(8).unwrap();
        let lp = LyapunovParams::new(2.0, 0.5).unwrap();
        let probes = standard_probes(8, 200, lp.kappa, 10);
        let (lambda, m) = (4.0, 1.5);
        let margins = dissipativity_check(
            &[CylinderFunction::constant(1.0)],
            lambda,
            &lp,
            &probes,
            &b,
            &dy,
            m,
        );
        // ‖1‖ = 1 and ‖λ·1 − 0‖₁ = λ at x = 0: margin = λ/m − 1
        assert!((margins[0] - (lambda / m - 1.0)).abs() < 1e-12);
        assert!(margins[0] >= 1.0);
    }

    #[test]
    fn n_convergence_trivial() {
        let model = NonlinearityModel::ginzburg_landau();
        let mut owned = Vec::new();
        for n in [4usize, 8] {
            let noise = NoiseSpec::power_law(n, 1.0, 2.0).unwrap();
            let reg = build_fn(&model, &noise, n, 1).unwrap();
            owned.push((noise, reg));
        }
        let levels: Vec<(&NoiseSpec, &RegularizedDrift)> =
            owned.iter().map(|(a, b)| (a, b)).collect();
        let mc = McConfig { k: 64, dt: 1e-3, ckpt_every: 5, seed: 11 };
        let x = SpectralVector::mode(4, 1, 0.5);
        let rows = resolvent_n_convergence(|_| 1.0, &x, 5.0, &levels, &mc).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].diff < 1e-12); // f≡1 → both exactly 1/λ-quadrature
    }
}
