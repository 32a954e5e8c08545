//! Lyapunov weights V_{p,κ}, Θ_{p,κ}, their derivatives, the explicit drift
//! constants (κ₀, λ_κ, m_{κ,λ}, λ_{q,κ}, m_{q,κ}), exact pointwise evaluation
//! of L_N V, and the sampled audits for the drift and form inequalities.

use crate::drift::{NoiseSpec, NonlinearityModel, RegularizedDrift};
use crate::rng;
use crate::spectral::{frac_laplacian_scale, Basis, SpectralVector, PI};
use crate::{Error, Result};

/// Weight parameters: exponent p ≥ 2, curvature κ > 0. p = 2 denotes the
/// Gaussian weight V_κ alone (no polynomial factor).
#[derive(Debug, Clone, Copy)]
pub struct LyapunovParams {
    pub p: f64,
    pub kappa: f64,
}

impl LyapunovParams {
    pub fn new(p: f64, kappa: f64) -> Result<Self> {
        if !(p >= 2.0) || !(kappa > 0.0) {
            return Err(Error::Parameter(format!(
                "weight needs p ≥ 2 and kappa > 0, got p={p}, kappa={kappa}"
            )));
        }
        Ok(Self { p, kappa })
    }
}

/// Arguments above this are treated as overflow: the weight is +∞ and the
/// state lies outside the finite-weight domain.
pub const EXP_CAP: f64 = 700.0;

fn exp_guarded(arg: f64) -> f64 {
    if arg > EXP_CAP {
        f64::INFINITY
    } else {
        arg.exp()
    }
}

/// V_{p,κ}(x) = e^{κ|x|₂²}(1 + |x|_p^p), with V_{2,κ} := e^{κ|x|₂²}.
pub fn v_weight(b: &Basis, x: &SpectralVector, lp: &LyapunovParams) -> f64 {
    let l2sq = x.a.iter().map(|v| v * v).sum::<f64>();
    let e = exp_guarded(lp.kappa * l2sq);
    if lp.p == 2.0 {
        e
    } else {
        let g = b.synthesize(x);
        e * (1.0 + b.lp_pow_grid(&g.v, lp.p))
    }
}

/// Θ_{p,κ}(x) = V_{p,κ}(x)(1+|x′|₂²) + V_κ(x)·|(|x|^{p/2})′|₂², where the
/// second term is (p²/4)∫ x′²|x|^{p−2} on the grid; for p = 2 it merges into
/// the first.
pub fn theta_weight(b: &Basis, x: &SpectralVector, lp: &LyapunovParams) -> f64 {
    let h1sq = x
        .a
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let pk = PI * (i + 1) as f64;
            pk * pk * v * v
        })
        .sum::<f64>();
    let l2sq = x.a.iter().map(|v| v * v).sum::<f64>();
    let vk = exp_guarded(lp.kappa * l2sq);
    if lp.p == 2.0 {
        return vk * (1.0 + h1sq);
    }
    let g = b.synthesize(x);
    let d = b.derivative_grid(x);
    let s = b.lp_pow_grid(&g.v, lp.p);
    let w2: f64 = b.w
        * g.v
            .iter()
            .zip(&d.v)
            .map(|(&v, &dv)| dv * dv * v.abs().powf(lp.p - 2.0))
            .sum::<f64>();
    vk * (1.0 + s) * (1.0 + h1sq) + vk * (lp.p * lp.p / 4.0) * w2
}

/// DV_{p,κ}(x) = V_{p,κ}(x)·(2κx + p·x|x|^{p−2}/(1+|x|_p^p)), analyzed onto
/// the basis modes.
pub fn grad_v(b: &Basis, x: &SpectralVector, lp: &LyapunovParams) -> SpectralVector {
    let v = v_weight(b, x, lp);
    if lp.p == 2.0 {
        return x.scale(2.0 * lp.kappa * v);
    }
    let g = b.synthesize(x);
    let s = b.lp_pow_grid(&g.v, lp.p);
    let t: Vec<f64> = g
        .v
        .iter()
        .map(|&u| u * u.abs().powf(lp.p - 2.0))
        .collect();
    let mut ta = vec![0.0; b.n];
    b.analyze_into(&t, &mut ta);
    let mut out = vec![0.0; b.n];
    for k in 0..b.n {
        let xk = x.a.get(k).copied().unwrap_or(0.0);
        out[k] = v * (2.0 * lp.kappa * xk + lp.p * ta[k] / (1.0 + s));
    }
    SpectralVector::new(out)
}

/// (ξ, D²V_{p,κ}(x) η): the exact bilinear Hessian form.
pub fn hess_v_form(
    b: &Basis,
    x: &SpectralVector,
    xi: &SpectralVector,
    eta: &SpectralVector,
    lp: &LyapunovParams,
) -> f64 {
    let k2 = 2.0 * lp.kappa;
    let v = v_weight(b, x, lp);
    let dot_xe = xi.dot(eta);
    let dot_xx = xi.dot(x);
    let dot_ex = eta.dot(x);
    if lp.p == 2.0 {
        return v * (k2 * dot_xx * k2 * dot_ex + k2 * dot_xe);
    }
    let gx = b.synthesize(x);
    let gxi = b.synthesize(xi);
    let geta = b.synthesize(eta);
    let s = b.lp_pow_grid(&gx.v, lp.p);
    let mut xi_t = 0.0;
    let mut eta_t = 0.0;
    let mut xi_eta_q = 0.0;
    for j in 0..b.m {
        let u = gx.v[j];
        let aq2 = u.abs().powf(lp.p - 2.0);
        let t = u * aq2;
        xi_t += gxi.v[j] * t;
        eta_t += geta.v[j] * t;
        xi_eta_q += gxi.v[j] * geta.v[j] * aq2;
    }
    xi_t *= b.w;
    eta_t *= b.w;
    xi_eta_q *= b.w;
    let den = 1.0 + s;
    let t_xi = k2 * dot_xx + lp.p * xi_t / den;
    let t_eta = k2 * dot_ex + lp.p * eta_t / den;
    v * (t_xi * t_eta + k2 * dot_xe + lp.p * (lp.p - 1.0) * xi_eta_q / den
        - lp.p * lp.p * xi_t * eta_t / (den * den))
}

// ---------------------------------------------------------------------------
// Explicit constants
// ---------------------------------------------------------------------------

/// κ₀ = (2 − |h₁|₁)/(8a₀).
pub fn kappa0(h1_l1: f64, a0: f64) -> Result<f64> {
    if h1_l1 >= 2.0 {
        return Err(Error::Parameter(format!(
            "one-sided slope mass |h1|_1 = {h1_l1} must be < 2"
        )));
    }
    if a0 <= 0.0 {
        return Err(Error::Parameter("a0 must be positive".into()));
    }
    Ok((2.0 - h1_l1) / (8.0 * a0))
}

/// λ_κ = 2κ·Tr A + |h₀|₁²·κ/(4 − 2|h₁|₁ − 8κa₀).
pub fn lambda_kappa(kappa: f64, trace_a: f64, h0_l1: f64, h1_l1: f64, a0: f64) -> Result<f64> {
    let den = 4.0 - 2.0 * h1_l1 - 8.0 * kappa * a0;
    if den <= 0.0 {
        return Err(Error::Parameter(format!(
            "kappa = {kappa} too large: 4 − 2|h1|₁ − 8κa₀ = {den} must be positive"
        )));
    }
    Ok(2.0 * kappa * trace_a + h0_l1 * h0_l1 * kappa / den)
}

/// m_{κ,λ} = min(λ/2, 2κ − |h₁|₁κ − |h₀|₁²κ²/(λ − 4κ·Tr A) − 4a₀κ²),
/// requiring λ > 2λ_κ and λ > 4κ·Tr A.
pub fn m_kappa_lambda(
    kappa: f64,
    lambda: f64,
    trace_a: f64,
    h0_l1: f64,
    h1_l1: f64,
    a0: f64,
) -> Result<f64> {
    let lk = lambda_kappa(kappa, trace_a, h0_l1, h1_l1, a0)?;
    if lambda <= 2.0 * lk || lambda <= 4.0 * kappa * trace_a {
        return Err(Error::Parameter(format!(
            "need lambda > max(2λ_κ, 4κTrA) = {}, got {lambda}",
            (2.0 * lk).max(4.0 * kappa * trace_a)
        )));
    }
    let m = (lambda / 2.0).min(
        2.0 * kappa
            - h1_l1 * kappa
            - h0_l1 * h0_l1 * kappa * kappa / (lambda - 4.0 * kappa * trace_a)
            - 4.0 * a0 * kappa * kappa,
    );
    if m <= 0.0 {
        return Err(Error::Parameter(format!(
            "coercivity constant m = {m} not positive at kappa = {kappa}, lambda = {lambda}"
        )));
    }
    Ok(m)
}

/// (λ_{q,κ}, m_{q,κ}) for q > 2, built on the q = 2 pair at λ = 2λ_κ + 1.
///
/// With ε = (q−1)/(2(4κ+q)) and Young exponents u₁ = 2q/(q−1),
/// v₁ = 2q/(q+1), the surplus terms of L V_{q,κ} over (1+|x|_q^q)·L V_κ are
/// absorbed as
///   λ_{q,κ} = (2λ_κ+1) + q²h₁²/(4ε) + q·C(ε) + 2√2·κq·√(TrA·‖A‖) + q(q−1)TrA,
///   C(ε) = (1/v₁)(u₁ε)^{−v₁/u₁}(q^{(q−1)/q}h₀)^{v₁},
/// at the cost of (q² + q)ε of the q(q−1) coercivity carried by the
/// ∫x′²|x|^{q−2} term, whence
///   m_{q,κ} = min(m_{κ,2λ_κ+1}, (4/q²)(q(q−1) − q²ε·1_{h₁>0} − qε·1_{h₀>0})).
pub fn constants_q(
    q: f64,
    kappa: f64,
    noise: &NoiseSpec,
    model: &NonlinearityModel,
) -> Result<(f64, f64)> {
    if !(q > 2.0) {
        return Err(Error::Parameter(format!("constants_q needs q > 2, got {q}")));
    }
    let c = &model.constants;
    let a0 = noise.a0();
    let k0 = kappa0(c.h1, a0)?;
    if !(kappa > 0.0 && kappa < k0) {
        return Err(Error::Parameter(format!(
            "kappa must lie in (0, kappa0) = (0, {k0}), got {kappa}"
        )));
    }
    let trace = noise.trace();
    let lk = lambda_kappa(kappa, trace, c.h0, c.h1, a0)?;
    let lambda_base = 2.0 * lk + 1.0;
    let m_base = m_kappa_lambda(kappa, lambda_base, trace, c.h0, c.h1, a0)?;

    let eps = (q - 1.0) / (2.0 * (4.0 * kappa + q));
    let mut lambda_q = lambda_base;
    let mut spent = 0.0;
    if c.h1 > 0.0 {
        lambda_q += q * q * c.h1 * c.h1 / (4.0 * eps);
        spent += q * q * eps;
    }
    if c.h0 > 0.0 {
        let u1 = 2.0 * q / (q - 1.0);
        let v1 = 2.0 * q / (q + 1.0);
        let cb = (1.0 / v1)
            * (u1 * eps).powf(-v1 / u1)
            * (q.powf((q - 1.0) / q) * c.h0).powf(v1);
        lambda_q += q * cb;
        spent += q * eps;
    }
    lambda_q += 2.0 * 2.0f64.sqrt() * kappa * q * (trace * noise.opnorm()).sqrt();
    lambda_q += q * (q - 1.0) * trace;

    let w_net = q * (q - 1.0) - spent;
    let m_q = m_base.min(4.0 * w_net / (q * q));
    debug_assert!(lambda_q > 2.0 * lk && m_q > 0.0 && m_q < q * (q - 1.0));
    Ok((lambda_q, m_q))
}

/// The full constant bundle at the standard choices κ = κ₀/2, λ = 2λ_κ + 1.
#[derive(Debug, Clone)]
pub struct StandardConstants {
    pub a0: f64,
    pub trace: f64,
    pub trace_finite: f64,
    pub kappa0: f64,
    pub kappa: f64,
    pub lambda_kappa: f64,
    pub lambda: f64,
    pub m_kappa_lambda: f64,
    pub q: f64,
    pub lambda_q_kappa: f64,
    pub m_q_kappa: f64,
}

pub fn standard_constants(
    model: &NonlinearityModel,
    noise: &NoiseSpec,
    q: f64,
) -> Result<StandardConstants> {
    let c = &model.constants;
    let a0 = noise.a0();
    let k0 = kappa0(c.h1, a0)?;
    let kappa = 0.5 * k0;
    let trace = noise.trace();
    let lk = lambda_kappa(kappa, trace, c.h0, c.h1, a0)?;
    let lambda = 2.0 * lk + 1.0;
    let m = m_kappa_lambda(kappa, lambda, trace, c.h0, c.h1, a0)?;
    let (lq, mq) = constants_q(q, kappa, noise, model)?;
    Ok(StandardConstants {
        a0,
        trace,
        trace_finite: noise.trace_finite(),
        kappa0: k0,
        kappa,
        lambda_kappa: lk,
        lambda,
        m_kappa_lambda: m,
        q,
        lambda_q_kappa: lq,
        m_q_kappa: mq,
    })
}

// ---------------------------------------------------------------------------
// L_N applied to V and the drift inequality
// ---------------------------------------------------------------------------

/// L_N V_{p,κ}(x) = ½Σ_i α_i ∂²_ii V + Σ_i (−π²i²x_i + f_i) ∂_i V, assembled
/// exactly from the closed-form derivatives; fx holds the drift coefficients
/// F_N(x) (length ≥ the state's modes, zero-padded as needed).
pub fn apply_l_to_v(
    b: &Basis,
    x: &SpectralVector,
    fx: &[f64],
    noise: &NoiseSpec,
    lp: &LyapunovParams,
) -> f64 {
    let n = b.n;
    let kappa = lp.kappa;
    let l2sq = x.a.iter().map(|v| v * v).sum::<f64>();
    let vk = exp_guarded(kappa * l2sq);
    if !vk.is_finite() {
        return f64::INFINITY;
    }
    let xi = |k: usize| x.a.get(k).copied().unwrap_or(0.0);
    let fi = |k: usize| fx.get(k).copied().unwrap_or(0.0);
    let ai = |k: usize| noise.alpha.get(k).copied().unwrap_or(0.0);

    if lp.p == 2.0 {
        let mut acc = 0.0;
        for k in 0..n {
            let xk = xi(k);
            let dk = 2.0 * kappa * xk;
            let ddk = dk * dk + 2.0 * kappa;
            let pk = PI * (k + 1) as f64;
            let bk = -pk * pk * xk + fi(k);
            acc += 0.5 * ai(k) * ddk + bk * dk;
        }
        return vk * acc;
    }

    let q = lp.p;
    let g = b.synthesize(x);
    let s = b.lp_pow_grid(&g.v, q);
    let vq = vk * (1.0 + s);
    // t = x|x|^{q−2} and |x|^{q−2} on the grid, then per-mode pairings.
    let mut t_grid = vec![0.0; b.m];
    let mut aq_grid = vec![0.0; b.m];
    for j in 0..b.m {
        let u = g.v[j];
        let a2 = u.abs().powf(q - 2.0);
        aq_grid[j] = a2;
        t_grid[j] = u * a2;
    }
    let den = 1.0 + s;
    let mut acc = 0.0;
    for k in 0..n {
        let row = b.eta_row(k + 1);
        let mut sk = 0.0;
        let mut wk = 0.0;
        for j in 0..b.m {
            sk += row[j] * t_grid[j];
            wk += row[j] * row[j] * aq_grid[j];
        }
        sk *= b.w;
        wk *= b.w;
        let xk = xi(k);
        let tk = 2.0 * kappa * xk + q * sk / den;
        let ddk = tk * tk + 2.0 * kappa + q * (q - 1.0) * wk / den - q * q * sk * sk / (den * den);
        let pk = PI * (k + 1) as f64;
        let bk = -pk * pk * xk + fi(k);
        acc += 0.5 * ai(k) * ddk + bk * tk;
    }
    vq * acc
}

/// λ·V_{p,κ}(x) − m·Θ_{p,κ}(x) − L_N V_{p,κ}(x): nonnegative under the drift
/// inequality with admissible constants.
pub fn drift_inequality_margin(
    b: &Basis,
    x: &SpectralVector,
    fx: &[f64],
    noise: &NoiseSpec,
    lp: &LyapunovParams,
    lambda: f64,
    m: f64,
) -> f64 {
    let v = v_weight(b, x, lp);
    if !v.is_finite() {
        return f64::INFINITY;
    }
    lambda * v - m * theta_weight(b, x, lp) - apply_l_to_v(b, x, fx, noise, lp)
}

/// Minimum margin over a probe set, with the index of the worst probe.
pub fn margin_batch(
    reg: &RegularizedDrift,
    noise: &NoiseSpec,
    lp: &LyapunovParams,
    lambda: f64,
    m: f64,
    probes: &[SpectralVector],
) -> (f64, usize) {
    use rayon::prelude::*;
    probes
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let fx = reg.eval(x);
            (drift_inequality_margin(&reg.basis, x, &fx.a, noise, lp, lambda, m), i)
        })
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 { b } else { a },
        )
}

/// The standard probe census: the deterministic states {0, ±η₁, ±2η₁, η₁+η₂}
/// followed by Gaussian states a_k ~ N(0, s²k^{−4-free}) at spreads
/// s ∈ {0.5, 1, 2}, filtered to the finite-weight region.
pub fn standard_probes(n: usize, count: usize, kappa: f64, seed: u64) -> Vec<SpectralVector> {
    let mut probes = Vec::with_capacity(count);
    let det: [Vec<(usize, f64)>; 6] = [
        vec![],
        vec![(1, 1.0)],
        vec![(1, -1.0)],
        vec![(1, 2.0)],
        vec![(1, -2.0)],
        vec![(1, 1.0), (2, 1.0)],
    ];
    for spec in det.iter() {
        let mut a = vec![0.0; n];
        for &(k, c) in spec {
            a[k - 1] = c;
        }
        probes.push(SpectralVector::new(a));
    }
    let spreads = [0.5, 1.0, 2.0];
    let mut p = 0u64;
    while probes.len() < count {
        let s = spreads[probes.len() % spreads.len()];
        let a: Vec<f64> = (1..=n)
            .map(|k| s * rng::normal_at(seed, rng::purpose::PROBE, p, k as u64) / k as f64)
            .collect();
        p += 1;
        let x = SpectralVector::new(a);
        if kappa * x.l2() * x.l2() < EXP_CAP - 10.0 {
            probes.push(x);
        }
    }
    probes
}

// ---------------------------------------------------------------------------
// Weighted norms, seminorms, form bounds
// ---------------------------------------------------------------------------

/// Sampled ‖f‖_{p,κ} = sup V^{−1}|f|: max over probes (a lower bound of the
/// sup).
pub fn weighted_norm(
    f: &dyn Fn(&SpectralVector) -> f64,
    probes: &[SpectralVector],
    b: &Basis,
    lp: &LyapunovParams,
) -> f64 {
    probes
        .iter()
        .map(|x| {
            let v = v_weight(b, x, lp);
            if v.is_finite() {
                f(x).abs() / v
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Sampled (f)_{l,p,κ} = sup (V(y₁)∨V(y₂))^{−1}|f(y₁)−f(y₂)| / |(−Δ)^{−l/2}(y₁−y₂)|₂.
pub fn lipschitz_seminorm(
    f: &dyn Fn(&SpectralVector) -> f64,
    pairs: &[(SpectralVector, SpectralVector)],
    l: i32,
    b: &Basis,
    lp: &LyapunovParams,
) -> f64 {
    pairs
        .iter()
        .map(|(y1, y2)| {
            let diff = y1.axpy(-1.0, y2);
            let den = frac_laplacian_scale(&diff, l).l2();
            if den == 0.0 {
                return 0.0;
            }
            let vmax = v_weight(b, y1, lp).max(v_weight(b, y2, lp));
            if !vmax.is_finite() {
                return 0.0;
            }
            (f(y1) - f(y2)).abs() / (vmax * den)
        })
        .fold(0.0, f64::max)
}

/// (DF(x)y, y) by central differences minus the admissible |y′|₂² and
/// ε|x′|₂²|y|₂² budget, per unit |y|₂²: the per-sample C_ε requirement.
pub fn form_bound_audit(
    f: &dyn Fn(&SpectralVector) -> SpectralVector,
    x: &SpectralVector,
    y: &SpectralVector,
    epsilon: f64,
) -> f64 {
    let h = 1e-5 * (1.0 + x.l2());
    let plus = f(&x.axpy(h, y));
    let minus = f(&x.axpy(-h, y));
    let dfyy = plus.axpy(-1.0, &minus).dot(y) / (2.0 * h);
    let y2 = y.l2().powi(2);
    let yp2 = y.h1_seminorm().powi(2);
    let xp2 = x.h1_seminorm().powi(2);
    (dfyy - yp2 - epsilon * xp2 * y2) / y2
}

/// The (F2e) variant: difference direction (−Δ)^{1/2}y paired against
/// (−Δ)^{−1/2}y.
pub fn form_bound_audit_e(
    f: &dyn Fn(&SpectralVector) -> SpectralVector,
    x: &SpectralVector,
    y: &SpectralVector,
    epsilon: f64,
) -> f64 {
    let z = frac_laplacian_scale(y, -1);
    let wdir = frac_laplacian_scale(y, 1);
    let h = 1e-5 * (1.0 + x.l2());
    let plus = f(&x.axpy(h, &z));
    let minus = f(&x.axpy(-h, &z));
    let dfzw = plus.axpy(-1.0, &minus).dot(&wdir) / (2.0 * h);
    let y2 = y.l2().powi(2);
    let yp2 = y.h1_seminorm().powi(2);
    let xp2 = x.h1_seminorm().powi(2);
    (dfzw - yp2 - epsilon * xp2 * y2) / y2
}

/// Empirical C_ε: max of the per-sample audit over (x, y) pairs.
pub fn form_bound_audit_batch(
    f: &dyn Fn(&SpectralVector) -> SpectralVector,
    samples: &[(SpectralVector, SpectralVector)],
    epsilon: f64,
    e_variant: bool,
) -> f64 {
    samples
        .iter()
        .map(|(x, y)| {
            if e_variant {
                form_bound_audit_e(f, x, y, epsilon)
            } else {
                form_bound_audit(f, x, y, epsilon)
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
