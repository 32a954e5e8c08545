//! The nonlinearity F = G_Ψ + F_Φ, its regularization pipeline (cutoff,
//! truncation, mollification), the diagonal noise operator A, and the
//! falsification audits for the structural conditions on Ψ and Φ.

use crate::rng;
use crate::spectral::{Basis, SpectralVector};
use crate::util::gauss_legendre;
use crate::{Error, Result};
use std::sync::OnceLock;

/// Real polynomial, coefficients low degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub c: Vec<f64>,
}

impl Polynomial {
    pub fn new(c: Vec<f64>) -> Self {
        let mut c = c;
        while c.len() > 1 && c.last() == Some(&0.0) {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Self { c }
    }

    pub fn zero() -> Self {
        Self { c: vec![0.0] }
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &ci in self.c.iter().rev() {
            acc = acc * x + ci;
        }
        acc
    }

    /// Σ |c_i| t^i — monotone majorant of |eval| on [−t, t].
    pub fn abs_eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &ci in self.c.iter().rev() {
            acc = acc * t + ci.abs();
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.c.len() <= 1 {
            return Polynomial::zero();
        }
        Polynomial::new(
            self.c[1..]
                .iter()
                .enumerate()
                .map(|(i, &ci)| (i + 1) as f64 * ci)
                .collect(),
        )
    }

    pub fn eval_deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &ci) in self.c.iter().enumerate().skip(1).rev() {
            acc = acc * x + i as f64 * ci;
        }
        acc
    }

    pub fn leading(&self) -> f64 {
        *self.c.last().unwrap()
    }
}

/// Maximize a smooth scalar function on [a, b]: dense grid then golden-section
/// refinement around the best node. Returns (argmax, max).
pub fn refine_max(f: impl Fn(f64) -> f64, a: f64, b: f64, grid: usize) -> (f64, f64) {
    let n = grid.max(8);
    let h = (b - a) / n as f64;
    let mut best_i = 0usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let v = f(a + i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = a + best_i.saturating_sub(1) as f64 * h;
    let mut hi = (a + (best_i + 1) as f64 * h).min(b);
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let xm = 0.5 * (lo + hi);
    (xm, f(xm).max(best))
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// Diagonal covariance A η_k = α_k η_k, optionally with a declared power-law
/// tail α_k = a·k^{−γ} for trace accounting beyond the resolved modes.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub alpha: Vec<f64>,
    decay: Option<(f64, f64)>,
}

impl NoiseSpec {
    /// α_k = a·k^{−γ}, γ > 1 for a summable tail.
    pub fn power_law(n: usize, a: f64, gamma: f64) -> Result<Self> {
        if n == 0 || a <= 0.0 || gamma <= 1.0 {
            return Err(Error::Parameter(format!(
                "power-law noise needs n ≥ 1, a > 0, gamma > 1, got n={n}, a={a}, gamma={gamma}"
            )));
        }
        let alpha = (1..=n).map(|k| a * (k as f64).powf(-gamma)).collect();
        Ok(Self {
            alpha,
            decay: Some((a, gamma)),
        })
    }

    pub fn from_alphas(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Parameter(
                "noise eigenvalues must be nonnegative finite reals".into(),
            ));
        }
        Ok(Self {
            alpha,
            decay: None,
        })
    }

    /// A ≡ 0 in n modes (deterministic dynamics; outside the trace-class
    /// invertibility condition, used for exactness checks).
    pub fn zero(n: usize) -> Self {
        Self {
            alpha: vec![0.0; n],
            decay: None,
        }
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// All α_k > 0 (invertibility of A_N).
    pub fn strictly_positive(&self) -> bool {
        self.alpha.iter().all(|&v| v > 0.0)
    }

    /// Tr A_N = Σ_{k≤n} α_k.
    pub fn trace_finite(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Analytic tail Σ_{k>n} a k^{−γ} by Euler–Maclaurin when a decay law is
    /// declared; 0 otherwise.
    pub fn tail(&self) -> f64 {
        match self.decay {
            None => 0.0,
            Some((a, g)) => {
                // Σ_{k≥m} k^{−γ} through the B₈ term: error ~ m^{−γ−9},
                // below 1e−14 for m ≥ 17 (λ_κ inherits the trace precision)
                let m = self.alpha.len() as f64 + 1.0;
                let p5 = g * (g + 1.0) * (g + 2.0) * (g + 3.0) * (g + 4.0);
                let p7 = p5 * (g + 5.0) * (g + 6.0);
                a * (m.powf(1.0 - g) / (g - 1.0)
                    + 0.5 * m.powf(-g)
                    + g / 12.0 * m.powf(-g - 1.0)
                    - g * (g + 1.0) * (g + 2.0) / 720.0 * m.powf(-g - 3.0)
                    + p5 / 30_240.0 * m.powf(-g - 5.0)
                    - p7 / 1_209_600.0 * m.powf(-g - 7.0))
            }
        }
    }

    /// Tr A including the declared tail.
    pub fn trace(&self) -> f64 {
        self.trace_finite() + self.tail()
    }

    /// a₀ = max_k α_k/(π²k²) (the tail only lowers α_k/(π²k²) when γ > −2).
    pub fn a0(&self) -> f64 {
        self.alpha
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let pk = std::f64::consts::PI * (i + 1) as f64;
                a / (pk * pk)
            })
            .fold(0.0, f64::max)
    }

    /// ‖A‖ = max_k α_k.
    pub fn opnorm(&self) -> f64 {
        self.alpha.iter().fold(0.0f64, |m, &a| m.max(a))
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Constants declared for the structural conditions; audited, never assumed.
#[derive(Debug, Clone)]
pub struct DeclaredConstants {
    /// C with |ψ″| ≤ C (vanishing envelope for polynomial ψ of degree ≤ 2).
    pub psi_c: f64,
    /// |Φ(r,x)| ≤ g·(1+|x|^{q2}), g ∈ L^{q1}.
    pub g: f64,
    pub q1: f64,
    pub q2: f64,
    /// Φ(r,x)·sign x ≤ h0 + h1|x| (constant-in-r envelopes; |h1|₁ < 2).
    pub h0: f64,
    pub h1: f64,
    /// One-sided increment bound: slope ≤ g0 + g1·σ^{2−1/p1} on 0 ≤ y−x ≤ rho0.
    pub rho0: f64,
    pub g0: f64,
    pub g1: f64,
    pub p1: f64,
}

/// Ψ (hydrodynamic) and Φ (reaction) as polynomials, with declared constants.
#[derive(Debug, Clone)]
pub struct NonlinearityModel {
    pub name: String,
    pub psi: Polynomial,
    pub phi: Polynomial,
    pub constants: DeclaredConstants,
}

impl NonlinearityModel {
    pub fn burgers() -> Self {
        Self {
            name: "burgers".into(),
            psi: Polynomial::new(vec![0.0, 0.0, 0.5]),
            phi: Polynomial::zero(),
            constants: DeclaredConstants {
                psi_c: 1.0,
                g: 0.0,
                q1: f64::INFINITY,
                q2: 1.0,
                h0: 0.0,
                h1: 0.0,
                rho0: 1.0,
                g0: 0.0,
                g1: 0.0,
                p1: 2.0,
            },
        }
    }

    pub fn ginzburg_landau() -> Self {
        Self {
            name: "ginzburg-landau".into(),
            psi: Polynomial::zero(),
            phi: Polynomial::new(vec![0.0, 1.0, 0.0, -1.0]),
            constants: DeclaredConstants {
                psi_c: 0.0,
                g: 2.0,
                q1: f64::INFINITY,
                q2: 3.0,
                // max_{x>0} (x − x³) = 2/(3√3)
                h0: 2.0 / (3.0 * 3.0f64.sqrt()),
                h1: 0.0,
                rho0: 1.0,
                g0: 1.0,
                g1: 0.0,
                p1: 2.0,
            },
        }
    }

    pub fn mixed() -> Self {
        let gl = Self::ginzburg_landau();
        Self {
            name: "mixed".into(),
            psi: Polynomial::new(vec![0.0, 0.0, 0.5]),
            phi: gl.phi,
            constants: DeclaredConstants {
                psi_c: 1.0,
                ..gl.constants
            },
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "burgers" => Ok(Self::burgers()),
            "ginzburg-landau" => Ok(Self::ginzburg_landau()),
            "mixed" => Ok(Self::mixed()),
            other => Err(Error::Parameter(format!(
                "unknown preset '{other}' (expected burgers, ginzburg-landau or mixed)"
            ))),
        }
    }

    /// Custom model from coefficient lists. Ψ must have degree ≤ 2 (bounded
    /// second derivative); Φ of degree ≥ 2 must have odd degree and negative
    /// leading coefficient so the one-sided bound can hold with constants.
    pub fn custom(psi_coeffs: Vec<f64>, phi_coeffs: Vec<f64>) -> Result<Self> {
        let psi = Polynomial::new(psi_coeffs);
        let phi = Polynomial::new(phi_coeffs);
        if psi.degree() > 2 {
            return Err(Error::Parameter(
                "psi must be a polynomial of degree ≤ 2 (its second derivative must be bounded)"
                    .into(),
            ));
        }
        let psi_c = psi.derivative().derivative().eval(0.0).abs();
        let deg = phi.degree();
        let viable = phi.is_zero()
            || deg <= 1
            || (deg % 2 == 1 && phi.leading() < 0.0);
        if !viable {
            return Err(Error::Parameter(
                "phi must have degree ≤ 1, or odd degree with negative leading coefficient, \
                 for the one-sided linear-growth bound to hold"
                    .into(),
            ));
        }
        // Critical points of x ↦ φ(x)·sign x and of φ′ lie within the Cauchy
        // root bound of the relevant derivative polynomials.
        let reach = {
            let lead = phi.leading().abs().max(1e-300);
            1.0 + phi.c.iter().map(|c| c.abs()).sum::<f64>() / lead
        };
        let h1 = if deg <= 1 && !phi.is_zero() {
            phi.eval_deriv(0.0).max(0.0)
        } else {
            0.0
        };
        let h0 = if phi.is_zero() {
            0.0
        } else {
            let f = |x: f64| phi.eval(x) * x.signum() - h1 * x.abs();
            let (_, mpos) = refine_max(f, 0.0, reach, 40_000);
            let (_, mneg) = refine_max(f, -reach, 0.0, 40_000);
            mpos.max(mneg).max(0.0)
        };
        let q2 = deg.max(1) as f64;
        let g = if phi.is_zero() {
            0.0
        } else {
            let f = |x: f64| phi.eval(x).abs() / (1.0 + x.abs().powf(q2));
            let (_, m) = refine_max(f, -reach, reach, 40_000);
            m.max(phi.leading().abs())
        };
        let g0 = if phi.is_zero() {
            0.0
        } else {
            let d = phi.derivative();
            let (_, m) = refine_max(|x| d.eval(x), -reach, reach, 40_000);
            m.max(0.0)
        };
        Ok(Self {
            name: "custom".into(),
            psi,
            phi,
            constants: DeclaredConstants {
                psi_c,
                g,
                q1: f64::INFINITY,
                q2,
                h0,
                h1,
                rho0: 1.0,
                g0,
                g1: 0.0,
                p1: 2.0,
            },
        })
    }
}

// ---------------------------------------------------------------------------
// Pointwise drift evaluation
// ---------------------------------------------------------------------------

/// Reaction term Φ(r, x) evaluated pointwise.
pub trait ReactionMap: Sync {
    fn value(&self, r: f64, x: f64) -> f64;
}

impl ReactionMap for Polynomial {
    fn value(&self, _r: f64, x: f64) -> f64 {
        self.eval(x)
    }
}

/// G_ψ(x) = x′·ψ′∘x, projected onto the first `basis.n` modes.
pub fn eval_gpsi(b: &Basis, x: &SpectralVector, psi: &Polynomial) -> SpectralVector {
    let mut grid = vec![0.0; b.m];
    let mut dgrid = vec![0.0; b.m];
    b.synthesize_into(&x.a, &mut grid);
    b.derivative_into(&x.a, &mut dgrid);
    for j in 0..b.m {
        grid[j] = dgrid[j] * psi.eval_deriv(grid[j]);
    }
    let mut a = vec![0.0; b.n];
    b.analyze_into(&grid, &mut a);
    SpectralVector::new(a)
}

/// F_φ(x) = φ(·, x(·)), projected onto the first `basis.n` modes.
pub fn eval_fphi<R: ReactionMap + ?Sized>(
    b: &Basis,
    x: &SpectralVector,
    phi: &R,
) -> SpectralVector {
    let mut grid = vec![0.0; b.m];
    b.synthesize_into(&x.a, &mut grid);
    for (j, g) in grid.iter_mut().enumerate() {
        *g = phi.value(b.nodes[j], *g);
    }
    let mut a = vec![0.0; b.n];
    b.analyze_into(&grid, &mut a);
    SpectralVector::new(a)
}

/// F(x) = G_Ψ(x) + F_Φ(x) with the raw (unregularized) model.
pub fn eval_f(b: &Basis, x: &SpectralVector, model: &NonlinearityModel) -> SpectralVector {
    let g = eval_gpsi(b, x, &model.psi);
    let f = eval_fphi(b, x, &model.phi);
    g.axpy(1.0, &f)
}

// ---------------------------------------------------------------------------
// Regularization: cutoff, truncation, mollification
// ---------------------------------------------------------------------------

/// Quintic smoothstep: 0 → 1 on [0,1] with vanishing first two derivatives at
/// both ends.
#[inline]
fn smoothstep5(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

#[inline]
fn smoothstep5_deriv(t: f64) -> f64 {
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

/// Plateau cutoff: 1 on |y| ≤ 1/2, 0 on |y| ≥ 1, C² blend between.
pub fn cutoff_chi(y: f64) -> f64 {
    let a = y.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        1.0 - smoothstep5(2.0 * a - 1.0)
    }
}

pub fn cutoff_chi_deriv(y: f64) -> f64 {
    let a = y.abs();
    if a <= 0.5 || a >= 1.0 {
        0.0
    } else {
        -2.0 * smoothstep5_deriv(2.0 * a - 1.0) * y.signum()
    }
}

/// Odd C² saturation: identity on [−1,1], ±3/2 beyond |z| = 2, slope in [0,1].
pub fn theta(z: f64) -> f64 {
    let a = z.abs();
    if a <= 1.0 {
        z
    } else if a >= 2.0 {
        1.5 * z.signum()
    } else {
        let t = a - 1.0;
        // H(t) = t − t³ + t⁴/2: H(0)=0, H(1)=1/2, H′=(1−t)²(1+2t) ∈ [0,1],
        // H″(0)=H″(1)=0, so θ is C² with 0 ≤ θ′ ≤ 1.
        z.signum() * (1.0 + t - t * t * t + 0.5 * t * t * t * t)
    }
}

/// θ_N(v) = N·θ(v/N): identity for |v| ≤ N, capped at 3N/2.
pub fn theta_n(level: f64, v: f64) -> f64 {
    level * theta(v / level)
}

/// ψ^{(N)}(y) = ψ(y)·χ(y/N): equals ψ on [−N/2, N/2], vanishes beyond |y| = N.
#[derive(Debug, Clone)]
pub struct CutoffPsi {
    pub psi: Polynomial,
    pub level: f64,
    dpsi: Polynomial,
}

impl CutoffPsi {
    pub fn new(psi: Polynomial, level: f64) -> Self {
        let dpsi = psi.derivative();
        Self { psi, level, dpsi }
    }

    pub fn value(&self, y: f64) -> f64 {
        if y.abs() >= self.level {
            return 0.0;
        }
        self.psi.eval(y) * cutoff_chi(y / self.level)
    }

    pub fn deriv(&self, y: f64) -> f64 {
        if y.abs() >= self.level {
            return 0.0;
        }
        let s = y / self.level;
        self.dpsi.eval(y) * cutoff_chi(s) + self.psi.eval(y) * cutoff_chi_deriv(s) / self.level
    }

    /// sup |ψ^{(N)}′| over the support, by dense grid + refinement.
    pub fn deriv_sup(&self) -> f64 {
        let l = self.level;
        let (_, m) = refine_max(|y| self.deriv(y).abs(), -l, l, 20_000);
        m
    }
}

/// φ_N = θ_N ∘ φ: values clamped to [−3N/2, 3N/2], φ untouched where |φ| ≤ N.
#[derive(Debug, Clone)]
pub struct TruncatedPhi {
    pub phi: Polynomial,
    pub level: f64,
}

impl TruncatedPhi {
    pub fn new(phi: Polynomial, level: f64) -> Self {
        Self { phi, level }
    }
}

impl ReactionMap for TruncatedPhi {
    fn value(&self, _r: f64, x: f64) -> f64 {
        theta_n(self.level, self.phi.eval(x))
    }
}

/// The standard bump exp(−1/(1−y²)) on (−1,1), discretized once: 32
/// Gauss–Legendre nodes with weights renormalized so the zeroth discrete
/// moment is exactly 1 (mollification of constants is then exact).
#[derive(Debug)]
pub struct Mollifier {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn bump(y: f64) -> f64 {
    let s = 1.0 - y * y;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

impl Mollifier {
    pub fn standard() -> &'static Mollifier {
        static CELL: OnceLock<Mollifier> = OnceLock::new();
        CELL.get_or_init(|| {
            let (z_nodes, z_weights) = gauss_legendre(64);
            let z: f64 = z_nodes
                .iter()
                .zip(&z_weights)
                .map(|(&y, &w)| w * bump(y))
                .sum();
            let (nodes, gw) = gauss_legendre(32);
            let mut weights: Vec<f64> = nodes
                .iter()
                .zip(&gw)
                .map(|(&y, &w)| w * bump(y) / z)
                .collect();
            let s: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= s;
            }
            Mollifier { nodes, weights }
        })
    }

    /// Discrete moment m_i = Σ_j W_j s_j^i: exactly 1 at i = 0 and exactly 0
    /// for odd i (mirror pairing).
    pub fn moment(&self, i: usize) -> f64 {
        if i == 0 {
            return 1.0;
        }
        if i % 2 == 1 {
            return 0.0;
        }
        let half = self.nodes.len() / 2;
        2.0 * (0..half)
            .map(|j| {
                let k = self.nodes.len() - 1 - j;
                self.weights[k] * self.nodes[k].powi(i as i32)
            })
            .sum::<f64>()
    }
}

#[derive(Debug, Clone)]
enum ReactionInner {
    Poly(Polynomial),
    Truncated(TruncatedPhi),
}

/// φ_β(r, x) = ∫ φ(r, x − y) δ_β(r, y) dy with node-dependent width
/// β√(r(1−r)). Polynomial cores use the exact discrete moment expansion; the
/// truncated core falls back to direct quadrature where the saturation can
/// bite within the stencil.
#[derive(Debug, Clone)]
pub struct Mollified {
    inner: ReactionInner,
    pub beta: f64,
    /// φ^{(i)}/i! for the even-moment expansion.
    scaled_derivs: Vec<Polynomial>,
    moments: Vec<f64>,
}

/// Below this stencil width mollification is skipped (widths vanish at the
/// interval endpoints by design).
pub const MIN_WIDTH: f64 = 1e-8;

impl Mollified {
    pub fn poly(phi: Polynomial, beta: f64) -> Result<Self> {
        Self::build(ReactionInner::Poly(phi), beta)
    }

    pub fn truncated(phi: TruncatedPhi, beta: f64) -> Result<Self> {
        Self::build(ReactionInner::Truncated(phi), beta)
    }

    fn build(inner: ReactionInner, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Parameter(format!(
                "mollifier width beta must lie in (0,1), got {beta}"
            )));
        }
        let core = match &inner {
            ReactionInner::Poly(p) => p,
            ReactionInner::Truncated(t) => &t.phi,
        };
        let moll = Mollifier::standard();
        let deg = core.degree();
        let mut scaled_derivs = Vec::with_capacity(deg + 1);
        let mut d = core.clone();
        let mut fact = 1.0;
        for i in 0..=deg {
            if i > 0 {
                d = d.derivative();
                fact *= i as f64;
            }
            scaled_derivs.push(Polynomial::new(d.c.iter().map(|&c| c / fact).collect()));
        }
        let moments = (0..=deg).map(|i| moll.moment(i)).collect();
        Ok(Self {
            inner,
            beta,
            scaled_derivs,
            moments,
        })
    }

    /// σ(r) = √(r(1−r)) half-width profile.
    pub fn width_at(&self, r: f64) -> f64 {
        self.beta * (r * (1.0 - r)).max(0.0).sqrt()
    }

    /// Evaluate with a precomputed stencil half-width.
    pub fn value_with_width(&self, r: f64, x: f64, width: f64) -> f64 {
        let (core, level) = match &self.inner {
            ReactionInner::Poly(p) => (p, f64::INFINITY),
            ReactionInner::Truncated(t) => (&t.phi, t.level),
        };
        if width < MIN_WIDTH {
            return match &self.inner {
                ReactionInner::Poly(p) => p.eval(x),
                ReactionInner::Truncated(t) => t.value(r, x),
            };
        }
        let fast = level.is_infinite() || core.abs_eval(x.abs() + width) <= level;
        if fast {
            // Σ_i m_i width^i φ^{(i)}(x)/i!, odd moments vanish identically.
            let mut acc = self.scaled_derivs[0].eval(x);
            let w2 = width * width;
            let mut wp = 1.0;
            let mut i = 2;
            while i < self.scaled_derivs.len() {
                wp *= w2;
                acc += self.moments[i] * wp * self.scaled_derivs[i].eval(x);
                i += 2;
            }
            acc
        } else {
            let moll = Mollifier::standard();
            let mut acc = 0.0;
            for (s, w) in moll.nodes.iter().zip(&moll.weights) {
                acc += w * theta_n(level, core.eval(x - width * s));
            }
            acc
        }
    }
}

impl ReactionMap for Mollified {
    fn value(&self, r: f64, x: f64) -> f64 {
        self.value_with_width(r, x, self.width_at(r))
    }
}

// ---------------------------------------------------------------------------
// β selection and the assembled regularized drift
// ---------------------------------------------------------------------------

/// count random states with |x′|₂ uniformly spread in (0, radius], Gaussian
/// coefficient shape ∝ k^{−2}.
pub fn h1_ball_probes(
    n: usize,
    count: usize,
    radius: f64,
    seed: u64,
    purpose: u64,
) -> Vec<SpectralVector> {
    (0..count)
        .map(|p| {
            let mut a: Vec<f64> = (1..=n)
                .map(|k| {
                    rng::normal_at(seed, purpose, p as u64, k as u64) / ((k * k) as f64)
                })
                .collect();
            let x = SpectralVector::new(a.clone());
            let h1 = x.h1_seminorm();
            let target = rng::uniform_at(seed, purpose, p as u64, 0) * radius;
            if h1 > 0.0 {
                let s = target / h1;
                for v in a.iter_mut() {
                    *v *= s;
                }
            }
            SpectralVector::new(a)
        })
        .collect()
}

const BETA_LADDER_LEN: u32 = 20;

fn select_beta_raw(phi: &Polynomial, n: usize, seed: u64) -> Result<f64> {
    let b = Basis::with_default_grid(n)?;
    let probes = h1_ball_probes(n, 200, n as f64, seed, rng::purpose::BETA_PROBE);
    let trunc = TruncatedPhi::new(phi.clone(), n as f64);
    let tol = 1.0 / n as f64;
    let mut grid = vec![0.0; b.m];
    for e in 1..=BETA_LADDER_LEN {
        let beta = 0.5f64.powi(e as i32);
        let moll = Mollified::truncated(trunc.clone(), beta)?;
        let mut sup = 0.0f64;
        'probes: for x in &probes {
            b.synthesize_into(&x.a, &mut grid);
            let mut s2 = 0.0;
            for (j, &g) in grid.iter().enumerate() {
                let r = b.nodes[j];
                let d = trunc.value(r, g) - moll.value(r, g);
                s2 += d * d;
            }
            sup = sup.max((b.w * s2).sqrt());
            if sup > tol {
                break 'probes;
            }
        }
        if sup <= tol {
            return Ok(beta);
        }
    }
    Err(Error::Selection(format!(
        "no mollifier width on the dyadic ladder meets the 1/N criterion at N = {n}"
    )))
}

/// Largest ladder width β with sampled sup_{|x′|₂≤N} |F_{Φ_N} − F_{(Φ_N)_β}|₂
/// ≤ 1/N, made non-increasing across the N-doubling chain by also honoring
/// the selections at N/2, N/4, ….
pub fn select_beta(phi: &Polynomial, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Dimension("select_beta needs n ≥ 1".into()));
    }
    let mut beta = select_beta_raw(phi, n, seed)?;
    let mut k = n / 2;
    while k >= 2 {
        beta = beta.min(select_beta_raw(phi, k, seed)?);
        k /= 2;
    }
    Ok(beta)
}

/// Scratch buffers for allocation-free drift evaluation.
#[derive(Debug, Clone)]
pub struct DriftScratch {
    pub grid: Vec<f64>,
    pub dgrid: Vec<f64>,
}

impl DriftScratch {
    pub fn new(m: usize) -> Self {
        Self {
            grid: vec![0.0; m],
            dgrid: vec![0.0; m],
        }
    }
}

/// F_N = F_{(Φ_N)_{β_N}} + G_{Ψ_N}: bounded, locally Lipschitz drift on E_N.
#[derive(Debug, Clone)]
pub struct RegularizedDrift {
    pub n: usize,
    pub beta: f64,
    pub basis: Basis,
    pub cutoff: CutoffPsi,
    pub mollified: Mollified,
    has_psi: bool,
    has_phi: bool,
    widths: Vec<f64>,
}

impl RegularizedDrift {
    pub fn eval(&self, x: &SpectralVector) -> SpectralVector {
        let mut scratch = DriftScratch::new(self.basis.m);
        let mut out = vec![0.0; self.n];
        self.eval_into(&x.a, &mut scratch, &mut out);
        SpectralVector::new(out)
    }

    /// out ← coefficients of F_N(x) (length n); a is x's coefficient slice.
    pub fn eval_into(&self, a: &[f64], scratch: &mut DriftScratch, out: &mut [f64]) {
        let b = &self.basis;
        b.synthesize_into(a, &mut scratch.grid);
        if self.has_psi {
            b.derivative_into(a, &mut scratch.dgrid);
        }
        for j in 0..b.m {
            let g = scratch.grid[j];
            let mut v = 0.0;
            if self.has_phi {
                v += self
                    .mollified
                    .value_with_width(b.nodes[j], g, self.widths[j]);
            }
            if self.has_psi {
                v += scratch.dgrid[j] * self.cutoff.deriv(g);
            }
            scratch.grid[j] = v;
        }
        b.analyze_into(&scratch.grid, out);
    }

    /// (F_N(a·η₁), η₁) — the mode-1 drift seen by the 1-D marginal dynamics.
    pub fn f1_scalar(&self, amp: f64) -> f64 {
        let mut x = vec![0.0; self.n];
        x[0] = amp;
        let mut scratch = DriftScratch::new(self.basis.m);
        let mut out = vec![0.0; self.n];
        self.eval_into(&x, &mut scratch, &mut out);
        out[0]
    }
}

/// Assemble F_N at level N (grid M = 8N). The noise spec is accepted for
/// interface parity with the operator assembly; the drift itself does not
/// depend on it.
pub fn build_fn(
    model: &NonlinearityModel,
    noise: &NoiseSpec,
    n: usize,
    seed: u64,
) -> Result<RegularizedDrift> {
    build_fn_with_grid(model, noise, n, 8 * n, seed)
}

/// `build_fn` on an explicit quadrature grid size M (≥ 4N).
pub fn build_fn_with_grid(
    model: &NonlinearityModel,
    _noise: &NoiseSpec,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<RegularizedDrift> {
    let basis = Basis::new(n, m)?;
    let has_phi = !model.phi.is_zero();
    let has_psi = !model.psi.is_zero();
    let beta = if has_phi {
        select_beta(&model.phi, n, seed)?
    } else {
        0.5
    };
    let trunc = TruncatedPhi::new(model.phi.clone(), n as f64);
    let mollified = Mollified::truncated(trunc, beta)?;
    let widths: Vec<f64> = basis.nodes.iter().map(|&r| mollified.width_at(r)).collect();
    Ok(RegularizedDrift {
        n,
        beta,
        basis,
        cutoff: CutoffPsi::new(model.psi.clone(), n as f64),
        mollified,
        has_psi,
        has_phi,
        widths,
    })
}

// ---------------------------------------------------------------------------
// Convergence report and condition audits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub sup: f64,
}

/// Per-level sampled sup |P_N F − F_N∘P_N|₂ over a probe set living on a
/// finer basis.
pub fn convergence_report(
    model: &NonlinearityModel,
    ns: &[usize],
    probes: &[SpectralVector],
    fine: &Basis,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    let noise = NoiseSpec::zero(1);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let reg = build_fn(model, &noise, n, seed)?;
        let mut scratch = DriftScratch::new(reg.basis.m);
        let mut fa = vec![0.0; n];
        let mut sup = 0.0f64;
        for x in probes {
            // P_N F(x): exact drift at the unprojected state, first n modes.
            let full = eval_f(fine, x, model);
            let px = crate::spectral::project(x, n);
            let mut pa = px.a.clone();
            pa.resize(n, 0.0);
            reg.eval_into(&pa, &mut scratch, &mut fa);
            let mut d2 = 0.0;
            for k in 0..n {
                let d = full.a.get(k).copied().unwrap_or(0.0) - fa[k];
                d2 += d * d;
            }
            sup = sup.max(d2.sqrt());
        }
        rows.push(ConvergenceRow { n, sup });
    }
    Ok(rows)
}

/// (r, x) sample rectangle with grid resolution per axis.
#[derive(Debug, Clone, Copy)]
pub struct SampleBox {
    pub r: (f64, f64),
    pub x: (f64, f64),
    pub grid: usize,
}

impl SampleBox {
    pub fn symmetric(xmax: f64, grid: usize) -> Self {
        Self {
            r: (0.0, 1.0),
            x: (-xmax, xmax),
            grid,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub condition: String,
    pub holds: bool,
    pub fitted: Vec<(String, f64)>,
    pub counterexample: Option<(f64, f64)>,
    pub note: String,
}

/// Falsification-only audit of (Ψ), (Φ1), (Φ2), (Φ3) against the declared
/// constants: each report carries the tightest constants consistent with the
/// samples, or a concrete counterexample point.
pub fn audit_conditions(model: &NonlinearityModel, boxes: &[SampleBox]) -> Vec<ConditionReport> {
    let c = &model.constants;
    let tol = 1e-9;
    let mut out = Vec::new();

    // (Ψ): |ψ″| ≤ C + √|x|·ω(|x|) with ω vanishing; for our polynomial class
    // this forces deg ψ ≤ 2, in which case ψ″ is the constant to compare.
    {
        let ddpsi = model.psi.derivative().derivative();
        if ddpsi.degree() == 0 {
            let v = ddpsi.eval(0.0).abs();
            out.push(ConditionReport {
                condition: "(Psi)".into(),
                holds: v <= c.psi_c + tol,
                fitted: vec![("C".into(), v)],
                counterexample: if v <= c.psi_c + tol { None } else { Some((0.5, 0.0)) },
                note: "second derivative constant; envelope identically zero".into(),
            });
        } else {
            // ψ″ is a nonconstant polynomial: it outgrows C + √|x|·o(1).
            let xedge = boxes
                .iter()
                .map(|bx| bx.x.0.abs().max(bx.x.1.abs()))
                .fold(1.0, f64::max);
            out.push(ConditionReport {
                condition: "(Psi)".into(),
                holds: false,
                fitted: vec![("|psi''|(edge)".into(), ddpsi.eval(xedge).abs())],
                counterexample: Some((0.5, xedge)),
                note: "second derivative grows polynomially; no vanishing envelope exists".into(),
            });
        }
    }

    let phi = &model.phi;
    let fit_over_boxes = |f: &dyn Fn(f64) -> f64| -> (f64, f64) {
        let mut best = (0.0, f64::NEG_INFINITY);
        for bx in boxes {
            let (ax, mx) = refine_max(f, bx.x.0, bx.x.1, bx.grid);
            if mx > best.1 {
                best = (ax, mx);
            }
        }
        best
    };

    // (Φ1): |φ(x)| ≤ g·(1 + |x|^{q2}).
    {
        let q2 = c.q2;
        let (ax, fitted_g) = if phi.is_zero() {
            (0.0, 0.0)
        } else {
            fit_over_boxes(&|x: f64| phi.eval(x).abs() / (1.0 + x.abs().powf(q2)))
        };
        let holds = fitted_g <= c.g + tol;
        out.push(ConditionReport {
            condition: "(Phi1)".into(),
            holds,
            fitted: vec![("g".into(), fitted_g.max(0.0)), ("q2".into(), q2)],
            counterexample: if holds { None } else { Some((0.5, ax)) },
            note: "polynomial growth envelope at the declared exponent".into(),
        });
    }

    // (Φ2): φ(x)·sign x ≤ h0 + h1|x|.
    {
        let h1 = c.h1;
        let (ax, fitted_h0) = if phi.is_zero() {
            (0.0, 0.0)
        } else {
            fit_over_boxes(&|x: f64| phi.eval(x) * x.signum() - h1 * x.abs())
        };
        let fitted_h0 = fitted_h0.max(0.0);
        let deg = phi.degree();
        let structural = phi.is_zero() || deg <= 1 || (deg % 2 == 1 && phi.leading() < 0.0);
        let holds = fitted_h0 <= c.h0 + tol && structural;
        let note = if structural && deg >= 2 {
            "odd degree with negative leading coefficient: bound extends beyond the sample box"
        } else if structural {
            "at most linear growth"
        } else {
            "polynomial sign structure rules out a linear one-sided envelope"
        };
        out.push(ConditionReport {
            condition: "(Phi2)".into(),
            holds,
            fitted: vec![("h0".into(), fitted_h0), ("h1".into(), h1)],
            counterexample: if holds { None } else { Some((0.5, ax)) },
            note: note.into(),
        });
    }

    // (Φ3): one-sided slope bound; for differentiable φ the sharp constant is
    // sup φ′ (g1 envelope contributes at the declared exponent with unit ω).
    {
        let dphi = phi.derivative();
        let (ax, fitted_g0) = if phi.is_zero() {
            (0.0, 0.0)
        } else if c.g1 == 0.0 {
            fit_over_boxes(&|x: f64| dphi.eval(x))
        } else {
            let p1 = c.p1;
            let e = 2.0 - 1.0 / p1;
            fit_over_boxes(&|x: f64| {
                let sigma = x.abs() / (0.5f64 * 0.5).sqrt();
                dphi.eval(x) - c.g1 * sigma.powf(e)
            })
        };
        let fitted_g0 = fitted_g0.max(0.0);
        let structural = phi.is_zero() || {
            let dd = dphi.degree();
            dphi.c.len() <= 1 || (dd % 2 == 0 && dphi.leading() < 0.0)
        };
        let holds = fitted_g0 <= c.g0 + tol && structural;
        out.push(ConditionReport {
            condition: "(Phi3)".into(),
            holds,
            fitted: vec![("g0".into(), fitted_g0), ("g1".into(), c.g1)],
            counterexample: if holds { None } else { Some((0.5, ax)) },
            note: "one-sided slope envelope via the derivative".into(),
        });
    }

    out
}
