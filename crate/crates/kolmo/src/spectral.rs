//! Sine eigenbasis of the Dirichlet Laplacian on (0,1).
//!
//! η_k(r) = √2 sin(πkr) with Δη_k = −π²k²η_k. States live in E_N (the span of
//! the first N modes) as coefficient vectors; nonlinear operations go through
//! a uniform collocation grid of M interior nodes r_j = j/(M+1) with weight
//! w = 1/(M+1), on which the first M sine modes are exactly orthonormal.

use crate::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
pub const PI: f64 = std::f64::consts::PI;

/// η_k(r) = √2 sin(πkr).
#[inline]
pub fn basis_eval(k: usize, r: f64) -> f64 {
    SQRT_2 * (PI * k as f64 * r).sin()
}

/// Eigenvalue of Δ on mode k: −π²k².
#[inline]
pub fn eigenvalue(k: usize) -> f64 {
    let pk = PI * k as f64;
    -pk * pk
}

/// Coefficient vector in E_N.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    pub a: Vec<f64>,
}

impl SpectralVector {
    pub fn new(a: Vec<f64>) -> Self {
        Self { a }
    }

    pub fn zero(n: usize) -> Self {
        Self { a: vec![0.0; n] }
    }

    /// e_k scaled: c·η_k as a coefficient vector of length n (k is 1-based).
    pub fn mode(n: usize, k: usize, c: f64) -> Self {
        let mut a = vec![0.0; n];
        a[k - 1] = c;
        Self { a }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// |x|₂ from coefficients (Parseval).
    pub fn l2(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// |x′|₂ = (Σ (πk)² a_k²)^{1/2}.
    pub fn h1_seminorm(&self) -> f64 {
        self.a
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let pk = PI * (i + 1) as f64;
                pk * pk * v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &SpectralVector) -> f64 {
        self.a
            .iter()
            .zip(&other.a)
            .map(|(x, y)| x * y)
            .sum::<f64>()
    }

    pub fn axpy(&self, c: f64, other: &SpectralVector) -> SpectralVector {
        let n = self.a.len().max(other.a.len());
        let mut a = vec![0.0; n];
        for (i, v) in self.a.iter().enumerate() {
            a[i] += v;
        }
        for (i, v) in other.a.iter().enumerate() {
            a[i] += c * v;
        }
        SpectralVector { a }
    }

    pub fn scale(&self, c: f64) -> SpectralVector {
        SpectralVector {
            a: self.a.iter().map(|v| c * v).collect(),
        }
    }
}

/// Values at the interior grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub v: Vec<f64>,
}

impl GridFunction {
    pub fn new(v: Vec<f64>) -> Self {
        Self { v }
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Basis with precomputed synthesis/analysis and derivative tables.
#[derive(Debug, Clone)]
pub struct Basis {
    pub n: usize,
    pub m: usize,
    pub nodes: Vec<f64>,
    pub w: f64,
    /// eta[k-1][j] = η_k(r_j), row-major n×m.
    eta: Vec<f64>,
    /// deta[k-1][j] = √2 πk cos(πk r_j).
    deta: Vec<f64>,
}

impl Basis {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m < 4 * n {
            return Err(Error::Dimension(format!(
                "basis needs n ≥ 1 and m ≥ 4n, got n={n}, m={m}"
            )));
        }
        let w = 1.0 / (m as f64 + 1.0);
        let nodes: Vec<f64> = (1..=m).map(|j| j as f64 * w).collect();
        let mut eta = vec![0.0; n * m];
        let mut deta = vec![0.0; n * m];
        for k in 1..=n {
            let pk = PI * k as f64;
            for (j, &r) in nodes.iter().enumerate() {
                eta[(k - 1) * m + j] = SQRT_2 * (pk * r).sin();
                deta[(k - 1) * m + j] = SQRT_2 * pk * (pk * r).cos();
            }
        }
        Ok(Self {
            n,
            m,
            nodes,
            w,
            eta,
            deta,
        })
    }

    /// Default grid M = 8N: over-resolves degree-≤5 nonlinearities.
    pub fn with_default_grid(n: usize) -> Result<Self> {
        Self::new(n, 8 * n)
    }

    #[inline]
    pub fn eta_row(&self, k: usize) -> &[f64] {
        &self.eta[(k - 1) * self.m..k * self.m]
    }

    #[inline]
    pub fn deta_row(&self, k: usize) -> &[f64] {
        &self.deta[(k - 1) * self.m..k * self.m]
    }

    /// v_j = Σ_k a_k η_k(r_j).
    pub fn synthesize(&self, x: &SpectralVector) -> GridFunction {
        let mut v = vec![0.0; self.m];
        self.synthesize_into(&x.a, &mut v);
        GridFunction { v }
    }

    pub fn synthesize_into(&self, a: &[f64], out: &mut [f64]) {
        debug_assert!(a.len() <= self.n && out.len() == self.m);
        out.fill(0.0);
        for (k, &ak) in a.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            let row = &self.eta[k * self.m..(k + 1) * self.m];
            for (o, e) in out.iter_mut().zip(row) {
                *o += ak * e;
            }
        }
    }

    /// Values of x′ at the nodes: Σ_k a_k √2 πk cos(πk r_j).
    pub fn derivative_grid(&self, x: &SpectralVector) -> GridFunction {
        let mut v = vec![0.0; self.m];
        self.derivative_into(&x.a, &mut v);
        GridFunction { v }
    }

    pub fn derivative_into(&self, a: &[f64], out: &mut [f64]) {
        debug_assert!(a.len() <= self.n && out.len() == self.m);
        out.fill(0.0);
        for (k, &ak) in a.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            let row = &self.deta[k * self.m..(k + 1) * self.m];
            for (o, e) in out.iter_mut().zip(row) {
                *o += ak * e;
            }
        }
    }

    /// a_k = w Σ_j v_j η_k(r_j): discrete L² projection onto E_{n_target}.
    pub fn analyze(&self, g: &GridFunction, n_target: usize) -> Result<SpectralVector> {
        if n_target > self.m {
            return Err(Error::Dimension(format!(
                "analyze target {n_target} exceeds grid size {}",
                self.m
            )));
        }
        let mut a = vec![0.0; n_target];
        self.analyze_into(&g.v, &mut a);
        Ok(SpectralVector { a })
    }

    pub fn analyze_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert!(v.len() == self.m && out.len() <= self.m);
        for (k, o) in out.iter_mut().enumerate() {
            let s = if k < self.n {
                let row = &self.eta[k * self.m..(k + 1) * self.m];
                v.iter().zip(row).map(|(x, e)| x * e).sum::<f64>()
            } else {
                // Beyond the table: compute the row on the fly (cold path).
                let pk = PI * (k + 1) as f64;
                self.nodes
                    .iter()
                    .zip(v)
                    .map(|(&r, x)| x * SQRT_2 * (pk * r).sin())
                    .sum::<f64>()
            };
            *o = self.w * s;
        }
    }

    /// |x|_p. p = 2 from coefficients; p = ∞ as grid max; other finite p ≥ 1
    /// by the quadrature grid (this is the module's definition of |·|_p).
    pub fn norm_p(&self, x: &SpectralVector, p: f64) -> Result<f64> {
        if p < 1.0 {
            return Err(Error::Parameter(format!("norm_p needs p ≥ 1, got {p}")));
        }
        if p == 2.0 {
            return Ok(x.l2());
        }
        let g = self.synthesize(x);
        if p.is_infinite() {
            return Ok(g.max_abs());
        }
        Ok((self.w * g.v.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p))
    }

    /// ∫₀¹ |x(r)|^p dr by the grid (p finite).
    pub fn lp_pow_grid(&self, grid: &[f64], p: f64) -> f64 {
        if p == 2.0 {
            self.w * grid.iter().map(|v| v * v).sum::<f64>()
        } else {
            self.w * grid.iter().map(|v| v.abs().powf(p)).sum::<f64>()
        }
    }
}

/// P_{n'} truncation (α₂ = 1: never increases |·|₂).
pub fn project(x: &SpectralVector, n_prime: usize) -> SpectralVector {
    let keep = x.a.len().min(n_prime);
    SpectralVector {
        a: x.a[..keep].to_vec(),
    }
}

/// a_k ↦ (πk)^{−l} a_k ((−Δ)^{−l/2}; negative l gives (−Δ)^{|l|/2}).
pub fn frac_laplacian_scale(x: &SpectralVector, l: i32) -> SpectralVector {
    SpectralVector {
        a: x.a
            .iter()
            .enumerate()
            .map(|(i, v)| v * (PI * (i + 1) as f64).powi(-l))
            .collect(),
    }
}

/// Δx: a_k ↦ −π²k² a_k.
pub fn laplacian(x: &SpectralVector) -> SpectralVector {
    SpectralVector {
        a: x.a
            .iter()
            .enumerate()
            .map(|(i, v)| v * eigenvalue(i + 1))
            .collect(),
    }
}
