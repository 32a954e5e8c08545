//! Finitely based C² test functions u = g∘P_N — the class D — with exact
//! derivatives, the Kolmogorov operator applied pointwise, and the
//! carré-du-champ Γ(u) = (ADu, Du).

use std::sync::Arc;

use crate::drift::NoiseSpec;
use crate::spectral::{SpectralVector, PI};

/// Evaluators for a custom base map g on the first `base_n` coordinates.
pub struct CustomG {
    pub g: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// ∂g/∂x_k, k zero-based.
    pub grad: Box<dyn Fn(&[f64], usize) -> f64 + Send + Sync>,
    /// ∂²g/∂x_i∂x_j, zero-based.
    pub hess: Box<dyn Fn(&[f64], usize, usize) -> f64 + Send + Sync>,
}

#[derive(Clone)]
pub enum Kernel {
    Constant(f64),
    /// (η_k, ·), 1-based mode.
    Coordinate(usize),
    /// (η_k, ·)², 1-based mode.
    Square(usize),
    /// cos((η_k, ·)) + 1.
    TrigCos(usize),
    /// sin((η_k, ·)) + 1.
    TrigSin(usize),
    Custom(Arc<CustomG>),
}

/// u = g∘P_{baseN}: depends only on the first `base_n` sine coefficients.
#[derive(Clone)]
pub struct CylinderFunction {
    pub base_n: usize,
    pub kernel: Kernel,
}

impl CylinderFunction {
    pub fn constant(c: f64) -> Self {
        Self { base_n: 1, kernel: Kernel::Constant(c) }
    }

    pub fn coordinate(k: usize) -> Self {
        assert!(k >= 1);
        Self { base_n: k, kernel: Kernel::Coordinate(k) }
    }

    pub fn square(k: usize) -> Self {
        assert!(k >= 1);
        Self { base_n: k, kernel: Kernel::Square(k) }
    }

    pub fn custom(base_n: usize, g: CustomG) -> Self {
        Self { base_n, kernel: Kernel::Custom(Arc::new(g)) }
    }

    fn coord(&self, x: &SpectralVector, k: usize) -> f64 {
        x.a.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: &SpectralVector) -> f64 {
        match &self.kernel {
            Kernel::Constant(c) => *c,
            Kernel::Coordinate(k) => self.coord(x, *k),
            Kernel::Square(k) => self.coord(x, *k).powi(2),
            Kernel::TrigCos(k) => self.coord(x, *k).cos() + 1.0,
            Kernel::TrigSin(k) => self.coord(x, *k).sin() + 1.0,
            Kernel::Custom(c) => {
                let coords = self.coords(x);
                (c.g)(&coords)
            }
        }
    }

    fn coords(&self, x: &SpectralVector) -> Vec<f64> {
        (1..=self.base_n).map(|k| self.coord(x, k)).collect()
    }

    /// ∂_k u(x) = ∂g/∂x_k, 1-based; zero beyond base_n.
    pub fn partial(&self, x: &SpectralVector, k: usize) -> f64 {
        if k == 0 || k > self.base_n {
            return 0.0;
        }
        match &self.kernel {
            Kernel::Constant(_) => 0.0,
            Kernel::Coordinate(j) => {
                if k == *j {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Square(j) => {
                if k == *j {
                    2.0 * self.coord(x, *j)
                } else {
                    0.0
                }
            }
            Kernel::TrigCos(j) => {
                if k == *j {
                    -self.coord(x, *j).sin()
                } else {
                    0.0
                }
            }
            Kernel::TrigSin(j) => {
                if k == *j {
                    self.coord(x, *j).cos()
                } else {
                    0.0
                }
            }
            Kernel::Custom(c) => {
                let coords = self.coords(x);
                (c.grad)(&coords, k - 1)
            }
        }
    }

    /// Du(x) ∈ E_{baseN}.
    pub fn grad(&self, x: &SpectralVector) -> SpectralVector {
        SpectralVector::new((1..=self.base_n).map(|k| self.partial(x, k)).collect())
    }

    /// (η_i, D²u(x) η_j), 1-based.
    pub fn hess_pair(&self, x: &SpectralVector, i: usize, j: usize) -> f64 {
        if i == 0 || j == 0 || i > self.base_n || j > self.base_n {
            return 0.0;
        }
        match &self.kernel {
            Kernel::Constant(_) | Kernel::Coordinate(_) => 0.0,
            Kernel::Square(k) => {
                if i == *k && j == *k {
                    2.0
                } else {
                    0.0
                }
            }
            Kernel::TrigCos(k) => {
                if i == *k && j == *k {
                    -self.coord(x, *k).cos()
                } else {
                    0.0
                }
            }
            Kernel::TrigSin(k) => {
                if i == *k && j == *k {
                    -self.coord(x, *k).sin()
                } else {
                    0.0
                }
            }
            Kernel::Custom(c) => {
                let coords = self.coords(x);
                (c.hess)(&coords, i - 1, j - 1)
            }
        }
    }

    /// A uniform bound on |u| when one is known analytically.
    pub fn sup_bound(&self) -> Option<f64> {
        match &self.kernel {
            Kernel::Constant(c) => Some(c.abs()),
            Kernel::TrigCos(_) | Kernel::TrigSin(_) => Some(2.0),
            _ => None,
        }
    }
}

/// L u(x) = ½Σ_k α_k ∂²_{kk}u + Σ_k (−π²k²x_k + f_k) ∂_k u, with fx the
/// coefficients of the drift at x (true F or F_N, caller's choice).
pub fn apply_l(u: &CylinderFunction, x: &SpectralVector, fx: &[f64], noise: &NoiseSpec) -> f64 {
    let mut acc = 0.0;
    for k in 1..=u.base_n {
        let dk = u.partial(x, k);
        let ak = noise.alpha.get(k - 1).copied().unwrap_or(0.0);
        if ak != 0.0 {
            acc += 0.5 * ak * u.hess_pair(x, k, k);
        }
        if dk != 0.0 {
            let pk = PI * k as f64;
            let xk = x.a.get(k - 1).copied().unwrap_or(0.0);
            let fk = fx.get(k - 1).copied().unwrap_or(0.0);
            acc += (-pk * pk * xk + fk) * dk;
        }
    }
    acc
}

/// Γ(u)(x) = (ADu, Du) = Σ_k α_k (∂_k u)² ≥ 0.
pub fn gamma(u: &CylinderFunction, x: &SpectralVector, noise: &NoiseSpec) -> f64 {
    (1..=u.base_n)
        .map(|k| {
            let dk = u.partial(x, k);
            noise.alpha.get(k - 1).copied().unwrap_or(0.0) * dk * dk
        })
        .sum()
}

/// The separating family {cos((η_k,·)) + 1, sin((η_k,·)) + 1}.
pub fn trig_family(k: usize) -> (CylinderFunction, CylinderFunction) {
    assert!(k >= 1);
    (
        CylinderFunction { base_n: k, kernel: Kernel::TrigCos(k) },
        CylinderFunction { base_n: k, kernel: Kernel::TrigSin(k) },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{build_fn, eval_f, NonlinearityModel};
    use crate::rng;
    use crate::spectral::{project, Basis};
    use approx::assert_relative_eq;

    fn random_state(n: usize, seed: u64) -> SpectralVector {
        SpectralVector::new(
            (1..=n)
                .map(|k| rng::normal_at(seed, rng::purpose::PROBE, 77, k as u64) / k as f64)
                .collect(),
        )
    }

    #[test]
    fn basic_members() {
        let u = CylinderFunction::coordinate(1);
        let x = random_state(6, 0);
        assert_eq!(u.eval(&x), x.a[0]);
        let g = u.grad(&x);
        assert_eq!(g.a, vec![1.0]);
        assert_eq!(u.hess_pair(&x, 1, 1), 0.0);

        let (c, s) = trig_family(1);
        let zero = SpectralVector::zero(4);
        assert_eq!(c.eval(&zero), 2.0);
        assert_eq!(s.eval(&zero), 1.0);
        assert!(c.grad(&zero).a.iter().all(|v| *v == 0.0));
        assert_eq!(c.hess_pair(&zero, 1, 1), -1.0);
        // bounded in [0, 2] and separating η₁ from 2η₁
        for t in 0..100 {
            let x = SpectralVector::mode(4, 1, -6.0 + 0.12 * t as f64);
            for u in [&c, &s] {
                let v = u.eval(&x);
                assert!((0.0..=2.0).contains(&v));
            }
        }
        let e1 = SpectralVector::mode(4, 1, 1.0);
        let e2 = SpectralVector::mode(4, 1, 2.0);
        assert!((c.eval(&e1) - c.eval(&e2)).abs() > 1e-3);
        assert!((s.eval(&e1) - s.eval(&e2)).abs() > 1e-3);
    }

    #[test]
    fn depends_only_on_projection() {
        let (c, _) = trig_family(2);
        for s in 0..50u64 {
            let x = random_state(12, s);
            let px = project(&x, 2);
            assert_eq!(c.eval(&x), c.eval(&px));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let members: Vec<CylinderFunction> = vec![
            trig_family(1).0,
            trig_family(2).1,
            trig_family(3).0,
            CylinderFunction::square(2),
            CylinderFunction::custom(
                2,
                CustomG {
                    g: Box::new(|c| (c[0] * c[1]).cos()),
                    grad: Box::new(|c, k| -(c[0] * c[1]).sin() * c[1 - k]),
                    hess: Box::new(|c, i, j| {
                        let p = c[0] * c[1];
                        if i == j {
                            -p.cos() * c[1 - i] * c[1 - i]
                        } else {
                            -p.cos() * c[0] * c[1] - p.sin()
                        }
                    }),
                },
            ),
        ];
        for (mi, u) in members.iter().enumerate() {
            for s in 0..20u64 {
                let x = random_state(6, s + 100 * mi as u64);
                let g = u.grad(&x);
                for k in 1..=u.base_n {
                    let h = 1e-6;
                    let e = SpectralVector::mode(6, k, 1.0);
                    let fd = (u.eval(&x.axpy(h, &e)) - u.eval(&x.axpy(-h, &e))) / (2.0 * h);
                    assert_relative_eq!(g.a[k - 1], fd, max_relative = 1e-6, epsilon = 1e-9);
                }
                // Hessian diagonal against second differences
                for k in 1..=u.base_n {
                    let h = 1e-4;
                    let e = SpectralVector::mode(6, k, 1.0);
                    let fd = (u.eval(&x.axpy(h, &e)) - 2.0 * u.eval(&x)
                        + u.eval(&x.axpy(-h, &e)))
                        / (h * h);
                    assert_relative_eq!(u.hess_pair(&x, k, k), fd, max_relative = 1e-5, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn operator_examples() {
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let x = random_state(8, 3);
        let fz = vec![0.0; 8];
        assert_eq!(apply_l(&CylinderFunction::constant(5.0), &x, &fz, &noise), 0.0);
        // u = (η₁,·), F≡0: Lu = −π²x₁.
        let u1 = CylinderFunction::coordinate(1);
        assert_relative_eq!(
            apply_l(&u1, &x, &fz, &noise),
            -PI * PI * x.a[0],
            max_relative = 1e-14
        );
        // GL preset at x=0: only the trace term, −α₁/2.
        let model = NonlinearityModel::ginzburg_landau();
        let reg = build_fn(&model, &noise, 8, 1).unwrap();
        let zero = SpectralVector::zero(8);
        let f0 = reg.eval(&zero);
        let (c, _) = trig_family(1);
        assert_relative_eq!(
            apply_l(&c, &zero, &f0.a, &noise),
            -0.5 * noise.alpha[0],
            epsilon = 1e-12
        );
    }

    #[test]
    fn gamma_examples() {
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let u1 = CylinderFunction::coordinate(1);
        for s in 0..50u64 {
            let x = random_state(8, s);
            assert_eq!(gamma(&CylinderFunction::constant(2.0), &x, &noise), 0.0);
            assert_relative_eq!(gamma(&u1, &x, &noise), 1.0);
            let (c, _) = trig_family(2);
            assert!(gamma(&c, &x, &noise) >= 0.0);
        }
    }

    #[test]
    fn drift_refinement_trend() {
        // apply_L with F_N approaches apply_L with the raw F as N grows.
        let model = NonlinearityModel::ginzburg_landau();
        let fine = Basis::with_default_grid(64).unwrap();
        let (u, _) = trig_family(2);
        let mut errs = Vec::new();
        for n in [8usize, 16, 32] {
            let noise = NoiseSpec::power_law(n, 1.0, 2.0).unwrap();
            let reg = build_fn(&model, &noise, n, 1).unwrap();
            let mut worst: f64 = 0.0;
            for s in 0..40u64 {
                let x = random_state(4, s);
                let xn = project(&x, n);
                let f_reg = reg.eval(&xn);
                let f_true = eval_f(&fine, &project(&x, 64), &model);
                let a = apply_l(&u, &xn, &f_reg.a, &noise);
                let b = apply_l(&u, &xn, &f_true.a, &noise);
                worst = worst.max((a - b).abs());
            }
            errs.push(worst);
        }
        assert!(
            errs[1] <= errs[0] * 1.05 + 1e-12 && errs[2] <= errs[1] * 1.05 + 1e-12,
            "{errs:?}"
        );
    }

    #[test]
    fn weighted_membership_bounds() {
        use crate::lyapunov::{weighted_norm, LyapunovParams};
        let b = Basis::with_default_grid(8).unwrap();
        let noise = NoiseSpec::power_law(8, 1.0, 2.0).unwrap();
        let lp = LyapunovParams::new(2.0, 0.8).unwrap();
        let probes: Vec<SpectralVector> =
            (0..200u64).map(|s| random_state(8, s)).collect();
        for k in 1..=3usize {
            let (c, s) = trig_family(k);
            for u in [c, s] {
                let evalf = |x: &SpectralVector| u.eval(x);
                assert!(weighted_norm(&evalf, &probes, &b, &lp) <= 2.0);
                let gradf = |x: &SpectralVector| u.grad(x).l2();
                assert!(weighted_norm(&gradf, &probes, &b, &lp) <= 2.0 * PI * k as f64);
                let tracef =
                    |x: &SpectralVector| noise.alpha[k - 1] * u.hess_pair(x, k, k);
                assert!(weighted_norm(&tracef, &probes, &b, &lp) <= noise.trace());
            }
        }
    }
}
