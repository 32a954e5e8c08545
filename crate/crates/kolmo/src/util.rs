//! Small numeric helpers: Gauss–Legendre rules, trapezoids, running stats.

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Nodes are returned in increasing order and are exactly
/// antisymmetric (computed for one half, mirrored).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-style initial guess for the i-th root from the top.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(z) and P'_n(z) via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = z;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Trapezoid weight for index `i` on a uniform grid of `len` points spaced `h`.
#[inline]
pub fn trapezoid_weight(i: usize, len: usize, h: f64) -> f64 {
    if len < 2 {
        return 0.0;
    }
    if i == 0 || i == len - 1 {
        0.5 * h
    } else {
        h
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Batch-means standard error for a correlated series: mean over all values,
/// SE from `nbatch` consecutive-batch means.
pub fn batch_means(values: &[f64], nbatch: usize) -> (f64, f64) {
    let n = values.len();
    assert!(nbatch >= 2 && n >= nbatch, "need at least {nbatch} values");
    let mean = values.iter().sum::<f64>() / n as f64;
    let bsize = n / nbatch;
    let mut bm = Vec::with_capacity(nbatch);
    for b in 0..nbatch {
        let lo = b * bsize;
        let hi = if b + 1 == nbatch { n } else { lo + bsize };
        bm.push(values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
    }
    let bvar = bm.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nbatch as f64 - 1.0);
    (mean, (bvar / nbatch as f64).sqrt())
}

/// Format a float with 17 significant digits (round-trip safe).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_frozen_five_point() {
        // Classical 5-point rule, values from the standard tables.
        let (x, w) = gauss_legendre(5);
        let xs = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        let ws = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        for i in 0..5 {
            assert_relative_eq!(x[i], xs[i], max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(w[i], ws[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn gl_exactness() {
        for &n in &[8usize, 32, 64] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert_relative_eq!(total, 2.0, max_relative = 1e-14);
            // ∫_{-1}^{1} x^2 = 2/3, exact for n ≥ 2.
            let m2: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
            assert_relative_eq!(m2, 2.0 / 3.0, max_relative = 1e-13);
            // Degree 2n-1 monomial integrates to 0 by symmetry, exactly.
            let modd: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(2 * n as i32 - 1))
                .sum();
            assert!(modd.abs() < 1e-15);
        }
    }

    #[test]
    fn batch_means_constant_series() {
        let v = vec![3.0; 200];
        let (m, se) = batch_means(&v, 20);
        assert_eq!(m, 3.0);
        assert_eq!(se, 0.0);
    }
}
