//! Counter-based random numbers.
//!
//! Every draw is a pure function of a handful of 64-bit key words pushed
//! through the splitmix64 finalizer. No stream state: parallel schedules,
//! replays, and common-random-number couplings all get identical numbers
//! from identical keys.

/// Purpose tags keep independent uses of the same seed out of each other's
/// streams.
pub mod purpose {
    pub const NOISE: u64 = 0x4e4f495345;
    pub const PROBE: u64 = 0x50524f4245;
    pub const PAIRS: u64 = 0x5041495253;
    pub const BETA_PROBE: u64 = 0x42455441;
    pub const INVARIANCE: u64 = 0x494e5641;
    pub const ORACLE: u64 = 0x4f52434c;
}

/// splitmix64 finalizer: bijective, full avalanche.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key chain: fold words left to right through the finalizer.
#[inline(always)]
pub fn chain(words: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15;
    for &w in words {
        h = mix64(h ^ w);
    }
    h
}

/// Uniform in the open interval (0,1): 52 mantissa bits, offset by half a
/// step so 0 and 1 are unreachable (safe under log). 52 bits rather than 53:
/// with 53 the top value (2⁵³−½)·2⁻⁵³ rounds to 1.0 exactly.
#[inline(always)]
pub fn unit_open(x: u64) -> f64 {
    ((x >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
}

/// One standard normal pair via Box–Muller from two key words.
#[inline(always)]
pub fn normal_pair(h1: u64, h2: u64) -> (f64, f64) {
    let u1 = unit_open(h1);
    let u2 = unit_open(h2);
    let r = (-2.0 * u1.ln()).sqrt();
    let th = std::f64::consts::TAU * u2;
    (r * th.cos(), r * th.sin())
}

/// Base hash for one (seed, purpose, path, step) cell; per-mode draws are
/// derived from it with two extra mixes per lane.
#[inline(always)]
pub fn cell(seed: u64, purpose: u64, path: u64, step: u64) -> u64 {
    chain(&[seed, purpose, path, step])
}

/// Fill `out` with standard normals for one cell, pairing modes (0,1), (2,3), …
pub fn fill_normals(base: u64, out: &mut [f64]) {
    let n = out.len();
    let mut i = 0;
    while i + 1 < n {
        let h1 = mix64(mix64(base ^ (i as u64)));
        let h2 = mix64(mix64(base ^ (i as u64 + 1)));
        let (a, b) = normal_pair(h1, h2);
        out[i] = a;
        out[i + 1] = b;
        i += 2;
    }
    if i < n {
        let h1 = mix64(mix64(base ^ (i as u64)));
        let h2 = mix64(mix64(base ^ (i as u64).wrapping_add(0x5bf0_3635)));
        out[i] = normal_pair(h1, h2).0;
    }
}

/// Standalone scalar normal for probe generation: key = (seed, purpose, item, lane).
#[inline]
pub fn normal_at(seed: u64, purpose: u64, item: u64, lane: u64) -> f64 {
    let h1 = chain(&[seed, purpose, item, lane, 0]);
    let h2 = chain(&[seed, purpose, item, lane, 1]);
    normal_pair(h1, h2).0
}

/// Standalone uniform in (0,1).
#[inline]
pub fn uniform_at(seed: u64, purpose: u64, item: u64, lane: u64) -> f64 {
    unit_open(chain(&[seed, purpose, item, lane]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_distinct() {
        let a = cell(1, purpose::NOISE, 2, 3);
        let b = cell(1, purpose::NOISE, 2, 3);
        assert_eq!(a, b);
        assert_ne!(a, cell(1, purpose::NOISE, 2, 4));
        assert_ne!(a, cell(1, purpose::PROBE, 2, 3));
        assert_ne!(a, cell(2, purpose::NOISE, 2, 3));
    }

    #[test]
    fn unit_open_stays_inside() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
    }

    #[test]
    fn normals_have_sane_moments() {
        let n = 200_000usize;
        let mut buf = vec![0.0; 16];
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for p in 0..(n / 16) {
            fill_normals(cell(42, purpose::NOISE, p as u64, 0), &mut buf);
            for &v in &buf {
                s1 += v;
                s2 += v * v;
                s4 += v * v * v * v;
            }
        }
        let m1 = s1 / n as f64;
        let m2 = s2 / n as f64;
        let m4 = s4 / n as f64;
        assert!(m1.abs() < 0.01, "mean {m1}");
        assert!((m2 - 1.0).abs() < 0.02, "var {m2}");
        assert!((m4 - 3.0).abs() < 0.1, "kurtosis {m4}");
    }

    #[test]
    fn pairs_are_uncorrelated() {
        let n = 100_000usize;
        let mut buf = vec![0.0; 2];
        let mut s12 = 0.0;
        for p in 0..n {
            fill_normals(cell(7, purpose::NOISE, p as u64, 1), &mut buf);
            s12 += buf[0] * buf[1];
        }
        assert!((s12 / n as f64).abs() < 0.02);
    }
}
