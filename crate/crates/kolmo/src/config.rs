//! Run configuration: a flat TOML file with [section] headers, parsed into a
//! validated `RunConfig` and resolved into the context the checks run with.

use crate::checks::{CheckContext, KNOWN_CHECKS};
use crate::drift::{self, NoiseSpec, NonlinearityModel};
use crate::semigroup::McConfig;
use crate::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub lyapunov: LyapunovSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Option<String>,
    pub psi: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
    #[serde(default = "default_n")]
    pub n: usize,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub a: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_kappa_frac")]
    pub kappa_frac: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_n() -> usize {
    16
}
fn default_p() -> f64 {
    2.0
}
fn default_kappa_frac() -> f64 {
    0.5
}
fn default_k() -> usize {
    20_000
}
fn default_dt() -> f64 {
    5e-4
}
fn default_t() -> f64 {
    0.5
}
fn default_seed() -> u64 {
    42
}
fn default_output() -> String {
    "out".into()
}
fn default_horizon() -> f64 {
    200.0
}

impl Default for LyapunovSection {
    fn default() -> Self {
        Self { p: default_p(), kappa_frac: default_kappa_frac() }
    }
}

impl Default for McSection {
    fn default() -> Self {
        Self { k: default_k(), dt: default_dt(), t: default_t(), checkpoints: Vec::new() }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            checks: Vec::new(),
            output: default_output(),
            horizon: default_horizon(),
        }
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    fn validate(&self) -> Result<()> {
        let m = &self.model;
        match (&m.preset, &m.psi, &m.phi) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            (None, None, None) => {
                return Err(Error::Config("model needs a preset or psi/phi coefficients".into()))
            }
            _ => {
                return Err(Error::Config(
                    "model takes either preset or both psi and phi, not a mixture".into(),
                ))
            }
        }
        if m.n == 0 {
            return Err(Error::Config("model.n must be ≥ 1".into()));
        }
        if let Some(mm) = m.m {
            if mm < 4 * m.n {
                return Err(Error::Config(format!(
                    "model.m = {mm} too small: the quadrature grid needs m ≥ 4n = {}",
                    4 * m.n
                )));
            }
        }
        let ns = &self.noise;
        match (ns.a, ns.gamma, &ns.alpha) {
            (Some(a), Some(g), None) => {
                if !(a > 0.0) || !(g > 1.0) {
                    return Err(Error::Config(
                        "noise law needs a > 0 and gamma > 1 for a trace-class covariance".into(),
                    ));
                }
            }
            (None, None, Some(list)) => {
                if list.len() != m.n {
                    return Err(Error::Config(format!(
                        "noise.alpha has {} entries but model.n = {}",
                        list.len(),
                        m.n
                    )));
                }
                if list.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::Config("noise.alpha entries must be ≥ 0".into()));
                }
            }
            _ => {
                return Err(Error::Config(
                    "noise takes either the law (a, gamma) or an explicit alpha list".into(),
                ))
            }
        }
        let ly = &self.lyapunov;
        if !(ly.kappa_frac > 0.0 && ly.kappa_frac < 1.0) {
            return Err(Error::Config("kappa must be < kappa0 (fraction in (0,1))".into()));
        }
        if ly.p < 2.0 {
            return Err(Error::Config("lyapunov.p must be ≥ 2".into()));
        }
        let mc = &self.mc;
        if !(mc.dt > 0.0) || mc.k == 0 || !(mc.t > 0.0) {
            return Err(Error::Config("mc needs dt > 0, k ≥ 1, t > 0".into()));
        }
        for &c in &mc.checkpoints {
            let steps = (c / mc.dt).round();
            if (c - steps * mc.dt).abs() > 1e-12 * (1.0 + c.abs()) {
                return Err(Error::Config(format!(
                    "checkpoint {c} is not a multiple of dt = {}",
                    mc.dt
                )));
            }
        }
        for name in &self.run.checks {
            if !KNOWN_CHECKS.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown check '{name}'; known: {}",
                    KNOWN_CHECKS.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<NonlinearityModel> {
        match (&self.model.preset, &self.model.psi, &self.model.phi) {
            (Some(name), _, _) => {
                if name == "ou" {
                    let mut m = NonlinearityModel::custom(vec![], vec![])?;
                    m.name = "ou".into();
                    Ok(m)
                } else {
                    NonlinearityModel::by_name(name)
                }
            }
            (None, Some(psi), Some(phi)) => NonlinearityModel::custom(psi.clone(), phi.clone()),
            _ => unreachable!("validated"),
        }
    }

    pub fn build_noise(&self) -> Result<NoiseSpec> {
        match (&self.noise.a, &self.noise.gamma, &self.noise.alpha) {
            (Some(a), Some(g), None) => NoiseSpec::power_law(self.model.n, *a, *g),
            (None, None, Some(list)) => NoiseSpec::from_alphas(list.clone()),
            _ => unreachable!("validated"),
        }
    }

    /// Selected checks in declaration order; empty selection means all.
    pub fn selected_checks(&self) -> Vec<String> {
        if self.run.checks.is_empty() {
            KNOWN_CHECKS.iter().map(|s| s.to_string()).collect()
        } else {
            let mut ordered: Vec<String> = KNOWN_CHECKS
                .iter()
                .filter(|k| self.run.checks.iter().any(|c| c == *k))
                .map(|s| s.to_string())
                .collect();
            // unknown names were rejected in validate; keep duplicates out
            ordered.dedup();
            ordered
        }
    }

    /// Resolve into the context checks execute against.
    pub fn context(&self, seed_override: Option<u64>) -> Result<CheckContext> {
        let model = self.build_model()?;
        let noise = self.build_noise()?;
        let seed = seed_override.unwrap_or(self.run.seed);
        let n = self.model.n;
        let m = self.model.m.unwrap_or(8 * n);
        let reg = drift::build_fn_with_grid(&model, &noise, n, m, seed)?;
        Ok(CheckContext {
            model,
            noise,
            reg,
            n,
            p: self.lyapunov.p,
            kappa_frac: self.lyapunov.kappa_frac,
            mc: McConfig { k: self.mc.k, dt: self.mc.dt, ckpt_every: 5, seed },
            horizon: self.run.horizon,
            noise_law: match (self.noise.a, self.noise.gamma) {
                (Some(a), Some(g)) => Some((a, g)),
                _ => None,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
preset = "ou"
n = 4

[noise]
a = 1.0
gamma = 2.0

[run]
checks = ["heat-decay"]
"#;

    #[test]
    fn minimal_roundtrip() {
        let cfg = RunConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.model.n, 4);
        assert_eq!(cfg.selected_checks(), vec!["heat-decay"]);
        let ctx = cfg.context(None).unwrap();
        assert_eq!(ctx.n, 4);
        assert_eq!(ctx.mc.seed, 42);
        assert_eq!(ctx.noise_law, Some((1.0, 2.0)));
        let ctx2 = cfg.context(Some(7)).unwrap();
        assert_eq!(ctx2.mc.seed, 7);
    }

    #[test]
    fn kappa_fraction_guard() {
        let bad = MINIMAL.to_string() + "\n[lyapunov]\nkappa_frac = 1.0\n";
        let err = RunConfig::from_str(&bad).unwrap_err();
        assert!(err.to_string().contains("kappa must be < kappa0"), "{err}");
    }

    #[test]
    fn rejects_malformed() {
        assert!(RunConfig::from_str("[model]\n").is_err());
        assert!(RunConfig::from_str(&MINIMAL.replace("\"ou\"", "\"nope\"")).is_ok());
        // unknown preset surfaces at model build, not parse
        let cfg = RunConfig::from_str(&MINIMAL.replace("\"ou\"", "\"nope\"")).unwrap();
        assert!(cfg.build_model().is_err());
        let bad = MINIMAL.replace("[run]", "[mc]\ncheckpoints = [0.00033]\n\n[run]");
        assert!(RunConfig::from_str(&bad).is_err());
        let unknown = MINIMAL.replace("heat-decay", "warp-drive");
        assert!(RunConfig::from_str(&unknown).is_err());
    }

    #[test]
    fn explicit_alpha_list() {
        let text = r#"
[model]
preset = "burgers"
n = 3

[noise]
alpha = [1.0, 0.25, 0.1111111111111111]
"#;
        let cfg = RunConfig::from_str(text).unwrap();
        let noise = cfg.build_noise().unwrap();
        assert_eq!(noise.n(), 3);
        let ctx = cfg.context(None).unwrap();
        assert!(ctx.noise_law.is_none());
        // defaults flow through
        assert_eq!(ctx.mc.k, 20_000);
        assert_eq!(cfg.run.horizon, 200.0);
    }

    #[test]
    fn grid_size_guard() {
        let bad = MINIMAL.replace("n = 4", "n = 4\nm = 8");
        assert!(RunConfig::from_str(&bad).is_err());
    }
}
