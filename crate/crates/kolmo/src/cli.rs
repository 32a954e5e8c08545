//! Command-line surface: `run` executes the configured checks into
//! report.json plus per-check CSV, `describe` prints the derived constants
//! table, `simulate` dumps one path, `oracle1d` gives direct access to the
//! 1-D solver. Exit codes: 0 all checks pass, 1 some check failed, 2
//! configuration or runtime error.

use crate::checks::{self, CheckRecord};
use crate::config::RunConfig;
use crate::drift::{self, NoiseSpec, NonlinearityModel};
use crate::lyapunov;
use crate::oracle1d;
use crate::sde::{self, Drift, IntegratorConfig};
use crate::util::fmt17;
use crate::{Error, Result};
use clap::{Parser, Subcommand};
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "kolmo", version, about = "Spectral-Galerkin SPDE verification lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Execute the checks selected in a config file
    Run { config: PathBuf },
    /// Print the derived constants table for a preset
    Describe {
        preset: String,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 4.0)]
        q: f64,
    },
    /// Integrate one path under the configured dynamics and dump checkpoints
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the 1-D resolvent directly and dump the solution profile
    Oracle1d {
        #[arg(long, default_value_t = 1.0)]
        alpha1: f64,
        #[arg(long, default_value_t = 5.0)]
        lambda: f64,
        /// optional drift preset (burgers, ginzburg-landau, mixed) at N = 1
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse args and dispatch; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match cli.command {
        Command::Run { config } => match cmd_run(&config) {
            Ok(true) => 0,
            Ok(false) => 1,
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Describe { preset, n, q } => match cmd_describe(&preset, n, q) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Simulate { config, out } => match cmd_simulate(&config, out.as_deref()) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Oracle1d { alpha1, lambda, preset, out } => {
            match cmd_oracle1d(alpha1, lambda, preset.as_deref(), out.as_deref()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
    }
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var("KOLMO_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("KOLMO_SEED must be a u64, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

pub fn cmd_run(config_path: &Path) -> Result<bool> {
    let cfg = RunConfig::load(config_path)?;
    let over = seed_override()?;
    let ctx = cfg.context(over)?;
    let outdir = PathBuf::from(&cfg.run.output);
    std::fs::create_dir_all(&outdir)?;

    let mut records: Vec<CheckRecord> = Vec::new();
    records.push(CheckRecord {
        check: "config".into(),
        params: format!(
            "seed={} seed_source={} model={} n={} p={} kappa_frac={}",
            ctx.mc.seed,
            if over.is_some() { "KOLMO_SEED" } else { "file" },
            ctx.model.name,
            ctx.n,
            ctx.p,
            ctx.kappa_frac
        ),
        value: 0.0,
        se: 0.0,
        tolerance: 0.0,
        pass: true,
    });
    for name in cfg.selected_checks() {
        let recs = checks::run_check(&name, &ctx)?;
        for r in &recs {
            println!(
                "[{}] {} {} value={} se={} tol={}",
                if r.pass { "PASS" } else { "FAIL" },
                r.check,
                r.params,
                r.value,
                r.se,
                r.tolerance
            );
        }
        records.extend(recs);
    }

    let json = serde_json::to_string_pretty(&records)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    std::fs::write(outdir.join("report.json"), json + "\n")?;

    let mut seen: Vec<&str> = Vec::new();
    for r in &records {
        if !seen.contains(&r.check.as_str()) {
            seen.push(&r.check);
        }
    }
    for name in seen {
        let mut csv = String::from("check,params,value,se,tolerance,pass\n");
        for r in records.iter().filter(|r| r.check == name) {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.check,
                r.params.replace(',', ";"),
                fmt17(r.value),
                fmt17(r.se),
                fmt17(r.tolerance),
                r.pass
            ));
        }
        std::fs::write(outdir.join(format!("{name}.csv")), csv)?;
    }
    Ok(records.iter().all(|r| r.pass))
}

pub fn cmd_describe(preset: &str, n: usize, q: f64) -> Result<()> {
    let model = NonlinearityModel::by_name(preset)?;
    let noise = NoiseSpec::power_law(n, 1.0, 2.0)?;
    let out = describe_text(&model, &noise, q)?;
    print!("{out}");
    Ok(())
}

/// The describe table as a string (also used by tests).
pub fn describe_text(model: &NonlinearityModel, noise: &NoiseSpec, q: f64) -> Result<String> {
    let sc = lyapunov::standard_constants(model, noise, q)?;
    let mut s = String::new();
    s.push_str(&format!("model          = {}\n", model.name));
    s.push_str(&format!("n              = {}\n", noise.n()));
    s.push_str(&format!("a0             = {}\n", fmt17(sc.a0)));
    s.push_str(&format!("trace_A        = {}\n", fmt17(sc.trace)));
    s.push_str(&format!("trace_A_N      = {}\n", fmt17(sc.trace_finite)));
    s.push_str(&format!("kappa0         = {}\n", fmt17(sc.kappa0)));
    s.push_str(&format!("kappa          = {}\n", fmt17(sc.kappa)));
    s.push_str(&format!("lambda_kappa   = {}\n", fmt17(sc.lambda_kappa)));
    s.push_str(&format!("lambda         = {}\n", fmt17(sc.lambda)));
    s.push_str(&format!("m_kappa_lambda = {}\n", fmt17(sc.m_kappa_lambda)));
    s.push_str(&format!("q              = {}\n", sc.q));
    s.push_str(&format!("lambda_q_kappa = {}\n", fmt17(sc.lambda_q_kappa)));
    s.push_str(&format!("m_q_kappa      = {}\n", fmt17(sc.m_q_kappa)));
    Ok(s)
}

pub fn cmd_simulate(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let ctx = cfg.context(seed_override()?)?;
    let icfg = if cfg.mc.checkpoints.is_empty() {
        IntegratorConfig::uniform(ctx.mc.dt, cfg.mc.t, ctx.mc.ckpt_every)?
    } else {
        IntegratorConfig::new(ctx.mc.dt, cfg.mc.checkpoints.clone())?
    };
    let x0 = crate::spectral::SpectralVector::zero(ctx.n);
    let drift = Drift::Reg(&ctx.reg);
    let dump = sde::simulate(&x0, cfg.mc.t, &icfg, &ctx.noise, &drift, ctx.n, ctx.mc.seed)?;
    let rows = dump.times.len() * ctx.n;
    if rows > 10_000_000 {
        return Err(Error::Config(format!(
            "path dump would have {rows} rows; thin the checkpoints"
        )));
    }
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.run.output).join("path.csv"));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(&path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "t,path,k,a_k")?;
    for (i, t) in dump.times.iter().enumerate() {
        for k in 1..=ctx.n {
            writeln!(w, "{},0,{k},{}", fmt17(*t), fmt17(dump.states[i].a[k - 1]))?;
        }
    }
    w.flush()?;
    println!("wrote {} checkpoints to {}", dump.times.len(), path.display());
    Ok(())
}

pub fn cmd_oracle1d(
    alpha1: f64,
    lambda: f64,
    preset: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    let reg1 = match preset {
        Some(name) => {
            let model = NonlinearityModel::by_name(name)?;
            let noise1 = NoiseSpec::from_alphas(vec![alpha1])?;
            Some(drift::build_fn(&model, &noise1, 1, 42)?)
        }
        None => None,
    };
    let f1 = |a: f64| reg1.as_ref().map(|r| r.f1_scalar(a)).unwrap_or(0.0);
    let mesh = oracle1d::Mesh1D::standard(alpha1, &f1)?;
    let op = oracle1d::build(mesh, lambda)?;
    let n = op.mesh.n;
    let u1 = op.solve(&vec![1.0; n]);
    let markov = u1.iter().map(|v| (lambda * v - 1.0).abs()).fold(0.0, f64::max);
    let mu = 2.0 * lambda;
    let opm = oracle1d::build(op.mesh.clone(), mu)?;
    let fc: Vec<f64> = op.mesh.nodes.iter().map(|x| x.cos() + 1.0).collect();
    let ul = op.solve(&fc);
    let um = opm.solve(&fc);
    let ulm = op.solve(&um);
    let ident = (0..n)
        .map(|i| (ul[i] - um[i] - (mu - lambda) * ulm[i]).abs())
        .fold(0.0, f64::max);
    println!("mesh: R={} n={} h={}", op.mesh.r, n, op.mesh.h);
    println!("markov residual  max|lambda*u-1|      = {}", fmt17(markov));
    println!("resolvent identity residual (mu={mu}) = {}", fmt17(ident));
    if let Some(path) = out {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "x,u_const,u_cos")?;
        for i in 0..n {
            writeln!(
                w,
                "{},{},{}",
                fmt17(op.mesh.nodes[i]),
                fmt17(u1[i]),
                fmt17(ul[i])
            )?;
        }
        w.flush()?;
        println!("wrote profile to {}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_prints_known_values() {
        let model = NonlinearityModel::burgers();
        let noise = NoiseSpec::power_law(16, 1.0, 2.0).unwrap();
        let text = describe_text(&model, &noise, 4.0).unwrap();
        assert!(text.contains("kappa0"));
        let k0: f64 = std::f64::consts::PI * std::f64::consts::PI / 4.0;
        assert!(text.contains(&fmt17(k0)), "{text}");
        assert!(text.contains(&fmt17(1.0 / (std::f64::consts::PI * std::f64::consts::PI))));
    }

    #[test]
    fn run_minimal_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.toml");
        let out = dir.path().join("out");
        std::fs::write(
            &cfg_path,
            format!(
                r#"
[model]
preset = "ou"
n = 4

[noise]
a = 1.0
gamma = 2.0

[run]
checks = ["heat-decay"]
output = "{}"
"#,
                out.display()
            ),
        )
        .unwrap();
        assert!(cmd_run(&cfg_path).unwrap());
        let report = std::fs::read_to_string(out.join("report.json")).unwrap();
        assert!(report.contains("heat-decay"));
        assert!(report.contains("\"pass\": true"));
        let csv = std::fs::read_to_string(out.join("heat-decay.csv")).unwrap();
        assert!(csv.starts_with("check,params,value,se,tolerance,pass\n"));
    }

    #[test]
    fn exit_code_on_bad_kappa() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("bad.toml");
        std::fs::write(
            &cfg_path,
            r#"
[model]
preset = "burgers"

[noise]
a = 1.0
gamma = 2.0

[lyapunov]
kappa_frac = 1.5
"#,
        )
        .unwrap();
        let code = main_with_args(["kolmo", "run", cfg_path.to_str().unwrap()]);
        assert_eq!(code, 2);
    }

    #[test]
    fn simulate_writes_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.toml");
        std::fs::write(
            &cfg_path,
            r#"
[model]
preset = "ginzburg-landau"
n = 4

[noise]
a = 1.0
gamma = 2.0

[mc]
t = 0.01
dt = 0.001
"#,
        )
        .unwrap();
        let out = dir.path().join("p.csv");
        cmd_simulate(&cfg_path, Some(&out)).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("t,path,k,a_k\n"));
        assert!(text.lines().count() > 4);
    }

    #[test]
    fn oracle_subcommand_runs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("u.csv");
        cmd_oracle1d(1.0, 5.0, Some("ginzburg-landau"), Some(&out)).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("x,u_const,u_cos\n"));
    }
}
