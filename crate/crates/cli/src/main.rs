use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use thinlab::cgs::{EquationForm, GridSpec};
use thinlab::config::{CgsFamily, Command, OutputFormat, RunConfig, ThinMode};
use thinlab::plot::{write_plot_csv, PlotData};
use thinlab::psf::CoefficientSequence;
use thinlab::run::{run_cgs, run_invariance, run_thin};
use thinlab::suite::run_suite;

const SEED_ENV: &str = "THINLAB_SEED";

/// Binomial thinning of power series families and CGS functional equations.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on usage
/// or configuration errors.
#[derive(Parser, Debug)]
#[command(name = "thinlab", version)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Command to run; defaults to the one named in the configuration.
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Thin one distribution, exactly or by Monte Carlo.
    Thin(ThinArgs),
    /// Check invariance of a family over θ × p.
    Invariance(InvarianceArgs),
    /// Residual check of a CGS solution family.
    Cgs(CgsArgs),
    /// Run the full verification battery.
    Suite(SuiteArgs),
}

#[derive(Args, Debug, Default)]
struct OutputArgs {
    #[arg(long, value_enum)]
    out: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct SeedArg {
    /// RNG seed. Falls back to $THINLAB_SEED, which is then recorded in the
    /// report header.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ThinArgs {
    /// `poisson`, `binomial:<n>`, `negbin:<r>` or a JSON family spec.
    #[arg(long)]
    family: Option<CoefficientSequence>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trunc_tol: Option<f64>,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct InvarianceArgs {
    #[arg(long)]
    family: Option<CoefficientSequence>,
    /// Comma-separated θ values.
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,
    /// Comma-separated thinning probabilities.
    #[arg(long, value_delimiter = ',')]
    ps: Option<Vec<f64>>,
    #[arg(long)]
    tv_tol: Option<f64>,
    #[arg(long)]
    identity_tol: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct CgsArgs {
    #[arg(long, value_enum)]
    equation: Option<Equation>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// JSON object with `a`, `b`, `s0` or `alpha`.
    #[arg(long)]
    params: Option<String>,
    /// Per-axis grid `start:stop:step`; decimals and fractions are exact.
    #[arg(long)]
    grid: Option<GridSpec>,
    /// `reals`, `rationals`, `words` or `vec<d>`.
    #[arg(long)]
    magma: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Append a family to the invariance battery (repeatable).
    #[arg(long = "extra-family")]
    extra_families: Vec<CoefficientSequence>,
    /// Monte Carlo sample size; 0 skips the Monte Carlo check.
    #[arg(long)]
    mc_samples: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Exact,
    Mc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Equation {
    Equ,
    Rew,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Theorem1a,
    Theorem1b,
    Linear,
    Log,
}

#[derive(Serialize)]
struct Header {
    tool: &'static str,
    version: &'static str,
    command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// `flag`, `config`, or `env:THINLAB_SEED`.
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_source: Option<String>,
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    header: Header,
    result: T,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(RunConfig::from_json(&text)?)
        }
    }
}

fn apply_output(cfg: &mut RunConfig, o: OutputArgs) {
    if let Some(f) = o.out {
        cfg.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }
    if o.output.is_some() {
        cfg.output = o.output;
    }
}

/// Seed precedence: flag, then configuration, then the environment.
fn resolve_seed(cfg: &mut RunConfig, flag: Option<u64>) -> anyhow::Result<Option<String>> {
    if let Some(s) = flag {
        cfg.seed = Some(s);
        return Ok(Some("flag".into()));
    }
    if cfg.seed.is_some() {
        return Ok(Some("config".into()));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            let s = v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?;
            cfg.seed = Some(s);
            Ok(Some(format!("env:{SEED_ENV}")))
        }
        Err(_) => Ok(None),
    }
}

fn apply(cfg: &mut RunConfig, cmd: Option<Cmd>) -> anyhow::Result<Option<u64>> {
    let Some(cmd) = cmd else { return Ok(None) };
    let seed = match cmd {
        Cmd::Thin(a) => {
            cfg.command = Command::Thin;
            if let Some(f) = a.family {
                cfg.family = f;
            }
            cfg.theta = a.theta.unwrap_or(cfg.theta);
            cfg.p = a.p.unwrap_or(cfg.p);
            if let Some(m) = a.mode {
                cfg.mode = match m {
                    Mode::Exact => ThinMode::Exact,
                    Mode::Mc => ThinMode::Mc,
                };
            }
            cfg.mc_samples = a.samples.unwrap_or(cfg.mc_samples);
            cfg.tolerances.trunc = a.trunc_tol.unwrap_or(cfg.tolerances.trunc);
            apply_output(cfg, a.output);
            a.seed.seed
        }
        Cmd::Invariance(a) => {
            cfg.command = Command::Invariance;
            if let Some(f) = a.family {
                cfg.family = f;
            }
            if let Some(t) = a.thetas {
                cfg.thetas = t;
            }
            if let Some(p) = a.ps {
                cfg.ps = p;
            }
            cfg.tolerances.tv = a.tv_tol.unwrap_or(cfg.tolerances.tv);
            cfg.tolerances.phi_identity = a.identity_tol.unwrap_or(cfg.tolerances.phi_identity);
            apply_output(cfg, a.output);
            None
        }
        Cmd::Cgs(a) => {
            cfg.command = Command::Cgs;
            let req = &mut cfg.cgs;
            if let Some(e) = a.equation {
                req.equation = Some(match e {
                    Equation::Equ => EquationForm::Equ,
                    Equation::Rew => EquationForm::Rew,
                });
            }
            if let Some(f) = a.family {
                req.family = match f {
                    Family::Theorem1a => CgsFamily::Theorem1a,
                    Family::Theorem1b => CgsFamily::Theorem1b,
                    Family::Linear => CgsFamily::Linear,
                    Family::Log => CgsFamily::Log,
                };
            }
            if let Some(p) = a.params {
                req.params = serde_json::from_str(&p).context("--params is not valid JSON")?;
                if !req.params.is_object() {
                    bail!("--params must be a JSON object");
                }
            }
            if let Some(g) = a.grid {
                req.grid = g;
            }
            if let Some(m) = a.magma {
                req.magma = m;
            }
            cfg.tolerances.cgs = a.tol.unwrap_or(cfg.tolerances.cgs);
            apply_output(cfg, a.output);
            None
        }
        Cmd::Suite(a) => {
            cfg.command = Command::Suite;
            cfg.extra_families.extend(a.extra_families);
            cfg.mc_samples = a.mc_samples.unwrap_or(cfg.mc_samples);
            apply_output(cfg, a.output);
            a.seed.seed
        }
    };
    Ok(seed)
}

fn emit<T: Serialize>(cfg: &RunConfig, header: Header, result: &T, plot: impl FnOnce() -> PlotData) -> anyhow::Result<()> {
    let mut bytes = Vec::new();
    match cfg.format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut bytes, &Report { header, result })?;
            bytes.push(b'\n');
        }
        OutputFormat::Csv => write_plot_csv(&plot(), &mut bytes)?,
    }
    match &cfg.output {
        Some(path) => std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut cfg = load_config(cli.config.as_deref())?;
    let seed_flag = apply(&mut cfg, cli.command)?;
    let seed_source = if cfg.needs_seed() {
        resolve_seed(&mut cfg, seed_flag)?
    } else {
        None
    };
    cfg.validate()?;
    let header = Header {
        tool: "thinlab",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command,
        seed: cfg.seed.filter(|_| seed_source.is_some()),
        seed_source,
    };
    match cfg.command {
        Command::Thin => {
            let out = run_thin(&cfg)?;
            emit(&cfg, header, &out, || out.plot_data())?;
            Ok(true)
        }
        Command::Invariance => {
            let reports = run_invariance(&cfg)?;
            emit(&cfg, header, &reports, || PlotData::from_thinning(&reports))?;
            for r in reports.iter().filter(|r| !r.passed) {
                eprintln!("FAIL theta={} p={}: tv={:.3e}", r.theta, r.p, r.tv);
            }
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::Cgs => {
            let out = run_cgs(&cfg.cgs, cfg.tolerances.cgs)?;
            emit(&cfg, header, &out, || PlotData::from_residual_field(&out.field))?;
            Ok(out.stats.passed)
        }
        Command::Suite => {
            let result = run_suite(&cfg)?;
            for c in &result.checks {
                eprintln!("{} [{:.1} ms]", c.summary(), c.runtime.as_secs_f64() * 1e3);
            }
            eprintln!("overall: {}", if result.overall { "PASS" } else { "FAIL" });
            emit(&cfg, header, &result, || result.plot_data())?;
            Ok(result.overall)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
