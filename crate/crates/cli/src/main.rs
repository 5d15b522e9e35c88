//! `gdad`: run gradient descent-ascent experiments and write offline reports.
//!
//! Exit codes: 0 all enabled checks pass, 1 a check failed, 2 invalid
//! configuration, 3 integration diverged.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gdad_core::experiment::{self, Preset, RawConfig};
use gdad_core::{Exec, GdadError};

const DEFAULT_OUT_ROOT: &str = "gdad-out";

#[derive(Parser, Debug)]
#[command(
    name = "gdad",
    version,
    about = "Gradient descent-ascent dynamics simulator and verification lab"
)]
struct Cli {
    /// Run every data-parallel loop on the current thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configuration, run its checks and write the report.
    Run(Box<RunArgs>),
    /// Run a preset collection of experiments.
    Suite {
        preset: PresetArg,
        /// Output root (defaults to $GDAD_OUT, then ./gdad-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    AllTheorems,
    Calibration,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::AllTheorems => Preset::AllTheorems,
            PresetArg::Calibration => Preset::Calibration,
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// File of `key = value` lines using the flag names; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// quadratic-saddle, nc-pl, nc-sc, sc-nc or bilinear.
    #[arg(long)]
    problem: Option<String>,
    /// two-sided-pl, nonconvex-pl, nonconvex-strongly-concave or strongly-convex-nonconcave.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long = "mu-x", allow_hyphen_values = true)]
    mu_x: Option<String>,
    #[arg(long = "mu-y", allow_hyphen_values = true)]
    mu_y: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Dimension of x and y.
    #[arg(long)]
    dim: Option<String>,
    /// Step-size override (marks the run off-schedule).
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// Horizon.
    #[arg(long = "T", allow_hyphen_values = true)]
    horizon: Option<String>,
    /// Fixed step, or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<String>,
    /// rk4 or rk45.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated initial x (seeded random in [-1, 1] when omitted).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory (defaults to $GDAD_OUT/<run id>, then ./gdad-out/<run id>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of rate, lemma, certificates, identities, calibration; or all / none.
    #[arg(long)]
    checks: Option<String>,
    #[arg(long = "record-every")]
    record_every: Option<String>,
}

impl RunArgs {
    fn flags(&self) -> Result<RawConfig, GdadError> {
        let mut raw = RawConfig::default();
        let pairs: [(&str, &Option<String>); 18] = [
            ("problem", &self.problem),
            ("regime", &self.regime),
            ("mu-x", &self.mu_x),
            ("mu-y", &self.mu_y),
            ("b", &self.b),
            ("dim", &self.dim),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("T", &self.horizon),
            ("dt", &self.dt),
            ("method", &self.method),
            ("x0", &self.x0),
            ("y0", &self.y0),
            ("seed", &self.seed),
            ("checks", &self.checks),
            ("record-every", &self.record_every),
            ("out", &self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                raw.set(key, v.clone())?;
            }
        }
        Ok(raw)
    }
}

fn out_root() -> PathBuf {
    std::env::var_os("GDAD_OUT").map_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT), PathBuf::from)
}

fn run(args: &RunArgs, exec: Exec) -> Result<i32, GdadError> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RawConfig::default(),
    };
    raw.merge(&args.flags()?);
    let root = out_root();
    let mut cfg = raw.build(Path::new(""))?;
    if raw.get("out").is_none() {
        cfg.out = root.join(cfg.run_id());
    }
    let outcome = experiment::run_with(exec, &cfg)?;
    let r = &outcome.report;
    println!(
        "run {} ({}): {} -> {}",
        r.run_id,
        r.problem.id,
        if r.pass { "PASS" } else { "FAIL" },
        outcome.dir.display()
    );
    for rc in &r.rate_checks {
        println!(
            "  {}: {} (worst margin {:e})",
            rc.theorem,
            verdict(rc.pass),
            rc.worst_margin
        );
    }
    for a in &r.lemma_audits {
        println!(
            "  {}: {} (fraction {:.4})",
            a.lemma,
            verdict(a.pass),
            a.fraction
        );
    }
    for note in &r.notes {
        println!("  note: {note}");
    }
    Ok(outcome.exit_code)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn suite(preset: Preset, out: Option<PathBuf>, exec: Exec) -> Result<i32, GdadError> {
    let root = out.unwrap_or_else(out_root);
    let outcome = experiment::suite(preset, &root, exec)?;
    for e in &outcome.summary.runs {
        match &e.error {
            Some(err) => println!("{}: error ({err}) exit {}", e.name, e.exit_code),
            None => println!(
                "{}: {} exit {} -> {}",
                e.name,
                verdict(e.pass),
                e.exit_code,
                e.dir
            ),
        }
    }
    println!(
        "suite {preset}: {}",
        if outcome.summary.pass { "PASS" } else { "FAIL" }
    );
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    let result = match cli.command {
        Command::Run(args) => run(&args, exec),
        Command::Suite { preset, out } => suite(preset.into(), out, exec),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            experiment::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
