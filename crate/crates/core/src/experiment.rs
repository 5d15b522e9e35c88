//! Experiment configuration and the runners behind the command line: a
//! single run (integrate, check, write outputs) and the two suites.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    condition_number, proof_identities, schedule_for, Orientation, ProofCheck, StepSizes,
};
use crate::error::{GdadError, Result};
use crate::exec::Exec;
use crate::integrate::{
    richardson_pair, tolerance_pair, ErrorBudget, IntegratorConfig, Method, TimeStep, Trajectory,
};
use crate::linalg;
use crate::problems::{
    certify_lipschitz_with, certify_pl_side_with, make_problem, measure_envelope_lipschitz,
    ObjectiveProblem, PlSide, ProblemParams, RegimeTag, PROBLEM_IDS,
};
use crate::report::{
    fnv1a, lemma_csv, svg_log_plot, trajectory_csv, write_file, Calibration, Certificate,
    IntegratorInfo, ProblemInfo, Report, Series,
};
use crate::verify::{
    audit_lemma_with, check_exponential_bound, check_min_gradnorm_bound, conservation_drift,
    gradcheck_seeded, rk4_order_estimate, ConservationReport, GradcheckReport, Lemma, Theorem,
    CONSERVATION_TOL,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Default horizon when none is configured.
pub const DEFAULT_HORIZON: f64 = 100.0;

/// Seeded random initial coordinates are drawn from `[-1, 1]`.
pub const RANDOM_START_RADIUS: f64 = 1.0;

const LIPSCHITZ_SAMPLES: usize = 2000;
const PL_GRID_BUDGET: f64 = 1e6;
const PL_GRID_MAX_PER_AXIS: usize = 101;

/// Process exit code for an error that aborted a run.
pub fn exit_code(err: &GdadError) -> i32 {
    match err {
        GdadError::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_INVALID,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Checks {
    pub rate: bool,
    pub lemma: bool,
    pub certificates: bool,
    pub identities: bool,
    pub calibration: bool,
}

impl Checks {
    pub const NAMES: [&'static str; 5] =
        ["rate", "lemma", "certificates", "identities", "calibration"];

    pub fn all() -> Self {
        Checks {
            rate: true,
            lemma: true,
            certificates: true,
            identities: true,
            calibration: true,
        }
    }

    pub fn none() -> Self {
        Checks {
            rate: false,
            lemma: false,
            certificates: false,
            identities: false,
            calibration: false,
        }
    }
}

impl Default for Checks {
    fn default() -> Self {
        Checks::all()
    }
}

impl FromStr for Checks {
    type Err = GdadError;

    /// Comma-separated subset of `rate, lemma, certificates, identities,
    /// calibration`, or `all` / `none`.
    fn from_str(s: &str) -> Result<Self> {
        let mut c = Checks::none();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            match item {
                "all" => c = Checks::all(),
                "none" => {}
                "rate" => c.rate = true,
                "lemma" => c.lemma = true,
                "certificates" | "certs" => c.certificates = true,
                "identities" => c.identities = true,
                "calibration" => c.calibration = true,
                other => {
                    return Err(GdadError::invalid(
                        "checks",
                        format!(
                            "unknown check `{other}` (known: all, none, {})",
                            Checks::NAMES.join(", ")
                        ),
                    ))
                }
            }
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: String,
    pub params: ProblemParams,
    pub regime: Option<RegimeTag>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub seed: u64,
    pub integrator: IntegratorConfig,
    pub out: PathBuf,
    pub checks: Checks,
}

impl ExperimentConfig {
    pub fn new(problem: &str, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            problem: problem.to_string(),
            params: ProblemParams::default(),
            regime: None,
            alpha: None,
            beta: None,
            gamma: None,
            x0: None,
            y0: None,
            seed: 0,
            integrator: IntegratorConfig::auto(DEFAULT_HORIZON),
            out: out.into(),
            checks: Checks::all(),
        }
    }

    pub fn has_override(&self) -> bool {
        self.alpha.is_some() || self.beta.is_some() || self.gamma.is_some()
    }

    /// Canonical text of everything that affects the results (the output
    /// directory excluded); hashed into the run id.
    pub fn canonical(&self) -> String {
        format!(
            "problem={};params={:?};regime={:?};alpha={:?};beta={:?};gamma={:?};x0={:?};y0={:?};seed={};integrator={:?};checks={:?}",
            self.problem,
            self.params,
            self.regime,
            self.alpha,
            self.beta,
            self.gamma,
            self.x0,
            self.y0,
            self.seed,
            self.integrator,
            self.checks
        )
    }

    pub fn run_id(&self) -> String {
        format!("{:016x}", fnv1a(self.canonical().as_bytes()))
    }
}

/// Configuration as flat `key = value` pairs, from a config file and/or
/// command-line flags (later sources override earlier ones).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

pub const CONFIG_KEYS: [&str; 20] = [
    "problem",
    "regime",
    "mu-x",
    "mu-y",
    "b",
    "dim",
    "alpha",
    "beta",
    "gamma",
    "T",
    "dt",
    "method",
    "x0",
    "y0",
    "seed",
    "out",
    "checks",
    "record-every",
    "rel-tol",
    "abs-tol",
];

fn normalize_key(key: &str) -> Result<String> {
    let k = key.trim().trim_start_matches("--").replace('_', "-");
    let k = if k.eq_ignore_ascii_case("t") || k.eq_ignore_ascii_case("horizon") {
        "T".to_string()
    } else {
        k.to_ascii_lowercase()
    };
    if CONFIG_KEYS.contains(&k.as_str()) {
        Ok(k)
    } else {
        Err(GdadError::Configuration(format!(
            "unknown config key `{key}`"
        )))
    }
}

fn parse_f64(key: &'static str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| GdadError::invalid(key, format!("`{v}` is not a number")))
}

/// Comma- or whitespace-separated list of numbers.
pub fn parse_vector(key: &'static str, v: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(GdadError::invalid(key, "empty vector"));
    }
    items.into_iter().map(|s| parse_f64(key, s)).collect()
}

impl RawConfig {
    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                GdadError::Configuration(format!("line {}: expected `key = value`", n + 1))
            })?;
            raw.set(k, v.trim())?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        self.values.insert(normalize_key(key)?, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(&mut self, other: &RawConfig) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    /// Builds a validated-syntax configuration; `default_out` is used when
    /// no `out` key is present.
    pub fn build(&self, default_out: &Path) -> Result<ExperimentConfig> {
        let problem = self
            .get("problem")
            .ok_or_else(|| {
                GdadError::Configuration(format!(
                    "missing `problem` (one of {})",
                    PROBLEM_IDS.join(", ")
                ))
            })?
            .trim()
            .to_string();
        let out = self
            .get("out")
            .map_or_else(|| default_out.to_path_buf(), PathBuf::from);
        let mut cfg = ExperimentConfig::new(&problem, out);
        let num = |key: &'static str| self.get(key).map(|v| parse_f64(key, v)).transpose();
        cfg.params = ProblemParams {
            mu_x: num("mu-x")?,
            mu_y: num("mu-y")?,
            b: num("b")?,
            dim: self
                .get("dim")
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| GdadError::invalid("dim", format!("`{v}` is not a count")))
                })
                .transpose()?,
        };
        cfg.regime = self.get("regime").map(str::parse).transpose()?;
        cfg.alpha = num("alpha")?;
        cfg.beta = num("beta")?;
        cfg.gamma = num("gamma")?;
        cfg.x0 = self.get("x0").map(|v| parse_vector("x0", v)).transpose()?;
        cfg.y0 = self.get("y0").map(|v| parse_vector("y0", v)).transpose()?;
        if let Some(s) = self.get("seed") {
            cfg.seed = s.trim().parse().map_err(|_| {
                GdadError::invalid("seed", format!("`{s}` is not an unsigned integer"))
            })?;
        }
        if let Some(t) = num("T")? {
            cfg.integrator.horizon = t;
        }
        if let Some(dt) = self.get("dt") {
            cfg.integrator.dt = if dt.trim().eq_ignore_ascii_case("auto") {
                TimeStep::Auto
            } else {
                TimeStep::Fixed(parse_f64("dt", dt)?)
            };
        }
        if let Some(m) = self.get("method") {
            cfg.integrator.method = m.parse()?;
        }
        if let Some(r) = self.get("record-every") {
            cfg.integrator.record_every = Some(r.trim().parse().map_err(|_| {
                GdadError::invalid("record_every", format!("`{r}` is not a count"))
            })?);
        }
        if let Some(v) = num("rel-tol")? {
            cfg.integrator.rel_tol = v;
        }
        if let Some(v) = num("abs-tol")? {
            cfg.integrator.abs_tol = v;
        }
        if let Some(c) = self.get("checks") {
            cfg.checks = c.parse()?;
        }
        Ok(cfg)
    }
}

/// Problem, step sizes and initial state resolved from a configuration.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub problem: ObjectiveProblem,
    pub steps: StepSizes,
    pub off_schedule: bool,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

/// Resolves and validates everything a run needs, without side effects.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.integrator.validate()?;
    let mut problem = make_problem(&cfg.problem, &cfg.params)?;
    if let Some(r) = cfg.regime {
        if problem.regime() != Some(r) {
            problem = problem.with_regime(r)?;
        }
    }
    let schedule = problem
        .regime()
        .map(|r| schedule_for(r, problem.constants()))
        .transpose()?;
    let steps = if cfg.has_override() {
        let base = schedule;
        StepSizes::new(
            cfg.alpha.or(base.map(|s| s.alpha)).unwrap_or(1.0),
            cfg.beta.or(base.map(|s| s.beta)).unwrap_or(1.0),
            cfg.gamma.or(base.map(|s| s.gamma)).unwrap_or(1.0),
            base.map_or(Orientation::FastY, |s| s.orientation),
        )?
    } else {
        schedule.ok_or_else(|| {
            GdadError::Configuration(format!(
                "problem `{}` has no regime and hence no schedule; pass --alpha/--beta",
                problem.id()
            ))
        })?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| rng.random_range(-RANDOM_START_RADIUS..=RANDOM_START_RADIUS))
            .collect()
    };
    let x0 = cfg.x0.clone().unwrap_or_else(|| draw(problem.dim_x()));
    let y0 = cfg.y0.clone().unwrap_or_else(|| draw(problem.dim_y()));
    problem.check_dims(&x0, &y0)?;
    if !(linalg::all_finite(&x0) && linalg::all_finite(&y0)) {
        return Err(GdadError::invalid("initial state", "must be finite"));
    }
    Ok(Prepared {
        problem,
        steps,
        off_schedule: cfg.has_override(),
        x0,
        y0,
    })
}

/// Grid resolution keeping the PL certificate at about a million points.
pub fn pl_grid_points(dims: usize) -> usize {
    (PL_GRID_BUDGET.powf(1.0 / dims as f64).floor() as usize).clamp(3, PL_GRID_MAX_PER_AXIS)
}

/// PL certificates for every side the problem declares, plus the Lipschitz
/// certificate, over the problem's certification box.
pub fn certificates(exec: Exec, problem: &ObjectiveProblem, seed: u64) -> Result<Vec<Certificate>> {
    let region = problem.cert_box();
    let n = pl_grid_points(region.dims());
    let mut out = vec![Certificate::Pl(certify_pl_side_with(
        exec,
        problem,
        PlSide::Y,
        region,
        n,
    )?)];
    if problem.constants().mu_x > 0.0 || problem.regime() == Some(RegimeTag::TwoSidedPL) {
        out.push(Certificate::Pl(certify_pl_side_with(
            exec,
            problem,
            PlSide::X,
            region,
            n,
        )?));
    }
    out.push(Certificate::Lipschitz(certify_lipschitz_with(
        exec,
        problem,
        region,
        LIPSCHITZ_SAMPLES,
        seed,
    )?));
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub exit_code: i32,
    pub dir: PathBuf,
}

fn problem_info(p: &ObjectiveProblem) -> ProblemInfo {
    ProblemInfo {
        id: p.id().to_string(),
        params: p
            .params()
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
        dim: p.dim_x(),
        constants: *p.constants(),
        f_lower: p.f_lower(),
        f_ref_upper: p.f_ref_upper(),
    }
}

fn radius_drift(traj: &Trajectory) -> f64 {
    let radius =
        |s: &crate::integrate::State| (linalg::norm_sq(&s.x) + linalg::norm_sq(&s.y)).sqrt();
    let r0 = radius(&traj.samples[0].state);
    traj.samples
        .iter()
        .map(|s| (radius(&s.state) - r0).abs())
        .fold(0.0, f64::max)
}

/// Runs one experiment, writing its outputs into `cfg.out`.
///
/// Validation errors are returned before any file is written. Divergence
/// produces a report (and the partial trajectory) with exit code 3.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_with(Exec::default(), cfg)
}

pub fn run_with(exec: Exec, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let prep = prepare(cfg)?;
    let problem = &prep.problem;
    let steps = prep.steps;
    let regime = problem.regime();
    let mut notes = Vec::new();
    if prep.off_schedule {
        notes.push(
            "off-schedule: step sizes overridden, rate checks and proof identities skipped"
                .to_string(),
        );
    }
    if cfg.x0.is_none() || cfg.y0.is_none() {
        notes.push(format!(
            "initial coordinates not given were drawn uniformly from [-{RANDOM_START_RADIUS}, {RANDOM_START_RADIUS}] with seed {}",
            cfg.seed
        ));
    }

    let integrated = match cfg.integrator.method {
        Method::RK4Fixed => {
            richardson_pair(problem, &steps, &prep.x0, &prep.y0, &cfg.integrator, exec)
        }
        Method::RK45Adaptive => {
            tolerance_pair(problem, &steps, &prep.x0, &prep.y0, &cfg.integrator, exec)
        }
    };
    let (traj, budget, diverged_at): (Trajectory, Option<ErrorBudget>, Option<f64>) =
        match integrated {
            Ok((t, b)) => (t, Some(b), None),
            Err(GdadError::Divergence { t, partial }) => {
                notes.push(format!(
                    "integration diverged at t = {t}; trajectory is partial"
                ));
                (*partial, None, Some(t))
            }
            Err(e) => return Err(e),
        };
    if let Some(b) = &budget {
        let how = match cfg.integrator.method {
            Method::RK4Fixed => "dt vs dt/2",
            Method::RK45Adaptive => "tolerances vs tolerances/64",
        };
        notes.push(format!(
            "integration budget ({how}): state {:e}, lyapunov {:e}, grad_norm {:e}",
            b.state, b.lyapunov, b.grad_norm
        ));
    }
    if let Some(t) = traj.left_box_at {
        notes.push(format!(
            "trajectory left the certification box at t = {t}; constants are certified inside the box only"
        ));
    }

    let mut report = Report {
        run_id: cfg.run_id(),
        problem: problem_info(problem),
        regime: regime.map(|r| r.to_string()),
        steps: steps.into(),
        integrator: IntegratorInfo::from_trajectory(&traj, budget),
        certificates: Vec::new(),
        rate_checks: Vec::new(),
        lemma_audits: Vec::new(),
        pass: false,
        off_schedule: prep.off_schedule,
        seed: cfg.seed,
        x0: prep.x0.clone(),
        y0: prep.y0.clone(),
        condition_number: condition_number(problem.constants()).ok(),
        proof_identities: Vec::new(),
        calibration: Calibration::default(),
        left_box_at: traj.left_box_at,
        diverged_at,
        notes: Vec::new(),
    };

    if diverged_at.is_none() {
        if cfg.checks.certificates {
            report.certificates = certificates(exec, problem, cfg.seed)?;
            if problem.max_oracle().is_some() && problem.constants().mu_y > 0.0 {
                let env = measure_envelope_lipschitz(
                    problem,
                    problem.cert_box(),
                    LIPSCHITZ_SAMPLES,
                    cfg.seed,
                )?;
                if !env.linear_formula_holds {
                    notes.push(format!(
                        "max-envelope gradient Lipschitz constant measured {:.6} exceeds L_x + L_xy/mu_y = {:.6}; L_x + L_xy^2/mu_y = {:.6} {}",
                        env.measured,
                        env.linear_formula,
                        env.squared_formula,
                        if env.squared_formula_holds { "holds" } else { "also fails" }
                    ));
                }
                report.calibration.envelope_lipschitz = Some(env);
            }
        }
        if let Some(r) = regime {
            if cfg.checks.identities && !prep.off_schedule {
                report.proof_identities = proof_identities(r, &steps, problem.constants());
            }
            if cfg.checks.rate && !prep.off_schedule {
                let theorem = Theorem::for_regime(r);
                let rc = match theorem {
                    Theorem::Thm1 => check_exponential_bound(problem, &traj, budget)?,
                    t => check_min_gradnorm_bound(problem, &traj, t, budget)?,
                };
                report.rate_checks.push(rc);
            }
            if cfg.checks.lemma {
                match audit_lemma_with(exec, problem, &traj, Lemma::for_regime(r), budget) {
                    Ok(a) => report.lemma_audits.push(a),
                    Err(GdadError::InsufficientData(why)) => {
                        notes.push(format!("lemma audit skipped: {why}"))
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if cfg.checks.calibration && problem.regime().is_none() && steps.alpha == steps.beta {
            let slack = budget.map_or(0.0, |b| b.state);
            let drift = radius_drift(&traj);
            report.calibration.conservation = Some(ConservationReport {
                horizon: traj.config.horizon,
                dt: traj.dt,
                max_drift: drift,
                tolerance: CONSERVATION_TOL,
                pass: drift <= CONSERVATION_TOL + slack,
            });
        }
    }
    report.notes = notes;
    report.pass = report.compute_pass();
    let exit_code = if diverged_at.is_some() {
        EXIT_DIVERGED
    } else if report.pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    };
    write_outputs(&cfg.out, &report, &traj, problem)?;
    Ok(RunOutcome {
        report,
        exit_code,
        dir: cfg.out.clone(),
    })
}

fn write_outputs(
    dir: &Path,
    report: &Report,
    traj: &Trajectory,
    problem: &ObjectiveProblem,
) -> Result<()> {
    write_file(dir, "trajectory.csv", &trajectory_csv(traj)?)?;
    write_file(dir, "report.json", &report.to_json()?)?;
    for audit in &report.lemma_audits {
        write_file(dir, &format!("{}.csv", audit.lemma), &lemma_csv(audit)?)?;
    }
    if traj.has_lyapunov() {
        let v: Vec<(f64, f64)> = traj
            .samples
            .iter()
            .filter_map(|s| s.lyapunov.map(|l| (s.state.t, l.v)))
            .collect();
        let mut series = vec![Series {
            name: "v(t)".into(),
            color: "steelblue",
            dashed: false,
            points: v.clone(),
        }];
        if let Some(rate) = report.rate_checks.iter().find_map(|r| r.bound_exponent) {
            let v0 = v[0].1;
            series.push(Series {
                name: "exp(-t/(20 kappa^2)) v(0)".into(),
                color: "firebrick",
                dashed: true,
                points: v
                    .iter()
                    .map(|&(t, _)| (t, (-rate * t).exp() * v0))
                    .collect(),
            });
        }
        write_file(
            dir,
            "lyapunov.svg",
            &svg_log_plot("coupled Lyapunov value", "t", "v", &series),
        )?;
    }
    let mut m = f64::INFINITY;
    let running: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| {
            m = m.min(s.gx_norm.hypot(s.gy_norm));
            (s.state.t, m)
        })
        .collect();
    let mut series = vec![Series {
        name: "running min |grad f|".into(),
        color: "steelblue",
        dashed: false,
        points: running.clone(),
    }];
    if let Some(rc) = report
        .rate_checks
        .iter()
        .find(|r| r.theorem != Theorem::Thm1)
    {
        // bound(T) = C / sqrt(T); recover C from the final horizon.
        let last = rc.points.last().expect("horizon grid is non-empty");
        let c = last.bound * last.t.sqrt();
        series.push(Series {
            name: "C / sqrt(T)".into(),
            color: "firebrick",
            dashed: true,
            points: running
                .iter()
                .filter(|p| p.0 > 0.0)
                .map(|&(t, _)| (t, c / t.sqrt()))
                .collect(),
        });
    }
    write_file(
        dir,
        "gradnorm.svg",
        &svg_log_plot(
            &format!("{} gradient norm", problem.id()),
            "t",
            "|grad f|",
            &series,
        ),
    )?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    AllTheorems,
    Calibration,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::AllTheorems => "all-theorems",
            Preset::Calibration => "calibration",
        })
    }
}

impl FromStr for Preset {
    type Err = GdadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all-theorems" => Ok(Preset::AllTheorems),
            "calibration" => Ok(Preset::Calibration),
            other => Err(GdadError::invalid(
                "preset",
                format!("unknown preset `{other}` (known: all-theorems, calibration)"),
            )),
        }
    }
}

/// The canonical experiment for each theorem: quadratic saddle `(1, 1, 2)`
/// over `T = 200` with `dt = 1e-3`, and the one-sided instances with
/// `mu = 1, b = 2` over `T = 400` with the automatic step, all from
/// `x0 = y0 = (1)`.
pub fn canonical_config(theorem: Theorem, out: impl Into<PathBuf>) -> ExperimentConfig {
    let (problem, horizon, dt) = match theorem {
        Theorem::Thm1 => ("quadratic-saddle", 200.0, TimeStep::Fixed(1e-3)),
        Theorem::Thm2 => ("nc-pl", 400.0, TimeStep::Auto),
        Theorem::Thm3 => ("nc-sc", 400.0, TimeStep::Auto),
        Theorem::Thm4 => ("sc-nc", 400.0, TimeStep::Auto),
    };
    let mut cfg = ExperimentConfig::new(problem, out);
    cfg.params = ProblemParams {
        mu_x: Some(1.0),
        mu_y: Some(1.0),
        b: Some(2.0),
        dim: Some(1),
    };
    cfg.regime = Some(theorem.regime());
    cfg.x0 = Some(vec![1.0]);
    cfg.y0 = Some(vec![1.0]);
    cfg.integrator = IntegratorConfig {
        horizon,
        dt,
        ..IntegratorConfig::auto(horizon)
    };
    cfg
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    pub dir: String,
    pub run_id: Option<String>,
    pub exit_code: i32,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub preset: Preset,
    pub runs: Vec<SuiteEntry>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateSet {
    pub problem: String,
    pub claimed_mu_y: f64,
    pub certificates: Vec<Certificate>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub gradcheck: Vec<GradcheckReport>,
    pub certificates: Vec<CertificateSet>,
    /// Same problems with `mu_y` deliberately inflated; each must fail.
    pub negative_controls: Vec<CertificateSet>,
    pub calibration: Calibration,
    pub proof_identities: Vec<ProofCheck>,
    pub notes: Vec<String>,
    pub pass: bool,
}

pub const GRADCHECK_POINTS: usize = 100;
pub const GRADCHECK_SEED: u64 = 11;
pub const GRADCHECK_H: f64 = 1e-5;

/// Built-in problems with default parameters (`mu = 1, b = 2`).
pub fn builtin_problems() -> Result<Vec<ObjectiveProblem>> {
    PROBLEM_IDS
        .iter()
        .map(|id| make_problem(id, &ProblemParams::default()))
        .collect()
}

/// Gradient checks, certificates (with inflated-`mu_y` negative controls),
/// rotation conservation, the RK4 order estimate and the schedule
/// identities.
pub fn calibration_report(exec: Exec) -> Result<CalibrationReport> {
    let problems = builtin_problems()?;
    let gradcheck = problems
        .iter()
        .map(|p| gradcheck_seeded(exec, p, GRADCHECK_POINTS, GRADCHECK_SEED, GRADCHECK_H))
        .collect::<Result<Vec<_>>>()?;
    let certificate_set = |p: &ObjectiveProblem| -> Result<CertificateSet> {
        let certificates = certificates(exec, p, GRADCHECK_SEED)?;
        Ok(CertificateSet {
            problem: p.id().to_string(),
            claimed_mu_y: p.constants().mu_y,
            pass: certificates.iter().all(Certificate::pass),
            certificates,
        })
    };
    let certs = problems
        .iter()
        .map(certificate_set)
        .collect::<Result<Vec<_>>>()?;
    let negative_controls = problems
        .iter()
        .filter(|p| p.constants().mu_y > 0.0)
        .map(|p| {
            let mut c = *p.constants();
            c.mu_y *= 2.0;
            certificate_set(&p.clone().with_constants(c))
        })
        .collect::<Result<Vec<_>>>()?;
    let conservation = conservation_drift(100.0, 1e-3, 1.0)?;
    let order = rk4_order_estimate(exec, 10.0, 0.1)?;
    let mut notes = Vec::new();
    let quad = &problems[0];
    let envelope =
        measure_envelope_lipschitz(quad, quad.cert_box(), LIPSCHITZ_SAMPLES, GRADCHECK_SEED)?;
    notes.push(format!(
        "quadratic saddle: max-envelope gradient Lipschitz constant {:.6}; L_x + L_xy/mu_y = {:.6} ({}), L_x + L_xy^2/mu_y = {:.6} ({})",
        envelope.measured,
        envelope.linear_formula,
        if envelope.linear_formula_holds { "holds" } else { "violated" },
        envelope.squared_formula,
        if envelope.squared_formula_holds { "holds" } else { "violated" },
    ));
    let mut proof = Vec::new();
    for t in Theorem::ALL {
        let cfg = canonical_config(t, "");
        let p = prepare(&cfg)?;
        proof.extend(proof_identities(
            t.regime(),
            &p.steps,
            p.problem.constants(),
        ));
    }
    let calibration = Calibration {
        conservation: Some(conservation),
        order: Some(order),
        gradcheck: Vec::new(),
        envelope_lipschitz: Some(envelope),
    };
    let pass = gradcheck.iter().all(|g| g.pass)
        && certs.iter().all(|c| c.pass)
        && negative_controls.iter().all(|c| !c.pass)
        && calibration.pass()
        && proof.iter().all(|c| c.holds);
    Ok(CalibrationReport {
        gradcheck,
        certificates: certs,
        negative_controls,
        calibration,
        proof_identities: proof,
        notes,
        pass,
    })
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub summary: SuiteSummary,
    pub exit_code: i32,
}

fn entry_for(name: &str, dir: &Path, result: Result<RunOutcome>) -> SuiteEntry {
    match result {
        Ok(o) => SuiteEntry {
            name: name.to_string(),
            dir: dir.display().to_string(),
            run_id: Some(o.report.run_id.clone()),
            exit_code: o.exit_code,
            pass: o.exit_code == EXIT_PASS,
            error: None,
        },
        Err(e) => SuiteEntry {
            name: name.to_string(),
            dir: dir.display().to_string(),
            run_id: None,
            exit_code: exit_code(&e),
            pass: false,
            error: Some(e.to_string()),
        },
    }
}

/// Runs a preset under `out_root/<preset>/` and writes `summary.json` there.
pub fn suite(preset: Preset, out_root: &Path, exec: Exec) -> Result<SuiteOutcome> {
    let root = out_root.join(preset.to_string());
    let runs = match preset {
        Preset::AllTheorems => {
            let configs: Vec<ExperimentConfig> = Theorem::ALL
                .iter()
                .map(|&t| canonical_config(t, root.join(t.name())))
                .collect();
            exec.map(&configs, |cfg| {
                let name = cfg
                    .out
                    .file_name()
                    .map_or(String::new(), |n| n.to_string_lossy().into_owned());
                entry_for(&name, &cfg.out, run_with(exec, cfg))
            })
        }
        Preset::Calibration => {
            let entry = match calibration_report(exec) {
                Ok(r) => {
                    write_file(
                        &root,
                        "calibration.json",
                        &(serde_json::to_string_pretty(&r)? + "\n"),
                    )?;
                    SuiteEntry {
                        name: "calibration".into(),
                        dir: root.display().to_string(),
                        run_id: None,
                        exit_code: if r.pass { EXIT_PASS } else { EXIT_CHECK_FAILED },
                        pass: r.pass,
                        error: None,
                    }
                }
                Err(e) => SuiteEntry {
                    name: "calibration".into(),
                    dir: root.display().to_string(),
                    run_id: None,
                    exit_code: exit_code(&e),
                    pass: false,
                    error: Some(e.to_string()),
                },
            };
            vec![entry]
        }
    };
    let pass = runs.iter().all(|r| r.pass);
    let exit_code = runs.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_PASS);
    let summary = SuiteSummary { preset, runs, pass };
    write_file(
        &root,
        "summary.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    Ok(SuiteOutcome { summary, exit_code })
}
