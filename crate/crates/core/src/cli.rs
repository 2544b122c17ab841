//! Command-line front end.
//!
//! Errors are reported on one line with a machine-readable prefix:
//!
//! | prefix         | exit | cause                                         |
//! |----------------|------|-----------------------------------------------|
//! | `E_CONFIG`     | 2    | bad flags, unreadable field file, bad scheme  |
//! | `E_SOLVER`     | 3    | Newton, Legendre or quadrature failure        |
//! | `E_DEGENERATE` | 3    | vanishing twist or denominator                |
//!
//! `volcheck` exits 1 when the largest defect exceeds `--fail-above`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{FieldError, SchemeError, SolveError};
use crate::fields::{Field3, FieldSpec};
use crate::genmap::SolverConfig;
use crate::perm3::{classify, render_conditions, Permutation};
use crate::potential::V3;
use crate::schemes::{make_scheme, SchemeHandle, SchemeKind};
use crate::verify::{det3, fd_eps, jacobian_fd, observed_order, random_points, volume_audit};

/// Environment variable overriding the Newton tolerance.
pub const NEWTON_TOL_ENV: &str = "VOLFORM_NEWTON_TOL";

#[derive(Debug, Parser)]
#[command(name = "volform", version, about = "Volume-preserving integrators in R^3")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    Integrate(IntegrateArgs),
    /// Classify a pair of permutations.
    Classify(ClassifyArgs),
    /// Audit volume preservation at random points.
    Volcheck(VolcheckArgs),
    /// Estimate the convergence order.
    Order(OrderArgs),
}

#[derive(Debug, Args)]
pub struct SchemeArgs {
    /// Field specification (JSON).
    #[arg(long)]
    pub field: PathBuf,
    /// Scheme name, e.g. se-se, dl-dl, s1-quispel, rk4.
    #[arg(long)]
    pub scheme: String,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Step size.
    #[arg(long = "h")]
    pub h: f64,
    /// Number of steps.
    #[arg(long)]
    pub steps: usize,
    /// Initial point.
    #[arg(long, default_value = "0.1,0.2,0.3", allow_hyphen_values = true)]
    pub x0: String,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Audit the Jacobian determinant every N steps.
    #[arg(long, default_value_t = 100)]
    pub audit_every: usize,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Old-coordinate permutation, e.g. 3,2,1.
    #[arg(long)]
    pub sigma: String,
    /// New-coordinate permutation.
    #[arg(long = "Sigma")]
    pub big_sigma: String,
}

#[derive(Debug, Args)]
pub struct VolcheckArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Step size.
    #[arg(long = "h")]
    pub h: f64,
    /// Number of random points.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampling box `lo,hi` applied to every coordinate.
    #[arg(long = "box", default_value = "-1,1", allow_hyphen_values = true)]
    pub bounds: String,
    /// Exit with status 1 if the largest defect exceeds this.
    #[arg(long)]
    pub fail_above: Option<f64>,
    /// Per-point CSV `x1,x2,x3,defect`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Coarsest step, halved at each level.
    #[arg(long, default_value_t = 0.2)]
    pub h0: f64,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Final time; must be a multiple of every step.
    #[arg(long = "T", default_value_t = 1.0)]
    pub t: f64,
    /// Initial point.
    #[arg(long, default_value = "0.1,0.2,0.3", allow_hyphen_values = true)]
    pub x0: String,
    /// Order table.
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed run.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Solver(String),
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Degenerate(_) => 3,
        }
    }

    /// `PREFIX: message` on a single line.
    pub fn line(&self) -> String {
        let (p, m) = match self {
            CliError::Config(m) => ("E_CONFIG", m),
            CliError::Solver(m) => ("E_SOLVER", m),
            CliError::Degenerate(m) => ("E_DEGENERATE", m),
        };
        format!("{p}: {}", m.replace('\n', " "))
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::TwistViolation { .. } => CliError::Degenerate(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::QuadratureFailure { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::Solve(s) => s.into(),
            SchemeError::Field(f) => f.into(),
            SchemeError::TwistDegenerate { .. }
            | SchemeError::StepTooLarge { .. }
            | SchemeError::Quad(_) => CliError::Degenerate(e.to_string()),
            SchemeError::Unsupported { .. } | SchemeError::UnknownScheme(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

/// Validated inputs shared by the subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub field_path: PathBuf,
    pub field: Field3,
    pub scheme: SchemeKind,
    pub h: f64,
    pub solver: SolverConfig,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Solver settings with the environment override applied.
pub fn solver_config() -> Result<SolverConfig, CliError> {
    let cfg = SolverConfig::default();
    match std::env::var(NEWTON_TOL_ENV) {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(cfg.with_newton_tol(t)),
            _ => Err(config(format!("{NEWTON_TOL_ENV}={v} is not a positive number"))),
        },
        Err(_) => Ok(cfg),
    }
}

pub fn load_field(path: &Path) -> Result<Field3, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config(format!("cannot read field file {}: {e}", path.display())))?;
    Ok(FieldSpec::from_json(&text)?.build()?)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config(format!("--{name} must be positive, got {v}")))
    }
}

fn parse_list<const N: usize>(flag: &str, s: &str) -> Result<[f64; N], CliError> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let bad = || config(format!("--{flag} expects {N} comma-separated numbers, got {s:?}"));
    let vals = vals.map_err(|_| bad())?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    vals.try_into().map_err(|_| bad())
}

fn parse_perm(flag: &str, s: &str) -> Result<Permutation, CliError> {
    s.parse::<Permutation>()
        .map_err(|e| config(format!("--{flag}: {e}")))
}

impl RunConfig {
    pub fn new(args: &SchemeArgs, h: f64) -> Result<Self, CliError> {
        let scheme = args.scheme.parse::<SchemeKind>()?;
        let h = positive("h", h)?;
        Ok(RunConfig {
            field_path: args.field.clone(),
            field: load_field(&args.field)?,
            scheme,
            h,
            solver: solver_config()?,
        })
    }

    pub fn handle(&self, h: f64) -> Result<SchemeHandle, CliError> {
        Ok(make_scheme(self.scheme, &self.field, h)?)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| config(format!("cannot write {}: {e}", path.display())))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `|det J − 1|` of one step at `x`.
fn step_defect(s: &SchemeHandle, x: &V3, cfg: &SolverConfig) -> Result<f64, CliError> {
    let m = match s.affine(cfg)? {
        Some(a) => a.m,
        None => jacobian_fd(|y| s.step(y, cfg), x, fd_eps(x))?,
    };
    Ok((det3(&m) - 1.0).abs())
}

pub fn cmd_integrate(a: &IntegrateArgs) -> Result<String, CliError> {
    let rc = RunConfig::new(&a.scheme, a.h)?;
    if a.steps == 0 {
        return Err(config("--steps must be at least 1"));
    }
    if a.audit_every == 0 {
        return Err(config("--audit-every must be at least 1"));
    }
    let x0 = V3::from(parse_list::<3>("x0", &a.x0)?);
    let s = rc.handle(rc.h)?;
    let cfg = rc.solver;
    let mut csv = String::from("step,t,x1,x2,x3,det_defect\n");
    let row = |csv: &mut String, k: usize, x: &V3, d: Option<f64>| {
        let d = d.map(num).unwrap_or_default();
        let t = k as f64 * rc.h;
        let _ = writeln!(csv, "{k},{},{},{},{},{d}", num(t), num(x[0]), num(x[1]), num(x[2]));
    };
    let mut x = x0;
    row(&mut csv, 0, &x, None);
    let mut worst = 0.0f64;
    for k in 1..=a.steps {
        let d = if k % a.audit_every == 0 {
            Some(step_defect(&s, &x, &cfg)?)
        } else {
            None
        };
        x = s.step(&x, &cfg)?;
        if let Some(d) = d {
            worst = worst.max(d);
        }
        row(&mut csv, k, &x, d);
    }
    write_file(&a.out, &csv)?;
    Ok(format!(
        "wrote {} steps of {} to {} (max audited defect {})\n",
        a.steps,
        s.kind(),
        a.out.display(),
        num(worst)
    ))
}

pub fn cmd_classify(a: &ClassifyArgs) -> Result<String, CliError> {
    let sigma = parse_perm("sigma", &a.sigma)?;
    let big_sigma = parse_perm("Sigma", &a.big_sigma)?;
    let c = classify(sigma, big_sigma);
    let tau = if c.tau.is_identity() {
        "identity".to_string()
    } else {
        c.tau.to_string()
    };
    let mut s = String::new();
    let _ = writeln!(s, "class: {}, tau: {tau}", c.label.name());
    let _ = writeln!(s, "sign(tau): {}", c.sign());
    let _ = writeln!(
        s,
        "reduction: rho = {}, adjoint: {}",
        c.relabel, c.adjoint_flag
    );
    s.push_str(&render_conditions(sigma, big_sigma));
    if !s.ends_with('\n') {
        s.push('\n');
    }
    Ok(s)
}

/// Summary line and exit code of a volume check.
pub fn cmd_volcheck(a: &VolcheckArgs) -> Result<(String, i32), CliError> {
    let rc = RunConfig::new(&a.scheme, a.h)?;
    let [lo, hi] = parse_list::<2>("box", &a.bounds)?;
    if lo >= hi {
        return Err(config(format!("--box needs lo < hi, got {lo},{hi}")));
    }
    if a.samples == 0 {
        return Err(config("--samples must be at least 1"));
    }
    let s = rc.handle(rc.h)?;
    let pts = random_points(a.samples, a.seed, lo, hi);
    let audit = volume_audit(&s, &pts, None, &rc.solver)?;
    if let Some(out) = &a.out {
        write_file(out, &audit.to_csv())?;
    }
    let mut line = format!(
        "scheme={} samples={} max_defect={} mean_defect={}",
        s.kind(),
        a.samples,
        num(audit.max),
        num(audit.mean)
    );
    let mut code = 0;
    if let Some(limit) = a.fail_above {
        if audit.max > limit {
            let _ = write!(line, " FAIL above {}", num(limit));
            code = 1;
        }
    }
    line.push('\n');
    Ok((line, code))
}

pub fn cmd_order(a: &OrderArgs) -> Result<String, CliError> {
    let rc = RunConfig::new(&a.scheme, a.h0)?;
    let t = positive("T", a.t)?;
    if a.levels == 0 {
        return Err(config("--levels must be at least 1"));
    }
    let x0 = V3::from(parse_list::<3>("x0", &a.x0)?);
    let hs: Vec<f64> = (0..a.levels).map(|k| rc.h / 2f64.powi(k as i32)).collect();
    for &h in &hs {
        let n = (t / h).round();
        if n < 1.0 || (n * h - t).abs() > 1e-9 * t {
            return Err(config(format!("step {h} does not divide T = {t}")));
        }
    }
    let report = observed_order(|h| make_scheme(rc.scheme, &rc.field, h), &x0, t, &hs, &rc.solver)?;
    write_file(&a.out, &report.render())?;
    Ok(match report.slope {
        Some(p) => format!("scheme={} slope={p:.6}\n", rc.scheme),
        None => format!("scheme={} error={} (one level, no slope)\n", rc.scheme, num(report.errors[0])),
    })
}

/// Runs a parsed command, writing its summary to `out`. Returns the exit
/// code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let (text, code) = match &cli.command {
        Command::Integrate(a) => (cmd_integrate(a)?, 0),
        Command::Classify(a) => (cmd_classify(a)?, 0),
        Command::Volcheck(a) => cmd_volcheck(a)?,
        Command::Order(a) => (cmd_order(a)?, 0),
    };
    out.write_all(text.as_bytes())
        .map_err(|e| config(format!("cannot write output: {e}")))?;
    Ok(code)
}

/// Parses `args` and runs, printing errors to stderr. Returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            eprintln!("E_CONFIG: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
