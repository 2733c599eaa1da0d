//! The `htail` command line.
//!
//! Exit status: 0 success, 1 evidence failure under `--assert`, 2 input
//! error or refused premise, 3 numerical failure (partial results are
//! still written).
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use htail_core::convolve::{mc_product_tail, product_tail_detail, sum_self_tail_with};
use htail_core::diagnostics::{
    check_condition, classify, theorem11_verdict, Agreement, Branch, ClassId, ConditionId, ConditionParams, DiagConfig,
    Overall,
};
use htail_core::dist::{make_family, FamilySpec};
use htail_core::grid::EvalGrid;
use htail_core::math::log_sum_exp;
use htail_core::risk::{
    discounted_loss_tails, divergence_guard, finite_ruin_asymptotic_report, finite_ruin_mc, finite_ruin_mc_grid,
    infinite_lower_bound, DiscountLaws, Horizon, LowerBoundOptions, RiskModel,
};
use htail_core::{Error, LogTailValue};
use serde::Serialize;

use crate::exec::{RayonExecutor, THREADS_ENV};
use crate::input::{load, Estimator, InputError, ModelFile, SCHEMA_VERSION};
use crate::report::{
    csv_files, BoundResult, ConvolveResult, ErrorInfo, EvalResult, Output, PointFailure, ProductPoint, Report, RuinPoint,
    RuinResult, SelfConvResult, Status, TailPoint,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Heavy-tail toolkit: product and sum convolution tails, class
/// diagnostics, closure conditions and a discounted ruin model.
#[derive(Clone, Debug, Parser)]
#[command(name = "htail", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// JSON file with diagnostic settings (grid, thresholds, quad, product, class).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub grid_x0: Option<f64>,
    #[arg(long, global = true)]
    pub grid_rho: Option<f64>,
    #[arg(long, global = true)]
    pub grid_count: Option<usize>,
    /// Relative tolerance of every tail quadrature.
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_panels: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to $HTAIL_THREADS, else all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Exit 1 when a `check` or `verdict` reports FAILS_EVIDENCE.
    #[arg(long, global = true)]
    pub assert: bool,
    /// Print the table of defaults and exit.
    #[arg(long)]
    pub show_defaults: bool,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// ln P(X > x) of one law.
    Eval {
        #[arg(long)]
        law: PathBuf,
        /// Evaluation points; the configured grid when absent.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// ln P(XY > x) for independent X ~ F, Y ~ G.
    Convolve {
        #[arg(long = "F")]
        f: PathBuf,
        #[arg(long = "G")]
        g: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        /// Also estimate each point by Monte Carlo with this many pairs.
        #[arg(long)]
        mc_pairs: Option<u64>,
    },
    /// ln P(X_1 + ... + X_k > x) for i.i.d. copies.
    Selfconv {
        #[arg(long)]
        law: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Class membership evidence: L_gamma, S, D, R or A.
    Classify {
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        class: String,
    },
    /// One named closure condition: EQ11, EQ12, EQ13, EQ14, T1A_D, T31, T32.
    Check {
        #[arg(long)]
        cond: String,
        #[arg(long = "F")]
        f: PathBuf,
        #[arg(long = "G")]
        g: PathBuf,
        /// JSON file with probe sets (b_values, t_values, extra_d, a, grid).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Whether the product of F in S with G is subexponential.
    Verdict {
        #[arg(long = "F")]
        f: PathBuf,
        #[arg(long = "G")]
        g: PathBuf,
    },
    /// Finite-horizon ruin probability: Monte Carlo and the tail sum.
    Ruin {
        #[arg(long)]
        model: PathBuf,
        /// Horizon; overrides the model file.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        #[arg(long)]
        paths: Option<u64>,
        /// Attach the domination and closure evidence.
        #[arg(long)]
        evidence: bool,
    },
    /// Infinite-horizon lower-bound series with its remainder certificate.
    Bound {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Paths for the ruin estimate at the truncation horizon; 0 skips it.
        #[arg(long)]
        paths: Option<u64>,
    },
}

/// Why a run stopped early, with whatever was computed before.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub error: ErrorInfo,
    pub partial: Option<Box<Output>>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            status: Status::InputError,
            error: ErrorInfo {
                message: message.into(),
                partial_log: None,
            },
            partial: None,
        }
    }

    fn with_partial(mut self, o: Output) -> Self {
        self.partial = Some(Box::new(o));
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::NumericalFailure | Status::Partial => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter { .. } => Status::InputError,
            e if e.is_numerical() => Status::NumericalFailure,
            _ => Status::Refused,
        };
        Failure {
            status,
            error: error_info(&e),
            partial: None,
        }
    }
}

fn error_info(e: &Error) -> ErrorInfo {
    ErrorInfo {
        message: e.to_string(),
        partial_log: match e {
            Error::NotConverged { partial_log, .. } => Some(LogTailValue::from_ln(*partial_log)),
            _ => None,
        },
    }
}

/// Everything `--show-defaults` prints.
#[derive(Clone, Debug, Serialize)]
pub struct Defaults {
    pub schema_version: u32,
    pub threads_env: &'static str,
    pub diagnostics: DiagConfig,
    pub condition: ConditionParams,
    pub lower_bound: LowerBoundOptions,
    pub estimator: Estimator,
    pub convolve_mc_seed: u64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            schema_version: SCHEMA_VERSION,
            threads_env: THREADS_ENV,
            diagnostics: DiagConfig::default(),
            condition: ConditionParams::default(),
            lower_bound: LowerBoundOptions::default(),
            estimator: Estimator::default(),
            convolve_mc_seed: 0,
        }
    }
}

impl RunConfig {
    /// Diagnostic settings: the `--config` file (or defaults) with the
    /// command-line overrides applied.
    pub fn diag_config(&self) -> Result<DiagConfig, Failure> {
        let mut cfg: DiagConfig = match &self.config {
            Some(p) => load(p)?,
            None => DiagConfig::default(),
        };
        if self.grid_x0.is_some() || self.grid_rho.is_some() || self.grid_count.is_some() {
            let (x0, rho, count) = match (&cfg.grid, EvalGrid::default()) {
                (EvalGrid::Geometric { x0, rho, count }, _) => (*x0, *rho, *count),
                (_, EvalGrid::Geometric { x0, rho, count }) => (x0, rho, count),
                _ => unreachable!("default grid is geometric"),
            };
            cfg.grid = EvalGrid::geometric(
                self.grid_x0.unwrap_or(x0),
                self.grid_rho.unwrap_or(rho),
                self.grid_count.unwrap_or(count),
            );
        }
        if let Some(t) = self.rel_tol {
            cfg.quad.rel_tol = t;
        }
        if let Some(m) = self.max_panels {
            cfg.quad.max_panels = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn executor(&self) -> Result<RayonExecutor, Failure> {
        let n = match self.threads {
            Some(n) => n,
            None => RayonExecutor::default_threads().map_err(|e| Failure::input(e.to_string()))?,
        };
        RayonExecutor::new(n).map_err(|e| Failure::input(e.to_string()))
    }
}

fn load_law(p: &Path) -> Result<(FamilySpec, htail_core::dist::Distribution), Failure> {
    let spec: FamilySpec = load(p)?;
    let d = make_family(&spec).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
    Ok((spec, d))
}

fn x_values(given: &[f64], cfg: &DiagConfig) -> Result<Vec<f64>, Failure> {
    let xs = if given.is_empty() { cfg.grid.points() } else { given.to_vec() };
    if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Failure::input("x values must be finite and strictly increasing"));
    }
    Ok(xs)
}

/// Splits per-point results into values and failures; a non-numerical
/// failure aborts.
fn split_points<T>(xs: &[f64], res: Vec<Result<T, Error>>) -> Result<(Vec<T>, Vec<PointFailure>), Failure> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (x, r) in xs.iter().zip(res) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) if e.is_numerical() => failed.push(PointFailure {
                x: *x,
                error: error_info(&e),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    Ok((ok, failed))
}

fn partial_if_failed(failures: &[PointFailure], out: Output) -> Result<Output, Failure> {
    if failures.is_empty() {
        return Ok(out);
    }
    Err(Failure {
        status: Status::Partial,
        error: ErrorInfo {
            message: format!("{} of the requested points failed to converge", failures.len()),
            partial_log: None,
        },
        partial: Some(Box::new(out)),
    })
}

fn load_model(p: &Path) -> Result<(ModelFile, RiskModel), Failure> {
    let file: ModelFile = load(p)?;
    let model = RiskModel::from_spec(&file.spec()).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
    Ok((file, model))
}

/// Runs one command and returns its report payload.
pub fn execute(cfg: &RunConfig, command: &Command, exec: &RayonExecutor) -> Result<Output, Failure> {
    let diag = cfg.diag_config()?;
    match command {
        Command::Eval { law, x } => {
            let (spec, d) = load_law(law)?;
            let xs = x_values(x, &diag)?;
            let points = xs
                .iter()
                .map(|&x| TailPoint {
                    x,
                    value: d.log_sf(x),
                })
                .collect();
            Ok(Output::Eval(EvalResult {
                law: spec,
                label: d.label().to_string(),
                points,
            }))
        }
        Command::Convolve { f, g, x, mc_pairs } => {
            let (fs, fd) = load_law(f)?;
            let (gs, gd) = load_law(g)?;
            let xs = x_values(x, &diag)?;
            let res = exec.map(xs.len(), |i| product_tail_detail(&fd, &gd, xs[i], &diag.quad));
            let (details, failures) = split_points(&xs, res)?;
            let ok_x: Vec<f64> = xs.iter().copied().filter(|x| !failures.iter().any(|f| f.x == *x)).collect();
            let mut points = Vec::with_capacity(details.len());
            for (x, estimate) in ok_x.into_iter().zip(details) {
                let mc = match mc_pairs {
                    Some(n) => Some(mc_product_tail(&fd, &gd, x, *n, cfg.seed.unwrap_or(0), exec)?),
                    None => None,
                };
                points.push(ProductPoint { x, estimate, mc });
            }
            let out = ConvolveResult {
                f: fs,
                g: gs,
                points,
                failures,
            };
            let failures = out.failures.clone();
            partial_if_failed(&failures, Output::Convolve(out))
        }
        Command::Selfconv { law, k, x } => {
            let (spec, d) = load_law(law)?;
            let xs = x_values(x, &diag)?;
            let res: Vec<_> = xs.iter().map(|&x| sum_self_tail_with(&d, *k, x, &diag.quad, exec)).collect();
            let (vals, failures) = split_points(&xs, res)?;
            let ok_x = xs.iter().copied().filter(|x| !failures.iter().any(|f| f.x == *x));
            let points = ok_x.zip(vals).map(|(x, value)| TailPoint { x, value }).collect();
            let out = SelfConvResult {
                law: spec,
                k: *k,
                points,
                failures: failures.clone(),
            };
            partial_if_failed(&failures, Output::Selfconv(out))
        }
        Command::Classify { law, class } => {
            let (_, d) = load_law(law)?;
            let class = ClassId::from_str(class)?;
            Ok(Output::Classify(classify(&d, class, &diag, exec)?))
        }
        Command::Check { cond, f, g, params } => {
            let cond = ConditionId::from_str(cond)?;
            let (_, fd) = load_law(f)?;
            let (_, gd) = load_law(g)?;
            let params: ConditionParams = match params {
                Some(p) => load(p)?,
                None => ConditionParams::default(),
            };
            Ok(Output::Check(check_condition(cond, &fd, &gd, &params, &diag, exec)?))
        }
        Command::Verdict { f, g } => {
            let (_, fd) = load_law(f)?;
            let (_, gd) = load_law(g)?;
            Ok(Output::Verdict(theorem11_verdict(&fd, &gd, &diag, exec)?))
        }
        Command::Ruin {
            model,
            n,
            x,
            paths,
            evidence,
        } => {
            let (file, m) = load_model(model)?;
            let n = match (n, file.horizon) {
                (Some(n), _) => *n,
                (None, Horizon::Finite { n }) => n,
                (None, Horizon::Infinite) => return Err(Failure::input("infinite horizon: pass --n")),
            };
            if n == 0 {
                return Err(Failure::input("n must be >= 1"));
            }
            let xs = x_values(x, &diag)?;
            let paths = paths.unwrap_or(file.estimator.paths);
            let seed = cfg.seed.unwrap_or(file.estimator.seed);
            let mut grid = finite_ruin_mc_grid(&m, n, &xs, paths, seed, exec)?;
            let mc_row = grid.pop().expect("n >= 1");
            let mut out = RuinResult {
                model: file.spec(),
                n,
                points: mc_row
                    .into_iter()
                    .map(|mc| RuinPoint {
                        mc,
                        asymptotic: None,
                        ratio: None,
                    })
                    .collect(),
                evidence: None,
                failures: Vec::new(),
            };
            let laws = match DiscountLaws::build(&m.y, n, &diag.product, &diag.quad, exec) {
                Ok(l) => l,
                Err(e) => return Err(Failure::from(e).with_partial(Output::Ruin(out))),
            };
            let res = exec.map(xs.len(), |i| {
                discounted_loss_tails(&m, &laws, xs[i], &diag.quad)
                    .map(|t| LogTailValue::from_ln(log_sum_exp(t.iter().map(|v| v.ln()))))
            });
            for (p, r) in out.points.iter_mut().zip(res) {
                match r {
                    Ok(a) => {
                        p.asymptotic = Some(a);
                        p.ratio = Some(p.mc.point / a.prob());
                    }
                    Err(e) if e.is_numerical() => out.failures.push(PointFailure {
                        x: p.mc.x,
                        error: error_info(&e),
                    }),
                    Err(e) => return Err(Failure::from(e).with_partial(Output::Ruin(out))),
                }
            }
            if *evidence {
                match finite_ruin_asymptotic_report(&m, n, *xs.last().expect("nonempty"), &diag, exec) {
                    Ok(r) => out.evidence = Some(r),
                    Err(e) => return Err(Failure::from(e).with_partial(Output::Ruin(out))),
                }
            }
            let failures = out.failures.clone();
            partial_if_failed(&failures, Output::Ruin(out))
        }
        Command::Bound {
            model,
            x,
            lambda,
            epsilon,
            paths,
        } => {
            let (file, m) = load_model(model)?;
            let guard = divergence_guard(&m);
            let mut out = BoundResult {
                model: file.spec(),
                guard: guard.clone(),
                bound: None,
                horizon_mc: None,
                mc_over_series: None,
            };
            if !guard.pass {
                return Err(Failure::from(Error::Divergent(guard.reason)).with_partial(Output::Bound(out)));
            }
            let mut opts = LowerBoundOptions::default();
            if let Some(l) = lambda {
                opts.lambda = *l;
            }
            if let Some(e) = epsilon {
                opts.epsilon = *e;
            }
            let b = match infinite_lower_bound(&m, *x, &opts, &diag, exec) {
                Ok(b) => b,
                Err(e) => return Err(Failure::from(e).with_partial(Output::Bound(out))),
            };
            let paths = paths.unwrap_or(file.estimator.paths);
            if paths > 0 {
                let seed = cfg.seed.unwrap_or(file.estimator.seed);
                let r = match finite_ruin_mc(&m, b.i_star, *x, paths, seed, exec) {
                    Ok(r) => r,
                    Err(e) => return Err(Failure::from(e).with_partial(Output::Bound(out))),
                };
                out.mc_over_series = Some(r.point / b.series.prob());
                out.horizon_mc = Some(r);
            }
            out.bound = Some(b);
            Ok(Output::Bound(out))
        }
    }
}

/// Exit status for a successful run.
pub fn success_code(cfg: &RunConfig, out: &Output) -> i32 {
    if !cfg.assert {
        return EXIT_OK;
    }
    let fails = match out {
        Output::Check(r) => r.overall == Overall::FailsEvidence,
        Output::Verdict(v) => {
            v.agreement == Agreement::Disagree
                || matches!(&v.branch, Branch::AtomCondition { report } if report.overall == Overall::FailsEvidence)
        }
        _ => false,
    };
    if fails {
        EXIT_FAILS
    } else {
        EXIT_OK
    }
}

fn emit(cfg: &RunConfig, report: &Report) -> std::io::Result<()> {
    match cfg.format {
        Format::Json => write_to(cfg.out.as_deref(), &report.to_json()),
        Format::Csv => {
            let curves = report.output.as_ref().map(|o| o.curves()).unwrap_or_default();
            match &cfg.out {
                Some(out) => {
                    for (path, body) in csv_files(out, &curves) {
                        std::fs::write(path, body)?;
                    }
                    Ok(())
                }
                None => {
                    let blocks: Vec<String> = curves.iter().map(|c| c.to_csv()).collect();
                    write_to(None, &blocks.join("\n"))
                }
            }
        }
    }
}

fn write_to(out: Option<&Path>, body: &str) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, body),
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(body.as_bytes())?;
            s.flush()
        }
    }
}

/// Runs `cfg` end to end, writing artifacts; returns the exit status.
pub fn run(cfg: &RunConfig) -> i32 {
    if cfg.show_defaults {
        let body = serde_json::to_string_pretty(&Defaults::default()).expect("defaults serialize") + "\n";
        return match write_to(cfg.out.as_deref(), &body) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("htail: {e}");
                EXIT_INPUT
            }
        };
    }
    let Some(command) = &cfg.command else {
        eprintln!("htail: no command given (try --help)");
        return EXIT_INPUT;
    };
    let result = cfg.executor().and_then(|exec| execute(cfg, command, &exec));
    let (report, code) = match result {
        Ok(out) => {
            let code = success_code(cfg, &out);
            (Report::ok(out), code)
        }
        Err(f) => {
            eprintln!("htail: {}", f.error.message);
            let code = f.exit_code();
            (Report::failed(f.status, f.error, f.partial.map(|b| *b)), code)
        }
    };
    if let Err(e) = emit(cfg, &report) {
        eprintln!("htail: cannot write output: {e}");
        return code.max(EXIT_INPUT);
    }
    code
}

pub fn main() -> i32 {
    run(&RunConfig::parse())
}
