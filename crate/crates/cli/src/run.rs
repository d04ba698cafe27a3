use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;

use memsyield::montecarlo::{self, MonteCarloResult};
use memsyield::sensitivity::{self, SensitivityReport};
use memsyield::sweep::{self, YieldMap};
use memsyield::worstcase::{self, Method, WorstCaseResult};
use memsyield::{DesignProblem, Error, MetricSet};
use serde::Serialize;

use crate::args::{Command, Format, OracleConfig, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'static str,
    input: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    result: T,
}

#[derive(Serialize)]
struct CheckOut<'a> {
    problem: &'a DesignProblem,
    nominal_metrics: MetricSet,
}

#[derive(Serialize)]
struct Interval {
    level: f64,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct McOut {
    #[serde(flatten)]
    result: MonteCarloResult,
    confidence_interval: Interval,
}

#[derive(Serialize)]
struct OracleOut {
    beta: f64,
    grid_error: f64,
    radius: f64,
    points_per_axis: usize,
}

#[derive(Serialize)]
struct WcdSpecOut {
    #[serde(flatten)]
    result: WorstCaseResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleOut>,
}

#[derive(Serialize)]
struct WcdOut {
    method: Method,
    per_spec: Vec<WcdSpecOut>,
    min_spec_yield: f64,
}

enum Output {
    Check(DesignProblem, MetricSet),
    Sens(SensitivityReport),
    Mc(McOut),
    Wcd(WcdOut),
    Sweep(YieldMap),
}

enum Failure {
    Usage(String),
    Parse(String),
    Numerical(String),
}

fn analysis_failure(e: Error) -> Failure {
    match e {
        Error::InvalidArgument(_) | Error::UnknownParameter(_) | Error::UnknownMetric(_) => Failure::Usage(e.to_string()),
        _ => Failure::Numerical(e.to_string()),
    }
}

/// Runs a validated configuration and returns the process exit code.
pub fn execute(config: &RunConfig) -> i32 {
    let result = match config.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(config)),
            Err(e) => Err(Failure::Usage(format!("cannot start {n} worker threads: {e}"))),
        },
        None => run(config),
    };
    let (code, msg) = match result {
        Ok(()) => return EXIT_OK,
        Err(Failure::Usage(m)) => (EXIT_USAGE, m),
        Err(Failure::Parse(m)) => (EXIT_PARSE, m),
        Err(Failure::Numerical(m)) => (EXIT_NUMERICAL, m),
    };
    eprintln!("memsyield: {msg}");
    code
}

fn run(config: &RunConfig) -> Result<(), Failure> {
    let path = config.input.display().to_string();
    let text = fs::read_to_string(&config.input).map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
    let problem = memsyield::parse(&text).map_err(|e| Failure::Parse(format!("{path}:{}:{}: {}", e.line, e.column, e.kind)))?;

    let mut seed = None;
    let output = match &config.command {
        Command::Check => {
            let nominal = problem
                .evaluate_metrics(&problem.nominal_point())
                .map_err(analysis_failure)?;
            Output::Check(problem, nominal)
        }
        Command::Sens { scheme, rel_step } => {
            Output::Sens(sensitivity::jacobian(&problem, *scheme, *rel_step).map_err(analysis_failure)?)
        }
        Command::Mc { samples, seed: given, level } => {
            // 53 bits so the seed survives a round trip through an f64-based JSON reader.
            let s = given.unwrap_or_else(|| rand::random::<u64>() >> 11);
            seed = Some(s);
            let result = montecarlo::run_monte_carlo_with(&problem, *samples, s, montecarlo::Retention::Never)
                .map_err(analysis_failure)?;
            let (lo, hi) = montecarlo::confidence_interval(&result, *level).map_err(analysis_failure)?;
            Output::Mc(McOut { result, confidence_interval: Interval { level: *level, lo, hi } })
        }
        Command::Wcd { method, max_iter, tol, oracle } => Output::Wcd(run_wcd(&problem, *method, *max_iter, *tol, oracle.as_ref())?),
        Command::Sweep { x, y } => {
            Output::Sweep(sweep::run_sweep(&problem, x.clone(), y.clone()).map_err(analysis_failure)?)
        }
    };

    let rendered = match config.format {
        Format::Json => render_json(config.command.name(), &path, seed, &output),
        Format::Csv => render_csv(seed, &output),
    };
    match &config.out {
        Some(out) => fs::write(out, rendered).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(rendered.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
        }
    }
}

fn run_wcd(
    problem: &DesignProblem,
    method: Method,
    max_iter: usize,
    tol: f64,
    oracle: Option<&OracleConfig>,
) -> Result<WcdOut, Failure> {
    let summary = worstcase::analyze(problem, method, max_iter, tol).map_err(analysis_failure)?;
    let dims = problem.statistical_indices().len();
    let per_spec = summary
        .per_spec
        .into_iter()
        .map(|result| {
            let oracle = oracle
                .map(|o| {
                    worstcase::wcd_brute_oracle(problem, &result.spec, o.radius, o.points).map(|beta| OracleOut {
                        beta,
                        grid_error: worstcase::oracle_grid_error(o.radius, o.points, dims),
                        radius: o.radius,
                        points_per_axis: o.points,
                    })
                })
                .transpose()
                .map_err(analysis_failure)?;
            Ok(WcdSpecOut { result, oracle })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok(WcdOut { method: summary.method, per_spec, min_spec_yield: summary.min_spec_yield })
}

fn render_json(command: &'static str, input: &str, seed: Option<u64>, output: &Output) -> String {
    fn env<T: Serialize>(command: &'static str, input: &str, seed: Option<u64>, result: T) -> String {
        let mut s = serde_json::to_string_pretty(&Envelope { schema: SCHEMA_VERSION, command, input, seed, result })
            .expect("results serialize to JSON");
        s.push('\n');
        s
    }
    match output {
        Output::Check(p, m) => env(command, input, seed, CheckOut { problem: p, nominal_metrics: m.clone() }),
        Output::Sens(r) => env(command, input, seed, r),
        Output::Mc(r) => env(command, input, seed, r),
        Output::Wcd(r) => env(command, input, seed, r),
        Output::Sweep(r) => env(command, input, seed, r),
    }
}

fn render_csv(seed: Option<u64>, output: &Output) -> String {
    let mut out = String::new();
    match output {
        Output::Check(p, m) => {
            out.push_str("parameter,nominal,distribution,std_dev\n");
            for param in p.parameters() {
                let kind = serde_json::to_value(param.dist)
                    .ok()
                    .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
                    .unwrap_or_default();
                let kind = if kind == "fixed" { "none".to_string() } else { kind };
                let _ = writeln!(out, "{},{:e},{},{:e}", param.name, param.nominal, kind, param.dist.std_dev());
            }
            out.push_str("\nmetric,nominal_value\n");
            for (metric, v) in m.iter() {
                let _ = writeln!(out, "{metric},{v:e}");
            }
        }
        Output::Sens(r) => {
            out.push_str("metric,parameter,jacobian,scaled,rank\n");
            for (i, metric) in r.metrics.iter().enumerate() {
                for (j, param) in r.parameters.iter().enumerate() {
                    let rank = r.ranking[i].iter().position(|n| n == param).map_or(0, |k| k + 1);
                    let _ = writeln!(out, "{metric},{param},{:e},{:e},{rank}", r.jacobian[i][j], r.scaled[i][j]);
                }
            }
        }
        Output::Mc(r) => {
            let m = &r.result;
            let ci = &r.confidence_interval;
            out.push_str("n_samples,n_pass,yield_estimate,seed,eval_failures,level,ci_lo,ci_hi\n");
            let _ = writeln!(
                out,
                "{},{},{:e},{},{},{:e},{:e},{:e}",
                m.n_samples,
                m.n_pass,
                m.yield_estimate,
                seed.unwrap_or(m.seed),
                m.eval_failures,
                ci.level,
                ci.lo,
                ci.hi
            );
        }
        Output::Wcd(r) => {
            out.push_str("spec,beta,linear_yield,iterations,oracle_beta");
            if let Some(first) = r.per_spec.first() {
                for name in &first.result.parameters {
                    let _ = write!(out, ",u_{name},x_{name}");
                }
            }
            out.push('\n');
            for s in &r.per_spec {
                let w = &s.result;
                let oracle = s.oracle.as_ref().map(|o| format!("{:e}", o.beta)).unwrap_or_default();
                let _ = write!(out, "{},{:e},{:e},{},{oracle}", w.spec, w.beta, w.linear_yield, w.iterations);
                for (u, x) in w.worst_case_u.iter().zip(&w.worst_case_x) {
                    let _ = write!(out, ",{u:e},{x:e}");
                }
                out.push('\n');
            }
        }
        Output::Sweep(m) => out.push_str(&m.to_csv()),
    }
    out
}
