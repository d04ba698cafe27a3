use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use memsyield::sensitivity::{Scheme, DEFAULT_REL_STEP};
use memsyield::sweep::Axis;
use memsyield::worstcase::Method;

#[derive(Debug, Parser)]
#[command(name = "memsyield", version, about = "Parametric yield analysis of .sam design descriptions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Design description (.sam).
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write results here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for mc and sweep (results do not depend on it).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Parse and validate a design; print its parameters and specs.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Sensitivity Jacobian at the nominal point.
    Sens {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SchemeArg::Central)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = DEFAULT_REL_STEP, value_parser = parse_rel_step)]
        rel_step: f64,
    },
    /// Monte Carlo yield estimate.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        /// Random seed; chosen at random and reported when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Confidence level of the Wilson interval.
        #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
        level: f64,
    },
    /// Worst-case distance per specification.
    Wcd {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = MethodArg::Relinearized)]
        method: MethodArg,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        max_iter: u64,
        #[arg(long, default_value_t = 1e-9, value_parser = parse_positive)]
        tol: f64,
        /// Also run the grid-search oracle (at most 3 statistical parameters).
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 5.0, value_parser = parse_positive)]
        oracle_radius: f64,
        #[arg(long, default_value_t = 501, value_parser = clap::value_parser!(u64).range(11..))]
        oracle_points: u64,
    },
    /// Two-parameter design-space sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name:min:max:n`
        #[arg(long, value_parser = parse_axis)]
        x: Axis,
        /// `name:min:max:n`
        #[arg(long, value_parser = parse_axis)]
        y: Axis,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Central,
    Forward,
    Analytic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Linear,
    Relinearized,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{s}` is not a finite number"))
}

fn parse_rel_step(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 0.1 {
        Ok(v)
    } else {
        Err("must be in (0, 0.1]".into())
    }
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must be in (0, 1)".into())
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be positive".into())
    }
}

/// `name:min:max:n`.
pub fn parse_axis(s: &str) -> Result<Axis, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [name, min, max, n] = parts[..] else {
        return Err(format!("axis `{s}` is not of the form name:min:max:n"));
    };
    let n: usize = n.parse().map_err(|_| format!("`{n}` is not a point count"))?;
    Axis::new(name, parse_f64(min)?, parse_f64(max)?, n).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub radius: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Check,
    Sens { scheme: Scheme, rel_step: f64 },
    Mc { samples: u64, seed: Option<u64>, level: f64 },
    Wcd { method: Method, max_iter: usize, tol: f64, oracle: Option<OracleConfig> },
    Sweep { x: Axis, y: Axis },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Sens { .. } => "sens",
            Command::Mc { .. } => "mc",
            Command::Wcd { .. } => "wcd",
            Command::Sweep { .. } => "sweep",
        }
    }
}

/// A fully validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: PathBuf,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (common, command) = match cli.command {
        Cmd::Check { common } => (common, Command::Check),
        Cmd::Sens { common, scheme, rel_step } => {
            let scheme = match scheme {
                SchemeArg::Central => Scheme::Central,
                SchemeArg::Forward => Scheme::Forward,
                SchemeArg::Analytic => Scheme::Analytic,
            };
            (common, Command::Sens { scheme, rel_step })
        }
        Cmd::Mc { common, samples, seed, level } => (common, Command::Mc { samples, seed, level }),
        Cmd::Wcd { common, method, max_iter, tol, oracle, oracle_radius, oracle_points } => {
            let method = match method {
                MethodArg::Linear => Method::Linear,
                MethodArg::Relinearized => Method::Relinearized,
            };
            let oracle = oracle.then_some(OracleConfig { radius: oracle_radius, points: oracle_points as usize });
            (common, Command::Wcd { method, max_iter: max_iter as usize, tol, oracle })
        }
        Cmd::Sweep { common, x, y } => (common, Command::Sweep { x, y }),
    };
    Ok(RunConfig {
        command,
        input: common.input,
        format: common.format,
        out: common.out,
        threads: common.threads.map(|t| t as usize),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::error::ErrorKind;

    fn parse(line: &str) -> Result<RunConfig, clap::Error> {
        parse_args(std::iter::once("memsyield").chain(line.split_whitespace()))
    }

    #[test]
    fn sens_flags() {
        let c = parse("sens design.sam --scheme central --rel-step 1e-6").unwrap();
        assert_eq!(c.command, Command::Sens { scheme: Scheme::Central, rel_step: 1e-6 });
        assert_eq!(c.input, PathBuf::from("design.sam"));
        assert_eq!(c.format, Format::Json);
        assert!(parse("sens design.sam --rel-step 0.5").is_err());
    }

    #[test]
    fn mc_flags() {
        let c = parse("mc design.sam --samples 100000 --seed 42").unwrap();
        assert_eq!(c.command, Command::Mc { samples: 100_000, seed: Some(42), level: 0.95 });
        let e = parse("mc design.sam --samples 0").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("--samples"), "{e}");
        assert_eq!(parse("mc design.sam --level 1").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn usage_errors_exit_two() {
        for line in ["frobnicate x.sam", "mc", "mc x.sam --bogus", "sweep x.sam --x w:1:2 --y l:1:2:3", "mc x.sam --threads 0"] {
            let e = parse(line).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{line}: {e}");
        }
        assert_eq!(parse("mc x.sam --bogus").unwrap_err().kind(), ErrorKind::UnknownArgument);
    }

    #[test]
    fn sweep_axes() {
        let c = parse("sweep x.sam --x w:1e-6:3e-6:21 --y l:100e-6:300e-6:11 --format csv --threads 4").unwrap();
        match c.command {
            Command::Sweep { x, y } => {
                assert_eq!(x, Axis::new("w", 1e-6, 3e-6, 21).unwrap());
                assert_eq!(y.n, 11);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.threads, Some(4));
        assert!(parse_axis("w:2:1:5").is_err());
        assert!(parse_axis("w:1:2:1").is_err());
        assert!(parse_axis("w:a:2:5").is_err());
    }

    #[test]
    fn wcd_flags() {
        let c = parse("wcd x.sam --method linear --oracle --oracle-points 101").unwrap();
        assert_eq!(
            c.command,
            Command::Wcd {
                method: Method::Linear,
                max_iter: 100,
                tol: 1e-9,
                oracle: Some(OracleConfig { radius: 5.0, points: 101 })
            }
        );
        assert!(parse("wcd x.sam --oracle-points 5").is_err());
    }
}
