//! `memsyield`: command-line front end for the yield analyses.
//!
//! Exit codes: 0 success, 2 usage error, 3 `.sam` parse error, 4 numerical
//! failure (degenerate gradient, non-convergence, unevaluable design).

mod args;
mod run;

fn main() {
    let config = match args::parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    std::process::exit(run::execute(&config));
}
