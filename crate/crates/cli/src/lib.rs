//! Command-line harness for the `svrg-admm` library.
//!
//! Every command reads a [`spec::RunSpec`] assembled from an optional flat
//! `key = value` config file and `--kebab-case` flag overrides (flags win).
//! Exit codes: 0 success, 1 configuration or input error, 2 divergence.

pub mod commands;
mod error;
pub mod reference_file;
pub mod spec;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};
use svrg_admm::metrics::write_trace_csv;

pub use error::{CliError, CliResult};

use commands::{CompareModel, SweepEntry};
use spec::{RunSpec, SpecPairs, KEYS};

fn spec_args(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(clap::value_parser!(PathBuf))
            .help("flat key = value file; flags override it"),
    );
    KEYS.iter().fold(cmd, |cmd, (key, help)| {
        cmd.arg(
            Arg::new(*key)
                .long(key.replace('_', "-"))
                .value_name("VALUE")
                .help(*help),
        )
    })
}

pub fn command() -> Command {
    Command::new("svrg-admm")
        .about("SVRG-ADMM runs, penalty sweeps, reference solves and hyperparameter advice")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(spec_args(Command::new("advise").about("print theory-based hyperparameters as key=value")))
        .subcommand(spec_args(Command::new("run").about("run the solver and write a CSV trace")))
        .subcommand(
            spec_args(Command::new("rho-sweep").about("run once per penalty value and summarise"))
                .arg(Arg::new("rhos").long("rhos").required(true).value_name("LIST").help("comma-separated penalties"))
                .arg(
                    Arg::new("relative")
                        .long("relative")
                        .action(ArgAction::SetTrue)
                        .help("treat --rhos as multiples of rho*"),
                )
                .arg(
                    Arg::new("out-dir")
                        .long("out-dir")
                        .value_parser(clap::value_parser!(PathBuf))
                        .help("write rho_<i>.csv traces here"),
                ),
        )
        .subcommand(
            spec_args(Command::new("reference").about("high-accuracy batch solve for the R column"))
                .arg(Arg::new("out").long("out").required(true).value_parser(clap::value_parser!(PathBuf)))
                .arg(Arg::new("tol").long("tol").default_value("1e-10").value_parser(clap::value_parser!(f64)))
                .arg(
                    Arg::new("max-iter")
                        .long("max-iter")
                        .default_value("100000")
                        .value_parser(clap::value_parser!(usize)),
                ),
        )
        .subcommand(
            Command::new("gen-tv")
                .about("write synthetic TV regression data (LIBSVM) and a .truth sidecar")
                .arg(Arg::new("n").long("n").required(true).value_parser(clap::value_parser!(usize)))
                .arg(Arg::new("d").long("d").required(true).value_parser(clap::value_parser!(usize)))
                .arg(Arg::new("seed").long("seed").default_value("0").value_parser(clap::value_parser!(u64)))
                .arg(Arg::new("out").long("out").required(true).value_parser(clap::value_parser!(PathBuf))),
        )
        .subcommand(
            spec_args(Command::new("compare").about("convex logistic vs nonconvex sigmoid on one split")).arg(
                Arg::new("variants")
                    .long("variants")
                    .default_value("convex_logistic,nonconvex_sigmoid")
                    .help("comma-separated subset of convex_logistic, nonconvex_sigmoid"),
            ),
        )
}

fn run_spec(m: &ArgMatches) -> CliResult<RunSpec> {
    let mut pairs = SpecPairs::default();
    if let Some(path) = m.get_one::<PathBuf>("config") {
        pairs.read_file(path)?;
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            pairs.set(key, v)?;
        }
    }
    RunSpec::from_pairs(&pairs)
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad number {t:?} in list")))
        })
        .collect()
}

fn write_trace_to(records: &[svrg_admm::TraceRecord], spec: &RunSpec, stdout: &mut dyn Write) -> CliResult<()> {
    match &spec.trace_out {
        Some(path) => commands::write_trace_file(records, path),
        None => Ok(write_trace_csv(records, stdout)?),
    }
}

fn dispatch(m: &ArgMatches, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    match m.subcommand() {
        Some(("advise", sub)) => {
            let report = commands::cmd_advise(&run_spec(sub)?)?;
            commands::write_report(&report, stdout)?;
        }
        Some(("run", sub)) => {
            let spec = run_spec(sub)?;
            let outcome = commands::cmd_run(&spec);
            if let Some(records) = commands::trace_of(&outcome) {
                write_trace_to(records, &spec, stdout)?;
            }
            outcome?;
        }
        Some(("rho-sweep", sub)) => {
            let spec = run_spec(sub)?;
            let values = parse_list(sub.get_one::<String>("rhos").expect("required"))?;
            let entries: Vec<SweepEntry> = commands::cmd_rho_sweep(&spec, &values, sub.get_flag("relative"))?;
            if let Some(dir) = sub.get_one::<PathBuf>("out-dir") {
                std::fs::create_dir_all(dir)?;
                for (i, e) in entries.iter().enumerate() {
                    if let Some(records) = commands::trace_of(&e.outcome) {
                        commands::write_trace_file(records, &commands::sweep_trace_path(dir, i))?;
                    }
                }
            }
            for e in &entries {
                if let Err(err) = &e.outcome {
                    writeln!(stderr, "rho={}: {err}", e.rho)?;
                }
            }
            commands::write_sweep_summary(&entries, stdout)?;
        }
        Some(("reference", sub)) => {
            let spec = run_spec(sub)?;
            let out = sub.get_one::<PathBuf>("out").expect("required");
            let r = commands::cmd_reference(
                &spec,
                *sub.get_one::<f64>("tol").expect("defaulted"),
                *sub.get_one::<usize>("max-iter").expect("defaulted"),
                out,
            )?;
            writeln!(stdout, "quality={:e}\niterations={}", r.quality, r.iterations)?;
        }
        Some(("gen-tv", sub)) => {
            let out = sub.get_one::<PathBuf>("out").expect("required");
            commands::cmd_gen_tv(
                *sub.get_one::<usize>("n").expect("required"),
                *sub.get_one::<usize>("d").expect("required"),
                *sub.get_one::<u64>("seed").expect("defaulted"),
                out,
            )?;
        }
        Some(("compare", sub)) => {
            let spec = run_spec(sub)?;
            let models = sub
                .get_one::<String>("variants")
                .expect("defaulted")
                .split(',')
                .map(CompareModel::parse)
                .collect::<CliResult<Vec<_>>>()?;
            let entries = commands::cmd_compare(&spec, &models)?;
            match &spec.trace_out {
                Some(path) => commands::write_compare_csv(&entries, BufWriter::new(File::create(path)?))?,
                None => commands::write_compare_csv(&entries, &mut *stdout)?,
            }
            for e in &entries {
                let err = e.test_error.map(|v| v.to_string()).unwrap_or_else(|| "na".into());
                writeln!(stderr, "variant={} test_error={err}", e.model.name())?;
            }
        }
        _ => unreachable!("subcommand_required"),
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match dispatch(&matches, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
