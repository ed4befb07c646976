//! qhd: run, extract, boost-check and ensemble over the 1+1D Dirac
//! hydrodynamics toolkit.
//!
//! Exit codes: 0 ok, 1 invariant failure, 2 config error, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use qhd_cli::run::{
    boost_check, cap_threads_from_env, default_outdir, ensemble, exit_code_for, extract,
    load_config_file, run, FIELD_NAMES,
};

const USAGE: &str = "\
usage:
  qhd run <config> [-o <outdir>]
  qhd extract <trajectory.qhd1> --dump-field <NAME> [-o <outdir>]
  qhd boost-check <trajectory.qhd1> --beta <B> [--t-prime <T>] [-o <outdir>]
  qhd ensemble <config> -n <N> [-o <outdir>]

environment:
  QHD_THREADS   caps the worker pool for ensemble parallelism

field names for extract: see --dump-field (rho, j3, qdot, ...)
exit codes: 0 ok, 1 invariant failure, 2 config error, 3 I/O error";

struct Args {
    positional: Vec<String>,
    outdir: Option<PathBuf>,
    dump_field: Option<String>,
    beta: Option<f64>,
    t_prime: Option<f64>,
    n: Option<usize>,
}

fn parse_args(argv: &[String]) -> Result<Args, String> {
    let mut args = Args {
        positional: Vec::new(),
        outdir: None,
        dump_field: None,
        beta: None,
        t_prime: None,
        n: None,
    };
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        let mut take = |name: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("{name} needs a value"))
        };
        match arg.as_str() {
            "-o" | "--outdir" => args.outdir = Some(PathBuf::from(take("-o")?)),
            "--dump-field" => args.dump_field = Some(take("--dump-field")?),
            "--beta" => {
                args.beta = Some(
                    take("--beta")?
                        .parse()
                        .map_err(|_| "--beta needs a number".to_string())?,
                )
            }
            "--t-prime" => {
                args.t_prime = Some(
                    take("--t-prime")?
                        .parse()
                        .map_err(|_| "--t-prime needs a number".to_string())?,
                )
            }
            "-n" => {
                args.n = Some(
                    take("-n")?
                        .parse()
                        .map_err(|_| "-n needs a positive integer".to_string())?,
                )
            }
            other if other.starts_with('-') => return Err(format!("unknown flag {other}")),
            other => args.positional.push(other.to_string()),
        }
    }
    Ok(args)
}

fn main() -> ExitCode {
    cap_threads_from_env();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = argv.first().cloned() else {
        eprintln!("{USAGE}");
        return ExitCode::from(2);
    };
    let args = match parse_args(&argv[1..]) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let outcome = match command.as_str() {
        "run" => {
            let Some(config_path) = args.positional.first().map(PathBuf::from) else {
                eprintln!("error: run needs a config path\n{USAGE}");
                return ExitCode::from(2);
            };
            let outdir = args
                .outdir
                .unwrap_or_else(|| default_outdir(&config_path));
            load_config_file(&config_path).and_then(|cfg| run(&cfg, &outdir))
        }
        "extract" => {
            let (Some(traj), Some(field)) =
                (args.positional.first().map(PathBuf::from), args.dump_field)
            else {
                eprintln!(
                    "error: extract needs a trajectory path and --dump-field NAME\n\
                     field names: {FIELD_NAMES}\n{USAGE}"
                );
                return ExitCode::from(2);
            };
            let outdir = args.outdir.unwrap_or_else(|| default_outdir(&traj));
            extract(&traj, &field, &outdir)
        }
        "boost-check" => {
            let (Some(traj), Some(beta)) = (args.positional.first().map(PathBuf::from), args.beta)
            else {
                eprintln!("error: boost-check needs a trajectory path and --beta B\n{USAGE}");
                return ExitCode::from(2);
            };
            let outdir = args.outdir.unwrap_or_else(|| default_outdir(&traj));
            boost_check(&traj, beta, args.t_prime, &outdir)
        }
        "ensemble" => {
            let (Some(config_path), Some(n)) =
                (args.positional.first().map(PathBuf::from), args.n)
            else {
                eprintln!("error: ensemble needs a config path and -n N\n{USAGE}");
                return ExitCode::from(2);
            };
            let outdir = args
                .outdir
                .unwrap_or_else(|| default_outdir(&config_path));
            load_config_file(&config_path).and_then(|cfg| ensemble(&cfg, n, &outdir))
        }
        other => {
            eprintln!("error: unknown command {other:?}\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match outcome {
        Ok(result) => {
            for line in &result.summary {
                println!("{line}");
            }
            ExitCode::from(result.exit_code as u8)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
