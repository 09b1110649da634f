mod args;
mod commands;
mod output;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use rmf_core::{Error, PrimeTables, Result};

use args::{Cli, Command, Global};

/// 0 ok, 1 a check was violated, 2 bad usage or arguments, 3 resource,
/// quadrature, cache or I/O failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 2,
        _ => 3,
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tables(g: &Global) -> Result<PrimeTables> {
    if let Some(x) = g.x_max {
        if x > g.table_limit {
            return Err(Error::InvalidArgument(format!("x-max {x} exceeds the table limit {}", g.table_limit)));
        }
    }
    let Some(path) = &g.table_cache else {
        commands::progress(g, &format!("building prime tables up to {}", g.table_limit));
        return PrimeTables::build(g.table_limit);
    };
    if path.exists() {
        let t = PrimeTables::load_cache(path, None)?;
        if t.limit() == g.table_limit {
            commands::progress(g, &format!("loaded prime tables from {}", path.display()));
            return Ok(t);
        }
    }
    commands::progress(g, &format!("building prime tables up to {}", g.table_limit));
    let t = PrimeTables::build(g.table_limit)?;
    t.save_cache(path)?;
    Ok(t)
}

fn run(cli: Cli) -> Result<u64> {
    let g = &cli.global;
    if g.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(g.threads)
            .build_global()
            .map_err(|e| Error::Resource(e.to_string()))?;
    }
    if let Command::Report(a) = &cli.command {
        return report::report(g, a);
    }
    let t = tables(g)?;
    match &cli.command {
        Command::Simulate(a) => commands::simulate(g, a, &t),
        Command::OracleCheck(a) => commands::oracle_check(g, a, &t),
        Command::Moments(a) => commands::moments(g, a, &t),
        Command::Euler(a) => commands::euler_cmd(g, a, &t),
        Command::Variance(a) => commands::variance(g, a, &t),
        Command::Report(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("error: kind=usage code=2 message={}", one_line(&e.to_string()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("rmflab: {n} violated rows");
            ExitCode::from(1)
        }
        // A closed downstream pipe (`| head`) is not a failure.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: kind={} code={code} message={}", e.kind(), one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}
