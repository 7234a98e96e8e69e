mod args;
mod cache;
mod commands;
mod report;
mod verify;

use clap::error::ErrorKind;
use clap::Parser;
use std::io::Write;
use std::process::ExitCode;

use args::{Cli, Command};
use cache::{Cache, Lookup};
use lelong_core::LelongError;
use report::Report;

const EXIT_INPUT: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

fn dispatch(cmd: &Command) -> lelong_core::Result<Report> {
    match cmd {
        Command::Exact(a) => commands::exact(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::ScanT(a) => commands::scan_t(a),
        Command::Restrict(a) => commands::restrict(a),
        Command::Bergman(a) => commands::bergman(a),
        Command::Kiselman(a) => commands::kiselman(a),
        Command::Verify(a) => verify::run(a),
        Command::Levelset(a) => commands::levelset(a),
    }
}

fn exit_for(e: &LelongError) -> u8 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERICAL
    }
}

fn run(cli: Cli) -> Result<u8, (u8, String)> {
    #[cfg(feature = "parallel")]
    if cli.io.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.io.threads)
            .build_global()
            .map_err(|e| (EXIT_INPUT, format!("thread pool: {e}")))?;
    }
    let use_cache = (cli.io.cache || cli.io.cache_dir.is_some())
        && !matches!(&cli.command, Command::Bergman(b) if b.dump.is_some());
    let config = serde_json::to_value(&cli.command).expect("serializable");
    let hash = cache::config_hash(&config);
    let cache = use_cache.then(|| Cache::new(cache::resolve_dir(cli.io.cache_dir.as_deref())));

    let cached = match &cache {
        Some(c) => match c.lookup(&hash) {
            Lookup::Hit(r) => Some(r),
            Lookup::Miss => None,
            Lookup::Corrupt(msg) => {
                eprintln!("warning: ignoring cache entry ({msg}); recomputing");
                None
            }
        },
        None => None,
    };
    let report = match cached {
        Some(r) => r,
        None => {
            let r = dispatch(&cli.command).map_err(|e| (exit_for(&e), format!("error: {e}")))?;
            if let Some(c) = &cache {
                if let Err(e) = c.store(&hash, &r) {
                    eprintln!("warning: could not write cache entry: {e}");
                }
            }
            r
        }
    };

    let text = report.render(cli.io.format);
    match &cli.io.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| (EXIT_INPUT, format!("{}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(if report.violations > 0 { EXIT_VIOLATION } else { 0 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INPUT),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}
