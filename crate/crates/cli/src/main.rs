use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use zkscatter_cli::{config, run, CliError, Subcommand};

/// Numerical experiments for final-state scattering of the symmetric
/// Zakharov-Kuznetsov equation.
#[derive(Debug, Parser)]
#[command(name = "zkscatter", version)]
struct Args {
    #[arg(value_enum)]
    command: Subcommand,
    /// TOML or JSON experiment configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the file; repeatable.
    #[arg(short = 'o', long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("ZK_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| CliError::Config(format!("ZK_THREADS must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(CliError::Config("ZK_THREADS must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let sub = args.command;
    let result = init_threads().and_then(|_| config::load(args.config.as_deref(), &args.overrides)).and_then(|cfg| {
        let start = std::time::Instant::now();
        let s = run(sub, &cfg);
        log::info!("{} finished in {:.2?}", sub.name(), start.elapsed());
        s
    });
    match result {
        Ok(summary) => {
            for c in &summary.checks {
                println!("{:<6} {:<32} {:>14.6e}  {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.value, c.rule);
            }
            if summary.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
