use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use traj_assess::report::{export, parse_indicators, run_pipeline, AssessConfig};
use traj_assess::{Error, ErrorKind};

/// Compute trajectory dataset complexity indicators and export a report.
#[derive(Debug, Parser)]
#[command(name = "assess", version)]
struct Args {
    /// JSON config describing the dataset and indicator parameters.
    #[arg(long)]
    config: PathBuf,
    /// `all` or a comma-separated subset of
    /// predictability,regularity,context,overall. Overrides the config.
    #[arg(long)]
    indicators: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "assess-report")]
    out: PathBuf,
    /// Run seed.
    #[arg(long, env = "ASSESS_SEED")]
    seed: Option<u64>,
    /// Trajlet stride in seconds.
    #[arg(long)]
    stride: Option<f64>,
    /// Disable kernel pruning and the pairwise neighborhood cutoff.
    #[arg(long)]
    exact: bool,
    /// Only log warnings and errors; print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Internal => 3,
    }
}

fn run(args: &Args) -> Result<(), Error> {
    let mut cfg = AssessConfig::from_file(&args.config)?;
    if let Some(spec) = &args.indicators {
        cfg.indicators = parse_indicators(spec)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(stride) = args.stride {
        cfg.preprocess.stride = stride;
    }
    if args.exact {
        cfg.exact();
    }
    let report = run_pipeline(&cfg)?;
    let written = export(&report, &args.out)?;
    if !args.quiet {
        let m = &report.metadata;
        println!(
            "{}: {} agents, {} trajlets ({} non-static)",
            m.name, m.agent_count, m.trajlet_count, m.non_static_count
        );
        for p in written {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if args.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                let s_msg = s.to_string();
                if !msg.contains(&s_msg) {
                    msg.push_str(&format!(": {s_msg}"));
                }
                src = s.source();
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
