use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use isoscatter::pipeline::{run, Mode, RunConfig};
use isoscatter::{Error, Result};

/// Forward uncertainty quantification and Bayesian shape inversion for
/// acoustic scattering by random sound-soft obstacles.
#[derive(Debug, Parser)]
#[command(name = "isoscatter", version)]
struct Args {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// kl, forward-mean, forward-variance, invert or verify.
    #[arg(long)]
    mode: Mode,

    /// Worker threads.
    #[arg(long, default_value_t = default_threads())]
    threads: usize,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Replaces a named seed, `key=value`; may be repeated.
    #[arg(long = "seed-override", value_name = "KEY=VALUE")]
    seed_override: Vec<String>,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn execute(args: &Args) -> Result<String> {
    let overrides = args
        .seed_override
        .iter()
        .map(|s| RunConfig::parse_seed_override(s))
        .collect::<Result<Vec<_>>>()?;
    let config = match &args.config {
        Some(path) => RunConfig::load(path, &overrides)?,
        None => RunConfig::from_json("{}", &overrides)?,
    };
    if args.threads == 0 {
        return Err(Error::Config("--threads must be positive".into()));
    }
    let outcome = run(&config, args.mode, &args.out, args.threads)?;
    let c = &outcome.manifest.cache;
    Ok(format!(
        "{}\nsolves {}, cache hits {} in memory and {} on disk; outputs in {}",
        outcome.summary,
        c.solves,
        c.memory_hits,
        c.disk_hits,
        args.out.display()
    ))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
