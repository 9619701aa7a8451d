//! Batch meshing front end.

use clap::Parser;
use mesh2d::config::Config;
use mesh2d::pipeline::run_pipeline;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "mesh",
    about = "2D triangular mesh generation on signed distance fields"
)]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Override the total number of mesh points.
    #[arg(long = "ntotal")]
    n_total: Option<usize>,
    /// Override the meshing algorithm (dm|cvd|hybrid).
    #[arg(long = "alg")]
    algorithm: Option<String>,
    /// Override the number of worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long = "out")]
    out_dir: Option<PathBuf>,
    /// Override the output interval (0 none, -1 first+final, m>0 every m).
    #[arg(long = "output-interval", allow_hyphen_values = true)]
    output_interval: Option<i64>,
}

fn run(cli: Cli) -> Result<(), mesh2d::Error> {
    let mut cfg = Config::parse_file(&cli.config)?;
    if let Some(n) = cli.n_total {
        cfg.set("n_total", &n.to_string())?;
    }
    if let Some(alg) = &cli.algorithm {
        cfg.set("algorithm", alg)?;
    }
    if let Some(t) = cli.threads {
        cfg.set("threads", &t.to_string())?;
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(iv) = cli.output_interval {
        cfg.set("output_interval", &iv.to_string())?;
    }
    cfg.validate()?;

    let start = Instant::now();
    let (state, report) = run_pipeline(&cfg)?;
    let elapsed = start.elapsed().as_secs_f64();

    println!(
        "meshed {} points, {} valid triangles",
        state.n_current(),
        state.triangles.len()
    );
    println!(
        "{} iterations ({} triangulations) in {elapsed:.3} s",
        report.iterations, report.triangulations
    );
    match report.termination {
        Some(t) => println!("terminated by {t:?}"),
        None => println!("stopped at the iteration cap"),
    }
    print!("{}", report.stats.to_text());
    if cfg.output_interval != 0 {
        println!("outputs in {}", cfg.output_dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
