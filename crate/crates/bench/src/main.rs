use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rehmc::experiment::Provenance;
use rehmc_core::TargetDensity;
use rehmc::{io, BenchError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rehmc", version, about = "Recycled HMC and NUTS benchmark campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and write its draws.
    Sample(Common),
    /// Compare plain and recycled arms.
    Bench(Common),
    /// Recycle-count sweep.
    Sweep(Common),
    /// Mass-matrix tuning with and without recycled draws.
    TuneCompare(Common),
    /// Long NUTS chain summarizing the target.
    Reference(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Output directory; defaults to the configured one, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), BenchError> {
    let mut config = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, out))
}

fn sidecar(out: &Path, config: &ExperimentConfig, step_size: f64, tau: Option<f64>) -> Result<(), BenchError> {
    io::write_json(
        &out.join("config.json"),
        &Provenance {
            config,
            step_size,
            tau,
            crate_version: env!("CARGO_PKG_VERSION"),
        },
    )
}

fn run(command: Command) -> Result<(), BenchError> {
    match command {
        Command::Sample(c) => {
            let (config, out) = load(&c)?;
            let (r, batches) = rehmc::sample_chain(&config)?;
            io::create_dir(&out)?;
            let d = r.model.dim();
            let mut header: Vec<String> = ["iteration", "kind", "slot", "weight"].map(String::from).to_vec();
            header.extend((0..d).map(|i| format!("theta_{i}")));
            let mut rows = Vec::new();
            for (t, b) in batches.iter().enumerate() {
                let mut row = vec![t.to_string(), "next".into(), "0".into(), "1".into()];
                row.extend(b.next.theta().iter().map(f64::to_string));
                rows.push(row);
                for draw in &b.recycled {
                    let mut row = vec![t.to_string(), "recycled".into(), draw.slot.to_string(), draw.weight.to_string()];
                    row.extend(draw.theta.iter().map(f64::to_string));
                    rows.push(row);
                }
            }
            io::write_table(&out.join("draws.csv"), &header, &rows)?;
            sidecar(&out, &config, r.step_size, r.tau)
        }
        Command::Bench(c) => {
            let (config, out) = load(&c)?;
            let pool = rehmc::thread_pool(c.workers)?;
            match rehmc::run_experiment(&config, &pool) {
                Ok(report) => {
                    report.write(&out, "report")?;
                    sidecar(&out, &config, report.step_size, report.tau)
                }
                Err(e) => Err(write_abort(&out, e)),
            }
        }
        Command::Sweep(c) => {
            let (config, out) = load(&c)?;
            let pool = rehmc::thread_pool(c.workers)?;
            match rehmc::run_recycle_count_sweep(&config, &pool) {
                Ok(report) => {
                    report.write(&out)?;
                    let first = &report.reports[0].1;
                    sidecar(&out, &config, first.step_size, first.tau)?;
                    match report.smallest_within_5pct {
                        Some(k) => println!("smallest K within 5% of full recycling: {k}"),
                        None => println!("no K within 5% of full recycling"),
                    }
                    Ok(())
                }
                Err(e) => Err(write_abort(&out, e)),
            }
        }
        Command::TuneCompare(c) => {
            let (config, out) = load(&c)?;
            let pool = rehmc::thread_pool(c.workers)?;
            let report = rehmc::run_tuning_comparison(&config, &pool)?;
            report.write(&out)?;
            sidecar(&out, &config, 0.0, None)?;
            println!("recycled-tuning arm wins {:.0}% of replications", 100.0 * report.recycled_win_fraction);
            Ok(())
        }
        Command::Reference(c) => {
            let (config, out) = load(&c)?;
            config.validate()?;
            let model = rehmc::model::Model::build(&config.target)?;
            let extra: Vec<_> = config.statistics.iter().filter_map(|s| s.scalar()).collect();
            let theta0 = vec![0.0; model.dim()];
            let reference = rehmc::run_reference_chain(&model, theta0, config.reference_length, config.seed, &extra)?;
            if let Some(g) = model.as_gaussian() {
                let z = reference.max_gaussian_z(g);
                println!("largest deviation from analytic truth: {z:.2} standard errors");
            }
            reference.write(&out)?;
            sidecar(&out, &config, reference.step_size, None)
        }
    }
}

/// Persists the arm diagnostics of a divergence abort before reporting it.
fn write_abort(out: &Path, e: BenchError) -> BenchError {
    if let BenchError::Divergence { arms, .. } = &e {
        if io::create_dir(out).is_ok() {
            let _ = io::write_json(&out.join("divergence.json"), arms);
        }
    }
    e
}
