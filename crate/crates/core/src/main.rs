use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use memcontend::hw::{affinity::pin_current_thread, calibrate_max_rate};
use memcontend::report::{self, spec::parse_size, Backend, ExperimentSpec, WorkloadKey};
use memcontend::workload::{AccessOrder, TrafficPattern};
use memcontend::Result;

#[derive(Parser)]
#[command(name = "memcontend", version, about = "Shared-memory interference characterization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix described by a spec file.
    Run {
        spec: PathBuf,
        /// Override the spec's backend.
        #[arg(long)]
        backend: Option<Backend>,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the unthrottled access rate of a pattern on this host.
    Calibrate {
        #[arg(long)]
        pattern: TrafficPattern,
        /// Footprint, e.g. 512KB or 4MB.
        #[arg(long, value_parser = parse_size_arg)]
        fp: u64,
        #[arg(long, default_value = "sequential")]
        order: AccessOrder,
        /// Pin the calibration thread to this core.
        #[arg(long)]
        core: Option<usize>,
    },
    /// Redraw charts from a results CSV.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Baseline task as PATTERN:SIZE; defaults to the first READ_MISS task.
        #[arg(long)]
        baseline: Option<WorkloadKey>,
    },
}

fn parse_size_arg(s: &str) -> std::result::Result<u64, String> {
    parse_size(s).ok_or_else(|| format!("cannot parse size `{s}`"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            spec,
            backend,
            seed,
            out,
        } => {
            let mut spec = ExperimentSpec::from_file(&spec)?;
            if let Some(b) = backend {
                spec.backend = b;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(o) = out {
                spec.output_dir = o;
            }
            spec.validate()?;
            let results = report::run_experiment(&spec)?;
            let written = report::write_outputs(&spec, &results, &spec.output_dir)?;
            for reason in &results.degraded {
                eprintln!("warning: counters unavailable, timing only: {reason}");
            }
            println!("{:<24} {:<24} {:>9} {:>10}", "task", "interference", "region", "max slow");
            for c in &results.curves {
                println!(
                    "{:<24} {:<24} {:>9} {:>10.3}",
                    c.task.to_string() + if c.is_baseline { " *" } else { "" },
                    c.interference.to_string(),
                    c.region.as_str(),
                    c.slowdown.max_value().unwrap_or(f64::NAN)
                );
            }
            let s = &results.summary;
            println!(
                "worst: {} under {} at THR {}%: {:.3}x",
                s.worst.task, s.worst.interference, s.worst.thr_pct, s.worst.slowdown
            );
            if let Some(ratio) = s.underestimation_ratio {
                println!("worst / READ_MISS-only reference: {ratio:.2}x");
            }
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Calibrate {
            pattern,
            fp,
            order,
            core,
        } => {
            let rate = std::thread::spawn(move || {
                if let Some(c) = core {
                    pin_current_thread(c)?;
                }
                calibrate_max_rate(pattern, fp, order)
            })
            .join()
            .expect("calibration thread panicked")?;
            println!("{pattern} {} {order:?}: {rate:.0} accesses/s", report::spec::format_size(fp));
        }
        Command::Plot { csv, out, baseline } => {
            for p in report::plot_csv(&csv, &out, baseline)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
