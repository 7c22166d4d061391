//! Command-line interface: seeded runs, seed batches, GA evolution, and
//! post-hoc metrics summaries.
//!
//! Outputs are a per-step CSV and a versioned JSON summary per run (plus a
//! tag-event CSV for foraging scenarios). The output directory defaults to
//! the current directory and can be overridden with `--out` or the
//! `HETEROSIM_OUT` environment variable.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use heterosim::engine;
use heterosim::evolution::{ga_run, GaConfig};
use heterosim::metrics::MetricsLog;
use heterosim::scenario;

#[derive(Parser)]
#[command(name = "heterosim", version, about = "Heterogeneous robot team simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write step CSV + summary JSON.
    Run {
        /// Scenario config (JSON).
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: HETEROSIM_OUT or the current dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario over a seed range, one summary row per seed.
    Batch {
        config: PathBuf,
        /// Inclusive seed range, e.g. 1..10
        #[arg(long)]
        seeds: String,
        /// Run seeds concurrently (results are independent of parallelism).
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve the forager genome with the GA and write genome + history.
    Evolve {
        /// GA config (JSON); missing fields take documented defaults.
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a previously written step CSV.
    Metrics {
        log: PathBuf,
        /// Print the JSON summary of the rows.
        #[arg(long)]
        summary: bool,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("HETEROSIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_run_outputs(dir: &Path, stem: &str, log: &MetricsLog) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output dir {}", dir.display()))?;
    let steps = dir.join(format!("{stem}_steps.csv"));
    let summary = dir.join(format!("{stem}_summary.json"));
    fs::write(&steps, log.to_step_csv())?;
    fs::write(&summary, log.to_summary_json())?;
    if !log.tag_events.is_empty() || log.summary.scenario == "foraging" {
        fs::write(dir.join(format!("{stem}_tags.csv")), log.to_tag_csv())?;
    }
    Ok((steps, summary))
}

fn parse_seed_range(s: &str) -> Result<(u64, u64)> {
    let (a, b) = s
        .split_once("..")
        .with_context(|| format!("seed range must look like 1..10, got {s}"))?;
    let a: u64 = a.trim().parse().context("bad range start")?;
    let b: u64 = b.trim().parse().context("bad range end")?;
    if b < a {
        bail!("empty seed range {s}");
    }
    Ok((a, b))
}

fn run_one(config: &Path, seed: Option<u64>) -> Result<MetricsLog> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading {}", config.display()))?;
    let mut cfg: heterosim::scenario::ScenarioConfig = serde_json::from_str(&text)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let resolved = scenario::resolve(cfg)?;
    Ok(engine::run(&resolved)?)
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let log = run_one(&config, seed)?;
            let dir = out_dir(out);
            let stem = format!("run_seed{}", log.summary.seed);
            let (steps, summary) = write_run_outputs(&dir, &stem, &log)?;
            println!("wrote {}", steps.display());
            println!("wrote {}", summary.display());
            println!("{}", log.to_summary_json().trim_end());
            Ok(())
        }
        Command::Batch { config, seeds, parallel, out } => {
            let (a, b) = parse_seed_range(&seeds)?;
            let seed_list: Vec<u64> = (a..=b).collect();
            let run_seed = |&seed: &u64| -> Result<(u64, MetricsLog)> {
                Ok((seed, run_one(&config, Some(seed))?))
            };
            let mut results: Vec<(u64, MetricsLog)> = if parallel {
                seed_list.par_iter().map(run_seed).collect::<Result<_>>()?
            } else {
                seed_list.iter().map(run_seed).collect::<Result<_>>()?
            };
            results.sort_by_key(|(seed, _)| *seed);

            let dir = out_dir(out);
            fs::create_dir_all(&dir)?;
            let mut rows = String::from(
                "seed,steps,coverage_final,connected_fraction,sinr_ok_fraction,tags_per_hour,terminal\n",
            );
            let mut summaries = Vec::new();
            for (seed, log) in &results {
                write_run_outputs(&dir, &format!("run_seed{seed}"), log)?;
                let s = &log.summary;
                rows.push_str(&format!(
                    "{},{},{:.6},{:.6},{},{},{}\n",
                    seed,
                    s.steps,
                    s.coverage_final,
                    s.connected_fraction,
                    s.sinr_ok_fraction.map_or("".into(), |v| format!("{v:.6}")),
                    s.tags_per_hour.map_or("".into(), |v| format!("{v:.6}")),
                    s.terminal
                ));
                summaries.push(s.clone());
            }
            let batch_csv = dir.join("batch_summaries.csv");
            fs::write(&batch_csv, rows)?;
            fs::write(
                dir.join("batch_summaries.json"),
                serde_json::to_string_pretty(&summaries)? + "\n",
            )?;
            println!("wrote {} ({} seeds)", batch_csv.display(), results.len());
            Ok(())
        }
        Command::Evolve { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let ga_config: GaConfig = serde_json::from_str(&text)?;
            let result = ga_run(&ga_config)?;
            let dir = out_dir(out);
            fs::create_dir_all(&dir)?;
            let genome_path = dir.join("best_genome.json");
            fs::write(&genome_path, serde_json::to_string_pretty(&result)? + "\n")?;
            println!("wrote {}", genome_path.display());
            println!(
                "best fitness {:.3} tags/hour over {} generations",
                result.best_fitness,
                result.history.best.len()
            );
            Ok(())
        }
        Command::Metrics { log, summary } => {
            let text = fs::read_to_string(&log)
                .with_context(|| format!("reading {}", log.display()))?;
            let rows = MetricsLog::parse_step_csv(&text)?;
            let agg = MetricsLog::summarize_rows(&rows);
            if summary {
                println!("{}", serde_json::to_string_pretty(&agg)?);
            } else {
                println!(
                    "rows: {} connected_fraction: {:.4} coverage_final: {:.4}",
                    agg.rows, agg.connected_fraction, agg.coverage_final
                );
            }
            Ok(())
        }
    }
}
