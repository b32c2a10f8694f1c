use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use cafda_core::config::RunConfig;
use cafda_core::datapool::write_dataset;
use cafda_core::harness::{
    aggregate_replications, config_digest, export_curves, final_summary, read_curves, replication_seeds,
    run_replications, write_log, CurveTable, FinalSummary,
};
use cafda_core::prepare::{prepare, RawDataset};
use cafda_core::service::{self, AppState};
use cafda_core::{Error, ErrorCategory};

#[derive(Parser)]
#[command(name = "cafda", version, about = "Reward-maximizing fraud triage experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy for the configured replications.
    Run {
        #[arg(long, short)]
        config: PathBuf,
        /// Override a configuration key, e.g. `--set cafda.k0=0.7`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, env = "CAFDA_OUTPUT_DIR", default_value = "runs")]
        output_dir: PathBuf,
    },
    /// Rank the strategies of one or more run directories by final mean reward.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "comparison.csv")]
        output: PathBuf,
    },
    /// Convert a raw benchmark file into the canonical CSV layout.
    PrepareData {
        /// shuttle, covtype or creditcard
        name: String,
        /// Raw file, or a directory holding the usual file names.
        raw: PathBuf,
        out: PathBuf,
    },
    /// Serve the analyst-in-the-loop HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Persist sessions here and recover them on start-up.
        #[arg(long, env = "CAFDA_STATE_DIR")]
        state_dir: Option<PathBuf>,
        /// Static files (e.g. a browser console) served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run {
            config,
            overrides,
            output_dir,
        } => cmd_run(&config, &overrides, &output_dir),
        Command::Compare { dirs, output } => cmd_compare(&dirs, &output),
        Command::PrepareData { name, raw, out } => cmd_prepare(&name, &raw, &out),
        Command::Serve {
            addr,
            state_dir,
            static_dir,
        } => cmd_serve(addr, state_dir, static_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()).map(Error::category) {
        Some(ErrorCategory::Usage) => 1,
        Some(ErrorCategory::Data) => 2,
        _ => 3,
    }
}

fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    // A relative dataset path in the file is relative to the file itself.
    if let Some(p) = &cfg.dataset_path {
        if p.is_relative() && !p.to_string_lossy().starts_with("synthetic:") {
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.dataset_path = Some(base.join(p));
        }
    }
    for o in overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn cmd_run(config_path: &Path, overrides: &[String], out: &Path) -> Result<()> {
    let cfg = load_config(config_path, overrides)?;
    let dataset = Arc::new(cfg.load_dataset()?);
    log::info!("{}", dataset.descriptor);
    create_dir(out)?;
    fs::write(out.join("effective.cfg"), cfg.dump()).map_err(|e| Error::io(out.join("effective.cfg"), e))?;

    let seeds = replication_seeds(&cfg);
    let started = Instant::now();
    let mut table = CurveTable::default();
    let mut runs_meta = Vec::new();
    for &policy in &cfg.strategies {
        let t0 = Instant::now();
        let runs = run_replications(Arc::clone(&dataset), &cfg, policy, &seeds)
            .with_context(|| format!("running {policy}"))?;
        let log_dir = out.join("logs").join(policy.name());
        create_dir(&log_dir)?;
        for run in &runs {
            write_log(&run.records, log_dir.join(format!("seed-{}.jsonl", run.seed)))?;
            if run.truncated {
                log::warn!("{policy} seed {}: pool exhausted after {} steps", run.seed, run.records.len());
            }
            runs_meta.push(json!({
                "policy": policy.name(),
                "seed": run.seed,
                "config_digest": run.config_digest,
                "steps": run.records.len(),
                "truncated": run.truncated,
                "seconds": run.duration.as_secs_f64(),
            }));
        }
        table.extend(aggregate_replications(policy.name(), &runs)?);
        log::info!("{policy}: {} replications in {:.1}s", runs.len(), t0.elapsed().as_secs_f64());
    }
    export_curves(&table, out.join("curves.csv"))?;
    let summary = final_summary(&table);
    write_summary(&summary, &out.join("summary.csv"))?;

    let started_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "finished_unix": started_at,
        "total_seconds": started.elapsed().as_secs_f64(),
        "dataset": dataset.descriptor,
        "seeds": seeds,
        "policies": cfg.strategies.iter().map(|p| json!({
            "name": p.name(),
            "config_digest": config_digest(&cfg, *p),
        })).collect::<Vec<_>>(),
        "runs": runs_meta,
    });
    let meta_path = out.join("metadata.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))?;

    println!("{:<16} {:>8} {:>12} {:>10}", "strategy", "horizon", "mean", "sd");
    for s in &summary {
        println!("{:<16} {:>8} {:>12.3} {:>10.3}", s.strategy, s.horizon, s.mean, s.sd);
    }
    println!("results written to {}", out.display());
    Ok(())
}

fn write_summary(summary: &[FinalSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    w.write_record(["strategy", "horizon", "mean", "sd", "min", "max"])?;
    for s in summary {
        w.serialize((&s.strategy, s.horizon, s.mean, s.sd, s.min, s.max))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn cmd_compare(dirs: &[PathBuf], output: &Path) -> Result<()> {
    let mut rows = Vec::new();
    let mut horizon: Option<usize> = None;
    for dir in dirs {
        let curves = dir.join("curves.csv");
        if !curves.exists() {
            return Err(Error::io(&curves, std::io::Error::from(std::io::ErrorKind::NotFound)).into());
        }
        let table = read_curves(&curves)?;
        for s in final_summary(&table) {
            match horizon {
                Some(h) if h != s.horizon => return Err(Error::MismatchedHorizons(h, s.horizon).into()),
                _ => horizon = Some(s.horizon),
            }
            rows.push((dir.display().to_string(), s));
        }
    }
    if rows.is_empty() {
        bail!(Error::InvalidConfig("no curves to compare".into()));
    }
    rows.sort_by(|a, b| b.1.mean.total_cmp(&a.1.mean));

    let mut w = csv::Writer::from_path(output).map_err(|e| Error::Csv(e.to_string()))?;
    w.write_record(["rank", "run", "strategy", "horizon", "mean", "sd", "min", "max"])?;
    println!("{:>4} {:<24} {:<16} {:>12} {:>10}", "rank", "run", "strategy", "mean", "sd");
    for (i, (run, s)) in rows.iter().enumerate() {
        w.serialize((i + 1, run, &s.strategy, s.horizon, s.mean, s.sd, s.min, s.max))?;
        println!("{:>4} {:<24} {:<16} {:>12.3} {:>10.3}", i + 1, run, s.strategy, s.mean, s.sd);
    }
    w.flush().map_err(|e| Error::io(output, e))?;
    Ok(())
}

fn cmd_prepare(name: &str, raw: &Path, out: &Path) -> Result<()> {
    let kind: RawDataset = name.parse()?;
    let dataset = prepare(kind, raw)?;
    write_dataset(&dataset, out)?;
    println!("{}", dataset.descriptor);
    Ok(())
}

fn cmd_serve(addr: SocketAddr, state_dir: Option<PathBuf>, static_dir: Option<PathBuf>) -> Result<()> {
    let state = match state_dir {
        Some(dir) => AppState::with_state_dir(dir)?,
        None => AppState::in_memory(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(service::serve(addr, Arc::new(state), static_dir))?;
    Ok(())
}
