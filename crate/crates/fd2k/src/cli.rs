//! Command-line front end: `simulate`, `train`, `evaluate`, `nist`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error,
//! 3 failed randomness check.

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{write_artifacts, Evaluator};
use crate::env::EpochMetrics;
use crate::federated::SpoolDirExchange;
use crate::nn::Mlp;
use crate::randomness::{run_suite, suite_passes, write_report_csv, BitSequence};
use crate::signal::{load_traces, write_traces};
use crate::training::Trainer;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fd2k", version, about = "Federated reinforcement-learned key generation from correlated sensor signals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed (after FD2K_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Config override, repeatable, e.g. `--set e_max=100 --set synth.sigma_local=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize Alice, Bob and Eve traces.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trace file to write; defaults to `<out>/traces.csv`.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Train both agents with federated actor averaging.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        e_max: Option<usize>,
        /// Trace file; synthesized from the seed when omitted.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Exchange actors through files in this directory.
        #[arg(long)]
        federated_dir: Option<PathBuf>,
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Generate keys with trained actors and compare Alice-Bob against Alice-Eve.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Directory holding `actor_A.bin` and `actor_B.bin`; defaults to `<out>/models`.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Evaluate one episode on this trace file instead of synthetic episodes.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the randomness test suite on an ASCII 0/1 bitstream.
    Nist {
        bitstream: PathBuf,
        /// Also write the report CSV here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

pub fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Simulate { common, file } => {
            let cfg = resolve(&common, &[])?;
            simulate(&cfg, file)
        }
        Command::Train {
            common,
            e_max,
            traces,
            federated_dir,
            resume,
        } => {
            let mut extra = Vec::new();
            if let Some(e) = e_max {
                extra.push(format!("e_max={e}"));
            }
            let mut cfg = resolve(&common, &extra)?;
            if traces.is_some() {
                cfg.traces = traces;
            }
            if federated_dir.is_some() {
                cfg.federated_dir = federated_dir;
            }
            train(&cfg, resume.as_deref())
        }
        Command::Evaluate {
            common,
            models,
            traces,
            episodes,
        } => {
            let mut extra = Vec::new();
            if let Some(n) = episodes {
                extra.push(format!("eval_episodes={n}"));
            }
            let cfg = resolve(&common, &extra)?;
            let models = models.unwrap_or_else(|| cfg.output_dir.join("models"));
            evaluate(&cfg, &models, traces.as_deref())
        }
        Command::Nist { bitstream, out } => nist(&bitstream, out.as_deref()),
    }
}

/// File, then `FD2K_SEED`, then `--set`, then dedicated flags.
fn resolve(common: &Common, extra: &[String]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    cfg.apply_overrides(&common.set)?;
    cfg.apply_overrides(extra)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::config(format!("output directory {} not writable: {e}", dir.display())))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig, file: Option<PathBuf>) -> Result<i32> {
    echo_config(cfg, &cfg.output_dir)?;
    let traces = crate::signal::synth_traces(&cfg.scenario, &cfg.synth, cfg.train.m, cfg.train.t, cfg.seed)?;
    let path = file.unwrap_or_else(|| cfg.output_dir.join("traces.csv"));
    write_traces(&path, traces.values())?;
    println!("wrote {}", path.display());
    println!("node,samples,mean,std,min,max");
    for tr in traces.values() {
        let s = tr.samples();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let std = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{},{},{mean:.4},{std:.4},{min:.4},{max:.4}", tr.node_id, s.len());
    }
    Ok(EXIT_OK)
}

pub fn train(cfg: &RunConfig, resume: Option<&Path>) -> Result<i32> {
    let out = &cfg.output_dir;
    echo_config(cfg, out)?;
    let env = cfg.build_env()?;
    let mut trainer = match resume {
        Some(dir) => Trainer::resume(cfg.train.clone(), env, dir)?,
        None => Trainer::new(cfg.train.clone(), env, cfg.seed)?,
    };
    if let Some(dir) = &cfg.federated_dir {
        trainer = trainer.with_exchange(Box::new(SpoolDirExchange::new(dir)?));
    }
    let metrics_path = out.join("metrics.csv");
    let append = resume.is_some() && metrics_path.exists();
    let mut metrics = std::io::BufWriter::new(
        OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&metrics_path)?,
    );
    if !append {
        writeln!(metrics, "{}", EpochMetrics::CSV_HEADER)?;
    }
    let every = cfg.checkpoint_interval();
    let checkpoint_dir = out.join("checkpoint");
    trainer.train(|m, t| {
        writeln!(metrics, "{}", m.csv_row())?;
        if m.epoch % every == 0 {
            metrics.flush()?;
            t.save_checkpoint(&checkpoint_dir)?;
            eprintln!(
                "epoch {:>5}  reward/step {:.3}  kar {:.3}  mask {:.3}  noise {:.4}",
                m.epoch,
                m.mean_reward(),
                m.mean_kar,
                m.mask_utilization,
                m.noise_scale
            );
        }
        Ok(())
    })?;
    metrics.flush()?;
    trainer.save_checkpoint(out.join("models"))?;
    println!("trained {} epochs; models in {}", trainer.epoch(), out.join("models").display());
    Ok(EXIT_OK)
}

fn load_model(path: PathBuf) -> Result<Mlp> {
    if !path.is_file() {
        return Err(Error::MissingModel(path));
    }
    Mlp::load(path)
}

pub fn evaluate(cfg: &RunConfig, models: &Path, traces: Option<&Path>) -> Result<i32> {
    let dir = cfg.output_dir.join("eval");
    echo_config(cfg, &dir)?;
    let evaluator = Evaluator {
        alice_actor: load_model(models.join("actor_A.bin"))?,
        bob_actor: load_model(models.join("actor_B.bin"))?,
        scenario: cfg.scenario.clone(),
        config: cfg.eval_config(),
    };
    let reports = match traces {
        Some(path) => {
            let map = load_traces(path, &cfg.scenario, cfg.train.m, cfg.train.t)?;
            let [a, b, e] = cfg.scenario.nodes().map(|n| &map[n]);
            vec![evaluator.episode(a, b, e)?]
        }
        None => evaluator.synthetic_episodes(&cfg.synth, cfg.seed, cfg.eval_episodes)?,
    };
    let s = write_artifacts(&dir, &reports)?;
    println!("episodes {}", s.episodes);
    println!("mean KAR(A,B) {:.4}", s.mean_kar_ab);
    println!("mean KAR(A,E) {:.4}", s.mean_kar_ae);
    println!("mean gap {:.4}  min gap {:.4}", s.mean_gap, s.min_gap);
    println!(
        "mask utilization A {:.3}  B {:.3}  E {:.3}",
        s.mask_utilization.alice, s.mask_utilization.bob, s.mask_utilization.eve
    );
    println!("reports in {}", dir.display());
    Ok(EXIT_OK)
}

pub fn nist(bitstream: &Path, out: Option<&Path>) -> Result<i32> {
    let text = std::fs::read_to_string(bitstream)?;
    let seq = BitSequence::from_ascii(&text)?;
    let reports = run_suite(&seq);
    let mut csv = Vec::new();
    write_report_csv(&mut csv, &reports)?;
    std::io::stdout().write_all(&csv)?;
    if let Some(path) = out {
        std::fs::write(path, &csv)?;
    }
    Ok(if suite_passes(&reports) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
