//! Run configuration: one TOML document holding the training hyperparameters
//! at top level (`M`, `T`, `gamma`, `n`, `N_mem`, `e_max`, `epsilon`, `rho`,
//! `E`, `lambda`, ...), run settings, and `[scenario]` / `[synth]` tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{KeyEnv, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::signal::{load_traces, synth_traces, PressureTrace, ScenarioConfig, SynthParams};

pub const SEED_ENV: &str = "FD2K_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSettings {
    seed: u64,
    output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    federated_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_every: Option<usize>,
    eval_episodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    traces: Option<PathBuf>,
    scenario: ScenarioConfig,
    synth: SynthParams,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("fd2k-out"),
            federated_dir: None,
            checkpoint_every: None,
            eval_episodes: 27,
            traces: None,
            scenario: ScenarioConfig::default(),
            synth: SynthParams::default(),
        }
    }
}

const RUN_KEYS: [&str; 8] = [
    "seed",
    "output_dir",
    "federated_dir",
    "checkpoint_every",
    "eval_episodes",
    "traces",
    "scenario",
    "synth",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub scenario: ScenarioConfig,
    pub synth: SynthParams,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Spool directory for file-based model exchange; in-process otherwise.
    pub federated_dir: Option<PathBuf>,
    /// Epochs between checkpoints; defaults to `E`.
    pub checkpoint_every: Option<usize>,
    /// Synthetic evaluation episodes (380 key bits each at default shape).
    pub eval_episodes: usize,
    /// Trace file for training; synthesized from `seed` when absent.
    pub traces: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_parts(TrainConfig::default(), RunSettings::default())
    }
}

impl RunConfig {
    fn from_parts(train: TrainConfig, s: RunSettings) -> Self {
        Self {
            train,
            scenario: s.scenario,
            synth: s.synth,
            seed: s.seed,
            output_dir: s.output_dir,
            federated_dir: s.federated_dir,
            checkpoint_every: s.checkpoint_every,
            eval_episodes: s.eval_episodes,
            traces: s.traces,
        }
    }

    fn settings(&self) -> RunSettings {
        RunSettings {
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            federated_dir: self.federated_dir.clone(),
            checkpoint_every: self.checkpoint_every,
            eval_episodes: self.eval_episodes,
            traces: self.traces.clone(),
            scenario: self.scenario.clone(),
            synth: self.synth.clone(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse()?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let (run, train): (toml::Table, toml::Table) =
            table.into_iter().partition(|(k, _)| RUN_KEYS.contains(&k.as_str()));
        let settings: RunSettings = run.try_into()?;
        let train: TrainConfig = train.try_into()?;
        let cfg = Self::from_parts(train, settings);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_table(&self) -> Result<toml::Table> {
        let mut table = toml::Table::try_from(&self.train)?;
        let settings = toml::Table::try_from(self.settings())?;
        // plain values first so the tables render after them
        let (plain, nested): (BTreeMap<_, _>, BTreeMap<_, _>) =
            settings.into_iter().partition(|(_, v)| !v.is_table());
        table.extend(plain);
        table.extend(nested);
        Ok(table)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(&self.to_table()?)?)
    }

    /// Applies `key=value` overrides, where `value` is a TOML literal (bare
    /// words are taken as strings) and dotted keys reach into tables.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut table = self.to_table()?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override `{item}` is not key=value")))?;
            let value = parse_literal(raw.trim());
            let path: Vec<&str> = key.trim().split('.').collect();
            let (last, parents) = path.split_last().expect("split yields one item");
            let mut slot = &mut table;
            for p in parents {
                slot = slot
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()))
                    .as_table_mut()
                    .ok_or_else(|| Error::config(format!("`{p}` is not a table")))?;
            }
            slot.insert(last.to_string(), value);
        }
        *self = Self::from_table(table)?;
        Ok(())
    }

    /// Honors `FD2K_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.scenario.validate()?;
        self.synth.validate()?;
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes must be >= 1"));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::config("checkpoint_every must be >= 1"));
        }
        Ok(())
    }

    pub fn checkpoint_interval(&self) -> usize {
        self.checkpoint_every.unwrap_or(self.train.fed_every)
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            m: self.train.m,
            t: self.train.t,
            lambda: self.train.lambda,
        }
    }

    /// Alice's, Bob's and Eve's training traces, from `traces` or
    /// synthesized under `seed`.
    pub fn training_traces(&self) -> Result<[PressureTrace; 3]> {
        let (m, t) = (self.train.m, self.train.t);
        let mut map = match &self.traces {
            Some(path) => load_traces(path, &self.scenario, m, t)?,
            None => synth_traces(&self.scenario, &self.synth, m, t, self.seed)?,
        };
        let mut take = |node: &str| map.remove(node).ok_or_else(|| Error::MissingNode(node.to_string()));
        Ok([
            take(&self.scenario.alice_node)?,
            take(&self.scenario.bob_node)?,
            take(&self.scenario.eve_node)?,
        ])
    }

    pub fn build_env(&self) -> Result<KeyEnv> {
        let [a, b, _] = self.training_traces()?;
        let stats = [self.scenario.stats_for(&a)?, self.scenario.stats_for(&b)?];
        KeyEnv::new(a, b, stats, self.train.m, self.train.t, self.train.lambda)
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
