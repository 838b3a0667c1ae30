//! Per-node pressure time series: ingestion, synthesis and per-time-step framing.
//!
//! A trace holds `T * M` samples for one node. Time step `t` (1-based) owns
//! the `M` consecutive samples `(t - 1) * M .. t * M`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sampling interval in seconds: two hours spread over 380 samples.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 19.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PressureTrace {
    pub node_id: String,
    samples: Vec<f64>,
    /// Informational only; never used in computation.
    pub sample_interval: f64,
}

impl PressureTrace {
    pub fn new(node_id: impl Into<String>, samples: Vec<f64>, sample_interval: f64) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pressure trace"));
        }
        Ok(Self {
            node_id: node_id.into(),
            samples,
            sample_interval,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of whole time steps of width `m` in this trace.
    pub fn steps(&self, m: usize) -> usize {
        if m == 0 {
            0
        } else {
            self.samples.len() / m
        }
    }

    /// Samples of time step `t` (1-based).
    pub fn frame(&self, t: usize, m: usize) -> Result<SignalFrame> {
        let steps = self.steps(m);
        if t == 0 || t > steps {
            return Err(Error::OutOfRange {
                what: "time step",
                value: t,
                min: 1,
                max: steps,
            });
        }
        Ok(SignalFrame {
            ts_index: t,
            values: self.samples[(t - 1) * m..t * m].to_vec(),
        })
    }

    /// Last sample of time step `t - 1`, i.e. the sample preceding frame `t`.
    pub fn prev_sample(&self, t: usize, m: usize) -> Option<f64> {
        if t <= 1 {
            None
        } else {
            self.samples.get((t - 1) * m - 1).copied()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalFrame {
    pub ts_index: usize,
    pub values: Vec<f64>,
}

impl SignalFrame {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Min/max scaling bounds for one node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
}

impl NormStats {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::NonFinite("normalization bounds"));
        }
        if min >= max {
            return Err(Error::config(format!(
                "normalization needs min < max, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn from_trace(trace: &PressureTrace) -> Result<Self> {
        let min = trace.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = trace.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(min, max).map_err(|_| {
            Error::config(format!(
                "trace for node `{}` is empty or constant and cannot be normalized",
                trace.node_id
            ))
        })
    }

    pub fn normalize_value(&self, v: f64) -> f64 {
        ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }

    pub fn normalize(&self, frame: &SignalFrame) -> Vec<f64> {
        frame.values.iter().map(|&v| self.normalize_value(v)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub alice_node: String,
    pub bob_node: String,
    pub eve_node: String,
    #[serde(default = "default_interval")]
    pub sample_interval: f64,
    /// Fixed bounds per node; nodes without an entry are scaled by the
    /// min/max of their training trace.
    #[serde(default)]
    pub normalization: BTreeMap<String, NormStats>,
}

fn default_interval() -> f64 {
    DEFAULT_SAMPLE_INTERVAL
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            alice_node: "18".into(),
            bob_node: "8".into(),
            eve_node: "eve".into(),
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            normalization: BTreeMap::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let nodes = [&self.alice_node, &self.bob_node, &self.eve_node];
        if nodes.iter().any(|n| n.is_empty()) {
            return Err(Error::config("node ids must be non-empty"));
        }
        if self.alice_node == self.bob_node
            || self.alice_node == self.eve_node
            || self.bob_node == self.eve_node
        {
            return Err(Error::config("alice, bob and eve node ids must be distinct"));
        }
        for (node, stats) in &self.normalization {
            NormStats::new(stats.min, stats.max)
                .map_err(|e| Error::config(format!("node `{node}`: {e}")))?;
        }
        Ok(())
    }

    pub fn nodes(&self) -> [&str; 3] {
        [&self.alice_node, &self.bob_node, &self.eve_node]
    }

    /// Configured bounds for `trace`'s node, else bounds taken from the trace.
    pub fn stats_for(&self, trace: &PressureTrace) -> Result<NormStats> {
        match self.normalization.get(&trace.node_id) {
            Some(s) => NormStats::new(s.min, s.max),
            None => NormStats::from_trace(trace),
        }
    }
}

/// Checks the episode shape shared by every module: `M >= 2`, `T >= 1`.
pub fn check_shape(m: usize, t: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::config(format!("M must be >= 2, got {m}")));
    }
    if t < 1 {
        return Err(Error::config(format!("T must be >= 1, got {t}")));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    node_id: String,
    sample_index: String,
    value: String,
}

/// Reads a `node_id,sample_index,value` CSV and returns the scenario's three
/// nodes, each cut to exactly `t * m` samples.
pub fn load_traces(
    path: impl AsRef<Path>,
    scenario: &ScenarioConfig,
    m: usize,
    t: usize,
) -> Result<BTreeMap<String, PressureTrace>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_traces(file, scenario, m, t)
}

pub fn read_traces<R: std::io::Read>(
    reader: R,
    scenario: &ScenarioConfig,
    m: usize,
    t: usize,
) -> Result<BTreeMap<String, PressureTrace>> {
    check_shape(m, t)?;
    scenario.validate()?;
    let wanted: Vec<&str> = scenario.nodes().to_vec();
    let mut rows: HashMap<String, BTreeMap<u64, f64>> = HashMap::new();
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    for record in csv.records() {
        let record = record?;
        // 1-based, header is line 1
        let line = record.position().map_or(0, |p| p.line());
        let row: TraceRow = record.deserialize(Some(&headers))?;
        if !wanted.contains(&row.node_id.as_str()) {
            continue;
        }
        let index: u64 = row.sample_index.parse().map_err(|_| Error::TraceParse {
            line,
            column: "sample_index".into(),
            message: format!("`{}` is not a non-negative integer", row.sample_index),
        })?;
        let value: f64 = row.value.parse().map_err(|_| Error::TraceParse {
            line,
            column: "value".into(),
            message: format!("`{}` is not a number", row.value),
        })?;
        if !value.is_finite() {
            return Err(Error::TraceParse {
                line,
                column: "value".into(),
                message: "value is not finite".into(),
            });
        }
        if rows
            .entry(row.node_id.clone())
            .or_default()
            .insert(index, value)
            .is_some()
        {
            return Err(Error::TraceParse {
                line,
                column: "sample_index".into(),
                message: format!("duplicate sample {index} for node `{}`", row.node_id),
            });
        }
    }

    let needed = t * m;
    let mut out = BTreeMap::new();
    for node in wanted {
        let samples = rows
            .remove(node)
            .ok_or_else(|| Error::MissingNode(node.to_string()))?;
        // contiguous prefix 0, 1, 2, ...
        let contiguous = samples
            .iter()
            .enumerate()
            .take_while(|(i, (idx, _))| *i as u64 == **idx)
            .count();
        if contiguous < needed {
            return Err(Error::TraceLength {
                node: node.to_string(),
                expected: needed,
                actual: contiguous,
            });
        }
        let values: Vec<f64> = samples.into_values().take(needed).collect();
        out.insert(
            node.to_string(),
            PressureTrace::new(node, values, scenario.sample_interval)?,
        );
    }
    Ok(out)
}

pub fn write_traces<'a>(
    path: impl AsRef<Path>,
    traces: impl IntoIterator<Item = &'a PressureTrace>,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_traces_to(std::io::BufWriter::new(file), traces)
}

pub fn write_traces_to<'a, W: std::io::Write>(
    writer: W,
    traces: impl IntoIterator<Item = &'a PressureTrace>,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["node_id", "sample_index", "value"])?;
    for trace in traces {
        for (i, v) in trace.samples.iter().enumerate() {
            // `{:?}` on f64 prints the shortest string that parses back exactly
            csv.write_record([trace.node_id.clone(), i.to_string(), format!("{v:?}")])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Generator parameters for synthetic correlated pressure traces.
///
/// Every node reads `base_level + offset + gain * latent + local noise`.
/// Alice and Bob share one latent: a diurnal sinusoid plus a Gaussian random
/// walk with step `sigma_shared`. Eve's latent is
/// `(1 - eve_decorrelation) * shared + eve_decorrelation * independent`, where
/// the independent latent is a second random walk with the same step size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    /// Diurnal period in samples (one day at 19 s per sample).
    pub period: f64,
    pub diurnal_amplitude: f64,
    pub base_level: f64,
    pub alice_gain: f64,
    pub alice_offset: f64,
    pub bob_gain: f64,
    pub bob_offset: f64,
    pub eve_gain: f64,
    pub eve_offset: f64,
    pub sigma_shared: f64,
    pub sigma_local: f64,
    pub eve_decorrelation: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            period: 86_400.0 / DEFAULT_SAMPLE_INTERVAL,
            diurnal_amplitude: 2.0,
            base_level: 50.0,
            alice_gain: 1.0,
            alice_offset: 4.0,
            bob_gain: 0.8,
            bob_offset: -3.0,
            eve_gain: 0.9,
            eve_offset: 1.0,
            sigma_shared: 0.3,
            sigma_local: 0.005,
            eve_decorrelation: 1.0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.period,
            self.diurnal_amplitude,
            self.base_level,
            self.alice_gain,
            self.alice_offset,
            self.bob_gain,
            self.bob_offset,
            self.eve_gain,
            self.eve_offset,
            self.sigma_shared,
            self.sigma_local,
            self.eve_decorrelation,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("synthesis parameters must be finite"));
        }
        if self.period <= 0.0 {
            return Err(Error::config("synth period must be positive"));
        }
        if self.sigma_shared < 0.0 || self.sigma_local < 0.0 {
            return Err(Error::config("noise standard deviations must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.eve_decorrelation) {
            return Err(Error::config(format!(
                "eve_decorrelation must lie in [0, 1], got {}",
                self.eve_decorrelation
            )));
        }
        Ok(())
    }
}

/// Synthesizes Alice, Bob and Eve traces of `t * m` samples each.
/// Deterministic under `seed`.
pub fn synth_traces(
    scenario: &ScenarioConfig,
    params: &SynthParams,
    m: usize,
    t: usize,
    seed: u64,
) -> Result<BTreeMap<String, PressureTrace>> {
    check_shape(m, t)?;
    scenario.validate()?;
    params.validate()?;

    let len = t * m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = rng.gen::<f64>() * 2.0 * PI;
    let d = params.eve_decorrelation;

    let mut alice = Vec::with_capacity(len);
    let mut bob = Vec::with_capacity(len);
    let mut eve = Vec::with_capacity(len);
    let (mut shared_walk, mut indep_walk) = (0.0f64, 0.0f64);
    for k in 0..len {
        let z_shared: f64 = rng.sample(StandardNormal);
        let z_indep: f64 = rng.sample(StandardNormal);
        let e: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        if k > 0 {
            shared_walk += params.sigma_shared * z_shared;
            indep_walk += params.sigma_shared * z_indep;
        }
        let diurnal = params.diurnal_amplitude * (2.0 * PI * k as f64 / params.period + phase).sin();
        let shared = diurnal + shared_walk;
        let eve_latent = (1.0 - d) * shared + d * indep_walk;

        let level = params.base_level;
        alice.push(level + params.alice_offset + params.alice_gain * shared + params.sigma_local * e[0]);
        bob.push(level + params.bob_offset + params.bob_gain * shared + params.sigma_local * e[1]);
        eve.push(level + params.eve_offset + params.eve_gain * eve_latent + params.sigma_local * e[2]);
    }

    let interval = scenario.sample_interval;
    let mut out = BTreeMap::new();
    for (node, samples) in scenario.nodes().into_iter().zip([alice, bob, eve]) {
        out.insert(node.to_string(), PressureTrace::new(node, samples, interval)?);
    }
    Ok(out)
}
