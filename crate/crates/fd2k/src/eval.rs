//! Post-training evaluation. Every party runs only its own actor on only its
//! own trace; the evaluator sees nothing but the finished keys.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::keygen::{binarize, generate_key, kar, FeatureMask, Key, Party};
use crate::nn::Mlp;
use crate::randomness::BitSequence;
use crate::signal::{check_shape, synth_traces, NormStats, PressureTrace, ScenarioConfig, SynthParams};

/// Episode geometry shared by all devices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub m: usize,
    pub t: usize,
    pub lambda: f64,
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        check_shape(self.m, self.t)?;
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::config("lambda must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One party's key generator: its actor, its trace and its own scaling.
#[derive(Clone, Debug)]
pub struct KeyDevice {
    party: Party,
    actor: Mlp,
    trace: PressureTrace,
    stats: NormStats,
    config: EvalConfig,
}

impl KeyDevice {
    pub fn new(party: Party, actor: Mlp, trace: PressureTrace, stats: NormStats, config: EvalConfig) -> Result<Self> {
        config.validate()?;
        if actor.input_dim() != config.m || actor.output_dim() != config.m {
            return Err(Error::Shape(format!(
                "{party} actor maps {} -> {}, episode needs {m} -> {m}",
                actor.input_dim(),
                actor.output_dim(),
                m = config.m
            )));
        }
        if trace.len() < config.m * config.t {
            return Err(Error::TraceLength {
                node: trace.node_id.clone(),
                expected: config.m * config.t,
                actual: trace.len(),
            });
        }
        Ok(Self {
            party,
            actor,
            trace,
            stats,
            config,
        })
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn trace(&self) -> &PressureTrace {
        &self.trace
    }

    pub fn mask_at(&self, t: usize) -> Result<FeatureMask> {
        let frame = self.trace.frame(t, self.config.m)?;
        let action = self.actor.predict(&self.stats.normalize(&frame))?;
        Ok(binarize(&action, self.config.lambda))
    }

    pub fn key_at(&self, t: usize) -> Result<Key> {
        let m = self.config.m;
        let mask = self.mask_at(t)?;
        generate_key(&self.trace.frame(t, m)?, &mask, self.trace.prev_sample(t, m), self.party)
    }

    /// Masks and keys for time steps `1..=T`.
    pub fn run(&self) -> Result<(Vec<FeatureMask>, Vec<Key>)> {
        (1..=self.config.t)
            .map(|t| {
                let mask = self.mask_at(t)?;
                let m = self.config.m;
                let key = generate_key(&self.trace.frame(t, m)?, &mask, self.trace.prev_sample(t, m), self.party)?;
                Ok((mask, key))
            })
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().unzip())
    }
}

/// Eve holds an exact copy of Bob's actor but only her own signals.
#[derive(Clone, Debug)]
pub struct AdversaryModel {
    pub eve_actor: Mlp,
    pub eve_trace: PressureTrace,
}

impl AdversaryModel {
    pub fn capture(bob_actor: &Mlp, eve_trace: PressureTrace) -> Self {
        Self {
            eve_actor: bob_actor.clone(),
            eve_trace,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MaskUtilization {
    pub alice: f64,
    pub bob: f64,
    pub eve: f64,
}

/// Per-time-step agreement of one evaluation episode.
#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub kar_ab: Vec<f64>,
    pub kar_ae: Vec<f64>,
    pub mean_kar_ab: f64,
    pub mean_kar_ae: f64,
    pub mean_gap: f64,
    pub min_gap: f64,
    pub mask_utilization: MaskUtilization,
    /// Mean Hamming distance between Alice's and Eve's keys, in bits.
    pub uniqueness_ae: f64,
    #[serde(skip)]
    pub keys: [Vec<Key>; 3],
}

impl EvalReport {
    pub fn keys_of(&self, party: Party) -> &[Key] {
        match party {
            Party::Alice => &self.keys[0],
            Party::Bob => &self.keys[1],
            Party::Eve => &self.keys[2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSummary {
    pub mean_gap: f64,
    pub per_ts_gaps: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn utilization(masks: &[FeatureMask]) -> f64 {
    let total: usize = masks.iter().map(FeatureMask::len).sum();
    masks.iter().map(FeatureMask::ones).sum::<usize>() as f64 / total as f64
}

/// Runs the three parties independently and compares their keys.
pub fn evaluate_episode(
    alice: &KeyDevice,
    bob: &KeyDevice,
    adversary: &AdversaryModel,
    scenario: &ScenarioConfig,
) -> Result<EvalReport> {
    let config = alice.config;
    if bob.config != config {
        return Err(Error::Shape("alice and bob devices disagree on episode shape".into()));
    }
    let eve = KeyDevice::new(
        Party::Eve,
        adversary.eve_actor.clone(),
        adversary.eve_trace.clone(),
        scenario.stats_for(&adversary.eve_trace)?,
        config,
    )?;
    let (masks_a, keys_a) = alice.run()?;
    let (masks_b, keys_b) = bob.run()?;
    let (masks_e, keys_e) = eve.run()?;
    report_from_keys(
        [keys_a, keys_b, keys_e],
        [utilization(&masks_a), utilization(&masks_b), utilization(&masks_e)],
    )
}

fn report_from_keys(keys: [Vec<Key>; 3], util: [f64; 3]) -> Result<EvalReport> {
    let [a, b, e] = &keys;
    check_len("bob key count", a.len(), b.len())?;
    check_len("eve key count", a.len(), e.len())?;
    let kar_ab = a.iter().zip(b).map(|(x, y)| kar(x, y)).collect::<Result<Vec<_>>>()?;
    let kar_ae = a.iter().zip(e).map(|(x, y)| kar(x, y)).collect::<Result<Vec<_>>>()?;
    let hamming: Vec<f64> = a
        .iter()
        .zip(e)
        .map(|(x, y)| x.bits.iter().zip(&y.bits).filter(|(p, q)| p != q).count() as f64)
        .collect();
    let gaps = kar_gap_series(&kar_ab, &kar_ae);
    Ok(EvalReport {
        mean_kar_ab: mean(&kar_ab),
        mean_kar_ae: mean(&kar_ae),
        mean_gap: gaps.mean_gap,
        min_gap: gaps.per_ts_gaps.iter().copied().fold(f64::INFINITY, f64::min),
        mask_utilization: MaskUtilization {
            alice: util[0],
            bob: util[1],
            eve: util[2],
        },
        uniqueness_ae: mean(&hamming),
        kar_ab,
        kar_ae,
        keys,
    })
}

fn kar_gap_series(kar_ab: &[f64], kar_ae: &[f64]) -> GapSummary {
    let per_ts_gaps: Vec<f64> = kar_ab.iter().zip(kar_ae).map(|(x, y)| x - y).collect();
    GapSummary {
        mean_gap: mean(&per_ts_gaps),
        per_ts_gaps,
    }
}

pub fn kar_gap(report: &EvalReport) -> GapSummary {
    kar_gap_series(&report.kar_ab, &report.kar_ae)
}

/// Concatenates `owner`'s keys, episode by episode and within an episode by
/// time step.
pub fn export_keystream(reports: &[EvalReport], owner: Party) -> BitSequence {
    let mut seq = BitSequence::default();
    for report in reports {
        for key in report.keys_of(owner) {
            seq.extend_from_slice(&key.bits);
        }
    }
    seq
}

/// Means over episodes, per time step and overall.
#[derive(Clone, Debug, Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub kar_ab: Vec<f64>,
    pub kar_ae: Vec<f64>,
    pub mean_kar_ab: f64,
    pub mean_kar_ae: f64,
    pub mean_gap: f64,
    pub min_gap: f64,
    pub mask_utilization: MaskUtilization,
    pub uniqueness_ae: f64,
}

pub fn summarize(reports: &[EvalReport]) -> Result<EvalSummary> {
    let first = reports.first().ok_or_else(|| Error::config("no evaluation episodes"))?;
    let t = first.kar_ab.len();
    let n = reports.len() as f64;
    let per_ts = |pick: fn(&EvalReport) -> &Vec<f64>| -> Vec<f64> {
        (0..t).map(|i| reports.iter().map(|r| pick(r)[i]).sum::<f64>() / n).collect()
    };
    let kar_ab = per_ts(|r| &r.kar_ab);
    let kar_ae = per_ts(|r| &r.kar_ae);
    let gaps = kar_gap_series(&kar_ab, &kar_ae);
    let avg = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(EvalSummary {
        episodes: reports.len(),
        mean_kar_ab: mean(&kar_ab),
        mean_kar_ae: mean(&kar_ae),
        mean_gap: gaps.mean_gap,
        min_gap: gaps.per_ts_gaps.iter().copied().fold(f64::INFINITY, f64::min),
        mask_utilization: MaskUtilization {
            alice: avg(|r| r.mask_utilization.alice),
            bob: avg(|r| r.mask_utilization.bob),
            eve: avg(|r| r.mask_utilization.eve),
        },
        uniqueness_ae: avg(|r| r.uniqueness_ae),
        kar_ab,
        kar_ae,
    })
}

/// Seed of evaluation episode `episode` (0-based) under run seed `seed`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(episode as u64 + 1))
}

/// Trained actors of both parties plus the scenario describing whose trace
/// is whose.
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub alice_actor: Mlp,
    pub bob_actor: Mlp,
    pub scenario: ScenarioConfig,
    pub config: EvalConfig,
}

impl Evaluator {
    /// Evaluates one episode on the scenario's three traces.
    pub fn episode(&self, alice: &PressureTrace, bob: &PressureTrace, eve: &PressureTrace) -> Result<EvalReport> {
        let device = |party, actor: &Mlp, trace: &PressureTrace| {
            KeyDevice::new(party, actor.clone(), trace.clone(), self.scenario.stats_for(trace)?, self.config)
        };
        let a = device(Party::Alice, &self.alice_actor, alice)?;
        let b = device(Party::Bob, &self.bob_actor, bob)?;
        let adversary = AdversaryModel::capture(&self.bob_actor, eve.clone());
        evaluate_episode(&a, &b, &adversary, &self.scenario)
    }

    /// Evaluates `episodes` freshly synthesized windows, episode `i` drawn
    /// with [`episode_seed`]`(seed, i)`.
    pub fn synthetic_episodes(&self, params: &SynthParams, seed: u64, episodes: usize) -> Result<Vec<EvalReport>> {
        (0..episodes)
            .map(|i| {
                let traces = synth_traces(&self.scenario, params, self.config.m, self.config.t, episode_seed(seed, i))?;
                let [a, b, e] = self.scenario.nodes().map(|n| &traces[n]);
                self.episode(a, b, e)
            })
            .collect()
    }
}

pub const REPORT_CSV_HEADER: &str = "episode,ts_index,kar_ab,kar_ae,gap";

pub fn write_report_csv<W: Write>(mut w: W, reports: &[EvalReport]) -> Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for (ep, r) in reports.iter().enumerate() {
        for (t, (ab, ae)) in r.kar_ab.iter().zip(&r.kar_ae).enumerate() {
            writeln!(w, "{},{},{ab:?},{ae:?},{:?}", ep + 1, t + 1, ab - ae)?;
        }
    }
    Ok(())
}

/// Writes `owner`'s keys, one time step per line as `owner,ts_index,bits`.
pub fn write_keys<W: Write>(mut w: W, reports: &[EvalReport], owner: Party) -> Result<()> {
    for r in reports {
        for key in r.keys_of(owner) {
            writeln!(w, "{key}")?;
        }
    }
    Ok(())
}

/// `report.json`, `report.csv`, `keys_{A,B,E}.txt` and `keystream_A.txt`.
pub fn write_artifacts(dir: impl AsRef<Path>, reports: &[EvalReport]) -> Result<EvalSummary> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let summary = summarize(reports)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        summary: &'a EvalSummary,
        episodes: &'a [EvalReport],
    }
    let doc = Doc {
        summary: &summary,
        episodes: reports,
    };
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&doc)?)?;
    write_report_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("report.csv"))?), reports)?;
    for party in [Party::Alice, Party::Bob, Party::Eve] {
        let f = std::fs::File::create(dir.join(format!("keys_{}.txt", party.code())))?;
        write_keys(std::io::BufWriter::new(f), reports, party)?;
    }
    let mut stream = export_keystream(reports, Party::Alice).to_ascii();
    stream.push('\n');
    std::fs::write(dir.join("keystream_A.txt"), stream)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn cfg(m: usize, t: usize) -> EvalConfig {
        EvalConfig { m, t, lambda: 0.5 }
    }

    fn trace(node: &str, v: &[f64]) -> PressureTrace {
        PressureTrace::new(node, v.to_vec(), 19.0).unwrap()
    }

    /// Actor whose output is sigmoid(bias) regardless of input.
    fn constant_actor(m: usize, bias: f64) -> Mlp {
        let mut net = Mlp::new(&[m, m], Activation::Sigmoid, 0).unwrap();
        let layer = &mut net.layers_mut()[0];
        layer.weights.fill(0.0);
        layer.bias.fill(bias);
        net
    }

    fn evaluator(m: usize, t: usize, actor: Mlp) -> Evaluator {
        Evaluator {
            alice_actor: actor.clone(),
            bob_actor: actor,
            scenario: ScenarioConfig::default(),
            config: cfg(m, t),
        }
    }

    #[test]
    fn hand_built_two_by_two() {
        // all-ones masks; keys follow the sign of each increment
        let ev = evaluator(2, 2, constant_actor(2, 5.0));
        let a = trace("18", &[1.0, 2.0, 1.5, 3.0]);
        let b = trace("8", &[1.0, 0.0, 2.0, 3.0]);
        let e = trace("eve", &[4.0, 3.0, 2.0, 1.0]);
        let r = ev.episode(&a, &b, &e).unwrap();
        // A: t1 [1(self), 1], t2 [0, 1]; B: [1, 0], [1, 1]; E: [1, 0], [0, 0]
        assert_eq!(r.keys[0][0].bits, vec![1, 1]);
        assert_eq!(r.keys[0][1].bits, vec![0, 1]);
        assert_eq!(r.keys[1][0].bits, vec![1, 0]);
        assert_eq!(r.keys[1][1].bits, vec![1, 1]);
        assert_eq!(r.keys[2][1].bits, vec![0, 0]);
        assert_eq!(r.kar_ab, vec![0.5, 0.5]);
        assert_eq!(r.kar_ae, vec![0.5, 0.5]);
        assert_eq!(r.uniqueness_ae, 1.0);
        assert_eq!(r.mask_utilization.alice, 1.0);
        assert_eq!(kar_gap(&r).per_ts_gaps, vec![0.0, 0.0]);
    }

    #[test]
    fn eve_with_bobs_trace_matches_bob() {
        let ev = evaluator(3, 2, Mlp::new(&[3, 4, 3], Activation::Sigmoid, 9).unwrap());
        let a = trace("18", &[1.0, 3.0, 2.0, 5.0, 4.0, 6.0]);
        let b = trace("8", &[2.0, 1.0, 3.0, 4.0, 6.0, 5.0]);
        let mut e = b.clone();
        e.node_id = "eve".into();
        let r = ev.episode(&a, &b, &e).unwrap();
        assert_eq!(r.kar_ab, r.kar_ae);
        assert_eq!(r.keys[1].iter().map(|k| &k.bits).collect::<Vec<_>>(), r.keys[2].iter().map(|k| &k.bits).collect::<Vec<_>>());
    }

    #[test]
    fn identical_actors_and_traces_agree() {
        let ev = evaluator(4, 3, Mlp::new(&[4, 5, 4], Activation::Sigmoid, 1).unwrap());
        let v: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64).collect();
        let r = ev.episode(&trace("18", &v), &trace("8", &v), &trace("eve", &v)).unwrap();
        assert!(r.kar_ab.iter().all(|&k| k == 1.0));
    }

    #[test]
    fn keystream_export() {
        let ev = evaluator(20, 19, Mlp::new(&[20, 8, 20], Activation::Sigmoid, 2).unwrap());
        let reports = ev.synthetic_episodes(&SynthParams::default(), 5, 2).unwrap();
        assert_eq!(export_keystream(&reports[..1], Party::Alice).len(), 380);
        assert_eq!(export_keystream(&reports, Party::Alice).len(), 760);
        assert!(export_keystream(&[], Party::Alice).is_empty());
        let mut expected = Vec::new();
        for r in &reports {
            for k in &r.keys[0] {
                expected.extend_from_slice(&k.bits);
            }
        }
        assert_eq!(export_keystream(&reports, Party::Alice).bits(), &expected[..]);
        for r in &reports {
            assert!(r.kar_ab.iter().chain(&r.kar_ae).all(|k| (0.0..=1.0).contains(k)));
        }
    }

    #[test]
    fn gap_examples() {
        let g = kar_gap_series(&[1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(g.mean_gap, 0.5);
        let g = kar_gap_series(&[0.7, 0.9], &[0.7, 0.9]);
        assert_eq!(g.per_ts_gaps, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let stats = NormStats::new(0.0, 1.0).unwrap();
        let actor = Mlp::new(&[3, 3], Activation::Sigmoid, 0).unwrap();
        assert!(KeyDevice::new(Party::Alice, actor.clone(), trace("18", &[0.0; 4]), stats, cfg(4, 1)).is_err());
        assert!(KeyDevice::new(Party::Alice, actor, trace("18", &[0.0; 5]), stats, cfg(3, 2)).is_err());
    }

    #[test]
    fn csv_and_keys_format() {
        let ev = evaluator(2, 2, constant_actor(2, 5.0));
        let a = trace("18", &[1.0, 2.0, 1.5, 3.0]);
        let r = ev.episode(&a, &trace("8", &[1.0, 2.0, 1.5, 3.0]), &trace("eve", &[1.0, 2.0, 1.0, 0.0])).unwrap();
        let mut out = Vec::new();
        write_report_csv(&mut out, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next(), Some(REPORT_CSV_HEADER));
        assert_eq!(text.lines().nth(1), Some("1,1,1.0,1.0,0.0"));
        let mut keys = Vec::new();
        write_keys(&mut keys, &[r], Party::Alice).unwrap();
        assert_eq!(String::from_utf8(keys).unwrap(), "A,1,11\nA,2,01\n");
    }
}
