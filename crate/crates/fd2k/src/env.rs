//! Episode engine: observation assembly, stepping, replay memory and one
//! training epoch.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ActionVector, Agent, AgentConfig, Batch};
use crate::error::{check_len, Error, Result};
use crate::keygen::{self, binarize, generate_key, FeatureMask, Key, Party};
use crate::signal::{check_shape, NormStats, PressureTrace};

/// Training hyperparameters. Serialized keys follow the usual symbols
/// (`M`, `T`, `gamma`, `n`, `N_mem`, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub gamma: f64,
    /// Minibatch size.
    #[serde(rename = "n")]
    pub batch_size: usize,
    #[serde(rename = "N_mem")]
    pub memory_capacity: usize,
    pub e_max: usize,
    /// Initial exploration noise std.
    pub epsilon: f64,
    pub rho: f64,
    /// Epochs between federated aggregations.
    #[serde(rename = "E")]
    pub fed_every: usize,
    pub lambda: f64,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Multiplicative noise decay per environment step.
    pub noise_decay: f64,
    pub noise_min: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            m: 20,
            t: 19,
            gamma: 0.99,
            batch_size: 128,
            memory_capacity: 10_000,
            e_max: 3000,
            epsilon: 0.4,
            rho: 0.01,
            fed_every: 5,
            lambda: 0.5,
            hidden: vec![100; 4],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_decay: 0.9995,
            noise_min: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_shape(self.m, self.t)?;
        let bad = |msg: &str| Err(Error::config(msg));
        if self.batch_size == 0 || self.batch_size > self.memory_capacity {
            return bad("need 1 <= n <= N_mem");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        if self.fed_every == 0 {
            return bad("E must be >= 1");
        }
        if self.epsilon < 0.0 || self.noise_min < 0.0 {
            return bad("noise levels must be >= 0");
        }
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return bad("noise_decay must lie in (0, 1]");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            m: self.m,
            hidden: self.hidden.clone(),
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            noise_scale: self.epsilon,
            noise_decay: self.noise_decay,
            noise_min: self.noise_min,
        }
    }
}

/// Observations at time step `t`; `state()` is `o_A ++ o_B`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub t: usize,
    pub obs: [Vec<f64>; 2],
    pub terminal: bool,
}

impl EnvState {
    pub fn state(&self) -> Vec<f64> {
        let mut s = self.obs[0].clone();
        s.extend_from_slice(&self.obs[1]);
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub transition: Transition,
    pub masks: [FeatureMask; 2],
    pub keys: [Key; 2],
    pub kar: f64,
    pub next: EnvState,
}

/// Alice's and Bob's traces with their normalization bounds.
#[derive(Clone, Debug)]
pub struct KeyEnv {
    traces: [PressureTrace; 2],
    stats: [NormStats; 2],
    m: usize,
    t_len: usize,
    lambda: f64,
}

impl KeyEnv {
    pub fn new(
        alice: PressureTrace,
        bob: PressureTrace,
        stats: [NormStats; 2],
        m: usize,
        t_len: usize,
        lambda: f64,
    ) -> Result<Self> {
        check_shape(m, t_len)?;
        for tr in [&alice, &bob] {
            if tr.len() < m * t_len {
                return Err(Error::TraceLength {
                    node: tr.node_id.clone(),
                    expected: m * t_len,
                    actual: tr.len(),
                });
            }
        }
        Ok(Self {
            traces: [alice, bob],
            stats,
            m,
            t_len,
            lambda,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.t_len
    }

    pub fn traces(&self) -> &[PressureTrace; 2] {
        &self.traces
    }

    pub fn stats(&self) -> &[NormStats; 2] {
        &self.stats
    }

    fn observe(&self, t: usize) -> Result<[Vec<f64>; 2]> {
        Ok([
            self.stats[0].normalize(&self.traces[0].frame(t, self.m)?),
            self.stats[1].normalize(&self.traces[1].frame(t, self.m)?),
        ])
    }

    pub fn reset(&self) -> Result<EnvState> {
        Ok(EnvState {
            t: 1,
            obs: self.observe(1)?,
            terminal: false,
        })
    }

    /// Applies both actions at `state.t`: masks, keys, reward, next state.
    /// At `t = T` the next state repeats the current one and is terminal.
    pub fn step(&self, state: &EnvState, action_a: &ActionVector, action_b: &ActionVector) -> Result<StepOutcome> {
        if state.terminal {
            return Err(Error::TerminalStep);
        }
        check_len("Alice action", self.m, action_a.len())?;
        check_len("Bob action", self.m, action_b.len())?;
        let t = state.t;
        let masks = [
            binarize(action_a.as_slice(), self.lambda),
            binarize(action_b.as_slice(), self.lambda),
        ];
        let keys = [
            self.key_for(0, t, &masks[0], Party::Alice)?,
            self.key_for(1, t, &masks[1], Party::Bob)?,
        ];
        let kar = keygen::kar(&keys[0], &keys[1])?;
        let reward = keygen::reward(&keys[0], &keys[1], &masks[0], &masks[1])?;

        let next = if t >= self.t_len {
            EnvState {
                t,
                obs: state.obs.clone(),
                terminal: true,
            }
        } else {
            EnvState {
                t: t + 1,
                obs: self.observe(t + 1)?,
                terminal: false,
            }
        };
        let mut action = action_a.as_slice().to_vec();
        action.extend_from_slice(action_b.as_slice());
        let transition = Transition {
            state: state.state(),
            action,
            reward,
            next_state: next.state(),
            terminal: next.terminal,
        };
        Ok(StepOutcome {
            transition,
            masks,
            keys,
            kar,
            next,
        })
    }

    fn key_for(&self, idx: usize, t: usize, mask: &FeatureMask, owner: Party) -> Result<Key> {
        let trace = &self.traces[idx];
        generate_key(&trace.frame(t, self.m)?, mask, trace.prev_sample(t, self.m), owner)
    }
}

/// Bounded FIFO of transitions.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
    pushed: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            pushed: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total transitions ever pushed.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, transition: Transition) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
        self.pushed += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if n > self.items.len() {
            return Err(Error::Underfilled {
                size: self.items.len(),
                requested: n,
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

pub fn batch_from(transitions: &[&Transition]) -> Batch {
    let n = transitions.len();
    let width = transitions.first().map_or(0, |t| t.state.len());
    let rows = |f: &dyn Fn(&Transition) -> &Vec<f64>| {
        Array2::from_shape_fn((n, width), |(i, j)| f(transitions[i])[j])
    };
    Batch {
        states: rows(&|t| &t.state),
        actions: rows(&|t| &t.action),
        rewards: Array1::from_iter(transitions.iter().map(|t| t.reward)),
        next_states: rows(&|t| &t.next_state),
        terminals: transitions.iter().map(|t| t.terminal).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Undiscounted sum of step rewards over the episode.
    pub accumulated_reward: f64,
    pub steps: usize,
    pub mean_kar: f64,
    /// Mean fraction of set mask bits over both parties and all steps.
    pub mask_utilization: f64,
    /// Alice's exploration std after the epoch.
    pub noise_scale: f64,
    /// Gradient updates performed during the epoch.
    pub updates: usize,
}

impl EpochMetrics {
    pub fn mean_reward(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accumulated_reward / self.steps as f64
        }
    }

    pub const CSV_HEADER: &'static str = "epoch,accumulated_reward,mean_kar,mask_utilization,noise_scale";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?}",
            self.epoch, self.accumulated_reward, self.mean_kar, self.mask_utilization, self.noise_scale
        )
    }
}

/// One learning update for both agents on a shared minibatch: both critics,
/// then both actors, then target syncing.
pub fn learn_step(agents: &mut [Agent; 2], batch: &Batch, config: &TrainConfig) -> Result<()> {
    let next_actions = ndarray::concatenate(
        ndarray::Axis(1),
        &[
            agents[0].target_actions(&batch.next_states)?.view(),
            agents[1].target_actions(&batch.next_states)?.view(),
        ],
    )
    .expect("both target actions have n rows");
    for agent in agents.iter_mut() {
        agent.update_critic(batch, &next_actions, config.gamma)?;
    }
    for agent in agents.iter_mut() {
        agent.update_actor(batch)?;
    }
    for agent in agents.iter_mut() {
        agent.sync_targets(config.rho)?;
    }
    Ok(())
}

/// Runs one exploring episode, learning once per step as soon as the memory
/// holds a full minibatch.
pub fn train_epoch<R: Rng + ?Sized>(
    agents: &mut [Agent; 2],
    env: &KeyEnv,
    memory: &mut ReplayMemory,
    config: &TrainConfig,
    epoch: usize,
    rng: &mut R,
) -> Result<EpochMetrics> {
    let mut state = env.reset()?;
    let (mut total_reward, mut total_kar, mut total_mask) = (0.0, 0.0, 0.0);
    let mut steps = 0;
    let mut updates = 0;
    while !state.terminal {
        let a = agents[0].act(&state.obs[0], true, rng)?;
        let b = agents[1].act(&state.obs[1], true, rng)?;
        let outcome = env.step(&state, &a, &b)?;
        total_reward += outcome.transition.reward;
        total_kar += outcome.kar;
        total_mask += (outcome.masks[0].ones() + outcome.masks[1].ones()) as f64 / (2 * env.m()) as f64;
        memory.push(outcome.transition);
        steps += 1;

        if memory.len() >= config.batch_size {
            let sampled = memory.sample(config.batch_size, rng)?;
            let batch = batch_from(&sampled);
            learn_step(agents, &batch, config)?;
            updates += 1;
        }
        for agent in agents.iter_mut() {
            agent.decay_noise();
        }
        state = outcome.next;
    }
    Ok(EpochMetrics {
        epoch,
        accumulated_reward: total_reward,
        steps,
        mean_kar: total_kar / steps as f64,
        mask_utilization: total_mask / steps as f64,
        noise_scale: agents[0].noise_scale,
        updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(tag: f64) -> Transition {
        Transition {
            state: vec![tag; 4],
            action: vec![0.5; 4],
            reward: tag,
            next_state: vec![tag; 4],
            terminal: false,
        }
    }

    #[test]
    fn memory_evicts_oldest() {
        let mut mem = ReplayMemory::new(3);
        for i in 0..4 {
            mem.push(transition(i as f64));
        }
        assert_eq!(mem.len(), 3);
        let rewards: Vec<f64> = mem.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![1.0, 2.0, 3.0]);
        assert_eq!(mem.pushed(), 4);
    }

    #[test]
    fn sampling_underfilled_memory_fails() {
        let mut mem = ReplayMemory::new(10);
        mem.push(transition(0.0));
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        assert!(matches!(mem.sample(2, &mut rng), Err(Error::Underfilled { size: 1, requested: 2 })));
    }

    #[test]
    fn default_config_mirrors_table() {
        let c = TrainConfig::default();
        assert_eq!((c.m, c.t, c.batch_size, c.memory_capacity, c.e_max), (20, 19, 128, 10_000, 3000));
        assert_eq!((c.gamma, c.epsilon, c.rho, c.lambda), (0.99, 0.4, 0.01, 0.5));
        assert_eq!(c.fed_every, 5);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            batch_size: 20_000,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lambda: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            gamma: 1.2,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_toml_uses_symbol_keys() {
        let c: TrainConfig = toml::from_str("M = 8\nT = 4\nN_mem = 500\nn = 32\nE = 2\nlambda = 0.6").unwrap();
        assert_eq!((c.m, c.t, c.memory_capacity, c.batch_size, c.fed_every), (8, 4, 500, 32, 2));
        assert_eq!(c.lambda, 0.6);
        assert_eq!(c.gamma, 0.99);
    }
}
