//! The full training loop: local episodes for both parties, federated actor
//! averaging every `E` epochs, and checkpoints.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::env::{train_epoch, EpochMetrics, KeyEnv, ReplayMemory, TrainConfig};
use crate::error::{Error, Result};
use crate::federated::{init_and_distribute, should_aggregate, Controller, InMemoryExchange, ModelExchange};
use crate::keygen::Party;
use crate::nn::Mlp;

pub struct Trainer {
    config: TrainConfig,
    agents: [Agent; 2],
    env: KeyEnv,
    memory: ReplayMemory,
    controller: Controller,
    exchange: Box<dyn ModelExchange>,
    rng: ChaCha8Rng,
    seed: u64,
    epoch: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointState {
    epoch: usize,
    round: u64,
    seed: u64,
    noise_scale: [f64; 2],
    rng_word_pos: String,
}

const NETS: [&str; 4] = ["actor", "critic", "target_actor", "target_critic"];

impl Trainer {
    pub fn new(config: TrainConfig, env: KeyEnv, seed: u64) -> Result<Self> {
        config.validate()?;
        if env.m() != config.m || env.steps() != config.t {
            return Err(Error::config(format!(
                "environment is M={}, T={} but config says M={}, T={}",
                env.m(),
                env.steps(),
                config.m,
                config.t
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent_cfg = config.agent_config();
        let (controller, actor_a, actor_b) =
            init_and_distribute(&agent_cfg.actor_dims(), rng.gen(), config.fed_every)?;
        let alice = Agent::new(Party::Alice, actor_a, &agent_cfg, &mut rng)?;
        let bob = Agent::new(Party::Bob, actor_b, &agent_cfg, &mut rng)?;
        Ok(Self {
            memory: ReplayMemory::new(config.memory_capacity),
            config,
            agents: [alice, bob],
            env,
            controller,
            exchange: Box::new(InMemoryExchange::default()),
            rng,
            seed,
            epoch: 0,
        })
    }

    pub fn with_exchange(mut self, exchange: Box<dyn ModelExchange>) -> Self {
        self.exchange = exchange;
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn agents(&self) -> &[Agent; 2] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [Agent; 2] {
        &mut self.agents
    }

    pub fn env(&self) -> &KeyEnv {
        &self.env
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        let epoch = self.epoch + 1;
        let metrics = train_epoch(
            &mut self.agents,
            &self.env,
            &mut self.memory,
            &self.config,
            epoch,
            &mut self.rng,
        )?;
        if should_aggregate(epoch, self.config.fed_every) {
            let [alice, bob] = &mut self.agents;
            self.controller
                .run_round(self.exchange.as_mut(), &mut alice.actor, &mut bob.actor)?;
        }
        self.epoch = epoch;
        Ok(metrics)
    }

    /// Runs epochs until `e_max` is reached, calling `on_epoch` after each.
    pub fn train<F>(&mut self, mut on_epoch: F) -> Result<Vec<EpochMetrics>>
    where
        F: FnMut(&EpochMetrics, &Trainer) -> Result<()>,
    {
        let mut all = Vec::with_capacity(self.config.e_max.saturating_sub(self.epoch));
        while self.epoch < self.config.e_max {
            let m = self.run_epoch()?;
            on_epoch(&m, self)?;
            all.push(m);
        }
        Ok(all)
    }

    /// Writes every network of both parties plus the global actor and
    /// counters into `dir`.
    pub fn save_checkpoint(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for agent in &self.agents {
            let code = agent.party().code();
            let nets = [&agent.actor, &agent.critic, &agent.target_actor, &agent.target_critic];
            for (name, net) in NETS.iter().zip(nets) {
                net.save(dir.join(format!("{name}_{code}.bin")))?;
            }
        }
        self.controller.global_actor().save(dir.join("global_actor.bin"))?;
        let state = CheckpointState {
            epoch: self.epoch,
            round: self.controller.round(),
            seed: self.seed,
            noise_scale: [self.agents[0].noise_scale, self.agents[1].noise_scale],
            rng_word_pos: self.rng.get_word_pos().to_string(),
        };
        std::fs::write(dir.join("state.json"), serde_json::to_string_pretty(&state)?)?;
        Ok(())
    }

    /// Restores networks, noise levels, the random stream and the epoch and
    /// round counters from a checkpoint. The replay memory and optimizer
    /// moments start empty.
    pub fn resume(config: TrainConfig, env: KeyEnv, dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let state: CheckpointState = serde_json::from_str(&std::fs::read_to_string(dir.join("state.json"))?)?;
        let mut trainer = Self::new(config, env, state.seed)?;
        for (agent, noise) in trainer.agents.iter_mut().zip(state.noise_scale) {
            let code = agent.party().code();
            let load = |name: &str, expect: &Mlp| -> Result<Mlp> {
                let net = Mlp::load(dir.join(format!("{name}_{code}.bin")))?;
                if !net.congruent(expect) {
                    return Err(Error::Shape(format!("checkpoint {name}_{code} does not match config")));
                }
                Ok(net)
            };
            agent.actor = load("actor", &agent.actor)?;
            agent.critic = load("critic", &agent.critic)?;
            agent.target_actor = load("target_actor", &agent.target_actor)?;
            agent.target_critic = load("target_critic", &agent.target_critic)?;
            agent.noise_scale = noise;
        }
        let global = Mlp::load(dir.join("global_actor.bin"))?;
        trainer.controller = Controller::restore(global, state.round, trainer.config.fed_every);
        let pos: u128 = state
            .rng_word_pos
            .parse()
            .map_err(|_| Error::Decode("bad rng position in checkpoint".into()))?;
        trainer.rng.set_word_pos(pos);
        trainer.epoch = state.epoch;
        Ok(trainer)
    }
}
