//! One legitimate party's learner: actor, centralized critic, their target
//! copies, exploration noise, and the critic/actor update rules.
//!
//! The critic input is `state (2M) ++ joint action (2M)`, both laid out as
//! Alice's block followed by Bob's block.

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::keygen::Party;
use crate::nn::{soft_update, Activation, AdamState, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub m: usize,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_scale: f64,
    pub noise_decay: f64,
    pub noise_min: f64,
}

impl AgentConfig {
    pub fn actor_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.m];
        dims.extend(&self.hidden);
        dims.push(self.m);
        dims
    }

    pub fn critic_dims(&self) -> Vec<usize> {
        let mut dims = vec![4 * self.m];
        dims.extend(&self.hidden);
        dims.push(1);
        dims
    }
}

/// Actor output, each component in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("action components must lie in [0, 1]"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A sampled minibatch; every row is one transition.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Columns of `party`'s observation inside a state block of width `2m`.
    pub fn own_observations(states: &Array2<f64>, party: Party, m: usize) -> Array2<f64> {
        let off = slot(party) * m;
        states.slice(s![.., off..off + m]).to_owned()
    }
}

fn slot(party: Party) -> usize {
    match party {
        Party::Alice => 0,
        Party::Bob => 1,
        Party::Eve => unreachable!("Eve never trains"),
    }
}

fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()])
        .expect("row counts checked by callers")
}

#[derive(Clone, Debug)]
pub struct Agent {
    party: Party,
    m: usize,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub noise_scale: f64,
    pub noise_decay: f64,
    pub noise_min: f64,
}

impl Agent {
    /// `actor` is the copy handed out by the controller; the critic is freshly
    /// initialized from `rng`. Targets start as exact copies.
    pub fn new<R: Rng + ?Sized>(party: Party, actor: Mlp, config: &AgentConfig, rng: &mut R) -> Result<Self> {
        if party == Party::Eve {
            return Err(Error::config("only Alice and Bob run learning agents"));
        }
        if actor.dims() != config.actor_dims().as_slice() || actor.output_activation() != Activation::Sigmoid {
            return Err(Error::Shape(format!(
                "actor must have dims {:?} and sigmoid output",
                config.actor_dims()
            )));
        }
        if !(config.noise_decay > 0.0 && config.noise_decay <= 1.0) || config.noise_scale < 0.0 || config.noise_min < 0.0
        {
            return Err(Error::config("noise scale must be >= 0 and decay in (0, 1]"));
        }
        let critic = Mlp::with_rng(&config.critic_dims(), Activation::Linear, rng)?;
        Ok(Self {
            party,
            m: config.m,
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_opt: AdamState::new(&actor, config.actor_lr),
            critic_opt: AdamState::new(&critic, config.critic_lr),
            actor,
            critic,
            noise_scale: config.noise_scale,
            noise_decay: config.noise_decay,
            noise_min: config.noise_min,
        })
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Actor output for one observation, optionally with Gaussian exploration
    /// noise of std `noise_scale`, clamped to `[0, 1]`.
    pub fn act<R: Rng + ?Sized>(&self, observation: &[f64], explore: bool, rng: &mut R) -> Result<ActionVector> {
        check_len("observation", self.m, observation.len())?;
        let mut action = self.actor.predict(observation)?;
        if explore && self.noise_scale > 0.0 {
            let noise = Normal::new(0.0, self.noise_scale).expect("noise scale is finite and positive");
            for a in &mut action {
                *a = (*a + noise.sample(rng)).clamp(0.0, 1.0);
            }
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("actor output"));
        }
        Ok(ActionVector(action))
    }

    pub fn decay_noise(&mut self) {
        self.noise_scale = (self.noise_scale * self.noise_decay).max(self.noise_min);
    }

    /// Target-actor actions for the own-observation columns of `states`.
    pub fn target_actions(&self, states: &Array2<f64>) -> Result<Array2<f64>> {
        check_len("state width", 2 * self.m, states.ncols())?;
        self.target_actor
            .predict_batch(&Batch::own_observations(states, self.party, self.m))
    }

    /// One critic step on the mean squared TD error. `next_actions` is the joint
    /// action both target actors take on the next states. Returns the loss
    /// before the step.
    pub fn update_critic(&mut self, batch: &Batch, next_actions: &Array2<f64>, gamma: f64) -> Result<f64> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::config("empty batch"));
        }
        check_len("joint next action width", 2 * self.m, next_actions.ncols())?;
        check_len("joint next action rows", n, next_actions.nrows())?;
        let q_next = self
            .target_critic
            .predict_batch(&concat_cols(&batch.next_states, next_actions))?;
        let targets: Array1<f64> = (0..n)
            .map(|i| {
                let bootstrap = if batch.terminals[i] { 0.0 } else { gamma * q_next[[i, 0]] };
                batch.rewards[i] + bootstrap
            })
            .collect();
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("TD targets"));
        }

        let cache = self.critic.forward_batch(&concat_cols(&batch.states, &batch.actions))?;
        let q = cache.output().column(0).to_owned();
        let residual = &q - &targets;
        let loss = residual.mapv(|r| r * r).mean().unwrap_or(0.0);
        let grad_out = residual.mapv(|r| 2.0 * r / n as f64).insert_axis(ndarray::Axis(1));
        let (grads, _) = self.critic.backward(&cache, &grad_out)?;
        self.critic_opt.step(&mut self.critic, &grads)?;
        Ok(loss)
    }

    /// One actor step ascending the mean critic value. The own slot of the joint
    /// action is recomputed by the current actor; the peer slot keeps the
    /// recorded action. Returns the objective before the step.
    pub fn update_actor(&mut self, batch: &Batch) -> Result<f64> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::config("empty batch"));
        }
        let m = self.m;
        check_len("state width", 2 * m, batch.states.ncols())?;
        check_len("joint action width", 2 * m, batch.actions.ncols())?;
        let off = slot(self.party) * m;

        let actor_cache = self
            .actor
            .forward_batch(&Batch::own_observations(&batch.states, self.party, m))?;
        let mut joint = batch.actions.clone();
        joint
            .slice_mut(s![.., off..off + m])
            .assign(actor_cache.output());

        let critic_cache = self.critic.forward_batch(&concat_cols(&batch.states, &joint))?;
        let objective = critic_cache.output().mean().unwrap_or(0.0);
        // minimize -mean(Q)
        let grad_out = Array2::from_elem((n, 1), -1.0 / n as f64);
        let input_grad = self.critic.input_gradient(&critic_cache, &grad_out)?;
        let action_grad = input_grad
            .slice(s![.., 2 * m + off..2 * m + off + m])
            .to_owned();
        let (grads, _) = self.actor.backward(&actor_cache, &action_grad)?;
        self.actor_opt.step(&mut self.actor, &grads)?;
        Ok(objective)
    }

    pub fn sync_targets(&mut self, rho: f64) -> Result<()> {
        soft_update(&mut self.target_actor, &self.actor, rho)?;
        soft_update(&mut self.target_critic, &self.critic, rho)
    }
}
