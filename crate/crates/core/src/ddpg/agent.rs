use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AgentState, DdpgConfig, ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::nn::{forward_mlp, Activation, Adam, AdamConfig, Graph, MlpParams, Tensor};

/// Actor, critic, their target copies, optimizers and the replay buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpgAgent {
    pub config: DdpgConfig,
    pub actor: MlpParams,
    pub critic: MlpParams,
    pub target_actor: MlpParams,
    pub target_critic: MlpParams,
    actor_opt: Adam,
    critic_opt: Adam,
    pub buffer: ReplayBuffer,
    /// Current exploration std.
    pub noise_std: f64,
    num_modalities: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean `Q(s, actor(s))` before the actor step.
    pub actor_q: f64,
}

fn network<R: Rng + ?Sized>(input: usize, hidden: &[usize], out_act: Activation, rng: &mut R) -> Result<MlpParams> {
    let mut sizes = vec![input];
    sizes.extend(hidden);
    sizes.push(1);
    let mut acts = vec![Activation::Relu; sizes.len() - 1];
    *acts.last_mut().expect("at least one layer") = out_act;
    MlpParams::init(&sizes, &acts, rng)
}

/// `clamp(actor(s) + N(0, std), 0, 1)`; the actor ends in a sigmoid. No noise
/// is drawn when `noise_std == 0`.
pub fn select_action<R: Rng + ?Sized>(
    actor: &MlpParams,
    state: &AgentState,
    noise_std: f64,
    rng: &mut R,
) -> Result<f64> {
    let mut beta = actor_output(actor, state)?;
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::invalid(e.to_string()))?;
        beta += normal.sample(rng);
    }
    Ok(beta.clamp(0.0, 1.0))
}

fn actor_output(actor: &MlpParams, state: &AgentState) -> Result<f64> {
    let x = Tensor::matrix(1, state.values().len(), state.values().to_vec())?;
    Ok(forward_mlp(actor, &x)?.values()[0])
}

fn critic_input(states: &[&AgentState], actions: &[f64]) -> Result<Tensor> {
    let width = states[0].values().len() + 1;
    let mut v = Vec::with_capacity(states.len() * width);
    for (s, a) in states.iter().zip(actions) {
        v.extend_from_slice(s.values());
        v.push(*a);
    }
    Tensor::matrix(states.len(), width, v)
}

/// `y = R + λ·Q'(s', A'(s'))`.
pub fn target_q(
    reward: f64,
    next_state: &AgentState,
    target_actor: &MlpParams,
    target_critic: &MlpParams,
    discount: f64,
) -> Result<f64> {
    if discount == 0.0 {
        return Ok(reward);
    }
    let a = actor_output(target_actor, next_state)?;
    let q = forward_mlp(target_critic, &critic_input(&[next_state], &[a])?)?.values()[0];
    Ok(reward + discount * q)
}

/// `θ' ← τθ + (1 − τ)θ'` for every parameter.
pub fn soft_update(target: &mut MlpParams, source: &MlpParams, tau: f64) -> Result<()> {
    if !target.same_structure(source) {
        return Err(Error::invalid("soft update between networks of different shape"));
    }
    for (t, s) in target.parameters_mut().zip(source.parameters()) {
        for (tv, sv) in t.values_mut().iter_mut().zip(s.values()) {
            *tv = tau * sv + (1.0 - tau) * *tv;
        }
    }
    Ok(())
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(config: DdpgConfig, num_modalities: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if num_modalities == 0 {
            return Err(Error::invalid("agent needs at least one modality"));
        }
        let dim = 2 * num_modalities;
        let actor = network(dim, &config.hidden, Activation::Sigmoid, rng)?;
        let critic = network(dim + 1, &config.hidden, Activation::Identity, rng)?;
        Ok(DdpgAgent {
            actor_opt: Adam::new(AdamConfig::with_lr(config.actor_lr), &actor),
            critic_opt: Adam::new(AdamConfig::with_lr(config.critic_lr), &critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(config.capacity)?,
            noise_std: config.noise_std,
            config,
            num_modalities,
        })
    }

    pub fn num_modalities(&self) -> usize {
        self.num_modalities
    }

    fn check_state(&self, s: &AgentState) -> Result<()> {
        if s.num_modalities() != self.num_modalities {
            return Err(Error::shape("agent state", 2 * self.num_modalities, s.values().len()));
        }
        Ok(())
    }

    /// Deterministic policy output.
    pub fn policy(&self, state: &AgentState) -> Result<f64> {
        self.check_state(state)?;
        Ok(actor_output(&self.actor, state)?.clamp(0.0, 1.0))
    }

    /// Exploratory action; decays the noise std afterwards.
    pub fn act<R: Rng + ?Sized>(&mut self, state: &AgentState, rng: &mut R) -> Result<f64> {
        self.check_state(state)?;
        let beta = select_action(&self.actor, state, self.noise_std, rng)?;
        self.noise_std *= self.config.noise_decay;
        Ok(beta)
    }

    pub fn remember(&mut self, t: Transition) -> Result<()> {
        self.check_state(&t.state)?;
        self.check_state(&t.next_state)?;
        self.buffer.push(t);
        Ok(())
    }

    /// Runs `updates_per_round` sampled updates if the buffer holds a batch.
    pub fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<UpdateStats>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let mut last = None;
        for _ in 0..self.config.updates_per_round {
            let batch = self.buffer.sample(self.config.batch_size, rng)?;
            last = Some(self.update(&batch)?);
        }
        Ok(last)
    }

    /// One critic step on the squared TD error, one actor step ascending
    /// `Q(s, actor(s))` through the frozen critic, then soft target updates.
    pub fn update(&mut self, batch: &[Transition]) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::Empty("agent update batch".into()));
        }
        for t in batch {
            self.check_state(&t.state)?;
        }
        let targets = batch
            .iter()
            .map(|t| {
                target_q(
                    t.reward,
                    &t.next_state,
                    &self.target_actor,
                    &self.target_critic,
                    self.config.discount,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let states: Vec<&AgentState> = batch.iter().map(|t| &t.state).collect();
        let actions: Vec<f64> = batch.iter().map(|t| t.action).collect();

        let mut g = Graph::new();
        let critic = self.critic.bind(&mut g, true);
        let input = g.leaf_tracked(&critic_input(&states, &actions)?, false);
        let q = critic.forward(&mut g, input)?;
        let loss = g.mse(q, &targets)?;
        let critic_loss = g.value(loss)[0];
        let mut grads = g.backward(loss)?;
        self.critic.store_grads(&critic, &mut grads)?;
        self.critic_opt.step(&mut self.critic)?;

        let rows = batch.len();
        let width = 2 * self.num_modalities;
        let flat: Vec<f64> = states.iter().flat_map(|s| s.values().iter().copied()).collect();
        let s_tensor = Tensor::matrix(rows, width, flat)?;
        let mut g = Graph::new();
        let actor = self.actor.bind(&mut g, true);
        let s = g.leaf_tracked(&s_tensor, false);
        let a = actor.forward(&mut g, s)?;
        let sa = g.concat_cols(&[s, a])?;
        let frozen = self.critic.bind(&mut g, false);
        let q = frozen.forward(&mut g, sa)?;
        let mean_q = g.mean(q);
        let actor_q = g.value(mean_q)[0];
        let objective = g.scale(mean_q, -1.0);
        let mut grads = g.backward(objective)?;
        self.actor.store_grads(&actor, &mut grads)?;
        self.actor_opt.step(&mut self.actor)?;

        soft_update(&mut self.target_critic, &self.critic, self.config.tau)?;
        soft_update(&mut self.target_actor, &self.actor, self.config.tau)?;
        Ok(UpdateStats { critic_loss, actor_q })
    }
}

/// Versioned JSON dump of a whole agent, buffer included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub agent: DdpgAgent,
}

impl AgentCheckpoint {
    pub const VERSION: u32 = 1;

    pub fn to_json(agent: &DdpgAgent) -> Result<String> {
        serde_json::to_string(&AgentCheckpoint {
            version: Self::VERSION,
            agent: agent.clone(),
        })
        .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<DdpgAgent> {
        let ck: AgentCheckpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.version != Self::VERSION {
            return Err(Error::Checkpoint(format!(
                "agent checkpoint version {} is not supported (expected {})",
                ck.version,
                Self::VERSION
            )));
        }
        Ok(ck.agent)
    }
}
