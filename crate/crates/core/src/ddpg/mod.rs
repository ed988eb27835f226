//! The server-side agent that picks the blend weight `β` each round.
//!
//! The state is the concatenation `(γ̂, ω̂)` of the importance and quality
//! vectors; the action is a scalar in `[0, 1]` produced by a sigmoid actor
//! head. Rewards follow `φ^(acc − target) − 1`, clamped above at zero.

mod agent;
mod replay;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agent::{select_action, soft_update, target_q, AgentCheckpoint, DdpgAgent, UpdateStats};
pub use replay::ReplayBuffer;

/// Tolerance for the unit-norm check on each half of an [`AgentState`].
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgConfig {
    /// Hidden widths shared by actor and critic.
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    /// Discount `λ`.
    pub discount: f64,
    pub capacity: usize,
    pub batch_size: usize,
    /// Agent updates per FL round once the buffer holds a full batch.
    pub updates_per_round: usize,
    pub noise_std: f64,
    /// Multiplied into the noise std after every exploratory action.
    pub noise_decay: f64,
    pub phi: f64,
    pub target_accuracy: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            hidden: vec![64, 64, 64],
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            tau: 1e-3,
            discount: 0.99,
            capacity: 1000,
            batch_size: 8,
            updates_per_round: 1,
            noise_std: 0.2,
            noise_decay: 0.995,
            phi: 64.0,
            target_accuracy: 0.68,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: String| if ok { Ok(()) } else { Err(Error::config(field, msg)) };
        check(
            self.hidden.iter().all(|&h| h > 0),
            "agent.hidden",
            format!("widths must be positive, got {:?}", self.hidden),
        )?;
        check(
            self.actor_lr > 0.0,
            "agent.actor_lr",
            format!("must be positive, got {}", self.actor_lr),
        )?;
        check(
            self.critic_lr > 0.0,
            "agent.critic_lr",
            format!("must be positive, got {}", self.critic_lr),
        )?;
        check(
            self.tau > 0.0 && self.tau <= 1.0,
            "agent.tau",
            format!("must lie in (0, 1], got {}", self.tau),
        )?;
        check(
            (0.0..=1.0).contains(&self.discount),
            "agent.discount",
            format!("must lie in [0, 1], got {}", self.discount),
        )?;
        check(self.capacity > 0, "agent.capacity", "must be positive".into())?;
        check(
            self.batch_size > 0 && self.batch_size <= self.capacity,
            "agent.batch_size",
            format!("must lie in 1..={}, got {}", self.capacity, self.batch_size),
        )?;
        check(
            self.noise_std >= 0.0,
            "agent.noise_std",
            format!("must be non-negative, got {}", self.noise_std),
        )?;
        check(
            self.noise_decay > 0.0 && self.noise_decay <= 1.0,
            "agent.noise_decay",
            format!("must lie in (0, 1], got {}", self.noise_decay),
        )?;
        check(self.phi > 1.0, "agent.phi", format!("must exceed 1, got {}", self.phi))?;
        check(
            (0.0..=1.0).contains(&self.target_accuracy),
            "agent.target_accuracy",
            format!("must lie in [0, 1], got {}", self.target_accuracy),
        )
    }
}

/// `min(0, φ^(acc − target) − 1)`.
pub fn compute_reward(acc: f64, config: &DdpgConfig) -> f64 {
    (config.phi.powf(acc - config.target_accuracy) - 1.0).min(0.0)
}

/// `(γ̂¹…γ̂ᴹ, ω̂¹…ω̂ᴹ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState(Vec<f64>);

impl AgentState {
    pub fn new(importance: &[f64], quality: &[f64]) -> Result<Self> {
        if importance.is_empty() || importance.len() != quality.len() {
            return Err(Error::shape("AgentState::new", importance.len(), quality.len()));
        }
        for (name, half) in [("importance", importance), ("quality", quality)] {
            let norm = half.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::invalid(format!(
                    "{name} half of the agent state has norm {norm}, expected 1"
                )));
            }
        }
        let mut v = importance.to_vec();
        v.extend_from_slice(quality);
        Ok(AgentState(v))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn num_modalities(&self) -> usize {
        self.0.len() / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: AgentState,
    pub action: f64,
    pub reward: f64,
    pub next_state: AgentState,
}

impl Transition {
    pub fn new(state: AgentState, action: f64, reward: f64, next_state: AgentState) -> Result<Self> {
        if !(0.0..=1.0).contains(&action) {
            return Err(Error::invalid(format!("action {action} outside [0, 1]")));
        }
        if !(-1.0..=0.0).contains(&reward) {
            return Err(Error::invalid(format!("reward {reward} outside [-1, 0]")));
        }
        if state.0.len() != next_state.0.len() {
            return Err(Error::shape("Transition::new", state.0.len(), next_state.0.len()));
        }
        Ok(Transition {
            state,
            action,
            reward,
            next_state,
        })
    }
}
