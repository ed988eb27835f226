use flexmod::ddpg::{
    compute_reward, select_action, soft_update, target_q, AgentState, DdpgAgent, DdpgConfig, Transition,
};
use flexmod::nn::{Activation, MlpParams};
use flexmod::rng::{seeded, stream};
use proptest::prelude::*;

/// Trains on the stateless bandit `R = −(β − 0.7)²` and returns the final
/// deterministic action along with the number of agent updates run.
pub fn bandit(seed: u64, max_updates: usize) -> (f64, usize) {
    let cfg = DdpgConfig {
        hidden: vec![32, 32],
        actor_lr: 1e-3,
        critic_lr: 1e-3,
        tau: 0.01,
        discount: 0.0,
        capacity: 2000,
        batch_size: 32,
        noise_std: 0.3,
        noise_decay: 0.9995,
        ..DdpgConfig::default()
    };
    let mut agent = DdpgAgent::new(cfg, 1, &mut stream(seed, "agent-init", &[])).unwrap();
    let s = AgentState::new(&[1.0], &[1.0]).unwrap();
    let mut noise = stream(seed, "agent-noise", &[]);
    let mut replay = stream(seed, "agent-replay", &[]);
    let mut updates = 0;
    while updates < max_updates {
        let beta = agent.act(&s, &mut noise).unwrap();
        let r = -(beta - 0.7) * (beta - 0.7);
        agent
            .remember(Transition::new(s.clone(), beta, r, s.clone()).unwrap())
            .unwrap();
        if agent.train(&mut replay).unwrap().is_some() {
            updates += 1;
        }
    }
    (agent.policy(&s).unwrap(), updates)
}

#[test]
fn bandit_policy_converges_near_optimum() {
    let finals: Vec<f64> = (0..5).map(|seed| bandit(seed, 5000).0).collect();
    let hits = finals.iter().filter(|b| (*b - 0.7).abs() < 0.1).count();
    assert!(hits >= 4, "{finals:?}");
}

fn dense(net: &MlpParams, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for l in net.layers() {
        let (out, inp) = (l.out_dim(), l.in_dim());
        h = (0..out)
            .map(|o| {
                let z = l.bias.values()[o] + (0..inp).map(|i| l.weight.values()[o * inp + i] * h[i]).sum::<f64>();
                l.activation.apply(z)
            })
            .collect();
    }
    h
}

#[test]
fn target_q_matches_hand_chained_oracle() {
    let mut rng = seeded(5);
    let actor = MlpParams::init(&[4, 6, 1], &[Activation::Tanh, Activation::Sigmoid], &mut rng).unwrap();
    let critic = MlpParams::init(
        &[5, 7, 3, 1],
        &[Activation::Relu, Activation::Tanh, Activation::Identity],
        &mut rng,
    )
    .unwrap();
    let s = AgentState::new(&[0.6, 0.8], &[0.0, 1.0]).unwrap();
    let a = dense(&actor, s.values())[0];
    let mut sa = s.values().to_vec();
    sa.push(a);
    let expected = -0.25 + 0.9 * dense(&critic, &sa)[0];
    let got = target_q(-0.25, &s, &actor, &critic, 0.9).unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn reward_shape() {
    let cfg = DdpgConfig::default();
    assert_eq!(compute_reward(cfg.target_accuracy, &cfg), 0.0);
    assert!((compute_reward(0.0, &cfg) - (-0.941)).abs() < 1e-3);
    assert!((compute_reward(0.0, &cfg) - (64f64.powf(-0.68) - 1.0)).abs() < 1e-6);
    let grid: Vec<f64> = (0..=68).map(|i| compute_reward(i as f64 / 100.0, &cfg)).collect();
    assert!(grid.windows(2).all(|w| w[0] < w[1]));
    assert!(grid.iter().all(|r| (-1.0..=0.0).contains(r)));
}

#[test]
fn noiseless_selection_is_deterministic() {
    let agent = DdpgAgent::new(DdpgConfig::default(), 2, &mut seeded(0)).unwrap();
    let s = AgentState::new(&[0.6, 0.8], &[0.8, 0.6]).unwrap();
    let a = select_action(&agent.actor, &s, 0.0, &mut seeded(1)).unwrap();
    let b = select_action(&agent.actor, &s, 0.0, &mut seeded(2)).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn soft_update_is_convex(seed in any::<u64>(), tau in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let acts = [Activation::Relu, Activation::Identity];
        let source = MlpParams::init(&[3, 4, 1], &acts, &mut rng).unwrap();
        let mut target = MlpParams::init(&[3, 4, 1], &acts, &mut rng).unwrap();
        let old = target.clone();
        soft_update(&mut target, &source, tau).unwrap();
        for ((t, o), s) in target.parameters().zip(old.parameters()).zip(source.parameters()) {
            for ((tv, ov), sv) in t.values().iter().zip(o.values()).zip(s.values()) {
                let (lo, hi) = (ov.min(*sv), ov.max(*sv));
                prop_assert!(*tv >= lo - 1e-15 && *tv <= hi + 1e-15);
            }
        }
    }
}
