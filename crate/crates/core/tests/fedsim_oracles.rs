use flexmod::data::Batch;
use flexmod::fedsim::{
    aggregate, evaluate, forward_full, local_train, run_experiment, ExperimentConfig, GlobalModel, LocalTrainConfig,
    ModelConfig, SlotMode, StrategyKind,
};
use flexmod::nn::{forward_mlp, Graph, MlpParams, SgdConfig, Tensor};
use flexmod::rng::seeded;
use flexmod::scheduler::{Combination, Schedule};
use rand::seq::SliceRandom;
use rand::Rng;

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn random_batch(dims: &[usize], n: usize, k: usize, rng: &mut impl Rng) -> Batch {
    Batch {
        features: dims.iter().map(|&d| random_matrix(n, d, rng)).collect(),
        labels: (0..n).map(|_| rng.random_range(0..k)).collect(),
    }
}

fn model(dims: &[usize], k: usize, seed: u64) -> GlobalModel {
    GlobalModel::init(&ModelConfig::default(), dims, k, &mut seeded(seed)).unwrap()
}

fn train_config(batch_size: usize) -> LocalTrainConfig {
    LocalTrainConfig {
        batch_size,
        slot_mode: SlotMode::Sweep,
        sgd: SgdConfig::new(0.1, 0.99, 0.001).unwrap(),
    }
}

#[test]
fn single_modality_forward_is_header_after_encoder() {
    let mut rng = seeded(1);
    let m = model(&[4], 3, 2);
    let batch = random_batch(&[4], 5, 3, &mut rng);
    let z = forward_mlp(&m.encoders[0], &batch.features[0]).unwrap();
    assert_eq!(forward_full(&m, &batch).unwrap(), forward_mlp(&m.header, &z).unwrap());
}

#[test]
fn forward_full_matches_two_stage_oracle() {
    let mut rng = seeded(3);
    let dims = [3, 5, 2];
    let m = model(&dims, 4, 4);
    let batch = random_batch(&dims, 7, 4, &mut rng);
    let zs: Vec<Tensor> = m
        .encoders
        .iter()
        .zip(&batch.features)
        .map(|(e, x)| forward_mlp(e, x).unwrap())
        .collect();
    let rows: Vec<Vec<f64>> = (0..7)
        .map(|r| zs.iter().flat_map(|z| z.row(r).to_vec()).collect())
        .collect();
    let oracle = forward_mlp(&m.header, &Tensor::from_rows(&rows).unwrap()).unwrap();
    assert_eq!(forward_full(&m, &batch).unwrap(), oracle);
}

#[test]
fn recorded_logits_do_not_depend_on_trainable_subset() {
    let mut rng = seeded(5);
    let dims = [3, 4];
    let m = model(&dims, 3, 6);
    let batch = random_batch(&dims, 6, 3, &mut rng);
    let reference = forward_full(&m, &batch).unwrap();
    for mask in 0..4 {
        let mut g = Graph::new();
        let pass = m.record(&mut g, &batch.features, Combination::from_mask(mask)).unwrap();
        assert_eq!(g.value(pass.logits), reference.values());
    }
}

/// Trains every parameter on the same minibatches `local_train` draws.
fn unrestricted_oracle(
    model: &GlobalModel,
    shard: &Batch,
    slots: usize,
    cfg: &LocalTrainConfig,
    seed: u64,
) -> GlobalModel {
    let mut rng = seeded(seed);
    let mut local = model.clone();
    let full = Combination::full(model.num_modalities());
    for _ in 0..slots {
        let mut order: Vec<usize> = (0..shard.len()).collect();
        order.shuffle(&mut rng);
        for rows in order.chunks(cfg.batch_size) {
            let features: Vec<Tensor> = shard.features.iter().map(|x| x.select_rows(rows).unwrap()).collect();
            let labels: Vec<usize> = rows.iter().map(|&r| shard.labels[r]).collect();
            let mut g = Graph::new();
            let pass = local.record(&mut g, &features, full).unwrap();
            let loss = g.cross_entropy(pass.logits, &labels).unwrap();
            let mut grads = g.backward(loss).unwrap();
            local.header.store_grads(&pass.header, &mut grads).unwrap();
            cfg.sgd.apply(&mut local.header).unwrap();
            for (e, b) in local.encoders.iter_mut().zip(&pass.encoders) {
                e.store_grads(b.as_ref().unwrap(), &mut grads).unwrap();
                cfg.sgd.apply(e).unwrap();
            }
        }
    }
    local
}

fn strip_grads(m: &GlobalModel) -> GlobalModel {
    let mut m = m.clone();
    m.header.zero_grads();
    m.encoders.iter_mut().for_each(MlpParams::zero_grads);
    m
}

#[test]
fn full_only_schedule_equals_unrestricted_training() {
    let mut rng = seeded(7);
    let dims = [3, 4];
    let m = model(&dims, 3, 8);
    let shard = random_batch(&dims, 40, 3, &mut rng);
    let cfg = train_config(16);
    let schedule = Schedule {
        slots: vec![Combination::full(2); 3],
    };
    let got = local_train(&m, &shard, &schedule, &cfg, &mut seeded(99)).unwrap().model;
    let oracle = unrestricted_oracle(&m, &shard, 3, &cfg, 99);
    assert_eq!(strip_grads(&got), strip_grads(&oracle));
}

#[test]
fn masked_update_equals_hand_zeroed_gradients() {
    let mut rng = seeded(9);
    let dims = [3, 4];
    let m = model(&dims, 3, 10);
    let shard = random_batch(&dims, 12, 3, &mut rng);
    let cfg = train_config(64);
    let schedule = Schedule {
        slots: vec![Combination::single(0)],
    };
    let got = local_train(&m, &shard, &schedule, &cfg, &mut seeded(1)).unwrap().model;

    // Gradients for everything, then drop encoder 2's by hand.
    let mut g = Graph::new();
    let pass = m.record(&mut g, &shard.features, Combination::full(2)).unwrap();
    let loss = g.cross_entropy(pass.logits, &shard.labels).unwrap();
    let grads = g.backward(loss).unwrap();
    let step = |net: &MlpParams, bound: &flexmod::nn::BoundMlp, keep: bool| -> MlpParams {
        let mut out = net.clone();
        for (l, layer) in out.layers_mut().iter_mut().enumerate() {
            for (t, var) in [
                (&mut layer.weight, bound.weight_var(l)),
                (&mut layer.bias, bound.bias_var(l)),
            ] {
                let gv = grads.wrt(var).unwrap();
                for (v, gr) in t.values_mut().iter_mut().zip(gv) {
                    *v -= if keep { 0.1 * gr } else { 0.0 };
                }
            }
        }
        out
    };
    let header = step(&m.header, &pass.header, true);
    let enc0 = step(&m.encoders[0], pass.encoders[0].as_ref().unwrap(), true);
    let enc1 = step(&m.encoders[1], pass.encoders[1].as_ref().unwrap(), false);
    assert_eq!(got.encoders[1], m.encoders[1]);
    assert_eq!(strip_grads(&got).encoders[1], enc1);
    let close = |a: &MlpParams, b: &MlpParams| {
        a.parameters()
            .zip(b.parameters())
            .all(|(x, y)| x.values().iter().zip(y.values()).all(|(p, q)| (p - q).abs() < 1e-12))
    };
    assert!(close(&got.header, &header));
    assert!(close(&got.encoders[0], &enc0));
}

#[test]
fn unselected_encoders_never_move() {
    let mut rng = seeded(11);
    let dims = [2, 3, 4];
    let m = model(&dims, 3, 12);
    let shard = random_batch(&dims, 30, 3, &mut rng);
    let schedule = Schedule {
        slots: vec![Combination::from_modalities(&[0, 2]), Combination::single(2)],
    };
    let got = local_train(&m, &shard, &schedule, &train_config(8), &mut seeded(2)).unwrap();
    assert_eq!(got.model.encoders[1], m.encoders[1]);
    assert_ne!(got.model.encoders[0], m.encoders[0]);
    assert_ne!(got.model.encoders[2], m.encoders[2]);
    // 4 minibatches × (2 + 1) trained encoders
    assert_eq!(got.gradient_norms.len(), 12);
}

#[test]
fn empty_schedule_returns_model_unchanged() {
    let mut rng = seeded(13);
    let m = model(&[2], 2, 14);
    let shard = random_batch(&[2], 5, 2, &mut rng);
    let got = local_train(&m, &shard, &Schedule::default(), &train_config(4), &mut rng).unwrap();
    assert_eq!(got.model, m);
    assert!(got.gradient_norms.is_empty());
}

fn negated(m: &GlobalModel) -> GlobalModel {
    let mut n = m.clone();
    for t in n.header.parameters_mut() {
        t.values_mut().iter_mut().for_each(|v| *v = -*v);
    }
    for e in &mut n.encoders {
        for t in e.parameters_mut() {
            t.values_mut().iter_mut().for_each(|v| *v = -*v);
        }
    }
    n
}

#[test]
fn aggregate_identities() {
    let m = model(&[3, 2], 4, 15);
    assert_eq!(aggregate(std::slice::from_ref(&m)).unwrap(), m);
    assert_eq!(aggregate(&vec![m.clone(); 5]).unwrap(), m);
    let zero = aggregate(&[m.clone(), negated(&m)]).unwrap();
    assert!(zero.header.parameters().all(|t| t.values().iter().all(|v| *v == 0.0)));
    assert!(zero
        .encoders
        .iter()
        .all(|e| e.parameters().all(|t| t.values().iter().all(|v| *v == 0.0))));
    let other = model(&[3, 3], 4, 16);
    assert!(aggregate(&[m, other]).is_err());
    assert!(aggregate(&[]).is_err());
}

#[test]
fn evaluate_matches_argmax_loop() {
    let mut rng = seeded(17);
    let dims = [3, 4];
    let m = model(&dims, 5, 18);
    let batch = random_batch(&dims, 50, 5, &mut rng);
    let logits = forward_full(&m, &batch).unwrap();
    let mut correct = 0;
    for r in 0..50 {
        let row = logits.row(r);
        let mut best = 0;
        for k in 1..5 {
            if row[k] > row[best] {
                best = k;
            }
        }
        correct += usize::from(best == batch.labels[r]);
    }
    assert_eq!(evaluate(&m, &batch).unwrap().0, correct as f64 / 50.0);
}

fn zero_header(m: &mut GlobalModel) {
    for t in m.header.parameters_mut() {
        t.values_mut().iter_mut().for_each(|v| *v = 0.0);
    }
}

#[test]
fn evaluate_edge_cases() {
    let mut rng = seeded(19);
    let mut m = model(&[2], 4, 20);
    zero_header(&mut m);
    // Uniform logits: ties go to class 0.
    let balanced = Batch {
        features: vec![random_matrix(8, 2, &mut rng)],
        labels: (0..8).map(|i| i % 4).collect(),
    };
    assert_eq!(evaluate(&m, &balanced).unwrap().0, 0.25);
    // Bias towards class 0 on all-zero labels.
    m.header.layers_mut().last_mut().unwrap().bias.values_mut()[0] = 5.0;
    let zeros = Batch {
        features: vec![random_matrix(6, 2, &mut rng)],
        labels: vec![0; 6],
    };
    assert_eq!(evaluate(&m, &zeros).unwrap().0, 1.0);
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "dataset": {
                "source": {"synthetic": {"num_classes": 4, "dims": [3, 5], "informativeness": [0.9, 0.3],
                                          "samples_per_client": 60}},
                "clients": 4, "alpha": 10, "validation_fraction": 0.1
            },
            "model": {"feature_dim": 4, "header_hidden": []},
            "schedule": {"times": {"1": 4, "2": 3, "1,2": 5}, "budget": 24, "batch_size": 32,
                         "learning_rate": 0.1},
            "agent": {},
            "run": {"rounds": 3, "seed": 5}
        }"#,
    )
    .unwrap()
}

#[test]
fn entire_update_packs_four_full_slots() {
    let mut c = small_config();
    c.schedule.strategy = StrategyKind::EntireUpdate;
    let res = run_experiment(&c).unwrap();
    for r in &res.records {
        assert_eq!(r.schedule.slots, vec![Combination::full(2); 4]);
        assert_eq!(r.budget_used, 20);
        assert_eq!(r.idle_time(), 4);
        assert_eq!(r.beta, None);
    }
    assert_eq!(res.total_idle_time(), 12);
}

#[test]
fn entire_update_below_full_cost_does_nothing() {
    let mut c = small_config();
    c.schedule.strategy = StrategyKind::EntireUpdate;
    c.schedule.budget = 4;
    let res = run_experiment(&c).unwrap();
    assert!(res.records.iter().all(|r| r.schedule.is_empty() && r.budget_used == 0));
    assert_eq!(res.final_model, res.initial_model);
    assert!(res.records.iter().all(|r| r.accuracy == res.initial_accuracy));
}

#[test]
fn flexmod_uses_the_budget_it_can() {
    let res = run_experiment(&small_config()).unwrap();
    for r in &res.records {
        let b = r.beta.unwrap();
        assert!((0.0..=1.0).contains(&b));
        assert!(r.budget_used <= 24);
        assert!(r.schedule.is_descending());
        assert!((-1.0..=0.0).contains(&r.reward));
    }
    assert!(res.agent.is_some());
}

#[test]
fn zero_rounds_return_initial_model() {
    let mut c = small_config();
    c.run.rounds = 0;
    let res = run_experiment(&c).unwrap();
    assert!(res.records.is_empty());
    assert_eq!(res.final_model, res.initial_model);
    assert_eq!(res.final_accuracy(), res.initial_accuracy);
}

#[test]
fn same_seed_same_records_and_parallel_matches_serial() {
    let c = small_config();
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a.records, b.records);
    let mut p = c.clone();
    p.run.parallel = true;
    assert_eq!(run_experiment(&p).unwrap().records, a.records);
    let mut other = c;
    other.run.seed = 6;
    assert_ne!(run_experiment(&other).unwrap().records, a.records);
}

#[test]
fn learning_rate_decays_once_per_round() {
    let res = run_experiment(&small_config()).unwrap();
    let lrs: Vec<f64> = res.records.iter().map(|r| r.learning_rate).collect();
    assert_eq!(lrs[0], 0.1);
    assert!((lrs[1] - 0.099).abs() < 1e-15);
    assert!((lrs[2] - 0.09801).abs() < 1e-15);
}
