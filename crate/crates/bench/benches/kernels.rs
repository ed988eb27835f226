use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use flexmod::data::Batch;
use flexmod::fedsim::{GlobalModel, ModelConfig};
use flexmod::importance::value_cache;
use flexmod::nn::{Graph, Tensor};
use flexmod::rng::seeded;
use flexmod::scheduler::{solve_allocation, Combination, CombinationTable};
use rand::Rng;

fn batch(dims: &[usize], n: usize, k: usize, rng: &mut impl Rng) -> Batch {
    Batch {
        features: dims
            .iter()
            .map(|&d| Tensor::matrix(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect(),
        labels: (0..n).map(|_| rng.random_range(0..k)).collect(),
    }
}

fn knapsack(c: &mut Criterion) {
    let mut rng = seeded(1);
    let mut table = CombinationTable::new(3, (0..7).map(|_| rng.random_range(1..=8)).collect()).unwrap();
    table
        .set_raw_indices(
            (0..3).map(|_| rng.random()).collect(),
            (0..3).map(|_| rng.random()).collect(),
        )
        .unwrap();
    c.bench_function("solve_allocation M=3 T=30", |b| {
        b.iter(|| solve_allocation(black_box(&table), 0.4, 30).unwrap())
    });
    let mut wide = CombinationTable::new(5, (0..31).map(|_| rng.random_range(1..=8)).collect()).unwrap();
    wide.set_raw_indices(
        (0..5).map(|_| rng.random()).collect(),
        (0..5).map(|_| rng.random()).collect(),
    )
    .unwrap();
    c.bench_function("solve_allocation M=5 T=100", |b| {
        b.iter(|| solve_allocation(black_box(&wide), 0.4, 100).unwrap())
    });
}

fn shapley(c: &mut Criterion) {
    let mut rng = seeded(2);
    for dims in [vec![3, 12], vec![3, 4, 5, 6]] {
        let model = GlobalModel::init(&ModelConfig::default(), &dims, 8, &mut rng).unwrap();
        let val = batch(&dims, 60, 8, &mut rng);
        c.bench_function(&format!("shapley M={} n=60", dims.len()), |b| {
            b.iter(|| value_cache(black_box(&model), &val).unwrap().shapley())
        });
    }
}

fn forward_backward(c: &mut Criterion) {
    let mut rng = seeded(3);
    let dims = [3, 12];
    let model = GlobalModel::init(&ModelConfig::default(), &dims, 8, &mut rng).unwrap();
    let data = batch(&dims, 64, 8, &mut rng);
    c.bench_function("forward+backward batch=64", |b| {
        b.iter(|| {
            let mut g = Graph::new();
            let pass = model.record(&mut g, &data.features, Combination::full(2)).unwrap();
            let loss = g.cross_entropy(pass.logits, &data.labels).unwrap();
            g.backward(loss).unwrap()
        })
    });
}

criterion_group!(benches, knapsack, shapley, forward_backward);
criterion_main!(benches);
