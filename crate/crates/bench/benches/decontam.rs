use criterion::{black_box, criterion_group, criterion_main, Criterion};
use wslrr::{decontaminate, FiniteJoint, Method, ScenarioSpec};

fn uniform_joint(k: usize, n: usize) -> FiniteJoint {
    let features = (0..n).map(|i| vec![i as f64]).collect();
    let p = 1.0 / (k * n) as f64;
    FiniteJoint::new(k, features, vec![vec![p; n]; k]).unwrap()
}

fn bench(c: &mut Criterion) {
    let j = uniform_joint(4, 8);
    c.bench_function("cl_inversion_k4", |b| {
        b.iter(|| decontaminate(black_box(&ScenarioSpec::Cl {}), &j, Method::Inversion).unwrap())
    });
    c.bench_function("pcpl_marginal_chain_k4", |b| {
        b.iter(|| decontaminate(black_box(&ScenarioSpec::Pcpl {}), &j, Method::MarginalChain).unwrap())
    });
    let j2 = FiniteJoint::new(
        2,
        (0..8).map(|i| vec![i as f64]).collect(),
        vec![(0..8).map(|i| 0.1 - 0.005 * i as f64).collect(), (0..8).map(|i| 0.025 + 0.005 * i as f64).collect()],
    )
    .unwrap();
    c.bench_function("sconf_n8", |b| {
        b.iter(|| decontaminate(black_box(&ScenarioSpec::Sconf {}), &j2, Method::Auto).unwrap())
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
