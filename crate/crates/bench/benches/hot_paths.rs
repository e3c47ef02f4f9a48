use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use scl_core::jets::{jet_batch, param_gradient};
use scl_core::sampler::mh_run;
use scl_core::{JetOrder, Mlp, ProposalSpec, SampleBox};

fn grid_points(n: usize) -> Vec<f64> {
    (0..n).flat_map(|i| [6.28 * (i as f64 + 0.5) / n as f64, ((i * 7) % n) as f64 / n as f64]).collect()
}

fn jets(c: &mut Criterion) {
    let model = Mlp::glorot(&[2, 50, 50, 50, 50, 1], 0).unwrap();
    let pts = grid_points(1000);
    c.bench_function("jet_forward_second_1000", |b| {
        b.iter(|| jet_batch(&model, black_box(&pts), JetOrder::Second, &[0, 1]).unwrap())
    });
    c.bench_function("param_gradient_convection_1000", |b| {
        b.iter(|| {
            param_gradient(&model, black_box(&pts), JetOrder::First, &[0, 1], |j, s| {
                let n = j.len();
                for i in 0..n {
                    let r = j.grad(i, 1) + 30.0 * j.grad(i, 0);
                    s.add_loss(i, r * r / n as f64);
                    let d = 2.0 * r / n as f64;
                    s.seed_grad(i, 1, d);
                    s.seed_grad(i, 0, 30.0 * d);
                }
            })
            .unwrap()
        })
    });
}

fn sampler(c: &mut Criterion) {
    let bx = SampleBox::new(vec![0.0, 0.0], vec![6.28, 1.0]).unwrap();
    let spec = ProposalSpec::new(vec![0.25, 0.01], 100, 20).with_replicas(50);
    c.bench_function("mh_run_50x100", |b| {
        b.iter(|| mh_run(|z| (z[0] - 30.0 * z[1]).sin().powi(2), black_box(&bx), &spec).unwrap())
    });
}

criterion_group!(benches, jets, sampler);
criterion_main!(benches);
