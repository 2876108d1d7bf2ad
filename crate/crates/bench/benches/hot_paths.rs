//! Microbenchmarks for the numeric kernels the training and evaluation
//! loops spend their time in: network passes, the stable closed-loop
//! hypothesis, one integrator step, and the Riccati solve behind the
//! linear baseline.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use lyapctl_core::ode::rk4_step;
use lyapctl_core::{
    linearize, solve_dare, stable_hypothesis, DropoutSpec, Matrix, Mlp, PendulumNLink, Plant,
    Rng, StabilityConfig, StabilityHead,
};

/// The two-link pendulum is the mid-size workload: four states, two
/// inputs, and the network shapes the shipped configs use.
fn two_link() -> PendulumNLink {
    PendulumNLink::standard(2).unwrap()
}

fn stab_2link() -> StabilityConfig {
    StabilityConfig::diagonal(&[0.60, 0.32, 0.045, 0.035], 0.5, 1e-12).unwrap()
}

fn bench_mlp_forward(c: &mut Criterion) {
    let mut rng = Rng::new(7);
    let net = Mlp::glorot(&[4, 64, 64, 64, 2], &mut rng);
    let x = rng.uniform_box(&[-1.0; 4], &[1.0; 4]);
    c.bench_function("mlp_forward_4x64x64x64x2", |b| {
        b.iter(|| net.forward(black_box(&x)))
    });
}

fn bench_mlp_backward(c: &mut Criterion) {
    let mut rng = Rng::new(7);
    let net = Mlp::glorot(&[4, 64, 64, 64, 2], &mut rng);
    let x = rng.uniform_box(&[-1.0; 4], &[1.0; 4]);
    let upstream = [1.0, -1.0];
    c.bench_function("mlp_backward_4x64x64x64x2", |b| {
        b.iter(|| {
            let cache = net.forward_with(black_box(&x), &DropoutSpec::OFF, None);
            net.backward(&cache, black_box(&upstream))
        })
    });
}

fn bench_stable_hypothesis(c: &mut Criterion) {
    let stab = stab_2link();
    let mut rng = Rng::new(11);
    let head = StabilityHead::init(&stab, &[64, 64, 64], &mut rng);
    let x = rng.uniform_box(&[-1.0; 4], &[1.0; 4]);
    c.bench_function("stable_hypothesis_2link", |b| {
        b.iter(|| stable_hypothesis(&stab, &head, black_box(&x)))
    });
}

fn bench_rk4_step(c: &mut Criterion) {
    let plant = two_link();
    let mut rng = Rng::new(13);
    let x = plant.state_domain().sample(&mut rng);
    let u = vec![1.0, -1.0];
    c.bench_function("rk4_step_pendulum2", |b| {
        b.iter(|| rk4_step(|s| plant.deriv(s, &u), black_box(&x), 0.01).unwrap())
    });
}

fn bench_dare(c: &mut Criterion) {
    let plant = two_link();
    let (a, b_mat) = linearize(&plant, 1e-6).unwrap();
    let dt = 0.01;
    let ad = Matrix::identity(4).add(&a.scale(dt));
    let bd = b_mat.scale(dt);
    let q = Matrix::diag(&[0.60, 0.32, 0.045, 0.035]);
    let r = Matrix::diag(&[0.1, 0.1]);
    c.bench_function("dare_pendulum2", |b| {
        b.iter(|| solve_dare(black_box(&ad), black_box(&bd), &q, &r).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_mlp_forward,
    bench_mlp_backward,
    bench_stable_hypothesis,
    bench_rk4_step,
    bench_dare
);
criterion_main!(kernels);
