use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use zeno_core::effective::{pauli_rates_hamiltonian, solve_pauli};
use zeno_core::random::{random_hermitian, random_matrix, seeded};
use zeno_core::{lz_effective_ode, lz_exact, make_schedule, matrix_exp, LzOptions, LzParams, LzScheduleKind, OrthonormalBasis};

fn bench_matrix_exp(c: &mut Criterion) {
    let mut rng = seeded(1);
    let mut group = c.benchmark_group("matrix_exp");
    for d in [2usize, 4, 16] {
        let a = random_matrix(&mut rng, d);
        group.bench_function(format!("d{d}"), |b| b.iter(|| matrix_exp(black_box(&a))));
    }
    group.finish();
}

fn bench_lz(c: &mut Criterion) {
    let p = LzParams::new(1.0, 10.0).unwrap();
    let schedule = make_schedule(&p, LzScheduleKind::Uniform, 16).unwrap();
    let opts = LzOptions::default();
    let mut group = c.benchmark_group("lz");
    group.sample_size(10);
    group.bench_function("exact_n16", |b| b.iter(|| lz_exact(&p, black_box(&schedule), &opts).unwrap()));
    group.bench_function("effective_n16", |b| {
        b.iter(|| lz_effective_ode(&p, black_box(&schedule), opts.tol).unwrap())
    });
    group.finish();
}

fn bench_pauli(c: &mut Criterion) {
    let d = 8;
    let h = random_hermitian(&mut seeded(2), d);
    let w = pauli_rates_hamiltonian(&h, &OrthonormalBasis::computational(d), 1.0, 0.1).unwrap();
    let mut p0 = vec![0.0; d];
    p0[0] = 1.0;
    c.bench_function("solve_pauli_d8", |b| {
        b.iter(|| solve_pauli(&|_| Ok(w.clone()), black_box(&p0), 0.0, 5.0, 1e-10).unwrap())
    });
}

criterion_group!(benches, bench_matrix_exp, bench_lz, bench_pauli);
criterion_main!(benches);
