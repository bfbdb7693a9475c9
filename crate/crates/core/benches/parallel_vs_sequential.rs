//! Rayon pool against the sequential fallback on the two CPU-bound batch
//! jobs: reference solving with proof emission, and DRAT checking.
//! Built without the `parallel` feature both arms run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satevo_core::drat::{check_proof, DratProof};
use satevo_core::formula::CnfFormula;
use satevo_core::generate::random_ksat;
use satevo_core::pool::WorkerPool;
use satevo_core::reference::{solve_with_proof, ReferenceResult};

fn unsat_batch(n: usize) -> Vec<(CnfFormula, DratProof)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let vars = rng.gen_range(40..=60);
        let f = random_ksat(&mut rng, vars, (vars as f64 * 5.0) as usize, 3);
        if let ReferenceResult::Unsat(p) = solve_with_proof(&f) {
            out.push((f, p));
        }
    }
    out
}

fn pools() -> Vec<(&'static str, WorkerPool)> {
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
    vec![("sequential", WorkerPool::sequential()), ("parallel", WorkerPool::new(threads))]
}

fn bench(c: &mut Criterion) {
    let batch = unsat_batch(64);
    let formulas: Vec<CnfFormula> = batch.iter().map(|(f, _)| f.clone()).collect();

    let mut g = c.benchmark_group("check_proofs");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &batch, |b, batch| {
            b.iter(|| pool.map(batch, |(f, p)| check_proof(f, p).verdict.is_valid()).into_iter().filter(|&v| v).count())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("reference_solve");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &formulas, |b, fs| {
            b.iter(|| pool.map(fs, |f| matches!(solve_with_proof(black_box(f)), ReferenceResult::Unsat(_))))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
