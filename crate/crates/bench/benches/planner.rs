//! Hot paths, benchmarked on the bundled urban scenario: exact clearance
//! queries, subproblem assembly, and the embedded solver on the first
//! linearization.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nalgebra::Vector3;
use stlcfs::{build_subproblem, plan, signed_distance, solve};
use stlcfs_bench::{urban_scenario, urban_seed};

fn clearance(c: &mut Criterion) {
    let s = urban_scenario();
    let query = Vector3::new(12.0, 9.0, 6.0);
    c.bench_function("signed_distance/single", |b| {
        b.iter(|| signed_distance(black_box(&query), black_box(&s.obstacles[0])))
    });
    let (_, reference, _, _) = urban_seed();
    c.bench_function("signed_distance/trajectory_sweep", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for p in &reference.positions {
                for obstacle in &s.obstacles {
                    acc += signed_distance(black_box(p), obstacle);
                }
            }
            acc
        })
    });
}

fn assembly(c: &mut Criterion) {
    let (s, reference, rho_ref, mu_ref) = urban_seed();
    c.bench_function("build_subproblem/urban", |b| {
        b.iter(|| build_subproblem(black_box(&s), &reference, &rho_ref, &mu_ref))
    });
}

fn subproblem_solve(c: &mut Criterion) {
    let (s, reference, rho_ref, mu_ref) = urban_seed();
    let (prog, _) = build_subproblem(&s, &reference, &rho_ref, &mu_ref);
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    group.bench_function("first_urban_subproblem", |b| {
        b.iter(|| solve(black_box(&prog), s.params.solver_tol, 20_000, None))
    });
    group.bench_function("full_urban_plan", |b| b.iter(|| plan(black_box(&s))));
    group.finish();
}

criterion_group!(benches, clearance, assembly, subproblem_solve);
criterion_main!(benches);
