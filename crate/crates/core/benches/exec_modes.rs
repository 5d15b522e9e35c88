//! Sequential vs parallel execution of the data-parallel workloads:
//! PL certification grid, gradient check, lemma audit and a sweep of
//! trajectories from many initial states.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gdad_core::dynamics::schedule_for;
use gdad_core::integrate::{integrate, IntegratorConfig};
use gdad_core::problems::{certify_pl_side_with, make_nc_pl_problem, make_nc_sc_problem, PlSide};
use gdad_core::verify::{audit_lemma_with, gradcheck_seeded, Lemma};
use gdad_core::Exec;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn pl_grid(c: &mut Criterion) {
    let p = make_nc_sc_problem(1.0, 2.0).unwrap();
    let region = p.cert_box().clone();
    let mut group = c.benchmark_group("pl_grid_201");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(certify_pl_side_with(exec, &p, PlSide::Y, &region, 201).unwrap()))
        });
    }
    group.finish();
}

fn gradcheck(c: &mut Criterion) {
    let p = make_nc_sc_problem(1.0, 2.0).unwrap().with_dim(8).unwrap();
    let mut group = c.benchmark_group("gradcheck_2000_points");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(gradcheck_seeded(exec, &p, 2000, 1, 1e-5).unwrap()))
        });
    }
    group.finish();
}

fn lemma_audit(c: &mut Criterion) {
    let p = make_nc_pl_problem(1.0, 2.0).unwrap();
    let s = schedule_for(p.regime().unwrap(), p.constants()).unwrap();
    let traj = integrate(&p, &s, &[1.0], &[1.0], &IntegratorConfig::auto(50.0)).unwrap();
    let mut group = c.benchmark_group("lemma_audit_5000_samples");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(audit_lemma_with(exec, &p, &traj, Lemma::Lem3, None).unwrap()))
        });
    }
    group.finish();
}

fn trajectory_sweep(c: &mut Criterion) {
    let p = make_nc_sc_problem(1.0, 2.0).unwrap();
    let s = schedule_for(p.regime().unwrap(), p.constants()).unwrap();
    let cfg = IntegratorConfig::auto(20.0);
    let starts: Vec<(f64, f64)> = (0..64)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 64.0;
            (a.cos(), a.sin())
        })
        .collect();
    let mut group = c.benchmark_group("trajectory_sweep_64");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                black_box(exec.map(&starts, |&(x, y)| {
                    integrate(&p, &s, &[x], &[y], &cfg).unwrap().final_state().x[0]
                }))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, pl_grid, gradcheck, lemma_audit, trajectory_sweep);
criterion_main!(benches);
