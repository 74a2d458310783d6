use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relaxvi::checks::{inner_loop_families, random_point};
use relaxvi::constraints::{project_halfspace, project_halfspace_pair, Halfspace};
use relaxvi::innerloop::{run_inner, DEFAULT_MAX_INNER};
use relaxvi::oracle::random_pair_instance;
use relaxvi::solver::outer_step;
use relaxvi_bench::{family, power_schedule, quiet_options, warm_state};

fn projections(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = Halfspace::new(random_point(&mut rng, 4, 2.0), 0.5).unwrap();
    let y = random_point(&mut rng, 4, 4.0);
    let (csep, z, w, _) = random_pair_instance(&mut rng, 4);
    let mut g = c.benchmark_group("projection");
    g.bench_function("halfspace", |b| {
        b.iter(|| project_halfspace(black_box(&h), black_box(&y)))
    });
    g.bench_function("pair", |b| {
        b.iter(|| project_halfspace_pair(black_box(&csep), black_box(&z), black_box(&w)))
    });
    g.finish();
}

fn inner_loop(c: &mut Criterion) {
    let mut g = c.benchmark_group("inner_loop");
    for (name, cf) in inner_loop_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let starts: Vec<_> = std::iter::repeat_with(|| random_point(&mut rng, 2, 4.0))
            .filter(|z| cf.value(z) > 0.0)
            .take(32)
            .collect();
        for theta_alpha in [0.1, 0.01] {
            g.bench_with_input(
                BenchmarkId::new(name, theta_alpha),
                &theta_alpha,
                |b, &ta| {
                    let mut i = 0usize;
                    b.iter(|| {
                        i = (i + 1) % starts.len();
                        run_inner(&cf, &starts[i], 1.0, ta, DEFAULT_MAX_INNER).unwrap()
                    })
                },
            );
        }
    }
    g.finish();
}

fn outer_steps(c: &mut Criterion) {
    let sched = power_schedule();
    let opts = quiet_options(usize::MAX);
    let mut g = c.benchmark_group("outer_step");
    for name in ["ball-m1", "ball-m4", "polyhedron", "a2", "a3"] {
        let (problem, x0) = family(name);
        let base = warm_state(&problem, x0, 1000);
        g.bench_function(name, |b| {
            b.iter_batched(
                || base.clone(),
                |mut s| outer_step(&problem, &sched, &opts, &mut s).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, projections, inner_loop, outer_steps);
criterion_main!(benches);
