use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use seedbank_core::config::Config;
use seedbank_core::dual::{run_dual, DualRates, Marker};
use seedbank_core::pfde::solve_two_component;
use seedbank_core::spde::{initial_heaviside, step_in_place, NoiseIncrement};
use seedbank_core::stats::{stream_rng, Stream};

fn spde_step(c: &mut Criterion) {
    let cfg = Config::default().sim_config().unwrap();
    let n = cfg.grid.len();
    let mut rng = stream_rng(1, Stream::Spde);
    let mut scratch = Vec::with_capacity(n);
    let mut noise = NoiseIncrement::new(n, cfg.dt, cfg.grid.dx());
    c.bench_function("spde_step_301_sites", |b| {
        b.iter_batched_ref(
            || initial_heaviside(cfg.grid),
            |state| {
                for k in 0..50 {
                    step_in_place(state, &mut scratch, &mut noise, &cfg, &mut rng, k).unwrap();
                }
            },
            BatchSize::SmallInput,
        )
    });
}

fn dual(c: &mut Criterion) {
    let rates = DualRates::for_lattice(0.1, 1.0, 1.0);
    let start = [(0.0, Marker::Active), (0.5, Marker::Dormant)];
    let mut rng = stream_rng(2, Stream::Dual);
    c.bench_function("dual_two_walkers_t0.5", |b| {
        b.iter(|| run_dual(black_box(&start), 0.5, rates, &mut rng).unwrap())
    });
}

fn pfde(c: &mut Criterion) {
    let cfg = Config::default();
    let mut pcfg = cfg.pfde_config(10.0, cfg.pfde.b).unwrap();
    pcfg.t_max = 0.25;
    let mut group = c.benchmark_group("pfde");
    group.sample_size(10);
    group.bench_function("two_component_to_0.25", |b| {
        b.iter(|| solve_two_component(black_box(&pcfg)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, spde_step, dual, pfde);
criterion_main!(benches);
