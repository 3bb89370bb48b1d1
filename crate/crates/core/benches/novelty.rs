//! Novelty scoring and scenario sweeps, rayon vs sequential.
//!
//! `cargo bench -p sola-core` measures the default (rayon) build against an
//! inline sequential loop; `cargo bench -p sola-core --no-default-features`
//! measures the sequential fallback build.

use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sola_core::config::DomainConfig;
use sola_core::matcher::{novelty_score, similarity};
use sola_core::model::{PatternElement, Provenance, ScId, SeedCommand};
use sola_core::sim::{run_scenario, sweep, Scenario};
use sola_core::{parallel, tokenize, Token};

const WORDS: [&str; 12] = [
    "turn", "off", "on", "the", "light", "in", "kitchen", "make", "dark", "bright", "switch", "hall",
];

fn store(n: usize) -> Vec<SeedCommand> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(3..9);
            let var = rng.gen_range(0..len);
            let pattern = (0..len)
                .map(|j| {
                    if j == var {
                        PatternElement::Variable { name: "X".into(), slot_type: "place".into() }
                    } else {
                        PatternElement::Literal(Token::new(WORDS[rng.gen_range(0..WORDS.len())]).unwrap())
                    }
                })
                .collect();
            SeedCommand {
                id: ScId(i as u64 + 1),
                pattern,
                action_id: "A".into(),
                provenance: Provenance::Developer,
                task_id: "t".into(),
                created_at: 0,
                always_elicit: vec![],
            }
        })
        .collect()
}

fn backend() -> &'static str {
    if parallel::enabled() {
        "rayon"
    } else {
        "sequential-build"
    }
}

fn bench_novelty(c: &mut Criterion) {
    let cmd = tokenize("please turn off the light in the kitchen now");
    let mut group = c.benchmark_group("novelty_score");
    for n in [100, 1_000, 10_000] {
        let sc = store(n);
        group.bench_with_input(BenchmarkId::new(backend(), n), &sc, |b, sc| {
            b.iter(|| novelty_score(&cmd, sc, |_| true, 0.5, 3).novelty_score)
        });
        group.bench_with_input(BenchmarkId::new("inline-sequential", n), &sc, |b, sc| {
            b.iter(|| {
                sc.iter()
                    .map(|s| 1.0 - similarity(&cmd, s, 0.5).unwrap().similarity)
                    .fold(1.0_f64, f64::min)
            })
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let cfg = DomainConfig::load(&data.join("smart_home.json")).unwrap();
    let scenario = Scenario::load(&data.join("scenarios/learning_curve.json")).unwrap();
    let seeds: Vec<u64> = (0..8).collect();
    let mut group = c.benchmark_group("scenario_sweep_8_seeds");
    group.sample_size(10);
    group.bench_function(backend(), |b| b.iter(|| sweep(&scenario, &cfg, &seeds).len()));
    group.bench_function("inline-sequential", |b| {
        b.iter(|| seeds.iter().map(|s| run_scenario(&scenario, &cfg, *s).unwrap().metrics.records.len()).sum::<usize>())
    });
    group.finish();
}

criterion_group!(benches, bench_novelty, bench_sweep);
criterion_main!(benches);
