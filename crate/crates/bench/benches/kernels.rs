use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rnl_core::bracket::{act, BasisChange};
use rnl_core::certify::certify_srn_nice;
use rnl_core::corpus::lookup;
use rnl_core::curvature::{ricci_extension, ricci_nilpotent};
use rnl_core::derivations::{derivation_space, Derivation};
use rnl_core::moment::moment_map;
use rnl_core::search::{search_rn_metric, SearchConfig};

fn kernels(c: &mut Criterion) {
    let h7 = lookup("heisenberg:7").unwrap().bracket;
    let fil6 = lookup("filiform:6").unwrap().bracket;
    let tricky = lookup("tricky5").unwrap().bracket;

    let n = fil6.dim();
    let g = BasisChange::new(rnl_core::linalg::Mat::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + i as f64 / 7.0
        } else if j == i + 1 {
            0.3
        } else {
            0.0
        }
    }))
    .unwrap();
    let moved = act(&g, &fil6).unwrap();

    c.bench_function("moment_map/filiform6", |b| b.iter(|| moment_map(black_box(&moved))));
    c.bench_function("ricci_nilpotent/heisenberg7", |b| b.iter(|| ricci_nilpotent(black_box(&h7))));

    let d = Derivation::diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &fil6).unwrap();
    c.bench_function("ricci_extension/filiform6", |b| b.iter(|| ricci_extension(black_box(&d), &fil6)));

    c.bench_function("derivation_space/tricky5", |b| b.iter(|| derivation_space(black_box(&tricky))));

    let dh = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0];
    c.bench_function("certify_nice/heisenberg7", |b| b.iter(|| certify_srn_nice(black_box(&dh), &h7)));

    let h3 = lookup("heisenberg:3").unwrap().bracket;
    let d3 = Derivation::diagonal(&[1.0, 1.0, 2.0], &h3).unwrap();
    let config = SearchConfig {
        budget: 2000,
        seed: 7,
        warm_starts: Vec::new(),
    };
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    group.bench_function("heisenberg3", |b| b.iter(|| search_rn_metric(black_box(&d3), &h3, &config)));
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
