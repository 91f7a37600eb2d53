use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use dynspan::dynconn::DynConn;
use dynspan::index::IntersectionIndex;
use dynspan::spanner::{SpaceMode, SpannerConfig, SpannerEngine};
use dynspan::workload::{generate, star_shapes, GenParams};
use dynspan::{Shape, ShapeKind};
use dynspan_bench::{replay_connectivity, replay_spanner};

fn spanner_replay(c: &mut Criterion) {
    let mut g = c.benchmark_group("spanner_replay");
    g.sample_size(10);
    for psi in [8.0, 16.0, 32.0] {
        let w = generate(&GenParams::new(1, 400, psi, 2, ShapeKind::Disk, 0.3));
        for (name, mode) in [("big", SpaceMode::Big), ("small", SpaceMode::Small)] {
            g.bench_with_input(BenchmarkId::new(name, psi), &w, |b, w| b.iter(|| replay_spanner(w, 0.5, mode)));
        }
    }
    g.finish();
}

fn connectivity_replay(c: &mut Criterion) {
    let mut g = c.benchmark_group("connectivity_replay");
    g.sample_size(10);
    for psi in [8.0, 16.0, 32.0] {
        let w = generate(&GenParams::new(2, 1000, psi, 2, ShapeKind::Disk, 0.3));
        g.bench_with_input(BenchmarkId::new("disks", psi), &w, |b, w| b.iter(|| replay_connectivity(w, SpaceMode::Small)));
    }
    g.finish();
}

/// Insert then delete the big disk of the star configuration.
fn star_update(c: &mut Criterion) {
    let mut g = c.benchmark_group("star_update");
    g.sample_size(10);
    for psi in [8.0, 16.0, 32.0, 64.0] {
        let (big, small) = star_shapes(psi);
        let mut e = SpannerEngine::new(SpannerConfig::new(ShapeKind::Disk, 2, psi, 0.5, SpaceMode::Small));
        for s in &small {
            e.insert(*s).unwrap();
        }
        g.bench_function(BenchmarkId::from_parameter(psi), |b| {
            b.iter(|| {
                let added = e.insert(big).unwrap().added.len();
                let removed = e.delete(big.id).unwrap().removed.len();
                black_box(added + removed)
            })
        });
    }
    g.finish();
}

fn cube_queries(c: &mut Criterion) {
    let mut g = c.benchmark_group("interval_tree_query");
    for dim in [2usize, 3, 4] {
        for n in [1_000usize, 10_000] {
            let w = generate(&GenParams::new(3, n, 16.0, dim, ShapeKind::Cube, 0.0).with_region(0.0, 4096.0));
            let mut idx = IntersectionIndex::for_kind(ShapeKind::Cube, dim, 16.0);
            for op in &w.ops {
                if let dynspan::workload::Op::Insert(s) = op {
                    idx.insert(s).unwrap();
                }
            }
            let q = Shape::cube(u64::MAX, &vec![2048.0; dim], 8.0);
            g.bench_with_input(BenchmarkId::new(format!("d{dim}"), n), &idx, |b, idx| b.iter(|| idx.query(black_box(&q))));
        }
    }
    g.finish();
}

fn dynconn_churn(c: &mut Criterion) {
    c.bench_function("dynconn_cycle_cut_1000", |b| {
        b.iter_batched(
            || {
                let mut g = DynConn::new();
                let ids: Vec<_> = (0..1000u64).map(|i| g.add_edge(i, (i + 1) % 1000)).collect();
                (g, ids)
            },
            |(mut g, ids)| {
                for id in ids.iter().step_by(7) {
                    g.remove_edge(*id);
                }
                black_box(g.connected(0, 500))
            },
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, spanner_replay, connectivity_replay, star_update, cube_queries, dynconn_churn);
criterion_main!(benches);
