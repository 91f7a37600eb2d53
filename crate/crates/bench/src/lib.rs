//! Replay helpers shared by the criterion benchmarks in `benches/`.

use dynspan::connectivity::{ConnectivityConfig, ConnectivityEngine};
use dynspan::spanner::{SpaceMode, SpannerConfig, SpannerEngine};
use dynspan::workload::{Op, Workload};
use dynspan::ShapeKind;

fn kind_of(w: &Workload) -> ShapeKind {
    w.ops.iter().find_map(|op| if let Op::Insert(s) = op { Some(s.kind) } else { None }).unwrap_or(ShapeKind::Disk)
}

/// Replays `w` through a fresh spanner engine; returns the final edge count.
pub fn replay_spanner(w: &Workload, eps: f64, mode: SpaceMode) -> usize {
    let mut e = SpannerEngine::new(SpannerConfig::new(kind_of(w), w.dim, w.psi, eps, mode));
    for op in &w.ops {
        match op {
            Op::Insert(s) => e.insert(*s).expect("insert"),
            Op::Delete(id) => e.delete(*id).expect("delete"),
        };
    }
    e.edge_count()
}

/// Replays `w` through a fresh connectivity engine and asks one query per
/// update; returns how many came back true.
pub fn replay_connectivity(w: &Workload, mode: SpaceMode) -> usize {
    let mut e = ConnectivityEngine::new(ConnectivityConfig::new(kind_of(w), w.dim, w.psi, mode));
    let mut hits = 0;
    let mut last = None;
    for op in &w.ops {
        match op {
            Op::Insert(s) => {
                e.insert(*s).expect("insert");
                if let Some(prev) = last.filter(|p| e.contains(*p)) {
                    hits += e.connected(prev, s.id).expect("live") as usize;
                }
                last = Some(s.id);
            }
            Op::Delete(id) => e.delete(*id).expect("delete"),
        }
    }
    hits
}
