use std::time::Instant;

use anyhow::{bail, Result};
use dynspan::connectivity::{ConnectivityConfig, ConnectivityEngine};
use dynspan::focused::{FocusedConfig, FocusedDecomposition};
use dynspan::oracle::{check_stretch, intersection_components, stretch_pairs};
use dynspan::spanner::{SpaceMode, SpannerConfig, SpannerEngine};
use dynspan::workload::{Op, Workload};
use dynspan::{BoxSpec, ShapeId, ShapeKind};

use crate::{Engine, Mode};

pub const HEADER: [&str; 18] = [
    "step",
    "op",
    "id",
    "engine",
    "mode",
    "psi",
    "eps",
    "n",
    "edges",
    "added",
    "removed",
    "edges_touched",
    "matching_total",
    "z",
    "node_versions",
    "wall_ns",
    "checked",
    "violations",
];

pub struct Options {
    pub engine: Engine,
    pub mode: Mode,
    pub eps: f64,
    pub verify_every: usize,
    pub log: bool,
}

pub struct Report {
    pub csv: String,
    pub log: Vec<String>,
    pub checks: usize,
    pub violations: usize,
}

enum Runner {
    Spanner(SpannerEngine),
    Connectivity(ConnectivityEngine),
    Focused(FocusedDecomposition),
}

struct Sample {
    n: usize,
    edges: usize,
    added: usize,
    removed: usize,
    touched: usize,
    matching_total: usize,
    z: usize,
    node_versions: usize,
    wall_ns: u128,
}

impl Runner {
    fn new(w: &Workload, kind: ShapeKind, o: &Options) -> Runner {
        let mode = match o.mode {
            Mode::Big => SpaceMode::Big,
            Mode::Small => SpaceMode::Small,
        };
        let mut r = match o.engine {
            Engine::Spanner => Runner::Spanner(SpannerEngine::new(SpannerConfig::new(kind, w.dim, w.psi, o.eps, mode))),
            Engine::Connectivity => Runner::Connectivity(ConnectivityEngine::new(ConnectivityConfig::new(kind, w.dim, w.psi, mode))),
            Engine::Focused => Runner::Focused(FocusedDecomposition::new(FocusedConfig::new(kind, w.dim, w.psi, o.eps, mode))),
        };
        if o.log {
            match &mut r {
                Runner::Spanner(e) => e.enable_log(),
                Runner::Focused(f) => f.enable_log(),
                Runner::Connectivity(_) => {}
            }
        }
        r
    }

    fn apply(&mut self, op: &Op) -> Result<Sample> {
        Ok(match self {
            Runner::Spanner(e) => {
                let t = Instant::now();
                let d = match op {
                    Op::Insert(s) => e.insert(*s)?,
                    Op::Delete(id) => e.delete(*id)?,
                };
                let wall_ns = t.elapsed().as_nanos();
                let st = e.stats();
                Sample {
                    n: st.n,
                    edges: st.edge_count,
                    added: d.added.len(),
                    removed: d.removed.len(),
                    touched: e.last_cost().edges_touched,
                    matching_total: st.matching_total,
                    z: st.z,
                    node_versions: st.node_versions,
                    wall_ns,
                }
            }
            Runner::Connectivity(e) => {
                let before = e.stats().proxy_edges;
                let t = Instant::now();
                match op {
                    Op::Insert(s) => e.insert(*s)?,
                    Op::Delete(id) => e.delete(*id)?,
                }
                let wall_ns = t.elapsed().as_nanos();
                let st = e.stats();
                Sample {
                    n: st.n,
                    edges: st.proxy_edges,
                    added: st.proxy_edges.saturating_sub(before),
                    removed: before.saturating_sub(st.proxy_edges),
                    touched: st.proxy_edges.abs_diff(before),
                    matching_total: st.matching_total,
                    z: st.z,
                    node_versions: st.node_versions,
                    wall_ns,
                }
            }
            Runner::Focused(f) => {
                let t = Instant::now();
                match op {
                    Op::Insert(s) => f.insert(*s)?,
                    Op::Delete(id) => f.delete(*id)?,
                }
                let wall_ns = t.elapsed().as_nanos();
                let w = f.last_work();
                Sample {
                    n: f.len(),
                    edges: f.edge_count(),
                    added: w.added,
                    removed: w.removed,
                    touched: w.edges_touched,
                    matching_total: f.matching_total(),
                    z: f.z(),
                    node_versions: f.node_versions(),
                    wall_ns,
                }
            }
        })
    }

    fn take_log(&mut self) -> Vec<String> {
        match self {
            Runner::Spanner(e) => e.take_log(),
            Runner::Focused(f) => f.take_log(),
            Runner::Connectivity(_) => Vec::new(),
        }
    }

    /// Structural self-check plus the brute-force oracle; returns violations.
    fn check(&self, eps: f64) -> usize {
        let mut bad = 0;
        let (verified, shapes, edges) = match self {
            Runner::Spanner(e) => (e.verify(), e.shapes(), Some(e.edge_pairs())),
            Runner::Focused(f) => (f.verify(), f.shapes(), Some(f.edge_pairs())),
            Runner::Connectivity(e) => (e.verify(), e.shapes(), None),
        };
        if let Err(m) = verified {
            eprintln!("verify: {m}");
            bad += 1;
        }
        match edges {
            Some(edges) => {
                let r = check_stretch(&shapes, &edges, eps);
                if !r.ok {
                    eprintln!("stretch {} at {:?}, {} foreign edges", r.max_ratio, r.worst_pair, r.foreign_edges.len());
                    bad += 1;
                }
            }
            None => {
                let Runner::Connectivity(e) = self else { unreachable!() };
                let mut uf = intersection_components(&shapes);
                let ids: Vec<ShapeId> = shapes.iter().map(|s| s.id).collect();
                for (a, b) in stretch_pairs(&ids) {
                    if e.connected(a, b).ok() != Some(uf.same(a, b)) {
                        eprintln!("connected({a}, {b}) disagrees with union-find");
                        bad += 1;
                    }
                }
            }
        }
        bad
    }
}

pub fn run(w: &Workload, o: &Options) -> Result<Report> {
    let kind = match w.ops.iter().find_map(|op| if let Op::Insert(s) = op { Some(s.kind) } else { None }) {
        Some(k) => k,
        None => ShapeKind::Cube,
    };
    if !(o.eps > 0.0 && o.eps < 1.0) {
        bail!("--eps must lie in (0, 1)");
    }
    if o.engine != Engine::Focused {
        let bx = BoxSpec::for_psi(w.psi, w.dim);
        if let Some(s) = w.ops.iter().find_map(|op| match op {
            Op::Insert(s) if !bx.contains_point(s.center()) => Some(*s),
            _ => None,
        }) {
            bail!("shape {} has its center outside [0, {}]^{}; use --engine focused", s.id, bx.side(), w.dim);
        }
    }
    let mut runner = Runner::new(w, kind, o);
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(HEADER)?;
    let (engine, mode) = (format!("{:?}", o.engine).to_lowercase(), format!("{:?}", o.mode).to_lowercase());
    let mut report = Report { csv: String::new(), log: Vec::new(), checks: 0, violations: 0 };
    for (i, op) in w.ops.iter().enumerate() {
        let step = i + 1;
        let s = runner.apply(op)?;
        report.log.extend(runner.take_log());
        let checked = o.verify_every > 0 && step % o.verify_every == 0;
        let violations = if checked { runner.check(o.eps) } else { 0 };
        report.checks += checked as usize;
        report.violations += violations;
        let (kind, id) = match op {
            Op::Insert(sh) => ("I", sh.id),
            Op::Delete(id) => ("D", *id),
        };
        out.write_record([
            step.to_string(),
            kind.to_string(),
            id.to_string(),
            engine.clone(),
            mode.clone(),
            w.psi.to_string(),
            o.eps.to_string(),
            s.n.to_string(),
            s.edges.to_string(),
            s.added.to_string(),
            s.removed.to_string(),
            s.touched.to_string(),
            s.matching_total.to_string(),
            s.z.to_string(),
            s.node_versions.to_string(),
            s.wall_ns.to_string(),
            (checked as u8).to_string(),
            violations.to_string(),
        ])?;
    }
    report.csv = String::from_utf8(out.into_inner()?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dynspan::workload::{generate, GenParams};
    use dynspan::Shape;

    fn opts(engine: Engine, mode: Mode) -> Options {
        Options { engine, mode, eps: 0.5, verify_every: 1, log: true }
    }

    #[test]
    fn verified_replay_has_no_violations() {
        let w = generate(&GenParams::new(11, 200, 16.0, 2, ShapeKind::Disk, 0.3));
        for engine in [Engine::Spanner, Engine::Connectivity, Engine::Focused] {
            let r = run(&w, &opts(engine, Mode::Small)).unwrap();
            assert_eq!((r.checks, r.violations), (200, 0), "{engine:?}");
            assert_eq!(r.csv.lines().count(), 201);
            assert_eq!(r.csv.lines().next().unwrap(), HEADER.join(","));
        }
    }

    #[test]
    fn modes_log_the_same_edges() {
        let w = generate(&GenParams::new(12, 300, 16.0, 2, ShapeKind::Cube, 0.3));
        let mut o = opts(Engine::Spanner, Mode::Small);
        o.verify_every = 0;
        let small = run(&w, &o).unwrap().log;
        o.mode = Mode::Big;
        let big = run(&w, &o).unwrap().log;
        assert!(!small.is_empty());
        assert_eq!(small, big);
    }

    #[test]
    fn bounded_engines_reject_far_centers() {
        let w = Workload { dim: 2, psi: 8.0, seed: 0, ops: vec![Op::Insert(Shape::disk(0, 100.0, 0.0, 2.0))] };
        assert!(run(&w, &opts(Engine::Spanner, Mode::Small)).is_err());
        assert!(run(&w, &opts(Engine::Focused, Mode::Small)).is_ok());
    }
}
