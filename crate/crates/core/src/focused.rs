//! Spanners for shapes anywhere in ℝ^d, built from engines over fixed boxes.
//!
//! A focused spanner `G` has a center `c`, a focal area (side `Ψ/2`) and a
//! connection area (side `6Ψ`), both centered at `c`. `S_G` is the set of
//! shapes meeting the focal area. For every two focused spanners whose
//! connection areas meet, the one with the smaller id owns an engine over the
//! box of side `18Ψ` at its center holding `S_G1 ∪ S_G2`. The union of all
//! engine edges is the spanner.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dynconn::{DynConn, EdgeId};
use crate::error::EngineError;
use crate::geometry::{BoxSpec, Coords, Shape, ShapeId, ShapeKind, MAX_DIM};
use crate::spanner::{SpaceMode, SpannerConfig, SpannerDelta, SpannerEngine};

pub type FocusId = u64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FocusedConfig {
    pub kind: ShapeKind,
    pub dim: usize,
    pub psi: f64,
    pub eps: f64,
    pub mode: SpaceMode,
}

impl FocusedConfig {
    pub fn new(kind: ShapeKind, dim: usize, psi: f64, eps: f64, mode: SpaceMode) -> FocusedConfig {
        // Validates the same way the engines will.
        SpannerConfig::new(kind, dim, psi, eps, mode);
        FocusedConfig { kind, dim, psi, eps, mode }
    }

    pub fn focal_side(&self) -> f64 {
        self.psi / 2.0
    }

    pub fn connection_side(&self) -> f64 {
        6.0 * self.psi
    }

    pub fn engine_side(&self) -> f64 {
        18.0 * self.psi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RebuildReason {
    /// `N` updates since the last rebuild.
    Updates,
    /// `|S|` fell to `N/2`.
    Shrunk,
    /// `|S|` reached `2N`.
    Grew,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RebuildEvent {
    /// Update count (1-based) after which the rebuild ran.
    pub update: u64,
    pub reason: RebuildReason,
    /// `|S|` at the rebuild, the new `N`.
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FocusedSpanner {
    pub id: FocusId,
    pub center: Coords,
    /// `S_G`.
    pub members: BTreeSet<ShapeId>,
    /// Engines holding a copy of `S_G`, keyed by `(smaller id, larger id)`.
    pub engines: BTreeSet<(FocusId, FocusId)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FocusedStats {
    pub n: usize,
    pub focused: usize,
    pub engines: usize,
    pub edges: usize,
    /// Most copies of one `S_G` in use.
    pub copies_peak: usize,
    /// Most focal areas met by one shape since the last rebuild.
    pub membership_peak: usize,
    pub rebuilds: usize,
}

struct Engine {
    spanner: SpannerEngine,
    /// How many of the two sides hold each shape.
    refs: BTreeMap<ShapeId, u8>,
}

/// Centers hashed on a grid of side `Ψ`.
#[derive(Default)]
struct Grid {
    cells: HashMap<[i64; MAX_DIM], Vec<u64>>,
}

impl Grid {
    fn key(p: &[f64], side: f64) -> [i64; MAX_DIM] {
        let mut k = [0i64; MAX_DIM];
        for (a, x) in p.iter().enumerate() {
            k[a] = (x / side).floor() as i64;
        }
        k
    }

    fn insert(&mut self, p: &[f64], side: f64, item: u64) {
        self.cells.entry(Grid::key(p, side)).or_default().push(item);
    }

    fn remove(&mut self, p: &[f64], side: f64, item: u64) {
        let k = Grid::key(p, side);
        if let Some(v) = self.cells.get_mut(&k) {
            v.retain(|x| *x != item);
            if v.is_empty() {
                self.cells.remove(&k);
            }
        }
    }

    /// Items whose point may lie within L∞ distance `r` of `p`.
    fn near(&self, p: &[f64], side: f64, r: f64) -> Vec<u64> {
        let dim = p.len();
        let lo: Vec<i64> = p.iter().map(|x| ((x - r) / side).floor() as i64).collect();
        let hi: Vec<i64> = p.iter().map(|x| ((x + r) / side).floor() as i64).collect();
        let mut out = Vec::new();
        let mut cur = lo.clone();
        loop {
            let mut k = [0i64; MAX_DIM];
            k[..dim].copy_from_slice(&cur);
            if let Some(v) = self.cells.get(&k) {
                out.extend_from_slice(v);
            }
            let mut a = 0;
            loop {
                if a == dim {
                    return out;
                }
                cur[a] += 1;
                if cur[a] <= hi[a] {
                    break;
                }
                cur[a] = lo[a];
                a += 1;
            }
        }
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub struct FocusedDecomposition {
    cfg: FocusedConfig,
    shapes: BTreeMap<ShapeId, Shape>,
    shape_grid: Grid,
    focused: BTreeMap<FocusId, FocusedSpanner>,
    focal_grid: Grid,
    /// Focal areas each shape meets.
    member_of: BTreeMap<ShapeId, Vec<FocusId>>,
    engines: BTreeMap<(FocusId, FocusId), Engine>,
    /// Union edges with the number of engines holding each.
    edges: BTreeMap<(ShapeId, ShapeId), (usize, f64)>,
    graph: DynConn,
    graph_edges: BTreeMap<(ShapeId, ShapeId), EdgeId>,
    next_id: FocusId,
    /// `N`: `|S|` at the last rebuild.
    base: usize,
    since_rebuild: usize,
    updates: u64,
    rebuild_log: Vec<RebuildEvent>,
    copies_peak: usize,
    membership_peak: usize,
    log: Option<Vec<String>>,
    last: UpdateWork,
}

/// Union-edge changes and engine work of the last update, rebuild included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateWork {
    pub added: usize,
    pub removed: usize,
    pub edges_touched: usize,
    pub rebuilt: bool,
}

impl FocusedDecomposition {
    pub fn new(cfg: FocusedConfig) -> FocusedDecomposition {
        FocusedDecomposition {
            cfg,
            shapes: BTreeMap::new(),
            shape_grid: Grid::default(),
            focused: BTreeMap::new(),
            focal_grid: Grid::default(),
            member_of: BTreeMap::new(),
            engines: BTreeMap::new(),
            edges: BTreeMap::new(),
            graph: DynConn::new(),
            graph_edges: BTreeMap::new(),
            next_id: 0,
            base: 0,
            since_rebuild: 0,
            updates: 0,
            rebuild_log: Vec::new(),
            copies_peak: 0,
            membership_peak: 0,
            log: None,
            last: UpdateWork::default(),
        }
    }

    pub fn config(&self) -> &FocusedConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn contains(&self, id: ShapeId) -> bool {
        self.shapes.contains_key(&id)
    }

    pub fn shapes(&self) -> Vec<Shape> {
        self.shapes.values().copied().collect()
    }

    pub fn focused(&self) -> impl Iterator<Item = &FocusedSpanner> {
        self.focused.values()
    }

    pub fn rebuild_log(&self) -> &[RebuildEvent] {
        &self.rebuild_log
    }

    /// `N`, the size at the last rebuild.
    pub fn base(&self) -> usize {
        self.base
    }

    /// Engine deltas prefixed with `g1:g2`.
    pub fn enable_log(&mut self) {
        self.log = Some(Vec::new());
    }

    pub fn take_log(&mut self) -> Vec<String> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn last_work(&self) -> UpdateWork {
        self.last
    }

    fn check_shape(&self, s: &Shape) -> Result<(), EngineError> {
        if s.kind != self.cfg.kind || s.dim != self.cfg.dim {
            return Err(EngineError::Heterogeneous);
        }
        let d = s.diameter();
        if !(4.0..=self.cfg.psi).contains(&d) {
            return Err(EngineError::Diameter { id: s.id, diameter: d, psi: self.cfg.psi });
        }
        if s.center[..s.dim].iter().any(|x| !x.is_finite()) {
            return Err(EngineError::Geometry(crate::error::GeomError::NonFinite(s.id)));
        }
        Ok(())
    }

    fn focal_lo_hi(&self, c: &Coords) -> (Coords, Coords) {
        let h = self.cfg.focal_side() / 2.0;
        let (mut lo, mut hi) = (*c, *c);
        for a in 0..self.cfg.dim {
            lo[a] -= h;
            hi[a] += h;
        }
        (lo, hi)
    }

    /// `s` belongs to `S_G` if it meets the focal area or its center lies
    /// within `Ψ/2` of `c`. The second clause covers small shapes whose
    /// focal-size box meets a focal area that the shape itself misses.
    fn belongs(&self, s: &Shape, c: &Coords) -> bool {
        let dim = self.cfg.dim;
        if linf(&s.center[..dim], &c[..dim]) <= self.cfg.focal_side() {
            return true;
        }
        let (lo, hi) = self.focal_lo_hi(c);
        s.meets_box(&lo[..dim], &hi[..dim])
    }

    /// Focused spanners `s` belongs to.
    fn focal_hits(&self, s: &Shape) -> Vec<FocusId> {
        let dim = self.cfg.dim;
        let r = (s.half_width() + self.cfg.focal_side() / 2.0).max(self.cfg.focal_side());
        let mut out: Vec<FocusId> = self
            .focal_grid
            .near(&s.center[..dim], self.cfg.psi, r)
            .into_iter()
            .filter(|g| self.belongs(s, &self.focused[g].center))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn insert(&mut self, s: Shape) -> Result<(), EngineError> {
        self.check_shape(&s)?;
        if self.contains(s.id) {
            return Err(EngineError::DuplicateId(s.id));
        }
        self.last = UpdateWork::default();
        self.place(s);
        self.after_update();
        Ok(())
    }

    pub fn delete(&mut self, id: ShapeId) -> Result<(), EngineError> {
        let s = self.shapes.remove(&id).ok_or(EngineError::UnknownId(id))?;
        self.last = UpdateWork::default();
        let dim = self.cfg.dim;
        self.shape_grid.remove(&s.center[..dim], self.cfg.psi, id);
        for g in self.member_of.remove(&id).unwrap_or_default() {
            let f = self.focused.get_mut(&g).expect("focused spanner");
            f.members.remove(&id);
            let keys: Vec<(FocusId, FocusId)> = f.engines.iter().copied().collect();
            for key in keys {
                self.engine_unref(key, id);
            }
        }
        self.after_update();
        Ok(())
    }

    fn place(&mut self, s: Shape) {
        let dim = self.cfg.dim;
        self.shapes.insert(s.id, s);
        self.shape_grid.insert(&s.center[..dim], self.cfg.psi, s.id);
        let hits = self.focal_hits(&s);
        for &g in &hits {
            self.join(g, &s);
        }
        // F: the focal-size box at the center of s.
        let c = s.center;
        let near = self.focal_grid.near(&c[..dim], self.cfg.psi, self.cfg.focal_side());
        if near.iter().all(|g| linf(&self.focused[g].center[..dim], &c[..dim]) > self.cfg.focal_side()) {
            self.create_focused(c);
        }
    }

    fn join(&mut self, g: FocusId, s: &Shape) {
        let f = self.focused.get_mut(&g).expect("focused spanner");
        f.members.insert(s.id);
        let keys: Vec<(FocusId, FocusId)> = f.engines.iter().copied().collect();
        let m = self.member_of.entry(s.id).or_default();
        m.push(g);
        m.sort_unstable();
        self.membership_peak = self.membership_peak.max(m.len());
        for key in keys {
            self.engine_ref(key, s);
        }
    }

    fn create_focused(&mut self, c: Coords) {
        let dim = self.cfg.dim;
        let id = self.next_id;
        self.next_id += 1;
        self.focused.insert(id, FocusedSpanner { id, center: c, members: BTreeSet::new(), engines: BTreeSet::new() });
        self.focal_grid.insert(&c[..dim], self.cfg.psi, id);

        let reach = self.cfg.psi / 2.0 + self.cfg.focal_side() / 2.0;
        let mut members: Vec<ShapeId> = self
            .shape_grid
            .near(&c[..dim], self.cfg.psi, reach)
            .into_iter()
            .filter(|sid| self.belongs(&self.shapes[sid], &c))
            .collect();
        members.sort_unstable();
        for sid in members {
            let s = self.shapes[&sid];
            self.join(id, &s);
        }

        let mut partners: Vec<FocusId> = self
            .focal_grid
            .near(&c[..dim], self.cfg.psi, self.cfg.connection_side())
            .into_iter()
            .filter(|g| linf(&self.focused[g].center[..dim], &c[..dim]) <= self.cfg.connection_side())
            .collect();
        partners.sort_unstable();
        for g in partners {
            self.build_engine((g, id));
        }
    }

    fn build_engine(&mut self, key: (FocusId, FocusId)) {
        let dim = self.cfg.dim;
        let owner = self.focused[&key.0].center;
        let bx = BoxSpec::centered(&owner[..dim], self.cfg.engine_side());
        let cfg = SpannerConfig::new(self.cfg.kind, dim, self.cfg.psi, self.cfg.eps, self.cfg.mode).with_box(bx);
        let mut spanner = SpannerEngine::new(cfg);
        if self.log.is_some() {
            spanner.enable_log();
        }
        self.engines.insert(key, Engine { spanner, refs: BTreeMap::new() });
        let mut ids: BTreeSet<ShapeId> = self.focused[&key.0].members.clone();
        ids.extend(self.focused[&key.1].members.iter().copied());
        for g in [key.0, key.1] {
            let f = self.focused.get_mut(&g).expect("focused spanner");
            f.engines.insert(key);
            self.copies_peak = self.copies_peak.max(f.engines.len());
        }
        for sid in ids {
            let s = self.shapes[&sid];
            let in_both = key.0 != key.1 && self.focused[&key.0].members.contains(&sid) && self.focused[&key.1].members.contains(&sid);
            self.engine_ref(key, &s);
            if in_both {
                self.engine_ref(key, &s);
            }
        }
    }

    fn engine_ref(&mut self, key: (FocusId, FocusId), s: &Shape) {
        let e = self.engines.get_mut(&key).expect("engine");
        let r = e.refs.entry(s.id).or_insert(0);
        *r += 1;
        if *r == 1 {
            let delta = e.spanner.insert(*s).expect("engine box holds every shape of its two focal areas");
            self.absorb(key, delta);
        }
    }

    fn engine_unref(&mut self, key: (FocusId, FocusId), id: ShapeId) {
        let e = self.engines.get_mut(&key).expect("engine");
        let r = e.refs.get_mut(&id).expect("engine holds the shape");
        *r -= 1;
        if *r == 0 {
            e.refs.remove(&id);
            let delta = e.spanner.delete(id).expect("live in engine");
            self.absorb(key, delta);
        }
    }

    fn absorb(&mut self, key: (FocusId, FocusId), delta: SpannerDelta) {
        self.last.edges_touched += self.engines[&key].spanner.last_cost().edges_touched;
        if let Some(log) = self.log.as_mut() {
            let e = self.engines.get_mut(&key).expect("engine");
            for line in e.spanner.take_log() {
                log.push(format!("{}:{} {line}", key.0, key.1));
            }
        }
        for e in &delta.removed {
            let k = (e.u, e.v);
            let slot = self.edges.get_mut(&k).expect("union edge");
            slot.0 -= 1;
            if slot.0 == 0 {
                self.last.removed += 1;
                self.edges.remove(&k);
                let id = self.graph_edges.remove(&k).expect("graph edge");
                self.graph.remove_edge(id);
            }
        }
        for e in &delta.added {
            let k = (e.u, e.v);
            let slot = self.edges.entry(k).or_insert((0, e.weight));
            slot.0 += 1;
            if slot.0 == 1 {
                self.last.added += 1;
                self.graph_edges.insert(k, self.graph.add_edge(e.u, e.v));
            }
        }
    }

    fn after_update(&mut self) {
        self.updates += 1;
        self.since_rebuild += 1;
        let n = self.shapes.len();
        // Growth to 2N takes at least N updates, so Grew is reported first.
        let reason = if 2 * n <= self.base {
            Some(RebuildReason::Shrunk)
        } else if n >= 2 * self.base {
            Some(RebuildReason::Grew)
        } else if self.since_rebuild >= self.base {
            Some(RebuildReason::Updates)
        } else {
            None
        };
        if let Some(reason) = reason {
            let before: BTreeSet<(ShapeId, ShapeId)> = self.edges.keys().copied().collect();
            let work = self.last;
            self.rebuild();
            let after: BTreeSet<(ShapeId, ShapeId)> = self.edges.keys().copied().collect();
            self.last = UpdateWork {
                added: work.added + after.difference(&before).count(),
                removed: work.removed + before.difference(&after).count(),
                edges_touched: work.edges_touched,
                rebuilt: true,
            };
            self.rebuild_log.push(RebuildEvent { update: self.updates, reason, n });
        }
    }

    /// Rebuild from scratch; focal areas no shape needs any more disappear.
    pub fn rebuild(&mut self) {
        let shapes: Vec<Shape> = self.shapes.values().copied().collect();
        // Reconstruction is not an edge event of the update stream.
        let log = self.log.take();
        self.shapes.clear();
        self.shape_grid = Grid::default();
        self.focused.clear();
        self.focal_grid = Grid::default();
        self.member_of.clear();
        self.engines.clear();
        self.edges.clear();
        self.graph = DynConn::new();
        self.graph_edges.clear();
        self.next_id = 0;
        self.copies_peak = 0;
        self.membership_peak = 0;
        for s in shapes {
            self.place(s);
        }
        if log.is_some() {
            for e in self.engines.values_mut() {
                e.spanner.enable_log();
            }
            self.log = log;
        }
        self.base = self.shapes.len();
        self.since_rebuild = 0;
    }

    /// Union of all engine spanners, one entry per shape pair.
    pub fn edges(&self) -> impl Iterator<Item = (ShapeId, ShapeId, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &(_, w))| (u, v, w))
    }

    pub fn edge_pairs(&self) -> Vec<(ShapeId, ShapeId)> {
        self.edges.keys().copied().collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn matching_total(&self) -> usize {
        self.engines.values().map(|e| e.spanner.matching_total()).sum()
    }

    pub fn z(&self) -> usize {
        self.engines.values().map(|e| e.spanner.z()).sum()
    }

    pub fn node_versions(&self) -> usize {
        self.engines.values().map(|e| e.spanner.stats().node_versions).sum()
    }

    /// Connectivity over the union spanner.
    pub fn connected(&self, a: ShapeId, b: ShapeId) -> Result<bool, EngineError> {
        for id in [a, b] {
            if !self.contains(id) {
                return Err(EngineError::UnknownId(id));
            }
        }
        Ok(a == b || self.graph.connected(a, b))
    }

    pub fn stats(&self) -> FocusedStats {
        FocusedStats {
            n: self.shapes.len(),
            focused: self.focused.len(),
            engines: self.engines.len(),
            edges: self.edges.len(),
            copies_peak: self.copies_peak,
            membership_peak: self.membership_peak,
            rebuilds: self.rebuild_log.len(),
        }
    }

    /// Brute-force check of the decomposition and of every engine.
    pub fn verify(&self) -> Result<(), String> {
        let dim = self.cfg.dim;
        let fs: Vec<&FocusedSpanner> = self.focused.values().collect();
        for (i, a) in fs.iter().enumerate() {
            for b in &fs[i + 1..] {
                if linf(&a.center[..dim], &b.center[..dim]) <= self.cfg.focal_side() {
                    return Err(format!("focal areas of {} and {} meet", a.id, b.id));
                }
            }
        }
        if self.focused.len() > 2 * self.base.max(self.shapes.len()).max(1) {
            return Err(format!("{} focused spanners for N = {}", self.focused.len(), self.base));
        }
        for s in self.shapes.values() {
            let want: Vec<FocusId> = fs.iter().filter(|f| self.belongs(s, &f.center)).map(|f| f.id).collect();
            if want.is_empty() {
                return Err(format!("shape {} belongs to no focused spanner", s.id));
            }
            if self.member_of.get(&s.id) != Some(&want) {
                return Err(format!("focal areas of shape {} are stale", s.id));
            }
        }
        for f in &fs {
            let want: BTreeSet<ShapeId> = self.shapes.values().filter(|s| self.belongs(s, &f.center)).map(|s| s.id).collect();
            if want != f.members {
                return Err(format!("S_G of {} is stale", f.id));
            }
        }
        let mut want_keys = BTreeSet::new();
        for a in &fs {
            for b in &fs {
                if a.id <= b.id && linf(&a.center[..dim], &b.center[..dim]) <= self.cfg.connection_side() {
                    want_keys.insert((a.id, b.id));
                }
            }
        }
        let have_keys: BTreeSet<(FocusId, FocusId)> = self.engines.keys().copied().collect();
        if want_keys != have_keys {
            return Err("engine set differs from connection-area overlaps".into());
        }
        let mut want_edges: BTreeMap<(ShapeId, ShapeId), usize> = BTreeMap::new();
        for (key, e) in &self.engines {
            let mut want: BTreeSet<ShapeId> = self.focused[&key.0].members.clone();
            want.extend(self.focused[&key.1].members.iter().copied());
            let have: BTreeSet<ShapeId> = e.spanner.shapes().iter().map(|s| s.id).collect();
            if want != have {
                return Err(format!("engine {key:?} holds the wrong shapes"));
            }
            let owner = self.focused[&key.0].center;
            if e.spanner.config().bx != BoxSpec::centered(&owner[..dim], self.cfg.engine_side()) {
                return Err(format!("engine {key:?} has the wrong box"));
            }
            e.spanner.verify().map_err(|m| format!("engine {key:?}: {m}"))?;
            for (u, v) in e.spanner.edge_pairs() {
                *want_edges.entry((u, v)).or_default() += 1;
            }
        }
        let have_edges: BTreeMap<(ShapeId, ShapeId), usize> = self.edges.iter().map(|(k, v)| (*k, v.0)).collect();
        if want_edges != have_edges {
            return Err("union edges differ from the engines".into());
        }
        if self.graph.edge_count() != self.edges.len() {
            return Err("connectivity graph out of step with the union".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_stretch, intersection_components};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd(psi: f64, eps: f64) -> FocusedDecomposition {
        FocusedDecomposition::new(FocusedConfig::new(ShapeKind::Disk, 2, psi, eps, SpaceMode::Small))
    }

    #[test]
    fn creation_rules() {
        let mut f = fd(16.0, 0.5);
        f.insert(Shape::disk(1, 5.0, 5.0, 3.0)).unwrap();
        assert_eq!(f.stats().focused, 1);
        f.insert(Shape::disk(2, 7.0, 6.0, 3.0)).unwrap();
        assert_eq!(f.stats().focused, 1);
        f.insert(Shape::disk(3, 1600.0, 5.0, 3.0)).unwrap();
        assert_eq!(f.stats().focused, 2);
        // Connection areas 1600 apart are disjoint: two self engines only.
        assert_eq!(f.engines.keys().copied().collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
        assert_eq!(f.edge_pairs(), vec![(1, 2)]);
        f.verify().unwrap();
    }

    #[test]
    fn negative_and_far_coordinates() {
        let mut f = fd(8.0, 0.5);
        let shapes = [
            Shape::disk(1, -1.0e6, -1.0e6, 2.0),
            Shape::disk(2, -1.0e6 + 4.0, -1.0e6, 2.0),
            Shape::disk(3, -1.0e6 + 8.0, -1.0e6, 2.0),
            Shape::disk(4, 3.5e5, 0.0, 2.0),
        ];
        for s in shapes {
            f.insert(s).unwrap();
        }
        assert!(f.connected(1, 3).unwrap());
        assert!(!f.connected(1, 4).unwrap());
        f.delete(2).unwrap();
        assert!(!f.connected(1, 3).unwrap());
        f.verify().unwrap();
    }

    #[test]
    fn small_shape_between_focal_areas() {
        let mut f = fd(32.0, 0.5);
        for (i, (x, y)) in [(11.0, 11.0), (-11.0, 11.0), (11.0, -11.0), (-11.0, -11.0)].into_iter().enumerate() {
            f.insert(Shape::disk(i as u64, x, y, 2.0)).unwrap();
        }
        assert_eq!(f.stats().focused, 4);
        let s = Shape::disk(9, 0.0, 0.0, 2.0);
        assert!(f.focused().all(|g| {
            let lo = [g.center[0] - 8.0, g.center[1] - 8.0];
            let hi = [g.center[0] + 8.0, g.center[1] + 8.0];
            !s.meets_box(&lo, &hi)
        }));
        f.insert(s).unwrap();
        // No new focal area fits; the disk joins through its center instead.
        assert_eq!(f.stats().focused, 4);
        assert_eq!(f.member_of[&9].len(), 4);
        f.verify().unwrap();
    }

    #[test]
    fn rebuild_schedule() {
        use RebuildReason::*;
        let mut f = fd(8.0, 0.5);
        for i in 0..8 {
            f.insert(Shape::disk(i, 20.0 * i as f64, 0.0, 2.0)).unwrap();
        }
        for i in 0..4 {
            f.delete(i).unwrap();
        }
        // Churn at constant size: N = 4 updates later.
        for i in 100..102 {
            f.insert(Shape::disk(i, -50.0, 0.0 + i as f64 * 10.0, 2.0)).unwrap();
            f.delete(i).unwrap();
        }
        let log: Vec<(u64, RebuildReason, usize)> = f.rebuild_log().iter().map(|e| (e.update, e.reason, e.n)).collect();
        assert_eq!(log, vec![(1, Grew, 1), (2, Grew, 2), (4, Grew, 4), (8, Grew, 8), (12, Shrunk, 4), (16, Updates, 4)]);
        assert_eq!(f.base(), 4);
        f.verify().unwrap();
    }

    fn run(seed: u64, psi: f64, eps: f64, region: f64, ops: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = fd(psi, eps);
        let mut live: Vec<ShapeId> = Vec::new();
        for id in 0..ops as u64 {
            if !live.is_empty() && rng.gen_bool(0.25) {
                let k = rng.gen_range(0..live.len());
                f.delete(live.swap_remove(k)).unwrap();
            } else {
                // Clustered so the spread region still yields intersections.
                let hub = rng.gen_range(0..4) as f64 * region / 4.0;
                let x = hub + rng.gen_range(0.0..3.0 * psi);
                let y = -hub + rng.gen_range(0.0..3.0 * psi);
                f.insert(Shape::disk(id, x, y, rng.gen_range(2.0..=psi / 2.0))).unwrap();
                live.push(id);
            }
            f.verify().unwrap_or_else(|m| panic!("op {id}: {m}"));
            let shapes = f.shapes();
            let r = check_stretch(&shapes, &f.edge_pairs(), eps);
            assert!(r.ok, "op {id}: stretch {} at {:?}", r.max_ratio, r.worst_pair);
            let mut uf = intersection_components(&shapes);
            for a in &shapes {
                for b in &shapes {
                    assert_eq!(f.connected(a.id, b.id).unwrap(), uf.same(a.id, b.id));
                }
            }
            assert!(f.stats().membership_peak <= 9);
        }
    }

    #[test]
    fn union_is_a_spanner_over_a_wide_region() {
        run(1, 8.0, 0.5, 1000.0 * 8.0, 80);
        run(2, 16.0, 0.25, 1000.0 * 16.0, 60);
    }

    #[test]
    fn dense_cluster() {
        run(3, 8.0, 0.9, 0.0, 60);
    }
}
