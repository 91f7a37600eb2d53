//! Dynamic (1+ε)-spanner of an intersection graph inside a fixed box.
//!
//! Type-i edges come from point spanners over `π(C) ∪ π(C')` for equal-size
//! cells with `C' ⊂ 3*C`. Type-ii edges are one witness per maximal matching
//! between `Γ_ε(E)` and `π_ε(E')` for far ε-cell pairs. In big-space mode
//! every pair owns two indexes; in small-space mode the unmatched sets are
//! branches of one shared store per ε-cell and side, rebuilt periodically.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::EngineError;
use crate::euclid::{EdgeDelta, PointSpanner};
use crate::geometry::{edge_weight, BoxSpec, CellId, Shape, ShapeId, ShapeKind, MAX_DIM};
use crate::index::{Algo, IntersectionIndex};
use crate::matching::{apply, BranchView, Matching, PairOp, Side, Views};
use crate::persistence::BranchStore;
use crate::quadtree::{EpsCellId, QuadTree, TreeMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceMode {
    /// Two private indexes per ε-cell pair.
    Big,
    /// Branches of shared branch-persistent stores.
    Small,
}

impl SpaceMode {
    pub fn parse(s: &str) -> Option<SpaceMode> {
        match s {
            "big" => Some(SpaceMode::Big),
            "small" => Some(SpaceMode::Small),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpannerConfig {
    pub kind: ShapeKind,
    pub dim: usize,
    pub psi: f64,
    /// The caller's ε; the construction runs with ε/7.
    pub eps: f64,
    pub mode: SpaceMode,
    pub bx: BoxSpec,
}

impl SpannerConfig {
    /// Box `[0, Ψ*]^dim`.
    pub fn new(kind: ShapeKind, dim: usize, psi: f64, eps: f64, mode: SpaceMode) -> SpannerConfig {
        assert!(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1), got {eps}");
        assert!(psi >= 4.0, "psi must be at least 4, got {psi}");
        assert!(kind == ShapeKind::Cube || dim == 2, "disks are two-dimensional");
        SpannerConfig { kind, dim, psi, eps, mode, bx: BoxSpec::for_psi(psi, dim) }
    }

    pub fn with_box(mut self, bx: BoxSpec) -> SpannerConfig {
        assert_eq!(bx.dim, self.dim, "box dimension");
        self.bx = bx;
        self
    }

    pub fn internal_eps(&self) -> f64 {
        self.eps / 7.0
    }
}

/// Why an edge is in the spanner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    /// Point spanner of a cell pair, smaller cell first.
    Type1(CellId, CellId),
    /// Matching witness of an ε-cell pair (subpopulation side first).
    Type2(EpsCellId, EpsCellId),
}

fn write_cell(f: &mut fmt::Formatter<'_>, c: &CellId) -> fmt::Result {
    write!(f, "{}", c.level)?;
    for x in c.coords {
        write!(f, ",{x}")?;
    }
    Ok(())
}

fn write_eps(f: &mut fmt::Formatter<'_>, e: &EpsCellId) -> fmt::Result {
    write_cell(f, &e.cell)?;
    for g in e.grid {
        write!(f, ".{g}")?;
    }
    Ok(())
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Type1(a, b) => {
                write!(f, "t1:")?;
                write_cell(f, a)?;
                write!(f, ":")?;
                write_cell(f, b)
            }
            Provenance::Type2(a, b) => {
                write!(f, "t2:")?;
                write_eps(f, a)?;
                write!(f, ":")?;
                write_eps(f, b)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: ShapeId,
    pub v: ShapeId,
    pub weight: f64,
    /// Smallest provenance currently supporting the edge (at removal: the last one).
    pub provenance: Provenance,
}

/// Net change of the spanner caused by one update, each list sorted by `(u, v)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpannerDelta {
    pub added: Vec<Edge>,
    pub removed: Vec<Edge>,
}

impl SpannerDelta {
    pub fn len(&self) -> usize {
        self.added.len() + self.removed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }

    /// `+|- u v w provenance`, removals first.
    pub fn log_lines(&self) -> Vec<String> {
        let line = |sign: char, e: &Edge| format!("{sign} {} {} {} {}", e.u, e.v, e.weight, e.provenance);
        self.removed.iter().map(|e| line('-', e)).chain(self.added.iter().map(|e| line('+', e))).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpannerStats {
    pub n: usize,
    pub edge_count: usize,
    pub type1_count: usize,
    pub type2_count: usize,
    /// Σ|M| over all pairs, self-matches included.
    pub matching_total: usize,
    /// Total size of all branch differences (small-space) or of all pair-view
    /// differences (big-space).
    pub z: usize,
    pub pairs: usize,
    pub spans: usize,
    pub node_versions: usize,
    pub rebuilds: usize,
}

/// Work done by the last update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateCost {
    pub span_updates: usize,
    pub pairs_visited: usize,
    pub edges_touched: usize,
}

struct Pair {
    matching: Matching,
    views: Views,
    witness: Option<(ShapeId, ShapeId)>,
}

fn ord(a: ShapeId, b: ShapeId) -> (ShapeId, ShapeId) {
    (a.min(b), a.max(b))
}

fn span_key(a: CellId, b: CellId) -> (CellId, CellId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Branch label of a pair; the same in every run and after rebuilds.
pub fn pair_label(left: &EpsCellId, right: &EpsCellId) -> u64 {
    let h = crate::mix64(left.key() ^ crate::mix64(right.key() ^ 0x7061_6972));
    h.max(1)
}

pub struct SpannerEngine {
    cfg: SpannerConfig,
    algo: Algo,
    tree: QuadTree,
    spans: BTreeMap<(CellId, CellId), PointSpanner>,
    spans_of: BTreeMap<CellId, BTreeSet<(CellId, CellId)>>,
    /// 𝒬(E): Γ_ε(E), and 𝒬'(E): π_ε(E), present while nonempty.
    left: BTreeMap<EpsCellId, Side>,
    right: BTreeMap<EpsCellId, Side>,
    pairs: BTreeMap<(EpsCellId, EpsCellId), Pair>,
    by_left: BTreeMap<EpsCellId, BTreeSet<EpsCellId>>,
    by_right: BTreeMap<EpsCellId, BTreeSet<EpsCellId>>,
    labels: HashMap<u64, (EpsCellId, EpsCellId)>,
    support: BTreeMap<(ShapeId, ShapeId), BTreeSet<Provenance>>,
    /// Edges touched during the current update, with their provenance before it.
    touched: BTreeMap<(ShapeId, ShapeId), Option<Provenance>>,
    since_rebuild: usize,
    rebuild_at: usize,
    rebuilds: usize,
    cost: UpdateCost,
    log: Option<Vec<String>>,
}

impl SpannerEngine {
    pub fn new(cfg: SpannerConfig) -> SpannerEngine {
        let tree = QuadTree::new(cfg.bx, TreeMode::Spanner, cfg.psi, cfg.internal_eps());
        SpannerEngine {
            cfg,
            algo: Algo::for_kind(cfg.kind, cfg.dim, cfg.psi),
            tree,
            spans: BTreeMap::new(),
            spans_of: BTreeMap::new(),
            left: BTreeMap::new(),
            right: BTreeMap::new(),
            pairs: BTreeMap::new(),
            by_left: BTreeMap::new(),
            by_right: BTreeMap::new(),
            labels: HashMap::new(),
            support: BTreeMap::new(),
            touched: BTreeMap::new(),
            since_rebuild: 0,
            rebuild_at: 1,
            rebuilds: 0,
            cost: UpdateCost::default(),
            log: None,
        }
    }

    pub fn config(&self) -> &SpannerConfig {
        &self.cfg
    }

    pub fn tree(&self) -> &QuadTree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn contains(&self, id: ShapeId) -> bool {
        self.tree.shape(id).is_some()
    }

    pub fn shape(&self, id: ShapeId) -> Option<&Shape> {
        self.tree.shape(id)
    }

    pub fn shapes(&self) -> Vec<Shape> {
        self.tree.shapes().copied().collect()
    }

    /// Keep an event log of every edge change; see [`Self::take_log`].
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn take_log(&mut self) -> Vec<String> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn last_cost(&self) -> UpdateCost {
        self.cost
    }

    /// Updates left before the next rebuild of the shared stores.
    pub fn rebuild_threshold(&self) -> usize {
        self.rebuild_at
    }

    fn check_shape(&self, s: &Shape) -> Result<(), EngineError> {
        if s.kind != self.cfg.kind || s.dim != self.cfg.dim {
            return Err(EngineError::Heterogeneous);
        }
        let d = s.diameter();
        if !(4.0..=self.cfg.psi).contains(&d) {
            return Err(EngineError::Diameter { id: s.id, diameter: d, psi: self.cfg.psi });
        }
        Ok(())
    }

    pub fn insert(&mut self, s: Shape) -> Result<SpannerDelta, EngineError> {
        self.check_shape(&s)?;
        if self.contains(s.id) {
            return Err(EngineError::DuplicateId(s.id));
        }
        self.cost = UpdateCost::default();
        let rep = self.tree.insert_shape(&s)?;
        for c in &rep.family {
            self.span_insert(*c, &s);
        }

        let e = rep.eps_cells[0];
        self.side_entry(true, e).insert(&s);
        for (_, big) in self.tree.type2_partners(&rep.family[0]) {
            let grids: Vec<[u32; MAX_DIM]> = self.tree.node(&big).map(|n| n.eps.keys().copied().collect()).unwrap_or_default();
            for grid in grids {
                let e2 = EpsCellId { cell: big, grid };
                // π_ε(E') before this shape's own root update.
                if !self.right.contains_key(&e2) {
                    continue;
                }
                self.ensure_pair(e, e2);
                self.pair_op((e, e2), PairOp::LeftInsert(s));
            }
        }

        for (k, big) in rep.family.iter().enumerate() {
            let e2 = rep.eps_cells[k];
            self.side_entry(false, e2).insert(&s);
            for (_, small) in self.tree.type2_sources(big) {
                let grids: Vec<[u32; MAX_DIM]> = self
                    .tree
                    .node(&small)
                    .map(|n| n.eps.iter().filter(|(_, r)| !r.sub.is_empty()).map(|(g, _)| *g).collect())
                    .unwrap_or_default();
                for grid in grids {
                    let e1 = EpsCellId { cell: small, grid };
                    self.ensure_pair(e1, e2);
                    self.pair_op((e1, e2), PairOp::RightInsert(s));
                }
            }
        }
        Ok(self.finish_update(None))
    }

    pub fn delete(&mut self, id: ShapeId) -> Result<SpannerDelta, EngineError> {
        let s = *self.tree.shape(id).ok_or(EngineError::UnknownId(id))?;
        self.cost = UpdateCost::default();
        let rep = self.tree.delete_shape(id)?;
        for c in &rep.family {
            self.span_delete(*c, id);
        }

        let e = rep.eps_cells[0];
        let emptied = {
            let side = self.left.get_mut(&e).expect("left side of a live shape");
            side.delete(id);
            side.len() == 0
        };
        let partners: Vec<EpsCellId> = self.by_left.get(&e).map(|s| s.iter().copied().collect()).unwrap_or_default();
        for &e2 in &partners {
            self.pair_op((e, e2), PairOp::LeftDelete(id));
        }
        if emptied {
            for &e2 in &partners {
                self.teardown_pair((e, e2));
            }
            self.left.remove(&e);
        }

        for &e2 in &rep.eps_cells {
            let emptied = {
                let side = self.right.get_mut(&e2).expect("right side of a live shape");
                side.delete(id);
                side.len() == 0
            };
            let partners: Vec<EpsCellId> = self.by_right.get(&e2).map(|s| s.iter().copied().collect()).unwrap_or_default();
            for &e1 in &partners {
                self.pair_op((e1, e2), PairOp::RightDelete(id));
            }
            if emptied {
                for &e1 in &partners {
                    self.teardown_pair((e1, e2));
                }
                self.right.remove(&e2);
            }
        }
        Ok(self.finish_update(Some(s)))
    }

    fn side_entry(&mut self, left: bool, e: EpsCellId) -> &mut Side {
        let mode = self.cfg.mode;
        let algo = self.algo;
        let map = if left { &mut self.left } else { &mut self.right };
        map.entry(e).or_insert_with(|| match mode {
            SpaceMode::Big => Side::Plain(BTreeMap::new()),
            SpaceMode::Small => Side::Branched(BranchStore::new(algo)),
        })
    }

    fn ensure_pair(&mut self, e1: EpsCellId, e2: EpsCellId) {
        let key = (e1, e2);
        if self.pairs.contains_key(&key) {
            return;
        }
        let views = match self.cfg.mode {
            SpaceMode::Big => {
                let mut l = IntersectionIndex::new(self.algo);
                let mut r = IntersectionIndex::new(self.algo);
                let (Some(Side::Plain(ls)), Some(Side::Plain(rs))) = (self.left.get(&e1), self.right.get(&e2)) else {
                    unreachable!("big-space sides are plain and exist for a live pair")
                };
                for s in ls.values() {
                    l.insert(s).expect("fresh");
                }
                for s in rs.values() {
                    r.insert(s).expect("fresh");
                }
                Views::Own(l, r)
            }
            SpaceMode::Small => {
                let label = pair_label(&e1, &e2);
                if let Some(other) = self.labels.insert(label, key) {
                    assert_eq!(other, key, "branch label collision");
                }
                for side in [self.left.get_mut(&e1), self.right.get_mut(&e2)] {
                    let Some(Side::Branched(b)) = side else { unreachable!("small-space sides are branched") };
                    b.branch(label);
                }
                Views::Branch(label)
            }
        };
        self.pairs.insert(key, Pair { matching: Matching::new(), views, witness: None });
        self.by_left.entry(e1).or_default().insert(e2);
        self.by_right.entry(e2).or_default().insert(e1);
    }

    fn teardown_pair(&mut self, key: (EpsCellId, EpsCellId)) {
        let pair = self.pairs.remove(&key).expect("pair");
        debug_assert!(pair.matching.is_empty(), "pair torn down with matched shapes");
        if let Some((l, r)) = pair.witness {
            self.unsupport(l, r, Provenance::Type2(key.0, key.1));
        }
        for (map, k, other) in [(&mut self.by_left, key.0, key.1), (&mut self.by_right, key.1, key.0)] {
            if let Some(set) = map.get_mut(&k) {
                set.remove(&other);
                if set.is_empty() {
                    map.remove(&k);
                }
            }
        }
        if let Views::Branch(label) = pair.views {
            self.labels.remove(&label);
            for side in [self.left.get_mut(&key.0), self.right.get_mut(&key.1)] {
                if let Some(Side::Branched(b)) = side {
                    b.abandon(label);
                }
            }
        }
    }

    fn pair_op(&mut self, key: (EpsCellId, EpsCellId), op: PairOp) {
        self.cost.pairs_visited += 1;
        let pair = self.pairs.get_mut(&key).expect("pair");
        match &mut pair.views {
            Views::Own(l, r) => apply(&mut pair.matching, op, l, r),
            Views::Branch(label) => {
                let label = *label;
                let Some(Side::Branched(ls)) = self.left.get_mut(&key.0) else { unreachable!("left store") };
                let Some(Side::Branched(rs)) = self.right.get_mut(&key.1) else { unreachable!("right store") };
                apply(
                    &mut pair.matching,
                    op,
                    &mut BranchView { store: ls, label },
                    &mut BranchView { store: rs, label },
                );
            }
        }
        let now = pair.matching.witness();
        let before = std::mem::replace(&mut pair.witness, now);
        if before != now {
            let p = Provenance::Type2(key.0, key.1);
            if let Some((l, r)) = before {
                self.unsupport(l, r, p);
            }
            if let Some((l, r)) = now {
                self.support(l, r, p);
            }
        }
    }

    fn has_population(&self, c: &CellId) -> bool {
        self.tree.node(c).is_some_and(|n| !n.population.is_empty())
    }

    fn span_insert(&mut self, c: CellId, s: &Shape) {
        for p in self.tree.type1_partners(&c) {
            if p != c && !self.has_population(&p) {
                continue;
            }
            let key = span_key(c, p);
            if !self.spans.contains_key(&key) {
                let mut sp = PointSpanner::new(self.cfg.dim, self.cfg.internal_eps());
                let mut ids: BTreeSet<ShapeId> = BTreeSet::new();
                for cell in [c, p] {
                    ids.extend(self.tree.node(&cell).map(|n| n.population.iter().copied()).into_iter().flatten());
                }
                ids.remove(&s.id);
                let mut built = Vec::new();
                for id in ids {
                    let d = sp.insert_point(id, self.tree.shape(id).expect("live").center()).expect("fresh point");
                    built.push(d);
                }
                self.spans.insert(key, sp);
                self.spans_of.entry(key.0).or_default().insert(key);
                self.spans_of.entry(key.1).or_default().insert(key);
                for d in built {
                    self.apply_span_delta(key, &d);
                }
            }
            let d = self.spans.get_mut(&key).expect("span").insert_point(s.id, s.center()).expect("fresh point");
            self.cost.span_updates += 1;
            self.apply_span_delta(key, &d);
        }
    }

    fn span_delete(&mut self, c: CellId, id: ShapeId) {
        let keys: Vec<(CellId, CellId)> = self.spans_of.get(&c).map(|s| s.iter().copied().collect()).unwrap_or_default();
        for &key in &keys {
            let d = self.spans.get_mut(&key).expect("span").delete_point(id).expect("point in span");
            self.cost.span_updates += 1;
            self.apply_span_delta(key, &d);
        }
        if !self.has_population(&c) {
            // Every span of `c` is now empty or a copy of its partner's own span.
            for key in keys {
                let sp = self.spans.remove(&key).expect("span");
                for (u, v) in sp.edges() {
                    self.unsupport(u, v, Provenance::Type1(key.0, key.1));
                }
                for cell in [key.0, key.1] {
                    if let Some(set) = self.spans_of.get_mut(&cell) {
                        set.remove(&key);
                        if set.is_empty() {
                            self.spans_of.remove(&cell);
                        }
                    }
                }
            }
        }
    }

    fn apply_span_delta(&mut self, key: (CellId, CellId), d: &EdgeDelta) {
        let p = Provenance::Type1(key.0, key.1);
        for &(u, v) in &d.removed {
            self.unsupport(u, v, p);
        }
        for &(u, v) in &d.added {
            self.support(u, v, p);
        }
    }

    fn support(&mut self, u: ShapeId, v: ShapeId, p: Provenance) {
        let e = ord(u, v);
        let set = self.support.entry(e).or_default();
        self.touched.entry(e).or_insert_with(|| set.first().copied());
        set.insert(p);
    }

    fn unsupport(&mut self, u: ShapeId, v: ShapeId, p: Provenance) {
        let e = ord(u, v);
        let set = self.support.get_mut(&e).expect("supported edge");
        self.touched.entry(e).or_insert_with(|| set.first().copied());
        assert!(set.remove(&p), "edge ({u},{v}) lacks support {p}");
        if set.is_empty() {
            self.support.remove(&e);
        }
    }

    fn finish_update(&mut self, gone: Option<Shape>) -> SpannerDelta {
        let mut delta = SpannerDelta::default();
        let weight = |tree: &QuadTree, u: ShapeId, v: ShapeId| {
            let get = |id: ShapeId| tree.shape(id).copied().or(gone.filter(|g| g.id == id)).expect("edge endpoint");
            edge_weight(&get(u), &get(v))
        };
        for ((u, v), before) in std::mem::take(&mut self.touched) {
            let now = self.support.get(&(u, v)).and_then(|s| s.first().copied());
            match (before, now) {
                (None, Some(p)) => delta.added.push(Edge { u, v, weight: weight(&self.tree, u, v), provenance: p }),
                (Some(p), None) => delta.removed.push(Edge { u, v, weight: weight(&self.tree, u, v), provenance: p }),
                _ => {}
            }
        }
        self.cost.edges_touched = delta.len();
        if let Some(log) = self.log.as_mut() {
            log.extend(delta.log_lines());
        }
        if self.cfg.mode == SpaceMode::Small {
            self.since_rebuild += 1;
            if self.since_rebuild >= self.rebuild_at {
                self.rebuild();
            }
        }
        delta
    }

    /// `max(1, floor(N / (2 Ψ^d)))` for `N` shapes.
    pub fn threshold_for(&self, n: usize) -> usize {
        let k = n as f64 / (2.0 * self.cfg.psi.powi(self.cfg.dim as i32));
        (k.floor() as usize).max(1)
    }

    /// Rebuild every shared store from its root set and difference trees.
    /// The spanner itself does not change.
    pub fn rebuild(&mut self) {
        for side in self.left.values_mut().chain(self.right.values_mut()) {
            if let Side::Branched(b) = side {
                b.rebuild();
            }
        }
        self.rebuilds += 1;
        self.since_rebuild = 0;
        self.rebuild_at = self.threshold_for(self.tree.len());
    }

    /// Current edges, ordered by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.support.iter().map(|(&(u, v), ps)| Edge {
            u,
            v,
            weight: edge_weight(self.tree.shape(u).expect("live"), self.tree.shape(v).expect("live")),
            provenance: *ps.first().expect("supported"),
        })
    }

    pub fn edge_pairs(&self) -> Vec<(ShapeId, ShapeId)> {
        self.support.keys().copied().collect()
    }

    pub fn edge_count(&self) -> usize {
        self.support.len()
    }

    pub fn matching_total(&self) -> usize {
        self.pairs.values().map(|p| p.matching.len()).sum()
    }

    /// Difference total; equals `2 Σ|M|` whenever the views are consistent.
    pub fn z(&self) -> usize {
        match self.cfg.mode {
            SpaceMode::Small => self
                .left
                .values()
                .chain(self.right.values())
                .map(|s| match s {
                    Side::Branched(b) => b.z(),
                    Side::Plain(_) => 0,
                })
                .sum(),
            SpaceMode::Big => self
                .pairs
                .iter()
                .map(|(k, p)| match &p.views {
                    Views::Own(l, r) => (self.left[&k.0].len() - l.len()) + (self.right[&k.1].len() - r.len()),
                    Views::Branch(_) => 0,
                })
                .sum(),
        }
    }

    pub fn stats(&self) -> SpannerStats {
        let mut s = SpannerStats {
            n: self.tree.len(),
            edge_count: self.support.len(),
            matching_total: self.matching_total(),
            z: self.z(),
            pairs: self.pairs.len(),
            spans: self.spans.len(),
            rebuilds: self.rebuilds,
            ..Default::default()
        };
        for ps in self.support.values() {
            if ps.iter().any(|p| matches!(p, Provenance::Type1(..))) {
                s.type1_count += 1;
            }
            if ps.iter().any(|p| matches!(p, Provenance::Type2(..))) {
                s.type2_count += 1;
            }
        }
        for side in self.left.values().chain(self.right.values()) {
            if let Side::Branched(b) = side {
                s.node_versions += b.node_versions_total();
            }
        }
        s
    }

    /// Recompute everything from the live set and compare: sides, pair set,
    /// matchings (validity, maximality, views), spans, edge supports and z.
    pub fn verify(&self) -> Result<(), String> {
        let tree = &self.tree;
        let shape = |id: &ShapeId| *tree.shape(*id).expect("live");
        let mut want_left: BTreeMap<EpsCellId, BTreeSet<ShapeId>> = BTreeMap::new();
        let mut want_right: BTreeMap<EpsCellId, BTreeSet<ShapeId>> = BTreeMap::new();
        for c in tree.cells() {
            for (g, rec) in &tree.node(c).expect("present").eps {
                let e = EpsCellId { cell: *c, grid: *g };
                if !rec.sub.is_empty() {
                    want_left.insert(e, rec.sub.clone());
                }
                if !rec.pop.is_empty() {
                    want_right.insert(e, rec.pop.clone());
                }
            }
        }
        for (name, have, want) in [("left", &self.left, &want_left), ("right", &self.right, &want_right)] {
            if have.len() != want.len() {
                return Err(format!("{name} sides: {} stores, {} nonempty ε-cells", have.len(), want.len()));
            }
            for (e, ids) in want {
                let got: BTreeSet<ShapeId> = have.get(e).map(|s| s.ids().into_iter().collect()).unwrap_or_default();
                if &got != ids {
                    return Err(format!("{name} side {e:?} holds {got:?}, expected {ids:?}"));
                }
            }
        }

        let mut expect_pairs = BTreeSet::new();
        for e1 in want_left.keys() {
            for (_, big) in tree.type2_partners(&e1.cell) {
                for g in tree.node(&big).expect("present").eps.keys() {
                    expect_pairs.insert((*e1, EpsCellId { cell: big, grid: *g }));
                }
            }
        }
        let have_pairs: BTreeSet<_> = self.pairs.keys().copied().collect();
        if have_pairs != expect_pairs {
            return Err(format!("pair set differs: {} live, {} expected", have_pairs.len(), expect_pairs.len()));
        }

        let mut expect_support: BTreeMap<(ShapeId, ShapeId), BTreeSet<Provenance>> = BTreeMap::new();
        for (key, pair) in &self.pairs {
            let ls: Vec<Shape> = want_left[&key.0].iter().map(shape).collect();
            let rs: Vec<Shape> = want_right[&key.1].iter().map(shape).collect();
            let (lv, rv) = match &pair.views {
                Views::Own(l, r) => (l.ids(), r.ids()),
                Views::Branch(label) => {
                    let (Side::Branched(lb), Side::Branched(rb)) = (&self.left[&key.0], &self.right[&key.1]) else {
                        return Err("branch view on a plain side".into());
                    };
                    (lb.members(*label), rb.members(*label))
                }
            };
            pair.matching.verify(&ls, &rs, &lv, &rv).map_err(|m| format!("pair {key:?}: {m}"))?;
            if pair.witness != pair.matching.witness() {
                return Err(format!("pair {key:?}: stale witness"));
            }
            if let Some((l, r)) = pair.witness {
                expect_support.entry(ord(l, r)).or_default().insert(Provenance::Type2(key.0, key.1));
            }
        }

        let mut expect_spans = BTreeSet::new();
        for c in tree.cells() {
            if !self.has_population(c) {
                continue;
            }
            for p in tree.type1_partners(c) {
                if self.has_population(&p) {
                    expect_spans.insert(span_key(*c, p));
                }
            }
        }
        let have_spans: BTreeSet<_> = self.spans.keys().copied().collect();
        if have_spans != expect_spans {
            return Err(format!("span set differs: {} live, {} expected", have_spans.len(), expect_spans.len()));
        }
        for (key, sp) in &self.spans {
            let mut ids: BTreeSet<ShapeId> = tree.node(&key.0).expect("present").population.clone();
            ids.extend(tree.node(&key.1).expect("present").population.iter().copied());
            let mut fresh = PointSpanner::new(self.cfg.dim, self.cfg.internal_eps());
            for id in &ids {
                fresh.insert_point(*id, shape(id).center()).expect("fresh");
            }
            if fresh.edges().collect::<Vec<_>>() != sp.edges().collect::<Vec<_>>() {
                return Err(format!("span {key:?} differs from a fresh build"));
            }
            for (u, v) in sp.edges() {
                expect_support.entry((u, v)).or_default().insert(Provenance::Type1(key.0, key.1));
            }
        }
        if expect_support != self.support {
            return Err("edge supports differ from recomputation".into());
        }
        if self.cfg.mode == SpaceMode::Small && self.z() != 2 * self.matching_total() {
            return Err(format!("z = {} but 2 Σ|M| = {}", self.z(), 2 * self.matching_total()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::check_stretch;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk_engine(psi: f64, eps: f64, mode: SpaceMode) -> SpannerEngine {
        SpannerEngine::new(SpannerConfig::new(ShapeKind::Disk, 2, psi, eps, mode))
    }

    #[test]
    fn single_and_tangent_disks() {
        let mut g = disk_engine(8.0, 0.7, SpaceMode::Big);
        assert_eq!(g.config().bx.side(), 16.0);
        let d = g.insert(Shape::disk(1, 4.0, 4.0, 2.0)).unwrap();
        assert!(d.is_empty() && g.edge_count() == 0);
        let d = g.insert(Shape::disk(2, 8.0, 4.0, 2.0)).unwrap();
        assert_eq!(d.added.len(), 1);
        let e = d.added[0];
        assert_eq!((e.u, e.v, e.weight), (1, 2, 4.0));
        // Storing cells [4,5]² and [8,9]² are far apart, so the matching carries it.
        assert!(matches!(e.provenance, Provenance::Type2(..)));
        g.verify().unwrap();
        g.insert(Shape::disk(3, 4.5, 5.5, 2.0)).unwrap();
        assert!(g.edges().any(|e| (e.u, e.v) == (1, 3) && matches!(e.provenance, Provenance::Type1(..))));
        g.delete(3).unwrap();
        let d = g.delete(1).unwrap();
        assert_eq!(d.removed.len(), 1);
        assert_eq!(g.edge_count(), 0);
        g.verify().unwrap();
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut g = disk_engine(8.0, 0.5, SpaceMode::Big);
        assert!(matches!(g.insert(Shape::disk(1, 4.0, 4.0, 1.0)), Err(EngineError::Diameter { .. })));
        assert!(matches!(g.insert(Shape::disk(1, 4.0, 4.0, 4.5)), Err(EngineError::Diameter { .. })));
        assert!(matches!(g.insert(Shape::cube(1, &[4.0, 4.0], 4.0)), Err(EngineError::Heterogeneous)));
        assert!(matches!(g.insert(Shape::disk(1, 40.0, 4.0, 2.0)), Err(EngineError::Geometry(_))));
        g.insert(Shape::disk(1, 4.0, 4.0, 2.0)).unwrap();
        assert!(matches!(g.insert(Shape::disk(1, 5.0, 4.0, 2.0)), Err(EngineError::DuplicateId(1))));
        assert!(matches!(g.delete(7), Err(EngineError::UnknownId(7))));
        assert_eq!(g.len(), 1);
        g.verify().unwrap();
    }

    #[test]
    fn far_intersection_gets_a_type2_edge() {
        // Storing cell of the small disk has side 1; the big one is 15 away.
        let mut g = disk_engine(32.0, 0.5, SpaceMode::Small);
        g.insert(Shape::disk(1, 10.5, 10.5, 2.0)).unwrap();
        assert_eq!(g.tree().box_spec().storing_cell(&Shape::disk(1, 10.5, 10.5, 2.0)).unwrap().level, 0);
        g.insert(Shape::disk(2, 25.5, 10.5, 14.0)).unwrap();
        let e: Vec<Edge> = g.edges().collect();
        assert_eq!(e.len(), 1);
        assert!(matches!(e[0].provenance, Provenance::Type2(..)), "{:?}", e[0]);
        g.verify().unwrap();
        assert_eq!(g.stats().z, 2 * g.stats().matching_total);
        assert!(g.stats().matching_total >= 1);
    }

    fn random_workload(seed: u64, psi: f64, n: usize, dim: usize, kind: ShapeKind) -> Vec<Result<Shape, ShapeId>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = BoxSpec::for_psi(psi, dim).side();
        let mut live: Vec<ShapeId> = Vec::new();
        let mut out = Vec::new();
        let mut next = 0;
        for _ in 0..n {
            if !live.is_empty() && rng.gen_bool(0.25) {
                let id = live.swap_remove(rng.gen_range(0..live.len()));
                out.push(Err(id));
                continue;
            }
            let diameter = rng.gen_range(4.0..=psi);
            let c: Vec<f64> = (0..dim).map(|_| (rng.gen_range(0.0..side) * 4.0).floor() / 4.0).collect();
            let s = match kind {
                ShapeKind::Disk => Shape::disk(next, c[0], c[1], diameter / 2.0),
                ShapeKind::Cube => Shape::cube(next, &c, diameter),
            };
            live.push(next);
            next += 1;
            out.push(Ok(s));
        }
        out
    }

    fn run(eps: f64, psi: f64, seed: u64, n: usize, dim: usize, kind: ShapeKind) {
        let cfg = |mode| SpannerConfig::new(kind, dim, psi, eps, mode);
        let mut big = SpannerEngine::new(cfg(SpaceMode::Big));
        let mut small = SpannerEngine::new(cfg(SpaceMode::Small));
        big.enable_log();
        small.enable_log();
        for (step, op) in random_workload(seed, psi, n, dim, kind).into_iter().enumerate() {
            let (a, b) = match op {
                Ok(s) => (big.insert(s).unwrap(), small.insert(s).unwrap()),
                Err(id) => (big.delete(id).unwrap(), small.delete(id).unwrap()),
            };
            assert_eq!(a, b, "step {step}");
            big.verify().unwrap_or_else(|m| panic!("big, step {step}: {m}"));
            small.verify().unwrap_or_else(|m| panic!("small, step {step}: {m}"));
            let r = check_stretch(&big.shapes(), &big.edge_pairs(), eps);
            assert!(r.ok, "step {step}: {r:?}");
        }
        assert_eq!(big.take_log(), small.take_log());
        assert!(small.stats().rebuilds > 0);
    }

    #[test]
    fn random_disk_sequences() {
        run(0.5, 8.0, 1, 60, 2, ShapeKind::Disk);
        run(0.9, 16.0, 2, 60, 2, ShapeKind::Disk);
        run(0.25, 8.0, 3, 40, 2, ShapeKind::Disk);
    }

    #[test]
    fn random_cube_sequences() {
        run(0.5, 8.0, 4, 50, 2, ShapeKind::Cube);
        run(0.9, 8.0, 5, 30, 3, ShapeKind::Cube);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn engines_agree_and_stretch_holds(seed in any::<u64>(), eps in prop::sample::select(vec![0.3, 0.6, 0.9])) {
            run(eps, 8.0, seed, 30, 2, ShapeKind::Disk);
        }
    }
}
