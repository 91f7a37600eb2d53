//! Connectivity queries on the intersection graph through a proxy graph on
//! quadtree cells.
//!
//! Every storing cell stands for its garrison, which is a clique. Proxy edges:
//! - matching: `{C, C'}` with `C'` in the perimeter of a shape of `C` (or the
//!   reverse) and a nonempty maximal matching between the two garrisons;
//! - containment: `C_σ` to every present constituent of `σ`;
//! - parent: `X` to its parent whenever some ancestor-or-self of the parent is
//!   marked, so everything below a marked cell hangs together.
//!
//! Two shapes are connected iff the highest marked strict ancestors of their
//! storing cells (or the cells themselves) are connected in the proxy graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dynconn::{DynConn, EdgeId};
use crate::error::EngineError;
use crate::geometry::{BoxSpec, CellId, Shape, ShapeId, ShapeKind, MAX_DIM};
use crate::index::{Algo, IntersectionIndex};
use crate::matching::{apply, BranchView, Matching, PairOp, Side, Views};
use crate::persistence::BranchStore;
use crate::quadtree::{QuadTree, TreeMode};
use crate::spanner::SpaceMode;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectivityConfig {
    pub kind: ShapeKind,
    pub dim: usize,
    pub psi: f64,
    pub mode: SpaceMode,
    pub bx: BoxSpec,
}

impl ConnectivityConfig {
    pub fn new(kind: ShapeKind, dim: usize, psi: f64, mode: SpaceMode) -> ConnectivityConfig {
        assert!(psi >= 4.0, "psi must be at least 4, got {psi}");
        assert!(kind == ShapeKind::Cube || dim == 2, "disks are two-dimensional");
        ConnectivityConfig { kind, dim, psi, mode, bx: BoxSpec::for_psi(psi, dim) }
    }

    pub fn with_box(mut self, bx: BoxSpec) -> ConnectivityConfig {
        assert_eq!(bx.dim, self.dim, "box dimension");
        self.bx = bx;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConnectivityStats {
    pub n: usize,
    pub cells: usize,
    pub storing_cells: usize,
    pub pairs: usize,
    pub matching_total: usize,
    pub z: usize,
    pub proxy_edges: usize,
    pub marked_cells: usize,
    pub node_versions: usize,
    pub rebuilds: usize,
}

/// Euclidean diameter.
fn euclid_diameter(s: &Shape) -> f64 {
    match s.kind {
        ShapeKind::Disk => 2.0 * s.extent,
        ShapeKind::Cube => s.extent * (s.dim as f64).sqrt(),
    }
}

fn cell_box(bx: &BoxSpec, c: &CellId) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
    (bx.cell_lo(c), bx.cell_hi(c))
}

fn seven_box(bx: &BoxSpec, c: &CellId) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
    let r = bx.neighborhood(c, 7);
    (r.lo(), r.hi())
}

/// Is `c` in the perimeter of `s`: cell diameter at most `|s|` and `7 * c`
/// meeting the boundary of `s`.
pub fn in_perimeter(bx: &BoxSpec, s: &Shape, c: &CellId) -> bool {
    if bx.cell_side(c.level) * (bx.dim as f64).sqrt() > euclid_diameter(s) {
        return false;
    }
    let (lo, hi) = seven_box(bx, c);
    s.box_meets_boundary(&lo[..bx.dim], &hi[..bx.dim])
}

/// Is `c` a maximal cell of `s`: contained in `s` with the parent not contained.
pub fn is_maximal(bx: &BoxSpec, s: &Shape, c: &CellId) -> bool {
    if !bx.shape_contains_cell(s, c) {
        return false;
    }
    c.level == bx.top_level || !bx.shape_contains_cell(s, &c.parent())
}

/// Cells of the complete quadtree in the perimeter of `s`.
pub fn perimeter_all(bx: &BoxSpec, s: &Shape) -> Vec<CellId> {
    let mut out = Vec::new();
    for level in 0..=bx.top_level {
        if bx.cell_side(level) * (bx.dim as f64).sqrt() > euclid_diameter(s) {
            break;
        }
        let (lo, hi) = index_range(bx, s, level, 3);
        for_each_cell(bx.dim, level, &lo, &hi, |c| {
            if in_perimeter(bx, s, &c) {
                out.push(c);
            }
        });
    }
    out
}

/// Maximal cells of `s` in the complete quadtree.
pub fn maximal_all(bx: &BoxSpec, s: &Shape) -> Vec<CellId> {
    let mut out = Vec::new();
    let mut stack = vec![bx.root()];
    while let Some(c) = stack.pop() {
        let (lo, hi) = cell_box(bx, &c);
        if s.contains_box(&lo[..bx.dim], &hi[..bx.dim]) {
            out.push(c);
        } else if c.level > 0 && s.meets_box(&lo[..bx.dim], &hi[..bx.dim]) {
            stack.extend(c.children(bx.dim));
        }
    }
    out.sort();
    out
}

/// Index range at `level` covering the bounding box of `s` plus `margin` cells.
fn index_range(bx: &BoxSpec, s: &Shape, level: u32, margin: i64) -> ([i64; MAX_DIM], [i64; MAX_DIM]) {
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for a in 0..bx.dim {
        lo[a] = real_range(bx, a, s.bbox_lo(a), level) - margin - 1;
        hi[a] = real_range(bx, a, s.bbox_hi(a), level) + margin + 1;
    }
    clamp(bx, level, &mut lo, &mut hi);
    (lo, hi)
}

fn box_range(bx: &BoxSpec, blo: &[f64], bhi: &[f64], level: u32, margin: i64) -> ([i64; MAX_DIM], [i64; MAX_DIM]) {
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for a in 0..bx.dim {
        lo[a] = real_range(bx, a, blo[a], level) - margin - 1;
        hi[a] = real_range(bx, a, bhi[a], level) + margin + 1;
    }
    clamp(bx, level, &mut lo, &mut hi);
    (lo, hi)
}

fn real_range(bx: &BoxSpec, a: usize, x: f64, level: u32) -> i64 {
    ((x - bx.origin[a]) / bx.cell_side(level)).floor() as i64
}

fn clamp(bx: &BoxSpec, level: u32, lo: &mut [i64; MAX_DIM], hi: &mut [i64; MAX_DIM]) {
    let n = bx.cells_per_axis(level);
    for a in 0..bx.dim {
        lo[a] = lo[a].max(0);
        hi[a] = hi[a].min(n - 1);
    }
}

fn for_each_cell(dim: usize, level: u32, lo: &[i64; MAX_DIM], hi: &[i64; MAX_DIM], mut f: impl FnMut(CellId)) {
    if (0..dim).any(|a| lo[a] > hi[a]) {
        return;
    }
    let mut cur = *lo;
    loop {
        f(CellId { level, coords: cur });
        let mut a = 0;
        loop {
            if a == dim {
                return;
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

fn ord(a: CellId, b: CellId) -> (CellId, CellId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn pair_label(a: &CellId, b: &CellId) -> u64 {
    crate::mix64(a.key() ^ crate::mix64(b.key() ^ 0x636f_6e6e)).max(1)
}

struct CellPair {
    matching: Matching,
    views: Views,
}

pub struct ConnectivityEngine {
    cfg: ConnectivityConfig,
    algo: Algo,
    tree: QuadTree,
    /// Garrison stores, one per storing cell.
    stores: BTreeMap<CellId, Side>,
    /// `(Z, C)`: shapes of Γ(Z) having the storing cell `C` in their perimeter.
    perim: BTreeMap<(CellId, CellId), usize>,
    perim_in: BTreeMap<CellId, BTreeSet<CellId>>,
    perim_out: BTreeMap<CellId, BTreeSet<CellId>>,
    pairs: BTreeMap<(CellId, CellId), CellPair>,
    pairs_of: BTreeMap<CellId, BTreeSet<CellId>>,
    labels: HashMap<u64, (CellId, CellId)>,
    /// `(Z, A)`: shapes of Γ(Z) having the present cell `A` as a constituent.
    constituents: BTreeMap<(CellId, CellId), usize>,
    constituents_of: BTreeMap<CellId, BTreeSet<CellId>>,
    /// Cells holding a parent edge.
    parent_edges: BTreeSet<CellId>,
    proxy: BTreeMap<(CellId, CellId), (usize, EdgeId)>,
    vertex: BTreeMap<CellId, u64>,
    next_vertex: u64,
    graph: DynConn,
    since_rebuild: usize,
    rebuild_at: usize,
    rebuilds: usize,
}

impl ConnectivityEngine {
    pub fn new(cfg: ConnectivityConfig) -> ConnectivityEngine {
        ConnectivityEngine {
            cfg,
            algo: Algo::for_kind(cfg.kind, cfg.dim, cfg.psi),
            tree: QuadTree::new(cfg.bx, TreeMode::Connectivity, cfg.psi, 0.5),
            stores: BTreeMap::new(),
            perim: BTreeMap::new(),
            perim_in: BTreeMap::new(),
            perim_out: BTreeMap::new(),
            pairs: BTreeMap::new(),
            pairs_of: BTreeMap::new(),
            labels: HashMap::new(),
            constituents: BTreeMap::new(),
            constituents_of: BTreeMap::new(),
            parent_edges: BTreeSet::new(),
            proxy: BTreeMap::new(),
            vertex: BTreeMap::new(),
            next_vertex: 0,
            graph: DynConn::new(),
            since_rebuild: 0,
            rebuild_at: 1,
            rebuilds: 0,
        }
    }

    pub fn config(&self) -> &ConnectivityConfig {
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

    pub fn shapes(&self) -> Vec<Shape> {
        self.tree.shapes().copied().collect()
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

    pub fn insert(&mut self, s: Shape) -> Result<(), EngineError> {
        self.check_shape(&s)?;
        if self.contains(s.id) {
            return Err(EngineError::DuplicateId(s.id));
        }
        let rep = self.tree.insert_shape(&s)?;
        let c = rep.family[0];
        let mut dirty: BTreeSet<(CellId, CellId)> = BTreeSet::new();
        let mut toggled: BTreeSet<CellId> = BTreeSet::new();

        // Constituent counts for new cells come from a scan; σ's older cells get +1.
        let created: BTreeSet<CellId> = rep.created.iter().copied().collect();
        for a in &rep.created {
            self.scan_constituents(*a, &mut toggled);
        }
        for a in self.maximal_present(&s) {
            if !created.contains(&a) {
                self.bump_constituent(c, a, 1, &mut toggled);
            }
        }
        for x in &rep.created {
            self.sync_parent_edge(*x);
        }

        if rep.storing_toggled {
            self.scan_perimeter_sources(c, &mut dirty);
            let store = match self.cfg.mode {
                SpaceMode::Big => Side::Plain(BTreeMap::new()),
                SpaceMode::Small => Side::Branched(BranchStore::new(self.algo)),
            };
            self.stores.insert(c, store);
        }
        self.stores.get_mut(&c).expect("store of a storing cell").insert(&s);
        for p in self.perimeter_present(&s) {
            if p != c {
                self.bump_perimeter(c, p, 1, &mut dirty);
            }
        }
        let partners: Vec<CellId> = self.pairs_of.get(&c).map(|p| p.iter().copied().collect()).unwrap_or_default();
        for p in partners {
            let key = ord(c, p);
            let op = if key.0 == c { PairOp::LeftInsert(s) } else { PairOp::RightInsert(s) };
            self.pair_op(key, op);
        }
        self.reconcile(dirty);
        for a in toggled {
            if self.tree.contains(&a) {
                self.refresh_below(a);
            }
        }
        self.tick();
        Ok(())
    }

    pub fn delete(&mut self, id: ShapeId) -> Result<(), EngineError> {
        let s = *self.tree.shape(id).ok_or(EngineError::UnknownId(id))?;
        let c = self.tree.box_spec().storing_cell(&s)?;
        let mut dirty: BTreeSet<(CellId, CellId)> = BTreeSet::new();
        let mut toggled: BTreeSet<CellId> = BTreeSet::new();

        for p in self.perimeter_present(&s) {
            if p != c {
                self.bump_perimeter(c, p, -1, &mut dirty);
            }
        }
        self.stores.get_mut(&c).expect("store of a storing cell").delete(id);
        let partners: Vec<CellId> = self.pairs_of.get(&c).map(|p| p.iter().copied().collect()).unwrap_or_default();
        for p in partners {
            let key = ord(c, p);
            let op = if key.0 == c { PairOp::LeftDelete(id) } else { PairOp::RightDelete(id) };
            self.pair_op(key, op);
        }
        for a in self.maximal_present(&s) {
            self.bump_constituent(c, a, -1, &mut toggled);
        }

        let rep = self.tree.delete_shape(id)?;
        if rep.storing_toggled {
            let ins: Vec<CellId> = self.perim_in.get(&c).map(|z| z.iter().copied().collect()).unwrap_or_default();
            for z in ins {
                let n = self.perim[&(z, c)] as isize;
                self.bump_perimeter(z, c, -n, &mut dirty);
            }
            debug_assert!(!self.perim_out.contains_key(&c));
            for p in self.pairs_of.get(&c).cloned().unwrap_or_default() {
                dirty.insert(ord(c, p));
            }
        }
        self.reconcile(dirty);
        if rep.storing_toggled {
            self.stores.remove(&c);
        }
        for x in &rep.removed {
            self.drop_cell(*x);
        }
        for a in toggled {
            if self.tree.contains(&a) {
                self.refresh_below(a);
            }
        }
        self.tick();
        Ok(())
    }

    fn tick(&mut self) {
        if self.cfg.mode != SpaceMode::Small {
            return;
        }
        self.since_rebuild += 1;
        if self.since_rebuild >= self.rebuild_at {
            self.rebuild();
        }
    }

    /// `max(1, floor(N log2 Ψ / (2 Ψ^(d-1))))` for `N` shapes.
    pub fn threshold_for(&self, n: usize) -> usize {
        let psi = self.cfg.psi;
        let k = n as f64 * psi.log2() / (2.0 * psi.powi(self.cfg.dim as i32 - 1));
        (k.floor() as usize).max(1)
    }

    pub fn rebuild(&mut self) {
        for side in self.stores.values_mut() {
            if let Side::Branched(b) = side {
                b.rebuild();
            }
        }
        self.rebuilds += 1;
        self.since_rebuild = 0;
        self.rebuild_at = self.threshold_for(self.tree.len());
    }

    /// Present cells that are maximal in `s`.
    fn maximal_present(&self, s: &Shape) -> Vec<CellId> {
        let bx = self.tree.box_spec();
        let mut out = Vec::new();
        let mut stack = vec![bx.root()];
        while let Some(c) = stack.pop() {
            if !self.tree.contains(&c) {
                continue;
            }
            let (lo, hi) = cell_box(bx, &c);
            if s.contains_box(&lo[..bx.dim], &hi[..bx.dim]) {
                out.push(c);
            } else if c.level > 0 && s.meets_box(&lo[..bx.dim], &hi[..bx.dim]) {
                stack.extend(c.children(bx.dim));
            }
        }
        out.sort();
        out
    }

    /// Storing cells in the perimeter of `s`.
    fn perimeter_present(&self, s: &Shape) -> Vec<CellId> {
        let bx = *self.tree.box_spec();
        let mut out = Vec::new();
        for level in 0..=bx.top_level {
            if bx.cell_side(level) * (bx.dim as f64).sqrt() > euclid_diameter(s) {
                break;
            }
            let (lo, hi) = index_range(&bx, s, level, 3);
            for c in self.tree.cells_in_range(level, &lo, &hi, true) {
                if in_perimeter(&bx, s, &c) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Storing cells `Z` at level `min_level` or above whose `7 * Z` meets the box.
    fn storing_near(&self, lo: &[f64], hi: &[f64], min_level: u32) -> Vec<CellId> {
        let bx = *self.tree.box_spec();
        let mut out = Vec::new();
        for level in min_level..=bx.top_level {
            let (rlo, rhi) = box_range(&bx, lo, hi, level, 3);
            out.extend(self.tree.cells_in_range(level, &rlo, &rhi, true));
        }
        out
    }

    fn scan_constituents(&mut self, a: CellId, toggled: &mut BTreeSet<CellId>) {
        let bx = *self.tree.box_spec();
        let (lo, hi) = cell_box(&bx, &a);
        for z in self.storing_near(&lo[..bx.dim], &hi[..bx.dim], a.level.saturating_sub(2)) {
            let n = self.tree.node(&z).expect("present").garrison.iter().filter(|id| {
                let s = self.tree.shape(**id).expect("live");
                is_maximal(&bx, s, &a)
            });
            let n = n.count() as isize;
            if n > 0 {
                self.bump_constituent(z, a, n, toggled);
            }
        }
    }

    fn bump_constituent(&mut self, z: CellId, a: CellId, by: isize, toggled: &mut BTreeSet<CellId>) {
        let key = (z, a);
        let before = self.constituents.get(&key).copied().unwrap_or(0);
        let after = (before as isize + by) as usize;
        if after == 0 {
            self.constituents.remove(&key);
            if let Some(set) = self.constituents_of.get_mut(&a) {
                set.remove(&z);
                if set.is_empty() {
                    self.constituents_of.remove(&a);
                }
            }
        } else {
            self.constituents.insert(key, after);
            self.constituents_of.entry(a).or_default().insert(z);
        }
        if z != a {
            if before == 0 && after > 0 {
                self.add_proxy(z, a);
            } else if before > 0 && after == 0 {
                self.remove_proxy(z, a);
            }
        }
        let node = self.tree.node_mut(&a).expect("constituent is present");
        let was = node.marks;
        node.marks = (node.marks as isize + by) as usize;
        if (was == 0) != (node.marks == 0) {
            toggled.insert(a);
        }
    }

    /// Sources `Z` with shapes having the new storing cell `c` in their perimeter.
    fn scan_perimeter_sources(&mut self, c: CellId, dirty: &mut BTreeSet<(CellId, CellId)>) {
        let bx = *self.tree.box_spec();
        let (lo, hi) = seven_box(&bx, &c);
        for z in self.storing_near(&lo[..bx.dim], &hi[..bx.dim], c.level.saturating_sub(2)) {
            if z == c {
                continue;
            }
            let n = self
                .tree
                .node(&z)
                .expect("present")
                .garrison
                .iter()
                .filter(|id| in_perimeter(&bx, self.tree.shape(**id).expect("live"), &c))
                .count() as isize;
            if n > 0 {
                self.bump_perimeter(z, c, n, dirty);
            }
        }
    }

    fn bump_perimeter(&mut self, z: CellId, c: CellId, by: isize, dirty: &mut BTreeSet<(CellId, CellId)>) {
        let key = (z, c);
        let before = self.perim.get(&key).copied().unwrap_or(0);
        let after = (before as isize + by) as usize;
        if after == 0 {
            self.perim.remove(&key);
            for (map, k, v) in [(&mut self.perim_in, c, z), (&mut self.perim_out, z, c)] {
                if let Some(set) = map.get_mut(&k) {
                    set.remove(&v);
                    if set.is_empty() {
                        map.remove(&k);
                    }
                }
            }
        } else {
            self.perim.insert(key, after);
            self.perim_in.entry(c).or_default().insert(z);
            self.perim_out.entry(z).or_default().insert(c);
        }
        if (before == 0) != (after == 0) {
            dirty.insert(ord(z, c));
        }
    }

    fn pair_wanted(&self, key: (CellId, CellId)) -> bool {
        let (a, b) = key;
        a != b
            && self.tree.is_storing(&a)
            && self.tree.is_storing(&b)
            && (self.perim.contains_key(&(a, b)) || self.perim.contains_key(&(b, a)))
    }

    fn reconcile(&mut self, dirty: BTreeSet<(CellId, CellId)>) {
        for key in dirty {
            match (self.pairs.contains_key(&key), self.pair_wanted(key)) {
                (false, true) => self.create_pair(key),
                (true, false) => self.teardown_pair(key),
                _ => {}
            }
        }
    }

    fn create_pair(&mut self, key: (CellId, CellId)) {
        let views = match self.cfg.mode {
            SpaceMode::Big => {
                let mut idx = [IntersectionIndex::new(self.algo), IntersectionIndex::new(self.algo)];
                for (k, cell) in [key.0, key.1].iter().enumerate() {
                    for id in &self.tree.node(cell).expect("present").garrison {
                        idx[k].insert(self.tree.shape(*id).expect("live")).expect("fresh");
                    }
                }
                let [l, r] = idx;
                Views::Own(l, r)
            }
            SpaceMode::Small => {
                let label = pair_label(&key.0, &key.1);
                if let Some(other) = self.labels.insert(label, key) {
                    assert_eq!(other, key, "branch label collision");
                }
                for cell in [key.0, key.1] {
                    let Some(Side::Branched(b)) = self.stores.get_mut(&cell) else { unreachable!("branched store") };
                    b.branch(label);
                }
                Views::Branch(label)
            }
        };
        self.pairs.insert(key, CellPair { matching: Matching::new(), views });
        self.pairs_of.entry(key.0).or_default().insert(key.1);
        self.pairs_of.entry(key.1).or_default().insert(key.0);
        // Greedy fill: every shape is already in its view.
        let left: Vec<Shape> = self.garrison_shapes(&key.0);
        for s in left {
            self.pair_op(key, PairOp::LeftInsert(s));
        }
    }

    fn garrison_shapes(&self, c: &CellId) -> Vec<Shape> {
        self.tree.node(c).expect("present").garrison.iter().map(|id| *self.tree.shape(*id).expect("live")).collect()
    }

    fn teardown_pair(&mut self, key: (CellId, CellId)) {
        let pair = self.pairs.remove(&key).expect("pair");
        if !pair.matching.is_empty() {
            self.remove_proxy(key.0, key.1);
        }
        for (a, b) in [(key.0, key.1), (key.1, key.0)] {
            if let Some(set) = self.pairs_of.get_mut(&a) {
                set.remove(&b);
                if set.is_empty() {
                    self.pairs_of.remove(&a);
                }
            }
        }
        if let Views::Branch(label) = pair.views {
            self.labels.remove(&label);
            // Matched shapes go back so the abandoned branch holds no difference.
            for (k, cell) in [key.0, key.1].into_iter().enumerate() {
                if let Some(Side::Branched(b)) = self.stores.get_mut(&cell) {
                    for e in pair.matching.edges() {
                        b.branch_insert(label, if k == 0 { e.0 } else { e.1 });
                    }
                    b.abandon(label);
                }
            }
        }
    }

    fn pair_op(&mut self, key: (CellId, CellId), op: PairOp) {
        let pair = self.pairs.get_mut(&key).expect("pair");
        let before = pair.matching.is_empty();
        match &mut pair.views {
            Views::Own(l, r) => apply(&mut pair.matching, op, l, r),
            Views::Branch(label) => {
                let label = *label;
                let mut right = self.stores.remove(&key.1).expect("right store");
                let Some(Side::Branched(ls)) = self.stores.get_mut(&key.0) else { unreachable!("left store") };
                let Side::Branched(rs) = &mut right else { unreachable!("right store") };
                apply(&mut pair.matching, op, &mut BranchView { store: ls, label }, &mut BranchView { store: rs, label });
                self.stores.insert(key.1, right);
            }
        }
        let after = pair.matching.is_empty();
        if before && !after {
            self.add_proxy(key.0, key.1);
        } else if !before && after {
            self.remove_proxy(key.0, key.1);
        }
    }

    fn covered(&self, c: &CellId) -> bool {
        let top = self.tree.box_spec().top_level;
        (c.level..=top).any(|l| self.tree.node(&c.ancestor(l)).is_some_and(|n| n.marks > 0))
    }

    fn sync_parent_edge(&mut self, x: CellId) {
        let want = x.level < self.tree.box_spec().top_level && self.covered(&x.parent());
        let have = self.parent_edges.contains(&x);
        if want && !have {
            self.parent_edges.insert(x);
            self.add_proxy(x, x.parent());
        } else if !want && have {
            self.parent_edges.remove(&x);
            self.remove_proxy(x, x.parent());
        }
    }

    /// Resync parent edges of every present strict descendant of `a`.
    fn refresh_below(&mut self, a: CellId) {
        let dim = self.cfg.dim;
        for level in (0..a.level).rev() {
            let shift = a.level - level;
            let mut lo = [0i64; MAX_DIM];
            let mut hi = [0i64; MAX_DIM];
            for k in 0..dim {
                lo[k] = a.coords[k] << shift;
                hi[k] = ((a.coords[k] + 1) << shift) - 1;
            }
            for x in self.tree.cells_in_range(level, &lo, &hi, false) {
                self.sync_parent_edge(x);
            }
        }
    }

    fn drop_cell(&mut self, x: CellId) {
        if self.parent_edges.remove(&x) {
            self.remove_proxy(x, x.parent());
        }
        for z in self.constituents_of.remove(&x).unwrap_or_default() {
            self.constituents.remove(&(z, x));
            if z != x {
                self.remove_proxy(z, x);
            }
        }
        if let Some(v) = self.vertex.remove(&x) {
            let gone = self.graph.remove_vertex(v);
            debug_assert!(gone, "proxy vertex of a removed cell still has edges");
        }
    }

    fn vertex_of(&mut self, c: CellId) -> u64 {
        if let Some(&v) = self.vertex.get(&c) {
            return v;
        }
        let v = self.next_vertex;
        self.next_vertex += 1;
        self.vertex.insert(c, v);
        v
    }

    fn add_proxy(&mut self, a: CellId, b: CellId) {
        let key = ord(a, b);
        if let Some(e) = self.proxy.get_mut(&key) {
            e.0 += 1;
            return;
        }
        let (u, v) = (self.vertex_of(key.0), self.vertex_of(key.1));
        let id = self.graph.add_edge(u, v);
        self.proxy.insert(key, (1, id));
    }

    fn remove_proxy(&mut self, a: CellId, b: CellId) {
        let key = ord(a, b);
        let e = self.proxy.get_mut(&key).expect("proxy edge");
        e.0 -= 1;
        if e.0 == 0 {
            let id = e.1;
            self.proxy.remove(&key);
            self.graph.remove_edge(id);
        }
    }

    /// Highest marked strict ancestor of the storing cell of `id`, else the
    /// storing cell itself.
    pub fn proxy_vertex(&self, id: ShapeId) -> Result<CellId, EngineError> {
        let s = self.tree.shape(id).ok_or(EngineError::UnknownId(id))?;
        let c = self.tree.box_spec().storing_cell(s)?;
        let top = self.tree.box_spec().top_level;
        Ok((c.level + 1..=top)
            .rev()
            .map(|l| c.ancestor(l))
            .find(|a| self.tree.node(a).is_some_and(|n| n.marks > 0))
            .unwrap_or(c))
    }

    pub fn connected(&self, a: ShapeId, b: ShapeId) -> Result<bool, EngineError> {
        let (pa, pb) = (self.proxy_vertex(a)?, self.proxy_vertex(b)?);
        if pa == pb {
            return Ok(true);
        }
        Ok(match (self.vertex.get(&pa), self.vertex.get(&pb)) {
            (Some(&u), Some(&v)) => self.graph.connected(u, v),
            _ => false,
        })
    }

    /// Present constituents of `id`.
    pub fn constituents_of(&self, id: ShapeId) -> Option<Vec<CellId>> {
        self.tree.shape(id).map(|s| self.maximal_present(s))
    }

    /// Storing cells in the perimeter of `id`.
    pub fn perimeter_of(&self, id: ShapeId) -> Option<Vec<CellId>> {
        self.tree.shape(id).map(|s| self.perimeter_present(s))
    }

    pub fn matching_total(&self) -> usize {
        self.pairs.values().map(|p| p.matching.len()).sum()
    }

    pub fn z(&self) -> usize {
        self.stores
            .values()
            .map(|s| match s {
                Side::Branched(b) => b.z(),
                Side::Plain(_) => 0,
            })
            .sum()
    }

    pub fn stats(&self) -> ConnectivityStats {
        ConnectivityStats {
            n: self.tree.len(),
            cells: self.tree.node_count(),
            storing_cells: self.stores.len(),
            pairs: self.pairs.len(),
            matching_total: self.matching_total(),
            z: self.z(),
            proxy_edges: self.proxy.len(),
            marked_cells: self.tree.cells().filter(|c| self.tree.node(c).is_some_and(|n| n.marks > 0)).count(),
            node_versions: self
                .stores
                .values()
                .map(|s| match s {
                    Side::Branched(b) => b.node_versions_total(),
                    Side::Plain(_) => 0,
                })
                .sum(),
            rebuilds: self.rebuilds,
        }
    }

    /// Recompute marks, perimeter counts, pairs, matchings, parent edges and
    /// the proxy edge multiset from scratch and compare.
    pub fn verify(&self) -> Result<(), String> {
        let bx = *self.tree.box_spec();
        let shapes = self.shapes();
        let storing_of = |s: &Shape| bx.storing_cell(s).expect("stored");
        let present: Vec<CellId> = self.tree.cells().copied().collect();
        let storing: Vec<CellId> = present.iter().copied().filter(|c| self.tree.is_storing(c)).collect();

        let mut want_cons: BTreeMap<(CellId, CellId), usize> = BTreeMap::new();
        let mut want_perim: BTreeMap<(CellId, CellId), usize> = BTreeMap::new();
        for s in &shapes {
            let z = storing_of(s);
            for a in &present {
                if is_maximal(&bx, s, a) {
                    *want_cons.entry((z, *a)).or_default() += 1;
                }
            }
            for c in &storing {
                if *c != z && in_perimeter(&bx, s, c) {
                    *want_perim.entry((z, *c)).or_default() += 1;
                }
            }
        }
        if want_cons != self.constituents {
            return Err("constituent counts differ from recomputation".into());
        }
        for a in &present {
            let m: usize = want_cons.iter().filter(|((_, x), _)| x == a).map(|(_, n)| n).sum();
            if self.tree.node(a).expect("present").marks != m {
                return Err(format!("marks of {a:?} stale"));
            }
        }
        if want_perim != self.perim {
            return Err("perimeter counts differ from recomputation".into());
        }

        let want_pairs: BTreeSet<(CellId, CellId)> = want_perim.keys().map(|&(a, b)| ord(a, b)).collect();
        let have_pairs: BTreeSet<(CellId, CellId)> = self.pairs.keys().copied().collect();
        if want_pairs != have_pairs {
            return Err(format!("pair set differs: {} live, {} expected", have_pairs.len(), want_pairs.len()));
        }
        for (key, pair) in &self.pairs {
            let ls = self.garrison_shapes(&key.0);
            let rs = self.garrison_shapes(&key.1);
            let (lv, rv) = match &pair.views {
                Views::Own(l, r) => (l.ids(), r.ids()),
                Views::Branch(label) => {
                    let (Some(Side::Branched(lb)), Some(Side::Branched(rb))) = (self.stores.get(&key.0), self.stores.get(&key.1)) else {
                        return Err("branch view without branched stores".into());
                    };
                    (lb.members(*label), rb.members(*label))
                }
            };
            pair.matching.verify(&ls, &rs, &lv, &rv).map_err(|m| format!("pair {key:?}: {m}"))?;
        }
        for (c, side) in &self.stores {
            let want: Vec<ShapeId> = self.tree.node(c).map(|n| n.garrison.iter().copied().collect()).unwrap_or_default();
            if side.ids() != want {
                return Err(format!("store of {c:?} differs from its garrison"));
            }
        }
        if self.stores.len() != storing.len() {
            return Err("store set differs from storing cells".into());
        }

        let marked = |c: &CellId| self.tree.node(c).is_some_and(|n| n.marks > 0);
        let mut want_proxy: BTreeMap<(CellId, CellId), usize> = BTreeMap::new();
        for x in &present {
            if x.level < bx.top_level {
                let p = x.parent();
                if (p.level..=bx.top_level).any(|l| marked(&p.ancestor(l))) {
                    *want_proxy.entry(ord(*x, p)).or_default() += 1;
                    if !self.parent_edges.contains(x) {
                        return Err(format!("missing parent edge at {x:?}"));
                    }
                } else if self.parent_edges.contains(x) {
                    return Err(format!("stale parent edge at {x:?}"));
                }
            }
        }
        for &(z, a) in want_cons.keys() {
            if z != a {
                *want_proxy.entry(ord(z, a)).or_default() += 1;
            }
        }
        for (key, pair) in &self.pairs {
            if !pair.matching.is_empty() {
                *want_proxy.entry(*key).or_default() += 1;
            }
        }
        let have_proxy: BTreeMap<(CellId, CellId), usize> = self.proxy.iter().map(|(k, v)| (*k, v.0)).collect();
        if want_proxy != have_proxy {
            return Err("proxy edges differ from recomputation".into());
        }
        if self.graph.edge_count() != self.proxy.len() {
            return Err("graph edge count differs from the proxy map".into());
        }
        if self.cfg.mode == SpaceMode::Small && self.z() != 2 * self.matching_total() {
            return Err(format!("z = {} but 2 Σ|M| = {}", self.z(), 2 * self.matching_total()));
        }
        self.graph.check()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::intersection_components;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn engine(kind: ShapeKind, dim: usize, psi: f64, mode: SpaceMode) -> ConnectivityEngine {
        ConnectivityEngine::new(ConnectivityConfig::new(kind, dim, psi, mode))
    }

    fn check_all(g: &ConnectivityEngine) {
        let shapes = g.shapes();
        let mut uf = intersection_components(&shapes);
        for a in &shapes {
            for b in &shapes {
                if a.id < b.id {
                    assert_eq!(g.connected(a.id, b.id).unwrap(), uf.same(a.id, b.id), "{a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn overlapping_pair_and_singletons() {
        let mut g = engine(ShapeKind::Disk, 2, 16.0, SpaceMode::Small);
        g.insert(Shape::disk(1, 4.5, 4.5, 2.0)).unwrap();
        assert!(g.connected(1, 1).unwrap());
        g.insert(Shape::disk(2, 8.0, 4.5, 2.0)).unwrap();
        assert!(g.connected(1, 2).unwrap());
        assert!(g.stats().matching_total >= 1);
        g.insert(Shape::disk(3, 25.0, 25.0, 2.0)).unwrap();
        assert!(!g.connected(1, 3).unwrap());
        assert!(matches!(g.connected(1, 9), Err(EngineError::UnknownId(9))));
        g.verify().unwrap();
    }

    #[test]
    fn engulfed_disk_connects_without_a_matching() {
        let mut g = engine(ShapeKind::Disk, 2, 32.0, SpaceMode::Small);
        g.insert(Shape::disk(1, 16.0, 16.0, 15.0)).unwrap();
        g.insert(Shape::disk(2, 13.5, 17.5, 2.0)).unwrap();
        let outer = g.perimeter_of(1).unwrap();
        let inner = g.tree().box_spec().storing_cell(&Shape::disk(2, 13.5, 17.5, 2.0)).unwrap();
        assert!(!outer.contains(&inner));
        assert_eq!(g.stats().pairs, 0);
        assert!(g.connected(1, 2).unwrap());
        g.verify().unwrap();
        // A third disk engulfed elsewhere joins through the same marks.
        g.insert(Shape::disk(3, 20.5, 12.5, 2.0)).unwrap();
        assert!(g.connected(2, 3).unwrap());
        g.delete(1).unwrap();
        assert!(!g.connected(2, 3).unwrap());
        g.verify().unwrap();
    }

    #[test]
    fn bridge_of_a_chain() {
        let mut g = engine(ShapeKind::Disk, 2, 16.0, SpaceMode::Big);
        g.insert(Shape::disk(1, 4.0, 8.0, 2.0)).unwrap();
        g.insert(Shape::disk(2, 8.0, 8.0, 2.0)).unwrap();
        g.insert(Shape::disk(3, 12.0, 8.0, 2.0)).unwrap();
        assert!(g.connected(1, 3).unwrap());
        g.delete(2).unwrap();
        assert!(!g.connected(1, 3).unwrap());
        g.verify().unwrap();
    }

    #[test]
    fn set_sizes_are_linear_in_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for psi in [8.0, 16.0, 32.0, 64.0] {
            let bx = BoxSpec::for_psi(psi, 2);
            for _ in 0..20 {
                let r = rng.gen_range(2.0..=psi / 2.0);
                let s = Shape::disk(0, rng.gen_range(0.0..bx.side()), rng.gen_range(0.0..bx.side()), r);
                assert!(maximal_all(&bx, &s).len() as f64 <= 8.0 * psi);
                assert!(perimeter_all(&bx, &s).len() as f64 <= 60.0 * psi, "{}", perimeter_all(&bx, &s).len());
            }
        }
    }

    fn random_run(seed: u64, kind: ShapeKind, dim: usize, psi: f64, ops: usize, verify: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut small = engine(kind, dim, psi, SpaceMode::Small);
        let mut big = engine(kind, dim, psi, SpaceMode::Big);
        let side = small.config().bx.side();
        let mut live: Vec<ShapeId> = Vec::new();
        for id in 0..ops as u64 {
            if !live.is_empty() && rng.gen_bool(0.3) {
                let id = live.swap_remove(rng.gen_range(0..live.len()));
                small.delete(id).unwrap();
                big.delete(id).unwrap();
            } else {
                let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..side)).collect();
                let d = rng.gen_range(4.0..=psi);
                let s = match kind {
                    ShapeKind::Disk => Shape::disk(id, c[0], c[1], d / 2.0),
                    ShapeKind::Cube => Shape::cube(id, &c, d),
                };
                small.insert(s).unwrap();
                big.insert(s).unwrap();
                live.push(id);
            }
            if verify {
                small.verify().unwrap_or_else(|m| panic!("small, op {id}: {m}"));
                big.verify().unwrap_or_else(|m| panic!("big, op {id}: {m}"));
            }
            check_all(&small);
            check_all(&big);
        }
    }

    #[test]
    fn random_disks_match_union_find() {
        for (seed, psi) in [(1, 8.0), (2, 16.0), (3, 32.0)] {
            random_run(seed, ShapeKind::Disk, 2, psi, 120, true);
        }
    }

    #[test]
    fn random_cubes_match_union_find() {
        random_run(4, ShapeKind::Cube, 2, 16.0, 100, true);
        random_run(5, ShapeKind::Cube, 3, 8.0, 80, true);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn queries_match_oracle(seed in any::<u64>(), psi in prop::sample::select(vec![8.0, 16.0, 32.0])) {
            random_run(seed, ShapeKind::Disk, 2, psi, 60, true);
        }
    }
}
