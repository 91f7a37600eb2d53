//! Maximal bichromatic matchings between two shape sets, maintained greedily.
//!
//! A [`Matching`] only holds the matched pairs. The unmatched remainder of
//! each side lives in an [`UnmatchedView`]: either an index owned by the pair
//! or a branch of a store shared by every pair on that side.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::{Shape, ShapeId};
use crate::index::IntersectionIndex;
use crate::persistence::BranchStore;

/// The unmatched shapes of one side of one pair.
pub trait UnmatchedView {
    /// Add `s`; no-op if present.
    fn add(&mut self, s: &Shape);
    /// Remove `id`; no-op if absent.
    fn remove(&mut self, id: ShapeId);
    /// Smallest-id member intersecting `q`.
    fn find(&self, q: &Shape) -> Option<ShapeId>;
    fn ids(&self) -> Vec<ShapeId>;
    /// Geometry of a member.
    fn shape(&self, id: ShapeId) -> Shape;
}

impl UnmatchedView for IntersectionIndex {
    fn add(&mut self, s: &Shape) {
        if !self.contains(s.id) {
            self.insert(s).expect("fresh id");
        }
    }

    fn remove(&mut self, id: ShapeId) {
        if self.contains(id) {
            self.delete(id).expect("present id");
        }
    }

    fn find(&self, q: &Shape) -> Option<ShapeId> {
        self.query_min(q)
    }

    fn ids(&self) -> Vec<ShapeId> {
        IntersectionIndex::ids(self)
    }

    fn shape(&self, id: ShapeId) -> Shape {
        *self.get(id).expect("member")
    }
}

/// Branch `label` of a shared store: the store's set minus this pair's matched shapes.
pub struct BranchView<'a> {
    pub store: &'a mut BranchStore,
    pub label: u64,
}

impl UnmatchedView for BranchView<'_> {
    fn add(&mut self, s: &Shape) {
        self.store.branch_insert(self.label, s.id);
    }

    fn remove(&mut self, id: ShapeId) {
        self.store.branch_delete(self.label, id);
    }

    fn find(&self, q: &Shape) -> Option<ShapeId> {
        self.store.query_min(self.label, q)
    }

    fn ids(&self) -> Vec<ShapeId> {
        self.store.members(self.label)
    }

    fn shape(&self, id: ShapeId) -> Shape {
        *self.store.shape(id).expect("member")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matching {
    left: BTreeMap<ShapeId, Shape>,
    right: BTreeMap<ShapeId, Shape>,
    edges: BTreeSet<(ShapeId, ShapeId)>,
}

impl Matching {
    pub fn new() -> Matching {
        Matching::default()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Matched pairs `(left, right)` in increasing order.
    pub fn edges(&self) -> impl Iterator<Item = &(ShapeId, ShapeId)> {
        self.edges.iter()
    }

    /// Partner of a left shape.
    pub fn left_partner(&self, id: ShapeId) -> Option<ShapeId> {
        self.left.get(&id).map(|s| s.id)
    }

    /// Partner of a right shape.
    pub fn right_partner(&self, id: ShapeId) -> Option<ShapeId> {
        self.right.get(&id).map(|s| s.id)
    }

    /// The smallest matched pair whose ends are distinct shapes. A shape on
    /// both sides may be matched with itself; that pair is no graph edge.
    pub fn witness(&self) -> Option<(ShapeId, ShapeId)> {
        self.edges.iter().find(|(l, r)| l != r).copied()
    }

    fn pair(&mut self, l: &Shape, r: &Shape) {
        self.left.insert(l.id, *r);
        self.right.insert(r.id, *l);
        self.edges.insert((l.id, r.id));
    }

    pub fn on_left_insert(&mut self, s: &Shape, left: &mut dyn UnmatchedView, right: &mut dyn UnmatchedView) {
        match right.find(s) {
            Some(r) => {
                let rs = right.shape(r);
                right.remove(r);
                left.remove(s.id);
                self.pair(s, &rs);
            }
            None => left.add(s),
        }
    }

    pub fn on_right_insert(&mut self, s: &Shape, left: &mut dyn UnmatchedView, right: &mut dyn UnmatchedView) {
        match left.find(s) {
            Some(l) => {
                let ls = left.shape(l);
                left.remove(l);
                right.remove(s.id);
                self.pair(&ls, s);
            }
            None => right.add(s),
        }
    }

    pub fn on_left_delete(&mut self, id: ShapeId, left: &mut dyn UnmatchedView, right: &mut dyn UnmatchedView) {
        left.remove(id);
        let Some(r) = self.left.remove(&id) else { return };
        self.right.remove(&r.id);
        self.edges.remove(&(id, r.id));
        if r.id == id {
            // Matched with itself; the right-side deletion follows.
            return;
        }
        match left.find(&r) {
            Some(l) => {
                let ls = left.shape(l);
                left.remove(l);
                self.pair(&ls, &r);
            }
            None => right.add(&r),
        }
    }

    pub fn on_right_delete(&mut self, id: ShapeId, left: &mut dyn UnmatchedView, right: &mut dyn UnmatchedView) {
        right.remove(id);
        let Some(l) = self.right.remove(&id) else { return };
        self.left.remove(&l.id);
        self.edges.remove(&(l.id, id));
        if l.id == id {
            return;
        }
        match right.find(&l) {
            Some(r) => {
                let rs = right.shape(r);
                right.remove(r);
                self.pair(&l, &rs);
            }
            None => left.add(&l),
        }
    }

    /// Brute-force check against the two side sets and the two views.
    pub fn verify(&self, left: &[Shape], right: &[Shape], left_view: &[ShapeId], right_view: &[ShapeId]) -> Result<(), String> {
        let lset: BTreeMap<ShapeId, &Shape> = left.iter().map(|s| (s.id, s)).collect();
        let rset: BTreeMap<ShapeId, &Shape> = right.iter().map(|s| (s.id, s)).collect();
        let mut lm = BTreeSet::new();
        let mut rm = BTreeSet::new();
        for &(l, r) in &self.edges {
            let (Some(ls), Some(rs)) = (lset.get(&l), rset.get(&r)) else {
                return Err(format!("edge ({l},{r}) leaves its sides"));
            };
            if !crate::geometry::intersects(ls, rs) {
                return Err(format!("edge ({l},{r}) does not intersect"));
            }
            if !lm.insert(l) || !rm.insert(r) {
                return Err(format!("edge ({l},{r}) reuses a shape"));
            }
        }
        let lu: Vec<ShapeId> = lset.keys().filter(|id| !lm.contains(id)).copied().collect();
        let ru: Vec<ShapeId> = rset.keys().filter(|id| !rm.contains(id)).copied().collect();
        for &l in &lu {
            for &r in &ru {
                if crate::geometry::intersects(lset[&l], rset[&r]) {
                    return Err(format!("not maximal: ({l},{r}) both unmatched and intersecting"));
                }
            }
        }
        let mut lv = left_view.to_vec();
        let mut rv = right_view.to_vec();
        lv.sort_unstable();
        rv.sort_unstable();
        if lv != lu {
            return Err(format!("left view {lv:?} != unmatched {lu:?}"));
        }
        if rv != ru {
            return Err(format!("right view {rv:?} != unmatched {ru:?}"));
        }
        Ok(())
    }
}

/// One side of a family of pairs: a plain set or a branch store whose
/// branches are the per-pair unmatched views.
pub(crate) enum Side {
    Plain(BTreeMap<ShapeId, Shape>),
    Branched(BranchStore),
}

impl Side {
    pub(crate) fn insert(&mut self, s: &Shape) {
        match self {
            Side::Plain(m) => {
                m.insert(s.id, *s);
            }
            Side::Branched(b) => b.root_insert(s).expect("fresh id in side store"),
        }
    }

    pub(crate) fn delete(&mut self, id: ShapeId) {
        match self {
            Side::Plain(m) => {
                m.remove(&id);
            }
            Side::Branched(b) => {
                b.root_delete(id).expect("id in side store");
            }
        }
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            Side::Plain(m) => m.len(),
            Side::Branched(b) => b.len(),
        }
    }

    pub(crate) fn ids(&self) -> Vec<ShapeId> {
        match self {
            Side::Plain(m) => m.keys().copied().collect(),
            Side::Branched(b) => b.members(0),
        }
    }
}

pub(crate) enum Views {
    Own(IntersectionIndex, IntersectionIndex),
    Branch(u64),
}


#[derive(Clone, Copy)]
pub(crate) enum PairOp {
    LeftInsert(Shape),
    RightInsert(Shape),
    LeftDelete(ShapeId),
    RightDelete(ShapeId),
}

pub(crate) fn apply(m: &mut Matching, op: PairOp, l: &mut dyn UnmatchedView, r: &mut dyn UnmatchedView) {
    match op {
        PairOp::LeftInsert(s) => m.on_left_insert(&s, l, r),
        PairOp::RightInsert(s) => m.on_right_insert(&s, l, r),
        PairOp::LeftDelete(id) => m.on_left_delete(id, l, r),
        PairOp::RightDelete(id) => m.on_right_delete(id, l, r),
    }
}
