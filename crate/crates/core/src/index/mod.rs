//! Dynamic intersection queries over a homogeneous shape set.
//!
//! Every structure lives in a [`NodeStore`]: fixed-width records addressed by
//! [`NodeRef`], read and written one field at a time. The plain store below
//! backs standalone indexes; the fat-node store in `persistence` backs
//! branch-persistent ones. Shape geometry is kept in a side table keyed by id.

mod grid;
mod interval;

use std::cell::Cell;
use std::collections::HashMap;

use crate::error::EngineError;
use crate::geometry::{Shape, ShapeId, ShapeKind};

pub use grid::GridTreap;
pub use interval::IntervalTree;

pub type Word = u64;
pub type NodeRef = u64;
pub const NIL: NodeRef = u64::MAX;

/// Side table with the geometry of every shape an index may reference.
pub type ShapeTable = HashMap<ShapeId, Shape>;

#[inline]
pub(crate) fn fw(x: f64) -> Word {
    x.to_bits()
}

#[inline]
pub(crate) fn wf(w: Word) -> f64 {
    f64::from_bits(w)
}

/// Addressable records with constant out-degree.
pub trait NodeStore {
    fn alloc(&mut self, fields: &[Word]) -> NodeRef;
    /// The record becomes unreachable; stores may recycle it.
    fn release(&mut self, node: NodeRef);
    fn get(&self, node: NodeRef, field: usize) -> Word;
    fn set(&mut self, node: NodeRef, field: usize, value: Word);
}

/// One field write, as reported to mutation observers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mutation {
    pub node: NodeRef,
    pub field: usize,
    pub old: Word,
    pub new: Word,
}

/// Arena store: records are contiguous runs in one vector, prefixed by their width.
#[derive(Debug, Default)]
pub struct PlainStore {
    data: Vec<Word>,
    free: HashMap<usize, Vec<NodeRef>>,
    live: usize,
    touches: Cell<u64>,
    log: Option<Vec<Mutation>>,
}

impl PlainStore {
    pub fn new() -> PlainStore {
        PlainStore::default()
    }

    /// Start recording every field write.
    pub fn record_mutations(&mut self) {
        self.log = Some(Vec::new());
    }

    pub fn take_mutations(&mut self) -> Vec<Mutation> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Field reads since construction or the last reset.
    pub fn touches(&self) -> u64 {
        self.touches.get()
    }

    pub fn reset_touches(&self) {
        self.touches.set(0);
    }

    pub fn live_nodes(&self) -> usize {
        self.live
    }

    pub fn words(&self) -> usize {
        self.data.len()
    }
}

impl NodeStore for PlainStore {
    fn alloc(&mut self, fields: &[Word]) -> NodeRef {
        self.live += 1;
        let n = match self.free.get_mut(&fields.len()).and_then(|v| v.pop()) {
            Some(n) => n,
            None => {
                self.data.push(fields.len() as Word);
                let n = self.data.len() as NodeRef;
                self.data.resize(self.data.len() + fields.len(), 0);
                n
            }
        };
        for (f, &v) in fields.iter().enumerate() {
            self.set(n, f, v);
        }
        n
    }

    fn release(&mut self, node: NodeRef) {
        self.live -= 1;
        let width = self.data[node as usize - 1] as usize;
        self.free.entry(width).or_default().push(node);
    }

    #[inline]
    fn get(&self, node: NodeRef, field: usize) -> Word {
        self.touches.set(self.touches.get() + 1);
        self.data[node as usize + field]
    }

    #[inline]
    fn set(&mut self, node: NodeRef, field: usize, value: Word) {
        let slot = &mut self.data[node as usize + field];
        if let Some(log) = self.log.as_mut() {
            log.push(Mutation { node, field, old: *slot, new: value });
        }
        *slot = value;
    }
}

/// Which stored shape a query reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryMode {
    /// Whichever intersecting shape is found first.
    Any,
    /// The intersecting shape with the smallest id; independent of structure shape.
    Min,
}

/// The query algorithm, independent of where its nodes live.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algo {
    Grid(GridTreap),
    Interval(IntervalTree),
}

impl Algo {
    /// Grid baseline for disks, interval tree for cubes.
    pub fn for_kind(kind: ShapeKind, dim: usize, psi: f64) -> Algo {
        match kind {
            ShapeKind::Disk => Algo::Grid(GridTreap::new(dim, psi)),
            ShapeKind::Cube => Algo::Interval(IntervalTree::new(dim)),
        }
    }

    /// Allocate an empty structure; returns its header node.
    pub fn init<S: NodeStore + ?Sized>(&self, st: &mut S) -> NodeRef {
        match self {
            Algo::Grid(g) => g.init(st),
            Algo::Interval(t) => t.init(st),
        }
    }

    pub fn insert<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, header: NodeRef, s: &Shape) {
        match self {
            Algo::Grid(g) => g.insert(st, header, s),
            Algo::Interval(t) => t.insert(st, table, header, s),
        }
    }

    /// `s` must be stored (and present in `table`).
    pub fn delete<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, header: NodeRef, s: &Shape) {
        match self {
            Algo::Grid(g) => g.delete(st, header, s),
            Algo::Interval(t) => t.delete(st, table, header, s),
        }
    }

    pub fn query<S: NodeStore + ?Sized>(
        &self,
        st: &S,
        table: &ShapeTable,
        header: NodeRef,
        q: &Shape,
        mode: QueryMode,
    ) -> Option<ShapeId> {
        match self {
            Algo::Grid(g) => g.query(st, table, header, q, mode),
            Algo::Interval(t) => t.query(st, table, header, q, mode),
        }
    }

    /// Stored ids in structure order (diagnostics and rebuilds).
    pub fn members<S: NodeStore + ?Sized>(&self, st: &S, header: NodeRef) -> Vec<ShapeId> {
        match self {
            Algo::Grid(g) => g.members(st, header),
            Algo::Interval(t) => t.members(st, header),
        }
    }
}

/// A standalone index over a plain store.
#[derive(Debug)]
pub struct IntersectionIndex {
    algo: Algo,
    store: PlainStore,
    header: NodeRef,
    table: ShapeTable,
}

impl IntersectionIndex {
    pub fn new(algo: Algo) -> IntersectionIndex {
        let mut store = PlainStore::new();
        let header = algo.init(&mut store);
        IntersectionIndex { algo, store, header, table: ShapeTable::new() }
    }

    pub fn for_kind(kind: ShapeKind, dim: usize, psi: f64) -> IntersectionIndex {
        IntersectionIndex::new(Algo::for_kind(kind, dim, psi))
    }

    pub fn algo(&self) -> &Algo {
        &self.algo
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, id: ShapeId) -> bool {
        self.table.contains_key(&id)
    }

    pub fn get(&self, id: ShapeId) -> Option<&Shape> {
        self.table.get(&id)
    }

    pub fn insert(&mut self, s: &Shape) -> Result<(), EngineError> {
        if self.table.contains_key(&s.id) {
            return Err(EngineError::DuplicateId(s.id));
        }
        self.table.insert(s.id, *s);
        self.algo.insert(&mut self.store, &self.table, self.header, s);
        Ok(())
    }

    pub fn delete(&mut self, id: ShapeId) -> Result<Shape, EngineError> {
        let s = *self.table.get(&id).ok_or(EngineError::UnknownId(id))?;
        self.algo.delete(&mut self.store, &self.table, self.header, &s);
        self.table.remove(&id);
        Ok(s)
    }

    /// Some stored shape intersecting `q`.
    pub fn query(&self, q: &Shape) -> Option<ShapeId> {
        self.algo.query(&self.store, &self.table, self.header, q, QueryMode::Any)
    }

    /// The smallest-id stored shape intersecting `q`.
    pub fn query_min(&self, q: &Shape) -> Option<ShapeId> {
        self.algo.query(&self.store, &self.table, self.header, q, QueryMode::Min)
    }

    pub fn ids(&self) -> Vec<ShapeId> {
        let mut v = self.algo.members(&self.store, self.header);
        v.sort_unstable();
        v
    }

    pub fn store(&self) -> &PlainStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut PlainStore {
        &mut self.store
    }
}

/// Linear-scan reference answers.
pub fn scan_min<'a>(shapes: impl IntoIterator<Item = &'a Shape>, q: &Shape) -> Option<ShapeId> {
    shapes.into_iter().filter(|s| crate::geometry::intersects(s, q)).map(|s| s.id).min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::intersects;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plain_store_recycles_by_width() {
        let mut st = PlainStore::new();
        let a = st.alloc(&[1, 2, 3]);
        let b = st.alloc(&[4, 5]);
        st.release(a);
        let c = st.alloc(&[7, 8, 9]);
        assert_eq!(a, c);
        assert_eq!(st.get(c, 2), 9);
        assert_eq!(st.get(b, 1), 5);
        assert_eq!(st.live_nodes(), 2);
    }

    #[test]
    fn mutation_log_replays_to_current_words() {
        let mut ix = IntersectionIndex::for_kind(ShapeKind::Cube, 2, 16.0);
        ix.store_mut().record_mutations();
        let before = ix.store().data.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for id in 0..200 {
            let c = [rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0)];
            ix.insert(&Shape::cube(id, &c, rng.gen_range(4.0..16.0))).unwrap();
        }
        for id in 0..100 {
            ix.delete(id * 2).unwrap();
        }
        let log = ix.store_mut().take_mutations();
        let mut replay = before;
        replay.resize(ix.store().data.len(), 0);
        for m in &log {
            let at = m.node as usize + m.field;
            assert_eq!(replay[at], m.old);
            replay[at] = m.new;
            // Width prefixes are bookkeeping, not node fields.
            replay[m.node as usize - 1] = ix.store().data[m.node as usize - 1];
        }
        assert_eq!(replay, ix.store().data);
    }

    #[test]
    fn examples() {
        let mut cubes = IntersectionIndex::for_kind(ShapeKind::Cube, 2, 16.0);
        assert_eq!(cubes.query(&Shape::cube(9, &[0.0, 0.0], 4.0)), None);
        cubes.insert(&Shape::cube_at_corner(1, &[0.0, 0.0], 4.0)).unwrap();
        assert_eq!(cubes.query(&Shape::cube_at_corner(9, &[4.0, 4.0], 4.0)), Some(1));
        assert_eq!(cubes.query(&Shape::cube_at_corner(9, &[4.01, 4.0], 4.0)), None);

        let mut disks = IntersectionIndex::for_kind(ShapeKind::Disk, 2, 16.0);
        disks.insert(&Shape::disk(1, 0.0, 0.0, 2.0)).unwrap();
        disks.insert(&Shape::disk(2, 10.0, 0.0, 2.0)).unwrap();
        assert_eq!(disks.query(&Shape::disk(9, 3.0, 0.0, 2.0)), Some(1));
        disks.delete(1).unwrap();
        assert_eq!(disks.query(&Shape::disk(9, 3.0, 0.0, 2.0)), None);
        assert!(matches!(disks.insert(&Shape::disk(2, 0.0, 0.0, 2.0)), Err(EngineError::DuplicateId(2))));
        assert!(matches!(disks.delete(7), Err(EngineError::UnknownId(7))));
    }

    fn random_shape(rng: &mut ChaCha8Rng, id: u64, kind: ShapeKind, dim: usize, span: f64) -> Shape {
        let mut c = [0.0; 4];
        for x in c.iter_mut().take(dim) {
            *x = rng.gen_range(0.0..span);
        }
        match kind {
            ShapeKind::Disk => Shape::disk(id, c[0], c[1], rng.gen_range(2.0..8.0)),
            ShapeKind::Cube => Shape::cube(id, &c[..dim], rng.gen_range(4.0..16.0)),
        }
    }

    fn check_against_scan(kind: ShapeKind, dim: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ix = IntersectionIndex::for_kind(kind, dim, 16.0);
        let mut live: Vec<Shape> = Vec::new();
        let mut next = 0;
        for step in 0..1000 {
            if !live.is_empty() && rng.gen_bool(0.35) {
                let k = rng.gen_range(0..live.len());
                let s = live.swap_remove(k);
                ix.delete(s.id).unwrap();
            } else {
                let s = random_shape(&mut rng, next, kind, dim, 120.0);
                next += 1;
                ix.insert(&s).unwrap();
                live.push(s);
            }
            let q = random_shape(&mut rng, u64::MAX, kind, dim, 120.0);
            let expect = scan_min(&live, &q);
            assert_eq!(ix.query_min(&q), expect, "step {step}");
            match ix.query(&q) {
                Some(w) => assert!(intersects(ix.get(w).unwrap(), &q)),
                None => assert_eq!(expect, None),
            }
        }
        let mut ids: Vec<u64> = live.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        assert_eq!(ix.ids(), ids);
    }

    #[test]
    fn disks_match_scan() {
        check_against_scan(ShapeKind::Disk, 2, 11);
    }

    #[test]
    fn cubes_match_scan_in_each_dimension() {
        for dim in 2..=4 {
            check_against_scan(ShapeKind::Cube, dim, 20 + dim as u64);
        }
    }

    #[test]
    fn one_dimensional_cubes() {
        check_against_scan(ShapeKind::Cube, 1, 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn random_cube_sequences(seed in any::<u64>(), dim in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ix = IntersectionIndex::for_kind(ShapeKind::Cube, dim, 16.0);
            let mut live: Vec<Shape> = Vec::new();
            for id in 0..150u64 {
                if !live.is_empty() && rng.gen_bool(0.4) {
                    let s = live.swap_remove(rng.gen_range(0..live.len()));
                    ix.delete(s.id).unwrap();
                } else {
                    let s = random_shape(&mut rng, id, ShapeKind::Cube, dim, 60.0);
                    ix.insert(&s).unwrap();
                    live.push(s);
                }
                let q = random_shape(&mut rng, u64::MAX, ShapeKind::Cube, dim, 60.0);
                prop_assert_eq!(ix.query_min(&q), scan_min(&live, &q));
                prop_assert_eq!(ix.query(&q).is_some(), scan_min(&live, &q).is_some());
            }
        }
    }
}
