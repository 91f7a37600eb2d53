//! Multi-level interval tree for axis-aligned cubes.
//!
//! Level `k` is an interval tree over the axis-`k` extents. A node with key `x`
//! holds the intervals containing `x` twice, in a BST sorted by left endpoint
//! and one sorted by right endpoint. Every BST subtree and every tree subtree
//! that is larger than [`LEAF_CAP`] carries a level-`k+1` structure over its
//! items, so a query decomposes into O(log n) canonical sets per level. Small
//! canonical sets are scanned instead. The last axis needs no next level: each
//! node keeps the minimum live id of its subtree, which answers canonical sets
//! directly.
//!
//! Balance: subtrees are rebuilt when a child would exceed two thirds of its
//! parent's insertion weight, and a structure is rebuilt once fewer than half
//! of the items inserted since its last build are still live. Deleted BST
//! entries are tombstones until then.

use std::cmp::Ordering;

use super::{fw, wf, NodeRef, NodeStore, QueryMode, ShapeTable, NIL};
use crate::geometry::{Shape, ShapeId};

/// Canonical sets up to this size are scanned rather than given a next level.
pub const LEAF_CAP: u64 = 12;

// Tree node.
const T_KEY: usize = 0;
const T_LEFT: usize = 1;
const T_RIGHT: usize = 2;
const T_WTOT: usize = 3;
const T_LIVE: usize = 4;
const T_LOB: usize = 5;
const T_HIB: usize = 6;
const T_ASSOC: usize = 7;
const T_MIN: usize = 8;

// BST node.
const B_ID: usize = 0;
const B_LEFT: usize = 1;
const B_RIGHT: usize = 2;
const B_SIZE: usize = 3;
const B_LIVE: usize = 4;
const B_DEAD: usize = 5;
const B_ASSOC: usize = 6;
const B_MIN: usize = 7;
const B_KEY: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Lo,
    Hi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dest {
    Left,
    Right,
    Here,
}

struct Acc {
    mode: QueryMode,
    best: Option<ShapeId>,
}

impl Acc {
    /// Record a hit; true when the query can stop.
    fn offer(&mut self, id: ShapeId) -> bool {
        match self.mode {
            QueryMode::Any => {
                self.best = Some(id);
                true
            }
            QueryMode::Min => {
                if self.best.is_none_or(|b| id < b) {
                    self.best = Some(id);
                }
                false
            }
        }
    }

    /// Can a set whose smallest id is `min` still improve the answer?
    fn worth(&self, min: ShapeId) -> bool {
        match self.mode {
            QueryMode::Any => true,
            QueryMode::Min => self.best.is_none_or(|b| min < b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalTree {
    dim: usize,
}

impl IntervalTree {
    pub fn new(dim: usize) -> IntervalTree {
        assert!((1..=crate::geometry::MAX_DIM).contains(&dim), "interval tree: bad dimension {dim}");
        IntervalTree { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn init<S: NodeStore + ?Sized>(&self, st: &mut S) -> NodeRef {
        st.alloc(&[NIL])
    }

    pub fn insert<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, header: NodeRef, s: &Shape) {
        self.struct_insert(st, table, header, s, 0);
    }

    pub fn delete<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, header: NodeRef, s: &Shape) {
        self.struct_delete(st, table, header, s, 0);
    }

    pub fn query<S: NodeStore + ?Sized>(
        &self,
        st: &S,
        table: &ShapeTable,
        header: NodeRef,
        q: &Shape,
        mode: QueryMode,
    ) -> Option<ShapeId> {
        let mut acc = Acc { mode, best: None };
        self.struct_query(st, table, header, q, 0, &mut acc);
        acc.best
    }

    pub fn members<S: NodeStore + ?Sized>(&self, st: &S, header: NodeRef) -> Vec<ShapeId> {
        let mut out = Vec::new();
        self.collect_tree(st, st.get(header, 0), &mut out);
        out
    }

    // ---- structure level -------------------------------------------------

    fn struct_insert<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, h: NodeRef, x: &Shape, k: usize) {
        let root = st.get(h, 0);
        let nr = self.tree_insert(st, table, root, x, k);
        if nr != root {
            st.set(h, 0, nr);
        }
    }

    fn struct_delete<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, h: NodeRef, x: &Shape, k: usize) {
        let root = st.get(h, 0);
        assert!(root != NIL, "interval tree: id {} not stored", x.id);
        self.tree_delete(st, table, root, x, k);
        let live = st.get(root, T_LIVE);
        if live * 2 < st.get(root, T_WTOT) {
            let mut items = Vec::with_capacity(live as usize);
            self.collect_tree(st, root, &mut items);
            self.release_tree(st, root);
            let nr = self.build_tree(st, table, items, k);
            st.set(h, 0, nr);
        }
    }

    fn struct_query<S: NodeStore + ?Sized>(
        &self,
        st: &S,
        table: &ShapeTable,
        h: NodeRef,
        q: &Shape,
        k: usize,
        acc: &mut Acc,
    ) -> bool {
        self.tree_query(st, table, st.get(h, 0), q, k, acc)
    }

    fn build_struct<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, items: Vec<ShapeId>, k: usize) -> NodeRef {
        let root = self.build_tree(st, table, items, k);
        st.alloc(&[root])
    }

    fn release_struct<S: NodeStore + ?Sized>(&self, st: &mut S, h: NodeRef) {
        let root = st.get(h, 0);
        self.release_tree(st, root);
        st.release(h);
    }

    // ---- interval tree ---------------------------------------------------

    fn lo(&self, table: &ShapeTable, id: ShapeId, k: usize) -> f64 {
        table[&id].bbox_lo(k)
    }

    fn hi(&self, table: &ShapeTable, id: ShapeId, k: usize) -> f64 {
        table[&id].bbox_hi(k)
    }

    fn dest(&self, x: &Shape, k: usize, key: f64) -> Dest {
        if x.bbox_hi(k) < key {
            Dest::Left
        } else if x.bbox_lo(k) > key {
            Dest::Right
        } else {
            Dest::Here
        }
    }

    fn has_next(&self, k: usize) -> bool {
        k + 1 < self.dim
    }

    fn tree_insert<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, v: NodeRef, x: &Shape, k: usize) -> NodeRef {
        if v == NIL {
            return self.build_tree(st, table, vec![x.id], k);
        }
        let wtot = st.get(v, T_WTOT) + 1;
        let d = self.dest(x, k, wf(st.get(v, T_KEY)));
        let child_field = match d {
            Dest::Left => Some(T_LEFT),
            Dest::Right => Some(T_RIGHT),
            Dest::Here => None,
        };
        if let Some(f) = child_field {
            let c = st.get(v, f);
            let cw = if c == NIL { 1 } else { st.get(c, T_WTOT) + 1 };
            if wtot > 3 && cw * 3 > wtot * 2 + 3 {
                let mut items = Vec::with_capacity(wtot as usize);
                self.collect_tree(st, v, &mut items);
                items.push(x.id);
                self.release_tree(st, v);
                return self.build_tree(st, table, items, k);
            }
        }
        st.set(v, T_WTOT, wtot);
        st.set(v, T_LIVE, st.get(v, T_LIVE) + 1);
        match child_field {
            Some(f) => {
                let c = st.get(v, f);
                let nc = self.tree_insert(st, table, c, x, k);
                if nc != c {
                    st.set(v, f, nc);
                }
            }
            None => {
                for (f, side) in [(T_LOB, Side::Lo), (T_HIB, Side::Hi)] {
                    let b = st.get(v, f);
                    let nb = self.bst_insert(st, table, b, x, k, side);
                    if nb != b {
                        st.set(v, f, nb);
                    }
                }
            }
        }
        if self.has_next(k) {
            let a = st.get(v, T_ASSOC);
            if a != NIL {
                self.struct_insert(st, table, a, x, k + 1);
            } else if wtot > LEAF_CAP {
                let mut items = Vec::new();
                self.collect_tree(st, v, &mut items);
                let a = self.build_struct(st, table, items, k + 1);
                st.set(v, T_ASSOC, a);
            }
        }
        if x.id < st.get(v, T_MIN) {
            st.set(v, T_MIN, x.id);
        }
        v
    }

    fn tree_delete<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, v: NodeRef, x: &Shape, k: usize) {
        assert!(v != NIL, "interval tree: id {} not stored", x.id);
        st.set(v, T_LIVE, st.get(v, T_LIVE) - 1);
        match self.dest(x, k, wf(st.get(v, T_KEY))) {
            Dest::Left => self.tree_delete(st, table, st.get(v, T_LEFT), x, k),
            Dest::Right => self.tree_delete(st, table, st.get(v, T_RIGHT), x, k),
            Dest::Here => {
                for (f, side) in [(T_LOB, Side::Lo), (T_HIB, Side::Hi)] {
                    let b = st.get(v, f);
                    self.bst_delete(st, table, b, x, k, side);
                    if st.get(b, B_LIVE) * 2 < st.get(b, B_SIZE) {
                        let mut items = Vec::new();
                        self.collect_bst(st, b, &mut items);
                        self.release_bst(st, b);
                        let nb = self.build_bst_from(st, table, items, k, side);
                        st.set(v, f, nb);
                    }
                }
            }
        }
        if self.has_next(k) {
            let a = st.get(v, T_ASSOC);
            if a != NIL {
                self.struct_delete(st, table, a, x, k + 1);
            }
        }
        if st.get(v, T_MIN) == x.id {
            let m = self.tree_min_of_parts(st, v);
            st.set(v, T_MIN, m);
        }
    }

    fn tree_min_of_parts<S: NodeStore + ?Sized>(&self, st: &S, v: NodeRef) -> ShapeId {
        let mut m = u64::MAX;
        for (f, g) in [(T_LEFT, T_MIN), (T_RIGHT, T_MIN), (T_LOB, B_MIN)] {
            let c = st.get(v, f);
            if c != NIL {
                m = m.min(st.get(c, g));
            }
        }
        m
    }

    fn build_tree<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, mut items: Vec<ShapeId>, k: usize) -> NodeRef {
        if items.is_empty() {
            return NIL;
        }
        items.sort_by(|a, b| {
            table[a].center[k].partial_cmp(&table[b].center[k]).unwrap_or(Ordering::Equal).then(a.cmp(b))
        });
        let key = table[&items[items.len() / 2]].center[k];
        let n = items.len() as u64;
        let min = *items.iter().min().expect("nonempty");
        let mut here = Vec::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &id in &items {
            match self.dest(&table[&id], k, key) {
                Dest::Left => left.push(id),
                Dest::Right => right.push(id),
                Dest::Here => here.push(id),
            }
        }
        let assoc = if self.has_next(k) && n > LEAF_CAP {
            self.build_struct(st, table, items, k + 1)
        } else {
            NIL
        };
        let lob = self.build_bst_from(st, table, here.clone(), k, Side::Lo);
        let hib = self.build_bst_from(st, table, here, k, Side::Hi);
        let l = self.build_tree(st, table, left, k);
        let r = self.build_tree(st, table, right, k);
        st.alloc(&[fw(key), l, r, n, n, lob, hib, assoc, min])
    }

    fn collect_tree<S: NodeStore + ?Sized>(&self, st: &S, v: NodeRef, out: &mut Vec<ShapeId>) {
        let mut stack = vec![v];
        while let Some(v) = stack.pop() {
            if v == NIL || st.get(v, T_LIVE) == 0 {
                continue;
            }
            self.collect_bst(st, st.get(v, T_LOB), out);
            stack.push(st.get(v, T_LEFT));
            stack.push(st.get(v, T_RIGHT));
        }
    }

    fn release_tree<S: NodeStore + ?Sized>(&self, st: &mut S, v: NodeRef) {
        let mut stack = vec![v];
        while let Some(v) = stack.pop() {
            if v == NIL {
                continue;
            }
            let lob = st.get(v, T_LOB);
            let hib = st.get(v, T_HIB);
            self.release_bst(st, lob);
            self.release_bst(st, hib);
            let a = st.get(v, T_ASSOC);
            if a != NIL {
                self.release_struct(st, a);
            }
            stack.push(st.get(v, T_LEFT));
            stack.push(st.get(v, T_RIGHT));
            st.release(v);
        }
    }

    fn tree_query<S: NodeStore + ?Sized>(
        &self,
        st: &S,
        table: &ShapeTable,
        mut v: NodeRef,
        q: &Shape,
        k: usize,
        acc: &mut Acc,
    ) -> bool {
        let qa = q.bbox_lo(k);
        let qb = q.bbox_hi(k);
        while v != NIL {
            if st.get(v, T_LIVE) == 0 || !acc.worth(st.get(v, T_MIN)) {
                return false;
            }
            let key = wf(st.get(v, T_KEY));
            if qb < key {
                if self.bst_prefix(st, table, st.get(v, T_LOB), q, k, qb, acc) {
                    return true;
                }
                v = st.get(v, T_LEFT);
            } else if qa > key {
                if self.bst_suffix(st, table, st.get(v, T_HIB), q, k, qa, acc) {
                    return true;
                }
                v = st.get(v, T_RIGHT);
            } else {
                if self.bst_all(st, table, st.get(v, T_LOB), q, k, acc) {
                    return true;
                }
                // Left side: intervals end before `key`; they meet q iff they end at or after qa.
                let mut w = st.get(v, T_LEFT);
                while w != NIL {
                    if wf(st.get(w, T_KEY)) >= qa {
                        if self.bst_all(st, table, st.get(w, T_LOB), q, k, acc)
                            || self.tree_all(st, table, st.get(w, T_RIGHT), q, k, acc)
                        {
                            return true;
                        }
                        w = st.get(w, T_LEFT);
                    } else {
                        if self.bst_suffix(st, table, st.get(w, T_HIB), q, k, qa, acc) {
                            return true;
                        }
                        w = st.get(w, T_RIGHT);
                    }
                }
                let mut w = st.get(v, T_RIGHT);
                while w != NIL {
                    if wf(st.get(w, T_KEY)) <= qb {
                        if self.bst_all(st, table, st.get(w, T_LOB), q, k, acc)
                            || self.tree_all(st, table, st.get(w, T_LEFT), q, k, acc)
                        {
                            return true;
                        }
                        w = st.get(w, T_RIGHT);
                    } else {
                        if self.bst_prefix(st, table, st.get(w, T_LOB), q, k, qb, acc) {
                            return true;
                        }
                        w = st.get(w, T_LEFT);
                    }
                }
                return false;
            }
        }
        false
    }

    /// Every item of the tree subtree `v` already satisfies axis `k`.
    fn tree_all<S: NodeStore + ?Sized>(&self, st: &S, table: &ShapeTable, v: NodeRef, q: &Shape, k: usize, acc: &mut Acc) -> bool {
        if v == NIL || st.get(v, T_LIVE) == 0 {
            return false;
        }
        let min = st.get(v, T_MIN);
        if !acc.worth(min) {
            return false;
        }
        if !self.has_next(k) {
            return acc.offer(min);
        }
        let a = st.get(v, T_ASSOC);
        if a != NIL {
            return self.struct_query(st, table, a, q, k + 1, acc);
        }
        if self.bst_all(st, table, st.get(v, T_LOB), q, k, acc) {
            return true;
        }
        self.tree_all(st, table, st.get(v, T_LEFT), q, k, acc) || self.tree_all(st, table, st.get(v, T_RIGHT), q, k, acc)
    }

    // ---- endpoint BSTs ---------------------------------------------------

    fn end(&self, table: &ShapeTable, id: ShapeId, k: usize, side: Side) -> f64 {
        match side {
            Side::Lo => self.lo(table, id, k),
            Side::Hi => self.hi(table, id, k),
        }
    }

    /// Order of `x` against BST node `n`; nodes carry their own key so
    /// tombstones stay comparable after their shape leaves the table.
    fn bst_cmp<S: NodeStore + ?Sized>(&self, st: &S, x: &Shape, n: NodeRef, k: usize, side: Side) -> Ordering {
        let xe = match side {
            Side::Lo => x.bbox_lo(k),
            Side::Hi => x.bbox_hi(k),
        };
        xe.partial_cmp(&wf(st.get(n, B_KEY))).unwrap_or(Ordering::Equal).then(x.id.cmp(&st.get(n, B_ID)))
    }

    fn bst_insert<S: NodeStore + ?Sized>(
        &self,
        st: &mut S,
        table: &ShapeTable,
        n: NodeRef,
        x: &Shape,
        k: usize,
        side: Side,
    ) -> NodeRef {
        if n == NIL {
            return self.build_bst_from(st, table, vec![x.id], k, side);
        }
        let size = st.get(n, B_SIZE) + 1;
        // Equal keys belong to a tombstone of the same id; the new entry goes right.
        let f = if self.bst_cmp(st, x, n, k, side) == Ordering::Less { B_LEFT } else { B_RIGHT };
        let c = st.get(n, f);
        let cs = if c == NIL { 1 } else { st.get(c, B_SIZE) + 1 };
        if size > 3 && cs * 3 > size * 2 + 3 {
            let mut items = Vec::with_capacity(size as usize);
            self.collect_bst(st, n, &mut items);
            items.push(x.id);
            self.release_bst(st, n);
            return self.build_bst_from(st, table, items, k, side);
        }
        st.set(n, B_SIZE, size);
        st.set(n, B_LIVE, st.get(n, B_LIVE) + 1);
        let nc = self.bst_insert(st, table, c, x, k, side);
        if nc != c {
            st.set(n, f, nc);
        }
        if self.has_next(k) {
            let a = st.get(n, B_ASSOC);
            if a != NIL {
                self.struct_insert(st, table, a, x, k + 1);
            } else if size > LEAF_CAP {
                let mut items = Vec::new();
                self.collect_bst(st, n, &mut items);
                let a = self.build_struct(st, table, items, k + 1);
                st.set(n, B_ASSOC, a);
            }
        }
        if x.id < st.get(n, B_MIN) {
            st.set(n, B_MIN, x.id);
        }
        n
    }

    fn bst_delete<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, n: NodeRef, x: &Shape, k: usize, side: Side) {
        assert!(n != NIL, "interval tree: id {} missing from endpoint list", x.id);
        let id = st.get(n, B_ID);
        let ord = self.bst_cmp(st, x, n, k, side);
        let target = ord == Ordering::Equal && st.get(n, B_DEAD) == 0;
        st.set(n, B_LIVE, st.get(n, B_LIVE) - 1);
        if target {
            st.set(n, B_DEAD, 1);
        } else if ord == Ordering::Less {
            self.bst_delete(st, table, st.get(n, B_LEFT), x, k, side);
        } else {
            self.bst_delete(st, table, st.get(n, B_RIGHT), x, k, side);
        }
        if self.has_next(k) {
            let a = st.get(n, B_ASSOC);
            if a != NIL {
                self.struct_delete(st, table, a, x, k + 1);
            }
        }
        if st.get(n, B_MIN) == x.id {
            let mut m = if st.get(n, B_DEAD) == 0 { id } else { u64::MAX };
            for f in [B_LEFT, B_RIGHT] {
                let c = st.get(n, f);
                if c != NIL {
                    m = m.min(st.get(c, B_MIN));
                }
            }
            st.set(n, B_MIN, m);
        }
    }

    fn build_bst_from<S: NodeStore + ?Sized>(
        &self,
        st: &mut S,
        table: &ShapeTable,
        mut items: Vec<ShapeId>,
        k: usize,
        side: Side,
    ) -> NodeRef {
        items.sort_by(|a, b| {
            self.end(table, *a, k, side)
                .partial_cmp(&self.end(table, *b, k, side))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(b))
        });
        self.build_bst(st, table, &items, k, side)
    }

    fn build_bst<S: NodeStore + ?Sized>(&self, st: &mut S, table: &ShapeTable, sorted: &[ShapeId], k: usize, side: Side) -> NodeRef {
        if sorted.is_empty() {
            return NIL;
        }
        let mid = sorted.len() / 2;
        let l = self.build_bst(st, table, &sorted[..mid], k, side);
        let r = self.build_bst(st, table, &sorted[mid + 1..], k, side);
        let n = sorted.len() as u64;
        let assoc = if self.has_next(k) && n > LEAF_CAP {
            self.build_struct(st, table, sorted.to_vec(), k + 1)
        } else {
            NIL
        };
        let min = *sorted.iter().min().expect("nonempty");
        let key = self.end(table, sorted[mid], k, side);
        st.alloc(&[sorted[mid], l, r, n, n, 0, assoc, min, fw(key)])
    }

    fn collect_bst<S: NodeStore + ?Sized>(&self, st: &S, n: NodeRef, out: &mut Vec<ShapeId>) {
        let mut stack = vec![n];
        while let Some(n) = stack.pop() {
            if n == NIL || st.get(n, B_LIVE) == 0 {
                continue;
            }
            if st.get(n, B_DEAD) == 0 {
                out.push(st.get(n, B_ID));
            }
            stack.push(st.get(n, B_LEFT));
            stack.push(st.get(n, B_RIGHT));
        }
    }

    fn release_bst<S: NodeStore + ?Sized>(&self, st: &mut S, n: NodeRef) {
        let mut stack = vec![n];
        while let Some(n) = stack.pop() {
            if n == NIL {
                continue;
            }
            let a = st.get(n, B_ASSOC);
            if a != NIL {
                self.release_struct(st, a);
            }
            stack.push(st.get(n, B_LEFT));
            stack.push(st.get(n, B_RIGHT));
            st.release(n);
        }
    }

    /// One item that satisfies axes `..=k`; check the rest directly.
    fn item<S: NodeStore + ?Sized>(&self, st: &S, table: &ShapeTable, n: NodeRef, q: &Shape, k: usize, acc: &mut Acc) -> bool {
        if st.get(n, B_DEAD) != 0 {
            return false;
        }
        let id = st.get(n, B_ID);
        if !acc.worth(id) {
            return false;
        }
        let s = &table[&id];
        if (k + 1..self.dim).all(|a| s.bbox_lo(a) <= q.bbox_hi(a) && q.bbox_lo(a) <= s.bbox_hi(a)) {
            return acc.offer(id);
        }
        false
    }

    /// Every item of the BST subtree `n` already satisfies axis `k`.
    fn bst_all<S: NodeStore + ?Sized>(&self, st: &S, table: &ShapeTable, n: NodeRef, q: &Shape, k: usize, acc: &mut Acc) -> bool {
        if n == NIL || st.get(n, B_LIVE) == 0 {
            return false;
        }
        let min = st.get(n, B_MIN);
        if !acc.worth(min) {
            return false;
        }
        if !self.has_next(k) {
            return acc.offer(min);
        }
        let a = st.get(n, B_ASSOC);
        if a != NIL {
            return self.struct_query(st, table, a, q, k + 1, acc);
        }
        self.item(st, table, n, q, k, acc)
            || self.bst_all(st, table, st.get(n, B_LEFT), q, k, acc)
            || self.bst_all(st, table, st.get(n, B_RIGHT), q, k, acc)
    }

    /// Items of a left-endpoint BST with left endpoint at most `qb`.
    #[allow(clippy::too_many_arguments)]
    fn bst_prefix<S: NodeStore + ?Sized>(
        &self,
        st: &S,
        table: &ShapeTable,
        mut n: NodeRef,
        q: &Shape,
        k: usize,
        qb: f64,
        acc: &mut Acc,
    ) -> bool {
        while n != NIL {
            if st.get(n, B_LIVE) == 0 || !acc.worth(st.get(n, B_MIN)) {
                return false;
            }
            if wf(st.get(n, B_KEY)) <= qb {
                if self.bst_all(st, table, st.get(n, B_LEFT), q, k, acc) || self.item(st, table, n, q, k, acc) {
                    return true;
                }
                n = st.get(n, B_RIGHT);
            } else {
                n = st.get(n, B_LEFT);
            }
        }
        false
    }

    /// Items of a right-endpoint BST with right endpoint at least `qa`.
    #[allow(clippy::too_many_arguments)]
    fn bst_suffix<S: NodeStore + ?Sized>(
        &self,
        st: &S,
        table: &ShapeTable,
        mut n: NodeRef,
        q: &Shape,
        k: usize,
        qa: f64,
        acc: &mut Acc,
    ) -> bool {
        while n != NIL {
            if st.get(n, B_LIVE) == 0 || !acc.worth(st.get(n, B_MIN)) {
                return false;
            }
            if wf(st.get(n, B_KEY)) >= qa {
                if self.bst_all(st, table, st.get(n, B_RIGHT), q, k, acc) || self.item(st, table, n, q, k, acc) {
                    return true;
                }
                n = st.get(n, B_LEFT);
            } else {
                n = st.get(n, B_RIGHT);
            }
        }
        false
    }
}
