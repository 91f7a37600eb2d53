//! Fully dynamic connectivity on a multigraph: leveled spanning forests,
//! each stored as Euler tours in treaps, with replacement search on tree-edge
//! deletion. Updates cost O(log² n) amortized, queries O(log n).

use std::collections::{BTreeSet, HashMap};

const NIL: u32 = u32::MAX;
const TREE: u8 = 1;
const NONTREE: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(u32);

#[derive(Clone, Copy)]
struct Node {
    left: u32,
    right: u32,
    parent: u32,
    prio: u64,
    /// Vertex index for vertex occurrences, `NIL` for arcs.
    vertex: u32,
    /// Elements in the subtree.
    count: u32,
    /// Vertex occurrences in the subtree.
    size: u32,
    flags: u8,
    agg: u8,
}

/// Euler-tour sequences over one node arena.
#[derive(Default)]
struct Tours {
    nodes: Vec<Node>,
    free: Vec<u32>,
    seed: u64,
}

impl Tours {
    fn alloc(&mut self, vertex: u32) -> u32 {
        self.seed = crate::mix64(self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let n = Node {
            left: NIL,
            right: NIL,
            parent: NIL,
            prio: self.seed,
            vertex,
            count: 1,
            size: (vertex != NIL) as u32,
            flags: 0,
            agg: 0,
        };
        match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = n;
                i
            }
            None => {
                self.nodes.push(n);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn release(&mut self, x: u32) {
        self.free.push(x);
    }

    fn n(&self, x: u32) -> &Node {
        &self.nodes[x as usize]
    }

    fn count(&self, x: u32) -> u32 {
        if x == NIL {
            0
        } else {
            self.n(x).count
        }
    }

    fn pull(&mut self, x: u32) {
        let Node { left, right, vertex, flags, .. } = *self.n(x);
        let (mut count, mut size, mut agg) = (1, (vertex != NIL) as u32, flags);
        for c in [left, right] {
            if c != NIL {
                let n = self.n(c);
                count += n.count;
                size += n.size;
                agg |= n.agg;
            }
        }
        let n = &mut self.nodes[x as usize];
        n.count = count;
        n.size = size;
        n.agg = agg;
    }

    fn set_parent(&mut self, c: u32, p: u32) {
        if c != NIL {
            self.nodes[c as usize].parent = p;
        }
    }

    fn root(&self, mut x: u32) -> u32 {
        while self.n(x).parent != NIL {
            x = self.n(x).parent;
        }
        x
    }

    fn index(&self, mut x: u32) -> u32 {
        let mut i = self.count(self.n(x).left);
        while self.n(x).parent != NIL {
            let p = self.n(x).parent;
            if self.n(p).right == x {
                i += self.count(self.n(p).left) + 1;
            }
            x = p;
        }
        i
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.n(a).prio > self.n(b).prio {
            let r = self.merge(self.n(a).right, b);
            self.nodes[a as usize].right = r;
            self.set_parent(r, a);
            self.pull(a);
            self.nodes[a as usize].parent = NIL;
            a
        } else {
            let l = self.merge(a, self.n(b).left);
            self.nodes[b as usize].left = l;
            self.set_parent(l, b);
            self.pull(b);
            self.nodes[b as usize].parent = NIL;
            b
        }
    }

    /// First `k` elements and the rest.
    fn split(&mut self, t: u32, k: u32) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        let left = self.n(t).left;
        let lc = self.count(left);
        if k <= lc {
            let (a, b) = self.split(left, k);
            self.nodes[t as usize].left = b;
            self.set_parent(b, t);
            self.pull(t);
            self.set_parent(a, NIL);
            self.nodes[t as usize].parent = NIL;
            (a, t)
        } else {
            let (a, b) = self.split(self.n(t).right, k - lc - 1);
            self.nodes[t as usize].right = a;
            self.set_parent(a, t);
            self.pull(t);
            self.set_parent(b, NIL);
            self.nodes[t as usize].parent = NIL;
            (t, b)
        }
    }

    /// Rotate the tour containing `x` so that it starts at `x`.
    fn reroot(&mut self, x: u32) -> u32 {
        let r = self.root(x);
        let i = self.index(x);
        let (a, b) = self.split(r, i);
        self.merge(b, a)
    }

    fn set_flag(&mut self, x: u32, bit: u8, on: bool) {
        let n = &mut self.nodes[x as usize];
        let before = n.flags;
        if on {
            n.flags |= bit;
        } else {
            n.flags &= !bit;
        }
        if n.flags == before {
            return;
        }
        let mut y = x;
        while y != NIL {
            self.pull(y);
            y = self.n(y).parent;
        }
    }

    /// Some vertex occurrence in the tree of `r` whose own flags contain `bit`.
    fn find_flag(&self, r: u32, bit: u8) -> Option<u32> {
        if self.n(r).agg & bit == 0 {
            return None;
        }
        let mut x = r;
        loop {
            let n = self.n(x);
            if n.flags & bit != 0 {
                return Some(x);
            }
            x = if n.left != NIL && self.n(n.left).agg & bit != 0 { n.left } else { n.right };
        }
    }
}

#[derive(Clone, Default)]
struct LevelAdj {
    tree: BTreeSet<u32>,
    nontree: BTreeSet<u32>,
}

struct EdgeRec {
    u: u32,
    v: u32,
    level: usize,
    tree: bool,
    /// Arc pair per level `0..=level` while a tree edge.
    arcs: Vec<(u32, u32)>,
}

#[derive(Default)]
pub struct DynConn {
    tours: Tours,
    ids: HashMap<u64, u32>,
    names: Vec<u64>,
    free_vertices: Vec<u32>,
    /// Occurrence node of vertex `v` in forest `i`, created on demand.
    occ: Vec<Vec<u32>>,
    adj: Vec<Vec<LevelAdj>>,
    edges: Vec<Option<EdgeRec>>,
    free_edges: Vec<u32>,
    edge_total: usize,
    vertex_peak: usize,
    max_level_used: usize,
}

impl DynConn {
    pub fn new() -> DynConn {
        DynConn::default()
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_total
    }

    /// Highest level any edge has ever reached.
    pub fn max_level_used(&self) -> usize {
        self.max_level_used
    }

    /// Most vertices present at once.
    pub fn vertex_peak(&self) -> usize {
        self.vertex_peak
    }

    pub fn has_vertex(&self, v: u64) -> bool {
        self.ids.contains_key(&v)
    }

    fn vertex(&mut self, name: u64) -> u32 {
        if let Some(&v) = self.ids.get(&name) {
            return v;
        }
        let v = match self.free_vertices.pop() {
            Some(v) => {
                self.names[v as usize] = name;
                v
            }
            None => {
                self.names.push(name);
                self.adj.push(Vec::new());
                (self.names.len() - 1) as u32
            }
        };
        self.ids.insert(name, v);
        self.vertex_peak = self.vertex_peak.max(self.ids.len());
        v
    }

    /// Drop a vertex with no incident edges. Returns false if it has edges.
    pub fn remove_vertex(&mut self, name: u64) -> bool {
        let Some(&v) = self.ids.get(&name) else { return true };
        if self.adj[v as usize].iter().any(|a| !a.tree.is_empty() || !a.nontree.is_empty()) {
            return false;
        }
        for level in self.occ.iter_mut() {
            if let Some(x) = level.get_mut(v as usize) {
                if *x != NIL {
                    self.tours.release(*x);
                    *x = NIL;
                }
            }
        }
        self.adj[v as usize].clear();
        self.ids.remove(&name);
        self.free_vertices.push(v);
        true
    }

    fn occ(&mut self, level: usize, v: u32) -> u32 {
        while self.occ.len() <= level {
            self.occ.push(Vec::new());
        }
        let row = &mut self.occ[level];
        if row.len() <= v as usize {
            row.resize(v as usize + 1, NIL);
        }
        if row[v as usize] == NIL {
            let x = self.tours.alloc(v);
            self.occ[level][v as usize] = x;
        }
        self.occ[level][v as usize]
    }

    fn occ_if(&self, level: usize, v: u32) -> u32 {
        self.occ.get(level).and_then(|r| r.get(v as usize)).copied().unwrap_or(NIL)
    }

    fn adj_at(&mut self, v: u32, level: usize) -> &mut LevelAdj {
        let a = &mut self.adj[v as usize];
        if a.len() <= level {
            a.resize(level + 1, LevelAdj::default());
        }
        &mut a[level]
    }

    fn refresh_flags(&mut self, v: u32, level: usize) {
        let (t, nt) = {
            let a = self.adj_at(v, level);
            (!a.tree.is_empty(), !a.nontree.is_empty())
        };
        let x = self.occ(level, v);
        self.tours.set_flag(x, TREE, t);
        self.tours.set_flag(x, NONTREE, nt);
    }

    fn same_tree(&self, level: usize, u: u32, v: u32) -> bool {
        if u == v {
            return true;
        }
        let (a, b) = (self.occ_if(level, u), self.occ_if(level, v));
        a != NIL && b != NIL && self.tours.root(a) == self.tours.root(b)
    }

    fn tree_size(&self, level: usize, v: u32) -> u32 {
        let x = self.occ_if(level, v);
        if x == NIL {
            1
        } else {
            self.tours.n(self.tours.root(x)).size
        }
    }

    pub fn connected(&self, a: u64, b: u64) -> bool {
        if a == b {
            return true;
        }
        match (self.ids.get(&a), self.ids.get(&b)) {
            (Some(&u), Some(&v)) => self.same_tree(0, u, v),
            _ => false,
        }
    }

    /// Number of vertices in the component of `a`.
    pub fn component_size(&self, a: u64) -> usize {
        self.ids.get(&a).map_or(0, |&v| self.tree_size(0, v) as usize)
    }

    fn link(&mut self, level: usize, u: u32, v: u32) -> (u32, u32) {
        let (xu, xv) = (self.occ(level, u), self.occ(level, v));
        let ru = self.tours.reroot(xu);
        let rv = self.tours.reroot(xv);
        let a = self.tours.alloc(NIL);
        let b = self.tours.alloc(NIL);
        let t = self.tours.merge(ru, a);
        let t = self.tours.merge(t, rv);
        self.tours.merge(t, b);
        (a, b)
    }

    fn cut(&mut self, arcs: (u32, u32)) {
        let (mut a, mut b) = arcs;
        let (mut ia, mut ib) = (self.tours.index(a), self.tours.index(b));
        if ia > ib {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut ia, &mut ib);
        }
        let r = self.tours.root(a);
        let (l, rest) = self.tours.split(r, ia);
        let (_, rest) = self.tours.split(rest, 1);
        let (_, rest) = self.tours.split(rest, ib - ia - 1);
        let (_, rest) = self.tours.split(rest, 1);
        self.tours.merge(l, rest);
        self.tours.release(a);
        self.tours.release(b);
    }

    pub fn add_edge(&mut self, a: u64, b: u64) -> EdgeId {
        let (u, v) = (self.vertex(a), self.vertex(b));
        let tree = u != v && !self.same_tree(0, u, v);
        let mut rec = EdgeRec { u, v, level: 0, tree, arcs: Vec::new() };
        if tree {
            rec.arcs.push(self.link(0, u, v));
        }
        let id = match self.free_edges.pop() {
            Some(i) => {
                self.edges[i as usize] = Some(rec);
                i
            }
            None => {
                self.edges.push(Some(rec));
                (self.edges.len() - 1) as u32
            }
        };
        self.edge_total += 1;
        if u != v {
            self.attach(id, 0);
        }
        EdgeId(id)
    }

    fn rec(&self, e: u32) -> &EdgeRec {
        self.edges[e as usize].as_ref().expect("live edge")
    }

    fn attach(&mut self, e: u32, level: usize) {
        let EdgeRec { u, v, tree, .. } = *self.rec(e);
        for w in [u, v] {
            let a = self.adj_at(w, level);
            if tree {
                a.tree.insert(e);
            } else {
                a.nontree.insert(e);
            }
            self.refresh_flags(w, level);
        }
    }

    fn detach(&mut self, e: u32, level: usize) {
        let EdgeRec { u, v, tree, .. } = *self.rec(e);
        for w in [u, v] {
            let a = self.adj_at(w, level);
            if tree {
                a.tree.remove(&e);
            } else {
                a.nontree.remove(&e);
            }
            self.refresh_flags(w, level);
        }
    }

    pub fn endpoints(&self, e: EdgeId) -> Option<(u64, u64)> {
        let r = self.edges.get(e.0 as usize)?.as_ref()?;
        Some((self.names[r.u as usize], self.names[r.v as usize]))
    }

    pub fn remove_edge(&mut self, e: EdgeId) -> bool {
        let Some(Some(rec)) = self.edges.get(e.0 as usize) else { return false };
        let (u, v, level, tree) = (rec.u, rec.v, rec.level, rec.tree);
        if u != v {
            self.detach(e.0, level);
        }
        let rec = self.edges[e.0 as usize].take().expect("live edge");
        self.free_edges.push(e.0);
        self.edge_total -= 1;
        if tree {
            for arcs in rec.arcs {
                self.cut(arcs);
            }
            self.replace(u, v, level);
        }
        true
    }

    fn replace(&mut self, u: u32, v: u32, top: usize) {
        for i in (0..=top).rev() {
            let (small, other) = if self.tree_size(i, u) <= self.tree_size(i, v) { (u, v) } else { (v, u) };
            let root_of = |s: &Self, w: u32| s.tours.root(s.occ_if(i, w));
            let xs = self.occ(i, small);
            let _ = self.occ(i, other);
            let root = self.tours.root(xs);

            // Push the smaller tree's level-i tree edges one level up.
            while let Some(x) = self.tours.find_flag(self.tours.root(xs), TREE) {
                let w = self.tours.n(x).vertex;
                let es: Vec<u32> = self.adj_at(w, i).tree.iter().copied().collect();
                for e in es {
                    self.detach(e, i);
                    let (a, b) = {
                        let r = self.edges[e as usize].as_mut().expect("live edge");
                        r.level = i + 1;
                        (r.u, r.v)
                    };
                    let arcs = self.link(i + 1, a, b);
                    self.edges[e as usize].as_mut().expect("live edge").arcs.push(arcs);
                    self.max_level_used = self.max_level_used.max(i + 1);
                    self.attach(e, i + 1);
                }
            }
            debug_assert_eq!(root, self.tours.root(xs));

            while let Some(x) = self.tours.find_flag(self.tours.root(xs), NONTREE) {
                let w = self.tours.n(x).vertex;
                let es: Vec<u32> = self.adj_at(w, i).nontree.iter().copied().collect();
                for e in es {
                    let EdgeRec { u: a, v: b, .. } = *self.rec(e);
                    let far = if a == w { b } else { a };
                    let here = root_of(self, w);
                    if root_of(self, far) != here {
                        // Replacement: becomes a tree edge at level i.
                        self.detach(e, i);
                        self.edges[e as usize].as_mut().expect("live edge").tree = true;
                        for j in 0..=i {
                            let arcs = self.link(j, a, b);
                            self.edges[e as usize].as_mut().expect("live edge").arcs.push(arcs);
                        }
                        self.attach(e, i);
                        return;
                    }
                    self.detach(e, i);
                    self.edges[e as usize].as_mut().expect("live edge").level = i + 1;
                    self.max_level_used = self.max_level_used.max(i + 1);
                    self.attach(e, i + 1);
                }
            }
        }
    }

    /// Recheck the forests against the edge lists: each level's forest
    /// spans exactly the edges at or above it and tree sizes respect
    /// `n / 2^i`.
    pub fn check(&self) -> Result<(), String> {
        let n = self.vertex_peak.max(1);
        for (i, row) in self.occ.iter().enumerate() {
            for (v, &x) in row.iter().enumerate() {
                if x == NIL {
                    continue;
                }
                let size = self.tours.n(self.tours.root(x)).size as usize;
                if size > 1 && size << i > n {
                    return Err(format!("level {i}: tree of vertex {v} has {size} vertices"));
                }
            }
        }
        for (id, rec) in self.edges.iter().enumerate() {
            let Some(r) = rec else { continue };
            if r.u == r.v {
                continue;
            }
            for j in 0..=r.level {
                if !self.same_tree(j, r.u, r.v) {
                    return Err(format!("edge {id} at level {} splits forest {j}", r.level));
                }
            }
            if r.tree != (r.arcs.len() == r.level + 1) {
                return Err(format!("edge {id}: {} arc pairs at level {}", r.arcs.len(), r.level));
            }
        }
        Ok(())
    }
}
