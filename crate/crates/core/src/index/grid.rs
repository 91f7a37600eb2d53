//! Uniform-grid baseline: shapes bucketed by center on a grid of side Ψ,
//! kept in one treap ordered by (bucket, id).

use std::cmp::Ordering;

use super::{fw, wf, NodeRef, NodeStore, QueryMode, ShapeTable, NIL};
use crate::geometry::{intersects, Shape, ShapeId, MAX_DIM};

const H_ROOT: usize = 0;
const H_REACH: usize = 1;

// Node layout: bucket coordinates, id, priority, children.
const N_ID: usize = MAX_DIM;
const N_PRIO: usize = MAX_DIM + 1;
const N_LEFT: usize = MAX_DIM + 2;
const N_RIGHT: usize = MAX_DIM + 3;
const N_WIDTH: usize = MAX_DIM + 4;

type Key = ([i64; MAX_DIM], ShapeId);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridTreap {
    dim: usize,
    bucket: f64,
}

impl GridTreap {
    pub fn new(dim: usize, psi: f64) -> GridTreap {
        GridTreap { dim, bucket: psi.max(1.0) }
    }

    fn bucket_of(&self, p: &[f64]) -> [i64; MAX_DIM] {
        let mut b = [0i64; MAX_DIM];
        for a in 0..self.dim {
            b[a] = (p[a] / self.bucket).floor() as i64;
        }
        b
    }

    fn key_of(&self, s: &Shape) -> Key {
        (self.bucket_of(s.center()), s.id)
    }

    fn node_bucket<S: NodeStore + ?Sized>(&self, st: &S, n: NodeRef) -> [i64; MAX_DIM] {
        let mut b = [0i64; MAX_DIM];
        for (a, v) in b.iter_mut().enumerate().take(self.dim) {
            *v = st.get(n, a) as i64;
        }
        b
    }

    fn node_key<S: NodeStore + ?Sized>(&self, st: &S, n: NodeRef) -> Key {
        (self.node_bucket(st, n), st.get(n, N_ID))
    }

    pub fn init<S: NodeStore + ?Sized>(&self, st: &mut S) -> NodeRef {
        st.alloc(&[NIL, fw(0.0)])
    }

    pub fn insert<S: NodeStore + ?Sized>(&self, st: &mut S, header: NodeRef, s: &Shape) {
        let hw = s.half_width();
        if hw > wf(st.get(header, H_REACH)) {
            st.set(header, H_REACH, fw(hw));
        }
        let root = st.get(header, H_ROOT);
        let key = self.key_of(s);
        let new_root = self.ins(st, root, &key);
        if new_root != root {
            st.set(header, H_ROOT, new_root);
        }
    }

    fn ins<S: NodeStore + ?Sized>(&self, st: &mut S, n: NodeRef, key: &Key) -> NodeRef {
        if n == NIL {
            let mut f = [0u64; N_WIDTH];
            for a in 0..MAX_DIM {
                f[a] = key.0[a] as u64;
            }
            f[N_ID] = key.1;
            f[N_PRIO] = crate::mix64(key.1 ^ 0x0074_7265_6170);
            f[N_LEFT] = NIL;
            f[N_RIGHT] = NIL;
            return st.alloc(&f);
        }
        let here = self.node_key(st, n);
        match key.cmp(&here) {
            Ordering::Less => {
                let l = st.get(n, N_LEFT);
                let nl = self.ins(st, l, key);
                if nl != l {
                    st.set(n, N_LEFT, nl);
                }
                if st.get(nl, N_PRIO) > st.get(n, N_PRIO) {
                    return rotate_right(st, n);
                }
                n
            }
            Ordering::Greater => {
                let r = st.get(n, N_RIGHT);
                let nr = self.ins(st, r, key);
                if nr != r {
                    st.set(n, N_RIGHT, nr);
                }
                if st.get(nr, N_PRIO) > st.get(n, N_PRIO) {
                    return rotate_left(st, n);
                }
                n
            }
            Ordering::Equal => panic!("grid index: id {} inserted twice", key.1),
        }
    }

    pub fn delete<S: NodeStore + ?Sized>(&self, st: &mut S, header: NodeRef, s: &Shape) {
        let root = st.get(header, H_ROOT);
        let key = self.key_of(s);
        let new_root = self.del(st, root, &key);
        if new_root != root {
            st.set(header, H_ROOT, new_root);
        }
    }

    fn del<S: NodeStore + ?Sized>(&self, st: &mut S, n: NodeRef, key: &Key) -> NodeRef {
        assert!(n != NIL, "grid index: id {} not stored", key.1);
        let here = self.node_key(st, n);
        match key.cmp(&here) {
            Ordering::Less => {
                let l = st.get(n, N_LEFT);
                let nl = self.del(st, l, key);
                if nl != l {
                    st.set(n, N_LEFT, nl);
                }
                n
            }
            Ordering::Greater => {
                let r = st.get(n, N_RIGHT);
                let nr = self.del(st, r, key);
                if nr != r {
                    st.set(n, N_RIGHT, nr);
                }
                n
            }
            Ordering::Equal => {
                let l = st.get(n, N_LEFT);
                let r = st.get(n, N_RIGHT);
                if l == NIL {
                    st.release(n);
                    return r;
                }
                if r == NIL {
                    st.release(n);
                    return l;
                }
                if st.get(l, N_PRIO) > st.get(r, N_PRIO) {
                    let top = rotate_right(st, n);
                    let nr = self.del(st, n, key);
                    st.set(top, N_RIGHT, nr);
                    top
                } else {
                    let top = rotate_left(st, n);
                    let nl = self.del(st, n, key);
                    st.set(top, N_LEFT, nl);
                    top
                }
            }
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
        let root = st.get(header, H_ROOT);
        if root == NIL {
            return None;
        }
        let reach = wf(st.get(header, H_REACH)) + q.half_width();
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for a in 0..self.dim {
            lo[a] = ((q.center[a] - reach) / self.bucket).floor() as i64;
            hi[a] = ((q.center[a] + reach) / self.bucket).floor() as i64;
        }
        let mut best: Option<ShapeId> = None;
        let mut cur = lo;
        loop {
            if let Some(id) = self.scan_bucket(st, table, root, &cur, q) {
                if mode == QueryMode::Any {
                    return Some(id);
                }
                best = Some(best.map_or(id, |b: ShapeId| b.min(id)));
            }
            let mut a = 0;
            loop {
                if a == self.dim {
                    return best;
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

    /// Smallest-id shape in bucket `b` intersecting `q`.
    fn scan_bucket<S: NodeStore + ?Sized>(
        &self,
        st: &S,
        table: &ShapeTable,
        n: NodeRef,
        b: &[i64; MAX_DIM],
        q: &Shape,
    ) -> Option<ShapeId> {
        if n == NIL {
            return None;
        }
        match self.node_bucket(st, n).cmp(b) {
            Ordering::Less => self.scan_bucket(st, table, st.get(n, N_RIGHT), b, q),
            Ordering::Greater => self.scan_bucket(st, table, st.get(n, N_LEFT), b, q),
            Ordering::Equal => {
                if let Some(id) = self.scan_bucket(st, table, st.get(n, N_LEFT), b, q) {
                    return Some(id);
                }
                let id = st.get(n, N_ID);
                if intersects(&table[&id], q) {
                    return Some(id);
                }
                self.scan_bucket(st, table, st.get(n, N_RIGHT), b, q)
            }
        }
    }

    pub fn members<S: NodeStore + ?Sized>(&self, st: &S, header: NodeRef) -> Vec<ShapeId> {
        let mut out = Vec::new();
        let mut stack = vec![st.get(header, H_ROOT)];
        while let Some(n) = stack.pop() {
            if n == NIL {
                continue;
            }
            out.push(st.get(n, N_ID));
            stack.push(st.get(n, N_LEFT));
            stack.push(st.get(n, N_RIGHT));
        }
        out
    }
}

fn rotate_right<S: NodeStore + ?Sized>(st: &mut S, n: NodeRef) -> NodeRef {
    let l = st.get(n, N_LEFT);
    let lr = st.get(l, N_RIGHT);
    st.set(n, N_LEFT, lr);
    st.set(l, N_RIGHT, n);
    l
}

fn rotate_left<S: NodeStore + ?Sized>(st: &mut S, n: NodeRef) -> NodeRef {
    let r = st.get(n, N_RIGHT);
    let rl = st.get(r, N_LEFT);
    st.set(n, N_RIGHT, rl);
    st.set(r, N_LEFT, n);
    r
}
