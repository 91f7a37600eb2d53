//! Dynamic (1+ε)-spanner on points: an incrementally maintained theta graph.
//!
//! Each point keeps, per cone, the point of that cone nearest by projection on
//! the cone axis (ties by id). Cones are narrow enough that
//! `cos θ - sin θ >= 1/(1+ε)` for their full apex angle θ, which gives the
//! stretch bound. Points at identical coordinates form a group: only the
//! smallest id takes part in the theta graph and the others hang off it with
//! zero-length edges.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::f64::consts::PI;

use crate::error::EngineError;
use crate::geometry::{Coords, MAX_DIM};

pub type PointId = u64;

/// Net change of the edge set caused by one update, sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeDelta {
    pub added: Vec<(PointId, PointId)>,
    pub removed: Vec<(PointId, PointId)>,
}

/// Largest apex angle θ with `cos θ - sin θ >= 1/(1+eps)`.
pub fn cone_angle(eps: f64) -> f64 {
    (1.0 / (2f64.sqrt() * (1.0 + eps))).acos() - PI / 4.0
}

#[derive(Clone, Debug)]
enum Cones {
    Line,
    Sectors { k: u32 },
    Faces { dim: usize, grid: u32 },
}

impl Cones {
    fn new(dim: usize, eps: f64) -> Cones {
        let theta = cone_angle(eps);
        match dim {
            1 => Cones::Line,
            2 => Cones::Sectors { k: (2.0 * PI / theta).ceil() as u32 },
            _ => {
                // A face cell of side h is seen from the origin within angle
                // 2 asin(h sqrt(d-1) / 4) of its center direction.
                let mut grid = 1u32;
                loop {
                    let h = 2.0 / grid as f64;
                    let alpha = 2.0 * (h * ((dim - 1) as f64).sqrt() / 4.0).min(1.0).asin();
                    if 2.0 * alpha <= theta {
                        break;
                    }
                    grid += 1;
                }
                Cones::Faces { dim, grid }
            }
        }
    }

    fn count(&self) -> usize {
        match *self {
            Cones::Line => 2,
            Cones::Sectors { k } => k as usize,
            Cones::Faces { dim, grid } => 2 * dim * (grid as usize).pow(dim as u32 - 1),
        }
    }

    fn of(&self, v: &[f64]) -> u32 {
        match *self {
            Cones::Line => u32::from(v[0] < 0.0),
            Cones::Sectors { k } => {
                let a = v[1].atan2(v[0]).rem_euclid(2.0 * PI);
                ((a / (2.0 * PI / k as f64)).floor() as u32).min(k - 1)
            }
            Cones::Faces { dim, grid } => {
                let mut face = 0;
                for a in 1..dim {
                    if v[a].abs() > v[face].abs() {
                        face = a;
                    }
                }
                let m = v[face].abs();
                let mut idx = (face * 2 + usize::from(v[face] < 0.0)) as u32;
                for a in (0..dim).filter(|&a| a != face) {
                    let t = ((v[a] / m + 1.0) / 2.0 * grid as f64).floor() as i64;
                    idx = idx * grid + t.clamp(0, grid as i64 - 1) as u32;
                }
                idx
            }
        }
    }

    fn axis(&self, c: u32) -> Coords {
        let mut out = [0.0; MAX_DIM];
        match *self {
            Cones::Line => out[0] = if c == 0 { 1.0 } else { -1.0 },
            Cones::Sectors { k } => {
                let a = (c as f64 + 0.5) * 2.0 * PI / k as f64;
                out[0] = a.cos();
                out[1] = a.sin();
            }
            Cones::Faces { dim, grid } => {
                let mut rest = c;
                let mut cells = vec![0u32; dim - 1];
                for t in cells.iter_mut().rev() {
                    *t = rest % grid;
                    rest /= grid;
                }
                let face = (rest / 2) as usize;
                let sign = if rest.is_multiple_of(2) { 1.0 } else { -1.0 };
                let mut it = cells.into_iter();
                for (a, o) in out.iter_mut().enumerate().take(dim) {
                    *o = if a == face {
                        sign
                    } else {
                        -1.0 + (it.next().expect("cell") as f64 + 0.5) * 2.0 / grid as f64
                    };
                }
                let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
                for o in out.iter_mut() {
                    *o /= n;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct PointSpanner {
    eps: f64,
    dim: usize,
    cones: Cones,
    axes: Vec<Coords>,
    points: BTreeMap<PointId, Coords>,
    groups: BTreeMap<[u64; MAX_DIM], BTreeSet<PointId>>,
    /// Per representative, per cone: the chosen neighbor.
    near: BTreeMap<PointId, Vec<Option<PointId>>>,
    /// Reverse of `near`: who chose this representative, and in which cone.
    chosen_by: BTreeMap<PointId, BTreeSet<(PointId, u32)>>,
    /// Edge multiplicities; an edge exists while its count is positive.
    edges: BTreeMap<(PointId, PointId), u32>,
    touched: BTreeMap<(PointId, PointId), bool>,
}

fn ord(a: PointId, b: PointId) -> (PointId, PointId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl PointSpanner {
    pub fn new(dim: usize, eps: f64) -> PointSpanner {
        assert!((1..=MAX_DIM).contains(&dim), "point spanner: bad dimension {dim}");
        let eps = eps.clamp(1e-6, 1.0 - 1e-9);
        let cones = Cones::new(dim, eps);
        let axes = (0..cones.count() as u32).map(|c| cones.axis(c)).collect();
        PointSpanner {
            eps,
            dim,
            cones,
            axes,
            points: BTreeMap::new(),
            groups: BTreeMap::new(),
            near: BTreeMap::new(),
            chosen_by: BTreeMap::new(),
            edges: BTreeMap::new(),
            touched: BTreeMap::new(),
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cone_count(&self) -> usize {
        self.cones.count()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.points.contains_key(&id)
    }

    pub fn point(&self, id: PointId) -> Option<&Coords> {
        self.points.get(&id)
    }

    /// Current edges as `(smaller id, larger id)`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (PointId, PointId)> + '_ {
        self.edges.keys().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: PointId, b: PointId) -> bool {
        self.edges.contains_key(&ord(a, b))
    }

    pub fn degree(&self, id: PointId) -> usize {
        self.edges.keys().filter(|(a, b)| *a == id || *b == id).count()
    }

    pub fn weight(&self, a: PointId, b: PointId) -> f64 {
        dist(&self.points[&a], &self.points[&b], self.dim)
    }

    fn key(&self, p: &Coords) -> [u64; MAX_DIM] {
        let mut k = [0u64; MAX_DIM];
        for a in 0..self.dim {
            // +0.0 and -0.0 are the same location.
            k[a] = (p[a] + 0.0).to_bits();
        }
        k
    }

    fn bump(&mut self, a: PointId, b: PointId, up: bool) {
        let e = ord(a, b);
        let count = self.edges.get(&e).copied().unwrap_or(0);
        self.touched.entry(e).or_insert(count > 0);
        if up {
            self.edges.insert(e, count + 1);
        } else if count <= 1 {
            self.edges.remove(&e);
        } else {
            self.edges.insert(e, count - 1);
        }
    }

    fn finish(&mut self) -> EdgeDelta {
        let mut d = EdgeDelta::default();
        for (e, before) in std::mem::take(&mut self.touched) {
            let now = self.edges.contains_key(&e);
            if now && !before {
                d.added.push(e);
            } else if before && !now {
                d.removed.push(e);
            }
        }
        d
    }

    pub fn insert_point(&mut self, id: PointId, p: &[f64]) -> Result<EdgeDelta, EngineError> {
        if self.points.contains_key(&id) {
            return Err(EngineError::DuplicateId(id));
        }
        let mut c = [0.0; MAX_DIM];
        c[..self.dim].copy_from_slice(&p[..self.dim]);
        self.points.insert(id, c);
        let key = self.key(&c);
        let group = self.groups.entry(key).or_default().clone();
        match group.first().copied() {
            None => self.theta_insert(id),
            Some(rep) if rep < id => self.bump(rep, id, true),
            Some(rep) => {
                for &x in group.iter().skip(1) {
                    self.bump(rep, x, false);
                }
                self.theta_delete(rep);
                self.theta_insert(id);
                for &x in &group {
                    self.bump(id, x, true);
                }
            }
        }
        self.groups.get_mut(&key).expect("group").insert(id);
        Ok(self.finish())
    }

    pub fn delete_point(&mut self, id: PointId) -> Result<EdgeDelta, EngineError> {
        let c = self.points.get(&id).copied().ok_or(EngineError::UnknownId(id))?;
        let key = self.key(&c);
        let group = self.groups.get_mut(&key).expect("group");
        group.remove(&id);
        let rest: Vec<PointId> = group.iter().copied().collect();
        if rest.is_empty() {
            self.groups.remove(&key);
        }
        match rest.first().copied() {
            Some(rep) if rep < id => self.bump(rep, id, false),
            Some(rep) => {
                for &x in &rest {
                    self.bump(id, x, false);
                }
                self.theta_delete(id);
                self.points.remove(&id);
                self.theta_insert(rep);
                for &x in rest.iter().skip(1) {
                    self.bump(rep, x, true);
                }
            }
            None => {
                self.theta_delete(id);
            }
        }
        self.points.remove(&id);
        Ok(self.finish())
    }

    /// Is `(cand, cid)` a better choice than `(cur, cur_id)` by projection, then id?
    fn better(cand: f64, cid: PointId, cur: Option<(f64, PointId)>) -> bool {
        match cur {
            None => true,
            Some((d, i)) => cand < d || (cand == d && cid < i),
        }
    }

    fn proj(&self, from: PointId, to: PointId, cone: u32) -> f64 {
        let a = &self.points[&from];
        let b = &self.points[&to];
        let axis = &self.axes[cone as usize];
        (0..self.dim).map(|k| (b[k] - a[k]) * axis[k]).sum()
    }

    fn cone_to(&self, from: PointId, to: PointId) -> u32 {
        let a = &self.points[&from];
        let b = &self.points[&to];
        let mut v = [0.0; MAX_DIM];
        for k in 0..self.dim {
            v[k] = b[k] - a[k];
        }
        self.cones.of(&v[..self.dim])
    }

    fn choose(&mut self, q: PointId, cone: u32, r: PointId) {
        self.near.get_mut(&q).expect("rep")[cone as usize] = Some(r);
        self.chosen_by.entry(r).or_default().insert((q, cone));
        self.bump(q, r, true);
    }

    fn unchoose(&mut self, q: PointId, cone: u32, r: PointId) {
        self.near.get_mut(&q).expect("rep")[cone as usize] = None;
        if let Some(s) = self.chosen_by.get_mut(&r) {
            s.remove(&(q, cone));
            if s.is_empty() {
                self.chosen_by.remove(&r);
            }
        }
        self.bump(q, r, false);
    }

    fn theta_insert(&mut self, p: PointId) {
        let k = self.cones.count();
        let reps: Vec<PointId> = self.near.keys().copied().collect();
        let mut mine: Vec<Option<(f64, PointId)>> = vec![None; k];
        self.near.insert(p, vec![None; k]);
        for q in reps {
            let c = self.cone_to(p, q);
            let d = self.proj(p, q, c);
            if Self::better(d, q, mine[c as usize]) {
                mine[c as usize] = Some((d, q));
            }
            let c2 = self.cone_to(q, p);
            let d2 = self.proj(q, p, c2);
            let cur = self.near[&q][c2 as usize].map(|r| (self.proj(q, r, c2), r));
            if Self::better(d2, p, cur) {
                if let Some((_, old)) = cur {
                    self.unchoose(q, c2, old);
                }
                self.choose(q, c2, p);
            }
        }
        for (c, m) in mine.into_iter().enumerate() {
            if let Some((_, r)) = m {
                self.choose(p, c as u32, r);
            }
        }
    }

    fn theta_delete(&mut self, p: PointId) {
        let mine = self.near.get(&p).cloned().unwrap_or_default();
        for (c, r) in mine.into_iter().enumerate() {
            if let Some(r) = r {
                self.unchoose(p, c as u32, r);
            }
        }
        self.near.remove(&p);
        let dependents = self.chosen_by.remove(&p).unwrap_or_default();
        for (q, c) in dependents {
            self.near.get_mut(&q).expect("rep")[c as usize] = None;
            self.bump(q, p, false);
            let mut best: Option<(f64, PointId)> = None;
            for &r in self.near.keys() {
                if r == q || self.cone_to(q, r) != c {
                    continue;
                }
                let d = self.proj(q, r, c);
                if Self::better(d, r, best) {
                    best = Some((d, r));
                }
            }
            if let Some((_, r)) = best {
                self.choose(q, c, r);
            }
        }
    }

    /// Shortest-path distances from `src` over the current edges.
    pub fn distances_from(&self, src: PointId) -> BTreeMap<PointId, f64> {
        let mut adj: BTreeMap<PointId, Vec<PointId>> = BTreeMap::new();
        for &(a, b) in self.edges.keys() {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        let mut dist_map: BTreeMap<PointId, f64> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, src));
        while let Some(Entry(d, u)) = heap.pop() {
            if dist_map.contains_key(&u) {
                continue;
            }
            dist_map.insert(u, d);
            for &v in adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
                if !dist_map.contains_key(&v) {
                    heap.push(Entry(d + self.weight(u, v), v));
                }
            }
        }
        dist_map
    }

    /// Largest ratio of graph distance to Euclidean distance over all pairs
    /// (up to 64 points) or 200 fixed sampled pairs; infinite if disconnected.
    pub fn max_stretch(&self) -> f64 {
        let ids: Vec<PointId> = self.points.keys().copied().collect();
        let n = ids.len();
        let pairs: Vec<(usize, usize)> = if n <= 64 {
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
        } else {
            (0..200u64)
                .map(|t| {
                    let i = (crate::mix64(t) % n as u64) as usize;
                    let j = (crate::mix64(t ^ 0x5bd1_e995) % (n as u64 - 1)) as usize;
                    (i, if j >= i { j + 1 } else { j })
                })
                .collect()
        };
        let mut worst: f64 = 1.0;
        let mut cache: BTreeMap<usize, BTreeMap<PointId, f64>> = BTreeMap::new();
        for (i, j) in pairs {
            let e = self.weight(ids[i], ids[j]);
            let dm = cache.entry(i).or_insert_with(|| self.distances_from(ids[i]));
            let g = dm.get(&ids[j]).copied().unwrap_or(f64::INFINITY);
            if e == 0.0 {
                if g > 0.0 {
                    return f64::INFINITY;
                }
                continue;
            }
            worst = worst.max(g / e);
        }
        worst
    }

    /// Does every pair satisfy the stretch bound (see [`Self::max_stretch`])?
    pub fn verify_stretch(&self) -> bool {
        self.max_stretch() <= 1.0 + self.eps + 1e-9
    }
}

fn dist(a: &Coords, b: &Coords, dim: usize) -> f64 {
    (0..dim).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum::<f64>().sqrt()
}

#[derive(PartialEq)]
struct Entry(f64, PointId);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}
