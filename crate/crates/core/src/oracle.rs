//! Brute-force ground truth. Everything is recomputed from scratch on each call.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::geometry::{edge_weight, intersects, Shape, ShapeId};

/// Undirected weighted graph on shape ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Graph {
    pub adj: BTreeMap<ShapeId, Vec<(ShapeId, f64)>>,
}

impl Graph {
    pub fn with_vertices(ids: impl IntoIterator<Item = ShapeId>) -> Graph {
        Graph { adj: ids.into_iter().map(|id| (id, Vec::new())).collect() }
    }

    pub fn add_edge(&mut self, u: ShapeId, v: ShapeId, w: f64) {
        self.adj.entry(u).or_default().push((v, w));
        self.adj.entry(v).or_default().push((u, w));
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(|v| v.len()).sum::<usize>() / 2
    }

    /// Edges as `(min, max)`, sorted, without duplicates.
    pub fn edges(&self) -> Vec<(ShapeId, ShapeId)> {
        let mut out: Vec<(ShapeId, ShapeId)> =
            self.adj.iter().flat_map(|(&u, vs)| vs.iter().filter(move |(v, _)| u < *v).map(move |&(v, _)| (u, v))).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The intersection graph, weighted by center distance. O(n²).
pub fn full_graph(shapes: &[Shape]) -> Graph {
    let mut g = Graph::with_vertices(shapes.iter().map(|s| s.id));
    for (i, a) in shapes.iter().enumerate() {
        for b in &shapes[i + 1..] {
            if intersects(a, b) {
                g.add_edge(a.id, b.id, edge_weight(a, b));
            }
        }
    }
    g
}

/// Graph on `shapes` with the given edges, weighted by center distance.
pub fn edge_graph(shapes: &[Shape], edges: &[(ShapeId, ShapeId)]) -> Graph {
    let by_id: BTreeMap<ShapeId, &Shape> = shapes.iter().map(|s| (s.id, s)).collect();
    let mut g = Graph::with_vertices(by_id.keys().copied());
    for &(u, v) in edges {
        g.add_edge(u, v, edge_weight(by_id[&u], by_id[&v]));
    }
    g
}

#[derive(PartialEq)]
struct Item(f64, ShapeId);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Shortest-path distances from `src` to every reachable vertex.
pub fn dijkstra(g: &Graph, src: ShapeId) -> BTreeMap<ShapeId, f64> {
    let mut dist = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    heap.push(Item(0.0, src));
    while let Some(Item(d, u)) = heap.pop() {
        if dist.contains_key(&u) {
            continue;
        }
        dist.insert(u, d);
        for &(v, w) in g.adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
            if !dist.contains_key(&v) {
                heap.push(Item(d + w, v));
            }
        }
    }
    dist
}

/// Union-find with path halving and union by size.
#[derive(Clone, Debug, Default)]
pub struct UnionFind {
    parent: BTreeMap<ShapeId, ShapeId>,
    size: BTreeMap<ShapeId, usize>,
}

impl UnionFind {
    pub fn new(ids: impl IntoIterator<Item = ShapeId>) -> UnionFind {
        let mut uf = UnionFind::default();
        for id in ids {
            uf.parent.insert(id, id);
            uf.size.insert(id, 1);
        }
        uf
    }

    pub fn find(&mut self, mut x: ShapeId) -> ShapeId {
        while self.parent[&x] != x {
            let gp = self.parent[&self.parent[&x]];
            self.parent.insert(x, gp);
            x = gp;
        }
        x
    }

    pub fn union(&mut self, a: ShapeId, b: ShapeId) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[&a] < self.size[&b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent.insert(b, a);
        let sb = self.size[&b];
        *self.size.get_mut(&a).expect("root") += sb;
    }

    pub fn same(&mut self, a: ShapeId, b: ShapeId) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Connected components, each sorted, ordered by smallest member.
pub fn components(g: &Graph) -> Vec<Vec<ShapeId>> {
    let mut uf = UnionFind::new(g.adj.keys().copied());
    for (&u, vs) in &g.adj {
        for &(v, _) in vs {
            uf.union(u, v);
        }
    }
    let mut groups: BTreeMap<ShapeId, Vec<ShapeId>> = BTreeMap::new();
    for &u in g.adj.keys() {
        let r = uf.find(u);
        groups.entry(r).or_default().push(u);
    }
    let mut out: Vec<Vec<ShapeId>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Union-find over the intersection graph of `shapes`.
pub fn intersection_components(shapes: &[Shape]) -> UnionFind {
    let mut uf = UnionFind::new(shapes.iter().map(|s| s.id));
    for (i, a) in shapes.iter().enumerate() {
        for b in &shapes[i + 1..] {
            if intersects(a, b) {
                uf.union(a.id, b.id);
            }
        }
    }
    uf
}

#[derive(Clone, Debug, PartialEq)]
pub struct StretchReport {
    /// Largest `dist_G / dist_D` over checked pairs connected in D; infinite
    /// if some such pair is disconnected in G.
    pub max_ratio: f64,
    pub worst_pair: Option<(ShapeId, ShapeId)>,
    pub pairs_checked: usize,
    /// Spanner edges whose shapes do not intersect.
    pub foreign_edges: Vec<(ShapeId, ShapeId)>,
    pub ok: bool,
}

/// Pairs to check: all pairs up to 64 shapes, else 200 pairs drawn from a fixed hash sequence.
pub fn stretch_pairs(ids: &[ShapeId]) -> Vec<(ShapeId, ShapeId)> {
    let n = ids.len();
    if n <= 64 {
        return (0..n).flat_map(|i| (i + 1..n).map(move |j| (ids[i], ids[j]))).collect();
    }
    (0..200u64)
        .map(|t| {
            let i = (crate::mix64(t) % n as u64) as usize;
            let j = (crate::mix64(t ^ 0x5bd1_e995) % (n as u64 - 1)) as usize;
            (ids[i], ids[if j >= i { j + 1 } else { j }])
        })
        .collect()
}

/// Compare distances in the spanner against the full intersection graph.
pub fn check_stretch(shapes: &[Shape], spanner: &[(ShapeId, ShapeId)], eps: f64) -> StretchReport {
    let by_id: BTreeMap<ShapeId, &Shape> = shapes.iter().map(|s| (s.id, s)).collect();
    let foreign_edges: Vec<(ShapeId, ShapeId)> =
        spanner.iter().copied().filter(|(u, v)| !intersects(by_id[u], by_id[v])).collect();
    let full = full_graph(shapes);
    let g = edge_graph(shapes, spanner);
    let ids: Vec<ShapeId> = by_id.keys().copied().collect();
    let pairs = stretch_pairs(&ids);
    let mut cache_d: BTreeMap<ShapeId, BTreeMap<ShapeId, f64>> = BTreeMap::new();
    let mut cache_g: BTreeMap<ShapeId, BTreeMap<ShapeId, f64>> = BTreeMap::new();
    let mut max_ratio: f64 = 1.0;
    let mut worst_pair = None;
    let mut ok = foreign_edges.is_empty();
    for &(a, b) in &pairs {
        let dd = cache_d.entry(a).or_insert_with(|| dijkstra(&full, a)).get(&b).copied();
        let Some(dd) = dd else { continue };
        let dg = cache_g.entry(a).or_insert_with(|| dijkstra(&g, a)).get(&b).copied().unwrap_or(f64::INFINITY);
        if dg > (1.0 + eps) * dd + 1e-9 {
            ok = false;
        }
        let ratio = if dd > 0.0 {
            dg / dd
        } else if dg > 1e-9 {
            f64::INFINITY
        } else {
            1.0
        };
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_pair = Some((a, b));
        }
    }
    StretchReport { max_ratio, worst_pair, pairs_checked: pairs.len(), foreign_edges, ok }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_graphs() {
        assert_eq!(full_graph(&[]).vertex_count(), 0);
        // Three mutually tangent disks.
        let h = 3f64.sqrt() * 2.0;
        let tri = [Shape::disk(1, 0.0, 0.0, 1.0), Shape::disk(2, 2.0, 0.0, 1.0), Shape::disk(3, 1.0, h / 2.0, 1.0)];
        let g = full_graph(&tri);
        assert_eq!(g.edges(), vec![(1, 2), (1, 3), (2, 3)]);
        // A chain and a loner.
        let chain = [
            Shape::disk(1, 0.0, 0.0, 2.0),
            Shape::disk(2, 4.0, 0.0, 2.0),
            Shape::disk(3, 8.0, 0.0, 2.0),
            Shape::disk(9, 30.0, 0.0, 2.0),
        ];
        let g = full_graph(&chain);
        assert_eq!(g.edges(), vec![(1, 2), (2, 3)]);
        assert_eq!(dijkstra(&g, 1)[&3], 8.0);
        assert_eq!(components(&g), vec![vec![1, 2, 3], vec![9]]);
        let mut uf = intersection_components(&chain);
        assert!(uf.same(1, 3) && !uf.same(1, 9));
    }

    #[test]
    fn stretch_report_flags_missing_and_foreign_edges() {
        let chain = [Shape::disk(1, 0.0, 0.0, 2.0), Shape::disk(2, 4.0, 0.0, 2.0), Shape::disk(3, 8.0, 0.0, 2.0)];
        let r = check_stretch(&chain, &[(1, 2), (2, 3)], 0.1);
        assert!(r.ok && r.max_ratio == 1.0 && r.pairs_checked == 3);
        let r = check_stretch(&chain, &[(1, 2)], 0.1);
        assert!(!r.ok && r.max_ratio.is_infinite());
        let r = check_stretch(&chain, &[(1, 2), (2, 3), (1, 3)], 0.1);
        assert!(!r.ok && r.foreign_edges == vec![(1, 3)]);
    }

    #[test]
    fn random_edge_set_matches_predicate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        let shapes: Vec<Shape> =
            (0..50).map(|i| Shape::disk(i, rng.gen_range(0.0..40.0), rng.gen_range(0.0..40.0), rng.gen_range(2.0..5.0))).collect();
        let g = full_graph(&shapes);
        let mut expect = Vec::new();
        for a in &shapes {
            for b in &shapes {
                if a.id < b.id && (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]) <= a.extent + b.extent {
                    expect.push((a.id, b.id));
                }
            }
        }
        assert_eq!(g.edges(), expect);
        assert_eq!(stretch_pairs(&(0..100).collect::<Vec<_>>()).len(), 200);
    }
}
