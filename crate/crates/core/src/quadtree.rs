//! The dynamic quadtree T(S): storing families (spanner mode) or storing
//! cells only (connectivity mode), with populations, garrisons and ε-cells.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::EngineError;
use crate::geometry::{ceil_log2, BoxSpec, CellId, Shape, ShapeId, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeMode {
    /// Every cell of every storing family is present.
    Spanner,
    /// Only storing cells and their ancestors are present.
    Connectivity,
}

/// One cell of the `m^d` grid that partitions a quadtree cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EpsCellId {
    pub cell: CellId,
    pub grid: [u32; MAX_DIM],
}

impl EpsCellId {
    pub fn key(&self) -> u64 {
        let mut h = self.cell.key();
        for g in self.grid {
            h = crate::mix64(h ^ g as u64);
        }
        h
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpsRecord {
    /// Γ_ε(E): shapes stored in this cell with center in E.
    pub sub: BTreeSet<ShapeId>,
    /// π_ε(E): shapes whose family passes through this cell with center in E.
    pub pop: BTreeSet<ShapeId>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeRecord {
    /// π(C); empty in connectivity mode.
    pub population: BTreeSet<ShapeId>,
    /// Γ(C): shapes whose storing cell is C.
    pub garrison: BTreeSet<ShapeId>,
    /// Descendant-or-self cells with a nonempty garrison.
    pub subtree_storing: usize,
    /// Live shapes keeping this cell in the tree.
    pub relevance: usize,
    /// Number of shapes that have this cell as a constituent.
    pub marks: usize,
    pub eps: BTreeMap<[u32; MAX_DIM], EpsRecord>,
}

/// What an insertion or deletion changed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeltaReport {
    pub created: Vec<CellId>,
    pub removed: Vec<CellId>,
    /// Storing cell followed by the rest of the family (spanner mode) or alone.
    pub family: Vec<CellId>,
    /// ε-cell holding the center, one per entry of `family`.
    pub eps_cells: Vec<EpsCellId>,
    /// Did the storing cell's garrison switch between empty and nonempty?
    pub storing_toggled: bool,
}

#[derive(Clone, Debug)]
pub struct QuadTree {
    bx: BoxSpec,
    mode: TreeMode,
    psi: f64,
    grid: u32,
    nodes: HashMap<CellId, NodeRecord>,
    shapes: BTreeMap<ShapeId, Shape>,
    present_by_level: Vec<BTreeSet<CellId>>,
    storing_by_level: Vec<BTreeSet<CellId>>,
}

/// `m = ceil(1/eps)` with a guard against `1/eps` landing a hair above an integer.
pub fn eps_grid(eps: f64) -> u32 {
    let eps = eps.clamp(1e-9, 1.0);
    ((1.0 / eps) - 1e-9).ceil().max(1.0) as u32
}

impl QuadTree {
    pub fn new(bx: BoxSpec, mode: TreeMode, psi: f64, eps: f64) -> QuadTree {
        let levels = bx.top_level as usize + 1;
        QuadTree {
            bx,
            mode,
            psi,
            grid: eps_grid(eps),
            nodes: HashMap::new(),
            shapes: BTreeMap::new(),
            present_by_level: vec![BTreeSet::new(); levels],
            storing_by_level: vec![BTreeSet::new(); levels],
        }
    }

    pub fn box_spec(&self) -> &BoxSpec {
        &self.bx
    }

    pub fn mode(&self) -> TreeMode {
        self.mode
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Subdivisions per axis of the ε-grid.
    pub fn grid(&self) -> u32 {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn shape(&self, id: ShapeId) -> Option<&Shape> {
        self.shapes.get(&id)
    }

    pub fn shapes(&self) -> impl Iterator<Item = &Shape> {
        self.shapes.values()
    }

    pub fn node(&self, c: &CellId) -> Option<&NodeRecord> {
        self.nodes.get(c)
    }

    pub fn node_mut(&mut self, c: &CellId) -> Option<&mut NodeRecord> {
        self.nodes.get_mut(c)
    }

    pub fn contains(&self, c: &CellId) -> bool {
        self.nodes.contains_key(c)
    }

    pub fn is_storing(&self, c: &CellId) -> bool {
        self.nodes.get(c).is_some_and(|n| !n.garrison.is_empty())
    }

    /// All present cells, by level then coordinates.
    pub fn cells(&self) -> impl Iterator<Item = &CellId> {
        self.present_by_level.iter().flat_map(|s| s.iter())
    }

    pub fn present_at(&self, level: u32) -> &BTreeSet<CellId> {
        &self.present_by_level[level as usize]
    }

    pub fn storing_at(&self, level: u32) -> &BTreeSet<CellId> {
        &self.storing_by_level[level as usize]
    }

    pub fn eps_cell_of(&self, cell: &CellId, p: &[f64]) -> EpsCellId {
        let lo = self.bx.cell_lo(cell);
        let side = self.bx.cell_side(cell.level);
        let m = self.grid;
        let mut grid = [0u32; MAX_DIM];
        for a in 0..self.bx.dim {
            let g = ((p[a] - lo[a]) * m as f64 / side).floor();
            grid[a] = g.clamp(0.0, (m - 1) as f64) as u32;
        }
        EpsCellId { cell: *cell, grid }
    }

    pub fn eps_record(&self, e: &EpsCellId) -> Option<&EpsRecord> {
        self.nodes.get(&e.cell).and_then(|n| n.eps.get(&e.grid))
    }

    /// Bounds `[lo, hi]` of an ε-cell.
    pub fn eps_bounds(&self, e: &EpsCellId) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let lo = self.bx.cell_lo(&e.cell);
        let w = self.bx.cell_side(e.cell.level) / self.grid as f64;
        let mut a = [0.0; MAX_DIM];
        let mut b = [0.0; MAX_DIM];
        for k in 0..self.bx.dim {
            a[k] = lo[k] + e.grid[k] as f64 * w;
            b[k] = a[k] + w;
        }
        (a, b)
    }

    fn family_of(&self, s: &Shape) -> Result<Vec<CellId>, EngineError> {
        let fam = self.bx.storing_family(s)?;
        Ok(match self.mode {
            TreeMode::Spanner => fam,
            TreeMode::Connectivity => vec![fam[0]],
        })
    }

    /// The cells whose relevance counter a shape holds: its whole center path
    /// in spanner mode, the storing cell and its ancestors in connectivity mode.
    fn kept_cells(&self, s: &Shape, storing: &CellId) -> Vec<CellId> {
        let start = match self.mode {
            TreeMode::Spanner => 0,
            TreeMode::Connectivity => storing.level,
        };
        (start..=self.bx.top_level).map(|l| self.bx.cell_at(s.center(), l)).collect()
    }

    pub fn insert_shape(&mut self, s: &Shape) -> Result<DeltaReport, EngineError> {
        if self.shapes.contains_key(&s.id) {
            return Err(EngineError::DuplicateId(s.id));
        }
        let family = self.family_of(s)?;
        let storing = family[0];
        let mut report = DeltaReport { family: family.clone(), ..Default::default() };
        let kept = self.kept_cells(s, &storing);
        for c in kept.iter().rev() {
            let node = self.nodes.entry(*c).or_insert_with(|| {
                report.created.push(*c);
                NodeRecord::default()
            });
            node.relevance += 1;
            if node.relevance == 1 {
                self.present_by_level[c.level as usize].insert(*c);
            }
        }
        let first_in_garrison = {
            let node = self.nodes.get_mut(&storing).expect("storing cell present");
            node.garrison.insert(s.id);
            node.garrison.len() == 1
        };
        if first_in_garrison {
            report.storing_toggled = true;
            self.storing_by_level[storing.level as usize].insert(storing);
            for l in storing.level..=self.bx.top_level {
                let a = storing.ancestor(l);
                self.nodes.get_mut(&a).expect("ancestor present").subtree_storing += 1;
            }
        }
        if self.mode == TreeMode::Spanner {
            for (k, c) in family.iter().enumerate() {
                let e = self.eps_cell_of(c, s.center());
                let node = self.nodes.get_mut(c).expect("family cell present");
                node.population.insert(s.id);
                let rec = node.eps.entry(e.grid).or_default();
                rec.pop.insert(s.id);
                if k == 0 {
                    rec.sub.insert(s.id);
                }
                report.eps_cells.push(e);
            }
        } else {
            report.eps_cells.push(self.eps_cell_of(&storing, s.center()));
        }
        self.shapes.insert(s.id, *s);
        Ok(report)
    }

    pub fn delete_shape(&mut self, id: ShapeId) -> Result<DeltaReport, EngineError> {
        let s = self.shapes.remove(&id).ok_or(EngineError::UnknownId(id))?;
        let family = self.family_of(&s)?;
        let storing = family[0];
        let mut report = DeltaReport { family: family.clone(), ..Default::default() };
        if self.mode == TreeMode::Spanner {
            for c in &family {
                let e = self.eps_cell_of(c, s.center());
                let node = self.nodes.get_mut(c).expect("family cell present");
                node.population.remove(&id);
                if let Some(rec) = node.eps.get_mut(&e.grid) {
                    rec.pop.remove(&id);
                    rec.sub.remove(&id);
                    if rec.pop.is_empty() {
                        node.eps.remove(&e.grid);
                    }
                }
                report.eps_cells.push(e);
            }
        } else {
            report.eps_cells.push(self.eps_cell_of(&storing, s.center()));
        }
        let emptied = {
            let node = self.nodes.get_mut(&storing).expect("storing cell present");
            node.garrison.remove(&id);
            node.garrison.is_empty()
        };
        if emptied {
            report.storing_toggled = true;
            self.storing_by_level[storing.level as usize].remove(&storing);
            for l in storing.level..=self.bx.top_level {
                let a = storing.ancestor(l);
                self.nodes.get_mut(&a).expect("ancestor present").subtree_storing -= 1;
            }
        }
        for c in self.kept_cells(&s, &storing) {
            let node = self.nodes.get_mut(&c).expect("kept cell present");
            node.relevance -= 1;
            if node.relevance == 0 {
                self.nodes.remove(&c);
                self.present_by_level[c.level as usize].remove(&c);
                report.removed.push(c);
            }
        }
        Ok(report)
    }

    /// Present cells of `c`'s size inside `3 * c`, including `c`.
    pub fn type1_partners(&self, c: &CellId) -> Vec<CellId> {
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for a in 0..self.bx.dim {
            lo[a] = c.coords[a] - 1;
            hi[a] = c.coords[a] + 1;
        }
        self.cells_in_range(c.level, &lo, &hi, false)
    }

    /// Largest `i` used by type-ii pairs: `ceil(log2 psi)`.
    pub fn type2_levels(&self) -> u32 {
        ceil_log2(self.psi)
    }

    /// Present cells `C'` with `|C'| = 2^(i-1)|c|` meeting `(2^(i+5)+1) * c`.
    pub fn type2_partners(&self, c: &CellId) -> Vec<(u32, CellId)> {
        let mut out = Vec::new();
        for i in 1..=self.type2_levels() {
            let level = c.level + i - 1;
            if level > self.bx.top_level {
                break;
            }
            let (lo, hi) = self.type2_forward_range(c, i);
            for p in self.cells_in_range(level, &lo, &hi, false) {
                out.push((i, p));
            }
        }
        out
    }

    /// Storing cells `C` for which `c` is a type-ii partner of index `i`.
    pub fn type2_sources(&self, c: &CellId) -> Vec<(u32, CellId)> {
        let mut out = Vec::new();
        for i in 1..=self.type2_levels() {
            if c.level + 1 < i {
                break;
            }
            let level = c.level + 1 - i;
            let (lo, hi) = type2_reverse_range(self.bx.dim, c, i);
            for p in self.cells_in_range(level, &lo, &hi, true) {
                debug_assert!(type2_related(self.bx.dim, &p, i, c));
                out.push((i, p));
            }
        }
        out
    }

    fn type2_forward_range(&self, c: &CellId, i: u32) -> ([i64; MAX_DIM], [i64; MAX_DIM]) {
        type2_forward_range(self.bx.dim, c, i)
    }

    /// Present (or storing) cells of `level` with coordinates in `[lo, hi]`,
    /// by enumeration or by scanning the level registry, whichever is smaller.
    pub fn cells_in_range(&self, level: u32, lo: &[i64], hi: &[i64], storing_only: bool) -> Vec<CellId> {
        let registry = if storing_only {
            &self.storing_by_level[level as usize]
        } else {
            &self.present_by_level[level as usize]
        };
        let n = self.bx.cells_per_axis(level);
        let mut clo = [0i64; MAX_DIM];
        let mut chi = [0i64; MAX_DIM];
        let mut volume: u128 = 1;
        for a in 0..self.bx.dim {
            clo[a] = lo[a].max(0);
            chi[a] = hi[a].min(n - 1);
            if clo[a] > chi[a] {
                return Vec::new();
            }
            volume = volume.saturating_mul((chi[a] - clo[a] + 1) as u128);
        }
        let dim = self.bx.dim;
        let inside = |c: &CellId| (0..dim).all(|a| c.coords[a] >= clo[a] && c.coords[a] <= chi[a]);
        if volume as usize > registry.len() || volume > u32::MAX as u128 {
            return registry.iter().filter(|c| inside(c)).copied().collect();
        }
        let mut out = Vec::new();
        let mut cur = clo;
        loop {
            let cell = CellId { level, coords: cur };
            if registry.contains(&cell) {
                out.push(cell);
            }
            let mut a = 0;
            loop {
                if a == dim {
                    return out;
                }
                cur[a] += 1;
                if cur[a] <= chi[a] {
                    break;
                }
                cur[a] = clo[a];
                a += 1;
            }
        }
    }

    /// Debug dump: one line per present cell `level coords |π| |Γ| marks`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in self.cells() {
            let n = &self.nodes[c];
            let coords: Vec<String> = c.coords[..self.bx.dim].iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                c.level,
                coords.join(","),
                n.population.len(),
                n.garrison.len(),
                n.marks
            ));
        }
        out
    }

    /// Σ_E |Γ_ε(E)| over all ε-cells; equals the number of shapes in spanner mode.
    pub fn subpopulation_total(&self) -> usize {
        self.nodes.values().flat_map(|n| n.eps.values()).map(|r| r.sub.len()).sum()
    }

    /// Sorted snapshot of the node set, for oracle comparisons.
    pub fn node_set(&self) -> BTreeSet<CellId> {
        self.nodes.keys().copied().collect()
    }
}

/// Coordinate range (inclusive) of cells of size `2^(i-1)|c|` that can meet
/// `(2^(i+5)+1) * c`. Coordinates are measured in half-sides of `c`.
pub fn type2_forward_range(dim: usize, c: &CellId, i: u32) -> ([i64; MAX_DIM], [i64; MAX_DIM]) {
    let step = 1i64 << i;
    let reach = 1i64 << (i + 5);
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for a in 0..dim {
        let x = c.coords[a];
        hi[a] = (2 * x + reach + 2).div_euclid(step);
        lo[a] = (2 * x - reach).div_euclid(step) - 1;
        // Tighten to the exact closed-overlap predicate.
        while (lo[a] + 1) * step < 2 * x - reach {
            lo[a] += 1;
        }
    }
    (lo, hi)
}

/// Inverse of [`type2_forward_range`]: cells `C` whose region reaches `big`.
pub fn type2_reverse_range(dim: usize, big: &CellId, i: u32) -> ([i64; MAX_DIM], [i64; MAX_DIM]) {
    let step = 1i64 << i;
    let reach = 1i64 << (i + 5);
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for a in 0..dim {
        let y = big.coords[a];
        // y*step <= 2x + reach + 2  and  (y+1)*step >= 2x - reach
        lo[a] = (y * step - reach - 2 + 1).div_euclid(2);
        hi[a] = ((y + 1) * step + reach).div_euclid(2);
    }
    (lo, hi)
}

/// Does the cell `big` (size `2^(i-1)|c|`) meet the closed region `(2^(i+5)+1) * c`?
pub fn type2_related(dim: usize, c: &CellId, i: u32, big: &CellId) -> bool {
    if big.level != c.level + i - 1 {
        return false;
    }
    let step = 1i64 << i;
    let reach = 1i64 << (i + 5);
    (0..dim).all(|a| {
        let x = c.coords[a];
        let y = big.coords[a];
        y * step <= 2 * x + reach + 2 && (y + 1) * step >= 2 * x - reach
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Region, Shape};
    use proptest::prelude::*;

    fn box16() -> BoxSpec {
        BoxSpec::for_psi(8.0, 2)
    }

    #[test]
    fn insert_creates_family_chain() {
        let mut t = QuadTree::new(box16(), TreeMode::Spanner, 8.0, 0.5);
        let s = Shape::disk(1, 5.5, 5.5, 2.5);
        let r = t.insert_shape(&s).unwrap();
        let bx = box16();
        let c2 = bx.cell_at(&[5.5, 5.5], 1);
        let c1 = bx.cell_at(&[5.5, 5.5], 0);
        assert_eq!(r.family, vec![c2, c1]);
        assert_eq!(t.node(&c2).unwrap().population.len(), 1);
        assert_eq!(t.node(&c2).unwrap().garrison.len(), 1);
        assert_eq!(t.node(&c1).unwrap().garrison.len(), 0);
        let e = t.eps_cell_of(&c2, &[5.5, 5.5]);
        assert_eq!(t.eps_record(&e).unwrap().sub.len(), 1);
        // Root down to the unit cell: 5 levels in [0,16]^2.
        assert_eq!(t.node_count(), 5);
        assert_eq!(r.created.len(), 5);
        assert_eq!(r.created[0], bx.root());

        let twin = Shape::disk(2, 5.5, 5.5, 2.5);
        let r2 = t.insert_shape(&twin).unwrap();
        assert!(r2.created.is_empty());
        assert_eq!(t.node(&c2).unwrap().population.len(), 2);
        assert!(matches!(t.insert_shape(&twin), Err(EngineError::DuplicateId(2))));
    }

    #[test]
    fn connectivity_mode_keeps_storing_cells_only() {
        let mut t = QuadTree::new(box16(), TreeMode::Connectivity, 8.0, 0.5);
        t.insert_shape(&Shape::disk(1, 5.5, 5.5, 2.5)).unwrap();
        let bx = box16();
        assert!(t.contains(&bx.cell_at(&[5.5, 5.5], 1)));
        assert!(!t.contains(&bx.cell_at(&[5.5, 5.5], 0)));
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.node(&bx.root()).unwrap().subtree_storing, 1);
    }

    #[test]
    fn delete_restores_prior_node_set() {
        let mut t = QuadTree::new(box16(), TreeMode::Spanner, 8.0, 0.5);
        t.insert_shape(&Shape::disk(1, 3.0, 3.0, 2.0)).unwrap();
        let before = t.node_set();
        t.insert_shape(&Shape::disk(2, 12.5, 9.0, 3.0)).unwrap();
        let r = t.delete_shape(2).unwrap();
        assert!(!r.removed.is_empty());
        assert_eq!(t.node_set(), before);
        assert!(matches!(t.delete_shape(2), Err(EngineError::UnknownId(2))));
    }

    #[test]
    fn shared_storing_cell_persists() {
        let mut t = QuadTree::new(box16(), TreeMode::Spanner, 8.0, 0.5);
        t.insert_shape(&Shape::disk(1, 5.5, 5.5, 2.5)).unwrap();
        t.insert_shape(&Shape::disk(2, 5.6, 5.4, 2.5)).unwrap();
        let c = box16().cell_at(&[5.5, 5.5], 1);
        t.delete_shape(1).unwrap();
        assert_eq!(t.node(&c).unwrap().garrison.len(), 1);
    }

    #[test]
    fn type1_examples() {
        let mut t = QuadTree::new(box16(), TreeMode::Spanner, 8.0, 0.5);
        t.insert_shape(&Shape::disk(1, 0.5, 0.5, 2.0)).unwrap();
        t.insert_shape(&Shape::disk(2, 1.5, 0.5, 2.0)).unwrap();
        let a = CellId::new(0, &[0, 0]);
        let b = CellId::new(0, &[1, 0]);
        assert_eq!(t.type1_partners(&a), vec![a, b]);
        assert_eq!(t.type1_partners(&b), vec![a, b]);
        for p in t.type1_partners(&CellId::new(1, &[0, 0])) {
            assert_eq!(p.level, 1);
        }
    }

    #[test]
    fn type2_levels_for_small_psi() {
        let t = QuadTree::new(BoxSpec::for_psi(4.0, 2), TreeMode::Spanner, 4.0, 0.5);
        assert_eq!(t.type2_levels(), 2);
        assert!(t.type2_partners(&CellId::new(0, &[0, 0])).is_empty());
    }

    #[test]
    fn eps_grid_guards_rounding() {
        assert_eq!(eps_grid(0.1), 10);
        assert_eq!(eps_grid(0.7 / 7.0), 10);
        assert_eq!(eps_grid(0.3), 4);
        assert_eq!(eps_grid(1.0), 1);
    }

    /// Oracle for the type-ii predicate using real boxes.
    fn region_oracle(bx: &BoxSpec, c: &CellId, i: u32, big: &CellId) -> bool {
        let r: Region = bx.neighborhood(c, (1u64 << (i + 5)) + 1);
        big.level == c.level + i - 1 && r.meets_box(&bx.cell_lo(big), &bx.cell_hi(big))
    }

    proptest! {
        #[test]
        fn type2_predicate_matches_region_oracle(x in 0i64..64, y in 0i64..64, i in 1u32..4, bx_ in 0i64..40, by_ in 0i64..40) {
            let bx = BoxSpec::for_psi(63.0, 2);
            let c = CellId::new(0, &[x, y]);
            let big = CellId::new(i - 1, &[bx_ % bx.cells_per_axis(i - 1), by_ % bx.cells_per_axis(i - 1)]);
            prop_assert_eq!(type2_related(2, &c, i, &big), region_oracle(&bx, &c, i, &big));
            let (lo, hi) = type2_forward_range(2, &c, i);
            let in_fwd = (0..2).all(|a| big.coords[a] >= lo[a] && big.coords[a] <= hi[a]);
            let (rlo, rhi) = type2_reverse_range(2, &big, i);
            let in_rev = (0..2).all(|a| c.coords[a] >= rlo[a] && c.coords[a] <= rhi[a]);
            prop_assert_eq!(in_fwd, type2_related(2, &c, i, &big));
            prop_assert_eq!(in_rev, type2_related(2, &c, i, &big));
        }

        #[test]
        fn minimality_and_partition(ops in proptest::collection::vec((0.0f64..16.0, 0.0f64..16.0, 2.0f64..4.0, any::<bool>()), 1..40)) {
            let bx = box16();
            let mut t = QuadTree::new(bx, TreeMode::Spanner, 8.0, 0.3);
            let mut live = Vec::new();
            for (k, (x, y, r, del)) in ops.into_iter().enumerate() {
                if del && !live.is_empty() {
                    let id = live.remove(k % live.len());
                    t.delete_shape(id).unwrap();
                } else {
                    let s = Shape::disk(k as u64, x, y, r);
                    t.insert_shape(&s).unwrap();
                    live.push(k as u64);
                }
                prop_assert_eq!(t.subpopulation_total(), t.len());
                let mut fresh = QuadTree::new(bx, TreeMode::Spanner, 8.0, 0.3);
                for s in t.shapes().copied().collect::<Vec<_>>() {
                    fresh.insert_shape(&s).unwrap();
                }
                prop_assert_eq!(fresh.node_set(), t.node_set());
                for c in t.cells() {
                    prop_assert_eq!(t.node(c), fresh.node(c));
                    if c.level < bx.top_level {
                        prop_assert!(t.contains(&c.parent()));
                    }
                }
                let bound = 4.0 / 3.0 * t.len() as f64 * (bx.top_level as f64 + 1.0);
                prop_assert!(t.node_count() as f64 <= bound.max(bx.top_level as f64 + 1.0));
            }
        }

        #[test]
        fn storing_cell_invariants(x in 0.0f64..16.0, y in 0.0f64..16.0, r in 2.0f64..4.0, px in 0.0f64..16.0, py in 0.0f64..16.0, pr in 2.0f64..4.0) {
            let bx = box16();
            let s = Shape::disk(1, x, y, r);
            let c = bx.storing_cell(&s).unwrap();
            prop_assert!(s.diameter() <= 4.0 * 2f64.sqrt() * bx.cell_side(c.level) + 1e-12);
            // Shapes in populations of neighboring equal-size cells intersect.
            let t = Shape::disk(2, px, py, pr);
            let fam_t = bx.storing_family(&t).unwrap();
            let fam_s = bx.storing_family(&s).unwrap();
            for a in &fam_s {
                for b in &fam_t {
                    if a.level == b.level && (0..2).all(|k| (a.coords[k] - b.coords[k]).abs() <= 1) {
                        prop_assert!(crate::geometry::intersects(&s, &t));
                    }
                }
            }
        }
    }
}
