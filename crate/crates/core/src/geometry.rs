//! Shapes, dyadic cells and the exact predicates shared by every engine.

use std::fmt;

use crate::error::GeomError;

/// Highest supported dimension. Disks are 2D only; cubes go up to this.
pub const MAX_DIM: usize = 4;

pub type ShapeId = u64;

/// Fixed-capacity coordinate vector; only the first `dim` entries are used.
pub type Coords = [f64; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeKind {
    Disk,
    Cube,
}

impl ShapeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeKind::Disk => "disk",
            ShapeKind::Cube => "cube",
        }
    }

    pub fn parse(s: &str) -> Option<ShapeKind> {
        match s {
            "disk" => Some(ShapeKind::Disk),
            "cube" | "hypercube" => Some(ShapeKind::Cube),
            _ => None,
        }
    }
}

/// A disk (center, radius) or an axis-aligned hypercube (center, side).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shape {
    pub id: ShapeId,
    pub kind: ShapeKind,
    pub dim: usize,
    pub center: Coords,
    /// Radius for disks, side length for cubes.
    pub extent: f64,
}

impl Shape {
    pub fn disk(id: ShapeId, x: f64, y: f64, radius: f64) -> Shape {
        let mut center = [0.0; MAX_DIM];
        center[0] = x;
        center[1] = y;
        Shape { id, kind: ShapeKind::Disk, dim: 2, center, extent: radius }
    }

    pub fn cube(id: ShapeId, center: &[f64], side: f64) -> Shape {
        assert!(!center.is_empty() && center.len() <= MAX_DIM, "unsupported dimension {}", center.len());
        let mut c = [0.0; MAX_DIM];
        c[..center.len()].copy_from_slice(center);
        Shape { id, kind: ShapeKind::Cube, dim: center.len(), center: c, extent: side }
    }

    /// Cube given by its lower corner instead of its center.
    pub fn cube_at_corner(id: ShapeId, corner: &[f64], side: f64) -> Shape {
        let center: Vec<f64> = corner.iter().map(|c| c + side / 2.0).collect();
        Shape::cube(id, &center, side)
    }

    /// Length of the largest axis-parallel segment inside the shape.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            ShapeKind::Disk => 2.0 * self.extent,
            ShapeKind::Cube => self.extent,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    /// Half-width of the axis-aligned bounding box.
    pub fn half_width(&self) -> f64 {
        match self.kind {
            ShapeKind::Disk => self.extent,
            ShapeKind::Cube => self.extent / 2.0,
        }
    }

    pub fn bbox_lo(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_width()
    }

    pub fn bbox_hi(&self, axis: usize) -> f64 {
        self.center[axis] + self.half_width()
    }

    /// Closed containment of an axis-aligned box `[lo, hi]`.
    pub fn contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self.kind {
            ShapeKind::Disk => {
                let mut far = 0.0;
                for a in 0..self.dim {
                    let d = (self.center[a] - lo[a]).abs().max((hi[a] - self.center[a]).abs());
                    far += d * d;
                }
                far <= self.extent * self.extent
            }
            ShapeKind::Cube => {
                let h = self.extent / 2.0;
                (0..self.dim).all(|a| lo[a] >= self.center[a] - h && hi[a] <= self.center[a] + h)
            }
        }
    }

    /// Closed intersection with an axis-aligned box `[lo, hi]`.
    pub fn meets_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self.kind {
            ShapeKind::Disk => {
                let mut near = 0.0;
                for a in 0..self.dim {
                    let c = self.center[a];
                    let d = if c < lo[a] {
                        lo[a] - c
                    } else if c > hi[a] {
                        c - hi[a]
                    } else {
                        0.0
                    };
                    near += d * d;
                }
                near <= self.extent * self.extent
            }
            ShapeKind::Cube => {
                let h = self.extent / 2.0;
                (0..self.dim).all(|a| lo[a] <= self.center[a] + h && hi[a] >= self.center[a] - h)
            }
        }
    }

    /// Is the closed box entirely inside the open interior of the shape?
    pub fn interior_contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self.kind {
            ShapeKind::Disk => {
                let mut far = 0.0;
                for a in 0..self.dim {
                    let d = (self.center[a] - lo[a]).abs().max((hi[a] - self.center[a]).abs());
                    far += d * d;
                }
                far < self.extent * self.extent
            }
            ShapeKind::Cube => {
                let h = self.extent / 2.0;
                (0..self.dim).all(|a| lo[a] > self.center[a] - h && hi[a] < self.center[a] + h)
            }
        }
    }

    /// Does the box meet the boundary of the shape?
    pub fn box_meets_boundary(&self, lo: &[f64], hi: &[f64]) -> bool {
        self.meets_box(lo, hi) && !self.interior_contains_box(lo, hi)
    }

    /// Text record `kind id cx cy [cz...] extent`.
    pub fn to_record(&self) -> String {
        let mut out = format!("{} {}", self.kind.as_str(), self.id);
        for c in self.center() {
            out.push_str(&format!(" {c}"));
        }
        out.push_str(&format!(" {}", self.extent));
        out
    }

    pub fn parse_record(line: &str) -> Result<Shape, GeomError> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() < 4 {
            return Err(GeomError::Parse(line.to_string()));
        }
        let kind = ShapeKind::parse(parts[0]).ok_or_else(|| GeomError::Parse(line.to_string()))?;
        let id: ShapeId = parts[1].parse().map_err(|_| GeomError::Parse(line.to_string()))?;
        let nums: Result<Vec<f64>, _> = parts[2..].iter().map(|p| p.parse::<f64>()).collect();
        let nums = nums.map_err(|_| GeomError::Parse(line.to_string()))?;
        let (coords, extent) = nums.split_at(nums.len() - 1);
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(GeomError::Parse(line.to_string()));
        }
        match kind {
            ShapeKind::Disk if coords.len() != 2 => Err(GeomError::Parse(line.to_string())),
            ShapeKind::Disk => Ok(Shape::disk(id, coords[0], coords[1], extent[0])),
            ShapeKind::Cube => Ok(Shape::cube(id, coords, extent[0])),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

/// Squared Euclidean distance between two centers.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Intersection test with closed boundaries; tangent shapes intersect.
///
/// # Panics
/// On mixed kinds or mismatched dimensions: shape sets are homogeneous.
pub fn intersects(a: &Shape, b: &Shape) -> bool {
    assert!(a.kind == b.kind, "intersects: mixed shape kinds {:?} and {:?}", a.kind, b.kind);
    assert!(a.dim == b.dim, "intersects: mixed dimensions");
    match a.kind {
        ShapeKind::Disk => {
            let r = a.extent + b.extent;
            dist2(a.center(), b.center()) <= r * r
        }
        // Interval form, so index structures comparing endpoints agree bit for bit.
        ShapeKind::Cube => (0..a.dim).all(|k| a.bbox_lo(k) <= b.bbox_hi(k) && b.bbox_lo(k) <= a.bbox_hi(k)),
    }
}

/// Edge weight in the intersection graph: distance between centers.
pub fn edge_weight(a: &Shape, b: &Shape) -> f64 {
    dist2(a.center(), b.center()).sqrt()
}

/// The dyadic box the quadtree splits. Cells at level `l` have side `unit * 2^l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxSpec {
    pub dim: usize,
    pub origin: Coords,
    pub unit: f64,
    pub top_level: u32,
}

impl BoxSpec {
    /// `[0, psi*]^dim` where `psi*` is the smallest power of two above `psi`.
    pub fn for_psi(psi: f64, dim: usize) -> BoxSpec {
        let top_level = psi_star_exponent(psi);
        BoxSpec { dim, origin: [0.0; MAX_DIM], unit: 1.0, top_level }
    }

    /// Box of side `side` centered at `center`; the unit is the first dyadic
    /// split of the box that is at most 1.
    pub fn centered(center: &[f64], side: f64) -> BoxSpec {
        let mut top_level = 0u32;
        let mut unit = side;
        while unit > 1.0 {
            unit /= 2.0;
            top_level += 1;
        }
        let mut origin = [0.0; MAX_DIM];
        for (o, c) in origin.iter_mut().zip(center) {
            *o = c - side / 2.0;
        }
        BoxSpec { dim: center.len(), origin, unit, top_level }
    }

    pub fn side(&self) -> f64 {
        self.cell_side(self.top_level)
    }

    pub fn cell_side(&self, level: u32) -> f64 {
        self.unit * (1u64 << level) as f64
    }

    /// Number of cells per axis at `level`.
    pub fn cells_per_axis(&self, level: u32) -> i64 {
        1i64 << (self.top_level - level)
    }

    /// Half-open membership `[origin, origin + side)`.
    pub fn contains_point(&self, p: &[f64]) -> bool {
        let side = self.side();
        (0..self.dim).all(|a| p[a] >= self.origin[a] && p[a] < self.origin[a] + side)
    }

    pub fn root(&self) -> CellId {
        CellId { level: self.top_level, coords: [0; MAX_DIM] }
    }

    /// The cell at `level` containing `p` (half-open rule).
    pub fn cell_at(&self, p: &[f64], level: u32) -> CellId {
        let side = self.cell_side(level);
        let n = self.cells_per_axis(level);
        let mut coords = [0i64; MAX_DIM];
        for a in 0..self.dim {
            let c = ((p[a] - self.origin[a]) / side).floor() as i64;
            coords[a] = c.clamp(0, n - 1);
        }
        CellId { level, coords }
    }

    pub fn cell_lo(&self, c: &CellId) -> Coords {
        let side = self.cell_side(c.level);
        let mut lo = [0.0; MAX_DIM];
        for a in 0..self.dim {
            lo[a] = self.origin[a] + c.coords[a] as f64 * side;
        }
        lo
    }

    pub fn cell_hi(&self, c: &CellId) -> Coords {
        let side = self.cell_side(c.level);
        let mut hi = self.cell_lo(c);
        for v in hi.iter_mut().take(self.dim) {
            *v += side;
        }
        hi
    }

    pub fn cell_center(&self, c: &CellId) -> Coords {
        let half = self.cell_side(c.level) / 2.0;
        let mut m = self.cell_lo(c);
        for v in m.iter_mut().take(self.dim) {
            *v += half;
        }
        m
    }

    pub fn cell_contains_point(&self, c: &CellId, p: &[f64]) -> bool {
        let lo = self.cell_lo(c);
        let hi = self.cell_hi(c);
        (0..self.dim).all(|a| p[a] >= lo[a] && p[a] < hi[a])
    }

    pub fn shape_contains_cell(&self, s: &Shape, c: &CellId) -> bool {
        s.contains_box(&self.cell_lo(c), &self.cell_hi(c))
    }

    /// The box `k * C`: side `k |C|`, same center as `C`.
    ///
    /// # Panics
    /// When `k` is even or zero.
    pub fn neighborhood(&self, c: &CellId, k: u64) -> Region {
        assert!(k % 2 == 1, "neighborhood factor must be odd, got {k}");
        Region {
            dim: self.dim,
            center: self.cell_center(c),
            half_width: k as f64 * self.cell_side(c.level) / 2.0,
        }
    }

    /// Largest dyadic cell containing the center of `s` and contained in `s`.
    pub fn storing_cell(&self, s: &Shape) -> Result<CellId, GeomError> {
        let fam = self.storing_family(s)?;
        Ok(fam[0])
    }

    /// Storing cell followed by its center-containing descendants down to level 0.
    pub fn storing_family(&self, s: &Shape) -> Result<Vec<CellId>, GeomError> {
        if s.dim != self.dim {
            return Err(GeomError::Dimension { expected: self.dim, got: s.dim });
        }
        if !self.contains_point(s.center()) {
            return Err(GeomError::OutsideBox(s.id));
        }
        let mut chain = Vec::new();
        let mut level = 0;
        loop {
            let cell = self.cell_at(s.center(), level);
            if !self.shape_contains_cell(s, &cell) {
                break;
            }
            chain.push(cell);
            if level == self.top_level {
                break;
            }
            level += 1;
        }
        if chain.is_empty() {
            return Err(GeomError::TooSmall(s.id));
        }
        chain.reverse();
        Ok(chain)
    }
}

/// Smallest `k` with `2^k > psi`.
pub fn psi_star_exponent(psi: f64) -> u32 {
    let mut k = 0u32;
    while ((1u64 << k) as f64) <= psi {
        k += 1;
    }
    k
}

/// `ceil(log2 psi)`, at least 1.
pub fn ceil_log2(psi: f64) -> u32 {
    let mut k = 0u32;
    while ((1u64 << k) as f64) < psi {
        k += 1;
    }
    k.max(1)
}

/// A dyadic quadtree cell: level plus integer grid coordinates in its box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub level: u32,
    pub coords: [i64; MAX_DIM],
}

impl CellId {
    pub fn new(level: u32, coords: &[i64]) -> CellId {
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        CellId { level, coords: c }
    }

    pub fn parent(&self) -> CellId {
        let mut coords = self.coords;
        for c in coords.iter_mut() {
            *c = c.div_euclid(2);
        }
        CellId { level: self.level + 1, coords }
    }

    /// Ancestor at `level` (which must be at least `self.level`).
    pub fn ancestor(&self, level: u32) -> CellId {
        let shift = level - self.level;
        let mut coords = self.coords;
        for c in coords.iter_mut() {
            *c >>= shift;
        }
        CellId { level, coords }
    }

    pub fn is_ancestor_or_self_of(&self, other: &CellId) -> bool {
        other.level <= self.level && other.ancestor(self.level) == *self
    }

    /// Stable 64-bit key used for deterministic labels.
    pub fn key(&self) -> u64 {
        let mut h = crate::mix64(0x9e37_79b9_7f4a_7c15u64 ^ self.level as u64);
        for c in self.coords {
            h = crate::mix64(h ^ c as u64);
        }
        h
    }

    pub fn children(&self, dim: usize) -> impl Iterator<Item = CellId> + '_ {
        let level = self.level - 1;
        (0..(1u32 << dim)).map(move |mask| {
            let mut coords = [0i64; MAX_DIM];
            for (a, c) in coords.iter_mut().enumerate().take(dim) {
                *c = self.coords[a] * 2 + ((mask >> a) & 1) as i64;
            }
            CellId { level, coords }
        })
    }
}

/// Axis-aligned box given by center and half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub dim: usize,
    pub center: Coords,
    pub half_width: f64,
}

impl Region {
    pub fn lo(&self) -> Coords {
        let mut lo = self.center;
        for v in lo.iter_mut().take(self.dim) {
            *v -= self.half_width;
        }
        lo
    }

    pub fn hi(&self) -> Coords {
        let mut hi = self.center;
        for v in hi.iter_mut().take(self.dim) {
            *v += self.half_width;
        }
        hi
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        (0..self.dim).all(|a| (p[a] - self.center[a]).abs() <= self.half_width)
    }

    /// Closed overlap with `[lo, hi]`.
    pub fn meets_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        (0..self.dim).all(|a| lo[a] <= self.center[a] + self.half_width && hi[a] >= self.center[a] - self.half_width)
    }

    /// Closed containment of `[lo, hi]`.
    pub fn contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        (0..self.dim).all(|a| lo[a] >= self.center[a] - self.half_width && hi[a] <= self.center[a] + self.half_width)
    }
}
