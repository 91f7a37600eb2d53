//! Seeded update sequences and their text format.
//!
//! ```text
//! v1 <d> <psi> <seed>
//! I <id> <kind> <c1> .. <cd> <extent>
//! D <id>
//! ```

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Shape, ShapeId, ShapeKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Insert(Shape),
    Delete(ShapeId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Workload {
    pub dim: usize,
    pub psi: f64,
    pub seed: u64,
    pub ops: Vec<Op>,
}

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn bad(line: usize, msg: impl Into<String>) -> WorkloadError {
    WorkloadError::Parse { line, msg: msg.into() }
}

impl Workload {
    pub fn to_text(&self) -> String {
        let mut out = format!("v1 {} {} {}\n", self.dim, self.psi, self.seed);
        for op in &self.ops {
            match op {
                Op::Insert(s) => {
                    write!(out, "I {} {}", s.id, s.kind.as_str()).unwrap();
                    for c in s.center() {
                        write!(out, " {c}").unwrap();
                    }
                    writeln!(out, " {}", s.extent).unwrap();
                }
                Op::Delete(id) => writeln!(out, "D {id}").unwrap(),
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Workload, WorkloadError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty workload"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "v1" {
            return Err(bad(1, format!("bad header {header:?}")));
        }
        let dim: usize = h[1].parse().map_err(|_| bad(1, "bad dimension"))?;
        let psi: f64 = h[2].parse().map_err(|_| bad(1, "bad psi"))?;
        let seed: u64 = h[3].parse().map_err(|_| bad(1, "bad seed"))?;
        let mut ops = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts[0] {
                "D" if parts.len() == 2 => ops.push(Op::Delete(parts[1].parse().map_err(|_| bad(n, "bad id"))?)),
                "I" if parts.len() == dim + 4 => {
                    let id: ShapeId = parts[1].parse().map_err(|_| bad(n, "bad id"))?;
                    let kind = ShapeKind::parse(parts[2]).ok_or_else(|| bad(n, "bad kind"))?;
                    let nums: Vec<f64> = parts[3..].iter().map(|p| p.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(n, "bad number"))?;
                    let (c, extent) = nums.split_at(dim);
                    let s = match kind {
                        ShapeKind::Disk if dim == 2 => Shape::disk(id, c[0], c[1], extent[0]),
                        ShapeKind::Disk => return Err(bad(n, "disks are two-dimensional")),
                        ShapeKind::Cube => Shape::cube(id, c, extent[0]),
                    };
                    ops.push(Op::Insert(s));
                }
                _ => return Err(bad(n, format!("bad record {line:?}"))),
            }
        }
        Ok(Workload { dim, psi, seed, ops })
    }

    pub fn inserts(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, Op::Insert(_))).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    /// Number of operations.
    pub n: usize,
    pub psi: f64,
    pub dim: usize,
    pub kind: ShapeKind,
    /// Probability that an operation deletes a live shape.
    pub churn: f64,
    /// Centers are uniform in `[origin, origin + region]^d`.
    pub origin: f64,
    pub region: f64,
}

impl GenParams {
    /// Centers over `[0, Ψ*)^d`.
    pub fn new(seed: u64, n: usize, psi: f64, dim: usize, kind: ShapeKind, churn: f64) -> GenParams {
        let side = (1u64 << crate::geometry::psi_star_exponent(psi)) as f64;
        GenParams { seed, n, psi, dim, kind, churn, origin: 0.0, region: side }
    }

    pub fn with_region(mut self, origin: f64, region: f64) -> GenParams {
        self.origin = origin;
        self.region = region;
        self
    }
}

pub fn generate(p: &GenParams) -> Workload {
    assert!(p.kind == ShapeKind::Cube || p.dim == 2, "disks are two-dimensional");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut live: Vec<ShapeId> = Vec::new();
    let mut ops = Vec::with_capacity(p.n);
    let mut next: ShapeId = 0;
    for _ in 0..p.n {
        if !live.is_empty() && rng.gen_bool(p.churn) {
            let k = rng.gen_range(0..live.len());
            ops.push(Op::Delete(live.swap_remove(k)));
            continue;
        }
        // Half-open upper end keeps centers inside the box.
        let c: Vec<f64> = (0..p.dim).map(|_| p.origin + rng.gen_range(0.0..p.region)).collect();
        let d = rng.gen_range(4.0..=p.psi);
        let s = match p.kind {
            ShapeKind::Disk => Shape::disk(next, c[0], c[1], d / 2.0),
            ShapeKind::Cube => Shape::cube(next, &c, d),
        };
        ops.push(Op::Insert(s));
        live.push(next);
        next += 1;
    }
    Workload { dim: p.dim, psi: p.psi, seed: p.seed, ops }
}

/// Disks of radius 2 on a grid of spacing 4.5, centers within `Ψ/2 + 1.5` of
/// the center of a disk of diameter `Ψ` (id 0). They are pairwise disjoint,
/// so every one of them needs a spanner edge to the big disk.
pub fn star_shapes(psi: f64) -> (Shape, Vec<Shape>) {
    let side = (1u64 << crate::geometry::psi_star_exponent(psi)) as f64;
    let (cx, cy, r) = (side / 2.0, side / 2.0, psi / 2.0);
    let big = Shape::disk(0, cx, cy, r);
    let step = 4.5;
    let reach = r + 1.5;
    let k = (reach / step).floor() as i64;
    let mut small = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let (x, y) = (cx + i as f64 * step, cy + j as f64 * step);
            if (x - cx).hypot(y - cy) <= reach {
                small.push(Shape::disk(small.len() as ShapeId + 1, x, y, 2.0));
            }
        }
    }
    (big, small)
}

/// The small disks, then `rounds` insert/delete pairs of the big disk.
pub fn star(psi: f64, rounds: usize) -> Workload {
    let (big, small) = star_shapes(psi);
    let mut ops: Vec<Op> = small.into_iter().map(Op::Insert).collect();
    for _ in 0..rounds {
        ops.push(Op::Insert(big));
        ops.push(Op::Delete(big.id));
    }
    Workload { dim: 2, psi, seed: 0, ops }
}
