//! Dynamic (1+ε)-spanners and connectivity oracles for intersection graphs of
//! disks and axis-aligned hypercubes with diameters in `[4, Ψ]`.

pub mod connectivity;
pub mod dynconn;
pub mod error;
pub mod euclid;
pub mod focused;
pub mod geometry;
pub mod index;
pub mod matching;
pub mod oracle;
pub mod persistence;
pub mod quadtree;
pub mod spanner;
pub mod workload;

pub use error::{EngineError, GeomError};
pub use geometry::{edge_weight, intersects, BoxSpec, CellId, Region, Shape, ShapeId, ShapeKind};

/// SplitMix64 finalizer; the crate's only hash for deterministic labels and priorities.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
