use thiserror::Error;

use crate::geometry::ShapeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("center of shape {0} lies outside the box")]
    OutsideBox(ShapeId),
    #[error("shape {0} contains no unit cell around its center")]
    TooSmall(ShapeId),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("shape {0} has a non-finite coordinate")]
    NonFinite(ShapeId),
    #[error("cannot parse shape record {0:?}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("shape id {0} is already live")]
    DuplicateId(ShapeId),
    #[error("shape id {0} is not live")]
    UnknownId(ShapeId),
    #[error("shape {id} has diameter {diameter} outside [4, {psi}]")]
    Diameter { id: ShapeId, diameter: f64, psi: f64 },
    #[error("shape kind or dimension differs from the rest of the set")]
    Heterogeneous,
}
