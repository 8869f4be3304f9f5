//! Desk-scale numerical laboratory for restricted projection experiments.
//!
//! The crate is organised around six subsystems:
//!
//! * [`geometry`] — parametrised direction manifolds in the sphere, tangent
//!   frames, principal and sectional curvature, non-degeneracy sweeps.
//! * [`fields`] — C² scalar fields on boxes, families induced by projecting a
//!   point set along a chart, cinematic-constant estimation and the
//!   transversal/tangent classification of field pairs.
//! * [`dyadic`] — exact δ-covering numbers on dyadic grids, (δ,s,C)-set
//!   spread measurement, subset extraction and test-set generators.
//! * [`intersect`] — vertical δ-neighborhoods of graphs, quadrature
//!   intersection measures, gradient-flow foliations, one-variable sublevel
//!   intervals and polar slicing.
//! * [`furstenberg`] — δ-discretized configurations, the L² energy of the
//!   slab counting function, Cauchy–Schwarz union bounds and the incidence
//!   lower-bound check.
//! * [`experiments`] — box-counting dimension estimates and end-to-end
//!   projection-dimension sweeps.
//!
//! All randomness is driven by explicit seeds and every pipeline is
//! deterministic: identical inputs produce byte-identical reports.

pub mod dyadic;
pub mod experiments;
pub mod fields;
pub mod furstenberg;
pub mod geometry;
pub mod intersect;
pub mod numerics;

pub use dyadic::{DyadicSet, SpreadReport};
pub use experiments::{DimensionEstimate, ExperimentSpec};
pub use fields::{CinematicReport, FunctionFamily, ScalarField, TangencyClassification};
pub use furstenberg::{Configuration, EnergyReport};
pub use geometry::{make_builtin_chart, CurvatureReport, ManifoldChart, TangentFrame};
pub use intersect::{FlowFoliation, IntersectionReport};
pub use numerics::BoxDomain;

/// Crate-wide error type; variants mirror the failure modes of the
/// individual operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate chart: jacobian is rank-deficient at {point:?}")]
    DegenerateChart { point: Vec<f64> },
    #[error("non-transverse chart: base point lies in the tangent span at {point:?}")]
    NonTransverse { point: Vec<f64> },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("fields do not share a common domain")]
    DomainMismatch,
    #[error("invalid scale: level {requested} is finer than the stored level {stored}")]
    InvalidScale { requested: u32, stored: u32 },
    #[error("scale too fine: {0}")]
    TooFine(String),
    #[error("resolution {resolution} too coarse; need at most {max}")]
    TooCoarse { resolution: f64, max: f64 },
    #[error("cinematic violation: no trichotomy case holds on subcube centred at {center:?}")]
    CinematicViolation { center: Vec<f64> },
    #[error("flow degenerate from seed {seed:?}: |grad h| = {grad_norm:e} below tolerance")]
    FlowDegenerate { seed: Vec<f64>, grad_norm: f64 },
    #[error("sublevel mode precondition failed: {0}")]
    ModePrecondition(String),
    #[error("cell {cell:?} of member {member} lies off its graph neighborhood")]
    MisalignedCell { member: usize, cell: Vec<u32> },
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("out of regime: {0}")]
    OutOfRegime(String),
    #[error("insufficient scales: need at least {need}, got {got}")]
    InsufficientScales { need: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
