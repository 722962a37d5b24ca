//! Raster-domain analysis toolkit: Whitney decompositions, separation
//! certificates, John-constant estimation, end-measure criteria, and
//! Korn / divergence-equation constants on 2D and 3D binary rasters.
//!
//! The pipeline runs on a [`domain::RasterDomain`] (a binary mask with grid
//! spacing and origin), built either from analytic generators
//! ([`generate::DomainSpec`]) or loaded from a `KDL1`/PBM file ([`io`]).
//! On top of the raster sit:
//!
//! * [`distance`] — exact Euclidean distance transform (center-to-center),
//! * [`whitney`] — dyadic Whitney decomposition plus invariant checking,
//! * [`curve`] — discrete curves, loop removal, cube-level simplification,
//! * [`separation`] — separating-ball dichotomy checks and certificates,
//! * [`john`] — direct John-constant search and the end-measure criterion,
//! * [`field`], [`korn`], [`diveq`], [`duality`] — vector fields, Korn
//!   constants, divergence solvers, inf-sup constants and the cross-check
//!   chain tying them together,
//! * [`sweep`], [`analyze`] — deterministic CSV parameter sweeps,
//! * [`svg`] — diagnostic rendering.

pub mod analyze;
pub mod components;
pub mod curve;
pub mod distance;
pub mod diveq;
pub mod domain;
pub mod duality;
pub mod error;
pub mod field;
pub mod generate;
pub mod grid;
pub mod io;
pub mod john;
pub mod korn;
pub mod report;
pub mod separation;
pub mod sparse;
pub mod svg;
pub mod sweep;
pub mod whitney;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
