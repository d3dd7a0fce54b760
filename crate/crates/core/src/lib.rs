//! Billiards inside smooth strictly convex hypersurfaces of `R^d`.
//!
//! The crate covers the billiard ball map, the second derivatives of the
//! chord-length generating function, the block-tridiagonal second variation
//! of orbit segments, Jacobi fields and conjugate points, and a set of
//! scripted numerical experiments built on top of them.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod output;
pub mod surface;
pub mod variation;

pub use dynamics::{billiard_step, orbit, reflect, ChordData, OrbitSegment, PhasePoint};
pub use error::{Error, Result};
pub use surface::{ImplicitField, Point, Surface, SurfaceKind, TangentFrame};
