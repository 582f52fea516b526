//! Reduced-dimension robust Capon beamforming.
//!
//! The crate combines robust Capon beamformers over ellipsoidal (and
//! spherical) steering-vector uncertainty sets with data-adaptive Krylov
//! dimension reduction: powers-of-R (non-orthogonal and orthogonal bases)
//! and the conjugate-gradient transform, whose diagonal reduced covariance
//! admits a solver needing a single reduced-dimension EVD.
//!
//! Module map:
//! - [`numerics`]: Hermitian EVD, square-root factors, pseudo-inverse, null spaces.
//! - [`array`]: planar-array geometry, steering vectors, covariance synthesis, snapshots.
//! - [`uncertainty`]: ellipsoids, spheres, and their propagation through a reducer.
//! - [`reduction`]: the three Krylov reducers and their flop model.
//! - [`solver`]: element-space RCB, reduced-dimension RCB, the fast CG solver, MVDR, SINR.
//! - [`harness`]: experiment plans, Monte-Carlo driver, complexity tables, CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting guards are intentional

pub mod array;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod reduction;
pub mod solver;
pub mod uncertainty;

pub use error::{Error, Result};
