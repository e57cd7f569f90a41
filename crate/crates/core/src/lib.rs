//! Shape descriptors predicted directly from 3D volumes.
//!
//! The crate covers the whole pipeline: correspondence populations and their
//! PCA shape space ([`shape`]), shape-space data augmentation with Gaussian
//! mixtures and thin-plate-spline image warping ([`augment`]), volumes and a
//! synthetic population generator ([`volume`]), a from-scratch volumetric CNN
//! and recurrence MLP ([`learn`]), validation statistics ([`stats`]) and
//! surface meshes ([`mesh`]).
//!
//! Correspondences are taken as already registered; no alignment is done.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod augment;
pub mod error;
pub mod learn;
pub mod mesh;
pub mod seeding;
pub mod shape;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};

/// Current on-disk format version for every JSON artifact.
pub const FORMAT_VERSION: u32 = 1;
