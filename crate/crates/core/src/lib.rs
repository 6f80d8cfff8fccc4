//! Camera relocalization from pairwise relative pose estimates.
//!
//! A query image is localized against a database of posed images: the
//! nearest database images are retrieved, a relative pose (rotation and
//! unit translation direction) is estimated between the query and each of
//! them, and the estimates are fused with the known database poses into an
//! absolute 6-DoF pose. Translation comes from triangulating pairs of
//! direction rays and voting; rotation from per-neighbor hypotheses and
//! consensus.
//!
//! Geometry and fusion are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar type. Dataset I/O, retrieval and evaluation
//! work in `f64`.

pub mod eval;
pub mod fusion;
pub mod geom;
pub mod relpose;
pub mod retrieval;
pub mod rng;
pub mod scalar;
pub mod scene;
pub mod synth;

pub use scalar::Real;

pub type Quatd = geom::Quat<f64>;
pub type Quatf = geom::Quat<f32>;
pub type Vec3d = geom::Vec3<f64>;
pub type Vec3f = geom::Vec3<f32>;
pub type Rayd = geom::Ray<f64>;
pub type Rayf = geom::Ray<f32>;
pub type Posed = scene::Pose<f64>;
pub type Posef = scene::Pose<f32>;
pub type RelativePosed = relpose::RelativePoseEstimate<f64>;
pub type RelativePosef = relpose::RelativePoseEstimate<f32>;
pub type Observationd = fusion::NeighborObservation<f64>;
pub type Observationf = fusion::NeighborObservation<f32>;
pub type LocalizationResultd = fusion::LocalizationResult<f64>;
