//! Static force-prediction models for fiber-reinforced elastomeric actuators.
//!
//! A fiber-reinforced elastomeric enclosure (FREE) is a cylindrical rubber
//! tube wound with a helical fiber family. Pressurizing it produces coupled
//! axial force and axial moment that depend on the imposed length and twist.
//! This crate implements three static models of that relationship and the
//! machinery to fit and cross-evaluate them:
//!
//! * [`lumped`] — kinematically constrained geometry with a linear wall
//!   stiffness matrix (3 fitted parameters),
//! * [`continuum`] — incompressible hyperelastic thick-walled tube with a
//!   homogenized extensible fiber (2 fitted parameters),
//! * [`neural`] — a shallow 7-input / 6-neuron tanh / 2-output network
//!   trained with Levenberg–Marquardt (62 fitted parameters),
//!
//! plus [`fitting`] (constrained parameter identification), [`bench`]
//! (synthetic data generation, train–test heatmaps, numerical inversion)
//! and the shared data model in [`types`], [`dataset`] and [`metric`].
//!
//! All internal computation is in SI units (m, rad, Pa, N, N·m). Conversion
//! to the field units used in data files (mm, degrees, kPa, N·mm) happens
//! only at the I/O boundary; see [`units`].

pub mod bench;
pub mod continuum;
pub mod dataset;
pub mod fitting;
pub mod lumped;
pub mod metric;
pub mod model;
pub mod neural;
pub mod numerics;
pub mod types;
pub mod units;

pub use dataset::Dataset;
pub use metric::error_metric;
pub use model::{ForceModel, ModelParams, ModelTag, PredictionError};
pub use types::{CoreError, FreeDesign, GeneralizedForce, KinematicState, LoadRecord};
