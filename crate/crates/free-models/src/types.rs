//! Domain types shared by every model: actuator designs, kinematic states,
//! generalized forces and single load measurements.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units;

/// Errors raised by the shared data model.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid kinematic state: {0}")]
    InvalidState(String),
    #[error("invalid load record: {0}")]
    InvalidRecord(String),
    #[error("no admissible records")]
    EmptyDataset,
    #[error("degenerate normalization: maximal measured |F| and |M| must be positive")]
    DegenerateNormalization,
    #[error("prediction count {got} does not match admissible record count {expected}")]
    PredictionCount { expected: usize, got: usize },
    #[error("partition fractions must sum to 1 (got {0})")]
    BadFractions(f64),
    #[error("need at least {needed} admissible records, found {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("bad CSV header: {0}")]
    CsvSchema(String),
    #[error("line {line}: {msg}")]
    CsvRow { line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Unloaded geometry of one actuator: fiber angle and tube dimensions.
///
/// Stored in SI (radians, meters). Designs with axial (0°) or
/// circumferential (90°) fibers are rejected: both degenerate the helix
/// kinematics that every model builds on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeDesign {
    gamma: f64,
    length: f64,
    inner_radius: f64,
    outer_radius: f64,
}

impl FreeDesign {
    /// Build a design from SI quantities (radians, meters).
    pub fn new(
        gamma_rad: f64,
        length_m: f64,
        inner_radius_m: f64,
        outer_radius_m: f64,
    ) -> Result<Self, CoreError> {
        if !(gamma_rad.is_finite() && gamma_rad > 0.0 && gamma_rad < std::f64::consts::FRAC_PI_2) {
            return Err(CoreError::InvalidDesign(format!(
                "fiber angle must lie strictly between 0 and pi/2 rad, got {gamma_rad}"
            )));
        }
        if !(length_m.is_finite() && length_m > 0.0) {
            return Err(CoreError::InvalidDesign(format!(
                "length must be positive, got {length_m} m"
            )));
        }
        if !(inner_radius_m.is_finite()
            && outer_radius_m.is_finite()
            && inner_radius_m > 0.0
            && inner_radius_m < outer_radius_m)
        {
            return Err(CoreError::InvalidDesign(format!(
                "radii must satisfy 0 < Ri < Ro, got Ri = {inner_radius_m} m, Ro = {outer_radius_m} m"
            )));
        }
        Ok(Self {
            gamma: gamma_rad,
            length: length_m,
            inner_radius: inner_radius_m,
            outer_radius: outer_radius_m,
        })
    }

    /// Build a design from data-file units (degrees, millimeters).
    pub fn from_io(
        gamma_deg: f64,
        length_mm: f64,
        inner_radius_mm: f64,
        outer_radius_mm: f64,
    ) -> Result<Self, CoreError> {
        Self::new(
            units::deg_to_rad(gamma_deg),
            units::mm_to_m(length_mm),
            units::mm_to_m(inner_radius_mm),
            units::mm_to_m(outer_radius_mm),
        )
    }

    /// Test-only escape hatch used by mirror-symmetry property tests, which
    /// need a fiber angle of the opposite handedness (negative gamma).
    #[doc(hidden)]
    pub fn new_unchecked(gamma: f64, length: f64, inner_radius: f64, outer_radius: f64) -> Self {
        Self {
            gamma,
            length,
            inner_radius,
            outer_radius,
        }
    }

    /// Fiber angle from the tube axis (rad).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Unloaded length (m).
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Unloaded inner radius (m).
    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// Unloaded outer radius (m).
    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }
}

/// Generalized coordinates of a loaded actuator: current length `l` (m) and
/// end-to-end twist `phi` (rad, zero in the unloaded state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    length: f64,
    twist: f64,
}

impl KinematicState {
    pub fn new(length_m: f64, twist_rad: f64) -> Result<Self, CoreError> {
        if !(length_m.is_finite() && length_m > 0.0) {
            return Err(CoreError::InvalidState(format!(
                "length must be positive, got {length_m} m"
            )));
        }
        if !twist_rad.is_finite() {
            return Err(CoreError::InvalidState(format!(
                "twist must be finite, got {twist_rad}"
            )));
        }
        Ok(Self {
            length: length_m,
            twist: twist_rad,
        })
    }

    /// State from offsets relative to a design's unloaded configuration.
    pub fn from_deltas(design: &FreeDesign, dl_m: f64, dphi_rad: f64) -> Result<Self, CoreError> {
        Self::new(design.length() + dl_m, dphi_rad)
    }

    /// Unloaded reference configuration of a design: `l = L`, `phi = 0`.
    pub fn reference(design: &FreeDesign) -> Self {
        Self {
            length: design.length(),
            twist: 0.0,
        }
    }

    /// Current length (m).
    pub fn length(&self) -> f64 {
        self.length
    }

    /// End-to-end twist (rad).
    pub fn twist(&self) -> f64 {
        self.twist
    }

    /// Axial stretch `lambda_z = l / L`.
    pub fn stretch(&self, design: &FreeDesign) -> f64 {
        self.length / design.length()
    }

    /// Deformation along the generalized coordinates, `[l - L, phi]`.
    pub fn deltas(&self, design: &FreeDesign) -> Vector2<f64> {
        Vector2::new(self.length - design.length(), self.twist)
    }
}

/// Generalized force conjugate to the kinematic state: axial force (N) and
/// axial moment (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedForce {
    /// Axial force (N).
    pub force: f64,
    /// Axial moment (N·m).
    pub moment: f64,
}

impl GeneralizedForce {
    pub const ZERO: Self = Self {
        force: 0.0,
        moment: 0.0,
    };

    pub fn new(force_n: f64, moment_nm: f64) -> Result<Self, CoreError> {
        if !(force_n.is_finite() && moment_nm.is_finite()) {
            return Err(CoreError::InvalidRecord(format!(
                "force components must be finite, got F = {force_n}, M = {moment_nm}"
            )));
        }
        Ok(Self {
            force: force_n,
            moment: moment_nm,
        })
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.force, self.moment)
    }
}

/// One measurement: which sample, its imposed state and pressure, the
/// measured generalized force, and whether the sample had buckled.
///
/// Buckled records are carried through serialization but excluded from all
/// fitting and evaluation via [`crate::dataset::Dataset::unbuckled`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub sample_id: String,
    pub design: FreeDesign,
    pub state: KinematicState,
    /// Gauge pressure (Pa).
    pub pressure: f64,
    pub tau: GeneralizedForce,
    pub buckled: bool,
}

impl LoadRecord {
    pub fn new(
        sample_id: impl Into<String>,
        design: FreeDesign,
        state: KinematicState,
        pressure_pa: f64,
        tau: GeneralizedForce,
        buckled: bool,
    ) -> Result<Self, CoreError> {
        if !(pressure_pa.is_finite() && pressure_pa >= 0.0) {
            return Err(CoreError::InvalidRecord(format!(
                "gauge pressure must be non-negative, got {pressure_pa} Pa"
            )));
        }
        Ok(Self {
            sample_id: sample_id.into(),
            design,
            state,
            pressure: pressure_pa,
            tau,
            buckled,
        })
    }
}
