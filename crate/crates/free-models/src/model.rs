//! Common interface over the three force models and the tagged parameter
//! container they share on disk.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::continuum::{self, ContinuumError, MaterialParams};
use crate::lumped::{self, LumpedError, StiffnessMatrix};
use crate::neural::NetworkParams;
use crate::types::{FreeDesign, GeneralizedForce, KinematicState};

/// Schema tag of the parameter file envelope.
pub const PARAMS_SCHEMA: &str = "free-params/v1";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PredictionError {
    #[error(transparent)]
    Lumped(#[from] LumpedError),
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
}

/// A static force model: generalized force from state, pressure and design.
pub trait ForceModel {
    fn predict(
        &self,
        state: &KinematicState,
        pressure_pa: f64,
        design: &FreeDesign,
    ) -> Result<GeneralizedForce, PredictionError>;
}

impl ForceModel for StiffnessMatrix {
    fn predict(
        &self,
        state: &KinematicState,
        pressure_pa: f64,
        design: &FreeDesign,
    ) -> Result<GeneralizedForce, PredictionError> {
        Ok(lumped::predict(state, pressure_pa, design, self)?)
    }
}

impl ForceModel for MaterialParams {
    fn predict(
        &self,
        state: &KinematicState,
        pressure_pa: f64,
        design: &FreeDesign,
    ) -> Result<GeneralizedForce, PredictionError> {
        Ok(continuum::predict(state, pressure_pa, self, design)?)
    }
}

impl ForceModel for NetworkParams {
    fn predict(
        &self,
        state: &KinematicState,
        pressure_pa: f64,
        design: &FreeDesign,
    ) -> Result<GeneralizedForce, PredictionError> {
        // extrapolation is a warning carried by the richer `forward` API,
        // not a prediction failure
        Ok(self.forward(state, pressure_pa, design).tau)
    }
}

/// Closure adapter, mainly for mock models in tests.
pub struct FnModel<F>(pub F);

impl<F> ForceModel for FnModel<F>
where
    F: Fn(&KinematicState, f64, &FreeDesign) -> Result<GeneralizedForce, PredictionError>,
{
    fn predict(
        &self,
        state: &KinematicState,
        pressure_pa: f64,
        design: &FreeDesign,
    ) -> Result<GeneralizedForce, PredictionError> {
        (self.0)(state, pressure_pa, design)
    }
}

/// Which of the three models is meant, e.g. on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Lumped,
    Continuum,
    Neural,
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelTag::Lumped => "lumped",
            ModelTag::Continuum => "continuum",
            ModelTag::Neural => "neural",
        })
    }
}

impl FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lumped" => Ok(ModelTag::Lumped),
            "continuum" => Ok(ModelTag::Continuum),
            "neural" => Ok(ModelTag::Neural),
            other => Err(format!(
                "unknown model `{other}` (expected lumped, continuum or neural)"
            )),
        }
    }
}

/// Fitted parameters of any of the three models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "lowercase")]
pub enum ModelParams {
    Lumped(StiffnessMatrix),
    Continuum(MaterialParams),
    Neural(NetworkParams),
}

impl ModelParams {
    pub fn tag(&self) -> ModelTag {
        match self {
            ModelParams::Lumped(_) => ModelTag::Lumped,
            ModelParams::Continuum(_) => ModelTag::Continuum,
            ModelParams::Neural(_) => ModelTag::Neural,
        }
    }
}

impl ForceModel for ModelParams {
    fn predict(
        &self,
        state: &KinematicState,
        pressure_pa: f64,
        design: &FreeDesign,
    ) -> Result<GeneralizedForce, PredictionError> {
        match self {
            ModelParams::Lumped(k) => k.predict(state, pressure_pa, design),
            ModelParams::Continuum(m) => m.predict(state, pressure_pa, design),
            ModelParams::Neural(n) => n.predict(state, pressure_pa, design),
        }
    }
}

/// On-disk envelope for fitted parameters.
#[derive(Debug, Serialize, Deserialize)]
struct ParamsFile {
    schema: String,
    #[serde(flatten)]
    params: ModelParams,
}

#[derive(Debug, Error)]
pub enum ParamsIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad parameter file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported parameter schema `{0}` (expected `{PARAMS_SCHEMA}`)")]
    Schema(String),
}

impl ModelParams {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ParamsFile {
            schema: PARAMS_SCHEMA.to_string(),
            params: self.clone(),
        })
        .expect("parameter serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ParamsIoError> {
        let file: ParamsFile = serde_json::from_str(text)?;
        if file.schema != PARAMS_SCHEMA {
            return Err(ParamsIoError::Schema(file.schema));
        }
        Ok(file.params)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), ParamsIoError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, ParamsIoError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
