//! Shallow feed-forward network: 7 inputs, one fully connected 6-neuron
//! tanh hidden layer, 2 linear outputs.
//!
//! Inputs are the kinematic state, the pressure and the four design
//! parameters, min–max normalized to [-1, 1] with ranges recorded from the
//! training set; outputs are the normalized force and moment, de-normalized
//! on prediction. The 42 + 6 + 12 + 2 = 62 weights and biases are trained
//! with Levenberg–Marquardt (see [`train`]).

mod train;

pub use train::{residual_jacobian, train, StopReason, TrainConfig, TrainReport};

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{FreeDesign, GeneralizedForce, KinematicState};

pub const INPUT_COUNT: usize = 7;
pub const HIDDEN_COUNT: usize = 6;
pub const OUTPUT_COUNT: usize = 2;
/// Total free parameters: 6*7 input weights + 6 hidden biases + 2*6 output
/// weights + 2 output biases.
pub const PARAMETER_COUNT: usize = 62;

pub type InputVector = SVector<f64, INPUT_COUNT>;
pub type HiddenVector = SVector<f64, HIDDEN_COUNT>;
pub type OutputVector = SVector<f64, OUTPUT_COUNT>;
pub type InputWeights = SMatrix<f64, HIDDEN_COUNT, INPUT_COUNT>;
pub type OutputWeights = SMatrix<f64, OUTPUT_COUNT, HIDDEN_COUNT>;

#[derive(Debug, Clone, Error)]
pub enum NeuralError {
    #[error("training set has no admissible records")]
    EmptyTraining,
    #[error("validation set has no admissible records")]
    EmptyValidation,
    #[error("degenerate output normalization: {0}")]
    DegenerateOutputs(String),
    #[error("training failure: {0}")]
    Training(String),
    #[error("invalid network parameters: {0}")]
    InvalidParams(String),
}

/// Per-feature min–max range. A collapsed range (min == max) marks an
/// inactive feature: it normalizes to 0 and its weights are frozen during
/// training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: f64,
    pub max: f64,
}

impl Normalizer {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        Self { min, max }
    }

    pub fn is_active(&self) -> bool {
        self.max > self.min
    }

    /// Map into [-1, 1]; inactive features collapse to 0.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.is_active() {
            2.0 * (x - self.min) / (self.max - self.min) - 1.0
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        if self.is_active() {
            0.5 * (y + 1.0) * (self.max - self.min) + self.min
        } else {
            self.min
        }
    }

    /// Half the normalized-to-physical slope, `(max - min) / 2`.
    pub fn scale(&self) -> f64 {
        0.5 * (self.max - self.min)
    }

    /// Whether `x` lies within half a range-width of the seen data.
    pub fn within_guard_band(&self, x: f64) -> bool {
        if !self.is_active() {
            return true;
        }
        let range = self.max - self.min;
        x >= self.min - 0.5 * range && x <= self.max + 0.5 * range
    }
}

/// Output of the network for one input, with an extrapolation warning when
/// any input feature left the guard band around the training ranges. The
/// network still evaluates there; it just has no data to anchor its shape.
#[derive(Debug, Clone, Copy)]
pub struct NeuralPrediction {
    pub tau: GeneralizedForce,
    pub extrapolated: bool,
}

/// The 62 network parameters plus the input/output normalization ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkParamsRepr", into = "NetworkParamsRepr")]
pub struct NetworkParams {
    input_weights: InputWeights,
    hidden_biases: HiddenVector,
    output_weights: OutputWeights,
    output_biases: OutputVector,
    input_normalizers: [Normalizer; INPUT_COUNT],
    output_normalizers: [Normalizer; OUTPUT_COUNT],
}

impl NetworkParams {
    pub fn new(
        input_weights: InputWeights,
        hidden_biases: HiddenVector,
        output_weights: OutputWeights,
        output_biases: OutputVector,
        input_normalizers: [Normalizer; INPUT_COUNT],
        output_normalizers: [Normalizer; OUTPUT_COUNT],
    ) -> Result<Self, NeuralError> {
        for (k, n) in output_normalizers.iter().enumerate() {
            if !n.is_active() {
                return Err(NeuralError::InvalidParams(format!(
                    "output normalizer {k} must have min < max, got [{}, {}]",
                    n.min, n.max
                )));
            }
        }
        let all = input_weights
            .iter()
            .chain(hidden_biases.iter())
            .chain(output_weights.iter())
            .chain(output_biases.iter());
        for v in all {
            if !v.is_finite() {
                return Err(NeuralError::InvalidParams(
                    "weights and biases must be finite".into(),
                ));
            }
        }
        Ok(Self {
            input_weights,
            hidden_biases,
            output_weights,
            output_biases,
            input_normalizers,
            output_normalizers,
        })
    }

    pub fn input_weights(&self) -> &InputWeights {
        &self.input_weights
    }

    pub fn hidden_biases(&self) -> &HiddenVector {
        &self.hidden_biases
    }

    pub fn output_weights(&self) -> &OutputWeights {
        &self.output_weights
    }

    pub fn output_biases(&self) -> &OutputVector {
        &self.output_biases
    }

    pub fn input_normalizers(&self) -> &[Normalizer; INPUT_COUNT] {
        &self.input_normalizers
    }

    pub fn output_normalizers(&self) -> &[Normalizer; OUTPUT_COUNT] {
        &self.output_normalizers
    }

    pub const fn parameter_count() -> usize {
        PARAMETER_COUNT
    }

    /// Raw (SI) feature vector: `[l, phi, P, Gamma, L, Ri, Ro]`.
    pub fn raw_input(
        state: &KinematicState,
        pressure_pa: f64,
        design: &FreeDesign,
    ) -> [f64; INPUT_COUNT] {
        [
            state.length(),
            state.twist(),
            pressure_pa,
            design.gamma(),
            design.length(),
            design.inner_radius(),
            design.outer_radius(),
        ]
    }

    /// Normalized feature vector in [-1, 1] (inactive features at 0).
    pub fn normalize_input(&self, raw: &[f64; INPUT_COUNT]) -> InputVector {
        InputVector::from_fn(|i, _| self.input_normalizers[i].normalize(raw[i]))
    }

    /// Network output on an already-normalized input, still in normalized
    /// output space.
    pub fn forward_normalized(&self, x: &InputVector) -> OutputVector {
        let hidden = (self.input_weights * x + self.hidden_biases).map(f64::tanh);
        self.output_weights * hidden + self.output_biases
    }

    /// Full forward pass from physical inputs to a generalized force.
    pub fn forward(
        &self,
        state: &KinematicState,
        pressure_pa: f64,
        design: &FreeDesign,
    ) -> NeuralPrediction {
        let raw = Self::raw_input(state, pressure_pa, design);
        let extrapolated = raw
            .iter()
            .zip(&self.input_normalizers)
            .any(|(&x, n)| !n.within_guard_band(x));
        let y = self.forward_normalized(&self.normalize_input(&raw));
        NeuralPrediction {
            tau: GeneralizedForce {
                force: self.output_normalizers[0].denormalize(y[0]),
                moment: self.output_normalizers[1].denormalize(y[1]),
            },
            extrapolated,
        }
    }

    /// Flatten weights and biases into a 62-vector:
    /// `w` row-major, then `o`, then `u` row-major, then `b`.
    pub fn to_flat(&self) -> [f64; PARAMETER_COUNT] {
        let mut flat = [0.0; PARAMETER_COUNT];
        let mut idx = 0;
        for j in 0..HIDDEN_COUNT {
            for i in 0..INPUT_COUNT {
                flat[idx] = self.input_weights[(j, i)];
                idx += 1;
            }
        }
        for j in 0..HIDDEN_COUNT {
            flat[idx] = self.hidden_biases[j];
            idx += 1;
        }
        for k in 0..OUTPUT_COUNT {
            for j in 0..HIDDEN_COUNT {
                flat[idx] = self.output_weights[(k, j)];
                idx += 1;
            }
        }
        for k in 0..OUTPUT_COUNT {
            flat[idx] = self.output_biases[k];
            idx += 1;
        }
        flat
    }

    /// Overwrite weights and biases from a flat 62-vector (inverse of
    /// [`Self::to_flat`]); normalizers are untouched.
    pub fn set_flat(&mut self, flat: &[f64; PARAMETER_COUNT]) {
        let mut idx = 0;
        for j in 0..HIDDEN_COUNT {
            for i in 0..INPUT_COUNT {
                self.input_weights[(j, i)] = flat[idx];
                idx += 1;
            }
        }
        for j in 0..HIDDEN_COUNT {
            self.hidden_biases[j] = flat[idx];
            idx += 1;
        }
        for k in 0..OUTPUT_COUNT {
            for j in 0..HIDDEN_COUNT {
                self.output_weights[(k, j)] = flat[idx];
                idx += 1;
            }
        }
        for k in 0..OUTPUT_COUNT {
            self.output_biases[k] = flat[idx];
            idx += 1;
        }
    }
}

/// Serialized form: explicit shape fields and row-major arrays, versioned
/// with a schema tag.
#[derive(Debug, Serialize, Deserialize)]
struct NetworkParamsRepr {
    schema: String,
    inputs: usize,
    hidden: usize,
    outputs: usize,
    input_weights: Vec<f64>,
    hidden_biases: Vec<f64>,
    output_weights: Vec<f64>,
    output_biases: Vec<f64>,
    input_min: Vec<f64>,
    input_max: Vec<f64>,
    output_min: Vec<f64>,
    output_max: Vec<f64>,
}

pub const NETWORK_SCHEMA: &str = "free-network/v1";

impl From<NetworkParams> for NetworkParamsRepr {
    fn from(p: NetworkParams) -> Self {
        let flat = p.to_flat();
        Self {
            schema: NETWORK_SCHEMA.to_string(),
            inputs: INPUT_COUNT,
            hidden: HIDDEN_COUNT,
            outputs: OUTPUT_COUNT,
            input_weights: flat[..42].to_vec(),
            hidden_biases: flat[42..48].to_vec(),
            output_weights: flat[48..60].to_vec(),
            output_biases: flat[60..62].to_vec(),
            input_min: p.input_normalizers.iter().map(|n| n.min).collect(),
            input_max: p.input_normalizers.iter().map(|n| n.max).collect(),
            output_min: p.output_normalizers.iter().map(|n| n.min).collect(),
            output_max: p.output_normalizers.iter().map(|n| n.max).collect(),
        }
    }
}

impl TryFrom<NetworkParamsRepr> for NetworkParams {
    type Error = String;

    fn try_from(r: NetworkParamsRepr) -> Result<Self, String> {
        if r.schema != NETWORK_SCHEMA {
            return Err(format!(
                "unsupported network schema `{}` (expected `{NETWORK_SCHEMA}`)",
                r.schema
            ));
        }
        if (r.inputs, r.hidden, r.outputs) != (INPUT_COUNT, HIDDEN_COUNT, OUTPUT_COUNT) {
            return Err(format!(
                "unsupported topology {}-{}-{} (expected {INPUT_COUNT}-{HIDDEN_COUNT}-{OUTPUT_COUNT})",
                r.inputs, r.hidden, r.outputs
            ));
        }
        let expect = |name: &str, got: usize, want: usize| -> Result<(), String> {
            if got == want {
                Ok(())
            } else {
                Err(format!("{name} must have {want} entries, got {got}"))
            }
        };
        expect("input_weights", r.input_weights.len(), 42)?;
        expect("hidden_biases", r.hidden_biases.len(), 6)?;
        expect("output_weights", r.output_weights.len(), 12)?;
        expect("output_biases", r.output_biases.len(), 2)?;
        expect("input_min", r.input_min.len(), INPUT_COUNT)?;
        expect("input_max", r.input_max.len(), INPUT_COUNT)?;
        expect("output_min", r.output_min.len(), OUTPUT_COUNT)?;
        expect("output_max", r.output_max.len(), OUTPUT_COUNT)?;

        let mut flat = [0.0; PARAMETER_COUNT];
        flat[..42].copy_from_slice(&r.input_weights);
        flat[42..48].copy_from_slice(&r.hidden_biases);
        flat[48..60].copy_from_slice(&r.output_weights);
        flat[60..62].copy_from_slice(&r.output_biases);

        let input_normalizers: [Normalizer; INPUT_COUNT] = std::array::from_fn(|i| Normalizer {
            min: r.input_min[i],
            max: r.input_max[i],
        });
        let output_normalizers: [Normalizer; OUTPUT_COUNT] = std::array::from_fn(|k| Normalizer {
            min: r.output_min[k],
            max: r.output_max[k],
        });

        let mut params = NetworkParams::new(
            InputWeights::zeros(),
            HiddenVector::zeros(),
            OutputWeights::zeros(),
            OutputVector::zeros(),
            input_normalizers,
            output_normalizers,
        )
        .map_err(|e| e.to_string())?;
        params.set_flat(&flat);
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand::SeedableRng as _;

    fn active_normalizers() -> ([Normalizer; INPUT_COUNT], [Normalizer; OUTPUT_COUNT]) {
        let inputs = [
            Normalizer { min: 0.08, max: 0.13 },
            Normalizer { min: -2.1, max: 2.1 },
            Normalizer { min: 0.0, max: 72.5e3 },
            Normalizer { min: 0.2, max: 1.4 },
            Normalizer { min: 0.08, max: 0.13 },
            Normalizer { min: 4.0e-3, max: 5.0e-3 },
            Normalizer { min: 6.0e-3, max: 7.0e-3 },
        ];
        let outputs = [
            Normalizer { min: -30.0, max: 30.0 },
            Normalizer { min: -0.4, max: 0.4 },
        ];
        (inputs, outputs)
    }

    fn random_params(seed: u64) -> NetworkParams {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (inorm, onorm) = active_normalizers();
        NetworkParams::new(
            InputWeights::from_fn(|_, _| rng.gen_range(-1.0..1.0)),
            HiddenVector::from_fn(|_, _| rng.gen_range(-0.5..0.5)),
            OutputWeights::from_fn(|_, _| rng.gen_range(-1.0..1.0)),
            OutputVector::from_fn(|_, _| rng.gen_range(-0.5..0.5)),
            inorm,
            onorm,
        )
        .unwrap()
    }

    fn probe_point() -> (FreeDesign, KinematicState, f64) {
        let d = FreeDesign::from_io(50.0, 120.40, 4.77, 6.41).unwrap();
        let q = KinematicState::new(1.02 * d.length(), 0.8).unwrap();
        (d, q, 40e3)
    }

    #[test]
    fn parameter_count_is_62() {
        assert_eq!(NetworkParams::parameter_count(), 62);
        assert_eq!(random_params(0).to_flat().len(), 62);
    }

    #[test]
    fn zero_weights_output_the_denormalized_biases() {
        let (inorm, onorm) = active_normalizers();
        let mut bias = OutputVector::zeros();
        bias[0] = 0.25;
        bias[1] = -0.5;
        let p = NetworkParams::new(
            InputWeights::zeros(),
            HiddenVector::zeros(),
            OutputWeights::zeros(),
            bias,
            inorm,
            onorm,
        )
        .unwrap();
        let (d, q, pa) = probe_point();
        let out = p.forward(&q, pa, &d);
        assert!((out.tau.force - onorm[0].denormalize(0.25)).abs() < 1e-12);
        assert!((out.tau.moment - onorm[1].denormalize(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn severed_hidden_layer_ignores_inputs() {
        let mut p = random_params(3);
        p.output_weights = OutputWeights::zeros();
        let (d, q, pa) = probe_point();
        let a = p.forward(&q, pa, &d).tau;
        let q2 = KinematicState::new(0.95 * d.length(), -1.0).unwrap();
        let b = p.forward(&q2, 5e3, &d).tau;
        assert_eq!(a.force, b.force);
        assert_eq!(a.moment, b.moment);
    }

    #[test]
    fn forward_matches_scalar_loop_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..100 {
            let p = random_params(trial);
            let raw = [
                rng.gen_range(0.08..0.13),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.0..72.5e3),
                rng.gen_range(0.3..1.3),
                rng.gen_range(0.08..0.13),
                rng.gen_range(4.0e-3..5.0e-3),
                rng.gen_range(6.0e-3..7.0e-3),
            ];

            // oracle: explicit sums, no matrix library
            let inorm = p.input_normalizers();
            let onorm = p.output_normalizers();
            let mut x = [0.0f64; INPUT_COUNT];
            for i in 0..INPUT_COUNT {
                x[i] =
                    2.0 * (raw[i] - inorm[i].min) / (inorm[i].max - inorm[i].min) - 1.0;
            }
            let mut h = [0.0f64; HIDDEN_COUNT];
            for j in 0..HIDDEN_COUNT {
                let mut acc = p.hidden_biases()[j];
                for i in 0..INPUT_COUNT {
                    acc += p.input_weights()[(j, i)] * x[i];
                }
                h[j] = acc.tanh();
            }
            let mut y = [0.0f64; OUTPUT_COUNT];
            for k in 0..OUTPUT_COUNT {
                let mut acc = p.output_biases()[k];
                for j in 0..HIDDEN_COUNT {
                    acc += p.output_weights()[(k, j)] * h[j];
                }
                y[k] = acc;
            }
            let expected_f = 0.5 * (y[0] + 1.0) * (onorm[0].max - onorm[0].min) + onorm[0].min;
            let expected_m = 0.5 * (y[1] + 1.0) * (onorm[1].max - onorm[1].min) + onorm[1].min;

            let xv = p.normalize_input(&raw);
            let yv = p.forward_normalized(&xv);
            let got_f = onorm[0].denormalize(yv[0]);
            let got_m = onorm[1].denormalize(yv[1]);
            assert!((got_f - expected_f).abs() <= 1e-12 * expected_f.abs().max(1.0));
            assert!((got_m - expected_m).abs() <= 1e-12 * expected_m.abs().max(1.0));
        }
    }

    #[test]
    fn tanh_sign_symmetry_leaves_output_unchanged() {
        let (d, q, pa) = probe_point();
        for seed in 0..10 {
            let p = random_params(seed);
            let base = p.forward(&q, pa, &d).tau;

            // negate w and o, and compensate by negating the columns of u
            let mut flipped = p.clone();
            flipped.input_weights = -flipped.input_weights;
            flipped.hidden_biases = -flipped.hidden_biases;
            flipped.output_weights = -flipped.output_weights;
            let out = flipped.forward(&q, pa, &d).tau;
            assert!((out.force - base.force).abs() <= 1e-12 * base.force.abs().max(1.0));
            assert!((out.moment - base.moment).abs() <= 1e-12 * base.moment.abs().max(1.0));
        }
    }

    #[test]
    fn inactive_features_normalize_to_zero() {
        let (mut inorm, onorm) = active_normalizers();
        inorm[3] = Normalizer { min: 0.7, max: 0.7 }; // constant design angle
        let p = NetworkParams::new(
            InputWeights::from_element(0.3),
            HiddenVector::zeros(),
            OutputWeights::from_element(0.1),
            OutputVector::zeros(),
            inorm,
            onorm,
        )
        .unwrap();
        let raw = [0.1, 0.0, 1e3, 0.7, 0.1, 4.5e-3, 6.5e-3];
        let x = p.normalize_input(&raw);
        assert_eq!(x[3], 0.0);
        // …no matter the physical value
        let raw2 = [0.1, 0.0, 1e3, 1.2, 0.1, 4.5e-3, 6.5e-3];
        assert_eq!(p.normalize_input(&raw2)[3], 0.0);
    }

    #[test]
    fn extrapolation_guard_flags_out_of_band_inputs() {
        let p = random_params(17);
        let (d, q, _) = probe_point();
        // pressure normalizer spans [0, 72.5] kPa; 1.5x the range is out
        let inside = p.forward(&q, 72.5e3, &d);
        assert!(!inside.extrapolated);
        let outside = p.forward(&q, 1.6 * 72.5e3, &d);
        assert!(outside.extrapolated);
    }

    #[test]
    fn serialization_roundtrips_losslessly() {
        let p = random_params(4);
        let json = serde_json::to_string_pretty(&p).unwrap();
        assert!(json.contains(NETWORK_SCHEMA));
        let back: NetworkParams = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn serialization_rejects_wrong_shapes() {
        let p = random_params(4);
        let mut value: serde_json::Value = serde_json::to_value(&p).unwrap();
        value["hidden_biases"] = serde_json::json!([1.0, 2.0]);
        assert!(serde_json::from_value::<NetworkParams>(value.clone()).is_err());
        value["hidden_biases"] = serde_json::json!([0, 0, 0, 0, 0, 0]);
        value["schema"] = serde_json::json!("free-network/v0");
        assert!(serde_json::from_value::<NetworkParams>(value).is_err());
    }

    #[test]
    fn flat_roundtrip_is_identity() {
        let p = random_params(8);
        let flat = p.to_flat();
        let mut q = random_params(9);
        q.input_normalizers = p.input_normalizers;
        q.output_normalizers = p.output_normalizers;
        q.set_flat(&flat);
        assert_eq!(p, q);
    }
}
