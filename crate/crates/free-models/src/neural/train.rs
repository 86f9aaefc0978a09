//! Levenberg–Marquardt training of the shallow network.
//!
//! The objective is the squared normalized error metric: residuals are the
//! per-record force and moment errors divided by the training-set maxima
//! and by `sqrt(n)`, so the residual sum of squares equals `E^2`. Steps
//! solve `(J^T J + mu I) delta = -J^T r` with the classic damping schedule
//! (raise `mu` tenfold on a rejected step, lower it tenfold on an accepted
//! one). Training keeps the parameter set with the best validation error
//! seen, and stops on the epoch budget, a run of validation failures, a
//! vanishing gradient, or exhausted damping.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::metric::error_metric;
use crate::types::GeneralizedForce;

use super::{
    NetworkParams, NeuralError, Normalizer, HIDDEN_COUNT, INPUT_COUNT, OUTPUT_COUNT,
    PARAMETER_COUNT,
};

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// Upper bound on successful parameter updates.
    pub max_epochs: usize,
    /// Consecutive epochs without a new best validation error before
    /// stopping.
    pub patience: usize,
    /// Stop when the objective gradient norm falls below this.
    pub gradient_tol: f64,
    pub initial_damping: f64,
    pub min_damping: f64,
    pub max_damping: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 1000,
            patience: 6,
            gradient_tol: 1e-10,
            initial_damping: 1e-3,
            min_damping: 1e-12,
            max_damping: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    ValidationPatience,
    GradientConverged,
    DampingExhausted,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Parameter set with the best validation error encountered.
    pub params: NetworkParams,
    pub epochs: usize,
    /// Validation error `E` of the returned parameters.
    pub best_validation_error: f64,
    /// Validation error `E` of the final-epoch parameters.
    pub final_validation_error: f64,
    /// Training error `E` of the returned parameters.
    pub training_error: f64,
    /// Set when there are fewer training records than free parameters.
    pub underdetermined: bool,
    pub stop_reason: StopReason,
}

/// Fixed per-training data: cached normalized inputs, physical targets and
/// the metric normalization constants.
struct LmProblem {
    inputs: Vec<super::InputVector>,
    targets: Vec<(f64, f64)>,
    scale_force: f64,
    scale_moment: f64,
    /// Indices into the flat 62-vector that the optimizer may move.
    active: Vec<usize>,
}

impl LmProblem {
    fn new(train: &Dataset, params: &NetworkParams) -> Result<Self, NeuralError> {
        let records = train.unbuckled();
        if records.is_empty() {
            return Err(NeuralError::EmptyTraining);
        }
        let (f_max, m_max) = train
            .normalizers()
            .map_err(|e| NeuralError::Training(e.to_string()))?;
        let n = records.len() as f64;

        let mut inputs = Vec::with_capacity(records.len());
        let mut targets = Vec::with_capacity(records.len());
        for r in &records {
            let raw = NetworkParams::raw_input(&r.state, r.pressure, &r.design);
            inputs.push(params.normalize_input(&raw));
            targets.push((r.tau.force, r.tau.moment));
        }

        let mut active = Vec::with_capacity(PARAMETER_COUNT);
        for j in 0..HIDDEN_COUNT {
            for i in 0..INPUT_COUNT {
                if params.input_normalizers()[i].is_active() {
                    active.push(j * INPUT_COUNT + i);
                }
            }
        }
        active.extend(42..PARAMETER_COUNT);

        Ok(Self {
            inputs,
            targets,
            scale_force: 1.0 / (f_max * n.sqrt()),
            scale_moment: 1.0 / (m_max * n.sqrt()),
            active,
        })
    }

    fn residuals(&self, params: &NetworkParams) -> DVector<f64> {
        let mut r = DVector::zeros(2 * self.inputs.len());
        let out = params.output_normalizers();
        for (idx, (x, &(f_t, m_t))) in self.inputs.iter().zip(&self.targets).enumerate() {
            let y = params.forward_normalized(x);
            r[2 * idx] = (out[0].denormalize(y[0]) - f_t) * self.scale_force;
            r[2 * idx + 1] = (out[1].denormalize(y[1]) - m_t) * self.scale_moment;
        }
        r
    }

    fn sum_of_squares(&self, params: &NetworkParams) -> f64 {
        self.residuals(params).norm_squared()
    }

    /// Residual vector and its analytic Jacobian with respect to the flat
    /// parameter layout (all 62 columns).
    fn residuals_and_jacobian(&self, params: &NetworkParams) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.inputs.len();
        let mut residuals = DVector::zeros(2 * n);
        let mut jacobian = DMatrix::zeros(2 * n, PARAMETER_COUNT);
        let out = params.output_normalizers();
        let w = params.input_weights();
        let u = params.output_weights();

        for (idx, (x, &(f_t, m_t))) in self.inputs.iter().zip(&self.targets).enumerate() {
            let pre = w * x + params.hidden_biases();
            let h = pre.map(f64::tanh);
            let y = u * h + params.output_biases();
            residuals[2 * idx] = (out[0].denormalize(y[0]) - f_t) * self.scale_force;
            residuals[2 * idx + 1] = (out[1].denormalize(y[1]) - m_t) * self.scale_moment;

            for k in 0..OUTPUT_COUNT {
                let row = 2 * idx + k;
                // d residual / d y_k: metric scaling times output span
                let gain = match k {
                    0 => self.scale_force * out[0].scale(),
                    _ => self.scale_moment * out[1].scale(),
                };
                jacobian[(row, 60 + k)] = gain; // output bias
                for j in 0..HIDDEN_COUNT {
                    jacobian[(row, 48 + k * HIDDEN_COUNT + j)] = gain * h[j];
                    let delta = gain * u[(k, j)] * (1.0 - h[j] * h[j]);
                    jacobian[(row, 42 + j)] = delta; // hidden bias
                    for i in 0..INPUT_COUNT {
                        jacobian[(row, j * INPUT_COUNT + i)] = delta * x[i];
                    }
                }
            }
        }
        (residuals, jacobian)
    }
}

/// Residuals and analytic Jacobian of the training objective at `params`
/// over the admissible records of `data`. Rows alternate force and moment
/// per record; columns follow [`NetworkParams::to_flat`]. Exposed for
/// derivative verification against finite differences.
pub fn residual_jacobian(
    params: &NetworkParams,
    data: &Dataset,
) -> Result<(DVector<f64>, DMatrix<f64>), NeuralError> {
    let problem = LmProblem::new(data, params)?;
    Ok(problem.residuals_and_jacobian(params))
}

fn output_normalizer(values: impl Iterator<Item = f64>) -> Normalizer {
    let n = Normalizer::from_values(values);
    if n.is_active() {
        n
    } else {
        // constant target: widen so de-normalization stays the identity on
        // the observed value
        Normalizer {
            min: n.min - 1.0,
            max: n.max + 1.0,
        }
    }
}

fn initial_params(
    train: &Dataset,
    seed: u64,
) -> Result<NetworkParams, NeuralError> {
    let records = train.unbuckled();
    if records.is_empty() {
        return Err(NeuralError::EmptyTraining);
    }
    let feature = |i: usize| {
        records.iter().map(move |r| {
            NetworkParams::raw_input(&r.state, r.pressure, &r.design)[i]
        })
    };
    let input_normalizers: [Normalizer; INPUT_COUNT] =
        std::array::from_fn(|i| Normalizer::from_values(feature(i)));
    let output_normalizers = [
        output_normalizer(records.iter().map(|r| r.tau.force)),
        output_normalizer(records.iter().map(|r| r.tau.moment)),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_scale = 0.5 / (INPUT_COUNT as f64).sqrt();
    let u_scale = 0.5 / (HIDDEN_COUNT as f64).sqrt();
    let input_weights = super::InputWeights::from_fn(|_, i| {
        let sample = rng.gen_range(-w_scale..w_scale);
        if input_normalizers[i].is_active() {
            sample
        } else {
            0.0
        }
    });
    let output_weights = super::OutputWeights::from_fn(|_, _| rng.gen_range(-u_scale..u_scale));
    let hidden_biases = super::HiddenVector::from_fn(|_, _| rng.gen_range(-0.5..0.5));

    NetworkParams::new(
        input_weights,
        hidden_biases,
        output_weights,
        super::OutputVector::zeros(),
        input_normalizers,
        output_normalizers,
    )
}

fn validation_error(params: &NetworkParams, validation: &Dataset) -> Result<f64, NeuralError> {
    let predictions: Vec<GeneralizedForce> = validation
        .unbuckled()
        .iter()
        .map(|r| params.forward(&r.state, r.pressure, &r.design).tau)
        .collect();
    error_metric(&predictions, validation).map_err(|e| NeuralError::Training(e.to_string()))
}

/// Train a network on `train_set`, early-stopping against
/// `validation_set`, both filtered to admissible records. Deterministic for
/// a given `seed`.
pub fn train(
    train_set: &Dataset,
    validation_set: &Dataset,
    seed: u64,
    config: &TrainConfig,
) -> Result<TrainReport, NeuralError> {
    if validation_set.unbuckled().is_empty() {
        return Err(NeuralError::EmptyValidation);
    }
    let mut params = initial_params(train_set, seed)?;
    let problem = LmProblem::new(train_set, &params)?;
    let n_records = problem.inputs.len();
    let underdetermined = n_records < problem.active.len();

    let mut best_params = params.clone();
    let mut best_validation = validation_error(&params, validation_set)?;
    let mut previous_validation = best_validation;
    let mut consecutive_increases = 0usize;
    let mut damping = config.initial_damping;
    let mut epochs = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;

    let n_active = problem.active.len();
    'epochs: for _ in 0..config.max_epochs {
        let (residuals, jacobian_full) = problem.residuals_and_jacobian(&params);
        let sse = residuals.norm_squared();

        // reduce to the free columns
        let mut jacobian = DMatrix::zeros(residuals.len(), n_active);
        for (col, &idx) in problem.active.iter().enumerate() {
            jacobian.set_column(col, &jacobian_full.column(idx));
        }
        let gradient = jacobian.transpose() * &residuals;
        if gradient.norm() < config.gradient_tol {
            stop_reason = StopReason::GradientConverged;
            break;
        }
        let normal = jacobian.transpose() * &jacobian;

        // raise damping until a step reduces the objective
        loop {
            let mut damped = normal.clone();
            for i in 0..n_active {
                damped[(i, i)] += damping;
            }
            let step = match damped.cholesky() {
                Some(chol) => chol.solve(&(-&gradient)),
                None => {
                    damping = (damping * 10.0).min(config.max_damping * 10.0);
                    if damping > config.max_damping {
                        stop_reason = StopReason::DampingExhausted;
                        break 'epochs;
                    }
                    continue;
                }
            };

            let mut trial_flat = params.to_flat();
            for (col, &idx) in problem.active.iter().enumerate() {
                trial_flat[idx] += step[col];
            }
            let mut trial = params.clone();
            trial.set_flat(&trial_flat);

            if problem.sum_of_squares(&trial) < sse {
                params = trial;
                damping = (damping / 10.0).max(config.min_damping);
                break;
            }
            damping *= 10.0;
            if damping > config.max_damping {
                stop_reason = StopReason::DampingExhausted;
                break 'epochs;
            }
        }
        epochs += 1;

        let validation = validation_error(&params, validation_set)?;
        if validation < best_validation {
            best_validation = validation;
            best_params = params.clone();
        }
        // patience counts consecutive epoch-over-epoch increases
        if validation > previous_validation {
            consecutive_increases += 1;
            if consecutive_increases >= config.patience {
                stop_reason = StopReason::ValidationPatience;
                previous_validation = validation;
                break;
            }
        } else {
            consecutive_increases = 0;
        }
        previous_validation = validation;
    }

    let final_validation_error = validation_error(&params, validation_set)?;
    let training_error = problem.sum_of_squares(&best_params).sqrt();
    Ok(TrainReport {
        params: best_params,
        epochs,
        best_validation_error: best_validation,
        final_validation_error,
        training_error,
        underdetermined,
        stop_reason,
    })
}
