//! The shared error metric used for fitting and cross-evaluation.

use crate::dataset::Dataset;
use crate::types::{CoreError, GeneralizedForce};

/// Normalized root-mean-square error between model predictions and a
/// measurement set.
///
/// For `n` admissible (unbuckled) records,
///
/// ```text
/// E = sqrt( 1/n * sum_i [ (dF_i / F_max)^2 + (dM_i / M_max)^2 ] )
/// ```
///
/// where `F_max = max |F_meas|` and `M_max = max |M_meas|` are taken over
/// the measurement set being evaluated. `predictions` must be aligned with
/// `measurements.unbuckled()` in order and length.
pub fn error_metric(
    predictions: &[GeneralizedForce],
    measurements: &Dataset,
) -> Result<f64, CoreError> {
    let records = measurements.unbuckled();
    if records.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    if predictions.len() != records.len() {
        return Err(CoreError::PredictionCount {
            expected: records.len(),
            got: predictions.len(),
        });
    }
    let (f_max, m_max) = measurements.normalizers()?;

    let n = records.len() as f64;
    let sum: f64 = records
        .iter()
        .zip(predictions)
        .map(|(rec, pred)| {
            let df = (rec.tau.force - pred.force) / f_max;
            let dm = (rec.tau.moment - pred.moment) / m_max;
            df * df + dm * dm
        })
        .sum();
    Ok((sum / n).sqrt())
}
