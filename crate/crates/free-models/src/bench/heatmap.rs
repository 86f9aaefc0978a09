//! Cross-evaluation harness: fit a model on every training set, score it
//! on every test set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::fitting::{self, EvalOptions};
use crate::model::{ForceModel, ModelTag};
use crate::neural::TrainConfig;

use super::BenchError;

/// Train/validation pair handed to a fitter for one training set. The
/// first-principles fits train on the union; the network trains on `train`
/// and early-stops against `validation`.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train: Dataset,
    pub validation: Dataset,
    pub seed: u64,
}

impl TrainData {
    /// Union of the training and validation shares (the full 80% split).
    pub fn combined(&self) -> Dataset {
        Dataset::concat(self.train.name().to_string(), &[&self.train, &self.validation])
    }
}

/// The train-set × test-set error matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatmapResult {
    /// Set names, shared by both axes: the input datasets in order, then
    /// any aggregate sets.
    pub set_names: Vec<String>,
    /// `errors[train][test]`; `None` marks a failed cell.
    pub errors: Vec<Vec<Option<f64>>>,
    /// Which model produced the matrix.
    pub model: String,
}

impl HeatmapResult {
    pub fn mean_error(&self) -> Option<f64> {
        let values: Vec<f64> = self.errors.iter().flatten().flatten().copied().collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    pub fn min_max(&self) -> Option<((usize, usize, f64), (usize, usize, f64))> {
        let mut min: Option<(usize, usize, f64)> = None;
        let mut max: Option<(usize, usize, f64)> = None;
        for (i, row) in self.errors.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    if min.is_none_or(|(_, _, best)| *v < best) {
                        min = Some((i, j, *v));
                    }
                    if max.is_none_or(|(_, _, best)| *v > best) {
                        max = Some((i, j, *v));
                    }
                }
            }
        }
        min.zip(max)
    }
}

#[derive(Debug, Clone)]
pub struct HeatmapOptions {
    /// Share of each dataset used for training+validation; the rest tests.
    pub train_fraction: f64,
    /// Share of the training split reserved for validation (network only).
    pub validation_share: f64,
    pub neural: TrainConfig,
    pub eval: EvalOptions,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            validation_share: 0.2,
            neural: TrainConfig::default(),
            eval: EvalOptions::default(),
        }
    }
}

/// FNV-1a; partition seeds derive from dataset names so that cells do not
/// depend on dataset order.
fn name_hash(name: &str) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for byte in name.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Generic heatmap core: build per-set partitions and aggregates, fit with
/// the supplied closure, evaluate every (train, test) pair.
///
/// With two or more datasets, two aggregate sets are appended: "Evens"
/// (every second dataset) and "All". A fit failure blanks its row; an
/// evaluation failure blanks its cell.
pub fn run_heatmap_with<P, F>(
    datasets: &[(String, Dataset)],
    seed: u64,
    model_name: &str,
    options: &HeatmapOptions,
    fit: F,
) -> Result<HeatmapResult, BenchError>
where
    P: ForceModel + Sync,
    F: Fn(&TrainData) -> Result<P, BenchError> + Sync,
{
    if datasets.is_empty() {
        return Err(BenchError::NoDatasets);
    }

    // per-set three-way split: (train, validation) for fitting, test held out
    let mut train_data = Vec::with_capacity(datasets.len() + 2);
    let mut test_sets = Vec::with_capacity(datasets.len() + 2);
    let mut names = Vec::with_capacity(datasets.len() + 2);
    for (name, dataset) in datasets {
        let set_seed = seed ^ name_hash(name);
        let (train_full, test) = dataset.split_train_test(options.train_fraction, set_seed)?;
        let (train, validation) =
            train_full.split_train_test(1.0 - options.validation_share, set_seed ^ 0x5eed)?;
        names.push(name.clone());
        train_data.push(TrainData {
            train,
            validation,
            seed: set_seed,
        });
        test_sets.push(test);
    }

    if datasets.len() >= 2 {
        let evens: Vec<usize> = (0..datasets.len()).filter(|i| i % 2 == 1).collect();
        let all: Vec<usize> = (0..datasets.len()).collect();
        for (name, members) in [("Evens".to_string(), evens), ("All".to_string(), all)] {
            let train = Dataset::concat(
                format!("{name}/train"),
                &members.iter().map(|&i| &train_data[i].train).collect::<Vec<_>>(),
            );
            let validation = Dataset::concat(
                format!("{name}/validation"),
                &members
                    .iter()
                    .map(|&i| &train_data[i].validation)
                    .collect::<Vec<_>>(),
            );
            let test = Dataset::concat(
                format!("{name}/test"),
                &members.iter().map(|&i| &test_sets[i]).collect::<Vec<_>>(),
            );
            names.push(name.clone());
            train_data.push(TrainData {
                train,
                validation,
                seed: seed ^ name_hash(&name),
            });
            test_sets.push(test);
        }
    }

    // one fit per training set, then a full cross of evaluations
    let fitted: Vec<Option<P>> = train_data.iter().map(|td| fit(td).ok()).collect();

    let cells: Vec<Vec<Option<f64>>> = fitted
        .par_iter()
        .map(|model| {
            test_sets
                .par_iter()
                .map(|test| {
                    let model = model.as_ref()?;
                    fitting::evaluate(model, test, &options.eval)
                        .ok()
                        .map(|e| e.error)
                })
                .collect()
        })
        .collect();

    Ok(HeatmapResult {
        set_names: names,
        errors: cells,
        model: model_name.to_string(),
    })
}

/// Run the full heatmap for one of the three models.
pub fn run_heatmap(
    datasets: &[(String, Dataset)],
    model: ModelTag,
    seed: u64,
    options: &HeatmapOptions,
) -> Result<HeatmapResult, BenchError> {
    match model {
        ModelTag::Lumped => run_heatmap_with(
            datasets,
            seed,
            "lumped",
            options,
            |td: &TrainData| -> Result<_, BenchError> {
                let fit = fitting::fit_lumped(&td.combined())?;
                match fit.params {
                    crate::model::ModelParams::Lumped(k) => Ok(k),
                    _ => unreachable!("lumped fit returns lumped params"),
                }
            },
        ),
        ModelTag::Continuum => run_heatmap_with(
            datasets,
            seed,
            "continuum",
            options,
            |td: &TrainData| -> Result<_, BenchError> {
                let fit = fitting::fit_continuum(&td.combined())?;
                match fit.params {
                    crate::model::ModelParams::Continuum(m) => Ok(m),
                    _ => unreachable!("continuum fit returns continuum params"),
                }
            },
        ),
        ModelTag::Neural => run_heatmap_with(
            datasets,
            seed,
            "neural",
            options,
            |td: &TrainData| -> Result<_, BenchError> {
                let fit = fitting::fit_neural(&td.train, &td.validation, td.seed, &options.neural)?;
                match fit.params {
                    crate::model::ModelParams::Neural(n) => Ok(n),
                    _ => unreachable!("neural fit returns network params"),
                }
            },
        ),
    }
}
