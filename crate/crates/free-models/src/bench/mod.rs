//! Benchmarking harness: synthetic data generation over the experimental
//! grid, train–test heatmaps across sample sets, numerical model
//! inversion, and result emission.

mod emit;
mod heatmap;
mod invert;

pub use emit::{emit_heatmap, heatmap_csv_string, heatmap_svg_string};
pub use heatmap::{run_heatmap, run_heatmap_with, HeatmapOptions, HeatmapResult, TrainData};
pub use invert::invert;

use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::fitting::FitError;
use crate::model::ForceModel;
use crate::types::{CoreError, FreeDesign, GeneralizedForce, KinematicState, LoadRecord};
use crate::units::{deg_to_rad, kpa_to_pa, mm_to_m};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("no datasets supplied")]
    NoDatasets,
    #[error("inversion did not converge in {iterations} iterations (best residual {best_residual:.3e})")]
    InvertDiverged {
        iterations: usize,
        best_residual: f64,
    },
    #[error("inversion failed: {0}")]
    Invert(String),
}

/// The kinematic/pressure test grid applied to every design.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    dl_m: Vec<f64>,
    dphi_rad: Vec<f64>,
    pressures_pa: Vec<f64>,
}

impl ExperimentGrid {
    pub fn new(dl_m: Vec<f64>, dphi_rad: Vec<f64>, pressures_pa: Vec<f64>) -> Self {
        Self {
            dl_m,
            dphi_rad,
            pressures_pa,
        }
    }

    pub fn from_io(dl_mm: &[f64], dphi_deg: &[f64], p_kpa: &[f64]) -> Self {
        Self {
            dl_m: dl_mm.iter().map(|&v| mm_to_m(v)).collect(),
            dphi_rad: dphi_deg.iter().map(|&v| deg_to_rad(v)).collect(),
            pressures_pa: p_kpa.iter().map(|&v| kpa_to_pa(v)).collect(),
        }
    }

    /// The benchmark grid: length offsets −5…5 mm in 1 mm steps, twists
    /// ±1° and ±10…±120° in 10° steps (26 values, 286 kinematic states),
    /// and ten pressure steps — eight ascending to 72.5 kPa plus two
    /// descending settle points.
    pub fn default_grid() -> Self {
        let dl_mm: Vec<f64> = (-5..=5).map(|v| v as f64).collect();
        let mut dphi_deg: Vec<f64> = (-12..=-1).map(|v| (v * 10) as f64).collect();
        dphi_deg.push(-1.0);
        dphi_deg.push(1.0);
        dphi_deg.extend((1..=12).map(|v| (v * 10) as f64));
        let mut p_kpa: Vec<f64> = (0..8).map(|i| i as f64 * 72.5 / 7.0).collect();
        p_kpa.push(36.25);
        p_kpa.push(0.0);
        Self::from_io(&dl_mm, &dphi_deg, &p_kpa)
    }

    pub fn dl_m(&self) -> &[f64] {
        &self.dl_m
    }

    pub fn dphi_rad(&self) -> &[f64] {
        &self.dphi_rad
    }

    pub fn pressures_pa(&self) -> &[f64] {
        &self.pressures_pa
    }

    /// Distinct kinematic states (length × twist combinations).
    pub fn state_count(&self) -> usize {
        self.dl_m.len() * self.dphi_rad.len()
    }

    /// Records generated per design.
    pub fn configurations_per_design(&self) -> usize {
        self.state_count() * self.pressures_pa.len()
    }
}

/// Eight bundled reference designs spanning fiber angles from 15° to 76°,
/// used as the default synthetic design space.
pub fn sample_designs() -> Vec<(String, FreeDesign)> {
    let rows: [(f64, f64, f64, f64); 8] = [
        (15.0, 90.48, 4.77, 6.13),
        (25.0, 120.52, 4.77, 6.62),
        (36.0, 98.42, 4.77, 6.74),
        (40.0, 90.48, 4.77, 6.13),
        (50.0, 120.40, 4.77, 6.41),
        (62.0, 99.00, 4.77, 6.36),
        (73.0, 128.90, 4.77, 6.40),
        (76.0, 103.22, 4.77, 6.18),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, &(gamma, l, ri, ro))| {
            (
                format!("Sample{}", i + 1),
                FreeDesign::from_io(gamma, l, ri, ro).expect("bundled designs are valid"),
            )
        })
        .collect()
}

/// Generate one dataset by evaluating a truth model over the grid for each
/// design.
///
/// States the truth model cannot evaluate (kinematic singularities, no
/// pressure equilibrium) become records flagged `buckled = true` with zero
/// force — the stand-in for physically inadmissible configurations. With
/// `noise_sigma > 0`, Gaussian noise with standard deviation
/// `noise_sigma * max|F|` (resp. `max|M|`) is added to the admissible
/// forces; maxima are taken over the clean generated set. Byte-identical
/// output for a given `seed`.
pub fn generate_synthetic<M: ForceModel + Sync>(
    designs: &[(String, FreeDesign)],
    grid: &ExperimentGrid,
    truth: &M,
    noise_sigma: f64,
    seed: u64,
) -> Dataset {
    struct Point {
        sample: usize,
        state: Option<KinematicState>,
        pressure: f64,
    }

    let mut points = Vec::with_capacity(designs.len() * grid.configurations_per_design());
    for (idx, (_, design)) in designs.iter().enumerate() {
        for &dl in &grid.dl_m {
            for &dphi in &grid.dphi_rad {
                let state = KinematicState::from_deltas(design, dl, dphi).ok();
                for &p in &grid.pressures_pa {
                    points.push(Point {
                        sample: idx,
                        state,
                        pressure: p,
                    });
                }
            }
        }
    }

    let taus: Vec<Option<GeneralizedForce>> = points
        .par_iter()
        .map(|pt| {
            let state = pt.state.as_ref()?;
            truth
                .predict(state, pt.pressure, &designs[pt.sample].1)
                .ok()
        })
        .collect();

    let f_max = taus
        .iter()
        .flatten()
        .map(|t| t.force.abs())
        .fold(0.0, f64::max);
    let m_max = taus
        .iter()
        .flatten()
        .map(|t| t.moment.abs())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if noise_sigma > 0.0 && f_max > 0.0 && m_max > 0.0 {
        Some((
            Normal::new(0.0, noise_sigma * f_max).expect("valid sigma"),
            Normal::new(0.0, noise_sigma * m_max).expect("valid sigma"),
        ))
    } else {
        None
    };

    let mut records = Vec::with_capacity(points.len());
    for (pt, tau) in points.iter().zip(&taus) {
        let (name, design) = &designs[pt.sample];
        // inadmissible states keep a placeholder state at the reference
        let state = pt
            .state
            .unwrap_or_else(|| KinematicState::reference(design));
        let record = match tau {
            Some(tau) => {
                let mut tau = *tau;
                if let Some((nf, nm)) = &noise {
                    tau.force += nf.sample(&mut rng);
                    tau.moment += nm.sample(&mut rng);
                }
                LoadRecord::new(name.clone(), *design, state, pt.pressure, tau, false)
            }
            None => LoadRecord::new(
                name.clone(),
                *design,
                state,
                pt.pressure,
                GeneralizedForce::ZERO,
                true,
            ),
        }
        .expect("grid pressures are non-negative");
        records.push(record);
    }
    Dataset::new("synthetic", records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::MaterialParams;
    use crate::lumped::{self, StiffnessMatrix};
    use crate::model::ModelParams;

    #[test]
    fn default_grid_matches_the_benchmark_protocol() {
        let grid = ExperimentGrid::default_grid();
        assert_eq!(grid.dl_m().len(), 11);
        assert_eq!(grid.dphi_rad().len(), 26);
        assert_eq!(grid.pressures_pa().len(), 10);
        assert_eq!(grid.state_count(), 286);
        assert_eq!(grid.configurations_per_design(), 2860);
        let max_p = grid.pressures_pa().iter().cloned().fold(0.0, f64::max);
        assert!((max_p - 72.5e3).abs() < 1e-9);
    }

    #[test]
    fn bundled_designs_are_eight_and_ordered() {
        let designs = sample_designs();
        assert_eq!(designs.len(), 8);
        assert_eq!(designs[0].0, "Sample1");
        assert!((designs[0].1.gamma() - 15f64.to_radians()).abs() < 1e-12);
        assert!((designs[7].1.gamma() - 76f64.to_radians()).abs() < 1e-12);
        // fiber angles strictly increase across the set
        for pair in designs.windows(2) {
            assert!(pair[0].1.gamma() < pair[1].1.gamma());
        }
    }

    #[test]
    fn one_design_yields_2860_records() {
        let designs = vec![sample_designs()[5].clone()];
        let truth = ModelParams::Lumped(StiffnessMatrix::new(120.0, 40.0, 8.0).unwrap());
        let data = generate_synthetic(&designs, &ExperimentGrid::default_grid(), &truth, 0.0, 1);
        assert_eq!(data.len(), 2860);
    }

    #[test]
    fn noiseless_generation_reproduces_the_truth_model_exactly() {
        let designs = vec![sample_designs()[5].clone()];
        let truth = MaterialParams::new(5e5, 1e6).unwrap();
        let grid = ExperimentGrid::from_io(
            &[-4.0, 0.0, 4.0],
            &[-60.0, 1.0, 80.0],
            &[0.0, 36.25, 72.5],
        );
        let data = generate_synthetic(&designs, &grid, &truth, 0.0, 3);
        assert_eq!(data.len(), 27);
        for r in data.unbuckled() {
            let tau = crate::continuum::predict(&r.state, r.pressure, &truth, &r.design).unwrap();
            assert_eq!(r.tau.force, tau.force);
            assert_eq!(r.tau.moment, tau.moment);
        }
    }

    #[test]
    fn lumped_overstretch_states_are_flagged_buckled() {
        // 15° fibers leave under 4 mm of slack; +4 and +5 mm overstretch
        let designs = vec![sample_designs()[0].clone()];
        let truth = ModelParams::Lumped(StiffnessMatrix::new(120.0, 40.0, 8.0).unwrap());
        let data = generate_synthetic(&designs, &ExperimentGrid::default_grid(), &truth, 0.0, 1);
        let buckled = data.records().iter().filter(|r| r.buckled).count();
        assert_eq!(buckled, 2 * 26 * 10, "flagged {buckled}");
        for r in data.records().iter().filter(|r| r.buckled) {
            assert!(lumped::predict(
                &r.state,
                r.pressure,
                &r.design,
                &StiffnessMatrix::new(120.0, 40.0, 8.0).unwrap()
            )
            .is_err());
        }
    }

    #[test]
    fn injected_noise_has_the_requested_scale() {
        let designs = vec![sample_designs()[5].clone()];
        let truth = ModelParams::Lumped(StiffnessMatrix::new(120.0, 40.0, 8.0).unwrap());
        let grid = ExperimentGrid::default_grid();
        let sigma = 0.01;

        let clean = generate_synthetic(&designs, &grid, &truth, 0.0, 17);
        let (f_max, m_max) = clean.normalizers().unwrap();

        for seed in [17u64, 18u64] {
            let noisy = generate_synthetic(&designs, &grid, &truth, sigma, seed);
            let deltas_f: Vec<f64> = clean
                .records()
                .iter()
                .zip(noisy.records())
                .filter(|(c, _)| !c.buckled)
                .map(|(c, n)| n.tau.force - c.tau.force)
                .collect();
            let deltas_m: Vec<f64> = clean
                .records()
                .iter()
                .zip(noisy.records())
                .filter(|(c, _)| !c.buckled)
                .map(|(c, n)| n.tau.moment - c.tau.moment)
                .collect();
            assert!(deltas_f.iter().any(|&d| d != 0.0));

            let std = |v: &[f64]| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
            };
            let sf = std(&deltas_f);
            let sm = std(&deltas_m);
            assert!(
                (sf - sigma * f_max).abs() <= 0.1 * sigma * f_max,
                "force noise std {sf} vs target {}",
                sigma * f_max
            );
            assert!(
                (sm - sigma * m_max).abs() <= 0.1 * sigma * m_max,
                "moment noise std {sm} vs target {}",
                sigma * m_max
            );
        }

        // different seeds produce different draws
        let a = generate_synthetic(&designs, &grid, &truth, sigma, 17);
        let b = generate_synthetic(&designs, &grid, &truth, sigma, 18);
        assert!(a
            .records()
            .iter()
            .zip(b.records())
            .any(|(x, y)| x.tau.force != y.tau.force));
    }

    #[test]
    fn generation_is_byte_identical_for_a_seed() {
        let designs = sample_designs()[..2].to_vec();
        let truth = ModelParams::Lumped(StiffnessMatrix::new(120.0, 40.0, 8.0).unwrap());
        let grid = ExperimentGrid::from_io(&[-2.0, 2.0], &[-30.0, 30.0], &[0.0, 50.0]);
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        generate_synthetic(&designs, &grid, &truth, 0.02, 99)
            .write_csv(&p1)
            .unwrap();
        generate_synthetic(&designs, &grid, &truth, 0.02, 99)
            .write_csv(&p2)
            .unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap(),
            "same seed must give identical bytes"
        );
    }
}
