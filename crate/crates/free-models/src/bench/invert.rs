//! Numerical inversion: find the kinematic state that produces a target
//! generalized force at a given pressure.

use nalgebra::{Matrix2, Vector2};

use crate::model::ForceModel;
use crate::types::{FreeDesign, GeneralizedForce, KinematicState};

use super::BenchError;

/// Residual tolerance on the normalized force components.
const TARGET_TOL: f64 = 1e-9;
/// Residual level still accepted when iteration stalls short of
/// [`TARGET_TOL`].
const ACCEPT_TOL: f64 = 1e-6;
const MAX_ITERATIONS: usize = 100;

/// Solve `predict(q, P) = target` for `q` by a damped Newton iteration with
/// a finite-difference Jacobian, starting from `initial`.
///
/// Residual components are normalized by the target magnitudes (floored at
/// 1 mN and 10 µN·m), so convergence means each component matched to about
/// a part in 10^6 or better.
pub fn invert<M: ForceModel>(
    model: &M,
    target: &GeneralizedForce,
    pressure_pa: f64,
    design: &FreeDesign,
    initial: &KinematicState,
) -> Result<KinematicState, BenchError> {
    let scale = Vector2::new(target.force.abs().max(1e-3), target.moment.abs().max(1e-5));

    let residual = |q: &KinematicState| -> Option<Vector2<f64>> {
        let tau = model.predict(q, pressure_pa, design).ok()?;
        Some(Vector2::new(
            (tau.force - target.force) / scale[0],
            (tau.moment - target.moment) / scale[1],
        ))
    };

    let mut q = *initial;
    let mut r = residual(&q).ok_or_else(|| {
        BenchError::Invert("model undefined at the initial state".to_string())
    })?;
    let mut best = (q, r.amax());

    for iteration in 0..MAX_ITERATIONS {
        if r.amax() < TARGET_TOL {
            return Ok(q);
        }

        // central-difference Jacobian of the residual in (l, phi)
        let h_l = 1e-7 * design.length();
        let h_p = 1e-7;
        let probe = |dl: f64, dp: f64| -> Option<Vector2<f64>> {
            let state = KinematicState::new(q.length() + dl, q.twist() + dp).ok()?;
            residual(&state)
        };
        let (rl_p, rl_m, rp_p, rp_m) = match (
            probe(h_l, 0.0),
            probe(-h_l, 0.0),
            probe(0.0, h_p),
            probe(0.0, -h_p),
        ) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => {
                return Err(BenchError::Invert(format!(
                    "model undefined around l = {:.6} m, phi = {:.4} rad",
                    q.length(),
                    q.twist()
                )))
            }
        };
        let jacobian = Matrix2::from_columns(&[
            (rl_p - rl_m) / (2.0 * h_l),
            (rp_p - rp_m) / (2.0 * h_p),
        ]);

        let step = jacobian.lu().solve(&(-r)).ok_or_else(|| {
            BenchError::Invert("singular Jacobian during inversion".to_string())
        })?;

        // damping: halve until the residual actually shrinks
        let mut advanced = false;
        let mut damping = 1.0;
        for _ in 0..30 {
            let candidate =
                KinematicState::new(q.length() + damping * step[0], q.twist() + damping * step[1]);
            if let Ok(candidate) = candidate {
                if let Some(rc) = residual(&candidate) {
                    if rc.amax() < r.amax() {
                        q = candidate;
                        r = rc;
                        advanced = true;
                        break;
                    }
                }
            }
            damping *= 0.5;
        }
        if r.amax() < best.1 {
            best = (q, r.amax());
        }
        if !advanced {
            break;
        }
        let _ = iteration;
    }

    if best.1 < ACCEPT_TOL {
        Ok(best.0)
    } else {
        Err(BenchError::InvertDiverged {
            iterations: MAX_ITERATIONS,
            best_residual: best.1,
        })
    }
}
