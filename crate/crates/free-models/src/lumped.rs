//! Linear lumped-parameter model.
//!
//! The fiber is treated as inextensible, which pins the deformed outer
//! radius to the kinematic state:
//!
//! ```text
//! r_o = sqrt(B^2 - l^2) / |Phi + phi|,   B = L / cos(Gamma),
//!                                        Phi = (L / Ro) * tan(Gamma)
//! ```
//!
//! Enclosed volume and its state derivative (the fluid Jacobian) follow in
//! closed form, and the wall responds with a linear stiffness matrix `K`:
//! `tau = J_V^T * P - K * [l - L, phi]`.
//!
//! The geometry degenerates when the twist unwinds the fiber helix
//! (`phi -> -Phi`); inside a guard band of [`SINGULARITY_GUARD`] radians the
//! model refuses to evaluate instead of returning huge finite numbers.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{FreeDesign, GeneralizedForce, KinematicState};

/// Half-width of the guard band around the singular twist (rad).
pub const SINGULARITY_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LumpedError {
    /// The twist has unwound the helix; radius and volume are ill-defined.
    #[error(
        "singular configuration: twist {twist_rad:.6} rad is within {SINGULARITY_GUARD} \
         of the unwound helix at {singular_twist_rad:.6} rad"
    )]
    SingularConfiguration {
        twist_rad: f64,
        singular_twist_rad: f64,
    },
    /// The current length exceeds the fiber length; an inextensible fiber
    /// cannot reach this state.
    #[error("fiber overstretch: length {length_m:.6} m exceeds fiber length {fiber_length_m:.6} m")]
    FiberOverstretch { length_m: f64, fiber_length_m: f64 },
}

/// Fiber helix constants of a design: fiber length `B` and initial wrap
/// angle `Phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedGeometry {
    fiber_length: f64,
    wrap_angle: f64,
}

impl LumpedGeometry {
    pub fn from_design(design: &FreeDesign) -> Self {
        let length = design.length();
        Self {
            fiber_length: length / design.gamma().cos(),
            wrap_angle: length / design.outer_radius() * design.gamma().tan(),
        }
    }

    /// Helical fiber length `B = L / cos(Gamma)` (m); always exceeds `L`.
    pub fn fiber_length(&self) -> f64 {
        self.fiber_length
    }

    /// Initial wrap angle `Phi = (L / Ro) tan(Gamma)` (rad); always positive.
    pub fn wrap_angle(&self) -> f64 {
        self.wrap_angle
    }

    fn check(&self, state: &KinematicState) -> Result<(), LumpedError> {
        let total_twist = self.wrap_angle + state.twist();
        if total_twist.abs() <= SINGULARITY_GUARD {
            return Err(LumpedError::SingularConfiguration {
                twist_rad: state.twist(),
                singular_twist_rad: -self.wrap_angle,
            });
        }
        if state.length() > self.fiber_length {
            return Err(LumpedError::FiberOverstretch {
                length_m: state.length(),
                fiber_length_m: self.fiber_length,
            });
        }
        Ok(())
    }
}

/// Symmetric positive-definite 2x2 wall stiffness.
///
/// With deformations expressed as `[l - L (m), phi (rad)]` and forces as
/// `[N, N·m]`, the entries carry units `k_a` N/m, `k_b` N·m/rad and the
/// coupling `k_c` N/rad (equivalently N·m/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StiffnessRepr", into = "StiffnessRepr")]
pub struct StiffnessMatrix {
    k_a: f64,
    k_b: f64,
    k_c: f64,
}

/// Serialized form; deserialization re-checks positive definiteness.
#[derive(Serialize, Deserialize)]
struct StiffnessRepr {
    k_a: f64,
    k_b: f64,
    k_c: f64,
}

impl From<StiffnessMatrix> for StiffnessRepr {
    fn from(k: StiffnessMatrix) -> Self {
        Self {
            k_a: k.k_a,
            k_b: k.k_b,
            k_c: k.k_c,
        }
    }
}

impl TryFrom<StiffnessRepr> for StiffnessMatrix {
    type Error = String;

    fn try_from(r: StiffnessRepr) -> Result<Self, String> {
        StiffnessMatrix::new(r.k_a, r.k_b, r.k_c)
    }
}

impl StiffnessMatrix {
    pub fn new(k_a: f64, k_b: f64, k_c: f64) -> Result<Self, String> {
        if !(k_a.is_finite() && k_b.is_finite() && k_c.is_finite()) {
            return Err(format!("stiffness entries must be finite, got ({k_a}, {k_b}, {k_c})"));
        }
        if k_a <= 0.0 || k_b <= 0.0 || k_a * k_b - k_c * k_c <= 0.0 {
            return Err(format!(
                "stiffness matrix must be positive definite: k_a = {k_a}, k_b = {k_b}, k_c = {k_c}"
            ));
        }
        Ok(Self { k_a, k_b, k_c })
    }

    /// Assemble `K = G G^T` from a lower-triangular factor
    /// `G = [[g11, 0], [g21, g22]]`. Positive definiteness is structural for
    /// any nonzero `g11`, `g22`; this is the parametrization the fitter
    /// optimizes over.
    pub fn from_cholesky(g11: f64, g21: f64, g22: f64) -> Result<Self, String> {
        Self::new(g11 * g11, g21 * g21 + g22 * g22, g11 * g21)
    }

    /// Lower-triangular factor `(g11, g21, g22)` with positive diagonal.
    pub fn cholesky_factors(&self) -> (f64, f64, f64) {
        let g11 = self.k_a.sqrt();
        let g21 = self.k_c / g11;
        let g22 = (self.k_b - g21 * g21).sqrt();
        (g11, g21, g22)
    }

    pub fn k_a(&self) -> f64 {
        self.k_a
    }

    pub fn k_b(&self) -> f64 {
        self.k_b
    }

    pub fn k_c(&self) -> f64 {
        self.k_c
    }

    pub fn as_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.k_a, self.k_c, self.k_c, self.k_b)
    }
}

/// Deformed outer radius (m) under the inextensible-fiber constraint.
pub fn outer_radius(state: &KinematicState, design: &FreeDesign) -> Result<f64, LumpedError> {
    let geom = LumpedGeometry::from_design(design);
    geom.check(state)?;
    let b = geom.fiber_length();
    let l = state.length();
    Ok((b * b - l * l).sqrt() / (geom.wrap_angle() + state.twist()).abs())
}

/// Enclosed fluid volume (m^3), neglecting wall thickness.
pub fn volume(state: &KinematicState, design: &FreeDesign) -> Result<f64, LumpedError> {
    let geom = LumpedGeometry::from_design(design);
    geom.check(state)?;
    let b = geom.fiber_length();
    let l = state.length();
    let wind = geom.wrap_angle() + state.twist();
    Ok(std::f64::consts::PI * (l * b * b - l * l * l) / (wind * wind))
}

/// Partial derivatives of the enclosed volume with respect to `[l, phi]`:
/// `[m^2, m^3/rad]`. Maps pressure to generalized fluid forces.
pub fn fluid_jacobian(
    state: &KinematicState,
    design: &FreeDesign,
) -> Result<Vector2<f64>, LumpedError> {
    let geom = LumpedGeometry::from_design(design);
    geom.check(state)?;
    let b = geom.fiber_length();
    let l = state.length();
    let wind = geom.wrap_angle() + state.twist();
    let pi = std::f64::consts::PI;
    Ok(Vector2::new(
        pi * (b * b - 3.0 * l * l) / (wind * wind),
        -2.0 * pi * (l * b * b - l * l * l) / (wind * wind * wind),
    ))
}

/// Generalized force prediction: `tau = J_V^T P - K [l - L, phi]`.
pub fn predict(
    state: &KinematicState,
    pressure_pa: f64,
    design: &FreeDesign,
    stiffness: &StiffnessMatrix,
) -> Result<GeneralizedForce, LumpedError> {
    let jacobian = fluid_jacobian(state, design)?;
    let tau = jacobian * pressure_pa - stiffness.as_matrix() * state.deltas(design);
    Ok(GeneralizedForce {
        force: tau[0],
        moment: tau[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::sample_designs;
    use crate::units::{deg_to_rad, mm_to_m};
    use proptest::prelude::*;

    fn design(gamma_deg: f64, l_mm: f64, ri_mm: f64, ro_mm: f64) -> FreeDesign {
        FreeDesign::from_io(gamma_deg, l_mm, ri_mm, ro_mm).unwrap()
    }

    #[test]
    fn reference_radius_is_unloaded_outer_radius() {
        for (_, d) in sample_designs() {
            let q = KinematicState::reference(&d);
            let r = outer_radius(&q, &d).unwrap();
            assert!(
                (r - d.outer_radius()).abs() <= 1e-12 * d.outer_radius(),
                "r_o = {r}, Ro = {}",
                d.outer_radius()
            );
        }
    }

    #[test]
    fn unwound_helix_is_singular() {
        // 15 deg fibers on a 90.48 mm tube: twisting by the full wrap angle
        // aligns the fibers with the axis.
        let d = design(15.0, 90.48, 4.77, 6.13);
        let geom = LumpedGeometry::from_design(&d);
        let q = KinematicState::new(d.length(), -geom.wrap_angle()).unwrap();
        assert!(matches!(
            outer_radius(&q, &d),
            Err(LumpedError::SingularConfiguration { .. })
        ));
        assert!(matches!(
            volume(&q, &d),
            Err(LumpedError::SingularConfiguration { .. })
        ));
        assert!(matches!(
            fluid_jacobian(&q, &d),
            Err(LumpedError::SingularConfiguration { .. })
        ));
    }

    #[test]
    fn overstretch_is_an_error() {
        let d = design(15.0, 90.48, 4.77, 6.13);
        let geom = LumpedGeometry::from_design(&d);
        let q = KinematicState::new(geom.fiber_length() + 1e-6, 0.0).unwrap();
        assert!(matches!(
            outer_radius(&q, &d),
            Err(LumpedError::FiberOverstretch { .. })
        ));
    }

    #[test]
    fn radius_matches_high_precision_oracle() {
        // 40 deg / 90.48 mm / Ro 6.13 mm at l = 92 mm, phi = 0.5 rad.
        // Expected values computed with 50-digit arithmetic (mpmath) from
        // the closed-form radius, volume and Jacobian expressions.
        let d = design(40.0, 90.48, 4.77, 6.13);
        let q = KinematicState::new(mm_to_m(92.0), 0.5).unwrap();

        let geom = LumpedGeometry::from_design(&d);
        assert!((geom.fiber_length() - 0.1181132515387845681435867).abs() < 1e-15);
        assert!((geom.wrap_angle() - 12.38527481711587201701921).abs() < 1e-12);

        let r = outer_radius(&q, &d).unwrap();
        assert!(
            (r - 0.005748618818653621184980485).abs() < 1e-15,
            "r_o = {r:.18}"
        );
        let v = volume(&q, &d).unwrap();
        assert!(
            (v - 9.551349227918664740496605e-6).abs() < 1e-18,
            "V = {v:.18e}"
        );
        let j = fluid_jacobian(&q, &d).unwrap();
        assert!((j[0] - -2.164892566600583313275745e-4).abs() < 1e-16);
        assert!((j[1] - -1.482521616881828490299597e-6).abs() < 1e-18);
    }

    #[test]
    fn reference_volume_is_a_cylinder() {
        for (_, d) in sample_designs() {
            let q = KinematicState::reference(&d);
            let v = volume(&q, &d).unwrap();
            let expected = std::f64::consts::PI * d.length() * d.outer_radius().powi(2);
            assert!((v - expected).abs() <= 1e-12 * expected, "V = {v}");
        }
    }

    #[test]
    fn volume_vanishes_at_taut_fiber() {
        let d = design(30.0, 100.0, 4.0, 6.0);
        let geom = LumpedGeometry::from_design(&d);
        let q = KinematicState::new(geom.fiber_length() * (1.0 - 1e-9), 0.0).unwrap();
        let v = volume(&q, &d).unwrap();
        let v_ref = std::f64::consts::PI * d.length() * d.outer_radius().powi(2);
        assert!(v > 0.0 && v < 1e-4 * v_ref, "V = {v}");
    }

    #[test]
    fn volume_is_consistent_with_radius() {
        // V must equal pi * l * r_o^2 with r_o from the radius expression.
        let d = design(25.0, 120.52, 4.77, 6.62);
        let q = KinematicState::new(mm_to_m(119.0), -0.2).unwrap();
        let v = volume(&q, &d).unwrap();
        let r = outer_radius(&q, &d).unwrap();
        let composed = std::f64::consts::PI * q.length() * r * r;
        assert!((v - composed).abs() <= 1e-12 * composed, "{v} vs {composed}");
    }

    #[test]
    fn jacobian_first_component_vanishes_at_magic_angle() {
        // cos^2(Gamma) = 1/3 makes the volume stationary in length at l = L.
        let magic = (1.0 / 3f64.sqrt()).acos();
        let d = FreeDesign::new(magic, 0.1, 4.0e-3, 6.0e-3).unwrap();
        let q = KinematicState::reference(&d);
        let j = fluid_jacobian(&q, &d).unwrap();
        let scale = std::f64::consts::PI * d.length().powi(2);
        assert!(j[0].abs() < 1e-12 * scale, "J1 = {}", j[0]);
    }

    #[test]
    fn jacobian_first_component_is_negative_below_magic_angle() {
        // At Gamma = 40 deg, B^2 = L^2 / cos^2(40) < 3 L^2, so the first
        // component of J_V at l = L is negative: volume grows as a
        // below-magic-angle design contracts.
        let d = design(40.0, 90.48, 4.77, 6.13);
        let q = KinematicState::reference(&d);
        let j = fluid_jacobian(&q, &d).unwrap();
        assert!(j[0] < 0.0, "J1 = {}", j[0]);

        // and positive above the magic angle
        let d_hi = design(62.0, 99.0, 4.77, 6.36);
        let j_hi = fluid_jacobian(&KinematicState::reference(&d_hi), &d_hi).unwrap();
        assert!(j_hi[0] > 0.0, "J1 = {}", j_hi[0]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let d = design(36.0, 98.42, 4.77, 6.74);
        for &(dl_mm, phi) in &[(0.0, 0.0), (-5.0, 0.4), (4.0, -1.2), (2.5, 2.0)] {
            let q = KinematicState::from_deltas(&d, mm_to_m(dl_mm), phi).unwrap();
            let j = fluid_jacobian(&q, &d).unwrap();

            let h_l = 1e-7 * d.length();
            let v_lp = volume(
                &KinematicState::new(q.length() + h_l, q.twist()).unwrap(),
                &d,
            )
            .unwrap();
            let v_lm = volume(
                &KinematicState::new(q.length() - h_l, q.twist()).unwrap(),
                &d,
            )
            .unwrap();
            let h_p = 1e-7;
            let v_pp = volume(
                &KinematicState::new(q.length(), q.twist() + h_p).unwrap(),
                &d,
            )
            .unwrap();
            let v_pm = volume(
                &KinematicState::new(q.length(), q.twist() - h_p).unwrap(),
                &d,
            )
            .unwrap();

            let fd = Vector2::new((v_lp - v_lm) / (2.0 * h_l), (v_pp - v_pm) / (2.0 * h_p));
            let scale = j.amax().max(1e-30);
            assert!(
                ((fd - j).amax()) / scale < 1e-5,
                "fd = {fd:?}, analytic = {j:?}"
            );
        }
    }

    #[test]
    fn predict_reference_unpressurized_is_zero() {
        let d = design(50.0, 120.40, 4.77, 6.41);
        let k = StiffnessMatrix::new(120.0, 40.0, 8.0).unwrap();
        let q = KinematicState::reference(&d);
        let tau = predict(&q, 0.0, &d, &k).unwrap();
        assert_eq!(tau.force, 0.0);
        assert_eq!(tau.moment, 0.0);
    }

    #[test]
    fn predict_reference_pressurized_is_pure_fluid_force() {
        let d = design(50.0, 120.40, 4.77, 6.41);
        let k = StiffnessMatrix::new(120.0, 40.0, 8.0).unwrap();
        let q = KinematicState::reference(&d);
        let p = 50e3;
        let tau = predict(&q, p, &d, &k).unwrap();
        let j = fluid_jacobian(&q, &d).unwrap();
        assert_eq!(tau.force, j[0] * p);
        assert_eq!(tau.moment, j[1] * p);
    }

    #[test]
    fn predict_unpressurized_is_a_decoupled_spring_for_diagonal_k() {
        let d = design(73.0, 128.9, 4.77, 6.40);
        let k = StiffnessMatrix::new(200.0, 15.0, 0.0).unwrap();
        let dl = mm_to_m(3.0);
        let dphi = deg_to_rad(-40.0);
        let q = KinematicState::from_deltas(&d, dl, dphi).unwrap();
        let tau = predict(&q, 0.0, &d, &k).unwrap();
        assert!((tau.force - (-200.0 * dl)).abs() < 1e-12);
        assert!((tau.moment - (-15.0 * dphi)).abs() < 1e-12);
    }

    #[test]
    fn force_is_affine_in_pressure() {
        let d = design(62.0, 99.0, 4.77, 6.36);
        let k = StiffnessMatrix::new(300.0, 25.0, -20.0).unwrap();
        let q = KinematicState::from_deltas(&d, mm_to_m(-2.0), 0.7).unwrap();
        let (p1, p2) = (13e3, 48e3);
        let t_sum = predict(&q, p1 + p2, &d, &k).unwrap().as_vector();
        let t_p2 = predict(&q, p2, &d, &k).unwrap().as_vector();
        let t_p1 = predict(&q, p1, &d, &k).unwrap().as_vector();
        let t_0 = predict(&q, 0.0, &d, &k).unwrap().as_vector();
        let lhs = t_sum - t_p2;
        let rhs = t_p1 - t_0;
        assert!((lhs - rhs).amax() <= 1e-12 * rhs.amax().max(1.0));
    }

    #[test]
    fn elastic_response_superposes_at_zero_pressure() {
        let d = design(25.0, 120.52, 4.77, 6.62);
        let k = StiffnessMatrix::new(90.0, 12.0, 5.0).unwrap();
        let d1 = (mm_to_m(2.0), 0.3);
        let d2 = (mm_to_m(-4.0), -0.9);
        let q1 = KinematicState::from_deltas(&d, d1.0, d1.1).unwrap();
        let q2 = KinematicState::from_deltas(&d, d2.0, d2.1).unwrap();
        let q_sum = KinematicState::from_deltas(&d, d1.0 + d2.0, d1.1 + d2.1).unwrap();
        let lhs = predict(&q_sum, 0.0, &d, &k).unwrap().as_vector();
        let rhs = predict(&q1, 0.0, &d, &k).unwrap().as_vector()
            + predict(&q2, 0.0, &d, &k).unwrap().as_vector();
        assert!((lhs - rhs).amax() <= 1e-12 * rhs.amax().max(1e-3));
    }

    #[test]
    fn stiffness_requires_positive_definiteness() {
        assert!(StiffnessMatrix::new(1.0, 1.0, 1.0).is_err()); // det = 0
        assert!(StiffnessMatrix::new(-1.0, 1.0, 0.0).is_err());
        assert!(StiffnessMatrix::new(1.0, 1.0, 2.0).is_err());
        assert!(StiffnessMatrix::new(120.0, 40.0, 8.0).is_ok());
    }

    #[test]
    fn cholesky_factors_roundtrip() {
        let k = StiffnessMatrix::new(120.0, 40.0, 8.0).unwrap();
        let (g11, g21, g22) = k.cholesky_factors();
        let back = StiffnessMatrix::from_cholesky(g11, g21, g22).unwrap();
        assert!((back.k_a() - k.k_a()).abs() < 1e-12 * k.k_a());
        assert!((back.k_b() - k.k_b()).abs() < 1e-12 * k.k_b());
        assert!((back.k_c() - k.k_c()).abs() < 1e-12 * k.k_c().abs());
    }

    proptest! {
        #[test]
        fn prop_reference_radius_recovers_ro(
            gamma_deg in 1.0f64..89.0,
            l_mm in 20.0f64..300.0,
            ri_mm in 1.0f64..8.0,
            wall_mm in 0.2f64..4.0,
        ) {
            let d = FreeDesign::from_io(gamma_deg, l_mm, ri_mm, ri_mm + wall_mm).unwrap();
            let r = outer_radius(&KinematicState::reference(&d), &d).unwrap();
            prop_assert!((r - d.outer_radius()).abs() <= 1e-11 * d.outer_radius());
        }

        #[test]
        fn prop_guard_band_never_returns_a_number(
            gamma_deg in 5.0f64..85.0,
            l_mm in 50.0f64..200.0,
            offset in -9.9e-7f64..9.9e-7,
        ) {
            let d = FreeDesign::from_io(gamma_deg, l_mm, 4.0, 6.0).unwrap();
            let geom = LumpedGeometry::from_design(&d);
            let q = KinematicState::new(d.length(), -geom.wrap_angle() + offset).unwrap();
            let refused = matches!(
                outer_radius(&q, &d),
                Err(LumpedError::SingularConfiguration { .. })
            );
            prop_assert!(refused);
        }

        #[test]
        fn prop_cholesky_parametrization_is_positive_definite(
            g11 in 0.01f64..100.0,
            g21 in -100.0f64..100.0,
            g22 in 0.01f64..100.0,
        ) {
            let k = StiffnessMatrix::from_cholesky(g11, g21, g22).unwrap();
            prop_assert!(k.k_a() > 0.0);
            prop_assert!(k.k_b() > 0.0);
            prop_assert!(k.k_a() * k.k_b() - k.k_c() * k.k_c() > 0.0);
        }
    }
}
