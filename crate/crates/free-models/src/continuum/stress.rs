//! Deformation kinematics and hyperelastic stress of the tube wall.
//!
//! A material point at reference coordinates `(R, Theta, Z)` maps to
//! `(r, theta, z)` with
//!
//! ```text
//! r     = sqrt((R^2 - Ri^2) / lambda_z + r_i^2)
//! theta = Theta + Z * phi / L
//! z     = lambda_z * Z
//! ```
//!
//! which keeps the wall a tube and conserves material volume. The wall
//! energy density superposes an isotropic neo-Hookean term and a standard
//! quadratic fiber-reinforcement term; the constitutively determinate part
//! of the Cauchy stress (before the incompressibility pressure is applied)
//! is its deformation-gradient derivative contracted back onto the current
//! configuration.

use nalgebra::{Matrix3, Vector3};

use crate::types::{FreeDesign, KinematicState};

use super::{ContinuumError, DeformedGeometry, MaterialParams};

/// Unit fiber direction in reference cylindrical coordinates `(R, Theta, Z)`.
///
/// The helix is right-handed: circumferential component `sin(Gamma)`, axial
/// component `cos(Gamma)`. Mirrored designs are represented by negative
/// `Gamma`, which only test code constructs.
pub fn fiber_direction(design: &FreeDesign) -> Vector3<f64> {
    Vector3::new(0.0, design.gamma().sin(), design.gamma().cos())
}

/// Current radius of the material circle that started at reference radius
/// `R`.
pub fn deformed_radius(reference_radius: f64, geom: &DeformedGeometry, design: &FreeDesign) -> f64 {
    let ri2 = design.inner_radius() * design.inner_radius();
    ((reference_radius * reference_radius - ri2) / geom.stretch()
        + geom.inner_radius() * geom.inner_radius())
    .sqrt()
}

/// Reference radius of the material circle currently at radius `r`
/// (inverse of [`deformed_radius`]).
pub fn reference_radius(current_radius: f64, geom: &DeformedGeometry, design: &FreeDesign) -> f64 {
    let ri2 = design.inner_radius() * design.inner_radius();
    (geom.stretch() * (current_radius * current_radius - geom.inner_radius().powi(2)) + ri2).sqrt()
}

/// Deformation gradient at reference radius `R` in the wall,
/// `Ri <= R <= Ro`.
///
/// Rows and columns are ordered `(r, theta, z)` x `(R, Theta, Z)`:
///
/// ```text
///     [ R / (r lambda_z)   0       0          ]
/// F = [ 0                  r / R   r phi / L  ]
///     [ 0                  0       lambda_z   ]
/// ```
///
/// The twist entry uses the current end-to-end twist `phi` over the
/// reference length, matching the coordinate map above. `det F = 1` by
/// construction.
pub fn deformation_gradient(
    reference_radius: f64,
    state: &KinematicState,
    geom: &DeformedGeometry,
    design: &FreeDesign,
) -> Result<Matrix3<f64>, ContinuumError> {
    let tol = 1e-12 * design.outer_radius();
    if reference_radius < design.inner_radius() - tol
        || reference_radius > design.outer_radius() + tol
    {
        return Err(ContinuumError::RadiusOutsideWall {
            radius_m: reference_radius,
            inner_m: design.inner_radius(),
            outer_m: design.outer_radius(),
        });
    }
    let lambda = geom.stretch();
    let r = deformed_radius(reference_radius, geom, design);
    Ok(Matrix3::new(
        reference_radius / (r * lambda),
        0.0,
        0.0,
        0.0,
        r / reference_radius,
        r * state.twist() / design.length(),
        0.0,
        0.0,
        lambda,
    ))
}

/// Strain energy density (Pa) of the composite wall:
///
/// ```text
/// Psi = C1/2 * (I1 - 3) + C2/2 * (I4 - 1)^2
/// ```
///
/// with `I1 = tr(F^T F)` and `I4 = a0 . (F^T F) a0` the squared fiber
/// stretch. Only meaningful on isochoric deformations (`det F = 1`), but
/// evaluated verbatim on any input so that finite-difference probes of the
/// energy remain well-defined.
pub fn strain_energy(f: &Matrix3<f64>, params: &MaterialParams, design: &FreeDesign) -> f64 {
    let c = f.transpose() * f;
    let i1 = c.trace();
    let a0 = fiber_direction(design);
    let i4 = (c * a0).dot(&a0);
    0.5 * params.c1() * (i1 - 3.0) + 0.5 * params.c2() * (i4 - 1.0) * (i4 - 1.0)
}

/// Extra stress (Pa): the constitutive part of the Cauchy stress,
/// `(dPsi/dF) F^T`, before the incompressibility pressure `-b I` is
/// subtracted downstream:
///
/// ```text
/// sigma_hat = C1 * F F^T + 2 C2 (I4 - 1) * (F a0)(F a0)^T
/// ```
pub fn extra_stress(
    f: &Matrix3<f64>,
    params: &MaterialParams,
    design: &FreeDesign,
) -> Matrix3<f64> {
    let a0 = fiber_direction(design);
    let m = f * a0;
    let i4 = m.dot(&m);
    params.c1() * f * f.transpose() + 2.0 * params.c2() * (i4 - 1.0) * m * m.transpose()
}
