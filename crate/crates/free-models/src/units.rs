//! Unit conversions between internal SI quantities and field-data units.
//!
//! Everything inside the crate is SI: meters, radians, pascals, newtons,
//! newton-meters. Data files and the CLI speak the units common in actuator
//! test logs: millimeters, degrees, kilopascals and newton-millimeters.
//! These helpers are the only sanctioned crossing point.

pub fn mm_to_m(mm: f64) -> f64 {
    mm * 1e-3
}

pub fn m_to_mm(m: f64) -> f64 {
    m * 1e3
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn kpa_to_pa(kpa: f64) -> f64 {
    kpa * 1e3
}

pub fn pa_to_kpa(pa: f64) -> f64 {
    pa * 1e-3
}

/// Newton-millimeters (moment in data files) to newton-meters.
pub fn nmm_to_nm(nmm: f64) -> f64 {
    nmm * 1e-3
}

pub fn nm_to_nmm(nm: f64) -> f64 {
    nm * 1e3
}
