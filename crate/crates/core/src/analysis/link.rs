//! Fiber link budget.

use crate::{Error, Result};

/// Standard telecom fiber loss near 1550 nm.
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// Fiber length in km that consumes `loss_db` of link budget.
pub fn fiber_distance(loss_db: f64, attenuation_db_per_km: f64) -> Result<f64> {
    if !(attenuation_db_per_km > 0.0 && attenuation_db_per_km.is_finite()) {
        return Err(Error::param(
            "attenuation_db_per_km",
            format!("{attenuation_db_per_km} must be positive and finite"),
        ));
    }
    if !(loss_db >= 0.0 && loss_db.is_finite()) {
        return Err(Error::param("loss_db", format!("{loss_db} must be finite and >= 0")));
    }
    Ok(loss_db * attenuation_db_per_km.recip())
}

/// Inverse of [`fiber_distance`].
pub fn fiber_loss(distance_km: f64, attenuation_db_per_km: f64) -> Result<f64> {
    if !(attenuation_db_per_km > 0.0 && attenuation_db_per_km.is_finite()) {
        return Err(Error::param("attenuation_db_per_km", "must be positive and finite"));
    }
    if !(distance_km >= 0.0 && distance_km.is_finite()) {
        return Err(Error::param("distance_km", format!("{distance_km} must be finite and >= 0")));
    }
    Ok(distance_km * attenuation_db_per_km)
}
