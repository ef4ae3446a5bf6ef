use super::SoilParams;
use crate::error::{Error, Result};

/// Lower clamp on c inside the Freundlich law (kg/m³); R diverges at c = 0
/// whenever n_f < 1.
pub const CONCENTRATION_FLOOR: f64 = 1e-6;

/// Freundlich retardation factor
/// `R = 1 + (1 - phi) / phi * rho_s * K_f * n_f * c^(n_f - 1)`.
pub fn retardation_freundlich(c: f64, soil: &SoilParams) -> Result<f64> {
    if c.is_nan() || c < 0.0 {
        return Err(Error::Domain(format!("concentration must be non-negative, got {c}")));
    }
    let c = c.max(CONCENTRATION_FLOOR);
    let phi = soil.porosity;
    Ok(1.0 + (1.0 - phi) / phi * soil.rho_s * soil.k_f * soil.n_f * c.powf(soil.n_f - 1.0))
}
