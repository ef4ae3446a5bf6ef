//! The finite volume neural network: learnable flux kernels over a
//! finite-volume mesh, state kernels, closed-loop rollout and retardation
//! extraction.
//!
//! Both equations read the dissolved concentration `c` in their flux
//! kernels. The `c` equation uses a diffusivity module approximating
//! `D_e / R(c)`; the `ct` equation uses a second module approximating
//! `D_e * phi`.

mod kernels;
mod params;
mod rollout;

pub use kernels::{finn_rhs, flux_kernel, state_kernel, BoundD, BoundFinn, TapeFace};
pub use params::{DModule, FinnParams, SourceModule, DEFAULT_LAYERS};
pub use rollout::{extract_retardation, rollout, rollout_on_tape, Integrator, RetardationCurve};

use crate::dataset::DatasetMeta;
use crate::error::{Error, Result};
use crate::fvm::{BoundaryCondition, Grid1D};

/// Scenario the model is run in: mesh, boundary conditions and porosity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinnConfig {
    pub grid: Grid1D,
    pub bc_left: BoundaryCondition,
    pub bc_right: BoundaryCondition,
    pub porosity: f64,
}

impl FinnConfig {
    pub fn from_meta(meta: &DatasetMeta) -> Result<Self> {
        let soil = meta
            .soil
            .ok_or_else(|| Error::Config("dataset metadata carries no soil parameters (porosity needed)".into()))?;
        Ok(Self {
            grid: meta.grid,
            bc_left: meta.bc_left,
            bc_right: meta.bc_right,
            porosity: soil.porosity,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.bc_left.validate()?;
        self.bc_right.validate()?;
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(Error::Config(format!("porosity must lie in (0, 1), got {}", self.porosity)));
        }
        Ok(())
    }

    /// Largest Dirichlet value on either end, or 1 when there is none.
    pub fn source_concentration(&self) -> f64 {
        [self.bc_left, self.bc_right]
            .iter()
            .filter_map(|bc| match bc {
                BoundaryCondition::Dirichlet(v) => Some(v.abs()),
                _ => None,
            })
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .unwrap_or(1.0)
    }
}
