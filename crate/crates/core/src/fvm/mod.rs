//! Finite-volume machinery for 1-D diffusion-sorption: mesh, boundary
//! conditions, the classical flux assembly and the reference simulator.

mod simulate;
mod sorption;
mod stencil;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use simulate::{simulate_diffusion_sorption, SimOptions, Sorption};
pub use sorption::{retardation_freundlich, CONCENTRATION_FLOOR};
pub use stencil::{flux_divergence, flux_divergence_with, ghost_values, FaceTreatment, Ghosts};

/// Uniform 1-D control-volume mesh.
///
/// `length` is descriptive only: `n_volumes * dx` need not equal it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n_volumes: usize,
    pub dx: f64,
    pub length: f64,
}

impl Grid1D {
    pub fn new(n_volumes: usize, dx: f64, length: f64) -> Result<Self> {
        let g = Self {
            n_volumes,
            dx,
            length,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_volumes < 3 {
            return Err(Error::Config(format!(
                "grid needs at least 3 volumes, got {}",
                self.n_volumes
            )));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {}", self.dx)));
        }
        Ok(())
    }

    /// Cell-center coordinate of volume `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }
}

/// Condition imposed at one end of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// Prescribed concentration (kg/m³).
    Dirichlet(f64),
    /// Prescribed flux contribution (kg/(m³·day)), usually zero.
    Neumann(f64),
    /// Solution-dependent condition driven by the reservoir flow rate Q (m³/day).
    Cauchy(f64),
}

impl BoundaryCondition {
    pub fn value(&self) -> f64 {
        match *self {
            BoundaryCondition::Dirichlet(v) | BoundaryCondition::Neumann(v) | BoundaryCondition::Cauchy(v) => v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundaryCondition::Cauchy(q) if !(q > 0.0 && q.is_finite()) => {
                Err(Error::Config(format!("Cauchy flow rate must be positive, got {q}")))
            }
            bc if !bc.value().is_finite() => Err(Error::Config(format!("non-finite boundary value in {bc}"))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(v) => write!(f, "dirichlet:{v:e}"),
            BoundaryCondition::Neumann(v) => write!(f, "neumann:{v:e}"),
            BoundaryCondition::Cauchy(v) => write!(f, "cauchy:{v:e}"),
        }
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("boundary condition `{s}` is not `kind:value`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad boundary value in `{s}`")))?;
        let bc = match kind.trim() {
            "dirichlet" => BoundaryCondition::Dirichlet(value),
            "neumann" => BoundaryCondition::Neumann(value),
            "cauchy" => BoundaryCondition::Cauchy(value),
            other => return Err(Error::Format(format!("unknown boundary kind `{other}`"))),
        };
        Ok(bc)
    }
}

/// Homogeneous soil properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilParams {
    /// Effective diffusion coefficient (m²/day).
    pub d_e: f64,
    pub porosity: f64,
    /// Bulk density (kg/m³).
    pub rho_s: f64,
    /// Freundlich coefficient ((m³/kg)^n_f).
    pub k_f: f64,
    /// Freundlich exponent.
    pub n_f: f64,
}

impl SoilParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_e", self.d_e),
            ("rho_s", self.rho_s),
            ("k_f", self.k_f),
            ("n_f", self.n_f),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("soil parameter {name} must be positive, got {v}")));
            }
        }
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(Error::Config(format!("porosity must lie in (0, 1), got {}", self.porosity)));
        }
        if self.n_f > 1.0 {
            return Err(Error::Config(format!("Freundlich exponent must be at most 1, got {}", self.n_f)));
        }
        Ok(())
    }
}

/// Dissolved and total concentration on every volume at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub c: Vec<f64>,
    pub ct: Vec<f64>,
}

impl FieldPair {
    pub fn zeros(n: usize) -> Self {
        Self {
            c: vec![0.0; n],
            ct: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `[c; ct]` as one state vector.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.c.clone();
        v.extend_from_slice(&self.ct);
        v
    }

    pub fn from_stacked(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self {
            c: v[..n].to_vec(),
            ct: v[n..].to_vec(),
        }
    }
}
