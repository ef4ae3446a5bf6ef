//! Scenario presets for the synthetic benchmark and the three core samples.

use std::path::Path;

use super::dataset_dir::{grid_from_kv, soil_from_kv, soil_to_kv};
use super::kv::KeyValues;
use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::fvm::{simulate_diffusion_sorption, BoundaryCondition, FieldPair, Grid1D, SimOptions, SoilParams};
use crate::model::FinnConfig;

pub const PRESET_NAMES: [&str; 5] = ["synthetic-train", "synthetic-test", "core1", "core2", "core2b"];

/// Number of output rows in every preset.
pub const PRESET_TIMES: usize = 2000;

/// Volumes used to mesh the core samples.
pub const CORE_VOLUMES: usize = 26;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub soil: SoilParams,
    pub grid: Grid1D,
    pub bc_left: BoundaryCondition,
    pub bc_right: BoundaryCondition,
    /// Nominal experiment end (days).
    pub t_end: f64,
    /// Output spacing (days); row k sits at `k * dt`.
    pub dt: f64,
    pub n_times: usize,
    /// Source concentration at the top (kg/m³).
    pub c_s: f64,
    /// Core radius (m); stored only.
    pub radius: Option<f64>,
    /// Bottom reservoir flow rate (m³/day).
    pub flow_rate: Option<f64>,
}

fn synthetic_soil() -> SoilParams {
    SoilParams {
        d_e: 5.0e-4,
        porosity: 0.29,
        rho_s: 2880.0,
        k_f: 3.53e-4,
        n_f: 0.874,
    }
}

fn core_soil(d_e: f64) -> SoilParams {
    // Freundlich constants are only known for the synthetic soil
    SoilParams {
        d_e,
        porosity: 0.288,
        rho_s: 1957.0,
        ..synthetic_soil()
    }
}

struct Core {
    name: &'static str,
    d_e: f64,
    length: f64,
    radius: Option<f64>,
    t_end: f64,
    flow_rate: Option<f64>,
    c_s: f64,
}

fn core(c: Core) -> Result<ScenarioConfig> {
    let bc_right = match c.flow_rate {
        Some(q) => BoundaryCondition::Cauchy(q),
        None => BoundaryCondition::Neumann(0.0),
    };
    Ok(ScenarioConfig {
        name: c.name.into(),
        soil: core_soil(c.d_e),
        grid: Grid1D::new(CORE_VOLUMES, c.length / CORE_VOLUMES as f64, c.length)?,
        bc_left: BoundaryCondition::Dirichlet(c.c_s),
        bc_right,
        t_end: c.t_end,
        dt: c.t_end / (PRESET_TIMES - 1) as f64,
        n_times: PRESET_TIMES,
        c_s: c.c_s,
        radius: c.radius,
        flow_rate: c.flow_rate,
    })
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let synthetic = |name: &str, c_s: f64| -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            name: name.into(),
            soil: synthetic_soil(),
            grid: Grid1D::new(26, 0.04, 1.0)?,
            bc_left: BoundaryCondition::Dirichlet(c_s),
            bc_right: BoundaryCondition::Cauchy(1.0),
            t_end: 1.0e4,
            dt: 5.0,
            n_times: PRESET_TIMES,
            c_s,
            radius: None,
            flow_rate: Some(1.0),
        })
    };
    match name {
        "synthetic-train" => synthetic(name, 1.0),
        "synthetic-test" => synthetic(name, 0.7),
        "core1" => core(Core {
            name: "core1",
            d_e: 2.00e-5,
            length: 0.0254,
            radius: Some(0.02375),
            t_end: 38.81,
            flow_rate: Some(1.01e-4),
            c_s: 1.4,
        }),
        "core2" => core(Core {
            name: "core2",
            d_e: 2.00e-5,
            length: 0.02604,
            radius: Some(0.02375),
            t_end: 39.82,
            flow_rate: Some(1.04e-4),
            c_s: 1.6,
        }),
        "core2b" => core(Core {
            name: "core2b",
            d_e: 2.78e-5,
            length: 0.105,
            radius: None,
            t_end: 48.88,
            flow_rate: None,
            c_s: 1.4,
        }),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.soil.validate()?;
        self.grid.validate()?;
        self.bc_left.validate()?;
        self.bc_right.validate()?;
        let positive = [("t_end", self.t_end), ("dt", self.dt), ("c_s", self.c_s)];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if self.n_times < 2 {
            return Err(Error::Config(format!("need at least 2 output times, got {}", self.n_times)));
        }
        Ok(())
    }

    pub fn t_grid(&self) -> Vec<f64> {
        (0..self.n_times).map(|k| k as f64 * self.dt).collect()
    }

    /// Clean initial state `c = ct = 0`.
    pub fn initial(&self) -> FieldPair {
        FieldPair::zeros(self.grid.n_volumes)
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            grid: self.grid,
            soil: Some(self.soil),
            bc_left: self.bc_left,
            bc_right: self.bc_right,
            provenance: format!("simulate:{}", self.name),
        }
    }

    pub fn finn_config(&self) -> FinnConfig {
        FinnConfig {
            grid: self.grid,
            bc_left: self.bc_left,
            bc_right: self.bc_right,
            porosity: self.soil.porosity,
        }
    }

    /// Ground-truth dataset for this scenario.
    pub fn simulate(&self, opts: &SimOptions) -> Result<Dataset> {
        self.validate()?;
        let mut d = simulate_diffusion_sorption(
            &self.grid,
            &self.soil,
            (self.bc_left, self.bc_right),
            &self.t_grid(),
            &self.initial(),
            opts,
        )?;
        d.meta = self.meta();
        Ok(d)
    }

    /// Same scenario with a different top concentration.
    pub fn with_source(&self, c_s: f64) -> Self {
        Self {
            c_s,
            bc_left: BoundaryCondition::Dirichlet(c_s),
            ..self.clone()
        }
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("scenario.name", &self.name);
        soil_to_kv(&self.soil, &mut kv);
        kv.set("grid.n_volumes", self.grid.n_volumes);
        kv.set("grid.dx", self.grid.dx);
        kv.set("grid.length", self.grid.length);
        kv.set("bc.left", self.bc_left);
        kv.set("bc.right", self.bc_right);
        kv.set("time.t_end", self.t_end);
        kv.set("time.dt", self.dt);
        kv.set("time.n_times", self.n_times);
        kv.set("source.c_s", self.c_s);
        kv.set("sample.radius", opt(self.radius));
        kv.set("sample.flow_rate", opt(self.flow_rate));
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let s = Self {
            name: kv.require("scenario.name")?.to_string(),
            soil: soil_from_kv(kv)?,
            grid: grid_from_kv(kv)?,
            bc_left: kv.parse_value("bc.left")?,
            bc_right: kv.parse_value("bc.right")?,
            t_end: kv.parse_value("time.t_end")?,
            dt: kv.parse_value("time.dt")?,
            n_times: kv.parse_value("time.n_times")?,
            c_s: kv.parse_value("source.c_s")?,
            radius: kv.parse_optional("sample.radius")?,
            flow_rate: kv.parse_optional("sample.flow_rate")?,
        };
        s.validate()?;
        Ok(s)
    }

    /// A preset name, or a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match preset(name_or_path) {
            Err(Error::UnknownPreset(_)) if Path::new(name_or_path).is_file() => {
                Self::from_kv(&KeyValues::read(Path::new(name_or_path))?)
            }
            other => other,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}
