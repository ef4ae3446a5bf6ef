use super::kernels::{finn_rhs, BoundFinn};
use super::params::FinnParams;
use super::FinnConfig;
use crate::autodiff::{Tape, Var};
use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::fvm::{FieldPair, CONCENTRATION_FLOOR};
use crate::ode::{integrate_adaptive, integrate_adaptive_system, integrate_fixed_system, AdaptiveOptions, Method, TapeSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Fixed { method: Method, substeps: usize },
    Adaptive(AdaptiveOptions),
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Adaptive(AdaptiveOptions::default())
    }
}

/// Closed-loop rollout recorded on `tape`: every step consumes the model's
/// own previous state.
///
/// With `truncate = Some(k)` the state is detached every `k` steps, which
/// cuts backpropagation through time into windows of `k` steps.
#[allow(clippy::too_many_arguments)]
pub fn rollout_on_tape(
    tape: &mut Tape,
    model: &BoundFinn,
    cfg: &FinnConfig,
    initial: Var,
    t_grid: &[f64],
    integrator: Integrator,
    max_abs: Option<f64>,
    truncate: Option<usize>,
) -> Result<Vec<Var>> {
    let window = truncate.unwrap_or(usize::MAX).max(1);
    let mut states = vec![initial];
    let mut start = 0;
    while start + 1 < t_grid.len() {
        let end = start.saturating_add(window).min(t_grid.len() - 1);
        let u0 = if start == 0 {
            initial
        } else {
            tape.detach(states[start])
        };
        let mut sys = TapeSystem {
            tape: &mut *tape,
            rhs: |tape: &mut Tape, _t: f64, u: Var| finn_rhs(tape, u, model, cfg),
            max_abs,
        };
        let span = &t_grid[start..=end];
        let chunk = match integrator {
            Integrator::Fixed { method, substeps } => integrate_fixed_system(&mut sys, u0, span, method, substeps),
            Integrator::Adaptive(opts) => integrate_adaptive_system(&mut sys, u0, span, &opts).map(|(s, _)| s),
        }
        .map_err(|e| match e {
            Error::Divergence { step, reason } => Error::Divergence {
                step: start + step,
                reason,
            },
            Error::Stiffness { t, h } => Error::Divergence {
                step: start + span.partition_point(|&tk| tk <= t),
                reason: format!("step size underflow (h = {h:e}) at t = {t}"),
            },
            other => other,
        })?;
        states.extend_from_slice(&chunk[1..]);
        start = end;
    }
    Ok(states)
}

fn rollout_meta(cfg: &FinnConfig) -> DatasetMeta {
    DatasetMeta {
        grid: cfg.grid,
        soil: None,
        bc_left: cfg.bc_left,
        bc_right: cfg.bc_right,
        provenance: "finn:rollout".into(),
    }
}

/// Rolls the model out from `initial` over `t_grid`, without teacher forcing.
pub fn rollout(params: &FinnParams, cfg: &FinnConfig, initial: &FieldPair, t_grid: &[f64], integrator: Integrator) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.grid.n_volumes;
    if initial.c.len() != n || initial.ct.len() != n {
        return Err(Error::Shape(format!("initial condition does not match {n} volumes")));
    }
    let u0 = initial.stacked();
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step: 0,
            reason: "non-finite initial state".into(),
        });
    }
    let mut tape = Tape::new();
    let (model, _, _) = BoundFinn::bind(params, &mut tape)?;
    let states = match integrator {
        Integrator::Fixed { .. } => {
            let init = tape.leaf(u0);
            let vars = rollout_on_tape(&mut tape, &model, cfg, init, t_grid, integrator, None, None)?;
            vars.iter().map(|&v| tape.value(v).to_vec()).collect::<Vec<_>>()
        }
        Integrator::Adaptive(opts) => {
            let base = tape.len();
            let sol = integrate_adaptive(
                |_, u| {
                    tape.truncate(base);
                    let s = tape.leaf(u.to_vec());
                    let du = finn_rhs(&mut tape, s, &model, cfg)?;
                    Ok(tape.value(du).to_vec())
                },
                &u0,
                t_grid,
                &opts,
            )
            .map_err(|e| match e {
                Error::Stiffness { t, h } => Error::Divergence {
                    step: t_grid.partition_point(|&tk| tk <= t),
                    reason: format!("step size underflow (h = {h:e}) at t = {t}"),
                },
                other => other,
            })?;
            sol.states
        }
    };
    Dataset::from_states(t_grid.to_vec(), &states, rollout_meta(cfg))
}

/// Learned retardation factor `R(c) = D_e / D_c(c)`.
///
/// Each diffusivity is taken together with its stencil scale
/// `(w_neighbor - w_self) / 2`, since only the product enters the flux.
#[derive(Debug, Clone, PartialEq)]
pub struct RetardationCurve {
    pub c: Vec<f64>,
    pub r: Vec<f64>,
    /// Indices where `D_c` underflowed and `r` holds `+inf`.
    pub underflow: Vec<usize>,
}

const UNDERFLOW: f64 = 1e-12;

pub fn extract_retardation(params: &FinnParams, porosity: f64, c_values: &[f64]) -> Result<RetardationCurve> {
    let d_e = params.effective_d_e(porosity)?;
    if let Some(&bad) = c_values
        .iter()
        .find(|&&c| !(CONCENTRATION_FLOOR..=params.c_max).contains(&c))
    {
        return Err(Error::Domain(format!(
            "concentration {bad} outside [{CONCENTRATION_FLOOR}, {}]",
            params.c_max
        )));
    }
    let scale = |w: [f64; 2]| 0.5 * (w[1] - w[0]);
    let d_e = d_e * scale(params.stencil_ct);
    let d: Vec<f64> = params
        .d_c
        .eval(c_values, params.c_max)
        .into_iter()
        .map(|v| v * scale(params.stencil_c))
        .collect();
    let mut underflow = Vec::new();
    let r = d
        .iter()
        .enumerate()
        .map(|(i, &di)| {
            if di < UNDERFLOW {
                underflow.push(i);
                f64::INFINITY
            } else {
                d_e / di
            }
        })
        .collect();
    Ok(RetardationCurve {
        c: c_values.to_vec(),
        r,
        underflow,
    })
}
