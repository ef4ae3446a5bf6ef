use super::params::{DModule, FinnParams, SourceModule};
use super::FinnConfig;
use crate::autodiff::{BoundMlp, OutputActivation, Tape, Var};
use crate::error::{Error, Result};
use crate::fvm::{BoundaryCondition, SoilParams, CONCENTRATION_FLOOR};
use crate::store::ParamStore;

/// Closure of a boundary face on the tape.
#[derive(Debug, Clone, Copy)]
pub enum TapeFace {
    Ghost(Var),
    Flux(f64),
}

#[derive(Debug, Clone)]
pub enum BoundD {
    Fixed(f64),
    Scalar { raw: Var, unit: f64 },
    Network { mlp: BoundMlp, unit: f64 },
    Freundlich(SoilParams),
}

/// A [`FinnParams`] recorded onto a tape.
#[derive(Debug, Clone)]
pub struct BoundFinn {
    pub stencil_c: Var,
    pub stencil_ct: Var,
    pub d_c: BoundD,
    pub d_ct: BoundD,
    pub source_c: Option<BoundMlp>,
    pub source_ct: Option<BoundMlp>,
    pub known_d_e: Option<f64>,
    pub c_max: f64,
}

impl BoundFinn {
    /// Records every tensor of `params.to_store()` as a leaf.
    ///
    /// Returns the bound model and one leaf per store entry, in store order,
    /// so gradients line up with [`ParamStore::flat_trainable`].
    pub fn bind(params: &FinnParams, tape: &mut Tape) -> Result<(Self, ParamStore, Vec<Var>)> {
        let store = params.to_store();
        let leaves: Vec<Var> = store.iter().map(|(_, t)| tape.leaf(t.data.clone())).collect();
        let names: Vec<&str> = store.iter().map(|(n, _)| n).collect();
        let var = |name: &str| -> Result<Var> {
            names
                .iter()
                .position(|n| *n == name)
                .map(|i| leaves[i])
                .ok_or_else(|| Error::Graph(format!("tensor `{name}` was not bound")))
        };
        let mlp = |prefix: &str, m: &crate::autodiff::MlpParams| -> Result<BoundMlp> {
            let layers = (0..m.layers.len())
                .map(|k| {
                    let l = &m.layers[k];
                    Ok((
                        var(&format!("{prefix}.layer{k}.weight"))?,
                        var(&format!("{prefix}.layer{k}.bias"))?,
                        l.fan_in,
                        l.fan_out,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let raw_scale = match m.output {
                OutputActivation::ScaledSigmoid => var(&format!("{prefix}.raw_scale"))?,
                // never read for a linear output
                OutputActivation::Linear => layers[0].1,
            };
            Ok(BoundMlp {
                layers,
                raw_scale,
                output: m.output,
            })
        };
        let dmod = |prefix: &str, d: &DModule| -> Result<BoundD> {
            Ok(match d {
                DModule::Fixed(v) => BoundD::Fixed(*v),
                DModule::Scalar { unit, .. } => BoundD::Scalar {
                    raw: var(&format!("{prefix}.raw"))?,
                    unit: *unit,
                },
                DModule::Network { mlp: m, unit } => BoundD::Network {
                    mlp: mlp(prefix, m)?,
                    unit: *unit,
                },
                DModule::Freundlich(s) => BoundD::Freundlich(*s),
            })
        };
        let source = |prefix: &str, s: &SourceModule| -> Result<Option<BoundMlp>> {
            match s {
                SourceModule::None => Ok(None),
                SourceModule::Network(m) => mlp(prefix, m).map(Some),
            }
        };
        let bound = BoundFinn {
            stencil_c: var("stencil.c")?,
            stencil_ct: var("stencil.ct")?,
            d_c: dmod("d_c", &params.d_c)?,
            d_ct: dmod("d_ct", &params.d_ct)?,
            source_c: source("source_c", &params.source_c)?,
            source_ct: source("source_ct", &params.source_ct)?,
            known_d_e: params.known_d_e,
            c_max: params.c_max,
        };
        Ok((bound, store, leaves))
    }

    /// `D_e` as a tape value: known constant, or the `ct` scalar over phi.
    fn boundary_d_e(&self, tape: &mut Tape, porosity: f64) -> Result<Var> {
        if let Some(d) = self.known_d_e {
            return Ok(tape.constant(d));
        }
        match &self.d_ct {
            BoundD::Fixed(v) => Ok(tape.constant(v / porosity)),
            BoundD::Scalar { raw, unit } => {
                let v = tape.softplus(*raw);
                Ok(tape.scale(v, unit / porosity))
            }
            _ => Err(Error::Config(
                "a Cauchy boundary needs D_e: make it known or use a scalar ct module".into(),
            )),
        }
    }
}

impl BoundD {
    /// Cell-centered diffusivity for the concentrations in `c`; length 1
    /// when the module does not depend on c.
    pub fn eval(&self, tape: &mut Tape, c: Var, c_max: f64) -> Var {
        match self {
            BoundD::Fixed(v) => tape.constant(*v),
            BoundD::Scalar { raw, unit } => {
                let v = tape.softplus(*raw);
                tape.scale(v, *unit)
            }
            BoundD::Network { mlp, unit } => {
                let x = tape.clamp(c, 0.0, c_max);
                let y = mlp.forward(tape, x);
                tape.scale(y, *unit)
            }
            BoundD::Freundlich(s) => {
                let k = (1.0 - s.porosity) / s.porosity * s.rho_s * s.k_f * s.n_f;
                let x = tape.clamp(c, CONCENTRATION_FLOOR, f64::INFINITY);
                let p = tape.powf(x, s.n_f - 1.0);
                let kp = tape.scale(p, k);
                let r = tape.add_scalar(kp, 1.0);
                let d = tape.constant(s.d_e);
                tape.div(d, r)
            }
        }
    }
}

/// Learnable flux kernel over one field.
///
/// Each face contributes `D(u_i) * (w_self * u_i + w_neighbor * u_nb) / dx²`;
/// a [`TapeFace::Flux`] end replaces that face's contribution verbatim.
pub fn flux_kernel(tape: &mut Tape, u: Var, faces: (TapeFace, TapeFace), stencil: Var, d: Var, dx: f64) -> Var {
    let n = tape.value(u).len();
    let w_self = tape.gather(stencil, &[0]);
    let w_nb = tape.gather(stencil, &[1]);
    let ghost = |tape: &mut Tape, f: TapeFace| match f {
        TapeFace::Ghost(g) => g,
        TapeFace::Flux(_) => tape.constant(0.0),
    };
    let gl = ghost(tape, faces.0);
    let gr = ghost(tape, faces.1);
    let inner_w = tape.slice(u, 0, n - 1);
    let inner_e = tape.slice(u, 1, n - 1);
    let west = tape.concat(&[gl, inner_w]);
    let east = tape.concat(&[inner_e, gr]);

    let own = tape.mul(w_self, u);
    let inv_dx2 = 1.0 / (dx * dx);
    let face = |tape: &mut Tape, nb: Var, closure: TapeFace, at: usize| {
        let nbw = tape.mul(w_nb, nb);
        let stencil_out = tape.add(own, nbw);
        let flux = tape.mul(d, stencil_out);
        let flux = tape.scale(flux, inv_dx2);
        match closure {
            TapeFace::Ghost(_) => flux,
            TapeFace::Flux(nu) => {
                let mut mask = vec![1.0; n];
                mask[at] = 0.0;
                let mut fill = vec![0.0; n];
                fill[at] = nu;
                let mask = tape.leaf(mask);
                let fill = tape.leaf(fill);
                let kept = tape.mul(flux, mask);
                tape.add(kept, fill)
            }
        }
    };
    let fk_w = face(tape, west, faces.0, 0);
    let fk_e = face(tape, east, faces.1, n - 1);
    tape.add(fk_w, fk_e)
}

/// `F + q(u)`; the flux passes through unchanged without a source module.
pub fn state_kernel(tape: &mut Tape, flux: Var, u: Var, source: Option<&BoundMlp>) -> Var {
    match source {
        None => flux,
        Some(mlp) => {
            let q = mlp.forward(tape, u);
            tape.add(flux, q)
        }
    }
}

fn tape_faces(tape: &mut Tape, c: Var, n: usize, cfg: &FinnConfig, d_e: Option<Var>) -> (TapeFace, TapeFace) {
    let dx = cfg.grid.dx;
    let mut resolve = |bc: BoundaryCondition, edge: usize, inner: usize| match bc {
        BoundaryCondition::Dirichlet(v) => TapeFace::Ghost(tape.constant(v)),
        BoundaryCondition::Neumann(nu) => TapeFace::Flux(nu),
        BoundaryCondition::Cauchy(q) => {
            let outer = tape.gather(c, &[edge]);
            let next = tape.gather(c, &[inner]);
            let slope = tape.sub(next, outer);
            let slope = tape.scale(slope, 1.0 / (q * dx));
            TapeFace::Ghost(tape.mul(d_e.expect("Cauchy boundary resolved without D_e"), slope))
        }
    };
    let left = resolve(cfg.bc_left, 0, 1);
    let right = resolve(cfg.bc_right, n - 1, n - 2);
    (left, right)
}

/// Time derivative of the stacked state `[c; ct]`.
pub fn finn_rhs(tape: &mut Tape, state: Var, model: &BoundFinn, cfg: &FinnConfig) -> Result<Var> {
    let n = cfg.grid.n_volumes;
    if tape.value(state).len() != 2 * n {
        return Err(Error::Shape(format!(
            "state has {} values, expected {}",
            tape.value(state).len(),
            2 * n
        )));
    }
    let c = tape.slice(state, 0, n);
    let ct = tape.slice(state, n, n);
    let needs_d_e = matches!(cfg.bc_left, BoundaryCondition::Cauchy(_)) || matches!(cfg.bc_right, BoundaryCondition::Cauchy(_));
    let d_e = if needs_d_e {
        Some(model.boundary_d_e(tape, cfg.porosity)?)
    } else {
        None
    };
    // both flux kernels read c, with the same resolved boundary faces
    let faces = tape_faces(tape, c, n, cfg, d_e);

    let d_c = model.d_c.eval(tape, c, model.c_max);
    let flux_c = flux_kernel(tape, c, faces, model.stencil_c, d_c, cfg.grid.dx);
    let dc = state_kernel(tape, flux_c, c, model.source_c.as_ref());

    let d_ct = model.d_ct.eval(tape, c, model.c_max);
    let flux_ct = flux_kernel(tape, c, faces, model.stencil_ct, d_ct, cfg.grid.dx);
    let dct = state_kernel(tape, flux_ct, ct, model.source_ct.as_ref());

    Ok(tape.concat(&[dc, dct]))
}
