use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{softplus, softplus_inv, Layer, MlpParams, OutputActivation};
use crate::error::{Error, Result};
use crate::fvm::{retardation_freundlich, SoilParams, CONCENTRATION_FLOOR};
use crate::store::{ParamStore, Tensor};

/// Layer chain of the diffusivity network: three hidden layers of 15.
pub const DEFAULT_LAYERS: [usize; 5] = [1, 15, 15, 15, 1];

/// Diffusivity module of one flux kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum DModule {
    /// Known constant, never trained.
    Fixed(f64),
    /// Learnable constant `unit * softplus(raw)`.
    Scalar { raw: f64, unit: f64 },
    /// Learnable function of c: `unit * network(clamp(c, 0, c_max))`.
    Network { mlp: MlpParams, unit: f64 },
    /// The true `D_e / R(c)` under a Freundlich isotherm, never trained.
    Freundlich(SoilParams),
}

impl DModule {
    pub fn scalar(value: f64, unit: f64) -> Self {
        DModule::Scalar {
            raw: softplus_inv(value / unit),
            unit,
        }
    }

    /// Plain evaluation at each concentration.
    pub fn eval(&self, c: &[f64], c_max: f64) -> Vec<f64> {
        match self {
            DModule::Fixed(v) => vec![*v; c.len()],
            DModule::Scalar { raw, unit } => vec![unit * softplus(*raw); c.len()],
            DModule::Network { mlp, unit } => c.iter().map(|&ci| unit * mlp.eval(ci.clamp(0.0, c_max))).collect(),
            DModule::Freundlich(soil) => c
                .iter()
                .map(|&ci| soil.d_e / retardation_freundlich(ci.max(CONCENTRATION_FLOOR), soil).unwrap_or(f64::NAN))
                .collect(),
        }
    }

    /// The module's value when it does not depend on c.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            DModule::Fixed(v) => Some(*v),
            DModule::Scalar { raw, unit } => Some(unit * softplus(*raw)),
            _ => None,
        }
    }

    fn write(&self, prefix: &str, store: &mut ParamStore) {
        match self {
            DModule::Fixed(v) => store.insert(format!("{prefix}.fixed"), Tensor::scalar(*v, false)),
            DModule::Scalar { raw, unit } => {
                store.insert(format!("{prefix}.raw"), Tensor::scalar(*raw, true));
                store.insert(format!("{prefix}.unit"), Tensor::scalar(*unit, false));
            }
            DModule::Network { mlp, unit } => {
                write_mlp(prefix, mlp, store);
                store.insert(format!("{prefix}.unit"), Tensor::scalar(*unit, false));
            }
            DModule::Freundlich(s) => store.insert(
                format!("{prefix}.freundlich"),
                Tensor::vector(vec![s.d_e, s.porosity, s.rho_s, s.k_f, s.n_f], false),
            ),
        }
    }

    fn read(prefix: &str, store: &ParamStore) -> Result<Self> {
        if let Some(t) = store.get(&format!("{prefix}.fixed")) {
            return Ok(DModule::Fixed(scalar_of(t, prefix)?));
        }
        if let Some(t) = store.get(&format!("{prefix}.raw")) {
            return Ok(DModule::Scalar {
                raw: scalar_of(t, prefix)?,
                unit: store.require_scalar(&format!("{prefix}.unit"))?,
            });
        }
        if let Some(t) = store.get(&format!("{prefix}.freundlich")) {
            let [d_e, porosity, rho_s, k_f, n_f] = t.data[..] else {
                return Err(Error::Checkpoint(format!("{prefix}.freundlich needs 5 values")));
            };
            return Ok(DModule::Freundlich(SoilParams {
                d_e,
                porosity,
                rho_s,
                k_f,
                n_f,
            }));
        }
        if store.contains(&format!("{prefix}.layer0.weight")) {
            return Ok(DModule::Network {
                mlp: read_mlp(prefix, store)?,
                unit: store.require_scalar(&format!("{prefix}.unit"))?,
            });
        }
        Err(Error::Checkpoint(format!("no diffusivity module under `{prefix}`")))
    }
}

/// Optional learnable source/sink term of a state kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceModule {
    None,
    Network(MlpParams),
}

/// All parameters and model-level settings of a FINN instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FinnParams {
    /// `(w_self, w_neighbor)` shared by every face of the c equation.
    pub stencil_c: [f64; 2],
    pub stencil_ct: [f64; 2],
    pub learn_stencil: bool,
    /// Approximates `D_e / R(c)`.
    pub d_c: DModule,
    /// Approximates `D_e * phi`.
    pub d_ct: DModule,
    pub source_c: SourceModule,
    pub source_ct: SourceModule,
    /// Diffusion coefficient when it is known (experimental mode).
    pub known_d_e: Option<f64>,
    /// Upper clamp on network inputs.
    pub c_max: f64,
}

fn scalar_of(t: &Tensor, name: &str) -> Result<f64> {
    match t.data[..] {
        [v] => Ok(v),
        _ => Err(Error::Checkpoint(format!("`{name}` should hold one value"))),
    }
}

fn write_mlp(prefix: &str, mlp: &MlpParams, store: &mut ParamStore) {
    for (k, l) in mlp.layers.iter().enumerate() {
        let w = Tensor {
            shape: vec![l.fan_out, l.fan_in],
            data: l.weights.clone(),
            trainable: true,
        };
        store.insert(format!("{prefix}.layer{k}.weight"), w);
        store.insert(format!("{prefix}.layer{k}.bias"), Tensor::vector(l.bias.clone(), true));
    }
    match mlp.output {
        OutputActivation::ScaledSigmoid => {
            store.insert(format!("{prefix}.raw_scale"), Tensor::scalar(mlp.raw_scale, true));
        }
        OutputActivation::Linear => {
            store.insert(format!("{prefix}.linear_output"), Tensor::scalar(1.0, false));
        }
    }
}

fn read_mlp(prefix: &str, store: &ParamStore) -> Result<MlpParams> {
    let mut layers = Vec::new();
    while let Some(w) = store.get(&format!("{prefix}.layer{}.weight", layers.len())) {
        let k = layers.len();
        let b = store.require(&format!("{prefix}.layer{k}.bias"))?;
        let &[fan_out, fan_in] = w.shape.as_slice() else {
            return Err(Error::Checkpoint(format!("{prefix}.layer{k}.weight is not a matrix")));
        };
        layers.push(Layer {
            weights: w.data.clone(),
            bias: b.data.clone(),
            fan_in,
            fan_out,
        });
    }
    let (raw_scale, output) = if store.contains(&format!("{prefix}.linear_output")) {
        (0.0, OutputActivation::Linear)
    } else {
        (store.require_scalar(&format!("{prefix}.raw_scale"))?, OutputActivation::ScaledSigmoid)
    };
    let mlp = MlpParams {
        layers,
        raw_scale,
        output,
    };
    mlp.validate()?;
    Ok(mlp)
}

impl FinnParams {
    /// Synthetic-data setup: learnable stencils near `(-1, 1)`, a network
    /// for `D_e / R(c)` and a learnable scalar for `D_e * phi`, both
    /// expressed in multiples of `d_unit` (m²/day).
    pub fn synthetic(seed: u64, d_unit: f64, c_max: f64) -> Result<Self> {
        if !(d_unit > 0.0 && c_max > 0.0) {
            return Err(Error::Config("d_unit and c_max must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // one draw per stencil scales both weights, so the initial kernel
        // has no spurious reaction term w_self + w_neighbor
        let mut stencil = || {
            let d = rng.gen_range(-0.1..=0.1);
            [-1.0 - d, 1.0 + d]
        };
        let stencil_c = stencil();
        let stencil_ct = stencil();
        // a distinct stream so the network does not reuse the stencil draws
        let mlp = MlpParams::init(&DEFAULT_LAYERS, seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?;
        Ok(Self {
            stencil_c,
            stencil_ct,
            learn_stencil: true,
            d_c: DModule::Network { mlp, unit: d_unit },
            d_ct: DModule::scalar(0.5 * d_unit, d_unit),
            source_c: SourceModule::None,
            source_ct: SourceModule::None,
            known_d_e: None,
            c_max,
        })
    }

    /// Experimental-data setup: `D_e` known, so the `ct` module is fixed to
    /// `D_e * phi` and only the stencil and the retardation network learn.
    pub fn experimental(seed: u64, d_e: f64, porosity: f64, d_unit: f64, c_max: f64) -> Result<Self> {
        let mut p = Self::synthetic(seed, d_unit, c_max)?;
        p.d_ct = DModule::Fixed(d_e * porosity);
        p.known_d_e = Some(d_e);
        Ok(p)
    }

    /// Exact physics: classical stencil, `D_e / R(c)` and `D_e * phi`.
    pub fn frozen_physics(soil: &SoilParams, c_max: f64) -> Self {
        Self {
            stencil_c: [-1.0, 1.0],
            stencil_ct: [-1.0, 1.0],
            learn_stencil: false,
            d_c: DModule::Freundlich(*soil),
            d_ct: DModule::Fixed(soil.d_e * soil.porosity),
            source_c: SourceModule::None,
            source_ct: SourceModule::None,
            known_d_e: Some(soil.d_e),
            c_max,
        }
    }

    /// `D_e` used by Cauchy ghosts and retardation extraction.
    pub fn effective_d_e(&self, porosity: f64) -> Result<f64> {
        if let Some(d) = self.known_d_e {
            return Ok(d);
        }
        self.d_ct
            .constant_value()
            .map(|v| v / porosity)
            .ok_or_else(|| Error::Config("D_e is neither known nor recoverable from a scalar ct module".into()))
    }

    pub fn to_store(&self) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("stencil.c", Tensor::vector(self.stencil_c.to_vec(), self.learn_stencil));
        s.insert("stencil.ct", Tensor::vector(self.stencil_ct.to_vec(), self.learn_stencil));
        self.d_c.write("d_c", &mut s);
        self.d_ct.write("d_ct", &mut s);
        for (prefix, src) in [("source_c", &self.source_c), ("source_ct", &self.source_ct)] {
            if let SourceModule::Network(mlp) = src {
                write_mlp(prefix, mlp, &mut s);
            }
        }
        s.insert("config.c_max", Tensor::scalar(self.c_max, false));
        if let Some(d) = self.known_d_e {
            s.insert("config.known_d_e", Tensor::scalar(d, false));
        }
        s
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let stencil = |name: &str| -> Result<([f64; 2], bool)> {
            let t = store.require(name)?;
            match t.data[..] {
                [a, b] => Ok(([a, b], t.trainable)),
                _ => Err(Error::Checkpoint(format!("`{name}` needs 2 values"))),
            }
        };
        let (stencil_c, learn_c) = stencil("stencil.c")?;
        let (stencil_ct, _) = stencil("stencil.ct")?;
        let source = |prefix: &str| -> Result<SourceModule> {
            if store.contains(&format!("{prefix}.layer0.weight")) {
                Ok(SourceModule::Network(read_mlp(prefix, store)?))
            } else {
                Ok(SourceModule::None)
            }
        };
        Ok(Self {
            stencil_c,
            stencil_ct,
            learn_stencil: learn_c,
            d_c: DModule::read("d_c", store)?,
            d_ct: DModule::read("d_ct", store)?,
            source_c: source("source_c")?,
            source_ct: source("source_ct")?,
            known_d_e: store.get("config.known_d_e").map(|t| t.data[0]),
            c_max: store.require_scalar("config.c_max")?,
        })
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.to_store().trainable_len()
    }
}
