#![allow(dead_code)]

use finn_core::autodiff::Tape;
use finn_core::fvm::{FaceTreatment, Ghosts, SoilParams};
use finn_core::model::TapeFace;

pub fn sand() -> SoilParams {
    SoilParams {
        d_e: 5.0e-4,
        porosity: 0.29,
        rho_s: 2880.0,
        k_f: 3.53e-4,
        n_f: 0.874,
    }
}

/// Freundlich retardation written out from the isotherm derivative.
pub fn freundlich_oracle(c: f64, s: &SoilParams) -> f64 {
    let ds_dc = s.k_f * s.n_f * c.powf(s.n_f - 1.0);
    1.0 + (1.0 - s.porosity) / s.porosity * s.rho_s * ds_dc
}

/// Records resolved ghosts as tape faces.
pub fn tape_faces(tape: &mut Tape, g: &Ghosts) -> (TapeFace, TapeFace) {
    let mut one = |f: FaceTreatment| match f {
        FaceTreatment::Ghost(v) => TapeFace::Ghost(tape.constant(v)),
        FaceTreatment::Flux(nu) => TapeFace::Flux(nu),
    };
    let left = one(g.left);
    (left, one(g.right))
}

/// Mean squared difference over both fields, volumes `0..n - 1` and rows
/// `0..rows`: the interior the outlet curve does not observe directly.
pub fn interior_mse(pred: &finn_core::Dataset, truth: &finn_core::Dataset, rows: usize) -> f64 {
    let n = truth.n_volumes();
    let mut s = 0.0;
    let mut k = 0usize;
    for t in 0..rows {
        for i in 0..n - 1 {
            s += (pred.c[t][i] - truth.c[t][i]).powi(2) + (pred.ct[t][i] - truth.ct[t][i]).powi(2);
            k += 2;
        }
    }
    s / k as f64
}
