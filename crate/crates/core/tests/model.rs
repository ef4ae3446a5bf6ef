mod common;

use common::{freundlich_oracle, sand, tape_faces};
use finn_core::autodiff::Tape;
use finn_core::fvm::{
    flux_divergence, flux_divergence_with, ghost_values, simulate_diffusion_sorption,
    BoundaryCondition::{self, Cauchy, Dirichlet, Neumann},
    FieldPair, Grid1D, SimOptions,
};
use finn_core::model::{
    extract_retardation, finn_rhs, flux_kernel, rollout, BoundFinn, DModule, FinnConfig, FinnParams, Integrator,
};
use finn_core::train::{loss_and_gradient, LossMask};
use finn_core::Dataset;
use proptest::prelude::*;

fn cfg(n: usize, left: BoundaryCondition, right: BoundaryCondition) -> FinnConfig {
    FinnConfig {
        grid: Grid1D::new(n, 0.04, n as f64 * 0.04).unwrap(),
        bc_left: left,
        bc_right: right,
        porosity: 0.29,
    }
}

fn bc_strategy() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![
        (0.0f64..2.0).prop_map(Dirichlet),
        (-1e-2f64..1e-2).prop_map(Neumann),
        (0.1f64..5.0).prop_map(Cauchy),
    ]
}

proptest! {
    #[test]
    fn classical_weights_reduce_to_reference_assembly(
        u in prop::collection::vec(0.0f64..1.5, 26),
        left in bc_strategy(),
        right in bc_strategy(),
        d in 1e-5f64..1e-3,
    ) {
        let g = ghost_values(&u, left, right, 5e-4, 0.04).unwrap();
        let reference = flux_divergence(&u, &g, d, 0.04).unwrap();
        let mut tape = Tape::new();
        let uv = tape.leaf(u.clone());
        let st = tape.leaf(vec![-1.0, 1.0]);
        let dv = tape.constant(d);
        let faces = tape_faces(&mut tape, &g);
        let f = flux_kernel(&mut tape, uv, faces, st, dv, 0.04);
        for (a, b) in tape.value(f).iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn antisymmetric_stencil_conserves_under_zero_flux(
        u in prop::collection::vec(0.0f64..1.5, 3..30),
        w in 0.2f64..3.0,
        d in 1e-5f64..1e-3,
    ) {
        let n = u.len();
        let mut tape = Tape::new();
        let uv = tape.leaf(u.clone());
        let st = tape.leaf(vec![-w, w]);
        let dv = tape.constant(d);
        let g = ghost_values(&u, Neumann(0.0), Neumann(0.0), d, 0.04).unwrap();
        let faces = tape_faces(&mut tape, &g);
        let f = flux_kernel(&mut tape, uv, faces, st, dv, 0.04);
        let total: f64 = tape.value(f).iter().sum();
        let scale = w * d / 0.0016 * n as f64;
        prop_assert!(total.abs() <= 1e-13 * scale);
    }
}

#[test]
fn frozen_physics_rhs_matches_reference_assembly() {
    let soil = sand();
    let params = FinnParams::frozen_physics(&soil, 2.0);
    for (left, right) in [(Dirichlet(1.0), Cauchy(1.0)), (Dirichlet(0.7), Neumann(0.0)), (Neumann(0.0), Cauchy(0.5))] {
        let cfg = cfg(26, left, right);
        let c: Vec<f64> = (0..26).map(|i| 0.95 * (-0.15 * i as f64).exp() + 0.02).collect();
        let ct: Vec<f64> = c.iter().map(|v| 2.0 * v).collect();

        let g = ghost_values(&c, left, right, soil.d_e, 0.04).unwrap();
        let d_cell: Vec<f64> = c.iter().map(|&v| soil.d_e / freundlich_oracle(v, &soil)).collect();
        let mut want = flux_divergence_with(&c, &g, &d_cell, 0.04).unwrap();
        want.extend(flux_divergence(&c, &g, soil.d_e * soil.porosity, 0.04).unwrap());

        let mut tape = Tape::new();
        let (model, _, _) = BoundFinn::bind(&params, &mut tape).unwrap();
        let state = tape.leaf([c.clone(), ct].concat());
        let rhs = finn_rhs(&mut tape, state, &model, &cfg).unwrap();
        for (i, (a, b)) in tape.value(rhs).iter().zip(&want).enumerate() {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-3), "{left:?}/{right:?} entry {i}: {a} vs {b}");
        }
    }
}

#[test]
fn frozen_physics_rollout_tracks_the_simulator() {
    let soil = sand();
    let grid = Grid1D::new(26, 0.04, 1.0).unwrap();
    let bc = (Dirichlet(1.0), Cauchy(1.0));
    let t: Vec<f64> = (0..=100).map(|k| 5.0 * k as f64).collect();
    let truth = simulate_diffusion_sorption(&grid, &soil, bc, &t, &FieldPair::zeros(26), &SimOptions::default()).unwrap();
    let cfg = FinnConfig::from_meta(&truth.meta).unwrap();
    let params = FinnParams::frozen_physics(&soil, 2.0);
    let pred = rollout(&params, &cfg, &truth.frame(0), &t, Integrator::default()).unwrap();
    let worst = pred
        .c
        .iter()
        .flatten()
        .zip(truth.c.iter().flatten())
        .chain(pred.ct.iter().flatten().zip(truth.ct.iter().flatten()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "worst deviation {worst}");
}

#[test]
fn dirichlet_value_only_reaches_the_first_volume() {
    let params = FinnParams::synthetic(4, 3.2e-4, 2.0).unwrap();
    let state: Vec<f64> = (0..52).map(|i| 0.3 + 0.01 * (i % 26) as f64).collect();
    let eval = |left: f64| {
        let mut tape = Tape::new();
        let (model, _, _) = BoundFinn::bind(&params, &mut tape).unwrap();
        let s = tape.leaf(state.clone());
        let r = finn_rhs(&mut tape, s, &model, &cfg(26, Dirichlet(left), Neumann(0.0))).unwrap();
        tape.value(r).to_vec()
    };
    let (a, b) = (eval(1.0), eval(0.5));
    for i in 0..52 {
        let changed = a[i] != b[i];
        assert_eq!(changed, i == 0 || i == 26, "entry {i}");
    }
}

#[test]
fn zero_flux_ends_conserve_with_classical_weights() {
    // scalar diffusivities and antisymmetric weights telescope exactly
    let mut params = FinnParams::synthetic(9, 3.2e-4, 2.0).unwrap();
    params.d_c = DModule::scalar(2e-4, 3.2e-4);
    params.stencil_c = [-1.07, 1.07];
    params.stencil_ct = [-0.93, 0.93];
    let cfg = cfg(26, Neumann(0.0), Neumann(0.0));
    let state: Vec<f64> = (0..52).map(|i| ((i as f64) * 0.37).sin().abs()).collect();
    let mut tape = Tape::new();
    let (model, _, _) = BoundFinn::bind(&params, &mut tape).unwrap();
    let s = tape.leaf(state);
    let r = finn_rhs(&mut tape, s, &model, &cfg).unwrap();
    let v = tape.value(r);
    let (dc, dct): (f64, f64) = (v[..26].iter().sum(), v[26..].iter().sum());
    assert!(dc.abs() < 1e-13 && dct.abs() < 1e-13, "{dc} {dct}");
}

#[test]
fn frozen_physics_extraction_returns_the_isotherm() {
    let soil = sand();
    let params = FinnParams::frozen_physics(&soil, 2.0);
    let cs = [0.05, 0.2, 0.5, 1.0, 1.5];
    let curve = extract_retardation(&params, soil.porosity, &cs).unwrap();
    for (c, r) in cs.iter().zip(&curve.r) {
        assert!((r - freundlich_oracle(*c, &soil)).abs() < 1e-10);
    }
    assert!(curve.underflow.is_empty());
    assert!(extract_retardation(&params, soil.porosity, &[2.5]).is_err());
}

fn five_step_target() -> (FinnConfig, Dataset) {
    let soil = sand();
    let grid = Grid1D::new(5, 0.04, 0.2).unwrap();
    let bc = (Dirichlet(1.0), Cauchy(1.0));
    let t: Vec<f64> = (0..6).map(|k| 5.0 * k as f64).collect();
    let init = FieldPair {
        c: vec![0.6, 0.35, 0.2, 0.1, 0.05],
        ct: vec![1.9, 1.2, 0.75, 0.4, 0.2],
    };
    let data = simulate_diffusion_sorption(&grid, &soil, bc, &t, &init, &SimOptions::default()).unwrap();
    (FinnConfig::from_meta(&data.meta).unwrap(), data)
}

#[test]
fn experimental_mode_gradient_matches_finite_differences() {
    let (cfg, data) = five_step_target();
    let params = FinnParams::experimental(2, 5e-4, 0.29, 3.2e-4, 2.0).unwrap();
    let integrator = Integrator::Fixed {
        method: finn_core::ode::Method::Rk4,
        substeps: 2,
    };
    let (_, grad) = loss_and_gradient(&params, &cfg, &data, LossMask::BreakthroughOnly, integrator, None).unwrap();
    let store = params.to_store();
    let flat = store.flat_trainable();
    assert_eq!(flat.len(), grad.len());
    let loss_at = |v: &[f64]| {
        let mut s = store.clone();
        s.set_flat_trainable(v).unwrap();
        let p = FinnParams::from_store(&s).unwrap();
        loss_and_gradient(&p, &cfg, &data, LossMask::BreakthroughOnly, integrator, None).unwrap().0
    };
    // the stencil and a spread of network weights
    for i in [0, 1, 2, 3, 4, 40, 200, 400, flat.len() - 1] {
        let h = 1e-6 * flat[i].abs().max(1.0);
        let (mut p, mut m) = (flat.clone(), flat.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (loss_at(&p) - loss_at(&m)) / (2.0 * h);
        let a = grad[i];
        assert!((a - fd).abs() <= 1e-3 * a.abs().max(fd.abs()) + 1e-12, "parameter {i}: {a} vs {fd}");
    }
}
