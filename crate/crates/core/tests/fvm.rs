mod common;

use common::{freundlich_oracle, sand};
use finn_core::fvm::{
    flux_divergence, flux_divergence_with, ghost_values, retardation_freundlich, simulate_diffusion_sorption,
    BoundaryCondition::{self, Cauchy, Dirichlet, Neumann},
    FaceTreatment, FieldPair, Grid1D, SimOptions, SoilParams, Sorption,
};
use proptest::prelude::*;

#[test]
fn freundlich_reference_values() {
    let s = sand();
    for (c, want) in [(1.0, 3.1754), (0.5, 3.3740)] {
        let oracle = freundlich_oracle(c, &s);
        assert!((oracle - want).abs() < 1e-3);
        let got = retardation_freundlich(c, &s).unwrap();
        assert!((got - oracle).abs() < 1e-12, "R({c}) = {got}, oracle {oracle}");
    }
}

#[test]
fn freundlich_linear_isotherm_is_constant() {
    let s = SoilParams { n_f: 1.0, ..sand() };
    let r: Vec<f64> = [0.01, 0.3, 2.0].iter().map(|&c| retardation_freundlich(c, &s).unwrap()).collect();
    assert!(r.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    assert!((r[0] - freundlich_oracle(0.5, &s)).abs() < 1e-12);
}

#[test]
fn freundlich_decreases_with_concentration() {
    let s = sand();
    let r: Vec<f64> = (1..=100).map(|k| retardation_freundlich(0.01 * k as f64, &s).unwrap()).collect();
    assert!(r.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn freundlich_rejects_negative_concentration() {
    assert!(retardation_freundlich(-0.1, &sand()).is_err());
}

#[test]
fn ghost_values_per_condition() {
    let u = [0.7, 0.4, 0.1, 0.2];
    let g = ghost_values(&u, Dirichlet(1.0), Neumann(0.25), 5e-4, 0.04).unwrap();
    assert_eq!(g.left, FaceTreatment::Ghost(1.0));
    assert_eq!(g.right, FaceTreatment::Flux(0.25));

    let g = ghost_values(&u, Cauchy(2.0), Cauchy(1.0), 5e-4, 0.04).unwrap();
    let FaceTreatment::Ghost(right) = g.right else { panic!("Cauchy end must give a ghost") };
    let FaceTreatment::Ghost(left) = g.left else { panic!("Cauchy end must give a ghost") };
    // magnitude D/Q * |u_{n-1} - u_{n-2}| / dx, sign set by the outflow direction
    assert!((right.abs() - 5e-4 * 0.1 / 0.04).abs() < 1e-15);
    assert!((left.abs() - 5e-4 / 2.0 * 0.3 / 0.04).abs() < 1e-15);
}

#[test]
fn cauchy_reservoir_is_non_negative_for_outflow() {
    // profile falling toward the outlet
    let u = [0.9, 0.5, 0.2, 0.1];
    let g = ghost_values(&u, Dirichlet(1.0), Cauchy(1.0), 5e-4, 0.04).unwrap();
    assert_eq!(g.right, FaceTreatment::Ghost(5e-4 * (0.2 - 0.1) / 0.04));
}

#[test]
fn ghost_values_need_two_volumes() {
    assert!(ghost_values(&[0.1], Dirichlet(1.0), Dirichlet(0.0), 1.0, 1.0).is_err());
}

#[test]
fn unit_spike_gives_classical_stencil() {
    let u = [0.0, 1.0, 0.0];
    let g = ghost_values(&u, Dirichlet(0.0), Dirichlet(0.0), 1.0, 1.0).unwrap();
    assert_eq!(flux_divergence(&u, &g, 1.0, 1.0).unwrap(), vec![1.0, -2.0, 1.0]);
}

#[test]
fn quadratic_profile_has_constant_curvature() {
    // u = x² on a unit mesh: second difference is exactly 2 everywhere,
    // with ghosts continuing the parabola
    let dx = 0.1;
    let x: Vec<f64> = (0..8).map(|i| i as f64 * dx).collect();
    let u: Vec<f64> = x.iter().map(|v| v * v).collect();
    let gl = (-dx) * (-dx);
    let gr = (8.0 * dx) * (8.0 * dx);
    let g = ghost_values(&u, Dirichlet(gl), Dirichlet(gr), 1.0, dx).unwrap();
    for v in flux_divergence(&u, &g, 1.0, dx).unwrap() {
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }
}

#[test]
fn variable_diffusivity_multiplies_each_volume() {
    let u = [0.2, 0.5, 0.3, 0.9];
    let d = [1.0, 2.0, 0.5, 3.0];
    let g = ghost_values(&u, Dirichlet(0.1), Dirichlet(0.4), 1.0, 0.5).unwrap();
    let out = flux_divergence_with(&u, &g, &d, 0.5).unwrap();
    let ext = [0.1, 0.2, 0.5, 0.3, 0.9, 0.4];
    for i in 0..4 {
        let want = d[i] * (ext[i] - 2.0 * ext[i + 1] + ext[i + 2]) / 0.25;
        assert!((out[i] - want).abs() < 1e-12);
    }
    assert!(flux_divergence_with(&u, &g, &d[..3], 0.5).is_err());
}

proptest! {
    #[test]
    fn constant_field_is_stationary(k in -2.0f64..2.0, n in 2usize..30, d in 1e-6f64..1.0) {
        let u = vec![k; n];
        let g = ghost_values(&u, Dirichlet(k), Dirichlet(k), d, 0.04).unwrap();
        let out = flux_divergence(&u, &g, d, 0.04).unwrap();
        prop_assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_flux_ends_telescope(u in prop::collection::vec(0.0f64..2.0, 3..40), d in 1e-5f64..1.0) {
        let g = ghost_values(&u, Neumann(0.0), Neumann(0.0), d, 0.04).unwrap();
        let total: f64 = flux_divergence(&u, &g, d, 0.04).unwrap().iter().sum();
        let scale: f64 = u.iter().map(|v| v.abs()).sum::<f64>() * d / 0.0016;
        prop_assert!(total.abs() <= 1e-12 * scale.max(1.0));
    }
}

#[test]
fn pure_diffusion_matches_erfc() {
    // the Dirichlet value sits at the ghost center, half a volume outside
    // the first cell, so distances are measured from there
    let n = 100;
    let dx = 0.01;
    let grid = Grid1D::new(n, dx, 1.0).unwrap();
    let soil = sand();
    let t: Vec<f64> = (0..=20).map(|k| 5.0 * k as f64).collect();
    let opts = SimOptions {
        sorption: Sorption::None,
        ..Default::default()
    };
    let bc = (Dirichlet(1.0), Neumann(0.0));
    let data = simulate_diffusion_sorption(&grid, &soil, bc, &t, &FieldPair::zeros(n), &opts).unwrap();
    let mut checked = 0;
    for (k, &tk) in t.iter().enumerate().skip(1) {
        // front still far from the outlet
        assert!(data.c[k][n - 1] < 0.01);
        for i in 0..n {
            let x = (i + 1) as f64 * dx;
            let exact = libm::erfc(x / (2.0 * (soil.d_e * tk).sqrt()));
            if exact > 0.05 {
                let rel = (data.c[k][i] - exact).abs() / exact;
                assert!(rel < 0.02, "t = {tk}, volume {i}: {} vs {exact}", data.c[k][i]);
                checked += 1;
            }
        }
    }
    assert!(checked > 200);
}

#[test]
fn zero_flux_conserves_dissolved_mass() {
    let grid = Grid1D::new(26, 0.04, 1.04).unwrap();
    let c0: Vec<f64> = (0..26).map(|i| if i < 8 { 1.0 } else { 0.0 }).collect();
    let init = FieldPair {
        c: c0.clone(),
        ct: c0.clone(),
    };
    let t: Vec<f64> = (0..40).map(|k| 25.0 * k as f64).collect();
    let opts = SimOptions {
        sorption: Sorption::None,
        ..Default::default()
    };
    let data = simulate_diffusion_sorption(&grid, &sand(), (Neumann(0.0), Neumann(0.0)), &t, &init, &opts).unwrap();
    let m0: f64 = c0.iter().sum();
    for (c, ct) in data.c.iter().zip(&data.ct) {
        assert!((c.iter().sum::<f64>() - m0).abs() < 1e-10 * m0);
        // ct moves by phi times the same divergence
        let dct: f64 = ct.iter().sum::<f64>() - m0;
        assert!(dct.abs() < 1e-10 * m0);
    }
}

fn synthetic_run(t_end: f64) -> finn_core::Dataset {
    let grid = Grid1D::new(26, 0.04, 1.0).unwrap();
    let t: Vec<f64> = (0..=40).map(|k| t_end * k as f64 / 40.0).collect();
    let bc: (BoundaryCondition, BoundaryCondition) = (Dirichlet(1.0), Cauchy(1.0));
    simulate_diffusion_sorption(&grid, &sand(), bc, &t, &FieldPair::zeros(26), &SimOptions::default()).unwrap()
}

#[test]
fn sorbing_front_is_monotone_in_depth() {
    let data = synthetic_run(2000.0);
    for row in data.c.iter().skip(1) {
        assert!(row.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(row.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
    }
    for k in 1..data.n_times() {
        let prev = &data.c[k - 1];
        assert!(data.c[k].iter().zip(prev).all(|(a, b)| *a >= *b - 1e-12));
    }
}

#[test]
fn sorption_slows_the_front() {
    let grid = Grid1D::new(26, 0.04, 1.0).unwrap();
    let t: Vec<f64> = (0..=10).map(|k| 100.0 * k as f64).collect();
    let bc = (Dirichlet(1.0), Cauchy(1.0));
    let run = |sorption| {
        let opts = SimOptions {
            sorption,
            ..Default::default()
        };
        simulate_diffusion_sorption(&grid, &sand(), bc, &t, &FieldPair::zeros(26), &opts).unwrap()
    };
    let sorbing = run(Sorption::Freundlich);
    let plain = run(Sorption::None);
    let mid = 10;
    assert!(sorbing.c[10][mid] < plain.c[10][mid]);
    assert_eq!(sorbing.meta.provenance, "simulator:freundlich");
}

#[test]
fn simulator_validates_inputs() {
    let grid = Grid1D::new(5, 0.1, 0.5).unwrap();
    let t = [0.0, 1.0];
    let bad_soil = SoilParams { porosity: 1.5, ..sand() };
    let bc = (Dirichlet(1.0), Neumann(0.0));
    assert!(simulate_diffusion_sorption(&grid, &bad_soil, bc, &t, &FieldPair::zeros(5), &SimOptions::default()).is_err());
    assert!(simulate_diffusion_sorption(&grid, &sand(), bc, &[1.0, 0.0], &FieldPair::zeros(5), &SimOptions::default()).is_err());
    assert!(Grid1D::new(2, 0.1, 0.2).is_err());
    assert!(Grid1D::new(5, 0.0, 0.2).is_err());
}
