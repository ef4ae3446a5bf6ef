use super::BoundaryCondition;
use crate::error::{Error, Result};

/// How the outer face of a boundary volume is closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceTreatment {
    /// Neighbor value substituted for the missing volume.
    Ghost(f64),
    /// The face's flux contribution replaced verbatim.
    Flux(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ghosts {
    pub left: FaceTreatment,
    pub right: FaceTreatment,
}

/// Resolves both domain ends into ghost values or flux overrides.
///
/// A Cauchy end stands for a flushed reservoir: its ghost is the reservoir
/// concentration `d_boundary / Q * (u_inner - u_edge) / dx` fed by the
/// diffusive outflow, which stays non-negative while the profile falls
/// toward the boundary.
pub fn ghost_values(
    u: &[f64],
    left: BoundaryCondition,
    right: BoundaryCondition,
    d_boundary: f64,
    dx: f64,
) -> Result<Ghosts> {
    let n = u.len();
    if n < 2 {
        return Err(Error::Shape(format!("ghost values need at least 2 volumes, got {n}")));
    }
    let resolve = |bc: BoundaryCondition, inner: f64, edge: f64| match bc {
        BoundaryCondition::Dirichlet(v) => FaceTreatment::Ghost(v),
        BoundaryCondition::Neumann(flux) => FaceTreatment::Flux(flux),
        BoundaryCondition::Cauchy(q) => FaceTreatment::Ghost(d_boundary / q * (inner - edge) / dx),
    };
    Ok(Ghosts {
        left: resolve(left, u[1], u[0]),
        right: resolve(right, u[n - 2], u[n - 1]),
    })
}

/// Classical assembly `D_i (u_{i-1} - 2 u_i + u_{i+1}) / dx²` with a
/// cell-centered diffusivity per volume.
pub fn flux_divergence_with(u: &[f64], ghosts: &Ghosts, d_cell: &[f64], dx: f64) -> Result<Vec<f64>> {
    let n = u.len();
    if d_cell.len() != n {
        return Err(Error::Shape(format!(
            "{} diffusivities for {n} volumes",
            d_cell.len()
        )));
    }
    if n < 2 {
        return Err(Error::Shape(format!("flux assembly needs at least 2 volumes, got {n}")));
    }
    let inv_dx2 = 1.0 / (dx * dx);
    let face = |treatment: FaceTreatment, d: f64, own: f64| match treatment {
        FaceTreatment::Ghost(g) => d * (g - own) * inv_dx2,
        FaceTreatment::Flux(nu) => nu,
    };
    let out = (0..n)
        .map(|i| {
            let west = if i == 0 {
                face(ghosts.left, d_cell[i], u[i])
            } else {
                d_cell[i] * (u[i - 1] - u[i]) * inv_dx2
            };
            let east = if i == n - 1 {
                face(ghosts.right, d_cell[i], u[i])
            } else {
                d_cell[i] * (u[i + 1] - u[i]) * inv_dx2
            };
            west + east
        })
        .collect();
    Ok(out)
}

/// [`flux_divergence_with`] for a uniform diffusivity.
pub fn flux_divergence(u: &[f64], ghosts: &Ghosts, d: f64, dx: f64) -> Result<Vec<f64>> {
    flux_divergence_with(u, ghosts, &vec![d; u.len()], dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BoundaryCondition::*;

    #[test]
    fn dirichlet_ghost() {
        let g = ghost_values(&[0.3, 0.2, 0.1], Dirichlet(1.0), Dirichlet(0.0), 1.0, 0.1).unwrap();
        assert_eq!(g.left, FaceTreatment::Ghost(1.0));
        assert_eq!(g.right, FaceTreatment::Ghost(0.0));
    }

    #[test]
    fn neumann_zero_right_face() {
        let u = [0.5, 0.4, 0.9];
        let g = ghost_values(&u, Dirichlet(0.5), Neumann(0.0), 1.0, 1.0).unwrap();
        assert_eq!(g.right, FaceTreatment::Flux(0.0));
        let div = flux_divergence(&u, &g, 1.0, 1.0).unwrap();
        // only the west face of the last volume contributes
        assert!((div[2] - (0.4 - 0.9)).abs() < 1e-15);
    }

    #[test]
    fn cauchy_ghost_value() {
        // outflow (D/Q) * 0.1 / 0.04 with D = 5e-4, Q = 1
        let mut u = vec![0.0; 26];
        u[24] = 0.2;
        u[25] = 0.1;
        let g = ghost_values(&u, Dirichlet(1.0), Cauchy(1.0), 5e-4, 0.04).unwrap();
        match g.right {
            FaceTreatment::Ghost(v) => assert!((v - 1.25e-3).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        // a profile rising toward the outlet gives the mirrored value
        u[24] = 0.1;
        u[25] = 0.2;
        let g = ghost_values(&u, Cauchy(1.0), Cauchy(1.0), 5e-4, 0.04).unwrap();
        match g.right {
            FaceTreatment::Ghost(v) => assert!((v + 1.25e-3).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        // left end mirrors the right
        let v: Vec<f64> = u.iter().rev().copied().collect();
        let g2 = ghost_values(&v, Cauchy(1.0), Dirichlet(0.0), 5e-4, 0.04).unwrap();
        assert_eq!(g2.left, g.right);
    }

    #[test]
    fn three_volume_hand_stencil() {
        let u = [0.0, 1.0, 0.0];
        let g = ghost_values(&u, Dirichlet(0.0), Dirichlet(0.0), 1.0, 1.0).unwrap();
        assert_eq!(flux_divergence(&u, &g, 1.0, 1.0).unwrap(), vec![1.0, -2.0, 1.0]);
    }

    #[test]
    fn quadratic_is_exact() {
        let dx = 0.1;
        let u: Vec<f64> = (0..8).map(|i| (i as f64 * dx).powi(2)).collect();
        let g = ghost_values(&u, Dirichlet(0.0), Dirichlet(0.0), 1.0, dx).unwrap();
        let div = flux_divergence(&u, &g, 1.0, dx).unwrap();
        for d in &div[1..7] {
            assert!((d - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(ghost_values(&[1.0], Dirichlet(0.0), Dirichlet(0.0), 1.0, 1.0).is_err());
        let g = ghost_values(&[1.0, 2.0], Dirichlet(0.0), Dirichlet(0.0), 1.0, 1.0).unwrap();
        assert!(flux_divergence_with(&[1.0, 2.0], &g, &[1.0], 1.0).is_err());
    }
}
