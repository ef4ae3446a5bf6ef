//! Finite volume neural network (FINN) for nonlinear diffusion-sorption.
//!
//! The model keeps the finite-volume structure of the transport equation and
//! learns only what the physics leaves open: the flux stencil and the
//! concentration-dependent diffusivity `D_e / R(c)`.

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod fvm;
pub mod io;
pub mod model;
pub mod ode;
pub mod store;
pub mod train;

pub use dataset::{Dataset, DatasetMeta, Field};
pub use error::{Error, Result};
pub use store::{ParamStore, Tensor};
