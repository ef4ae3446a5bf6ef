//! Reverse-mode differentiation, the feedforward network used for the
//! diffusion module, and the ADAM optimizer.

mod adam;
mod mlp;
mod tape;

pub use adam::{adam_step, clip_global_norm, AdamHyper, AdamState};
pub use mlp::{BoundMlp, Layer, MlpParams, OutputActivation};
pub use tape::{Gradients, Tape, Var};

pub(crate) use tape::{softplus, softplus_inv};
