//! Time integration: fixed-step schemes that can record onto a tape, and an
//! adaptive embedded Runge–Kutta pair for data generation and inference.

mod adaptive;
mod fixed;

pub use adaptive::{integrate_adaptive, integrate_adaptive_system, AdaptiveOptions, AdaptiveSolution};
pub use fixed::{integrate_fixed, integrate_fixed_system, Method, OdeSystem, PlainSystem, TapeSystem};
