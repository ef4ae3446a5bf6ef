//! Training harness: loss masks, noise, the epoch loop, three-window
//! evaluation and multi-seed experiments.

mod experiment;
mod fit;
mod loss;

pub use experiment::{run_experiment, summary_csv, ExperimentConfig, ExperimentData, ExperimentReport, ModelInit, SeedRun};
pub use fit::{
    evaluate, loss_and_gradient, rollout_loss, train_finn, training_target, write_history, EpochRecord, MseReport,
    TrainConfig, TrainOutcome,
};
pub use loss::{add_noise, mse, mse_on_tape, LossMask};
