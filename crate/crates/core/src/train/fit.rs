use std::io::Write as _;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use super::loss::{add_noise, mse, mse_on_tape, LossMask};
use crate::autodiff::{clip_global_norm, AdamHyper, AdamState, Tape};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{rollout, rollout_on_tape, BoundFinn, FinnConfig, FinnParams, Integrator};
use crate::ode::AdaptiveOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Seeds the training noise; initialization is seeded by the caller.
    pub seed: u64,
    pub noise_sigma: f64,
    /// Rows of the dataset the loss sees.
    pub train_window: Range<usize>,
    pub mask: LossMask,
    /// Integrator of the differentiable rollout.
    pub integrator: Integrator,
    /// Global gradient-norm bound.
    pub clip: Option<f64>,
    /// Detach the rollout every this many steps.
    pub truncate: Option<usize>,
    /// Print one line per epoch to stdout.
    pub progress: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 1e-3,
            seed: 0,
            noise_sigma: 1e-5,
            train_window: 0..500,
            mask: LossMask::FullField,
            integrator: Integrator::Adaptive(AdaptiveOptions::default()),
            clip: None,
            truncate: None,
            progress: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let w = &self.train_window;
        if w.start >= w.end || w.end > data.n_times() || w.end - w.start < 2 {
            return Err(Error::Config(format!(
                "train window {w:?} must hold at least 2 of the dataset's {} rows",
                data.n_times()
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if let Integrator::Fixed { substeps: 0, .. } = self.integrator {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        if matches!(self.clip, Some(c) if !(c > 0.0)) {
            return Err(Error::Config("gradient clip must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss of the parameters entering this epoch.
    pub loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters after the last update.
    pub params: FinnParams,
    /// Parameters with the lowest recorded loss.
    pub best_params: FinnParams,
    pub best_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Loss of a closed-loop fixed-step rollout over `target`, and its
/// gradient over the trainable parameters in store order.
pub fn loss_and_gradient(
    params: &FinnParams,
    cfg: &FinnConfig,
    target: &Dataset,
    mask: LossMask,
    integrator: Integrator,
    truncate: Option<usize>,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let (model, store, leaves) = BoundFinn::bind(params, &mut tape)?;
    let init = tape.leaf(target.frame(0).stacked());
    let bound = 10.0 * cfg.source_concentration();
    let states = rollout_on_tape(
        &mut tape,
        &model,
        cfg,
        init,
        &target.t,
        integrator,
        Some(bound),
        truncate,
    )?;
    let loss = mse_on_tape(&mut tape, &states, target, mask)?;
    let grads = tape.backward(loss)?;
    let mut flat = Vec::with_capacity(store.trainable_len());
    for ((_, t), &leaf) in store.iter().zip(&leaves) {
        if t.trainable {
            flat.extend(grads.wrt(&tape, leaf));
        }
    }
    Ok((tape.scalar(loss), flat))
}

/// Loss only, from the same kind of rollout the training uses.
pub fn rollout_loss(
    params: &FinnParams,
    cfg: &FinnConfig,
    target: &Dataset,
    mask: LossMask,
    integrator: Integrator,
) -> Result<f64> {
    let pred = rollout(params, cfg, &target.frame(0), &target.t, integrator)?;
    mse(&pred, target, mask)
}

/// The noisy training target the loss is computed against.
pub fn training_target(data: &Dataset, tc: &TrainConfig) -> Result<Dataset> {
    tc.validate(data)?;
    let window = data.slice_time(tc.train_window.clone())?;
    // a stream separate from anything the seed initializes
    add_noise(&window, tc.noise_sigma, tc.seed ^ 0x6E6F_6973_6500_0000)
}

/// Full-batch ADAM training with closed-loop rollouts.
pub fn train_finn(init: &FinnParams, cfg: &FinnConfig, tc: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    let target = training_target(data, tc)?;
    let mut params = init.clone();
    let mut store = params.to_store();
    let mut flat = store.flat_trainable();
    let mut adam = AdamState::new(
        flat.len(),
        AdamHyper {
            lr: tc.lr,
            ..AdamHyper::default()
        },
    );
    let mut best_params = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut history = Vec::with_capacity(tc.epochs);
    let mut halved = false;
    let mut last_step: Option<(Vec<f64>, AdamState, Vec<f64>)> = None;
    let start = Instant::now();
    for epoch in 0..tc.epochs {
        let result = loss_and_gradient(&params, cfg, &target, tc.mask, tc.integrator, tc.truncate);
        let (loss, mut grad) = match result {
            Ok(v) => v,
            Err(Error::Divergence { step, reason }) => {
                // undo the step that produced the runaway model and retake it
                // at half the rate; a second divergence ends the run
                let Some((flat_before, adam_before, grad_before)) = last_step.take().filter(|_| !halved) else {
                    return Err(Error::Training {
                        epoch,
                        reason: format!("rollout diverged at step {step}: {reason}"),
                    });
                };
                halved = true;
                adam = adam_before;
                adam.hyper.lr *= 0.5;
                if tc.progress {
                    println!(
                        "seed {} epoch {epoch:>5} rollout diverged at step {step} ({reason}); lr halved to {:.3e}",
                        tc.seed, adam.hyper.lr
                    );
                }
                flat = flat_before;
                adam.step(&mut flat, &grad_before)?;
                store.set_flat_trainable(&flat)?;
                params = FinnParams::from_store(&store)?;
                continue;
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training {
                epoch,
                reason: format!("non-finite loss or gradient (loss = {loss})"),
            });
        }
        let record = EpochRecord {
            epoch,
            loss,
            lr: adam.hyper.lr,
            seconds: start.elapsed().as_secs_f64(),
        };
        if tc.progress {
            println!(
                "seed {} epoch {epoch:>5} loss {loss:.6e} time {:.1}s",
                tc.seed, record.seconds
            );
        }
        history.push(record);
        if loss < best_loss {
            best_loss = loss;
            best_params = params.clone();
        }
        if let Some(c) = tc.clip {
            clip_global_norm(&mut grad, c);
        }
        if !halved {
            last_step = Some((flat.clone(), adam.clone(), grad.clone()));
        }
        adam.step(&mut flat, &grad)?;
        store.set_flat_trainable(&flat)?;
        params = FinnParams::from_store(&store)?;
    }
    Ok(TrainOutcome {
        params,
        best_params,
        best_loss,
        history,
    })
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "epoch,loss,lr,seconds").map_err(io)?;
    for r in history {
        writeln!(f, "{},{:.16e},{:e},{:.3}", r.epoch, r.loss, r.lr, r.seconds).map_err(io)?;
    }
    f.flush().map_err(io)
}

/// MSE over the three evaluation windows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MseReport {
    /// Rows before the split of the training scenario.
    pub training: f64,
    /// Rows from the split on, same rollout.
    pub extrapolated: f64,
    /// Whole rollout under the test scenario.
    pub unseen: f64,
}

/// Closed-loop adaptive rollouts scored against clean data.
pub fn evaluate(
    params: &FinnParams,
    train_cfg: &FinnConfig,
    test_cfg: &FinnConfig,
    train_data: &Dataset,
    test_data: &Dataset,
    split: usize,
) -> Result<MseReport> {
    if split == 0 || split >= train_data.n_times() {
        return Err(Error::Config(format!(
            "split row {split} must fall inside the {} training rows",
            train_data.n_times()
        )));
    }
    let integrator = Integrator::Adaptive(AdaptiveOptions::default());
    let pred = rollout(params, train_cfg, &train_data.frame(0), &train_data.t, integrator)?;
    let n = train_data.n_times();
    let part = |d: &Dataset, r: Range<usize>| d.slice_time(r);
    let training = mse(&part(&pred, 0..split)?, &part(train_data, 0..split)?, LossMask::FullField)?;
    let extrapolated = mse(&part(&pred, split..n)?, &part(train_data, split..n)?, LossMask::FullField)?;
    let test_pred = rollout(params, test_cfg, &test_data.frame(0), &test_data.t, integrator)?;
    let unseen = mse(&test_pred, test_data, LossMask::FullField)?;
    Ok(MseReport {
        training,
        extrapolated,
        unseen,
    })
}
