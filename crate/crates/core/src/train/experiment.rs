use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::fit::{evaluate, train_finn, write_history, MseReport, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::io::save_checkpoint;
use crate::model::{FinnConfig, FinnParams};

/// How a fresh model is built from a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelInit {
    /// Everything learned, `D_e` recovered from the `ct` equation.
    Synthetic { d_unit: f64, c_max: f64 },
    /// `D_e` known; the `ct` diffusivity is fixed to `D_e * phi`.
    Experimental { d_e: f64, d_unit: f64, c_max: f64 },
}

impl ModelInit {
    /// Diffusivity unit `dx² / dt`: a model diffusivity of one unit has
    /// Fourier number one on the output grid.
    pub fn default_unit(dx: f64, dt: f64) -> f64 {
        dx * dx / dt
    }

    pub fn params(&self, seed: u64, porosity: f64) -> Result<FinnParams> {
        match *self {
            ModelInit::Synthetic { d_unit, c_max } => FinnParams::synthetic(seed, d_unit, c_max),
            ModelInit::Experimental { d_e, d_unit, c_max } => {
                FinnParams::experimental(seed, d_e, porosity, d_unit, c_max)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub init: ModelInit,
    /// Template for every run; `seed` is replaced per run.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Per-seed checkpoints and histories plus `summary.csv` go here.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; runs are independent.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub best_loss: f64,
    pub report: MseReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub runs: Vec<SeedRun>,
    /// Seeds that failed, with the error text.
    pub failures: Vec<(u64, String)>,
    pub mean: MseReport,
    /// Population standard deviation over surviving runs.
    pub std: MseReport,
}

/// Everything a run needs, shared read-only between workers.
pub struct ExperimentData<'a> {
    pub train_cfg: &'a FinnConfig,
    pub test_cfg: &'a FinnConfig,
    pub train_data: &'a Dataset,
    pub test_data: &'a Dataset,
}

fn one_run(cfg: &ExperimentConfig, data: &ExperimentData<'_>, seed: u64) -> Result<SeedRun> {
    let init = cfg.init.params(seed, data.train_cfg.porosity)?;
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let outcome = train_finn(&init, data.train_cfg, &tc, data.train_data)?;
    let report = evaluate(
        &outcome.best_params,
        data.train_cfg,
        data.test_cfg,
        data.train_data,
        data.test_data,
        tc.train_window.end,
    )?;
    if let Some(dir) = &cfg.out_dir {
        let dir = dir.join(format!("seed-{seed}"));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        save_checkpoint(&dir.join("checkpoint.bin"), &outcome.best_params.to_store())?;
        save_checkpoint(&dir.join("final.bin"), &outcome.params.to_store())?;
        write_history(&dir.join("history.csv"), &outcome.history)?;
    }
    Ok(SeedRun {
        seed,
        best_loss: outcome.best_loss,
        report,
    })
}

fn aggregate(runs: &[SeedRun]) -> (MseReport, MseReport) {
    let n = runs.len() as f64;
    let stat = |f: fn(&MseReport) -> f64| {
        let mean = runs.iter().map(|r| f(&r.report)).sum::<f64>() / n;
        let var = runs.iter().map(|r| (f(&r.report) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (tm, ts) = stat(|r| r.training);
    let (em, es) = stat(|r| r.extrapolated);
    let (um, us) = stat(|r| r.unseen);
    (
        MseReport {
            training: tm,
            extrapolated: em,
            unseen: um,
        },
        MseReport {
            training: ts,
            extrapolated: es,
            unseen: us,
        },
    )
}

/// Trains and evaluates one model per seed and aggregates the reports.
///
/// Failed seeds are reported and left out of the aggregate; the call fails
/// only when no seed survives.
pub fn run_experiment(cfg: &ExperimentConfig, data: &ExperimentData<'_>) -> Result<ExperimentReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("an experiment needs at least one seed".into()));
    }
    let workers = cfg.threads.clamp(1, cfg.seeds.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<SeedRun>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = cfg.seeds.get(i) else { break };
                let r = one_run(cfg, data, seed);
                results.lock().expect("results lock").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(i, _)| *i);
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                eprintln!("warning: seed {} failed: {e}", cfg.seeds[i]);
                failures.push((cfg.seeds[i], e.to_string()));
            }
        }
    }
    if runs.is_empty() {
        return Err(Error::Training {
            epoch: 0,
            reason: format!("all {} seeds failed", failures.len()),
        });
    }
    let (mean, std) = aggregate(&runs);
    let report = ExperimentReport {
        runs,
        failures,
        mean,
        std,
    };
    if let Some(dir) = &cfg.out_dir {
        let path = dir.join("summary.csv");
        std::fs::write(&path, summary_csv(&report)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

/// Per-seed rows followed by `mean` and `std` rows.
pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut s = String::from("seed,best_loss,training,extrapolated,unseen\n");
    for r in &report.runs {
        let m = &r.report;
        let _ = writeln!(
            s,
            "{},{:.6e},{:.6e},{:.6e},{:.6e}",
            r.seed, r.best_loss, m.training, m.extrapolated, m.unseen
        );
    }
    for (label, m) in [("mean", &report.mean), ("std", &report.std)] {
        let _ = writeln!(s, "{label},,{:.6e},{:.6e},{:.6e}", m.training, m.extrapolated, m.unseen);
    }
    for (seed, e) in &report.failures {
        let _ = writeln!(s, "# seed {seed} failed: {}", e.replace('\n', " "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(seed: u64, u: f64) -> SeedRun {
        SeedRun {
            seed,
            best_loss: 0.0,
            report: MseReport {
                training: u,
                extrapolated: 2.0 * u,
                unseen: 3.0 * u,
            },
        }
    }

    #[test]
    fn single_run_aggregate_is_the_run() {
        let (mean, std) = aggregate(&[run(0, 1e-4)]);
        assert_eq!(mean, run(0, 1e-4).report);
        assert_eq!(std, MseReport::default());
    }

    #[test]
    fn two_run_statistics() {
        let (mean, std) = aggregate(&[run(0, 1.0), run(1, 3.0)]);
        assert_eq!(mean.training, 2.0);
        assert_eq!(std.training, 1.0);
        assert_eq!(std.unseen, 3.0);
    }
}
