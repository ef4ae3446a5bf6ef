use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use finn_core::fvm::SimOptions;
use finn_core::io::{extract_breakthrough, load_checkpoint, read_dataset, save_checkpoint, write_dataset, KeyValues, ScenarioConfig};
use finn_core::model::{extract_retardation as extract_curve, rollout, FinnConfig, FinnParams, Integrator};
use finn_core::ode::{AdaptiveOptions, Method};
use finn_core::train::{
    add_noise, evaluate as evaluate_model, run_experiment, train_finn, write_history, ExperimentConfig, ExperimentData,
    ModelInit, TrainConfig,
};
use finn_core::{Dataset, Error};

use crate::svg::{line_chart, Series};
use crate::{
    CliError, EvaluateArgs, ExperimentArgs, ExtractArgs, GenerateArgs, IntegratorArg, Mode, PredictArgs, TrainArgs,
    TrainOptions, Verbosity,
};

type Result<T> = std::result::Result<T, CliError>;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Core(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

/// Refuses an output directory that is one of the inputs.
fn distinct_output(out: &Path, flag: &str, inputs: &[(&str, &Path)]) -> Result<()> {
    let Ok(out) = out.canonicalize() else {
        return Ok(());
    };
    for (name, input) in inputs {
        if input.canonicalize().is_ok_and(|p| p == out) {
            return Err(CliError::Usage(format!(
                "{flag} {} is the {name} input; outputs would overwrite it",
                out.display()
            )));
        }
    }
    Ok(())
}

fn manifest(command: &str) -> KeyValues {
    let mut m = KeyValues::new();
    m.set("command", command);
    m.set("finn.version", env!("CARGO_PKG_VERSION"));
    m
}

fn finish_manifest(m: &KeyValues, path: &Path, log: Verbosity) -> Result<()> {
    if log.debug() {
        print!("{m}");
    }
    m.write(path)?;
    Ok(())
}

fn extend(m: &mut KeyValues, prefix: &str, kv: &KeyValues) {
    for (k, v) in kv.iter() {
        m.set(&format!("{prefix}{k}"), v);
    }
}

fn breakthrough_svg(path: &Path, data: &Dataset, title: &str) -> Result<()> {
    let pts = extract_breakthrough(data);
    let chart = line_chart(
        title,
        "time (days)",
        "c at outlet (kg/m³)",
        &[Series {
            label: "c",
            points: pts,
        }],
        false,
    );
    write_file(path, &chart)
}

fn load_params(ckpt: &Path) -> Result<FinnParams> {
    Ok(FinnParams::from_store(&load_checkpoint(ckpt)?)?)
}

fn scenario(preset: &str, c_s: Option<f64>) -> Result<ScenarioConfig> {
    let s = ScenarioConfig::resolve(preset)?;
    Ok(match c_s {
        Some(c) => s.with_source(c),
        None => s,
    })
}

pub fn generate(a: &GenerateArgs, log: Verbosity) -> Result<()> {
    let scen = scenario(&a.preset, a.c_s)?;
    let mut data = scen.simulate(&SimOptions::default())?;
    if a.noise > 0.0 {
        data = add_noise(&data, a.noise, a.seed)?;
        data.meta.provenance = format!("{}+noise", data.meta.provenance);
    }
    create_dir(&a.out)?;
    write_dataset(&a.out, &data)?;
    scen.to_kv().write(&a.out.join("scenario.cfg"))?;
    if let Some(p) = &a.svg {
        breakthrough_svg(p, &data, &format!("Breakthrough curve, {}", scen.name))?;
    }
    let mut m = manifest("generate");
    m.set("preset", &a.preset);
    m.set("noise", a.noise);
    m.set("seed", a.seed);
    extend(&mut m, "", &scen.to_kv());
    finish_manifest(&m, &a.out.join("manifest.txt"), log)?;
    if log.info() {
        println!(
            "wrote {} rows x {} volumes to {}",
            data.n_times(),
            data.n_volumes(),
            a.out.display()
        );
    }
    Ok(())
}

fn integrator(o: &TrainOptions) -> Integrator {
    match o.integrator {
        IntegratorArg::Adaptive => Integrator::Adaptive(AdaptiveOptions::default()),
        IntegratorArg::Rk4 => Integrator::Fixed {
            method: Method::Rk4,
            substeps: o.substeps,
        },
        IntegratorArg::Euler => Integrator::Fixed {
            method: Method::Euler,
            substeps: o.substeps,
        },
    }
}

fn train_config(o: &TrainOptions, seed: u64, log: Verbosity) -> TrainConfig {
    TrainConfig {
        epochs: o.epochs,
        lr: o.lr,
        seed,
        noise_sigma: o.noise,
        train_window: 0..o.window,
        mask: o.mask,
        integrator: integrator(o),
        clip: o.clip,
        truncate: o.truncate,
        progress: log.info(),
    }
}

fn model_init(o: &TrainOptions, data: &Dataset, cfg: &FinnConfig) -> Result<ModelInit> {
    if data.n_times() < 2 {
        return Err(CliError::Core(Error::Format("dataset needs at least 2 rows".into())));
    }
    let d_unit = ModelInit::default_unit(cfg.grid.dx, data.t[1] - data.t[0]);
    let c_max = o.c_max.unwrap_or(2.0 * cfg.source_concentration());
    Ok(match o.mode {
        Mode::Synthetic => ModelInit::Synthetic { d_unit, c_max },
        Mode::Experimental => {
            let soil = data.meta.soil.ok_or_else(|| {
                CliError::Core(Error::Format("experimental mode needs soil parameters in the dataset metadata".into()))
            })?;
            ModelInit::Experimental {
                d_e: soil.d_e,
                d_unit,
                c_max,
            }
        }
    })
}

fn train_manifest(m: &mut KeyValues, o: &TrainOptions, init: &ModelInit) {
    m.set("epochs", o.epochs);
    m.set("lr", o.lr);
    m.set("mask", o.mask);
    m.set(
        "mode",
        match o.mode {
            Mode::Synthetic => "synthetic",
            Mode::Experimental => "experimental",
        },
    );
    m.set("noise", o.noise);
    m.set("window", o.window);
    m.set(
        "integrator",
        match o.integrator {
            IntegratorArg::Adaptive => "adaptive",
            IntegratorArg::Rk4 => "rk4",
            IntegratorArg::Euler => "euler",
        },
    );
    m.set("substeps", o.substeps);
    m.set("clip", o.clip.map_or("none".to_string(), |v| v.to_string()));
    m.set("truncate", o.truncate.map_or("none".to_string(), |v| v.to_string()));
    let (d_unit, c_max) = match *init {
        ModelInit::Synthetic { d_unit, c_max } => (d_unit, c_max),
        ModelInit::Experimental { d_unit, c_max, .. } => (d_unit, c_max),
    };
    m.set("model.d_unit", d_unit);
    m.set("model.c_max", c_max);
}

pub fn train(a: &TrainArgs, log: Verbosity) -> Result<()> {
    distinct_output(&a.out, "--out", &[("--data", &a.data)])?;
    let data = read_dataset(&a.data)?;
    let cfg = FinnConfig::from_meta(&data.meta)?;
    let init = model_init(&a.opts, &data, &cfg)?;
    let params = init.params(a.seed, cfg.porosity)?;
    let tc = train_config(&a.opts, a.seed, log);
    let outcome = train_finn(&params, &cfg, &tc, &data)?;
    create_dir(&a.out)?;
    save_checkpoint(&a.out.join("checkpoint.bin"), &outcome.best_params.to_store())?;
    save_checkpoint(&a.out.join("final.bin"), &outcome.params.to_store())?;
    write_history(&a.out.join("history.csv"), &outcome.history)?;
    if let Some(p) = &a.svg {
        let pts = outcome.history.iter().map(|r| (r.epoch as f64, r.loss)).collect();
        let chart = line_chart("Training loss", "epoch", "loss", &[Series { label: "loss", points: pts }], true);
        write_file(p, &chart)?;
    }
    let mut m = manifest("train");
    m.set("data", a.data.display());
    m.set("seed", a.seed);
    train_manifest(&mut m, &a.opts, &init);
    m.set("result.best_loss", outcome.best_loss);
    finish_manifest(&m, &a.out.join("manifest.txt"), log)?;
    if log.info() {
        println!(
            "trained {} epochs, best loss {:.6e}; checkpoint in {}",
            outcome.history.len(),
            outcome.best_loss,
            a.out.display()
        );
    }
    Ok(())
}

pub fn predict(a: &PredictArgs, log: Verbosity) -> Result<()> {
    let params = load_params(&a.ckpt)?;
    let scen = scenario(&a.preset, a.c_s)?;
    let t = match a.t_end {
        None => scen.t_grid(),
        Some(t_end) => {
            let n = (t_end / scen.dt + 1e-9).floor() as usize + 1;
            if n < 2 {
                return Err(CliError::Usage(format!(
                    "--t-end {t_end} leaves fewer than two rows at spacing {}",
                    scen.dt
                )));
            }
            (0..n).map(|k| k as f64 * scen.dt).collect()
        }
    };
    let mut pred = rollout(&params, &scen.finn_config(), &scen.initial(), &t, Integrator::default())?;
    pred.meta.soil = Some(scen.soil);
    pred.meta.provenance = format!("predict:{}", scen.name);
    create_dir(&a.out)?;
    write_dataset(&a.out, &pred)?;
    if let Some(p) = &a.svg {
        breakthrough_svg(p, &pred, &format!("Predicted breakthrough, {}", scen.name))?;
    }
    let mut m = manifest("predict");
    m.set("ckpt", a.ckpt.display());
    m.set("preset", &a.preset);
    m.set("t_end", t[t.len() - 1]);
    extend(&mut m, "", &scen.to_kv());
    finish_manifest(&m, &a.out.join("manifest.txt"), log)?;
    if log.info() {
        println!("wrote {} predicted rows to {}", pred.n_times(), a.out.display());
    }
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs, log: Verbosity) -> Result<()> {
    distinct_output(&a.out, "--out", &[("--train", &a.train), ("--test", &a.test)])?;
    let params = load_params(&a.ckpt)?;
    let train = read_dataset(&a.train)?;
    let test = read_dataset(&a.test)?;
    let train_cfg = FinnConfig::from_meta(&train.meta)?;
    let test_cfg = FinnConfig::from_meta(&test.meta)?;
    if a.split >= train.n_times() {
        return Err(CliError::Usage(format!(
            "--split {} must fall inside the {} training rows",
            a.split,
            train.n_times()
        )));
    }
    let r = evaluate_model(&params, &train_cfg, &test_cfg, &train, &test, a.split)?;
    let (n, n_test) = (train.n_times(), test.n_times());
    let rows = [
        ("training", 0, a.split, r.training),
        ("extrapolated", a.split, n, r.extrapolated),
        ("unseen", 0, n_test, r.unseen),
    ];
    let mut csv = String::from("window,row_start,row_end,mse\n");
    for (name, s, e, v) in rows {
        let _ = writeln!(csv, "{name},{s},{e},{v:.6e}");
    }
    create_dir(&a.out)?;
    write_file(&a.out.join("report.csv"), &csv)?;
    let mut m = manifest("evaluate");
    m.set("ckpt", a.ckpt.display());
    m.set("train", a.train.display());
    m.set("test", a.test.display());
    m.set("split", a.split);
    finish_manifest(&m, &a.out.join("manifest.txt"), log)?;
    if log.info() {
        println!("{:<14}{:>14}{:>14}", "window", "rows", "mse");
        for (name, s, e, v) in rows {
            println!("{name:<14}{:>14}{v:>14.4e}", format!("{s}..{e}"));
        }
    }
    Ok(())
}

pub fn extract_retardation(a: &ExtractArgs, log: Verbosity) -> Result<()> {
    if a.c_min >= a.c_max {
        return Err(CliError::Usage(format!(
            "--c-min {} must be below --c-max {}",
            a.c_min, a.c_max
        )));
    }
    let params = load_params(&a.ckpt)?;
    let porosity = match (a.porosity, params.known_d_e) {
        (Some(p), _) => p,
        // unused when D_e is known
        (None, Some(_)) => 0.5,
        (None, None) => {
            return Err(CliError::Usage(
                "--porosity is required: the checkpoint recovers D_e from D_e * phi".into(),
            ))
        }
    };
    if porosity >= 1.0 {
        return Err(CliError::Usage(format!("--porosity must lie in (0, 1), got {porosity}")));
    }
    let step = (a.c_max - a.c_min) / (a.points - 1) as f64;
    let cs: Vec<f64> = (0..a.points)
        .map(|i| if i + 1 == a.points { a.c_max } else { a.c_min + step * i as f64 })
        .collect();
    let curve = extract_curve(&params, porosity, &cs)?;
    let mut csv = String::from("c,r\n");
    for (c, r) in curve.c.iter().zip(&curve.r) {
        let _ = writeln!(csv, "{c:.10e},{r:.10e}");
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_file(&a.out, &csv)?;
    if let Some(p) = &a.svg {
        let pts = curve
            .c
            .iter()
            .zip(&curve.r)
            .filter(|(_, r)| r.is_finite())
            .map(|(&c, &r)| (c, r))
            .collect();
        let chart = line_chart("Retardation factor", "c (kg/m³)", "R(c)", &[Series { label: "R", points: pts }], false);
        write_file(p, &chart)?;
    }
    let mut m = manifest("extract-retardation");
    m.set("ckpt", a.ckpt.display());
    m.set("c_min", a.c_min);
    m.set("c_max", a.c_max);
    m.set("points", a.points);
    m.set("porosity", a.porosity.map_or("none".to_string(), |p| p.to_string()));
    let mut path = a.out.clone().into_os_string();
    path.push(".manifest");
    finish_manifest(&m, &PathBuf::from(path), log)?;
    if !curve.underflow.is_empty() {
        eprintln!(
            "warning: D_c underflowed at {} concentrations; R written as inf",
            curve.underflow.len()
        );
    }
    if log.info() {
        println!("wrote {} points of R(c) to {}", cs.len(), a.out.display());
    }
    Ok(())
}

pub fn experiment(a: &ExperimentArgs, log: Verbosity) -> Result<()> {
    let (train_name, test_name) = match (a.preset.as_str(), &a.test_preset) {
        ("synthetic", None) => ("synthetic-train".to_string(), "synthetic-test".to_string()),
        ("synthetic", Some(t)) => ("synthetic-train".to_string(), t.clone()),
        (p, t) => (p.to_string(), t.clone().unwrap_or_else(|| p.to_string())),
    };
    let train_scen = ScenarioConfig::resolve(&train_name)?;
    let test_scen = ScenarioConfig::resolve(&test_name)?;
    let train_data = train_scen.simulate(&SimOptions::default())?;
    let test_data = test_scen.simulate(&SimOptions::default())?;
    let train_cfg = train_scen.finn_config();
    let test_cfg = test_scen.finn_config();
    let init = model_init(&a.opts, &train_data, &train_cfg)?;
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|k| a.first_seed + k).collect();
    create_dir(&a.out)?;
    let cfg = ExperimentConfig {
        init,
        train: train_config(&a.opts, 0, log),
        seeds,
        out_dir: Some(a.out.clone()),
        threads,
    };
    let data = ExperimentData {
        train_cfg: &train_cfg,
        test_cfg: &test_cfg,
        train_data: &train_data,
        test_data: &test_data,
    };
    let report = run_experiment(&cfg, &data)?;
    let mut m = manifest("experiment");
    m.set("preset", &train_name);
    m.set("test_preset", &test_name);
    m.set("seeds", a.seeds);
    m.set("first_seed", a.first_seed);
    m.set("threads", threads);
    train_manifest(&mut m, &a.opts, &init);
    extend(&mut m, "train.", &train_scen.to_kv());
    extend(&mut m, "test.", &test_scen.to_kv());
    finish_manifest(&m, &a.out.join("manifest.txt"), log)?;
    if log.info() {
        println!("{:<8}{:>14}{:>14}{:>14}", "seed", "training", "extrapolated", "unseen");
        for r in &report.runs {
            let x = &r.report;
            println!("{:<8}{:>14.4e}{:>14.4e}{:>14.4e}", r.seed, x.training, x.extrapolated, x.unseen);
        }
        for (label, x) in [("mean", &report.mean), ("std", &report.std)] {
            println!("{label:<8}{:>14.4e}{:>14.4e}{:>14.4e}", x.training, x.extrapolated, x.unseen);
        }
        if !report.failures.is_empty() {
            println!("{} of {} seeds failed", report.failures.len(), a.seeds);
        }
    }
    Ok(())
}
