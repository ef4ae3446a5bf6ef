use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Tape, Var};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Which entries of a trajectory enter the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMask {
    /// Both fields on every volume and time.
    #[default]
    FullField,
    /// `c` at the last volume only (the outlet breakthrough curve).
    BreakthroughOnly,
    /// `ct` at the last time only (a destructive-sampling profile).
    FinalProfileOnly,
}

impl FromStr for LossMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(LossMask::FullField),
            "breakthrough" => Ok(LossMask::BreakthroughOnly),
            "profile" => Ok(LossMask::FinalProfileOnly),
            other => Err(Error::Config(format!(
                "unknown mask `{other}` (expected full, breakthrough or profile)"
            ))),
        }
    }
}

impl fmt::Display for LossMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMask::FullField => "full",
            LossMask::BreakthroughOnly => "breakthrough",
            LossMask::FinalProfileOnly => "profile",
        })
    }
}

/// Copy of `data` with i.i.d. `N(0, sigma²)` noise on every entry of both
/// fields. The time grid is untouched.
pub fn add_noise(data: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be non-negative, got {sigma}")));
    }
    let mut out = data.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in out.c.iter_mut().chain(out.ct.iter_mut()) {
        for v in row.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

fn check_aligned(pred: &Dataset, target: &Dataset) -> Result<()> {
    if pred.n_times() != target.n_times() || pred.n_volumes() != target.n_volumes() {
        return Err(Error::Shape(format!(
            "prediction is {}x{}, target is {}x{}",
            pred.n_times(),
            pred.n_volumes(),
            target.n_times(),
            target.n_volumes()
        )));
    }
    if let Some(k) = pred
        .t
        .iter()
        .zip(&target.t)
        .position(|(a, b)| (a - b).abs() > 1e-9 * b.abs().max(1.0))
    {
        return Err(Error::Shape(format!(
            "time grids differ at row {k}: {} vs {}",
            pred.t[k], target.t[k]
        )));
    }
    Ok(())
}

/// Masked mean squared error between two aligned datasets.
pub fn mse(pred: &Dataset, target: &Dataset, mask: LossMask) -> Result<f64> {
    check_aligned(pred, target)?;
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let n = pred.n_volumes();
    let t = pred.n_times();
    Ok(match mask {
        LossMask::FullField => {
            let s: f64 = (0..t)
                .map(|k| sq(&pred.c[k], &target.c[k]) + sq(&pred.ct[k], &target.ct[k]))
                .sum();
            s / (2 * n * t) as f64
        }
        LossMask::BreakthroughOnly => {
            let s: f64 = (0..t).map(|k| (pred.c[k][n - 1] - target.c[k][n - 1]).powi(2)).sum();
            s / t as f64
        }
        LossMask::FinalProfileOnly => sq(&pred.ct[t - 1], &target.ct[t - 1]) / n as f64,
    })
}

/// Masked MSE of a recorded trajectory of stacked `[c; ct]` states against
/// the rows of `target`.
pub fn mse_on_tape(tape: &mut Tape, states: &[Var], target: &Dataset, mask: LossMask) -> Result<Var> {
    let t = target.n_times();
    let n = target.n_volumes();
    if states.len() != t {
        return Err(Error::Shape(format!("{} states for {t} target rows", states.len())));
    }
    if let Some(k) = states.iter().position(|&s| tape.value(s).len() != 2 * n) {
        return Err(Error::Shape(format!("state {k} does not hold 2 x {n} values")));
    }
    let loss = match mask {
        LossMask::FullField => {
            let terms: Vec<(f64, Var)> = states
                .iter()
                .enumerate()
                .map(|(k, &s)| {
                    let mut row = target.c[k].clone();
                    row.extend_from_slice(&target.ct[k]);
                    (1.0 / (2 * n * t) as f64, tape.squared_error(s, &row))
                })
                .collect();
            tape.lincomb(&terms)
        }
        LossMask::BreakthroughOnly => {
            let terms: Vec<(f64, Var)> = states
                .iter()
                .enumerate()
                .map(|(k, &s)| {
                    let outlet = tape.gather(s, &[n - 1]);
                    (1.0 / t as f64, tape.squared_error(outlet, &[target.c[k][n - 1]]))
                })
                .collect();
            tape.lincomb(&terms)
        }
        LossMask::FinalProfileOnly => {
            let ct = tape.slice(states[t - 1], n, n);
            let e = tape.squared_error(ct, &target.ct[t - 1]);
            tape.scale(e, 1.0 / n as f64)
        }
    };
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::toy_meta;

    fn toy(offset: f64) -> Dataset {
        Dataset::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![0.1 + offset, 0.2 + offset, 0.3 + offset]; 3],
            vec![vec![1.0 + offset, 2.0 + offset, 3.0 + offset]; 3],
            toy_meta(3),
        )
        .unwrap()
    }

    #[test]
    fn identical_is_zero_and_offset_is_square() {
        assert_eq!(mse(&toy(0.0), &toy(0.0), LossMask::FullField).unwrap(), 0.0);
        let m = mse(&toy(0.25), &toy(0.0), LossMask::FullField).unwrap();
        assert!((m - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn tape_loss_matches_plain_loss() {
        let pred = toy(0.0);
        let mut target = toy(0.0);
        target.c[1][2] = 0.7;
        target.ct[2][0] = -1.0;
        for mask in [LossMask::FullField, LossMask::BreakthroughOnly, LossMask::FinalProfileOnly] {
            let mut tape = Tape::new();
            let states: Vec<Var> = (0..3)
                .map(|k| {
                    let mut s = pred.c[k].clone();
                    s.extend_from_slice(&pred.ct[k]);
                    tape.leaf(s)
                })
                .collect();
            let l = mse_on_tape(&mut tape, &states, &target, mask).unwrap();
            let plain = mse(&pred, &target, mask).unwrap();
            assert!((tape.scalar(l) - plain).abs() < 1e-15, "{mask}");
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = toy(0.0);
        let b = a.slice_time(0..2).unwrap();
        assert!(matches!(mse(&a, &b, LossMask::FullField), Err(Error::Shape(_))));
    }

    #[test]
    fn noise_contract() {
        let d = toy(0.0);
        assert_eq!(add_noise(&d, 0.0, 1).unwrap(), d);
        assert_eq!(add_noise(&d, 1e-3, 7).unwrap(), add_noise(&d, 1e-3, 7).unwrap());
        assert_ne!(add_noise(&d, 1e-3, 7).unwrap(), add_noise(&d, 1e-3, 8).unwrap());
        assert!(matches!(add_noise(&d, -1.0, 0), Err(Error::Config(_))));
        assert_eq!(add_noise(&d, 1e-3, 7).unwrap().t, d.t);
    }

    #[test]
    fn mask_tokens() {
        for m in [LossMask::FullField, LossMask::BreakthroughOnly, LossMask::FinalProfileOnly] {
            assert_eq!(m.to_string().parse::<LossMask>().unwrap(), m);
        }
        assert!("outlet".parse::<LossMask>().is_err());
    }
}
