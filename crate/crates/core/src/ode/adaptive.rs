//! Dormand–Prince 5(4) with an elementary step-size controller.
//!
//! Output times are hit exactly by shortening the step that would cross
//! them; the unshortened proposal is kept for the following step.

use super::fixed::{OdeSystem, PlainSystem};
use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-8,
            h0: None,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSolution {
    /// One state per requested output time.
    pub states: Vec<Vec<f64>>,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn error_norm(u: &[f64], u_new: &[f64], err: &[f64], rtol: f64, atol: f64) -> f64 {
    u.iter()
        .zip(u_new)
        .zip(err)
        .map(|((a, b), e)| e.abs() / (atol + rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

fn initial_step<S: OdeSystem>(sys: &mut S, t: f64, u: &S::State, f0: &S::State, opts: &AdaptiveOptions, span: f64) -> Result<f64> {
    // Hairer, Nørsett & Wanner's starting-step heuristic for a 5th-order method.
    let (uv, f0v) = (sys.values(u), sys.values(f0));
    let sc: Vec<f64> = uv.iter().map(|x| opts.atol + opts.rtol * x.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        let s: f64 = v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum();
        (s / v.len().max(1) as f64).sqrt()
    };
    let d0 = rms(&uv);
    let d1 = rms(&f0v);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let mark = sys.mark();
    let u1 = sys.lincomb(&[(1.0, u), (h0, f0)]);
    let f1 = sys.rhs(t + h0, &u1).map(|f| sys.values(&f));
    sys.rollback(mark);
    let f1 = f1?;
    let diff: Vec<f64> = f1.iter().zip(&f0v).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Integrates `rhs` and reports the state at each of `t_eval`.
///
/// `t_eval[0]` is the time of `u0`.
pub fn integrate_adaptive<F>(rhs: F, u0: &[f64], t_eval: &[f64], opts: &AdaptiveOptions) -> Result<AdaptiveSolution>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut sys = PlainSystem(rhs);
    let (states, stats) = integrate_adaptive_system(&mut sys, u0.to_vec(), t_eval, opts)?;
    Ok(AdaptiveSolution { states, ..stats })
}

/// Adaptive integration of any [`OdeSystem`].
///
/// On a tape the accepted steps are recorded and differentiable; step sizes
/// are chosen from plain values and treated as constants. A state failing
/// [`OdeSystem::check`] at an output time is a divergence at that index.
/// The returned solution carries the step counts; its `states` is empty.
pub fn integrate_adaptive_system<S: OdeSystem>(
    sys: &mut S,
    u0: S::State,
    t_eval: &[f64],
    opts: &AdaptiveOptions,
) -> Result<(Vec<S::State>, AdaptiveSolution)> {
    if t_eval.is_empty() {
        return Err(Error::Config("empty output time grid".into()));
    }
    if let Some(k) = t_eval.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!(
            "output times not strictly increasing at index {}",
            k + 1
        )));
    }
    if !(opts.rtol > 0.0 && opts.atol >= 0.0) {
        return Err(Error::Config("tolerances must be positive".into()));
    }
    let mut stats = AdaptiveSolution {
        states: Vec::new(),
        accepted: 0,
        rejected: 0,
        evaluations: 0,
    };
    let mut states = Vec::with_capacity(t_eval.len());
    states.push(u0.clone());
    if t_eval.len() == 1 {
        return Ok((states, stats));
    }

    let t_end = *t_eval.last().unwrap();
    let mut t = t_eval[0];
    let mut u = u0;
    let mut uv = sys.values(&u);
    let mut k: Vec<S::State> = Vec::with_capacity(7);
    k.push(sys.rhs(t, &u)?);
    stats.evaluations += 1;
    let mut h = match opts.h0 {
        Some(h) => h,
        None => {
            let k0 = k[0].clone();
            stats.evaluations += 1;
            initial_step(sys, t, &u, &k0, opts, t_end - t)?
        }
    };

    let mut next_out = 1;
    let mut steps = 0;
    while next_out < t_eval.len() {
        let target = t_eval[next_out];
        let h_min = 1e-12 * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Stiffness { t, h });
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Simulation(format!(
                "exceeded {} steps at t = {t}",
                opts.max_steps
            )));
        }
        let lands = t + h >= target - 1e-14 * target.abs().max(1.0);
        let h_step = if lands { target - t } else { h };

        let mark = sys.mark();
        k.truncate(1);
        let mut stage = u.clone();
        for s in 1..7 {
            let mut terms: Vec<(f64, &S::State)> = vec![(1.0, &u)];
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    terms.push((h_step * A[s][j], kj));
                }
            }
            stage = sys.lincomb(&terms);
            let ks = sys.rhs(t + C[s] * h_step, &stage)?;
            k.push(ks);
            stats.evaluations += 1;
        }
        // Stage 7 evaluated at the 5th-order solution, which `stage` now holds.
        let u_new = stage;
        let new_v = sys.values(&u_new);
        let kv: Vec<Vec<f64>> = k.iter().map(|ki| sys.values(ki)).collect();
        let err: Vec<f64> = (0..new_v.len())
            .map(|i| h_step * E.iter().zip(&kv).map(|(e, ki)| e * ki[i]).sum::<f64>())
            .collect();
        let norm = error_norm(&uv, &new_v, &err, opts.rtol, opts.atol);
        let finite = new_v.iter().all(|v| v.is_finite()) && norm.is_finite();

        if finite && norm <= 1.0 {
            stats.accepted += 1;
            t = if lands { target } else { t + h_step };
            u = u_new;
            uv = new_v;
            let last = k.pop().expect("seven stages");
            k.clear();
            k.push(last);
            if lands {
                sys.check(&u).map_err(|reason| Error::Divergence {
                    step: next_out,
                    reason,
                })?;
                states.push(u.clone());
                next_out += 1;
            }
            let factor = if norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            // A step shortened to hit an output time does not shrink the proposal.
            h = if lands { h.max(h_step * factor) } else { h_step * factor };
        } else {
            stats.rejected += 1;
            k.truncate(1);
            sys.rollback(mark);
            let factor = if finite {
                (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
            } else {
                MIN_FACTOR
            };
            h = h_step * factor;
        }
    }
    Ok((states, stats))
}
