use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Rk4,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::Config(format!("unknown integration method `{other}`"))),
        }
    }
}

/// A semi-discrete right-hand side together with the vector arithmetic its
/// state type supports. Implemented for plain `Vec<f64>` states and for
/// states recorded on a [`Tape`].
pub trait OdeSystem {
    type State: Clone;

    fn rhs(&mut self, t: f64, u: &Self::State) -> Result<Self::State>;

    /// `sum_k coef_k * x_k`.
    fn lincomb(&mut self, terms: &[(f64, &Self::State)]) -> Self::State;

    /// Rejects a state that is non-finite or otherwise out of bounds.
    fn check(&self, u: &Self::State) -> std::result::Result<(), String>;

    /// Plain values of a state, for step-size control.
    fn values(&self, u: &Self::State) -> Vec<f64>;

    /// Marks a point that [`OdeSystem::rollback`] can return to, so that
    /// rejected trial steps leave nothing behind.
    fn mark(&self) -> usize {
        0
    }

    fn rollback(&mut self, _mark: usize) {}
}

/// Adapter for `FnMut(t, u) -> du/dt` over plain vectors.
pub struct PlainSystem<F>(pub F);

impl<F> OdeSystem for PlainSystem<F>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    type State = Vec<f64>;

    fn rhs(&mut self, t: f64, u: &Vec<f64>) -> Result<Vec<f64>> {
        let du = (self.0)(t, u)?;
        if du.len() != u.len() {
            return Err(Error::Shape(format!(
                "right-hand side returned {} values for a state of {}",
                du.len(),
                u.len()
            )));
        }
        Ok(du)
    }

    fn lincomb(&mut self, terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
        let mut out = vec![0.0; terms[0].1.len()];
        for &(coef, x) in terms {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += coef * xi;
            }
        }
        out
    }

    fn values(&self, u: &Vec<f64>) -> Vec<f64> {
        u.clone()
    }

    fn check(&self, u: &Vec<f64>) -> std::result::Result<(), String> {
        match u.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(format!("component {i} is {}", u[i])),
            None => Ok(()),
        }
    }
}

/// Adapter for right-hand sides that record onto a tape, making the whole
/// trajectory differentiable.
pub struct TapeSystem<'a, F> {
    pub tape: &'a mut Tape,
    pub rhs: F,
    /// Optional bound on `|u|`; exceeding it is reported as divergence.
    pub max_abs: Option<f64>,
}

impl<'a, F> OdeSystem for TapeSystem<'a, F>
where
    F: FnMut(&mut Tape, f64, Var) -> Result<Var>,
{
    type State = Var;

    fn rhs(&mut self, t: f64, u: &Var) -> Result<Var> {
        (self.rhs)(self.tape, t, *u)
    }

    fn lincomb(&mut self, terms: &[(f64, &Var)]) -> Var {
        let terms: Vec<(f64, Var)> = terms.iter().map(|&(c, v)| (c, *v)).collect();
        self.tape.lincomb(&terms)
    }

    fn values(&self, u: &Var) -> Vec<f64> {
        self.tape.value(*u).to_vec()
    }

    fn mark(&self) -> usize {
        self.tape.len()
    }

    fn rollback(&mut self, mark: usize) {
        self.tape.truncate(mark);
    }

    fn check(&self, u: &Var) -> std::result::Result<(), String> {
        let values = self.tape.value(*u);
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(format!("component {i} is {v}"));
            }
            if let Some(bound) = self.max_abs {
                if v.abs() > bound {
                    return Err(format!("component {i} = {v} exceeds bound {bound}"));
                }
            }
        }
        Ok(())
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Config("empty time grid".into()));
    }
    if let Some(k) = t_grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!(
            "time grid not strictly increasing at index {}",
            k + 1
        )));
    }
    Ok(())
}

fn step<S: OdeSystem>(sys: &mut S, t: f64, u: &S::State, h: f64, method: Method) -> Result<S::State> {
    match method {
        Method::Euler => {
            let k1 = sys.rhs(t, u)?;
            Ok(sys.lincomb(&[(1.0, u), (h, &k1)]))
        }
        Method::Rk4 => {
            let k1 = sys.rhs(t, u)?;
            let u2 = sys.lincomb(&[(1.0, u), (0.5 * h, &k1)]);
            let k2 = sys.rhs(t + 0.5 * h, &u2)?;
            let u3 = sys.lincomb(&[(1.0, u), (0.5 * h, &k2)]);
            let k3 = sys.rhs(t + 0.5 * h, &u3)?;
            let u4 = sys.lincomb(&[(1.0, u), (h, &k3)]);
            let k4 = sys.rhs(t + h, &u4)?;
            Ok(sys.lincomb(&[
                (1.0, u),
                (h / 6.0, &k1),
                (h / 3.0, &k2),
                (h / 3.0, &k3),
                (h / 6.0, &k4),
            ]))
        }
    }
}

/// Fixed-step integration reporting the state at every grid time.
///
/// `substeps` equal steps are taken inside each grid interval. Row 0 of the
/// result is `u0`.
pub fn integrate_fixed_system<S: OdeSystem>(
    sys: &mut S,
    u0: S::State,
    t_grid: &[f64],
    method: Method,
    substeps: usize,
) -> Result<Vec<S::State>> {
    check_grid(t_grid)?;
    if substeps == 0 {
        return Err(Error::Config("substeps must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(u0);
    for (k, w) in t_grid.windows(2).enumerate() {
        let h = (w[1] - w[0]) / substeps as f64;
        let mut u = out[k].clone();
        for s in 0..substeps {
            u = step(sys, w[0] + s as f64 * h, &u, h, method)?;
        }
        sys.check(&u).map_err(|reason| Error::Divergence {
            step: k + 1,
            reason,
        })?;
        out.push(u);
    }
    Ok(out)
}

/// Fixed-step integration of a plain right-hand side.
pub fn integrate_fixed<F>(rhs: F, u0: &[f64], t_grid: &[f64], method: Method) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    integrate_fixed_system(&mut PlainSystem(rhs), u0.to_vec(), t_grid, method, 1)
}
