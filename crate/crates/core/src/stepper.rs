//! Adaptive midpoint-exponential stepping shared by the quantum propagator and
//! the classical rate-equation solver.
//!
//! Each step freezes the generator at the step midpoint and applies its exact
//! exponential. The local error is estimated by Richardson comparison of one
//! full step against two half steps; the two-half-step result is kept.

use serde::Serialize;

use crate::{Error, Result};

pub(crate) trait MidpointFlow {
    type State: Clone;

    /// Advance `state` by `dt` with the generator evaluated at `t_mid`.
    fn step(&self, state: &Self::State, t_mid: f64, dt: f64) -> Result<Self::State>;

    fn distance(&self, a: &Self::State, b: &Self::State) -> f64;

    /// Cleanup applied to every accepted state (e.g. re-symmetrization).
    fn tidy(&self, state: Self::State) -> Self::State {
        state
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub min_dt: f64,
    pub last_dt: f64,
    pub max_local_error: f64,
}

impl Default for StepStats {
    fn default() -> Self {
        Self {
            accepted: 0,
            rejected: 0,
            min_dt: f64::INFINITY,
            last_dt: 0.0,
            max_local_error: 0.0,
        }
    }
}

impl StepStats {
    pub fn merge(&mut self, other: &StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.min_dt = self.min_dt.min(other.min_dt);
        if other.last_dt > 0.0 {
            self.last_dt = other.last_dt;
        }
        self.max_local_error = self.max_local_error.max(other.max_local_error);
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct StepControl {
    pub tol: f64,
    pub max_steps: u64,
    pub initial_dt: Option<f64>,
    pub max_dt: Option<f64>,
}

pub(crate) fn integrate<F: MidpointFlow>(
    flow: &F,
    mut state: F::State,
    t0: f64,
    t1: f64,
    ctl: &StepControl,
    stats: &mut StepStats,
) -> Result<F::State> {
    if t1 < t0 {
        return Err(Error::InvalidInput(format!("integration runs backwards: {t0} -> {t1}")));
    }
    if !(ctl.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", ctl.tol)));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(state);
    }
    let floor = 1e-15 * t0.abs().max(t1.abs()).max(span);
    let cap = ctl.max_dt.unwrap_or(span).min(span);
    let mut dt = ctl.initial_dt.unwrap_or(cap).min(cap);
    let mut t = t0;
    let mut attempts = 0u64;
    while t < t1 {
        let remaining = t1 - t;
        let last = dt >= remaining;
        let h = if last { remaining } else { dt };
        attempts += 1;
        if attempts > ctl.max_steps {
            return Err(Error::NonConvergence(format!(
                "step cap of {} exceeded at t = {t} (dt = {h:.3e}, {} accepted)",
                ctl.max_steps, stats.accepted
            )));
        }
        let coarse = flow.step(&state, t + 0.5 * h, h)?;
        let half = flow.step(&state, t + 0.25 * h, 0.5 * h)?;
        let fine = flow.step(&half, t + 0.75 * h, 0.5 * h)?;
        let err = flow.distance(&fine, &coarse) / 3.0;
        if err <= ctl.tol || h <= floor {
            state = flow.tidy(fine);
            t = if last { t1 } else { t + h };
            stats.accepted += 1;
            stats.min_dt = stats.min_dt.min(h);
            stats.last_dt = h;
            stats.max_local_error = stats.max_local_error.max(err);
            let grow = if err == 0.0 {
                2.0
            } else {
                (0.9 * (ctl.tol / err).cbrt()).clamp(0.5, 2.0)
            };
            if !last {
                dt = (h * grow).min(cap);
            }
        } else {
            stats.rejected += 1;
            dt = 0.5 * h;
            if dt <= floor {
                return Err(Error::NonConvergence(format!(
                    "step size underflow at t = {t} (error estimate {err:.3e})"
                )));
            }
        }
    }
    Ok(state)
}
