//! Deterministic monotone first-order minimizers.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use super::{Objective, TrainConfig};

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const FLAT_TOL: f64 = 1e-12;
const APPROX_WOLFE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Lbfgs,
    /// Steepest descent with Barzilai-Borwein trial steps and Armijo backtracking.
    GradientDescent,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Lbfgs => "lbfgs",
            OptimizerKind::GradientDescent => "gd",
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lbfgs" => Ok(Self::Lbfgs),
            "gd" => Ok(Self::GradientDescent),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Line search could not decrease the loss further.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub final_loss: f64,
    pub stop: StopReason,
}

impl TrainReport {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Probe {
    theta: Vec<f64>,
    grad: Vec<f64>,
    loss: f64,
}

/// Backtracking search along `dir` starting from `step`.
///
/// Accepts a strict Armijo decrease. Near the optimum, where loss differences
/// fall below rounding noise, it accepts a step that leaves the loss flat and
/// shrinks the directional derivative (approximate Wolfe condition).
fn line_search(
    obj: &Objective<'_>,
    theta: &[f64],
    loss: f64,
    slope: f64,
    dir: &[f64],
    mut step: f64,
) -> Option<(f64, Probe)> {
    let mut trial = vec![0.0; theta.len()];
    let mut grad = vec![0.0; theta.len()];
    let scale = 1.0 + inf_norm(theta);
    let dir_norm = inf_norm(dir);
    while step >= MIN_STEP && step * dir_norm > f64::EPSILON * scale {
        for ((t, x), d) in trial.iter_mut().zip(theta).zip(dir) {
            *t = x + step * d;
        }
        let l = obj.loss_grad(&trial, &mut grad);
        let armijo = l < loss && l <= loss + ARMIJO_C1 * step * slope;
        let flat = (l - loss).abs() <= FLAT_TOL * (1.0 + loss.abs());
        if l.is_finite() && (armijo || (flat && dot(&grad, dir) <= -APPROX_WOLFE * slope)) {
            return Some((
                step,
                Probe {
                    theta: trial,
                    grad,
                    loss: l,
                },
            ));
        }
        step *= 0.5;
    }
    None
}

/// Minimizes `obj` from `init` with the optimizer named in `config`.
pub fn minimize(obj: &Objective<'_>, init: Vec<f64>, config: &TrainConfig) -> (Vec<f64>, TrainReport) {
    match config.optimizer {
        OptimizerKind::Lbfgs => lbfgs(obj, init, config),
        OptimizerKind::GradientDescent => gradient_descent(obj, init, config),
    }
}

fn lbfgs(obj: &Objective<'_>, mut theta: Vec<f64>, config: &TrainConfig) -> (Vec<f64>, TrainReport) {
    let n = theta.len();
    let mut grad = vec![0.0; n];
    let mut loss = obj.loss_grad(&theta, &mut grad);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut dir = vec![0.0; n];
    let mut alpha = [0.0; LBFGS_MEMORY];
    let mut iterations = 0;
    let stop = loop {
        if inf_norm(&grad) <= config.convergence_tol {
            break StopReason::Converged;
        }
        if iterations >= config.max_iterations {
            break StopReason::MaxIterations;
        }
        // two-loop recursion
        dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -g);
        for (k, (s, y, rho)) in memory.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= alpha[k] * yi);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for (k, (s, y, rho)) in memory.iter().enumerate() {
            let beta = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (alpha[k] - beta) * si);
        }
        let mut slope = dot(&grad, &dir);
        if slope.is_nan() || slope >= 0.0 {
            memory.clear();
            dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -g);
            slope = dot(&grad, &dir);
        }
        let first_step = if memory.is_empty() {
            (1.0 / inf_norm(&grad)).min(1.0)
        } else {
            1.0
        };
        let Some((_, probe)) = line_search(obj, &theta, loss, slope, &dir, first_step) else {
            break StopReason::Stalled;
        };
        let s: Vec<f64> = probe.theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = probe.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        theta = probe.theta;
        grad = probe.grad;
        loss = probe.loss;
        iterations += 1;
    };
    let report = TrainReport {
        iterations,
        grad_inf_norm: inf_norm(&grad),
        final_loss: loss,
        stop,
    };
    (theta, report)
}

fn gradient_descent(
    obj: &Objective<'_>,
    mut theta: Vec<f64>,
    config: &TrainConfig,
) -> (Vec<f64>, TrainReport) {
    let n = theta.len();
    let mut grad = vec![0.0; n];
    let mut loss = obj.loss_grad(&theta, &mut grad);
    let mut step = (1.0 / inf_norm(&grad)).min(1.0);
    let mut iterations = 0;
    let stop = loop {
        if inf_norm(&grad) <= config.convergence_tol {
            break StopReason::Converged;
        }
        if iterations >= config.max_iterations {
            break StopReason::MaxIterations;
        }
        let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let slope = -dot(&grad, &grad);
        let Some((_, probe)) = line_search(obj, &theta, loss, slope, &dir, step) else {
            break StopReason::Stalled;
        };
        // Barzilai-Borwein trial step for the next iteration
        let s: Vec<f64> = probe.theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = probe.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            step = dot(&s, &s) / sy;
        }
        theta = probe.theta;
        grad = probe.grad;
        loss = probe.loss;
        iterations += 1;
    };
    let report = TrainReport {
        iterations,
        grad_inf_norm: inf_norm(&grad),
        final_loss: loss,
        stop,
    };
    (theta, report)
}
