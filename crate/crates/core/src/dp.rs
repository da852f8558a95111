//! Backward dynamic program for the hard-constraint problem.
//!
//! The state at time `t` is the pair of remaining opportunities
//! `(Eⁿ, Eᵖ)`. Differencing the next layer gives per-use prices
//! `c₁ₜ = J*(t+1, Eⁿ−1, Eᵖ) − J*(t+1, Eⁿ, Eᵖ)` and
//! `c₂ₜ = J*(t+1, Eⁿ, Eᵖ−1) − J*(t+1, Eⁿ, Eᵖ)`, which turns each stage into a
//! soft-constraint problem solved by [`crate::stage`]. An exhausted channel
//! removes its action from the stage problem.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numfmt::sig;
use crate::source::SourceDensity;
use crate::stage::{
    eval_threshold_cost, perfect_only, solve_noisy_only, solve_thresholds, threshold_action, Action, SoftCosts,
    SoftSolution,
};

/// Horizon, budgets, source and channel SNR of a hard-constraint problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpProblem {
    pub horizon: usize,
    pub noisy_budget: usize,
    pub perfect_budget: usize,
    pub density: SourceDensity,
    pub snr: f64,
}

impl DpProblem {
    pub fn new(
        horizon: usize,
        noisy_budget: usize,
        perfect_budget: usize,
        density: SourceDensity,
        snr: f64,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("T", "horizon must be at least 1"));
        }
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(invalid("gamma", format!("must be positive, got {snr}")));
        }
        Ok(DpProblem {
            horizon,
            noisy_budget,
            perfect_budget,
            density,
            snr,
        })
    }

    fn width(&self) -> usize {
        self.perfect_budget + 1
    }

    fn states(&self) -> usize {
        (self.noisy_budget + 1) * self.width()
    }

    fn index(&self, noisy_left: usize, perfect_left: usize) -> usize {
        noisy_left * self.width() + perfect_left
    }
}

/// Solution of one `(t, Eⁿ, Eᵖ)` state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpEntry {
    /// Optimal cost-to-go `J*(t, Eⁿ, Eᵖ)`.
    pub value: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Effective noisy-channel price; `None` when `Eⁿ = 0`.
    pub c1t: Option<f64>,
    /// Effective perfect-channel price; `None` when `Eᵖ = 0`.
    pub c2t: Option<f64>,
}

/// Full value/threshold table for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpTable {
    problem: DpProblem,
    /// `layers[t - 1]`, each indexed by `Eⁿ·(N₂+1) + Eᵖ`.
    layers: Vec<Vec<DpEntry>>,
}

fn solve_state(problem: &DpProblem, next: &[f64], noisy_left: usize, perfect_left: usize) -> Result<DpEntry> {
    let density = &problem.density;
    let here = next[problem.index(noisy_left, perfect_left)];
    let c1t = (noisy_left > 0).then(|| next[problem.index(noisy_left - 1, perfect_left)] - here);
    let c2t = (perfect_left > 0).then(|| next[problem.index(noisy_left, perfect_left - 1)] - here);

    let stage: SoftSolution = match (c1t, c2t) {
        (None, None) => {
            return Ok(DpEntry {
                value: here + density.variance(),
                beta1: f64::INFINITY,
                beta2: f64::INFINITY,
                c1t,
                c2t,
            })
        }
        (None, Some(c2)) => perfect_only(density, &SoftCosts::new(0.0, c2.max(0.0), problem.snr)?),
        (Some(c1), None) => solve_noisy_only(density, c1.max(0.0), problem.snr)?,
        (Some(c1), Some(c2)) => {
            let costs = SoftCosts::new(c1.max(0.0), c2.max(0.0), problem.snr)?;
            if costs.c1 >= costs.c2 {
                perfect_only(density, &costs)
            } else {
                solve_thresholds(density, &costs)?
            }
        }
    };
    let costs = SoftCosts::new(c1t.unwrap_or(0.0).max(0.0), c2t.unwrap_or(0.0).max(0.0), problem.snr)?;
    Ok(DpEntry {
        value: here + eval_threshold_cost(stage.beta1, stage.beta2, density, &costs),
        beta1: stage.beta1,
        beta2: stage.beta2,
        c1t,
        c2t,
    })
}

fn solve_layer(problem: &DpProblem, t: usize, next: &[f64]) -> Result<Vec<DpEntry>> {
    let width = problem.width();
    (0..problem.states())
        .into_par_iter()
        .map(|i| {
            let (en, ep) = (i / width, i % width);
            solve_state(problem, next, en, ep).map_err(|e| Error::StageFailed {
                t,
                noisy_left: en,
                perfect_left: ep,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Solves the dynamic program and keeps every layer.
pub fn solve_dp(problem: &DpProblem) -> Result<DpTable> {
    let mut next = vec![0.0; problem.states()];
    let mut layers = Vec::with_capacity(problem.horizon);
    for t in (1..=problem.horizon).rev() {
        let layer = solve_layer(problem, t, &next)?;
        next = layer.iter().map(|e| e.value).collect();
        layers.push(layer);
    }
    layers.reverse();
    Ok(DpTable {
        problem: problem.clone(),
        layers,
    })
}

/// Optimal values `J*(1, Eⁿ, Eᵖ)` for every budget pair up to the problem's
/// budgets, retaining only two layers during the sweep. Row-major in `Eⁿ`.
pub fn solve_dp_values(problem: &DpProblem) -> Result<Vec<f64>> {
    let mut next = vec![0.0; problem.states()];
    for t in (1..=problem.horizon).rev() {
        let layer = solve_layer(problem, t, &next)?;
        next = layer.into_iter().map(|e| e.value).collect();
    }
    Ok(next)
}

impl DpTable {
    pub fn problem(&self) -> &DpProblem {
        &self.problem
    }

    fn check(&self, t: usize, noisy_left: usize, perfect_left: usize) {
        assert!(
            (1..=self.problem.horizon).contains(&t)
                && noisy_left <= self.problem.noisy_budget
                && perfect_left <= self.problem.perfect_budget,
            "state (t={t}, En={noisy_left}, Ep={perfect_left}) outside table"
        );
    }

    /// Entry for state `(t, Eⁿ, Eᵖ)` with `1 <= t <= T`.
    pub fn entry(&self, t: usize, noisy_left: usize, perfect_left: usize) -> &DpEntry {
        self.check(t, noisy_left, perfect_left);
        &self.layers[t - 1][self.problem.index(noisy_left, perfect_left)]
    }

    /// `J*(t, Eⁿ, Eᵖ)`; zero at `t = T + 1`.
    pub fn value(&self, t: usize, noisy_left: usize, perfect_left: usize) -> f64 {
        if t == self.problem.horizon + 1 {
            return 0.0;
        }
        self.entry(t, noisy_left, perfect_left).value
    }

    /// Optimal `T`-stage cost `J*(1, N₁, N₂)`.
    pub fn optimal_cost(&self) -> f64 {
        self.value(1, self.problem.noisy_budget, self.problem.perfect_budget)
    }

    /// Scheduling decision at state `(t, Eⁿ, Eᵖ)` for observation `x`.
    pub fn policy_lookup(&self, t: usize, noisy_left: usize, perfect_left: usize, x: f64) -> Action {
        let e = self.entry(t, noisy_left, perfect_left);
        match threshold_action(x, e.beta1, e.beta2) {
            Action::Noisy if noisy_left == 0 => Action::Idle,
            Action::Perfect if perfect_left == 0 => Action::Idle,
            a => a,
        }
    }

    /// Iterates `(t, Eⁿ, Eᵖ, entry)` in `t`-major order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, usize, &DpEntry)> + '_ {
        let width = self.problem.width();
        self.layers.iter().enumerate().flat_map(move |(k, layer)| {
            layer
                .iter()
                .enumerate()
                .map(move |(i, e)| (k + 1, i / width, i % width, e))
        })
    }

    /// Writes the table as CSV with header `t,En,Ep,J,beta1,beta2,c1t,c2t`.
    /// Undefined prices are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,En,Ep,J,beta1,beta2,c1t,c2t")?;
        let opt = |v: Option<f64>| v.map(sig).unwrap_or_default();
        for (t, en, ep, e) in self.rows() {
            writeln!(
                out,
                "{t},{en},{ep},{},{},{},{},{}",
                sig(e.value),
                sig(e.beta1),
                sig(e.beta2),
                opt(e.c1t),
                opt(e.c2t)
            )?;
        }
        Ok(())
    }
}
