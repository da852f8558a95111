//! Closed-loop rollouts of a dp policy: source, scheduler, affine codec,
//! additive-noise channel and estimator.

use std::io::{self, Write};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decode, encode, ChannelParams, CodecParams, Sign};
use crate::dp::DpTable;
use crate::error::{invalid, Error, Result};
use crate::numfmt::sig;
use crate::source::{NoiseModel, NoiseShape, SourceDensity};
use crate::stage::Action;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub noisy_budget: usize,
    pub perfect_budget: usize,
    pub density: SourceDensity,
    pub noise_shape: NoiseShape,
    pub channel: ChannelParams,
    pub seed: u64,
    pub episodes: usize,
}

impl EpisodeConfig {
    pub fn noise(&self) -> NoiseModel {
        NoiseModel::new(self.noise_shape, self.channel.noise_variance()).expect("channel noise variance is positive")
    }

    fn validate(&self, table: &DpTable) -> Result<()> {
        if self.episodes == 0 {
            return Err(invalid("episodes", "must be at least 1"));
        }
        let p = table.problem();
        let mut diffs = Vec::new();
        if p.horizon != self.horizon {
            diffs.push(format!("T {} vs {}", p.horizon, self.horizon));
        }
        if p.noisy_budget != self.noisy_budget {
            diffs.push(format!("N1 {} vs {}", p.noisy_budget, self.noisy_budget));
        }
        if p.perfect_budget != self.perfect_budget {
            diffs.push(format!("N2 {} vs {}", p.perfect_budget, self.perfect_budget));
        }
        if p.density != self.density {
            diffs.push("source density".into());
        }
        if p.snr != self.channel.snr() {
            diffs.push(format!("gamma {} vs {}", p.snr, self.channel.snr()));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigMismatch(format!(
                "table/config differ: {}",
                diffs.join(", ")
            )))
        }
    }
}

/// What the estimator received at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Received {
    /// The free symbol ε.
    Nothing,
    /// Noisy channel output plus the sign from the side channel.
    Noisy { y_tilde: f64, sign: Sign },
    /// Exact value over the perfect channel.
    Exact(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub x: f64,
    pub action: Action,
    pub received: Received,
    pub estimate: f64,
    pub sq_error: f64,
    /// Remaining opportunities before this step's decision.
    pub noisy_left: usize,
    pub perfect_left: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub steps: Vec<Step>,
    pub final_noisy_left: usize,
    pub final_perfect_left: usize,
}

impl SamplePath {
    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.sq_error).sum()
    }

    /// Writes `t,x,u,y_tilde,s,xhat,sqerr,En,Ep`; `y_tilde` and `s` are
    /// empty when nothing crossed the respective channel.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,x,u,y_tilde,s,xhat,sqerr,En,Ep")?;
        for s in &self.steps {
            let (y, sign) = match s.received {
                Received::Nothing => (String::new(), String::new()),
                Received::Noisy { y_tilde, sign } => (sig(y_tilde), format!("{}", sign.value() as i8)),
                Received::Exact(x) => (sig(x), String::new()),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.t,
                sig(s.x),
                s.action.index(),
                y,
                sign,
                sig(s.estimate),
                sig(s.sq_error),
                s.noisy_left,
                s.perfect_left
            )?;
        }
        Ok(())
    }
}

/// Per-episode outcome used by the Monte Carlo aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Outcome {
    cost: f64,
    final_noisy_left: usize,
    final_perfect_left: usize,
}

/// Aggregate of many independent episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub episodes: usize,
    pub mean: f64,
    pub std_error: f64,
    pub mean_final_noisy_left: f64,
    pub mean_final_perfect_left: f64,
    /// Fraction of episodes that end with `Eⁿ = 0`.
    pub noisy_exhausted: f64,
    /// Fraction of episodes that end with `Eᵖ = 0`.
    pub perfect_exhausted: f64,
}

/// Runs episodes of a solved dp policy. Codec parameters for each state are
/// derived lazily from that state's positive noisy region `(β₁, β₂]`.
pub struct Simulator<'a> {
    config: EpisodeConfig,
    table: &'a DpTable,
    noise: NoiseModel,
    codecs: Vec<OnceLock<Option<CodecParams>>>,
}

/// Independent, individually reproducible stream for episode `index`.
pub fn episode_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

impl<'a> Simulator<'a> {
    pub fn new(config: EpisodeConfig, table: &'a DpTable) -> Result<Self> {
        config.validate(table)?;
        let states = config.horizon * (config.noisy_budget + 1) * (config.perfect_budget + 1);
        Ok(Simulator {
            noise: config.noise(),
            config,
            table,
            codecs: (0..states).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    fn codec(&self, t: usize, noisy_left: usize, perfect_left: usize) -> Option<CodecParams> {
        let c = &self.config;
        let idx = ((t - 1) * (c.noisy_budget + 1) + noisy_left) * (c.perfect_budget + 1) + perfect_left;
        *self.codecs[idx].get_or_init(|| {
            let e = self.table.entry(t, noisy_left, perfect_left);
            let region = c.density.interval_moments(e.beta1, e.beta2).ok()?;
            CodecParams::for_region(&region, &c.channel).ok()
        })
    }

    fn roll(&self, index: u64, mut record: Option<&mut Vec<Step>>) -> Outcome {
        let c = &self.config;
        let mut rng = episode_rng(c.seed, index);
        let mut noisy_left = c.noisy_budget;
        let mut perfect_left = c.perfect_budget;
        let mut cost = 0.0;
        for t in 1..=c.horizon {
            let x = c.density.sample(&mut rng);
            let mut action = self.table.policy_lookup(t, noisy_left, perfect_left, x);
            let codec = match action {
                Action::Noisy => self.codec(t, noisy_left, perfect_left),
                _ => None,
            };
            if action == Action::Noisy && codec.is_none() {
                // Region too thin to carry a codec; it has no probability mass.
                action = Action::Idle;
            }
            let (received, estimate) = match action {
                Action::Idle => (Received::Nothing, 0.0),
                Action::Noisy => {
                    let codec = codec.expect("checked above");
                    let sign = Sign::of(x);
                    let y_tilde = encode(x, sign, &codec) + self.noise.sample(&mut rng);
                    (Received::Noisy { y_tilde, sign }, decode(y_tilde, sign, &codec))
                }
                Action::Perfect => (Received::Exact(x), x),
            };
            let err = x - estimate;
            let sq_error = err * err;
            cost += sq_error;
            if let Some(steps) = record.as_deref_mut() {
                steps.push(Step {
                    t,
                    x,
                    action,
                    received,
                    estimate,
                    sq_error,
                    noisy_left,
                    perfect_left,
                });
            }
            match action {
                Action::Noisy => noisy_left -= 1,
                Action::Perfect => perfect_left -= 1,
                Action::Idle => {}
            }
        }
        Outcome {
            cost,
            final_noisy_left: noisy_left,
            final_perfect_left: perfect_left,
        }
    }

    /// Full trace of episode `index`.
    pub fn run_episode(&self, index: u64) -> SamplePath {
        let mut steps = Vec::with_capacity(self.config.horizon);
        let out = self.roll(index, Some(&mut steps));
        SamplePath {
            steps,
            final_noisy_left: out.final_noisy_left,
            final_perfect_left: out.final_perfect_left,
        }
    }

    /// Mean and standard error of the episode cost over `config.episodes`
    /// episodes. Episodes run in parallel; the reduction is sequential in
    /// episode order, so results do not depend on scheduling.
    pub fn monte_carlo(&self) -> MonteCarloSummary {
        let n = self.config.episodes;
        let outcomes: Vec<Outcome> = (0..n as u64).into_par_iter().map(|i| self.roll(i, None)).collect();
        let nf = n as f64;
        let mean = outcomes.iter().map(|o| o.cost).sum::<f64>() / nf;
        let var = if n > 1 {
            outcomes.iter().map(|o| (o.cost - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        MonteCarloSummary {
            episodes: n,
            mean,
            std_error: (var / nf).sqrt(),
            mean_final_noisy_left: outcomes.iter().map(|o| o.final_noisy_left as f64).sum::<f64>() / nf,
            mean_final_perfect_left: outcomes.iter().map(|o| o.final_perfect_left as f64).sum::<f64>() / nf,
            noisy_exhausted: outcomes.iter().filter(|o| o.final_noisy_left == 0).count() as f64 / nf,
            perfect_exhausted: outcomes.iter().filter(|o| o.final_perfect_left == 0).count() as f64 / nf,
        }
    }
}

/// Convenience wrapper: Monte Carlo `(mean, std_error)` of a dp policy.
pub fn monte_carlo_cost(config: &EpisodeConfig, table: &DpTable) -> Result<(f64, f64)> {
    let s = Simulator::new(config.clone(), table)?.monte_carlo();
    Ok((s.mean, s.std_error))
}
