use std::path::PathBuf;

use remest::codec::{ChannelParams, DEFAULT_POWER};
use remest::counterexample::{build_uniform_counterexample, report, ShiftConstruction, Verdict};
use remest::dp::{solve_dp as solve_table, solve_dp_values, DpProblem};
use remest::numfmt::sig;
use remest::sim::{EpisodeConfig, Simulator};
use remest::source::{NoiseShape, SourceDensity, TabulatedDensity};
use remest::stage::{grid_thresholds, solve_thresholds, SoftCosts, SoftSolution};
use serde_json::{json, Value};

use crate::config::{pick, RunConfig};
use crate::output::{emit, json_text, num, rounded};
use crate::{
    CliError, CommonArgs, CounterexampleArgs, SimulateArgs, SolveDpArgs, SolveSoftArgs, SourceArgs, SweepArgs,
    EXIT_INCONCLUSIVE,
};

/// Grid points per axis for the `--grid-fallback` search.
const FALLBACK_GRID_POINTS: f64 = 4000.0;

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be nonnegative and finite, got {v}")))
    }
}

/// Loads the config and runs `f` on a worker pool of the requested size.
fn with_context<T, F>(common: &CommonArgs, f: F) -> Result<T, CliError>
where
    T: Send,
    F: FnOnce(&RunConfig, Option<PathBuf>) -> Result<T, CliError> + Send,
{
    let cfg = RunConfig::load(common.config.as_deref())?;
    let out = common.out.clone().or(cfg.string("out")?.map(PathBuf::from));
    let workers = common.workers.or(cfg.usize("workers")?);
    match workers {
        None => f(&cfg, out),
        Some(0) => Err(invalid("workers", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid("workers", e.to_string()))?;
            pool.install(|| f(&cfg, out))
        }
    }
}

fn density(args: &SourceArgs, cfg: &RunConfig) -> Result<SourceDensity, CliError> {
    let kind = pick(args.density.clone(), cfg.string("density")?, "laplace".into());
    match kind.to_ascii_lowercase().as_str() {
        "laplace" => {
            let rate = positive("lambda", pick(args.lambda, cfg.f64("lambda")?, 1.0))?;
            Ok(SourceDensity::laplace(rate)?)
        }
        "uniform" => {
            let l = positive("L", pick(args.half_width, cfg.f64("L")?, 10.0))?;
            Ok(SourceDensity::uniform(l)?)
        }
        "tabulated" => {
            let (xs, pdf) = cfg
                .table("density_table")?
                .ok_or_else(|| invalid("density_table", "required for a tabulated density"))?;
            Ok(SourceDensity::tabulated(TabulatedDensity::new(xs, pdf)?))
        }
        other => Err(invalid("density", format!("unknown density `{other}`"))),
    }
}

fn snr(args: &SourceArgs, cfg: &RunConfig) -> Result<f64, CliError> {
    positive("gamma", pick(args.gamma, cfg.f64("gamma")?, 1.0))
}

fn solution_json(s: &SoftSolution, density: &SourceDensity) -> Value {
    json!({
        "source": density.name(),
        "beta1": num(s.beta1),
        "beta2": num(s.beta2),
        "J": num(s.cost),
        "used_boundary": s.used_boundary,
        "residuals": [num(s.residuals.0), num(s.residuals.1)],
        "codec": s.codec.map(|c| json!({
            "gain": num(c.gain),
            "offset": num(c.offset),
            "snr": num(c.snr),
        })),
    })
}

fn print_json(v: &Value, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = json_text(v);
    if let Some(path) = out.as_deref() {
        emit(Some(path), |w| w.write_all(text.as_bytes()))?;
    }
    emit(None, |w| w.write_all(text.as_bytes()))
}

pub fn solve_soft(args: &SolveSoftArgs) -> Result<u8, CliError> {
    with_context(&args.common, |cfg, out| {
        let d = density(&args.source, cfg)?;
        let c1 = nonnegative("c1", pick(args.c1, cfg.f64("c1")?, 0.5))?;
        let c2 = nonnegative("c2", pick(args.c2, cfg.f64("c2")?, 2.0))?;
        let costs = SoftCosts::new(c1, c2, snr(&args.source, cfg)?)?;
        let fallback = args.grid_fallback || cfg.bool("grid_fallback")?.unwrap_or(false);
        let solution = match solve_thresholds(&d, &costs) {
            Err(e) if fallback && e.is_non_convergence() => {
                let (_, hi) = d.support();
                let upper = if hi.is_finite() {
                    hi
                } else {
                    10.0 * d.variance().sqrt() + c2.sqrt()
                };
                grid_thresholds(&d, &costs, upper, upper / FALLBACK_GRID_POINTS)?
            }
            other => other?,
        };
        print_json(&solution_json(&solution, &d), out)?;
        Ok(0)
    })
}

fn problem(args: &SourceArgs, horizon: usize, n1: usize, n2: usize, cfg: &RunConfig) -> Result<DpProblem, CliError> {
    if horizon == 0 {
        return Err(invalid("T", "horizon must be at least 1"));
    }
    Ok(DpProblem::new(horizon, n1, n2, density(args, cfg)?, snr(args, cfg)?)?)
}

pub fn solve_dp(args: &SolveDpArgs) -> Result<u8, CliError> {
    with_context(&args.common, |cfg, out| {
        let b = &args.budgets;
        let horizon = pick(b.horizon, cfg.usize("T")?, 100);
        let n1 = pick(b.n1, cfg.usize("N1")?, 20);
        let n2 = pick(b.n2, cfg.usize("N2")?, 10);
        let p = problem(&args.source, horizon, n1, n2, cfg)?;
        let table = solve_table(&p)?;
        if let Some(path) = out.as_deref() {
            emit(Some(path), |w| table.write_csv(w))?;
        }
        let summary = json!({
            "T": horizon,
            "N1": n1,
            "N2": n2,
            "gamma": num(p.snr),
            "source": p.density.name(),
            "J": num(table.optimal_cost()),
        });
        emit(None, |w| w.write_all(json_text(&summary).as_bytes()))?;
        Ok(0)
    })
}

pub fn sweep(args: &SweepArgs) -> Result<u8, CliError> {
    with_context(&args.common, |cfg, out| {
        let horizon = pick(args.horizon, cfg.usize("T")?, 100);
        let axis = pick(args.axis.clone(), cfg.string("axis")?, "N1".into());
        let max = pick(args.max, cfg.usize("max")?, 100);
        let fixed = pick(args.fixed.clone(), cfg.usize_list("fixed")?, vec![0, 10, 20]);
        if fixed.is_empty() {
            return Err(invalid("fixed", "needs at least one value"));
        }
        let other_max = *fixed.iter().max().expect("nonempty");
        let sweep_n1 = match axis.to_ascii_uppercase().as_str() {
            "N1" => true,
            "N2" => false,
            _ => return Err(invalid("axis", format!("must be N1 or N2, got `{axis}`"))),
        };
        let (n1, n2) = if sweep_n1 { (max, other_max) } else { (other_max, max) };
        // Budgets nest, so one solve at the largest budgets yields every point.
        let values = solve_dp_values(&problem(&args.source, horizon, n1, n2, cfg)?)?;
        let at = |a: usize, b: usize| values[a * (n2 + 1) + b];
        emit(out.as_deref(), |w| {
            if sweep_n1 {
                writeln!(w, "N1,N2,J")?;
            } else {
                writeln!(w, "N2,N1,J")?;
            }
            for &f in &fixed {
                for v in 0..=max {
                    let j = if sweep_n1 { at(v, f) } else { at(f, v) };
                    writeln!(w, "{v},{f},{}", sig(j))?;
                }
            }
            Ok(())
        })?;
        Ok(0)
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<u8, CliError> {
    with_context(&args.common, |cfg, out| {
        let b = &args.budgets;
        let horizon = pick(b.horizon, cfg.usize("T")?, 100);
        let n1 = pick(b.n1, cfg.usize("N1")?, 40);
        let n2 = pick(b.n2, cfg.usize("N2")?, 40);
        let episodes = pick(args.episodes, cfg.usize("episodes")?, 1);
        if episodes == 0 {
            return Err(invalid("episodes", "must be at least 1"));
        }
        let noise: NoiseShape = pick(args.noise.clone(), cfg.string("noise")?, "gaussian".into()).parse()?;
        let power = positive("power", pick(args.power, cfg.f64("power")?, DEFAULT_POWER))?;
        let seed = pick(args.seed, cfg.u64("seed")?, 0);
        let summary_path = args.summary.clone().or(cfg.string("summary")?.map(PathBuf::from));

        let p = problem(&args.source, horizon, n1, n2, cfg)?;
        let table = solve_table(&p)?;
        let config = EpisodeConfig {
            horizon,
            noisy_budget: n1,
            perfect_budget: n2,
            density: p.density.clone(),
            noise_shape: noise,
            channel: ChannelParams::new(power, p.snr)?,
            seed,
            episodes,
        };
        let sim = Simulator::new(config, &table)?;
        let path = sim.run_episode(0);
        let mut summary = json!({
            "seed": seed,
            "total_cost": num(path.total_cost()),
            "final_En": path.final_noisy_left,
            "final_Ep": path.final_perfect_left,
            "J_dp": num(table.optimal_cost()),
        });
        if episodes > 1 {
            summary["monte_carlo"] = rounded(&sim.monte_carlo());
        }
        let text = json_text(&summary);
        if let Some(p) = summary_path.as_deref() {
            emit(Some(p), |w| w.write_all(text.as_bytes()))?;
        }
        match out.as_deref() {
            Some(p) => {
                emit(Some(p), |w| path.write_csv(w))?;
                emit(None, |w| w.write_all(text.as_bytes()))?;
            }
            None => {
                emit(None, |w| path.write_csv(w))?;
                eprint!("{text}");
            }
        }
        Ok(0)
    })
}

pub fn counterexample(args: &CounterexampleArgs) -> Result<u8, CliError> {
    with_context(&args.common, |cfg, out| {
        let l = positive("L", pick(args.half_width, cfg.f64("L")?, 10.0))?;
        let beta1 = nonnegative("beta1", pick(args.beta1, cfg.f64("beta1")?, 0.5))?;
        let beta2 = nonnegative("beta2", pick(args.beta2, cfg.f64("beta2")?, 1.0))?;
        let c1 = nonnegative("c1", pick(args.c1, cfg.f64("c1")?, 0.5))?;
        let c2 = nonnegative("c2", pick(args.c2, cfg.f64("c2")?, 2.0))?;
        let gamma = positive("gamma", pick(args.gamma, cfg.f64("gamma")?, 1.0))?;
        let null_shift = args.null_shift || cfg.bool("null_shift")?.unwrap_or(false);
        let costs = SoftCosts::new(c1, c2, gamma)?;
        let d = SourceDensity::uniform(l)?;
        let mut construction = build_uniform_counterexample(l, beta1, beta2, &costs)?;
        if null_shift {
            construction = ShiftConstruction::null(construction.original, construction.side_channel);
        }
        let r = report(&construction, &d, &costs)?;
        print_json(&rounded(&r), out)?;
        Ok(match r.comparison.verdict {
            Verdict::ShiftedStrictlyBetter => 0,
            Verdict::Tie | Verdict::ShiftedWorse => EXIT_INCONCLUSIVE,
        })
    })
}
