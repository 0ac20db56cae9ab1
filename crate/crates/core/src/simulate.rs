//! Seeded Monte Carlo replications of the split one-step estimator.
//!
//! Replication `r` draws its sample with seed `seed + r` and permutes it
//! for splitting with seed `(seed + r) ^ SPLIT_STREAM`, so replications are
//! independent of each other and of the order they run in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{empirical_pmf, Distribution, GridDensity, SampleSet};
use crate::error::{Error, Result};
use crate::estimate::{efficiency_bound, split_fit, KdeConfig};
use crate::functional::Functional;

/// Separates the permutation stream from the sampling stream.
pub const SPLIT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn split_seed_for(sample_seed: u64) -> u64 {
    sample_seed ^ SPLIT_STREAM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub kde: KdeConfig,
}

/// One replication: fold-A plug-in, fold-B one-step, and how far `P̃` landed from `P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub plug_in: f64,
    pub one_step: f64,
    pub std_error: f64,
    pub covered: bool,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub n: usize,
    pub reps: usize,
    pub mean_bias: f64,
    /// Monte Carlo standard error of `mean_bias`.
    pub bias_se: f64,
    pub variance: f64,
    pub mse: f64,
    /// Wald interval coverage; only the one-step estimator has an interval.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStudy {
    pub functional: String,
    pub truth: f64,
    pub n: usize,
    pub reps: usize,
    pub mean_distance: f64,
    pub plug_in: EstimatorSummary,
    pub one_step: EstimatorSummary,
    /// `Var_P(IF) / n` at the full sample size.
    pub efficiency_bound: f64,
    /// `Var_P(IF) / (n - n/2)`, the bound at the evaluation-fold size.
    pub efficiency_bound_eval: f64,
    pub replications: Vec<Replication>,
}

/// Plug-in on the evaluation fold's empirical distribution, for functionals
/// that are defined there. The integrated squared density is not, so it
/// uses the smoothed fold-A estimate instead.
fn empirical_plug_in(t: &dyn Functional, eval: &SampleSet) -> Result<Option<f64>> {
    if t.name() != "mean" {
        return Ok(None);
    }
    let mut atoms = eval.points().to_vec();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    if atoms.len() < 2 {
        return Ok(None);
    }
    Ok(Some(t.evaluate(&empirical_pmf(eval, &atoms)?.into())))
}

pub fn replicate(t: &dyn Functional, p: &GridDensity, cfg: &McConfig, rep: usize) -> Result<Replication> {
    let sample_seed = cfg.seed.wrapping_add(rep as u64);
    let samples = p.sample(cfg.n, sample_seed)?;
    let out = split_fit(t, &samples, p.geometry(), &cfg.kde, split_seed_for(sample_seed))?;
    let truth = t.evaluate(&Distribution::Grid(p.clone()));
    let plug_in = match empirical_plug_in(t, &out.eval)? {
        Some(v) => v,
        None => out.report.plug_in,
    };
    Ok(Replication {
        plug_in,
        one_step: out.report.estimate,
        std_error: out.report.std_error,
        covered: out.report.covers(truth),
        distance: out.initial.l2_distance(p)?,
    })
}

fn summarize(name: &str, n: usize, errors: &[f64], coverage: Option<f64>) -> EstimatorSummary {
    let reps = errors.len();
    let mean_bias = errors.iter().sum::<f64>() / reps as f64;
    let variance = crate::estimate::sample_variance(errors);
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / reps as f64;
    EstimatorSummary {
        estimator: name.to_string(),
        n,
        reps,
        mean_bias,
        bias_se: (variance / reps as f64).sqrt(),
        variance,
        mse,
        coverage,
    }
}

/// Runs `cfg.reps` replications in parallel and summarizes them.
pub fn monte_carlo(t: &dyn Functional, p: &GridDensity, cfg: &McConfig) -> Result<McStudy> {
    if cfg.reps < 2 {
        return Err(Error::domain(format!(
            "variance is undefined for fewer than 2 replications (got {})",
            cfg.reps
        )));
    }
    let replications = (0..cfg.reps)
        .into_par_iter()
        .map(|r| replicate(t, p, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let pd = Distribution::Grid(p.clone());
    let truth = t.evaluate(&pd);
    let plug_errors: Vec<f64> = replications.iter().map(|r| r.plug_in - truth).collect();
    let step_errors: Vec<f64> = replications.iter().map(|r| r.one_step - truth).collect();
    let coverage =
        replications.iter().filter(|r| r.covered).count() as f64 / cfg.reps as f64;
    let eval_n = cfg.n - cfg.n / 2;
    Ok(McStudy {
        functional: t.name().to_string(),
        truth,
        n: cfg.n,
        reps: cfg.reps,
        mean_distance: replications.iter().map(|r| r.distance).sum::<f64>() / cfg.reps as f64,
        plug_in: summarize("plug_in", cfg.n, &plug_errors, None),
        one_step: summarize("one_step", cfg.n, &step_errors, Some(coverage)),
        efficiency_bound: efficiency_bound(t, &pd, cfg.n)?,
        efficiency_bound_eval: efficiency_bound(t, &pd, eval_n)?,
        replications,
    })
}
