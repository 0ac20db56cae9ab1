//! Convergence-rate studies for plug-in and one-step bias.
//!
//! A direction sweep moves the estimate toward the truth along a fixed
//! direction, `P̃_t = P + t (Q - P)`, so `||P̃_t - P||₂ = t ||Q - P||₂` and
//! the errors can be regressed on distance in log-log space. For a smooth
//! functional the plug-in error shrinks like the distance and the one-step
//! bias like its square. A KDE sweep does the same with `P̃` fitted to
//! growing samples, where the distance is random.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{rng_from_seed, DiscreteDist, Distribution, GridDensity, GridGeometry};
use crate::dist::presets;
use crate::error::{Error, Result};
use crate::estimate::KdeConfig;
use crate::functional::{influence_derivative, Functional};
use crate::path::{exact_r2, Path};
use crate::simulate::{replicate, McConfig};

/// Errors at or below this magnitude are treated as exactly zero.
pub const NUMERICAL_ZERO: f64 = 1e-13;

/// First-order terms below this make a direction degenerate for the plug-in fit.
pub const DEGENERATE_FIRST_ORDER: f64 = 1e-12;

/// `{2^-k : k = 0..=7}`.
pub fn default_t_grid() -> Vec<f64> {
    geometric_t_grid(0, 7)
}

/// `{2^-k : k = first..=last}`, descending.
pub fn geometric_t_grid(first: i32, last: i32) -> Vec<f64> {
    (first..=last).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyResult {
    /// Sweep parameter: `t` for direction sweeps, sample size for KDE sweeps.
    pub params: Vec<f64>,
    pub distances: Vec<f64>,
    pub plug_in_errors: Vec<f64>,
    pub one_step_biases: Vec<f64>,
    /// Monte Carlo standard errors of `one_step_biases` (KDE sweeps only).
    pub one_step_bias_se: Option<Vec<f64>>,
    pub slope_plug_in: Option<f64>,
    pub slope_one_step: Option<f64>,
    /// Indices left out of the plug-in fit.
    pub excluded_points: Vec<usize>,
    /// `∫ IF(z, P)(q - p) dz` vanished, so plug-in error has no first-order term.
    pub degenerate_direction: bool,
    /// Every one-step bias was numerically zero.
    pub one_step_exact_zero: bool,
}

#[derive(Debug, Serialize)]
struct RateSummary<'a> {
    slope_plug_in: Option<f64>,
    slope_one_step: Option<f64>,
    excluded_points: &'a [usize],
    degenerate_direction: bool,
    one_step_exact_zero: bool,
}

impl RateStudyResult {
    /// CSV with columns `<param>,distance,plug_in_error,one_step_bias`.
    pub fn write_csv<W: Write>(&self, param: &str, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([param, "distance", "plug_in_error", "one_step_bias"])?;
        for i in 0..self.params.len() {
            w.write_record([
                self.params[i].to_string(),
                self.distances[i].to_string(),
                self.plug_in_errors[i].to_string(),
                self.one_step_biases[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RateSummary {
            slope_plug_in: self.slope_plug_in,
            slope_one_step: self.slope_one_step,
            excluded_points: &self.excluded_points,
            degenerate_direction: self.degenerate_direction,
            one_step_exact_zero: self.one_step_exact_zero,
        })?)
    }
}

/// Ordinary least-squares slope of `ln ys` on `ln xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::shape(format!("{} xs vs {} ys", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::domain("slope needs at least 2 points"));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("log-log fit needs positive values, found {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("all x values are equal"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Slope over the points whose error is not numerically zero, with the
/// indices that were skipped.
fn fit_nonzero(xs: &[f64], errors: &[f64]) -> Result<(Option<f64>, Vec<usize>)> {
    let mut keep_x = Vec::new();
    let mut keep_y = Vec::new();
    let mut skipped = Vec::new();
    for (i, (x, e)) in xs.iter().zip(errors).enumerate() {
        if e.abs() > NUMERICAL_ZERO {
            keep_x.push(*x);
            keep_y.push(e.abs());
        } else {
            skipped.push(i);
        }
    }
    if keep_x.len() < 2 {
        return Ok((None, skipped));
    }
    Ok((Some(loglog_slope(&keep_x, &keep_y)?), skipped))
}

pub fn direction_sweep(
    p: &Distribution,
    q: &Distribution,
    t: &dyn Functional,
    t_grid: &[f64],
) -> Result<RateStudyResult> {
    if let Some(bad) = t_grid.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::domain(format!("t = {bad} outside (0, 1]")));
    }
    if t_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("t grid must be strictly decreasing"));
    }
    if p.l2_distance(q)? == 0.0 {
        return Err(Error::DegeneratePath("direction Q equals P".into()));
    }
    let first_order = influence_derivative(t, p, q)?;
    let degenerate_direction = first_order.abs() < DEGENERATE_FIRST_ORDER;
    let truth = t.evaluate(p);

    let mut distances = Vec::with_capacity(t_grid.len());
    let mut plug_in_errors = Vec::with_capacity(t_grid.len());
    let mut one_step_biases = Vec::with_capacity(t_grid.len());
    for &step in t_grid {
        let path = Path::new(p.clone(), p.mix(q, step)?)?;
        distances.push(path.distance());
        plug_in_errors.push(t.evaluate(path.initial()) - truth);
        one_step_biases.push(exact_r2(&path, t)?);
    }

    let (slope_plug_in, excluded_points) = if degenerate_direction {
        (None, (0..t_grid.len()).collect())
    } else {
        fit_nonzero(&distances, &plug_in_errors)?
    };
    let (slope_one_step, zeros) = fit_nonzero(&distances, &one_step_biases)?;
    Ok(RateStudyResult {
        params: t_grid.to_vec(),
        distances,
        plug_in_errors,
        one_step_biases,
        one_step_bias_se: None,
        slope_plug_in,
        slope_one_step,
        excluded_points,
        degenerate_direction,
        one_step_exact_zero: zeros.len() == t_grid.len(),
    })
}

/// KDE-based sweep over sample sizes; errors are Monte Carlo means over `reps`.
pub fn kde_rate_sweep(
    p: &GridDensity,
    t: &dyn Functional,
    n_grid: &[usize],
    reps: usize,
    config: &KdeConfig,
    seed: u64,
) -> Result<RateStudyResult> {
    if reps == 0 {
        return Err(Error::domain("reps must be at least 1"));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("n grid must be nonempty and strictly increasing"));
    }
    let truth = t.evaluate(&Distribution::Grid(p.clone()));
    let mut distances = Vec::new();
    let mut plug_in_errors = Vec::new();
    let mut one_step_biases = Vec::new();
    let mut bias_se = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let cfg = McConfig {
            n,
            reps,
            seed: seed.wrapping_add((i as u64) << 32),
            kde: *config,
        };
        let reps_out = (0..reps)
            .into_par_iter()
            .map(|r| replicate(t, p, &cfg, r))
            .collect::<Result<Vec<_>>>()?;
        let k = reps as f64;
        distances.push(reps_out.iter().map(|r| r.distance).sum::<f64>() / k);
        plug_in_errors.push(reps_out.iter().map(|r| r.plug_in - truth).sum::<f64>() / k);
        let errs: Vec<f64> = reps_out.iter().map(|r| r.one_step - truth).collect();
        one_step_biases.push(errs.iter().sum::<f64>() / k);
        bias_se.push((crate::estimate::sample_variance(&errs) / k).sqrt());
    }
    let (slope_plug_in, excluded_points) = fit_nonzero(&distances, &plug_in_errors)?;
    let (slope_one_step, zeros) = fit_nonzero(&distances, &one_step_biases)?;
    Ok(RateStudyResult {
        params: n_grid.iter().map(|&n| n as f64).collect(),
        distances,
        plug_in_errors,
        one_step_biases,
        one_step_bias_se: Some(bias_se),
        slope_plug_in,
        slope_one_step,
        excluded_points,
        degenerate_direction: false,
        one_step_exact_zero: zeros.len() == n_grid.len(),
    })
}

/// Named directions on a grid: the density presets plus `2 (1 - z)`.
pub fn grid_direction_catalog(geometry: GridGeometry) -> Vec<(String, Distribution)> {
    let (lo, hi) = (geometry.lower(), geometry.upper());
    let mirrored = GridDensity::from_fn(geometry, |z| 2.0 * (hi - z) / (hi - lo))
        .expect("mirrored linear density is positive inside the interval");
    vec![
        ("uniform".to_string(), presets::uniform(geometry).into()),
        ("linear".to_string(), presets::linear(geometry).into()),
        ("linear_mirrored".to_string(), mirrored.into()),
        ("twobump".to_string(), presets::twobump(geometry).into()),
        ("beta22".to_string(), presets::beta22(geometry).into()),
    ]
}

/// `count` seeded random directions near `p`: smooth multiplicative
/// perturbations on grids, random reweightings of the atoms otherwise.
pub fn random_directions(p: &Distribution, count: usize, seed: u64) -> Result<Vec<(String, Distribution)>> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let q: Distribution = match p {
            Distribution::Grid(d) => {
                let g = d.geometry();
                let (lo, width) = (g.lower(), g.upper() - g.lower());
                let freq = rng.random_range(1..=4) as f64;
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let amp: f64 = rng.random_range(0.2..0.9);
                let values = d
                    .values()
                    .iter()
                    .zip(g.midpoints())
                    .map(|(v, z)| {
                        let u = (z - lo) / width;
                        v * (1.0 + amp * (std::f64::consts::PI * freq * u + phase).sin())
                    })
                    .collect();
                GridDensity::new(*g, values)?.into()
            }
            Distribution::Discrete(d) => {
                let weights = d
                    .masses()
                    .iter()
                    .map(|m| m * rng.random_range(0.2..1.8) + rng.random_range(0.0..0.2))
                    .collect();
                DiscreteDist::from_weights(d.atoms().to_vec(), weights)?.into()
            }
        };
        out.push((format!("random{i}"), q));
    }
    Ok(out)
}
