//! Estimators built from data: Gaussian KDE for `P̃`, the plug-in `T(P̃)`,
//! and the one-step estimator
//!
//! ```text
//! T̂ = T(P̃) + (1/n) Σ IF(z_i, P̃)
//! ```
//!
//! with a Wald interval from the sample variance of the influence terms.
//! [`one_step`] trusts the caller that `P̃` was built without the
//! evaluation points; [`split_one_step`] fits and evaluates on disjoint halves.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dist::{rng_from_seed, Distribution, GridDensity, GridGeometry, SampleSet};
use crate::error::{Error, Result};
use crate::functional::Functional;

/// Two-sided 95% standard normal quantile.
pub const Z_975: f64 = 1.959964;

/// Kernel support is cut at this many bandwidths.
const KERNEL_CUTOFF: f64 = 8.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum BandwidthRule {
    /// A fixed bandwidth.
    Fixed { h: f64 },
    /// `c σ̂ n^(-1/5)`.
    Reference { c: f64 },
    /// `c σ̂ n^(-1/3)`, narrower than the reference rule for large `n`.
    Undersmoothed { c: f64 },
}

impl BandwidthRule {
    /// Silverman's constant for the Gaussian kernel.
    pub const DEFAULT_C: f64 = 1.06;

    /// Undersmoothing constant. The two rules give the same bandwidth at
    /// `n = UNDERSMOOTH_PIVOT_N`, so undersmoothing only narrows the kernel
    /// for larger samples: `1.06 * 1000^(2/15)`.
    pub const UNDERSMOOTH_C: f64 = 2.66;

    pub const UNDERSMOOTH_PIVOT_N: f64 = 1000.0;

    pub fn reference() -> Self {
        BandwidthRule::Reference { c: Self::DEFAULT_C }
    }

    pub fn undersmoothed() -> Self {
        BandwidthRule::Undersmoothed { c: Self::UNDERSMOOTH_C }
    }

    pub fn bandwidth(&self, points: &[f64]) -> Result<f64> {
        let h = match *self {
            BandwidthRule::Fixed { h } => h,
            BandwidthRule::Reference { c } => c * sample_sd(points)? * (points.len() as f64).powf(-0.2),
            BandwidthRule::Undersmoothed { c } => {
                c * sample_sd(points)? * (points.len() as f64).powf(-1.0 / 3.0)
            }
        };
        if h.is_finite() && h > 0.0 {
            Ok(h)
        } else {
            Err(Error::Bandwidth(format!("bandwidth {h} is not positive")))
        }
    }
}

fn sample_sd(points: &[f64]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Bandwidth("need at least 2 points for a data-driven bandwidth".into()));
    }
    let sd = sample_variance(points).sqrt();
    if sd > 0.0 {
        Ok(sd)
    } else {
        Err(Error::Bandwidth("sample has zero variance".into()))
    }
}

/// Unbiased sample variance; 0 for fewer than two points.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

/// How kernel mass falling outside the interval is handled. Either way the
/// result is renormalized to integrate to one on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Drop mass outside the interval.
    #[default]
    Truncate,
    /// Fold mass outside the interval back across the nearest endpoint.
    Reflect,
}

/// Gaussian-kernel density estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub bandwidth: BandwidthRule,
    pub boundary: Boundary,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            bandwidth: BandwidthRule::reference(),
            boundary: Boundary::Truncate,
        }
    }
}

impl KdeConfig {
    pub fn undersmoothed() -> Self {
        Self {
            bandwidth: BandwidthRule::undersmoothed(),
            ..Self::default()
        }
    }
}

pub fn kde_fit(samples: &SampleSet, geometry: &GridGeometry, config: &KdeConfig) -> Result<GridDensity> {
    let points = samples.points();
    if points.len() < 2 {
        return Err(Error::domain(format!(
            "KDE needs at least 2 samples, got {}",
            points.len()
        )));
    }
    if let Some(z) = points.iter().find(|z| !geometry.contains(**z)) {
        return Err(Error::domain(format!(
            "sample point {z} outside grid interval [{}, {}]",
            geometry.lower(),
            geometry.upper()
        )));
    }
    let bw = config.bandwidth.bandwidth(points)?;
    let (lo, hi) = (geometry.lower(), geometry.upper());
    let mut values = vec![0.0; geometry.len()];
    for &x in points {
        add_kernel(&mut values, geometry, x, bw);
        if config.boundary == Boundary::Reflect {
            add_kernel(&mut values, geometry, 2.0 * lo - x, bw);
            add_kernel(&mut values, geometry, 2.0 * hi - x, bw);
        }
    }
    GridDensity::new(*geometry, values)
}

/// Adds an unnormalized Gaussian bump centered at `x` to the grid heights.
fn add_kernel(values: &mut [f64], geometry: &GridGeometry, x: f64, bw: f64) {
    let width = geometry.width();
    let reach = KERNEL_CUTOFF * bw;
    let to_index = |z: f64| (z - geometry.lower()) / width - 0.5;
    let first = to_index(x - reach).ceil().max(0.0);
    let last = to_index(x + reach).floor().min((values.len() - 1) as f64);
    if first > last {
        return;
    }
    for k in first as usize..=last as usize {
        let u = (geometry.midpoint(k) - x) / bw;
        values[k] += INV_SQRT_2PI * (-0.5 * u * u).exp();
    }
}

/// `T(P̃)`.
pub fn plug_in(t: &dyn Functional, ptilde: &Distribution) -> f64 {
    t.evaluate(ptilde)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub plug_in: f64,
    /// Mean of the influence terms `IF(z_i, P̃)`.
    pub correction: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub split: bool,
}

impl EstimateReport {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    /// Fixed-order two-column table.
    pub fn to_table(&self) -> String {
        let rows = [
            ("estimate", format!("{:.10}", self.estimate)),
            ("plug_in", format!("{:.10}", self.plug_in)),
            ("correction", format!("{:.10}", self.correction)),
            ("std_error", format!("{:.10}", self.std_error)),
            ("ci_low", format!("{:.10}", self.ci_low)),
            ("ci_high", format!("{:.10}", self.ci_high)),
            ("n", self.n.to_string()),
            ("split", self.split.to_string()),
        ];
        rows.iter()
            .map(|(k, v)| format!("{k:<12}{v}\n"))
            .collect()
    }
}

/// One-step estimate from a fixed `P̃` and evaluation points.
pub fn one_step(t: &dyn Functional, ptilde: &Distribution, eval_samples: &SampleSet) -> Result<EstimateReport> {
    let points = eval_samples.points();
    let n = points.len();
    if n == 0 {
        return Err(Error::domain("one-step estimate needs at least one evaluation point"));
    }
    let terms = points
        .iter()
        .map(|&z| t.influence(z, ptilde))
        .collect::<Result<Vec<_>>>()?;
    let plug = t.evaluate(ptilde);
    let correction = terms.iter().sum::<f64>() / n as f64;
    let estimate = t.one_step_value(ptilde, points, plug, correction);
    let std_error = (sample_variance(&terms) / n as f64).sqrt();
    Ok(EstimateReport {
        estimate,
        plug_in: plug,
        correction,
        std_error,
        ci_low: estimate - Z_975 * std_error,
        ci_high: estimate + Z_975 * std_error,
        n,
        split: false,
    })
}

/// Result of a split fit: the fold-A density and the fold-B estimate.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub initial: GridDensity,
    pub eval: SampleSet,
    pub report: EstimateReport,
}

/// Seeded 50/50 split: fold A is the first `n / 2` points of a seeded permutation.
pub fn split_folds(samples: &SampleSet, split_seed: u64) -> (SampleSet, SampleSet) {
    let mut points = samples.points().to_vec();
    points.shuffle(&mut rng_from_seed(split_seed));
    let eval = points.split_off(points.len() / 2);
    (
        SampleSet::new(points, samples.seed()),
        SampleSet::new(eval, samples.seed()),
    )
}

pub fn split_fit(
    t: &dyn Functional,
    samples: &SampleSet,
    geometry: &GridGeometry,
    kde: &KdeConfig,
    split_seed: u64,
) -> Result<SplitOutcome> {
    if samples.len() < 4 {
        return Err(Error::domain(format!(
            "sample splitting needs n >= 4, got {}",
            samples.len()
        )));
    }
    let (fit, eval) = split_folds(samples, split_seed);
    let initial = kde_fit(&fit, geometry, kde)?;
    let mut report = one_step(t, &Distribution::Grid(initial.clone()), &eval)?;
    report.split = true;
    Ok(SplitOutcome {
        initial,
        eval,
        report,
    })
}

/// Fits `P̃` by KDE on one half and averages influence terms over the other.
pub fn split_one_step(
    t: &dyn Functional,
    samples: &SampleSet,
    geometry: &GridGeometry,
    kde: &KdeConfig,
    split_seed: u64,
) -> Result<EstimateReport> {
    split_fit(t, samples, geometry, kde, split_seed).map(|o| o.report)
}

/// `Var_P(IF(Z, P)) / n`.
pub fn efficiency_bound(t: &dyn Functional, p: &Distribution, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("efficiency bound needs n >= 1"));
    }
    let infl = t.influence_on_support(p);
    let mean = p.expect(&infl)?;
    let sq: Vec<f64> = infl.iter().map(|v| (v - mean) * (v - mean)).collect();
    Ok(p.expect(&sq)? / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{presets, DiscreteDist};
    use crate::functional::{IntegratedSquaredDensity as Isd, Mean};

    fn unit() -> GridGeometry {
        GridGeometry::unit(4096).unwrap()
    }

    #[test]
    fn bandwidth_rules() {
        let pts = [0.1, 0.4, 0.5, 0.9];
        assert_eq!(BandwidthRule::Fixed { h: 0.2 }.bandwidth(&pts).unwrap(), 0.2);
        assert!(BandwidthRule::Fixed { h: 0.0 }.bandwidth(&pts).is_err());
        let sd = sample_variance(&pts).sqrt();
        let r = BandwidthRule::reference().bandwidth(&pts).unwrap();
        assert!((r - 1.06 * sd * 4f64.powf(-0.2)).abs() < 1e-15);
        let pivot = BandwidthRule::UNDERSMOOTH_PIVOT_N;
        let ratio = BandwidthRule::UNDERSMOOTH_C * pivot.powf(-1.0 / 3.0) / (1.06 * pivot.powf(-0.2));
        assert!((ratio - 1.0).abs() < 2e-3);
        assert!(matches!(
            BandwidthRule::reference().bandwidth(&[0.5, 0.5]),
            Err(Error::Bandwidth(_))
        ));
    }

    #[test]
    fn kde_symmetric_pair() {
        let s = SampleSet::new(vec![0.5, 0.5], 0);
        let cfg = KdeConfig {
            bandwidth: BandwidthRule::Fixed { h: 0.1 },
            boundary: Boundary::Truncate,
        };
        let g = GridGeometry::unit(1000).unwrap();
        let d = kde_fit(&s, &g, &cfg).unwrap();
        let v = d.values();
        for k in 0..500 {
            assert!((v[k] - v[999 - k]).abs() < 1e-12);
        }
        let peak = v.iter().cloned().fold(f64::MIN, f64::max);
        assert!((d.value_at(0.5).unwrap() - peak).abs() < 1e-12);
        assert!((d.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kde_rejects_bad_samples() {
        let g = unit();
        assert!(kde_fit(&SampleSet::new(vec![0.5], 0), &g, &KdeConfig::default()).is_err());
        assert!(kde_fit(&SampleSet::new(vec![0.5, 1.5], 0), &g, &KdeConfig::default()).is_err());
    }

    #[test]
    fn kde_tracks_truth_at_large_n() {
        let g = unit();
        let p = presets::beta22(g);
        let s = p.sample(100_000, 1).unwrap();
        let fit = kde_fit(&s, &g, &KdeConfig::default()).unwrap();
        let d = fit.l2_distance(&p).unwrap();
        assert!(d < 0.05, "{d}");
        let reflected = KdeConfig {
            boundary: Boundary::Reflect,
            ..KdeConfig::default()
        };
        let fit = kde_fit(&s, &g, &reflected).unwrap();
        assert!((fit.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn plug_in_values() {
        assert!((plug_in(&Isd, &presets::uniform(unit()).into()) - 1.0).abs() < 1e-12);
        let d: Distribution = DiscreteDist::indexed(vec![0.5, 0.3, 0.2]).unwrap().into();
        assert!((plug_in(&Isd, &d) - 0.38).abs() < 1e-15);
    }

    #[test]
    fn one_step_hand_values() {
        let s = SampleSet::new(vec![0.25, 0.5, 0.75], 0);
        let u: Distribution = presets::uniform(unit()).into();
        let r = one_step(&Isd, &u, &s).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-12 && r.correction.abs() < 1e-12);

        let lin: Distribution = presets::linear(unit()).into();
        let r = one_step(&Isd, &lin, &s).unwrap();
        assert!((r.estimate - 2.0 / 3.0).abs() < 1e-6, "{}", r.estimate);
        assert!((r.estimate - (r.plug_in + r.correction)).abs() < 1e-12);
        assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);

        let r = one_step(&Mean, &lin, &s).unwrap();
        assert_eq!(r.estimate, 1.5 / 3.0);
        assert!(one_step(&Mean, &lin, &SampleSet::new(vec![], 0)).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let g = GridGeometry::unit(512).unwrap();
        let s = presets::beta22(g).sample(200, 3).unwrap();
        let cfg = KdeConfig::default();
        let a = split_one_step(&Isd, &s, &g, &cfg, 9).unwrap();
        let b = split_one_step(&Isd, &s, &g, &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.split);
        assert_eq!(a.n, 100);
        let small = SampleSet::new(vec![0.1, 0.2, 0.3], 0);
        assert!(split_one_step(&Isd, &small, &g, &cfg, 0).is_err());
    }

    #[test]
    fn split_mean_is_fold_mean() {
        let g = GridGeometry::unit(512).unwrap();
        let s = presets::twobump(g).sample(301, 4).unwrap();
        let out = split_fit(&Mean, &s, &g, &KdeConfig::default(), 5).unwrap();
        let pts = out.eval.points();
        assert_eq!(pts.len(), 151);
        assert_eq!(out.report.estimate, pts.iter().sum::<f64>() / pts.len() as f64);
    }

    #[test]
    fn efficiency_bound_values() {
        assert!(efficiency_bound(&Isd, &presets::uniform(unit()).into(), 10).unwrap().abs() < 1e-20);
        let d: Distribution = DiscreteDist::indexed(vec![0.5, 0.3, 0.2]).unwrap().into();
        assert!((efficiency_bound(&Isd, &d, 1).unwrap() - 0.0624).abs() < 1e-15);
        let u: Distribution = presets::uniform(unit()).into();
        assert!((efficiency_bound(&Mean, &u, 12).unwrap() - 1.0 / 144.0).abs() < 1e-8);
    }

    #[test]
    fn report_table_order() {
        let r = EstimateReport {
            estimate: 1.0,
            plug_in: 0.9,
            correction: 0.1,
            std_error: 0.01,
            ci_low: 0.98,
            ci_high: 1.02,
            n: 10,
            split: true,
        };
        let table = r.to_table();
        let keys: Vec<&str> = table
            .lines()
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        assert_eq!(
            keys,
            ["estimate", "plug_in", "correction", "std_error", "ci_low", "ci_high", "n", "split"]
        );
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        assert_eq!(v["split"], true);
    }
}
