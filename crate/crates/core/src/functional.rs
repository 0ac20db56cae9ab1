//! Statistical functionals `T(P)` paired with their influence functions.
//!
//! An influence function `IF(z, G)` satisfies
//!
//! ```text
//! d/dε T(G + ε(Q - G)) |ε=0  =  ∫ IF(z, G) (q(z) - g(z)) dz,      ∫ IF(z, G) g(z) dz = 0
//! ```
//!
//! for every `Q`. [`gateaux_fd`] evaluates the left side by central
//! differences and is the independent check for each analytic `IF`.

use crate::dist::{DiscreteDist, Distribution};
use crate::error::{Error, Result};

/// Default step for [`gateaux_fd`].
pub const DEFAULT_FD_STEP: f64 = 1e-4;

pub trait Functional: Send + Sync {
    fn name(&self) -> &str;

    /// `T(P)`. Accepts signed perturbations produced by [`Distribution::perturb`].
    fn evaluate(&self, dist: &Distribution) -> f64;

    /// `IF(z, G)` at an arbitrary point of the support.
    fn influence(&self, z: f64, g: &Distribution) -> Result<f64>;

    /// `IF(·, G)` at every support point (cell midpoints or atoms).
    fn influence_on_support(&self, g: &Distribution) -> Vec<f64>;

    /// Raw partial derivatives `∂T/∂p_k` of the functional viewed as a
    /// function of the mass vector, when it has a closed form.
    fn mass_partials(&self, _dist: &DiscreteDist) -> Option<Vec<f64>> {
        None
    }

    /// Combines `plug_in = T(G)` and `correction = mean IF(z_i, G)` into the
    /// one-step value. Functionals whose influence terms cancel `T(G)`
    /// algebraically may return the cancelled form instead.
    fn one_step_value(&self, _g: &Distribution, _points: &[f64], plug_in: f64, correction: f64) -> f64 {
        plug_in + correction
    }
}

/// `T(P) = ∫ p(z)² dz` (grid) or `Σ p_k²` (discrete), with `IF(z, G) = 2 (g(z) - T(G))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegratedSquaredDensity;

/// `T(P) = E_P[Z]`, with `IF(z, G) = z - E_G[Z]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Mean;

impl Functional for IntegratedSquaredDensity {
    fn name(&self) -> &str {
        "isd"
    }

    fn evaluate(&self, dist: &Distribution) -> f64 {
        dist.cell_weight() * dist.heights().iter().map(|v| v * v).sum::<f64>()
    }

    fn influence(&self, z: f64, g: &Distribution) -> Result<f64> {
        Ok(2.0 * (g.height_at(z)? - self.evaluate(g)))
    }

    fn influence_on_support(&self, g: &Distribution) -> Vec<f64> {
        let t = self.evaluate(g);
        g.heights().iter().map(|v| 2.0 * (v - t)).collect()
    }

    fn mass_partials(&self, dist: &DiscreteDist) -> Option<Vec<f64>> {
        Some(dist.masses().iter().map(|p| 2.0 * p).collect())
    }
}

impl Functional for Mean {
    fn name(&self) -> &str {
        "mean"
    }

    fn evaluate(&self, dist: &Distribution) -> f64 {
        let support = dist.support();
        dist.cell_weight()
            * dist
                .heights()
                .iter()
                .zip(&support)
                .map(|(v, z)| v * z)
                .sum::<f64>()
    }

    fn influence(&self, z: f64, g: &Distribution) -> Result<f64> {
        check_in_support(z, g)?;
        Ok(z - self.evaluate(g))
    }

    fn influence_on_support(&self, g: &Distribution) -> Vec<f64> {
        let t = self.evaluate(g);
        g.support().into_iter().map(|z| z - t).collect()
    }

    fn mass_partials(&self, dist: &DiscreteDist) -> Option<Vec<f64>> {
        Some(dist.atoms().to_vec())
    }

    /// `E_G[Z] + mean(z_i - E_G[Z])` is the sample mean whatever `G` is.
    fn one_step_value(&self, _g: &Distribution, points: &[f64], _plug_in: f64, _correction: f64) -> f64 {
        points.iter().sum::<f64>() / points.len() as f64
    }
}

fn check_in_support(z: f64, g: &Distribution) -> Result<()> {
    match g {
        Distribution::Grid(d) if !d.geometry().contains(z) => Err(Error::domain(format!(
            "point {z} outside grid interval [{}, {}]",
            d.geometry().lower(),
            d.geometry().upper()
        ))),
        Distribution::Discrete(d) => d.index_of(z).map(|_| ()),
        _ => Ok(()),
    }
}

pub const FUNCTIONAL_NAMES: [&str; 2] = ["isd", "mean"];

/// Looks up a shipped functional by name.
pub fn functional_by_name(name: &str) -> Result<Box<dyn Functional>> {
    match name {
        "isd" => Ok(Box::new(IntegratedSquaredDensity)),
        "mean" => Ok(Box::new(Mean)),
        other => Err(Error::domain(format!(
            "unknown functional '{other}' (known: {})",
            FUNCTIONAL_NAMES.join(", ")
        ))),
    }
}

pub fn isd_evaluate(p: &Distribution) -> f64 {
    IntegratedSquaredDensity.evaluate(p)
}

pub fn isd_influence(z: f64, g: &Distribution) -> Result<f64> {
    IntegratedSquaredDensity.influence(z, g)
}

pub fn mean_evaluate(p: &Distribution) -> f64 {
    Mean.evaluate(p)
}

pub fn mean_influence(z: f64, g: &Distribution) -> Result<f64> {
    Mean.influence(z, g)
}

/// Central-difference directional derivative of `T` at `G` toward `Q`.
pub fn gateaux_fd(t: &dyn Functional, g: &Distribution, q: &Distribution, h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::domain(format!("step {h} must lie in (0, 0.5)")));
    }
    let plus = t.evaluate(&g.perturb(q, h)?);
    let minus = t.evaluate(&g.perturb(q, -h)?);
    Ok((plus - minus) / (2.0 * h))
}

/// `∫ IF(z, G) (q(z) - g(z)) dz`, the analytic Gâteaux derivative.
pub fn influence_derivative(t: &dyn Functional, g: &Distribution, q: &Distribution) -> Result<f64> {
    g.check_same_support(q)?;
    let infl = t.influence_on_support(g);
    let integrand: Vec<f64> = infl
        .iter()
        .zip(q.heights().iter().zip(g.heights()))
        .map(|(i, (qv, gv))| i * (qv - gv))
        .collect();
    g.integrate(&integrand)
}

/// `∫ IF(z, G) g(z) dz`, zero for a correctly centered influence function.
pub fn influence_centering_residual(t: &dyn Functional, g: &Distribution) -> f64 {
    g.expect(&t.influence_on_support(g))
        .expect("influence_on_support matches the support length")
}
