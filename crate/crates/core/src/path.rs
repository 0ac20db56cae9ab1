//! Mixture paths `P_ε = (1 - ε) P + ε P̃` between a target `P` and an
//! initial estimate `P̃`, and the quantities read off `v(ε) = T(P_ε)`.
//!
//! At `ε = 1` the path sits at the estimate. The tangent to `v` there,
//! extended back to `ε = 0`, hits the vertical axis at the one-step value
//! `v(1) - v'(1)`; its gap to `T(P)` is the second-order remainder.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::functional::{influence_derivative, Functional};

/// Default number of ε points on a v-curve.
pub const DEFAULT_EPS_POINTS: usize = 101;

/// Default step for the finite-difference check of `v'(1)`.
pub const DEFAULT_BOUNDARY_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Path {
    target: Distribution,
    initial: Distribution,
    distance: f64,
}

impl Path {
    pub fn new(target: Distribution, initial: Distribution) -> Result<Self> {
        let distance = target.l2_distance(&initial)?;
        Ok(Self {
            target,
            initial,
            distance,
        })
    }

    pub fn target(&self) -> &Distribution {
        &self.target
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    /// `||P - P̃||₂`.
    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn is_degenerate(&self) -> bool {
        self.distance == 0.0
    }

    /// `P_ε`.
    pub fn at(&self, eps: f64) -> Result<Distribution> {
        self.target.mix(&self.initial, eps)
    }

    /// The same path walked from `P̃` back to `P`.
    pub fn reversed(&self) -> Path {
        Path {
            target: self.initial.clone(),
            initial: self.target.clone(),
            distance: self.distance,
        }
    }
}

/// `v(ε)` on a uniform ε grid, with the matching absolute distances `Δ = ε ||P - P̃||₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VCurve {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl VCurve {
    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// CSV with columns `eps,delta,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eps", "delta", "value"])?;
        for i in 0..self.len() {
            w.write_record([
                self.eps[i].to_string(),
                self.deltas[i].to_string(),
                self.values[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `k / (n - 1)` for `k = 0..n`, with both endpoints exact.
pub fn eps_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

pub fn v_curve(path: &Path, t: &dyn Functional, grid_size: usize) -> Result<VCurve> {
    if grid_size < 3 {
        return Err(Error::domain(format!(
            "a v-curve needs at least 3 points, got {grid_size}"
        )));
    }
    let eps = eps_grid(grid_size);
    let values = eps
        .iter()
        .map(|&e| path.at(e).map(|d| t.evaluate(&d)))
        .collect::<Result<Vec<_>>>()?;
    let deltas = eps.iter().map(|e| e * path.distance()).collect();
    Ok(VCurve {
        eps,
        values,
        deltas,
    })
}

/// `v'(1) = -∫ IF(z, P̃) (p(z) - p̃(z)) dz`.
pub fn pathwise_derivative_at_one(path: &Path, t: &dyn Functional) -> Result<f64> {
    Ok(-influence_derivative(t, path.initial(), path.target())?)
}

/// Second-order one-sided difference `(3 v(1) - 4 v(1-h) + v(1-2h)) / 2h`.
///
/// Independent of the influence function; used to confirm
/// [`pathwise_derivative_at_one`].
pub fn fd_derivative_at_one(path: &Path, t: &dyn Functional, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 0.25) {
        return Err(Error::domain(format!("step {h} must lie in (0, 0.25]")));
    }
    let v = |e: f64| path.at(e).map(|d| t.evaluate(&d));
    Ok((3.0 * v(1.0)? - 4.0 * v(1.0 - h)? + v(1.0 - 2.0 * h)?) / (2.0 * h))
}

/// `T(P̃) - v'(1)`, the infinite-sample one-step value.
pub fn one_step_intercept(path: &Path, t: &dyn Functional) -> Result<f64> {
    Ok(t.evaluate(path.initial()) - pathwise_derivative_at_one(path, t)?)
}

/// `one_step_intercept - T(P)`.
pub fn exact_r2(path: &Path, t: &dyn Functional) -> Result<f64> {
    Ok(one_step_intercept(path, t)? - t.evaluate(path.target()))
}

/// Converts an absolute distance `Δ` along the path to the relative `ε = Δ / ||P - P̃||₂`.
pub fn rescale(path: &Path, delta: f64) -> Result<f64> {
    if path.is_degenerate() {
        return Err(Error::DegeneratePath(
            "P and P̃ coincide, so Δ does not determine ε".into(),
        ));
    }
    if !(0.0..=path.distance()).contains(&delta) {
        return Err(Error::domain(format!(
            "Δ = {delta} outside [0, {}]",
            path.distance()
        )));
    }
    Ok((delta / path.distance()).min(1.0))
}

/// `P_Δ^rescaled`, the point at absolute distance `Δ` from `P`.
pub fn at_distance(path: &Path, delta: f64) -> Result<Distribution> {
    path.at(rescale(path, delta)?)
}

/// Upper bound `C ||P - P̃||₂` on `|T(P̃) - T(P)|` along the path.
///
/// By the mean value theorem `T(P̃) - T(P) = ∫ IF(z, P_ε̄)(p̃ - p) dz` for some
/// `ε̄`, and Cauchy–Schwarz bounds that by `sup_ε ||IF(·, P_ε)||₂ · ||p̃ - p||₂`.
/// The supremum is taken over `eps_points` evenly spaced ε values.
pub fn plug_in_error_bound(path: &Path, t: &dyn Functional, eps_points: usize) -> Result<f64> {
    let mut c: f64 = 0.0;
    for e in eps_grid(eps_points.max(2)) {
        let pe = path.at(e)?;
        let infl = t.influence_on_support(&pe);
        let sq: Vec<f64> = infl.iter().map(|v| v * v).collect();
        c = c.max(pe.integrate(&sq)?.sqrt());
    }
    Ok(c * path.distance())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_residual: f64,
}

impl QuadraticFit {
    pub fn eval(&self, eps: f64) -> f64 {
        self.c0 + eps * (self.c1 + eps * self.c2)
    }
}

/// Least-squares `v(ε) ≈ c0 + c1 ε + c2 ε²`.
///
/// The normal equations are formed in `x = ε - 0.5` and the coefficients
/// mapped back to powers of ε afterwards.
pub fn quadratic_fit(curve: &VCurve) -> Result<QuadraticFit> {
    if curve.len() < 3 || curve.values.len() != curve.len() {
        return Err(Error::domain(format!(
            "quadratic fit needs at least 3 points, got {}",
            curve.len()
        )));
    }
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (e, v) in curve.eps.iter().zip(&curve.values) {
        let x = e - 0.5;
        let row = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * v;
        }
    }
    let [a0, a1, a2] = solve3(ata, atb)?;
    let fit = QuadraticFit {
        c0: a0 - 0.5 * a1 + 0.25 * a2,
        c1: a1 - a2,
        c2: a2,
        max_residual: 0.0,
    };
    let max_residual = curve
        .eps
        .iter()
        .zip(&curve.values)
        .map(|(e, v)| (fit.eval(*e) - v).abs())
        .fold(0.0, f64::max);
    Ok(QuadraticFit {
        max_residual,
        ..fit
    })
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Result<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::domain("singular normal equations (repeated ε values?)"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}
