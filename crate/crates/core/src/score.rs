//! Score-based view of the influence function on mixture likelihood paths,
//! and the coordinate-wise chain rule for discrete distributions.
//!
//! Along `W_e = G + e (Q - G)` the score at `e = 0` is `s₀ = (q - g) / g`,
//! so `E_G[IF · s₀] = ∫ IF (q - g) dz`: any function that reproduces
//! derivatives through the score also reproduces the Gâteaux derivative.

use serde::{Deserialize, Serialize};

use crate::dist::{DiscreteDist, Distribution};
use crate::error::{Error, Result};
use crate::functional::{gateaux_fd, Functional, DEFAULT_FD_STEP};

/// Denominator floor for `s₀`.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-12;

/// Largest mass (under either distribution) allowed on floored points.
pub const MAX_FLAGGED_MASS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub values: Vec<f64>,
    /// Support indices where `g` fell below the floor.
    pub flagged: Vec<usize>,
}

/// `s₀(z) = (q(z) - g(z)) / max(g(z), floor)` on the support.
pub fn score_at_zero(g: &Distribution, q: &Distribution, floor: f64) -> Result<Score> {
    g.check_same_support(q)?;
    let mut flagged = Vec::new();
    let values = g
        .heights()
        .iter()
        .zip(q.heights())
        .enumerate()
        .map(|(k, (gv, qv))| {
            if *gv < floor {
                flagged.push(k);
            }
            (qv - gv) / gv.max(floor)
        })
        .collect();
    Ok(Score { values, flagged })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorePathCheck {
    pub functional: String,
    pub g: Distribution,
    pub q: Distribution,
    pub score0: Vec<f64>,
    pub flagged_mass: f64,
    /// Finite-difference derivative of `T(W_e)` at `e = 0`.
    pub lhs: f64,
    /// `∫ IF(z, G) s₀(z) g(z) dz`.
    pub rhs: f64,
    pub residual: f64,
}

pub fn score_identity_check(t: &dyn Functional, g: &Distribution, q: &Distribution) -> Result<ScorePathCheck> {
    let score = score_at_zero(g, q, DEFAULT_DENSITY_FLOOR)?;
    let w = g.cell_weight();
    let flagged_mass: f64 = score
        .flagged
        .iter()
        .map(|&k| w * g.heights()[k].max(q.heights()[k]))
        .sum();
    if flagged_mass > MAX_FLAGGED_MASS {
        return Err(Error::Support(format!(
            "{flagged_mass:e} of mass sits where g < {DEFAULT_DENSITY_FLOOR:e}"
        )));
    }
    let infl = t.influence_on_support(g);
    let weighted: Vec<f64> = infl
        .iter()
        .zip(&score.values)
        .map(|(i, s)| i * s)
        .collect();
    let rhs = g.expect(&weighted)?;
    let lhs = gateaux_fd(t, g, q, DEFAULT_FD_STEP)?;
    Ok(ScorePathCheck {
        functional: t.name().to_string(),
        g: g.clone(),
        q: q.clone(),
        score0: score.values,
        flagged_mass,
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// `Σ_k ∂T/∂p_k |_{P̃} · (p̃_k - p_k)`, the derivative of `T(P_ε)` at `ε = 1`
/// taken coordinate-wise in the mass vector.
///
/// The partials treat each mass as a free coordinate, which is off the
/// simplex; the sum only has meaning because `Σ (p̃_k - p_k) = 0` removes
/// any constant shift in the partials.
pub fn discrete_chain_rule_derivative(p: &DiscreteDist, ptilde: &DiscreteDist, t: &dyn Functional) -> Result<f64> {
    p.check_same_atoms(ptilde)?;
    let partials = t.mass_partials(ptilde).ok_or_else(|| {
        Error::Unsupported(format!("functional '{}' has no closed-form mass partials", t.name()))
    })?;
    Ok(partials
        .iter()
        .zip(ptilde.masses().iter().zip(p.masses()))
        .map(|(d, (pt, pp))| d * (pt - pp))
        .sum())
}
