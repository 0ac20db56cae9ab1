//! Run configuration: a TOML file (`key = value` lines grouped in
//! `[sections]`) plus command-line overrides.
//!
//! ```toml
//! functional = "isd"
//! seed = 2024
//!
//! [grid]
//! m = 4096
//!
//! [path]
//! target = "beta22"
//! initial = ["linear", "mix(beta22, uniform, 1/3)", "data/q.csv"]
//!
//! [simplex]
//! target = [0.5, 0.3, 0.2]
//! initial = [[0.6, 0.3, 0.1]]
//! ```
//!
//! A density is a preset name, a CSV/JSON file (relative to the config
//! file), `mix(A, B, w)` for `(1 - w) A + w B`, or an inline mass vector
//! on atoms `0, 1, ..., K-1`.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::dist::{io, presets, DiscreteDist, Distribution, GridGeometry, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::estimate::{BandwidthRule, Boundary, KdeConfig};
use crate::functional::{functional_by_name, Functional};
use crate::path::DEFAULT_EPS_POINTS;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ONESTEP_OUT";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    Masses(Vec<f64>),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub m: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            m: DEFAULT_GRID_SIZE,
            lower: 0.0,
            upper: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSection {
    pub target: Option<Spanned<DensitySpec>>,
    pub initial: Vec<Spanned<DensitySpec>>,
    pub eps_points: usize,
}

impl Default for PathSection {
    fn default() -> Self {
        Self {
            target: None,
            initial: Vec::new(),
            eps_points: DEFAULT_EPS_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthKind {
    Reference,
    Undersmoothed,
    Fixed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KdeSection {
    pub bandwidth: BandwidthKind,
    /// Constant for the data-driven rules.
    pub c: Option<f64>,
    /// Bandwidth for the fixed rule.
    pub h: Option<f64>,
    pub boundary: Boundary,
}

impl Default for KdeSection {
    fn default() -> Self {
        Self {
            bandwidth: BandwidthKind::Reference,
            c: None,
            h: None,
            boundary: Boundary::Truncate,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n: Vec<usize>,
    pub reps: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n: vec![2000],
            reps: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatesMode {
    Direction,
    Kde,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub mode: RatesMode,
    pub direction: Option<Spanned<DensitySpec>>,
    pub t: Option<Vec<f64>>,
    pub n: Vec<usize>,
    pub reps: usize,
}

impl Default for RatesSection {
    fn default() -> Self {
        Self {
            mode: RatesMode::Direction,
            direction: None,
            t: None,
            n: vec![250, 500, 1000, 2000, 4000],
            reps: 50,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimplexSection {
    pub resolution: usize,
    pub target: Option<Spanned<DensitySpec>>,
    pub initial: Vec<Spanned<DensitySpec>>,
    pub eps_points: usize,
}

impl Default for SimplexSection {
    fn default() -> Self {
        Self {
            resolution: 201,
            target: None,
            initial: Vec::new(),
            eps_points: 21,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub functional: Option<Spanned<String>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid: GridSection,
    pub path: PathSection,
    pub kde: KdeSection,
    pub simulate: SimulateSection,
    pub rates: RatesSection,
    pub simplex: SimplexSection,
    #[serde(skip)]
    source: String,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Values given on the command line; each replaces its config key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub functional: Option<String>,
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.source = text.to_string();
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = Some(seed);
        }
        if let Some(out) = &overrides.out {
            self.out = Some(out.clone());
        }
        if let Some(name) = &overrides.functional {
            self.functional = Some(Spanned::new(0..0, name.clone()));
        }
    }

    fn error_at(&self, span: Range<usize>, message: impl Into<String>) -> Error {
        Error::Config {
            line: if span.is_empty() { 0 } else { line_of(&self.source, span.start) },
            message: message.into(),
        }
    }

    pub fn functional_name(&self) -> &str {
        self.functional.as_ref().map_or("isd", |f| f.get_ref().as_str())
    }

    pub fn functional(&self) -> Result<Box<dyn Functional>> {
        match &self.functional {
            None => functional_by_name("isd"),
            Some(f) => functional_by_name(f.get_ref()).map_err(|e| self.error_at(f.span(), e.to_string())),
        }
    }

    /// The seed, which stochastic commands must be given explicitly.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config {
            line: 0,
            message: "this command is stochastic: pass --seed or set `seed`".into(),
        })
    }

    /// `--out`, then the `out` key, then `$ONESTEP_OUT`, then the working directory.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.grid.lower, self.grid.upper, self.grid.m).map_err(|e| Error::Config {
            line: 0,
            message: format!("[grid]: {e}"),
        })
    }

    pub fn kde(&self) -> Result<KdeConfig> {
        let k = &self.kde;
        let bandwidth = match k.bandwidth {
            BandwidthKind::Reference => BandwidthRule::Reference {
                c: k.c.unwrap_or(BandwidthRule::DEFAULT_C),
            },
            BandwidthKind::Undersmoothed => BandwidthRule::Undersmoothed {
                c: k.c.unwrap_or(BandwidthRule::UNDERSMOOTH_C),
            },
            BandwidthKind::Fixed => BandwidthRule::Fixed {
                h: k.h.ok_or_else(|| Error::Config {
                    line: 0,
                    message: "[kde]: bandwidth = \"fixed\" needs h".into(),
                })?,
            },
        };
        Ok(KdeConfig {
            bandwidth,
            boundary: k.boundary,
        })
    }

    /// Resolves a density, reporting failures at the line where it was written.
    pub fn resolve(&self, spec: &Spanned<DensitySpec>) -> Result<Distribution> {
        let geometry = self.geometry()?;
        let resolved = match spec.get_ref() {
            DensitySpec::Masses(m) => DiscreteDist::indexed(m.clone()).map(Into::into),
            DensitySpec::Text(text) => self.resolve_text(text.trim(), geometry),
        };
        resolved.map_err(|e| match e {
            Error::Config { .. } => e,
            other => self.error_at(spec.span(), other.to_string()),
        })
    }

    fn resolve_text(&self, text: &str, geometry: GridGeometry) -> Result<Distribution> {
        if let Some(inner) = text.strip_prefix("mix(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("expected mix(A, B, w), got '{text}'")));
            }
            let a = self.resolve_atom(parts[0], geometry)?;
            let b = self.resolve_atom(parts[1], geometry)?;
            return a.mix(&b, parse_weight(parts[2])?);
        }
        self.resolve_atom(text, geometry)
    }

    fn resolve_atom(&self, text: &str, geometry: GridGeometry) -> Result<Distribution> {
        if presets::NAMES.contains(&text) {
            return presets::by_name(text, geometry).map(Into::into);
        }
        let lower = text.to_ascii_lowercase();
        if lower.ends_with(".csv") || lower.ends_with(".json") {
            return io::load(&self.base_dir.join(text));
        }
        Err(Error::Parse(format!(
            "'{text}' is neither a preset ({}) nor a .csv/.json file",
            presets::NAMES.join(", ")
        )))
    }

    /// `[path] target`, defaulting to the beta22 preset.
    pub fn path_target(&self) -> Result<Distribution> {
        match &self.path.target {
            Some(spec) => self.resolve(spec),
            None => Ok(presets::beta22(self.geometry()?).into()),
        }
    }

    pub fn path_initials(&self) -> Result<Vec<Distribution>> {
        self.path.initial.iter().map(|s| self.resolve(s)).collect()
    }
}

/// A decimal or a fraction `a/b`.
fn parse_weight(text: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("mixing weight '{text}' is not a number"));
    match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => text.parse().map_err(|_| bad()),
    }
}
