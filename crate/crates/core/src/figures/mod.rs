//! Commands behind the `onestep` binary. Each writes CSV/JSON data and,
//! where there is a picture to draw, an SVG rendering of it.

pub mod config;
pub mod svg;

use std::path::{Path as FsPath, PathBuf};

use serde::Serialize;

use crate::dist::io::write_atomic;
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::estimate::KdeConfig;
use crate::functional::{isd_evaluate, Functional};
use crate::path::{eps_grid, one_step_intercept, pathwise_derivative_at_one, v_curve, Path};
use crate::rates::{default_t_grid, direction_sweep, kde_rate_sweep};
use crate::simulate::{monte_carlo, EstimatorSummary, McConfig};

pub use config::{Overrides, RunConfig};
use config::{DensitySpec, RatesMode};
use svg::{Chart, HeatmapData, Labels, Series};

/// ε values at which `cmd_path` writes whole densities.
pub const DENSITY_SNAPSHOTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Files written by a command and any non-fatal problems it skipped over.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl CommandOutput {
    fn write(&mut self, dir: &FsPath, name: &str, contents: &[u8]) -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// Per-path quantities shared by the path figures.
struct PathSummary {
    path: Path,
    curve_eps: Vec<f64>,
    values: Vec<f64>,
    derivative: f64,
    intercept: f64,
}

impl PathSummary {
    fn new(path: Path, t: &dyn Functional, eps_points: usize) -> Result<Self> {
        let curve = v_curve(&path, t, eps_points)?;
        Ok(Self {
            derivative: pathwise_derivative_at_one(&path, t)?,
            intercept: one_step_intercept(&path, t)?,
            curve_eps: curve.eps,
            values: curve.values,
            path,
        })
    }

    /// Tangent line at `ε = 1`.
    fn tangent(&self, eps: f64) -> f64 {
        self.values[self.values.len() - 1] + self.derivative * (eps - 1.0)
    }
}

/// Densities at a few ε, the v-curve with its tangent at `ε = 1`, and the
/// one-step intercept where that tangent reaches `ε = 0`.
pub fn cmd_path(cfg: &RunConfig, out_dir: &FsPath) -> Result<CommandOutput> {
    let t = cfg.functional()?;
    let target = cfg.path_target()?;
    let initials = cfg.path_initials()?;
    if initials.len() != 1 {
        return Err(Error::Config {
            line: 0,
            message: format!("path needs exactly one [path] initial density, found {}", initials.len()),
        });
    }
    let s = PathSummary::new(Path::new(target, initials[0].clone())?, t.as_ref(), cfg.path.eps_points)?;
    let mut out = CommandOutput::default();

    let support = s.path.target().support();
    let mut rows = Vec::new();
    for &eps in &DENSITY_SNAPSHOTS {
        let d = s.path.at(eps)?;
        for (z, h) in support.iter().zip(d.heights()) {
            rows.push(vec![fmt(eps), fmt(*z), fmt(*h)]);
        }
    }
    out.write(out_dir, "fig1_densities.csv", &csv_bytes(&["eps", "z", "density"], rows)?)?;

    let rows = (0..s.curve_eps.len()).map(|i| {
        let eps = s.curve_eps[i];
        vec![
            fmt(eps),
            fmt(eps * s.path.distance()),
            fmt(s.values[i]),
            fmt(s.tangent(eps)),
            fmt(s.intercept),
        ]
    });
    let header = ["eps", "delta", "value", "tangent_value", "one_step_intercept"];
    out.write(out_dir, "fig1_vcurve.csv", &csv_bytes(&header, rows)?)?;

    let series = [
        Series::line("v(eps)", s.curve_eps.iter().copied().zip(s.values.iter().copied()).collect()),
        Series::line("tangent at eps = 1", vec![(0.0, s.tangent(0.0)), (1.0, s.tangent(1.0))]),
        Series::markers("one-step intercept", vec![(0.0, s.intercept)]),
    ];
    let labels = Labels {
        title: format!("{} along the path from P (eps = 0) to P~ (eps = 1)", t.name()),
        x: "eps".into(),
        y: "T(P_eps)".into(),
    };
    out.write(out_dir, "fig1.svg", svg::render(&Chart::Line(&series), &labels)?.as_bytes())?;
    Ok(out)
}

/// Several paths into the same target, indexed by distance from it.
pub fn cmd_multipath(cfg: &RunConfig, out_dir: &FsPath) -> Result<CommandOutput> {
    let t = cfg.functional()?;
    let target = cfg.path_target()?;
    let initials = cfg.path_initials()?;
    if initials.len() < 2 {
        return Err(Error::Config {
            line: 0,
            message: format!("multipath needs at least two [path] initial densities, found {}", initials.len()),
        });
    }
    let mut out = CommandOutput::default();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut intercepts = Vec::new();
    for (id, initial) in initials.into_iter().enumerate() {
        let path = Path::new(target.clone(), initial)?;
        if path.is_degenerate() {
            out.warnings.push(format!("path {id}: initial density equals the target, skipped"));
            continue;
        }
        let s = PathSummary::new(path, t.as_ref(), cfg.path.eps_points)?;
        let d = s.path.distance();
        for (i, &eps) in s.curve_eps.iter().enumerate() {
            rows.push(vec![
                id.to_string(),
                fmt(eps * d),
                fmt(s.values[i]),
                fmt(s.tangent(eps)),
                fmt(s.intercept),
            ]);
        }
        series.push(Series::line(
            format!("path {id}"),
            s.curve_eps.iter().zip(&s.values).map(|(e, v)| (e * d, *v)).collect(),
        ));
        series.push(Series::line(
            format!("tangent {id}"),
            vec![(0.0, s.tangent(0.0)), (d, s.tangent(1.0))],
        ));
        intercepts.push((0.0, s.intercept));
    }
    if series.is_empty() {
        return Err(Error::DegeneratePath("every configured path is degenerate".into()));
    }
    series.push(Series::markers("one-step intercepts", intercepts));
    let header = ["path_id", "distance_from_P", "value", "tangent", "intercept"];
    out.write(out_dir, "fig2_curves.csv", &csv_bytes(&header, rows)?)?;
    let labels = Labels {
        title: format!("{} along paths of different lengths", t.name()),
        x: "distance from P".into(),
        y: "T".into(),
    };
    out.write(out_dir, "fig2.svg", svg::render(&Chart::Line(&series), &labels)?.as_bytes())?;
    Ok(out)
}

/// One row of the simplex surface: `T(q1, q2, 1 - q1 - q2)` for the integrated squared density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplexCell {
    pub q1: f64,
    pub q2: f64,
    pub value: f64,
}

/// The lower triangle `q1, q2 ≥ 0, q1 + q2 ≤ 1` at spacing `1 / (r - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexGrid {
    pub resolution: usize,
    pub cells: Vec<SimplexCell>,
}

impl SimplexGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::domain(format!("simplex resolution {resolution} must be at least 2")));
        }
        let steps = resolution - 1;
        let scale = steps as f64;
        let mut cells = Vec::with_capacity(resolution * (resolution + 1) / 2);
        for i in 0..=steps {
            for j in 0..=steps - i {
                // q3 is built from integers so swapping q1 and q2 is exact
                let (q1, q2, q3) = (i as f64 / scale, j as f64 / scale, (steps - i - j) as f64 / scale);
                cells.push(SimplexCell {
                    q1,
                    q2,
                    value: q1 * q1 + q2 * q2 + q3 * q3,
                });
            }
        }
        Ok(Self { resolution, cells })
    }

    pub fn min_cell(&self) -> SimplexCell {
        *self
            .cells
            .iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("a simplex grid has at least three cells")
    }
}

fn three_masses(cfg: &RunConfig, spec: &toml::Spanned<DensitySpec>) -> Result<Distribution> {
    let d = cfg.resolve(spec)?;
    if d.is_grid() || d.len() != 3 {
        return Err(Error::Unsupported(format!(
            "the simplex figure needs discrete distributions on 3 atoms, got {} support points",
            d.len()
        )));
    }
    Ok(d)
}

/// Heatmap of the integrated squared density over the 3-point simplex with
/// straight-line paths overlaid.
pub fn cmd_simplex(cfg: &RunConfig, out_dir: &FsPath) -> Result<CommandOutput> {
    if cfg.functional_name() != "isd" {
        return Err(Error::Unsupported(format!(
            "the simplex figure is drawn for isd only, not '{}'",
            cfg.functional_name()
        )));
    }
    let grid = SimplexGrid::new(cfg.simplex.resolution)?;
    let target = match &cfg.simplex.target {
        Some(spec) => three_masses(cfg, spec)?,
        None => crate::dist::DiscreteDist::indexed(vec![0.5, 0.3, 0.2])?.into(),
    };
    let initials = if cfg.simplex.initial.is_empty() {
        vec![crate::dist::DiscreteDist::indexed(vec![0.6, 0.3, 0.1])?.into()]
    } else {
        cfg.simplex
            .initial
            .iter()
            .map(|s| three_masses(cfg, s))
            .collect::<Result<Vec<_>>>()?
    };
    target.check_same_support(&initials[0])?;

    let mut out = CommandOutput::default();
    let rows = grid
        .cells
        .iter()
        .map(|c| vec![fmt(c.q1), fmt(c.q2), fmt(c.value)]);
    out.write(out_dir, "fig3_surface.csv", &csv_bytes(&["q1", "q2", "value"], rows)?)?;

    let p = target.heights();
    let mut rows = Vec::new();
    let mut overlays = Vec::new();
    for (id, q) in initials.iter().enumerate() {
        let path = Path::new(target.clone(), q.clone())?;
        let pq = q.heights();
        let planar = ((pq[0] - p[0]).powi(2) + (pq[1] - p[1]).powi(2)).sqrt();
        let mut pts = Vec::new();
        for eps in eps_grid(cfg.simplex.eps_points.max(2)) {
            let m = path.at(eps)?;
            let h = m.heights();
            rows.push(vec![
                id.to_string(),
                fmt(eps),
                fmt(h[0]),
                fmt(h[1]),
                fmt(isd_evaluate(&m)),
                fmt(eps * planar),
                fmt(eps * path.distance()),
            ]);
            pts.push((h[0], h[1]));
        }
        overlays.push(Series::line(format!("path {id}"), pts));
    }
    overlays.push(Series::markers("P", vec![(p[0], p[1])]));
    let header = ["path_id", "eps", "q1", "q2", "value", "distance_2d", "distance_l2"];
    out.write(out_dir, "fig3_paths.csv", &csv_bytes(&header, rows)?)?;

    let heat = HeatmapData {
        cells: grid.cells.iter().map(|c| (c.q1, c.q2, c.value)).collect(),
        cell: 1.0 / (grid.resolution - 1) as f64,
    };
    let labels = Labels {
        title: "sum of squared masses over the 3-point simplex".into(),
        x: "q1".into(),
        y: "q2".into(),
    };
    out.write(out_dir, "fig3.svg", svg::render(&Chart::Heatmap(&heat, &overlays), &labels)?.as_bytes())?;
    Ok(out)
}

#[derive(Debug, Serialize)]
struct SimStudySummary<'a> {
    n: usize,
    mean_distance: f64,
    efficiency_bound: f64,
    efficiency_bound_eval: f64,
    /// One-step MSE over the full-sample efficiency bound.
    mse_ratio: f64,
    /// One-step MSE over the bound at the evaluation-fold size.
    mse_ratio_eval: f64,
    plug_in: &'a EstimatorSummary,
    one_step: &'a EstimatorSummary,
}

#[derive(Debug, Serialize)]
struct SimSummary<'a> {
    functional: &'a str,
    truth: f64,
    seed: u64,
    reps: usize,
    kde: KdeConfig,
    studies: Vec<SimStudySummary<'a>>,
}

/// Monte Carlo bias, variance, MSE and coverage of the split one-step
/// estimator against its plug-in, for each configured sample size.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &FsPath) -> Result<CommandOutput> {
    let t = cfg.functional()?;
    let seed = cfg.require_seed()?;
    let kde = cfg.kde()?;
    let target = cfg.path_target()?;
    let p = target
        .as_grid()
        .ok_or_else(|| Error::Unsupported("simulation needs a grid density target".into()))?;
    if cfg.simulate.n.is_empty() {
        return Err(Error::Config {
            line: 0,
            message: "[simulate] n must list at least one sample size".into(),
        });
    }
    let studies = cfg
        .simulate
        .n
        .iter()
        .map(|&n| {
            monte_carlo(
                t.as_ref(),
                p,
                &McConfig {
                    n,
                    reps: cfg.simulate.reps,
                    seed,
                    kde,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for s in &studies {
        for e in [&s.plug_in, &s.one_step] {
            rows.push(vec![
                s.n.to_string(),
                e.estimator.clone(),
                fmt(e.mean_bias),
                fmt(e.bias_se),
                fmt(e.variance),
                fmt(e.mse),
                e.coverage.map(fmt).unwrap_or_default(),
                fmt(s.efficiency_bound),
            ]);
        }
    }
    let header = ["n", "estimator", "mean_bias", "bias_se", "variance", "mse", "coverage", "efficiency_bound"];
    let mut out = CommandOutput::default();
    out.write(out_dir, "sim_table.csv", &csv_bytes(&header, rows)?)?;

    let summary = SimSummary {
        functional: t.name(),
        truth: studies[0].truth,
        seed,
        reps: cfg.simulate.reps,
        kde,
        studies: studies
            .iter()
            .map(|s| SimStudySummary {
                n: s.n,
                mean_distance: s.mean_distance,
                efficiency_bound: s.efficiency_bound,
                efficiency_bound_eval: s.efficiency_bound_eval,
                mse_ratio: s.one_step.mse / s.efficiency_bound,
                mse_ratio_eval: s.one_step.mse / s.efficiency_bound_eval,
                plug_in: &s.plug_in,
                one_step: &s.one_step,
            })
            .collect(),
    };
    out.write(out_dir, "sim_summary.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(out)
}

/// Plug-in error and one-step bias against distance, with log-log slopes.
pub fn cmd_rates(cfg: &RunConfig, out_dir: &FsPath) -> Result<CommandOutput> {
    let t = cfg.functional()?;
    let target = cfg.path_target()?;
    let (result, param) = match cfg.rates.mode {
        RatesMode::Direction => {
            let q = match &cfg.rates.direction {
                Some(spec) => cfg.resolve(spec)?,
                None => crate::dist::presets::twobump(cfg.geometry()?).into(),
            };
            let grid = cfg.rates.t.clone().unwrap_or_else(default_t_grid);
            (direction_sweep(&target, &q, t.as_ref(), &grid)?, "t")
        }
        RatesMode::Kde => {
            let seed = cfg.require_seed()?;
            let p = target
                .as_grid()
                .ok_or_else(|| Error::Unsupported("a KDE sweep needs a grid density target".into()))?;
            let r = kde_rate_sweep(p, t.as_ref(), &cfg.rates.n, cfg.rates.reps, &cfg.kde()?, seed)?;
            (r, "n")
        }
    };
    let mut out = CommandOutput::default();
    let mut buf = Vec::new();
    result.write_csv(param, &mut buf)?;
    out.write(out_dir, "rates.csv", &buf)?;
    out.write(out_dir, "rates.json", result.summary_json()?.as_bytes())?;
    if result.degenerate_direction {
        out.warnings.push("first-order term vanishes along this direction; plug-in slope not fitted".into());
    }
    Ok(out)
}
