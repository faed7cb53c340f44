//! Subcommand implementations. Each returns its artifacts in memory and
//! writes them below the configured output directory.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use tubeflow_core::diagnostics::residual_audit;
use tubeflow_core::flow::{cmc_residual, cmc_search};
use tubeflow_core::tubegeom::bounds_report;
use tubeflow_core::{
    catalog, run, AuditContext, BoundsReport, CmcSearch, FlowOutcome, Observed, RadialProfile, ResidualReport,
    TimeSeries, Which,
};

use crate::config::{Format, RunConfig};
use crate::grid::GridSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_MONITOR: i32 = 3;

/// Exit code of a finished run: numerical failure wins over a monitor violation.
pub fn exit_code(outcome: FlowOutcome, monitors_ok: bool) -> i32 {
    if outcome == FlowOutcome::NumericalFailure {
        EXIT_NUMERICAL
    } else if !monitors_ok {
        EXIT_MONITOR
    } else {
        EXIT_OK
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub outcome: FlowOutcome,
    pub failure: Option<String>,
    pub exit_code: i32,
    pub t_final: f64,
    pub steps: u64,
    pub r_stop: f64,
    pub vol_d_drift: f64,
    pub max_area_increase: f64,
    pub cmc_residual: f64,
    pub bound63_ok: bool,
    pub bound65_ok: bool,
    pub vhat_bound_ok: bool,
    pub monitors_ok: bool,
    pub bounds: BoundsReport,
    pub observed: Observed,
    pub final_profile: RadialProfile,
    pub audits: Vec<ResidualReport>,
    pub audit_error: Option<String>,
}

pub struct RunOutput {
    pub summary: Summary,
    pub series: TimeSeries,
}

fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if series.rows.is_empty() {
        w.write_record(TimeSeries::HEADER)?;
    }
    for row in &series.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Residual audits on the first three states of the run at its own `dt`.
fn audits(cfg: &RunConfig, initial: &RadialProfile) -> (Vec<ResidualReport>, Option<String>) {
    let result = AuditContext::record(&cfg.flow_config(), initial.clone(), 0, None)
        .and_then(|ctx| Which::ALL.iter().map(|&w| residual_audit(w, &ctx)).collect());
    match result {
        Ok(list) => (list, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    }
}

/// Runs one flow and writes `timeseries.csv` and `summary.json` into `dir`.
pub fn cmd_run(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let initial = cfg.initial_profile()?;
    let report = run(&cfg.flow_config(), initial.clone())?;
    let (audits, audit_error) = audits(cfg, &initial);
    let rows = &report.series.rows;
    let monitors_ok = report.series.monitors_ok();
    let summary = Summary {
        config: cfg.clone(),
        outcome: report.outcome,
        failure: report.failure.clone(),
        exit_code: exit_code(report.outcome, monitors_ok),
        t_final: report.t_final,
        steps: report.steps,
        r_stop: report.r_stop,
        vol_d_drift: report.series.max_vol_d_drift(),
        max_area_increase: report.max_area_increase,
        cmc_residual: report.cmc_residual,
        bound63_ok: rows.iter().all(|r| r.bound63_ok),
        bound65_ok: rows.iter().all(|r| r.bound65_ok),
        vhat_bound_ok: rows.iter().all(|r| r.vhat_bound_ok),
        monitors_ok,
        bounds: report.bounds.clone(),
        observed: report.observed,
        final_profile: report.final_profile.clone(),
        audits,
        audit_error,
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if cfg.output.formats.contains(&Format::Csv) {
        write_series(&dir.join("timeseries.csv"), &report.series)?;
    }
    if cfg.output.formats.contains(&Format::Json) {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(RunOutput { summary, series: report.series })
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub i: usize,
    pub j: usize,
    pub r0: f64,
    pub amplitude: f64,
    pub rb: f64,
    pub outcome: String,
    pub exit_code: i32,
    pub t_final: f64,
    pub vol_d_drift: f64,
    pub bound63_ok: bool,
    pub bound65_ok: bool,
    pub vhat_bound_ok: bool,
    pub thmc_satisfied: bool,
    pub error: String,
}

/// Runs every grid cell into `dir/cell_<i>_<j>` on at most `threads` workers
/// (all cores when `None`). A failing cell yields a row with its error and
/// exit code 1; the other cells are unaffected.
pub fn cmd_sweep(cfg: &RunConfig, grid: &GridSpec, dir: &Path, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
    let cells = grid.cells();
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, j)| {
                let mut cell = cfg.clone();
                grid.apply(&mut cell, (i, j));
                let (r0, amplitude, rb) = (cell.init.r0, cell.init.amplitude, cell.base.rb);
                let result = cell
                    .revalidate()
                    .map_err(anyhow::Error::from)
                    .and_then(|c| cmd_run(&c, &dir.join(format!("cell_{i}_{j}"))));
                match result {
                    Ok(out) => {
                        let s = out.summary;
                        SweepRow {
                            i,
                            j,
                            r0,
                            amplitude,
                            rb,
                            outcome: serde_json::to_value(s.outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                            exit_code: s.exit_code,
                            t_final: s.t_final,
                            vol_d_drift: s.vol_d_drift,
                            bound63_ok: s.bound63_ok,
                            bound65_ok: s.bound65_ok,
                            vhat_bound_ok: s.vhat_bound_ok,
                            thmc_satisfied: s.bounds.thmc_satisfied,
                            error: s.failure.unwrap_or_default(),
                        }
                    }
                    Err(e) => SweepRow {
                        i,
                        j,
                        r0,
                        amplitude,
                        rb,
                        outcome: "error".into(),
                        exit_code: 1,
                        t_final: f64::NAN,
                        vol_d_drift: f64::NAN,
                        bound63_ok: false,
                        bound65_ok: false,
                        vhat_bound_ok: false,
                        thmc_satisfied: false,
                        error: format!("{e:#}"),
                    },
                }
            })
            .collect()
    });
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows)
}

/// Overall exit code of a sweep: 2 if any cell failed numerically, else 1 if
/// any cell could not run, else 3 on any monitor violation.
pub fn sweep_exit_code(rows: &[SweepRow]) -> i32 {
    if rows.iter().any(|r| r.exit_code == EXIT_NUMERICAL) {
        EXIT_NUMERICAL
    } else if rows.iter().any(|r| r.exit_code == 1) {
        1
    } else if rows.iter().any(|r| r.exit_code == EXIT_MONITOR) {
        EXIT_MONITOR
    } else {
        EXIT_OK
    }
}

/// Bounds on the initial profile.
pub fn cmd_bounds(cfg: &RunConfig) -> Result<BoundsReport> {
    let initial = cfg.initial_profile()?;
    Ok(bounds_report(cfg.space(), &cfg.density(), &initial, cfg.solver.sign, cfg.solver.lap)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CmcResult {
    pub hstar: f64,
    pub shoot_from: f64,
    pub found: bool,
    pub r_center: f64,
    pub end_slope: f64,
    pub residual: f64,
    pub constant: bool,
    pub profile: Option<RadialProfile>,
}

/// Shoots for a profile with mean curvature `hstar`, starting near `shoot_from`
/// (the configured `r0` by default).
pub fn cmd_cmc_search(cfg: &RunConfig, hstar: f64, shoot_from: Option<f64>) -> Result<CmcResult> {
    let opts = CmcSearch { lap_mode: cfg.solver.lap, sign_mode: cfg.solver.sign, n: cfg.solver.n, ..CmcSearch::default() };
    let from = shoot_from.unwrap_or(cfg.init.r0);
    let density = cfg.density();
    let found = cmc_search(cfg.space(), &density, cfg.base.rb, hstar, from, opts)?;
    Ok(match found {
        Some(p) => CmcResult {
            hstar,
            shoot_from: from,
            found: true,
            r_center: p.profile.r[0],
            end_slope: p.end_slope,
            residual: cmc_residual(cfg.space(), &density, &p, hstar, opts)?,
            constant: p.is_constant(1e-12),
            profile: Some(p.profile),
        },
        None => CmcResult {
            hstar,
            shoot_from: from,
            found: false,
            r_center: f64::NAN,
            end_slope: f64::NAN,
            residual: f64::NAN,
            constant: false,
            profile: None,
        },
    })
}

pub const REFINE_LEVELS: [usize; 3] = [100, 200, 400];

#[derive(Debug, Clone, Serialize)]
pub struct RefineRow {
    pub which: Which,
    pub n: usize,
    /// 0 at the flow's own step, 1 with the step halved.
    pub dt_halvings: u32,
    pub dt: f64,
    pub sup: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderRow {
    pub which: Which,
    pub norm: &'static str,
    pub values: [f64; 3],
    /// `log2(|x₁ − x₂| / |x₂ − x₃|)` over the three grid levels.
    pub order: f64,
    /// Richardson extrapolation of the norm to `h → 0`.
    pub limit: f64,
    pub non_increasing: bool,
    /// Largest relative change when the time step is halved.
    pub dt_sensitivity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineTable {
    pub rows: Vec<RefineRow>,
    pub orders: Vec<OrderRow>,
}

/// Residual audits at `N ∈ {100, 200, 400}`, each at the stable step and at
/// half of it, with the empirical order per identity and norm.
pub fn refine_table(cfg: &RunConfig) -> Result<RefineTable> {
    let mut rows = Vec::new();
    for n in REFINE_LEVELS {
        let mut level = cfg.clone();
        level.solver.n = n;
        let level = level.revalidate()?;
        let initial = level.initial_profile()?;
        let flow_cfg = level.flow_config();
        let base = AuditContext::record(&flow_cfg, initial.clone(), 0, None)?;
        let halved = AuditContext::record(&flow_cfg, initial, 0, Some(base.dt / 2.0))?;
        for (halvings, ctx) in [(0, &base), (1, &halved)] {
            for which in Which::ALL {
                let r = residual_audit(which, ctx)?;
                rows.push(RefineRow { which, n, dt_halvings: halvings, dt: r.dt, sup: r.sup, l2: r.l2 });
            }
        }
    }
    let mut orders = Vec::new();
    for which in Which::ALL {
        for norm in ["sup", "l2"] {
            let pick = |n: usize, halvings: u32| {
                let row = rows.iter().find(|r| r.which == which && r.n == n && r.dt_halvings == halvings).unwrap();
                if norm == "sup" {
                    row.sup
                } else {
                    row.l2
                }
            };
            let values = REFINE_LEVELS.map(|n| pick(n, 0));
            let (d1, d2) = (values[0] - values[1], values[1] - values[2]);
            let order = (d1.abs() / d2.abs()).log2();
            let ratio = 2f64.powf(order);
            let limit = if order.is_finite() && ratio > 1.0 { values[2] - d2 / (ratio - 1.0) } else { values[2] };
            let dt_sensitivity = REFINE_LEVELS
                .iter()
                .map(|&n| ((pick(n, 1) - pick(n, 0)) / pick(n, 0).abs().max(f64::MIN_POSITIVE)).abs())
                .fold(0.0, f64::max);
            orders.push(OrderRow {
                which,
                norm,
                values,
                order,
                limit,
                non_increasing: values[1] <= values[0] && values[2] <= values[1],
                dt_sensitivity,
            });
        }
    }
    Ok(RefineTable { rows, orders })
}

/// Writes `refine.csv` (one line per audit) and `refine.json` into `dir`.
pub fn cmd_refine(cfg: &RunConfig, dir: &Path) -> Result<RefineTable> {
    let table = refine_table(cfg)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = csv::Writer::from_path(dir.join("refine.csv"))?;
    for row in &table.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    write_json(&dir.join("refine.json"), &table)?;
    Ok(table)
}

/// Human-readable order table.
pub fn format_refine(table: &RefineTable) -> String {
    let mut out = String::from("which,norm,n100,n200,n400,order,limit,non_increasing,dt_sensitivity\n");
    for o in &table.orders {
        let which = serde_json::to_value(o.which).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        out.push_str(&format!(
            "{which},{},{:.9e},{:.9e},{:.9e},{:.3},{:.9e},{},{:.3e}\n",
            o.norm, o.values[0], o.values[1], o.values[2], o.order, o.limit, o.non_increasing, o.dt_sensitivity
        ));
    }
    out
}

/// The catalog as CSV: `name,epsilon,b_default,mv1,mv2,mh,k0`.
pub fn catalog_csv() -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "epsilon", "b_default", "mv1", "mv2", "mh", "k0"])?;
    for e in catalog() {
        let p = &e.params;
        w.write_record([
            e.name.clone(),
            format!("{}", p.epsilon() as i32),
            format!("{}", e.b_default),
            p.mv[0].to_string(),
            p.mv[1].to_string(),
            p.m_h().to_string(),
            format!("{}", p.k0),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Flat JSON object of a bounds report; non-finite entries become `null`.
pub fn bounds_json(report: &BoundsReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}
