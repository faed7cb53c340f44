//! Time integration of the radial volume-preserving flow
//! `∂r/∂t = √(sc² + r'²)/sc · (H̄ − H)`, Lagrangian markers and the search for
//! constant-mean-curvature profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TubeError};
use crate::profile::{interp_cubic, BaseDensity, BaseGrid, LapMode, RadialProfile};
use crate::symspace::{Curvature, SpaceParams};
use crate::tubegeom::{
    eval_point, geometry_on, vol_d_on, BoundsContext, BoundsReport, Observed, PointData,
    ProfileGeometry, SignMode,
};

/// Monitors are checked with this slack.
pub const MONITOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub space: SpaceParams,
    pub density: BaseDensity,
    pub lap_mode: LapMode,
    pub sign_mode: SignMode,
    pub scheme: Scheme,
    pub cfl: f64,
    pub t_max: f64,
    /// Defaults to `10⁻³·r̂₁` when absent.
    pub r_stop: Option<f64>,
    pub tol_cmc: f64,
    /// Record a time-series row every `stride` steps.
    pub stride: usize,
}

impl FlowConfig {
    pub fn new(space: SpaceParams, density: BaseDensity) -> Self {
        FlowConfig {
            space,
            density,
            lap_mode: LapMode::default(),
            sign_mode: SignMode::default(),
            scheme: Scheme::default(),
            cfl: 0.2,
            t_max: 1.0,
            r_stop: None,
            tol_cmc: 1e-8,
            stride: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if !self.space.is_invariant_mode() {
            return Err(TubeError::InvalidSpace(
                "the radial flow needs K = {1} and k0 = 1".into(),
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(TubeError::Config(format!("cfl must lie in (0, 0.5], got {}", self.cfl)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(TubeError::Config(format!("t_max must be finite and >= 0, got {}", self.t_max)));
        }
        if let Some(r_stop) = self.r_stop {
            if !(r_stop > 0.0) {
                return Err(TubeError::Config(format!("r_stop must be positive, got {r_stop}")));
            }
        }
        if !(self.tol_cmc > 0.0) {
            return Err(TubeError::Config(format!("tol_cmc must be positive, got {}", self.tol_cmc)));
        }
        if self.stride == 0 {
            return Err(TubeError::Config("stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Right-hand side of the flow on one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub drdt: Vec<f64>,
    pub hbar: f64,
    pub mean_curvature: Vec<f64>,
}

pub fn rhs(config: &FlowConfig, profile: &RadialProfile) -> Result<Rhs> {
    let grid = BaseGrid::for_profile(&config.space, &config.density, profile);
    let geom = geometry_on(&config.space, &grid, &profile.r, config.sign_mode, config.lap_mode)?;
    Ok(Rhs { drdt: geom.velocity(), hbar: geom.hbar, mean_curvature: geom.mean_curvature })
}

/// Snapshot of a flow at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowState {
    pub profile: RadialProfile,
    pub t: f64,
    pub hbar: f64,
    pub vol_d: f64,
    pub vol_m: f64,
}

/// Lagrangian marker: base position `z = c(ξ, t)` and the tracked radius `r̂(ξ, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub z: f64,
    pub rhat: f64,
    /// Set when the marker had to be clamped back into `[0, r_B]`.
    pub clamped: bool,
}

impl Marker {
    pub fn new(z: f64, rhat: f64) -> Self {
        Marker { z, rhat, clamped: false }
    }
}

/// `(dz/dt, dr̂/dt)` of a marker in the frozen fields of `geom`.
fn marker_velocity(space: &SpaceParams, grid: &BaseGrid, r: &[f64], geom: &ProfileGeometry, z: f64) -> (f64, f64) {
    let h = grid.h;
    let rz = interp_cubic(r, h, z, false);
    let rp = interp_cubic(&geom.rp, h, z, true);
    let hz = interp_cubic(&geom.mean_curvature, h, z, false);
    let c0 = space.sc(space.k0 * space.b * rz);
    let sq = (c0 * c0 + rp * rp).sqrt();
    let diff = hz - geom.hbar;
    (diff * rp / (c0 * sq), -diff * c0 / sq)
}

fn clamp_marker(m: &mut Marker, rb: f64) {
    if m.z < 0.0 || m.z > rb {
        m.z = m.z.clamp(0.0, rb);
        m.clamped = true;
    }
}

/// A running flow: the current profile plus cached geometry.
#[derive(Debug, Clone)]
pub struct Flow {
    config: FlowConfig,
    grid: BaseGrid,
    r: Vec<f64>,
    t: f64,
    geom: ProfileGeometry,
    steps: u64,
}

impl Flow {
    pub fn new(config: FlowConfig, initial: RadialProfile) -> Result<Self> {
        config.validate()?;
        initial.check_range(&config.space)?;
        let grid = BaseGrid::for_profile(&config.space, &config.density, &initial);
        let geom = geometry_on(&config.space, &grid, &initial.r, config.sign_mode, config.lap_mode)?;
        Ok(Flow { config, grid, r: initial.r, t: 0.0, geom, steps: 0 })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn grid(&self) -> &BaseGrid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn profile(&self) -> RadialProfile {
        RadialProfile { rb: self.grid.rb, r: self.r.clone() }
    }

    /// Geometry of the current profile.
    pub fn geometry(&self) -> &ProfileGeometry {
        &self.geom
    }

    pub fn vol_m(&self) -> f64 {
        self.geom.vol_m(&self.config.space)
    }

    pub fn vol_d(&self) -> Result<f64> {
        vol_d_on(&self.config.space, &self.grid, &self.r)
    }

    pub fn state(&self) -> Result<FlowState> {
        Ok(FlowState {
            profile: self.profile(),
            t: self.t,
            hbar: self.geom.hbar,
            vol_d: self.vol_d()?,
            vol_m: self.vol_m(),
        })
    }

    /// Stable step size. The diffusion coefficient of the evolution is at most
    /// `1/sc(br)²`; in full mode the pole stencil is `(1 + m)` times stiffer.
    /// Near a pinch the reaction term `m^V/r` sets an accuracy limit.
    pub fn dt(&self) -> f64 {
        let space = &self.config.space;
        let h = self.grid.h;
        let mut min_sc2 = f64::INFINITY;
        let mut min_r = f64::INFINITY;
        for &r in &self.r {
            min_sc2 = min_sc2.min(space.sc(space.b * r).powi(2));
            min_r = min_r.min(r);
        }
        let stiffness = match self.config.lap_mode {
            LapMode::Paper61 => 1.0,
            LapMode::Full => 1.0 + 0.5 * self.grid.m_total as f64,
        };
        let diffusive = self.config.cfl * h * h * min_sc2 / stiffness;
        let reactive = self.config.cfl * min_r * min_r / space.m_v() as f64;
        diffusive.min(reactive)
    }

    fn geometry_of(&self, r: &[f64]) -> Result<ProfileGeometry> {
        check_radii(&self.config.space, r, self.t)?;
        geometry_on(&self.config.space, &self.grid, r, self.config.sign_mode, self.config.lap_mode)
    }

    /// Advances by the stable step size and returns it.
    pub fn step(&mut self) -> Result<f64> {
        let dt = self.dt();
        self.step_with_dt(dt)?;
        Ok(dt)
    }

    pub fn step_with_dt(&mut self, dt: f64) -> Result<()> {
        self.step_with_markers(dt, &mut [])
    }

    /// One step of the configured scheme, advecting `markers` with the same
    /// stages as the profile.
    pub fn step_with_markers(&mut self, dt: f64, markers: &mut [Marker]) -> Result<()> {
        let space = self.config.space.clone();
        let rb = self.grid.rb;
        let n = self.r.len();
        let vel = |flow: &Flow, r: &[f64], geom: &ProfileGeometry, ms: &[Marker]| -> Vec<(f64, f64)> {
            ms.iter().map(|m| marker_velocity(&space, &flow.grid, r, geom, m.z.clamp(0.0, rb))).collect()
        };
        let shift = |r: &[f64], k: &[f64], a: f64| -> Vec<f64> {
            r.iter().zip(k).map(|(ri, ki)| ri + a * ki).collect()
        };
        let shift_m = |ms: &[Marker], k: &[(f64, f64)], a: f64| -> Vec<Marker> {
            ms.iter()
                .zip(k)
                .map(|(m, (dz, dr))| Marker { z: m.z + a * dz, rhat: m.rhat + a * dr, clamped: m.clamped })
                .collect()
        };
        let k1 = self.geom.velocity();
        let m1 = vel(self, &self.r, &self.geom, markers);
        let (new_r, new_m) = match self.config.scheme {
            Scheme::Euler => (shift(&self.r, &k1, dt), shift_m(markers, &m1, dt)),
            Scheme::Rk4 => {
                let r2 = shift(&self.r, &k1, 0.5 * dt);
                let g2 = self.geometry_of(&r2)?;
                let k2 = g2.velocity();
                let ms2 = shift_m(markers, &m1, 0.5 * dt);
                let m2 = vel(self, &r2, &g2, &ms2);

                let r3 = shift(&self.r, &k2, 0.5 * dt);
                let g3 = self.geometry_of(&r3)?;
                let k3 = g3.velocity();
                let ms3 = shift_m(markers, &m2, 0.5 * dt);
                let m3 = vel(self, &r3, &g3, &ms3);

                let r4 = shift(&self.r, &k3, dt);
                let g4 = self.geometry_of(&r4)?;
                let k4 = g4.velocity();
                let ms4 = shift_m(markers, &m3, dt);
                let m4 = vel(self, &r4, &g4, &ms4);

                let r_new: Vec<f64> = (0..n)
                    .map(|i| self.r[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect();
                let m_new: Vec<Marker> = markers
                    .iter()
                    .enumerate()
                    .map(|(j, m)| Marker {
                        z: m.z + dt / 6.0 * (m1[j].0 + 2.0 * m2[j].0 + 2.0 * m3[j].0 + m4[j].0),
                        rhat: m.rhat + dt / 6.0 * (m1[j].1 + 2.0 * m2[j].1 + 2.0 * m3[j].1 + m4[j].1),
                        clamped: m.clamped,
                    })
                    .collect();
                (r_new, m_new)
            }
        };
        let t_new = self.t + dt;
        check_radii(&self.config.space, &new_r, t_new)?;
        let geom = geometry_on(&space, &self.grid, &new_r, self.config.sign_mode, self.config.lap_mode)
            .map_err(|e| TubeError::Numerical { t: t_new, reason: e.to_string() })?;
        if !geom.hbar.is_finite() {
            return Err(TubeError::Numerical { t: t_new, reason: "non-finite average mean curvature".into() });
        }
        self.r = new_r;
        self.geom = geom;
        self.t = t_new;
        self.steps += 1;
        for (m, mut nm) in markers.iter_mut().zip(new_m) {
            clamp_marker(&mut nm, rb);
            *m = nm;
        }
        Ok(())
    }
}

fn check_radii(space: &SpaceParams, r: &[f64], t: f64) -> Result<()> {
    let focal = space.focal_radius();
    for &ri in r {
        if !ri.is_finite() {
            return Err(TubeError::Numerical { t, reason: "non-finite radius".into() });
        }
        if ri <= 0.0 {
            return Err(TubeError::Numerical { t, reason: format!("radius {ri} lost positivity") });
        }
        if ri >= focal {
            return Err(TubeError::Numerical { t, reason: format!("radius {ri} reached the focal radius {focal}") });
        }
    }
    Ok(())
}

/// Advances a single marker by `dt` in the frozen fields of the flow's
/// current state (classical four-stage rule in `z`).
pub fn marker_step(flow: &Flow, marker: &Marker, dt: f64) -> Marker {
    let space = &flow.config.space;
    let rb = flow.grid.rb;
    let v = |z: f64| marker_velocity(space, &flow.grid, &flow.r, &flow.geom, z.clamp(0.0, rb));
    let (a1, b1) = v(marker.z);
    let (a2, b2) = v(marker.z + 0.5 * dt * a1);
    let (a3, b3) = v(marker.z + 0.5 * dt * a2);
    let (a4, b4) = v(marker.z + dt * a3);
    let mut out = Marker {
        z: marker.z + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        rhat: marker.rhat + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        clamped: marker.clamped,
    };
    clamp_marker(&mut out, rb);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowOutcome {
    ReachedCore,
    #[serde(rename = "converged_cmc")]
    ConvergedCMC,
    MaxTimeReached,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub hbar: f64,
    pub vol_d: f64,
    pub vol_m: f64,
    pub vhat_max: f64,
    pub bound63_ok: bool,
    pub bound65_ok: bool,
    pub vhat_bound_ok: bool,
}

impl TimeSeriesRow {
    pub fn monitors_ok(&self) -> bool {
        self.bound63_ok && self.bound65_ok && self.vhat_bound_ok
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub rows: Vec<TimeSeriesRow>,
}

impl TimeSeries {
    pub const HEADER: [&'static str; 10] = [
        "t", "r_min", "r_max", "hbar", "vol_d", "vol_m", "vhat_max", "bound63_ok", "bound65_ok",
        "vhat_bound_ok",
    ];

    pub fn max_vol_d_drift(&self) -> f64 {
        let Some(first) = self.rows.first() else { return 0.0 };
        self.rows.iter().map(|r| ((r.vol_d - first.vol_d) / first.vol_d).abs()).fold(0.0, f64::max)
    }

    pub fn monitors_ok(&self) -> bool {
        self.rows.iter().all(TimeSeriesRow::monitors_ok)
    }
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: FlowOutcome,
    pub series: TimeSeries,
    pub final_profile: RadialProfile,
    pub t_final: f64,
    pub steps: u64,
    pub bounds: BoundsReport,
    pub bounds_context: BoundsContext,
    pub observed: Observed,
    pub r_stop: f64,
    /// Final `max|H − H̄|`.
    pub cmc_residual: f64,
    /// Largest per-step relative increase of `Vol(M)`, 0 when monotone.
    pub max_area_increase: f64,
    pub failure: Option<String>,
}

/// Per-row monitor evaluation against the run-invariant bounds.
struct Monitor {
    ctx: BoundsContext,
    observed: Observed,
    vhat_applies: bool,
    hbar_applies: bool,
}

impl Monitor {
    fn row(&mut self, flow: &Flow) -> Result<TimeSeriesRow> {
        let geom = flow.geometry();
        let r = flow.radii();
        let r_min = r.iter().copied().fold(f64::INFINITY, f64::min);
        let r_max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.observed.update(r_min, r_max, geom.hbar);
        let vhat_max = geom
            .q
            .iter()
            .zip(&geom.sc0)
            .map(|(q, c)| q.sqrt() / c)
            .fold(f64::NEG_INFINITY, f64::max);
        let bound63_ok = r_max <= self.ctx.prop63_bound + MONITOR_TOL;
        let bound65_ok = !self.hbar_applies
            || geom.hbar >= self.ctx.hbar_lower(self.observed.r_min, self.observed.r_max) - MONITOR_TOL;
        let vhat_bound_ok = !self.vhat_applies || vhat_max <= self.ctx.vhat_bound(&self.observed) + MONITOR_TOL;
        Ok(TimeSeriesRow {
            t: flow.t(),
            r_min,
            r_max,
            hbar: geom.hbar,
            vol_d: flow.vol_d()?,
            vol_m: flow.vol_m(),
            vhat_max,
            bound63_ok,
            bound65_ok,
            vhat_bound_ok,
        })
    }
}

fn cmc_deviation(geom: &ProfileGeometry) -> (f64, f64) {
    let dev = geom.mean_curvature.iter().map(|h| (h - geom.hbar).abs()).fold(0.0, f64::max);
    let speed = geom.velocity().iter().map(|v| v.abs()).fold(0.0, f64::max);
    (dev, speed)
}

/// Integrates from `initial` until the core is reached, a CMC profile is
/// found, `t_max` passes or the integration breaks down.
pub fn run(config: &FlowConfig, initial: RadialProfile) -> Result<RunReport> {
    let ctx = BoundsContext::new(&config.space, &config.density, &initial, config.sign_mode, config.lap_mode)?;
    let r_stop = config.r_stop.unwrap_or(1e-3 * ctx.r_hat1);
    let noncompact = config.space.curvature == Curvature::NonCompact;
    let mut flow = Flow::new(config.clone(), initial)?;
    let mut monitor = Monitor {
        observed: Observed::new(flow.profile().min_r(), flow.profile().max_r(), flow.geometry().hbar),
        vhat_applies: noncompact && ctx.thmc_satisfied(),
        hbar_applies: noncompact,
        ctx,
    };
    let mut series = TimeSeries::default();
    series.rows.push(monitor.row(&flow)?);
    let mut max_area_increase: f64 = 0.0;
    let vol_m0 = flow.vol_m();
    let mut failure = None;
    let outcome = loop {
        let (dev, speed) = cmc_deviation(flow.geometry());
        if dev <= config.tol_cmc && speed <= config.tol_cmc {
            break FlowOutcome::ConvergedCMC;
        }
        if flow.radii().iter().any(|&r| r <= r_stop) {
            break FlowOutcome::ReachedCore;
        }
        if flow.t() >= config.t_max {
            break FlowOutcome::MaxTimeReached;
        }
        let dt = flow.dt().min(config.t_max - flow.t());
        if !(dt > 1e-14 * flow.t().max(1.0) * f64::EPSILON.sqrt()) {
            failure = Some(format!("time step underflow at t = {}", flow.t()));
            break FlowOutcome::NumericalFailure;
        }
        let before = flow.vol_m();
        if let Err(e) = flow.step_with_dt(dt) {
            failure = Some(e.to_string());
            break FlowOutcome::NumericalFailure;
        }
        max_area_increase = max_area_increase.max((flow.vol_m() - before) / vol_m0);
        if flow.steps() % config.stride as u64 == 0 {
            match monitor.row(&flow) {
                Ok(row) => series.rows.push(row),
                Err(e) => {
                    failure = Some(e.to_string());
                    break FlowOutcome::NumericalFailure;
                }
            }
        }
    };
    if series.rows.last().map(|row| row.t) != Some(flow.t()) {
        if let Ok(row) = monitor.row(&flow) {
            series.rows.push(row);
        }
    }
    let (cmc_residual, _) = cmc_deviation(flow.geometry());
    Ok(RunReport {
        outcome,
        series,
        final_profile: flow.profile(),
        t_final: flow.t(),
        steps: flow.steps(),
        bounds: monitor.ctx.report(&monitor.observed),
        bounds_context: monitor.ctx,
        observed: monitor.observed,
        r_stop,
        cmc_residual,
        max_area_increase,
        failure,
    })
}

/// Options for [`cmc_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmcSearch {
    pub lap_mode: LapMode,
    pub sign_mode: SignMode,
    /// Cells of the returned profile.
    pub n: usize,
    /// Integration sub-steps per output cell.
    pub substeps: usize,
    /// Relative half-width of the scanned window of initial radii.
    pub window: f64,
    /// Number of scan intervals.
    pub samples: usize,
}

impl Default for CmcSearch {
    fn default() -> Self {
        CmcSearch {
            lap_mode: LapMode::Full,
            sign_mode: SignMode::Eq250,
            n: 200,
            substeps: 8,
            window: 0.5,
            samples: 64,
        }
    }
}

/// A profile with constant mean curvature and its exact ODE derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct CmcProfile {
    pub profile: RadialProfile,
    pub rp: Vec<f64>,
    pub rpp: Vec<f64>,
    /// Slope at `r_B` left by the shooting.
    pub end_slope: f64,
}

impl CmcProfile {
    pub fn is_constant(&self, tol: f64) -> bool {
        self.profile.max_r() - self.profile.min_r() <= tol
    }
}

struct Shooter<'a> {
    space: &'a SpaceParams,
    density: &'a BaseDensity,
    hstar: f64,
    opts: CmcSearch,
    rb: f64,
}

impl Shooter<'_> {
    /// `r''` from `H(r, r', r'') = H*`.
    fn accel(&self, z: f64, r: f64, rp: f64) -> f64 {
        let space = self.space;
        let Ok(e) = eval_point(space, &PointData { r, g: rp.abs(), lap: 0.0, hess: 0.0 }, self.opts.sign_mode) else {
            return f64::NAN;
        };
        let (c, q) = (e.sc0, e.q);
        if z == 0.0 {
            let m = match self.opts.lap_mode {
                LapMode::Paper61 => 0.0,
                LapMode::Full => self.density.total() as f64,
            };
            return (e.rho - self.hstar) * c * c / (1.0 + m);
        }
        let drift = match self.opts.lap_mode {
            LapMode::Paper61 => 0.0,
            LapMode::Full => self.density.log_derivative(space, z) * rp / (c * q.sqrt()),
        };
        (e.rho - drift - self.hstar) * q * q.sqrt() / c
    }

    /// Integrates from `z = 0` with `r(0) = r0`, `r'(0) = 0`; returns samples
    /// on the output grid or `None` when the solution leaves the admissible range.
    fn shoot(&self, r0: f64) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.opts.n;
        let sub = self.opts.substeps.max(1);
        let dz = self.rb / (n * sub) as f64;
        let focal = self.space.focal_radius();
        let (mut r, mut p) = (r0, 0.0);
        let mut rs = vec![r0];
        let mut ps = vec![0.0];
        let mut pps = vec![self.accel(0.0, r0, 0.0)];
        for cell in 0..n {
            for s in 0..sub {
                let z = (cell * sub + s) as f64 * dz;
                let f = |z: f64, r: f64, p: f64| (p, self.accel(z, r, p));
                let (a1, b1) = f(z, r, p);
                let (a2, b2) = f(z + 0.5 * dz, r + 0.5 * dz * a1, p + 0.5 * dz * b1);
                let (a3, b3) = f(z + 0.5 * dz, r + 0.5 * dz * a2, p + 0.5 * dz * b2);
                let (a4, b4) = f(z + dz, r + dz * a3, p + dz * b3);
                r += dz / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
                p += dz / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
                if !(r > 0.0 && r < focal && p.is_finite()) {
                    return None;
                }
            }
            let z = (cell + 1) as f64 * self.rb / n as f64;
            rs.push(r);
            ps.push(p);
            pps.push(self.accel(z, r, p));
        }
        Some((rs, ps, pps))
    }

    fn end_slope(&self, r0: f64) -> Option<f64> {
        self.shoot(r0).map(|(_, ps, _)| *ps.last().unwrap())
    }
}

/// Searches for a profile with `H ≡ H*` and Neumann ends by shooting on the
/// centre radius `r(0)` over a window around `shoot_from`. Returns the root
/// nearest to `shoot_from`, or `None` if no sign change of `r'(r_B)` is
/// bracketed.
pub fn cmc_search(
    space: &SpaceParams,
    density: &BaseDensity,
    rb: f64,
    hstar: f64,
    shoot_from: f64,
    opts: CmcSearch,
) -> Result<Option<CmcProfile>> {
    if space.curvature != Curvature::NonCompact {
        return Err(TubeError::InvalidSpace("the CMC search needs a non-compact space".into()));
    }
    if !space.is_invariant_mode() {
        return Err(TubeError::InvalidSpace("the CMC search needs K = {1} and k0 = 1".into()));
    }
    if !(hstar > 0.0 && shoot_from > 0.0 && rb > 0.0) {
        return Err(TubeError::Config("H*, shoot_from and r_B must be positive".into()));
    }
    let shooter = Shooter { space, density, hstar, opts, rb };
    let lo = shoot_from * (1.0 - opts.window).max(1e-3);
    let hi = shoot_from * (1.0 + opts.window);
    let xs: Vec<f64> = (0..=opts.samples).map(|j| lo + (hi - lo) * j as f64 / opts.samples as f64).collect();
    let fs: Vec<Option<f64>> = xs.iter().map(|&x| shooter.end_slope(x)).collect();
    let mut roots = Vec::new();
    for j in 0..opts.samples {
        let (Some(fa), Some(fb)) = (fs[j], fs[j + 1]) else { continue };
        if fa == 0.0 {
            roots.push(xs[j]);
            continue;
        }
        if fa * fb > 0.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (xs[j], xs[j + 1], fa);
        let mut root = None;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let Some(fm) = shooter.end_slope(m) else { break };
            if fm.abs() <= 1e-12 || b - a <= 1e-15 * m {
                root = Some(m);
                break;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        if let Some(root) = root {
            roots.push(root);
        }
    }
    if let Some(&last) = fs.last() {
        if last == Some(0.0) {
            roots.push(xs[opts.samples]);
        }
    }
    roots.sort_by(|a, b| (a - shoot_from).abs().total_cmp(&(b - shoot_from).abs()));
    for root in roots {
        if let Some((rs, ps, pps)) = shooter.shoot(root) {
            let end_slope = *ps.last().unwrap();
            if end_slope.abs() <= 1e-10 {
                let profile = RadialProfile::new(rb, rs)?;
                return Ok(Some(CmcProfile { profile, rp: ps, rpp: pps, end_slope }));
            }
        }
    }
    Ok(None)
}

/// `max|H − H*|` of a CMC profile, re-evaluated pointwise from its exact
/// derivatives.
pub fn cmc_residual(
    space: &SpaceParams,
    density: &BaseDensity,
    cmc: &CmcProfile,
    hstar: f64,
    opts: CmcSearch,
) -> Result<f64> {
    let p = &cmc.profile;
    let mut worst: f64 = 0.0;
    for i in 0..=p.n() {
        let z = p.z(i);
        let lap = match opts.lap_mode {
            LapMode::Paper61 => cmc.rpp[i],
            LapMode::Full if i == 0 => (1.0 + density.total() as f64) * cmc.rpp[i],
            LapMode::Full => cmc.rpp[i] + density.log_derivative(space, z) * cmc.rp[i],
        };
        let pd = PointData {
            r: p.r[i],
            g: cmc.rp[i].abs(),
            lap,
            hess: cmc.rp[i] * cmc.rp[i] * cmc.rpp[i],
        };
        worst = worst.max((eval_point(space, &pd, opts.sign_mode)?.mean_curvature - hstar).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symspace::catalog_lookup;
    use crate::tubegeom::rho;
    use approx::assert_relative_eq;

    fn preset(name: &str) -> FlowConfig {
        let e = catalog_lookup(name).unwrap();
        FlowConfig::new(e.params, BaseDensity { mult: e.density_mult })
    }

    #[test]
    fn constant_profile_is_a_fixed_point() {
        let cfg = preset("RH3/RH1");
        let p = RadialProfile::constant(1.0, 32, 0.5).unwrap();
        let out = rhs(&cfg, &p).unwrap();
        assert!(out.drdt.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn weighted_velocity_sums_to_zero() {
        let cfg = preset("CH3/CH1");
        let p = RadialProfile::from_fn(1.0, 64, |z| 0.5 + 0.05 * (3.0 * z).cos() + 0.02 * z * z).unwrap();
        let grid = BaseGrid::for_profile(&cfg.space, &cfg.density, &p);
        let geom = geometry_on(&cfg.space, &grid, &p.r, cfg.sign_mode, cfg.lap_mode).unwrap();
        let s: f64 = geom.weights.iter().zip(&geom.mean_curvature).map(|(w, h)| w * (geom.hbar - h)).sum();
        let scale: f64 = geom.weights.iter().sum::<f64>() * geom.hbar;
        assert!(s.abs() <= 1e-13 * scale, "{s}");
    }

    #[test]
    fn velocity_changes_sign_on_cosine_profile() {
        let cfg = preset("CH2/CH1");
        let p = RadialProfile::cosine(0.25, 64, 0.5, 0.1).unwrap();
        let out = rhs(&cfg, &p).unwrap();
        assert!(out.drdt.first().unwrap() * out.drdt.last().unwrap() < 0.0);
    }

    #[test]
    fn constant_initial_profile_converges_immediately() {
        let mut cfg = preset("RH3/RH1");
        cfg.t_max = 0.1;
        let p = RadialProfile::constant(1.0, 32, 0.5).unwrap();
        let rep = run(&cfg, p.clone()).unwrap();
        assert_eq!(rep.outcome, FlowOutcome::ConvergedCMC);
        assert_eq!(rep.steps, 0);
        assert_eq!(rep.final_profile, p);
    }

    #[test]
    fn neumann_slopes_stay_zero_and_markers_at_ends_stay_put() {
        let cfg = preset("RH3/RH1");
        let p = RadialProfile::cosine(1.0, 32, 0.5, 0.05).unwrap();
        let mut flow = Flow::new(cfg, p).unwrap();
        let mut markers = [Marker::new(0.0, 0.55), Marker::new(1.0, 0.45)];
        for _ in 0..20 {
            let dt = flow.dt();
            flow.step_with_markers(dt, &mut markers).unwrap();
            let g = flow.geometry();
            assert_eq!(g.rp[0], 0.0);
            assert_eq!(g.rp[32], 0.0);
        }
        assert_eq!(markers[0].z, 0.0);
        assert_eq!(markers[1].z, 1.0);
    }

    #[test]
    fn cmc_search_finds_the_constant_solution() {
        let e = catalog_lookup("RH3/RH1").unwrap();
        let d = BaseDensity { mult: e.density_mult };
        let hstar = rho(&e.params, &PointData::at_rest(0.5), SignMode::Eq250).unwrap();
        let opts = CmcSearch { n: 64, ..CmcSearch::default() };
        let found = cmc_search(&e.params, &d, 1.0, hstar, 0.52, opts).unwrap().unwrap();
        assert!(found.is_constant(1e-9));
        assert_relative_eq!(found.profile.r[0], 0.5, epsilon = 1e-9);
        assert!(cmc_residual(&e.params, &d, &found, hstar, opts).unwrap() <= 1e-8);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = preset("RH3/RH1");
        cfg.cfl = 0.7;
        assert!(cfg.validate().is_err());
        let meridian = catalog_lookup("SU(3)/SO(3) meridian").unwrap();
        let cfg = FlowConfig::new(meridian.params, BaseDensity { mult: meridian.density_mult });
        assert!(cfg.validate().is_err());
    }
}
