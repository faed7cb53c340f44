//! Monitored pointwise quantities (`û`, `v̂`, `λ`, diagonal principal
//! curvatures, `φ`/`κ`/`Φ`), the radial Laplace–Beltrami operator of the tube
//! and discrete audits of the evolution identities for `r`, `r̂` and `û`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TubeError};
use crate::flow::{Flow, FlowConfig};
use crate::profile::{interp_cubic, BaseDensity, BaseGrid, RadialProfile};
use crate::symspace::SpaceParams;
use crate::tubegeom::{eval_point, geometry_on, psi, PointData, ProfileGeometry, SignMode};

/// `û = sc(k0 b r)/√(sc² + g²)`.
pub fn u_hat(space: &SpaceParams, r: f64, g: f64) -> f64 {
    let c = space.sc(space.k0 * space.b * r);
    c / (c * c + g * g).sqrt()
}

pub fn v_hat(space: &SpaceParams, r: f64, g: f64) -> f64 {
    1.0 / u_hat(space, r, g)
}

/// Norm of the gradient of `r̂` on the tube, `g/√(sc² + g²)`.
pub fn grad_rhat_norm(space: &SpaceParams, r: f64, g: f64) -> f64 {
    let c = space.sc(space.k0 * space.b * r);
    g / (c * c + g * g).sqrt()
}

fn sum_h_tt(space: &SpaceParams, r: f64) -> f64 {
    space
        .k_set()
        .map(|rm| {
            let kb = rm.k * space.b;
            rm.mult as f64 * kb * space.tt(kb * r)
        })
        .sum()
}

fn sum_v_ct(space: &SpaceParams, r: f64) -> f64 {
    let b = space.b;
    space
        .mv
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(idx, &m)| {
            let kb = (idx + 1) as f64 * b;
            m as f64 * kb * space.ct(kb * r)
        })
        .sum()
}

fn sum_v_inv_ss2(space: &SpaceParams, r: f64) -> f64 {
    let b = space.b;
    space
        .mv
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(idx, &m)| {
            let kb = (idx + 1) as f64 * b;
            m as f64 * kb * kb / space.ss(kb * r).powi(2)
        })
        .sum()
}

/// `λ = −û (Σ_K m^H_k kb tt(kbr) + Δr/sc0² + g² k0b tt0/Q − hess/(sc0² Q))`.
pub fn lambda_fn(space: &SpaceParams, pd: &PointData) -> f64 {
    let k0b = space.k0 * space.b;
    let c0 = space.sc(k0b * pd.r);
    let c2 = c0 * c0;
    let q = c2 + pd.g * pd.g;
    let u = c0 / q.sqrt();
    -u * (sum_h_tt(space, pd.r) + pd.lap / c2 + pd.g * pd.g * k0b * space.tt(k0b * pd.r) / q
        - pd.hess / (c2 * q))
}

/// `H(eq250) − λ − û Σ m^V_k kb ct(kbr)`; zero up to round-off.
pub fn lambda_h_defect(space: &SpaceParams, pd: &PointData) -> Result<f64> {
    let h = eval_point(space, pd, SignMode::Eq250)?.mean_curvature;
    Ok(h - lambda_fn(space, pd) - u_hat(space, pd.r, pd.g) * sum_v_ct(space, pd.r))
}

/// One principal curvature with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Principal {
    pub k: f64,
    pub mult: u32,
    pub kappa: f64,
}

/// Diagonal estimate of the shape operator at one point. The off-diagonal
/// corrections are not included, so `a2_diag` and `phi` are labelled
/// diagnostics only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub u: f64,
    pub v: f64,
    pub lambda: f64,
    pub kappa_vertical: Vec<Principal>,
    pub kappa_horizontal: Vec<Principal>,
    pub kappa_horizontal_generic: f64,
    pub kappa_radial: f64,
    /// `Σ mult·κ²` over the diagonal entries.
    pub a2_diag: f64,
    /// `Φ` with `sup v̂` taken as the local `v̂`.
    pub phi: f64,
}

impl PointDiagnostics {
    pub fn trace(&self) -> f64 {
        self.kappa_vertical
            .iter()
            .chain(&self.kappa_horizontal)
            .map(|p| p.mult as f64 * p.kappa)
            .sum::<f64>()
            + self.kappa_radial
    }

    /// `Φ` against a given supremum of `v̂`.
    pub fn phi_with_sup(&self, v_sup: f64) -> f64 {
        phi_kappa_phi(v_sup, self.v, self.a2_diag).2
    }
}

pub fn principal_curvatures_diag(space: &SpaceParams, pd: &PointData, mean_curvature: f64) -> PointDiagnostics {
    let b = space.b;
    let u = u_hat(space, pd.r, pd.g);
    let kappa_vertical: Vec<Principal> = space
        .mv
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(idx, &mult)| {
            let k = (idx + 1) as f64;
            Principal { k, mult, kappa: k * b * space.ct(k * b * pd.r) * u }
        })
        .collect();
    let horizontal = |k: f64| -k * b * space.tt(k * b * pd.r) * u;
    let kappa_horizontal: Vec<Principal> = space
        .k_set()
        .map(|rm| {
            let mult = if rm.k == space.k0 { rm.mult.saturating_sub(1) } else { rm.mult };
            Principal { k: rm.k, mult, kappa: horizontal(rm.k) }
        })
        .filter(|p| p.mult > 0)
        .collect();
    let partial: f64 = kappa_vertical.iter().chain(&kappa_horizontal).map(|p| p.mult as f64 * p.kappa).sum();
    let kappa_radial = mean_curvature - partial;
    let a2_diag = kappa_vertical
        .iter()
        .chain(&kappa_horizontal)
        .map(|p| p.mult as f64 * p.kappa * p.kappa)
        .sum::<f64>()
        + kappa_radial * kappa_radial;
    let v = 1.0 / u;
    PointDiagnostics {
        u,
        v,
        lambda: lambda_fn(space, pd),
        kappa_vertical,
        kappa_horizontal,
        kappa_horizontal_generic: horizontal(space.k0),
        kappa_radial,
        a2_diag,
        phi: phi_kappa_phi(v, v, a2_diag).2,
    }
}

/// `κ = 1/(2 v_sup²)`, `φ(v) = v²/(1 − κv²)` and `Φ = φ(v)·‖A‖²`.
pub fn phi_kappa_phi(v_sup: f64, v: f64, a2_diag: f64) -> (f64, f64, f64) {
    let kappa = 1.0 / (2.0 * v_sup * v_sup);
    let phi = v * v / (1.0 - kappa * v * v);
    (kappa, phi, phi * a2_diag)
}

/// Laplace–Beltrami operator of the tube restricted to radial functions,
/// `Δ_t f = (1/ω)(ω f'/Q)'` with `ω = f_B·ψ` the area density per unit `z`
/// and `Q = sc(k0 b r)² + r'²`. Discretized in flux form on control volumes
/// with zero flux through both ends, so it is symmetric with respect to
/// [`LaplaceBeltrami::volumes`].
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceBeltrami {
    h: f64,
    /// `ω/Q` at the cell midpoints.
    coeff: Vec<f64>,
    volumes: Vec<f64>,
}

impl LaplaceBeltrami {
    pub fn new(space: &SpaceParams, density: &BaseDensity, grid: &BaseGrid, r: &[f64]) -> Result<Self> {
        let n = grid.n;
        if r.len() != n + 1 {
            return Err(TubeError::InvalidProfile(format!("expected {} radii, got {}", n + 1, r.len())));
        }
        let h = grid.h;
        let k0b = space.k0 * space.b;
        let mut omega_mid = Vec::with_capacity(n);
        let mut coeff = Vec::with_capacity(n);
        for i in 0..n {
            let rm = 0.5 * (r[i] + r[i + 1]);
            let rp = (r[i + 1] - r[i]) / h;
            let pd = PointData { r: rm, g: rp.abs(), lap: 0.0, hess: 0.0 };
            let w = density.eval(space, (i as f64 + 0.5) * h) * psi(space, &pd)?;
            let q = space.sc(k0b * rm).powi(2) + rp * rp;
            omega_mid.push(w);
            coeff.push(w / q);
        }
        let (rp_nodes, _) = crate::profile::derivatives_of(r, h);
        let omega_node = |i: usize| -> Result<f64> {
            let pd = PointData { r: r[i], g: rp_nodes[i].abs(), lap: 0.0, hess: 0.0 };
            Ok(grid.f[i] * psi(space, &pd)?)
        };
        let mut volumes = Vec::with_capacity(n + 1);
        volumes.push(omega_mid[0] * 0.5 * h / (1.0 + grid.m_total as f64));
        for i in 1..n {
            volumes.push(h * omega_node(i)?);
        }
        volumes.push(0.5 * h * omega_node(n)?);
        Ok(LaplaceBeltrami { h, coeff, volumes })
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.coeff.len();
        let flux: Vec<f64> = (0..n).map(|i| self.coeff[i] * (f[i + 1] - f[i]) / self.h).collect();
        (0..=n)
            .map(|i| {
                let right = if i < n { flux[i] } else { 0.0 };
                let left = if i > 0 { flux[i - 1] } else { 0.0 };
                (right - left) / self.volumes[i]
            })
            .collect()
    }
}

/// `Δ_t f` for samples `f` on the profile grid.
pub fn laplace_beltrami_radial(
    space: &SpaceParams,
    density: &BaseDensity,
    profile: &RadialProfile,
    f: &[f64],
) -> Result<Vec<f64>> {
    let grid = BaseGrid::for_profile(space, density, profile);
    let op = LaplaceBeltrami::new(space, density, &grid, &profile.r)?;
    if f.len() != profile.r.len() {
        return Err(TubeError::InvalidProfile(format!("expected {} samples, got {}", profile.r.len(), f.len())));
    }
    Ok(op.apply(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Id416,
    Id418,
    Id520,
}

impl Which {
    pub const ALL: [Which; 3] = [Which::Id416, Which::Id418, Which::Id520];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub which: Which,
    pub n: usize,
    pub dt: f64,
    pub sup: f64,
    pub l2: f64,
}

/// Consecutive flow states at fixed `dt`; audits use the last three.
#[derive(Debug, Clone)]
pub struct AuditContext {
    pub config: FlowConfig,
    pub states: Vec<RadialProfile>,
    pub dt: f64,
}

impl AuditContext {
    /// Runs the flow from `initial` for `warmup` steps of size `dt` and keeps
    /// the next three states. `dt` defaults to the flow's stable step.
    pub fn record(config: &FlowConfig, initial: RadialProfile, warmup: usize, dt: Option<f64>) -> Result<Self> {
        let mut flow = Flow::new(config.clone(), initial)?;
        let dt = dt.unwrap_or_else(|| flow.dt());
        for _ in 0..warmup {
            flow.step_with_dt(dt)?;
        }
        let mut states = vec![flow.profile()];
        for _ in 0..2 {
            flow.step_with_dt(dt)?;
            states.push(flow.profile());
        }
        Ok(AuditContext { config: config.clone(), states, dt })
    }
}

struct Snapshot {
    r: Vec<f64>,
    geom: ProfileGeometry,
}

impl Snapshot {
    fn u_at(&self, space: &SpaceParams, h: f64, z: f64) -> f64 {
        let r = interp_cubic(&self.r, h, z, false);
        let rp = interp_cubic(&self.geom.rp, h, z, true);
        u_hat(space, r, rp)
    }

    fn velocity(&self, space: &SpaceParams, h: f64, rb: f64, z: f64) -> f64 {
        let z = z.clamp(0.0, rb);
        let r = interp_cubic(&self.r, h, z, false);
        let rp = interp_cubic(&self.geom.rp, h, z, true);
        let hz = interp_cubic(&self.geom.mean_curvature, h, z, false);
        let c = space.sc(space.k0 * space.b * r);
        (hz - self.geom.hbar) * rp / (c * (c * c + rp * rp).sqrt())
    }
}

/// Heun step of a marker between two frozen velocity fields.
fn trace(space: &SpaceParams, h: f64, rb: f64, from: &Snapshot, to: &Snapshot, z: f64, dt: f64) -> f64 {
    let v0 = from.velocity(space, h, rb, z);
    let pred = (z + dt * v0).clamp(0.0, rb);
    let v1 = to.velocity(space, h, rb, pred);
    (z + 0.5 * dt * (v0 + v1)).clamp(0.0, rb)
}

/// Residual of one of the evolution identities on the middle state.
///
/// * `Id416`: `Δ_F r − [Q Δ_t r̂ − ε k0b ss sc g²/Q + hess/Q]`.
/// * `Id418`: `∂r̂/∂t − Δ_t r̂ − [û(H̄ − ρ) − ε k0b ss sc g²/Q²]`.
/// * `Id520`: `∂û/∂t − Δ_t û − RHS` with the right-hand side as printed,
///   including the first power of `‖grad r‖` in its last term.
///
/// Time derivatives follow markers seeded at the grid nodes of the middle
/// state, traced one step forward and back.
pub fn residual_audit(which: Which, ctx: &AuditContext) -> Result<ResidualReport> {
    if ctx.states.len() < 3 {
        return Err(TubeError::InsufficientStates { needed: 3, got: ctx.states.len() });
    }
    let cfg = &ctx.config;
    let space = &cfg.space;
    let [prev, mid, next] = &ctx.states[ctx.states.len() - 3..] else { unreachable!() };
    let grid = BaseGrid::for_profile(space, &cfg.density, mid);
    let snap = |p: &RadialProfile| -> Result<Snapshot> {
        Ok(Snapshot { r: p.r.clone(), geom: geometry_on(space, &grid, &p.r, cfg.sign_mode, cfg.lap_mode)? })
    };
    let (s0, s1, s2) = (snap(prev)?, snap(mid)?, snap(next)?);
    let (h, rb, dt) = (grid.h, grid.rb, ctx.dt);
    let op = LaplaceBeltrami::new(space, &cfg.density, &grid, &s1.r)?;
    let eps = space.epsilon();
    let k0b = space.k0 * space.b;
    let g1 = &s1.geom;

    let n = grid.n;
    let mut res = vec![0.0; n + 1];
    match which {
        Which::Id416 => {
            let lb = op.apply(&s1.r);
            for i in 0..=n {
                let r = s1.r[i];
                let g = g1.rp[i];
                let q = g1.q[i];
                let (c, s) = space.sc_ss(k0b * r);
                let hess = g * g * g1.rpp[i];
                res[i] = g1.lap[i] - (q * lb[i] - eps * k0b * s * c * g * g / q + hess / q);
            }
        }
        Which::Id418 | Which::Id520 => {
            let lagrangian = |value: &dyn Fn(&Snapshot, f64) -> f64| -> Vec<f64> {
                (0..=n)
                    .map(|i| {
                        let z = grid.z(i);
                        let z2 = trace(space, h, rb, &s1, &s2, z, dt);
                        let z0 = trace(space, h, rb, &s1, &s0, z, -dt);
                        (value(&s2, z2) - value(&s0, z0)) / (2.0 * dt)
                    })
                    .collect()
            };
            if which == Which::Id418 {
                let drdt = lagrangian(&|s: &Snapshot, z: f64| interp_cubic(&s.r, h, z, false));
                let lb = op.apply(&s1.r);
                for i in 0..=n {
                    let r = s1.r[i];
                    let g = g1.rp[i];
                    let q = g1.q[i];
                    let (c, s) = space.sc_ss(k0b * r);
                    let u = c / q.sqrt();
                    let rho = eval_point(space, &PointData { r, g: g.abs(), lap: 0.0, hess: 0.0 }, cfg.sign_mode)?.rho;
                    res[i] = drdt[i] - lb[i] - (u * (g1.hbar - rho) - eps * k0b * s * c * g * g / (q * q));
                }
            } else {
                let dudt = lagrangian(&|s: &Snapshot, z: f64| s.u_at(space, h, z));
                let u_nodes: Vec<f64> = (0..=n).map(|i| u_hat(space, s1.r[i], g1.rp[i])).collect();
                let lb = op.apply(&u_nodes);
                for i in 0..=n {
                    let r = s1.r[i];
                    let g = g1.rp[i].abs();
                    let pd = PointData { r, g, lap: g1.lap[i], hess: g * g * g1.rpp[i] };
                    res[i] = dudt[i] - lb[i] - rhs_520(space, &pd, g1.hbar);
                }
            }
        }
    }
    let sup = res.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let l2 = res.iter().zip(&grid.quad).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
    Ok(ResidualReport { which, n, dt, sup, l2 })
}

/// Right-hand side of the evolution equation of `û`.
pub fn rhs_520(space: &SpaceParams, pd: &PointData, hbar: f64) -> f64 {
    let eps = space.epsilon();
    let b = space.b;
    let k0b = space.k0 * b;
    let r = pd.r;
    let u = u_hat(space, r, pd.g);
    let w = 1.0 - u * u;
    let tt0 = k0b * space.tt(k0b * r);
    let h_tt = sum_h_tt(space, r);
    let lambda = lambda_fn(space, pd);
    let last: f64 = space
        .k_set()
        .map(|rm| {
            let kb = rm.k * b;
            rm.mult as f64 * eps * kb * kb * pd.g / space.sc(kb * r).powi(2)
        })
        .sum();
    hbar * tt0 * w - u * w * sum_v_inv_ss2(space, r) - u * w * tt0 * sum_v_ct(space, r) - u * w * tt0 * h_tt
        + u * (lambda + u * h_tt).powi(2)
        + u * w * last
}
