//! Closed-form tube geometry, volume functionals and the computable bounds.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TubeError};
use crate::profile::{derivatives_of, laplacian_on, BaseDensity, BaseGrid, LapMode, RadialProfile};
use crate::quadrature::{adaptive_simpson, invert_increasing};
use crate::symspace::{Curvature, SpaceParams};

const DELTA_TOL: f64 = 1e-13;
const INVERSION_XTOL: f64 = 1e-13;
const C_PRIME_SAMPLES: usize = 256;
const FIXED_PANEL: f64 = 0.5;

/// Local data of the radius function at one base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointData {
    pub r: f64,
    /// `‖grad r‖`.
    pub g: f64,
    /// `Δ_F r`.
    pub lap: f64,
    /// `∇^F dr(grad r, grad r)`.
    pub hess: f64,
}

impl PointData {
    pub fn at_rest(r: f64) -> Self {
        PointData { r, g: 0.0, lap: 0.0, hess: 0.0 }
    }
}

/// Sign carried by the `g²·tt` term of ρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    /// Minus sign, as in the mean-curvature formula of the tube.
    #[default]
    Eq250,
    /// Plus sign, as in the printed definition of ρ.
    Eq34,
}

impl SignMode {
    fn sigma(self) -> f64 {
        match self {
            SignMode::Eq250 => -1.0,
            SignMode::Eq34 => 1.0,
        }
    }
}

/// `(sc, ss)` at `k·b·r` for the root indices a point evaluation needs,
/// sharing one transcendental call between `k = 1` and `k = 2`.
struct RootKernels<'a> {
    space: &'a SpaceParams,
    r: f64,
    one: (f64, f64),
}

impl<'a> RootKernels<'a> {
    fn new(space: &'a SpaceParams, r: f64) -> Self {
        RootKernels { space, r, one: space.sc_ss(space.b * r) }
    }

    #[inline]
    fn at(&self, k: f64) -> (f64, f64) {
        if k == 1.0 {
            self.one
        } else if k == 2.0 {
            let (c, s) = self.one;
            (c * c - self.space.epsilon() * s * s, 2.0 * s * c)
        } else if k == 0.0 {
            (1.0, 0.0)
        } else {
            self.space.sc_ss(k * self.space.b * self.r)
        }
    }
}

/// Every pointwise quantity of the tube at one base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub psi: f64,
    pub rho: f64,
    pub mean_curvature: f64,
    /// `sc(k0·b·r)`.
    pub sc0: f64,
    /// `sc(k0·b·r)² + g²`.
    pub q: f64,
}

pub fn eval_point(space: &SpaceParams, pd: &PointData, sign: SignMode) -> Result<PointEval> {
    let PointData { r, g, lap, hess } = *pd;
    if !(r > 0.0) {
        return Err(TubeError::Pole(r));
    }
    let eps = space.epsilon();
    let out_of_range = || TubeError::RadiusOutOfRange { r, focal: space.focal_radius() };
    let kern = RootKernels::new(space, r);
    let mut psi = 1.0;
    let mut bracket = 0.0;
    for (idx, &m) in space.mv.iter().enumerate() {
        if m > 0 {
            let k = (idx + 1) as f64;
            let kb = k * space.b;
            let (c, s) = kern.at(k);
            if s <= 0.0 {
                return Err(out_of_range());
            }
            psi *= (s / kb).powi(m as i32);
            bracket += m as f64 * kb * c / s;
        }
    }
    for rm in space.k_set() {
        let kb = rm.k * space.b;
        let (c, s) = kern.at(rm.k);
        if c <= 0.0 {
            return Err(out_of_range());
        }
        let exp = if rm.k == space.k0 { rm.mult as i32 - 1 } else { rm.mult as i32 };
        psi *= c.powi(exp);
        bracket -= rm.mult as f64 * kb * eps * s / c;
    }
    let (c0, s0) = kern.at(space.k0);
    let q = c0 * c0 + g * g;
    let sq = q.sqrt();
    let k0b = space.k0 * space.b;
    bracket += sign.sigma() * g * g * k0b * eps * s0 / c0 / q;
    // For k0 = 0 the factor sc(k0 b r) is identically 1.
    psi *= sq;
    let rho = c0 / sq * bracket;
    let mean_curvature = rho - lap / (c0 * sq) + hess / (c0 * q * sq);
    Ok(PointEval { psi, rho, mean_curvature, sc0: c0, q })
}

pub fn psi(space: &SpaceParams, pd: &PointData) -> Result<f64> {
    Ok(eval_point(space, pd, SignMode::Eq250)?.psi)
}

pub fn rho(space: &SpaceParams, pd: &PointData, sign: SignMode) -> Result<f64> {
    Ok(eval_point(space, pd, sign)?.rho)
}

pub fn mean_curvature(space: &SpaceParams, pd: &PointData, sign: SignMode) -> Result<f64> {
    Ok(eval_point(space, pd, sign)?.mean_curvature)
}

/// `ψ̄(s) = Π_k (ss(kbs)/(kbs))^{m^V_k} · sc(bs)^{m^H}`, equal to 1 at `s = 0`.
pub fn psi_bar(space: &SpaceParams, s: f64) -> f64 {
    let mut value = space.sc(space.b * s).powi(space.m_h() as i32);
    for (idx, &m) in space.mv.iter().enumerate() {
        let kb = (idx + 1) as f64 * space.b;
        value *= space.ss_over(kb * s).powi(m as i32);
    }
    value
}

/// Base-radial density `f(z)` with the multiplicities of `density`.
pub fn f_density(space: &SpaceParams, density: &BaseDensity, z: f64) -> f64 {
    density.eval(space, z)
}

/// `s^{m^V}·ψ̄(s)`, written without the removable singularity.
fn delta1_integrand(space: &SpaceParams, s: f64) -> f64 {
    let mut value = space.sc(space.b * s).powi(space.m_h() as i32);
    for (idx, &m) in space.mv.iter().enumerate() {
        let kb = (idx + 1) as f64 * space.b;
        value *= (space.ss(kb * s) / kb).powi(m as i32);
    }
    value
}

/// Selects `δ₁` or `δ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delta {
    One,
    Two,
}

fn delta_integrand(which: Delta, space: &SpaceParams, s: f64) -> f64 {
    match which {
        Delta::One => delta1_integrand(space, s),
        Delta::Two => delta1_integrand(space, s) / space.sc(space.b * s),
    }
}

pub fn delta(which: Delta, space: &SpaceParams, s: f64) -> Result<f64> {
    let focal = space.focal_radius();
    if !(s >= 0.0 && s < focal) {
        return Err(TubeError::RadiusOutOfRange { r: s, focal });
    }
    adaptive_simpson(|x| delta_integrand(which, space, x), 0.0, s, DELTA_TOL)
}

pub fn delta1(space: &SpaceParams, s: f64) -> Result<f64> {
    delta(Delta::One, space, s)
}

pub fn delta2(space: &SpaceParams, s: f64) -> Result<f64> {
    delta(Delta::Two, space, s)
}

/// Inverse of `δ₁` or `δ₂` by bracketed bisection.
pub fn delta_inv(which: Delta, space: &SpaceParams, y: f64) -> Result<f64> {
    let hi = match space.curvature {
        Curvature::Compact => space.focal_radius() * (1.0 - 1e-12),
        Curvature::NonCompact => {
            let mut hi = 1.0;
            while delta(which, space, hi)? < y {
                hi *= 2.0;
                if hi > 512.0 / space.b {
                    return Err(TubeError::InversionRange { y, lo: 0.0, hi: f64::INFINITY });
                }
            }
            hi
        }
    };
    invert_increasing(|s| delta(which, space, s), y, 0.0, hi, INVERSION_XTOL)
}

/// Volume of the Euclidean unit `m`-sphere, `2π^{(m+1)/2}/Γ((m+1)/2)`.
pub fn unit_sphere_volume(m: u32) -> f64 {
    // Γ(n/2) by recurrence from Γ(1) = 1 or Γ(1/2) = √π.
    let n = m + 1;
    let (mut gamma, mut x) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x < n as f64 / 2.0 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

/// `Vol(B) = v_{m^H−1} ∫₀^{r_B} f(z) dz` by adaptive quadrature.
pub fn vol_b(space: &SpaceParams, density: &BaseDensity, rb: f64) -> Result<f64> {
    let integral = adaptive_simpson(|z| density.eval(space, z), 0.0, rb, DELTA_TOL)?;
    Ok(unit_sphere_volume(space.m_h() - 1) * integral)
}

/// Pointwise geometry of a whole profile, sharing one set of area weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGeometry {
    pub rp: Vec<f64>,
    pub rpp: Vec<f64>,
    pub lap: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    /// `sc(k0·b·rᵢ)² + gᵢ²`.
    pub q: Vec<f64>,
    /// `sc(k0·b·rᵢ)`.
    pub sc0: Vec<f64>,
    /// Simpson weight × `f(z_i)` × `ψ(r_i, g_i)`; `Vol(M) = v_{m^V} v_{m^H−1} Σ wᵢ`.
    pub weights: Vec<f64>,
    pub hbar: f64,
}

impl ProfileGeometry {
    pub fn vol_m(&self, space: &SpaceParams) -> f64 {
        sphere_factor(space) * self.weights.iter().sum::<f64>()
    }

    /// Normal speed of the flow, `√Q/sc·(H̄ − H)`.
    pub fn velocity(&self) -> Vec<f64> {
        (0..self.weights.len())
            .map(|i| self.q[i].sqrt() / self.sc0[i] * (self.hbar - self.mean_curvature[i]))
            .collect()
    }
}

pub(crate) fn sphere_factor(space: &SpaceParams) -> f64 {
    unit_sphere_volume(space.m_v()) * unit_sphere_volume(space.m_h() - 1)
}

pub fn profile_geometry(
    space: &SpaceParams,
    density: &BaseDensity,
    profile: &RadialProfile,
    sign: SignMode,
    lap_mode: LapMode,
) -> Result<ProfileGeometry> {
    let grid = BaseGrid::for_profile(space, density, profile);
    geometry_on(space, &grid, &profile.r, sign, lap_mode)
}

/// [`profile_geometry`] with the base-grid data precomputed.
pub fn geometry_on(
    space: &SpaceParams,
    grid: &BaseGrid,
    r: &[f64],
    sign: SignMode,
    lap_mode: LapMode,
) -> Result<ProfileGeometry> {
    let (rp, rpp) = derivatives_of(r, grid.h);
    let lap = laplacian_on(grid, &rp, &rpp, lap_mode);
    let n = grid.n;
    let mut hs = Vec::with_capacity(n + 1);
    let mut q = Vec::with_capacity(n + 1);
    let mut sc0 = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let pd = PointData { r: r[i], g: rp[i].abs(), lap: lap[i], hess: rp[i] * rp[i] * rpp[i] };
        let e = eval_point(space, &pd, sign)?;
        hs.push(e.mean_curvature);
        q.push(e.q);
        sc0.push(e.sc0);
        weights.push(grid.quad[i] * grid.f[i] * e.psi);
    }
    let total: f64 = weights.iter().sum();
    let hbar = weights.iter().zip(&hs).map(|(w, h)| w * h).sum::<f64>() / total;
    Ok(ProfileGeometry { rp, rpp, lap, mean_curvature: hs, q, sc0, weights, hbar })
}
pub fn vol_m(space: &SpaceParams, density: &BaseDensity, profile: &RadialProfile) -> Result<f64> {
    let geom = profile_geometry(space, density, profile, SignMode::Eq250, LapMode::Paper61)?;
    Ok(geom.vol_m(space))
}

/// `δ₁(s)` by composite Gauss–Legendre quadrature on fixed panels. Unlike the
/// adaptive rule this is a smooth function of `s`, which keeps volume
/// bookkeeping along a flow free of refinement-pattern jitter.
pub fn delta1_fixed(space: &SpaceParams, s: f64) -> f64 {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let rule = RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(20).unwrap()));
    let panels = (s / FIXED_PANEL).ceil().max(1.0) as usize;
    let width = s / panels as f64;
    (0..panels)
        .map(|j| {
            let a = j as f64 * width;
            rule.integrate(a, a + width, |x| delta1_integrand(space, x))
        })
        .sum()
}

/// `Vol(D) = v_{m^V} v_{m^H−1} ∫ δ₁(r(z)) f(z) dz` with grid Simpson weights.
pub fn vol_d(space: &SpaceParams, density: &BaseDensity, profile: &RadialProfile) -> Result<f64> {
    let grid = BaseGrid::for_profile(space, density, profile);
    vol_d_on(space, &grid, &profile.r)
}

pub fn vol_d_on(space: &SpaceParams, grid: &BaseGrid, r: &[f64]) -> Result<f64> {
    let focal = space.focal_radius();
    let mut sum = 0.0;
    for (i, &ri) in r.iter().enumerate() {
        if !(ri > 0.0 && ri < focal) {
            return Err(TubeError::RadiusOutOfRange { r: ri, focal });
        }
        sum += grid.quad[i] * grid.f[i] * delta1_fixed(space, ri);
    }
    Ok(sphere_factor(space) * sum)
}

/// `Vol(B)` with the same grid weights as [`vol_d`], so that ratios of the two
/// are exact for constant profiles.
pub fn vol_b_grid(space: &SpaceParams, density: &BaseDensity, profile: &RadialProfile) -> f64 {
    vol_b_on(space, &BaseGrid::for_profile(space, density, profile))
}

pub fn vol_b_on(space: &SpaceParams, grid: &BaseGrid) -> f64 {
    let sum: f64 = grid.quad.iter().zip(&grid.f).map(|(q, f)| q * f).sum();
    unit_sphere_volume(space.m_h() - 1) * sum
}

pub fn avg_h(
    space: &SpaceParams,
    density: &BaseDensity,
    profile: &RadialProfile,
    sign: SignMode,
    lap_mode: LapMode,
) -> Result<f64> {
    Ok(profile_geometry(space, density, profile, sign, lap_mode)?.hbar)
}

/// All computable constants and bounds. Entries that do not apply to the
/// curvature sign are NaN (serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub r_f: f64,
    pub r_hat1: f64,
    pub r_hat2: f64,
    pub a_rb: f64,
    pub prop63_bound: f64,
    pub c_prime: f64,
    pub hbar_lower: f64,
    pub k1: f64,
    pub k2: f64,
    pub vhat_bound: f64,
    pub thmc_lhs: f64,
    pub thmc_rhs: f64,
    pub thmc_satisfied: bool,
}

/// Extremes observed along a run, feeding the runtime monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observed {
    pub r_min: f64,
    pub r_max: f64,
    pub hbar_min: f64,
    pub hbar_max: f64,
}

impl Observed {
    pub fn new(r_min: f64, r_max: f64, hbar: f64) -> Self {
        Observed { r_min, r_max, hbar_min: hbar, hbar_max: hbar }
    }

    pub fn update(&mut self, r_min: f64, r_max: f64, hbar: f64) {
        self.r_min = self.r_min.min(r_min);
        self.r_max = self.r_max.max(r_max);
        self.hbar_min = self.hbar_min.min(hbar);
        self.hbar_max = self.hbar_max.max(hbar);
    }
}

/// Run-invariant data behind [`BoundsReport`], computed once from the
/// initial profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsContext {
    pub space: SpaceParams,
    pub sign: SignMode,
    pub vol_b: f64,
    pub vol_d0: f64,
    pub vol_m0: f64,
    pub hbar0: f64,
    pub r_hat1: f64,
    pub r_hat2: f64,
    pub a_rb: f64,
    pub prop63_bound: f64,
    pub thmc_lhs: f64,
    pub thmc_rhs: f64,
}

impl BoundsContext {
    pub fn new(
        space: &SpaceParams,
        density: &BaseDensity,
        profile0: &RadialProfile,
        sign: SignMode,
        lap_mode: LapMode,
    ) -> Result<Self> {
        let vm = unit_sphere_volume(space.m_v());
        let vh = unit_sphere_volume(space.m_h() - 1);
        let vol_b = vol_b_grid(space, density, profile0);
        let vol_d0 = vol_d(space, density, profile0)?;
        let geom = profile_geometry(space, density, profile0, sign, lap_mode)?;
        let vol_m0 = geom.vol_m(space);
        let r_hat1 = delta_inv(Delta::One, space, vol_d0 / (vm * vol_b))?;
        let d2_hat1 = delta2(space, r_hat1)?;
        let r_hat2 = delta_inv(Delta::Two, space, vol_m0 / vm + d2_hat1)?;
        let a_rb = match space.curvature {
            Curvature::Compact => density.eval(space, profile0.rb),
            Curvature::NonCompact => 1.0,
        };
        let prop63_bound = delta_inv(Delta::Two, space, d2_hat1 + vol_m0 / (a_rb * vm * vh))?;
        let (thmc_lhs, thmc_rhs) = match space.curvature {
            Curvature::NonCompact => (vol_m0, vh * vm * d2_hat1),
            Curvature::Compact => (f64::NAN, f64::NAN),
        };
        Ok(BoundsContext {
            space: space.clone(),
            sign,
            vol_b,
            vol_d0,
            vol_m0,
            hbar0: geom.hbar,
            r_hat1,
            r_hat2,
            a_rb,
            prop63_bound,
            thmc_lhs,
            thmc_rhs,
        })
    }

    pub fn thmc_satisfied(&self) -> bool {
        self.thmc_lhs <= self.thmc_rhs
    }

    /// Grid minimum of `ρψ` over radii in `[a, r_max]`, minimized over `g`.
    /// The `g`-term of the bracket is non-negative in eq250 mode, so `g = 0`
    /// realizes the infimum there; in eq34 mode it decreases towards
    /// `−k0 b tanh(k0 b r)` as `g → ∞`, and that limit is used.
    pub fn c_prime(&self, a: f64, r_max: f64) -> f64 {
        let space = &self.space;
        if space.curvature == Curvature::Compact {
            return f64::NAN;
        }
        let r_max = r_max.max(a);
        let mut best = f64::INFINITY;
        for j in 0..=C_PRIME_SAMPLES {
            let r = a + (r_max - a) * j as f64 / C_PRIME_SAMPLES as f64;
            // At g = 0 the prefactor sc/√Q is 1, so ρ is the bare bracket.
            let Ok(e) = eval_point(space, &PointData::at_rest(r), SignMode::Eq250) else {
                return f64::NAN;
            };
            let mut bracket = e.rho;
            if self.sign == SignMode::Eq34 {
                let k0b = space.k0 * space.b;
                bracket += k0b * space.tt(k0b * r);
            }
            best = best.min(bracket * e.psi);
        }
        best
    }

    pub fn hbar_lower(&self, a: f64, r_max: f64) -> f64 {
        a.powi(self.space.m_v() as i32) * self.c_prime(a, r_max) * self.vol_b / self.vol_m0
    }

    pub fn k1(&self, beta1: f64, beta2: f64) -> f64 {
        let space = &self.space;
        if space.curvature == Curvature::Compact {
            return f64::NAN;
        }
        let b = space.b;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (idx, &m) in space.mv.iter().enumerate() {
            let kb = (idx + 1) as f64 * b;
            s1 += m as f64 * kb * kb / (kb * beta1).sinh().powi(2);
            s2 += m as f64 * kb / (kb * beta1).tanh();
        }
        s1 + b * (b * beta2).tanh() * s2
    }

    pub fn k2(&self, beta1: f64, c_hat: f64) -> f64 {
        if self.space.curvature == Curvature::Compact {
            return f64::NAN;
        }
        let b = self.space.b;
        c_hat * b * (b * beta1).tanh()
    }

    /// `(K₁ + √(K₁² + 4K₂C))/2` with the observed `H̄` extremes standing in for
    /// `Ĉ` (minimum) and `C` (maximum).
    pub fn vhat_bound(&self, obs: &Observed) -> f64 {
        let k1 = self.k1(obs.r_min, obs.r_max);
        let k2 = self.k2(obs.r_min, obs.hbar_min);
        (k1 + (k1 * k1 + 4.0 * k2 * obs.hbar_max).sqrt()) / 2.0
    }

    pub fn report(&self, obs: &Observed) -> BoundsReport {
        BoundsReport {
            r_f: self.space.focal_radius(),
            r_hat1: self.r_hat1,
            r_hat2: self.r_hat2,
            a_rb: self.a_rb,
            prop63_bound: self.prop63_bound,
            c_prime: self.c_prime(obs.r_min, obs.r_max),
            hbar_lower: self.hbar_lower(obs.r_min, obs.r_max),
            k1: self.k1(obs.r_min, obs.r_max),
            k2: self.k2(obs.r_min, obs.hbar_min),
            vhat_bound: self.vhat_bound(obs),
            thmc_lhs: self.thmc_lhs,
            thmc_rhs: self.thmc_rhs,
            thmc_satisfied: self.thmc_satisfied(),
        }
    }
}

/// Bounds evaluated on the initial profile alone.
pub fn bounds_report(
    space: &SpaceParams,
    density: &BaseDensity,
    profile0: &RadialProfile,
    sign: SignMode,
    lap_mode: LapMode,
) -> Result<BoundsReport> {
    let ctx = BoundsContext::new(space, density, profile0, sign, lap_mode)?;
    let obs = Observed::new(profile0.min_r(), profile0.max_r(), ctx.hbar0);
    Ok(ctx.report(&obs))
}
