//! Grid-sampled radial profiles and their finite-difference derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TubeError};
use crate::quadrature::simpson_weights;
use crate::symspace::SpaceParams;

/// Smallest admissible cell count.
pub const MIN_CELLS: usize = 16;

/// Radius function `r(z)` sampled on the uniform grid `z_i = i·h`, `h = r_B/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub rb: f64,
    pub r: Vec<f64>,
}

impl RadialProfile {
    /// Checks positivity, grid size and (for ε = +1) the focal-radius range.
    pub fn new(rb: f64, r: Vec<f64>) -> Result<Self> {
        if !(rb > 0.0 && rb.is_finite()) {
            return Err(TubeError::InvalidProfile(format!("r_B must be positive, got {rb}")));
        }
        let n = r.len().saturating_sub(1);
        if n < MIN_CELLS {
            return Err(TubeError::InvalidProfile(format!(
                "need at least {MIN_CELLS} cells, got {n}"
            )));
        }
        if !n.is_multiple_of(2) {
            return Err(TubeError::InvalidProfile(format!(
                "cell count must be even for Simpson weights, got {n}"
            )));
        }
        if let Some(bad) = r.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(TubeError::InvalidProfile(format!("radius {bad} is not positive")));
        }
        Ok(RadialProfile { rb, r })
    }

    pub fn constant(rb: f64, n: usize, r0: f64) -> Result<Self> {
        Self::new(rb, vec![r0; n + 1])
    }

    /// `r0 + A·cos(πz/r_B)`, which satisfies the Neumann condition at both ends.
    pub fn cosine(rb: f64, n: usize, r0: f64, amplitude: f64) -> Result<Self> {
        let h = rb / n as f64;
        let r = (0..=n)
            .map(|i| r0 + amplitude * (std::f64::consts::PI * i as f64 * h / rb).cos())
            .collect();
        Self::new(rb, r)
    }

    pub fn from_fn(rb: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = rb / n as f64;
        Self::new(rb, (0..=n).map(|i| f(i as f64 * h)).collect())
    }

    pub fn check_range(&self, space: &SpaceParams) -> Result<()> {
        let focal = space.focal_radius();
        match self.r.iter().find(|v| !(**v > 0.0 && **v < focal)) {
            Some(&r) => Err(TubeError::RadiusOutOfRange { r, focal }),
            None => Ok(()),
        }
    }

    /// Number of cells `N`.
    pub fn n(&self) -> usize {
        self.r.len() - 1
    }

    pub fn h(&self) -> f64 {
        self.rb / self.n() as f64
    }

    pub fn z(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn min_r(&self) -> f64 {
        self.r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_r(&self) -> f64 {
        self.r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Central first and second differences with mirrored ghost points
/// `r_{-1} = r_1`, `r_{N+1} = r_{N-1}`.
pub fn derivatives(profile: &RadialProfile) -> (Vec<f64>, Vec<f64>) {
    derivatives_of(&profile.r, profile.h())
}

pub(crate) fn derivatives_of(r: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = r.len() - 1;
    let mut rp = vec![0.0; n + 1];
    let mut rpp = vec![0.0; n + 1];
    let h2 = h * h;
    rpp[0] = 2.0 * (r[1] - r[0]) / h2;
    rpp[n] = 2.0 * (r[n - 1] - r[n]) / h2;
    for i in 1..n {
        rp[i] = (r[i + 1] - r[i - 1]) / (2.0 * h);
        rpp[i] = (r[i + 1] - 2.0 * r[i] + r[i - 1]) / h2;
    }
    (rp, rpp)
}

/// Which operator stands in for `Δ_F r` on radial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LapMode {
    /// `Δ_F r = r''`.
    #[default]
    Paper61,
    /// `Δ_F r = r'' + μ r'` with `μ = (log f)'` the radial density drift.
    Full,
}

/// Radial density of the base ball: `f(z) = Π_k (ss(kbz)/(kb))^{m_k}` over
/// `k ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseDensity {
    pub mult: [u32; 2],
}

impl BaseDensity {
    /// Multiplicities taken from the horizontal roots `k = 1, 2` of the space.
    pub fn from_space(space: &SpaceParams) -> Self {
        BaseDensity { mult: [space.mh_of(1.0), space.mh_of(2.0)] }
    }

    pub fn total(&self) -> u32 {
        self.mult[0] + self.mult[1]
    }

    pub fn eval(&self, space: &SpaceParams, z: f64) -> f64 {
        let mut f = 1.0;
        for (idx, &m) in self.mult.iter().enumerate() {
            let kb = (idx + 1) as f64 * space.b;
            f *= (space.ss(kb * z) / kb).powi(m as i32);
        }
        f
    }

    /// `f'(z)/f(z) = Σ_k m_k kb ct(kbz)`; infinite at `z = 0` unless all
    /// multiplicities vanish.
    pub fn log_derivative(&self, space: &SpaceParams, z: f64) -> f64 {
        let mut mu = 0.0;
        for (idx, &m) in self.mult.iter().enumerate() {
            if m > 0 {
                let kb = (idx + 1) as f64 * space.b;
                mu += m as f64 * kb * space.ct(kb * z);
            }
        }
        mu
    }
}

/// Grid data that depends only on the base ball: Simpson weights, density
/// values and the density drift `μ = f'/f` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseGrid {
    pub rb: f64,
    pub n: usize,
    pub h: f64,
    pub quad: Vec<f64>,
    pub f: Vec<f64>,
    /// `μ(z_i)`; entry 0 is unused (the pole is handled by its limit).
    pub mu: Vec<f64>,
    /// Total density multiplicity `m`, so that `f ~ z^m` near the pole.
    pub m_total: u32,
}

impl BaseGrid {
    pub fn new(space: &SpaceParams, density: &BaseDensity, rb: f64, n: usize) -> Self {
        let h = rb / n as f64;
        let z = |i: usize| i as f64 * h;
        let mut mu: Vec<f64> = (0..=n).map(|i| density.log_derivative(space, z(i))).collect();
        mu[0] = 0.0;
        BaseGrid {
            rb,
            n,
            h,
            quad: simpson_weights(n, h),
            f: (0..=n).map(|i| density.eval(space, z(i))).collect(),
            mu,
            m_total: density.total(),
        }
    }

    pub fn for_profile(space: &SpaceParams, density: &BaseDensity, profile: &RadialProfile) -> Self {
        Self::new(space, density, profile.rb, profile.n())
    }

    pub fn z(&self, i: usize) -> f64 {
        i as f64 * self.h
    }
}

/// `Δ_F r` on the grid. In full mode the drift term at the pole is replaced by
/// its limit, giving `(1 + m)·r''(0)` with `m` the total density multiplicity.
pub fn laplacian_f(
    space: &SpaceParams,
    density: &BaseDensity,
    profile: &RadialProfile,
    mode: LapMode,
) -> Vec<f64> {
    let (rp, rpp) = derivatives(profile);
    laplacian_on(&BaseGrid::for_profile(space, density, profile), &rp, &rpp, mode)
}

pub fn laplacian_on(grid: &BaseGrid, rp: &[f64], rpp: &[f64], mode: LapMode) -> Vec<f64> {
    match mode {
        LapMode::Paper61 => rpp.to_vec(),
        LapMode::Full => {
            let mut lap = rpp.to_vec();
            lap[0] = (1.0 + grid.m_total as f64) * rpp[0];
            for i in 1..lap.len() {
                lap[i] += grid.mu[i] * rp[i];
            }
            lap
        }
    }
}

/// Four-point Lagrange interpolation of grid values at `z`, extending the data
/// across both ends by reflection (`odd` flips the sign, as for `r'`).
pub fn interp_cubic(values: &[f64], h: f64, z: f64, odd: bool) -> f64 {
    let n = values.len() - 1;
    let x = (z / h).clamp(0.0, n as f64);
    let i = (x.floor() as usize).min(n - 1);
    let t = x - i as f64;
    let sign = if odd { -1.0 } else { 1.0 };
    let at = |j: isize| -> f64 {
        if j < 0 {
            sign * values[(-j) as usize]
        } else if j as usize > n {
            sign * values[2 * n - j as usize]
        } else {
            values[j as usize]
        }
    };
    let i = i as isize;
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symspace::Curvature;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn hyp(mh: u32) -> SpaceParams {
        SpaceParams::rank_one(Curvature::NonCompact, 1.0, 1, 0, mh).unwrap()
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(RadialProfile::constant(1.0, 8, 0.5).is_err());
        assert!(RadialProfile::constant(1.0, 17, 0.5).is_err());
        assert!(RadialProfile::constant(0.0, 16, 0.5).is_err());
        assert!(RadialProfile::cosine(1.0, 16, 0.5, 0.6).is_err());
        let compact = SpaceParams::rank_one(Curvature::Compact, 1.0, 1, 1, 1).unwrap();
        let p = RadialProfile::constant(1.0, 16, 1.6).unwrap();
        assert!(p.check_range(&compact).is_err());
    }

    #[test]
    fn constant_profile_has_zero_derivatives() {
        let p = RadialProfile::constant(1.0, 32, 0.4).unwrap();
        let (rp, rpp) = derivatives(&p);
        assert!(rp.iter().chain(&rpp).all(|v| *v == 0.0));
        for mode in [LapMode::Paper61, LapMode::Full] {
            let lap = laplacian_f(&hyp(2), &BaseDensity::from_space(&hyp(2)), &p, mode);
            assert!(lap.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn endpoint_slopes_are_exactly_zero() {
        let p = RadialProfile::from_fn(1.0, 40, |z| 0.5 + 0.1 * z * z * (1.0 - z)).unwrap();
        let (rp, _) = derivatives(&p);
        assert_eq!(rp[0], 0.0);
        assert_eq!(rp[40], 0.0);
    }

    fn cosine_error(n: usize) -> (f64, f64) {
        let (r0, a, rb) = (0.5, 0.1, 1.0);
        let p = RadialProfile::cosine(rb, n, r0, a).unwrap();
        let (rp, rpp) = derivatives(&p);
        let w = PI / rb;
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for i in 0..=n {
            let z = p.z(i);
            e1 = e1.max((rp[i] + a * w * (w * z).sin()).abs());
            e2 = e2.max((rpp[i] + a * w * w * (w * z).cos()).abs());
        }
        (e1, e2)
    }

    #[test]
    fn stencils_are_second_order() {
        let (a1, a2) = cosine_error(50);
        let (b1, b2) = cosine_error(100);
        assert!((a1 / b1 - 4.0).abs() < 1.0, "{}", a1 / b1);
        assert!((a2 / b2 - 4.0).abs() < 1.0, "{}", a2 / b2);
    }

    #[test]
    fn full_laplacian_matches_symbolic_value() {
        // r = z^2 over a base with f = sinh^2 z: r'' + 2 coth(z) r' = 2 + 4 z coth z.
        let space = hyp(2);
        let density = BaseDensity::from_space(&space);
        let p = RadialProfile::from_fn(1.0, 200, |z| 0.1 + z * z).unwrap();
        let lap = laplacian_f(&space, &density, &p, LapMode::Full);
        assert_relative_eq!(lap[100], 6.327906827477306, epsilon = 1e-9);
    }

    #[test]
    fn density_oracle() {
        let space = hyp(2);
        let f = BaseDensity::from_space(&space).eval(&space, 0.5);
        assert_relative_eq!(f, 0.2715403174076219, epsilon = 1e-15);
        assert_eq!(BaseDensity::from_space(&space).eval(&space, 0.0), 0.0);
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics_and_reflects() {
        let h = 0.1;
        let vals: Vec<f64> = (0..=20).map(|i| {
            let z = i as f64 * h;
            1.0 + z * z * (3.0 - z)
        }).collect();
        let z = 0.737;
        assert_relative_eq!(interp_cubic(&vals, h, z, false), 1.0 + z * z * (3.0 - z), epsilon = 1e-13);
        assert_eq!(interp_cubic(&vals, h, 0.0, false), vals[0]);
        assert_eq!(interp_cubic(&vals, h, 2.0, false), vals[20]);
        // An odd field vanishes at the mirror points.
        let odd: Vec<f64> = (0..=20).map(|i| (i as f64 * h * PI / 2.0).sin()).collect();
        assert_relative_eq!(interp_cubic(&odd, h, 0.0, true), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn modes_agree_at_extrema() {
        let space = hyp(1);
        let density = BaseDensity::from_space(&space);
        let p = RadialProfile::cosine(1.0, 64, 0.5, 0.05).unwrap();
        let a = laplacian_f(&space, &density, &p, LapMode::Paper61);
        let b = laplacian_f(&space, &density, &p, LapMode::Full);
        assert_eq!(a[64], b[64]);
    }
}
