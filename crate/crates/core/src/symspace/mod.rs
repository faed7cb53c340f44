//! Root-space data of a rank-one symmetric space and the unified
//! trigonometric/hyperbolic kernels.
//!
//! Every closed-form expression in the tube geometry is written in terms of
//! `cos(√ε θ)`, `sin(√ε θ)/√ε` and their ratios. The kernels [`SpaceParams::sc`],
//! [`SpaceParams::ss`], [`SpaceParams::tt`] and [`SpaceParams::ct`] evaluate
//! these for both signs of ε without complex arithmetic:
//!
//! | kernel | ε = +1   | ε = −1    |
//! |--------|----------|-----------|
//! | `sc`   | cos θ    | cosh θ    |
//! | `ss`   | sin θ    | sinh θ    |
//! | `tt`   | tan θ    | −tanh θ   |
//! | `ct`   | cot θ    | coth θ    |

mod catalog;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TubeError};

pub use catalog::{catalog, catalog_lookup, CatalogEntry};

/// Sign of the sectional curvature of the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    /// ε = +1, trigonometric kernels.
    Compact,
    /// ε = −1, hyperbolic kernels.
    NonCompact,
}

impl Curvature {
    pub fn epsilon(self) -> f64 {
        match self {
            Curvature::Compact => 1.0,
            Curvature::NonCompact => -1.0,
        }
    }

    pub fn from_sign(eps: i32) -> Result<Self> {
        match eps {
            1 => Ok(Curvature::Compact),
            -1 => Ok(Curvature::NonCompact),
            other => Err(TubeError::InvalidSpace(format!(
                "epsilon must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// Multiplicity of the root `k·β` restricted to the tangent space of `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootMult {
    pub k: f64,
    pub mult: u32,
}

/// Root-space parameters fixing every closed-form coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub curvature: Curvature,
    /// Root scale `b = |β(X₀)|`.
    pub b: f64,
    /// Vertical multiplicities `m^V_1`, `m^V_2`.
    pub mv: [u32; 2],
    /// Horizontal multiplicities over `K ∪ {0}`.
    pub mh: Vec<RootMult>,
    /// Eigenspace index of `grad r`.
    pub k0: f64,
}

impl SpaceParams {
    /// Invariant-submanifold parameters: `K = {1}`, `k0 = 1`.
    pub fn rank_one(curvature: Curvature, b: f64, mv1: u32, mv2: u32, mh: u32) -> Result<Self> {
        let space = SpaceParams {
            curvature,
            b,
            mv: [mv1, mv2],
            mh: vec![RootMult { k: 1.0, mult: mh }],
            k0: 1.0,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(TubeError::InvalidSpace(format!("b must be positive, got {}", self.b)));
        }
        if self.m_v() < 1 {
            return Err(TubeError::InvalidSpace("m^V = m^V_1 + m^V_2 must be at least 1".into()));
        }
        if self.m_h() < 1 {
            return Err(TubeError::InvalidSpace("m^H must be at least 1".into()));
        }
        for (i, rm) in self.mh.iter().enumerate() {
            if !(rm.k >= 0.0 && rm.k.is_finite()) {
                return Err(TubeError::InvalidSpace(format!("root index k = {} must be >= 0", rm.k)));
            }
            if self.mh[..i].iter().any(|other| other.k == rm.k) {
                return Err(TubeError::InvalidSpace(format!("root index k = {} listed twice", rm.k)));
            }
        }
        let k0_known = self.k0 == 0.0 || self.mh.iter().any(|rm| rm.k == self.k0);
        if !k0_known {
            return Err(TubeError::InvalidSpace(format!(
                "k0 = {} is not an element of K ∪ {{0}}",
                self.k0
            )));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.curvature.epsilon()
    }

    pub fn m_v(&self) -> u32 {
        self.mv[0] + self.mv[1]
    }

    pub fn m_h(&self) -> u32 {
        self.mh.iter().map(|rm| rm.mult).sum()
    }

    /// Multiplicity `m^H_k`, zero when `k` is not listed.
    pub fn mh_of(&self, k: f64) -> u32 {
        self.mh.iter().find(|rm| rm.k == k).map_or(0, |rm| rm.mult)
    }

    /// The positive root indices `K`.
    pub fn k_set(&self) -> impl Iterator<Item = &RootMult> {
        self.mh.iter().filter(|rm| rm.k > 0.0)
    }

    /// `K = {1}` and `k0 = 1`, the setting in which the radial flow is defined.
    pub fn is_invariant_mode(&self) -> bool {
        let mut ks = self.k_set();
        matches!((ks.next(), ks.next()), (Some(rm), None) if rm.k == 1.0)
            && self.mh_of(0.0) == 0
            && self.k0 == 1.0
    }

    /// `cos(√ε θ)`.
    #[inline]
    pub fn sc(&self, theta: f64) -> f64 {
        match self.curvature {
            Curvature::Compact => theta.cos(),
            Curvature::NonCompact => theta.cosh(),
        }
    }

    /// `sin(√ε θ)/√ε`.
    #[inline]
    pub fn ss(&self, theta: f64) -> f64 {
        match self.curvature {
            Curvature::Compact => theta.sin(),
            Curvature::NonCompact => theta.sinh(),
        }
    }

    /// `√ε tan(√ε θ) = ε·ss/sc`.
    #[inline]
    pub fn tt(&self, theta: f64) -> f64 {
        match self.curvature {
            Curvature::Compact => theta.tan(),
            Curvature::NonCompact => -theta.tanh(),
        }
    }

    /// `√ε / tan(√ε θ) = sc/ss`. Infinite at θ = 0; see [`Self::ct_checked`].
    #[inline]
    pub fn ct(&self, theta: f64) -> f64 {
        match self.curvature {
            Curvature::Compact => theta.cos() / theta.sin(),
            Curvature::NonCompact => 1.0 / theta.tanh(),
        }
    }

    /// `(sc(θ), ss(θ))` from a single transcendental evaluation.
    #[inline]
    pub fn sc_ss(&self, theta: f64) -> (f64, f64) {
        match self.curvature {
            Curvature::Compact => {
                let (s, c) = theta.sin_cos();
                (c, s)
            }
            Curvature::NonCompact => {
                // expm1 keeps sinh accurate for small arguments.
                let em1 = theta.exp_m1();
                let e = em1 + 1.0;
                (0.5 * (e + 1.0 / e), 0.5 * (em1 + em1 / e))
            }
        }
    }

    pub fn ct_checked(&self, theta: f64) -> Result<f64> {
        if theta == 0.0 {
            return Err(TubeError::Pole(theta));
        }
        Ok(self.ct(theta))
    }

    /// `ss(θ)/θ`, continuous at θ = 0.
    #[inline]
    pub fn ss_over(&self, theta: f64) -> f64 {
        if theta.abs() < 1e-8 {
            1.0 - self.epsilon() * theta * theta / 6.0
        } else {
            self.ss(theta) / theta
        }
    }

    /// Focal radius of the tube family: the smallest radius at which the
    /// normal exponential map degenerates. Infinite in the non-compact case.
    pub fn focal_radius(&self) -> f64 {
        match self.curvature {
            Curvature::NonCompact => f64::INFINITY,
            Curvature::Compact => {
                let extra = if self.mv[1] != 0 { 1.0 } else { 0.5 };
                self.k_set()
                    .map(|rm| rm.k)
                    .chain(std::iter::once(extra))
                    .map(|k| PI / (2.0 * k * self.b))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hyperbolic() -> SpaceParams {
        SpaceParams::rank_one(Curvature::NonCompact, 1.0, 1, 0, 1).unwrap()
    }

    fn compact(mv2: u32) -> SpaceParams {
        SpaceParams::rank_one(Curvature::Compact, 1.0, 1, mv2, 1).unwrap()
    }

    #[test]
    fn kernels_at_identity() {
        assert_eq!(compact(1).sc(0.0), 1.0);
        assert_eq!(hyperbolic().sc(0.0), 1.0);
        assert_eq!(hyperbolic().ss(0.0), 0.0);
    }

    #[test]
    fn hyperbolic_tt_carries_minus_sign() {
        let s = hyperbolic();
        assert_relative_eq!(s.tt(1.0), -0.761_594_155_955_764_9, epsilon = 1e-15);
        assert_relative_eq!(s.tt(1.0) * s.sc(1.0), s.epsilon() * s.ss(1.0), epsilon = 1e-15);
    }

    #[test]
    fn cot_of_quarter_pi() {
        assert_relative_eq!(compact(1).ct(PI / 4.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ct_pole_is_signalled() {
        assert_eq!(hyperbolic().ct_checked(0.0), Err(TubeError::Pole(0.0)));
        assert!(hyperbolic().ct_checked(0.3).is_ok());
    }

    #[test]
    fn focal_radius_branches() {
        assert_eq!(compact(1).focal_radius(), PI / 2.0);
        // K = {1} always contributes pi/(2b), whatever m^V_2 is.
        assert_eq!(compact(0).focal_radius(), PI / 2.0);
        // With K empty only the conjugate-radius entry remains.
        let no_roots = SpaceParams {
            curvature: Curvature::Compact,
            b: 1.0,
            mv: [1, 0],
            mh: vec![RootMult { k: 0.0, mult: 2 }],
            k0: 0.0,
        };
        assert_eq!(no_roots.focal_radius(), PI);
        let mut with_v2 = no_roots.clone();
        with_v2.mv = [1, 1];
        assert_eq!(with_v2.focal_radius(), PI / 2.0);
        assert_eq!(hyperbolic().focal_radius(), f64::INFINITY);
    }

    #[test]
    fn enlarging_k_never_increases_focal_radius() {
        let mut s = compact(0);
        let before = s.focal_radius();
        s.mh.push(RootMult { k: 2.0, mult: 1 });
        assert!(s.focal_radius() <= before);
        let before = s.focal_radius();
        s.mh.push(RootMult { k: 3.0, mult: 1 });
        assert!(s.focal_radius() <= before);
        s.mh.pop();
        assert!(s.focal_radius() <= before);
        assert_eq!(s.focal_radius(), PI / 4.0);
    }

    #[test]
    fn validation_rejects_degenerate_input() {
        assert!(SpaceParams::rank_one(Curvature::NonCompact, 0.0, 1, 0, 1).is_err());
        assert!(SpaceParams::rank_one(Curvature::NonCompact, 1.0, 0, 0, 1).is_err());
        assert!(SpaceParams::rank_one(Curvature::NonCompact, 1.0, 1, 0, 0).is_err());
        let mut s = hyperbolic();
        s.k0 = 2.0;
        assert!(s.validate().is_err());
        assert!(Curvature::from_sign(0).is_err());
    }

    #[test]
    fn invariant_mode_detection() {
        assert!(hyperbolic().is_invariant_mode());
        let mut s = hyperbolic();
        s.mh.push(RootMult { k: 2.0, mult: 1 });
        assert!(!s.is_invariant_mode());
    }

    #[test]
    fn paired_kernels_match_separate_calls() {
        for s in [hyperbolic(), compact(1)] {
            for theta in [1e-9, 1e-3, 0.4, 1.0, 1.5, 3.0] {
                let (c, sn) = s.sc_ss(theta);
                assert_relative_eq!(c, s.sc(theta), max_relative = 4e-16);
                assert_relative_eq!(sn, s.ss(theta), max_relative = 4e-16);
            }
        }
    }

    #[test]
    fn ss_over_is_continuous_at_zero() {
        let s = hyperbolic();
        assert_eq!(s.ss_over(0.0), 1.0);
        assert_relative_eq!(s.ss_over(1e-9), 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.ss_over(0.5), 0.5f64.sinh() / 0.5, epsilon = 1e-15);
    }
}
