//! Preset ambient/submanifold pairs.
//!
//! Rank-one pairs are named after the ambient space and the invariant
//! submanifold, e.g. `CH3/CH1` is a complex line in complex hyperbolic
//! 3-space. Any pair of the families `RH`, `CH`, `QH`, `OH` (non-compact) and
//! `S`, `CP`, `HP`, `OP` (compact) can be looked up, not only the listed
//! presets. Multiplicities come from the eigenvalues `k²b²` of `R(·, ξ)ξ` for a
//! unit normal `ξ`: the `2β` eigenspace is the span of `Jξ` (complex), of
//! `Iξ, Jξ, Kξ` (quaternionic) or its 7-dimensional octonionic analogue.

use serde::Serialize;

use super::{Curvature, RootMult, SpaceParams};
use crate::error::{Result, TubeError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub params: SpaceParams,
    /// Multiplicities `(k = 1, k = 2)` of the base-radial density of `F`.
    pub density_mult: [u32; 2],
    pub b_default: f64,
    /// Names-only rows (rank-two ambient spaces); rejected by the flow.
    pub informational: bool,
    pub notes: String,
}

const PRESETS: &[&str] = &[
    "RH3/RH1", "RH4/RH1", "RH4/RH2", "CH2/CH1", "CH3/CH1", "CH3/CH2", "QH2/QH1", "QH3/QH1",
    "OH2/OH1", "S3/S1", "S4/S2", "CP2/CP1", "CP3/CP1", "HP2/HP1", "OP2/OP1",
];

/// Meridians of irreducible rank-two symmetric spaces of compact type.
/// Columns: name, vertical multiplicities of the polar, horizontal
/// multiplicities `(k, m)`, k0, notes.
type MeridianRow = (&'static str, [u32; 2], &'static [(f64, u32)], f64, &'static str);

const MERIDIANS: &[MeridianRow] = &[
    (
        "SU(3)/SO(3) meridian",
        [1, 0],
        &[(1.0, 2), (2.0, 1)],
        2.0,
        "F = S1.S2, polar RP2, D = TS1; K = {1,2}",
    ),
    (
        "SU(6)/Sp(3) meridian",
        [4, 3],
        &[(1.0, 5), (2.0, 1)],
        2.0,
        "F = S1.S5, polar QP2, D = TS1; K = {1,2}",
    ),
    (
        "SU(3) meridian",
        [2, 1],
        &[(1.0, 3), (2.0, 1)],
        2.0,
        "F = S1.S3, polar CP2, D = TS1; K = {1,2}",
    ),
    (
        "E6/F4 meridian",
        [8, 7],
        &[(1.0, 9), (2.0, 1)],
        2.0,
        "F = S1.S9, polar OP2, D = TS1; K = {1,2}",
    ),
    (
        "Sp(2) meridian",
        [3, 0],
        &[(0.0, 3), (1.0, 3)],
        1.0,
        "F = Sp(1)xSp(1), polar S4, D = one of the TSp(1) factors; K = {1}",
    ),
];

/// All presets followed by the informational meridian rows.
pub fn catalog() -> Vec<CatalogEntry> {
    PRESETS
        .iter()
        .map(|name| catalog_lookup(name).expect("preset names parse"))
        .chain(MERIDIANS.iter().map(meridian_entry))
        .collect()
}

pub fn catalog_lookup(name: &str) -> Result<CatalogEntry> {
    if let Some(row) = MERIDIANS.iter().find(|row| row.0 == name) {
        return Ok(meridian_entry(row));
    }
    parse_rank_one(name).ok_or_else(|| TubeError::UnknownCatalogEntry(name.to_string()))
}

fn meridian_entry(row: &MeridianRow) -> CatalogEntry {
    let (name, mv, mh, k0, notes) = *row;
    let mh: Vec<RootMult> = mh.iter().map(|&(k, mult)| RootMult { k, mult }).collect();
    let density_mult = [
        mh.iter().find(|rm| rm.k == 1.0).map_or(0, |rm| rm.mult),
        mh.iter().find(|rm| rm.k == 2.0).map_or(0, |rm| rm.mult),
    ];
    CatalogEntry {
        name: name.to_string(),
        params: SpaceParams { curvature: Curvature::Compact, b: 1.0, mv, mh, k0 },
        density_mult,
        b_default: 1.0,
        informational: true,
        notes: format!("{notes}; multiplicity split is dimension-derived, supply your own"),
    }
}

#[derive(Clone, Copy)]
enum Field {
    Real,
    Complex,
    Quaternion,
    Octonion,
}

impl Field {
    fn dim(self) -> u32 {
        match self {
            Field::Real => 1,
            Field::Complex => 2,
            Field::Quaternion => 4,
            Field::Octonion => 8,
        }
    }
}

fn split_family(token: &str) -> Option<(Curvature, Field, u32)> {
    const PREFIXES: &[(&str, Curvature, Field)] = &[
        ("RH", Curvature::NonCompact, Field::Real),
        ("CH", Curvature::NonCompact, Field::Complex),
        ("QH", Curvature::NonCompact, Field::Quaternion),
        ("OH", Curvature::NonCompact, Field::Octonion),
        ("CP", Curvature::Compact, Field::Complex),
        ("HP", Curvature::Compact, Field::Quaternion),
        ("OP", Curvature::Compact, Field::Octonion),
        ("S", Curvature::Compact, Field::Real),
    ];
    PREFIXES.iter().find_map(|&(prefix, curvature, field)| {
        let n = token.strip_prefix(prefix)?.parse().ok()?;
        Some((curvature, field, n))
    })
}

fn parse_rank_one(name: &str) -> Option<CatalogEntry> {
    let (ambient, sub) = name.split_once('/')?;
    let (curv_a, field_a, n) = split_family(ambient.trim())?;
    let (curv_s, field_s, p) = split_family(sub.trim())?;
    if curv_a != curv_s || field_a.dim() != field_s.dim() || p == 0 || n <= p {
        return None;
    }
    let d = field_a.dim();
    if d == 8 && (n != 2 || p != 1) {
        return None;
    }
    // For the real family the ambient index is the real dimension.
    let (codim, dim_f) = match field_a {
        Field::Real => (n - p, p),
        _ => (d * (n - p), d * p),
    };
    let mv2 = d - 1;
    let mv1 = codim - 1 - mv2;
    if mv1 + mv2 == 0 {
        return None;
    }
    let params = SpaceParams {
        curvature: curv_a,
        b: 1.0,
        mv: [mv1, mv2],
        mh: vec![RootMult { k: 1.0, mult: dim_f }],
        k0: 1.0,
    };
    params.validate().ok()?;
    let notes = format!(
        "codim {codim}, dim F {dim_f}; normal eigenvalues b^2 (x{mv1}) and 4b^2 (x{mv2})"
    );
    Some(CatalogEntry {
        name: name.to_string(),
        params,
        density_mult: [dim_f, 0],
        b_default: 1.0,
        informational: false,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mults(name: &str) -> ([u32; 2], u32, Curvature) {
        let e = catalog_lookup(name).unwrap();
        (e.params.mv, e.params.m_h(), e.params.curvature)
    }

    #[test]
    fn hyperbolic_presets() {
        assert_eq!(mults("RH3/RH1"), ([1, 0], 1, Curvature::NonCompact));
        assert_eq!(mults("CH2/CH1"), ([0, 1], 2, Curvature::NonCompact));
        assert_eq!(mults("CH3/CH1"), ([2, 1], 2, Curvature::NonCompact));
        assert_eq!(mults("QH2/QH1"), ([0, 3], 4, Curvature::NonCompact));
        assert_eq!(mults("OH2/OH1"), ([0, 7], 8, Curvature::NonCompact));
    }

    #[test]
    fn real_family_matches_codim_minus_one() {
        for (n, p) in [(3u32, 1u32), (5, 2), (7, 3)] {
            let (mv, mh, _) = mults(&format!("RH{n}/RH{p}"));
            assert_eq!(mv, [n - 1 - p, 0]);
            assert_eq!(mh, p);
        }
    }

    #[test]
    fn complex_family_formula() {
        for (m, p) in [(2u32, 1u32), (4, 1), (5, 3)] {
            let (mv, mh, _) = mults(&format!("CH{m}/CH{p}"));
            assert_eq!(mv, [2 * (m - p) - 2, 1]);
            assert_eq!(mh, 2 * p);
        }
    }

    #[test]
    fn meridian_rows_are_informational() {
        let e = catalog_lookup("SU(3)/SO(3) meridian").unwrap();
        assert!(e.informational);
        assert!(!e.params.is_invariant_mode());
        assert_eq!(e.params.k_set().count(), 2);
    }

    #[test]
    fn unknown_names_fail() {
        for bad in ["RH3/CH1", "CH1/CH2", "OH3/OH1", "RH2/RH1", "XX", "S3"] {
            assert!(catalog_lookup(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn catalog_is_complete_and_valid() {
        let all = catalog();
        assert_eq!(all.len(), PRESETS.len() + MERIDIANS.len());
        for e in &all {
            e.params.validate().unwrap();
        }
    }
}
