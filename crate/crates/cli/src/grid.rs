//! Sweep grids: `r0=0.3,0.5,0.7;amplitude=0.01,0.05`. The first axis is
//! indexed by `i`, the optional second by `j`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    R0,
    Amplitude,
    Rb,
}

impl Axis {
    pub fn apply(self, cfg: &mut RunConfig, value: f64) {
        match self {
            Axis::R0 => cfg.init.r0 = value,
            Axis::Amplitude => cfg.init.amplitude = value,
            Axis::Rb => cfg.base.rb = value,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::R0 => "r0",
            Axis::Amplitude => "amplitude",
            Axis::Rb => "rb",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<(Axis, Vec<f64>)>,
}

impl GridSpec {
    /// Cells in row-major order as `(i, j)`; `j` is 0 for a one-axis grid.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let ni = self.axes[0].1.len();
        let nj = self.axes.get(1).map_or(1, |a| a.1.len());
        (0..ni).flat_map(|i| (0..nj).map(move |j| (i, j))).collect()
    }

    pub fn apply(&self, cfg: &mut RunConfig, (i, j): (usize, usize)) {
        let (axis, values) = &self.axes[0];
        axis.apply(cfg, values[i]);
        if let Some((axis, values)) = self.axes.get(1) {
            axis.apply(cfg, values[j]);
        }
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut axes: Vec<(Axis, Vec<f64>)> = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, list) = part.split_once('=').ok_or_else(|| format!("expected `axis=v1,v2,...`, got `{part}`"))?;
            let axis = match name.trim() {
                "r0" => Axis::R0,
                "amplitude" | "A" => Axis::Amplitude,
                "rb" => Axis::Rb,
                other => return Err(format!("unknown sweep axis `{other}` (use r0, amplitude or rb)")),
            };
            if axes.iter().any(|(a, _)| *a == axis) {
                return Err(format!("axis `{axis}` given twice"));
            }
            let values = list
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| format!("axis `{axis}`: `{v}`: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            if values.is_empty() {
                return Err(format!("axis `{axis}` has no values"));
            }
            axes.push((axis, values));
        }
        match axes.len() {
            1 | 2 => Ok(GridSpec { axes }),
            0 => Err("empty grid".into()),
            _ => Err("at most two sweep axes".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_axes() {
        let g: GridSpec = "r0=0.3,0.5,0.7; amplitude=0.01,0.05".parse().unwrap();
        assert_eq!(g.axes[0], (Axis::R0, vec![0.3, 0.5, 0.7]));
        assert_eq!(g.cells().len(), 6);
        assert_eq!(g.cells()[1], (0, 1));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!("r0=0.3;r0=0.5".parse::<GridSpec>().is_err());
        assert!("depth=1".parse::<GridSpec>().is_err());
        assert!("r0=a".parse::<GridSpec>().is_err());
        assert!("r0=1;amplitude=1;rb=1".parse::<GridSpec>().is_err());
    }
}
