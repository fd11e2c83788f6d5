//! Simulation configuration.
//!
//! The on-disk format is a small TOML subset: `[section]` headers, one
//! `key = value` per line and `#` comments. Every key is optional; omitted
//! keys take the values of a base configuration (the `paper-3d` preset unless
//! a preset is chosen explicitly). Units are fixed: millimetres and days.
//!
//! ```toml
//! [model]
//! rho = 0.025          # proliferation rate, 1/day
//! d_white = 0.13       # white matter diffusivity, mm^2/day
//! d_gray = 0.013       # gray matter diffusivity, mm^2/day
//!
//! [grid]
//! nx = 50
//! ny = 50
//! nz = 50              # nz = 1 selects a 2D simulation
//! spacing = 4.081632653061225
//! origin = [0.0, 0.0, 0.0]
//!
//! [time]
//! t0 = 150.0
//! t_end = 3500.0
//! num_steps = 100
//! action_tol = 1e-8    # tolerance of the exponential action kernel
//!
//! [seed]
//! center = [102.0, 138.0, 96.0]
//! amplitude = 0.1
//! width = 10.0         # 1/mm^2
//!
//! [imaging]
//! air_max = 1          # intensity <= air_max is air
//! white_max = 230      # air_max < v <= white_max is white matter
//! gray_max = 240       # white_max < v <= gray_max is gray matter, above is skull
//! # pixel_spacing = 0.35   (mm, optional, informational)
//! # slice_thickness = 6.0  (mm, optional, informational)
//!
//! [output]
//! snapshot_every = 2
//! metrics_every = 1
//! radius_threshold = 0.1
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imaging::Thresholds;

/// Full set of simulation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub model: ModelParams,
    pub grid: GridParams,
    pub time: TimeParams,
    pub seed: SeedParams,
    pub imaging: ImagingParams,
    pub output: OutputParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Proliferation rate ρ, day⁻¹.
    pub rho: f64,
    /// White matter diffusivity, mm²·day⁻¹.
    pub d_white: f64,
    /// Gray matter diffusivity, mm²·day⁻¹.
    pub d_gray: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Lattice spacing h, mm.
    pub spacing: f64,
    pub origin: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeParams {
    pub t0: f64,
    pub t_end: f64,
    pub num_steps: usize,
    pub action_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedParams {
    pub center: [f64; 3],
    pub amplitude: f64,
    /// Gaussian width coefficient, mm⁻².
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingParams {
    pub air_max: u8,
    pub white_max: u8,
    pub gray_max: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_thickness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputParams {
    pub snapshot_every: usize,
    pub metrics_every: usize,
    pub radius_threshold: f64,
}

/// Built-in parameter sets reproducing the published experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 50³ points over a 200 mm cube, 100 steps from day 150 to day 3500.
    Paper3d,
    /// One 193×193 slice over a 200 mm square, 100 steps.
    Paper2d,
    /// The 3D setup on a 32³ lattice.
    Bench32,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Paper3d, Preset::Paper2d, Preset::Bench32];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Paper3d => "paper-3d",
            Preset::Paper2d => "paper-2d",
            Preset::Bench32 => "bench-32",
        }
    }

    pub fn config(self) -> SimConfig {
        let base = SimConfig::paper_3d();
        match self {
            Preset::Paper3d => base,
            Preset::Paper2d => SimConfig {
                grid: GridParams {
                    nx: 193,
                    ny: 193,
                    nz: 1,
                    spacing: 200.0 / 192.0,
                    origin: [0.0; 3],
                },
                seed: SeedParams {
                    center: [110.0, 140.0, 0.0],
                    ..base.seed.clone()
                },
                ..base
            },
            Preset::Bench32 => base.with_resolution(32),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::InvalidInput(format!(
                    "unknown preset `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::paper_3d()
    }
}

const DOMAIN_EDGE_MM: f64 = 200.0;

impl SimConfig {
    fn paper_3d() -> Self {
        SimConfig {
            model: ModelParams {
                rho: 0.025,
                d_white: 0.13,
                d_gray: 0.013,
            },
            grid: GridParams {
                nx: 50,
                ny: 50,
                nz: 50,
                spacing: DOMAIN_EDGE_MM / 49.0,
                origin: [0.0; 3],
            },
            time: TimeParams {
                t0: 150.0,
                t_end: 3500.0,
                num_steps: 100,
                action_tol: 1e-8,
            },
            seed: SeedParams {
                center: [102.0, 138.0, 96.0],
                amplitude: 0.1,
                width: 10.0,
            },
            imaging: ImagingParams {
                air_max: 1,
                white_max: 230,
                gray_max: 240,
                pixel_spacing: None,
                slice_thickness: None,
            },
            output: OutputParams {
                snapshot_every: 2,
                metrics_every: 1,
                radius_threshold: 0.1,
            },
        }
    }

    /// Same physical box resampled with `n` points on every active axis.
    pub fn with_resolution(mut self, n: usize) -> Self {
        let g = &mut self.grid;
        let extent = (g.nx.max(g.ny).max(g.nz) - 1) as f64 * g.spacing;
        for axis in [&mut g.nx, &mut g.ny, &mut g.nz] {
            if *axis > 1 {
                *axis = n;
            }
        }
        g.spacing = extent / (n - 1) as f64;
        self
    }

    /// Reads a config file layered over the default (`paper-3d`) values.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_over(path, SimConfig::default())
    }

    /// Reads a config file layered over `base`.
    pub fn load_over(path: &Path, base: SimConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_over(&text, base)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_over(text, SimConfig::default())
    }

    /// Parses `text` and fills every omitted key from `base`.
    pub fn parse_over(text: &str, base: SimConfig) -> Result<Self> {
        let overrides: toml::Table =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let mut merged = toml::Table::try_from(&base)
            .map_err(|e| Error::ConfigParse(format!("serializing base config: {e}")))?;
        for (section, value) in overrides {
            match (merged.get_mut(&section), value) {
                (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => dst.extend(src),
                (Some(_), _) => {
                    return Err(Error::config(&section, "expected a [section] table"));
                }
                (None, _) => return Err(Error::config(&section, "unknown section")),
            }
        }
        let cfg: SimConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Checks every cross-field invariant, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be finite"))
            }
        };
        finite("model.rho", m.rho)?;
        finite("model.d_white", m.d_white)?;
        finite("model.d_gray", m.d_gray)?;
        if m.rho < 0.0 {
            return Err(Error::config("model.rho", "must be non-negative"));
        }
        if m.d_gray < 0.0 {
            return Err(Error::config("model.d_gray", "must be non-negative"));
        }
        if m.d_white < m.d_gray {
            return Err(Error::config("model.d_white", "must be at least d_gray"));
        }

        let g = &self.grid;
        for (key, n) in [("grid.nx", g.nx), ("grid.ny", g.ny), ("grid.nz", g.nz)] {
            if n == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if !(g.spacing > 0.0 && g.spacing.is_finite()) {
            return Err(Error::config("grid.spacing", "must be positive"));
        }
        if g.origin.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("grid.origin", "must be finite"));
        }

        let t = &self.time;
        finite("time.t0", t.t0)?;
        finite("time.t_end", t.t_end)?;
        if t.t_end <= t.t0 {
            return Err(Error::config("time.t_end", "must be greater than t0"));
        }
        if t.num_steps == 0 {
            return Err(Error::config("time.num_steps", "must be at least 1"));
        }
        if !(t.action_tol > 0.0 && t.action_tol < 1.0) {
            return Err(Error::config("time.action_tol", "must lie in (0, 1)"));
        }

        let s = &self.seed;
        if s.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("seed.center", "must be finite"));
        }
        finite("seed.amplitude", s.amplitude)?;
        if !(s.width >= 0.0 && s.width.is_finite()) {
            return Err(Error::config("seed.width", "must be non-negative"));
        }

        let im = &self.imaging;
        if !(im.air_max < im.white_max && im.white_max < im.gray_max) {
            return Err(Error::config(
                "imaging.white_max",
                "thresholds must satisfy air_max < white_max < gray_max",
            ));
        }
        for (key, v) in [
            ("imaging.pixel_spacing", im.pixel_spacing),
            ("imaging.slice_thickness", im.slice_thickness),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(key, "must be positive"));
                }
            }
        }

        let o = &self.output;
        if o.snapshot_every == 0 {
            return Err(Error::config("output.snapshot_every", "must be at least 1"));
        }
        if o.metrics_every == 0 {
            return Err(Error::config("output.metrics_every", "must be at least 1"));
        }
        if !(o.radius_threshold > 0.0 && o.radius_threshold < 1.0) {
            return Err(Error::config("output.radius_threshold", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new([g.nx, g.ny, g.nz], g.spacing, g.origin)
    }

    /// Step length τ in days.
    pub fn tau(&self) -> f64 {
        (self.time.t_end - self.time.t0) / self.time.num_steps as f64
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            air_max: self.imaging.air_max,
            white_max: self.imaging.white_max,
            gray_max: self.imaging.gray_max,
        }
    }
}
