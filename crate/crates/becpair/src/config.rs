//! Run configuration: `key = value unit` text files with `#` comments.
//!
//! Every dimensioned value must carry a unit suffix; bare numbers are
//! rejected for dimensioned keys and unit suffixes are rejected for
//! dimensionless ones. All values are normalized to SI on parse, and the
//! resolved form serializes back through [`RunConfig::to_text`] such that
//! parse -> serialize -> parse is the identity.

use std::collections::BTreeSet;

use crate::engine::{EngineOptions, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::{ExperimentGeometry, Mode, SourceRegion, Weighting};
use crate::kinematics::{BeamParameters, PhysicalConstants};
use crate::timing::ShotConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightingKind {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputFormats {
    pub csv: bool,
    pub pgm: bool,
    pub report: bool,
}

impl Default for OutputFormats {
    fn default() -> Self {
        Self { csv: true, pgm: true, report: true }
    }
}

impl OutputFormats {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut f = Self { csv: false, pgm: false, report: false };
        for item in s.split(',') {
            match item.trim() {
                "csv" => f.csv = true,
                "pgm" => f.pgm = true,
                "report" => f.report = true,
                other => return Err(format!("unknown format '{other}' (expected csv, pgm, report)")),
            }
        }
        Ok(f)
    }

    fn to_text(self) -> String {
        let mut parts = Vec::new();
        if self.csv {
            parts.push("csv");
        }
        if self.pgm {
            parts.push("pgm");
        }
        if self.report {
            parts.push("report");
        }
        parts.join(",")
    }
}

/// Fully resolved run configuration, SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    // beam
    pub laser_wavelength: f64,
    pub atomic_mass: f64,
    pub gravity: f64,
    pub velocity_spread_x: f64,
    pub velocity_spread_yz: f64,
    // geometry
    pub d: f64,
    pub l1: f64,
    pub l2: f64,
    pub drop_height: f64,
    pub detector_resolution: f64,
    // source
    pub source_x: f64,
    pub source_y: f64,
    pub source_z: f64,
    pub source_weighting: WeightingKind,
    pub gauss_sigma_x: Option<f64>,
    pub gauss_sigma_y: Option<f64>,
    pub gauss_sigma_z: Option<f64>,
    // detector grid
    pub window: f64,
    pub grid_a: usize,
    pub grid_b: usize,
    // engine sampling
    pub source_step_x: Option<f64>,
    pub source_step_y: Option<f64>,
    pub source_step_z: Option<f64>,
    pub oversample: f64,
    pub integrate_z: bool,
    pub slit_width: f64,
    pub slit_subpoints: usize,
    pub spherical_prefactor: bool,
    pub convolve_detector: bool,
    // timing
    pub mean_pairs: f64,
    pub efficiency: f64,
    pub collision_time_constant: f64,
    pub collision_window: f64,
    pub pairing_window: f64,
    pub shots: usize,
    // run
    pub seed: u64,
    pub workers: usize,
    pub out_dir: String,
    pub formats: OutputFormats,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::DoubleDoubleSlit,
            laser_wavelength: 1.083e-6,
            atomic_mass: 6.646e-27,
            gravity: 9.81,
            velocity_spread_x: 0.0044,
            velocity_spread_yz: 0.091,
            d: 0.0,
            l1: 0.0,
            l2: 0.0,
            drop_height: 0.5,
            detector_resolution: 60e-6,
            source_x: 0.0,
            source_y: 10e-6,
            source_z: 0.0,
            source_weighting: WeightingKind::Uniform,
            gauss_sigma_x: None,
            gauss_sigma_y: None,
            gauss_sigma_z: None,
            window: 1e-3,
            grid_a: 201,
            grid_b: 201,
            source_step_x: None,
            source_step_y: None,
            source_step_z: None,
            oversample: 2.0,
            integrate_z: false,
            slit_width: 0.0,
            slit_subpoints: 1,
            spherical_prefactor: false,
            convolve_detector: false,
            mean_pairs: 1.0,
            efficiency: 1.0,
            collision_time_constant: 150e-6,
            collision_window: 1e-3,
            pairing_window: 2e-3,
            shots: 1000,
            seed: 0,
            workers: 0,
            out_dir: "out".into(),
            formats: OutputFormats::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Length,
    Time,
    Mass,
    Acceleration,
    Dimensionless,
}

fn unit_factor(dim: Dimension, unit: &str) -> Option<f64> {
    match dim {
        Dimension::Length => match unit {
            "nm" => Some(1e-9),
            "um" | "\u{b5}m" => Some(1e-6),
            "mm" => Some(1e-3),
            "cm" => Some(1e-2),
            "m" => Some(1.0),
            _ => None,
        },
        Dimension::Time => match unit {
            "ns" => Some(1e-9),
            "us" | "\u{b5}s" => Some(1e-6),
            "ms" => Some(1e-3),
            "s" => Some(1.0),
            _ => None,
        },
        Dimension::Mass => match unit {
            "kg" => Some(1.0),
            "u" | "amu" => Some(1.66053906660e-27),
            _ => None,
        },
        Dimension::Acceleration => match unit {
            "m/s2" | "m/s^2" => Some(1.0),
            _ => None,
        },
        Dimension::Dimensionless => None,
    }
}

fn dim_name(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Length => "length (nm, um, mm, cm, m)",
        Dimension::Time => "time (ns, us, ms, s)",
        Dimension::Mass => "mass (kg, u)",
        Dimension::Acceleration => "acceleration (m/s2)",
        Dimension::Dimensionless => "dimensionless",
    }
}

struct Line<'a> {
    no: usize,
    key: &'a str,
    value: &'a str,
}

/// Parse a CLI length flag: a bare number is meters, otherwise a length
/// unit may be attached directly ("0.75mm") or space-separated ("0.75 mm").
pub fn parse_length_flag(s: &str) -> Result<f64> {
    let s = s.trim();
    let split = s
        .char_indices()
        .find(|(_, c)| c.is_alphabetic() || *c == '\u{b5}')
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num_part, unit_part) = s.split_at(split);
    let number: f64 = num_part
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("cannot parse length '{s}'")))?;
    let unit = unit_part.trim();
    if unit.is_empty() {
        return Ok(number);
    }
    match unit_factor(Dimension::Length, unit) {
        Some(f) => Ok(number * f),
        None => Err(Error::Usage(format!("unknown length unit '{unit}' in '{s}'"))),
    }
}

fn split_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            None
        } else {
            Some((i + 1, stripped))
        }
    })
}

impl RunConfig {
    /// Parse a config file. `path` only labels diagnostics.
    pub fn parse(text: &str, path: &str) -> Result<RunConfig> {
        let err = |line: usize, msg: String| Error::Config { path: path.to_string(), line, msg };
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        let mut have_mode = false;

        for (no, content) in split_lines(text) {
            let Some((key_raw, value_raw)) = content.split_once('=') else {
                return Err(err(no, format!("expected 'key = value', got '{content}'")));
            };
            let line = Line { no, key: key_raw.trim(), value: value_raw.trim() };
            if line.key.is_empty() {
                return Err(err(no, "empty key".into()));
            }
            if line.value.is_empty() {
                return Err(err(no, format!("key '{}' has no value", line.key)));
            }
            if !seen.insert(line.key.to_string()) {
                return Err(err(no, format!("duplicate key '{}'", line.key)));
            }
            apply_key(&mut cfg, &line, path)?;
            if line.key == "mode" {
                have_mode = true;
            }
        }

        if !have_mode {
            return Err(err(0, "missing required key 'mode'".into()));
        }
        for key in ["d", "l1", "l2", "source_x"] {
            if !seen.contains(key) {
                return Err(err(0, format!("missing required key '{key}'")));
            }
        }
        cfg.validate().map_err(|e| match e {
            Error::Validation(msg) => err(0, msg),
            other => other,
        })?;
        Ok(cfg)
    }

    /// Set a single key from its textual form (same grammar as the file),
    /// used by sweeps and CLI overrides. Call [`RunConfig::revalidate`]
    /// after the last override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let line = Line { no: 0, key, value };
        apply_key(self, &line, "<override>")
    }

    pub fn revalidate(&self) -> Result<()> {
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        if self.grid_a < 2 || self.grid_b < 2 {
            return Err(Error::Validation("grid must have at least 2 pixels per axis".into()));
        }
        if self.oversample < 1.0 {
            return Err(Error::Validation(format!("oversample must be >= 1, got {}", self.oversample)));
        }
        if self.slit_subpoints < 1 {
            return Err(Error::Validation("slit_subpoints must be >= 1".into()));
        }
        if self.shots < 1 {
            return Err(Error::Validation("shots must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Validation(format!("efficiency must lie in [0, 1], got {}", self.efficiency)));
        }
        // constructing the domain types runs their own invariants
        self.beam()?;
        self.geometry()?;
        self.source()?;
        self.grid()?;
        Ok(())
    }

    pub fn beam(&self) -> Result<BeamParameters> {
        BeamParameters::new(
            PhysicalConstants::new(crate::kinematics::PLANCK_CONSTANT, self.gravity)?,
            self.laser_wavelength,
            self.atomic_mass,
            self.velocity_spread_x,
            self.velocity_spread_yz,
        )
    }

    pub fn geometry(&self) -> Result<ExperimentGeometry> {
        ExperimentGeometry::new(
            self.mode,
            self.l1,
            self.l2,
            self.d,
            self.drop_height,
            self.detector_resolution,
        )
    }

    pub fn source(&self) -> Result<SourceRegion> {
        let extent = [self.source_x, self.source_y, self.source_z];
        let weighting = match self.source_weighting {
            WeightingKind::Uniform => Weighting::Uniform,
            WeightingKind::Gaussian => Weighting::Gaussian {
                sigma: [
                    self.gauss_sigma_x.unwrap_or(self.source_x / 4.0),
                    self.gauss_sigma_y.unwrap_or(self.source_y / 4.0),
                    self.gauss_sigma_z.unwrap_or(self.source_z / 4.0),
                ],
            },
        };
        SourceRegion::new(extent, weighting)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.window, self.grid_a, self.grid_b)
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            spherical_prefactor: self.spherical_prefactor,
            slit_width: self.slit_width,
            slit_subpoints: self.slit_subpoints,
            integrate_z: self.integrate_z,
        }
    }

    pub fn shot_config(&self) -> ShotConfig {
        ShotConfig {
            mean_pairs: self.mean_pairs,
            efficiency: self.efficiency,
            collision_time_constant: self.collision_time_constant,
            collision_window: self.collision_window,
            vertical_spread_fraction: self.velocity_spread_yz,
            drop_height: self.drop_height,
            lateral_half_window: self.window,
            seed: self.seed,
        }
    }

    /// Explicit sampling from the source_step_* overrides, starting from
    /// the auto-derived counts; None when no step override is present.
    pub fn sampling_override(&self) -> Result<Option<crate::engine::SourceSampling>> {
        let steps = [self.source_step_x, self.source_step_y, self.source_step_z];
        if steps.iter().all(Option::is_none) {
            return Ok(None);
        }
        let geom = self.geometry()?;
        let source = self.source()?;
        let grid = self.grid()?;
        let beam = self.beam()?;
        let opts = self.engine_options();
        let auto = crate::engine::SourceSampling::auto(
            &geom,
            &source,
            &grid,
            beam.de_broglie_wavelength,
            &opts,
            self.oversample,
        );
        let mut counts = auto.counts;
        let extents = [
            source.extent[0],
            source.extent[1],
            if opts.integrate_z { source.extent[2] } else { 0.0 },
        ];
        for axis in 0..3 {
            if let Some(step) = steps[axis] {
                counts[axis] = if extents[axis] > 0.0 {
                    (extents[axis] / step).ceil().max(1.0) as usize
                } else {
                    1
                };
            }
        }
        Ok(Some(crate::engine::SourceSampling::from_counts(counts)?))
    }

    /// Canonical resolved text: every key explicit, SI units, parseable by
    /// [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("mode", match self.mode {
            Mode::DoubleDoubleSlit => "dds".into(),
            Mode::Ghost => "ghost".into(),
        });
        kv("laser_wavelength", format!("{:e} m", self.laser_wavelength));
        kv("atomic_mass", format!("{:e} kg", self.atomic_mass));
        kv("gravity", format!("{:e} m/s2", self.gravity));
        kv("velocity_spread_x", format!("{:e}", self.velocity_spread_x));
        kv("velocity_spread_yz", format!("{:e}", self.velocity_spread_yz));
        kv("d", format!("{:e} m", self.d));
        kv("l1", format!("{:e} m", self.l1));
        kv("l2", format!("{:e} m", self.l2));
        kv("drop_height", format!("{:e} m", self.drop_height));
        kv("detector_resolution", format!("{:e} m", self.detector_resolution));
        kv("source_x", format!("{:e} m", self.source_x));
        kv("source_y", format!("{:e} m", self.source_y));
        kv("source_z", format!("{:e} m", self.source_z));
        kv("source_weighting", match self.source_weighting {
            WeightingKind::Uniform => "uniform".into(),
            WeightingKind::Gaussian => "gaussian".into(),
        });
        if let Some(v) = self.gauss_sigma_x {
            kv("gauss_sigma_x", format!("{v:e} m"));
        }
        if let Some(v) = self.gauss_sigma_y {
            kv("gauss_sigma_y", format!("{v:e} m"));
        }
        if let Some(v) = self.gauss_sigma_z {
            kv("gauss_sigma_z", format!("{v:e} m"));
        }
        kv("window", format!("{:e} m", self.window));
        kv("grid_a", self.grid_a.to_string());
        kv("grid_b", self.grid_b.to_string());
        if let Some(v) = self.source_step_x {
            kv("source_step_x", format!("{v:e} m"));
        }
        if let Some(v) = self.source_step_y {
            kv("source_step_y", format!("{v:e} m"));
        }
        if let Some(v) = self.source_step_z {
            kv("source_step_z", format!("{v:e} m"));
        }
        kv("oversample", format!("{:e}", self.oversample));
        kv("integrate_z", self.integrate_z.to_string());
        kv("slit_width", format!("{:e} m", self.slit_width));
        kv("slit_subpoints", self.slit_subpoints.to_string());
        kv("spherical_prefactor", self.spherical_prefactor.to_string());
        kv("convolve_detector", self.convolve_detector.to_string());
        kv("mean_pairs", format!("{:e}", self.mean_pairs));
        kv("efficiency", format!("{:e}", self.efficiency));
        kv("collision_time_constant", format!("{:e} s", self.collision_time_constant));
        kv("collision_window", format!("{:e} s", self.collision_window));
        kv("pairing_window", format!("{:e} s", self.pairing_window));
        kv("shots", self.shots.to_string());
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.to_string());
        kv("out_dir", self.out_dir.clone());
        kv("formats", self.formats.to_text());
        s
    }
}

fn apply_key(cfg: &mut RunConfig, line: &Line<'_>, path: &str) -> Result<()> {
    let err = |msg: String| Error::Config { path: path.to_string(), line: line.no, msg };

    let quantity = |dim: Dimension, min: f64, allow_eq_min: bool| -> Result<f64> {
        let mut parts = line.value.split_whitespace();
        let number: f64 = parts
            .next()
            .ok_or_else(|| err(format!("key '{}' has no value", line.key)))?
            .parse()
            .map_err(|_| err(format!("key '{}': cannot parse number '{}'", line.key, line.value)))?;
        let unit = parts.next();
        if parts.next().is_some() {
            return Err(err(format!("key '{}': trailing tokens after unit", line.key)));
        }
        let si = match (dim, unit) {
            (Dimension::Dimensionless, None) => number,
            (Dimension::Dimensionless, Some(u)) => {
                return Err(err(format!("key '{}' is dimensionless but carries unit '{u}'", line.key)))
            }
            (_, None) => {
                return Err(err(format!(
                    "key '{}' requires a unit suffix, expected {}",
                    line.key,
                    dim_name(dim)
                )))
            }
            (_, Some(u)) => match unit_factor(dim, u) {
                Some(f) => number * f,
                None => {
                    return Err(err(format!(
                        "key '{}': unknown unit '{u}', expected {}",
                        line.key,
                        dim_name(dim)
                    )))
                }
            },
        };
        if !si.is_finite() {
            return Err(err(format!("key '{}': value is not finite", line.key)));
        }
        if si < min || (!allow_eq_min && si == min) {
            let cmp = if allow_eq_min { ">=" } else { ">" };
            return Err(err(format!("key '{}': value {si:e} out of range (must be {cmp} {min:e})", line.key)));
        }
        Ok(si)
    };
    let count = |min: u64| -> Result<u64> {
        let v: u64 = line
            .value
            .parse()
            .map_err(|_| err(format!("key '{}': expected a non-negative integer, got '{}'", line.key, line.value)))?;
        if v < min {
            return Err(err(format!("key '{}': must be >= {min}", line.key)));
        }
        Ok(v)
    };
    let boolean = || -> Result<bool> {
        match line.value {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(err(format!("key '{}': expected true or false, got '{other}'", line.key))),
        }
    };

    match line.key {
        "mode" => {
            cfg.mode = match line.value {
                "dds" => Mode::DoubleDoubleSlit,
                "ghost" => Mode::Ghost,
                other => return Err(err(format!("unknown mode '{other}' (expected dds or ghost)"))),
            }
        }
        "laser_wavelength" => cfg.laser_wavelength = quantity(Dimension::Length, 0.0, false)?,
        "atomic_mass" => cfg.atomic_mass = quantity(Dimension::Mass, 0.0, false)?,
        "gravity" => cfg.gravity = quantity(Dimension::Acceleration, 0.0, false)?,
        "velocity_spread_x" => cfg.velocity_spread_x = quantity(Dimension::Dimensionless, 0.0, false)?,
        "velocity_spread_yz" => cfg.velocity_spread_yz = quantity(Dimension::Dimensionless, 0.0, false)?,
        "d" => cfg.d = quantity(Dimension::Length, 0.0, false)?,
        "l1" => cfg.l1 = quantity(Dimension::Length, 0.0, false)?,
        "l2" => cfg.l2 = quantity(Dimension::Length, 0.0, false)?,
        "drop_height" => cfg.drop_height = quantity(Dimension::Length, 0.0, true)?,
        "detector_resolution" => cfg.detector_resolution = quantity(Dimension::Length, 0.0, false)?,
        "source_x" => cfg.source_x = quantity(Dimension::Length, 0.0, true)?,
        "source_y" => cfg.source_y = quantity(Dimension::Length, 0.0, true)?,
        "source_z" => cfg.source_z = quantity(Dimension::Length, 0.0, true)?,
        "source_weighting" => {
            cfg.source_weighting = match line.value {
                "uniform" => WeightingKind::Uniform,
                "gaussian" => WeightingKind::Gaussian,
                other => return Err(err(format!("unknown weighting '{other}' (expected uniform or gaussian)"))),
            }
        }
        "gauss_sigma_x" => cfg.gauss_sigma_x = Some(quantity(Dimension::Length, 0.0, true)?),
        "gauss_sigma_y" => cfg.gauss_sigma_y = Some(quantity(Dimension::Length, 0.0, true)?),
        "gauss_sigma_z" => cfg.gauss_sigma_z = Some(quantity(Dimension::Length, 0.0, true)?),
        "window" => cfg.window = quantity(Dimension::Length, 0.0, false)?,
        "grid_a" => cfg.grid_a = count(2)? as usize,
        "grid_b" => cfg.grid_b = count(2)? as usize,
        "source_step_x" => cfg.source_step_x = Some(quantity(Dimension::Length, 0.0, false)?),
        "source_step_y" => cfg.source_step_y = Some(quantity(Dimension::Length, 0.0, false)?),
        "source_step_z" => cfg.source_step_z = Some(quantity(Dimension::Length, 0.0, false)?),
        "oversample" => cfg.oversample = quantity(Dimension::Dimensionless, 0.0, false)?,
        "integrate_z" => cfg.integrate_z = boolean()?,
        "slit_width" => cfg.slit_width = quantity(Dimension::Length, 0.0, true)?,
        "slit_subpoints" => cfg.slit_subpoints = count(1)? as usize,
        "spherical_prefactor" => cfg.spherical_prefactor = boolean()?,
        "convolve_detector" => cfg.convolve_detector = boolean()?,
        "mean_pairs" => cfg.mean_pairs = quantity(Dimension::Dimensionless, 0.0, true)?,
        "efficiency" => cfg.efficiency = quantity(Dimension::Dimensionless, 0.0, true)?,
        "collision_time_constant" => cfg.collision_time_constant = quantity(Dimension::Time, 0.0, true)?,
        "collision_window" => cfg.collision_window = quantity(Dimension::Time, 0.0, false)?,
        "pairing_window" => cfg.pairing_window = quantity(Dimension::Time, 0.0, false)?,
        "shots" => cfg.shots = count(1)? as usize,
        "seed" => cfg.seed = count(0)?,
        "workers" => cfg.workers = count(0)? as usize,
        "out_dir" => {
            if line.value.split_whitespace().count() != 1 {
                return Err(err("out_dir must be a single token".into()));
            }
            cfg.out_dir = line.value.to_string();
        }
        "formats" => cfg.formats = OutputFormats::parse(line.value).map_err(err)?,
        other => return Err(err(format!("unknown key '{other}'"))),
    }
    Ok(())
}
