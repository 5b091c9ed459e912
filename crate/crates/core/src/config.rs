//! Experiment configuration: typed records, the `key = value unit` text
//! format, SI conversion and validation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{PhysicalConstants, CODATA};
use crate::error::{ensure_positive, Error, Result};

pub const DEFAULT_SUSCEPTIBILITY: f64 = -9.1e-6;
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Which of two published normalizations a convention-sensitive number uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    AsWritten,
    TableMatched,
}

impl Convention {
    pub fn tag(self) -> &'static str {
        match self {
            Convention::AsWritten => "as-written",
            Convention::TableMatched => "table-matched",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "as-written" | "aswritten" => Some(Convention::AsWritten),
            "table-matched" | "tablematched" => Some(Convention::TableMatched),
            _ => None,
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conventions {
    /// Thermal force PSD normalization, shared by the noise budget and the simulator.
    pub thermal: Convention,
    /// Prefactor of the spin-induced magnetic force.
    pub force: Convention,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            thermal: Convention::TableMatched,
            force: Convention::TableMatched,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrosphereSpec {
    pub radius: f64,
    pub density: f64,
    pub mass: f64,
    /// Nucleons per m³.
    pub nucleon_density: f64,
    pub susceptibility: f64,
}

impl MicrosphereSpec {
    pub fn new(radius: f64, density: f64, susceptibility: f64) -> Result<Self> {
        ensure_positive("radius", radius)?;
        ensure_positive("density", density)?;
        if !(susceptibility < 0.0) {
            return Err(Error::validation(
                "susceptibility",
                format!("diamagnetic sphere needs chi < 0, got {susceptibility}"),
            ));
        }
        let spec = MicrosphereSpec {
            radius,
            density,
            mass: 4.0 / 3.0 * PI * (radius * radius * radius) * density,
            nucleon_density: density / CODATA.nucleon_mass,
            susceptibility,
        };
        debug_assert!(spec.is_consistent());
        Ok(spec)
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * (self.radius * self.radius * self.radius)
    }

    pub fn is_consistent(&self) -> bool {
        let m = self.volume() * self.density;
        let n = self.density / CODATA.nucleon_mass;
        (self.mass - m).abs() <= 0.01 * m && (self.nucleon_density - n).abs() <= 0.01 * n && self.susceptibility < 0.0
    }
}

/// Mass and nucleon density of a sphere of given radius and density.
pub fn derive_microsphere(radius: f64, density: f64) -> Result<MicrosphereSpec> {
    MicrosphereSpec::new(radius, density, DEFAULT_SUSCEPTIBILITY)
}

/// One-sigma fabrication and placement tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySigma {
    pub outer_height: f64,
    pub inner_height: f64,
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub gap: f64,
    pub sphere_radius: f64,
}

impl Default for GeometrySigma {
    fn default() -> Self {
        GeometrySigma {
            outer_height: 3e-9,
            inner_height: 3e-9,
            outer_radius: 3e-9,
            inner_radius: 3e-9,
            gap: 1e-9,
            sphere_radius: 0.1e-6,
        }
    }
}

impl GeometrySigma {
    pub fn zero() -> Self {
        GeometrySigma {
            outer_height: 0.0,
            inner_height: 0.0,
            outer_radius: 0.0,
            inner_radius: 0.0,
            gap: 0.0,
            sphere_radius: 0.0,
        }
    }
}

/// Two coaxial cylinders sharing a top plane: the outer one is the polarized
/// block, the inner one is the groove removed from it. The sphere hovers
/// inside the groove, `gap` above its floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSourceGeometry {
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub outer_height: f64,
    pub inner_height: f64,
    pub gap: f64,
    /// Polarized electrons per m³.
    pub spin_density: f64,
    pub tilt_max: f64,
    pub tilt_projection: bool,
    pub sigma: GeometrySigma,
}

impl Default for SpinSourceGeometry {
    fn default() -> Self {
        SpinSourceGeometry {
            outer_radius: 460.00e-6,
            inner_radius: 440.93e-6,
            outer_height: 59.703e-6,
            inner_height: 48.674e-6,
            gap: 1.46e-6,
            spin_density: 2.3e27,
            tilt_max: 4f64.to_radians(),
            tilt_projection: false,
            sigma: GeometrySigma::default(),
        }
    }
}

impl SpinSourceGeometry {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("source_inner_radius", self.inner_radius)?;
        ensure_positive("source_inner_height", self.inner_height)?;
        ensure_positive("gap", self.gap)?;
        ensure_positive("spin_density", self.spin_density)?;
        if self.outer_radius <= self.inner_radius {
            return Err(Error::validation(
                "source_outer_radius",
                "must exceed source_inner_radius",
            ));
        }
        if self.outer_height <= self.inner_height {
            return Err(Error::validation(
                "source_outer_height",
                "must exceed source_inner_height",
            ));
        }
        if !(0.0..PI / 2.0).contains(&self.tilt_max) {
            return Err(Error::validation("tilt_max", "must lie in [0, 90) degrees"));
        }
        let s = &self.sigma;
        for (key, v) in [
            ("sigma_outer_height", s.outer_height),
            ("sigma_inner_height", s.inner_height),
            ("sigma_outer_radius", s.outer_radius),
            ("sigma_inner_radius", s.inner_radius),
            ("sigma_gap", s.gap),
            ("sigma_radius", s.sphere_radius),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(key, "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Spin density used in force formulas, optionally projected by the worst tilt.
    pub fn effective_spin_density(&self) -> f64 {
        if self.tilt_projection {
            self.spin_density * self.tilt_max.cos()
        } else {
            self.spin_density
        }
    }

    /// Height of the sphere center above the shared top plane (negative: inside the groove).
    pub fn center_height(&self, sphere_radius: f64) -> f64 {
        self.gap + sphere_radius - self.inner_height
    }
}

/// Quadratic model of the levitating field about the equilibrium point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    /// T at z = 0
    pub value: f64,
    /// T/m
    pub slope: f64,
    /// T/m²
    pub curvature: f64,
}

impl FieldModel {
    pub fn at(&self, z: f64) -> (f64, f64, f64) {
        (
            self.value + self.slope * z + 0.5 * self.curvature * z * z,
            self.slope + self.curvature * z,
            self.curvature,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub b_ext: f64,
    pub b_pm: f64,
    /// Nominal vertical gradient at the sphere, T/m.
    pub field_gradient: f64,
    pub omega_z: f64,
    /// Damping rate, rad/s.
    pub gamma: f64,
    pub casimir_reduction: f64,
    /// m/s²
    pub gravity: f64,
    /// Explicit field model; `None` means calibrate from ω_z and the gap.
    pub field_model: Option<FieldModel>,
}

impl Default for TrapConfig {
    fn default() -> Self {
        TrapConfig {
            b_ext: 1.85,
            b_pm: 0.15,
            field_gradient: 750.0,
            omega_z: 148.9,
            gamma: 2.0 * PI * 1e-6,
            casimir_reduction: 0.059,
            gravity: STANDARD_GRAVITY,
            field_model: None,
        }
    }
}

impl TrapConfig {
    pub fn field_at_sphere(&self) -> f64 {
        self.b_ext + self.b_pm
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("omega_z", self.omega_z)?;
        ensure_positive("gamma", self.gamma)?;
        ensure_positive("field_gradient", self.field_gradient)?;
        if !(self.b_ext >= 0.0 && self.b_pm >= 0.0) {
            return Err(Error::validation("b_ext", "fields must be non-negative"));
        }
        if !(self.casimir_reduction > 0.0 && self.casimir_reduction <= 1.0) {
            return Err(Error::validation("casimir_reduction", "must lie in (0, 1]"));
        }
        if !(self.gravity >= 0.0) {
            return Err(Error::validation("gravity", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConfig {
    pub temperature: f64,
    pub efficiency: f64,
    pub measurement_time: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig {
            temperature: 0.020,
            efficiency: 0.001,
            measurement_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSettings {
    /// Spin-lattice relaxation time, s.
    pub t1: f64,
    /// Microwave drive amplitude, T.
    pub b1: f64,
}

impl Default for ModulationSettings {
    fn default() -> Self {
        ModulationSettings { t1: 1.0, b1: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub constants: PhysicalConstants,
    pub sphere: MicrosphereSpec,
    pub source: SpinSourceGeometry,
    pub trap: TrapConfig,
    pub environment: EnvironmentConfig,
    pub modulation: ModulationSettings,
    pub conventions: Conventions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            constants: CODATA,
            sphere: MicrosphereSpec::new(3.2e-6, 1100.0, DEFAULT_SUSCEPTIBILITY).expect("default sphere is valid"),
            source: SpinSourceGeometry::default(),
            trap: TrapConfig::default(),
            environment: EnvironmentConfig::default(),
            modulation: ModulationSettings::default(),
            conventions: Conventions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Length,
    Time,
    Temperature,
    Field,
    Gradient,
    Curvature,
    AngularRate,
    Frequency,
    MassDensity,
    NumberDensity,
    Angle,
    Acceleration,
    Scalar,
    Flag,
    Label,
}

impl Dim {
    fn si_unit(self) -> &'static str {
        match self {
            Dim::Length => "m",
            Dim::Time => "s",
            Dim::Temperature => "K",
            Dim::Field => "T",
            Dim::Gradient => "T/m",
            Dim::Curvature => "T/m2",
            Dim::AngularRate => "rad/s",
            Dim::Frequency => "Hz",
            Dim::MassDensity => "kg/m3",
            Dim::NumberDensity => "m-3",
            Dim::Angle => "rad",
            Dim::Acceleration => "m/s2",
            Dim::Scalar | Dim::Flag | Dim::Label => "",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let u = unit.trim();
        let s = match self {
            Dim::Length => match u {
                "m" => 1.0,
                "mm" => 1e-3,
                "um" | "μm" | "µm" => 1e-6,
                "nm" => 1e-9,
                _ => return None,
            },
            Dim::Time => match u {
                "s" => 1.0,
                "ms" => 1e-3,
                "us" | "μs" | "µs" => 1e-6,
                "ns" => 1e-9,
                _ => return None,
            },
            Dim::Temperature => match u {
                "K" => 1.0,
                "mK" => 1e-3,
                "uK" | "μK" | "µK" => 1e-6,
                _ => return None,
            },
            Dim::Field => match u {
                "T" => 1.0,
                "mT" => 1e-3,
                "uT" | "μT" | "µT" => 1e-6,
                _ => return None,
            },
            Dim::Gradient => match u {
                "T/m" => 1.0,
                "T/mm" => 1e3,
                _ => return None,
            },
            Dim::Curvature => match u {
                "T/m2" | "T/m^2" => 1.0,
                _ => return None,
            },
            Dim::AngularRate => match u {
                "rad/s" | "s-1" | "1/s" => 1.0,
                "Hz" => 2.0 * PI,
                _ => return None,
            },
            Dim::Frequency => match u {
                "Hz" => 1.0,
                "kHz" => 1e3,
                "MHz" => 1e6,
                "GHz" => 1e9,
                _ => return None,
            },
            Dim::MassDensity => match u {
                "kg/m3" | "kg/m^3" => 1.0,
                "g/cm3" | "g/cm^3" => 1e3,
                _ => return None,
            },
            Dim::NumberDensity => match u {
                "m-3" | "1/m3" | "/m3" | "m^-3" => 1.0,
                "cm-3" | "1/cm3" | "/cm3" => 1e6,
                _ => return None,
            },
            Dim::Angle => match u {
                "rad" => 1.0,
                "deg" => PI / 180.0,
                _ => return None,
            },
            Dim::Acceleration => match u {
                "m/s2" | "m/s^2" => 1.0,
                _ => return None,
            },
            Dim::Scalar => match u {
                "" => 1.0,
                _ => return None,
            },
            Dim::Flag | Dim::Label => return None,
        };
        Some(s)
    }
}

/// Canonical keys in print order. `gamma_over_2pi` is input-only.
const KEYS: &[(&str, Dim)] = &[
    ("radius", Dim::Length),
    ("density", Dim::MassDensity),
    ("susceptibility", Dim::Scalar),
    ("temperature", Dim::Temperature),
    ("measurement_efficiency", Dim::Scalar),
    ("measurement_time", Dim::Time),
    ("b_ext", Dim::Field),
    ("b_pm", Dim::Field),
    ("field_gradient", Dim::Gradient),
    ("omega_z", Dim::AngularRate),
    ("gamma", Dim::AngularRate),
    ("casimir_reduction", Dim::Scalar),
    ("gravity", Dim::Acceleration),
    ("trap_slope", Dim::Gradient),
    ("trap_curvature", Dim::Curvature),
    ("gap", Dim::Length),
    ("spin_density", Dim::NumberDensity),
    ("source_outer_radius", Dim::Length),
    ("source_inner_radius", Dim::Length),
    ("source_outer_height", Dim::Length),
    ("source_inner_height", Dim::Length),
    ("tilt_max", Dim::Angle),
    ("tilt_projection", Dim::Flag),
    ("sigma_outer_height", Dim::Length),
    ("sigma_inner_height", Dim::Length),
    ("sigma_outer_radius", Dim::Length),
    ("sigma_inner_radius", Dim::Length),
    ("sigma_gap", Dim::Length),
    ("sigma_radius", Dim::Length),
    ("t1", Dim::Time),
    ("b1", Dim::Field),
    ("thermal_convention", Dim::Label),
    ("force_convention", Dim::Label),
    ("gamma_over_2pi", Dim::Frequency),
];

fn canonical_key(raw: &str) -> Option<(&'static str, Dim)> {
    let k = raw.trim().to_ascii_lowercase();
    let k = match k.as_str() {
        "eta" => "measurement_efficiency",
        "eta_c" => "casimir_reduction",
        "db0z_dz" | "db_dz" => "field_gradient",
        "rho_e0" => "spin_density",
        "r_s1" => "source_outer_radius",
        "r_s2" => "source_inner_radius",
        "l1" => "source_outer_height",
        "l2" => "source_inner_height",
        "chi_m" => "susceptibility",
        "d" => "gap",
        other => other,
    };
    KEYS.iter().find(|(name, _)| *name == k).copied()
}

/// Parse a config document. Absent keys keep their defaults; every value is
/// converted to SI and the assembled record is validated.
pub fn load_config(document: &str) -> Result<ExperimentConfig> {
    let mut raw = RawValues::from(&ExperimentConfig::default());
    for (idx, line) in document.lines().enumerate() {
        let lineno = idx + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key_txt, value_txt)) = body.split_once('=') else {
            return Err(Error::Malformed {
                line: lineno,
                key: body.split_whitespace().next().unwrap_or("").to_string(),
                text: body.to_string(),
            });
        };
        let key_txt = key_txt.trim();
        if key_txt.is_empty() || key_txt.contains(char::is_whitespace) {
            return Err(Error::Malformed {
                line: lineno,
                key: key_txt.to_string(),
                text: body.to_string(),
            });
        }
        let (key, dim) = canonical_key(key_txt).ok_or_else(|| Error::UnknownKey {
            line: lineno,
            key: key_txt.to_string(),
        })?;
        let value_txt = value_txt.trim();
        match dim {
            Dim::Flag => {
                let v = match value_txt.to_ascii_lowercase().as_str() {
                    "true" | "on" | "yes" | "1" => true,
                    "false" | "off" | "no" | "0" => false,
                    _ => return Err(Error::validation(key, format!("expected a boolean, got `{value_txt}`"))),
                };
                raw.set_flag(key, v);
            }
            Dim::Label => {
                let c = Convention::parse(value_txt)
                    .ok_or_else(|| Error::validation(key, format!("unknown convention `{value_txt}`")))?;
                raw.set_label(key, c);
            }
            _ => {
                let mut parts = value_txt.splitn(2, char::is_whitespace);
                let num_txt = parts.next().unwrap_or("");
                let unit = parts.next().unwrap_or("").trim();
                let number: f64 = num_txt.parse().map_err(|_| Error::Malformed {
                    line: lineno,
                    key: key.to_string(),
                    text: body.to_string(),
                })?;
                let scale = dim.scale(unit).ok_or_else(|| Error::UnknownUnit {
                    key: key.to_string(),
                    unit: unit.to_string(),
                })?;
                raw.set_number(key, number * scale);
            }
        }
    }
    raw.build()
}

/// Flat view of every configurable value, in SI.
#[derive(Debug, Clone)]
struct RawValues {
    numbers: Vec<(&'static str, f64)>,
    tilt_projection: bool,
    thermal: Convention,
    force: Convention,
    slope: Option<f64>,
    curvature: Option<f64>,
}

impl RawValues {
    fn from(cfg: &ExperimentConfig) -> Self {
        let s = &cfg.sphere;
        let g = &cfg.source;
        let t = &cfg.trap;
        let e = &cfg.environment;
        let numbers = vec![
            ("radius", s.radius),
            ("density", s.density),
            ("susceptibility", s.susceptibility),
            ("temperature", e.temperature),
            ("measurement_efficiency", e.efficiency),
            ("measurement_time", e.measurement_time),
            ("b_ext", t.b_ext),
            ("b_pm", t.b_pm),
            ("field_gradient", t.field_gradient),
            ("omega_z", t.omega_z),
            ("gamma", t.gamma),
            ("casimir_reduction", t.casimir_reduction),
            ("gravity", t.gravity),
            ("gap", g.gap),
            ("spin_density", g.spin_density),
            ("source_outer_radius", g.outer_radius),
            ("source_inner_radius", g.inner_radius),
            ("source_outer_height", g.outer_height),
            ("source_inner_height", g.inner_height),
            ("tilt_max", g.tilt_max),
            ("sigma_outer_height", g.sigma.outer_height),
            ("sigma_inner_height", g.sigma.inner_height),
            ("sigma_outer_radius", g.sigma.outer_radius),
            ("sigma_inner_radius", g.sigma.inner_radius),
            ("sigma_gap", g.sigma.gap),
            ("sigma_radius", g.sigma.sphere_radius),
            ("t1", cfg.modulation.t1),
            ("b1", cfg.modulation.b1),
        ];
        RawValues {
            numbers,
            tilt_projection: g.tilt_projection,
            thermal: cfg.conventions.thermal,
            force: cfg.conventions.force,
            slope: t.field_model.map(|m| m.slope),
            curvature: t.field_model.map(|m| m.curvature),
        }
    }

    fn set_number(&mut self, key: &'static str, v: f64) {
        match key {
            "gamma_over_2pi" => self.set_number("gamma", 2.0 * PI * v),
            "trap_slope" => self.slope = Some(v),
            "trap_curvature" => self.curvature = Some(v),
            _ => {
                if let Some(slot) = self.numbers.iter_mut().find(|(k, _)| *k == key) {
                    slot.1 = v;
                }
            }
        }
    }

    fn set_flag(&mut self, _key: &'static str, v: bool) {
        self.tilt_projection = v;
    }

    fn set_label(&mut self, key: &'static str, c: Convention) {
        if key == "thermal_convention" {
            self.thermal = c;
        } else {
            self.force = c;
        }
    }

    fn get(&self, key: &str) -> f64 {
        self.numbers
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN)
    }

    fn build(self) -> Result<ExperimentConfig> {
        let sphere = MicrosphereSpec::new(self.get("radius"), self.get("density"), self.get("susceptibility"))?;
        let source = SpinSourceGeometry {
            outer_radius: self.get("source_outer_radius"),
            inner_radius: self.get("source_inner_radius"),
            outer_height: self.get("source_outer_height"),
            inner_height: self.get("source_inner_height"),
            gap: self.get("gap"),
            spin_density: self.get("spin_density"),
            tilt_max: self.get("tilt_max"),
            tilt_projection: self.tilt_projection,
            sigma: GeometrySigma {
                outer_height: self.get("sigma_outer_height"),
                inner_height: self.get("sigma_inner_height"),
                outer_radius: self.get("sigma_outer_radius"),
                inner_radius: self.get("sigma_inner_radius"),
                gap: self.get("sigma_gap"),
                sphere_radius: self.get("sigma_radius"),
            },
        };
        source.validate()?;
        let mut trap = TrapConfig {
            b_ext: self.get("b_ext"),
            b_pm: self.get("b_pm"),
            field_gradient: self.get("field_gradient"),
            omega_z: self.get("omega_z"),
            gamma: self.get("gamma"),
            casimir_reduction: self.get("casimir_reduction"),
            gravity: self.get("gravity"),
            field_model: None,
        };
        match (self.slope, self.curvature) {
            (Some(slope), Some(curvature)) => {
                trap.field_model = Some(FieldModel {
                    value: trap.field_at_sphere(),
                    slope,
                    curvature,
                })
            }
            (None, None) => {}
            (Some(_), None) => return Err(Error::validation("trap_curvature", "required when trap_slope is set")),
            (None, Some(_)) => return Err(Error::validation("trap_slope", "required when trap_curvature is set")),
        }
        trap.validate()?;
        let environment = EnvironmentConfig {
            temperature: self.get("temperature"),
            efficiency: self.get("measurement_efficiency"),
            measurement_time: self.get("measurement_time"),
        };
        ensure_positive("temperature", environment.temperature)?;
        ensure_positive("measurement_time", environment.measurement_time)?;
        if !(environment.efficiency > 0.0 && environment.efficiency <= 1.0) {
            return Err(Error::validation("measurement_efficiency", "must lie in (0, 1]"));
        }
        let modulation = ModulationSettings {
            t1: self.get("t1"),
            b1: self.get("b1"),
        };
        ensure_positive("t1", modulation.t1)?;
        ensure_positive("b1", modulation.b1)?;
        Ok(ExperimentConfig {
            constants: CODATA,
            sphere,
            source,
            trap,
            environment,
            modulation,
            conventions: Conventions {
                thermal: self.thermal,
                force: self.force,
            },
        })
    }
}

impl ExperimentConfig {
    /// Canonical SI text; `load_config` of the result reproduces `self` exactly.
    pub fn to_config_text(&self) -> String {
        let raw = RawValues::from(self);
        let mut out = String::new();
        for (key, dim) in KEYS {
            let line = match (*key, dim) {
                ("gamma_over_2pi", _) => continue,
                ("trap_slope", _) => match raw.slope {
                    Some(v) => format!("{key} = {v:e} T/m"),
                    None => continue,
                },
                ("trap_curvature", _) => match raw.curvature {
                    Some(v) => format!("{key} = {v:e} T/m2"),
                    None => continue,
                },
                (_, Dim::Flag) => format!("{key} = {}", raw.tilt_projection),
                ("thermal_convention", _) => format!("{key} = {}", raw.thermal),
                ("force_convention", _) => format!("{key} = {}", raw.force),
                (_, d) => {
                    let v = raw.get(key);
                    let unit = d.si_unit();
                    if unit.is_empty() {
                        format!("{key} = {v:e}")
                    } else {
                        format!("{key} = {v:e} {unit}")
                    }
                }
            };
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_config_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.constants.all_positive() {
            return Err(Error::validation(
                "constants",
                "all physical constants must be positive",
            ));
        }
        if !self.sphere.is_consistent() {
            return Err(Error::validation("radius", "sphere mass/density mismatch"));
        }
        self.source.validate()?;
        self.trap.validate()
    }
}

/// ALP mass and range, mutually derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlpCoupling {
    pub lambda: f64,
    pub mass_ev: f64,
    pub g_product: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvertFrom {
    Range,
    MassEv,
}

/// λ = ħ/(m_a c), converting in whichever direction `from` names.
pub fn lambda_mass_convert(value: f64, from: ConvertFrom) -> Result<AlpCoupling> {
    let hc = CODATA.hbar_c_ev_m();
    match from {
        ConvertFrom::Range => {
            ensure_positive("lambda", value)?;
            Ok(AlpCoupling {
                lambda: value,
                mass_ev: hc / value,
                g_product: 0.0,
            })
        }
        ConvertFrom::MassEv => {
            ensure_positive("m_a", value)?;
            Ok(AlpCoupling {
                lambda: hc / value,
                mass_ev: value,
                g_product: 0.0,
            })
        }
    }
}

pub fn lambda_to_mass_ev(lambda: f64) -> f64 {
    CODATA.hbar_c_ev_m() / lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = load_config("").unwrap();
        assert_eq!(cfg.sphere.radius, 3.2e-6);
        assert_eq!(cfg.source.gap, 1.46e-6);
        assert_eq!(cfg.environment.temperature, 0.02);
        assert_eq!(cfg.trap.b_ext, 1.85);
        assert_eq!(cfg.trap.field_gradient, 750.0);
        assert_eq!(cfg.source.spin_density, 2.3e27);
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn single_override() {
        let cfg = load_config("temperature = 40 mK").unwrap();
        let mut expected = ExperimentConfig::default();
        expected.environment.temperature = 0.04;
        assert!((cfg.environment.temperature - 0.04).abs() < 1e-18);
        expected.environment.temperature = cfg.environment.temperature;
        assert_eq!(cfg, expected);
    }

    #[test]
    fn negative_radius_names_key() {
        let err = load_config("radius = -1 um").unwrap_err();
        assert!(
            matches!(&err, Error::Validation { key, .. } if key == "radius"),
            "{err}"
        );
    }

    #[test]
    fn bad_unit_and_key() {
        assert!(matches!(
            load_config("radius = 3 furlongs").unwrap_err(),
            Error::UnknownUnit { key, .. } if key == "radius"
        ));
        assert!(matches!(
            load_config("radios = 3 um").unwrap_err(),
            Error::UnknownKey { key, .. } if key == "radios"
        ));
        assert!(matches!(
            load_config("radius 3 um").unwrap_err(),
            Error::Malformed { .. }
        ));
        assert!(matches!(
            load_config("radius = three um").unwrap_err(),
            Error::Malformed { key, .. } if key == "radius"
        ));
    }

    #[test]
    fn comments_aliases_and_gamma_in_hz() {
        let cfg =
            load_config("# header\n gamma_over_2pi = 1e-6 Hz # damping\nL1 = 60 um\nomega_z = 23.7 Hz\n").unwrap();
        assert!((cfg.trap.gamma - 2.0 * PI * 1e-6).abs() < 1e-20);
        assert!((cfg.source.outer_height - 60e-6).abs() < 1e-18);
        assert!((cfg.trap.omega_z - 2.0 * PI * 23.7).abs() < 1e-12);
    }

    #[test]
    fn geometry_ordering_is_enforced() {
        let err = load_config("source_inner_radius = 500 um").unwrap_err();
        assert!(matches!(&err, Error::Validation { key, .. } if key == "source_outer_radius"));
    }

    #[test]
    fn microsphere_from_density() {
        let s = derive_microsphere(3.2e-6, 1.1e3).unwrap();
        assert!((s.mass / 1.51e-13 - 1.0).abs() < 0.01, "{}", s.mass);
        assert!((s.nucleon_density / 6.7e29 - 1.0).abs() < 0.02);
        let unit = derive_microsphere(1.0, 1.0).unwrap();
        assert!((unit.mass - 4.0 / 3.0 * PI).abs() < 1e-15);
        assert!(derive_microsphere(0.0, 1.0).is_err());
        assert!(derive_microsphere(1.0, -1.0).is_err());
    }

    #[test]
    fn lambda_mass_examples() {
        let c = lambda_mass_convert(2e-6, ConvertFrom::Range).unwrap();
        assert!((c.mass_ev / 98.7e-3 - 1.0).abs() < 1e-3, "{}", c.mass_ev);
        let c = lambda_mass_convert(7e-3, ConvertFrom::MassEv).unwrap();
        assert!((c.lambda / 28.2e-6 - 1.0).abs() < 1e-3, "{}", c.lambda);
        assert!((lambda_to_mass_ev(0.5e-6) / 0.395 - 1.0).abs() < 0.02);
        assert!((lambda_to_mass_ev(50e-6) / 3.95e-3 - 1.0).abs() < 0.02);
        assert!(lambda_mass_convert(0.0, ConvertFrom::Range).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let mut b = a;
        b.environment.temperature = 0.021;
        assert_eq!(a.config_hash(), ExperimentConfig::default().config_hash());
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }

    proptest! {
        #[test]
        fn text_round_trip(
            radius in 0.5e-6f64..20e-6,
            temp in 1e-3f64..10.0,
            gap in 0.1e-6f64..10e-6,
            t1 in 1e-4f64..100.0,
            projection in any::<bool>(),
            slope in prop::option::of(100.0f64..2000.0),
        ) {
            let mut cfg = ExperimentConfig {
                sphere: MicrosphereSpec::new(radius, 1100.0, DEFAULT_SUSCEPTIBILITY).unwrap(),
                ..ExperimentConfig::default()
            };
            cfg.environment.temperature = temp;
            cfg.source.gap = gap;
            cfg.source.tilt_projection = projection;
            cfg.modulation.t1 = t1;
            cfg.conventions.thermal = Convention::AsWritten;
            cfg.trap.field_model = slope.map(|s| FieldModel { value: 2.0, slope: s, curvature: -2e6 });
            let text = cfg.to_config_text();
            let back = load_config(&text).unwrap();
            prop_assert_eq!(back, cfg);
            prop_assert_eq!(back.to_config_text(), text);
        }

        #[test]
        fn conversion_is_an_involution(lambda in 1e-9f64..1e-2) {
            let m = lambda_mass_convert(lambda, ConvertFrom::Range).unwrap().mass_ev;
            let back = lambda_mass_convert(m, ConvertFrom::MassEv).unwrap().lambda;
            prop_assert!((back / lambda - 1.0).abs() < 1e-4);
        }
    }
}
