//! Scenario documents: JSON model, validation, presets and digests.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::biphoton::{DetectorSpec, Layout, Role, ScanSpec, TwinMode, Wavenumbers};
use crate::counting::CountingConfig;
use crate::error::{Error, Result};
use crate::field::{wire_mask, Grid, TransmissionMask, Transverse};
use crate::paraxial::{design_telescope, TelescopePlan, TelescopeRequest};
use crate::propagation::{OpticalElement, OpticalTrain};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_JSON: &str = include_str!("../schema/scenario.schema.json");

pub const PRESET_NAMES: [&str; 3] = ["fig4a", "fig4b", "fig5"];

const REQUIRED_KEYS: [&str; 12] = [
    "schema_version",
    "name",
    "grid",
    "pump",
    "twins",
    "mask",
    "pump_side",
    "twin_side",
    "detectors",
    "scan",
    "counting",
    "calibration",
];

/// Every unit-suffixed key in the schema. A key equal to one of these with
/// the suffix removed is a value given without its unit.
const UNIT_KEYS: [&str; 24] = [
    "pitch_m",
    "wavelength_m",
    "waist_m",
    "signal_wavelength_m",
    "idler_wavelength_m",
    "width_m",
    "z_m1_m",
    "distance_m",
    "focal_m",
    "aperture_radius_m",
    "radius_m",
    "x_m",
    "y_m",
    "start_m",
    "stop_m",
    "step_m",
    "total_distance_m",
    "catalog_m",
    "object_offset_m",
    "acquisition_time_s",
    "singles_signal_per_s",
    "singles_idler_per_s",
    "coincidence_window_s",
    "peak_pairs_per_s",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub grid: GridSpec,
    pub pump: PumpSpec,
    pub twins: TwinSpec,
    pub mask: MaskSpec,
    /// Mask plane to crystal.
    pub pump_side: Vec<ElementSpec>,
    /// Crystal to detectors.
    pub twin_side: TwinSide,
    pub detectors: Vec<DetectorConfig>,
    pub scan: ScanSpec,
    pub counting: CountingConfig,
    pub calibration: Calibration,
    #[serde(default = "yes")]
    pub divergence_prefactor: bool,
    /// Keys whose values are assumptions rather than published numbers.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assumed: Vec<String>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub pitch_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    pub wavelength_m: f64,
    /// Gaussian waist at the mask plane.
    pub waist_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinSpec {
    pub signal_wavelength_m: f64,
    pub idler_wavelength_m: f64,
    #[serde(default)]
    pub mode: TwinMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Wire,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    #[serde(rename = "type")]
    pub kind: MaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_m: Option<f64>,
    /// Mask to crystal along the pump.
    pub z_m1_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSpec {
    FreeSpace {
        distance_m: f64,
    },
    ThinLens {
        focal_m: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        aperture_radius_m: Option<f64>,
    },
    /// Circular clear aperture.
    Aperture {
        radius_m: f64,
    },
}

impl ElementSpec {
    pub fn from_element(e: &OpticalElement) -> Option<Self> {
        match *e {
            OpticalElement::FreeSpace { distance } => Some(ElementSpec::FreeSpace {
                distance_m: distance,
            }),
            OpticalElement::ThinLens {
                focal,
                aperture_radius,
            } => Some(ElementSpec::ThinLens {
                focal_m: focal,
                aperture_radius_m: aperture_radius,
            }),
            OpticalElement::Mask(_) => None,
        }
    }

    fn to_element(self, grid: Grid) -> Result<OpticalElement> {
        Ok(match self {
            ElementSpec::FreeSpace { distance_m } => OpticalElement::free(distance_m),
            ElementSpec::ThinLens {
                focal_m,
                aperture_radius_m,
            } => OpticalElement::ThinLens {
                focal: focal_m,
                aperture_radius: aperture_radius_m,
            },
            ElementSpec::Aperture { radius_m } => {
                OpticalElement::Mask(TransmissionMask::circular_aperture(grid, radius_m)?)
            }
        })
    }

    fn validate(&self, key: &str) -> Result<()> {
        match *self {
            ElementSpec::FreeSpace { distance_m } => {
                if !(distance_m.is_finite() && distance_m >= 0.0) {
                    return Err(Error::validation(
                        format!("{key}.free_space.distance_m"),
                        format!("distance must be >= 0, got {distance_m}"),
                    ));
                }
            }
            ElementSpec::ThinLens {
                focal_m,
                aperture_radius_m,
            } => {
                if focal_m == 0.0 || focal_m.is_nan() {
                    return Err(Error::validation(
                        format!("{key}.thin_lens.focal_m"),
                        "focal length must be nonzero",
                    ));
                }
                if let Some(r) = aperture_radius_m {
                    if !(r.is_finite() && r > 0.0) {
                        return Err(Error::validation(
                            format!("{key}.thin_lens.aperture_radius_m"),
                            format!("aperture radius must be positive, got {r}"),
                        ));
                    }
                }
            }
            ElementSpec::Aperture { radius_m } => {
                if !(radius_m.is_finite() && radius_m > 0.0) {
                    return Err(Error::validation(
                        format!("{key}.aperture.radius_m"),
                        format!("aperture radius must be positive, got {radius_m}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinElements {
    pub signal: Vec<ElementSpec>,
    pub idler: Vec<ElementSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TwinSide {
    Elements(TwinElements),
    /// Relay synthesized by the telescope designer at run time.
    Telescope(TelescopeRequest),
}

impl TwinSide {
    /// Both arms carry one beam's share of a designed relay.
    pub fn from_plan(plan: &TelescopePlan) -> Self {
        let arm: Vec<ElementSpec> = plan
            .twin_elements()
            .iter()
            .filter_map(ElementSpec::from_element)
            .collect();
        TwinSide::Elements(TwinElements {
            signal: arm.clone(),
            idler: arm,
        })
    }

    pub fn free(distance: f64) -> Self {
        let arm = vec![ElementSpec::FreeSpace {
            distance_m: distance,
        }];
        TwinSide::Elements(TwinElements {
            signal: arm.clone(),
            idler: arm,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub role: Role,
    pub x_m: f64,
    pub y_m: f64,
    pub aperture_radius_m: f64,
}

impl DetectorConfig {
    pub fn spec(&self) -> DetectorSpec {
        DetectorSpec {
            position: Transverse::new(self.x_m, self.y_m),
            aperture_radius: self.aperture_radius_m,
            role: self.role,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    /// Preset name, or "self" for this scenario.
    pub reference: String,
    pub peak_pairs_per_s: f64,
}

/// A scenario with its twin-side relay designed and its masks built.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub grid: Grid,
    pub wavenumbers: Wavenumbers,
    pub mode: TwinMode,
    pub layout: Layout,
    pub plan: Option<TelescopePlan>,
}

impl Resolved {
    pub fn unfolded_train(&self) -> Result<OpticalTrain> {
        self.layout.unfolded_train(&self.wavenumbers, self.mode)
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(key, format!("must be >= 0, got {v}")))
    }
}

fn free_length(elements: &[ElementSpec]) -> f64 {
    elements
        .iter()
        .map(|e| match e {
            ElementSpec::FreeSpace { distance_m } => *distance_m,
            _ => 0.0,
        })
        .sum()
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        Grid::new(self.grid.n, self.grid.pitch_m)
            .map_err(|e| Error::validation("grid", e.to_string()))?;
        positive("pump.wavelength_m", self.pump.wavelength_m)?;
        positive("pump.waist_m", self.pump.waist_m)?;
        positive("twins.signal_wavelength_m", self.twins.signal_wavelength_m)?;
        positive("twins.idler_wavelength_m", self.twins.idler_wavelength_m)?;
        non_negative("mask.z_m1_m", self.mask.z_m1_m)?;
        match (self.mask.kind, self.mask.width_m) {
            (MaskKind::Wire, Some(w)) => positive("mask.width_m", w)?,
            (MaskKind::Wire, None) => {
                return Err(Error::validation(
                    "mask.width_m",
                    "a wire mask needs a width",
                ))
            }
            (MaskKind::None, Some(_)) => {
                return Err(Error::validation(
                    "mask.width_m",
                    "no width allowed without a mask",
                ))
            }
            (MaskKind::None, None) => {}
        }
        for (i, e) in self.pump_side.iter().enumerate() {
            e.validate(&format!("pump_side[{i}]"))?;
        }
        let pump_len = free_length(&self.pump_side);
        if (pump_len - self.mask.z_m1_m).abs() > 1e-9 {
            return Err(Error::validation(
                "pump_side",
                format!(
                    "free-space distances sum to {pump_len} m but mask.z_m1_m is {} m",
                    self.mask.z_m1_m
                ),
            ));
        }
        match &self.twin_side {
            TwinSide::Elements(t) => {
                for (arm, list) in [("signal", &t.signal), ("idler", &t.idler)] {
                    for (i, e) in list.iter().enumerate() {
                        e.validate(&format!("twin_side.elements.{arm}[{i}]"))?;
                    }
                }
            }
            TwinSide::Telescope(r) => {
                let key = "twin_side.telescope";
                positive(&format!("{key}.total_distance_m"), r.total_distance_m)?;
                non_negative(&format!("{key}.object_offset_m"), r.object_offset_m)?;
                if r.catalog_m.is_empty() {
                    return Err(Error::validation(
                        format!("{key}.catalog_m"),
                        "catalog is empty",
                    ));
                }
                for (i, f) in r.catalog_m.iter().enumerate() {
                    positive(&format!("{key}.catalog_m[{i}]"), *f)?;
                }
                let t = r.target_magnification.abs();
                if !(0.1..=10.0).contains(&t) {
                    return Err(Error::validation(
                        format!("{key}.target_magnification"),
                        "magnitude must lie in [0.1, 10]",
                    ));
                }
            }
        }
        if self.detectors.len() != 2 {
            return Err(Error::validation(
                "detectors",
                format!(
                    "exactly two detectors required, got {}",
                    self.detectors.len()
                ),
            ));
        }
        if self.detectors[0].role == self.detectors[1].role {
            return Err(Error::validation(
                "detectors",
                "need one signal and one idler detector",
            ));
        }
        for (i, d) in self.detectors.iter().enumerate() {
            non_negative(
                &format!("detectors[{i}].aperture_radius_m"),
                d.aperture_radius_m,
            )?;
            for (k, v) in [("x_m", d.x_m), ("y_m", d.y_m)] {
                if !v.is_finite() {
                    return Err(Error::validation(
                        format!("detectors[{i}].{k}"),
                        "must be finite",
                    ));
                }
            }
        }
        positive("scan.step_m", self.scan.step_m)?;
        if !(self.scan.start_m.is_finite() && self.scan.stop_m.is_finite())
            || self.scan.stop_m < self.scan.start_m
        {
            return Err(Error::validation(
                "scan.stop_m",
                "scan range must satisfy start <= stop",
            ));
        }
        self.counting.validate()?;
        positive(
            "calibration.peak_pairs_per_s",
            self.calibration.peak_pairs_per_s,
        )?;
        let r = self.calibration.reference.as_str();
        if r != "self" && !PRESET_NAMES.contains(&r) {
            return Err(Error::validation(
                "calibration.reference",
                format!(
                    "`{r}` is neither \"self\" nor a preset ({})",
                    PRESET_NAMES.join(", ")
                ),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.pitch_m)
    }

    pub fn wavenumbers(&self) -> Result<Wavenumbers> {
        Wavenumbers::from_wavelengths(
            self.pump.wavelength_m,
            self.twins.signal_wavelength_m,
            self.twins.idler_wavelength_m,
        )
    }

    pub fn detector(&self, role: Role) -> DetectorSpec {
        self.detectors
            .iter()
            .find(|d| d.role == role)
            .map(DetectorConfig::spec)
            .unwrap_or(DetectorSpec::point(role, Transverse::ORIGIN))
    }

    /// Builds masks and elements and designs any requested relay.
    pub fn resolve(&self) -> Result<Resolved> {
        let grid = self.grid()?;
        let mut pump_side = Vec::new();
        if let (MaskKind::Wire, Some(w)) = (self.mask.kind, self.mask.width_m) {
            pump_side.push(OpticalElement::Mask(wire_mask(w, grid.n(), grid.pitch())?));
        }
        for e in &self.pump_side {
            pump_side.push(e.to_element(grid)?);
        }
        let (twin, plan) = match &self.twin_side {
            TwinSide::Elements(t) => (t.clone(), None),
            TwinSide::Telescope(req) => {
                let plan = design_telescope(req)?;
                match TwinSide::from_plan(&plan) {
                    TwinSide::Elements(t) => (t, Some(plan)),
                    TwinSide::Telescope(_) => unreachable!(),
                }
            }
        };
        let arm = |list: &[ElementSpec]| -> Result<Vec<OpticalElement>> {
            list.iter().map(|e| e.to_element(grid)).collect()
        };
        Ok(Resolved {
            grid,
            wavenumbers: self.wavenumbers()?,
            mode: self.twins.mode,
            layout: Layout {
                pump_side,
                signal_side: arm(&twin.signal)?,
                idler_side: arm(&twin.idler)?,
            },
            plan,
        })
    }

    pub fn digest(&self) -> String {
        sha256_hex(emit(self).as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Pump path then twin path as one train on the pump field.
pub fn unfolded_pump_train(scenario: &Scenario) -> Result<OpticalTrain> {
    scenario.resolve()?.unfolded_train()
}

fn check_units(v: &Value, path: &str) -> Result<()> {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let here = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                if let Some(u) = UNIT_KEYS.iter().find(|u| {
                    ["_m", "_s", "_per_s"]
                        .iter()
                        .any(|suffix| u.strip_suffix(suffix) == Some(k.as_str()))
                }) {
                    return Err(Error::Schema {
                        path: here,
                        message: format!("value given without a unit; use `{u}`"),
                    });
                }
                check_units(child, &here)?;
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                check_units(child, &format!("{path}[{i}]"))?;
            }
        }
        _ => {}
    }
    Ok(())
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let Value::Object(root) = &value else {
        return Err(Error::Schema {
            path: "$".into(),
            message: "scenario must be a JSON object".into(),
        });
    };
    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !root.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema {
            path: "$".into(),
            message: format!("missing required keys: {}", missing.join(", ")),
        });
    }
    check_units(&value, "")?;
    let scenario: Scenario =
        serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Canonical pretty JSON with a trailing newline.
pub fn emit(scenario: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(scenario).expect("scenario serializes");
    s.push('\n');
    s
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "fig4a" => Some(include_str!("../presets/fig4a.json")),
        "fig4b" => Some(include_str!("../presets/fig4b.json")),
        "fig5" => Some(include_str!("../presets/fig5.json")),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<Scenario> {
    let text = preset_text(name).ok_or_else(|| {
        Error::invalid(format!(
            "unknown preset `{name}` (known: {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    parse_scenario(text)
}
