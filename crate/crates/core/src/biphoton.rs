//! Coincidence-rate laws for twin photons and detector scans.
//!
//! Every rate law here has the same shape: a calibration constant times a
//! divergence prefactor times an effective pump intensity sampled at the
//! (scaled) sum of the two detector coordinates.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{write_pgm16, IntensityMap, ScalarField, Transverse, WaveContext};
use crate::paraxial::RayMatrix;
use crate::propagation::{propagate, propagate_train, OpticalElement, OpticalTrain};

/// Fewest aperture-integration samples allowed across a detector diameter.
pub const MIN_APERTURE_SAMPLES: f64 = 5.0;

/// Below this |B| the detector plane is conjugate to the crystal.
const CONJUGATE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wavenumbers {
    pub pump: f64,
    pub signal: f64,
    pub idler: f64,
}

impl Wavenumbers {
    pub fn from_wavelengths(pump: f64, signal: f64, idler: f64) -> Result<Self> {
        for (name, l) in [("pump", pump), ("signal", signal), ("idler", idler)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} wavelength must be positive"
                )));
            }
        }
        Ok(Self {
            pump: 2.0 * PI / pump,
            signal: 2.0 * PI / signal,
            idler: 2.0 * PI / idler,
        })
    }

    pub fn degenerate(pump_wavelength: f64) -> Result<Self> {
        Self::from_wavelengths(
            pump_wavelength,
            2.0 * pump_wavelength,
            2.0 * pump_wavelength,
        )
    }

    pub fn pump_context(&self) -> Result<WaveContext> {
        WaveContext::new(self.pump)
    }

    /// `k / (k_p / 2)` for one arm.
    pub fn ratio(&self, role: Role) -> f64 {
        let k = match role {
            Role::Signal => self.signal,
            Role::Idler => self.idler,
        };
        k / (0.5 * self.pump)
    }
}

/// How the twin-side path is folded onto the pump wavenumber.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwinMode {
    /// Both twins treated as `k_p / 2`; distances taken at face value.
    #[default]
    Degenerate,
    /// Twin free-space distances divided by `k_s / (k_p / 2)`.
    ExactSignal,
    /// Twin free-space distances divided by `k_i / (k_p / 2)`.
    ExactIdler,
}

impl TwinMode {
    pub fn distance_scale(self, k: &Wavenumbers) -> f64 {
        match self {
            TwinMode::Degenerate => 1.0,
            TwinMode::ExactSignal => 1.0 / k.ratio(Role::Signal),
            TwinMode::ExactIdler => 1.0 / k.ratio(Role::Idler),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Signal,
    Idler,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Signal => Role::Idler,
            Role::Idler => Role::Signal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Signal => "signal",
            Role::Idler => "idler",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }

    fn set(self, p: Transverse, v: f64) -> Transverse {
        match self {
            Axis::X => Transverse::new(v, p.y),
            Axis::Y => Transverse::new(p.x, v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorSpec {
    pub position: Transverse,
    /// Zero is a point detector.
    pub aperture_radius: f64,
    pub role: Role,
}

impl DetectorSpec {
    pub fn point(role: Role, position: Transverse) -> Self {
        Self {
            position,
            aperture_radius: 0.0,
            role,
        }
    }
}

/// Crystal-plane pump and the distances of the single-lens layout.
#[derive(Clone, Debug)]
pub struct BiphotonSetup {
    pub pump_at_crystal: ScalarField,
    pub wavenumbers: Wavenumbers,
    /// Crystal to detectors.
    pub z_ad: f64,
    /// Mask to crystal along the pump.
    pub z_m1: f64,
    /// Crystal to lens along the twins.
    pub z_l: f64,
    /// Lens to detector.
    pub z_d: f64,
    pub kappa: f64,
}

impl BiphotonSetup {
    /// Object and image distances of the lens-imaged law.
    pub fn object_image(&self) -> (f64, f64) {
        (self.z_m1 + self.z_l, self.z_d)
    }
}

/// Optical elements on each side of the crystal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layout {
    /// Mask plane to crystal.
    pub pump_side: Vec<OpticalElement>,
    /// Crystal to signal detector.
    pub signal_side: Vec<OpticalElement>,
    /// Crystal to idler detector.
    pub idler_side: Vec<OpticalElement>,
}

impl Layout {
    fn twin_side(&self, k: &Wavenumbers, mode: TwinMode) -> Result<Vec<OpticalElement>> {
        if self.signal_side != self.idler_side {
            return Err(Error::UnsupportedAsymmetry);
        }
        let s = mode.distance_scale(k);
        Ok(self
            .signal_side
            .iter()
            .map(|e| match e {
                OpticalElement::FreeSpace { distance } => OpticalElement::free(distance * s),
                other => other.clone(),
            })
            .collect())
    }

    /// Single equivalent train on the pump: pump side then twin side.
    pub fn unfolded_train(&self, k: &Wavenumbers, mode: TwinMode) -> Result<OpticalTrain> {
        let mut train = OpticalTrain::new(self.pump_side.clone());
        train.extend(self.twin_side(k, mode)?);
        Ok(train)
    }

    /// Crystal to detector, as propagated.
    pub fn twin_matrix(&self, k: &Wavenumbers, mode: TwinMode) -> Result<RayMatrix> {
        Ok(OpticalTrain::new(self.twin_side(k, mode)?).ray_matrix())
    }

    /// Mask plane to detector along the unfolded path.
    pub fn object_matrix(&self, k: &Wavenumbers, mode: TwinMode) -> Result<RayMatrix> {
        Ok(self.unfolded_train(k, mode)?.ray_matrix())
    }
}

/// `kappa * prefactor * |W|^2(scale * (rho_s + rho_i))`.
#[derive(Clone, Debug)]
pub struct RateLaw {
    intensity: IntensityMap,
    scale: f64,
    prefactor: f64,
    kappa: f64,
}

impl RateLaw {
    pub fn new(intensity: IntensityMap, scale: f64, prefactor: f64, kappa: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!(
                "coordinate scale must be positive, got {scale}"
            )));
        }
        if !(prefactor.is_finite() && prefactor >= 0.0 && kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::invalid(
                "prefactor and calibration must be finite and >= 0",
            ));
        }
        Ok(Self {
            intensity,
            scale,
            prefactor,
            kappa,
        })
    }

    /// Pump propagated over `z_ad` with `k_p`, optionally weighted by
    /// `(k_p / z_ad)^2`.
    pub fn free(setup: &BiphotonSetup, include_divergence_prefactor: bool) -> Result<Self> {
        if !(setup.z_ad.is_finite() && setup.z_ad > 0.0) {
            return Err(Error::invalid(
                "crystal-to-detector distance must be positive",
            ));
        }
        let ctx = setup.wavenumbers.pump_context()?;
        let w = propagate(&setup.pump_at_crystal, ctx, setup.z_ad)?;
        let p = if include_divergence_prefactor {
            divergence_prefactor(setup.wavenumbers.pump, setup.z_ad)
        } else {
            1.0
        };
        Self::new(w.intensity(), 1.0, p, setup.kappa)
    }

    /// Closed form for a mask imaged by one lens: `|W_mask|^2((O/I) rho)`.
    pub fn imaged(w_at_mask: &ScalarField, object: f64, image: f64, kappa: f64) -> Result<Self> {
        if !(object > 0.0 && image > 0.0) {
            return Err(Error::invalid(
                "object and image distances must be positive",
            ));
        }
        Self::new(w_at_mask.intensity(), object / image, 1.0, kappa)
    }

    /// Pump at the mask plane carried through the whole unfolded train.
    /// The divergence prefactor generalizes `(k_p / Z)^2` to
    /// `(k_p / B)^2` with `B` from the twin-side ray matrix.
    pub fn unfolded(
        pump_at_mask: &ScalarField,
        layout: &Layout,
        k: &Wavenumbers,
        mode: TwinMode,
        include_divergence_prefactor: bool,
        kappa: f64,
    ) -> Result<Self> {
        let train = layout.unfolded_train(k, mode)?;
        let w = propagate_train(pump_at_mask, k.pump_context()?, &train)?;
        let p = if include_divergence_prefactor {
            let b = layout.twin_matrix(k, mode)?.b;
            if b.abs() < CONJUGATE_TOL {
                return Err(Error::Undefined(
                    "divergence prefactor diverges: detector plane is conjugate to the crystal"
                        .into(),
                ));
            }
            divergence_prefactor(k.pump, b)
        } else {
            1.0
        };
        Self::new(w.intensity(), 1.0, p, kappa)
    }

    pub fn intensity(&self) -> &IntensityMap {
        &self.intensity
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_prefactor(mut self, prefactor: f64) -> Self {
        self.prefactor = prefactor;
        self
    }

    fn at_sum(&self, sum: Transverse) -> Result<f64> {
        Ok(self.kappa * self.prefactor * self.intensity.sample(sum * self.scale)?)
    }

    pub fn point_rate(&self, rho_s: Transverse, rho_i: Transverse) -> Result<f64> {
        self.at_sum(rho_s + rho_i)
    }

    fn integrated(&self, sum: Transverse, kernel: &ApertureKernel) -> Result<f64> {
        kernel
            .terms
            .iter()
            .map(|(off, w)| Ok(w * self.at_sum(sum + *off)?))
            .sum()
    }
}

pub fn divergence_prefactor(k_p: f64, b: f64) -> f64 {
    (k_p / b) * (k_p / b)
}

/// Free-propagation rate at one detector pair.
pub fn coincidence_free(
    setup: &BiphotonSetup,
    rho_s: Transverse,
    rho_i: Transverse,
    include_divergence_prefactor: bool,
) -> Result<f64> {
    RateLaw::free(setup, include_divergence_prefactor)?.point_rate(rho_s, rho_i)
}

/// Lens-imaged rate at one detector pair.
pub fn coincidence_imaged(
    setup: &BiphotonSetup,
    w_at_mask: &ScalarField,
    object: f64,
    image: f64,
    rho_s: Transverse,
    rho_i: Transverse,
) -> Result<f64> {
    RateLaw::imaged(w_at_mask, object, image, setup.kappa)?.point_rate(rho_s, rho_i)
}

/// Midpoint-rule weights over both detector disks, collapsed onto the
/// offsets of the sum coordinate.
#[derive(Clone, Debug)]
pub struct ApertureKernel {
    terms: Vec<(Transverse, f64)>,
}

impl ApertureKernel {
    pub fn new(radius_a: f64, radius_b: f64, pitch: f64) -> Result<Self> {
        let a = disk_offsets(radius_a, pitch)?;
        let b = disk_offsets(radius_b, pitch)?;
        // offsets in half-pitch units so disk and point centers share a lattice
        let mut hist: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        for &(ax, ay, wa) in &a {
            for &(bx, by, wb) in &b {
                *hist.entry((ax + bx, ay + by)).or_insert(0.0) += wa * wb;
            }
        }
        let half = 0.5 * pitch;
        Ok(Self {
            terms: hist
                .into_iter()
                .map(|((ix, iy), w)| (Transverse::new(ix as f64 * half, iy as f64 * half), w))
                .collect(),
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.1).sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

fn disk_offsets(radius: f64, pitch: f64) -> Result<Vec<(i64, i64, f64)>> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::invalid(format!(
            "aperture radius must be >= 0, got {radius}"
        )));
    }
    if radius == 0.0 {
        return Ok(vec![(0, 0, 1.0)]);
    }
    let across = 2.0 * radius / pitch;
    if across < MIN_APERTURE_SAMPLES {
        return Err(Error::Resolution(format!(
            "aperture radius {radius} m spans {across:.2} samples at pitch {pitch} m; need {MIN_APERTURE_SAMPLES}"
        )));
    }
    let m = (radius / pitch).ceil() as i64 + 1;
    let w = pitch * pitch;
    let mut out = Vec::new();
    for j in -m..m {
        for i in -m..m {
            let x = (i as f64 + 0.5) * pitch;
            let y = (j as f64 + 0.5) * pitch;
            if x * x + y * y <= radius * radius {
                out.push((2 * i + 1, 2 * j + 1, w));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub moving: Role,
    pub axis: Axis,
    pub start_m: f64,
    pub stop_m: f64,
    pub step_m: f64,
}

impl ScanSpec {
    pub fn coordinates(&self) -> Result<Vec<f64>> {
        if !(self.step_m.is_finite() && self.step_m > 0.0) {
            return Err(Error::invalid("scan step must be positive"));
        }
        if !(self.start_m.is_finite() && self.stop_m.is_finite() && self.stop_m >= self.start_m) {
            return Err(Error::invalid("scan range must satisfy start <= stop"));
        }
        let count = ((self.stop_m - self.start_m) / self.step_m + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| self.start_m + i as f64 * self.step_m)
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceProfile {
    pub scenario: String,
    pub moving: Role,
    pub axis: Axis,
    pub fixed: Transverse,
    pub coordinates: Vec<f64>,
    pub rates: Vec<f64>,
}

pub const PROFILE_HEADER: &str = "scan_coordinate_m,rate_pairs_per_s";

impl CoincidenceProfile {
    /// A bare profile, e.g. one read back from CSV.
    pub fn from_points(coordinates: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if coordinates.len() != rates.len() {
            return Err(Error::invalid("coordinate and rate lengths differ"));
        }
        if coordinates.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("scan coordinates must increase strictly"));
        }
        Ok(Self {
            scenario: String::new(),
            moving: Role::Signal,
            axis: Axis::X,
            fixed: Transverse::ORIGIN,
            coordinates,
            rates,
        })
    }

    pub fn peak(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for r in &mut self.rates {
            *r *= s;
        }
        self
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{PROFILE_HEADER}")?;
        for (x, r) in self.coordinates.iter().zip(&self.rates) {
            writeln!(w, "{x},{r}")?;
        }
        Ok(())
    }

    /// Reads two-column CSV; the first column is the coordinate and the
    /// second the rate or count, whatever the header says.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = |what: &str| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::Parse(format!("line {}: missing {what}", lineno + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(next("coordinate")?);
            ys.push(next("value")?);
        }
        Self::from_points(xs, ys)
    }
}

/// Moves one detector along an axis with the other fixed, integrating the
/// rate law over both apertures at every point.
pub fn scan_detector(
    law: &RateLaw,
    scan: &ScanSpec,
    moving: &DetectorSpec,
    fixed_other: &DetectorSpec,
) -> Result<CoincidenceProfile> {
    if moving.role != scan.moving || fixed_other.role == moving.role {
        return Err(Error::invalid(
            "scan needs one moving and one fixed detector of opposite roles",
        ));
    }
    let coords = scan.coordinates()?;
    let pitch = law.intensity.grid().pitch();
    let kernel = ApertureKernel::new(moving.aperture_radius, fixed_other.aperture_radius, pitch)?;
    let rates = coords
        .par_iter()
        .map(|&c| {
            let p = scan.axis.set(moving.position, c);
            law.integrated(p + fixed_other.position, &kernel)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoincidenceProfile {
        scenario: String::new(),
        moving: scan.moving,
        axis: scan.axis,
        fixed: fixed_other.position,
        coordinates: coords,
        rates,
    })
}

/// Aperture-integrated rate over a square of moving-detector positions.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMap {
    pub coords: Vec<f64>,
    /// Row-major, row = y.
    pub values: Vec<f64>,
}

impl RateMap {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x_m,y_m,rate_pairs_per_s")?;
        let n = self.coords.len();
        for (r, y) in self.coords.iter().enumerate() {
            for (c, x) in self.coords.iter().enumerate() {
                writeln!(w, "{x},{y},{}", self.values[r * n + c])?;
            }
        }
        Ok(())
    }

    pub fn write_pgm<W: Write>(&self, w: W) -> Result<()> {
        let n = self.coords.len();
        write_pgm16(w, n, n, &self.values)
    }
}

pub fn rate_map(
    law: &RateLaw,
    coords: &[f64],
    moving: &DetectorSpec,
    fixed_other: &DetectorSpec,
) -> Result<RateMap> {
    let pitch = law.intensity.grid().pitch();
    let kernel = ApertureKernel::new(moving.aperture_radius, fixed_other.aperture_radius, pitch)?;
    let n = coords.len();
    let values = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let p = Transverse::new(coords[i % n], coords[i / n]);
            law.integrated(p + fixed_other.position, &kernel)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateMap {
        coords: coords.to_vec(),
        values,
    })
}
