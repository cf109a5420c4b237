//! Scenario orchestration: calibrated profiles, counts, metrics, artifacts
//! and distance sweeps.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::biphoton::{rate_map, scan_detector, CoincidenceProfile, RateLaw, ScanSpec};
use crate::compare::{contrast, dominant_feature, feature_width, Feature};
use crate::counting::{sample_counts, snr, CountedProfile, SweepRow};
use crate::error::{Error, Result};
use crate::field::{gaussian_beam, ScalarField};
use crate::paraxial::{check_imaging, TelescopePlan, TelescopeRequest};
use crate::scenario::{preset, ElementSpec, Resolved, Scenario, TwinSide};

/// Everything needed to evaluate rates for one scenario, uncalibrated.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub resolved: Resolved,
    pub law: RateLaw,
}

impl Simulation {
    pub fn new(s: &Scenario) -> Result<Self> {
        let resolved = s.resolve()?;
        let pump = pump_at_mask(s)?;
        let law = RateLaw::unfolded(
            &pump,
            &resolved.layout,
            &resolved.wavenumbers,
            resolved.mode,
            s.divergence_prefactor,
            1.0,
        )?;
        Ok(Self { resolved, law })
    }

    pub fn scan(&self, s: &Scenario, scan: &ScanSpec) -> Result<CoincidenceProfile> {
        let moving = s.detector(scan.moving);
        let fixed = s.detector(scan.moving.other());
        let mut p = scan_detector(&self.law, scan, &moving, &fixed)?;
        p.scenario = s.name.clone();
        Ok(p)
    }
}

pub fn pump_at_mask(s: &Scenario) -> Result<ScalarField> {
    gaussian_beam(s.pump.waist_m, s.grid.n, s.grid.pitch_m)
}

fn with_context<T>(s: &Scenario, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Scenario { .. } => e,
        e => Error::Scenario {
            scenario: s.name.clone(),
            source: Box::new(e),
        },
    })
}

/// Uncalibrated peak of a scenario's own scan.
fn raw_peak(s: &Scenario) -> Result<f64> {
    let sim = Simulation::new(s)?;
    Ok(sim.scan(s, &s.scan)?.peak())
}

/// Constant that puts the reference scenario's scan peak at the configured
/// rate. A preset reference is evaluated on this scenario's grid.
pub fn calibration_constant(s: &Scenario) -> Result<f64> {
    let reference_peak = if s.calibration.reference == "self" {
        raw_peak(s)?
    } else {
        let mut r = preset(&s.calibration.reference)?;
        r.grid = s.grid;
        with_context(&r, raw_peak(&r))?
    };
    if !(reference_peak > 0.0) {
        return Err(Error::Undefined(format!(
            "reference `{}` has zero peak rate; cannot calibrate",
            s.calibration.reference
        )));
    }
    Ok(s.calibration.peak_pairs_per_s / reference_peak)
}

/// Calibrated deterministic profile for an arbitrary scan of the scenario.
pub fn scan_scenario(s: &Scenario, scan: &ScanSpec) -> Result<CoincidenceProfile> {
    with_context(
        s,
        (|| {
            let kappa = calibration_constant(s)?;
            let sim = Simulation::new(s)?;
            Ok(sim.scan(s, scan)?.scaled(kappa))
        })(),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    pub feature: Option<Feature>,
    pub feature_width_m: Option<f64>,
    pub contrast: Option<f64>,
    pub peak_rate_pairs_per_s: f64,
    pub snr: Option<f64>,
}

impl Metrics {
    pub fn from_profiles(profile: &CoincidenceProfile, counted: &CountedProfile) -> Self {
        Self {
            feature: dominant_feature(&profile.rates).ok(),
            feature_width_m: feature_width(&profile.coordinates, &profile.rates).ok(),
            contrast: contrast(&profile.rates).ok(),
            peak_rate_pairs_per_s: profile.peak(),
            snr: snr(counted).ok(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub reference: String,
    pub peak_pairs_per_s: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryReport {
    /// Mask plane images onto the detector plane.
    pub is_image: bool,
    /// Mask-to-detector A element.
    pub magnification: f64,
    /// Crystal-to-detector B element used by the divergence prefactor.
    pub twin_b_m: f64,
    pub divergence_prefactor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub digest: String,
    pub seed: u64,
    pub calibration: CalibrationReport,
    pub geometry: GeometryReport,
    pub telescope: Option<TelescopePlan>,
    pub metrics: Metrics,
    /// Parameters that are assumptions rather than published values.
    pub assumed: Vec<String>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub profile: CoincidenceProfile,
    #[serde(skip)]
    pub counted: CountedProfile,
}

pub const ARTIFACTS: [&str; 5] = [
    "profile.csv",
    "counts.csv",
    "map.csv",
    "map.pgm",
    "report.json",
];

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

/// Full pipeline for one scenario. With `out_dir`, writes the profile,
/// counts, 2-D coincidence map and report there.
pub fn run(s: &Scenario, out_dir: Option<&Path>) -> Result<RunReport> {
    with_context(s, run_inner(s, out_dir))
}

fn run_inner(s: &Scenario, out_dir: Option<&Path>) -> Result<RunReport> {
    s.validate()?;
    let kappa = calibration_constant(s)?;
    let sim = Simulation::new(s)?;
    let law = sim.law.clone().with_kappa(kappa);
    let moving = s.detector(s.scan.moving);
    let fixed = s.detector(s.scan.moving.other());
    let mut profile = scan_detector(&law, &s.scan, &moving, &fixed)?;
    profile.scenario = s.name.clone();
    let counted = sample_counts(&profile, &s.counting)?;

    let r = &sim.resolved;
    let object = r.layout.object_matrix(&r.wavenumbers, r.mode)?;
    let twin = r.layout.twin_matrix(&r.wavenumbers, r.mode)?;
    let imaging = check_imaging(&object);
    let mut report = RunReport {
        scenario: s.name.clone(),
        digest: s.digest(),
        seed: s.counting.seed,
        calibration: CalibrationReport {
            reference: s.calibration.reference.clone(),
            peak_pairs_per_s: s.calibration.peak_pairs_per_s,
            kappa,
        },
        geometry: GeometryReport {
            is_image: imaging.is_image,
            magnification: imaging.magnification,
            twin_b_m: twin.b,
            divergence_prefactor: law.prefactor(),
        },
        telescope: r.plan.clone(),
        metrics: Metrics::from_profiles(&profile, &counted),
        assumed: s.assumed.clone(),
        files: Vec::new(),
        profile,
        counted,
    };

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        report.profile.write_csv(create(dir, "profile.csv")?)?;
        report.counted.write_csv(create(dir, "counts.csv")?)?;
        let coords = s.scan.coordinates()?;
        let map = rate_map(&law, &coords, &moving, &fixed)?;
        map.write_csv(create(dir, "map.csv")?)?;
        map.write_pgm(create(dir, "map.pgm")?)?;
        report.files = ARTIFACTS.iter().map(|f| f.to_string()).collect();
        let mut json =
            serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
        json.push('\n');
        fs::write(dir.join("report.json"), json)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub catalog_m: Vec<f64>,
    pub target_magnification: f64,
    /// Radius applied to both detectors.
    pub aperture_radius_m: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            catalog_m: vec![0.1, 0.15, 0.25, 0.5],
            target_magnification: 1.0,
            aperture_radius_m: 0.5e-3,
        }
    }
}

/// Peak rate and SNR versus crystal-to-detector distance. Free rows put
/// bare free space behind the crystal; collimated rows insert a designed
/// relay imaging the mask at each distance. Rows whose relay cannot be
/// designed are kept and marked.
pub fn sweep_distance(
    s: &Scenario,
    distances: &[f64],
    collimated: bool,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    with_context(s, sweep_inner(s, distances, collimated, opts))
}

fn sweep_inner(
    s: &Scenario,
    distances: &[f64],
    collimated: bool,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if distances.is_empty() {
        return Err(Error::invalid("no sweep distances"));
    }
    if distances.iter().any(|z| !(z.is_finite() && *z > 0.0))
        || distances.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(Error::invalid(
            "sweep distances must be positive and ascending",
        ));
    }
    if collimated
        && s.pump_side
            .iter()
            .any(|e| matches!(e, ElementSpec::ThinLens { .. }))
    {
        return Err(Error::invalid(
            "collimated sweep needs a lens-free pump side so the mask distance is a plain offset",
        ));
    }
    let kappa = calibration_constant(s)?;
    let mut rows = Vec::with_capacity(distances.len());
    for &z in distances {
        let mut sc = s.clone();
        sc.twin_side = if collimated {
            TwinSide::Telescope(TelescopeRequest {
                total_distance_m: z,
                target_magnification: opts.target_magnification,
                catalog_m: opts.catalog_m.clone(),
                object_offset_m: s.mask.z_m1_m,
            })
        } else {
            TwinSide::free(z)
        };
        for d in &mut sc.detectors {
            d.aperture_radius_m = opts.aperture_radius_m;
        }
        let sim = match Simulation::new(&sc) {
            Ok(sim) => sim,
            Err(e @ Error::Infeasible { .. }) => {
                rows.push(SweepRow {
                    z_m: z,
                    collimated,
                    peak_rate: None,
                    snr: None,
                    status: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let profile = sim.scan(&sc, &sc.scan)?.scaled(kappa);
        let counted = sample_counts(&profile, &sc.counting)?;
        rows.push(SweepRow {
            z_m: z,
            collimated,
            peak_rate: Some(profile.peak()),
            snr: snr(&counted).ok(),
            status: "ok".into(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str) -> Scenario {
        let mut s = preset(name).unwrap();
        s.grid.n = 320;
        s
    }

    #[test]
    fn run_is_deterministic_and_calibrated() {
        let s = small("fig4b");
        let a = run(&s, None).unwrap();
        let b = run(&s, None).unwrap();
        assert_eq!(a.profile, b.profile);
        assert_eq!(a.counted, b.counted);
        assert!((a.metrics.peak_rate_pairs_per_s - 1000.0).abs() < 1e-9);
        assert!(a.geometry.is_image);
        assert!((a.geometry.magnification + 1.0).abs() < 1e-9);
    }

    #[test]
    fn errors_carry_scenario_name() {
        let mut s = small("fig4b");
        s.scan.stop_m = 5.0e-3;
        s.scan.start_m = -5.0e-3;
        match run(&s, None) {
            Err(Error::Scenario { scenario, source }) => {
                assert_eq!(scenario, "fig4b");
                assert!(matches!(*source, Error::OutOfWindow { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infeasible_rows_are_marked() {
        let s = small("fig4b");
        let opts = SweepOptions {
            catalog_m: vec![10.0],
            ..SweepOptions::default()
        };
        let rows = sweep_distance(&s, &[1.0], true, &opts).unwrap();
        assert_eq!(rows[0].peak_rate, None);
        assert!(rows[0].status.starts_with("infeasible"));
    }
}
