//! Acceptance gate. Runs each criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qimage::biphoton::{
    divergence_prefactor, scan_detector, Axis, BiphotonSetup, CoincidenceProfile, DetectorSpec,
    Layout, RateLaw, Role, ScanSpec, TwinMode, Wavenumbers,
};
use qimage::compare::compare_profiles;
use qimage::counting::{sample_counts, snr, CountingConfig};
use qimage::field::{
    gaussian_beam, power, relative_rms, second_moment_radius_x, wire_mask, Grid, ScalarField,
    Transverse, WaveContext,
};
use qimage::focus::{best_focus, magnified_reference};
use qimage::paraxial::{design_telescope, TelescopeRequest};
use qimage::propagation::oracle::oracle_fresnel_direct;
use qimage::propagation::{propagate, propagate_train, OpticalElement, OpticalTrain};
use qimage::run::run;
use qimage::scenario::preset;

const PUMP_WAVELENGTH: f64 = 425e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ctx() -> WaveContext {
    WaveContext::from_wavelength(PUMP_WAVELENGTH).unwrap()
}

/// Sum of grid-periodic plane waves with random complex weights on the
/// lowest `bins` frequencies per axis; exactly band-limited.
fn random_band_limited(grid: Grid, bins: i64, rng: &mut ChaCha8Rng) -> ScalarField {
    let n = grid.n();
    let l = grid.width();
    let m = (2 * bins + 1) as usize;
    let coeff: Vec<Complex64> = (0..m * m)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let basis = |i: usize| -> Vec<Complex64> {
        let x = grid.coord(i);
        (-bins..=bins)
            .map(|f| Complex64::from_polar(1.0, 2.0 * PI * f as f64 * x / l))
            .collect()
    };
    let ex: Vec<Vec<Complex64>> = (0..n).map(basis).collect();
    // rows: sum over fy of coeff[fy][fx] * e_y; then dot with e_x
    let mut samples = Vec::with_capacity(n * n);
    for row in 0..n {
        let ey = &ex[row];
        let mut mix = vec![Complex64::new(0.0, 0.0); m];
        for (fy, wy) in ey.iter().enumerate() {
            for fx in 0..m {
                mix[fx] += coeff[fy * m + fx] * wy;
            }
        }
        for e in &ex {
            samples.push(mix.iter().zip(e).map(|(a, b)| a * b).sum());
        }
    }
    ScalarField::from_samples(grid, samples).unwrap()
}

fn c1_unitarity() -> Outcome {
    let start = Instant::now();
    let grid = Grid::new(256, 20e-6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = random_band_limited(grid, 8, &mut rng);
        let z = rng.random_range(0.1..3.0);
        let g = propagate(&f, ctx(), z).unwrap();
        worst = worst.max((power(&g) / power(&f) - 1.0).abs());
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-9 && t < Duration::from_secs(10),
        format!(
            "max |dP|/P = {worst:.2e} over 20 fields, {:.2} s",
            t.as_secs_f64()
        ),
    )
}

fn c2_gaussian_width() -> Outcome {
    let w0 = 0.5e-3;
    let f = gaussian_beam(w0, 512, 20e-6).unwrap();
    let zr = PI * w0 * w0 / PUMP_WAVELENGTH;
    let mut worst: f64 = 0.0;
    for s in [0.5, 1.0, 2.0] {
        let z = s * zr;
        let w = second_moment_radius_x(&propagate(&f, ctx(), z).unwrap());
        let want = w0 * (1.0 + s * s).sqrt();
        worst = worst.max((w / want - 1.0).abs());
    }
    outcome(
        worst < 5e-3,
        format!("max relative radius error {worst:.2e}"),
    )
}

fn c3_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (pitch, waist, z) in [
        (51.5e-6, 260e-6, 0.5),
        (40e-6, 200e-6, 0.3),
        (60e-6, 300e-6, 0.7),
    ] {
        let f = gaussian_beam(waist, 64, pitch).unwrap();
        let a = oracle_fresnel_direct(&f, ctx(), z).unwrap();
        let b = propagate(&f, ctx(), z).unwrap();
        worst = worst.max(relative_rms(&b, &a).unwrap());
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-6 && t < Duration::from_secs(60),
        format!(
            "max relative RMS {worst:.2e} over 3 geometries, {:.2} s",
            t.as_secs_f64()
        ),
    )
}

fn free_setup(z: f64) -> BiphotonSetup {
    let pump = gaussian_beam(1e-3, 512, 20e-6)
        .unwrap()
        .apply_mask(&wire_mask(0.2e-3, 512, 20e-6).unwrap())
        .unwrap();
    BiphotonSetup {
        pump_at_crystal: pump,
        wavenumbers: Wavenumbers::from_wavelengths(PUMP_WAVELENGTH, 890e-9, 800e-9).unwrap(),
        z_ad: z,
        z_m1: 0.0,
        z_l: 0.0,
        z_d: 0.0,
        kappa: 1.0,
    }
}

fn c4_sum_symmetry() -> Outcome {
    let law = RateLaw::free(&free_setup(0.7), true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut r = |a: f64| rng.random_range(-a..a);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = Transverse::new(r(1e-3), r(1e-3));
        let i = Transverse::new(r(1e-3), r(1e-3));
        let d = Transverse::new(r(1e-3), r(1e-3));
        let a = law.point_rate(s, i).unwrap();
        let b = law.point_rate(s + d, i - d).unwrap();
        worst = worst.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
    }
    outcome(
        worst < 1e-6,
        format!("max relative change {worst:.2e} over 100 pairs"),
    )
}

fn c5_inverse_square() -> Outcome {
    let setup = free_setup(0.5);
    let law = RateLaw::free(&setup, false).unwrap();
    let k = setup.wavenumbers.pump;
    let zs: Vec<f64> = (0..=25).map(|i| 0.5 + 0.1 * i as f64).collect();
    let peak = |z: f64| {
        let l = law.clone().with_prefactor(divergence_prefactor(k, z));
        (-30..=30)
            .map(|i| {
                l.point_rate(Transverse::new(i as f64 * 20e-6, 0.0), Transverse::ORIGIN)
                    .unwrap()
            })
            .fold(0.0, f64::max)
    };
    let xs: Vec<f64> = zs.iter().map(|z| z.ln()).collect();
    let ys: Vec<f64> = zs.iter().map(|&z| peak(z).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    outcome(
        (slope + 2.0).abs() <= 0.02,
        format!("fitted exponent {slope:.4}"),
    )
}

/// Closed-form lens-imaged profile against the full unfolded simulation.
fn eq3_case(z_m1: f64, z_l: f64, image: f64) -> (f64, f64) {
    let (n, p) = (1024, 10e-6);
    let k = Wavenumbers::degenerate(PUMP_WAVELENGTH).unwrap();
    let object = z_m1 + z_l;
    let f = 1.0 / (1.0 / object + 1.0 / image);
    let wire = wire_mask(0.71e-3, n, p).unwrap();
    let pump = gaussian_beam(1.5e-3, n, p).unwrap();
    let at_mask = pump.apply_mask(&wire).unwrap();
    let twin = vec![
        OpticalElement::free(z_l),
        OpticalElement::lens(f),
        OpticalElement::free(image),
    ];
    let layout = Layout {
        pump_side: vec![OpticalElement::Mask(wire), OpticalElement::free(z_m1)],
        signal_side: twin.clone(),
        idler_side: twin,
    };
    let wave = RateLaw::unfolded(&pump, &layout, &k, TwinMode::Degenerate, false, 1.0).unwrap();
    let closed = RateLaw::imaged(&at_mask, object, image, 1.0).unwrap();
    let half = 0.8 * 0.71e-3 * (image / object).min(1.0);
    let scan = ScanSpec {
        moving: Role::Signal,
        axis: Axis::X,
        start_m: -half,
        stop_m: half,
        step_m: p / 4.0,
    };
    let s = DetectorSpec::point(Role::Signal, Transverse::ORIGIN);
    let i = DetectorSpec::point(Role::Idler, Transverse::ORIGIN);
    let a = scan_detector(&closed, &scan, &s, &i).unwrap();
    let b = scan_detector(&wave, &scan, &s, &i).unwrap();
    let c = compare_profiles(&b, &a).unwrap();
    (c.ncc, c.width_ratio)
}

fn c6_eq3() -> Outcome {
    let unit = eq3_case(0.1, 0.2, 0.3);
    let demag = eq3_case(0.15, 0.3, 0.225);
    let ok = |(ncc, w): (f64, f64)| ncc >= 0.99 && (0.98..=1.02).contains(&w);
    outcome(
        ok(unit) && ok(demag),
        format!(
            "O=I: ncc {:.4}, width ratio {:.4}; O=2I: ncc {:.4}, width ratio {:.4}",
            unit.0, unit.1, demag.0, demag.1
        ),
    )
}

fn c7_fig4_ratio() -> Outcome {
    let start = Instant::now();
    let a = run(&preset("fig4a").unwrap(), None).unwrap();
    let b = run(&preset("fig4b").unwrap(), None).unwrap();
    let ratio = b.metrics.peak_rate_pairs_per_s / a.metrics.peak_rate_pairs_per_s;
    let t = start.elapsed();
    outcome(
        ratio >= 5.0 && t < Duration::from_secs(120),
        format!(
            "fig4b/fig4a peak ratio {ratio:.3}, {:.2} s",
            t.as_secs_f64()
        ),
    )
}

fn c8_fig5() -> Outcome {
    let b = run(&preset("fig4b").unwrap(), None).unwrap();
    let c = run(&preset("fig5").unwrap(), None).unwrap();
    let cmp = compare_profiles(&c.profile, &b.profile).unwrap();
    let plan = c.telescope.as_ref().unwrap();
    outcome(
        (cmp.width_ratio - 1.0).abs() <= 0.10 && cmp.ncc >= 0.95,
        format!(
            "width ratio {:.4}, ncc {:.4} (relay f_a {} m, f_b {} m, leg {:.4} m, M {:.4})",
            cmp.width_ratio, cmp.ncc, plan.f_a, plan.f_b, plan.leg, plan.magnification
        ),
    )
}

/// Relay requests whose designed plans are checked against wave optics.
fn test_catalog() -> Vec<TelescopeRequest> {
    let req = |total: f64, target: f64, catalog: &[f64]| TelescopeRequest {
        total_distance_m: total,
        target_magnification: target,
        catalog_m: catalog.to_vec(),
        object_offset_m: 0.0,
    };
    vec![
        req(1.0, -1.0, &[0.25]),
        req(1.5, -2.0, &[0.25, 0.5]),
        req(1.5, -0.5, &[0.25, 0.5]),
        req(1.5, -1.0, &[0.25]),
        req(3.0, -1.0, &[0.5]),
        req(3.0, -0.5, &[0.25, 0.5]),
    ]
}

fn smooth_object(grid: Grid) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        let g = (-(x * x + y * y) / (0.5e-3f64).powi(2)).exp();
        let stripe = 1.0 - (-(y / 0.08e-3).powi(2)).exp();
        let spot = 1.0 - 0.5 * (-((x - 0.15e-3).powi(2) + y * y) / (0.05e-3f64).powi(2)).exp();
        Complex64::new(g * stripe * spot, 0.0)
    })
    .unwrap()
}

fn c9_abcd_wave() -> Outcome {
    let grid = Grid::new(512, 20e-6).unwrap();
    let object = smooth_object(grid);
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for req in test_catalog() {
        let plan = design_telescope(&req).unwrap();
        let mut elems = plan.twin_elements();
        elems.pop();
        let mut train = OpticalTrain::new(vec![OpticalElement::free(plan.object_offset)]);
        train.extend(elems);
        let at_lens = propagate_train(&object, ctx(), &train).unwrap();
        let reference = magnified_reference(&object.intensity(), plan.magnification).unwrap();
        let focus = best_focus(&at_lens, ctx(), plan.z_d, &reference).unwrap();
        worst = worst.max(focus.offset.abs());
        lines.push(format!(
            "{}/{}/{:.3}: {:+.1} um",
            plan.f_a,
            plan.f_b,
            plan.leg,
            focus.offset * 1e6
        ));
    }
    outcome(
        worst <= grid.pitch(),
        format!(
            "max focus offset {:.2} um (pitch 20 um); {}",
            worst * 1e6,
            lines.join(", ")
        ),
    )
}

fn c10_counting() -> Outcome {
    let quiet = |t: f64, seed: u64| CountingConfig {
        acquisition_time_s: t,
        singles_signal_per_s: 0.0,
        singles_idler_per_s: 0.0,
        coincidence_window_s: 5e-9,
        seed,
    };
    // moments over 10^4 independent points at rate 100/s, T = 10 s
    let n = 10_000;
    let flat = CoincidenceProfile::from_points((0..n).map(|i| i as f64).collect(), vec![100.0; n])
        .unwrap();
    let c = sample_counts(&flat, &quiet(10.0, 2024)).unwrap();
    let lambda = 1000.0;
    let mean = c.counts.iter().sum::<u64>() as f64 / n as f64;
    let var = c
        .counts
        .iter()
        .map(|&k| (k as f64 - mean).powi(2))
        .sum::<f64>()
        / (n as f64 - 1.0);
    let mean_ok = (mean - lambda).abs() < 3.0 * lambda.sqrt()
        && (mean - lambda).abs() < 4.0 * (lambda / n as f64).sqrt() * lambda.sqrt();
    let disp = var / mean;
    let disp_ok = (0.95..=1.05).contains(&disp);

    // SNR against acquisition time on a calibrated wire profile
    let profile = run(&preset("fig4b").unwrap(), None).unwrap().profile;
    let mean_snr = |t: f64| {
        (1..=100)
            .map(|seed| {
                let cfg = CountingConfig {
                    acquisition_time_s: t,
                    seed,
                    ..CountingConfig::default()
                };
                snr(&sample_counts(&profile, &cfg).unwrap()).unwrap()
            })
            .sum::<f64>()
            / 100.0
    };
    let ratio = mean_snr(20.0) / mean_snr(10.0);
    let snr_ok = (ratio / 2f64.sqrt() - 1.0).abs() <= 0.05;

    let cfg = CountingConfig::default();
    let mut a = Vec::new();
    let mut b = Vec::new();
    sample_counts(&profile, &cfg)
        .unwrap()
        .write_csv(&mut a)
        .unwrap();
    sample_counts(&profile, &cfg)
        .unwrap()
        .write_csv(&mut b)
        .unwrap();
    let det_ok = a == b;

    outcome(
        mean_ok && disp_ok && snr_ok && det_ok,
        format!(
            "mean {mean:.2} (lambda 1000), var/mean {disp:.4}, SNR(2T)/SNR(T) {ratio:.4} (sqrt 2 = 1.4142), seed-identical bytes {det_ok}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("propagator unitarity", c1_unitarity),
        ("Gaussian beam width vs analytic law", c2_gaussian_width),
        ("FFT propagator vs direct Fresnel quadrature", c3_oracle),
        ("sum-coordinate symmetry of the free rate", c4_sum_symmetry),
        ("inverse-square divergence prefactor", c5_inverse_square),
        ("lens-imaged closed form vs wave optics", c6_eq3),
        ("collimated vs pump-lens peak rate", c7_fig4_ratio),
        ("3 m telescope image vs 70 cm image", c8_fig5),
        ("ray-matrix image plane vs wave-optics focus", c9_abcd_wave),
        ("counting statistics", c10_counting),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
