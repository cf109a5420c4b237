//! Angular-spectrum propagation, thin lenses and ordered optical trains.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, TransmissionMask, WaveContext};
use crate::paraxial::RayMatrix;

pub mod oracle;

/// Band-limited cone must keep at least this many frequency bins per side.
const MIN_BAND_BINS: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub enum OpticalElement {
    FreeSpace {
        distance: f64,
    },
    /// Signed focal length (positive converging); infinite means no lens.
    ThinLens {
        focal: f64,
        aperture_radius: Option<f64>,
    },
    Mask(TransmissionMask),
}

impl OpticalElement {
    pub fn free(distance: f64) -> Self {
        OpticalElement::FreeSpace { distance }
    }

    pub fn lens(focal: f64) -> Self {
        OpticalElement::ThinLens {
            focal,
            aperture_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OpticalElement::FreeSpace { distance } => {
                if !(distance.is_finite() && distance >= 0.0) {
                    return Err(Error::invalid(format!(
                        "free-space distance must be >= 0, got {distance}"
                    )));
                }
            }
            OpticalElement::ThinLens {
                focal,
                aperture_radius,
            } => {
                if focal == 0.0 || focal.is_nan() {
                    return Err(Error::invalid("focal length must be nonzero"));
                }
                if let Some(r) = aperture_radius {
                    if !(r.is_finite() && r > 0.0) {
                        return Err(Error::invalid(format!(
                            "lens aperture radius must be positive, got {r}"
                        )));
                    }
                }
            }
            OpticalElement::Mask(_) => {}
        }
        Ok(())
    }

    /// Paraxial ray matrix; masks act as identity.
    pub fn ray_matrix(&self) -> RayMatrix {
        match *self {
            OpticalElement::FreeSpace { distance } => RayMatrix::free(distance),
            OpticalElement::ThinLens { focal, .. } => RayMatrix::lens(focal),
            OpticalElement::Mask(_) => RayMatrix::identity(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OpticalTrain {
    pub elements: Vec<OpticalElement>,
}

impl OpticalTrain {
    pub fn new(elements: Vec<OpticalElement>) -> Self {
        Self { elements }
    }

    pub fn push(&mut self, e: OpticalElement) {
        self.elements.push(e);
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = OpticalElement>) {
        self.elements.extend(other);
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Sum of free-space distances.
    pub fn length(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                OpticalElement::FreeSpace { distance } => *distance,
                _ => 0.0,
            })
            .sum()
    }

    pub fn ray_matrix(&self) -> RayMatrix {
        RayMatrix::compose(self.elements.iter().map(OpticalElement::ray_matrix))
    }
}

/// Largest distance for which the band-limited transfer function still
/// keeps `MIN_BAND_BINS` frequency bins per side on this grid.
pub fn max_safe_distance(ctx: WaveContext, grid: Grid) -> f64 {
    let l = grid.width();
    let ratio = l / (MIN_BAND_BINS * ctx.wavelength());
    if ratio <= 1.0 {
        0.0
    } else {
        0.5 * l * (ratio * ratio - 1.0).sqrt()
    }
}

/// Highest spatial frequency (cycles/m) kept when propagating `distance`:
/// components that would walk more than half a window off axis are zeroed.
pub fn band_limit(ctx: WaveContext, grid: Grid, distance: f64) -> f64 {
    let s = 2.0 * distance / grid.width();
    1.0 / (ctx.wavelength() * (s * s + 1.0).sqrt())
}

/// Spatial frequency (cycles/m) of FFT bin `m` on an `n`-point grid.
#[inline]
fn bin_frequency(m: usize, n: usize, width: f64) -> f64 {
    let signed = if m < n / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    };
    signed / width
}

struct Fft2 {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            n,
        }
    }

    fn rows(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let rows_per_chunk = (n / rayon::current_num_threads().max(1)).max(8);
        data.par_chunks_mut(n * rows_per_chunk)
            .for_each(|chunk| fft.process(chunk));
    }

    fn transform(&self, data: &mut Vec<Complex64>, inverse: bool) {
        let fft = if inverse {
            &self.inverse
        } else {
            &self.forward
        };
        self.rows(data, fft);
        let mut t = transpose(data, self.n);
        self.rows(&mut t, fft);
        *data = transpose(&t, self.n);
    }
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        for (c, v) in row.iter_mut().enumerate() {
            *v = data[c * n + r];
        }
    });
    out
}

/// Angular-spectrum propagation over `distance` (meters) with the exact
/// transfer function `exp(i d (kz - k))`, evanescent waves removed and
/// the spectrum band-limited against wraparound.
pub fn propagate(field: &ScalarField, ctx: WaveContext, distance: f64) -> Result<ScalarField> {
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Error::invalid(format!(
            "propagation distance must be >= 0, got {distance}"
        )));
    }
    if distance == 0.0 {
        return Ok(field.clone());
    }
    let grid = field.grid();
    let max_safe = max_safe_distance(ctx, grid);
    if distance > max_safe {
        return Err(Error::AliasingRisk {
            distance_m: distance,
            max_safe_m: max_safe,
        });
    }
    let n = grid.n();
    let width = grid.width();
    let k = ctx.k();
    let k2 = k * k;
    let f_max = band_limit(ctx, grid, distance);
    let two_pi = 2.0 * std::f64::consts::PI;

    let freqs: Vec<f64> = (0..n).map(|m| bin_frequency(m, n, width)).collect();
    let fft = Fft2::new(n);
    let mut data = field.samples().to_vec();
    fft.transform(&mut data, false);

    let norm = 1.0 / (n * n) as f64;
    data.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        let fy = freqs[r];
        let ky = two_pi * fy;
        for (c, v) in row.iter_mut().enumerate() {
            let fx = freqs[c];
            let kx = two_pi * fx;
            let kt2 = kx * kx + ky * ky;
            if fx.abs() > f_max || fy.abs() > f_max || kt2 >= k2 {
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            let kz = (k2 - kt2).sqrt();
            // kz - k without cancellation
            let dphase = -kt2 / (k + kz) * distance;
            *v *= Complex64::from_polar(norm, dphase);
        }
    });
    fft.transform(&mut data, true);
    ScalarField::from_samples(grid, data)
}

/// Thin-lens phase `exp(-i k rho^2 / (2 focal))`. An infinite focal
/// length is the identity.
pub fn apply_thin_lens(field: &ScalarField, ctx: WaveContext, focal: f64) -> Result<ScalarField> {
    if focal == 0.0 || focal.is_nan() {
        return Err(Error::invalid("focal length must be nonzero"));
    }
    if focal.is_infinite() {
        return Ok(field.clone());
    }
    let grid = field.grid();
    let n = grid.n();
    let k = ctx.k();
    let mut out = field.clone();
    out.samples_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(r, row)| {
            let y = grid.coord(r);
            for (c, v) in row.iter_mut().enumerate() {
                let x = grid.coord(c);
                let phase = k * (x * x + y * y) / (2.0 * focal);
                *v *= Complex64::from_polar(1.0, -phase);
            }
        });
    Ok(out)
}

fn clip_circular(field: &ScalarField, radius: f64) -> Result<ScalarField> {
    field.apply_mask(&TransmissionMask::circular_aperture(field.grid(), radius)?)
}

pub fn apply_element(
    field: &ScalarField,
    ctx: WaveContext,
    element: &OpticalElement,
) -> Result<ScalarField> {
    element.validate()?;
    match element {
        OpticalElement::FreeSpace { distance } => propagate(field, ctx, *distance),
        OpticalElement::ThinLens {
            focal,
            aperture_radius,
        } => {
            let clipped;
            let input = match aperture_radius {
                Some(r) => {
                    clipped = clip_circular(field, *r)?;
                    &clipped
                }
                None => field,
            };
            apply_thin_lens(input, ctx, *focal)
        }
        OpticalElement::Mask(mask) => field.apply_mask(mask),
    }
}

/// Applies the elements left to right. Errors carry the element index.
pub fn propagate_train(
    field: &ScalarField,
    ctx: WaveContext,
    train: &OpticalTrain,
) -> Result<ScalarField> {
    let mut current = field.clone();
    for (index, element) in train.elements.iter().enumerate() {
        current = apply_element(&current, ctx, element).map_err(|e| Error::Element {
            index,
            source: Box::new(e),
        })?;
    }
    Ok(current)
}
