//! Direct-quadrature Fresnel propagation, used to validate the FFT path.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, WaveContext};

pub const ORACLE_MAX_N: usize = 128;

/// Fresnel diffraction integral by direct summation over every source
/// sample, in the same envelope convention as [`super::propagate`]
/// (no `exp(i k z)` carrier).
///
/// The quadratic kernel factorizes in x and y, so the double sum is
/// evaluated as two passes over a 1-D kernel table. No FFT is involved.
pub fn oracle_fresnel_direct(
    field: &ScalarField,
    ctx: WaveContext,
    distance: f64,
) -> Result<ScalarField> {
    let n = field.n();
    if n > ORACLE_MAX_N {
        return Err(Error::Cost(format!(
            "direct quadrature is O(N^4); N = {n} exceeds {ORACLE_MAX_N}"
        )));
    }
    let lambda = ctx.wavelength();
    if !(distance.is_finite() && distance > 10.0 * lambda) {
        return Err(Error::invalid(format!(
            "oracle distance must exceed 10 wavelengths ({} m), got {distance}",
            10.0 * lambda
        )));
    }
    let p = field.pitch();
    let k = ctx.k();
    // kernel[j] for index offset j - (n - 1)
    let kernel: Vec<Complex64> = (0..2 * n - 1)
        .map(|j| {
            let d = (j as f64 - (n as f64 - 1.0)) * p;
            Complex64::from_polar(1.0, k * d * d / (2.0 * distance))
        })
        .collect();
    let kern = |out: usize, src: usize| kernel[out + n - 1 - src];

    let src = field.samples();
    // pass over x: tmp[r][c] = sum_c' K(c - c') U[r][c']
    let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
    tmp.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        let s = &src[r * n..(r + 1) * n];
        for (c, v) in row.iter_mut().enumerate() {
            *v = s.iter().enumerate().map(|(cp, u)| kern(c, cp) * u).sum();
        }
    });
    // pass over y
    let prefactor = Complex64::new(0.0, -1.0) * (p * p / (lambda * distance));
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        for (c, v) in row.iter_mut().enumerate() {
            let acc: Complex64 = (0..n).map(|rp| kern(r, rp) * tmp[rp * n + c]).sum();
            *v = acc * prefactor;
        }
    });
    ScalarField::from_samples(field.grid(), out)
}

/// On-axis Fresnel amplitude behind a uniformly lit disk of radius `a`.
pub fn disk_on_axis(a: f64, ctx: WaveContext, distance: f64) -> Complex64 {
    let phase = PI * a * a / (ctx.wavelength() * distance);
    Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, phase)
}
