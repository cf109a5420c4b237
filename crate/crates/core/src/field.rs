//! Sampled complex scalar fields on a centered square grid.
//!
//! Sample `(row, col)` sits at transverse position
//! `x = (col - N/2) * pitch`, `y = (row - N/2) * pitch`, so index `N/2`
//! is the optical axis. Samples are stored row-major. Field values are
//! complex envelopes with the on-axis carrier `exp(i k z)` factored out.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MIN_GRID: usize = 16;

/// Transverse coordinate pair in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Transverse {
    pub x: f64,
    pub y: f64,
}

impl Transverse {
    pub const ORIGIN: Transverse = Transverse { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

impl std::ops::Add for Transverse {
    type Output = Transverse;
    fn add(self, o: Transverse) -> Transverse {
        Transverse::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Transverse {
    type Output = Transverse;
    fn sub(self, o: Transverse) -> Transverse {
        Transverse::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Transverse {
    type Output = Transverse;
    fn mul(self, s: f64) -> Transverse {
        Transverse::new(self.x * s, self.y * s)
    }
}

/// Square sampling grid shared by fields, masks and intensity maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    pitch: f64,
}

impl Grid {
    pub fn new(n: usize, pitch: f64) -> Result<Self> {
        if n < MIN_GRID || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "grid size must be even and >= {MIN_GRID}, got {n}"
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::invalid(format!(
                "pitch must be positive, got {pitch}"
            )));
        }
        Ok(Self { n, pitch })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Full window width `N * pitch`.
    pub fn width(&self) -> f64 {
        self.n as f64 * self.pitch
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of column (or row) index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch
    }

    pub fn position(&self, row: usize, col: usize) -> Transverse {
        Transverse::new(self.coord(col), self.coord(row))
    }

    /// Fractional (col, row) index of a transverse position.
    pub fn fractional_index(&self, p: Transverse) -> (f64, f64) {
        let c = (self.n / 2) as f64;
        (p.x / self.pitch + c, p.y / self.pitch + c)
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.coord(i))
    }
}

/// Wavenumber of a monochromatic scalar wave.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveContext {
    k: f64,
}

impl WaveContext {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        Ok(Self { k })
    }

    pub fn from_wavelength(wavelength: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::invalid(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        Self::new(2.0 * PI / wavelength)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_samples(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if samples
            .iter()
            .any(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(Error::invalid("field samples must be finite"));
        }
        Ok(Self { grid, samples })
    }

    /// Builds a field by evaluating `f(x, y)` at every sample position.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> Complex64) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.len());
        for row in 0..grid.n {
            let y = grid.coord(row);
            for col in 0..grid.n {
                samples.push(f(grid.coord(col), y));
            }
        }
        Self::from_samples(grid, samples)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn pitch(&self) -> f64 {
        self.grid.pitch
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.samples[row * self.grid.n + col]
    }

    /// Multiplies every sample by `s`.
    pub fn scaled(mut self, s: Complex64) -> Self {
        for v in &mut self.samples {
            *v *= s;
        }
        self
    }

    pub fn apply_mask(&self, mask: &TransmissionMask) -> Result<ScalarField> {
        if mask.grid != self.grid {
            return Err(Error::invalid("mask grid does not match field grid"));
        }
        let samples = self
            .samples
            .iter()
            .zip(&mask.values)
            .map(|(s, t)| s * *t)
            .collect();
        Ok(ScalarField {
            grid: self.grid,
            samples,
        })
    }

    pub fn intensity(&self) -> IntensityMap {
        IntensityMap {
            grid: self.grid,
            values: self.samples.iter().map(|s| s.norm_sqr()).collect(),
        }
    }

    /// Samples along the row through the axis (y = 0), with their x coordinates.
    pub fn central_row(&self) -> (Vec<f64>, Vec<Complex64>) {
        let n = self.grid.n;
        let row = n / 2;
        (
            self.grid.coords().collect(),
            self.samples[row * n..(row + 1) * n].to_vec(),
        )
    }

    /// Writes `x_m,y_m,re,im` rows; values use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x_m,y_m,re,im")?;
        let n = self.grid.n;
        for row in 0..n {
            let y = self.grid.coord(row);
            for col in 0..n {
                let s = self.samples[row * n + col];
                writeln!(w, "{},{},{},{}", self.grid.coord(col), y, s.re, s.im)?;
            }
        }
        Ok(())
    }

    /// Reads the format written by [`ScalarField::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field CSV".into()))??;
        if header.trim() != "x_m,y_m,re,im" {
            return Err(Error::Parse(format!(
                "unexpected field CSV header `{header}`"
            )));
        }
        let mut xs = Vec::new();
        let mut samples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            if cols.len() != 4 {
                return Err(Error::Parse(format!(
                    "line {}: expected 4 columns",
                    lineno + 2
                )));
            }
            xs.push(cols[0]);
            samples.push(Complex64::new(cols[2], cols[3]));
        }
        let n = (samples.len() as f64).sqrt().round() as usize;
        if n * n != samples.len() || n < 2 {
            return Err(Error::Parse("field CSV is not a square grid".into()));
        }
        // the column one step right of the axis sits at exactly one pitch
        let grid = Grid::new(n, xs[n / 2 + 1])?;
        Self::from_samples(grid, samples)
    }

    /// 16-bit binary PGM of |amplitude|^2 normalized to its maximum.
    pub fn write_pgm<W: Write>(&self, w: W) -> Result<()> {
        self.intensity().write_pgm(w)
    }
}

/// Real-valued map on a grid (intensities, rate densities).
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMap {
    grid: Grid,
    values: Vec<f64>,
}

impl IntensityMap {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("value count does not match grid"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Bilinear interpolation at a transverse position. Positions outside
    /// the sampled window are an error, not zero.
    pub fn sample(&self, p: Transverse) -> Result<f64> {
        let n = self.grid.n;
        let (cx, cy) = self.grid.fractional_index(p);
        let last = (n - 1) as f64;
        if !(cx >= 0.0 && cx <= last && cy >= 0.0 && cy <= last) {
            return Err(Error::OutOfWindow {
                x_m: p.x,
                y_m: p.y,
                half_width_m: self.grid.width() / 2.0,
            });
        }
        let c0 = (cx.floor() as usize).min(n - 2);
        let r0 = (cy.floor() as usize).min(n - 2);
        let tx = cx - c0 as f64;
        let ty = cy - r0 as f64;
        let v = |r: usize, c: usize| self.values[r * n + c];
        Ok((1.0 - ty) * ((1.0 - tx) * v(r0, c0) + tx * v(r0, c0 + 1))
            + ty * ((1.0 - tx) * v(r0 + 1, c0) + tx * v(r0 + 1, c0 + 1)))
    }

    pub fn write_pgm<W: Write>(&self, w: W) -> Result<()> {
        write_pgm16(w, self.grid.n, self.grid.n, &self.values)
    }

    /// Writes `x_m,y_m,value` rows under the given value column name.
    pub fn write_csv<W: Write>(&self, mut w: W, value_column: &str) -> Result<()> {
        writeln!(w, "x_m,y_m,{value_column}")?;
        let n = self.grid.n;
        for row in 0..n {
            let y = self.grid.coord(row);
            for col in 0..n {
                writeln!(
                    w,
                    "{},{},{}",
                    self.grid.coord(col),
                    y,
                    self.values[row * n + col]
                )?;
            }
        }
        Ok(())
    }
}

/// Binary PGM (P5), 16-bit big-endian, values normalized to the maximum.
pub fn write_pgm16<W: Write>(mut w: W, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::invalid("PGM value count does not match dimensions"));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let mut buf = Vec::with_capacity(values.len() * 2);
    for &v in values {
        let q = if max > 0.0 {
            (v.max(0.0) / max * 65535.0).round() as u16
        } else {
            0
        };
        buf.extend_from_slice(&q.to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Real amplitude transmission in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMask {
    grid: Grid,
    values: Vec<f64>,
}

impl TransmissionMask {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("mask value count does not match grid"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "mask transmission {v} outside [0, 1]"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for row in 0..grid.n {
            let y = grid.coord(row);
            for col in 0..grid.n {
                values.push(f(grid.coord(col), y));
            }
        }
        Self::new(grid, values)
    }

    /// Opaque disk complement: transmits inside `radius`, blocks outside.
    pub fn circular_aperture(grid: Grid, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!(
                "aperture radius must be positive, got {radius}"
            )));
        }
        let r2 = radius * radius;
        Self::from_fn(grid, |x, y| if x * x + y * y <= r2 { 1.0 } else { 0.0 })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Gaussian beam `exp(-rho^2 / waist^2)` with flat phase and unit peak.
pub fn gaussian_beam(waist: f64, n: usize, pitch: f64) -> Result<ScalarField> {
    let grid = Grid::new(n, pitch)?;
    if !(waist.is_finite() && waist > 2.0 * pitch) {
        return Err(Error::Sampling {
            reason: format!(
                "waist {waist} m must exceed two pitches ({} m)",
                2.0 * pitch
            ),
            required_n: n,
        });
    }
    if grid.width() <= 6.0 * waist {
        let mut required = (6.0 * waist / pitch).floor() as usize + 1;
        required += required % 2;
        return Err(Error::Sampling {
            reason: format!(
                "window {} m leaves no guard band around a {waist} m waist",
                grid.width()
            ),
            required_n: required.max(MIN_GRID),
        });
    }
    let w2 = waist * waist;
    ScalarField::from_fn(grid, |x, y| {
        Complex64::new((-(x * x + y * y) / w2).exp(), 0.0)
    })
}

/// Opaque vertical wire of the given width centered on the axis.
///
/// The band covers `round(width / pitch)` columns starting at
/// `N/2 - floor(count/2)`, so odd counts are symmetric about the axis.
pub fn wire_mask(width: f64, n: usize, pitch: f64) -> Result<TransmissionMask> {
    let grid = Grid::new(n, pitch)?;
    if !(width.is_finite() && width >= 2.0 * pitch) {
        return Err(Error::Resolution(format!(
            "wire width {width} m is below two grid pitches ({} m)",
            2.0 * pitch
        )));
    }
    let count = ((width / pitch).round() as usize).min(n);
    let start = (n / 2).saturating_sub(count / 2);
    let stop = (start + count).min(n);
    let mut values = vec![1.0; grid.len()];
    for row in 0..n {
        for col in start..stop {
            values[row * n + col] = 0.0;
        }
    }
    TransmissionMask::new(grid, values)
}

/// Discrete energy proxy `sum |s|^2 * pitch^2`.
pub fn power(field: &ScalarField) -> f64 {
    let p2 = field.pitch() * field.pitch();
    field.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * p2
}

/// Relative RMS difference `sqrt(sum |a-b|^2 / sum |b|^2)`.
pub fn relative_rms(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::invalid("fields are on different grids"));
    }
    let num: f64 = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let den: f64 = b.samples.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::Undefined(
            "reference field is identically zero".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Second-moment 1/e^2 radius along x: `2 * sqrt(<x^2>)` about the centroid.
pub fn second_moment_radius_x(field: &ScalarField) -> f64 {
    let grid = field.grid;
    let n = grid.n;
    let mut total = 0.0;
    let mut mx = 0.0;
    let mut mxx = 0.0;
    for row in 0..n {
        for col in 0..n {
            let i = field.samples[row * n + col].norm_sqr();
            let x = grid.coord(col);
            total += i;
            mx += i * x;
            mxx += i * x * x;
        }
    }
    let mean = mx / total;
    2.0 * (mxx / total - mean * mean).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_peak_and_waist() {
        let f = gaussian_beam(1e-3, 512, 20e-6).unwrap();
        assert_eq!(f.at(256, 256), Complex64::new(1.0, 0.0));
        // 50 pitches = 1 mm = waist
        let v = f.at(256, 306).re;
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_power_matches_closed_form() {
        let w = 1e-3;
        let f = gaussian_beam(w, 512, 20e-6).unwrap();
        let expect = PI / 2.0 * w * w;
        assert!((power(&f) / expect - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gaussian_guard_band_reports_required_n() {
        match gaussian_beam(1e-3, 256, 20e-6) {
            Err(Error::Sampling { required_n, .. }) => {
                assert!(required_n as f64 * 20e-6 > 6e-3);
                assert_eq!(required_n % 2, 0);
            }
            other => panic!("expected sampling error, got {other:?}"),
        }
        assert!(matches!(
            gaussian_beam(30e-6, 512, 20e-6),
            Err(Error::Sampling { .. })
        ));
    }

    #[test]
    fn gaussian_symmetry() {
        let f = gaussian_beam(0.2e-3, 64, 20e-6).unwrap();
        let n = 64;
        for i in 1..n {
            for j in 1..n {
                let a = f.at(i, j);
                assert_eq!(a, f.at(j, i));
                assert_eq!(a, f.at(n - i, n - j));
            }
        }
    }

    #[test]
    fn wire_has_ten_zero_columns() {
        let m = wire_mask(0.2e-3, 512, 20e-6).unwrap();
        let zero_cols = (0..512).filter(|&c| m.values()[c] == 0.0).count();
        assert_eq!(zero_cols, 10);
        // every row identical
        assert!(
            (0..512).all(|r| m.values()[r * 512 + 251] == 0.0 && m.values()[r * 512 + 250] == 1.0)
        );
    }

    #[test]
    fn wire_full_width_blocks_everything() {
        let m = wire_mask(512.0 * 20e-6, 512, 20e-6).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wire_too_narrow() {
        assert!(matches!(
            wire_mask(30e-6, 512, 20e-6),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn uniform_beam_loss_through_wire() {
        let (n, p, w) = (128, 20e-6, 0.3e-3);
        let grid = Grid::new(n, p).unwrap();
        let f = ScalarField::from_fn(grid, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        let out = f.apply_mask(&wire_mask(w, n, p).unwrap()).unwrap();
        let lost = 1.0 - power(&out) / power(&f);
        assert!((lost - w / (n as f64 * p)).abs() <= p / (n as f64 * p));
    }

    #[test]
    fn power_trivial_cases() {
        let grid = Grid::new(16, 5e-6).unwrap();
        assert_eq!(power(&ScalarField::zeros(grid)), 0.0);
        let mut f = ScalarField::zeros(grid);
        f.samples_mut()[17] = Complex64::new(1.0, 0.0);
        assert!((power(&f) - 25e-12).abs() < 1e-24);
    }

    #[test]
    fn bilinear_sampling_and_window() {
        let grid = Grid::new(16, 1.0).unwrap();
        let m = IntensityMap::new(grid, (0..256).map(|i| (i % 16) as f64).collect()).unwrap();
        assert!((m.sample(Transverse::new(0.5, 0.0)).unwrap() - 8.5).abs() < 1e-12);
        assert!((m.sample(Transverse::new(7.0, -8.0)).unwrap() - 15.0).abs() < 1e-12);
        assert!(matches!(
            m.sample(Transverse::new(7.5, 0.0)),
            Err(Error::OutOfWindow { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = gaussian_beam(50e-6, 16, 20e-6)
            .unwrap()
            .scaled(Complex64::from_polar(1.0, 0.3));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = ScalarField::read_csv(&buf[..]).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn pgm_header_and_size() {
        let f = gaussian_beam(50e-6, 16, 20e-6).unwrap();
        let mut buf = Vec::new();
        f.write_pgm(&mut buf).unwrap();
        let header = b"P5\n16 16\n65535\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 16 * 16 * 2);
        // peak at center normalized to full scale
        let idx = header.len() + 2 * (8 * 16 + 8);
        assert_eq!(&buf[idx..idx + 2], &[0xff, 0xff]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn power_phase_invariant(phase in -10.0f64..10.0, waist in 0.03e-3f64..0.1e-3) {
                let f = gaussian_beam(waist, 64, 10e-6).unwrap();
                let g = f.clone().scaled(Complex64::from_polar(1.0, phase));
                prop_assert!((power(&g) / power(&f) - 1.0).abs() < 1e-14);
            }

            #[test]
            fn wire_mask_idempotent(width_px in 2usize..40) {
                let p = 20e-6;
                let m = wire_mask(width_px as f64 * p, 64, p).unwrap();
                let f = gaussian_beam(0.15e-3, 64, p).unwrap();
                let once = f.apply_mask(&m).unwrap();
                let twice = once.apply_mask(&m).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
