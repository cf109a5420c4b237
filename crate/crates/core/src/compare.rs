//! Shape metrics for 1-D profiles: feature width, contrast, correlation.

use serde::Serialize;

use crate::biphoton::CoincidenceProfile;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Dip,
    Peak,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub ncc: f64,
    pub width_ratio: f64,
}

fn extent(ys: &[f64]) -> (f64, f64) {
    ys.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        })
}

/// Dip when both ends of the scan sit above the half level, peak when both
/// sit below; otherwise whichever extremum departs further from the mean.
pub fn dominant_feature(ys: &[f64]) -> Result<Feature> {
    let (min, max) = extent(ys);
    if ys.is_empty() || !(max > min) {
        return Err(Error::Undefined("profile is flat; no feature".into()));
    }
    let half = 0.5 * (max + min);
    let (first, last) = (ys[0], ys[ys.len() - 1]);
    if first > half && last > half {
        return Ok(Feature::Dip);
    }
    if first < half && last < half {
        return Ok(Feature::Peak);
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    Ok(if mean - min > max - mean {
        Feature::Dip
    } else {
        Feature::Peak
    })
}

/// `(max - min) / (max + min)`.
pub fn contrast(ys: &[f64]) -> Result<f64> {
    let (min, max) = extent(ys);
    if ys.is_empty() || !(max + min > 0.0) {
        return Err(Error::Undefined("contrast of an all-zero profile".into()));
    }
    Ok((max - min) / (max + min))
}

/// Full width of the dominant feature at the half-contrast level, from
/// linearly interpolated crossings on either side of the extremum.
pub fn feature_width(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("coordinate and value lengths differ"));
    }
    let feature = dominant_feature(ys)?;
    let (min, max) = extent(ys);
    let half = 0.5 * (max + min);
    // work on a peak: flip dips
    let v: Vec<f64> = match feature {
        Feature::Peak => ys.iter().map(|y| y - half).collect(),
        Feature::Dip => ys.iter().map(|y| half - y).collect(),
    };
    let center = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let crossing = |i: usize, j: usize| xs[i] + (xs[j] - xs[i]) * v[i] / (v[i] - v[j]);
    let left = (1..=center)
        .rev()
        .find(|&i| v[i - 1] <= 0.0)
        .map(|i| crossing(i, i - 1));
    let right = (center..v.len() - 1)
        .find(|&i| v[i + 1] <= 0.0)
        .map(|i| crossing(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Ok((r - l).abs()),
        _ => Err(Error::Undefined(
            "feature does not cross half contrast on both sides within the scan".into(),
        )),
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let j = xs.partition_point(|&v| v < x);
    if j == 0 {
        return ys[0];
    }
    if j >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    ys[j - 1] + t * (ys[j] - ys[j - 1])
}

fn min_step(xs: &[f64]) -> f64 {
    xs.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Mean-subtracted normalized cross-correlation of equal-length samples.
pub fn ncc_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(
            "correlation needs equal, nonempty sample sets",
        ));
    }
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined(
            "correlation with a constant profile".into(),
        ));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Correlation after resampling both profiles onto their common range at
/// the finer of the two steps.
pub fn ncc(a: &CoincidenceProfile, b: &CoincidenceProfile) -> Result<f64> {
    let (ax, bx) = (&a.coordinates, &b.coordinates);
    if ax.len() < 2 || bx.len() < 2 {
        return Err(Error::invalid("profiles need at least two points"));
    }
    let lo = ax[0].max(bx[0]);
    let hi = ax[ax.len() - 1].min(bx[bx.len() - 1]);
    if !(hi > lo) {
        return Err(Error::invalid("profiles do not overlap"));
    }
    let step = min_step(ax).min(min_step(bx));
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| (lo + i as f64 * step).min(hi)).collect();
    let ra: Vec<f64> = grid.iter().map(|&x| interp(ax, &a.rates, x)).collect();
    let rb: Vec<f64> = grid.iter().map(|&x| interp(bx, &b.rates, x)).collect();
    ncc_samples(&ra, &rb)
}

pub fn compare_profiles(a: &CoincidenceProfile, b: &CoincidenceProfile) -> Result<Comparison> {
    let ncc = ncc(a, b)?;
    let wa = feature_width(&a.coordinates, &a.rates)?;
    let wb = feature_width(&b.coordinates, &b.rates)?;
    Ok(Comparison {
        ncc,
        width_ratio: wa / wb,
    })
}
