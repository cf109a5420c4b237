//! Locating the wave-optics image plane behind a relay.

use crate::compare::ncc_samples;
use crate::error::{Error, Result};
use crate::field::{IntensityMap, ScalarField, Transverse, WaveContext};
use crate::propagation::propagate;

/// Correlation drop that marks the fit window as wide enough.
const MIN_DROP: f64 = 1e-6;
const FIT_POINTS: usize = 21;

/// The object intensity as an ideal imager with lateral magnification `m`
/// would render it: `I_obj(x / m, y / m)`, zero outside the object window.
pub fn magnified_reference(object: &IntensityMap, m: f64) -> Result<IntensityMap> {
    if !(m.is_finite() && m != 0.0) {
        return Err(Error::invalid("magnification must be finite and nonzero"));
    }
    let grid = object.grid();
    let n = grid.n();
    let mut values = Vec::with_capacity(grid.len());
    for row in 0..n {
        for col in 0..n {
            let p = grid.position(row, col);
            let q = Transverse::new(p.x / m, p.y / m);
            values.push(object.sample(q).unwrap_or(0.0));
        }
    }
    IntensityMap::new(grid, values)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Focus {
    /// Best-focus distance minus the nominal distance, meters.
    pub offset: f64,
    pub ncc_at_nominal: f64,
    /// Half-width of the fitted window.
    pub window: f64,
}

/// Propagates `field` to distances around `nominal` and fits a parabola to
/// the intensity correlation with `reference`; the vertex is best focus.
///
/// The window starts at half a pitch and doubles until the correlation at
/// its edges has dropped measurably, then 21 evenly spaced planes are fit.
pub fn best_focus(
    field: &ScalarField,
    ctx: WaveContext,
    nominal: f64,
    reference: &IntensityMap,
) -> Result<Focus> {
    let score = |z: f64| -> Result<f64> {
        let i = propagate(field, ctx, z)?.intensity();
        ncc_samples(i.values(), reference.values())
    };
    let c0 = score(nominal)?;
    let mut d = 0.5 * field.pitch();
    loop {
        if d >= nominal {
            return Err(Error::Undefined(
                "correlation does not fall off around the nominal image plane".into(),
            ));
        }
        let edge = score(nominal - d)?.max(score(nominal + d)?);
        if c0 - edge >= MIN_DROP {
            break;
        }
        d *= 2.0;
    }
    let half = (FIT_POINTS / 2) as f64;
    let zs: Vec<f64> = (0..FIT_POINTS)
        .map(|i| d * (i as f64 - half) / half)
        .collect();
    let cs = zs
        .iter()
        .map(|&z| score(nominal + z))
        .collect::<Result<Vec<f64>>>()?;
    // least-squares c = a z^2 + b z + c; symmetric abscissae decouple b
    let m2 = zs.iter().map(|z| z * z).sum::<f64>() / zs.len() as f64;
    let b =
        zs.iter().zip(&cs).map(|(z, c)| z * c).sum::<f64>() / zs.iter().map(|z| z * z).sum::<f64>();
    let a = zs
        .iter()
        .zip(&cs)
        .map(|(z, c)| (z * z - m2) * c)
        .sum::<f64>()
        / zs.iter().map(|z| (z * z - m2).powi(2)).sum::<f64>();
    if !(a < 0.0) {
        return Err(Error::Undefined(
            "correlation is not peaked near the nominal plane".into(),
        ));
    }
    Ok(Focus {
        offset: -b / (2.0 * a),
        ncc_at_nominal: c0,
        window: d,
    })
}
