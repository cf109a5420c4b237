//! Paraxial ray-transfer matrices and the collimating relay designer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::OpticalElement;

pub const IMAGING_TOL: f64 = 1e-9;
pub const COLLIMATION_TOL: f64 = 1e-9;
pub const DET_TOL: f64 = 1e-12;

/// Leg-length scan step used by [`design_telescope`].
pub const DESIGN_STEP: f64 = 1e-3;
/// Accepted relative magnification error of a designed relay.
pub const MAGNIFICATION_TOL: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayMatrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Self { a, b, c, d };
        let det = m.det();
        if !det.is_finite() || (det - 1.0).abs() > DET_TOL {
            return Err(Error::invalid(format!("ray matrix determinant {det} != 1")));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn free(distance: f64) -> Self {
        Self {
            a: 1.0,
            b: distance,
            c: 0.0,
            d: 1.0,
        }
    }

    /// Thin lens; an infinite focal length gives the identity.
    pub fn lens(focal: f64) -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: -1.0 / focal,
            d: 1.0,
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// `self` applied first, then `next`.
    pub fn then(&self, next: &RayMatrix) -> RayMatrix {
        RayMatrix {
            a: next.a * self.a + next.b * self.c,
            b: next.a * self.b + next.b * self.d,
            c: next.c * self.a + next.d * self.c,
            d: next.c * self.b + next.d * self.d,
        }
    }

    /// Product of matrices given in traversal order: `m_n ... m_2 m_1`.
    pub fn compose(ms: impl IntoIterator<Item = RayMatrix>) -> RayMatrix {
        ms.into_iter()
            .fold(RayMatrix::identity(), |acc, m| acc.then(&m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImagingCheck {
    pub is_image: bool,
    /// The A element; the lateral magnification when `is_image`.
    pub magnification: f64,
}

pub fn check_imaging(m: &RayMatrix) -> ImagingCheck {
    ImagingCheck {
        is_image: m.b.abs() < IMAGING_TOL,
        magnification: m.a,
    }
}

/// A point source at the input plane leaves as parallel rays.
pub fn check_collimation(m: &RayMatrix) -> bool {
    m.d.abs() < COLLIMATION_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelescopeRequest {
    /// Crystal to detector, meters.
    pub total_distance_m: f64,
    pub target_magnification: f64,
    pub catalog_m: Vec<f64>,
    /// Distance from the imaged object to the crystal, measured along the
    /// unfolded path. Zero images the crystal plane itself.
    #[serde(default)]
    pub object_offset_m: f64,
}

/// Two lenses per beam: `f_a` one focal length from the crystal
/// (collimating), `f_b` after the long leg `leg`, detector `z_d` behind it.
/// Signal and idler get identical copies (f1 = f2 = f_a, f3 = f4 = f_b).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopePlan {
    pub f_a: f64,
    pub f_b: f64,
    pub leg: f64,
    pub z_d: f64,
    pub object_offset: f64,
    /// Object-to-detector A element.
    pub magnification: f64,
    /// Ray-height scale at the second lens (A element from the crystal),
    /// a proxy for the intermediate image size.
    pub intermediate_scale: f64,
}

impl TelescopePlan {
    pub fn focal_lengths(&self) -> [f64; 4] {
        [self.f_a, self.f_a, self.f_b, self.f_b]
    }

    /// Station positions from the crystal: collimators, relay lenses, detector.
    pub fn stations(&self) -> [f64; 3] {
        [
            self.f_a,
            self.f_a + self.leg,
            self.f_a + self.leg + self.z_d,
        ]
    }

    pub fn lens_count(&self) -> usize {
        4
    }

    /// One beam's crystal-to-detector elements.
    pub fn twin_elements(&self) -> Vec<OpticalElement> {
        vec![
            OpticalElement::free(self.f_a),
            OpticalElement::lens(self.f_a),
            OpticalElement::free(self.leg),
            OpticalElement::lens(self.f_b),
            OpticalElement::free(self.z_d),
        ]
    }

    pub fn twin_matrix(&self) -> RayMatrix {
        RayMatrix::compose(self.twin_elements().iter().map(OpticalElement::ray_matrix))
    }

    /// Object plane to detector.
    pub fn object_matrix(&self) -> RayMatrix {
        RayMatrix::free(self.object_offset).then(&self.twin_matrix())
    }

    /// Crystal through the first lens, which must collimate.
    pub fn collimator_matrix(&self) -> RayMatrix {
        RayMatrix::free(self.f_a).then(&RayMatrix::lens(self.f_a))
    }

    fn summary(&self) -> String {
        format!(
            "f_a = {} m, f_b = {} m, leg = {:.6} m, detector {:.6} m after f_b, magnification {:.6}",
            self.f_a, self.f_b, self.leg, self.z_d, self.magnification
        )
    }
}

fn relay_matrix(f_a: f64, f_b: f64, leg: f64, z_d: f64, offset: f64) -> RayMatrix {
    RayMatrix::compose([
        RayMatrix::free(offset + f_a),
        RayMatrix::lens(f_a),
        RayMatrix::free(leg),
        RayMatrix::lens(f_b),
        RayMatrix::free(z_d),
    ])
}

fn validate_request(req: &TelescopeRequest) -> Result<()> {
    if !(req.total_distance_m.is_finite() && req.total_distance_m > 0.0) {
        return Err(Error::invalid("total distance must be positive"));
    }
    let t = req.target_magnification.abs();
    if !(0.1..=10.0).contains(&t) {
        return Err(Error::invalid(format!(
            "|target magnification| must lie in [0.1, 10], got {}",
            req.target_magnification
        )));
    }
    if req.catalog_m.is_empty() {
        return Err(Error::invalid("lens catalog is empty"));
    }
    if let Some(f) = req.catalog_m.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::invalid(format!(
            "catalog focal lengths must be positive, got {f}"
        )));
    }
    if !(req.object_offset_m.is_finite() && req.object_offset_m >= 0.0) {
        return Err(Error::invalid("object offset must be >= 0"));
    }
    Ok(())
}

/// All imaging relays for one lens pair: leg lengths where B vanishes.
fn pair_roots(req: &TelescopeRequest, f_a: f64, f_b: f64) -> Vec<TelescopePlan> {
    let total = req.total_distance_m;
    let offset = req.object_offset_m;
    let span = total - f_a;
    if span <= 0.0 {
        return Vec::new();
    }
    let b_of = |leg: f64| relay_matrix(f_a, f_b, leg, total - f_a - leg, offset).b;
    let steps = (span / DESIGN_STEP).floor() as usize;
    let mut legs = Vec::new();
    let mut prev = (0.0, b_of(0.0));
    if prev.1 == 0.0 {
        legs.push(0.0);
    }
    for j in 1..=steps + 1 {
        let x = if j > steps {
            span
        } else {
            j as f64 * DESIGN_STEP
        };
        if x <= prev.0 {
            continue;
        }
        let bx = b_of(x);
        if bx == 0.0 {
            legs.push(x);
        } else if prev.1 != 0.0 && prev.1.signum() != bx.signum() {
            let (mut lo, mut hi, mut blo) = (prev.0, x, prev.1);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let bm = b_of(mid);
                if bm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if bm.signum() == blo.signum() {
                    lo = mid;
                    blo = bm;
                } else {
                    hi = mid;
                }
            }
            let b_lo = b_of(lo).abs();
            let b_hi = b_of(hi).abs();
            legs.push(if b_lo <= b_hi { lo } else { hi });
        }
        prev = (x, bx);
    }
    legs.into_iter()
        .filter_map(|leg| {
            let z_d = total - f_a - leg;
            if leg <= 0.0 || z_d <= 0.0 {
                return None;
            }
            let m = relay_matrix(f_a, f_b, leg, z_d, offset);
            Some(TelescopePlan {
                f_a,
                f_b,
                leg,
                z_d,
                object_offset: offset,
                magnification: m.a,
                intermediate_scale: (1.0 - leg / f_a).abs(),
            })
        })
        .collect()
}

fn magnification_error(plan: &TelescopePlan, target: f64) -> f64 {
    (plan.magnification - target).abs() / target.abs()
}

/// Searches every ordered catalog pair and leg length for an imaging relay
/// that collimates at the first lens and meets the magnification target.
/// Ranked by lens count, intermediate scale, then magnification error.
pub fn design_telescope(req: &TelescopeRequest) -> Result<TelescopePlan> {
    validate_request(req)?;
    let target = req.target_magnification;
    let mut catalog = req.catalog_m.clone();
    catalog.sort_by(f64::total_cmp);
    catalog.dedup();

    let mut candidates = Vec::new();
    for &f_a in &catalog {
        for &f_b in &catalog {
            candidates.extend(pair_roots(req, f_a, f_b));
        }
    }
    let (mut good, bad): (Vec<_>, Vec<_>) = candidates.into_iter().partition(|p| {
        magnification_error(p, target) < MAGNIFICATION_TOL
            && p.object_matrix().b.abs() < 1e-6
            && check_collimation(&p.collimator_matrix())
    });
    good.sort_by(|x, y| {
        x.lens_count()
            .cmp(&y.lens_count())
            .then(x.intermediate_scale.total_cmp(&y.intermediate_scale))
            .then(magnification_error(x, target).total_cmp(&magnification_error(y, target)))
            .then(x.f_a.total_cmp(&y.f_a))
            .then(x.f_b.total_cmp(&y.f_b))
            .then(x.leg.total_cmp(&y.leg))
    });
    if let Some(best) = good.into_iter().next() {
        return Ok(best);
    }
    let closest = bad
        .iter()
        .min_by(|x, y| magnification_error(x, target).total_cmp(&magnification_error(y, target)))
        .map(TelescopePlan::summary);
    Err(Error::Infeasible {
        reason: format!(
            "no catalog relay images over {} m with magnification {} (tolerance {}%)",
            req.total_distance_m,
            target,
            MAGNIFICATION_TOL * 100.0
        ),
        closest,
    })
}
