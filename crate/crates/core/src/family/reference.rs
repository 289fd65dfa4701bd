//! The equilateral reference member and its cube encoding.
//!
//! The reference triangle has vertices `Q = (−1, 0)`, `A = (0, 1/√3)` and
//! `C = (0, −1/√3)`; `P` is the origin, the midpoint of `CA`. Folding the unit
//! strip onto it three times gives the extremal Moebius band. A bend of that
//! band with pitch `θ ∈ [0, π]` is the segment of the band that projects to a
//! chord of the triangle in direction `θ`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};

use crate::error::{invalid, Error, Result};
use crate::geom::{PlanarPoint, VERTICAL_TOL};
use crate::ladder::{Ladder, SignedSegment3};

use super::{
    unlerp, vertical_span, CenterMode, CenterVar, CubePoint, FamilySpec, Layout, PitchVar, X_MAX,
    Y_MAX,
};

const S: f64 = 0.577_350_269_189_625_8; // 1/√3
const Q: PlanarPoint = PlanarPoint::new(-1.0, 0.0);
const A: PlanarPoint = PlanarPoint::new(0.0, S);
const C: PlanarPoint = PlanarPoint::new(0.0, -S);
const ANGLE_TOL: f64 = 1e-12;

/// A bend of the equilateral band, with the sign of its slope in the strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceBend {
    pub first: PlanarPoint,
    pub second: PlanarPoint,
    pub sign: i8,
}

impl ReferenceBend {
    pub fn length(&self) -> f64 {
        self.first.dist(self.second)
    }

    pub fn midpoint(&self) -> PlanarPoint {
        (self.first + self.second).scale(0.5)
    }

    fn segment(&self) -> SignedSegment3 {
        SignedSegment3::new(
            [self.first.x, self.first.y, 0.0],
            [self.second.x, self.second.y, 0.0],
            self.sign,
        )
    }
}

/// Bend of pitch `theta ∈ [0, π]`.
pub fn equilateral_bend(theta: f64) -> Result<ReferenceBend> {
    if !(-ANGLE_TOL..=PI + ANGLE_TOL).contains(&theta) {
        return Err(invalid(format!("reference pitch {theta} outside [0, π]")));
    }
    let theta = theta.clamp(0.0, PI);
    let (sin, cos) = theta.sin_cos();
    let (first, second) = if theta <= FRAC_PI_6 {
        (Q, PlanarPoint::new(0.0, theta.tan()))
    } else if theta <= FRAC_PI_2 {
        // first on QC, second at A
        let tau = (sin - S * cos) / (sin + S * cos);
        (PlanarPoint::new(-1.0 + tau, -tau * S), A)
    } else if theta <= 5.0 * FRAC_PI_6 {
        // first at C, second on AQ
        let tau = 2.0 * S * cos / (S * cos - sin);
        (C, PlanarPoint::new(-tau, (1.0 - tau) * S))
    } else {
        // first on CP, second at Q
        let h = (PI - theta).tan();
        (PlanarPoint::new(0.0, -h), Q)
    };
    let near = |a: f64| (theta - a).abs() < 1e-9;
    let sign = if near(0.0) || near(PI) || near(FRAC_PI_3) || near(2.0 * FRAC_PI_3) {
        0
    } else if !(FRAC_PI_3..=2.0 * FRAC_PI_3).contains(&theta) {
        1
    } else {
        -1
    };
    Ok(ReferenceBend {
        first,
        second,
        sign,
    })
}

fn reference_pitch_units(f: &FamilySpec, index: usize) -> Result<f64> {
    let p = &f.pitch_specs[index - 1];
    if p.is_fixed() {
        return Ok(p.lo);
    }
    p.reference.ok_or_else(|| Error::InvalidFamily {
        name: f.name.clone(),
        reason: format!("segment {index} has an interval pitch without a reference pitch"),
    })
}

fn reference_bends(f: &FamilySpec) -> Result<Vec<ReferenceBend>> {
    (1..=f.n())
        .map(|k| {
            let units = reference_pitch_units(f, k)?;
            equilateral_bend(units * PI / 12.0)
        })
        .collect()
}

/// The equilateral member of the family, built directly from its bends.
pub fn reference_ladder(f: &FamilySpec) -> Result<Ladder> {
    let bends = reference_bends(f)?;
    let mut segs: Vec<SignedSegment3> = bends.iter().map(ReferenceBend::segment).collect();
    // the T-pattern sign rules
    segs[0].sign = 0;
    segs[f.special_index - 1].sign = -1;
    Ladder::new(segs, f.kind.ladder_kind(), f.special_index)
}

/// Planar centers of the reference member's free segments, ascending index.
pub(crate) fn reference_centers(f: &FamilySpec) -> Result<Vec<[f64; 2]>> {
    let bends = reference_bends(f)?;
    Ok(f.free_indices()
        .map(|k| {
            let m = bends[k - 1].midpoint();
            [m.x, m.y]
        })
        .collect())
}

/// Cube encoding of the reference member. `f.reference_centers` must already
/// be set when the family uses the center box.
pub(crate) fn encode_reference(f: &FamilySpec) -> Result<CubePoint> {
    let layout = Layout::new(f)?;
    let bends = reference_bends(f)?;
    let mut r = vec![0.5; layout.k];
    let (lo, hi) = vertical_span(&f.bt_region, 0.0)
        .ok_or_else(|| invalid("(b,t) region does not meet b = 0"))?;
    r[0] = 0.0;
    r[1] = unlerp(lo, hi, S);
    r[2] = unlerp(0.0, X_MAX, 0.0);
    r[3] = unlerp(-Y_MAX, Y_MAX, 0.0);
    let mut signs = vec![1i8; layout.l];
    for slot in &layout.slots {
        let bend = bends[slot.segment - 1];
        if let PitchVar::Var { var, lo, hi } = slot.pitch {
            let units = reference_pitch_units(f, slot.segment)?;
            r[var] = unlerp(lo, hi, units * PI / 12.0);
        }
        r[slot.length_var] = unlerp(1.0, f.max_free_length, bend.length());
        match slot.center {
            CenterVar::Free { x, y, origin, half } => {
                let m = bend.midpoint();
                r[x] = unlerp(-half, half, m.x - origin[0]);
                r[y] = unlerp(-half, half, m.y - origin[1]);
            }
            CenterVar::Tip { var, constraint } => {
                let src = bends[constraint.source - 1];
                let seg = crate::geom::PlanarSegment::new(src.first, src.second);
                let tip = match constraint.endpoint {
                    super::Endpoint::Right => crate::geom::right_endpoint(seg)?,
                    super::Endpoint::Left => crate::geom::left_endpoint(seg)?,
                };
                let len = bend.length();
                let along = tip - bend.first;
                let dir = (bend.second - bend.first).scale(1.0 / len);
                let off = (along.x * dir.y - along.y * dir.x).abs();
                if off > 1e-9 {
                    return Err(Error::InvalidFamily {
                        name: f.name.clone(),
                        reason: format!(
                            "reference bend {} misses the tip of segment {} by {off:.3e}",
                            slot.segment, constraint.source
                        ),
                    });
                }
                r[var] = (along.x * dir.x + along.y * dir.y) / len;
            }
        }
        if bend.sign != 0 {
            signs[slot.sign_slot] = bend.sign;
        }
    }
    for (i, v) in r.iter().enumerate() {
        if !(-VERTICAL_TOL..=1.0 + VERTICAL_TOL).contains(v) {
            return Err(Error::InvalidFamily {
                name: f.name.clone(),
                reason: format!("reference coordinate {i} = {v} leaves the cube"),
            });
        }
    }
    for v in &mut r {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(CubePoint::new(r, signs))
}

/// Fill in the reference centers and point of a family.
pub(crate) fn attach_reference(mut f: FamilySpec) -> Result<FamilySpec> {
    if f.center_mode == CenterMode::Box {
        f.reference_centers = Some(reference_centers(&f)?);
    }
    f.reference = Some(encode_reference(&f)?);
    Ok(f)
}
