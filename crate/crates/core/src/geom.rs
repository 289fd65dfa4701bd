//! Planar primitives: determinant sums, the segment crossing oracle and the
//! crossing penalties used to push the search away from crossing projections.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on |Δx| below which a planar segment counts as vertical.
pub const VERTICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl Add for PlanarPoint {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for PlanarPoint {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(self.x * c, self.y * c)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }
}

impl From<[f64; 2]> for PlanarPoint {
    fn from(p: [f64; 2]) -> Self {
        Self::new(p[0], p[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarSegment {
    pub a: PlanarPoint,
    pub b: PlanarPoint,
}

impl PlanarSegment {
    pub const fn new(a: PlanarPoint, b: PlanarPoint) -> Self {
        Self { a, b }
    }

    pub fn reversed(self) -> Self {
        Self::new(self.b, self.a)
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    fn check_nondegenerate(&self) -> Result<()> {
        if self.a == self.b {
            Err(Error::ZeroLengthSegment)
        } else {
            Ok(())
        }
    }
}

/// `u.x·v.y − u.y·v.x`.
#[inline]
pub fn det2(u: PlanarPoint, v: PlanarPoint) -> f64 {
    u.x * v.y - u.y * v.x
}

/// Cyclic sum of `det2` over consecutive pairs, i.e. twice the signed area of
/// the polygon with the given vertices.
pub fn cyclic_sum(points: &[PlanarPoint]) -> Result<f64> {
    if points.len() < 3 {
        return Err(invalid(format!(
            "cyclic sum needs at least 3 points, got {}",
            points.len()
        )));
    }
    Ok(cyclic_sum_unchecked(points))
}

#[inline]
fn cyclic_sum_unchecked(points: &[PlanarPoint]) -> f64 {
    let n = points.len();
    (0..n).map(|i| det2(points[i], points[(i + 1) % n])).sum()
}

/// Solution of `(1−s)·A1 + s·A2 = (1−t)·A3 + t·A4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub crosses: bool,
    pub s: f64,
    pub t: f64,
    pub degenerate: bool,
}

/// Intersection parameters of two planar segments. `crosses` requires both
/// parameters strictly inside (0, 1).
pub fn crossing_oracle(s1: PlanarSegment, s2: PlanarSegment) -> Result<Crossing> {
    s1.check_nondegenerate()?;
    s2.check_nondegenerate()?;
    let r = s1.b - s1.a;
    let q = s2.b - s2.a;
    let w = s2.a - s1.a;
    let den = det2(r, q);
    if den == 0.0 {
        return Ok(Crossing {
            crosses: false,
            s: f64::NAN,
            t: f64::NAN,
            degenerate: true,
        });
    }
    let s = det2(w, q) / den;
    let t = det2(w, r) / den;
    Ok(Crossing {
        crosses: s > 0.0 && s < 1.0 && t > 0.0 && t < 1.0,
        s,
        t,
        degenerate: false,
    })
}

/// The four triple ratios `(1,2,3)/D, (1,4,3)/D, (2,1,4)/D, (2,3,4)/D` with
/// `D = (1,4,2,3)`, or `None` when `D = 0`.
fn triple_ratios(s1: PlanarSegment, s2: PlanarSegment) -> Result<Option<[f64; 4]>> {
    s1.check_nondegenerate()?;
    s2.check_nondegenerate()?;
    let (v1, v2, v3, v4) = (s1.a, s1.b, s2.a, s2.b);
    let d = cyclic_sum_unchecked(&[v1, v4, v2, v3]);
    if d == 0.0 {
        return Ok(None);
    }
    Ok(Some([
        cyclic_sum_unchecked(&[v1, v2, v3]) / d,
        cyclic_sum_unchecked(&[v1, v4, v3]) / d,
        cyclic_sum_unchecked(&[v2, v1, v4]) / d,
        cyclic_sum_unchecked(&[v2, v3, v4]) / d,
    ]))
}

fn penalty_from(ratios: impl Iterator<Item = f64>) -> f64 {
    let m = ratios.fold(f64::INFINITY, f64::min);
    (2.0 * m.max(0.0)).min(1.0)
}

/// Crossing penalty in `[0, 1]`: positive exactly when the segments cross at a
/// point interior to both, equal to 1 for a crossing at both midpoints.
pub fn chi(s1: PlanarSegment, s2: PlanarSegment) -> Result<f64> {
    Ok(match triple_ratios(s1, s2)? {
        Some(q) => penalty_from(q.into_iter()),
        None => 0.0,
    })
}

/// Position in the ratio array of the triple that does not involve vertex `alpha`.
fn dropped_triple(alpha: u8) -> Result<usize> {
    match alpha {
        1 => Ok(3),
        2 => Ok(1),
        3 => Ok(2),
        4 => Ok(0),
        _ => Err(invalid(format!(
            "variant index must be in 1..=4, got {alpha}"
        ))),
    }
}

/// Variant of [`chi`] that omits the triple not involving vertex `alpha`. It is
/// positive on crossings and on one of the four ways the segments can miss.
pub fn chi_variant(alpha: u8, s1: PlanarSegment, s2: PlanarSegment) -> Result<f64> {
    let skip = dropped_triple(alpha)?;
    Ok(match triple_ratios(s1, s2)? {
        Some(q) => penalty_from(
            q.into_iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, v)| v),
        ),
        None => 0.0,
    })
}

/// Drops the third coordinate.
#[inline]
pub fn project_xy(p: [f64; 3]) -> PlanarPoint {
    PlanarPoint::new(p[0], p[1])
}

/// Endpoint with strictly larger x.
pub fn right_endpoint(s: PlanarSegment) -> Result<PlanarPoint> {
    if (s.a.x - s.b.x).abs() <= VERTICAL_TOL {
        return Err(Error::UndefinedEndpoint);
    }
    Ok(if s.a.x > s.b.x { s.a } else { s.b })
}

/// Endpoint with strictly smaller x.
pub fn left_endpoint(s: PlanarSegment) -> Result<PlanarPoint> {
    if (s.a.x - s.b.x).abs() <= VERTICAL_TOL {
        return Err(Error::UndefinedEndpoint);
    }
    Ok(if s.a.x < s.b.x { s.a } else { s.b })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> PlanarPoint {
        PlanarPoint::new(x, y)
    }

    fn seg(a: (f64, f64), b: (f64, f64)) -> PlanarSegment {
        PlanarSegment::new(p(a.0, a.1), p(b.0, b.1))
    }

    #[test]
    fn det2_examples() {
        assert_eq!(det2(p(1.0, 0.0), p(0.0, 1.0)), 1.0);
        assert_eq!(det2(p(2.0, 1.0), p(2.0, 1.0)), 0.0);
        assert_eq!(det2(p(2.0, 1.0), p(3.0, 4.0)), 5.0);
    }

    #[test]
    fn cyclic_sum_examples() {
        let square = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        assert_eq!(cyclic_sum(&square).unwrap(), 2.0);
        let line = [p(0.0, 0.0), p(1.0, 1.0), p(3.0, 3.0)];
        assert_eq!(cyclic_sum(&line).unwrap(), 0.0);
        let mut rev = square;
        rev.reverse();
        assert_eq!(cyclic_sum(&rev).unwrap(), -2.0);
        assert!(cyclic_sum(&square[..2]).is_err());
    }

    #[test]
    fn oracle_examples() {
        let c =
            crossing_oracle(seg((-1.0, 0.0), (1.0, 0.0)), seg((0.0, -1.0), (0.0, 1.0))).unwrap();
        assert!(c.crosses && !c.degenerate);
        assert_eq!((c.s, c.t), (0.5, 0.5));

        let c = crossing_oracle(seg((0.0, 0.0), (1.0, 0.0)), seg((0.0, 1.0), (1.0, 1.0))).unwrap();
        assert!(c.degenerate && !c.crosses);

        let c = crossing_oracle(seg((0.0, 0.0), (1.0, 0.0)), seg((1.0, 0.0), (2.0, 3.0))).unwrap();
        assert!(!c.crosses);

        assert_eq!(
            crossing_oracle(seg((0.0, 0.0), (0.0, 0.0)), seg((0.0, 1.0), (1.0, 1.0))),
            Err(Error::ZeroLengthSegment)
        );
    }

    #[test]
    fn chi_symmetric_crossing_is_one() {
        let v = chi(seg((-1.0, 0.0), (1.0, 0.0)), seg((0.0, -1.0), (0.0, 1.0))).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        // opposite orientation must not flip the verdict
        let v = chi(seg((1.0, 0.0), (-1.0, 0.0)), seg((0.0, -1.0), (0.0, 1.0))).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chi_invariant_under_endpoint_and_segment_swaps() {
        let a = seg((-0.7, 0.1), (0.9, 0.4));
        let b = seg((0.2, -0.8), (-0.1, 0.9));
        let base = chi(a, b).unwrap();
        assert!(base > 0.0);
        for v in [
            chi(a.reversed(), b),
            chi(a, b.reversed()),
            chi(b, a),
            chi(b.reversed(), a.reversed()),
        ] {
            assert!((v.unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_zero_on_parallel_and_disjoint() {
        assert_eq!(
            chi(seg((0.0, 0.0), (1.0, 0.0)), seg((0.0, 1.0), (1.0, 1.0))).unwrap(),
            0.0
        );
        assert_eq!(
            chi(seg((0.0, 0.0), (1.0, 0.0)), seg((2.0, -1.0), (2.0, 1.0))).unwrap(),
            0.0
        );
    }

    #[test]
    fn chi_variant_keeps_one_miss_mode() {
        // Second segment lies entirely above the first with its first vertex
        // nearest the first segment's line: only the (1,2,3) ratio is negative.
        let s1 = seg((-1.0, 0.0), (1.0, 0.0));
        let s2 = seg((0.0, 0.5), (0.0, 2.0));
        let q = triple_ratios(s1, s2).unwrap().unwrap();
        assert!(q[0] < 0.0 && q[1] > 0.0 && q[2] > 0.0 && q[3] > 0.0);
        assert_eq!(chi(s1, s2).unwrap(), 0.0);
        assert!(chi_variant(4, s1, s2).unwrap() > 0.0);
        for alpha in 1..=3 {
            assert_eq!(chi_variant(alpha, s1, s2).unwrap(), 0.0);
        }
        // Slide the second segment past the end of the first: a retained
        // ratio turns negative and the variant vanishes.
        let s2 = seg((1.5, 0.5), (1.5, 2.0));
        assert_eq!(chi_variant(4, s1, s2).unwrap(), 0.0);
        assert!(chi_variant(0, s1, s2).is_err());
        assert!(chi_variant(5, s1, s2).is_err());
    }

    #[test]
    fn endpoints() {
        assert_eq!(
            right_endpoint(seg((0.0, 0.0), (1.0, 1.0))).unwrap(),
            p(1.0, 1.0)
        );
        assert_eq!(
            right_endpoint(seg((3.0, 0.0), (-1.0, 4.0))).unwrap(),
            p(3.0, 0.0)
        );
        assert_eq!(
            left_endpoint(seg((3.0, 0.0), (-1.0, 4.0))).unwrap(),
            p(-1.0, 4.0)
        );
        assert_eq!(
            right_endpoint(seg((0.5, 0.0), (0.5, 1.0))),
            Err(Error::UndefinedEndpoint)
        );
    }

    #[test]
    fn projection() {
        assert_eq!(project_xy([1.0, 2.0, 3.0]), p(1.0, 2.0));
        assert_eq!(project_xy([0.0, 0.0, -5.0]), p(0.0, 0.0));
        assert_eq!(project_xy([4.0, -2.0, 0.0]), p(4.0, -2.0));
    }
}
