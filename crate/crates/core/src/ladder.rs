//! Signed segments, signed quadrilaterals and ladders, with the capacity
//! functionals defined on them.
//!
//! A signed segment is realized in the unit strip `0 ≤ x ≤ 1` by a segment of
//! the same length running from the line `x = 0` to the line `x = 1`; its sign
//! fixes the sign of that segment's slope. Throughout, `first` is the endpoint
//! that lands on `x = 0` and `second` the one on `x = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{chi, chi_variant, project_xy, PlanarPoint, PlanarSegment};

pub type Point3 = [f64; 3];

/// Lengths in `[1 − LENGTH_TOL, 1]` are treated as exactly 1.
pub const LENGTH_TOL: f64 = 1e-9;

/// Default weight of the crossing penalty.
pub const DEFAULT_MU: f64 = 128.0;

pub fn dist3(a: Point3, b: Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Slope of a strip realization of a segment with the given length and sign.
pub fn slope_of(length: f64, sign: i8) -> Result<f64> {
    if !(length >= 1.0 - LENGTH_TOL) {
        return Err(Error::InvalidSegment(length));
    }
    if length <= 1.0 || sign == 0 {
        return Ok(0.0);
    }
    Ok(f64::from(sign.signum()) * (length * length - 1.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedSegment3 {
    pub first: Point3,
    pub second: Point3,
    pub sign: i8,
}

impl SignedSegment3 {
    pub fn new(first: Point3, second: Point3, sign: i8) -> Self {
        Self {
            first,
            second,
            sign,
        }
    }

    pub fn length(&self) -> f64 {
        dist3(self.first, self.second)
    }

    pub fn slope(&self) -> Result<f64> {
        slope_of(self.length(), self.sign)
    }

    pub fn projected(&self) -> PlanarSegment {
        PlanarSegment::new(project_xy(self.first), project_xy(self.second))
    }

    /// Same segment with its ends exchanged, as seen across the Moebius seam.
    /// The seam identifies signed segments, so the sign carries over.
    pub fn across_seam(&self) -> Self {
        Self::new(self.second, self.first, self.sign)
    }

    /// Strict form of the sign rule: unit length iff sign 0.
    pub fn validate(&self) -> Result<()> {
        let len = self.length();
        if len < 1.0 - LENGTH_TOL {
            return Err(Error::InvalidSegment(len));
        }
        if !(-1..=1).contains(&self.sign) {
            return Err(invalid(format!(
                "sign must be -1, 0 or 1, got {}",
                self.sign
            )));
        }
        if self.sign == 0 && (len - 1.0).abs() > LENGTH_TOL {
            return Err(invalid(format!("sign 0 requires unit length, got {len}")));
        }
        if self.sign != 0 && len <= 1.0 {
            return Err(invalid("nonzero sign requires length above 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrilateral {
    pub bottom: SignedSegment3,
    pub top: SignedSegment3,
    pub left_len: f64,
    pub right_len: f64,
}

impl Quadrilateral {
    pub fn new(bottom: SignedSegment3, top: SignedSegment3) -> Self {
        Self {
            left_len: dist3(bottom.first, top.first),
            right_len: dist3(bottom.second, top.second),
            bottom,
            top,
        }
    }

    /// Quadrilateral with prescribed side lengths; the corners are only used
    /// by [`diag_capacity`].
    pub fn with_sides(
        bottom: SignedSegment3,
        top: SignedSegment3,
        left_len: f64,
        right_len: f64,
    ) -> Self {
        Self {
            bottom,
            top,
            left_len,
            right_len,
        }
    }

    /// `(bottom.first, bottom.second, top.first, top.second)`.
    pub fn corners(&self) -> [Point3; 4] {
        [
            self.bottom.first,
            self.bottom.second,
            self.top.first,
            self.top.second,
        ]
    }

    fn slope_gap(&self) -> Result<(f64, f64, f64)> {
        let b = self.bottom.slope()?;
        let t = self.top.slope()?;
        Ok((b, t, b - t))
    }
}

/// Trapezoid in the strip realizing a quadrilateral. The bottom runs from
/// `(0,0)` to `(1, bottom_slope)`, the top from `(0, offset)` to
/// `(1, offset + top_slope)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub offset: f64,
    pub bottom_slope: f64,
    pub top_slope: f64,
    pub left_len: f64,
    pub right_len: f64,
}

impl Realization {
    fn at_offset(offset: f64, bottom_slope: f64, top_slope: f64) -> Self {
        Self {
            offset,
            bottom_slope,
            top_slope,
            left_len: offset,
            right_len: offset - (bottom_slope - top_slope),
        }
    }

    pub fn total(&self) -> f64 {
        self.left_len + self.right_len
    }

    /// Planar corners in the fixed corner order.
    pub fn vertices(&self) -> [PlanarPoint; 4] {
        [
            PlanarPoint::new(0.0, 0.0),
            PlanarPoint::new(1.0, self.bottom_slope),
            PlanarPoint::new(0.0, self.offset),
            PlanarPoint::new(1.0, self.offset + self.top_slope),
        ]
    }

    /// True when the sides are at least as long as those of `q`.
    pub fn realizes(&self, q: &Quadrilateral, tol: f64) -> bool {
        self.left_len >= q.left_len - tol
            && self.right_len >= q.right_len - tol
            && self.right_len >= -tol
    }
}

pub fn minimal_realization(q: &Quadrilateral) -> Result<Realization> {
    let (b, t, d) = q.slope_gap()?;
    let offset = q.left_len.max(q.right_len + d);
    Ok(Realization::at_offset(offset, b, t))
}

/// `max(2|L| − d, 2|R| + d)` with `d = b′ − t′`.
pub fn quad_capacity(q: &Quadrilateral) -> Result<f64> {
    let (_, _, d) = q.slope_gap()?;
    Ok((2.0 * q.left_len - d).max(2.0 * q.right_len + d))
}

/// `|L| + |R|`.
pub fn quad_capacity0(q: &Quadrilateral) -> f64 {
    q.left_len + q.right_len
}

pub fn quad_capacity_u(q: &Quadrilateral, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid(format!("mask weight must lie in [0,1], got {u}")));
    }
    weighted(q, u)
}

#[inline]
fn weighted(q: &Quadrilateral, u: f64) -> Result<f64> {
    if u == 1.0 {
        return quad_capacity(q);
    }
    let k0 = quad_capacity0(q);
    if u == 0.0 {
        return Ok(k0);
    }
    Ok((1.0 - u) * k0 + u * quad_capacity(q)?)
}

/// Offset of the minimal realization whose planar diagonals are each at least
/// as long as both diagonals of `q`.
pub fn diagonal_realization(q: &Quadrilateral) -> Result<Realization> {
    let (b, t, d) = q.slope_gap()?;
    let [c1, c2, c3, c4] = q.corners();
    let longest = dist3(c1, c4).max(dist3(c2, c3));
    // planar diagonals have lengths sqrt(1 + (h + t)^2) and sqrt(1 + (h - b)^2)
    let reach = (longest * longest - 1.0).max(0.0).sqrt();
    let slack = reach - 1e-12;
    let feasible = |h: f64| (h + t).abs() >= slack && (h - b).abs() >= slack;
    let base = q.left_len.max(q.right_len + d);
    let offset = [base, reach - t, b + reach]
        .into_iter()
        .filter(|&h| h >= base && feasible(h))
        .fold(f64::INFINITY, f64::min);
    Ok(Realization::at_offset(offset, b, t))
}

pub fn diag_capacity(q: &Quadrilateral) -> Result<f64> {
    Ok(diagonal_realization(q)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderKind {
    Cyclic,
    Open,
}

/// Ordered signed segments `B_1..B_N`. `special_index` is 1-based, like the
/// segment labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ladder {
    pub segments: Vec<SignedSegment3>,
    pub kind: LadderKind,
    pub special_index: usize,
}

impl Ladder {
    pub fn new(
        segments: Vec<SignedSegment3>,
        kind: LadderKind,
        special_index: usize,
    ) -> Result<Self> {
        let l = Self {
            segments,
            kind,
            special_index,
        };
        l.check_shape()?;
        Ok(l)
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.segments.len();
        let min = match self.kind {
            LadderKind::Cyclic => 3,
            LadderKind::Open => 2,
        };
        if n < min {
            return Err(invalid(format!(
                "{:?} ladder needs at least {min} segments, got {n}",
                self.kind
            )));
        }
        if self.special_index < 2 || self.special_index > n {
            return Err(invalid(format!(
                "special index {} outside 2..={n}",
                self.special_index
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn quad_count(&self) -> usize {
        match self.kind {
            LadderKind::Cyclic => self.segments.len(),
            LadderKind::Open => self.segments.len() - 1,
        }
    }

    /// 1-based access.
    pub fn segment(&self, index: usize) -> Result<&SignedSegment3> {
        index
            .checked_sub(1)
            .and_then(|i| self.segments.get(i))
            .ok_or(Error::IndexOutOfRange {
                index,
                len: self.segments.len(),
            })
    }

    pub fn quads(&self) -> impl Iterator<Item = Quadrilateral> + '_ {
        let n = self.segments.len();
        (0..self.quad_count()).map(move |k| {
            if k + 1 < n {
                Quadrilateral::new(self.segments[k], self.segments[k + 1])
            } else {
                Quadrilateral::new(self.segments[k], self.segments[0].across_seam())
            }
        })
    }
}

pub fn ladder_quads(l: &Ladder) -> Result<Vec<Quadrilateral>> {
    l.check_shape()?;
    Ok(l.quads().collect())
}

/// Per-quadrilateral weights interpolating between `κ₀` (0) and `κ` (1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaskedWeights(pub Vec<f64>);

impl MaskedWeights {
    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn validate(&self) -> Result<()> {
        match self.0.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            Some(u) => Err(invalid(format!("mask weight {u} outside [0,1]"))),
            None => Ok(()),
        }
    }
}

pub fn ladder_capacity(l: &Ladder, mask: Option<&MaskedWeights>) -> Result<f64> {
    match mask {
        None => l.quads().map(|q| quad_capacity(&q)).sum(),
        Some(m) => {
            if m.0.len() != l.quad_count() {
                return Err(invalid(format!(
                    "mask has {} weights for {} quadrilaterals",
                    m.0.len(),
                    l.quad_count()
                )));
            }
            m.validate()?;
            l.quads().zip(&m.0).map(|(q, &u)| weighted(&q, u)).sum()
        }
    }
}

/// Crossing penalty between two segments of a ladder (1-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub i: usize,
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<u8>,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

fn default_mu() -> f64 {
    DEFAULT_MU
}

impl PenaltySpec {
    pub fn new(i: usize, j: usize) -> Self {
        Self {
            i,
            j,
            alpha: None,
            mu: DEFAULT_MU,
        }
    }

    pub fn variant(alpha: u8, i: usize, j: usize) -> Self {
        Self {
            alpha: Some(alpha),
            ..Self::new(i, j)
        }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        for idx in [self.i, self.j] {
            if idx == 0 || idx > n {
                return Err(Error::IndexOutOfRange { index: idx, len: n });
            }
        }
        if self.i == self.j {
            return Err(invalid("penalty indices must differ"));
        }
        if !(self.mu >= 0.0) {
            return Err(invalid(format!(
                "penalty weight must be non-negative, got {}",
                self.mu
            )));
        }
        if let Some(a) = self.alpha {
            if !(1..=4).contains(&a) {
                return Err(invalid(format!("variant index must be in 1..=4, got {a}")));
            }
        }
        Ok(())
    }

    /// `χ` or `χ_α` of the projected pair.
    pub fn penalty(&self, l: &Ladder) -> Result<f64> {
        self.check(l.len())?;
        let a = l.segment(self.i)?.projected();
        let b = l.segment(self.j)?.projected();
        match self.alpha {
            None => chi(a, b),
            Some(alpha) => chi_variant(alpha, a, b),
        }
    }
}

pub fn enhanced_capacity(l: &Ladder, p: &PenaltySpec, mask: Option<&MaskedWeights>) -> Result<f64> {
    let pen = p.penalty(l)?;
    let base = ladder_capacity(l, mask)?;
    Ok(if p.mu == 0.0 { base } else { base + p.mu * pen })
}

#[cfg(test)]
mod tests {
    use super::*;

    const S3: f64 = 1.732_050_807_568_877_2;

    fn unit(y0: f64, y1: f64) -> SignedSegment3 {
        // horizontal unit segment at heights y0 (first) / y1 (second) in the XZ... plane
        SignedSegment3::new([0.0, y0, 0.0], [1.0, y1, 0.0], 0)
    }

    #[test]
    fn slope_examples() {
        assert_eq!(slope_of(1.0, 0).unwrap(), 0.0);
        assert!((slope_of(2f64.sqrt(), 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((slope_of(2.0, -1).unwrap() + 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(slope_of(1.0 - 1e-10, 1).unwrap(), 0.0);
        assert!(matches!(slope_of(0.9, 0), Err(Error::InvalidSegment(_))));
    }

    #[test]
    fn degenerate_square() {
        let q = Quadrilateral::with_sides(unit(0.0, 0.0), unit(1.0, 1.0), 1.0, 0.0);
        assert_eq!(quad_capacity(&q).unwrap(), 2.0);
        assert_eq!(quad_capacity0(&q), 1.0);
        assert!((quad_capacity_u(&q, 0.36).unwrap() - 1.36).abs() < 1e-15);
        let r = minimal_realization(&q).unwrap();
        assert_eq!((r.offset, r.left_len, r.right_len), (1.0, 1.0, 1.0));
    }

    #[test]
    fn sided_example() {
        let b = SignedSegment3::new([0.0; 3], [1.0, 0.75, 0.0], 1);
        let t = SignedSegment3::new([0.0, 5.0, 0.0], [1.0, 5.0, 0.0], 0);
        let q = Quadrilateral::with_sides(b, t, 1.2, 0.9);
        assert!((quad_capacity(&q).unwrap() - 2.55).abs() < 1e-12);
        let r = minimal_realization(&q).unwrap();
        assert!((r.offset - 1.65).abs() < 1e-12);
        assert!((r.right_len - 0.9).abs() < 1e-12);
        assert!((r.total() - 2.55).abs() < 1e-12);
    }

    #[test]
    fn mask_weight_range_checked() {
        let q = Quadrilateral::with_sides(unit(0.0, 0.0), unit(1.0, 1.0), 1.0, 0.0);
        assert_eq!(quad_capacity_u(&q, 0.0).unwrap(), 1.0);
        assert_eq!(quad_capacity_u(&q, 1.0).unwrap(), 2.0);
        assert!(quad_capacity_u(&q, 1.5).is_err());
        assert!(quad_capacity_u(&q, -0.1).is_err());
    }

    #[test]
    fn diagonal_capacity_inactive_on_square() {
        let q = Quadrilateral::with_sides(unit(0.0, 0.0), unit(1.0, 1.0), 1.0, 0.0);
        assert_eq!(diag_capacity(&q).unwrap(), 2.0);
    }

    #[test]
    fn diagonal_capacity_active() {
        // a long spatial diagonal forces a taller trapezoid
        let b = SignedSegment3::new([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0);
        let t = SignedSegment3::new([0.0, 0.0, 0.5], [1.0, 2.0, 0.5], 1);
        let q = Quadrilateral::new(b, t);
        let k = quad_capacity(&q).unwrap();
        let kh = diag_capacity(&q).unwrap();
        assert!(kh > k);
        let r = diagonal_realization(&q).unwrap();
        let v = r.vertices();
        let need = dist3(b.first, t.second).max(dist3(b.second, t.first));
        assert!(v[0].dist(v[3]) >= need - 1e-12);
        assert!(v[1].dist(v[2]) >= need - 1e-12);
    }

    fn tri_ladder(kind: LadderKind) -> Ladder {
        let segs = vec![
            SignedSegment3::new([-1.0, 0.0, 0.0], [0.0, 0.0, 0.0], 0),
            SignedSegment3::new([-1.0, 0.0, 0.0], [0.0, 1.0 / S3, 0.0], 1),
            SignedSegment3::new([0.0, -1.0 / S3, 0.0], [0.0, 1.0 / S3, 0.0], -1),
        ];
        Ladder::new(segs, kind, 3).unwrap()
    }

    #[test]
    fn quad_counts_and_wrap() {
        let c = tri_ladder(LadderKind::Cyclic);
        let qs = ladder_quads(&c).unwrap();
        assert_eq!(qs.len(), 3);
        let wrap = qs[2];
        assert_eq!(wrap.top.first, c.segments[0].second);
        assert_eq!(wrap.top.second, c.segments[0].first);
        assert!((wrap.left_len - dist3(c.segments[2].first, c.segments[0].second)).abs() < 1e-15);
        let o = tri_ladder(LadderKind::Open);
        assert_eq!(ladder_quads(&o).unwrap().len(), 2);
        let short = Ladder {
            segments: c.segments[..2].to_vec(),
            kind: LadderKind::Cyclic,
            special_index: 2,
        };
        assert!(ladder_quads(&short).is_err());
    }

    #[test]
    fn open_triangle_ladder_has_capacity_sqrt3() {
        // the equilateral member of the two-quadrilateral family with a 30° middle bend
        let o = tri_ladder(LadderKind::Open);
        assert!((ladder_capacity(&o, None).unwrap() - S3).abs() < 1e-12);
    }

    #[test]
    fn masks() {
        let o = tri_ladder(LadderKind::Open);
        let zeros = MaskedWeights(vec![0.0, 0.0]);
        let k0: f64 = o.quads().map(|q| quad_capacity0(&q)).sum();
        assert_eq!(ladder_capacity(&o, Some(&zeros)).unwrap(), k0);
        let ones = MaskedWeights::ones(2);
        assert_eq!(
            ladder_capacity(&o, Some(&ones)).unwrap(),
            ladder_capacity(&o, None).unwrap()
        );
        assert!(ladder_capacity(&o, Some(&MaskedWeights(vec![1.0]))).is_err());
    }

    #[test]
    fn enhanced() {
        let o = tri_ladder(LadderKind::Open);
        let plain = ladder_capacity(&o, None).unwrap();
        // B1 and B3 touch only at an endpoint of B1: no crossing
        let p = PenaltySpec::new(1, 3);
        assert_eq!(enhanced_capacity(&o, &p, None).unwrap(), plain);
        let zero = PenaltySpec {
            mu: 0.0,
            ..PenaltySpec::new(2, 3)
        };
        assert_eq!(enhanced_capacity(&o, &zero, None).unwrap(), plain);
        assert!(enhanced_capacity(&o, &PenaltySpec::new(2, 2), None).is_err());
        assert!(enhanced_capacity(&o, &PenaltySpec::new(2, 7), None).is_err());
    }

    #[test]
    fn crossing_pair_is_penalized() {
        let segs = vec![
            SignedSegment3::new([-1.0, 0.0, 0.0], [0.0, 0.0, 0.0], 0),
            SignedSegment3::new([-0.5, -0.5, 0.0], [0.5, 0.5, 0.0], 1),
            SignedSegment3::new([-0.5, 0.5, 0.0], [0.5, -0.5, 0.0], 1),
        ];
        let l = Ladder::new(segs, LadderKind::Open, 3).unwrap();
        let plain = ladder_capacity(&l, None).unwrap();
        let e = enhanced_capacity(&l, &PenaltySpec::new(2, 3), None).unwrap();
        assert!((e - plain - 128.0).abs() < 1e-9);
    }

    #[test]
    fn validation_rules() {
        assert!(unit(0.0, 0.0).validate().is_ok());
        let s = SignedSegment3::new([0.0; 3], [1.5, 0.0, 0.0], 0);
        assert!(s.validate().is_err());
        let s = SignedSegment3::new([0.0; 3], [1.5, 0.0, 0.0], 1);
        assert!(s.validate().is_ok());
        let s = SignedSegment3::new([0.0; 3], [0.5, 0.0, 0.0], 1);
        assert!(s.validate().is_err());
    }

    #[test]
    fn serialization_record_shape() {
        let o = tri_ladder(LadderKind::Cyclic);
        let v = serde_json::to_value(&o).unwrap();
        assert_eq!(v["kind"], "cyclic");
        assert_eq!(v["specialIndex"], 3);
        assert_eq!(v["segments"][1]["sign"], 1);
        assert_eq!(v["segments"][0]["first"][0], -1.0);
        let back: Ladder = serde_json::from_value(v).unwrap();
        assert_eq!(back, o);
    }
}
