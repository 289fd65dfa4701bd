//! Ladder families: declarative specs, the cube parametrization and the
//! objective evaluated by the search.
//!
//! Variable layout of a cube point, in order:
//!
//! 1. `b, t, x, y` of the T-pattern (4 variables);
//! 2. one pitch variable per interval pitch spec, ascending segment index;
//! 3. one length variable per free segment;
//! 4. centers: two variables for an unconstrained free segment, one for a
//!    segment that is the container of a containment constraint;
//! 5. two endpoint heights per free segment.
//!
//! Free segments are the segments other than `B_1` and `B_j`.

mod reference;
mod registry;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::geom::{left_endpoint, right_endpoint, PlanarPoint};
use crate::ladder::{
    enhanced_capacity, ladder_capacity, Ladder, LadderKind, MaskedWeights, PenaltySpec, Point3,
    SignedSegment3,
};

pub use reference::{equilateral_bend, reference_ladder, ReferenceBend};
pub use registry::{registry, registry_entry, DEFAULT_MASK_A};

/// Version tag of the variable layout and decode order.
pub const LAYOUT_VERSION: &str = "mll-layout/1";
/// Version tag of family definition files.
pub const FAMILY_FORMAT: &str = "mll-family/1";

/// Upper end of the bottom slope range, `(√27 − √11)/4`.
pub fn beta() -> f64 {
    (27f64.sqrt() - 11f64.sqrt()) / 4.0
}

pub const X_MAX: f64 = 1.0 / 18.0;
pub const Y_MAX: f64 = 1.0 / 30.0;
pub const HEIGHT_MAX: f64 = 0.5;
/// Widening of a `±` pitch endpoint, in units of π/12 (so π/30).
pub const WIDEN_UNITS: f64 = 0.4;
pub const DEFAULT_MAX_FREE_LENGTH: f64 = 2.0;
pub const CENTER_BOX_HALF_WIDTH: f64 = 0.5;

/// `(1 − r)·a + r·b`.
#[inline]
pub fn lerp(a: f64, b: f64, r: f64) -> f64 {
    (1.0 - r) * a + r * b
}

fn unlerp(a: f64, b: f64, v: f64) -> f64 {
    if b == a {
        0.0
    } else {
        (v - a) / (b - a)
    }
}

/// Pull `r` toward `r0`: `(r + u·r0)/(1 + u)` componentwise.
pub fn coerce(r: &[f64], r0: &[f64], u: f64) -> Result<Vec<f64>> {
    if !(u >= 0.0) {
        return Err(invalid(format!(
            "coercion factor must be non-negative, got {u}"
        )));
    }
    if r.len() != r0.len() {
        return Err(Error::DimensionMismatch {
            expected: r0.len(),
            actual: r.len(),
        });
    }
    let mut out = r.to_vec();
    coerce_into(&mut out, r0, u);
    Ok(out)
}

pub(crate) fn coerce_into(r: &mut [f64], r0: &[f64], u: f64) {
    if u == 0.0 {
        return;
    }
    let k = 1.0 / (1.0 + u);
    for (x, &c) in r.iter_mut().zip(r0) {
        *x = (*x + u * c) * k;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PitchKind {
    Fixed,
    Interval,
}

/// Pitch range in units of π/12; `widen_*` moves that end outward by 2/5 unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PitchSpec {
    pub kind: PitchKind,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub widen_lo: bool,
    #[serde(default)]
    pub widen_hi: bool,
    /// Pitch of the equilateral reference member, in the same units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

impl PitchSpec {
    pub const fn fixed(units: f64) -> Self {
        Self {
            kind: PitchKind::Fixed,
            lo: units,
            hi: units,
            widen_lo: false,
            widen_hi: false,
            reference: None,
        }
    }

    pub const fn interval(lo: f64, widen_lo: bool, hi: f64, widen_hi: bool) -> Self {
        Self {
            kind: PitchKind::Interval,
            lo,
            hi,
            widen_lo,
            widen_hi,
            reference: None,
        }
    }

    pub const fn with_reference(mut self, units: f64) -> Self {
        self.reference = Some(units);
        self
    }

    pub fn is_fixed(&self) -> bool {
        self.kind == PitchKind::Fixed
    }

    /// Effective range in radians.
    pub fn range(&self) -> (f64, f64) {
        let lo = self.lo - if self.widen_lo { WIDEN_UNITS } else { 0.0 };
        let hi = self.hi + if self.widen_hi { WIDEN_UNITS } else { 0.0 };
        (lo * PI / 12.0, hi * PI / 12.0)
    }

    pub fn contains(&self, angle: f64, tol: f64) -> bool {
        let (lo, hi) = self.range();
        angle >= lo - tol && angle <= hi + tol
    }

    fn check(&self) -> std::result::Result<(), String> {
        let (lo, hi) = self.range();
        if !(self.lo <= self.hi) {
            return Err(format!(
                "pitch range [{}, {}] is reversed",
                self.lo, self.hi
            ));
        }
        if self.is_fixed() && (self.lo != self.hi || self.widen_lo || self.widen_hi) {
            return Err("fixed pitch must have lo = hi and no widening".into());
        }
        if !(lo > -PI / 2.0 && hi < 1.5 * PI) {
            return Err(format!("pitch range [{lo}, {hi}] leaves (-π/2, 3π/2)"));
        }
        Ok(())
    }
}

impl fmt::Display for PitchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = |v: f64, w: bool, s: &str| {
            if w {
                format!("{v}{s}")
            } else {
                format!("{v}")
            }
        };
        match self.kind {
            PitchKind::Fixed => write!(f, "{}", self.lo),
            PitchKind::Interval => write!(
                f,
                "[{},{}]",
                end(self.lo, self.widen_lo, "-"),
                end(self.hi, self.widen_hi, "+")
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Right,
    Left,
}

/// The projection of `container` contains the right (or left) endpoint of the
/// projection of `source`. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainmentConstraint {
    pub source: usize,
    pub container: usize,
    pub endpoint: Endpoint,
}

impl ContainmentConstraint {
    pub const fn right(source: usize, container: usize) -> Self {
        Self {
            source,
            container,
            endpoint: Endpoint::Right,
        }
    }

    pub const fn left(source: usize, container: usize) -> Self {
        Self {
            source,
            container,
            endpoint: Endpoint::Left,
        }
    }

    /// The source tip in the plane.
    pub fn tip(&self, l: &Ladder) -> Result<PlanarPoint> {
        self.tip_of(l.segment(self.source)?)
    }

    fn tip_of(&self, source: &SignedSegment3) -> Result<PlanarPoint> {
        let s = source.projected();
        match self.endpoint {
            Endpoint::Right => right_endpoint(s),
            Endpoint::Left => left_endpoint(s),
        }
    }

    /// Distance from the tip to the container's projection.
    pub fn residual(&self, l: &Ladder) -> Result<f64> {
        let tip = self.tip(l)?;
        let c = l.segment(self.container)?.projected();
        let d = c.b - c.a;
        let len2 = d.x * d.x + d.y * d.y;
        if len2 == 0.0 {
            return Ok(tip.dist(c.a));
        }
        let w = tip - c.a;
        let s = ((w.x * d.x + w.y * d.y) / len2).clamp(0.0, 1.0);
        Ok(tip.dist(c.a + d.scale(s)))
    }
}

impl fmt::Display for ContainmentConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.endpoint {
            Endpoint::Right => write!(f, "{}→{}", self.source, self.container),
            Endpoint::Left => write!(f, "{}←{}", self.source, self.container),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Cyclic ladders.
    A,
    /// Open ladders: the cyclic family without its last quadrilateral.
    B,
}

impl FamilyKind {
    pub fn ladder_kind(self) -> LadderKind {
        match self {
            FamilyKind::A => LadderKind::Cyclic,
            FamilyKind::B => LadderKind::Open,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterMode {
    /// Each center coordinate within ±1/2 of the reference member's center.
    Box,
    /// Each center coordinate in [−1, 1].
    Absolute,
}

/// How a registered family relates to the published calculations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyRole {
    /// Claimed to stay above its threshold.
    Claim,
    /// Expected to drop below its threshold.
    Control,
    /// Related family that is registered but carries no claim.
    Auxiliary,
    Demo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskTerm {
    Fixed(f64),
    /// The adjustable scalar `a`.
    A,
}

impl Serialize for MaskTerm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaskTerm::Fixed(v) => s.serialize_f64(*v),
            MaskTerm::A => s.serialize_str("a"),
        }
    }
}

impl<'de> Deserialize<'de> for MaskTerm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Sym(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(MaskTerm::Fixed(v)),
            Raw::Sym(s) if s == "a" => Ok(MaskTerm::A),
            Raw::Sym(s) => Err(serde::de::Error::custom(format!(
                "unknown mask symbol `{s}`"
            ))),
        }
    }
}

/// Mask pattern with a shared scalar, e.g. `(a, a, 0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub pattern: Vec<MaskTerm>,
    pub a: f64,
}

impl MaskSpec {
    pub fn weights(&self) -> MaskedWeights {
        MaskedWeights(
            self.pattern
                .iter()
                .map(|t| match t {
                    MaskTerm::Fixed(v) => *v,
                    MaskTerm::A => self.a,
                })
                .collect(),
        )
    }
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .pattern
            .iter()
            .map(|t| match t {
                MaskTerm::Fixed(v) => format!("{v}"),
                MaskTerm::A => "a".into(),
            })
            .collect();
        write!(f, "({}) a={}", parts.join(","), self.a)
    }
}

/// A point of `[0,1]^K` with signs for the `L` free segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubePoint {
    pub r: Vec<f64>,
    pub signs: Vec<i8>,
}

impl CubePoint {
    pub fn new(r: Vec<f64>, signs: Vec<i8>) -> Self {
        Self { r, signs }
    }

    pub fn check_dims(&self, k: usize, l: usize) -> Result<()> {
        if self.r.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: self.r.len(),
            });
        }
        if self.signs.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                actual: self.signs.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilySpec {
    pub name: String,
    pub kind: FamilyKind,
    pub role: FamilyRole,
    pub pitch_specs: Vec<PitchSpec>,
    pub special_index: usize,
    #[serde(default)]
    pub constraints: Vec<ContainmentConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<PenaltySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSpec>,
    pub threshold: f64,
    /// Convex polygon confining `(b, t)`.
    pub bt_region: Vec<[f64; 2]>,
    pub max_free_length: f64,
    pub center_mode: CenterMode,
    #[serde(default)]
    pub heights_frozen: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<CubePoint>,
    /// Planar centers of the reference member's free segments, ascending index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_centers: Option<Vec<[f64; 2]>>,
}

/// Rectangle `b ∈ [0, β]`, `t ∈ [0.4, 0.8]` for families not bound by the
/// T-pattern lens.
pub fn wide_bt_region() -> Vec<[f64; 2]> {
    let b = beta();
    vec![[0.0, 0.4], [b, 0.4], [b, 0.8], [0.0, 0.8]]
}

/// Vertices per boundary arc of [`default_bt_region`].
pub const BT_REGION_SAMPLES: usize = 48;

/// Lower arc of the `(b, t)` lens: `2√(1 + b² + (1 + t²)/4) − b − t = √3`.
pub fn bt_lower(b: f64) -> f64 {
    let s = 3f64.sqrt();
    (3.0 * b * b - 2.0 * s * b + 2.0) / (2.0 * (s + b))
}

/// Upper arc of the `(b, t)` lens: `√(1 + t²) + b + t = √3`.
pub fn bt_upper(b: f64) -> f64 {
    let c = 3f64.sqrt() - b;
    (c * c - 1.0) / (2.0 * c)
}

/// Default `(b, t)` region: a convex polygon inscribed in the lens where
/// the two quadrilaterals of the bare T-pattern have capacity below `2√3`.
/// The arcs meet at `(0, 1/√3)` and at `b = β`.
pub fn default_bt_region() -> Vec<[f64; 2]> {
    let n = BT_REGION_SAMPLES;
    let at = |i: usize| beta() * i as f64 / n as f64;
    let mut poly: Vec<[f64; 2]> = (0..=n).map(|i| [at(i), bt_lower(at(i))]).collect();
    poly.extend((1..n).rev().map(|i| [at(i), bt_upper(at(i))]));
    poly
}

/// Vertical extent of a convex polygon at abscissa `b`.
pub fn vertical_span(poly: &[[f64; 2]], b: f64) -> Option<(f64, f64)> {
    let n = poly.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        let (xa, xb) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        if b < xa || b > xb {
            continue;
        }
        if x0 == x1 {
            lo = lo.min(y0.min(y1));
            hi = hi.max(y0.max(y1));
        } else {
            let y = y0 + (y1 - y0) * (b - x0) / (x1 - x0);
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

impl FamilySpec {
    pub fn n(&self) -> usize {
        self.pitch_specs.len()
    }

    pub fn quad_count(&self) -> usize {
        match self.kind {
            FamilyKind::A => self.n(),
            FamilyKind::B => self.n() - 1,
        }
    }

    pub fn is_tpattern(&self, index: usize) -> bool {
        index == 1 || index == self.special_index
    }

    pub fn mask_weights(&self) -> Option<MaskedWeights> {
        self.mask.as_ref().map(MaskSpec::weights)
    }

    /// Family notation, e.g. `A(0,[0-,1],4,6)`.
    pub fn notation(&self) -> String {
        let kind = match self.kind {
            FamilyKind::A => "A",
            FamilyKind::B => "B",
        };
        let pitches: Vec<String> = self.pitch_specs.iter().map(|p| p.to_string()).collect();
        let mut s = format!("{kind}({}", pitches.join(","));
        if !self.constraints.is_empty() {
            let cs: Vec<String> = self.constraints.iter().map(|c| c.to_string()).collect();
            s.push(';');
            s.push_str(&cs.join(","));
        }
        s.push(')');
        s
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::InvalidFamily {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n();
        let min = match self.kind {
            FamilyKind::A => 3,
            FamilyKind::B => 2,
        };
        if n < min {
            return Err(self.fail(format!("needs at least {min} segments")));
        }
        if self.special_index < 2 || self.special_index > n {
            return Err(self.fail(format!(
                "special index {} outside 2..={n}",
                self.special_index
            )));
        }
        for (i, p) in self.pitch_specs.iter().enumerate() {
            p.check()
                .map_err(|e| self.fail(format!("segment {}: {e}", i + 1)))?;
        }
        if self.pitch_specs[0] != PitchSpec::fixed(0.0)
            && !(self.pitch_specs[0].is_fixed() && self.pitch_specs[0].lo == 0.0)
        {
            return Err(self.fail("segment 1 must have fixed pitch 0"));
        }
        let tj = &self.pitch_specs[self.special_index - 1];
        if !(tj.is_fixed() && tj.lo == 6.0) {
            return Err(self.fail("special segment must have fixed pitch 6"));
        }
        for c in &self.constraints {
            for idx in [c.source, c.container] {
                if idx == 0 || idx > n {
                    return Err(self.fail(format!("constraint {c} references segment {idx}")));
                }
            }
            if c.source == c.container {
                return Err(self.fail(format!("constraint {c} is reflexive")));
            }
            if self.is_tpattern(c.container) {
                return Err(self.fail(format!(
                    "constraint {c}: T-pattern segments cannot be containers"
                )));
            }
            let sp = &self.pitch_specs[c.source - 1];
            if !sp.is_fixed() || (sp.lo - 6.0).abs() < 1e-12 {
                return Err(self.fail(format!(
                    "constraint {c}: source pitch must be fixed and not vertical"
                )));
            }
        }
        let mut containers: Vec<usize> = self.constraints.iter().map(|c| c.container).collect();
        containers.sort_unstable();
        if containers.windows(2).any(|w| w[0] == w[1]) {
            return Err(self.fail("a segment may contain at most one tip"));
        }
        if let Some(p) = &self.penalty {
            p.check(n).map_err(|e| self.fail(e.to_string()))?;
        }
        if let Some(m) = &self.mask {
            if m.pattern.len() != self.quad_count() {
                return Err(self.fail(format!(
                    "mask has {} entries for {} quadrilaterals",
                    m.pattern.len(),
                    self.quad_count()
                )));
            }
            m.weights()
                .validate()
                .map_err(|e| self.fail(e.to_string()))?;
        }
        if self.bt_region.len() < 3 {
            return Err(self.fail("(b,t) region needs at least 3 vertices"));
        }
        if !(self.max_free_length >= 1.0) {
            return Err(self.fail("maximum free length must be at least 1"));
        }
        if let Some(c) = &self.reference_centers {
            if c.len() != n - 2 {
                return Err(self.fail("one reference center per free segment required"));
            }
        }
        Ok(())
    }

    /// `(K, L)`.
    pub fn dimension(&self) -> (usize, usize) {
        let l = self.n() - 2;
        let intervals = self
            .free_indices()
            .filter(|&k| !self.pitch_specs[k - 1].is_fixed())
            .count();
        let centers: usize = self
            .free_indices()
            .map(|k| if self.container_of(k).is_some() { 1 } else { 2 })
            .sum();
        (4 + intervals + l + centers + 2 * l, l)
    }

    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (2..=self.n()).filter(move |&k| k != self.special_index)
    }

    fn container_of(&self, k: usize) -> Option<&ContainmentConstraint> {
        self.constraints.iter().find(|c| c.container == k)
    }

    fn uses_center_box(&self) -> bool {
        self.center_mode == CenterMode::Box && self.reference_centers.is_some()
    }
}

/// Exported family definition file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyFile {
    pub format: String,
    pub layout: String,
    pub families: Vec<FamilySpec>,
}

impl FamilyFile {
    pub fn new(families: Vec<FamilySpec>) -> Self {
        Self {
            format: FAMILY_FORMAT.into(),
            layout: LAYOUT_VERSION.into(),
            families,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: FamilyFile =
            serde_json::from_str(text).map_err(|e| invalid(format!("family file: {e}")))?;
        if f.layout != LAYOUT_VERSION {
            return Err(invalid(format!("unsupported layout `{}`", f.layout)));
        }
        for fam in &f.families {
            fam.check()?;
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PitchVar {
    Fixed(f64),
    Var { var: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CenterVar {
    Free {
        x: usize,
        y: usize,
        origin: [f64; 2],
        half: f64,
    },
    Tip {
        var: usize,
        constraint: ContainmentConstraint,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct FreeSlot {
    segment: usize,
    pitch: PitchVar,
    length_var: usize,
    center: CenterVar,
    heights: (usize, usize),
    sign_slot: usize,
}

/// Precomputed variable layout and decode order of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    k: usize,
    l: usize,
    slots: Vec<FreeSlot>,
    order: Vec<usize>,
}

impl Layout {
    pub fn new(f: &FamilySpec) -> Result<Self> {
        f.check()?;
        let (k, l) = f.dimension();
        let free: Vec<usize> = f.free_indices().collect();
        let mut next = 4;
        let mut pitch_vars = Vec::with_capacity(l);
        for &s in &free {
            let p = &f.pitch_specs[s - 1];
            pitch_vars.push(if p.is_fixed() {
                PitchVar::Fixed(p.range().0)
            } else {
                let (lo, hi) = p.range();
                next += 1;
                PitchVar::Var {
                    var: next - 1,
                    lo,
                    hi,
                }
            });
        }
        let length_base = next;
        next += l;
        let mut centers = Vec::with_capacity(l);
        for (m, &s) in free.iter().enumerate() {
            centers.push(match f.container_of(s) {
                Some(c) => {
                    next += 1;
                    CenterVar::Tip {
                        var: next - 1,
                        constraint: *c,
                    }
                }
                None => {
                    let (origin, half) = if f.uses_center_box() {
                        (
                            f.reference_centers.as_ref().unwrap()[m],
                            CENTER_BOX_HALF_WIDTH,
                        )
                    } else {
                        ([0.0, 0.0], 1.0)
                    };
                    next += 2;
                    CenterVar::Free {
                        x: next - 2,
                        y: next - 1,
                        origin,
                        half,
                    }
                }
            });
        }
        let height_base = next;
        debug_assert_eq!(height_base + 2 * l, k);
        let slots: Vec<FreeSlot> = free
            .iter()
            .enumerate()
            .map(|(m, &s)| FreeSlot {
                segment: s,
                pitch: pitch_vars[m],
                length_var: length_base + m,
                center: centers[m],
                heights: (height_base + 2 * m, height_base + 2 * m + 1),
                sign_slot: m,
            })
            .collect();

        // sources before containers
        let mut order = Vec::with_capacity(l);
        let mut placed = vec![false; f.n() + 1];
        placed[1] = true;
        placed[f.special_index] = true;
        while order.len() < l {
            let before = order.len();
            for (m, slot) in slots.iter().enumerate() {
                if placed[slot.segment] {
                    continue;
                }
                let ready = match slot.center {
                    CenterVar::Tip { constraint, .. } => placed[constraint.source],
                    CenterVar::Free { .. } => true,
                };
                if ready {
                    placed[slot.segment] = true;
                    order.push(m);
                }
            }
            if order.len() == before {
                return Err(f.fail("containment constraints form a cycle"));
            }
        }
        Ok(Self { k, l, slots, order })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Indices of the trailing height variables.
    pub fn height_vars(&self) -> std::ops::Range<usize> {
        self.k - 2 * self.l..self.k
    }
}

/// The T-pattern values `(b, t, x, y)` encoded by the first four variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TPatternParams {
    pub b: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl TPatternParams {
    pub fn decode(f: &FamilySpec, r: &[f64]) -> Result<Self> {
        let b = lerp(0.0, beta(), r[0]);
        let (lo, hi) = vertical_span(&f.bt_region, b)
            .ok_or_else(|| Error::Decode(format!("(b,t) region does not meet the line b = {b}")))?;
        Ok(Self {
            b,
            t: lerp(lo, hi, r[1]),
            x: lerp(0.0, X_MAX, r[2]),
            y: lerp(-Y_MAX, Y_MAX, r[3]),
        })
    }

    /// `B_1` from `(−|B_1|, 0, 0)` to the origin.
    pub fn bottom(&self) -> SignedSegment3 {
        let len = (1.0 + self.b * self.b).sqrt();
        SignedSegment3::new([-len, 0.0, 0.0], [0.0; 3], if self.b > 0.0 { 1 } else { 0 })
    }

    /// `B_j`: vertical in the plane, midpoint `(x, y, 0)`, first endpoint lower.
    pub fn special(&self) -> SignedSegment3 {
        let half = 0.5 * (1.0 + self.t * self.t).sqrt();
        SignedSegment3::new(
            [self.x, self.y - half, 0.0],
            [self.x, self.y + half, 0.0],
            -1,
        )
    }
}

/// Decode a cube point to a ladder of the family.
pub fn decode(f: &FamilySpec, p: &CubePoint) -> Result<Ladder> {
    let layout = Layout::new(f)?;
    decode_with(f, &layout, p)
}

pub(crate) fn decode_with(f: &FamilySpec, layout: &Layout, p: &CubePoint) -> Result<Ladder> {
    p.check_dims(layout.k, layout.l)?;
    let r = &p.r;
    let tp = TPatternParams::decode(f, r)?;
    let n = f.n();
    let mut segs = vec![SignedSegment3::new([0.0; 3], [0.0; 3], 0); n];
    segs[0] = tp.bottom();
    segs[f.special_index - 1] = tp.special();
    let ladder_kind = f.kind.ladder_kind();
    for &m in &layout.order {
        let slot = &layout.slots[m];
        let theta = match slot.pitch {
            PitchVar::Fixed(a) => a,
            PitchVar::Var { var, lo, hi } => lerp(lo, hi, r[var]),
        };
        let len = lerp(1.0, f.max_free_length, r[slot.length_var]);
        let (z1, z2) = if f.heights_frozen {
            (0.0, 0.0)
        } else {
            (
                r[slot.heights.0] - HEIGHT_MAX,
                r[slot.heights.1] - HEIGHT_MAX,
            )
        };
        let dz = z2 - z1;
        let planar = (len * len - dz * dz).max(0.0).sqrt();
        let dir = PlanarPoint::new(theta.cos(), theta.sin());
        let first = match slot.center {
            CenterVar::Free { x, y, origin, half } => {
                let c = PlanarPoint::new(
                    origin[0] + lerp(-half, half, r[x]),
                    origin[1] + lerp(-half, half, r[y]),
                );
                c - dir.scale(0.5 * planar)
            }
            CenterVar::Tip { var, constraint } => {
                // decode order puts the source before its container
                let tip = constraint
                    .tip_of(&segs[constraint.source - 1])
                    .map_err(|e| {
                        Error::Decode(format!("tip of segment {}: {e}", constraint.source))
                    })?;
                tip - dir.scale(r[var] * planar)
            }
        };
        let second = first + dir.scale(planar);
        segs[slot.segment - 1] = SignedSegment3::new(
            [first.x, first.y, z1],
            [second.x, second.y, z2],
            p.signs[slot.sign_slot],
        );
    }
    Ladder::new(segs, ladder_kind, f.special_index)
}

/// Outcome of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub decode_failed: bool,
}

/// Pure evaluator `CubePoint → capacity (+ penalty)` for a family.
#[derive(Debug, Clone)]
pub struct Objective {
    spec: FamilySpec,
    layout: Layout,
    mask: Option<MaskedWeights>,
}

impl Objective {
    pub fn new(spec: FamilySpec) -> Result<Self> {
        let layout = Layout::new(&spec)?;
        let mask = spec.mask_weights();
        Ok(Self { spec, layout, mask })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn decode(&self, p: &CubePoint) -> Result<Ladder> {
        decode_with(&self.spec, &self.layout, p)
    }

    /// Objective of a decoded ladder.
    pub fn value_of(&self, l: &Ladder) -> Result<f64> {
        match &self.spec.penalty {
            Some(pen) => enhanced_capacity(l, pen, self.mask.as_ref()),
            None => ladder_capacity(l, self.mask.as_ref()),
        }
    }

    pub fn try_evaluate(&self, p: &CubePoint) -> Result<f64> {
        let l = self.decode(p)?;
        self.value_of(&l)
    }

    /// Decode failures map to `+∞` with the flag set.
    pub fn evaluate(&self, p: &CubePoint) -> Evaluation {
        match self.try_evaluate(p) {
            Ok(v) if v.is_finite() => Evaluation {
                value: v,
                decode_failed: false,
            },
            _ => Evaluation {
                value: f64::INFINITY,
                decode_failed: true,
            },
        }
    }
}

pub fn objective(f: &FamilySpec) -> Result<Objective> {
    Objective::new(f.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DiagnosticKind {
    Shape,
    Pitch,
    Sign,
    Height,
    TPattern,
    Containment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub segment: Option<usize>,
    pub residual: f64,
    pub message: String,
}

/// Pitch of a planar direction, taken in `(−π/2, 3π/2]`.
pub fn pitch_of(first: Point3, second: Point3) -> Option<f64> {
    let dx = second[0] - first[0];
    let dy = second[1] - first[1];
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    let a = dy.atan2(dx);
    Some(if a <= -PI / 2.0 { a + 2.0 * PI } else { a })
}

const VALIDATE_TOL: f64 = 1e-9;

/// Every violated family condition, with residuals.
pub fn validate(f: &FamilySpec, l: &Ladder) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |kind, segment, residual: f64, message: String| {
        out.push(Diagnostic {
            kind,
            segment,
            residual,
            message,
        })
    };
    if l.len() != f.n() || l.kind != f.kind.ladder_kind() || l.special_index != f.special_index {
        push(
            DiagnosticKind::Shape,
            None,
            0.0,
            format!(
                "ladder shape ({} segments, {:?}, j={}) does not match family",
                l.len(),
                l.kind,
                l.special_index
            ),
        );
        return out;
    }
    for (i, (s, spec)) in l.segments.iter().zip(&f.pitch_specs).enumerate() {
        let idx = i + 1;
        if let Some(theta) = pitch_of(s.first, s.second) {
            if !spec.contains(theta, VALIDATE_TOL) {
                let (lo, hi) = spec.range();
                let res = (lo - theta).max(theta - hi);
                push(
                    DiagnosticKind::Pitch,
                    Some(idx),
                    res,
                    format!("pitch {theta:.6} outside [{lo:.6}, {hi:.6}]"),
                );
            }
        }
        for z in [s.first[2], s.second[2]] {
            if z.abs() > HEIGHT_MAX + VALIDATE_TOL {
                push(
                    DiagnosticKind::Height,
                    Some(idx),
                    z.abs() - HEIGHT_MAX,
                    format!("height {z} outside [-1/2, 1/2]"),
                );
            }
        }
        if s.length() < 1.0 - crate::ladder::LENGTH_TOL {
            push(
                DiagnosticKind::Sign,
                Some(idx),
                1.0 - s.length(),
                format!("length {} below 1", s.length()),
            );
        }
    }
    let b1 = &l.segments[0];
    if !(b1.sign == 0 || b1.sign == 1) {
        push(
            DiagnosticKind::Sign,
            Some(1),
            0.0,
            format!("segment 1 has sign {}", b1.sign),
        );
    }
    let bj = &l.segments[f.special_index - 1];
    if bj.sign != -1 {
        push(
            DiagnosticKind::Sign,
            Some(f.special_index),
            0.0,
            format!("special segment has sign {}", bj.sign),
        );
    }
    let off_plane =
        b1.first[1].abs() + b1.first[2].abs() + b1.second.iter().map(|v| v.abs()).sum::<f64>();
    if off_plane > VALIDATE_TOL || b1.first[0] > 0.0 {
        push(
            DiagnosticKind::TPattern,
            Some(1),
            off_plane,
            "segment 1 must run along the negative X axis to the origin".into(),
        );
    }
    let mid = [
        0.5 * (bj.first[0] + bj.second[0]),
        0.5 * (bj.first[1] + bj.second[1]),
    ];
    if mid[0] < -VALIDATE_TOL || mid[0] > X_MAX + VALIDATE_TOL {
        push(
            DiagnosticKind::TPattern,
            Some(f.special_index),
            (mid[0] - X_MAX).max(-mid[0]),
            format!("x = {} outside [0, 1/18]", mid[0]),
        );
    }
    if mid[1].abs() > Y_MAX + VALIDATE_TOL {
        push(
            DiagnosticKind::TPattern,
            Some(f.special_index),
            mid[1].abs() - Y_MAX,
            format!("|y| = {} exceeds 1/30", mid[1].abs()),
        );
    }
    if bj.first[2].abs() + bj.second[2].abs() > VALIDATE_TOL {
        push(
            DiagnosticKind::TPattern,
            Some(f.special_index),
            bj.first[2].abs() + bj.second[2].abs(),
            "special segment must lie in the XY plane".into(),
        );
    }
    for c in &f.constraints {
        match c.residual(l) {
            Ok(res) if res <= 1e-9 => {}
            Ok(res) => push(
                DiagnosticKind::Containment,
                Some(c.container),
                res,
                format!("constraint {c} violated by {res:.3e}"),
            ),
            Err(e) => push(
                DiagnosticKind::Containment,
                Some(c.container),
                f64::INFINITY,
                format!("constraint {c}: {e}"),
            ),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lerp_examples() {
        assert_eq!(lerp(0.0, beta(), 0.0), 0.0);
        assert_eq!(lerp(0.0, beta(), 1.0), beta());
        assert_eq!(lerp(2.0, 4.0, 0.25), 2.5);
    }

    #[test]
    fn coerce_examples() {
        let r = vec![0.1, 0.9, 0.4];
        let r0 = vec![0.5, 0.2, 0.4];
        assert_eq!(coerce(&r, &r0, 0.0).unwrap(), r);
        assert_eq!(coerce(&r0, &r0, 7.0).unwrap(), r0);
        let far = coerce(&r, &r0, 1e6).unwrap();
        for (a, b) in far.iter().zip(&r0) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(coerce(&r, &r0, -1.0).is_err());
        assert!(coerce(&r, &r0[..2], 1.0).is_err());
    }

    #[test]
    fn span_of_rectangle_and_triangle() {
        let rect = [[0.0, 0.4], [0.5, 0.4], [0.5, 0.8], [0.0, 0.8]];
        assert_eq!(vertical_span(&rect, 0.2), Some((0.4, 0.8)));
        assert_eq!(vertical_span(&rect, 0.0), Some((0.4, 0.8)));
        assert_eq!(vertical_span(&rect, 1.0), None);
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let (lo, hi) = vertical_span(&tri, 0.25).unwrap();
        assert!((lo - 0.0).abs() < 1e-15 && (hi - 0.75).abs() < 1e-15);
    }

    #[test]
    fn lens_arcs_meet_at_the_corners() {
        let s = 1.0 / 3f64.sqrt();
        assert!((bt_lower(0.0) - s).abs() < 1e-15 && (bt_upper(0.0) - s).abs() < 1e-15);
        assert!((bt_lower(beta()) - bt_upper(beta())).abs() < 1e-12);
        assert!(bt_lower(0.2) < bt_upper(0.2));
        let poly = default_bt_region();
        let (lo, hi) = vertical_span(&poly, 0.0).unwrap();
        assert!((lo - s).abs() < 1e-15 && (hi - s).abs() < 1e-15);
        assert!(vertical_span(&poly, beta() + 1e-9).is_none());
    }

    #[test]
    fn pitch_ranges() {
        let p = PitchSpec::interval(0.0, true, 1.0, false);
        let (lo, hi) = p.range();
        assert!((lo + PI / 30.0).abs() < 1e-15);
        assert!((hi - PI / 12.0).abs() < 1e-15);
        assert_eq!(p.to_string(), "[0-,1]");
        assert_eq!(
            PitchSpec::interval(8.0, false, 12.0, true).to_string(),
            "[8,12+]"
        );
    }

    #[test]
    fn pitch_of_quadrants() {
        let o = [0.0; 3];
        assert!((pitch_of(o, [1.0, 0.0, 0.0]).unwrap()).abs() < 1e-15);
        assert!((pitch_of(o, [-1.0, 0.0, 0.0]).unwrap() - PI).abs() < 1e-15);
        assert!((pitch_of(o, [0.0, -1.0, 0.0]).unwrap() - 1.5 * PI).abs() < 1e-15);
        assert!((pitch_of(o, [-1.0, -1.0, 0.0]).unwrap() - 1.25 * PI).abs() < 1e-15);
        assert!(pitch_of(o, o).is_none());
    }

    #[test]
    fn mask_term_json() {
        let m: MaskSpec = serde_json::from_str(r#"{"pattern":["a","a",0,0],"a":0.36}"#).unwrap();
        assert_eq!(m.weights(), MaskedWeights(vec![0.36, 0.36, 0.0, 0.0]));
        assert!(serde_json::from_str::<MaskSpec>(r#"{"pattern":["b"],"a":0.3}"#).is_err());
        let back = serde_json::to_string(&m).unwrap();
        assert_eq!(back, r#"{"pattern":["a","a",0.0,0.0],"a":0.36}"#);
    }
}
