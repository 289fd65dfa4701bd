//! Built-in families.

use crate::error::{Error, Result};
use crate::ladder::PenaltySpec;

use super::reference::attach_reference;
use super::{
    default_bt_region, wide_bt_region, CenterMode, ContainmentConstraint as Cc, FamilyKind,
    FamilyRole, FamilySpec, MaskSpec, MaskTerm, PitchSpec, DEFAULT_MAX_FREE_LENGTH,
};

/// Default value of the mask scalar `a`.
pub const DEFAULT_MASK_A: f64 = 0.36;

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn fx(units: f64) -> PitchSpec {
    PitchSpec::fixed(units)
}

fn iv(lo: f64, widen_lo: bool, hi: f64, widen_hi: bool, reference: f64) -> PitchSpec {
    PitchSpec::interval(lo, widen_lo, hi, widen_hi).with_reference(reference)
}

fn mask(pattern: &[Option<f64>]) -> Option<MaskSpec> {
    Some(MaskSpec {
        pattern: pattern
            .iter()
            .map(|t| t.map_or(MaskTerm::A, MaskTerm::Fixed))
            .collect(),
        a: DEFAULT_MASK_A,
    })
}

const A: Option<f64> = None;
const Z: Option<f64> = Some(0.0);

struct Entry {
    name: &'static str,
    kind: FamilyKind,
    role: FamilyRole,
    pitches: Vec<PitchSpec>,
    j: usize,
    constraints: Vec<Cc>,
    penalty: Option<PenaltySpec>,
    mask: Option<MaskSpec>,
}

impl Entry {
    fn build(self) -> Result<FamilySpec> {
        let (threshold, center_mode) = match (self.role, self.kind) {
            (FamilyRole::Demo, _) => (SQRT3 - 1.0 / 50.0, CenterMode::Absolute),
            (_, FamilyKind::A) => (2.0 * SQRT3, CenterMode::Box),
            (_, FamilyKind::B) => (SQRT3, CenterMode::Box),
        };
        // the demo illustrates ladder capacity alone, without the T-pattern bounds
        let bt_region = if self.role == FamilyRole::Demo {
            wide_bt_region()
        } else {
            default_bt_region()
        };
        let f = FamilySpec {
            name: self.name.into(),
            kind: self.kind,
            role: self.role,
            pitch_specs: self.pitches,
            special_index: self.j,
            constraints: self.constraints,
            penalty: self.penalty,
            mask: self.mask,
            threshold,
            bt_region,
            max_free_length: DEFAULT_MAX_FREE_LENGTH,
            center_mode,
            heights_frozen: true,
            reference: None,
            reference_centers: None,
        };
        f.check()?;
        attach_reference(f)
    }
}

// Variant indices are relative to the decoded endpoint order. Index 1 is the
// one that penalizes B2 lying left of the line through the container, which
// is the case the other three indices leave free.
fn entries() -> Vec<Entry> {
    use FamilyKind::{A as Cyc, B as Open};
    use FamilyRole::*;
    vec![
        Entry {
            name: "cross1",
            kind: Cyc,
            role: Claim,
            pitches: vec![fx(0.0), iv(0.0, true, 1.0, false, 1.0), fx(4.0), fx(6.0)],
            j: 4,
            constraints: vec![],
            penalty: Some(PenaltySpec::new(2, 3)),
            mask: None,
        },
        Entry {
            name: "cross2",
            kind: Cyc,
            role: Claim,
            pitches: vec![fx(0.0), iv(0.0, true, 1.0, false, 1.0), fx(6.0), fx(8.0)],
            j: 3,
            constraints: vec![],
            penalty: Some(PenaltySpec::new(2, 4)),
            mask: None,
        },
        Entry {
            name: "cross3",
            kind: Cyc,
            role: Claim,
            pitches: vec![fx(0.0), fx(1.0), iv(4.0, false, 6.0, true, 4.0), fx(6.0)],
            j: 4,
            constraints: vec![],
            penalty: Some(PenaltySpec::variant(1, 2, 3)),
            mask: None,
        },
        Entry {
            name: "cross4",
            kind: Cyc,
            role: Claim,
            pitches: vec![fx(0.0), fx(1.0), fx(6.0), iv(6.0, true, 8.0, false, 8.0)],
            j: 3,
            constraints: vec![],
            penalty: Some(PenaltySpec::variant(1, 2, 4)),
            mask: None,
        },
        Entry {
            name: "cross5",
            kind: Cyc,
            role: Claim,
            pitches: vec![fx(0.0), fx(4.0), fx(6.0), iv(8.0, true, 12.0, false, 8.0)],
            j: 3,
            constraints: vec![],
            penalty: Some(PenaltySpec::variant(2, 2, 4)),
            mask: None,
        },
        Entry {
            name: "geo1",
            kind: Cyc,
            role: Claim,
            pitches: vec![fx(0.0), fx(4.0), fx(6.0), iv(8.0, false, 12.0, true, 10.0)],
            j: 3,
            constraints: vec![Cc::left(2, 4)],
            penalty: None,
            mask: mask(&[A, A, Z, Z]),
        },
        Entry {
            name: "geo2",
            kind: Open,
            role: Claim,
            pitches: vec![fx(0.0), fx(1.0), iv(4.0, false, 6.0, true, 6.0), fx(6.0)],
            j: 4,
            constraints: vec![Cc::right(2, 3)],
            penalty: None,
            mask: mask(&[A, A, Z]),
        },
        Entry {
            name: "geo3",
            kind: Cyc,
            role: Claim,
            pitches: vec![
                fx(0.0),
                fx(1.0),
                iv(4.0, false, 6.0, true, 6.0),
                fx(6.0),
                iv(6.0, true, 8.0, false, 6.0),
                fx(11.0),
            ],
            j: 4,
            constraints: vec![Cc::right(2, 5), Cc::right(6, 3)],
            penalty: None,
            mask: mask(&[Z, A, Z, Z, A, Z]),
        },
        Entry {
            name: "geo4",
            kind: Cyc,
            role: Claim,
            pitches: vec![
                fx(0.0),
                fx(1.0),
                iv(4.0, false, 6.0, true, 6.0),
                iv(6.0, true, 8.0, false, 6.0),
                fx(6.0),
                fx(11.0),
            ],
            j: 5,
            constraints: vec![Cc::right(2, 3), Cc::right(6, 4)],
            penalty: None,
            mask: mask(&[A, A, Z, Z, A, Z]),
        },
        Entry {
            name: "geo5",
            kind: Cyc,
            role: Claim,
            pitches: vec![
                fx(0.0),
                fx(1.0),
                iv(4.0, false, 6.0, true, 6.0),
                iv(6.0, true, 8.0, false, 6.0),
                fx(6.0),
                fx(11.0),
            ],
            j: 5,
            constraints: vec![Cc::right(2, 4), Cc::right(6, 3)],
            penalty: None,
            mask: mask(&[A, A, Z, Z, A, Z]),
        },
        Entry {
            name: "geo31",
            kind: Cyc,
            role: Auxiliary,
            pitches: vec![
                fx(0.0),
                fx(1.0),
                iv(4.0, false, 6.0, true, 6.0),
                fx(6.0),
                iv(6.0, true, 8.0, false, 6.0),
                fx(11.0),
            ],
            j: 4,
            constraints: vec![Cc::right(2, 3), Cc::right(6, 5)],
            penalty: None,
            mask: None,
        },
        Entry {
            name: "cross1X",
            kind: Cyc,
            role: Control,
            pitches: vec![fx(0.0), iv(0.0, true, 1.0, true, 1.0), fx(4.0), fx(6.0)],
            j: 4,
            constraints: vec![],
            penalty: Some(PenaltySpec::new(2, 3)),
            mask: None,
        },
        Entry {
            name: "geo33",
            kind: Cyc,
            role: Control,
            pitches: vec![fx(0.0), fx(1.0), iv(4.0, false, 6.0, true, 6.0), fx(6.0)],
            j: 4,
            constraints: vec![Cc::right(2, 3)],
            penalty: None,
            mask: None,
        },
        Entry {
            name: "geo3X",
            kind: Cyc,
            role: Control,
            pitches: vec![
                fx(0.0),
                fx(1.0),
                iv(4.0, false, 6.0, true, 6.0),
                fx(6.0),
                fx(11.0),
            ],
            j: 4,
            constraints: vec![Cc::right(5, 3)],
            penalty: None,
            mask: None,
        },
        Entry {
            name: "demo",
            kind: Open,
            role: Demo,
            pitches: vec![fx(0.0), fx(2.0), fx(6.0)],
            j: 3,
            constraints: vec![],
            penalty: None,
            mask: None,
        },
    ]
}

/// All built-in families, references attached.
pub fn registry() -> Vec<FamilySpec> {
    entries()
        .into_iter()
        .map(|e| e.build().expect("built-in family is valid"))
        .collect()
}

pub fn registry_entry(name: &str) -> Result<FamilySpec> {
    entries()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::InvalidFamily {
            name: name.into(),
            reason: "no such family".into(),
        })?
        .build()
}
