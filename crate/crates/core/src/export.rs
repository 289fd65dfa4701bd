//! Ladder serialization and the stacked minimal-realization picture.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::PlanarPoint;
use crate::ladder::{minimal_realization, Ladder};

pub const LADDER_FORMAT: &str = "mll-ladder/1";

/// Where an exported file came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: Option<u64>,
    pub rng: Option<String>,
}

impl Provenance {
    pub fn new(seed: Option<u64>, rng: Option<&str>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            rng: rng.map(str::to_owned),
        }
    }

    fn comment(&self, prefix: &str) -> String {
        let mut s = format!("{prefix} mll {}", self.version);
        if let Some(seed) = self.seed {
            let _ = write!(s, " seed={seed}");
        }
        if let Some(rng) = &self.rng {
            let _ = write!(s, " rng={rng}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderFile {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub ladder: Ladder,
}

pub fn ladder_json(l: &Ladder, provenance: Option<&Provenance>) -> Result<String> {
    let f = LadderFile {
        format: LADDER_FORMAT.into(),
        provenance: provenance.cloned(),
        ladder: l.clone(),
    };
    serde_json::to_string_pretty(&f).map_err(|e| invalid(format!("ladder: {e}")))
}

pub fn parse_ladder_json(text: &str) -> Result<Ladder> {
    let f: LadderFile =
        serde_json::from_str(text).map_err(|e| invalid(format!("ladder file: {e}")))?;
    if f.format != LADDER_FORMAT {
        return Err(invalid(format!("unsupported ladder format `{}`", f.format)));
    }
    Ladder::new(f.ladder.segments, f.ladder.kind, f.ladder.special_index)
}

/// Minimal realizations stacked in the strip: the bottom of each trapezoid
/// is the top of the previous one. Corners are in the order bottom-left,
/// bottom-right, top-left, top-right.
pub fn realization_stack(l: &Ladder) -> Result<Vec<[PlanarPoint; 4]>> {
    let mut base = 0.0;
    l.quads()
        .map(|q| {
            let r = minimal_realization(&q)?;
            let v = r.vertices().map(|p| PlanarPoint::new(p.x, p.y + base));
            base += r.offset;
            Ok(v)
        })
        .collect()
}

/// Four rows per quadrilateral: `quad,corner,x,y`.
pub fn realization_csv(l: &Ladder, provenance: Option<&Provenance>) -> Result<String> {
    let stack = realization_stack(l)?;
    let mut out = String::new();
    if let Some(p) = provenance {
        out.push_str(&p.comment("#"));
        out.push('\n');
    }
    out.push_str("quad,corner,x,y\n");
    for (k, quad) in stack.iter().enumerate() {
        for (c, p) in quad.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                k + 1,
                c + 1,
                fmt_coord(p.x),
                fmt_coord(p.y)
            );
        }
    }
    Ok(out)
}

/// Fixed formatting shared by every export.
pub fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.9}");
    if s == "-0.000000000" {
        "0.000000000".into()
    } else {
        s
    }
}

/// One closed polyline per trapezoid, y pointing up.
pub fn realization_svg(l: &Ladder, provenance: Option<&Provenance>) -> Result<String> {
    let stack = realization_stack(l)?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for quad in &stack {
        for p in quad {
            lo = lo.min(p.y);
            hi = hi.max(p.y);
        }
    }
    let scale = 200.0;
    let margin = 10.0;
    let width = scale + 2.0 * margin;
    let height = (hi - lo) * scale + 2.0 * margin;
    let to_svg = |p: &PlanarPoint| (margin + p.x * scale, margin + (hi - p.y) * scale);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    if let Some(p) = provenance {
        let _ = writeln!(out, "<!--{} -->", p.comment(""));
    }
    for (k, quad) in stack.iter().enumerate() {
        // bottom-left, bottom-right, top-right, top-left
        let pts: Vec<String> = [quad[0], quad[1], quad[3], quad[2], quad[0]]
            .iter()
            .map(|p| {
                let (x, y) = to_svg(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline id="quad{}" points="{}" fill="none" stroke="black" stroke-width="1"/>"#,
            k + 1,
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
