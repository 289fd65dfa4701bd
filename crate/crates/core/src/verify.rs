//! Brute-force oracles and the acceptance suites built on them.
//!
//! The oracles share no code with the closed forms they check: the capacity
//! oracle scans offsets of a placed trapezoid and the crossing oracle solves
//! the 2×2 system by Cramer's rule.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::export::{ladder_json, parse_ladder_json};
use crate::family::{coerce, decode, registry, registry_entry, validate, CubePoint, FamilyRole};
use crate::geom::{chi, chi_variant, PlanarPoint, PlanarSegment};
use crate::ladder::{
    diag_capacity, ladder_capacity, quad_capacity, quad_capacity0, quad_capacity_u, Ladder,
    LadderKind, MaskedWeights, Quadrilateral, SignedSegment3,
};
use crate::optimizer::{
    clamp, run, OptimizerConfig, SignPolicy, DEFAULT_REFRESH_EVALS, DEFAULT_TOTAL_EVALS,
};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Segment of length at least 1 through a random point, with a sign
/// consistent with its length.
pub fn random_segment<R: Rng + ?Sized>(rng: &mut R) -> SignedSegment3 {
    let first = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-0.5..0.5),
    ];
    let dir = loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            break v.map(|c| c / n);
        }
    };
    let (len, sign) = if rng.random_bool(0.2) {
        (1.0, 0)
    } else {
        (
            rng.random_range(1.001..2.5),
            if rng.random_bool(0.5) { 1 } else { -1 },
        )
    };
    let second = [
        first[0] + len * dir[0],
        first[1] + len * dir[1],
        first[2] + len * dir[2],
    ];
    SignedSegment3::new(first, second, sign)
}

pub fn random_quad<R: Rng + ?Sized>(rng: &mut R) -> Quadrilateral {
    Quadrilateral::new(random_segment(rng), random_segment(rng))
}

/// Random ladder of `n ≥ 3` segments, cyclic or open.
pub fn random_ladder<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Ladder {
    let kind = if rng.random_bool(0.5) {
        LadderKind::Cyclic
    } else {
        LadderKind::Open
    };
    let segments = (0..n).map(|_| random_segment(rng)).collect();
    Ladder::new(segments, kind, n).expect("random ladder is valid")
}

pub fn random_planar_segment<R: Rng + ?Sized>(rng: &mut R) -> PlanarSegment {
    PlanarSegment::new(
        PlanarPoint::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        PlanarPoint::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    )
}

fn strip_slope(s: &SignedSegment3) -> f64 {
    let len = s.length();
    if s.sign == 0 || len <= 1.0 {
        0.0
    } else {
        f64::from(s.sign) * (len * len - 1.0).sqrt()
    }
}

/// Minimum of `L′ + R′` over offsets of the top side: a scan of `samples`
/// offsets, then bisection on the feasibility boundary. Sides are measured
/// between the placed vertices.
pub fn offset_scan_capacity(q: &Quadrilateral, samples: usize) -> f64 {
    let b = strip_slope(&q.bottom);
    let t = strip_slope(&q.top);
    let sides = |h: f64| {
        let left = PlanarPoint::new(0.0, 0.0).dist(PlanarPoint::new(0.0, h));
        // signed: the top must stay above the bottom on the right side too
        let right = (h + t) - b;
        (left, right)
    };
    let feasible = |h: f64| {
        let (l, r) = sides(h);
        l >= q.left_len && r >= q.right_len
    };
    let hi = q.left_len + q.right_len + b.abs() + t.abs() + 1.0;
    let step = hi / samples as f64;
    let first = (0..=samples)
        .map(|i| i as f64 * step)
        .find(|&h| feasible(h))
        .expect("scan range contains a feasible offset");
    let (mut lo, mut up) = ((first - step).max(0.0), first);
    if feasible(lo) {
        up = lo;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if feasible(mid) {
                up = mid;
            } else {
                lo = mid;
            }
        }
    }
    let (l, r) = sides(up);
    l + r
}

/// Intersection parameters `(s, t)` of `(1−s)·a + s·b = (1−t)·c + t·d` by
/// Cramer's rule; `None` for parallel segments.
pub fn st_oracle(s1: PlanarSegment, s2: PlanarSegment) -> Option<(f64, f64)> {
    let (a, b, c, d) = (s1.a, s1.b, s2.a, s2.b);
    let (m11, m12) = (b.x - a.x, c.x - d.x);
    let (m21, m22) = (b.y - a.y, c.y - d.y);
    let (r1, r2) = (c.x - a.x, c.y - a.y);
    let det = m11 * m22 - m12 * m21;
    if det == 0.0 {
        return None;
    }
    Some(((r1 * m22 - m12 * r2) / det, (m11 * r2 - r1 * m21) / det))
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    fn timed(criterion: u8, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Self {
        let t = Instant::now();
        let (ok, detail) = f();
        Self {
            criterion,
            name,
            ok,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} [PRIMARY {}] {}: {} ({:.1}s)",
            if self.ok { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn summarize(failures: Vec<String>, ok_detail: String) -> (bool, String) {
    if failures.is_empty() {
        (true, ok_detail)
    } else {
        let n = failures.len();
        let mut shown: Vec<String> = failures.into_iter().take(3).collect();
        if n > 3 {
            shown.push(format!("{} more", n - 3));
        }
        (false, shown.join("; "))
    }
}

pub fn capacity_oracle_check() -> Check {
    Check::timed(1, "capacity oracle equivalence", || {
        let t = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for _ in 0..1_000 {
            let q = random_quad(&mut rng);
            let closed = quad_capacity(&q).expect("valid quad");
            worst = worst.max((closed - offset_scan_capacity(&q, 100_000)).abs());
        }
        let secs = t.elapsed().as_secs_f64();
        (
            worst <= 1e-9 && secs < 5.0,
            format!("max |closed form - scan| = {worst:.1e} over 1000 quads"),
        )
    })
}

pub fn degenerate_quad_check() -> Check {
    Check::timed(2, "degenerate quadrilateral", || {
        let bottom = SignedSegment3::new([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0);
        let top = SignedSegment3::new([0.5, SQRT3 / 2.0, 0.0], [1.0, 0.0, 0.0], 0);
        let q = Quadrilateral::new(bottom, top);
        let k0 = quad_capacity0(&q);
        let k = quad_capacity(&q).map_or(f64::NAN, |v| v);
        (
            q.right_len == 0.0 && (k0 - 1.0).abs() < 1e-12 && (k - 2.0).abs() < 1e-12,
            format!(
                "|L| = {}, |R| = {}, kappa0 = {k0}, kappa = {k}",
                q.left_len, q.right_len
            ),
        )
    })
}

pub fn crossing_check() -> Check {
    Check::timed(3, "crossing characterization", || {
        let t = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut failures = Vec::new();
        // sign patterns of (s, 1−s, t, 1−t) on which each variant is positive
        // although the segments miss
        let mut miss: [Vec<[bool; 4]>; 4] = Default::default();
        let mut crossings = 0;
        for _ in 0..10_000 {
            let (a, b) = (
                random_planar_segment(&mut rng),
                random_planar_segment(&mut rng),
            );
            let Some((s, u)) = st_oracle(a, b) else {
                continue;
            };
            let crosses = s > 0.0 && s < 1.0 && u > 0.0 && u < 1.0;
            crossings += usize::from(crosses);
            let c = chi(a, b).unwrap_or(f64::NAN);
            if !(0.0..=1.0).contains(&c) || (c > 0.0) != crosses {
                failures.push(format!("chi = {c} at s = {s}, t = {u}"));
            }
            let pattern = [s > 0.0, s < 1.0, u > 0.0, u < 1.0];
            for alpha in 1..=4u8 {
                let v = chi_variant(alpha, a, b).unwrap_or(f64::NAN);
                if !(0.0..=1.0).contains(&v) || (crosses && v <= 0.0) {
                    failures.push(format!("chi_{alpha} = {v} at s = {s}, t = {u}"));
                }
                let seen = &mut miss[usize::from(alpha - 1)];
                if !crosses && v > 0.0 && !seen.contains(&pattern) {
                    seen.push(pattern);
                }
            }
        }
        for (i, p) in miss.iter().enumerate() {
            if p.len() != 1 || p[0].iter().filter(|&&x| !x).count() != 1 {
                failures.push(format!("chi_{} positive on miss patterns {p:?}", i + 1));
            }
        }
        let mut modes: Vec<[bool; 4]> = miss.iter().flatten().copied().collect();
        modes.sort();
        modes.dedup();
        if modes.len() != 4 {
            failures.push("variants do not single out four distinct miss modes".into());
        }
        let secs = t.elapsed().as_secs_f64();
        if secs >= 5.0 {
            failures.push(format!("took {secs:.2}s"));
        }
        summarize(
            failures,
            format!("10000 pairs, {crossings} crossings, one miss mode per variant"),
        )
    })
}

pub fn reference_check() -> Check {
    Check::timed(4, "reference normalization", || {
        let mut failures = Vec::new();
        let mut notes = Vec::new();
        for f in registry().into_iter().filter(|f| f.name.starts_with("geo")) {
            let Some(r0) = f.reference.clone() else {
                failures.push(format!("{} has no reference", f.name));
                continue;
            };
            let want = match f.kind.ladder_kind() {
                LadderKind::Open => SQRT3,
                LadderKind::Cyclic => 2.0 * SQRT3,
            };
            match decode(&f, &r0).and_then(|l| Ok((ladder_capacity(&l, None)?, validate(&f, &l)))) {
                Ok((v, diags)) => {
                    if (v - want).abs() > 1e-6 || !diags.is_empty() {
                        failures.push(format!("{}: {v} with {} diagnostics", f.name, diags.len()));
                    }
                    notes.push(format!("{} {:+.0e}", f.name, v - want));
                }
                Err(e) => failures.push(format!("{}: {e}", f.name)),
            }
        }
        summarize(
            failures,
            format!("deviation from 2√3 or √3: {}", notes.join(", ")),
        )
    })
}

pub fn property_check() -> Check {
    Check::timed(9, "property suite", || {
        let t = Instant::now();
        let mut failures = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1_000 {
            let q = random_quad(&mut rng);
            let u = rng.random_range(0.0..=1.0);
            let chain = (|| {
                Ok::<_, crate::Error>((
                    quad_capacity0(&q),
                    quad_capacity_u(&q, u)?,
                    quad_capacity(&q)?,
                    diag_capacity(&q)?,
                ))
            })();
            match chain {
                Ok((k0, ku, k, kd)) => {
                    let tol = 1e-12 * (1.0 + kd.abs());
                    if !(k0 <= ku + tol && ku <= k + tol && k <= kd + tol) {
                        failures.push(format!("kappa chain {k0} {ku} {k} {kd}"));
                    }
                }
                Err(e) => failures.push(format!("kappa chain: {e}")),
            }
        }
        for _ in 0..1_000 {
            let n = rng.random_range(3..=7);
            let l = random_ladder(&mut rng, n);
            let w: Vec<f64> = (0..l.quad_count())
                .map(|_| rng.random_range(0.0..=1.0))
                .collect();
            let w2: Vec<f64> = w.iter().map(|&x| rng.random_range(x..=1.0)).collect();
            let lo = ladder_capacity(&l, Some(&MaskedWeights(w))).unwrap_or(f64::NAN);
            let hi = ladder_capacity(&l, Some(&MaskedWeights(w2))).unwrap_or(f64::NAN);
            let full = ladder_capacity(&l, None).unwrap_or(f64::NAN);
            if !(lo <= hi + 1e-12 && hi <= full + 1e-12) {
                failures.push(format!("mask monotonicity {lo} {hi} {full}"));
            }
        }
        for _ in 0..1_000 {
            let k = rng.random_range(1..30);
            let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=1.0)).collect();
            let r0: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=1.0)).collect();
            let u = rng.random_range(0.0..64.0);
            let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-15);
            if coerce(&p, &r0, 0.0).ok().as_deref() != Some(&p[..]) {
                failures.push("coerce is not the identity at u = 0".into());
            }
            if !coerce(&r0, &r0, u).is_ok_and(|c| same(&c, &r0)) {
                failures.push("r0 is not a fixed point of coerce".into());
            }
            let wild: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..3.0)).collect();
            let c = clamp(&wild);
            if clamp(&c) != c {
                failures.push("clamp is not idempotent".into());
            }
        }
        for f in registry() {
            let (k, l) = f.dimension();
            for _ in 0..20 {
                let p = CubePoint::new(
                    (0..k).map(|_| rng.random_range(0.0..=1.0)).collect(),
                    (0..l)
                        .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                        .collect(),
                );
                let (Ok(a), Ok(b)) = (decode(&f, &p), decode(&f, &p)) else {
                    continue;
                };
                if !bitwise_equal(&a, &b) {
                    failures.push(format!("{}: decode is not deterministic", f.name));
                }
                if let Some(d) = validate(&f, &a).first() {
                    failures.push(format!("{}: {}", f.name, d.message));
                }
                let back = ladder_json(&a, None).and_then(|s| parse_ladder_json(&s));
                if !back.is_ok_and(|b| bitwise_equal(&a, &b)) {
                    failures.push(format!("{}: ladder record does not round-trip", f.name));
                }
            }
        }
        let secs = t.elapsed().as_secs_f64();
        if secs >= 60.0 {
            failures.push(format!("took {secs:.1}s"));
        }
        failures.dedup();
        summarize(
            failures,
            "kappa chain, mask monotonicity, coerce, clamp, decode and validate all hold".into(),
        )
    })
}

/// Same kind, special index, signs and coordinate bits.
pub fn bitwise_equal(a: &Ladder, b: &Ladder) -> bool {
    let bits = |l: &Ladder| -> Vec<u64> {
        l.segments
            .iter()
            .flat_map(|s| s.first.into_iter().chain(s.second).map(f64::to_bits))
            .collect()
    };
    a.kind == b.kind
        && a.special_index == b.special_index
        && a.segments
            .iter()
            .map(|s| s.sign)
            .eq(b.segments.iter().map(|s| s.sign))
        && bits(a) == bits(b)
}

pub fn reproducibility_check() -> Check {
    Check::timed(10, "reproducibility", || {
        let run_once = || {
            let f = registry_entry("geo2")?;
            run(&f, &OptimizerConfig::evaluations(10, 10_000, 200_000))
        };
        match (run_once(), run_once()) {
            (Ok(a), Ok(b)) => {
                let same = a.trace_digest == b.trace_digest && a.to_json().ok() == b.to_json().ok();
                (
                    same,
                    format!("two geo2 runs share trace digest {}", &a.trace_digest[..16]),
                )
            }
            (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
        }
    })
}

/// One control search.
#[derive(Debug, Clone, Serialize)]
pub struct ControlRun {
    pub family: String,
    pub seed: u64,
    pub evaluations: u64,
    /// Pin the sign component holding the counterexample.
    pub signs: Option<Vec<i8>>,
}

impl ControlRun {
    pub fn new(family: &str, seed: u64, evaluations: u64, signs: Option<&[i8]>) -> Self {
        Self {
            family: family.into(),
            seed,
            evaluations,
            signs: signs.map(<[i8]>::to_vec),
        }
    }
}

/// Seeds and evaluation budgets for the search criteria.
#[derive(Debug, Clone, Serialize)]
pub struct SearchPlan {
    pub refresh: u64,
    pub demo: (u64, u64),
    pub controls: Vec<ControlRun>,
    pub positive_seed: u64,
    pub positive_evaluations: u64,
    /// Wall-clock cap per run; `None` keeps runs reproducible.
    pub seconds: Option<f64>,
}

impl Default for SearchPlan {
    fn default() -> Self {
        Self {
            refresh: DEFAULT_REFRESH_EVALS,
            demo: (1, 1_000_000),
            controls: vec![
                ControlRun::new("cross1X", 1, 100_000_000, Some(&[1, -1])),
                ControlRun::new("geo33", 1, 20_000_000, None),
                ControlRun::new("geo3X", 3, 100_000_000, Some(&[1, -1, 1])),
            ],
            positive_seed: 1,
            positive_evaluations: DEFAULT_TOTAL_EVALS,
            seconds: None,
        }
    }
}

impl SearchPlan {
    fn config(&self, seed: u64, evaluations: u64) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::evaluations(seed, self.refresh, evaluations);
        cfg.total.seconds = self.seconds;
        cfg
    }

    fn search(&self, name: &str, seed: u64, evaluations: u64) -> crate::Result<(f64, f64, f64)> {
        self.search_with(name, self.config(seed, evaluations))
    }

    fn search_with(&self, name: &str, cfg: OptimizerConfig) -> crate::Result<(f64, f64, f64)> {
        let t = Instant::now();
        let f = registry_entry(name)?;
        let rec = run(&f, &cfg)?;
        Ok((rec.best_value, f.threshold, t.elapsed().as_secs_f64()))
    }

    pub fn demo_check(&self) -> Check {
        Check::timed(5, "demo reproduction", || {
            let (seed, evals) = self.demo;
            match self.search("demo", seed, evals) {
                Ok((best, _, secs)) => {
                    let (lo, hi) = (SQRT3 - 0.02, SQRT3 - 0.015);
                    (
                        best > lo && best <= hi && secs < 300.0,
                        format!(
                            "best {best:.6} = √3 - {:.4}, seed {seed}, {evals} evaluations",
                            SQRT3 - best
                        ),
                    )
                }
                Err(e) => (false, e.to_string()),
            }
        })
    }

    pub fn controls_check(&self) -> Check {
        Check::timed(6, "controls falsify", || {
            let mut ok = true;
            let mut notes = Vec::new();
            for c in &self.controls {
                let name = &c.family;
                let role = registry_entry(name).map(|f| f.role);
                let mut cfg = self.config(c.seed, c.evaluations);
                if let Some(s) = &c.signs {
                    cfg.sign_policy = SignPolicy::Pinned(s.clone());
                }
                match self.search_with(name, cfg) {
                    Ok((best, thr, secs)) => {
                        ok &= role.is_ok_and(|r| r == FamilyRole::Control)
                            && best < thr
                            && secs <= 600.0;
                        notes.push(format!(
                            "{name} {best:.5} margin {:+.5} (seed {}, {secs:.0}s)",
                            best - thr,
                            c.seed
                        ));
                    }
                    Err(e) => {
                        ok = false;
                        notes.push(format!("{name}: {e}"));
                    }
                }
            }
            (ok, notes.join("; "))
        })
    }

    fn positives(&self, criterion: u8, name: &'static str, families: &[(&str, f64)]) -> Check {
        Check::timed(criterion, name, || {
            let mut ok = true;
            let mut notes = Vec::new();
            for &(family, extra) in families {
                match self.search(family, self.positive_seed, self.positive_evaluations) {
                    Ok((best, thr, _)) => {
                        ok &= best >= thr + extra;
                        notes.push(format!("{family} {best:.5} vs {:.5}", thr + extra));
                    }
                    Err(e) => {
                        ok = false;
                        notes.push(format!("{family}: {e}"));
                    }
                }
            }
            (ok, notes.join("; "))
        })
    }

    pub fn cross_check(&self) -> Check {
        self.positives(
            7,
            "positive cross calculations",
            &[
                ("cross1", 0.0),
                ("cross2", 0.05),
                ("cross3", 0.05),
                ("cross4", 0.05),
                ("cross5", 0.05),
            ],
        )
    }

    pub fn geo_check(&self) -> Check {
        self.positives(
            8,
            "positive geo calculations",
            &[
                ("geo1", 0.0),
                ("geo2", 0.0),
                ("geo3", 0.0),
                ("geo4", 0.0),
                ("geo5", 0.0),
            ],
        )
    }
}

/// Oracle equivalence and invariants.
pub fn kernel_suite() -> Vec<Check> {
    vec![
        capacity_oracle_check(),
        degenerate_quad_check(),
        crossing_check(),
        property_check(),
    ]
}

/// Registry decodes and run reproducibility.
pub fn families_suite() -> Vec<Check> {
    vec![reference_check(), reproducibility_check()]
}

/// Desk-scale reproductions of the reference calculations.
pub fn calculations_suite(plan: &SearchPlan) -> Vec<Check> {
    vec![
        plan.demo_check(),
        plan.controls_check(),
        plan.cross_check(),
        plan.geo_check(),
    ]
}

/// Every criterion, in order.
pub fn all_checks(plan: &SearchPlan) -> Vec<Check> {
    let mut all = kernel_suite();
    all.extend(families_suite());
    all.extend(calculations_suite(plan));
    all.sort_by_key(|c| c.criterion);
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn st_oracle_examples() {
        let p = |x, y| PlanarPoint::new(x, y);
        let (s, t) = st_oracle(
            PlanarSegment::new(p(-1.0, 0.0), p(1.0, 0.0)),
            PlanarSegment::new(p(0.0, -1.0), p(0.0, 3.0)),
        )
        .unwrap();
        assert!((s - 0.5).abs() < 1e-15 && (t - 0.25).abs() < 1e-15);
        assert!(st_oracle(
            PlanarSegment::new(p(0.0, 0.0), p(1.0, 0.0)),
            PlanarSegment::new(p(0.0, 1.0), p(1.0, 1.0)),
        )
        .is_none());
    }

    #[test]
    fn scan_matches_the_square_example() {
        let bottom = SignedSegment3::new([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0);
        let top = SignedSegment3::new([0.0, 1.0, 0.0], [1.0, 1.0, 0.0], 0);
        let q = Quadrilateral::new(bottom, top);
        assert!((offset_scan_capacity(&q, 1000) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_crossing_checks_pass() {
        let d = degenerate_quad_check();
        assert!(d.ok, "{}", d.detail);
        let c = crossing_check();
        assert!(c.ok, "{}", c.detail);
    }
}
