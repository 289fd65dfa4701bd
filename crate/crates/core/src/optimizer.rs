//! Seeded stochastic hill climbing over family cubes.
//!
//! A run is a sequence of restarts. Each restart draws a random cube point
//! and a sign vector, then takes clamped random steps, keeping a step only
//! when it strictly lowers the objective, until its refresh budget is spent.
//! Restart `i` owns the ChaCha8 stream `i` of the run seed, so restarts are
//! independent and can run on parallel workers without changing the result.
//!
//! Coercion is applied as a change of variables: the climber moves a raw
//! point `r` and the objective is evaluated at `coerce(r, r₀, u)`. Every
//! evaluated point therefore lies in the coerced sub-box around `r₀`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::family::{coerce_into, CubePoint, FamilySpec, Objective};
use crate::ladder::Ladder;

pub const RNG_ID: &str = "chacha8/stream-per-restart";
pub const RUN_FORMAT: &str = "mll-run/1";
pub const MAX_TRACE_POINTS: usize = 10_000;
pub const DEFAULT_STEP_MAX: f64 = 0.05;
pub const DEFAULT_REFRESH_EVALS: u64 = 20_000;
pub const DEFAULT_TOTAL_EVALS: u64 = 5_000_000;
pub const DEFAULT_TOTAL_SECONDS: f64 = 600.0;
/// Sign vectors are enumerated cyclically up to this many free segments.
pub const MAX_ENUMERATED_SIGNS: usize = 8;

/// Evaluation count and/or wall-clock limit; whichever is reached first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl Budget {
    pub const fn evaluations(n: u64) -> Self {
        Self {
            evaluations: Some(n),
            seconds: None,
        }
    }

    pub const fn seconds(s: f64) -> Self {
        Self {
            evaluations: None,
            seconds: Some(s),
        }
    }

    pub fn check(&self, what: &str) -> Result<()> {
        if self.evaluations.is_none() && self.seconds.is_none() {
            return Err(Error::InvalidConfig(format!(
                "{what} budget needs evaluations or seconds"
            )));
        }
        if self.evaluations == Some(0) {
            return Err(Error::InvalidConfig(format!(
                "{what} budget must be positive"
            )));
        }
        if let Some(s) = self.seconds {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{what} budget must be positive"
                )));
            }
        }
        Ok(())
    }

    fn duration(&self) -> Option<Duration> {
        self.seconds.map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "mode", content = "signs")]
pub enum SignPolicy {
    /// Fresh sign vector at every restart.
    Roam,
    Pinned(Vec<i8>),
}

/// How a hill step forms its candidate from `r`, a step size `s` and a
/// uniform random `r₁ ∈ [−1, 1]^K`, before clamping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StepRule {
    /// `r + s·r₁`: a step of size at most `s` in a random direction.
    #[default]
    Direction,
    /// `(1 − s)·r + s·r₁`: the convex combination taken literally.
    /// Its mean is `(1 − s)·r`, a drift toward the origin.
    Convex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizerConfig {
    pub seed: u64,
    pub step_max: f64,
    #[serde(default)]
    pub step_rule: StepRule,
    pub refresh: Budget,
    pub total: Budget,
    #[serde(default)]
    pub coercion: f64,
    pub sign_policy: SignPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heights_frozen: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_a: Option<f64>,
    /// Worker cap; results do not depend on it. Not part of the record.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            step_max: DEFAULT_STEP_MAX,
            step_rule: StepRule::Direction,
            refresh: Budget::evaluations(DEFAULT_REFRESH_EVALS),
            total: Budget {
                evaluations: Some(DEFAULT_TOTAL_EVALS),
                seconds: Some(DEFAULT_TOTAL_SECONDS),
            },
            coercion: 0.0,
            sign_policy: SignPolicy::Roam,
            heights_frozen: None,
            mask_a: None,
            threads: None,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Iteration-only budgets, so the run is reproducible.
    pub fn evaluations(seed: u64, refresh: u64, total: u64) -> Self {
        Self {
            seed,
            refresh: Budget::evaluations(refresh),
            total: Budget::evaluations(total),
            ..Self::default()
        }
    }

    pub fn check(&self, l: usize) -> Result<()> {
        if !(self.step_max > 0.0 && self.step_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stepMax must lie in (0, 1], got {}",
                self.step_max
            )));
        }
        if !(self.coercion >= 0.0 && self.coercion.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "coercion must be non-negative, got {}",
                self.coercion
            )));
        }
        self.refresh.check("refresh")?;
        self.total.check("total")?;
        if let SignPolicy::Pinned(s) = &self.sign_policy {
            if s.len() != l {
                return Err(Error::InvalidConfig(format!(
                    "pinned signs need {l} entries, got {}",
                    s.len()
                )));
            }
            if s.iter().any(|&v| v != 1 && v != -1) {
                return Err(Error::InvalidConfig("pinned signs must be +1 or -1".into()));
            }
        }
        if let Some(a) = self.mask_a {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidConfig(format!(
                    "mask scalar must lie in [0,1], got {a}"
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("thread cap must be positive".into()));
        }
        Ok(())
    }

    /// The family as searched: overrides applied.
    pub fn apply_to(&self, f: &FamilySpec) -> Result<FamilySpec> {
        let mut f = f.clone();
        if let Some(h) = self.heights_frozen {
            f.heights_frozen = h;
        }
        if let Some(a) = self.mask_a {
            match f.mask.as_mut() {
                Some(m) => m.a = a,
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "family {} has no mask",
                        f.name
                    )))
                }
            }
        }
        f.check()?;
        Ok(f)
    }
}

/// Componentwise nearest point of `[0, 1]`.
pub fn clamp(r: &[f64]) -> Vec<f64> {
    r.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Sign vector number `index` of `{−1, +1}^l`: bit `m` set means `−1`.
pub fn enumerated_signs(index: u64, l: usize) -> Vec<i8> {
    (0..l)
        .map(|m| if (index >> m) & 1 == 1 { -1 } else { 1 })
        .collect()
}

pub fn sign_key(signs: &[i8]) -> String {
    signs
        .iter()
        .map(|&s| if s < 0 { '-' } else { '+' })
        .collect()
}

/// Parameters a climber reads at every step; patchable between steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub step_max: f64,
    pub rule: StepRule,
    pub coercion: f64,
}

/// Outcome of one hill step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub candidate: Vec<f64>,
    pub value: f64,
    pub accepted: bool,
    pub decode_failed: bool,
}

/// One candidate-compare-accept step from raw point `current` with value
/// `value`. The candidate is evaluated at its coerced image when `u > 0`.
pub fn hill_step<R: Rng + ?Sized>(
    obj: &Objective,
    r0: Option<&[f64]>,
    current: &[f64],
    signs: &[i8],
    value: f64,
    rng: &mut R,
    params: StepParams,
) -> Step {
    let s = params.step_max * (1.0 - rng.random::<f64>());
    let keep = match params.rule {
        StepRule::Direction => 1.0,
        StepRule::Convex => 1.0 - s,
    };
    let candidate: Vec<f64> = current
        .iter()
        .map(|&r| (keep * r + s * rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0))
        .collect();
    let eval = evaluate_raw(obj, r0, &candidate, signs, params.coercion);
    let accepted = eval.0 < value;
    Step {
        candidate,
        value: eval.0,
        accepted,
        decode_failed: eval.1,
    }
}

/// Evaluate a raw point; returns `(value, decode_failed)`.
fn evaluate_raw(
    obj: &Objective,
    r0: Option<&[f64]>,
    raw: &[f64],
    signs: &[i8],
    u: f64,
) -> (f64, bool) {
    let point = evaluated_point(r0, raw, u);
    let p = CubePoint {
        r: point,
        signs: signs.to_vec(),
    };
    let e = obj.evaluate(&p);
    (e.value, e.decode_failed)
}

/// The point the objective sees for raw point `raw`.
pub fn evaluated_point(r0: Option<&[f64]>, raw: &[f64], u: f64) -> Vec<f64> {
    let mut p = raw.to_vec();
    if let (Some(r0), true) = (r0, u > 0.0) {
        coerce_into(&mut p, r0, u);
    }
    p
}

/// State of one restart, stepped one evaluation at a time.
#[derive(Debug, Clone)]
pub struct Climber {
    rng: ChaCha8Rng,
    pub restart: u64,
    pub signs: Vec<i8>,
    pub raw: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
    pub decode_failures: u64,
}

impl Climber {
    /// Draw the initial point and signs of restart `restart`; costs one
    /// evaluation.
    pub fn start(
        obj: &Objective,
        r0: Option<&[f64]>,
        seed: u64,
        restart: u64,
        policy: &SignPolicy,
        u: f64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let layout = obj.layout();
        let l = layout.l();
        let signs = match policy {
            SignPolicy::Pinned(s) => s.clone(),
            SignPolicy::Roam if l <= MAX_ENUMERATED_SIGNS => {
                enumerated_signs(restart % (1u64 << l), l)
            }
            SignPolicy::Roam => (0..l)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect(),
        };
        let raw: Vec<f64> = (0..layout.k()).map(|_| rng.random::<f64>()).collect();
        let (value, failed) = evaluate_raw(obj, r0, &raw, &signs, u);
        Self {
            rng,
            restart,
            signs,
            raw,
            value,
            evaluations: 1,
            decode_failures: u64::from(failed),
        }
    }

    pub fn step(&mut self, obj: &Objective, r0: Option<&[f64]>, params: StepParams) -> Step {
        let step = hill_step(
            obj,
            r0,
            &self.raw,
            &self.signs,
            self.value,
            &mut self.rng,
            params,
        );
        self.evaluations += 1;
        if step.decode_failed {
            self.decode_failures += 1;
        }
        if step.accepted {
            self.raw.clone_from(&step.candidate);
            self.value = step.value;
        }
        step
    }
}

/// Best point of one restart plus its local improvement trace.
#[derive(Debug, Clone)]
struct RestartOutcome {
    restart: u64,
    signs: Vec<i8>,
    best_value: f64,
    best_raw: Vec<f64>,
    evaluations: u64,
    decode_failures: u64,
    /// `(local evaluation index, value)` at each improvement.
    trace: Vec<(u64, f64)>,
}

fn run_restart(
    obj: &Objective,
    r0: Option<&[f64]>,
    cfg: &OptimizerConfig,
    restart: u64,
    max_evals: Option<u64>,
    run_deadline: Option<Instant>,
    pool: Option<&AtomicU64>,
) -> Option<RestartOutcome> {
    let now = Instant::now();
    if run_deadline.is_some_and(|d| now >= d) {
        return None;
    }
    let refresh_deadline = cfg.refresh.duration().map(|d| now + d);
    let deadline = match (refresh_deadline, run_deadline) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    if let Some(p) = pool {
        if !claim(p, 1) {
            return None;
        }
    }
    let params = StepParams {
        step_max: cfg.step_max,
        rule: cfg.step_rule,
        coercion: cfg.coercion,
    };
    let mut c = Climber::start(obj, r0, cfg.seed, restart, &cfg.sign_policy, cfg.coercion);
    let mut trace = vec![(0, c.value)];
    loop {
        if max_evals.is_some_and(|m| c.evaluations >= m) {
            break;
        }
        if c.evaluations.is_multiple_of(256) && deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        if let Some(p) = pool {
            if c.evaluations.is_multiple_of(1024) && !claim(p, 1024) {
                break;
            }
        }
        let step = c.step(obj, r0, params);
        if step.accepted {
            trace.push((c.evaluations - 1, c.value));
        }
    }
    Some(RestartOutcome {
        restart,
        signs: c.signs,
        best_value: c.value,
        best_raw: c.raw,
        evaluations: c.evaluations,
        decode_failures: c.decode_failures,
        trace,
    })
}

/// Take `n` evaluations from a shared pool; false once it is empty.
fn claim(pool: &AtomicU64, n: u64) -> bool {
    pool.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |left| {
        (left > 0).then(|| left.saturating_sub(n))
    })
    .is_ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TracePoint {
    pub evaluation: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub format: String,
    pub layout: String,
    pub rng: String,
    pub family: String,
    pub family_spec: FamilySpec,
    pub config: OptimizerConfig,
    pub best_value: f64,
    /// The evaluated (coerced) point.
    pub best_point: CubePoint,
    pub best_ladder: Option<Ladder>,
    pub best_restart: u64,
    pub restart_count: u64,
    pub evaluations: u64,
    pub decode_failures: u64,
    pub trace: Vec<TracePoint>,
    /// Number of improvements before downsampling.
    pub trace_len: usize,
    /// SHA-256 of the full trace.
    pub trace_digest: String,
    pub per_sign_best: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(format!("run record: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunRecord =
            serde_json::from_str(text).map_err(|e| invalid(format!("run record: {e}")))?;
        if r.format != RUN_FORMAT {
            return Err(invalid(format!(
                "unsupported run record format `{}`",
                r.format
            )));
        }
        Ok(r)
    }
}

pub fn trace_digest(trace: &[(u64, f64)]) -> String {
    let mut h = Sha256::new();
    for (i, v) in trace {
        h.update(i.to_le_bytes());
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Keep at most `max` points, always including the first and last.
pub fn downsample(trace: &[(u64, f64)], max: usize) -> Vec<(u64, f64)> {
    if trace.len() <= max || max < 2 {
        return trace.iter().take(max).copied().collect();
    }
    let last = trace.len() - 1;
    (0..max).map(|i| trace[i * last / (max - 1)]).collect()
}

fn map_restarts<F>(
    indices: Vec<(u64, Option<u64>)>,
    threads: Option<usize>,
    f: F,
) -> Vec<Option<RestartOutcome>>
where
    F: Fn(u64, Option<u64>) -> Option<RestartOutcome> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if threads != Some(1) {
            let work = || indices.par_iter().map(|&(i, m)| f(i, m)).collect();
            return match threads {
                Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(work),
                    Err(_) => work(),
                },
                None => work(),
            };
        }
    }
    let _ = threads;
    indices.into_iter().map(|(i, m)| f(i, m)).collect()
}

fn workers(threads: Option<usize>) -> usize {
    #[cfg(feature = "parallel")]
    {
        threads.unwrap_or_else(rayon::current_num_threads).max(1)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        1
    }
}

/// Run the search. With evaluation-only budgets the record depends only on
/// the family and config, not on the number of workers.
pub fn run(f: &FamilySpec, cfg: &OptimizerConfig) -> Result<RunRecord> {
    let spec = cfg.apply_to(f)?;
    let obj = Objective::new(spec.clone())?;
    cfg.check(obj.layout().l())?;
    let r0_vec = spec.reference.as_ref().map(|p| p.r.clone());
    if cfg.coercion > 0.0 && r0_vec.is_none() {
        return Err(Error::InvalidConfig(format!(
            "family {} has no reference point to coerce toward",
            spec.name
        )));
    }
    let r0 = r0_vec.as_deref();
    let start = Instant::now();
    let run_deadline = cfg.total.duration().map(|d| start + d);

    let mut outcomes: Vec<RestartOutcome> = Vec::new();
    match (cfg.refresh.evaluations, cfg.total.evaluations) {
        (Some(per), Some(total)) => {
            // fixed schedule: restart i gets min(per, what is left)
            let count = total.div_ceil(per);
            let plan: Vec<(u64, Option<u64>)> = (0..count)
                .map(|i| (i, Some(per.min(total - i * per))))
                .collect();
            let done = map_restarts(plan, cfg.threads, |i, m| {
                run_restart(&obj, r0, cfg, i, m, run_deadline, None)
            });
            outcomes.extend(done.into_iter().flatten());
        }
        (per, total) => {
            let pool = total.map(AtomicU64::new);
            let batch = workers(cfg.threads) as u64;
            let mut next = 0u64;
            loop {
                if run_deadline.is_some_and(|d| Instant::now() >= d) {
                    break;
                }
                if pool
                    .as_ref()
                    .is_some_and(|p| p.load(Ordering::Relaxed) == 0)
                {
                    break;
                }
                let plan: Vec<(u64, Option<u64>)> =
                    (next..next + batch).map(|i| (i, per)).collect();
                next += batch;
                let done = map_restarts(plan, cfg.threads, |i, m| {
                    run_restart(&obj, r0, cfg, i, m, run_deadline, pool.as_ref())
                });
                let before = outcomes.len();
                outcomes.extend(done.into_iter().flatten());
                if outcomes.len() == before {
                    break;
                }
            }
        }
    }
    assemble(&spec, cfg, &obj, r0, outcomes)
}

fn assemble(
    spec: &FamilySpec,
    cfg: &OptimizerConfig,
    obj: &Objective,
    r0: Option<&[f64]>,
    outcomes: Vec<RestartOutcome>,
) -> Result<RunRecord> {
    if outcomes.is_empty() {
        return Err(Error::InvalidConfig(
            "budget too small for a single restart".into(),
        ));
    }
    let mut trace: Vec<(u64, f64)> = Vec::new();
    let mut offset = 0u64;
    let mut best: Option<&RestartOutcome> = None;
    let mut per_sign_best: BTreeMap<String, f64> = BTreeMap::new();
    let mut decode_failures = 0;
    for o in &outcomes {
        let cur = trace.last().map_or(f64::INFINITY, |t| t.1);
        let mut running = cur;
        for &(i, v) in &o.trace {
            if v < running {
                trace.push((offset + i, v));
                running = v;
            }
        }
        if best.is_none_or(|b| o.best_value < b.best_value) {
            best = Some(o);
        }
        let e = per_sign_best
            .entry(sign_key(&o.signs))
            .or_insert(f64::INFINITY);
        *e = e.min(o.best_value);
        offset += o.evaluations;
        decode_failures += o.decode_failures;
    }
    let best = best.expect("non-empty");
    let point = CubePoint::new(
        evaluated_point(r0, &best.best_raw, cfg.coercion),
        best.signs.clone(),
    );
    let best_ladder = obj.decode(&point).ok();
    Ok(RunRecord {
        format: RUN_FORMAT.into(),
        layout: crate::family::LAYOUT_VERSION.into(),
        rng: RNG_ID.into(),
        family: spec.name.clone(),
        family_spec: spec.clone(),
        config: cfg.clone(),
        best_value: best.best_value,
        best_point: point,
        best_ladder,
        best_restart: best.restart,
        restart_count: outcomes.len() as u64,
        evaluations: offset,
        decode_failures,
        trace_len: trace.len(),
        trace_digest: trace_digest(&trace),
        trace: downsample(&trace, MAX_TRACE_POINTS)
            .into_iter()
            .map(|(evaluation, value)| TracePoint { evaluation, value })
            .collect(),
        per_sign_best,
    })
}

/// Minimum of the objective over a coarse grid, `points_per_axis ∈ {1,2,3}`,
/// and over all sign vectors (or a seeded sample of them). Falls back to
/// stratified sampling when the grid exceeds `max_points`.
pub fn grid_probe(
    f: &FamilySpec,
    points_per_axis: usize,
    max_points: u64,
    seed: u64,
) -> Result<f64> {
    if !(1..=3).contains(&points_per_axis) {
        return Err(invalid(format!(
            "points per axis must be 1, 2 or 3, got {points_per_axis}"
        )));
    }
    let obj = Objective::new(f.clone())?;
    let (k, l) = (obj.layout().k(), obj.layout().l());
    let sign_sets: Vec<Vec<i8>> = if l <= MAX_ENUMERATED_SIGNS {
        (0..1u64 << l).map(|i| enumerated_signs(i, l)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..256)
            .map(|_| {
                (0..l)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect()
            })
            .collect()
    };
    let axis: Vec<f64> = match points_per_axis {
        1 => vec![0.5],
        2 => vec![0.0, 1.0],
        _ => vec![0.0, 0.5, 1.0],
    };
    let n = points_per_axis as u64;
    let grid_size = n.checked_pow(k as u32);
    let mut best = f64::INFINITY;
    let mut eval = |r: Vec<f64>| {
        for s in &sign_sets {
            let v = obj.evaluate(&CubePoint::new(r.clone(), s.clone())).value;
            best = best.min(v);
        }
    };
    match grid_size {
        Some(g) if g.saturating_mul(sign_sets.len() as u64) <= max_points => {
            for mut idx in 0..g {
                let mut r = Vec::with_capacity(k);
                for _ in 0..k {
                    r.push(axis[(idx % n) as usize]);
                    idx /= n;
                }
                eval(r);
            }
        }
        _ => {
            // one point per stratum of a Latin hypercube per sign vector
            let samples = (max_points / sign_sets.len() as u64).max(1) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perms: Vec<Vec<usize>> = Vec::with_capacity(k);
            for _ in 0..k {
                let mut p: Vec<usize> = (0..samples).collect();
                for i in (1..samples).rev() {
                    p.swap(i, rng.random_range(0..=i));
                }
                perms.push(p);
            }
            for i in 0..samples {
                let r = perms
                    .iter()
                    .map(|p| (p[i] as f64 + rng.random::<f64>()) / samples as f64)
                    .collect();
                eval(r);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::registry_entry;

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(&[1.2, -0.3, 0.5]), vec![1.0, 0.0, 0.5]);
        let c = clamp(&[1.2, -0.3, 0.5]);
        assert_eq!(clamp(&c), c);
    }

    #[test]
    fn sign_enumeration() {
        assert_eq!(enumerated_signs(0, 3), vec![1, 1, 1]);
        assert_eq!(enumerated_signs(5, 3), vec![-1, 1, -1]);
        assert_eq!(sign_key(&[1, -1, 1]), "+-+");
    }

    #[test]
    fn downsample_keeps_ends() {
        let t: Vec<(u64, f64)> = (0..100).map(|i| (i, -(i as f64))).collect();
        let d = downsample(&t, 10);
        assert_eq!(d.len(), 10);
        assert_eq!(d[0], t[0]);
        assert_eq!(d[9], t[99]);
        assert_eq!(downsample(&t[..5], 10).len(), 5);
    }

    #[test]
    fn rejected_step_leaves_state() {
        let f = registry_entry("demo").unwrap();
        let obj = Objective::new(f).unwrap();
        let mut c = Climber::start(&obj, None, 1, 0, &SignPolicy::Roam, 0.0);
        // impossible to beat -inf
        c.value = f64::NEG_INFINITY;
        let raw = c.raw.clone();
        let s = c.step(
            &obj,
            None,
            StepParams {
                step_max: 0.05,
                rule: StepRule::Direction,
                coercion: 0.0,
            },
        );
        assert!(!s.accepted);
        assert_eq!(c.raw, raw);
        assert!(s.candidate.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn one_restart_when_budgets_match() {
        let f = registry_entry("demo").unwrap();
        let cfg = OptimizerConfig::evaluations(3, 500, 500);
        let rec = run(&f, &cfg).unwrap();
        assert_eq!(rec.restart_count, 1);
        assert_eq!(rec.evaluations, 500);
    }

    #[test]
    fn config_checks() {
        let bad = [
            OptimizerConfig {
                step_max: 0.0,
                ..OptimizerConfig::default()
            },
            OptimizerConfig {
                sign_policy: SignPolicy::Pinned(vec![1]),
                ..OptimizerConfig::default()
            },
            OptimizerConfig {
                total: Budget {
                    evaluations: None,
                    seconds: None,
                },
                ..OptimizerConfig::default()
            },
        ];
        for c in bad {
            assert!(c.check(2).is_err());
        }
    }
}
