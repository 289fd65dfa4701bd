//! One live search: a worker thread steps a climber, applies patches between
//! steps and publishes an ordered event feed.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use mll_core::export::{realization_stack, Provenance};
use mll_core::family::{CubePoint, FamilySpec, Objective};
use mll_core::geom::PlanarPoint;
use mll_core::ladder::Ladder;
use mll_core::optimizer::{
    evaluated_point, Budget, Climber, OptimizerConfig, SignPolicy, StepParams, StepRule,
    TracePoint, DEFAULT_REFRESH_EVALS, DEFAULT_STEP_MAX, MAX_TRACE_POINTS, RNG_ID,
};
use serde::{Deserialize, Deserializer, Serialize};
use tokio::sync::broadcast;

use crate::error::{ApiError, ApiResult};

pub const SESSION_FORMAT: &str = "mll-session/1";
/// Minimum spacing of best-value events (20/s).
pub const BEST_INTERVAL: Duration = Duration::from_millis(50);
/// Minimum spacing of ladder snapshots (2/s).
pub const SNAPSHOT_INTERVAL: Duration = Duration::from_millis(500);
/// Minimum spacing of restart notices.
pub const RESTART_INTERVAL: Duration = Duration::from_millis(200);
const EVENT_BUFFER: usize = 4096;
/// Evaluations between checks of the clock and the stop flag.
const POLL_EVERY: u64 = 64;
const PAUSE_POLL: Duration = Duration::from_millis(5);

/// The patchable part of a session's configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LiveConfig {
    pub step_max: f64,
    pub refresh_evals: u64,
    pub coercion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_a: Option<f64>,
    /// Pinned sign vector; `None` lets restarts roam.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
    pub paused: bool,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            step_max: DEFAULT_STEP_MAX,
            refresh_evals: DEFAULT_REFRESH_EVALS,
            coercion: 0.0,
            mask_a: None,
            signs: None,
            paused: false,
        }
    }
}

fn present<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

/// Partial update; absent fields are left alone and `"signs": null` unpins.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Patch {
    pub step_max: Option<f64>,
    pub refresh_evals: Option<u64>,
    pub coercion: Option<f64>,
    pub mask_a: Option<f64>,
    #[serde(default, deserialize_with = "present")]
    pub signs: Option<Option<Vec<i8>>>,
    pub paused: Option<bool>,
}

impl Patch {
    fn apply(&self, c: &LiveConfig) -> LiveConfig {
        let mut c = c.clone();
        if let Some(v) = self.step_max {
            c.step_max = v;
        }
        if let Some(v) = self.refresh_evals {
            c.refresh_evals = v;
        }
        if let Some(v) = self.coercion {
            c.coercion = v;
        }
        if let Some(v) = self.mask_a {
            c.mask_a = Some(v);
        }
        if let Some(v) = &self.signs {
            c.signs.clone_from(v);
        }
        if let Some(v) = self.paused {
            c.paused = v;
        }
        c
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateRequest {
    /// Registered family name; or give `familySpec` inline.
    pub family: Option<String>,
    pub family_spec: Option<FamilySpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub patch: CreatePatch,
    pub budget_evals: Option<u64>,
    pub budget_seconds: Option<f64>,
    pub freeze_heights: Option<bool>,
}

/// Initial values of the live fields.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreatePatch {
    pub step_max: Option<f64>,
    pub refresh_evals: Option<u64>,
    pub coercion: Option<f64>,
    pub mask_a: Option<f64>,
    pub signs: Option<Vec<i8>>,
    pub paused: Option<bool>,
}

impl From<CreatePatch> for Patch {
    fn from(p: CreatePatch) -> Self {
        Self {
            step_max: p.step_max,
            refresh_evals: p.refresh_evals,
            coercion: p.coercion,
            mask_a: p.mask_a,
            signs: p.signs.map(Some),
            paused: p.paused,
        }
    }
}

/// Acknowledgment of a create or patch: the configuration now in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ack {
    pub version: u64,
    pub config: LiveConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum EventKind {
    /// A new session-wide best value.
    Best {
        evaluation: u64,
        restart: u64,
        value: f64,
    },
    /// The current best ladder and its stacked minimal realization.
    Snapshot {
        evaluation: u64,
        restart: u64,
        value: f64,
        point: CubePoint,
        ladder: Ladder,
        realization: Vec<[PlanarPoint; 4]>,
    },
    Restart {
        evaluation: u64,
        restart: u64,
        signs: Vec<i8>,
    },
    /// A patch took effect before evaluation `evaluation`.
    Config {
        evaluation: u64,
        version: u64,
        config: LiveConfig,
        /// The objective changed, so earlier best values no longer compare.
        best_reset: bool,
    },
    Finished {
        evaluation: u64,
        best_value: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Best point as last published in a snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Best {
    pub value: f64,
    pub evaluation: u64,
    pub restart: u64,
    pub point: CubePoint,
    pub ladder: Ladder,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Status {
    pub id: String,
    pub family: String,
    pub version: u64,
    pub config: LiveConfig,
    pub evaluations: u64,
    pub restarts: u64,
    pub best_value: Option<f64>,
    pub finished: bool,
}

/// Persisted state of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionRecord {
    pub format: String,
    pub provenance: Provenance,
    pub id: String,
    pub family_spec: FamilySpec,
    pub seed: u64,
    pub version: u64,
    pub config: LiveConfig,
    pub evaluations: u64,
    pub restarts: u64,
    pub decode_failures: u64,
    pub best: Option<Best>,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Default)]
struct State {
    evaluations: u64,
    restarts: u64,
    decode_failures: u64,
    best: Option<Best>,
    trace: Vec<TracePoint>,
    finished: bool,
    last_config: Option<Arc<Event>>,
    last_snapshot: Option<Arc<Event>>,
    last_finished: Option<Arc<Event>>,
}

#[derive(Debug)]
struct Control {
    version: u64,
    config: LiveConfig,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub family: FamilySpec,
    pub seed: u64,
    budget: Budget,
    heights_frozen: Option<bool>,
    runs_dir: Option<PathBuf>,
    control: Mutex<Control>,
    /// Mirrors `control.version` so the worker can poll without locking.
    version: AtomicU64,
    stop: AtomicBool,
    state: Mutex<State>,
    tx: broadcast::Sender<Arc<Event>>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panicked worker leaves consistent data behind: every update is a plain store
    m.lock().unwrap_or_else(std::sync::PoisonError::into_inner)
}

impl Session {
    /// Validate the request and start the worker.
    pub fn start(
        id: String,
        family: FamilySpec,
        req: CreateRequest,
        runs_dir: Option<PathBuf>,
    ) -> ApiResult<Arc<Self>> {
        let config = Patch::from(req.patch).apply(&LiveConfig::default());
        let budget = Budget {
            evaluations: req.budget_evals,
            seconds: req.budget_seconds,
        };
        if budget.evaluations.is_some() || budget.seconds.is_some() {
            budget.check("session")?;
        }
        let (tx, _) = broadcast::channel(EVENT_BUFFER);
        let s = Arc::new(Self {
            id,
            family,
            seed: req.seed,
            budget,
            heights_frozen: req.freeze_heights,
            runs_dir,
            control: Mutex::new(Control { version: 1, config }),
            version: AtomicU64::new(1),
            stop: AtomicBool::new(false),
            state: Mutex::new(State::default()),
            tx,
            worker: Mutex::new(None),
        });
        let worker = Worker::new(Arc::clone(&s))?;
        let handle = std::thread::Builder::new()
            .name(format!("session-{}", s.id))
            .spawn(move || worker.run())?;
        *lock(&s.worker) = Some(handle);
        Ok(s)
    }

    /// Optimizer settings equivalent to `c`, for validation and objective setup.
    fn optimizer_config(&self, c: &LiveConfig) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::with_seed(self.seed);
        cfg.step_max = c.step_max;
        cfg.refresh = Budget::evaluations(c.refresh_evals);
        cfg.total = Budget::evaluations(u64::MAX);
        cfg.coercion = c.coercion;
        cfg.mask_a = c.mask_a;
        cfg.heights_frozen = self.heights_frozen;
        cfg.sign_policy = c.signs.clone().map_or(SignPolicy::Roam, SignPolicy::Pinned);
        cfg
    }

    /// The family as searched under `c`, after checking `c` against it.
    fn searched_family(&self, c: &LiveConfig) -> ApiResult<FamilySpec> {
        let cfg = self.optimizer_config(c);
        let spec = cfg.apply_to(&self.family)?;
        cfg.check(spec.dimension().1)?;
        if c.coercion > 0.0 && spec.reference.is_none() {
            return Err(ApiError::BadRequest(format!(
                "family {} has no reference point to coerce toward",
                spec.name
            )));
        }
        Ok(spec)
    }

    pub fn ack(&self) -> Ack {
        let c = lock(&self.control);
        Ack {
            version: c.version,
            config: c.config.clone(),
        }
    }

    /// Apply a patch; the worker picks it up before its next evaluation.
    pub fn patch(&self, p: &Patch) -> ApiResult<Ack> {
        let mut c = lock(&self.control);
        let next = p.apply(&c.config);
        self.searched_family(&next)?;
        c.version += 1;
        c.config = next;
        self.version.store(c.version, Ordering::Release);
        Ok(Ack {
            version: c.version,
            config: c.config.clone(),
        })
    }

    pub fn status(&self) -> Status {
        let ack = self.ack();
        let st = lock(&self.state);
        Status {
            id: self.id.clone(),
            family: self.family.name.clone(),
            version: ack.version,
            config: ack.config,
            evaluations: st.evaluations,
            restarts: st.restarts,
            best_value: st.best.as_ref().map(|b| b.value),
            finished: st.finished,
        }
    }

    pub fn best(&self) -> Option<Best> {
        lock(&self.state).best.clone()
    }

    pub fn record(&self) -> SessionRecord {
        let ack = self.ack();
        let st = lock(&self.state);
        SessionRecord {
            format: SESSION_FORMAT.into(),
            provenance: Provenance::new(Some(self.seed), Some(RNG_ID)),
            id: self.id.clone(),
            family_spec: self.family.clone(),
            seed: self.seed,
            version: ack.version,
            config: ack.config,
            evaluations: st.evaluations,
            restarts: st.restarts,
            decode_failures: st.decode_failures,
            best: st.best.clone(),
            trace: st.trace.clone(),
        }
    }

    /// Receiver for new events plus the retained ones a late subscriber
    /// needs: the config in force, the latest snapshot and the end marker.
    pub fn subscribe(&self) -> (broadcast::Receiver<Arc<Event>>, Vec<Arc<Event>>) {
        let rx = self.tx.subscribe();
        let st = lock(&self.state);
        let mut replay: Vec<Arc<Event>> = [&st.last_config, &st.last_snapshot, &st.last_finished]
            .into_iter()
            .flatten()
            .cloned()
            .collect();
        replay.sort_by_key(|e| e.seq);
        (rx, replay)
    }

    pub fn is_finished(&self) -> bool {
        lock(&self.state).finished
    }

    /// Stop the worker and wait for it to persist its record.
    pub fn stop(&self) {
        self.stop.store(true, Ordering::Release);
        let handle = lock(&self.worker).take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }

    fn persist(&self) -> std::io::Result<()> {
        let Some(dir) = &self.runs_dir else {
            return Ok(());
        };
        let text = serde_json::to_string_pretty(&self.record()).map_err(std::io::Error::other)?;
        write_atomic(
            &dir.join(format!("session-{}.json", self.id)),
            text.as_bytes(),
        )
    }
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Unpublished best point of the worker.
struct Candidate {
    value: f64,
    evaluation: u64,
    restart: u64,
    point: CubePoint,
}

struct Worker {
    s: Arc<Session>,
    seq: u64,
    obj: Objective,
    r0: Option<Vec<f64>>,
    live: LiveConfig,
    version: u64,
    climber: Climber,
    restart: u64,
    evaluations: u64,
    decode_failures: u64,
    best: Option<Candidate>,
    trace: Vec<(u64, f64)>,
    best_pending: bool,
    snapshot_pending: bool,
    restart_pending: bool,
    last_best: Option<Instant>,
    last_snapshot: Option<Instant>,
    last_restart: Option<Instant>,
    active: Duration,
}

impl Worker {
    fn new(s: Arc<Session>) -> ApiResult<Self> {
        let Ack { version, config } = s.ack();
        let spec = s.searched_family(&config)?;
        let r0 = spec.reference.as_ref().map(|p| p.r.clone());
        let obj = Objective::new(spec)?;
        let policy = config
            .signs
            .clone()
            .map_or(SignPolicy::Roam, SignPolicy::Pinned);
        let climber = Climber::start(&obj, r0.as_deref(), s.seed, 0, &policy, config.coercion);
        let mut w = Self {
            s,
            seq: 0,
            obj,
            r0,
            live: config,
            version,
            climber,
            restart: 0,
            evaluations: 0,
            decode_failures: 0,
            best: None,
            trace: Vec::new(),
            best_pending: false,
            snapshot_pending: false,
            restart_pending: false,
            last_best: None,
            last_snapshot: None,
            last_restart: None,
            active: Duration::ZERO,
        };
        w.emit_config(false);
        w.count_start();
        Ok(w)
    }

    fn params(&self) -> StepParams {
        StepParams {
            step_max: self.live.step_max,
            rule: StepRule::Direction,
            coercion: self.live.coercion,
        }
    }

    fn emit(&mut self, kind: EventKind) -> Arc<Event> {
        self.seq += 1;
        let e = Arc::new(Event {
            seq: self.seq,
            kind,
        });
        // no subscribers is fine: late ones get the retained events
        let _ = self.s.tx.send(Arc::clone(&e));
        e
    }

    fn emit_config(&mut self, best_reset: bool) {
        let e = self.emit(EventKind::Config {
            evaluation: self.evaluations,
            version: self.version,
            config: self.live.clone(),
            best_reset,
        });
        lock(&self.s.state).last_config = Some(e);
    }

    /// Account for the evaluation spent by `Climber::start`.
    fn count_start(&mut self) {
        self.evaluations += 1;
        if self.climber.decode_failures > 0 {
            self.decode_failures += 1;
        }
        self.consider(self.climber.value);
        self.restart_pending = true;
    }

    fn consider(&mut self, value: f64) {
        if value.is_finite() && self.best.as_ref().is_none_or(|b| value < b.value) {
            let point = CubePoint::new(
                evaluated_point(self.r0.as_deref(), &self.climber.raw, self.live.coercion),
                self.climber.signs.clone(),
            );
            let evaluation = self.evaluations - 1;
            self.best = Some(Candidate {
                value,
                evaluation,
                restart: self.restart,
                point,
            });
            self.trace.push((evaluation, value));
            self.best_pending = true;
            self.snapshot_pending = true;
        }
    }

    fn policy(&self) -> SignPolicy {
        self.live
            .signs
            .clone()
            .map_or(SignPolicy::Roam, SignPolicy::Pinned)
    }

    fn next_restart(&mut self) {
        self.restart += 1;
        self.climber = Climber::start(
            &self.obj,
            self.r0.as_deref(),
            self.s.seed,
            self.restart,
            &self.policy(),
            self.live.coercion,
        );
        self.count_start();
    }

    /// Adopt the latest acknowledged config.
    fn sync(&mut self) {
        let Ack { version, config } = self.s.ack();
        let remask = config.mask_a != self.live.mask_a;
        let recoerce = config.coercion != self.live.coercion;
        let resign = config.signs != self.live.signs;
        self.live = config;
        self.version = version;
        if remask {
            // validated at patch time, so the rebuild cannot fail
            if let Ok(obj) = self
                .s
                .searched_family(&self.live)
                .and_then(|f| Ok(Objective::new(f)?))
            {
                self.obj = obj;
            }
            self.best = None;
            self.best_pending = false;
            self.snapshot_pending = false;
            lock(&self.s.state).best = None;
        }
        self.emit_config(remask);
        if resign {
            self.next_restart();
        } else if remask || recoerce {
            let p = CubePoint::new(
                evaluated_point(self.r0.as_deref(), &self.climber.raw, self.live.coercion),
                self.climber.signs.clone(),
            );
            self.climber.value = self.obj.evaluate(&p).value;
            self.evaluations += 1;
            self.consider(self.climber.value);
        }
    }

    fn exhausted(&self) -> bool {
        self.s
            .budget
            .evaluations
            .is_some_and(|n| self.evaluations >= n)
            || self
                .s
                .budget
                .seconds
                .is_some_and(|t| self.active.as_secs_f64() >= t)
    }

    /// Publish whatever the throttles allow.
    fn flush(&mut self, force: bool) {
        let now = Instant::now();
        let due =
            |last: Option<Instant>, gap: Duration| force || last.is_none_or(|t| now - t >= gap);
        if self.best_pending && due(self.last_best, BEST_INTERVAL) {
            if let Some(b) = &self.best {
                let kind = EventKind::Best {
                    evaluation: b.evaluation,
                    restart: b.restart,
                    value: b.value,
                };
                self.emit(kind);
            }
            self.best_pending = false;
            self.last_best = Some(now);
        }
        if self.snapshot_pending && due(self.last_snapshot, SNAPSHOT_INTERVAL) {
            self.snapshot();
            self.snapshot_pending = false;
            self.last_snapshot = Some(now);
        }
        if self.restart_pending && due(self.last_restart, RESTART_INTERVAL) {
            self.emit(EventKind::Restart {
                evaluation: self.evaluations,
                restart: self.restart,
                signs: self.climber.signs.clone(),
            });
            self.restart_pending = false;
            self.last_restart = Some(now);
        }
        let mut st = lock(&self.s.state);
        st.evaluations = self.evaluations;
        st.restarts = self.restart + 1;
        st.decode_failures = self.decode_failures;
    }

    fn snapshot(&mut self) {
        let Some(b) = &self.best else { return };
        let Ok(ladder) = self.obj.decode(&b.point) else {
            return;
        };
        let realization = realization_stack(&ladder).unwrap_or_default();
        let best = Best {
            value: b.value,
            evaluation: b.evaluation,
            restart: b.restart,
            point: b.point.clone(),
            ladder: ladder.clone(),
        };
        let kind = EventKind::Snapshot {
            evaluation: b.evaluation,
            restart: b.restart,
            value: b.value,
            point: b.point.clone(),
            ladder,
            realization,
        };
        let e = self.emit(kind);
        let trace = downsampled(&self.trace);
        let mut st = lock(&self.s.state);
        st.best = Some(best);
        st.trace = trace;
        st.last_snapshot = Some(e);
    }

    fn run(mut self) {
        let mut tick = Instant::now();
        loop {
            if self.s.stop.load(Ordering::Acquire) {
                break;
            }
            if self.s.version.load(Ordering::Acquire) != self.version {
                self.sync();
            }
            let now = Instant::now();
            if self.live.paused {
                tick = now;
                self.flush(false);
                std::thread::sleep(PAUSE_POLL);
                continue;
            }
            self.active += now - tick;
            tick = now;
            if self.exhausted() {
                break;
            }
            for _ in 0..POLL_EVERY {
                if self.climber.evaluations >= self.live.refresh_evals {
                    self.next_restart();
                    continue;
                }
                let params = self.params();
                let step = self.climber.step(&self.obj, self.r0.as_deref(), params);
                self.evaluations += 1;
                if step.decode_failed {
                    self.decode_failures += 1;
                }
                if step.accepted {
                    self.consider(step.value);
                }
                if self
                    .s
                    .budget
                    .evaluations
                    .is_some_and(|n| self.evaluations >= n)
                {
                    break;
                }
            }
            self.flush(false);
        }
        self.flush(true);
        // state and file first, so whoever sees the event sees a finished session
        self.seq += 1;
        let e = Arc::new(Event {
            seq: self.seq,
            kind: EventKind::Finished {
                evaluation: self.evaluations,
                best_value: self.best.as_ref().map(|b| b.value),
            },
        });
        {
            let mut st = lock(&self.s.state);
            st.finished = true;
            st.last_finished = Some(Arc::clone(&e));
        }
        if let Err(err) = self.s.persist() {
            tracing::warn!(session = %self.s.id, "could not persist session: {err}");
        }
        let _ = self.s.tx.send(e);
    }
}

fn downsampled(trace: &[(u64, f64)]) -> Vec<TracePoint> {
    mll_core::optimizer::downsample(trace, MAX_TRACE_POINTS)
        .into_iter()
        .map(|(evaluation, value)| TracePoint { evaluation, value })
        .collect()
}
