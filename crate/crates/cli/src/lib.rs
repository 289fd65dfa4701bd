//! Commands behind the `mll` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mll_core::export::{ladder_json, realization_csv, realization_svg, Provenance};
use mll_core::family::{registry, registry_entry, FamilyFile, FamilySpec};
use mll_core::optimizer::{run, OptimizerConfig, RunRecord};
use mll_core::verify::{self, Check, SearchPlan};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REPORT_FORMAT: &str = "mll-report/1";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mll_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("{0}")]
    Usage(String),
    #[error("run record has no best ladder")]
    NoLadder,
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(text.as_bytes()).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_owned(),
        source: e.error,
    })?;
    Ok(())
}

/// Look a family up by name in `file`, or in the registry without one.
pub fn load_family(name: Option<&str>, file: Option<&Path>) -> Result<FamilySpec> {
    match (name, file) {
        (Some(n), None) => registry_entry(n).map_err(|_| CliError::UnknownFamily(n.into())),
        (name, Some(path)) => {
            let all = FamilyFile::parse(&read_text(path)?)?.families;
            match name {
                Some(n) => all
                    .into_iter()
                    .find(|f| f.name == n)
                    .ok_or_else(|| CliError::UnknownFamily(n.into())),
                None if all.len() == 1 => {
                    Ok(all.into_iter().next().unwrap_or_else(|| unreachable!()))
                }
                None => Err(CliError::Usage(format!(
                    "{} holds {} families; pick one with --family",
                    path.display(),
                    all.len()
                ))),
            }
        }
        (None, None) => Err(CliError::Usage("give --family or --family-file".into())),
    }
}

fn penalty_cell(f: &FamilySpec) -> String {
    match &f.penalty {
        Some(p) => {
            let alpha = p.alpha.map(|a| format!("_{a}")).unwrap_or_default();
            format!("χ{alpha}({},{}) μ={}", p.i, p.j, p.mu)
        }
        None => "-".into(),
    }
}

/// One row per registered family.
pub fn list_table() -> String {
    let rows: Vec<[String; 9]> = registry()
        .iter()
        .map(|f| {
            let (k, l) = f.dimension();
            [
                f.name.clone(),
                format!("{:?}", f.role).to_lowercase(),
                format!("{:?}", f.kind),
                f.n().to_string(),
                k.to_string(),
                l.to_string(),
                format!("{:.6}", f.threshold),
                f.mask
                    .as_ref()
                    .map_or_else(|| "-".into(), ToString::to_string),
                penalty_cell(f),
            ]
        })
        .collect();
    let head = [
        "name",
        "role",
        "kind",
        "N",
        "K",
        "L",
        "threshold",
        "mask",
        "penalty",
    ]
    .map(String::from);
    let mut widths = head.clone().map(|h| h.chars().count());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(&head).chain(&rows) {
        let cells: Vec<String> = r
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

pub fn describe(f: &FamilySpec) -> Result<String> {
    let (k, l) = f.dimension();
    let mut out = format!(
        "{}  {}\nK={k} L={l} threshold={}\n",
        f.name,
        f.notation(),
        f.threshold
    );
    out.push_str(&serde_json::to_string_pretty(f).map_err(|e| CliError::Usage(e.to_string()))?);
    out.push('\n');
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoCounterexampleFound,
    CounterexampleFound,
}

impl Verdict {
    pub fn of_margin(margin: f64) -> Self {
        if margin < 0.0 {
            Verdict::CounterexampleFound
        } else {
            Verdict::NoCounterexampleFound
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::NoCounterexampleFound => 0,
            Verdict::CounterexampleFound => 2,
        }
    }
}

/// Which side of its threshold a run landed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalculationReport {
    pub format: String,
    pub family: String,
    pub threshold: f64,
    pub best_value: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub run_file: PathBuf,
    pub evaluations: u64,
    pub wall_seconds: f64,
    pub provenance: Provenance,
}

impl CalculationReport {
    pub fn new(rec: &RunRecord, run_file: PathBuf, wall_seconds: f64) -> Self {
        let margin = rec.best_value - rec.family_spec.threshold;
        Self {
            format: REPORT_FORMAT.into(),
            family: rec.family.clone(),
            threshold: rec.family_spec.threshold,
            best_value: rec.best_value,
            margin,
            verdict: Verdict::of_margin(margin),
            run_file,
            evaluations: rec.evaluations,
            wall_seconds,
            provenance: Provenance::new(Some(rec.config.seed), Some(&rec.rng)),
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: best {:.6} threshold {:.6} margin {:+.6} after {} evaluations in {:.1}s: {}",
            self.family,
            self.best_value,
            self.threshold,
            self.margin,
            self.evaluations,
            self.wall_seconds,
            serde_json::to_value(self.verdict)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default()
        )
    }
}

/// Run one calculation and write `<family>-seed<seed>.run.json` and
/// `.report.json` under `out`.
pub fn calculate(f: &FamilySpec, cfg: &OptimizerConfig, out: &Path) -> Result<CalculationReport> {
    let t = Instant::now();
    let rec = run(f, cfg)?;
    let wall = t.elapsed().as_secs_f64();
    let stem = format!("{}-seed{}", f.name, cfg.seed);
    let run_file = out.join(format!("{stem}.run.json"));
    write_atomic(&run_file, &rec.to_json()?)?;
    let report = CalculationReport::new(&rec, run_file, wall);
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    write_atomic(&out.join(format!("{stem}.report.json")), &text)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    LadderJson,
    RealizationCsv,
    RealizationSvg,
}

impl std::str::FromStr for ExportFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ladder-json" => Ok(Self::LadderJson),
            "realization-csv" => Ok(Self::RealizationCsv),
            "realization-svg" => Ok(Self::RealizationSvg),
            other => Err(CliError::Usage(format!("unknown export format `{other}`"))),
        }
    }
}

/// Export the best ladder of a run record; the output depends only on the record.
pub fn export(record_text: &str, format: ExportFormat) -> Result<String> {
    let rec = RunRecord::from_json(record_text)?;
    let ladder = rec.best_ladder.as_ref().ok_or(CliError::NoLadder)?;
    let prov = Provenance::new(Some(rec.config.seed), Some(&rec.rng));
    Ok(match format {
        ExportFormat::LadderJson => ladder_json(ladder, Some(&prov))?,
        ExportFormat::RealizationCsv => realization_csv(ladder, Some(&prov))?,
        ExportFormat::RealizationSvg => realization_svg(ladder, Some(&prov))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernel,
    Families,
    PaperNumbers,
    All,
}

impl std::str::FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(Self::Kernel),
            "families" => Ok(Self::Families),
            "paper-numbers" => Ok(Self::PaperNumbers),
            "all" => Ok(Self::All),
            other => Err(CliError::Usage(format!("unknown suite `{other}`"))),
        }
    }
}

pub fn verify_suite(suite: Suite, plan: &SearchPlan) -> Vec<Check> {
    match suite {
        Suite::Kernel => verify::kernel_suite(),
        Suite::Families => verify::families_suite(),
        Suite::PaperNumbers => verify::calculations_suite(plan),
        Suite::All => verify::all_checks(plan),
    }
}
