//! Report emission: one CSV of check rows plus a JSON summary per run, and
//! optional two-column .dat series for trend data.
//!
//! Everything written here is bit-reproducible for a fixed configuration:
//! rows are sorted by check id, all floats use a fixed scientific format,
//! maps iterate in key order, and no timestamps or host details appear
//! anywhere.  Reports are append-only — each invocation claims the next free
//! index rather than overwriting.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One verification check: an expected value, a computed value, and the
/// absolute tolerance the comparison used.  Structural (yes/no) checks encode
/// pass as actual=1, expected=1, tolerance=0.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub check_id: String,
    pub equation: String,
    pub inputs: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Standard comparison row: pass iff |expected - actual| <= tolerance.
    pub fn compare(
        check_id: impl Into<String>,
        equation: impl Into<String>,
        inputs: String,
        expected: f64,
        actual: f64,
        tolerance: f64,
    ) -> Self {
        let pass = (expected - actual).abs() <= tolerance
            && expected.is_finite()
            && actual.is_finite();
        CheckRow {
            check_id: check_id.into(),
            equation: equation.into(),
            inputs,
            expected,
            actual,
            tolerance,
            pass,
        }
    }

    /// One-sided row: pass iff actual <= expected + tolerance (domination /
    /// monotonicity style checks where only one direction is claimed).
    pub fn upper_bound(
        check_id: impl Into<String>,
        equation: impl Into<String>,
        inputs: String,
        expected: f64,
        actual: f64,
        tolerance: f64,
    ) -> Self {
        let pass = actual <= expected + tolerance && expected.is_finite() && actual.is_finite();
        CheckRow {
            check_id: check_id.into(),
            equation: equation.into(),
            inputs,
            expected,
            actual,
            tolerance,
            pass,
        }
    }

    /// Structural yes/no row.
    pub fn flag(
        check_id: impl Into<String>,
        equation: impl Into<String>,
        inputs: String,
        ok: bool,
    ) -> Self {
        CheckRow {
            check_id: check_id.into(),
            equation: equation.into(),
            inputs,
            expected: 1.0,
            actual: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

/// A named two-column series written next to the report as `<name>-NNNN.dat`.
#[derive(Debug, Clone)]
pub struct TrendSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Everything a suite produces.
#[derive(Debug, Default)]
pub struct SuiteOutput {
    pub rows: Vec<CheckRow>,
    pub trends: Vec<TrendSeries>,
}

impl SuiteOutput {
    pub fn merge(&mut self, other: SuiteOutput) {
        self.rows.extend(other.rows);
        self.trends.extend(other.trends);
    }
}

/// Render the `inputs` column: the config hash first, then the row-specific
/// parameters in the order given.
pub fn inputs(cfg_hash: &str, params: &[(&str, String)]) -> String {
    let mut s = format!("cfg={cfg_hash}");
    for (k, v) in params {
        let _ = write!(s, ";{k}={v}");
    }
    s
}

fn fmt_float(v: f64) -> String {
    format!("{v:.12e}")
}

fn csv_text(cfg: &RunConfig, rows: &[CheckRow]) -> String {
    let mut out = String::new();
    for (k, v) in cfg.canonical() {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str("check_id,equation,inputs,expected,actual,tolerance,pass\n");
    for r in rows {
        assert!(
            !r.check_id.contains(',') && !r.equation.contains(',') && !r.inputs.contains(','),
            "text fields must not contain the CSV delimiter: {}",
            r.check_id
        );
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.check_id,
            r.equation,
            r.inputs,
            fmt_float(r.expected),
            fmt_float(r.actual),
            fmt_float(r.tolerance),
            r.pass
        );
    }
    out
}

fn summary_json(cfg: &RunConfig, cfg_hash: &str, rows: &[CheckRow]) -> String {
    // serde_json's default map is a BTreeMap, so key order (and therefore the
    // serialized bytes) is deterministic.
    let failed: Vec<&CheckRow> = rows.iter().filter(|r| !r.pass).collect();
    let mut config = serde_json::Map::new();
    for (k, v) in cfg.canonical() {
        config.insert(k, serde_json::Value::String(v));
    }
    let json = serde_json::json!({
        "config": config,
        "config_hash": cfg_hash,
        "checks_total": rows.len(),
        "checks_passed": rows.len() - failed.len(),
        "checks_failed": failed.len(),
        "first_failure": failed.first().map(|r| r.check_id.clone()),
        "failed_ids": failed.iter().map(|r| r.check_id.clone()).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&json).expect("summary serialization");
    text.push('\n');
    text
}

fn dat_text(points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for (x, y) in points {
        let _ = writeln!(out, "{} {}", fmt_float(*x), fmt_float(*y));
    }
    out
}

/// Next free report index in `dir` (report-0000.csv, report-0001.csv, ...).
fn next_index(dir: &Path) -> Result<u32> {
    let mut next = 0u32;
    if dir.exists() {
        for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(stem) = name.strip_prefix("report-").and_then(|s| s.strip_suffix(".csv")) {
                if let Ok(i) = stem.parse::<u32>() {
                    next = next.max(i + 1);
                }
            }
        }
    }
    Ok(next)
}

/// Paths produced by one write.
#[derive(Debug)]
pub struct WrittenReport {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub trends: Vec<PathBuf>,
}

/// Sort rows, write report-NNNN.csv, summary-NNNN.json, and any trend files
/// into `<out>/<config-hash>/`.
pub fn write_report(cfg: &RunConfig, output: &mut SuiteOutput) -> Result<WrittenReport> {
    output.rows.sort_by(|a, b| a.check_id.cmp(&b.check_id));
    let cfg_hash = cfg.hash();
    let dir = cfg.out.join(&cfg_hash);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let index = next_index(&dir)?;

    let csv_path = dir.join(format!("report-{index:04}.csv"));
    std::fs::write(&csv_path, csv_text(cfg, &output.rows))
        .with_context(|| format!("writing {}", csv_path.display()))?;

    let summary_path = dir.join(format!("summary-{index:04}.json"));
    std::fs::write(&summary_path, summary_json(cfg, &cfg_hash, &output.rows))
        .with_context(|| format!("writing {}", summary_path.display()))?;

    let mut trend_paths = Vec::new();
    for trend in &output.trends {
        let path = dir.join(format!("{}-{index:04}.dat", trend.name));
        std::fs::write(&path, dat_text(&trend.points))
            .with_context(|| format!("writing {}", path.display()))?;
        trend_paths.push(path);
    }

    Ok(WrittenReport {
        csv: csv_path,
        summary: summary_path,
        trends: trend_paths,
    })
}
