//! Report files: per-round raw CSV, aggregate CSV, comparison CSV and an SVG
//! learning-curve plot with standard-error bands.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::compare::InitComparison;
use super::config::{InitMode, QueryStrategy};
use super::trial::{ExperimentResult, RoundRecord};
use crate::{Error, Result};

pub const RAW_CSV: &str = "raw.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const CURVES_SVG: &str = "learning_curves.svg";

#[derive(Debug, Serialize, Deserialize)]
struct RawRow {
    strategy: QueryStrategy,
    init_mode: InitMode,
    trial_seed: u64,
    round: usize,
    train_size: usize,
    test_accuracy: f64,
    epochs_used: usize,
    relaxed_count: usize,
}

#[derive(Debug, Serialize)]
struct AggregateRow {
    strategy: QueryStrategy,
    init_mode: InitMode,
    round: usize,
    train_size: usize,
    mean_acc: f64,
    std_acc: f64,
    stderr_acc: f64,
}

#[derive(Debug, Serialize)]
struct ComparisonRow {
    strategy: QueryStrategy,
    round: usize,
    train_size: usize,
    baseline_init: InitMode,
    baseline_mean: f64,
    baseline_std: f64,
    treatment_init: InitMode,
    treatment_mean: f64,
    treatment_std: f64,
    percent_change: f64,
}

pub fn write_raw_csv<W: std::io::Write>(results: &[ExperimentResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for res in results {
        for r in res.records() {
            wtr.serialize(RawRow {
                strategy: res.strategy,
                init_mode: res.init_mode,
                trial_seed: r.trial_seed,
                round: r.round,
                train_size: r.train_size,
                test_accuracy: r.test_accuracy,
                epochs_used: r.epochs_used,
                relaxed_count: r.relaxed_count,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: std::io::Write>(results: &[ExperimentResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for res in results {
        for p in &res.curve.points {
            wtr.serialize(AggregateRow {
                strategy: res.strategy,
                init_mode: res.init_mode,
                round: p.round,
                train_size: p.train_size,
                mean_acc: p.mean,
                std_acc: p.std,
                stderr_acc: p.stderr,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_comparison_csv<W: std::io::Write>(rows: &[InitComparison], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for c in rows {
        wtr.serialize(ComparisonRow {
            strategy: c.strategy,
            round: c.round,
            train_size: c.baseline.train_size,
            baseline_init: c.baseline.init_mode,
            baseline_mean: c.baseline.mean,
            baseline_std: c.baseline.std,
            treatment_init: c.treatment.init_mode,
            treatment_mean: c.treatment.mean,
            treatment_std: c.treatment.std,
            percent_change: c.percent_change,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

type ExperimentKey = (QueryStrategy, InitMode);

/// Parses a raw CSV back into experiments, grouped by `(strategy, init_mode)`
/// in order of first appearance and by trial seed within each.
pub fn read_raw_csv<R: Read>(r: R) -> Result<Vec<ExperimentResult>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut groups: Vec<(ExperimentKey, Vec<Vec<RoundRecord>>)> = Vec::new();
    for (i, row) in rdr.deserialize::<RawRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        let key = (row.strategy, row.init_mode);
        let pos = match groups.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        let trials = &mut groups[pos].1;
        let rec = RoundRecord {
            trial_seed: row.trial_seed,
            round: row.round,
            train_size: row.train_size,
            test_accuracy: row.test_accuracy,
            epochs_used: row.epochs_used,
            relaxed_count: row.relaxed_count,
        };
        match trials.iter_mut().find(|t| t[0].trial_seed == rec.trial_seed) {
            Some(t) => t.push(rec),
            None => trials.push(vec![rec]),
        }
    }
    groups
        .into_iter()
        .map(|((strategy, init_mode), trials)| ExperimentResult::from_trials(strategy, init_mode, trials))
        .collect()
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

/// Mean test accuracy against train-set size, one line and one shaded
/// ± standard-error band per experiment.
pub fn learning_curve_svg(results: &[ExperimentResult]) -> String {
    let (width, height) = (720.0, 440.0);
    let (left, right, top, bottom) = (64.0, 200.0, 24.0, 56.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let sizes = results.iter().flat_map(|r| r.curve.points.iter().map(|p| p.train_size as f64));
    let (mut x_min, mut x_max) = sizes.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| top + (1.0 - y.clamp(0.0, 1.0)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);

    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{left:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/>"##,
            left + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y:.1}</text>"#,
            left - 6.0,
            py + 4.0
        );
    }
    for i in 0..=4 {
        let x = x_min + (x_max - x_min) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.0}</text>"#,
            sx(x),
            top + plot_h + 18.0,
            x
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">labeled samples</text>"#,
        left + plot_w / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">test accuracy</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (i, res) in results.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = format!("{} / init {}", res.strategy, res.init_mode);
        let pts = &res.curve.points;

        let mut band = String::new();
        for (j, p) in pts.iter().enumerate() {
            let cmd = if j == 0 { 'M' } else { 'L' };
            let _ = write!(band, "{cmd}{:.2},{:.2} ", sx(p.train_size as f64), sy(p.mean + p.stderr));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "L{:.2},{:.2} ", sx(p.train_size as f64), sy(p.mean - p.stderr));
        }
        band.push('Z');
        let _ = writeln!(
            s,
            r#"<path class="band" data-series="{label}" d="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#
        );

        let mut line = String::new();
        for (j, p) in pts.iter().enumerate() {
            let cmd = if j == 0 { 'M' } else { 'L' };
            let _ = write!(line, "{cmd}{:.2},{:.2} ", sx(p.train_size as f64), sy(p.mean));
        }
        let _ = writeln!(
            s,
            r#"<path class="curve" data-series="{label}" d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.trim_end()
        );

        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, lx + 24.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub raw_csv: PathBuf,
    pub aggregate_csv: PathBuf,
    pub svg: PathBuf,
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes the aggregate CSV and the plot; also the raw CSV when `with_raw`.
fn emit(results: &[ExperimentResult], dir: &Path, with_raw: bool) -> Result<ReportFiles> {
    if results.is_empty() || results.iter().all(|r| r.trials.is_empty()) {
        return Err(Error::usage("no records to report"));
    }
    fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    let files = ReportFiles {
        raw_csv: dir.join(RAW_CSV),
        aggregate_csv: dir.join(AGGREGATE_CSV),
        svg: dir.join(CURVES_SVG),
    };
    if with_raw {
        write_raw_csv(results, create(&files.raw_csv)?)?;
    }
    write_aggregate_csv(results, create(&files.aggregate_csv)?)?;
    fs::write(&files.svg, learning_curve_svg(results))?;
    Ok(files)
}

/// Writes `raw.csv`, `aggregate.csv` and `learning_curves.svg` under `dir`.
pub fn emit_report(results: &[ExperimentResult], dir: &Path) -> Result<ReportFiles> {
    emit(results, dir, true)
}

/// Rebuilds the aggregate CSV and plot from an existing `raw.csv` in `dir`.
pub fn regenerate_report(dir: &Path) -> Result<ReportFiles> {
    let raw = dir.join(RAW_CSV);
    let file = fs::File::open(&raw).map_err(|source| Error::DataIo { path: raw, source })?;
    let results = read_raw_csv(file)?;
    emit(&results, dir, false)
}

pub fn emit_comparison(rows: &[InitComparison], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(COMPARISON_CSV);
    write_comparison_csv(rows, create(&path)?)?;
    Ok(path)
}
