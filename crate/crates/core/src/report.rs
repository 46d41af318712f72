//! Flat-file reports: CSV, JSON and an SVG survival curve.
//!
//! All renderers are pure functions of their input, so identical inputs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::SurvivalEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ReportFormat {
    pub fn file_name(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "survival.csv",
            ReportFormat::Json => "survival.json",
            ReportFormat::Svg => "survival.svg",
        }
    }
}

/// CSV rows `lambda,runs,alive,p_hat,wilson_lo,wilson_hi,horizon`.
pub fn render_csv(results: &[SurvivalEstimate]) -> String {
    let mut out = String::from("lambda,runs,alive,p_hat,wilson_lo,wilson_hi,horizon\n");
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.lambda, r.runs, r.alive, r.p_hat, r.wilson_lo, r.wilson_hi, r.horizon
        )
        .expect("writing to a string cannot fail");
    }
    out
}

pub fn render_json(results: &[SurvivalEstimate]) -> String {
    let mut s = serde_json::to_string_pretty(results).expect("estimates serialize");
    s.push('\n');
    s
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 25.0;
const MARGIN_TOP: f64 = 25.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Survival curve: multiplier on x, survival frequency with interval
/// whiskers on y.
pub fn render_svg(results: &[SurvivalEstimate]) -> String {
    let x_min = results.first().map_or(0.0, |r| r.lambda);
    let x_max = results.last().map_or(1.0, |r| r.lambda);
    let span = (x_max - x_min).max(1e-9);
    let pad = span * 0.05;
    let (x_lo, x_hi) = (x_min - pad, x_max + pad);

    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |v: f64| MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_w;
    let y = |p: f64| MARGIN_TOP + (1.0 - p) * plot_h;

    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">"
    )
    .unwrap();
    writeln!(s, "  <rect width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>").unwrap();

    // Horizontal grid and y labels at 0, 0.25, .., 1.
    for i in 0..=4 {
        let p = i as f64 * 0.25;
        let yy = y(p);
        writeln!(
            s,
            "  <line x1=\"{:.2}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\" stroke=\"#ddd\"/>",
            MARGIN_LEFT,
            SVG_WIDTH - MARGIN_RIGHT
        )
        .unwrap();
        writeln!(
            s,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{p}</text>",
            MARGIN_LEFT - 8.0,
            yy + 4.0
        )
        .unwrap();
    }

    // Axes.
    writeln!(
        s,
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        MARGIN_LEFT,
        MARGIN_TOP,
        MARGIN_LEFT,
        SVG_HEIGHT - MARGIN_BOTTOM
    )
    .unwrap();
    writeln!(
        s,
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        MARGIN_LEFT,
        SVG_HEIGHT - MARGIN_BOTTOM,
        SVG_WIDTH - MARGIN_RIGHT,
        SVG_HEIGHT - MARGIN_BOTTOM
    )
    .unwrap();

    // One x tick per grid point (the grids this tool draws are short).
    for r in results {
        let xx = x(r.lambda);
        writeln!(
            s,
            "  <line x1=\"{xx:.2}\" y1=\"{:.2}\" x2=\"{xx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            SVG_HEIGHT - MARGIN_BOTTOM,
            SVG_HEIGHT - MARGIN_BOTTOM + 6.0
        )
        .unwrap();
        writeln!(
            s,
            "  <text x=\"{xx:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            SVG_HEIGHT - MARGIN_BOTTOM + 20.0,
            r.lambda
        )
        .unwrap();
    }

    // Interval whiskers.
    for r in results {
        let xx = x(r.lambda);
        writeln!(
            s,
            "  <line x1=\"{xx:.2}\" y1=\"{:.2}\" x2=\"{xx:.2}\" y2=\"{:.2}\" stroke=\"#888\"/>",
            y(r.wilson_lo),
            y(r.wilson_hi)
        )
        .unwrap();
        for bound in [r.wilson_lo, r.wilson_hi] {
            writeln!(
                s,
                "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#888\"/>",
                xx - 4.0,
                y(bound),
                xx + 4.0,
                y(bound)
            )
            .unwrap();
        }
    }

    // Curve and markers.
    let points: Vec<String> = results
        .iter()
        .map(|r| format!("{:.2},{:.2}", x(r.lambda), y(r.p_hat)))
        .collect();
    writeln!(
        s,
        "  <polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"{}\"/>",
        points.join(" ")
    )
    .unwrap();
    for r in results {
        writeln!(
            s,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f6fb2\"/>",
            x(r.lambda),
            y(r.p_hat)
        )
        .unwrap();
    }

    writeln!(
        s,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">lambda</text>",
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        s,
        "  <text x=\"18\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">survival frequency</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Writes the requested report files under `out_dir`, returning the paths.
///
/// Rejects empty result sets; the files are byte-stable for identical
/// inputs.
pub fn emit_report(
    results: &[SurvivalEstimate],
    formats: &[ReportFormat],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for format in formats {
        let content = match format {
            ReportFormat::Csv => render_csv(results),
            ReportFormat::Json => render_json(results),
            ReportFormat::Svg => render_svg(results),
        };
        let path = out_dir.join(format.file_name());
        fs::write(&path, content).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
