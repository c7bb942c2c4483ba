//! One-parameter sensitivity sweeps.
//!
//! CSV columns, in this order: `param_value, status, case,
//! community_formed, beta_star, y_h, y_b, j_h, j_b, d_h, d_b, nash_product,
//! g_h, g_b, message`. `status` is `ok`, `invalid` (the modified scenario
//! fails validation) or `failed` (the solver failed); the result columns
//! are empty unless it is `ok`, and `message` says what went wrong.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use recgame_core::scenario::ScenarioFile;

use crate::report::{self, Solved, SOLUTION_COLUMNS};
use crate::Failure;

#[derive(Args, Clone)]
pub struct SweepArgs {
    /// Dotted parameter path, e.g. gas_price.initial_value.
    #[arg(long)]
    pub param: String,
    /// Comma-separated grid of values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Vec<String>,
    /// Also draw the sweep as an SVG line chart.
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub param_value: f64,
    pub status: Status,
    #[serde(flatten)]
    pub solved: Option<Solved>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Invalid,
    Failed,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Invalid => "invalid",
            Status::Failed => "failed",
        }
    }
}

fn parse_grid(values: &[String]) -> Result<Vec<f64>, Failure> {
    let grid = values
        .iter()
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Failure::Input(format!("--values: `{v}` is not a finite number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(Failure::Input("--values: the sweep grid is empty".into()));
    }
    Ok(grid)
}

pub fn run(file: &ScenarioFile, args: &SweepArgs) -> Result<Vec<Row>, Failure> {
    let grid = parse_grid(&args.values)?;
    // An unknown parameter is a problem with the whole sweep, not a row.
    file.clone()
        .set_parameter(&args.param, grid[0])
        .map_err(|e| Failure::Input(e.to_string()))?;

    Ok(grid
        .par_iter()
        .map(|&value| {
            let mut modified = file.clone();
            let result = modified
                .set_parameter(&args.param, value)
                .map_err(|e| Failure::Input(e.to_string()))
                .and_then(|()| report::solve(&modified));
            match result {
                Ok(solved) => Row {
                    param_value: value,
                    status: Status::Ok,
                    solved: Some(solved),
                    message: None,
                },
                Err(failure) => {
                    log::warn!("{} = {value}: {failure}", args.param);
                    let (status, message) = match failure {
                        Failure::Input(m) => (Status::Invalid, m),
                        Failure::Solver(m) => (Status::Failed, m),
                    };
                    Row {
                        param_value: value,
                        status,
                        solved: None,
                        message: Some(message),
                    }
                }
            }
        })
        .collect())
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["param_value", "status"]
        .into_iter()
        .chain(SOLUTION_COLUMNS)
        .chain(["message"]);
    w.write_record(header).expect("in-memory write");
    for row in rows {
        let mut record = vec![row.param_value.to_string(), row.status.as_str().to_string()];
        match &row.solved {
            Some(s) => record.extend(s.fields()),
            None => record.extend(SOLUTION_COLUMNS.iter().map(|_| String::new())),
        }
        record.push(row.message.clone().unwrap_or_default());
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
}

pub fn to_json(param: &str, rows: &[Row]) -> String {
    #[derive(Serialize)]
    struct Sweep<'a> {
        param: &'a str,
        rows: &'a [Row],
    }
    let mut text =
        serde_json::to_string_pretty(&Sweep { param, rows }).expect("sweep is serializable");
    text.push('\n');
    text
}

/// Stacked line charts of β*, y_h* and y_b* against the swept parameter.
pub fn to_svg(param: &str, rows: &[Row]) -> String {
    const WIDTH: f64 = 640.0;
    const PANEL: f64 = 180.0;
    const MARGIN: f64 = 60.0;
    let series: [(&str, fn(&Solved) -> f64); 3] = [
        ("beta_star", |s| s.beta_star),
        ("y_h (MW)", |s| s.y_h),
        ("y_b (MW)", |s| s.y_b),
    ];
    let ok: Vec<(f64, &Solved)> = rows
        .iter()
        .filter_map(|r| r.solved.as_ref().map(|s| (r.param_value, s)))
        .collect();
    let height = series.len() as f64 * (PANEL + MARGIN) + MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let (x_lo, x_hi) = bounds(ok.iter().map(|(x, _)| *x));
    let plot_w = WIDTH - 2.0 * MARGIN;
    for (i, (label, value)) in series.iter().enumerate() {
        let top = MARGIN + i as f64 * (PANEL + MARGIN);
        let (y_lo, y_hi) = bounds(ok.iter().map(|(_, s)| value(s)));
        let sx = |x: f64| MARGIN + plot_w * (x - x_lo) / (x_hi - x_lo);
        let sy = |y: f64| top + PANEL * (1.0 - (y - y_lo) / (y_hi - y_lo));
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN}" y="{top}" width="{plot_w}" height="{PANEL}" fill="none" stroke="gray"/>"#
        );
        let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{}">{label}</text>"#, top - 8.0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{y_hi:.4}</text>"#,
            MARGIN - 4.0,
            top + 10.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{y_lo:.4}</text>"#,
            MARGIN - 4.0,
            top + PANEL
        );
        let points: Vec<String> = ok
            .iter()
            .map(|(x, s)| format!("{:.2},{:.2}", sx(*x), sy(value(s))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        for p in &points {
            let (x, y) = p.split_once(',').expect("formatted above");
            let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="steelblue"/>"#);
        }
    }
    let bottom = height - MARGIN / 2.0;
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{bottom}">{x_lo}</text>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{bottom}" text-anchor="end">{x_hi}</text>"#,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{bottom}" text-anchor="middle">{param}</text>"#,
        WIDTH / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Range of the values, widened when degenerate so that scaling is defined.
fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}
