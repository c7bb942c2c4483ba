//! Calibration of scenario processes from hourly CSV series.
//!
//! Each `--input section=path.csv` names the scenario section the series
//! belongs to. The emitted TOML fragment can be pasted over that section:
//! its drift is the martingale value −σ²/2, with the raw estimate and its
//! confidence interval kept in comments.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use recgame_core::calibration::{
    calibrate, default_frequencies, CalibrationResult, HourlySeries, ProcessKind,
};

use crate::Failure;

const SECTIONS: [&str; 4] = ["spot_price", "purchase_price", "gas_price", "demand"];

#[derive(Args, Clone)]
pub struct CalibrateArgs {
    /// Series to calibrate, as SECTION=PATH with SECTION one of spot_price,
    /// purchase_price, gas_price, demand. Repeatable.
    #[arg(long = "input", value_name = "SECTION=PATH", required = true)]
    pub inputs: Vec<String>,
    /// Seasonal frequencies (1/h) for a section, as SECTION=f1,f2,...;
    /// defaults to the significant frequencies of the matching market.
    /// An empty list skips deseasonalization.
    #[arg(long = "frequencies", value_name = "SECTION=F1,F2,...")]
    pub frequencies: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibrated {
    pub section: String,
    pub source: PathBuf,
    pub interpolated_hours: usize,
    pub frequencies: Vec<f64>,
    pub martingale_drift: f64,
    #[serde(flatten)]
    pub result: CalibrationResult,
}

fn split_pair<'a>(flag: &str, arg: &'a str) -> Result<(&'a str, &'a str), Failure> {
    let (section, rest) = arg
        .split_once('=')
        .ok_or_else(|| Failure::Input(format!("{flag} `{arg}`: expected SECTION=...")))?;
    if !SECTIONS.contains(&section) {
        return Err(Failure::Input(format!(
            "{flag} `{arg}`: unknown section `{section}`, expected one of {}",
            SECTIONS.join(", ")
        )));
    }
    Ok((section, rest))
}

fn default_for(section: &str) -> &'static [f64] {
    default_frequencies(match section {
        "demand" => ProcessKind::Demand,
        "gas_price" => ProcessKind::Gas,
        _ => ProcessKind::Electricity,
    })
}

pub fn run(args: &CalibrateArgs) -> Result<Vec<Calibrated>, Failure> {
    let mut jobs: Vec<(String, PathBuf, Vec<f64>)> = Vec::new();
    for arg in &args.inputs {
        let (section, path) = split_pair("--input", arg)?;
        if jobs.iter().any(|(s, _, _)| s == section) {
            return Err(Failure::Input(format!("--input: section `{section}` given twice")));
        }
        jobs.push((section.into(), path.into(), default_for(section).to_vec()));
    }
    for arg in &args.frequencies {
        let (section, list) = split_pair("--frequencies", arg)?;
        let freqs = list
            .split(',')
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Failure::Input(format!("--frequencies: `{f}` is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let job = jobs.iter_mut().find(|(s, _, _)| s == section).ok_or_else(|| {
            Failure::Input(format!("--frequencies for `{section}` without a matching --input"))
        })?;
        job.2 = freqs;
    }

    jobs.into_par_iter()
        .map(|(section, source, frequencies)| {
            let context = |e: &dyn std::fmt::Display| Failure::Input(format!("{}: {e}", source.display()));
            let series = HourlySeries::from_csv_path(&source).map_err(|e| context(&e))?;
            let result = calibrate(&series, &frequencies).map_err(|e| context(&e))?;
            if result.degenerate {
                log::warn!("{}: the series shows no variation; σ̂ = 0", source.display());
            }
            Ok(Calibrated {
                martingale_drift: -0.5 * result.sigma_hat * result.sigma_hat,
                interpolated_hours: series.interpolated(),
                section,
                source,
                frequencies,
                result,
            })
        })
        .collect()
}

pub fn to_toml(results: &[Calibrated]) -> String {
    let mut out = String::new();
    for c in results {
        let r = &c.result;
        let _ = writeln!(out, "# from {}: {} hourly observations", c.source.display(), r.observations);
        if c.interpolated_hours > 0 {
            let _ = writeln!(out, "# {} missing hour(s) interpolated", c.interpolated_hours);
        }
        if r.degenerate {
            let _ = writeln!(out, "# WARNING: degenerate series, no variation in the log-increments");
        }
        let _ = writeln!(
            out,
            "# raw drift {:e} 1/h, 95% CI [{:e}, {:e}]",
            r.mu_hat, r.mu_ci.0, r.mu_ci.1
        );
        for s in &r.seasonal_components {
            let _ = writeln!(
                out,
                "# seasonal: frequency {} 1/h, amplitude {:.6}, phase {:.6}",
                s.frequency, s.amplitude, s.phase
            );
        }
        let _ = writeln!(out, "[{}]", c.section);
        let _ = writeln!(out, "initial_value = {:?}", r.intercept);
        let _ = writeln!(out, "drift = {:?}  # martingale: -volatility²/2", c.martingale_drift);
        let _ = writeln!(out, "volatility = {:?}", r.sigma_hat);
        out.push('\n');
    }
    out
}

pub fn to_json(results: &[Calibrated]) -> String {
    let mut text = serde_json::to_string_pretty(results).expect("results are serializable");
    text.push('\n');
    text
}
