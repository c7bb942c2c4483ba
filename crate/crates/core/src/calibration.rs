//! GBM calibration from hourly data.
//!
//! Seasonality is removed in log space by least squares on a constant plus
//! sine/cosine pairs at given frequencies; the log-increments of what is
//! left are then i.i.d. Normal(μΔt, σ²Δt) under X(s) = x exp(μs + σW(s)),
//! which gives closed-form estimators for μ and σ.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeDelta};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::GbmSpec;

/// Longest run of missing hours that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: i64 = 3;
pub const MIN_OBSERVATIONS: usize = 100;
const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("value {value} at {timestamp} is not positive")]
    NonPositiveValue { timestamp: NaiveDateTime, value: f64 },
    #[error("need at least {MIN_OBSERVATIONS} observations, got {0}")]
    InsufficientData(usize),
    #[error("{missing} missing hours after {after}; at most {MAX_INTERPOLATED_GAP} are interpolated")]
    GapTooLarge { after: NaiveDateTime, missing: i64 },
    #[error("timestamps must increase by whole hours: {previous} then {next}")]
    NotHourly {
        previous: NaiveDateTime,
        next: NaiveDateTime,
    },
    #[error("singular harmonic design: {0}")]
    SingularDesign(String),
}

/// Which market series a frequency set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Demand,
    Gas,
    Electricity,
}

/// Significant frequencies (1/h) found in the Italian demand, gas and
/// electricity price series.
pub fn default_frequencies(kind: ProcessKind) -> &'static [f64] {
    match kind {
        ProcessKind::Demand => &[0.04168, 0.00595, 0.00035, 0.0007, 0.08336],
        ProcessKind::Gas => &[0.00271, 0.00542, 0.01085, 0.00814],
        ProcessKind::Electricity => &[0.08335, 0.04165, 0.00595, 0.01190],
    }
}

/// Positive observations on a gap-free hourly grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    start: NaiveDateTime,
    values: Vec<f64>,
    interpolated: usize,
}

impl HourlySeries {
    /// Builds a series from (possibly gappy) observations. Runs of up to
    /// three missing hours are filled by linear interpolation in log space.
    pub fn new(points: Vec<(NaiveDateTime, f64)>) -> Result<Self, CalibrationError> {
        let Some(&(start, _)) = points.first() else {
            return Err(CalibrationError::InsufficientData(0));
        };
        let mut values = Vec::with_capacity(points.len());
        let mut interpolated = 0;
        let mut previous: Option<(NaiveDateTime, f64)> = None;
        for (t, v) in points {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CalibrationError::NonPositiveValue {
                    timestamp: t,
                    value: v,
                });
            }
            if let Some((pt, pv)) = previous {
                let delta = t - pt;
                let hours = delta.num_hours();
                if delta <= TimeDelta::zero() || delta != TimeDelta::hours(hours) {
                    return Err(CalibrationError::NotHourly {
                        previous: pt,
                        next: t,
                    });
                }
                let missing = hours - 1;
                if missing > MAX_INTERPOLATED_GAP {
                    return Err(CalibrationError::GapTooLarge { after: pt, missing });
                }
                if missing > 0 {
                    log::warn!("interpolating {missing} missing hour(s) after {pt}");
                    let (a, b) = (pv.ln(), v.ln());
                    for k in 1..hours {
                        values.push((a + (b - a) * k as f64 / hours as f64).exp());
                    }
                    interpolated += missing as usize;
                }
            }
            values.push(v);
            previous = Some((t, v));
        }
        Ok(Self {
            start,
            values,
            interpolated,
        })
    }

    /// A series starting at `start` with one value per hour.
    pub fn from_values(start: NaiveDateTime, values: Vec<f64>) -> Result<Self, CalibrationError> {
        let points = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (start + TimeDelta::hours(i as i64), v))
            .collect();
        Self::new(points)
    }

    /// Reads `timestamp,value` CSV with a header row. Timestamps are
    /// ISO-8601, with or without an offset (offsets are converted to UTC).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, CalibrationError> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = csv.headers().map_err(|e| csv_error(1, e))?.clone();
        if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "value" {
            return Err(CalibrationError::Csv {
                line: 1,
                message: format!("expected header `timestamp,value`, got `{}`", header.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut points = Vec::new();
        for record in csv.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                csv_error(line, e)
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let t = parse_timestamp(&record[0]).ok_or_else(|| CalibrationError::Csv {
                line,
                message: format!("unrecognised timestamp `{}`", &record[0]),
            })?;
            let v: f64 = record[1].parse().map_err(|_| CalibrationError::Csv {
                line,
                message: format!("value `{}` is not a number", &record[1]),
            })?;
            points.push((t, v));
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, CalibrationError> {
        let file = std::fs::File::open(path).map_err(|e| CalibrationError::Csv {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_csv_reader(file)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> std::io::Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["timestamp", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            let t = self.start + TimeDelta::hours(i as i64);
            csv.write_record([t.format("%Y-%m-%dT%H:%M:%S").to_string(), v.to_string()])?;
        }
        csv.flush()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of hours filled in by interpolation.
    pub fn interpolated(&self) -> usize {
        self.interpolated
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            ..self.clone()
        }
    }
}

fn csv_error(line: u64, e: csv::Error) -> CalibrationError {
    CalibrationError::Csv {
        line,
        message: e.to_string(),
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// A fitted a·sin(2πft) + b·cos(2πft) = amplitude·sin(2πft + phase), in log
/// space, with t in hours from the first observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalComponent {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deseasonalized {
    /// The series with the seasonal factor divided out; the level is kept.
    pub residual: HourlySeries,
    /// Fitted constant of the log regression.
    pub constant: f64,
    pub components: Vec<SeasonalComponent>,
}

/// Harmonic regression of log values on a constant and sine/cosine pairs.
pub fn deseasonalize(
    series: &HourlySeries,
    frequencies: &[f64],
) -> Result<Deseasonalized, CalibrationError> {
    for (i, &f) in frequencies.iter().enumerate() {
        if !(f > 0.0 && f < 0.5) {
            return Err(CalibrationError::SingularDesign(format!(
                "frequency {f} outside (0, 0.5) cycles per hour"
            )));
        }
        if frequencies[..i].contains(&f) {
            return Err(CalibrationError::SingularDesign(format!("duplicate frequency {f}")));
        }
    }
    let n = series.len();
    let p = 1 + 2 * frequencies.len();
    if n < p {
        return Err(CalibrationError::InsufficientData(n));
    }
    let logs = DVector::from_iterator(n, series.values.iter().map(|v| v.ln()));
    let angle = |i: usize, f: f64| std::f64::consts::TAU * f * i as f64;
    let design = DMatrix::from_fn(n, p, |i, j| match j {
        0 => 1.0,
        j if j % 2 == 1 => angle(i, frequencies[j / 2]).sin(),
        j => angle(i, frequencies[j / 2 - 1]).cos(),
    });

    let qr = design.clone().qr();
    let r = qr.r();
    let largest = r.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(j) = (0..p).find(|&j| r[(j, j)].abs() <= 1e-10 * largest) {
        return Err(CalibrationError::SingularDesign(format!(
            "regressor {j} is (nearly) collinear with the others; \
             frequencies may alias over {n} observations"
        )));
    }
    let rhs = qr.q().transpose() * &logs;
    let coef = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| CalibrationError::SingularDesign("triangular solve failed".into()))?;

    let components = frequencies
        .iter()
        .enumerate()
        .map(|(k, &frequency)| {
            let (a, b) = (coef[1 + 2 * k], coef[2 + 2 * k]);
            SeasonalComponent {
                frequency,
                amplitude: a.hypot(b),
                phase: b.atan2(a),
            }
        })
        .collect();
    let seasonal = &design.columns(1, p - 1) * coef.rows(1, p - 1);
    let residual = (0..n).map(|i| (logs[i] - seasonal[i]).exp()).collect();
    Ok(Deseasonalized {
        residual: series.with_values(residual),
        constant: coef[0],
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Level of the process at the first observation, €/MWh or MW.
    pub intercept: f64,
    /// Drift of the log process, 1/h.
    pub mu_hat: f64,
    /// 95% confidence interval for μ.
    pub mu_ci: (f64, f64),
    /// Volatility, 1/√h.
    pub sigma_hat: f64,
    pub observations: usize,
    pub seasonal_components: Vec<SeasonalComponent>,
    /// σ is numerically zero; the series is deterministic.
    pub degenerate: bool,
}

impl CalibrationResult {
    pub fn gbm(&self) -> GbmSpec {
        GbmSpec::new(self.intercept, self.mu_hat, self.sigma_hat)
    }
}

/// Drift and volatility from hourly log-increments. The intercept is the
/// first observation.
pub fn estimate_gbm(series: &HourlySeries) -> Result<CalibrationResult, CalibrationError> {
    let n = series.len();
    if n < MIN_OBSERVATIONS {
        return Err(CalibrationError::InsufficientData(n));
    }
    let increments: Vec<f64> = series.values.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let m = increments.len() as f64;
    let mean = increments.iter().sum::<f64>() / m;
    let var = increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let sd = var.sqrt();
    let dt = 1.0;
    let mu_hat = mean / dt;
    let half_width = Z_95 * sd / (m.sqrt() * dt);
    let sigma_hat = sd / dt.sqrt();
    Ok(CalibrationResult {
        intercept: series.values[0],
        mu_hat,
        mu_ci: (mu_hat - half_width, mu_hat + half_width),
        sigma_hat,
        observations: n,
        seasonal_components: Vec::new(),
        degenerate: sigma_hat <= 1e-12 * (1.0 + mu_hat.abs()),
    })
}

/// Deseasonalizes, then estimates. The intercept is the exponential of the
/// regression constant, i.e. the deseasonalized level.
pub fn calibrate(
    series: &HourlySeries,
    frequencies: &[f64],
) -> Result<CalibrationResult, CalibrationError> {
    let d = deseasonalize(series, frequencies)?;
    let mut result = estimate_gbm(&d.residual)?;
    result.intercept = d.constant.exp();
    result.seasonal_components = d.components;
    Ok(result)
}

/// A sampled GBM path, multiplied by exp of the given seasonal components.
pub fn synthetic_series(
    spec: &GbmSpec,
    hours: usize,
    seasonal: &[SeasonalComponent],
    start: NaiveDateTime,
    seed: u64,
) -> HourlySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_x = spec.initial_value.ln();
    let values = (0..hours)
        .map(|i| {
            if i > 0 {
                let z: f64 = rng.sample(StandardNormal);
                log_x += spec.drift + spec.volatility * z;
            }
            let t = i as f64;
            let season: f64 = seasonal
                .iter()
                .map(|c| c.amplitude * (std::f64::consts::TAU * c.frequency * t + c.phase).sin())
                .sum();
            (log_x + season).exp()
        })
        .collect();
    HourlySeries {
        start,
        values,
        interpolated: 0,
    }
}
