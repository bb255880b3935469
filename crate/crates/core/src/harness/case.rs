use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::estimator::EstimatorConfig;
use crate::error::{GwError, Result};
use crate::estimators::{Classification, HeydeVariant};
use crate::extinction::{geometric_extinction_for_mean, poisson_extinction_for_mean};
use crate::gibbs::DEFAULT_K_TRUNC;
use crate::process::GenerationSeries;
use crate::rng::SeedSpec;

pub const DEFAULT_DATE_FORMAT: &str = "%Y-%m-%d";

/// Synthetic daily counts with two waves starting 2020-03-05 and 2020-08-10.
/// Built so the first-n-day MLEs reproduce the reference early-detection
/// tables; not real surveillance data.
pub const FIXTURE_CSV: &str = include_str!("../../data/case_fixture.csv");

/// Day window `[start, end)` into the daily counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Wave {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSeries {
    pub dates: Vec<NaiveDate>,
    pub daily_counts: Vec<u64>,
    pub waves: Vec<Wave>,
}

#[derive(Debug, Deserialize)]
struct CaseRow {
    date: String,
    count: String,
}

/// Read `date,count` rows. Dates must be strictly increasing.
pub fn parse_case_series<R: Read>(input: R, date_format: &str) -> Result<CaseSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| input_error(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "count"] {
        return Err(input_error(
            1,
            format!("expected header date,count, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut daily_counts = Vec::new();
    for (i, row) in reader.deserialize::<CaseRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| input_error(line, e.to_string()))?;
        let date = NaiveDate::parse_from_str(&row.date, date_format)
            .map_err(|e| input_error(line, format!("bad date {:?}: {e}", row.date)))?;
        if row.count.is_empty() {
            return Err(input_error(line, "missing count".into()));
        }
        let count = u64::from_str(&row.count).map_err(|_| {
            let reason = if row.count.starts_with('-') { "negative" } else { "unparseable" };
            input_error(line, format!("{reason} count {:?}", row.count))
        })?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(input_error(line, format!("date {date} does not follow {prev}")));
            }
        }
        dates.push(date);
        daily_counts.push(count);
    }
    if dates.is_empty() {
        return Err(input_error(1, "no data rows".into()));
    }
    Ok(CaseSeries { dates, daily_counts, waves: Vec::new() })
}

fn input_error(line: usize, message: String) -> GwError {
    GwError::Input { context: format!("line {line}"), message }
}

/// Read a case file and attach one wave per start date.
pub fn load_case_series(
    path: &Path,
    date_format: &str,
    wave_starts: &[NaiveDate],
    wave_days: &[usize],
) -> Result<CaseSeries> {
    if wave_starts.len() != wave_days.len() {
        return Err(GwError::InvalidParameter("need one wave length per wave start".into()));
    }
    let file = std::fs::File::open(path).map_err(|e| GwError::Io(format!("{}: {e}", path.display())))?;
    let mut cs = parse_case_series(file, date_format)?;
    for (start, days) in wave_starts.iter().zip(wave_days) {
        cs.add_wave(*start, *days)?;
    }
    Ok(cs)
}

impl CaseSeries {
    /// Add a window of `days` days starting on `start`.
    pub fn add_wave(&mut self, start: NaiveDate, days: usize) -> Result<usize> {
        if days == 0 {
            return Err(GwError::InvalidParameter("empty wave".into()));
        }
        let idx = self
            .dates
            .binary_search(&start)
            .map_err(|_| GwError::InvalidParameter(format!("wave start {start} is not in the data")))?;
        let end = idx + days;
        if end > self.dates.len() {
            return Err(GwError::InvalidParameter(format!(
                "wave from {start} for {days} days runs past the last date {}",
                self.dates[self.dates.len() - 1]
            )));
        }
        if self.daily_counts[idx] == 0 {
            return Err(GwError::InvalidParameter(format!("wave start {start} has no cases")));
        }
        self.waves.push(Wave { start: idx, end });
        Ok(self.waves.len() - 1)
    }

    /// Counts of a wave as generation totals, ending at the first zero day.
    pub fn wave_series(&self, wave: usize) -> Result<GenerationSeries> {
        let w = self.waves.get(wave).ok_or_else(|| GwError::InvalidParameter(format!("no wave {wave}")))?;
        let counts = &self.daily_counts[w.start..w.end];
        let len = counts.iter().position(|&c| c == 0).map_or(counts.len(), |i| i + 1);
        GenerationSeries::new(counts[..len].to_vec())
    }

    pub fn wave_start_date(&self, wave: usize) -> Option<NaiveDate> {
        self.waves.get(wave).map(|w| self.dates[w.start])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtinctionFamily {
    Geometric,
    Poisson,
}

impl FromStr for ExtinctionFamily {
    type Err = GwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(ExtinctionFamily::Geometric),
            "poisson" => Ok(ExtinctionFamily::Poisson),
            _ => Err(GwError::InvalidParameter(format!("unknown offspring family {s:?}"))),
        }
    }
}

impl ExtinctionFamily {
    pub fn extinction_for_mean(self, m_hat: f64) -> Result<f64> {
        match self {
            ExtinctionFamily::Geometric => Ok(geometric_extinction_for_mean(m_hat)),
            ExtinctionFamily::Poisson => poisson_extinction_for_mean(m_hat),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionCell {
    pub day: usize,
    pub m_hat: Option<f64>,
    pub p_supercritical: Option<f64>,
    pub classification: Option<Classification>,
    pub extinction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionRow {
    pub name: String,
    pub params: serde_json::Value,
    pub cells: Vec<DetectionCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub wave: usize,
    pub wave_start: Option<NaiveDate>,
    pub family: ExtinctionFamily,
    pub seed: u64,
    pub days: Vec<usize>,
    pub rows: Vec<DetectionRow>,
}

/// Estimators used for the case study.
pub fn default_case_estimators() -> Vec<EstimatorConfig> {
    vec![
        EstimatorConfig::Mle,
        EstimatorConfig::Improper { variant: HeydeVariant::Cumulative },
        EstimatorConfig::gibbs_dirichlet(DEFAULT_K_TRUNC),
        EstimatorConfig::gibbs_dp(1.0, DEFAULT_K_TRUNC),
    ]
}

/// Estimates from the first n days of a wave, for each n in `days`.
pub fn early_detection_report(
    cs: &CaseSeries,
    wave: usize,
    days: &[usize],
    estimators: &[EstimatorConfig],
    family: ExtinctionFamily,
    seed: u64,
) -> Result<DetectionReport> {
    let series = cs.wave_series(wave)?;
    let mut rows = Vec::with_capacity(estimators.len());
    for (e, est) in estimators.iter().enumerate() {
        if est.needs_complete_data() {
            return Err(GwError::InvalidParameter(format!("{} needs complete data", est.name())));
        }
        let cells = days
            .iter()
            .map(|&day| detection_cell(&series, day, est, family, SeedSpec::new(seed, day as u64).lane(e as u64)))
            .collect();
        rows.push(DetectionRow { name: est.name(), params: est.params_json(), cells });
    }
    Ok(DetectionReport { wave, wave_start: cs.wave_start_date(wave), family, seed, days: days.to_vec(), rows })
}

fn detection_cell(
    series: &GenerationSeries,
    day: usize,
    est: &EstimatorConfig,
    family: ExtinctionFamily,
    seed: SeedSpec,
) -> DetectionCell {
    let unavailable = |reason: String| DetectionCell {
        day,
        m_hat: None,
        p_supercritical: None,
        classification: None,
        extinction: None,
        unavailable: Some(reason),
    };
    if day > series.sizes().len() {
        return unavailable(format!("wave has {} usable days", series.sizes().len()));
    }
    let outcome = series.prefix(day).and_then(|prefix| est.estimate(&prefix, None, seed));
    match outcome {
        Err(e) => unavailable(e.to_string()),
        Ok(out) => {
            let s = out.summary;
            let extinction = match s.p_supercritical {
                Some(_) => None,
                None => family.extinction_for_mean(s.m_hat).ok(),
            };
            DetectionCell {
                day,
                m_hat: s.p_supercritical.is_none().then_some(s.m_hat),
                p_supercritical: s.p_supercritical,
                classification: Some(s.classification),
                extinction,
                unavailable: None,
            }
        }
    }
}

impl DetectionReport {
    /// Two aligned tables: estimates (P(m > 1) for the improper prior) and
    /// extinction probabilities.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len() + 9).max().unwrap_or(10).max(18);
        let mut out = String::new();
        let header = |out: &mut String, title: &str| {
            let _ = write!(out, "{title:<width$}");
            for d in &self.days {
                let _ = write!(out, "{d:>9}");
            }
            out.push('\n');
        };
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        header(&mut out, "data up to day n");
        for row in &self.rows {
            let is_prob = row.cells.iter().any(|c| c.p_supercritical.is_some());
            let label = if is_prob { format!("{} P(m>1)", row.name) } else { row.name.clone() };
            let _ = write!(out, "{label:<width$}");
            for c in &row.cells {
                let v = if is_prob { c.p_supercritical } else { c.m_hat };
                let _ = write!(out, "{:>9}", fmt(v));
            }
            out.push('\n');
        }
        out.push('\n');
        let family = match self.family {
            ExtinctionFamily::Geometric => "geometric",
            ExtinctionFamily::Poisson => "poisson",
        };
        header(&mut out, &format!("extinction ({family})"));
        for row in self.rows.iter().filter(|r| r.cells.iter().any(|c| c.extinction.is_some())) {
            let _ = write!(out, "{:<width$}", row.name);
            for c in &row.cells {
                let _ = write!(out, "{:>9}", fmt(c.extinction));
            }
            out.push('\n');
        }
        out
    }

    /// Long-format CSV, one line per estimator and day.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| GwError::Io(e.to_string());
        w.write_record(["estimator", "day", "m_hat", "p_supercritical", "classification", "extinction", "note"])
            .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for row in &self.rows {
            for c in &row.cells {
                let class = match c.classification {
                    Some(Classification::Supercritical) => "supercritical",
                    Some(Classification::SubcriticalOrCritical) => "subcritical_or_critical",
                    None => "",
                };
                w.write_record([
                    row.name.clone(),
                    c.day.to_string(),
                    opt(c.m_hat),
                    opt(c.p_supercritical),
                    class.to_string(),
                    opt(c.extinction),
                    c.unavailable.clone().unwrap_or_default(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
