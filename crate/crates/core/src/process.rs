//! Galton-Watson realizations under the two observation schemes.
//!
//! Complete data: for each parent generation i, the counts Z_ij of parents with
//! exactly j children. Incomplete data: only the totals Z_0, …, Z_n.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{GwError, Result};
use crate::offspring::OffspringDistribution;
use crate::rng::SeedSpec;

/// Default per-generation population cap for simulation.
pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;

/// Generation totals Z_0, …, Z_n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSeries {
    z: Vec<u64>,
}

impl GenerationSeries {
    pub fn new(z: Vec<u64>) -> Result<Self> {
        match z.first() {
            None => return Err(GwError::InvalidSeries("empty series".into())),
            Some(0) => return Err(GwError::InvalidSeries("Z_0 must be at least 1".into())),
            _ => {}
        }
        if let Some(first_zero) = z.iter().position(|&v| v == 0) {
            if let Some(offset) = z[first_zero..].iter().position(|&v| v != 0) {
                return Err(GwError::InvalidSeries(format!(
                    "generation {} is nonzero after extinction at generation {first_zero}",
                    first_zero + offset
                )));
            }
        }
        Ok(GenerationSeries { z })
    }

    pub fn sizes(&self) -> &[u64] {
        &self.z
    }

    /// Number of observed transitions n (the series holds n + 1 totals).
    pub fn generations(&self) -> usize {
        self.z.len() - 1
    }

    pub fn first(&self) -> u64 {
        self.z[0]
    }

    pub fn last(&self) -> u64 {
        self.z[self.z.len() - 1]
    }

    /// Σ_{i<n} Z_i, the individuals whose offspring are recorded.
    pub fn total_parents(&self) -> u64 {
        self.z[..self.z.len() - 1].iter().sum()
    }

    /// Σ_{i≥1} Z_i.
    pub fn total_children(&self) -> u64 {
        self.z[1..].iter().sum()
    }

    /// Σ_{i=0}^{n} Z_i, every individual in the series.
    pub fn total_individuals(&self) -> u64 {
        self.z.iter().sum()
    }

    /// The first `len` totals (Z_0..Z_{len-1}).
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.z.len() {
            return Err(GwError::InvalidParameter(format!("prefix length {len} outside 1..={}", self.z.len())));
        }
        Ok(GenerationSeries { z: self.z[..len].to_vec() })
    }

    pub fn is_extinct(&self) -> bool {
        self.last() == 0
    }
}

/// Complete data: `rows[i][j]` = number of generation-i parents with j children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffspringCounts {
    rows: Vec<Vec<u64>>,
    width: usize,
}

impl OffspringCounts {
    /// Build from ragged rows; rows are zero-padded to a common width and
    /// trailing all-zero columns are dropped.
    pub fn new(rows: Vec<Vec<u64>>) -> Result<Self> {
        let mut width = rows.iter().map(|r| r.len()).max().unwrap_or(1).max(1);
        while width > 1 && rows.iter().all(|r| r.get(width - 1).copied().unwrap_or(0) == 0) {
            width -= 1;
        }
        let rows: Vec<Vec<u64>> = rows
            .into_iter()
            .map(|mut r| {
                r.resize(width, 0);
                r
            })
            .collect();
        for (i, pair) in rows.windows(2).enumerate() {
            let children: u64 = pair[0].iter().enumerate().map(|(j, c)| j as u64 * c).sum();
            let parents: u64 = pair[1].iter().sum();
            if children != parents {
                return Err(GwError::InvalidCounts(format!(
                    "generation {i} has {children} children but generation {} has {parents} parents",
                    i + 1
                )));
            }
        }
        if let Some(first) = rows.first() {
            if first.iter().sum::<u64>() == 0 {
                return Err(GwError::InvalidCounts("generation 0 has no parents".into()));
            }
        }
        Ok(OffspringCounts { rows, width })
    }

    /// No observations, support {0..k}.
    pub fn empty(k: usize) -> Self {
        OffspringCounts { rows: Vec::new(), width: k + 1 }
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    /// Largest offspring size represented in the rows.
    pub fn k(&self) -> usize {
        self.width - 1
    }

    /// Largest offspring size with a nonzero count.
    pub fn max_observed(&self) -> usize {
        (0..self.width).rev().find(|&j| self.rows.iter().any(|r| r[j] > 0)).unwrap_or(0)
    }

    /// Σ_i Z_ij for each j.
    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.width];
        for row in &self.rows {
            for (s, c) in sums.iter_mut().zip(row) {
                *s += c;
            }
        }
        sums
    }

    pub fn total_parents(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }

    pub fn total_children(&self) -> u64 {
        self.rows.iter().map(|r| r.iter().enumerate().map(|(j, c)| j as u64 * c).sum::<u64>()).sum()
    }

    /// Generation totals implied by the rows.
    pub fn collapse(&self) -> Result<GenerationSeries> {
        let Some(last) = self.rows.last() else {
            return Err(GwError::InvalidCounts("cannot collapse empty counts".into()));
        };
        let mut z: Vec<u64> = self.rows.iter().map(|r| r.iter().sum()).collect();
        z.push(last.iter().enumerate().map(|(j, c)| j as u64 * c).sum());
        GenerationSeries::new(z)
    }

    /// Elementwise sum of the column tallies of two datasets, as a single
    /// pseudo-generation (used for pooled posterior updates).
    pub fn pooled(parts: &[&OffspringCounts]) -> OffspringCounts {
        let width = parts.iter().map(|c| c.width).max().unwrap_or(1);
        let mut sums = vec![0u64; width];
        for part in parts {
            for (s, c) in sums.iter_mut().zip(part.column_sums()) {
                *s += c;
            }
        }
        OffspringCounts { rows: vec![sums], width }
    }
}

/// Simulate complete data with the default population cap.
pub fn simulate_complete(
    dist: &OffspringDistribution,
    z0: u64,
    max_generations: usize,
    seed: SeedSpec,
) -> Result<OffspringCounts> {
    simulate_complete_capped(dist, z0, max_generations, seed, DEFAULT_POPULATION_CAP)
}

/// Simulate up to `max_generations` parent generations, drawing one offspring
/// count per parent. Stops after the generation whose children total is 0.
pub fn simulate_complete_capped(
    dist: &OffspringDistribution,
    z0: u64,
    max_generations: usize,
    seed: SeedSpec,
    cap: u64,
) -> Result<OffspringCounts> {
    if z0 == 0 {
        return Err(GwError::InvalidParameter("z0 must be positive".into()));
    }
    if max_generations == 0 {
        return Err(GwError::InvalidParameter("max_generations must be positive".into()));
    }
    let mut rng = seed.rng();
    let mut rows = Vec::with_capacity(max_generations);
    let mut parents = z0;
    for generation in 0..max_generations {
        let mut row: Vec<u64> = Vec::new();
        let mut children = 0u64;
        for _ in 0..parents {
            let j = dist.sample(&mut rng) as usize;
            if j >= row.len() {
                row.resize(j + 1, 0);
            }
            row[j] += 1;
            children += j as u64;
        }
        rows.push(row);
        if children > cap {
            return Err(GwError::PopulationExplosion { generation: generation + 1, size: children, cap });
        }
        if children == 0 {
            break;
        }
        parents = children;
    }
    OffspringCounts::new(rows)
}

/// Write complete data as `generation,j0,...,jk`.
pub fn write_counts_csv<W: Write>(counts: &OffspringCounts, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["generation".to_string()];
    header.extend((0..=counts.k()).map(|j| format!("j{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, row) in counts.rows().iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write incomplete data as `generation,count`.
pub fn write_series_csv<W: Write>(series: &GenerationSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["generation", "count"]).map_err(csv_err)?;
    for (i, z) in series.sizes().iter().enumerate() {
        w.write_record([i.to_string(), z.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Either observation scheme, as read from a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observations {
    Complete(OffspringCounts),
    Incomplete(GenerationSeries),
}

impl Observations {
    pub fn series(&self) -> Result<GenerationSeries> {
        match self {
            Observations::Complete(c) => c.collapse(),
            Observations::Incomplete(s) => Ok(s.clone()),
        }
    }
}

/// Read either CSV format; the header decides which.
pub fn read_observations_csv<R: Read>(input: R) -> Result<Observations> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("generation") {
        return Err(input_err(1, "first column must be `generation`"));
    }
    let complete = header.len() >= 2 && header[1] == "j0";
    if !complete && header != ["generation", "count"] {
        return Err(input_err(1, "expected header `generation,count` or `generation,j0,...,jk`"));
    }
    if complete {
        for (j, name) in header[1..].iter().enumerate() {
            if *name != format!("j{j}") {
                return Err(input_err(1, &format!("column {} should be `j{j}`, found `{name}`", j + 2)));
            }
        }
    }
    let mut values: Vec<Vec<u64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(csv_err)?;
        let fields: Vec<u64> = record
            .iter()
            .map(|f| f.parse::<u64>().map_err(|_| input_err(line, &format!("`{f}` is not a nonnegative integer"))))
            .collect::<Result<_>>()?;
        if fields[0] as usize != idx {
            return Err(input_err(line, &format!("expected generation {idx}, found {}", fields[0])));
        }
        values.push(fields[1..].to_vec());
    }
    if complete {
        Ok(Observations::Complete(OffspringCounts::new(values)?))
    } else {
        Ok(Observations::Incomplete(GenerationSeries::new(values.into_iter().map(|v| v[0]).collect())?))
    }
}

fn csv_err(err: csv::Error) -> GwError {
    GwError::Input { context: "csv".into(), message: err.to_string() }
}

fn input_err(line: usize, message: &str) -> GwError {
    GwError::Input { context: format!("line {line}"), message: message.to_string() }
}
