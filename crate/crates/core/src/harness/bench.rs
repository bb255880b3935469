use rayon::prelude::*;
use serde::Serialize;

use super::estimator::{EstimatorConfig, KChoice};
use crate::error::{GwError, Result};
use crate::estimators::{AgnosticVariant, Classification, HeydeVariant};
use crate::gibbs::DEFAULT_K_TRUNC;
use crate::offspring::OffspringDistribution;
use crate::process::simulate_complete;
use crate::rng::SeedSpec;

const LANE_SIMULATE: u64 = 0;
const LANE_ESTIMATE: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub offspring: OffspringDistribution,
    pub z0: u64,
    /// Number of observed parent generations.
    pub generations: usize,
    pub replications: usize,
    pub known_k: bool,
    pub data_mode: DataMode,
    pub estimators: Vec<EstimatorConfig>,
}

impl Scenario {
    /// Scenario with the standard estimator set for its data mode and k knowledge.
    pub fn standard(name: &str, offspring: OffspringDistribution, known_k: bool, data_mode: DataMode) -> Self {
        let true_k = offspring.support_max().filter(|_| known_k);
        let improper = EstimatorConfig::Improper { variant: HeydeVariant::CumulativeParents };
        let estimators = match data_mode {
            DataMode::Complete => {
                let k = true_k.map_or(KChoice::SampleMax, KChoice::Known);
                let (dp1, dp100) = if known_k {
                    (EstimatorConfig::dp(1.0), EstimatorConfig::dp(100.0))
                } else {
                    (EstimatorConfig::dp_with_support(1.0), EstimatorConfig::dp_with_support(100.0))
                };
                vec![
                    EstimatorConfig::Mle,
                    improper,
                    EstimatorConfig::Dirichlet { k, variant: AgnosticVariant::A },
                    dp1,
                    dp100,
                ]
            }
            DataMode::Incomplete => {
                let k_trunc = true_k.unwrap_or(DEFAULT_K_TRUNC);
                vec![
                    EstimatorConfig::Mle,
                    improper,
                    EstimatorConfig::gibbs_dirichlet(k_trunc),
                    EstimatorConfig::gibbs_dp(1.0, k_trunc),
                ]
            }
        };
        Scenario {
            name: name.to_string(),
            offspring,
            z0: 1,
            generations: 10,
            replications: 500,
            known_k,
            data_mode,
            estimators,
        }
    }

    pub fn m_true(&self) -> f64 {
        self.offspring.mean()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.generations == 0 || self.z0 == 0 {
            return Err(GwError::InvalidParameter(format!(
                "scenario {} needs replications, generations and z0 of at least 1",
                self.name
            )));
        }
        if self.data_mode == DataMode::Incomplete {
            if let Some(e) = self.estimators.iter().find(|e| e.needs_complete_data()) {
                return Err(GwError::InvalidParameter(format!(
                    "scenario {} observes totals only but lists {}",
                    self.name,
                    e.name()
                )));
            }
        }
        self.offspring.validate()
    }
}

fn true_support_size(dist: &OffspringDistribution) -> Option<usize> {
    dist.support_max().map(|k| k + 1)
}

/// Built-in scenarios: finite-support laws with m ∈ {0.9, 1, 1.2, 1.5} and
/// Poisson laws with the same means, each with complete and incomplete data;
/// finite laws come with known and unknown k.
pub fn scenario_catalog() -> Vec<Scenario> {
    let finite = [
        ("0.9", vec![0.45, 0.3, 0.15, 0.1]),
        ("1.0", vec![0.4, 0.3, 0.2, 0.1]),
        ("1.2", vec![0.35, 0.25, 0.25, 0.15]),
        ("1.5", vec![0.25, 0.25, 0.25, 0.25]),
    ];
    let mut out = Vec::new();
    for (mode, mode_name) in [(DataMode::Complete, "complete"), (DataMode::Incomplete, "incomplete")] {
        for known in [true, false] {
            let k_name = if known { "known-k" } else { "unknown-k" };
            for (m, probs) in &finite {
                let dist = OffspringDistribution::finite(probs.clone()).expect("catalog pmf");
                out.push(Scenario::standard(&format!("finite-m{m}-{mode_name}-{k_name}"), dist, known, mode));
            }
        }
        for lambda in ["0.9", "1.0", "1.2", "1.5"] {
            let dist = OffspringDistribution::poisson(lambda.parse().unwrap()).expect("catalog rate");
            out.push(Scenario::standard(&format!("poisson-m{lambda}-{mode_name}"), dist, false, mode));
        }
    }
    out
}

pub fn scenario_by_name(name: &str) -> Result<Scenario> {
    scenario_catalog().into_iter().find(|s| s.name == name).ok_or_else(|| {
        let names: Vec<String> = scenario_catalog().into_iter().map(|s| s.name).collect();
        GwError::InvalidParameter(format!("unknown scenario {name:?}; known: {}", names.join(", ")))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub name: String,
    pub params: serde_json::Value,
    pub proportion_correct: f64,
    /// Standard deviation of the m estimate across replications.
    pub se_mhat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_correct: Option<f64>,
    pub failures: usize,
    /// Replications the estimator completed.
    pub completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub scenario: String,
    pub m_true: f64,
    pub replications: usize,
    pub seed: u64,
    pub data_mode: DataMode,
    pub known_k: bool,
    /// Replications whose simulation itself failed (population cap).
    pub simulation_failures: usize,
    pub estimators: Vec<EstimatorResult>,
}

impl BenchResult {
    pub fn estimator(&self, name: &str) -> Option<&EstimatorResult> {
        self.estimators.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    correct: u64,
    completed: u64,
    failures: u64,
    sum_m: f64,
    sum_m2: f64,
    support_known: u64,
    support_correct: u64,
}

type Replication = std::result::Result<Vec<Option<(bool, f64, Option<bool>)>>, ()>;

fn replicate(sc: &Scenario, seed: u64, r: usize, truth: Classification, support: Option<usize>) -> Replication {
    let base = SeedSpec::new(seed, r as u64);
    let counts = simulate_complete(&sc.offspring, sc.z0, sc.generations, base.lane(LANE_SIMULATE)).map_err(|_| ())?;
    let series = counts.collapse().map_err(|_| ())?;
    let complete = (sc.data_mode == DataMode::Complete).then_some(&counts);
    Ok(sc
        .estimators
        .iter()
        .enumerate()
        .map(|(e, est)| {
            let seed = base.lane(LANE_ESTIMATE + e as u64);
            est.estimate(&series, complete, seed).ok().map(|out| {
                let hit = out.summary.classification == truth;
                let support_hit = out.support_size.zip(support).map(|(a, b)| a == b);
                (hit, out.summary.m_hat, support_hit)
            })
        })
        .collect())
}

/// Run every replication of a scenario. Replication r draws from stream r of
/// `seed`; results do not depend on the thread count.
pub fn run_scenario(sc: &Scenario, seed: u64) -> Result<BenchResult> {
    run_scenario_with(sc, seed, true)
}

pub fn run_scenario_with(sc: &Scenario, seed: u64, parallel: bool) -> Result<BenchResult> {
    sc.validate()?;
    let truth = Classification::truth(sc.m_true());
    let support = true_support_size(&sc.offspring);
    let reps: Vec<Replication> = if parallel {
        (0..sc.replications).into_par_iter().map(|r| replicate(sc, seed, r, truth, support)).collect()
    } else {
        (0..sc.replications).map(|r| replicate(sc, seed, r, truth, support)).collect()
    };

    let mut tallies = vec![Tally::default(); sc.estimators.len()];
    let mut simulation_failures = 0;
    for rep in &reps {
        let Ok(outcomes) = rep else {
            simulation_failures += 1;
            continue;
        };
        for (t, outcome) in tallies.iter_mut().zip(outcomes) {
            match outcome {
                None => t.failures += 1,
                Some((hit, m, support_hit)) => {
                    t.completed += 1;
                    t.correct += *hit as u64;
                    t.sum_m += m;
                    t.sum_m2 += m * m;
                    if let Some(s) = support_hit {
                        t.support_known += 1;
                        t.support_correct += *s as u64;
                    }
                }
            }
        }
    }

    let estimators = sc
        .estimators
        .iter()
        .zip(&tallies)
        .map(|(est, t)| {
            let n = t.completed as f64;
            let se =
                if t.completed > 1 { ((t.sum_m2 - t.sum_m * t.sum_m / n) / (n - 1.0)).max(0.0).sqrt() } else { 0.0 };
            EstimatorResult {
                name: est.name(),
                params: est.params_json(),
                proportion_correct: if t.completed > 0 { t.correct as f64 / n } else { f64::NAN },
                se_mhat: se,
                support_correct: (t.support_known > 0).then(|| t.support_correct as f64 / t.support_known as f64),
                failures: t.failures as usize,
                completed: t.completed as usize,
            }
        })
        .collect();

    Ok(BenchResult {
        scenario: sc.name.clone(),
        m_true: sc.m_true(),
        replications: sc.replications,
        seed,
        data_mode: sc.data_mode,
        known_k: sc.known_k,
        simulation_failures,
        estimators,
    })
}
