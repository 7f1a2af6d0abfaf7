//! Result documents (TOML) and chain traces (JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HfdpError, Result};
use crate::metrics::{fairness_report, FairnessReport, DEFAULT_CLUSTER_CAP};
use crate::model::dataset::LabeledDataset;
use crate::model::state::HfdpConfig;
use crate::sampler::{ChainTrace, McemResult};
use crate::summarize::{cluster_count_posterior, dahl_least_squares, map_by_fair_score, modal_cluster_count, MapOutcome};

/// Fairness of one assignment. Empty clusters carry a NaN balance because
/// TOML arrays cannot hold missing values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportedFairness {
    pub balance: f64,
    pub mi: f64,
    pub epsilon: f64,
    pub epsilon_ok: bool,
    pub fair_score: f64,
    pub cluster_balance: Vec<f64>,
}

impl From<FairnessReport> for ReportedFairness {
    fn from(r: FairnessReport) -> Self {
        Self {
            balance: r.balance,
            mi: r.mi,
            epsilon: r.epsilon,
            epsilon_ok: r.epsilon_ok,
            fair_score: r.fair_score,
            cluster_balance: r.cluster_balance.into_iter().map(|b| b.unwrap_or(f64::NAN)).collect(),
        }
    }
}

impl ReportedFairness {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HfdpError::Internal(format!("cannot serialize report: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub version: String,
    pub mode: String,
    pub seed: u64,
    /// Input path or generator design.
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub k: usize,
    pub g: f64,
    pub b: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub wrla_steps: Option<usize>,
    pub p_acc: Option<f64>,
}

impl ConfigEcho {
    pub fn new(config: &HfdpConfig, p_acc: Option<f64>) -> Self {
        let c = &config.chain;
        Self {
            k: config.k,
            g: config.g,
            b: config.b,
            epsilon: config.epsilon,
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            wrla_steps: c.wrla_steps,
            p_acc,
        }
    }
}

/// Maps a level index back to the value found in the input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub index: usize,
    pub name: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSummary {
    /// `dahl`, `map` or `mcem`.
    pub estimator: String,
    pub sample_index: Option<usize>,
    pub occupancy: Vec<usize>,
    pub effective_clusters: usize,
    pub fairness: ReportedFairness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountEntry {
    pub clusters: usize,
    pub samples: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub sample_index: usize,
    pub fair_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub samples: usize,
    pub alpha_acceptance: f64,
    pub modal_cluster_count: usize,
    pub dahl_index: usize,
    /// Absent when no stored sample is ε-balanced.
    pub map: Option<MapEntry>,
    pub cluster_count: Vec<CountEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McemSummary {
    pub iterations: usize,
    pub converged: bool,
    pub log_marginal: Vec<f64>,
}

/// Everything `fit` and `summarize` write about a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub run: RunInfo,
    pub config: ConfigEcho,
    pub levels: Vec<LevelEntry>,
    pub assignment: AssignmentSummary,
    pub posterior: Option<PosteriorSummary>,
    pub mcem: Option<McemSummary>,
}

impl ResultDocument {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HfdpError::Internal(format!("cannot serialize result: {e}")))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| HfdpError::Data { line: None, message: e.to_string() })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// What `summarize` writes for a stored trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummaryDocument {
    pub trace: String,
    pub levels: Vec<LevelEntry>,
    pub assignment: AssignmentSummary,
    pub posterior: PosteriorSummary,
}

impl TraceSummaryDocument {
    pub fn write(&self, path: &Path) -> Result<()> {
        let s = toml::to_string(self).map_err(|e| HfdpError::Internal(format!("cannot serialize summary: {e}")))?;
        std::fs::write(path, s)?;
        Ok(())
    }
}

pub fn level_entries(dataset: &LabeledDataset<f64>, names: &[String]) -> Vec<LevelEntry> {
    let sizes = dataset.sizes();
    names.iter().enumerate().map(|(index, name)| LevelEntry { index, name: name.clone(), count: sizes[index] }).collect()
}

/// Occupancy, effective cluster count and fairness of an assignment on `k` clusters.
pub fn summarize_assignment(
    estimator: &str,
    sample_index: Option<usize>,
    assignment: &[usize],
    k: usize,
    dataset: &LabeledDataset<f64>,
    epsilon: f64,
) -> Result<AssignmentSummary> {
    let mut occupancy = vec![0; k.max(assignment.iter().max().map_or(0, |m| m + 1))];
    for &c in assignment {
        occupancy[c] += 1;
    }
    let report = fairness_report(assignment, dataset, epsilon, DEFAULT_CLUSTER_CAP)?;
    Ok(AssignmentSummary {
        estimator: estimator.to_string(),
        sample_index,
        effective_clusters: occupancy.iter().filter(|&&n| n > 0).count(),
        occupancy,
        fairness: report.into(),
    })
}

/// Posterior summary of a trace together with the Dahl point estimate.
pub fn summarize_trace(
    trace: &ChainTrace,
    dataset: &LabeledDataset<f64>,
    epsilon: f64,
) -> Result<(PosteriorSummary, AssignmentSummary, Vec<usize>)> {
    let posterior = cluster_count_posterior(trace)?;
    let modal = modal_cluster_count(&posterior).ok_or_else(|| HfdpError::InvalidInput("trace holds no samples".into()))?;
    let (dahl, sample) = dahl_least_squares(trace)?;
    let map = match map_by_fair_score(trace, dataset, epsilon)? {
        MapOutcome::Found { index, score } => Some(MapEntry { sample_index: index, fair_score: score }),
        MapOutcome::NoFeasibleSample => None,
    };
    let n = trace.len();
    let cluster_count = posterior
        .iter()
        .map(|(&clusters, p)| CountEntry { clusters, samples: p.numer() * (n / p.denom()), probability: *p.numer() as f64 / *p.denom() as f64 })
        .collect();
    let summary = PosteriorSummary {
        samples: n,
        alpha_acceptance: trace.alpha_acceptance,
        modal_cluster_count: modal,
        dahl_index: dahl,
        map,
        cluster_count,
    };
    let assignment = summarize_assignment("dahl", Some(dahl), &sample.assignment, sample.state.k(), dataset, epsilon)?;
    Ok((summary, assignment, sample.assignment.clone()))
}

pub fn summarize_mcem(result: &McemResult) -> McemSummary {
    McemSummary { iterations: result.iterations, converged: result.converged, log_marginal: result.log_marginal.clone() }
}

pub fn write_trace(path: &Path, trace: &ChainTrace) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(f, trace).map_err(|e| HfdpError::Internal(format!("cannot serialize trace: {e}")))
}

pub fn read_trace(path: &Path) -> Result<ChainTrace> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    serde_json::from_reader(f).map_err(|e| HfdpError::Data { line: Some(e.line()), message: e.to_string() })
}
