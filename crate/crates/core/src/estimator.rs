//! Test tallies and dependability estimates.
//!
//! Test outcomes are counted per partition region. A prediction for a target
//! condition weights each region's observed mode rates by the region's
//! analytic probability mass under the target:
//!
//! ```text
//! D  = Σ_d p(r_d) · successes_d / N_d
//! UT = Σ_d p(r_d) · task_failures_d / N_d
//! UH = Σ_d p(r_d) · harmful_failures_d / N_d
//! ```
//!
//! Counts stay integral until report time.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DiscreteCondition, DomainError, MassModel, Partition, Region, Scenario};

/// Tolerance on the total target mass covered by a set of tallies.
const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("campaign has no records")]
    EmptyCampaign,
    #[error(
        "{} region(s) with positive target mass have no test samples (uncovered mass {uncovered_mass:.6}), first: {:?}",
        regions.len(),
        regions.first()
    )]
    EmptyPartition {
        regions: Vec<Vec<usize>>,
        uncovered_mass: f64,
    },
    #[error("no tested region carries target mass; nothing to renormalize")]
    NoCoveredMass,
    #[error(
        "tallies cover target mass {total_mass}, expected 1 (tallies must span the whole grid)"
    )]
    IncompleteTallies { total_mass: f64 },
    #[error("{missing} scenario(s) of the condition table have no outcome, first: {first:?}")]
    IncompleteOutcomes { missing: usize, first: Vec<f64> },
    #[error("record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Outcome class of one trial. Exactly one applies to every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorMode {
    Success,
    /// The task was not completed and no harm was done.
    TaskFailure,
    /// Harm was done, whether or not the task was completed.
    HarmfulFailure,
}

impl BehaviorMode {
    pub const ALL: [BehaviorMode; 3] = [
        BehaviorMode::Success,
        BehaviorMode::TaskFailure,
        BehaviorMode::HarmfulFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorMode::Success => "success",
            BehaviorMode::TaskFailure => "task_failure",
            BehaviorMode::HarmfulFailure => "harmful_failure",
        }
    }
}

/// Result of running a policy in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: Scenario,
    pub mode: BehaviorMode,
    pub seed: u64,
    pub steps: u32,
    pub final_position: f64,
    pub collision_time: Option<f64>,
}

impl TrialRecord {
    fn check(&self) -> Result<(), String> {
        let harmful = self.mode == BehaviorMode::HarmfulFailure;
        if harmful != self.collision_time.is_some() {
            return Err(format!(
                "mode {} inconsistent with collision_time {:?}",
                self.mode.as_str(),
                self.collision_time
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCampaign {
    pub condition_name: String,
    pub master_seed: u64,
    pub records: Vec<TrialRecord>,
}

impl TestCampaign {
    pub fn new(
        condition_name: impl Into<String>,
        master_seed: u64,
        records: Vec<TrialRecord>,
    ) -> Self {
        Self {
            condition_name: condition_name.into(),
            master_seed,
            records,
        }
    }

    /// Checks record consistency and, when a partition is given, that every
    /// scenario lies in its domain.
    pub fn validate(&self, partition: Option<&Partition>) -> Result<(), EstimatorError> {
        for (index, r) in self.records.iter().enumerate() {
            r.check()
                .map_err(|reason| EstimatorError::InvalidRecord { index, reason })?;
            if let Some(p) = partition {
                p.space()
                    .check(&r.scenario)
                    .map_err(|e| EstimatorError::InvalidRecord {
                        index,
                        reason: e.to_string(),
                    })?;
            }
        }
        Ok(())
    }
}

/// Integer outcome counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub success: u64,
    pub task_failure: u64,
    pub harmful: u64,
}

impl ModeCounts {
    pub fn add(&mut self, mode: BehaviorMode) {
        match mode {
            BehaviorMode::Success => self.success += 1,
            BehaviorMode::TaskFailure => self.task_failure += 1,
            BehaviorMode::HarmfulFailure => self.harmful += 1,
        }
    }

    pub fn get(&self, mode: BehaviorMode) -> u64 {
        match mode {
            BehaviorMode::Success => self.success,
            BehaviorMode::TaskFailure => self.task_failure,
            BehaviorMode::HarmfulFailure => self.harmful,
        }
    }

    pub fn total(&self) -> u64 {
        self.success + self.task_failure + self.harmful
    }

    pub fn merge(&mut self, other: &ModeCounts) {
        self.success += other.success;
        self.task_failure += other.task_failure;
        self.harmful += other.harmful;
    }

    /// Per-mode fractions, `None` when nothing was counted.
    pub fn rates(&self) -> Option<Metrics> {
        let n = self.total();
        (n > 0).then(|| {
            let n = n as f64;
            Metrics {
                dependability: self.success as f64 / n,
                task_undependability: self.task_failure as f64 / n,
                harmful_undependability: self.harmful as f64 / n,
            }
        })
    }
}

/// The three mutually exclusive outcome probabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub dependability: f64,
    pub task_undependability: f64,
    pub harmful_undependability: f64,
}

impl Metrics {
    pub fn sum(&self) -> f64 {
        self.dependability + self.task_undependability + self.harmful_undependability
    }

    fn scaled(&self, w: f64) -> Metrics {
        Metrics {
            dependability: self.dependability * w,
            task_undependability: self.task_undependability * w,
            harmful_undependability: self.harmful_undependability * w,
        }
    }

    fn accumulate(&mut self, other: &Metrics) {
        self.dependability += other.dependability;
        self.task_undependability += other.task_undependability;
        self.harmful_undependability += other.harmful_undependability;
    }
}

/// Test counts of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTally {
    pub region: Region,
    pub counts: ModeCounts,
}

impl PartitionTally {
    pub fn n_total(&self) -> u64 {
        self.counts.total()
    }

    /// Regions without samples cannot be used in a prediction.
    pub fn is_empty(&self) -> bool {
        self.n_total() == 0
    }
}

/// Flat per-region counts for a partition; a commutative monoid under
/// [`Tally::merge`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    counts: Vec<ModeCounts>,
}

impl Tally {
    pub fn empty(regions: usize) -> Self {
        Self {
            counts: vec![ModeCounts::default(); regions],
        }
    }

    pub fn add(&mut self, flat: usize, mode: BehaviorMode) {
        self.counts[flat].add(mode);
    }

    pub fn merge(mut self, other: &Tally) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.merge(b);
        }
        self
    }

    pub fn counts(&self) -> &[ModeCounts] {
        &self.counts
    }

    /// Sequential fold over records.
    pub fn sequential(records: &[TrialRecord], partition: &Partition) -> Result<Self, DomainError> {
        let mut t = Tally::empty(partition.region_count());
        for r in records {
            t.add(partition.locate_flat(&r.scenario)?, r.mode);
        }
        Ok(t)
    }

    /// Parallel fold over records; equal to [`Tally::sequential`].
    pub fn parallel(records: &[TrialRecord], partition: &Partition) -> Result<Self, DomainError> {
        let n = partition.region_count();
        records
            .par_iter()
            .try_fold(
                || Tally::empty(n),
                |mut acc, r| {
                    acc.add(partition.locate_flat(&r.scenario)?, r.mode);
                    Ok(acc)
                },
            )
            .try_reduce(|| Tally::empty(n), |a, b| Ok(a.merge(&b)))
    }

    pub fn into_partition_tallies(self, partition: &Partition) -> Vec<PartitionTally> {
        self.counts
            .into_iter()
            .enumerate()
            .map(|(flat, counts)| PartitionTally {
                region: partition.region_at(flat),
                counts,
            })
            .collect()
    }
}

/// One tally per region of `partition`, zero-count regions included.
pub fn tally(
    campaign: &TestCampaign,
    partition: &Partition,
) -> Result<Vec<PartitionTally>, EstimatorError> {
    Ok(Tally::parallel(&campaign.records, partition)?.into_partition_tallies(partition))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    /// Fractions of a campaign's own outcomes.
    Observed,
    /// Re-weighted from region tallies onto a target condition.
    Predicted,
    /// Exact expectation over a finite condition table.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBreakdown {
    pub region: Region,
    pub mass: f64,
    pub counts: ModeCounts,
    pub rates: Option<Metrics>,
}

/// Record of regions dropped from a prediction for lack of test samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Renormalization {
    pub dropped_regions: Vec<Vec<usize>>,
    pub dropped_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependabilityReport {
    pub kind: ReportKind,
    pub condition: String,
    pub dependability: f64,
    pub task_undependability: f64,
    pub harmful_undependability: f64,
    pub n_records: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_region: Vec<RegionBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renormalization: Option<Renormalization>,
}

impl DependabilityReport {
    fn from_metrics(kind: ReportKind, condition: &str, m: Metrics, n_records: u64) -> Self {
        Self {
            kind,
            condition: condition.to_string(),
            dependability: m.dependability,
            task_undependability: m.task_undependability,
            harmful_undependability: m.harmful_undependability,
            n_records,
            per_region: Vec::new(),
            renormalization: None,
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            dependability: self.dependability,
            task_undependability: self.task_undependability,
            harmful_undependability: self.harmful_undependability,
        }
    }
}

/// Fractions of successes, task failures and harmful failures among the
/// campaign's own records.
pub fn observed_rates(campaign: &TestCampaign) -> Result<DependabilityReport, EstimatorError> {
    let mut counts = ModeCounts::default();
    for r in &campaign.records {
        counts.add(r.mode);
    }
    let rates = counts.rates().ok_or(EstimatorError::EmptyCampaign)?;
    Ok(DependabilityReport::from_metrics(
        ReportKind::Observed,
        &campaign.condition_name,
        rates,
        counts.total(),
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PredictOptions {
    /// Drop positive-mass regions without samples and renormalize the
    /// remaining mass instead of failing.
    pub renormalize_empty: bool,
}

/// Re-weights region tallies onto `target`.
///
/// Every region with positive target mass must have been tested; otherwise
/// the call fails with [`EstimatorError::EmptyPartition`] listing all such
/// regions, unless `opts.renormalize_empty` is set. Untested regions with
/// zero target mass never matter.
pub fn predict(
    tallies: &[PartitionTally],
    target: &impl MassModel,
    opts: PredictOptions,
) -> Result<DependabilityReport, EstimatorError> {
    let masses: Vec<f64> = tallies
        .iter()
        .map(|t| target.region_mass(&t.region))
        .collect();
    let total_mass: f64 = masses.iter().sum();
    if (total_mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(EstimatorError::IncompleteTallies { total_mass });
    }

    let mut dropped = Vec::new();
    let mut dropped_mass = 0.0;
    for (t, &m) in tallies.iter().zip(&masses) {
        if m > 0.0 && t.is_empty() {
            dropped.push(t.region.index.clone());
            dropped_mass += m;
        }
    }
    if !dropped.is_empty() && !opts.renormalize_empty {
        return Err(EstimatorError::EmptyPartition {
            regions: dropped,
            uncovered_mass: dropped_mass,
        });
    }

    let mut metrics = Metrics::default();
    let mut covered_mass = 0.0;
    let mut n_records = 0;
    let mut per_region = Vec::with_capacity(tallies.len());
    for (t, &m) in tallies.iter().zip(&masses) {
        let rates = t.counts.rates();
        if let Some(r) = &rates {
            metrics.accumulate(&r.scaled(m));
            covered_mass += m;
        }
        n_records += t.n_total();
        per_region.push(RegionBreakdown {
            region: t.region.clone(),
            mass: m,
            counts: t.counts,
            rates,
        });
    }

    let renormalization = if dropped.is_empty() {
        None
    } else {
        if covered_mass <= 0.0 {
            return Err(EstimatorError::NoCoveredMass);
        }
        metrics = metrics.scaled(1.0 / covered_mass);
        Some(Renormalization {
            dropped_regions: dropped,
            dropped_mass,
        })
    };

    let mut report =
        DependabilityReport::from_metrics(ReportKind::Predicted, target.name(), metrics, n_records);
    report.per_region = per_region;
    report.renormalization = renormalization;
    Ok(report)
}

/// Exact expectation of the three mode indicators over a finite table.
pub fn brute_force_dependability(
    outcomes: &[(Scenario, BehaviorMode)],
    cond: &DiscreteCondition,
) -> Result<DependabilityReport, EstimatorError> {
    let lookup: HashMap<Vec<u64>, BehaviorMode> =
        outcomes.iter().map(|(x, m)| (x.key(), *m)).collect();
    let mut metrics = Metrics::default();
    let mut missing = Vec::new();
    for (x, p) in cond.points() {
        match lookup.get(&x.key()) {
            Some(BehaviorMode::Success) => metrics.dependability += p,
            Some(BehaviorMode::TaskFailure) => metrics.task_undependability += p,
            Some(BehaviorMode::HarmfulFailure) => metrics.harmful_undependability += p,
            None => missing.push(x),
        }
    }
    if let Some(first) = missing.first() {
        return Err(EstimatorError::IncompleteOutcomes {
            missing: missing.len(),
            first: first.0.clone(),
        });
    }
    Ok(DependabilityReport::from_metrics(
        ReportKind::Exact,
        cond.name(),
        metrics,
        cond.points().len() as u64,
    ))
}

/// Signed `predicted − observed` differences in percentage points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub dependability: f64,
    pub task_undependability: f64,
    pub harmful_undependability: f64,
}

impl MetricDeltas {
    pub fn max_abs(&self) -> f64 {
        self.dependability
            .abs()
            .max(self.task_undependability.abs())
            .max(self.harmful_undependability.abs())
    }
}

pub fn compare(predicted: &DependabilityReport, observed: &DependabilityReport) -> MetricDeltas {
    MetricDeltas {
        dependability: (predicted.dependability - observed.dependability) * 100.0,
        task_undependability: (predicted.task_undependability - observed.task_undependability)
            * 100.0,
        harmful_undependability: (predicted.harmful_undependability
            - observed.harmful_undependability)
            * 100.0,
    }
}
