//! End-to-end pipeline: test campaign, predictions for every condition,
//! held-out observation campaigns, comparisons and a safety-function
//! campaign, all derived from one base seed.
//!
//! Layout of the output directory:
//!
//! ```text
//! config.toml
//! scenarios/{test,heldout_<cond>,safety}.jsonl
//! records/{test,heldout_<cond>,safety}.jsonl (+ .manifest.json)
//! reports/{observed_test,predicted_<cond>,observed_heldout_<cond>,observed_safety}.json
//! plots/{failures_test,failures_safety,compare_<cond>}.svg
//! summary.json, summary.md
//! ```

use std::fmt::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use depgrid_core::rng::derive_seed;
use depgrid_core::{compare, DependabilityReport, MetricDeltas, Metrics};
use serde::{Deserialize, Serialize};

use crate::commands::{
    self, load_config, CompareArgs, ObserveArgs, PlotArgs, PredictArgs, RunArgs, SampleArgs,
};
use crate::io::{write_atomic, write_json};
use crate::{CliError, Result};

/// Largest acceptable |predicted − observed| per metric, percentage points.
pub const PREDICTION_TOLERANCE_POINTS: f64 = 2.0;
/// The safety function must cut the harmful rate at least this much.
pub const SAFETY_REDUCTION_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Scenarios per campaign.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// Base seed; the config seed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Condition the policy is tested under.
    #[arg(long, default_value = "testing")]
    pub testing: String,
}

impl ReproduceArgs {
    pub fn new(out: PathBuf) -> Self {
        Self {
            config: None,
            out,
            n: 20_000,
            seed: None,
            testing: "testing".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: String,
    pub predicted: Metrics,
    pub observed: Metrics,
    pub deltas: MetricDeltas,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyResult {
    pub clip_max: f64,
    pub baseline: Metrics,
    pub wrapped: Metrics,
    /// Baseline harmful rate divided by the wrapped one; `None` when the
    /// wrapped rate is zero.
    pub harmful_reduction: Option<f64>,
    pub meets_reduction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub seed: u64,
    pub grid: String,
    pub testing_condition: String,
    pub testing_observed: Metrics,
    pub tolerance_points: f64,
    pub conditions: Vec<ConditionResult>,
    pub safety: SafetyResult,
}

impl Summary {
    pub fn to_markdown(&self) -> String {
        let pct = |x: f64| format!("{:.2}%", x * 100.0);
        let mut s = String::new();
        let _ = writeln!(s, "# Dependability summary\n");
        let _ = writeln!(
            s,
            "{} scenarios per campaign, base seed {}, grid {}.\n",
            self.n, self.seed, self.grid
        );
        let m = &self.testing_observed;
        let _ = writeln!(s, "## Testing conditions (`{}`)\n", self.testing_condition);
        let _ = writeln!(
            s,
            "| dependability | task undependability | harmful undependability |"
        );
        let _ = writeln!(s, "|---|---|---|");
        let _ = writeln!(
            s,
            "| {} | {} | {} |\n",
            pct(m.dependability),
            pct(m.task_undependability),
            pct(m.harmful_undependability)
        );
        let _ = writeln!(s, "## Predicted vs observed\n");
        let _ = writeln!(
            s,
            "| condition | D pred | D obs | ΔD | UT pred | UT obs | ΔUT | UH pred | UH obs | ΔUH | within ±{} pts |",
            self.tolerance_points
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|");
        for c in &self.conditions {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:+.2} | {} | {} | {:+.2} | {} | {} | {:+.2} | {} |",
                c.condition,
                pct(c.predicted.dependability),
                pct(c.observed.dependability),
                c.deltas.dependability,
                pct(c.predicted.task_undependability),
                pct(c.observed.task_undependability),
                c.deltas.task_undependability,
                pct(c.predicted.harmful_undependability),
                pct(c.observed.harmful_undependability),
                c.deltas.harmful_undependability,
                if c.within_tolerance { "yes" } else { "NO" }
            );
        }
        let sf = &self.safety;
        let _ = writeln!(
            s,
            "\n## Safety function (goal clipped to [0, {}])\n",
            sf.clip_max
        );
        let _ = writeln!(
            s,
            "| campaign | dependability | task undependability | harmful undependability |"
        );
        let _ = writeln!(s, "|---|---|---|---|");
        for (name, m) in [("without", &sf.baseline), ("with", &sf.wrapped)] {
            let _ = writeln!(
                s,
                "| {name} | {} | {} | {} |",
                pct(m.dependability),
                pct(m.task_undependability),
                pct(m.harmful_undependability)
            );
        }
        let factor = match sf.harmful_reduction {
            Some(f) => format!("{f:.1}x"),
            None => "all harmful failures removed".to_string(),
        };
        let _ = writeln!(
            s,
            "\nHarmful-rate reduction: {factor} (target ≥ {SAFETY_REDUCTION_FACTOR}x: {}).",
            if sf.meets_reduction { "met" } else { "NOT met" }
        );
        s
    }
}

fn stage(base: u64, k: u64) -> u64 {
    derive_seed(base, k)
}

fn within(d: &MetricDeltas) -> bool {
    d.max_abs() <= PREDICTION_TOLERANCE_POINTS
}

/// Samples, runs and observes one campaign; returns the observed report.
/// `seeds` are the sampling and run seeds.
fn campaign(
    dir: &Path,
    config: &Path,
    condition: &str,
    name: &str,
    n: usize,
    seeds: (u64, u64),
    safety: bool,
) -> Result<DependabilityReport> {
    let (sample_seed, run_seed) = seeds;
    let scenarios = dir.join("scenarios").join(format!("{name}.jsonl"));
    let records = dir.join("records").join(format!("{name}.jsonl"));
    commands::sample(&SampleArgs {
        config: Some(config.to_path_buf()),
        condition: condition.to_string(),
        n,
        seed: Some(sample_seed),
        out: scenarios.clone(),
    })?;
    let mut run = RunArgs::new(scenarios, records.clone());
    run.config = Some(config.to_path_buf());
    run.seed = Some(run_seed);
    run.condition = Some(condition.to_string());
    run.safety = safety;
    commands::run(&run)?;
    commands::observe(&ObserveArgs {
        records,
        condition: Some(condition.to_string()),
        out: Some(dir.join("reports").join(format!("observed_{name}.json"))),
    })
}

pub fn reproduce(args: &ReproduceArgs) -> Result<Summary> {
    let dir = &args.out;
    let loaded = load_config(args.config.as_deref())?;
    let cfg = &loaded.config;
    cfg.condition(&args.testing)?;
    let base = args.seed.unwrap_or(cfg.seed);
    let config_path = dir.join("config.toml");
    let text = match &loaded.path {
        Some(p) => crate::io::read_bytes(p)?,
        None => cfg.to_toml_string()?.into_bytes(),
    };
    write_atomic(&config_path, &text)?;

    let test_obs = campaign(
        dir,
        &config_path,
        &args.testing,
        "test",
        args.n,
        (stage(base, 0), stage(base, 1)),
        false,
    )?;
    let test_records = dir.join("records/test.jsonl");
    commands::plot(&PlotArgs {
        config: Some(config_path.clone()),
        records: test_records.clone(),
        dims: "v,t,y".into(),
        title: Some("Observed failures during testing".into()),
        out: dir.join("plots/failures_test.svg"),
    })?;

    let mut conditions = Vec::new();
    for (i, name) in cfg.condition_names().into_iter().enumerate() {
        let i = i as u64;
        let predicted_path = dir.join("reports").join(format!("predicted_{name}.json"));
        let predicted = commands::predict_cmd(&PredictArgs {
            config: Some(config_path.clone()),
            records: test_records.clone(),
            grid: None,
            condition: name.to_string(),
            renormalize_empty: false,
            out: predicted_path.clone(),
        })?;
        let heldout = format!("heldout_{name}");
        let observed = campaign(
            dir,
            &config_path,
            name,
            &heldout,
            args.n,
            (stage(base, 10 + 2 * i), stage(base, 11 + 2 * i)),
            false,
        )?;
        commands::compare_cmd(&CompareArgs {
            predicted: predicted_path,
            observed: dir.join("reports").join(format!("observed_{heldout}.json")),
            out: dir.join("plots").join(format!("compare_{name}.svg")),
            table: None,
        })?;
        let deltas = compare(&predicted, &observed);
        conditions.push(ConditionResult {
            condition: name.to_string(),
            predicted: predicted.metrics(),
            observed: observed.metrics(),
            within_tolerance: within(&deltas),
            deltas,
        });
    }

    let wrapped = campaign(
        dir,
        &config_path,
        &args.testing,
        "safety",
        args.n,
        (stage(base, 100), stage(base, 101)),
        true,
    )?;
    commands::plot(&PlotArgs {
        config: Some(config_path.clone()),
        records: dir.join("records/safety.jsonl"),
        dims: "v,t,y".into(),
        title: Some("Observed failures with the safety function".into()),
        out: dir.join("plots/failures_safety.svg"),
    })?;
    let baseline_h = test_obs.harmful_undependability;
    let wrapped_h = wrapped.harmful_undependability;
    let safety = SafetyResult {
        clip_max: cfg.safety.goal_clip_max,
        baseline: test_obs.metrics(),
        wrapped: wrapped.metrics(),
        harmful_reduction: (wrapped_h > 0.0).then(|| baseline_h / wrapped_h),
        meets_reduction: wrapped_h * SAFETY_REDUCTION_FACTOR <= baseline_h,
    };

    let summary = Summary {
        n: args.n,
        seed: base,
        grid: cfg.grid.to_string(),
        testing_condition: args.testing.clone(),
        testing_observed: test_obs.metrics(),
        tolerance_points: PREDICTION_TOLERANCE_POINTS,
        conditions,
        safety,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_atomic(&dir.join("summary.md"), summary.to_markdown().as_bytes())?;
    if summary.conditions.is_empty() {
        return Err(CliError::Usage("config defines no conditions".into()));
    }
    Ok(summary)
}
