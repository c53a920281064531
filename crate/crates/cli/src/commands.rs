//! One function per subcommand.

use std::path::{Path, PathBuf};

use clap::Args;
use depgrid_core::{
    compare, evaluate_policy, observed_rates, predict, tally, wrap, Config, DependabilityReport,
    MetricDeltas, PartitionGrid, Policy, PolicyKind, PredictOptions, SafetyFunction, Scenario,
    TestCampaign, TrialRecord,
};

use crate::io::{
    parse_jsonl, read_bytes, read_json, read_jsonl, sha256_hex, write_atomic, write_json,
    write_jsonl,
};
use crate::manifest::CampaignManifest;
use crate::svg::{comparison_chart, failure_scatter, FailurePoint};
use crate::{CliError, Result};

/// A config plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub path: Option<PathBuf>,
    pub sha256: String,
}

/// Loads `path`, or the built-in presets when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<LoadedConfig> {
    match path {
        Some(p) => {
            let bytes = read_bytes(p)?;
            let text = String::from_utf8(bytes).map_err(|e| CliError::Data {
                path: p.display().to_string(),
                message: format!("config is not UTF-8: {e}"),
            })?;
            Ok(LoadedConfig {
                config: Config::from_toml_str(&text)?,
                path: Some(p.to_path_buf()),
                sha256: sha256_hex(text.as_bytes()),
            })
        }
        None => {
            let config = Config::builtin();
            let text = config.to_toml_string()?;
            Ok(LoadedConfig {
                config,
                path: None,
                sha256: sha256_hex(text.as_bytes()),
            })
        }
    }
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "records".to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    /// Config file (TOML); built-in presets when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Condition set to sample from.
    #[arg(long, default_value = "testing")]
    pub condition: String,
    /// Number of scenarios.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// Seed; the config seed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output scenario file (JSON Lines, one array per line).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn sample(args: &SampleArgs) -> Result<usize> {
    let cfg = load_config(args.config.as_deref())?;
    let cond = cfg.config.condition(&args.condition)?;
    let scenarios = cond.sample(args.n, args.seed.unwrap_or(cfg.config.seed));
    write_jsonl(&args.out, &scenarios)?;
    Ok(scenarios.len())
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario file written by `sample`.
    #[arg(long, required_unless_present = "from_manifest")]
    pub scenarios: Option<PathBuf>,
    /// Policy name: scripted or always-forward.
    #[arg(long, default_value = "scripted")]
    pub policy: PolicyKind,
    /// Wrap the policy in the goal-clipping safety function.
    #[arg(long)]
    pub safety: bool,
    /// Safety margin below the policy's risk threshold.
    #[arg(long, requires = "safety")]
    pub safety_delta: Option<f64>,
    /// Explicit goal clip bound; overrides --safety-delta.
    #[arg(long, requires = "safety")]
    pub safety_clip_max: Option<f64>,
    /// Campaign master seed; the config seed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Condition label stored with the campaign; the scenario file name when
    /// omitted.
    #[arg(long)]
    pub condition: Option<String>,
    /// Re-run the campaign described by a manifest.
    #[arg(long, conflicts_with_all = ["config", "scenarios", "policy", "safety", "seed", "condition"])]
    pub from_manifest: Option<PathBuf>,
    /// Output record file (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path; `<out>.manifest.json` when omitted.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl RunArgs {
    pub fn new(scenarios: PathBuf, out: PathBuf) -> Self {
        Self {
            config: None,
            scenarios: Some(scenarios),
            policy: PolicyKind::Scripted,
            safety: false,
            safety_delta: None,
            safety_clip_max: None,
            seed: None,
            condition: None,
            from_manifest: None,
            out,
            manifest: None,
        }
    }
}

struct RunPlan {
    config: LoadedConfig,
    scenarios_path: PathBuf,
    condition: String,
    policy: PolicyKind,
    safety: Option<SafetyFunction>,
    master_seed: u64,
}

fn plan_from_args(args: &RunArgs) -> Result<RunPlan> {
    let config = load_config(args.config.as_deref())?;
    let scenarios_path = args
        .scenarios
        .clone()
        .ok_or_else(|| CliError::Usage("--scenarios is required".into()))?;
    let safety = if args.safety {
        let base = &config.config.safety;
        let sf = match (args.safety_clip_max, args.safety_delta) {
            (Some(clip), delta) => SafetyFunction {
                goal_clip_max: clip,
                delta: delta.unwrap_or(base.delta),
            },
            (None, Some(delta)) => {
                SafetyFunction::below_threshold(config.config.policy.risk_goal_threshold, delta)
            }
            (None, None) => *base,
        };
        sf.validate(config.config.env.robot_bounds[1])?;
        Some(sf)
    } else {
        None
    };
    Ok(RunPlan {
        condition: args
            .condition
            .clone()
            .unwrap_or_else(|| file_label(&scenarios_path)),
        master_seed: args.seed.unwrap_or(config.config.seed),
        policy: args.policy,
        scenarios_path,
        safety,
        config,
    })
}

fn plan_from_manifest(path: &Path) -> Result<RunPlan> {
    let m: CampaignManifest = read_json(path)?;
    let config = load_config(m.config_path.as_deref().map(Path::new))?;
    if config.sha256 != m.config_sha256 {
        return Err(CliError::Data {
            path: path.display().to_string(),
            message: format!(
                "config hash {} differs from manifest {}",
                config.sha256, m.config_sha256
            ),
        });
    }
    if config.config.policy != m.policy_params {
        return Err(CliError::Data {
            path: path.display().to_string(),
            message: "policy parameters differ from the config".into(),
        });
    }
    Ok(RunPlan {
        config,
        scenarios_path: PathBuf::from(&m.scenarios_path),
        condition: m.condition,
        policy: m.policy,
        safety: m.safety,
        master_seed: m.master_seed,
    })
}

/// Runs one episode per scenario and writes records plus a manifest.
pub fn run(args: &RunArgs) -> Result<CampaignManifest> {
    let plan = match &args.from_manifest {
        Some(m) => plan_from_manifest(m)?,
        None => plan_from_args(args)?,
    };
    let cfg = &plan.config.config;
    cfg.check_robot_domain()?;
    let scenario_bytes = read_bytes(&plan.scenarios_path)?;
    if let Some(m) = &args.from_manifest {
        let expected: CampaignManifest = read_json(m)?;
        let got = sha256_hex(&scenario_bytes);
        if got != expected.scenarios_sha256 {
            return Err(CliError::Data {
                path: plan.scenarios_path.display().to_string(),
                message: format!("scenario hash {got} differs from manifest"),
            });
        }
    }
    let scenarios: Vec<Scenario> = parse_jsonl(&plan.scenarios_path, &scenario_bytes)?;
    let space = cfg.space()?;
    for (i, x) in scenarios.iter().enumerate() {
        space.check(x).map_err(|e| CliError::DataLine {
            path: plan.scenarios_path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
    }

    let env = &cfg.env;
    let params = &cfg.policy;
    let kind = plan.policy;
    let safety = plan.safety;
    let make = || -> Box<dyn Policy> {
        let p = kind.build(params, env);
        match &safety {
            Some(sf) => Box::new(wrap(p, *sf)),
            None => p,
        }
    };
    let campaign = evaluate_policy(env, make, &plan.condition, &scenarios, plan.master_seed)?;
    let bytes = crate::io::to_jsonl(&campaign.records);
    write_atomic(&args.out, &bytes)?;

    let manifest = CampaignManifest {
        config_path: plan.config.path.as_ref().map(|p| p.display().to_string()),
        config_sha256: plan.config.sha256.clone(),
        condition: plan.condition.clone(),
        scenarios_path: plan.scenarios_path.display().to_string(),
        scenarios_sha256: sha256_hex(&scenario_bytes),
        policy: plan.policy,
        policy_params: params.clone(),
        safety: plan.safety,
        master_seed: plan.master_seed,
        record_count: campaign.records.len(),
        records_path: args.out.display().to_string(),
        records_sha256: sha256_hex(&bytes),
    };
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", args.out.display())));
    write_json(&manifest_path, &manifest)?;
    Ok(manifest)
}

/// Reads a record file into a campaign labelled `condition`.
pub fn load_campaign(path: &Path, condition: Option<&str>) -> Result<TestCampaign> {
    let records: Vec<TrialRecord> = read_jsonl(path)?;
    let campaign = TestCampaign::new(
        condition
            .map(str::to_string)
            .unwrap_or_else(|| file_label(path)),
        0,
        records,
    );
    campaign.validate(None).map_err(|e| CliError::Data {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(campaign)
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Test records from `run`.
    #[arg(long)]
    pub records: PathBuf,
    /// Bins per dimension, e.g. 10x10x10; the config grid when omitted.
    #[arg(long)]
    pub grid: Option<PartitionGrid>,
    /// Target operating condition.
    #[arg(long)]
    pub condition: String,
    /// Drop untested regions that carry target mass and renormalize.
    #[arg(long)]
    pub renormalize_empty: bool,
    /// Output report (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn predict_cmd(args: &PredictArgs) -> Result<DependabilityReport> {
    let cfg = load_config(args.config.as_deref())?.config;
    let target = cfg.condition(&args.condition)?;
    let partition = match &args.grid {
        Some(g) => depgrid_core::Partition::new(cfg.space()?, g.clone())
            .map_err(|e| CliError::Usage(format!("--grid {g}: {e}")))?,
        None => cfg.partition()?,
    };
    let campaign = load_campaign(&args.records, None)?;
    if campaign.records.is_empty() {
        return Err(CliError::Estimator(
            depgrid_core::EstimatorError::EmptyCampaign,
        ));
    }
    let tallies = tally(&campaign, &partition).map_err(|e| CliError::Data {
        path: args.records.display().to_string(),
        message: e.to_string(),
    })?;
    let report = predict(
        &tallies,
        &target,
        PredictOptions {
            renormalize_empty: args.renormalize_empty,
        },
    )?;
    write_json(&args.out, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct ObserveArgs {
    /// Records from `run`.
    #[arg(long)]
    pub records: PathBuf,
    /// Condition label for the report; the record file name when omitted.
    #[arg(long)]
    pub condition: Option<String>,
    /// Output report (JSON); printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn observe(args: &ObserveArgs) -> Result<DependabilityReport> {
    let campaign = load_campaign(&args.records, args.condition.as_deref())?;
    let report = observed_rates(&campaign)?;
    match &args.out {
        Some(out) => write_json(out, &report)?,
        None => print!(
            "{}",
            String::from_utf8_lossy(&crate::io::to_json_pretty(&report))
        ),
    }
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Predicted report.
    #[arg(long)]
    pub predicted: PathBuf,
    /// Observed report.
    #[arg(long)]
    pub observed: PathBuf,
    /// Output bar chart (SVG).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the deltas as JSON.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

pub fn delta_table(
    predicted: &DependabilityReport,
    observed: &DependabilityReport,
    d: &MetricDeltas,
) -> String {
    let rows = [
        (
            "dependability",
            predicted.dependability,
            observed.dependability,
            d.dependability,
        ),
        (
            "task_undependability",
            predicted.task_undependability,
            observed.task_undependability,
            d.task_undependability,
        ),
        (
            "harmful_undependability",
            predicted.harmful_undependability,
            observed.harmful_undependability,
            d.harmful_undependability,
        ),
    ];
    let mut s = format!(
        "{:<24} {:>10} {:>10} {:>10}\n",
        "metric", "predicted", "observed", "delta pts"
    );
    for (name, p, o, delta) in rows {
        s.push_str(&format!(
            "{name:<24} {:>9.2}% {:>9.2}% {delta:>+10.2}\n",
            p * 100.0,
            o * 100.0
        ));
    }
    s
}

pub fn compare_cmd(args: &CompareArgs) -> Result<MetricDeltas> {
    let predicted: DependabilityReport = read_json(&args.predicted)?;
    let observed: DependabilityReport = read_json(&args.observed)?;
    let deltas = compare(&predicted, &observed);
    print!("{}", delta_table(&predicted, &observed, &deltas));
    let title = format!("{}: predicted vs observed", predicted.condition);
    write_atomic(
        &args.out,
        comparison_chart(&title, &predicted.metrics(), &observed.metrics()).as_bytes(),
    )?;
    if let Some(t) = &args.table {
        write_json(t, &deltas)?;
    }
    Ok(deltas)
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Records from `run`.
    #[arg(long)]
    pub records: PathBuf,
    /// Two or three comma-separated dimension names.
    #[arg(long, default_value = "v,t,y")]
    pub dims: String,
    #[arg(long)]
    pub title: Option<String>,
    /// Output scatter plot (SVG).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn plot(args: &PlotArgs) -> Result<usize> {
    let cfg = load_config(args.config.as_deref())?.config;
    let space = cfg.space()?;
    let names: Vec<&str> = args.dims.split(',').map(str::trim).collect();
    if !(2..=3).contains(&names.len()) {
        return Err(CliError::Usage(format!(
            "--dims needs two or three names, got `{}`",
            args.dims
        )));
    }
    let idx = names
        .iter()
        .map(|n| {
            space
                .dim_index(n)
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let dims: Vec<_> = idx.iter().map(|&i| space.dims()[i].clone()).collect();
    let campaign = load_campaign(&args.records, None)?;
    let points: Vec<FailurePoint> = campaign
        .records
        .iter()
        .filter(|r| r.mode != depgrid_core::BehaviorMode::Success)
        .map(|r| FailurePoint {
            values: idx.iter().map(|&i| r.scenario.values()[i]).collect(),
            mode: r.mode,
        })
        .collect();
    let title = args
        .title
        .clone()
        .unwrap_or_else(|| format!("Observed failures: {}", campaign.condition_name));
    write_atomic(
        &args.out,
        failure_scatter(&title, &dims, &points).as_bytes(),
    )?;
    Ok(points.len())
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Write the built-in config here instead of printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn config_cmd(args: &ConfigArgs) -> Result<()> {
    let text = Config::builtin().to_toml_string()?;
    match &args.out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
