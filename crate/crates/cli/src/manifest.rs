//! Campaign manifests: everything needed, together with the config file, to
//! regenerate a record file bit for bit.

use serde::{Deserialize, Serialize};

use depgrid_core::{PolicyKind, SafetyFunction, ScriptedPolicyParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    /// Config file the campaign ran with; `None` for the built-in presets.
    pub config_path: Option<String>,
    /// SHA-256 of the config text (the serialized presets when built in).
    pub config_sha256: String,
    pub condition: String,
    pub scenarios_path: String,
    pub scenarios_sha256: String,
    pub policy: PolicyKind,
    pub policy_params: ScriptedPolicyParams,
    /// Safety function settings, when one wrapped the policy.
    pub safety: Option<SafetyFunction>,
    pub master_seed: u64,
    pub record_count: usize,
    pub records_path: String,
    pub records_sha256: String,
}
