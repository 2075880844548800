//! Catalogue of AI-safety framework models with structural manifests.

mod builders;
mod manifest;
mod wireheading;

use serde::Serialize;

use crate::error::{CidError, Result};
use crate::model::CidModel;

pub use manifest::{check_properties, manifest, Manifest, ManifestEdge, ManifestNode, Property, PropertyCheck};
pub use wireheading::{wireheading_experiment, WireheadingArm, WireheadingParams, WireheadingReport};

pub const MAX_HORIZON: usize = 4;
pub const MAX_DOMAIN: usize = 4;

/// Builder parameters; `None` selects the entry's default.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ZooParams {
    /// Time steps, or debate rounds.
    pub horizon: Option<usize>,
    /// State-space size for the entries with an abstract state.
    pub domain: Option<usize>,
    pub preset: Option<String>,
}

impl ZooParams {
    pub fn horizon(h: usize) -> Self {
        ZooParams { horizon: Some(h), ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ZooEntry {
    pub name: &'static str,
    pub title: &'static str,
    pub default_horizon: usize,
    /// Whether `horizon` changes the model.
    pub uses_horizon: bool,
    /// Whether `domain` changes the model.
    pub uses_domain: bool,
    pub presets: &'static [&'static str],
}

const fn entry(
    name: &'static str,
    title: &'static str,
    default_horizon: usize,
    uses_horizon: bool,
    uses_domain: bool,
    presets: &'static [&'static str],
) -> ZooEntry {
    ZooEntry { name, title, default_horizon, uses_horizon, uses_domain, presets }
}

const ENTRIES: [ZooEntry; 14] = [
    entry("rl_mdp", "RL in an MDP", 3, true, true, &[]),
    entry("rl_unknown_mdp", "RL in an Unknown MDP", 3, true, true, &[]),
    entry("rl_pomdp", "RL in a POMDP", 3, true, true, &["folded"]),
    entry("modifiable_rf", "RL in an MDP with a Modifiable Reward Function", 3, true, false, &["inert_tamper"]),
    entry("current_rf", "Current-RF Optimization", 3, true, false, &["inert_tamper"]),
    entry("reward_modeling", "Reward Modeling", 3, true, true, &["with_theta_t"]),
    entry("cirl", "CIRL", 3, true, true, &[]),
    entry("supervised_learning", "Supervised Learning", 1, false, false, &[]),
    entry("self_fulfilling", "Supervised Learning with Self-Fulfilling Prophecies", 1, false, false, &[]),
    entry("counterfactual_oracle", "Counterfactual Oracle", 1, false, false, &[]),
    entry("debate", "Debate", 2, true, false, &["constant_judge"]),
    entry("debate_blind", "Debate without cross-observation (matching pennies)", 1, true, false, &[]),
    entry("ida", "Supervised IDA", 1, false, false, &[]),
    entry("cais", "Comprehensive AI Services", 1, false, false, &[]),
];

/// All entries in catalogue order.
pub fn list() -> Vec<ZooEntry> {
    ENTRIES.to_vec()
}

pub fn entry_named(name: &str) -> Result<ZooEntry> {
    ENTRIES.iter().find(|e| e.name == name).cloned().ok_or_else(|| CidError::Zoo(format!("unknown model `{name}`")))
}

pub fn build(name: &str, params: &ZooParams) -> Result<CidModel> {
    let e = entry_named(name)?;
    let h = params.horizon.unwrap_or(e.default_horizon);
    if h == 0 || h > MAX_HORIZON {
        return Err(CidError::Zoo(format!("horizon {h} outside 1..={MAX_HORIZON}")));
    }
    let n = params.domain.unwrap_or(2);
    if n == 0 || n > MAX_DOMAIN {
        return Err(CidError::Zoo(format!("domain size {n} outside 1..={MAX_DOMAIN}")));
    }
    let preset = params.preset.as_deref();
    if let Some(p) = preset {
        if !e.presets.contains(&p) {
            return Err(CidError::Zoo(format!("`{name}` has no preset `{p}`")));
        }
    }
    let on = |p: &str| preset == Some(p);
    match name {
        "rl_mdp" => builders::rl_mdp(h, n),
        "rl_unknown_mdp" => builders::rl_unknown_mdp(h, n),
        "rl_pomdp" => builders::rl_pomdp(h, n, on("folded")),
        "modifiable_rf" => builders::reward_tampering(h, false, on("inert_tamper")),
        "current_rf" => builders::reward_tampering(h, true, on("inert_tamper")),
        "reward_modeling" => builders::reward_modeling(h, n, on("with_theta_t")),
        "cirl" => builders::cirl(h, n),
        "supervised_learning" => builders::supervised_learning(),
        "self_fulfilling" => builders::self_fulfilling(),
        "counterfactual_oracle" => builders::counterfactual_oracle(),
        "debate" => builders::debate(h, on("constant_judge")),
        "debate_blind" => builders::debate_blind(h),
        "ida" => builders::ida(),
        "cais" => builders::cais(),
        _ => unreachable!("catalogue and builders agree"),
    }
}
