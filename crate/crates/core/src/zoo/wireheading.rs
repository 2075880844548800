use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::limits::Limits;
use crate::policy::PolicyProfile;
use crate::solve::{solve_single_agent_with, Method};

use super::builders::reward_tampering;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireheadingParams {
    pub horizon: usize,
    /// Tampering leaves the reward parameter unchanged.
    pub inert_tamper: bool,
}

impl Default for WireheadingParams {
    fn default() -> Self {
        WireheadingParams { horizon: 3, inert_tamper: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WireheadingArm {
    pub model: String,
    pub value: f64,
    /// Optimal first action for each initial state, with the reward parameter intact.
    pub first_action: BTreeMap<String, String>,
    pub tampers: bool,
    pub explored: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WireheadingReport {
    pub modifiable: WireheadingArm,
    pub current: WireheadingArm,
}

fn arm(params: &WireheadingParams, current: bool) -> Result<WireheadingArm> {
    let model = reward_tampering(params.horizon.max(2), current, params.inert_tamper)?;
    let solved =
        solve_single_agent_with(&model, "agent", Method::Exhaustive, &PolicyProfile::new(), &Limits::from_env())?;
    let rule = solved.profile.get("A_1").and_then(|r| r.actions()).expect("pure optimal rule for A_1");
    // A_1 observes (S_1, Theta_R_1); Theta_R_1 = true is outcome 0 of 2
    let actions = model.outcomes(model.index_of("A_1")?);
    let mut first_action = BTreeMap::new();
    for (s, label) in model.outcomes(model.index_of("S_1")?).into_iter().enumerate() {
        first_action.insert(label, actions[rule[s * 2]].clone());
    }
    Ok(WireheadingArm {
        model: if current { "current_rf" } else { "modifiable_rf" }.into(),
        value: solved.value["agent"],
        tampers: first_action.values().any(|a| a == "tamper"),
        first_action,
        explored: solved.explored,
    })
}

/// Solve the tampering toy under a modifiable and a current reward function.
/// Horizons below 2 are raised to 2 so that there is an action to compare.
pub fn wireheading_experiment(params: &WireheadingParams) -> Result<WireheadingReport> {
    Ok(WireheadingReport { modifiable: arm(params, false)?, current: arm(params, true)? })
}
