use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{CidError, Result};
use crate::incentives::{ability_to_influence, control_incentive, self_fulfilling_diagnostic};
use crate::inference::{d_separated, mediates};
use crate::model::{CidModel, EdgeKind};
use crate::solve::check_sufficient_recall;

/// Expected structure of a zoo entry built with `params`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub params: ManifestParams,
    pub agents: Vec<String>,
    pub nodes: Vec<ManifestNode>,
    pub edges: Vec<ManifestEdge>,
    #[serde(default)]
    pub properties: Vec<Property>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestParams {
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestNode {
    pub name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(default)]
    pub world: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestEdge {
    pub from: String,
    pub to: String,
    pub link: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Property {
    Mediates {
        source: String,
        target: String,
        via: Vec<String>,
        expected: bool,
    },
    DirectEdge {
        from: String,
        to: String,
        expected: bool,
    },
    ControlIncentive {
        decision: String,
        subject: String,
        expected: bool,
    },
    Ability {
        decision: String,
        subject: String,
        expected: bool,
    },
    SufficientRecall {
        agent: String,
        expected: bool,
    },
    SelfFulfilling {
        decision: String,
        flagged: Vec<String>,
    },
    /// Every utility reads only its owner's decisions and their observations.
    LocalUtilities {
        expected: bool,
    },
    DSeparated {
        x: Vec<String>,
        y: Vec<String>,
        given: Vec<String>,
        expected: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub property: Property,
    pub ok: bool,
    pub actual: String,
}

macro_rules! manifests {
    ($($name:literal),* $(,)?) => {
        fn source(name: &str) -> Option<&'static str> {
            match name {
                $($name => Some(include_str!(concat!("manifests/", $name, ".json"))),)*
                _ => None,
            }
        }
    };
}

manifests!(
    "rl_mdp",
    "rl_unknown_mdp",
    "rl_pomdp",
    "modifiable_rf",
    "current_rf",
    "reward_modeling",
    "cirl",
    "supervised_learning",
    "self_fulfilling",
    "counterfactual_oracle",
    "debate",
    "debate_blind",
    "ida",
    "cais",
);

pub fn manifest(name: &str) -> Result<Manifest> {
    let text = source(name).ok_or_else(|| CidError::Zoo(format!("unknown model `{name}`")))?;
    serde_json::from_str(text).map_err(|e| CidError::Zoo(format!("manifest `{name}`: {e}")))
}

impl Manifest {
    /// Differences between the manifest and `model`; empty when they agree.
    pub fn diff(&self, model: &CidModel) -> Vec<String> {
        let mut out = Vec::new();
        let agents: Vec<String> = model.agents().iter().map(|a| a.to_string()).collect();
        if agents != self.agents {
            out.push(format!("agents {:?} != {:?}", agents, self.agents));
        }
        let built: BTreeSet<ManifestNode> = model
            .nodes()
            .iter()
            .map(|n| ManifestNode {
                name: n.id().to_string(),
                kind: n.kind().keyword().to_string(),
                agent: n.kind().owner().map(|a| a.to_string()),
                world: n.is_world(),
            })
            .collect();
        let expected: BTreeSet<ManifestNode> = self.nodes.iter().cloned().collect();
        for n in built.difference(&expected) {
            out.push(format!("unexpected node {n:?}"));
        }
        for n in expected.difference(&built) {
            out.push(format!("missing node {n:?}"));
        }
        let built: BTreeSet<ManifestEdge> = model
            .edges()
            .into_iter()
            .map(|e| ManifestEdge { from: e.from.to_string(), to: e.to.to_string(), link: e.kind })
            .collect();
        let expected: BTreeSet<ManifestEdge> = self.edges.iter().cloned().collect();
        for e in built.difference(&expected) {
            out.push(format!("unexpected edge {} -> {} ({:?})", e.from, e.to, e.link));
        }
        for e in expected.difference(&built) {
            out.push(format!("missing edge {} -> {} ({:?})", e.from, e.to, e.link));
        }
        out
    }
}

fn local_utilities(model: &CidModel) -> bool {
    model.nodes().iter().enumerate().filter(|(_, n)| n.kind().is_utility()).all(|(u, n)| {
        let owner = n.kind().owner().expect("utilities have owners").as_str();
        let mut allowed = BTreeSet::new();
        for d in model.decisions_of(owner) {
            allowed.insert(d);
            allowed.extend(model.parent_indices(d).iter().copied());
        }
        model.parent_indices(u).iter().all(|p| allowed.contains(p))
    })
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn check(model: &CidModel, p: &Property) -> Result<(bool, String)> {
    let pair = |actual: bool, expected: bool| (actual == expected, actual.to_string());
    Ok(match p {
        Property::Mediates { source, target, via, expected } => {
            pair(mediates(model, source, target, &strs(via))?, *expected)
        }
        Property::DirectEdge { from, to, expected } => {
            model.index_of(from)?;
            let present = model.parents(to)?.iter().any(|q| q.as_str() == from);
            pair(present, *expected)
        }
        Property::ControlIncentive { decision, subject, expected } => {
            pair(control_incentive(model, decision, subject)?.present, *expected)
        }
        Property::Ability { decision, subject, expected } => {
            pair(ability_to_influence(model, decision, subject)?.present, *expected)
        }
        Property::SufficientRecall { agent, expected } => pair(check_sufficient_recall(model, agent)?.ok, *expected),
        Property::SelfFulfilling { decision, flagged } => {
            let got: Vec<String> = self_fulfilling_diagnostic(model, decision)?
                .flagged
                .into_iter()
                .map(|f| f.subject.to_string())
                .collect();
            (&got == flagged, format!("{got:?}"))
        }
        Property::LocalUtilities { expected } => pair(local_utilities(model), *expected),
        Property::DSeparated { x, y, given, expected } => {
            pair(d_separated(model, &strs(x), &strs(y), &strs(given))?, *expected)
        }
    })
}

/// Evaluate every shipped property assertion against `model`.
pub fn check_properties(model: &CidModel, manifest: &Manifest) -> Result<Vec<PropertyCheck>> {
    manifest
        .properties
        .iter()
        .map(|p| {
            let (ok, actual) = check(model, p)?;
            Ok(PropertyCheck { property: p.clone(), ok, actual })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{build, list, ZooParams};

    #[test]
    fn manifests_match_default_builds() {
        for e in list() {
            let m = manifest(e.name).unwrap();
            assert_eq!(m.name, e.name);
            assert_eq!(m.params.horizon, e.default_horizon, "{}", e.name);
            let model = build(e.name, &ZooParams::horizon(m.params.horizon)).unwrap();
            assert_eq!(m.diff(&model), Vec::<String>::new(), "{}", e.name);
            for c in check_properties(&model, &m).unwrap() {
                assert!(c.ok, "{}: {:?} gave {}", e.name, c.property, c.actual);
            }
        }
    }

    #[test]
    fn diff_reports_a_missing_edge() {
        let mut m = manifest("rl_mdp").unwrap();
        m.edges.pop();
        let model = build("rl_mdp", &ZooParams::default()).unwrap();
        assert_eq!(m.diff(&model).len(), 1);
    }
}
