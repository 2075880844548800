//! Graphical incentive analysis and value of information.

use std::collections::VecDeque;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CidError, Result};
use crate::inference::{active_path_idx, d_separated_idx};
use crate::limits::Limits;
use crate::model::{CidModel, NodeId};
use crate::policy::PolicyProfile;
use crate::solve::{solve_single_agent_with, Method};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FindingKind {
    Ability,
    ControlIncentive,
    RequisiteObservation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IncentiveFinding {
    pub decision: NodeId,
    pub subject: NodeId,
    pub kind: FindingKind,
    pub present: bool,
    /// Path demonstrating presence; `None` when absent.
    pub witness: Option<Vec<NodeId>>,
}

fn decision_index(model: &CidModel, decision: &str) -> Result<usize> {
    let d = model.index_of(decision)?;
    if !model.nodes()[d].kind().is_decision() {
        return Err(CidError::NotADecision(decision.to_string()));
    }
    Ok(d)
}

/// Shortest directed path from `from` to any node in `targets`; among
/// shortest paths the one with the lexicographically smallest name sequence.
fn shortest_path(model: &CidModel, from: usize, targets: &[usize]) -> Option<Vec<usize>> {
    let n = model.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &t in targets {
        dist[t] = 0;
        queue.push_back(t);
    }
    while let Some(v) = queue.pop_front() {
        for &p in model.parent_indices(v) {
            if dist[p] == usize::MAX {
                dist[p] = dist[v] + 1;
                queue.push_back(p);
            }
        }
    }
    if dist[from] == usize::MAX {
        return None;
    }
    let mut path = vec![from];
    let mut v = from;
    while dist[v] > 0 {
        v = model
            .child_indices(v)
            .iter()
            .copied()
            .filter(|&c| dist[c] == dist[v] - 1)
            .min_by(|&a, &b| model.id(a).as_str().cmp(model.id(b).as_str()))
            .expect("a child one step closer");
        path.push(v);
    }
    Some(path)
}

fn ids(model: &CidModel, path: Vec<usize>) -> Vec<NodeId> {
    path.into_iter().map(|i| model.id(i).clone()).collect()
}

fn owner_utilities(model: &CidModel, d: usize) -> Vec<usize> {
    let owner = model.nodes()[d].kind().owner().expect("decisions have owners").as_str();
    model.utilities_of(owner).collect()
}

fn finding(model: &CidModel, d: usize, s: usize, kind: FindingKind, path: Option<Vec<usize>>) -> IncentiveFinding {
    IncentiveFinding {
        decision: model.id(d).clone(),
        subject: model.id(s).clone(),
        kind,
        present: path.is_some(),
        witness: path.map(|p| ids(model, p)),
    }
}

/// Present iff a directed path leads from the decision to the subject.
pub fn ability_to_influence(model: &CidModel, decision: &str, subject: &str) -> Result<IncentiveFinding> {
    let d = decision_index(model, decision)?;
    let s = model.index_of(subject)?;
    Ok(finding(model, d, s, FindingKind::Ability, shortest_path(model, d, &[s])))
}

fn control_path(model: &CidModel, d: usize, s: usize) -> Option<Vec<usize>> {
    let utils = owner_utilities(model, d);
    let mut path = shortest_path(model, d, &[s])?;
    let tail = shortest_path(model, s, &utils)?;
    path.extend_from_slice(&tail[1..]);
    Some(path)
}

/// Present iff a directed path runs from the decision through the subject
/// to a utility node of the decision's owner.
pub fn control_incentive(model: &CidModel, decision: &str, subject: &str) -> Result<IncentiveFinding> {
    let d = decision_index(model, decision)?;
    let s = model.index_of(subject)?;
    Ok(finding(model, d, s, FindingKind::ControlIncentive, control_path(model, d, s)))
}

fn requisite_path(model: &CidModel, d: usize, o: usize) -> Option<Vec<usize>> {
    let below = model.reach(&[d], true);
    let utils: Vec<usize> = owner_utilities(model, d).into_iter().filter(|&u| below[u] && u != d).collect();
    if utils.is_empty() {
        return None;
    }
    let mut given: Vec<usize> = model.parent_indices(d).iter().copied().filter(|&p| p != o).collect();
    given.push(d);
    let utils: Vec<usize> = utils.into_iter().filter(|u| !given.contains(u)).collect();
    if utils.is_empty() || d_separated_idx(model, &[o], &utils, &given) {
        return None;
    }
    active_path_idx(model, &[o], &utils, &given)
}

/// An observation is requisite unless it is d-separated from the owner's
/// downstream utilities given the decision and its other observations.
pub fn requisite_observation(model: &CidModel, decision: &str, obs: &str) -> Result<IncentiveFinding> {
    let d = decision_index(model, decision)?;
    let o = model.index_of(obs)?;
    if !model.parent_indices(d).contains(&o) {
        return Err(CidError::InvalidQuery(format!("`{obs}` is not observed by `{decision}`")));
    }
    Ok(finding(model, d, o, FindingKind::RequisiteObservation, requisite_path(model, d, o)))
}

/// Optimal expected utility with the link minus optimal expected utility
/// without it. Decisions of other agents must be fixed by `fixed`.
pub fn value_of_information(model: &CidModel, agent: &str, decision: &str, obs: &str) -> Result<f64> {
    value_of_information_with(model, agent, decision, obs, &PolicyProfile::new(), &Limits::from_env())
}

pub fn value_of_information_with(
    model: &CidModel,
    agent: &str,
    decision: &str,
    obs: &str,
    fixed: &PolicyProfile,
    limits: &Limits,
) -> Result<f64> {
    let d = decision_index(model, decision)?;
    model.agent(agent)?;
    if model.nodes()[d].kind().owner().map(|a| a.as_str()) != Some(agent) {
        return Err(CidError::InvalidQuery(format!("`{decision}` is not owned by `{agent}`")));
    }
    let without = model.without_information_link(obs, decision)?;
    let with_value = solve_single_agent_with(model, agent, Method::Auto, fixed, limits)?.value[agent];
    let without_value = solve_single_agent_with(&without, agent, Method::Auto, fixed, limits)?.value[agent];
    Ok(with_value - without_value)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelfFulfillingFlag {
    pub subject: NodeId,
    pub ability: Vec<NodeId>,
    pub control: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelfFulfillingReport {
    pub decision: NodeId,
    pub flagged: Vec<SelfFulfillingFlag>,
}

/// World-tagged chance nodes the decision can influence and is rewarded for
/// influencing.
pub fn self_fulfilling_diagnostic(model: &CidModel, decision: &str) -> Result<SelfFulfillingReport> {
    let d = decision_index(model, decision)?;
    let mut flagged = Vec::new();
    for (w, node) in model.nodes().iter().enumerate() {
        if !node.is_world() || !node.kind().is_chance() {
            continue;
        }
        if let (Some(a), Some(c)) = (shortest_path(model, d, &[w]), control_path(model, d, w)) {
            flagged.push(SelfFulfillingFlag {
                subject: node.id().clone(),
                ability: ids(model, a),
                control: ids(model, c),
            });
        }
    }
    Ok(SelfFulfillingReport { decision: model.id(d).clone(), flagged })
}

/// Everything the graphical analysis says about one decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IncentiveReport {
    pub decision: NodeId,
    /// Present ability and control-incentive findings, in declaration order.
    pub findings: Vec<IncentiveFinding>,
    /// One requisite-observation finding per observation.
    pub observations: Vec<IncentiveFinding>,
    pub self_fulfilling: Vec<NodeId>,
}

impl IncentiveReport {
    pub fn to_json(&self) -> Value {
        json!(self)
    }
}

pub fn analyze(model: &CidModel, decision: &str) -> Result<IncentiveReport> {
    let d = decision_index(model, decision)?;
    let mut findings = Vec::new();
    for s in 0..model.len() {
        if s == d {
            continue;
        }
        if let Some(p) = shortest_path(model, d, &[s]) {
            findings.push(finding(model, d, s, FindingKind::Ability, Some(p)));
            if let Some(c) = control_path(model, d, s) {
                findings.push(finding(model, d, s, FindingKind::ControlIncentive, Some(c)));
            }
        }
    }
    let observations = model
        .parent_indices(d)
        .iter()
        .map(|&o| finding(model, d, o, FindingKind::RequisiteObservation, requisite_path(model, d, o)))
        .collect();
    let self_fulfilling = self_fulfilling_diagnostic(model, decision)?.flagged.into_iter().map(|f| f.subject).collect();
    Ok(IncentiveReport { decision: model.id(d).clone(), findings, observations, self_fulfilling })
}
