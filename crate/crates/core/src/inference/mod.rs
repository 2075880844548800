//! Exact inference on induced networks and graphical queries on CIDs.

mod bayesnet;
mod dsep;
mod factor;

use std::collections::BTreeMap;

pub(crate) use bayesnet::skeleton;
pub use bayesnet::{induced_network, marginalize_out, BayesNet};
pub use dsep::{active_path, d_separated, mediates};
pub(crate) use dsep::{active_path_idx, d_separated_idx};
pub use factor::Factor;
pub(crate) use factor::{eliminate, Table};

use crate::error::{CidError, Result};
use crate::limits::Limits;
use crate::model::{CidModel, NodeId};
use crate::policy::PolicyProfile;

/// Targets and evidence for a marginal query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Query {
    pub targets: Vec<NodeId>,
    pub evidence: BTreeMap<NodeId, String>,
}

impl Query {
    pub fn new(targets: &[&str]) -> Self {
        Query { targets: targets.iter().map(|t| NodeId::unchecked(*t)).collect(), evidence: BTreeMap::new() }
    }

    pub fn given(mut self, node: &str, outcome: &str) -> Self {
        self.evidence.insert(NodeId::unchecked(node), outcome.to_string());
        self
    }
}

/// Posterior over the query targets given evidence.
pub fn marginal(net: &BayesNet, query: &Query) -> Result<Factor> {
    marginal_with(net, query, &Limits::from_env())
}

pub fn marginal_with(net: &BayesNet, query: &Query, limits: &Limits) -> Result<Factor> {
    let targets: Vec<usize> = query.targets.iter().map(|t| net.index_of(t.as_str())).collect::<Result<_>>()?;
    for (k, t) in targets.iter().enumerate() {
        if targets[..k].contains(t) {
            return Err(CidError::InvalidQuery(format!("target `{}` listed twice", net.names()[*t])));
        }
    }
    let mut evidence = Vec::with_capacity(query.evidence.len());
    for (node, label) in &query.evidence {
        let i = net.index_of(node.as_str())?;
        if targets.contains(&i) {
            return Err(CidError::InvalidQuery(format!("`{node}` is both a target and evidence")));
        }
        let k = net
            .outcomes(i)
            .iter()
            .position(|o| o == label)
            .ok_or_else(|| CidError::UnknownOutcome { node: node.to_string(), outcome: label.clone() })?;
        evidence.push((i, k));
    }
    let mut seeds = targets.clone();
    seeds.extend(evidence.iter().map(|(i, _)| *i));
    let relevant = net.ancestral_mask(&seeds);
    let tables: Vec<Table> = (0..net.len())
        .filter(|&i| relevant[i])
        .map(|i| evidence.iter().fold(net.table(i), |t, &(v, k)| t.reduce(v, k)))
        .collect();
    let joint = eliminate(tables, &targets, &net.cards(), limits)?;
    let z = joint.total();
    if z.is_nan() || z <= 0.0 {
        return Err(CidError::ImpossibleEvidence);
    }
    let values = joint.values.iter().map(|v| v / z).collect();
    let outcomes = targets.iter().map(|&t| net.outcomes(t).to_vec()).collect();
    Ok(Factor::new(targets.iter().map(|&t| net.names()[t].clone()).collect(), outcomes, values))
}

/// Expected value of utility node `u` of `model` under the CPTs in `net`.
pub(crate) fn utility_expectation(model: &CidModel, net: &BayesNet, u: usize, limits: &Limits) -> Result<f64> {
    let parents = model.parent_indices(u).to_vec();
    let values = model.nodes()[u].utility_table().expect("utility node has a table").values().to_vec();
    if parents.is_empty() {
        return Ok(values[0]);
    }
    let relevant = net.ancestral_mask(&parents);
    let mut tables: Vec<Table> = (0..net.len()).filter(|&i| relevant[i]).map(|i| net.table(i)).collect();
    let cards = parents.iter().map(|&p| net.card(p)).collect();
    tables.push(Table::new(parents, cards, values));
    Ok(eliminate(tables, &[], &net.cards(), limits)?.values[0])
}

/// Sum of the agent's utility expectations in a network already carrying
/// decision CPTs.
pub(crate) fn agent_value(model: &CidModel, net: &BayesNet, agent: &str, limits: &Limits) -> Result<f64> {
    model.utilities_of(agent).map(|u| utility_expectation(model, net, u, limits)).sum()
}

/// Expected total utility of `agent` when every decision follows `profile`.
pub fn expected_utility(model: &CidModel, profile: &PolicyProfile, agent: &str) -> Result<f64> {
    expected_utility_with(model, profile, agent, &Limits::from_env())
}

pub fn expected_utility_with(model: &CidModel, profile: &PolicyProfile, agent: &str, limits: &Limits) -> Result<f64> {
    model.agent(agent)?;
    let net = induced_network(model, profile)?;
    agent_value(model, &net, agent, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelBuilder;
    use crate::policy::DecisionRule;

    fn coin() -> CidModel {
        let mut b = ModelBuilder::new();
        b.agent("a");
        b.chance("C", &["h", "t"], &[], vec![vec![0.5, 0.5]]);
        b.decision("D", "a", &["h", "t"], &["C"]);
        b.utility_fn("U", "a", &["C", "D"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
        b.build().unwrap()
    }

    fn profile(rows: Vec<Vec<f64>>) -> PolicyProfile {
        let mut p = PolicyProfile::new();
        p.insert(NodeId::unchecked("D"), DecisionRule::new(rows));
        p
    }

    #[test]
    fn coin_copy_policy() {
        let m = coin();
        let p = profile(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((expected_utility(&m, &p, "a").unwrap() - 1.0).abs() < 1e-12);
        let net = induced_network(&m, &p).unwrap();
        let f = marginal(&net, &Query::new(&["U"])).unwrap();
        assert!((f.prob(&["1"]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coin_uniform_policy() {
        let m = coin();
        let p = profile(vec![vec![0.5, 0.5]; 2]);
        assert!((expected_utility(&m, &p, "a").unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn impossible_evidence_is_an_error() {
        let m = coin();
        let p = profile(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let net = induced_network(&m, &p).unwrap();
        let q = Query::new(&["C"]).given("U", "0");
        assert!(matches!(marginal(&net, &q), Err(CidError::ImpossibleEvidence)));
    }

    #[test]
    fn evidence_conditions() {
        let m = coin();
        let p = profile(vec![vec![0.5, 0.5]; 2]);
        let net = induced_network(&m, &p).unwrap();
        let f = marginal(&net, &Query::new(&["D"]).given("U", "1").given("C", "t")).unwrap();
        assert!((f.prob(&["t"]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn agent_without_utilities_scores_zero() {
        let mut b = ModelBuilder::new();
        b.agent("a").agent("b");
        b.decision("D", "a", &["x"], &[]);
        b.utility("U", "a", &["D"], vec![3.0]);
        let m = b.build().unwrap();
        let p = PolicyProfile::first_actions(&m);
        assert_eq!(expected_utility(&m, &p, "b").unwrap(), 0.0);
        assert!(expected_utility(&m, &p, "nobody").is_err());
    }
}
