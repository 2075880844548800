use std::collections::BTreeMap;

use crate::error::{CidError, Result};
use crate::inference::factor::Table;
use crate::model::{CidModel, Configurations, Mechanism, NodeId, NodeKind, PROB_TOL};
use crate::policy::PolicyProfile;

/// Plain Bayesian network over finite variables. CPTs are flattened as
/// `config * card + outcome`, configurations in canonical parent order.
#[derive(Clone, Debug, PartialEq)]
pub struct BayesNet {
    names: Vec<NodeId>,
    outcomes: Vec<Vec<String>>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<f64>>,
}

impl BayesNet {
    pub fn new(
        names: Vec<NodeId>,
        outcomes: Vec<Vec<String>>,
        parents: Vec<Vec<usize>>,
        cpts: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let net = BayesNet { names, outcomes, parents, cpts };
        for i in 0..net.len() {
            let expected = net.config_count(i) * net.card(i);
            if net.cpts[i].len() != expected {
                return Err(CidError::InvalidQuery(format!(
                    "cpt of `{}` has {} entries, expected {expected}",
                    net.names[i],
                    net.cpts[i].len()
                )));
            }
        }
        Ok(net)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[NodeId] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n.as_str() == name).ok_or_else(|| CidError::UnknownNode(name.to_string()))
    }

    pub fn outcomes(&self, i: usize) -> &[String] {
        &self.outcomes[i]
    }

    pub fn card(&self, i: usize) -> usize {
        self.outcomes[i].len()
    }

    pub fn cards(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.card(i)).collect()
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn cpt(&self, i: usize) -> &[f64] {
        &self.cpts[i]
    }

    pub fn config_count(&self, i: usize) -> usize {
        self.parents[i].iter().map(|&p| self.card(p)).product()
    }

    pub(crate) fn set_cpt(&mut self, i: usize, cpt: Vec<f64>) {
        debug_assert_eq!(cpt.len(), self.cpts[i].len());
        self.cpts[i] = cpt;
    }

    pub(crate) fn table(&self, i: usize) -> Table {
        let mut vars = self.parents[i].clone();
        vars.push(i);
        let cards = vars.iter().map(|&v| self.card(v)).collect();
        Table::new(vars, cards, self.cpts[i].clone())
    }

    /// Ancestors of `seeds`, seeds included.
    pub(crate) fn ancestral_mask(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if !mask[v] {
                mask[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }
        mask
    }

    /// Probability of a full assignment given by outcome indices.
    pub fn joint_probability_indices(&self, assignment: &[usize]) -> f64 {
        (0..self.len())
            .map(|i| {
                let cards: Vec<usize> = self.parents[i].iter().map(|&p| self.card(p)).collect();
                let cfg: Vec<usize> = self.parents[i].iter().map(|&p| assignment[p]).collect();
                let row = Configurations::index_of(&cards, &cfg);
                self.cpts[i][row * self.card(i) + assignment[i]]
            })
            .product()
    }

    /// Product of mechanism rows for a full assignment of outcome labels.
    pub fn joint_probability(&self, assignment: &BTreeMap<String, String>) -> Result<f64> {
        let mut idx = Vec::with_capacity(self.len());
        for (i, name) in self.names.iter().enumerate() {
            let label = assignment
                .get(name.as_str())
                .ok_or_else(|| CidError::InvalidQuery(format!("assignment misses `{name}`")))?;
            let k = self.outcomes[i]
                .iter()
                .position(|o| o == label)
                .ok_or_else(|| CidError::UnknownOutcome { node: name.to_string(), outcome: label.clone() })?;
            idx.push(k);
        }
        Ok(self.joint_probability_indices(&idx))
    }
}

/// Network for `model` with every decision given a uniform CPT.
pub(crate) fn skeleton(model: &CidModel) -> BayesNet {
    let n = model.len();
    let mut names = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut parents = Vec::with_capacity(n);
    let mut cpts = Vec::with_capacity(n);
    for (i, node) in model.nodes().iter().enumerate() {
        names.push(node.id().clone());
        outcomes.push(model.outcomes(i));
        parents.push(model.parent_indices(i).to_vec());
        let card = model.cardinality(i);
        let configs = model.config_count(i);
        let cpt = match (node.kind(), node.mechanism()) {
            (NodeKind::Chance, Some(Mechanism::Chance(c))) => c.rows().concat(),
            (NodeKind::Utility(_), Some(Mechanism::Utility(t))) => {
                let levels = model.utility_levels(i);
                let mut flat = vec![0.0; configs * card];
                for (cfg, v) in t.values().iter().enumerate() {
                    let k = levels.iter().position(|l| l == v).expect("level of own value");
                    flat[cfg * card + k] = 1.0;
                }
                flat
            }
            _ => vec![1.0 / card as f64; configs * card],
        };
        cpts.push(cpt);
    }
    BayesNet { names, outcomes, parents, cpts }
}

/// Bayesian network obtained by replacing every decision with its policy row
/// distribution. Utilities become deterministic variables over their
/// attained values. Node and edge sets are preserved.
pub fn induced_network(model: &CidModel, profile: &PolicyProfile) -> Result<BayesNet> {
    let mut net = skeleton(model);
    for d in model.decisions() {
        let rule = profile.check_rule(model, d)?;
        net.set_cpt(d, rule.rows().concat());
    }
    Ok(net)
}

/// Sum a node with at most one child out of the network. The child inherits
/// the removed node's parents. Nodes with several children cannot be removed
/// without adding dependence between those children, which is refused.
pub fn marginalize_out(net: &BayesNet, name: &str) -> Result<BayesNet> {
    let n = net.index_of(name)?;
    let kids: Vec<usize> = (0..net.len()).filter(|&c| net.parents[c].contains(&n)).collect();
    if kids.len() > 1 {
        return Err(CidError::Unsupported(format!(
            "`{name}` has {} children; summing it out would make them dependent",
            kids.len()
        )));
    }
    let remap = |v: usize| if v > n { v - 1 } else { v };
    let mut out = net.clone();
    if let Some(&c) = kids.first() {
        // new parents: old parents of c without n, then n's parents not already present
        let mut new_parents: Vec<usize> = net.parents[c].iter().copied().filter(|&p| p != n).collect();
        for &p in &net.parents[n] {
            if !new_parents.contains(&p) {
                new_parents.push(p);
            }
        }
        let mut keep = new_parents.clone();
        keep.push(c);
        let product = net.table(c).product(&net.table(n));
        let summed = product.sum_out(n).permuted(&keep);
        out.parents[c] = new_parents;
        out.cpts[c] = summed.values;
    }
    out.names.remove(n);
    out.outcomes.remove(n);
    out.parents.remove(n);
    out.cpts.remove(n);
    for ps in &mut out.parents {
        for p in ps.iter_mut() {
            *p = remap(*p);
        }
    }
    for i in 0..out.len() {
        let sum: f64 = out.cpts[i].iter().sum();
        debug_assert!((sum - out.config_count(i) as f64).abs() < PROB_TOL * out.cpts[i].len() as f64 + 1e-9);
    }
    Ok(out)
}
