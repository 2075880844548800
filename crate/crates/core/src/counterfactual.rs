//! Response-function form of a CID and twin-network construction.
//!
//! A twin network holds the factual model plus a primed copy `X'` of every
//! non-noise node. Copies share the exogenous noise nodes with the factual
//! world and carry the interventions.

use std::collections::{BTreeMap, HashSet};

use crate::error::{CidError, Result};
use crate::inference::{induced_network, marginal_with, Factor, Query};
use crate::limits::Limits;
use crate::model::{CidModel, Configurations, Cpt, Mechanism, NodeId, PendingKind, PendingNode};
use crate::policy::PolicyProfile;

/// A model whose chance nodes are deterministic given their parents and one
/// exogenous noise root each.
#[derive(Clone, Debug)]
pub struct ScmModel {
    model: CidModel,
    noise_of: BTreeMap<String, NodeId>,
}

impl ScmModel {
    pub fn model(&self) -> &CidModel {
        &self.model
    }

    pub fn noise(&self) -> &[NodeId] {
        &self.model.twin().noise
    }

    /// Noise node feeding chance node `node`.
    pub fn noise_of(&self, node: &str) -> Option<&NodeId> {
        self.noise_of.get(node)
    }

    pub fn is_noise(&self, node: &str) -> bool {
        self.noise().iter().any(|u| u.as_str() == node)
    }
}

/// Replacement applied to a node.
#[derive(Clone, Debug, PartialEq)]
pub enum Intervention {
    /// Constant outcome.
    Force(String),
    /// New CPT over the node's non-noise parents, canonical row order.
    Cpt(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InterventionSpec {
    pub targets: BTreeMap<String, Intervention>,
}

impl InterventionSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn force(mut self, node: &str, outcome: &str) -> Self {
        self.targets.insert(node.to_string(), Intervention::Force(outcome.to_string()));
        self
    }

    pub fn replace(mut self, node: &str, rows: Vec<Vec<f64>>) -> Self {
        self.targets.insert(node.to_string(), Intervention::Cpt(rows));
        self
    }

    /// Parse `A=x,B=y`. Primed names refer to the same node as unprimed ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (node, value) = part
                .split_once('=')
                .ok_or_else(|| CidError::Intervention(format!("expected node=value, got `{part}`")))?;
            spec = spec.force(node.trim().trim_end_matches('\''), value.trim());
        }
        Ok(spec)
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

fn fresh_name(taken: &HashSet<String>, base: String) -> String {
    let mut name = base;
    while taken.contains(&name) {
        name.push('_');
    }
    name
}

/// Rewrite every chance node `X` as a deterministic function of its parents
/// and a new root `U_X` ranging over the response functions with positive
/// probability. `U_X` is declared just before `X`.
pub fn functionalize(model: &CidModel) -> Result<ScmModel> {
    functionalize_with(model, &Limits::from_env())
}

pub fn functionalize_with(model: &CidModel, limits: &Limits) -> Result<ScmModel> {
    let mut taken: HashSet<String> = model.nodes().iter().map(|n| n.id().to_string()).collect();
    let mut b = model.to_builder();
    let pendings = std::mem::take(b.nodes_mut());
    let mut noise_of = BTreeMap::new();
    let mut noise_names = Vec::new();
    for (i, pending) in pendings.into_iter().enumerate() {
        let node = &model.nodes()[i];
        let Some(cpt) = node.cpt() else {
            b.push(pending);
            continue;
        };
        let card = model.cardinality(i);
        let support: Vec<Vec<usize>> = cpt.rows().iter().map(|r| (0..card).filter(|&k| r[k] > 0.0).collect()).collect();
        let count = support.iter().try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128)).unwrap_or(u128::MAX);
        if count > limits.max_response_functions {
            return Err(CidError::ResourceCap {
                what: "response functions",
                needed: count,
                cap: limits.max_response_functions,
            });
        }
        let sizes: Vec<usize> = support.iter().map(Vec::len).collect();
        let mut functions: Vec<Vec<usize>> = Vec::with_capacity(count as usize);
        let mut weights = Vec::with_capacity(count as usize);
        for choice in Configurations::new(sizes) {
            let f: Vec<usize> = choice.iter().zip(&support).map(|(&c, s)| s[c]).collect();
            weights.push(f.iter().enumerate().map(|(r, &k)| cpt.row(r)[k]).product::<f64>());
            functions.push(f);
        }
        let u_name = fresh_name(&taken, format!("U_{}", node.id()));
        taken.insert(u_name.clone());
        let labels: Vec<String> = (0..functions.len()).map(|k| format!("f{k}")).collect();
        b.push(PendingNode {
            name: u_name.clone(),
            kind: PendingKind::Chance,
            domain: labels,
            parents: Vec::new(),
            mechanism: Some(Mechanism::Chance(Cpt::new(vec![weights]))),
            world: false,
        });
        let mut rows = Vec::with_capacity(cpt.rows().len() * functions.len());
        for r in 0..cpt.rows().len() {
            for f in &functions {
                let mut row = vec![0.0; card];
                row[f[r]] = 1.0;
                rows.push(row);
            }
        }
        let mut parents = pending.parents.clone();
        parents.push(u_name.clone());
        b.push(PendingNode { parents, mechanism: Some(Mechanism::Chance(Cpt::new(rows))), ..pending });
        noise_of.insert(node.id().to_string(), NodeId::unchecked(u_name.clone()));
        noise_names.push(u_name);
    }
    b.twin_mut().1.extend(noise_names);
    Ok(ScmModel { model: b.build()?, noise_of })
}

fn check_spec(scm: &ScmModel, spec: &InterventionSpec) -> Result<()> {
    for (name, iv) in &spec.targets {
        let i = scm.model.index_of(name)?;
        if scm.is_noise(name) {
            return Err(CidError::Intervention(format!("`{name}` is a noise node")));
        }
        let node = &scm.model.nodes()[i];
        if node.kind().is_utility() {
            return Err(CidError::Intervention(format!("`{name}` is a utility node")));
        }
        if let Intervention::Force(o) = iv {
            if node.domain().index_of(o).is_none() {
                return Err(CidError::UnknownOutcome { node: name.clone(), outcome: o.clone() });
            }
        }
    }
    Ok(())
}

/// Apply `iv` to `pending` (a node of `model` named `name`), with parent
/// names already translated. Noise parents are dropped.
fn intervened(
    model: &CidModel,
    scm_noise: &[NodeId],
    name: &str,
    iv: &Intervention,
    pending: PendingNode,
) -> PendingNode {
    let i = model.index_of(name).expect("checked");
    let parents: Vec<String> = pending
        .parents
        .iter()
        .zip(model.parent_indices(i))
        .filter(|(_, &p)| !scm_noise.contains(model.id(p)))
        .map(|(n, _)| n.clone())
        .collect();
    let configs: usize = model
        .parent_indices(i)
        .iter()
        .filter(|&&p| !scm_noise.contains(model.id(p)))
        .map(|&p| model.cardinality(p))
        .product();
    let rows = match iv {
        Intervention::Force(o) => {
            let k = model.nodes()[i].domain().index_of(o).expect("checked");
            let mut row = vec![0.0; model.cardinality(i)];
            row[k] = 1.0;
            vec![row; configs]
        }
        Intervention::Cpt(rows) => rows.clone(),
    };
    PendingNode { kind: PendingKind::Chance, parents, mechanism: Some(Mechanism::Chance(Cpt::new(rows))), ..pending }
}

/// Single-world intervention: replace the targets' mechanisms in place.
pub fn intervene(model: &CidModel, spec: &InterventionSpec) -> Result<CidModel> {
    let noise: Vec<NodeId> = model.twin().noise.clone();
    for (name, iv) in &spec.targets {
        let i = model.index_of(name)?;
        if noise.iter().any(|u| u.as_str() == name) {
            return Err(CidError::Intervention(format!("`{name}` is a noise node")));
        }
        if model.nodes()[i].kind().is_utility() {
            return Err(CidError::Intervention(format!("`{name}` is a utility node")));
        }
        if let Intervention::Force(o) = iv {
            model.outcome_index(i, o)?;
        }
    }
    let mut b = model.to_builder();
    let nodes: Vec<PendingNode> = b.nodes_mut().drain(..).collect();
    for pending in nodes {
        let next = match spec.targets.get(&pending.name) {
            Some(iv) => intervened(model, &noise, &pending.name.clone(), iv, pending),
            None => pending,
        };
        b.push(next);
    }
    b.build()
}

/// Twin network of `scm` with `spec` applied to the counterfactual copies.
pub fn twin_network(scm: &ScmModel, spec: &InterventionSpec) -> Result<CidModel> {
    check_spec(scm, spec)?;
    let model = &scm.model;
    let noise = scm.noise().to_vec();
    let is_noise = |i: usize| noise.contains(model.id(i));
    let mut b = model.to_builder();
    let factual: Vec<PendingNode> = b.nodes_mut().clone();
    let mut pairs = Vec::new();
    for (i, pending) in factual.into_iter().enumerate() {
        if is_noise(i) {
            continue;
        }
        let name = pending.name.clone();
        let cf_name = model.id(i).counterfactual().to_string();
        let parents: Vec<String> = model
            .parent_indices(i)
            .iter()
            .map(|&p| if is_noise(p) { model.id(p).to_string() } else { model.id(p).counterfactual().to_string() })
            .collect();
        let copy = PendingNode { name: cf_name.clone(), parents, ..pending };
        let copy = match spec.targets.get(&name) {
            Some(iv) => intervened(model, &noise, &name, iv, copy),
            None => copy,
        };
        b.push(copy);
        pairs.push((cf_name, name));
    }
    b.twin_mut().0.extend(pairs);
    b.build()
}

/// Merge counterfactual copies that no intervention reaches back into their
/// factual nodes. `targets` are the intervened (factual) names.
pub fn merge_unaffected(twin: &CidModel, targets: &[&str]) -> Result<CidModel> {
    let seeds: Vec<usize> =
        targets.iter().map(|t| twin.index_of(&format!("{}'", t.trim_end_matches('\'')))).collect::<Result<_>>()?;
    let affected = twin.reach(&seeds, true);
    let merged: BTreeMap<String, String> = twin
        .twin()
        .pairs
        .iter()
        .filter(|(cf, _)| !affected[twin.index_of(cf.as_str()).unwrap()])
        .map(|(cf, f)| (cf.to_string(), f.to_string()))
        .collect();
    let mut b = twin.to_builder();
    b.nodes_mut().retain(|n| !merged.contains_key(&n.name));
    for n in b.nodes_mut() {
        for p in &mut n.parents {
            if let Some(f) = merged.get(p) {
                *p = f.clone();
            }
        }
    }
    b.twin_mut().0.retain(|(cf, _)| !merged.contains_key(cf));
    b.build()
}

/// Sum a root noise node out of a single child, or drop it when it has a
/// single outcome.
fn absorb(model: &CidModel, u: usize) -> Result<CidModel> {
    let children = model.child_indices(u).to_vec();
    let prior = model.nodes()[u].cpt().expect("noise is chance").row(0).to_vec();
    let mut b = model.to_builder();
    let name = model.id(u).to_string();
    for &c in &children {
        let node = &model.nodes()[c];
        let cpt = node.cpt().ok_or_else(|| CidError::Unsupported(format!("noise child `{}` has no CPT", node.id())))?;
        let pos = model.parent_indices(c).iter().position(|&p| p == u).unwrap();
        let cards = model.parent_cards(c);
        let mut rest = cards.clone();
        rest.remove(pos);
        let card = model.cardinality(c);
        let mut rows = vec![vec![0.0; card]; Configurations::total(&rest)];
        for (r, cfg) in Configurations::new(cards).enumerate() {
            let mut reduced = cfg.clone();
            let k = reduced.remove(pos);
            let target = Configurations::index_of(&rest, &reduced);
            for (acc, p) in rows[target].iter_mut().zip(cpt.row(r)) {
                *acc += prior[k] * p;
            }
        }
        let pending = b.nodes_mut().iter_mut().find(|n| n.name == node.id().as_str()).unwrap();
        pending.parents.retain(|p| *p != name);
        pending.mechanism = Some(Mechanism::Chance(Cpt::new(rows)));
    }
    b.nodes_mut().retain(|n| n.name != name);
    b.twin_mut().1.retain(|n| *n != name);
    b.build_unchecked()
}

/// Absorb every noise node that has one child or one outcome into its
/// children.
pub fn absorb_noise(model: &CidModel) -> Result<CidModel> {
    let mut current = model.clone();
    loop {
        let next = current.twin().noise.iter().find_map(|u| {
            let i = current.index_of(u.as_str()).ok()?;
            (current.child_indices(i).len() <= 1 || current.cardinality(i) == 1).then_some(i)
        });
        match next {
            Some(i) => current = absorb(&current, i)?,
            None => break,
        }
    }
    validated(current)
}

/// Drop every remaining noise node, giving each child its own marginal
/// mechanism. The joint correlation between twin copies is discarded; the
/// result is meant for graph comparison.
pub fn project_noise(model: &CidModel) -> Result<CidModel> {
    let mut current = model.clone();
    while let Some(u) = current.twin().noise.first().cloned() {
        let i = current.index_of(u.as_str())?;
        current = absorb(&current, i)?;
    }
    validated(current)
}

fn validated(model: CidModel) -> Result<CidModel> {
    let report = model.validate();
    if report.ok() {
        Ok(model)
    } else {
        Err(CidError::Invalid(report))
    }
}

/// Replace parent `from` of utility `utility` by `to`, keeping the table.
/// Both must have the same outcome labels.
pub fn rewire_utility(model: &CidModel, utility: &str, from: &str, to: &str) -> Result<CidModel> {
    let u = model.index_of(utility)?;
    if !model.nodes()[u].kind().is_utility() {
        return Err(CidError::InvalidQuery(format!("`{utility}` is not a utility node")));
    }
    let (f, t) = (model.index_of(from)?, model.index_of(to)?);
    if !model.parent_indices(u).contains(&f) {
        return Err(CidError::InvalidQuery(format!("`{from}` is not a parent of `{utility}`")));
    }
    if model.outcomes(f) != model.outcomes(t) {
        return Err(CidError::InvalidQuery(format!("`{from}` and `{to}` have different outcomes")));
    }
    let mut b = model.to_builder();
    let pending = b.nodes_mut().iter_mut().find(|n| n.name == utility).unwrap();
    for p in &mut pending.parents {
        if p == from {
            *p = to.to_string();
        }
    }
    b.build()
}

/// Remove a childless node.
pub fn remove_node(model: &CidModel, node: &str) -> Result<CidModel> {
    let i = model.index_of(node)?;
    if !model.child_indices(i).is_empty() {
        return Err(CidError::Unsupported(format!("`{node}` still has children")));
    }
    let mut b = model.to_builder();
    b.nodes_mut().retain(|n| n.name != node);
    let (pairs, noise) = b.twin_mut();
    pairs.retain(|(cf, f)| cf != node && f != node);
    noise.retain(|u| u != node);
    b.build()
}

/// Distribution of `target` in the twin network given factual `evidence`.
/// Counterfactual decision copies follow the factual decision's rule.
pub fn counterfactual_query(
    scm: &ScmModel,
    spec: &InterventionSpec,
    profile: &PolicyProfile,
    evidence: &BTreeMap<String, String>,
    target: &str,
) -> Result<Factor> {
    let twin = twin_network(scm, spec)?;
    let mut full = profile.clone();
    for d in twin.decisions() {
        let id = twin.id(d);
        if let Some(f) = id.factual() {
            if let Some(rule) = profile.get(f.as_str()) {
                full.insert(id.clone(), rule.clone());
            }
        }
    }
    let net = induced_network(&twin, &full)?;
    let mut query = Query::new(&[target]);
    for (node, value) in evidence {
        query = query.given(node, value);
    }
    marginal_with(&net, &query, &Limits::from_env())
}
