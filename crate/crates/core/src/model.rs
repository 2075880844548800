//! Data model for (multi-agent) causal influence diagrams over finite domains.
//!
//! A [`CidModel`] is immutable once built. Construction goes through
//! [`ModelBuilder`], which resolves names and runs [`CidModel::validate`].
//! Every table in the model is keyed by parent configurations in canonical
//! order: parents in declaration order, last parent varying fastest.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CidError, Result};

/// Tolerance for probability row sums and distribution comparisons.
pub const PROB_TOL: f64 = 1e-9;

/// Suffix reserved for counterfactual copies in twin networks.
pub const COUNTERFACTUAL_SUFFIX: char = '\'';

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_node_name(s: &str) -> bool {
    match s.strip_suffix(COUNTERFACTUAL_SUFFIX) {
        Some(base) => is_identifier(base),
        None => is_identifier(s),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    /// Accepts `[A-Za-z_][A-Za-z0-9_]*`, optionally followed by the
    /// counterfactual suffix `'`.
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if is_node_name(&name) {
            Ok(NodeId(name))
        } else {
            Err(CidError::InvalidIdentifier(name))
        }
    }

    pub(crate) fn unchecked(name: impl Into<String>) -> Self {
        NodeId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_counterfactual(&self) -> bool {
        self.0.ends_with(COUNTERFACTUAL_SUFFIX)
    }

    pub fn counterfactual(&self) -> NodeId {
        NodeId(format!("{}{}", self.0, COUNTERFACTUAL_SUFFIX))
    }

    pub fn factual(&self) -> Option<NodeId> {
        self.0.strip_suffix(COUNTERFACTUAL_SUFFIX).map(|s| NodeId(s.to_string()))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(AgentId(name))
        } else {
            Err(CidError::InvalidIdentifier(name))
        }
    }

    pub(crate) fn unchecked(name: impl Into<String>) -> Self {
        AgentId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered list of outcome labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Domain(Vec<String>);

impl Domain {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Domain(labels.into_iter().map(Into::into).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Chance,
    Decision(AgentId),
    Utility(AgentId),
}

impl NodeKind {
    pub fn owner(&self) -> Option<&AgentId> {
        match self {
            NodeKind::Chance => None,
            NodeKind::Decision(a) | NodeKind::Utility(a) => Some(a),
        }
    }

    pub fn is_decision(&self) -> bool {
        matches!(self, NodeKind::Decision(_))
    }

    pub fn is_utility(&self) -> bool {
        matches!(self, NodeKind::Utility(_))
    }

    pub fn is_chance(&self) -> bool {
        matches!(self, NodeKind::Chance)
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            NodeKind::Chance => "chance",
            NodeKind::Decision(_) => "decision",
            NodeKind::Utility(_) => "utility",
        }
    }
}

/// Edges into decisions are information links; all others are causal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Causal,
    Information,
}

impl EdgeKind {
    pub fn for_target(kind: &NodeKind) -> Self {
        if kind.is_decision() {
            EdgeKind::Information
        } else {
            EdgeKind::Causal
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
}

/// Conditional probability table: one distribution per parent configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Cpt { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.rows[config]
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.iter().filter(|p| **p > 0.0).count() == 1)
    }
}

/// Real-valued utility per parent configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityTable {
    values: Vec<f64>,
}

impl UtilityTable {
    pub fn new(values: Vec<f64>) -> Self {
        UtilityTable { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism {
    Chance(Cpt),
    Utility(UtilityTable),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    id: NodeId,
    kind: NodeKind,
    domain: Domain,
    parents: Vec<usize>,
    mechanism: Option<Mechanism>,
    world: bool,
}

impl Node {
    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    /// Declared domain. Utility nodes carry an empty declared domain; their
    /// outcomes are the values their table attains (see [`CidModel::outcomes`]).
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn mechanism(&self) -> Option<&Mechanism> {
        self.mechanism.as_ref()
    }

    pub fn cpt(&self) -> Option<&Cpt> {
        match &self.mechanism {
            Some(Mechanism::Chance(c)) => Some(c),
            _ => None,
        }
    }

    pub fn utility_table(&self) -> Option<&UtilityTable> {
        match &self.mechanism {
            Some(Mechanism::Utility(u)) => Some(u),
            _ => None,
        }
    }

    /// Tagged as a world-state variable.
    pub fn is_world(&self) -> bool {
        self.world
    }
}

/// Pairing metadata for twin networks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TwinMeta {
    /// (counterfactual copy, factual node)
    pub pairs: Vec<(NodeId, NodeId)>,
    pub noise: Vec<NodeId>,
}

impl TwinMeta {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.noise.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Identifier,
    DuplicateName,
    UnknownAgent,
    UnknownParent,
    Domain,
    Cycle,
    UtilityChild,
    Mechanism,
    RowSum,
    Probability,
    UtilityValue,
    Twin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Node, agent or edge (`A -> B`) the violation is about.
    pub subject: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal observations, e.g. edges the mechanisms ignore.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, subject: impl Into<String>, rule: Rule, message: impl Into<String>) {
        self.violations.push(Violation { subject: subject.into(), rule, message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return f.write_str("ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Mixed-radix enumeration of configurations, last position fastest.
#[derive(Clone, Debug)]
pub struct Configurations {
    cards: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl Configurations {
    pub fn new(cards: Vec<usize>) -> Self {
        let done = cards.contains(&0);
        let current = vec![0; cards.len()];
        Configurations { cards, current, done }
    }

    pub fn total(cards: &[usize]) -> usize {
        cards.iter().product()
    }

    pub fn index_of(cards: &[usize], values: &[usize]) -> usize {
        values.iter().zip(cards).fold(0, |acc, (v, c)| acc * c + v)
    }

    pub fn decode(cards: &[usize], mut index: usize) -> Vec<usize> {
        let mut out = vec![0; cards.len()];
        for (slot, c) in out.iter_mut().zip(cards).rev() {
            *slot = index % c;
            index /= c;
        }
        out
    }
}

impl Iterator for Configurations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut pos = self.cards.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.current[pos] += 1;
            if self.current[pos] < self.cards[pos] {
                break;
            }
            self.current[pos] = 0;
        }
        Some(out)
    }
}

/// A causal influence diagram. Immutable; see [`ModelBuilder`].
#[derive(Clone, Debug)]
pub struct CidModel {
    agents: Vec<AgentId>,
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
    children: Vec<Vec<usize>>,
    utility_levels: Vec<Vec<f64>>,
    twin: TwinMeta,
}

impl CidModel {
    fn assemble(agents: Vec<AgentId>, nodes: Vec<Node>, twin: TwinMeta) -> Self {
        let index = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let mut children = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            for &p in &n.parents {
                children[p].push(i);
            }
        }
        let utility_levels = nodes
            .iter()
            .map(|n| match &n.mechanism {
                Some(Mechanism::Utility(t)) if n.kind.is_utility() => {
                    let mut v: Vec<f64> = t.values.clone();
                    v.sort_by(|a, b| a.total_cmp(b));
                    v.dedup();
                    v
                }
                _ => Vec::new(),
            })
            .collect();
        CidModel { agents, nodes, index, children, utility_levels, twin }
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.agents.is_empty()
    }

    pub fn twin(&self) -> &TwinMeta {
        &self.twin
    }

    pub fn node(&self, id: &str) -> Result<&Node> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(&NodeId::unchecked(id)).copied().ok_or_else(|| CidError::UnknownNode(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(&NodeId::unchecked(id))
    }

    pub fn has_agent(&self, agent: &str) -> bool {
        self.agents.iter().any(|a| a.as_str() == agent)
    }

    pub fn agent(&self, agent: &str) -> Result<&AgentId> {
        self.agents.iter().find(|a| a.as_str() == agent).ok_or_else(|| CidError::UnknownAgent(agent.to_string()))
    }

    pub fn id(&self, i: usize) -> &NodeId {
        &self.nodes[i].id
    }

    pub fn parent_indices(&self, i: usize) -> &[usize] {
        &self.nodes[i].parents
    }

    pub fn child_indices(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Number of outcomes of node `i`. For utilities this is the number of
    /// distinct values the table attains.
    pub fn cardinality(&self, i: usize) -> usize {
        match self.nodes[i].kind {
            NodeKind::Utility(_) => self.utility_levels[i].len(),
            _ => self.nodes[i].domain.len(),
        }
    }

    /// Outcome labels; utilities are labelled by their attained values.
    pub fn outcomes(&self, i: usize) -> Vec<String> {
        match self.nodes[i].kind {
            NodeKind::Utility(_) => self.utility_levels[i].iter().map(|v| format!("{v}")).collect(),
            _ => self.nodes[i].domain.labels().to_vec(),
        }
    }

    /// Sorted distinct values attained by a utility node (empty otherwise).
    pub fn utility_levels(&self, i: usize) -> &[f64] {
        &self.utility_levels[i]
    }

    pub fn outcome_index(&self, i: usize, label: &str) -> Result<usize> {
        self.outcomes(i)
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| CidError::UnknownOutcome { node: self.nodes[i].id.to_string(), outcome: label.to_string() })
    }

    pub fn parent_cards(&self, i: usize) -> Vec<usize> {
        self.nodes[i].parents.iter().map(|&p| self.cardinality(p)).collect()
    }

    pub fn config_count(&self, i: usize) -> usize {
        Configurations::total(&self.parent_cards(i))
    }

    pub fn decisions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind.is_decision())
    }

    pub fn decisions_of<'a>(&'a self, agent: &'a str) -> impl Iterator<Item = usize> + 'a {
        (0..self.nodes.len())
            .filter(move |&i| matches!(&self.nodes[i].kind, NodeKind::Decision(a) if a.as_str() == agent))
    }

    pub fn utilities_of<'a>(&'a self, agent: &'a str) -> impl Iterator<Item = usize> + 'a {
        (0..self.nodes.len())
            .filter(move |&i| matches!(&self.nodes[i].kind, NodeKind::Utility(a) if a.as_str() == agent))
    }

    pub fn parents(&self, id: &str) -> Result<Vec<&NodeId>> {
        let i = self.index_of(id)?;
        Ok(self.nodes[i].parents.iter().map(|&p| &self.nodes[p].id).collect())
    }

    pub fn children(&self, id: &str) -> Result<Vec<&NodeId>> {
        let i = self.index_of(id)?;
        Ok(self.children[i].iter().map(|&c| &self.nodes[c].id).collect())
    }

    pub fn ancestors(&self, id: &str) -> Result<BTreeSet<NodeId>> {
        let i = self.index_of(id)?;
        let mask = self.reach(&[i], false);
        Ok(self.mask_to_set(&mask, i))
    }

    pub fn descendants(&self, id: &str) -> Result<BTreeSet<NodeId>> {
        let i = self.index_of(id)?;
        let mask = self.reach(&[i], true);
        Ok(self.mask_to_set(&mask, i))
    }

    fn mask_to_set(&self, mask: &[bool], exclude: usize) -> BTreeSet<NodeId> {
        mask.iter().enumerate().filter(|(j, m)| **m && *j != exclude).map(|(j, _)| self.nodes[j].id.clone()).collect()
    }

    /// Nodes reachable from `seeds` (seeds included) following children
    /// (`down`) or parents.
    pub fn reach(&self, seeds: &[usize], down: bool) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if mask[v] {
                continue;
            }
            mask[v] = true;
            let next = if down { &self.children[v] } else { &self.nodes[v].parents };
            stack.extend(next.iter().copied().filter(|&w| !mask[w]));
        }
        mask
    }

    /// Every edge, ordered by child declaration order then canonical parent order.
    pub fn edges(&self) -> Vec<Edge> {
        self.nodes
            .iter()
            .flat_map(|n| {
                n.parents.iter().map(move |&p| Edge {
                    from: self.nodes[p].id.clone(),
                    to: n.id.clone(),
                    kind: EdgeKind::for_target(&n.kind),
                })
            })
            .collect()
    }

    /// Deterministic topological order, ties broken by declaration order.
    /// Nodes on a cycle are omitted.
    pub fn topological_indices(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.nodes.iter().map(|x| x.parents.len()).collect();
        let mut heap: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = heap.pop() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(Reverse(c));
                }
            }
        }
        order
    }

    pub fn topological_order(&self) -> Vec<NodeId> {
        self.topological_indices().into_iter().map(|i| self.nodes[i].id.clone()).collect()
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_indices().len() == self.nodes.len()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let paired: HashSet<&NodeId> = self.twin.pairs.iter().map(|(cf, _)| cf).collect();

        let mut seen_agents = HashSet::new();
        for a in &self.agents {
            if !is_identifier(a.as_str()) {
                report.push(a.as_str(), Rule::Identifier, "agent name is not an identifier");
            }
            if !seen_agents.insert(a) {
                report.push(a.as_str(), Rule::DuplicateName, "agent declared twice");
            }
        }

        for n in &self.nodes {
            let name = n.id.as_str();
            if !is_node_name(name) {
                report.push(name, Rule::Identifier, "node name is not an identifier");
            } else if n.id.is_counterfactual() && !paired.contains(&n.id) {
                report.push(name, Rule::Identifier, "names ending in `'` are reserved for counterfactual copies");
            }
            if let Some(owner) = n.kind.owner() {
                if !self.agents.contains(owner) {
                    report.push(name, Rule::UnknownAgent, format!("undeclared agent `{owner}`"));
                }
            }
            if n.kind.is_utility() {
                if !n.domain.is_empty() {
                    report.push(name, Rule::Domain, "utility nodes take no declared domain");
                }
            } else {
                if n.domain.is_empty() {
                    report.push(name, Rule::Domain, "domain must have at least one outcome");
                }
                let mut seen = HashSet::new();
                for l in n.domain.labels() {
                    if !is_identifier(l) {
                        report.push(name, Rule::Domain, format!("outcome `{l}` is not an identifier"));
                    }
                    if !seen.insert(l) {
                        report.push(name, Rule::Domain, format!("outcome `{l}` listed twice"));
                    }
                }
            }
        }

        if !self.is_acyclic() {
            let placed: HashSet<usize> = self.topological_indices().into_iter().collect();
            let cyclic: Vec<&str> =
                (0..self.nodes.len()).filter(|i| !placed.contains(i)).map(|i| self.nodes[i].id.as_str()).collect();
            report.push(cyclic.join(", "), Rule::Cycle, "cycle");
        }

        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind.is_utility() {
                for &c in &self.children[i] {
                    if !self.nodes[c].kind.is_decision() {
                        report.push(
                            format!("{} -> {}", n.id, self.nodes[c].id),
                            Rule::UtilityChild,
                            "utility nodes may only have decision children",
                        );
                    }
                }
            }
            self.validate_mechanism(i, &mut report);
        }

        self.validate_twin(&mut report);
        if report.ok() {
            report.warnings = self.ignored_edge_warnings();
        }
        report
    }

    fn validate_mechanism(&self, i: usize, report: &mut ValidationReport) {
        let n = &self.nodes[i];
        let name = n.id.as_str();
        // parent cardinalities of utility parents are only meaningful for decisions
        let has_utility_parent = n.parents.iter().any(|&p| self.nodes[p].kind.is_utility());
        match (&n.kind, &n.mechanism) {
            (NodeKind::Decision(_), None) => {}
            (NodeKind::Decision(_), Some(_)) => report.push(name, Rule::Mechanism, "decision nodes carry no mechanism"),
            (NodeKind::Chance, Some(Mechanism::Chance(cpt))) => {
                if has_utility_parent {
                    return;
                }
                let expected = self.config_count(i);
                if cpt.rows.len() != expected {
                    report.push(name, Rule::Mechanism, format!("cpt has {} rows, expected {expected}", cpt.rows.len()));
                    return;
                }
                for (r, row) in cpt.rows.iter().enumerate() {
                    if row.len() != n.domain.len() {
                        report.push(
                            name,
                            Rule::Mechanism,
                            format!("row {r} has {} entries, expected {}", row.len(), n.domain.len()),
                        );
                        continue;
                    }
                    if row.iter().any(|p| !p.is_finite() || *p < -PROB_TOL || *p > 1.0 + PROB_TOL) {
                        report.push(name, Rule::Probability, format!("row {r} has a probability outside [0, 1]"));
                        continue;
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > PROB_TOL {
                        report.push(name, Rule::RowSum, format!("row {r}: row sum {} \u{2260} 1", fmt_sum(sum)));
                    }
                }
            }
            (NodeKind::Utility(_), Some(Mechanism::Utility(table))) => {
                if has_utility_parent {
                    return;
                }
                let expected = self.config_count(i);
                if table.values.len() != expected {
                    report.push(
                        name,
                        Rule::Mechanism,
                        format!("table has {} rows, expected {expected}", table.values.len()),
                    );
                }
                if table.values.iter().any(|v| !v.is_finite()) {
                    report.push(name, Rule::UtilityValue, "utility values must be finite");
                }
            }
            (NodeKind::Chance, _) => report.push(name, Rule::Mechanism, "chance node needs a cpt"),
            (NodeKind::Utility(_), _) => report.push(name, Rule::Mechanism, "utility node needs a table"),
        }
    }

    fn validate_twin(&self, report: &mut ValidationReport) {
        for (cf, fact) in &self.twin.pairs {
            if !self.contains(cf.as_str()) || !self.contains(fact.as_str()) {
                report.push(format!("{cf} ~ {fact}"), Rule::Twin, "twin pair names an unknown node");
            } else if cf.factual().as_ref() != Some(fact) {
                report.push(format!("{cf} ~ {fact}"), Rule::Twin, "counterfactual copy must be named `<factual>'`");
            }
        }
        for u in &self.twin.noise {
            match self.index.get(u) {
                Some(&i) if self.nodes[i].kind.is_chance() && self.nodes[i].parents.is_empty() => {}
                Some(_) => report.push(u.as_str(), Rule::Twin, "noise nodes must be root chance nodes"),
                None => report.push(u.as_str(), Rule::Twin, "unknown noise node"),
            }
        }
    }

    /// Causal edges whose head's mechanism does not vary with the tail.
    /// Exact zero-influence is parameter dependent, so these are warnings only.
    fn ignored_edge_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind.is_decision() || n.parents.is_empty() {
                continue;
            }
            let cards = self.parent_cards(i);
            for (pos, &p) in n.parents.iter().enumerate() {
                let mut varies = false;
                'configs: for cfg in Configurations::new(cards.clone()) {
                    if cfg[pos] != 0 {
                        continue;
                    }
                    let base = Configurations::index_of(&cards, &cfg);
                    for alt in 1..cards[pos] {
                        let mut other = cfg.clone();
                        other[pos] = alt;
                        let j = Configurations::index_of(&cards, &other);
                        let differs = match &n.mechanism {
                            Some(Mechanism::Chance(c)) => {
                                c.rows[base].iter().zip(&c.rows[j]).any(|(a, b)| (a - b).abs() > PROB_TOL)
                            }
                            Some(Mechanism::Utility(u)) => (u.values[base] - u.values[j]).abs() > PROB_TOL,
                            None => false,
                        };
                        if differs {
                            varies = true;
                            break 'configs;
                        }
                    }
                }
                if !varies && cards[pos] > 1 {
                    out.push(format!(
                        "edge {} -> {} has no influence under the current mechanism",
                        self.nodes[p].id, n.id
                    ));
                }
            }
        }
        out
    }

    /// Structural equality (agents, nodes, kinds, domains, tags, parents,
    /// twin metadata) with mechanisms compared within `tol`.
    pub fn approx_eq(&self, other: &CidModel, tol: f64) -> bool {
        self.graph_eq(other) && self.nodes.iter().zip(&other.nodes).all(|(a, b)| mech_close(a, b, tol))
    }

    /// Same agents, node set (name, kind, domain, world tag), parents in the
    /// same order and twin metadata; mechanisms ignored. Node declaration
    /// order must match.
    pub fn graph_eq(&self, other: &CidModel) -> bool {
        self.agents == other.agents
            && self.twin == other.twin
            && self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| {
                a.id == b.id
                    && a.kind == b.kind
                    && a.domain == b.domain
                    && a.world == b.world
                    && a.parents.len() == b.parents.len()
                    && a.parents.iter().zip(&b.parents).all(|(&x, &y)| self.nodes[x].id == other.nodes[y].id)
            })
    }

    /// Copy of the model with `node`'s mechanism replaced, revalidated.
    pub fn with_mechanism(&self, node: &str, mechanism: Mechanism) -> Result<CidModel> {
        self.index_of(node)?;
        let mut b = self.to_builder();
        if let Some(n) = b.nodes_mut().iter_mut().find(|n| n.name == node) {
            n.mechanism = Some(mechanism);
        }
        b.build()
    }

    /// Copy of the model without the edge `from -> to`. Utility tables and
    /// CPTs of `to` must not depend on the removed parent, so this is only
    /// offered for edges into decisions.
    pub fn without_information_link(&self, from: &str, to: &str) -> Result<CidModel> {
        let t = self.index_of(to)?;
        let f = self.index_of(from)?;
        if !self.nodes[t].kind.is_decision() {
            return Err(CidError::NotADecision(to.to_string()));
        }
        if !self.nodes[t].parents.contains(&f) {
            return Err(CidError::InvalidQuery(format!("`{from}` is not observed by `{to}`")));
        }
        let mut b = self.to_builder();
        if let Some(n) = b.nodes_mut().iter_mut().find(|n| n.name == to) {
            n.parents.retain(|p| p != from);
        }
        b.build()
    }

    /// Builder pre-populated with this model, for derived models.
    pub fn to_builder(&self) -> ModelBuilder {
        let mut b = ModelBuilder::new();
        for a in &self.agents {
            b.agent(a.as_str());
        }
        for n in &self.nodes {
            b.push(PendingNode {
                name: n.id.to_string(),
                kind: match &n.kind {
                    NodeKind::Chance => PendingKind::Chance,
                    NodeKind::Decision(a) => PendingKind::Decision(a.to_string()),
                    NodeKind::Utility(a) => PendingKind::Utility(a.to_string()),
                },
                domain: n.domain.labels().to_vec(),
                parents: n.parents.iter().map(|&p| self.nodes[p].id.to_string()).collect(),
                mechanism: n.mechanism.clone(),
                world: n.world,
            });
        }
        for (cf, f) in &self.twin.pairs {
            b.twin_pair(cf.as_str(), f.as_str());
        }
        for u in &self.twin.noise {
            b.noise(u.as_str());
        }
        b
    }
}

fn fmt_sum(v: f64) -> String {
    let s = format!("{:.12}", v);
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

fn mech_close(a: &Node, b: &Node, tol: f64) -> bool {
    match (&a.mechanism, &b.mechanism) {
        (None, None) => true,
        (Some(Mechanism::Chance(x)), Some(Mechanism::Chance(y))) => {
            x.rows.len() == y.rows.len()
                && x.rows
                    .iter()
                    .zip(&y.rows)
                    .all(|(r, s)| r.len() == s.len() && r.iter().zip(s).all(|(p, q)| (p - q).abs() <= tol))
        }
        (Some(Mechanism::Utility(x)), Some(Mechanism::Utility(y))) => {
            x.values.len() == y.values.len() && x.values.iter().zip(&y.values).all(|(p, q)| (p - q).abs() <= tol)
        }
        _ => false,
    }
}

#[derive(Clone, Debug)]
pub(crate) enum PendingKind {
    Chance,
    Decision(String),
    Utility(String),
}

#[derive(Clone, Debug)]
pub(crate) struct PendingNode {
    pub name: String,
    pub kind: PendingKind,
    pub domain: Vec<String>,
    pub parents: Vec<String>,
    pub mechanism: Option<Mechanism>,
    pub world: bool,
}

/// Incremental model construction.
///
/// Table-valued methods (`chance`, `utility`) accept raw rows in canonical
/// order and may reference parents declared later. The `*_fn` variants
/// compute the table from a closure over parent outcome labels and need the
/// parents declared first.
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    agents: Vec<String>,
    nodes: Vec<PendingNode>,
    twin: Vec<(String, String)>,
    noise: Vec<String>,
    errors: Vec<Violation>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn agent(&mut self, name: &str) -> &mut Self {
        self.agents.push(name.to_string());
        self
    }

    pub(crate) fn push(&mut self, node: PendingNode) -> &mut Self {
        self.nodes.push(node);
        self
    }

    pub fn chance(&mut self, name: &str, domain: &[&str], parents: &[&str], rows: Vec<Vec<f64>>) -> &mut Self {
        self.push(PendingNode {
            name: name.to_string(),
            kind: PendingKind::Chance,
            domain: domain.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            mechanism: Some(Mechanism::Chance(Cpt::new(rows))),
            world: false,
        })
    }

    pub fn decision(&mut self, name: &str, agent: &str, domain: &[&str], observes: &[&str]) -> &mut Self {
        self.push(PendingNode {
            name: name.to_string(),
            kind: PendingKind::Decision(agent.to_string()),
            domain: domain.iter().map(|s| s.to_string()).collect(),
            parents: observes.iter().map(|s| s.to_string()).collect(),
            mechanism: None,
            world: false,
        })
    }

    pub fn utility(&mut self, name: &str, agent: &str, parents: &[&str], values: Vec<f64>) -> &mut Self {
        self.push(PendingNode {
            name: name.to_string(),
            kind: PendingKind::Utility(agent.to_string()),
            domain: Vec::new(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            mechanism: Some(Mechanism::Utility(UtilityTable::new(values))),
            world: false,
        })
    }

    /// Chance node whose row for each parent configuration is `f(labels)`.
    pub fn chance_fn<S, F>(&mut self, name: &str, domain: &[S], parents: &[&str], f: F) -> &mut Self
    where
        S: AsRef<str>,
        F: Fn(&[&str]) -> Vec<f64>,
    {
        let domain: Vec<&str> = domain.iter().map(|s| s.as_ref()).collect();
        let rows = match self.parent_label_sets(name, parents) {
            Some(sets) => label_configs(&sets).iter().map(|cfg| f(cfg)).collect(),
            None => Vec::new(),
        };
        self.chance(name, &domain, parents, rows)
    }

    /// Deterministic chance node: `f(labels)` names the outcome.
    pub fn deterministic_fn<S, F>(&mut self, name: &str, domain: &[S], parents: &[&str], f: F) -> &mut Self
    where
        S: AsRef<str>,
        F: Fn(&[&str]) -> String,
    {
        let labels: Vec<String> = domain.iter().map(|s| s.as_ref().to_string()).collect();
        let err_name = name.to_string();
        let mut bad = None;
        let rows: Vec<Vec<f64>> = match self.parent_label_sets(name, parents) {
            Some(sets) => label_configs(&sets)
                .iter()
                .map(|cfg| {
                    let out = f(cfg);
                    let mut row = vec![0.0; labels.len()];
                    match labels.iter().position(|l| *l == out) {
                        Some(k) => row[k] = 1.0,
                        None => bad = Some(out),
                    }
                    row
                })
                .collect(),
            None => Vec::new(),
        };
        if let Some(out) = bad {
            self.errors.push(Violation {
                subject: err_name,
                rule: Rule::Mechanism,
                message: format!("mechanism produced unknown outcome `{out}`"),
            });
        }
        let domain: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        self.chance(name, &domain, parents, rows)
    }

    pub fn utility_fn<F>(&mut self, name: &str, agent: &str, parents: &[&str], f: F) -> &mut Self
    where
        F: Fn(&[&str]) -> f64,
    {
        let values = match self.parent_label_sets(name, parents) {
            Some(sets) => label_configs(&sets).iter().map(|cfg| f(cfg)).collect(),
            None => Vec::new(),
        };
        self.utility(name, agent, parents, values)
    }

    /// Tag an already declared node as a world-state variable.
    pub fn world(&mut self, name: &str) -> &mut Self {
        match self.nodes.iter_mut().find(|n| n.name == name) {
            Some(n) => n.world = true,
            None => self.errors.push(Violation {
                subject: name.to_string(),
                rule: Rule::UnknownParent,
                message: "world tag on an undeclared node".into(),
            }),
        }
        self
    }

    pub fn twin_pair(&mut self, counterfactual: &str, factual: &str) -> &mut Self {
        self.twin.push((counterfactual.to_string(), factual.to_string()));
        self
    }

    pub fn noise(&mut self, name: &str) -> &mut Self {
        self.noise.push(name.to_string());
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.iter().any(|n| n.name == name)
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut Vec<PendingNode> {
        &mut self.nodes
    }

    pub(crate) fn agents_mut(&mut self) -> &mut Vec<String> {
        &mut self.agents
    }

    pub(crate) fn twin_mut(&mut self) -> (&mut Vec<(String, String)>, &mut Vec<String>) {
        (&mut self.twin, &mut self.noise)
    }

    fn parent_label_sets(&mut self, name: &str, parents: &[&str]) -> Option<Vec<Vec<String>>> {
        let mut sets = Vec::with_capacity(parents.len());
        for p in parents {
            match self.nodes.iter().find(|n| n.name == *p) {
                Some(n) if !matches!(n.kind, PendingKind::Utility(_)) => sets.push(n.domain.clone()),
                _ => {
                    self.errors.push(Violation {
                        subject: name.to_string(),
                        rule: Rule::UnknownParent,
                        message: format!("parent `{p}` must be a chance or decision node declared earlier"),
                    });
                    return None;
                }
            }
        }
        Some(sets)
    }

    /// Resolve names without running validation.
    pub fn build_unchecked(&self) -> Result<CidModel> {
        let mut report = ValidationReport { violations: self.errors.clone(), warnings: Vec::new() };
        let mut index = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if index.insert(n.name.clone(), i).is_some() {
                report.push(n.name.as_str(), Rule::DuplicateName, "node declared twice");
            }
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let mut parents = Vec::with_capacity(n.parents.len());
            let mut seen = HashSet::new();
            for p in &n.parents {
                match index.get(p) {
                    Some(&j) => {
                        if !seen.insert(j) {
                            report.push(n.name.as_str(), Rule::DuplicateName, format!("parent `{p}` listed twice"));
                        }
                        parents.push(j);
                    }
                    None => report.push(n.name.as_str(), Rule::UnknownParent, format!("unknown parent `{p}`")),
                }
            }
            let kind = match &n.kind {
                PendingKind::Chance => NodeKind::Chance,
                PendingKind::Decision(a) => NodeKind::Decision(AgentId::unchecked(a.clone())),
                PendingKind::Utility(a) => NodeKind::Utility(AgentId::unchecked(a.clone())),
            };
            nodes.push(Node {
                id: NodeId::unchecked(n.name.clone()),
                kind,
                domain: Domain::new(n.domain.iter().cloned()),
                parents,
                mechanism: n.mechanism.clone(),
                world: n.world,
            });
        }
        if !report.ok() {
            return Err(CidError::Invalid(report));
        }
        let agents = self.agents.iter().map(|a| AgentId::unchecked(a.clone())).collect();
        let twin = TwinMeta {
            pairs: self
                .twin
                .iter()
                .map(|(c, f)| (NodeId::unchecked(c.clone()), NodeId::unchecked(f.clone())))
                .collect(),
            noise: self.noise.iter().map(|u| NodeId::unchecked(u.clone())).collect(),
        };
        Ok(CidModel::assemble(agents, nodes, twin))
    }

    /// Resolve and validate.
    pub fn build(&self) -> Result<CidModel> {
        let model = self.build_unchecked()?;
        let report = model.validate();
        if report.ok() {
            Ok(model)
        } else {
            Err(CidError::Invalid(report))
        }
    }
}

fn label_configs(sets: &[Vec<String>]) -> Vec<Vec<&str>> {
    let cards: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    Configurations::new(cards).map(|cfg| cfg.iter().zip(sets).map(|(&k, s)| s[k].as_str()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> CidModel {
        let mut b = ModelBuilder::new();
        b.agent("a")
            .chance("C", &["h", "t"], &[], vec![vec![0.5, 0.5]])
            .decision("D", "a", &["h", "t"], &["C"])
            .utility("U", "a", &["C", "D"], vec![1.0, 0.0, 0.0, 1.0]);
        b.build().unwrap()
    }

    #[test]
    fn single_chance_node_is_valid() {
        let mut b = ModelBuilder::new();
        b.chance("X", &["a", "b"], &[], vec![vec![0.5, 0.5]]);
        let m = b.build().unwrap();
        assert!(m.validate().ok());
        assert!(m.parents("X").unwrap().is_empty());
    }

    #[test]
    fn two_cycle_is_reported() {
        let mut b = ModelBuilder::new();
        b.chance("A", &["x"], &["B"], vec![vec![1.0]]).chance("B", &["x"], &["A"], vec![vec![1.0]]);
        let m = b.build_unchecked().unwrap();
        let report = m.validate();
        assert!(report.violations.iter().any(|v| v.rule == Rule::Cycle && v.message == "cycle"));
    }

    #[test]
    fn bad_row_sum_is_reported() {
        let mut b = ModelBuilder::new();
        b.chance("X", &["a", "b"], &[], vec![vec![0.5, 0.6]]);
        let err = b.build().unwrap_err();
        let CidError::Invalid(report) = err else { panic!() };
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].rule, Rule::RowSum);
        assert!(report.violations[0].message.contains("row sum 1.1 \u{2260} 1"), "{}", report.violations[0].message);
    }

    #[test]
    fn utility_with_chance_child_is_rejected() {
        let mut b = ModelBuilder::new();
        b.agent("a").utility("U", "a", &[], vec![1.0]).chance("X", &["a"], &["U"], vec![vec![1.0]]);
        let m = b.build_unchecked().unwrap();
        assert!(m.validate().violations.iter().any(|v| v.rule == Rule::UtilityChild));
    }

    #[test]
    fn utility_observed_by_decision_is_allowed() {
        let mut b = ModelBuilder::new();
        b.agent("a")
            .chance("S", &["x", "y"], &[], vec![vec![0.5, 0.5]])
            .utility("R", "a", &["S"], vec![0.0, 1.0])
            .decision("D", "a", &["l", "r"], &["R"]);
        let m = b.build().unwrap();
        let r = m.index_of("R").unwrap();
        assert_eq!(m.outcomes(r), vec!["0", "1"]);
        assert_eq!(m.edges()[1].kind, EdgeKind::Information);
    }

    #[test]
    fn undeclared_agent_and_parent() {
        let mut b = ModelBuilder::new();
        b.decision("D", "ghost", &["x"], &[]);
        let m = b.build_unchecked().unwrap();
        assert!(m.validate().violations.iter().any(|v| v.rule == Rule::UnknownAgent));

        let mut b = ModelBuilder::new();
        b.chance("X", &["x"], &["Nope"], vec![vec![1.0]]);
        assert!(matches!(b.build_unchecked(), Err(CidError::Invalid(_))));
    }

    #[test]
    fn chain_queries() {
        let mut b = ModelBuilder::new();
        b.chance("A", &["x"], &[], vec![vec![1.0]]).chance("B", &["x"], &["A"], vec![vec![1.0]]).chance(
            "C",
            &["x"],
            &["B"],
            vec![vec![1.0]],
        );
        let m = b.build().unwrap();
        let anc: Vec<String> = m.ancestors("C").unwrap().into_iter().map(|n| n.to_string()).collect();
        assert_eq!(anc, vec!["A", "B"]);
        assert_eq!(m.descendants("A").unwrap().len(), 2);
        assert!(matches!(m.parents("Z"), Err(CidError::UnknownNode(_))));
    }

    #[test]
    fn topological_tie_break_is_declaration_order() {
        let mut b = ModelBuilder::new();
        b.chance("Y", &["x"], &["X"], vec![vec![1.0]]).chance("X", &["x"], &[], vec![vec![1.0]]).chance(
            "W",
            &["x"],
            &[],
            vec![vec![1.0]],
        );
        let m = b.build().unwrap();
        let order: Vec<String> = m.topological_order().into_iter().map(|n| n.to_string()).collect();
        assert_eq!(order, vec!["X", "Y", "W"]);
    }

    #[test]
    fn edge_classification_follows_target_kind() {
        let m = coin();
        let kinds: Vec<(String, String, EdgeKind)> =
            m.edges().into_iter().map(|e| (e.from.to_string(), e.to.to_string(), e.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                ("C".into(), "D".into(), EdgeKind::Information),
                ("C".into(), "U".into(), EdgeKind::Causal),
                ("D".into(), "U".into(), EdgeKind::Causal),
            ]
        );
    }

    #[test]
    fn reserved_suffix_needs_twin_pairing() {
        let mut b = ModelBuilder::new();
        b.chance("X", &["a"], &[], vec![vec![1.0]]).chance("X'", &["a"], &[], vec![vec![1.0]]);
        let m = b.build_unchecked().unwrap();
        assert!(!m.validate().ok());
        b.twin_pair("X'", "X");
        assert!(b.build().is_ok());
    }

    #[test]
    fn ignored_edges_are_warnings() {
        let mut b = ModelBuilder::new();
        b.chance("A", &["x", "y"], &[], vec![vec![0.5, 0.5]]).chance(
            "B",
            &["x", "y"],
            &["A"],
            vec![vec![0.3, 0.7], vec![0.3, 0.7]],
        );
        let m = b.build().unwrap();
        let report = m.validate();
        assert!(report.ok());
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn configurations_enumerate_last_fastest() {
        let all: Vec<Vec<usize>> = Configurations::new(vec![2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        for (k, cfg) in all.iter().enumerate() {
            assert_eq!(Configurations::index_of(&[2, 3], cfg), k);
            assert_eq!(&Configurations::decode(&[2, 3], k), cfg);
        }
        assert_eq!(Configurations::new(vec![]).count(), 1);
    }
}
