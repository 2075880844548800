//! Optimal policies for one agent and pure Nash equilibria for several.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CidError, Result};
use crate::inference::{agent_value, eliminate, skeleton, BayesNet, Table};
use crate::limits::Limits;
use crate::model::{CidModel, NodeId, PendingKind};
use crate::policy::{DecisionRule, PolicyProfile};

const TIE_TOL: f64 = 1e-12;
const NASH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Auto,
    Exhaustive,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveMethod {
    Exhaustive,
    BackwardInduction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub agent: String,
    pub profile: PolicyProfile,
    pub value: BTreeMap<String, f64>,
    pub method: SolveMethod,
    pub explored: u64,
}

impl SolveResult {
    pub fn to_json(&self, model: &CidModel) -> Value {
        json!({
            "agent": self.agent,
            "method": self.method,
            "explored": self.explored,
            "value": self.value,
            "policy": self.profile.to_json(model),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecallCertificate {
    pub agent: String,
    pub order: Vec<NodeId>,
    pub ok: bool,
    /// (later decision, observation it lacks)
    pub failures: Vec<(NodeId, NodeId)>,
}

/// Check that each of the agent's decisions, in topological order, observes
/// every earlier decision of the agent and everything that decision observed.
pub fn check_sufficient_recall(model: &CidModel, agent: &str) -> Result<RecallCertificate> {
    model.agent(agent)?;
    let order: Vec<usize> = model
        .topological_indices()
        .into_iter()
        .filter(|&i| {
            model.nodes()[i].kind().is_decision() && model.nodes()[i].kind().owner().unwrap().as_str() == agent
        })
        .collect();
    let mut failures = Vec::new();
    for (j, &later) in order.iter().enumerate() {
        let seen = model.parent_indices(later);
        for &earlier in &order[..j] {
            let mut needed = vec![earlier];
            needed.extend_from_slice(model.parent_indices(earlier));
            for n in needed {
                if !seen.contains(&n) && !failures.contains(&(later, n)) {
                    failures.push((later, n));
                }
            }
        }
    }
    Ok(RecallCertificate {
        agent: agent.to_string(),
        order: order.iter().map(|&i| model.id(i).clone()).collect(),
        ok: failures.is_empty(),
        failures: failures.into_iter().map(|(a, b)| (model.id(a).clone(), model.id(b).clone())).collect(),
    })
}

/// Number of pure decision rules for decision `d`.
fn rule_count(model: &CidModel, d: usize) -> u128 {
    let card = model.cardinality(d) as u128;
    let configs = model.config_count(d) as u32;
    card.checked_pow(configs).unwrap_or(u128::MAX)
}

/// Pure rule number `index`: row 0 is the most significant digit.
fn pure_rule(model: &CidModel, d: usize, mut index: u128) -> Vec<f64> {
    let card = model.cardinality(d);
    let configs = model.config_count(d);
    let mut actions = vec![0usize; configs];
    for r in (0..configs).rev() {
        actions[r] = (index % card as u128) as usize;
        index /= card as u128;
    }
    let mut flat = vec![0.0; configs * card];
    for (r, a) in actions.iter().enumerate() {
        flat[r * card + a] = 1.0;
    }
    flat
}

fn rule_from_flat(flat: &[f64], card: usize) -> DecisionRule {
    DecisionRule::new(flat.chunks(card).map(<[f64]>::to_vec).collect())
}

/// Enumerates joint pure rules for a set of decisions, last decision fastest.
struct PureSpace {
    decisions: Vec<usize>,
    radix: Vec<u128>,
    total: u128,
}

impl PureSpace {
    fn new(model: &CidModel, decisions: Vec<usize>, limits: &Limits, what: &'static str) -> Result<Self> {
        let radix: Vec<u128> = decisions.iter().map(|&d| rule_count(model, d)).collect();
        let total = radix.iter().try_fold(1u128, |acc, &r| acc.checked_mul(r)).unwrap_or(u128::MAX);
        if total > limits.max_policies {
            return Err(CidError::ResourceCap { what, needed: total, cap: limits.max_policies });
        }
        Ok(PureSpace { decisions, radix, total })
    }

    fn digits(&self, mut index: u128) -> Vec<u128> {
        let mut out = vec![0; self.radix.len()];
        for k in (0..self.radix.len()).rev() {
            out[k] = index % self.radix[k];
            index /= self.radix[k];
        }
        out
    }

    fn apply(&self, model: &CidModel, net: &mut BayesNet, index: u128) {
        for (&d, digit) in self.decisions.iter().zip(self.digits(index)) {
            net.set_cpt(d, pure_rule(model, d, digit));
        }
    }

    fn profile(&self, model: &CidModel, index: u128) -> PolicyProfile {
        let mut p = PolicyProfile::new();
        for (&d, digit) in self.decisions.iter().zip(self.digits(index)) {
            p.insert(model.id(d).clone(), rule_from_flat(&pure_rule(model, d, digit), model.cardinality(d)));
        }
        p
    }
}

fn all_values(model: &CidModel, net: &BayesNet, limits: &Limits) -> Result<BTreeMap<String, f64>> {
    model.agents().iter().map(|a| Ok((a.to_string(), agent_value(model, net, a.as_str(), limits)?))).collect()
}

/// Network with every decision outside `free` fixed by `fixed`.
fn fixed_network(model: &CidModel, free: &[usize], fixed: &PolicyProfile) -> Result<BayesNet> {
    let mut net = skeleton(model);
    for d in model.decisions() {
        if !free.contains(&d) {
            let rule = fixed.check_rule(model, d)?;
            net.set_cpt(d, rule.rows().concat());
        }
    }
    Ok(net)
}

fn first_max(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|&v| v >= max - TIE_TOL).unwrap_or(0)
}

fn exhaustive(
    model: &CidModel,
    agent: &str,
    free: Vec<usize>,
    fixed: &PolicyProfile,
    limits: &Limits,
) -> Result<SolveResult> {
    let base = fixed_network(model, &free, fixed)?;
    let space = PureSpace::new(model, free, limits, "pure policies")?;
    let values: Vec<f64> = (0..space.total as u64)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |net, idx| {
                space.apply(model, net, idx as u128);
                agent_value(model, net, agent, limits)
            },
        )
        .collect::<Result<_>>()?;
    let best = first_max(&values) as u128;
    let mut net = base;
    space.apply(model, &mut net, best);
    let profile = space.profile(model, best).merged(fixed);
    Ok(SolveResult {
        agent: agent.to_string(),
        value: all_values(model, &net, limits)?,
        profile: restrict(model, &profile),
        method: SolveMethod::Exhaustive,
        explored: space.total as u64,
    })
}

fn restrict(model: &CidModel, profile: &PolicyProfile) -> PolicyProfile {
    let mut out = PolicyProfile::new();
    for d in model.decisions() {
        if let Some(r) = profile.get(model.id(d).as_str()) {
            out.insert(model.id(d).clone(), r.clone());
        }
    }
    out
}

fn backward(
    model: &CidModel,
    agent: &str,
    order: &[usize],
    fixed: &PolicyProfile,
    limits: &Limits,
) -> Result<SolveResult> {
    let mut net = fixed_network(model, order, fixed)?;
    let cards = net.cards();
    let utilities: Vec<usize> = model.utilities_of(agent).collect();
    let mut profile = PolicyProfile::new();
    for &d in order.iter().rev() {
        let card = model.cardinality(d);
        let configs = model.config_count(d);
        net.set_cpt(d, vec![1.0; configs * card]);
        let mut family = model.parent_indices(d).to_vec();
        family.push(d);
        let mut q = vec![0.0; configs * card];
        for &u in &utilities {
            let parents = model.parent_indices(u).to_vec();
            let mut seeds = parents.clone();
            seeds.extend_from_slice(&family);
            let relevant = net.ancestral_mask(&seeds);
            let mut tables: Vec<Table> = (0..net.len()).filter(|&i| relevant[i]).map(|i| net.table(i)).collect();
            let values = model.nodes()[u].utility_table().expect("utility table").values().to_vec();
            let pc = parents.iter().map(|&p| cards[p]).collect();
            tables.push(Table::new(parents, pc, values));
            let t = eliminate(tables, &family, &cards, limits)?;
            for (acc, v) in q.iter_mut().zip(&t.values) {
                *acc += v;
            }
        }
        let mut flat = vec![0.0; configs * card];
        for r in 0..configs {
            let a = first_max(&q[r * card..(r + 1) * card]);
            flat[r * card + a] = 1.0;
        }
        net.set_cpt(d, flat.clone());
        profile.insert(model.id(d).clone(), rule_from_flat(&flat, card));
    }
    let profile = profile.merged(fixed);
    Ok(SolveResult {
        agent: agent.to_string(),
        value: all_values(model, &net, limits)?,
        profile: restrict(model, &profile),
        method: SolveMethod::BackwardInduction,
        explored: order.len() as u64,
    })
}

/// Pure policy for `agent` maximizing its expected utility. Decisions of
/// other agents must be fixed by `fixed`.
pub fn solve_single_agent(model: &CidModel, agent: &str, method: Method, fixed: &PolicyProfile) -> Result<SolveResult> {
    solve_single_agent_with(model, agent, method, fixed, &Limits::from_env())
}

pub fn solve_single_agent_with(
    model: &CidModel,
    agent: &str,
    method: Method,
    fixed: &PolicyProfile,
    limits: &Limits,
) -> Result<SolveResult> {
    let cert = check_sufficient_recall(model, agent)?;
    let order: Vec<usize> = cert.order.iter().map(|d| model.index_of(d.as_str()).unwrap()).collect();
    match method {
        Method::Exhaustive => exhaustive(model, agent, order, fixed, limits),
        Method::Backward if !cert.ok => Err(CidError::Unsupported(format!(
            "backward induction needs sufficient recall; `{}` does not observe `{}`",
            cert.failures[0].0, cert.failures[0].1
        ))),
        Method::Backward => backward(model, agent, &order, fixed, limits),
        Method::Auto if cert.ok => backward(model, agent, &order, fixed, limits),
        Method::Auto => exhaustive(model, agent, order, fixed, limits),
    }
}

/// Best pure response of `agent` with every other decision held at `profile`.
pub fn best_response(model: &CidModel, profile: &PolicyProfile, agent: &str) -> Result<SolveResult> {
    best_response_with(model, profile, agent, &Limits::from_env())
}

pub fn best_response_with(
    model: &CidModel,
    profile: &PolicyProfile,
    agent: &str,
    limits: &Limits,
) -> Result<SolveResult> {
    let mut others = profile.clone();
    for d in model.decisions_of(agent) {
        others.remove(model.id(d).as_str());
    }
    solve_single_agent_with(model, agent, Method::Auto, &others, limits)
}

/// A pure equilibrium with the agents' expected utilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub profile: PolicyProfile,
    pub value: BTreeMap<String, f64>,
}

/// Outcome of exhaustive equilibrium search.
#[derive(Clone, Debug, PartialEq)]
pub struct NashReport {
    pub profiles_checked: u64,
    pub equilibria: Vec<Equilibrium>,
}

impl NashReport {
    pub fn to_json(&self, model: &CidModel) -> Value {
        json!({
            "profiles_checked": self.profiles_checked,
            "equilibria": self.equilibria.iter().map(|e| json!({
                "policy": e.profile.to_json(model),
                "value": e.value,
            })).collect::<Vec<_>>(),
        })
    }
}

/// All pure profiles in which no agent gains more than 1e-9 by deviating,
/// in enumeration order (last decision's rule varies fastest).
pub fn pure_nash_equilibria(model: &CidModel) -> Result<Vec<PolicyProfile>> {
    Ok(nash_search(model, &Limits::from_env())?.equilibria.into_iter().map(|e| e.profile).collect())
}

pub fn nash_search(model: &CidModel, limits: &Limits) -> Result<NashReport> {
    let decisions: Vec<usize> = model.decisions().collect();
    let base = skeleton(model);
    let space = PureSpace::new(model, decisions.clone(), limits, "joint pure profiles")?;
    let agents: Vec<String> = model.agents().iter().map(|a| a.to_string()).collect();
    let table: Vec<Vec<f64>> = (0..space.total as u64)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |net, idx| {
                space.apply(model, net, idx as u128);
                agents.iter().map(|a| agent_value(model, net, a, limits)).collect::<Result<Vec<f64>>>()
            },
        )
        .collect::<Result<_>>()?;

    // Per agent: the joint index with the agent's own digits zeroed
    // identifies the opponents' profile.
    let mut best: Vec<HashMap<u128, f64>> = vec![HashMap::new(); agents.len()];
    let key = |idx: u128, agent: &str| -> u128 {
        let digits = space.digits(idx);
        let mut k = 0u128;
        for (pos, (&d, digit)) in decisions.iter().zip(digits).enumerate() {
            let own = model.nodes()[d].kind().owner().is_some_and(|o| o.as_str() == agent);
            k = k * space.radix[pos] + if own { 0 } else { digit };
        }
        k
    };
    let owns: Vec<bool> = agents.iter().map(|a| model.decisions_of(a).next().is_some()).collect();
    for idx in 0..space.total {
        for (i, a) in agents.iter().enumerate() {
            if !owns[i] {
                continue;
            }
            let e = best[i].entry(key(idx, a)).or_insert(f64::NEG_INFINITY);
            *e = e.max(table[idx as usize][i]);
        }
    }
    let mut equilibria = Vec::new();
    for idx in 0..space.total {
        let stable = agents
            .iter()
            .enumerate()
            .all(|(i, a)| !owns[i] || table[idx as usize][i] >= best[i][&key(idx, a)] - NASH_TOL);
        if stable {
            let value = agents.iter().cloned().zip(table[idx as usize].iter().copied()).collect();
            equilibria.push(Equilibrium { profile: space.profile(model, idx), value });
        }
    }
    Ok(NashReport { profiles_checked: space.total as u64, equilibria })
}

/// Heuristic: iterate best responses from `start` until a fixed point or
/// `rounds` sweeps. Exhaustive search remains the authority.
pub fn best_response_iteration(
    model: &CidModel,
    start: &PolicyProfile,
    rounds: usize,
) -> Result<Option<PolicyProfile>> {
    let limits = Limits::from_env();
    let mut current = start.clone();
    for _ in 0..rounds {
        let mut changed = false;
        for a in model.agents() {
            if model.decisions_of(a.as_str()).next().is_none() {
                continue;
            }
            let before = crate::inference::expected_utility_with(model, &current, a.as_str(), &limits)?;
            let br = best_response_with(model, &current, a.as_str(), &limits)?;
            if br.value[a.as_str()] > before + NASH_TOL {
                current = br.profile;
                changed = true;
            }
        }
        if !changed {
            return Ok(Some(current));
        }
    }
    Ok(None)
}

/// Merge `members` into a single agent `team` owning all their decisions
/// and utilities, for common-payoff joint optimization.
pub fn team_model(model: &CidModel, members: &[&str], team: &str) -> Result<CidModel> {
    for m in members {
        model.agent(m)?;
    }
    let mut b = model.to_builder();
    let agents = b.agents_mut();
    let pos = agents.iter().position(|a| members.contains(&a.as_str())).unwrap_or(agents.len());
    agents.retain(|a| !members.contains(&a.as_str()));
    agents.insert(pos.min(agents.len()), team.to_string());
    for n in b.nodes_mut() {
        match &mut n.kind {
            PendingKind::Decision(a) | PendingKind::Utility(a) if members.contains(&a.as_str()) => {
                *a = team.to_string()
            }
            _ => {}
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::expected_utility;
    use crate::model::ModelBuilder;

    fn coin(observe: bool) -> CidModel {
        let mut b = ModelBuilder::new();
        b.agent("a");
        b.chance("C", &["h", "t"], &[], vec![vec![0.5, 0.5]]);
        b.decision("D", "a", &["h", "t"], if observe { &["C"] } else { &[] });
        b.utility_fn("U", "a", &["C", "D"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
        b.build().unwrap()
    }

    #[test]
    fn coin_copy_policy() {
        let m = coin(true);
        for method in [Method::Exhaustive, Method::Backward, Method::Auto] {
            let r = solve_single_agent(&m, "a", method, &PolicyProfile::new()).unwrap();
            assert!((r.value["a"] - 1.0).abs() < 1e-12);
            assert_eq!(r.profile.get("D").unwrap().actions().unwrap(), vec![0, 1]);
        }
        let r = solve_single_agent(&m, "a", Method::Exhaustive, &PolicyProfile::new()).unwrap();
        assert_eq!(r.explored, 4);
    }

    #[test]
    fn coin_blind_ties_to_first_action() {
        let m = coin(false);
        let r = solve_single_agent(&m, "a", Method::Exhaustive, &PolicyProfile::new()).unwrap();
        assert!((r.value["a"] - 0.5).abs() < 1e-12);
        assert_eq!(r.profile.get("D").unwrap().actions().unwrap(), vec![0]);
        let bi = solve_single_agent(&m, "a", Method::Backward, &PolicyProfile::new()).unwrap();
        assert_eq!(bi.profile, r.profile);
        assert!((expected_utility(&m, &r.profile, "a").unwrap() - r.value["a"]).abs() < 1e-12);
    }

    #[test]
    fn recall_requires_observing_past() {
        let mut b = ModelBuilder::new();
        b.agent("a");
        b.chance("S", &["x", "y"], &[], vec![vec![0.5, 0.5]]);
        b.decision("D1", "a", &["x", "y"], &["S"]);
        b.decision("D2", "a", &["x", "y"], &[]);
        b.utility_fn("U", "a", &["S", "D1", "D2"], |v| (v[0] == v[1]) as u8 as f64 + (v[0] == v[2]) as u8 as f64);
        let m = b.build().unwrap();
        let c = check_sufficient_recall(&m, "a").unwrap();
        assert!(!c.ok);
        assert_eq!(c.failures.len(), 2);
        assert!(solve_single_agent(&m, "a", Method::Backward, &PolicyProfile::new()).is_err());
        let r = solve_single_agent(&m, "a", Method::Auto, &PolicyProfile::new()).unwrap();
        assert_eq!(r.method, SolveMethod::Exhaustive);
        assert!((r.value["a"] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn policy_cap() {
        let m = coin(true);
        let limits = Limits { max_policies: 3, ..Limits::default() };
        let e = solve_single_agent_with(&m, "a", Method::Exhaustive, &PolicyProfile::new(), &limits).unwrap_err();
        assert!(e.is_resource_cap());
    }

    #[test]
    fn matching_pennies_has_no_pure_equilibrium() {
        let mut b = ModelBuilder::new();
        b.agent("p").agent("q");
        b.decision("X", "p", &["h", "t"], &[]);
        b.decision("Y", "q", &["h", "t"], &[]);
        b.utility_fn("Up", "p", &["X", "Y"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
        b.utility_fn("Uq", "q", &["X", "Y"], |v| if v[0] != v[1] { 1.0 } else { 0.0 });
        let m = b.build().unwrap();
        let r = nash_search(&m, &Limits::default()).unwrap();
        assert_eq!(r.profiles_checked, 4);
        assert!(r.equilibria.is_empty());
    }

    #[test]
    fn coordination_game_equilibria() {
        let mut b = ModelBuilder::new();
        b.agent("p").agent("q");
        b.decision("X", "p", &["h", "t"], &[]);
        b.decision("Y", "q", &["h", "t"], &[]);
        b.utility_fn("Up", "p", &["X", "Y"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
        b.utility_fn("Uq", "q", &["X", "Y"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
        let m = b.build().unwrap();
        let eq = pure_nash_equilibria(&m).unwrap();
        assert_eq!(eq.len(), 2);
        assert_eq!(eq[0].get("X").unwrap().actions().unwrap(), vec![0]);
        assert_eq!(eq[1].get("Y").unwrap().actions().unwrap(), vec![1]);
        let start = PolicyProfile::first_actions(&m);
        assert!(best_response_iteration(&m, &start, 3).unwrap().is_some());
        let team = team_model(&m, &["p", "q"], "team").unwrap();
        assert_eq!(team.agents().len(), 1);
        let r = solve_single_agent(&team, "team", Method::Exhaustive, &PolicyProfile::new()).unwrap();
        assert!((r.value["team"] - 2.0).abs() < 1e-12);
    }
}
