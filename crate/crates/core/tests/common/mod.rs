//! Independent oracles and random model generators shared by the
//! integration tests. Nothing here calls the inference or solver code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cid_core::model::Configurations;
use cid_core::{CidModel, DecisionRule, ModelBuilder, PolicyProfile};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// brute-force enumeration

fn config_index(model: &CidModel, node: usize, values: &[usize]) -> usize {
    let mut idx = 0;
    for &p in model.parent_indices(node) {
        idx = idx * model.cardinality(p) + values[p];
    }
    idx
}

/// Every full assignment with positive probability under `profile`, with
/// utility nodes holding the index of their attained level.
pub struct Enumeration {
    pub rows: Vec<(Vec<usize>, f64)>,
}

pub fn enumerate(model: &CidModel, profile: &PolicyProfile) -> Enumeration {
    let n = model.len();
    let free: Vec<usize> = (0..n).filter(|&i| !model.nodes()[i].kind().is_utility()).collect();
    let utils: Vec<usize> = (0..n).filter(|&i| model.nodes()[i].kind().is_utility()).collect();
    let cards: Vec<usize> = free.iter().map(|&i| model.cardinality(i)).collect();
    let mut rows = Vec::new();
    for cfg in Configurations::new(cards) {
        let mut values = vec![0usize; n];
        for (k, &i) in free.iter().enumerate() {
            values[i] = cfg[k];
        }
        for &u in &utils {
            let v = utility_value(model, u, &values);
            values[u] = model.utility_levels(u).iter().position(|l| *l == v).expect("attained level");
        }
        let mut p = 1.0;
        for &i in &free {
            let c = config_index(model, i, &values);
            let node = &model.nodes()[i];
            p *= match node.cpt() {
                Some(cpt) => cpt.row(c)[values[i]],
                None => profile.get(node.id().as_str()).expect("profile covers decision").rows()[c][values[i]],
            };
            if p == 0.0 {
                break;
            }
        }
        if p > 0.0 {
            rows.push((values, p));
        }
    }
    Enumeration { rows }
}

pub fn utility_value(model: &CidModel, u: usize, values: &[usize]) -> f64 {
    model.nodes()[u].utility_table().unwrap().values()[config_index(model, u, values)]
}

impl Enumeration {
    /// P(targets | evidence) in mixed radix over the targets, last fastest;
    /// `None` when the evidence is impossible.
    pub fn marginal(&self, model: &CidModel, targets: &[usize], evidence: &[(usize, usize)]) -> Option<Vec<f64>> {
        let cards: Vec<usize> = targets.iter().map(|&t| model.cardinality(t)).collect();
        let mut out = vec![0.0; Configurations::total(&cards)];
        let mut z = 0.0;
        for (values, p) in &self.rows {
            if evidence.iter().any(|&(v, k)| values[v] != k) {
                continue;
            }
            let tv: Vec<usize> = targets.iter().map(|&t| values[t]).collect();
            out[Configurations::index_of(&cards, &tv)] += p;
            z += p;
        }
        (z > 0.0).then(|| out.into_iter().map(|v| v / z).collect())
    }

    pub fn expected_utility(&self, model: &CidModel, agent: &str) -> f64 {
        let utils: Vec<usize> = model.utilities_of(agent).collect();
        self.rows
            .iter()
            .map(|(values, p)| p * utils.iter().map(|&u| utility_value(model, u, values)).sum::<f64>())
            .sum()
    }
}

pub fn eu_oracle(model: &CidModel, profile: &PolicyProfile, agent: &str) -> f64 {
    enumerate(model, profile).expected_utility(model, agent)
}

/// Every pure rule of decision `d`, in no particular order.
pub fn pure_rules(model: &CidModel, d: usize) -> Vec<DecisionRule> {
    let configs = model.config_count(d);
    let card = model.cardinality(d);
    Configurations::new(vec![card; configs]).map(|actions| DecisionRule::pure(&actions, card)).collect()
}

/// Optimal value of `agent` by enumerating every pure profile of its
/// decisions, other decisions fixed by `fixed`.
pub fn optimal_value_oracle(model: &CidModel, agent: &str, fixed: &PolicyProfile) -> f64 {
    let decisions: Vec<usize> = model.decisions_of(agent).collect();
    let options: Vec<Vec<DecisionRule>> = decisions.iter().map(|&d| pure_rules(model, d)).collect();
    let sizes: Vec<usize> = options.iter().map(Vec::len).collect();
    let mut best = f64::NEG_INFINITY;
    for choice in Configurations::new(sizes) {
        let mut profile = fixed.clone();
        for (k, &d) in decisions.iter().enumerate() {
            profile.insert(model.id(d).clone(), options[k][choice[k]].clone());
        }
        best = best.max(eu_oracle(model, &profile, agent));
    }
    best
}

/// Every pure profile over all decisions, in arbitrary order.
pub fn all_pure_profiles(model: &CidModel) -> Vec<PolicyProfile> {
    let decisions: Vec<usize> = model.decisions().collect();
    let options: Vec<Vec<DecisionRule>> = decisions.iter().map(|&d| pure_rules(model, d)).collect();
    let sizes: Vec<usize> = options.iter().map(Vec::len).collect();
    Configurations::new(sizes)
        .map(|choice| {
            let mut profile = PolicyProfile::new();
            for (k, &d) in decisions.iter().enumerate() {
                profile.insert(model.id(d).clone(), options[k][choice[k]].clone());
            }
            profile
        })
        .collect()
}

/// Pure-equilibrium test by trying every unilateral pure deviation.
pub fn is_nash_oracle(model: &CidModel, profile: &PolicyProfile) -> bool {
    model.agents().iter().all(|a| {
        let a = a.as_str();
        let mut others = profile.clone();
        for d in model.decisions_of(a) {
            others.remove(model.id(d).as_str());
        }
        eu_oracle(model, profile, a) >= optimal_value_oracle(model, a, &others) - 1e-9
    })
}

// ---------------------------------------------------------------------------
// graph oracles

fn descendants(model: &CidModel, v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(x) = stack.pop() {
        for &c in model.child_indices(x) {
            if seen.insert(c) {
                stack.push(c);
            }
        }
    }
    seen
}

/// Every simple trail between `a` and `b`, as node sequences.
fn trails(model: &CidModel, a: usize, b: usize) -> Vec<Vec<usize>> {
    fn go(model: &CidModel, path: &mut Vec<usize>, b: usize, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == b {
            out.push(path.clone());
            return;
        }
        let next: Vec<usize> = model.parent_indices(v).iter().chain(model.child_indices(v)).copied().collect();
        for w in next {
            if !path.contains(&w) {
                path.push(w);
                go(model, path, b, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(model, &mut vec![a], b, &mut out);
    out
}

fn is_edge(model: &CidModel, from: usize, to: usize) -> bool {
    model.parent_indices(to).contains(&from)
}

pub fn trail_active(model: &CidModel, trail: &[usize], given: &BTreeSet<usize>) -> bool {
    trail.windows(3).all(|w| {
        let (a, v, b) = (w[0], w[1], w[2]);
        if is_edge(model, a, v) && is_edge(model, b, v) {
            descendants(model, v).iter().any(|d| given.contains(d))
        } else {
            !given.contains(&v)
        }
    })
}

/// d-separation by checking every simple trail.
pub fn dsep_oracle(model: &CidModel, xs: &[usize], ys: &[usize], zs: &[usize]) -> bool {
    let given: BTreeSet<usize> = zs.iter().copied().collect();
    for &x in xs {
        for &y in ys {
            if trails(model, x, y).iter().any(|t| trail_active(model, t, &given)) {
                return false;
            }
        }
    }
    true
}

fn directed_paths(model: &CidModel, a: usize, b: usize) -> Vec<Vec<usize>> {
    fn go(model: &CidModel, path: &mut Vec<usize>, b: usize, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == b {
            out.push(path.clone());
            return;
        }
        for &c in model.child_indices(v) {
            path.push(c);
            go(model, path, b, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(model, &mut vec![a], b, &mut out);
    out
}

pub fn mediates_oracle(model: &CidModel, a: usize, b: usize, via: &[usize]) -> bool {
    directed_paths(model, a, b).iter().all(|p| p.iter().any(|v| via.contains(v)))
}

pub fn has_directed_path(model: &CidModel, a: usize, b: usize) -> bool {
    !directed_paths(model, a, b).is_empty()
}

// ---------------------------------------------------------------------------
// random models

fn random_row(rng: &mut ChaCha8Rng, card: usize) -> Vec<f64> {
    let mut row: Vec<f64> =
        (0..card).map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.05..1.0) }).collect();
    if row.iter().all(|p| *p == 0.0) {
        row[rng.gen_range(0..card)] = 1.0;
    }
    let z: f64 = row.iter().sum();
    row.iter().map(|p| p / z).collect()
}

fn outcome_labels(card: usize) -> Vec<String> {
    (0..card).map(|k| format!("v{k}")).collect()
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn pick_parents(rng: &mut ChaCha8Rng, pool: &[String], p: f64, max: usize) -> Vec<String> {
    let mut out: Vec<String> = pool.iter().filter(|_| rng.gen_bool(p)).cloned().collect();
    while out.len() > max {
        out.remove(rng.gen_range(0..out.len()));
    }
    out
}

/// Chance-only model with up to `max_nodes` nodes and domains of size up to `max_card`.
pub fn random_bayes_model(rng: &mut ChaCha8Rng, max_nodes: usize, max_card: usize) -> CidModel {
    let n = rng.gen_range(1..=max_nodes);
    let mut b = ModelBuilder::new();
    let mut names: Vec<String> = Vec::new();
    let mut cards: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..n {
        let name = format!("X{i}");
        let card = rng.gen_range(1..=max_card);
        let parents = pick_parents(rng, &names, 0.45, 3);
        let configs: usize = parents.iter().map(|p| cards[p]).product();
        let rows = (0..configs).map(|_| random_row(rng, card)).collect();
        b.chance(&name, &refs(&outcome_labels(card)), &refs(&parents), rows);
        cards.insert(name.clone(), card);
        names.push(name);
    }
    b.build().expect("random model is valid")
}

/// Single-agent model ("a") with chance nodes, 1..=`max_decisions`
/// decisions and 1..=2 utilities. With `recall`, each decision also
/// observes every earlier decision and its observations.
pub fn random_decision_model(rng: &mut ChaCha8Rng, max_decisions: usize, recall: bool) -> CidModel {
    let mut b = ModelBuilder::new();
    b.agent("a");
    let mut pool: Vec<String> = Vec::new();
    let mut cards: BTreeMap<String, usize> = BTreeMap::new();
    let mut carried: Vec<String> = Vec::new();
    let decisions = rng.gen_range(1..=max_decisions);
    let chance = rng.gen_range(1..=3);
    let mut kinds: Vec<bool> = vec![true; decisions];
    kinds.extend(vec![false; chance]);
    // random interleaving of decisions and chance nodes
    for i in (1..kinds.len()).rev() {
        let j = rng.gen_range(0..=i);
        kinds.swap(i, j);
    }
    for (k, is_decision) in kinds.into_iter().enumerate() {
        let name = if is_decision { format!("D{k}") } else { format!("C{k}") };
        let card = rng.gen_range(2..=if is_decision { 2 } else { 3 });
        if is_decision {
            let mut obs = pick_parents(rng, &pool, 0.5, 2);
            if recall {
                for c in &carried {
                    if !obs.contains(c) {
                        obs.push(c.clone());
                    }
                }
                obs.sort_by_key(|o| pool.iter().position(|p| p == o));
            }
            let configs: usize = obs.iter().map(|p| cards[p]).product();
            if configs > 8 {
                obs.clear();
                if recall {
                    obs = carried.clone();
                }
            }
            b.decision(&name, "a", &refs(&outcome_labels(card)), &refs(&obs));
            for o in obs {
                if !carried.contains(&o) {
                    carried.push(o);
                }
            }
            carried.push(name.clone());
        } else {
            let parents = pick_parents(rng, &pool, 0.5, 2);
            let configs: usize = parents.iter().map(|p| cards[p]).product();
            let rows = (0..configs).map(|_| random_row(rng, card)).collect();
            b.chance(&name, &refs(&outcome_labels(card)), &refs(&parents), rows);
        }
        cards.insert(name.clone(), card);
        pool.push(name);
    }
    let utilities = rng.gen_range(1..=2);
    for u in 0..utilities {
        let mut parents = pick_parents(rng, &pool, 0.5, 3);
        if parents.is_empty() {
            parents.push(pool[rng.gen_range(0..pool.len())].clone());
        }
        parents.sort_by_key(|o| pool.iter().position(|p| p == o));
        let configs: usize = parents.iter().map(|p| cards[p]).product();
        let values = (0..configs).map(|_| (rng.gen_range(0..5) as f64) / 2.0).collect();
        b.utility(&format!("U{u}"), "a", &refs(&parents), values);
    }
    b.build().expect("random decision model is valid")
}

/// Replace the CPT rows of `node` by random rows of the same shape.
pub fn perturbed_rows(rng: &mut ChaCha8Rng, model: &CidModel, node: &str) -> Vec<Vec<f64>> {
    let i = model.index_of(node).unwrap();
    (0..model.config_count(i)).map(|_| random_row(rng, model.cardinality(i))).collect()
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// C uniform on {h,t}; D observes C when `linked`; U = 1 iff D = C.
pub fn coin(linked: bool) -> CidModel {
    let mut b = ModelBuilder::new();
    b.agent("a");
    b.chance("C", &["h", "t"], &[], vec![vec![0.5, 0.5]]);
    b.decision("D", "a", &["h", "t"], if linked { &["C"] } else { &[] });
    b.utility_fn("U", "a", &["C", "D"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
    b.build().expect("coin is valid")
}
