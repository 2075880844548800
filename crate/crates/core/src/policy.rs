//! Decision rules, policy profiles and the policy JSON file format.
//!
//! Policy file: `{decision: [{"when": [outcome...], "do": action | {"dist": {action: p}}}]}`.
//! `when` follows the decision's canonical parent order; `_` matches any
//! outcome and the first matching row wins.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::error::{CidError, Result};
use crate::model::{CidModel, Configurations, NodeId, PROB_TOL};

/// Distribution over a decision's outcomes for each observed parent configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRule {
    rows: Vec<Vec<f64>>,
}

impl DecisionRule {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        DecisionRule { rows }
    }

    pub fn pure(actions: &[usize], card: usize) -> Self {
        let rows = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; card];
                row[a] = 1.0;
                row
            })
            .collect();
        DecisionRule { rows }
    }

    pub fn uniform(configs: usize, card: usize) -> Self {
        DecisionRule { rows: vec![vec![1.0 / card as f64; card]; configs] }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn is_pure(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().all(|p| *p == 0.0 || *p == 1.0) && r.iter().filter(|p| **p == 1.0).count() == 1)
    }

    /// Chosen action per row, if the rule is pure.
    pub fn actions(&self) -> Option<Vec<usize>> {
        self.rows
            .iter()
            .map(|r| {
                let ones: Vec<usize> = (0..r.len()).filter(|&k| r[k] == 1.0).collect();
                (ones.len() == 1 && r.iter().all(|p| *p == 0.0 || *p == 1.0)).then(|| ones[0])
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyProfile {
    rules: BTreeMap<NodeId, DecisionRule>,
}

impl PolicyProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, decision: NodeId, rule: DecisionRule) {
        self.rules.insert(decision, rule);
    }

    pub fn remove(&mut self, decision: &str) -> Option<DecisionRule> {
        self.rules.remove(&NodeId::unchecked(decision))
    }

    pub fn get(&self, decision: &str) -> Option<&DecisionRule> {
        self.rules.get(&NodeId::unchecked(decision))
    }

    pub fn rules(&self) -> impl Iterator<Item = (&NodeId, &DecisionRule)> {
        self.rules.iter()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rules of `self`, with `other` filling any decision `self` lacks.
    pub fn merged(&self, other: &PolicyProfile) -> PolicyProfile {
        let mut out = other.clone();
        for (k, v) in &self.rules {
            out.rules.insert(k.clone(), v.clone());
        }
        out
    }

    pub fn is_pure(&self) -> bool {
        self.rules.values().all(DecisionRule::is_pure)
    }

    /// Pure profile choosing the first action everywhere.
    pub fn first_actions(model: &CidModel) -> PolicyProfile {
        let mut p = PolicyProfile::new();
        for d in model.decisions() {
            let rule = DecisionRule::pure(&vec![0; model.config_count(d)], model.cardinality(d));
            p.insert(model.id(d).clone(), rule);
        }
        p
    }

    /// Check shapes and normalization of the rule for decision index `d`.
    pub(crate) fn check_rule(&self, model: &CidModel, d: usize) -> Result<&DecisionRule> {
        let id = model.id(d);
        let rule = self.rules.get(id).ok_or_else(|| CidError::IncompleteProfile(id.to_string()))?;
        let configs = model.config_count(d);
        let card = model.cardinality(d);
        if rule.rows.len() != configs {
            return Err(CidError::InvalidPolicy(format!("`{id}` has {} rows, expected {configs}", rule.rows.len())));
        }
        for (r, row) in rule.rows.iter().enumerate() {
            if row.len() != card || row.iter().any(|p| !p.is_finite() || *p < -PROB_TOL) {
                return Err(CidError::InvalidPolicy(format!("`{id}` row {r} is not a distribution")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(CidError::InvalidPolicy(format!("`{id}` row {r} sums to {s}")));
            }
        }
        Ok(rule)
    }

    /// Errors unless every decision of the model is covered by a well-formed rule.
    pub fn check(&self, model: &CidModel) -> Result<()> {
        for d in model.decisions() {
            self.check_rule(model, d)?;
        }
        for id in self.rules.keys() {
            let i = model.index_of(id.as_str())?;
            if !model.nodes()[i].kind().is_decision() {
                return Err(CidError::NotADecision(id.to_string()));
            }
        }
        Ok(())
    }

    pub fn from_json(model: &CidModel, doc: &Value) -> Result<PolicyProfile> {
        let obj = doc.as_object().ok_or_else(|| CidError::json("", "policy must be an object"))?;
        let mut profile = PolicyProfile::new();
        for (name, rows) in obj {
            let path = format!("/{}", escape_pointer(name));
            let d = model.index_of(name).map_err(|_| CidError::json(&path, format!("unknown decision `{name}`")))?;
            if !model.nodes()[d].kind().is_decision() {
                return Err(CidError::json(&path, format!("`{name}` is not a decision")));
            }
            let rows = rows.as_array().ok_or_else(|| CidError::json(&path, "expected an array of rows"))?;
            let parents = model.parent_indices(d).to_vec();
            let parent_outcomes: Vec<Vec<String>> = parents.iter().map(|&p| model.outcomes(p)).collect();
            let outcomes = model.outcomes(d);
            let mut parsed: Vec<(Vec<Option<usize>>, Vec<f64>)> = Vec::new();
            for (r, row) in rows.iter().enumerate() {
                let rpath = format!("{path}/{r}");
                let when = row
                    .get("when")
                    .and_then(Value::as_array)
                    .ok_or_else(|| CidError::json(format!("{rpath}/when"), "expected an array"))?;
                if when.len() != parents.len() {
                    return Err(CidError::json(
                        format!("{rpath}/when"),
                        format!("expected {} values, found {}", parents.len(), when.len()),
                    ));
                }
                let mut key = Vec::with_capacity(when.len());
                for (k, w) in when.iter().enumerate() {
                    let label =
                        w.as_str().ok_or_else(|| CidError::json(format!("{rpath}/when/{k}"), "expected a string"))?;
                    if label == "_" {
                        key.push(None);
                    } else {
                        let idx = parent_outcomes[k].iter().position(|l| l == label).ok_or_else(|| {
                            CidError::json(
                                format!("{rpath}/when/{k}"),
                                format!("`{label}` is not an outcome of `{}`", model.id(parents[k])),
                            )
                        })?;
                        key.push(Some(idx));
                    }
                }
                let act = row.get("do").ok_or_else(|| CidError::json(format!("{rpath}/do"), "missing"))?;
                let mut dist = vec![0.0; outcomes.len()];
                match act {
                    Value::String(a) => {
                        let k = outcomes
                            .iter()
                            .position(|l| l == a)
                            .ok_or_else(|| CidError::json(format!("{rpath}/do"), format!("unknown action `{a}`")))?;
                        dist[k] = 1.0;
                    }
                    Value::Object(o) => {
                        let m = o
                            .get("dist")
                            .and_then(Value::as_object)
                            .ok_or_else(|| CidError::json(format!("{rpath}/do/dist"), "expected an object"))?;
                        for (a, p) in m {
                            let k = outcomes.iter().position(|l| l == a).ok_or_else(|| {
                                CidError::json(
                                    format!("{rpath}/do/dist/{}", escape_pointer(a)),
                                    format!("unknown action `{a}`"),
                                )
                            })?;
                            dist[k] = p.as_f64().ok_or_else(|| {
                                CidError::json(format!("{rpath}/do/dist/{}", escape_pointer(a)), "expected a number")
                            })?;
                        }
                    }
                    _ => return Err(CidError::json(format!("{rpath}/do"), "expected an action or {\"dist\": ...}")),
                }
                parsed.push((key, dist));
            }
            let cards: Vec<usize> = parent_outcomes.iter().map(Vec::len).collect();
            let mut table = Vec::with_capacity(Configurations::total(&cards));
            for cfg in Configurations::new(cards) {
                let hit = parsed
                    .iter()
                    .find(|(key, _)| key.iter().zip(&cfg).all(|(k, v)| k.is_none_or(|k| k == *v)))
                    .ok_or_else(|| {
                    let labels: Vec<&str> = cfg.iter().zip(&parent_outcomes).map(|(&v, o)| o[v].as_str()).collect();
                    CidError::json(&path, format!("no row covers ({})", labels.join(", ")))
                })?;
                table.push(hit.1.clone());
            }
            profile.insert(model.id(d).clone(), DecisionRule::new(table));
        }
        for d in model.decisions() {
            if profile.get(model.id(d).as_str()).is_some() {
                profile.check_rule(model, d)?;
            }
        }
        Ok(profile)
    }

    pub fn to_json(&self, model: &CidModel) -> Value {
        let mut out = Map::new();
        for (id, rule) in &self.rules {
            let Ok(d) = model.index_of(id.as_str()) else { continue };
            let parents = model.parent_indices(d);
            let parent_outcomes: Vec<Vec<String>> = parents.iter().map(|&p| model.outcomes(p)).collect();
            let cards: Vec<usize> = parent_outcomes.iter().map(Vec::len).collect();
            let outcomes = model.outcomes(d);
            let rows: Vec<Value> = Configurations::new(cards)
                .zip(&rule.rows)
                .map(|(cfg, row)| {
                    let when: Vec<&str> = cfg.iter().zip(&parent_outcomes).map(|(&v, o)| o[v].as_str()).collect();
                    let pure =
                        row.iter().position(|p| *p == 1.0).filter(|_| row.iter().all(|p| *p == 0.0 || *p == 1.0));
                    let act = match pure {
                        Some(k) => Value::String(outcomes[k].clone()),
                        None => {
                            let dist: Map<String, Value> =
                                outcomes.iter().zip(row).map(|(l, p)| (l.clone(), json!(p))).collect();
                            json!({ "dist": dist })
                        }
                    };
                    json!({ "when": when, "do": act })
                })
                .collect();
            out.insert(id.to_string(), Value::Array(rows));
        }
        Value::Object(out)
    }
}

pub(crate) fn escape_pointer(s: &str) -> String {
    s.replace('~', "~0").replace('/', "~1")
}
