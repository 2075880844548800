use serde_json::{json, Map, Value};

use super::{expand_rows, ExpandError, Pattern};
use crate::error::{CidError, Result};
use crate::model::{CidModel, Configurations, Cpt, Mechanism, ModelBuilder, PendingKind, PendingNode, UtilityTable};
use crate::policy::escape_pointer;

/// JSON mirror of the text format. Rows are written in full, zero
/// probabilities omitted.
pub fn to_json(model: &CidModel) -> Value {
    let mut nodes = Vec::new();
    let mut mechanisms = Map::new();
    for (i, node) in model.nodes().iter().enumerate() {
        let mut obj = Map::new();
        obj.insert("name".into(), json!(node.id().as_str()));
        obj.insert("kind".into(), json!(node.kind().keyword()));
        if let Some(a) = node.kind().owner() {
            obj.insert("agent".into(), json!(a.as_str()));
        }
        obj.insert("domain".into(), json!(node.domain().labels()));
        let parents: Vec<&str> = model.parent_indices(i).iter().map(|&p| model.id(p).as_str()).collect();
        obj.insert("parents".into(), json!(parents));
        if node.is_world() {
            obj.insert("world".into(), json!(true));
        }
        nodes.push(Value::Object(obj));

        let parent_labels: Vec<Vec<String>> = model.parent_indices(i).iter().map(|&p| model.outcomes(p)).collect();
        let cards: Vec<usize> = parent_labels.iter().map(Vec::len).collect();
        let when =
            |cfg: &[usize]| -> Vec<String> { cfg.iter().zip(&parent_labels).map(|(&v, l)| l[v].clone()).collect() };
        let rows: Vec<Value> = match node.mechanism() {
            Some(Mechanism::Chance(cpt)) => Configurations::new(cards)
                .enumerate()
                .map(|(r, cfg)| {
                    let dist: Map<String, Value> = cpt
                        .row(r)
                        .iter()
                        .zip(node.domain().labels())
                        .filter(|(p, _)| **p != 0.0)
                        .map(|(p, l)| (l.clone(), json!(p)))
                        .collect();
                    json!({"when": when(&cfg), "dist": dist})
                })
                .collect(),
            Some(Mechanism::Utility(t)) => Configurations::new(cards)
                .enumerate()
                .map(|(r, cfg)| json!({"when": when(&cfg), "value": t.values()[r]}))
                .collect(),
            None => continue,
        };
        mechanisms.insert(node.id().to_string(), json!({ "rows": rows }));
    }
    let mut doc = Map::new();
    doc.insert("agents".into(), json!(model.agents().iter().map(|a| a.as_str()).collect::<Vec<_>>()));
    doc.insert("nodes".into(), Value::Array(nodes));
    doc.insert("mechanisms".into(), Value::Object(mechanisms));
    let twin = model.twin();
    if !twin.is_empty() {
        let pairs: Map<String, Value> = twin.pairs.iter().map(|(c, f)| (c.to_string(), json!(f.as_str()))).collect();
        let noise: Vec<&str> = twin.noise.iter().map(|u| u.as_str()).collect();
        doc.insert("twin".into(), json!({"pairs": pairs, "noise": noise}));
    }
    Value::Object(doc)
}

pub fn to_json_string(model: &CidModel) -> String {
    let mut s = serde_json::to_string_pretty(&to_json(model)).expect("json values serialize");
    s.push('\n');
    s
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>> {
    let arr = v.as_array().ok_or_else(|| CidError::json(path, "expected an array of strings"))?;
    arr.iter()
        .enumerate()
        .map(|(k, x)| {
            x.as_str().map(str::to_string).ok_or_else(|| CidError::json(format!("{path}/{k}"), "expected a string"))
        })
        .collect()
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| CidError::json(format!("{path}/{key}"), "missing field"))
}

fn expand_err(e: ExpandError, path: &str, parents: &[String]) -> CidError {
    match e {
        ExpandError::Arity { row, expected } => {
            CidError::json(format!("{path}/rows/{row}/when"), format!("expected {expected} entries"))
        }
        ExpandError::Label { row, pos } => CidError::json(
            format!("{path}/rows/{row}/when/{pos}"),
            format!("not an outcome of parent `{}`", parents[pos]),
        ),
        ExpandError::Uncovered(cfg) => {
            CidError::json(format!("{path}/rows"), format!("no row covers ({})", cfg.join(", ")))
        }
    }
}

fn pattern(v: &Value, path: &str) -> Result<Pattern> {
    Ok(strings(v, path)?.into_iter().map(|s| if s == "_" { None } else { Some(s) }).collect())
}

/// Parse the JSON mirror. Schema errors carry JSON-pointer paths.
pub fn from_json(doc: &Value) -> Result<CidModel> {
    let root = doc.as_object().ok_or_else(|| CidError::json("", "expected an object"))?;
    let mut b = ModelBuilder::new();
    if let Some(agents) = root.get("agents") {
        for a in strings(agents, "/agents")? {
            b.agent(&a);
        }
    }
    let nodes = field(root, "nodes", "")?.as_array().ok_or_else(|| CidError::json("/nodes", "expected an array"))?;
    struct Raw {
        name: String,
        kind: PendingKind,
        domain: Vec<String>,
        parents: Vec<String>,
        world: bool,
    }
    let mut raw = Vec::with_capacity(nodes.len());
    for (k, n) in nodes.iter().enumerate() {
        let path = format!("/nodes/{k}");
        let obj = n.as_object().ok_or_else(|| CidError::json(&path, "expected an object"))?;
        let name = field(obj, "name", &path)?
            .as_str()
            .ok_or_else(|| CidError::json(format!("{path}/name"), "expected a string"))?
            .to_string();
        let kind_str = field(obj, "kind", &path)?
            .as_str()
            .ok_or_else(|| CidError::json(format!("{path}/kind"), "expected a string"))?;
        let agent = || -> Result<String> {
            field(obj, "agent", &path)?
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| CidError::json(format!("{path}/agent"), "expected a string"))
        };
        let kind = match kind_str {
            "chance" => {
                if obj.contains_key("agent") {
                    return Err(CidError::json(format!("{path}/agent"), "chance nodes have no owner"));
                }
                PendingKind::Chance
            }
            "decision" => PendingKind::Decision(agent()?),
            "utility" => PendingKind::Utility(agent()?),
            other => {
                return Err(CidError::json(
                    format!("{path}/kind"),
                    format!("unknown kind `{other}`; expected chance, decision or utility"),
                ))
            }
        };
        let domain = match obj.get("domain") {
            Some(d) => strings(d, &format!("{path}/domain"))?,
            None => Vec::new(),
        };
        let parents = match obj.get("parents") {
            Some(p) => strings(p, &format!("{path}/parents"))?,
            None => Vec::new(),
        };
        let world = match obj.get("world") {
            None => false,
            Some(Value::Bool(w)) => *w,
            Some(_) => return Err(CidError::json(format!("{path}/world"), "expected a boolean")),
        };
        raw.push(Raw { name, kind, domain, parents, world });
    }
    let empty = Map::new();
    let mechanisms = match root.get("mechanisms") {
        Some(Value::Object(m)) => m,
        Some(_) => return Err(CidError::json("/mechanisms", "expected an object")),
        None => &empty,
    };
    for name in mechanisms.keys() {
        if !raw.iter().any(|r| &r.name == name) {
            return Err(CidError::json(format!("/mechanisms/{}", escape_pointer(name)), "no such node"));
        }
    }
    for (k, r) in raw.iter().enumerate() {
        let path = format!("/mechanisms/{}", escape_pointer(&r.name));
        let mechanism = match &r.kind {
            PendingKind::Decision(_) => {
                if mechanisms.contains_key(&r.name) {
                    return Err(CidError::json(path, "decisions carry no mechanism"));
                }
                None
            }
            kind => {
                let mech = mechanisms
                    .get(&r.name)
                    .and_then(Value::as_object)
                    .ok_or_else(|| CidError::json(&path, "missing mechanism"))?;
                let rows = field(mech, "rows", &path)?
                    .as_array()
                    .ok_or_else(|| CidError::json(format!("{path}/rows"), "expected an array"))?;
                let mut parent_domains: Vec<&[String]> = Vec::new();
                for (j, p) in r.parents.iter().enumerate() {
                    match raw.iter().find(|x| &x.name == p) {
                        Some(x) if !matches!(x.kind, PendingKind::Utility(_)) => parent_domains.push(&x.domain),
                        Some(_) => {
                            return Err(CidError::json(
                                format!("/nodes/{k}/parents/{j}"),
                                "utilities can only be observed by decisions",
                            ))
                        }
                        None => {
                            return Err(CidError::json(
                                format!("/nodes/{k}/parents/{j}"),
                                format!("unknown node `{p}`"),
                            ))
                        }
                    }
                }
                let mut resolved_cpt: Vec<(Pattern, Vec<f64>)> = Vec::new();
                let mut resolved_util: Vec<(Pattern, f64)> = Vec::new();
                for (j, row) in rows.iter().enumerate() {
                    let rp = format!("{path}/rows/{j}");
                    let obj = row.as_object().ok_or_else(|| CidError::json(&rp, "expected an object"))?;
                    let pat = pattern(field(obj, "when", &rp)?, &format!("{rp}/when"))?;
                    if matches!(kind, PendingKind::Chance) {
                        let dist = field(obj, "dist", &rp)?
                            .as_object()
                            .ok_or_else(|| CidError::json(format!("{rp}/dist"), "expected an object"))?;
                        let mut probs = vec![0.0; r.domain.len()];
                        for (label, p) in dist {
                            let dp = format!("{rp}/dist/{}", escape_pointer(label));
                            let i = r.domain.iter().position(|d| d == label).ok_or_else(|| {
                                CidError::json(&dp, format!("`{label}` is not an outcome of `{}`", r.name))
                            })?;
                            probs[i] = p.as_f64().ok_or_else(|| CidError::json(&dp, "expected a number"))?;
                        }
                        resolved_cpt.push((pat, probs));
                    } else {
                        let v = field(obj, "value", &rp)?
                            .as_f64()
                            .ok_or_else(|| CidError::json(format!("{rp}/value"), "expected a number"))?;
                        resolved_util.push((pat, v));
                    }
                }
                Some(if matches!(kind, PendingKind::Chance) {
                    let t =
                        expand_rows(&parent_domains, &resolved_cpt).map_err(|e| expand_err(e, &path, &r.parents))?;
                    Mechanism::Chance(Cpt::new(t))
                } else {
                    let t =
                        expand_rows(&parent_domains, &resolved_util).map_err(|e| expand_err(e, &path, &r.parents))?;
                    Mechanism::Utility(UtilityTable::new(t))
                })
            }
        };
        b.push(PendingNode {
            name: r.name.clone(),
            kind: r.kind.clone(),
            domain: r.domain.clone(),
            parents: r.parents.clone(),
            mechanism,
            world: r.world,
        });
    }
    if let Some(twin) = root.get("twin") {
        let obj = twin.as_object().ok_or_else(|| CidError::json("/twin", "expected an object"))?;
        if let Some(pairs) = obj.get("pairs") {
            let pairs = pairs.as_object().ok_or_else(|| CidError::json("/twin/pairs", "expected an object"))?;
            for (cf, f) in pairs {
                let f = f.as_str().ok_or_else(|| {
                    CidError::json(format!("/twin/pairs/{}", escape_pointer(cf)), "expected a string")
                })?;
                b.twin_pair(cf, f);
            }
        }
        if let Some(noise) = obj.get("noise") {
            for u in strings(noise, "/twin/noise")? {
                b.noise(&u);
            }
        }
    }
    b.build()
}

pub fn from_json_str(text: &str) -> Result<CidModel> {
    let v: Value = serde_json::from_str(text).map_err(|e| CidError::json("", e.to_string()))?;
    from_json(&v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_kind_path() {
        let doc = json!({"agents": [], "nodes": [{"name": "X", "kind": "oracle", "domain": ["a"], "parents": []}], "mechanisms": {}});
        match from_json(&doc) {
            Err(CidError::Json { path, .. }) => assert_eq!(path, "/nodes/0/kind"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_with_wildcards() {
        let doc = json!({
            "agents": ["a"],
            "nodes": [
                {"name": "C", "kind": "chance", "domain": ["h", "t"], "parents": []},
                {"name": "D", "kind": "decision", "agent": "a", "domain": ["h", "t"], "parents": ["C"]},
                {"name": "U", "kind": "utility", "agent": "a", "domain": [], "parents": ["C", "D"]}
            ],
            "mechanisms": {
                "C": {"rows": [{"when": [], "dist": {"h": 0.5, "t": 0.5}}]},
                "U": {"rows": [{"when": ["h", "h"], "value": 1}, {"when": ["t", "t"], "value": 1}, {"when": ["_", "_"], "value": 0}]}
            }
        });
        let m = from_json(&doc).unwrap();
        assert_eq!(m.node("U").unwrap().utility_table().unwrap().values(), &[1.0, 0.0, 0.0, 1.0]);
        let back = from_json(&to_json(&m)).unwrap();
        assert!(back.approx_eq(&m, 0.0));
    }

    #[test]
    fn bad_dist_label_path() {
        let doc = json!({"nodes": [{"name": "C", "kind": "chance", "domain": ["h"], "parents": []}],
                         "mechanisms": {"C": {"rows": [{"when": [], "dist": {"z": 1.0}}]}}});
        match from_json(&doc) {
            Err(CidError::Json { path, .. }) => assert_eq!(path, "/mechanisms/C/rows/0/dist/z"),
            other => panic!("{other:?}"),
        }
    }
}
