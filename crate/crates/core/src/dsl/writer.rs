use std::fmt::Write;

use crate::model::{CidModel, Configurations, Mechanism, NodeKind};

/// Shortest decimal form of `v` rounded to 12 significant digits.
pub fn format_number(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

fn list(items: &[String]) -> String {
    items.join(", ")
}

/// Canonical text form: declaration order, full rows, zero probabilities
/// omitted, LF line endings.
pub fn serialize(model: &CidModel) -> String {
    let mut blocks: Vec<String> = Vec::new();
    if !model.agents().is_empty() {
        blocks.push(model.agents().iter().map(|a| format!("agent {a};\n")).collect());
    }
    for (i, node) in model.nodes().iter().enumerate() {
        let mut s = String::new();
        let parents: Vec<String> = model.parent_indices(i).iter().map(|&p| model.id(p).to_string()).collect();
        match node.kind() {
            NodeKind::Chance => writeln!(s, "chance {} {{", node.id()).unwrap(),
            NodeKind::Decision(a) => writeln!(s, "decision {} of {a} {{", node.id()).unwrap(),
            NodeKind::Utility(a) => writeln!(s, "utility {} of {a} {{", node.id()).unwrap(),
        }
        if !node.kind().is_utility() {
            writeln!(s, "  domain: [{}];", list(node.domain().labels())).unwrap();
        }
        if !parents.is_empty() {
            let field = if node.kind().is_decision() { "observes" } else { "parents" };
            writeln!(s, "  {field}: [{}];", list(&parents)).unwrap();
        }
        if node.is_world() {
            s.push_str("  world;\n");
        }
        let parent_labels: Vec<Vec<String>> = model.parent_indices(i).iter().map(|&p| model.outcomes(p)).collect();
        let cards: Vec<usize> = parent_labels.iter().map(Vec::len).collect();
        let key = |cfg: &[usize]| -> String {
            let labels: Vec<String> = cfg.iter().zip(&parent_labels).map(|(&v, l)| l[v].clone()).collect();
            format!("({})", list(&labels))
        };
        match node.mechanism() {
            Some(Mechanism::Chance(cpt)) => {
                s.push_str("  cpt {\n");
                for (r, cfg) in Configurations::new(cards).enumerate() {
                    let entries: Vec<String> = cpt
                        .row(r)
                        .iter()
                        .zip(node.domain().labels())
                        .filter(|(p, _)| **p != 0.0)
                        .map(|(p, l)| format!("{l}:{}", format_number(*p)))
                        .collect();
                    writeln!(s, "    {} -> {};", key(&cfg), list(&entries)).unwrap();
                }
                s.push_str("  }\n");
            }
            Some(Mechanism::Utility(t)) => {
                s.push_str("  table {\n");
                for (r, cfg) in Configurations::new(cards).enumerate() {
                    writeln!(s, "    {} -> {};", key(&cfg), format_number(t.values()[r])).unwrap();
                }
                s.push_str("  }\n");
            }
            None => {}
        }
        s.push_str("}\n");
        blocks.push(s);
    }
    let twin = model.twin();
    if !twin.is_empty() {
        let mut s = String::from("twin {\n");
        for (cf, f) in &twin.pairs {
            writeln!(s, "  pair {cf} = {f};").unwrap();
        }
        for u in &twin.noise {
            writeln!(s, "  noise {u};").unwrap();
        }
        s.push_str("}\n");
        blocks.push(s);
    }
    blocks.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::model::ModelBuilder;

    #[test]
    fn numbers() {
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(-2.5e-7), "-0.00000025");
    }

    #[test]
    fn empty_model_is_empty_document() {
        let m = ModelBuilder::new().build().unwrap();
        assert_eq!(serialize(&m), "");
        assert_eq!(parse("").unwrap().len(), 0);
    }

    #[test]
    fn round_trip() {
        let mut b = ModelBuilder::new();
        b.agent("a");
        b.chance("C", &["h", "t"], &[], vec![vec![0.25, 0.75]]);
        b.decision("D", "a", &["h", "t"], &["C"]);
        b.utility_fn("U", "a", &["C", "D"], |v| if v[0] == v[1] { 1.0 } else { -0.5 });
        b.world("C");
        let m = b.build().unwrap();
        let text = serialize(&m);
        assert!(text.contains("    () -> h:0.25, t:0.75;\n"));
        let back = parse(&text).unwrap();
        assert!(back.approx_eq(&m, 1e-12));
        assert_eq!(serialize(&back), text);
    }
}
