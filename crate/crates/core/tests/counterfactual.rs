mod common;

use std::collections::BTreeMap;

use cid_core::counterfactual::{
    absorb_noise, counterfactual_query, functionalize, intervene, merge_unaffected, project_noise, remove_node,
    rewire_utility, twin_network, InterventionSpec, ScmModel,
};
use cid_core::inference::{induced_network, marginal, Query};
use cid_core::zoo::{self, ZooParams};
use cid_core::{CidError, CidModel, PolicyProfile};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn names(model: &CidModel) -> Vec<String> {
    (0..model.len()).map(|i| model.id(i).to_string()).collect()
}

fn joint(model: &CidModel, targets: &[String]) -> Vec<f64> {
    let net = induced_network(model, &PolicyProfile::new()).unwrap();
    let t: Vec<&str> = targets.iter().map(String::as_str).collect();
    marginal(&net, &Query::new(&t)).unwrap().values().to_vec()
}

fn single(model: &CidModel, node: &str) -> Vec<f64> {
    joint(model, &[node.to_string()])
}

/// Random chance-only models whose response functions fit the default cap.
fn functionalizable(count: usize, max_card: usize) -> Vec<(u64, CidModel, ScmModel)> {
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        let m = random_bayes_model(&mut rng(seed), 6, max_card);
        match functionalize(&m) {
            Ok(scm) => out.push((seed, m, scm)),
            Err(e) => assert!(e.is_resource_cap(), "seed {seed}: {e}"),
        }
        seed += 1;
    }
    out
}

#[test]
fn functionalize_preserves_observational_joints() {
    for (seed, m, scm) in functionalizable(100, 3) {
        let all = names(&m);
        let expected =
            enumerate(&m, &PolicyProfile::new()).marginal(&m, &(0..m.len()).collect::<Vec<_>>(), &[]).unwrap();
        let got = joint(scm.model(), &all);
        assert!(close(&got, &expected, 1e-9), "seed {seed}");
        for i in 0..m.len() {
            assert!(scm.model().node(m.id(i).as_str()).unwrap().cpt().unwrap().is_deterministic());
        }
    }
}

#[test]
fn null_twin_reproduces_factual_marginals() {
    for (seed, m, scm) in functionalizable(40, 3) {
        let twin = twin_network(&scm, &InterventionSpec::new()).unwrap();
        for name in names(&m) {
            let factual = single(&m, &name);
            assert!(close(&single(&twin, &format!("{name}'")), &factual, 1e-9), "seed {seed} {name}");
            assert!(close(&single(&twin, &name), &factual, 1e-9), "seed {seed} {name}");
        }
    }
}

#[test]
fn twin_intervention_matches_single_world_intervention() {
    for (seed, m, scm) in functionalizable(40, 2) {
        let mut r = rng(seed);
        let target = m.id(r.gen_range(0..m.len())).to_string();
        let value = m.outcomes(m.index_of(&target).unwrap())[0].clone();
        let spec = InterventionSpec::new().force(&target, &value);
        let twin = twin_network(&scm, &spec).unwrap();
        let done = intervene(&m, &spec).unwrap();
        for name in names(&m) {
            assert!(close(&single(&twin, &format!("{name}'")), &single(&done, &name), 1e-9), "seed {seed} {name}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn factual_evidence_pins_the_null_counterfactual(seed in 0u64..10_000) {
        let m = random_bayes_model(&mut rng(seed), 4, 2);
        let scm = functionalize(&m).unwrap();
        let net = induced_network(&m, &PolicyProfile::new()).unwrap();
        let name = m.id(0).to_string();
        let p = marginal(&net, &Query::new(&[name.as_str()])).unwrap();
        let k = p.values().iter().position(|v| *v > 0.0).unwrap();
        let label = m.outcomes(0)[k].clone();
        let evidence = BTreeMap::from([(name.clone(), label.clone())]);
        let f = counterfactual_query(&scm, &InterventionSpec::new(), &PolicyProfile::new(), &evidence, &format!("{name}'")).unwrap();
        prop_assert!((f.prob(&[label.as_str()]).unwrap() - 1.0).abs() < 1e-9);
    }
}

/// Rebuild the counterfactual oracle from the self-fulfilling predictor.
fn reconstruct_oracle() -> CidModel {
    let base = zoo::build("self_fulfilling", &ZooParams::default()).unwrap();
    let scm = functionalize(&base).unwrap();
    let twin = twin_network(&scm, &InterventionSpec::new().force("Answer", "hidden")).unwrap();
    let merged = merge_unaffected(&twin, &["Answer"]).unwrap();
    let absorbed = absorb_noise(&merged).unwrap();
    let rewired = rewire_utility(&absorbed, "Reward", "State", "State'").unwrap();
    let trimmed = remove_node(&rewired, "Reward'").unwrap();
    project_noise(&trimmed).unwrap()
}

#[test]
fn counterfactual_oracle_is_reconstructed_from_self_fulfilling() {
    let rebuilt = reconstruct_oracle();
    let oracle = zoo::build("counterfactual_oracle", &ZooParams::default()).unwrap();
    assert!(rebuilt.graph_eq(&oracle), "{:?}\n{:?}", rebuilt.edges(), oracle.edges());
    assert!(rebuilt.approx_eq(&oracle, 1e-12));
}

#[test]
fn intervening_on_a_utility_or_noise_node_is_rejected() {
    let base = zoo::build("self_fulfilling", &ZooParams::default()).unwrap();
    assert!(matches!(intervene(&base, &InterventionSpec::new().force("Reward", "1")), Err(CidError::Intervention(_))));
    let scm = functionalize(&base).unwrap();
    let u = scm.noise_of("State").unwrap().to_string();
    assert!(twin_network(&scm, &InterventionSpec::new().force(&u, "f0")).is_err());
    assert!(intervene(&base, &InterventionSpec::new().force("State", "nowhere")).is_err());
}

#[test]
fn removing_a_node_with_children_is_rejected() {
    let base = zoo::build("self_fulfilling", &ZooParams::default()).unwrap();
    assert!(matches!(remove_node(&base, "State"), Err(CidError::Unsupported(_))));
    assert!(matches!(rewire_utility(&base, "State", "Answer", "Question"), Err(CidError::InvalidQuery(_))));
}
