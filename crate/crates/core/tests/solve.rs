mod common;

use cid_core::inference::expected_utility;
use cid_core::limits::Limits;
use cid_core::solve::{
    best_response, check_sufficient_recall, nash_search, pure_nash_equilibria, solve_single_agent,
    solve_single_agent_with, team_model, Method, SolveMethod,
};
use cid_core::zoo::{self, ZooParams};
use cid_core::{CidError, CidModel, PolicyProfile};
use common::*;
use proptest::prelude::*;

/// First-action rules for every decision not owned by `agent`.
fn others_fixed(model: &CidModel, agent: &str) -> PolicyProfile {
    let mut p = PolicyProfile::first_actions(model);
    for d in model.decisions_of(agent) {
        p.remove(model.id(d).as_str());
    }
    p
}

fn action(model: &CidModel, profile: &PolicyProfile, decision: &str, row: usize) -> String {
    let d = model.index_of(decision).unwrap();
    let a = profile.get(decision).unwrap().actions().unwrap()[row];
    model.outcomes(d)[a].clone()
}

#[test]
fn coin_copy_policy_is_optimal() {
    let m = coin(true);
    let r = solve_single_agent(&m, "a", Method::Exhaustive, &PolicyProfile::new()).unwrap();
    assert!((r.value["a"] - 1.0).abs() < 1e-12);
    assert_eq!(r.explored, 4);
    assert_eq!(action(&m, &r.profile, "D", 0), "h");
    assert_eq!(action(&m, &r.profile, "D", 1), "t");

    let blind = coin(false);
    let r = solve_single_agent(&blind, "a", Method::Auto, &PolicyProfile::new()).unwrap();
    assert!((r.value["a"] - 0.5).abs() < 1e-12);
    assert_eq!(action(&blind, &r.profile, "D", 0), "h");
}

fn pure_policy_count(model: &CidModel) -> f64 {
    model.decisions().map(|d| (model.cardinality(d) as f64).powi(model.config_count(d) as i32)).product()
}

/// Random recall models small enough for the enumeration oracle.
fn soluble_recall_models(count: usize) -> Vec<(u64, CidModel)> {
    (0..)
        .map(|seed| (seed, random_decision_model(&mut rng(seed), 3, true)))
        .filter(|(_, m)| pure_policy_count(m) <= 4096.0)
        .take(count)
        .collect()
}

#[test]
fn backward_matches_exhaustive_and_oracle_on_random_recall_models() {
    for (seed, m) in soluble_recall_models(100) {
        assert!(check_sufficient_recall(&m, "a").unwrap().ok, "seed {seed}");
        let none = PolicyProfile::new();
        let b = solve_single_agent(&m, "a", Method::Backward, &none).unwrap();
        let e = solve_single_agent(&m, "a", Method::Exhaustive, &none).unwrap();
        assert_eq!(b.method, SolveMethod::BackwardInduction);
        assert_eq!(e.method, SolveMethod::Exhaustive);
        let oracle = optimal_value_oracle(&m, "a", &none);
        assert!((b.value["a"] - e.value["a"]).abs() <= 1e-9, "seed {seed}");
        assert!((e.value["a"] - oracle).abs() <= 1e-9, "seed {seed}");
        assert!((eu_oracle(&m, &b.profile, "a") - oracle).abs() <= 1e-9, "seed {seed}");
    }
}

#[test]
fn exhaustive_matches_oracle_without_recall() {
    for seed in 0..60 {
        let m = random_decision_model(&mut rng(1000 + seed), 3, false);
        let none = PolicyProfile::new();
        let r = solve_single_agent(&m, "a", Method::Auto, &none).unwrap();
        let oracle = optimal_value_oracle(&m, "a", &none);
        assert!((r.value["a"] - oracle).abs() <= 1e-9, "seed {seed}");
        let cert = check_sufficient_recall(&m, "a").unwrap();
        let expected = if cert.ok { SolveMethod::BackwardInduction } else { SolveMethod::Exhaustive };
        assert_eq!(r.method, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solved_value_is_the_value_of_the_returned_policy(seed in any::<u64>()) {
        let m = random_decision_model(&mut rng(seed), 2, seed % 2 == 0);
        let r = solve_single_agent(&m, "a", Method::Auto, &PolicyProfile::new()).unwrap();
        prop_assert!(r.profile.is_pure());
        prop_assert!((expected_utility(&m, &r.profile, "a").unwrap() - r.value["a"]).abs() < 1e-9);
    }

    #[test]
    fn no_pure_profile_beats_the_optimum(seed in any::<u64>()) {
        let m = random_decision_model(&mut rng(seed), 2, false);
        let best = solve_single_agent(&m, "a", Method::Auto, &PolicyProfile::new()).unwrap().value["a"];
        for p in all_pure_profiles(&m) {
            prop_assert!(eu_oracle(&m, &p, "a") <= best + 1e-9);
        }
    }
}

/// Zoo entries at horizons small enough for exhaustive search.
const SOLVABLE: [(&str, usize); 14] = [
    ("rl_mdp", 3),
    ("rl_unknown_mdp", 2),
    ("rl_pomdp", 2),
    ("modifiable_rf", 2),
    ("current_rf", 2),
    ("reward_modeling", 2),
    ("cirl", 2),
    ("supervised_learning", 1),
    ("self_fulfilling", 1),
    ("counterfactual_oracle", 1),
    ("debate", 1),
    ("debate_blind", 1),
    ("ida", 1),
    ("cais", 1),
];

#[test]
fn backward_matches_exhaustive_on_zoo_models_with_recall() {
    let limits = Limits::default();
    let mut compared = 0;
    for (name, h) in SOLVABLE {
        let m = zoo::build(name, &ZooParams::horizon(h)).unwrap();
        for agent in m.agents() {
            let agent = agent.as_str();
            if m.decisions_of(agent).next().is_none() || !check_sufficient_recall(&m, agent).unwrap().ok {
                continue;
            }
            let fixed = others_fixed(&m, agent);
            let b = solve_single_agent_with(&m, agent, Method::Backward, &fixed, &limits).unwrap();
            let e = solve_single_agent_with(&m, agent, Method::Exhaustive, &fixed, &limits).unwrap();
            assert!((b.value[agent] - e.value[agent]).abs() <= 1e-9, "{name}/{agent}");
            compared += 1;
        }
    }
    assert!(compared >= 8, "only {compared} comparisons");
}

#[test]
fn recall_certificates_for_zoo_models() {
    let unknown = zoo::build("rl_unknown_mdp", &ZooParams::horizon(3)).unwrap();
    assert!(check_sufficient_recall(&unknown, "agent").unwrap().ok);
    let mdp = zoo::build("rl_mdp", &ZooParams::horizon(3)).unwrap();
    let cert = check_sufficient_recall(&mdp, "agent").unwrap();
    assert!(!cert.ok);
    assert!(cert.failures.iter().any(|(later, missing)| later.as_str() == "A_2" && missing.as_str() == "A_1"));
    let err = solve_single_agent(&mdp, "agent", Method::Backward, &PolicyProfile::new()).unwrap_err();
    assert!(matches!(err, CidError::Unsupported(_)));
}

#[test]
fn mdp_exhaustive_value_matches_oracle() {
    let m = zoo::build("rl_mdp", &ZooParams::horizon(2)).unwrap();
    let r = solve_single_agent(&m, "agent", Method::Exhaustive, &PolicyProfile::new()).unwrap();
    let oracle = optimal_value_oracle(&m, "agent", &PolicyProfile::new());
    assert!((r.value["agent"] - oracle).abs() <= 1e-9);
}

#[test]
fn debate_blind_has_no_pure_equilibrium() {
    let m = zoo::build("debate_blind", &ZooParams::horizon(1)).unwrap();
    let profiles = all_pure_profiles(&m);
    assert_eq!(profiles.len(), 16);
    assert!(profiles.iter().all(|p| !is_nash_oracle(&m, p)));
    let report = nash_search(&m, &Limits::default()).unwrap();
    assert_eq!(report.profiles_checked, 16);
    assert!(report.equilibria.is_empty());
}

#[test]
fn constant_judge_debate_makes_every_profile_an_equilibrium() {
    let params = ZooParams { horizon: Some(1), preset: Some("constant_judge".into()), ..Default::default() };
    let m = zoo::build("debate", &params).unwrap();
    let profiles = all_pure_profiles(&m);
    assert!(profiles.iter().all(|p| is_nash_oracle(&m, p)));
    let found = pure_nash_equilibria(&m).unwrap();
    assert_eq!(found.len(), profiles.len());
    let br = best_response(&m, &PolicyProfile::first_actions(&m), "sys2").unwrap();
    for (d, rule) in br.profile.rules() {
        if m.node(d.as_str()).unwrap().kind().owner().unwrap().as_str() == "sys2" {
            assert!(rule.actions().unwrap().iter().all(|&a| a == 0), "tie-break picks the first action");
        }
    }
}

#[test]
fn nash_search_agrees_with_oracle_on_debate() {
    let m = zoo::build("debate", &ZooParams::horizon(1)).unwrap();
    let found = pure_nash_equilibria(&m).unwrap();
    let expected: Vec<PolicyProfile> = all_pure_profiles(&m).into_iter().filter(|p| is_nash_oracle(&m, p)).collect();
    assert_eq!(found.len(), expected.len());
    for p in &found {
        assert!(expected.contains(p));
    }
}

#[test]
fn cais_best_responses_match_oracle() {
    let m = zoo::build("cais", &ZooParams::default()).unwrap();
    let start = PolicyProfile::first_actions(&m);
    for agent in m.agents() {
        let a = agent.as_str();
        let br = best_response(&m, &start, a).unwrap();
        assert!((br.value[a] - optimal_value_oracle(&m, a, &others_fixed(&m, a))).abs() <= 1e-9, "{a}");
    }
}

#[test]
fn team_model_joint_optimum_dominates() {
    let m = zoo::build("cirl", &ZooParams::horizon(1)).unwrap();
    let team = team_model(&m, &["agent", "human"], "team").unwrap();
    assert_eq!(team.agents().len(), 1);
    let joint = solve_single_agent(&team, "team", Method::Auto, &PolicyProfile::new()).unwrap();
    assert!((joint.value["team"] - optimal_value_oracle(&team, "team", &PolicyProfile::new())).abs() <= 1e-9);
}

#[test]
fn policy_cap_is_reported() {
    let m = zoo::build("rl_mdp", &ZooParams::horizon(3)).unwrap();
    let limits = Limits { max_policies: 10, ..Limits::default() };
    let err = solve_single_agent_with(&m, "agent", Method::Exhaustive, &PolicyProfile::new(), &limits).unwrap_err();
    match err {
        CidError::ResourceCap { needed, cap, .. } => {
            assert_eq!(cap, 10);
            assert!(needed > 10);
        }
        other => panic!("{other:?}"),
    }
}
