use crate::error::Result;
use crate::model::{CidModel, ModelBuilder};

const AGENT: &str = "agent";

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

fn name(base: &str, i: usize) -> String {
    format!("{base}_{i}")
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    row[k] = 1.0;
    row
}

fn index(labels: &[String], label: &str) -> usize {
    labels.iter().position(|l| l == label).expect("label from own domain")
}

/// Advance one position (cyclically) with probability `p`, otherwise stay.
fn step(n: usize, k: usize, advance: bool, p: f64) -> Vec<f64> {
    let mut row = vec![0.0; n];
    if advance {
        row[(k + 1) % n] += p;
        row[k] += 1.0 - p;
    } else {
        row[k] = 1.0;
    }
    row
}

fn refs(names: &[String]) -> Vec<&str> {
    names.iter().map(String::as_str).collect()
}

const MOVES: [&str; 2] = ["stay", "move"];

pub(crate) fn rl_mdp(h: usize, n: usize) -> Result<CidModel> {
    let s = labels("s", n);
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    for i in 1..=h {
        let si = name("S", i);
        if i == 1 {
            b.chance_fn(&si, &s, &[], |_| uniform(n));
        } else {
            let (sp, ap) = (name("S", i - 1), name("A", i - 1));
            let s2 = s.clone();
            b.chance_fn(&si, &s, &[&sp, &ap], move |v| step(n, index(&s2, v[0]), v[1] == "move", 0.9));
        }
        b.world(&si);
        let last = s[n - 1].clone();
        b.utility_fn(&name("R", i), AGENT, &[&si], move |v| if v[0] == last { 1.0 } else { 0.0 });
        if i < h {
            b.decision(&name("A", i), AGENT, &MOVES, &[&si]);
        }
    }
    b.build()
}

pub(crate) fn rl_unknown_mdp(h: usize, n: usize) -> Result<CidModel> {
    let s = labels("s", n);
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    b.chance("Theta_T", &["t0", "t1"], &[], vec![vec![0.5, 0.5]]);
    b.chance("Theta_R", &["r0", "r1"], &[], vec![vec![0.5, 0.5]]);
    let mut seen: Vec<String> = Vec::new();
    for i in 1..=h {
        let si = name("S", i);
        if i == 1 {
            b.chance_fn(&si, &s, &["Theta_T"], move |v| if v[0] == "t0" { uniform(n) } else { one_hot(n, 0) });
        } else {
            let (sp, ap) = (name("S", i - 1), name("A", i - 1));
            let s2 = s.clone();
            b.chance_fn(&si, &s, &["Theta_T", &sp, &ap], move |v| {
                step(n, index(&s2, v[1]), (v[2] == "move") != (v[0] == "t1"), 0.9)
            });
        }
        b.world(&si);
        let (first, last) = (s[0].clone(), s[n - 1].clone());
        let ri = name("R", i);
        b.utility_fn(&ri, AGENT, &["Theta_R", &si], move |v| {
            let goal = if v[0] == "r0" { &last } else { &first };
            if v[1] == goal {
                1.0
            } else {
                0.0
            }
        });
        seen.push(si);
        seen.push(ri);
        if i < h {
            let ai = name("A", i);
            b.decision(&ai, AGENT, &MOVES, &refs(&seen));
            seen.push(ai);
        }
    }
    b.build()
}

pub(crate) fn rl_pomdp(h: usize, n: usize, folded: bool) -> Result<CidModel> {
    let pos = labels("s", n);
    let obs = labels("o", n);
    // folded states carry the unknown dynamics parameter alongside the position
    let s: Vec<String> =
        if folded { pos.iter().flat_map(|p| [format!("{p}_t0"), format!("{p}_t1")]).collect() } else { pos.clone() };
    let width = if folded { 2 } else { 1 };
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    let mut seen: Vec<String> = Vec::new();
    for i in 1..=h {
        let si = name("S", i);
        if i == 1 {
            let m = s.len();
            b.chance_fn(&si, &s, &[], move |_| uniform(m));
        } else {
            let (sp, ap) = (name("S", i - 1), name("A", i - 1));
            let s2 = s.clone();
            b.chance_fn(&si, &s, &[&sp, &ap], move |v| {
                let k = index(&s2, v[0]);
                let (p, t) = (k / width, k % width);
                let advance = (v[1] == "move") != (t == 1);
                let moved = step(n, p, advance, 0.9);
                let mut row = vec![0.0; s2.len()];
                for (q, w) in moved.into_iter().enumerate() {
                    row[q * width + t] += w;
                }
                row
            });
        }
        b.world(&si);
        let s2 = s.clone();
        let ri = name("R", i);
        b.utility_fn(&ri, AGENT, &[&si], move |v| if index(&s2, v[0]) / width == n - 1 { 1.0 } else { 0.0 });
        if i < h {
            let oi = name("O", i);
            let s2 = s.clone();
            b.chance_fn(&oi, &obs, &[&si], move |v| {
                let k = index(&s2, v[0]) / width;
                if n == 1 {
                    return vec![1.0];
                }
                let mut row = vec![0.2 / (n - 1) as f64; n];
                row[k] = 0.8;
                row
            });
            seen.push(oi);
            seen.push(ri);
            let ai = name("A", i);
            b.decision(&ai, AGENT, &MOVES, &refs(&seen));
            seen.push(ai);
        } else {
            seen.push(ri);
        }
    }
    b.build()
}

const CLEANLINESS: [&str; 2] = ["clean", "dirty"];
const REWARD_FN: [&str; 2] = ["true", "hacked"];
const WORK: [&str; 2] = ["work", "tamper"];

/// Wireheading toy: tampering hacks the reward parameter and leaves the
/// room dirty; working cleans it with probability 0.8.
pub(crate) fn reward_tampering(h: usize, current: bool, inert_tamper: bool) -> Result<CidModel> {
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    for i in 1..=h {
        let (si, ti) = (name("S", i), name("Theta_R", i));
        if i == 1 {
            b.chance(&si, &CLEANLINESS, &[], vec![vec![0.5, 0.5]]);
            b.chance(&ti, &REWARD_FN, &[], vec![vec![1.0, 0.0]]);
        } else {
            let (sp, tp, ap) = (name("S", i - 1), name("Theta_R", i - 1), name("A", i - 1));
            let parents = [sp.as_str(), tp.as_str(), ap.as_str()];
            b.chance_fn(&si, &CLEANLINESS, &parents, |v| if v[2] == "work" { vec![0.8, 0.2] } else { vec![0.0, 1.0] });
            b.chance_fn(&ti, &REWARD_FN, &parents, move |v| {
                let hacked = v[1] == "hacked" || (v[2] == "tamper" && !inert_tamper);
                if hacked {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 0.0]
                }
            });
        }
        b.world(&si);
        let judge = if current { name("Theta_R", 1) } else { ti.clone() };
        b.utility_fn(
            &name("R", i),
            AGENT,
            &[&si, &judge],
            |v| {
                if v[1] == "hacked" || v[0] == "clean" {
                    1.0
                } else {
                    0.0
                }
            },
        );
        if i < h {
            b.decision(&name("A", i), AGENT, &WORK, &[&si, &ti]);
        }
    }
    b.build()
}

pub(crate) fn reward_modeling(h: usize, n: usize, with_theta_t: bool) -> Result<CidModel> {
    let s = labels("s", n);
    let prefs = ["p0", "p1"];
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    if with_theta_t {
        b.chance("Theta_T", &["t0", "t1"], &[], vec![vec![0.5, 0.5]]);
    }
    b.chance("Theta_H", &prefs, &[], vec![vec![0.5, 0.5]]);
    let mut history: Vec<String> = Vec::new();
    let mut observed: Vec<String> = Vec::new();
    let mut data: Vec<String> = Vec::new();
    for i in 1..=h {
        let si = name("S", i);
        if i == 1 {
            b.chance_fn(&si, &s, &[], |_| uniform(n));
        } else {
            let (sp, ap) = (name("S", i - 1), name("A", i - 1));
            let s2 = s.clone();
            if with_theta_t {
                b.chance_fn(&si, &s, &["Theta_T", &sp, &ap], move |v| {
                    step(n, index(&s2, v[1]), (v[2] == "move") != (v[0] == "t1"), 0.9)
                });
            } else {
                b.chance_fn(&si, &s, &[&sp, &ap], move |v| step(n, index(&s2, v[0]), v[1] == "move", 0.9));
            }
        }
        b.world(&si);
        history.push(si.clone());
        let ri = name("R", i);
        let mut parents = vec![si.clone()];
        parents.extend(data.iter().cloned());
        let s2 = s.clone();
        b.utility_fn(&ri, AGENT, &refs(&parents), move |v| {
            let d = &v[1..];
            if d.is_empty() {
                return 0.5;
            }
            let state = index(&s2, v[0]);
            let hits = d.iter().filter(|p| (if **p == "p0" { 0 } else { 1 }) % n == state).count();
            hits as f64 / d.len() as f64
        });
        observed.push(si.clone());
        observed.push(ri);
        if i < h {
            let ai = name("A", i);
            b.decision(&ai, AGENT, &MOVES, &refs(&observed));
            history.push(ai);
            let di = name("D", i);
            let mut parents = history.clone();
            parents.push("Theta_H".into());
            b.chance_fn(&di, &prefs, &refs(&parents), |v| {
                if *v.last().unwrap() == "p0" {
                    vec![0.9, 0.1]
                } else {
                    vec![0.1, 0.9]
                }
            });
            data.push(di);
        }
    }
    b.build()
}

const GOTO: [&str; 2] = ["go0", "go1"];

pub(crate) fn cirl(h: usize, n: usize) -> Result<CidModel> {
    let s = labels("s", n);
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    b.agent("human");
    b.chance("Theta_H", &["p0", "p1"], &[], vec![vec![0.5, 0.5]]);
    let mut past: Vec<String> = Vec::new();
    for i in 1..=h {
        let si = name("S", i);
        if i == 1 {
            b.chance_fn(&si, &s, &[], |_| uniform(n));
        } else {
            let (sp, hp, ap) = (name("S", i - 1), name("AH", i - 1), name("A", i - 1));
            let s2 = s.clone();
            b.chance_fn(&si, &s, &[&sp, &hp, &ap], move |v| {
                let k = index(&s2, v[0]);
                if v[1] != v[2] {
                    return one_hot(n, k);
                }
                let target = if v[2] == "go0" { 0 } else { 1 % n };
                let mut row = vec![0.0; n];
                row[target] += 0.9;
                row[k] += 0.1;
                row
            });
        }
        b.world(&si);
        let s2 = s.clone();
        b.utility_fn(&name("R", i), AGENT, &[&si, "Theta_H"], move |v| {
            let goal = if v[1] == "p0" { 0 } else { 1 % n };
            if index(&s2, v[0]) == goal {
                1.0
            } else {
                0.0
            }
        });
        if i < h {
            let (hi, ai) = (name("AH", i), name("A", i));
            let mut human_obs = vec!["Theta_H".to_string()];
            human_obs.extend(past.iter().cloned());
            human_obs.push(si.clone());
            b.decision(&hi, "human", &GOTO, &refs(&human_obs));
            let mut agent_obs = past.clone();
            agent_obs.push(si.clone());
            agent_obs.push(hi.clone());
            b.decision(&ai, AGENT, &GOTO, &refs(&agent_obs));
            past.extend([si, hi, ai]);
        }
    }
    b.build()
}

const QUESTIONS: [&str; 2] = ["q0", "q1"];

fn correct_answer(q: &str) -> &'static str {
    if q == "q0" {
        "up"
    } else {
        "down"
    }
}

fn state_given_answer(v: &[&str]) -> Vec<f64> {
    match v[0] {
        "up" => vec![0.8, 0.2],
        "down" => vec![0.0, 1.0],
        _ => vec![0.7, 0.3],
    }
}

pub(crate) fn supervised_learning() -> Result<CidModel> {
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    b.chance("Question", &QUESTIONS, &[], vec![vec![0.5, 0.5]]);
    b.decision("Answer", AGENT, &["up", "down"], &["Question"]);
    b.chance_fn("State", &["up", "down"], &["Answer"], state_given_answer);
    b.world("State");
    b.utility_fn("Reward", AGENT, &["Question", "Answer"], |v| if v[1] == correct_answer(v[0]) { 1.0 } else { 0.0 });
    b.build()
}

const PROPHECIES: [&str; 3] = ["up", "down", "hidden"];

pub(crate) fn self_fulfilling() -> Result<CidModel> {
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    b.chance("Question", &QUESTIONS, &[], vec![vec![0.5, 0.5]]);
    b.decision("Answer", AGENT, &PROPHECIES, &["Question"]);
    b.chance_fn("State", &["up", "down"], &["Answer"], state_given_answer);
    b.world("State");
    b.utility_fn("Reward", AGENT, &["Question", "Answer", "State"], |v| if v[1] == v[2] { 1.0 } else { 0.0 });
    b.build()
}

pub(crate) fn counterfactual_oracle() -> Result<CidModel> {
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    b.chance("Question", &QUESTIONS, &[], vec![vec![0.5, 0.5]]);
    b.decision("Answer", AGENT, &PROPHECIES, &["Question"]);
    b.chance_fn("State", &["up", "down"], &["Answer"], state_given_answer);
    b.world("State");
    let mut reward = Vec::new();
    for _q in QUESTIONS {
        for a in PROPHECIES {
            for s in ["up", "down"] {
                reward.push(if a == s { 1.0 } else { 0.0 });
            }
        }
    }
    b.utility("Reward", AGENT, &["Question", "Answer", "State'"], reward);
    b.chance_fn("Answer'", &PROPHECIES, &["Question"], |_| vec![0.0, 0.0, 1.0]);
    b.chance_fn("State'", &["up", "down"], &["Answer'"], state_given_answer);
    b.world("State'");
    b.twin_pair("Answer'", "Answer");
    b.twin_pair("State'", "State");
    b.build()
}

const STATEMENTS: [&str; 2] = ["a0", "a1"];

fn statement(round: usize, system: usize) -> String {
    format!("A_{round}_{system}")
}

/// `constant_judge` always rules for the first system; otherwise the judge
/// favors the system whose final statement alone is correct.
pub(crate) fn debate(rounds: usize, constant_judge: bool) -> Result<CidModel> {
    let mut b = ModelBuilder::new();
    b.agent("sys1");
    b.agent("sys2");
    b.chance("Q", &QUESTIONS, &[], vec![vec![0.5, 0.5]]);
    let mut seen = vec!["Q".to_string()];
    for r in 1..=rounds {
        for k in 1..=2 {
            let a = statement(r, k);
            b.decision(&a, &format!("sys{k}"), &STATEMENTS, &refs(&seen));
            seen.push(a);
        }
    }
    let m = seen.len();
    b.deterministic_fn("J", &["sys1", "sys2", "tie"], &refs(&seen), move |v| {
        if constant_judge {
            return "sys1".into();
        }
        let truth = if v[0] == "q0" { "a0" } else { "a1" };
        match (v[m - 2] == truth, v[m - 1] == truth) {
            (true, false) => "sys1".into(),
            (false, true) => "sys2".into(),
            _ => "tie".into(),
        }
    });
    b.utility_fn("R_1", "sys1", &["J"], payoff(1.0));
    b.utility_fn("R_2", "sys2", &["J"], payoff(-1.0));
    b.build()
}

fn payoff(sign: f64) -> impl Fn(&[&str]) -> f64 {
    move |v| match v[0] {
        "sys1" => sign,
        "sys2" => -sign,
        _ => 0.0,
    }
}

/// Single-round debate where neither system sees the other's statement and
/// the judge rules for the first system iff the statements match.
pub(crate) fn debate_blind(rounds: usize) -> Result<CidModel> {
    let mut b = ModelBuilder::new();
    b.agent("sys1");
    b.agent("sys2");
    b.chance("Q", &QUESTIONS, &[], vec![vec![0.5, 0.5]]);
    let mut all = vec!["Q".to_string()];
    for r in 1..=rounds {
        for k in 1..=2 {
            let a = statement(r, k);
            b.decision(&a, &format!("sys{k}"), &STATEMENTS, &["Q"]);
            all.push(a);
        }
    }
    let m = all.len();
    b.deterministic_fn("J", &["sys1", "sys2"], &refs(&all), move |v| {
        if v[m - 2] == v[m - 1] {
            "sys1".into()
        } else {
            "sys2".into()
        }
    });
    b.utility_fn("R_1", "sys1", &["J"], payoff(1.0));
    b.utility_fn("R_2", "sys2", &["J"], payoff(-1.0));
    b.build()
}

pub(crate) fn ida() -> Result<CidModel> {
    let mut b = ModelBuilder::new();
    b.agent(AGENT);
    b.chance("Q", &QUESTIONS, &[], vec![vec![0.5, 0.5]]);
    b.deterministic_fn("Q_1", &QUESTIONS, &["Q"], |v| v[0].to_string());
    b.deterministic_fn("Q_2", &QUESTIONS, &["Q"], |v| v[0].to_string());
    let helper = |v: &[&str]| if v[0] == "q0" { vec![0.8, 0.2] } else { vec![0.2, 0.8] };
    b.chance_fn("A_1", &STATEMENTS, &["Q_1"], helper);
    b.chance_fn("A_2", &STATEMENTS, &["Q_2"], helper);
    b.deterministic_fn("A_hat", &STATEMENTS, &["Q", "Q_1", "Q_2", "A_1", "A_2"], |v| v[3].to_string());
    b.decision("A", AGENT, &STATEMENTS, &["Q"]);
    b.utility_fn("R", AGENT, &["A_hat", "A"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
    b.build()
}

pub(crate) fn cais() -> Result<CidModel> {
    let inputs = ["i0", "i1"];
    let mut b = ModelBuilder::new();
    for k in 1..=4 {
        b.agent(&format!("service{k}"));
    }
    b.chance("Input", &inputs, &[], vec![vec![0.5, 0.5]]);
    b.decision("A_1", "service1", &inputs, &["Input"]);
    b.decision("A_2", "service2", &inputs, &["Input"]);
    b.utility_fn("R_1", "service1", &["Input", "A_1"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
    b.utility_fn("R_2", "service2", &["Input", "A_2"], |v| if v[0] != v[1] { 1.0 } else { 0.0 });
    b.decision("A_3", "service3", &inputs, &["A_1"]);
    b.decision("A_4", "service4", &inputs, &["A_2"]);
    b.utility_fn("R_3", "service3", &["A_1", "A_3"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
    b.utility_fn("R_4", "service4", &["A_2", "A_4"], |v| if v[0] == v[1] { 1.0 } else { 0.0 });
    b.deterministic_fn("Output", &inputs, &["A_3", "A_4"], |v| if v[0] == v[1] { "i0".into() } else { "i1".into() });
    b.build()
}
