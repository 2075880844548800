//! `cid`: command-line front end for causal influence diagrams.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cid_core::counterfactual::{functionalize_with, twin_network, InterventionSpec};
use cid_core::dot::{export_dot, DotOptions};
use cid_core::dsl;
use cid_core::incentives::{analyze, value_of_information_with};
use cid_core::inference::{active_path, d_separated, expected_utility_with, mediates};
use cid_core::solve::{nash_search, solve_single_agent_with, Method};
use cid_core::zoo::{self, ZooParams};
use cid_core::{CidError, CidModel, Limits, PolicyProfile};

#[derive(Parser)]
#[command(name = "cid", version, about = "Build, solve and analyze causal influence diagrams")]
struct Cli {
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Largest factor variable elimination may create (table entries).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_factor: Option<u64>,
    /// Largest number of policies an exhaustive search may visit.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_policies: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model.
    Validate { file: PathBuf },
    /// Optimal policy for one agent.
    Solve {
        file: PathBuf,
        #[arg(long)]
        agent: String,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        /// Policy JSON fixing the other agents' decisions.
        #[arg(long)]
        fixed: Option<PathBuf>,
    },
    /// Expected utility of an agent under a policy profile.
    Eu {
        file: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        agent: String,
    },
    /// d-separation test.
    Dsep {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Does every directed path from one node to another pass through a set?
    Mediates {
        file: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, value_delimiter = ',')]
        via: Vec<String>,
    },
    /// Graphical incentive analysis of one decision.
    Incentives {
        file: PathBuf,
        #[arg(long)]
        decision: String,
    },
    /// Value of information of one observation.
    Voi {
        file: PathBuf,
        #[arg(long)]
        decision: String,
        #[arg(long)]
        obs: String,
        #[arg(long)]
        agent: String,
        #[arg(long)]
        fixed: Option<PathBuf>,
    },
    /// Twin network under an intervention on the counterfactual copies.
    Twin {
        file: PathBuf,
        /// Interventions such as `A=x,B=y`.
        #[arg(long = "do")]
        interventions: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Graphviz export.
    Dot {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        color_agents: bool,
    },
    /// Pure Nash equilibria by exhaustive search.
    Nash { file: PathBuf },
    /// Built-in framework models.
    #[command(subcommand)]
    Zoo(ZooCommand),
}

#[derive(Subcommand)]
enum ZooCommand {
    List,
    Build(ZooBuild),
}

#[derive(Args)]
struct ZooBuild {
    name: String,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    domain: Option<usize>,
    #[arg(long)]
    preset: Option<String>,
    /// `.cid` or `.cid.json`; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Exhaustive,
    Backward,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Exhaustive => Method::Exhaustive,
            MethodArg::Backward => Method::Backward,
        }
    }
}

/// Exit status and message of a failed command.
struct Failure {
    code: u8,
    message: String,
    /// JSON report printed under `--json` despite the failure.
    report: Option<Value>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into(), report: None }
    }
}

impl From<CidError> for Failure {
    fn from(e: CidError) -> Self {
        let code = match &e {
            CidError::Parse(_) | CidError::Invalid(_) | CidError::Json { .. } | CidError::InvalidPolicy(_) => 1,
            CidError::ResourceCap { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string(), report: None }
    }
}

type Outcome = Result<(String, Value), Failure>;

fn is_json_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<CidModel, Failure> {
    let text = read(path)?;
    let loaded = if is_json_path(path) { dsl::from_json_str(&text) } else { dsl::parse(&text).map_err(CidError::from) };
    loaded.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn save(path: &Path, model: &CidModel) -> Result<(), Failure> {
    let text = if is_json_path(path) { dsl::to_json_string(model) } else { dsl::serialize(model) };
    write(path, &text)
}

fn load_policy(model: &CidModel, path: &Path) -> Result<PolicyProfile, Failure> {
    let text = read(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
        report: None,
    })?;
    Ok(PolicyProfile::from_json(model, &doc)?)
}

fn load_fixed(model: &CidModel, path: &Option<PathBuf>) -> Result<PolicyProfile, Failure> {
    match path {
        Some(p) => load_policy(model, p),
        None => Ok(PolicyProfile::new()),
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn fmt_value(v: &serde_json::Map<String, Value>) -> String {
    v.iter().map(|(k, x)| format!("{k}={x}")).collect::<Vec<_>>().join(", ")
}

fn validate(file: &Path) -> Outcome {
    let text = read(file)?;
    let loaded = if is_json_path(file) { dsl::from_json_str(&text) } else { dsl::parse(&text).map_err(CidError::from) };
    match loaded {
        Ok(model) => {
            let report = model.validate();
            let summary = format!(
                "ok: {} nodes, {} agents{}",
                model.len(),
                model.agents().len(),
                report.warnings.iter().map(|w| format!("\nwarning: {w}")).collect::<String>()
            );
            Ok((summary, json!({ "ok": true, "nodes": model.len(), "warnings": report.warnings })))
        }
        Err(e) => {
            let detail = match &e {
                CidError::Parse(p) => json!({ "parse_error": p }),
                CidError::Invalid(r) => json!({ "violations": r.violations }),
                CidError::Json { path, message } => json!({ "json_error": { "path": path, "message": message } }),
                _ => json!({ "error": e.to_string() }),
            };
            let mut f = Failure::from(e);
            f.message = format!("{}: {}", file.display(), f.message);
            f.report = Some(json!({ "ok": false, "detail": detail }));
            Err(f)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut limits = Limits::from_env();
    if let Some(v) = cli.max_factor {
        limits.max_factor = v as u128;
    }
    if let Some(v) = cli.max_policies {
        limits.max_policies = v as u128;
    }
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Solve { file, agent, method, fixed } => {
            let model = load(&file)?;
            let fixed = load_fixed(&model, &fixed)?;
            let r = solve_single_agent_with(&model, &agent, method.into(), &fixed, &limits)?;
            let report = r.to_json(&model);
            let summary = format!(
                "agent {agent}: {:?}, {} evaluated\nvalue: {}\npolicy: {}",
                r.method,
                r.explored,
                fmt_value(report["value"].as_object().expect("object")),
                report["policy"]
            );
            Ok((summary, report))
        }
        Command::Eu { file, policy, agent } => {
            let model = load(&file)?;
            let profile = load_policy(&model, &policy)?;
            let v = expected_utility_with(&model, &profile, &agent, &limits)?;
            Ok((format!("expected utility of {agent}: {v}"), json!({ "agent": agent, "expected_utility": v })))
        }
        Command::Dsep { file, x, y, given } => {
            let model = load(&file)?;
            let sep = d_separated(&model, &strs(&x), &strs(&y), &strs(&given))?;
            let witness = active_path(&model, &strs(&x), &strs(&y), &strs(&given))?;
            let summary = match &witness {
                None => "d-separated".to_string(),
                Some(p) => format!("d-connected via {}", p.join(" - ")),
            };
            Ok((summary, json!({ "separated": sep, "witness": witness })))
        }
        Command::Mediates { file, from, to, via } => {
            let model = load(&file)?;
            let m = mediates(&model, &from, &to, &strs(&via))?;
            let summary =
                format!("{from} -> {to} {} mediated by {{{}}}", if m { "is" } else { "is not" }, via.join(", "));
            Ok((summary, json!({ "from": from, "to": to, "via": via, "mediates": m })))
        }
        Command::Incentives { file, decision } => {
            let model = load(&file)?;
            let report = analyze(&model, &decision)?;
            let mut lines = vec![format!("decision {decision}")];
            for f in report.findings.iter().chain(&report.observations) {
                let witness = f.witness.as_ref().map(|w| {
                    let names: Vec<&str> = w.iter().map(|n| n.as_str()).collect();
                    format!(" via {}", names.join(" -> "))
                });
                lines.push(format!(
                    "  {:?} on {}: {}{}",
                    f.kind,
                    f.subject,
                    if f.present { "present" } else { "absent" },
                    witness.unwrap_or_default()
                ));
            }
            let flagged: Vec<&str> = report.self_fulfilling.iter().map(|n| n.as_str()).collect();
            lines.push(format!("  self-fulfilling: {{{}}}", flagged.join(", ")));
            Ok((lines.join("\n"), report.to_json()))
        }
        Command::Voi { file, decision, obs, agent, fixed } => {
            let model = load(&file)?;
            let fixed = load_fixed(&model, &fixed)?;
            let v = value_of_information_with(&model, &agent, &decision, &obs, &fixed, &limits)?;
            Ok((
                format!("value of observing {obs} at {decision}: {v}"),
                json!({ "agent": agent, "decision": decision, "observation": obs, "voi": v }),
            ))
        }
        Command::Twin { file, interventions, output } => {
            let model = load(&file)?;
            let spec = InterventionSpec::parse(&interventions)?;
            let scm = functionalize_with(&model, &limits)?;
            let twin = twin_network(&scm, &spec)?;
            save(&output, &twin)?;
            let summary =
                format!("{} nodes ({} noise) written to {}", twin.len(), twin.twin().noise.len(), output.display());
            Ok((summary, json!({ "nodes": twin.len(), "noise": twin.twin().noise, "output": output })))
        }
        Command::Dot { file, output, color_agents } => {
            let model = load(&file)?;
            let dot = export_dot(&model, DotOptions { color_agents });
            match output {
                Some(path) => {
                    write(&path, &dot)?;
                    Ok((format!("wrote {}", path.display()), json!({ "output": path })))
                }
                None => Ok((dot.trim_end().to_string(), json!({ "dot": dot }))),
            }
        }
        Command::Nash { file } => {
            let model = load(&file)?;
            let report = nash_search(&model, &limits)?;
            let json = report.to_json(&model);
            let mut lines =
                vec![format!("{} pure equilibria among {} profiles", report.equilibria.len(), report.profiles_checked)];
            for e in json["equilibria"].as_array().expect("array") {
                lines.push(format!("  {} value: {}", e["policy"], fmt_value(e["value"].as_object().expect("object"))));
            }
            Ok((lines.join("\n"), json))
        }
        Command::Zoo(ZooCommand::List) => {
            let entries = zoo::list();
            let lines: Vec<String> = entries.iter().map(|e| format!("{:<22} {}", e.name, e.title)).collect();
            Ok((lines.join("\n"), json!(entries)))
        }
        Command::Zoo(ZooCommand::Build(b)) => {
            let params = ZooParams { horizon: b.horizon, domain: b.domain, preset: b.preset };
            let model = zoo::build(&b.name, &params)?;
            match b.output {
                Some(path) => {
                    save(&path, &model)?;
                    Ok((
                        format!("wrote {} ({} nodes)", path.display(), model.len()),
                        json!({ "output": path, "nodes": model.len() }),
                    ))
                }
                None => Ok((dsl::serialize(&model).trim_end().to_string(), dsl::to_json(&model))),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok((summary, report)) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("JSON values serialize"));
            } else {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let (true, Some(report)) = (json, &f.report) {
                println!("{}", serde_json::to_string_pretty(report).expect("JSON values serialize"));
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
