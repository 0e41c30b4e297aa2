//! Command line front end for the session calculus: typechecking,
//! projection, event structures, configuration domains, trace execution,
//! and bounded verification of the correspondence between networks and
//! their global types.
//!
//! Exit codes: 0 for success or a passing verdict, 1 for a failing verdict
//! (typechecking, projection, trace execution, or a property check), 2 for
//! unreadable or unparseable input, 3 for usage errors.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use session_es::es_core::{FlowEs, PrimeEs, Truncated};
use session_es::global_es::esg;
use session_es::lts::{run_global, run_network};
use session_es::net_es::esn;
use session_es::proc_es::esp;
use session_es::syntax::parse::{parse_module, parse_trace, Module};
use session_es::syntax::{Network, Participant};
use session_es::typing::{project, typecheck};
use session_es::verify::{
    check_isomorphism, check_progress, check_session_fidelity, check_subject_reduction,
    run_campaign, CampaignConfig, VerifyReport,
};

#[derive(Parser)]
#[command(name = "session-es", version, about = "Multiparty session calculus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck a network against a global type
    Check {
        /// Module file with the definitions
        file: PathBuf,
        /// Network name in the module
        #[arg(long)]
        network: String,
        /// Global type name in the module
        #[arg(long)]
        global: String,
    },
    /// Project a global type onto one participant
    Project {
        file: PathBuf,
        #[arg(long)]
        global: String,
        /// Participant to project onto
        #[arg(long)]
        participant: String,
    },
    /// List the events of a term's event structure
    Events {
        file: PathBuf,
        #[command(flatten)]
        subject: Subject,
        /// Bound on event depth; required for recursive terms
        #[arg(long)]
        bound: Option<usize>,
        /// Emit JSON instead of text
        #[arg(long, conflicts_with = "dot")]
        json: bool,
        /// Emit DOT instead of text
        #[arg(long)]
        dot: bool,
    },
    /// List the configuration domain of a term's event structure
    Configs {
        file: PathBuf,
        #[command(flatten)]
        subject: Subject,
        #[arg(long)]
        bound: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Execute a trace and print the resulting term
    Run {
        file: PathBuf,
        #[command(flatten)]
        subject: RunSubject,
        /// Comma-separated communications, e.g. "p->q:l,q->r:m"
        #[arg(long)]
        trace: String,
    },
    /// Check that a typed network and its type have isomorphic
    /// configuration domains up to a bound
    Iso {
        file: PathBuf,
        #[arg(long)]
        network: String,
        #[arg(long)]
        global: String,
        /// Bound on the number of communications explored
        #[arg(long)]
        bound: usize,
        #[arg(long)]
        json: bool,
    },
    /// Check correspondence properties on a file pair or on random pairs
    Verify(VerifyArgs),
    /// Print an event structure in DOT format
    Dot {
        file: PathBuf,
        #[command(flatten)]
        subject: Subject,
        #[arg(long)]
        bound: Option<usize>,
    },
}

/// The term a command operates on: exactly one of a network, a global
/// type, or a process from the module.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct Subject {
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    global: Option<String>,
    #[arg(long)]
    process: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RunSubject {
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    global: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Module file with the pair to check; omit with --random
    file: Option<PathBuf>,
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    global: Option<String>,
    /// Property to check on the file pair
    #[arg(long, value_enum)]
    property: Option<PropertyArg>,
    /// Trace length bound for sr and sf
    #[arg(long, default_value_t = 6)]
    max_len: usize,
    /// Progress cap, or communication bound for iso (default 5)
    #[arg(long)]
    bound: Option<usize>,
    /// Check generated pairs instead of a file
    #[arg(long)]
    random: bool,
    /// First seed of the generated pairs
    #[arg(long, default_value_t = 0)]
    seeds: u64,
    /// How many pairs to generate
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Size budget of generated types
    #[arg(long, default_value_t = 5)]
    size: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    /// Subject reduction
    Sr,
    /// Session fidelity
    Sf,
    /// Every participant eventually communicates
    Progress,
    /// Configuration-domain isomorphism
    Iso,
}

enum AppError {
    /// A failing verdict; the message is the report. Exit 1.
    Failure(String),
    /// Unreadable or unparseable input, or a name missing from the module.
    /// Exit 2.
    Validation(String),
    /// A flag combination that makes no sense. Exit 3.
    Usage(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(AppError::Failure(msg)) => {
            println!("{msg}");
            ExitCode::from(1)
        }
        Err(AppError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, AppError> {
    match command {
        Command::Check { file, network, global } => {
            let module = load_module(&file)?;
            let net = named(&module.networks, &network, "network")?;
            let g = named(&module.globals, &global, "global type")?;
            match typecheck(&net, &g) {
                Ok(()) => {
                    println!("network `{network}` typechecks against global type `{global}`");
                    Ok(0)
                }
                Err(e) => Err(AppError::Failure(format!(
                    "network `{network}` does not typecheck against `{global}`: {e}"
                ))),
            }
        }
        Command::Project { file, global, participant } => {
            let module = load_module(&file)?;
            let g = named(&module.globals, &global, "global type")?;
            if participant.is_empty() {
                return Err(AppError::Usage("--participant must be a nonempty name".into()));
            }
            match project(&g, &Participant::new(&*participant)) {
                Ok(proc) => {
                    print!("{}", proc.to_definitions(&format!("{global}_{participant}")));
                    Ok(0)
                }
                Err(e) => Err(AppError::Failure(format!(
                    "projection of `{global}` onto `{participant}` is undefined: {e}"
                ))),
            }
        }
        Command::Events { file, subject, bound, json, dot } => {
            let module = load_module(&file)?;
            let want = if dot { Want::Dot } else { Want::Events };
            let out = es_output(&module, &subject, bound, want)?;
            match want {
                Want::Dot => print!("{}", out.dot),
                _ if json => println!("{}", out.events_json()),
                _ => print!("{}", out.events_text()),
            }
            Ok(0)
        }
        Command::Configs { file, subject, bound, json } => {
            let module = load_module(&file)?;
            let out = es_output(&module, &subject, bound, Want::Configs)?;
            if json {
                println!("{}", out.configs_json());
            } else {
                print!("{}", out.configs_text());
            }
            Ok(0)
        }
        Command::Run { file, subject, trace } => {
            let module = load_module(&file)?;
            let tr = parse_trace(&trace).map_err(|e| AppError::Validation(e.to_string()))?;
            if let Some(name) = &subject.network {
                let net = named(&module.networks, name, "network")?;
                match run_network(&net, &tr) {
                    Ok(result) => {
                        if result.is_empty() {
                            println!("(empty network: every participant has terminated)");
                        } else {
                            print!("{}", result.to_definitions(name));
                        }
                        Ok(0)
                    }
                    Err(e) => Err(AppError::Failure(e.to_string())),
                }
            } else {
                let name = subject.global.as_ref().expect("clap enforces exactly one subject");
                let g = named(&module.globals, name, "global type")?;
                match run_global(&g, &tr) {
                    Ok(result) => {
                        print!("{}", result.to_definitions(name));
                        Ok(0)
                    }
                    Err(e) => Err(AppError::Failure(e.to_string())),
                }
            }
        }
        Command::Iso { file, network, global, bound, json } => {
            let module = load_module(&file)?;
            let net = named(&module.networks, &network, "network")?;
            let g = named(&module.globals, &global, "global type")?;
            let report = check_isomorphism(&net, &g, bound);
            print_report(&report, json);
            Ok(u8::from(!report.passed()))
        }
        Command::Verify(args) => verify_cmd(args),
        Command::Dot { file, subject, bound } => {
            let module = load_module(&file)?;
            let out = es_output(&module, &subject, bound, Want::Dot)?;
            print!("{}", out.dot);
            Ok(0)
        }
    }
}

fn verify_cmd(args: VerifyArgs) -> Result<u8, AppError> {
    if args.random {
        if args.file.is_some()
            || args.network.is_some()
            || args.global.is_some()
            || args.property.is_some()
        {
            return Err(AppError::Usage(
                "--random generates its own pairs and checks every property; \
                 drop the file, --network, --global, and --property"
                    .into(),
            ));
        }
        let cfg = CampaignConfig {
            start_seed: args.seeds,
            count: args.count,
            size: args.size,
            max_len: args.max_len,
            k: args.bound.unwrap_or(5),
        };
        let reports = run_campaign(&cfg).map_err(|e| AppError::Validation(e.to_string()))?;
        let ok = reports.iter().all(VerifyReport::passed);
        if args.json {
            println!("{}", pretty(&serde_json::to_value(&reports).expect("reports serialize")));
        } else {
            for report in &reports {
                println!("{report}");
            }
            println!(
                "{} checks over {} pairs: {}",
                reports.len(),
                args.count,
                if ok { "all passed" } else { "some failed" }
            );
        }
        Ok(u8::from(!ok))
    } else {
        let (Some(file), Some(network), Some(global), Some(property)) =
            (&args.file, &args.network, &args.global, args.property)
        else {
            return Err(AppError::Usage(
                "checking a file needs FILE, --network, --global, and --property \
                 (or use --random)"
                    .into(),
            ));
        };
        let module = load_module(file)?;
        let net = named(&module.networks, network, "network")?;
        let g = named(&module.globals, global, "global type")?;
        let report = match property {
            PropertyArg::Sr => check_subject_reduction(&net, &g, args.max_len),
            PropertyArg::Sf => check_session_fidelity(&net, &g, args.max_len),
            PropertyArg::Progress => check_progress(&net, &g, args.bound),
            PropertyArg::Iso => check_isomorphism(&net, &g, args.bound.unwrap_or(5)),
        };
        print_report(&report, args.json);
        Ok(u8::from(!report.passed()))
    }
}

fn print_report(report: &VerifyReport, json: bool) {
    if json {
        println!("{}", pretty(&serde_json::to_value(report).expect("reports serialize")));
    } else {
        println!("{report}");
    }
}

fn load_module(path: &Path) -> Result<Module, AppError> {
    let src = fs::read_to_string(path)
        .map_err(|e| AppError::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_module(&src).map_err(|e| AppError::Validation(e.to_string()))
}

fn named<T: Clone>(map: &BTreeMap<String, T>, name: &str, kind: &str) -> Result<T, AppError> {
    map.get(name)
        .cloned()
        .ok_or_else(|| AppError::Validation(format!("no {kind} named `{name}` in the module")))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Want {
    Events,
    Configs,
    Dot,
}

/// One event structure rendered for output: event lines plus their JSON
/// forms, the configuration domain when asked for, and DOT when asked for.
struct EsOutput {
    kind: &'static str,
    name: String,
    bound: Option<usize>,
    exact: bool,
    events: Vec<(String, serde_json::Value)>,
    configs: Vec<Vec<String>>,
    dot: String,
}

impl EsOutput {
    fn exactness(&self) -> String {
        if self.exact {
            "exact".to_owned()
        } else {
            let k = self.bound.expect("truncation only happens under an explicit bound");
            format!("truncated at bound {k}")
        }
    }

    fn events_text(&self) -> String {
        let mut out = format!(
            "events of {} `{}`: {} ({})\n",
            self.kind,
            self.name,
            count_noun(self.events.len(), "event"),
            self.exactness()
        );
        for (line, _) in &self.events {
            out.push_str(&format!("  {line}\n"));
        }
        out
    }

    fn events_json(&self) -> String {
        let events: Vec<&serde_json::Value> = self.events.iter().map(|(_, v)| v).collect();
        pretty(&json!({
            "kind": self.kind,
            "name": self.name,
            "bound": self.bound,
            "exact": self.exact,
            "events": events,
        }))
    }

    fn configs_text(&self) -> String {
        let mut out = format!(
            "configuration domain of {} `{}`: {} ({})\n",
            self.kind,
            self.name,
            count_noun(self.configs.len(), "configuration"),
            self.exactness()
        );
        for config in &self.configs {
            out.push_str(&format!("  {{{}}}\n", config.join(", ")));
        }
        out
    }

    fn configs_json(&self) -> String {
        pretty(&json!({
            "kind": self.kind,
            "name": self.name,
            "bound": self.bound,
            "exact": self.exact,
            "configs": self.configs,
        }))
    }
}

fn count_noun(n: usize, noun: &str) -> String {
    if n == 1 {
        format!("1 {noun}")
    } else {
        format!("{n} {noun}s")
    }
}

fn es_output(
    module: &Module,
    subject: &Subject,
    bound: Option<usize>,
    want: Want,
) -> Result<EsOutput, AppError> {
    if let Some(name) = &subject.network {
        let net: Network = named(&module.networks, name, "network")?;
        let recursive = net.iter().any(|(_, p)| p.is_recursive());
        let k = effective_bound(bound, recursive, "network", name)?;
        Ok(flow_out("network", name.clone(), bound, esn(&net, k), want))
    } else if let Some(name) = &subject.global {
        let g = named(&module.globals, name, "global type")?;
        let k = effective_bound(bound, g.is_recursive(), "global type", name)?;
        let t = esg(&g, k).map_err(|e| {
            AppError::Failure(format!("global type `{name}` is not well formed: {e}"))
        })?;
        Ok(prime_out("global type", name.clone(), bound, t, want))
    } else {
        let name = subject.process.as_ref().expect("clap enforces exactly one subject");
        let p = named(&module.processes, name, "process")?;
        let k = effective_bound(bound, p.is_recursive(), "process", name)?;
        Ok(prime_out("process", name.clone(), bound, esp(&p, k), want))
    }
}

/// Without a bound, a recursive term's infinite event structure cannot be
/// listed; a non-recursive term is enumerated exhaustively.
fn effective_bound(
    bound: Option<usize>,
    recursive: bool,
    kind: &str,
    name: &str,
) -> Result<usize, AppError> {
    match bound {
        Some(k) => Ok(k),
        None if recursive => Err(AppError::Usage(format!(
            "{kind} `{name}` is recursive, so its event structure is infinite; \
             pass --bound K for the K-bounded approximation"
        ))),
        None => Ok(usize::MAX),
    }
}

fn prime_out<E>(
    kind: &'static str,
    name: String,
    bound: Option<usize>,
    t: Truncated<PrimeEs<E>>,
    want: Want,
) -> EsOutput
where
    E: Ord + Clone + fmt::Display + Serialize,
{
    let es = &t.value;
    let events = es
        .events()
        .iter()
        .map(|e| (e.to_string(), serde_json::to_value(e).expect("events serialize")))
        .collect();
    let configs = if want == Want::Configs {
        es.enumerate_configs(es.events().len())
            .value
            .iter()
            .map(|c| c.iter().map(|e| e.to_string()).collect())
            .collect()
    } else {
        Vec::new()
    };
    let dot = if want == Want::Dot { es.to_dot(&name) } else { String::new() };
    EsOutput { kind, name, bound, exact: t.exact, events, configs, dot }
}

fn flow_out<E>(
    kind: &'static str,
    name: String,
    bound: Option<usize>,
    t: Truncated<FlowEs<E>>,
    want: Want,
) -> EsOutput
where
    E: Ord + Clone + fmt::Display + Serialize,
{
    let es = &t.value;
    let events = es
        .events()
        .iter()
        .map(|e| (e.to_string(), serde_json::to_value(e).expect("events serialize")))
        .collect();
    let configs = if want == Want::Configs {
        es.enumerate_configs(es.events().len())
            .value
            .iter()
            .map(|c| c.iter().map(|e| e.to_string()).collect())
            .collect()
    } else {
        Vec::new()
    };
    let dot = if want == Want::Dot { es.to_dot(&name) } else { String::new() };
    EsOutput { kind, name, bound, exact: t.exact, events, configs, dot }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON rendering of plain data")
}
