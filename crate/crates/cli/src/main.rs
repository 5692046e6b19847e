use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use redhunt_core::auclean::build_propagation_graph;
use redhunt_core::decision::DecisionLog;
use redhunt_core::deteriorate::{deteriorate, verify_recovery, DeteriorateError, DeteriorationPlan};
use redhunt_core::elicitation::ElicitationSession;
use redhunt_core::model::{load_snapshot, store_snapshot, DatabaseSnapshot};
use redhunt_core::normalize::ConflictPolicy;
use redhunt_core::pipeline::{
    run_clean, run_pipeline, PipelineConfig, PipelineError, EXIT_FAILURE, EXIT_OK, REPORTS_DIR,
};
use redhunt_core::profiling::{export_profile_chart, relation_profile, render_chart_text};
use redhunt_core::Fraction;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "redhunt", version, about = "Find and remove redundancy hidden behind surrogate keys")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print redundancy profiles as text bar charts.
    Profile {
        snapshot: PathBuf,
        #[arg(long)]
        relation: Option<String>,
        /// Candidate natural key (comma separated) drawn as the red line.
        #[arg(long, requires = "relation", value_delimiter = ',')]
        key: Option<Vec<String>>,
        /// Write the chart documents as JSON to this file.
        #[arg(long)]
        chart: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        width: usize,
    },
    /// Print the propagation graph and its processing rounds.
    Graph {
        snapshot: PathBuf,
        #[arg(long)]
        decisions: PathBuf,
    },
    /// Rewrite surrogate values to class representatives.
    Clean {
        snapshot: PathBuf,
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a decision log through cleaning and normalization.
    Run {
        snapshot: PathBuf,
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Conflict policy: expert_only, most_frequent or first_by_provenance.
        #[arg(long, default_value = "expert_only", value_parser = parse_policy)]
        policy: ConflictPolicy,
    },
    /// Inject duplicates under a fresh surrogate key.
    Deteriorate {
        snapshot: PathBuf,
        /// Fraction of rows to duplicate (0.3, 3/10 or 30%).
        #[arg(long, value_parser = parse_fraction)]
        df: Fraction,
        #[arg(long = "attr-mult", default_value_t = 1)]
        attr_mult: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "ground-truth")]
        ground_truth: Option<PathBuf>,
        /// Also write the decision log a perfect expert would produce.
        #[arg(long = "decisions-out")]
        decisions_out: Option<PathBuf>,
    },
    /// Check that a cleaned snapshot gives the original back.
    VerifyRecovery { original: PathBuf, recovered: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long = "data-root")]
        data_root: PathBuf,
    },
}

fn parse_policy(s: &str) -> Result<ConflictPolicy, String> {
    ConflictPolicy::parse(s).ok_or_else(|| format!("unknown policy {s}"))
}

fn parse_fraction(s: &str) -> Result<Fraction, String> {
    Fraction::parse(s).ok_or_else(|| format!("not a fraction: {s}"))
}

/// Error with the process exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl<E: Into<PipelineError>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

fn deterioration_failure(e: DeteriorateError) -> Failure {
    match e {
        DeteriorateError::Model(m) => m.into(),
        other => Failure {
            code: EXIT_FAILURE,
            message: other.to_string(),
        },
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializes"));
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializes");
    text.push('\n');
    fs::write(path, text).map_err(PipelineError::from)?;
    Ok(())
}

fn load(path: &Path) -> Result<DatabaseSnapshot, Failure> {
    Ok(load_snapshot(path)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("redhunt: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}

fn execute(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Profile {
            snapshot,
            relation,
            key,
            chart,
            width,
        } => {
            let session = ElicitationSession::start_all(Arc::new(load(&snapshot)?));
            let names = match relation {
                Some(r) => vec![r],
                None => session.recommended_order(),
            };
            let mut docs = Vec::new();
            for name in &names {
                let rp = match &key {
                    Some(k) => {
                        let tags = session.state(name).map_err(PipelineError::from)?.tags.clone();
                        let r = session.snapshot().relation(name)?;
                        relation_profile(r, &tags.into_iter().collect(), Some(k))?
                    }
                    None => session.profile(name).map_err(PipelineError::from)?,
                };
                let doc = export_profile_chart(&rp);
                println!("{}", render_chart_text(&doc, width));
                docs.push(doc);
            }
            if let Some(path) = chart {
                write_json(&path, &docs)?;
            }
            Ok(EXIT_OK)
        }
        Command::Graph { snapshot, decisions } => {
            let log = DecisionLog::load(&decisions)?;
            let session = ElicitationSession::replay(Arc::new(load(&snapshot)?), &log)?;
            let graph = build_propagation_graph(&session)?;
            for (i, round) in graph.rounds().iter().enumerate() {
                println!("round {}: {}", i + 1, round.join(", "));
            }
            print_json(&graph);
            Ok(EXIT_OK)
        }
        Command::Clean {
            snapshot,
            decisions,
            out,
        } => {
            let log = DecisionLog::load(&decisions)?;
            let (cleaned, au, verify) = run_clean(Arc::new(load(&snapshot)?), &log)?;
            store_snapshot(&cleaned, &out)?;
            let reports = out.join(REPORTS_DIR);
            fs::create_dir_all(&reports).map_err(PipelineError::from)?;
            write_json(&reports.join("au.json"), &au)?;
            write_json(&reports.join("verify.json"), &verify)?;
            for r in &au.relations {
                let au = r.au.map_or_else(|| "-".to_string(), |f| f.to_string());
                println!("{}: {} rows, {} classes, AU {}", r.relation, r.size, r.classes, au);
            }
            if verify.is_empty() {
                Ok(EXIT_OK)
            } else {
                eprintln!("redhunt: {} relations still carry artificial unicity", verify.len());
                Ok(EXIT_FAILURE)
            }
        }
        Command::Run {
            snapshot,
            decisions,
            out,
            policy,
        } => {
            let config = PipelineConfig {
                policy,
                ..PipelineConfig::default()
            };
            let outcome = run_pipeline(&snapshot, &decisions, &out, &config)?;
            let summary = outcome.summary();
            print_json(&summary);
            Ok(summary.exit_code)
        }
        Command::Deteriorate {
            snapshot,
            df,
            attr_mult,
            seed,
            out,
            ground_truth,
            decisions_out,
        } => {
            let db = load(&snapshot)?;
            let plan = DeteriorationPlan::uniform(df, seed).with_attribute_multiplier(attr_mult);
            let (bad, truth) = deteriorate(&db, &plan).map_err(deterioration_failure)?;
            store_snapshot(&bad, &out)?;
            if let Some(path) = ground_truth {
                fs::write(path, truth.to_json() + "\n").map_err(PipelineError::from)?;
            }
            if let Some(path) = decisions_out {
                truth.scripted_decisions().store(&path)?;
            }
            for r in bad.relations() {
                println!("{}: {} rows", r.name(), r.len());
            }
            Ok(EXIT_OK)
        }
        Command::VerifyRecovery { original, recovered } => {
            let report = verify_recovery(&load(&original)?, &load(&recovered)?).map_err(deterioration_failure)?;
            print_json(&report);
            Ok(if report.is_green() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Serve { port, host, data_root } => {
            let addr = SocketAddr::new(host, port);
            let runtime = tokio::runtime::Runtime::new().map_err(PipelineError::from)?;
            eprintln!("redhunt: serving /api/v1 on http://{addr}");
            runtime
                .block_on(redhunt_server::serve(addr, data_root))
                .map_err(PipelineError::from)?;
            Ok(EXIT_OK)
        }
    }
}
