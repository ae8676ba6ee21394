//! Command-line front end and loopback HTTP service.

pub mod server;

use std::fs;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use goalsight_core::lexicon::{
    attach_frequencies, balance_select, default_corpus, load_corpus, load_lexicon,
    FrequencyCorpus, GoalCategory, StimulusSet, Tolerances,
};
use goalsight_core::session::{Phase, SessionState, SessionStore};
use goalsight_core::{build_schedule, recovery_rate, render_text, SessionConfig, SimulantParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "goalsight", version, about = "Masked goal-word presentation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct DataDir {
    /// Directory holding session logs and snapshots.
    #[arg(long, env = "GOALSIGHT_DATA_DIR", default_value = "goalsight-data")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stimulus lexicon tools.
    #[command(subcommand)]
    Lexicon(LexiconCmd),
    /// Write a 40-trial presentation plan as JSON lines.
    Plan(PlanArgs),
    /// Run simulated sessions and report planted-category recovery.
    Simulate(SimulateArgs),
    /// Print the report of a finalized session.
    Report {
        session_id: String,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        dir: DataDir,
    },
    /// Serve the session API on the loopback interface.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Address to bind; anything but loopback exposes an unauthenticated API.
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
        #[command(flatten)]
        dir: DataDir,
    },
    /// Inspect stored sessions.
    #[command(subcommand)]
    Sessions(SessionsCmd),
}

#[derive(Debug, Subcommand)]
pub enum LexiconCmd {
    /// Check that a lexicon forms a balanced 8 x 5 set. Exits 1 when out of tolerance.
    Validate {
        lexicon: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        tol_length: f64,
        #[arg(long, default_value_t = 0.5)]
        tol_logfreq: f64,
        #[arg(long)]
        json: bool,
    },
    /// Pick the best-balanced k words per category from a candidate lexicon.
    Select {
        candidates: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        tol_length: f64,
        #[arg(long, default_value_t = 0.5)]
        tol_logfreq: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 50.0)]
    pub duration_ms: f64,
    #[arg(long, default_value_t = 100.0)]
    pub mask_ms: f64,
    #[arg(long)]
    pub no_mask: bool,
    #[arg(long, default_value_t = 4000.0)]
    pub pause_ms: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulant parameters, JSON or TOML (by extension).
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub sessions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub planted: GoalCategory,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 50.0)]
    pub duration_ms: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum SessionsCmd {
    List {
        #[command(flatten)]
        dir: DataDir,
    },
    Show {
        session_id: String,
        #[command(flatten)]
        dir: DataDir,
    },
    /// Copy a session's raw event log.
    Export {
        session_id: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        dir: DataDir,
    },
}

/// Compact view of a session for listings and API replies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub pid: String,
    pub phase: Phase,
    pub cursor: usize,
    pub session_ordinal: u32,
    pub seed: u64,
    pub main_trials: usize,
    pub main_responded: usize,
    pub preblock_trials: usize,
    pub stimulus_ms: f64,
    pub refresh_hz: f64,
    pub consent_confirmed: bool,
    pub aborted: bool,
    pub finalized: bool,
}

impl From<&SessionState> for SessionSummary {
    fn from(s: &SessionState) -> Self {
        SessionSummary {
            session_id: s.session_id.clone(),
            pid: s.pid.clone(),
            phase: s.phase,
            cursor: s.cursor,
            session_ordinal: s.session_ordinal,
            seed: s.seed,
            main_trials: s.transcript.plan.len(),
            main_responded: s.transcript.responses.len(),
            preblock_trials: s.preblock.as_ref().map_or(0, |p| p.plan.len()),
            stimulus_ms: s.transcript.plan.trials.first().map_or(0.0, |t| t.stimulus_ms),
            refresh_hz: s.refresh_hz,
            consent_confirmed: s.consent_confirmed,
            aborted: s.aborted,
            finalized: s.report.is_some(),
        }
    }
}

fn corpus_or_default(path: Option<&Path>) -> Result<FrequencyCorpus> {
    Ok(match path {
        Some(p) => load_corpus(p)?,
        None => default_corpus(),
    })
}

fn load_set(lexicon: &Path, corpus: Option<&Path>, tol: Tolerances) -> Result<StimulusSet> {
    let rows = load_lexicon(lexicon)?;
    let corpus = corpus_or_default(corpus)?;
    Ok(StimulusSet::from_rows(&rows, &corpus, tol)?)
}

fn write_out(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn load_params(path: &Path) -> Result<SimulantParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let params = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text)?
    } else {
        serde_json::from_str(&text)?
    };
    Ok(params)
}

/// Runs a parsed command, returning the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Lexicon(LexiconCmd::Validate {
            lexicon,
            corpus,
            tol_length,
            tol_logfreq,
            json,
        }) => {
            let tol = Tolerances {
                length: tol_length,
                log_freq: tol_logfreq,
            };
            let set = load_set(&lexicon, corpus.as_deref(), tol)?;
            let r = goalsight_core::validate_set(&set, tol)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("{:<16} {:>8} {:>10}", "category", "mean_len", "mean_logf");
                for c in GoalCategory::ALL {
                    println!(
                        "{:<16} {:>8.2} {:>10.3}",
                        c.as_str(),
                        r.per_category_mean_length[&c],
                        r.per_category_mean_log_freq[&c]
                    );
                }
                println!(
                    "length spread {:.3} (tol {}), log-frequency spread {:.3} (tol {}): {}",
                    r.max_length_spread,
                    tol.length,
                    r.max_log_freq_spread,
                    tol.log_freq,
                    if r.within_tolerance { "balanced" } else { "OUT OF TOLERANCE" }
                );
            }
            Ok(if r.within_tolerance { 0 } else { 1 })
        }
        Command::Lexicon(LexiconCmd::Select {
            candidates,
            corpus,
            k,
            tol_length,
            tol_logfreq,
            output,
        }) => {
            let tol = Tolerances {
                length: tol_length,
                log_freq: tol_logfreq,
            };
            let rows = load_lexicon(&candidates)?;
            let grouped = attach_frequencies(&rows, &corpus_or_default(corpus.as_deref())?)?;
            let set = balance_select(&grouped, k, tol)?;
            let mut text = String::from("word\tcategory\tsource\n");
            for e in &set.entries {
                text.push_str(&format!("{}\t{}\t{}\n", e.word, e.category, e.source));
            }
            write_out(output.as_deref(), &text)?;
            let r = &set.balance_report;
            eprintln!(
                "objective {:.4}: length spread {:.3}, log-frequency spread {:.3}",
                r.objective(tol),
                r.max_length_spread,
                r.max_log_freq_spread
            );
            Ok(if r.within_tolerance { 0 } else { 1 })
        }
        Command::Plan(a) => {
            let set = load_set(&a.lexicon, a.corpus.as_deref(), Tolerances::default())?;
            let config = SessionConfig {
                stimulus_ms: a.duration_ms,
                mask_enabled: !a.no_mask,
                mask_ms: a.mask_ms,
                inter_trial_pause_ms: a.pause_ms,
                ..Default::default()
            };
            let plan = build_schedule(&set, &config, a.seed)?;
            write_out(a.output.as_deref(), &plan.to_jsonl())?;
            Ok(0)
        }
        Command::Simulate(a) => simulate(a),
        Command::Report {
            session_id,
            json,
            dir,
        } => {
            let store = SessionStore::open(&dir.data_dir)?;
            let report = store.report(&session_id)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", render_text(&report));
            }
            Ok(0)
        }
        Command::Serve { port, bind, dir } => {
            serve(SocketAddr::new(bind, port), &dir.data_dir)?;
            Ok(0)
        }
        Command::Sessions(cmd) => sessions(cmd),
    }
}

fn simulate(a: SimulateArgs) -> Result<i32> {
    let params = match &a.params {
        Some(p) => load_params(p)?,
        None => SimulantParams::default(),
    };
    let set = match &a.lexicon {
        Some(l) => load_set(l, a.corpus.as_deref(), Tolerances::default())?,
        None => goalsight_core::lexicon::default_set(),
    };
    let config = SessionConfig {
        stimulus_ms: a.duration_ms,
        ..Default::default()
    };
    let out = recovery_rate(a.planted, &params, a.sessions, a.seed, &set, &config)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(0);
    }
    println!("planted {}  sessions {}", out.planted, out.sessions);
    println!("recovery (ties shared) {:.4}", out.recovery);
    println!("recovery (strict)      {:.4}", out.strict_recovery);
    println!("chance                 {:.4}", 1.0 / GoalCategory::GOALS.len() as f64);
    println!();
    println!("{:<16} {:>13}", "category", "mean hit rate");
    for (c, h) in &out.mean_hit_rate {
        let mark = if *c == out.planted { " *" } else { "" };
        println!("{:<16} {:>13.4}{mark}", c.as_str(), h);
    }
    Ok(0)
}

fn serve(addr: SocketAddr, data_dir: &Path) -> Result<()> {
    if !addr.ip().is_loopback() {
        eprintln!("warning: binding {addr}; the API has no authentication");
    }
    let store = Arc::new(SessionStore::open(data_dir)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("goalsight listening on http://{} (data in {})", listener.local_addr()?, data_dir.display());
        axum::serve(listener, server::router(store))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn sessions(cmd: SessionsCmd) -> Result<i32> {
    match cmd {
        SessionsCmd::List { dir } => {
            let store = SessionStore::open(&dir.data_dir)?;
            let list = store.list()?;
            println!(
                "{:<34} {:<12} {:>3} {:<12} {:>9}",
                "session", "pid", "#", "phase", "responses"
            );
            for s in &list {
                let sum = SessionSummary::from(s);
                println!(
                    "{:<34} {:<12} {:>3} {:<12} {:>5}/{:<3}{}",
                    sum.session_id,
                    sum.pid,
                    sum.session_ordinal,
                    format!("{:?}", sum.phase).to_lowercase(),
                    sum.main_responded,
                    sum.main_trials,
                    if sum.aborted { " aborted" } else { "" }
                );
            }
            Ok(0)
        }
        SessionsCmd::Show { session_id, dir } => {
            let store = SessionStore::open(&dir.data_dir)?;
            let s = store.state(&session_id)?;
            println!("{}", serde_json::to_string_pretty(&SessionSummary::from(&s))?);
            if let Some(r) = &s.report {
                println!();
                print!("{}", render_text(r));
            }
            Ok(0)
        }
        SessionsCmd::Export {
            session_id,
            output,
            dir,
        } => {
            let store = SessionStore::open(&dir.data_dir)?;
            store.state(&session_id)?;
            let text = fs::read_to_string(store.log_path(&session_id))?;
            write_out(output.as_deref(), &text)?;
            Ok(0)
        }
    }
}

/// Parses arguments and runs; used by the binary.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<goalsight_core::SessionError>()) {
                return 3;
            }
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plan_flags() {
        let cli = Cli::try_parse_from([
            "goalsight", "plan", "--lexicon", "l.tsv", "--seed", "9", "--no-mask", "-o", "p.jsonl",
        ])
        .unwrap();
        let Command::Plan(a) = cli.command else { panic!() };
        assert_eq!(a.seed, 9);
        assert!(a.no_mask);
        assert_eq!(a.duration_ms, 50.0);
        assert_eq!(a.pause_ms, 4000.0);
    }

    #[test]
    fn planted_category_parses_alias() {
        let cli = Cli::try_parse_from(["goalsight", "simulate", "--planted", "growth"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!(a.planted, GoalCategory::Achievement);
    }

    #[test]
    fn params_from_toml_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("p.toml");
        fs::write(&t, "theta_ms = 60.0\n[boost]\npower = 25.0\n").unwrap();
        let p = load_params(&t).unwrap();
        assert_eq!(p.theta_ms, 60.0);
        assert_eq!(p.boost_of(GoalCategory::Power), 25.0);
        let j = dir.path().join("p.json");
        fs::write(&j, r#"{"slope": 0.5}"#).unwrap();
        assert_eq!(load_params(&j).unwrap().slope, 0.5);
    }
}
