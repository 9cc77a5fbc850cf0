//! `gloss` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use gloss_core::analysis::{path_of, session_report};
use gloss_core::authoring::{load_graph, render_dot, render_dsl, to_json};
use gloss_core::llm::{ConfigError, PromptCatalogue, ProviderConfig};
use gloss_core::session::{MatchDecision, Session, SessionEngine};
use gloss_core::validate::{has_errors, validate};
use gloss_core::{NarrativeGraph, ProviderHandle};
use serde_json::json;

use crate::api::{serve, AppState};
use crate::store::DocumentStore;

#[derive(Debug, Parser)]
#[command(name = "gloss", version, about = "Author, rehearse and review branching practice conversations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Dsl,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProviderKind {
    Mock,
    Remote,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario file; exits non-zero when it has errors.
    Validate { file: PathBuf },
    /// Convert a scenario file to another format.
    Render {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Highlight this session's path (DOT only).
        #[arg(long)]
        session: Option<PathBuf>,
    },
    /// Rehearse a scenario in the terminal.
    Run {
        file: PathBuf,
        #[arg(long, value_enum)]
        provider: Option<ProviderKind>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        session_out: Option<PathBuf>,
        /// Where to write the graph, including branches grown during the run.
        #[arg(long)]
        graph_out: Option<PathBuf>,
    },
    /// Summarise a saved session against its graph.
    Report { session: PathBuf, graph: PathBuf },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Defaults to $GLOSS_DATA_DIR, then ./gloss-data.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

struct Io<'a> {
    input: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

type CliResult = Result<i32, String>;

/// Entry point used by the binary and by tests; returns the exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut io = Io { input, out, err };
    match dispatch(cli.command, &mut io) {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(io.err, "error: {message}");
            1
        }
    }
}

fn dispatch(command: Command, io: &mut Io) -> CliResult {
    match command {
        Command::Validate { file } => cmd_validate(&file, io),
        Command::Render { file, format, session } => cmd_render(&file, format, session.as_ref(), io),
        Command::Run {
            file,
            provider,
            threshold,
            session_out,
            graph_out,
        } => {
            let provider = provider_handle(provider).map_err(|e| e.to_string())?;
            let graph = read_graph(&file)?;
            let (session, graph) = chat(&SessionEngine::new(provider), graph, threshold, io)?;
            if let Some(path) = session_out {
                write(&path, &session.to_json())?;
            }
            if let Some(path) = graph_out {
                write(&path, &to_json(&graph))?;
            }
            Ok(0)
        }
        Command::Report { session, graph } => {
            let text = fs::read_to_string(&session).map_err(|e| format!("{}: {e}", session.display()))?;
            let session = Session::from_json(&text).map_err(|e| format!("{}: {e}", session.display()))?;
            let graph = read_graph(&graph)?;
            let path = path_of(&session, &graph).map_err(|e| e.to_string())?;
            let mut value = serde_json::to_value(session_report(&session)).expect("reports serialize");
            value["path"] = json!(path.to_ids());
            let text = gloss_core::canonical::to_canonical_string(&value).expect("reports serialize");
            io.out.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
            Ok(0)
        }
        Command::Serve { port, host, data_dir } => {
            let dir = data_dir
                .or_else(|| std::env::var_os("GLOSS_DATA_DIR").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("gloss-data"));
            let addr: SocketAddr = format!("{host}:{port}").parse().map_err(|e| format!("address: {e}"))?;
            let store = DocumentStore::open(&dir).map_err(|e| e.to_string())?;
            let provider = provider_handle(None).map_err(|e| e.to_string())?;
            let state = AppState::new(store, provider).with_token(std::env::var("GLOSS_TOKEN").ok());
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(serve(state, addr)).map_err(|e| e.to_string())?;
            Ok(0)
        }
    }
}

fn provider_handle(kind: Option<ProviderKind>) -> Result<ProviderHandle, ConfigError> {
    let forced = kind.map(|k| match k {
        ProviderKind::Mock => "mock",
        ProviderKind::Remote => "remote",
    });
    let config = ProviderConfig::from_lookup(|key| match (key, forced) {
        ("GLOSS_PROVIDER", Some(k)) => Some(k.to_string()),
        _ => std::env::var(key).ok(),
    })?;
    let prompts = PromptCatalogue::from_env().unwrap_or_else(|_| PromptCatalogue::bundled());
    Ok(ProviderHandle::from_config(&config).with_prompts(prompts))
}

fn read_graph(path: &PathBuf) -> Result<NarrativeGraph, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    load_graph(&text).map_err(|e| format!("{}:\n{e}", path.display()))
}

fn write(path: &PathBuf, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_validate(file: &PathBuf, io: &mut Io) -> CliResult {
    let graph = read_graph(file)?;
    let diagnostics = validate(&graph);
    for d in &diagnostics {
        let _ = writeln!(io.err, "{}: {d}", file.display());
    }
    let _ = writeln!(
        io.out,
        "{}: {} scenes, {} transitions, {} diagnostic(s)",
        file.display(),
        graph.nodes.len(),
        graph.edges.len(),
        diagnostics.len()
    );
    Ok(if has_errors(&diagnostics) { 1 } else { 0 })
}

fn cmd_render(file: &PathBuf, format: Format, session: Option<&PathBuf>, io: &mut Io) -> CliResult {
    let graph = read_graph(file)?;
    let text = match format {
        Format::Json => to_json(&graph),
        Format::Dsl => render_dsl(&graph).map_err(|e| e.to_string())?,
        Format::Dot => {
            let path = match session {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                    let s = Session::from_json(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                    Some(path_of(&s, &graph).map_err(|e| e.to_string())?)
                }
                None => None,
            };
            render_dot(&graph, path.as_ref()).map_err(|e| e.to_string())?
        }
    };
    io.out.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    Ok(0)
}

/// Line-by-line rehearsal until the scenario ends, input runs out or the
/// student types `/end`.
fn chat(
    engine: &SessionEngine,
    mut graph: NarrativeGraph,
    threshold: Option<f64>,
    io: &mut Io,
) -> Result<(Session, NarrativeGraph), String> {
    let (mut session, opening) = engine.start_session(&graph, threshold).map_err(|e| e.to_string())?;
    let say = |out: &mut dyn Write, line: String| out.write_all(line.as_bytes()).map_err(|e| e.to_string());
    say(io.out, format!("[{}] {} mode, threshold {}\n", graph.title, graph.mode.as_str(), session.match_threshold))?;
    say(io.out, format!("avatar: {opening}\n"))?;
    let mut line = String::new();
    while session.is_active() {
        say(io.out, "you> ".into())?;
        io.out.flush().map_err(|e| e.to_string())?;
        line.clear();
        if io.input.read_line(&mut line).map_err(|e| e.to_string())? == 0 {
            say(io.out, "\n".into())?;
            break;
        }
        let utterance = line.trim();
        if utterance == "/end" {
            break;
        }
        if utterance.is_empty() {
            continue;
        }
        match engine.submit_turn(&session, &graph, utterance) {
            Ok((next, next_graph, turn)) => {
                match &turn.decision {
                    MatchDecision::Matched { confidence, .. } => say(io.out, format!("  (matched, {confidence:.2})\n"))?,
                    MatchDecision::GeneratedBranch { node_id, .. } => {
                        say(io.out, format!("  (new branch {node_id})\n"))?
                    }
                    MatchDecision::Rejected { hint, .. } => say(io.out, format!("  (no match; options: {hint})\n"))?,
                }
                say(io.out, format!("avatar: {}\n", turn.avatar_reply))?;
                say(io.out, format!("feedback: {}\n", turn.feedback))?;
                session = next;
                graph = next_graph;
            }
            Err(e) => {
                let _ = writeln!(io.err, "turn failed: {e}");
            }
        }
    }
    if session.is_active() {
        session = engine.end_session(&session).map_err(|e| e.to_string())?;
    }
    say(io.out, format!("session over after {} turn(s)\n", session.transcript.len()))?;
    Ok((session, graph))
}
