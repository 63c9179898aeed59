//! The `patternwise` command line.
//!
//! Exit codes: 0 success; 1 lint findings or failed expectations; 2 input,
//! parse or usage errors; 3 empty feasible set.

pub mod evaluate;
pub mod wizard;

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use patternwise_core::assistant::AssistantConfig;
use patternwise_core::dsl::{lint_kb, parse_context, parse_kb_named, ParseError};
use patternwise_core::maut;
use patternwise_core::model::KnowledgeBase;
use patternwise_core::session::Session;
use patternwise_core::solver::{self, ConflictDiagnosis};
use patternwise_core::{Error, KbCatalog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "patternwise",
    version,
    about = "Recommend security patterns from a knowledge base"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank the feasible patterns of a KB under a context file.
    Recommend {
        kb: PathBuf,
        ctx: PathBuf,
        /// Print the explanation as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check a suite of contexts against an expectations manifest.
    Evaluate { kb: PathBuf, suite: PathBuf },
    /// Report dead patterns, vacuous filters and unused properties.
    Lint { kb: PathBuf },
    /// Walk through the recommendation process interactively.
    Wizard {
        kb: PathBuf,
        #[arg(long, default_value = "")]
        requirement: String,
        /// Write the final session snapshot to this file.
        #[arg(long)]
        save: Option<PathBuf>,
        #[command(flatten)]
        assistant: AssistantArgs,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value = "kbs")]
        kb_dir: PathBuf,
        #[arg(long, default_value = "sessions")]
        store_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Browser origin allowed to call the API (repeatable).
        #[arg(long)]
        allow_origin: Vec<String>,
        #[command(flatten)]
        assistant: AssistantArgs,
    },
}

/// Overrides for the `ASSISTANT_*` environment variables.
#[derive(Debug, Args)]
struct AssistantArgs {
    /// `stub` or `external` [env: ASSISTANT_BACKEND]
    #[arg(long)]
    assistant_backend: Option<String>,
    /// [env: ASSISTANT_ENDPOINT]
    #[arg(long)]
    assistant_endpoint: Option<String>,
    /// [env: ASSISTANT_TIMEOUT_SECONDS]
    #[arg(long)]
    assistant_timeout: Option<String>,
}

impl AssistantArgs {
    fn config(
        &self,
        env: &dyn Fn(&str) -> Option<String>,
    ) -> patternwise_core::Result<AssistantConfig> {
        AssistantConfig::from_lookup(|key| {
            let flag = match key {
                "ASSISTANT_BACKEND" => self.assistant_backend.clone(),
                "ASSISTANT_ENDPOINT" => self.assistant_endpoint.clone(),
                "ASSISTANT_TIMEOUT_SECONDS" => self.assistant_timeout.clone(),
                _ => None,
            };
            flag.or_else(|| env(key))
        })
    }
}

/// Standard streams and environment of one invocation.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
    pub env: &'a dyn Fn(&str) -> Option<String>,
}

/// Prints each diagnostic with the offending source line and a caret.
pub fn render_parse_error(err: &ParseError, source: &str) -> String {
    let lines: Vec<&str> = source.lines().collect();
    let mut out = String::new();
    for d in err.diagnostics() {
        out.push_str(&d.to_string());
        out.push('\n');
        if let Some(text) = d.span.line.checked_sub(1).and_then(|i| lines.get(i)) {
            let gutter = d.span.line.to_string();
            out.push_str(&format!(" {gutter} | {}\n", text.trim_end_matches('\r')));
            let pad = " ".repeat(gutter.len());
            let indent = " ".repeat(d.span.column.saturating_sub(1));
            let marks = "^".repeat(d.span.length.max(1));
            out.push_str(&format!(" {pad} | {indent}{marks}\n"));
        }
    }
    out
}

struct Failure(i32);

fn read(path: &Path, io: &mut Io) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(io.stderr, "error: cannot read {}: {e}", path.display());
        Failure(EXIT_INPUT)
    })
}

fn load_kb(path: &Path, io: &mut Io) -> Result<KnowledgeBase, Failure> {
    let text = read(path, io)?;
    parse_kb_named(&text, &path.display().to_string()).map_err(|e| {
        let _ = write!(io.stderr, "{}", render_parse_error(&e, &text));
        Failure(EXIT_INPUT)
    })
}

fn print_diagnosis(out: &mut dyn Write, d: &ConflictDiagnosis) {
    let _ = writeln!(out, "no pattern is feasible under this context");
    if d.conflict.is_empty() {
        let _ = writeln!(
            out,
            "every pattern is excluded regardless of the context by: {}",
            d.unconditional.join(", ")
        );
    } else {
        let pairs: Vec<String> = d
            .conflict
            .iter()
            .map(|p| format!("{} = {}", p.property, p.value))
            .collect();
        let _ = writeln!(out, "minimal conflicting answers: {}", pairs.join(", "));
    }
    for note in &d.messages {
        let _ = writeln!(out, "  {}: {}", note.filter, note.message);
    }
}

fn cmd_recommend(kb_path: &Path, ctx_path: &Path, json: bool, io: &mut Io) -> Result<i32, Failure> {
    let kb = load_kb(kb_path, io)?;
    let text = read(ctx_path, io)?;
    let ctx = parse_context(&text, &ctx_path.display().to_string(), Some(&kb)).map_err(|e| {
        let _ = write!(io.stderr, "{}", render_parse_error(&e, &text));
        Failure(EXIT_INPUT)
    })?;
    match maut::recommend(&kb, &ctx) {
        Ok(explanation) => {
            if json {
                let _ = writeln!(
                    io.stdout,
                    "{}",
                    serde_json::to_string_pretty(&explanation).expect("explanations serialize")
                );
            } else {
                let _ = write!(io.stdout, "{}", explanation.render());
            }
            Ok(EXIT_OK)
        }
        Err(Error::EmptyFeasibleSet) => {
            let d = solver::diagnose_conflict(&kb, &ctx).map_err(|e| {
                let _ = writeln!(io.stderr, "error: {e}");
                Failure(EXIT_INPUT)
            })?;
            print_diagnosis(io.stderr, &d);
            Ok(EXIT_INFEASIBLE)
        }
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            Ok(EXIT_INPUT)
        }
    }
}

fn cmd_evaluate(kb_path: &Path, suite_dir: &Path, io: &mut Io) -> Result<i32, Failure> {
    let kb = load_kb(kb_path, io)?;
    let suite = evaluate::Suite::load(suite_dir, &kb).map_err(|e| {
        let _ = writeln!(io.stderr, "error: {e}");
        Failure(EXIT_INPUT)
    })?;
    let checks = evaluate::evaluate(&kb, &suite);
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        let _ = writeln!(io.stdout, "{c}");
    }
    let _ = writeln!(
        io.stdout,
        "{} passed, {failed} failed",
        checks.len() - failed
    );
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FINDINGS })
}

fn cmd_lint(kb_path: &Path, io: &mut Io) -> Result<i32, Failure> {
    let kb = load_kb(kb_path, io)?;
    let warnings = lint_kb(&kb);
    for w in &warnings {
        let _ = writeln!(io.stdout, "{}: warning: {w}", kb_path.display());
    }
    if warnings.is_empty() {
        let _ = writeln!(io.stdout, "{}: no findings", kb_path.display());
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_FINDINGS)
    }
}

fn load_catalog(kb_path: &Path, io: &mut Io) -> Result<(KbCatalog, String), Failure> {
    let mut catalog = KbCatalog::new();
    match catalog.load_file(kb_path) {
        Ok(id) => Ok((catalog, id)),
        Err(Error::Parse(e)) => {
            let source = e
                .diagnostics()
                .first()
                .and_then(|d| fs::read_to_string(&d.span.file).ok())
                .unwrap_or_default();
            let _ = write!(io.stderr, "{}", render_parse_error(&e, &source));
            Err(Failure(EXIT_INPUT))
        }
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            Err(Failure(EXIT_INPUT))
        }
    }
}

fn cmd_wizard(
    kb_path: &Path,
    requirement: &str,
    save: Option<&Path>,
    assistant: &AssistantArgs,
    io: &mut Io,
) -> Result<i32, Failure> {
    let config = assistant.config(io.env).map_err(|e| {
        let _ = writeln!(io.stderr, "error: {e}");
        Failure(EXIT_INPUT)
    })?;
    let (catalog, id) = load_catalog(kb_path, io)?;
    let session = Session::start(&catalog, requirement, &id).map_err(|e| {
        let _ = writeln!(io.stderr, "error: {e}");
        Failure(EXIT_INPUT)
    })?;
    let session = wizard::Wizard::new(&catalog, &config, &mut *io.stdin, &mut *io.stdout)
        .run(session)
        .map_err(|e| {
            let _ = writeln!(io.stderr, "error: {e}");
            Failure(EXIT_INPUT)
        })?;
    if let Some(path) = save {
        let json = serde_json::to_string_pretty(&session).expect("sessions serialize");
        fs::write(path, json + "\n").map_err(|e| {
            let _ = writeln!(io.stderr, "error: cannot write {}: {e}", path.display());
            Failure(EXIT_INPUT)
        })?;
    }
    Ok(EXIT_OK)
}

fn cmd_serve(config: patternwise_service::ServiceConfig, io: &mut Io) -> Result<i32, Failure> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| {
        let _ = writeln!(io.stderr, "error: cannot start runtime: {e}");
        Failure(EXIT_INPUT)
    })?;
    let _ = writeln!(io.stderr, "listening on http://{}", config.listen);
    match runtime.block_on(patternwise_service::serve(config)) {
        Ok(()) => Ok(EXIT_OK),
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            Ok(EXIT_INPUT)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(io.stderr, "{rendered}");
            } else {
                let _ = write!(io.stdout, "{rendered}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Recommend { kb, ctx, json } => cmd_recommend(kb, ctx, *json, io),
        Command::Evaluate { kb, suite } => cmd_evaluate(kb, suite, io),
        Command::Lint { kb } => cmd_lint(kb, io),
        Command::Wizard {
            kb,
            requirement,
            save,
            assistant,
        } => cmd_wizard(kb, requirement, save.as_deref(), assistant, io),
        Command::Serve {
            kb_dir,
            store_dir,
            listen,
            allow_origin,
            assistant,
        } => match assistant.config(io.env) {
            Ok(assistant) => cmd_serve(
                patternwise_service::ServiceConfig {
                    kb_dir: kb_dir.clone(),
                    store_dir: store_dir.clone(),
                    listen: *listen,
                    assistant,
                    allow_origins: allow_origin.clone(),
                },
                io,
            ),
            Err(e) => {
                let _ = writeln!(io.stderr, "error: {e}");
                Err(Failure(EXIT_INPUT))
            }
        },
    };
    match result {
        Ok(code) | Err(Failure(code)) => code,
    }
}
