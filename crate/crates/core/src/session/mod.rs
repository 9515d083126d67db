// SPDX-License-Identifier: Apache-2.0

//! External solver sessions over textual SMT-LIB2.
//!
//! The session keeps a local mirror of the assertion stack. Incremental
//! sessions forward everything to one long-lived process and check under a
//! single assumption literal. Non-incremental sessions spawn a fresh process
//! per check and replay the mirror without push/pop, asserting the
//! assumption as a unit clause.

mod process;
pub mod sexp;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::term::Var;
use crate::encoder::{lower, BitWidths, EncodeError, EncodingScope, LiteralLayout, Theory};
use process::{Process, Reply};
use sexp::Sexp;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("failed to spawn solver `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver error: {0}")]
    Backend(String),
    #[error("solver `{program}` crashed: {output}")]
    Crashed { program: String, output: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no model available: last verdict was not sat")]
    NoModel,
    #[error("pop at assertion depth 0")]
    DepthZero,
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Backend {
    Z3,
    Cvc5,
    Bitwuzla,
    /// Any other SMT-LIB2 solver reading commands from standard input.
    Command(Vec<String>),
}

impl Backend {
    pub fn argv(&self) -> Vec<String> {
        let v: &[&str] = match self {
            Backend::Z3 => &["z3", "-in", "-smt2"],
            Backend::Cvc5 => &["cvc5", "--lang=smt2", "--incremental"],
            Backend::Bitwuzla => &["bitwuzla", "--lang", "smt2"],
            Backend::Command(argv) => return argv.clone(),
        };
        v.iter().map(|s| s.to_string()).collect()
    }

    pub fn name(&self) -> String {
        match self {
            Backend::Z3 => "z3".into(),
            Backend::Cvc5 => "cvc5".into(),
            Backend::Bitwuzla => "bitwuzla".into(),
            Backend::Command(argv) => argv.join(" "),
        }
    }

    pub fn supports(&self, theory: Theory) -> bool {
        match self {
            Backend::Bitwuzla => theory == Theory::Bv,
            Backend::Cvc5 => theory == Theory::Lia,
            Backend::Z3 | Backend::Command(_) => true,
        }
    }

    /// Whether the solver executable can be found.
    pub fn is_available(&self) -> bool {
        self.argv().first().is_some_and(|p| resolve_program(p).is_some())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "z3" => Backend::Z3,
            "cvc5" => Backend::Cvc5,
            "bitwuzla" => Backend::Bitwuzla,
            other => {
                let argv: Vec<String> = other
                    .strip_prefix("cmd:")
                    .ok_or_else(|| format!("unknown backend `{other}` (z3, cvc5, bitwuzla or cmd:<command line>)"))?
                    .split_whitespace()
                    .map(String::from)
                    .collect();
                if argv.is_empty() {
                    return Err("empty command line".into());
                }
                Backend::Command(argv)
            }
        })
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn resolve_program(program: &str) -> Option<PathBuf> {
    if program.contains('/') {
        let p = PathBuf::from(program);
        return p.is_file().then_some(p);
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths)
            .map(|dir| dir.join(program))
            .find(|p| p.is_file())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "inc")]
    Incremental,
    #[serde(rename = "noninc")]
    NonIncremental,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Incremental => "inc",
            Mode::NonIncremental => "noninc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub backend: Backend,
    pub theory: Theory,
    pub mode: Mode,
    /// Per-query wall-clock limit enforced by killing the solver.
    pub timeout: Option<Duration>,
    /// Keep an in-memory log of the full exchange.
    pub transcript: bool,
}

impl SolverConfig {
    pub fn new(backend: Backend, theory: Theory, mode: Mode) -> Self {
        Self {
            backend,
            theory,
            mode,
            timeout: None,
            transcript: false,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if !self.backend.supports(self.theory) {
            return Err(SessionError::Config(format!(
                "backend {} does not pair with {}",
                self.backend,
                self.theory.logic_name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub wall: Duration,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PointValue {
    pub id: i64,
    pub time: i64,
    pub load: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TaskValue {
    pub start: i64,
    pub end: i64,
    pub agent: i64,
}

/// Concrete values of every action point and task triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelImage {
    pub points: Vec<Vec<PointValue>>,
    pub tasks: Vec<TaskValue>,
}

enum Entry {
    Sent(String),
    Received(String),
}

pub struct Session {
    config: SolverConfig,
    proc: Option<Process>,
    declarations: Vec<String>,
    persistent: Vec<String>,
    frames: Vec<Vec<String>>,
    last_verdict: Option<Verdict>,
    transcript: Option<Vec<Entry>>,
}

impl Session {
    pub fn open(config: SolverConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let mut session = Self {
            transcript: config.transcript.then(Vec::new),
            config,
            proc: None,
            declarations: Vec::new(),
            persistent: Vec::new(),
            frames: Vec::new(),
            last_verdict: None,
        };
        if session.config.mode == Mode::Incremental {
            session.ensure_process()?;
        } else if !session.config.backend.is_available() {
            // Fail early, as the incremental mode would.
            let argv = session.config.backend.argv();
            return Err(SessionError::Spawn {
                program: argv[0].clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "not found in PATH"),
            });
        }
        Ok(session)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn persistent_count(&self) -> usize {
        self.persistent.len()
    }

    pub fn assertion_count(&self) -> usize {
        self.persistent.len() + self.frames.iter().map(Vec::len).sum::<usize>()
    }

    fn preamble(&self) -> Vec<String> {
        vec![
            "(set-option :print-success true)".into(),
            "(set-option :produce-models true)".into(),
            format!("(set-logic {})", self.config.theory.logic_name()),
        ]
    }

    fn log(&mut self, e: Entry) {
        if let Some(t) = self.transcript.as_mut() {
            t.push(e);
        }
    }

    /// The exchange so far: commands verbatim, responses as comments.
    pub fn transcript(&self) -> Option<String> {
        self.transcript.as_ref().map(|entries| {
            let mut out = String::new();
            for e in entries {
                match e {
                    Entry::Sent(c) => out.push_str(c),
                    Entry::Received(r) => {
                        let lines: Vec<String> = r.lines().map(|l| format!("; {l}")).collect();
                        out.push_str(&lines.join("\n"));
                    }
                }
                out.push('\n');
            }
            out
        })
    }

    /// Send commands that each answer `success`, pipelined.
    fn run_silent(&mut self, commands: &[String]) -> Result<(), SessionError> {
        if commands.is_empty() {
            return Ok(());
        }
        let proc = self.proc.as_mut().expect("live process");
        let mut text = String::new();
        for c in commands {
            text.push_str(c);
            text.push('\n');
        }
        proc.send(text.trim_end())?;
        let mut replies = Vec::with_capacity(commands.len());
        let mut failure = None;
        for _ in commands {
            match proc.read(None)? {
                Reply::Text(r) if r.trim() == "success" => replies.push(r),
                Reply::Text(r) => {
                    failure.get_or_insert_with(|| r.clone());
                    replies.push(r);
                }
                Reply::TimedOut => unreachable!("no deadline"),
            }
        }
        if self.transcript.is_some() {
            for (c, r) in commands.iter().zip(replies) {
                self.log(Entry::Sent(c.clone()));
                if r.trim() != "success" {
                    self.log(Entry::Received(r));
                }
            }
        }
        match failure {
            Some(r) => Err(SessionError::Backend(r)),
            None => Ok(()),
        }
    }

    /// Spawn a process and replay the declarations and assertion stack.
    fn ensure_process(&mut self) -> Result<(), SessionError> {
        if self.proc.is_some() {
            return Ok(());
        }
        self.proc = Some(Process::spawn(&self.config.backend.argv())?);
        let mut script = self.preamble();
        script.extend(self.declarations.iter().cloned());
        script.extend(self.persistent.iter().map(|a| format!("(assert {a})")));
        for frame in &self.frames {
            script.push("(push 1)".into());
            script.extend(frame.iter().map(|a| format!("(assert {a})")));
        }
        let result = self.run_silent(&script);
        if result.is_err() {
            self.proc = None;
        }
        result
    }

    pub fn declare(&mut self, declarations: &[String]) -> Result<(), SessionError> {
        self.last_verdict = None;
        self.declarations.extend(declarations.iter().cloned());
        if self.config.mode == Mode::Incremental && self.proc.is_some() {
            self.run_silent(declarations)?;
        }
        Ok(())
    }

    /// Add formulas to the current frame.
    pub fn assert_formulas(&mut self, formulas: &[String]) -> Result<(), SessionError> {
        self.last_verdict = None;
        match self.frames.last_mut() {
            Some(frame) => frame.extend(formulas.iter().cloned()),
            None => self.persistent.extend(formulas.iter().cloned()),
        }
        if self.config.mode == Mode::Incremental && self.proc.is_some() {
            let commands: Vec<String> = formulas.iter().map(|a| format!("(assert {a})")).collect();
            self.run_silent(&commands)?;
        }
        Ok(())
    }

    /// Lower and assert a scope. Update scopes must sit inside a frame and
    /// all other groups outside one.
    pub fn assert_scope(&mut self, scope: &EncodingScope, widths: &BitWidths) -> Result<(), SessionError> {
        if scope.group.is_framed() != (self.depth() > 0) {
            return Err(SessionError::Protocol(format!(
                "{:?} scope asserted at depth {}",
                scope.group,
                self.depth()
            )));
        }
        let text = lower(&scope.formulas, self.config.theory, widths)?;
        self.assert_formulas(&text)
    }

    pub fn push(&mut self) -> Result<(), SessionError> {
        self.last_verdict = None;
        self.frames.push(Vec::new());
        if self.config.mode == Mode::Incremental && self.proc.is_some() {
            self.run_silent(&["(push 1)".into()])?;
        }
        Ok(())
    }

    pub fn pop(&mut self) -> Result<(), SessionError> {
        if self.frames.is_empty() {
            return Err(SessionError::DepthZero);
        }
        self.last_verdict = None;
        self.frames.pop();
        if self.config.mode == Mode::Incremental && self.proc.is_some() {
            self.run_silent(&["(pop 1)".into()])?;
        }
        Ok(())
    }

    pub fn check(&mut self, assumption: Option<Var>) -> Result<CheckOutcome, SessionError> {
        let started = Instant::now();
        let command = match self.config.mode {
            Mode::Incremental => {
                self.ensure_process()?;
                match assumption {
                    Some(v) => format!("(check-sat-assuming ({v}))"),
                    None => "(check-sat)".into(),
                }
            }
            Mode::NonIncremental => {
                self.proc = None;
                self.proc = Some(Process::spawn(&self.config.backend.argv())?);
                let mut script = self.preamble();
                script.extend(self.declarations.iter().cloned());
                script.extend(
                    self.persistent
                        .iter()
                        .chain(self.frames.iter().flatten())
                        .map(|a| format!("(assert {a})")),
                );
                if let Some(v) = assumption {
                    script.push(format!("(assert {v})"));
                }
                self.run_silent(&script)?;
                "(check-sat)".into()
            }
        };
        self.log(Entry::Sent(command.clone()));
        let deadline = self.config.timeout.map(|t| Instant::now() + t);
        let proc = self.proc.as_mut().expect("live process");
        proc.send(&command)?;
        let reply = proc.read(deadline)?;
        let wall = started.elapsed();
        let outcome = match reply {
            Reply::TimedOut => {
                // The process is abandoned; the next command respawns and
                // replays the mirror.
                if let Some(mut p) = self.proc.take() {
                    p.kill();
                }
                self.log(Entry::Received("timeout".into()));
                CheckOutcome {
                    verdict: Verdict::Unknown,
                    wall,
                    timed_out: true,
                }
            }
            Reply::Text(r) => {
                let verdict = match r.trim() {
                    "sat" => Verdict::Sat,
                    "unsat" => Verdict::Unsat,
                    "unknown" => Verdict::Unknown,
                    _ => return Err(SessionError::Backend(r)),
                };
                self.log(Entry::Received(r));
                CheckOutcome {
                    verdict,
                    wall,
                    timed_out: false,
                }
            }
        };
        self.last_verdict = Some(outcome.verdict);
        Ok(outcome)
    }

    /// Values of named constants in the current model.
    pub fn get_values(&mut self, names: &[String]) -> Result<HashMap<String, i64>, SessionError> {
        if self.last_verdict != Some(Verdict::Sat) || self.proc.is_none() {
            return Err(SessionError::NoModel);
        }
        if names.is_empty() {
            return Ok(HashMap::new());
        }
        let command = format!("(get-value ({}))", names.join(" "));
        self.log(Entry::Sent(command.clone()));
        let proc = self.proc.as_mut().expect("live process");
        proc.send(&command)?;
        let reply = match proc.read(None)? {
            Reply::Text(r) => r,
            Reply::TimedOut => unreachable!("no deadline"),
        };
        self.log(Entry::Received(reply.clone()));
        let parsed = sexp::parse_all(&reply).map_err(SessionError::Protocol)?;
        let pairs = match parsed.as_slice() {
            [Sexp::List(pairs)] => pairs,
            _ => return Err(SessionError::Backend(reply)),
        };
        let mut out = HashMap::new();
        for pair in pairs {
            let Sexp::List(kv) = pair else {
                return Err(SessionError::Protocol(format!("bad model entry {pair}")));
            };
            match kv.as_slice() {
                [Sexp::Atom(name), v] => {
                    let value = sexp::value(v)
                        .ok_or_else(|| SessionError::Protocol(format!("unreadable value {v} for {name}")))?;
                    out.insert(name.clone(), value);
                }
                _ => return Err(SessionError::Protocol(format!("bad model entry {pair}"))),
            }
        }
        Ok(out)
    }

    pub fn get_model(&mut self, layout: &LiteralLayout) -> Result<ModelImage, SessionError> {
        let vars: Vec<Var> = layout
            .variables()
            .into_iter()
            .filter(|v| !matches!(v, Var::Gamma(_)))
            .collect();
        let names: Vec<String> = vars.iter().map(Var::to_string).collect();
        let values = self.get_values(&names)?;
        let get = |v: Var| {
            values
                .get(&v.to_string())
                .copied()
                .ok_or_else(|| SessionError::Protocol(format!("model lacks {v}")))
        };
        let mut points = Vec::with_capacity(layout.n_agents);
        for n in 0..layout.n_agents {
            let mut row = Vec::with_capacity(layout.points);
            for d in 0..layout.points {
                row.push(PointValue {
                    id: get(Var::Id(n, d))?,
                    time: get(Var::Time(n, d))?,
                    load: get(Var::Load(n, d))?,
                });
            }
            points.push(row);
        }
        let mut tasks = Vec::with_capacity(layout.m_max);
        for m in 0..layout.m_max {
            tasks.push(TaskValue {
                start: get(Var::TaskStart(m))?,
                end: get(Var::TaskEnd(m))?,
                agent: get(Var::TaskAgent(m))?,
            });
        }
        Ok(ModelImage { points, tasks })
    }
}
