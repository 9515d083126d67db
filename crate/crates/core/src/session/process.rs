// SPDX-License-Identifier: Apache-2.0

//! Child solver process with line-oriented, deadline-bounded reads.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use super::sexp;
use super::SessionError;

pub(crate) struct Process {
    program: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
}

pub(crate) enum Reply {
    Text(String),
    TimedOut,
}

impl Process {
    pub(crate) fn spawn(argv: &[String]) -> Result<Self, SessionError> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| SessionError::Config("empty solver command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| SessionError::Spawn {
                program: program.clone(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut stderr_pipe = child.stderr.take().expect("piped stderr");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr_pipe.read_to_string(&mut buf);
            sink.lock().unwrap().push_str(&buf);
        });
        Ok(Self {
            program: program.clone(),
            child,
            stdin,
            lines,
            stderr,
        })
    }

    pub(crate) fn send(&mut self, text: &str) -> Result<(), SessionError> {
        let result = self
            .stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.write_all(b"\n"))
            .and_then(|_| self.stdin.flush());
        result.map_err(|e| self.crashed(&format!("write failed: {e}")))
    }

    /// Read one complete response, or give up at `deadline`.
    pub(crate) fn read(&mut self, deadline: Option<Instant>) -> Result<Reply, SessionError> {
        let mut text = String::new();
        loop {
            let line = match deadline {
                None => self.lines.recv().map_err(|_| RecvTimeoutError::Disconnected),
                Some(at) => self.lines.recv_timeout(at.saturating_duration_since(Instant::now())),
            };
            match line {
                Ok(line) => {
                    if text.is_empty() && line.trim().is_empty() {
                        continue;
                    }
                    if !text.is_empty() {
                        text.push('\n');
                    }
                    text.push_str(&line);
                    if sexp::depth(&text) <= 0 {
                        return Ok(Reply::Text(text));
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Ok(Reply::TimedOut),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(self.crashed(&format!("solver exited; partial output: {text}")))
                }
            }
        }
    }

    fn crashed(&mut self, what: &str) -> SessionError {
        let _ = self.child.wait();
        // Give the stderr collector a moment to finish.
        thread::sleep(std::time::Duration::from_millis(20));
        let stderr = self.stderr.lock().unwrap().clone();
        SessionError::Crashed {
            program: self.program.clone(),
            output: format!("{what}; stderr: {}", stderr.trim()),
        }
    }

    pub(crate) fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.stdin.write_all(b"(exit)\n");
        let _ = self.stdin.flush();
        self.kill();
    }
}
