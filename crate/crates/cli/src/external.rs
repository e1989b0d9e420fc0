//! Fitness from an external command.
//!
//! Each evaluation starts the command, writes one JSON line
//! `{"names": [...], "x": [...]}` to its standard input and reads
//! `{"fitness": <number>}` from the last non-empty line of its standard
//! output.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use optkit::{FitnessError, Value};
use wait_timeout::ChildExt;

#[derive(Clone, Debug)]
pub struct ExternalEvaluator {
    pub command: Vec<String>,
    pub names: Vec<String>,
    pub timeout: Option<Duration>,
    pub retries: u32,
    /// Fitness recorded when the child fails or times out; `None` aborts.
    pub sentinel: Option<f64>,
}

enum CallError {
    /// Worth retrying: timeout, nonzero exit, spawn failure.
    Failed(FitnessError),
    /// The child ran but answered with something unreadable.
    Malformed(String),
}

fn read_all<R: Read + Send + 'static>(mut r: R) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

impl ExternalEvaluator {
    pub fn request_line(&self, x: &[Value]) -> String {
        serde_json::json!({"names": self.names, "x": x}).to_string()
    }

    fn call_once(&self, line: &str) -> Result<f64, CallError> {
        let (program, args) = self.command.split_first().expect("validated non-empty command");
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| CallError::Failed(FitnessError::Evaluator(format!("cannot start `{program}`: {e}"))))?;
        let out = read_all(child.stdout.take().expect("piped"));
        let err = read_all(child.stderr.take().expect("piped"));
        if let Some(mut stdin) = child.stdin.take() {
            // A child that exits without reading is reported through its status.
            let _ = stdin.write_all(line.as_bytes()).and_then(|_| stdin.write_all(b"\n"));
        }
        let status = match self.timeout {
            Some(t) => match child.wait_timeout(t) {
                Ok(Some(s)) => s,
                Ok(None) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(CallError::Failed(FitnessError::Timeout(t.as_secs_f64())));
                }
                Err(e) => return Err(CallError::Failed(FitnessError::Evaluator(e.to_string()))),
            },
            None => child
                .wait()
                .map_err(|e| CallError::Failed(FitnessError::Evaluator(e.to_string())))?,
        };
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();
        if !status.success() {
            return Err(CallError::Failed(FitnessError::Evaluator(format!(
                "`{program}` exited with {status}; stderr: {}",
                stderr.trim()
            ))));
        }
        let last = stdout.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
        let parsed: Option<f64> = serde_json::from_str::<serde_json::Value>(last)
            .ok()
            .and_then(|v| v.get("fitness").and_then(|f| f.as_f64()));
        parsed.ok_or_else(|| {
            CallError::Malformed(format!(
                "`{program}` answered {last:?}, expected {{\"fitness\": <number>}}; stderr: {}",
                stderr.trim()
            ))
        })
    }
}

impl optkit::Fitness for ExternalEvaluator {
    fn evaluate(&self, x: &[Value]) -> Result<f64, FitnessError> {
        let line = self.request_line(x);
        let mut last = None;
        for attempt in 0..=self.retries {
            match self.call_once(&line) {
                Ok(y) => return Ok(y),
                Err(CallError::Malformed(m)) => {
                    log::error!("external evaluation failed for candidate {line}");
                    return Err(FitnessError::Evaluator(format!("{m}; candidate {line}")));
                }
                Err(CallError::Failed(e)) => {
                    log::warn!("external evaluation attempt {} failed: {e}", attempt + 1);
                    last = Some(e);
                }
            }
        }
        match self.sentinel {
            Some(s) => Ok(s),
            None => {
                let e = last.expect("at least one attempt");
                log::error!("external evaluation failed for candidate {line}");
                let detail = match e {
                    FitnessError::Evaluator(m) => m,
                    other => other.to_string(),
                };
                Err(FitnessError::Evaluator(format!("{detail}; candidate {line}")))
            }
        }
    }
}
