//! Objective served by a child process over a line protocol.
//!
//! Request, one line per evaluation on the child's stdin:
//!
//! ```text
//! <level> <x1> ... <xD>
//! ```
//!
//! Coordinates are mapped from the unit cube to the configured bounds and
//! written with 17 significant digits. The child answers with one line on
//! stdout holding either a floating-point value or `error <message>`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use crate::error::{invalid, Error, Result};
use crate::objective::{Objective, Truth};

struct Pipes {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct ExternalObjective {
    dim: usize,
    n_levels: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pipes: Mutex<Pipes>,
}

/// Parses one response line.
pub fn parse_response(line: &str, level: usize) -> Result<f64> {
    let line = line.trim();
    if let Some(msg) = line.strip_prefix("error") {
        return Err(Error::Evaluation { level, message: msg.trim().to_string() });
    }
    line.parse::<f64>()
        .map_err(|_| Error::Evaluation { level, message: format!("malformed response {line:?}") })
}

/// Formats one request line (including the newline).
pub fn format_request(level: usize, x: &[f64]) -> String {
    let mut s = level.to_string();
    for v in x {
        s.push_str(&format!(" {v:.16e}"));
    }
    s.push('\n');
    s
}

impl ExternalObjective {
    /// Spawns `program args...`; bounds default to the unit cube.
    pub fn spawn(
        program: &str,
        args: &[String],
        dim: usize,
        n_levels: usize,
        bounds: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        if dim == 0 || n_levels == 0 {
            return invalid("external objective needs a positive dimension and level count");
        }
        let (lower, upper) = bounds.unwrap_or_else(|| (vec![0.0; dim], vec![1.0; dim]));
        if lower.len() != dim || upper.len() != dim || lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return invalid("external bounds must match the dimension with lower < upper");
        }
        let mut child = Command::new(program).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self { dim, n_levels, lower, upper, pipes: Mutex::new(Pipes { child, stdin, stdout }) })
    }

    fn request(&self, pipes: &mut Pipes, level: usize, x: &[f64]) -> Result<f64> {
        let phys: Vec<f64> = x.iter().zip(self.lower.iter().zip(&self.upper)).map(|(u, (l, h))| l + u * (h - l)).collect();
        let io_err = |e: std::io::Error| Error::Evaluation { level, message: e.to_string() };
        pipes.stdin.write_all(format_request(level, &phys).as_bytes()).map_err(io_err)?;
        pipes.stdin.flush().map_err(io_err)?;
        let mut line = String::new();
        if pipes.stdout.read_line(&mut line).map_err(io_err)? == 0 {
            return Err(Error::Evaluation { level, message: "evaluator closed its output".into() });
        }
        parse_response(&line, level)
    }
}

impl Objective for ExternalObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_levels(&self) -> usize {
        self.n_levels
    }

    fn evaluate(&self, level: usize, x: &[f64], _eval_index: u64) -> Result<f64> {
        if level < 1 || level > self.n_levels || x.len() != self.dim {
            return invalid(format!("bad request: level {level}, {} coordinates", x.len()));
        }
        let mut pipes = self.pipes.lock().expect("evaluator lock");
        self.request(&mut pipes, level, x)
    }
}

/// A fresh highest-fidelity evaluation.
impl Truth for ExternalObjective {
    fn truth(&self, x: &[f64]) -> Result<f64> {
        let mut pipes = self.pipes.lock().expect("evaluator lock");
        self.request(&mut pipes, 1, x)
    }
}

impl Drop for ExternalObjective {
    fn drop(&mut self) {
        if let Ok(p) = self.pipes.get_mut() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}
