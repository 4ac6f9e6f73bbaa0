use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::Mutex;

use ndarray::ArrayView2;

use super::{check_width, Predictor};
use crate::error::{Error, Result};

/// A model scored by a child process.
///
/// Protocol, per batch: the child receives `"N p"` on the first line of
/// stdin followed by `N` lines of `p` space-separated numbers, and must
/// print exactly `N` lines with one number each before exiting with status 0.
/// Calls are serialized so the facade can be shared between threads.
#[derive(Debug)]
pub struct ExternalModel {
    argv: Vec<String>,
    p: usize,
    batch_size: usize,
    channel: Mutex<()>,
}

impl ExternalModel {
    pub fn new(argv: Vec<String>, p: usize) -> Result<Self> {
        if argv.is_empty() {
            return Err(Error::InvalidArgument("empty external command".into()));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("model arity must be positive".into()));
        }
        Ok(ExternalModel {
            argv,
            p,
            batch_size: 100_000,
            channel: Mutex::new(()),
        })
    }

    /// Splits a command line on whitespace.
    pub fn from_command_line(cmd: &str, p: usize) -> Result<Self> {
        Self::new(cmd.split_whitespace().map(str::to_string).collect(), p)
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn command_line(&self) -> String {
        self.argv.join(" ")
    }

    fn score_batch(&self, x: ArrayView2<'_, f64>, row_offset: usize) -> Result<Vec<f64>> {
        let n = x.nrows();
        let mut payload = format!("{} {}\n", n, self.p);
        for row in x.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    payload.push(' ');
                }
                first = false;
                payload.push_str(&v.to_string());
            }
            payload.push('\n');
        }

        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| Error::Spawn {
                command: self.command_line(),
                source,
            })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        // Feed stdin from a separate thread so a child that writes before
        // draining its input cannot deadlock us.
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(payload.as_bytes());
        });
        let output = child.wait_with_output().map_err(|source| Error::Spawn {
            command: self.command_line(),
            source,
        })?;
        let _ = writer.join();
        if !output.status.success() {
            return Err(Error::Protocol(format!(
                "'{}' exited with {}: {}",
                self.command_line(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let out = String::from_utf8(output.stdout)
            .map_err(|_| Error::Protocol("child output is not UTF-8".into()))?;

        let mut lines: Vec<&str> = out.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        if lines.len() != n {
            return Err(Error::Protocol(format!(
                "expected {n} output lines, got {}",
                lines.len()
            )));
        }
        lines
            .iter()
            .enumerate()
            .map(|(i, line)| {
                let v: f64 = line.trim().parse().map_err(|_| {
                    Error::Protocol(format!(
                        "row {}: cannot parse '{}'",
                        row_offset + i,
                        line.trim()
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: row_offset + i,
                        what: format!("external model returned '{}'", line.trim()),
                    });
                }
                Ok(v)
            })
            .collect()
    }
}

impl Predictor for ExternalModel {
    fn arity(&self) -> usize {
        self.p
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_width(self.p, &x)?;
        let _guard = self.channel.lock().unwrap_or_else(|e| e.into_inner());
        let mut out = Vec::with_capacity(x.nrows());
        let mut start = 0;
        while start < x.nrows() {
            let end = (start + self.batch_size).min(x.nrows());
            let batch = x.slice(ndarray::s![start..end, ..]);
            out.extend(self.score_batch(batch, start)?);
            start = end;
        }
        Ok(out)
    }
}
