use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{parse_reply, write_request, Reply};
use super::{EpochRecord, Trainer, TrainerOutput, TrainingLog, TrialError, TrialRequest};

pub const DEFAULT_TRIAL_TIMEOUT: Duration = Duration::from_secs(3600);

/// Runs each trial in a fresh child process speaking the
/// [`protocol`](super::protocol).
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTrainer {
    program: String,
    args: Vec<String>,
    timeout: Duration,
}

impl ProcessTrainer {
    pub fn new(program: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { program: program.into(), args: args.into_iter().map(Into::into).collect(), timeout: DEFAULT_TRIAL_TIMEOUT }
    }

    /// Splits `command` on whitespace: the first word is the program.
    pub fn from_command_line(command: &str) -> Option<Self> {
        let mut words = command.split_whitespace();
        let program = words.next()?;
        Some(Self::new(program, words))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn command_line(&self) -> String {
        std::iter::once(self.program.as_str()).chain(self.args.iter().map(String::as_str)).collect::<Vec<_>>().join(" ")
    }
}

fn stop(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

impl Trainer for ProcessTrainer {
    fn train(&self, request: &TrialRequest) -> Result<TrainerOutput, TrialError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| TrialError::Launch { command: self.command_line(), source })?;
        let deadline = Instant::now() + self.timeout;

        // A trainer that exits before reading surfaces below as a missing
        // terminal record, so a failed write is not an error by itself.
        if let Some(mut stdin) = child.stdin.take() {
            let _ = write_request(&mut stdin, request);
        }

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut epochs: Vec<EpochRecord> = Vec::new();
        let mut terminal: Option<Option<f64>> = None;
        let partial = |epochs: &Vec<EpochRecord>| TrainingLog { budget: request.epoch_budget, epochs: epochs.clone() };
        loop {
            let wait = deadline.saturating_duration_since(Instant::now());
            let line = match rx.recv_timeout(wait) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => {
                    stop(&mut child);
                    return Err(TrialError::Protocol {
                        message: format!("unreadable trainer output: {e}"),
                        partial: partial(&epochs),
                    });
                }
                Err(RecvTimeoutError::Timeout) => {
                    stop(&mut child);
                    return Err(TrialError::Timeout { after: self.timeout, partial: partial(&epochs) });
                }
                Err(RecvTimeoutError::Disconnected) => break,
            };
            if line.trim().is_empty() {
                continue;
            }
            let violation = match (parse_reply(&line), terminal) {
                (Err(e), _) => Some(e),
                (Ok(_), Some(_)) => Some("record after the terminal record".to_string()),
                (Ok(Reply::Terminal(p)), None) => {
                    terminal = Some(p);
                    None
                }
                (Ok(Reply::Epoch(e)), None) => {
                    let expected = epochs.len() as u32 + 1;
                    if e.epoch != expected {
                        Some(format!("expected epoch {expected}, got {}", e.epoch))
                    } else {
                        epochs.push(e);
                        None
                    }
                }
            };
            if let Some(message) = violation {
                stop(&mut child);
                return Err(TrialError::Protocol { message, partial: partial(&epochs) });
            }
        }

        let Some(final_performance) = terminal else {
            stop(&mut child);
            return Err(TrialError::Protocol {
                message: format!(
                    "trainer closed its output after {} of {} epochs without a terminal record",
                    epochs.len(),
                    request.epoch_budget
                ),
                partial: partial(&epochs),
            });
        };
        match child.wait() {
            Ok(status) if status.success() => Ok(TrainerOutput { epochs, final_performance }),
            Ok(status) => Err(TrialError::Exit { status: status.to_string(), partial: partial(&epochs) }),
            Err(e) => Err(TrialError::Exit { status: e.to_string(), partial: partial(&epochs) }),
        }
    }
}
