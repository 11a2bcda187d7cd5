//! Append-only run records.
//!
//! Every strategy reports progress through a [`SearchObserver`]: one event
//! per trial or episode, and a checkpoint of its resumable state after each
//! step. [`RunRecorder`] persists events as JSON lines and checkpoints as a
//! single JSON document replaced atomically.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait SearchObserver<E, S> {
    fn event(&mut self, event: &E) -> io::Result<()>;
    fn checkpoint(&mut self, state: &S) -> io::Result<()>;
}

/// Discards everything.
pub struct NoopObserver;

impl<E, S> SearchObserver<E, S> for NoopObserver {
    fn event(&mut self, _: &E) -> io::Result<()> {
        Ok(())
    }

    fn checkpoint(&mut self, _: &S) -> io::Result<()> {
        Ok(())
    }
}

/// Writes one JSON document per line, flushing after each.
pub struct HistoryWriter {
    file: File,
}

impl HistoryWriter {
    /// Opens `path` for appending, creating it if needed.
    pub fn append(path: &Path) -> io::Result<Self> {
        Ok(Self { file: OpenOptions::new().create(true).append(true).open(path)? })
    }

    /// Truncates or creates `path`.
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self { file: File::create(path)? })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()
    }
}

/// Reads a JSON-lines file. A final line without a newline is a torn write
/// and is skipped; any other unparseable line is an error.
pub fn read_history<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        number += 1;
        if !line.ends_with('\n') {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("{}:{number}: {e}", path.display()))
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Writes `value` as pretty JSON through a temporary file and a rename.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> io::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

/// Persists events to `history.jsonl` and checkpoints to `state.json`.
pub struct RunRecorder {
    history: HistoryWriter,
    state_path: PathBuf,
}

impl RunRecorder {
    pub fn new(history: HistoryWriter, state_path: PathBuf) -> Self {
        Self { history, state_path }
    }
}

impl<E: Serialize, S: Serialize> SearchObserver<E, S> for RunRecorder {
    fn event(&mut self, event: &E) -> io::Result<()> {
        self.history.write(event)
    }

    fn checkpoint(&mut self, state: &S) -> io::Result<()> {
        write_json_atomic(&self.state_path, state)
    }
}

/// Keeps everything in memory; handy for tests.
#[derive(Debug)]
pub struct MemoryObserver<E, S> {
    pub events: Vec<E>,
    pub checkpoints: Vec<S>,
}

impl<E, S> Default for MemoryObserver<E, S> {
    fn default() -> Self {
        Self { events: Vec::new(), checkpoints: Vec::new() }
    }
}

impl<E: Clone, S: Clone> SearchObserver<E, S> for MemoryObserver<E, S> {
    fn event(&mut self, event: &E) -> io::Result<()> {
        self.events.push(event.clone());
        Ok(())
    }

    fn checkpoint(&mut self, state: &S) -> io::Result<()> {
        self.checkpoints.push(state.clone());
        Ok(())
    }
}
