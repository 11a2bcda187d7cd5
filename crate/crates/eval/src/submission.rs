//! Submission files: newline-separated scores in probe order plus a
//! single-value threshold file.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probe count of a full submission.
pub const SUBMISSION_SCORES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmissionFile {
    Scores,
    Threshold,
}

impl fmt::Display for SubmissionFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubmissionFile::Scores => "scores file",
            SubmissionFile::Threshold => "threshold file",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubmissionError {
    #[error("{file} is empty")]
    Empty { file: SubmissionFile },
    #[error("{file}: expected {expected}, found {found} values")]
    Count { file: SubmissionFile, expected: usize, found: usize },
    #[error("{file} line {line}: {token:?} is not a finite number")]
    NotNumeric { file: SubmissionFile, line: usize, token: String },
    #[error("{file} line {line}: score {value} is outside [0, 1]")]
    OutOfRange { file: SubmissionFile, line: usize, value: f64 },
    #[error("{file} line {line}: not valid UTF-8")]
    Encoding { file: SubmissionFile, line: usize },
}

impl SubmissionError {
    /// 1-based line the error points at, if it concerns one line.
    pub fn line(&self) -> Option<usize> {
        match self {
            SubmissionError::NotNumeric { line, .. }
            | SubmissionError::OutOfRange { line, .. }
            | SubmissionError::Encoding { line, .. } => Some(*line),
            SubmissionError::Empty { .. } | SubmissionError::Count { .. } => None,
        }
    }

    pub fn file(&self) -> SubmissionFile {
        match self {
            SubmissionError::Empty { file }
            | SubmissionError::Count { file, .. }
            | SubmissionError::NotNumeric { file, .. }
            | SubmissionError::OutOfRange { file, .. }
            | SubmissionError::Encoding { file, .. } => *file,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub scores: Vec<f64>,
    pub threshold: f64,
}

/// Splits on `\n`, tolerating one trailing newline. Lines are not trimmed.
fn lines(bytes: &[u8], file: SubmissionFile) -> Result<Vec<&str>, SubmissionError> {
    if bytes.is_empty() {
        return Err(SubmissionError::Empty { file });
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(k, l)| std::str::from_utf8(l).map_err(|_| SubmissionError::Encoding { file, line: k + 1 }))
        .collect()
}

fn number(token: &str, file: SubmissionFile, line: usize) -> Result<f64, SubmissionError> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(SubmissionError::NotNumeric { file, line, token: token.to_string() }),
    }
}

/// Parses and validates a submission with `expected` scores. Every line is
/// checked for syntax and range before the count, so a malformed line is
/// reported by position even when the count is also wrong.
pub fn parse_submission(scores: &[u8], threshold: &[u8], expected: usize) -> Result<Submission, SubmissionError> {
    let file = SubmissionFile::Scores;
    let mut values = Vec::with_capacity(expected);
    for (k, l) in lines(scores, file)?.into_iter().enumerate() {
        let v = number(l, file, k + 1)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(SubmissionError::OutOfRange { file, line: k + 1, value: v });
        }
        values.push(v);
    }
    if values.len() != expected {
        return Err(SubmissionError::Count { file, expected, found: values.len() });
    }

    let file = SubmissionFile::Threshold;
    let t = lines(threshold, file)?;
    if t.len() != 1 {
        return Err(SubmissionError::Count { file, expected: 1, found: t.len() });
    }
    Ok(Submission { scores: values, threshold: number(t[0], file, 1)? })
}
