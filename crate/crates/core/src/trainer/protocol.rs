//! Line-delimited JSON trainer protocol.
//!
//! The engine writes one [`TrialRequest`] object on a single line to the
//! trainer's stdin and closes it. The trainer answers on stdout with one
//! object per epoch,
//!
//! ```json
//! {"epoch": 1, "train_loss": 0.93, "batch_loss_variance": 0.04, "val_metric": 0.51}
//! ```
//!
//! with epochs numbered 1, 2, 3, ... and `val_metric` optional, followed by
//! exactly one terminal object `{"final_performance": 0.87}` (or `null`).
//! A trainer that stops early still sends the terminal object; a missing
//! terminal object, an out-of-order epoch, or any unparseable line is a
//! protocol violation.

use std::io::{self, BufRead, Write};

use serde_json::{Map, Value};

use super::{EpochRecord, Trainer, TrialError, TrialRequest};

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Epoch(EpochRecord),
    Terminal(Option<f64>),
}

/// Parses one trainer output line.
pub fn parse_reply(line: &str) -> Result<Reply, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("malformed record {line:?}: {e}"))?;
    let Value::Object(obj) = value else {
        return Err(format!("record is not an object: {line:?}"));
    };
    if obj.contains_key("final_performance") {
        return terminal(&obj).ok_or_else(|| format!("malformed terminal record {line:?}"));
    }
    serde_json::from_value::<EpochRecord>(Value::Object(obj))
        .map(Reply::Epoch)
        .map_err(|e| format!("malformed epoch record {line:?}: {e}"))
}

fn terminal(obj: &Map<String, Value>) -> Option<Reply> {
    if obj.len() != 1 {
        return None;
    }
    match &obj["final_performance"] {
        Value::Null => Some(Reply::Terminal(None)),
        Value::Number(n) => n.as_f64().map(|p| Reply::Terminal(Some(p))),
        _ => None,
    }
}

pub fn write_request(w: &mut impl Write, request: &TrialRequest) -> io::Result<()> {
    serde_json::to_writer(&mut *w, request)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Reads the single request line a trainer receives.
pub fn read_request(r: &mut impl BufRead) -> io::Result<TrialRequest> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "no trial request on input"));
    }
    serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn write_epoch(w: &mut impl Write, record: &EpochRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    w.write_all(b"\n")?;
    w.flush()
}

pub fn write_terminal(w: &mut impl Write, final_performance: Option<f64>) -> io::Result<()> {
    serde_json::to_writer(&mut *w, &serde_json::json!({ "final_performance": final_performance }))?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Trainer side of the protocol: reads one request, runs `trainer`, and
/// writes the replies. Errors from `trainer` are returned without a terminal
/// record, which the engine reports as a protocol violation.
pub fn serve(input: &mut impl BufRead, output: &mut impl Write, trainer: &dyn Trainer) -> Result<(), ServeError> {
    let request = read_request(input)?;
    let out = trainer.train(&request)?;
    for e in &out.epochs {
        write_epoch(output, e)?;
    }
    write_terminal(output, out.final_performance)?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Trial(#[from] TrialError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replies_parse() {
        let e = parse_reply(r#"{"epoch":2,"train_loss":0.5,"batch_loss_variance":0.1}"#).unwrap();
        assert_eq!(
            e,
            Reply::Epoch(EpochRecord { epoch: 2, train_loss: 0.5, batch_loss_variance: 0.1, val_metric: None })
        );
        assert_eq!(parse_reply(r#"{"final_performance":null}"#).unwrap(), Reply::Terminal(None));
        assert_eq!(parse_reply(r#"{"final_performance":0.25}"#).unwrap(), Reply::Terminal(Some(0.25)));
        assert!(parse_reply(r#"{"final_performance":"high"}"#).is_err());
        assert!(parse_reply(r#"{"epoch":1}"#).is_err());
        assert!(parse_reply("epoch 1 loss 0.3").is_err());
        assert!(parse_reply("[1,2]").is_err());
    }

    #[test]
    fn written_records_parse_back() {
        let rec = EpochRecord { epoch: 3, train_loss: 0.125, batch_loss_variance: 1e-3, val_metric: Some(0.875) };
        let mut buf = Vec::new();
        write_epoch(&mut buf, &rec).unwrap();
        write_terminal(&mut buf, Some(0.9)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(parse_reply(lines.next().unwrap()).unwrap(), Reply::Epoch(rec));
        assert_eq!(parse_reply(lines.next().unwrap()).unwrap(), Reply::Terminal(Some(0.9)));
    }
}
