//! Delimited text formats: ground-truth manifests, embedding tables and DET
//! exports. All files carry a header row.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use stepsearch_core::curriculum::{ConditionTag, Footwear, Speed};
use thiserror::Error;

use crate::embedding::{Embedding, ScoringError, Side, SubjectId};
use crate::metrics::DetPoint;
use crate::scores::{Label, MetricError, ProbeId, ScoreRecord, ScoreSet};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Field { line: u64, message: String },
    #[error("manifest has {manifest} probes but {scores} scores were given")]
    Count { manifest: usize, scores: usize },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One probe claim of the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub probe_id: ProbeId,
    pub claimed_id: SubjectId,
    pub true_id: Option<SubjectId>,
    pub label: Label,
    pub condition: ConditionTag,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawManifest {
    probe_id: String,
    claimed_id: String,
    #[serde(default)]
    true_id: String,
    label: String,
    footwear: String,
    speed: String,
}

fn field_error(rec: &csv::StringRecord, message: impl ToString) -> DataError {
    DataError::Field { line: rec.position().map_or(0, |p| p.line()), message: message.to_string() }
}

fn condition(rec: &csv::StringRecord, footwear: &str, speed: &str) -> Result<ConditionTag, DataError> {
    let fw: Footwear = footwear.parse().map_err(|e| field_error(rec, e))?;
    let sp: Speed = speed.parse().map_err(|e| field_error(rec, e))?;
    Ok(ConditionTag::new(fw, sp))
}

pub fn read_manifest(r: impl Read) -> Result<Vec<ManifestRecord>, DataError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let raw: RawManifest = rec.deserialize(Some(&headers))?;
        out.push(ManifestRecord {
            probe_id: ProbeId(raw.probe_id),
            claimed_id: SubjectId(raw.claimed_id),
            true_id: (!raw.true_id.is_empty()).then_some(SubjectId(raw.true_id)),
            label: raw.label.parse().map_err(|e| field_error(&rec, e))?,
            condition: condition(&rec, &raw.footwear, &raw.speed)?,
        });
    }
    Ok(out)
}

pub fn write_manifest(w: impl Write, records: &[ManifestRecord]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(RawManifest {
            probe_id: r.probe_id.0.clone(),
            claimed_id: r.claimed_id.0.clone(),
            true_id: r.true_id.as_ref().map_or_else(String::new, |t| t.0.clone()),
            label: match r.label {
                Label::Genuine => "genuine".into(),
                Label::Impostor => "impostor".into(),
            },
            footwear: r.condition.footwear.to_string(),
            speed: r.condition.speed.to_string(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Pairs submission scores, given in manifest order, with the ground truth.
pub fn score_set(manifest: &[ManifestRecord], scores: &[f64]) -> Result<ScoreSet, DataError> {
    if manifest.len() != scores.len() {
        return Err(DataError::Count { manifest: manifest.len(), scores: scores.len() });
    }
    let records = manifest
        .iter()
        .zip(scores)
        .map(|(m, &score)| ScoreRecord {
            probe_id: m.probe_id.clone(),
            claimed_id: m.claimed_id.clone(),
            score,
            label: m.label,
            condition: m.condition,
            true_id: m.true_id.clone(),
        })
        .collect();
    Ok(ScoreSet::new(records)?)
}

const EMBEDDING_COLUMNS: [&str; 4] = ["id", "side", "footwear", "speed"];

/// Reads `id, side, footwear, speed, v0 .. vD-1` rows.
pub fn read_embeddings(r: impl Read) -> Result<Vec<Embedding>, DataError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let leading: Vec<&str> = headers.iter().take(4).collect();
    if leading != EMBEDDING_COLUMNS || headers.len() < 5 {
        return Err(DataError::Field {
            line: 1,
            message: format!("header must start with {} and have value columns", EMBEDDING_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let side: Side = rec[1].parse().map_err(|e| field_error(&rec, e))?;
        let cond = condition(&rec, &rec[2], &rec[3])?;
        let vector = rec
            .iter()
            .skip(4)
            .map(|v| v.parse::<f64>().map_err(|_| field_error(&rec, format!("{v:?} is not a number"))))
            .collect::<Result<Vec<f64>, _>>()?;
        out.push(Embedding::new(SubjectId(rec[0].to_string()), side, cond, vector).map_err(|e| field_error(&rec, e))?);
    }
    Ok(out)
}

pub fn write_embeddings(w: impl Write, embeddings: &[Embedding]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(w);
    let dim = embeddings.first().map_or(0, Embedding::dim);
    let mut header: Vec<String> = EMBEDDING_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|k| format!("v{k}")));
    wtr.write_record(&header)?;
    for e in embeddings {
        let mut row = vec![e.id.0.clone(), e.side.to_string(), e.condition.footwear.to_string(), e.condition.speed.to_string()];
        row.extend(e.vector().iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `threshold, fmr, fnmr` rows for external plotting.
pub fn write_det(w: impl Write, points: &[DetPoint]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in points {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Formats scores one per line with a final newline, the submission layout.
pub fn format_scores(scores: &[f64]) -> String {
    let mut s = String::with_capacity(scores.len() * 20);
    for v in scores {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let text = "probe_id,claimed_id,true_id,label,footwear,speed\n\
                    p1,s1,s1,genuine,BF,W1\n\
                    p2,s1,,impostor,P2,W4\n";
        let m = read_manifest(text.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[1].true_id, None);
        assert_eq!(m[1].condition.to_string(), "P2-W4");
        let mut buf = Vec::new();
        write_manifest(&mut buf, &m).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn bad_label_names_its_line() {
        let text = "probe_id,claimed_id,true_id,label,footwear,speed\np1,s1,s1,genuine,BF,W1\np2,s1,,maybe,BF,W1\n";
        let e = read_manifest(text.as_bytes()).unwrap_err();
        assert!(matches!(e, DataError::Field { line: 3, .. }), "{e}");
    }

    #[test]
    fn embeddings_round_trip() {
        let text = "id,side,footwear,speed,v0,v1\na,left,ST,W2,0.5,-1\nb,right,P1,W3,1,0\n";
        let e = read_embeddings(text.as_bytes()).unwrap();
        assert_eq!(e[0].vector(), &[0.5, -1.0]);
        assert_eq!(e[1].side, Side::Right);
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &e).unwrap();
        assert_eq!(read_embeddings(buf.as_slice()).unwrap(), e);
    }

    #[test]
    fn zero_embedding_is_rejected_with_line() {
        let text = "id,side,footwear,speed,v0\na,left,ST,W2,0\n";
        assert!(matches!(read_embeddings(text.as_bytes()), Err(DataError::Field { line: 2, .. })));
    }

    #[test]
    fn det_export_has_header_and_rows() {
        let mut buf = Vec::new();
        write_det(&mut buf, &[DetPoint { threshold: 0.5, fmr: 10.0, fnmr: 2.5 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "threshold,fmr,fnmr\n0.5,10.0,2.5\n");
    }
}
