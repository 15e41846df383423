//! Small CSV files: ground-truth labels, scored sets, and id/caption sidecars.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRecord {
    pub id: String,
    pub label: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelFile {
    pub records: Vec<LabelRecord>,
}

impl LabelFile {
    pub fn as_map(&self) -> HashMap<&str, bool> {
        self.records
            .iter()
            .map(|r| (r.id.as_str(), r.label))
            .collect()
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Read a headed CSV whose header must equal `header` exactly. Yields
/// `(line_number, record)` pairs.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, 1, format!("{other:?}")),
        })?;
    let got = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if got.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, got {:?}", header.join(","), got),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, got {}", header.len(), rec.len()),
            ));
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

fn parse_label(path: &Path, line: usize, s: &str) -> Result<bool> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_err(
            path,
            line,
            format!("label must be 0 or 1, got {other:?}"),
        )),
    }
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelFile> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, rec) in read_csv(path, &["id", "label"])? {
        let id = rec[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let label = parse_label(path, line, &rec[1])?;
        records.push(LabelRecord { id, label });
    }
    Ok(LabelFile { records })
}

pub fn write_labels(labels: &LabelFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| to_io(path, e))?;
    w.write_record(["id", "label"])
        .map_err(|e| to_io(path, e))?;
    for r in &labels.records {
        w.write_record([r.id.as_str(), if r.label { "1" } else { "0" }])
            .map_err(|e| to_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn to_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// One `id,score,label` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub score: f64,
    pub label: bool,
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in read_csv(path, &["id", "score", "label"])? {
        let id = rec[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let score: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad score {:?}", &rec[1])))?;
        if !score.is_finite() {
            return Err(parse_err(path, line, "score must be finite"));
        }
        let label = parse_label(path, line, &rec[2])?;
        out.push(ScoreRow { id, score, label });
    }
    Ok(out)
}

/// `id,caption` sidecar for a single `[N, D]` feature matrix. Empty captions
/// read as `None`.
pub fn read_id_captions(path: impl AsRef<Path>) -> Result<Vec<(String, Option<String>)>> {
    let path = path.as_ref();
    read_csv(path, &["id", "caption"])?
        .into_iter()
        .map(|(_, rec)| {
            let cap = rec[1].to_string();
            Ok((
                rec[0].trim().to_string(),
                if cap.trim().is_empty() {
                    None
                } else {
                    Some(cap)
                },
            ))
        })
        .collect()
}
