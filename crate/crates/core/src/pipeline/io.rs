//! On-disk formats for datasets and weight vectors.
//!
//! * Dataset CSV: header `f0,…,f{F-1},label`, one record per row. The class
//!   count is not stored; readers take it as `max label + 1` unless given.
//! * Dataset snapshot: little-endian binary, `b"PDPDSET1"`, then `u64`
//!   record count, `u32` feature dim, `u32` class count, then per record
//!   `F × f64` features and a `u32` label.
//! * Weight file: one ASCII header line
//!   `postdp-weights v1 shape=<tag> len=<n>` followed by `n` little-endian
//!   `f64` values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::dataset::{Dataset, Record};
use super::weights::{ShapeTag, WeightVector};
use crate::error::{Error, Result};

const DATASET_MAGIC: &[u8; 8] = b"PDPDSET1";
const WEIGHTS_MAGIC: &str = "postdp-weights v1";

pub fn write_dataset_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..data.feature_dim()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for r in data.records() {
        let mut row: Vec<String> = r.features.iter().map(f64::to_string).collect();
        row.push(r.label.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset CSV. `num_classes` defaults to one past the largest label.
pub fn read_dataset_csv(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path)?;
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::Format("dataset CSV needs feature columns and a label column".into()));
    }
    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Format(format!("row {}: bad {what}", line + 2));
        let features = row
            .iter()
            .take(width - 1)
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("feature")))
            .collect::<Result<Vec<_>>>()?;
        let label = row
            .get(width - 1)
            .ok_or_else(|| bad("label"))?
            .trim()
            .parse::<usize>()
            .map_err(|_| bad("label"))?;
        records.push(Record { features, label });
    }
    let classes = num_classes.unwrap_or_else(|| records.iter().map(|r| r.label + 1).max().unwrap_or(1));
    Dataset::new(records, width - 1, classes)
}

pub fn write_dataset_snapshot(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(data.len() as u64).to_le_bytes())?;
    w.write_all(&(data.feature_dim() as u32).to_le_bytes())?;
    w.write_all(&(data.num_classes() as u32).to_le_bytes())?;
    for r in data.records() {
        for v in &r.features {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(r.label as u32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_dataset_snapshot(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    if &read_array::<8>(&mut r)? != DATASET_MAGIC {
        return Err(Error::Format("not a dataset snapshot".into()));
    }
    let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let dim = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let classes = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut records = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let features = (0..dim)
            .map(|_| Ok(f64::from_le_bytes(read_array(&mut r)?)))
            .collect::<Result<Vec<_>>>()?;
        let label = u32::from_le_bytes(read_array(&mut r)?) as usize;
        records.push(Record { features, label });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes after dataset snapshot".into()));
    }
    Dataset::new(records, dim, classes)
}

pub fn write_weights(w: &WeightVector, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{WEIGHTS_MAGIC} shape={} len={}", w.shape(), w.len())?;
    for v in w.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_weights(input: &mut impl BufRead) -> Result<WeightVector> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let bad = || Error::Format(format!("bad weight header {:?}", header.trim_end()));
    let rest = header.trim_end().strip_prefix(WEIGHTS_MAGIC).ok_or_else(bad)?;
    let mut shape = None;
    let mut len = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix("shape=") {
            shape = Some(v.parse::<ShapeTag>()?);
        } else if let Some(v) = field.strip_prefix("len=") {
            len = Some(v.parse::<usize>().map_err(|_| bad())?);
        }
    }
    let (shape, len) = (shape.ok_or_else(bad)?, len.ok_or_else(bad)?);
    let values = (0..len)
        .map(|_| Ok(f64::from_le_bytes(read_array(input)?)))
        .collect::<Result<Vec<_>>>()?;
    WeightVector::new(values, shape)
}

pub fn save_weights(w: &WeightVector, path: impl AsRef<Path>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_weights(w, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightVector> {
    read_weights(&mut BufReader::new(File::open(path)?))
}
