//! CSV dataset files: a header naming `k` probability columns plus a `label`
//! column, then one record per line.
//!
//! ```text
//! p0,p1,p2,label
//! 0.7,0.2,0.1,0
//! ```
//!
//! Rows whose probabilities sum to within `1e-6` of one are rescaled; rows
//! already within `1e-9` are kept bit-for-bit, so files written here read
//! back identically.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::conformal::{LabeledExample, ProbVector};
use crate::error::{Error, Result};

/// Largest row-sum error that is silently renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<LabeledExample>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("label"))
        .ok_or(Error::Dataset {
            line: 1,
            message: "header has no `label` column".into(),
        })?;
    let k = headers.len() - 1;
    if k < 2 {
        return Err(Error::Dataset {
            line: 1,
            message: format!("need at least 2 probability columns, found {k}"),
        });
    }

    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Dataset { line, message };
        let mut probs = Vec::with_capacity(k);
        let mut label = None;
        for (i, field) in row.iter().enumerate() {
            if i == label_col {
                label = Some(
                    field
                        .parse::<usize>()
                        .map_err(|e| bad(format!("label {field:?}: {e}")))?,
                );
            } else {
                probs.push(
                    field
                        .parse::<f64>()
                        .map_err(|e| bad(format!("probability {field:?}: {e}")))?,
                );
            }
        }
        let label = label.ok_or_else(|| bad("missing label".into()))?;
        let probs = ProbVector::normalized(probs, RENORMALIZE_TOLERANCE)
            .map_err(|e| bad(e.to_string()))?;
        out.push(LabeledExample::new(probs, label).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| {
        std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
    })?;
    read_dataset(file)
}

/// Writes `p0..p{k-1},label`. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_dataset<W: Write>(writer: W, data: &[LabeledExample]) -> Result<()> {
    let Some(first) = data.first() else {
        return Err(Error::EmptyInput("dataset"));
    };
    let k = first.k();
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..k).map(|i| format!("p{i}")).collect();
    header.push("label".into());
    csv.write_record(&header)?;
    for ex in data {
        if ex.k() != k {
            return Err(Error::InvalidProbVector(format!(
                "mixed class counts {} and {k}",
                ex.k()
            )));
        }
        let mut fields: Vec<String> = ex.probs.as_slice().iter().map(f64::to_string).collect();
        fields.push(ex.label.to_string());
        csv.write_record(&fields)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_dataset_file(path: impl AsRef<Path>, data: &[LabeledExample]) -> Result<()> {
    write_dataset(File::create(path)?, data)
}
