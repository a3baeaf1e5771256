//! CSV matrix input and the JSON result document.

use std::io::Read;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::decomposition::{LayerDiagnostics, RobustSvd};
use crate::error::{Result, RsvdError};
use crate::Matrix;

/// Parse a comma-separated numeric matrix. With `header`, the first record is
/// skipped. Surrounding whitespace in fields is ignored.
pub fn read_matrix_csv<R: Read>(input: R, header: bool) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| RsvdError::Parse(e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line());
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(RsvdError::Parse(format!(
                    "line {line}: expected {c} fields, found {}",
                    rec.len()
                )))
            }
            _ => {}
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| RsvdError::Parse(format!("line {line}, field {}: '{field}' is not a number", j + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| RsvdError::Parse("no data rows".into()))?;
    Matrix::from_shape_vec((rows, cols), data).map_err(|e| RsvdError::Parse(e.to_string()))
}

/// Serialized form of a decomposition. Matrices are nested row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdDocument {
    pub lambdas: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub diagnostics: Vec<LayerDiagnostics>,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<Matrix> {
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        if r.len() != cols {
            return Err(RsvdError::Parse(format!("{what}: ragged row of length {}", r.len())));
        }
        data.extend_from_slice(r);
    }
    Matrix::from_shape_vec((rows.len(), cols), data).map_err(|e| RsvdError::Parse(e.to_string()))
}

impl From<&RobustSvd> for SvdDocument {
    fn from(svd: &RobustSvd) -> Self {
        SvdDocument {
            lambdas: svd.lambdas.to_vec(),
            u: rows_of(&svd.u),
            v: rows_of(&svd.v),
            sigma2: svd.sigma2s.to_vec(),
            diagnostics: svd.diagnostics.clone(),
        }
    }
}

impl TryFrom<SvdDocument> for RobustSvd {
    type Error = RsvdError;

    fn try_from(doc: SvdDocument) -> Result<Self> {
        let rank = doc.lambdas.len();
        if doc.sigma2.len() != rank {
            return Err(RsvdError::Parse("sigma2 length differs from lambdas".into()));
        }
        Ok(RobustSvd {
            rank,
            lambdas: Array1::from(doc.lambdas),
            u: from_rows(&doc.u, rank, "u")?,
            v: from_rows(&doc.v, rank, "v")?,
            sigma2s: Array1::from(doc.sigma2),
            diagnostics: doc.diagnostics,
        })
    }
}

pub fn to_json(svd: &RobustSvd) -> String {
    serde_json::to_string_pretty(&SvdDocument::from(svd)).expect("finite numbers serialize")
}

pub fn from_json(text: &str) -> Result<RobustSvd> {
    let doc: SvdDocument = serde_json::from_str(text).map_err(|e| RsvdError::Parse(e.to_string()))?;
    doc.try_into()
}
