//! JSON operator files: `{"n", "layout": "dense" | "lambda2", "data", "meta"}`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::CurvatureOperator;
use crate::error::{Error, Result};
use crate::tensor::{pair_list, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// All `n^4` entries, index `((i n + j) n + k) n + l`.
    Dense,
    /// The `N x N` matrix on pairs `i < j` in lexicographic order, row-major.
    Lambda2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    pub n: usize,
    pub layout: Layout,
    pub data: Vec<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

impl OperatorFile {
    pub fn dense(r: &CurvatureOperator) -> Self {
        Self {
            n: r.dim(),
            layout: Layout::Dense,
            data: r.tensor().as_slice().to_vec(),
            meta: serde_json::Value::Null,
        }
    }

    pub fn lambda2(r: &CurvatureOperator) -> Self {
        let m = r.lambda2_matrix();
        let data = m.transpose().as_slice().to_vec(); // nalgebra is column-major
        Self {
            n: r.dim(),
            layout: Layout::Lambda2,
            data,
            meta: serde_json::Value::Null,
        }
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = meta;
        self
    }

    /// Validates the payload and builds the operator.
    pub fn to_operator(&self) -> Result<CurvatureOperator> {
        let n = self.n;
        match self.layout {
            Layout::Dense => CurvatureOperator::new(Tensor4::from_vec(n, self.data.clone())?),
            Layout::Lambda2 => {
                let np = pair_list(n).len();
                if self.data.len() != np * np {
                    return Err(Error::InvalidShape(format!(
                        "lambda2 layout for n = {n} needs {} entries, got {}",
                        np * np,
                        self.data.len()
                    )));
                }
                let m = DMatrix::from_row_slice(np, np, &self.data);
                let asym = (&m - m.transpose()).abs().max();
                if asym > 1e-12 * m.abs().max().max(1.0) {
                    return Err(Error::InvalidShape(format!(
                        "lambda2 matrix not symmetric: residual {asym:e}"
                    )));
                }
                CurvatureOperator::from_lambda2(n, &m)
            }
        }
    }
}

/// Parses one operator object or an array of them.
pub fn parse_operators(text: &str) -> Result<Vec<CurvatureOperator>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let files: Vec<OperatorFile> = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    files.iter().map(OperatorFile::to_operator).collect()
}

pub fn read_operators(path: &Path) -> Result<Vec<CurvatureOperator>> {
    parse_operators(&std::fs::read_to_string(path)?)
}

pub fn operator_json(r: &CurvatureOperator) -> Result<String> {
    Ok(serde_json::to_string_pretty(&OperatorFile::dense(r))?)
}
