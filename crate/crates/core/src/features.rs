//! Node feature matrices and the per-column value pools used as noise.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::ComputationalGraph;
use crate::matrix::Matrix;

/// Dense node-by-feature matrix plus, for each column, the multiset of values
/// that column takes over the full dataset.
///
/// Restricting to a computational graph keeps the global pools, so noise is
/// always drawn from plausible dataset-wide values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Matrix,
    pools: Arc<Vec<Vec<f64>>>,
}

impl FeatureMatrix {
    /// Wraps `values`, taking every column's entries as its pool.
    pub fn new(values: Matrix) -> Self {
        let pools = (0..values.cols()).map(|c| values.column(c)).collect();
        Self {
            values,
            pools: Arc::new(pools),
        }
    }

    /// Wraps `values` with explicitly supplied pools (e.g. a known discrete domain).
    pub fn with_pools(values: Matrix, pools: Vec<Vec<f64>>) -> Result<Self> {
        if pools.len() != values.cols() {
            return Err(Error::Dimension(format!(
                "{} pools for {} feature columns",
                pools.len(),
                values.cols()
            )));
        }
        if let Some(j) = pools.iter().position(Vec::is_empty) {
            return Err(Error::EmptyPool(j));
        }
        Ok(Self {
            values,
            pools: Arc::new(pools),
        })
    }

    #[inline]
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn pools(&self) -> &[Vec<f64>] {
        &self.pools
    }

    pub fn pool(&self, column: usize) -> &[f64] {
        &self.pools[column]
    }

    /// Rows of the computational graph's nodes, sharing this matrix's pools.
    pub fn restrict(&self, cg: &ComputationalGraph) -> Result<FeatureMatrix> {
        if let Some(&bad) = cg.local_nodes().iter().find(|&&g| g >= self.rows()) {
            return Err(Error::NodeOutOfRange {
                index: bad,
                num_nodes: self.rows(),
            });
        }
        Ok(Self {
            values: self.values.select_rows(cg.local_nodes()),
            pools: Arc::clone(&self.pools),
        })
    }

    /// Same pools, different values (e.g. after zeroing columns).
    pub fn with_values(&self, values: Matrix) -> Result<FeatureMatrix> {
        if values.cols() != self.cols() {
            return Err(Error::Dimension(format!(
                "replacement has {} columns, expected {}",
                values.cols(),
                self.cols()
            )));
        }
        Ok(Self {
            values,
            pools: Arc::clone(&self.pools),
        })
    }

    /// Parses a features CSV: one comma-separated row of reals per node.
    pub fn parse_csv(text: &str, origin: &Path) -> Result<Matrix> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|e| {
                        Error::parse(origin, lineno + 1, format!("bad feature value `{tok}`: {e}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if row.len() != first {
                    return Err(Error::parse(
                        origin,
                        lineno + 1,
                        format!("{} columns, expected {first}", row.len()),
                    ));
                }
            }
            rows.push(row);
        }
        Matrix::from_rows(&rows)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(Self::parse_csv(&text, path)?))
    }

    pub fn to_csv(values: &Matrix) -> String {
        let mut out = String::new();
        for r in 0..values.rows() {
            for (c, v) in values.row(r).iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Floats in data files: 17 significant digits, `.` decimal separator.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
