//! Ordered single-predictor datasets.
//!
//! A [`Dataset`] holds `(x, y)` pairs sorted by `x`, optionally with the true
//! mean `mu` at every point so fitted trees can be scored against the
//! generating model.

use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    mu: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset from predictor values that are already sorted
    /// non-decreasing.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "x has {} values but y has {}",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at position {}",
                i % x.len()
            )));
        }
        if let Some(i) = x.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::invalid(format!(
                "x is not sorted: x[{}] = {} > x[{}] = {}",
                i,
                x[i],
                i + 1,
                x[i + 1]
            )));
        }
        Ok(Dataset { x, y, mu: None })
    }

    /// Builds a dataset from arbitrary-order pairs, sorting by `x`. Points
    /// with equal `x` keep their input order.
    pub fn from_unsorted(x: Vec<f64>, y: Vec<f64>, mu: Option<Vec<f64>>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "x has {} values but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("x contains NaN"));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let ds = Dataset::new(pick(&x), pick(&y))?;
        match mu {
            Some(mu) if mu.len() == x.len() => ds.with_mu(pick(&mu)),
            Some(mu) => Err(Error::invalid(format!(
                "mu has {} values but x has {}",
                mu.len(),
                x.len()
            ))),
            None => Ok(ds),
        }
    }

    /// Attaches the true mean at every point.
    pub fn with_mu(mut self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.x.len() {
            return Err(Error::invalid(format!(
                "mu has {} values but x has {}",
                mu.len(),
                self.x.len()
            )));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mu contains a non-finite value"));
        }
        self.mu = Some(mu);
        Ok(self)
    }

    #[cfg(test)]
    pub(crate) fn unchecked(x: Vec<f64>, y: Vec<f64>) -> Self {
        Dataset { x, y, mu: None }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    /// Always false; a dataset holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn mu(&self) -> Option<&[f64]> {
        self.mu.as_deref()
    }

    /// Returns the points at `indices` (which must be strictly increasing),
    /// preserving sort order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("subset indices must be strictly increasing"));
        }
        if indices.last().is_some_and(|&i| i >= self.len()) {
            return Err(Error::invalid("subset index out of range"));
        }
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let ds = Dataset::new(pick(&self.x), pick(&self.y))?;
        match &self.mu {
            Some(mu) => ds.with_mu(pick(mu)),
            None => Ok(ds),
        }
    }

    /// Returns a copy with every response multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Dataset {
        Dataset {
            x: self.x.clone(),
            y: self.y.iter().map(|v| v * k).collect(),
            mu: self.mu.as_ref().map(|m| m.iter().map(|v| v * k).collect()),
        }
    }

    /// Reads a headed CSV with columns `x` and `y` and an optional `mu`
    /// column, in any order. Extra columns are ignored. Rows need not be
    /// sorted.
    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
        };
        let (xi, yi) = match (col("x"), col("y")) {
            (Some(xi), Some(yi)) => (xi, yi),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "header must name both an `x` and a `y` column".into(),
                })
            }
        };
        let mui = col("mu");

        let (mut x, mut y, mut mu) = (Vec::new(), Vec::new(), Vec::new());
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize, name: &str| -> Result<f64> {
                let raw = record.get(i).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("missing `{name}` field"),
                })?;
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{name}` value {raw:?} is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("`{name}` value {raw:?} is not finite"),
                    });
                }
                Ok(v)
            };
            x.push(field(xi, "x")?);
            y.push(field(yi, "y")?);
            if let Some(mi) = mui {
                mu.push(field(mi, "mu")?);
            }
        }
        if x.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "no data rows".into(),
            });
        }
        Dataset::from_unsorted(x, y, mui.map(|_| mu))
    }
}
