use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One-vs-one class codewords: column `(i, j)` holds +1 in row `i`, −1 in
/// row `j` and 0 ("don't care") elsewhere. Columns are ordered
/// lexicographically by `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdTable {
    n_classes: usize,
    columns: Vec<(usize, usize)>,
    /// Row-major `n_classes × columns.len()`.
    entries: Vec<i8>,
}

impl IdTable {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn columns(&self) -> &[(usize, usize)] {
        &self.columns
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, class: usize) -> &[i8] {
        let m = self.columns.len();
        &self.entries[class * m..(class + 1) * m]
    }

    pub fn entry(&self, class: usize, column: usize) -> i8 {
        self.row(class)[column]
    }
}

pub fn build_id_table(n_classes: usize) -> Result<IdTable> {
    if n_classes < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {n_classes}")));
    }
    let columns: Vec<(usize, usize)> =
        (0..n_classes).flat_map(|i| (i + 1..n_classes).map(move |j| (i, j))).collect();
    let m = columns.len();
    let mut entries = vec![0i8; n_classes * m];
    for (col, &(i, j)) in columns.iter().enumerate() {
        entries[i * m + col] = 1;
        entries[j * m + col] = -1;
    }
    Ok(IdTable { n_classes, columns, entries })
}

/// Distance used when comparing an outcome vector with a class codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMetric {
    /// Euclidean over the whole row, zeros compared literally.
    #[default]
    Literal,
    /// Euclidean over the row's non-zero entries only.
    IgnoreZeros,
}

impl fmt::Display for DecodeMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMetric::Literal => "literal",
            DecodeMetric::IgnoreZeros => "ignore-zeros",
        })
    }
}

impl FromStr for DecodeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(DecodeMetric::Literal),
            "ignore-zeros" => Ok(DecodeMetric::IgnoreZeros),
            _ => Err(Error::invalid(format!("unknown decode metric {s:?}"))),
        }
    }
}

/// Minimum-distance decoding with the literal metric.
pub fn decode(outcomes: &[i8], table: &IdTable) -> Result<(usize, Vec<f64>)> {
    decode_with(outcomes, table, DecodeMetric::Literal)
}

/// Returns the nearest class (lowest index on ties) and the distance to every
/// class codeword.
pub fn decode_with(outcomes: &[i8], table: &IdTable, metric: DecodeMetric) -> Result<(usize, Vec<f64>)> {
    if outcomes.len() != table.n_columns() {
        return Err(Error::LengthMismatch { expected: table.n_columns(), actual: outcomes.len() });
    }
    let distances: Vec<f64> = (0..table.n_classes)
        .map(|class| {
            table
                .row(class)
                .iter()
                .zip(outcomes)
                .filter(|(&e, _)| metric == DecodeMetric::Literal || e != 0)
                .map(|(&e, &o)| {
                    let d = f64::from(o) - f64::from(e);
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let best = (1..distances.len()).fold(0, |best, c| if distances[c] < distances[best] { c } else { best });
    Ok((best, distances))
}
