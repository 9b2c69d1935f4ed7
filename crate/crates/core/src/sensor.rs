//! The count sensor: a confusion table `T(o, w) = P(o | w)` over observed
//! versus true weed counts.
//!
//! Rows are observations `0..=n_w + 1`, where the last row is the aggregated
//! overshoot class ("more than `n_w` weeds detected"). Columns are true counts
//! `0..=n_w`. Every column is a probability distribution.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use std::path::Path;
use thiserror::Error;

/// Column sums must be within this of 1 for a loaded table to be accepted.
pub const LOAD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("failed to read sensor table: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse sensor table: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {col}: `{value}` is not a number")]
    NotANumber { row: usize, col: usize, value: String },
    #[error("sensor table must have n_w + 2 rows and n_w + 1 columns (n_w >= 1), got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("entry T({o}, {w}) = {value} is outside [0, 1]")]
    OutOfRange { o: usize, w: usize, value: f64 },
    #[error("column w = {w} sums to {sum}, expected 1 within {LOAD_TOLERANCE}")]
    ColumnSum { w: usize, sum: f64 },
    #[error("invalid sensor parameters: {0}")]
    Parameter(String),
}

/// Row-stochastic-by-column confusion table with a per-column sampler.
#[derive(Debug, Clone)]
pub struct SensorModel {
    n_w: usize,
    /// Row-major, `(n_w + 2) × (n_w + 1)`.
    table: Vec<f64>,
    columns: Vec<WeightedIndex<f64>>,
}

impl SensorModel {
    /// Builds a model from observation-major rows. Columns are renormalised
    /// after the sum check.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, SensorError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_cols < 2 || n_rows != n_cols + 1 {
            return Err(SensorError::Shape {
                rows: n_rows,
                cols: n_cols,
            });
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(SensorError::Ragged {
                    row,
                    found: r.len(),
                    expected: n_cols,
                });
            }
        }
        let n_w = n_cols - 1;
        let mut table: Vec<f64> = rows.into_iter().flatten().collect();
        for o in 0..n_rows {
            for w in 0..n_cols {
                let value = table[o * n_cols + w];
                if !(0.0..=1.0).contains(&value) {
                    return Err(SensorError::OutOfRange { o, w, value });
                }
            }
        }
        for w in 0..n_cols {
            let sum: f64 = (0..n_rows).map(|o| table[o * n_cols + w]).sum();
            if (sum - 1.0).abs() > LOAD_TOLERANCE {
                return Err(SensorError::ColumnSum { w, sum });
            }
            for o in 0..n_rows {
                table[o * n_cols + w] /= sum;
            }
        }
        Ok(Self::from_normalized(n_w, table))
    }

    fn from_normalized(n_w: usize, table: Vec<f64>) -> Self {
        let n_cols = n_w + 1;
        let columns = (0..n_cols)
            .map(|w| {
                let weights = (0..n_w + 2).map(|o| table[o * n_cols + w]);
                WeightedIndex::new(weights).expect("normalised column has positive mass")
            })
            .collect();
        Self {
            n_w,
            table,
            columns,
        }
    }

    /// Reads a CSV table (rows = observations, columns = true counts). A
    /// leading header row is skipped when any of its fields is non-numeric.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SensorError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self, SensorError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let parsed: Vec<Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
            if i == 0 && parsed.iter().any(Result::is_err) {
                continue;
            }
            let mut row = Vec::with_capacity(parsed.len());
            for (col, value) in parsed.into_iter().enumerate() {
                match value {
                    Ok(v) => row.push(v),
                    Err(_) => {
                        return Err(SensorError::NotANumber {
                            row: rows.len(),
                            col,
                            value: record[col].to_string(),
                        })
                    }
                }
            }
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    /// Discretised Gaussian family: column `w` is a normal centred at `w` with
    /// standard deviation `sigma0 + sigma1 * w`, integrated over unit bins
    /// `[o - 0.5, o + 0.5)` for `o = 0..=n_w`. Mass above `n_w + 0.5` goes to
    /// the overshoot row, mass below `-0.5` is dropped, then the column is
    /// renormalised.
    pub fn synthesize(n_w: usize, sigma0: f64, sigma1: f64) -> Result<Self, SensorError> {
        if n_w < 1 {
            return Err(SensorError::Parameter(format!("n_w must be >= 1, got {n_w}")));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(SensorError::Parameter(format!("sigma0 must be > 0, got {sigma0}")));
        }
        if !(sigma1 >= 0.0 && sigma1.is_finite()) {
            return Err(SensorError::Parameter(format!("sigma1 must be >= 0, got {sigma1}")));
        }
        let n_cols = n_w + 1;
        let n_rows = n_w + 2;
        let mut table = vec![0.0; n_rows * n_cols];
        for w in 0..n_cols {
            let sigma = sigma0 + sigma1 * w as f64;
            let z = |edge: f64| (edge - w as f64) / sigma;
            let mut column = Vec::with_capacity(n_rows);
            for o in 0..=n_w {
                let lo = z(o as f64 - 0.5);
                let hi = z(o as f64 + 0.5);
                column.push(normal_interval(lo, hi));
            }
            column.push(normal_upper_tail(z(n_w as f64 + 0.5)));
            let sum: f64 = column.iter().sum();
            for (o, mass) in column.into_iter().enumerate() {
                table[o * n_cols + w] = mass / sum;
            }
        }
        Ok(Self::from_normalized(n_w, table))
    }

    /// Perfect sensor: `T(w, w) = 1`, overshoot row zero.
    pub fn identity(n_w: usize) -> Self {
        let n_cols = n_w + 1;
        let mut table = vec![0.0; (n_w + 2) * n_cols];
        for w in 0..n_cols {
            table[w * n_cols + w] = 1.0;
        }
        Self::from_normalized(n_w, table)
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    /// Number of observation classes, `n_w + 2`.
    pub fn n_observations(&self) -> usize {
        self.n_w + 2
    }

    /// Index of the overshoot observation class.
    pub fn overshoot(&self) -> usize {
        self.n_w + 1
    }

    #[inline]
    pub fn prob(&self, o: usize, w: usize) -> f64 {
        self.table[o * (self.n_w + 1) + w]
    }

    /// Row `o` of the table, indexed by true count.
    #[inline]
    pub fn row(&self, o: usize) -> &[f64] {
        let n_cols = self.n_w + 1;
        &self.table[o * n_cols..(o + 1) * n_cols]
    }

    pub fn column(&self, w: usize) -> Vec<f64> {
        (0..self.n_observations()).map(|o| self.prob(o, w)).collect()
    }

    /// Draws a noisy observation of a cell holding `w_true` weeds.
    pub fn sample<R: Rng + ?Sized>(&self, w_true: usize, rng: &mut R) -> usize {
        assert!(w_true <= self.n_w, "true count {w_true} exceeds n_w = {}", self.n_w);
        self.columns[w_true].sample(rng)
    }

    /// Writes the table back out in the loadable CSV layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..=self.n_w).map(|w| format!("w{w}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for o in 0..self.n_observations() {
            let row: Vec<String> = self.row(o).iter().map(|p| format!("{p:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `P(lo <= Z < hi)` for a standard normal, computed on whichever side keeps
/// precision.
fn normal_interval(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        normal_upper_tail(lo) - normal_upper_tail(hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}
