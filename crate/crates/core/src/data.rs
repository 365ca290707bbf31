//! Sparse examples-by-features storage and LIBSVM ingestion.
//!
//! Rows are kept in compressed sparse row form with 0-based column indices.
//! The per-row squared norms, row nonzero counts and per-column nonzero counts
//! are computed once at construction; every other module reads them.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Immutable sparse data matrix `X` (one row per example) plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    row_norms_sq: Vec<f64>,
    row_nnz: Vec<usize>,
    col_nnz: Vec<usize>,
}

/// Borrowed view of one sparse row.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> Row<'a> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.iter().map(|(j, x)| x * w[j]).sum()
    }
}

impl Dataset {
    /// Builds a dataset from per-row `(column, value)` lists.
    ///
    /// Zero values are dropped. Columns must be strictly increasing within a
    /// row and below `d` when `d` is given; otherwise `d` is the largest
    /// column seen plus one.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, d: Option<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let mut builder = Builder::new(d);
        for (i, (row, label)) in rows.into_iter().zip(labels).enumerate() {
            builder
                .push_row(label, row)
                .map_err(|msg| Error::InvalidData(format!("row {i}: {msg}")))?;
        }
        builder.finish()
    }

    /// Builds a dataset from dense rows, storing only the nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.iter().map(Vec::len).max().unwrap_or(0);
        let sparse = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().filter(|&(_, x)| x != 0.0).collect())
            .collect();
        Self::from_rows(sparse, labels, Some(d))
    }

    /// Reads LIBSVM text: `<label> <idx>:<val> ...` with 1-based indices.
    ///
    /// Blank lines and lines starting with `#` are skipped; CRLF endings are
    /// accepted. `d_override` fixes the feature count (it may only raise the
    /// inferred count; larger indices are an error).
    pub fn parse_libsvm<R: BufRead>(reader: R, d_override: Option<usize>) -> Result<Self> {
        let mut builder = Builder::new(d_override);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = lineno + 1;
            let line = line.trim_end_matches('\r').trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, row) = parse_line(line).map_err(|msg| Error::Parse { line: line_no, msg })?;
            builder
                .push_row(label, row)
                .map_err(|msg| Error::Parse { line: line_no, msg })?;
        }
        builder.finish()
    }

    pub fn from_libsvm_str(text: &str, d_override: Option<usize>) -> Result<Self> {
        Self::parse_libsvm(text.as_bytes(), d_override)
    }

    pub fn load<P: AsRef<Path>>(path: P, d_override: Option<usize>) -> Result<Self> {
        let file = File::open(path)?;
        Self::parse_libsvm(BufReader::new(file), d_override)
    }

    /// Writes the dataset back out in LIBSVM format (1-based indices,
    /// shortest round-trip float formatting).
    pub fn write_libsvm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.n {
            write!(out, "{}", self.labels[i])?;
            for (j, x) in self.row(i).iter() {
                write!(out, " {}:{}", j + 1, x)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_libsvm_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_libsvm(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("formatted numbers are ASCII")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        Row {
            indices: &self.col_idx[a..b],
            values: &self.values[a..b],
        }
    }

    /// `‖x_i‖²` for every row.
    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    /// `‖x_i‖₀` for every row.
    pub fn row_nnz(&self) -> &[usize] {
        &self.row_nnz
    }

    /// Number of rows with an explicit entry in each column.
    pub fn col_nnz(&self) -> &[usize] {
        &self.col_nnz
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `x_iᵀw`.
    pub fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).dot(w)
    }

    /// `target += scale · x_i`.
    pub fn add_row_scaled(&self, i: usize, scale: f64, target: &mut [f64]) {
        for (j, x) in self.row(i).iter() {
            target[j] += scale * x;
        }
    }

    /// Returns a copy with every row scaled to unit Euclidean norm.
    pub fn normalize_rows(&self) -> Dataset {
        let mut values = self.values.clone();
        for i in 0..self.n {
            let norm = self.row_norms_sq[i].sqrt();
            for x in &mut values[self.row_ptr[i]..self.row_ptr[i + 1]] {
                *x /= norm;
            }
        }
        let mut out = Dataset {
            n: self.n,
            d: self.d,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
            labels: self.labels.clone(),
            row_norms_sq: Vec::new(),
            row_nnz: Vec::new(),
            col_nnz: Vec::new(),
        };
        out.compute_statistics();
        out
    }

    /// Reference primal image `w_α = (1/(λn)) Xᵀα`, computed from scratch.
    pub fn primal_image(&self, alpha: &[f64], lambda: f64) -> Result<Vec<f64>> {
        if alpha.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: alpha.len(),
            });
        }
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
        }
        let mut w = vec![0.0; self.d];
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                self.add_row_scaled(i, a, &mut w);
            }
        }
        let scale = 1.0 / (lambda * self.n as f64);
        w.iter_mut().for_each(|x| *x *= scale);
        Ok(w)
    }

    /// Per-example margins `X w`.
    pub fn margins(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: w.len(),
            });
        }
        Ok((0..self.n).map(|i| self.row_dot(i, w)).collect())
    }

    /// Dense copy of `X`, row major. Intended for small instances and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let mut r = vec![0.0; self.d];
                for (j, x) in self.row(i).iter() {
                    r[j] = x;
                }
                r
            })
            .collect()
    }

    /// Recomputes the cached statistics and compares them with the stored
    /// ones bit for bit.
    pub fn statistics_consistent(&self) -> bool {
        let mut fresh = self.clone();
        fresh.compute_statistics();
        fresh.row_norms_sq == self.row_norms_sq && fresh.row_nnz == self.row_nnz && fresh.col_nnz == self.col_nnz
    }

    /// Sub-dataset made of the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            let r = self.row(i);
            col_idx.extend_from_slice(r.indices);
            values.extend_from_slice(r.values);
            row_ptr.push(col_idx.len());
            labels.push(self.labels[i]);
        }
        let mut out = Dataset {
            n: rows.len(),
            d: self.d,
            row_ptr,
            col_idx,
            values,
            labels,
            row_norms_sq: Vec::new(),
            row_nnz: Vec::new(),
            col_nnz: Vec::new(),
        };
        out.compute_statistics();
        out
    }

    fn compute_statistics(&mut self) {
        self.row_norms_sq = (0..self.n)
            .map(|i| self.row(i).values.iter().map(|x| x * x).sum())
            .collect();
        self.row_nnz = (0..self.n).map(|i| self.row_ptr[i + 1] - self.row_ptr[i]).collect();
        let mut col_nnz = vec![0; self.d];
        for &j in &self.col_idx {
            col_nnz[j] += 1;
        }
        self.col_nnz = col_nnz;
    }
}

struct Builder {
    d_fixed: Option<usize>,
    d_seen: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl Builder {
    fn new(d_fixed: Option<usize>) -> Self {
        Builder {
            d_fixed,
            d_seen: 0,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    fn push_row(&mut self, label: f64, row: Vec<(usize, f64)>) -> std::result::Result<(), String> {
        if !label.is_finite() {
            return Err(format!("label {label} is not finite"));
        }
        let mut prev: Option<usize> = None;
        let start = self.col_idx.len();
        for (j, x) in row {
            if let Some(p) = prev {
                if j == p {
                    self.truncate(start);
                    return Err(format!("duplicate feature index {}", j + 1));
                }
                if j < p {
                    self.truncate(start);
                    return Err(format!("feature index {} follows {}", j + 1, p + 1));
                }
            }
            if let Some(d) = self.d_fixed {
                if j >= d {
                    self.truncate(start);
                    return Err(format!("feature index {} exceeds dimension {d}", j + 1));
                }
            }
            if !x.is_finite() {
                self.truncate(start);
                return Err(format!("value {x} at feature {} is not finite", j + 1));
            }
            prev = Some(j);
            if x != 0.0 {
                self.col_idx.push(j);
                self.values.push(x);
                self.d_seen = self.d_seen.max(j + 1);
            }
        }
        if self.col_idx.len() == start {
            return Err("row has no nonzero features".into());
        }
        self.row_ptr.push(self.col_idx.len());
        self.labels.push(label);
        Ok(())
    }

    fn truncate(&mut self, len: usize) {
        self.col_idx.truncate(len);
        self.values.truncate(len);
    }

    fn finish(self) -> Result<Dataset> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no examples".into()));
        }
        let d = self.d_fixed.unwrap_or(self.d_seen).max(self.d_seen);
        if d == 0 {
            return Err(Error::InvalidData("dataset has no features".into()));
        }
        let mut ds = Dataset {
            n,
            d,
            row_ptr: self.row_ptr,
            col_idx: self.col_idx,
            values: self.values,
            labels: self.labels,
            row_norms_sq: Vec::new(),
            row_nnz: Vec::new(),
            col_nnz: Vec::new(),
        };
        ds.compute_statistics();
        Ok(ds)
    }
}

fn parse_line(line: &str) -> std::result::Result<(f64, Vec<(usize, f64)>), String> {
    let mut tokens = line.split_whitespace();
    let label_tok = tokens.next().ok_or("missing label")?;
    let label: f64 = label_tok
        .parse()
        .map_err(|_| format!("malformed label '{label_tok}'"))?;
    let mut row = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| format!("malformed token '{tok}', expected idx:val"))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| format!("malformed feature index in '{tok}'"))?;
        if idx < 1 {
            return Err(format!("feature index must be >= 1 in '{tok}'"));
        }
        let val: f64 = val.parse().map_err(|_| format!("malformed value in '{tok}'"))?;
        row.push((idx - 1, val));
    }
    if row.is_empty() {
        return Err("row has no features".into());
    }
    Ok((label, row))
}
