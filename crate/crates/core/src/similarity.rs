//! Duplicate removal and the pairwise cosine-similarity kernel.
//!
//! Every dot product accumulates in ascending column order with a single
//! scalar accumulator. Sparse and dense rows therefore produce the same bits
//! for the same vector, and results never depend on the worker count.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::corpus::{DenseMatrix, DocMatrix, RowRef, SparseMatrix};
use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot_dense(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn dot_sparse(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Dot product of two rows of possibly different layouts.
pub(crate) fn dot_rows(a: RowRef<'_>, b: RowRef<'_>) -> f64 {
    match (a, b) {
        (RowRef::Dense(x), RowRef::Dense(y)) => dot_dense(x, y),
        (RowRef::Sparse(x), RowRef::Sparse(y)) => dot_sparse(x, y),
        (RowRef::Sparse(s), RowRef::Dense(d)) | (RowRef::Dense(d), RowRef::Sparse(s)) => {
            let mut acc = 0.0;
            for &(c, v) in s {
                acc += v * d[c as usize];
            }
            acc
        }
    }
}

/// Cosine similarity of two dense vectors. Returns `None` if either is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = dot_dense(a, a).sqrt();
    let nb = dot_dense(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot_dense(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Symmetric matrix of pairwise cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    pairs_computed: u64,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Number of off-diagonal dot products evaluated to build the matrix.
    pub fn pairs_computed(&self) -> u64 {
        self.pairs_computed
    }

    /// Largest off-diagonal entry, or `None` for a 1x1 matrix.
    pub fn max_off_diagonal(&self) -> Option<f64> {
        (0..self.n)
            .flat_map(|i| ((i + 1)..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .reduce(f64::max)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::new(self.n, self.n, self.values.clone()).expect("square")
    }
}

/// Result of removing exact duplicate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dedup {
    pub matrix: DocMatrix,
    /// Original index of each kept row, ascending.
    pub kept: Vec<usize>,
    /// Removed row index -> original index of the kept representative.
    pub duplicates: BTreeMap<usize, usize>,
}

fn row_key(row: RowRef<'_>) -> Vec<u64> {
    match row {
        RowRef::Dense(r) => r.iter().map(|v| v.to_bits()).collect(),
        RowRef::Sparse(r) => r
            .iter()
            .flat_map(|&(c, v)| [c as u64, v.to_bits()])
            .collect(),
    }
}

/// Drop rows whose stored values are bytewise identical to an earlier row.
/// The first occurrence is kept and the original order preserved.
pub fn dedup(points: &DocMatrix) -> Dedup {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.n_rows());
    let mut kept = Vec::new();
    let mut duplicates = BTreeMap::new();
    for i in 0..points.n_rows() {
        match seen.entry(row_key(points.row(i))) {
            std::collections::hash_map::Entry::Occupied(e) => {
                duplicates.insert(i, *e.get());
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(i);
                kept.push(i);
            }
        }
    }
    let matrix = if duplicates.is_empty() {
        points.clone()
    } else {
        select_rows(points, &kept)
    };
    Dedup {
        matrix,
        kept,
        duplicates,
    }
}

pub(crate) fn select_rows(points: &DocMatrix, idx: &[usize]) -> DocMatrix {
    match points {
        DocMatrix::Dense(m) => {
            let mut data = Vec::with_capacity(idx.len() * m.n_cols());
            for &i in idx {
                data.extend_from_slice(m.row(i));
            }
            DocMatrix::Dense(DenseMatrix::new(idx.len(), m.n_cols(), data).expect("shape"))
        }
        DocMatrix::Sparse(m) => {
            let rows = idx.iter().map(|&i| m.row(i).to_vec()).collect();
            DocMatrix::Sparse(SparseMatrix::new(m.n_cols(), rows).expect("valid rows"))
        }
    }
}

/// Row-wise L2 norms; fails on the first all-zero row.
pub fn row_norms(points: &DocMatrix) -> Result<Vec<f64>> {
    (0..points.n_rows())
        .map(|i| {
            let n = points.dot(i, i).sqrt();
            if n == 0.0 {
                Err(Error::ZeroVector { row: i })
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Pairwise cosine similarities. Only the upper triangle is computed; it is
/// mirrored so the matrix is exactly symmetric, and the diagonal is set to 1.
pub fn cosine_matrix(points: &DocMatrix) -> Result<SimilarityMatrix> {
    let n = points.n_rows();
    let norms = row_norms(points)?;
    let mut values = vec![0.0; n * n];
    let pairs_computed: u64 = values
        .par_chunks_mut(n.max(1))
        .enumerate()
        .map(|(i, row)| {
            row[i] = 1.0;
            for j in (i + 1)..n {
                let c = points.dot(i, j) / (norms[i] * norms[j]);
                row[j] = c.clamp(-1.0, 1.0);
            }
            (n - 1 - i) as u64
        })
        .sum();
    for i in 0..n {
        for j in 0..i {
            values[i * n + j] = values[j * n + i];
        }
    }
    Ok(SimilarityMatrix {
        n,
        values,
        pairs_computed,
    })
}
