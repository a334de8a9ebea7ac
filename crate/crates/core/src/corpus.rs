//! Corpus loading, validation and fingerprinting.
//!
//! A corpus arrives as two line-aligned files: a document matrix (dense
//! vectors or sparse term counts) and a pre-processed token file with one
//! space-separated document per line.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::similarity::{dot_dense, dot_sparse};

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::format(format!(
                "dense matrix {n_rows}x{n_cols} needs {} values, got {}",
                n_rows * n_cols,
                data.len()
            )));
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(Error::format_at(
                    i + 1,
                    format!("row has {} values, expected {n_cols}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Sparse rows of `(column, value)` pairs sorted by column. Loaded corpora
/// hold non-negative integer counts; centroids of sparse rows keep the same
/// layout with fractional values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseMatrix {
    pub fn new(n_cols: usize, mut rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        for (i, r) in rows.iter_mut().enumerate() {
            r.retain(|&(_, v)| v != 0.0);
            r.sort_by_key(|&(c, _)| c);
            if r.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::format_at(i + 1, "repeated column index"));
            }
            if let Some(&(c, _)) = r.last() {
                if c as usize >= n_cols {
                    return Err(Error::format_at(
                        i + 1,
                        format!("column {c} out of range for {n_cols} columns"),
                    ));
                }
            }
        }
        Ok(SparseMatrix { n_cols, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }
}

/// Document matrix in one of the two supported layouts.
#[derive(Debug, Clone, PartialEq)]
pub enum DocMatrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

/// Borrowed view of a single matrix row.
#[derive(Debug, Clone, Copy)]
pub enum RowRef<'a> {
    Dense(&'a [f64]),
    Sparse(&'a [(u32, f64)]),
}

impl RowRef<'_> {
    pub fn is_zero(&self) -> bool {
        match self {
            RowRef::Dense(r) => r.iter().all(|&v| v == 0.0),
            RowRef::Sparse(r) => r.iter().all(|&(_, v)| v == 0.0),
        }
    }

    /// Add this row into a dense accumulator.
    pub fn add_to(&self, acc: &mut [f64]) {
        match self {
            RowRef::Dense(r) => {
                for (a, v) in acc.iter_mut().zip(r.iter()) {
                    *a += v;
                }
            }
            RowRef::Sparse(r) => {
                for &(c, v) in r.iter() {
                    acc[c as usize] += v;
                }
            }
        }
    }

    pub fn to_dense(&self, n_cols: usize) -> Vec<f64> {
        match self {
            RowRef::Dense(r) => r.to_vec(),
            RowRef::Sparse(r) => {
                let mut out = vec![0.0; n_cols];
                for &(c, v) in r.iter() {
                    out[c as usize] = v;
                }
                out
            }
        }
    }

    /// Dot product with a dense vector, accumulated in ascending column order.
    pub fn dot_dense(&self, other: &[f64]) -> f64 {
        match self {
            RowRef::Dense(r) => dot_dense(r, other),
            RowRef::Sparse(r) => {
                let mut acc = 0.0;
                for &(c, v) in r.iter() {
                    acc += v * other[c as usize];
                }
                acc
            }
        }
    }
}

impl DocMatrix {
    pub fn n_rows(&self) -> usize {
        match self {
            DocMatrix::Dense(m) => m.n_rows(),
            DocMatrix::Sparse(m) => m.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            DocMatrix::Dense(m) => m.n_cols(),
            DocMatrix::Sparse(m) => m.n_cols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, DocMatrix::Sparse(_))
    }

    pub fn row(&self, i: usize) -> RowRef<'_> {
        match self {
            DocMatrix::Dense(m) => RowRef::Dense(m.row(i)),
            DocMatrix::Sparse(m) => RowRef::Sparse(m.row(i)),
        }
    }

    /// Dot product of rows `i` and `j`.
    pub fn dot(&self, i: usize, j: usize) -> f64 {
        match self {
            DocMatrix::Dense(m) => dot_dense(m.row(i), m.row(j)),
            DocMatrix::Sparse(m) => dot_sparse(m.row(i), m.row(j)),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            DocMatrix::Dense(m) => m.clone(),
            DocMatrix::Sparse(m) => {
                let mut out = DenseMatrix::zeros(m.n_rows(), m.n_cols());
                for i in 0..m.n_rows() {
                    let row = out.row_mut(i);
                    for &(c, v) in m.row(i) {
                        row[c as usize] = v;
                    }
                }
                out
            }
        }
    }

    /// Rejects non-finite values and all-zero rows.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n_rows() {
            let row = self.row(i);
            let finite = match row {
                RowRef::Dense(r) => r.iter().all(|v| v.is_finite()),
                RowRef::Sparse(r) => r.iter().all(|(_, v)| v.is_finite()),
            };
            if !finite {
                return Err(Error::format_at(i + 2, "non-finite value"));
            }
            if row.is_zero() {
                return Err(Error::ZeroVector { row: i });
            }
        }
        Ok(())
    }

    /// Parse the text layout: a `dense <rows> <cols>` or `sparse <rows> <cols>`
    /// header followed by one row per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty matrix file"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::format_at(1, format!("bad header `{header}`")));
        }
        let n_rows: usize = parts[1]
            .parse()
            .map_err(|_| Error::format_at(1, "bad row count"))?;
        let n_cols: usize = parts[2]
            .parse()
            .map_err(|_| Error::format_at(1, "bad column count"))?;
        let body: Vec<&str> = lines.collect();
        // A trailing blank line is tolerated, nothing else beyond n_rows.
        let body_len = if body.len() == n_rows + 1 && body[n_rows].trim().is_empty() {
            n_rows
        } else {
            body.len()
        };
        if body_len != n_rows {
            return Err(Error::format(format!(
                "header declares {n_rows} rows, found {body_len}"
            )));
        }
        match parts[0] {
            "dense" => {
                let mut data = Vec::with_capacity(n_rows * n_cols);
                for (i, line) in body[..n_rows].iter().enumerate() {
                    let before = data.len();
                    for tok in line.split_whitespace() {
                        let v: f64 = tok
                            .parse()
                            .map_err(|_| Error::format_at(i + 2, format!("bad float `{tok}`")))?;
                        data.push(v);
                    }
                    if data.len() - before != n_cols {
                        return Err(Error::format_at(
                            i + 2,
                            format!("expected {n_cols} values, found {}", data.len() - before),
                        ));
                    }
                }
                Ok(DocMatrix::Dense(DenseMatrix::new(n_rows, n_cols, data)?))
            }
            "sparse" => {
                let mut rows = Vec::with_capacity(n_rows);
                for (i, line) in body[..n_rows].iter().enumerate() {
                    let mut row = Vec::new();
                    for tok in line.split_whitespace() {
                        let (c, v) = tok.split_once(':').ok_or_else(|| {
                            Error::format_at(i + 2, format!("expected idx:count, got `{tok}`"))
                        })?;
                        let c: u32 = c
                            .parse()
                            .map_err(|_| Error::format_at(i + 2, format!("bad index `{c}`")))?;
                        let v: u64 = v
                            .parse()
                            .map_err(|_| Error::format_at(i + 2, format!("bad count `{v}`")))?;
                        row.push((c, v as f64));
                    }
                    rows.push(row);
                }
                SparseMatrix::new(n_cols, rows)
                    .map(DocMatrix::Sparse)
                    .map_err(|e| match e {
                        Error::Format {
                            line: Some(l),
                            message,
                            ..
                        } => Error::format_at(l + 1, message),
                        other => other,
                    })
            }
            other => Err(Error::format_at(
                1,
                format!("unknown matrix kind `{other}`"),
            )),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            DocMatrix::Dense(m) => write_dense(&mut out, m),
            DocMatrix::Sparse(m) => {
                let _ = writeln!(out, "sparse {} {}", m.n_rows(), m.n_cols());
                for r in &m.rows {
                    let line: Vec<String> = r.iter().map(|&(c, v)| format!("{c}:{v}")).collect();
                    let _ = writeln!(out, "{}", line.join(" "));
                }
            }
        }
        out
    }
}

pub(crate) fn write_dense(out: &mut String, m: &DenseMatrix) {
    let _ = writeln!(out, "dense {} {}", m.n_rows(), m.n_cols());
    for r in m.rows() {
        let mut first = true;
        for v in r {
            if !first {
                out.push(' ');
            }
            first = false;
            // `{:?}` is the shortest representation that parses back to the same bits.
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
}

impl DenseMatrix {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write_dense(&mut out, self);
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        match DocMatrix::parse(text)? {
            DocMatrix::Dense(m) => Ok(m),
            DocMatrix::Sparse(_) => Err(Error::format("expected a dense matrix")),
        }
    }
}

/// Terms in first-occurrence order; a term's position is its id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: Vec<String>) -> Result<Self> {
        let mut v = Vocabulary::new();
        for t in terms {
            if t.is_empty() {
                return Err(Error::format("empty vocabulary term"));
            }
            if v.index.contains_key(&t) {
                return Err(Error::format(format!("duplicate vocabulary term `{t}`")));
            }
            v.intern(&t);
        }
        Ok(v)
    }

    pub fn intern(&mut self, term: &str) -> u32 {
        if let Some(&id) = self.index.get(term) {
            return id;
        }
        let id = self.terms.len() as u32;
        self.terms.push(term.to_owned());
        self.index.insert(term.to_owned(), id);
        id
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Tokenized documents over a vocabulary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenizedCorpus {
    pub docs: Vec<Vec<u32>>,
    pub vocabulary: Vocabulary,
}

impl TokenizedCorpus {
    /// Parse one document per line, terms separated by spaces.
    pub fn parse(text: &str) -> Self {
        let mut vocabulary = Vocabulary::new();
        let docs = text
            .lines()
            .map(|line| {
                line.split(' ')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| vocabulary.intern(t))
                    .collect()
            })
            .collect();
        TokenizedCorpus { docs, vocabulary }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        Ok(Self::parse(&text))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for d in &self.docs {
            let words: Vec<&str> = d.iter().map(|&t| self.vocabulary.term(t)).collect();
            out.push_str(&words.join(" "));
            out.push('\n');
        }
        out
    }

    /// Sorted, de-duplicated term ids of each document.
    pub fn presence_sets(&self) -> Vec<Vec<u32>> {
        self.docs
            .iter()
            .map(|d| {
                let mut s = d.clone();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect()
    }
}

/// A corpus in both representations: numeric rows and token lists.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusBundle {
    pub doc_ids: Vec<String>,
    pub matrix: DocMatrix,
    pub tokens: TokenizedCorpus,
}

impl CorpusBundle {
    /// Build a bundle, checking row alignment and matrix validity.
    /// Document ids default to the zero-based row number.
    pub fn new(matrix: DocMatrix, tokens: TokenizedCorpus) -> Result<Self> {
        if matrix.n_rows() != tokens.len() {
            return Err(Error::Alignment {
                what: format!(
                    "matrix has {} rows but token file has {} documents",
                    matrix.n_rows(),
                    tokens.len()
                ),
            });
        }
        matrix.validate()?;
        let doc_ids = (0..matrix.n_rows()).map(|i| i.to_string()).collect();
        Ok(CorpusBundle {
            doc_ids,
            matrix,
            tokens,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.tokens.vocabulary
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub fn load_matrix(path: &Path) -> Result<DocMatrix> {
    let text = read_to_string(path)?;
    DocMatrix::parse(&text).map_err(|e| e.with_path(path))
}

pub fn load_corpus(matrix_path: &Path, tokens_path: &Path) -> Result<CorpusBundle> {
    let matrix = load_matrix(matrix_path)?;
    let tokens = TokenizedCorpus::load(tokens_path)?;
    CorpusBundle::new(matrix, tokens)
}

pub fn save_corpus(bundle: &CorpusBundle, matrix_path: &Path, tokens_path: &Path) -> Result<()> {
    write_file(matrix_path, bundle.matrix.to_text().as_bytes())?;
    write_file(tokens_path, bundle.tokens.to_text().as_bytes())
}

/// Write through a temporary sibling and rename, so readers never observe a
/// partially written file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_owned(),
    });
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

/// Bag-of-words counts: entry `(i, t)` is the number of times term `t`
/// occurs in document `i`.
pub fn build_bow(tokens: &[Vec<u32>], vocabulary: &Vocabulary) -> Result<DocMatrix> {
    let mut rows = Vec::with_capacity(tokens.len());
    for (i, doc) in tokens.iter().enumerate() {
        if doc.is_empty() {
            return Err(Error::EmptyDocument { row: i });
        }
        let mut sorted = doc.clone();
        sorted.sort_unstable();
        let mut row: Vec<(u32, f64)> = Vec::new();
        for t in sorted {
            if t as usize >= vocabulary.len() {
                return Err(Error::format_at(
                    i + 1,
                    format!("term id {t} outside vocabulary of {}", vocabulary.len()),
                ));
            }
            match row.last_mut() {
                Some((c, n)) if *c == t => *n += 1.0,
                _ => row.push((t, 1.0)),
            }
        }
        rows.push(row);
    }
    Ok(DocMatrix::Sparse(SparseMatrix::new(
        vocabulary.len(),
        rows,
    )?))
}

/// SHA-256 over the matrix values (as 64-bit floats) and the token streams.
pub fn fingerprint(bundle: &CorpusBundle) -> String {
    let mut h = Sha256::new();
    h.update(b"simtopic-corpus-v1");
    let m = &bundle.matrix;
    h.update(if m.is_sparse() { b"S" } else { b"D" });
    h.update((m.n_rows() as u64).to_le_bytes());
    h.update((m.n_cols() as u64).to_le_bytes());
    match m {
        DocMatrix::Dense(d) => {
            for v in d.as_slice() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        DocMatrix::Sparse(s) => {
            for i in 0..s.n_rows() {
                let row = s.row(i);
                h.update((row.len() as u64).to_le_bytes());
                for &(c, v) in row {
                    h.update(c.to_le_bytes());
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
    }
    let vocab = &bundle.tokens.vocabulary;
    for doc in &bundle.tokens.docs {
        h.update((doc.len() as u64).to_le_bytes());
        for &t in doc {
            let term = vocab.term(t).as_bytes();
            h.update((term.len() as u64).to_le_bytes());
            h.update(term);
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(matrix: &str, tokens: &str) -> Result<CorpusBundle> {
        CorpusBundle::new(DocMatrix::parse(matrix)?, TokenizedCorpus::parse(tokens))
    }

    #[test]
    fn dense_shape_passthrough() {
        let b = bundle(
            "dense 3 4\n1 0 0 0\n0 1 0 0\n0.5 0.5 0 1\n",
            "a b\nb c\nc d\n",
        )
        .unwrap();
        assert_eq!(b.n_docs(), 3);
        assert_eq!(b.dim(), 4);
        assert_eq!(b.vocabulary().terms(), &["a", "b", "c", "d"]);
    }

    #[test]
    fn misaligned_tokens_rejected() {
        let err = bundle("dense 3 1\n1\n2\n3\n", "a\nb\n").unwrap_err();
        assert!(matches!(err, Error::Alignment { .. }));
    }

    #[test]
    fn zero_row_reports_index() {
        let err = bundle("dense 3 2\n1 0\n0 0\n0 1\n", "a\nb\nc\n").unwrap_err();
        assert!(matches!(err, Error::ZeroVector { row: 1 }));
        let err = bundle("sparse 2 3\n0:1\n\n", "a\nb\n").unwrap_err();
        assert!(matches!(err, Error::ZeroVector { row: 1 }));
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(
            DocMatrix::parse("dense 2 2\n1 2\n3\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            DocMatrix::parse("dense 2 2\n1 2\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            DocMatrix::parse("sparse 1 2\n0:1 5:1\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            DocMatrix::parse("sparse 1 2\n0:1.5\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            DocMatrix::parse("blob 1 1\n1\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            DocMatrix::parse("dense 1 1\nNaN\n").unwrap().validate(),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn bow_counts() {
        let vocab = Vocabulary::from_terms(vec!["a".into(), "b".into()]).unwrap();
        let m = build_bow(&[vec![0, 0, 1]], &vocab).unwrap();
        match m {
            DocMatrix::Sparse(s) => assert_eq!(s.row(0), &[(0, 2.0), (1, 1.0)]),
            _ => panic!("expected sparse"),
        }
        assert!(matches!(
            build_bow(&[vec![]], &vocab),
            Err(Error::EmptyDocument { row: 0 })
        ));
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(Vocabulary::from_terms(vec!["a".into(), "a".into()]).is_err());
        assert!(Vocabulary::from_terms(vec!["".into()]).is_err());
    }

    #[test]
    fn fingerprint_sensitivity() {
        let a = bundle("sparse 2 2\n0:1 1:2\n1:1\n", "a b b\nb\n").unwrap();
        assert_eq!(fingerprint(&a), fingerprint(&a.clone()));
        let b = bundle("sparse 2 2\n0:1 1:3\n1:1\n", "a b b\nb\n").unwrap();
        assert_ne!(fingerprint(&a), fingerprint(&b));
        let swapped = bundle("sparse 2 2\n1:1\n0:1 1:2\n", "b\na b b\n").unwrap();
        assert_ne!(fingerprint(&a), fingerprint(&swapped));
    }
}
