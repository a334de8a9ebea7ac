//! Coherence under an external word-embedding store.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::similarity::cosine;

use super::{mean, TopicScores};

/// Word vectors read from the plain text layout: a `<count> <dim>` header,
/// then `word v1 ... vdim` per line.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn from_pairs(
        dim: usize,
        pairs: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (w, v) in pairs {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            vectors.insert(w, v);
        }
        Ok(EmbeddingStore { dim, vectors })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format("empty embedding file"))?;
        let mut head = header.split_whitespace();
        let count: usize = head
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format_at(1, "bad word count"))?;
        let dim: usize = head
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format_at(1, "bad dimension"))?;
        let mut vectors = HashMap::with_capacity(count);
        let mut seen = 0;
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            seen += 1;
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line");
            let v: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format_at(i + 1, "bad vector component"))?;
            if v.len() != dim {
                return Err(Error::format_at(
                    i + 1,
                    format!("expected {dim} components, found {}", v.len()),
                ));
            }
            vectors.insert(word.to_owned(), v);
        }
        if seen != count {
            return Err(Error::format(format!(
                "header declares {count} words, found {seen}"
            )));
        }
        Ok(EmbeddingStore { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text).map_err(|e| e.with_path(path))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Per topic, the mean cosine similarity over unordered pairs of distinct
/// in-store words. Topics with fewer than two such words are flagged and
/// left out of the overall mean (`NaN` if every topic is flagged).
pub fn weco(
    topics: &[Vec<String>],
    store: &EmbeddingStore,
) -> Result<(TopicScores, Vec<Option<f64>>)> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    let mut flagged = Vec::new();
    let per: Vec<Option<f64>> = topics
        .iter()
        .enumerate()
        .map(|(t, words)| {
            let mut known: Vec<&str> = Vec::new();
            for w in words {
                if store.get(w).is_some() && !known.contains(&w.as_str()) {
                    known.push(w);
                }
            }
            let mut sims = Vec::new();
            for a in 0..known.len() {
                for b in (a + 1)..known.len() {
                    if let Some(s) =
                        cosine(store.get(known[a]).unwrap(), store.get(known[b]).unwrap())
                    {
                        sims.push(s);
                    }
                }
            }
            if sims.is_empty() {
                flagged.push(t);
                None
            } else {
                Some(mean(&sims))
            }
        })
        .collect();
    let valid: Vec<f64> = per.iter().flatten().copied().collect();
    let overall = if valid.is_empty() {
        f64::NAN
    } else {
        mean(&valid)
    };
    Ok((
        TopicScores {
            overall,
            per_topic: per.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            flagged,
        },
        per,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(t: &[&str]) -> Vec<String> {
        t.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parse_and_lookup() {
        let s = EmbeddingStore::parse("2 3\ncat 1 0 0\ndog 0.5 0.5 0\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), 3);
        assert_eq!(s.get("dog"), Some(&[0.5, 0.5, 0.0][..]));
        assert!(EmbeddingStore::parse("3 3\ncat 1 0 0\n").is_err());
        assert!(EmbeddingStore::parse("1 3\ncat 1 0\n").is_err());
    }

    #[test]
    fn repeated_word_is_flagged() {
        let s = EmbeddingStore::parse("2 2\na 1 0\nb 0 1\n").unwrap();
        let (scores, per) = weco(&[w(&["a", "a"]), w(&["a", "b"])], &s).unwrap();
        assert_eq!(scores.flagged, vec![0]);
        assert_eq!(per[0], None);
        assert_eq!(scores.overall, 0.0);
    }

    #[test]
    fn shared_vector_scores_one() {
        let s = EmbeddingStore::parse("3 2\na 1 1\nb 1 1\nc 1 1\n").unwrap();
        let (scores, _) = weco(&[w(&["a", "b", "c", "oov"])], &s).unwrap();
        assert!((scores.overall - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_store_rejected() {
        let s = EmbeddingStore::parse("0 2\n").unwrap();
        assert!(matches!(weco(&[w(&["a"])], &s), Err(Error::EmptyStore)));
    }
}
