//! Descriptor words for each topic.
//!
//! Each topic keeps the fraction `beta` of the corpus closest to its
//! centroid. Every (topic, selected document) pair becomes one labelled
//! instance, and each term is scored per topic by the one-vs-rest
//! information gain of its presence indicator.

use rayon::prelude::*;

use crate::corpus::{CorpusBundle, DenseMatrix};
use crate::discovery::TopicSnapshot;
use crate::error::{Error, Result};
use crate::similarity::{dot_dense, dot_rows, row_norms};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorConfig {
    pub beta: f64,
    pub top_n: usize,
}

impl DescriptorConfig {
    pub fn new(beta: f64, top_n: usize) -> Result<Self> {
        validate_beta(beta)?;
        if top_n == 0 {
            return Err(Error::InvalidConfig("top_n must be at least 1".into()));
        }
        Ok(DescriptorConfig { beta, top_n })
    }
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            beta: 0.2,
            top_n: 10,
        }
    }
}

pub(crate) fn validate_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "beta must satisfy 0 < beta <= 1, got {beta}"
        )));
    }
    Ok(())
}

/// How the per-topic term scores were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranking {
    InformationGain,
    /// Single-topic models have no label contrast; terms are ranked by the
    /// fraction of selected documents containing them.
    DocumentFrequency,
}

impl Ranking {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ranking::InformationGain => "information_gain",
            Ranking::DocumentFrequency => "document_frequency",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub per_topic_words: Vec<Vec<String>>,
    pub per_topic_ids: Vec<Vec<u32>>,
    /// `|vocab| x k` term scores; information gain in bits unless
    /// `ranking` says otherwise.
    pub ig_table: DenseMatrix,
    pub ranking: Ranking,
    /// Set when information gain was unavailable, with the reason.
    pub fallback_reason: Option<String>,
    /// Documents selected for each topic.
    pub selected: Vec<Vec<usize>>,
}

impl DescriptorSet {
    /// One line per topic, terms joined by commas.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for words in &self.per_topic_words {
            out.push_str(&words.join(","));
            out.push('\n');
        }
        out
    }
}

/// Number of documents kept per topic: `ceil(beta * n_docs)`, at least one.
pub fn selection_size(beta: f64, n_docs: usize) -> usize {
    // Decimal betas such as 0.15 are not exact in binary; the slack keeps
    // 0.15 * 20 at 3 instead of rounding up to 4.
    let raw = (beta * n_docs as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n_docs.max(1))
}

/// For each topic, the `ceil(beta * n_docs)` documents most cosine-similar
/// to its centroid, most similar first, ties by lower document index.
pub fn select_documents(
    snapshot: &TopicSnapshot,
    bundle: &CorpusBundle,
    beta: f64,
) -> Result<Vec<Vec<usize>>> {
    validate_beta(beta)?;
    let n = bundle.n_docs();
    if snapshot.centroids.n_cols() != bundle.dim() {
        return Err(Error::DimensionMismatch {
            expected: bundle.dim(),
            found: snapshot.centroids.n_cols(),
        });
    }
    let take = selection_size(beta, n);
    let doc_norms = row_norms(&bundle.matrix)?;
    (0..snapshot.k())
        .into_par_iter()
        .map(|t| {
            let c = snapshot.centroids.row(t);
            let cn = dot_dense(c, c).sqrt();
            if cn == 0.0 {
                return Err(Error::ZeroVector { row: t });
            }
            let sims: Vec<f64> = (0..n)
                .map(|i| {
                    dot_rows(bundle.matrix.row(i), crate::corpus::RowRef::Dense(c))
                        / (doc_norms[i] * cn)
                })
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
            order.truncate(take);
            Ok(order)
        })
        .collect()
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// One-vs-rest information gain from instance counts: `total` instances,
/// `in_topic` of them labelled with the topic, `with_term` containing the
/// term and `both` labelled and containing it.
pub fn ig_from_counts(total: usize, in_topic: usize, with_term: usize, both: usize) -> f64 {
    let n = total as f64;
    let h_label = binary_entropy(in_topic as f64 / n);
    let without = total - with_term;
    let mut cond = 0.0;
    if with_term > 0 {
        cond += with_term as f64 / n * binary_entropy(both as f64 / with_term as f64);
    }
    if without > 0 {
        cond += without as f64 / n * binary_entropy((in_topic - both) as f64 / without as f64);
    }
    (h_label - cond).max(0.0)
}

/// Per-topic document frequencies `df[t][w]` over the selected documents.
fn topic_doc_freqs(selected: &[Vec<usize>], presence: &[Vec<u32>], vocab: usize) -> Vec<Vec<u32>> {
    selected
        .iter()
        .map(|docs| {
            let mut df = vec![0u32; vocab];
            for &d in docs {
                for &w in &presence[d] {
                    df[w as usize] += 1;
                }
            }
            df
        })
        .collect()
}

/// Information gain (bits) of every vocabulary term for every topic, as a
/// `|vocab| x k` table.
pub fn information_gain(selected: &[Vec<usize>], bundle: &CorpusBundle) -> Result<DenseMatrix> {
    let k = selected.len();
    if k < 2 {
        return Err(Error::DegenerateLabel { topics: k });
    }
    if let Some(t) = selected.iter().position(Vec::is_empty) {
        return Err(Error::EmptyGroup { group: t });
    }
    let presence = bundle.tokens.presence_sets();
    let vocab = bundle.vocabulary().len();
    let df = topic_doc_freqs(selected, &presence, vocab);
    let total: usize = selected.iter().map(Vec::len).sum();
    let rows: Vec<f64> = (0..vocab)
        .into_par_iter()
        .flat_map_iter(|w| {
            let with_term: usize = df.iter().map(|d| d[w] as usize).sum();
            let df = &df;
            (0..k).map(move |t| {
                ig_from_counts(total, selected[t].len(), with_term, df[t][w] as usize)
            })
        })
        .collect();
    DenseMatrix::new(vocab, k, rows)
}

fn top_terms(scores: &DenseMatrix, topic: usize, top_n: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..scores.n_rows() as u32).collect();
    ids.sort_by(|&a, &b| {
        scores
            .get(b as usize, topic)
            .total_cmp(&scores.get(a as usize, topic))
            .then(a.cmp(&b))
    });
    ids.truncate(top_n);
    ids
}

/// Select documents, score terms and keep the `top_n` best per topic.
/// The same word may describe several topics.
pub fn extract_descriptors(
    snapshot: &TopicSnapshot,
    bundle: &CorpusBundle,
    config: &DescriptorConfig,
) -> Result<DescriptorSet> {
    if config.top_n == 0 {
        return Err(Error::InvalidConfig("top_n must be at least 1".into()));
    }
    let selected = select_documents(snapshot, bundle, config.beta)?;
    let (ig_table, ranking, fallback_reason) = match information_gain(&selected, bundle) {
        Ok(t) => (t, Ranking::InformationGain, None),
        Err(e @ Error::DegenerateLabel { .. }) => {
            let presence = bundle.tokens.presence_sets();
            let vocab = bundle.vocabulary().len();
            let df = topic_doc_freqs(&selected, &presence, vocab);
            let data = (0..vocab)
                .flat_map(|w| {
                    df.iter()
                        .zip(&selected)
                        .map(move |(d, s)| d[w] as f64 / s.len() as f64)
                })
                .collect();
            (
                DenseMatrix::new(vocab, selected.len(), data)?,
                Ranking::DocumentFrequency,
                Some(e.to_string()),
            )
        }
        Err(e) => return Err(e),
    };
    let vocab = bundle.vocabulary();
    let per_topic_ids: Vec<Vec<u32>> = (0..selected.len())
        .map(|t| top_terms(&ig_table, t, config.top_n))
        .collect();
    let per_topic_words = per_topic_ids
        .iter()
        .map(|ids| ids.iter().map(|&w| vocab.term(w).to_owned()).collect())
        .collect();
    Ok(DescriptorSet {
        per_topic_words,
        per_topic_ids,
        ig_table,
        ranking,
        fallback_reason,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocMatrix, TokenizedCorpus};

    fn snapshot(cents: &[Vec<f64>]) -> TopicSnapshot {
        TopicSnapshot {
            iter: 1,
            cst_used: 0.9,
            centroids: DenseMatrix::from_rows(cents).unwrap(),
            membership: vec![vec![0]; cents.len()],
        }
    }

    fn bundle(rows: &[Vec<f64>], tokens: &str) -> CorpusBundle {
        CorpusBundle::new(
            DocMatrix::Dense(DenseMatrix::from_rows(rows).unwrap()),
            TokenizedCorpus::parse(tokens),
        )
        .unwrap()
    }

    #[test]
    fn selection_size_rounding() {
        assert_eq!(selection_size(0.15, 20), 3);
        assert_eq!(selection_size(0.2, 20), 4);
        assert_eq!(selection_size(0.21, 20), 5);
        assert_eq!(selection_size(1.0, 7), 7);
        assert_eq!(selection_size(1e-9, 7), 1);
        assert_eq!(selection_size(0.03, 2472), 75);
    }

    #[test]
    fn beta_one_selects_everything() {
        let b = bundle(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            "a\nb\nc\n",
        );
        let s = snapshot(&[vec![1.0, 0.1], vec![0.1, 1.0]]);
        let sel = select_documents(&s, &b, 1.0).unwrap();
        for list in sel {
            let mut l = list.clone();
            l.sort();
            assert_eq!(l, vec![0, 1, 2]);
        }
    }

    #[test]
    fn tiny_beta_picks_exact_match() {
        let b = bundle(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            "a\nb\nc\n",
        );
        let s = snapshot(&[vec![2.0, 2.0]]);
        assert_eq!(select_documents(&s, &b, 1e-6).unwrap(), vec![vec![2]]);
        assert!(select_documents(&s, &b, 0.0).is_err());
        assert!(select_documents(&s, &b, 1.5).is_err());
    }

    #[test]
    fn constant_word_has_no_gain() {
        let b = bundle(
            &[
                vec![1.0, 0.0],
                vec![1.0, 0.1],
                vec![0.0, 1.0],
                vec![0.1, 1.0],
            ],
            "x a\nx a\nx b\nx b\n",
        );
        let ig = information_gain(&[vec![0, 1], vec![2, 3]], &b).unwrap();
        let x = b.vocabulary().id("x").unwrap() as usize;
        assert_eq!(ig.get(x, 0), 0.0);
        assert_eq!(ig.get(x, 1), 0.0);
        let a = b.vocabulary().id("a").unwrap() as usize;
        assert_eq!(ig.get(a, 0), 1.0);
    }

    #[test]
    fn single_topic_is_degenerate() {
        let b = bundle(&[vec![1.0, 0.0], vec![0.9, 0.1]], "a b\na c\n");
        assert!(matches!(
            information_gain(&[vec![0, 1]], &b),
            Err(Error::DegenerateLabel { topics: 1 })
        ));
        let s = snapshot(&[vec![1.0, 0.0]]);
        let d = extract_descriptors(&s, &b, &DescriptorConfig::new(1.0, 2).unwrap()).unwrap();
        assert_eq!(d.ranking, Ranking::DocumentFrequency);
        assert!(d.fallback_reason.is_some());
        assert_eq!(
            d.per_topic_words,
            vec![vec!["a".to_owned(), "b".to_owned()]]
        );
    }

    #[test]
    fn descriptor_lists_are_clipped_to_vocabulary() {
        let b = bundle(&[vec![1.0, 0.0], vec![0.0, 1.0]], "a\nb\n");
        let s = snapshot(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = extract_descriptors(&s, &b, &DescriptorConfig::new(0.5, 10).unwrap()).unwrap();
        // Both terms separate the two topics equally well; ties go to the
        // lower vocabulary id.
        assert_eq!(d.per_topic_words, vec![vec!["a", "b"], vec!["a", "b"]]);
        assert_eq!(d.to_text(), "a,b\na,b\n");
    }

    #[test]
    fn permuting_topics_permutes_columns() {
        let b = bundle(
            &[
                vec![1.0, 0.0],
                vec![1.0, 0.2],
                vec![0.0, 1.0],
                vec![0.3, 1.0],
                vec![0.5, 0.5],
            ],
            "a c\na d\nb c\nb e\nc d e\n",
        );
        let sel = vec![vec![0, 1, 4], vec![2, 3], vec![4, 1]];
        let ig = information_gain(&sel, &b).unwrap();
        let perm = vec![sel[2].clone(), sel[0].clone(), sel[1].clone()];
        let igp = information_gain(&perm, &b).unwrap();
        for w in 0..ig.n_rows() {
            assert_eq!(ig.get(w, 2), igp.get(w, 0));
            assert_eq!(ig.get(w, 0), igp.get(w, 1));
            assert_eq!(ig.get(w, 1), igp.get(w, 2));
        }
    }
}
