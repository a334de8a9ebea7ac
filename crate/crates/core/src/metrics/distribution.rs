//! Topic-word distributions and the distinctiveness measures built on them.

use crate::corpus::{CorpusBundle, DenseMatrix, TokenizedCorpus};
use crate::descriptors::select_documents;
use crate::discovery::TopicSnapshot;
use crate::error::{Error, Result};

use super::{mean, MetricConfig, TopicScores};

/// Smoothed `P(w | t)` for each topic plus the corpus-wide `P(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistributions {
    /// `k x |vocab|`, each row sums to 1.
    pub topics: DenseMatrix,
    pub corpus: Vec<f64>,
}

fn smoothed(counts: &[f64], smoothing: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + smoothing * counts.len() as f64;
    counts.iter().map(|c| (c + smoothing) / total).collect()
}

impl TopicDistributions {
    /// Term counts over each topic's selected documents and over the whole
    /// corpus, with additive smoothing.
    pub fn from_selection(
        selected: &[Vec<usize>],
        tokens: &TokenizedCorpus,
        smoothing: f64,
    ) -> Result<Self> {
        if smoothing.is_nan() || smoothing <= 0.0 {
            return Err(Error::InvalidConfig("smoothing must be positive".into()));
        }
        let vocab = tokens.vocabulary.len();
        let mut corpus_counts = vec![0.0; vocab];
        for doc in &tokens.docs {
            for &w in doc {
                corpus_counts[w as usize] += 1.0;
            }
        }
        let mut data = Vec::with_capacity(selected.len() * vocab);
        for docs in selected {
            let mut counts = vec![0.0; vocab];
            for &d in docs {
                let doc = tokens.docs.get(d).ok_or(Error::DimensionMismatch {
                    expected: tokens.len(),
                    found: d + 1,
                })?;
                for &w in doc {
                    counts[w as usize] += 1.0;
                }
            }
            data.extend(smoothed(&counts, smoothing));
        }
        Ok(TopicDistributions {
            topics: DenseMatrix::new(selected.len(), vocab, data)?,
            corpus: smoothed(&corpus_counts, smoothing),
        })
    }

    pub fn k(&self) -> usize {
        self.topics.n_rows()
    }
}

/// Distributions estimated from the same beta-selected documents used for
/// the descriptors.
pub fn topic_word_distributions(
    snapshot: &TopicSnapshot,
    bundle: &CorpusBundle,
    beta: f64,
    config: &MetricConfig,
) -> Result<TopicDistributions> {
    let selected = select_documents(snapshot, bundle, beta)?;
    TopicDistributions::from_selection(&selected, &bundle.tokens, config.kl_smoothing)
}

/// `KL(p || q)` in nats, with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Half the L1 distance between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    (0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()).clamp(0.0, 1.0)
}

/// Mean KL divergence from each topic's distribution to the corpus one.
pub fn topic_specificity(d: &TopicDistributions) -> TopicScores {
    let per_topic: Vec<f64> = (0..d.k())
        .map(|t| kl_divergence(d.topics.row(t), &d.corpus))
        .collect();
    TopicScores {
        overall: mean(&per_topic),
        per_topic,
        flagged: Vec::new(),
    }
}

/// Mean pairwise total-variation distance between topic distributions.
pub fn topic_dissimilarity(d: &TopicDistributions) -> Result<TopicScores> {
    let k = d.k();
    if k < 2 {
        return Err(Error::SingleTopic);
    }
    let mut pair = vec![0.0; k * k];
    let mut all = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let v = total_variation(d.topics.row(a), d.topics.row(b));
            pair[a * k + b] = v;
            pair[b * k + a] = v;
            all.push(v);
        }
    }
    let per_topic = (0..k)
        .map(|a| {
            let others: Vec<f64> = (0..k)
                .filter(|&b| b != a)
                .map(|b| pair[a * k + b])
                .collect();
            mean(&others)
        })
        .collect();
    Ok(TopicScores {
        overall: mean(&all),
        per_topic,
        flagged: Vec::new(),
    })
}
