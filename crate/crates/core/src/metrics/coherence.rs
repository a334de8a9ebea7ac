//! Co-occurrence based coherence: NPMI over documents and C_V over boolean
//! sliding windows.

use std::collections::HashMap;

use crate::corpus::TokenizedCorpus;

use super::{mean, MetricConfig, TopicScores};

/// Co-occurrence counts for a small set of tracked words.
#[derive(Debug, Clone)]
pub(crate) struct Cooccurrence {
    pub n_windows: u64,
    pub single: Vec<u64>,
    /// Row-major `tracked x tracked`; the diagonal equals `single`.
    pub joint: Vec<u64>,
}

impl Cooccurrence {
    fn new(tracked: usize) -> Self {
        Cooccurrence {
            n_windows: 0,
            single: vec![0; tracked],
            joint: vec![0; tracked * tracked],
        }
    }

    fn tracked(&self) -> usize {
        self.single.len()
    }

    fn add_window(&mut self, present: &[usize]) {
        self.n_windows += 1;
        let n = self.tracked();
        for (a, &i) in present.iter().enumerate() {
            self.single[i] += 1;
            for &j in &present[a..] {
                self.joint[i * n + j] += 1;
                if i != j {
                    self.joint[j * n + i] += 1;
                }
            }
        }
    }

    pub fn p(&self, i: usize) -> f64 {
        self.single[i] as f64 / self.n_windows as f64
    }

    pub fn p_joint(&self, i: usize, j: usize) -> f64 {
        self.joint[i * self.tracked() + j] as f64 / self.n_windows as f64
    }

    pub fn npmi(&self, i: usize, j: usize, eps: f64) -> f64 {
        npmi_value(self.p_joint(i, j), self.p(i), self.p(j), eps)
    }
}

/// Normalised PMI from probabilities, smoothed by `eps` in the joint term.
pub fn npmi_value(p_joint: f64, p_a: f64, p_b: f64, eps: f64) -> f64 {
    let joint = p_joint + eps;
    if joint >= 1.0 {
        // Both words fill every window: the limit of the expression is 1.
        return 1.0;
    }
    let v = (joint / (p_a * p_b)).ln() / -joint.ln();
    v.clamp(-1.0, 1.0)
}

/// Words of each topic that occur in the reference, as indices into a
/// shared tracked-word table.
pub(crate) struct TrackedTopics {
    pub ids: Vec<u32>,
    pub topics: Vec<Vec<usize>>,
}

pub(crate) fn track(topics: &[Vec<String>], reference: &TokenizedCorpus) -> TrackedTopics {
    let mut local: HashMap<u32, usize> = HashMap::new();
    let mut ids = Vec::new();
    let topics = topics
        .iter()
        .map(|words| {
            let mut out: Vec<usize> = Vec::new();
            for w in words {
                if let Some(id) = reference.vocabulary.id(w) {
                    let l = *local.entry(id).or_insert_with(|| {
                        ids.push(id);
                        ids.len() - 1
                    });
                    if !out.contains(&l) {
                        out.push(l);
                    }
                }
            }
            out
        })
        .collect();
    TrackedTopics { ids, topics }
}

fn local_map(ids: &[u32], vocab: usize) -> Vec<Option<usize>> {
    let mut map = vec![None; vocab];
    for (l, &id) in ids.iter().enumerate() {
        map[id as usize] = Some(l);
    }
    map
}

/// Each document is one window.
pub(crate) fn document_cooccurrence(reference: &TokenizedCorpus, ids: &[u32]) -> Cooccurrence {
    let map = local_map(ids, reference.vocabulary.len());
    let mut counts = Cooccurrence::new(ids.len());
    let mut present = Vec::new();
    for doc in &reference.docs {
        present.clear();
        for &t in doc {
            if let Some(l) = map[t as usize] {
                if !present.contains(&l) {
                    present.push(l);
                }
            }
        }
        present.sort_unstable();
        counts.add_window(&present);
    }
    counts
}

/// Boolean sliding windows of `width` tokens. A document no longer than the
/// window contributes one window holding the whole document.
pub(crate) fn window_cooccurrence(
    reference: &TokenizedCorpus,
    ids: &[u32],
    width: usize,
) -> Cooccurrence {
    let map = local_map(ids, reference.vocabulary.len());
    let mut counts = Cooccurrence::new(ids.len());
    let mut in_window = vec![0u32; ids.len()];
    let mut present = Vec::new();
    for doc in &reference.docs {
        let local: Vec<Option<usize>> = doc.iter().map(|&t| map[t as usize]).collect();
        let first = local.len().min(width);
        for l in local[..first].iter().flatten() {
            in_window[*l] += 1;
        }
        let mut start = 0;
        loop {
            present.clear();
            present.extend((0..ids.len()).filter(|&l| in_window[l] > 0));
            counts.add_window(&present);
            let end = start + width;
            if end >= local.len() {
                break;
            }
            if let Some(l) = local[start] {
                in_window[l] -= 1;
            }
            if let Some(l) = local[end] {
                in_window[l] += 1;
            }
            start += 1;
        }
        in_window.iter_mut().for_each(|c| *c = 0);
    }
    counts
}

/// Mean pairwise NPMI of each topic's descriptor words, co-occurrence
/// counted per document.
pub fn npmi(
    topics: &[Vec<String>],
    reference: &TokenizedCorpus,
    config: &MetricConfig,
) -> TopicScores {
    let tracked = track(topics, reference);
    let counts = document_cooccurrence(reference, &tracked.ids);
    let mut flagged = Vec::new();
    let per_topic = tracked
        .topics
        .iter()
        .enumerate()
        .map(|(t, words)| {
            if words.len() < 2 {
                flagged.push(t);
                return 0.0;
            }
            let mut vals = Vec::new();
            for a in 0..words.len() {
                for b in (a + 1)..words.len() {
                    vals.push(counts.npmi(words[a], words[b], config.npmi_epsilon));
                }
            }
            mean(&vals)
        })
        .collect::<Vec<_>>();
    TopicScores {
        overall: mean(&per_topic),
        per_topic,
        flagged,
    }
}

fn cosine_or_zero(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// C_V coherence: NPMI context vectors over sliding windows, one-set
/// segmentation and cosine against the topic's summed vector.
pub fn cv(
    topics: &[Vec<String>],
    reference: &TokenizedCorpus,
    config: &MetricConfig,
) -> TopicScores {
    let tracked = track(topics, reference);
    let counts = window_cooccurrence(reference, &tracked.ids, config.cv_window);
    let mut flagged = Vec::new();
    let per_topic = tracked
        .topics
        .iter()
        .enumerate()
        .map(|(t, words)| {
            if words.len() < 2 {
                flagged.push(t);
                return 0.0;
            }
            let vectors: Vec<Vec<f64>> = words
                .iter()
                .map(|&a| {
                    words
                        .iter()
                        .map(|&b| counts.npmi(a, b, config.npmi_epsilon))
                        .collect()
                })
                .collect();
            let mut total = vec![0.0; words.len()];
            for v in &vectors {
                for (s, x) in total.iter_mut().zip(v) {
                    *s += x;
                }
            }
            let sims: Vec<f64> = vectors.iter().map(|v| cosine_or_zero(v, &total)).collect();
            mean(&sims)
        })
        .collect::<Vec<_>>();
    TopicScores {
        overall: mean(&per_topic),
        per_topic,
        flagged,
    }
}
