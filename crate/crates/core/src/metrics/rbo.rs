//! Rank-biased overlap between descriptor lists, truncated at the list
//! length and normalised so that identical lists score exactly 1.

use std::collections::HashSet;

use crate::error::{Error, Result};

use super::{mean, TopicScores};

/// Truncated RBO of two equal-length ranked lists with persistence `p`.
pub fn rbo<T: Eq + std::hash::Hash>(s: &[T], t: &[T], p: f64) -> Result<f64> {
    if s.len() != t.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            found: t.len(),
        });
    }
    if s.is_empty() {
        return Ok(1.0);
    }
    let mut seen_s: HashSet<&T> = HashSet::new();
    let mut seen_t: HashSet<&T> = HashSet::new();
    let mut overlap = 0usize;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut weight = 1.0;
    for d in 0..s.len() {
        let (a, b) = (&s[d], &t[d]);
        if seen_s.insert(a) && seen_t.contains(a) {
            overlap += 1;
        }
        if seen_t.insert(b) && seen_s.contains(b) {
            overlap += 1;
        }
        let depth = (d + 1) as f64;
        num += weight * overlap as f64 / depth;
        den += weight * seen_s.len() as f64 / depth;
        weight *= p;
    }
    // `den` is the same sum evaluated for `s` against itself.
    Ok((num / den).clamp(0.0, 1.0))
}

/// 1 minus the mean pairwise RBO over all unordered topic pairs. The
/// per-topic breakdown is 1 minus that topic's mean RBO to the others.
pub fn irbo(topics: &[Vec<String>], p: f64) -> Result<TopicScores> {
    let k = topics.len();
    if k < 2 {
        return Err(Error::SingleTopic);
    }
    let len = topics[0].len();
    if let Some(bad) = topics.iter().find(|t| t.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: bad.len(),
        });
    }
    let mut pair = vec![0.0; k * k];
    let mut all = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let r = rbo(&topics[a], &topics[b], p)?;
            pair[a * k + b] = r;
            pair[b * k + a] = r;
            all.push(r);
        }
    }
    let per_topic = (0..k)
        .map(|a| {
            let others: Vec<f64> = (0..k)
                .filter(|&b| b != a)
                .map(|b| pair[a * k + b])
                .collect();
            1.0 - mean(&others)
        })
        .collect();
    Ok(TopicScores {
        overall: (1.0 - mean(&all)).clamp(0.0, 1.0),
        per_topic,
        flagged: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(t: &[&str]) -> Vec<String> {
        t.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_evaluated_case() {
        let r = rbo(&["a", "b"], &["a", "c"], 0.9).unwrap();
        assert!((r - 1.45 / 1.9).abs() < 1e-12);
        let s = irbo(&[w(&["a", "b"]), w(&["a", "c"])], 0.9).unwrap();
        assert!((s.overall - 0.23684).abs() < 1e-5);
        assert!((s.overall - (1.0 - 1.45 / 1.9)).abs() < 1e-12);
    }

    #[test]
    fn identical_and_disjoint() {
        let same = irbo(
            &[
                w(&["a", "b", "c"]),
                w(&["a", "b", "c"]),
                w(&["a", "b", "c"]),
            ],
            0.9,
        )
        .unwrap();
        assert_eq!(same.overall, 0.0);
        let disjoint = irbo(&[w(&["a", "b"]), w(&["c", "d"]), w(&["e", "f"])], 0.9).unwrap();
        assert_eq!(disjoint.overall, 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            irbo(&[w(&["a", "b"]), w(&["a"])], 0.9),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(irbo(&[w(&["a"])], 0.9), Err(Error::SingleTopic)));
    }

    #[test]
    fn swapped_order_counts_at_depth_two() {
        // depth 1: 0/1, depth 2: 2/2
        let r = rbo(&["a", "b"], &["b", "a"], 0.5).unwrap();
        assert!((r - 0.5 / 1.5).abs() < 1e-12);
    }
}
