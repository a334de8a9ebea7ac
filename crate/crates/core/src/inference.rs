//! Topic affinities for unseen documents and for single words.

use rayon::prelude::*;

use crate::corpus::{DenseMatrix, DocMatrix};
use crate::error::{Error, Result};
use crate::model::TopicModel;
use crate::similarity::cosine;

/// Numerically stable softmax of `scores / temperature`.
pub fn softmax(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if temperature.is_nan() || temperature <= 0.0 || temperature.is_infinite() {
        return Err(Error::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| ((s - max) / temperature).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Softmax over the cosine similarities between `doc` and each centroid.
pub fn affinity_to_centroids(
    doc: &[f64],
    centroids: &DenseMatrix,
    temperature: f64,
) -> Result<Vec<f64>> {
    if doc.len() != centroids.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: centroids.n_cols(),
            found: doc.len(),
        });
    }
    if doc.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector { row: 0 });
    }
    let sims: Vec<f64> = centroids
        .rows()
        .enumerate()
        .map(|(t, c)| cosine(doc, c).ok_or(Error::ZeroVector { row: t }))
        .collect::<Result<_>>()?;
    softmax(&sims, temperature)
}

pub fn affinity(doc: &[f64], model: &TopicModel, temperature: f64) -> Result<Vec<f64>> {
    affinity_to_centroids(doc, model.centroids(), temperature)
}

/// Row-wise affinity for every document in `docs`; row `i` of the result
/// is the distribution for document `i`.
pub fn batch_affinity(
    docs: &DocMatrix,
    model: &TopicModel,
    temperature: f64,
) -> Result<DenseMatrix> {
    let k = model.k();
    let dim = docs.n_cols();
    let rows: Vec<Vec<f64>> = (0..docs.n_rows())
        .into_par_iter()
        .map(|i| {
            affinity(&docs.row(i).to_dense(dim), model, temperature).map_err(|e| match e {
                Error::ZeroVector { .. } => Error::ZeroVector { row: i },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    DenseMatrix::new(rows.len(), k, rows.concat())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordAffinity {
    pub distribution: Vec<f64>,
    /// The word's score row was all zero and the distribution is uniform.
    pub uniform_fallback: bool,
}

/// The word's per-topic scores normalised to sum to one.
pub fn word_affinity(word: &str, model: &TopicModel) -> Result<WordAffinity> {
    let w = model
        .word_id(word)
        .ok_or_else(|| Error::UnknownWord(word.to_owned()))?;
    Ok(normalize_scores(model.descriptors.ig_table.row(w)))
}

pub fn normalize_scores(row: &[f64]) -> WordAffinity {
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        WordAffinity {
            distribution: row.iter().map(|v| v / total).collect(),
            uniform_fallback: false,
        }
    } else {
        let k = row.len();
        WordAffinity {
            distribution: vec![1.0 / k as f64; k],
            uniform_fallback: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centroids(angles: &[f64]) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = angles
            .iter()
            .map(|d: &f64| vec![d.to_radians().cos(), d.to_radians().sin()])
            .collect();
        DenseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn equidistant_document_is_uniform() {
        let c = centroids(&[0.0, 90.0]);
        let p = affinity_to_centroids(&[1.0, 1.0], &c, 1.0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        let p = affinity_to_centroids(&[0.0, 0.0], &c, 1.0);
        assert!(matches!(p, Err(Error::ZeroVector { .. })));
    }

    #[test]
    fn softmax_matches_scalar_oracle() {
        let s = [0.9, 0.5, 0.1];
        let p = softmax(&s, 1.0).unwrap();
        let z: f64 = s.iter().map(|x: &f64| x.exp()).sum();
        for (pi, si) in p.iter().zip(s) {
            assert!((pi - si.exp() / z).abs() < 1e-12);
        }
        assert!(softmax(&s, 0.0).is_err());
    }

    #[test]
    fn low_temperature_is_one_hot() {
        let c = centroids(&[0.0, 50.0, 100.0]);
        let p = affinity_to_centroids(&[1.0, 0.1], &c, 1e-6).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_checked() {
        let c = centroids(&[0.0]);
        assert!(matches!(
            affinity_to_centroids(&[1.0, 0.0, 0.0], &c, 1.0),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn word_scores_normalize() {
        assert_eq!(
            normalize_scores(&[0.0, 0.0, 2.0]).distribution,
            vec![0.0, 0.0, 1.0]
        );
        let u = normalize_scores(&[0.0, 0.0]);
        assert!(u.uniform_fallback);
        assert_eq!(u.distribution, vec![0.5, 0.5]);
    }
}
