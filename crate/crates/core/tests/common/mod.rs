//! Shared fixtures and an independent reference implementation of the
//! discovery loop for integration tests.

#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, Zipf};

use simtopic::corpus::{
    build_bow, CorpusBundle, DenseMatrix, DocMatrix, TokenizedCorpus, Vocabulary,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn at_deg(deg: f64) -> Vec<f64> {
    let r = deg.to_radians();
    vec![r.cos(), r.sin()]
}

/// Dense bundle whose token line for row `i` names its group `labels[i]`.
pub fn labelled_bundle(rows: &[Vec<f64>], labels: &[usize]) -> CorpusBundle {
    let text: String = labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("g{l} g{l}w{} shared\n", i % 3))
        .collect();
    CorpusBundle::new(
        DocMatrix::Dense(DenseMatrix::from_rows(rows).unwrap()),
        TokenizedCorpus::parse(&text),
    )
    .unwrap()
}

pub struct Fixture {
    pub name: &'static str,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Fixture {
    pub fn bundle(&self) -> CorpusBundle {
        labelled_bundle(&self.rows, &self.labels)
    }
}

/// 12 points in three tight angular blobs at 0, 120 and 240 degrees with
/// varying radii. Within a blob cosine exceeds 0.99, across blobs it is
/// below 0.9.
pub fn three_blobs() -> Fixture {
    let mut r = rng(3);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (b, center) in [0.0, 120.0, 240.0].iter().enumerate() {
        for _ in 0..4 {
            let ang = center + r.gen_range(-2.0..2.0);
            let radius = r.gen_range(0.5..3.0);
            rows.push(at_deg(ang).iter().map(|x| x * radius).collect());
            labels.push(b);
        }
    }
    Fixture {
        name: "three_blobs",
        rows,
        labels,
    }
}

/// Four points 10 degrees apart: at threshold 0.98 the middle two belong
/// to both maximal neighbour sets.
pub fn overlap() -> Fixture {
    Fixture {
        name: "overlap",
        rows: [0.0, 10.0, 20.0, 30.0].iter().map(|&d| at_deg(d)).collect(),
        labels: vec![0, 0, 1, 1],
    }
}

pub fn all_identical() -> Fixture {
    Fixture {
        name: "all_identical",
        rows: vec![vec![0.6, 0.8]; 7],
        labels: vec![0; 7],
    }
}

/// Axis directions: every pair is orthogonal or opposite.
pub fn all_orthogonal() -> Fixture {
    Fixture {
        name: "all_orthogonal",
        rows: vec![
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![-3.0, 0.0],
            vec![0.0, -0.5],
        ],
        labels: vec![0, 1, 2, 3],
    }
}

pub fn small_fixtures() -> Vec<Fixture> {
    vec![three_blobs(), overlap(), all_identical(), all_orthogonal()]
}

/// Clustered random dense points for property checks.
pub fn random_points(r: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let n_centers = r.gen_range(1..=5);
    let centers: Vec<Vec<f64>> = (0..n_centers)
        .map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect();
    let spread = r.gen_range(0.001..0.3);
    (0..n)
        .map(|_| {
            let c = &centers[r.gen_range(0..n_centers)];
            let mut v: Vec<f64> = c.iter().map(|x| x + r.gen_range(-spread..spread)).collect();
            if v.iter().all(|&x| x == 0.0) {
                v[0] = 1.0;
            }
            v
        })
        .collect()
}

/// Shape targets for the short-text fixture.
pub const TWEETS_DOCS: usize = 2472;
pub const TWEETS_VOCAB: usize = 5098;
pub const TWEETS_MEAN_LEN: f64 = 8.56;

/// A short-text corpus generated from a mixture model: each document picks
/// one of 89 themes, draws `1 + Poisson(7.56)` tokens from a mixture of the
/// theme's Zipfian word list and a corpus-wide Zipfian background, and is
/// sometimes an exact or one-token-edited copy of an earlier document.
/// Unused terms are then swapped in for repeated background tokens so the
/// vocabulary has exactly `TWEETS_VOCAB` terms.
pub fn tweets_like(seed: u64) -> (CorpusBundle, Vec<usize>) {
    let mut r = rng(seed);
    let n_themes = 89;
    let theme_words = 40;
    let topic_share = 0.75;
    let p_copy = 0.15;
    let p_edit = 0.10;

    let mut perm: Vec<u32> = (0..TWEETS_VOCAB as u32).collect();
    perm.shuffle(&mut r);
    let background = perm.clone();
    let themes: Vec<Vec<u32>> = (0..n_themes)
        .map(|_| {
            let mut all: Vec<u32> = (0..TWEETS_VOCAB as u32).collect();
            all.partial_shuffle(&mut r, theme_words);
            all[..theme_words].to_vec()
        })
        .collect();
    let theme_pick: Zipf<f64> = Zipf::new(n_themes as u64, 0.7).unwrap();
    let word_pick: Zipf<f64> = Zipf::new(theme_words as u64, 1.1).unwrap();
    let bg_pick: Zipf<f64> = Zipf::new(TWEETS_VOCAB as u64, 1.0).unwrap();
    let length: Poisson<f64> = Poisson::new(TWEETS_MEAN_LEN - 1.0).unwrap();

    let mut docs: Vec<Vec<u32>> = Vec::with_capacity(TWEETS_DOCS);
    let mut labels: Vec<usize> = Vec::with_capacity(TWEETS_DOCS);
    // Each token remembers whether it came from the background.
    let mut from_bg: Vec<Vec<bool>> = Vec::with_capacity(TWEETS_DOCS);
    for _ in 0..TWEETS_DOCS {
        let u: f64 = r.gen();
        if !docs.is_empty() && u < p_copy + p_edit {
            let src = r.gen_range(0..docs.len());
            let mut d = docs[src].clone();
            let mut bg = from_bg[src].clone();
            let theme = labels[src];
            if u >= p_copy {
                let pos = r.gen_range(0..d.len());
                d[pos] = themes[theme][word_pick.sample(&mut r) as usize - 1];
                bg[pos] = false;
            }
            docs.push(d);
            from_bg.push(bg);
            labels.push(theme);
            continue;
        }
        let theme = theme_pick.sample(&mut r) as usize - 1;
        let len = 1 + length.sample(&mut r) as usize;
        let mut d = Vec::with_capacity(len);
        let mut bg = Vec::with_capacity(len);
        for _ in 0..len {
            if r.gen_bool(topic_share) {
                d.push(themes[theme][word_pick.sample(&mut r) as usize - 1]);
                bg.push(false);
            } else {
                d.push(background[bg_pick.sample(&mut r) as usize - 1]);
                bg.push(true);
            }
        }
        docs.push(d);
        from_bg.push(bg);
        labels.push(theme);
    }

    let mut counts = vec![0usize; TWEETS_VOCAB];
    for d in &docs {
        for &w in d {
            counts[w as usize] += 1;
        }
    }
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        for (j, _) in d.iter().enumerate() {
            if from_bg[i][j] {
                slots.push((i, j));
            }
        }
    }
    slots.shuffle(&mut r);
    let mut slots = slots.into_iter();
    for w in 0..TWEETS_VOCAB {
        if counts[w] > 0 {
            continue;
        }
        let (i, j) = slots
            .by_ref()
            .find(|&(i, j)| counts[docs[i][j] as usize] > 1)
            .expect("enough repeated background tokens");
        counts[docs[i][j] as usize] -= 1;
        docs[i][j] = w as u32;
        counts[w] += 1;
    }

    let text: String = docs
        .iter()
        .map(|d| {
            let words: Vec<String> = d.iter().map(|w| format!("w{w:04}")).collect();
            words.join(" ") + "\n"
        })
        .collect();
    let tokens = TokenizedCorpus::parse(&text);
    let matrix = build_bow(&tokens.docs, &tokens.vocabulary).unwrap();
    (CorpusBundle::new(matrix, tokens).unwrap(), labels)
}

/// A vocabulary with `n` synthetic terms, for random descriptor draws.
pub fn vocabulary_terms(v: &Vocabulary) -> Vec<String> {
    v.terms().to_vec()
}

// ---------------------------------------------------------------------------
// Reference discovery loop: plain nested loops over `Vec<f64>` rows, sharing
// no code with the library.

#[derive(Debug, Clone, PartialEq)]
pub struct RefSnapshot {
    pub iter: usize,
    pub topics: Vec<(Vec<usize>, Vec<f64>)>,
}

fn ref_cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

fn ref_mean(rows: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = rows[0].len();
    let mut out = vec![0.0; dim];
    for c in 0..dim {
        let mut s = 0.0;
        for &m in members {
            s += rows[m][c];
        }
        out[c] = s / members.len() as f64;
    }
    out
}

fn ref_union(parts: &[usize], lineage: &[Vec<usize>]) -> Vec<usize> {
    let mut out: Vec<usize> = parts
        .iter()
        .flat_map(|&p| lineage[p].iter().copied())
        .collect();
    out.sort();
    out.dedup();
    out
}

fn ref_dedup(rows: Vec<Vec<f64>>, lineage: Vec<Vec<usize>>) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut out_rows: Vec<Vec<f64>> = Vec::new();
    let mut out_lin: Vec<Vec<usize>> = Vec::new();
    for (r, l) in rows.into_iter().zip(lineage) {
        match out_rows.iter().position(|o| *o == r) {
            Some(p) => {
                out_lin[p].extend(l);
                out_lin[p].sort();
                out_lin[p].dedup();
            }
            None => {
                out_rows.push(r);
                out_lin.push(l);
            }
        }
    }
    (out_rows, out_lin)
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// Snapshots of the reference loop, plus whether it stopped by converging.
pub fn reference_discover(
    rows: &[Vec<f64>],
    alpha: f64,
    max_iters: usize,
) -> (Vec<RefSnapshot>, bool) {
    let lineage: Vec<Vec<usize>> = (0..rows.len()).map(|i| vec![i]).collect();
    let (mut pts, mut lin) = ref_dedup(rows.to_vec(), lineage);
    let mut snaps: Vec<RefSnapshot> = Vec::new();
    let snap = |iter: usize, pts: &[Vec<f64>], lin: &[Vec<usize>]| RefSnapshot {
        iter,
        topics: lin.iter().cloned().zip(pts.iter().cloned()).collect(),
    };
    let mut iter = 1;
    loop {
        let t = (iter as f64 - alpha) / iter as f64;
        let m = pts.len();
        if m == 1 {
            if snaps.is_empty() {
                snaps.push(snap(iter, &pts, &lin));
            }
            return (snaps, true);
        }
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for i in 0..m {
            let mut s = Vec::new();
            for j in 0..m {
                if i == j || ref_cos(&pts[i], &pts[j]) >= t {
                    s.push(j);
                }
            }
            sets.push(s);
        }
        let outliers: Vec<usize> = (0..m).filter(|&i| sets[i].len() == 1).collect();
        if outliers.len() == m {
            if snaps.is_empty() {
                snaps.push(snap(iter, &pts, &lin));
            }
            return (snaps, true);
        }
        let mut cand: Vec<Vec<usize>> = sets.into_iter().filter(|s| s.len() > 1).collect();
        cand.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for c in cand {
            if !groups.iter().any(|g| is_subset(&c, g)) {
                groups.push(c);
            }
        }
        let pre: Vec<Vec<f64>> = groups.iter().map(|g| ref_mean(&pts, g)).collect();
        for &o in &outliers {
            let mut best = 0;
            for g in 1..groups.len() {
                if ref_cos(&pts[o], &pre[g]) > ref_cos(&pts[o], &pre[best]) {
                    best = g;
                }
            }
            groups[best].push(o);
            groups[best].sort();
        }
        let next: Vec<Vec<f64>> = groups.iter().map(|g| ref_mean(&pts, g)).collect();
        let next_lin: Vec<Vec<usize>> = groups.iter().map(|g| ref_union(g, &lin)).collect();
        let (p, l) = ref_dedup(next, next_lin);
        pts = p;
        lin = l;
        snaps.push(snap(iter, &pts, &lin));
        if pts.len() == 1 {
            return (snaps, true);
        }
        if iter >= max_iters {
            return (snaps, false);
        }
        iter += 1;
    }
}
