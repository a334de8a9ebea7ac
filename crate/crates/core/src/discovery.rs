//! Iterative topic discovery.
//!
//! Each iteration removes duplicate points, builds the cosine matrix, maps
//! every point to its neighbours above the current threshold, keeps the
//! maximal neighbour sets as groups, averages them into centroids, folds
//! isolated points into their nearest group and restarts on the centroids.
//! Original documents are tracked through the centroid lineage, and one
//! document may feed several topics.

use crate::corpus::{CorpusBundle, DenseMatrix, DocMatrix, SparseMatrix};
use crate::error::{Error, Result};
use crate::schedule::ThresholdSchedule;
use crate::similarity::{cosine_matrix, dedup, dot_rows, row_norms, SimilarityMatrix};

/// Topics found at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSnapshot {
    pub iter: usize,
    pub cst_used: f64,
    pub centroids: DenseMatrix,
    /// Sorted original document indices behind each topic. Sets may overlap.
    pub membership: Vec<Vec<usize>>,
}

impl TopicSnapshot {
    pub fn k(&self) -> usize {
        self.centroids.n_rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryTrace {
    pub alpha: f64,
    pub max_iters: usize,
    pub n_docs: usize,
    pub snapshots: Vec<TopicSnapshot>,
    pub termination: Termination,
    /// Documents dropped as exact duplicates before the first iteration.
    pub duplicates_removed: usize,
    /// Total off-diagonal dot products evaluated across all iterations.
    pub kernel_pairs: u64,
}

impl DiscoveryTrace {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn last(&self) -> &TopicSnapshot {
        self.snapshots
            .last()
            .expect("trace always holds a snapshot")
    }

    /// Snapshots whose topic count lies in `lo..=hi`.
    pub fn in_k_range(&self, lo: usize, hi: usize) -> impl Iterator<Item = &TopicSnapshot> {
        self.snapshots
            .iter()
            .filter(move |s| (lo..=hi).contains(&s.k()))
    }

    /// The earliest snapshot with exactly `k` topics.
    pub fn with_k(&self, k: usize) -> Option<&TopicSnapshot> {
        self.snapshots.iter().find(|s| s.k() == k)
    }
}

/// For each point, the sorted indices of all points at or above `threshold`
/// (the point itself included).
pub fn neighbor_sets(sim: &SimilarityMatrix, threshold: f64) -> Vec<Vec<usize>> {
    (0..sim.n())
        .map(|i| {
            sim.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &s)| j == i || s >= threshold)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

fn is_sorted_subset(small: &[usize], big: &[usize]) -> bool {
    if small.len() > big.len() {
        return false;
    }
    let mut it = big.iter();
    'outer: for x in small {
        for y in it.by_ref() {
            if y == x {
                continue 'outer;
            }
            if y > x {
                return false;
            }
        }
        return false;
    }
    true
}

/// Keep only groups that are not contained in another group.
///
/// Groups are visited by size (largest first), then lexicographically, and
/// a group survives unless an already kept group contains it. The output
/// follows that visiting order, whatever the input order was.
pub fn prune_subsets(groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut order: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.sort_unstable();
            g.dedup();
            g
        })
        .collect();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

    let universe = order.iter().flatten().copied().max().map_or(0, |m| m + 1);
    // containing[x] = kept groups holding x
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); universe];
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for g in order {
        let covered = match g.iter().min_by_key(|&&x| containing[x].len()) {
            None => kept.iter().any(|_| true),
            Some(&pivot) => containing[pivot]
                .iter()
                .any(|&k| is_sorted_subset(&g, &kept[k])),
        };
        if !covered {
            let id = kept.len();
            for &x in &g {
                containing[x].push(id);
            }
            kept.push(g);
        }
    }
    kept
}

/// Mean of each group's rows, summed in ascending member order. Sparse
/// inputs produce sparse means holding the same values a dense computation
/// would.
pub(crate) fn group_means(groups: &[Vec<usize>], points: &DocMatrix) -> Result<DocMatrix> {
    let dim = points.n_cols();
    let mut acc = vec![0.0; dim];
    match points {
        DocMatrix::Dense(_) => {
            let mut data = Vec::with_capacity(groups.len() * dim);
            for (gi, g) in groups.iter().enumerate() {
                if g.is_empty() {
                    return Err(Error::EmptyGroup { group: gi });
                }
                acc.iter_mut().for_each(|a| *a = 0.0);
                for &i in g {
                    points.row(i).add_to(&mut acc);
                }
                let n = g.len() as f64;
                data.extend(acc.iter().map(|s| s / n));
            }
            Ok(DocMatrix::Dense(DenseMatrix::new(groups.len(), dim, data)?))
        }
        DocMatrix::Sparse(_) => {
            let mut touched: Vec<u32> = Vec::new();
            let mut mark = vec![false; dim];
            let mut rows = Vec::with_capacity(groups.len());
            for (gi, g) in groups.iter().enumerate() {
                if g.is_empty() {
                    return Err(Error::EmptyGroup { group: gi });
                }
                touched.clear();
                for &i in g {
                    if let crate::corpus::RowRef::Sparse(r) = points.row(i) {
                        for &(c, v) in r {
                            if !mark[c as usize] {
                                mark[c as usize] = true;
                                touched.push(c);
                            }
                            acc[c as usize] += v;
                        }
                    }
                }
                touched.sort_unstable();
                let n = g.len() as f64;
                let row: Vec<(u32, f64)> = touched
                    .iter()
                    .map(|&c| {
                        let v = acc[c as usize] / n;
                        acc[c as usize] = 0.0;
                        mark[c as usize] = false;
                        (c, v)
                    })
                    .collect();
                rows.push(row);
            }
            Ok(DocMatrix::Sparse(SparseMatrix::new(dim, rows)?))
        }
    }
}

/// Centroid of each group: the arithmetic mean of its member rows.
pub fn centroids(groups: &[Vec<usize>], points: &DocMatrix) -> Result<DenseMatrix> {
    group_means(groups, points).map(|m| m.to_dense())
}

/// Add each outlier to the group whose centroid is most cosine-similar to
/// it, lowest group index on ties. Centroids are not updated while
/// assigning; callers recompute them afterwards.
pub fn assign_outliers(
    groups: &[Vec<usize>],
    centroids: &DocMatrix,
    points: &DocMatrix,
    outliers: &[usize],
) -> Result<Vec<Vec<usize>>> {
    if groups.is_empty() {
        return Err(Error::NoGroups {
            threshold: f64::NAN,
        });
    }
    if centroids.n_rows() != groups.len() {
        return Err(Error::DimensionMismatch {
            expected: groups.len(),
            found: centroids.n_rows(),
        });
    }
    let cnorms = row_norms(centroids)?;
    let mut out = groups.to_vec();
    for &o in outliers {
        let row = points.row(o);
        let onorm = dot_rows(row, row).sqrt();
        if onorm == 0.0 {
            return Err(Error::ZeroVector { row: o });
        }
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (g, cn) in cnorms.iter().enumerate() {
            let s = dot_rows(row, centroids.row(g)) / (onorm * cn);
            if s > best_sim {
                best_sim = s;
                best = g;
            }
        }
        let members = &mut out[best];
        if let Err(pos) = members.binary_search(&o) {
            members.insert(pos, o);
        }
    }
    Ok(out)
}

/// Union of sorted lineage lists, using `mark` as scratch (left cleared).
fn union_lineage(
    parts: impl Iterator<Item = usize>,
    lineage: &[Vec<usize>],
    mark: &mut [bool],
) -> Vec<usize> {
    let mut out = Vec::new();
    for p in parts {
        for &d in &lineage[p] {
            if !mark[d] {
                mark[d] = true;
                out.push(d);
            }
        }
    }
    for &d in &out {
        mark[d] = false;
    }
    out.sort_unstable();
    out
}

/// Drop duplicate rows, folding their lineage into the kept representative.
fn dedup_with_lineage(
    points: DocMatrix,
    lineage: Vec<Vec<usize>>,
    mark: &mut [bool],
) -> (DocMatrix, Vec<Vec<usize>>, usize) {
    let d = dedup(&points);
    if d.duplicates.is_empty() {
        return (points, lineage, 0);
    }
    let mut sources: Vec<Vec<usize>> = d.kept.iter().map(|&k| vec![k]).collect();
    let pos_of = |orig: usize| d.kept.binary_search(&orig).expect("representative is kept");
    for (&removed, &rep) in &d.duplicates {
        sources[pos_of(rep)].push(removed);
    }
    let merged = sources
        .iter()
        .map(|s| union_lineage(s.iter().copied(), &lineage, mark))
        .collect();
    (d.matrix, merged, d.duplicates.len())
}

fn snapshot(iter: usize, cst: f64, points: &DocMatrix, lineage: &[Vec<usize>]) -> TopicSnapshot {
    TopicSnapshot {
        iter,
        cst_used: cst,
        centroids: points.to_dense(),
        membership: lineage.to_vec(),
    }
}

/// Run discovery on the bundle's document matrix.
pub fn discover(bundle: &CorpusBundle, schedule: &ThresholdSchedule) -> Result<DiscoveryTrace> {
    discover_points(&bundle.matrix, schedule)
}

/// Run discovery directly on a matrix of document vectors.
pub fn discover_points(points: &DocMatrix, schedule: &ThresholdSchedule) -> Result<DiscoveryTrace> {
    points.validate()?;
    let n_docs = points.n_rows();
    if n_docs == 0 {
        return Err(Error::InvalidConfig("corpus has no documents".into()));
    }
    let mut mark = vec![false; n_docs];
    let singletons: Vec<Vec<usize>> = (0..n_docs).map(|i| vec![i]).collect();
    let (mut current, mut lineage, duplicates_removed) =
        dedup_with_lineage(points.clone(), singletons, &mut mark);

    let mut snapshots = Vec::new();
    let mut kernel_pairs = 0u64;
    let mut iter = 1;
    let termination = loop {
        let cst = schedule.cst(iter)?;
        let m = current.n_rows();
        if m == 1 {
            if snapshots.is_empty() {
                snapshots.push(snapshot(iter, cst, &current, &lineage));
            }
            break Termination::Converged;
        }

        let sim = cosine_matrix(&current)?;
        kernel_pairs += sim.pairs_computed();
        let sets = neighbor_sets(&sim, cst);
        drop(sim);
        let outliers: Vec<usize> = (0..m).filter(|&i| sets[i].len() == 1).collect();
        if outliers.len() == m {
            // Nothing is within the threshold of anything else: the current
            // points are final.
            if snapshots.is_empty() {
                snapshots.push(snapshot(iter, cst, &current, &lineage));
            }
            break Termination::Converged;
        }

        let candidates: Vec<Vec<usize>> = sets.into_iter().filter(|s| s.len() > 1).collect();
        let mut groups = prune_subsets(&candidates);
        if !outliers.is_empty() {
            let pre = group_means(&groups, &current)?;
            groups = assign_outliers(&groups, &pre, &current, &outliers)?;
        }
        let means = group_means(&groups, &current)?;
        let merged: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| union_lineage(g.iter().copied(), &lineage, &mut mark))
            .collect();
        let (next, next_lineage, _) = dedup_with_lineage(means, merged, &mut mark);
        current = next;
        lineage = next_lineage;
        snapshots.push(snapshot(iter, cst, &current, &lineage));

        if current.n_rows() == 1 {
            break Termination::Converged;
        }
        if iter >= schedule.max_iters() {
            break Termination::MaxIters;
        }
        iter += 1;
    };

    Ok(DiscoveryTrace {
        alpha: schedule.alpha(),
        max_iters: schedule.max_iters(),
        n_docs,
        snapshots,
        termination,
        duplicates_removed,
        kernel_pairs,
    })
}
