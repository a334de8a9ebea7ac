//! Grid search over the threshold slope and the selection fraction.
//!
//! Discovery does not depend on beta, so each alpha is discovered once and
//! every (beta, snapshot) pair reuses that trace. For each topic count in
//! the window of interest the cell with the best C_V wins.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::corpus::CorpusBundle;
use crate::descriptors::{extract_descriptors, validate_beta, DescriptorConfig};
use crate::discovery::{discover, DiscoveryTrace};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EmbeddingStore, MetricConfig, MetricReport, TopicDistributions};
use crate::model::KeyValues;
use crate::schedule::ThresholdSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub k_min: usize,
    pub k_max: usize,
    pub top_n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            alphas: vec![2e-2, 1e-2, 5e-3, 1e-3, 1e-4, 1e-5, 1e-6],
            betas: vec![0.2, 0.15, 0.1, 0.05, 0.03],
            k_min: 5,
            k_max: 25,
            top_n: 10,
        }
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::format(format!("bad number `{s}` in `{key}`")))
        })
        .collect()
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.betas.is_empty() {
            return Err(Error::InvalidConfig(
                "alphas and betas must be non-empty".into(),
            ));
        }
        for &a in &self.alphas {
            ThresholdSchedule::new(a)?;
        }
        for &b in &self.betas {
            validate_beta(b)?;
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(Error::InvalidConfig(format!(
                "k range must satisfy 2 <= k_min <= k_max, got [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if self.top_n == 0 {
            return Err(Error::InvalidConfig("top_n must be at least 1".into()));
        }
        Ok(())
    }

    /// Read `alphas`, `betas`, `k_min`, `k_max` and `top_n` from
    /// `key = value` text; absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let mut spec = GridSpec::default();
        for (k, v) in &kv.0 {
            match k.as_str() {
                "alphas" => spec.alphas = parse_list(k, v)?,
                "betas" => spec.betas = parse_list(k, v)?,
                "k_min" => spec.k_min = kv.parse_value(k)?,
                "k_max" => spec.k_max = kv.parse_value(k)?,
                "top_n" => spec.top_n = kv.parse_value(k)?,
                other => return Err(Error::format(format!("unknown grid key `{other}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    /// A later snapshot of the same trace repeated an earlier topic count.
    DuplicateK,
    Failed(String),
}

impl CellStatus {
    pub fn as_text(&self) -> String {
        match self {
            CellStatus::Ok => "ok".into(),
            CellStatus::DuplicateK => "duplicate_k".into(),
            CellStatus::Failed(e) => format!("error: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    /// Topic count, or 0 when discovery itself failed.
    pub k: usize,
    /// Iteration of the snapshot this cell was built from.
    pub iter: usize,
    pub descriptors: Vec<Vec<String>>,
    pub report: Option<MetricReport>,
    pub status: CellStatus,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub spec: GridSpec,
    pub cells: Vec<GridCell>,
    /// Topic count to index into `cells`.
    pub winners: BTreeMap<usize, usize>,
    pub traces: Vec<Option<DiscoveryTrace>>,
    pub discover_runs: usize,
    pub warnings: Vec<String>,
}

fn score_cell(
    bundle: &CorpusBundle,
    snapshot: &crate::discovery::TopicSnapshot,
    beta: f64,
    spec: &GridSpec,
    metric_cfg: &MetricConfig,
    store: Option<&EmbeddingStore>,
) -> Result<(Vec<Vec<String>>, MetricReport)> {
    let desc = extract_descriptors(snapshot, bundle, &DescriptorConfig::new(beta, spec.top_n)?)?;
    let dist = TopicDistributions::from_selection(
        &desc.selected,
        &bundle.tokens,
        metric_cfg.kl_smoothing,
    )?;
    let report = evaluate(
        &desc.per_topic_words,
        &bundle.tokens,
        &dist,
        store,
        metric_cfg,
    )?;
    Ok((desc.per_topic_words, report))
}

fn cells_for_alpha(
    bundle: &CorpusBundle,
    alpha: f64,
    trace: &Result<DiscoveryTrace>,
    spec: &GridSpec,
    metric_cfg: &MetricConfig,
    store: Option<&EmbeddingStore>,
) -> Vec<GridCell> {
    let trace = match trace {
        Ok(t) => t,
        Err(e) => {
            return spec
                .betas
                .iter()
                .map(|&beta| GridCell {
                    alpha,
                    beta,
                    k: 0,
                    iter: 0,
                    descriptors: Vec::new(),
                    report: None,
                    status: CellStatus::Failed(e.to_string()),
                })
                .collect()
        }
    };
    let mut seen = Vec::new();
    let mut cells = Vec::new();
    for snap in trace.in_k_range(spec.k_min, spec.k_max) {
        let duplicate = seen.contains(&snap.k());
        seen.push(snap.k());
        for &beta in &spec.betas {
            let mut cell = GridCell {
                alpha,
                beta,
                k: snap.k(),
                iter: snap.iter,
                descriptors: Vec::new(),
                report: None,
                status: CellStatus::DuplicateK,
            };
            if !duplicate {
                match score_cell(bundle, snap, beta, spec, metric_cfg, store) {
                    Ok((d, r)) => {
                        cell.descriptors = d;
                        cell.report = Some(r);
                        cell.status = CellStatus::Ok;
                    }
                    Err(e) => cell.status = CellStatus::Failed(e.to_string()),
                }
            }
            cells.push(cell);
        }
    }
    cells
}

/// For each topic count, the best cell by C_V. Ties prefer the larger
/// alpha, then the larger beta, then the earlier cell.
pub fn select_winners(cells: &[GridCell]) -> BTreeMap<usize, usize> {
    let mut winners: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        let Some(r) = c.report.as_ref().filter(|_| c.status == CellStatus::Ok) else {
            continue;
        };
        let better = match winners.get(&c.k) {
            None => true,
            Some(&w) => {
                let best = &cells[w];
                let bcv = best
                    .report
                    .as_ref()
                    .expect("winner has a report")
                    .cv
                    .overall;
                let cv = r.cv.overall;
                cv > bcv
                    || (cv == bcv
                        && (c.alpha > best.alpha || (c.alpha == best.alpha && c.beta > best.beta)))
            }
        };
        if better {
            winners.insert(c.k, i);
        }
    }
    winners
}

pub fn run_grid(
    bundle: &CorpusBundle,
    spec: &GridSpec,
    metric_cfg: &MetricConfig,
    store: Option<&EmbeddingStore>,
) -> Result<GridResult> {
    spec.validate()?;
    metric_cfg.validate()?;
    let runs = AtomicUsize::new(0);
    let per_alpha: Vec<(Result<DiscoveryTrace>, Vec<GridCell>)> = spec
        .alphas
        .par_iter()
        .map(|&alpha| {
            runs.fetch_add(1, Ordering::Relaxed);
            let trace = ThresholdSchedule::new(alpha).and_then(|s| discover(bundle, &s));
            let cells = cells_for_alpha(bundle, alpha, &trace, spec, metric_cfg, store);
            (trace, cells)
        })
        .collect();
    let mut cells = Vec::new();
    let mut traces = Vec::new();
    let mut warnings = Vec::new();
    for (alpha, (trace, c)) in spec.alphas.iter().zip(per_alpha) {
        match trace {
            Ok(t) => {
                let ks: Vec<usize> = t.snapshots.iter().map(|s| s.k()).collect();
                for w in ks.windows(2).filter(|w| w[0] == w[1]) {
                    if (spec.k_min..=spec.k_max).contains(&w[0]) {
                        warnings.push(format!(
                            "alpha {alpha:?}: topic count {} repeats; earliest snapshot kept",
                            w[0]
                        ));
                    }
                }
                traces.push(Some(t));
            }
            Err(e) => {
                warnings.push(format!("alpha {alpha:?}: discovery failed: {e}"));
                traces.push(None);
            }
        }
        cells.extend(c);
    }
    let winners = select_winners(&cells);
    if winners.is_empty() {
        warnings.push(format!(
            "no snapshot has a topic count in [{}, {}]",
            spec.k_min, spec.k_max
        ));
    }
    Ok(GridResult {
        spec: spec.clone(),
        cells,
        winners,
        traces,
        discover_runs: runs.into_inner(),
        warnings,
    })
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:?}"),
        _ => "NA".into(),
    }
}

fn metric_columns(r: Option<&MetricReport>) -> String {
    match r {
        None => ["NA"; 6].join(" "),
        Some(r) => [
            num(Some(r.cv.overall)),
            num(Some(r.npmi.overall)),
            num(r.irbo_value()),
            num(r.weco_value()),
            num(Some(r.ts.overall)),
            num(r.td_value()),
        ]
        .join(" "),
    }
}

impl GridResult {
    pub fn winner(&self, k: usize) -> Option<&GridCell> {
        self.winners.get(&k).map(|&i| &self.cells[i])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# alpha beta k cv npmi irbo weco ts td status\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:?} {:?} {} {} {}",
                c.alpha,
                c.beta,
                c.k,
                metric_columns(c.report.as_ref()),
                c.status.as_text()
            );
        }
        out.push_str("# winners: k alpha beta cv npmi irbo weco ts td\n");
        for (&k, &i) in &self.winners {
            let c = &self.cells[i];
            let _ = writeln!(
                out,
                "winner {k} {:?} {:?} {}",
                c.alpha,
                c.beta,
                metric_columns(c.report.as_ref())
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "# warning: {w}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TopicScores;

    fn scores(v: f64) -> TopicScores {
        TopicScores {
            overall: v,
            per_topic: vec![v],
            flagged: vec![],
        }
    }

    fn cell(alpha: f64, beta: f64, k: usize, cv: f64) -> GridCell {
        GridCell {
            alpha,
            beta,
            k,
            iter: 1,
            descriptors: vec![],
            report: Some(MetricReport {
                cv: scores(cv),
                npmi: scores(0.0),
                irbo: None,
                weco: None,
                ts: scores(0.0),
                td: None,
                flags: vec![],
            }),
            status: CellStatus::Ok,
        }
    }

    #[test]
    fn winners_follow_tie_break() {
        let cells = vec![
            cell(1e-3, 0.2, 5, 0.4),
            cell(1e-2, 0.1, 5, 0.4),
            cell(1e-2, 0.2, 5, 0.4),
            cell(1e-2, 0.2, 5, 0.4),
            cell(1e-4, 0.2, 6, 0.3),
            cell(1e-4, 0.1, 6, 0.5),
        ];
        let w = select_winners(&cells);
        assert_eq!(w[&5], 2);
        assert_eq!(w[&6], 5);
    }

    #[test]
    fn removing_a_loser_keeps_winners() {
        let cells = vec![
            cell(1e-3, 0.2, 5, 0.4),
            cell(1e-2, 0.1, 5, 0.6),
            cell(1e-2, 0.2, 7, 0.1),
        ];
        let w = select_winners(&cells);
        let kept: Vec<GridCell> = cells.iter().skip(1).cloned().collect();
        let w2 = select_winners(&kept);
        assert_eq!(cells[w[&5]], kept[w2[&5]]);
        assert_eq!(cells[w[&7]], kept[w2[&7]]);
    }

    #[test]
    fn failed_cells_never_win() {
        let mut c = cell(1e-2, 0.2, 5, 0.9);
        c.status = CellStatus::Failed("x".into());
        assert!(select_winners(&[c]).is_empty());
    }

    #[test]
    fn spec_parsing_and_validation() {
        let s = GridSpec::parse("alphas = 0.02, 0.001\nbetas = 0.2\nk_min = 2\n").unwrap();
        assert_eq!(s.alphas, vec![0.02, 0.001]);
        assert_eq!(s.betas, vec![0.2]);
        assert_eq!((s.k_min, s.k_max), (2, 25));
        assert!(GridSpec::parse("k_min = 1\n").is_err());
        assert!(GridSpec::parse("alphas = 0\n").is_err());
        assert!(GridSpec::parse("betas = 1.5\n").is_err());
        assert!(GridSpec::parse("colour = red\n").is_err());
        GridSpec::default().validate().unwrap();
    }
}
