//! Topic quality measures.
//!
//! Coherence: NPMI, C_V and WECO. Diversity and distinctiveness: IRBO,
//! topic specificity (TS, KL divergence in nats) and topic dissimilarity
//! (TD, mean pairwise total variation).

mod coherence;
mod distribution;
mod rbo;
mod weco;

use std::fmt::Write as _;

pub use coherence::{cv, npmi, npmi_value};
pub use distribution::{
    kl_divergence, topic_dissimilarity, topic_specificity, topic_word_distributions,
    total_variation, TopicDistributions,
};
pub use rbo::{irbo, rbo};
pub use weco::{weco, EmbeddingStore};

use crate::corpus::TokenizedCorpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub npmi_epsilon: f64,
    pub cv_window: usize,
    pub rbo_p: f64,
    pub kl_smoothing: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            npmi_epsilon: 1e-12,
            cv_window: 110,
            rbo_p: 0.9,
            kl_smoothing: 1e-9,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.npmi_epsilon.is_nan()
            || self.npmi_epsilon <= 0.0
            || self.kl_smoothing.is_nan()
            || self.kl_smoothing <= 0.0
            || self.cv_window == 0
        {
            return Err(Error::InvalidConfig(
                "smoothing constants and window width must be positive".into(),
            ));
        }
        if !(self.rbo_p > 0.0 && self.rbo_p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rbo_p must lie in (0, 1), got {}",
                self.rbo_p
            )));
        }
        Ok(())
    }
}

/// A measure's overall value with its per-topic breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicScores {
    pub overall: f64,
    pub per_topic: Vec<f64>,
    /// Topics that could not be scored normally.
    pub flagged: Vec<usize>,
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// All six measures for one model. Optional entries are `None` when the
/// measure is unavailable; `flags` says why.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub cv: TopicScores,
    pub npmi: TopicScores,
    pub irbo: Option<TopicScores>,
    pub weco: Option<TopicScores>,
    pub ts: TopicScores,
    pub td: Option<TopicScores>,
    pub flags: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:?}"),
        _ => "NA".to_owned(),
    }
}

impl MetricReport {
    pub fn k(&self) -> usize {
        self.cv.per_topic.len()
    }

    pub fn irbo_value(&self) -> Option<f64> {
        self.irbo.as_ref().map(|s| s.overall)
    }

    pub fn weco_value(&self) -> Option<f64> {
        self.weco
            .as_ref()
            .map(|s| s.overall)
            .filter(|v| v.is_finite())
    }

    pub fn td_value(&self) -> Option<f64> {
        self.td.as_ref().map(|s| s.overall)
    }

    /// Flat `key = value` lines followed by one line per topic.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cv = {:?}", self.cv.overall);
        let _ = writeln!(out, "npmi = {:?}", self.npmi.overall);
        let _ = writeln!(out, "irbo = {}", opt(self.irbo_value()));
        let _ = writeln!(out, "weco = {}", opt(self.weco_value()));
        let _ = writeln!(out, "ts = {:?}", self.ts.overall);
        let _ = writeln!(out, "td = {}", opt(self.td_value()));
        let _ = writeln!(out, "ts_units = nats");
        let _ = writeln!(out, "td_variant = total_variation");
        for f in &self.flags {
            let _ = writeln!(out, "flag = {f}");
        }
        let at = |s: &Option<TopicScores>, t: usize| opt(s.as_ref().map(|s| s.per_topic[t]));
        for t in 0..self.k() {
            let _ = writeln!(
                out,
                "topic {t} cv={:?} npmi={:?} irbo={} weco={} ts={:?} td={}",
                self.cv.per_topic[t],
                self.npmi.per_topic[t],
                at(&self.irbo, t),
                at(&self.weco, t),
                self.ts.per_topic[t],
                at(&self.td, t),
            );
        }
        out
    }
}

/// Compute every measure for one set of descriptor lists.
pub fn evaluate(
    topics: &[Vec<String>],
    reference: &TokenizedCorpus,
    distributions: &TopicDistributions,
    store: Option<&EmbeddingStore>,
    config: &MetricConfig,
) -> Result<MetricReport> {
    config.validate()?;
    if distributions.k() != topics.len() {
        return Err(Error::DimensionMismatch {
            expected: topics.len(),
            found: distributions.k(),
        });
    }
    let mut flags = Vec::new();
    let cv = cv(topics, reference, config);
    let npmi = npmi(topics, reference, config);
    for (name, s) in [("cv", &cv), ("npmi", &npmi)] {
        for t in &s.flagged {
            flags.push(format!(
                "{name}: topic {t} has fewer than two reference words"
            ));
        }
    }
    let irbo = match irbo(topics, config.rbo_p) {
        Ok(s) => Some(s),
        Err(e @ Error::SingleTopic) => {
            flags.push(format!("irbo: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let weco = match store {
        None => {
            flags.push("weco: no embedding store given".to_owned());
            None
        }
        Some(store) => {
            let (s, _) = weco(topics, store)?;
            for t in &s.flagged {
                flags.push(format!("weco: topic {t} has fewer than two embedded words"));
            }
            Some(s)
        }
    };
    let ts = topic_specificity(distributions);
    let td = match topic_dissimilarity(distributions) {
        Ok(s) => Some(s),
        Err(e @ Error::SingleTopic) => {
            flags.push(format!("td: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        cv,
        npmi,
        irbo,
        weco,
        ts,
        td,
        flags,
    })
}
