//! Trained models and their on-disk artifacts.
//!
//! Artifacts are plain text: `key = value` manifests, matrices in the
//! corpus dense layout, and one line per topic for index and word lists.
//! Floats are written in their shortest round-trip form, so re-running a
//! command on the same inputs reproduces every file byte for byte apart
//! from the `created_unix` manifest line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::corpus::{fingerprint, write_file, CorpusBundle, DenseMatrix};
use crate::descriptors::{extract_descriptors, DescriptorConfig, DescriptorSet, Ranking};
use crate::discovery::{DiscoveryTrace, Termination, TopicSnapshot};
use crate::error::{Error, Result};
use crate::metrics::MetricConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TIMESTAMP_KEY: &str = "created_unix";

/// Ordered `key = value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(pub Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_owned(), value.to_string()));
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format_at(i + 1, format!("expected key = value, got `{line}`"))
            })?;
            out.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        Ok(KeyValues(out))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::format(format!("missing key `{key}`")))
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Error::format(format!("bad value `{v}` for `{key}`")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn index_lists_to_text(lists: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for l in lists {
        let parts: Vec<String> = l.iter().map(usize::to_string).collect();
        out.push_str(&parts.join(" "));
        out.push('\n');
    }
    out
}

pub(crate) fn parse_index_lists(text: &str) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::format_at(i + 1, format!("bad index `{t}`")))
                })
                .collect()
        })
        .collect()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn snapshot_stem(iter: usize) -> String {
    format!("snapshot_{iter:04}")
}

/// Write a discovery trace: `trace.manifest` plus per-snapshot centroid and
/// membership files.
pub fn save_trace(trace: &DiscoveryTrace, corpus_fingerprint: &str, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let mut kv = KeyValues::default();
    kv.push("format", "simtopic-trace-1");
    kv.push("version", VERSION);
    kv.push("fingerprint", corpus_fingerprint);
    kv.push("alpha", f(trace.alpha));
    kv.push("max_iters", trace.max_iters);
    kv.push("n_docs", trace.n_docs);
    kv.push("duplicates_removed", trace.duplicates_removed);
    kv.push("dedup_each_iteration", true);
    kv.push("termination", trace.termination.as_str());
    kv.push("converged", trace.converged());
    kv.push("kernel_pairs", trace.kernel_pairs);
    kv.push("snapshots", trace.snapshots.len());
    for (i, s) in trace.snapshots.iter().enumerate() {
        kv.push(&format!("snapshot.{i}.iter"), s.iter);
        kv.push(&format!("snapshot.{i}.k"), s.k());
        kv.push(&format!("snapshot.{i}.cst"), f(s.cst_used));
        let stem = snapshot_stem(s.iter);
        write_file(
            &dir.join(format!("{stem}.centroids")),
            s.centroids.to_text().as_bytes(),
        )?;
        write_file(
            &dir.join(format!("{stem}.membership")),
            index_lists_to_text(&s.membership).as_bytes(),
        )?;
    }
    kv.push(TIMESTAMP_KEY, now_unix());
    write_file(&dir.join("trace.manifest"), kv.to_text().as_bytes())
}

/// A saved trace together with the fingerprint of the corpus it came from.
#[derive(Debug, Clone)]
pub struct SavedTrace {
    pub trace: DiscoveryTrace,
    pub fingerprint: String,
}

pub fn load_trace(dir: &Path) -> Result<SavedTrace> {
    let kv = KeyValues::parse(&read(&dir.join("trace.manifest"))?)?;
    let n: usize = kv.parse_value("snapshots")?;
    let mut snapshots = Vec::with_capacity(n);
    for i in 0..n {
        let iter: usize = kv.parse_value(&format!("snapshot.{i}.iter"))?;
        let cst_used: f64 = kv.parse_value(&format!("snapshot.{i}.cst"))?;
        let stem = snapshot_stem(iter);
        let centroids = DenseMatrix::parse(&read(&dir.join(format!("{stem}.centroids")))?)?;
        let membership = parse_index_lists(&read(&dir.join(format!("{stem}.membership")))?)?;
        if membership.len() != centroids.n_rows() {
            return Err(Error::Alignment {
                what: format!("snapshot {iter}: membership lines vs centroid rows"),
            });
        }
        snapshots.push(TopicSnapshot {
            iter,
            cst_used,
            centroids,
            membership,
        });
    }
    let termination = match kv.require("termination")? {
        "converged" => Termination::Converged,
        "max_iters" => Termination::MaxIters,
        other => return Err(Error::format(format!("unknown termination `{other}`"))),
    };
    Ok(SavedTrace {
        trace: DiscoveryTrace {
            alpha: kv.parse_value("alpha")?,
            max_iters: kv.parse_value("max_iters")?,
            n_docs: kv.parse_value("n_docs")?,
            snapshots,
            termination,
            duplicates_removed: kv.parse_value("duplicates_removed")?,
            kernel_pairs: kv.parse_value("kernel_pairs")?,
        },
        fingerprint: kv.require("fingerprint")?.to_owned(),
    })
}

/// Provenance recorded next to every saved model.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub fingerprint: String,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub iter: usize,
    pub top_n: usize,
    pub version: String,
    pub metric_config: MetricConfig,
    pub created_unix: u64,
}

impl RunManifest {
    fn to_kv(&self, model: &TopicModel) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("format", "simtopic-model-1");
        kv.push("version", &self.version);
        kv.push("fingerprint", &self.fingerprint);
        kv.push("alpha", f(self.alpha));
        kv.push("beta", f(self.beta));
        kv.push("k", self.k);
        kv.push("iter", self.iter);
        kv.push("cst", f(model.snapshot.cst_used));
        kv.push("top_n", self.top_n);
        kv.push("ranking", model.descriptors.ranking.as_str());
        if let Some(r) = &model.descriptors.fallback_reason {
            kv.push("ranking_fallback", r);
        }
        kv.push("vocab_size", model.vocabulary.len());
        kv.push("dim", model.snapshot.centroids.n_cols());
        kv.push("npmi_epsilon", f(self.metric_config.npmi_epsilon));
        kv.push("cv_window", self.metric_config.cv_window);
        kv.push("rbo_p", f(self.metric_config.rbo_p));
        kv.push("kl_smoothing", f(self.metric_config.kl_smoothing));
        kv.push(TIMESTAMP_KEY, self.created_unix);
        kv
    }
}

/// A selected snapshot with its descriptors and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub snapshot: TopicSnapshot,
    pub descriptors: DescriptorSet,
    pub vocabulary: Vec<String>,
    pub manifest: RunManifest,
}

impl TopicModel {
    pub fn build(
        snapshot: &TopicSnapshot,
        bundle: &CorpusBundle,
        alpha: f64,
        config: &DescriptorConfig,
        metric_config: MetricConfig,
    ) -> Result<Self> {
        let descriptors = extract_descriptors(snapshot, bundle, config)?;
        Ok(TopicModel {
            snapshot: snapshot.clone(),
            vocabulary: bundle.vocabulary().terms().to_vec(),
            manifest: RunManifest {
                fingerprint: fingerprint(bundle),
                alpha,
                beta: config.beta,
                k: snapshot.k(),
                iter: snapshot.iter,
                top_n: config.top_n,
                version: VERSION.to_owned(),
                metric_config,
                created_unix: now_unix(),
            },
            descriptors,
        })
    }

    pub fn k(&self) -> usize {
        self.snapshot.k()
    }

    pub fn centroids(&self) -> &DenseMatrix {
        &self.snapshot.centroids
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.vocabulary.iter().position(|w| w == word)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        write_file(
            &dir.join("centroids.txt"),
            self.snapshot.centroids.to_text().as_bytes(),
        )?;
        write_file(
            &dir.join("membership.txt"),
            index_lists_to_text(&self.snapshot.membership).as_bytes(),
        )?;
        write_file(
            &dir.join("selection.txt"),
            index_lists_to_text(&self.descriptors.selected).as_bytes(),
        )?;
        write_file(
            &dir.join("descriptors.txt"),
            self.descriptors.to_text().as_bytes(),
        )?;
        write_file(
            &dir.join("scores.txt"),
            self.descriptors.ig_table.to_text().as_bytes(),
        )?;
        let mut vocab = self.vocabulary.join("\n");
        vocab.push('\n');
        write_file(&dir.join("vocabulary.txt"), vocab.as_bytes())?;
        // Manifest last: its presence marks a complete model directory.
        write_file(
            &dir.join("model.manifest"),
            self.manifest.to_kv(self).to_text().as_bytes(),
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let kv = KeyValues::parse(&read(&dir.join("model.manifest"))?)?;
        let centroids = DenseMatrix::parse(&read(&dir.join("centroids.txt"))?)?;
        let membership = parse_index_lists(&read(&dir.join("membership.txt"))?)?;
        let selected = parse_index_lists(&read(&dir.join("selection.txt"))?)?;
        let ig_table = DenseMatrix::parse(&read(&dir.join("scores.txt"))?)?;
        let vocabulary: Vec<String> = read(&dir.join("vocabulary.txt"))?
            .lines()
            .map(str::to_owned)
            .collect();
        let per_topic_words: Vec<Vec<String>> = read(&dir.join("descriptors.txt"))?
            .lines()
            .map(|l| {
                if l.is_empty() {
                    Vec::new()
                } else {
                    l.split(',').map(str::to_owned).collect()
                }
            })
            .collect();
        let k = centroids.n_rows();
        if membership.len() != k
            || selected.len() != k
            || per_topic_words.len() != k
            || ig_table.n_cols() != k
        {
            return Err(Error::Alignment {
                what: "model files disagree on the topic count".into(),
            });
        }
        if ig_table.n_rows() != vocabulary.len() {
            return Err(Error::Alignment {
                what: "score table rows vs vocabulary size".into(),
            });
        }
        let per_topic_ids = per_topic_words
            .iter()
            .map(|ws| {
                ws.iter()
                    .map(|w| {
                        vocabulary
                            .iter()
                            .position(|v| v == w)
                            .map(|p| p as u32)
                            .ok_or_else(|| Error::UnknownWord(w.clone()))
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let ranking = match kv.require("ranking")? {
            "information_gain" => Ranking::InformationGain,
            "document_frequency" => Ranking::DocumentFrequency,
            other => return Err(Error::format(format!("unknown ranking `{other}`"))),
        };
        let manifest = RunManifest {
            fingerprint: kv.require("fingerprint")?.to_owned(),
            alpha: kv.parse_value("alpha")?,
            beta: kv.parse_value("beta")?,
            k: kv.parse_value("k")?,
            iter: kv.parse_value("iter")?,
            top_n: kv.parse_value("top_n")?,
            version: kv.require("version")?.to_owned(),
            metric_config: MetricConfig {
                npmi_epsilon: kv.parse_value("npmi_epsilon")?,
                cv_window: kv.parse_value("cv_window")?,
                rbo_p: kv.parse_value("rbo_p")?,
                kl_smoothing: kv.parse_value("kl_smoothing")?,
            },
            created_unix: kv.parse_value(TIMESTAMP_KEY)?,
        };
        Ok(TopicModel {
            snapshot: TopicSnapshot {
                iter: manifest.iter,
                cst_used: kv.parse_value("cst")?,
                centroids,
                membership,
            },
            descriptors: DescriptorSet {
                per_topic_words,
                per_topic_ids,
                ig_table,
                ranking,
                fallback_reason: kv.get("ranking_fallback").map(str::to_owned),
                selected,
            },
            vocabulary,
            manifest,
        })
    }
}

/// Drop the timestamp line so artifacts from separate runs can be compared.
pub fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_KEY))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocMatrix, TokenizedCorpus};
    use crate::discovery::discover;
    use crate::schedule::ThresholdSchedule;

    fn bundle() -> CorpusBundle {
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 90.0, 91.0, 92.0]
            .iter()
            .map(|d: &f64| vec![d.to_radians().cos(), d.to_radians().sin()])
            .collect();
        CorpusBundle::new(
            DocMatrix::Dense(DenseMatrix::from_rows(&rows).unwrap()),
            TokenizedCorpus::parse("a b\na c\nb a\nx y\ny z\nx z\n"),
        )
        .unwrap()
    }

    #[test]
    fn key_values_round_trip() {
        let kv = KeyValues::parse("# comment\na = 1\n\nb= two words \n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("two words"));
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
        assert!(KeyValues::parse("novalue\n").is_err());
    }

    #[test]
    fn trace_and_model_round_trip() {
        let b = bundle();
        let trace = discover(&b, &ThresholdSchedule::new(0.02).unwrap()).unwrap();
        assert_eq!(trace.last().k(), 2);
        let dir = tempfile::tempdir().unwrap();
        save_trace(&trace, &fingerprint(&b), &dir.path().join("trace")).unwrap();
        let back = load_trace(&dir.path().join("trace")).unwrap();
        assert_eq!(back.trace, trace);
        assert_eq!(back.fingerprint, fingerprint(&b));

        let model = TopicModel::build(
            trace.last(),
            &b,
            0.02,
            &DescriptorConfig::new(0.5, 2).unwrap(),
            MetricConfig::default(),
        )
        .unwrap();
        model.save(&dir.path().join("model")).unwrap();
        let loaded = TopicModel::load(&dir.path().join("model")).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn strip_timestamp_only_drops_that_line() {
        assert_eq!(
            strip_timestamp("a = 1\ncreated_unix = 5\nb = 2\n"),
            "a = 1\nb = 2\n"
        );
    }
}
