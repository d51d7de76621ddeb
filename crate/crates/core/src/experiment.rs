//! Experiment harnesses: occlusion ablation, binarized class pairs,
//! cross-domain transfer and per-domain baselines. Each harness featurizes
//! once, then trains and evaluates the baseline classifier per row.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::config::{Occlusion, RunConfig};
use crate::dataset::{self, Manifest, SampleRecord, Split};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::model::FeatureVector;
use crate::osm::RoadClass;
use crate::pipeline::{self, FeatureTable, TileSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Masking,
    Binarize,
    CrossDomain,
    Baseline,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "masking" => Ok(ExperimentKind::Masking),
            "binarize" => Ok(ExperimentKind::Binarize),
            "cross_domain" | "cross-domain" => Ok(ExperimentKind::CrossDomain),
            "baseline" => Ok(ExperimentKind::Baseline),
            other => Err(Error::invalid(format!("unknown experiment {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub unweighted_accuracy: Option<f64>,
    pub macro_f1: f64,
    pub balanced_accuracy: Option<f64>,
}

impl From<&MetricsReport> for Scores {
    fn from(r: &MetricsReport) -> Self {
        Scores {
            unweighted_accuracy: r.unweighted_accuracy,
            macro_f1: r.macro_f1,
            balanced_accuracy: r.balanced_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingRow {
    pub masking: Occlusion,
    #[serde(flatten)]
    pub scores: Scores,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarizeRow {
    pub isolated: String,
    pub alternates: Vec<String>,
    /// Samples in the binarized subset, train and held-out together.
    pub n: usize,
    pub capped: bool,
    pub class_counts: Vec<(String, usize)>,
    #[serde(flatten)]
    pub scores: Scores,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub n: usize,
    #[serde(flatten)]
    pub scores: Scores,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub train_domain: String,
    pub test_domain: String,
    #[serde(flatten)]
    pub scores: Scores,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: String,
    #[serde(flatten)]
    pub scores: Scores,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentReport {
    Masking {
        train_samples: usize,
        eval_samples: usize,
        cloud_rejected: usize,
        rows: Vec<MaskingRow>,
    },
    Binarize {
        per_class: usize,
        rows: Vec<BinarizeRow>,
        reference: ReferenceRow,
    },
    CrossDomain {
        rows: Vec<TransferRow>,
    },
    Baseline {
        rows: Vec<DomainRow>,
    },
}

/// One binarized configuration: the isolated class, its alternates, and the
/// subset size as a multiple of the per-class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinarizeConfig {
    pub isolated: RoadClass,
    pub alternates: &'static [RoadClass],
    pub size_per_class: usize,
}

/// The five binarized configurations. On a balanced set of 5000 per class
/// the sizes are 15000, 10000, 10000, 10000 and 10000.
pub const BINARIZE_ROWS: [BinarizeConfig; 5] = [
    BinarizeConfig {
        isolated: RoadClass::Minor,
        alternates: &[RoadClass::Major, RoadClass::TwoTrack],
        size_per_class: 3,
    },
    BinarizeConfig {
        isolated: RoadClass::Minor,
        alternates: &[RoadClass::TwoTrack],
        size_per_class: 2,
    },
    BinarizeConfig {
        isolated: RoadClass::Minor,
        alternates: &[RoadClass::Major],
        size_per_class: 2,
    },
    BinarizeConfig {
        isolated: RoadClass::Major,
        alternates: &[RoadClass::Minor, RoadClass::TwoTrack],
        size_per_class: 2,
    },
    BinarizeConfig {
        isolated: RoadClass::Major,
        alternates: &[RoadClass::TwoTrack],
        size_per_class: 2,
    },
];

fn index_of(table: &FeatureTable) -> HashMap<&str, usize> {
    table
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.sample_id.as_str(), i))
        .collect()
}

/// Trains on the `Train` split of `records` and scores the held-out split.
fn fit_score(
    table: &FeatureTable,
    mode: Occlusion,
    records: &[SampleRecord],
    label_set: &[String],
    cfg: &RunConfig,
) -> Result<MetricsReport> {
    let k = table.mode_index(mode)?;
    let index = index_of(table);
    let rows: Vec<(&FeatureVector, &SampleRecord)> = records
        .iter()
        .filter_map(|r| index.get(r.sample_id.as_str()).map(|&i| (&table.features[i][k], r)))
        .collect();
    let heldout = if rows.iter().any(|(_, r)| r.split == Split::Test) {
        Split::Test
    } else {
        Split::Val
    };
    let train: Vec<_> = rows.iter().filter(|(_, r)| r.split == Split::Train).copied().collect();
    let eval: Vec<_> = rows.iter().filter(|(_, r)| r.split == heldout).copied().collect();
    if train.is_empty() || eval.is_empty() {
        return Err(Error::invalid(format!(
            "need both train and held-out samples (train {}, held-out {})",
            train.len(),
            eval.len()
        )));
    }
    let model = pipeline::train_rows(&train, label_set, cfg)?;
    pipeline::evaluate_rows(&model.params, &eval)
}

fn restrict_domain(m: &Manifest, cfg: &RunConfig) -> Result<Manifest> {
    match &cfg.domain {
        None => Ok(m.clone()),
        Some(d) => {
            let out = dataset::filter_domain(m, d);
            if out.is_empty() {
                return Err(Error::invalid(format!("domain {d} absent from manifest")));
            }
            Ok(out)
        }
    }
}

/// Trains and evaluates under every occlusion mode.
pub fn masking(manifest: &Manifest, source: &dyn TileSource, cfg: &RunConfig) -> Result<ExperimentReport> {
    let m = pipeline::ensure_split(&restrict_domain(manifest, cfg)?, cfg)?;
    let table = pipeline::featurize(&m, source, cfg, &Occlusion::ALL);
    report_errors(&table)?;
    let heldout = pipeline::heldout_split(&m);
    let mut rows = Vec::new();
    for mode in Occlusion::ALL {
        let metrics = fit_score(&table, mode, &table.records, &m.label_set, cfg)?;
        rows.push(MaskingRow {
            masking: mode,
            scores: Scores::from(&metrics),
            metrics,
        });
    }
    Ok(ExperimentReport::Masking {
        train_samples: table.records.iter().filter(|r| r.split == Split::Train).count(),
        eval_samples: table.records.iter().filter(|r| r.split == heldout).count(),
        cloud_rejected: table.cloud_rejected,
        rows,
    })
}

/// Runs every binarized configuration on a balanced subset, plus the
/// three-class reference on the same subset and split.
pub fn binarize(manifest: &Manifest, source: &dyn TileSource, cfg: &RunConfig) -> Result<ExperimentReport> {
    let m = restrict_domain(manifest, cfg)?;
    let per_class = m.class_counts().iter().map(|(_, n)| *n).min().unwrap_or(0);
    if per_class == 0 {
        return Err(Error::EmptyClass(
            m.class_counts()
                .into_iter()
                .find(|(_, n)| *n == 0)
                .map(|(l, _)| l)
                .unwrap_or_default(),
        ));
    }
    let balanced = dataset::balance_subset(&m, per_class, cfg.seed)?;
    let balanced = pipeline::ensure_split(&balanced, cfg)?;
    let table = pipeline::featurize(&balanced, source, cfg, &[cfg.occlusion]);
    report_errors(&table)?;

    let metrics = fit_score(&table, cfg.occlusion, &balanced.records, &balanced.label_set, cfg)?;
    let reference = ReferenceRow {
        n: balanced.len(),
        scores: Scores::from(&metrics),
        metrics,
    };

    let mut rows = Vec::new();
    for row in BINARIZE_ROWS {
        let alternates: Vec<&str> = row.alternates.iter().map(|c| c.name()).collect();
        let bin = dataset::binarize_labels(&balanced, row.isolated.name(), &alternates)?;
        let target = row.size_per_class * per_class;
        let capped = bin.len() > target;
        let bin = dataset::cap_binarized(&balanced, &bin, target, cfg.seed)?;
        let metrics = fit_score(&table, cfg.occlusion, &bin.records, &bin.label_set, cfg)?;
        rows.push(BinarizeRow {
            isolated: row.isolated.name().to_string(),
            alternates: alternates.iter().map(|s| s.to_string()).collect(),
            n: bin.len(),
            capped,
            class_counts: bin.class_counts(),
            scores: Scores::from(&metrics),
            metrics,
        });
    }
    Ok(ExperimentReport::Binarize {
        per_class,
        rows,
        reference,
    })
}

/// Splits each domain separately so both carry their own held-out set.
fn split_per_domain(m: &Manifest, domains: &[&str], cfg: &RunConfig) -> Result<Manifest> {
    let mut records = Vec::new();
    for d in domains {
        let part = dataset::filter_domain(m, d);
        if part.is_empty() {
            return Err(Error::invalid(format!("domain {d} absent from manifest")));
        }
        records.extend(pipeline::ensure_split(&part, cfg)?.records);
    }
    let mut out = Manifest::new(m.label_set.clone(), records)?;
    out.provenance = m.provenance.clone();
    Ok(out)
}

/// Trains on each domain and evaluates on its own held-out split and on the
/// other domain's held-out split.
pub fn cross_domain(
    manifest: &Manifest,
    source: &dyn TileSource,
    cfg: &RunConfig,
    domain_a: &str,
    domain_b: &str,
) -> Result<ExperimentReport> {
    if domain_a == domain_b {
        return Err(Error::invalid("cross-domain transfer needs two distinct domains"));
    }
    let m = split_per_domain(manifest, &[domain_a, domain_b], cfg)?;
    let table = pipeline::featurize(&m, source, cfg, &[cfg.occlusion]);
    report_errors(&table)?;
    let heldout = |d: &str| {
        if m.records.iter().any(|r| r.domain == d && r.split == Split::Test) {
            Split::Test
        } else {
            Split::Val
        }
    };
    let mut rows = Vec::new();
    for (train_d, other) in [(domain_a, domain_b), (domain_b, domain_a)] {
        for test_d in [train_d, other] {
            let test_split = heldout(test_d);
            let records: Vec<SampleRecord> = m
                .records
                .iter()
                .filter_map(|r| {
                    if r.domain == train_d && r.split == Split::Train {
                        Some(r.clone())
                    } else if r.domain == test_d && r.split == test_split {
                        Some(SampleRecord {
                            split: Split::Test,
                            ..r.clone()
                        })
                    } else {
                        None
                    }
                })
                .collect();
            let metrics = fit_score(&table, cfg.occlusion, &records, &m.label_set, cfg)?;
            rows.push(TransferRow {
                train_domain: train_d.to_string(),
                test_domain: test_d.to_string(),
                scores: Scores::from(&metrics),
                metrics,
            });
        }
    }
    Ok(ExperimentReport::CrossDomain { rows })
}

/// In-domain train and evaluation for every domain in the manifest.
pub fn baseline(manifest: &Manifest, source: &dyn TileSource, cfg: &RunConfig) -> Result<ExperimentReport> {
    let domains = match &cfg.domain {
        Some(d) => vec![d.clone()],
        None => manifest.domains(),
    };
    let names: Vec<&str> = domains.iter().map(String::as_str).collect();
    let m = split_per_domain(manifest, &names, cfg)?;
    let table = pipeline::featurize(&m, source, cfg, &[cfg.occlusion]);
    report_errors(&table)?;
    let mut rows = Vec::new();
    for d in &domains {
        let records: Vec<SampleRecord> = m.records.iter().filter(|r| &r.domain == d).cloned().collect();
        let metrics = fit_score(&table, cfg.occlusion, &records, &m.label_set, cfg)?;
        rows.push(DomainRow {
            domain: d.clone(),
            scores: Scores::from(&metrics),
            metrics,
        });
    }
    Ok(ExperimentReport::Baseline { rows })
}

fn report_errors(table: &FeatureTable) -> Result<()> {
    match table.errors.first() {
        None => Ok(()),
        Some(e) => Err(Error::invalid(format!(
            "{} samples failed to load; first: {}: {}",
            table.errors.len(),
            e.sample_id,
            e.error
        ))),
    }
}
