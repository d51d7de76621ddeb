//! Dataset manifests: JSONL persistence, balancing, label binarization,
//! class weights, stratified splits, and domain filtering.
//!
//! A manifest file starts with one header line `{"provenance": {...}}`,
//! followed by one JSON object per sample with exactly the keys
//! `sample_id, image_uri, mask_uri, label, domain, split`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::keyed;

pub const ISOLATED: &str = "isolated";
pub const OTHER: &str = "other";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::invalid(format!("unknown split {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub sample_id: String,
    pub image_uri: String,
    pub mask_uri: Option<String>,
    pub label: String,
    pub domain: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub label_set: Vec<String>,
    pub seed: Option<u64>,
    /// Operations applied, in order.
    pub filters: Vec<String>,
    /// Free-form creation parameters.
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
    pub label_set: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Header {
    provenance: Provenance,
}

impl Manifest {
    pub fn new(label_set: Vec<String>, records: Vec<SampleRecord>) -> Result<Self> {
        let m = Manifest {
            provenance: Provenance {
                label_set: label_set.clone(),
                ..Provenance::default()
            },
            records,
            label_set,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.sample_id.as_str()) {
                return Err(Error::invalid(format!("duplicate sample_id {}", r.sample_id)));
            }
            if !self.label_set.contains(&r.label) {
                return Err(Error::UnknownLabel(r.label.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// A manifest with the same labels and provenance but different records.
    fn derive(&self, records: Vec<SampleRecord>, filter: String, seed: Option<u64>) -> Manifest {
        let mut provenance = self.provenance.clone();
        provenance.filters.push(filter);
        if seed.is_some() {
            provenance.seed = seed;
        }
        Manifest {
            records,
            label_set: self.label_set.clone(),
            provenance,
        }
    }

    pub fn class_counts(&self) -> Vec<(String, usize)> {
        self.label_set
            .iter()
            .map(|l| (l.clone(), self.records.iter().filter(|r| &r.label == l).count()))
            .collect()
    }

    pub fn with_split(&self, split: Split) -> Vec<&SampleRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    pub fn domains(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.domain) {
                out.push(r.domain.clone());
            }
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = self.provenance.clone();
        header.label_set = self.label_set.clone();
        serde_json::to_writer(&mut w, &Header { provenance: header })?;
        w.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Manifest> {
        let mut provenance: Option<Provenance> = None;
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<manifest>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let at = |e: serde_json::Error| Error::Parse {
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            };
            if i == 0 && line.trim_start().starts_with("{\"provenance\"") {
                let h: Header = serde_json::from_str(&line).map_err(at)?;
                provenance = Some(h.provenance);
                continue;
            }
            records.push(serde_json::from_str::<SampleRecord>(&line).map_err(at)?);
        }
        let provenance = provenance.unwrap_or_default();
        let mut label_set = provenance.label_set.clone();
        for r in &records {
            if !label_set.contains(&r.label) {
                label_set.push(r.label.clone());
            }
        }
        let m = Manifest {
            records,
            label_set,
            provenance,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(f)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_jsonl_string()).map_err(|e| Error::io(path, e))
    }
}

fn indices_by_label(m: &Manifest) -> Vec<(String, Vec<usize>)> {
    m.label_set
        .iter()
        .map(|l| {
            let idx = m
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| &r.label == l)
                .map(|(i, _)| i)
                .collect();
            (l.clone(), idx)
        })
        .collect()
}

/// Exactly `per_class` samples per label, drawn uniformly without
/// replacement; survivors keep their manifest order.
pub fn balance_subset(m: &Manifest, per_class: usize, seed: u64) -> Result<Manifest> {
    let mut keep = Vec::new();
    for (label, idx) in indices_by_label(m) {
        if idx.len() < per_class {
            return Err(Error::InsufficientClass {
                class: label,
                available: idx.len(),
                required: per_class,
                shortfall: per_class - idx.len(),
            });
        }
        let mut rng = keyed::rng(&[seed, keyed::hash_str(&label), 0xba1a]);
        keep.extend(index::sample(&mut rng, idx.len(), per_class).into_iter().map(|j| idx[j]));
    }
    keep.sort_unstable();
    let records = keep.into_iter().map(|i| m.records[i].clone()).collect();
    Ok(m.derive(records, format!("balance_subset(per_class={per_class})"), Some(seed)))
}

/// Relabels `isolated` as "isolated" and every class in `alternates` as
/// "other"; samples in neither are dropped.
pub fn binarize_labels(m: &Manifest, isolated: &str, alternates: &[&str]) -> Result<Manifest> {
    if alternates.is_empty() {
        return Err(Error::invalid("binarization needs at least one alternate class"));
    }
    if alternates.contains(&isolated) {
        return Err(Error::invalid(format!("{isolated} is both isolated and alternate")));
    }
    for name in std::iter::once(&isolated).chain(alternates) {
        if !m.label_set.iter().any(|l| l == name) {
            return Err(Error::UnknownLabel(name.to_string()));
        }
    }
    let records = m
        .records
        .iter()
        .filter_map(|r| {
            let label = if r.label == isolated {
                ISOLATED
            } else if alternates.contains(&r.label.as_str()) {
                OTHER
            } else {
                return None;
            };
            Some(SampleRecord {
                label: label.to_string(),
                ..r.clone()
            })
        })
        .collect();
    let mut out = m.derive(
        records,
        format!("binarize_labels(isolated={isolated}, alternates={})", alternates.join("+")),
        None,
    );
    out.label_set = vec![ISOLATED.to_string(), OTHER.to_string()];
    out.provenance.label_set = out.label_set.clone();
    Ok(out)
}

/// Inverse-frequency weights `N / (C * N_c)` in label-set order.
pub fn class_weights(m: &Manifest) -> Result<Vec<(String, f64)>> {
    let counts = m.class_counts();
    weights_from_counts(&counts)
}

pub fn weights_from_counts(counts: &[(String, usize)]) -> Result<Vec<(String, f64)>> {
    let total: usize = counts.iter().map(|(_, n)| n).sum();
    let c = counts.len() as f64;
    counts
        .iter()
        .map(|(label, n)| {
            if *n == 0 {
                Err(Error::EmptyClass(label.clone()))
            } else {
                Ok((label.clone(), total as f64 / (c * *n as f64)))
            }
        })
        .collect()
}

/// Stratified train/val/test assignment. Per class, the cut points are
/// `round(f_train * n)` and `round((f_train + f_val) * n)`.
pub fn split(m: &Manifest, fractions: (f64, f64, f64), seed: u64) -> Result<Manifest> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !f.is_finite() || *f < 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions ({a}, {b}, {c}) must be nonnegative and sum to 1"
        )));
    }
    let mut records = m.records.clone();
    for (label, mut idx) in indices_by_label(m) {
        let mut rng = keyed::rng(&[seed, keyed::hash_str(&label), 0x5b11]);
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let cut1 = ((a * n).round() as usize).min(idx.len());
        let cut2 = (((a + b) * n).round() as usize).clamp(cut1, idx.len());
        for (pos, &i) in idx.iter().enumerate() {
            records[i].split = if pos < cut1 {
                Split::Train
            } else if pos < cut2 {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Ok(m.derive(records, format!("split({a}, {b}, {c})"), Some(seed)))
}

pub fn filter_domain(m: &Manifest, domain: &str) -> Manifest {
    let records = m.records.iter().filter(|r| r.domain == domain).cloned().collect();
    m.derive(records, format!("filter_domain({domain})"), None)
}

/// Samples whose split is in `splits`.
pub fn filter_splits(m: &Manifest, splits: &[Split]) -> Manifest {
    let records = m.records.iter().filter(|r| splits.contains(&r.split)).cloned().collect();
    let names: BTreeSet<String> = splits.iter().map(|s| s.to_string()).collect();
    m.derive(
        records,
        format!("filter_splits({})", names.into_iter().collect::<Vec<_>>().join("+")),
        None,
    )
}

/// Keeps every isolated sample and draws the "other" samples needed to reach
/// `n` total, stratified evenly over their original classes.
pub fn cap_binarized(
    original: &Manifest,
    binarized: &Manifest,
    n: usize,
    seed: u64,
) -> Result<Manifest> {
    if binarized.len() <= n {
        return Ok(binarized.clone());
    }
    let isolated: Vec<usize> = (0..binarized.len())
        .filter(|&i| binarized.records[i].label == ISOLATED)
        .collect();
    if isolated.len() > n {
        return Err(Error::invalid(format!(
            "{} isolated samples exceed the target size {n}",
            isolated.len()
        )));
    }
    let original_label: BTreeMap<&str, &str> = original
        .records
        .iter()
        .map(|r| (r.sample_id.as_str(), r.label.as_str()))
        .collect();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in binarized.records.iter().enumerate() {
        if r.label == OTHER {
            let src = original_label.get(r.sample_id.as_str()).copied().unwrap_or(OTHER);
            groups.entry(src).or_default().push(i);
        }
    }
    let need = n - isolated.len();
    let g = groups.len();
    let mut keep = isolated;
    let mut remaining = need;
    for (k, (label, idx)) in groups.iter().enumerate() {
        let share = remaining / (g - k);
        let take = share.min(idx.len());
        remaining -= take;
        let mut rng = keyed::rng(&[seed, keyed::hash_str(label), 0xca9]);
        keep.extend(index::sample(&mut rng, idx.len(), take).into_iter().map(|j| idx[j]));
    }
    if remaining > 0 {
        return Err(Error::invalid(format!("cannot reach {n} samples; {remaining} short")));
    }
    keep.sort_unstable();
    let records = keep.into_iter().map(|i| binarized.records[i].clone()).collect();
    Ok(binarized.derive(records, format!("cap_binarized(n={n})"), Some(seed)))
}
