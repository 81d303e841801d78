//! File formats: JSONL prediction and ground-truth records, the persisted
//! round state, the selection log, and the JSON report wrappers.
//!
//! Every float is rounded to nine significant digits before serialization;
//! re-reading and re-writing a file reproduces it byte for byte. JSONL inputs
//! are parsed line by line into their compact domain types, so memory is
//! bounded by the retained record set rather than the file size.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diversity::{FeatureVector, PrototypeStore};
use crate::error::{Error, Result};
use crate::geometry::RotatedBox;
use crate::observation::{AbilitySnapshot, GroundTruthInstance, InstancePrediction};
use crate::selector::{InstanceId, LabelPool, SelectionRecord};
use crate::uncertainty::CategoryDistribution;

/// Rounds to nine significant digits; the value re-parses to itself.
pub fn round9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("round-trip of formatted float")
}

fn round9_value(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                let rounded = round9(n.as_f64().expect("checked f64"));
                *v = serde_json::Value::from(rounded);
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round9_value),
        serde_json::Value::Object(map) => map.values_mut().for_each(round9_value),
        _ => {}
    }
}

fn io_err(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::invalid(format!("{}: {err}", path.display()))
}

/// Serializes a value to canonical JSON text: floats at nine significant
/// digits, object keys sorted, two-space indentation, trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::invalid(e.to_string()))?;
    round9_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One compact JSON line (no trailing newline), floats at nine digits.
pub fn to_jsonl_line<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::invalid(e.to_string()))?;
    round9_value(&mut v);
    serde_json::to_string(&v).map_err(|e| Error::invalid(e.to_string()))
}

/// Writes canonical JSON to a file.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?).map_err(|e| io_err(path, e))
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    for item in items {
        let line = to_jsonl_line(item)?;
        writeln!(file, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Reads a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// Streams a JSONL file, converting each record as it is read. Parse and
/// validation failures report the 1-based line number.
pub fn read_jsonl<T, U, F>(path: &Path, mut convert: F) -> Result<Vec<U>>
where
    T: DeserializeOwned,
    F: FnMut(T) -> Result<U>,
{
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let record: T = serde_json::from_str(&line)
            .map_err(|e| Error::invalid(format!("{}:{lineno}: {e}", path.display())))?;
        let value = convert(record)
            .map_err(|e| Error::invalid(format!("{}:{lineno}: {e}", path.display())))?;
        out.push(value);
    }
    Ok(out)
}

/// Wire record of one detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    pub r#box: [f64; 5],
    pub probs: Vec<f64>,
    pub feature: Vec<f64>,
    pub pred_loc_unc: f64,
}

impl PredictionRecord {
    pub fn into_prediction(self) -> Result<InstancePrediction> {
        InstancePrediction::new(
            self.image_id,
            self.instance_id,
            RotatedBox::from_array(self.r#box)?,
            CategoryDistribution::new(self.probs)?,
            FeatureVector::new(self.feature)?,
            self.pred_loc_unc,
        )
    }

    pub fn from_prediction(pred: &InstancePrediction) -> Self {
        Self {
            image_id: pred.image_id.clone(),
            instance_id: pred.instance_id.clone(),
            r#box: pred.r#box.to_array(),
            probs: pred.probs.probs().to_vec(),
            feature: pred.feature.values().to_vec(),
            pred_loc_unc: pred.pred_loc_unc,
        }
    }
}

/// Wire record of one annotated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub instance_id: String,
    pub category_id: u32,
    pub r#box: [f64; 5],
}

impl GroundTruthRecord {
    pub fn into_instance(self) -> Result<GroundTruthInstance> {
        Ok(GroundTruthInstance {
            image_id: self.image_id,
            instance_id: self.instance_id,
            category_id: self.category_id,
            r#box: RotatedBox::from_array(self.r#box)?,
        })
    }

    pub fn from_instance(gt: &GroundTruthInstance) -> Self {
        Self {
            image_id: gt.image_id.clone(),
            instance_id: gt.instance_id.clone(),
            category_id: gt.category_id,
            r#box: gt.r#box.to_array(),
        }
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<InstancePrediction>> {
    read_jsonl(path, PredictionRecord::into_prediction)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthInstance>> {
    read_jsonl(path, GroundTruthRecord::into_instance)
}

/// One line of `selection.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionLine {
    pub rank: u32,
    pub instance_id: String,
    pub pseudo_category: u32,
    pub u_cls_norm: f64,
    pub u_loc_theta: f64,
    pub d_inter: f64,
    pub d_intra_norm: f64,
    pub weights: [f64; 4],
    pub s: f64,
    pub s_final: f64,
}

impl From<&SelectionRecord> for SelectionLine {
    fn from(record: &SelectionRecord) -> Self {
        let b = &record.breakdown;
        Self {
            rank: record.rank,
            instance_id: record.instance_id.clone(),
            pseudo_category: b.pseudo_category,
            u_cls_norm: b.u_cls_norm,
            u_loc_theta: b.u_loc_theta,
            d_inter: b.d_inter,
            d_intra_norm: b.d_intra_norm,
            weights: b.weights,
            s: b.s,
            s_final: b.s_final,
        }
    }
}

/// The persisted round state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub round: u32,
    pub labeled: Vec<InstanceId>,
    pub category_counts: BTreeMap<u32, u64>,
    pub prototypes: BTreeMap<u32, Vec<f64>>,
    pub ability: Option<AbilitySnapshot>,
    pub config_hash: String,
}

impl StateFile {
    /// Captures the current pool and store (labeled ids sorted).
    pub fn capture(
        pool: &LabelPool,
        store: &PrototypeStore,
        ability: Option<AbilitySnapshot>,
        config_hash: String,
    ) -> Self {
        let mut category_counts = BTreeMap::new();
        let mut prototypes = BTreeMap::new();
        for (category, prototype, count) in store.entries() {
            category_counts.insert(category, count);
            if let Some(p) = prototype {
                prototypes.insert(category, p.values().to_vec());
            }
        }
        Self {
            round: pool.round(),
            labeled: pool.labeled().iter().cloned().collect(),
            category_counts,
            prototypes,
            ability,
            config_hash,
        }
    }

    /// Rebuilds the prototype store under the configured momentum/smoothing.
    pub fn to_store(&self, alpha: f64, gamma: f64) -> Result<PrototypeStore> {
        let entries: Vec<(u32, Option<FeatureVector>, u64)> = self
            .category_counts
            .iter()
            .map(|(&category, &count)| {
                let prototype = self
                    .prototypes
                    .get(&category)
                    .map(|v| FeatureVector::new(v.clone()))
                    .transpose()?;
                Ok((category, prototype, count))
            })
            .collect::<Result<_>>()?;
        PrototypeStore::from_parts(alpha, gamma, entries)
    }

    pub fn labeled_set(&self) -> BTreeSet<InstanceId> {
        self.labeled.iter().cloned().collect()
    }
}

/// `ability.json`: the observation plus the effective configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityFile {
    #[serde(flatten)]
    pub snapshot: AbilitySnapshot,
    pub config: RunConfig,
}

/// `metrics.json`: evaluation summary plus the effective configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub per_category_ap: BTreeMap<u32, f64>,
    pub map50: f64,
    pub mean_iou: f64,
    pub config: RunConfig,
}
