use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::accuracy::AccuracyReport;
use super::roc::{roc_points, FrameRecord, NegativeSet, RocCurve};
use crate::datagen::FrameClass;
use crate::{Result, SadError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    /// Absent when the class distribution makes the metric undefined.
    pub value: Option<f64>,
    pub n_positive: usize,
    pub n_negative: usize,
    pub threshold_policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: Vec<MetricValue>,
    pub frame_counts: BTreeMap<FrameClass, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singing_accuracy: Option<AccuracyReport>,
}

impl MetricReport {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).and_then(|m| m.value)
    }
}

const THRESHOLD_POLICY: &str = "exact ROC over all distinct scores, trapezoidal area";

fn metric(name: &str, records: &[FrameRecord], set: NegativeSet) -> Result<(MetricValue, Option<RocCurve>)> {
    match roc_points(records, set) {
        Ok(c) => Ok((
            MetricValue {
                name: name.into(),
                value: Some(c.auc),
                n_positive: c.n_positive,
                n_negative: c.n_negative,
                threshold_policy: THRESHOLD_POLICY.into(),
                note: None,
            },
            Some(c),
        )),
        Err(SadError::DegenerateClassDistribution(msg)) => Ok((
            MetricValue {
                name: name.into(),
                value: None,
                n_positive: 0,
                n_negative: 0,
                threshold_policy: THRESHOLD_POLICY.into(),
                note: Some(msg),
            },
            None,
        )),
        Err(e) => Err(e),
    }
}

/// AUC and AUC_SiRR over all records, plus their ROC curves when defined.
pub fn evaluate_records(records: &[FrameRecord]) -> Result<(MetricReport, BTreeMap<String, RocCurve>)> {
    let (auc, c1) = metric("auc", records, NegativeSet::AllNonSpeech)?;
    let (sirr, c2) = metric("auc_sirr", records, NegativeSet::SingingOnly)?;
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.frame_class).or_insert(0) += 1;
    }
    let mut curves = BTreeMap::new();
    if let Some(c) = c1 {
        curves.insert("auc".to_string(), c);
    }
    if let Some(c) = c2 {
        curves.insert("auc_sirr".to_string(), c);
    }
    Ok((MetricReport { metrics: vec![auc, sirr], frame_counts: counts, singing_accuracy: None }, curves))
}
