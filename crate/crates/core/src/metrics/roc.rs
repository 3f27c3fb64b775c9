use serde::{Deserialize, Serialize};

use crate::datagen::FrameClass;
use crate::{Result, SadError};

/// One scored frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub score: f64,
    pub speech_label: bool,
    pub frame_class: FrameClass,
}

impl FrameRecord {
    /// The label must agree with the class: speech iff class is speech or both.
    pub fn new(score: f64, speech_label: bool, frame_class: FrameClass) -> Result<Self> {
        let implied = matches!(frame_class, FrameClass::Speech | FrameClass::Both);
        if implied != speech_label {
            return Err(SadError::InvalidInput(format!("label {speech_label} contradicts frame class {frame_class:?}")));
        }
        if !score.is_finite() {
            return Err(SadError::InvalidInput(format!("non-finite score {score}")));
        }
        Ok(Self { score, speech_label, frame_class })
    }

    /// Record without class annotation: speech or neither.
    pub fn unannotated(score: f64, speech_label: bool) -> Self {
        let frame_class = if speech_label { FrameClass::Speech } else { FrameClass::Neither };
        Self { score, speech_label, frame_class }
    }
}

/// Which non-speech frames count as negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSet {
    /// Every frame without speech.
    AllNonSpeech,
    /// Frames with singing and no speech.
    SingingOnly,
}

impl NegativeSet {
    fn contains(self, r: &FrameRecord) -> bool {
        match self {
            NegativeSet::AllNonSpeech => !r.speech_label,
            NegativeSet::SingingOnly => r.frame_class == FrameClass::Singing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Frames with score >= threshold are called speech.
    pub threshold: f64,
    pub tpr: f64,
    /// False-positive rate over the negative set (1 − SiRR for singing).
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Exact ROC over every distinct score. Points run from (0, 0) at an
/// infinite threshold to (1, 1); the area uses the trapezoidal rule, which
/// counts tied positive/negative pairs as one half.
pub fn roc_points(records: &[FrameRecord], negatives: NegativeSet) -> Result<RocCurve> {
    let mut scored: Vec<(f64, bool)> = records
        .iter()
        .filter_map(|r| {
            if r.speech_label {
                Some((r.score, true))
            } else if negatives.contains(r) {
                Some((r.score, false))
            } else {
                None
            }
        })
        .collect();
    let n_pos = scored.iter().filter(|s| s.1).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SadError::DegenerateClassDistribution(format!(
            "{n_pos} positive and {n_neg} negative frames ({negatives:?})"
        )));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint { threshold: f64::INFINITY, tpr: 0.0, fpr: 0.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of (1/P)(1/N).
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < scored.len() {
        let thr = scored[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < scored.len() && scored[i].0 == thr {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push(RocPoint { threshold: thr, tpr: tp as f64 / n_pos as f64, fpr: fp as f64 / n_neg as f64 });
    }
    let auc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, auc, n_positive: n_pos, n_negative: n_neg })
}

pub fn auc(records: &[FrameRecord]) -> Result<f64> {
    Ok(roc_points(records, NegativeSet::AllNonSpeech)?.auc)
}

/// Area under TPR against 1 − SiRR, with singing-only frames as negatives.
pub fn auc_sirr(records: &[FrameRecord]) -> Result<f64> {
    Ok(roc_points(records, NegativeSet::SingingOnly)?.auc)
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,tpr,fpr\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.tpr, p.fpr));
        }
        s
    }
}
