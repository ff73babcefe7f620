//! Sensitivity / specificity / accuracy scoring with picking as the
//! positive class, and attribute-subset variants of the classifier.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationModel;
use crate::classifier::{classify_frame_subset, unobserved_frame, FlLabel, Label};
use crate::descriptor::{Attribute, ParameterVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.positives())
    }

    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.negatives())
    }

    pub fn acc(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Rates of one scoring run; `None` marks an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub counts: ConfusionCounts,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub acc: Option<f64>,
}

impl Score {
    pub fn from_counts(counts: ConfusionCounts) -> Score {
        Score {
            counts,
            tpr: counts.tpr(),
            tnr: counts.tnr(),
            acc: counts.acc(),
        }
    }
}

pub fn score(pred: &[Label], truth: &[Label]) -> Result<Score> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (Label::Picking, Label::Picking) => c.tp += 1,
            (Label::Picking, Label::NotPicking) => c.fp += 1,
            (Label::NotPicking, Label::NotPicking) => c.tn += 1,
            (Label::NotPicking, Label::Picking) => c.fn_ += 1,
        }
    }
    Ok(Score::from_counts(c))
}

/// Formats a rate for reports: undefined rates print as `NA`.
pub fn format_rate(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{r:.6}"),
        None => "NA".to_string(),
    }
}

/// A named subset of attributes that vote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    pub attributes: Vec<Attribute>,
}

impl VariantSpec {
    pub fn new(name: impl Into<String>, attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Config("variant needs at least one attribute".into()));
        }
        Ok(VariantSpec {
            name: name.into(),
            attributes,
        })
    }

    /// Parses attribute names, e.g. `["mag_range", "ori_min"]`.
    pub fn parse(name: impl Into<String>, attributes: &[&str]) -> Result<Self> {
        let attrs = attributes
            .iter()
            .map(|a| a.parse())
            .collect::<Result<Vec<Attribute>>>()?;
        Self::new(name, attrs)
    }

    /// The full classifier and the three reduced variants compared against it:
    /// (i) magnitude range + orientation extremes, (ii) magnitude range,
    /// (iii) orientation extremes.
    pub fn standard_set() -> Vec<VariantSpec> {
        use Attribute::*;
        vec![
            VariantSpec { name: "proposed".into(), attributes: Attribute::ALL.to_vec() },
            VariantSpec { name: "variant_i".into(), attributes: vec![MagRange, OriMin, OriMax] },
            VariantSpec { name: "variant_ii".into(), attributes: vec![MagRange] },
            VariantSpec { name: "variant_iii".into(), attributes: vec![OriMin, OriMax] },
        ]
    }
}

/// Parameter vectors of one picker with ground truth, one entry per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub picker_id: String,
    pub frames: Vec<usize>,
    /// `None` where no vector was ever available.
    pub vectors: Vec<Option<ParameterVector>>,
    pub truth: Vec<Label>,
}

/// Frame labels of one series using only `subset` for the vote.
pub fn classify_series(
    series: &LabeledSeries,
    cal: &CalibrationModel,
    subset: &[Attribute],
) -> Result<Vec<FlLabel>> {
    let mut out: Vec<FlLabel> = Vec::with_capacity(series.vectors.len());
    for (&frame, v) in series.frames.iter().zip(&series.vectors) {
        let label = match v {
            Some(v) => classify_frame_subset(v, cal, subset, out.last(), frame, &series.picker_id)?,
            None => unobserved_frame(frame, &series.picker_id),
        };
        out.push(label);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: String,
    pub score: Score,
}

/// Scores every variant over all series (counts pooled across pickers).
pub fn run_variants(
    dataset: &[LabeledSeries],
    cal: &CalibrationModel,
    variants: &[VariantSpec],
) -> Result<Vec<VariantReport>> {
    cal.validate()?;
    variants
        .iter()
        .map(|variant| {
            if variant.attributes.is_empty() {
                return Err(Error::Config(format!("variant `{}` is empty", variant.name)));
            }
            let mut counts = ConfusionCounts::default();
            for series in dataset {
                let labels = classify_series(series, cal, &variant.attributes)?;
                let pred: Vec<Label> = labels.iter().map(|l| l.label).collect();
                counts.merge(&score(&pred, &series.truth)?.counts);
            }
            Ok(VariantReport {
                variant: variant.name.clone(),
                score: Score::from_counts(counts),
            })
        })
        .collect()
}

/// CSV with columns `variant,acc,tnr,tpr`.
pub fn write_variant_csv<W: Write>(out: W, reports: &[VariantReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "acc", "tnr", "tpr"])?;
    for r in reports {
        w.write_record([
            r.variant.clone(),
            format_rate(r.score.acc),
            format_rate(r.score.tnr),
            format_rate(r.score.tpr),
        ])?;
    }
    w.flush().map_err(|e| Error::io("variant report", e))?;
    Ok(())
}
