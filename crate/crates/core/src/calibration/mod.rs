//! Unsupervised threshold calibration.
//!
//! Each attribute of the parameter vector is examined independently: a KDE
//! shows how many natural groups it has, k-means (k = 2..4) scores the
//! groupings by silhouette, and the two-cluster solution fixes a threshold
//! halfway between the centers.

mod kde;
mod kmeans;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kde::{
    diffusion_bandwidth, find_modes, fit_kde, silverman_bandwidth, KdeModel, GRID_POINTS,
    MIN_SAMPLES, MODE_FLOOR,
};
pub use kmeans::{kmeans_silhouette, kmeans_silhouette_with, silhouette, ClusterModel, KMeansConfig};

use crate::descriptor::{Attribute, ParameterVector};
use crate::error::{Error, Result};

/// Cluster counts scored during calibration.
pub const SCORED_K: [usize; 3] = [2, 3, 4];

/// Which side of the threshold counts as picking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    PickingBelow,
    PickingAbove,
}

impl Polarity {
    /// Picking shows a small magnitude range, low CS and a tight orientation
    /// band (low max, high min); unloading the opposite.
    pub fn for_attribute(attribute: Attribute) -> Polarity {
        match attribute {
            Attribute::MagRange | Attribute::CsMean | Attribute::OriMax => Polarity::PickingBelow,
            Attribute::OriMin => Polarity::PickingAbove,
        }
    }

    pub fn votes_picking(self, value: f64, threshold: f64) -> bool {
        match self {
            Polarity::PickingBelow => value < threshold,
            Polarity::PickingAbove => value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeSummary {
    pub bandwidth: f64,
    pub modes: Vec<f64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub centers: Vec<f64>,
    pub silhouette: f64,
}

/// Calibration of one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCalibration {
    pub attribute: Attribute,
    pub threshold: f64,
    pub polarity: Polarity,
    /// The two centers the threshold was derived from, ascending.
    pub centers: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kde: Option<KdeSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<ClusterSummary>,
}

impl AttributeCalibration {
    pub fn votes_picking(&self, v: &ParameterVector) -> bool {
        self.polarity.votes_picking(v.get(self.attribute), self.threshold)
    }
}

/// Thresholds for all four attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    /// Trailing window the CS mean was computed over.
    pub window: usize,
    pub attributes: BTreeMap<Attribute, AttributeCalibration>,
}

impl CalibrationModel {
    pub fn get(&self, attribute: Attribute) -> Result<&AttributeCalibration> {
        self.attributes.get(&attribute).ok_or_else(|| Error::Calibration {
            attribute: attribute.name().to_string(),
            reason: "missing from calibration model".into(),
        })
    }

    /// Checks the model has all four attributes with finite thresholds.
    pub fn validate(&self) -> Result<()> {
        for a in Attribute::ALL {
            let cal = self.get(a)?;
            if !cal.threshold.is_finite() {
                return Err(Error::Calibration {
                    attribute: a.name().to_string(),
                    reason: "non-finite threshold".into(),
                });
            }
        }
        if self.attributes.len() != 4 {
            return Err(Error::Config("calibration must hold exactly 4 attributes".into()));
        }
        Ok(())
    }

    /// Applies `factor` to every threshold and center.
    pub fn scaled(&self, factor: f64) -> CalibrationModel {
        let mut out = self.clone();
        for cal in out.attributes.values_mut() {
            cal.threshold *= factor;
            cal.centers = [cal.centers[0] * factor, cal.centers[1] * factor];
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: CalibrationModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Midpoint thresholds from one two-cluster model per attribute.
pub fn derive_thresholds(models: &[ClusterModel], window: usize) -> Result<CalibrationModel> {
    let mut attributes = BTreeMap::new();
    for m in models {
        let attribute: Attribute = m.attribute.parse()?;
        if m.k != 2 || m.centers.len() != 2 {
            return Err(Error::Calibration {
                attribute: m.attribute.clone(),
                reason: format!("thresholds need exactly 2 clusters, got k = {}", m.k),
            });
        }
        let (lo, hi) = (m.centers[0], m.centers[1]);
        let threshold = 0.5 * (lo + hi);
        if !(lo < threshold && threshold < hi) {
            return Err(Error::Calibration {
                attribute: m.attribute.clone(),
                reason: format!("centers {lo} and {hi} do not bracket a threshold"),
            });
        }
        let cal = AttributeCalibration {
            attribute,
            threshold,
            polarity: Polarity::for_attribute(attribute),
            centers: [lo, hi],
            kde: None,
            scores: Vec::new(),
        };
        if attributes.insert(attribute, cal).is_some() {
            return Err(Error::Calibration {
                attribute: m.attribute.clone(),
                reason: "attribute given twice".into(),
            });
        }
    }
    let model = CalibrationModel { window, attributes };
    model.validate()?;
    Ok(model)
}

/// Full calibration output: the model plus the fits behind it.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub model: CalibrationModel,
    pub kdes: BTreeMap<Attribute, KdeModel>,
    /// Fits for k = 2, 3, 4.
    pub clusters: BTreeMap<Attribute, Vec<ClusterModel>>,
}

/// Fits KDEs and k-means for every attribute and derives thresholds.
pub fn calibrate(vectors: &[ParameterVector], window: usize) -> Result<CalibrationReport> {
    let fits: Vec<(Attribute, KdeModel, Vec<ClusterModel>)> = Attribute::ALL
        .par_iter()
        .map(|&attribute| {
            let values: Vec<f64> = vectors.iter().map(|v| v.get(attribute)).collect();
            let kde = fit_kde(attribute.name(), &values)?;
            let clusters = SCORED_K
                .iter()
                .map(|&k| kmeans_silhouette(attribute.name(), &values, k))
                .collect::<Result<Vec<_>>>()?;
            Ok((attribute, kde, clusters))
        })
        .collect::<Result<Vec<_>>>()?;

    let two: Vec<ClusterModel> = fits.iter().map(|(_, _, c)| c[0].clone()).collect();
    let mut model = derive_thresholds(&two, window)?;
    let mut kdes = BTreeMap::new();
    let mut clusters = BTreeMap::new();
    for (attribute, kde, fitted) in fits {
        let cal = model.attributes.get_mut(&attribute).expect("derived above");
        cal.kde = Some(KdeSummary {
            bandwidth: kde.bandwidth,
            modes: kde.modes.clone(),
            fallback: kde.fallback,
        });
        cal.scores = fitted
            .iter()
            .map(|c| ClusterSummary {
                k: c.k,
                centers: c.centers.clone(),
                silhouette: c.silhouette,
            })
            .collect();
        kdes.insert(attribute, kde);
        clusters.insert(attribute, fitted);
    }
    Ok(CalibrationReport {
        model,
        kdes,
        clusters,
    })
}
