//! End-to-end chain: flow → masked descriptors → parameter vectors →
//! frame labels → batch labels and scheduling signals, per picker.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationModel;
use crate::classifier::{classify_frame, unobserved_frame, ActivityTimeline, Label, TimelineBuilder};
use crate::descriptor::{
    frame_descriptor, mask_flow_strided, FrameDescriptor, MorMask, ParameterVector, PickerTracker,
    TrackedVector, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::flow::{estimate_flow_expanded, expand_frame, FlowField, PyramidConfig};
use crate::frame::GrayFrame;
use crate::metrics::LabeledSeries;

/// Masks keyed by `(frame_index, picker_id)`. A missing entry means the
/// picker was not detected in that frame.
pub type MaskIndex = BTreeMap<(usize, String), MorMask>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub pyramid: PyramidConfig,
    /// Frames in the correlation-sensitivity mean and in the rolling mode.
    pub window: usize,
    /// Use every `sample_step`-th row and column of the mask.
    pub sample_step: usize,
    /// Pixels peeled off the region edge before sampling. Flow within a
    /// few pixels of a motion boundary mixes object and background motion.
    pub mask_erosion: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pyramid: PyramidConfig::default(),
            window: DEFAULT_WINDOW,
            sample_step: 1,
            mask_erosion: 5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.pyramid.validate()?;
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if self.sample_step == 0 {
            return Err(Error::Config("sample_step must be >= 1".into()));
        }
        Ok(())
    }
}

/// Descriptors and vectors of one picker. Entry `i` belongs to frame
/// `frames[i]`; the motion is measured from the previous frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PickerSeries {
    pub picker_id: String,
    pub frames: Vec<usize>,
    pub descriptors: Vec<FrameDescriptor>,
    pub vectors: Vec<TrackedVector>,
}

impl PickerSeries {
    /// Vectors measured directly (not carried over a dropout).
    pub fn observed_vectors(&self) -> impl Iterator<Item = ParameterVector> + '_ {
        self.vectors
            .iter()
            .filter(|t| !t.propagated)
            .filter_map(|t| t.vector)
    }
}

/// Picker ids present in the mask index, sorted.
pub fn picker_ids(masks: &MaskIndex) -> Vec<String> {
    masks
        .keys()
        .map(|(_, p)| p.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn check_frames(frames: &[GrayFrame]) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        if f.frame_index() != i {
            return Err(Error::InvalidFrame(format!(
                "frame at position {i} has index {}",
                f.frame_index()
            )));
        }
        if f.width() != frames[0].width() || f.height() != frames[0].height() {
            return Err(Error::Dimension(format!(
                "frame {i} is {}x{}, frame 0 is {}x{}",
                f.width(),
                f.height(),
                frames[0].width(),
                frames[0].height()
            )));
        }
    }
    Ok(())
}

/// Flow of every consecutive pair; entry `i` maps frame `i` onto `i + 1`.
pub fn compute_flows(frames: &[GrayFrame], cfg: &PyramidConfig) -> Result<Vec<FlowField>> {
    check_frames(frames)?;
    let expansions = frames
        .par_iter()
        .map(|f| expand_frame(f, cfg))
        .collect::<Result<Vec<_>>>()?;
    expansions
        .par_windows(2)
        .map(|pair| estimate_flow_expanded(&pair[0], &pair[1], cfg))
        .collect()
}

/// Descriptors and tracked vectors of every picker, from precomputed flows.
pub fn series_from_flows(
    flows: &[FlowField],
    masks: &MaskIndex,
    cfg: &PipelineConfig,
) -> Result<Vec<PickerSeries>> {
    cfg.validate()?;
    let frame_count = if flows.is_empty() { 0 } else { flows.len() + 1 };
    if let Some(((f, p), _)) = masks.iter().find(|((f, _), _)| *f >= frame_count.max(1)) {
        return Err(Error::Config(format!(
            "mask for picker `{p}` references frame {f} beyond the video"
        )));
    }
    picker_ids(masks)
        .into_par_iter()
        .map(|picker| picker_series(flows, masks, &picker, cfg))
        .collect()
}

fn picker_series(
    flows: &[FlowField],
    masks: &MaskIndex,
    picker: &str,
    cfg: &PipelineConfig,
) -> Result<PickerSeries> {
    let mut tracker = PickerTracker::new(cfg.window)?;
    let mut series = PickerSeries {
        picker_id: picker.to_string(),
        frames: Vec::with_capacity(flows.len()),
        descriptors: Vec::with_capacity(flows.len()),
        vectors: Vec::with_capacity(flows.len()),
    };
    for (i, flow) in flows.iter().enumerate() {
        let frame = i + 1;
        let descriptor = match masks.get(&(i, picker.to_string())) {
            Some(mask) => {
                let region = mask.eroded(cfg.mask_erosion);
                let samples = mask_flow_strided(flow, &region, cfg.sample_step)
                    .map_err(|e| e.with_context(i, picker))?;
                frame_descriptor(&samples, frame, picker)
            }
            None => frame_descriptor(&[], frame, picker),
        };
        let tracked = tracker
            .push(descriptor.clone())
            .map_err(|e| e.with_context(frame, picker))?;
        series.frames.push(frame);
        series.descriptors.push(descriptor);
        series.vectors.push(tracked);
    }
    Ok(series)
}

/// Descriptors and vectors of every picker.
pub fn extract_series(
    frames: &[GrayFrame],
    masks: &MaskIndex,
    cfg: &PipelineConfig,
) -> Result<Vec<PickerSeries>> {
    cfg.validate()?;
    let flows = compute_flows(frames, &cfg.pyramid)?;
    series_from_flows(&flows, masks, cfg)
}

/// Frame labels, batch labels and signals of one picker.
pub fn classify_series_timeline(
    series: &PickerSeries,
    cal: &CalibrationModel,
    window: usize,
) -> Result<ActivityTimeline> {
    let mut builder = TimelineBuilder::new(&series.picker_id, window)?;
    for (&frame, tracked) in series.frames.iter().zip(&series.vectors) {
        let fl = match &tracked.vector {
            Some(v) => classify_frame(v, cal, builder.last_label(), frame, &series.picker_id)
                .map_err(|e| e.with_context(frame, &series.picker_id))?,
            None => unobserved_frame(frame, &series.picker_id),
        };
        builder.push(fl)?;
    }
    Ok(builder.finish())
}

/// Runs the whole chain and returns one timeline per picker, sorted by id.
/// Timelines start at frame 1, the first frame with measurable motion.
pub fn run_pipeline(
    frames: &[GrayFrame],
    masks: &MaskIndex,
    cal: &CalibrationModel,
    cfg: &PipelineConfig,
) -> Result<Vec<ActivityTimeline>> {
    cal.validate()?;
    let series = extract_series(frames, masks, cfg)?;
    timelines(&series, cal, cfg.window)
}

pub fn timelines(
    series: &[PickerSeries],
    cal: &CalibrationModel,
    window: usize,
) -> Result<Vec<ActivityTimeline>> {
    series
        .par_iter()
        .map(|s| classify_series_timeline(s, cal, window))
        .collect()
}

/// All directly measured vectors, the input to calibration.
pub fn calibration_vectors(series: &[PickerSeries]) -> Vec<ParameterVector> {
    series.iter().flat_map(|s| s.observed_vectors()).collect()
}

/// Pairs every series with its ground truth. Pickers without truth are an
/// error, since they cannot be scored.
pub fn labeled_series(
    series: &[PickerSeries],
    truth: &BTreeMap<String, Vec<Label>>,
) -> Result<Vec<LabeledSeries>> {
    series
        .iter()
        .map(|s| {
            let labels = truth
                .get(&s.picker_id)
                .ok_or_else(|| Error::Manifest(format!("no truth for picker `{}`", s.picker_id)))?;
            let truth = s
                .frames
                .iter()
                .map(|&f| {
                    labels.get(f).copied().ok_or_else(|| {
                        Error::Manifest(format!("truth of `{}` ends before frame {f}", s.picker_id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LabeledSeries {
                picker_id: s.picker_id.clone(),
                frames: s.frames.clone(),
                vectors: s.vectors.iter().map(|t| t.vector).collect(),
                truth,
            })
        })
        .collect()
}
