//! Frame-level picking / not-picking decisions and the batch-level rolling
//! mode that turns them into robot scheduling signals.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationModel;
use crate::descriptor::{Attribute, ParameterVector};
use crate::error::{Error, Result};

/// Frames in the rolling-mode window.
pub const ROLLING_WINDOW: usize = 5;

/// Frame-level activity class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "P")]
    Picking,
    #[serde(rename = "NP")]
    NotPicking,
}

impl Label {
    pub fn code(self) -> &'static str {
        match self {
            Label::Picking => "P",
            Label::NotPicking => "NP",
        }
    }

    /// 1 for picking, 0 otherwise.
    pub fn numeric(self) -> u8 {
        match self {
            Label::Picking => 1,
            Label::NotPicking => 0,
        }
    }

    pub fn parse(s: &str) -> Result<Label> {
        match s {
            "P" => Ok(Label::Picking),
            "NP" => Ok(Label::NotPicking),
            other => Err(Error::Manifest(format!("unknown label `{other}`"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Batch-level class, i.e. the scheduler signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BflClass {
    WaitToFinish,
    CallARobot,
}

impl BflClass {
    pub fn from_label(label: Label) -> BflClass {
        match label {
            Label::Picking => BflClass::WaitToFinish,
            Label::NotPicking => BflClass::CallARobot,
        }
    }

    /// The frame-level class this batch class stands for.
    pub fn label(self) -> Label {
        match self {
            BflClass::WaitToFinish => Label::Picking,
            BflClass::CallARobot => Label::NotPicking,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            BflClass::WaitToFinish => "WaitToFinish",
            BflClass::CallARobot => "CallARobot",
        }
    }

    pub fn numeric(self) -> u8 {
        match self {
            BflClass::WaitToFinish => 1,
            BflClass::CallARobot => 0,
        }
    }
}

impl fmt::Display for BflClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlLabel {
    pub frame_index: usize,
    pub picker_id: String,
    pub label: Label,
    /// Picking votes in [`Attribute::ALL`] order.
    pub votes: [bool; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BflLabel {
    pub frame_index: usize,
    pub picker_id: String,
    pub label: BflClass,
    /// The frame labels the mode was taken over, oldest first.
    pub window: Vec<Label>,
}

/// Per-attribute picking votes in [`Attribute::ALL`] order.
pub fn attribute_votes(v: &ParameterVector, cal: &CalibrationModel) -> Result<[bool; 4]> {
    let mut votes = [false; 4];
    for (slot, attribute) in votes.iter_mut().zip(Attribute::ALL) {
        *slot = cal.get(attribute)?.votes_picking(v);
    }
    Ok(votes)
}

/// Majority over the votes of `subset`; a tie keeps `prev`, else not picking.
pub fn vote_label(votes: &[bool; 4], subset: &[Attribute], prev: Option<Label>) -> Label {
    let picking = subset
        .iter()
        .filter(|&&a| votes[Attribute::ALL.iter().position(|&b| b == a).expect("known attribute")])
        .count();
    let not_picking = subset.len() - picking;
    match picking.cmp(&not_picking) {
        std::cmp::Ordering::Greater => Label::Picking,
        std::cmp::Ordering::Less => Label::NotPicking,
        std::cmp::Ordering::Equal => prev.unwrap_or(Label::NotPicking),
    }
}

/// Classifies one frame by a majority vote of the four attributes.
pub fn classify_frame(
    v: &ParameterVector,
    cal: &CalibrationModel,
    prev: Option<&FlLabel>,
    frame_index: usize,
    picker_id: &str,
) -> Result<FlLabel> {
    classify_frame_subset(v, cal, &Attribute::ALL, prev, frame_index, picker_id)
}

/// Like [`classify_frame`] but only the attributes in `subset` vote.
pub fn classify_frame_subset(
    v: &ParameterVector,
    cal: &CalibrationModel,
    subset: &[Attribute],
    prev: Option<&FlLabel>,
    frame_index: usize,
    picker_id: &str,
) -> Result<FlLabel> {
    if subset.is_empty() {
        return Err(Error::Config("attribute subset is empty".into()));
    }
    let votes = attribute_votes(v, cal)?;
    Ok(FlLabel {
        frame_index,
        picker_id: picker_id.to_string(),
        label: vote_label(&votes, subset, prev.map(|p| p.label)),
        votes,
    })
}

/// Label for a frame with no parameter vector at all (picker never seen).
pub fn unobserved_frame(frame_index: usize, picker_id: &str) -> FlLabel {
    FlLabel {
        frame_index,
        picker_id: picker_id.to_string(),
        label: Label::NotPicking,
        votes: [false; 4],
    }
}

/// Most frequent label over the trailing [`ROLLING_WINDOW`] frames; a tie
/// goes to the newest frame's label.
pub fn rolling_mode(history: &[FlLabel]) -> Result<BflLabel> {
    rolling_mode_window(history, ROLLING_WINDOW)
}

pub fn rolling_mode_window(history: &[FlLabel], window: usize) -> Result<BflLabel> {
    let newest = history
        .last()
        .ok_or(Error::EmptyHistory("rolling mode needs at least one frame label"))?;
    if window == 0 {
        return Err(Error::Config("rolling window must be >= 1".into()));
    }
    let start = history.len().saturating_sub(window);
    let labels: Vec<Label> = history[start..].iter().map(|l| l.label).collect();
    Ok(BflLabel {
        frame_index: newest.frame_index,
        picker_id: newest.picker_id.clone(),
        label: BflClass::from_label(mode_of(&labels)),
        window: labels,
    })
}

fn mode_of(labels: &[Label]) -> Label {
    let picking = labels.iter().filter(|&&l| l == Label::Picking).count();
    let not_picking = labels.len() - picking;
    match picking.cmp(&not_picking) {
        std::cmp::Ordering::Greater => Label::Picking,
        std::cmp::Ordering::Less => Label::NotPicking,
        std::cmp::Ordering::Equal => *labels.last().expect("non-empty"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub frame_index: usize,
    pub signal: BflClass,
}

/// Frame and batch labels of one picker plus the emitted signals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivityTimeline {
    pub picker_id: String,
    pub fl: Vec<FlLabel>,
    pub bfl: Vec<BflLabel>,
    pub signals: Vec<Signal>,
}

impl ActivityTimeline {
    /// Frame index → signal, if one was emitted there.
    pub fn signal_at(&self, frame_index: usize) -> Option<BflClass> {
        self.signals
            .binary_search_by_key(&frame_index, |s| s.frame_index)
            .ok()
            .map(|i| self.signals[i].signal)
    }
}

/// Builds a timeline one frame label at a time.
#[derive(Debug, Clone)]
pub struct TimelineBuilder {
    window: usize,
    recent: VecDeque<FlLabel>,
    timeline: ActivityTimeline,
}

impl TimelineBuilder {
    pub fn new(picker_id: &str, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("rolling window must be >= 1".into()));
        }
        Ok(TimelineBuilder {
            window,
            recent: VecDeque::with_capacity(window),
            timeline: ActivityTimeline {
                picker_id: picker_id.to_string(),
                ..Default::default()
            },
        })
    }

    pub fn last_label(&self) -> Option<&FlLabel> {
        self.timeline.fl.last()
    }

    pub fn push(&mut self, fl: FlLabel) -> Result<&BflLabel> {
        if let Some(last) = self.timeline.fl.last() {
            if fl.frame_index <= last.frame_index {
                return Err(Error::Config(format!(
                    "frame {} pushed after frame {}",
                    fl.frame_index, last.frame_index
                )));
            }
        }
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(fl.clone());
        let bfl = rolling_mode_window(self.recent.make_contiguous(), self.window)?;
        let changed = self
            .timeline
            .bfl
            .last()
            .is_none_or(|prev| prev.label != bfl.label);
        if changed {
            self.timeline.signals.push(Signal {
                frame_index: bfl.frame_index,
                signal: bfl.label,
            });
        }
        self.timeline.fl.push(fl);
        self.timeline.bfl.push(bfl);
        Ok(self.timeline.bfl.last().expect("just pushed"))
    }

    pub fn finish(self) -> ActivityTimeline {
        self.timeline
    }
}
