//! CSV outputs for timelines and step plots.

use std::io::Write;

use crate::classifier::{ActivityTimeline, Label};
use crate::error::{Error, Result};

pub const TIMELINE_HEADER: [&str; 5] = ["frame_index", "picker_id", "fl_label", "bfl_label", "signal"];

/// One row per (picker, frame); `signal` is empty except where the batch
/// label changed.
pub fn write_timeline_csv<W: Write>(out: W, timelines: &[ActivityTimeline]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMELINE_HEADER)?;
    for t in timelines {
        for (fl, bfl) in t.fl.iter().zip(&t.bfl) {
            let signal = t.signal_at(fl.frame_index).map(|s| s.code()).unwrap_or("");
            w.write_record([
                fl.frame_index.to_string().as_str(),
                t.picker_id.as_str(),
                fl.label.code(),
                bfl.label.label().code(),
                signal,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("timeline", e))?;
    Ok(())
}

pub const PLOT_HEADER: [&str; 5] = ["picker_id", "frame_index", "fl", "bfl", "truth"];

/// Numeric step series (1 = picking, 0 = not picking) of the frame label,
/// the batch label and, when available, the ground truth.
pub fn write_plot_csv<W: Write>(
    out: W,
    timelines: &[ActivityTimeline],
    truth: impl Fn(&str) -> Option<Vec<Label>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_HEADER)?;
    for t in timelines {
        let truth = truth(&t.picker_id);
        for (fl, bfl) in t.fl.iter().zip(&t.bfl) {
            let gt = truth
                .as_ref()
                .and_then(|labels| labels.get(fl.frame_index))
                .map(|l| l.numeric().to_string())
                .unwrap_or_default();
            w.write_record([
                t.picker_id.clone(),
                fl.frame_index.to_string(),
                fl.label.numeric().to_string(),
                bfl.label.numeric().to_string(),
                gt,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("plot data", e))?;
    Ok(())
}
