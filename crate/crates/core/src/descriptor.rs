//! Motion descriptors: flow restricted to a picker's moving-object region,
//! per-frame statistics of magnitude and orientation, and the correlation
//! sensitivity (CS) term that couples the two.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowField, PolarSample};

/// Default number of frames in the trailing CS window.
pub const DEFAULT_WINDOW: usize = 5;

/// Binary moving-object region of one picker in one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    picker_id: String,
    frame_index: usize,
}

impl MorMask {
    pub fn new(
        width: usize,
        height: usize,
        bits: Vec<bool>,
        picker_id: impl Into<String>,
        frame_index: usize,
    ) -> Result<Self> {
        if width * height != bits.len() || width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "mask {width}x{height} with {} bits",
                bits.len()
            )));
        }
        Ok(MorMask {
            width,
            height,
            bits,
            picker_id: picker_id.into(),
            frame_index,
        })
    }

    pub fn empty(width: usize, height: usize, picker_id: impl Into<String>, frame_index: usize) -> Self {
        MorMask {
            width,
            height,
            bits: vec![false; width * height],
            picker_id: picker_id.into(),
            frame_index,
        }
    }

    /// Foreground is any byte above 127.
    pub fn from_luma8(
        width: usize,
        height: usize,
        bytes: &[u8],
        picker_id: impl Into<String>,
        frame_index: usize,
    ) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| b > 127).collect(),
            picker_id,
            frame_index,
        )
    }

    pub fn to_luma8(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn picker_id(&self) -> &str {
        &self.picker_id
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Keeps the pixels whose whole `(2r+1)²` neighbourhood is foreground;
    /// pixels outside the image count as background.
    pub fn eroded(&self, radius: usize) -> MorMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        let run = |len: usize, get: &dyn Fn(usize) -> bool| -> Vec<bool> {
            // foreground run lengths ending at / starting from each index
            let mut left = vec![0usize; len];
            let mut right = vec![0usize; len];
            for i in 0..len {
                left[i] = if get(i) { 1 + if i > 0 { left[i - 1] } else { 0 } } else { 0 };
            }
            for i in (0..len).rev() {
                right[i] = if get(i) { 1 + if i + 1 < len { right[i + 1] } else { 0 } } else { 0 };
            }
            (0..len).map(|i| left[i] > radius && right[i] > radius).collect()
        };
        let mut rows = vec![false; w * h];
        for y in 0..h {
            let kept = run(w, &|x| self.bits[y * w + x]);
            rows[y * w..(y + 1) * w].copy_from_slice(&kept);
        }
        let mut bits = vec![false; w * h];
        for x in 0..w {
            let kept = run(h, &|y| rows[y * w + x]);
            for (y, k) in kept.into_iter().enumerate() {
                bits[y * w + x] = k;
            }
        }
        MorMask {
            width: w,
            height: h,
            bits,
            picker_id: self.picker_id.clone(),
            frame_index: self.frame_index,
        }
    }
}

/// Polar flow samples at every foreground pixel, row-major.
pub fn mask_flow(field: &FlowField, mask: &MorMask) -> Result<Vec<PolarSample>> {
    mask_flow_strided(field, mask, 1)
}

/// Like [`mask_flow`] but only visits every `step`-th row and column.
pub fn mask_flow_strided(field: &FlowField, mask: &MorMask, step: usize) -> Result<Vec<PolarSample>> {
    if field.width() != mask.width() || field.height() != mask.height() {
        return Err(Error::Dimension(format!(
            "flow {}x{} vs mask {}x{}",
            field.width(),
            field.height(),
            mask.width(),
            mask.height()
        )));
    }
    if step == 0 {
        return Err(Error::Config("sampling step must be >= 1".into()));
    }
    let mut out = Vec::new();
    for y in (0..mask.height()).step_by(step) {
        for x in (0..mask.width()).step_by(step) {
            if mask.get(x, y) {
                let (dx, dy) = field.at(x, y);
                out.push(PolarSample::from_vector(dx as f64, dy as f64));
            }
        }
    }
    Ok(out)
}

/// Population statistics of one scalar over the region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub range: f64,
    pub min: f64,
    pub max: f64,
    pub rms: f64,
}

impl Stats {
    pub fn from_values(values: impl Iterator<Item = f64> + Clone) -> Stats {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values.clone() {
            n += 1;
            sum += v;
            sum_sq += v * v;
            min = min.min(v);
            max = max.max(v);
        }
        if n == 0 {
            return Stats::default();
        }
        let nf = n as f64;
        let mean = sum / nf;
        // two-pass variance
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        Stats {
            mean: mean.clamp(min, max),
            std: var.sqrt(),
            range: max - min,
            min,
            max,
            rms: (sum_sq / nf).sqrt(),
        }
    }
}

/// Per-frame summary of the masked flow of one picker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDescriptor {
    pub frame_index: usize,
    pub picker_id: String,
    /// Number of flow samples in the region.
    pub sample_count: usize,
    pub mag_stats: Stats,
    pub ori_stats: Stats,
    /// Sum of magnitudes over the region.
    pub mag_sum: f64,
    /// Sum of orientations (degrees) over the region.
    pub ori_sum: f64,
    /// `mag_sum · ori_sum / (2 · sample_count)`, zero for an empty region.
    pub cs_term: f64,
}

impl FrameDescriptor {
    pub fn is_empty(&self) -> bool {
        self.sample_count == 0
    }
}

pub fn frame_descriptor(samples: &[PolarSample], frame_index: usize, picker_id: &str) -> FrameDescriptor {
    let mags = samples.iter().map(|s| s.magnitude);
    let oris = samples.iter().map(|s| s.orientation);
    let mag_sum: f64 = mags.clone().sum();
    let ori_sum: f64 = oris.clone().sum();
    let n = samples.len();
    FrameDescriptor {
        frame_index,
        picker_id: picker_id.to_string(),
        sample_count: n,
        mag_stats: Stats::from_values(mags),
        ori_stats: Stats::from_values(oris),
        mag_sum,
        ori_sum,
        cs_term: cs_term(mag_sum, ori_sum, n),
    }
}

/// One frame's contribution to the correlation sensitivity.
pub fn cs_term(mag_sum: f64, ori_sum: f64, sample_count: usize) -> f64 {
    if sample_count == 0 {
        0.0
    } else {
        mag_sum * ori_sum / (2.0 * sample_count as f64)
    }
}

/// Correlation sensitivity over a set of frames: the sum of their terms.
pub fn correlation_sensitivity<'a>(frames: impl IntoIterator<Item = &'a FrameDescriptor>) -> f64 {
    frames.into_iter().map(|d| d.cs_term).sum()
}

/// The four attributes the classifier thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub mag_range: f64,
    pub ori_max: f64,
    pub ori_min: f64,
    /// Mean CS term over the trailing window.
    pub cs_mean: f64,
}

impl ParameterVector {
    pub fn get(&self, attribute: Attribute) -> f64 {
        match attribute {
            Attribute::MagRange => self.mag_range,
            Attribute::CsMean => self.cs_mean,
            Attribute::OriMax => self.ori_max,
            Attribute::OriMin => self.ori_min,
        }
    }

    pub fn is_finite(&self) -> bool {
        Attribute::ALL.iter().all(|&a| self.get(a).is_finite())
    }

    /// Multiplies every attribute by `factor`.
    pub fn scaled(&self, factor: f64) -> ParameterVector {
        ParameterVector {
            mag_range: self.mag_range * factor,
            ori_max: self.ori_max * factor,
            ori_min: self.ori_min * factor,
            cs_mean: self.cs_mean * factor,
        }
    }
}

/// Names one entry of a [`ParameterVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    MagRange,
    CsMean,
    OriMax,
    OriMin,
}

impl Attribute {
    /// Canonical order: range of magnitude, mean CS, max and min orientation.
    pub const ALL: [Attribute; 4] = [
        Attribute::MagRange,
        Attribute::CsMean,
        Attribute::OriMax,
        Attribute::OriMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::MagRange => "mag_range",
            Attribute::CsMean => "cs_mean",
            Attribute::OriMax => "ori_max",
            Attribute::OriMin => "ori_min",
        }
    }
}

impl std::fmt::Display for Attribute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAttribute(s.to_string()))
    }
}

/// Builds the parameter vector from a picker's most recent descriptors
/// (oldest first). Spatial attributes come from the newest frame.
pub fn parameter_vector(history: &[FrameDescriptor]) -> Result<ParameterVector> {
    let newest = history
        .last()
        .ok_or(Error::EmptyHistory("parameter vector needs at least one frame"))?;
    for pair in history.windows(2) {
        if pair[0].picker_id != pair[1].picker_id {
            return Err(Error::Config(format!(
                "history mixes pickers `{}` and `{}`",
                pair[0].picker_id, pair[1].picker_id
            )));
        }
        if pair[1].frame_index != pair[0].frame_index + 1 {
            return Err(Error::Config(format!(
                "history frames {} and {} are not consecutive",
                pair[0].frame_index, pair[1].frame_index
            )));
        }
    }
    let cs_mean = history.iter().map(|d| d.cs_term).sum::<f64>() / history.len() as f64;
    Ok(ParameterVector {
        mag_range: newest.mag_stats.range,
        ori_max: newest.ori_stats.max,
        ori_min: newest.ori_stats.min,
        cs_mean,
    })
}

/// Vector produced for one frame by a [`PickerTracker`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedVector {
    /// `None` only when the region has been empty since the start.
    pub vector: Option<ParameterVector>,
    /// The region was empty and the previous vector was carried forward.
    pub propagated: bool,
}

/// Per-picker sequential state: the trailing descriptor window and the last
/// vector, carried over frames where the detector lost the picker.
#[derive(Debug, Clone)]
pub struct PickerTracker {
    window: usize,
    history: VecDeque<FrameDescriptor>,
    last: Option<ParameterVector>,
}

impl PickerTracker {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        Ok(PickerTracker {
            window,
            history: VecDeque::with_capacity(window),
            last: None,
        })
    }

    pub fn push(&mut self, descriptor: FrameDescriptor) -> Result<TrackedVector> {
        if descriptor.is_empty() {
            // the window restarts after a dropout
            self.history.clear();
            return Ok(TrackedVector {
                vector: self.last,
                propagated: true,
            });
        }
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(descriptor);
        let v = parameter_vector(self.history.make_contiguous())?;
        self.last = Some(v);
        Ok(TrackedVector {
            vector: Some(v),
            propagated: false,
        })
    }
}

pub const DESCRIPTOR_CSV_HEADER: [&str; 18] = [
    "frame_index",
    "picker_id",
    "S_f",
    "mag_min",
    "mag_max",
    "mag_mean",
    "mag_std",
    "mag_range",
    "mag_rms",
    "ori_min",
    "ori_max",
    "ori_mean",
    "ori_std",
    "ori_range",
    "ori_rms",
    "mag_sum",
    "ori_sum",
    "cs_term",
];

/// Writes descriptors as CSV, one row per (frame, picker).
pub fn write_descriptor_csv<W: Write>(out: W, descriptors: &[FrameDescriptor]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DESCRIPTOR_CSV_HEADER)?;
    for d in descriptors {
        let (m, o) = (&d.mag_stats, &d.ori_stats);
        let nums = [
            m.min, m.max, m.mean, m.std, m.range, m.rms, o.min, o.max, o.mean, o.std, o.range,
            o.rms, d.mag_sum, d.ori_sum, d.cs_term,
        ];
        let mut row = vec![
            d.frame_index.to_string(),
            d.picker_id.clone(),
            d.sample_count.to_string(),
        ];
        row.extend(nums.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("descriptor csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(magnitude: f64, orientation: f64) -> PolarSample {
        PolarSample {
            magnitude,
            orientation,
        }
    }

    #[test]
    fn empty_mask_gives_no_samples() {
        let field = FlowField::uniform(3, 2, 1.0, 0.0);
        let mask = MorMask::empty(3, 2, "p0", 0);
        assert!(mask_flow(&field, &mask).unwrap().is_empty());
    }

    #[test]
    fn two_pixel_mask() {
        let field = FlowField::new(2, 1, vec![0.0, 3.0], vec![0.0, 4.0]).unwrap();
        let mask = MorMask::new(2, 1, vec![true, true], "p0", 0).unwrap();
        let s = mask_flow(&field, &mask).unwrap();
        assert_eq!(s[0], ps(0.0, 0.0));
        assert_eq!(s[1].magnitude, 5.0);
        assert!((s[1].orientation - 4f64.atan2(3.0).to_degrees()).abs() < 1e-12);
    }

    #[test]
    fn erosion_matches_neighbourhood_scan() {
        let (w, h) = (13, 9);
        let bits: Vec<bool> = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as i32, (i / w) as i32);
                (x - 6).pow(2) + (y - 4).pow(2) <= 16 || (x == 12 && y < 3)
            })
            .collect();
        let m = MorMask::new(w, h, bits, "p", 0).unwrap();
        for r in 0..4usize {
            let e = m.eroded(r);
            for y in 0..h {
                for x in 0..w {
                    let r = r as i32;
                    let expected = (-r..=r).all(|dy| {
                        (-r..=r).all(|dx| {
                            let (xx, yy) = (x as i32 + dx, y as i32 + dy);
                            xx >= 0 && yy >= 0 && xx < w as i32 && yy < h as i32 && m.get(xx as usize, yy as usize)
                        })
                    });
                    assert_eq!(e.get(x, y), expected, "r={r} ({x},{y})");
                }
            }
        }
        assert!(m.eroded(5).is_empty());
    }

    #[test]
    fn checkerboard_mask_matches_pixel_filter() {
        let (w, h) = (7, 5);
        let dx: Vec<f32> = (0..w * h).map(|i| (i as f32 * 0.37).sin() * 3.0).collect();
        let dy: Vec<f32> = (0..w * h).map(|i| (i as f32 * 0.11).cos() * 2.0).collect();
        let field = FlowField::new(w, h, dx.clone(), dy.clone()).unwrap();
        let bits: Vec<bool> = (0..w * h).map(|i| (i % w + i / w) % 2 == 0).collect();
        let mask = MorMask::new(w, h, bits.clone(), "p", 0).unwrap();
        let got = mask_flow(&field, &mask).unwrap();
        let mut expected = Vec::new();
        for i in 0..w * h {
            if bits[i] {
                let (u, v) = (dx[i] as f64, dy[i] as f64);
                let mag = (u * u + v * v).sqrt();
                let mut ori = v.atan2(u).to_degrees();
                if ori < 0.0 {
                    ori += 180.0;
                }
                if ori >= 180.0 {
                    ori -= 180.0;
                }
                expected.push((mag, ori));
            }
        }
        assert_eq!(got.len(), expected.len());
        for (g, (m, o)) in got.iter().zip(expected) {
            assert!((g.magnitude - m).abs() < 1e-12);
            assert!((g.orientation - o).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let field = FlowField::zeros(4, 4);
        let mask = MorMask::empty(4, 3, "p", 0);
        assert!(matches!(mask_flow(&field, &mask), Err(Error::Dimension(_))));
    }

    #[test]
    fn strided_sampling_visits_grid() {
        let field = FlowField::uniform(4, 4, 1.0, 0.0);
        let mask = MorMask::new(4, 4, vec![true; 16], "p", 0).unwrap();
        assert_eq!(mask_flow_strided(&field, &mask, 2).unwrap().len(), 4);
        assert!(mask_flow_strided(&field, &mask, 0).is_err());
    }

    #[test]
    fn single_sample_descriptor() {
        let d = frame_descriptor(&[ps(2.0, 90.0)], 4, "p0");
        assert_eq!(d.mag_stats.mean, 2.0);
        assert_eq!(d.mag_stats.range, 0.0);
        assert_eq!(d.cs_term, 90.0);
        assert_eq!(d.sample_count, 1);
    }

    #[test]
    fn two_sample_descriptor() {
        let d = frame_descriptor(&[ps(1.0, 30.0), ps(3.0, 60.0)], 0, "p0");
        assert_eq!(d.mag_sum, 4.0);
        assert_eq!(d.ori_sum, 90.0);
        assert_eq!(d.sample_count, 2);
        assert_eq!(d.cs_term, 90.0);
        assert_eq!(d.mag_stats.std, 1.0);
        assert_eq!(d.mag_stats.rms, 5f64.sqrt());
    }

    #[test]
    fn zero_flow_descriptor() {
        let d = frame_descriptor(&[ps(0.0, 0.0); 10], 0, "p0");
        assert_eq!(d.cs_term, 0.0);
        assert_eq!(d.mag_stats, Stats::default());
    }

    #[test]
    fn empty_descriptor_is_flagged_and_finite() {
        let d = frame_descriptor(&[], 3, "p0");
        assert!(d.is_empty());
        assert_eq!(d.cs_term, 0.0);
        assert_eq!(d.mag_stats, Stats::default());
        assert_eq!(d.ori_stats, Stats::default());
    }

    fn desc(frame: usize, cs: f64) -> FrameDescriptor {
        let mut d = frame_descriptor(&[ps(1.0, 10.0), ps(2.0, 20.0)], frame, "p0");
        d.cs_term = cs;
        d
    }

    #[test]
    fn parameter_vector_examples() {
        let v = parameter_vector(&[desc(0, 90.0)]).unwrap();
        assert_eq!(v.cs_mean, 90.0);
        assert_eq!(v.mag_range, 1.0);
        assert_eq!(v.ori_max, 20.0);
        assert_eq!(v.ori_min, 10.0);

        let h: Vec<_> = [10.0, 20.0, 30.0, 40.0, 50.0]
            .iter()
            .enumerate()
            .map(|(i, &c)| desc(i, c))
            .collect();
        assert_eq!(parameter_vector(&h).unwrap().cs_mean, 30.0);
    }

    #[test]
    fn parameter_vector_errors() {
        assert!(matches!(parameter_vector(&[]), Err(Error::EmptyHistory(_))));
        assert!(parameter_vector(&[desc(0, 1.0), desc(2, 1.0)]).is_err());
        let mut other = desc(1, 1.0);
        other.picker_id = "p1".into();
        assert!(parameter_vector(&[desc(0, 1.0), other]).is_err());
    }

    #[test]
    fn tracker_propagates_through_dropouts() {
        let mut t = PickerTracker::new(3).unwrap();
        let first = t.push(frame_descriptor(&[], 0, "p0")).unwrap();
        assert_eq!(first.vector, None);
        assert!(first.propagated);

        let a = t.push(desc(1, 10.0)).unwrap();
        let b = t.push(desc(2, 20.0)).unwrap();
        assert_eq!(b.vector.unwrap().cs_mean, 15.0);
        assert!(!a.propagated);

        let gap = t.push(frame_descriptor(&[], 3, "p0")).unwrap();
        assert!(gap.propagated);
        assert_eq!(gap.vector, b.vector);

        // window restarted after the dropout
        let c = t.push(desc(4, 40.0)).unwrap();
        assert_eq!(c.vector.unwrap().cs_mean, 40.0);
        t.push(desc(5, 50.0)).unwrap();
        t.push(desc(6, 60.0)).unwrap();
        let d = t.push(desc(7, 70.0)).unwrap();
        assert_eq!(d.vector.unwrap().cs_mean, 60.0);
    }

    #[test]
    fn attribute_names_roundtrip() {
        for a in Attribute::ALL {
            assert_eq!(a.name().parse::<Attribute>().unwrap(), a);
        }
        assert!(matches!(
            "speed".parse::<Attribute>(),
            Err(Error::UnknownAttribute(_))
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut buf = Vec::new();
        write_descriptor_csv(&mut buf, &[desc(0, 1.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), DESCRIPTOR_CSV_HEADER.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 18);
        assert_eq!(row[0], "0");
        assert_eq!(row[1], "p0");
        assert_eq!(row[2], "2");
        assert_eq!(row[17], "1.5");
    }

    fn naive_stats(v: &[f64]) -> [f64; 6] {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let rms = (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
        [mean, std, max - min, min, max, rms]
    }

    fn as_array(s: &Stats) -> [f64; 6] {
        [s.mean, s.std, s.range, s.min, s.max, s.rms]
    }

    proptest! {
        #[test]
        fn stats_match_naive(samples in proptest::collection::vec((0.0f64..20.0, 0.0f64..180.0), 1..60)) {
            let s: Vec<PolarSample> = samples.iter().map(|&(m, o)| ps(m, o)).collect();
            let d = frame_descriptor(&s, 0, "p");
            let mags: Vec<f64> = samples.iter().map(|p| p.0).collect();
            let oris: Vec<f64> = samples.iter().map(|p| p.1).collect();
            for (got, want) in as_array(&d.mag_stats).iter().zip(naive_stats(&mags)) {
                prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
            }
            for (got, want) in as_array(&d.ori_stats).iter().zip(naive_stats(&oris)) {
                prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
            }
            for st in [&d.mag_stats, &d.ori_stats] {
                prop_assert!(st.min <= st.mean && st.mean <= st.max);
                prop_assert_eq!(st.range, st.max - st.min);
            }
            prop_assert!(as_array(&d.mag_stats).iter().all(|v| v.is_finite()));
        }

        #[test]
        fn magnitude_scaling(samples in proptest::collection::vec((0.0f64..20.0, 0.0f64..180.0), 1..40), k in -3i32..4) {
            // powers of two keep the scaling exact in floating point
            let c = 2f64.powi(k);
            let s: Vec<PolarSample> = samples.iter().map(|&(m, o)| ps(m, o)).collect();
            let scaled: Vec<PolarSample> = samples.iter().map(|&(m, o)| ps(c * m, o)).collect();
            let a = frame_descriptor(&s, 0, "p");
            let b = frame_descriptor(&scaled, 0, "p");
            prop_assert_eq!(b.mag_sum, c * a.mag_sum);
            prop_assert_eq!(b.cs_term, c * a.cs_term);
            for (x, y) in as_array(&a.mag_stats).iter().zip(as_array(&b.mag_stats)) {
                prop_assert!((y - c * x).abs() <= 1e-12 * (1.0 + (c * x).abs()));
            }
            prop_assert_eq!(a.ori_stats, b.ori_stats);
        }
    }
}
