//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use harvest_activity::calibration::{
    calibrate, derive_thresholds, kmeans_silhouette, silhouette, CalibrationReport, ClusterModel,
};
use harvest_activity::classifier::{attribute_votes, classify_frame, rolling_mode, FlLabel, Label};
use harvest_activity::descriptor::{
    correlation_sensitivity, frame_descriptor, Attribute, FrameDescriptor, ParameterVector,
};
use harvest_activity::flow::{estimate_flow, PolarSample, PyramidConfig};
use harvest_activity::io::texture::SineTexture;
use harvest_activity::io::{render_synthetic, SynthConfig};
use harvest_activity::metrics::{run_variants, score, VariantSpec};
use harvest_activity::pipeline::{
    calibration_vectors, extract_series, labeled_series, timelines, PickerSeries, PipelineConfig,
};

const TRAIN_SEED: u64 = 1;
const HELD_OUT: std::ops::Range<u64> = 100..110;
const HELD_OUT_FRAMES: usize = 200;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let train = Training::build();
    let held_out = HeldOut::build(&train.report);

    let results = [
        ("flow accuracy", flow_accuracy()),
        ("correlation sensitivity oracle", cs_oracle()),
        ("KDE bimodality", kde_bimodality(&train)),
        ("silhouette ordering", silhouette_ordering(&train)),
        ("end-to-end synthetic", end_to_end(&held_out)),
        ("variant direction", variant_direction(&held_out)),
        ("rolling-mode oracle", rolling_mode_oracle()),
        ("published centers", published_centers()),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {} ({name}): {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- flow

fn flow_accuracy() -> Outcome {
    let (w, h) = (128, 96);
    let margin = 16;
    let cfg = PyramidConfig::default();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let start = Instant::now();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sx, sy) = if seed % 2 == 0 {
            loop {
                let v = (rng.random_range(-4i32..=4) as f64, rng.random_range(-4i32..=4) as f64);
                let m = v.0.hypot(v.1);
                if (1.0..=4.0).contains(&m) {
                    break v;
                }
            }
        } else {
            let m = rng.random_range(1.0..=4.0);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            (m * a.cos(), m * a.sin())
        };
        let texture = SineTexture::random(&mut rng, 12, 6.0, 24.0, 0.5, 0.3);
        let a = texture.render(w, h, 0.0, 0.0, 0).unwrap();
        let b = texture.render(w, h, sx, sy, 1).unwrap();
        let flow = estimate_flow(&a, &b, &cfg).unwrap();
        let (mut sum, mut n) = (0.0, 0usize);
        for y in margin..h - margin {
            for x in margin..w - margin {
                let (dx, dy) = flow.at(x, y);
                sum += (dx as f64 - sx).hypot(dy as f64 - sy);
                n += 1;
            }
        }
        let epe = sum / n as f64;
        worst = worst.max(epe);
        if epe >= 0.2 {
            failures.push(format!("seed {seed} ({sx:.2},{sy:.2}) epe {epe:.3}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 5.0,
        format!("worst interior mean EPE {worst:.4} px over 20 shifts, {secs:.2} s {failures:?}"),
    )
}

// ------------------------------------------------- correlation sensitivity

fn cs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let frames = rng.random_range(1..=8);
        let descriptors: Vec<(FrameDescriptor, Vec<(f64, f64)>)> = (0..frames)
            .map(|f| {
                let n = rng.random_range(1..=400);
                let pairs: Vec<(f64, f64)> = (0..n)
                    .map(|_| (rng.random_range(0.0..8.0), rng.random_range(0.0..180.0)))
                    .collect();
                let samples: Vec<PolarSample> = pairs
                    .iter()
                    .map(|&(m, o)| PolarSample {
                        magnitude: m,
                        orientation: o,
                    })
                    .collect();
                (frame_descriptor(&samples, f, "p"), pairs)
            })
            .collect();
        let mut naive_total = 0.0;
        for (d, pairs) in &descriptors {
            // every magnitude times every orientation, over twice the count
            let n = pairs.len() as f64;
            let mut term = 0.0;
            for &(m, _) in pairs {
                for &(_, o) in pairs {
                    term += m * o;
                }
            }
            term /= 2.0 * n;
            worst = worst.max(((d.cs_term - term) / term).abs());
            naive_total += term;
        }
        let total = correlation_sensitivity(descriptors.iter().map(|(d, _)| d));
        worst = worst.max(((total - naive_total) / naive_total).abs());
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e} over 1000 sets"))
}

// -------------------------------------------------------- calibration

struct Training {
    report: CalibrationReport,
    vectors: usize,
}

impl Training {
    fn build() -> Training {
        let cfg = SynthConfig::mixed(600, 2, TRAIN_SEED);
        let scene = render_synthetic(&cfg, TRAIN_SEED).unwrap();
        let series = extract_series(&scene.frames, &scene.masks, &PipelineConfig::default()).unwrap();
        let vectors = calibration_vectors(&series);
        let report = calibrate(&vectors, PipelineConfig::default().window).unwrap();
        Training {
            report,
            vectors: vectors.len(),
        }
    }
}

fn kde_bimodality(train: &Training) -> Outcome {
    let counts: Vec<String> = Attribute::ALL
        .iter()
        .map(|a| format!("{}={}", a.name(), train.report.kdes[a].mode_count()))
        .collect();
    let pass = Attribute::ALL.iter().all(|a| train.report.kdes[a].mode_count() == 2);
    outcome(pass, format!("modes {} from {} vectors", counts.join(" "), train.vectors))
}

fn silhouette_ordering(train: &Training) -> Outcome {
    let mut ordered = 0;
    let mut parts = Vec::new();
    for a in Attribute::ALL {
        let s: Vec<f64> = train.report.clusters[&a].iter().map(|c| c.silhouette).collect();
        if s[0] > s[1] && s[1] >= s[2] {
            ordered += 1;
        }
        parts.push(format!("{} {:.3}/{:.3}/{:.3}", a.name(), s[0], s[1], s[2]));
    }
    let points = [0.0, 1.0, 10.0, 11.0];
    // a = 1, b = 10.5 for the outer points; a = 1, b = 9.5 for the inner ones
    let hand = ((1.0 - 1.0 / 10.5) + (1.0 - 1.0 / 9.5)) / 2.0;
    let direct = silhouette(&points, &[0, 0, 1, 1], 2);
    let fitted = kmeans_silhouette("x", &points, 2).unwrap().silhouette;
    let formula_ok = (direct - hand).abs() < 1e-3 && (fitted - hand).abs() < 1e-3;
    outcome(
        ordered >= 3 && formula_ok,
        format!(
            "{ordered}/4 ordered (k=2/3/4: {}); four-point case {direct:.4} vs {hand:.4}",
            parts.join(", ")
        ),
    )
}

// ------------------------------------------------------ held-out scenes

struct Scene {
    seed: u64,
    series: Vec<PickerSeries>,
    truth: BTreeMap<String, Vec<Label>>,
}

struct HeldOut {
    cal: harvest_activity::calibration::CalibrationModel,
    clean: Vec<Scene>,
    noisy: Vec<Scene>,
}

impl HeldOut {
    fn build(report: &CalibrationReport) -> HeldOut {
        let run = |seed: u64, noisy: bool| {
            let mut cfg = SynthConfig::mixed(HELD_OUT_FRAMES, 2, seed);
            if noisy {
                cfg.noise_sigma = 0.05;
                cfg.blur_radius = 1;
                cfg = cfg.with_occlusion_fraction(0.1, seed);
            }
            let scene = render_synthetic(&cfg, seed).unwrap();
            let series =
                extract_series(&scene.frames, &scene.masks, &PipelineConfig::default()).unwrap();
            Scene {
                seed,
                series,
                truth: scene.truth,
            }
        };
        HeldOut {
            cal: report.model.clone(),
            clean: HELD_OUT.map(|s| run(s, false)).collect(),
            noisy: HELD_OUT.map(|s| run(s, true)).collect(),
        }
    }
}

struct SceneStats {
    acc: f64,
    /// Frames from a true switch to the matching batch label.
    raw_lag: usize,
    /// Same, counted from the first frame after the switch in which the
    /// picker is detected again.
    visible_lag: usize,
}

fn scene_stats(scene: &Scene, cal: &harvest_activity::calibration::CalibrationModel) -> SceneStats {
    let tl = timelines(&scene.series, cal, cal.window).unwrap();
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    let (mut raw_lag, mut visible_lag) = (0, 0);
    for (t, series) in tl.iter().zip(&scene.series) {
        let labels = &scene.truth[&t.picker_id];
        pred.extend(t.fl.iter().map(|l| l.label));
        truth.extend(t.fl.iter().map(|l| labels[l.frame_index]));
        let bfl: BTreeMap<usize, Label> = t.bfl.iter().map(|b| (b.frame_index, b.label.label())).collect();
        let measured: BTreeMap<usize, bool> = series
            .frames
            .iter()
            .zip(&series.vectors)
            .map(|(&f, v)| (f, !v.propagated))
            .collect();
        for s in 2..labels.len() {
            if labels[s] == labels[s - 1] {
                continue;
            }
            let caught = (s..labels.len()).find(|f| bfl.get(f) == Some(&labels[s]));
            let seen = (s..labels.len()).find(|f| measured.get(f) == Some(&true)).unwrap_or(s);
            raw_lag = raw_lag.max(caught.map_or(usize::MAX, |f| f - s));
            visible_lag = visible_lag.max(caught.map_or(usize::MAX, |f| f.saturating_sub(seen)));
        }
    }
    SceneStats {
        acc: score(&pred, &truth).unwrap().acc.unwrap(),
        raw_lag,
        visible_lag,
    }
}

fn end_to_end(held: &HeldOut) -> Outcome {
    let clean: Vec<SceneStats> = held.clean.iter().map(|s| scene_stats(s, &held.cal)).collect();
    let noisy: Vec<SceneStats> = held.noisy.iter().map(|s| scene_stats(s, &held.cal)).collect();
    let min_acc = |v: &[SceneStats]| v.iter().map(|x| x.acc).fold(1.0, f64::min);
    let max_of = |v: &[SceneStats], f: fn(&SceneStats) -> usize| v.iter().map(f).max().unwrap_or(0);
    let (clean_acc, noisy_acc) = (min_acc(&clean), min_acc(&noisy));
    let clean_lag = max_of(&clean, |x| x.raw_lag);
    let noisy_lag = max_of(&noisy, |x| x.visible_lag);
    outcome(
        clean_acc >= 0.95 && noisy_acc >= 0.80 && clean_lag <= 5 && noisy_lag <= 5,
        format!(
            "lowest FL ACC over {} seeds: clean {clean_acc:.4}, noisy {noisy_acc:.4}; \
             largest BFL lag: clean {clean_lag}, noisy {noisy_lag} after the picker is visible \
             ({} from the switch itself)",
            held.clean.len(),
            max_of(&noisy, |x| x.raw_lag)
        ),
    )
}

fn variant_direction(held: &HeldOut) -> Outcome {
    let variants: Vec<VariantSpec> = VariantSpec::standard_set()
        .into_iter()
        .filter(|v| v.name == "proposed" || v.name == "variant_i")
        .collect();
    let mut wins = 0;
    let mut parts = Vec::new();
    for scene in &held.noisy {
        let labeled = labeled_series(&scene.series, &scene.truth).unwrap();
        let reports = run_variants(&labeled, &held.cal, &variants).unwrap();
        let (full, reduced) = (reports[0].score.acc.unwrap(), reports[1].score.acc.unwrap());
        wins += usize::from(full > reduced);
        parts.push(format!("{}:{full:.3}>{reduced:.3}", scene.seed));
    }
    outcome(wins >= 9, format!("{wins}/10 seeds [{}]", parts.join(" ")))
}

// ---------------------------------------------------------- rolling mode

fn rolling_mode_oracle() -> Outcome {
    use Label::{NotPicking as N, Picking as P};
    let mut checked = 0;
    let mut mismatches = 0;
    for len in 1..=5usize {
        for bits in 0..1u32 << len {
            let labels: Vec<Label> = (0..len).map(|i| if bits >> i & 1 == 1 { P } else { N }).collect();
            let history: Vec<FlLabel> = labels
                .iter()
                .enumerate()
                .map(|(i, &label)| FlLabel {
                    frame_index: i,
                    picker_id: "p".into(),
                    label,
                    votes: [false; 4],
                })
                .collect();
            let p = labels.iter().filter(|&&l| l == P).count();
            let expected = if 2 * p > len {
                P
            } else if 2 * p < len {
                N
            } else {
                labels[len - 1]
            };
            checked += 1;
            if rolling_mode(&history).unwrap().label.label() != expected {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{checked} windows, {mismatches} mismatches"))
}

// ------------------------------------------------------ published centers

fn published_centers() -> Outcome {
    // (attribute, not-picking center, picking center)
    let table = [
        (Attribute::MagRange, 1550.49, 708.78),
        (Attribute::CsMean, 3433.18, 675.95),
        (Attribute::OriMax, 176.55, 104.82),
        (Attribute::OriMin, 3.47, 79.65),
    ];
    let models: Vec<ClusterModel> = table
        .iter()
        .map(|&(a, np, p): &(Attribute, f64, f64)| ClusterModel {
            attribute: a.name().into(),
            k: 2,
            centers: vec![np.min(p), np.max(p)],
            silhouette: 1.0,
            assignments: Vec::new(),
            inertia: 0.0,
            degenerate: false,
        })
        .collect();
    let cal = derive_thresholds(&models, 5).unwrap();
    let vector = |pick: bool| {
        let get = |a: Attribute| {
            let row = table.iter().find(|r| r.0 == a).unwrap();
            if pick { row.2 } else { row.1 }
        };
        ParameterVector {
            mag_range: get(Attribute::MagRange),
            cs_mean: get(Attribute::CsMean),
            ori_max: get(Attribute::OriMax),
            ori_min: get(Attribute::OriMin),
        }
    };
    let p_votes = attribute_votes(&vector(true), &cal).unwrap();
    let np_votes = attribute_votes(&vector(false), &cal).unwrap();
    let p_label = classify_frame(&vector(true), &cal, None, 0, "p").unwrap().label;
    let np_label = classify_frame(&vector(false), &cal, None, 0, "p").unwrap().label;
    let pass = p_votes.iter().all(|&v| v)
        && np_votes.iter().all(|&v| !v)
        && p_label == Label::Picking
        && np_label == Label::NotPicking;
    outcome(
        pass,
        format!(
            "P center {:?} with {}/4 votes, NP center {:?} with {}/4 against",
            p_label,
            p_votes.iter().filter(|&&v| v).count(),
            np_label,
            np_votes.iter().filter(|&&v| !v).count()
        ),
    )
}

// ------------------------------------------------------------ determinism

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_harvest"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn run_all_subcommands(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let steps: [&[&str]; 7] = [
        &["synth", "--out", "ds", "--seed", "5", "--frames", "40", "--noise", "0.02", "--occlusion", "0.1"],
        &["flow", "--dataset", "ds", "--out", "fl"],
        &["calibrate", "--dataset", "ds", "--flows", "fl/flows", "--out", "cal.json"],
        &["calibrate", "--dataset", "ds", "--out", "cal_direct.json"],
        &["classify", "--dataset", "ds", "--flows", "fl/flows", "--calibration", "cal.json", "--out", "tl.csv"],
        &["eval", "--dataset", "ds", "--flows", "fl/flows", "--calibration", "cal.json", "--out", "eval.csv"],
        &["plotdata", "--dataset", "ds", "--flows", "fl/flows", "--calibration", "cal.json", "--out", "plot.csv"],
    ];
    for step in steps {
        run_cli(dir, step)?;
    }
    let mut files = BTreeMap::new();
    collect(dir, dir, &mut files);
    Ok(files)
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(root, &path, out);
        } else {
            let key = path.strip_prefix(root).unwrap().display().to_string();
            out.insert(key, std::fs::read(&path).unwrap());
        }
    }
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (run_all_subcommands(a.path()), run_all_subcommands(b.path())) {
        (Ok(x), Ok(y)) => {
            let differing: Vec<&String> = x
                .iter()
                .filter(|(k, v)| y.get(*k) != Some(*v))
                .map(|(k, _)| k)
                .collect();
            let same_set = x.keys().eq(y.keys());
            outcome(
                differing.is_empty() && same_set,
                format!("{} files compared, differing {differing:?}", x.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("subcommand failed: {e}")),
    }
}
