//! The `synth`, `train`, `eval`, `sar` and `report` workflows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{build_dataset, Dataset};
use crate::dsp::ProcessingMode;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiment::config::{ExperimentConfig, TrainingMix};
use crate::experiment::format::{read_checkpoint, read_dataset, sha256_file, write_checkpoint, write_dataset};
use crate::nn::{evaluate, train, Metrics, Network, TrainOutcome};
use crate::radar::{ArrayGeometry, RadarConfig, TargetCloud};
use crate::sar::{backproject, image_snr, simulate_aperture_scan, write_pgm, ImageGrid, SarImage, TargetMask};
use crate::scene::{
    make_gesture_cloud, scan_raster, splitmix64, synth_dataset, GestureClass, VariantKind, VariantSpec,
};

/// Full-scale accuracies measured on real captures, shown next to desk-scale results.
pub const REFERENCE_ACCURACY: [(ProcessingMode, f64, f64); 2] = [
    (ProcessingMode::Range, 84.9, 93.1),
    (ProcessingMode::RangeAngle, 90.2, 95.4),
];

/// File locations under an experiment output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn manifest(&self) -> PathBuf {
        self.data_dir().join("manifest.txt")
    }

    /// Path of a dataset file relative to the data directory.
    pub fn dataset_rel(mode: ProcessingMode, name: &str) -> String {
        format!("{}/{name}.fgl", mode.as_str())
    }

    pub fn dataset(&self, mode: ProcessingMode, name: &str) -> PathBuf {
        self.data_dir().join(Self::dataset_rel(mode, name))
    }

    pub fn run_name(mode: ProcessingMode, mix: TrainingMix, seed: u64) -> String {
        format!("{}_{}_seed{seed}", mode.as_str(), mix.as_str())
    }

    pub fn run_dir(&self, mode: ProcessingMode, mix: TrainingMix, seed: u64) -> PathBuf {
        self.root.join("runs").join(Self::run_name(mode, mix, seed))
    }

    pub fn checkpoint(&self, mode: ProcessingMode, mix: TrainingMix, seed: u64) -> PathBuf {
        self.run_dir(mode, mix, seed).join("model.fgc")
    }

    pub fn metrics_csv(&self, mode: ProcessingMode, mix: TrainingMix, seed: u64) -> PathBuf {
        self.run_dir(mode, mix, seed).join("metrics.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn figures_dir(&self) -> PathBuf {
        self.root.join("figures")
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

const SPLITS: [&str; 3] = ["train_human", "train_sterile", "val"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub total: usize,
    pub train_human: usize,
    pub train_sterile: usize,
    pub val: usize,
    pub files: Vec<PathBuf>,
}

impl SynthSummary {
    pub fn describe(&self) -> String {
        format!(
            "synthesised {} captures: {} human training, {} sterile training, {} human validation",
            self.total, self.train_human, self.train_sterile, self.val
        )
    }
}

/// Simulates the dataset once and writes both preprocessing modes, with the
/// same captures held out for validation in each.
pub fn cmd_synth(cfg: &ExperimentConfig, out: &Path, exec: Execution) -> Result<SynthSummary> {
    cfg.validate()?;
    let layout = Layout::new(out);
    let spec = cfg.dataset_spec()?;
    let raw = synth_dataset(&spec, exec)?;
    let split_seed = splitmix64(cfg.data_seed ^ 0x0005_7A11_DA7A);
    let mut manifest = String::from("# sha256 of every dataset file, relative to this directory\n");
    let mut summary = SynthSummary {
        total: raw.len(),
        train_human: 0,
        train_sterile: 0,
        val: 0,
        files: Vec::new(),
    };
    for mode in ProcessingMode::ALL {
        let all = build_dataset(&raw, mode, &cfg.preprocess(), exec)?;
        let human = all.filter_variant(VariantKind::Human);
        let sterile = all.filter_variant(VariantKind::Sterile);
        let (train_human, val) = human.stratified_split(cfg.val_per_class, split_seed)?;
        summary.train_human = train_human.len();
        summary.train_sterile = sterile.len();
        summary.val = val.len();
        create_dir(&layout.data_dir().join(mode.as_str()))?;
        for (name, set) in SPLITS.iter().zip([&train_human, &sterile, &val]) {
            let path = layout.dataset(mode, name);
            write_dataset(&path, set)?;
            writeln!(manifest, "{} {}", Layout::dataset_rel(mode, name), sha256_file(&path)?).unwrap();
            summary.files.push(path);
        }
    }
    write_text(&layout.manifest(), &manifest)?;
    Ok(summary)
}

fn read_manifest(layout: &Layout) -> Result<BTreeMap<String, String>> {
    let path = layout.manifest();
    let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = BTreeMap::new();
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let (name, hash) = line
            .split_once(' ')
            .ok_or_else(|| Error::Format(format!("malformed manifest line '{line}'")))?;
        out.insert(name.to_string(), hash.trim().to_string());
    }
    Ok(out)
}

/// Loads a dataset file after checking it against the manifest written by `synth`.
pub fn load_verified(layout: &Layout, mode: ProcessingMode, name: &str) -> Result<Dataset> {
    let manifest = read_manifest(layout)?;
    let rel = Layout::dataset_rel(mode, name);
    let expected = manifest
        .get(&rel)
        .ok_or_else(|| Error::Format(format!("{rel} is not listed in the data manifest")))?;
    let path = layout.dataset(mode, name);
    let found = sha256_file(&path)?;
    if &found != expected {
        return Err(Error::Checksum {
            path,
            expected: expected.clone(),
            found,
        });
    }
    let data = read_dataset(&path)?;
    if data.mode != mode {
        return Err(Error::Shape(format!(
            "{} holds {} data, expected {mode}",
            path.display(),
            data.mode
        )));
    }
    Ok(data)
}

/// Training set of one cell: human captures, plus every sterile capture for `Combined`.
pub fn training_set(layout: &Layout, mode: ProcessingMode, mix: TrainingMix) -> Result<Dataset> {
    let human = load_verified(layout, mode, "train_human")?;
    match mix {
        TrainingMix::HumanOnly => Ok(human),
        TrainingMix::Combined => human.concat(&load_verified(layout, mode, "train_sterile")?),
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub outcome: TrainOutcome,
    pub human: usize,
    pub sterile: usize,
}

impl TrainSummary {
    pub fn describe(&self) -> String {
        let best = self.outcome.best();
        format!(
            "trained on {} human + {} sterile captures; best epoch {} with validation accuracy {:.2}%",
            self.human,
            self.sterile,
            best.epoch,
            100.0 * best.val_accuracy
        )
    }
}

pub fn metrics_csv(outcome: &TrainOutcome) -> String {
    let mut csv = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for e in &outcome.history {
        writeln!(
            csv,
            "{},{:.6},{:.6},{:.6},{:.6}",
            e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
        )
        .unwrap();
    }
    csv
}

/// Trains one cell of the experiment and stores its checkpoint and per-epoch log.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    out: &Path,
    mode: ProcessingMode,
    mix: TrainingMix,
    seed: u64,
    exec: Execution,
) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = Layout::new(out);
    let train_set = training_set(&layout, mode, mix)?;
    let val = load_verified(&layout, mode, "val")?;
    let outcome = train(cfg.network_spec(mode), &train_set, &val, &cfg.train_config(seed), exec)?;
    let run_dir = layout.run_dir(mode, mix, seed);
    create_dir(&run_dir)?;
    write_checkpoint(&layout.checkpoint(mode, mix, seed), &outcome.model, mode)?;
    write_text(&layout.metrics_csv(mode, mix, seed), &metrics_csv(&outcome))?;
    Ok(TrainSummary {
        run_dir,
        human: train_set.count(VariantKind::Human),
        sterile: train_set.count(VariantKind::Sterile),
        outcome,
    })
}

/// Evaluates a checkpoint on a dataset; both must be for the same mode.
pub fn evaluate_checkpoint(
    model: &Network,
    model_mode: ProcessingMode,
    data: &Dataset,
    exec: Execution,
) -> Result<Metrics> {
    if model_mode != data.mode {
        return Err(Error::Shape(format!(
            "checkpoint is for {model_mode} data but the dataset is {}",
            data.mode
        )));
    }
    evaluate(model, data, exec)
}

/// Evaluates the checkpoint of one cell on the frozen validation set.
pub fn cmd_eval(out: &Path, mode: ProcessingMode, mix: TrainingMix, seed: u64, exec: Execution) -> Result<Metrics> {
    let layout = Layout::new(out);
    let val = load_verified(&layout, mode, "val")?;
    let (model, model_mode) = read_checkpoint(&layout.checkpoint(mode, mix, seed))?;
    evaluate_checkpoint(&model, model_mode, &val, exec)
}

/// Evaluates an arbitrary checkpoint file on an arbitrary dataset file.
pub fn cmd_eval_files(checkpoint: &Path, data: &Path, exec: Execution) -> Result<Metrics> {
    let (model, mode) = read_checkpoint(checkpoint)?;
    evaluate_checkpoint(&model, mode, &read_dataset(data)?, exec)
}

pub fn format_metrics(m: &Metrics) -> String {
    let rows: Vec<String> = m
        .confusion
        .iter()
        .map(|r| format!("[{}]", r.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")))
        .collect();
    let classes: Vec<String> = GestureClass::ALL.iter().map(|c| format!("\"{}\"", c.name())).collect();
    format!(
        "{{\n  \"accuracy\": {:.6},\n  \"loss\": {:.6},\n  \"count\": {},\n  \"classes\": [{}],\n  \"confusion\": [{}]\n}}\n",
        m.accuracy,
        m.loss,
        m.count,
        classes.join(", "),
        rows.join(", ")
    )
}

#[derive(Debug, Clone)]
pub struct SarSummary {
    pub sterile: SarImage,
    pub human: SarImage,
    pub sterile_snr: f64,
    pub human_snr: f64,
    pub files: Vec<PathBuf>,
}

fn bbox(cloud: &TargetCloud) -> (f64, f64, f64, f64) {
    cloud.points.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
    )
}

/// Images a palm held at the reference distance, once as an aluminium
/// cutout and once as a human hand, from a full raster scan.
pub fn sar_palm_pair(cfg: &ExperimentConfig, exec: Execution) -> Result<SarSummary> {
    let spec = cfg.dataset_spec()?;
    let radar = RadarConfig::with_bandwidth(cfg.f0, cfg.bandwidth, cfg.sar_n_k)?;
    let geometry = ArrayGeometry::default_for(&radar);
    let positions = scan_raster(&spec.aperture, cfg.sar_positions, cfg.sar_positions);
    let subject = spec.human_subjects[0].clone();
    let z = cfg.z0_ref;
    let center = (0.0, 0.0, z);
    let bare = VariantSpec {
        tripod: false,
        ..VariantSpec::sterile().noise_free()
    };
    let outline = make_gesture_cloud(GestureClass::Palm, &subject, &bare, &spec.aperture, center)?;
    let (x0, x1, y0, y1) = bbox(&outline);
    let margin = 0.06;
    // Extra room below the hand so the tripod column is in view.
    let below = 0.15;
    let grid = ImageGrid {
        x_range: (x0 - margin, x1 + margin),
        y_range: (y0 - below, y1 + margin),
        nx: cfg.sar_pixels,
        ny: cfg.sar_pixels,
    };
    let mask = TargetMask {
        x_range: (x0 - 0.01, x1 + 0.01),
        y_range: (y0 - 0.01, y1 + 0.01),
    };
    let image = |variant: &VariantSpec, seed: u64| -> Result<(SarImage, f64)> {
        // Both targets rest on the tripod for imaging.
        let variant = &VariantSpec {
            tripod: true,
            ..*variant
        };
        let cloud = make_gesture_cloud(GestureClass::Palm, &subject, variant, &spec.aperture, center)?;
        let scan = simulate_aperture_scan(
            &cloud,
            &geometry,
            &radar,
            variant.noise_power,
            seed,
            cfg.z0_ref,
            &positions,
            exec,
        )?;
        let img = backproject(&scan, &grid, z, exec)?;
        let snr = image_snr(&img, &mask)?;
        Ok((img, snr))
    };
    let (sterile, sterile_snr) = image(&spec.sterile, splitmix64(cfg.data_seed ^ 1))?;
    let (human, human_snr) = image(&spec.human, splitmix64(cfg.data_seed ^ 2))?;
    Ok(SarSummary {
        sterile,
        human,
        sterile_snr,
        human_snr,
        files: Vec::new(),
    })
}

/// Writes the sterile and human palm SAR images as 16-bit PGMs.
pub fn cmd_sar(cfg: &ExperimentConfig, out: &Path, exec: Execution) -> Result<SarSummary> {
    cfg.validate()?;
    let dir = Layout::new(out).figures_dir();
    create_dir(&dir)?;
    let mut s = sar_palm_pair(cfg, exec)?;
    for (name, img) in [("sar_sterile_palm", &s.sterile), ("sar_human_palm", &s.human)] {
        let path = dir.join(format!("{name}.pgm"));
        let sidecar = write_pgm(img, &path)?;
        s.files.push(path);
        s.files.push(sidecar);
    }
    let snr_path = dir.join("sar_snr.txt");
    write_text(
        &snr_path,
        &format!(
            "sterile_snr = {:.6}\nhuman_snr = {:.6}\nratio = {:.6}\n",
            s.sterile_snr,
            s.human_snr,
            s.sterile_snr / s.human_snr
        ),
    )?;
    s.files.push(snr_path);
    Ok(s)
}

/// Accuracy of every trained cell, keyed by mode, mix and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub seeds: Vec<u64>,
    pub accuracy: BTreeMap<(ProcessingMode, TrainingMix, u64), f64>,
    pub human_train: usize,
    pub sterile_train: usize,
    pub val: usize,
    pub text: String,
    pub csv: String,
}

impl Report {
    pub fn per_seed(&self, mode: ProcessingMode, mix: TrainingMix) -> Vec<f64> {
        self.seeds.iter().map(|&s| self.accuracy[&(mode, mix, s)]).collect()
    }

    pub fn mean(&self, mode: ProcessingMode, mix: TrainingMix) -> f64 {
        let v = self.per_seed(mode, mix);
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Combined minus HumanOnly mean accuracy, percentage points.
    pub fn delta_points(&self, mode: ProcessingMode) -> f64 {
        100.0 * (self.mean(mode, TrainingMix::Combined) - self.mean(mode, TrainingMix::HumanOnly))
    }

    pub fn sterile_fraction(&self) -> f64 {
        self.sterile_train as f64 / (self.human_train + self.sterile_train) as f64
    }
}

fn mode_title(mode: ProcessingMode) -> &'static str {
    match mode {
        ProcessingMode::Range => "Range",
        ProcessingMode::RangeAngle => "Range-Angle",
    }
}

fn render_report(r: &Report, val_hash: &str, sar: &SarSummary) -> (String, String) {
    let mut t = String::new();
    writeln!(
        t,
        "Static hand-gesture classification: human-only versus sterile-supplemented training"
    )
    .unwrap();
    writeln!(t).unwrap();
    writeln!(t, "Validation: {} human captures, sha256 {val_hash}", r.val).unwrap();
    writeln!(t, "Human Only training: {} human, 0 sterile", r.human_train).unwrap();
    writeln!(
        t,
        "Combined training:   {} human, {} sterile ({:.1}% sterile, {:.1}% human)",
        r.human_train,
        r.sterile_train,
        100.0 * r.sterile_fraction(),
        100.0 * (1.0 - r.sterile_fraction())
    )
    .unwrap();
    let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
    writeln!(t).unwrap();
    writeln!(
        t,
        "Validation accuracy, mean over seeds {} [min, max]",
        seeds.join(", ")
    )
    .unwrap();
    writeln!(t, "{:<13}{:<26}{:<26}{}", "", "Human Only", "Combined", "Delta").unwrap();
    for mode in ProcessingMode::ALL {
        let cell = |mix| {
            let v = r.per_seed(mode, mix);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            format!(
                "{:.2}% [{:.2}, {:.2}]",
                100.0 * r.mean(mode, mix),
                100.0 * lo,
                100.0 * hi
            )
        };
        writeln!(
            t,
            "{:<13}{:<26}{:<26}{:+.2} pts",
            mode_title(mode),
            cell(TrainingMix::HumanOnly),
            cell(TrainingMix::Combined),
            r.delta_points(mode)
        )
        .unwrap();
    }
    writeln!(t).unwrap();
    writeln!(t, "Per seed").unwrap();
    for ((mode, mix, seed), acc) in &r.accuracy {
        writeln!(
            t,
            "  {:<12} {:<10} seed {:<6} {:.2}%",
            mode_title(*mode),
            mix.title(),
            seed,
            100.0 * acc
        )
        .unwrap();
    }
    writeln!(t).unwrap();
    writeln!(t, "Full-scale reference on real captures (80 000 per class):").unwrap();
    for (mode, human, combined) in REFERENCE_ACCURACY {
        writeln!(
            t,
            "  {:<12} {human:.1}% -> {combined:.1}% ({:+.1} pts)",
            mode_title(mode),
            combined - human
        )
        .unwrap();
    }
    writeln!(t).unwrap();
    writeln!(
        t,
        "SAR palm image SNR: sterile {:.2}, human {:.2} (ratio {:.2})",
        sar.sterile_snr,
        sar.human_snr,
        sar.sterile_snr / sar.human_snr
    )
    .unwrap();

    let mut csv = String::from("mode,mix,seed,accuracy\n");
    for ((mode, mix, seed), acc) in &r.accuracy {
        writeln!(csv, "{mode},{mix},{seed},{acc:.6}").unwrap();
    }
    for mode in ProcessingMode::ALL {
        for mix in TrainingMix::ALL {
            writeln!(csv, "{mode},{mix},mean,{:.6}", r.mean(mode, mix)).unwrap();
        }
    }
    (t, csv)
}

/// Mean range-profile magnitude (over channels and samples) of one class and variant.
pub fn mean_range_profile(data: &Dataset, class: GestureClass, variant: VariantKind) -> Vec<f64> {
    let mut acc = vec![0.0; data.height];
    let mut n = 0usize;
    for s in data.samples.iter().filter(|s| s.label == class && s.variant == variant) {
        n += 1;
        for (h, a) in acc.iter_mut().enumerate() {
            for w in 0..data.width {
                let i = (h * data.width + w) * data.channels;
                *a += f64::from(s.pixels[i]).hypot(f64::from(s.pixels[i + 1])) / data.width as f64;
            }
        }
    }
    if n > 0 {
        acc.iter_mut().for_each(|v| *v /= n as f64);
    }
    acc
}

/// 8-bit PGM line plot: one column band per curve value, white on black.
fn plot_pgm(curves: &[Vec<f64>], path: &Path) -> Result<()> {
    const H: usize = 128;
    const COL: usize = 4;
    let n = curves.iter().map(Vec::len).max().unwrap_or(0);
    let w = n * COL;
    let max = curves.iter().flatten().copied().fold(0.0, f64::max).max(1e-12);
    let mut px = vec![0u8; w * H];
    for (ci, curve) in curves.iter().enumerate() {
        let shade = 255 - (ci * 100).min(200) as u8;
        for (i, &v) in curve.iter().enumerate() {
            let y = H - 1 - ((v / max) * (H - 1) as f64).round() as usize;
            for dx in 0..COL {
                px[y * w + i * COL + dx] = px[y * w + i * COL + dx].max(shade);
            }
        }
    }
    let mut bytes = format!("P5\n{w} {H}\n255\n").into_bytes();
    bytes.extend_from_slice(&px);
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_range_figures(layout: &Layout) -> Result<()> {
    let dir = layout.figures_dir();
    create_dir(&dir)?;
    let val = load_verified(layout, ProcessingMode::Range, "val")?;
    let sterile = load_verified(layout, ProcessingMode::Range, "train_sterile")?;
    let mut csv = String::from("bin");
    let mut columns = Vec::new();
    for class in GestureClass::ALL {
        let human = mean_range_profile(&val, class, VariantKind::Human);
        let ster = mean_range_profile(&sterile, class, VariantKind::Sterile);
        write!(csv, ",{}_human,{}_sterile", class.name(), class.name()).unwrap();
        plot_pgm(
            &[ster.clone(), human.clone()],
            &dir.join(format!("range_profile_{}.pgm", class.name())),
        )?;
        columns.push(human);
        columns.push(ster);
    }
    csv.push('\n');
    for b in 0..val.height {
        write!(csv, "{b}").unwrap();
        for c in &columns {
            write!(csv, ",{:.6}", c[b]).unwrap();
        }
        csv.push('\n');
    }
    write_text(&dir.join("range_profiles.csv"), &csv)
}

/// Builds the 2×2 accuracy table from every trained cell and writes the
/// report plus supporting figures.
pub fn cmd_report(cfg: &ExperimentConfig, out: &Path, exec: Execution) -> Result<Report> {
    cfg.validate()?;
    let layout = Layout::new(out);
    let mut missing = Vec::new();
    for mode in ProcessingMode::ALL {
        for mix in TrainingMix::ALL {
            for &seed in &cfg.seeds {
                if !layout.checkpoint(mode, mix, seed).is_file() {
                    missing.push(Layout::run_name(mode, mix, seed));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingRuns(missing));
    }

    let mut accuracy = BTreeMap::new();
    let mut val_len = 0;
    for mode in ProcessingMode::ALL {
        let val = load_verified(&layout, mode, "val")?;
        val_len = val.len();
        for mix in TrainingMix::ALL {
            for &seed in &cfg.seeds {
                let (model, model_mode) = read_checkpoint(&layout.checkpoint(mode, mix, seed))?;
                let m = evaluate_checkpoint(&model, model_mode, &val, exec)?;
                accuracy.insert((mode, mix, seed), m.accuracy);
            }
        }
    }
    let human_train = read_dataset(&layout.dataset(ProcessingMode::Range, "train_human"))?.len();
    let sterile_train = read_dataset(&layout.dataset(ProcessingMode::Range, "train_sterile"))?.len();
    let val_hash = read_manifest(&layout)?
        .get(&Layout::dataset_rel(ProcessingMode::Range, "val"))
        .cloned()
        .unwrap_or_default();

    write_range_figures(&layout)?;
    let sar = cmd_sar(cfg, out, exec)?;

    let mut report = Report {
        seeds: cfg.seeds.clone(),
        accuracy,
        human_train,
        sterile_train,
        val: val_len,
        text: String::new(),
        csv: String::new(),
    };
    let (text, csv) = render_report(&report, &val_hash, &sar);
    report.text = text;
    report.csv = csv;
    let dir = layout.report_dir();
    create_dir(&dir)?;
    write_text(&dir.join("report.txt"), &report.text)?;
    write_text(&dir.join("report.csv"), &report.csv)?;
    Ok(report)
}

/// Synthesises, trains every cell for every seed, and reports.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, exec: Execution) -> Result<Report> {
    cmd_synth(cfg, out, exec)?;
    for mode in ProcessingMode::ALL {
        for mix in TrainingMix::ALL {
            for &seed in &cfg.seeds {
                cmd_train(cfg, out, mode, mix, seed, exec)?;
            }
        }
    }
    cmd_report(cfg, out, exec)
}
