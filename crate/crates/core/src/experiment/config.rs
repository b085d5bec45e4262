//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dsp::{PreprocessParams, ProcessingMode};
use crate::error::{Error, Result};
use crate::nn::{NetworkSpec, TrainConfig};
use crate::radar::{ArrayGeometry, RadarConfig};
use crate::scene::DatasetSpec;

/// Which captures a cell trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrainingMix {
    HumanOnly,
    Combined,
}

impl TrainingMix {
    pub const ALL: [TrainingMix; 2] = [TrainingMix::HumanOnly, TrainingMix::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            TrainingMix::HumanOnly => "human",
            TrainingMix::Combined => "combined",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TrainingMix::HumanOnly => "Human Only",
            TrainingMix::Combined => "Combined",
        }
    }
}

impl fmt::Display for TrainingMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainingMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(TrainingMix::HumanOnly),
            "combined" => Ok(TrainingMix::Combined),
            other => Err(Error::InvalidArgument(format!(
                "unknown training mix '{other}' (expected human|combined)"
            ))),
        }
    }
}

/// Every tunable of a full experiment. Defaults are the desk-scale setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data_seed: u64,
    pub human_per_class: usize,
    pub sterile_per_class: usize,
    pub val_per_class: usize,
    pub sessions_per_class: usize,
    pub human_noise_power: f64,
    pub sterile_noise_power: f64,
    pub sterile_gain: f64,
    pub hand_wander: f64,
    pub z0_ref: f64,
    pub f0: f64,
    pub bandwidth: f64,
    pub n_k: usize,
    pub start_bin: usize,
    pub range_bins: usize,
    pub angle_bins: usize,
    pub conv_blocks: usize,
    pub filters: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle: bool,
    pub seeds: Vec<u64>,
    pub sar_positions: usize,
    pub sar_pixels: usize,
    pub sar_n_k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_seed: 1,
            human_per_class: 1000,
            sterile_per_class: 1000,
            val_per_class: 200,
            sessions_per_class: 8,
            human_noise_power: 400.0,
            sterile_noise_power: 400.0,
            sterile_gain: 10.0,
            hand_wander: 0.03,
            z0_ref: 0.4,
            f0: 77e9,
            bandwidth: 4e9,
            n_k: 256,
            start_bin: 6,
            range_bins: 64,
            angle_bins: 16,
            conv_blocks: 1,
            filters: 16,
            learning_rate: 0.02,
            batch_size: 64,
            epochs: 15,
            shuffle: true,
            seeds: vec![1, 2, 3],
            sar_positions: 48,
            sar_pixels: 40,
            sar_n_k: 48,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse value '{value}' for key '{key}'")))
}

impl ExperimentConfig {
    /// Parses config text. Blank lines and `#` comments are ignored; unknown
    /// keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "data_seed" => self.data_seed = parse(key, v)?,
            "human_per_class" => self.human_per_class = parse(key, v)?,
            "sterile_per_class" => self.sterile_per_class = parse(key, v)?,
            "val_per_class" => self.val_per_class = parse(key, v)?,
            "sessions_per_class" => self.sessions_per_class = parse(key, v)?,
            "human_noise_power" => self.human_noise_power = parse(key, v)?,
            "sterile_noise_power" => self.sterile_noise_power = parse(key, v)?,
            "sterile_gain" => self.sterile_gain = parse(key, v)?,
            "hand_wander" => self.hand_wander = parse(key, v)?,
            "z0_ref" => self.z0_ref = parse(key, v)?,
            "f0" => self.f0 = parse(key, v)?,
            "bandwidth" => self.bandwidth = parse(key, v)?,
            "n_k" => self.n_k = parse(key, v)?,
            "start_bin" => self.start_bin = parse(key, v)?,
            "range_bins" => self.range_bins = parse(key, v)?,
            "angle_bins" => self.angle_bins = parse(key, v)?,
            "conv_blocks" => self.conv_blocks = parse(key, v)?,
            "filters" => self.filters = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "shuffle" => self.shuffle = parse(key, v)?,
            "seeds" => {
                self.seeds = v
                    .split(',')
                    .map(|s| parse::<u64>(key, s.trim()))
                    .collect::<Result<Vec<_>>>()?
            }
            "sar_positions" => self.sar_positions = parse(key, v)?,
            "sar_pixels" => self.sar_pixels = parse(key, v)?,
            "sar_n_k" => self.sar_n_k = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one training seed is required".into()));
        }
        if self.val_per_class == 0 || self.val_per_class >= self.human_per_class {
            return Err(Error::Config(format!(
                "val_per_class must be in 1..{} (human_per_class)",
                self.human_per_class
            )));
        }
        if self.sar_positions < 2 || self.sar_pixels < 2 || self.sar_n_k < 2 {
            return Err(Error::Config(
                "SAR positions, pixels and n_k must each be at least 2".into(),
            ));
        }
        self.dataset_spec()?.validate()?;
        self.train_config(0).validate()?;
        for mode in ProcessingMode::ALL {
            self.network_spec(mode).validate()?;
        }
        Ok(())
    }

    pub fn radar(&self) -> Result<RadarConfig> {
        RadarConfig::with_bandwidth(self.f0, self.bandwidth, self.n_k)
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        let mut spec = DatasetSpec::with_counts(self.data_seed, self.human_per_class, self.sterile_per_class);
        spec.radar = self.radar()?;
        spec.geometry = ArrayGeometry::default_for(&spec.radar);
        spec.human.noise_power = self.human_noise_power;
        spec.sterile.noise_power = self.sterile_noise_power;
        spec.sterile.reflectivity_gain = self.sterile_gain;
        spec.hand_wander = self.hand_wander;
        spec.z0_ref = self.z0_ref;
        spec.sessions_per_class = self.sessions_per_class;
        Ok(spec)
    }

    pub fn preprocess(&self) -> PreprocessParams {
        PreprocessParams {
            start_bin: self.start_bin,
            range_bins: self.range_bins,
            angle_bins: self.angle_bins,
        }
    }

    pub fn network_spec(&self, mode: ProcessingMode) -> NetworkSpec {
        let pp = self.preprocess();
        let channels = ArrayGeometry::default_for(&RadarConfig::default()).n_channels();
        let (h, w) = pp.image_shape(mode, channels);
        let mut spec = NetworkSpec::for_mode(mode);
        spec.input_h = h;
        spec.input_w = w;
        spec.kernel_w = (w / 4).max(1);
        spec.conv_blocks = self.conv_blocks;
        spec.filters = self.filters;
        spec
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            shuffle: self.shuffle,
        }
    }

    /// Canonical text form; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "data_seed = {}\nhuman_per_class = {}\nsterile_per_class = {}\nval_per_class = {}\n\
             sessions_per_class = {}\nhuman_noise_power = {}\nsterile_noise_power = {}\nsterile_gain = {}\n\
             hand_wander = {}\nz0_ref = {}\nf0 = {}\nbandwidth = {}\nn_k = {}\nstart_bin = {}\n\
             range_bins = {}\nangle_bins = {}\nconv_blocks = {}\nfilters = {}\nlearning_rate = {}\n\
             batch_size = {}\nepochs = {}\nshuffle = {}\nseeds = {}\nsar_positions = {}\nsar_pixels = {}\n\
             sar_n_k = {}\n",
            self.data_seed,
            self.human_per_class,
            self.sterile_per_class,
            self.val_per_class,
            self.sessions_per_class,
            self.human_noise_power,
            self.sterile_noise_power,
            self.sterile_gain,
            self.hand_wander,
            self.z0_ref,
            self.f0,
            self.bandwidth,
            self.n_k,
            self.start_bin,
            self.range_bins,
            self.angle_bins,
            self.conv_blocks,
            self.filters,
            self.learning_rate,
            self.batch_size,
            self.epochs,
            self.shuffle,
            seeds.join(", "),
            self.sar_positions,
            self.sar_pixels,
            self.sar_n_k,
        )
    }
}
