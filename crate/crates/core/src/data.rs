//! In-memory labelled image sets shared by preprocessing, training and file IO.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{preprocess, PreprocessParams, ProcessingMode};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::radar::BeatCube;
use crate::scene::{GestureClass, RawSample, VariantKind};

/// One preprocessed capture. Pixels are stored at 32-bit precision,
/// row-major `[height][width][layer]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub label: GestureClass,
    pub variant: VariantKind,
    pub pixels: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub mode: ProcessingMode,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub samples: Vec<LabeledImage>,
}

impl Dataset {
    pub fn new(mode: ProcessingMode, height: usize, width: usize, channels: usize) -> Self {
        Self {
            mode,
            height,
            width,
            channels,
            samples: Vec::new(),
        }
    }

    pub fn pixels_per_sample(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: LabeledImage) -> Result<()> {
        if sample.pixels.len() != self.pixels_per_sample() {
            return Err(Error::Shape(format!(
                "sample has {} pixels, dataset expects {}x{}x{}",
                sample.pixels.len(),
                self.height,
                self.width,
                self.channels
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn same_layout(&self, other: &Dataset) -> bool {
        self.mode == other.mode
            && self.height == other.height
            && self.width == other.width
            && self.channels == other.channels
    }

    /// Concatenates `other` after `self`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if !self.same_layout(other) {
            return Err(Error::Shape(
                "cannot concatenate datasets with different layouts".into(),
            ));
        }
        let mut out = self.clone();
        out.samples.extend(other.samples.iter().cloned());
        Ok(out)
    }

    pub fn count(&self, variant: VariantKind) -> usize {
        self.samples.iter().filter(|s| s.variant == variant).count()
    }

    pub fn class_counts(&self) -> [usize; GestureClass::COUNT] {
        let mut counts = [0; GestureClass::COUNT];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    /// Samples of one variant, order preserved.
    pub fn filter_variant(&self, variant: VariantKind) -> Dataset {
        let mut out = Dataset::new(self.mode, self.height, self.width, self.channels);
        out.samples = self.samples.iter().filter(|s| s.variant == variant).cloned().collect();
        out
    }

    /// Moves `per_class` randomly chosen samples of every class into a
    /// second set. Both halves keep the original relative order.
    pub fn stratified_split(&self, per_class: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut held = vec![false; self.len()];
        for class in GestureClass::ALL {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.samples[i].label == class).collect();
            if idx.len() < per_class {
                return Err(Error::InvalidArgument(format!(
                    "class {class} has {} samples, cannot hold out {per_class}",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng);
            for &i in &idx[..per_class] {
                held[i] = true;
            }
        }
        let mut kept = Dataset::new(self.mode, self.height, self.width, self.channels);
        let mut out = kept.clone();
        for (s, h) in self.samples.iter().zip(held) {
            if h {
                out.samples.push(s.clone());
            } else {
                kept.samples.push(s.clone());
            }
        }
        Ok((kept, out))
    }
}

/// Preprocesses one cube into a labelled image.
pub fn to_labeled(
    cube: &BeatCube,
    label: GestureClass,
    variant: VariantKind,
    mode: ProcessingMode,
    params: &PreprocessParams,
) -> Result<LabeledImage> {
    let img = preprocess(cube, mode, params)?;
    Ok(LabeledImage {
        label,
        variant,
        pixels: img.data.iter().map(|&v| v as f32).collect(),
    })
}

/// Runs the preprocessing chain over raw captures, preserving their order.
pub fn build_dataset(
    raw: &[RawSample],
    mode: ProcessingMode,
    params: &PreprocessParams,
    exec: Execution,
) -> Result<Dataset> {
    let first = raw
        .first()
        .ok_or_else(|| Error::InvalidArgument("no raw samples to preprocess".into()))?;
    let (h, w) = params.image_shape(mode, first.cube.n_channels());
    let images = exec.try_map_range(raw.len(), |i| {
        let r = &raw[i];
        to_labeled(&r.cube, r.key.class, r.key.variant, mode, params)
    })?;
    let mut out = Dataset::new(mode, h, w, 2);
    for img in images {
        out.push(img)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{synth_dataset, DatasetSpec};
    use proptest::prelude::*;

    fn labelled(label: GestureClass, variant: VariantKind, tag: f32) -> LabeledImage {
        LabeledImage {
            label,
            variant,
            pixels: vec![tag; 4],
        }
    }

    fn mixed(n: usize) -> Dataset {
        let mut d = Dataset::new(ProcessingMode::Range, 1, 2, 2);
        for i in 0..n {
            let variant = if i % 4 == 3 {
                VariantKind::Sterile
            } else {
                VariantKind::Human
            };
            d.push(labelled(GestureClass::ALL[i % 3], variant, i as f32)).unwrap();
        }
        d
    }

    #[test]
    fn push_checks_pixel_count() {
        let mut d = Dataset::new(ProcessingMode::Range, 1, 2, 2);
        let mut bad = labelled(GestureClass::Palm, VariantKind::Human, 0.0);
        bad.pixels.pop();
        assert!(matches!(d.push(bad), Err(Error::Shape(_))));
    }

    #[test]
    fn concat_requires_matching_layout() {
        let a = mixed(5);
        let joined = a.concat(&mixed(3)).unwrap();
        assert_eq!(joined.len(), 8);
        assert_eq!(joined.samples[5].pixels[0], 0.0);
        let other = Dataset::new(ProcessingMode::RangeAngle, 1, 2, 2);
        assert!(a.concat(&other).is_err());
    }

    #[test]
    fn filter_and_count_by_variant() {
        let d = mixed(12);
        assert_eq!(d.count(VariantKind::Sterile), 3);
        let s = d.filter_variant(VariantKind::Sterile);
        assert_eq!(s.len(), 3);
        assert!(s.samples.iter().all(|x| x.variant == VariantKind::Sterile));
        assert_eq!(d.class_counts(), [4, 4, 4]);
    }

    #[test]
    fn split_needs_enough_per_class() {
        assert!(mixed(6).stratified_split(3, 0).is_err());
        let (kept, held) = mixed(6).stratified_split(2, 0).unwrap();
        assert!(kept.is_empty());
        assert_eq!(held.len(), 6);
    }

    #[test]
    fn built_images_have_the_network_shapes() {
        let spec = DatasetSpec::with_counts(5, 2, 1);
        let raw = synth_dataset(&spec, Execution::Sequential).unwrap();
        for (mode, width) in [(ProcessingMode::Range, 8), (ProcessingMode::RangeAngle, 16)] {
            let d = build_dataset(&raw, mode, &PreprocessParams::default(), Execution::Parallel).unwrap();
            assert_eq!((d.height, d.width, d.channels, d.len()), (64, width, 2, 9));
            assert_eq!(d.count(VariantKind::Sterile), 3);
            for (s, r) in d.samples.iter().zip(&raw) {
                assert_eq!((s.label, s.variant), (r.key.class, r.key.variant));
            }
            let seq = build_dataset(&raw, mode, &PreprocessParams::default(), Execution::Sequential).unwrap();
            assert_eq!(seq, d);
        }
        assert!(build_dataset(
            &[],
            ProcessingMode::Range,
            &PreprocessParams::default(),
            Execution::Sequential
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_order_preserving_partition(n in 3usize..60, k in 0usize..4, seed in any::<u64>()) {
            let d = mixed(n);
            let per_class = k.min(n / 3);
            let (kept, held) = d.stratified_split(per_class, seed).unwrap();
            prop_assert_eq!(kept.len() + held.len(), n);
            prop_assert_eq!(held.class_counts(), [per_class; 3]);
            let tags = |x: &Dataset| x.samples.iter().map(|s| s.pixels[0] as usize).collect::<Vec<_>>();
            let (a, b) = (tags(&kept), tags(&held));
            prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
            let mut all: Vec<usize> = a.into_iter().chain(b).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(d.stratified_split(per_class, seed).unwrap(), (kept, held));
        }
    }
}
