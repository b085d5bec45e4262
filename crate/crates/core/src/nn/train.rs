use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::layers::sgd_step;
use crate::nn::network::{Network, NetworkSpec, Workspace};
use crate::scene::{splitmix64, GestureClass, VariantKind};

/// Samples per work unit when a batch is split for gradient accumulation.
/// Fixed so the summation order never depends on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Classification quality on one set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; GestureClass::COUNT]; GestureClass::COUNT],
    /// Mean cross-entropy.
    pub loss: f64,
    pub count: usize,
}

impl Metrics {
    fn from_outcomes(outcomes: &[(usize, usize, f64)]) -> Self {
        let mut confusion = [[0; GestureClass::COUNT]; GestureClass::COUNT];
        for &(truth, pred, _) in outcomes {
            confusion[truth][pred] += 1;
        }
        // Summing in sorted order makes the mean independent of sample order.
        let mut losses: Vec<f64> = outcomes.iter().map(|o| o.2).collect();
        losses.sort_by(f64::total_cmp);
        let count = outcomes.len();
        let correct: usize = (0..GestureClass::COUNT).map(|i| confusion[i][i]).sum();
        Self {
            accuracy: correct as f64 / count as f64,
            confusion,
            loss: losses.iter().sum::<f64>() / count as f64,
            count,
        }
    }

    pub fn correct(&self) -> usize {
        (0..GestureClass::COUNT).map(|i| self.confusion[i][i]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Running mean loss over the epoch's mini-batches (pre-update).
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest validation accuracy.
    pub model: Network,
    pub best_epoch: usize,
    pub history: Vec<EpochMetrics>,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochMetrics {
        &self.history[self.best_epoch - 1]
    }
}

fn check_compatible(spec: &NetworkSpec, data: &Dataset) -> Result<()> {
    if (data.height, data.width, data.channels) != (spec.input_h, spec.input_w, spec.input_c) {
        return Err(Error::Shape(format!(
            "{} dataset has {}x{}x{} images but the network expects {}x{}x{}",
            data.mode, data.height, data.width, data.channels, spec.input_h, spec.input_w, spec.input_c
        )));
    }
    Ok(())
}

fn to_f64(sample: &LabeledImage) -> Vec<f64> {
    sample.pixels.iter().map(|&v| f64::from(v)).collect()
}

/// Accuracy, confusion and mean loss of `model` on `data`. Read-only on the model.
pub fn evaluate(model: &Network, data: &Dataset, exec: Execution) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty dataset".into()));
    }
    check_compatible(model.spec(), data)?;
    let chunks: Vec<&[LabeledImage]> = data.samples.chunks(GRAD_CHUNK).collect();
    let per_chunk = exec.map_slice(&chunks, |chunk| -> Result<Vec<(usize, usize, f64)>> {
        let mut ws = Workspace::default();
        chunk
            .iter()
            .map(|s| {
                let p = model.predict(&to_f64(s), s.label.index(), &mut ws)?;
                Ok((s.label.index(), p.predicted, p.loss))
            })
            .collect()
    });
    let mut outcomes = Vec::with_capacity(data.len());
    for c in per_chunk {
        outcomes.extend(c?);
    }
    Ok(Metrics::from_outcomes(&outcomes))
}

/// Summed gradients, summed loss and number correct over `batch`.
fn batch_gradients(
    model: &Network,
    samples: &[LabeledImage],
    batch: &[usize],
    exec: Execution,
) -> Result<(Vec<Vec<f64>>, f64, usize)> {
    let chunks: Vec<&[usize]> = batch.chunks(GRAD_CHUNK).collect();
    let partials = exec.map_slice(&chunks, |chunk| -> Result<(Vec<Vec<f64>>, f64, usize)> {
        let mut ws = Workspace::default();
        let mut grads = model.zero_grads();
        let mut loss = 0.0;
        let mut correct = 0;
        for &i in chunk.iter() {
            let s = &samples[i];
            let p = model.accumulate_gradients(&to_f64(s), s.label.index(), &mut grads, &mut ws)?;
            loss += p.loss;
            correct += usize::from(p.predicted == s.label.index());
        }
        Ok((grads, loss, correct))
    });
    let mut total = model.zero_grads();
    let mut loss = 0.0;
    let mut correct = 0;
    for part in partials {
        let (g, l, c) = part?;
        for (t, p) in total.iter_mut().zip(&g) {
            for (a, b) in t.iter_mut().zip(p) {
                *a += b;
            }
        }
        loss += l;
        correct += c;
    }
    Ok((total, loss, correct))
}

/// One mini-batch SGD update with the batch-mean gradient.
pub fn train_step(
    model: &mut Network,
    samples: &[LabeledImage],
    batch: &[usize],
    lr: f64,
    exec: Execution,
) -> Result<(f64, usize)> {
    let (grads, loss, correct) = batch_gradients(model, samples, batch, exec)?;
    let scale = 1.0 / batch.len() as f64;
    for (param, g) in model.params_mut().iter_mut().zip(grads) {
        let mean: Vec<f64> = g.into_iter().map(|v| v * scale).collect();
        sgd_step(param.data_mut(), &mean, lr)?;
    }
    Ok((loss, correct))
}

/// Trains with the split discipline enforced: the validation set may only
/// contain human captures.
pub fn train(
    spec: NetworkSpec,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome> {
    if let Some(pos) = val_set.samples.iter().position(|s| s.variant != VariantKind::Human) {
        return Err(Error::InvalidArgument(format!(
            "validation sample {pos} is a sterile capture; validation must be human-only"
        )));
    }
    fit(spec, train_set, val_set, cfg, exec)
}

/// Mini-batch SGD without any constraint on what the validation set holds.
///
/// Initialisation and per-epoch shuffles are seeded from `cfg.seed`, so the
/// same inputs always give bit-identical parameters and history.
pub fn fit(
    spec: NetworkSpec,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation sets must be non-empty".into(),
        ));
    }
    check_compatible(&spec, train_set)?;
    check_compatible(&spec, val_set)?;
    let mut model = Network::init(spec, cfg.seed)?;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_acc = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ splitmix64(epoch as u64)));
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(cfg.batch_size) {
            let (l, c) = train_step(&mut model, &train_set.samples, batch, cfg.learning_rate, exec)?;
            loss_sum += l;
            correct += c;
        }
        let val = evaluate(&model, val_set, exec)?;
        let record = EpochMetrics {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss: val.loss,
            val_accuracy: val.accuracy,
        };
        if !record.train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        if val.accuracy > best_acc {
            best_acc = val.accuracy;
            best = model.clone();
            best_epoch = epoch;
        }
        history.push(record);
    }
    if best_epoch == 0 {
        return Err(Error::Config("training needs at least one epoch".into()));
    }
    Ok(TrainOutcome {
        model: best,
        best_epoch,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::ProcessingMode;
    use proptest::prelude::*;

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            input_h: 4,
            input_w: 2,
            input_c: 2,
            conv_blocks: 1,
            filters: 2,
            kernel_h: 3,
            kernel_w: 1,
            classes: 3,
        }
    }

    fn sample(label: GestureClass, variant: VariantKind, pixels: Vec<f32>) -> LabeledImage {
        LabeledImage { label, variant, pixels }
    }

    fn set(samples: Vec<LabeledImage>) -> Dataset {
        let mut d = Dataset::new(ProcessingMode::Range, 4, 2, 2);
        for s in samples {
            d.push(s).unwrap();
        }
        d
    }

    fn toy() -> Dataset {
        set(vec![
            sample(GestureClass::Palm, VariantKind::Human, vec![1.0; 16]),
            sample(GestureClass::ThumbsUp, VariantKind::Human, vec![-1.0; 16]),
        ])
    }

    fn random_set(n: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        set((0..n)
            .map(|i| {
                let pixels = (0..16).map(|_| rng.random_range(-2.0f32..2.0)).collect();
                sample(GestureClass::ALL[i % 3], VariantKind::Human, pixels)
            })
            .collect())
    }

    #[test]
    fn separable_pair_is_learned() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            batch_size: 2,
            epochs: 50,
            seed: 3,
            shuffle: true,
        };
        let out = train(tiny_spec(), &toy(), &toy(), &cfg, Execution::Sequential).unwrap();
        assert_eq!(out.history.last().unwrap().train_accuracy, 1.0);
        assert_eq!(out.best().val_accuracy, 1.0);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_alone() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            batch_size: 1,
            epochs: 5,
            seed: 9,
            shuffle: true,
        };
        let out = fit(tiny_spec(), &random_set(12, 1), &toy(), &cfg, Execution::Sequential).unwrap();
        assert_eq!(out.model, Network::init(tiny_spec(), 9).unwrap());
    }

    #[test]
    fn training_is_reproducible_and_independent_of_execution() {
        let cfg = TrainConfig {
            learning_rate: 0.05,
            batch_size: 5,
            epochs: 4,
            seed: 11,
            shuffle: true,
        };
        let (tr, val) = (random_set(30, 2), random_set(9, 3));
        let a = fit(tiny_spec(), &tr, &val, &cfg, Execution::Sequential).unwrap();
        let b = fit(tiny_spec(), &tr, &val, &cfg, Execution::Parallel).unwrap();
        let c = fit(tiny_spec(), &tr, &val, &cfg, Execution::Sequential).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, c.model);
        let other = fit(
            tiny_spec(),
            &tr,
            &val,
            &TrainConfig { seed: 12, ..cfg },
            Execution::Sequential,
        )
        .unwrap();
        assert_ne!(a.model, other.model);
    }

    #[test]
    fn best_epoch_is_the_first_maximum() {
        let cfg = TrainConfig {
            learning_rate: 0.05,
            batch_size: 4,
            epochs: 6,
            seed: 5,
            shuffle: true,
        };
        let out = fit(
            tiny_spec(),
            &random_set(24, 4),
            &random_set(12, 6),
            &cfg,
            Execution::Sequential,
        )
        .unwrap();
        let max = out.history.iter().map(|h| h.val_accuracy).fold(f64::MIN, f64::max);
        let first = out.history.iter().position(|h| h.val_accuracy == max).unwrap() + 1;
        assert_eq!(out.best_epoch, first);
        let m = evaluate(&out.model, &random_set(12, 6), Execution::Sequential).unwrap();
        assert_eq!(m.accuracy, out.best().val_accuracy);
    }

    #[test]
    fn sterile_validation_is_refused_by_train_but_not_fit() {
        let mut val = toy();
        val.samples[1].variant = VariantKind::Sterile;
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(tiny_spec(), &toy(), &val, &cfg, Execution::Sequential),
            Err(Error::InvalidArgument(_))
        ));
        assert!(fit(tiny_spec(), &toy(), &val, &cfg, Execution::Sequential).is_ok());
    }

    #[test]
    fn nan_input_is_a_numeric_failure() {
        let mut bad = toy();
        bad.samples[0].pixels[3] = f32::NAN;
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let err = fit(tiny_spec(), &bad, &toy(), &cfg, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let cfg = TrainConfig::default();
        let empty = set(vec![]);
        assert!(fit(tiny_spec(), &empty, &toy(), &cfg, Execution::Sequential).is_err());
        assert!(evaluate(&Network::init(tiny_spec(), 0).unwrap(), &empty, Execution::Sequential).is_err());
        let wide = Dataset::new(ProcessingMode::RangeAngle, 4, 4, 2);
        assert!(matches!(check_compatible(&tiny_spec(), &wide), Err(Error::Shape(_))));
        assert!(TrainConfig { batch_size: 0, ..cfg }.validate().is_err());
        assert!(TrainConfig {
            learning_rate: -1.0,
            ..cfg
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            learning_rate: f64::NAN,
            ..cfg
        }
        .validate()
        .is_err());
        assert!(fit(
            tiny_spec(),
            &toy(),
            &toy(),
            &TrainConfig { epochs: 0, ..cfg },
            Execution::Sequential
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn confusion_rows_count_each_class(n in 1usize..40, seed in any::<u64>()) {
            let data = random_set(n, seed);
            let model = Network::init(tiny_spec(), seed).unwrap();
            let m = evaluate(&model, &data, Execution::Parallel).unwrap();
            let counts = data.class_counts();
            for (row, &count) in m.confusion.iter().zip(&counts) {
                prop_assert_eq!(row.iter().sum::<usize>(), count);
            }
            prop_assert_eq!(m.count, n);
            prop_assert!((m.accuracy - m.correct() as f64 / n as f64).abs() < 1e-15);
            prop_assert!(m.loss.is_finite() && m.loss >= 0.0);
        }
    }
}
