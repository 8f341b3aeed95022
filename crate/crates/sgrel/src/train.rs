//! Single-threaded multi-task SGD over a scene-graph dataset.
//!
//! Each epoch shuffles the images, walks them in batches, samples ordered
//! object pairs per image (annotated pairs first, then random unannotated
//! ones — those still carry geometric pretext targets), pools the batch
//! into one objective evaluation and takes one plain gradient step.
//!
//! Everything is driven by one seeded generator, so a run is a pure
//! function of `(dataset, model config, train config)`: repeating it
//! reproduces the parameter trajectory bit for bit. The per-epoch wall
//! time in [`EpochStats::seconds`] is the only nondeterministic output.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::labels::labels_for_pair;
use crate::loss::{backward, PairExample};
use crate::model::{build_semantic_prior, pair_input, ModelParams, RelNetConfig};
use crate::scene::{ordered_pairs, Dataset, SceneGraphAnnotation};

/// RNG stream for shuffling and pair sampling. Streams 0-5 initialize the
/// model's modules, so training noise never shifts the starting point.
const TRAIN_STREAM: u64 = 6;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    /// Step size for plain gradient descent.
    pub learning_rate: f64,
    /// Per-epoch multiplier on the step size; 1.0 keeps it constant.
    pub lr_decay: f64,
    pub epochs: usize,
    /// Pairs sampled from each image, annotated ones first.
    pub pairs_per_image: usize,
    /// Weights of the four pretext terms in the objective.
    pub loss_weights: [f64; 4],
    pub seed: u64,
    /// Images pooled into one gradient step.
    pub batch_images: usize,
    /// Additive smoothing for the class-pair predicate statistics.
    pub smoothing: f64,
}

impl TrainConfig {
    pub fn new(epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.005,
            lr_decay: 1.0,
            epochs,
            pairs_per_image: 512,
            loss_weights: [1.0; 4],
            seed: 0,
            batch_images: 4,
            smoothing: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay >= 0.0) {
            return Err(Error::config(format!(
                "learning-rate decay must be finite and non-negative, got {}",
                self.lr_decay
            )));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.pairs_per_image == 0 {
            return Err(Error::config("pairs per image must be at least 1"));
        }
        if self.batch_images == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        for (i, w) in self.loss_weights.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::config(format!(
                    "pretext weight {} must be finite and non-negative, got {w}",
                    i + 1
                )));
            }
        }
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            return Err(Error::config(format!(
                "smoothing must be positive and finite, got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

/// Mean objective terms over one epoch's batches, plus wall time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub l0: f64,
    pub tasks: [f64; 4],
    pub total: f64,
    /// Pairs seen this epoch.
    pub pairs: usize,
    /// Pairs with an annotated predicate.
    pub annotated: usize,
    /// Wall-clock duration of the epoch. The only field that differs
    /// between two otherwise identical runs.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

/// Samples up to `k` ordered pairs from one image: annotated pairs first,
/// in annotation order (a pair annotated several times keeps its first
/// predicate and appears once), then unannotated pairs drawn uniformly
/// without replacement. Images with fewer than two objects yield nothing.
pub fn sample_pairs(
    ann: &SceneGraphAnnotation,
    k: usize,
    rng: &mut impl Rng,
) -> Vec<(usize, usize, Option<usize>)> {
    let n = ann.objects.len();
    if n < 2 || k == 0 {
        return Vec::new();
    }

    let mut gt: HashMap<(usize, usize), usize> = HashMap::new();
    let mut positives: Vec<(usize, usize, Option<usize>)> = Vec::new();
    for t in &ann.triplets {
        // A pair annotated several times keeps its first predicate.
        if let Entry::Vacant(e) = gt.entry((t.subject, t.object)) {
            e.insert(t.predicate);
            positives.push((t.subject, t.object, Some(t.predicate)));
        }
    }
    positives.truncate(k);

    let need = k - positives.len();
    if need > 0 {
        let mut candidates: Vec<(usize, usize)> = ordered_pairs(n)
            .filter(|key| !gt.contains_key(key))
            .collect();
        // Partial Fisher-Yates: the first `need` slots end up as a uniform
        // draw without replacement.
        let take = need.min(candidates.len());
        for i in 0..take {
            let j = rng.gen_range(i..candidates.len());
            candidates.swap(i, j);
            let (s, o) = candidates[i];
            positives.push((s, o, None));
        }
    }
    positives
}

fn check_compatible(dataset: &Dataset, config: &RelNetConfig) -> Result<()> {
    if config.num_classes != dataset.num_classes() {
        return Err(Error::config(format!(
            "model expects {} object classes, dataset has {}",
            config.num_classes,
            dataset.num_classes()
        )));
    }
    if config.num_predicates != dataset.num_predicates() {
        return Err(Error::config(format!(
            "model expects {} predicates, dataset has {}",
            config.num_predicates,
            dataset.num_predicates()
        )));
    }
    if config.use_visual {
        if !dataset.has_features() {
            return Err(Error::config(
                "visual module enabled but the dataset carries no feature vectors",
            ));
        }
        if config.d_vis != dataset.d_vis {
            return Err(Error::config(format!(
                "model expects {}-dimensional features, dataset has {}",
                config.d_vis, dataset.d_vis
            )));
        }
    }
    Ok(())
}

/// Trains a freshly initialized model on the dataset. Returns the final
/// parameters and the per-epoch loss record.
pub fn train(
    dataset: &Dataset,
    model_config: RelNetConfig,
    tc: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    tc.validate()?;
    dataset.validate()?;
    check_compatible(dataset, &model_config)?;
    if !dataset.images.iter().any(|img| img.objects.len() >= 2) {
        return Err(Error::input("no image in the dataset has two objects to pair"));
    }

    let mut model = ModelParams::init(model_config, tc.seed)?;
    let prior = build_semantic_prior(
        &dataset.images,
        model.config().num_classes,
        model.config().num_predicates,
        tc.smoothing,
    )?;
    model.set_prior(prior)?;

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    rng.set_stream(TRAIN_STREAM);

    let needs_visual = model.config().use_visual;
    let mut order: Vec<usize> = (0..dataset.images.len()).collect();
    let mut epochs = Vec::with_capacity(tc.epochs);

    for epoch in 1..=tc.epochs {
        let started = Instant::now();
        let lr = tc.learning_rate * tc.lr_decay.powi(epoch as i32 - 1);
        order.shuffle(&mut rng);

        let mut batches = 0usize;
        let mut sum_l0 = 0.0;
        let mut sum_tasks = [0.0; 4];
        let mut sum_total = 0.0;
        let mut pairs = 0usize;
        let mut annotated = 0usize;

        for chunk in order.chunks(tc.batch_images) {
            let mut examples: Vec<PairExample> = Vec::new();
            for &img_idx in chunk {
                let ann = &dataset.images[img_idx];
                for (s, o, gt) in sample_pairs(ann, tc.pairs_per_image, &mut rng) {
                    examples.push(PairExample {
                        input: pair_input(&ann.image, &ann.objects[s], &ann.objects[o], needs_visual)?,
                        gt,
                        labels: labels_for_pair(&ann.objects[s].bbox, &ann.objects[o].bbox, &ann.image),
                    });
                }
            }
            if examples.is_empty() {
                continue;
            }

            let (lb, grads) = backward(&model, &examples, tc.loss_weights)?;
            model.sgd_step(&grads, lr);

            batches += 1;
            sum_l0 += lb.l0;
            for (acc, t) in sum_tasks.iter_mut().zip(lb.tasks) {
                *acc += t;
            }
            sum_total += lb.total;
            pairs += lb.n;
            annotated += lb.n_annotated;
        }

        let b = batches.max(1) as f64;
        epochs.push(EpochStats {
            epoch,
            l0: sum_l0 / b,
            tasks: [sum_tasks[0] / b, sum_tasks[1] / b, sum_tasks[2] / b, sum_tasks[3] / b],
            total: sum_total / b,
            pairs,
            annotated,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    Ok((model, TrainReport { epochs }))
}
