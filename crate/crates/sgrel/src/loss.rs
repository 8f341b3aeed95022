//! The training objective: predicate cross-entropy plus four weighted
//! geometric pretext losses.
//!
//! The total for a batch of `n` pairs is
//!
//! ```text
//! L = L0 + w1*L1 + w2*L2 + w3*L3 + w4*L4
//! ```
//!
//! accumulated in exactly that order, where
//!
//! * `L0` — mean negative log-likelihood of the annotated predicate over
//!   the pairs that carry one (pairs without an annotation contribute no
//!   classification loss, only pretext signal);
//! * `L1` — binary cross-entropy on the two relative-position bits;
//! * `L2` — squared error on the normalized centroid distance, predicted
//!   from the spatial trunk;
//! * `L3` — squared error on the box overlap (IoU), predicted from the
//!   visual trunk;
//! * `L4` — squared error on the centroid distance again, predicted from
//!   the visual trunk.
//!
//! Pretext targets come from the boxes alone ([`crate::labels`]), so every
//! sampled pair supplies them. A disabled module zeroes the tasks that hang
//! off it.
//!
//! [`backward`] returns analytic gradients for the same scalar. The
//! classification term backpropagates through the softmax into **both**
//! trunk outputs (the semantic table is fixed); each pretext head sends its
//! gradient into the hidden activation it reads.

use crate::error::{Error, Result};
use crate::labels::SelfSupLabels;
use crate::model::{Forward, ModelGrads, ModelParams, PairInput};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// binary cross-entropy so saturated sigmoids cannot produce infinities.
/// The gradient is taken as zero in the clamped region.
pub const PROB_CLAMP: f64 = 1e-12;

/// One training pair: the model input, the annotated predicate if the pair
/// has one, and the geometric pretext targets from the raw boxes.
#[derive(Debug, Clone)]
pub struct PairExample {
    pub input: PairInput,
    /// Annotated predicate id, when this ordered pair carries one.
    pub gt: Option<usize>,
    pub labels: SelfSupLabels,
}

/// Every term of the objective for one batch, unweighted, plus the
/// weighted total.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    /// Mean `-ln p(annotated predicate)` over the `n_annotated` pairs.
    /// Zero when no pair in the batch is annotated.
    pub l0: f64,
    /// Pretext losses in task order: relative position, centroid distance
    /// (spatial trunk), overlap, centroid distance (visual trunk). Values
    /// are unweighted; a task whose module is disabled reports zero.
    pub tasks: [f64; 4],
    /// `l0 + w1*tasks[0] + w2*tasks[1] + w3*tasks[2] + w4*tasks[3]`,
    /// accumulated left to right in that order.
    pub total: f64,
    /// Pairs in the batch.
    pub n: usize,
    /// Pairs with an annotated predicate.
    pub n_annotated: usize,
    pub weights: [f64; 4],
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy over a batch of two-bit predictions:
/// `-(1/n) * sum_i sum_c [y ln x + (1-y) ln(1-x)]`, with `x` clamped away
/// from 0 and 1.
///
/// ```
/// let v = sgrel::loss::bce_multilabel(&[[0.5, 0.5]], &[[1.0, 0.0]]);
/// assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
/// ```
pub fn bce_multilabel(outputs: &[[f64; 2]], targets: &[[f64; 2]]) -> f64 {
    debug_assert_eq!(outputs.len(), targets.len());
    debug_assert!(!outputs.is_empty());
    let mut sum = 0.0;
    for (x, y) in outputs.iter().zip(targets) {
        for c in 0..2 {
            let xc = clamp_unit(x[c]);
            sum += y[c] * xc.ln() + (1.0 - y[c]) * (1.0 - xc).ln();
        }
    }
    -sum / outputs.len() as f64
}

/// Mean squared error `(1/n) * sum_i (x_i - y_i)^2`.
///
/// ```
/// assert_eq!(sgrel::loss::mse(&[0.5], &[0.0]), 0.25);
/// ```
pub fn mse(outputs: &[f64], targets: &[f64]) -> f64 {
    debug_assert_eq!(outputs.len(), targets.len());
    debug_assert!(!outputs.is_empty());
    let sum: f64 = outputs
        .iter()
        .zip(targets)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    sum / outputs.len() as f64
}

fn run_forwards(model: &ModelParams, examples: &[PairExample]) -> Result<Vec<Forward>> {
    if examples.is_empty() {
        return Err(Error::config("loss of an empty batch is undefined"));
    }
    let r = model.config().num_predicates;
    for (i, ex) in examples.iter().enumerate() {
        if let Some(g) = ex.gt {
            if g >= r {
                return Err(Error::input(format!(
                    "pair {i}: annotated predicate id {g} out of range (< {r})"
                )));
            }
        }
        if model.config().use_visual && ex.input.visual.is_none() {
            return Err(Error::config(format!(
                "pair {i}: visual module enabled but the pair has no feature vector"
            )));
        }
    }
    Ok(examples.iter().map(|ex| model.forward(&ex.input)).collect())
}

fn breakdown(examples: &[PairExample], forwards: &[Forward], weights: [f64; 4]) -> LossBreakdown {
    let n = examples.len();

    let mut n_annotated = 0usize;
    let mut l0_sum = 0.0;
    for (ex, fwd) in examples.iter().zip(forwards) {
        if let Some(g) = ex.gt {
            n_annotated += 1;
            l0_sum += -fwd.prediction[g].ln();
        }
    }
    let l0 = if n_annotated > 0 { l0_sum / n_annotated as f64 } else { 0.0 };

    let t1 = if forwards[0].aux.relpos.is_some() {
        let outputs: Vec<[f64; 2]> = forwards.iter().map(|f| f.aux.relpos.unwrap()).collect();
        let targets: Vec<[f64; 2]> = examples
            .iter()
            .map(|e| [f64::from(e.labels.relpos.0), f64::from(e.labels.relpos.1)])
            .collect();
        bce_multilabel(&outputs, &targets)
    } else {
        0.0
    };

    let scalar_task = |get: &dyn Fn(&Forward) -> Option<f64>, target: &dyn Fn(&PairExample) -> f64| -> f64 {
        if get(&forwards[0]).is_none() {
            return 0.0;
        }
        let outputs: Vec<f64> = forwards.iter().map(|f| get(f).unwrap()).collect();
        let targets: Vec<f64> = examples.iter().map(target).collect();
        mse(&outputs, &targets)
    };
    let t2 = scalar_task(&|f| f.aux.dist_spatial, &|e| e.labels.distance);
    let t3 = scalar_task(&|f| f.aux.iou, &|e| e.labels.iou);
    let t4 = scalar_task(&|f| f.aux.dist_visual, &|e| e.labels.distance);

    let tasks = [t1, t2, t3, t4];
    // The contract: the total is this expression, evaluated left to right.
    let total = l0 + weights[0] * t1 + weights[1] * t2 + weights[2] * t3 + weights[3] * t4;
    LossBreakdown { l0, tasks, total, n, n_annotated, weights }
}

/// Evaluates the full objective on a batch. Errors on an empty batch, an
/// out-of-range annotation, or a missing feature vector while the visual
/// module is enabled.
pub fn total_loss(
    model: &ModelParams,
    examples: &[PairExample],
    weights: [f64; 4],
) -> Result<LossBreakdown> {
    let forwards = run_forwards(model, examples)?;
    Ok(breakdown(examples, &forwards, weights))
}

/// Distance of the closest hidden pre-activation to the rectifier kink
/// over every module's forward pass on the batch.
///
/// A finite-difference probe of the objective is only trustworthy when
/// this margin clearly exceeds the probe step: stepping a parameter across
/// a kink makes the difference quotient measure two different linear
/// pieces. Callers verifying gradients numerically should resample the
/// batch until the margin is comfortable.
pub fn rectifier_margin(model: &ModelParams, examples: &[PairExample]) -> Result<f64> {
    let forwards = run_forwards(model, examples)?;
    let mut margin = f64::INFINITY;
    for f in &forwards {
        for cache in [
            &f.spt_cache,
            &f.vis_cache,
            &f.relpos_cache,
            &f.dist_s_cache,
            &f.dist_v_cache,
            &f.iou_cache,
        ]
        .into_iter()
        .flatten()
        {
            // The last layer's pre-activations feed the output activation,
            // not a rectifier; every earlier layer's do.
            for z in &cache.zs[..cache.zs.len() - 1] {
                for v in z {
                    margin = margin.min(v.abs());
                }
            }
        }
    }
    Ok(margin)
}

/// Evaluates the objective and its gradient with respect to every
/// trainable parameter. The returned breakdown is bit-identical to what
/// [`total_loss`] reports for the same inputs.
pub fn backward(
    model: &ModelParams,
    examples: &[PairExample],
    weights: [f64; 4],
) -> Result<(LossBreakdown, ModelGrads)> {
    let forwards = run_forwards(model, examples)?;
    let lb = breakdown(examples, &forwards, weights);
    let mut grads = model.zero_grads();

    let n = examples.len() as f64;
    let n0 = lb.n_annotated as f64;
    let r = model.config().num_predicates;

    for (ex, fwd) in examples.iter().zip(&forwards) {
        // Pretext heads first: each returns the gradient with respect to
        // the trunk activation it reads, which is injected into the trunk
        // backward pass below.
        let mut spt_inj: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut vis_inj: Vec<(usize, Vec<f64>)> = Vec::new();

        // Relative position: BCE fused through the sigmoid gives
        // dL/dz = w1 * (x - y) / n, zero where the clamp is active.
        if let (Some(head), Some(cache)) = (&model.relpos_head, &fwd.relpos_cache) {
            let out = cache.output();
            let y = [f64::from(ex.labels.relpos.0), f64::from(ex.labels.relpos.1)];
            let dz: Vec<f64> = (0..2)
                .map(|c| {
                    if out[c] < PROB_CLAMP || out[c] > 1.0 - PROB_CLAMP {
                        0.0
                    } else {
                        weights[0] * (out[c] - y[c]) / n
                    }
                })
                .collect();
            let d_in = head.backward_dz(cache, dz, &[], grads.relpos_head.as_mut().unwrap());
            spt_inj.push((model.spatial.as_ref().unwrap().final_hidden_index(), d_in));
        }

        // Squared-error heads: dL/d(output) = w * 2 * (x - y) / n; the
        // softplus derivative is applied inside the head's backward pass.
        if let (Some(head), Some(cache)) = (&model.dist_head_spatial, &fwd.dist_s_cache) {
            let d_out = [weights[1] * 2.0 * (cache.output()[0] - ex.labels.distance) / n];
            let d_in = head.backward(cache, &d_out, &[], grads.dist_head_spatial.as_mut().unwrap());
            spt_inj.push((model.spatial.as_ref().unwrap().prefinal_hidden_index(), d_in));
        }
        if let (Some(head), Some(cache)) = (&model.iou_head, &fwd.iou_cache) {
            let d_out = [weights[2] * 2.0 * (cache.output()[0] - ex.labels.iou) / n];
            let d_in = head.backward(cache, &d_out, &[], grads.iou_head.as_mut().unwrap());
            vis_inj.push((model.visual.as_ref().unwrap().prefinal_hidden_index(), d_in));
        }
        if let (Some(head), Some(cache)) = (&model.dist_head_visual, &fwd.dist_v_cache) {
            let d_out = [weights[3] * 2.0 * (cache.output()[0] - ex.labels.distance) / n];
            let d_in = head.backward(cache, &d_out, &[], grads.dist_head_visual.as_mut().unwrap());
            vis_inj.push((model.visual.as_ref().unwrap().prefinal_hidden_index(), d_in));
        }

        // Classification term, softmax fused with the log-likelihood:
        // dL0/d(logit_j) = (p_j - [j == gt]) / n_annotated. The fused
        // logits are the elementwise sum of the trunk outputs, so the same
        // gradient flows into each enabled trunk.
        let d_logits: Vec<f64> = match ex.gt {
            Some(g) => fwd
                .prediction
                .iter()
                .enumerate()
                .map(|(j, &p)| (p - f64::from(u8::from(j == g))) / n0)
                .collect(),
            None => vec![0.0; r],
        };

        if let (Some(trunk), Some(cache)) = (&model.spatial, &fwd.spt_cache) {
            let inj: Vec<(usize, &[f64])> = spt_inj.iter().map(|(i, v)| (*i, v.as_slice())).collect();
            trunk.backward_dz(cache, d_logits.clone(), &inj, grads.spatial.as_mut().unwrap());
        }
        if let (Some(trunk), Some(cache)) = (&model.visual, &fwd.vis_cache) {
            let inj: Vec<(usize, &[f64])> = vis_inj.iter().map(|(i, v)| (*i, v.as_slice())).collect();
            trunk.backward_dz(cache, d_logits, &inj, grads.visual.as_mut().unwrap());
        }
    }

    Ok((lb, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundingBox, ImageMeta};
    use crate::labels::labels_for_pair;
    use crate::model::{pair_input, RelNetConfig};
    use crate::scene::ObjectInstance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn obj(x: f64, y: f64, w: f64, h: f64, class_id: usize, d_vis: usize, rng: &mut ChaCha8Rng) -> ObjectInstance {
        ObjectInstance {
            bbox: BoundingBox::new(x, y, w, h).unwrap(),
            class_id,
            feature: if d_vis > 0 {
                Some((0..d_vis).map(|_| rng.gen_range(-1.0..1.0)).collect())
            } else {
                None
            },
        }
    }

    /// A small model plus a mixed batch (annotated and unannotated pairs)
    /// with non-degenerate geometry.
    fn fixture(seed: u64) -> (ModelParams, Vec<PairExample>) {
        let mut config = RelNetConfig::new(3, 4, 5);
        config.spatial_hidden = vec![8, 6];
        config.visual_hidden = vec![10, 6];
        config.relpos_hidden = 5;
        config.scalar_hidden = [5, 4];
        let model = ModelParams::init(config, seed).unwrap();

        let img = ImageMeta::new("t", 100.0, 80.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let objs = [
            obj(10.0, 10.0, 30.0, 20.0, 0, 5, &mut rng),
            obj(25.0, 18.0, 40.0, 35.0, 1, 5, &mut rng),
            obj(60.0, 5.0, 25.0, 50.0, 2, 5, &mut rng),
        ];
        let gts = [Some(1), None, Some(3), Some(0), None, Some(2)];
        let mut examples = Vec::new();
        let mut k = 0usize;
        for s in 0..3 {
            for o in 0..3 {
                if s == o {
                    continue;
                }
                examples.push(PairExample {
                    input: pair_input(&img, &objs[s], &objs[o], true).unwrap(),
                    gt: gts[k],
                    labels: labels_for_pair(&objs[s].bbox, &objs[o].bbox, &img),
                });
                k += 1;
            }
        }
        (model, examples)
    }

    fn zeroed(mut model: ModelParams) -> ModelParams {
        for i in 0..model.param_count() {
            model.set_param(i, 0.0);
        }
        model
    }

    #[test]
    fn bce_of_maximal_uncertainty_is_two_ln_two() {
        for y in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let v = bce_multilabel(&[[0.5, 0.5]], &[y]);
            assert!((v - 2.0 * LN_2).abs() < 1e-15, "y={y:?}: {v}");
        }
    }

    #[test]
    fn bce_of_a_perfect_prediction_is_negligible() {
        let v = bce_multilabel(&[[1.0, 0.0]], &[[1.0, 0.0]]);
        assert!((0.0..1e-11).contains(&v), "{v}");
    }

    #[test]
    fn bce_clamps_saturated_outputs_to_a_finite_value() {
        let v = bce_multilabel(&[[0.0, 1.0]], &[[1.0, 0.0]]);
        let expect = -2.0 * PROB_CLAMP.ln();
        assert!(v.is_finite());
        // `1 - (1 - eps)` does not reconstruct eps exactly, so the bound is
        // loose; the point is the clamp keeps the value finite and near
        // -2 ln(eps) rather than inf.
        assert!((v - expect).abs() < 1e-3, "{v} vs {expect}");
    }

    #[test]
    fn bce_averages_over_the_batch() {
        let a = bce_multilabel(&[[0.5, 0.5]], &[[1.0, 1.0]]);
        let b = bce_multilabel(&[[0.5, 0.5], [0.5, 0.5]], &[[1.0, 1.0], [0.0, 0.0]]);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn mse_hand_values() {
        assert_eq!(mse(&[0.5], &[0.0]), 0.25);
        assert_eq!(mse(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        // Mean, not sum.
        assert_eq!(mse(&[1.0, 0.0], &[0.0, 0.0]), 0.5);
    }

    #[test]
    fn a_zeroed_model_reproduces_the_closed_form_fixture() {
        let (model, _) = fixture(7);
        let model = zeroed(model);

        // With every parameter at zero the fused scores are uniform, the
        // sigmoid head answers 0.5 and the softplus heads answer ln 2,
        // whatever the geometry. Targets are pinned by hand.
        let img = ImageMeta::new("z", 100.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = obj(10.0, 10.0, 20.0, 20.0, 0, 5, &mut rng);
        let b = obj(40.0, 40.0, 20.0, 20.0, 1, 5, &mut rng);
        let ex = PairExample {
            input: pair_input(&img, &a, &b, true).unwrap(),
            gt: Some(2),
            labels: SelfSupLabels { relpos: (0, 0), distance: 0.25, iou: 0.5 },
        };

        let w = [0.5, 2.0, 1.0, 0.25];
        let lb = total_loss(&model, &[ex], w).unwrap();

        assert_eq!(lb.n, 1);
        assert_eq!(lb.n_annotated, 1);
        // Four predicates, uniform prediction.
        assert!((lb.l0 - 4.0f64.ln()).abs() < 1e-15, "{}", lb.l0);
        assert!((lb.tasks[0] - 2.0 * LN_2).abs() < 1e-15);
        assert!((lb.tasks[1] - (LN_2 - 0.25) * (LN_2 - 0.25)).abs() < 1e-15);
        assert!((lb.tasks[2] - (LN_2 - 0.5) * (LN_2 - 0.5)).abs() < 1e-15);
        assert!((lb.tasks[3] - (LN_2 - 0.25) * (LN_2 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn total_is_the_weighted_sum_of_reported_terms_bit_for_bit() {
        for seed in [1u64, 2, 3, 11, 42] {
            let (model, examples) = fixture(seed);
            let w = [0.9, 1.7, 0.3, 1.1];
            let lb = total_loss(&model, &examples, w).unwrap();
            let recomputed = lb.l0
                + w[0] * lb.tasks[0]
                + w[1] * lb.tasks[1]
                + w[2] * lb.tasks[2]
                + w[3] * lb.tasks[3];
            assert_eq!(lb.total.to_bits(), recomputed.to_bits(), "seed {seed}");
        }
    }

    #[test]
    fn backward_reports_the_same_breakdown_as_total_loss() {
        let (model, examples) = fixture(5);
        let w = [1.0, 1.0, 1.0, 1.0];
        let a = total_loss(&model, &examples, w).unwrap();
        let (b, _) = backward(&model, &examples, w).unwrap();
        assert_eq!(a.total.to_bits(), b.total.to_bits());
        assert_eq!(a.l0.to_bits(), b.l0.to_bits());
        for t in 0..4 {
            assert_eq!(a.tasks[t].to_bits(), b.tasks[t].to_bits());
        }
    }

    #[test]
    fn unannotated_batch_trains_heads_but_not_the_output_layers() {
        let (model, mut examples) = fixture(9);
        for ex in &mut examples {
            ex.gt = None;
        }
        let (lb, grads) = backward(&model, &examples, [1.0; 4]).unwrap();
        assert_eq!(lb.l0, 0.0);
        assert_eq!(lb.n_annotated, 0);
        assert!(lb.tasks.iter().all(|&t| t > 0.0));

        // No classification gradient means the trunk output layers stay
        // untouched; the hidden layers still learn through the heads.
        for g in [grads.spatial.as_ref().unwrap(), grads.visual.as_ref().unwrap()] {
            let last = g.layers.last().unwrap();
            assert!(last.dw.iter().all(|&v| v == 0.0));
            assert!(last.db.iter().all(|&v| v == 0.0));
            assert!(g.layers[0].dw.iter().any(|&v| v != 0.0));
        }
        let head = grads.relpos_head.as_ref().unwrap();
        assert!(head.layers.iter().any(|l| l.dw.iter().any(|&v| v != 0.0)));
    }

    #[test]
    fn zero_weights_silence_every_head_gradient() {
        let (model, examples) = fixture(4);
        let (lb, grads) = backward(&model, &examples, [0.0; 4]).unwrap();
        // Task values are still reported unweighted...
        assert!(lb.tasks.iter().all(|&t| t > 0.0));
        assert_eq!(lb.total, lb.l0);
        // ...but contribute nothing to any gradient.
        for g in [
            grads.relpos_head.as_ref().unwrap(),
            grads.dist_head_spatial.as_ref().unwrap(),
            grads.dist_head_visual.as_ref().unwrap(),
            grads.iou_head.as_ref().unwrap(),
        ] {
            for l in &g.layers {
                assert!(l.dw.iter().all(|&v| v == 0.0));
                assert!(l.db.iter().all(|&v| v == 0.0));
            }
        }
        // The classification gradient still reaches the trunks.
        let spt = grads.spatial.as_ref().unwrap();
        assert!(spt.layers.last().unwrap().dw.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let (mut model, examples) = fixture(12);
        let w = [0.7, 1.3, 0.9, 1.1];
        let (_, grads) = backward(&model, &examples, w).unwrap();

        let h = 1e-5;
        let mut checked = 0usize;
        let count = model.param_count();
        // Every 3rd parameter keeps the test fast while still covering all
        // layers of all six modules.
        for idx in (0..count).step_by(3) {
            let orig = model.get_param(idx);
            model.set_param(idx, orig + h);
            let up = total_loss(&model, &examples, w).unwrap().total;
            model.set_param(idx, orig - h);
            let down = total_loss(&model, &examples, w).unwrap().total;
            model.set_param(idx, orig);

            let fd = (up - down) / (2.0 * h);
            let an = model.get_grad(&grads, idx);
            let denom = fd.abs().max(an.abs());
            let ok = if denom < 1e-8 {
                (fd - an).abs() < 1e-8
            } else {
                (fd - an).abs() / denom < 1e-4
            };
            assert!(ok, "param {idx}: analytic {an} vs fd {fd}");
            checked += 1;
        }
        assert!(checked > 100, "only {checked} parameters checked");
    }

    #[test]
    fn ablated_modules_report_zero_task_loss_and_no_gradients() {
        let mut config = RelNetConfig::new(3, 4, 0);
        config.use_visual = false;
        config.spatial_hidden = vec![8, 6];
        let model = ModelParams::init(config, 1).unwrap();

        let img = ImageMeta::new("t", 100.0, 80.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = obj(10.0, 10.0, 30.0, 20.0, 0, 0, &mut rng);
        let b = obj(25.0, 18.0, 40.0, 35.0, 1, 0, &mut rng);
        let ex = PairExample {
            input: pair_input(&img, &a, &b, false).unwrap(),
            gt: Some(0),
            labels: labels_for_pair(&a.bbox, &b.bbox, &img),
        };

        let (lb, grads) = backward(&model, &[ex], [1.0; 4]).unwrap();
        assert!(lb.tasks[0] > 0.0 && lb.tasks[1] > 0.0);
        assert_eq!(lb.tasks[2], 0.0);
        assert_eq!(lb.tasks[3], 0.0);
        assert!(grads.visual.is_none());
        assert!(grads.iou_head.is_none());
        assert!(grads.dist_head_visual.is_none());
    }

    #[test]
    fn empty_batch_and_bad_annotation_are_rejected() {
        let (model, mut examples) = fixture(1);
        assert!(total_loss(&model, &[], [1.0; 4]).is_err());
        examples[0].gt = Some(99);
        let err = total_loss(&model, &examples, [1.0; 4]).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn missing_features_with_visual_enabled_is_a_config_error() {
        let (model, mut examples) = fixture(1);
        examples[1].input.visual = None;
        let err = total_loss(&model, &examples, [1.0; 4]).unwrap_err();
        assert!(err.to_string().contains("feature"), "{err}");
    }
}
