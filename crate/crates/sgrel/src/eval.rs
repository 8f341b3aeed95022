//! Ranking, recall and threshold-curve evaluation.
//!
//! Evaluation runs in one of three modes that differ only in which boxes
//! and class labels the model is shown:
//!
//! * **predcls** — annotated boxes and classes; entity confidences are 1,
//!   so only predicate ranking is measured;
//! * **sgcls** — annotated boxes, classes read off index-aligned detector
//!   outputs (highest-scoring class, its score becomes the entity
//!   confidence);
//! * **sgdet** — boxes, classes, confidences and appearance features all
//!   from the detector.
//!
//! Every ordered pair of entities gets a fused predicate distribution; a
//! triplet candidate `⟨s, p, o⟩` scores `p_sub * p_obj * p_rel[p]`.
//! Under the default graph constraint each pair contributes only its
//! best predicate; without it all predicates compete. Candidates are
//! ranked by descending score, ties broken by pair index then predicate
//! id, and recall@K counts annotated triplets matched greedily in rank
//! order. In predcls/sgcls a match means identical boxes (exact), equal
//! classes and the right predicate; in sgdet box identity relaxes to an
//! overlap of at least 0.5 on both entities.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::model::{pair_input, ModelParams};
use crate::scene::{
    ordered_pairs, Dataset, DetectionImage, DetectionSet, ObjectInstance, PredicateKind,
    SceneGraphAnnotation,
};

/// Overlap two boxes need before they count as the same entity in sgdet.
pub const MATCH_IOU: f64 = 0.5;

/// Default confidence cut-offs for the threshold curves: odds of 1:1 up
/// through roughly 11:1 in favor of the best predicate.
pub const DEFAULT_THRESHOLDS: [f64; 11] =
    [0.5, 0.667, 0.75, 0.8, 0.833, 0.857, 0.875, 0.889, 0.9, 0.91, 0.92];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Predcls,
    Sgcls,
    Sgdet,
}

impl EvalMode {
    pub const ALL: [EvalMode; 3] = [EvalMode::Predcls, EvalMode::Sgcls, EvalMode::Sgdet];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Predcls => "predcls",
            EvalMode::Sgcls => "sgcls",
            EvalMode::Sgdet => "sgdet",
        }
    }

    /// Predcls gets its entities from the annotations; the other two need
    /// detector outputs.
    pub fn needs_detections(self) -> bool {
        !matches!(self, EvalMode::Predcls)
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<EvalMode> {
        match s {
            "predcls" => Ok(EvalMode::Predcls),
            "sgcls" => Ok(EvalMode::Sgcls),
            "sgdet" => Ok(EvalMode::Sgdet),
            other => Err(Error::config(format!(
                "unknown evaluation mode {other:?} (expected predcls, sgcls or sgdet)"
            ))),
        }
    }
}

/// One scored pair: everything needed to rank triplets and match them
/// against annotations, and the unit of the prediction dump format.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RelationshipPrediction {
    pub image_id: String,
    pub pair_index: usize,
    pub sub_box: BoundingBox,
    pub obj_box: BoundingBox,
    pub sub_class: usize,
    pub obj_class: usize,
    pub p_sub: f64,
    pub p_obj: f64,
    /// Fused predicate distribution, one probability per predicate id.
    pub p_rel: Vec<f64>,
}

/// One candidate in an image's ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedTriplet {
    pub score: f64,
    /// Index into the prediction slice the ranking was built from.
    pub prediction: usize,
    pub pair_index: usize,
    pub predicate: usize,
}

/// Builds the ranked candidate list for one image's predictions. With the
/// graph constraint each pair enters once, with its highest-probability
/// predicate (lowest id on a tie); without it every predicate of every
/// pair competes. Sorted by descending score, then pair index, then
/// predicate id.
pub fn rank_triplets(preds: &[RelationshipPrediction], graph_constraint: bool) -> Vec<RankedTriplet> {
    let mut out = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        let entity = p.p_sub * p.p_obj;
        if graph_constraint {
            let mut best = 0usize;
            for (k, &v) in p.p_rel.iter().enumerate() {
                if v > p.p_rel[best] {
                    best = k;
                }
            }
            out.push(RankedTriplet {
                score: entity * p.p_rel[best],
                prediction: pi,
                pair_index: p.pair_index,
                predicate: best,
            });
        } else {
            for (k, &v) in p.p_rel.iter().enumerate() {
                out.push(RankedTriplet {
                    score: entity * v,
                    prediction: pi,
                    pair_index: p.pair_index,
                    predicate: k,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.pair_index.cmp(&b.pair_index))
            .then(a.predicate.cmp(&b.predicate))
    });
    out
}

/// An annotated triplet in matchable form.
#[derive(Debug, Clone)]
struct GtTriplet {
    sub_box: BoundingBox,
    obj_box: BoundingBox,
    sub_class: usize,
    obj_class: usize,
    predicate: usize,
}

fn gt_triplets(ann: &SceneGraphAnnotation) -> Vec<GtTriplet> {
    ann.triplets
        .iter()
        .map(|t| GtTriplet {
            sub_box: ann.objects[t.subject].bbox,
            obj_box: ann.objects[t.object].bbox,
            sub_class: ann.objects[t.subject].class_id,
            obj_class: ann.objects[t.object].class_id,
            predicate: t.predicate,
        })
        .collect()
}

fn boxes_match(pred: &BoundingBox, gt: &BoundingBox, mode: EvalMode) -> bool {
    match mode {
        EvalMode::Predcls | EvalMode::Sgcls => pred == gt,
        EvalMode::Sgdet => pred.iou(gt) >= MATCH_IOU,
    }
}

/// Walks the top `k` of a ranking and greedily marks annotated triplets
/// as found. Returns one flag per annotated triplet.
fn match_top_k(
    gts: &[GtTriplet],
    preds: &[RelationshipPrediction],
    ranked: &[RankedTriplet],
    k: usize,
    mode: EvalMode,
) -> Vec<bool> {
    let mut matched = vec![false; gts.len()];
    for cand in ranked.iter().take(k) {
        let p = &preds[cand.prediction];
        for (g, hit) in gts.iter().zip(matched.iter_mut()) {
            if *hit
                || g.predicate != cand.predicate
                || g.sub_class != p.sub_class
                || g.obj_class != p.obj_class
            {
                continue;
            }
            if boxes_match(&p.sub_box, &g.sub_box, mode) && boxes_match(&p.obj_box, &g.obj_box, mode)
            {
                *hit = true;
                break;
            }
        }
    }
    matched
}

/// Entity list an image is evaluated with, per mode. In sgcls the
/// detections must align one-to-one with the annotated objects.
fn entities(
    ann: &SceneGraphAnnotation,
    mode: EvalMode,
    det: Option<&DetectionImage>,
) -> Result<Vec<(ObjectInstance, f64)>> {
    match mode {
        EvalMode::Predcls => {
            Ok(ann.objects.iter().map(|o| (o.clone(), 1.0)).collect())
        }
        EvalMode::Sgcls => {
            let det = det.ok_or_else(|| {
                Error::config("sgcls evaluation requires detector outputs")
            })?;
            if det.objects.len() != ann.objects.len() {
                return Err(Error::validation(format!(
                    "image {:?}: sgcls needs detections aligned with the {} annotated objects, got {}",
                    ann.image.id(),
                    ann.objects.len(),
                    det.objects.len()
                )));
            }
            Ok(ann
                .objects
                .iter()
                .zip(&det.objects)
                .map(|(gt, d)| {
                    let (class, p) = d.best_class();
                    (
                        ObjectInstance {
                            bbox: gt.bbox,
                            class_id: class,
                            feature: gt.feature.clone(),
                        },
                        p,
                    )
                })
                .collect())
        }
        EvalMode::Sgdet => {
            let det = det.ok_or_else(|| {
                Error::config("sgdet evaluation requires detector outputs")
            })?;
            Ok(det
                .objects
                .iter()
                .map(|d| {
                    let (class, p) = d.best_class();
                    (
                        ObjectInstance {
                            bbox: d.bbox,
                            class_id: class,
                            feature: d.feature.clone(),
                        },
                        p,
                    )
                })
                .collect())
        }
    }
}

/// Scores every ordered entity pair of one image.
pub fn predict_image(
    model: &ModelParams,
    ann: &SceneGraphAnnotation,
    mode: EvalMode,
    det: Option<&DetectionImage>,
) -> Result<Vec<RelationshipPrediction>> {
    let ents = entities(ann, mode, det)?;
    let needs_visual = model.config().use_visual;
    let mut out = Vec::new();
    for (pair_index, (s, o)) in ordered_pairs(ents.len()).enumerate() {
        let (sub, p_sub) = &ents[s];
        let (obj, p_obj) = &ents[o];
        let input = pair_input(&ann.image, sub, obj, needs_visual)?;
        let fwd = model.forward(&input);
        out.push(RelationshipPrediction {
            image_id: ann.image.id().to_owned(),
            pair_index,
            sub_box: sub.bbox,
            obj_box: obj.bbox,
            sub_class: sub.class_id,
            obj_class: obj.class_id,
            p_sub: *p_sub,
            p_obj: *p_obj,
            p_rel: fwd.prediction,
        });
    }
    Ok(out)
}

/// Scores the whole dataset: one prediction list per image, in dataset
/// order. Detections are validated and must be present for sgcls/sgdet.
pub fn predict_dataset(
    model: &ModelParams,
    dataset: &Dataset,
    mode: EvalMode,
    detections: Option<&DetectionSet>,
) -> Result<Vec<Vec<RelationshipPrediction>>> {
    if mode.needs_detections() && detections.is_none() {
        return Err(Error::config(format!(
            "{mode} evaluation requires detector outputs"
        )));
    }
    if let Some(d) = detections {
        d.validate(dataset)?;
    }
    dataset
        .images
        .iter()
        .enumerate()
        .map(|(i, ann)| predict_image(model, ann, mode, detections.map(|d| &d.images[i])))
        .collect()
}

/// Groups a flat prediction dump by dataset image, erroring on ids the
/// dataset does not contain. Images without predictions get empty lists
/// (and so score zero recall).
pub fn group_predictions(
    flat: Vec<RelationshipPrediction>,
    dataset: &Dataset,
) -> Result<Vec<Vec<RelationshipPrediction>>> {
    let index: HashMap<&str, usize> = dataset
        .images
        .iter()
        .enumerate()
        .map(|(i, ann)| (ann.image.id(), i))
        .collect();
    let mut grouped: Vec<Vec<RelationshipPrediction>> = vec![Vec::new(); dataset.images.len()];
    for p in flat {
        let Some(&i) = index.get(p.image_id.as_str()) else {
            return Err(Error::input(format!(
                "prediction references image {:?} which the dataset does not contain",
                p.image_id
            )));
        };
        grouped[i].push(p);
    }
    Ok(grouped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub mode: EvalMode,
    /// Cut-offs for recall@K, e.g. 20, 50, 100.
    pub ks: Vec<usize>,
    /// One best predicate per pair (true) or all predicates (false).
    pub graph_constraint: bool,
    /// Averaging for recall: per-image mean (false, the default) or a
    /// single pooled ratio over all annotated triplets (true).
    pub micro: bool,
    /// Confidence cut-offs for the threshold curves.
    pub thresholds: Vec<f64>,
}

impl EvalConfig {
    pub fn new(mode: EvalMode) -> EvalConfig {
        EvalConfig {
            mode,
            ks: vec![20, 50, 100],
            graph_constraint: true,
            micro: false,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() {
            return Err(Error::config("need at least one K for recall@K"));
        }
        if self.ks.contains(&0) {
            return Err(Error::config("recall@0 is not meaningful"));
        }
        for t in &self.thresholds {
            if !t.is_finite() {
                return Err(Error::config(format!("threshold {t} is not finite")));
            }
        }
        Ok(())
    }
}

/// Counts of confident predictions at one cut-off, split by the kinds the
/// ratio compares.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlphaRow {
    pub threshold: f64,
    pub geometric: usize,
    pub possessive: usize,
    /// `geometric / possessive`; absent when nothing possessive clears
    /// the cut-off.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub micro: bool,
    /// `(k, recall)` per requested K, in request order.
    pub recall: Vec<(usize, f64)>,
    /// `(k, kind, recall)`; every requested K crossed with every kind the
    /// annotations contain.
    pub recall_by_kind: Vec<(usize, PredicateKind, f64)>,
    pub alpha: Vec<AlphaRow>,
    /// `(threshold, count)`: confident pairs whose best predicate is not
    /// a trivial one.
    pub nontrivial: Vec<(f64, usize)>,
}

/// A pair's best predicate and its probability, the unit both threshold
/// curves count.
fn best_of(p: &RelationshipPrediction) -> (usize, f64) {
    let mut best = 0usize;
    for (k, &v) in p.p_rel.iter().enumerate() {
        if v > p.p_rel[best] {
            best = k;
        }
    }
    (best, p.p_rel[best])
}

/// Computes recall@K (overall and per predicate kind) plus the confidence
/// threshold curves for scored predictions of every dataset image.
pub fn evaluate(
    dataset: &Dataset,
    predictions: &[Vec<RelationshipPrediction>],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if predictions.len() != dataset.images.len() {
        return Err(Error::input(format!(
            "predictions cover {} images, dataset has {}",
            predictions.len(),
            dataset.images.len()
        )));
    }

    let kinds_present: Vec<PredicateKind> = PredicateKind::ALL
        .iter()
        .copied()
        .filter(|kind| {
            dataset
                .images
                .iter()
                .flat_map(|a| &a.triplets)
                .any(|t| dataset.taxonomy.kind(t.predicate) == *kind)
        })
        .collect();

    let per_image: Vec<(Vec<GtTriplet>, Vec<RankedTriplet>)> = dataset
        .images
        .iter()
        .zip(predictions)
        .map(|(ann, preds)| (gt_triplets(ann), rank_triplets(preds, cfg.graph_constraint)))
        .collect();

    let mut recall = Vec::new();
    let mut recall_by_kind = Vec::new();
    for &k in &cfg.ks {
        // (matched, total) per image, overall and split by kind.
        let mut overall: Vec<(usize, usize)> = Vec::new();
        let mut by_kind: HashMap<PredicateKind, Vec<(usize, usize)>> = HashMap::new();
        for ((gts, ranked), preds) in per_image.iter().zip(predictions) {
            let matched = match_top_k(gts, preds, ranked, k, cfg.mode);
            overall.push((matched.iter().filter(|&&m| m).count(), gts.len()));
            for kind in &kinds_present {
                let idx: Vec<usize> = gts
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| dataset.taxonomy.kind(g.predicate) == *kind)
                    .map(|(i, _)| i)
                    .collect();
                let hits = idx.iter().filter(|&&i| matched[i]).count();
                by_kind.entry(*kind).or_default().push((hits, idx.len()));
            }
        }
        recall.push((k, average(&overall, cfg.micro)));
        for kind in &kinds_present {
            recall_by_kind.push((k, *kind, average(&by_kind[kind], cfg.micro)));
        }
    }

    let mut alpha = Vec::new();
    let mut nontrivial = Vec::new();
    for &t in &cfg.thresholds {
        let mut geometric = 0usize;
        let mut possessive = 0usize;
        let mut informative = 0usize;
        for p in predictions.iter().flatten() {
            let (pred, conf) = best_of(p);
            if conf <= t {
                continue;
            }
            match dataset.taxonomy.kind(pred) {
                PredicateKind::Geometric => geometric += 1,
                PredicateKind::Possessive => possessive += 1,
                _ => {}
            }
            if !dataset.taxonomy.is_trivial(pred) {
                informative += 1;
            }
        }
        let ratio = if possessive > 0 {
            Some(geometric as f64 / possessive as f64)
        } else {
            None
        };
        alpha.push(AlphaRow { threshold: t, geometric, possessive, alpha: ratio });
        nontrivial.push((t, informative));
    }

    Ok(EvalReport {
        mode: cfg.mode,
        micro: cfg.micro,
        recall,
        recall_by_kind,
        alpha,
        nontrivial,
    })
}

/// Macro (mean of per-image ratios, images with no annotations skipped)
/// or micro (pooled ratio) average of `(matched, total)` counts.
fn average(counts: &[(usize, usize)], micro: bool) -> f64 {
    if micro {
        let matched: usize = counts.iter().map(|c| c.0).sum();
        let total: usize = counts.iter().map(|c| c.1).sum();
        if total == 0 {
            0.0
        } else {
            matched as f64 / total as f64
        }
    } else {
        let ratios: Vec<f64> = counts
            .iter()
            .filter(|c| c.1 > 0)
            .map(|c| c.0 as f64 / c.1 as f64)
            .collect();
        if ratios.is_empty() {
            0.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        }
    }
}

/// One row of the fused-score table [`export_features`] builds.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub image_id: String,
    pub pair_index: usize,
    /// Best predicate under the fused distribution.
    pub predicate: usize,
    pub kind: PredicateKind,
    /// Probability of that predicate.
    pub confidence: f64,
    /// Fused pre-softmax scores, one per predicate id.
    pub logits: Vec<f64>,
}

/// Scores every ordered pair of annotated objects and dumps the fused
/// logits, for offline analysis. Rows are ordered by image id, then pair
/// index.
pub fn export_features(model: &ModelParams, dataset: &Dataset) -> Result<Vec<FeatureRow>> {
    let needs_visual = model.config().use_visual;
    let mut order: Vec<usize> = (0..dataset.images.len()).collect();
    order.sort_by(|&a, &b| dataset.images[a].image.id().cmp(dataset.images[b].image.id()));

    let mut rows = Vec::new();
    for i in order {
        let ann = &dataset.images[i];
        for (pair_index, (s, o)) in ordered_pairs(ann.objects.len()).enumerate() {
            let input = pair_input(&ann.image, &ann.objects[s], &ann.objects[o], needs_visual)?;
            let fwd = model.forward(&input);
            let mut best = 0usize;
            for (k, &v) in fwd.prediction.iter().enumerate() {
                if v > fwd.prediction[best] {
                    best = k;
                }
            }
            rows.push(FeatureRow {
                image_id: ann.image.id().to_owned(),
                pair_index,
                predicate: best,
                kind: dataset.taxonomy.kind(best),
                confidence: fwd.prediction[best],
                logits: fwd.scores.logits(),
            });
        }
    }
    Ok(rows)
}
