//! Synthetic desk scenes with rule-decided relationships.
//!
//! Every image is a handful of axis-aligned boxes; every ordered pair of
//! distinct boxes is annotated with exactly one predicate, decided by
//! closed-form rules on overlap, relative height and relative area:
//!
//! | predicate | kind       | rule (subject s, object o)                  |
//! |-----------|------------|---------------------------------------------|
//! | above     | geometric  | iou < 0.1 and s centered higher than o      |
//! | under     | geometric  | iou < 0.1 and s not centered higher         |
//! | holding   | possessive | iou >= 0.3 and s strictly larger            |
//! | part_of   | possessive | iou >= 0.3 and s not larger                 |
//! | using     | semantic   | 0.1 <= iou < 0.3 and s strictly larger      |
//! | for       | other      | 0.1 <= iou < 0.3 and s not larger           |
//! | in_image  | other      | never generated (trivial catch-all)         |
//!
//! Scene placement uses rejection sampling to keep every pair away from
//! the rule boundaries — overlap outside (0.07, 0.13) and (0.27, 0.33),
//! separated pairs at least 2% of the image height apart vertically,
//! overlapping pairs at least 22% apart in area — so the labels are a
//! deterministic, comfortably learnable function of geometry. Per-object
//! appearance features are a fixed random linear projection of the box
//! geometry (plus optional noise), which makes them a second, redundant
//! encoding of the same signal.
//!
//! [`detect`] derives a synthetic detector output from a dataset by
//! jittering boxes and blurring class scores; with both knobs at zero it
//! reproduces the annotations exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ImageMeta};
use crate::scene::{
    ordered_pairs, Dataset, DetectedObject, DetectionImage, DetectionSet, ObjectInstance,
    Predicate, PredicateKind, PredicateTaxonomy, SceneGraphAnnotation, Triplet,
};

pub const ABOVE: usize = 0;
pub const UNDER: usize = 1;
pub const HOLDING: usize = 2;
pub const PART_OF: usize = 3;
pub const USING: usize = 4;
pub const FOR: usize = 5;
pub const IN_IMAGE: usize = 6;

/// Number of entries in the geometry vector a feature projection reads.
const GEOMETRY_DIM: usize = 8;
/// Scene attempts per image before the generator gives up.
const MAX_IMAGE_ATTEMPTS: usize = 500;
/// Placement attempts for one free-standing box within a scene attempt.
const MAX_FREE_TRIES: usize = 50;

/// The fixed predicate taxonomy every generated dataset uses.
pub fn taxonomy() -> PredicateTaxonomy {
    let p = |name: &str, kind, trivial| Predicate { name: name.into(), kind, trivial };
    PredicateTaxonomy::new(vec![
        p("above", PredicateKind::Geometric, false),
        p("under", PredicateKind::Geometric, false),
        p("holding", PredicateKind::Possessive, false),
        p("part_of", PredicateKind::Possessive, false),
        p("using", PredicateKind::Semantic, false),
        p("for", PredicateKind::Other, false),
        p("in_image", PredicateKind::Other, true),
    ])
    .unwrap()
}

/// The predicate the placement rules assign to an ordered pair.
pub fn rule_predicate(sub: &BoundingBox, obj: &BoundingBox) -> usize {
    let v = sub.iou(obj);
    let larger = sub.area() > obj.area();
    if v >= 0.3 {
        if larger {
            HOLDING
        } else {
            PART_OF
        }
    } else if v >= 0.1 {
        if larger {
            USING
        } else {
            FOR
        }
    } else if sub.centroid().1 < obj.centroid().1 {
        // y grows downward: a smaller centroid y means the subject sits
        // higher in the image.
        ABOVE
    } else {
        UNDER
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub n_images: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub width: f64,
    pub height: f64,
    pub num_classes: usize,
    /// Width of the per-object appearance features; 0 disables them.
    pub d_vis: usize,
    /// Probability of replacing a pair's predicate with a uniformly drawn
    /// different one (never the trivial catch-all).
    pub label_noise: f64,
    /// Standard deviation of the Gaussian added to each feature entry.
    pub feature_noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_images: usize) -> SynthConfig {
        SynthConfig {
            n_images,
            min_objects: 2,
            max_objects: 4,
            width: 640.0,
            height: 480.0,
            num_classes: 6,
            d_vis: 8,
            label_noise: 0.0,
            feature_noise: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_images == 0 {
            return Err(Error::config("cannot generate zero images"));
        }
        if self.min_objects < 2 || self.min_objects > self.max_objects {
            return Err(Error::config(format!(
                "object count range {}..={} is invalid (need at least 2 per image)",
                self.min_objects, self.max_objects
            )));
        }
        if !(self.width.is_finite() && self.width > 0.0 && self.height.is_finite() && self.height > 0.0)
        {
            return Err(Error::config("image dimensions must be positive and finite"));
        }
        if self.num_classes == 0 {
            return Err(Error::config("need at least one object class"));
        }
        if !(0.0..=1.0).contains(&self.label_noise) || !self.label_noise.is_finite() {
            return Err(Error::config(format!(
                "label noise must lie in [0, 1], got {}",
                self.label_noise
            )));
        }
        if !(self.feature_noise.is_finite() && self.feature_noise >= 0.0) {
            return Err(Error::config(format!(
                "feature noise must be finite and non-negative, got {}",
                self.feature_noise
            )));
        }
        Ok(())
    }
}

fn sign(rng: &mut impl Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// A box with both dimensions between 10% and 28% of the image, anywhere
/// inside it.
fn random_box(rng: &mut impl Rng, w_img: f64, h_img: f64) -> BoundingBox {
    let w = rng.gen_range(0.10..0.28) * w_img;
    let h = rng.gen_range(0.10..0.28) * h_img;
    let x = rng.gen_range(0.0..(w_img - w));
    let y = rng.gen_range(0.0..(h_img - h));
    BoundingBox::new(x, y, w, h).unwrap()
}

fn clamp_into_image(cx: f64, cy: f64, w: f64, h: f64, w_img: f64, h_img: f64) -> BoundingBox {
    let w = w.min(0.95 * w_img);
    let h = h.min(0.95 * h_img);
    let x = (cx - 0.5 * w).clamp(0.0, w_img - w);
    let y = (cy - 0.5 * h).clamp(0.0, h_img - h);
    BoundingBox::new(x, y, w, h).unwrap()
}

/// Dimensions for a box whose area differs from the anchor's by the factor
/// `exp(ln_ratio)`, with a little aspect wobble.
fn scaled_dims(anchor: &BoundingBox, ln_ratio: f64, rng: &mut impl Rng) -> (f64, f64) {
    let area = anchor.area() * ln_ratio.exp();
    let aspect = (anchor.w() / anchor.h()) * rng.gen_range(-0.1..0.1f64).exp();
    let w = (area * aspect).sqrt();
    let h = area / w;
    (w, h)
}

/// A box concentric-ish with the anchor and clearly different in area:
/// the overlapping-pair regimes (`holding`/`part_of`).
fn nested_box(anchor: &BoundingBox, rng: &mut impl Rng, w_img: f64, h_img: f64) -> BoundingBox {
    let ln_ratio = sign(rng) * rng.gen_range(0.25..1.0);
    let (w, h) = scaled_dims(anchor, ln_ratio, rng);
    let (acx, acy) = anchor.centroid();
    let cx = acx + rng.gen_range(-0.1..0.1) * anchor.w();
    let cy = acy + rng.gen_range(-0.1..0.1) * anchor.h();
    clamp_into_image(cx, cy, w, h, w_img, h_img)
}

/// A box shifted along one axis so it overlaps the anchor partially: the
/// mid-overlap regimes (`using`/`for`).
fn shifted_box(anchor: &BoundingBox, rng: &mut impl Rng, w_img: f64, h_img: f64) -> BoundingBox {
    let ln_ratio = sign(rng) * rng.gen_range(0.25..0.8);
    let (w, h) = scaled_dims(anchor, ln_ratio, rng);
    let (acx, acy) = anchor.centroid();
    let t = rng.gen_range(0.58..0.75);
    let (cx, cy) = if rng.gen::<bool>() {
        (acx + sign(rng) * t * 0.5 * (anchor.w() + w), acy + rng.gen_range(-0.08..0.08) * anchor.h())
    } else {
        (acx + rng.gen_range(-0.08..0.08) * anchor.w(), acy + sign(rng) * t * 0.5 * (anchor.h() + h))
    };
    clamp_into_image(cx, cy, w, h, w_img, h_img)
}

/// Shortest distance between two boxes' outlines; 0 when they touch or
/// overlap.
fn rect_gap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let dx = (a.x() - b.x2()).max(b.x() - a.x2()).max(0.0);
    let dy = (a.y() - b.y2()).max(b.y() - a.y2()).max(0.0);
    (dx * dx + dy * dy).sqrt()
}

/// A box standing clear of every placed box — the separated regime
/// (`above`/`under`). `None` when no clear spot was found in time.
fn free_box(
    placed: &[BoundingBox],
    rng: &mut impl Rng,
    w_img: f64,
    h_img: f64,
) -> Option<BoundingBox> {
    let gap = 0.04 * w_img.min(h_img);
    'tries: for _ in 0..MAX_FREE_TRIES {
        let b = random_box(rng, w_img, h_img);
        for p in placed {
            if rect_gap(&b, p) < gap {
                continue 'tries;
            }
            if (b.centroid().1 - p.centroid().1).abs() < 0.03 * h_img {
                continue 'tries;
            }
        }
        return Some(b);
    }
    None
}

/// True when every pair sits comfortably away from every rule boundary.
fn margins_ok(boxes: &[BoundingBox], h_img: f64) -> bool {
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            let (a, b) = (&boxes[i], &boxes[j]);
            let v = a.iou(b);
            if (v > 0.07 && v < 0.13) || (v > 0.27 && v < 0.33) {
                return false;
            }
            if v < 0.1 && (a.centroid().1 - b.centroid().1).abs() < 0.02 * h_img {
                return false;
            }
            if v >= 0.1 && (a.area() / b.area()).ln().abs() < 0.2 {
                return false;
            }
        }
    }
    true
}

fn try_scene(cfg: &SynthConfig, n_obj: usize, rng: &mut impl Rng) -> Option<Vec<BoundingBox>> {
    let (w_img, h_img) = (cfg.width, cfg.height);
    let mut boxes = vec![random_box(rng, w_img, h_img)];
    for _ in 1..n_obj {
        let mode = rng.gen::<f64>();
        let anchor = boxes[rng.gen_range(0..boxes.len())];
        let next = if mode < 0.35 {
            nested_box(&anchor, rng, w_img, h_img)
        } else if mode < 0.60 {
            shifted_box(&anchor, rng, w_img, h_img)
        } else {
            free_box(&boxes, rng, w_img, h_img)?
        };
        boxes.push(next);
    }
    if margins_ok(&boxes, h_img) {
        Some(boxes)
    } else {
        None
    }
}

/// The geometry vector behind an object's appearance feature.
fn geometry_vector(b: &BoundingBox, img: &ImageMeta) -> [f64; GEOMETRY_DIM] {
    let (w_img, h_img) = (img.width(), img.height());
    let (cx, cy) = b.centroid();
    [
        b.x() / w_img,
        b.y() / h_img,
        b.w() / w_img,
        b.h() / h_img,
        cx / w_img,
        cy / h_img,
        b.area() / (w_img * h_img),
        (b.w() / b.h()).ln(),
    ]
}

/// Generates a dataset. The output is a pure function of the config; the
/// three random streams (scenes, features, label noise) are independent,
/// so e.g. changing the noise level does not change the scenes.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut scene_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    scene_rng.set_stream(0);
    let mut feat_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    feat_rng.set_stream(1);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(2);

    // One fixed projection for the whole dataset, scaled to keep feature
    // magnitudes around one.
    let projection: Vec<f64> = (0..cfg.d_vis * GEOMETRY_DIM)
        .map(|_| {
            let z: f64 = feat_rng.sample(StandardNormal);
            z / (GEOMETRY_DIM as f64).sqrt()
        })
        .collect();

    let mut images = Vec::with_capacity(cfg.n_images);
    for i in 0..cfg.n_images {
        let n_obj = scene_rng.gen_range(cfg.min_objects..=cfg.max_objects);
        let mut boxes = None;
        for _ in 0..MAX_IMAGE_ATTEMPTS {
            if let Some(b) = try_scene(cfg, n_obj, &mut scene_rng) {
                boxes = Some(b);
                break;
            }
        }
        let boxes = boxes.ok_or_else(|| {
            Error::runtime(format!(
                "could not place {n_obj} objects with clean margins in {MAX_IMAGE_ATTEMPTS} attempts \
                 (image {i}); the image may be too small for the requested object count"
            ))
        })?;

        let image = ImageMeta::new(format!("synth-{i:05}"), cfg.width, cfg.height)?;
        let objects: Vec<ObjectInstance> = boxes
            .iter()
            .map(|b| {
                let class_id = scene_rng.gen_range(0..cfg.num_classes);
                let feature = if cfg.d_vis > 0 {
                    let g = geometry_vector(b, &image);
                    Some(
                        (0..cfg.d_vis)
                            .map(|k| {
                                let dot: f64 = (0..GEOMETRY_DIM)
                                    .map(|j| projection[k * GEOMETRY_DIM + j] * g[j])
                                    .sum();
                                let eps: f64 = feat_rng.sample(StandardNormal);
                                dot + cfg.feature_noise * eps
                            })
                            .collect(),
                    )
                } else {
                    None
                };
                ObjectInstance { bbox: *b, class_id, feature }
            })
            .collect();

        let triplets: Vec<Triplet> = ordered_pairs(objects.len())
            .map(|(s, o)| {
                let mut p = rule_predicate(&objects[s].bbox, &objects[o].bbox);
                if cfg.label_noise > 0.0 && noise_rng.gen::<f64>() < cfg.label_noise {
                    // A uniform draw over the other non-trivial predicates.
                    let mut q = noise_rng.gen_range(0..IN_IMAGE - 1);
                    if q >= p {
                        q += 1;
                    }
                    p = q;
                }
                Triplet { subject: s, predicate: p, object: o }
            })
            .collect();

        images.push(SceneGraphAnnotation { image, objects, triplets });
    }

    let dataset = Dataset {
        classes: (0..cfg.num_classes).map(|c| format!("thing_{c}")).collect(),
        taxonomy: taxonomy(),
        d_vis: cfg.d_vis,
        images,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Derives synthetic detector outputs from a dataset's annotations.
///
/// Boxes get a relative jitter (`x` shifts by up to `jitter * w`, sizes
/// scale by up to `exp(±jitter)`) and are clamped back inside the image;
/// class scores are a blurred one-hot, `(1[c] + sigma * |g_c|)` normalized
/// to sum to one; features are copied from the annotated objects. With
/// `box_jitter = 0` and `class_score_sigma = 0` the detections reproduce
/// the annotations exactly.
pub fn detect(
    dataset: &Dataset,
    box_jitter: f64,
    class_score_sigma: f64,
    seed: u64,
) -> Result<DetectionSet> {
    if !(box_jitter.is_finite() && box_jitter >= 0.0) {
        return Err(Error::config(format!(
            "box jitter must be finite and non-negative, got {box_jitter}"
        )));
    }
    if !(class_score_sigma.is_finite() && class_score_sigma >= 0.0) {
        return Err(Error::config(format!(
            "score sigma must be finite and non-negative, got {class_score_sigma}"
        )));
    }
    let num_classes = dataset.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let images = dataset
        .images
        .iter()
        .map(|ann| {
            let (w_img, h_img) = (ann.image.width(), ann.image.height());
            let objects = ann
                .objects
                .iter()
                .map(|obj| {
                    let b = &obj.bbox;
                    let x = b.x() + box_jitter * b.w() * rng.gen_range(-1.0..1.0);
                    let y = b.y() + box_jitter * b.h() * rng.gen_range(-1.0..1.0);
                    let w = (b.w() * (box_jitter * rng.gen_range(-1.0..1.0)).exp()).min(w_img);
                    let h = (b.h() * (box_jitter * rng.gen_range(-1.0..1.0)).exp()).min(h_img);
                    let bbox = BoundingBox::new(
                        x.clamp(0.0, w_img - w),
                        y.clamp(0.0, h_img - h),
                        w,
                        h,
                    )
                    .expect("jittered box is valid by construction");

                    let blur: Vec<f64> = (0..num_classes)
                        .map(|_| {
                            let g: f64 = rng.sample(StandardNormal);
                            class_score_sigma * g.abs()
                        })
                        .collect();
                    let denom = 1.0 + blur.iter().sum::<f64>();
                    let scores = (0..num_classes)
                        .map(|c| {
                            let hot = if c == obj.class_id { 1.0 } else { 0.0 };
                            (hot + blur[c]) / denom
                        })
                        .collect();

                    DetectedObject { bbox, scores, feature: obj.feature.clone() }
                })
                .collect();
            DetectionImage { id: ann.image.id().to_owned(), objects }
        })
        .collect();

    let detections = DetectionSet { images };
    detections.validate(dataset)?;
    Ok(detections)
}
