//! Scene-graph data model: objects, predicates and per-image annotations.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ImageMeta};

/// Coarse grouping of predicates by what they assert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateKind {
    /// Pure layout: above, under, near, ...
    Geometric,
    /// Ownership or part-whole: has, part of, wearing, ...
    Possessive,
    /// Actions and interactions: eating, using, carrying, ...
    Semantic,
    /// Everything else: for, from, ...
    Other,
}

impl PredicateKind {
    pub const ALL: [PredicateKind; 4] = [
        PredicateKind::Geometric,
        PredicateKind::Possessive,
        PredicateKind::Semantic,
        PredicateKind::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PredicateKind::Geometric => "geometric",
            PredicateKind::Possessive => "possessive",
            PredicateKind::Semantic => "semantic",
            PredicateKind::Other => "other",
        }
    }
}

/// One predicate class: display name, kind, and whether the predicate is
/// trivial (predictable from the object classes alone, like "in image",
/// and therefore excluded from the non-trivial analytics counts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub kind: PredicateKind,
    #[serde(default)]
    pub trivial: bool,
}

/// The closed set of predicate classes for a dataset. Predicate ids are
/// indices into this list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredicateTaxonomy {
    predicates: Vec<Predicate>,
}

impl PredicateTaxonomy {
    pub fn new(predicates: Vec<Predicate>) -> Result<Self> {
        if predicates.is_empty() {
            return Err(Error::validation("taxonomy must contain at least one predicate"));
        }
        let mut seen = HashSet::new();
        for p in &predicates {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::validation(format!(
                    "taxonomy has duplicate predicate name {:?}",
                    p.name
                )));
            }
        }
        Ok(PredicateTaxonomy { predicates })
    }

    /// Number of predicate classes, the output dimension of the classifier.
    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Predicate> {
        self.predicates.get(id)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.predicates[id].name
    }

    pub fn kind(&self, id: usize) -> PredicateKind {
        self.predicates[id].kind
    }

    pub fn is_trivial(&self, id: usize) -> bool {
        self.predicates[id].trivial
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Predicate)> {
        self.predicates.iter().enumerate()
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }
}

/// A detected or annotated object: box, class id, and (optionally) an
/// appearance feature vector of the dataset's fixed width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub class_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Vec<f64>>,
}

/// One ground-truth relationship: `subject --predicate--> object`, all by
/// index (objects into the image's object list, predicate into the
/// taxonomy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: usize,
    pub predicate: usize,
    pub object: usize,
}

impl Triplet {
    pub fn new(subject: usize, predicate: usize, object: usize) -> Self {
        Triplet { subject, predicate, object }
    }
}

/// Fully annotated image: metadata, objects, relationship triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraphAnnotation {
    pub image: ImageMeta,
    pub objects: Vec<ObjectInstance>,
    pub triplets: Vec<Triplet>,
}

/// A complete dataset: class names, predicate taxonomy, the appearance
/// feature width (0 when no image carries features), and the images.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub taxonomy: PredicateTaxonomy,
    pub d_vis: usize,
    pub images: Vec<SceneGraphAnnotation>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_predicates(&self) -> usize {
        self.taxonomy.len()
    }

    /// True when every object in every image carries a feature vector.
    pub fn has_features(&self) -> bool {
        self.d_vis > 0
            && self
                .images
                .iter()
                .all(|img| img.objects.iter().all(|o| o.feature.is_some()))
    }

    /// Checks every structural invariant, naming the offending image and
    /// object or triplet index in the error.
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::validation("dataset has no object classes"));
        }
        let mut ids = HashSet::new();
        for ann in &self.images {
            let id = ann.image.id();
            if !ids.insert(id.to_owned()) {
                return Err(Error::validation(format!("duplicate image id {id:?}")));
            }
            for (i, obj) in ann.objects.iter().enumerate() {
                if !ann.image.contains(&obj.bbox) {
                    return Err(Error::validation(format!(
                        "image {id:?} object {i}: box {:?} extends outside the {} x {} image",
                        obj.bbox,
                        ann.image.width(),
                        ann.image.height()
                    )));
                }
                if obj.class_id >= self.classes.len() {
                    return Err(Error::validation(format!(
                        "image {id:?} object {i}: class_id {} out of range (dataset has {} classes)",
                        obj.class_id,
                        self.classes.len()
                    )));
                }
                if let Some(f) = &obj.feature {
                    if f.len() != self.d_vis {
                        return Err(Error::validation(format!(
                            "image {id:?} object {i}: feature length {} != dataset d_vis {}",
                            f.len(),
                            self.d_vis
                        )));
                    }
                    if let Some(bad) = f.iter().find(|v| !v.is_finite()) {
                        return Err(Error::validation(format!(
                            "image {id:?} object {i}: non-finite feature value {bad}"
                        )));
                    }
                }
            }
            for (t, trip) in ann.triplets.iter().enumerate() {
                if trip.subject >= ann.objects.len() || trip.object >= ann.objects.len() {
                    return Err(Error::validation(format!(
                        "image {id:?} triplet {t}: object index out of range ({} objects)",
                        ann.objects.len()
                    )));
                }
                if trip.subject == trip.object {
                    return Err(Error::validation(format!(
                        "image {id:?} triplet {t}: subject and object are the same instance"
                    )));
                }
                if trip.predicate >= self.taxonomy.len() {
                    return Err(Error::validation(format!(
                        "image {id:?} triplet {t}: predicate id {} out of range ({} predicates)",
                        trip.predicate,
                        self.taxonomy.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// How often each predicate id is annotated, across all images.
    pub fn predicate_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.taxonomy.len()];
        for ann in &self.images {
            for t in &ann.triplets {
                counts[t.predicate] += 1;
            }
        }
        counts
    }
}

/// One detector output: a box, a score per object class, and optionally an
/// appearance feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Vec<f64>>,
}

impl DetectedObject {
    /// Highest-scoring class; ties go to the lowest id.
    pub fn best_class(&self) -> (usize, f64) {
        let mut best = 0usize;
        for (c, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = c;
            }
        }
        (best, self.scores[best])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionImage {
    pub id: String,
    pub objects: Vec<DetectedObject>,
}

/// Detector outputs for a whole dataset, one entry per image in the same
/// order as the annotations they accompany.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub images: Vec<DetectionImage>,
}

impl DetectionSet {
    /// Checks the detections against the dataset they claim to describe:
    /// matching image ids in matching order, boxes inside the image, one
    /// finite non-negative score per object class, and feature vectors of
    /// the dataset's width. Object counts may differ from the annotations.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.images.len() != dataset.images.len() {
            return Err(Error::validation(format!(
                "detections cover {} images, dataset has {}",
                self.images.len(),
                dataset.images.len()
            )));
        }
        for (det, ann) in self.images.iter().zip(&dataset.images) {
            if det.id != ann.image.id() {
                return Err(Error::validation(format!(
                    "detection image id {:?} does not match dataset image {:?}",
                    det.id,
                    ann.image.id()
                )));
            }
            for (i, obj) in det.objects.iter().enumerate() {
                if !ann.image.contains(&obj.bbox) {
                    return Err(Error::validation(format!(
                        "image {:?} detection {i}: box outside the image",
                        det.id
                    )));
                }
                if obj.scores.len() != dataset.num_classes() {
                    return Err(Error::validation(format!(
                        "image {:?} detection {i}: {} scores for {} classes",
                        det.id,
                        obj.scores.len(),
                        dataset.num_classes()
                    )));
                }
                if obj.scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
                    return Err(Error::validation(format!(
                        "image {:?} detection {i}: scores must be finite and non-negative",
                        det.id
                    )));
                }
                if let Some(f) = &obj.feature {
                    if f.len() != dataset.d_vis {
                        return Err(Error::validation(format!(
                            "image {:?} detection {i}: feature length {} != dataset d_vis {}",
                            det.id,
                            f.len(),
                            dataset.d_vis
                        )));
                    }
                    if f.iter().any(|v| !v.is_finite()) {
                        return Err(Error::validation(format!(
                            "image {:?} detection {i}: non-finite feature value",
                            det.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Canonical enumeration of ordered object pairs for an image with `n`
/// objects: `(0,1), (0,2), ..., (1,0), (1,2), ...` — row-major with the
/// diagonal skipped. Pair indices used for tie-breaking and export
/// ordering refer to positions in this sequence.
pub fn ordered_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}
