//! On-disk formats and the readers/writers for them.
//!
//! Three JSON document kinds (dataset, detections, checkpoint — each with a
//! `version` field), a JSON-lines prediction dump, and plain-CSV report
//! tables. Every writer goes through [`atomic_write`]: content lands in a
//! temporary file in the destination directory and is renamed into place,
//! so a crash never leaves a half-written file behind.
//!
//! All numbers are serialized with the shortest representation that parses
//! back to the identical `f64`, so `load(save(x)) == x` bit for bit.
//!
//! # Dataset ingestion
//!
//! [`ingest`] accepts two formats:
//!
//! * [`IngestFormat::Native`] — the self-contained schema written by
//!   [`save_dataset`]: taxonomy, class list, feature width and images all
//!   in one document.
//! * [`IngestFormat::VgSimplified`] — a flat array of per-image records in
//!   the style of common region-graph exports:
//!
//!   ```json
//!   [{"image_id": 1, "width": 800, "height": 600,
//!     "objects": [{"object_id": 10, "x": 0, "y": 0, "w": 100, "h": 200,
//!                  "names": ["man"]}],
//!     "relationships": [{"predicate": "wearing",
//!                        "subject_id": 10, "object_id": 11}]}]
//!   ```
//!
//!   The adapter derives the class list from the first name of every
//!   object (sorted, distinct) and the taxonomy from the normalized
//!   predicate strings (lowercased, whitespace collapsed, sorted), kinds
//!   assigned from a built-in keyword table with `other` as the fallback.
//!   Boxes are clipped to the image; a record whose box has no area inside
//!   the image, an object without a name, a duplicate or dangling object
//!   id, or a self-loop relationship is rejected with an error naming the
//!   image and the offending index. No appearance features: `d_vis` is 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, FeatureRow, RelationshipPrediction};
use crate::geometry::{BoundingBox, ImageMeta};
use crate::labels::labels_for_pair;
use crate::model::{ModelParams, SemanticPrior};
use crate::nn::Mlp;
use crate::scene::{
    ordered_pairs, Dataset, DetectionSet, ObjectInstance, Predicate, PredicateKind,
    PredicateTaxonomy, SceneGraphAnnotation, Triplet,
};
use crate::train::TrainReport;

pub const DATASET_VERSION: u32 = 1;
pub const DETECTIONS_VERSION: u32 = 1;
pub const CHECKPOINT_VERSION: u32 = 1;

/// Writes `bytes` to `path` atomically: the content goes to a temporary
/// file in the same directory and is renamed over the destination.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    // Temporary files are created private (0600); give the published file
    // conventional permissions instead.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Dataset (native schema)
// ---------------------------------------------------------------------------

/// Native dataset document. The typed fields re-validate geometry while
/// parsing, so a malformed value fails with the parser's line and column.
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    version: u32,
    d_vis: usize,
    classes: Vec<String>,
    predicates: Vec<Predicate>,
    images: Vec<ImageRecord>,
}

#[derive(Serialize, Deserialize)]
struct ImageRecord {
    #[serde(flatten)]
    image: ImageMeta,
    objects: Vec<ObjectInstance>,
    triplets: Vec<Triplet>,
}

/// Non-validating mirror of [`DatasetFile`], parsed only after the typed
/// parse fails, to recover *which* record tripped an invariant. Geometry
/// invariants live in constructors, so the typed error alone carries a
/// position but no record identity.
#[derive(Deserialize)]
struct RawDatasetFile {
    #[allow(dead_code)]
    version: u32,
    #[serde(default)]
    images: Vec<RawImageRecord>,
}

#[derive(Deserialize)]
struct RawImageRecord {
    id: String,
    width: f64,
    height: f64,
    #[serde(default)]
    objects: Vec<RawObjectRecord>,
}

#[derive(Deserialize)]
struct RawObjectRecord {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Names the first record in `raw` that violates a geometry invariant.
fn locate_geometry_fault(raw: &RawDatasetFile) -> Option<String> {
    for (i, img) in raw.images.iter().enumerate() {
        if ImageMeta::new(&img.id, img.width, img.height).is_err() {
            return Some(format!("image {:?} (index {i})", img.id));
        }
        for (j, o) in img.objects.iter().enumerate() {
            if BoundingBox::new(o.x, o.y, o.w, o.h).is_err() {
                return Some(format!("image {:?} (index {i}) object {j}", img.id));
            }
        }
    }
    None
}

fn parse_dataset(text: &str) -> Result<Dataset> {
    let file: DatasetFile = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(typed_err) => {
            // The typed error has a line and column; if the document is
            // well-formed JSON, a second lenient parse names the record.
            if let Ok(raw) = serde_json::from_str::<RawDatasetFile>(text) {
                if let Some(at) = locate_geometry_fault(&raw) {
                    return Err(Error::input(format!("{at}: {typed_err}")));
                }
            }
            return Err(Error::input(typed_err.to_string()));
        }
    };
    if file.version != DATASET_VERSION {
        return Err(Error::input(format!(
            "unsupported dataset version {} (this build reads {DATASET_VERSION})",
            file.version
        )));
    }
    let dataset = Dataset {
        classes: file.classes,
        taxonomy: PredicateTaxonomy::new(file.predicates)?,
        d_vis: file.d_vis,
        images: file
            .images
            .into_iter()
            .map(|r| SceneGraphAnnotation { image: r.image, objects: r.objects, triplets: r.triplets })
            .collect(),
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Loads a native dataset file and checks every structural invariant.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&read_input(path)?)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

/// Saves a dataset in the native schema. `load_dataset` reads the result
/// back bit-identically.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let file = DatasetFile {
        version: DATASET_VERSION,
        d_vis: dataset.d_vis,
        classes: dataset.classes.clone(),
        predicates: dataset.taxonomy.iter().map(|(_, p)| p.clone()).collect(),
        images: dataset
            .images
            .iter()
            .map(|a| ImageRecord {
                image: a.image.clone(),
                objects: a.objects.clone(),
                triplets: a.triplets.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::runtime(format!("dataset serialization failed: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// Simplified region-graph adapter
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    Native,
    VgSimplified,
}

impl FromStr for IngestFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "native" => Ok(IngestFormat::Native),
            "vg" => Ok(IngestFormat::VgSimplified),
            other => Err(Error::input(format!(
                "unknown dataset format {other:?} (expected \"native\" or \"vg\")"
            ))),
        }
    }
}

#[derive(Deserialize)]
struct VgImage {
    image_id: u64,
    width: f64,
    height: f64,
    #[serde(default)]
    objects: Vec<VgObject>,
    #[serde(default)]
    relationships: Vec<VgRelationship>,
}

#[derive(Deserialize)]
struct VgObject {
    object_id: u64,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    #[serde(default)]
    names: Vec<String>,
}

#[derive(Deserialize)]
struct VgRelationship {
    predicate: String,
    subject_id: u64,
    object_id: u64,
}

fn normalize_predicate(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Keyword table mapping a normalized predicate to its kind. Anything not
/// listed is `Other`; "in image"-style predicates are additionally marked
/// trivial because the classes alone predict them.
fn predicate_kind(name: &str) -> PredicateKind {
    const GEOMETRIC: &[&str] = &[
        "above", "under", "below", "over", "on", "in", "near", "behind", "in front of", "at",
        "between", "on top of", "beneath", "inside", "next to", "against",
    ];
    const POSSESSIVE: &[&str] = &[
        "has", "have", "of", "wearing", "wears", "part of", "belonging to", "attached to",
        "with", "on side of", "mounted on",
    ];
    const SEMANTIC: &[&str] = &[
        "holding", "carrying", "eating", "riding", "using", "playing", "sitting on",
        "standing on", "looking at", "watching", "walking on", "laying on", "hanging from",
        "covering", "flying in", "growing on", "painted on", "parked on", "says", "to",
    ];
    if GEOMETRIC.contains(&name) {
        PredicateKind::Geometric
    } else if POSSESSIVE.contains(&name) {
        PredicateKind::Possessive
    } else if SEMANTIC.contains(&name) {
        PredicateKind::Semantic
    } else {
        PredicateKind::Other
    }
}

fn is_trivial_predicate(name: &str) -> bool {
    name == "in image" || name == "in_image"
}

/// Clips a raw region-graph box to the image. Returns `None` when no area
/// survives (the caller turns that into a named error).
fn clip_box(x: f64, y: f64, w: f64, h: f64, img: &ImageMeta) -> Option<BoundingBox> {
    if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
        return None;
    }
    let x1 = x.max(0.0);
    let y1 = y.max(0.0);
    let x2 = (x + w).min(img.width());
    let y2 = (y + h).min(img.height());
    BoundingBox::new(x1, y1, x2 - x1, y2 - y1).ok()
}

fn ingest_vg(text: &str) -> Result<Dataset> {
    let records: Vec<VgImage> =
        serde_json::from_str(text).map_err(|e| Error::input(e.to_string()))?;

    if records.is_empty() {
        return Err(Error::input("region-graph file contains no images"));
    }

    // First pass: validate every record and collect the vocabulary.
    // BTrees keep the derived ids deterministic.
    let mut class_names = BTreeSet::new();
    let mut predicate_names = BTreeSet::new();
    for (i, rec) in records.iter().enumerate() {
        let meta = ImageMeta::new(rec.image_id.to_string(), rec.width, rec.height)
            .map_err(|e| Error::input(format!("image {} (index {i}): {e}", rec.image_id)))?;
        for (j, o) in rec.objects.iter().enumerate() {
            let name = o.names.first().map(|n| n.trim()).unwrap_or("");
            if name.is_empty() {
                return Err(Error::input(format!(
                    "image {} (index {i}) object {j}: object has no name",
                    rec.image_id
                )));
            }
            class_names.insert(name.to_owned());
            if clip_box(o.x, o.y, o.w, o.h, &meta).is_none() {
                return Err(Error::input(format!(
                    "image {} (index {i}) object {j}: box ({}, {}, {}, {}) has no area inside the {} x {} image",
                    rec.image_id, o.x, o.y, o.w, o.h, rec.width, rec.height
                )));
            }
        }
        for (t, rel) in rec.relationships.iter().enumerate() {
            let p = normalize_predicate(&rel.predicate);
            if p.is_empty() {
                return Err(Error::input(format!(
                    "image {} (index {i}) relationship {t}: empty predicate",
                    rec.image_id
                )));
            }
            predicate_names.insert(p);
        }
    }
    if predicate_names.is_empty() {
        return Err(Error::input(
            "region-graph file contains no relationships; a dataset needs at least one predicate",
        ));
    }
    let classes: Vec<String> = class_names.into_iter().collect();
    let class_id: BTreeMap<&str, usize> =
        classes.iter().enumerate().map(|(c, n)| (n.as_str(), c)).collect();
    let predicates: Vec<Predicate> = predicate_names
        .into_iter()
        .map(|name| {
            let kind = predicate_kind(&name);
            let trivial = is_trivial_predicate(&name);
            Predicate { name, kind, trivial }
        })
        .collect();
    let taxonomy = PredicateTaxonomy::new(predicates)?;

    // Second pass: convert records, rejecting anything inconsistent.
    let mut images = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let meta = ImageMeta::new(rec.image_id.to_string(), rec.width, rec.height)
            .map_err(|e| Error::input(format!("image {} (index {i}): {e}", rec.image_id)))?;
        let mut by_object_id = BTreeMap::new();
        let mut objects = Vec::with_capacity(rec.objects.len());
        for (j, o) in rec.objects.iter().enumerate() {
            let bbox = clip_box(o.x, o.y, o.w, o.h, &meta).ok_or_else(|| {
                Error::input(format!(
                    "image {} (index {i}) object {j}: box ({}, {}, {}, {}) has no area inside the {} x {} image",
                    rec.image_id, o.x, o.y, o.w, o.h, rec.width, rec.height
                ))
            })?;
            if by_object_id.insert(o.object_id, j).is_some() {
                return Err(Error::input(format!(
                    "image {} (index {i}) object {j}: duplicate object id {}",
                    rec.image_id, o.object_id
                )));
            }
            let name = o.names.first().map(|n| n.trim()).unwrap_or("");
            objects.push(ObjectInstance { bbox, class_id: class_id[name], feature: None });
        }
        let mut triplets = Vec::with_capacity(rec.relationships.len());
        for (t, rel) in rec.relationships.iter().enumerate() {
            let resolve = |id: u64, role: &str| {
                by_object_id.get(&id).copied().ok_or_else(|| {
                    Error::input(format!(
                        "image {} (index {i}) relationship {t}: {role} id {id} does not match any object",
                        rec.image_id
                    ))
                })
            };
            let subject = resolve(rel.subject_id, "subject")?;
            let object = resolve(rel.object_id, "object")?;
            if subject == object {
                return Err(Error::input(format!(
                    "image {} (index {i}) relationship {t}: subject and object are the same instance",
                    rec.image_id
                )));
            }
            let predicate = taxonomy.id_of(&normalize_predicate(&rel.predicate)).unwrap();
            triplets.push(Triplet::new(subject, predicate, object));
        }
        images.push(SceneGraphAnnotation { image: meta, objects, triplets });
    }
    let dataset = Dataset { classes, taxonomy, d_vis: 0, images };
    dataset.validate()?;
    Ok(dataset)
}

/// Reads a dataset in the given format, validating every invariant.
pub fn ingest(path: &Path, format: IngestFormat) -> Result<Dataset> {
    match format {
        IngestFormat::Native => load_dataset(path),
        IngestFormat::VgSimplified => ingest_vg(&read_input(path)?)
            .map_err(|e| Error::input(format!("{}: {e}", path.display()))),
    }
}

// ---------------------------------------------------------------------------
// Detections
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DetectionsFile {
    version: u32,
    #[serde(flatten)]
    detections: DetectionSet,
}

pub fn save_detections(detections: &DetectionSet, path: &Path) -> Result<()> {
    let file = DetectionsFile { version: DETECTIONS_VERSION, detections: detections.clone() };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::runtime(format!("detections serialization failed: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Loads detector outputs. Consistency against a dataset is checked where
/// the two meet ([`DetectionSet::validate`]), not here.
pub fn load_detections(path: &Path) -> Result<DetectionSet> {
    let text = read_input(path)?;
    let file: DetectionsFile = serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    if file.version != DETECTIONS_VERSION {
        return Err(Error::input(format!(
            "{}: unsupported detections version {} (this build reads {DETECTIONS_VERSION})",
            path.display(),
            file.version
        )));
    }
    Ok(file.detections)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PriorBlock {
    num_classes: usize,
    num_predicates: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    init_seed: u64,
    config: crate::model::RelNetConfig,
    spatial: Option<Mlp>,
    visual: Option<Mlp>,
    relpos_head: Option<Mlp>,
    dist_head_spatial: Option<Mlp>,
    dist_head_visual: Option<Mlp>,
    iou_head: Option<Mlp>,
    semantic_logprior: PriorBlock,
}

pub fn save_checkpoint(model: &ModelParams, path: &Path) -> Result<()> {
    let prior = model.prior();
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        init_seed: model.init_seed(),
        config: model.config().clone(),
        spatial: model.spatial.clone(),
        visual: model.visual.clone(),
        relpos_head: model.relpos_head.clone(),
        dist_head_spatial: model.dist_head_spatial.clone(),
        dist_head_visual: model.dist_head_visual.clone(),
        iou_head: model.iou_head.clone(),
        semantic_logprior: PriorBlock {
            num_classes: prior.num_classes(),
            num_predicates: prior.num_predicates(),
            values: prior.values().to_vec(),
        },
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::runtime(format!("checkpoint serialization failed: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Loads a checkpoint and reassembles the model, re-checking every shape
/// against the stored configuration.
pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let text = read_input(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::input(format!(
            "{}: unsupported checkpoint version {} (this build reads {CHECKPOINT_VERSION})",
            path.display(),
            file.version
        )));
    }
    let p = file.semantic_logprior;
    let prior = SemanticPrior::from_values(p.num_classes, p.num_predicates, p.values)?;
    ModelParams::from_parts(
        file.config,
        file.init_seed,
        file.spatial,
        file.visual,
        file.relpos_head,
        file.dist_head_spatial,
        file.dist_head_visual,
        file.iou_head,
        prior,
    )
    .map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Predictions (JSON lines)
// ---------------------------------------------------------------------------

/// Writes one prediction per line, in input order.
pub fn save_predictions(predictions: &[RelationshipPrediction], path: &Path) -> Result<()> {
    let mut text = String::new();
    for p in predictions {
        let line = serde_json::to_string(p)
            .map_err(|e| Error::runtime(format!("prediction serialization failed: {e}")))?;
        text.push_str(&line);
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

/// Reads a predictions dump; a malformed line fails with its line number.
pub fn load_predictions(path: &Path) -> Result<Vec<RelationshipPrediction>> {
    let text = read_input(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: RelationshipPrediction = serde_json::from_str(line).map_err(|e| {
            Error::input(format!("{} line {}: {e}", path.display(), n + 1))
        })?;
        out.push(p);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV report tables
// ---------------------------------------------------------------------------

/// Escapes a value for a comma-separated table: fields containing a comma,
/// quote or newline are quoted, with inner quotes doubled.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// `mode,k,recall` — one row per requested K.
pub fn write_recall_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = String::from("mode,k,recall\n");
    for (k, r) in &report.recall {
        let _ = writeln!(text, "{},{k},{r}", report.mode.as_str());
    }
    atomic_write(path, text.as_bytes())
}

/// `mode,k,kind,recall` — requested Ks crossed with the predicate kinds
/// the ground truth contains.
pub fn write_recall_by_kind_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = String::from("mode,k,kind,recall\n");
    for (k, kind, r) in &report.recall_by_kind {
        let _ = writeln!(text, "{},{k},{},{r}", report.mode.as_str(), kind.as_str());
    }
    atomic_write(path, text.as_bytes())
}

/// `threshold,geometric_count,possessive_count,alpha` — the alpha field is
/// empty when nothing possessive clears the threshold.
pub fn write_alpha_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = String::from("threshold,geometric_count,possessive_count,alpha\n");
    for row in &report.alpha {
        match row.alpha {
            Some(a) => {
                let _ = writeln!(text, "{},{},{},{a}", row.threshold, row.geometric, row.possessive);
            }
            None => {
                let _ = writeln!(text, "{},{},{},", row.threshold, row.geometric, row.possessive);
            }
        }
    }
    atomic_write(path, text.as_bytes())
}

/// `threshold,nontrivial_count`.
pub fn write_nontrivial_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = String::from("threshold,nontrivial_count\n");
    for (t, c) in &report.nontrivial {
        let _ = writeln!(text, "{t},{c}");
    }
    atomic_write(path, text.as_bytes())
}

/// `image_id,pair_index,predicate_id,kind,confidence,f_0..f_{R-1}` — the
/// fused pre-softmax scores for every ordered pair.
pub fn write_features_csv(rows: &[FeatureRow], num_predicates: usize, path: &Path) -> Result<()> {
    let mut text = String::from("image_id,pair_index,predicate_id,kind,confidence");
    for r in 0..num_predicates {
        let _ = write!(text, ",f_{r}");
    }
    text.push('\n');
    for row in rows {
        let _ = write!(
            text,
            "{},{},{},{},{}",
            csv_field(&row.image_id),
            row.pair_index,
            row.predicate,
            row.kind.as_str(),
            row.confidence
        );
        for v in &row.logits {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

/// `image_id,sub_idx,obj_idx,bit_h,bit_v,distance,iou` — the geometric
/// self-supervision targets for every ordered pair of every image.
pub fn write_labels_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut text = String::from("image_id,sub_idx,obj_idx,bit_h,bit_v,distance,iou\n");
    for ann in &dataset.images {
        for (s, o) in ordered_pairs(ann.objects.len()) {
            let l = labels_for_pair(&ann.objects[s].bbox, &ann.objects[o].bbox, &ann.image);
            let _ = writeln!(
                text,
                "{},{s},{o},{},{},{},{}",
                csv_field(ann.image.id()),
                l.relpos.0,
                l.relpos.1,
                l.distance,
                l.iou
            );
        }
    }
    atomic_write(path, text.as_bytes())
}

/// `predicate_id,name,kind,count` — how often each predicate is annotated.
pub fn write_label_counts_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let counts = dataset.predicate_counts();
    let mut text = String::from("predicate_id,name,kind,count\n");
    for (id, p) in dataset.taxonomy.iter() {
        let _ = writeln!(text, "{id},{},{},{}", csv_field(&p.name), p.kind.as_str(), counts[id]);
    }
    atomic_write(path, text.as_bytes())
}

/// `epoch,L0,L_task1,L_task2,L_task3,L_task4,L` — one row per epoch, all
/// loss terms unweighted except the total. Wall-clock timing, the only
/// non-reproducible quantity, goes into trailing `#` comment lines so the
/// table itself is byte-identical across reruns.
pub fn write_train_log_csv(report: &TrainReport, path: &Path) -> Result<()> {
    let mut text = String::from("epoch,L0,L_task1,L_task2,L_task3,L_task4,L\n");
    for e in &report.epochs {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            e.epoch, e.l0, e.tasks[0], e.tasks[1], e.tasks[2], e.tasks[3], e.total
        );
    }
    for e in &report.epochs {
        let _ = writeln!(text, "# epoch {} wall seconds {}", e.epoch, e.seconds);
    }
    atomic_write(path, text.as_bytes())
}
