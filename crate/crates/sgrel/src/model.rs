//! The relationship classifier.
//!
//! Three modules score each ordered object pair against the predicate set:
//!
//! * a **spatial** MLP reading the 22-d pairwise layout feature,
//! * a **visual** MLP reading concatenated subject/object/relation
//!   appearance vectors,
//! * a fixed **semantic** table of log relationship frequencies per
//!   (subject class, object class), built from training counts.
//!
//! The per-module score vectors are summed and softmaxed into a predicate
//! distribution. Four auxiliary heads hang off intermediate activations:
//! relative-position bits and a centroid-distance regressor on the spatial
//! module (final and pre-final hidden layer respectively), an IoU regressor
//! and a second distance regressor on the visual module (pre-final hidden
//! layer). The heads exist to shape the shared hidden representations; at
//! evaluation time only the fused predicate distribution matters.
//!
//! The spatial and visual modules can each be disabled, in which case they
//! contribute a zero score vector and their heads are absent. The semantic
//! table is always present and never trained.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImageMeta;
use crate::nn::{Mlp, MlpCache, MlpGrads, MlpSpec, OutputActivation};
use crate::scene::{ObjectInstance, SceneGraphAnnotation};
use crate::spatial::{spatial_feature, SpatialFeature, SPATIAL_FEATURE_LEN};

/// Architecture and ablation switches for [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelNetConfig {
    /// Number of object classes, `C`.
    pub num_classes: usize,
    /// Number of predicate classes, `R`.
    pub num_predicates: usize,
    /// Width of one appearance feature vector (the visual MLP reads three).
    pub d_vis: usize,
    pub use_spatial: bool,
    pub use_visual: bool,
    /// Hidden widths of the spatial MLP; at least two layers so the
    /// auxiliary heads have a final and a pre-final activation to read.
    pub spatial_hidden: Vec<usize>,
    /// Hidden widths of the visual MLP; same two-layer minimum.
    pub visual_hidden: Vec<usize>,
    /// Hidden width of the relative-position head (fixed depth: 2 layers).
    pub relpos_hidden: usize,
    /// Hidden widths of the scalar heads (fixed depth: 3 layers).
    pub scalar_hidden: [usize; 2],
}

impl RelNetConfig {
    /// Default architecture for a dataset shape.
    pub fn new(num_classes: usize, num_predicates: usize, d_vis: usize) -> RelNetConfig {
        RelNetConfig {
            num_classes,
            num_predicates,
            d_vis,
            use_spatial: true,
            use_visual: d_vis > 0,
            spatial_hidden: vec![64, 64],
            visual_hidden: vec![128, 64],
            relpos_hidden: 32,
            scalar_hidden: [32, 16],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::config("the model needs at least one object class"));
        }
        if self.num_predicates == 0 {
            return Err(Error::config("the model needs at least one predicate class"));
        }
        if self.use_spatial && self.spatial_hidden.len() < 2 {
            return Err(Error::config(
                "the spatial MLP needs at least two hidden layers (heads read its final and pre-final activations)",
            ));
        }
        if self.use_visual && self.visual_hidden.len() < 2 {
            return Err(Error::config(
                "the visual MLP needs at least two hidden layers (heads read its pre-final activation)",
            ));
        }
        if self.use_visual && self.d_vis == 0 {
            return Err(Error::config(
                "the visual module is enabled but d_vis is 0; disable it or provide features",
            ));
        }
        if self.relpos_hidden == 0 || self.scalar_hidden.contains(&0) {
            return Err(Error::config("head widths must be positive"));
        }
        if self.spatial_hidden.contains(&0) || self.visual_hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        Ok(())
    }

    fn spatial_spec(&self) -> MlpSpec {
        let mut widths = vec![SPATIAL_FEATURE_LEN];
        widths.extend_from_slice(&self.spatial_hidden);
        widths.push(self.num_predicates);
        MlpSpec {
            layer_widths: widths,
            hidden_activation: crate::nn::HiddenActivation::Relu,
            output_activation: OutputActivation::Linear,
        }
    }

    fn visual_spec(&self) -> MlpSpec {
        let mut widths = vec![3 * self.d_vis];
        widths.extend_from_slice(&self.visual_hidden);
        widths.push(self.num_predicates);
        MlpSpec {
            layer_widths: widths,
            hidden_activation: crate::nn::HiddenActivation::Relu,
            output_activation: OutputActivation::Linear,
        }
    }

    fn relpos_spec(&self) -> MlpSpec {
        MlpSpec {
            layer_widths: vec![*self.spatial_hidden.last().unwrap(), self.relpos_hidden, 2],
            hidden_activation: crate::nn::HiddenActivation::Relu,
            output_activation: OutputActivation::Sigmoid,
        }
    }

    fn scalar_spec(&self, in_dim: usize) -> MlpSpec {
        MlpSpec {
            layer_widths: vec![in_dim, self.scalar_hidden[0], self.scalar_hidden[1], 1],
            hidden_activation: crate::nn::HiddenActivation::Relu,
            output_activation: OutputActivation::Softplus,
        }
    }

    fn spatial_prefinal_width(&self) -> usize {
        self.spatial_hidden[self.spatial_hidden.len() - 2]
    }

    fn visual_prefinal_width(&self) -> usize {
        self.visual_hidden[self.visual_hidden.len() - 2]
    }
}

/// Fixed table of log relationship frequencies: for each (subject class,
/// object class) cell, the natural log of the smoothed empirical predicate
/// distribution. Never updated by training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticPrior {
    num_classes: usize,
    num_predicates: usize,
    /// Flat `C * C * R`, indexed `(s * C + o) * R + p`.
    values: Vec<f64>,
}

impl SemanticPrior {
    /// Uninformed prior: every cell is the uniform distribution.
    pub fn uniform(num_classes: usize, num_predicates: usize) -> SemanticPrior {
        let v = (1.0 / num_predicates as f64).ln();
        SemanticPrior {
            num_classes,
            num_predicates,
            values: vec![v; num_classes * num_classes * num_predicates],
        }
    }

    pub fn from_values(num_classes: usize, num_predicates: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_classes * num_classes * num_predicates {
            return Err(Error::config(format!(
                "semantic table has {} entries, expected {}x{}x{}",
                values.len(),
                num_classes,
                num_classes,
                num_predicates
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("semantic table contains non-finite entries"));
        }
        Ok(SemanticPrior { num_classes, num_predicates, values })
    }

    pub fn row(&self, sub_class: usize, obj_class: usize) -> &[f64] {
        let base = (sub_class * self.num_classes + obj_class) * self.num_predicates;
        &self.values[base..base + self.num_predicates]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_predicates(&self) -> usize {
        self.num_predicates
    }
}

/// Builds the semantic prior from annotated images: counts every triplet
/// by (subject class, object class, predicate), smooths each cell with
/// `lambda`, normalizes and takes the natural log.
///
/// With `lambda > 0` every probability is strictly positive, so the logs
/// are finite and each cell's probabilities sum to one.
pub fn build_semantic_prior(
    images: &[SceneGraphAnnotation],
    num_classes: usize,
    num_predicates: usize,
    lambda: f64,
) -> Result<SemanticPrior> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::config(format!("smoothing lambda must be > 0 (got {lambda})")));
    }
    let mut counts = vec![0u64; num_classes * num_classes * num_predicates];
    for ann in images {
        for t in &ann.triplets {
            let s = ann.objects[t.subject].class_id;
            let o = ann.objects[t.object].class_id;
            counts[(s * num_classes + o) * num_predicates + t.predicate] += 1;
        }
    }
    let r = num_predicates as f64;
    let values = counts
        .chunks(num_predicates)
        .flat_map(|cell| {
            let total: u64 = cell.iter().sum();
            let denom = total as f64 + lambda * r;
            cell.iter().map(move |&c| ((c as f64 + lambda) / denom).ln())
        })
        .collect();
    SemanticPrior::from_values(num_classes, num_predicates, values)
}

/// Softmax with max-subtraction; safe for arbitrarily large score sums.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-module score vectors for one pair, before fusion. Disabled modules
/// contribute zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleScores {
    pub f_spt: Vec<f64>,
    pub f_vis: Vec<f64>,
    pub f_sem: Vec<f64>,
}

impl ModuleScores {
    /// The fused pre-softmax score vector.
    pub fn logits(&self) -> Vec<f64> {
        self.f_spt
            .iter()
            .zip(&self.f_vis)
            .zip(&self.f_sem)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

/// Fuses module scores into a predicate distribution.
pub fn combine_predict(scores: &ModuleScores) -> Vec<f64> {
    softmax(&scores.logits())
}

/// Auxiliary head outputs for one pair. `None` when the module carrying
/// the head is disabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxOutputs {
    /// Sigmoid probabilities for (bit_h, bit_v).
    pub relpos: Option<[f64; 2]>,
    /// Normalized centroid distance predicted from the spatial module.
    pub dist_spatial: Option<f64>,
    /// The same target predicted from the visual module.
    pub dist_visual: Option<f64>,
    /// IoU predicted from the visual module.
    pub iou: Option<f64>,
}

/// Model input for one ordered object pair.
#[derive(Debug, Clone)]
pub struct PairInput {
    pub spatial: SpatialFeature,
    /// Concatenated subject/object/relation features, `3 * d_vis` wide.
    pub visual: Option<Vec<f64>>,
    pub sub_class: usize,
    pub obj_class: usize,
}

/// Builds a [`PairInput`] from two annotated objects.
///
/// When `needs_visual` is set both objects must carry feature vectors; the
/// relation feature is their elementwise mean, standing in for a pooled
/// union-region appearance vector.
pub fn pair_input(
    image: &ImageMeta,
    sub: &ObjectInstance,
    obj: &ObjectInstance,
    needs_visual: bool,
) -> Result<PairInput> {
    let visual = if needs_visual {
        let (sf, of) = match (&sub.feature, &obj.feature) {
            (Some(sf), Some(of)) => (sf, of),
            _ => {
                return Err(Error::config(format!(
                    "image {:?}: visual module enabled but an object has no feature vector",
                    image.id()
                )))
            }
        };
        let mut v = Vec::with_capacity(3 * sf.len());
        v.extend_from_slice(sf);
        v.extend_from_slice(of);
        v.extend(sf.iter().zip(of).map(|(a, b)| 0.5 * (a + b)));
        Some(v)
    } else {
        None
    };
    Ok(PairInput {
        spatial: spatial_feature(&sub.bbox, &obj.bbox, image),
        visual,
        sub_class: sub.class_id,
        obj_class: obj.class_id,
    })
}

/// Everything a forward pass produces for one pair, including the cached
/// activations the backward pass and the auxiliary losses need.
#[derive(Debug, Clone)]
pub struct Forward {
    pub scores: ModuleScores,
    /// Fused predicate distribution (sums to 1).
    pub prediction: Vec<f64>,
    pub aux: AuxOutputs,
    pub(crate) spt_cache: Option<MlpCache>,
    pub(crate) vis_cache: Option<MlpCache>,
    pub(crate) relpos_cache: Option<MlpCache>,
    pub(crate) dist_s_cache: Option<MlpCache>,
    pub(crate) dist_v_cache: Option<MlpCache>,
    pub(crate) iou_cache: Option<MlpCache>,
}

/// All trainable parameters plus the fixed semantic table.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: RelNetConfig,
    init_seed: u64,
    pub(crate) spatial: Option<Mlp>,
    pub(crate) visual: Option<Mlp>,
    pub(crate) relpos_head: Option<Mlp>,
    pub(crate) dist_head_spatial: Option<Mlp>,
    pub(crate) dist_head_visual: Option<Mlp>,
    pub(crate) iou_head: Option<Mlp>,
    pub(crate) prior: SemanticPrior,
}

/// Gradient buffers matching the trainable modules of a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub spatial: Option<MlpGrads>,
    pub visual: Option<MlpGrads>,
    pub relpos_head: Option<MlpGrads>,
    pub dist_head_spatial: Option<MlpGrads>,
    pub dist_head_visual: Option<MlpGrads>,
    pub iou_head: Option<MlpGrads>,
}

impl ModelParams {
    /// Seeded initialization. Each module draws from its own RNG stream, so
    /// disabling one module does not change the initialization of another.
    /// The semantic table starts uniform; install the real one with
    /// [`ModelParams::set_prior`].
    pub fn init(config: RelNetConfig, seed: u64) -> Result<ModelParams> {
        config.validate()?;
        let stream_rng = |stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng
        };
        let (spatial, relpos_head, dist_head_spatial) = if config.use_spatial {
            (
                Some(Mlp::init(config.spatial_spec(), &mut stream_rng(0))?),
                Some(Mlp::init(config.relpos_spec(), &mut stream_rng(2))?),
                Some(Mlp::init(config.scalar_spec(config.spatial_prefinal_width()), &mut stream_rng(3))?),
            )
        } else {
            (None, None, None)
        };
        let (visual, dist_head_visual, iou_head) = if config.use_visual {
            (
                Some(Mlp::init(config.visual_spec(), &mut stream_rng(1))?),
                Some(Mlp::init(config.scalar_spec(config.visual_prefinal_width()), &mut stream_rng(4))?),
                Some(Mlp::init(config.scalar_spec(config.visual_prefinal_width()), &mut stream_rng(5))?),
            )
        } else {
            (None, None, None)
        };
        let prior = SemanticPrior::uniform(config.num_classes, config.num_predicates);
        Ok(ModelParams {
            config,
            init_seed: seed,
            spatial,
            visual,
            relpos_head,
            dist_head_spatial,
            dist_head_visual,
            iou_head,
            prior,
        })
    }

    /// Reassembles a model from stored pieces, checking shape consistency.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        config: RelNetConfig,
        init_seed: u64,
        spatial: Option<Mlp>,
        visual: Option<Mlp>,
        relpos_head: Option<Mlp>,
        dist_head_spatial: Option<Mlp>,
        dist_head_visual: Option<Mlp>,
        iou_head: Option<Mlp>,
        prior: SemanticPrior,
    ) -> Result<ModelParams> {
        config.validate()?;
        let check = |mlp: &Option<Mlp>, expect: Option<MlpSpec>, name: &str| -> Result<()> {
            match (mlp, expect) {
                (Some(m), Some(spec)) => {
                    m.check_shape()?;
                    if m.spec() != &spec {
                        return Err(Error::config(format!(
                            "{name} spec {:?} does not match configuration {:?}",
                            m.spec(),
                            spec
                        )));
                    }
                    Ok(())
                }
                (None, None) => Ok(()),
                (Some(_), None) => Err(Error::config(format!("{name} present but its module is disabled"))),
                (None, Some(_)) => Err(Error::config(format!("{name} missing"))),
            }
        };
        let sp = config.use_spatial;
        let vi = config.use_visual;
        check(&spatial, sp.then(|| config.spatial_spec()), "spatial MLP")?;
        check(&relpos_head, sp.then(|| config.relpos_spec()), "relative-position head")?;
        check(
            &dist_head_spatial,
            sp.then(|| config.scalar_spec(config.spatial_prefinal_width())),
            "spatial distance head",
        )?;
        check(&visual, vi.then(|| config.visual_spec()), "visual MLP")?;
        check(
            &dist_head_visual,
            vi.then(|| config.scalar_spec(config.visual_prefinal_width())),
            "visual distance head",
        )?;
        check(&iou_head, vi.then(|| config.scalar_spec(config.visual_prefinal_width())), "iou head")?;
        if prior.num_classes != config.num_classes || prior.num_predicates != config.num_predicates {
            return Err(Error::config(format!(
                "semantic table is {}x{}x{}, configuration wants {}x{}x{}",
                prior.num_classes,
                prior.num_classes,
                prior.num_predicates,
                config.num_classes,
                config.num_classes,
                config.num_predicates
            )));
        }
        Ok(ModelParams {
            config,
            init_seed,
            spatial,
            visual,
            relpos_head,
            dist_head_spatial,
            dist_head_visual,
            iou_head,
            prior,
        })
    }

    pub fn config(&self) -> &RelNetConfig {
        &self.config
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn prior(&self) -> &SemanticPrior {
        &self.prior
    }

    pub fn set_prior(&mut self, prior: SemanticPrior) -> Result<()> {
        if prior.num_classes != self.config.num_classes
            || prior.num_predicates != self.config.num_predicates
        {
            return Err(Error::config(format!(
                "semantic table shape {}x{} does not match model ({}x{})",
                prior.num_classes,
                prior.num_predicates,
                self.config.num_classes,
                self.config.num_predicates
            )));
        }
        self.prior = prior;
        Ok(())
    }

    /// Scores one pair. The caller must pass a visual vector iff the
    /// visual module is enabled; class ids must be below `num_classes`.
    pub fn forward(&self, input: &PairInput) -> Forward {
        let r = self.config.num_predicates;
        debug_assert_eq!(input.spatial.len(), SPATIAL_FEATURE_LEN);
        debug_assert_eq!(input.visual.is_some(), self.visual.is_some(), "visual input mismatch");

        let spt_cache = self.spatial.as_ref().map(|m| m.forward(input.spatial.values()));
        let vis_cache = match (&self.visual, &input.visual) {
            (Some(m), Some(v)) => Some(m.forward(v)),
            _ => None,
        };

        let f_spt = spt_cache.as_ref().map_or_else(|| vec![0.0; r], |c| c.output().to_vec());
        let f_vis = vis_cache.as_ref().map_or_else(|| vec![0.0; r], |c| c.output().to_vec());
        let f_sem = self.prior.row(input.sub_class, input.obj_class).to_vec();
        let scores = ModuleScores { f_spt, f_vis, f_sem };
        let prediction = combine_predict(&scores);

        let relpos_cache = match (&self.relpos_head, &spt_cache) {
            (Some(h), Some(c)) => {
                let idx = self.spatial.as_ref().unwrap().final_hidden_index();
                Some(h.forward(&c.acts[idx]))
            }
            _ => None,
        };
        let dist_s_cache = match (&self.dist_head_spatial, &spt_cache) {
            (Some(h), Some(c)) => {
                let idx = self.spatial.as_ref().unwrap().prefinal_hidden_index();
                Some(h.forward(&c.acts[idx]))
            }
            _ => None,
        };
        let (dist_v_cache, iou_cache) = match &vis_cache {
            Some(c) => {
                let idx = self.visual.as_ref().unwrap().prefinal_hidden_index();
                let dv = self.dist_head_visual.as_ref().map(|h| h.forward(&c.acts[idx]));
                let io = self.iou_head.as_ref().map(|h| h.forward(&c.acts[idx]));
                (dv, io)
            }
            None => (None, None),
        };

        let aux = AuxOutputs {
            relpos: relpos_cache.as_ref().map(|c| [c.output()[0], c.output()[1]]),
            dist_spatial: dist_s_cache.as_ref().map(|c| c.output()[0]),
            dist_visual: dist_v_cache.as_ref().map(|c| c.output()[0]),
            iou: iou_cache.as_ref().map(|c| c.output()[0]),
        };

        Forward {
            scores,
            prediction,
            aux,
            spt_cache,
            vis_cache,
            relpos_cache,
            dist_s_cache,
            dist_v_cache,
            iou_cache,
        }
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            spatial: self.spatial.as_ref().map(Mlp::zero_grads),
            visual: self.visual.as_ref().map(Mlp::zero_grads),
            relpos_head: self.relpos_head.as_ref().map(Mlp::zero_grads),
            dist_head_spatial: self.dist_head_spatial.as_ref().map(Mlp::zero_grads),
            dist_head_visual: self.dist_head_visual.as_ref().map(Mlp::zero_grads),
            iou_head: self.iou_head.as_ref().map(Mlp::zero_grads),
        }
    }

    /// SGD update over every trainable module. The semantic table is fixed
    /// by design and never touched.
    pub fn sgd_step(&mut self, grads: &ModelGrads, lr: f64) {
        let pairs: [(&mut Option<Mlp>, &Option<MlpGrads>); 6] = [
            (&mut self.spatial, &grads.spatial),
            (&mut self.visual, &grads.visual),
            (&mut self.relpos_head, &grads.relpos_head),
            (&mut self.dist_head_spatial, &grads.dist_head_spatial),
            (&mut self.dist_head_visual, &grads.dist_head_visual),
            (&mut self.iou_head, &grads.iou_head),
        ];
        for (m, g) in pairs {
            if let (Some(m), Some(g)) = (m, g) {
                m.sgd_step(g, lr);
            }
        }
    }

    fn modules(&self) -> [(&'static str, &Option<Mlp>); 6] {
        [
            ("spatial", &self.spatial),
            ("visual", &self.visual),
            ("relpos_head", &self.relpos_head),
            ("dist_head_spatial", &self.dist_head_spatial),
            ("dist_head_visual", &self.dist_head_visual),
            ("iou_head", &self.iou_head),
        ]
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.modules().iter().filter_map(|(_, m)| m.as_ref().map(Mlp::param_count)).sum()
    }

    /// Contiguous flat index ranges per trainable module, in the fixed
    /// order spatial, visual, relpos, spatial distance, visual distance,
    /// iou (skipping disabled ones).
    pub fn group_ranges(&self) -> Vec<(&'static str, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut start = 0;
        for (name, m) in self.modules() {
            if let Some(m) = m {
                let n = m.param_count();
                out.push((name, start..start + n));
                start += n;
            }
        }
        out
    }

    pub fn get_param(&self, idx: usize) -> f64 {
        let mut idx = idx;
        for (_, m) in self.modules() {
            if let Some(m) = m {
                if idx < m.param_count() {
                    return m.get_param(idx);
                }
                idx -= m.param_count();
            }
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        let mut idx = idx;
        let mods: [&mut Option<Mlp>; 6] = [
            &mut self.spatial,
            &mut self.visual,
            &mut self.relpos_head,
            &mut self.dist_head_spatial,
            &mut self.dist_head_visual,
            &mut self.iou_head,
        ];
        for m in mods.into_iter().flatten() {
            if idx < m.param_count() {
                m.set_param(idx, value);
                return;
            }
            idx -= m.param_count();
        }
        panic!("parameter index out of range");
    }

    /// Flat-index lookup into a gradient buffer, mirroring
    /// [`ModelParams::get_param`].
    pub fn get_grad(&self, grads: &ModelGrads, idx: usize) -> f64 {
        let mut idx = idx;
        let pairs: [(&Option<Mlp>, &Option<MlpGrads>); 6] = [
            (&self.spatial, &grads.spatial),
            (&self.visual, &grads.visual),
            (&self.relpos_head, &grads.relpos_head),
            (&self.dist_head_spatial, &grads.dist_head_spatial),
            (&self.dist_head_visual, &grads.dist_head_visual),
            (&self.iou_head, &grads.iou_head),
        ];
        for (m, g) in pairs {
            if let (Some(m), Some(g)) = (m, g) {
                if idx < m.param_count() {
                    return Mlp::get_grad(g, idx);
                }
                idx -= m.param_count();
            }
        }
        panic!("gradient index out of range");
    }
}
