use serde::{Deserialize, Serialize};

use super::{AttentionPool, ModelConfig, SubjectFeatures, Variant};
use crate::error::{Error, Result};
use crate::nn::{softmax2, softmax_cross_entropy, Activation, DenseLayer, ParamTensor, Parameterized};
use crate::seed::Rng;

/// Which path a learnable tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamPath {
    Image,
    Biomarker,
    Combined,
}

/// Which head produced a routed risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskSource {
    Combined,
    Image,
    Biomarker,
}

impl RiskSource {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskSource::Combined => "combined",
            RiskSource::Image => "image",
            RiskSource::Biomarker => "biomarker",
        }
    }
}

/// All learnable tensors of the three paths.
#[derive(Debug, Clone)]
pub struct M3NetParams {
    pub attention: AttentionPool,
    pub image_proj: DenseLayer,
    pub image_head: DenseLayer,
    pub bio_layer1: DenseLayer,
    pub bio_proj: DenseLayer,
    pub bio_head: DenseLayer,
    pub combined_layer1: DenseLayer,
    pub combined_head: DenseLayer,
}

impl M3NetParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let c = config;
        Self {
            attention: AttentionPool::zeros(c.image_feature_width, c.attention_hidden),
            image_proj: DenseLayer::zeros(c.image_feature_width, c.dim, Activation::Tanh),
            image_head: DenseLayer::zeros(c.dim, 2, Activation::Identity),
            bio_layer1: DenseLayer::zeros(c.biomarker_width, c.bio_hidden, Activation::Tanh),
            bio_proj: DenseLayer::zeros(c.bio_hidden, c.dim, Activation::Tanh),
            bio_head: DenseLayer::zeros(c.dim, 2, Activation::Identity),
            combined_layer1: DenseLayer::zeros(
                c.combined_input_width(),
                c.combined_hidden,
                Activation::Tanh,
            ),
            combined_head: DenseLayer::zeros(c.combined_hidden, 2, Activation::Identity),
        }
    }

    pub fn glorot(config: &ModelConfig, rng: &mut Rng) -> Self {
        let c = config;
        Self {
            attention: AttentionPool::glorot(c.image_feature_width, c.attention_hidden, rng),
            image_proj: DenseLayer::glorot(c.image_feature_width, c.dim, Activation::Tanh, rng),
            image_head: DenseLayer::glorot(c.dim, 2, Activation::Identity, rng),
            bio_layer1: DenseLayer::glorot(c.biomarker_width, c.bio_hidden, Activation::Tanh, rng),
            bio_proj: DenseLayer::glorot(c.bio_hidden, c.dim, Activation::Tanh, rng),
            bio_head: DenseLayer::glorot(c.dim, 2, Activation::Identity, rng),
            combined_layer1: DenseLayer::glorot(
                c.combined_input_width(),
                c.combined_hidden,
                Activation::Tanh,
                rng,
            ),
            combined_head: DenseLayer::glorot(c.combined_hidden, 2, Activation::Identity, rng),
        }
    }

    /// Stable names, in the same order as [`Parameterized::params`].
    pub fn names() -> [&'static str; 16] {
        [
            "attention.v",
            "attention.w",
            "image_proj.weight",
            "image_proj.bias",
            "image_head.weight",
            "image_head.bias",
            "bio_layer1.weight",
            "bio_layer1.bias",
            "bio_proj.weight",
            "bio_proj.bias",
            "bio_head.weight",
            "bio_head.bias",
            "combined_layer1.weight",
            "combined_layer1.bias",
            "combined_head.weight",
            "combined_head.bias",
        ]
    }

    /// Path membership, in the same order as [`Parameterized::params`].
    pub fn paths() -> [ParamPath; 16] {
        use ParamPath::*;
        [
            Image, Image, Image, Image, Image, Image, Biomarker, Biomarker, Biomarker, Biomarker,
            Biomarker, Biomarker, Combined, Combined, Combined, Combined,
        ]
    }

    /// Checks every tensor shape against `config`.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = Self::zeros(config);
        for ((name, have), want) in Self::names()
            .iter()
            .zip(self.params())
            .zip(expected.params())
        {
            if have.shape() != want.shape() {
                return Err(Error::InvalidConfig(format!(
                    "{name} has shape {:?}, config requires {:?}",
                    have.shape(),
                    want.shape()
                )));
            }
        }
        let acts = [
            (&self.image_proj, Activation::Tanh),
            (&self.image_head, Activation::Identity),
            (&self.bio_layer1, Activation::Tanh),
            (&self.bio_proj, Activation::Tanh),
            (&self.bio_head, Activation::Identity),
            (&self.combined_layer1, Activation::Tanh),
            (&self.combined_head, Activation::Identity),
        ];
        if acts.iter().any(|(l, a)| l.activation() != *a) {
            return Err(Error::InvalidConfig("unexpected layer activation".into()));
        }
        Ok(())
    }

    fn clear_caches(&mut self) {
        self.attention.clear_cache();
        for l in [
            &mut self.image_proj,
            &mut self.image_head,
            &mut self.bio_layer1,
            &mut self.bio_proj,
            &mut self.bio_head,
            &mut self.combined_layer1,
            &mut self.combined_head,
        ] {
            l.clear_cache();
        }
    }
}

impl Parameterized for M3NetParams {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut out = self.attention.params();
        for l in [
            &self.image_proj,
            &self.image_head,
            &self.bio_layer1,
            &self.bio_proj,
            &self.bio_head,
            &self.combined_layer1,
            &self.combined_head,
        ] {
            out.extend(l.params());
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = self.attention.params_mut();
        for l in [
            &mut self.image_proj,
            &mut self.image_head,
            &mut self.bio_layer1,
            &mut self.bio_proj,
            &mut self.bio_head,
            &mut self.combined_layer1,
            &mut self.combined_head,
        ] {
            out.extend(l.params_mut());
        }
        out
    }
}

/// Per-subject outputs. Each probability is present exactly when the
/// modalities its path needs are present.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub p_combined: Option<f64>,
    pub attention_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub img: f64,
    pub bio: f64,
    pub cmb: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            img: 1.0,
            bio: 1.0,
            cmb: 1.0,
        }
    }
}

/// The three masked cross-entropy terms of a batch. Each term is a mean over
/// the subjects for which it is active, or exactly 0 if none are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub img_cel: f64,
    pub bio_cel: f64,
    pub cmb_cel: f64,
    pub total: f64,
    pub weights: LossWeights,
    pub active: [usize; 3],
}

/// Intermediate values of one subject's cached forward pass.
struct Trace {
    image: Option<([f64; 2], f64)>,
    bio: Option<([f64; 2], f64)>,
    combined: Option<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct M3Net {
    config: ModelConfig,
    pub params: M3NetParams,
}

impl M3Net {
    /// Glorot-initialized model drawn from `rng`.
    pub fn new(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let params = M3NetParams::glorot(&config, rng);
        Ok(Self { config, params })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = M3NetParams::zeros(&config);
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: M3NetParams) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn check_features(&self, f: &SubjectFeatures) -> Result<()> {
        if let Some(bag) = &f.image {
            if bag.width() != self.config.image_feature_width {
                return Err(Error::DimensionMismatch {
                    context: "image feature width",
                    expected: self.config.image_feature_width,
                    actual: bag.width(),
                });
            }
        }
        if let Some(b) = &f.biomarkers {
            if b.len() != self.config.biomarker_width {
                return Err(Error::DimensionMismatch {
                    context: "biomarker vector",
                    expected: self.config.biomarker_width,
                    actual: b.len(),
                });
            }
        }
        Ok(())
    }

    /// Image path: pooled bag → `dim`-wide feature → head. Returns
    /// `(p1, feature, attention weights)`.
    pub fn image_path_forward(&self, f: &SubjectFeatures) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let bag = f.image.as_ref().ok_or(Error::MissingModality {
            path: "image path",
            modality: "image",
        })?;
        self.check_features(f)?;
        let p = &self.params;
        let (pooled, weights) = p.attention.apply(bag)?;
        let feature = p.image_proj.apply(&pooled)?;
        let logits = p.image_head.apply(&feature)?;
        Ok((softmax2([logits[0], logits[1]])[1], feature, weights))
    }

    /// Biomarker path: two dense layers → head. Returns `(p2, feature)`.
    pub fn bio_path_forward(&self, f: &SubjectFeatures) -> Result<(f64, Vec<f64>)> {
        let bio = f.biomarkers.as_ref().ok_or(Error::MissingModality {
            path: "biomarker path",
            modality: "biomarker",
        })?;
        self.check_features(f)?;
        let p = &self.params;
        let hidden = p.bio_layer1.apply(bio)?;
        let feature = p.bio_proj.apply(&hidden)?;
        let logits = p.bio_head.apply(&feature)?;
        Ok((softmax2([logits[0], logits[1]])[1], feature))
    }

    /// Assembles the combined-path input for the configured variant.
    pub fn combined_input(
        &self,
        p1: f64,
        p2: f64,
        image_feature: &[f64],
        bio_feature: &[f64],
        biomarkers: &[f64],
    ) -> Vec<f64> {
        let blood = biomarkers[self.config.blood_index];
        let mayo = biomarkers[self.config.mayo_index];
        match self.config.variant {
            Variant::M3Net1 => vec![p1, p2, blood, mayo],
            Variant::M3Net2 => {
                let mut v = Vec::with_capacity(self.config.combined_input_width());
                v.extend_from_slice(image_feature);
                v.extend_from_slice(bio_feature);
                v.push(blood);
                v.push(mayo);
                v
            }
        }
    }

    /// Combined path on an already-assembled input vector.
    pub fn combined_forward(&self, input: &[f64]) -> Result<f64> {
        let hidden = self.params.combined_layer1.apply(input)?;
        let logits = self.params.combined_head.apply(&hidden)?;
        Ok(softmax2([logits[0], logits[1]])[1])
    }

    /// Runs every path the subject's modalities allow. Never mutates the model.
    pub fn forward(&self, f: &SubjectFeatures) -> Result<ForwardOutput> {
        let mask = f.mask();
        if mask.is_empty() {
            return Err(Error::NoUsableModality);
        }
        let image = mask
            .has_image
            .then(|| self.image_path_forward(f))
            .transpose()?;
        let bio = mask.has_bio.then(|| self.bio_path_forward(f)).transpose()?;
        let p_combined = match (&image, &bio, &f.biomarkers) {
            (Some((p1, fi, _)), Some((p2, fb)), Some(raw)) => {
                let input = self.combined_input(*p1, *p2, fi, fb, raw);
                Some(self.combined_forward(&input)?)
            }
            _ => None,
        };
        Ok(ForwardOutput {
            p1: image.as_ref().map(|x| x.0),
            p2: bio.as_ref().map(|x| x.0),
            p_combined,
            attention_weights: image.map(|x| x.2),
        })
    }

    /// Routed risk: combined output for complete subjects, otherwise the
    /// available sub-path output.
    pub fn predict_risk(&self, f: &SubjectFeatures) -> Result<(f64, RiskSource)> {
        let out = self.forward(f)?;
        match (out.p_combined, out.p1, out.p2) {
            (Some(p), _, _) => Ok((p, RiskSource::Combined)),
            (None, Some(p), _) => Ok((p, RiskSource::Image)),
            (None, None, Some(p)) => Ok((p, RiskSource::Biomarker)),
            _ => Err(Error::NoUsableModality),
        }
    }

    fn active_counts(batch: &[(&SubjectFeatures, u8)]) -> Result<[usize; 3]> {
        if batch.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let mut n = [0usize; 3];
        for (f, _) in batch {
            let m = f.mask();
            if m.is_empty() {
                return Err(Error::NoUsableModality);
            }
            n[0] += usize::from(m.has_image);
            n[1] += usize::from(m.has_bio);
            n[2] += usize::from(m.is_complete());
        }
        Ok(n)
    }

    fn breakdown(sums: [f64; 3], active: [usize; 3], weights: LossWeights) -> LossBreakdown {
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        let img_cel = mean(sums[0], active[0]);
        let bio_cel = mean(sums[1], active[1]);
        let cmb_cel = mean(sums[2], active[2]);
        LossBreakdown {
            img_cel,
            bio_cel,
            cmb_cel,
            total: weights.img * img_cel + weights.bio * bio_cel + weights.cmb * cmb_cel,
            weights,
            active,
        }
    }

    /// Masked three-term loss of a batch without touching gradients.
    pub fn masked_loss(
        &self,
        batch: &[(&SubjectFeatures, u8)],
        weights: LossWeights,
    ) -> Result<LossBreakdown> {
        let active = Self::active_counts(batch)?;
        let mut sums = [0.0; 3];
        for (f, label) in batch {
            let image = f
                .image
                .is_some()
                .then(|| self.image_logits(f))
                .transpose()?;
            let bio = f.biomarkers.is_some().then(|| self.bio_logits(f)).transpose()?;
            if let Some((l, ..)) = &image {
                sums[0] += softmax_cross_entropy(*l, *label).0;
            }
            if let Some((l, ..)) = &bio {
                sums[1] += softmax_cross_entropy(*l, *label).0;
            }
            if let (Some((l1, fi)), Some((l2, fb)), Some(raw)) = (&image, &bio, &f.biomarkers) {
                let input = self.combined_input(
                    softmax2(*l1)[1],
                    softmax2(*l2)[1],
                    fi,
                    fb,
                    raw,
                );
                let h = self.params.combined_layer1.apply(&input)?;
                let l = self.params.combined_head.apply(&h)?;
                sums[2] += softmax_cross_entropy([l[0], l[1]], *label).0;
            }
        }
        Ok(Self::breakdown(sums, active, weights))
    }

    fn image_logits(&self, f: &SubjectFeatures) -> Result<([f64; 2], Vec<f64>)> {
        self.check_features(f)?;
        let p = &self.params;
        let (pooled, _) = p.attention.apply(f.image.as_ref().expect("checked by caller"))?;
        let feature = p.image_proj.apply(&pooled)?;
        let l = p.image_head.apply(&feature)?;
        Ok(([l[0], l[1]], feature))
    }

    fn bio_logits(&self, f: &SubjectFeatures) -> Result<([f64; 2], Vec<f64>)> {
        self.check_features(f)?;
        let p = &self.params;
        let h = p.bio_layer1.apply(f.biomarkers.as_ref().expect("checked by caller"))?;
        let feature = p.bio_proj.apply(&h)?;
        let l = p.bio_head.apply(&feature)?;
        Ok(([l[0], l[1]], feature))
    }

    /// Masked loss of a batch, accumulating `d total / d param` into every
    /// parameter's gradient buffer. Parameters exclusive to a path that no
    /// subject in the batch activates receive no contribution at all.
    pub fn masked_loss_backward(
        &mut self,
        batch: &[(&SubjectFeatures, u8)],
        weights: LossWeights,
    ) -> Result<LossBreakdown> {
        let active = Self::active_counts(batch)?;
        let scale = |w: f64, n: usize| if n == 0 { 0.0 } else { w / n as f64 };
        let scales = [
            scale(weights.img, active[0]),
            scale(weights.bio, active[1]),
            scale(weights.cmb, active[2]),
        ];
        let mut sums = [0.0; 3];
        for (f, label) in batch {
            let result = self
                .forward_cached(f)
                .and_then(|trace| self.backward_subject(&trace, *label, scales, &mut sums));
            if result.is_err() {
                self.params.clear_caches();
            }
            result?;
        }
        Ok(Self::breakdown(sums, active, weights))
    }

    fn forward_cached(&mut self, f: &SubjectFeatures) -> Result<Trace> {
        self.check_features(f)?;
        let variant = self.config.variant;
        let (blood_index, mayo_index) = (self.config.blood_index, self.config.mayo_index);
        let p = &mut self.params;
        let image = match &f.image {
            Some(bag) => {
                let (pooled, _) = p.attention.forward(bag)?;
                let feature = p.image_proj.forward(&pooled)?;
                let l = p.image_head.forward(&feature)?;
                let l = [l[0], l[1]];
                Some((l, softmax2(l)[1], feature))
            }
            None => None,
        };
        let bio = match &f.biomarkers {
            Some(b) => {
                let h = p.bio_layer1.forward(b)?;
                let feature = p.bio_proj.forward(&h)?;
                let l = p.bio_head.forward(&feature)?;
                let l = [l[0], l[1]];
                Some((l, softmax2(l)[1], feature))
            }
            None => None,
        };
        let combined = match (&image, &bio, &f.biomarkers) {
            (Some((_, p1, fi)), Some((_, p2, fb)), Some(raw)) => {
                let (blood, mayo) = (raw[blood_index], raw[mayo_index]);
                let input = match variant {
                    Variant::M3Net1 => vec![*p1, *p2, blood, mayo],
                    Variant::M3Net2 => {
                        let mut v = fi.clone();
                        v.extend_from_slice(fb);
                        v.push(blood);
                        v.push(mayo);
                        v
                    }
                };
                let h = p.combined_layer1.forward(&input)?;
                let l = p.combined_head.forward(&h)?;
                Some([l[0], l[1]])
            }
            _ => None,
        };
        Ok(Trace {
            image: image.map(|(l, p1, _)| (l, p1)),
            bio: bio.map(|(l, p2, _)| (l, p2)),
            combined,
        })
    }

    fn backward_subject(
        &mut self,
        trace: &Trace,
        label: u8,
        scales: [f64; 3],
        sums: &mut [f64; 3],
    ) -> Result<()> {
        let dim = self.config.dim;
        let variant = self.config.variant;
        let p = &mut self.params;

        // gradient arriving at each sub-path from the combined path: either
        // through the probability (M3Net1) or through the feature (M3Net2)
        let mut d_prob = [0.0; 2];
        let mut d_feature: [Option<Vec<f64>>; 2] = [None, None];
        if let Some(l) = trace.combined {
            let (loss, g) = softmax_cross_entropy(l, label);
            sums[2] += loss;
            let dh = p.combined_head.backward(&[g[0] * scales[2], g[1] * scales[2]])?;
            let din = p.combined_layer1.backward(&dh)?;
            match variant {
                Variant::M3Net1 => d_prob = [din[0], din[1]],
                Variant::M3Net2 => {
                    d_feature = [Some(din[..dim].to_vec()), Some(din[dim..2 * dim].to_vec())];
                }
            }
        }

        let head_grad = |l: [f64; 2], prob: f64, scale: f64, d_prob: f64| -> (f64, [f64; 2]) {
            let (loss, g) = softmax_cross_entropy(l, label);
            let dp = d_prob * prob * (1.0 - prob);
            (loss, [g[0] * scale - dp, g[1] * scale + dp])
        };

        if let Some((l, p1)) = trace.image {
            let (loss, g) = head_grad(l, p1, scales[0], d_prob[0]);
            sums[0] += loss;
            let mut df = p.image_head.backward(&g)?;
            if let Some(extra) = &d_feature[0] {
                df.iter_mut().zip(extra).for_each(|(a, b)| *a += b);
            }
            let dpool = p.image_proj.backward(&df)?;
            p.attention.backward(&dpool)?;
        }
        if let Some((l, p2)) = trace.bio {
            let (loss, g) = head_grad(l, p2, scales[1], d_prob[1]);
            sums[1] += loss;
            let mut df = p.bio_head.backward(&g)?;
            if let Some(extra) = &d_feature[1] {
                df.iter_mut().zip(extra).for_each(|(a, b)| *a += b);
            }
            let dh = p.bio_proj.backward(&df)?;
            p.bio_layer1.backward(&dh)?;
        }
        Ok(())
    }
}

impl Parameterized for M3Net {
    fn params(&self) -> Vec<&ParamTensor> {
        self.params.params()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.params.params_mut()
    }
}
