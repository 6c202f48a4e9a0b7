use jointhdr_autograd::{ConvGeom, Graph, Scalar, Var};
use serde::{Deserialize, Serialize};

use super::layers::{check_input, conv, conv3, conv3_lrelu, conv_specs, he, LRELU_SLOPE};
use super::{Bound, Init, ModelError, ParamSpec};
use crate::imaging::ReferenceChoice;

/// Pyramid cascading fusion network for one reference position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcfConfig {
    pub preset: String,
    /// Feature channels per pyramid level, finest first.
    pub widths: Vec<usize>,
    /// Channels added by each dilated convolution of a dense block.
    pub growth: usize,
    pub reference: ReferenceChoice,
}

/// Channels of one frame's input: tone-mapped denoised LDR + tone-mapped HDR.
pub const FRAME_CHANNELS: usize = 6;

impl PcfConfig {
    pub fn toy(reference: ReferenceChoice) -> Self {
        Self { preset: "toy".into(), widths: vec![8, 16, 32], growth: 8, reference }
    }

    pub fn default_size(reference: ReferenceChoice) -> Self {
        Self { preset: "default".into(), widths: vec![32, 64, 128], growth: 32, reference }
    }

    pub fn levels(&self) -> usize {
        self.widths.len()
    }

    /// Same topology for another reference position.
    pub fn for_reference(&self, reference: ReferenceChoice) -> Self {
        Self { reference, ..self.clone() }
    }

    pub(crate) fn param_specs(&self) -> Vec<ParamSpec> {
        let mut s = Vec::new();
        let g = self.growth;
        for (k, &c) in self.widths.iter().enumerate() {
            let cin = FRAME_CHANNELS + if k > 0 { self.widths[k - 1] } else { 0 };
            s.extend(conv_specs(&format!("enc{k}"), cin, c, 3, he()));
            s.extend(conv_specs(&format!("att{k}"), 2 * c, c, 3, he()));
            s.extend(conv_specs(&format!("merge{k}"), 3 * c, c, 3, he()));
            for j in 0..3 {
                s.extend(conv_specs(&format!("drdb{k}.d{j}"), c + j * g, g, 3, he()));
            }
            s.extend(conv_specs(&format!("drdb{k}.fuse"), c + 3 * g, c, 1, he()));
            if k + 1 < self.widths.len() {
                s.extend(conv_specs(&format!("proj{k}"), self.widths[k + 1], c, 1, he()));
            }
        }
        s.extend(conv_specs("head", self.widths[0], 3, 3, Init::Zeros));
        s
    }
}

/// Per-level features (finest first) and the pooled image they came from.
#[derive(Clone, Debug)]
pub struct FeaturePyramid {
    pub features: Vec<Var>,
    pub images: Vec<Var>,
}

/// Shared encoder. Level `k > 0` sees the ×2-pooled image at its own scale
/// concatenated with the pooled features of level `k − 1`.
pub fn pyramid_encode<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &PcfConfig,
    p: &Bound,
    stack: Var,
) -> Result<FeaturePyramid, ModelError> {
    check_input(g, stack, "pcf frame", FRAME_CHANNELS, cfg.levels())?;
    let mut features = Vec::with_capacity(cfg.levels());
    let mut images = Vec::with_capacity(cfg.levels());
    let mut img = stack;
    for k in 0..cfg.levels() {
        let input = if k == 0 {
            img
        } else {
            img = g.avg_pool2(img)?;
            let prev = g.avg_pool2(features[k - 1])?;
            g.concat(&[img, prev])?
        };
        images.push(img);
        features.push(conv3_lrelu(g, p, &format!("enc{k}"), input)?);
    }
    Ok(FeaturePyramid { features, images })
}

/// Sigmoid attention of a supporting frame against the reference at one
/// level. Returns `(a ⊙ f_i, a)`.
pub fn msa_attention<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    level: usize,
    f_ref: Var,
    f_i: Var,
) -> Result<(Var, Var), ModelError> {
    if g.shape(f_ref) != g.shape(f_i) {
        return Err(ModelError::Shape(format!(
            "attention level {level}: {:?} vs {:?}",
            g.shape(f_ref),
            g.shape(f_i)
        )));
    }
    let cat = g.concat(&[f_ref, f_i])?;
    let logits = conv3(g, p, &format!("att{level}"), cat)?;
    let a = g.sigmoid(logits);
    Ok((g.mul(a, f_i)?, a))
}

/// Dilated residual dense block named `prefix` (three rate-2 convolutions,
/// dense concatenation, 1×1 fusion, local residual).
pub fn drdb_forward<T: Scalar>(g: &mut Graph<T>, p: &Bound, prefix: &str, f: Var) -> Result<Var, ModelError> {
    let mut dense = vec![f];
    for j in 0..3 {
        let x = if j == 0 { f } else { g.concat(&dense)? };
        let y = conv(g, p, &format!("{prefix}.d{j}"), x, ConvGeom::same(3, 2))?;
        dense.push(g.leaky_relu(y, T::from_f64(LRELU_SLOPE)));
    }
    let cat = g.concat(&dense)?;
    let fused = conv(g, p, &format!("{prefix}.fuse"), cat, ConvGeom::default())?;
    Ok(g.add(fused, f)?)
}

/// One frame's network input: denoised tone-mapped LDR and tone-mapped HDR,
/// each `[n, 3, h, w]`.
#[derive(Clone, Copy, Debug)]
pub struct FrameInput {
    pub ldr: Var,
    pub hdr: Var,
}

/// Fuses a bracket with `reference` as the geometric anchor. Output is
/// `clamp(T(H_ref) + head(Z))` in the tone-mapped domain.
pub fn pcf_forward<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &PcfConfig,
    p: &Bound,
    frames: &[FrameInput; 3],
    reference: ReferenceChoice,
) -> Result<Var, ModelError> {
    if cfg.reference != reference {
        return Err(ModelError::Path { weights: cfg.reference, requested: reference });
    }
    let r = reference.index();
    let mut pyramids = Vec::with_capacity(3);
    for f in frames {
        let stack = g.concat(&[f.ldr, f.hdr])?;
        pyramids.push(pyramid_encode(g, cfg, p, stack)?);
    }
    let shape0 = g.shape(pyramids[r].features[0]).to_vec();
    for (i, py) in pyramids.iter().enumerate() {
        if g.shape(py.features[0]) != shape0.as_slice() {
            return Err(ModelError::Shape(format!("frame {i} differs in shape from the reference")));
        }
    }

    let levels = cfg.levels();
    let mut merged = Vec::with_capacity(levels);
    for k in 0..levels {
        let f_ref = pyramids[r].features[k];
        let mut parts = vec![f_ref];
        for (i, py) in pyramids.iter().enumerate() {
            if i != r {
                parts.push(msa_attention(g, p, k, f_ref, py.features[k])?.0);
            }
        }
        let cat = g.concat(&parts)?;
        merged.push(conv3_lrelu(g, p, &format!("merge{k}"), cat)?);
    }

    let mut cur = drdb_forward(g, p, &format!("drdb{}", levels - 1), merged[levels - 1])?;
    for k in (0..levels - 1).rev() {
        let proj = conv(g, p, &format!("proj{k}"), cur, ConvGeom::default())?;
        let up = g.upsample2(proj)?;
        let x = g.add(merged[k], up)?;
        cur = drdb_forward(g, p, &format!("drdb{k}"), x)?;
    }
    let z = g.add(cur, pyramids[r].features[0])?;
    let residual = conv3(g, p, "head", z)?;
    let y = g.add(frames[r].hdr, residual)?;
    Ok(g.clamp01(y))
}
