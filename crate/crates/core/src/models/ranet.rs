use jointhdr_autograd::{ConvGeom, Graph, Scalar, Var};
use serde::{Deserialize, Serialize};

use super::layers::{conv, conv_specs, he, linear, linear_specs, LRELU_SLOPE};
use super::{Bound, ModelError, ParamSpec};

/// Spatial side the selector expects.
pub const RANET_INPUT: usize = 224;

/// Number of scalar priors appended to the pooled features.
pub const PRIOR_FEATURES: usize = 5;

/// Reference selector: stride-2 conv stages, global pooling, two dense layers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaNetConfig {
    pub preset: String,
    pub widths: Vec<usize>,
    pub hidden: usize,
}

impl RaNetConfig {
    pub fn toy() -> Self {
        Self { preset: "toy".into(), widths: vec![8, 16, 16, 32, 32], hidden: 32 }
    }

    pub fn default_size() -> Self {
        Self { preset: "default".into(), widths: vec![16, 32, 64, 128, 128], hidden: 64 }
    }

    pub(crate) fn param_specs(&self) -> Vec<ParamSpec> {
        let mut s = Vec::new();
        let mut cin = 9;
        for (i, &c) in self.widths.iter().enumerate() {
            s.extend(conv_specs(&format!("conv{i}"), cin, c, 3, he()));
            cin = c;
        }
        s.extend(linear_specs("fc0", cin + PRIOR_FEATURES, self.hidden));
        s.extend(linear_specs("fc1", self.hidden, 3));
        s
    }
}

/// `x`: `[n, 9, 224, 224]` (three tone-mapped frames), `priors`: `[n, 5]`.
/// Returns logits `[n, 3]`.
pub fn ranet_forward<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &RaNetConfig,
    p: &Bound,
    x: Var,
    priors: Var,
) -> Result<Var, ModelError> {
    let s = g.shape(x).to_vec();
    if s.len() != 4 || s[1] != 9 || s[2] != RANET_INPUT || s[3] != RANET_INPUT {
        return Err(ModelError::Shape(format!("selector expects [n, 9, {RANET_INPUT}, {RANET_INPUT}], got {s:?}")));
    }
    if g.shape(priors) != [s[0], PRIOR_FEATURES] {
        return Err(ModelError::Shape(format!("priors {:?} for batch {}", g.shape(priors), s[0])));
    }
    let slope = T::from_f64(LRELU_SLOPE);
    let mut cur = x;
    for i in 0..cfg.widths.len() {
        let y = conv(g, p, &format!("conv{i}"), cur, ConvGeom::strided(3, 2))?;
        cur = g.leaky_relu(y, slope);
    }
    let pooled = g.global_avg_pool(cur)?;
    let feat = g.concat(&[pooled, priors])?;
    let h = linear(g, p, "fc0", feat)?;
    let h = g.leaky_relu(h, slope);
    linear(g, p, "fc1", h)
}
