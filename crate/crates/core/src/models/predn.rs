use jointhdr_autograd::{Graph, Scalar, Var};
use serde::{Deserialize, Serialize};

use super::layers::{check_input, conv3, conv3_lrelu, conv_specs, he};
use super::{Init, ModelError, ParamSpec};

/// U-Net denoiser working on tone-mapped frames with an ISO plane.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreDnConfig {
    pub preset: String,
    /// Channels at full resolution; doubles per level.
    pub base: usize,
    pub depth: usize,
}

impl PreDnConfig {
    pub fn toy() -> Self {
        Self { preset: "toy".into(), base: 8, depth: 3 }
    }

    pub fn default_size() -> Self {
        Self { preset: "default".into(), base: 32, depth: 3 }
    }

    fn width(&self, level: usize) -> usize {
        self.base << level
    }

    pub(crate) fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        let mut cin = 4;
        for l in 0..self.depth {
            let c = self.width(l);
            specs.extend(conv_specs(&format!("enc{l}.0"), cin, c, 3, he()));
            specs.extend(conv_specs(&format!("enc{l}.1"), c, c, 3, he()));
            cin = c;
        }
        for l in (0..self.depth - 1).rev() {
            let c = self.width(l);
            specs.extend(conv_specs(&format!("dec{l}.0"), self.width(l + 1) + c, c, 3, he()));
            specs.extend(conv_specs(&format!("dec{l}.1"), c, c, 3, he()));
        }
        // zero head: an untrained denoiser is the identity
        specs.extend(conv_specs("head", self.base, 3, 3, Init::Zeros));
        specs
    }
}

/// Denoises `x` (`[n, 3, h, w]`, tone-mapped) conditioned on `iso`
/// (`[n, 1, h, w]`, constant `iso/3200`). Output is `clamp(x + head)`.
pub fn predn_forward<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &PreDnConfig,
    p: &super::Bound,
    x: Var,
    iso: Var,
) -> Result<Var, ModelError> {
    let (n, h, w) = check_input(g, x, "pre_dn input", 3, cfg.depth)?;
    if g.shape(iso) != [n, 1, h, w] {
        return Err(ModelError::Shape(format!("iso plane {:?} for input {:?}", g.shape(iso), g.shape(x))));
    }
    let mut cur = g.concat(&[x, iso])?;
    let mut skips = Vec::with_capacity(cfg.depth);
    for l in 0..cfg.depth {
        if l > 0 {
            cur = g.avg_pool2(cur)?;
        }
        cur = conv3_lrelu(g, p, &format!("enc{l}.0"), cur)?;
        cur = conv3_lrelu(g, p, &format!("enc{l}.1"), cur)?;
        skips.push(cur);
    }
    for l in (0..cfg.depth - 1).rev() {
        let up = g.upsample2(cur)?;
        let cat = g.concat(&[up, skips[l]])?;
        cur = conv3_lrelu(g, p, &format!("dec{l}.0"), cat)?;
        cur = conv3_lrelu(g, p, &format!("dec{l}.1"), cur)?;
    }
    let r = conv3(g, p, "head", cur)?;
    let y = g.add(x, r)?;
    Ok(g.clamp01(y))
}
