use jointhdr_autograd::{ConvGeom, Graph, Scalar, Var};

use super::{Bound, Init, ModelError, ParamSpec};

pub(crate) const LRELU_SLOPE: f64 = 0.2;

/// Weight `[cout, cin, k, k]` and bias `[cout]` of a convolution.
pub(crate) fn conv_specs(name: &str, cin: usize, cout: usize, k: usize, init: Init) -> [ParamSpec; 2] {
    let init = match init {
        Init::He { .. } => Init::He { fan_in: cin * k * k },
        Init::Zeros => Init::Zeros,
    };
    [
        ParamSpec { name: format!("{name}.weight"), shape: vec![cout, cin, k, k], init },
        ParamSpec { name: format!("{name}.bias"), shape: vec![cout], init: Init::Zeros },
    ]
}

pub(crate) fn he() -> Init {
    Init::He { fan_in: 1 }
}

pub(crate) fn linear_specs(name: &str, fin: usize, fout: usize) -> [ParamSpec; 2] {
    [
        ParamSpec { name: format!("{name}.weight"), shape: vec![fout, fin], init: Init::He { fan_in: fin } },
        ParamSpec { name: format!("{name}.bias"), shape: vec![fout], init: Init::Zeros },
    ]
}

pub(crate) fn conv<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    name: &str,
    x: Var,
    geom: ConvGeom,
) -> Result<Var, ModelError> {
    let w = p.var(&format!("{name}.weight"))?;
    let b = p.var(&format!("{name}.bias"))?;
    g.conv2d(x, w, Some(b), geom).map_err(|e| ModelError::Shape(format!("{name}: {e}")))
}

pub(crate) fn conv3<T: Scalar>(g: &mut Graph<T>, p: &Bound, name: &str, x: Var) -> Result<Var, ModelError> {
    conv(g, p, name, x, ConvGeom::same(3, 1))
}

pub(crate) fn conv3_lrelu<T: Scalar>(g: &mut Graph<T>, p: &Bound, name: &str, x: Var) -> Result<Var, ModelError> {
    let y = conv3(g, p, name, x)?;
    Ok(g.leaky_relu(y, T::from_f64(LRELU_SLOPE)))
}

pub(crate) fn linear<T: Scalar>(g: &mut Graph<T>, p: &Bound, name: &str, x: Var) -> Result<Var, ModelError> {
    let w = p.var(&format!("{name}.weight"))?;
    let b = p.var(&format!("{name}.bias"))?;
    g.linear(x, w, Some(b)).map_err(|e| ModelError::Shape(format!("{name}: {e}")))
}

/// Checks `[n, c, h, w]` with spatial sides divisible by `2^(levels-1)`.
pub(crate) fn check_input<T: Scalar>(
    g: &Graph<T>,
    x: Var,
    what: &str,
    channels: usize,
    levels: usize,
) -> Result<(usize, usize, usize), ModelError> {
    let s = g.shape(x);
    if s.len() != 4 || s[1] != channels {
        return Err(ModelError::Shape(format!("{what}: expected [n, {channels}, h, w], got {s:?}")));
    }
    let div = 1usize << (levels - 1);
    for (k, side) in [(2, "height"), (3, "width")] {
        if s[k] % div != 0 {
            let level = (0..levels).find(|&l| (s[k] >> l) % 2 != 0).unwrap_or(0) + 1;
            return Err(ModelError::Shape(format!(
                "{what}: {side} {} not divisible by {div}; level {level} cannot be halved",
                s[k]
            )));
        }
    }
    Ok((s[0], s[2], s[3]))
}
