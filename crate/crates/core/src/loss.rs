//! Tone-mapped-domain training losses: ℓ1 reconstruction plus a Sobel
//! gradient term, blended by λ.

use jointhdr_autograd::{Graph, GraphError, Scalar, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::image::Image;

/// Default blend between reconstruction and Sobel terms.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("lambda {0} outside [0, 1]")]
    Lambda(f64),
}

impl From<GraphError> for LossError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Shape(s) => LossError::Shape(s),
        }
    }
}

/// Components of the blended loss; `total = (1−λ)·recon + λ·sobel`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub recon: f64,
    pub sobel: f64,
    pub lambda: f64,
}

impl LossValue {
    pub fn blend(recon: f64, sobel: f64, lambda: f64) -> Result<Self, LossError> {
        check_lambda(lambda)?;
        Ok(Self { total: (1.0 - lambda) * recon + lambda * sobel, recon, sobel, lambda })
    }
}

/// Graph handles of the loss terms.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub total: Var,
    pub recon: Var,
    pub sobel_x: Var,
    pub sobel_y: Var,
}

impl LossVars {
    pub fn value<T: Scalar>(&self, g: &Graph<T>, lambda: f64) -> LossValue {
        let item = |v: Var| g.value(v).item().as_f64();
        LossValue {
            total: item(self.total),
            recon: item(self.recon),
            sobel: item(self.sobel_x) + item(self.sobel_y),
            lambda,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<(), LossError> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(LossError::Lambda(lambda))
    }
}

/// Records the blended loss between `pred` and `target` on `g`.
pub fn total_loss_graph<T: Scalar>(g: &mut Graph<T>, pred: Var, target: Var, lambda: f64) -> Result<LossVars, LossError> {
    check_lambda(lambda)?;
    let recon = g.mean_abs_diff(pred, target)?;
    let mut sobel = [recon; 2];
    for (s, horizontal) in sobel.iter_mut().zip([true, false]) {
        let gp = g.sobel(pred, horizontal)?;
        let gt = g.sobel(target, horizontal)?;
        *s = g.mean_abs_diff(gp, gt)?;
    }
    let l = T::from_f64(lambda);
    let total = g.weighted_sum(&[(recon, T::one() - l), (sobel[0], l), (sobel[1], l)])?;
    Ok(LossVars { total, recon, sobel_x: sobel[0], sobel_y: sobel[1] })
}

fn tensor(img: &Image) -> Tensor<f64> {
    let data = img.data().iter().map(|&v| v as f64).collect();
    Tensor::new(&[1, img.channels(), img.height(), img.width()], data).expect("image dims")
}

fn same_dims(a: &Image, b: &Image) -> Result<(), LossError> {
    if a.dims() != b.dims() {
        return Err(LossError::Shape(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn recon_loss(pred: &Image, target: &Image) -> Result<f64, LossError> {
    same_dims(pred, target)?;
    let s: f64 = pred.data().iter().zip(target.data()).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum();
    Ok(s / pred.data().len().max(1) as f64)
}

/// `mean|∇x p − ∇x t| + mean|∇y p − ∇y t|` with unnormalized 3×3 Sobel
/// kernels and replicate padding.
pub fn sobel_loss(pred: &Image, target: &Image) -> Result<f64, LossError> {
    same_dims(pred, target)?;
    let mut g = Graph::<f64>::new();
    let (p, t) = (g.input(tensor(pred)), g.input(tensor(target)));
    let mut total = 0.0;
    for horizontal in [true, false] {
        let gp = g.sobel(p, horizontal)?;
        let gt = g.sobel(t, horizontal)?;
        let d = g.mean_abs_diff(gp, gt)?;
        total += g.value(d).item();
    }
    Ok(total)
}

pub fn total_loss(pred: &Image, target: &Image, lambda: f64) -> Result<LossValue, LossError> {
    check_lambda(lambda)?;
    LossValue::blend(recon_loss(pred, target)?, sobel_loss(pred, target)?, lambda)
}
