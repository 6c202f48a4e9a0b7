//! Central finite-difference verification of parameter gradients.

use std::collections::BTreeMap;

use jointhdr_autograd::{Graph, Tensor, Var};

use super::{Bound, ModelError, ModelWeights};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub passed: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn pass_rate(&self) -> f64 {
        self.passed as f64 / self.checked.max(1) as f64
    }
}

/// Compares analytic gradients of `loss` with central differences of step
/// `h` for every parameter element, in double precision. An element passes
/// when its relative error is at most `rel_tol` (or both values are below
/// `1e-9` in magnitude). When `prefixes` is non-empty only parameters whose
/// names start with one of them are checked.
pub fn check_gradients<F>(
    weights: &ModelWeights,
    prefixes: &[&str],
    h: f64,
    rel_tol: f64,
    loss: F,
) -> Result<GradCheckReport, ModelError>
where
    F: Fn(&mut Graph<f64>, &Bound) -> Result<Var, ModelError>,
{
    let mut params: BTreeMap<String, Tensor<f64>> = weights.cast_params();
    let eval = |params: &BTreeMap<String, Tensor<f64>>| -> Result<f64, ModelError> {
        let mut g = Graph::new();
        let b = Bound::from_tensors(&mut g, params, false);
        let l = loss(&mut g, &b)?;
        Ok(g.value(l).item())
    };

    let mut g = Graph::new();
    let bound = Bound::from_tensors(&mut g, &params, true);
    let l = loss(&mut g, &bound)?;
    let grads = g.backward(l)?;
    let analytic: Vec<(String, Vec<f64>)> = bound
        .iter()
        .map(|(name, &v)| {
            let n = params[name].numel();
            (name.clone(), grads.get(v).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; n]))
        })
        .collect();
    drop(g);

    let mut report = GradCheckReport { checked: 0, passed: 0, max_rel_error: 0.0 };
    let selected = |name: &str| prefixes.is_empty() || prefixes.iter().any(|p| name.starts_with(p));
    for (name, an) in analytic.into_iter().filter(|(n, _)| selected(n)) {
        for (i, &a) in an.iter().enumerate() {
            let orig = params[&name].data()[i];
            params.get_mut(&name).expect("param").data_mut()[i] = orig + h;
            let up = eval(&params)?;
            params.get_mut(&name).expect("param").data_mut()[i] = orig - h;
            let down = eval(&params)?;
            params.get_mut(&name).expect("param").data_mut()[i] = orig;
            let num = (up - down) / (2.0 * h);
            let scale = a.abs().max(num.abs());
            let rel = if scale < 1e-9 { 0.0 } else { (a - num).abs() / scale };
            report.checked += 1;
            if rel <= rel_tol {
                report.passed += 1;
            }
            report.max_rel_error = report.max_rel_error.max(rel);
        }
    }
    Ok(report)
}
