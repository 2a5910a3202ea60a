//! Central finite-difference gradient checking.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Largest relative disagreement between autodiff and central differences.
///
/// `f` rebuilds the scalar objective from parameter handles on a fresh tape.
/// For every entry the error is `|g_ad − g_fd| / max(|g_ad|, |g_fd|, 1e-8)`.
pub fn grad_check<F>(params: &[Tensor], eps: f64, f: F) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if eps <= 0.0 {
        return Err(Error::Precondition(format!(
            "grad_check eps must be positive, got {eps}"
        )));
    }
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<_> = params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&tape, &vars)?;
        check_finite(loss.item()?)?;
        let grads = tape.backward(loss)?;
        vars.iter().map(|&v| grads.wrt(v)).collect()
    };

    let eval = |ps: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<_> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        check_finite(f(&tape, &vars)?.item()?)
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut worst: f64 = 0.0;
    for (pi, g_ad) in analytic.iter().enumerate() {
        for k in 0..params[pi].len() {
            let orig = params[pi].as_slice()[k];
            work[pi].as_mut_slice()[k] = orig + eps;
            let up = eval(&work)?;
            work[pi].as_mut_slice()[k] = orig - eps;
            let down = eval(&work)?;
            work[pi].as_mut_slice()[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            let ad = g_ad.as_slice()[k];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("objective evaluated to {v}")))
    }
}
