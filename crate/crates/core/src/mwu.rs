//! Exponential-weights policy update shared by both learners.

use ndarray::{Array3, Zip};

use crate::error::{Error, Result};
use crate::mdp::Policy;

/// `π'(a|s) ∝ π(a|s) · exp(-η (Û(s,a) - B(s,a)))`, row by row.
///
/// The row maximum of the exponent is subtracted before exponentiating.
pub fn policy_improve(
    policy: &Policy,
    u_hat: &Array3<f64>,
    bonus: &Array3<f64>,
    eta: f64,
) -> Result<Policy> {
    let probs = policy.probs();
    if u_hat.shape() != probs.shape() || bonus.shape() != probs.shape() {
        return Err(Error::Dimension(format!(
            "policy {:?}, estimate {:?}, bonus {:?}",
            probs.shape(),
            u_hat.shape(),
            bonus.shape()
        )));
    }
    if !eta.is_finite() {
        return Err(Error::NonFinite("learning rate".into()));
    }
    let mut exponent = Array3::zeros(probs.raw_dim());
    Zip::from(&mut exponent)
        .and(u_hat)
        .and(bonus)
        .for_each(|e, &u, &b| *e = -eta * (u - b));
    if exponent.iter().any(|e: &f64| !e.is_finite()) {
        return Err(Error::NonFinite("policy update exponent".into()));
    }
    let mut next = probs.clone();
    for (mut row, exp_row) in next
        .lanes_mut(ndarray::Axis(2))
        .into_iter()
        .zip(exponent.lanes(ndarray::Axis(2)))
    {
        let max = exp_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Zip::from(&mut row)
            .and(&exp_row)
            .for_each(|p, &e| *p *= (e - max).exp());
        let total = row.sum();
        row.mapv_inplace(|p| p / total);
    }
    Ok(Policy::from_array_unchecked(next))
}

/// `max |η (Û - B)|` over all cells.
pub fn max_exponent(u_hat: &Array3<f64>, bonus: &Array3<f64>, eta: f64) -> f64 {
    Zip::from(u_hat)
        .and(bonus)
        .fold(0.0f64, |acc, &u, &b| acc.max((eta * (u - b)).abs()))
}
