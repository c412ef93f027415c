//! Convex losses whose subgradient is recoverable from accept/reject feedback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|w − w*|`; an offer `w ≥ w*` is accepted and yields gradient `+1`.
pub fn absolute_loss_and_grad(w: f64, target: f64) -> (f64, f64) {
    let grad = if w >= target { 1.0 } else { -1.0 };
    ((w - target).abs(), grad)
}

/// `max(0, |w − c*| − ε)` with subgradient 0 inside the band.
pub fn eps_insensitive_loss_and_grad(w: f64, center: f64, eps: f64) -> (f64, f64) {
    let dev = w - center;
    if dev.abs() <= eps {
        (0.0, 0.0)
    } else {
        (dev.abs() - eps, dev.signum())
    }
}

/// Surrogate loss for a posted price `p` against private cost `c`:
/// overpayment `p − c` on accept, `(u/Δ)(c − p)` on reject.
pub fn posted_price_loss_and_grad(p: f64, c: f64, utility: f64, delta: f64) -> (f64, f64) {
    if p >= c {
        (p - c, 1.0)
    } else {
        let slope = utility / delta;
        (slope * (c - p), -slope)
    }
}

/// Marketplace reward: `u − p` when the offer is accepted, else 0.
pub fn marketplace_reward(p: f64, c: f64, utility: f64) -> f64 {
    if p >= c {
        utility - p
    } else {
        0.0
    }
}

/// Loss family applied coordinate-wise against a per-instance target
/// (the competitor weight, the band centre, or the user's private cost).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossModel {
    Absolute,
    EpsilonInsensitive { epsilon: f64 },
    PostedPrice { utility: f64, delta: f64 },
}

impl LossModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossModel::Absolute => Ok(()),
            LossModel::EpsilonInsensitive { epsilon } if epsilon > 0.0 => Ok(()),
            LossModel::EpsilonInsensitive { epsilon } => {
                Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")))
            }
            LossModel::PostedPrice { utility, delta } if utility > 0.0 && delta > 0.0 => Ok(()),
            LossModel::PostedPrice { utility, delta } => Err(Error::InvalidConfig(format!(
                "posted-price utility and delta must be positive, got u={utility}, delta={delta}"
            ))),
        }
    }

    /// Bound on the magnitude of each subgradient coordinate.
    pub fn coordinate_gradient_bound(&self) -> f64 {
        match *self {
            LossModel::Absolute | LossModel::EpsilonInsensitive { .. } => 1.0,
            LossModel::PostedPrice { utility, delta } => (utility / delta).max(1.0),
        }
    }

    /// `‖G‖` for weight vectors of dimension `d`.
    pub fn gradient_bound(&self, d: usize) -> f64 {
        self.coordinate_gradient_bound() * (d as f64).sqrt()
    }

    pub fn scalar(&self, w: f64, target: f64) -> (f64, f64) {
        match *self {
            LossModel::Absolute => absolute_loss_and_grad(w, target),
            LossModel::EpsilonInsensitive { epsilon } => eps_insensitive_loss_and_grad(w, target, epsilon),
            LossModel::PostedPrice { utility, delta } => posted_price_loss_and_grad(w, target, utility, delta),
        }
    }

    /// Summed loss and the subgradient vector at `w`.
    pub fn evaluate(&self, w: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(w.len(), target.len());
        let mut loss = 0.0;
        let grad = w
            .iter()
            .zip(target)
            .map(|(&x, &c)| {
                let (l, g) = self.scalar(x, c);
                loss += l;
                g
            })
            .collect();
        (loss, grad)
    }

    pub fn loss(&self, w: &[f64], target: &[f64]) -> f64 {
        w.iter().zip(target).map(|(&x, &c)| self.scalar(x, c).0).sum()
    }
}
