//! Closed-form regret bounds.

use serde::Serialize;

/// Single learner running OCP for `t` steps: `(3/2)√T·S·G`.
pub fn ocp_bound(t: usize, s_max: f64, g_max: f64) -> f64 {
    1.5 * (t as f64).sqrt() * s_max * g_max
}

/// `K` independent learners over `T` total steps: `(3/2)√(TK)·S·G`.
pub fn iol_bound(t: usize, k: usize, s_max: f64, g_max: f64) -> f64 {
    1.5 * ((t * k) as f64).sqrt() * s_max * g_max
}

/// The four terms of the CoOL regret bound for a realised schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoolBoundTerms {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    /// Number of steps `t` with `ξ^t = 1` and `ξ^{t−1} = 0`.
    pub onsets: usize,
}

impl CoolBoundTerms {
    pub fn total(&self) -> f64 {
        self.r1 + self.r2 + self.r3 + self.r4
    }
}

/// CoOL bound for the schedule actually used. `xi[t−1]` and `delta[t−1]`
/// are `ξ^t` and `δ^t`; `ξ⁰` counts as 0, so a coordination at `t = 1` is
/// an onset. `delta` is read only where `xi` is set.
pub fn cool_regret_bound(
    k: usize,
    s_max: f64,
    g_max: f64,
    eta: f64,
    xi: &[bool],
    delta: &[f64],
) -> CoolBoundTerms {
    assert_eq!(xi.len(), delta.len(), "schedule sequences differ in length");
    let t_total = xi.len();
    let kf = k as f64;
    let root_tk = ((t_total * k) as f64).sqrt();
    let r1 = s_max * s_max * root_tk / (2.0 * eta) + 2.0 * eta * g_max * g_max * root_tk;
    let mut onsets = 0;
    let mut prev = false;
    let mut r3_sum = 0.0;
    for (i, (&x, &d)) in xi.iter().zip(delta).enumerate() {
        if x {
            if !prev {
                onsets += 1;
            }
            let t = (i + 1) as f64;
            r3_sum += d + (2.0 * d).sqrt() * (t * kf).powf(0.25) * s_max;
        }
        prev = x;
    }
    CoolBoundTerms {
        r1,
        r2: onsets as f64 * s_max * g_max,
        r3: r3_sum / eta,
        r4: s_max * s_max / (2.0 * eta) - 2.0 * eta * g_max * g_max * kf,
        onsets,
    }
}

/// Expected CoOL regret under `ξ^t ~ Bernoulli(c_α/√T)` and the corollary
/// gap rule, with `η = S/(2G)`.
pub fn corollary_expected_bound(
    t: usize,
    k: usize,
    s_max: f64,
    g_max: f64,
    c_alpha: f64,
    c_beta: f64,
    beta: f64,
) -> f64 {
    let tf = t as f64;
    let kf = k as f64;
    2.0 * (tf * kf).sqrt()
        * s_max
        * g_max
        * (1.0
            + c_alpha / (2.0 * kf.sqrt()) * (1.0 - c_alpha / tf.sqrt())
            + c_alpha * (c_beta + (2.0 * c_beta).sqrt()) * (1.0 - beta))
}

/// Exact coordination at every step with `η = S/(2G)`: `2√(TK)·S·G`.
pub fn exact_cool_bound(t: usize, k: usize, s_max: f64, g_max: f64) -> f64 {
    2.0 * ((t * k) as f64).sqrt() * s_max * g_max
}

/// Exact coordination at every step with `η = S/G`: `(3/2)√(TK)·S·G`.
pub fn exact_cool_bound_tight(t: usize, k: usize, s_max: f64, g_max: f64) -> f64 {
    iol_bound(t, k, s_max, g_max)
}

/// Smallest batch length `B ≥ ⌈(S/ε + ½)²⌉` for the batch theorem.
pub fn required_batch(s_max: f64, eps: f64) -> usize {
    let b = (s_max / eps + 0.5).powi(2);
    // Guard against representation error just above an integer.
    let r = b.round();
    if (b - r).abs() < 1e-9 {
        r as usize
    } else {
        b.ceil() as usize
    }
}

/// CoOL regret in the batch setting: `(3/2)√B·S·G`.
pub fn batch_bound(b: usize, s_max: f64, g_max: f64) -> f64 {
    1.5 * (b as f64).sqrt() * s_max * g_max
}
