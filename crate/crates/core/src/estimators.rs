//! Backward-pass gradient rules for stochastic binary layers.
//!
//! Three rules propagate a loss gradient through the sampling
//! non-differentiability of a hidden layer:
//!
//! * **TP** (true probability) — differentiate the exact activation
//!   probability at the known pre-activation; the idealized reference.
//! * **EG** (empirical gradient) — evaluate the derivative through its
//!   autonomous form `g(p)` with the sampled activation substituted for the
//!   unknown probability. Requires `p'` to be a function of `p` alone,
//!   which holds for the sigmoid (`g(p) = p(1-p)`) but not for even
//!   activation curves.
//! * **ST** (straight-through) — replace the sampling Jacobian with the
//!   identity and pass the upstream gradient unchanged.
//!
//! The output layer has its own rules for the softmax/cross-entropy head
//! (exact `p - y`, empirical-Jacobian, and straight-through `p̂ - y` forms)
//! plus the linear head trained with mean squared error.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{EmpiricalActivation, NeuronModel};

/// Backward rule for a stochastic layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientRule {
    Tp,
    Eg,
    St,
}

impl GradientRule {
    pub fn name(&self) -> &'static str {
        match self {
            GradientRule::Tp => "tp",
            GradientRule::Eg => "eg",
            GradientRule::St => "st",
        }
    }
}

/// Output-layer design: softmax activations with cross-entropy loss, or
/// unnormalized linear activations with mean squared error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    SoftmaxCe,
    LinearMse,
}

impl OutputHead {
    pub fn name(&self) -> &'static str {
        match self {
            OutputHead::SoftmaxCe => "softmax_ce",
            OutputHead::LinearMse => "linear_mse",
        }
    }
}

pub const DEFAULT_SMOOTHING_EPSILON: f64 = 1e-12;

fn default_epsilon() -> f64 {
    DEFAULT_SMOOTHING_EPSILON
}

/// Per-layer backward rules, output head, and the smoothing factor that
/// keeps sampled cross-entropy finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub hidden_rule: GradientRule,
    pub output_rule: GradientRule,
    pub output_head: OutputHead,
    #[serde(default = "default_epsilon")]
    pub smoothing_epsilon: f64,
}

impl EstimatorConfig {
    pub fn new(hidden_rule: GradientRule, output_rule: GradientRule, output_head: OutputHead) -> Self {
        Self { hidden_rule, output_rule, output_head, smoothing_epsilon: DEFAULT_SMOOTHING_EPSILON }
    }

    /// Reject combinations with no defined backward rule.
    ///
    /// The EG hidden rule needs an autonomous derivative, which of the
    /// bundled models only the transistor neuron has; requesting it for the
    /// photonic models is a configuration error, not a silent fallback.
    pub fn validate(&self, model: &NeuronModel) -> Result<()> {
        if !(0.0 < self.smoothing_epsilon && self.smoothing_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "smoothing epsilon {} must lie in (0, 1)",
                self.smoothing_epsilon
            )));
        }
        if self.hidden_rule == GradientRule::Eg && *model != NeuronModel::Set {
            return Err(Error::Config(format!(
                "EG hidden rule requires the SET neuron (got {})",
                model.name()
            )));
        }
        if self.output_rule == GradientRule::Eg && self.output_head != OutputHead::SoftmaxCe {
            return Err(Error::Config(
                "EG output rule requires the softmax cross-entropy head".into(),
            ));
        }
        if self.output_head == OutputHead::LinearMse && self.output_rule != GradientRule::Tp {
            return Err(Error::Config(
                "the linear MSE head defines only the exact gradient; use the TP output rule".into(),
            ));
        }
        Ok(())
    }
}

fn check_same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: lengths {a} and {b} differ")))
    }
}

/// TP rule: `dL/dz_i = p'(z_i) * upstream_i`.
pub fn hidden_backward_tp(
    model: &NeuronModel,
    z: ArrayView1<f64>,
    upstream: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_same_len(z.len(), upstream.len(), "hidden TP backward")?;
    let mut out = Array1::zeros(z.len());
    for (i, (&zi, &ui)) in z.iter().zip(upstream.iter()).enumerate() {
        out[i] = model.probability_derivative(zi)? * ui;
    }
    Ok(out)
}

/// Autonomous sigmoid derivative evaluated at a sample mean.
pub(crate) fn eg_factor(mean: f64) -> f64 {
    mean * (1.0 - mean)
}

/// EG rule for sigmoid-like neurons: `dL/dz_i = ĥ_i (1 - ĥ_i) * upstream_i`.
///
/// Single-trial sample means are 0 or 1, so the factor — and the gradient —
/// vanishes identically at `K = 1`.
pub fn hidden_backward_eg(
    hhat: &[EmpiricalActivation],
    upstream: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_same_len(hhat.len(), upstream.len(), "hidden EG backward")?;
    let mut out = Array1::zeros(hhat.len());
    for (i, (h, &ui)) in hhat.iter().zip(upstream.iter()).enumerate() {
        if !(0.0..=1.0).contains(&h.mean) {
            return Err(Error::Domain(format!(
                "empirical activation {} outside [0, 1]",
                h.mean
            )));
        }
        out[i] = eg_factor(h.mean) * ui;
    }
    Ok(out)
}

/// ST rule with the identity surrogate: the upstream gradient passes
/// through unchanged.
pub fn hidden_backward_st(upstream: ArrayView1<f64>) -> Array1<f64> {
    upstream.to_owned()
}

/// Mix a probability vector with the uniform distribution:
/// `(1 - eps) * p + eps / C`. Keeps every entry strictly positive so
/// `log` stays finite, while moving the vector by at most `eps`.
pub fn smooth_probs(phat: ArrayView1<f64>, epsilon: f64) -> Result<Array1<f64>> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon {epsilon} must lie in (0, 1)")));
    }
    if phat.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Domain("probability vector has entries outside [0, 1]".into()));
    }
    let sum: f64 = phat.sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("probability vector sums to {sum}, not 1")));
    }
    let c = phat.len() as f64;
    Ok(phat.mapv(|p| (1.0 - epsilon) * p + epsilon / c))
}

/// Exact softmax/cross-entropy gradient: `dL/dz = p - y`.
pub fn output_backward_softmax_tp(
    p: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_same_len(p.len(), y.len(), "softmax TP backward")?;
    Ok(&p - &y)
}

/// Softmax Jacobian evaluated at an empirical distribution:
/// `diag(p̂) - p̂ p̂ᵀ`. Exactly zero when `p̂` is one-hot.
pub fn empirical_softmax_jacobian(phat: ArrayView1<f64>) -> Array2<f64> {
    let n = phat.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let diag = if i == j { phat[i] } else { 0.0 };
        diag - phat[i] * phat[j]
    })
}

/// EG rule at the softmax output: push `dL/dp̂ = -y ⊘ p̂ˢ` through the
/// empirical Jacobian at the smoothed distribution.
///
/// For one-hot targets the product collapses algebraically to `p̂ˢ - y`;
/// the explicit product is computed anyway and cross-checked against that
/// form to within `1e-12`, so a regression in either route is caught.
pub fn output_backward_softmax_eg(
    phat_smoothed: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_same_len(phat_smoothed.len(), y.len(), "softmax EG backward")?;
    if phat_smoothed.iter().any(|&p| p <= 0.0) {
        return Err(Error::Domain(
            "degenerate Jacobian: zero entry in empirical distribution; smooth it first".into(),
        ));
    }
    let grad_p = Array1::from_iter(
        phat_smoothed.iter().zip(y.iter()).map(|(&p, &t)| -t / p),
    );
    let jacobian = empirical_softmax_jacobian(phat_smoothed);
    let dz = jacobian.t().dot(&grad_p);

    let shortcut = &phat_smoothed - &y;
    let max_dev = dz
        .iter()
        .zip(shortcut.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if max_dev >= 1e-12 {
        return Err(Error::Inconsistency(format!(
            "Jacobian product deviates from p̂ˢ - y by {max_dev}"
        )));
    }
    Ok(dz)
}

/// ST rule at the softmax output: `dL/dz = p̂ - y` with the raw sampled
/// distribution.
pub fn output_backward_softmax_st(
    phat: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_same_len(phat.len(), y.len(), "softmax ST backward")?;
    Ok(&phat - &y)
}

/// Gradient of the dimension-averaged squared error at a linear output:
/// `dL/dz = (2 / n_out) * (h - y)`.
pub fn output_backward_linear_mse(
    h: ArrayView1<f64>,
    y: ArrayView1<f64>,
    n_out: usize,
) -> Result<Array1<f64>> {
    check_same_len(h.len(), y.len(), "linear MSE backward")?;
    check_same_len(h.len(), n_out, "linear MSE backward (n_out)")?;
    let scale = 2.0 / n_out as f64;
    Ok((&h - &y).mapv(|d| scale * d))
}

/// Does `p'` factor through `p` on this grid? True iff every pair of grid
/// points with (numerically) equal probabilities also has equal
/// derivatives. A strictly monotone probability passes vacuously; an even
/// one with odd derivative fails at mirrored points.
pub fn check_autonomous_representation(model: &NeuronModel, grid: &[f64]) -> Result<bool> {
    let probs: Vec<f64> = grid
        .iter()
        .map(|&z| model.activation_probability(z))
        .collect::<Result<_>>()?;
    let derivs: Vec<f64> = grid
        .iter()
        .map(|&z| model.probability_derivative(z))
        .collect::<Result<_>>()?;
    Ok(autonomous_on_grid(&probs, &derivs, grid.len()))
}

fn autonomous_on_grid(probs: &[f64], derivs: &[f64], n: usize) -> bool {
    if n < 2 {
        return true;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (probs[i] - probs[j]).abs() < 1e-9 && (derivs[i] - derivs[j]).abs() >= 1e-6 {
                return false;
            }
        }
    }
    true
}
