//! Physical stochastic neuron models.
//!
//! A neuron here is a binary activation switch: given a pre-activation `z`
//! it fires (`1`) with probability `p(z)` and stays silent (`0`) otherwise.
//! Three hardware families are modeled:
//!
//! * [`NeuronModel::Spd`] — a click detector under coherent illumination.
//!   The mean photon number in a measurement window is `|z|^2`, so the
//!   click probability is `1 - exp(-z^2)`.
//! * [`NeuronModel::Set`] — a single-electron transistor. The steady-state
//!   occupation of the dot level is the logistic sigmoid of the level
//!   position in thermal units, so `p(z) = sigmoid(z)`.
//! * [`NeuronModel::Tsp`] — a single photon scattered into a second bosonic
//!   mode through a tunable beam-splitter coupling; `p(z)` is the closed-form
//!   occupation of the undriven mode after an evolution time `t`, with the
//!   coupling strength set to `z`.

use num_complex::Complex64;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the single-photon transfer neuron: evolution time `t`,
/// mechanical decay `gamma`, cavity decay `kappa`, and the temporal decay
/// rate `zeta` of the incoming photon envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TspParams {
    pub t: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub zeta: f64,
}

impl TspParams {
    pub fn new(t: f64, gamma: f64, kappa: f64, zeta: f64) -> Result<Self> {
        let p = Self { t, gamma, kappa, zeta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t.is_finite()
            && self.gamma.is_finite()
            && self.kappa.is_finite()
            && self.zeta.is_finite()
            && self.t > 0.0
            && self.kappa > 0.0
            && self.zeta > 0.0
            && self.gamma >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid TSP parameters: {self:?}")))
        }
    }

    /// Reference operating point used throughout the bundled experiments and
    /// validation suite.
    pub fn reference() -> Self {
        Self { t: 0.21, gamma: 0.02, kappa: 30.0, zeta: 10.7 }
    }

    /// `u = gamma + kappa - 2 zeta`.
    pub(crate) fn rate_sum(&self) -> f64 {
        self.gamma + self.kappa - 2.0 * self.zeta
    }

    /// `Delta = sqrt((gamma - kappa)^2 - 16 alpha^2)`, promoted to the
    /// complex plane so the oscillatory regime (negative radicand) needs no
    /// case split.
    pub(crate) fn delta(&self, alpha: f64) -> Complex64 {
        Complex64::new(self.delta_squared(alpha), 0.0).sqrt()
    }

    fn delta_squared(&self, alpha: f64) -> f64 {
        let d = self.gamma - self.kappa;
        d * d - 16.0 * alpha * alpha
    }
}

/// The two readings of the sign in the second exponent of the closed-form
/// occupation. They disagree away from `z = 0`; the master-equation
/// integrator in [`crate::oracles`] singles out [`TspVariant::NegativeExponent`],
/// which is what [`tsp_probability`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TspVariant {
    NegativeExponent,
    PositiveExponent,
}

/// Variant selected by checking both against the numerical integrator.
pub const SELECTED_TSP_VARIANT: TspVariant = TspVariant::NegativeExponent;

/// A stochastic activation switch: the probability family plus (for TSP)
/// its physical parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronModel {
    Spd,
    Set,
    Tsp(TspParams),
}

impl NeuronModel {
    /// Short token used in CSV output and file names.
    pub fn name(&self) -> &'static str {
        match self {
            NeuronModel::Spd => "spd",
            NeuronModel::Set => "set",
            NeuronModel::Tsp(_) => "tsp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NeuronModel::Tsp(p) => p.validate(),
            _ => Ok(()),
        }
    }

    /// Activation probability `p(z)`.
    pub fn activation_probability(&self, z: f64) -> Result<f64> {
        match self {
            NeuronModel::Spd => spd_probability(z),
            NeuronModel::Set => set_probability(z),
            NeuronModel::Tsp(p) => tsp_probability(p, z),
        }
    }

    /// `dp/dz`. Analytic for SPD and SET; central finite difference with
    /// step `1e-4` for TSP, where the closed form is unwieldy.
    pub fn probability_derivative(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::Domain(format!("non-finite pre-activation {z}")));
        }
        match self {
            NeuronModel::Spd => Ok(2.0 * z * (-z * z).exp()),
            NeuronModel::Set => {
                let p = set_probability(z)?;
                Ok(p * (1.0 - p))
            }
            NeuronModel::Tsp(params) => {
                const STEP: f64 = 1e-4;
                let hi = tsp_probability(params, z + STEP)?;
                let lo = tsp_probability(params, z - STEP)?;
                Ok((hi - lo) / (2.0 * STEP))
            }
        }
    }

    /// Draw `trials` independent binary outcomes at pre-activation `z` and
    /// return their sample mean.
    pub fn sample_activation<R: Rng + ?Sized>(
        &self,
        z: f64,
        trials: u32,
        rng: &mut R,
    ) -> Result<EmpiricalActivation> {
        if trials == 0 {
            return Err(Error::Domain("trial count must be at least 1".into()));
        }
        let p = self.activation_probability(z)?;
        let mut count = 0u32;
        for _ in 0..trials {
            if rng.random::<f64>() < p {
                count += 1;
            }
        }
        Ok(EmpiricalActivation::from_count(count, trials))
    }
}

/// Sample mean of a finite number of binary trials. `mean * trials` is an
/// integer count by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalActivation {
    pub mean: f64,
    pub trials: u32,
}

impl EmpiricalActivation {
    pub fn from_count(count: u32, trials: u32) -> Self {
        debug_assert!(count <= trials);
        Self { mean: f64::from(count) / f64::from(trials), trials }
    }
}

/// Click probability of a photon counter seeing a coherent state with mean
/// photon number `z^2`: `1 - exp(-z^2)`.
pub fn spd_probability(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("non-finite pre-activation {z}")));
    }
    // -expm1(-z^2) keeps precision for small z.
    Ok(-(-z * z).exp_m1())
}

/// Steady-state occupation of the transistor dot level: `sigmoid(z)`.
///
/// Negative arguments are evaluated as `1 - sigmoid(-z)`, which both avoids
/// overflow of `exp(z)` and makes the antisymmetry `p(-z) = 1 - p(z)` hold
/// bit-exactly.
pub fn set_probability(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("non-finite pre-activation {z}")));
    }
    Ok(sigmoid(z))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z < 0.0 {
        1.0 - sigmoid(-z)
    } else {
        1.0 / (1.0 + (-z).exp())
    }
}

/// Occupation of the undriven mode for the selected formula variant.
pub fn tsp_probability(params: &TspParams, z: f64) -> Result<f64> {
    tsp_probability_variant(params, z, SELECTED_TSP_VARIANT)
}

/// `(1 - exp(a*x)) / x`, with the removable singularity at `x = 0` handled
/// by a short series.
fn one_minus_exp_over(x: Complex64, a: f64) -> Complex64 {
    if x.norm() < 1e-10 {
        let ax = a * x;
        -a * (1.0 + ax / 2.0 + ax * ax / 6.0)
    } else {
        (1.0 - (a * x).exp()) / x
    }
}

/// d/dx of `(1 - exp(a*x)) / x`, used for the `Delta -> 0` limit.
fn one_minus_exp_over_deriv(x: Complex64, a: f64) -> Complex64 {
    if x.norm() < 1e-8 {
        let a2 = a * a;
        -a2 / 2.0 - (a2 * a / 3.0) * x
    } else {
        let e = (a * x).exp();
        (-a * e * x - (1.0 - e)) / (x * x)
    }
}

/// Evaluate the closed-form occupation for an explicit sign variant.
///
/// The whole expression is computed in complex arithmetic; the bracket term
/// is odd in `Delta`, so `prefactor * bracket^2` is real up to rounding.
/// A nonzero imaginary residual or a value outside `[0, 1]` beyond `1e-9`
/// indicates a wrong formula (or variant) and is reported as an internal
/// consistency error rather than silently clamped.
pub fn tsp_probability_variant(
    params: &TspParams,
    z: f64,
    variant: TspVariant,
) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("non-finite pre-activation {z}")));
    }
    params.validate()?;
    let alpha = z;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let t = params.t;
    let u = params.rate_sum();
    let delta = params.delta(alpha);
    let second_sign = match variant {
        TspVariant::NegativeExponent => -t / 4.0,
        TspVariant::PositiveExponent => t / 4.0,
    };

    // scaled = bracket / Delta, so the 1/Delta^2 prefactor never divides by
    // a vanishing quantity. For the negative variant the bracket vanishes
    // linearly at Delta = 0 and the limit is 2 * d/dx[(1-e^{tx/4})/x] at -u.
    let scaled = if variant == TspVariant::NegativeExponent && delta.norm() < 1e-6 {
        2.0 * one_minus_exp_over_deriv(Complex64::new(-u, 0.0), t / 4.0)
    } else {
        let bracket = one_minus_exp_over(delta - u, t / 4.0)
            + one_minus_exp_over(delta + u, second_sign);
        bracket / delta
    };

    let prefactor = 64.0 * alpha * alpha * params.zeta * params.kappa;
    let value = prefactor * scaled * scaled * (-t * params.zeta).exp();

    if value.im.abs() >= 1e-9 {
        return Err(Error::Inconsistency(format!(
            "occupation has imaginary residual {} at z={z}",
            value.im
        )));
    }
    let p = value.re;
    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(Error::Inconsistency(format!(
            "occupation {p} outside [0,1] at z={z}"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, domain};

    #[test]
    fn spd_reference_points() {
        assert_eq!(spd_probability(0.0).unwrap(), 0.0);
        let half = spd_probability((2.0f64).ln().sqrt()).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
        let one = spd_probability(1.0).unwrap();
        assert!((one - 0.632_120_558_8).abs() < 1e-9);
        assert!(spd_probability(f64::NAN).is_err());
    }

    #[test]
    fn set_reference_points() {
        assert_eq!(set_probability(0.0).unwrap(), 0.5);
        assert!((set_probability(50.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((set_probability(1.0).unwrap() - 0.731_058_578_6).abs() < 1e-9);
        assert!(set_probability(f64::INFINITY).is_err());
    }

    #[test]
    fn set_antisymmetry_is_exact() {
        for i in 0..200 {
            let z = -5.0 + 0.05 * i as f64;
            let p = set_probability(z).unwrap();
            let q = set_probability(-z).unwrap();
            assert_eq!(q, 1.0 - p, "z = {z}");
        }
    }

    #[test]
    fn even_models_are_even() {
        let params = TspParams::reference();
        for i in 0..100 {
            let z = 0.5 * i as f64;
            assert_eq!(
                spd_probability(z).unwrap(),
                spd_probability(-z).unwrap()
            );
            assert_eq!(
                tsp_probability(&params, z).unwrap(),
                tsp_probability(&params, -z).unwrap()
            );
        }
    }

    #[test]
    fn probabilities_are_bounded() {
        let models = [
            NeuronModel::Spd,
            NeuronModel::Set,
            NeuronModel::Tsp(TspParams::reference()),
        ];
        for model in &models {
            for i in -200..=200 {
                let z = i as f64 * 0.25;
                let p = model.activation_probability(z).unwrap();
                assert!(p.is_finite() && (0.0..=1.0).contains(&p), "{model:?} z={z} p={p}");
            }
        }
    }

    #[test]
    fn tsp_zero_coupling_gives_zero() {
        let p = tsp_probability(&TspParams::reference(), 0.0).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn tsp_variants_disagree_away_from_zero() {
        let params = TspParams::reference();
        let neg = tsp_probability_variant(&params, 5.0, TspVariant::NegativeExponent).unwrap();
        let pos = tsp_probability_variant(&params, 5.0, TspVariant::PositiveExponent);
        match pos {
            Ok(v) => assert!((v - neg).abs() > 1e-3),
            Err(Error::Inconsistency(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn tsp_handles_degenerate_denominators() {
        // Delta - u = 0 at alpha^2 = ((gamma-kappa)^2 - u^2) / 16.
        let params = TspParams::reference();
        let d = params.gamma - params.kappa;
        let u = params.rate_sum();
        let alpha = ((d * d - u * u) / 16.0).sqrt();
        let exact = tsp_probability(&params, alpha).unwrap();
        let nearby = tsp_probability(&params, alpha + 1e-9).unwrap();
        assert!((exact - nearby).abs() < 1e-6, "{exact} vs {nearby}");
        // Delta = 0 at alpha = |gamma - kappa| / 4.
        let alpha0 = d.abs() / 4.0;
        let exact0 = tsp_probability(&params, alpha0).unwrap();
        let nearby0 = tsp_probability(&params, alpha0 + 1e-9).unwrap();
        assert!((exact0 - nearby0).abs() < 1e-6, "{exact0} vs {nearby0}");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let grids: [(NeuronModel, f64); 3] = [
            (NeuronModel::Spd, 3.0),
            (NeuronModel::Set, 5.0),
            (NeuronModel::Tsp(TspParams::reference()), 50.0),
        ];
        for (model, half_range) in &grids {
            let step = match model {
                NeuronModel::Tsp(_) => 3e-4,
                _ => 1e-5,
            };
            for i in 0..=100 {
                let z = -half_range + 2.0 * half_range * i as f64 / 100.0;
                let d = model.probability_derivative(z).unwrap();
                let hi = model.activation_probability(z + step).unwrap();
                let lo = model.activation_probability(z - step).unwrap();
                let fd = (hi - lo) / (2.0 * step);
                let tol = (1e-6 * fd.abs()).max(1e-9);
                assert!((d - fd).abs() <= tol, "{model:?} z={z} d={d} fd={fd}");
            }
        }
    }

    #[test]
    fn derivative_reference_points() {
        assert_eq!(NeuronModel::Set.probability_derivative(0.0).unwrap(), 0.25);
        assert_eq!(NeuronModel::Spd.probability_derivative(0.0).unwrap(), 0.0);
        let tsp = NeuronModel::Tsp(TspParams::reference());
        assert_eq!(tsp.probability_derivative(0.0).unwrap(), 0.0);
    }

    #[test]
    fn sampling_degenerate_probabilities() {
        let mut rng = derive_stream(1, &[domain::ORACLE, 0]);
        let sat = NeuronModel::Set.sample_activation(60.0, 17, &mut rng).unwrap();
        assert_eq!(sat.mean, 1.0);
        let silent = NeuronModel::Spd.sample_activation(0.0, 17, &mut rng).unwrap();
        assert_eq!(silent.mean, 0.0);
        assert!(NeuronModel::Set.sample_activation(0.0, 0, &mut rng).is_err());
    }

    #[test]
    fn sample_mean_tracks_probability() {
        let mut rng = derive_stream(2, &[domain::ORACLE, 1]);
        let k = 1_000_000;
        let est = NeuronModel::Set.sample_activation(0.0, k, &mut rng).unwrap();
        assert_eq!(est.trials, k);
        assert!((est.mean - 0.5).abs() < 0.002, "mean {}", est.mean);
    }

    #[test]
    fn sample_mean_within_binomial_bounds_on_grid() {
        let models = [
            NeuronModel::Spd,
            NeuronModel::Set,
            NeuronModel::Tsp(TspParams::reference()),
        ];
        let ranges = [3.0, 5.0, 50.0];
        let k = 100_000u32;
        for (mi, model) in models.iter().enumerate() {
            for i in 0..50 {
                let z = -ranges[mi] + 2.0 * ranges[mi] * i as f64 / 49.0;
                let p = model.activation_probability(z).unwrap();
                let mut rng = derive_stream(3, &[domain::ORACLE, mi as u64, i]);
                let est = model.sample_activation(z, k, &mut rng).unwrap();
                let bound = 4.0 * (p * (1.0 - p) / f64::from(k)).sqrt();
                assert!(
                    (est.mean - p).abs() <= bound.max(1e-9),
                    "{model:?} z={z} mean={} p={p}",
                    est.mean
                );
            }
        }
    }
}
