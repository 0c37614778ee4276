//! Independent numerical validators for the closed-form activation
//! probabilities.
//!
//! None of these share code with [`crate::neuron`]: the point is that a
//! disagreement implicates the closed form, not the test. Each oracle
//! targets one model:
//!
//! * [`fsme_integrate`] — fixed-step RK4 integration of the two-component
//!   affine moment equation driven by the exponentially decaying photon
//!   envelope; the squared magnitude of the second component is the
//!   occupation the TSP closed form must reproduce.
//! * [`telegraph_simulate`] — Gillespie simulation of the two-state dot;
//!   the long-run occupied fraction must converge to the sigmoid.
//! * [`poisson_click_rate`] — Monte Carlo photon counting; the click
//!   fraction must converge to `1 - exp(-lambda)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::neuron::{sigmoid, TspParams};

/// Off-diagonal field-system moments evolved by the affine equation: `wa`
/// tracks the driven cavity mode, `wb` the target mode whose occupation is
/// `|wb|^2`.
#[derive(Clone, Copy, Debug)]
pub struct MomentState {
    pub wa: Complex64,
    pub wb: Complex64,
    pub time: f64,
}

impl MomentState {
    /// Occupation of the undriven mode, `|wb|^2`.
    pub fn occupation(&self) -> f64 {
        self.wb.norm_sqr()
    }
}

/// Integrate the moment equation from vacuum to `params.t` with coupling
/// `alpha`, returning the `(time, occupation)` trajectory.
///
/// The drive enters the first component as `-sqrt(kappa) * xi(t)` with
/// `xi(t) = sqrt(zeta) * exp(-zeta t / 2)`. Any occupation above
/// `1 + 1e-6` during integration violates the single-excitation bound and
/// aborts.
pub fn fsme_integrate(
    params: &TspParams,
    alpha: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("non-finite coupling {alpha}")));
    }
    if !(dt > 0.0 && dt <= params.t / 100.0) {
        return Err(Error::Domain(format!(
            "step {dt} must be positive and at most t/100 = {}",
            params.t / 100.0
        )));
    }

    let steps = (params.t / dt).round().max(100.0) as usize;
    let h = params.t / steps as f64;
    let kappa = params.kappa;
    let gamma = params.gamma;
    let zeta = params.zeta;
    let sqrt_kappa = kappa.sqrt();
    let sqrt_zeta = zeta.sqrt();
    let coupling = Complex64::new(0.0, alpha); // i * alpha, real pulse

    let deriv = |time: f64, wa: Complex64, wb: Complex64| -> (Complex64, Complex64) {
        let xi = sqrt_zeta * (-zeta * time / 2.0).exp();
        (
            -0.5 * kappa * wa + coupling * wb - sqrt_kappa * xi,
            coupling * wa - 0.5 * gamma * wb,
        )
    };

    let mut state = MomentState {
        wa: Complex64::new(0.0, 0.0),
        wb: Complex64::new(0.0, 0.0),
        time: 0.0,
    };
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push((0.0, 0.0));

    for step in 0..steps {
        let t0 = step as f64 * h;
        let (ka1, kb1) = deriv(t0, state.wa, state.wb);
        let (ka2, kb2) = deriv(t0 + h / 2.0, state.wa + 0.5 * h * ka1, state.wb + 0.5 * h * kb1);
        let (ka3, kb3) = deriv(t0 + h / 2.0, state.wa + 0.5 * h * ka2, state.wb + 0.5 * h * kb2);
        let (ka4, kb4) = deriv(t0 + h, state.wa + h * ka3, state.wb + h * kb3);
        state.wa += (h / 6.0) * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
        state.wb += (h / 6.0) * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
        state.time = (step + 1) as f64 * h;

        let occ = state.occupation();
        if occ > 1.0 + 1e-6 {
            return Err(Error::PhysicsViolation(format!(
                "occupation {occ} exceeds single-excitation bound at t={}",
                state.time
            )));
        }
        trajectory.push((state.time, occ));
    }
    Ok(trajectory)
}

/// Final occupation of [`fsme_integrate`], the oracle value for the TSP
/// activation probability.
pub fn fsme_occupation(params: &TspParams, alpha: f64, dt: f64) -> Result<f64> {
    let traj = fsme_integrate(params, alpha, dt)?;
    Ok(traj.last().map(|&(_, occ)| occ).unwrap_or(0.0))
}

/// Two-state telegraph process of the dot occupation.
#[derive(Clone, Copy, Debug)]
pub struct TelegraphConfig {
    /// Source lead coupling.
    pub gamma_s: f64,
    /// Drain lead coupling.
    pub gamma_d: f64,
    /// Dot level position in thermal units.
    pub epsilon_over_kt: f64,
    /// Total simulated time.
    pub horizon: f64,
    /// Initial stretch discarded from the time average.
    pub burn_in: f64,
}

impl TelegraphConfig {
    pub fn new(
        gamma_s: f64,
        gamma_d: f64,
        epsilon_over_kt: f64,
        horizon: f64,
        burn_in: f64,
    ) -> Result<Self> {
        let c = Self { gamma_s, gamma_d, epsilon_over_kt, horizon, burn_in };
        c.validate()?;
        Ok(c)
    }

    /// Default burn-in of ten relaxation times `1/Gamma`.
    pub fn with_default_burn_in(
        gamma_s: f64,
        gamma_d: f64,
        epsilon_over_kt: f64,
        horizon: f64,
    ) -> Result<Self> {
        let burn_in = 10.0 / (gamma_s + gamma_d);
        Self::new(gamma_s, gamma_d, epsilon_over_kt, horizon, burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma_s > 0.0
            && self.gamma_d > 0.0
            && self.epsilon_over_kt.is_finite()
            && self.burn_in >= 0.0
            && self.horizon > self.burn_in;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid telegraph config: {self:?}")))
        }
    }
}

/// Gillespie simulation of the dot; returns the fraction of
/// `[burn_in, horizon]` spent occupied. Converges to
/// `sigmoid(epsilon_over_kt)`.
pub fn telegraph_simulate<R: Rng + ?Sized>(
    config: &TelegraphConfig,
    rng: &mut R,
) -> Result<f64> {
    config.validate()?;
    let gamma = config.gamma_s + config.gamma_d;
    // Fermi occupation of the level; filling happens into the empty fraction.
    let n_fermi = sigmoid(-config.epsilon_over_kt);
    let rate_in = gamma * (1.0 - n_fermi);
    let rate_out = gamma * n_fermi;

    let window = config.horizon - config.burn_in;
    let mut time = 0.0;
    let mut occupied = false;
    let mut occupied_time = 0.0;

    while time < config.horizon {
        let rate = if occupied { rate_out } else { rate_in };
        let wait = Exp::new(rate)
            .map_err(|e| Error::Domain(format!("bad jump rate {rate}: {e}")))?
            .sample(rng);
        let next = (time + wait).min(config.horizon);
        if occupied {
            let lo = time.max(config.burn_in);
            if next > lo {
                occupied_time += next - lo;
            }
        }
        time += wait;
        occupied = !occupied;
    }
    Ok(occupied_time / window)
}

/// Draw `trials` Poisson photon counts at mean `lambda` and return the
/// fraction of windows with at least one count. Converges to
/// `1 - exp(-lambda)`.
pub fn poisson_click_rate<R: Rng + ?Sized>(
    lambda: f64,
    trials: u32,
    rng: &mut R,
) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!("mean photon number {lambda} must be nonnegative")));
    }
    if trials == 0 {
        return Err(Error::Domain("trial count must be at least 1".into()));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(lambda)
        .map_err(|e| Error::Domain(format!("bad Poisson mean {lambda}: {e}")))?;
    let clicks = (0..trials)
        .filter(|_| dist.sample(rng) >= 1.0)
        .count();
    Ok(clicks as f64 / f64::from(trials))
}
