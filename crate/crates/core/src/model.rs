//! Model parameters, the Hill re-entry rate, and equilibrium analysis.
//!
//! The resting population loses cells at rate `delta + beta(x)` and gains
//! twice the survival-weighted division flux of one generation earlier. A
//! positive equilibrium `x*` balances `(2k - 1) beta(x*) = delta`, where `k`
//! is the survival-weighted kernel mass; it exists exactly when
//! `0 < delta < (2k - 1) beta(0)`.

use crate::kernel::{DivisionDensity, KernelMoments};
use crate::{Error, Result};
use serde::Serialize;

/// Monotone decreasing Hill rate `beta(x) = beta0 theta^n / (theta^n + x^n)`.
///
/// `beta0` is the maximal re-entry rate, `theta` the half-saturation mass and
/// `n` the sensitivity of the feedback. `theta = 0` would collapse the rate
/// to zero for every positive `x`, so it is rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillRate {
    pub beta0: f64,
    pub theta: f64,
    pub n: f64,
}

impl HillRate {
    pub fn new(beta0: f64, theta: f64, n: f64) -> Result<Self> {
        if !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(Error::Domain(format!("beta0 must be positive, got {beta0}")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("theta must be positive, got {theta}")));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain(format!("n must be positive, got {n}")));
        }
        Ok(Self { beta0, theta, n })
    }

    /// `beta(x)`, evaluated as `beta0 / (1 + (x/theta)^n)` so huge `theta`
    /// stays well conditioned.
    pub fn eval(&self, x: f64) -> f64 {
        self.beta0 / (1.0 + (x / self.theta).powf(self.n))
    }

    /// `beta'(x) = -beta0 n theta^n x^{n-1} / (theta^n + x^n)^2`.
    pub fn prime(&self, x: f64) -> f64 {
        if x == 0.0 {
            return if self.n > 1.0 {
                0.0
            } else if self.n == 1.0 {
                -self.beta0 / self.theta
            } else {
                f64::NEG_INFINITY
            };
        }
        let r = (x / self.theta).powf(self.n);
        let denom = 1.0 + r;
        -self.beta0 * self.n * r / (x * denom * denom)
    }

    /// Re-entry flux `x beta(x)`.
    pub fn flux(&self, x: f64) -> f64 {
        self.eval(x) * x
    }

    /// Slope of the re-entry flux, `d(x beta(x))/dx = beta(x) + x beta'(x)`.
    pub fn flux_slope(&self, x: f64) -> f64 {
        self.eval(x) + x * self.prime(x)
    }

    /// Argmax of the re-entry flux, `theta / (n - 1)^{1/n}`; the flux is
    /// increasing below it and decreasing above. Only defined for `n > 1`
    /// (the flux is monotone otherwise).
    pub fn flux_argmax(&self) -> Result<f64> {
        if self.n <= 1.0 {
            return Err(Error::Domain(format!(
                "re-entry flux has no interior peak for n = {} <= 1",
                self.n
            )));
        }
        Ok(self.theta / (self.n - 1.0).powf(1.0 / self.n))
    }
}

/// Full parameterization of the system.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Resting-phase loss rate (death and differentiation), 1/days.
    pub delta: f64,
    /// Proliferating-phase apoptosis rate, 1/days.
    pub gamma: f64,
    pub hill: HillRate,
    pub density: DivisionDensity,
}

impl ModelParams {
    pub fn new(delta: f64, gamma: f64, hill: HillRate, density: DivisionDensity) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be finite and >= 0, got {delta}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { delta, gamma, hill, density })
    }

    pub fn moments(&self) -> KernelMoments {
        self.density.moments(self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumKind {
    Trivial,
    Positive,
}

/// An equilibrium `(x*, y*)` together with the local feedback gain
/// `beta* = d(x beta(x))/dx` at `x*`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Equilibrium {
    pub x_star: f64,
    pub y_star: f64,
    pub beta_star: f64,
    pub kind: EquilibriumKind,
}

/// Existence test for the positive equilibrium.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExistenceReport {
    /// `alpha = (2k - 1) beta(0)`, the existence threshold for `delta`.
    pub threshold_alpha: f64,
    /// True exactly when `0 < delta < alpha`.
    pub exists_positive: bool,
    /// True when `delta` sits on the threshold within 1e-12 (relative to the
    /// larger of 1 and the magnitudes involved); no stability claim is made
    /// there.
    pub boundary: bool,
}

/// Existence of the positive equilibrium: `0 < delta < (2k - 1) beta(0)`.
pub fn existence(params: &ModelParams) -> ExistenceReport {
    let k = params.moments().k;
    let alpha = (2.0 * k - 1.0) * params.hill.eval(0.0);
    let scale = 1.0f64.max(alpha.abs()).max(params.delta.abs());
    let boundary = (params.delta - alpha).abs() <= 1e-12 * scale;
    ExistenceReport {
        threshold_alpha: alpha,
        exists_positive: params.delta > 0.0 && params.delta < alpha && !boundary,
        boundary,
    }
}

/// All equilibria of the system: the trivial one always, the positive one
/// when the existence condition holds.
///
/// For the Hill rate the positive equilibrium is closed form,
/// `x* = theta ((2k - 1) beta0 / delta - 1)^{1/n}`, and
/// `y* = beta(x*) x* y0w`.
pub fn equilibria(params: &ModelParams) -> Vec<Equilibrium> {
    let mut out = vec![Equilibrium {
        x_star: 0.0,
        y_star: 0.0,
        beta_star: params.hill.flux_slope(0.0),
        kind: EquilibriumKind::Trivial,
    }];
    let report = existence(params);
    if report.exists_positive {
        let m = params.moments();
        let ratio = (2.0 * m.k - 1.0) * params.hill.beta0 / params.delta;
        let x_star = params.hill.theta * (ratio - 1.0).powf(1.0 / params.hill.n);
        let y_star = params.hill.flux(x_star) * m.y0w;
        out.push(Equilibrium {
            x_star,
            y_star,
            beta_star: params.hill.flux_slope(x_star),
            kind: EquilibriumKind::Positive,
        });
    }
    out
}

/// The positive equilibrium, if it exists.
pub fn positive_equilibrium(params: &ModelParams) -> Option<Equilibrium> {
    equilibria(params)
        .into_iter()
        .find(|e| e.kind == EquilibriumKind::Positive)
}

/// Bisection solve of `(2k - 1) beta(x) - delta = 0` on an expanding bracket.
///
/// The closed form above is used in production; this root finder is the
/// independent route kept for verification and for any future non-Hill rate.
pub fn positive_equilibrium_bisection(params: &ModelParams) -> Option<f64> {
    let k = params.moments().k;
    let gain = 2.0 * k - 1.0;
    let resid = |x: f64| gain * params.hill.eval(x) - params.delta;
    let at_zero = resid(0.0);
    if at_zero.is_nan() || at_zero <= 0.0 {
        return None;
    }
    let mut hi = params.hill.theta;
    let mut tries = 0;
    while resid(hi) > 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if resid(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Whether unbounded growth is predicted: `delta = 0`, survival-weighted mass
/// above one half, a decreasing flux tail (`n > 1`) and an initial mass at or
/// beyond the flux peak.
pub fn explosion_predicted(params: &ModelParams, mu: f64) -> bool {
    if params.delta != 0.0 || params.hill.n <= 1.0 {
        return false;
    }
    let k = params.moments().k;
    k > 0.5
        && mu
            >= params
                .hill
                .flux_argmax()
                .expect("n > 1 checked above")
}
