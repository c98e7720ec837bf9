//! The division density `f(tau)` and its weighted integral transforms.
//!
//! Everything the model and the stability analysis need from the cell-cycle
//! kernel reduces to integrals of the form
//!
//! ```text
//!   ∫ tau^p e^{-r tau} f(tau) {cos, sin}(omega tau) dtau
//! ```
//!
//! over the support `[tau_min, tau_max]`. They are computed by composite
//! 8-point Gauss–Legendre quadrature with panels subdivided so that at most a
//! quarter oscillation period falls into each panel, which keeps the rule
//! spectrally accurate for large `omega`.

use crate::{Error, Result};
use std::path::Path;

/// 8-point Gauss–Legendre nodes mapped to `[0, 1]`, ascending.
#[allow(clippy::excessive_precision)]
pub(crate) const GL8_NODES: [f64; 8] = [
    0.019855071751231884,
    0.10166676129318663,
    0.23723379504183551,
    0.40828267875217510,
    0.59171732124782490,
    0.76276620495816449,
    0.89833323870681337,
    0.98014492824876812,
];

/// Matching weights on `[0, 1]`; they sum to one.
#[allow(clippy::excessive_precision)]
pub(crate) const GL8_WEIGHTS: [f64; 8] = [
    0.05061426814518813,
    0.11119051722668724,
    0.15685332293894364,
    0.18134189168918099,
    0.18134189168918099,
    0.15685332293894364,
    0.11119051722668724,
    0.05061426814518813,
];

/// Default number of base panels per knot-free stretch of the support.
const BASE_PANELS: usize = 16;

/// Shape of the division density.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// Constant `1/(tau_max - tau_min)` on the support.
    Uniform,
    /// Piecewise-linear density through `(knot, value)` pairs spanning the
    /// support; values are renormalized to unit mass at construction.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

/// Probability density of the division age on `[tau_min, tau_max]`.
///
/// Invariants established at construction: `0 <= tau_min < tau_max < inf`,
/// `f >= 0`, `f = 0` outside the support and the total mass is one (tabulated
/// input is divided by its trapezoid mass; the original mass is kept in
/// [`DivisionDensity::pre_normalization_mass`]).
#[derive(Debug, Clone)]
pub struct DivisionDensity {
    kind: DensityKind,
    tau_min: f64,
    tau_max: f64,
    pre_normalization_mass: f64,
}

/// Exponentially weighted moments of the density used throughout the model:
/// `k` is the expected surviving fraction of a cohort at division,
/// `m1` its survival-weighted mean division age, and `y0w` the weight that
/// converts a re-entry flux into an equilibrium proliferating mass.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct KernelMoments {
    /// `∫ e^{-gamma tau} f(tau) dtau`, in `(0, 1]`.
    pub k: f64,
    /// `∫ tau e^{-gamma tau} f(tau) dtau`, in days.
    pub m1: f64,
    /// `∫ f(tau) (1 - e^{-gamma tau})/gamma dtau` for `gamma > 0`,
    /// `∫ tau f(tau) dtau` for `gamma = 0`, in days.
    pub y0w: f64,
}

impl DivisionDensity {
    /// Uniform density on `[tau_min, tau_max]`.
    pub fn uniform(tau_min: f64, tau_max: f64) -> Result<Self> {
        validate_support(tau_min, tau_max)?;
        Ok(Self {
            kind: DensityKind::Uniform,
            tau_min,
            tau_max,
            pre_normalization_mass: 1.0,
        })
    }

    /// Piecewise-linear density through the given knots.
    ///
    /// Knots must be finite, strictly increasing, with nonnegative values and
    /// positive total mass. The values are scaled so the trapezoid mass is
    /// exactly one.
    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::Domain(
                "tabulated density needs at least two (knot, value) pairs".into(),
            ));
        }
        if knots.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("tabulated density entries must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("knots must be strictly increasing".into()));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::Domain("density values must be nonnegative".into()));
        }
        let tau_min = knots[0];
        let tau_max = *knots.last().unwrap();
        validate_support(tau_min, tau_max)?;
        let mass: f64 = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
            .sum();
        if mass <= 0.0 {
            return Err(Error::Domain("tabulated density has zero mass".into()));
        }
        let values = values.iter().map(|v| v / mass).collect();
        Ok(Self {
            kind: DensityKind::Tabulated { knots, values },
            tau_min,
            tau_max,
            pre_normalization_mass: mass,
        })
    }

    /// Load a tabulated density from a two-column CSV file `(tau, value)`.
    /// A header line is allowed and detected by a non-numeric first field.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let a = fields.next().unwrap_or_default();
            let b = fields
                .next()
                .ok_or_else(|| Error::Config(format!("{}: line {}: expected two columns", path.display(), i + 1)))?;
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(v)) => {
                    knots.push(t);
                    values.push(v);
                }
                _ if i == 0 => continue, // header
                _ => {
                    return Err(Error::Config(format!(
                        "{}: line {}: cannot parse '{}' as numbers",
                        path.display(),
                        i + 1,
                        line
                    )))
                }
            }
        }
        Self::tabulated(knots, values)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// Trapezoid mass of the raw tabulated input before renormalization
    /// (1 for uniform densities).
    pub fn pre_normalization_mass(&self) -> f64 {
        self.pre_normalization_mass
    }

    /// Density value `f(tau)`; zero outside the support.
    pub fn pdf(&self, tau: f64) -> f64 {
        if tau < self.tau_min || tau > self.tau_max {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Uniform => 1.0 / (self.tau_max - self.tau_min),
            DensityKind::Tabulated { knots, values } => {
                // binary search for the knot interval containing tau
                let i = match knots.binary_search_by(|k| k.partial_cmp(&tau).unwrap()) {
                    Ok(i) => return values[i],
                    Err(i) => i - 1,
                };
                let t = (tau - knots[i]) / (knots[i + 1] - knots[i]);
                values[i] + t * (values[i + 1] - values[i])
            }
        }
    }

    /// Cumulative distribution `F(tau) = ∫_{tau_min}^{tau} f`; clamped to `[0, 1]`.
    pub fn cdf(&self, tau: f64) -> f64 {
        if tau <= self.tau_min {
            return 0.0;
        }
        if tau >= self.tau_max {
            return 1.0;
        }
        match &self.kind {
            DensityKind::Uniform => (tau - self.tau_min) / (self.tau_max - self.tau_min),
            DensityKind::Tabulated { knots, values } => {
                let mut acc = 0.0;
                for i in 0..knots.len() - 1 {
                    let (a, b) = (knots[i], knots[i + 1]);
                    if tau <= a {
                        break;
                    }
                    let hi = tau.min(b);
                    let vb = self.pdf(hi);
                    acc += 0.5 * (values[i] + vb) * (hi - a);
                }
                acc.min(1.0)
            }
        }
    }

    /// Division hazard `g(tau) = f(tau) / (1 - F(tau))`.
    ///
    /// Zero for `tau < tau_min`; diverges as `tau` approaches `tau_max`, so
    /// the operation is a domain error there.
    pub fn hazard(&self, tau: f64) -> Result<f64> {
        if tau >= self.tau_max {
            return Err(Error::Domain(format!(
                "hazard rate diverges at tau >= tau_max ({})",
                self.tau_max
            )));
        }
        if tau < self.tau_min {
            return Ok(0.0);
        }
        let s = 1.0 - self.cdf(tau);
        Ok(self.pdf(tau) / s)
    }

    /// Internal knot positions that the quadrature must not straddle.
    fn knot_list(&self) -> Vec<f64> {
        match &self.kind {
            DensityKind::Uniform => vec![self.tau_min, self.tau_max],
            DensityKind::Tabulated { knots, .. } => knots.clone(),
        }
    }

    /// Composite GL8 quadrature of `tau^p e^{-rate tau} trig(omega tau) f(tau)`
    /// over `support ∩ [lo, hi]`, with panels refined to the oscillation scale.
    fn integrate_weighted(
        &self,
        rate: f64,
        omega: f64,
        tau_power: u32,
        trig: Trig,
        lo: f64,
        hi: f64,
    ) -> f64 {
        let lo = lo.max(self.tau_min);
        let hi = hi.min(self.tau_max);
        if hi <= lo {
            return 0.0;
        }
        let base = (self.tau_max - self.tau_min) / BASE_PANELS as f64;
        let max_width = if omega > 0.0 {
            base.min(std::f64::consts::PI / (4.0 * omega))
        } else {
            base
        };
        let mut acc = 0.0;
        let knots = self.knot_list();
        // iterate knot intervals clipped to [lo, hi]
        for w in knots.windows(2) {
            let (a, b) = (w[0].max(lo), w[1].min(hi));
            if b <= a {
                continue;
            }
            let n = ((b - a) / max_width).ceil().max(1.0) as usize;
            let width = (b - a) / n as f64;
            for p in 0..n {
                let left = a + p as f64 * width;
                let mut panel = 0.0;
                for (u, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
                    let tau = left + u * width;
                    let mut v = (-rate * tau).exp() * self.pdf(tau);
                    if tau_power == 1 {
                        v *= tau;
                    }
                    v *= match trig {
                        Trig::One => 1.0,
                        Trig::Cos => (omega * tau).cos(),
                        Trig::Sin => (omega * tau).sin(),
                    };
                    panel += wt * v;
                }
                acc += panel * width;
            }
        }
        acc
    }

    /// `∫ e^{-rate tau} f(tau) dtau` with an arbitrary (possibly negative)
    /// real rate; used by the real characteristic equations.
    pub fn exp_weighted_mass(&self, rate: f64) -> f64 {
        self.integrate_weighted(rate, 0.0, 0, Trig::One, self.tau_min, self.tau_max)
    }

    /// Tail mass `∫_{max(t, tau_min)}^{tau_max} e^{-gamma tau} f(tau) dtau`.
    pub fn exp_weighted_tail(&self, gamma: f64, t: f64) -> f64 {
        self.integrate_weighted(gamma, 0.0, 0, Trig::One, t, self.tau_max)
    }

    /// The transform pair
    /// `C(omega) = ∫ e^{-gamma tau} f(tau) cos(omega tau) dtau` and
    /// `S(omega) = ∫ e^{-gamma tau} f(tau) sin(omega tau) dtau`.
    ///
    /// `C(0)` equals the moment `k` and `S(0) = 0`; both decay to zero as
    /// `omega` grows.
    pub fn weighted_cos_sin(&self, gamma: f64, omega: f64) -> (f64, f64) {
        self.weighted_trig(gamma, omega, 0)
    }

    /// Derivatives of the pair with respect to `omega`:
    /// `C'(omega) = -∫ tau e^{-gamma tau} f sin(omega tau) dtau` and
    /// `S'(omega) = ∫ tau e^{-gamma tau} f cos(omega tau) dtau`.
    pub fn weighted_cos_sin_prime(&self, gamma: f64, omega: f64) -> (f64, f64) {
        let (tc, ts) = self.weighted_trig(gamma, omega, 1);
        (-ts, tc)
    }

    /// `(∫ tau^p e^{-rate tau} f cos, ∫ tau^p e^{-rate tau} f sin)` for any
    /// real rate; the building block for complex characteristic evaluations.
    pub fn weighted_trig(&self, rate: f64, omega: f64, tau_power: u32) -> (f64, f64) {
        let c = self.integrate_weighted(rate, omega, tau_power, Trig::Cos, self.tau_min, self.tau_max);
        let s = self.integrate_weighted(rate, omega, tau_power, Trig::Sin, self.tau_min, self.tau_max);
        (c, s)
    }

    /// The moments `k`, `m1` and `y0w` for the apoptosis rate `gamma`.
    pub fn moments(&self, gamma: f64) -> KernelMoments {
        let k = self.exp_weighted_mass(gamma);
        let m1 = self.integrate_weighted(gamma, 0.0, 1, Trig::One, self.tau_min, self.tau_max);
        let y0w = if gamma > 0.0 {
            // (1 - e^{-gamma tau})/gamma via expm1 for small gamma stability
            self.integrate_custom(|tau| -(-gamma * tau).exp_m1() / gamma)
        } else {
            self.integrate_weighted(0.0, 0.0, 1, Trig::One, self.tau_min, self.tau_max)
        };
        KernelMoments { k, m1, y0w }
    }

    /// Whether `tau -> e^{-gamma tau} f(tau)` is non-increasing on a sampled
    /// grid over the support (a hypothesis of the crossing analysis).
    pub fn weighted_density_nonincreasing(&self, gamma: f64, samples: usize) -> bool {
        let n = samples.max(2);
        let mut prev = f64::INFINITY;
        for i in 0..=n {
            let tau = self.tau_min + (self.tau_max - self.tau_min) * i as f64 / n as f64;
            let v = (-gamma * tau).exp() * self.pdf(tau);
            if v > prev * (1.0 + 1e-12) + 1e-300 {
                return false;
            }
            prev = v;
        }
        true
    }

    /// GL8 quadrature of `w(tau) f(tau)` over the support for a smooth weight.
    fn integrate_custom(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        let knots = self.knot_list();
        let base = (self.tau_max - self.tau_min) / BASE_PANELS as f64;
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = ((b - a) / base).ceil().max(1.0) as usize;
            let width = (b - a) / n as f64;
            for p in 0..n {
                let left = a + p as f64 * width;
                let mut panel = 0.0;
                for (u, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
                    let tau = left + u * width;
                    panel += wt * weight(tau) * self.pdf(tau);
                }
                acc += panel * width;
            }
        }
        acc
    }
}

fn validate_support(tau_min: f64, tau_max: f64) -> Result<()> {
    if !(tau_min.is_finite() && tau_max.is_finite()) || tau_min < 0.0 || tau_max <= tau_min {
        return Err(Error::Domain(format!(
            "support must satisfy 0 <= tau_min < tau_max < inf, got [{tau_min}, {tau_max}]"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Trig {
    One,
    Cos,
    Sin,
}
