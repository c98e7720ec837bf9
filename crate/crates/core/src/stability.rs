//! Linear stability analysis: characteristic equations for both equilibria,
//! classification of the positive equilibrium, and a Hopf locator.
//!
//! Linearizing the autonomous resting-phase equation around an equilibrium
//! with local feedback gain `b` gives the transcendental characteristic
//! function
//!
//! ```text
//!   D(lambda) = lambda + delta + b - 2 b ∫ e^{-(lambda + gamma) tau} f(tau) dtau,
//! ```
//!
//! with `b = beta(0)` at extinction and `b = beta* = d(x beta(x))/dx|_{x*}`
//! at the positive equilibrium. Purely imaginary roots `i omega` of `D`
//! satisfy `g(omega) := omega (1 - 2 C(omega)) / (2 S(omega)) = delta`, and
//! each crossing determines a critical gain `beta*_c = -delta/(1 - 2 C)`.

use crate::kernel::KernelMoments;
use crate::model::{self, Equilibrium, ExistenceReport, ModelParams};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Residual tolerance for an accepted crossing of `g(omega) = delta`.
const CROSSING_RESIDUAL_TOL: f64 = 1e-10;

/// Half-width of the critical band in the feedback gain: the positive
/// equilibrium is reported as critical when `|beta* - beta*_c|` is below
/// this. Wide enough to absorb the rounding of published critical
/// sensitivities to two decimals.
pub const HOPF_CRITICAL_GAIN_TOL: f64 = 1e-3;

/// One purely imaginary crossing candidate of the characteristic equation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossingCandidate {
    /// Crossing frequency, 1/days.
    pub omega: f64,
    pub c: f64,
    pub s: f64,
    /// Critical feedback gain `-delta / (1 - 2 C(omega))`.
    pub beta_star_c: f64,
    /// `d/domega [ omega (1 - 2C) / (2S) ]` at the crossing.
    pub g_prime: f64,
}

/// Output of the Hopf locator.
#[derive(Debug, Clone, Serialize)]
pub struct HopfResult {
    /// All retained crossings on the scanned frequency range, by frequency.
    pub candidates: Vec<CrossingCandidate>,
    /// The selected crossing (minimal `C`, smallest frequency on ties).
    pub omega_c: f64,
    pub beta_star_c: f64,
    /// Linear period `2 pi / omega_c`, days.
    pub period: f64,
    /// Hill sensitivity whose equilibrium gain equals `beta_star_c`, if one
    /// exists in `(1, 10]`.
    pub n_c: Option<f64>,
    /// Sign of the crossing speed `-C'(omega_c) - delta (S/omega)'(omega_c)`;
    /// positive means the root pair moves rightward as the gain drops.
    pub transversal: f64,
    /// True when the transversality expression vanishes within 1e-8 (the
    /// loss rate sits in the degenerate set for this kernel).
    pub degenerate: bool,
    /// True when several crossings share the minimal `C` within 1e-12.
    pub tie: bool,
    /// The supporting theory assumes `tau_min = 0`; results for positive
    /// minimal delay are still computed but flagged.
    pub outside_proved_regime: bool,
    /// False when `tau -> e^{-gamma tau} f(tau)` fails the non-increasing
    /// hypothesis on a sampled grid.
    pub kernel_hypothesis_holds: bool,
}

/// Stability classification of the extinction equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrivialStability {
    /// `(2k - 1) beta(0) < delta`: globally asymptotically stable.
    GloballyStable,
    /// `(2k - 1) beta(0) > delta`: unstable (a positive real root exists).
    Unstable,
    /// Equality within tolerance; a zero root, no classification.
    Boundary,
}

/// Stability classification of the positive equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PositiveStability {
    /// `beta* >= delta_tilde`: stable by the sufficient gain bound.
    StableGainBound,
    /// `beta*_c < beta* < delta_tilde`: stable, below the crossing gain.
    StablePreHopf,
    /// `|beta* - beta*_c|` within the critical band.
    HopfCritical,
    /// `beta* < beta*_c`: a root pair has crossed into the right half plane.
    UnstablePostHopf,
    /// The transversality expression degenerates at the selected crossing.
    Indeterminate,
}

/// Numbers backing a stability verdict.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityDetails {
    pub k: f64,
    pub threshold_alpha: f64,
    pub delta_tilde: f64,
    pub beta_star: Option<f64>,
    pub beta_star_c: Option<f64>,
    pub omega_c: Option<f64>,
}

/// Combined stability report for both equilibria.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub trivial: TrivialStability,
    pub positive: Option<PositiveStability>,
    /// `-delta / (2k + 1)`, the sufficient stability bound on the gain.
    pub delta_tilde: f64,
    pub details: StabilityDetails,
}

/// Real characteristic function of the extinction equilibrium,
/// `D0(lambda) = lambda + delta + beta(0) - 2 beta(0) ∫ e^{-(lambda+gamma) tau} f dtau`.
pub fn char_trivial(params: &ModelParams, lambda: f64) -> f64 {
    let b0 = params.hill.eval(0.0);
    let weighted = params.density.exp_weighted_mass(params.gamma + lambda);
    lambda + params.delta + b0 - 2.0 * b0 * weighted
}

/// The unique real root of the increasing function `D0`; positive exactly
/// when extinction is unstable, negative when it is globally stable.
pub fn trivial_real_root(params: &ModelParams) -> Result<f64> {
    let eval = |l: f64| char_trivial(params, l);
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while eval(lo) > 0.0 {
        lo *= 2.0;
        grow += 1;
        if grow > 60 || !eval(lo).is_finite() {
            return Err(Error::Domain("cannot bracket the real characteristic root from below".into()));
        }
    }
    grow = 0;
    while eval(hi) < 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 60 || !eval(hi).is_finite() {
            return Err(Error::Domain("cannot bracket the real characteristic root from above".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Complex characteristic function of an equilibrium with feedback gain
/// `beta_star`:
/// `D(lambda) = lambda + delta + beta* - 2 beta* ∫ e^{-(lambda+gamma) tau} f dtau`.
pub fn char_nontrivial(params: &ModelParams, beta_star: f64, lambda: Complex64) -> Complex64 {
    let (re, im) = (lambda.re, lambda.im);
    let (omega, sign) = if im < 0.0 { (-im, -1.0) } else { (im, 1.0) };
    let (c, s) = params.density.weighted_trig(params.gamma + re, omega, 0);
    let transform = Complex64::new(c, -sign * s);
    lambda + params.delta + beta_star - 2.0 * beta_star * transform
}

/// Derivative `D'(lambda) = 1 + 2 beta* ∫ tau e^{-(lambda+gamma) tau} f dtau`.
fn char_nontrivial_prime(params: &ModelParams, beta_star: f64, lambda: Complex64) -> Complex64 {
    let (re, im) = (lambda.re, lambda.im);
    let (omega, sign) = if im < 0.0 { (-im, -1.0) } else { (im, 1.0) };
    let (c, s) = params.density.weighted_trig(params.gamma + re, omega, 1);
    let transform = Complex64::new(c, -sign * s);
    Complex64::new(1.0, 0.0) + 2.0 * beta_star * transform
}

/// `g(omega) = omega (1 - 2 C(omega)) / (2 S(omega))`; crossings of
/// `g = delta` locate purely imaginary characteristic roots.
pub fn g_of_omega(params: &ModelParams, omega: f64) -> Result<f64> {
    if omega <= 0.0 {
        return Err(Error::Domain(format!("g is defined for omega > 0, got {omega}")));
    }
    let (c, s) = params.density.weighted_cos_sin(params.gamma, omega);
    if s.abs() < 1e-14 {
        return Err(Error::Domain(format!("sine transform vanishes at omega = {omega}")));
    }
    Ok(omega * (1.0 - 2.0 * c) / (2.0 * s))
}

/// Default scan ceiling: forty kernel harmonics.
pub fn default_omega_max(params: &ModelParams) -> f64 {
    40.0 * 2.0 * std::f64::consts::PI / params.density.tau_max()
}

/// Locate the Hopf crossing: scan `g(omega) - delta` for sign changes on
/// `(0, omega_max]`, bisect each bracket, keep candidates with `S > 0` and
/// `1 - 2C > 0`, select the one with minimal `C` (smallest frequency on
/// ties), and invert the critical gain back to a Hill sensitivity.
///
/// The scan starts just above zero (`omega = 0` is never a crossing under
/// existence) and is retried once with a doubled ceiling before giving up.
pub fn hopf_locate(params: &ModelParams, omega_max: f64, grid: usize) -> Result<HopfResult> {
    let existence = model::existence(params);
    if !existence.exists_positive {
        return Err(Error::Precondition(
            "the positive equilibrium must exist to locate a Hopf point".into(),
        ));
    }
    let kernel_hypothesis_holds = params.density.weighted_density_nonincreasing(params.gamma, 2048);

    let mut candidates = scan_crossings(params, omega_max, grid)?;
    if candidates.is_empty() {
        candidates = scan_crossings(params, 2.0 * omega_max, 2 * grid)?;
    }
    if candidates.is_empty() {
        let (g_min, g_max) = scan_range(params, omega_max, grid);
        return Err(Error::NoCrossing { omega_max, g_min, g_max });
    }

    let c_min = candidates.iter().map(|c| c.c).fold(f64::INFINITY, f64::min);
    let tied: Vec<&CrossingCandidate> = candidates
        .iter()
        .filter(|cand| (cand.c - c_min).abs() <= 1e-12)
        .collect();
    let tie = tied.len() > 1;
    let selected = **tied
        .iter()
        .min_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap())
        .expect("at least one candidate");

    let (c, s) = (selected.c, selected.s);
    let omega_c = selected.omega;
    let beta_star_c = -params.delta / (1.0 - 2.0 * c);
    let (cp, sp) = params.density.weighted_cos_sin_prime(params.gamma, omega_c);
    // crossing speed expression: -C'(w) - delta (S/w)'
    let transversal = -cp - params.delta * (sp / omega_c - s / (omega_c * omega_c));
    let degenerate = transversal.abs() < 1e-8;

    let n_c = invert_sensitivity(params, beta_star_c).ok();

    Ok(HopfResult {
        candidates,
        omega_c,
        beta_star_c,
        period: 2.0 * std::f64::consts::PI / omega_c,
        n_c,
        transversal,
        degenerate,
        tie,
        outside_proved_regime: params.density.tau_min() > 0.0,
        kernel_hypothesis_holds,
    })
}

fn scan_range(params: &ModelParams, omega_max: f64, grid: usize) -> (f64, f64) {
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    for i in 0..=grid {
        let omega = 1e-6 + (omega_max - 1e-6) * i as f64 / grid as f64;
        if let Ok(g) = g_of_omega(params, omega) {
            g_min = g_min.min(g);
            g_max = g_max.max(g);
        }
    }
    (g_min, g_max)
}

fn scan_crossings(params: &ModelParams, omega_max: f64, grid: usize) -> Result<Vec<CrossingCandidate>> {
    let grid = grid.max(16);
    let omega_at = |i: usize| 1e-6 + (omega_max - 1e-6) * i as f64 / grid as f64;
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=grid {
        let omega = omega_at(i);
        let cur = match g_of_omega(params, omega) {
            Ok(g) => g - params.delta,
            Err(_) => {
                prev = None;
                continue;
            }
        };
        if let Some((omega_prev, fprev)) = prev {
            if fprev == 0.0 || (fprev < 0.0) != (cur < 0.0) {
                if let Some(cand) = bisect_crossing(params, omega_prev, omega) {
                    out.push(cand);
                }
            }
        }
        prev = Some((omega, cur));
    }
    Ok(out)
}

/// Bisect a bracketed sign change of `g - delta` to 1e-12 in frequency and
/// build the candidate; brackets that converge onto a pole of `g` (a sign
/// change of `S`) fail the residual check and are discarded, as are
/// crossings with `S <= 0` or `1 - 2C <= 0`.
fn bisect_crossing(params: &ModelParams, mut lo: f64, mut hi: f64) -> Option<CrossingCandidate> {
    let f = |omega: f64| g_of_omega(params, omega).map(|g| g - params.delta);
    let flo = f(lo).ok()?;
    let mut sign_lo = flo < 0.0;
    for _ in 0..80 {
        if hi - lo < 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match f(mid) {
            Ok(v) => {
                if (v < 0.0) == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Err(_) => {
                // vanishing sine transform inside the bracket: treat the
                // midpoint as the active edge to converge onto it, the
                // residual check below will reject the pole
                lo = mid;
                sign_lo = true;
            }
        }
    }
    let omega = 0.5 * (lo + hi);
    let g = g_of_omega(params, omega).ok()?;
    if (g - params.delta).abs() > CROSSING_RESIDUAL_TOL * params.delta.abs().max(1.0) {
        return None;
    }
    let (c, s) = params.density.weighted_cos_sin(params.gamma, omega);
    if s <= 0.0 || 1.0 - 2.0 * c <= 0.0 {
        return None;
    }
    let (cp, sp) = params.density.weighted_cos_sin_prime(params.gamma, omega);
    // g'(omega) from the quotient rule
    let g_prime = ((1.0 - 2.0 * c) - 2.0 * omega * cp) / (2.0 * s) - g * sp / s;
    Some(CrossingCandidate {
        omega,
        c,
        s,
        beta_star_c: -params.delta / (1.0 - 2.0 * c),
        g_prime,
    })
}

/// Solve `beta*(n) = beta_star_c` for the Hill sensitivity on `(1, 10]`.
///
/// With every other parameter fixed the gain is continuous and strictly
/// decreasing in `n`, positive near `n = 1`, so a bracket exists whenever
/// the critical gain is reachable.
fn invert_sensitivity(params: &ModelParams, beta_star_c: f64) -> Result<f64> {
    let gain_at = |n: f64| -> Option<f64> {
        let hill = crate::model::HillRate::new(params.hill.beta0, params.hill.theta, n).ok()?;
        let p = ModelParams::new(params.delta, params.gamma, hill, params.density.clone()).ok()?;
        model::positive_equilibrium(&p).map(|e| e.beta_star)
    };
    let mut lo = 1.0 + 1e-9;
    let mut hi = 10.0;
    let glo = gain_at(lo).ok_or(Error::NoInversion { beta_star_c })?;
    let ghi = gain_at(hi).ok_or(Error::NoInversion { beta_star_c })?;
    if !(glo > beta_star_c && ghi <= beta_star_c) {
        return Err(Error::NoInversion { beta_star_c });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match gain_at(mid) {
            Some(g) if g > beta_star_c => lo = mid,
            Some(_) => hi = mid,
            None => return Err(Error::NoInversion { beta_star_c }),
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Classify the extinction equilibrium from the existence threshold.
pub fn classify_trivial(params: &ModelParams) -> (TrivialStability, ExistenceReport) {
    let existence = model::existence(params);
    let verdict = if existence.boundary {
        TrivialStability::Boundary
    } else if params.delta > existence.threshold_alpha {
        TrivialStability::GloballyStable
    } else {
        TrivialStability::Unstable
    };
    (verdict, existence)
}

/// Classify the positive equilibrium, reusing an already located Hopf point.
pub fn classify_positive_with(
    params: &ModelParams,
    equilibrium: &Equilibrium,
    hopf: &Result<HopfResult>,
    moments: &KernelMoments,
) -> PositiveStability {
    let delta_tilde = -params.delta / (2.0 * moments.k + 1.0);
    let beta_star = equilibrium.beta_star;
    if beta_star >= delta_tilde {
        return PositiveStability::StableGainBound;
    }
    match hopf {
        Ok(h) if h.degenerate => PositiveStability::Indeterminate,
        Ok(h) => {
            if (beta_star - h.beta_star_c).abs() <= HOPF_CRITICAL_GAIN_TOL {
                PositiveStability::HopfCritical
            } else if beta_star > h.beta_star_c {
                PositiveStability::StablePreHopf
            } else {
                PositiveStability::UnstablePostHopf
            }
        }
        // no crossing found below the gain bound: nothing to compare against
        Err(_) => PositiveStability::Indeterminate,
    }
}

/// Full stability report for the current parameters.
pub fn classify(params: &ModelParams) -> StabilityReport {
    let moments = params.moments();
    let (trivial, existence) = classify_trivial(params);
    let delta_tilde = -params.delta / (2.0 * moments.k + 1.0);
    let positive_eq = model::positive_equilibrium(params);
    let mut details = StabilityDetails {
        k: moments.k,
        threshold_alpha: existence.threshold_alpha,
        delta_tilde,
        beta_star: positive_eq.map(|e| e.beta_star),
        beta_star_c: None,
        omega_c: None,
    };
    let positive = positive_eq.map(|e| {
        if e.beta_star >= delta_tilde {
            PositiveStability::StableGainBound
        } else {
            let hopf = hopf_locate(params, default_omega_max(params), 20_000);
            if let Ok(h) = &hopf {
                details.beta_star_c = Some(h.beta_star_c);
                details.omega_c = Some(h.omega_c);
            }
            classify_positive_with(params, &e, &hopf, &moments)
        }
    });
    StabilityReport { trivial, positive, delta_tilde, details }
}

/// Rectangle in the complex plane for the root probe.
#[derive(Debug, Clone, Copy)]
pub struct ComplexBox {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

/// Grid-scan `|D|` for local minima in the box and polish each by Newton
/// iteration on `D`; returns distinct roots with residual below 1e-9,
/// sorted by descending real part.
pub fn char_roots_in_box(
    params: &ModelParams,
    beta_star: f64,
    search: ComplexBox,
    grid: (usize, usize),
) -> Vec<Complex64> {
    let (n_re, n_im) = (grid.0.max(8), grid.1.max(8));
    let d = |l: Complex64| char_nontrivial(params, beta_star, l);
    let at = |i: usize, j: usize| {
        Complex64::new(
            search.re.0 + (search.re.1 - search.re.0) * i as f64 / n_re as f64,
            search.im.0 + (search.im.1 - search.im.0) * j as f64 / n_im as f64,
        )
    };
    let mut mags = vec![vec![0.0; n_im + 1]; n_re + 1];
    for (i, row) in mags.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = d(at(i, j)).norm();
        }
    }
    let mut roots: Vec<Complex64> = Vec::new();
    for i in 0..=n_re {
        for j in 0..=n_im {
            let m = mags[i][j];
            let mut is_min = true;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (pi, pj) = (i as i64 + di, j as i64 + dj);
                if pi >= 0
                    && pi <= n_re as i64
                    && pj >= 0
                    && pj <= n_im as i64
                    && mags[pi as usize][pj as usize] < m
                {
                    is_min = false;
                    break;
                }
            }
            if !is_min {
                continue;
            }
            // Newton polish
            let mut lambda = at(i, j);
            let mut ok = false;
            for _ in 0..80 {
                let val = d(lambda);
                if val.norm() < 1e-12 {
                    ok = true;
                    break;
                }
                let dp = char_nontrivial_prime(params, beta_star, lambda);
                if dp.norm() < 1e-14 {
                    break;
                }
                let step = val / dp;
                lambda -= step;
                if step.norm() < 1e-13 * (1.0 + lambda.norm()) {
                    ok = d(lambda).norm() < 1e-9;
                    break;
                }
            }
            if !ok || d(lambda).norm() >= 1e-9 {
                continue;
            }
            let margin_re = 1e-6 * (1.0 + (search.re.1 - search.re.0).abs());
            let margin_im = 1e-6 * (1.0 + (search.im.1 - search.im.0).abs());
            if lambda.re < search.re.0 - margin_re
                || lambda.re > search.re.1 + margin_re
                || lambda.im < search.im.0 - margin_im
                || lambda.im > search.im.1 + margin_im
            {
                continue;
            }
            if roots.iter().all(|r| (r - lambda).norm() > 1e-6) {
                roots.push(lambda);
            }
        }
    }
    roots.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    roots
}
