//! Trajectory post-processing: period and amplitude estimation, convergence
//! detection, and the limit-transfer consistency check between the two
//! components.

use crate::model::{Equilibrium, ModelParams};
use crate::trajectory::Trajectory;
use crate::{Error, Result};
use serde::Serialize;

/// Which component of the trajectory to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Component {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PeriodMethod {
    PeakToPeak,
}

/// Peak-to-peak period estimate over an analysis window.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodEstimate {
    /// Mean gap between successive qualifying maxima, days.
    pub period: f64,
    /// Standard error of the mean gap, days.
    pub period_stderr: f64,
    /// Number of gaps entering the mean.
    pub n_cycles: usize,
    /// Extrema of the component over the window.
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub method: PeriodMethod,
    /// True when the standard error is within 5% of the period.
    pub confident: bool,
}

/// Relative floor used in place of a vanishing equilibrium coordinate.
fn eps_floor(params: &ModelParams) -> f64 {
    1e-9 * params.hill.theta
}

/// Detect strict local maxima of a component by dense-output sampling at
/// half the trajectory's step, refine each peak with a three-point parabola,
/// and average the gaps between successive qualifying maxima.
///
/// A maximum qualifies when it exceeds the window mean by 0.5% of the mean
/// level, which drops sub-mean shoulder bumps of relaxation cycles. Fewer
/// than three qualifying maxima is reported as not oscillating.
pub fn estimate_period(
    traj: &Trajectory,
    component: Component,
    t_discard: f64,
    params: &ModelParams,
) -> Result<PeriodEstimate> {
    let t0 = traj.t_start().max(t_discard);
    let t1 = traj.t_end();
    if t1 <= t0 {
        return Err(Error::Precondition(format!(
            "analysis window [{t0}, {t1}] is empty"
        )));
    }
    let stride = traj
        .uniform_step()
        .or_else(|| traj.segments().iter().map(|s| s.width()).reduce(f64::min))
        .unwrap_or((t1 - t0) / 1e4)
        / 2.0;
    let n = ((t1 - t0) / stride).floor() as usize;
    let pick = |t: f64| match component {
        Component::X => traj.eval_x(t),
        Component::Y => traj.eval_y(t),
    };
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let values: Vec<f64> = (0..=n)
        .map(|i| {
            let v = pick(t0 + i as f64 * stride);
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
            v
        })
        .collect();
    let mean = sum / (n + 1) as f64;
    let threshold = mean + 0.005 * mean.abs().max(eps_floor(params));

    let mut peaks = Vec::new();
    for i in 1..n {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b > c && b > threshold {
            // parabolic refinement of the peak position
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            peaks.push(t0 + (i as f64 + shift) * stride);
        }
    }
    if peaks.len() < 3 {
        return Err(Error::NotOscillating { found: peaks.len() });
    }
    let gaps: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let m = gaps.len() as f64;
    let period = gaps.iter().sum::<f64>() / m;
    let var = gaps.iter().map(|g| (g - period) * (g - period)).sum::<f64>() / (m - 1.0).max(1.0);
    let period_stderr = (var / m).sqrt();
    Ok(PeriodEstimate {
        period,
        period_stderr,
        n_cycles: gaps.len(),
        amplitude_min: lo,
        amplitude_max: hi,
        method: PeriodMethod::PeakToPeak,
        confident: period_stderr <= 0.05 * period,
    })
}

/// Outcome of a convergence check over the final window.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Convergence {
    Converged { max_deviation: f64 },
    NotConverged { max_deviation: f64 },
}

impl Convergence {
    pub fn converged(&self) -> bool {
        matches!(self, Convergence::Converged { .. })
    }

    pub fn max_deviation(&self) -> f64 {
        match self {
            Convergence::Converged { max_deviation } | Convergence::NotConverged { max_deviation } => {
                *max_deviation
            }
        }
    }
}

/// Maximum relative deviation of both components from the target equilibrium
/// over the final `window` days; converged when below 2%.
pub fn convergence_check(
    traj: &Trajectory,
    target: &Equilibrium,
    window: f64,
    params: &ModelParams,
) -> Result<Convergence> {
    let t1 = traj.t_end();
    let t0 = t1 - window;
    if t0 <= traj.t_start() {
        return Err(Error::Precondition(format!(
            "trajectory span must exceed the window of {window} days"
        )));
    }
    let eps = eps_floor(params);
    let stride = traj.uniform_step().unwrap_or(window / 1e4) / 2.0;
    let n = (window / stride).floor() as usize;
    let mut max_dev: f64 = 0.0;
    for i in 0..=n {
        let t = t0 + i as f64 * stride;
        let (x, y) = traj.eval(t);
        max_dev = max_dev.max((x - target.x_star).abs() / target.x_star.max(eps));
        max_dev = max_dev.max((y - target.y_star).abs() / target.y_star.max(eps));
    }
    Ok(if max_dev < 0.02 {
        Convergence::Converged { max_deviation: max_dev }
    } else {
        Convergence::NotConverged { max_deviation: max_dev }
    })
}

/// Residual of the limit transfer from `x` to `y`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitTransferResidual {
    /// The resting mass used as the limit `C` of `x`.
    pub limit_x: f64,
    /// Predicted limit `beta(C) C y0w` of `y`.
    pub predicted_y: f64,
    pub abs_dev: f64,
    /// `abs_dev / max(y*, eps)` with `y*` of the positive equilibrium (or
    /// the floor when only extinction exists).
    pub rel_dev: f64,
}

/// When `x(t)` settles to a limit `C`, the proliferating mass must settle to
/// `beta(C) C y0w` (the mean-age weighted flux). Compares `y(t_end)` against
/// that prediction using `C = x(t_end)`.
pub fn y_limit_check(traj: &Trajectory, params: &ModelParams) -> LimitTransferResidual {
    let (limit_x, y_end) = traj.eval(traj.t_end());
    let m = params.moments();
    let predicted_y = params.hill.flux(limit_x) * m.y0w;
    let abs_dev = (y_end - predicted_y).abs();
    let y_scale = crate::model::positive_equilibrium(params)
        .map(|e| e.y_star)
        .unwrap_or(0.0)
        .max(eps_floor(params));
    LimitTransferResidual {
        limit_x,
        predicted_y,
        abs_dev,
        rel_dev: abs_dev / y_scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{self, HistoryConfig};
    use crate::integrator::{integrate, IntegratorConfig};
    use crate::kernel::DivisionDensity;
    use crate::model::{self, HillRate};
    use crate::trajectory::{Cubic, Segment};

    fn baseline_params(n: f64) -> ModelParams {
        ModelParams::new(
            0.05,
            0.2,
            HillRate::new(1.77, 1.0, n).unwrap(),
            DivisionDensity::uniform(0.0, 7.0).unwrap(),
        )
        .unwrap()
    }

    fn run(params: &ModelParams, t_end: f64, step: f64) -> Trajectory {
        let hist = history::build(params, &HistoryConfig { mu: 1.0, step: Some(step) }).unwrap();
        integrate(params, &hist, &IntegratorConfig { step, correction_passes: 2, t_end }).unwrap()
    }

    /// Dense trajectory sampling a closed-form signal with exact slopes.
    fn synthetic(f: impl Fn(f64) -> (f64, f64), t_end: f64, h: f64) -> Trajectory {
        let n = (t_end / h).round() as usize;
        let (v0, d0) = f(0.0);
        let mut traj = Trajectory::new(0.0, v0, 0.0);
        let mut prev = (v0, d0);
        for i in 0..n {
            let t1 = (i + 1) as f64 * h;
            let cur = f(t1);
            traj.push(Segment {
                t0: i as f64 * h,
                t1,
                x: Cubic::hermite(prev.0, prev.1, cur.0, cur.1, h),
                y: Cubic::constant(0.0),
            });
            prev = cur;
        }
        traj
    }

    #[test]
    fn constant_trajectory_is_not_oscillating() {
        let p = baseline_params(3.0);
        let traj = Trajectory::constant(1.0, 1.0, 0.0, 500.0, 5000);
        assert!(matches!(
            estimate_period(&traj, Component::X, 100.0, &p),
            Err(Error::NotOscillating { .. })
        ));
    }

    #[test]
    fn synthetic_sine_period() {
        let p = baseline_params(3.0);
        let period = 45.0;
        let w = 2.0 * std::f64::consts::PI / period;
        let traj = synthetic(
            |t| (1.0 + 0.3 * (w * t).sin(), 0.3 * w * (w * t).cos()),
            1000.0,
            0.05,
        );
        let est = estimate_period(&traj, Component::X, 100.0, &p).unwrap();
        assert!((est.period - 45.0).abs() < 0.1, "period = {}", est.period);
        assert!(est.confident);
        assert!((est.amplitude_max - 1.3).abs() < 1e-3);
        assert!((est.amplitude_min - 0.7).abs() < 1e-3);
    }

    #[test]
    fn tiny_oscillation_is_filtered() {
        let p = baseline_params(3.0);
        let w = 2.0 * std::f64::consts::PI / 45.0;
        // 0.4% relative amplitude: below the 0.5% qualification threshold
        let traj = synthetic(
            |t| (1.0 + 0.004 * (w * t).sin(), 0.004 * w * (w * t).cos()),
            1000.0,
            0.05,
        );
        assert!(matches!(
            estimate_period(&traj, Component::X, 100.0, &p),
            Err(Error::NotOscillating { .. })
        ));
    }

    #[test]
    fn convergence_on_oscillating_and_settling_runs() {
        // damped regime converges to the positive equilibrium
        let p = baseline_params(2.42);
        let traj = run(&p, 1000.0, 0.02);
        let e = model::positive_equilibrium(&p).unwrap();
        let check = convergence_check(&traj, &e, 200.0, &p).unwrap();
        assert!(check.converged(), "deviation {}", check.max_deviation());

        // oscillating regime does not converge
        let p3 = baseline_params(3.0);
        let traj3 = run(&p3, 700.0, 0.02);
        let e3 = model::positive_equilibrium(&p3).unwrap();
        assert!(!convergence_check(&traj3, &e3, 200.0, &p3).unwrap().converged());
    }

    #[test]
    fn extinction_run_converges_to_origin() {
        let p = ModelParams::new(
            0.3,
            0.2,
            HillRate::new(1.77, 1.0, 3.0).unwrap(),
            DivisionDensity::uniform(0.0, 7.0).unwrap(),
        )
        .unwrap();
        let traj = run(&p, 1500.0, 0.02);
        let trivial = model::equilibria(&p)[0];
        let check = convergence_check(&traj, &trivial, 200.0, &p).unwrap();
        assert!(check.converged(), "deviation {}", check.max_deviation());
        // the proliferating mass drains with the resting mass
        let res = y_limit_check(&traj, &p);
        assert!(res.abs_dev < 1e-6 && traj.eval_y(1500.0) < 1e-6);
    }

    #[test]
    fn limit_transfer_on_damped_run() {
        let p = baseline_params(2.42);
        let traj = run(&p, 1000.0, 0.02);
        let res = y_limit_check(&traj, &p);
        assert!(res.rel_dev < 1e-3, "relative residual {}", res.rel_dev);
    }

    #[test]
    fn limit_transfer_without_apoptosis() {
        // gamma = 0 branch: the predicted limit uses the mean division age
        let p = ModelParams::new(
            0.5,
            0.0,
            HillRate::new(1.77, 1.0, 1.5).unwrap(),
            DivisionDensity::uniform(0.0, 7.0).unwrap(),
        )
        .unwrap();
        let e = model::positive_equilibrium(&p).unwrap();
        // stable by the gain bound, so the run settles
        let traj = run(&p, 600.0, 0.02);
        let check = convergence_check(&traj, &e, 100.0, &p).unwrap();
        assert!(check.converged(), "deviation {}", check.max_deviation());
        let res = y_limit_check(&traj, &p);
        assert!(res.rel_dev < 1e-3, "relative residual {}", res.rel_dev);
        // and the prediction indeed uses ∫ tau f dtau = 3.5
        let m = p.moments();
        assert!((m.y0w - 3.5).abs() < 1e-12);
    }

    #[test]
    fn oscillation_period_transfers_between_components() {
        let p = baseline_params(3.0);
        let traj = run(&p, 900.0, 0.02);
        let px = estimate_period(&traj, Component::X, 300.0, &p).unwrap();
        let py = estimate_period(&traj, Component::Y, 300.0, &p).unwrap();
        assert!((px.period - py.period).abs() / px.period < 0.02);
        assert!(px.n_cycles >= 3 && py.n_cycles >= 3);
    }

    #[test]
    fn period_grows_with_sensitivity() {
        let mut periods = Vec::new();
        for n in [2.53, 3.0, 4.0] {
            let p = baseline_params(n);
            let traj = run(&p, 800.0, 0.02);
            periods.push(estimate_period(&traj, Component::X, 300.0, &p).unwrap().period);
        }
        assert!(
            periods[0] < periods[1] && periods[1] < periods[2],
            "periods not increasing: {periods:?}"
        );
    }

    #[test]
    fn simulated_period_matches_linear_prediction_at_onset() {
        let base = baseline_params(3.0);
        let hopf = crate::stability::hopf_locate(
            &base,
            crate::stability::default_omega_max(&base),
            20_000,
        )
        .unwrap();
        let p = baseline_params(hopf.n_c.unwrap());
        let traj = run(&p, 800.0, 0.02);
        let est = estimate_period(&traj, Component::X, 300.0, &p).unwrap();
        let rel = (est.period - hopf.period).abs() / hopf.period;
        assert!(rel < 0.10, "simulated {} vs linear {}", est.period, hopf.period);
    }
}
