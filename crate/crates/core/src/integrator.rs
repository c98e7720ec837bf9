//! Fixed-step integrator with dense output for the delayed system.
//!
//! The macro step is classical four-stage Runge–Kutta with a cubic Hermite
//! interpolant per step. The delayed gain
//!
//! ```text
//!   2 ∫ e^{-gamma tau} f(tau) beta(x(t - tau)) x(t - tau) dtau
//! ```
//!
//! is evaluated against the stored dense output by composite Gauss–Legendre
//! panels aligned to the step grid, so a panel never straddles a step
//! boundary and in particular never straddles the boundary between accepted
//! history and the current step. Because the minimal delay may be zero,
//! mid-step stages read a provisional Hermite extension of the current step
//! which is refined by fixed-point sweeps.
//!
//! On the uniform grid the kernel factor of every (stage offset, lag) pair
//! is the same at every step, so the factors are tabulated once and each
//! delay evaluation over accepted history reduces to dot products with
//! cached flux values at the panel nodes.

use crate::kernel::{DensityKind, GL8_NODES, GL8_WEIGHTS};
use crate::model::ModelParams;
use crate::trajectory::{Cubic, Segment, Trajectory};
use crate::{Error, Result};

/// Configuration of a fixed-step integration.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    /// Macro step, days. The effective step is `tau_max / ceil(tau_max/step)`
    /// so the kernel support is an exact number of steps.
    pub step: f64,
    /// Fixed-point refinements of the provisional extension, at least one.
    pub correction_passes: usize,
    /// Final time, days; must exceed `tau_max`.
    pub t_end: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { step: 0.01, correction_passes: 2, t_end: 1000.0 }
    }
}

impl IntegratorConfig {
    /// Check the configuration against the model and return the effective
    /// (snapped) step.
    pub fn validate(&self, params: &ModelParams) -> Result<f64> {
        let tau_max = params.density.tau_max();
        let tau_min = params.density.tau_min();
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if self.correction_passes < 1 {
            return Err(Error::Config("correction_passes must be at least 1".into()));
        }
        if self.t_end.is_nan() || self.t_end <= tau_max {
            return Err(Error::Config(format!(
                "t_end ({}) must exceed tau_max ({tau_max})",
                self.t_end
            )));
        }
        let h = snap_step(self.step, tau_max);
        if h > (tau_max - tau_min) / 16.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "step {h} too coarse: the kernel support must be resolved by at least 16 steps"
            )));
        }
        Ok(h)
    }
}

/// Largest step not exceeding `step` (up to rounding) that divides `tau_max`.
pub(crate) fn snap_step(step: f64, tau_max: f64) -> f64 {
    let n = (tau_max / step - 1e-9).ceil().max(1.0);
    tau_max / n
}

/// The delayed gain functional of the autonomous system,
/// `2 ∫_{tau_min}^{tau_max} e^{-gamma tau} f(tau) beta(x(t-tau)) x(t-tau) dtau`,
/// read from the trajectory's dense output with quadrature panels aligned to
/// its segment boundaries and to the density's knots.
pub fn delay_functional(traj: &Trajectory, params: &ModelParams, t: f64) -> Result<f64> {
    let tau_min = params.density.tau_min();
    let tau_max = params.density.tau_max();
    if !traj.covers(t - tau_max, t - tau_min) {
        return Err(Error::Coverage {
            need_lo: t - tau_max,
            need_hi: t - tau_min,
            have_lo: traj.t_start(),
            have_hi: traj.t_end(),
        });
    }
    Ok(2.0 * lag_integral_over_trajectory(traj, params, t, t - tau_max, t - tau_min))
}

/// `∫ e^{-gamma (t-s)} f(t-s) beta(x(s)) x(s) ds` over `[a, b]` with panels
/// aligned to the trajectory's segments and to the density's knots.
fn lag_integral_over_trajectory(
    traj: &Trajectory,
    params: &ModelParams,
    t: f64,
    a: f64,
    b: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = vec![a, b];
    for seg in traj.segments() {
        if seg.t0 > a && seg.t0 < b {
            cuts.push(seg.t0);
        }
    }
    for knot in density_knots(params) {
        let s = t - knot;
        if s > a && s < b {
            cuts.push(s);
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let width = hi - lo;
        if width <= 1e-14 * (1.0 + hi.abs()) {
            continue;
        }
        let mut panel = 0.0;
        for (u, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let s = lo + u * width;
            let tau = t - s;
            panel += wt
                * (-params.gamma * tau).exp()
                * params.density.pdf(tau)
                * params.hill.flux(traj.eval_x(s));
        }
        acc += panel * width;
    }
    acc
}

fn density_knots(params: &ModelParams) -> Vec<f64> {
    match params.density.kind() {
        DensityKind::Uniform => vec![params.density.tau_min(), params.density.tau_max()],
        DensityKind::Tabulated { knots, .. } => knots.clone(),
    }
}

/// The explicit representation of the proliferating mass for `t >= tau_max`:
/// `y(t) = ∫ f(tau) ( ∫_{t-tau}^{t} e^{-gamma (t-s)} beta(x(s)) x(s) ds ) dtau`.
///
/// Computed as a double quadrature (outer over `tau`, inner over `s`); the
/// outer panels are aligned to the lag image of the trajectory's step grid so
/// the inner integral is smooth within each outer panel. This is the
/// independent oracle for the integrated `y` component.
pub fn y_explicit(traj: &Trajectory, params: &ModelParams, t: f64) -> Result<f64> {
    let tau_min = params.density.tau_min();
    let tau_max = params.density.tau_max();
    if t < tau_max * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "explicit y needs t >= tau_max, got t = {t}"
        )));
    }
    if !traj.covers(t - tau_max, t) {
        return Err(Error::Coverage {
            need_lo: t - tau_max,
            need_hi: t,
            have_lo: traj.t_start(),
            have_hi: traj.t_end(),
        });
    }
    let mut cuts = density_knots(params);
    for seg in traj.segments() {
        let tau = t - seg.t0;
        if tau > tau_min && tau < tau_max {
            cuts.push(tau);
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup_by(|p, q| (*p - *q).abs() <= 1e-12 * (1.0 + q.abs()));

    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        let mut panel = 0.0;
        for (u, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let tau = lo + u * width;
            panel += wt
                * params.density.pdf(tau)
                * survival_flux_integral(traj, params, t - tau, t, t);
        }
        acc += panel * width;
    }
    Ok(acc)
}

/// Inner integral `∫_a^b e^{-gamma (t-s)} beta(x(s)) x(s) ds`, panels aligned
/// to the trajectory's segments.
fn survival_flux_integral(traj: &Trajectory, params: &ModelParams, a: f64, b: f64, t: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut lo = a;
    let eps = 1e-13 * (1.0 + b.abs());
    while lo < b - eps {
        let hi = match traj.locate(lo + eps) {
            Some(i) => traj.segments()[i].t1.min(b),
            None => b,
        };
        let width = hi - lo;
        if width <= 0.0 {
            break;
        }
        let mut panel = 0.0;
        for (u, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let s = lo + u * width;
            panel += wt * (-params.gamma * (t - s)).exp() * params.hill.flux(traj.eval_x(s));
        }
        acc += panel * width;
        lo = hi;
    }
    acc
}

/// Integrate the autonomous system from a history covering `[0, tau_max]` up
/// to `cfg.t_end`, returning the concatenated trajectory on `[0, t_end]`.
///
/// `y` is integrated as a coupled component with the same Runge–Kutta stages;
/// [`y_explicit`] stays available as an independent check.
pub fn integrate(params: &ModelParams, history: &Trajectory, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let tau_max = params.density.tau_max();
    let h = cfg.validate(params)?;
    if !history.covers(0.0, tau_max) {
        return Err(Error::Precondition(format!(
            "history must cover [0, {tau_max}], got [{}, {}]",
            history.t_start(),
            history.t_end()
        )));
    }
    let sweeps = 1 + cfg.correction_passes;
    let aligned = history.t_start().abs() <= 1e-12
        && history
            .uniform_step()
            .is_some_and(|s| (s - h).abs() <= 1e-9 * h)
        && (history.t_end() - tau_max).abs() <= 1e-9 * (1.0 + tau_max);
    let mut run = if aligned {
        GridRun::with_ingest(params, h, sweeps, history)
    } else {
        GridRun::with_foreign(params, h, sweeps, history, None)
    };
    run.advance_to(cfg.t_end)?;

    let (x_init, y_init) = history.eval(history.t_start());
    let mut out = Trajectory::new(history.t_start(), x_init, y_init);
    for seg in history.segments() {
        out.push(*seg);
    }
    for seg in run.own_segments() {
        out.push(*seg);
    }
    Ok(out)
}

/// Stage position of a delay evaluation on the grid (relative to `origin`).
#[derive(Clone, Copy)]
enum StagePos {
    /// `t = origin + base h`.
    Int(usize),
    /// `t = origin + (base + 1/2) h`.
    Half(usize),
}

/// Source of flux values for one grid panel.
#[derive(Clone, Copy)]
enum PanelSrc<'s> {
    Own(usize),
    Ext(&'s Segment),
}

/// Unified fixed-step runner on a uniform grid.
///
/// The same machinery integrates the history construction (where the delayed
/// range is `[tau_min, min(t, tau_max)]` and the initial-cohort source is
/// active) and the autonomous phase. Data before `origin` may come from a
/// foreign trajectory with its own segmentation.
pub(crate) struct GridRun<'a> {
    params: &'a ModelParams,
    h: f64,
    sweeps: usize,
    /// Grid origin: own segment `j` covers `[origin + j h, origin + (j+1) h]`.
    origin: f64,
    /// Earliest time delayed reads may reach.
    data_start: f64,
    foreign: Option<&'a Trajectory>,
    /// Initial-cohort flux `beta(mu) mu`; `None` in the autonomous phase.
    b_mu: Option<f64>,
    segs: Vec<Segment>,
    wn: Vec<[f64; 8]>,
    /// Leading `own_start` segments were ingested from an aligned history.
    own_start: usize,
    /// Kernel factor tables; `row_int[m-1]` covers lag panel
    /// `[(m-1) h, m h]`, `row_half[m-1]` covers `[(m-1/2) h, (m+1/2) h]`.
    row_int: Vec<[f64; 8]>,
    row_half: Vec<[f64; 8]>,
    int_valid: (usize, usize),
    half_valid: (usize, usize),
    x: f64,
    y: f64,
}

impl<'a> GridRun<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        params: &'a ModelParams,
        h: f64,
        sweeps: usize,
        origin: f64,
        data_start: f64,
        foreign: Option<&'a Trajectory>,
        b_mu: Option<f64>,
        x0: f64,
        y0: f64,
    ) -> Self {
        let tau_min = params.density.tau_min();
        let tau_max = params.density.tau_max();
        let n_rows = (tau_max / h + 1e-9).ceil() as usize + 1;
        let tol = 1e-7 * h;
        let kappa = |tau: f64| (-params.gamma * tau).exp() * params.density.pdf(tau);
        let mut row_int = Vec::with_capacity(n_rows);
        let mut row_half = Vec::with_capacity(n_rows);
        let mut int_valid = (usize::MAX, 0);
        let mut half_valid = (usize::MAX, 0);
        for m in 1..=n_rows {
            let mf = m as f64;
            let mut ri = [0.0; 8];
            let mut rh = [0.0; 8];
            for k in 0..8 {
                ri[k] = h * GL8_WEIGHTS[k] * kappa((mf - GL8_NODES[k]) * h);
                rh[k] = h * GL8_WEIGHTS[k] * kappa((mf + 0.5 - GL8_NODES[k]) * h);
            }
            if (mf - 1.0) * h >= tau_min - tol && mf * h <= tau_max + tol {
                int_valid = (int_valid.0.min(m), int_valid.1.max(m));
            }
            if (mf - 0.5) * h >= tau_min - tol && (mf + 0.5) * h <= tau_max + tol {
                half_valid = (half_valid.0.min(m), half_valid.1.max(m));
            }
            row_int.push(ri);
            row_half.push(rh);
        }
        Self {
            params,
            h,
            sweeps,
            origin,
            data_start,
            foreign,
            b_mu,
            segs: Vec::new(),
            wn: Vec::new(),
            own_start: 0,
            row_int,
            row_half,
            int_valid,
            half_valid,
            x: x0,
            y: y0,
        }
    }

    /// Runner seeded at `t = 0` from the initial resting mass `mu`.
    pub(crate) fn from_scratch(params: &'a ModelParams, h: f64, sweeps: usize, mu: f64) -> Self {
        let b_mu = params.hill.flux(mu);
        let y0 = b_mu * params.moments().y0w;
        Self::new(params, h, sweeps, 0.0, 0.0, None, Some(b_mu), mu, y0)
    }

    /// Runner continuing a grid-aligned history, ingested with node caches.
    fn with_ingest(params: &'a ModelParams, h: f64, sweeps: usize, history: &Trajectory) -> Self {
        let (x0, y0) = history.eval(history.t_end());
        let mut run = Self::new(params, h, sweeps, 0.0, 0.0, None, None, x0, y0);
        for seg in history.segments() {
            let nodes = run.flux_nodes(seg);
            run.wn.push(nodes);
            run.segs.push(*seg);
        }
        run.own_start = run.segs.len();
        run
    }

    /// Runner continuing a foreign trajectory with arbitrary segmentation.
    pub(crate) fn with_foreign(
        params: &'a ModelParams,
        h: f64,
        sweeps: usize,
        foreign: &'a Trajectory,
        b_mu: Option<f64>,
    ) -> Self {
        let origin = foreign.t_end();
        let (x0, y0) = foreign.eval(origin);
        Self::new(
            params,
            h,
            sweeps,
            origin,
            foreign.t_start(),
            Some(foreign),
            b_mu,
            x0,
            y0,
        )
    }

    pub(crate) fn own_segments(&self) -> &[Segment] {
        &self.segs[self.own_start..]
    }

    fn flux_nodes(&self, seg: &Segment) -> [f64; 8] {
        let mut out = [0.0; 8];
        for k in 0..8 {
            out[k] = self.params.hill.flux(seg.x.eval(GL8_NODES[k]));
        }
        out
    }

    /// Initial-cohort source `b_mu ∫_{max(t, tau_min)}^{tau_max} e^{-gamma tau} f dtau`.
    fn mu_term(&self, t: f64) -> f64 {
        match self.b_mu {
            Some(b_mu) if t < self.params.density.tau_max() => {
                b_mu * self.params.density.exp_weighted_tail(self.params.gamma, t)
            }
            _ => 0.0,
        }
    }

    /// `∫ e^{-gamma tau} f(tau) w(x(t-tau)) dtau` over
    /// `[tau_min, min(t - data_start, tau_max)]`.
    fn lag(&self, t: f64, pos: StagePos, ext: Option<&Segment>) -> f64 {
        let tau_min = self.params.density.tau_min();
        let tau_max = self.params.density.tau_max();
        let tau_hi = (t - self.data_start).min(tau_max);
        if tau_hi <= tau_min {
            return 0.0;
        }
        let s_lo = t - tau_hi;
        let s_hi = t - tau_min;
        let mut acc = 0.0;
        if s_lo < self.origin - 1e-12 * (1.0 + self.origin.abs()) {
            let foreign = self
                .foreign
                .expect("reads before the grid origin require a foreign trajectory");
            acc += lag_integral_over_trajectory(foreign, self.params, t, s_lo, s_hi.min(self.origin));
        }
        if s_hi > self.origin {
            acc += self.grid_walk(t, s_lo.max(self.origin), s_hi, pos, ext);
        }
        acc
    }

    /// Grid-aligned portion of the lag integral over `[a, b]`.
    fn grid_walk(&self, t: f64, a: f64, b: f64, pos: StagePos, ext: Option<&Segment>) -> f64 {
        let h = self.h;
        let tol = 1e-7;
        let ra = (a - self.origin) / h;
        let rb = (b - self.origin) / h;
        let j_start = (ra - tol).ceil() as i64;
        let j_end = (rb + tol).floor() as i64;
        if j_start > j_end {
            // the whole range sits strictly inside one segment
            return self.direct_piece(t, a, b, self.src_for(ra.floor() as i64, ext));
        }
        let mut acc = 0.0;
        let lo_edge = self.origin + j_start as f64 * h;
        if lo_edge - a > 1e-9 * h {
            acc += self.direct_piece(t, a, lo_edge, self.src_for(j_start - 1, ext));
        }
        for j in j_start..j_end {
            let m = match pos {
                StagePos::Int(base) => base as i64 - j,
                StagePos::Half(base) => base as i64 - j,
            };
            debug_assert!(m >= 1, "lag panel index must be positive");
            let m = m as usize;
            let row = match pos {
                StagePos::Int(_) if m >= self.int_valid.0 && m <= self.int_valid.1 => {
                    Some(&self.row_int[m - 1])
                }
                StagePos::Half(_) if m >= self.half_valid.0 && m <= self.half_valid.1 => {
                    Some(&self.row_half[m - 1])
                }
                _ => None,
            };
            match (row, self.nodes_for(j, ext)) {
                (Some(row), Some(nodes)) => acc += dot8(row, nodes),
                _ => {
                    let lo = self.origin + j as f64 * h;
                    acc += self.direct_piece(t, lo, lo + h, self.src_for(j, ext));
                }
            }
        }
        let hi_edge = self.origin + j_end as f64 * h;
        if b - hi_edge > 1e-9 * h {
            acc += self.direct_piece(t, hi_edge, b, self.src_for(j_end, ext));
        }
        acc
    }

    /// Cached flux nodes for an accepted own segment, or provisional nodes.
    fn nodes_for(&self, j: i64, ext: Option<&Segment>) -> Option<[f64; 8]> {
        if j >= 0 && (j as usize) < self.segs.len() {
            Some(self.wn[j as usize])
        } else if j as usize == self.segs.len() {
            ext.map(|seg| self.flux_nodes(seg))
        } else {
            None
        }
    }

    fn src_for<'s>(&'s self, j: i64, ext: Option<&'s Segment>) -> PanelSrc<'s> {
        if j >= 0 && (j as usize) < self.segs.len() {
            PanelSrc::Own(j as usize)
        } else {
            PanelSrc::Ext(ext.expect("panel beyond accepted history requires an extension"))
        }
    }

    /// GL8 integral of `kappa(t-s) w(x(s))` over `[a, b]` within one segment,
    /// clipped to the kernel support.
    fn direct_piece(&self, t: f64, a: f64, b: f64, src: PanelSrc) -> f64 {
        let a = a.max(t - self.params.density.tau_max());
        let b = b.min(t - self.params.density.tau_min());
        if b <= a {
            return 0.0;
        }
        let width = b - a;
        let mut acc = 0.0;
        for (u, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let s = a + u * width;
            let tau = t - s;
            let x = match src {
                PanelSrc::Own(j) => {
                    let seg = &self.segs[j];
                    seg.x.eval(seg.local(s))
                }
                PanelSrc::Ext(seg) => seg.x.eval(seg.local(s)),
            };
            acc += wt
                * (-self.params.gamma * tau).exp()
                * self.params.density.pdf(tau)
                * self.params.hill.flux(x);
        }
        acc * width
    }

    /// Time derivatives given the total one-sided delayed gain `i_tot`
    /// (lag integral plus initial-cohort source, before the division factor).
    fn deriv(&self, x: f64, y: f64, i_tot: f64) -> (f64, f64) {
        let b = self.params.hill.eval(x);
        let w = b * x;
        (
            -(self.params.delta + b) * x + 2.0 * i_tot,
            -self.params.gamma * y + w - i_tot,
        )
    }

    fn step(&mut self) -> Result<()> {
        let idx = self.segs.len();
        let h = self.h;
        let t0 = self.origin + idx as f64 * h;
        let t1 = t0 + h;
        let th = t0 + 0.5 * h;

        let i0 = self.lag(t0, StagePos::Int(idx), None) + self.mu_term(t0);
        let (k1x, k1y) = self.deriv(self.x, self.y, i0);

        let src_h = self.mu_term(th);
        let src_1 = self.mu_term(t1);

        // linear provisional extension, refined below
        let mut ext = Segment {
            t0,
            t1,
            x: Cubic::hermite(self.x, k1x, self.x + h * k1x, k1x, h),
            y: Cubic::hermite(self.y, k1y, self.y + h * k1y, k1y, h),
        };
        let (mut xn, mut yn) = (self.x, self.y);
        for _ in 0..self.sweeps {
            let ih = self.lag(th, StagePos::Half(idx), Some(&ext)) + src_h;
            let i1 = self.lag(t1, StagePos::Int(idx + 1), Some(&ext)) + src_1;
            let (k2x, k2y) = self.deriv(self.x + 0.5 * h * k1x, self.y + 0.5 * h * k1y, ih);
            let (k3x, k3y) = self.deriv(self.x + 0.5 * h * k2x, self.y + 0.5 * h * k2y, ih);
            let (k4x, k4y) = self.deriv(self.x + h * k3x, self.y + h * k3y, i1);
            xn = self.x + h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x);
            yn = self.y + h / 6.0 * (k1y + 2.0 * (k2y + k3y) + k4y);
            let (dx1, dy1) = self.deriv(xn, yn, i1);
            ext = Segment {
                t0,
                t1,
                x: Cubic::hermite(self.x, k1x, xn, dx1, h),
                y: Cubic::hermite(self.y, k1y, yn, dy1, h),
            };
        }
        if !(xn.is_finite() && yn.is_finite()) {
            return Err(Error::NonFinite { t: t1 });
        }
        let nodes = self.flux_nodes(&ext);
        self.wn.push(nodes);
        self.segs.push(ext);
        self.x = xn;
        self.y = yn;
        Ok(())
    }

    /// Advance until the trajectory end reaches `t_stop` (within a step).
    pub(crate) fn advance_to(&mut self, t_stop: f64) -> Result<()> {
        let here = self.origin + self.segs.len() as f64 * self.h;
        let remaining = ((t_stop - here) / self.h - 1e-9).ceil().max(0.0) as usize;
        for _ in 0..remaining {
            self.step()?;
        }
        Ok(())
    }
}

#[inline]
fn dot8(a: &[f64; 8], b: [f64; 8]) -> f64 {
    let mut acc = 0.0;
    for k in 0..8 {
        acc += a[k] * b[k];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history;
    use crate::kernel::DivisionDensity;
    use crate::model::{self, HillRate};

    fn baseline_params(n: f64) -> ModelParams {
        ModelParams::new(
            0.05,
            0.2,
            HillRate::new(1.77, 1.0, n).unwrap(),
            DivisionDensity::uniform(0.0, 7.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let p = baseline_params(3.0);
        let bad_step = IntegratorConfig { step: 0.5, ..Default::default() };
        assert!(bad_step.validate(&p).is_err());
        let bad_end = IntegratorConfig { t_end: 5.0, ..Default::default() };
        assert!(bad_end.validate(&p).is_err());
        let bad_passes = IntegratorConfig { correction_passes: 0, ..Default::default() };
        assert!(bad_passes.validate(&p).is_err());
        let h = IntegratorConfig::default().validate(&p).unwrap();
        assert!((h - 0.01).abs() < 1e-12);
    }

    #[test]
    fn delay_functional_zero_history() {
        let p = baseline_params(3.0);
        let traj = Trajectory::constant(0.0, 0.0, 0.0, 10.0, 100);
        assert_eq!(delay_functional(&traj, &p, 9.0).unwrap(), 0.0);
    }

    #[test]
    fn delay_functional_equilibrium_balance() {
        let p = baseline_params(3.0);
        let e = model::positive_equilibrium(&p).unwrap();
        let traj = Trajectory::constant(e.x_star, e.y_star, 0.0, 10.0, 100);
        let gain = delay_functional(&traj, &p, 9.0).unwrap();
        // at a constant resting mass the delayed gain balances the losses
        let loss = (p.delta + p.hill.eval(e.x_star)) * e.x_star;
        assert!((gain - loss).abs() < 1e-10, "gain {gain} vs loss {loss}");
        let m = p.moments();
        assert!((gain - 2.0 * m.k * p.hill.flux(e.x_star)).abs() < 1e-10);
    }

    #[test]
    fn delay_functional_linear_history_oracle() {
        // nearly constant rate (huge theta): the integral of a linear
        // history has closed form 2 beta0 (t k - m1)
        let p = ModelParams::new(
            0.05,
            0.2,
            HillRate::new(1.77, 1e12, 3.0).unwrap(),
            DivisionDensity::uniform(0.0, 7.0).unwrap(),
        )
        .unwrap();
        let t = 10.0;
        let mut traj = Trajectory::new(0.0, 0.0, 0.0);
        for i in 0..100 {
            let (a, b) = (0.1 * i as f64, 0.1 * (i + 1) as f64);
            traj.push(Segment {
                t0: a,
                t1: b,
                x: Cubic::hermite(a, 1.0, b, 1.0, b - a),
                y: Cubic::constant(0.0),
            });
        }
        let m = p.moments();
        let expect = 2.0 * 1.77 * (t * m.k - m.m1);
        let got = delay_functional(&traj, &p, t).unwrap();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn delay_functional_coverage_error() {
        let p = baseline_params(3.0);
        let traj = Trajectory::constant(1.0, 1.0, 0.0, 5.0, 50);
        assert!(matches!(
            delay_functional(&traj, &p, 9.0),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn y_explicit_constant_history() {
        let p = baseline_params(3.0);
        let e = model::positive_equilibrium(&p).unwrap();
        let traj = Trajectory::constant(e.x_star, e.y_star, 0.0, 20.0, 200);
        let y = y_explicit(&traj, &p, 15.0).unwrap();
        assert!((y - e.y_star).abs() / e.y_star < 1e-8, "{y} vs {}", e.y_star);
        let zero = Trajectory::constant(0.0, 0.0, 0.0, 20.0, 200);
        assert_eq!(y_explicit(&zero, &p, 15.0).unwrap(), 0.0);
        assert!(y_explicit(&traj, &p, 3.0).is_err());
    }

    #[test]
    fn integrate_zero_history_stays_zero() {
        let p = baseline_params(3.0);
        let history = Trajectory::constant(0.0, 0.0, 0.0, 7.0, 700);
        let cfg = IntegratorConfig { t_end: 50.0, ..Default::default() };
        let traj = integrate(&p, &history, &cfg).unwrap();
        for i in 0..=100 {
            let (x, y) = traj.eval(50.0 * i as f64 / 100.0);
            assert_eq!(x, 0.0);
            assert_eq!(y, 0.0);
        }
    }

    #[test]
    fn integrate_preserves_positivity_and_bound() {
        let p = baseline_params(3.0);
        let hist = history::build(&p, &history::HistoryConfig { mu: 1.0, step: Some(0.01) }).unwrap();
        let cfg = IntegratorConfig { t_end: 800.0, ..Default::default() };
        let traj = integrate(&p, &hist, &cfg).unwrap();
        // dissipativity bound: x1 = 2 k beta(0) x0 / delta with 2 k beta(x0) = delta
        let m = p.moments();
        let x0 = {
            let target = p.delta / (2.0 * m.k);
            // beta(x0) = target for the Hill rate
            (p.hill.beta0 / target - 1.0).powf(1.0 / p.hill.n)
        };
        let x1 = 2.0 * m.k * p.hill.eval(0.0) * x0 / p.delta;
        let mut hist_max: f64 = 0.0;
        let mut t = 0.0;
        while t <= 7.0 {
            hist_max = hist_max.max(traj.eval_x(t));
            t += 0.01;
        }
        let bound = hist_max.max(x1) * 1.01;
        let mut t = 500.0;
        while t <= 800.0 {
            let (x, y) = traj.eval(t);
            assert!(x >= -1e-12 && y >= -1e-12);
            assert!(x <= bound, "x({t}) = {x} exceeds dissipativity bound {bound}");
            t += 0.05;
        }
    }

    #[test]
    fn integrate_monotone_growth_without_resting_loss() {
        let p = ModelParams::new(
            0.0,
            0.2,
            HillRate::new(1.77, 1.0, 3.0).unwrap(),
            DivisionDensity::uniform(0.0, 7.0).unwrap(),
        )
        .unwrap();
        let hist = history::build(&p, &history::HistoryConfig { mu: 1.0, step: Some(0.02) }).unwrap();
        let cfg = IntegratorConfig { step: 0.02, correction_passes: 2, t_end: 120.0 };
        let traj = integrate(&p, &hist, &cfg).unwrap();
        let mut prev = traj.eval_x(7.0);
        let mut t = 7.02;
        while t <= 120.0 {
            let x = traj.eval_x(t);
            assert!(x > prev, "not increasing at t = {t}");
            prev = x;
            t += 0.02;
        }
    }

    #[test]
    fn fast_and_generic_delay_paths_agree() {
        let p = baseline_params(3.0);
        let hist = history::build(&p, &history::HistoryConfig { mu: 1.0, step: Some(0.02) }).unwrap();
        let cfg = IntegratorConfig { step: 0.02, correction_passes: 2, t_end: 40.0 };
        let traj = integrate(&p, &hist, &cfg).unwrap();
        // the public generic evaluator must match a fresh grid walk at stage points
        let run = GridRun::with_ingest(&p, 0.02, 3, &traj);
        for &t in &[10.0f64, 14.0, 25.5, 39.9] {
            let idx = (t / 0.02).round() as usize;
            let fast = 2.0 * run.lag(idx as f64 * 0.02, StagePos::Int(idx), None);
            let generic = delay_functional(&traj, &p, idx as f64 * 0.02).unwrap();
            assert!(
                (fast - generic).abs() <= 1e-12 * (1.0 + generic.abs()),
                "t = {t}: fast {fast} vs generic {generic}"
            );
        }
    }

    #[test]
    fn integrated_y_matches_explicit_representation() {
        let p = baseline_params(3.0);
        let hist = history::build(&p, &history::HistoryConfig { mu: 1.0, step: Some(0.01) }).unwrap();
        let cfg = IntegratorConfig { t_end: 120.0, ..Default::default() };
        let traj = integrate(&p, &hist, &cfg).unwrap();
        for &t in &[40.0, 100.0] {
            let explicit = y_explicit(&traj, &p, t).unwrap();
            let integrated = traj.eval_y(t);
            let rel = (explicit - integrated).abs() / integrated.abs();
            assert!(rel < 1e-5, "t = {t}: explicit {explicit} vs integrated {integrated}");
        }
    }

    #[test]
    fn foreign_history_ingest_agrees_with_aligned() {
        // integrating from a finer-grid history must land near the aligned run
        let p = baseline_params(2.42);
        let fine = history::build(&p, &history::HistoryConfig { mu: 1.0, step: Some(0.0025) }).unwrap();
        let coarse = history::build(&p, &history::HistoryConfig { mu: 1.0, step: Some(0.02) }).unwrap();
        let cfg = IntegratorConfig { step: 0.02, correction_passes: 2, t_end: 30.0 };
        let a = integrate(&p, &fine, &cfg).unwrap();
        let b = integrate(&p, &coarse, &cfg).unwrap();
        let (xa, xb) = (a.eval_x(30.0), b.eval_x(30.0));
        assert!((xa - xb).abs() < 1e-6, "{xa} vs {xb}");
    }
}
