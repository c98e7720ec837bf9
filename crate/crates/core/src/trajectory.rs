//! Piecewise cubic dense-output trajectories for `(x(t), y(t))`.

/// Cubic in the local coordinate `u = (t - t0)/(t1 - t0)`, stored as
/// coefficients of `c0 + u (c1 + u (c2 + u c3))`.
#[derive(Debug, Clone, Copy)]
pub struct Cubic {
    pub c: [f64; 4],
}

impl Cubic {
    /// Hermite cubic from endpoint values and derivatives over a step of
    /// width `h` (derivatives are with respect to `t`, not `u`).
    pub fn hermite(v0: f64, d0: f64, v1: f64, d1: f64, h: f64) -> Self {
        let dv = v1 - v0;
        Self {
            c: [
                v0,
                h * d0,
                3.0 * dv - h * (2.0 * d0 + d1),
                -2.0 * dv + h * (d0 + d1),
            ],
        }
    }

    pub fn constant(v: f64) -> Self {
        Self { c: [v, 0.0, 0.0, 0.0] }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.c[0] + u * (self.c[1] + u * (self.c[2] + u * self.c[3]))
    }

    /// Derivative with respect to `t` over a step of width `h`.
    #[inline]
    pub fn deriv(&self, u: f64, h: f64) -> f64 {
        (self.c[1] + u * (2.0 * self.c[2] + u * 3.0 * self.c[3])) / h
    }
}

/// One dense-output step holding interpolants for both components.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub x: Cubic,
    pub y: Cubic,
}

impl Segment {
    #[inline]
    pub fn width(&self) -> f64 {
        self.t1 - self.t0
    }

    #[inline]
    pub fn local(&self, t: f64) -> f64 {
        (t - self.t0) / (self.t1 - self.t0)
    }
}

/// Contiguous, non-overlapping dense-output solution on `[t_start, t_end]`.
///
/// Adjacent segments share endpoint values exactly, so evaluation is
/// continuous across the whole span. Evaluation clamps to the span.
#[derive(Debug, Clone)]
pub struct Trajectory {
    segments: Vec<Segment>,
    t_start: f64,
    /// State at `t_start`, so a zero-segment trajectory (a single point)
    /// still evaluates.
    initial: (f64, f64),
}

impl Trajectory {
    pub fn new(t_start: f64, x0: f64, y0: f64) -> Self {
        Self { segments: Vec::new(), t_start, initial: (x0, y0) }
    }

    /// Constant trajectory on `[t0, t1]`, split into `nseg` equal segments.
    pub fn constant(x: f64, y: f64, t0: f64, t1: f64, nseg: usize) -> Self {
        let mut traj = Self::new(t0, x, y);
        let nseg = nseg.max(1);
        let h = (t1 - t0) / nseg as f64;
        for i in 0..nseg {
            traj.push(Segment {
                t0: t0 + i as f64 * h,
                t1: t0 + (i + 1) as f64 * h,
                x: Cubic::constant(x),
                y: Cubic::constant(y),
            });
        }
        traj
    }

    /// Append a segment; it must start where the trajectory currently ends.
    pub fn push(&mut self, seg: Segment) {
        debug_assert!(
            (seg.t0 - self.t_end()).abs() <= 1e-9 * seg.width().abs().max(1.0),
            "segment does not continue the trajectory"
        );
        self.segments.push(seg);
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(self.t_start, |s| s.t1)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Width of the segments if they are all equal (within 1e-9 relative).
    pub fn uniform_step(&self) -> Option<f64> {
        let first = self.segments.first()?.width();
        for s in &self.segments {
            if (s.width() - first).abs() > 1e-9 * first {
                return None;
            }
        }
        Some(first)
    }

    /// Index of the segment containing `t` (clamped to the span).
    pub fn locate(&self, t: f64) -> Option<usize> {
        if self.segments.is_empty() {
            return None;
        }
        if t <= self.t_start {
            return Some(0);
        }
        let last = self.segments.len() - 1;
        if t >= self.segments[last].t1 {
            return Some(last);
        }
        // segments are sorted by t0; find the last with t0 <= t
        let idx = self
            .segments
            .partition_point(|s| s.t0 <= t)
            .saturating_sub(1);
        Some(idx)
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self.locate(t) {
            None => self.initial,
            Some(i) => {
                let s = &self.segments[i];
                let u = s.local(t.clamp(self.t_start, self.t_end()));
                (s.x.eval(u), s.y.eval(u))
            }
        }
    }

    pub fn eval_x(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn eval_y(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    /// Derivative of the interpolant (one-sided at segment boundaries).
    pub fn deriv_x(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => 0.0,
            Some(i) => {
                let s = &self.segments[i];
                s.x.deriv(s.local(t.clamp(self.t_start, self.t_end())), s.width())
            }
        }
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let slack = 1e-9 * (1.0 + hi.abs());
        self.t_start <= lo + slack && self.t_end() >= hi - slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubic() {
        // p(t) = 2 + 3t - t^2 + 0.5 t^3 on [1, 3]
        let p = |t: f64| 2.0 + 3.0 * t - t * t + 0.5 * t * t * t;
        let dp = |t: f64| 3.0 - 2.0 * t + 1.5 * t * t;
        let c = Cubic::hermite(p(1.0), dp(1.0), p(3.0), dp(3.0), 2.0);
        for i in 0..=10 {
            let u = i as f64 / 10.0;
            let t = 1.0 + 2.0 * u;
            assert!((c.eval(u) - p(t)).abs() < 1e-12);
            assert!((c.deriv(u, 2.0) - dp(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn continuity_and_lookup() {
        let mut traj = Trajectory::new(0.0, 1.0, 0.0);
        let mut v = 1.0;
        for i in 0..50 {
            let t0 = i as f64 * 0.1;
            let t1 = t0 + 0.1;
            let v1 = v + 0.01 * (i as f64).sin();
            traj.push(Segment {
                t0,
                t1,
                x: Cubic::hermite(v, 0.3, v1, -0.2, 0.1),
                y: Cubic::constant(0.0),
            });
            v = v1;
        }
        let step = traj.uniform_step().unwrap();
        assert!((step - 0.1).abs() < 1e-12);
        for i in 1..50 {
            let t = i as f64 * 0.1;
            let left = traj.segments()[i - 1];
            let right = traj.segments()[i];
            let rel = (left.x.eval(1.0) - right.x.eval(0.0)).abs()
                / left.x.eval(1.0).abs().max(1e-300);
            assert!(rel <= 1e-12);
            let _ = t;
        }
        assert!(traj.covers(0.0, 5.0));
        assert!(!traj.covers(-0.5, 5.0));
        // clamped evaluation
        assert_eq!(traj.eval(-1.0).0, traj.eval(0.0).0);
        assert_eq!(traj.eval(9.0).0, traj.eval(5.0).0);
    }
}
