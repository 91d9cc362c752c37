//! Smooth cutoff primitives: the exp(-1/t) step, plateau windows that are
//! exactly 0 off their support and exactly 1 on their core, and the
//! unit-mass time profile used by schedule windows.
//!
//! Exact zeros and ones matter more than speed here. `cutoff` underflows to
//! literal 0.0 for small positive arguments and the step saturates to
//! literal 1.0 near the top, so membership tests downstream can rely on
//! bit-exact values outside the transition ring.

/// f(t) = exp(-1/t) for t > 0, else 0. Smooth on all of R, flat at 0.
pub fn cutoff(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Derivative of [`cutoff`]: exp(-1/t)/t^2 for t > 0, else 0.
pub fn cutoff_d(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp() / (t * t)
    }
}

/// Smooth monotone step: 0 for t <= 0, 1 for t >= 1.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = cutoff(t);
        let b = cutoff(1.0 - t);
        a / (a + b)
    }
}

/// Derivative of [`smoothstep`]. Vanishes to all orders at 0 and 1, and
/// integrates to exactly 1 over [0, 1], which is what makes it the natural
/// unit-mass profile for schedule windows.
pub fn smoothstep_d(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = cutoff(t);
        let b = cutoff(1.0 - t);
        let da = cutoff_d(t);
        let db = cutoff_d(1.0 - t);
        let s = a + b;
        (da * b + a * db) / (s * s)
    }
}

/// One-dimensional plateau: exactly 1 on [lo, hi], exactly 0 outside
/// (lo - margin, hi + margin), smooth in between.
#[derive(Debug, Clone, Copy)]
pub struct Plateau1 {
    pub lo: f64,
    pub hi: f64,
    pub margin: f64,
}

impl Plateau1 {
    pub fn new(lo: f64, hi: f64, margin: f64) -> Self {
        debug_assert!(lo <= hi && margin > 0.0);
        Plateau1 { lo, hi, margin }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let rise = smoothstep((x - (self.lo - self.margin)) / self.margin);
        if rise == 0.0 {
            return 0.0;
        }
        rise * smoothstep(((self.hi + self.margin) - x) / self.margin)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let u = (x - (self.lo - self.margin)) / self.margin;
        let v = ((self.hi + self.margin) - x) / self.margin;
        (smoothstep_d(u) * smoothstep(v) - smoothstep(u) * smoothstep_d(v)) / self.margin
    }
}

/// Plateau in the circular clock variable, centered on s = 0 (mod 1):
/// exactly 1 for circular distance <= core, exactly 0 beyond support.
#[derive(Debug, Clone, Copy)]
pub struct ClockPlateau {
    pub core: f64,
    pub support: f64,
}

impl ClockPlateau {
    pub fn new(core: f64, support: f64) -> Self {
        debug_assert!(0.0 < core && core < support && support < 0.5);
        ClockPlateau { core, support }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let d = circle_dist(s, 0.0);
        smoothstep((self.support - d) / (self.support - self.core))
    }

    /// d/ds of the plateau; the distance kink at s = 1/2 sits deep inside
    /// the zero region, so the result is smooth wherever it is nonzero.
    pub fn deriv(&self, s: f64) -> f64 {
        let sm = s.rem_euclid(1.0);
        let (d, dd_ds) = if sm <= 0.5 {
            (sm, 1.0)
        } else {
            (1.0 - sm, -1.0)
        };
        let w = self.support - self.core;
        -smoothstep_d((self.support - d) / w) / w * dd_ds
    }
}

/// Distance between two angles on the unit circle R/Z.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}
