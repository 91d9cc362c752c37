//! Explicit ODE integration: adaptive Dormand-Prince 5(4) with FSAL and a
//! fixed-step classical RK4, both with bisection-refined event detection.
//!
//! Events are scalar functions g(t, y); integration stops at the first
//! accepted step whose endpoint has g >= 0, and the crossing is refined by
//! bisecting the step length until the time bracket is below the event
//! tolerance.

use serde::{Deserialize, Serialize};

/// Integration method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Dopri5,
    Rk4,
}

/// Tolerances and step policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Dopri5,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: 1e-3,
            event_tol: 1e-9,
            max_steps: 200_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if !(self.max_step > 0.0 && self.event_tol > 0.0) {
            return Err("step bounds must be positive".into());
        }
        Ok(())
    }
}

/// Why the integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Horizon,
    Event,
    StepSizeUnderflow,
    StepBudget,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

#[derive(Debug, Clone)]
pub struct IntegrationOutput {
    pub reason: StopReason,
    pub t: f64,
    pub y: Vec<f64>,
    pub stats: StepStats,
}

/// Scalar event function; integration stops when it turns nonnegative.
pub type EventFn<'a> = &'a mut dyn FnMut(f64, &[f64]) -> f64;

const STAGE_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Dopri5Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y5: Vec<f64>,
}

impl Dopri5Workspace {
    fn new(dim: usize) -> Self {
        Dopri5Workspace {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y5: vec![0.0; dim],
        }
    }
}

/// One Dormand-Prince step from (t, y) with step h. `k[0]` must hold
/// f(t, y) on entry (FSAL); on exit `k[6]` holds f(t+h, y5). Returns the
/// scaled error estimate.
fn dopri5_step(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t: f64,
    y: &[f64],
    h: f64,
    ws: &mut Dopri5Workspace,
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let dim = y.len();
    let stages: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
    for (s, row) in stages.iter().enumerate() {
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, a) in row.iter().enumerate() {
                acc += a * ws.k[j][i];
            }
            ws.tmp[i] = y[i] + h * acc;
        }
        let (head, tail) = ws.k.split_at_mut(s + 1);
        let _ = head;
        rhs(t + STAGE_C[s] * h, &ws.tmp, &mut tail[0]);
    }
    for i in 0..dim {
        let mut acc = 0.0;
        for j in 0..6 {
            acc += B5[j] * ws.k[j][i];
        }
        ws.y5[i] = y[i] + h * acc;
    }
    let (k_arr, rest) = (&mut ws.k, &ws.y5);
    rhs(t + h, rest, &mut k_arr[6]);
    let mut err_sq = 0.0;
    for i in 0..dim {
        let mut e = 0.0;
        for j in 0..7 {
            e += (B5[j] - B4[j]) * ws.k[j][i];
        }
        e *= h;
        let scale = abs_tol + rel_tol * ws.y5[i].abs().max(y[i].abs());
        let r = e / scale;
        err_sq += r * r;
    }
    (err_sq / dim as f64).sqrt()
}

fn rk4_step(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t: f64,
    y: &[f64],
    h: f64,
    out: &mut [f64],
) {
    let dim = y.len();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    rhs(t, y, &mut k1);
    for i in 0..dim {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..dim {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..dim {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, &tmp, &mut k4);
    for i in 0..dim {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrate dy/dt = rhs(t, y) from (t0, y0) to t_end. Stops early at the
/// first event crossing (g going nonnegative), on step-size underflow, or
/// when the step budget runs out. The observer sees every accepted point,
/// including the initial and final one.
pub fn integrate(
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]),
    mut event: Option<EventFn<'_>>,
    mut observer: impl FnMut(f64, &[f64]),
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> IntegrationOutput {
    let dim = y0.len();
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    observer(t, &y);

    if let Some(ev) = event.as_deref_mut() {
        if ev(t, &y) >= 0.0 {
            return IntegrationOutput {
                reason: StopReason::Event,
                t,
                y,
                stats,
            };
        }
    }

    match cfg.method {
        Method::Rk4 => {
            let mut next = vec![0.0; dim];
            while t < t_end {
                if stats.accepted >= cfg.max_steps {
                    return IntegrationOutput {
                        reason: StopReason::StepBudget,
                        t,
                        y,
                        stats,
                    };
                }
                let h = cfg.max_step.min(t_end - t);
                rk4_step(&mut rhs, t, &y, h, &mut next);
                stats.rhs_evals += 4;
                let mut fired = false;
                if let Some(ev) = event.as_deref_mut() {
                    fired = ev(t + h, &next) >= 0.0;
                }
                if fired {
                    let (te, ye) = refine_event(
                        |h_try, out| rk4_step(&mut rhs, t, &y, h_try, out),
                        event.as_deref_mut().unwrap(),
                        t,
                        h,
                        dim,
                        cfg.event_tol,
                        &mut stats,
                    );
                    observer(te, &ye);
                    return IntegrationOutput {
                        reason: StopReason::Event,
                        t: te,
                        y: ye,
                        stats,
                    };
                }
                t += h;
                y.copy_from_slice(&next);
                stats.accepted += 1;
                observer(t, &y);
            }
            IntegrationOutput {
                reason: StopReason::Horizon,
                t,
                y,
                stats,
            }
        }
        Method::Dopri5 => {
            let mut ws = Dopri5Workspace::new(dim);
            rhs(t, &y, &mut ws.k[0]);
            stats.rhs_evals += 1;
            let mut h = cfg.max_step.min((t_end - t0).abs() / 10.0).max(1e-12);
            loop {
                if t >= t_end {
                    return IntegrationOutput {
                        reason: StopReason::Horizon,
                        t,
                        y,
                        stats,
                    };
                }
                if stats.accepted + stats.rejected >= cfg.max_steps {
                    return IntegrationOutput {
                        reason: StopReason::StepBudget,
                        t,
                        y,
                        stats,
                    };
                }
                let h_floor = 1e-14 * t.abs().max(1.0);
                if h < h_floor {
                    return IntegrationOutput {
                        reason: StopReason::StepSizeUnderflow,
                        t,
                        y,
                        stats,
                    };
                }
                let h_try = h.min(t_end - t);
                let err = dopri5_step(&mut rhs, t, &y, h_try, &mut ws, cfg.abs_tol, cfg.rel_tol);
                stats.rhs_evals += 6;
                if err <= 1.0 {
                    let factor = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    let mut fired = false;
                    if let Some(ev) = event.as_deref_mut() {
                        if ev(t + h_try, &ws.y5) >= 0.0 {
                            fired = true;
                        }
                    }
                    if fired {
                        let k1 = ws.k[0].clone();
                        let (te, ye) = refine_event(
                            |h_frac, out| {
                                let mut w2 = Dopri5Workspace::new(dim);
                                w2.k[0].copy_from_slice(&k1);
                                dopri5_step(
                                    &mut rhs,
                                    t,
                                    &y,
                                    h_frac,
                                    &mut w2,
                                    cfg.abs_tol,
                                    cfg.rel_tol,
                                );
                                out.copy_from_slice(&w2.y5);
                            },
                            event.as_deref_mut().unwrap(),
                            t,
                            h_try,
                            dim,
                            cfg.event_tol,
                            &mut stats,
                        );
                        observer(te, &ye);
                        return IntegrationOutput {
                            reason: StopReason::Event,
                            t: te,
                            y: ye,
                            stats,
                        };
                    }
                    t += h_try;
                    y.copy_from_slice(&ws.y5);
                    let (k0, k6) = {
                        let (a, b) = ws.k.split_at_mut(6);
                        (&mut a[0], &b[0])
                    };
                    k0.copy_from_slice(k6);
                    stats.accepted += 1;
                    observer(t, &y);
                    h = (h * factor).min(cfg.max_step);
                } else {
                    stats.rejected += 1;
                    h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                }
            }
        }
    }
}

/// Bisect the step fraction until the event-time bracket is below tol.
/// `stepper(h, out)` must produce the solution h after the current point.
fn refine_event(
    mut stepper: impl FnMut(f64, &mut [f64]),
    event: &mut dyn FnMut(f64, &[f64]) -> f64,
    t: f64,
    h: f64,
    dim: usize,
    tol: f64,
    stats: &mut StepStats,
) -> (f64, Vec<f64>) {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut y_hi = vec![0.0; dim];
    stepper(h, &mut y_hi);
    while (hi - lo) * h > tol {
        let mid = 0.5 * (lo + hi);
        let mut y_mid = vec![0.0; dim];
        stepper(mid * h, &mut y_mid);
        stats.rhs_evals += 6;
        if event(t + mid * h, &y_mid) >= 0.0 {
            hi = mid;
            y_hi = y_mid;
        } else {
            lo = mid;
        }
    }
    (t + hi * h, y_hi)
}
