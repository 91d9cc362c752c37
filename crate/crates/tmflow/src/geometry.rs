//! Geometry pipeline from the 5-dimensional machine manifold (4 torus
//! angles plus the clock circle) to the ambient field F on R^11.
//!
//! Each circle embeds as a plane pair (cos 2*pi*t, sin 2*pi*t), so the
//! embedded manifold lies on the sphere of radius sqrt(5) in R^10. The
//! height coordinate h (halting plateau times clock plateau) is appended
//! as the 11th coordinate, the result is scaled into the unit ball by
//! 1/sqrt(6), and the open ball is blown up to all of R^11 by the radial
//! map x -> x / sqrt(1 - |x|^2). On the manifold
//!
//! ```text
//! |x|^2 = (5 + h^2) / (1 - h^2),
//! ```
//!
//! so trajectories sit on the sphere of radius sqrt(5) while h = 0 and
//! escape to infinity exactly when h reaches 1.
//!
//! Off the manifold the field is defined by retraction: normalize each
//! plane pair back to its circle, recompute the height from the recovered
//! angles, and cut off smoothly in the retraction distance. The cutoff
//! vanishes well before the retraction loses smoothness.
//!
//! Where the ball comes from: with the embedding pinned to the shell
//! |y|^2 = 5, the sublevel set {|y|^2 - 5 + (z - 1)(z + 1) <= 0} is the
//! round ball of radius sqrt(6), and on the manifold membership reduces
//! to the quadratic factor (z - 1)(z + 1) <= 0 in the height coordinate
//! alone. Its boundary meets the manifold exactly on {z = 1} (heights are
//! nonnegative), which is why the scaled image touches the unit sphere
//! precisely on the halting set. A different height profile only needs
//! this quadratic replaced to re-derive the enclosing region.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::encoding::to_f64;
use crate::field::SuspensionField;
use crate::layout::{Layout, LayoutError};
use crate::smooth::{smoothstep, ClockPlateau, Plateau1};

/// Point of the machine manifold: four torus angles (state x, y; tape
/// x, y) and the clock, all in [0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldPoint {
    pub theta: [f64; 4],
    pub s: f64,
}

impl ManifoldPoint {
    pub fn reduced(theta: [f64; 4], s: f64) -> Self {
        ManifoldPoint {
            theta: theta.map(|t| t.rem_euclid(1.0)),
            s: s.rem_euclid(1.0),
        }
    }
}

/// The height function h = (halting-square plateau) * (clock plateau):
/// exactly 1 on the closed halting region, exactly 0 away from it.
#[derive(Debug, Clone)]
pub struct HeightParams {
    pub state_x: Plateau1,
    pub state_y: Plateau1,
    pub clock: ClockPlateau,
}

impl HeightParams {
    /// Core: halt square inflated by half_side/2 times clock distance
    /// <= 0.05; support: inflated by half_side times clock distance
    /// <= 0.07. The layout validator keeps the spatial support clear of
    /// all non-halting traffic.
    pub fn from_layout(layout: &Layout) -> Self {
        let core = layout.halt_core();
        let margin = to_f64(&layout.half_side) / 2.0;
        HeightParams {
            state_x: Plateau1::new(to_f64(&core.x0), to_f64(&core.x1), margin),
            state_y: Plateau1::new(to_f64(&core.y0), to_f64(&core.y1), margin),
            clock: ClockPlateau::new(CLOCK_CORE, CLOCK_SUPPORT),
        }
    }

    pub fn eval(&self, pt: &ManifoldPoint) -> f64 {
        let sx = self.state_x.eval(pt.theta[0]);
        if sx == 0.0 {
            return 0.0;
        }
        let sy = self.state_y.eval(pt.theta[1]);
        if sy == 0.0 {
            return 0.0;
        }
        sx * sy * self.clock.eval(pt.s)
    }

    /// Gradient as (d/dtheta1, d/dtheta2, d/ds); the tape angles never
    /// enter h.
    pub fn grad(&self, pt: &ManifoldPoint) -> (f64, f64, f64) {
        let px = self.state_x.eval(pt.theta[0]);
        let py = self.state_y.eval(pt.theta[1]);
        let pc = self.clock.eval(pt.s);
        (
            self.state_x.deriv(pt.theta[0]) * py * pc,
            px * self.state_y.deriv(pt.theta[1]) * pc,
            px * py * self.clock.deriv(pt.s),
        )
    }
}

/// Clock plateau half-widths: h can only reach 1 during the idle band of
/// the schedule, and the blow-up time of a run halting at step n is
/// n - CLOCK_CORE.
pub const CLOCK_CORE: f64 = 0.05;
pub const CLOCK_SUPPORT: f64 = 0.07;

/// Radius of the ball the heighted manifold lives in: sqrt(5 + 1).
pub fn ball_radius() -> f64 {
    6.0f64.sqrt()
}

/// Embed the manifold into R^10, pair by pair. |embed|^2 = 5 identically.
pub fn embed(pt: &ManifoldPoint) -> [f64; 10] {
    let mut out = [0.0; 10];
    for (i, angle) in pt.theta.iter().chain(std::iter::once(&pt.s)).enumerate() {
        let a = TAU * angle;
        out[2 * i] = a.cos();
        out[2 * i + 1] = a.sin();
    }
    out
}

/// Scale into the unit ball.
pub fn ball_scale(v: &[f64; 11]) -> [f64; 11] {
    let r = ball_radius();
    v.map(|x| x / r)
}

pub fn ball_unscale(v: &[f64; 11]) -> [f64; 11] {
    let r = ball_radius();
    v.map(|x| x * r)
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("point outside the open unit ball")]
pub struct DomainError;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("height reached 1; image lies at infinity")]
pub struct AtInfinity;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("point outside the retraction tube (a plane pair has norm below 1/2)")]
pub struct OutsideTube;

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Radial blow-up of the open unit ball onto R^n.
pub fn poincare(w: &[f64; 11]) -> Result<[f64; 11], DomainError> {
    let n2 = norm_sq(w);
    if n2 >= 1.0 {
        return Err(DomainError);
    }
    let g = 1.0 / (1.0 - n2).sqrt();
    Ok(w.map(|x| x * g))
}

/// Inverse of [`poincare`]; total on R^11.
pub fn poincare_inv(x: &[f64; 11]) -> [f64; 11] {
    let g = 1.0 / (1.0 + norm_sq(x)).sqrt();
    x.map(|v| v * g)
}

/// Directional derivative of [`poincare`] at w applied to v.
pub fn poincare_jvp(w: &[f64; 11], v: &[f64; 11]) -> Result<[f64; 11], DomainError> {
    let n2 = norm_sq(w);
    if n2 >= 1.0 {
        return Err(DomainError);
    }
    let g = 1.0 / (1.0 - n2).sqrt();
    let g3 = g * g * g;
    let wv: f64 = w.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    let mut out = [0.0; 11];
    for i in 0..11 {
        out[i] = g * v[i] + g3 * wv * w[i];
    }
    Ok(out)
}

/// Directional derivative of [`poincare_inv`] at x applied to v.
pub fn poincare_inv_jvp(x: &[f64; 11], v: &[f64; 11]) -> [f64; 11] {
    let n2 = norm_sq(x);
    let g = 1.0 / (1.0 + n2).sqrt();
    let g3 = g * g * g;
    let xv: f64 = x.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    let mut out = [0.0; 11];
    for i in 0..11 {
        out[i] = g * v[i] - g3 * xv * x[i];
    }
    out
}

/// Result of pulling an ambient point back to the manifold.
#[derive(Debug, Clone, Copy)]
pub struct Retraction {
    pub pt: ManifoldPoint,
    pub dist_sq: f64,
}

impl Retraction {
    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }
}

/// The assembled system: machine field, height function, and the smooth
/// ambient extension F with its tubular cutoff.
#[derive(Debug, Clone)]
pub struct AmbientField {
    pub suspension: SuspensionField,
    pub height: HeightParams,
    /// Cutoff radii in retraction distance: F agrees with the pushforward
    /// for dist <= eps1 and vanishes for dist >= eps2.
    pub eps1: f64,
    pub eps2: f64,
}

impl AmbientField {
    pub fn build(spec: crate::tm::TMSpec) -> Result<Self, LayoutError> {
        let suspension = SuspensionField::build(spec)?;
        let height = HeightParams::from_layout(&suspension.layout);
        Ok(AmbientField {
            suspension,
            height,
            eps1: 0.05,
            eps2: 0.1,
        })
    }

    pub fn height(&self, pt: &ManifoldPoint) -> f64 {
        self.height.eval(pt)
    }

    /// E_h: manifold point to R^11 (embedding plus height coordinate).
    pub fn embed_h(&self, pt: &ManifoldPoint) -> [f64; 11] {
        let e = embed(pt);
        let mut out = [0.0; 11];
        out[..10].copy_from_slice(&e);
        out[10] = self.height.eval(pt);
        out
    }

    /// Ball chart: psi(E_h(pt)), always inside the closed unit ball, on
    /// the boundary exactly when h = 1.
    pub fn ball_point(&self, pt: &ManifoldPoint) -> [f64; 11] {
        ball_scale(&self.embed_h(pt))
    }

    /// Full forward map G = poincare . psi . E_h.
    pub fn forward(&self, pt: &ManifoldPoint) -> Result<[f64; 11], AtInfinity> {
        poincare(&self.ball_point(pt)).map_err(|_| AtInfinity)
    }

    /// The machine field extended by unit clock speed.
    pub fn velocity5(&self, pt: &ManifoldPoint) -> [f64; 5] {
        self.suspension.eval_v_full(&pt.theta, pt.s)
    }

    /// Tangent map of E_h applied to a 5-velocity.
    pub fn d_embed_h(&self, pt: &ManifoldPoint, v: &[f64; 5]) -> [f64; 11] {
        let mut out = [0.0; 11];
        for (i, angle) in pt.theta.iter().chain(std::iter::once(&pt.s)).enumerate() {
            let a = TAU * angle;
            out[2 * i] = -TAU * a.sin() * v[i];
            out[2 * i + 1] = TAU * a.cos() * v[i];
        }
        let (h1, h2, hs) = self.height.grad(pt);
        out[10] = h1 * v[0] + h2 * v[1] + hs * v[4];
        out
    }

    /// Pushforward of (V, 1) into the ball chart at pt.
    pub fn tangent_ball(&self, pt: &ManifoldPoint) -> [f64; 11] {
        let v = self.velocity5(pt);
        let e = self.d_embed_h(pt, &v);
        ball_scale(&e)
    }

    /// Pushforward of (V, 1) through the full map G at pt; this is dG
    /// applied to the intrinsic velocity.
    pub fn tangent_ambient(&self, pt: &ManifoldPoint) -> Result<[f64; 11], AtInfinity> {
        let w = self.ball_point(pt);
        let dw = self.tangent_ball(pt);
        poincare_jvp(&w, &dw).map_err(|_| AtInfinity)
    }

    /// Directional derivative of G at pt along an arbitrary 5-velocity;
    /// used by derivative checks.
    pub fn forward_jvp(&self, pt: &ManifoldPoint, v: &[f64; 5]) -> Result<[f64; 11], AtInfinity> {
        let w = self.ball_point(pt);
        let dw = ball_scale(&self.d_embed_h(pt, v));
        poincare_jvp(&w, &dw).map_err(|_| AtInfinity)
    }

    /// Pull a point of the scaled chart (u = sqrt(6) * ball coordinates)
    /// back to the manifold: normalize each plane pair, recover angles,
    /// recompute the height from them. The 11th input coordinate only
    /// enters the distance, so tube noise in it never bends the field.
    pub fn retract_u(&self, u: &[f64; 11]) -> Result<Retraction, OutsideTube> {
        let mut theta = [0.0; 4];
        let mut s = 0.0;
        let mut dist_sq = 0.0;
        for i in 0..5 {
            let (cx, sx) = (u[2 * i], u[2 * i + 1]);
            let r = (cx * cx + sx * sx).sqrt();
            if r < 0.5 {
                return Err(OutsideTube);
            }
            let angle = sx.atan2(cx).rem_euclid(TAU) / TAU;
            if i < 4 {
                theta[i] = angle;
            } else {
                s = angle;
            }
            dist_sq += (r - 1.0) * (r - 1.0);
        }
        let pt = ManifoldPoint { theta, s };
        let dh = u[10] - self.height.eval(&pt);
        dist_sq += dh * dh;
        Ok(Retraction { pt, dist_sq })
    }

    pub fn retract_ball(&self, w: &[f64; 11]) -> Result<Retraction, OutsideTube> {
        self.retract_u(&ball_unscale(w))
    }

    pub fn retract_ambient(&self, x: &[f64; 11]) -> Result<Retraction, OutsideTube> {
        self.retract_u(&ball_unscale(&poincare_inv(x)))
    }

    /// Smooth cutoff in squared retraction distance.
    pub fn chi(&self, dist_sq: f64) -> f64 {
        let lo = self.eps1 * self.eps1;
        let hi = self.eps2 * self.eps2;
        1.0 - smoothstep((dist_sq - lo) / (hi - lo))
    }

    /// The ambient field F on R^11: cutoff times the pushforward at the
    /// retracted base point. Total and smooth; exactly the pushforward on
    /// the manifold, exactly zero outside the tube.
    pub fn eval_f(&self, x: &[f64; 11]) -> [f64; 11] {
        let Ok(r) = self.retract_ambient(x) else {
            return [0.0; 11];
        };
        let chi = self.chi(r.dist_sq);
        if chi == 0.0 {
            return [0.0; 11];
        }
        match self.tangent_ambient(&r.pt) {
            Ok(mut v) => {
                for c in v.iter_mut() {
                    *c *= chi;
                }
                v
            }
            // height exactly 1 at the retracted point: representable
            // trajectories never get here (|x| would exceed ~1e150)
            Err(AtInfinity) => [0.0; 11],
        }
    }

    /// The field in the ball chart (compactified mode): no radial blow-up,
    /// event |w| -> 1.
    pub fn eval_f_ball(&self, w: &[f64; 11]) -> [f64; 11] {
        let Ok(r) = self.retract_ball(w) else {
            return [0.0; 11];
        };
        let chi = self.chi(r.dist_sq);
        if chi == 0.0 {
            return [0.0; 11];
        }
        let mut v = self.tangent_ball(&r.pt);
        for c in v.iter_mut() {
            *c *= chi;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_config, to_f64};
    use crate::tm::{Configuration, TMSpec, Tape};
    use rand::{Rng, SeedableRng};

    fn halt3() -> TMSpec {
        TMSpec::parse(
            "alphabet: 2\nstates: START,MID,HALT\nstart: START\nhalt: HALT\n\
             START 0 -> MID 1 N\nSTART 1 -> HALT 1 N\nMID 1 -> MID 0 R\nMID 0 -> HALT 1 N\n",
        )
        .unwrap()
    }

    fn system() -> AmbientField {
        AmbientField::build(halt3()).unwrap()
    }

    fn random_pt(rng: &mut impl Rng) -> ManifoldPoint {
        ManifoldPoint {
            theta: [rng.gen(), rng.gen(), rng.gen(), rng.gen()],
            s: rng.gen(),
        }
    }

    #[test]
    fn embed_of_zero_angles() {
        let pt = ManifoldPoint {
            theta: [0.0; 4],
            s: 0.0,
        };
        let e = embed(&pt);
        assert_eq!(e, [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn embed_quarter_turn() {
        let pt = ManifoldPoint {
            theta: [0.25, 0.0, 0.0, 0.0],
            s: 0.0,
        };
        let e = embed(&pt);
        assert!(e[0].abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
        assert_eq!(&e[2..], &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn norm_shell_is_five() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let e = embed(&random_pt(&mut rng));
            assert!((norm_sq(&e) - 5.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn height_examples() {
        let sys = system();
        let spec = &sys.suspension.spec;
        let layout = &sys.suspension.layout;
        let halt_c = layout.state_squares[spec.halt()].center();
        let start_c = layout.state_squares[spec.start()].center();
        let mk = |c: &(crate::encoding::Rat, crate::encoding::Rat), s: f64| ManifoldPoint {
            theta: [to_f64(&c.0), to_f64(&c.1), 0.2, 0.2],
            s,
        };
        assert_eq!(sys.height(&mk(&halt_c, 0.0)), 1.0);
        assert_eq!(sys.height(&mk(&halt_c, 0.5)), 0.0);
        for s in [0.0, 0.25, 0.5, 0.96] {
            assert_eq!(sys.height(&mk(&start_c, s)), 0.0);
        }
    }

    #[test]
    fn ball_norm_identity() {
        let sys = system();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let pt = random_pt(&mut rng);
            let w = sys.ball_point(&pt);
            let h = sys.height(&pt);
            assert!((norm_sq(&w) - (5.0 + h * h) / 6.0).abs() <= 1e-12);
            assert!(norm_sq(&w) <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn poincare_examples_and_roundtrip() {
        let zero = [0.0; 11];
        assert_eq!(poincare(&zero).unwrap(), zero);
        let mut e1 = [0.0; 11];
        e1[0] = 0.6;
        let img = poincare(&e1).unwrap();
        assert!((img[0] - 0.75).abs() < 1e-15);
        assert!(img[1..].iter().all(|&v| v == 0.0));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let mut w = [0.0; 11];
            for c in w.iter_mut() {
                *c = rng.gen_range(-0.25..0.25);
            }
            let x = poincare(&w).unwrap();
            let back = poincare_inv(&x);
            for i in 0..11 {
                assert!((back[i] - w[i]).abs() <= 1e-15);
            }
        }
        let mut on_sphere = [0.0; 11];
        on_sphere[3] = 1.0;
        assert_eq!(poincare(&on_sphere), Err(DomainError));
    }

    #[test]
    fn poincare_jvp_matches_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let mut w = [0.0; 11];
            let mut v = [0.0; 11];
            for i in 0..11 {
                w[i] = rng.gen_range(-0.26..0.26);
                v[i] = rng.gen_range(-1.0..1.0);
            }
            let jvp = poincare_jvp(&w, &v).unwrap();
            let eps = 1e-6;
            for i in 0..11 {
                let mut wp = w;
                let mut wm = w;
                for j in 0..11 {
                    wp[j] += eps * v[j];
                    wm[j] -= eps * v[j];
                }
                let fd = (poincare(&wp).unwrap()[i] - poincare(&wm).unwrap()[i]) / (2.0 * eps);
                let scale = 1.0 + fd.abs();
                assert!((jvp[i] - fd).abs() <= 1e-6 * scale, "{} vs {fd}", jvp[i]);
            }
        }
    }

    #[test]
    fn forward_norm_identity() {
        let sys = system();
        let spec = &sys.suspension.spec;
        let c = Configuration::start(spec, Tape::blank());
        let q = encode_config(spec, &c, &sys.suspension.layout);
        let pt = ManifoldPoint {
            theta: [
                to_f64(&q.state_pt.0),
                to_f64(&q.state_pt.1),
                to_f64(&q.tape_pt.x),
                to_f64(&q.tape_pt.y),
            ],
            s: 0.0,
        };
        let x = sys.forward(&pt).unwrap();
        assert!((norm_sq(&x).sqrt() - 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn retract_is_a_left_inverse() {
        let sys = system();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let pt = random_pt(&mut rng);
            let x = sys.forward(&pt).unwrap();
            let r = sys.retract_ambient(&x).unwrap();
            assert!(r.dist() <= 1e-9);
            for i in 0..4 {
                assert!(crate::smooth::circle_dist(r.pt.theta[i], pt.theta[i]) <= 1e-9);
            }
            assert!(crate::smooth::circle_dist(r.pt.s, pt.s) <= 1e-9);
        }
    }

    #[test]
    fn origin_is_outside_the_tube() {
        let sys = system();
        assert!(sys.retract_ambient(&[0.0; 11]).is_err());
    }

    #[test]
    fn z_perturbation_shows_up_as_distance() {
        let sys = system();
        let pt = ManifoldPoint {
            theta: [0.3, 0.4, 0.2, 0.2],
            s: 0.3,
        };
        let mut x = sys.forward(&pt).unwrap();
        x[10] += 0.01;
        let r = sys.retract_ambient(&x).unwrap();
        // the scaled chart compresses the perturbation by sqrt(6)/sqrt(1+|x|^2)
        let scale = ball_radius() / (1.0 + norm_sq(&x)).sqrt();
        let expect = 0.01 * scale;
        assert!(
            (r.dist() - expect).abs() < 0.3 * expect,
            "{} vs {expect}",
            r.dist()
        );
    }

    #[test]
    fn field_on_manifold_is_exactly_the_pushforward() {
        let sys = system();
        let spec = &sys.suspension.spec;
        let c = Configuration::start(spec, Tape::blank());
        let q = encode_config(spec, &c, &sys.suspension.layout);
        // mid-window time so the velocity is nonzero
        let w0 = &sys.suspension.schedule.windows[0];
        let s = (to_f64(&w0.s0) + to_f64(&w0.s1)) / 2.0;
        let pt = ManifoldPoint {
            theta: [
                to_f64(&q.state_pt.0),
                to_f64(&q.state_pt.1),
                to_f64(&q.tape_pt.x),
                to_f64(&q.tape_pt.y),
            ],
            s,
        };
        let x = sys.forward(&pt).unwrap();
        let f = sys.eval_f(&x);
        let v = sys.tangent_ambient(&pt).unwrap();
        let fnorm = norm_sq(&f).sqrt();
        assert!(fnorm > 0.0);
        for i in 0..11 {
            assert!(
                (f[i] - v[i]).abs() <= 1e-9 * (1.0 + v[i].abs()),
                "{} vs {}",
                f[i],
                v[i]
            );
        }
    }

    #[test]
    fn field_vanishes_far_from_the_manifold() {
        let sys = system();
        let mut x = [0.0; 11];
        x[0] = 100.0;
        assert_eq!(sys.eval_f(&x), [0.0; 11]);
    }
}
