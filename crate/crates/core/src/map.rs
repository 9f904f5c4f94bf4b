//! Single-trajectory dynamics of the Chirikov standard map on the unit torus.
//!
//! One iteration is
//!
//! ```text
//! q' = q + p                      (mod 1)
//! p' = p - K/(2π) sin(2π q')      (mod 1)
//! ```
//!
//! The tangent map is carried along as a QR-factored frame so that finite-time
//! Lyapunov exponents stay finite for arbitrarily long runs and the Jacobian
//! determinant can be tracked independently of the growth.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Tolerance used to snap leak boundaries so decimal endpoints such as
/// `0.2 + 0.1` land on the intended side of the half-open interval.
const BOUNDARY_EPS: f64 = 1e-12;

/// Frames are rescaled after this many tangent steps.
const RENORM_INTERVAL: usize = 20;

/// Reduces `x` to `[0, 1)` using a floor-based remainder.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapParams {
    /// Kick strength. `K = 10` is deep in the strongly chaotic regime.
    pub k: f64,
}

impl MapParams {
    pub fn new(k: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::InvalidParameter {
                name: "K",
                reason: format!("must be finite, got {k}"),
            });
        }
        Ok(Self { k })
    }
}

impl Default for MapParams {
    fn default() -> Self {
        Self { k: 10.0 }
    }
}

/// A point on the unit torus, always stored reduced to `[0,1)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSpacePoint {
    pub q: f64,
    pub p: f64,
}

impl PhaseSpacePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self {
            q: wrap_unit(q),
            p: wrap_unit(p),
        }
    }

    /// Point reflection `(q, p) -> (1 - q, 1 - p)`, a symmetry of the map.
    pub fn reflect(self) -> Self {
        Self::new(1.0 - self.q, 1.0 - self.p)
    }
}

/// One iteration of the closed map. The updated position enters the kick.
#[inline]
pub fn step(x: PhaseSpacePoint, params: MapParams) -> PhaseSpacePoint {
    let q = wrap_unit(x.q + x.p);
    let p = wrap_unit(x.p - params.k / (2.0 * PI) * (2.0 * PI * q).sin());
    PhaseSpacePoint { q, p }
}

/// Accumulated product of one-step Jacobians, `J = e^s · Q · R`.
///
/// `Q` is a proper rotation and `R` is upper triangular with entries kept of
/// order one; `s` absorbs the exponential growth. The determinant is tracked
/// separately from the per-step triangular factors.
#[derive(Clone, Copy, Debug)]
pub struct TangentFrame {
    rot: [[f64; 2]; 2],
    upper: [[f64; 2]; 2],
    log_scale: f64,
    det_log: f64,
    det_pending: f64,
    steps: usize,
}

impl Default for TangentFrame {
    fn default() -> Self {
        Self::identity()
    }
}

impl TangentFrame {
    pub fn identity() -> Self {
        Self {
            rot: [[1.0, 0.0], [0.0, 1.0]],
            upper: [[1.0, 0.0], [0.0, 1.0]],
            log_scale: 0.0,
            det_log: 0.0,
            det_pending: 1.0,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The accumulated matrix `J`. Overflows to infinity once the growth
    /// exceeds the `f64` range; use [`TangentFrame::ln_max_singular_value`]
    /// for long runs.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let scale = self.log_scale.exp();
        let (q, r) = (&self.rot, &self.upper);
        [
            [
                scale * q[0][0] * r[0][0],
                scale * (q[0][0] * r[0][1] + q[0][1] * r[1][1]),
            ],
            [
                scale * q[1][0] * r[0][0],
                scale * (q[1][0] * r[0][1] + q[1][1] * r[1][1]),
            ],
        ]
    }

    /// `det J`, accumulated from the per-step triangular factors.
    pub fn determinant(&self) -> f64 {
        let sign = self.det_pending.signum();
        sign * (self.det_log + self.det_pending.abs().ln()).exp()
    }

    /// `ln σ_max(J)`.
    pub fn ln_max_singular_value(&self) -> f64 {
        self.log_scale + max_singular_value(&self.upper).ln()
    }

    /// `(1/n) ln σ_max(J_n)`; NaN before the first step.
    pub fn ftle(&self) -> f64 {
        if self.steps == 0 {
            return f64::NAN;
        }
        self.ln_max_singular_value() / self.steps as f64
    }

    fn renormalize(&mut self) {
        let r = &mut self.upper;
        let s = r[0][0].abs().max(r[0][1].abs()).max(r[1][1].abs());
        if s > 0.0 && s.is_finite() {
            r[0][0] /= s;
            r[0][1] /= s;
            r[1][1] /= s;
            self.log_scale += s.ln();
        }
        self.det_log += self.det_pending.abs().ln();
        self.det_pending = self.det_pending.signum();
    }
}

/// Largest singular value of a 2×2 matrix, free of cancellation.
fn max_singular_value(m: &[[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    0.5 * ((a + d).hypot(b - c) + (a - d).hypot(b + c))
}

/// Left-multiplies the frame by the Jacobian of one map step evaluated at the
/// already-updated position `q_next`.
pub fn tangent_step(q_next: f64, frame: TangentFrame, params: MapParams) -> TangentFrame {
    let kc = params.k * (2.0 * PI * q_next).cos();
    let a = [[1.0, 1.0], [-kc, 1.0 - kc]];
    let q = frame.rot;

    // M = A · Q, then M = Q' · R'.
    let m00 = a[0][0] * q[0][0] + a[0][1] * q[1][0];
    let m01 = a[0][0] * q[0][1] + a[0][1] * q[1][1];
    let m10 = a[1][0] * q[0][0] + a[1][1] * q[1][0];
    let m11 = a[1][0] * q[0][1] + a[1][1] * q[1][1];
    let r00 = m00.hypot(m10);
    let (cs, sn) = (m00 / r00, m10 / r00);
    let r01 = cs * m01 + sn * m11;
    let r11 = -sn * m01 + cs * m11;

    let u = frame.upper;
    let mut next = TangentFrame {
        rot: [[cs, -sn], [sn, cs]],
        upper: [
            [r00 * u[0][0], r00 * u[0][1] + r01 * u[1][1]],
            [0.0, r11 * u[1][1]],
        ],
        log_scale: frame.log_scale,
        det_log: frame.det_log,
        det_pending: frame.det_pending * r00 * r11,
        steps: frame.steps + 1,
    };
    let big = next.upper[0][0].abs().max(next.upper[0][1].abs());
    if next.steps.is_multiple_of(RENORM_INTERVAL) || big > 1e100 {
        next.renormalize();
    }
    next
}

/// Finite-time Lyapunov exponent `(1/n) ln σ_max(J_n)` of the orbit from `x0`.
pub fn ftle(x0: PhaseSpacePoint, n: usize, params: MapParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroIterations);
    }
    let mut x = x0;
    let mut frame = TangentFrame::identity();
    for _ in 0..n {
        x = step(x, params);
        frame = tangent_step(x.q, frame, params);
    }
    Ok(frame.ftle())
}

/// A strip `[center - width/2, center + width/2)` (mod 1) covering all momenta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leak {
    pub center: f64,
    pub width: f64,
}

impl Leak {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidParameter {
                name: "leak center",
                reason: format!("must be finite, got {center}"),
            });
        }
        if !(0.0..=1.0).contains(&width) {
            return Err(Error::InvalidParameter {
                name: "leak width",
                reason: format!("must lie in [0, 1], got {width}"),
            });
        }
        Ok(Self {
            center: wrap_unit(center),
            width,
        })
    }

    /// Membership of a position in the half-open strip, with wraparound.
    #[inline]
    pub fn contains_q(&self, q: f64) -> bool {
        if self.width >= 1.0 {
            return true;
        }
        let lower = self.center - 0.5 * self.width;
        wrap_unit(q - lower + BOUNDARY_EPS) < self.width
    }
}

#[inline]
pub fn in_leak(x: PhaseSpacePoint, leak: Leak) -> bool {
    leak.contains_q(x.q)
}

/// Outcome of evolving one initial condition in the leaking map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeRecord {
    /// Iterations spent outside the leak.
    pub dwell: u32,
    /// FTLE over the dwell time; `None` when the orbit starts inside the leak.
    pub ftle: Option<f64>,
    /// `false` when the orbit survived all `t_max` iterations.
    pub escaped: bool,
}

impl EscapeRecord {
    /// Initial conditions inside the leak carry no statistics.
    pub fn is_valid(&self) -> bool {
        self.dwell > 0
    }
}

/// Iterates the map until the orbit lands in the leak or `t_max` is reached.
/// Leak membership is tested at stroboscopic times, after the kick.
pub fn evolve_open(
    x0: PhaseSpacePoint,
    leak: Leak,
    t_max: u32,
    params: MapParams,
) -> Result<EscapeRecord> {
    if t_max == 0 {
        return Err(Error::ZeroIterations);
    }
    if in_leak(x0, leak) {
        return Ok(EscapeRecord {
            dwell: 0,
            ftle: None,
            escaped: true,
        });
    }
    let mut x = x0;
    let mut frame = TangentFrame::identity();
    for t in 1..=t_max {
        x = step(x, params);
        frame = tangent_step(x.q, frame, params);
        if in_leak(x, leak) {
            return Ok(EscapeRecord {
                dwell: t,
                ftle: Some(frame.ftle()),
                escaped: true,
            });
        }
    }
    Ok(EscapeRecord {
        dwell: t_max,
        ftle: Some(frame.ftle()),
        escaped: false,
    })
}
