//! Per-atom state and its exact evolution over one sub-step.
//!
//! The Bloch vector obeys `u' = -Δ v`, `v' = Δ u - Ω w`, `w' = Ω v`, i.e. it
//! precesses about the torque vector `(Ω, 0, Δ)`. With the drive held constant
//! over a sub-step that motion is a rigid rotation, so every update here is
//! exact and norm preserving.
//!
//! Each node also carries the field convolutions
//!
//! ```text
//! c(t) = ∫₀^∞ Ω(t−τ′) cos(Δτ′) dτ′
//! s(t) = ∫₀^∞ Ω(t−τ′) sin(Δτ′) dτ′
//! ```
//!
//! which are exactly the linear (ground-state) response. Subtracting them
//! gives the renormalized pair `U = u + s`, `V = v − c` that vanishes far from
//! resonance and lets the detuning integral be truncated.

use crate::error::{Error, Result};

/// `|Δτ|` below which the convolution increments use their analytic limits.
pub const SMALL_PHASE: f64 = 1e-6;

/// Truncated, symmetric, uniform detuning grid with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningGrid {
    deltas: Vec<f64>,
    weights: Vec<f64>,
    dmax: f64,
}

impl DetuningGrid {
    /// Grid on `[-dmax, dmax]` with `n_points` nodes; `n_points` must be odd
    /// so that `Δ = 0` is a node.
    pub fn uniform(dmax: f64, n_points: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if !(dmax.is_finite() && dmax > 0.0) {
            problems.push(format!("dmax must be finite and > 0 (got {dmax})"));
        }
        if n_points < 3 || n_points % 2 == 0 {
            problems.push(format!(
                "detuning point count must be odd and >= 3 (got {n_points})"
            ));
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let half = (n_points - 1) / 2;
        let spacing = dmax / half as f64;
        let mut deltas: Vec<f64> = (0..n_points)
            .map(|j| (j as f64 - half as f64) * spacing)
            .collect();
        deltas[0] = -dmax;
        deltas[n_points - 1] = dmax;
        let mut weights = vec![spacing; n_points];
        weights[0] = 0.5 * spacing;
        weights[n_points - 1] = 0.5 * spacing;
        Ok(Self {
            deltas,
            weights,
            dmax,
        })
    }

    /// Smallest odd grid on `[-dmax, dmax]` whose spacing does not exceed
    /// `max_spacing`.
    pub fn with_max_spacing(dmax: f64, max_spacing: f64) -> Result<Self> {
        if !(max_spacing.is_finite() && max_spacing > 0.0) {
            return Err(Error::Validation(vec![format!(
                "detuning spacing must be finite and > 0 (got {max_spacing})"
            )]));
        }
        let half = (dmax / max_spacing).ceil().max(1.0) as usize;
        Self::uniform(dmax, 2 * half + 1)
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dmax(&self) -> f64 {
        self.dmax
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.dmax / (self.len() - 1) as f64
    }

    /// Index of the resonant (`Δ = 0`) node.
    pub fn center(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Per-detuning coefficients for a fixed sub-step `tau`.
    pub fn precession_table(&self, tau: f64) -> Vec<Precession> {
        self.deltas
            .iter()
            .map(|&d| Precession::new(d, tau))
            .collect()
    }
}

/// Trigonometric factors for free precession and convolution updates at one
/// detuning over one sub-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precession {
    pub delta: f64,
    pub cos: f64,
    pub sin: f64,
    /// `sin(Δτ)/Δ`, tending to `τ` at resonance.
    pub sin_over_delta: f64,
    /// `(1 − cos(Δτ))/Δ`, tending to `Δτ²/2` at resonance.
    pub vers_over_delta: f64,
}

impl Precession {
    pub fn new(delta: f64, tau: f64) -> Self {
        let phase = delta * tau;
        let (sin, cos) = phase.sin_cos();
        let (sin_over_delta, vers_over_delta) = if phase.abs() < SMALL_PHASE {
            (tau * (1.0 - phase * phase / 6.0), 0.5 * tau * phase)
        } else {
            let half = (0.5 * phase).sin();
            (sin / delta, 2.0 * half * half / delta)
        };
        Self {
            delta,
            cos,
            sin,
            sin_over_delta,
            vers_over_delta,
        }
    }
}

/// State of the atoms at one (detuning, depth) lattice site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochNode {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub c: f64,
    pub s: f64,
}

impl Default for BlochNode {
    fn default() -> Self {
        Self::ground()
    }
}

impl BlochNode {
    pub const fn ground() -> Self {
        Self {
            u: 0.0,
            v: 0.0,
            w: -1.0,
            c: 0.0,
            s: 0.0,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.u * self.u + self.v * self.v + self.w * self.w
    }

    fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.v.is_finite()
            && self.w.is_finite()
            && self.c.is_finite()
            && self.s.is_finite()
    }

    /// Exact rotation of `(u, v, w)` about `(Ω, 0, Δ)` by `|(Ω, 0, Δ)|·τ`.
    #[inline]
    pub(crate) fn rotate(&mut self, omega: f64, delta: f64, tau: f64) {
        (self.u, self.v, self.w) =
            rotate_components(self.u, self.v, self.w, omega, delta, tau, half_angle_sin_cos);
    }

    /// Exact update of `(c, s)` for a drive held at `omega` over the step.
    #[inline]
    pub(crate) fn convolve(&mut self, omega: f64, p: &Precession) {
        let (c, s) = (self.c, self.s);
        self.c = c * p.cos - s * p.sin + omega * p.sin_over_delta;
        self.s = s * p.cos + c * p.sin + omega * p.vers_over_delta;
    }
}

/// Rodrigues rotation shared by the per-node API and the lattice kernel, so
/// both produce bit-identical results. `sin_cos` receives the half angle.
#[inline(always)]
pub(crate) fn rotate_components(
    u: f64,
    v: f64,
    w: f64,
    omega: f64,
    delta: f64,
    tau: f64,
    sin_cos: impl Fn(f64) -> (f64, f64),
) -> (f64, f64, f64) {
    let rate_sq = omega * omega + delta * delta;
    let rate = rate_sq.sqrt();
    let inv = if rate_sq > 0.0 { 1.0 / rate } else { 0.0 };
    let (nx, nz) = (omega * inv, delta * inv);
    let (sh, ch) = sin_cos(0.5 * rate * tau);
    let sin = 2.0 * sh * ch;
    let vers = 2.0 * sh * sh;
    let cos = 1.0 - vers;
    let dot = (nx * u + nz * w) * vers;
    (
        u * cos - nz * v * sin + nx * dot,
        v * cos + (nz * u - nx * w) * sin,
        w * cos + nx * v * sin + nz * dot,
    )
}

/// Half angles below this use the Taylor path of [`half_angle_sin_cos`].
pub(crate) const TAYLOR_LIMIT: f64 = 0.25;

/// `sin_cos` with a Taylor fast path for the small angles met on every
/// sub-step. Truncation error is below 1e-21 on the fast path.
#[inline]
pub(crate) fn half_angle_sin_cos(x: f64) -> (f64, f64) {
    if x.abs() >= TAYLOR_LIMIT {
        return x.sin_cos();
    }
    taylor_sin_cos(x)
}

#[inline(always)]
pub(crate) fn taylor_sin_cos(x: f64) -> (f64, f64) {
    let x2 = x * x;
    let s = x
        * (1.0
            - x2 * (1.0 / 6.0)
                * (1.0
                    - x2 * (1.0 / 20.0)
                        * (1.0
                            - x2 * (1.0 / 42.0)
                                * (1.0
                                    - x2 * (1.0 / 72.0)
                                        * (1.0 - x2 * (1.0 / 110.0) * (1.0 - x2 * (1.0 / 156.0)))))));
    let c = 1.0
        - x2 * 0.5
            * (1.0
                - x2 * (1.0 / 12.0)
                    * (1.0
                        - x2 * (1.0 / 30.0)
                            * (1.0
                                - x2 * (1.0 / 56.0)
                                    * (1.0
                                        - x2 * (1.0 / 90.0)
                                            * (1.0 - x2 * (1.0 / 132.0) * (1.0 - x2 * (1.0 / 182.0)))))));
    (s, c)
}

fn require_finite(values: &[(&str, f64)]) -> Result<()> {
    for (name, x) in values {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("{name} = {x}")));
        }
    }
    Ok(())
}

/// Rotates the Bloch components under a constant drive; `c`, `s` untouched.
pub fn rotate_step(node: BlochNode, omega: f64, delta: f64, tau: f64) -> Result<BlochNode> {
    require_finite(&[("omega", omega), ("delta", delta), ("tau", tau)])?;
    if !node.is_finite() {
        return Err(Error::NonFinite(format!("node {node:?}")));
    }
    if tau <= 0.0 {
        return Err(Error::StepControl(format!("tau must be > 0 (got {tau})")));
    }
    let mut out = node;
    out.rotate(omega, delta, tau);
    Ok(out)
}

/// Advances the field convolution pair `(c, s)` by one sub-step.
pub fn convolution_step(c: f64, s: f64, omega: f64, delta: f64, tau: f64) -> (f64, f64) {
    let mut node = BlochNode {
        c,
        s,
        ..BlochNode::ground()
    };
    node.convolve(omega, &Precession::new(delta, tau));
    (node.c, node.s)
}

/// Transverse damping over `tau`; `t2 = f64::INFINITY` disables it.
pub fn apply_decay(node: BlochNode, tau: f64, t2: f64) -> BlochNode {
    if t2.is_infinite() {
        return node;
    }
    let k = (-tau / t2).exp();
    BlochNode {
        u: node.u * k,
        v: node.v * k,
        ..node
    }
}

pub fn renormalized_components(node: &BlochNode) -> (f64, f64) {
    (node.u + node.s, node.v - node.c)
}

/// Sub-step size together with the bandwidth it has to resolve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub tau: f64,
    pub pulse_bandwidth: f64,
}

impl StepControl {
    /// Upper bound on `Δp·τ`.
    pub const MAX_BANDWIDTH_PHASE: f64 = 0.01;
    /// Upper bound on `Ωmax·τ` (rad).
    pub const MAX_DRIVE_ANGLE: f64 = 0.02;

    /// Builds step control for an envelope whose shortest feature lasts
    /// `feature_us`.
    pub fn for_feature(tau: f64, feature_us: f64) -> Self {
        Self {
            tau,
            pulse_bandwidth: std::f64::consts::TAU / feature_us,
        }
    }

    pub fn check(&self, omega_max: f64) -> Result<()> {
        let mut problems = Vec::new();
        let phase = self.pulse_bandwidth * self.tau;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            problems.push(format!("tau must be finite and > 0 (got {})", self.tau));
        }
        if phase > Self::MAX_BANDWIDTH_PHASE * (1.0 + 1e-12) {
            problems.push(format!(
                "bandwidth phase Δp·τ = {phase:.6} exceeds {}",
                Self::MAX_BANDWIDTH_PHASE
            ));
        }
        let angle = omega_max.abs() * self.tau;
        if angle > Self::MAX_DRIVE_ANGLE * (1.0 + 1e-12) {
            problems.push(format!(
                "drive angle Ωmax·τ = {angle:.6} rad exceeds {}",
                Self::MAX_DRIVE_ANGLE
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::StepControl(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, LN_2, PI};

    fn node(u: f64, v: f64, w: f64) -> BlochNode {
        BlochNode {
            u,
            v,
            w,
            c: 0.0,
            s: 0.0,
        }
    }

    fn assert_node(n: &BlochNode, u: f64, v: f64, w: f64) {
        assert_abs_diff_eq!(n.u, u, epsilon = 1e-12);
        assert_abs_diff_eq!(n.v, v, epsilon = 1e-12);
        assert_abs_diff_eq!(n.w, w, epsilon = 1e-12);
    }

    #[test]
    fn resonant_pi_rotation_inverts() {
        let n = rotate_step(BlochNode::ground(), PI, 0.0, 1.0).unwrap();
        assert_node(&n, 0.0, 0.0, 1.0);
    }

    #[test]
    fn resonant_half_pi_rotation() {
        let n = rotate_step(BlochNode::ground(), FRAC_PI_2, 0.0, 1.0).unwrap();
        assert_node(&n, 0.0, 1.0, 0.0);
    }

    #[test]
    fn free_precession_quarter_turn() {
        let n = rotate_step(node(1.0, 0.0, 0.0), 0.0, FRAC_PI_2, 1.0).unwrap();
        assert_node(&n, 0.0, 1.0, 0.0);
    }

    #[test]
    fn rotate_leaves_convolutions_alone() {
        let start = BlochNode {
            c: 0.3,
            s: -0.2,
            ..BlochNode::ground()
        };
        let n = rotate_step(start, 1.0, 2.0, 0.1).unwrap();
        assert_eq!((n.c, n.s), (0.3, -0.2));
    }

    #[test]
    fn rotate_rejects_bad_input() {
        assert!(matches!(
            rotate_step(BlochNode::ground(), f64::NAN, 0.0, 1.0),
            Err(Error::NonFinite(_))
        ));
        assert!(rotate_step(BlochNode::ground(), 1.0, f64::INFINITY, 1.0).is_err());
        assert!(rotate_step(BlochNode::ground(), 1.0, 0.0, 0.0).is_err());
        let bad = BlochNode {
            c: f64::NAN,
            ..BlochNode::ground()
        };
        assert!(rotate_step(bad, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn convolution_resonant_limit() {
        let (c, s) = convolution_step(0.0, 0.0, 0.5, 0.0, 1.0);
        assert_abs_diff_eq!(c, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
        // just inside the small-phase branch
        let (c, s) = convolution_step(0.0, 0.0, 0.5, 1e-7, 1.0);
        assert_abs_diff_eq!(c, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(s, 0.5 * 0.5e-7, epsilon = 1e-15);
    }

    #[test]
    fn convolution_half_turn() {
        // Δτ = π with Ω/Δ = 1
        let (c, s) = convolution_step(0.0, 0.0, 2.0, 2.0, PI / 2.0);
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn convolution_pure_rotation() {
        let (c, s) = convolution_step(1.0, 0.0, 0.0, FRAC_PI_2, 1.0);
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decay_examples() {
        let n = apply_decay(node(0.0, 1.0, 0.0), LN_2, 1.0);
        assert_abs_diff_eq!(n.v, 0.5, epsilon = 1e-15);

        let start = BlochNode {
            u: 0.2,
            v: 0.4,
            w: 0.1,
            c: 1.0,
            s: 2.0,
        };
        assert_eq!(apply_decay(start, 3.0, f64::INFINITY), start);

        let n = apply_decay(node(0.6, 0.8, 0.0), LN_2, 1.0);
        assert_abs_diff_eq!(n.u, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(n.v, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(n.norm_sq().sqrt(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn decay_keeps_w_and_convolutions() {
        let start = BlochNode {
            u: 0.2,
            v: 0.4,
            w: 0.1,
            c: 1.0,
            s: 2.0,
        };
        let n = apply_decay(start, 0.5, 2.0);
        assert_eq!((n.w, n.c, n.s), (0.1, 1.0, 2.0));
    }

    #[test]
    fn renormalized_examples() {
        assert_eq!(renormalized_components(&BlochNode::ground()), (0.0, 0.0));
        let n = BlochNode {
            u: 0.1,
            v: 0.3,
            w: 0.0,
            c: 0.3,
            s: 0.2,
        };
        let (uu, vv) = renormalized_components(&n);
        assert_abs_diff_eq!(uu, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(vv, 0.0, epsilon = 1e-15);
    }

    /// Smooth pulse integrated with fine sub-steps at a detuning far outside
    /// its bandwidth; the renormalized pair must come back to (almost) zero.
    #[test]
    fn renormalized_pair_vanishes_far_from_resonance() {
        let width = 1.0; // sech width (µs)
        let bandwidth = std::f64::consts::TAU / (2.0 * 2f64.acosh() * width);
        let delta = 20.0 * bandwidth;
        let tau = 1e-3;
        let mut n = BlochNode::ground();
        let p = Precession::new(delta, tau);
        let mut t = -12.0;
        while t < 12.0 {
            t += tau;
            let omega = (2.0 / width) / (t / width).cosh();
            n.rotate(omega, delta, tau);
            n.convolve(omega, &p);
        }
        let (uu, vv) = renormalized_components(&n);
        assert!(uu.abs() < 0.05 && vv.abs() < 0.05, "U={uu} V={vv}");
        // far from resonance the atom is barely touched at all
        assert!((n.w + 1.0).abs() < 1e-3);
    }

    #[test]
    fn fast_sin_cos_matches_libm() {
        let mut x = -0.3;
        while x < 0.3 {
            let (s, c) = half_angle_sin_cos(x);
            assert_abs_diff_eq!(s, x.sin(), epsilon = 2e-16);
            assert_abs_diff_eq!(c, x.cos(), epsilon = 2e-16);
            x += 1e-3;
        }
    }

    #[test]
    fn grid_layout() {
        let g = DetuningGrid::uniform(4.0, 9).unwrap();
        assert_eq!(g.deltas()[0], -4.0);
        assert_eq!(*g.deltas().last().unwrap(), 4.0);
        assert_eq!(g.deltas()[g.center()], 0.0);
        for (a, b) in g.deltas().iter().zip(g.deltas().iter().rev()) {
            assert_eq!(*a, -*b);
        }
        let total: f64 = g.weights().iter().sum();
        assert!((total - 8.0).abs() <= 1e-12 * 8.0);
        assert_abs_diff_eq!(g.spacing(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn grid_rejects_even_or_tiny() {
        assert!(DetuningGrid::uniform(4.0, 8).is_err());
        assert!(DetuningGrid::uniform(4.0, 1).is_err());
        assert!(DetuningGrid::uniform(0.0, 9).is_err());
        assert!(DetuningGrid::with_max_spacing(4.0, 0.0).is_err());
    }

    #[test]
    fn grid_with_max_spacing() {
        let g = DetuningGrid::with_max_spacing(9.0, 0.02).unwrap();
        assert!(g.spacing() <= 0.02);
        assert_eq!(g.len() % 2, 1);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 18.0).abs() <= 1e-12 * 18.0);
    }

    #[test]
    fn step_control_bounds() {
        let ok = StepControl::for_feature(0.01, 7.0);
        assert!(ok.check(1.5).is_ok());
        assert!(matches!(ok.check(2.5), Err(Error::StepControl(_))));
        let too_coarse = StepControl::for_feature(0.05, 7.0);
        assert!(too_coarse.check(0.1).is_err());
    }

    proptest! {
        #[test]
        fn rotation_composes(
            omega in -3.0f64..3.0, delta in -20.0f64..20.0,
            t1 in 1e-4f64..0.5, t2 in 1e-4f64..0.5,
            u in -1.0f64..1.0, v in -1.0f64..1.0, w in -1.0f64..1.0,
        ) {
            let start = node(u, v, w);
            let two = rotate_step(rotate_step(start, omega, delta, t1).unwrap(), omega, delta, t2).unwrap();
            let one = rotate_step(start, omega, delta, t1 + t2).unwrap();
            prop_assert!((two.u - one.u).abs() < 1e-12);
            prop_assert!((two.v - one.v).abs() < 1e-12);
            prop_assert!((two.w - one.w).abs() < 1e-12);
        }

        #[test]
        fn sign_flip_symmetry(
            history in proptest::collection::vec(-2.0f64..2.0, 1..40),
            delta in -10.0f64..10.0,
        ) {
            let tau = 0.01;
            let p = Precession::new(delta, tau);
            let mut plus = BlochNode::ground();
            let mut minus = BlochNode::ground();
            for &om in &history {
                plus.rotate(om, delta, tau);
                plus.convolve(om, &p);
                minus.rotate(-om, delta, tau);
                minus.convolve(-om, &p);
            }
            prop_assert!((plus.u + minus.u).abs() < 1e-12);
            prop_assert!((plus.v + minus.v).abs() < 1e-12);
            prop_assert!((plus.w - minus.w).abs() < 1e-12);
            prop_assert!((plus.c + minus.c).abs() < 1e-12);
            prop_assert!((plus.s + minus.s).abs() < 1e-12);
        }
    }
}
