//! Input envelopes, area and fluence functionals, and the closed-form
//! propagation laws used as references for the solver.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Real Rabi-frequency envelope sampled on a uniform time grid.
///
/// In the solver each sample `k ≥ 1` is the drive held over `(t_{k-1}, t_k]`,
/// so the trapezoid area of an envelope that starts and ends at zero equals
/// the rotation angle a resonant atom experiences.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEnvelope {
    t0: f64,
    dt: f64,
    samples: Vec<f64>,
}

impl PulseEnvelope {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        let mut problems = Vec::new();
        if !(dt.is_finite() && dt > 0.0) {
            problems.push(format!("sample interval must be finite and > 0 (got {dt})"));
        }
        if !t0.is_finite() {
            problems.push(format!("start time must be finite (got {t0})"));
        }
        if samples.len() < 2 {
            problems.push("envelope needs at least two samples".to_string());
        } else if samples[0] != 0.0 || samples[samples.len() - 1] != 0.0 {
            problems.push("envelope must start and end at zero amplitude".to_string());
        }
        if let Some(bad) = samples.iter().position(|x| !x.is_finite()) {
            problems.push(format!("sample {bad} is not finite"));
        }
        if problems.is_empty() {
            Ok(Self { t0, dt, samples })
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Same sampling, arbitrary values. Used for solver output, which need
    /// not return to zero inside the record.
    pub(crate) fn from_raw(t0: f64, dt: f64, samples: Vec<f64>) -> Self {
        Self { t0, dt, samples }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Length of the record in µs.
    pub fn span(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 * self.dt
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Appends zero samples until the record covers at least `window` µs.
    pub fn padded_to(mut self, window: f64) -> Self {
        let needed = (window / self.dt - 1e-9).ceil() as usize + 1;
        if needed > self.samples.len() {
            self.samples.resize(needed, 0.0);
        }
        self
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|x| x * k).collect(),
            ..self.clone()
        }
    }

    /// Delays the pulse by `steps` samples, keeping the record length.
    pub fn delayed(&self, steps: usize) -> Self {
        let n = self.samples.len();
        let mut samples = vec![0.0; n];
        if steps < n {
            samples[steps..].copy_from_slice(&self.samples[..n - steps]);
        }
        Self {
            samples,
            ..self.clone()
        }
    }

    /// Resamples at `dt / 2`, holding each sample's value over both halves of
    /// its interval so the piecewise-constant drive is unchanged.
    pub fn refined(&self) -> Self {
        let mut samples = Vec::with_capacity(2 * self.samples.len());
        samples.push(self.samples[0]);
        for &x in &self.samples[1..] {
            samples.push(x);
            samples.push(x);
        }
        Self {
            t0: self.t0,
            dt: 0.5 * self.dt,
            samples,
        }
    }
}

/// Pulse area in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AreaValue {
    pub radians: f64,
}

impl AreaValue {
    pub fn new(radians: f64) -> Result<Self> {
        if radians.is_finite() {
            Ok(Self { radians })
        } else {
            Err(Error::NonFinite(format!("pulse area {radians}")))
        }
    }

    pub fn from_pi_units(units: f64) -> Result<Self> {
        Self::new(units * PI)
    }

    pub fn pi_units(&self) -> f64 {
        self.radians / PI
    }
}

/// Flat-topped pulse starting at `t0` with one-sample edge ramps.
///
/// The flat top is `area / (n·dt)` where `n = round(duration/dt)`, so the
/// trapezoid area is exactly `area`; for commensurate `duration` it equals
/// `area / duration`.
pub fn rectangular_pulse(area: f64, duration: f64, t0: f64, dt: f64) -> Result<PulseEnvelope> {
    if !(dt.is_finite() && dt > 0.0 && duration.is_finite()) || duration < 10.0 * dt * (1.0 - 1e-9)
    {
        return Err(Error::Validation(vec![format!(
            "rectangular pulse needs duration >= 10 samples (duration {duration} µs, dt {dt} µs)"
        )]));
    }
    if !area.is_finite() {
        return Err(Error::NonFinite(format!("pulse area {area}")));
    }
    let n = (duration / dt).round() as usize;
    let level = area / (n as f64 * dt);
    let mut samples = vec![level; n + 2];
    samples[0] = 0.0;
    samples[n + 1] = 0.0;
    if area == 0.0 {
        samples.iter_mut().for_each(|x| *x = 0.0);
    }
    PulseEnvelope::new(t0, dt, samples)
}

/// `Ω(t) = (2/τs)·sech((t − t0)/τs)` sampled on `t0 ± span·τs`, a sample
/// exactly at the peak, and the two end samples clamped to zero.
pub fn sech_pulse(width: f64, t0: f64, dt: f64, span: f64) -> Result<PulseEnvelope> {
    let mut problems = Vec::new();
    if !(width.is_finite() && width > 0.0) {
        problems.push(format!("sech width must be finite and > 0 (got {width})"));
    }
    if !(span >= 10.0) {
        problems.push(format!("sech span must be >= 10 widths (got {span})"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        problems.push(format!("sample interval must be finite and > 0 (got {dt})"));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let half = (span * width / dt).ceil() as usize;
    let mut samples: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let x = (k as f64 - half as f64) * dt / width;
            2.0 / width / x.cosh()
        })
        .collect();
    samples[0] = 0.0;
    samples[2 * half] = 0.0;
    PulseEnvelope::new(t0 - half as f64 * dt, dt, samples)
}

fn trapezoid(dt: f64, values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    for x in values {
        if let Some(p) = prev {
            sum += 0.5 * (p + x);
        }
        prev = Some(x);
    }
    sum * dt
}

pub fn pulse_area(p: &PulseEnvelope) -> AreaValue {
    AreaValue {
        radians: trapezoid(p.dt, p.samples.iter().copied()),
    }
}

/// Fluence `∫Ω² dt` in rad²/µs.
pub fn pulse_energy(p: &PulseEnvelope) -> f64 {
    trapezoid(p.dt, p.samples.iter().map(|x| x * x))
}

/// Transmitted area after an absorber of opacity `alpha_l`, from
/// `tan(A_out/2) = exp(−αL/2)·tan(A_in/2)`.
///
/// The inverse tangent is taken on the branch `k = round(A_in / 2π)`, which
/// makes the map continuous and reduces to the identity at zero opacity.
/// Odd multiples of π are returned unchanged.
pub fn area_theorem(a_in: AreaValue, alpha_l: f64) -> Result<AreaValue> {
    let a = a_in.radians;
    if a < 0.0 {
        return Err(Error::Validation(vec![format!(
            "area theorem input must be >= 0 (got {a})"
        )]));
    }
    if !alpha_l.is_finite() {
        return Err(Error::NonFinite(format!("opacity {alpha_l}")));
    }
    let odd = ((a / PI - 1.0) / 2.0).round() * 2.0 + 1.0;
    if (a - odd * PI).abs() < 1e-9 {
        return Ok(a_in);
    }
    let k = (a / (2.0 * PI)).round();
    let half = ((-0.5 * alpha_l).exp() * (0.5 * a).tan()).atan();
    AreaValue::new(2.0 * (half + k * PI))
}

/// Amplitude transmission `exp(−αL/2)` of a weak field; square it for
/// intensity.
pub fn bouguer_transmission(alpha_l: f64) -> f64 {
    (-0.5 * alpha_l).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rect(area: f64) -> PulseEnvelope {
        rectangular_pulse(area, 7.0, 0.0, 0.01).unwrap()
    }

    #[test]
    fn rectangular_levels() {
        let p = rect(PI);
        assert_relative_eq!(p.samples()[1], PI / 7.0, max_relative = 1e-12);
        assert_relative_eq!(p.samples()[1], 0.448_799, max_relative = 1e-5);
        let p = rect(3.4 * PI);
        assert_relative_eq!(p.samples()[350], 1.525_92, max_relative = 1e-5);
        assert!(rect(0.0).samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rectangular_area_and_energy() {
        let p = rect(PI);
        assert_relative_eq!(pulse_area(&p).radians, PI, max_relative = 1e-3);
        assert_relative_eq!(pulse_energy(&p), 1.409_943_5, max_relative = 1e-7);
        assert_eq!(pulse_energy(&rect(0.0)), 0.0);
    }

    #[test]
    fn rectangular_rejects_short_duration() {
        assert!(rectangular_pulse(PI, 0.05, 0.0, 0.01).is_err());
        assert!(rectangular_pulse(PI, 7.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn incommensurate_rectangle_keeps_area() {
        let p = rectangular_pulse(PI, 7.0, 0.0, 0.0111).unwrap();
        assert_relative_eq!(pulse_area(&p).radians, PI, max_relative = 1e-12);
    }

    #[test]
    fn sech_shape() {
        let p = sech_pulse(1.0, 10.0, 0.01, 10.0).unwrap();
        let peak = p.samples().len() / 2;
        assert_relative_eq!(p.time(peak), 10.0, epsilon = 1e-12);
        assert_relative_eq!(p.samples()[peak], 2.0, max_relative = 1e-15);
        assert_relative_eq!(pulse_area(&p).radians, 2.0 * PI, max_relative = 2e-3);
        for &w in &[0.3, 0.7, 2.5] {
            let p = sech_pulse(w, 0.0, w / 200.0, 10.0).unwrap();
            assert_relative_eq!(pulse_area(&p).radians, 2.0 * PI, max_relative = 2e-3);
        }
    }

    #[test]
    fn sech_half_amplitude_points() {
        let width = 1.3;
        let x = 2f64.acosh();
        assert_relative_eq!(x, 1.316_958, max_relative = 1e-6);
        // the continuous profile at ±arccosh(2)·τs is half the peak
        let half = (2.0 / width) / x.cosh();
        assert_relative_eq!(half, 1.0 / width, max_relative = 1e-12);
        assert!(sech_pulse(1.0, 0.0, 0.01, 5.0).is_err());
    }

    #[test]
    fn area_additivity_for_disjoint_pulses() {
        let a = rect(0.7);
        let b = rect(1.9);
        let mut joined = a.samples().to_vec();
        joined.extend_from_slice(b.samples());
        let joined = PulseEnvelope::new(0.0, 0.01, joined).unwrap();
        assert_relative_eq!(
            pulse_area(&joined).radians,
            pulse_area(&a).radians + pulse_area(&b).radians,
            max_relative = 1e-12
        );
    }

    #[test]
    fn envelope_invariants_enforced() {
        assert!(PulseEnvelope::new(0.0, 0.1, vec![1.0, 0.0]).is_err());
        assert!(PulseEnvelope::new(0.0, 0.0, vec![0.0, 0.0]).is_err());
        assert!(PulseEnvelope::new(0.0, 0.1, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn refinement_preserves_area() {
        let p = rect(1.3 * PI).padded_to(20.0);
        let r = p.refined();
        assert_eq!(r.len(), 2 * p.len() - 1);
        assert_relative_eq!(
            pulse_area(&r).radians,
            pulse_area(&p).radians,
            max_relative = 1e-12
        );
    }

    #[test]
    fn area_theorem_reference_values() {
        let out = area_theorem(AreaValue::from_pi_units(0.5).unwrap(), 5.0).unwrap();
        assert_relative_eq!(out.radians, 0.163_802_757_9, max_relative = 1e-9);
        assert_relative_eq!(out.radians / (0.5 * PI), 0.104_28, max_relative = 5e-5);

        let out = area_theorem(AreaValue::from_pi_units(3.4).unwrap(), 5.0).unwrap();
        assert_relative_eq!(out.radians, 12.341_364_13, max_relative = 1e-9);
        assert_relative_eq!(out.pi_units(), 3.928_378_21, max_relative = 1e-9);

        for m in 0..6 {
            let a = AreaValue::from_pi_units(m as f64).unwrap();
            assert_relative_eq!(
                area_theorem(a, 5.0).unwrap().radians,
                a.radians,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn area_theorem_rejects_negative() {
        assert!(area_theorem(AreaValue { radians: -0.1 }, 5.0).is_err());
    }

    #[test]
    fn area_theorem_fixed_point_stability() {
        let h = 1e-6;
        for m in 1..6 {
            let a = m as f64 * PI;
            let up = area_theorem(AreaValue { radians: a + h }, 5.0).unwrap().radians;
            let dn = area_theorem(AreaValue { radians: a - h }, 5.0).unwrap().radians;
            let slope = (up - dn) / (2.0 * h);
            if m % 2 == 0 {
                assert!(slope < 1.0, "m={m} slope={slope}");
            } else {
                assert!(slope > 1.0, "m={m} slope={slope}");
            }
        }
    }

    #[test]
    fn area_theorem_continuous_at_odd_multiples() {
        for m in [1.0, 3.0, 5.0] {
            let mut prev_gap = f64::INFINITY;
            for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
                let up = area_theorem(AreaValue { radians: m * PI + eps }, 5.0).unwrap();
                let dn = area_theorem(AreaValue { radians: m * PI - eps }, 5.0).unwrap();
                let gap = (up.radians - dn.radians).abs();
                assert!(gap < prev_gap);
                prev_gap = gap;
            }
            assert!(prev_gap < 1e-4);
        }
    }

    #[test]
    fn area_theorem_small_area_is_bouguer() {
        let a = AreaValue { radians: 1e-6 };
        let out = area_theorem(a, 5.0).unwrap();
        assert_relative_eq!(out.radians / a.radians, bouguer_transmission(5.0), max_relative = 1e-9);
        assert_relative_eq!(bouguer_transmission(5.0), 0.082_085_0, max_relative = 1e-6);
        assert_relative_eq!(bouguer_transmission(5.0).powi(2), 0.006_737_95, max_relative = 1e-6);
        assert_eq!(bouguer_transmission(0.0), 1.0);
    }

    #[test]
    fn area_theorem_identity_without_absorber() {
        for a in [0.3, 1.7, 4.0, 9.9] {
            let out = area_theorem(AreaValue { radians: a }, 0.0).unwrap();
            assert_relative_eq!(out.radians, a, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn area_theorem_composes(a in 0.0f64..12.0, x in 0.0f64..4.0, y in 0.0f64..4.0) {
            let a = AreaValue { radians: a };
            let two = area_theorem(area_theorem(a, x).unwrap(), y).unwrap();
            let one = area_theorem(a, x + y).unwrap();
            prop_assert!((two.radians - one.radians).abs() <= 1e-12 * one.radians.max(1.0));
        }

        #[test]
        fn area_theorem_is_monotone(a in 0.0f64..12.0, da in 1e-6f64..0.5) {
            let lo = area_theorem(AreaValue { radians: a }, 5.0).unwrap();
            let hi = area_theorem(AreaValue { radians: a + da }, 5.0).unwrap();
            prop_assert!(hi.radians >= lo.radians - 1e-12);
        }

        #[test]
        fn area_and_energy_scale(k in -5.0f64..5.0, area in 0.1f64..10.0) {
            let p = rect(area);
            let q = p.scaled(k);
            prop_assert!((pulse_area(&q).radians - k * pulse_area(&p).radians).abs() < 1e-9);
            prop_assert!((pulse_energy(&q) - k * k * pulse_energy(&p)).abs() < 1e-9 * (1.0 + pulse_energy(&q)));
        }
    }
}
