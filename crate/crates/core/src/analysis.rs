//! Post-run metrics: area transmission, pulse duration and shape, depth
//! inversion, energy bookkeeping and soliton fidelity.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::engine::RunResult;
use crate::error::{Error, Result};
use crate::pulse::{pulse_area, pulse_energy, PulseEnvelope};

/// Relative level (of the global peak) used by the tail-lobe detector.
pub const LOBE_LEVEL: f64 = 0.05;
/// Pass threshold of the energy balance residual.
pub const ENERGY_BALANCE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunMetrics {
    pub a_in: f64,
    pub a_out: f64,
    /// `a_out / a_in`; absent for a zero-area input.
    pub area_ratio: Option<f64>,
    pub energy_in: f64,
    pub energy_out: f64,
    pub rms_duration_in: f64,
    pub rms_duration_out: f64,
    pub tail_lobe_count: usize,
    pub resonant_inversion_min: f64,
    /// Absent when the run had a finite coherence lifetime.
    pub energy_balance_residual: Option<f64>,
}

pub(crate) fn run_metrics(result: &RunResult) -> Result<RunMetrics> {
    let a_in = pulse_area(&result.input).radians;
    let a_out = pulse_area(&result.omega_out).radians;
    let rms = |p: &PulseEnvelope| duration_metrics(p).map(|d| d.rms).unwrap_or(0.0);
    let balance = if result.t2.is_infinite() {
        Some(energy_balance(result)?.residual)
    } else {
        None
    };
    Ok(RunMetrics {
        a_in,
        a_out,
        area_ratio: (a_in != 0.0).then(|| a_out / a_in),
        energy_in: pulse_energy(&result.input),
        energy_out: pulse_energy(&result.omega_out),
        rms_duration_in: rms(&result.input),
        rms_duration_out: rms(&result.omega_out),
        tail_lobe_count: tail_lobe_count(&result.omega_out),
        resonant_inversion_min: inversion_profile(result).1,
        energy_balance_residual: balance,
    })
}

/// `A_out / A_in`.
pub fn transmission_factor(input: &PulseEnvelope, output: &PulseEnvelope) -> Result<f64> {
    let a_in = pulse_area(input).radians;
    if a_in == 0.0 {
        return Err(Error::Analysis(
            "transmission factor undefined for a zero-area input".into(),
        ));
    }
    Ok(pulse_area(output).radians / a_in)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DurationMetrics {
    /// Intensity-weighted mean time (µs).
    pub centroid: f64,
    /// Intensity-weighted standard deviation (µs).
    pub rms: f64,
    /// Full width at half maximum of `|Ω|`, first to last crossing (µs).
    pub fwhm: f64,
}

pub fn duration_metrics(p: &PulseEnvelope) -> Result<DurationMetrics> {
    let s = p.samples();
    let weight = |k: usize| {
        let end = if k == 0 || k + 1 == s.len() { 0.5 } else { 1.0 };
        end * s[k] * s[k]
    };
    let (mut m0, mut m1) = (0.0, 0.0);
    for k in 0..s.len() {
        let wk = weight(k);
        m0 += wk;
        m1 += wk * p.time(k);
    }
    if m0 == 0.0 {
        return Err(Error::Analysis("duration of a zero envelope".into()));
    }
    let centroid = m1 / m0;
    let m2: f64 = (0..s.len())
        .map(|k| weight(k) * (p.time(k) - centroid).powi(2))
        .sum();

    let half = 0.5 * p.peak();
    let crossing = |k: usize| {
        // linear interpolation between samples k and k+1
        let (a, b) = (s[k].abs(), s[k + 1].abs());
        p.time(k) + p.dt() * (half - a) / (b - a)
    };
    let first = (0..s.len() - 1).find(|&k| s[k].abs() < half && s[k + 1].abs() >= half);
    let last = (0..s.len() - 1).rfind(|&k| s[k].abs() >= half && s[k + 1].abs() < half);
    let fwhm = match (first, last) {
        (Some(a), Some(b)) => crossing(b) - crossing(a),
        _ => p.span(),
    };
    Ok(DurationMetrics {
        centroid,
        rms: (m2 / m0).sqrt(),
        fwhm,
    })
}

/// `w(Δ = 0, ζ)` at the end of the run and its minimum over depth.
pub fn inversion_profile(result: &RunResult) -> (Vec<f64>, f64) {
    let column = result.inversion_map.resonant_column();
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    (column, min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBalance {
    /// `½[∫Ω²(0,t)dt − ∫Ω²(αL,t)dt]`
    pub lhs: f64,
    /// `(1/2π)∫dζ∫dΔ (w + 1)` over the detuning grid.
    pub rhs_grid: f64,
    /// Estimated excitation of the atoms beyond `±Δmax`.
    pub rhs_wings: f64,
    /// `rhs_grid + rhs_wings`
    pub rhs: f64,
    /// `|lhs − rhs|` relative to the input fluence `½∫Ω²(0,t)dt`.
    pub residual: f64,
}

impl EnergyBalance {
    pub fn passed(&self) -> bool {
        self.residual < ENERGY_BALANCE_TOLERANCE
    }
}

/// Compares the fluence lost by the field with the excitation left in the
/// medium, both with the solver's own quadratures. Only meaningful without
/// transverse decay.
///
/// The field update accounts for every atom, including those beyond the
/// grid, whose excitation the grid cannot see. Far off resonance atoms
/// respond linearly and `w + 1` falls as `1/Δ²`, so the missing part is
/// extrapolated from the outer half of the grid. The residual is taken
/// relative to the input fluence, which stays meaningful when a soliton
/// leaves almost nothing behind.
pub fn energy_balance(result: &RunResult) -> Result<EnergyBalance> {
    if result.t2.is_finite() {
        return Err(Error::Analysis(
            "energy balance requires an infinite coherence lifetime".into(),
        ));
    }
    let fluence_in = 0.5 * pulse_energy(&result.input);
    let lhs = fluence_in - 0.5 * pulse_energy(&result.omega_out);
    let map = &result.inversion_map;
    let dmax = map.deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let outer: Vec<usize> = (0..map.deltas.len())
        .filter(|&j| map.deltas[j].abs() >= 0.5 * dmax)
        .collect();
    let model: f64 = outer
        .iter()
        .map(|&j| map.weights[j] / (map.deltas[j] * map.deltas[j]))
        .sum();
    let mut grid_slab = Vec::with_capacity(map.zetas.len());
    let mut wing_slab = Vec::with_capacity(map.zetas.len());
    for iz in 0..map.zetas.len() {
        let row = map.row(iz);
        grid_slab.push(row.iter().zip(&map.weights).map(|(w, wt)| wt * (w + 1.0)).sum::<f64>());
        // fit K/Δ² on the outer band, integrate it over |Δ| > Δmax
        let band: f64 = outer.iter().map(|&j| map.weights[j] * (row[j] + 1.0)).sum();
        wing_slab.push(if model > 0.0 { band / model * 2.0 / dmax } else { 0.0 });
    }
    let depth = |f: &[f64]| -> f64 {
        f.windows(2)
            .zip(map.zetas.windows(2))
            .map(|(f, z)| 0.5 * (f[0] + f[1]) * (z[1] - z[0]))
            .sum::<f64>()
            / TAU
    };
    let rhs_grid = depth(&grid_slab);
    let rhs_wings = depth(&wing_slab);
    let rhs = rhs_grid + rhs_wings;
    let diff = (lhs - rhs).abs();
    let residual = if diff == 0.0 { 0.0 } else { diff / fluence_in.abs() };
    Ok(EnergyBalance {
        lhs,
        rhs_grid,
        rhs_wings,
        rhs,
        residual,
    })
}

/// Best non-negative integer-sample delay of `output` relative to `input`
/// and the relative L2 misfit at that delay. Samples shifted past the end of
/// `output` count as zero.
pub fn soliton_fidelity(input: &PulseEnvelope, output: &PulseEnvelope) -> Result<(f64, f64)> {
    if input.len() != output.len() || (input.dt() - output.dt()).abs() > 1e-12 * input.dt() {
        return Err(Error::Analysis(
            "soliton fidelity needs identically sampled envelopes".into(),
        ));
    }
    let a = input.samples();
    let b = output.samples();
    let norm: f64 = a.iter().map(|x| x * x).sum();
    if norm == 0.0 {
        return Err(Error::Analysis("soliton fidelity of a zero input".into()));
    }
    let mut best = (0usize, f64::INFINITY);
    for d in 0..a.len() {
        let misfit: f64 = a
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let y = b.get(k + d).copied().unwrap_or(0.0);
                (y - x) * (y - x)
            })
            .sum();
        if misfit < best.1 {
            best = (d, misfit);
        }
    }
    Ok((best.0 as f64 * input.dt(), (best.1 / norm).sqrt()))
}

/// Secondary lobes trailing the main pulse.
///
/// After the global peak, the envelope must first drop below 5% of the
/// peak; every later excursion of `|Ω|` back above that level counts as one
/// lobe (each excursion holds one local maximum above the level).
pub fn tail_lobe_count(p: &PulseEnvelope) -> usize {
    let s = p.samples();
    let peak = p.peak();
    if peak == 0.0 {
        return 0;
    }
    let level = LOBE_LEVEL * peak;
    let Some(top) = s.iter().position(|x| x.abs() == peak) else {
        return 0;
    };
    let Some(quiet) = s[top..].iter().position(|x| x.abs() < level) else {
        return 0;
    };
    let mut lobes = 0;
    let mut above = false;
    for x in &s[top + quiet..] {
        let now = x.abs() > level;
        if now && !above {
            lobes += 1;
        }
        above = now;
    }
    lobes
}

/// Propagation regime of an input area, in the four-region picture of the
/// area-transmission curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    /// Weak pulses, close to linear absorption.
    I,
    /// Around π: strong stretching.
    II,
    /// Around 2π: soliton-like.
    III,
    /// Around 3π: stretched trailing lobe.
    IV,
    /// 3.5π and above.
    Beyond,
}

pub fn region_classify(a_in: f64) -> Result<Region> {
    if !(a_in >= 0.0) {
        return Err(Error::Analysis(format!(
            "region undefined for area {a_in}"
        )));
    }
    let x = a_in / PI;
    Ok(if x < 0.7 {
        Region::I
    } else if x < 1.5 {
        Region::II
    } else if x < 2.5 {
        Region::III
    } else if x < 3.5 {
        Region::IV
    } else {
        Region::Beyond
    })
}
