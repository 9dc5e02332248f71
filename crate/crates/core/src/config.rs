//! Run configuration: a flat `key = value` document with `#` comments.
//!
//! ```text
//! scenario = propagate        # propagate | area-curve | soliton-check | convergence-check
//! alphaL = 5
//! t2_us = inf
//! pulse.shape = rect          # rect | sech
//! pulse.area_pi_units = 1
//! pulse.duration_us = 7       # rect
//! pulse.tau_s_us = 1          # sech
//! grid.nz = 101               # optional overrides
//! grid.n_omega = 803
//! grid.dmax = 8.97
//! grid.dt_us = 0.0111
//! grid.window_us = 140
//! out_dir = out
//! ```

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::bloch::{DetuningGrid, StepControl};
use crate::engine::{
    default_detuning_spacing, default_nz, MediumConfig, RunOptions, DEFAULT_DMAX_BANDWIDTHS,
    MAX_SLAB_OPACITY, MIN_QUIET_TAIL,
};
use crate::error::{Error, Result};
use crate::pulse::{rectangular_pulse, sech_pulse, PulseEnvelope};

/// Default record length for rectangular pulses, in pulse durations. The
/// stretched output near the odd-π fixed points keeps a slow tail.
pub const RECT_WINDOW_DURATIONS: f64 = 20.0;
/// Half-width of the sampled sech support, in `τs`.
pub const SECH_SPAN: f64 = 10.0;
/// Extra record after the sech support, in `τs`, on top of the expected
/// propagation delay of `αL/2` widths.
pub const SECH_MARGIN: f64 = 10.0;
/// Fraction of the step-control bound actually used for the default `τ`.
/// The field inside the medium can exceed the input peak, so the drive
/// bound keeps a factor of two spare.
const DRIVE_HEADROOM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Propagate,
    AreaCurve,
    SolitonCheck,
    ConvergenceCheck,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Propagate,
        Scenario::AreaCurve,
        Scenario::SolitonCheck,
        Scenario::ConvergenceCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Propagate => "propagate",
            Scenario::AreaCurve => "area-curve",
            Scenario::SolitonCheck => "soliton-check",
            Scenario::ConvergenceCheck => "convergence-check",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| {
                format!("unknown scenario '{s}' (expected propagate, area-curve, soliton-check or convergence-check)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    Rect,
    Sech,
}

impl fmt::Display for PulseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PulseShape::Rect => "rect",
            PulseShape::Sech => "sech",
        })
    }
}

impl FromStr for PulseShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rect" => Ok(PulseShape::Rect),
            "sech" => Ok(PulseShape::Sech),
            _ => Err(format!("unknown pulse shape '{s}' (expected rect or sech)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub area_pi_units: f64,
    /// Flat-top length of a rectangular pulse.
    pub duration_us: f64,
    /// Width `τs` of a sech pulse.
    pub tau_s_us: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            shape: PulseShape::Rect,
            area_pi_units: 1.0,
            duration_us: 7.0,
            tau_s_us: 1.0,
        }
    }
}

impl PulseSpec {
    /// Full width at half maximum of `|Ω|`.
    pub fn feature_us(&self) -> f64 {
        match self.shape {
            PulseShape::Rect => self.duration_us,
            PulseShape::Sech => 2.0 * 2f64.acosh() * self.tau_s_us,
        }
    }

    pub fn peak_omega(&self) -> f64 {
        let area = (self.area_pi_units * PI).abs();
        match self.shape {
            PulseShape::Rect => area / self.duration_us,
            // (2/τs)·sech carries area 2π
            PulseShape::Sech => area / (PI * self.tau_s_us),
        }
    }
}

/// Optional numerical overrides; `None` takes the derived default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridOverrides {
    pub nz: Option<usize>,
    pub n_omega: Option<usize>,
    pub dmax: Option<f64>,
    pub dt_us: Option<f64>,
    pub window_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub alpha_l: f64,
    /// `f64::INFINITY` for no dephasing.
    pub t2_us: f64,
    pub pulse: PulseSpec,
    pub grid: GridOverrides,
    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Propagate,
            alpha_l: 5.0,
            t2_us: f64::INFINITY,
            pulse: PulseSpec::default(),
            grid: GridOverrides::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: [&str; 13] = [
    "scenario",
    "alphaL",
    "t2_us",
    "pulse.shape",
    "pulse.area_pi_units",
    "pulse.duration_us",
    "pulse.tau_s_us",
    "grid.nz",
    "grid.n_omega",
    "grid.dmax",
    "grid.dt_us",
    "grid.window_us",
    "out_dir",
];

fn parse_f64(value: &str) -> std::result::Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("'{value}' is not a number"))
}

fn parse_t2(value: &str) -> std::result::Result<f64, String> {
    match value {
        "inf" | "Inf" | "infinity" => Ok(f64::INFINITY),
        _ => parse_f64(value),
    }
}

fn parse_usize(value: &str) -> std::result::Result<usize, String> {
    value
        .parse::<usize>()
        .map_err(|_| format!("'{value}' is not a non-negative integer"))
}

/// Parses and validates a configuration document. Keys not given keep
/// their defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg = parse_document(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Syntax-only parse: key names and value types are checked, invariants
/// are not (callers apply overrides first, then [`ScenarioConfig::validate`]).
pub fn parse_document(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected 'key = value', found '{content}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let known = KEYS.iter().find(|k| **k == key).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown key '{key}'"),
        })?;
        if seen.contains(known) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        seen.push(known);
        cfg.set(key, value).map_err(|message| Error::Parse {
            line,
            message: format!("{key}: {message}"),
        })?;
    }
    Ok(cfg)
}

impl ScenarioConfig {
    /// Sets one key from its text form; used by the parser and by command
    /// line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "scenario" => self.scenario = value.parse()?,
            "alphaL" => self.alpha_l = parse_f64(value)?,
            "t2_us" => self.t2_us = parse_t2(value)?,
            "pulse.shape" => self.pulse.shape = value.parse()?,
            "pulse.area_pi_units" => self.pulse.area_pi_units = parse_f64(value)?,
            "pulse.duration_us" => self.pulse.duration_us = parse_f64(value)?,
            "pulse.tau_s_us" => self.pulse.tau_s_us = parse_f64(value)?,
            "grid.nz" => self.grid.nz = Some(parse_usize(value)?),
            "grid.n_omega" => self.grid.n_omega = Some(parse_usize(value)?),
            "grid.dmax" => self.grid.dmax = Some(parse_f64(value)?),
            "grid.dt_us" => self.grid.dt_us = Some(parse_f64(value)?),
            "grid.window_us" => self.grid.window_us = Some(parse_f64(value)?),
            "out_dir" => {
                if value.is_empty() {
                    return Err("must not be empty".into());
                }
                self.out_dir = PathBuf::from(value)
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Canonical text form; `parse_config(&c.serialize())` returns `c`.
    pub fn serialize(&self) -> String {
        let t2 = if self.t2_us.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:?}", self.t2_us)
        };
        let mut out = format!(
            "scenario = {}\nalphaL = {:?}\nt2_us = {t2}\npulse.shape = {}\npulse.area_pi_units = {:?}\npulse.duration_us = {:?}\npulse.tau_s_us = {:?}\n",
            self.scenario,
            self.alpha_l,
            self.pulse.shape,
            self.pulse.area_pi_units,
            self.pulse.duration_us,
            self.pulse.tau_s_us,
        );
        let g = &self.grid;
        if let Some(v) = g.nz {
            out += &format!("grid.nz = {v}\n");
        }
        if let Some(v) = g.n_omega {
            out += &format!("grid.n_omega = {v}\n");
        }
        for (key, v) in [("grid.dmax", g.dmax), ("grid.dt_us", g.dt_us), ("grid.window_us", g.window_us)] {
            if let Some(v) = v {
                out += &format!("{key} = {v:?}\n");
            }
        }
        out += &format!("out_dir = {}\n", self.out_dir.display());
        out
    }

    /// Checks every invariant and lists all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.alpha_l) {
            problems.push(format!("alphaL must be finite and > 0 (got {})", self.alpha_l));
        }
        if !(self.t2_us > 0.0) {
            problems.push(format!("t2_us must be > 0 or inf (got {})", self.t2_us));
        }
        let p = &self.pulse;
        if !p.area_pi_units.is_finite() || p.area_pi_units == 0.0 {
            problems.push(format!(
                "pulse.area_pi_units must be finite and nonzero (got {})",
                p.area_pi_units
            ));
        }
        if !positive(p.duration_us) {
            problems.push(format!("pulse.duration_us must be finite and > 0 (got {})", p.duration_us));
        }
        if !positive(p.tau_s_us) {
            problems.push(format!("pulse.tau_s_us must be finite and > 0 (got {})", p.tau_s_us));
        }
        let g = &self.grid;
        if let Some(nz) = g.nz {
            if nz < 2 {
                problems.push(format!("grid.nz must be >= 2 (got {nz})"));
            } else if positive(self.alpha_l)
                && self.alpha_l / (nz - 1) as f64 > MAX_SLAB_OPACITY * (1.0 + 1e-12)
            {
                problems.push(format!(
                    "grid.nz = {nz} gives slabs of {:.4} opacity; at most {MAX_SLAB_OPACITY} is allowed",
                    self.alpha_l / (nz - 1) as f64
                ));
            }
        }
        if let Some(n) = g.n_omega {
            if n < 3 || n % 2 == 0 {
                problems.push(format!("grid.n_omega must be odd and >= 3 (got {n})"));
            }
        }
        for (key, v) in [("grid.dmax", g.dmax), ("grid.dt_us", g.dt_us), ("grid.window_us", g.window_us)] {
            if let Some(v) = v {
                if !positive(v) {
                    problems.push(format!("{key} must be finite and > 0 (got {v})"));
                }
            }
        }
        if problems.is_empty() {
            self.check_sampling(&mut problems);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Step-control and record-length checks; needs the basic invariants.
    fn check_sampling(&self, problems: &mut Vec<String>) {
        let dt = self.dt_us();
        let control = self.step_control();
        let bandwidth_phase = control.pulse_bandwidth * dt;
        if bandwidth_phase > StepControl::MAX_BANDWIDTH_PHASE * (1.0 + 1e-9) {
            problems.push(format!(
                "grid.dt_us = {dt} gives Δp·τ = {bandwidth_phase:.4} > {}",
                StepControl::MAX_BANDWIDTH_PHASE
            ));
        }
        for (label, pulse) in self.checked_pulses() {
            let dt = self.dt_for(&pulse);
            let drive = pulse.peak_omega() * dt;
            if drive > StepControl::MAX_DRIVE_ANGLE * (1.0 + 1e-9) {
                problems.push(format!(
                    "grid.dt_us = {dt} gives Ωmax·τ = {drive:.4} > {} for {label}",
                    StepControl::MAX_DRIVE_ANGLE
                ));
            }
        }
        if self.pulse.shape == PulseShape::Rect && self.pulse.duration_us < 10.0 * dt * (1.0 - 1e-9) {
            problems.push(format!(
                "pulse.duration_us = {} must span >= 10 samples of {dt} µs",
                self.pulse.duration_us
            ));
        }
        let support = self.support_us();
        let window = self.window_us();
        if window < support / (1.0 - MIN_QUIET_TAIL) {
            problems.push(format!(
                "grid.window_us = {window} leaves less than a {:.0}% quiet tail after the {support:.4} µs pulse",
                100.0 * MIN_QUIET_TAIL
            ));
        }
    }

    /// Pulses this scenario will run, for the drive bound.
    fn checked_pulses(&self) -> Vec<(String, PulseSpec)> {
        match self.scenario {
            Scenario::AreaCurve => [AREA_CURVE_MIN, AREA_CURVE_MAX]
                .into_iter()
                .map(|a| {
                    (
                        format!("the {a}π sweep row"),
                        PulseSpec {
                            area_pi_units: a,
                            ..self.pulse.clone()
                        },
                    )
                })
                .collect(),
            Scenario::SolitonCheck => vec![("the 2π sech".into(), self.soliton_pulse())],
            _ => vec![("the input pulse".into(), self.pulse.clone())],
        }
    }

    /// Pulse shape used by the soliton check: a 2π sech of the configured width.
    pub fn soliton_pulse(&self) -> PulseSpec {
        PulseSpec {
            shape: PulseShape::Sech,
            area_pi_units: 2.0,
            ..self.pulse.clone()
        }
    }

    fn effective_pulse(&self) -> PulseSpec {
        match self.scenario {
            Scenario::SolitonCheck => self.soliton_pulse(),
            _ => self.pulse.clone(),
        }
    }

    /// Sampling interval of the scenario's own pulse.
    pub fn dt_us(&self) -> f64 {
        self.dt_for(&self.effective_pulse())
    }

    /// Sampling interval for `pulse`: the override, or the largest interval
    /// meeting the bandwidth bound and half the drive bound, commensurate
    /// with a rectangle's duration.
    pub fn dt_for(&self, pulse: &PulseSpec) -> f64 {
        if let Some(dt) = self.grid.dt_us {
            return dt;
        }
        let peak = pulse.peak_omega();
        let mut dt = StepControl::MAX_BANDWIDTH_PHASE * pulse.feature_us() / TAU;
        if peak > 0.0 {
            dt = dt.min(DRIVE_HEADROOM * StepControl::MAX_DRIVE_ANGLE / peak);
        }
        if pulse.shape == PulseShape::Rect {
            dt = pulse.duration_us / (pulse.duration_us / dt).ceil();
        }
        dt
    }

    /// Single-run config for one row of the area curve.
    pub fn area_curve_row(&self, area_pi_units: f64) -> ScenarioConfig {
        ScenarioConfig {
            scenario: Scenario::Propagate,
            pulse: PulseSpec {
                area_pi_units,
                ..self.pulse.clone()
            },
            ..self.clone()
        }
    }

    fn step_control(&self) -> StepControl {
        StepControl::for_feature(self.dt_us(), self.effective_pulse().feature_us())
    }

    /// Span of the nonzero input samples.
    fn support_us(&self) -> f64 {
        let p = self.effective_pulse();
        match p.shape {
            PulseShape::Rect => p.duration_us + 2.0 * self.dt_us(),
            PulseShape::Sech => 2.0 * SECH_SPAN * p.tau_s_us,
        }
    }

    /// Record length: the override, else twenty durations for a rectangle,
    /// or the sech support plus its expected delay and a margin.
    pub fn window_us(&self) -> f64 {
        if let Some(w) = self.grid.window_us {
            return w;
        }
        let p = self.effective_pulse();
        match p.shape {
            PulseShape::Rect => RECT_WINDOW_DURATIONS * p.duration_us,
            PulseShape::Sech => {
                (2.0 * SECH_SPAN + SECH_MARGIN + 0.5 * self.alpha_l) * p.tau_s_us
            }
        }
    }

    /// Input envelope for `pulse`, sampled and padded per this config.
    pub fn envelope(&self, pulse: &PulseSpec) -> Result<PulseEnvelope> {
        let dt = self.dt_for(pulse);
        let area = pulse.area_pi_units * PI;
        let p = match pulse.shape {
            PulseShape::Rect => rectangular_pulse(area, pulse.duration_us, 0.0, dt)?,
            PulseShape::Sech => {
                let tau_s = pulse.tau_s_us;
                sech_pulse(tau_s, SECH_SPAN * tau_s, dt, SECH_SPAN)?.scaled(pulse.area_pi_units / 2.0)
            }
        };
        Ok(p.padded_to(self.window_us()))
    }

    /// Input envelope of the scenario's own pulse.
    pub fn input(&self) -> Result<PulseEnvelope> {
        self.envelope(&self.effective_pulse())
    }

    /// Medium and grid for `pulse` with the overrides applied.
    pub fn medium(&self) -> Result<MediumConfig> {
        let pulse = self.effective_pulse();
        let bandwidth = TAU / pulse.feature_us();
        let dmax = self.grid.dmax.unwrap_or(DEFAULT_DMAX_BANDWIDTHS * bandwidth);
        let grid = match self.grid.n_omega {
            Some(n) => DetuningGrid::uniform(dmax, n)?,
            None => DetuningGrid::with_max_spacing(dmax, default_detuning_spacing(self.window_us()))?,
        };
        let nz = self.grid.nz.unwrap_or_else(|| default_nz(self.alpha_l));
        MediumConfig::new(self.alpha_l, nz, self.t2_us, grid)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            snapshot_every: 0,
            step_control: Some(self.step_control()),
        }
    }
}

/// Input area range and step of the area-curve sweep, in π units.
pub const AREA_CURVE_MIN: f64 = 0.1;
pub const AREA_CURVE_MAX: f64 = 3.9;
pub const AREA_CURVE_STEP: f64 = 0.1;

/// Input areas of the area-curve sweep, in π units.
pub fn area_curve_inputs() -> Vec<f64> {
    let n = ((AREA_CURVE_MAX - AREA_CURVE_MIN) / AREA_CURVE_STEP).round() as usize;
    (0..=n)
        .map(|k| ((AREA_CURVE_MIN + k as f64 * AREA_CURVE_STEP) * 10.0).round() / 10.0)
        .collect()
}
