//! Time-marching Maxwell–Bloch solver over a depth × detuning lattice.
//!
//! Depth is the opacity coordinate `ζ = αz ∈ [0, αL]`. At each time step the
//! field at every depth is rebuilt from the input sample and the
//! renormalized polarization of the lattice one step earlier:
//!
//! ```text
//! Ω(ζ,t) = Ω(0,t)·e^{−ζ/2} − (1/2π) ∫₀^ζ dζ′ e^{−(ζ−ζ′)/2} P(ζ′,t)
//! P(ζ,t) = ∫ dΔ [V(t−τ)·cos Δτ + U(t−τ)·sin Δτ]
//! ```
//!
//! The `e^{−ζ/2}` factor carries the instantaneous response of the whole,
//! infinitely wide line, which is why `P` only needs atoms near resonance.
//! The lattice is then advanced over `τ` with the new field held constant.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::analysis::{self, RunMetrics};
use crate::bloch::{
    half_angle_sin_cos, rotate_components, taylor_sin_cos, BlochNode, DetuningGrid, Precession,
    StepControl, TAYLOR_LIMIT,
};
use crate::error::{Error, Result};
use crate::pulse::{pulse_area, PulseEnvelope};

/// Largest allowed slab thickness in opacity units.
pub const MAX_SLAB_OPACITY: f64 = 0.1;
/// Slab thickness used when the depth count is not given.
pub const DEFAULT_SLAB_OPACITY: f64 = 0.05;
/// Default half-width of the detuning grid in units of the pulse bandwidth.
pub const DEFAULT_DMAX_BANDWIDTHS: f64 = 10.0;
/// Fraction of the record that must be quiet after the pulse.
pub const MIN_QUIET_TAIL: f64 = 0.2;
/// Amplitude (relative to peak) below which a sample counts as quiet.
pub const QUIET_LEVEL: f64 = 1e-3;

/// Absorber description: opacity, depth discretization, coherence lifetime
/// and detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumConfig {
    pub alpha_l: f64,
    pub nz: usize,
    /// Coherence lifetime in µs; `f64::INFINITY` for none.
    pub t2: f64,
    pub grid: DetuningGrid,
}

impl MediumConfig {
    pub fn new(alpha_l: f64, nz: usize, t2: f64, grid: DetuningGrid) -> Result<Self> {
        let mut problems = Vec::new();
        if !(alpha_l.is_finite() && alpha_l > 0.0) {
            problems.push(format!("alphaL must be finite and > 0 (got {alpha_l})"));
        }
        if nz < 2 {
            problems.push(format!("nz must be >= 2 (got {nz})"));
        } else if alpha_l.is_finite() && alpha_l / (nz - 1) as f64 > MAX_SLAB_OPACITY * (1.0 + 1e-12) {
            problems.push(format!(
                "slab thickness alphaL/(nz-1) = {:.6} exceeds {MAX_SLAB_OPACITY}; use nz >= {}",
                alpha_l / (nz - 1) as f64,
                (alpha_l / MAX_SLAB_OPACITY).ceil() as usize + 1
            ));
        }
        if !(t2 > 0.0) {
            problems.push(format!("t2 must be > 0 or inf (got {t2})"));
        }
        if problems.is_empty() {
            Ok(Self {
                alpha_l,
                nz,
                t2,
                grid,
            })
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Default lattice for `input`: `Δmax` ten bandwidths wide, spacing fine
    /// enough that the grid's revival period is two records long, and
    /// slabs of 0.05 opacity.
    pub fn for_input(alpha_l: f64, t2: f64, input: &PulseEnvelope) -> Result<Self> {
        let bandwidth = pulse_bandwidth(input)?;
        let grid = DetuningGrid::with_max_spacing(
            DEFAULT_DMAX_BANDWIDTHS * bandwidth,
            default_detuning_spacing(input.span()),
        )?;
        Self::new(alpha_l, default_nz(alpha_l), t2, grid)
    }

    pub fn dzeta(&self) -> f64 {
        self.alpha_l / (self.nz - 1) as f64
    }

    pub fn zeta(&self, iz: usize) -> f64 {
        if iz == self.nz - 1 {
            self.alpha_l
        } else {
            iz as f64 * self.dzeta()
        }
    }

    pub fn zetas(&self) -> Vec<f64> {
        (0..self.nz).map(|i| self.zeta(i)).collect()
    }
}

pub fn default_nz(alpha_l: f64) -> usize {
    (alpha_l / DEFAULT_SLAB_OPACITY - 1e-9).ceil().max(1.0) as usize + 1
}

/// `π / T_sim`: the grid's `2π/δΔ` revival lands two windows out.
pub fn default_detuning_spacing(window_us: f64) -> f64 {
    PI / window_us
}

/// Shortest feature of an envelope, taken as the full width at half maximum
/// of `|Ω|` (the flat-top length of a rectangle, `2·arccosh(2)·τs` for sech).
pub fn feature_duration(input: &PulseEnvelope) -> Result<f64> {
    let fwhm = analysis::duration_metrics(input)?.fwhm;
    if fwhm > 0.0 {
        Ok(fwhm)
    } else {
        Err(Error::Validation(vec!["envelope has no resolvable feature".into()]))
    }
}

/// Bandwidth estimate `Δp = 2π / T_feature` (rad/µs).
pub fn pulse_bandwidth(input: &PulseEnvelope) -> Result<f64> {
    Ok(TAU / feature_duration(input)?)
}

/// Lattice of Bloch nodes stored component-wise, slab-major: node
/// `(iz, j)` sits at index `iz·nΔ + j` of every component array.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumState {
    nz: usize,
    n_delta: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
    c: Vec<f64>,
    s: Vec<f64>,
    /// Per-node polarization terms, summed per slab in a second pass.
    terms: Vec<f64>,
    gain_terms: Vec<f64>,
    /// Accumulated `Σ Ω τ` per slab.
    area: Vec<f64>,
    pub t_now: f64,
}

impl MediumState {
    /// Every atom in the ground state.
    pub fn pristine(config: &MediumConfig, t0: f64) -> Self {
        let n_delta = config.grid.len();
        let n = config.nz * n_delta;
        Self {
            nz: config.nz,
            n_delta,
            u: vec![0.0; n],
            v: vec![0.0; n],
            w: vec![-1.0; n],
            c: vec![0.0; n],
            s: vec![0.0; n],
            terms: vec![0.0; n],
            gain_terms: vec![0.0; n],
            area: vec![0.0; config.nz],
            t_now: t0,
        }
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn n_delta(&self) -> usize {
        self.n_delta
    }

    pub fn node(&self, iz: usize, j: usize) -> BlochNode {
        let i = iz * self.n_delta + j;
        BlochNode {
            u: self.u[i],
            v: self.v[i],
            w: self.w[i],
            c: self.c[i],
            s: self.s[i],
        }
    }

    pub fn set_node(&mut self, iz: usize, j: usize, node: BlochNode) {
        let i = iz * self.n_delta + j;
        self.u[i] = node.u;
        self.v[i] = node.v;
        self.w[i] = node.w;
        self.c[i] = node.c;
        self.s[i] = node.s;
    }

    /// Final inversion, slab-major.
    pub fn inversion(&self) -> &[f64] {
        &self.w
    }

    /// Pulse area that has driven each slab so far.
    pub fn area_profile(&self) -> &[f64] {
        &self.area
    }
}

/// Rabi frequency at every depth at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    pub t: f64,
    pub omega: Vec<f64>,
}

/// Final `w(Δ, ζ)` with the coordinates and weights needed to integrate it.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionMap {
    pub zetas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Slab-major, `zetas.len() × deltas.len()`.
    pub w: Vec<f64>,
}

impl InversionMap {
    fn from_state(config: &MediumConfig, state: &MediumState) -> Self {
        Self {
            zetas: config.zetas(),
            deltas: config.grid.deltas().to_vec(),
            weights: config.grid.weights().to_vec(),
            w: state.w.clone(),
        }
    }

    pub fn at(&self, iz: usize, j: usize) -> f64 {
        self.w[iz * self.deltas.len() + j]
    }

    pub fn row(&self, iz: usize) -> &[f64] {
        let n = self.deltas.len();
        &self.w[iz * n..(iz + 1) * n]
    }

    /// `w(Δ = 0, ζ)` for every slab.
    pub fn resonant_column(&self) -> Vec<f64> {
        let center = (self.deltas.len() - 1) / 2;
        (0..self.zetas.len()).map(|iz| self.at(iz, center)).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep the whole depth profile every `n` steps (0 keeps none).
    pub snapshot_every: usize,
    /// Overrides the step control derived from the input envelope.
    pub step_control: Option<StepControl>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub input: PulseEnvelope,
    pub omega_out: PulseEnvelope,
    pub snapshots: Vec<FieldSlice>,
    pub inversion_map: InversionMap,
    /// Pulse area measured by the solver at each depth.
    pub area_profile: Vec<f64>,
    pub alpha_l: f64,
    pub t2: f64,
    pub metrics: RunMetrics,
}

/// Precession table in column form for the lattice kernel.
struct Columns {
    delta: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    sin_over_delta: Vec<f64>,
    vers_over_delta: Vec<f64>,
    weight: Vec<f64>,
}

impl Columns {
    fn new(table: &[Precession], weights: &[f64]) -> Self {
        Self {
            delta: table.iter().map(|p| p.delta).collect(),
            cos: table.iter().map(|p| p.cos).collect(),
            sin: table.iter().map(|p| p.sin).collect(),
            sin_over_delta: table.iter().map(|p| p.sin_over_delta).collect(),
            vers_over_delta: table.iter().map(|p| p.vers_over_delta).collect(),
            weight: weights.to_vec(),
        }
    }
}

/// Mutable view of one slab.
struct Slab<'s> {
    u: &'s mut [f64],
    v: &'s mut [f64],
    w: &'s mut [f64],
    c: &'s mut [f64],
    s: &'s mut [f64],
    terms: &'s mut [f64],
    gain_terms: &'s mut [f64],
}

/// Step-averaged polarization per slab for the coming step: the drive-free
/// part and the coefficient of the in-step response to the slab's own field.
/// Averaging over the step keeps the coupling centred on the held drive.
#[derive(Debug, Clone, PartialEq)]
struct Polarization {
    free: Vec<f64>,
    gain: Vec<f64>,
}

/// Per-run constants shared by the step stages.
struct Stepper<'a> {
    config: &'a MediumConfig,
    control: StepControl,
    cols: Columns,
    attenuation: Vec<f64>,
    slab_decay: f64,
    decay: f64,
}

impl<'a> Stepper<'a> {
    fn new(config: &'a MediumConfig, control: StepControl) -> Self {
        let tau = control.tau;
        let dz = config.dzeta();
        let table = config.grid.precession_table(tau);
        Self {
            config,
            control,
            cols: Columns::new(&table, config.grid.weights()),
            attenuation: config
                .zetas()
                .iter()
                .map(|z| (-0.5 * z).exp())
                .collect(),
            slab_decay: (-0.5 * dz).exp(),
            decay: if config.t2.is_finite() {
                (-tau / config.t2).exp()
            } else {
                1.0
            },
        }
    }

    fn polarization(&self, state: &MediumState) -> Vec<f64> {
        let n = state.n_delta;
        let cols = &self.cols;
        (0..state.nz)
            .into_par_iter()
            .map(|iz| {
                let r = iz * n..(iz + 1) * n;
                let (u, v, c, s) = (&state.u[r.clone()], &state.v[r.clone()], &state.c[r.clone()], &state.s[r]);
                let mut sum = 0.0;
                for j in 0..n {
                    let big_u = u[j] + s[j];
                    let big_v = v[j] - c[j];
                    sum += cols.weight[j] * (big_v * cols.cos[j] + big_u * cols.sin[j]);
                }
                sum
            })
            .collect()
    }

    fn field(&self, t: f64, input_sample: f64, p: &[f64]) -> FieldSlice {
        self.field_with_response(t, input_sample, p, &vec![0.0; p.len()])
    }

    /// Field march in `ζ` where the polarization at each slab is
    /// `free[i] − gain[i]·Ω_i`: the drive-free part plus the linear in-step
    /// response of the excited population. The trapezoid makes `Ω_i`
    /// implicit in its own slab only, so each slab is a scalar solve.
    fn field_with_response(&self, t: f64, input_sample: f64, free: &[f64], gain: &[f64]) -> FieldSlice {
        let half = 0.5 * self.config.dzeta();
        let e = self.slab_decay;
        let mut omega = Vec::with_capacity(free.len());
        omega.push(input_sample);
        let mut kernel = 0.0;
        let mut p_prev = free[0] - gain[0] * input_sample;
        for i in 1..free.len() {
            let b = e * kernel + half * (e * p_prev + free[i]);
            let om = (input_sample * self.attenuation[i] - b / TAU) / (1.0 - half * gain[i] / TAU);
            kernel = b - half * gain[i] * om;
            p_prev = free[i] - gain[i] * om;
            omega.push(om);
        }
        FieldSlice { t, omega }
    }

    /// Advances the lattice by one sub-step and returns the polarization for
    /// the next step, computed in the same pass over memory.
    fn advance_and_polarize(&self, state: &mut MediumState, field: &FieldSlice) -> Result<Polarization> {
        let peak = field.omega.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.control.check(peak)?;
        let tau = self.control.tau;
        let n = state.n_delta;
        // Every half angle stays on the Taylor branch, so the kernel can skip
        // the range test and still match the per-node rotation bit for bit.
        let dmax = self.config.grid.dmax();
        let taylor = 0.5 * tau * (peak * peak + dmax * dmax).sqrt() < TAYLOR_LIMIT;
        let cols = &self.cols;
        let decay = self.decay;
        let out: (Vec<f64>, Vec<f64>) = state
            .u
            .par_chunks_mut(n)
            .zip(state.v.par_chunks_mut(n))
            .zip(state.w.par_chunks_mut(n))
            .zip(state.c.par_chunks_mut(n))
            .zip(state.s.par_chunks_mut(n))
            .zip(state.terms.par_chunks_mut(n))
            .zip(state.gain_terms.par_chunks_mut(n))
            .zip(field.omega.par_iter())
            .map(|(((((((u, v), w), c), s), terms), gain_terms), &om)| {
                let slab = Slab {
                    u,
                    v,
                    w,
                    c,
                    s,
                    terms,
                    gain_terms,
                };
                if taylor {
                    sweep_slab(slab, om, tau, decay, cols, taylor_sin_cos)
                } else {
                    sweep_slab(slab, om, tau, decay, cols, half_angle_sin_cos)
                }
            })
            .unzip();
        let (free, gain) = out;
        let out = Polarization { free, gain };
        for (a, om) in state.area.iter_mut().zip(&field.omega) {
            *a += om * tau;
        }
        state.t_now += tau;
        Ok(out)
    }
}

#[inline(always)]
fn sweep_slab(
    slab: Slab<'_>,
    om: f64,
    tau: f64,
    decay: f64,
    cols: &Columns,
    sin_cos: impl Fn(f64) -> (f64, f64) + Copy,
) -> (f64, f64) {
    let n = slab.u.len();
    let (u, v, w, c, s) = (
        &mut slab.u[..n],
        &mut slab.v[..n],
        &mut slab.w[..n],
        &mut slab.c[..n],
        &mut slab.s[..n],
    );
    let (terms, gain_terms) = (&mut slab.terms[..n], &mut slab.gain_terms[..n]);
    let (delta, cos, sin) = (&cols.delta[..n], &cols.cos[..n], &cols.sin[..n]);
    let (sod, vod, wt) = (
        &cols.sin_over_delta[..n],
        &cols.vers_over_delta[..n],
        &cols.weight[..n],
    );
    // no reduction in this loop, so it vectorizes
    for j in 0..n {
        let (nu, nv, nw) = rotate_components(u[j], v[j], w[j], om, delta[j], tau, sin_cos);
        let nc = c[j] * cos[j] - s[j] * sin[j] + om * sod[j];
        let ns = s[j] * cos[j] + c[j] * sin[j] + om * vod[j];
        let (nu, nv) = (nu * decay, nv * decay);
        u[j] = nu;
        v[j] = nv;
        w[j] = nw;
        c[j] = nc;
        s[j] = ns;
        let big_u = nu + ns;
        let big_v = nv - nc;
        // mean of the polarization now and after free precession over the
        // coming step
        terms[j] = 0.5 * wt[j] * (big_v + big_v * cos[j] + big_u * sin[j]);
        // ground-state atoms respond instantaneously, which the attenuation
        // term already carries; only the excited population is left
        gain_terms[j] = 0.5 * wt[j] * (nw + 1.0) * sod[j];
    }
    (terms.iter().sum(), gain_terms.iter().sum())
}

/// Renormalized polarization `P(ζ)` of a lattice that is current at `t − τ`,
/// precessed drive-free up to `t`.
pub fn polarization(state: &MediumState, config: &MediumConfig, tau: f64) -> Vec<f64> {
    let control = StepControl {
        tau,
        pulse_bandwidth: 0.0,
    };
    Stepper::new(config, control).polarization(state)
}

/// Field at every depth from the input sample and the polarization profile,
/// trapezoid rule in `ζ′`.
pub fn field_update(t: f64, input_sample: f64, p: &[f64], config: &MediumConfig) -> FieldSlice {
    let control = StepControl {
        tau: 1.0,
        pulse_bandwidth: 0.0,
    };
    Stepper::new(config, control).field(t, input_sample, p)
}

/// Advances every node by `control.tau` with its slab's field held constant.
pub fn advance(
    state: &mut MediumState,
    field: &FieldSlice,
    control: &StepControl,
    config: &MediumConfig,
) -> Result<()> {
    Stepper::new(config, *control).advance_and_polarize(state, field)?;
    Ok(())
}

fn check_quiet_tail(input: &PulseEnvelope) -> Result<()> {
    let peak = input.peak();
    if peak == 0.0 {
        return Ok(());
    }
    let last_loud = input
        .samples()
        .iter()
        .rposition(|x| x.abs() > QUIET_LEVEL * peak)
        .unwrap_or(0);
    let quiet = (input.len() - 1 - last_loud) as f64 / (input.len() - 1) as f64;
    if quiet < MIN_QUIET_TAIL {
        return Err(Error::Validation(vec![format!(
            "input record has a {:.1}% quiet tail; at least {:.0}% is needed to read out the transmitted pulse",
            100.0 * quiet,
            100.0 * MIN_QUIET_TAIL
        )]));
    }
    Ok(())
}

/// Step control for `input` sampled at its own interval.
pub fn default_step_control(input: &PulseEnvelope) -> StepControl {
    let feature = feature_duration(input).unwrap_or(f64::INFINITY);
    StepControl::for_feature(input.dt(), feature)
}

/// Propagates `input` through the medium, one time step per input sample.
pub fn run(config: &MediumConfig, input: &PulseEnvelope, options: &RunOptions) -> Result<RunResult> {
    check_quiet_tail(input)?;
    let control = options
        .step_control
        .unwrap_or_else(|| default_step_control(input));
    if (control.tau - input.dt()).abs() > 1e-12 * input.dt() {
        return Err(Error::StepControl(format!(
            "sub-step {} µs must equal the input sample interval {} µs",
            control.tau,
            input.dt()
        )));
    }
    control.check(input.peak())?;

    let stepper = Stepper::new(config, control);
    let mut state = MediumState::pristine(config, input.t0());
    let last = config.nz - 1;
    let samples = input.samples();

    let mut out = Vec::with_capacity(samples.len());
    let mut snapshots = Vec::new();
    let mut p = Polarization {
        free: vec![0.0; config.nz],
        gain: vec![0.0; config.nz],
    };
    let first = stepper.field_with_response(input.t0(), samples[0], &p.free, &p.gain);
    out.push(first.omega[last]);
    if options.snapshot_every > 0 {
        snapshots.push(first);
    }

    for (k, &sample) in samples.iter().enumerate().skip(1) {
        let t = input.time(k);
        let field = stepper.field_with_response(t, sample, &p.free, &p.gain);
        if let Some(iz) = field.omega.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "field diverged at t = {t:.6} µs, step {k}, depth ζ = {:.4}",
                config.zeta(iz)
            )));
        }
        p = stepper.advance_and_polarize(&mut state, &field)?;
        out.push(field.omega[last]);
        if options.snapshot_every > 0 && k % options.snapshot_every == 0 {
            snapshots.push(field);
        }
    }

    let omega_out = PulseEnvelope::from_raw(input.t0(), input.dt(), out);
    let inversion_map = InversionMap::from_state(config, &state);
    let mut result = RunResult {
        input: input.clone(),
        omega_out,
        snapshots,
        inversion_map,
        area_profile: state.area.clone(),
        alpha_l: config.alpha_l,
        t2: config.t2,
        metrics: RunMetrics::default(),
    };
    result.metrics = analysis::run_metrics(&result)?;
    Ok(result)
}

/// Tolerance on every refinement axis of [`convergence_check`].
pub const CONVERGENCE_TOLERANCE: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RefinementRow {
    pub axis: String,
    pub area_change: f64,
    pub l2_change: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConvergenceReport {
    pub base_area_out: f64,
    pub rows: Vec<RefinementRow>,
    pub passed: bool,
}

fn relative_change(base: f64, refined: f64) -> f64 {
    let diff = (refined - base).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / base.abs().max(f64::MIN_POSITIVE)
    }
}

/// Relative L2 distance between two records, comparing `refined` every
/// `stride` samples.
fn l2_change(base: &[f64], refined: &[f64], stride: usize) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (k, b) in base.iter().enumerate() {
        let r = refined[k * stride];
        diff += (r - b) * (r - b);
        norm += b * b;
    }
    if diff == 0.0 {
        0.0
    } else {
        (diff / norm.max(f64::MIN_POSITIVE)).sqrt()
    }
}

/// Re-runs with doubled `Δmax`, halved `δΔ`, halved `τ` and doubled `nz`
/// and reports the relative change of the transmitted area and envelope.
pub fn convergence_check(
    config: &MediumConfig,
    input: &PulseEnvelope,
    options: &RunOptions,
) -> Result<ConvergenceReport> {
    let options = RunOptions {
        snapshot_every: 0,
        ..options.clone()
    };
    let base = run(config, input, &options)?;
    let base_area = pulse_area(&base.omega_out).radians;
    let n_delta = config.grid.len();

    let wide = MediumConfig {
        grid: DetuningGrid::uniform(2.0 * config.grid.dmax(), 2 * (n_delta - 1) + 1)?,
        ..config.clone()
    };
    let dense = MediumConfig {
        grid: DetuningGrid::uniform(config.grid.dmax(), 2 * (n_delta - 1) + 1)?,
        ..config.clone()
    };
    let deep = MediumConfig {
        nz: 2 * (config.nz - 1) + 1,
        ..config.clone()
    };
    let fine_input = input.refined();
    let fine_options = RunOptions {
        step_control: options.step_control.map(|c| StepControl {
            tau: 0.5 * c.tau,
            ..c
        }),
        ..options.clone()
    };

    let cases: [(&str, &MediumConfig, &PulseEnvelope, &RunOptions, usize); 4] = [
        ("dmax_doubled", &wide, input, &options, 1),
        ("detuning_spacing_halved", &dense, input, &options, 1),
        ("tau_halved", config, &fine_input, &fine_options, 2),
        ("nz_doubled", &deep, input, &options, 1),
    ];
    let mut rows = Vec::with_capacity(cases.len());
    for (axis, cfg, inp, opts, stride) in cases {
        let refined = run(cfg, inp, opts)?;
        let area_change = relative_change(base_area, pulse_area(&refined.omega_out).radians);
        let l2 = l2_change(base.omega_out.samples(), refined.omega_out.samples(), stride);
        rows.push(RefinementRow {
            axis: axis.to_string(),
            area_change,
            l2_change: l2,
            passed: area_change < CONVERGENCE_TOLERANCE && l2 < CONVERGENCE_TOLERANCE,
        });
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(ConvergenceReport {
        base_area_out: base_area,
        rows,
        passed,
    })
}
