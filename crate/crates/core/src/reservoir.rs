//! Audio-driven Hopf oscillator and virtual-node sampling.
//!
//! The reservoir integrates
//!
//! ```text
//! dx/dt = (mu f - (x^2 + y^2)) x - omega0 y + A f sin(Omega t)
//! dy/dt = (mu f - (x^2 + y^2)) y + omega0 x
//! ```
//!
//! with `f = 1 + a(t)` built from the normalized audio `a`. Each audio sample
//! is held for one sample interval, and the `x` state is read out `N` times
//! per interval. Those `N` readouts are the virtual nodes of one feature-map
//! row.

use alloc::vec::Vec;

use crate::audio::AudioClip;
use crate::error::{contract, Error, Result};

/// Sample rate the reservoir expects its audio at.
pub const AUDIO_RATE_HZ: u32 = 4000;

/// Oscillator constants.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct HopfParams {
    /// Limit-cycle strength; the unforced orbit has radius `sqrt(mu)`.
    pub mu: f64,
    /// Natural angular frequency (rad/s).
    pub omega0: f64,
    /// Forcing amplitude `A`.
    pub amp: f64,
    /// Forcing angular frequency (rad/s).
    pub omega_f: f64,
    /// Multiplier applied to `amp`; raise it to strengthen the forcing.
    pub amp_scale: f64,
}

impl Default for HopfParams {
    fn default() -> Self {
        let omega = 2.0 * core::f64::consts::PI * 1000.0;
        // With mu = 1 the forcing term swamps the radial dynamics and every
        // clip produces nearly the same map; a stiffer cycle lets the
        // audio-modulated radius show through.
        Self {
            mu: 1000.0,
            omega0: omega,
            amp: 1.0,
            omega_f: omega,
            amp_scale: 1.0,
        }
    }
}

impl HopfParams {
    /// Unforced oscillator with the given strength and natural frequency in Hz.
    pub fn unforced(mu: f64, freq_hz: f64) -> Self {
        let omega = 2.0 * core::f64::consts::PI * freq_hz;
        Self {
            mu,
            omega0: omega,
            amp: 0.0,
            omega_f: omega,
            amp_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mu", self.mu),
            ("omega0", self.omega0),
            ("amp", self.amp),
            ("omega_f", self.omega_f),
            ("amp_scale", self.amp_scale),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::NumericDomain(alloc::format!("{name} = {v}")));
            }
        }
        if self.mu <= 0.0 || self.omega0 <= 0.0 || self.omega_f <= 0.0 {
            return Err(contract!("mu, omega0 and omega_f must be positive"));
        }
        if self.amp < 0.0 {
            return Err(contract!("forcing amplitude must be non-negative"));
        }
        if self.amp_scale <= 0.0 {
            return Err(contract!("amp_scale must be positive"));
        }
        Ok(())
    }

    /// Forcing amplitude actually applied, `amp * amp_scale`.
    #[inline]
    pub fn effective_amp(&self) -> f64 {
        self.amp * self.amp_scale
    }
}

/// Oscillator state at time `t` (seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl OscState {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct IntegratorConfig {
    /// RK4 steps between consecutive virtual-node readouts.
    pub substeps: usize,
    /// Virtual nodes (readouts) per held audio sample.
    pub n_virtual: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            substeps: 4,
            n_virtual: 100,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.substeps < 1 {
            return Err(contract!("substeps must be at least 1"));
        }
        if self.n_virtual < 2 {
            return Err(contract!("n_virtual must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ReservoirConfig {
    pub hopf: HopfParams,
    pub integrator: IntegratorConfig,
    /// Seconds of `f = 1` drive integrated and discarded before each clip.
    pub washout: f64,
    pub audio_rate: u32,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            hopf: HopfParams::default(),
            integrator: IntegratorConfig::default(),
            washout: 0.05,
            audio_rate: AUDIO_RATE_HZ,
        }
    }
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        self.hopf.validate()?;
        self.integrator.validate()?;
        if !(self.washout >= 0.0 && self.washout.is_finite()) {
            return Err(contract!("washout must be a finite non-negative duration"));
        }
        if self.audio_rate == 0 {
            return Err(contract!("audio rate must be positive"));
        }
        Ok(())
    }

    /// RK4 step size in seconds.
    pub fn step(&self) -> f64 {
        1.0 / (self.audio_rate as f64
            * self.integrator.n_virtual as f64
            * self.integrator.substeps as f64)
    }
}

/// Virtual-node responses of one clip: one row per audio sample, one column
/// per virtual node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirResponse {
    pub matrix: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub audio_rate: u32,
    pub params_used: HopfParams,
}

impl ReservoirResponse {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.cols..(i + 1) * self.cols]
    }
}

/// Drive built from one normalized audio sample: `f = 1 + a`.
pub fn drive_signal(audio_sample: f64) -> Result<f64> {
    if !audio_sample.is_finite() {
        return Err(Error::NumericDomain(alloc::format!(
            "audio sample {audio_sample}"
        )));
    }
    if audio_sample.abs() > 1.0 {
        return Err(Error::Normalization(alloc::format!(
            "sample {audio_sample} outside [-1, 1]"
        )));
    }
    Ok(1.0 + audio_sample)
}

#[inline(always)]
fn rhs(x: f64, y: f64, t: f64, f: f64, mu: f64, omega0: f64, amp: f64, omega_f: f64) -> (f64, f64) {
    let radial = mu * f - (x * x + y * y);
    (
        radial * x - omega0 * y + amp * f * libm::sin(omega_f * t),
        radial * y + omega0 * x,
    )
}

/// Right-hand side of the driven oscillator at state `s` under drive `f`.
pub fn hopf_derivative(s: &OscState, p: &HopfParams, f: f64) -> Result<(f64, f64)> {
    if !f.is_finite() || !s.is_finite() {
        return Err(Error::NumericDomain(alloc::format!(
            "non-finite input: state {s:?}, drive {f}"
        )));
    }
    p.validate()?;
    Ok(rhs(s.x, s.y, s.t, f, p.mu, p.omega0, p.effective_amp(), p.omega_f))
}

/// Precomputed constants for the inner integration loop.
#[derive(Clone, Copy)]
struct Stepper {
    mu: f64,
    omega0: f64,
    amp: f64,
    omega_f: f64,
    h: f64,
}

impl Stepper {
    fn new(p: &HopfParams, h: f64) -> Self {
        Self {
            mu: p.mu,
            omega0: p.omega0,
            amp: p.effective_amp(),
            omega_f: p.omega_f,
            h,
        }
    }

    /// One classical RK4 step from `(x, y)` at time `t` with the drive held at `f`.
    #[inline(always)]
    fn step(&self, x: f64, y: f64, t: f64, f: f64) -> (f64, f64) {
        let half = 0.5 * self.h;
        let w = self.omega_f;
        self.step_with(
            x,
            y,
            f,
            [libm::sin(w * t), libm::sin(w * (t + half)), libm::sin(w * (t + self.h))],
        )
    }

    /// RK4 step given `sin(Omega t)` at the start, middle and end of the step.
    #[inline(always)]
    fn step_with(&self, x: f64, y: f64, f: f64, forcing: [f64; 3]) -> (f64, f64) {
        let Self { mu, omega0, amp, h, .. } = *self;
        let half = 0.5 * h;
        let mf = mu * f;
        let af = amp * f;
        let rhs = |x: f64, y: f64, s: f64| {
            let radial = mf - (x * x + y * y);
            (radial * x - omega0 * y + af * s, radial * y + omega0 * x)
        };
        let (k1x, k1y) = rhs(x, y, forcing[0]);
        let (k2x, k2y) = rhs(x + half * k1x, y + half * k1y, forcing[1]);
        let (k3x, k3y) = rhs(x + half * k2x, y + half * k2y, forcing[1]);
        let (k4x, k4y) = rhs(x + h * k3x, y + h * k3y, forcing[2]);
        (
            x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        )
    }

    /// Run `n` steps from step index `start` with the drive held at `f`,
    /// calling `emit` with the state before every `every`-th step.
    ///
    /// The forcing phase is evaluated exactly at `start` and then advanced
    /// by rotation in half-step increments.
    #[inline(always)]
    fn run(&self, x: &mut f64, y: &mut f64, start: u64, n: usize, f: f64, every: usize, mut emit: impl FnMut(f64)) {
        let phase = self.omega_f * start as f64 * self.h;
        let (mut s, mut c) = (libm::sin(phase), libm::cos(phase));
        let delta = 0.5 * self.omega_f * self.h;
        let (sd, cd) = (libm::sin(delta), libm::cos(delta));
        for j in 0..n {
            if j % every == 0 {
                emit(*x);
            }
            let s0 = s;
            let (s1, c1) = (s * cd + c * sd, c * cd - s * sd);
            let (s2, c2) = (s1 * cd + c1 * sd, c1 * cd - s1 * sd);
            (*x, *y) = self.step_with(*x, *y, f, [s0, s1, s2]);
            (s, c) = (s2, c2);
        }
    }
}

/// Advance `s` by one RK4 step of size `h` with the drive held at `f`.
pub fn rk4_step(s: &OscState, h: f64, p: &HopfParams, f: f64) -> Result<OscState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(contract!("step size must be positive, got {h}"));
    }
    if !f.is_finite() || !s.is_finite() {
        return Err(Error::NumericDomain(alloc::format!(
            "non-finite input: state {s:?}, drive {f}"
        )));
    }
    p.validate()?;
    let (x, y) = Stepper::new(p, h).step(s.x, s.y, s.t, f);
    let next = OscState::new(x, y, s.t + h);
    if !next.is_finite() {
        return Err(Error::Divergence {
            time: s.t,
            sample: None,
        });
    }
    Ok(next)
}

/// Drive the reservoir with a normalized clip and record the virtual nodes.
///
/// The oscillator starts at `(sqrt(mu), 0)` at `t = 0`, runs the washout with
/// `f = 1`, then holds each audio sample for one sample interval. Node `j` of
/// row `i` is the `x` state `j / N` of the way through sample `i`'s interval.
/// State is never carried between calls.
pub fn run_reservoir(clip: &AudioClip, cfg: &ReservoirConfig) -> Result<ReservoirResponse> {
    cfg.validate()?;
    if clip.rate != cfg.audio_rate {
        return Err(contract!(
            "clip rate {} Hz does not match reservoir rate {} Hz",
            clip.rate,
            cfg.audio_rate
        ));
    }
    if let Some((i, v)) = clip
        .samples
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
    {
        return Err(Error::Normalization(alloc::format!(
            "sample {i} = {v} outside [-1, 1]"
        )));
    }

    let n_virtual = cfg.integrator.n_virtual;
    let substeps = cfg.integrator.substeps;
    let h = cfg.step();
    let stepper = Stepper::new(&cfg.hopf, h);
    let steps_per_sample = (n_virtual * substeps) as u64;
    // The forcing phase is recomputed from the step index at every audio
    // sample so it does not drift over millions of steps.
    let mut step_index: u64 = 0;
    let mut x = libm::sqrt(cfg.hopf.mu);
    let mut y = 0.0;

    let washout_samples = libm::round(cfg.washout * cfg.audio_rate as f64) as u64;
    for _ in 0..washout_samples {
        stepper.run(&mut x, &mut y, step_index, steps_per_sample as usize, 1.0, usize::MAX, |_| {});
        step_index += steps_per_sample;
    }
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::Divergence {
            time: step_index as f64 * h,
            sample: None,
        });
    }

    let mut matrix = Vec::with_capacity(clip.samples.len() * n_virtual);
    for (i, &a) in clip.samples.iter().enumerate() {
        stepper.run(&mut x, &mut y, step_index, n_virtual * substeps, 1.0 + a, substeps, |v| matrix.push(v));
        step_index += steps_per_sample;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Divergence {
                time: step_index as f64 * h,
                sample: Some(i),
            });
        }
    }

    Ok(ReservoirResponse {
        matrix,
        rows: clip.samples.len(),
        cols: n_virtual,
        audio_rate: cfg.audio_rate,
        params_used: cfg.hopf,
    })
}

/// Steady-state radius and rotation frequency of an unforced run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCycle {
    pub radius: f64,
    pub frequency_hz: f64,
}

/// RK4 steps per natural period used by [`estimate_limit_cycle`].
pub const PROBE_STEPS_PER_PERIOD: usize = 256;

/// Integrate the unforced oscillator from `start` for `duration` seconds and
/// measure its orbit over the second half of the run.
///
/// The radius is the mean of `sqrt(x^2 + y^2)`; the frequency comes from the
/// mean spacing of upward zero crossings of `x`.
pub fn estimate_limit_cycle(p: &HopfParams, start: OscState, duration: f64) -> Result<LimitCycle> {
    p.validate()?;
    if p.effective_amp() != 0.0 {
        return Err(contract!("limit-cycle probe requires an unforced oscillator (A = 0)"));
    }
    let period = 2.0 * core::f64::consts::PI / p.omega0;
    if !(duration >= 20.0 * period) {
        return Err(contract!(
            "duration {duration} s covers fewer than 20 natural periods ({period} s each)"
        ));
    }
    if !start.is_finite() || (start.x == 0.0 && start.y == 0.0) {
        return Err(contract!("start state must be finite and off the origin"));
    }

    let h = period / PROBE_STEPS_PER_PERIOD as f64;
    let total = libm::ceil(duration / h) as u64;
    let half = total / 2;
    let stepper = Stepper::new(p, h);
    let (mut x, mut y) = (start.x, start.y);
    let t0 = start.t;

    let mut radius_sum = 0.0;
    let mut radius_count = 0u64;
    let mut first_crossing = None;
    let mut last_crossing = 0.0;
    let mut crossings = 0u64;
    for k in 0..total {
        let t = t0 + k as f64 * h;
        let (nx, ny) = stepper.step(x, y, t, 1.0);
        if !(nx.is_finite() && ny.is_finite()) {
            return Err(Error::Divergence { time: t, sample: None });
        }
        if k >= half {
            radius_sum += libm::hypot(nx, ny);
            radius_count += 1;
            if x < 0.0 && nx >= 0.0 {
                let crossing = t + h * (-x) / (nx - x);
                first_crossing.get_or_insert(crossing);
                last_crossing = crossing;
                crossings += 1;
            }
        }
        x = nx;
        y = ny;
    }

    let first = first_crossing.ok_or_else(|| contract!("no zero crossings observed"))?;
    if crossings < 2 {
        return Err(contract!("too few zero crossings to estimate a frequency"));
    }
    Ok(LimitCycle {
        radius: radius_sum / radius_count as f64,
        frequency_hz: (crossings - 1) as f64 / (last_crossing - first),
    })
}
