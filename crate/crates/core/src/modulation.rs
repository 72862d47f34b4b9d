//! Per-channel modulation: impulsive phase trains, Stark shifts and resonant
//! driving envelopes, and the kernels `K_ab(t,t') = ε*_a(t) ε_b(t')` built from them.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, Real};

/// Which one-sided limit to take at a pulse instant.
///
/// Phase trains are right-continuous, so plain evaluation uses `After`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Before,
    After,
}

/// Relative tolerance for snapping a time onto a pulse instant `k τ`.
const SNAP: f64 = 1e-9;

/// Impulsive phase modulation `ε(t) = exp(i ⌊t/τ⌋ θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePulseTrain<T> {
    pub interval: T,
    pub phase_step: T,
}

impl<T: Real> PhasePulseTrain<T> {
    pub fn new(interval: T, phase_step: T) -> Result<Self> {
        if !(interval > T::zero()) || !interval.is_finite() {
            return Err(Error::invalid("modulation.tau", "pulse interval must be positive"));
        }
        if !phase_step.is_finite() {
            return Err(Error::invalid("modulation.theta", "phase step must be finite"));
        }
        Ok(PhasePulseTrain { interval, phase_step })
    }

    /// Number of pulses applied up to `t`.
    pub fn count(&self, t: T, side: Side) -> i64 {
        if t <= T::zero() {
            return 0;
        }
        let x = t / self.interval;
        let r = x.round();
        let rn = num_traits::ToPrimitive::to_i64(&r).unwrap_or(i64::MAX);
        if (x - r).abs() <= T::lit(SNAP) * x.abs().max(T::one()) {
            return match side {
                Side::After => rn,
                Side::Before => (rn - 1).max(0),
            };
        }
        num_traits::ToPrimitive::to_i64(&x.floor()).unwrap_or(i64::MAX)
    }

    pub fn phase(&self, t: T, side: Side) -> T {
        T::from_i64(self.count(t, side)).unwrap() * self.phase_step
    }

    /// Pulse instants strictly inside `(lo, hi)`.
    pub fn instants(&self, lo: T, hi: T) -> impl Iterator<Item = T> + '_ {
        let first = num_traits::ToPrimitive::to_i64(&(lo / self.interval).floor()).unwrap_or(0).max(0) + 1;
        (first..)
            .map(move |k| T::from_i64(k).unwrap() * self.interval)
            .take_while(move |t| *t < hi)
            .filter(move |t| *t > lo)
    }
}

/// Piecewise-constant Stark shift `δ(t)`; `rates[i]` holds on `[starts[i], starts[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StarkShiftSchedule<T> {
    starts: Vec<T>,
    rates: Vec<T>,
}

impl<T: Real> StarkShiftSchedule<T> {
    pub fn none() -> Self {
        StarkShiftSchedule { starts: Vec::new(), rates: Vec::new() }
    }

    pub fn constant(rate: T) -> Self {
        StarkShiftSchedule { starts: vec![T::zero()], rates: vec![rate] }
    }

    pub fn piecewise(starts: Vec<T>, rates: Vec<T>) -> Result<Self> {
        validate_piecewise(&starts, &rates, "modulation.stark")?;
        Ok(StarkShiftSchedule { starts, rates })
    }

    pub fn is_zero(&self) -> bool {
        self.rates.iter().all(|r| r.is_zero())
    }

    pub fn rate(&self, t: T) -> T {
        match self.starts.iter().rposition(|s| *s <= t) {
            Some(i) => self.rates[i],
            None => T::zero(),
        }
    }

    /// `∫_0^t δ(s) ds`, exact.
    pub fn integral(&self, t: T) -> T {
        piecewise_integral(&self.starts, &self.rates, t)
    }

    fn breaks(&self) -> &[T] {
        &self.starts
    }
}

/// Resonant driving envelope `V⁰(t)` stored as an accumulated-phase table so that
/// `φ(t) = 2 ∫_0^t V⁰` is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingEnvelope<T> {
    starts: Vec<T>,
    rates: Vec<T>,
    /// `φ` at each start.
    phases: Vec<T>,
}

impl<T: Real> DrivingEnvelope<T> {
    /// Piecewise-constant `V⁰`: `rates[i]` on `[starts[i], starts[i+1])`.
    pub fn piecewise(starts: Vec<T>, rates: Vec<T>) -> Result<Self> {
        validate_piecewise(&starts, &rates, "modulation.drive")?;
        let phases = starts.iter().map(|s| T::lit(2.0) * piecewise_integral(&starts, &rates, *s)).collect();
        Ok(DrivingEnvelope { starts, rates, phases })
    }

    pub fn constant(rate: T) -> Self {
        DrivingEnvelope { starts: vec![T::zero()], rates: vec![rate], phases: vec![T::zero()] }
    }

    pub fn phase(&self, t: T) -> T {
        match self.starts.iter().rposition(|s| *s <= t) {
            Some(i) => self.phases[i] + T::lit(2.0) * self.rates[i] * (t - self.starts[i]),
            None => T::zero(),
        }
    }

    pub fn amplitude(&self, t: T) -> T {
        match self.starts.iter().rposition(|s| *s <= t) {
            Some(i) => self.rates[i],
            None => T::zero(),
        }
    }
}

fn validate_piecewise<T: Real>(starts: &[T], rates: &[T], key: &str) -> Result<()> {
    if starts.len() != rates.len() {
        return Err(Error::invalid(key, "starts and rates must have equal length"));
    }
    if starts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(key, "segment starts must be strictly increasing"));
    }
    if starts.first().is_some_and(|s| *s < T::zero()) {
        return Err(Error::invalid(key, "segments start at t >= 0"));
    }
    if rates.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid(key, "rates must be finite"));
    }
    Ok(())
}

fn piecewise_integral<T: Real>(starts: &[T], rates: &[T], t: T) -> T {
    let mut acc = T::zero();
    for i in 0..starts.len() {
        let a = starts[i];
        if a >= t {
            break;
        }
        let b = starts.get(i + 1).copied().unwrap_or(T::infinity()).min(t);
        acc += rates[i] * (b - a);
    }
    acc
}

/// Modulation of one channel (one level of one system, or one qubit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModulation<T> {
    pub pulses: Option<PhasePulseTrain<T>>,
    pub stark: StarkShiftSchedule<T>,
    pub drive: Option<DrivingEnvelope<T>>,
}

impl<T: Real> ChannelModulation<T> {
    pub fn unmodulated() -> Self {
        ChannelModulation { pulses: None, stark: StarkShiftSchedule::none(), drive: None }
    }

    pub fn pulses(interval: T, phase_step: T) -> Result<Self> {
        Ok(ChannelModulation {
            pulses: Some(PhasePulseTrain::new(interval, phase_step)?),
            stark: StarkShiftSchedule::none(),
            drive: None,
        })
    }

    pub fn with_stark(mut self, stark: StarkShiftSchedule<T>) -> Self {
        self.stark = stark;
        self
    }

    pub fn with_drive(mut self, drive: DrivingEnvelope<T>) -> Self {
        self.drive = Some(drive);
        self
    }

    /// Phase jumps `⌊t/τ⌋ θ`.
    pub fn pulse_phase(&self, t: T, side: Side) -> T {
        self.pulses.map_or(T::zero(), |p| p.phase(t, side))
    }

    pub fn pulse_count(&self, t: T, side: Side) -> i64 {
        self.pulses.map_or(0, |p| p.count(t, side))
    }

    /// Continuous part of the phase: `φ_drive(t) - ∫δ`.
    pub fn smooth_phase(&self, t: T) -> T {
        self.drive.as_ref().map_or(T::zero(), |d| d.phase(t)) - self.stark.integral(t)
    }

    pub fn epsilon(&self, t: T, side: Side) -> Complex<T> {
        cis(self.pulse_phase(t, side) + self.smooth_phase(t))
    }

    /// Accumulated drive phase `φ(t)` (pulse jumps plus continuous drive).
    pub fn drive_phase(&self, t: T, side: Side) -> T {
        self.pulse_phase(t, side) + self.drive.as_ref().map_or(T::zero(), |d| d.phase(t))
    }

    /// Times in `(lo, hi)` where the phase jumps or its slope changes.
    pub fn breakpoints(&self, lo: T, hi: T) -> Vec<T> {
        let mut out: Vec<T> = self.pulses.iter().flat_map(|p| p.instants(lo, hi).collect::<Vec<_>>()).collect();
        out.extend(self.stark.breaks().iter().copied().filter(|t| *t > lo && *t < hi));
        if let Some(d) = &self.drive {
            out.extend(d.starts.iter().copied().filter(|t| *t > lo && *t < hi));
        }
        out
    }
}

/// Modulation of every channel of a scenario, flat channel order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationSchedule<T> {
    channels: Vec<ChannelModulation<T>>,
}

impl<T: Real> ModulationSchedule<T> {
    pub fn new(channels: Vec<ChannelModulation<T>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("modulation", "at least one channel is required"));
        }
        Ok(ModulationSchedule { channels })
    }

    /// Identical modulation on `n` channels.
    pub fn global(n: usize, channel: ChannelModulation<T>) -> Self {
        ModulationSchedule { channels: vec![channel; n] }
    }

    /// Phase trains with a common interval and per-channel phase steps.
    pub fn phase_trains(interval: T, phase_steps: &[T]) -> Result<Self> {
        let channels =
            phase_steps.iter().map(|&th| ChannelModulation::pulses(interval, th)).collect::<Result<Vec<_>>>()?;
        Self::new(channels)
    }

    pub fn unmodulated(n: usize) -> Self {
        Self::global(n, ChannelModulation::unmodulated())
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channel(&self, flat: usize) -> &ChannelModulation<T> {
        &self.channels[flat]
    }

    pub fn channel_mut(&mut self, flat: usize) -> &mut ChannelModulation<T> {
        &mut self.channels[flat]
    }

    pub fn channels(&self) -> &[ChannelModulation<T>] {
        &self.channels
    }

    /// True when every channel carries the same modulation.
    pub fn is_global(&self) -> bool {
        self.channels.windows(2).all(|w| w[0] == w[1])
    }

    fn get(&self, flat: usize) -> Result<&ChannelModulation<T>> {
        self.channels.get(flat).ok_or_else(|| Error::IndexOutOfBounds {
            what: format!("modulation channel {flat} of {}", self.channels.len()),
        })
    }

    /// `ε_a(t) = ε̃_a(t) exp(-i ∫_0^t δ_a)`, right-continuous at pulse instants.
    pub fn eval_epsilon(&self, flat: usize, t: T) -> Result<Complex<T>> {
        Ok(self.get(flat)?.epsilon(t, Side::After))
    }

    /// `K_ab(t,t') = ε*_a(t) ε_b(t')`.
    pub fn eval_kernel(&self, a: usize, b: usize, t: T, t_prime: T) -> Result<Complex<T>> {
        Ok(self.get(a)?.epsilon(t, Side::After).conj() * self.get(b)?.epsilon(t_prime, Side::After))
    }

    /// `φ_j(t) = 2 ∫_0^t V⁰_j`, with impulsive pulses contributing their phase steps.
    pub fn accumulated_drive_phase(&self, flat: usize, t: T) -> Result<T> {
        Ok(self.get(flat)?.drive_phase(t, Side::After))
    }

    /// Sorted, deduplicated break points of all channels inside `(lo, hi)`.
    pub fn breakpoints(&self, lo: T, hi: T) -> Vec<T> {
        let mut all: Vec<T> = self.channels.iter().flat_map(|c| c.breakpoints(lo, hi)).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup_by(|a, b| (*a - *b).abs() <= T::lit(SNAP) * a.abs().max(T::one()));
        all
    }

    /// Shortest pulse interval of any channel.
    pub fn min_interval(&self) -> Option<T> {
        self.channels.iter().filter_map(|c| c.pulses.map(|p| p.interval)).reduce(T::min)
    }

    /// Phase steps of all channels (zero where no train is present).
    pub fn phase_steps(&self) -> Vec<T> {
        self.channels.iter().map(|c| c.pulses.map_or(T::zero(), |p| p.phase_step)).collect()
    }

    pub fn set_phase_step(&mut self, flat: usize, theta: T) -> Result<()> {
        let ch = self.channels.get_mut(flat).ok_or_else(|| Error::IndexOutOfBounds { what: format!("channel {flat}") })?;
        match &mut ch.pulses {
            Some(p) => p.phase_step = theta,
            None => return Err(Error::invalid("modulation.theta", format!("channel {flat} has no pulse train"))),
        }
        Ok(())
    }

    pub fn set_interval(&mut self, flat: usize, tau: T) -> Result<()> {
        if !(tau > T::zero()) {
            return Err(Error::invalid("modulation.tau", "pulse interval must be positive"));
        }
        let ch = self.channels.get_mut(flat).ok_or_else(|| Error::IndexOutOfBounds { what: format!("channel {flat}") })?;
        match &mut ch.pulses {
            Some(p) => p.interval = tau,
            None => return Err(Error::invalid("modulation.tau", format!("channel {flat} has no pulse train"))),
        }
        Ok(())
    }

    /// True if no channel has a continuous drive or Stark shift.
    pub fn is_phase_only(&self) -> bool {
        self.channels.iter().all(|c| c.drive.is_none() && c.stark.is_zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex<f64>, b: Complex<f64>) -> bool {
        (a - b).norm() < 1e-13
    }

    #[test]
    fn phase_train_examples() {
        let tau = 0.7;
        let s = ModulationSchedule::phase_trains(tau, &[1.3]).unwrap();
        assert!(close(s.eval_epsilon(0, 0.5 * tau).unwrap(), Complex::new(1.0, 0.0)));
        let s = ModulationSchedule::phase_trains(tau, &[PI]).unwrap();
        assert!(close(s.eval_epsilon(0, 1.5 * tau).unwrap(), Complex::new(-1.0, 0.0)));
    }

    #[test]
    fn constant_stark_shift_rotates_phase() {
        let d0 = 0.37;
        let ch = ChannelModulation::unmodulated().with_stark(StarkShiftSchedule::constant(d0));
        let s = ModulationSchedule::new(vec![ch]).unwrap();
        let t = 4.2;
        assert!(close(s.eval_epsilon(0, t).unwrap(), cis(-d0 * t)));
    }

    #[test]
    fn kernel_examples() {
        let tau = 1.0;
        let theta = 0.9;
        let s = ModulationSchedule::phase_trains(tau, &[theta]).unwrap();
        assert!(close(s.eval_kernel(0, 0, 1.5, 0.5).unwrap(), cis(-theta)));
        assert!(close(s.eval_kernel(0, 0, 1.5, 1.5).unwrap(), Complex::new(1.0, 0.0)));
        let s = ModulationSchedule::phase_trains(tau, &[PI, 0.8 * PI]).unwrap();
        assert!(close(s.eval_kernel(0, 1, 1.5, 1.5).unwrap(), cis(-0.2 * PI)));
    }

    #[test]
    fn right_continuity_at_pulse_instants() {
        let p = PhasePulseTrain::new(0.1, 1.0).unwrap();
        // 0.3 is not exactly representable; the snap must still place it on pulse 3
        let t = 0.1 + 0.1 + 0.1;
        assert_eq!(p.count(t, Side::After), 3);
        assert_eq!(p.count(t, Side::Before), 2);
        assert_eq!(p.count(0.0, Side::Before), 0);
        assert_eq!(p.count(0.25, Side::Before), 2);
    }

    #[test]
    fn drive_phase_examples() {
        let v0 = 0.4;
        let ch = ChannelModulation::unmodulated().with_drive(DrivingEnvelope::constant(v0));
        let s: ModulationSchedule<f64> = ModulationSchedule::new(vec![ch, ChannelModulation::unmodulated()]).unwrap();
        assert!((s.accumulated_drive_phase(0, 3.0).unwrap() - 2.0 * v0 * 3.0).abs() < 1e-15);
        assert_eq!(s.accumulated_drive_phase(1, 3.0).unwrap(), 0.0);

        // short strong segments each advancing the phase by theta at t = k tau
        let (tau, theta, width) = (1.0, 0.8, 0.01);
        let mut starts = vec![0.0];
        let mut rates = vec![0.0];
        for k in 1..4 {
            let t0 = k as f64 * tau - width;
            starts.extend([t0, k as f64 * tau]);
            rates.extend([theta / (2.0 * width), 0.0]);
        }
        let drive = DrivingEnvelope::piecewise(starts, rates).unwrap();
        assert!((drive.phase(1.5 * tau) - theta).abs() < 1e-12);
        assert!((drive.phase(3.5 * tau) - 3.0 * theta).abs() < 1e-12);
    }

    #[test]
    fn breakpoints_merge_channels() {
        let s = ModulationSchedule::phase_trains(1.0, &[1.0, 2.0]).unwrap();
        assert_eq!(s.breakpoints(0.0, 3.0), vec![1.0, 2.0]);
        let mut s2 = s.clone();
        s2.set_interval(1, 0.5).unwrap();
        assert_eq!(s2.breakpoints(0.0, 2.0), vec![0.5, 1.0, 1.5]);
        assert!(!s2.is_global());
        assert!(ModulationSchedule::phase_trains(1.0, &[2.0, 2.0]).unwrap().is_global());
    }

    #[test]
    fn invalid_trains_rejected() {
        assert!(PhasePulseTrain::new(0.0, 1.0).is_err());
        assert!(PhasePulseTrain::new(-1.0, 1.0).is_err());
        assert!(StarkShiftSchedule::piecewise(vec![1.0, 0.5], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn stark_integral_piecewise() {
        let s = StarkShiftSchedule::piecewise(vec![0.0_f64, 1.0, 3.0], vec![2.0, -1.0, 0.5]).unwrap();
        assert!((s.integral(0.5) - 1.0).abs() < 1e-15);
        assert!((s.integral(2.0) - 1.0).abs() < 1e-15);
        assert!((s.integral(5.0) - (2.0 - 2.0 + 1.0)).abs() < 1e-15);
        assert_eq!(s.rate(2.5), -1.0);
    }
}
