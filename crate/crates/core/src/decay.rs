//! Zero-temperature decay under dynamical control.
//!
//! The amplitudes of the singly-excited manifold obey `dα̃/dt = -W(t) α̃` with
//!
//! ```text
//! W_ab(t) = ∫_0^t dt' Φ_ab(t-t') ε*_a(t) ε_b(t') e^{iω_a t - iω_b t'}
//! J_ab(t) = ∫_0^t W_ab(t') dt'
//! ```
//!
//! For impulsive phase trains `ε_b(t') = e^{i k θ_b}` is constant on each pulse
//! interval. [`DecayEngine`] therefore tabulates the inner integral per pulse
//! interval once and evaluates `W` for any choice of phase steps by phasor sums;
//! the optimizer relies on this.

use std::collections::BTreeMap;

use ndarray::Array1;
use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bath::{BathModel, ChannelLayout, MemoryWindow};
use crate::error::{Error, Result};
use crate::linalg::{expm, CMatrix, CVector};
use crate::modulation::{ModulationSchedule, Side};
use crate::quadrature::{merged_nodes, simpson, GaussLegendre};
use crate::scalar::{cis, Real};

/// Placement of the level energies in the memory kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseConvention {
    /// `e^{iω_a t - iω_b t'}`: row energy at the outer time.
    #[default]
    Printed,
    /// `e^{iω_a t' - iω_b t}`: row energy at the inner time. On the diagonal this
    /// flips the sign of the detuning between the level and the pulse-induced
    /// frequency shift.
    Rotating,
}

/// Uniform outer time grid; pulse instants are merged into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub t_end: T,
    pub dt: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_end: T, dt: T) -> Result<Self> {
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(Error::invalid("grid.t_end", "must be positive"));
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::invalid("grid.dt", "must be positive"));
        }
        Ok(TimeGrid { t_end, dt })
    }

    /// Largest step not exceeding `min(τ_min, t_c)/20` that divides `τ_min`
    /// evenly, so pulse instants fall on grid nodes.
    pub fn default_step(bath: &BathModel<T>, modulation: &ModulationSchedule<T>) -> T {
        let tc = bath.min_correlation_time();
        let target = match modulation.min_interval() {
            Some(tau) => tau.min(tc) / T::lit(20.0),
            None => tc / T::lit(20.0),
        };
        match modulation.min_interval() {
            Some(tau) => {
                let n = (tau / target - T::lit(1e-9)).ceil().max(T::one());
                tau / n
            }
            None => target,
        }
    }

    /// Uniform nodes merged with the given break points.
    pub fn nodes(&self, breaks: &[T]) -> Vec<T> {
        merged_nodes(T::zero(), self.t_end, self.dt, breaks)
    }
}

/// Thresholds deciding when the preservation conditions count as met.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionTolerances<T> {
    /// `offdiag_norm < offdiag · (Σ_a |J_aa|)²`
    pub offdiag: T,
    /// `rate_spread < rate · mean Re J_aa`
    pub rate: T,
}

impl<T: Real> Default for ConditionTolerances<T> {
    fn default() -> Self {
        ConditionTolerances { offdiag: T::lit(1e-4), rate: T::lit(1e-2) }
    }
}

/// A complete decay problem: systems, bath, modulation, initial state and grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayScenario<T> {
    pub layout: ChannelLayout,
    /// Level energies `ω_{j,n}`, flat channel order.
    pub energies: Vec<T>,
    pub bath: BathModel<T>,
    pub modulation: ModulationSchedule<T>,
    /// Initial interaction-picture amplitudes `α̃(0)`.
    pub initial: Vec<Complex<T>>,
    pub grid: TimeGrid<T>,
    pub memory: MemoryWindow<T>,
    pub phase_convention: PhaseConvention,
    pub tolerances: ConditionTolerances<T>,
}

impl<T: Real> DecayScenario<T> {
    /// Builds a scenario with the default grid step, automatic memory window and
    /// printed phase convention, then validates it.
    pub fn new(
        energies: Vec<T>,
        bath: BathModel<T>,
        modulation: ModulationSchedule<T>,
        initial: Vec<Complex<T>>,
        t_end: T,
    ) -> Result<Self> {
        let dt = TimeGrid::default_step(&bath, &modulation);
        let scenario = DecayScenario {
            layout: bath.layout(),
            energies,
            bath,
            modulation,
            initial,
            grid: TimeGrid::new(t_end, dt)?,
            memory: MemoryWindow::Auto,
            phase_convention: PhaseConvention::Printed,
            tolerances: ConditionTolerances::default(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn channels(&self) -> usize {
        self.layout.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layout.len();
        if self.bath.layout().len() != n {
            return Err(Error::invalid("bath", format!("bath has {} channels, systems define {n}", self.bath.layout().len())));
        }
        if self.energies.len() != n {
            return Err(Error::invalid("systems.energies", format!("expected {n} energies")));
        }
        if self.modulation.len() != n {
            return Err(Error::invalid("modulation", format!("expected {n} channel entries, got {}", self.modulation.len())));
        }
        if self.initial.len() != n {
            return Err(Error::invalid("initial", format!("expected {n} amplitudes")));
        }
        let norm: T = self.initial.iter().map(|a| a.norm_sqr()).sum();
        if norm > T::one() + T::lit(1e-9) {
            return Err(Error::invalid("initial", "total excitation probability exceeds one"));
        }
        TimeGrid::new(self.grid.t_end, self.grid.dt)?;
        let dt = self.grid.dt;
        let slack = T::one() + T::lit(1e-9);
        let twenty = T::lit(20.0);
        if let Some(tau) = self.modulation.min_interval() {
            if dt > tau / twenty * slack {
                return Err(Error::coarse("grid.dt", format!("dt = {dt} exceeds tau_min/20 = {}", tau / twenty)));
            }
        }
        let tc = self.bath.min_correlation_time();
        if dt > tc / twenty * slack {
            return Err(Error::coarse("grid.dt", format!("dt = {dt} exceeds t_c/20 = {}", tc / twenty)));
        }
        let wmax = self.energies.iter().map(|w| w.abs()).fold(T::zero(), T::max);
        if dt * wmax > T::lit(0.3) {
            return Err(Error::coarse("grid.dt", format!("dt * max|omega| = {} > 0.3", dt * wmax)));
        }
        Ok(())
    }

    /// Outer time nodes, including every pulse instant and Stark break point.
    pub fn nodes(&self) -> Vec<T> {
        let breaks = self.modulation.breakpoints(T::zero(), self.grid.t_end);
        self.grid.nodes(&breaks)
    }

    fn memory_time(&self) -> T {
        self.bath.memory_time(self.memory)
    }

    /// Phase factors of the outer (row) and inner (column) times without pulse jumps.
    fn outer_smooth(&self, a: usize, b: usize, t: T) -> Complex<T> {
        let ch = self.modulation.channel(a);
        let w = match self.phase_convention {
            PhaseConvention::Printed => self.energies[a],
            PhaseConvention::Rotating => -self.energies[b],
        };
        cis(w * t - ch.smooth_phase(t))
    }

    fn inner_smooth(&self, a: usize, b: usize, t: T) -> Complex<T> {
        let ch = self.modulation.channel(b);
        let w = match self.phase_convention {
            PhaseConvention::Printed => -self.energies[b],
            PhaseConvention::Rotating => self.energies[a],
        };
        cis(w * t + ch.smooth_phase(t))
    }

    fn panel_length(&self) -> T {
        let tc = self.bath.min_correlation_time();
        let wmax = self.energies.iter().map(|w| w.abs()).fold(T::zero(), T::max);
        let mut len = tc / T::lit(2.0);
        if wmax > T::zero() {
            len = len.min(T::one() / wmax);
        }
        len
    }
}

/// Sampled output of a decay run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceHistory<T> {
    pub times: Vec<T>,
    /// `W(t_k)`, right limits at pulse instants.
    pub w: Vec<CMatrix<T>>,
    /// `W(t_k)` left limits (equal to `w` away from pulse instants).
    pub w_left: Vec<CMatrix<T>>,
    /// `W` at the midpoint of each step, `len = times.len() - 1`.
    pub w_mid: Vec<CMatrix<T>>,
    pub j: Vec<CMatrix<T>>,
    /// Interaction-picture amplitudes `α̃(t_k)`.
    pub amplitudes: Vec<CVector<T>>,
    /// `∫_0^{t_k} δ_a`, per channel.
    pub stark_integrals: Vec<Vec<T>>,
    /// Reference channel for the mixing and decay parameters.
    pub reference: usize,
}

impl<T: Real> DecoherenceHistory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the node closest to `t`.
    pub fn index_at(&self, t: T) -> usize {
        let k = self.times.partition_point(|s| *s < t);
        if k == 0 {
            return 0;
        }
        if k >= self.times.len() {
            return self.times.len() - 1;
        }
        if (self.times[k] - t).abs() < (t - self.times[k - 1]).abs() {
            k
        } else {
            k - 1
        }
    }

    /// Amplitudes dressed by the Stark phases, `α̂_a = e^{-i∫δ_a} α̃_a`; their
    /// ratios are the mixing parameters.
    pub fn dressed_amplitudes(&self, k: usize) -> CVector<T> {
        let mut out = self.amplitudes[k].clone();
        for (a, z) in out.iter_mut().enumerate() {
            *z *= cis(-self.stark_integrals[k][a]);
        }
        out
    }

    pub fn mixing_decay(&self, k: usize) -> MixingDecay<T> {
        mixing_decay_parameters(self.dressed_amplitudes(k).as_slice().unwrap(), self.reference)
    }

    /// Changes the reference channel of the mixing and decay parameters.
    pub fn with_reference(mut self, reference: usize) -> Self {
        self.reference = reference;
        self
    }
}

/// Tabulated inner integrals of one scenario for one set of pulse intervals.
///
/// Evaluation points alternate nodes and step midpoints: point `2k` is node `k`,
/// point `2k+1` is the midpoint of step `k`.
#[derive(Debug, Clone)]
pub struct DecayEngine<T> {
    scenario: DecayScenario<T>,
    nodes: Vec<T>,
    /// `inner[p][a*n+b]`: `(pulse index of b, ∫ Φ_ab(t-t') inner_smooth(t') dt')` per interval.
    inner: Vec<Vec<Vec<(i64, Complex<T>)>>>,
    /// Largest pulse count of any channel, for phasor tables.
    max_count: i64,
}

impl<T: Real> DecayEngine<T> {
    pub fn new(scenario: &DecayScenario<T>) -> Result<Self> {
        scenario.validate()?;
        let scenario = scenario.clone();
        let nodes = scenario.nodes();
        let n = scenario.channels();
        let gl = GaussLegendre::<T>::new(8);
        let panel = scenario.panel_length();
        let mem = scenario.memory_time();
        let half = T::lit(0.5);

        let mut points = Vec::with_capacity(2 * nodes.len());
        for k in 0..nodes.len() {
            points.push(nodes[k]);
            if k + 1 < nodes.len() {
                points.push((nodes[k] + nodes[k + 1]) * half);
            }
        }

        let inner = points
            .iter()
            .map(|&t| {
                let lo = if mem.is_finite() { (t - mem).max(T::zero()) } else { T::zero() };
                let mut row = Vec::with_capacity(n * n);
                for a in 0..n {
                    for b in 0..n {
                        row.push(inner_blocks(&scenario, &gl, panel, a, b, lo, t));
                    }
                }
                row
            })
            .collect();

        let max_count = (0..n)
            .map(|a| scenario.modulation.channel(a).pulse_count(scenario.grid.t_end, Side::After))
            .max()
            .unwrap_or(0);
        Ok(DecayEngine { scenario, nodes, inner, max_count })
    }

    pub fn scenario(&self) -> &DecayScenario<T> {
        &self.scenario
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    fn phasors(&self, thetas: &[T]) -> Vec<Vec<Complex<T>>> {
        thetas
            .iter()
            .map(|&th| (0..=self.max_count + 1).map(|k| cis(T::from_i64(k).unwrap() * th)).collect())
            .collect()
    }

    fn counts(&self, t: T, side: Side) -> Vec<i64> {
        (0..self.scenario.channels()).map(|a| self.scenario.modulation.channel(a).pulse_count(t, side)).collect()
    }

    fn w_at_point(&self, p: usize, t: T, side: Side, ph: &[Vec<Complex<T>>]) -> CMatrix<T> {
        let n = self.scenario.channels();
        let counts = self.counts(t, side);
        let mut w = CMatrix::zeros((n, n));
        for a in 0..n {
            let outer_pulse = ph[a][counts[a] as usize].conj();
            for b in 0..n {
                let mut s = Complex::zero();
                for &(k, r) in &self.inner[p][a * n + b] {
                    s += ph[b][k as usize] * r;
                }
                w[[a, b]] = outer_pulse * self.scenario.outer_smooth(a, b, t) * s;
            }
        }
        w
    }

    /// Runs the engine with the scenario's own phase steps.
    pub fn run(&self) -> DecoherenceHistory<T> {
        self.run_with_phases(&self.scenario.modulation.phase_steps())
    }

    /// Samples `W`, integrates `J` and evolves the amplitudes for the given
    /// per-channel phase steps (pulse intervals stay those of the scenario).
    pub fn run_with_phases(&self, thetas: &[T]) -> DecoherenceHistory<T> {
        let (w, w_left, w_mid) = self.sample_w(thetas);
        let j = integrate_w(&self.nodes, &w, &w_left, &w_mid);
        let n = self.scenario.channels();
        let mut amplitudes = Vec::with_capacity(self.nodes.len());
        let mut alpha: CVector<T> = Array1::from(self.scenario.initial.clone());
        amplitudes.push(alpha.clone());
        for k in 0..self.nodes.len() - 1 {
            let h = self.nodes[k + 1] - self.nodes[k];
            let step = expm(&magnus4(h, &w[k], &w_mid[k], &w_left[k + 1]));
            alpha = step.dot(&alpha);
            amplitudes.push(alpha.clone());
        }
        let stark_integrals = self
            .nodes
            .iter()
            .map(|&t| (0..n).map(|a| self.scenario.modulation.channel(a).stark.integral(t)).collect())
            .collect();
        DecoherenceHistory { times: self.nodes.clone(), w, w_left, w_mid, j, amplitudes, stark_integrals, reference: 0 }
    }

    fn sample_w(&self, thetas: &[T]) -> (Vec<CMatrix<T>>, Vec<CMatrix<T>>, Vec<CMatrix<T>>) {
        let ph = self.phasors(thetas);
        let mut w = Vec::with_capacity(self.nodes.len());
        let mut w_left = Vec::with_capacity(self.nodes.len());
        let mut w_mid = Vec::with_capacity(self.nodes.len());
        for (k, &t) in self.nodes.iter().enumerate() {
            let p = 2 * k;
            w.push(self.w_at_point(p, t, Side::After, &ph));
            w_left.push(if k == 0 { w[0].clone() } else { self.w_at_point(p, t, Side::Before, &ph) });
            if k + 1 < self.nodes.len() {
                let tm = (t + self.nodes[k + 1]) * T::lit(0.5);
                w_mid.push(self.w_at_point(p + 1, tm, Side::After, &ph));
            }
        }
        (w, w_left, w_mid)
    }

    /// `J(t_end)` for the given phase steps without evolving amplitudes.
    pub fn j_final(&self, thetas: &[T]) -> CMatrix<T> {
        let table = self.final_table();
        table.evaluate(thetas, self.scenario.channels())
    }

    /// Phase-independent decomposition `J_ab(t_end) = Σ e^{-i k θ_a} e^{i m θ_b} Q_ab(k, m)`.
    pub fn final_table(&self) -> FinalTable<T> {
        let n = self.scenario.channels();
        let mut q: Vec<BTreeMap<(i64, i64), Complex<T>>> = vec![BTreeMap::new(); n * n];
        let sixth = T::one() / T::lit(6.0);
        for k in 0..self.nodes.len() - 1 {
            let (t0, t1) = (self.nodes[k], self.nodes[k + 1]);
            let h = t1 - t0;
            let tm = (t0 + t1) * T::lit(0.5);
            let c0 = self.counts(t0, Side::After);
            let cm = self.counts(tm, Side::After);
            let c1 = self.counts(t1, Side::Before);
            let pts = [(2 * k, t0, &c0, h * sixth), (2 * k + 1, tm, &cm, h * sixth * T::lit(4.0)), (2 * k + 2, t1, &c1, h * sixth)];
            for a in 0..n {
                for b in 0..n {
                    let map = &mut q[a * n + b];
                    for (p, t, counts, wgt) in pts.iter() {
                        let f = self.scenario.outer_smooth(a, b, *t) * *wgt;
                        for &(m, r) in &self.inner[*p][a * n + b] {
                            *map.entry((counts[a], m)).or_insert_with(Complex::zero) += f * r;
                        }
                    }
                }
            }
        }
        FinalTable { entries: q.into_iter().map(|m| m.into_iter().collect()).collect(), max_count: self.max_count }
    }
}

/// See [`DecayEngine::final_table`].
#[derive(Debug, Clone)]
pub struct FinalTable<T> {
    entries: Vec<Vec<((i64, i64), Complex<T>)>>,
    max_count: i64,
}

impl<T: Real> FinalTable<T> {
    pub fn evaluate(&self, thetas: &[T], n: usize) -> CMatrix<T> {
        let ph: Vec<Vec<Complex<T>>> = thetas
            .iter()
            .map(|&th| (0..=self.max_count + 1).map(|k| cis(T::from_i64(k).unwrap() * th)).collect())
            .collect();
        let mut j = CMatrix::zeros((n, n));
        for a in 0..n {
            for b in 0..n {
                let mut s = Complex::zero();
                for &((k, m), q) in &self.entries[a * n + b] {
                    s += ph[a][k as usize].conj() * ph[b][m as usize] * q;
                }
                j[[a, b]] = s;
            }
        }
        j
    }
}

/// `∫_{lo}^{t} Φ_ab(t-t') inner_smooth(t') dt'` split by the pulse intervals of `b`.
fn inner_blocks<T: Real>(
    s: &DecayScenario<T>,
    gl: &GaussLegendre<T>,
    panel: T,
    a: usize,
    b: usize,
    lo: T,
    t: T,
) -> Vec<(i64, Complex<T>)> {
    if t <= lo {
        return Vec::new();
    }
    let chb = s.modulation.channel(b);
    let mut cuts = vec![lo];
    cuts.extend(chb.breakpoints(lo, t));
    cuts.push(t);
    let mut out: Vec<(i64, Complex<T>)> = Vec::new();
    for seg in cuts.windows(2) {
        let (u, v) = (seg[0], seg[1]);
        if v <= u {
            continue;
        }
        let k = chb.pulse_count((u + v) * T::lit(0.5), Side::After);
        let val = gl.integrate_composite(u, v, panel, |tp| s.bath.response_flat(a, b, t - tp) * s.inner_smooth(a, b, tp));
        match out.last_mut() {
            Some((kk, acc)) if *kk == k => *acc += val,
            _ => out.push((k, val)),
        }
    }
    out
}

/// Fourth-order Magnus exponent of `dα/dt = -W α` over one step from the
/// samples at both ends and the midpoint. Its first term is the Simpson
/// integral, so a scalar run reproduces `e^{-J}` exactly.
fn magnus4<T: Real>(h: T, w0: &CMatrix<T>, wm: &CMatrix<T>, w1: &CMatrix<T>) -> CMatrix<T> {
    let six = T::lit(6.0);
    let b0 = (w0 + &wm.mapv(|z| z * T::lit(4.0)) + w1).mapv(|z| -z * (h / six));
    let b1 = (w0 - w1).mapv(|z| z * (h / T::lit(12.0)));
    let comm = b1.dot(&b0) - b0.dot(&b1);
    b0 + comm
}

/// Cumulative Simpson integration of the sampled `W`, honouring one-sided limits.
pub fn integrate_w<T: Real>(
    times: &[T],
    w: &[CMatrix<T>],
    w_left: &[CMatrix<T>],
    w_mid: &[CMatrix<T>],
) -> Vec<CMatrix<T>> {
    let n = w[0].nrows();
    let mut acc = CMatrix::<T>::zeros((n, n));
    let mut out = Vec::with_capacity(times.len());
    out.push(acc.clone());
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        for a in 0..n {
            for b in 0..n {
                acc[[a, b]] += simpson(h, w[k][[a, b]], w_mid[k][[a, b]], w_left[k + 1][[a, b]]);
            }
        }
        out.push(acc.clone());
    }
    out
}

/// `W(t)` by direct quadrature of its definition, without the pulse-interval tables.
pub fn compute_w<T: Real>(scenario: &DecayScenario<T>, t: T) -> Result<CMatrix<T>> {
    scenario.validate()?;
    let n = scenario.channels();
    let gl = GaussLegendre::<T>::new(8);
    let panel = scenario.panel_length();
    let mem = scenario.memory_time();
    let lo = if mem.is_finite() { (t - mem).max(T::zero()) } else { T::zero() };
    let mut w = CMatrix::zeros((n, n));
    let breaks = scenario.modulation.breakpoints(lo, t);
    let mut cuts = vec![lo];
    cuts.extend(breaks);
    cuts.push(t);
    for a in 0..n {
        let eps_a = scenario.modulation.channel(a).epsilon(t, Side::After).conj();
        for b in 0..n {
            let chb = scenario.modulation.channel(b);
            let mut acc = Complex::zero();
            for seg in cuts.windows(2) {
                let (u, v) = (seg[0], seg[1]);
                if v <= u {
                    continue;
                }
                let pulse = cis(chb.pulse_phase((u + v) * T::lit(0.5), Side::After));
                acc += pulse
                    * gl.integrate_composite(u, v, panel, |tp| {
                        let freq = match scenario.phase_convention {
                            PhaseConvention::Printed => scenario.energies[a] * t - scenario.energies[b] * tp,
                            PhaseConvention::Rotating => scenario.energies[a] * tp - scenario.energies[b] * t,
                        };
                        scenario.bath.response_flat(a, b, t - tp) * cis(freq + chb.smooth_phase(tp))
                    });
            }
            w[[a, b]] = eps_a * acc;
        }
    }
    Ok(w)
}

/// Recomputes the `J` series of a history from its sampled `W`.
pub fn compute_j<T: Real>(history: &DecoherenceHistory<T>) -> Vec<CMatrix<T>> {
    integrate_w(&history.times, &history.w, &history.w_left, &history.w_mid)
}

/// Integrates `dα̃/dt = -W(t) α̃` over the scenario grid.
pub fn evolve_amplitudes<T: Real>(scenario: &DecayScenario<T>) -> Result<DecoherenceHistory<T>> {
    Ok(DecayEngine::new(scenario)?.run())
}

/// Mixing parameters `c_a = α_a / α_ref` and decay parameter `A = α_ref sqrt(Σ|c|²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingDecay<T> {
    pub mixing: Option<CVector<T>>,
    pub decay: Option<Complex<T>>,
    /// Set when `|α_ref| <= 1e-12`; mixing parameters are then undefined.
    pub degenerate: bool,
}

pub fn mixing_decay_parameters<T: Real>(alpha: &[Complex<T>], reference: usize) -> MixingDecay<T> {
    let r = alpha[reference];
    if r.norm() <= T::lit(1e-12) {
        return MixingDecay { mixing: None, decay: None, degenerate: true };
    }
    let c: CVector<T> = alpha.iter().map(|z| *z / r).collect();
    let norm: T = c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    MixingDecay { mixing: Some(c), decay: Some(r * norm), degenerate: false }
}

/// Amplitudes with the given mixing parameters and decay parameter.
pub fn amplitudes_from_mixing<T: Real>(mixing: &[Complex<T>], decay: Complex<T>, reference: usize) -> Result<Vec<Complex<T>>> {
    let norm: T = mixing.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    if !(norm > T::zero()) || mixing[reference].norm() <= T::lit(1e-12) {
        return Err(Error::invalid("initial.mixing", "reference mixing parameter must be non-zero"));
    }
    let r = decay / (mixing[reference] * norm);
    Ok(mixing.iter().map(|c| *c * r).collect())
}

/// Dicke-basis coefficients `q_j^{(l)} = e^{2πi j (l-1)/M}/√M`, one-based `j` and `l`.
pub fn dicke_coefficients<T: Real>(m: usize, l: usize) -> Vec<Complex<T>> {
    let norm = T::of_usize(m).sqrt();
    (1..=m)
        .map(|j| cis(T::TAU() * T::of_usize(j) * T::of_usize(l - 1) / T::of_usize(m)) / norm)
        .collect()
}

/// Residuals of the preservation conditions at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreservationResiduals<T> {
    /// `Σ_{a≠b} |J_ab|²`
    pub offdiag_norm: T,
    /// `max Re J_aa - min Re J_aa`
    pub rate_spread: T,
    /// Smallest arc (mod 2π) containing all `Im J_aa + ∫δ_a`.
    pub phase_spread: T,
}

pub fn residuals_from_j<T: Real>(j: &CMatrix<T>, stark: &[T]) -> PreservationResiduals<T> {
    let n = j.nrows();
    let mut off = T::zero();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                off += j[[a, b]].norm_sqr();
            }
        }
    }
    let re: Vec<T> = (0..n).map(|a| j[[a, a]].re).collect();
    let hi = re.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = re.iter().copied().fold(T::infinity(), T::min);
    let phases: Vec<T> = (0..n).map(|a| j[[a, a]].im + stark[a]).collect();
    PreservationResiduals { offdiag_norm: off, rate_spread: hi - lo, phase_spread: circular_spread(&phases) }
}

/// Length of the shortest arc on the circle containing all angles.
pub fn circular_spread<T: Real>(angles: &[T]) -> T {
    if angles.len() < 2 {
        return T::zero();
    }
    let tau = T::TAU();
    let mut a: Vec<T> = angles.iter().map(|x| ((*x % tau) + tau) % tau).collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut max_gap = a[0] + tau - a[a.len() - 1];
    for w in a.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    (tau - max_gap).max(T::zero())
}

pub fn preservation_residuals<T: Real>(history: &DecoherenceHistory<T>, t: T) -> PreservationResiduals<T> {
    let k = history.index_at(t);
    residuals_from_j(&history.j[k], &history.stark_integrals[k])
}

/// Whether residuals satisfy the preservation tolerances.
pub fn conditions_met<T: Real>(j: &CMatrix<T>, res: &PreservationResiduals<T>, tol: &ConditionTolerances<T>) -> bool {
    let n = j.nrows();
    let diag_abs: T = (0..n).map(|a| j[[a, a]].norm()).sum();
    let mean_re: T = (0..n).map(|a| j[[a, a]].re).sum::<T>() / T::of_usize(n);
    res.offdiag_norm <= tol.offdiag * diag_abs * diag_abs && res.rate_spread <= tol.rate * mean_re.abs()
}

/// Preservation fidelity `e^{-2 Re J_ref}`; `approximate` marks runs where the
/// preservation conditions do not hold, so the value is not the exact fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreservationFidelity<T> {
    pub value: T,
    pub approximate: bool,
}

pub fn preservation_fidelity<T: Real>(
    history: &DecoherenceHistory<T>,
    t: T,
    tolerances: &ConditionTolerances<T>,
) -> PreservationFidelity<T> {
    let k = history.index_at(t);
    let j = &history.j[k];
    let res = residuals_from_j(j, &history.stark_integrals[k]);
    let r = history.reference;
    PreservationFidelity {
        value: (-T::lit(2.0) * j[[r, r]].re).exp(),
        approximate: !conditions_met(j, &res, tolerances),
    }
}

/// Index of the largest-magnitude desired amplitude.
pub fn steering_reference<T: Real>(desired: &[Complex<T>]) -> usize {
    let mut best = 0;
    for (i, z) in desired.iter().enumerate() {
        if z.norm() > desired[best].norm() {
            best = i;
        }
    }
    best
}

/// `Σ_a |c_a(t) - c^d_a|²` with both ratios taken against the largest desired
/// amplitude. Returns `None` when the reference amplitude vanishes.
pub fn steering_residual<T: Real>(history: &DecoherenceHistory<T>, t: T, desired: &[Complex<T>]) -> Option<T> {
    let r = steering_reference(desired);
    if desired[r].norm() <= T::lit(1e-12) {
        return None;
    }
    let k = history.index_at(t);
    let md = mixing_decay_parameters(history.dressed_amplitudes(k).as_slice().unwrap(), r);
    let c = md.mixing?;
    Some(c.iter().zip(desired).map(|(ca, da)| (*ca - *da / desired[r]).norm_sqr()).sum())
}

/// Fidelity of the initial Dicke-basis state `D^M_l` (one-based `l`):
/// `|A|² |Σ_j q̄_j c_j|² / Σ|c_j|²`.
pub fn entangled_basis_fidelity<T: Real>(history: &DecoherenceHistory<T>, l: usize, t: T) -> Option<T> {
    let k = history.index_at(t);
    let m = history.amplitudes[k].len();
    let md = history.mixing_decay(k);
    let (c, a) = (md.mixing?, md.decay?);
    let q = dicke_coefficients::<T>(m, l);
    let overlap = q.iter().zip(c.iter()).fold(Complex::zero(), |s, (qj, cj)| s + qj.conj() * *cj);
    let norm: T = c.iter().map(|z| z.norm_sqr()).sum();
    Some(a.norm_sqr() * overlap.norm_sqr() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use crate::bath::{CorrelatedGaussianDecayBath, GaussianDipoleBath};
    use std::f64::consts::PI;

    fn single_gaussian(tc: f64, t_end: f64) -> DecayScenario<f64> {
        let bath = BathModel::GaussianDipole(GaussianDipoleBath::uniform(1.0, 0.0, vec![0.0], tc).unwrap());
        DecayScenario::new(vec![0.0], bath, ModulationSchedule::unmodulated(1), vec![Complex::one()], t_end).unwrap()
    }

    #[test]
    fn zero_bath_gives_zero_w_and_constant_amplitudes() {
        let pos = CorrelatedGaussianDecayBath::ring_positions(3, 1.0);
        let bath = BathModel::CorrelatedGaussian(CorrelatedGaussianDecayBath::new(0.0, vec![1.0; 3], 1.0, pos).unwrap());
        let init = dicke_coefficients::<f64>(3, 1);
        let s = DecayScenario::new(vec![0.5; 3], bath, ModulationSchedule::phase_trains(1.0, &[PI; 3]).unwrap(), init.clone(), 5.0)
            .unwrap();
        let h = evolve_amplitudes(&s).unwrap();
        for (w, a) in h.w.iter().zip(&h.amplitudes) {
            assert!(w.iter().all(|z| z.norm() == 0.0));
            for (x, y) in a.iter().zip(&init) {
                assert_eq!(x, y);
            }
        }
        assert!(h.j.iter().all(|j| j.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn gaussian_w_at_two_tc() {
        // W(t) = √π t_c erf(t/2t_c); erf(1) = 0.8427007929497149
        let tc = 0.8;
        let s = single_gaussian(tc, 4.0);
        let w = compute_w(&s, 2.0 * tc).unwrap();
        let expected = PI.sqrt() * tc * 0.842_700_792_949_714_9;
        assert!((w[[0, 0]].re - expected).abs() < 1e-12, "{} vs {expected}", w[[0, 0]].re);
        assert!(w[[0, 0]].im.abs() < 1e-14);
    }

    #[test]
    fn engine_tables_match_direct_w() {
        let bath = BathModel::GaussianDipole(
            GaussianDipoleBath::uniform(1.0, 0.5, vec![0.246 * PI, 0.0, 0.326 * PI, 0.370 * PI], 1.0).unwrap(),
        );
        let energies = vec![0.5, 0.6, 0.7, 0.8];
        let thetas = [PI, 9.0 * PI, 8.0 * PI, 7.0 * PI];
        for conv in [PhaseConvention::Printed, PhaseConvention::Rotating] {
            let mut s = DecayScenario::new(
                energies.clone(),
                bath.clone(),
                ModulationSchedule::phase_trains(1.0, &thetas).unwrap(),
                vec![Complex::new(0.5, 0.0); 4],
                6.0,
            )
            .unwrap();
            s.phase_convention = conv;
            let engine = DecayEngine::new(&s).unwrap();
            let h = engine.run();
            for &t in &[0.55, 2.5, 4.0, 5.95] {
                let k = h.index_at(t);
                let direct = compute_w(&s, h.times[k]).unwrap();
                for (x, y) in direct.iter().zip(h.w[k].iter()) {
                    assert!((x - y).norm() < 1e-12, "{conv:?} t={t}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn final_table_matches_history() {
        let pos = CorrelatedGaussianDecayBath::ring_positions(3, 1.0);
        let bath = BathModel::CorrelatedGaussian(CorrelatedGaussianDecayBath::new(0.05, vec![0.75, 0.81, 1.0], 1.0, pos).unwrap());
        let s = DecayScenario::new(
            vec![0.5; 3],
            bath,
            ModulationSchedule::phase_trains(1.0, &[PI; 3]).unwrap(),
            dicke_coefficients(3, 1),
            8.0,
        )
        .unwrap();
        let engine = DecayEngine::new(&s).unwrap();
        let thetas = [PI, 0.7 * PI, 0.58 * PI];
        let h = engine.run_with_phases(&thetas);
        let jf = engine.j_final(&thetas);
        for (x, y) in jf.iter().zip(h.j.last().unwrap().iter()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn mixing_decay_examples() {
        let one = Complex::<f64>::one();
        let z = Complex::zero();
        let md = mixing_decay_parameters(&[one, z, z], 0);
        assert_eq!(md.mixing.unwrap().to_vec(), vec![one, z, z]);
        assert!((md.decay.unwrap() - one).norm() < 1e-15);

        let half = Complex::new(0.5, 0.0);
        let md = mixing_decay_parameters(&[half, half], 0);
        assert_eq!(md.mixing.unwrap().to_vec(), vec![one, one]);
        assert!((md.decay.unwrap().re - 0.5 * 2f64.sqrt()).abs() < 1e-15);

        let md = mixing_decay_parameters(&[z, one], 0);
        assert!(md.degenerate && md.mixing.is_none());
    }

    #[test]
    fn mixing_round_trip_from_figure_five_initial_condition() {
        let c: Vec<Complex<f64>> = [1.0, 1.57, 1.64].iter().map(|x| Complex::new(*x, 0.0)).collect();
        let alpha = amplitudes_from_mixing(&c, Complex::one(), 0).unwrap();
        let md = mixing_decay_parameters(&alpha, 0);
        for (x, y) in md.mixing.unwrap().iter().zip(&c) {
            assert!((x - y).norm() < 1e-14);
        }
        assert!((md.decay.unwrap() - Complex::one()).norm() < 1e-14);
    }

    #[test]
    fn dicke_zero_sum() {
        let q = dicke_coefficients::<f64>(3, 2);
        let s = q.iter().fold(Complex::<f64>::zero(), |a, b| a + b);
        assert!(s.norm() < 1e-15);
        let n: f64 = q.iter().map(|z| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circular_spread_wraps() {
        assert!((circular_spread(&[0.1, 2.0 * PI - 0.1]) - 0.2).abs() < 1e-12);
        assert_eq!(circular_spread(&[1.0]), 0.0);
        assert!((circular_spread(&[0.0_f64, 1.0, 2.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_channel_residuals_vanish() {
        let s = single_gaussian(1.0, 5.0);
        let h = evolve_amplitudes(&s).unwrap();
        let r = preservation_residuals(&h, 5.0);
        assert_eq!((r.offdiag_norm, r.rate_spread, r.phase_spread), (0.0, 0.0, 0.0));
        let f = preservation_fidelity(&h, 0.0, &ConditionTolerances::default());
        assert_eq!(f.value, 1.0);
    }

    #[test]
    fn coarse_grid_is_refused() {
        let mut s = single_gaussian(1.0, 5.0);
        s.grid.dt = 0.2;
        assert!(matches!(DecayEngine::new(&s), Err(Error::GridTooCoarse { .. })));
        let mut s = single_gaussian(1.0, 5.0);
        s.energies = vec![20.0];
        assert!(matches!(s.validate(), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn over_normalised_initial_state_rejected() {
        let mut s = single_gaussian(1.0, 5.0);
        s.initial = vec![Complex::new(1.1, 0.0)];
        assert!(matches!(s.validate(), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn steering_residual_zero_on_target() {
        let s = single_gaussian(1.0, 2.0);
        let h = evolve_amplitudes(&s).unwrap();
        assert_eq!(steering_residual(&h, 1.0, &[Complex::new(0.3, 0.0)]), Some(0.0));
    }
}
