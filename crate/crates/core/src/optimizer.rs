//! Derivative-free search over modulation parameters.
//!
//! Bounded Nelder–Mead with restarts from Halton points. Phase-only decay
//! problems evaluate `J(t_end)` from a precomputed [`FinalTable`], so a single
//! objective call costs a phasor sum instead of a full engine run.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::{
    residuals_from_j, steering_reference, steering_residual, DecayEngine, DecayScenario, FinalTable, PreservationResiduals,
};
use crate::dephasing::{bell_fidelity, DephasingIntegrals, DephasingScenario};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which modulation parameter of a channel is free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterKind {
    Theta,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParameter<T> {
    pub channel: usize,
    pub kind: ParameterKind,
    pub lower: T,
    pub upper: T,
}

impl<T: Real> FreeParameter<T> {
    /// Phase step of `channel` over the default range `[0, 10π]`.
    pub fn theta(channel: usize) -> Self {
        FreeParameter { channel, kind: ParameterKind::Theta, lower: T::zero(), upper: T::lit(10.0) * T::PI() }
    }
}

/// How the time-resolved Bell gap is reduced to a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BellGapMetric {
    /// `|F_2 - F_4|` at the evaluation time.
    #[default]
    End,
    /// `max_t |F_2 - F_4|` up to the evaluation time.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub enum Objective<T> {
    Preserve {
        #[serde(default = "default_weights")]
        weights: [T; 3],
    },
    Steer {
        desired: Vec<Complex<T>>,
        time: T,
        #[serde(default = "default_lambda")]
        lambda: T,
    },
    EqualizeBell {
        time: T,
        #[serde(default)]
        metric: BellGapMetric,
    },
}

fn default_weights<T: Real>() -> [T; 3] {
    [T::one(), T::one(), T::lit(0.1)]
}

fn default_lambda<T: Real>() -> T {
    T::lit(0.1)
}

impl<T: Real> Objective<T> {
    pub fn preserve() -> Self {
        Objective::Preserve { weights: default_weights() }
    }
}

#[derive(Debug, Clone)]
pub enum ProblemScenario<T> {
    Decay(DecayScenario<T>),
    Dephasing(DephasingScenario<T>),
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem<T> {
    pub scenario: ProblemScenario<T>,
    pub free: Vec<FreeParameter<T>>,
    pub objective: Objective<T>,
}

/// Search settings; defaults are 8 restarts, 400 iterations, spread 1e-8.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings { restarts: 8, max_iterations: 400, tolerance: 1e-8 }
    }
}

/// Residual breakdown at the optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ResidualBreakdown<T> {
    Preserve(PreservationResiduals<T>),
    Steer { residual: Option<T>, penalty: T },
    EqualizeBell { gap: T },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary<T> {
    pub start: Vec<T>,
    pub best: Vec<T>,
    pub value: Option<T>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult<T> {
    pub parameters: Vec<T>,
    pub objective: T,
    pub residuals: ResidualBreakdown<T>,
    /// Best objective value after each iteration of the winning restart.
    pub trace: Vec<T>,
    pub converged: bool,
    pub evaluations: usize,
    pub restarts: Vec<RestartSummary<T>>,
}

/// Radical inverse of `i` in `base`.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Point `i` (one-based) of the Halton sequence in `dim` dimensions.
pub fn halton(i: usize, dim: usize) -> Vec<f64> {
    (0..dim).map(|d| radical_inverse(i, PRIMES[d % PRIMES.len()])).collect()
}

/// Outcome of one bounded Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct LocalMinimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: usize,
    pub trace: Vec<T>,
}

fn clamp<T: Real>(x: &mut [T], lo: &[T], hi: &[T]) {
    for i in 0..x.len() {
        x[i] = x[i].max(lo[i]).min(hi[i]);
    }
}

/// Nelder–Mead from `x0`; every trial point is projected onto the box.
pub fn nelder_mead<T: Real, F>(f: &F, x0: &[T], lo: &[T], hi: &[T], settings: &SearchSettings) -> Result<LocalMinimum<T>>
where
    F: Fn(&[T]) -> Result<T> + ?Sized,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[T]| -> Result<T> {
        evals += 1;
        let v = f(x)?;
        Ok(if v.is_nan() { T::infinity() } else { v })
    };
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clamp(&mut start, lo, hi);
    simplex.push((start.clone(), eval(&start)?));
    for i in 0..n {
        let mut x = start.clone();
        let step = (hi[i] - lo[i]) * T::lit(0.05);
        x[i] = if x[i] + step <= hi[i] { x[i] + step } else { x[i] - step };
        simplex.push((x.clone(), eval(&x)?));
    }
    let tol = T::lit(settings.tolerance);
    // the value spread alone leaves x uncertain by ~sqrt(tol) near a quadratic minimum
    let xtol = T::lit(1e-7);
    let width: Vec<T> = (0..n).map(|i| (hi[i] - lo[i]).max(T::min_positive_value())).collect();
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iterations {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        trace.push(simplex[0].1);
        let diameter = simplex.iter().skip(1).fold(T::zero(), |d, (x, _)| {
            (0..n).fold(d, |d, i| d.max((x[i] - simplex[0].0[i]).abs() / width[i]))
        });
        if (simplex[n].1 - simplex[0].1).abs() < tol && diameter < xtol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![T::zero(); n];
        for (x, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += x[i] / T::of_usize(n);
            }
        }
        let along = |c: T| -> Vec<T> {
            let mut p: Vec<T> = (0..n).map(|i| centroid[i] + c * (simplex[n].0[i] - centroid[i])).collect();
            clamp(&mut p, lo, hi);
            p
        };
        let xr = along(-alpha);
        let fr = eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(-gamma);
            let fe = eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(-rho);
                let v = eval(&x)?;
                (x, v)
            } else {
                let x = along(rho);
                let v = eval(&x)?;
                (x, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<T> = (0..n).map(|i| best[i] + sigma * (item.0[i] - best[i])).collect();
                    let v = eval(&x)?;
                    *item = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    Ok(LocalMinimum { x, value, iterations, converged, evaluations: evals, trace })
}

/// Restarted Nelder–Mead. Restart `i` starts from Halton point `i + 1`
/// (restart 0 from `first` when given). Among results within `1e-12` of the
/// best value, the one with the smallest `Σx²` wins.
pub fn minimize_box<T: Real, F>(
    f: &F,
    lo: &[T],
    hi: &[T],
    first: Option<&[T]>,
    settings: &SearchSettings,
) -> Result<(LocalMinimum<T>, Vec<RestartSummary<T>>)>
where
    F: Fn(&[T]) -> Result<T> + Sync + ?Sized,
{
    let dim = lo.len();
    if dim == 0 || hi.len() != dim {
        return Err(Error::invalid("optimize.free", "need at least one free parameter with bounds"));
    }
    for i in 0..dim {
        if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] <= hi[i]) {
            return Err(Error::invalid("optimize.free", format!("bounds of parameter {i} must be finite and ordered")));
        }
    }
    let starts: Vec<Vec<T>> = (0..settings.restarts.max(1))
        .map(|r| match (r, first) {
            (0, Some(x)) => x.to_vec(),
            _ => halton(r + 1, dim).iter().enumerate().map(|(i, u)| lo[i] + (hi[i] - lo[i]) * T::lit(*u)).collect(),
        })
        .collect();
    let runs: Vec<(Vec<T>, Result<LocalMinimum<T>>)> =
        starts.into_par_iter().map(|s| { let r = nelder_mead(f, &s, lo, hi, settings); (s, r) }).collect();

    let mut summaries = Vec::with_capacity(runs.len());
    let mut best: Option<LocalMinimum<T>> = None;
    let mut total = 0;
    let norm = |x: &[T]| x.iter().map(|v| *v * *v).sum::<T>();
    for (start, run) in runs {
        match run {
            Ok(m) => {
                total += m.evaluations;
                summaries.push(RestartSummary {
                    start,
                    best: m.x.clone(),
                    value: Some(m.value),
                    iterations: m.iterations,
                    converged: m.converged,
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let tie = T::lit(1e-12) * T::one().max(b.value.abs());
                        m.value < b.value - tie || ((m.value - b.value).abs() <= tie && norm(&m.x) < norm(&b.x))
                    }
                };
                if better {
                    best = Some(m);
                }
            }
            Err(e) => summaries.push(RestartSummary {
                start,
                best: Vec::new(),
                value: None,
                iterations: 0,
                converged: false,
                error: Some(e.to_string()),
            }),
        }
    }
    match best {
        Some(mut b) => {
            b.evaluations = total;
            Ok((b, summaries))
        }
        None => Err(Error::OptimizationFailed {
            starts: summaries.len(),
            diagnostics: summaries.iter().filter_map(|s| s.error.clone()).collect(),
        }),
    }
}

/// Value used when the steering reference amplitude has vanished.
const STEER_SENTINEL: f64 = 1e6;

enum Evaluator<T> {
    /// Phases only: `J(t_end)` from the table.
    DecayTable { table: FinalTable<T>, base: Vec<T>, stark: Vec<T> },
    /// Phases only, full history needed (steering).
    DecayEngine { engine: DecayEngine<T>, base: Vec<T> },
    /// Intervals free: rebuild the engine per evaluation.
    DecayRebuild { scenario: DecayScenario<T> },
    Dephasing { scenario: DephasingScenario<T> },
}

/// A problem prepared for repeated evaluation.
pub struct PreparedProblem<T> {
    problem: OptimizationProblem<T>,
    evaluator: Evaluator<T>,
}

impl<T: Real> PreparedProblem<T> {
    pub fn new(problem: OptimizationProblem<T>) -> Result<Self> {
        if problem.free.is_empty() {
            return Err(Error::invalid("optimize.free", "at least one free parameter is required"));
        }
        let channels = match &problem.scenario {
            ProblemScenario::Decay(s) => s.channels(),
            ProblemScenario::Dephasing(s) => s.qubits(),
        };
        for p in &problem.free {
            if p.channel >= channels {
                return Err(Error::IndexOutOfBounds { what: format!("free parameter channel {} (have {channels})", p.channel) });
            }
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower <= p.upper) {
                return Err(Error::invalid("optimize.free", "bounds must be finite and ordered"));
            }
            match p.kind {
                ParameterKind::Theta if p.lower < T::zero() || p.upper > T::lit(10.0) * T::PI() + T::lit(1e-9) => {
                    return Err(Error::invalid("optimize.free", "phase bounds must lie within [0, 10π]"));
                }
                ParameterKind::Tau if p.lower <= T::zero() => {
                    return Err(Error::invalid("optimize.free", "interval bounds must be positive"));
                }
                _ => {}
            }
        }
        let tau_free = problem.free.iter().any(|p| p.kind == ParameterKind::Tau);
        let evaluator = match (&problem.scenario, &problem.objective) {
            (ProblemScenario::Decay(s), Objective::Preserve { .. }) if !tau_free && s.modulation.is_phase_only() => {
                let engine = DecayEngine::new(s)?;
                let stark = (0..s.channels()).map(|a| s.modulation.channel(a).stark.integral(s.grid.t_end)).collect();
                Evaluator::DecayTable { table: engine.final_table(), base: s.modulation.phase_steps(), stark }
            }
            (ProblemScenario::Decay(s), Objective::Steer { desired, .. }) if !tau_free => {
                if desired.len() != s.channels() {
                    return Err(Error::invalid("optimize.objective.desired", "one desired mixing value per channel"));
                }
                Evaluator::DecayEngine { engine: DecayEngine::new(s)?, base: s.modulation.phase_steps() }
            }
            (ProblemScenario::Decay(s), Objective::EqualizeBell { .. }) => {
                let _ = s;
                return Err(Error::invalid("optimize.objective", "equalize_bell needs a dephasing scenario"));
            }
            (ProblemScenario::Decay(s), _) => {
                s.validate()?;
                Evaluator::DecayRebuild { scenario: s.clone() }
            }
            (ProblemScenario::Dephasing(s), Objective::EqualizeBell { .. }) => {
                if s.qubits() != 2 {
                    return Err(Error::invalid("optimize.scenario", "equalize_bell needs two qubits"));
                }
                s.validate()?;
                Evaluator::Dephasing { scenario: s.clone() }
            }
            (ProblemScenario::Dephasing(_), _) => {
                return Err(Error::invalid("optimize.objective", "dephasing scenarios support only equalize_bell"));
            }
        };
        Ok(PreparedProblem { problem, evaluator })
    }

    pub fn problem(&self) -> &OptimizationProblem<T> {
        &self.problem
    }

    pub fn bounds(&self) -> (Vec<T>, Vec<T>) {
        (self.problem.free.iter().map(|p| p.lower).collect(), self.problem.free.iter().map(|p| p.upper).collect())
    }

    /// Current values of the free parameters in the scenario.
    pub fn initial_point(&self) -> Vec<T> {
        self.problem
            .free
            .iter()
            .map(|p| {
                let ch = match &self.problem.scenario {
                    ProblemScenario::Decay(s) => s.modulation.channel(p.channel).clone(),
                    ProblemScenario::Dephasing(s) => s.modulation.channel(p.channel).clone(),
                };
                match (p.kind, ch.pulses) {
                    (ParameterKind::Theta, Some(pt)) => pt.phase_step,
                    (ParameterKind::Tau, Some(pt)) => pt.interval,
                    (ParameterKind::Theta, None) => T::zero(),
                    (ParameterKind::Tau, None) => p.upper,
                }
            })
            .collect()
    }

    fn phases(&self, base: &[T], x: &[T]) -> Vec<T> {
        let mut th = base.to_vec();
        for (p, v) in self.problem.free.iter().zip(x) {
            th[p.channel] = *v;
        }
        th
    }

    fn apply(&self, modulation: &mut crate::modulation::ModulationSchedule<T>, x: &[T]) -> Result<()> {
        for (p, v) in self.problem.free.iter().zip(x) {
            match p.kind {
                ParameterKind::Theta => modulation.set_phase_step(p.channel, *v)?,
                ParameterKind::Tau => modulation.set_interval(p.channel, *v)?,
            }
        }
        Ok(())
    }

    /// Objective value and its breakdown at `x`.
    pub fn evaluate(&self, x: &[T]) -> Result<(T, ResidualBreakdown<T>)> {
        match &self.evaluator {
            Evaluator::DecayTable { table, base, stark } => {
                let j = table.evaluate(&self.phases(base, x), stark.len());
                Ok(self.preserve_value(residuals_from_j(&j, stark)))
            }
            Evaluator::DecayEngine { engine, base } => {
                let h = engine.run_with_phases(&self.phases(base, x));
                self.decay_value(&h)
            }
            Evaluator::DecayRebuild { scenario } => {
                let mut s = scenario.clone();
                self.apply(&mut s.modulation, x)?;
                let h = DecayEngine::new(&s)?.run();
                self.decay_value(&h)
            }
            Evaluator::Dephasing { scenario } => {
                let mut s = scenario.clone();
                self.apply(&mut s.modulation, x)?;
                let ints = DephasingIntegrals::compute(&s)?;
                let (time, metric) = match self.problem.objective {
                    Objective::EqualizeBell { time, metric } => (time, metric),
                    _ => unreachable!("checked in new"),
                };
                let end = ints.index_at(time);
                let gap_at = |k: usize| -> Result<T> {
                    Ok((bell_fidelity(&s, &ints, 2, k)?.value - bell_fidelity(&s, &ints, 4, k)?.value).abs())
                };
                let gap = match metric {
                    BellGapMetric::End => gap_at(end)?,
                    BellGapMetric::Max => {
                        let mut g = T::zero();
                        for k in 0..=end {
                            g = g.max(gap_at(k)?);
                        }
                        g
                    }
                };
                Ok((gap, ResidualBreakdown::EqualizeBell { gap }))
            }
        }
    }

    fn preserve_value(&self, r: PreservationResiduals<T>) -> (T, ResidualBreakdown<T>) {
        let w = match self.problem.objective {
            Objective::Preserve { weights } => weights,
            _ => default_weights(),
        };
        let v = w[0] * r.offdiag_norm + w[1] * r.rate_spread * r.rate_spread + w[2] * r.phase_spread * r.phase_spread;
        (v, ResidualBreakdown::Preserve(r))
    }

    fn decay_value(&self, h: &crate::decay::DecoherenceHistory<T>) -> Result<(T, ResidualBreakdown<T>)> {
        match &self.problem.objective {
            Objective::Preserve { .. } => {
                let k = h.len() - 1;
                Ok(self.preserve_value(residuals_from_j(&h.j[k], &h.stark_integrals[k])))
            }
            Objective::Steer { desired, time, lambda } => {
                let r = steering_reference(desired);
                let k = h.index_at(*time);
                let penalty = *lambda * (T::one() - (-T::lit(2.0) * h.j[k][[r, r]].re).exp());
                match steering_residual(h, *time, desired) {
                    Some(res) => Ok((res + penalty, ResidualBreakdown::Steer { residual: Some(res), penalty })),
                    None => {
                        log::warn!("steering reference amplitude vanished; using sentinel objective");
                        Ok((T::lit(STEER_SENTINEL), ResidualBreakdown::Steer { residual: None, penalty }))
                    }
                }
            }
            Objective::EqualizeBell { .. } => Err(Error::invalid("optimize.objective", "equalize_bell needs a dephasing scenario")),
        }
    }

    pub fn value(&self, x: &[T]) -> Result<T> {
        self.evaluate(x).map(|(v, _)| v)
    }
}

/// Restarted bounded Nelder–Mead on the problem's objective.
pub fn minimize<T: Real>(problem: OptimizationProblem<T>, settings: &SearchSettings) -> Result<OptimizationResult<T>> {
    let prepared = PreparedProblem::new(problem)?;
    minimize_prepared(&prepared, settings)
}

pub fn minimize_prepared<T: Real>(prepared: &PreparedProblem<T>, settings: &SearchSettings) -> Result<OptimizationResult<T>> {
    let (lo, hi) = prepared.bounds();
    let f = |x: &[T]| prepared.value(x);
    let (best, restarts) = minimize_box(&f, &lo, &hi, None, settings)?;
    let (objective, residuals) = prepared.evaluate(&best.x)?;
    Ok(OptimizationResult {
        parameters: best.x,
        objective,
        residuals,
        trace: best.trace,
        converged: best.converged,
        evaluations: best.evaluations,
        restarts,
    })
}

/// One grid point of a power sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint<T> {
    /// Requested mean `θ/τ`; the global run uses `θ = π`, `τ = π / power`.
    pub power: T,
    pub interval: T,
    /// Mean `θ/τ` actually used by the local run.
    pub local_power: T,
    pub global_decay: T,
    pub local_decay: T,
    pub global_mixing: Vec<T>,
    pub local_mixing: Vec<T>,
    pub local_thetas: Vec<T>,
    pub local_objective: T,
    pub global_objective: T,
    /// Whether the local phases satisfy the preservation tolerances.
    pub symmetrized: bool,
    /// Set when the optimized local phases decayed faster than global ones and
    /// were replaced by `θ = π`.
    pub fell_back: bool,
}

/// For each power, compares global `θ = π` with locally optimized phases
/// (channel 0 pinned at `π`, others free in `[0, 10π]`) at `t_end`. The first
/// restart starts from the global phases.
pub fn power_sweep<T: Real>(scenario: &DecayScenario<T>, powers: &[T], settings: &SearchSettings) -> Result<Vec<SweepPoint<T>>> {
    let n = scenario.channels();
    let pi = T::PI();
    let mut out = Vec::with_capacity(powers.len());
    for &x in powers {
        if !(x > T::zero() && x.is_finite()) {
            return Err(Error::invalid("sweep.powers", "powers must be positive and finite"));
        }
        let tau = pi / x;
        let mut s = scenario.clone();
        s.modulation = crate::modulation::ModulationSchedule::phase_trains(tau, &vec![pi; n])?;
        s.grid = crate::decay::TimeGrid::new(s.grid.t_end, crate::decay::TimeGrid::default_step(&s.bath, &s.modulation))?;
        let engine = DecayEngine::new(&s)?;
        let global_th = vec![pi; n];
        let global = engine.run_with_phases(&global_th);
        let (gd, gm) = decay_and_mixing(&global);

        let problem = OptimizationProblem {
            scenario: ProblemScenario::Decay(s.clone()),
            free: (1..n).map(FreeParameter::theta).collect(),
            objective: Objective::preserve(),
        };
        let prepared = PreparedProblem::new(problem)?;
        let global_objective = prepared.value(&global_th[1..])?;
        let (lo, hi) = prepared.bounds();
        let f = |p: &[T]| prepared.value(p);
        let (best, _) = minimize_box(&f, &lo, &hi, Some(&global_th[1..]), settings)?;
        let mut th = global_th.clone();
        th[1..].copy_from_slice(&best.x);
        let local = engine.run_with_phases(&th);
        let (ld, lm) = decay_and_mixing(&local);
        let k = local.len() - 1;
        let res = residuals_from_j(&local.j[k], &local.stark_integrals[k]);
        let symmetrized = crate::decay::conditions_met(&local.j[k], &res, &s.tolerances);
        let fell_back = ld < gd;
        let (ld, lm, th, lobj) = if fell_back { (gd, gm.clone(), global_th, global_objective) } else { (ld, lm, th, best.value) };
        out.push(SweepPoint {
            power: x,
            interval: tau,
            local_power: th.iter().copied().sum::<T>() / (T::of_usize(n) * tau),
            global_decay: gd,
            local_decay: ld,
            global_mixing: gm,
            local_mixing: lm,
            local_thetas: th,
            local_objective: lobj,
            global_objective,
            symmetrized: symmetrized && !fell_back,
            fell_back,
        });
    }
    Ok(out)
}

fn decay_and_mixing<T: Real>(h: &crate::decay::DecoherenceHistory<T>) -> (T, Vec<T>) {
    let md = h.mixing_decay(h.len() - 1);
    let d = md.decay.map_or(T::zero(), |a| a.norm());
    let m = md.mixing.map_or_else(|| vec![T::nan(); h.amplitudes[0].len()], |c| c.iter().map(|z| z.norm()).collect());
    (d, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_plumbing() {
        let f = |x: &[f64]| -> Result<f64> { Ok((x[0] - 1.234).powi(2)) };
        let (m, runs) = minimize_box(&f, &[0.0], &[5.0], None, &SearchSettings::default()).unwrap();
        assert!((m.x[0] - 1.234).abs() < 1e-6, "{}", m.x[0]);
        assert_eq!(runs.len(), 8);
    }

    #[test]
    fn stays_in_bounds() {
        let f = |x: &[f64]| -> Result<f64> { Ok(-x[0] - x[1]) };
        let (m, runs) = minimize_box(&f, &[0.0, -1.0], &[2.0, 3.0], None, &SearchSettings::default()).unwrap();
        assert!((m.x[0] - 2.0).abs() < 1e-6 && (m.x[1] - 3.0).abs() < 1e-6);
        for r in runs {
            assert!(r.best[0] >= 0.0 && r.best[0] <= 2.0 && r.best[1] >= -1.0 && r.best[1] <= 3.0);
        }
    }

    #[test]
    fn tie_breaks_on_smallest_norm() {
        // flat objective: every restart ties, the smallest start wins
        let f = |_: &[f64]| -> Result<f64> { Ok(1.0) };
        let (m, runs) = minimize_box(&f, &[0.0], &[10.0], None, &SearchSettings::default()).unwrap();
        let smallest = runs.iter().map(|r| r.best[0].abs()).fold(f64::INFINITY, f64::min);
        assert_eq!(m.x[0].abs(), smallest);
    }

    #[test]
    fn all_failing_starts_are_reported() {
        let f = |_: &[f64]| -> Result<f64> { Err(Error::invalid("x", "nope")) };
        let e = minimize_box(&f, &[0.0], &[1.0], None, &SearchSettings::default()).unwrap_err();
        assert!(matches!(e, Error::OptimizationFailed { starts: 8, ref diagnostics } if diagnostics.len() == 8));
    }

    #[test]
    fn halton_points_are_in_unit_cube() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
    }
}
