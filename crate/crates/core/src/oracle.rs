//! Reference solutions the perturbative engines are checked against.
//!
//! None of these routines reuse the engines' `W`/`J` machinery: the exact decay
//! solver integrates the full-memory equation from the kernel definition, and
//! the Monte Carlo dephasing path evolves sampled noise realizations exactly.

use ndarray::Array2;
use num_complex::Complex;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{FftNum, FftPlanner};
use serde::Serialize;

use crate::bath::BathModel;
use crate::decay::{DecayScenario, PhaseConvention};
use crate::dephasing::DephasingScenario;
use crate::error::{Error, Result};
use crate::linalg::{solve, symmetric_eigen, CMatrix, CVector};
use crate::modulation::Side;
use crate::scalar::{cis, Real};

/// Name of the generator recorded in output metadata.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.3), stream = realization pair index";

/// Amplitudes from the exact (non-Markovian) decay equation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDecaySolution<T> {
    pub times: Vec<T>,
    pub amplitudes: Vec<CVector<T>>,
}

fn kernel<T: Real>(s: &DecayScenario<T>, a: usize, b: usize, t: T, t_side: Side, tp: T, tp_side: Side) -> Complex<T> {
    let (wa, wb) = (s.energies[a], s.energies[b]);
    let freq = match s.phase_convention {
        PhaseConvention::Printed => wa * t - wb * tp,
        PhaseConvention::Rotating => wa * tp - wb * t,
    };
    s.bath.response_flat(a, b, t - tp)
        * s.modulation.channel(a).epsilon(t, t_side).conj()
        * s.modulation.channel(b).epsilon(tp, tp_side)
        * cis(freq)
}

/// Solves `dα̃/dt = -∫_0^t Φ(t-t') K(t,t') e^{...} α̃(t') dt'` with full memory.
///
/// The history integral uses the trapezoid rule with one-sided modulation values
/// at pulse instants; each step is an implicit trapezoid step whose linear system
/// is solved exactly.
pub fn exact_decay_solve<T: Real>(scenario: &DecayScenario<T>) -> Result<ExactDecaySolution<T>> {
    scenario.validate()?;
    let nodes = scenario.nodes();
    let n = scenario.channels();
    let half = T::lit(0.5);
    let mut alphas: Vec<CVector<T>> = vec![CVector::from(scenario.initial.clone())];

    // F(t_k, side) = -Σ_m w_m M(t_k, t_m) α_m over the history up to t_k
    let history = |k: usize, side: Side, alphas: &[CVector<T>], include_last: bool| -> CVector<T> {
        let t = nodes[k];
        let mut f = CVector::<T>::zeros(n);
        for m in 0..k {
            let h = nodes[m + 1] - nodes[m];
            let (l, r) = (nodes[m], nodes[m + 1]);
            for a in 0..n {
                let mut acc = Complex::zero();
                for b in 0..n {
                    let left = kernel(scenario, a, b, t, side, l, Side::After) * alphas[m][b];
                    let right = if m + 1 < k || include_last {
                        kernel(scenario, a, b, t, side, r, Side::Before) * alphas[m + 1][b]
                    } else {
                        Complex::zero()
                    };
                    acc += (left + right) * (h * half);
                }
                f[a] -= acc;
            }
        }
        f
    };

    for k in 0..nodes.len() - 1 {
        let h = nodes[k + 1] - nodes[k];
        let f0 = history(k, Side::After, &alphas, true);
        // split F(t_{k+1}^-) into the part known now and the term linear in α_{k+1}
        let partial = history(k + 1, Side::Before, &alphas, false);
        let hk = h * half;
        let t1 = nodes[k + 1];
        let mut lhs = CMatrix::<T>::eye(n);
        for a in 0..n {
            for b in 0..n {
                let m = kernel(scenario, a, b, t1, Side::Before, t1, Side::Before);
                lhs[[a, b]] += m * (hk * hk);
            }
        }
        let rhs = &alphas[k] + &((&f0 + &partial).mapv(|z| z * hk));
        let next = solve(&lhs, &rhs).ok_or_else(|| Error::invalid("grid.dt", "singular implicit step in the exact solver"))?;
        alphas.push(next);
    }
    Ok(ExactDecaySolution { times: nodes, amplitudes: alphas })
}

/// One sampled noise history per qubit on a uniform grid `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization<T> {
    pub seed: u64,
    pub index: usize,
    pub dt: T,
    /// `values[j][k] = δ_j(t_k)`.
    pub values: Vec<Vec<T>>,
}

/// Spectral factors of the embedded covariance, reusable across realizations.
#[derive(Debug, Clone)]
pub struct CirculantSampler<T> {
    m: usize,
    points: usize,
    size: usize,
    dt: T,
    /// Per frequency, `V √(Λ/N)` (row-major `m×m`).
    factors: Vec<Array2<T>>,
}

impl<T: Real + FftNum> CirculantSampler<T> {
    /// Embeds the covariance of `points` samples spaced by `dt` in a circulant of
    /// period at least `4 (points - 1) dt`.
    pub fn new(bath: &BathModel<T>, dt: T, points: usize) -> Result<Self> {
        let m = bath.layout().len();
        if points < 2 {
            return Err(Error::invalid("oracle.grid", "need at least two time points"));
        }
        let size = (4 * (points - 1)).next_power_of_two().max(8);
        let mut planner = FftPlanner::<T>::new();
        let fft = planner.plan_fft_forward(size);
        // spectra[j][j'][f]
        let mut spectra = vec![vec![Vec::new(); m]; m];
        for j in 0..m {
            for jp in 0..m {
                let mut row: Vec<Complex<T>> = (0..size)
                    .map(|k| {
                        let lag = if k <= size / 2 { T::of_usize(k) * dt } else { -(T::of_usize(size - k) * dt) };
                        bath.response_flat(j, jp, lag)
                    })
                    .collect();
                fft.process(&mut row);
                spectra[j][jp] = row;
            }
        }
        let nf = T::of_usize(size);
        let mut factors = Vec::with_capacity(size);
        let mut worst = T::zero();
        let mut scale = T::zero();
        for f in 0..size {
            let s = Array2::from_shape_fn((m, m), |(a, b)| (spectra[a][b][f].re + spectra[b][a][f].re) * T::lit(0.5));
            let (vals, vecs) = symmetric_eigen(&s);
            for &v in vals.iter() {
                worst = worst.min(v);
                scale = scale.max(v.abs());
            }
            let fac = Array2::from_shape_fn((m, m), |(a, b)| vecs[[a, b]] * (vals[b].max(T::zero()) / nf).sqrt());
            factors.push(fac);
        }
        if worst < -(T::lit(1e-8) * scale.max(T::min_positive_value())) {
            return Err(Error::IndefiniteCovariance { min_eigenvalue: worst.to_f64_lossy() });
        }
        Ok(CirculantSampler { m, points, size, dt, factors })
    }

    /// Realizations `2p` and `2p + 1` from the real and imaginary parts of one
    /// FFT draw on stream `p`.
    pub fn pair(&self, seed: u64, p: usize) -> [NoiseRealization<T>; 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64);
        let mut planner = FftPlanner::<T>::new();
        let ifft = planner.plan_fft_inverse(self.size);
        let mut lanes: Vec<Vec<Complex<T>>> = vec![vec![Complex::zero(); self.size]; self.m];
        for f in 0..self.size {
            let z: Vec<Complex<T>> = (0..self.m)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex::new(T::lit(re), T::lit(im))
                })
                .collect();
            let fac = &self.factors[f];
            for j in 0..self.m {
                let mut acc = Complex::zero();
                for (b, zb) in z.iter().enumerate() {
                    acc += *zb * fac[[j, b]];
                }
                lanes[j][f] = acc;
            }
        }
        for lane in lanes.iter_mut() {
            ifft.process(lane);
        }
        let take = |re: bool| -> Vec<Vec<T>> {
            lanes.iter().map(|l| l[..self.points].iter().map(|z| if re { z.re } else { z.im }).collect()).collect()
        };
        [
            NoiseRealization { seed, index: 2 * p, dt: self.dt, values: take(true) },
            NoiseRealization { seed, index: 2 * p + 1, dt: self.dt, values: take(false) },
        ]
    }
}

/// `count` jointly Gaussian realizations with covariance `Φ_jj'(Δt)`.
pub fn sample_gaussian_process<T: Real + FftNum>(
    bath: &BathModel<T>,
    dt: T,
    points: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<NoiseRealization<T>>> {
    let sampler = CirculantSampler::new(bath, dt, points)?;
    let pairs: Vec<[NoiseRealization<T>; 2]> = (0..count.div_ceil(2)).into_par_iter().map(|p| sampler.pair(seed, p)).collect();
    Ok(pairs.into_iter().flatten().take(count).collect())
}

/// Monte Carlo fidelity estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McFidelity<T> {
    pub times: Vec<T>,
    pub mean: Vec<T>,
    pub stderr: Vec<T>,
    pub count: usize,
    pub seed: u64,
}

impl<T: Real> McFidelity<T> {
    pub fn index_at(&self, t: T) -> usize {
        let mut best = 0;
        for (i, s) in self.times.iter().enumerate() {
            if (*s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

fn apply_qubit<T: Real>(psi: &mut [Complex<T>], m: usize, j: usize, u: &[[Complex<T>; 2]; 2]) {
    let shift = m - 1 - j;
    let bit = 1usize << shift;
    for i in 0..psi.len() {
        if i & bit == 0 {
            let (a, b) = (psi[i], psi[i | bit]);
            psi[i] = u[0][0] * a + u[0][1] * b;
            psi[i | bit] = u[1][0] * a + u[1][1] * b;
        }
    }
}

/// `exp(-i (c I + x σx + z σz))` in the (↑, ↓) basis.
fn su2<T: Real>(c: T, x: T, z: T) -> [[Complex<T>; 2]; 2] {
    let r = (x * x + z * z).sqrt();
    let g = cis(-c);
    let (cs, sn) = (r.cos(), r.sin());
    let (nx, nz) = if r > T::zero() { (x / r, z / r) } else { (T::zero(), T::zero()) };
    let i = Complex::new(T::zero(), T::one());
    let cs = Complex::new(cs, T::zero());
    [
        [g * (cs - i * sn * nz), g * (-i * sn * nx)],
        [g * (-i * sn * nx), g * (cs + i * sn * nz)],
    ]
}

/// Fidelity `|⟨ψ0|ψ(t)⟩|²` averaged over noise realizations, where each
/// realization is evolved exactly under
/// `β̇_± = ∓iV⁰β_± - i(δ/2)(β_+ + β_-)` per qubit (pulses act as phase kicks
/// `diag(e^{-iθ/2}, e^{iθ/2})`).
pub fn mc_dephasing_fidelity<T: Real + FftNum>(
    scenario: &DephasingScenario<T>,
    initial: &CVector<T>,
    count: usize,
    seed: u64,
) -> Result<McFidelity<T>> {
    scenario.validate()?;
    let m = scenario.qubits();
    if initial.len() != 1 << m {
        return Err(Error::invalid("initial", format!("state vector must have {} entries", 1 << m)));
    }
    if count < 2 {
        return Err(Error::invalid("oracle.realizations", "need at least two realizations"));
    }
    let dt = scenario.grid.dt;
    let steps = num_traits::ToPrimitive::to_usize(&(scenario.grid.t_end / dt).round()).unwrap_or(0).max(1);
    let points = steps + 1;
    let sampler = CirculantSampler::new(&scenario.bath, dt, points)?;
    let times: Vec<T> = (0..points).map(|k| T::of_usize(k) * dt).collect();
    let half = T::lit(0.5);

    let run = |noise: &NoiseRealization<T>| -> Vec<T> {
        let mut psi: Vec<Complex<T>> = initial.to_vec();
        let mut out = Vec::with_capacity(points);
        out.push(overlap(initial, &psi));
        for k in 0..steps {
            let (t0, t1) = (times[k], times[k + 1]);
            for j in 0..m {
                let ch = scenario.modulation.channel(j);
                let mut cuts = vec![t0];
                cuts.extend(ch.breakpoints(t0, t1));
                cuts.push(t1);
                let (d0, d1) = (noise.values[j][k], noise.values[j][k + 1]);
                let lerp = |t: T| d0 + (d1 - d0) * ((t - t0) / dt);
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if b <= a {
                        continue;
                    }
                    let h = b - a;
                    let delta = (lerp(a) + lerp(b)) * half;
                    let v0 = ch.drive.as_ref().map_or(T::zero(), |d| d.amplitude((a + b) * half));
                    let c = delta * half * h;
                    let u = su2(c, c, v0 * h);
                    apply_qubit(&mut psi, m, j, &u);
                    // phase kick at a pulse instant closing this piece
                    let kicks = ch.pulse_count(b, Side::After) - ch.pulse_count(b, Side::Before);
                    if kicks != 0 {
                        let th = ch.pulses.map_or(T::zero(), |p| p.phase_step) * T::from_i64(kicks).unwrap();
                        let z = Complex::zero();
                        apply_qubit(&mut psi, m, j, &[[cis(-th * half), z], [z, cis(th * half)]]);
                    }
                }
            }
            out.push(overlap(initial, &psi));
        }
        out
    };

    let per: Vec<Vec<T>> = (0..count.div_ceil(2))
        .into_par_iter()
        .flat_map_iter(|p| {
            let pair = sampler.pair(seed, p);
            pair.into_iter().map(|n| run(&n)).collect::<Vec<_>>()
        })
        .collect();
    let per = &per[..count];
    let nf = T::of_usize(count);
    let mut mean = vec![T::zero(); points];
    let mut sq = vec![T::zero(); points];
    for series in per {
        for (i, f) in series.iter().enumerate() {
            mean[i] += *f;
        }
    }
    for v in mean.iter_mut() {
        *v /= nf;
    }
    for series in per {
        for (i, f) in series.iter().enumerate() {
            let d = *f - mean[i];
            sq[i] += d * d;
        }
    }
    let stderr = sq.iter().map(|s| (*s / (nf - T::one()) / nf).sqrt()).collect();
    Ok(McFidelity { times, mean, stderr, count, seed })
}

fn overlap<T: Real>(a: &CVector<T>, b: &[Complex<T>]) -> T {
    a.iter().zip(b).fold(Complex::zero(), |s, (x, y)| s + x.conj() * *y).norm_sqr()
}

/// How a comparison tolerance is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKind {
    Absolute,
    Relative,
    StandardErrors,
}

/// One engine-vs-oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub time: f64,
    pub engine: f64,
    pub oracle: f64,
    /// Standard error of the oracle value (Monte Carlo comparisons only).
    pub oracle_stderr: Option<f64>,
    pub tolerance: f64,
    pub tolerance_kind: ToleranceKind,
    pub pass: bool,
    pub realizations: Option<usize>,
    pub step: f64,
}

impl OracleReport {
    #[allow(clippy::too_many_arguments)]
    pub fn compare(
        quantity: impl Into<String>,
        time: f64,
        engine: f64,
        oracle: f64,
        oracle_stderr: Option<f64>,
        tolerance: f64,
        tolerance_kind: ToleranceKind,
        realizations: Option<usize>,
        step: f64,
    ) -> Self {
        let diff = (engine - oracle).abs();
        let pass = match tolerance_kind {
            ToleranceKind::Absolute => diff <= tolerance,
            ToleranceKind::Relative => diff <= tolerance * oracle.abs(),
            ToleranceKind::StandardErrors => diff <= tolerance * oracle_stderr.unwrap_or(0.0),
        };
        OracleReport {
            quantity: quantity.into(),
            time,
            engine,
            oracle,
            oracle_stderr,
            tolerance,
            tolerance_kind,
            pass,
            realizations,
            step,
        }
    }
}
