//! Bath response functions `Φ_ab(t)` and their spectra.
//!
//! Fourier convention throughout: `Φ(t) = ∫ dω G(ω) e^{-iωt}`, hence
//! `G(ω) = (1/2π) ∫ dt Φ(t) e^{iωt}`.

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, cis, Real};

/// One excited level of one system (both zero based).
///
/// Dephasing scenarios address qubits only, with `level == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelIndex {
    pub system: usize,
    pub level: usize,
}

impl ChannelIndex {
    pub const fn new(system: usize, level: usize) -> Self {
        ChannelIndex { system, level }
    }

    pub const fn qubit(system: usize) -> Self {
        ChannelIndex { system, level: 0 }
    }
}

impl std::fmt::Display for ChannelIndex {
    /// One-based `(j,n)` as used in output headers.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}_{}", self.system + 1, self.level + 1)
    }
}

/// Number of excited levels per system and the flat ordering of channels
/// (system-major, level-minor).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    levels: Vec<usize>,
    offsets: Vec<usize>,
}

impl ChannelLayout {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("systems", "at least one system is required"));
        }
        if levels.iter().any(|&n| n == 0) {
            return Err(Error::invalid("systems.levels", "every system needs at least one excited level"));
        }
        let mut offsets = Vec::with_capacity(levels.len());
        let mut acc = 0;
        for &n in &levels {
            offsets.push(acc);
            acc += n;
        }
        Ok(ChannelLayout { levels, offsets })
    }

    /// `m` two-level systems.
    pub fn qubits(m: usize) -> Result<Self> {
        Self::new(vec![1; m])
    }

    pub fn systems(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, ch: ChannelIndex) -> Result<usize> {
        if ch.system >= self.levels.len() || ch.level >= self.levels[ch.system] {
            return Err(Error::IndexOutOfBounds {
                what: format!("channel ({},{}) outside layout {:?}", ch.system, ch.level, self.levels),
            });
        }
        Ok(self.offsets[ch.system] + ch.level)
    }

    pub fn channel(&self, flat: usize) -> ChannelIndex {
        let system = self.offsets.iter().rposition(|&o| o <= flat).expect("flat index in range");
        ChannelIndex::new(system, flat - self.offsets[system])
    }

    pub fn channels(&self) -> impl Iterator<Item = ChannelIndex> + '_ {
        (0..self.len()).map(|f| self.channel(f))
    }
}

/// Single multilevel system coupled through transition dipoles to a Gaussian bath:
/// `Φ_nn'(t) = c_nn' cos η_n cos η_n' exp(-t²/4t_c²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDipoleBath<T> {
    pub coupling: Vec<Vec<T>>,
    pub dipole_angles: Vec<T>,
    pub correlation_time: T,
}

impl<T: Real> GaussianDipoleBath<T> {
    pub fn new(coupling: Vec<Vec<T>>, dipole_angles: Vec<T>, correlation_time: T) -> Result<Self> {
        let n = dipole_angles.len();
        if n == 0 {
            return Err(Error::invalid("bath.dipole_angles", "need at least one level"));
        }
        if coupling.len() != n || coupling.iter().any(|row| row.len() != n) {
            return Err(Error::invalid("bath.coupling", format!("expected a {n}x{n} matrix")));
        }
        let tol = T::lit(1e-12);
        for i in 0..n {
            for k in 0..n {
                if (coupling[i][k] - coupling[k][i]).abs() > tol * (T::one() + coupling[i][k].abs()) {
                    return Err(Error::invalid("bath.coupling", "matrix must be symmetric"));
                }
            }
        }
        if !(correlation_time > T::zero()) {
            return Err(Error::invalid("bath.correlation_time", "must be positive"));
        }
        Ok(GaussianDipoleBath { coupling, dipole_angles, correlation_time })
    }

    /// Uniform coupling matrix: `diag` on the diagonal, `off` elsewhere.
    pub fn uniform(diag: T, off: T, dipole_angles: Vec<T>, correlation_time: T) -> Result<Self> {
        let n = dipole_angles.len();
        let coupling = (0..n)
            .map(|i| (0..n).map(|k| if i == k { diag } else { off }).collect())
            .collect();
        Self::new(coupling, dipole_angles, correlation_time)
    }

    fn value(&self, a: usize, b: usize, t: T) -> Complex<T> {
        let tc = self.correlation_time;
        let env = (-(t * t) / (T::lit(4.0) * tc * tc)).exp();
        c(self.coupling[a][b] * self.dipole_angles[a].cos() * self.dipole_angles[b].cos() * env)
    }
}

/// Qubits with individual Gaussian correlation times, cross-coupled by distance:
/// `Φ_jj'(t) = γ exp(-t²/4t_j²) exp(-t²/4t_j'²) / (r_0 + |r_j - r_j'|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedGaussianDecayBath<T> {
    pub coupling_strength: T,
    pub correlation_times: Vec<T>,
    pub reference_distance: T,
    pub positions: Vec<[T; 3]>,
}

impl<T: Real> CorrelatedGaussianDecayBath<T> {
    pub fn new(
        coupling_strength: T,
        correlation_times: Vec<T>,
        reference_distance: T,
        positions: Vec<[T; 3]>,
    ) -> Result<Self> {
        if coupling_strength < T::zero() {
            return Err(Error::invalid("bath.gamma", "must be non-negative"));
        }
        if correlation_times.is_empty() || correlation_times.iter().any(|t| !(*t > T::zero())) {
            return Err(Error::invalid("bath.correlation_times", "all correlation times must be positive"));
        }
        if positions.len() != correlation_times.len() {
            return Err(Error::invalid("bath.positions", "one position per system is required"));
        }
        let bath = CorrelatedGaussianDecayBath { coupling_strength, correlation_times, reference_distance, positions };
        let m = bath.positions.len();
        for j in 0..m {
            for k in 0..m {
                if !(bath.reference_distance + bath.distance(j, k) > T::zero()) {
                    return Err(Error::invalid("bath.r0", "r0 + |r_j - r_j'| must be positive"));
                }
            }
        }
        Ok(bath)
    }

    /// Positions evenly spaced on a circle of radius `r0` in the xy-plane,
    /// `r_j = r0 (cos 2πj/M, sin 2πj/M, 0)` for one-based `j`.
    pub fn ring_positions(m: usize, r0: T) -> Vec<[T; 3]> {
        (1..=m)
            .map(|j| {
                let ang = T::TAU() * T::of_usize(j) / T::of_usize(m);
                [r0 * ang.cos(), r0 * ang.sin(), T::zero()]
            })
            .collect()
    }

    pub fn distance(&self, j: usize, k: usize) -> T {
        distance(&self.positions[j], &self.positions[k])
    }

    fn value(&self, j: usize, k: usize, t: T) -> Complex<T> {
        let four = T::lit(4.0);
        let tj = self.correlation_times[j];
        let tk = self.correlation_times[k];
        let env = (-(t * t) / (four * tj * tj) - (t * t) / (four * tk * tk)).exp();
        c(self.coupling_strength * env / (self.reference_distance + self.distance(j, k)))
    }
}

/// Proper-dephasing correlations of qubits:
/// `Φ_jj'(t) = γ exp(-|t|/2t_j - |t|/2t_j' - r_jj'²)`.
///
/// With `cross_correlated == false` the off-diagonal entries vanish, which is
/// the `r_jj' → ∞` limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialDephasingBath<T> {
    pub coupling_strength: T,
    pub correlation_times: Vec<T>,
    pub positions: Vec<[T; 3]>,
    pub cross_correlated: bool,
}

impl<T: Real> ExponentialDephasingBath<T> {
    pub fn new(coupling_strength: T, correlation_times: Vec<T>, positions: Vec<[T; 3]>) -> Result<Self> {
        if coupling_strength < T::zero() {
            return Err(Error::invalid("bath.gamma", "must be non-negative"));
        }
        if correlation_times.is_empty() || correlation_times.iter().any(|t| !(*t > T::zero())) {
            return Err(Error::invalid("bath.correlation_times", "all correlation times must be positive"));
        }
        if positions.len() != correlation_times.len() {
            return Err(Error::invalid("bath.positions", "one position per qubit is required"));
        }
        Ok(ExponentialDephasingBath { coupling_strength, correlation_times, positions, cross_correlated: true })
    }

    pub fn decorrelated(mut self) -> Self {
        self.cross_correlated = false;
        self
    }

    fn value(&self, j: usize, k: usize, t: T) -> Complex<T> {
        if j != k && !self.cross_correlated {
            return Complex::zero();
        }
        let two = T::lit(2.0);
        let r = distance(&self.positions[j], &self.positions[k]);
        let at = t.abs();
        c(self.coupling_strength
            * (-at / (two * self.correlation_times[j]) - at / (two * self.correlation_times[k]) - r * r).exp())
    }
}

/// User supplied response matrices on a time grid, linearly interpolated.
///
/// Outside the grid the response is zero. Negative times not covered by the grid
/// use `Φ_ab(-t) = conj(Φ_ba(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedBath<T> {
    pub layout: ChannelLayout,
    pub grid: Vec<T>,
    /// `values[k][a][b]` at `grid[k]`, flat channel indices.
    pub values: Vec<Vec<Vec<Complex<T>>>>,
}

impl<T: Real> TabulatedBath<T> {
    pub fn new(layout: ChannelLayout, grid: Vec<T>, values: Vec<Vec<Vec<Complex<T>>>>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::invalid("bath.grid", "need at least two samples"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("bath.grid", "grid must be strictly increasing"));
        }
        let n = layout.len();
        if values.len() != grid.len() || values.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
            return Err(Error::invalid("bath.values", format!("expected {} matrices of size {n}x{n}", grid.len())));
        }
        Ok(TabulatedBath { layout, grid, values })
    }

    fn value(&self, a: usize, b: usize, t: T) -> Complex<T> {
        let first = self.grid[0];
        let last = *self.grid.last().unwrap();
        if t < first {
            if t < T::zero() && -t >= first && -t <= last {
                return self.value(b, a, -t).conj();
            }
            return Complex::zero();
        }
        if t > last {
            return Complex::zero();
        }
        let k = match self.grid.binary_search_by(|g| g.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.values[k][a][b],
            Err(k) => k,
        };
        let (t0, t1) = (self.grid[k - 1], self.grid[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1][a][b] * (T::one() - w) + self.values[k][a][b] * w
    }

    fn peak_and_tail(&self) -> (T, T) {
        let mut peak = T::zero();
        for m in &self.values {
            for row in m {
                for z in row {
                    peak = peak.max(z.norm());
                }
            }
        }
        let tail = self.values.last().unwrap().iter().flatten().map(|z| z.norm()).fold(T::zero(), T::max);
        (peak, tail)
    }
}

fn distance<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Any supported bath response model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BathModel<T> {
    GaussianDipole(GaussianDipoleBath<T>),
    CorrelatedGaussian(CorrelatedGaussianDecayBath<T>),
    ExponentialDephasing(ExponentialDephasingBath<T>),
    Tabulated(TabulatedBath<T>),
}

/// How far back in time the engines integrate the memory kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MemoryWindow<T> {
    /// Model dependent: `8 t_c` for Gaussian kernels, the `1e-10` tail point for
    /// exponential kernels, the table extent for tabulated ones.
    Auto,
    Full,
    Fixed(T),
}

impl<T: Real> BathModel<T> {
    pub fn layout(&self) -> ChannelLayout {
        match self {
            BathModel::GaussianDipole(b) => ChannelLayout::new(vec![b.dipole_angles.len()]).unwrap(),
            BathModel::CorrelatedGaussian(b) => ChannelLayout::qubits(b.correlation_times.len()).unwrap(),
            BathModel::ExponentialDephasing(b) => ChannelLayout::qubits(b.correlation_times.len()).unwrap(),
            BathModel::Tabulated(b) => b.layout.clone(),
        }
    }

    /// `Φ_ab(t)` with bounds checking.
    pub fn eval_response(&self, a: ChannelIndex, b: ChannelIndex, t: T) -> Result<Complex<T>> {
        let layout = self.layout();
        let fa = layout.flat(a)?;
        let fb = layout.flat(b)?;
        Ok(self.response_flat(fa, fb, t))
    }

    /// `Φ_ab(t)` addressed by flat channel indices (unchecked beyond slice bounds).
    #[inline]
    pub fn response_flat(&self, a: usize, b: usize, t: T) -> Complex<T> {
        match self {
            BathModel::GaussianDipole(m) => m.value(a, b, t),
            BathModel::CorrelatedGaussian(m) => m.value(a, b, t),
            BathModel::ExponentialDephasing(m) => m.value(a, b, t),
            BathModel::Tabulated(m) => m.value(a, b, t),
        }
    }

    pub fn max_correlation_time(&self) -> T {
        match self {
            BathModel::GaussianDipole(m) => m.correlation_time,
            BathModel::CorrelatedGaussian(m) => m.correlation_times.iter().copied().fold(T::zero(), T::max),
            BathModel::ExponentialDephasing(m) => m.correlation_times.iter().copied().fold(T::zero(), T::max),
            BathModel::Tabulated(m) => *m.grid.last().unwrap() - m.grid[0],
        }
    }

    /// Shortest time scale on which the response varies.
    pub fn min_correlation_time(&self) -> T {
        match self {
            BathModel::GaussianDipole(m) => m.correlation_time,
            BathModel::CorrelatedGaussian(m) => m.correlation_times.iter().copied().fold(T::infinity(), T::min),
            BathModel::ExponentialDephasing(m) => m.correlation_times.iter().copied().fold(T::infinity(), T::min),
            BathModel::Tabulated(m) => {
                m.grid.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), T::min) * T::lit(20.0)
            }
        }
    }

    /// Lag beyond which the kernel is treated as zero.
    pub fn memory_time(&self, window: MemoryWindow<T>) -> T {
        match window {
            MemoryWindow::Full => T::infinity(),
            MemoryWindow::Fixed(t) => t,
            MemoryWindow::Auto => match self {
                BathModel::GaussianDipole(_) | BathModel::CorrelatedGaussian(_) => {
                    T::lit(8.0) * self.max_correlation_time()
                }
                // exp(-t/t_c) < 1e-10 for t > 10 ln(10) t_c
                BathModel::ExponentialDephasing(_) => T::lit(10.0 * std::f64::consts::LN_10) * self.max_correlation_time(),
                BathModel::Tabulated(m) => m.grid.last().unwrap().abs().max(m.grid[0].abs()),
            },
        }
    }

    /// `Φ_ab(0)` in closed form, independent of the evaluation path.
    pub fn zero_lag(&self, a: usize, b: usize) -> Complex<T> {
        match self {
            BathModel::GaussianDipole(m) => {
                c(m.coupling[a][b] * m.dipole_angles[a].cos() * m.dipole_angles[b].cos())
            }
            BathModel::CorrelatedGaussian(m) => {
                c(m.coupling_strength / (m.reference_distance + m.distance(a, b)))
            }
            BathModel::ExponentialDephasing(m) => {
                if a != b && !m.cross_correlated {
                    Complex::zero()
                } else {
                    let r = distance(&m.positions[a], &m.positions[b]);
                    c(m.coupling_strength * (-(r * r)).exp())
                }
            }
            BathModel::Tabulated(m) => m.value(a, b, T::zero()),
        }
    }

    /// `G_ab(ω) = (1/2π) ∫ Φ_ab(t) e^{iωt} dt` by the trapezoid rule over
    /// `[-12 t_max, 12 t_max]` with step `t_min / 50`.
    pub fn spectral_density(&self, a: ChannelIndex, b: ChannelIndex, omega: T) -> Result<Complex<T>> {
        let layout = self.layout();
        let fa = layout.flat(a)?;
        let fb = layout.flat(b)?;
        let (half_span, step) = match self {
            BathModel::Tabulated(m) => {
                let (peak, tail) = m.peak_and_tail();
                let ratio = if peak > T::zero() { tail / peak } else { T::zero() };
                if ratio > T::lit(1e-3) {
                    return Err(Error::NonDecayingResponse { ratio: ratio.to_f64_lossy() });
                }
                let span = m.grid.last().unwrap().abs().max(m.grid[0].abs());
                let h = m.grid.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), T::min);
                (span, h / T::lit(4.0))
            }
            _ => (T::lit(12.0) * self.max_correlation_time(), self.min_correlation_time() / T::lit(50.0)),
        };
        let n = num_traits::ToPrimitive::to_usize(&(half_span / step).ceil()).unwrap_or(1).max(1);
        let h = half_span / T::of_usize(n);
        let mut acc = Complex::zero();
        for k in 0..=(2 * n) {
            let t = -half_span + h * T::of_usize(k);
            let w = if k == 0 || k == 2 * n { T::lit(0.5) } else { T::one() };
            acc += self.response_flat(fa, fb, t) * cis(omega * t) * w;
        }
        Ok(acc * (h / T::TAU()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dipole() -> BathModel<f64> {
        BathModel::GaussianDipole(
            GaussianDipoleBath::uniform(1.0, 0.5, vec![0.246 * PI, 0.0, 0.326 * PI, 0.370 * PI], 1.0).unwrap(),
        )
    }

    #[test]
    fn gaussian_dipole_values() {
        let bath = dipole();
        let ch = ChannelIndex::new(0, 1);
        assert_eq!(bath.eval_response(ch, ch, 0.0).unwrap().re, 1.0);
        let v = bath.eval_response(ch, ch, 2.0).unwrap().re;
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn correlated_gaussian_zero_lag_is_gamma_over_r0() {
        let pos = CorrelatedGaussianDecayBath::ring_positions(3, 1.0);
        let bath = BathModel::CorrelatedGaussian(
            CorrelatedGaussianDecayBath::new(0.05, vec![0.75, 0.81, 1.0], 1.0, pos).unwrap(),
        );
        for j in 0..3 {
            let ch = ChannelIndex::qubit(j);
            assert!((bath.eval_response(ch, ch, 0.0_f64).unwrap().re - 0.05).abs() < 1e-16);
        }
    }

    #[test]
    fn exponential_dephasing_value() {
        let bath = BathModel::ExponentialDephasing(
            ExponentialDephasingBath::new(0.01, vec![1.0, 1.0], vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap(),
        );
        let q = ChannelIndex::qubit(0);
        let v = bath.eval_response(q, q, 2.0).unwrap().re;
        assert!((v - 0.01 * (-2.0f64).exp()).abs() < 1e-17);
        let cross = bath.eval_response(q, ChannelIndex::qubit(1), 0.0).unwrap().re;
        assert!((cross - 0.01 * (-1.0f64).exp()).abs() < 1e-17);
    }

    #[test]
    fn out_of_range_channel_is_an_error() {
        let bath = dipole();
        let err = bath.eval_response(ChannelIndex::new(0, 4), ChannelIndex::new(0, 0), 0.0);
        assert!(matches!(err, Err(Error::IndexOutOfBounds { .. })));
        let err = bath.eval_response(ChannelIndex::new(1, 0), ChannelIndex::new(0, 0), 0.0);
        assert!(err.is_err());
    }

    #[test]
    fn invalid_constructors_are_rejected() {
        assert!(GaussianDipoleBath::new(vec![vec![1.0, 0.2], vec![0.3, 1.0]], vec![0.0, 0.0], 1.0).is_err());
        assert!(GaussianDipoleBath::uniform(1.0, 0.5, vec![0.0], -1.0).is_err());
        assert!(ExponentialDephasingBath::new(-0.1, vec![1.0], vec![[0.0; 3]]).is_err());
        assert!(CorrelatedGaussianDecayBath::new(0.05, vec![1.0, 1.0], 0.0, vec![[0.0; 3], [0.0; 3]]).is_err());
    }

    #[test]
    fn zero_lag_matches_evaluation_for_all_models() {
        let pos = CorrelatedGaussianDecayBath::ring_positions(3, 1.0);
        let models = vec![
            dipole(),
            BathModel::CorrelatedGaussian(CorrelatedGaussianDecayBath::new(0.05, vec![0.75, 0.81, 1.0], 1.0, pos).unwrap()),
            BathModel::ExponentialDephasing(
                ExponentialDephasingBath::new(0.01, vec![1.0, 0.5], vec![[0.0; 3], [0.3, 0.4, 0.0]]).unwrap(),
            ),
        ];
        for m in &models {
            let n = m.layout().len();
            for a in 0..n {
                for b in 0..n {
                    assert!((m.response_flat(a, b, 0.0) - m.zero_lag(a, b)).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn tabulated_reproduces_grid_points_and_cuts_off() {
        let layout = ChannelLayout::qubits(1).unwrap();
        let grid = vec![0.0, 0.5, 1.0, 2.0];
        let vals: Vec<Vec<Vec<Complex<f64>>>> =
            grid.iter().map(|t: &f64| vec![vec![Complex::new((-t).exp(), 0.1 * t)]]).collect();
        let bath = TabulatedBath::new(layout, grid.clone(), vals.clone()).unwrap();
        for (k, t) in grid.iter().enumerate() {
            assert_eq!(bath.value(0, 0, *t), vals[k][0][0]);
        }
        assert_eq!(bath.value(0, 0, 2.5), Complex::zero());
        assert_eq!(bath.value(0, 0, -0.5), vals[1][0][0].conj());
        let mid = bath.value(0, 0, 0.25);
        assert!((mid - (vals[0][0][0] + vals[1][0][0]) * 0.5).norm() < 1e-15);
    }

    #[test]
    fn tabulated_grid_must_increase() {
        let layout = ChannelLayout::qubits(1).unwrap();
        let vals = vec![vec![vec![Complex::new(1.0, 0.0)]]; 3];
        assert!(TabulatedBath::new(layout, vec![0.0, 1.0, 1.0], vals).is_err());
    }

    #[test]
    fn non_decaying_table_refuses_spectrum() {
        let layout = ChannelLayout::qubits(1).unwrap();
        let grid: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let vals = vec![vec![vec![Complex::new(1.0, 0.0)]]; 11];
        let bath = BathModel::Tabulated(TabulatedBath::new(layout, grid, vals).unwrap());
        let q = ChannelIndex::qubit(0);
        assert!(matches!(bath.spectral_density(q, q, 0.0), Err(Error::NonDecayingResponse { .. })));
    }

    #[test]
    fn layout_round_trip() {
        let layout = ChannelLayout::new(vec![2, 1, 3]).unwrap();
        for (f, ch) in layout.channels().enumerate() {
            assert_eq!(layout.flat(ch).unwrap(), f);
        }
        assert_eq!(layout.channel(3), ChannelIndex::new(2, 0));
    }
}
