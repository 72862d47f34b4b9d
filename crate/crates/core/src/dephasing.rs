//! Proper dephasing of M qubits in the binary (↑/↓) basis, to second order in
//! the noise.
//!
//! Everything is assembled from the signed double integrals
//!
//! ```text
//! I^{σσ'}_{jj'}(t) = ∫_0^t dt' ∫_0^{t'} dt'' Φ_jj'(t'-t'') e^{iσφ_j(t')} e^{iσ'φ_j'(t'')}
//! ```
//!
//! with `σ, σ' = ±`. The basis-state kernel `ε*_j(t') ε_j'(t'')` is `I^{-+}`.

use ndarray::Array2;
use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bath::{BathModel, MemoryWindow};
use crate::decay::TimeGrid;
use crate::error::{Error, Result};
use crate::linalg::{adjoint, trace, CMatrix, CVector};
use crate::modulation::{ModulationSchedule, Side};
use crate::quadrature::{simpson, GaussLegendre};
use crate::scalar::{cis, Real};

/// Which element of a single-qubit flip carries `e^{+iφ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipSign {
    /// `s = +1` for a flip `↓ → ↑` (bit 1 → 0): the ↑-row, ↓-column element is `e^{+iφ}`.
    #[default]
    Prose,
    /// `s = b^l - b^{l'}` taken literally, which is the opposite assignment.
    Formula,
}

/// Basis state `l` (one based) of `m` qubits. Bit `b_1` is the most significant
/// bit of `l - 1`; 0 means ↑ and 1 means ↓.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryBasisIndex {
    pub l: usize,
    pub m: usize,
}

impl BinaryBasisIndex {
    pub fn new(m: usize, l: usize) -> Result<Self> {
        if m == 0 || m > 16 {
            return Err(Error::invalid("qubits", "between 1 and 16 qubits are supported"));
        }
        if l == 0 || l > (1 << m) {
            return Err(Error::IndexOutOfBounds { what: format!("basis index {l} for {m} qubits") });
        }
        Ok(BinaryBasisIndex { l, m })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut v = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::invalid("bits", "bits are 0 or 1"));
            }
            v = (v << 1) | b as usize;
        }
        BinaryBasisIndex::new(bits.len(), v + 1)
    }

    /// `b_j` for zero-based qubit `j`.
    pub fn bit(&self, j: usize) -> u8 {
        (((self.l - 1) >> (self.m - 1 - j)) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.m).map(|j| self.bit(j)).collect()
    }

    /// Zero-based position in state vectors.
    pub fn offset(&self) -> usize {
        self.l - 1
    }
}

/// Number of qubit flips between two basis states.
pub fn binary_distance(a: BinaryBasisIndex, b: BinaryBasisIndex) -> u32 {
    ((a.l - 1) ^ (b.l - 1)).count_ones()
}

/// For a single flip from `from` to `to`: the flipped qubit (zero based) and the
/// sign of the modulation phase on the element `W_{to, from}`.
pub fn flip_target(to: BinaryBasisIndex, from: BinaryBasisIndex, convention: FlipSign) -> Result<(usize, i8)> {
    let d = binary_distance(to, from);
    if d != 1 || to.m != from.m {
        return Err(Error::NotSingleFlip { distance: d });
    }
    let j = (0..to.m).find(|&j| to.bit(j) != from.bit(j)).unwrap();
    let literal = to.bit(j) as i8 - from.bit(j) as i8;
    let s = match convention {
        FlipSign::Formula => literal,
        FlipSign::Prose => -literal,
    };
    Ok((j, s))
}

/// A proper-dephasing problem for M qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingScenario<T> {
    pub bath: BathModel<T>,
    /// One channel per qubit; `φ_j` is the pulse phase plus the drive phase.
    pub modulation: ModulationSchedule<T>,
    pub grid: TimeGrid<T>,
    pub memory: MemoryWindow<T>,
    pub flip_sign: FlipSign,
}

impl<T: Real> DephasingScenario<T> {
    pub fn new(bath: BathModel<T>, modulation: ModulationSchedule<T>, t_end: T) -> Result<Self> {
        let dt = TimeGrid::default_step(&bath, &modulation);
        let s = DephasingScenario {
            bath,
            modulation,
            grid: TimeGrid::new(t_end, dt)?,
            memory: MemoryWindow::Auto,
            flip_sign: FlipSign::Prose,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn qubits(&self) -> usize {
        self.bath.layout().len()
    }

    pub fn validate(&self) -> Result<()> {
        let layout = self.bath.layout();
        if layout.levels().iter().any(|&n| n != 1) {
            return Err(Error::invalid("bath", "dephasing scenarios use qubits (one level per system)"));
        }
        let m = layout.len();
        if m > 10 {
            return Err(Error::invalid("systems", "at most 10 qubits are supported for dephasing"));
        }
        if self.modulation.len() != m {
            return Err(Error::invalid("modulation", format!("expected {m} channel entries, got {}", self.modulation.len())));
        }
        if self.modulation.channels().iter().any(|c| !c.stark.is_zero()) {
            return Err(Error::invalid("modulation.stark", "Stark shifts are not part of the dephasing model"));
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
        Ok(())
    }

    pub fn nodes(&self) -> Vec<T> {
        self.grid.nodes(&self.modulation.breakpoints(T::zero(), self.grid.t_end))
    }

    /// `φ_j(t)`.
    pub fn phase(&self, j: usize, t: T, side: Side) -> T {
        self.modulation.channel(j).drive_phase(t, side)
    }
}

const SIGNS: [i8; 2] = [1, -1];

fn sign_slot(s: i8) -> usize {
    if s > 0 {
        0
    } else {
        1
    }
}

/// Cumulative `I^{σσ'}_{jj'}(t_k)` on the scenario nodes.
#[derive(Debug, Clone)]
pub struct DephasingIntegrals<T> {
    pub times: Vec<T>,
    m: usize,
    values: Vec<Vec<Complex<T>>>,
}

impl<T: Real> DephasingIntegrals<T> {
    pub fn compute(scenario: &DephasingScenario<T>) -> Result<Self> {
        scenario.validate()?;
        let m = scenario.qubits();
        let nodes = scenario.nodes();
        let gl = GaussLegendre::<T>::new(8);
        let panel = scenario.bath.min_correlation_time() / T::lit(2.0);
        let mem = scenario.bath.memory_time(scenario.memory);
        let half = T::lit(0.5);
        let width = m * m * 4;

        // inner[j*m + j'][σ'] at time t
        let inner_at = |t: T| -> Vec<[Complex<T>; 2]> {
            let lo = if mem.is_finite() { (t - mem).max(T::zero()) } else { T::zero() };
            let mut out = vec![[Complex::zero(); 2]; m * m];
            if t <= lo {
                return out;
            }
            for jp in 0..m {
                let ch = scenario.modulation.channel(jp);
                let mut cuts = vec![lo];
                cuts.extend(ch.breakpoints(lo, t));
                cuts.push(t);
                for j in 0..m {
                    let mut acc = [Complex::zero(); 2];
                    for seg in cuts.windows(2) {
                        let (u, v) = (seg[0], seg[1]);
                        if v <= u {
                            continue;
                        }
                        let jump = ch.pulse_phase((u + v) * half, Side::After);
                        for (slot, &s) in SIGNS.iter().enumerate() {
                            let sg = T::from_i8(s).unwrap();
                            let val = gl.integrate_composite(u, v, panel, |tp| {
                                let drive = ch.drive.as_ref().map_or(T::zero(), |d| d.phase(tp));
                                scenario.bath.response_flat(j, jp, t - tp) * cis(sg * (jump + drive))
                            });
                            acc[slot] += val;
                        }
                    }
                    out[j * m + jp] = acc;
                }
            }
            out
        };
        let w_at = |t: T, side: Side, inner: &[[Complex<T>; 2]]| -> Vec<Complex<T>> {
            let mut w = vec![Complex::zero(); width];
            for j in 0..m {
                let phi = scenario.phase(j, t, side);
                for jp in 0..m {
                    for (a, &s) in SIGNS.iter().enumerate() {
                        let outer = cis(T::from_i8(s).unwrap() * phi);
                        for b in 0..2 {
                            w[((j * m + jp) * 2 + a) * 2 + b] = outer * inner[j * m + jp][b];
                        }
                    }
                }
            }
            w
        };

        let mut values = Vec::with_capacity(nodes.len());
        let mut acc = vec![Complex::zero(); width];
        values.push(acc.clone());
        let mut inner_left = inner_at(nodes[0]);
        for k in 0..nodes.len() - 1 {
            let (t0, t1) = (nodes[k], nodes[k + 1]);
            let tm = (t0 + t1) * half;
            let inner_mid = inner_at(tm);
            let inner_right = inner_at(t1);
            let w0 = w_at(t0, Side::After, &inner_left);
            let wm = w_at(tm, Side::After, &inner_mid);
            let w1 = w_at(t1, Side::Before, &inner_right);
            for i in 0..width {
                acc[i] += simpson(t1 - t0, w0[i], wm[i], w1[i]);
            }
            values.push(acc.clone());
            inner_left = inner_right;
        }
        Ok(DephasingIntegrals { times: nodes, m, values })
    }

    pub fn qubits(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

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

    /// `I^{σσ'}_{jj'}(t_k)` with `σ, σ' ∈ {+1, -1}`.
    pub fn signed(&self, k: usize, j: usize, jp: usize, sigma: i8, sigma_p: i8) -> Complex<T> {
        self.values[k][((j * self.m + jp) * 2 + sign_slot(sigma)) * 2 + sign_slot(sigma_p)]
    }

    /// `J^P_{jj'}(t_k)` with the basis-state kernel `ε*_j(t') ε_j'(t'')`.
    pub fn jp(&self, k: usize, j: usize, jp: usize) -> Complex<T> {
        self.signed(k, j, jp, -1, 1)
    }

    /// `J^P_{jj',l}(t_k)` with the Bell-state kernels (`l` one based).
    pub fn jp_bell(&self, k: usize, j: usize, jp: usize, l: usize) -> Result<Complex<T>> {
        if j == jp {
            return Ok(self.jp(k, j, jp));
        }
        Ok(match l {
            1 => -self.signed(k, j, jp, -1, -1),
            2 => -self.signed(k, j, jp, 1, -1),
            3 => self.signed(k, j, jp, -1, -1),
            4 => self.signed(k, j, jp, 1, -1),
            _ => return Err(Error::IndexOutOfBounds { what: format!("Bell index {l}") }),
        })
    }
}

/// `J^P_{jj'}(t)` for one pair, optionally with a Bell kernel.
pub fn compute_jp<T: Real>(
    scenario: &DephasingScenario<T>,
    j: usize,
    jp: usize,
    t: T,
    bell: Option<usize>,
) -> Result<Complex<T>> {
    let m = scenario.qubits();
    if j >= m || jp >= m {
        return Err(Error::IndexOutOfBounds { what: format!("qubit pair ({j}, {jp}) of {m}") });
    }
    let mut s = scenario.clone();
    s.grid.t_end = t.max(s.grid.dt);
    let ints = DephasingIntegrals::compute(&s)?;
    let k = ints.len() - 1;
    match bell {
        None => Ok(if t > T::zero() { ints.jp(k, j, jp) } else { Complex::zero() }),
        Some(l) => {
            if m != 2 {
                return Err(Error::invalid("bell", "Bell states need exactly two qubits"));
            }
            if t > T::zero() {
                ints.jp_bell(k, j, jp, l)
            } else {
                Ok(Complex::zero())
            }
        }
    }
}

/// Fidelity of a dephasing run at one time, with a flag for leaving the
/// second-order validity band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityPoint<T> {
    pub value: T,
    /// `1 - F > 0.2`; the second-order result is then unreliable.
    pub outside_validity: bool,
}

fn flagged<T: Real>(value: T) -> FidelityPoint<T> {
    let outside = T::one() - value > T::lit(0.2);
    if outside {
        log::warn!("fidelity {value} is outside the second-order validity band");
    }
    FidelityPoint { value, outside_validity: outside }
}

/// `F = 1 - ½ Σ_j Re J^P_jj`, the same for every basis state.
pub fn basis_state_fidelity<T: Real>(ints: &DephasingIntegrals<T>, k: usize) -> FidelityPoint<T> {
    let s: T = (0..ints.qubits()).map(|j| ints.jp(k, j, j).re).sum();
    flagged(T::one() - s / T::lit(2.0))
}

/// `F_l = cos φ± Re[e^{iφ±}(1 - ½ Σ_jj' J^P_{jj',l})]`, `φ+` for `l ∈ {1,3}`
/// and `φ-` for `l ∈ {2,4}`.
pub fn bell_fidelity<T: Real>(
    scenario: &DephasingScenario<T>,
    ints: &DephasingIntegrals<T>,
    l: usize,
    k: usize,
) -> Result<FidelityPoint<T>> {
    if ints.qubits() != 2 {
        return Err(Error::invalid("bell", "Bell states need exactly two qubits"));
    }
    if !(1..=4).contains(&l) {
        return Err(Error::IndexOutOfBounds { what: format!("Bell index {l}") });
    }
    let t = ints.times[k];
    let (p1, p2) = (scenario.phase(0, t, Side::After), scenario.phase(1, t, Side::After));
    let half = T::lit(0.5);
    let phi = if l % 2 == 1 { (p1 + p2) * half } else { (p1 - p2) * half };
    let mut sum = Complex::zero();
    for j in 0..2 {
        for jp in 0..2 {
            sum += ints.jp_bell(k, j, jp, l)?;
        }
    }
    let inner = Complex::<T>::one() - sum * half;
    Ok(flagged(phi.cos() * (cis(phi) * inner).re))
}

/// Single-flip operator `S^σ_j` in the `2^M` basis: `σ = +1` is the element that
/// carries `e^{+iφ_j}` under the chosen sign convention.
pub fn flip_operator<T: Real>(m: usize, j: usize, sigma: i8, convention: FlipSign) -> CMatrix<T> {
    let n = 1usize << m;
    let mut op = CMatrix::zeros((n, n));
    let shift = m - 1 - j;
    // under the prose convention e^{+iφ} sits on row bit 0 (↑), column bit 1 (↓)
    let plus_row_bit = match convention {
        FlipSign::Prose => 0,
        FlipSign::Formula => 1,
    };
    let row_bit = if sigma > 0 { plus_row_bit } else { 1 - plus_row_bit };
    for row in 0..n {
        if (row >> shift) & 1 == row_bit {
            op[[row, row ^ (1 << shift)]] = Complex::one();
        }
    }
    op
}

fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.dot(b) - b.dot(a)
}

/// `ρ̄(t_k) = ρ(0) - ¼ Σ_{jj'} Σ_{σσ'} I^{σσ'}_{jj'} [S^σ_j, [S^σ'_j', ρ(0)]]`,
/// Hermitian-symmetrized.
pub fn second_order_density<T: Real>(
    scenario: &DephasingScenario<T>,
    ints: &DephasingIntegrals<T>,
    rho0: &CMatrix<T>,
    k: usize,
) -> Result<CMatrix<T>> {
    let m = ints.qubits();
    let n = 1usize << m;
    if rho0.dim() != (n, n) {
        return Err(Error::invalid("initial", format!("density matrix must be {n}x{n}")));
    }
    let ops: Vec<[CMatrix<T>; 2]> = (0..m)
        .map(|j| [flip_operator(m, j, 1, scenario.flip_sign), flip_operator(m, j, -1, scenario.flip_sign)])
        .collect();
    let quarter = T::lit(0.25);
    let mut out = rho0.clone();
    for j in 0..m {
        for jp in 0..m {
            for &s in &SIGNS {
                for &sp in &SIGNS {
                    let coef = ints.signed(k, j, jp, s, sp) * quarter;
                    if coef.is_zero() {
                        continue;
                    }
                    let inner = commutator(&ops[jp][sign_slot(sp)], rho0);
                    let outer = commutator(&ops[j][sign_slot(s)], &inner);
                    out = out - outer.mapv(|z| z * coef);
                }
            }
        }
    }
    let half = T::lit(0.5);
    Ok((&out + &adjoint(&out)).mapv(|z| z * half))
}

/// Projector onto a basis state.
pub fn basis_projector<T: Real>(idx: BinaryBasisIndex) -> CMatrix<T> {
    let n = 1usize << idx.m;
    let mut p = CMatrix::zeros((n, n));
    p[[idx.offset(), idx.offset()]] = Complex::one();
    p
}

/// Rows are the Bell states `B_1..B_4` in the (↑↑, ↑↓, ↓↑, ↓↓) basis.
pub fn bell_rotation<T: Real>() -> CMatrix<T> {
    let h = T::one() / T::lit(2.0).sqrt();
    let z = T::zero();
    let rows = [[h, z, z, -h], [z, -h, h, z], [h, z, z, h], [z, h, h, z]];
    Array2::from_shape_fn((4, 4), |(i, j)| Complex::new(rows[i][j], T::zero()))
}

pub fn bell_vector<T: Real>(l: usize) -> Result<CVector<T>> {
    if !(1..=4).contains(&l) {
        return Err(Error::IndexOutOfBounds { what: format!("Bell index {l}") });
    }
    Ok(bell_rotation::<T>().row(l - 1).to_owned())
}

/// The drive-frame transformation `⊗_j diag(e^{+iφ_j/2}, e^{-iφ_j/2})` at `t`,
/// so that `β̃_± = e^{±iφ/2} β_±` removes the `∓iV⁰` terms of the qubit equation.
pub fn drive_frame<T: Real>(scenario: &DephasingScenario<T>, t: T) -> CMatrix<T> {
    let m = scenario.qubits();
    let n = 1usize << m;
    let half = T::lit(0.5);
    let mut u = CMatrix::zeros((n, n));
    for row in 0..n {
        let mut ph = T::zero();
        for j in 0..m {
            let bit = (row >> (m - 1 - j)) & 1;
            let phi = scenario.phase(j, t, Side::After) * half;
            ph += if bit == 0 { phi } else { -phi };
        }
        u[[row, row]] = cis(ph);
    }
    u
}

/// `⟨ψ| U† ρ̄ U |ψ⟩`: the overlap of the second-order state, taken back to the
/// undriven frame, with the initial pure state `ψ`.
pub fn fidelity_from_density<T: Real>(
    scenario: &DephasingScenario<T>,
    ints: &DephasingIntegrals<T>,
    psi: &CVector<T>,
    k: usize,
) -> Result<T> {
    let rho0 = outer(psi);
    let rho = second_order_density(scenario, ints, &rho0, k)?;
    let u = drive_frame(scenario, ints.times[k]);
    let lab = adjoint(&u).dot(&rho).dot(&u);
    let v = lab.dot(psi);
    Ok(psi.iter().zip(v.iter()).fold(Complex::zero(), |s, (a, b)| s + a.conj() * *b).re)
}

/// `⟨ψ| ρ̄ |ψ⟩`: overlap in the frame co-rotating with the drive, which leaves
/// out the deterministic rotation of the state by the modulation itself.
pub fn fidelity_in_drive_frame<T: Real>(
    scenario: &DephasingScenario<T>,
    ints: &DephasingIntegrals<T>,
    psi: &CVector<T>,
    k: usize,
) -> Result<T> {
    let rho = second_order_density(scenario, ints, &outer(psi), k)?;
    let v = rho.dot(psi);
    Ok(psi.iter().zip(v.iter()).fold(Complex::zero(), |s, (a, b)| s + a.conj() * *b).re)
}

pub fn outer<T: Real>(psi: &CVector<T>) -> CMatrix<T> {
    let n = psi.len();
    Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj())
}

/// Trace deviation and anti-Hermitian part of a density matrix.
pub fn density_defects<T: Real>(rho: &CMatrix<T>) -> (T, T) {
    let tr = (trace(rho) - Complex::one()).norm();
    let herm = (rho - &adjoint(rho)).iter().map(|z| z.norm()).fold(T::zero(), T::max);
    (tr, herm)
}

/// Fidelity series of a dephasing run.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingResult<T> {
    pub times: Vec<T>,
    /// `J^P_jj'` series, `[k][j*M + j']`.
    pub jp: Vec<Vec<Complex<T>>>,
    pub fidelity: Vec<T>,
    /// Which kernels produced `fidelity`: `None` for basis states, `Some(l)` for Bell state `l`.
    pub bell: Option<usize>,
    pub outside_validity: bool,
}

/// Runs a scenario for a basis-state (`bell = None`) or Bell-state initial condition.
pub fn run_dephasing<T: Real>(scenario: &DephasingScenario<T>, bell: Option<usize>) -> Result<DephasingResult<T>> {
    let ints = DephasingIntegrals::compute(scenario)?;
    let m = ints.qubits();
    let mut fidelity = Vec::with_capacity(ints.len());
    let mut jp = Vec::with_capacity(ints.len());
    let mut outside = false;
    for k in 0..ints.len() {
        let p = match bell {
            None => basis_state_fidelity(&ints, k),
            Some(l) => bell_fidelity(scenario, &ints, l, k)?,
        };
        outside |= p.outside_validity;
        fidelity.push(p.value);
        let mut row = Vec::with_capacity(m * m);
        for j in 0..m {
            for jj in 0..m {
                row.push(match bell {
                    None => ints.jp(k, j, jj),
                    Some(l) => ints.jp_bell(k, j, jj, l)?,
                });
            }
        }
        jp.push(row);
    }
    Ok(DephasingResult { times: ints.times.clone(), jp, fidelity, bell, outside_validity: outside })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::ExponentialDephasingBath;
    use crate::modulation::ChannelModulation;
    use std::f64::consts::PI;

    fn fig6(theta2: f64, r12: f64) -> DephasingScenario<f64> {
        let bath = ExponentialDephasingBath::new(0.01, vec![1.0, 1.0], vec![[0.0, 0.0, 0.0], [r12, 0.0, 0.0]]).unwrap();
        let modu = ModulationSchedule::phase_trains(1.0, &[0.9 * PI, theta2]).unwrap();
        DephasingScenario::new(BathModel::ExponentialDephasing(bath), modu, 6.0).unwrap()
    }

    #[test]
    fn binary_indices() {
        let a = BinaryBasisIndex::from_bits(&[1, 0, 1]).unwrap();
        let b = BinaryBasisIndex::from_bits(&[1, 0, 0]).unwrap();
        assert_eq!(binary_distance(a, b), 1);
        assert_eq!(flip_target(a, b, FlipSign::Formula).unwrap(), (2, 1));
        assert_eq!(flip_target(a, b, FlipSign::Prose).unwrap(), (2, -1));
        assert_eq!(binary_distance(a, a), 0);
        let c = BinaryBasisIndex::from_bits(&[0, 0, 0]).unwrap();
        let d = BinaryBasisIndex::from_bits(&[0, 1, 1]).unwrap();
        assert_eq!(binary_distance(c, d), 2);
        assert!(matches!(flip_target(c, d, FlipSign::Prose), Err(Error::NotSingleFlip { distance: 2 })));
        assert_eq!(BinaryBasisIndex::new(3, 6).unwrap().bits(), vec![1, 0, 1]);
    }

    #[test]
    fn closed_form_point() {
        let bath = ExponentialDephasingBath::new(0.01, vec![1.0, 1.0], vec![[0.0; 3], [1e3, 0.0, 0.0]]).unwrap();
        let s = DephasingScenario::new(BathModel::ExponentialDephasing(bath.decorrelated()), ModulationSchedule::unmodulated(2), 2.0)
            .unwrap();
        let ints = DephasingIntegrals::compute(&s).unwrap();
        let k = ints.len() - 1;
        let f = basis_state_fidelity(&ints, k).value;
        let expected = 1.0 - 0.01 * (2.0 - (1.0 - (-2.0f64).exp()));
        assert!((f - expected).abs() < 1e-10, "{f} vs {expected}");
        assert!((expected - 0.98865).abs() < 5e-6);
    }

    #[test]
    fn bell_formula_matches_density_path() {
        // exact for l = 1, 3 always and for every l under global modulation
        for theta2 in [0.9 * PI, 0.8 * PI] {
            let s = fig6(theta2, 1.0);
            let ints = DephasingIntegrals::compute(&s).unwrap();
            for k in [0, ints.len() / 3, ints.len() - 1] {
                for l in 1..=4 {
                    let a = bell_fidelity(&s, &ints, l, k).unwrap().value;
                    let b = fidelity_from_density(&s, &ints, &bell_vector(l).unwrap(), k).unwrap();
                    if l % 2 == 1 || theta2 == 0.9 * PI {
                        assert!((a - b).abs() < 1e-12, "l={l} k={k}: {a} vs {b}");
                    } else {
                        let bound: f64 = (0..2).flat_map(|j| (0..2).map(move |jp| (j, jp))).map(|(j, jp)| ints.jp_bell(k, j, jp, l).unwrap().norm()).sum();
                        assert!((a - b).abs() <= bound + 1e-12, "l={l} k={k}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn drive_frame_fidelity_is_one_at_start_and_below_one_later() {
        let s = fig6(0.8 * PI, 1.0);
        let ints = DephasingIntegrals::compute(&s).unwrap();
        let psi = bell_vector::<f64>(4).unwrap();
        assert!((fidelity_in_drive_frame(&s, &ints, &psi, 0).unwrap() - 1.0).abs() < 1e-15);
        let f = fidelity_in_drive_frame(&s, &ints, &psi, ints.len() - 1).unwrap();
        assert!(f < 1.0 && f > 0.9);
    }

    #[test]
    fn basis_fidelity_matches_density_for_all_states() {
        let s = fig6(0.8 * PI, 0.7);
        let ints = DephasingIntegrals::compute(&s).unwrap();
        let k = ints.len() - 1;
        let f = basis_state_fidelity(&ints, k).value;
        for l in 1..=4 {
            let mut psi = CVector::zeros(4);
            psi[l - 1] = Complex::one();
            let g = fidelity_from_density(&s, &ints, &psi, k).unwrap();
            assert!((f - g).abs() < 1e-12);
        }
    }

    #[test]
    fn density_trace_and_hermiticity() {
        let s = fig6(0.8 * PI, 1.0);
        let ints = DephasingIntegrals::compute(&s).unwrap();
        let psi = bell_vector::<f64>(2).unwrap();
        let rho = second_order_density(&s, &ints, &outer(&psi), ints.len() - 1).unwrap();
        let (tr, herm) = density_defects(&rho);
        assert!(tr < 1e-12 && herm == 0.0);
        let mixed = CMatrix::<f64>::eye(4).mapv(|z| z * 0.25);
        let out = second_order_density(&s, &ints, &mixed, ints.len() - 1).unwrap();
        assert!((&out - &mixed).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn bell_rotation_is_unitary() {
        let r = bell_rotation::<f64>();
        let p = r.dot(&adjoint(&r));
        assert!(crate::linalg::distance_from_identity(&p) < 1e-15);
        // singlet has no weight on ↑↑ + ↓↓
        let b2 = bell_vector::<f64>(2).unwrap();
        assert_eq!(b2[0] + b2[3], Complex::zero());
    }

    #[test]
    fn global_cross_kernel_cancels() {
        let s = fig6(0.9 * PI, 1.0);
        let ints = DephasingIntegrals::compute(&s).unwrap();
        let k = ints.len() - 1;
        // K_{12,4} = ε_1 ε_2* ≡ 1 at equal times only; the double integral still
        // reduces to the unmodulated form when all phases vanish
        let t = ints.times[k];
        assert!(t > 0.0);
        assert!((ints.jp_bell(k, 0, 1, 4).unwrap() + ints.jp_bell(k, 0, 1, 2).unwrap()).norm() < 1e-15);
        assert!((ints.jp_bell(k, 0, 1, 3).unwrap() + ints.jp_bell(k, 0, 1, 1).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn zero_bath_keeps_unit_fidelity() {
        let bath = ExponentialDephasingBath::new(0.0, vec![1.0, 1.0], vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let modu = ModulationSchedule::new(vec![ChannelModulation::pulses(1.0, 0.3).unwrap(), ChannelModulation::unmodulated()]).unwrap();
        let s = DephasingScenario::new(BathModel::ExponentialDephasing(bath), modu, 3.0).unwrap();
        let r = run_dephasing(&s, None).unwrap();
        assert!(r.fidelity.iter().all(|f| *f == 1.0));
    }
}
