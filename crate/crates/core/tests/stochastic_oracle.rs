use std::f64::consts::PI;

use decoctl_core::bath::{BathModel, CorrelatedGaussianDecayBath, ExponentialDephasingBath, GaussianDipoleBath};
use decoctl_core::decay::{dicke_coefficients, mixing_decay_parameters, DecayScenario};
use decoctl_core::dephasing::DephasingScenario;
use decoctl_core::linalg::CVector;
use decoctl_core::modulation::ModulationSchedule;
use decoctl_core::oracle::{exact_decay_solve, mc_dephasing_fidelity, sample_gaussian_process, CirculantSampler, OracleReport, ToleranceKind};
use decoctl_core::recipes::{bell_series, fig6_scenario_with};
use decoctl_core::dephasing::bell_vector;
use num_complex::Complex64;

fn pair_bath(gamma: f64, r: f64) -> BathModel<f64> {
    BathModel::ExponentialDephasing(ExponentialDephasingBath::new(gamma, vec![1.0, 1.0], vec![[0.0; 3], [r, 0.0, 0.0]]).unwrap())
}

#[test]
fn sampled_noise_has_the_bath_covariance() {
    let bath = pair_bath(0.01, 1.0);
    let (dt, points, count) = (0.1, 41, 4000);
    let real = sample_gaussian_process(&bath, dt, points, count, 3).unwrap();
    assert_eq!(real.len(), count);
    let n = count as f64;
    for (j, jp, lag) in [(0, 0, 0), (0, 0, 10), (0, 1, 0), (1, 0, 5), (1, 1, 20)] {
        let (mut mean, mut cov, mut sq) = (0.0, 0.0, 0.0);
        for r in &real {
            let x = r.values[j][7] * r.values[jp][7 + lag];
            mean += r.values[j][7];
            cov += x;
            sq += x * x;
        }
        let (mean, cov) = (mean / n, cov / n);
        let se = ((sq / n - cov * cov) / n).sqrt();
        let want = bath.response_flat(j, jp, lag as f64 * dt).re;
        assert!((cov - want).abs() < 4.0 * se, "({j},{jp},{lag}): {cov} vs {want} ± {se}");
        assert!(mean.abs() < 4.0 * (0.01f64 / n).sqrt());
    }
}

#[test]
fn sampling_is_bit_reproducible() {
    let bath = pair_bath(0.02, 1.0);
    let s = CirculantSampler::new(&bath, 0.05, 101).unwrap();
    assert_eq!(s.pair(9, 4), s.pair(9, 4));
    assert_ne!(s.pair(9, 4)[0].values, s.pair(10, 4)[0].values);
    let scen = fig6_scenario_with(0.9 * PI, 0.8 * PI, false, 3.0).unwrap();
    let psi = bell_vector::<f64>(2).unwrap();
    let a = mc_dephasing_fidelity(&scen, &psi, 64, 5).unwrap();
    let b = mc_dephasing_fidelity(&scen, &psi, 64, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn indefinite_covariance_is_refused() {
    // a flat-topped table has a spectrum with negative lobes
    let layout = decoctl_core::bath::ChannelLayout::qubits(1).unwrap();
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1).collect();
    let values = grid.iter().map(|t| vec![vec![Complex64::new(if *t < 2.0 { 1.0 } else { 0.0 }, 0.0)]]).collect();
    let bath = BathModel::Tabulated(decoctl_core::bath::TabulatedBath::new(layout, grid, values).unwrap());
    let err = CirculantSampler::new(&bath, 0.1, 200).unwrap_err();
    assert!(err.is_numerical_refusal());
}

#[test]
fn mc_reproduces_singlet_triplet_ordering_under_global_modulation() {
    let s = fig6_scenario_with(0.9 * PI, 0.9 * PI, false, 15.0).unwrap();
    let engine = bell_series(&s).unwrap();
    let singlet = mc_dephasing_fidelity(&s, &bell_vector(2).unwrap(), 2000, 1).unwrap();
    let triplet = mc_dephasing_fidelity(&s, &bell_vector(4).unwrap(), 2000, 1).unwrap();
    let k = singlet.index_at(15.0);
    assert!(singlet.mean[k] > triplet.mean[k]);
    let ke = engine.times.len() - 1;
    for (mc, f) in [(&singlet, engine.singlet_density[ke]), (&triplet, engine.triplet_density[ke])] {
        let r = OracleReport::compare("bell", 15.0, f, mc.mean[k], Some(mc.stderr[k]), 3.0, ToleranceKind::StandardErrors, Some(2000), s.grid.dt);
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn unit_fidelity_without_coupling() {
    let s = DephasingScenario::new(pair_bath(0.0, 1.0), ModulationSchedule::phase_trains(1.0, &[PI, 0.5 * PI]).unwrap(), 2.0).unwrap();
    let mut psi = CVector::<f64>::zeros(4);
    psi[1] = Complex64::new(1.0, 0.0);
    let mc = mc_dephasing_fidelity(&s, &psi, 8, 1).unwrap();
    assert!(mc.mean.iter().all(|f| (f - 1.0).abs() < 1e-12));
}

fn decay_reference(dt: Option<f64>) -> DecayScenario<f64> {
    let pos = CorrelatedGaussianDecayBath::ring_positions(3, 1.0);
    let bath = BathModel::CorrelatedGaussian(CorrelatedGaussianDecayBath::new(0.05, vec![0.75, 0.81, 1.0], 1.0, pos).unwrap());
    let mut s =
        DecayScenario::new(vec![0.5; 3], bath, ModulationSchedule::phase_trains(1.0, &[PI, 0.7 * PI, 0.58 * PI]).unwrap(), dicke_coefficients(3, 1), 10.0)
            .unwrap();
    if let Some(dt) = dt {
        s.grid.dt = dt;
    }
    s
}

#[test]
fn exact_solver_converges_under_step_halving() {
    let base = decay_reference(None);
    let coarse = exact_decay_solve(&base).unwrap();
    let fine = exact_decay_solve(&decay_reference(Some(base.grid.dt / 2.0))).unwrap();
    let end = |a: &CVector<f64>| a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let (a, b) = (end(coarse.amplitudes.last().unwrap()), end(fine.amplitudes.last().unwrap()));
    assert!((a - b).abs() < 1e-4, "{a} vs {b}");
}

#[test]
fn exact_solver_matches_scalar_markov_limit() {
    // a very short memory makes the exact and Born dynamics coincide: |α| ≈ e^{-Re J}
    let bath = BathModel::GaussianDipole(GaussianDipoleBath::uniform(0.02, 0.0, vec![0.0], 0.05).unwrap());
    let s = DecayScenario::new(vec![0.0], bath, ModulationSchedule::unmodulated(1), vec![Complex64::new(1.0, 0.0)], 5.0).unwrap();
    let ex = exact_decay_solve(&s).unwrap();
    let a = mixing_decay_parameters(ex.amplitudes.last().unwrap().as_slice().unwrap(), 0).decay.unwrap().norm();
    let rate = 0.02 * 0.05 * PI.sqrt();
    assert!((a - (-rate * 5.0).exp()).abs() < 1e-3, "{a}");
}
