use std::f64::consts::PI;

use decoctl_core::bath::{BathModel, ExponentialDephasingBath};
use decoctl_core::dephasing::{
    basis_projector, basis_state_fidelity, bell_fidelity, bell_vector, binary_distance, density_defects, fidelity_from_density, outer,
    second_order_density, BinaryBasisIndex, DephasingIntegrals, DephasingScenario,
};
use decoctl_core::modulation::ModulationSchedule;
use decoctl_core::recipes::fig6_scenario_with;
use num_complex::Complex64;
use proptest::prelude::*;

fn line(m: usize, gamma: f64, thetas: &[f64], t_end: f64) -> DephasingScenario<f64> {
    let pos = (0..m).map(|j| [j as f64, 0.0, 0.0]).collect();
    let bath = ExponentialDephasingBath::new(gamma, vec![1.0; m], pos).unwrap();
    DephasingScenario::new(BathModel::ExponentialDephasing(bath), ModulationSchedule::phase_trains(1.0, thetas).unwrap(), t_end).unwrap()
}

#[test]
fn closed_form_point() {
    // unmodulated pair, γ = 0.01, t_c = 1: F(t) = 1 - γ(t - 1 + e^{-t})
    let s = DephasingScenario::new(
        BathModel::ExponentialDephasing(ExponentialDephasingBath::new(0.01, vec![1.0, 1.0], vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap()),
        ModulationSchedule::unmodulated(2),
        2.0,
    )
    .unwrap();
    let ints = DephasingIntegrals::compute(&s).unwrap();
    let f = basis_state_fidelity(&ints, ints.index_at(2.0)).value;
    let exact = 1.0 - 0.01 * (2.0 - 1.0 + (-2.0f64).exp());
    assert!((f - exact).abs() < 1e-9, "{f} vs {exact}");
    assert!((f - 0.98865).abs() < 1e-5);
}

#[test]
fn binary_index_is_a_bijection() {
    for m in 1..=4 {
        let mut seen = vec![false; 1 << m];
        for l in 1..=(1 << m) {
            let idx = BinaryBasisIndex::new(m, l).unwrap();
            let back = BinaryBasisIndex::from_bits(&idx.bits()).unwrap();
            assert_eq!(back, idx);
            assert_eq!(binary_distance(idx, idx), 0);
            assert!(!seen[idx.offset()]);
            seen[idx.offset()] = true;
        }
        assert!(BinaryBasisIndex::new(m, 0).is_err());
        assert!(BinaryBasisIndex::new(m, (1 << m) + 1).is_err());
    }
}

#[test]
fn global_modulation_orders_singlet_above_triplet() {
    let s = fig6_scenario_with(0.9 * PI, 0.9 * PI, false, 25.0).unwrap();
    let ints = DephasingIntegrals::compute(&s).unwrap();
    let mut gap = 0.0f64;
    for k in 0..ints.len() {
        let d = bell_fidelity(&s, &ints, 2, k).unwrap().value - bell_fidelity(&s, &ints, 4, k).unwrap().value;
        assert!(d >= -1e-12, "t={}: {d}", ints.times[k]);
        gap = gap.max(d);
    }
    assert!(gap > 0.005);
}

#[test]
fn local_modulation_equalizes_bell_states() {
    let s = fig6_scenario_with(0.9 * PI, 0.8 * PI, false, 25.0).unwrap();
    let ints = DephasingIntegrals::compute(&s).unwrap();
    for k in 0..ints.len() {
        let d = bell_fidelity(&s, &ints, 2, k).unwrap().value - bell_fidelity(&s, &ints, 4, k).unwrap().value;
        assert!(d.abs() < 0.01, "t={}: {d}", ints.times[k]);
    }
}

#[test]
fn bell_states_start_at_unit_fidelity() {
    let s = fig6_scenario_with(0.9 * PI, 0.8 * PI, false, 3.0).unwrap();
    let ints = DephasingIntegrals::compute(&s).unwrap();
    for l in 1..=4 {
        assert!((bell_fidelity(&s, &ints, l, 0).unwrap().value - 1.0).abs() < 1e-12);
        let psi = bell_vector::<f64>(l).unwrap();
        assert!((fidelity_from_density(&s, &ints, &psi, 0).unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(bell_fidelity(&s, &ints, 5, 0).is_err());
}

#[test]
fn outside_validity_is_flagged() {
    let s = line(2, 0.5, &[PI, PI], 10.0);
    let ints = DephasingIntegrals::compute(&s).unwrap();
    let p = basis_state_fidelity(&ints, ints.len() - 1);
    assert!(p.outside_validity && p.value < 0.8);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn basis_fidelity_is_state_independent(m in 1usize..=4, th in prop::collection::vec(0.0..(2.0 * PI), 4), gamma in 0.0..0.05f64) {
        let s = line(m, gamma, &th[..m], 4.0);
        let ints = DephasingIntegrals::compute(&s).unwrap();
        for k in [0, ints.len() / 2, ints.len() - 1] {
            let f = basis_state_fidelity(&ints, k).value;
            for l in 1..=(1 << m) {
                let idx = BinaryBasisIndex::new(m, l).unwrap();
                let rho0 = basis_projector::<f64>(idx);
                let rho = second_order_density(&s, &ints, &rho0, k).unwrap();
                let on = rho[[idx.offset(), idx.offset()]];
                prop_assert!((on.re - f).abs() < 1e-10, "m={m} l={l}: {} vs {f}", on.re);
            }
        }
    }

    #[test]
    fn density_keeps_trace_and_hermiticity(th in prop::collection::vec(0.0..(2.0 * PI), 2), re in prop::collection::vec(-1.0..1.0f64, 4), im in prop::collection::vec(-1.0..1.0f64, 4)) {
        let s = line(2, 0.02, &th, 6.0);
        let ints = DephasingIntegrals::compute(&s).unwrap();
        let mut psi = ndarray::Array1::from_shape_fn(4, |i| Complex64::new(re[i], im[i]));
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        psi.mapv_inplace(|z| z / norm);
        let rho0 = outer(&psi);
        for k in 0..ints.len() {
            let (tr, herm) = density_defects(&second_order_density(&s, &ints, &rho0, k).unwrap());
            prop_assert!(tr < 1e-8 && herm < 1e-12);
        }
    }

    #[test]
    fn decorrelation_matches_local_modulation(t2 in (0.55..0.85f64).prop_map(|x| x * PI)) {
        let a = fig6_scenario_with(0.9 * PI, t2, false, 25.0).unwrap();
        let b = fig6_scenario_with(0.9 * PI, t2, true, 25.0).unwrap();
        let (ia, ib) = (DephasingIntegrals::compute(&a).unwrap(), DephasingIntegrals::compute(&b).unwrap());
        for l in [2, 4] {
            for k in 0..ia.len() {
                let d = bell_fidelity(&a, &ia, l, k).unwrap().value - bell_fidelity(&b, &ib, l, k).unwrap().value;
                prop_assert!(d.abs() <= 0.02, "θ₂/π={} l={l} t={}: {d}", t2 / PI, ia.times[k]);
            }
        }
    }
}
