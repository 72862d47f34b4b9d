use std::f64::consts::PI;

use decoctl_core::modulation::{ChannelModulation, DrivingEnvelope, ModulationSchedule, Side, StarkShiftSchedule};
use proptest::prelude::*;

#[test]
fn phase_train_is_right_continuous() {
    let s = ModulationSchedule::phase_trains(1.0, &[0.5 * PI]).unwrap();
    assert!((s.eval_epsilon(0, 0.999).unwrap() - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-15);
    let at = s.eval_epsilon(0, 1.0).unwrap();
    assert!((at - num_complex::Complex64::new(0.0, 1.0)).norm() < 1e-15);
    assert_eq!(s.channel(0).pulse_count(1.0, Side::Before), 0);
    assert_eq!(s.channel(0).pulse_count(1.0, Side::After), 1);
}

#[test]
fn drive_phase_examples() {
    let constant = ChannelModulation::<f64>::unmodulated().with_drive(DrivingEnvelope::constant(0.3));
    assert!((constant.drive_phase(2.0, Side::After) - 1.2).abs() < 1e-15);
    assert_eq!(ChannelModulation::<f64>::unmodulated().drive_phase(5.0, Side::After), 0.0);
    // a pulse of area θ/2 per unit time inside [τ - 1, τ) advances φ by θ per τ
    let theta = 0.7;
    let env = DrivingEnvelope::piecewise(vec![0.0, 0.9, 1.0], vec![0.0, theta / 0.2, 0.0]).unwrap();
    let ch = ChannelModulation::<f64>::unmodulated().with_drive(env);
    assert!((ch.drive_phase(1.5, Side::After) - theta).abs() < 1e-12);
}

#[test]
fn stark_shift_integral() {
    let s = StarkShiftSchedule::<f64>::piecewise(vec![0.0, 2.0], vec![1.0, -0.5]).unwrap();
    assert!((s.integral(3.0) - 1.5).abs() < 1e-15);
    assert!(StarkShiftSchedule::<f64>::none().is_zero());
}

#[test]
fn invalid_schedules_are_rejected() {
    assert!(ModulationSchedule::phase_trains(0.0, &[PI]).is_err());
    assert!(ModulationSchedule::phase_trains(-1.0, &[PI]).is_err());
    assert!(StarkShiftSchedule::piecewise(vec![1.0, 0.5], vec![0.0, 0.0]).is_err());
}

proptest! {
    #[test]
    fn phase_only_epsilon_has_unit_modulus(tau in 0.05..3.0f64, theta in 0.0..(10.0 * PI), t in 0.0..100.0f64) {
        let s = ModulationSchedule::phase_trains(tau, &[theta]).unwrap();
        prop_assert!((s.eval_epsilon(0, t).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_is_hermitian(th in prop::collection::vec(0.0..(10.0 * PI), 3), rate in -1.0..1.0f64, t in 0.0..20.0f64, tp in 0.0..20.0f64) {
        let mut chans: Vec<ChannelModulation<f64>> = th.iter().map(|x| ChannelModulation::pulses(0.7, *x).unwrap()).collect();
        chans[1] = chans[1].clone().with_stark(StarkShiftSchedule::constant(rate));
        let s = ModulationSchedule::new(chans).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let k = s.eval_kernel(a, b, t, tp).unwrap();
                let kt = s.eval_kernel(b, a, tp, t).unwrap();
                prop_assert!((k - kt.conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn global_kernel_is_channel_independent(tau in 0.1..2.0f64, theta in 0.0..(10.0 * PI), t in 0.0..20.0f64, tp in 0.0..20.0f64) {
        let s = ModulationSchedule::global(3, ChannelModulation::pulses(tau, theta).unwrap());
        prop_assert!(s.is_global());
        let k00 = s.eval_kernel(0, 0, t, tp).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                prop_assert!((s.eval_kernel(a, b, t, tp).unwrap() - k00).norm() < 1e-15);
            }
        }
    }
}
