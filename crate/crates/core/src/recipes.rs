//! Scenarios and datasets behind the reference figures.
//!
//! Decay figures use [`PhaseConvention::Rotating`]; see the crate README for why.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bath::{BathModel, CorrelatedGaussianDecayBath, ExponentialDephasingBath, GaussianDipoleBath};
use crate::decay::{amplitudes_from_mixing, dicke_coefficients, DecayEngine, DecayScenario, DecoherenceHistory, PhaseConvention};
use crate::dephasing::{bell_fidelity, bell_vector, fidelity_from_density, fidelity_in_drive_frame, DephasingIntegrals, DephasingScenario};
use crate::error::{Error, Result};
use crate::modulation::ModulationSchedule;
use crate::optimizer::{power_sweep, SearchSettings, SweepPoint};

pub const FIGURES: [&str; 5] = ["fig2", "fig3", "fig4", "fig5", "fig6"];

/// A flat numeric table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, columns: Vec<String>) -> Self {
        Dataset { name: name.into(), columns, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn fig2_energies() -> Vec<f64> {
    (0..4).map(|n| 0.5 + 0.1 * n as f64).collect()
}

/// Four-level system of Fig. 2 with pulses every `tau` and phase steps `thetas`.
pub fn fig2_scenario(thetas: &[f64], tau: f64, t_end: f64) -> Result<DecayScenario<f64>> {
    let angles = [0.246, 0.0, 0.326, 0.370].iter().map(|e| e * PI).collect();
    let bath = BathModel::GaussianDipole(GaussianDipoleBath::uniform(1.0, 0.5, angles, 1.0)?);
    let modulation = ModulationSchedule::phase_trains(tau, thetas)?;
    let initial = vec![Complex64::new(0.5, 0.0); 4];
    let mut s = DecayScenario::new(fig2_energies(), bath, modulation, initial, t_end)?;
    s.phase_convention = PhaseConvention::Rotating;
    Ok(s)
}

pub const FIG2_THETAS: [f64; 4] = [PI, 9.0 * PI, 8.0 * PI, 7.0 * PI];

/// Three qubits on a ring (γ = 0.05, r₀ = 1, ω = 0.5, τ = 1) starting in `D^3_l`.
pub fn fig4_scenario(correlation_times: [f64; 3], thetas: [f64; 3], l: usize) -> Result<DecayScenario<f64>> {
    let initial = dicke_coefficients::<f64>(3, l);
    ring_scenario(correlation_times, thetas, initial, 25.0)
}

pub const FIG4_IDENTICAL: [f64; 3] = [1.0, 1.0, 1.0];
pub const FIG4_DIFFERENT: [f64; 3] = [0.75, 0.81, 1.0];
pub const FIG4_LOCAL: [f64; 3] = [PI, 0.70 * PI, 0.58 * PI];
pub const FIG5_LOCAL: [f64; 3] = [0.80 * PI, 0.56 * PI, 0.47 * PI];
pub const FIG5_MIXING: [f64; 3] = [1.0, 1.57, 1.64];

/// Steering scenario of Fig. 5: `c(0) = {1.0, 1.57, 1.64}`, `A(0) = 1`.
pub fn fig5_scenario(thetas: [f64; 3]) -> Result<DecayScenario<f64>> {
    let c: Vec<Complex64> = FIG5_MIXING.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    let initial = amplitudes_from_mixing(&c, Complex64::new(1.0, 0.0), 0)?;
    ring_scenario(FIG4_DIFFERENT, thetas, initial, 25.0)
}

fn ring_scenario(tcs: [f64; 3], thetas: [f64; 3], initial: Vec<Complex64>, t_end: f64) -> Result<DecayScenario<f64>> {
    let pos = CorrelatedGaussianDecayBath::ring_positions(3, 1.0);
    let bath = BathModel::CorrelatedGaussian(CorrelatedGaussianDecayBath::new(0.05, tcs.to_vec(), 1.0, pos)?);
    let modulation = ModulationSchedule::phase_trains(1.0, &thetas)?;
    let mut s = DecayScenario::new(vec![0.5; 3], bath, modulation, initial, t_end)?;
    s.phase_convention = PhaseConvention::Rotating;
    Ok(s)
}

/// Two qubits a distance 1 apart (γ = 0.01, t₁ = t₂ = 1, τ = 1, θ₁ = 0.9π).
pub fn fig6_scenario(theta2: f64, decorrelated: bool) -> Result<DephasingScenario<f64>> {
    fig6_scenario_with(0.9 * PI, theta2, decorrelated, 25.0)
}

pub fn fig6_scenario_with(theta1: f64, theta2: f64, decorrelated: bool, t_end: f64) -> Result<DephasingScenario<f64>> {
    let mut bath = ExponentialDephasingBath::new(0.01, vec![1.0, 1.0], vec![[0.0; 3], [1.0, 0.0, 0.0]])?;
    if decorrelated {
        bath = bath.decorrelated();
    }
    let modulation = ModulationSchedule::phase_trains(1.0, &[theta1, theta2])?;
    DephasingScenario::new(BathModel::ExponentialDephasing(bath), modulation, t_end)
}

pub fn fig3_powers() -> Vec<f64> {
    (1..=10).map(|k| 0.5 * k as f64).collect()
}

/// Builds every dataset of the named figure.
pub fn figure(name: &str) -> Result<Vec<Dataset>> {
    match name {
        "fig2" => fig2(),
        "fig3" => fig3(&fig3_powers(), &SearchSettings::default()).map(|(d, _)| vec![d]),
        "fig4" => fig4(),
        "fig5" => fig5(),
        "fig6" => fig6(),
        _ => Err(Error::invalid("figure", format!("unknown figure `{name}` (expected one of {})", FIGURES.join(", ")))),
    }
}

fn j_table(name: &str, h: &DecoherenceHistory<f64>) -> Dataset {
    let n = h.amplitudes[0].len();
    let mut cols = vec!["t".to_string()];
    for a in 0..n {
        for b in 0..n {
            cols.push(format!("J{}{}_re", a + 1, b + 1));
            cols.push(format!("J{}{}_im", a + 1, b + 1));
        }
    }
    let mut d = Dataset::new(name, cols);
    for (k, t) in h.times.iter().enumerate() {
        let mut row = vec![*t];
        for z in h.j[k].iter() {
            row.push(z.re);
            row.push(z.im);
        }
        d.rows.push(row);
    }
    d
}

pub fn fig2() -> Result<Vec<Dataset>> {
    let local = DecayEngine::new(&fig2_scenario(&FIG2_THETAS, 1.0, 50.0)?)?.run();
    let global = DecayEngine::new(&fig2_scenario(&[PI; 4], 1.0, 50.0)?)?.run();
    Ok(vec![j_table("fig2_local", &local), j_table("fig2_global", &global)])
}

pub fn fig3(powers: &[f64], settings: &SearchSettings) -> Result<(Dataset, Vec<SweepPoint<f64>>)> {
    let base = fig2_scenario(&[PI; 4], 1.0, 50.0)?;
    let points = power_sweep(&base, powers, settings)?;
    Ok((sweep_dataset("fig3", &points), points))
}

/// One row per sweep point: powers, `|A|` and `|c_k|` (k ≥ 2) for both runs,
/// the local phases and flags.
pub fn sweep_dataset(name: &str, points: &[SweepPoint<f64>]) -> Dataset {
    let n = points.first().map_or(0, |p| p.local_thetas.len());
    let mut cols: Vec<String> = ["power", "interval", "local_power", "global_A", "local_A"].iter().map(|s| s.to_string()).collect();
    for k in 2..=n {
        cols.push(format!("global_c{k}"));
        cols.push(format!("local_c{k}"));
    }
    for k in 1..=n {
        cols.push(format!("local_theta{k}_over_pi"));
    }
    cols.extend(["local_objective", "global_objective", "symmetrized", "fell_back"].iter().map(|s| s.to_string()));
    let mut d = Dataset::new(name, cols);
    for p in points {
        let mut row = vec![p.power, p.interval, p.local_power, p.global_decay, p.local_decay];
        for k in 1..n {
            row.push(p.global_mixing[k]);
            row.push(p.local_mixing[k]);
        }
        row.extend(p.local_thetas.iter().map(|t| t / PI));
        row.extend([p.local_objective, p.global_objective, p.symmetrized as u8 as f64, p.fell_back as u8 as f64]);
        d.rows.push(row);
    }
    d
}

/// The scenarios behind a figure, for the run manifest.
pub fn figure_parameters(name: &str) -> Result<serde_json::Value> {
    let ser = |v: serde_json::Result<serde_json::Value>| v.map_err(|e| Error::invalid("figure", e.to_string()));
    match name {
        "fig2" => ser(serde_json::to_value([fig2_scenario(&FIG2_THETAS, 1.0, 50.0)?, fig2_scenario(&[PI; 4], 1.0, 50.0)?])),
        "fig3" => ser(serde_json::to_value((fig2_scenario(&[PI; 4], 1.0, 50.0)?, fig3_powers(), SearchSettings::default()))),
        "fig4" => ser(serde_json::to_value([
            fig4_scenario(FIG4_IDENTICAL, [PI; 3], 1)?,
            fig4_scenario(FIG4_IDENTICAL, FIG4_LOCAL, 1)?,
            fig4_scenario(FIG4_DIFFERENT, [PI; 3], 1)?,
            fig4_scenario(FIG4_DIFFERENT, FIG4_LOCAL, 1)?,
        ])),
        "fig5" => ser(serde_json::to_value([fig5_scenario([PI; 3])?, fig5_scenario(FIG5_LOCAL)?])),
        "fig6" => ser(serde_json::to_value([
            fig6_scenario(0.9 * PI, false)?,
            fig6_scenario(0.8 * PI, false)?,
            fig6_scenario(0.8 * PI, true)?,
        ])),
        _ => Err(Error::invalid("figure", format!("unknown figure `{name}` (expected one of {})", FIGURES.join(", ")))),
    }
}

/// Decay and mixing series on the common time axis of `runs`.
fn mixing_table(name: &str, runs: &[(&str, DecoherenceHistory<f64>)]) -> Result<Dataset> {
    let mut cols = vec!["t".to_string()];
    for (v, _) in runs {
        for c in ["A_abs", "c2_abs", "c3_abs", "c2_re", "c2_im", "c3_re", "c3_im"] {
            cols.push(format!("{v}_{c}"));
        }
    }
    let mut d = Dataset::new(name, cols);
    let times = &runs[0].1.times;
    for r in runs {
        if r.1.times.len() != times.len() {
            return Err(Error::invalid("grid", "figure variants must share a time grid"));
        }
    }
    for (k, t) in times.iter().enumerate() {
        let mut row = vec![*t];
        for (_, h) in runs {
            let md = h.mixing_decay(k);
            let a = md.decay.map_or(f64::NAN, |z| z.norm());
            let c = md.mixing.map(|c| c.to_vec()).unwrap_or_else(|| vec![Complex64::new(f64::NAN, f64::NAN); 3]);
            row.extend([a, c[1].norm(), c[2].norm(), c[1].re, c[1].im, c[2].re, c[2].im]);
        }
        d.rows.push(row);
    }
    Ok(d)
}

pub fn fig4_runs() -> Result<Vec<(&'static str, DecoherenceHistory<f64>)>> {
    let variants: [(&str, [f64; 3], [f64; 3]); 4] = [
        ("global_identical", FIG4_IDENTICAL, [PI; 3]),
        ("local_identical", FIG4_IDENTICAL, FIG4_LOCAL),
        ("global_different", FIG4_DIFFERENT, [PI; 3]),
        ("local_different", FIG4_DIFFERENT, FIG4_LOCAL),
    ];
    // a common grid so the table has one time column
    let dt = fig4_scenario(FIG4_DIFFERENT, FIG4_LOCAL, 1)?.grid.dt;
    variants
        .par_iter()
        .map(|(name, tcs, th)| {
            let mut s = fig4_scenario(*tcs, *th, 1)?;
            s.grid.dt = dt;
            Ok((*name, DecayEngine::new(&s)?.run()))
        })
        .collect()
}

pub fn fig4() -> Result<Vec<Dataset>> {
    Ok(vec![mixing_table("fig4", &fig4_runs()?)?])
}

pub fn fig5_runs() -> Result<Vec<(&'static str, DecoherenceHistory<f64>)>> {
    let g = DecayEngine::new(&fig5_scenario([PI; 3])?)?.run();
    let l = DecayEngine::new(&fig5_scenario(FIG5_LOCAL)?)?.run();
    Ok(vec![("global", g), ("local", l)])
}

pub fn fig5() -> Result<Vec<Dataset>> {
    Ok(vec![mixing_table("fig5", &fig5_runs()?)?])
}

/// Bell fidelity series of one Fig. 6 variant: printed recipe, density path and
/// drive-frame fidelity for singlet (l = 2) and triplet (l = 4).
#[derive(Debug, Clone)]
pub struct BellSeries {
    pub times: Vec<f64>,
    pub singlet: Vec<f64>,
    pub triplet: Vec<f64>,
    pub singlet_density: Vec<f64>,
    pub triplet_density: Vec<f64>,
    pub singlet_drive: Vec<f64>,
    pub triplet_drive: Vec<f64>,
}

pub fn bell_series(s: &DephasingScenario<f64>) -> Result<BellSeries> {
    let ints = DephasingIntegrals::compute(s)?;
    let (b2, b4) = (bell_vector(2)?, bell_vector(4)?);
    let mut out = BellSeries {
        times: ints.times.clone(),
        singlet: Vec::new(),
        triplet: Vec::new(),
        singlet_density: Vec::new(),
        triplet_density: Vec::new(),
        singlet_drive: Vec::new(),
        triplet_drive: Vec::new(),
    };
    for k in 0..ints.len() {
        out.singlet.push(bell_fidelity(s, &ints, 2, k)?.value);
        out.triplet.push(bell_fidelity(s, &ints, 4, k)?.value);
        out.singlet_density.push(fidelity_from_density(s, &ints, &b2, k)?);
        out.triplet_density.push(fidelity_from_density(s, &ints, &b4, k)?);
        out.singlet_drive.push(fidelity_in_drive_frame(s, &ints, &b2, k)?);
        out.triplet_drive.push(fidelity_in_drive_frame(s, &ints, &b4, k)?);
    }
    Ok(out)
}

pub fn fig6_runs() -> Result<Vec<(&'static str, BellSeries)>> {
    let variants = [("global", 0.9 * PI, false), ("local", 0.8 * PI, false), ("local_decorrelated", 0.8 * PI, true)];
    variants.par_iter().map(|(n, th, dec)| Ok((*n, bell_series(&fig6_scenario(*th, *dec)?)?))).collect()
}

pub fn fig6() -> Result<Vec<Dataset>> {
    let runs = fig6_runs()?;
    let mut cols = vec!["t".to_string()];
    for (v, _) in &runs {
        for c in ["F_singlet", "F_triplet", "F_singlet_density", "F_triplet_density", "F_singlet_drive", "F_triplet_drive"] {
            cols.push(format!("{v}_{c}"));
        }
    }
    let mut d = Dataset::new("fig6", cols);
    for k in 0..runs[0].1.times.len() {
        let mut row = vec![runs[0].1.times[k]];
        for (_, b) in &runs {
            row.extend([b.singlet[k], b.triplet[k], b.singlet_density[k], b.triplet_density[k], b.singlet_drive[k], b.triplet_drive[k]]);
        }
        d.rows.push(row);
    }

    // rate maps over (θ₁, θ₂): (1 - F)/t at t = 25 in the co-rotating frame
    let steps = 11;
    let grid: Vec<(f64, f64)> =
        (0..steps).flat_map(|i| (0..steps).map(move |j| (PI * i as f64 / 10.0, PI * j as f64 / 10.0))).collect();
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&(t1, t2)| {
            let s = fig6_scenario_with(t1, t2, false, 25.0)?;
            let b = bell_series(&s)?;
            let k = b.times.len() - 1;
            let t = b.times[k];
            Ok(vec![t1 / PI, t2 / PI, (1.0 - b.singlet_drive[k]) / t, (1.0 - b.triplet_drive[k]) / t])
        })
        .collect::<Result<_>>()?;
    let mut rates = Dataset::new(
        "fig6_rates",
        ["theta1_over_pi", "theta2_over_pi", "singlet_rate", "triplet_rate"].iter().map(|s| s.to_string()).collect(),
    );
    rates.rows = rows;
    Ok(vec![d, rates])
}
