//! Scenario configuration files (TOML or JSON) and their translation into
//! engine scenarios.

use std::f64::consts::PI;
use std::path::Path;

use decoctl_core::bath::{
    BathModel, ChannelLayout, CorrelatedGaussianDecayBath, ExponentialDephasingBath, GaussianDipoleBath, MemoryWindow, TabulatedBath,
};
use decoctl_core::decay::{dicke_coefficients, amplitudes_from_mixing, ConditionTolerances, DecayScenario, PhaseConvention, TimeGrid};
use decoctl_core::dephasing::{bell_vector, BinaryBasisIndex, DephasingScenario, FlipSign};
use decoctl_core::linalg::CVector;
use decoctl_core::modulation::{ChannelModulation, DrivingEnvelope, ModulationSchedule, StarkShiftSchedule};
use decoctl_core::optimizer::{FreeParameter, Objective, SearchSettings};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Decay,
    Dephasing,
    Optimize,
    Steer,
    Sweep,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub phase_convention: PhaseConvention,
    #[serde(default)]
    pub flip_sign: FlipSign,
    #[serde(default)]
    pub systems: Option<SystemsConfig>,
    pub bath: BathConfig,
    #[serde(default)]
    pub modulation: ModulationConfig,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Option<TolerancesConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Level energies: either explicit (flat channel order) or `omega0 + n·delta`
/// for level `n` of every system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemsConfig {
    #[serde(default)]
    pub energies: Option<Vec<f64>>,
    #[serde(default)]
    pub omega0: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum BathConfig {
    GaussianDipole {
        /// Full coupling matrix; overrides `coupling_diag`/`coupling_offdiag`.
        #[serde(default)]
        coupling: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        coupling_diag: Option<f64>,
        #[serde(default)]
        coupling_offdiag: Option<f64>,
        dipole_angles_over_pi: Vec<f64>,
        correlation_time: f64,
    },
    CorrelatedGaussian {
        gamma: f64,
        correlation_times: Vec<f64>,
        r0: f64,
        /// Defaults to a ring of radius `r0`.
        #[serde(default)]
        positions: Option<Vec<[f64; 3]>>,
    },
    ExponentialDephasing {
        gamma: f64,
        correlation_times: Vec<f64>,
        /// Defaults to qubits on a line, `separation` apart.
        #[serde(default)]
        positions: Option<Vec<[f64; 3]>>,
        #[serde(default)]
        separation: Option<f64>,
        #[serde(default)]
        decorrelated: bool,
    },
    Tabulated {
        levels: Vec<usize>,
        grid: Vec<f64>,
        /// `values[k][a][b] = [re, im]` of `Φ_ab(grid[k])`.
        values: Vec<Vec<Vec<Complex64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(&self, n: usize, key: &str) -> Result<Vec<f64>, CliError> {
        match self {
            OneOrMany::One(v) => Ok(vec![*v; n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(CliError::validation(format!("`modulation.{key}` has {} entries, expected {n}", v.len()))),
        }
    }
}

/// Per-channel values; a scalar applies to every channel. Omitting `tau`
/// leaves the channels unpulsed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationConfig {
    #[serde(default)]
    pub tau: Option<OneOrMany>,
    #[serde(default)]
    pub theta_over_pi: Option<OneOrMany>,
    #[serde(default)]
    pub stark_rate: Option<OneOrMany>,
    #[serde(default)]
    pub drive_amplitude: Option<OneOrMany>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Explicit amplitudes (decay: per channel; dephasing: 2^M state vector).
    Amplitudes { re: Vec<f64>, #[serde(default)] im: Option<Vec<f64>> },
    /// `D^M_l`, one-based `l`.
    Dicke { l: usize },
    /// From mixing parameters `c` and decay parameter `A` (reference channel `reference`).
    Mixing { c: Vec<f64>, #[serde(default = "one")] decay: f64, #[serde(default)] reference: usize },
    /// Binary basis state `l` (one-based; qubit 1 is the most significant bit of `l - 1`, 0 = ↑).
    Basis { l: usize },
    /// Bell state `B_l`, `l` in 1..=4.
    Bell { l: usize },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Auto,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_end: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub memory: Option<MemoryKind>,
    /// Fixed memory window; overrides `memory`.
    #[serde(default)]
    pub memory_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    pub offdiag: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Comparison times; defaults to five evenly spaced points.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Relative tolerance (decay) or number of standard errors (dephasing).
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_realizations() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub objective: Objective<f64>,
    pub free: Vec<FreeParameter<f64>>,
    #[serde(default)]
    pub search: SearchSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Mean `θ/τ` grid.
    pub powers: Vec<f64>,
    #[serde(default)]
    pub search: SearchSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_name")]
    pub name: String,
    /// Write every `stride`-th time point.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), name: default_name(), stride: default_stride() }
    }
}

fn default_dir() -> String {
    "out".into()
}

fn default_name() -> String {
    "run".into()
}

fn default_stride() -> usize {
    1
}

/// Parses a config; the format follows the extension (`.json`, otherwise TOML).
pub fn parse_config(text: &str, path: &Path) -> Result<ScenarioConfig, CliError> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let cfg: ScenarioConfig = if is_json {
        serde_json::from_str(text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
    };
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path)
}

/// Applies `DECOCTL_SEED` when set.
pub fn apply_seed_override(cfg: &mut ScenarioConfig, env: Option<String>) -> Result<(), CliError> {
    if let Some(v) = env {
        let seed = v.trim().parse::<u64>().map_err(|_| CliError::validation(format!("DECOCTL_SEED must be an unsigned integer, got `{v}`")))?;
        cfg.seed = Some(seed);
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn channels(&self, layout: &ChannelLayout) -> usize {
        layout.len()
    }

    pub fn build_bath(&self) -> Result<BathModel<f64>, CliError> {
        let b = match &self.bath {
            BathConfig::GaussianDipole { coupling, coupling_diag, coupling_offdiag, dipole_angles_over_pi, correlation_time } => {
                let angles: Vec<f64> = dipole_angles_over_pi.iter().map(|a| a * PI).collect();
                let g = match coupling {
                    Some(m) => GaussianDipoleBath::new(m.clone(), angles, *correlation_time),
                    None => GaussianDipoleBath::uniform(
                        coupling_diag.ok_or_else(|| CliError::validation("`bath.coupling_diag` (or `bath.coupling`) is required"))?,
                        coupling_offdiag.unwrap_or(0.0),
                        angles,
                        *correlation_time,
                    ),
                };
                BathModel::GaussianDipole(g.map_err(|e| CliError::core("bath", e))?)
            }
            BathConfig::CorrelatedGaussian { gamma, correlation_times, r0, positions } => {
                let pos = positions.clone().unwrap_or_else(|| CorrelatedGaussianDecayBath::ring_positions(correlation_times.len(), *r0));
                BathModel::CorrelatedGaussian(
                    CorrelatedGaussianDecayBath::new(*gamma, correlation_times.clone(), *r0, pos).map_err(|e| CliError::core("bath", e))?,
                )
            }
            BathConfig::ExponentialDephasing { gamma, correlation_times, positions, separation, decorrelated } => {
                let sep = separation.unwrap_or(1.0);
                let pos = positions.clone().unwrap_or_else(|| (0..correlation_times.len()).map(|j| [j as f64 * sep, 0.0, 0.0]).collect());
                let mut bath = ExponentialDephasingBath::new(*gamma, correlation_times.clone(), pos).map_err(|e| CliError::core("bath", e))?;
                if *decorrelated {
                    bath = bath.decorrelated();
                }
                BathModel::ExponentialDephasing(bath)
            }
            BathConfig::Tabulated { levels, grid, values } => {
                let layout = ChannelLayout::new(levels.clone()).map_err(|e| CliError::core("bath", e))?;
                BathModel::Tabulated(TabulatedBath::new(layout, grid.clone(), values.clone()).map_err(|e| CliError::core("bath", e))?)
            }
        };
        Ok(b)
    }

    pub fn build_modulation(&self, n: usize) -> Result<ModulationSchedule<f64>, CliError> {
        let m = &self.modulation;
        let tau = m.tau.as_ref().map(|v| v.expand(n, "tau")).transpose()?;
        let theta = m.theta_over_pi.as_ref().map(|v| v.expand(n, "theta_over_pi")).transpose()?;
        let stark = m.stark_rate.as_ref().map(|v| v.expand(n, "stark_rate")).transpose()?;
        let drive = m.drive_amplitude.as_ref().map(|v| v.expand(n, "drive_amplitude")).transpose()?;
        if theta.is_some() && tau.is_none() {
            return Err(CliError::validation("`modulation.theta_over_pi` needs `modulation.tau`"));
        }
        let mut channels = Vec::with_capacity(n);
        for a in 0..n {
            let mut ch = match &tau {
                Some(t) => {
                    let th = theta.as_ref().map_or(PI, |v| v[a] * PI);
                    ChannelModulation::pulses(t[a], th).map_err(|e| CliError::core("modulation", e))?
                }
                None => ChannelModulation::unmodulated(),
            };
            if let Some(s) = &stark {
                ch = ch.with_stark(StarkShiftSchedule::constant(s[a]));
            }
            if let Some(d) = &drive {
                ch = ch.with_drive(DrivingEnvelope::constant(d[a]));
            }
            channels.push(ch);
        }
        ModulationSchedule::new(channels).map_err(|e| CliError::core("modulation", e))
    }

    fn memory(&self) -> MemoryWindow<f64> {
        match (&self.grid.memory_time, &self.grid.memory) {
            (Some(t), _) => MemoryWindow::Fixed(*t),
            (None, Some(MemoryKind::Full)) => MemoryWindow::Full,
            _ => MemoryWindow::Auto,
        }
    }

    fn energies(&self, layout: &ChannelLayout) -> Result<Vec<f64>, CliError> {
        let s = self.systems.as_ref().ok_or_else(|| CliError::validation("`systems` block is required for decay scenarios"))?;
        let n = self.channels(layout);
        match (&s.energies, s.omega0) {
            (Some(e), _) if e.len() == n => Ok(e.clone()),
            (Some(e), _) => Err(CliError::validation(format!("`systems.energies` has {} entries, the bath has {n} channels", e.len()))),
            (None, Some(w0)) => {
                let d = s.delta.unwrap_or(0.0);
                Ok((0..n).map(|f| w0 + d * layout.channel(f).level as f64).collect())
            }
            (None, None) => Err(CliError::validation("`systems` needs `energies` or `omega0`")),
        }
    }

    fn grid(&self, bath: &BathModel<f64>, modulation: &ModulationSchedule<f64>) -> Result<TimeGrid<f64>, CliError> {
        let dt = self.grid.dt.unwrap_or_else(|| TimeGrid::default_step(bath, modulation));
        TimeGrid::new(self.grid.t_end, dt).map_err(|e| CliError::core("grid", e))
    }

    pub fn decay_scenario(&self) -> Result<DecayScenario<f64>, CliError> {
        let bath = self.build_bath()?;
        let layout = bath.layout();
        let n = layout.len();
        let modulation = self.build_modulation(n)?;
        let energies = self.energies(&layout)?;
        let initial = match self.initial.as_ref().ok_or_else(|| CliError::validation("`initial` block is required"))? {
            InitialConfig::Amplitudes { re, im } => complex_vec(re, im.as_deref(), n, "initial")?,
            InitialConfig::Dicke { l } => {
                if *l == 0 || *l > n {
                    return Err(CliError::validation(format!("`initial.l` must be in 1..={n}")));
                }
                dicke_coefficients(n, *l)
            }
            InitialConfig::Mixing { c, decay, reference } => {
                if c.len() != n || *reference >= n {
                    return Err(CliError::validation(format!("`initial.c` needs {n} entries and `initial.reference` < {n}")));
                }
                let c: Vec<Complex64> = c.iter().map(|x| Complex64::new(*x, 0.0)).collect();
                amplitudes_from_mixing(&c, Complex64::new(*decay, 0.0), *reference).map_err(|e| CliError::core("initial", e))?
            }
            InitialConfig::Basis { .. } | InitialConfig::Bell { .. } => {
                return Err(CliError::validation("`initial.kind` basis/bell applies to dephasing scenarios"));
            }
        };
        let grid = self.grid(&bath, &modulation)?;
        let mut s = DecayScenario {
            layout,
            energies,
            bath,
            modulation,
            initial,
            grid,
            memory: self.memory(),
            phase_convention: self.phase_convention,
            tolerances: self.tolerances.as_ref().map_or_else(ConditionTolerances::default, |t| ConditionTolerances { offdiag: t.offdiag, rate: t.rate }),
        };
        s.validate().map_err(|e| CliError::core("scenario", e))?;
        s.phase_convention = self.phase_convention;
        Ok(s)
    }

    pub fn dephasing_scenario(&self) -> Result<DephasingScenario<f64>, CliError> {
        let bath = self.build_bath()?;
        let n = bath.layout().len();
        let modulation = self.build_modulation(n)?;
        let grid = self.grid(&bath, &modulation)?;
        let s = DephasingScenario { bath, modulation, grid, memory: self.memory(), flip_sign: self.flip_sign };
        s.validate().map_err(|e| CliError::core("scenario", e))?;
        Ok(s)
    }

    /// Initial state of a dephasing run and, for Bell states, its index.
    pub fn dephasing_initial(&self, m: usize) -> Result<(CVector<f64>, DephasingInitial), CliError> {
        let dim = 1usize << m;
        match self.initial.as_ref() {
            None => {
                let mut v = CVector::zeros(dim);
                v[0] = Complex64::new(1.0, 0.0);
                Ok((v, DephasingInitial::Basis(1)))
            }
            Some(InitialConfig::Basis { l }) => {
                let idx = BinaryBasisIndex::new(m, *l).map_err(|e| CliError::core("initial", e))?;
                let mut v = CVector::zeros(dim);
                v[idx.offset()] = Complex64::new(1.0, 0.0);
                Ok((v, DephasingInitial::Basis(*l)))
            }
            Some(InitialConfig::Bell { l }) => {
                if m != 2 {
                    return Err(CliError::validation("`initial.kind = bell` needs two qubits"));
                }
                Ok((bell_vector(*l).map_err(|e| CliError::core("initial", e))?, DephasingInitial::Bell(*l)))
            }
            Some(InitialConfig::Amplitudes { re, im }) => {
                let v = complex_vec(re, im.as_deref(), dim, "initial")?;
                let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm <= 0.0 {
                    return Err(CliError::validation("`initial` state vector is zero"));
                }
                Ok((v.iter().map(|z| z / norm).collect(), DephasingInitial::Vector))
            }
            Some(_) => Err(CliError::validation("`initial.kind` for dephasing must be basis, bell or amplitudes")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DephasingInitial {
    Basis(usize),
    Bell(usize),
    Vector,
}

fn complex_vec(re: &[f64], im: Option<&[f64]>, n: usize, key: &str) -> Result<Vec<Complex64>, CliError> {
    if re.len() != n || im.is_some_and(|v| v.len() != n) {
        return Err(CliError::validation(format!("`{key}.re`/`{key}.im` must have {n} entries")));
    }
    Ok((0..n).map(|i| Complex64::new(re[i], im.map_or(0.0, |v| v[i]))).collect())
}
