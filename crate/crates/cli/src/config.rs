//! Experiment configuration files (TOML) and their translation into
//! simulator inputs.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, TAU};

use zforce::analysis_fit::ShotNoise;
use zforce::experiments::{
    default_mode_table, design_ms_gate, design_sz_gate, BesselCurveConfig, BesselScan, ForceDetuning, GateConfig,
    PhaseBasisConfig, QubitKind, SimConfig, SpectatorMode,
};
use zforce::hamiltonians::{
    effective_coupling, rotating_ms_force, rotating_sz_force, DriveParams, Model, RampEnvelope,
};
use zforce::propagator::{displacement_alpha, IntegratorConfig};

use crate::units::{Frequency, Time};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BesselCurve,
    PhaseBasis,
    ParityScan,
    OffsetSweep,
    SpectatorSpectrum,
    SdfTrace,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BesselCurve => "bessel-curve",
            ExperimentKind::PhaseBasis => "phase-basis",
            ExperimentKind::ParityScan => "parity-scan",
            ExperimentKind::OffsetSweep => "offset-sweep",
            ExperimentKind::SpectatorSpectrum => "spectator-spectrum",
            ExperimentKind::SdfTrace => "sdf-trace",
        }
    }

    fn uses_gate(&self) -> bool {
        matches!(self, ExperimentKind::ParityScan | ExperimentKind::OffsetSweep | ExperimentKind::SpectatorSpectrum)
    }
}

/// Either an explicit list or `points` evenly spaced values from `start` to `stop`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid<T> {
    List(Vec<T>),
    Range { start: T, stop: T, points: usize },
}

impl<T> Grid<T> {
    fn resolve(&self, value: impl Fn(&T) -> f64) -> Result<Vec<f64>, CliError> {
        let out = match self {
            Grid::List(v) => v.iter().map(&value).collect::<Vec<_>>(),
            Grid::Range { start, stop, points } => {
                let (a, b) = (value(start), value(stop));
                match points {
                    0 => Vec::new(),
                    1 => vec![a],
                    n => (0..*n).map(|k| a + (b - a) * k as f64 / (*n - 1) as f64).collect(),
                }
            }
        };
        if out.is_empty() {
            return Err(CliError::validation("sweep grid is empty"));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(CliError::validation("sweep grid contains a non-finite value"));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// Gate mode frequency ω_z/2π.
    pub mode_frequency: Frequency,
    /// Lamb-Dicke factor of the gate mode.
    pub eta: f64,
    /// 2Ω/δ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// Tone Rabi frequency Ω/2π.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<Frequency>,
    /// Tone detuning δ/2π.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<Frequency>,
    /// Force detuning δ_g/2π from the gate mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_detuning: Option<Frequency>,
    /// Mean optical phase φ, rad.
    #[serde(default)]
    pub phase: f64,
    /// Half the tone phase difference ζ, rad.
    #[serde(default)]
    pub zeta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub ramp: Time,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self { ramp: Time::try_from("5 us".to_string()).expect("valid default") }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Full,
    FullLab,
    Series,
    Resonant,
    Effective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Harmonic cut-off of the series model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Full, n_max: None }
    }
}

impl ModelConfig {
    pub fn model(&self) -> Result<Model, CliError> {
        match (self.kind, self.n_max) {
            (ModelKind::Series, n) => Ok(Model::Series { n_max: n.unwrap_or(4) }),
            (_, Some(_)) => Err(CliError::validation("model.n_max only applies to the series model")),
            (ModelKind::Full, None) => Ok(Model::Full),
            (ModelKind::FullLab, None) => Ok(Model::FullLab),
            (ModelKind::Resonant, None) => Ok(Model::Resonant),
            (ModelKind::Effective, None) => Ok(Model::Effective),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Rk4,
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub nbar: f64,
    pub fock_dim: usize,
    pub max_fock_dim: usize,
    pub thermal_cutoff: f64,
    /// Fixed step for every pulse; chosen per pulse when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<Time>,
    pub method: MethodKind,
    pub tolerance: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            nbar: sim.nbar,
            fock_dim: sim.fock_dim,
            max_fock_dim: sim.max_fock_dim,
            thermal_cutoff: sim.thermal_cutoff,
            dt_max: None,
            method: MethodKind::Rk4,
            tolerance: 1e-10,
        }
    }
}

impl SimulationConfig {
    pub fn sim(&self) -> Result<SimConfig, CliError> {
        let mut sim = SimConfig {
            integrator: None,
            nbar: self.nbar,
            fock_dim: self.fock_dim,
            max_fock_dim: self.max_fock_dim,
            thermal_cutoff: self.thermal_cutoff,
        };
        match (&self.dt_max, self.method) {
            (Some(dt), method) => {
                let mut cfg = IntegratorConfig::fixed(dt.seconds()).map_err(CliError::from_validation)?;
                if method == MethodKind::Adaptive {
                    cfg = cfg.adaptive(self.tolerance);
                }
                sim = sim.with_integrator(cfg);
            }
            (None, MethodKind::Adaptive) => {
                return Err(CliError::validation("the adaptive method needs simulation.dt_max as its largest step"));
            }
            (None, MethodKind::Rk4) => {}
        }
        sim.validate().map_err(CliError::from_validation)?;
        Ok(sim)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKindConfig {
    SigmaZ,
    Ms,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QubitConfig {
    Optical,
    Metastable,
    Ground,
}

impl QubitConfig {
    pub fn kind(&self) -> QubitKind {
        match self {
            QubitConfig::Optical => QubitKind::Optical,
            QubitConfig::Metastable => QubitKind::Metastable,
            QubitConfig::Ground => QubitKind::Ground,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    pub kind: GateKindConfig,
    pub qubit: QubitConfig,
}

impl Default for GateSection {
    fn default() -> Self {
        Self { kind: GateKindConfig::SigmaZ, qubit: QubitConfig::Optical }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub label: String,
    pub frequency: Frequency,
    pub eta: f64,
    pub participation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub shots: u64,
    pub seed: u64,
}

/// Grids and per-experiment options. Only the grid matching the experiment
/// may be present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Grid<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<Grid<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_phase: Option<Grid<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Grid<Frequency>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<Grid<Frequency>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Grid<Time>>,
    /// Bessel curve: trace length in loops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<f64>,
    /// Bessel curve: durations per trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Bessel curve: loop size |α|_max that sets δ_g when no force detuning is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    /// Bessel curve: lower bound on the chosen δ_g.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_force_detuning: Option<Frequency>,
    /// Phase basis: target |α| of the displaced branch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_target: Option<f64>,
}

/// Provenance written into run manifests; ignored when a manifest is read
/// back as a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestInfo {
    pub version: String,
    pub config_sha256: String,
    pub integrator: String,
    #[serde(default)]
    pub derived: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub drive: DriveConfig,
    #[serde(default)]
    pub envelope: EnvelopeConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<ModeConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    pub sweep: SweepConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

/// Simulator inputs for one run.
#[derive(Clone, Debug)]
pub enum Plan {
    BesselCurve { x: Vec<f64>, cfg: BesselCurveConfig },
    PhaseBasis { phi0: Vec<f64>, sz: DriveParams, ms: DriveParams, cfg: PhaseBasisConfig },
    ParityScan { phases: Vec<f64>, qubit: QubitKind, gate: GateConfig },
    OffsetSweep { offsets: Vec<f64>, gate: GateConfig },
    SpectatorSpectrum { deltas: Vec<f64>, modes: Vec<SpectatorMode>, gate: GateConfig },
    SdfTrace { durations: Vec<f64>, params: DriveParams, model: Model, t_ramp: f64, noise: Option<ShotNoise> },
}

#[derive(Clone, Debug)]
pub struct Resolved {
    pub plan: Plan,
    pub sim: SimConfig,
    /// Human-readable derived quantities.
    pub derived: Vec<String>,
}

const REL_TOL: f64 = 1e-6;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn positive(f: &Frequency, name: &str) -> Result<f64, CliError> {
    if f.hz() > 0.0 {
        Ok(f.rad_per_s())
    } else {
        Err(CliError::validation(format!("drive.{name} must be > 0, got {f}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {}", e.message())))
    }

    /// The config with run provenance removed.
    pub fn without_manifest(&self) -> Self {
        Self { manifest: None, ..self.clone() }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.name().to_string())
    }

    fn check_sections(&self) -> Result<(), CliError> {
        let s = &self.sweep;
        let grids: [(&str, bool, bool); 6] = [
            ("x", s.x.is_some(), self.experiment == ExperimentKind::BesselCurve),
            ("phi0", s.phi0.is_some(), self.experiment == ExperimentKind::PhaseBasis),
            ("analysis_phase", s.analysis_phase.is_some(), self.experiment == ExperimentKind::ParityScan),
            ("offset", s.offset.is_some(), self.experiment == ExperimentKind::OffsetSweep),
            ("detuning", s.detuning.is_some(), self.experiment == ExperimentKind::SpectatorSpectrum),
            ("duration", s.duration.is_some(), self.experiment == ExperimentKind::SdfTrace),
        ];
        for (name, present, wanted) in grids {
            if present && !wanted {
                return Err(CliError::validation(format!("sweep.{name} does not apply to {}", self.experiment.name())));
            }
            if wanted && !present {
                return Err(CliError::validation(format!("{} needs sweep.{name}", self.experiment.name())));
            }
        }
        let bessel_only = [
            ("loops", s.loops.is_some()),
            ("points", s.points.is_some()),
            ("alpha_max", s.alpha_max.is_some()),
            ("min_force_detuning", s.min_force_detuning.is_some()),
        ];
        if self.experiment != ExperimentKind::BesselCurve {
            if let Some((name, _)) = bessel_only.iter().find(|(_, p)| *p) {
                return Err(CliError::validation(format!("sweep.{name} only applies to bessel-curve")));
            }
        }
        if s.alpha_target.is_some() && self.experiment != ExperimentKind::PhaseBasis {
            return Err(CliError::validation("sweep.alpha_target only applies to phase-basis"));
        }
        if self.gate.is_some() && !self.experiment.uses_gate() {
            return Err(CliError::validation(format!("[gate] does not apply to {}", self.experiment.name())));
        }
        if self.modes.is_some() && self.experiment != ExperimentKind::SpectatorSpectrum {
            return Err(CliError::validation("[[modes]] only applies to spectator-spectrum"));
        }
        if self.noise.is_some() && !matches!(self.experiment, ExperimentKind::BesselCurve | ExperimentKind::SdfTrace) {
            return Err(CliError::validation("[noise] only applies to bessel-curve and sdf-trace"));
        }
        if let Some(n) = &self.noise {
            if n.shots == 0 {
                return Err(CliError::validation("noise.shots must be > 0"));
            }
        }
        Ok(())
    }

    fn check_drive_basics(&self) -> Result<(f64, f64), CliError> {
        let d = &self.drive;
        let wz = positive(&d.mode_frequency, "mode_frequency")?;
        if !(d.eta > 0.0 && d.eta < 1.0) {
            return Err(CliError::validation(format!("drive.eta must lie in (0, 1), got {}", d.eta)));
        }
        if let Some(x) = d.x {
            if !(x > 0.0 && x.is_finite()) {
                return Err(CliError::validation(format!("drive.x must be positive, got {x}")));
            }
        }
        if !(d.phase.is_finite() && d.zeta.is_finite()) {
            return Err(CliError::validation("drive.phase and drive.zeta must be finite"));
        }
        let t_ramp = self.envelope.ramp.seconds();
        if !(t_ramp >= 0.0) {
            return Err(CliError::validation("envelope.ramp must be >= 0"));
        }
        Ok((wz, t_ramp))
    }

    /// Tone detuning δ and Rabi frequency Ω for a drive whose force sits at
    /// δ_g = ω_z − order·δ. Returns `None` for δ when it must be solved.
    fn resolve_tones(&self, wz: f64, order: f64) -> Result<(Option<f64>, Option<f64>), CliError> {
        let d = &self.drive;
        let from_dg = d.force_detuning.as_ref().map(|f| (wz - f.rad_per_s()) / order);
        let delta = match (&d.detuning, from_dg) {
            (Some(det), Some(from)) => {
                let given = positive(det, "detuning")?;
                if !close(given, from) {
                    return Err(CliError::validation(format!(
                        "drive.detuning {det} is inconsistent with mode_frequency and force_detuning (expected {:.6} kHz)",
                        from / TAU / 1e3
                    )));
                }
                Some(given)
            }
            (Some(det), None) => Some(positive(det, "detuning")?),
            (None, from) => from,
        };
        if let Some(delta) = delta {
            if !(delta > 0.0) {
                return Err(CliError::validation("force_detuning leaves a non-positive tone detuning"));
            }
        }
        let omega = match (&d.rabi, d.x, delta) {
            (Some(r), Some(x), Some(delta)) => {
                let given = positive(r, "rabi")?;
                if !close(given, 0.5 * x * delta) {
                    return Err(CliError::validation("drive.rabi is inconsistent with drive.x and the detuning"));
                }
                Some(given)
            }
            (Some(r), _, _) => Some(positive(r, "rabi")?),
            (None, Some(x), Some(delta)) => Some(0.5 * x * delta),
            (None, _, _) => None,
        };
        Ok((delta, omega))
    }

    fn params(&self, wz: f64, delta: f64, omega: f64, coupling: Vec<f64>, order: f64) -> Result<DriveParams, CliError> {
        let p = DriveParams {
            omega,
            delta,
            eta: self.drive.eta,
            omega_z: wz,
            delta_g: wz - order * delta,
            phi: self.drive.phase,
            zeta: self.drive.zeta,
            coupling,
        };
        p.validate().map_err(CliError::from_validation)?;
        Ok(p)
    }

    fn resolve_gate(&self, wz: f64, t_ramp: f64, model: Model) -> Result<(GateConfig, Vec<String>), CliError> {
        let section = self.gate.clone().unwrap_or_default();
        let coupling = match self.experiment {
            ExperimentKind::ParityScan => QubitKind::Optical.coupling(),
            _ => section.qubit.kind().coupling(),
        };
        let order = if section.kind == GateKindConfig::Ms { 1.0 } else { 2.0 };
        let (delta, omega) = self.resolve_tones(wz, order)?;
        let gate = match (delta, omega, self.drive.x) {
            (Some(delta), Some(omega), _) => {
                let p = self.params(wz, delta, omega, coupling, order)?;
                match section.kind {
                    GateKindConfig::SigmaZ => GateConfig::sigma_z(p, t_ramp, model),
                    GateKindConfig::Ms => GateConfig::ms(p, t_ramp, model),
                }
            }
            (None, None, Some(x)) => match section.kind {
                GateKindConfig::SigmaZ => design_sz_gate(wz, x, self.drive.eta, coupling, t_ramp, model),
                GateKindConfig::Ms => design_ms_gate(wz, x, self.drive.eta, coupling, t_ramp, model),
            },
            _ => {
                return Err(CliError::validation(
                    "gate drive needs either x alone (detuning solved for a maximally entangling gate) or a detuning and a strength",
                ))
            }
        }
        .map_err(CliError::from_validation)?;
        let gate = gate.with_phi(self.drive.phase);
        let derived = gate_report(&gate)?;
        Ok((gate, derived))
    }

    /// Validate everything and build the simulator inputs.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        self.check_sections()?;
        let (wz, t_ramp) = self.check_drive_basics()?;
        let sim = self.simulation.sim()?;
        let model = self.model.model()?;
        let s = &self.sweep;
        let mut derived = vec![format!("mode_frequency = {:.6} MHz", wz / TAU / 1e6)];

        let plan = match self.experiment {
            ExperimentKind::BesselCurve => {
                let x = s.x.as_ref().unwrap().resolve(|v| *v)?;
                if x.iter().any(|v| *v < 0.0) {
                    return Err(CliError::validation("sweep.x values must be >= 0"));
                }
                if self.drive.x.is_some() || self.drive.detuning.is_some() {
                    return Err(CliError::validation(
                        "bessel-curve takes x from the sweep; drop drive.x and drive.detuning",
                    ));
                }
                let scan = match (&self.drive.rabi, &self.drive.force_detuning) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::validation(
                            "bessel-curve fixes either drive.rabi or drive.force_detuning",
                        ))
                    }
                    (Some(r), None) => BesselScan::FixedRabi { omega: positive(r, "rabi")? },
                    (None, Some(f)) => BesselScan::FixedDetuning(ForceDetuning::Fixed(f.rad_per_s())),
                    (None, None) => {
                        let alpha_max = s.alpha_max.unwrap_or(1.0);
                        let min = s.min_force_detuning.as_ref().map_or(TAU * 2e3, |f| f.rad_per_s());
                        if !(alpha_max > 0.0) || !(min > 0.0) {
                            return Err(CliError::validation(
                                "sweep.alpha_max and sweep.min_force_detuning must be > 0",
                            ));
                        }
                        BesselScan::FixedDetuning(ForceDetuning::LoopSize { alpha_max, min_delta_g: min })
                    }
                };
                let mut cfg = BesselCurveConfig::new(wz, self.drive.eta, t_ramp);
                cfg.scan = scan;
                cfg.model = model;
                if let Some(n) = s.points {
                    if n < 8 {
                        return Err(CliError::validation("sweep.points must be >= 8 for the fit"));
                    }
                    cfg.n_durations = n;
                }
                if let Some(l) = s.loops {
                    if !(l > 0.0) {
                        return Err(CliError::validation("sweep.loops must be > 0"));
                    }
                    cfg.loops = l;
                }
                cfg.noise = self.noise.as_ref().map(|n| ShotNoise { shots: n.shots, seed: n.seed });
                derived.push(format!("x from {} to {} ({} points)", x[0], x[x.len() - 1], x.len()));
                Plan::BesselCurve { x, cfg }
            }
            ExperimentKind::PhaseBasis => {
                let phi0 = s.phi0.as_ref().unwrap().resolve(|v| *v)?;
                let (delta, omega) = self.resolve_tones(wz, 2.0)?;
                let delta = delta.unwrap_or(0.5 * wz);
                let omega = omega.ok_or_else(|| CliError::validation("phase-basis needs drive.x or drive.rabi"))?;
                let sz = self.params(wz, delta, omega, vec![1.0], 2.0)?;
                let dg = sz.sz_detuning();
                let ms = self.params(wz, wz - dg, omega, vec![1.0], 1.0)?;
                let mut cfg = PhaseBasisConfig { t_ramp, model, ..PhaseBasisConfig::default() };
                if let Some(a) = s.alpha_target {
                    if !(a > 0.0) {
                        return Err(CliError::validation("sweep.alpha_target must be > 0"));
                    }
                    cfg.alpha_target = a;
                }
                derived.extend(drive_report("sigma_z", &sz));
                derived.extend(drive_report("ms", &ms));
                Plan::PhaseBasis { phi0, sz, ms, cfg }
            }
            ExperimentKind::ParityScan => {
                let phases = s.analysis_phase.as_ref().unwrap().resolve(|v| *v)?;
                let (gate, d) = self.resolve_gate(wz, t_ramp, model)?;
                derived.extend(d);
                let qubit = self.gate.clone().unwrap_or_default().qubit.kind();
                Plan::ParityScan { phases, qubit, gate }
            }
            ExperimentKind::OffsetSweep => {
                let offsets = s.offset.as_ref().unwrap().resolve(Frequency::rad_per_s)?;
                let (gate, d) = self.resolve_gate(wz, t_ramp, model)?;
                derived.extend(d);
                Plan::OffsetSweep { offsets, gate }
            }
            ExperimentKind::SpectatorSpectrum => {
                let deltas = s.detuning.as_ref().unwrap().resolve(Frequency::rad_per_s)?;
                if deltas.iter().any(|d| *d <= 0.0) {
                    return Err(CliError::validation("sweep.detuning values must be > 0"));
                }
                let (gate, d) = self.resolve_gate(wz, t_ramp, model)?;
                derived.extend(d);
                let modes = match &self.modes {
                    None => default_mode_table(self.drive.eta * std::f64::consts::SQRT_2),
                    Some(list) if list.is_empty() => return Err(CliError::validation("[[modes]] is empty")),
                    Some(list) => list
                        .iter()
                        .map(|m| {
                            if !(m.frequency.hz() > 0.0 && m.eta > 0.0 && m.eta < 1.0 && m.participation.len() == 2) {
                                return Err(CliError::validation(format!(
                                    "mode `{}` needs frequency > 0, eta in (0, 1) and two participations",
                                    m.label
                                )));
                            }
                            Ok(SpectatorMode {
                                label: m.label.clone(),
                                frequency: m.frequency.rad_per_s(),
                                eta: m.eta,
                                participation: m.participation.clone(),
                            })
                        })
                        .collect::<Result<_, _>>()?,
                };
                Plan::SpectatorSpectrum { deltas, modes, gate }
            }
            ExperimentKind::SdfTrace => {
                let durations = s.duration.as_ref().unwrap().resolve(Time::seconds)?;
                if durations.iter().any(|t| *t < 0.0) {
                    return Err(CliError::validation("sweep.duration values must be >= 0"));
                }
                let (delta, omega) = self.resolve_tones(wz, 2.0)?;
                let (delta, omega) = match (delta, omega) {
                    (Some(d), Some(o)) => (d, o),
                    _ => {
                        return Err(CliError::validation(
                            "sdf-trace needs a detuning (or force_detuning) and x or rabi",
                        ))
                    }
                };
                let params = self.params(wz, delta, omega, vec![1.0], 2.0)?;
                derived.extend(drive_report("sigma_z", &params));
                let noise = self.noise.as_ref().map(|n| ShotNoise { shots: n.shots, seed: n.seed });
                Plan::SdfTrace { durations, params, model, t_ramp, noise }
            }
        };
        Ok(Resolved { plan, sim, derived })
    }
}

fn drive_report(label: &str, p: &DriveParams) -> Vec<String> {
    vec![format!(
        "{label}: x = {:.4}, rabi = {:.4} kHz, detuning = {:.4} kHz, force detuning = {:.4} kHz, omega_eff = {:.4} kHz",
        p.bessel_arg(),
        p.omega / TAU / 1e3,
        p.delta / TAU / 1e3,
        if label == "ms" { p.ms_detuning() } else { p.sz_detuning() } / TAU / 1e3,
        if label == "ms" { 2.0 * rotating_ms_force(p).0 } else { effective_coupling(p) } / TAU / 1e3,
    )]
}

/// Largest |α| of the rotating-wave displacement over one pulse.
fn alpha_max(env: &RampEnvelope, amp: f64, detuning: f64) -> f64 {
    let n = 400;
    (0..=n)
        .map(|k| env.t_total() * k as f64 / n as f64)
        .filter_map(|t| displacement_alpha(env, amp, detuning, t).ok())
        .map(|a| a.norm())
        .fold(0.0, f64::max)
}

fn gate_report(gate: &GateConfig) -> Result<Vec<String>, CliError> {
    let p = gate.params();
    let env = &gate.pulse.envelope;
    let dg = gate.force_detuning();
    let c = p.coupling.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (label, amp, loops) = match gate.kind {
        zforce::experiments::GateKind::SigmaZ => ("sigma_z", rotating_sz_force(p).0, 2.0),
        zforce::experiments::GateKind::Ms => ("ms", rotating_ms_force(p).0, 1.0),
    };
    let chi = gate.predicted_phase().map_err(CliError::from_validation)?;
    Ok(vec![
        drive_report(label, p).remove(0),
        format!(
            "gate: {} loop(s), {}pi/delta_g = {:.3} us, duration with ramps = {:.3} us",
            loops,
            2.0 * loops,
            loops * TAU / dg.abs() * 1e6,
            gate.gate_duration() * 1e6
        ),
        format!(
            "gate: |alpha|max = {:.4}, phase chi = {:.5} (pi/4 = {:.5})",
            c * alpha_max(env, amp, dg),
            chi,
            FRAC_PI_4
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    const GATE: &str = r#"
experiment = "parity-scan"

[drive]
mode_frequency = "1.2 MHz"
eta = 0.0382
x = 1.6

[model]
kind = "effective"

[sweep]
analysis_phase = { start = 0.0, stop = 3.0, points = 8 }
"#;

    #[test]
    fn parses_and_resolves_a_gate() {
        let cfg = ExperimentConfig::parse(GATE).unwrap();
        let r = cfg.resolve().unwrap();
        let Plan::ParityScan { phases, gate, .. } = r.plan else { panic!("wrong plan") };
        assert_eq!(phases.len(), 8);
        assert!((gate.predicted_phase().unwrap().abs() - FRAC_PI_4).abs() < 1e-9);
        assert!(r.derived.iter().any(|l| l.contains("4pi/delta_g")));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = GATE.replace("eta = 0.0382", "eta = 0.0382\nspeed = 3");
        assert!(ExperimentConfig::parse(&text).unwrap_err().to_string().contains("speed"));
    }

    #[test]
    fn frequencies_need_units() {
        let text = GATE.replace("\"1.2 MHz\"", "\"1200000\"");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn inconsistent_detunings_are_reported() {
        let text = GATE.replace("x = 1.6", "x = 1.6\ndetuning = \"590 kHz\"\nforce_detuning = \"30 kHz\"");
        let err = ExperimentConfig::parse(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("inconsistent"), "{err}");
        let ok = text.replace("590 kHz", "585 kHz");
        assert!(ExperimentConfig::parse(&ok).unwrap().resolve().is_ok());
    }

    #[test]
    fn empty_grid_is_reported() {
        let text = GATE.replace("points = 8", "points = 0");
        let err = ExperimentConfig::parse(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("empty"));
        let text = GATE.replace("{ start = 0.0, stop = 3.0, points = 8 }", "[]");
        assert!(ExperimentConfig::parse(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn wrong_grid_for_experiment() {
        let text = GATE.replace("analysis_phase", "phi0");
        let err = ExperimentConfig::parse(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("phi0"));
    }

    #[test]
    fn negative_eta_is_rejected() {
        let text = GATE.replace("eta = 0.0382", "eta = -0.05");
        assert!(matches!(ExperimentConfig::parse(&text).unwrap().resolve(), Err(CliError::Validation(_))));
    }

    #[test]
    fn serialization_round_trip() {
        let cfg = ExperimentConfig::parse(GATE).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_toml(), again.to_toml());
    }
}
