//! Pulse sequences and the sweeps built on them.
//!
//! Single-qubit pulses are ideal instantaneous rotations. SDF pulses run on
//! a global clock that starts at zero with the first segment, so the tone
//! phases stay continuous across the sequence; the envelope of each pulse
//! runs on its own local time.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::algebra::{global_rotation, rotation, HilbertLayout};
use crate::error::{Error, Result};
use crate::hamiltonians::{carrier_frame_unitary, rotating_sz_force, sdf_generator, DriveParams, Model, RampEnvelope};
use crate::propagator::{propagate, Ensemble, IntegratorConfig, SpinMotionState};

mod gate;
mod sweeps;

pub use gate::{
    analysis_phases, bell_fidelity, design_ms_gate, design_sz_gate, fit_parity, parity, parity_scan, GateConfig,
    GateKind, ParityFit,
};
pub use sweeps::{
    default_mode_table, ramsey_trace, spectator_markers, spectator_spectrum, sweep_bessel_curve, sweep_parity,
    sweep_phase_basis, sweep_qubit_offset, BesselCurveConfig, BesselScan, ForceDetuning, Marker, PhaseBasisConfig,
    QubitKind, SpectatorMode,
};

/// Wrap an angle into [0, 2π).
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// One SDF pulse; its duration is the envelope length.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfPulse {
    pub params: DriveParams,
    pub envelope: RampEnvelope,
    pub model: Model,
    /// Qubit frequency offset Δ (rad/s) present during the pulse.
    pub offset: f64,
}

impl SdfPulse {
    pub fn new(params: DriveParams, envelope: RampEnvelope, model: Model) -> Self {
        Self { params, envelope, model, offset: 0.0 }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.params.zeta = zeta;
        self
    }

    pub fn duration(&self) -> f64 {
        self.envelope.t_total()
    }

    /// Step size used when no integrator is configured explicitly.
    pub fn default_integrator(&self) -> IntegratorConfig {
        let p = &self.params;
        let mut dt = match self.model {
            Model::Effective => {
                let mut periods = vec![self.duration() / 4.0];
                if p.sz_detuning() != 0.0 {
                    periods.push(TAU / p.sz_detuning().abs());
                }
                if self.envelope.t_ramp() > 0.0 {
                    periods.push(4.0 * self.envelope.t_ramp());
                }
                let (amp, _) = rotating_sz_force(p);
                if amp > 0.0 {
                    periods.push(TAU / amp);
                }
                periods.into_iter().fold(f64::INFINITY, f64::min) / IntegratorConfig::POINTS_PER_PERIOD
            }
            _ => IntegratorConfig::for_frequencies(p.omega_z, p.delta).dt_max,
        };
        if self.offset != 0.0 {
            // The offset rotation is the fastest phase in the effective frame.
            dt = dt.min(TAU / self.offset.abs() / (4.0 * IntegratorConfig::POINTS_PER_PERIOD));
        }
        IntegratorConfig::for_frequencies(p.omega_z, p.delta).with_dt(dt)
    }
}

/// Element of a [`PulseSequence`].
#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    HalfPi {
        phase: f64,
    },
    Pi {
        phase: f64,
    },
    Sdf(SdfPulse),
    /// π/2 pulse with a scanned phase, appended for parity analysis.
    Analysis {
        phase: f64,
    },
    Wait {
        duration: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Sdf(p) => p.duration(),
            Segment::Wait { duration } => *duration,
            _ => 0.0,
        }
    }
}

/// ζ for a second pulse starting at `t2` that keeps the rotating σ_z force
/// phase δ_g t + 2ζ continuous with a first pulse that had `zeta1`.
pub fn phase_matched_zeta(zeta1: f64, delta_g: f64, t2: f64) -> f64 {
    wrap_phase(zeta1 - 0.5 * delta_g * t2)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PulseSequence {
    segments: Vec<Segment>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn half_pi(mut self, phase: f64) -> Self {
        self.segments.push(Segment::HalfPi { phase: wrap_phase(phase) });
        self
    }

    pub fn pi(mut self, phase: f64) -> Self {
        self.segments.push(Segment::Pi { phase: wrap_phase(phase) });
        self
    }

    pub fn sdf(mut self, pulse: SdfPulse) -> Self {
        self.segments.push(Segment::Sdf(pulse));
        self
    }

    pub fn analysis(mut self, phase: f64) -> Self {
        self.segments.push(Segment::Analysis { phase: wrap_phase(phase) });
        self
    }

    pub fn wait(mut self, duration: f64) -> Self {
        self.segments.push(Segment::Wait { duration });
        self
    }

    /// π/2(φ₀), SDF, π(φ₀ + π/2), SDF, π/2(φ₀). The second pulse keeps its
    /// own ζ.
    pub fn spin_echo(phi0: f64, first: SdfPulse, second: SdfPulse) -> Self {
        Self::new().half_pi(phi0).sdf(first).pi(phi0 + FRAC_PI_2).sdf(second).half_pi(phi0)
    }

    /// Spin echo with two copies of `pulse`, the second phase matched to the
    /// first via [`phase_matched_zeta`] unless `zeta2` is given.
    pub fn gate_echo(phi0: f64, pulse: SdfPulse, zeta2: Option<f64>) -> Self {
        let t2 = pulse.duration();
        let zeta2 = zeta2.unwrap_or_else(|| phase_matched_zeta(pulse.params.zeta, pulse.params.sz_detuning(), t2));
        let second = pulse.clone().with_zeta(zeta2);
        Self::spin_echo(phi0, pulse, second)
    }

    /// π/2(φ₀), SDF, π/2(φ₀ + π).
    pub fn ramsey(phi0: f64, pulse: SdfPulse) -> Self {
        Self::new().half_pi(phi0).sdf(pulse).half_pi(phi0 + PI)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn validate(&self, n_spins: usize) -> Result<()> {
        for (k, seg) in self.segments.iter().enumerate() {
            match seg {
                Segment::HalfPi { phase } | Segment::Pi { phase } | Segment::Analysis { phase } => {
                    if !(0.0..TAU).contains(phase) {
                        return Err(Error::param("phase", format!("segment {k}: {phase} outside [0, 2π)")));
                    }
                }
                Segment::Wait { duration } => {
                    if !(*duration >= 0.0 && duration.is_finite()) {
                        return Err(Error::param("wait", format!("segment {k}: duration {duration}")));
                    }
                }
                Segment::Sdf(p) => {
                    p.params.validate().map_err(|e| e.at(format!("segment {k}")))?;
                    if p.params.n_spins() != n_spins {
                        return Err(Error::DimensionMismatch { expected: n_spins, got: p.params.n_spins() });
                    }
                    if !p.offset.is_finite() {
                        return Err(Error::param("offset", "must be finite"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Settings shared by sequence runs and sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Integrator for every SDF pulse; `None` picks one per pulse.
    pub integrator: Option<IntegratorConfig>,
    /// Initial mean phonon number.
    pub nbar: f64,
    /// Initial Fock truncation; doubled on a truncation breach.
    pub fock_dim: usize,
    pub max_fock_dim: usize,
    /// Thermal Fock components below this weight are dropped.
    pub thermal_cutoff: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { integrator: None, nbar: 0.1, fock_dim: 12, max_fock_dim: 192, thermal_cutoff: 1e-7 }
    }
}

impl SimConfig {
    pub fn with_nbar(mut self, nbar: f64) -> Self {
        self.nbar = nbar;
        self
    }

    pub fn with_integrator(mut self, cfg: IntegratorConfig) -> Self {
        self.integrator = Some(cfg);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::param("nbar", "must be finite and >= 0"));
        }
        if self.fock_dim < 2 || self.max_fock_dim < self.fock_dim {
            return Err(Error::param("fock_dim", "need 2 <= fock_dim <= max_fock_dim"));
        }
        if !(self.thermal_cutoff >= 0.0 && self.thermal_cutoff < 1.0) {
            return Err(Error::param("thermal_cutoff", "must lie in [0, 1)"));
        }
        if let Some(cfg) = &self.integrator {
            cfg.validate()?;
        }
        Ok(())
    }

    fn integrator_for(&self, pulse: &SdfPulse) -> IntegratorConfig {
        self.integrator.unwrap_or_else(|| pulse.default_integrator())
    }

    /// Run `f` with the initial truncation, doubling it after each Fock
    /// truncation breach until `max_fock_dim` is exceeded.
    pub fn with_fock_retry<T>(&self, mut f: impl FnMut(usize) -> Result<T>) -> Result<T> {
        let mut dim = self.fock_dim;
        loop {
            match f(dim) {
                Err(e) if matches!(e.root(), Error::FockTruncation { .. }) && 2 * dim <= self.max_fock_dim => dim *= 2,
                other => return other,
            }
        }
    }

    /// |spins⟩⟨spins| ⊗ ρ_th as an ensemble.
    pub fn initial_ensemble(&self, spins: &Array1<C64>, n_spins: usize, fock_dim: usize) -> Result<Ensemble> {
        let layout = HilbertLayout::new(n_spins, fock_dim)?;
        Ensemble::thermal(layout, self.nbar, spins, self.thermal_cutoff)
    }
}

trait Evolving: Sized + Clone {
    fn layout(&self) -> HilbertLayout;
    fn rotate(&self, u: &Array2<C64>) -> Self;
    fn evolve(&self, pulse: &SdfPulse, t0: f64, cfg: &IntegratorConfig) -> Result<Self>;
}

impl Evolving for SpinMotionState {
    fn layout(&self) -> HilbertLayout {
        SpinMotionState::layout(self)
    }

    fn rotate(&self, u: &Array2<C64>) -> Self {
        self.apply_spin_unitary(u)
    }

    fn evolve(&self, pulse: &SdfPulse, t0: f64, cfg: &IntegratorConfig) -> Result<Self> {
        let gen = sdf_generator(pulse.model, &pulse.params, &pulse.envelope, t0, pulse.offset, self.layout())?;
        propagate(self, &gen, t0, t0 + pulse.duration(), cfg)
    }
}

impl Evolving for Ensemble {
    fn layout(&self) -> HilbertLayout {
        Ensemble::layout(self)
    }

    fn rotate(&self, u: &Array2<C64>) -> Self {
        self.apply_spin_unitary(u)
    }

    fn evolve(&self, pulse: &SdfPulse, t0: f64, cfg: &IntegratorConfig) -> Result<Self> {
        let gen = sdf_generator(pulse.model, &pulse.params, &pulse.envelope, t0, pulse.offset, self.layout())?;
        self.propagate(&gen, t0, t0 + pulse.duration(), cfg)
    }
}

fn run_generic<S: Evolving>(seq: &PulseSequence, initial: &S, sim: &SimConfig) -> Result<S> {
    let n = initial.layout().n_spins();
    seq.validate(n)?;
    sim.validate()?;
    let mut state: Option<S> = None;
    let mut clock = 0.0;
    for (k, seg) in seq.segments().iter().enumerate() {
        let current = state.as_ref().unwrap_or(initial);
        let next = match seg {
            Segment::HalfPi { phase } | Segment::Analysis { phase } => {
                Some(current.rotate(&global_rotation(n, &rotation(FRAC_PI_2, *phase))))
            }
            Segment::Pi { phase } => Some(current.rotate(&global_rotation(n, &rotation(PI, *phase)))),
            Segment::Wait { .. } => None,
            Segment::Sdf(pulse) => {
                let cfg = sim.integrator_for(pulse);
                let evolved = current
                    .evolve(pulse, clock, &cfg)
                    .map_err(|e| e.at(format!("segment {k} ({} model)", pulse.model.name())))?;
                let end = clock + pulse.duration();
                let frame = carrier_frame_unitary(pulse.model, &pulse.params, &pulse.envelope, clock, end);
                Some(if pulse.model.needs_frame_rotation() { evolved.rotate(&frame) } else { evolved })
            }
        };
        if let Some(s) = next {
            state = Some(s);
        }
        clock += seg.duration();
    }
    Ok(state.unwrap_or_else(|| initial.clone()))
}

/// Apply every segment of `seq` to `initial`. Density matrices are
/// propagated directly through −i[H, ρ].
pub fn run_sequence(seq: &PulseSequence, initial: &SpinMotionState, sim: &SimConfig) -> Result<SpinMotionState> {
    run_generic(seq, initial, sim)
}

/// Same as [`run_sequence`] for a weighted mixture of pure states.
pub fn run_sequence_ensemble(seq: &PulseSequence, initial: &Ensemble, sim: &SimConfig) -> Result<Ensemble> {
    run_generic(seq, initial, sim)
}

/// Tabular sweep output. Every row has one entry per column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Free-form key/value annotations (fit results, design values, markers).
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}
