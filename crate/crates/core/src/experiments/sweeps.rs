//! Parameter sweeps for each experiment. Points run in parallel and are
//! returned in input order.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

use super::gate::{analysis_phases, bell_fidelity, parity_scan};
use super::{run_sequence_ensemble, GateConfig, PulseSequence, SdfPulse, SimConfig, SweepResult};
use crate::algebra::{spin_basis, Spin};
use crate::analysis_fit::{fit_omega_eff, FitFixed, ShotNoise};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    bessel_j_upto, effective_coupling, rotating_ms_force, rotating_sz_force, DriveParams, Model, RampEnvelope,
};
use crate::propagator::displacement_alpha;

const MHZ: f64 = TAU * 1e6;
const PARITY_POINTS: usize = 32;

fn down_state(n: usize) -> ndarray::Array1<C64> {
    spin_basis(&vec![Spin::Down; n])
}

fn final_spin_density(seq: &PulseSequence, n_spins: usize, sim: &SimConfig) -> Result<Array2<C64>> {
    let spins = down_state(n_spins);
    sim.with_fock_retry(|dim| {
        let init = sim.initial_ensemble(&spins, n_spins, dim)?;
        Ok(run_sequence_ensemble(seq, &init, sim)?.reduced_spin_density())
    })
}

/// p↑ of a single ion after π/2(φ₀), SDF of total duration t, π/2(φ₀ + π),
/// for each t in `durations`.
pub fn ramsey_trace(
    params: &DriveParams,
    model: Model,
    t_ramp: f64,
    durations: &[f64],
    phi0: f64,
    sim: &SimConfig,
) -> Result<Vec<(f64, f64)>> {
    if params.n_spins() != 1 {
        return Err(Error::param("coupling", "the Ramsey trace uses a single ion"));
    }
    durations
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok((0.0, 0.0));
            }
            let env = RampEnvelope::clamped(t_ramp, t)?;
            let seq = PulseSequence::ramsey(phi0, SdfPulse::new(params.clone(), env, model));
            let rho = final_spin_density(&seq, 1, sim).map_err(|e| e.at(format!("duration {t:e} s")))?;
            Ok((t, rho[(0, 0)].re.clamp(0.0, 1.0)))
        })
        .collect()
}

/// How the Bessel argument is set in [`sweep_bessel_curve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BesselScan {
    /// δ = (ω_z − δ_g)/2 with δ_g from [`ForceDetuning`]; Ω = xδ/2.
    FixedDetuning(ForceDetuning),
    /// Ω fixed; δ = 2Ω/x and δ_g = ω_z − 2δ follows.
    FixedRabi { omega: f64 },
}

/// Choice of δ_g for [`BesselScan::FixedDetuning`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ForceDetuning {
    Fixed(f64),
    /// δ_g = Ω_eff/|α|_max, so every x traces loops of the same size, but
    /// never below `min_delta_g` to keep weak-drive traces short.
    LoopSize {
        alpha_max: f64,
        min_delta_g: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselCurveConfig {
    pub omega_z: f64,
    pub eta: f64,
    pub t_ramp: f64,
    pub scan: BesselScan,
    pub model: Model,
    /// Points per duration trace.
    pub n_durations: usize,
    /// Trace length in phase-space loops; with δ_g = 0 the trace instead
    /// stops at |α| = `loops`.
    pub loops: f64,
    /// Binomial sampling of each trace before the fit.
    pub noise: Option<ShotNoise>,
}

impl BesselCurveConfig {
    pub fn new(omega_z: f64, eta: f64, t_ramp: f64) -> Self {
        Self {
            omega_z,
            eta,
            t_ramp,
            scan: BesselScan::FixedDetuning(ForceDetuning::LoopSize { alpha_max: 1.0, min_delta_g: TAU * 2e3 }),
            model: Model::Full,
            n_durations: 24,
            loops: 2.0,
            noise: None,
        }
    }

    fn params(&self, x: f64) -> Result<DriveParams> {
        match self.scan {
            BesselScan::FixedDetuning(ForceDetuning::Fixed(delta_g)) => {
                DriveParams::sz_drive(self.omega_z, delta_g, x, self.eta, vec![1.0])
            }
            BesselScan::FixedDetuning(ForceDetuning::LoopSize { alpha_max, min_delta_g }) => {
                if !(alpha_max > 0.0) {
                    return Err(Error::param("alpha_max", "must be positive"));
                }
                // δ_g barely moves Ω_eff, so a few fixed-point passes suffice.
                let mut delta_g = 0.0;
                for _ in 0..8 {
                    let p = DriveParams::sz_drive(self.omega_z, delta_g, x, self.eta, vec![1.0])?;
                    delta_g = (effective_coupling(&p).abs() / alpha_max).max(min_delta_g);
                }
                DriveParams::sz_drive(self.omega_z, delta_g, x, self.eta, vec![1.0])
            }
            BesselScan::FixedRabi { omega } => {
                let delta = 2.0 * omega / x;
                let p = DriveParams {
                    omega,
                    delta,
                    eta: self.eta,
                    omega_z: self.omega_z,
                    delta_g: self.omega_z - 2.0 * delta,
                    phi: 0.0,
                    zeta: 0.0,
                    coupling: vec![1.0],
                };
                p.validate()?;
                Ok(p)
            }
        }
    }

    /// Evenly spaced durations from 2 t_ramp.
    fn durations(&self, p: &DriveParams) -> Vec<f64> {
        let dg = p.sz_detuning().abs();
        let span = if dg > 0.0 {
            self.loops * TAU / dg
        } else {
            let (amp, _) = rotating_sz_force(p);
            self.loops / amp.abs()
        };
        let t0 = 2.0 * self.t_ramp;
        let t1 = t0.max(self.t_ramp + span);
        let n = self.n_durations.max(2);
        (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect()
    }
}

/// |J₁(x) + J₃(x)|.
fn bessel_theory(x: f64) -> Result<f64> {
    let j = bessel_j_upto(3, x)?;
    Ok((j[1] + j[3]).abs())
}

/// Fitted and predicted |Ω_eff|/(ηΩ) for each x = 2Ω/δ. Fits that do not
/// converge are kept with `converged = 0`.
pub fn sweep_bessel_curve(x_values: &[f64], cfg: &BesselCurveConfig, sim: &SimConfig) -> Result<SweepResult> {
    if x_values.is_empty() {
        return Err(Error::param("x_values", "empty grid"));
    }
    let rows = x_values
        .par_iter()
        .enumerate()
        .map(|(k, &x)| -> Result<Vec<f64>> {
            if x == 0.0 {
                return Ok(vec![0.0, f64::NAN, 0.0, f64::NAN, 0.0]);
            }
            let p = cfg.params(x).map_err(|e| e.at(format!("x = {x}")))?;
            let theory = bessel_theory(x)?;
            let durations = cfg.durations(&p);
            let mut trace =
                ramsey_trace(&p, cfg.model, cfg.t_ramp, &durations, 0.0, sim).map_err(|e| e.at(format!("x = {x}")))?;
            if let Some(noise) = &cfg.noise {
                trace = noise.apply(&trace, k as u64)?;
            }
            let fixed = FitFixed::new(p.sz_detuning(), cfg.t_ramp).with_nbar(sim.nbar);
            let fit =
                fit_omega_eff(&trace, fixed, effective_coupling(&p).abs()).map_err(|e| e.at(format!("x = {x}")))?;
            let norm = p.eta * p.omega;
            Ok(vec![x, fit.omega_eff / norm, theory, fit.confidence / norm, f64::from(u8::from(fit.converged))])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SweepResult::new(&["x", "omega_eff_norm_fit", "omega_eff_norm_theory", "ci68", "converged"]);
    out.rows = rows;
    out.note("model", cfg.model.name());
    out.note("t_ramp_s", cfg.t_ramp);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseBasisConfig {
    pub t_ramp: f64,
    /// Target |α| of the displaced branch; the default leaves 1% contrast.
    pub alpha_target: f64,
    pub model: Model,
}

impl Default for PhaseBasisConfig {
    fn default() -> Self {
        let nbar = 0.1;
        // exp(−2|α|²(2n̄ + 1)) = 0.01
        let alpha_target = (100f64.ln() / (2.0 * (2.0 * nbar + 1.0))).sqrt();
        Self { t_ramp: 5e-6, alpha_target, model: Model::Full }
    }
}

/// Shortest pulse whose rotating-wave displacement reaches |α| = `target`.
fn duration_for_alpha(amp: f64, detuning: f64, t_ramp: f64, target: f64) -> Result<f64> {
    let alpha = |t: f64| -> f64 {
        RampEnvelope::clamped(t_ramp, t)
            .and_then(|env| displacement_alpha(&env, amp, detuning, t))
            .map(|a| a.norm())
            .unwrap_or(0.0)
    };
    let guess = t_ramp + target / amp.abs();
    let limit = if detuning != 0.0 { guess.min(t_ramp + PI / detuning.abs()) } else { guess };
    let mut hi = (2.0 * t_ramp).max(limit);
    if alpha(hi) < target {
        hi *= 1.5;
        if alpha(hi) < target {
            return Err(Error::param("alpha_target", format!("|α| = {target} is out of reach for this drive")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if alpha(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// p↑(φ₀) for the single-ion Ramsey sequence with a σ_z drive and with an
/// MS drive. Each pulse is long enough to displace the driven branch to
/// `alpha_target`.
pub fn sweep_phase_basis(
    phi0_values: &[f64],
    params_sz: &DriveParams,
    params_ms: &DriveParams,
    cfg: &PhaseBasisConfig,
    sim: &SimConfig,
) -> Result<SweepResult> {
    if phi0_values.is_empty() {
        return Err(Error::param("phi0_values", "empty grid"));
    }
    let (amp_sz, _) = rotating_sz_force(params_sz);
    let (amp_ms, _) = rotating_ms_force(params_ms);
    let t_sz = duration_for_alpha(amp_sz, params_sz.sz_detuning(), cfg.t_ramp, cfg.alpha_target)?;
    let t_ms = duration_for_alpha(amp_ms, params_ms.ms_detuning(), cfg.t_ramp, cfg.alpha_target)?;
    let pulse_sz = SdfPulse::new(params_sz.clone(), RampEnvelope::new(cfg.t_ramp, t_sz)?, cfg.model);
    let pulse_ms = SdfPulse::new(params_ms.clone(), RampEnvelope::new(cfg.t_ramp, t_ms)?, cfg.model);
    let rows = phi0_values
        .par_iter()
        .map(|&phi0| -> Result<Vec<f64>> {
            let p = |pulse: &SdfPulse| -> Result<f64> {
                let rho = final_spin_density(&PulseSequence::ramsey(phi0, pulse.clone()), 1, sim)?;
                Ok(rho[(0, 0)].re.clamp(0.0, 1.0))
            };
            let ctx = |e: Error| e.at(format!("phi0 = {phi0}"));
            Ok(vec![phi0, p(&pulse_sz).map_err(ctx)?, p(&pulse_ms).map_err(ctx)?])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SweepResult::new(&["phi0", "p_up_sz", "p_up_ms"]);
    out.rows = rows;
    out.note("duration_sz_s", t_sz);
    out.note("duration_ms_s", t_ms);
    out.note("alpha_target", cfg.alpha_target);
    Ok(out)
}

/// Qubit encoding, fixing the per-ion weight of the force.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitKind {
    Optical,
    /// Only |↑_m⟩ couples.
    Metastable,
    /// Only |↓_g⟩ couples.
    Ground,
}

impl QubitKind {
    pub fn coupling(&self) -> Vec<f64> {
        match self {
            QubitKind::Optical => vec![1.0, 1.0],
            QubitKind::Metastable => vec![0.5, 0.5],
            QubitKind::Ground => vec![-0.5, -0.5],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QubitKind::Optical => "optical",
            QubitKind::Metastable => "metastable",
            QubitKind::Ground => "ground",
        }
    }
}

/// Parity Π(φ_a) after the gate with the coupling of `qubit`, with the
/// parity fit and Bell fidelity in the metadata.
pub fn sweep_parity(analysis: &[f64], qubit: QubitKind, gate: &GateConfig, sim: &SimConfig) -> Result<SweepResult> {
    if analysis.is_empty() {
        return Err(Error::param("analysis_phases", "empty grid"));
    }
    let gate = gate.clone().with_coupling(qubit.coupling());
    let rho = gate.final_spin_density(sim)?;
    let values = parity_scan(&rho, analysis);
    let (fidelity, fit) = bell_fidelity(&rho, analysis)?;
    let mut out = SweepResult::new(&["phi_a", "parity"]);
    out.rows = analysis.iter().zip(&values).map(|(&a, &v)| vec![a, v]).collect();
    out.note("qubit", qubit.name());
    out.note("fidelity", fidelity);
    out.note("contrast", fit.contrast);
    out.note("phase", fit.phase);
    out.note("p_even", rho[(0, 0)].re + rho[(3, 3)].re);
    out.note("predicted_phase", gate.predicted_phase()?);
    Ok(out)
}

/// Bell fidelity against a qubit offset Δ present during the SDF pulses.
pub fn sweep_qubit_offset(offsets: &[f64], gate: &GateConfig, sim: &SimConfig) -> Result<SweepResult> {
    if offsets.is_empty() {
        return Err(Error::param("offsets", "empty grid"));
    }
    let phases = analysis_phases(PARITY_POINTS);
    let rows = offsets
        .par_iter()
        .map(|&offset| -> Result<Vec<f64>> {
            let rho = gate
                .clone()
                .with_offset(offset)
                .final_spin_density(sim)
                .map_err(|e| e.at(format!("offset {offset:e} rad/s")))?;
            let (f, fit) = bell_fidelity(&rho, &phases)?;
            Ok(vec![offset, f, fit.contrast, fit.phase, rho[(0, 0)].re + rho[(3, 3)].re])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SweepResult::new(&["offset", "fidelity", "contrast", "phase", "p_even"]);
    out.rows = rows;
    Ok(out)
}

/// A motional mode seen by the drive.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectatorMode {
    pub label: String,
    /// Mode frequency, rad/s.
    pub frequency: f64,
    pub eta: f64,
    /// Per-ion participation (±1).
    pub participation: Vec<f64>,
}

/// Two-ion modes {ax ip, ax oop, lr ip, ur ip, lr oop, ur oop} at
/// {1.2, 2.0, 1.7, 1.9, 1.3, 1.4} MHz. Each mode gets the single-ion Lamb-Dicke
/// factor `eta_single` scaled by sqrt(ω_ax/ω_m)/√2.
pub fn default_mode_table(eta_single: f64) -> Vec<SpectatorMode> {
    let table = [
        ("ax_ip", 1.2, 1.0),
        ("ax_oop", 2.0, -1.0),
        ("lr_ip", 1.7, 1.0),
        ("ur_ip", 1.9, 1.0),
        ("lr_oop", 1.3, -1.0),
        ("ur_oop", 1.4, -1.0),
    ];
    table
        .iter()
        .map(|&(label, f, sign)| SpectatorMode {
            label: label.to_string(),
            frequency: f * MHZ,
            eta: eta_single * (1.2 / f).sqrt() / 2f64.sqrt(),
            participation: vec![1.0, sign],
        })
        .collect()
}

/// Expected resonance δ = ω_m/order of one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Marker {
    pub label: String,
    pub order: u32,
    pub delta: f64,
}

impl Marker {
    /// Width in δ of a resonance probed with SDF pulses of length `t_pulse`.
    pub fn linewidth(&self, t_pulse: f64) -> f64 {
        TAU / (self.order as f64 * t_pulse)
    }
}

/// Markers at ω_m/k for every mode and every k in `orders`. Even k are σ_z
/// resonances and odd k are Ŝ_φ resonances.
pub fn spectator_markers(modes: &[SpectatorMode], orders: std::ops::RangeInclusive<u32>) -> Vec<Marker> {
    modes
        .iter()
        .flat_map(|m| {
            orders.clone().map(move |k| Marker { label: m.label.clone(), order: k, delta: m.frequency / k as f64 })
        })
        .collect()
}

/// Residual p↑↓ + p↓↑ after the gate sequence against δ.
///
/// The Rabi frequency, pulse timing and ζ₁ come from `gate`. Each mode runs
/// in its own Hilbert space; a run with a vanishing Lamb-Dicke factor gives
/// the carrier-only residual, and the total is the carrier residual plus the
/// excess of every mode over it. ζ₂ stays phase matched to the gate mode.
pub fn spectator_spectrum(
    modes: &[SpectatorMode],
    deltas: &[f64],
    gate: &GateConfig,
    sim: &SimConfig,
) -> Result<SweepResult> {
    if modes.is_empty() || deltas.is_empty() {
        return Err(Error::param("spectator", "empty mode table or δ grid"));
    }
    let base = gate.params().clone();
    let env = gate.pulse.envelope;
    let model = gate.pulse.model;
    let t2 = env.t_total();
    let residual = |p: DriveParams, delta: f64| -> Result<f64> {
        let zeta2 = super::phase_matched_zeta(base.zeta, base.omega_z - 2.0 * delta, t2);
        let first = SdfPulse::new(p, env, model);
        let second = first.clone().with_zeta(zeta2);
        let rho = final_spin_density(&PulseSequence::spin_echo(gate.phi0, first, second), 2, sim)?;
        Ok(rho[(1, 1)].re + rho[(2, 2)].re)
    };
    let rows = deltas
        .par_iter()
        .map(|&delta| -> Result<Vec<f64>> {
            let ctx = |e: Error| e.at(format!("delta {:.6} MHz", delta / MHZ));
            let with = |omega_z: f64, eta: f64, participation: Vec<f64>| DriveParams {
                delta,
                omega_z,
                eta,
                coupling: participation,
                ..base.clone()
            };
            let carrier = residual(with(base.omega_z, 1e-9, vec![1.0, 1.0]), delta).map_err(ctx)?;
            let mut row = vec![delta, 0.0, carrier];
            let mut total = carrier;
            for m in modes {
                let r = residual(with(m.frequency, m.eta, m.participation.clone()), delta)
                    .map_err(|e| ctx(e.at(format!("mode {}", m.label))))?;
                total += r - carrier;
                row.push(r);
            }
            row[1] = total;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec!["delta".to_string(), "residual_total".to_string(), "residual_carrier".to_string()];
    columns.extend(modes.iter().map(|m| format!("residual_{}", m.label)));
    let mut out = SweepResult { columns, rows, metadata: Vec::new() };
    for m in spectator_markers(modes, 2..=5) {
        out.note(format!("marker_{}_{}", m.label, m.order), m.delta);
    }
    out.note("t_pulse_s", t2);
    Ok(out)
}
