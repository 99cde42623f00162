//! Two-qubit gate configurations, parity analysis and Bell fidelity.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_4, TAU};

use super::{run_sequence_ensemble, PulseSequence, SdfPulse, SimConfig};
use crate::algebra::{dagger, global_rotation, rotation, spin_basis, Spin};
use crate::error::{Error, Result};
use crate::hamiltonians::{rotating_ms_force, rotating_sz_force, DriveParams, Model, RampEnvelope};
use crate::propagator::geometric_phase;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    /// σ_z force at δ ≈ ω_z/2 inside the spin echo.
    SigmaZ,
    /// Ŝ_φ force at δ ≈ ω_z, one pulse and no single-qubit pulses.
    Ms,
}

/// A fully specified two-ion gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GateConfig {
    pub kind: GateKind,
    /// First (or only) SDF pulse.
    pub pulse: SdfPulse,
    /// ζ of the second echo pulse; phase matched when `None`.
    pub zeta2: Option<f64>,
    /// Phase of the π/2 pulses.
    pub phi0: f64,
}

impl GateConfig {
    /// σ_z gate with the given drive: each echo pulse closes one loop,
    /// T = 2π/|δ_g| + t_ramp, with δ_g = ω_z − 2δ.
    pub fn sigma_z(params: DriveParams, t_ramp: f64, model: Model) -> Result<Self> {
        let dg = params.sz_detuning();
        let env = loop_envelope(dg, t_ramp)?;
        Ok(Self { kind: GateKind::SigmaZ, pulse: SdfPulse::new(params, env, model), zeta2: None, phi0: 0.0 })
    }

    /// MS gate with the given drive and one loop at δ_g = ω_z − δ.
    pub fn ms(params: DriveParams, t_ramp: f64, model: Model) -> Result<Self> {
        let dg = params.ms_detuning();
        let env = loop_envelope(dg, t_ramp)?;
        Ok(Self { kind: GateKind::Ms, pulse: SdfPulse::new(params, env, model), zeta2: None, phi0: 0.0 })
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.pulse.model = model;
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.pulse.offset = offset;
        self
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.pulse.params.phi = phi;
        self
    }

    pub fn with_coupling(mut self, coupling: Vec<f64>) -> Self {
        self.pulse.params.coupling = coupling;
        self
    }

    pub fn with_zeta2(mut self, zeta2: f64) -> Self {
        self.zeta2 = Some(zeta2);
        self
    }

    pub fn params(&self) -> &DriveParams {
        &self.pulse.params
    }

    /// Detuning of the gate force from the mode.
    pub fn force_detuning(&self) -> f64 {
        match self.kind {
            GateKind::SigmaZ => self.pulse.params.sz_detuning(),
            GateKind::Ms => self.pulse.params.ms_detuning(),
        }
    }

    /// Total SDF time of the sequence.
    pub fn gate_duration(&self) -> f64 {
        match self.kind {
            GateKind::SigmaZ => 2.0 * self.pulse.duration(),
            GateKind::Ms => self.pulse.duration(),
        }
    }

    pub fn sequence(&self) -> PulseSequence {
        match self.kind {
            GateKind::SigmaZ => PulseSequence::gate_echo(self.phi0, self.pulse.clone(), self.zeta2),
            GateKind::Ms => PulseSequence::new().sdf(self.pulse.clone()),
        }
    }

    /// Coefficient χ of σ_z⁽¹⁾σ_z⁽²⁾ (or σ_φσ_φ) predicted by the rotating-wave
    /// force; a maximally entangling gate has |χ| = π/4.
    pub fn predicted_phase(&self) -> Result<f64> {
        let p = &self.pulse.params;
        if p.n_spins() != 2 {
            return Err(Error::param("coupling", "gate needs two ions"));
        }
        let c = p.coupling[0] * p.coupling[1];
        let env = &self.pulse.envelope;
        Ok(match self.kind {
            GateKind::SigmaZ => {
                let (amp, _) = rotating_sz_force(p);
                4.0 * c * geometric_phase(env, amp, p.sz_detuning(), env.t_total())?
            }
            GateKind::Ms => {
                let (amp, _) = rotating_ms_force(p);
                2.0 * c * geometric_phase(env, amp, p.ms_detuning(), env.t_total())?
            }
        })
    }

    /// Reduced two-spin density matrix after the gate, from |↓↓⟩ with
    /// thermal motion.
    pub fn final_spin_density(&self, sim: &SimConfig) -> Result<Array2<C64>> {
        let spins = spin_basis(&[Spin::Down, Spin::Down]);
        let seq = self.sequence();
        sim.with_fock_retry(|dim| {
            let init = sim.initial_ensemble(&spins, 2, dim)?;
            Ok(run_sequence_ensemble(&seq, &init, sim)?.reduced_spin_density())
        })
    }
}

fn loop_envelope(delta_g: f64, t_ramp: f64) -> Result<RampEnvelope> {
    if !(delta_g.abs() > 0.0) {
        return Err(Error::param("delta_g", "a closed loop needs a non-zero force detuning"));
    }
    RampEnvelope::new(t_ramp, TAU / delta_g.abs() + t_ramp)
}

/// Bisection for the force detuning giving |χ| = π/4 at fixed x = 2Ω/δ.
fn solve_detuning(omega_z: f64, t_ramp: f64, build: impl Fn(f64) -> Result<GateConfig>) -> Result<GateConfig> {
    let excess = |dg: f64| -> Result<f64> { Ok(build(dg)?.predicted_phase()?.abs() - FRAC_PI_4) };
    let mut upper = 0.25 * omega_z;
    if t_ramp > 0.0 {
        upper = upper.min(0.99 * TAU / t_ramp);
    }
    let (mut lo, mut hi) = ((TAU * 100.0).ln(), upper.ln());
    let (f_lo, f_hi) = (excess(lo.exp())?, excess(hi.exp())?);
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::param("gate", "no admissible force detuning reaches a π/4 gate phase"));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if excess(mid.exp())? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    build((0.5 * (lo + hi)).exp())
}

/// σ_z gate at fixed x with δ_g chosen so that the echo yields |χ| = π/4.
pub fn design_sz_gate(
    omega_z: f64,
    x: f64,
    eta: f64,
    coupling: Vec<f64>,
    t_ramp: f64,
    model: Model,
) -> Result<GateConfig> {
    solve_detuning(omega_z, t_ramp, |dg| {
        GateConfig::sigma_z(DriveParams::sz_drive(omega_z, dg, x, eta, coupling.clone())?, t_ramp, model)
    })
}

/// MS gate at fixed x with δ_g chosen so that one loop yields |χ| = π/4.
pub fn design_ms_gate(
    omega_z: f64,
    x: f64,
    eta: f64,
    coupling: Vec<f64>,
    t_ramp: f64,
    model: Model,
) -> Result<GateConfig> {
    solve_detuning(omega_z, t_ramp, |dg| {
        GateConfig::ms(DriveParams::ms_drive(omega_z, dg, x, eta, coupling.clone())?, t_ramp, model)
    })
}

/// Σ_s (−1)^{#flipped spins} ρ_ss of a register density matrix.
pub fn parity(rho: &Array2<C64>) -> f64 {
    (0..rho.nrows()).map(|s| if s.count_ones() % 2 == 0 { rho[(s, s)].re } else { -rho[(s, s)].re }).sum()
}

/// Parity after a global π/2 analysis pulse of each phase.
pub fn parity_scan(rho: &Array2<C64>, phases: &[f64]) -> Vec<f64> {
    let n = rho.nrows().trailing_zeros() as usize;
    phases
        .iter()
        .map(|&phase| {
            let u = global_rotation(n, &rotation(std::f64::consts::FRAC_PI_2, phase));
            parity(&u.dot(rho).dot(&dagger(&u)))
        })
        .collect()
}

/// Π(φ_a) = C cos(2φ_a + θ) + offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParityFit {
    pub contrast: f64,
    pub phase: f64,
    pub offset: f64,
}

/// Linear least squares for [`ParityFit`].
pub fn fit_parity(phases: &[f64], values: &[f64]) -> Result<ParityFit> {
    if phases.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: phases.len(), got: values.len() });
    }
    if phases.len() < 3 {
        return Err(Error::param("phases", "need at least three analysis phases"));
    }
    let design = nalgebra::DMatrix::from_fn(phases.len(), 3, |i, j| match j {
        0 => (2.0 * phases[i]).cos(),
        1 => (2.0 * phases[i]).sin(),
        _ => 1.0,
    });
    let rhs = nalgebra::DVector::from_column_slice(values);
    let sol = design.svd(true, true).solve(&rhs, 1e-12).map_err(|e| Error::param("phases", e.to_string()))?;
    let (a, b) = (sol[0], sol[1]);
    Ok(ParityFit { contrast: a.hypot(b), phase: (-b).atan2(a), offset: sol[2] })
}

/// F = (p↑↑ + p↓↓)/2 + C/2 with C fitted from a parity scan over `phases`.
pub fn bell_fidelity(rho: &Array2<C64>, phases: &[f64]) -> Result<(f64, ParityFit)> {
    let last = rho.nrows() - 1;
    let even = rho[(0, 0)].re + rho[(last, last)].re;
    let fit = fit_parity(phases, &parity_scan(rho, phases))?;
    Ok((0.5 * even + 0.5 * fit.contrast, fit))
}

/// Uniform grid of `n` analysis phases on [0, π).
pub fn analysis_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| std::f64::consts::PI * k as f64 / n as f64).collect()
}
