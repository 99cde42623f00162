//! Bichromatic-drive Hamiltonians at several levels of approximation.
//!
//! All builders return H(t)/ħ in rad/s on the composite space described by a
//! [`HilbertLayout`]. With u = δt − ζ and x = 2Ω/δ:
//!
//! * full: Ω(t)[Ŝ_{φ−π/2} cos u + η Ŝ_φ cos u (â e^{−iω_z t} + h.c.)]
//! * series: the same in the interaction picture of the carrier, expanded in
//!   Bessel harmonics of u and truncated
//! * resonant: only the 2u harmonic on Ŝ_z, −ηΩ(J₁+J₃) sin 2u Ŝ_z (â e^{−iω_z t} + h.c.)
//! * effective: Ω_eff(t)(â e^{−iδ_g t} + h.c.) Ŝ_z in the frame of the mode
//!
//! The per-ion `coupling` list weights the motional term of each ion. In the
//! full and series models it carries the sign of the ion's participation in
//! the mode (±1); the resonant and effective models also accept ±½ for
//! qubits where only one level feels the force.

mod bessel;
mod envelope;
mod generators;

pub use bessel::{bessel_j, bessel_j_upto, BESSEL_DOMAIN};
pub use envelope::RampEnvelope;
pub use generators::{carrier_frame_unitary, sdf_generator, Model};

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::algebra::{embed_spin_op, identity, kron, sigma_phi, sigma_z, HilbertLayout, OperatorMatrix};
use crate::error::{Error, Result};

use std::f64::consts::FRAC_PI_2;

/// Physical parameters of one bichromatic drive (angular frequencies in rad/s).
#[derive(Clone, Debug, PartialEq)]
pub struct DriveParams {
    /// Rabi frequency of each tone, Ω.
    pub omega: f64,
    /// Detuning of each tone from the qubit, δ (half the beat note).
    pub delta: f64,
    /// Lamb-Dicke factor η.
    pub eta: f64,
    /// Motional mode frequency ω_z.
    pub omega_z: f64,
    /// Detuning of the synthesized force from the mode, δ_g.
    pub delta_g: f64,
    /// Mean optical phase φ.
    pub phi: f64,
    /// Half the phase difference between the tones, ζ.
    pub zeta: f64,
    /// Per-ion weight of the motional coupling.
    pub coupling: Vec<f64>,
}

impl DriveParams {
    /// σ_z configuration: δ = (ω_z − δ_g)/2 and Ω = xδ/2.
    pub fn sz_drive(omega_z: f64, delta_g: f64, x: f64, eta: f64, coupling: Vec<f64>) -> Result<Self> {
        let delta = 0.5 * (omega_z - delta_g);
        Self::from_x(omega_z, delta, delta_g, x, eta, coupling)
    }

    /// Mølmer-Sørensen configuration: δ = ω_z − δ_g and Ω = xδ/2.
    pub fn ms_drive(omega_z: f64, delta_g: f64, x: f64, eta: f64, coupling: Vec<f64>) -> Result<Self> {
        let delta = omega_z - delta_g;
        Self::from_x(omega_z, delta, delta_g, x, eta, coupling)
    }

    fn from_x(omega_z: f64, delta: f64, delta_g: f64, x: f64, eta: f64, coupling: Vec<f64>) -> Result<Self> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::param("x", format!("2Ω/δ must be positive, got {x}")));
        }
        let p = Self { omega: 0.5 * x * delta, delta, eta, omega_z, delta_g, phi: 0.0, zeta: 0.0, coupling };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn n_spins(&self) -> usize {
        self.coupling.len()
    }

    /// x = 2Ω/δ.
    pub fn bessel_arg(&self) -> f64 {
        2.0 * self.omega / self.delta
    }

    /// Detuning of the σ_z force from the mode implied by δ: ω_z − 2δ.
    pub fn sz_detuning(&self) -> f64 {
        self.omega_z - 2.0 * self.delta
    }

    /// Detuning of the Ŝ_φ force from the mode implied by δ: ω_z − δ.
    pub fn ms_detuning(&self) -> f64 {
        self.omega_z - self.delta
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega, self.delta, self.eta, self.omega_z, self.delta_g, self.phi, self.zeta];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("drive", "all parameters must be finite"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::param("omega", format!("must be > 0, got {}", self.omega)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::param("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::param("eta", format!("must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.omega_z > 0.0) {
            return Err(Error::param("omega_z", format!("must be > 0, got {}", self.omega_z)));
        }
        if self.coupling.is_empty() || self.coupling.len() > HilbertLayout::MAX_SPINS {
            return Err(Error::param("coupling", format!("need 1 or 2 entries, got {}", self.coupling.len())));
        }
        for &c in &self.coupling {
            if !(c.abs() == 1.0 || c.abs() == 0.5) {
                return Err(Error::param("coupling", format!("entries must be ±1 or ±1/2, got {c}")));
            }
        }
        Ok(())
    }

    pub(crate) fn check_layout(&self, layout: HilbertLayout) -> Result<()> {
        self.validate()?;
        if self.coupling.len() != layout.n_spins() {
            return Err(Error::DimensionMismatch { expected: layout.n_spins(), got: self.coupling.len() });
        }
        Ok(())
    }

    pub(crate) fn require_unit_coupling(&self, model: &'static str) -> Result<()> {
        if self.coupling.iter().any(|c| c.abs() != 1.0) {
            return Err(Error::UnsupportedModel {
                model,
                reason: "one-sided (±1/2) coupling; use the resonant or effective model".into(),
            });
        }
        Ok(())
    }
}

/// Ω_eff = ηΩ(J₁(x) + J₃(x)), the amplitude of the resonant σ_z force.
pub fn effective_coupling(p: &DriveParams) -> f64 {
    let j = bessel_j_upto(3, p.bessel_arg()).unwrap_or_else(|_| vec![0.0; 4]);
    p.eta * p.omega * (j[1] + j[3])
}

/// ηΩ(J₀(x) + J₂(x)), the amplitude of the resonant Ŝ_φ (Mølmer-Sørensen) force.
pub fn ms_coupling(p: &DriveParams) -> f64 {
    let j = bessel_j_upto(2, p.bessel_arg()).unwrap_or_else(|_| vec![0.0; 3]);
    p.eta * p.omega * (j[0] + j[2])
}

/// Amplitude and phase ϑ of the rotating force Ω(â e^{−i(δ_g t + ϑ)} + h.c.) Ŝ_z
/// left after dropping the counter-rotating half of the resonant term.
///
/// The sine modulation splits Ω_eff evenly between two frequencies, so the
/// rotating amplitude is Ω_eff/2.
pub fn rotating_sz_force(p: &DriveParams) -> (f64, f64) {
    (0.5 * effective_coupling(p), 2.0 * p.zeta - FRAC_PI_2)
}

/// Same as [`rotating_sz_force`] for the Ŝ_φ resonance at δ ≈ ω_z.
pub fn rotating_ms_force(p: &DriveParams) -> (f64, f64) {
    (0.5 * ms_coupling(p), p.zeta)
}

/// θ(t) = ∫ Ω env cos(δt′ − ζ) dt′ from `t_start` to `t`; the carrier
/// propagator is exp(−iθ Ŝ_{φ−π/2}). The envelope runs on local time
/// t′ − t_start; without one the drive is on from `t_start`.
pub fn carrier_angle(p: &DriveParams, env: Option<&RampEnvelope>, t_start: f64, t: f64) -> f64 {
    let phase = C64::from_polar(1.0, p.delta * t_start - p.zeta);
    let integral = match env {
        Some(env) => env.fourier(p.delta, 0.0, t - t_start),
        None => envelope::exp_integral(p.delta, 0.0, (t - t_start).max(0.0)),
    };
    p.omega * (phase * integral).re
}

/// Σᵢ wᵢ σ_φ⁽ⁱ⁾ on the spin register.
pub(crate) fn weighted_pauli(weights: &[f64], phi: f64) -> Array2<C64> {
    weighted(weights, &sigma_phi(phi))
}

/// Σᵢ wᵢ σ_z⁽ⁱ⁾ on the spin register.
pub(crate) fn weighted_sz(weights: &[f64]) -> Array2<C64> {
    weighted(weights, &sigma_z())
}

fn weighted(weights: &[f64], op: &Array2<C64>) -> Array2<C64> {
    let n = weights.len();
    weights
        .iter()
        .enumerate()
        .fold(Array2::zeros((1 << n, 1 << n)), |acc, (ion, &w)| acc + embed_spin_op(n, ion, op) * C64::from(w))
}

fn motion_quadrature(layout: HilbertLayout, omega: f64, t: f64) -> OperatorMatrix {
    let nf = layout.fock_dim();
    let a = crate::algebra::fock_lowering(nf);
    let phase = C64::from_polar(1.0, -omega * t);
    let ad = crate::algebra::dagger(&a);
    a * phase + ad * phase.conj()
}

fn envelope_at(env: Option<&RampEnvelope>, t: f64) -> f64 {
    env.map_or(1.0, |e| e.value(t))
}

/// Full bichromatic Hamiltonian in the frame of the qubit and the mode.
pub fn h_full(t: f64, p: &DriveParams, env: Option<&RampEnvelope>, layout: HilbertLayout) -> Result<OperatorMatrix> {
    p.check_layout(layout)?;
    p.require_unit_coupling("full")?;
    let n = layout.n_spins();
    let amp = p.omega * envelope_at(env, t) * (p.delta * t - p.zeta).cos();
    let ones = vec![1.0; n];
    let carrier = kron(&weighted_pauli(&ones, p.phi - FRAC_PI_2), &identity(layout.fock_dim()));
    let sideband = kron(&weighted_pauli(&p.coupling, p.phi), &motion_quadrature(layout, p.omega_z, t));
    Ok((carrier + sideband * C64::from(p.eta)) * C64::from(amp))
}

/// Interaction picture of [`h_full`] with respect to the carrier, expanded in
/// harmonics of δt − ζ up to index `n_max`.
pub fn h_bessel_series(t: f64, p: &DriveParams, n_max: usize, layout: HilbertLayout) -> Result<OperatorMatrix> {
    p.check_layout(layout)?;
    p.require_unit_coupling("series")?;
    if n_max == 0 {
        return Err(Error::param("n_max", "must be >= 1"));
    }
    let (c_phi, c_z) = series_weights(p.bessel_arg(), p.delta * t - p.zeta, n_max)?;
    let quad = motion_quadrature(layout, p.omega_z, t);
    let spin = weighted_pauli(&p.coupling, p.phi) * C64::from(c_phi) - weighted_sz(&p.coupling) * C64::from(c_z);
    Ok(kron(&spin, &quad) * C64::from(p.eta * p.omega))
}

/// Coefficients (on Ŝ_φ, on Ŝ_z) of the truncated harmonic series at phase u.
pub(crate) fn series_weights(x: f64, u: f64, n_max: usize) -> Result<(f64, f64)> {
    let j = bessel_j_upto(2 * n_max + 2, x)?;
    let c_phi = (0..=n_max).map(|n| (j[2 * n] + j[2 * n + 2]) * ((2 * n + 1) as f64 * u).cos()).sum();
    let c_z = (1..=n_max).map(|n| (j[2 * n - 1] + j[2 * n + 1]) * ((2 * n) as f64 * u).sin()).sum();
    Ok((c_phi, c_z))
}

/// Resonant σ_z force retained from the series when δ ≈ ω_z/2.
pub fn h_sdf_resonant(t: f64, p: &DriveParams, layout: HilbertLayout) -> Result<OperatorMatrix> {
    p.check_layout(layout)?;
    let j = bessel_j_upto(3, p.bessel_arg())?;
    let amp = -p.eta * p.omega * (j[1] + j[3]) * (2.0 * (p.delta * t - p.zeta)).sin();
    let quad = motion_quadrature(layout, p.omega_z, t);
    Ok(kron(&weighted_sz(&p.coupling), &quad) * C64::from(amp))
}

/// Effective σ_z force Ω_eff env(t) (â e^{−iδ_g t} + â† e^{iδ_g t}) Ŝ_z on all ions.
pub fn h_effective(
    t: f64,
    omega_eff: f64,
    delta_g: f64,
    env: &RampEnvelope,
    layout: HilbertLayout,
) -> Result<OperatorMatrix> {
    let spin = weighted_sz(&vec![1.0; layout.n_spins()]);
    h_effective_with(t, omega_eff, delta_g, 0.0, env, &spin, layout)
}

/// Effective force Ω_eff env(t) (â e^{−i(δ_g t + ϑ)} + h.c.) ⊗ `spin` for an
/// arbitrary Hermitian spin operator.
pub fn h_effective_with(
    t: f64,
    omega_eff: f64,
    delta_g: f64,
    force_phase: f64,
    env: &RampEnvelope,
    spin: &Array2<C64>,
    layout: HilbertLayout,
) -> Result<OperatorMatrix> {
    if !(0.0..=env.t_total()).contains(&t) {
        return Err(Error::TimeOutOfRange { t, start: 0.0, end: env.t_total() });
    }
    if spin.dim() != (layout.spin_dim(), layout.spin_dim()) {
        return Err(Error::DimensionMismatch { expected: layout.spin_dim(), got: spin.nrows() });
    }
    let nf = layout.fock_dim();
    let a = crate::algebra::fock_lowering(nf);
    let phase = C64::from_polar(1.0, -(delta_g * t + force_phase));
    let quad = a.mapv(|z| z * phase) + crate::algebra::dagger(&a).mapv(|z| z * phase.conj());
    Ok(kron(spin, &quad) * C64::from(omega_eff * env.value(t)))
}

/// exp(−iθŜ_{φ−π/2}) acting on the spin register.
pub(crate) fn carrier_rotation(n_spins: usize, theta: f64, phi: f64) -> Array2<C64> {
    let u = crate::algebra::rotation(2.0 * theta, phi - FRAC_PI_2);
    crate::algebra::global_rotation(n_spins, &u)
}

#[cfg(test)]
mod tests;
