//! Structured generators for one SDF pulse.
//!
//! Each model is expressed as a short list of `spin ⊗ {1, â, â†}` terms with
//! scalar time-dependent coefficients, which [`TermGenerator`] applies in
//! O(dim) per term. Times are on a global clock; the envelope starts at
//! `t_start`. A qubit frequency offset Δ adds (Δ/2) Σᵢ σ_z⁽ⁱ⁾ to the
//! laboratory-frame Hamiltonian and is transformed along with each frame.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::{
    bessel_j_upto, carrier_angle, carrier_rotation, rotating_sz_force, series_weights, weighted_pauli, weighted_sz,
    DriveParams, RampEnvelope,
};
use crate::algebra::HilbertLayout;
use crate::error::{Error, Result};
use crate::propagator::{ModeOp, Term, TermGenerator};

use std::f64::consts::FRAC_PI_2;

/// Level of approximation used for an SDF pulse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// Full Hamiltonian, integrated in the carrier interaction picture and
    /// rotated back to the laboratory frame at the end of the pulse.
    Full,
    /// Full Hamiltonian integrated directly; slow reference implementation.
    FullLab,
    /// Bessel-harmonic series truncated at `n_max`.
    Series { n_max: usize },
    /// Resonant σ_z term of the series only.
    Resonant,
    /// Rotating-wave σ_z force in the frame of the mode.
    Effective,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Full => "full",
            Model::FullLab => "full-lab",
            Model::Series { .. } => "series",
            Model::Resonant => "resonant",
            Model::Effective => "effective",
        }
    }

    /// Whether propagation ends in a rotated frame that must be undone with
    /// [`carrier_frame_unitary`].
    pub fn needs_frame_rotation(&self) -> bool {
        matches!(self, Model::Full)
    }
}

/// Generator of one SDF pulse of the given model.
pub fn sdf_generator(
    model: Model,
    p: &DriveParams,
    env: &RampEnvelope,
    t_start: f64,
    offset: f64,
    layout: HilbertLayout,
) -> Result<TermGenerator> {
    p.check_layout(layout)?;
    if !offset.is_finite() {
        return Err(Error::param("offset", "must be finite"));
    }
    let n = layout.n_spins();
    let ones = vec![1.0; n];
    let sz_all = weighted_sz(&ones);
    let sphi_all = weighted_pauli(&ones, p.phi);
    let sphi_c = weighted_pauli(&p.coupling, p.phi);
    let sz_c = weighted_sz(&p.coupling);
    let p = p.clone();
    let env = *env;
    let half_offset = 0.5 * offset;

    let gen = match model {
        Model::FullLab => {
            p.require_unit_coupling(model.name())?;
            let carrier = weighted_pauli(&ones, p.phi - FRAC_PI_2);
            let terms = vec![
                Term::new(carrier, ModeOp::Identity),
                Term::new(sphi_c.clone(), ModeOp::Lower),
                Term::new(sphi_c, ModeOp::Raise),
                Term::new(sz_all, ModeOp::Identity),
            ];
            TermGenerator::new(layout, terms, move |t, c| {
                let amp = p.omega * env.value(t - t_start) * (p.delta * t - p.zeta).cos();
                let side = mode_phase(p.omega_z, t) * (p.eta * amp);
                c[0] = C64::from(amp);
                c[1] = side;
                c[2] = side.conj();
                c[3] = C64::from(half_offset);
            })
        }
        Model::Full => {
            p.require_unit_coupling(model.name())?;
            let terms = vec![
                Term::new(sphi_c.clone(), ModeOp::Lower),
                Term::new(sphi_c, ModeOp::Raise),
                Term::new(sz_c.clone(), ModeOp::Lower),
                Term::new(sz_c, ModeOp::Raise),
                Term::new(sz_all, ModeOp::Identity),
                Term::new(sphi_all, ModeOp::Identity),
            ];
            TermGenerator::new(layout, terms, move |t, c| {
                let amp = p.eta * p.omega * env.value(t - t_start) * (p.delta * t - p.zeta).cos();
                let two_theta = 2.0 * carrier_angle(&p, Some(&env), t_start, t);
                let (s2, c2) = two_theta.sin_cos();
                let side = mode_phase(p.omega_z, t) * amp;
                c[0] = side * c2;
                c[1] = c[0].conj();
                c[2] = -side * s2;
                c[3] = c[2].conj();
                c[4] = C64::from(half_offset * c2);
                c[5] = C64::from(half_offset * s2);
            })
        }
        Model::Series { n_max } => {
            p.require_unit_coupling(model.name())?;
            if n_max == 0 {
                return Err(Error::param("n_max", "must be >= 1"));
            }
            bessel_j_upto(2 * n_max + 2, p.bessel_arg())?;
            let terms = vec![
                Term::new(sphi_c.clone(), ModeOp::Lower),
                Term::new(sphi_c, ModeOp::Raise),
                Term::new(sz_c.clone(), ModeOp::Lower),
                Term::new(sz_c, ModeOp::Raise),
                Term::new(sz_all, ModeOp::Identity),
                Term::new(sphi_all, ModeOp::Identity),
            ];
            TermGenerator::new(layout, terms, move |t, c| {
                let e = env.value(t - t_start);
                let x = 2.0 * p.omega * e / p.delta;
                let u = p.delta * t - p.zeta;
                let (w_phi, w_z) = series_weights(x, u, n_max).unwrap_or((0.0, 0.0));
                let side = mode_phase(p.omega_z, t) * (p.eta * p.omega * e);
                c[0] = side * w_phi;
                c[1] = c[0].conj();
                c[2] = -side * w_z;
                c[3] = c[2].conj();
                let (s2, c2) = (x * u.sin()).sin_cos();
                c[4] = C64::from(half_offset * c2);
                c[5] = C64::from(half_offset * s2);
            })
        }
        Model::Resonant => {
            let terms = vec![
                Term::new(sz_c.clone(), ModeOp::Lower),
                Term::new(sz_c, ModeOp::Raise),
                Term::new(sz_all, ModeOp::Identity),
                Term::new(sphi_all, ModeOp::Identity),
            ];
            TermGenerator::new(layout, terms, move |t, c| {
                let e = env.value(t - t_start);
                let x = 2.0 * p.omega * e / p.delta;
                let u = p.delta * t - p.zeta;
                let j = bessel_j_upto(3, x).unwrap_or_else(|_| vec![0.0; 4]);
                let amp = -p.eta * p.omega * e * (j[1] + j[3]) * (2.0 * u).sin();
                c[0] = mode_phase(p.omega_z, t) * amp;
                c[1] = c[0].conj();
                let (s2, c2) = (x * u.sin()).sin_cos();
                c[2] = C64::from(half_offset * c2);
                c[3] = C64::from(half_offset * s2);
            })
        }
        Model::Effective => {
            let (amp, force_phase) = rotating_sz_force(&p);
            let detuning = p.sz_detuning();
            let terms = vec![
                Term::new(sz_c.clone(), ModeOp::Lower),
                Term::new(sz_c, ModeOp::Raise),
                Term::new(sz_all, ModeOp::Identity),
            ];
            TermGenerator::new(layout, terms, move |t, c| {
                let f = amp * env.value(t - t_start);
                c[0] = C64::from_polar(f, -(detuning * t + force_phase));
                c[1] = c[0].conj();
                c[2] = C64::from(half_offset);
            })
        }
    };
    Ok(gen)
}

fn mode_phase(omega_z: f64, t: f64) -> C64 {
    C64::from_polar(1.0, -omega_z * t)
}

/// Spin rotation taking a state integrated with [`Model::Full`] back to the
/// laboratory frame at time `t` (identity for all other models).
pub fn carrier_frame_unitary(model: Model, p: &DriveParams, env: &RampEnvelope, t_start: f64, t: f64) -> Array2<C64> {
    let n = p.n_spins();
    if model.needs_frame_rotation() {
        carrier_rotation(n, carrier_angle(p, Some(env), t_start, t), p.phi)
    } else {
        Array2::eye(1 << n)
    }
}
