//! Closed-form phase-space trajectory of a spin-dependent force.
//!
//! For H = Ω(t)(â e^{−iδ_g t} + â† e^{iδ_g t}) s with s a σ_z eigenvalue, the
//! evolution is D(sα(t)) e^{is²Φ(t)} with
//! α(t) = −i ∫₀ᵗ Ω(t′) e^{iδ_g t′} dt′ and Φ(t) = ∫₀ᵗ Im(α* dα/dt′) dt′.

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonians::RampEnvelope;

fn check_time(env: &RampEnvelope, t: f64) -> Result<()> {
    if !(0.0..=env.t_total()).contains(&t) {
        return Err(Error::TimeOutOfRange { t, start: 0.0, end: env.t_total() });
    }
    Ok(())
}

/// α(t) for the plateau amplitude `omega_eff` shaped by `env`.
pub fn displacement_alpha(env: &RampEnvelope, omega_eff: f64, delta_g: f64, t: f64) -> Result<C64> {
    check_time(env, t)?;
    Ok(C64::new(0.0, -omega_eff) * env.fourier(delta_g, 0.0, t))
}

/// Φ(t), the geometric phase per unit s², by composite Gauss-Legendre
/// quadrature of the closed-form integrand.
pub fn geometric_phase(env: &RampEnvelope, omega_eff: f64, delta_g: f64, t: f64) -> Result<f64> {
    check_time(env, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    // Breakpoints at the ramp edges keep each panel smooth.
    let mut cuts = vec![0.0, env.t_ramp(), env.t_total() - env.t_ramp(), t];
    cuts.retain(|&c| c <= t);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let period = if delta_g != 0.0 { std::f64::consts::TAU / delta_g.abs() } else { f64::INFINITY };
    let integrand = |s: f64| {
        let alpha = C64::new(0.0, -omega_eff) * env.fourier(delta_g, 0.0, s);
        let dalpha = C64::new(0.0, -omega_eff * env.value(s)) * C64::from_polar(1.0, delta_g * s);
        (alpha.conj() * dalpha).im
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let panels = (((b - a) / period) * 8.0).ceil().clamp(4.0, 4096.0) as usize;
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            total += gauss_legendre(&integrand, a + k as f64 * h, a + (k + 1) as f64 * h);
        }
    }
    Ok(total)
}

const GL_NODES: [f64; 5] =
    [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
    0.236_926_885_056_189_08,
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Fock amplitudes of the coherent state |α⟩, truncated to `fock_dim` levels
/// (not renormalised).
pub fn coherent_amplitudes(alpha: C64, fock_dim: usize) -> Array1<C64> {
    let mut out = Array1::zeros(fock_dim);
    let mut c = C64::from((-0.5 * alpha.norm_sqr()).exp());
    for n in 0..fock_dim {
        out[n] = c;
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    out
}

/// D(α) applied to a Fock vector via the matrix exponential on the truncated space.
pub fn displace(psi: &Array1<C64>, alpha: C64) -> Array1<C64> {
    let n = psi.len();
    let a = crate::algebra::fock_lowering(n);
    let gen = crate::algebra::dagger(&a) * alpha - a * alpha.conj();
    crate::linalg::expm(&gen).dot(psi)
}
