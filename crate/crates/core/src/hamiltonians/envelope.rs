use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// sin² turn-on, flat plateau, sin² turn-off.
///
/// ```text
/// t < t_ramp:                 sin²(π t / (2 t_ramp))
/// t_ramp ≤ t ≤ T − t_ramp:    1
/// t > T − t_ramp:             sin²(π (T − t) / (2 t_ramp))
/// ```
///
/// The shape equals a rectangle of width `T − t_ramp` convolved with a unit
/// area bump of width `t_ramp`, so a detuned drive closes its phase-space loop
/// whenever `δ_g (T − t_ramp)` is a multiple of 2π.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RampEnvelope {
    t_ramp: f64,
    t_total: f64,
}

impl RampEnvelope {
    pub fn new(t_ramp: f64, t_total: f64) -> Result<Self> {
        if !(t_ramp.is_finite() && t_total.is_finite()) {
            return Err(Error::param("envelope", "durations must be finite"));
        }
        if t_ramp < 0.0 || 2.0 * t_ramp > t_total * (1.0 + 1e-12) {
            return Err(Error::param(
                "envelope",
                format!("need 0 <= 2 t_ramp <= t_total, got t_ramp={t_ramp:e}, t_total={t_total:e}"),
            ));
        }
        Ok(Self { t_ramp: t_ramp.min(0.5 * t_total), t_total })
    }

    /// Like [`RampEnvelope::new`] but shortens the ramps to `t_total / 2` for
    /// pulses too short to hold two full ramps.
    pub fn clamped(t_ramp: f64, t_total: f64) -> Result<Self> {
        Self::new(t_ramp.min(0.5 * t_total.max(0.0)), t_total)
    }

    pub fn rectangular(t_total: f64) -> Result<Self> {
        Self::new(0.0, t_total)
    }

    pub fn t_ramp(&self) -> f64 {
        self.t_ramp
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    /// Duration the pulse would have as a rectangle of equal area.
    pub fn effective_duration(&self) -> f64 {
        self.t_total - self.t_ramp
    }

    /// Envelope amplitude in [0, 1]; zero outside [0, t_total].
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.t_total {
            return 0.0;
        }
        let tr = self.t_ramp;
        if tr == 0.0 {
            return 1.0;
        }
        let q = std::f64::consts::FRAC_PI_2 / tr;
        if t < tr {
            (q * t).sin().powi(2)
        } else if t > self.t_total - tr {
            (q * (self.t_total - t)).sin().powi(2)
        } else {
            1.0
        }
    }

    /// ∫_a^b env(u) e^{iωu} du in closed form, with [a, b] clipped to the pulse.
    pub fn fourier(&self, omega: f64, a: f64, b: f64) -> C64 {
        let a = a.max(0.0);
        let b = b.min(self.t_total);
        if b <= a {
            return C64::new(0.0, 0.0);
        }
        let tr = self.t_ramp;
        let t_end = self.t_total;
        if tr == 0.0 {
            return exp_integral(omega, a, b);
        }
        let kappa = std::f64::consts::PI / tr;
        let mut total = C64::new(0.0, 0.0);

        let (lo, hi) = (a.max(0.0), b.min(tr));
        if hi > lo {
            total += 0.5 * exp_integral(omega, lo, hi)
                - 0.25 * exp_integral(omega + kappa, lo, hi)
                - 0.25 * exp_integral(omega - kappa, lo, hi);
        }
        let (lo, hi) = (a.max(tr), b.min(t_end - tr));
        if hi > lo {
            total += exp_integral(omega, lo, hi);
        }
        let (lo, hi) = (a.max(t_end - tr), b.min(t_end));
        if hi > lo {
            let phase = C64::from_polar(1.0, kappa * t_end);
            total += 0.5 * exp_integral(omega, lo, hi)
                - 0.25 * phase * exp_integral(omega - kappa, lo, hi)
                - 0.25 * phase.conj() * exp_integral(omega + kappa, lo, hi);
        }
        total
    }
}

/// ∫_a^b e^{iωu} du, stable as ω → 0.
pub(crate) fn exp_integral(omega: f64, a: f64, b: f64) -> C64 {
    let width = b - a;
    let mid = 0.5 * (a + b);
    C64::from_polar(width * sinc(0.5 * omega * width), omega * mid)
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}
