//! Extraction of the σ_z force strength from Ramsey traces.
//!
//! A single ion is prepared with π/2(φ₀), driven by an SDF pulse of total
//! duration t and analysed with π/2(φ₀ + π). With thermal motion the
//! spin coherence after the pulse is exp(−2|α|²(2n̄ + 1)), so
//!
//! ```text
//! p↑(t) = ½ [1 − exp(−2|α(t)|²(2n̄ + 1))]
//! ```
//!
//! with α from the rotating-wave force of amplitude Ω_eff/2 (see
//! [`crate::hamiltonians::rotating_sz_force`]). The fit returns Ω_eff on
//! the same scale as ηΩ(J₁ + J₃).

use rand::{Rng, SeedableRng};
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::hamiltonians::RampEnvelope;
use crate::propagator::displacement_alpha;

/// Quantities held fixed during the fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitFixed {
    pub delta_g: f64,
    pub t_ramp: f64,
    pub nbar: f64,
}

impl FitFixed {
    pub const DEFAULT_NBAR: f64 = 0.1;

    pub fn new(delta_g: f64, t_ramp: f64) -> Self {
        Self { delta_g, t_ramp, nbar: Self::DEFAULT_NBAR }
    }

    pub fn with_nbar(mut self, nbar: f64) -> Self {
        self.nbar = nbar;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    /// Fitted |Ω_eff| in rad/s.
    pub omega_eff: f64,
    /// Half-width of the 68% confidence interval, rad/s.
    pub confidence: f64,
    /// Root-mean-square residual of the fit.
    pub residual_norm: f64,
    pub converged: bool,
}

/// |α| at the end of a pulse of total duration `t` (ramps shortened to fit).
fn alpha_end(t: f64, omega_eff: f64, delta_g: f64, t_ramp: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let env = RampEnvelope::clamped(t_ramp, t).expect("clamped envelope is valid");
    displacement_alpha(&env, 0.5 * omega_eff, delta_g, t).map(|a| a.norm()).unwrap_or(0.0)
}

/// Spin coherence exp(−2|α|²(2n̄ + 1)) after a pulse of total duration `t`.
pub fn coherence(t: f64, omega_eff: f64, delta_g: f64, t_ramp: f64, nbar: f64) -> f64 {
    let a = alpha_end(t, omega_eff, delta_g, t_ramp);
    (-2.0 * a * a * (2.0 * nbar + 1.0)).exp()
}

/// Model p↑ for the Ramsey sequence with an SDF pulse of total duration `t`.
pub fn model_population(t: f64, omega_eff: f64, delta_g: f64, t_ramp: f64, nbar: f64) -> f64 {
    0.5 * (1.0 - coherence(t, omega_eff, delta_g, t_ramp, nbar))
}

fn residual_sum(trace: &[(f64, f64)], weights: &[f64], w: f64, fixed: &FitFixed) -> f64 {
    trace
        .iter()
        .zip(weights)
        .map(|(&(t, p), &wt)| {
            let r = model_population(t, w, fixed.delta_g, fixed.t_ramp, fixed.nbar) - p;
            wt * r * r
        })
        .sum()
}

/// Least-squares fit of |Ω_eff| with equal weights.
pub fn fit_omega_eff(trace: &[(f64, f64)], fixed: FitFixed, guess: f64) -> Result<FitResult> {
    fit_omega_eff_weighted(trace, &vec![1.0; trace.len()], fixed, guess)
}

pub const MIN_TRACE_POINTS: usize = 8;

/// Weighted least-squares fit of |Ω_eff|: a logarithmic grid scan around
/// `guess`, golden-section refinement inside the best bracket, and a final
/// parabolic step. The 68% interval comes from the curvature of the residual.
pub fn fit_omega_eff_weighted(trace: &[(f64, f64)], weights: &[f64], fixed: FitFixed, guess: f64) -> Result<FitResult> {
    if trace.len() < MIN_TRACE_POINTS {
        return Err(Error::param("trace", format!("need at least {MIN_TRACE_POINTS} points, got {}", trace.len())));
    }
    if weights.len() != trace.len() {
        return Err(Error::DimensionMismatch { expected: trace.len(), got: weights.len() });
    }
    if !(guess.abs() > 0.0 && guess.is_finite()) {
        return Err(Error::param("guess", "must be finite and non-zero"));
    }
    if trace.iter().any(|&(t, p)| !(t >= 0.0 && p.is_finite())) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::param("trace", "times must be >= 0, values finite and weights non-negative"));
    }
    let guess = guess.abs();
    let n = trace.len();
    let not_converged = |w: f64, rss: f64| FitResult {
        omega_eff: w,
        confidence: f64::INFINITY,
        residual_norm: (rss / n as f64).sqrt(),
        converged: false,
    };

    let (lo, hi) = trace.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, p)| (a.min(p), b.max(p)));
    let rss = |w: f64| residual_sum(trace, weights, w, &fixed);
    if hi - lo < 1e-12 {
        return Ok(not_converged(guess, rss(guess)));
    }

    const GRID: usize = 240;
    let (log_lo, log_hi) = ((guess / 30.0).ln(), (guess * 30.0).ln());
    let grid: Vec<f64> = (0..GRID).map(|k| (log_lo + (log_hi - log_lo) * k as f64 / (GRID - 1) as f64).exp()).collect();
    let values: Vec<f64> = grid.iter().map(|&w| rss(w)).collect();
    let best = (0..GRID).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    if best == 0 || best == GRID - 1 {
        return Ok(not_converged(grid[best], values[best]));
    }

    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (rss(c), rss(d));
    for _ in 0..200 {
        if (b - a) <= 1e-12 * (a + b) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = rss(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = rss(d);
        }
    }
    let mut w = 0.5 * (a + b);
    let mut f = rss(w);

    let h = 1e-4 * w;
    let (fm, fp) = (rss(w - h), rss(w + h));
    let curvature = (fp - 2.0 * f + fm) / (h * h);
    if curvature > 0.0 {
        let step = -(fp - fm) / (2.0 * h) / curvature;
        if step.abs() < 10.0 * h {
            let f_new = rss(w + step);
            if f_new <= f {
                w += step;
                f = f_new;
            }
        }
    }
    let curvature = {
        let h = 1e-4 * w;
        (rss(w + h) - 2.0 * f + rss(w - h)) / (h * h)
    };

    // Stalled fits: no curvature, or no improvement over a force-free model.
    let baseline = rss(0.0);
    if !(curvature > 0.0) || !(f < baseline * (1.0 - 1e-9)) || !f.is_finite() {
        return Ok(not_converged(w, f));
    }
    let s2 = f / (n as f64 - 1.0);
    let confidence = (2.0 * s2 / curvature).sqrt();
    Ok(FitResult { omega_eff: w, confidence, residual_norm: (f / n as f64).sqrt(), converged: true })
}

/// Binomial sampling settings for emulated measurement noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotNoise {
    pub shots: u64,
    pub seed: u64,
}

impl ShotNoise {
    /// Sample `trace` with a generator derived from the seed and `stream`,
    /// so parallel sweep points stay reproducible.
    pub fn apply(&self, trace: &[(f64, f64)], stream: u64) -> Result<Vec<(f64, f64)>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        sample_binomial_trace(trace, self.shots, &mut rng)
    }
}

/// Replace each probability by the fraction of `shots` binomial successes.
pub fn sample_binomial_trace<R: Rng + ?Sized>(
    trace: &[(f64, f64)],
    shots: u64,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    if shots == 0 {
        return Err(Error::param("shots", "must be > 0"));
    }
    trace
        .iter()
        .map(|&(t, p)| {
            let dist =
                Binomial::new(shots, p.clamp(0.0, 1.0)).map_err(|e| Error::param("probability", e.to_string()))?;
            Ok((t, dist.sample(rng) as f64 / shots as f64))
        })
        .collect()
}
