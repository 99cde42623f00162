//! Execution of a resolved config.

use std::f64::consts::TAU;

use zforce::analysis_fit::{fit_omega_eff, model_population, FitFixed};
use zforce::experiments::{
    ramsey_trace, spectator_spectrum, sweep_bessel_curve, sweep_parity, sweep_phase_basis, sweep_qubit_offset,
    SweepResult,
};
use zforce::hamiltonians::effective_coupling;

use crate::config::{Plan, Resolved};
use crate::CliError;

pub fn execute(resolved: &Resolved) -> Result<SweepResult, CliError> {
    let sim = &resolved.sim;
    let out = match &resolved.plan {
        Plan::BesselCurve { x, cfg } => sweep_bessel_curve(x, cfg, sim),
        Plan::PhaseBasis { phi0, sz, ms, cfg } => sweep_phase_basis(phi0, sz, ms, cfg, sim),
        Plan::ParityScan { phases, qubit, gate } => sweep_parity(phases, *qubit, gate, sim),
        Plan::OffsetSweep { offsets, gate } => {
            sweep_qubit_offset(offsets, gate, sim).map(|r| column_to_hz(r, "offset"))
        }
        Plan::SpectatorSpectrum { deltas, modes, gate } => {
            spectator_spectrum(modes, deltas, gate, sim).map(|r| column_to_hz(r, "delta"))
        }
        Plan::SdfTrace { durations, params, model, t_ramp, noise } => {
            sdf_trace(durations, params, *model, *t_ramp, noise.as_ref(), sim)
        }
    };
    out.map_err(CliError::from_run)
}

/// Report an angular-frequency column, and any `marker_*` notes, in Hz.
fn column_to_hz(mut r: SweepResult, name: &str) -> SweepResult {
    if let Some(i) = r.columns.iter().position(|c| c == name) {
        r.columns[i] = format!("{name}_hz");
        for row in &mut r.rows {
            row[i] /= TAU;
        }
    }
    for (key, value) in &mut r.metadata {
        if key.starts_with("marker_") {
            if let Ok(v) = value.parse::<f64>() {
                key.push_str("_hz");
                *value = (v / TAU).to_string();
            }
        }
    }
    r
}

/// Ramsey trace of one ion, optionally with shot noise, and the fitted Ω_eff.
fn sdf_trace(
    durations: &[f64],
    params: &zforce::hamiltonians::DriveParams,
    model: zforce::hamiltonians::Model,
    t_ramp: f64,
    noise: Option<&zforce::analysis_fit::ShotNoise>,
    sim: &zforce::experiments::SimConfig,
) -> zforce::Result<SweepResult> {
    let exact = ramsey_trace(params, model, t_ramp, durations, 0.0, sim)?;
    let measured = match noise {
        Some(n) => n.apply(&exact, 0)?,
        None => exact.clone(),
    };
    let fixed = FitFixed::new(params.sz_detuning(), t_ramp).with_nbar(sim.nbar);
    let theory = effective_coupling(params);
    let fit = fit_omega_eff(&measured, fixed, theory.abs()).map_err(|e| e.at("sdf-trace fit"))?;
    let mut out = SweepResult::new(&["t", "p_up", "p_up_exact", "p_up_fit"]);
    for ((t, p), (_, p0)) in measured.iter().zip(&exact) {
        let model = model_population(*t, fit.omega_eff, fixed.delta_g, t_ramp, sim.nbar);
        out.push_row(vec![*t, *p, *p0, model]);
    }
    out.note("model", model.name());
    out.note("omega_eff_fit_hz", fit.omega_eff / TAU);
    out.note("omega_eff_ci68_hz", fit.confidence / TAU);
    out.note("omega_eff_theory_hz", theory.abs() / TAU);
    out.note("fit_converged", fit.converged);
    if let Some(n) = noise {
        out.note("shots", n.shots);
        out.note("seed", n.seed);
    }
    Ok(out)
}
