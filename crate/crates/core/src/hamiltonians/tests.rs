use super::*;
use crate::algebra::{dagger, fock_lowering, is_hermitian, ladder, pauli_sum, sigma_x, sigma_y};
use crate::linalg::expm;
use approx::assert_relative_eq;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

const MHZ: f64 = TAU * 1e6;

fn layout(n: usize, nf: usize) -> HilbertLayout {
    HilbertLayout::new(n, nf).unwrap()
}

fn params(n: usize, x: f64) -> DriveParams {
    DriveParams::sz_drive(1.2 * MHZ, TAU * 30e3, x, 0.054, vec![1.0; n]).unwrap()
}

fn max_abs(m: &OperatorMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn max_diff(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
    max_abs(&(a - b))
}

#[test]
fn drive_constructors() {
    let p = params(2, 1.6);
    assert_relative_eq!(p.delta, 0.5 * (1.2 * MHZ - TAU * 30e3), max_relative = 1e-15);
    assert_relative_eq!(p.bessel_arg(), 1.6, max_relative = 1e-14);
    assert_relative_eq!(p.sz_detuning(), TAU * 30e3, max_relative = 1e-9);
    let ms = DriveParams::ms_drive(1.2 * MHZ, TAU * 30e3, 1.0, 0.054, vec![1.0]).unwrap();
    assert_relative_eq!(ms.ms_detuning(), TAU * 30e3, max_relative = 1e-9);
    assert!(DriveParams::sz_drive(1.2 * MHZ, 0.0, 1.0, -0.1, vec![1.0]).is_err());
    assert!(DriveParams::sz_drive(1.2 * MHZ, 0.0, 1.0, 0.05, vec![0.3]).is_err());
    assert!(DriveParams::sz_drive(1.2 * MHZ, 3.0 * MHZ, 1.0, 0.05, vec![1.0]).is_err());
}

#[test]
fn full_hamiltonian_at_origin() {
    let l = layout(1, 6);
    let p = DriveParams {
        omega: 2.0e6,
        delta: 3.0e6,
        eta: 0.07,
        omega_z: 6.5e6,
        delta_g: 0.0,
        phi: 0.0,
        zeta: 0.0,
        coupling: vec![1.0],
    };
    let h = h_full(0.0, &p, None, l).unwrap();
    let a = fock_lowering(6);
    let expected = (kron(&(-sigma_y()), &identity(6)) + kron(&sigma_x(), &(&a + &dagger(&a))) * C64::from(p.eta))
        * C64::from(p.omega);
    assert!(max_diff(&h, &expected) < 1e-9);
}

#[test]
fn full_hamiltonian_vanishes_at_carrier_node() {
    let l = layout(2, 5);
    let p = params(2, 1.2).with_zeta(0.3);
    let t = (0.5 * PI + p.zeta) / p.delta;
    let h = h_full(t, &p, None, l).unwrap();
    assert!(max_abs(&h) < 1e-9 * p.omega);
}

#[test]
fn full_hamiltonian_without_sideband_commutes_with_itself() {
    let l = layout(1, 4);
    let mut p = params(1, 1.0);
    p.eta = 1e-14;
    let h1 = h_full(0.13e-6, &p, None, l).unwrap();
    let h2 = h_full(0.71e-6, &p, None, l).unwrap();
    let comm = h1.dot(&h2) - h2.dot(&h1);
    assert!(max_abs(&comm) < 1e-10 * p.omega * p.omega);
}

#[test]
fn one_sided_coupling_rejected_by_full_models() {
    let l = layout(2, 4);
    let mut p = params(2, 1.6);
    p.coupling = vec![0.5, 0.5];
    assert!(matches!(h_full(0.0, &p, None, l), Err(Error::UnsupportedModel { .. })));
    assert!(matches!(h_bessel_series(0.0, &p, 4, l), Err(Error::UnsupportedModel { .. })));
    assert!(h_sdf_resonant(0.0, &p, l).is_ok());
}

#[test]
fn series_converges() {
    let l = layout(2, 6);
    let p = DriveParams { omega: 0.5 * 1.0 * 3.0e6, ..params(2, 1.0) };
    let p = DriveParams { delta: 3.0e6, ..p };
    for &t in &[0.0, 0.37e-6, 1.9e-6] {
        let h5 = h_bessel_series(t, &p, 5, l).unwrap();
        let h12 = h_bessel_series(t, &p, 12, l).unwrap();
        assert!(max_diff(&h5, &h12) < 1e-8 * max_abs(&h12));
    }
    // Doubling past x + 10 changes nothing.
    let p = params(1, 4.0);
    let l1 = layout(1, 5);
    let a = h_bessel_series(0.8e-6, &p, 15, l1).unwrap();
    let b = h_bessel_series(0.8e-6, &p, 30, l1).unwrap();
    assert!(max_diff(&a, &b) < 1e-10 * max_abs(&b));
}

#[test]
fn series_requires_positive_order() {
    assert!(h_bessel_series(0.0, &params(1, 1.0), 0, layout(1, 3)).is_err());
}

/// h(t, ζ) = R h(t − ζ/δ, 0) R† with R = exp(i ω_z ζ/δ â†â): shifting the
/// drive clock also advances the free phase of the mode.
fn mode_rotation(l: HilbertLayout, angle: f64) -> OperatorMatrix {
    let (a, ad) = ladder(l);
    expm(&(ad.dot(&a) * C64::new(0.0, angle)))
}

#[test]
fn zeta_translation_identity() {
    let l = layout(2, 6);
    let zeta = 0.7;
    let p0 = params(2, 1.3);
    let pz = p0.clone().with_zeta(zeta);
    let tau = zeta / p0.delta;
    let r = mode_rotation(l, p0.omega_z * tau);
    let rd = dagger(&r);
    for &t in &[0.4e-6, 2.3e-6] {
        let cases: [(OperatorMatrix, OperatorMatrix); 3] = [
            (h_full(t, &pz, None, l).unwrap(), h_full(t - tau, &p0, None, l).unwrap()),
            (h_bessel_series(t, &pz, 6, l).unwrap(), h_bessel_series(t - tau, &p0, 6, l).unwrap()),
            (h_sdf_resonant(t, &pz, l).unwrap(), h_sdf_resonant(t - tau, &p0, l).unwrap()),
        ];
        for (shifted, reference) in cases {
            let mapped = r.dot(&reference).dot(&rd);
            assert!(max_diff(&shifted, &mapped) < 1e-9 * max_abs(&reference).max(1.0));
        }
    }
}

#[test]
fn resonant_prefactor() {
    let l = layout(1, 5);
    let p = DriveParams { omega: 1.5e6, delta: 3.0e6, ..params(1, 1.0) };
    let t = 0.21e-6;
    let h = h_sdf_resonant(t, &p, l).unwrap();
    let s = (2.0 * (p.delta * t - p.zeta)).sin();
    let bare = kron(&sigma_z(), &motion_quadrature(l, p.omega_z, t)) * C64::from(p.eta * p.omega * s);
    let idx = (0, 1);
    let ratio = h[idx] / bare[idx];
    assert_relative_eq!(ratio.re, -0.459_613_939_727_601_9, epsilon = 1e-10);
    assert!(ratio.im.abs() < 1e-12);
}

#[test]
fn resonant_vanishes_at_nodes() {
    let l = layout(1, 4);
    let p = params(1, 1.0).with_zeta(0.2);
    let t = (PI / 2.0 + p.zeta) / p.delta;
    assert!(max_abs(&h_sdf_resonant(t, &p, l).unwrap()) < 1e-8 * p.omega * p.eta);
}

#[test]
fn effective_examples() {
    let l = layout(1, 5);
    let env = RampEnvelope::new(5e-6, 40e-6).unwrap();
    let w = TAU * 10e3;
    assert!(max_abs(&h_effective(0.0, w, 0.0, &env, l).unwrap()) == 0.0);
    let mid = h_effective(20e-6, w, 0.0, &env, l).unwrap();
    assert_relative_eq!(mid[(0, 1)].re, w, max_relative = 1e-12);
    let quarter = h_effective(2.5e-6, w, 0.0, &env, l).unwrap();
    assert_relative_eq!(quarter[(0, 1)].re, 0.5 * w, max_relative = 1e-12);
    assert!(matches!(h_effective(41e-6, w, 0.0, &env, l), Err(Error::TimeOutOfRange { .. })));
    assert!(matches!(h_effective(-1e-9, w, 0.0, &env, l), Err(Error::TimeOutOfRange { .. })));
}

#[test]
fn coupling_values() {
    let mut p = params(1, 1.6);
    assert_relative_eq!(effective_coupling(&p) / (p.eta * p.omega), 0.642_419_378_594_299_4, epsilon = 1e-10);
    p.omega = 0.0;
    assert_eq!(effective_coupling(&p), 0.0);
    let norm = |x: f64| {
        let p = params(1, x);
        (effective_coupling(&p) / (p.eta * p.omega)).abs()
    };
    assert!(norm(3.0) < norm(2.0));
    let ms = DriveParams { omega: 1.5e6, delta: 3.0e6, ..params(1, 1.0) };
    assert_relative_eq!(
        ms_coupling(&ms) / (ms.eta * ms.omega),
        0.765_197_686_557_966_6 + 0.114_903_484_931_900_5,
        epsilon = 1e-10
    );
}

#[test]
fn carrier_angle_closed_form() {
    let p = params(1, 1.2).with_zeta(0.4);
    // No envelope: θ = (Ω/δ)(sin(δt − ζ) − sin(δ t0 − ζ)).
    let (t0, t) = (0.3e-6, 2.9e-6);
    let expected = p.omega / p.delta * ((p.delta * t - p.zeta).sin() - (p.delta * t0 - p.zeta).sin());
    assert_relative_eq!(carrier_angle(&p, None, t0, t), expected, epsilon = 1e-12);
    // With an envelope, compare against Simpson quadrature of the definition.
    let env = RampEnvelope::new(5e-6, 40e-6).unwrap();
    let t_start = 1.7e-6;
    let f = |s: f64| p.omega * env.value(s - t_start) * (p.delta * s - p.zeta).cos();
    for &t in &[4.0e-6, 20.0e-6, 41.7e-6] {
        let n = 200_000;
        let h = (t - t_start) / n as f64;
        let simpson: f64 = (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * f(t_start + k as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert_relative_eq!(carrier_angle(&p, Some(&env), t_start, t), simpson, epsilon = 1e-9);
    }
    // Ramps suppress the residual rotation at the end of the pulse well below Ω/δ.
    assert!(carrier_angle(&p, Some(&env), t_start, t_start + 40e-6).abs() < 0.05 * p.omega / p.delta);
}

fn offset_dense(l: HilbertLayout, delta_off: f64) -> OperatorMatrix {
    kron(&weighted_sz(&vec![1.0; l.n_spins()]), &identity(l.fock_dim())) * C64::from(0.5 * delta_off)
}

#[test]
fn structured_generators_match_dense_builders() {
    let l = layout(2, 6);
    let env = RampEnvelope::new(5e-6, 80e-6).unwrap();
    let p = params(2, 1.4).with_zeta(0.3).with_phi(0.8);
    let off = TAU * 50e3;
    for &t in &[1.3e-6, 22.7e-6, 77.0e-6] {
        let e = env.value(t);
        let scaled = DriveParams { omega: p.omega * e, ..p.clone() };

        let lab = sdf_generator(Model::FullLab, &p, &env, 0.0, off, l).unwrap().to_dense(t);
        let dense = h_full(t, &p, Some(&env), l).unwrap() + offset_dense(l, off);
        assert!(max_diff(&lab, &dense) < 1e-9 * max_abs(&dense));

        let series = sdf_generator(Model::Series { n_max: 6 }, &p, &env, 0.0, 0.0, l).unwrap().to_dense(t);
        let dense = h_bessel_series(t, &scaled, 6, l).unwrap();
        assert!(max_diff(&series, &dense) < 1e-9 * max_abs(&dense));

        let res = sdf_generator(Model::Resonant, &p, &env, 0.0, 0.0, l).unwrap().to_dense(t);
        let dense = h_sdf_resonant(t, &scaled, l).unwrap();
        assert!(max_diff(&res, &dense) < 1e-9 * max_abs(&dense).max(1.0));

        let eff = sdf_generator(Model::Effective, &p, &env, 0.0, off, l).unwrap().to_dense(t);
        let (amp, phase) = rotating_sz_force(&p);
        let dense = h_effective_with(t, amp, p.sz_detuning(), phase, &env, &weighted_sz(&p.coupling), l).unwrap()
            + offset_dense(l, off);
        assert!(max_diff(&eff, &dense) < 1e-9 * max_abs(&dense));
    }
}

#[test]
fn carrier_frame_generator_is_rotated_full_hamiltonian() {
    let l = layout(2, 5);
    let env = RampEnvelope::new(5e-6, 60e-6).unwrap();
    let p = params(2, 1.6).with_zeta(0.2).with_phi(1.1);
    let off = TAU * 80e3;
    let t_start = 3e-6;
    let gen = sdf_generator(Model::Full, &p, &env, t_start, off, l).unwrap();
    for &t in &[4.1e-6, 30.3e-6, 61.0e-6] {
        let local_env = |s: f64| env.value(s - t_start);
        let u_spin = carrier_frame_unitary(Model::Full, &p, &env, t_start, t);
        let u = kron(&u_spin, &identity(l.fock_dim()));
        let amp = p.omega * local_env(t) * (p.delta * t - p.zeta).cos();
        let sideband =
            kron(&weighted_pauli(&p.coupling, p.phi), &motion_quadrature(l, p.omega_z, t)) * C64::from(p.eta * amp);
        let lab_without_carrier = sideband + offset_dense(l, off);
        let expected = dagger(&u).dot(&lab_without_carrier).dot(&u);
        let got = gen.to_dense(t);
        assert!(max_diff(&got, &expected) < 1e-9 * max_abs(&expected));
    }
}

#[test]
fn frame_unitary_is_identity_outside_full_model() {
    let env = RampEnvelope::new(5e-6, 60e-6).unwrap();
    let p = params(1, 1.0);
    let u = carrier_frame_unitary(Model::Effective, &p, &env, 0.0, 30e-6);
    assert!(max_diff(&u, &identity(2)) == 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn builders_are_hermitian(
        x in 0.05f64..3.0,
        t in 0.0f64..50e-6,
        phi in 0.0f64..TAU,
        zeta in 0.0f64..TAU,
        two in proptest::bool::ANY,
    ) {
        let n = if two { 2 } else { 1 };
        let l = layout(n, 6);
        let p = params(n, x).with_phi(phi).with_zeta(zeta);
        let env = RampEnvelope::new(5e-6, 50e-6).unwrap();
        for h in [
            h_full(t, &p, Some(&env), l).unwrap(),
            h_bessel_series(t, &p, 5, l).unwrap(),
            h_sdf_resonant(t, &p, l).unwrap(),
            h_effective(t, effective_coupling(&p), p.sz_detuning(), &env, l).unwrap(),
        ] {
            prop_assert!(is_hermitian(&h, 1e-12));
        }
        for model in [Model::Full, Model::FullLab, Model::Series { n_max: 4 }, Model::Resonant, Model::Effective] {
            let g = sdf_generator(model, &p, &env, 0.0, 1e5, l).unwrap();
            prop_assert!(is_hermitian(&g.to_dense(t), 1e-12));
        }
    }

    #[test]
    fn pauli_sum_is_hermitian(phi in 0.0f64..TAU) {
        prop_assert!(is_hermitian(&pauli_sum(layout(2, 3), phi), 1e-12));
    }
}
