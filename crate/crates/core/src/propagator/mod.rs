//! Time-dependent Schrödinger and von Neumann integration.
//!
//! Hamiltonians enter through the [`Generator`] trait, which only has to
//! apply H(t) to a vector. Dense matrices work through [`DenseGenerator`];
//! the models in `hamiltonians` provide a structured [`TermGenerator`] that
//! applies sums of `spin ⊗ {1, â, â†}` terms without building matrices.

mod displacement;

pub use displacement::{coherent_amplitudes, displace, displacement_alpha, geometric_phase};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::algebra::{HilbertLayout, OperatorMatrix, Spin, ZERO};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;

const STATE_TOL: f64 = 1e-9;

/// Pure state or density matrix on spins ⊗ truncated mode.
#[derive(Clone, Debug, PartialEq)]
pub enum SpinMotionState {
    Pure { layout: HilbertLayout, psi: Array1<C64> },
    Density { layout: HilbertLayout, rho: Array2<C64> },
}

impl SpinMotionState {
    pub fn pure(layout: HilbertLayout, psi: Array1<C64>) -> Result<Self> {
        if psi.len() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), got: psi.len() });
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(Self::Pure { layout, psi })
    }

    pub fn density(layout: HilbertLayout, rho: Array2<C64>) -> Result<Self> {
        let dim = layout.dim();
        if rho.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: rho.nrows() });
        }
        let trace: f64 = rho.diag().iter().map(|z| z.re).sum();
        if (trace - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        for i in 0..dim {
            for j in 0..i {
                if (rho[(i, j)] - rho[(j, i)].conj()).norm() > STATE_TOL {
                    return Err(Error::InvalidState("density matrix is not Hermitian".into()));
                }
            }
        }
        let (vals, _) = hermitian_eigen(&rho);
        if vals[0] < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {}", vals[0])));
        }
        Ok(Self::Density { layout, rho })
    }

    pub fn layout(&self) -> HilbertLayout {
        match self {
            Self::Pure { layout, .. } | Self::Density { layout, .. } => *layout,
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::Pure { .. })
    }

    pub fn psi(&self) -> Option<&Array1<C64>> {
        match self {
            Self::Pure { psi, .. } => Some(psi),
            Self::Density { .. } => None,
        }
    }

    pub fn density_matrix(&self) -> Array2<C64> {
        match self {
            Self::Pure { psi, .. } => {
                let n = psi.len();
                Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj())
            }
            Self::Density { rho, .. } => rho.clone(),
        }
    }

    /// ‖ψ‖² or tr ρ.
    pub fn norm_or_trace(&self) -> f64 {
        match self {
            Self::Pure { psi, .. } => psi.iter().map(|z| z.norm_sqr()).sum(),
            Self::Density { rho, .. } => rho.diag().iter().map(|z| z.re).sum(),
        }
    }

    /// Smallest eigenvalue of the density matrix (0 for pure states).
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Self::Pure { .. } => 0.0,
            Self::Density { rho, .. } => hermitian_eigen(rho).0[0],
        }
    }

    /// Population in the highest `levels` Fock states.
    pub fn top_fock_population(&self, levels: usize) -> f64 {
        let layout = self.layout();
        match self {
            Self::Pure { psi, .. } => top_population(layout, psi.as_slice().unwrap(), levels),
            Self::Density { rho, .. } => {
                let diag: Vec<C64> = rho.diag().to_vec();
                let n_f = layout.fock_dim();
                let lo = n_f.saturating_sub(levels);
                (0..layout.spin_dim())
                    .flat_map(|s| (lo..n_f).map(move |n| (s, n)))
                    .map(|(s, n)| diag[layout.index(s, n)].re)
                    .sum()
            }
        }
    }

    /// Spin density matrix with the motional mode traced out.
    pub fn reduced_spin_density(&self) -> Array2<C64> {
        let layout = self.layout();
        let (ns, nf) = (layout.spin_dim(), layout.fock_dim());
        let mut out = Array2::zeros((ns, ns));
        match self {
            Self::Pure { psi, .. } => accumulate_reduced(&mut out, layout, psi.as_slice().unwrap(), 1.0),
            Self::Density { rho, .. } => {
                for s1 in 0..ns {
                    for s2 in 0..ns {
                        out[(s1, s2)] = (0..nf).map(|n| rho[(layout.index(s1, n), layout.index(s2, n))]).sum();
                    }
                }
            }
        }
        out
    }

    /// ⟨φ|ρ|φ⟩ for a pure target φ.
    pub fn fidelity_with(&self, target: &Array1<C64>) -> f64 {
        match self {
            Self::Pure { psi, .. } => crate::linalg::vdot(target, psi).norm_sqr(),
            Self::Density { rho, .. } => crate::linalg::vdot(target, &rho.dot(target)).re,
        }
    }

    /// Apply a unitary acting on the spin register only.
    pub fn apply_spin_unitary(&self, u: &Array2<C64>) -> Self {
        let layout = self.layout();
        match self {
            Self::Pure { psi, .. } => Self::Pure { layout, psi: spin_unitary_on_vector(layout, u, psi) },
            Self::Density { rho, .. } => {
                let dim = layout.dim();
                let mut tmp = Array2::zeros((dim, dim));
                for j in 0..dim {
                    let col = spin_unitary_on_vector(layout, u, &rho.column(j).to_owned());
                    tmp.column_mut(j).assign(&col);
                }
                let mut out = Array2::zeros((dim, dim));
                for i in 0..dim {
                    let row: Array1<C64> = tmp.row(i).mapv(|z| z.conj());
                    let col = spin_unitary_on_vector(layout, u, &row);
                    out.row_mut(i).assign(&col.mapv(|z| z.conj()));
                }
                Self::Density { layout, rho: out }
            }
        }
    }
}

fn top_population(layout: HilbertLayout, psi: &[C64], levels: usize) -> f64 {
    let nf = layout.fock_dim();
    let lo = nf.saturating_sub(levels);
    (0..layout.spin_dim()).map(|s| psi[s * nf + lo..(s + 1) * nf].iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
}

fn accumulate_reduced(out: &mut Array2<C64>, layout: HilbertLayout, psi: &[C64], weight: f64) {
    let (ns, nf) = (layout.spin_dim(), layout.fock_dim());
    for s1 in 0..ns {
        for s2 in 0..ns {
            let a = &psi[s1 * nf..(s1 + 1) * nf];
            let b = &psi[s2 * nf..(s2 + 1) * nf];
            let v: C64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
            out[(s1, s2)] += v * weight;
        }
    }
}

pub(crate) fn spin_unitary_on_vector(layout: HilbertLayout, u: &Array2<C64>, psi: &Array1<C64>) -> Array1<C64> {
    let (ns, nf) = (layout.spin_dim(), layout.fock_dim());
    assert_eq!(u.dim(), (ns, ns), "spin unitary has the wrong dimension");
    let mut out = Array1::zeros(psi.len());
    for so in 0..ns {
        for si in 0..ns {
            let m = u[(so, si)];
            if m == ZERO {
                continue;
            }
            for n in 0..nf {
                out[so * nf + n] += m * psi[si * nf + n];
            }
        }
    }
    out
}

/// Anything that can apply H(t)/ħ (rad/s) to a state vector.
pub trait Generator: Sync {
    fn dim(&self) -> usize;

    /// Overwrite `out` with H(t)·psi.
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);
}

/// Wraps a closure returning a dense Hamiltonian matrix.
pub struct DenseGenerator<F> {
    dim: usize,
    build: F,
}

impl<F: Fn(f64) -> OperatorMatrix + Sync> DenseGenerator<F> {
    pub fn new(dim: usize, build: F) -> Self {
        Self { dim, build }
    }
}

impl<F: Fn(f64) -> OperatorMatrix + Sync> Generator for DenseGenerator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let h = (self.build)(t);
        for (i, row) in h.rows().into_iter().enumerate() {
            out[i] = row.iter().zip(psi).map(|(a, b)| a * b).sum();
        }
    }
}

/// Motional factor of a structured term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeOp {
    Identity,
    /// â
    Lower,
    /// â†
    Raise,
}

/// One `spin ⊗ mode` operator product.
#[derive(Clone, Debug)]
pub struct Term {
    pub spin: Array2<C64>,
    pub mode: ModeOp,
}

impl Term {
    pub fn new(spin: Array2<C64>, mode: ModeOp) -> Self {
        Self { spin, mode }
    }
}

type CoefficientFn = Box<dyn Fn(f64, &mut [C64]) + Send + Sync>;

/// H(t) = Σ_k c_k(t) · spin_k ⊗ mode_k.
pub struct TermGenerator {
    layout: HilbertLayout,
    terms: Vec<Term>,
    entries: Vec<Vec<(usize, usize, C64)>>,
    sqrt_n: Vec<f64>,
    coefficients: CoefficientFn,
}

const MAX_TERMS: usize = 8;

impl TermGenerator {
    pub fn new(
        layout: HilbertLayout,
        terms: Vec<Term>,
        coefficients: impl Fn(f64, &mut [C64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(terms.len() <= MAX_TERMS, "at most {MAX_TERMS} terms");
        let entries = terms
            .iter()
            .map(|term| {
                assert_eq!(term.spin.dim(), (layout.spin_dim(), layout.spin_dim()));
                let mut e = Vec::new();
                for ((so, si), &v) in term.spin.indexed_iter() {
                    if v != ZERO {
                        e.push((so, si, v));
                    }
                }
                e
            })
            .collect();
        let sqrt_n = (0..layout.fock_dim()).map(|n| (n as f64).sqrt()).collect();
        Self { layout, terms, entries, sqrt_n, coefficients: Box::new(coefficients) }
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn coefficients_at(&self, t: f64) -> Vec<C64> {
        let mut c = vec![ZERO; self.terms.len()];
        (self.coefficients)(t, &mut c);
        c
    }

    /// Dense matrix of H(t); for checks against the reference builders.
    pub fn to_dense(&self, t: f64) -> OperatorMatrix {
        let nf = self.layout.fock_dim();
        let mode_matrix = |op: ModeOp| -> Array2<C64> {
            let a = crate::algebra::fock_lowering(nf);
            match op {
                ModeOp::Identity => Array2::eye(nf),
                ModeOp::Lower => a,
                ModeOp::Raise => crate::algebra::dagger(&a),
            }
        };
        let c = self.coefficients_at(t);
        let dim = self.layout.dim();
        let mut h = Array2::zeros((dim, dim));
        for (term, ck) in self.terms.iter().zip(c) {
            h = h + crate::algebra::kron(&term.spin, &mode_matrix(term.mode)) * ck;
        }
        h
    }
}

impl Generator for TermGenerator {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let nf = self.layout.fock_dim();
        let mut coeff = [ZERO; MAX_TERMS];
        let coeff = &mut coeff[..self.terms.len()];
        (self.coefficients)(t, coeff);
        out.iter_mut().for_each(|z| *z = ZERO);
        for ((term, entries), &c) in self.terms.iter().zip(&self.entries).zip(coeff.iter()) {
            if c == ZERO {
                continue;
            }
            for &(so, si, v) in entries {
                let m = c * v;
                let src = &psi[si * nf..(si + 1) * nf];
                let dst = &mut out[so * nf..(so + 1) * nf];
                match term.mode {
                    ModeOp::Identity => {
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += m * s;
                        }
                    }
                    ModeOp::Lower => {
                        for n in 0..nf - 1 {
                            dst[n] += m * (self.sqrt_n[n + 1] * src[n + 1]);
                        }
                    }
                    ModeOp::Raise => {
                        for n in 1..nf {
                            dst[n] += m * (self.sqrt_n[n] * src[n - 1]);
                        }
                    }
                }
            }
        }
    }
}

/// Integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Classic fixed-step fourth-order Runge-Kutta (midpoint evaluations).
    Rk4,
    /// Fourth-order Runge-Kutta with step doubling and error control.
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt_max: f64,
    pub method: Method,
    /// Local error target per step (adaptive only).
    pub tolerance: f64,
    /// Largest allowed population in the top two Fock levels.
    pub truncation_limit: f64,
}

impl IntegratorConfig {
    pub const POINTS_PER_PERIOD: f64 = 50.0;
    pub const DEFAULT_TRUNCATION_LIMIT: f64 = 1e-6;

    pub fn fixed(dt_max: f64) -> Result<Self> {
        let cfg =
            Self { dt_max, method: Method::Rk4, tolerance: 1e-10, truncation_limit: Self::DEFAULT_TRUNCATION_LIMIT };
        cfg.validate()?;
        Ok(cfg)
    }

    /// min(2π/ω_z, 2π/δ)/50 for the given mode frequency and half beat note.
    pub fn for_frequencies(omega_z: f64, delta: f64) -> Self {
        let tau = std::f64::consts::TAU;
        let mut period = tau / omega_z;
        if delta > 0.0 {
            period = period.min(tau / delta);
        }
        Self {
            dt_max: period / Self::POINTS_PER_PERIOD,
            method: Method::Rk4,
            tolerance: 1e-10,
            truncation_limit: Self::DEFAULT_TRUNCATION_LIMIT,
        }
    }

    pub fn with_dt(mut self, dt_max: f64) -> Self {
        self.dt_max = dt_max;
        self
    }

    pub fn adaptive(mut self, tolerance: f64) -> Self {
        self.method = Method::Adaptive;
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::param("dt_max", format!("must be positive, got {}", self.dt_max)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if !(self.truncation_limit > 0.0) {
            return Err(Error::param("truncation_limit", "must be positive"));
        }
        Ok(())
    }
}

/// Evolve `state` from `t0` to `t1` under `generator`.
///
/// Pure states follow i dψ/dt = Hψ, density matrices dρ/dt = −i[H, ρ].
pub fn propagate(
    state: &SpinMotionState,
    generator: &dyn Generator,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<SpinMotionState> {
    cfg.validate()?;
    if !(t1 >= t0) {
        return Err(Error::param("t1", format!("must be >= t0 ({t1:e} < {t0:e})")));
    }
    let layout = state.layout();
    if generator.dim() != layout.dim() {
        return Err(Error::DimensionMismatch { expected: layout.dim(), got: generator.dim() });
    }
    match state {
        SpinMotionState::Pure { psi, .. } => {
            let psi = evolve_pure(layout, psi.clone(), 1.0, generator, t0, t1, cfg)?;
            Ok(SpinMotionState::Pure { layout, psi })
        }
        SpinMotionState::Density { rho, .. } => {
            let dim = layout.dim();
            let mut col_in = vec![ZERO; dim];
            let mut col_out = vec![ZERO; dim];
            let mut h_rho = vec![ZERO; dim * dim];
            let mut deriv = |t: f64, y: &[C64], dy: &mut [C64]| {
                for j in 0..dim {
                    for i in 0..dim {
                        col_in[i] = y[i * dim + j];
                    }
                    generator.apply(t, &col_in, &mut col_out);
                    for i in 0..dim {
                        h_rho[i * dim + j] = col_out[i];
                    }
                }
                for i in 0..dim {
                    for j in 0..dim {
                        let comm = h_rho[i * dim + j] - h_rho[j * dim + i].conj();
                        dy[i * dim + j] = C64::new(comm.im, -comm.re);
                    }
                }
            };
            let top = |y: &[C64]| {
                let nf = layout.fock_dim();
                (0..layout.spin_dim())
                    .flat_map(|s| (nf.saturating_sub(2)..nf).map(move |n| s * nf + n))
                    .map(|k| y[k * dim + k].re)
                    .sum::<f64>()
            };
            let y = integrate(rho.iter().copied().collect(), &mut deriv, &top, t0, t1, cfg)?;
            let rho = Array2::from_shape_vec((dim, dim), y).expect("shape");
            Ok(SpinMotionState::Density { layout, rho })
        }
    }
}

pub(crate) fn evolve_pure(
    layout: HilbertLayout,
    psi: Array1<C64>,
    weight: f64,
    generator: &dyn Generator,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Array1<C64>> {
    let mut deriv = |t: f64, y: &[C64], dy: &mut [C64]| {
        generator.apply(t, y, dy);
        for z in dy.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    };
    let top = |y: &[C64]| weight * top_population(layout, y, 2);
    let y = integrate(psi.to_vec(), &mut deriv, &top, t0, t1, cfg)?;
    Ok(Array1::from(y))
}

type Deriv<'a> = dyn FnMut(f64, &[C64], &mut [C64]) + 'a;

fn integrate(
    mut y: Vec<C64>,
    deriv: &mut Deriv<'_>,
    top_population: &dyn Fn(&[C64]) -> f64,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<C64>> {
    let check = |y: &[C64], t: f64| -> Result<()> {
        let p = top_population(y);
        if p > cfg.truncation_limit {
            return Err(Error::FockTruncation { population: p, t });
        }
        Ok(())
    };
    check(&y, t0)?;
    if t1 == t0 {
        return Ok(y);
    }
    let mut ws = Rk4Workspace::new(y.len());
    match cfg.method {
        Method::Rk4 => {
            let steps = ((t1 - t0) / cfg.dt_max).ceil().max(1.0) as usize;
            let dt = (t1 - t0) / steps as f64;
            for k in 0..steps {
                let t = t0 + k as f64 * dt;
                ws.step(deriv, t, dt, &mut y);
                check(&y, t + dt)?;
            }
        }
        Method::Adaptive => {
            let min_dt = 1e-12 * (t1 - t0).max(1e-15);
            let mut t = t0;
            let mut dt = cfg.dt_max.min(t1 - t0);
            let mut full = vec![ZERO; y.len()];
            let mut half = vec![ZERO; y.len()];
            while t < t1 {
                let last = t + dt >= t1;
                let h = if last { t1 - t } else { dt };
                full.copy_from_slice(&y);
                ws.step(deriv, t, h, &mut full);
                half.copy_from_slice(&y);
                ws.step(deriv, t, 0.5 * h, &mut half);
                ws.step(deriv, t + 0.5 * h, 0.5 * h, &mut half);
                let err = full.iter().zip(&half).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / 15.0;
                if err.is_finite() && err <= cfg.tolerance {
                    // Richardson extrapolation of the two estimates.
                    for (yk, (hk, fk)) in y.iter_mut().zip(half.iter().zip(&full)) {
                        *yk = hk + (hk - fk) / 15.0;
                    }
                    t = if last { t1 } else { t + h };
                    check(&y, t)?;
                }
                let factor = if !err.is_finite() {
                    0.2
                } else if err == 0.0 {
                    2.0
                } else {
                    (0.9 * (cfg.tolerance / err).powf(0.2)).clamp(0.2, 2.0)
                };
                dt = (h * factor).min(cfg.dt_max);
                if dt < min_dt {
                    return Err(Error::StepUnderflow { t, dt });
                }
            }
        }
    }
    Ok(y)
}

struct Rk4Workspace {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        Self { k1: vec![ZERO; n], k2: vec![ZERO; n], k3: vec![ZERO; n], k4: vec![ZERO; n], tmp: vec![ZERO; n] }
    }

    fn step(&mut self, deriv: &mut Deriv<'_>, t: f64, dt: f64, y: &mut [C64]) {
        let half = 0.5 * dt;
        deriv(t, y, &mut self.k1);
        for ((tmp, yk), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *tmp = yk + k * half;
        }
        deriv(t + half, &self.tmp, &mut self.k2);
        for ((tmp, yk), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *tmp = yk + k * half;
        }
        deriv(t + half, &self.tmp, &mut self.k3);
        for ((tmp, yk), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *tmp = yk + k * dt;
        }
        deriv(t + dt, &self.tmp, &mut self.k4);
        let w = dt / 6.0;
        for (i, yk) in y.iter_mut().enumerate() {
            *yk += (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]) * w;
        }
    }
}

/// Probability distribution over the spin configurations of a subset of ions.
#[derive(Clone, Debug, PartialEq)]
pub struct Populations {
    ions: Vec<usize>,
    probs: Vec<f64>,
}

impl Populations {
    pub fn ions(&self) -> &[usize] {
        &self.ions
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the configuration `spins`, listed in the order of `ions()`.
    pub fn get(&self, spins: &[Spin]) -> f64 {
        assert_eq!(spins.len(), self.ions.len(), "configuration length mismatch");
        let idx = spins.iter().fold(0usize, |acc, s| (acc << 1) | usize::from(*s == Spin::Down));
        self.probs[idx]
    }

    /// Label such as "↑↓" for entry `idx`.
    pub fn label(&self, idx: usize) -> String {
        let n = self.ions.len();
        (0..n).map(|k| if (idx >> (n - 1 - k)) & 1 == 0 { '↑' } else { '↓' }).collect()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Spin-configuration probabilities of `ions` with the mode traced out.
/// An empty `ions` slice selects every ion.
pub fn populations(state: &SpinMotionState, ions: &[usize]) -> Populations {
    populations_from_reduced(&state.reduced_spin_density(), state.layout().n_spins(), ions)
}

pub(crate) fn populations_from_reduced(reduced: &Array2<C64>, n_spins: usize, ions: &[usize]) -> Populations {
    let ions: Vec<usize> = if ions.is_empty() { (0..n_spins).collect() } else { ions.to_vec() };
    assert!(ions.iter().all(|&i| i < n_spins), "ion index out of range");
    let mut probs = vec![0.0; 1 << ions.len()];
    for s in 0..(1usize << n_spins) {
        let key = ions.iter().fold(0usize, |acc, &ion| (acc << 1) | ((s >> (n_spins - 1 - ion)) & 1));
        probs[key] += reduced[(s, s)].re;
    }
    Populations { ions, probs }
}

/// Weighted set of pure states representing a mixed state exactly.
#[derive(Clone, Debug)]
pub struct Ensemble {
    layout: HilbertLayout,
    members: Vec<(f64, Array1<C64>)>,
}

impl Ensemble {
    /// Weight below which thermal Fock components are dropped (weights are renormalised).
    pub const DEFAULT_CUTOFF: f64 = 1e-9;

    pub fn pure(layout: HilbertLayout, psi: Array1<C64>) -> Self {
        Self { layout, members: vec![(1.0, psi)] }
    }

    /// |spin⟩⟨spin| ⊗ ρ_th as a mixture of |spin⟩|n⟩.
    pub fn thermal(layout: HilbertLayout, nbar: f64, spin: &Array1<C64>, cutoff: f64) -> Result<Self> {
        let pops = crate::algebra::thermal_populations(nbar, layout.fock_dim())?;
        let kept: Vec<(usize, f64)> = pops.into_iter().enumerate().filter(|&(_, p)| p >= cutoff).collect();
        let total: f64 = kept.iter().map(|(_, p)| p).sum();
        let members = kept
            .into_iter()
            .map(|(n, p)| Ok((p / total, crate::algebra::product_state(layout, spin, n)?.psi().unwrap().clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layout, members })
    }

    /// Spectral decomposition of a state, dropping eigenvalues below 1e-12.
    pub fn from_state(state: &SpinMotionState) -> Self {
        let layout = state.layout();
        match state {
            SpinMotionState::Pure { psi, .. } => Self::pure(layout, psi.clone()),
            SpinMotionState::Density { rho, .. } => {
                let (vals, vecs) = hermitian_eigen(rho);
                let members = vals
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 1e-12)
                    .map(|(k, &w)| (w, vecs.column(k).to_owned()))
                    .collect();
                Self { layout, members }
            }
        }
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn members(&self) -> &[(f64, Array1<C64>)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn to_state(&self) -> SpinMotionState {
        if self.members.len() == 1 && (self.members[0].0 - 1.0).abs() < 1e-15 {
            return SpinMotionState::Pure { layout: self.layout, psi: self.members[0].1.clone() };
        }
        let dim = self.layout.dim();
        let mut rho = Array2::zeros((dim, dim));
        for (w, psi) in &self.members {
            for i in 0..dim {
                if psi[i] == ZERO {
                    continue;
                }
                for j in 0..dim {
                    rho[(i, j)] += psi[i] * psi[j].conj() * *w;
                }
            }
        }
        SpinMotionState::Density { layout: self.layout, rho }
    }

    pub fn propagate(&self, generator: &dyn Generator, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if generator.dim() != self.layout.dim() {
            return Err(Error::DimensionMismatch { expected: self.layout.dim(), got: generator.dim() });
        }
        let members = self
            .members
            .iter()
            .map(|(w, psi)| Ok((*w, evolve_pure(self.layout, psi.clone(), *w, generator, t0, t1, cfg)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layout: self.layout, members })
    }

    pub fn apply_spin_unitary(&self, u: &Array2<C64>) -> Self {
        let members = self.members.iter().map(|(w, psi)| (*w, spin_unitary_on_vector(self.layout, u, psi))).collect();
        Self { layout: self.layout, members }
    }

    /// Apply an arbitrary map to every member vector.
    pub fn map_members(&self, f: impl Fn(&Array1<C64>) -> Array1<C64>) -> Self {
        Self { layout: self.layout, members: self.members.iter().map(|(w, psi)| (*w, f(psi))).collect() }
    }

    pub fn reduced_spin_density(&self) -> Array2<C64> {
        let ns = self.layout.spin_dim();
        let mut out = Array2::zeros((ns, ns));
        for (w, psi) in &self.members {
            accumulate_reduced(&mut out, self.layout, psi.as_slice().unwrap(), *w);
        }
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|(w, psi)| w * psi.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    pub fn top_fock_population(&self, levels: usize) -> f64 {
        self.members.iter().map(|(w, psi)| w * top_population(self.layout, psi.as_slice().unwrap(), levels)).sum()
    }
}
