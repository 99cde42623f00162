//! Composite spin ⊗ motion Hilbert space and the operators acting on it.
//!
//! Basis layout: the spin register is the slow index and the Fock level the
//! fast one, so the amplitude of spin configuration `s` and Fock level `n`
//! sits at `s * fock_dim + n`. Inside the spin register ion 0 is the most
//! significant bit. A bit value of 0 is |↑⟩ (σ_z = +1) and 1 is |↓⟩, so for
//! two ions the order is ↑↑, ↑↓, ↓↑, ↓↓.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::propagator::SpinMotionState;

/// Dense complex matrix on the composite space. Hamiltonians are stored as H/ħ in rad/s.
pub type OperatorMatrix = Array2<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Shape of the truncated Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertLayout {
    n_spins: usize,
    fock_dim: usize,
}

impl HilbertLayout {
    pub const MAX_SPINS: usize = 2;

    pub fn new(n_spins: usize, fock_dim: usize) -> Result<Self> {
        if n_spins == 0 || n_spins > Self::MAX_SPINS {
            return Err(Error::InvalidLayout(format!("n_spins must be 1 or 2, got {n_spins}")));
        }
        if fock_dim < 2 {
            return Err(Error::InvalidLayout(format!("fock_dim must be at least 2, got {fock_dim}")));
        }
        Ok(Self { n_spins, fock_dim })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn spin_dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.fock_dim
    }

    pub fn index(&self, spin: usize, fock: usize) -> usize {
        spin * self.fock_dim + fock
    }

    /// Same spin register with a different Fock truncation.
    pub fn with_fock_dim(&self, fock_dim: usize) -> Result<Self> {
        Self::new(self.n_spins, fock_dim)
    }
}

/// Single-spin basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    fn bit(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

pub fn sigma_x() -> Array2<C64> {
    ndarray::array![[ZERO, ONE], [ONE, ZERO]]
}

pub fn sigma_y() -> Array2<C64> {
    ndarray::array![[ZERO, -I], [I, ZERO]]
}

pub fn sigma_z() -> Array2<C64> {
    ndarray::array![[ONE, ZERO], [ZERO, -ONE]]
}

/// σ_φ = cos φ σ_x + sin φ σ_y.
pub fn sigma_phi(phi: f64) -> Array2<C64> {
    sigma_x() * C64::from(phi.cos()) + sigma_y() * C64::from(phi.sin())
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Embed a 2×2 operator acting on `ion` into the spin register.
pub fn embed_spin_op(n_spins: usize, ion: usize, op: &Array2<C64>) -> Array2<C64> {
    assert!(ion < n_spins, "ion index {ion} out of range for {n_spins} spins");
    let mut out = Array2::from_elem((1, 1), ONE);
    for k in 0..n_spins {
        let factor = if k == ion { op.clone() } else { identity(2) };
        out = kron(&out, &factor);
    }
    out
}

/// Spin-register part of Ŝ_φ = Σᵢ σ_φ⁽ⁱ⁾.
pub fn spin_pauli_sum(n_spins: usize, phi: f64) -> Array2<C64> {
    let s = sigma_phi(phi);
    (0..n_spins).fold(Array2::zeros((1 << n_spins, 1 << n_spins)), |acc, ion| acc + embed_spin_op(n_spins, ion, &s))
}

/// Spin-register part of Σᵢ cᵢ σ_z⁽ⁱ⁾.
pub fn spin_sz_sum(n_spins: usize, coupling: &[f64]) -> Result<Array2<C64>> {
    if coupling.len() != n_spins {
        return Err(Error::param("coupling", format!("expected {n_spins} coefficients, got {}", coupling.len())));
    }
    let sz = sigma_z();
    Ok(coupling.iter().enumerate().fold(Array2::zeros((1 << n_spins, 1 << n_spins)), |acc, (ion, &c)| {
        acc + embed_spin_op(n_spins, ion, &sz) * C64::from(c)
    }))
}

/// Ŝ_φ ⊗ I_fock.
pub fn pauli_sum(layout: HilbertLayout, phi: f64) -> OperatorMatrix {
    kron(&spin_pauli_sum(layout.n_spins(), phi), &identity(layout.fock_dim()))
}

/// Σᵢ cᵢ σ_z⁽ⁱ⁾ ⊗ I_fock.
///
/// A force that acts on one qubit level only has the projector form
/// (1 ± σ_z)/2. Only the σ_z half (coefficient ½) is represented here; the
/// identity half displaces the mode independently of the spin and is dropped.
pub fn sz_sum(layout: HilbertLayout, coupling: &[f64]) -> Result<OperatorMatrix> {
    for &c in coupling {
        if !(c.is_finite() && c.abs() <= 1.0 && c != 0.0) {
            return Err(Error::param("coupling", format!("coefficient {c} outside (0, 1]")));
        }
    }
    Ok(kron(&spin_sz_sum(layout.n_spins(), coupling)?, &identity(layout.fock_dim())))
}

/// Truncated annihilation operator on the Fock factor alone.
pub fn fock_lowering(fock_dim: usize) -> Array2<C64> {
    let mut a = Array2::zeros((fock_dim, fock_dim));
    for n in 1..fock_dim {
        a[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    a
}

/// (â, â†) on the full composite space.
pub fn ladder(layout: HilbertLayout) -> (OperatorMatrix, OperatorMatrix) {
    let a = kron(&identity(layout.spin_dim()), &fock_lowering(layout.fock_dim()));
    let ad = a.t().mapv(|z| z.conj());
    (a, ad)
}

/// Thermal Fock distribution p(n) ∝ (n̄/(n̄+1))ⁿ restricted to `fock_dim` levels.
pub fn thermal_populations(nbar: f64, fock_dim: usize) -> Result<Vec<f64>> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::param("nbar", format!("must be finite and >= 0, got {nbar}")));
    }
    if nbar == 0.0 {
        let mut p = vec![0.0; fock_dim];
        p[0] = 1.0;
        return Ok(p);
    }
    let ratio = nbar / (nbar + 1.0);
    let mut p: Vec<f64> = (0..fock_dim).map(|n| ratio.powi(n as i32)).collect();
    let norm: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= norm);
    Ok(p)
}

/// |spin⟩⟨spin| ⊗ ρ_th as a density matrix.
pub fn thermal_state(layout: HilbertLayout, nbar: f64, spin_state: &Array1<C64>) -> Result<SpinMotionState> {
    if spin_state.len() != layout.spin_dim() {
        return Err(Error::DimensionMismatch { expected: layout.spin_dim(), got: spin_state.len() });
    }
    let norm = spin_state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidState("zero spin vector".into()));
    }
    let spin = spin_state.mapv(|z| z / norm);
    let pops = thermal_populations(nbar, layout.fock_dim())?;
    let dim = layout.dim();
    let mut rho = Array2::zeros((dim, dim));
    for (s1, &c1) in spin.iter().enumerate() {
        for (s2, &c2) in spin.iter().enumerate() {
            let w = c1 * c2.conj();
            if w == ZERO {
                continue;
            }
            for (n, &p) in pops.iter().enumerate() {
                rho[(layout.index(s1, n), layout.index(s2, n))] = w * p;
            }
        }
    }
    SpinMotionState::density(layout, rho)
}

/// Product spin basis vector, e.g. `[Spin::Down, Spin::Down]`.
pub fn spin_basis(spins: &[Spin]) -> Array1<C64> {
    let n = spins.len();
    let idx = spins.iter().fold(0usize, |acc, s| (acc << 1) | s.bit());
    let mut v = Array1::zeros(1 << n);
    v[idx] = ONE;
    v
}

/// |spin⟩ ⊗ |n⟩.
pub fn product_state(layout: HilbertLayout, spin: &Array1<C64>, fock: usize) -> Result<SpinMotionState> {
    if spin.len() != layout.spin_dim() {
        return Err(Error::DimensionMismatch { expected: layout.spin_dim(), got: spin.len() });
    }
    if fock >= layout.fock_dim() {
        return Err(Error::param("fock", format!("level {fock} outside truncation {}", layout.fock_dim())));
    }
    let mut psi = Array1::zeros(layout.dim());
    for (s, &c) in spin.iter().enumerate() {
        psi[layout.index(s, fock)] = c;
    }
    SpinMotionState::pure(layout, psi)
}

/// Single-qubit rotation exp(−i θ σ_φ / 2).
pub fn rotation(theta: f64, phi: f64) -> Array2<C64> {
    let (s, c) = (0.5 * theta).sin_cos();
    identity(2) * C64::from(c) - sigma_phi(phi) * (I * s)
}

/// The same 2×2 unitary applied to every ion of the register.
pub fn global_rotation(n_spins: usize, u: &Array2<C64>) -> Array2<C64> {
    (0..n_spins).fold(Array2::from_elem((1, 1), ONE), |acc, _| kron(&acc, u))
}

/// ‖H − H†‖_max ≤ rel_tol · ‖H‖_max (absolute for the zero matrix).
pub fn is_hermitian(m: &Array2<C64>, rel_tol: f64) -> bool {
    let (r, c) = m.dim();
    if r != c {
        return false;
    }
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let mut worst = 0.0f64;
    for i in 0..r {
        for j in 0..c {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst <= rel_tol * scale.max(f64::MIN_POSITIVE)
}

pub(crate) fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hermitian_eigenvalues(m: &Array2<C64>) -> Vec<f64> {
        // Jacobi sweeps on the real symmetric embedding [[Re, -Im], [Im, Re]];
        // each eigenvalue appears twice.
        let n = m.nrows();
        let mut a = Array2::<f64>::zeros((2 * n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = m[(i, j)].re;
                a[(i + n, j + n)] = m[(i, j)].re;
                a[(i, j + n)] = -m[(i, j)].im;
                a[(i + n, j)] = m[(i, j)].im;
            }
        }
        let size = 2 * n;
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..size {
                for q in p + 1..size {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-28 {
                break;
            }
            for p in 0..size {
                for q in p + 1..size {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..size {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..size {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..size).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev.into_iter().step_by(2).collect()
    }

    fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn layout_validation() {
        assert!(HilbertLayout::new(0, 10).is_err());
        assert!(HilbertLayout::new(3, 10).is_err());
        assert!(HilbertLayout::new(1, 1).is_err());
        let l = HilbertLayout::new(2, 7).unwrap();
        assert_eq!(l.dim(), 28);
        assert_eq!(l.index(3, 2), 23);
    }

    #[test]
    fn pauli_sum_one_spin() {
        let l = HilbertLayout::new(1, 3).unwrap();
        assert_abs_diff_eq!(max_abs_diff(&pauli_sum(l, 0.0), &kron(&sigma_x(), &identity(3))), 0.0);
        let y = pauli_sum(l, std::f64::consts::FRAC_PI_2);
        assert!(max_abs_diff(&y, &kron(&sigma_y(), &identity(3))) < 1e-15);
    }

    #[test]
    fn pauli_sum_two_spin_spectrum() {
        let ev = hermitian_eigenvalues(&spin_pauli_sum(2, 0.0));
        for (got, want) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn pauli_sum_tensor_structure() {
        let l = HilbertLayout::new(2, 4).unwrap();
        for phi in [0.0, 0.3, 1.9, 4.0] {
            let s = sigma_phi(phi);
            let expected = kron(&kron(&s, &identity(2)), &identity(4)) + kron(&kron(&identity(2), &s), &identity(4));
            assert_eq!(pauli_sum(l, phi), expected);
        }
    }

    #[test]
    fn sz_sum_examples() {
        let l1 = HilbertLayout::new(1, 2).unwrap();
        let sz = sz_sum(l1, &[1.0]).unwrap();
        assert_eq!(sz, kron(&sigma_z(), &identity(2)));

        let l2 = HilbertLayout::new(2, 2).unwrap();
        let full = spin_sz_sum(2, &[1.0, 1.0]).unwrap();
        let ev = hermitian_eigenvalues(&full);
        for (got, want) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let half = spin_sz_sum(2, &[0.5, 0.5]).unwrap();
        let ev = hermitian_eigenvalues(&half);
        for (got, want) in ev.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert!(sz_sum(l2, &[1.0]).is_err());
        assert!(sz_sum(l2, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn ladder_properties() {
        let l = HilbertLayout::new(1, 2).unwrap();
        let a = fock_lowering(2);
        assert_eq!(a, ndarray::array![[ZERO, ONE], [ZERO, ZERO]]);
        let (a_full, ad_full) = ladder(l);
        assert_eq!(a_full, kron(&identity(2), &a));
        assert!(is_hermitian(&(&a_full + &ad_full), 1e-15));

        let n = 9;
        let a = fock_lowering(n);
        let ad = dagger(&a);
        let num = ad.dot(&a);
        for k in 0..n {
            assert_abs_diff_eq!(num[(k, k)].re, k as f64, epsilon = 1e-13);
        }
        let comm = a.dot(&ad) - ad.dot(&a);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let want = if i == j { ONE } else { ZERO };
                assert!((comm[(i, j)] - want).norm() < 1e-13);
            }
        }
        // The top level carries the truncation defect.
        assert!((comm[(n - 1, n - 1)] - ONE).norm() > 1.0);
    }

    #[test]
    fn thermal_state_properties() {
        let l = HilbertLayout::new(1, 20).unwrap();
        let down = spin_basis(&[Spin::Down]);
        let rho = thermal_state(l, 0.0, &down).unwrap();
        let m = rho.density_matrix();
        assert_abs_diff_eq!(m[(l.index(1, 0), l.index(1, 0))].re, 1.0);

        let p = thermal_populations(0.1, 20).unwrap();
        // Geometric series: p(0) = (1 - r) / (1 - r^N), r = n̄/(n̄+1).
        let r: f64 = 0.1 / 1.1;
        let oracle = (1.0 - r) / (1.0 - r.powi(20));
        assert_abs_diff_eq!(p[0], oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 0.909090909, epsilon = 1e-9);
        assert!(p.windows(2).all(|w| w[1] <= w[0]));

        for nbar in [0.0, 0.1, 1.0, 5.0] {
            let rho = thermal_state(l, nbar, &spin_basis(&[Spin::Up])).unwrap();
            let tr: C64 = rho.density_matrix().diag().sum();
            assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-12);
        }
        assert!(thermal_state(l, -0.1, &down).is_err());
    }

    #[test]
    fn rotation_is_unitary_and_composes() {
        let u = rotation(0.7, 1.3);
        let prod = u.dot(&dagger(&u));
        assert!(max_abs_diff(&prod, &identity(2)) < 1e-15);
        let half = rotation(std::f64::consts::FRAC_PI_2, 0.4);
        let full = rotation(std::f64::consts::PI, 0.4);
        assert!(max_abs_diff(&half.dot(&half), &full) < 1e-15);
    }

    #[test]
    fn basis_ordering() {
        let v = spin_basis(&[Spin::Up, Spin::Down]);
        assert_eq!(v[1], ONE);
        let v = spin_basis(&[Spin::Down, Spin::Down]);
        assert_eq!(v[3], ONE);
    }
}
