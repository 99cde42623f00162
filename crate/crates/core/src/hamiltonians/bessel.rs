//! Bessel functions of the first kind, integer order.
//!
//! Miller's backward recurrence J_{k-1} = (2k/x) J_k − J_{k+1}, started well
//! above max(n, |x|) and normalised with J_0 + 2 Σ J_{2k} = 1.

use crate::error::{Error, Result};

/// Largest |x| for which accuracy is validated.
pub const BESSEL_DOMAIN: f64 = 20.0;

/// J_n(x) for integer n ≥ 0 and |x| ≤ 20.
pub fn bessel_j(n: usize, x: f64) -> Result<f64> {
    Ok(bessel_j_upto(n, x)?[n])
}

/// [J_0(x), J_1(x), …, J_{n_max}(x)].
pub fn bessel_j_upto(n_max: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || x.abs() > BESSEL_DOMAIN {
        return Err(Error::BesselDomain(x));
    }
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let ax = x.abs();
    let scale_ref = n_max.max(ax.ceil() as usize);
    let start = 2 * ((scale_ref + 30 + (40.0 * scale_ref as f64).sqrt() as usize) / 2);

    let two_over_x = 2.0 / ax;
    let mut j_next = 0.0; // J_{k+1}
    let mut j_cur = 1e-300; // J_k, arbitrary seed
    let mut even_sum = 0.0;
    for k in (1..=start).rev() {
        let j_prev = k as f64 * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds J_{k-1}
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            even_sum *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
        let idx = k - 1;
        if idx <= n_max {
            out[idx] = j_cur;
        }
        if idx % 2 == 0 && idx > 0 {
            even_sum += j_cur;
        }
    }
    let norm = j_cur + 2.0 * even_sum;
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    Ok(out)
}
