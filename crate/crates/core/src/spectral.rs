//! FFT helpers shared by the loop and reparametrization code.
//!
//! Periodic loops use integer frequencies, twisted loops use the half-integer
//! set `k + 1/2`, `k = -N/2 .. N/2-1`, which is symmetric so there is no
//! Nyquist ambiguity in the twisted case.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::loops::Parity;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized forward DFT in place.
pub(crate) fn fft(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// Unnormalized inverse DFT in place.
pub(crate) fn ifft(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// Signed integer wavenumber of DFT slot `idx`; the Nyquist slot maps to `-N/2`.
pub(crate) fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Frequency (cycles per unit tau) carried by DFT slot `idx`.
pub(crate) fn frequency(idx: usize, n: usize, parity: Parity) -> f64 {
    let k = wavenumber(idx, n) as f64;
    match parity {
        Parity::Periodic => k,
        Parity::Antiperiodic => k + 0.5,
    }
}

/// True for the periodic Nyquist slot, whose odd derivatives are dropped.
pub(crate) fn is_nyquist(idx: usize, n: usize, parity: Parity) -> bool {
    parity == Parity::Periodic && idx == n / 2
}

/// Fourier coefficients `c` such that `samples[j] = sum_idx c[idx] e^{2 pi i nu_idx j/N}`.
pub(crate) fn coefficients(samples: &[Complex64], parity: Parity) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = match parity {
        Parity::Periodic => samples.to_vec(),
        Parity::Antiperiodic => samples
            .iter()
            .enumerate()
            .map(|(j, z)| z * Complex64::from_polar(1.0, -PI * j as f64 / n as f64))
            .collect(),
    };
    fft(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Inverse of [`coefficients`].
pub(crate) fn synthesize(coeffs: &[Complex64], parity: Parity) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut buf = coeffs.to_vec();
    ifft(&mut buf);
    if parity == Parity::Antiperiodic {
        for (j, z) in buf.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, PI * j as f64 / n as f64);
        }
    }
    buf
}

/// Applies a Fourier multiplier `m(idx)` to the samples.
pub(crate) fn apply_multiplier<F>(samples: &[Complex64], parity: Parity, m: F) -> Vec<Complex64>
where
    F: Fn(usize) -> Complex64,
{
    let mut c = coefficients(samples, parity);
    for (idx, ck) in c.iter_mut().enumerate() {
        *ck *= m(idx);
    }
    synthesize(&c, parity)
}

/// `d^order/dtau^order` by spectral multiplication. The periodic Nyquist mode
/// is zeroed for every order >= 1.
pub(crate) fn derivative(samples: &[Complex64], parity: Parity, order: u32) -> Vec<Complex64> {
    let n = samples.len();
    if order == 0 {
        return samples.to_vec();
    }
    apply_multiplier(samples, parity, |idx| {
        if is_nyquist(idx, n, parity) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * frequency(idx, n, parity)).powu(order)
        }
    })
}

/// Zero-mean periodic antiderivative of real periodic samples (Nyquist dropped).
pub(crate) fn antiderivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let samples: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    apply_multiplier(&samples, Parity::Periodic, |idx| {
        let k = wavenumber(idx, n);
        if k == 0 || is_nyquist(idx, n, Parity::Periodic) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / (2.0 * PI * k as f64))
        }
    })
    .iter()
    .map(|c| c.re)
    .collect()
}

/// Spectral cumulative integral `S w` at the nodes: `int_0^{tau_j} w`, for a
/// real periodic integrand represented by its samples.
pub(crate) fn cumulative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let anti = antiderivative(values);
    let base = anti[0];
    (0..n).map(|j| mean * j as f64 / n as f64 + anti[j] - base).collect()
}

/// Exact transpose of [`cumulative`] with respect to the plain dot product.
///
/// For smooth integrands with zero mean this approximates `int_{tau_j}^1 f`;
/// a nonzero mean contributes a band-limited sawtooth anchored at the basepoint.
pub(crate) fn cumulative_transpose(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let weighted = f.iter().enumerate().map(|(j, v)| v * j as f64 / n as f64).sum::<f64>() / n as f64;
    let total: f64 = f.iter().sum();
    let anti = antiderivative(f);
    let mut delta = vec![0.0; n];
    delta[0] = 1.0;
    let saw = antiderivative(&delta);
    (0..n).map(|i| weighted - anti[i] + total * saw[i]).collect()
}

/// Exact `int_0^1 tau f(tau) dtau` for a band-limited real periodic integrand.
pub(crate) fn first_moment(values: &[f64]) -> f64 {
    let n = values.len();
    let samples: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let c = coefficients(&samples, Parity::Periodic);
    let mut acc = c[0].re * 0.5;
    for (idx, ck) in c.iter().enumerate() {
        let k = wavenumber(idx, n);
        if k == 0 || is_nyquist(idx, n, Parity::Periodic) {
            continue;
        }
        // int_0^1 tau e^{2 pi i k tau} dtau = 1/(2 pi i k)
        acc += (ck / Complex64::new(0.0, 2.0 * PI * k as f64)).re;
    }
    acc
}
