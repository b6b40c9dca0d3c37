#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use orbits_core::{make_preset, FieldModel, Loop, Parity};
use rand::Rng;

pub fn expi(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// Radius of the period-one circular Kepler orbit.
pub fn kepler_radius() -> f64 {
    (2.0 * PI).powf(-2.0 / 3.0)
}

/// Circular radius in a frame rotating at rate `omega`: `1/r^3 = (2 pi + omega)^2`.
pub fn rotating_radius(omega: f64) -> f64 {
    (2.0 * PI + omega).powf(-2.0 / 3.0)
}

/// Amplitude of the collision orbit `A cos(pi k tau)`: `A^6 = 2 / (pi k)^2`.
pub fn collision_amplitude(k: u32) -> f64 {
    let w = PI * k as f64;
    (2.0 / (w * w)).powf(1.0 / 6.0)
}

pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// One instance of every preset, with nontrivial parameters.
pub fn all_models() -> Vec<FieldModel> {
    vec![
        FieldModel::kepler(),
        FieldModel::rotating_kepler(0.8).unwrap(),
        make_preset("forced_stark", &params(&[("f_re", 0.3), ("f_im", -0.2), ("m", 2.0)])).unwrap(),
        make_preset(
            "bicircular",
            &params(&[("m_sun", 50.0), ("a_sun", 12.0), ("omega_sun", 1.0)]),
        )
        .unwrap(),
    ]
}

pub fn bicircular(m_sun: f64) -> FieldModel {
    make_preset("bicircular", &params(&[("m_sun", m_sun)])).unwrap()
}

fn base(parity: Parity, tau: f64) -> Complex64 {
    match parity {
        Parity::Periodic => expi(2.0 * PI * tau),
        Parity::Antiperiodic => expi(PI * tau),
    }
}

/// A random loop with modes `base * e^{2 pi i k tau}`, `|k| <= band`.
/// With `dominant` the base mode has unit amplitude and the others share
/// at most `0.3`, so `0.7 <= |z| <= 1.3`; otherwise `|z| <= 1`. Both are
/// then multiplied by `scale`.
pub fn random_loop<R: Rng>(rng: &mut R, n: usize, parity: Parity, band: i32, dominant: bool, scale: f64) -> Loop {
    let modes: Vec<(i32, Complex64)> = (-band..=band)
        .map(|k| {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (k, c)
        })
        .collect();
    let total: f64 = modes.iter().filter(|(k, _)| *k != 0).map(|(_, c)| c.norm()).sum();
    let all: f64 = modes.iter().map(|(_, c)| c.norm()).sum();
    let phase = rng.gen_range(0.0..2.0 * PI);
    Loop::from_fn(n, parity, |t| {
        let mut v = Complex64::new(0.0, 0.0);
        for (k, c) in &modes {
            let c = if dominant {
                if *k == 0 {
                    expi(phase)
                } else {
                    c * (0.3 / total)
                }
            } else {
                c / all
            };
            v += c * expi(2.0 * PI * *k as f64 * t);
        }
        v * base(parity, t) * scale
    })
    .unwrap()
}

/// Multiplies `z` by `1 + amp * p` with `p` a random band-limited function,
/// real-valued when `real` is set.
pub fn perturb<R: Rng>(rng: &mut R, z: &Loop, amp: f64, real: bool) -> Loop {
    let coeffs: Vec<[f64; 4]> = (0..4)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let n = z.len();
    let samples = (0..n)
        .map(|j| {
            let t = j as f64 / n as f64;
            let mut p = Complex64::new(0.0, 0.0);
            for (k, c) in coeffs.iter().enumerate() {
                let ph = 2.0 * PI * (k + 1) as f64 * t;
                let im = if real { 0.0 } else { c[2] * ph.cos() + c[3] * ph.sin() };
                p += Complex64::new(c[0] * ph.cos() + c[1] * ph.sin(), im);
            }
            z.samples()[j] * (Complex64::new(1.0, 0.0) + p * (amp / 4.0))
        })
        .collect();
    Loop::new(samples, z.parity()).unwrap()
}

pub fn circle(n: usize, radius_sq: f64) -> Loop {
    Loop::from_fn(n, Parity::Antiperiodic, |t| expi(PI * t) * radius_sq.sqrt()).unwrap()
}

pub fn cosine(n: usize, k: u32, amplitude: f64) -> Loop {
    let parity = if k.is_multiple_of(2) {
        Parity::Periodic
    } else {
        Parity::Antiperiodic
    };
    Loop::from_fn(n, parity, |t| {
        Complex64::new(amplitude * (PI * k as f64 * t).cos(), 0.0)
    })
    .unwrap()
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact zeros comparing equal.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
