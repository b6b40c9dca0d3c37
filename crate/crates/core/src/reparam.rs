//! The loop-dependent time change `t_z(tau) = int_0^tau |z|^2 / ||z||^2`,
//! its inverse, the blow-up map `z -> q_z = z^2 o tau_z`, and collision analysis.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::{Interpolant, Loop, Parity};
use crate::spectral;

/// Default relative collision tolerance (times `max |z|`).
pub const DEFAULT_CTOL: f64 = 1e-7;

/// Monotone cumulative time map of a loop.
#[derive(Debug, Clone)]
pub struct ReparamTable {
    source: Loop,
    interp: Interpolant,
    weight_coeffs: Vec<Complex64>,
    cumulative: Vec<f64>,
    norm_sq: f64,
    collisions: Vec<f64>,
}

/// One isolated zero of a loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    /// Collision parameter in `[0, 1)`.
    pub tau: f64,
    /// `|z'(tau)|`.
    pub speed: f64,
    /// `|z(tau)|` after refinement.
    pub residual: f64,
    /// `t_z''(tau) = 2 <z, z'> / ||z||^2`.
    pub t_second: f64,
    /// `t_z'''(tau) = 2 (|z'|^2 + <z, z''>) / ||z||^2`.
    pub t_third: f64,
}

/// Computes `t_z` at the nodes with exact endpoint normalization.
pub fn time_map(z: &Loop) -> Result<ReparamTable> {
    let n = z.len();
    let norm_sq = z.norm_sq();
    if !(norm_sq > 0.0) {
        return Err(Error::DegenerateLoop);
    }
    let w: Vec<f64> = z.samples().iter().map(|s| s.norm_sqr()).collect();
    let mut cumulative: Vec<f64> = spectral::cumulative(&w).iter().map(|c| c / norm_sq).collect();
    cumulative.push(1.0);
    let weights: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let weight_coeffs = spectral::coefficients(&weights, Parity::Periodic);
    debug_assert_eq!(weight_coeffs.len(), n);
    let interp = z.interpolant();
    let collisions = find_collisions(z, &interp, norm_sq, DEFAULT_CTOL)
        .into_iter()
        .map(|c| c.tau)
        .collect();
    Ok(ReparamTable {
        source: z.clone(),
        interp,
        weight_coeffs,
        cumulative,
        norm_sq,
        collisions,
    })
}

impl ReparamTable {
    pub fn source(&self) -> &Loop {
        &self.source
    }

    pub fn interpolant(&self) -> &Interpolant {
        &self.interp
    }

    /// `t_z` at `tau_j = j/N`, `j = 0..=N`; first entry 0, last entry 1.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// `||z||^2`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Detected collision parameters.
    pub fn collisions(&self) -> &[f64] {
        &self.collisions
    }

    /// `t_z(tau)` for any real `tau`, with `t_z(tau + 1) = t_z(tau) + 1`.
    pub fn time_at(&self, tau: f64) -> f64 {
        let n = self.weight_coeffs.len();
        let mut periodic = 0.0;
        for (idx, ck) in self.weight_coeffs.iter().enumerate() {
            let k = spectral::wavenumber(idx, n);
            if k == 0 || spectral::is_nyquist(idx, n, Parity::Periodic) {
                continue;
            }
            let omega = 2.0 * PI * k as f64;
            let phase = Complex64::from_polar(1.0, omega * tau) - 1.0;
            periodic += (ck * phase / Complex64::new(0.0, omega)).re;
        }
        tau + periodic / self.norm_sq
    }

    /// `t_z'(tau)`, consistent with [`ReparamTable::time_at`].
    pub fn speed_at(&self, tau: f64) -> f64 {
        let n = self.weight_coeffs.len();
        let mut w = 0.0;
        for (idx, ck) in self.weight_coeffs.iter().enumerate() {
            if spectral::is_nyquist(idx, n, Parity::Periodic) {
                continue;
            }
            let omega = 2.0 * PI * spectral::wavenumber(idx, n) as f64;
            w += (ck * Complex64::from_polar(1.0, omega * tau)).re;
        }
        w / self.norm_sq
    }

    /// `tau_z(t)`: bracketing on the node table, then safeguarded Newton.
    pub fn invert(&self, t: f64) -> f64 {
        let wraps = t.floor();
        let t = t - wraps;
        let n = self.cumulative.len() - 1;
        let j = self
            .cumulative
            .partition_point(|&c| c <= t)
            .saturating_sub(1)
            .min(n - 1);
        let mut lo = j as f64 / n as f64;
        let mut hi = (j + 1) as f64 / n as f64;
        let f = |tau: f64| self.time_at(tau) - t;
        let (mut f_lo, mut f_hi) = (f(lo), f(hi));
        // Spectral wiggles can shift the root past a node; widen until bracketed.
        while f_lo > 0.0 && lo > -1.0 {
            lo -= 1.0 / n as f64;
            f_lo = f(lo);
        }
        while f_hi < 0.0 && hi < 2.0 {
            hi += 1.0 / n as f64;
            f_hi = f(hi);
        }
        let c_lo = self.cumulative[j];
        let c_hi = self.cumulative[j + 1];
        let mut tau = if c_hi > c_lo {
            (lo + (hi - lo) * ((t - c_lo) / (c_hi - c_lo))).clamp(lo, hi)
        } else {
            0.5 * (lo + hi)
        };
        let flat = DEFAULT_CTOL * DEFAULT_CTOL;
        for _ in 0..200 {
            let val = f(tau);
            if val.abs() <= 1e-15 {
                break;
            }
            if val < 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            if hi - lo <= 1e-16 {
                break;
            }
            let slope = self.speed_at(tau);
            let newton = tau - val / slope;
            tau = if slope > flat && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        tau + wraps
    }
}

/// Free-function form of [`ReparamTable::invert`].
pub fn invert_time(table: &ReparamTable, t: f64) -> f64 {
    table.invert(t)
}

/// The blow-up map: `q(t_k) = z(tau_z(t_k))^2` on `m` uniform time nodes.
pub fn sigma_map(z: &Loop, m: usize) -> Result<Loop> {
    let table = time_map(z)?;
    if m < crate::loops::MIN_NODES || !m.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "output resolution must be even and at least {}, got {m}",
            crate::loops::MIN_NODES
        )));
    }
    let samples = (0..m)
        .map(|k| {
            let tau = table.invert(k as f64 / m as f64);
            let zt = table.interp.eval(tau);
            zt * zt
        })
        .collect();
    Loop::new(samples, Parity::Periodic)
}

fn find_collisions(z: &Loop, interp: &Interpolant, norm_sq: f64, ctol: f64) -> Vec<Collision> {
    let n = z.len();
    let s = z.samples();
    let abs: Vec<f64> = s.iter().map(|v| v.norm()).collect();
    let scale = z.max_abs();
    let dz = z.spectral_derivative();
    let coarse = dz.max_abs() / n as f64 + ctol * scale;
    let h = 1.0 / n as f64;
    let mut found: Vec<Collision> = Vec::new();
    for j in 0..n {
        let prev = abs[(j + n - 1) % n];
        let next = abs[(j + 1) % n];
        if !(abs[j] <= prev && abs[j] <= next && abs[j] <= coarse) {
            continue;
        }
        let f = |tau: f64| interp.eval(tau).norm_sqr();
        // golden-section on |z|^2 over the two adjacent cells
        let (mut a, mut b) = (j as f64 * h - h, j as f64 * h + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        while b - a > 1e-9 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = f(x2);
            }
        }
        let mut tau = 0.5 * (a + b);
        // Newton on d|z|^2/dtau = 2 <z, z'>
        for _ in 0..20 {
            let [v, d1, d2] = interp.eval_jet(tau);
            let grad = 2.0 * (v.conj() * d1).re;
            let curv = 2.0 * (d1.norm_sqr() + (v.conj() * d2).re);
            if curv <= 0.0 {
                break;
            }
            let step = grad / curv;
            tau -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let [v, d1, d2] = interp.eval_jet(tau);
        if v.norm() >= ctol * scale {
            continue;
        }
        let tau = tau.rem_euclid(1.0);
        let duplicate = found.iter().any(|c| {
            let d = (c.tau - tau).abs();
            d.min(1.0 - d) < 0.5 * h
        });
        if duplicate {
            continue;
        }
        found.push(Collision {
            tau,
            speed: d1.norm(),
            residual: v.norm(),
            t_second: 2.0 * (v.conj() * d1).re / norm_sq,
            t_third: 2.0 * (d1.norm_sqr() + (v.conj() * d2).re) / norm_sq,
        });
    }
    found.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    found
}

/// Isolated zeros of `z`, refined on the spectral interpolant.
///
/// `ctol` is relative: a zero is reported when `|z(tau)| < ctol * max|z|`.
/// A reported zero whose speed is below `ctol * max|z'|` is an error, since
/// critical loops cannot have one.
pub fn collision_report(z: &Loop, ctol: f64) -> Result<Vec<Collision>> {
    let norm_sq = z.norm_sq();
    if !(norm_sq > 0.0) {
        return Err(Error::DegenerateLoop);
    }
    let found = find_collisions(z, &z.interpolant(), norm_sq, ctol);
    let speed_scale = z.spectral_derivative().max_abs();
    if let Some(c) = found.iter().find(|c| c.speed < ctol * speed_scale) {
        return Err(Error::DegenerateCollision {
            tau: c.tau,
            speed: c.speed,
        });
    }
    Ok(found)
}
