//! The classical action on loops `q` and its blow-up on loops `z`.
//!
//! The blown-up functional is `F = K + A + C - E` with
//!
//! * `K(z) = 2 ||z||^2 ||z'||^2` (kinetic),
//! * `A(z) = int A_1 dq_1 + A_2 dq_2` along `q = z^2` (magnetic),
//! * `C(z) = 1 / ||z||^2` (Coulomb),
//! * `E(z) = ||z||^{-2} int E_{t_z(tau)}(z^2) |z|^2 dtau` (electric).
//!
//! Everything is evaluated on the node grid and the gradients are the exact
//! L2 gradients of that discrete functional. The cumulative integral defining
//! `t_z` is the spectral one, so the tail integrals `int_tau^1` that appear in
//! the gradient are realized as its exact transpose.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldModel, FieldSample};
use crate::loops::{Loop, Parity};
use crate::spectral;

/// Values of the parts of the blown-up functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    pub kinetic: f64,
    pub magnetic: f64,
    pub coulomb: f64,
    pub electric: f64,
    pub electric_aux: f64,
    pub total: f64,
}

/// L2 gradients of the individual parts; `total = kinetic + magnetic + coulomb - electric`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartGradients {
    pub kinetic: Loop,
    pub magnetic: Loop,
    pub coulomb: Loop,
    pub electric: Loop,
    pub total: Loop,
}

/// The three vector fields entering the electric gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonFields {
    /// Time-derivative term `||z||^{-2} (int_tau^1 E' |z|^2) z`.
    pub first: Loop,
    /// Gradient term `|z|^2 grad E(z^2) conj(z)`.
    pub second: Loop,
    /// Potential term `E(z^2) z`.
    pub third: Loop,
}

impl EpsilonFields {
    pub fn sum(&self) -> Loop {
        self.first.axpy(1.0, &self.second).axpy(1.0, &self.third)
    }
}

/// Coefficients of the linear ODE `z'' = a z + b conj(z) + c z'` satisfied by
/// critical loops. `b` and `c` are periodic in tau even for twisted `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoefficients {
    pub a: Vec<f64>,
    pub b: Loop,
    pub c: Loop,
}

/// Everything needed for values, gradients and residuals at one loop.
#[derive(Debug, Clone)]
pub struct Pullback {
    z: Loop,
    dz: Loop,
    d2z: Loop,
    norm_sq: f64,
    dnorm_sq: f64,
    weights: Vec<f64>,
    times: Vec<f64>,
    fields: Vec<FieldSample>,
    squared: Vec<Complex64>,
    squared_dot: Vec<Complex64>,
    jacobians: Vec<[[f64; 2]; 2]>,
    electric: f64,
    electric_aux: f64,
    magnetic: f64,
    /// `int_tau^1 E' |z|^2`, shifted so that it pairs with `electric_aux`.
    tail: Vec<f64>,
}

fn real_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Pullback {
    pub fn new(z: &Loop, model: &FieldModel) -> Result<Self> {
        let n_nodes = z.len();
        let inv_n = 1.0 / n_nodes as f64;
        let norm_sq = z.norm_sq();
        if !(norm_sq > 0.0) {
            return Err(Error::DegenerateLoop);
        }
        let dz = z.derivative(1);
        let d2z = dz.derivative(1);
        let dnorm_sq = dz.norm_sq();
        let weights: Vec<f64> = z.samples().iter().map(|s| s.norm_sqr()).collect();
        let times: Vec<f64> = spectral::cumulative(&weights).iter().map(|c| c / norm_sq).collect();
        let squared: Vec<Complex64> = z.samples().iter().map(|s| s * s).collect();
        let fields = squared
            .iter()
            .zip(&times)
            .map(|(q, &t)| model.eval(*q, t))
            .collect::<Result<Vec<_>>>()?;
        let jacobians: Vec<[[f64; 2]; 2]> = squared.iter().map(|q| model.gauge_jacobian(*q)).collect();
        let squared_dot = spectral::derivative(&squared, Parity::Periodic, 1);

        let magnetic = fields
            .iter()
            .zip(&squared_dot)
            .map(|(f, dq)| f.a.0 * dq.re + f.a.1 * dq.im)
            .sum::<f64>()
            * inv_n;

        let weighted_e: Vec<f64> = fields.iter().zip(&weights).map(|(f, w)| f.e * w).collect();
        let electric = weighted_e.iter().sum::<f64>() * inv_n / norm_sq;

        // F = E' |z|^2; the node rule for int t F is only first order because
        // t - tau is periodic but tau is not, so evaluate it exactly and move
        // the difference into the tail integral.
        let flux: Vec<f64> = fields.iter().zip(&weights).map(|(f, w)| f.de_dt * w).collect();
        let node_aux = real_dot(&times, &flux) * inv_n / norm_sq;
        let periodic_part: Vec<f64> = times.iter().enumerate().map(|(j, t)| t - j as f64 * inv_n).collect();
        let electric_aux = (spectral::first_moment(&flux) + real_dot(&periodic_part, &flux) * inv_n) / norm_sq;
        let shift = norm_sq * (electric_aux - node_aux);
        let tail = spectral::cumulative_transpose(&flux)
            .into_iter()
            .map(|v| v + shift)
            .collect();

        Ok(Pullback {
            z: z.clone(),
            dz,
            d2z,
            norm_sq,
            dnorm_sq,
            weights,
            times,
            fields,
            squared,
            squared_dot,
            jacobians,
            electric,
            electric_aux,
            magnetic,
            tail,
        })
    }

    pub fn loop_(&self) -> &Loop {
        &self.z
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `t_z` at the nodes.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn breakdown(&self) -> ActionBreakdown {
        let kinetic = 2.0 * self.norm_sq * self.dnorm_sq;
        let coulomb = 1.0 / self.norm_sq;
        ActionBreakdown {
            kinetic,
            magnetic: self.magnetic,
            coulomb,
            electric: self.electric,
            electric_aux: self.electric_aux,
            total: kinetic + self.magnetic + coulomb - self.electric,
        }
    }

    pub fn epsilon(&self) -> EpsilonFields {
        let n = self.norm_sq;
        let z = self.z.samples();
        let first = z.iter().zip(&self.tail).map(|(zj, tail)| zj * (tail / n)).collect();
        let second = z
            .iter()
            .zip(&self.fields)
            .zip(&self.weights)
            .map(|((zj, f), w)| f.grad_e * zj.conj() * *w)
            .collect();
        let third = z.iter().zip(&self.fields).map(|(zj, f)| zj * f.e).collect();
        EpsilonFields {
            first: self.z.with_samples(first),
            second: self.z.with_samples(second),
            third: self.z.with_samples(third),
        }
    }

    pub fn gradients(&self) -> PartGradients {
        let n = self.norm_sq;
        let z = &self.z;
        let kinetic = z.scaled(4.0 * self.dnorm_sq).axpy(-4.0 * n, &self.d2z);
        let coulomb = z.scaled(-2.0 / (n * n));

        // gradient in q of int <A(q), q'>: J^T q' - (A(q))'
        let potential: Vec<Complex64> = self.fields.iter().map(|f| Complex64::new(f.a.0, f.a.1)).collect();
        let potential_dot = spectral::derivative(&potential, Parity::Periodic, 1);
        let magnetic = z.with_samples(
            z.samples()
                .iter()
                .zip(&self.jacobians)
                .zip(self.squared_dot.iter().zip(&potential_dot))
                .map(|((zj, jac), (dq, da))| {
                    let pulled = Complex64::new(
                        jac[0][0] * dq.re + jac[1][0] * dq.im,
                        jac[0][1] * dq.re + jac[1][1] * dq.im,
                    );
                    zj.conj() * (pulled - da) * 2.0
                })
                .collect(),
        );

        let eps = self.epsilon().sum();
        let electric = z
            .scaled(-2.0 * (self.electric + self.electric_aux) / n)
            .axpy(2.0 / n, &eps);

        let total = kinetic.axpy(1.0, &magnetic).axpy(1.0, &coulomb).axpy(-1.0, &electric);
        PartGradients {
            kinetic,
            magnetic,
            coulomb,
            electric,
            total,
        }
    }

    pub fn gradient(&self) -> Loop {
        self.gradients().total
    }

    /// Pointwise residual of the second order delay equation.
    pub fn delay_residual(&self) -> Loop {
        let n = self.norm_sq;
        let eps = self.epsilon().sum();
        let coeff = self.dnorm_sq / n + (self.electric + self.electric_aux) / (2.0 * n * n) - 1.0 / (2.0 * n * n * n);
        let samples = (0..self.z.len())
            .map(|j| {
                let zj = self.z.samples()[j];
                let lorentz = Complex64::new(0.0, self.weights[j] * self.fields[j].b / n) * self.dz.samples()[j];
                self.d2z.samples()[j] + eps.samples()[j] / (2.0 * n * n) + lorentz - zj * coeff
            })
            .collect();
        self.z.with_samples(samples)
    }

    pub fn linear_coefficients(&self) -> LinearCoefficients {
        let n = self.norm_sq;
        let base = 2.0 * n * self.dnorm_sq + self.electric + self.electric_aux;
        let a = self
            .fields
            .iter()
            .zip(&self.tail)
            .map(|(f, tail)| (base - f.e) / (2.0 * n * n) - (tail + 1.0) / (2.0 * n * n * n))
            .collect();
        let b = self
            .fields
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| -f.grad_e * (w / (2.0 * n * n)))
            .collect();
        let c = self
            .fields
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| Complex64::new(0.0, -w * f.b / n))
            .collect();
        LinearCoefficients {
            a,
            b: Loop::from_parts(b, Parity::Periodic),
            c: Loop::from_parts(c, Parity::Periodic),
        }
    }

    /// `z^2` at the nodes.
    pub fn squared(&self) -> &[Complex64] {
        &self.squared
    }
}

pub fn action_parts(z: &Loop, model: &FieldModel) -> Result<ActionBreakdown> {
    Ok(Pullback::new(z, model)?.breakdown())
}

pub fn epsilon_fields(z: &Loop, model: &FieldModel) -> Result<EpsilonFields> {
    Ok(Pullback::new(z, model)?.epsilon())
}

/// L2 gradient of the discrete blown-up functional.
pub fn grad_regularized(z: &Loop, model: &FieldModel) -> Result<Loop> {
    Ok(Pullback::new(z, model)?.gradient())
}

pub fn part_gradients(z: &Loop, model: &FieldModel) -> Result<PartGradients> {
    Ok(Pullback::new(z, model)?.gradients())
}

pub fn delay_residual(z: &Loop, model: &FieldModel) -> Result<Loop> {
    Ok(Pullback::new(z, model)?.delay_residual())
}

pub fn linear_coefficients(z: &Loop, model: &FieldModel) -> Result<LinearCoefficients> {
    Ok(Pullback::new(z, model)?.linear_coefficients())
}

fn check_original(q: &Loop) -> Result<()> {
    if q.parity() != Parity::Periodic {
        return Err(Error::Parity("the classical action needs a periodic loop".into()));
    }
    let tol = crate::reparam::DEFAULT_CTOL * q.max_abs();
    if let Some((node, s)) = q.samples().iter().enumerate().find(|(_, s)| s.norm() <= tol) {
        return Err(Error::SingularLoop {
            node,
            min_abs: s.norm(),
        });
    }
    Ok(())
}

/// Classical action `1/2 ||q'||^2 + int q*A - int E_t(q) dt + int dt/|q|`.
pub fn action_original(q: &Loop, model: &FieldModel) -> Result<f64> {
    check_original(q)?;
    let m = q.len() as f64;
    let dq = q.derivative(1);
    let mut acc = 0.5 * dq.norm_sq();
    for (k, (qk, vk)) in q.samples().iter().zip(dq.samples()).enumerate() {
        let f = model.eval(*qk, k as f64 / m)?;
        acc += (f.a.0 * vk.re + f.a.1 * vk.im - f.e + 1.0 / qk.norm()) / m;
    }
    Ok(acc)
}

/// `(int E_t(q) dt, int t E'_t(q) dt)` for a periodic loop of uniform time samples.
pub fn electric_original(q: &Loop, model: &FieldModel) -> Result<(f64, f64)> {
    if q.parity() != Parity::Periodic {
        return Err(Error::Parity("expected a periodic loop in time".into()));
    }
    let m = q.len() as f64;
    let fields = q
        .samples()
        .iter()
        .enumerate()
        .map(|(k, qk)| model.eval(*qk, k as f64 / m))
        .collect::<Result<Vec<_>>>()?;
    let mean_e = fields.iter().map(|f| f.e).sum::<f64>() / m;
    let rates: Vec<f64> = fields.iter().map(|f| f.de_dt).collect();
    Ok((mean_e, spectral::first_moment(&rates)))
}
