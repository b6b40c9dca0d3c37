//! Back-transformation checks: regularized solutions against the original
//! second order ODE `q'' + B i q' + q/|q|^3 + grad E_t(q) = 0`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::Pullback;
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::loops::{Loop, Parity};
use crate::reparam::{collision_report, time_map, Collision, DEFAULT_CTOL};

/// Default half-width of the time windows excluded around collisions.
pub const DEFAULT_WINDOW: f64 = 0.02;
/// Default radius at which direct integration gives up.
pub const DEFAULT_R_MIN: f64 = 1e-3;

/// Winding number modulo 2, defined even for collisional orbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindingParity {
    Even,
    Odd,
}

impl fmt::Display for WindingParity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindingParity::Even => "even",
            WindingParity::Odd => "odd",
        })
    }
}

/// Periodic z gives an even class, twisted z an odd one.
pub fn winding_mod2(z: &Loop) -> WindingParity {
    match z.parity() {
        Parity::Periodic => WindingParity::Even,
        Parity::Antiperiodic => WindingParity::Odd,
    }
}

/// Position, velocity and acceleration sampled in physical time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub q: Vec<Complex64>,
    pub qdot: Vec<Complex64>,
    pub qddot: Vec<Complex64>,
}

impl Trajectory {
    /// Spectral derivatives of a periodic loop sampled uniformly in time.
    pub fn from_loop(q: &Loop) -> Result<Trajectory> {
        if q.parity() != Parity::Periodic {
            return Err(Error::Parity("a loop in physical time must be periodic".into()));
        }
        let m = q.len();
        Ok(Trajectory {
            t: (0..m).map(|k| k as f64 / m as f64).collect(),
            q: q.samples().to_vec(),
            qdot: q.derivative(1).into_samples(),
            qddot: q.derivative(2).into_samples(),
        })
    }

    /// The orbit `q_z` at `m` uniform times, differentiated through the
    /// chain rule on the interpolant of `z`. Velocities are infinite at
    /// collisions.
    pub fn from_regularized(z: &Loop, m: usize) -> Result<Trajectory> {
        if m == 0 {
            return Err(Error::InvalidInput("need at least one time node".into()));
        }
        let table = time_map(z)?;
        let n = table.norm_sq();
        let mut out = Trajectory {
            t: Vec::with_capacity(m),
            q: Vec::with_capacity(m),
            qdot: Vec::with_capacity(m),
            qddot: Vec::with_capacity(m),
        };
        for k in 0..m {
            let t = k as f64 / m as f64;
            let tau = table.invert(t);
            let [v, d1, d2] = table.interpolant().eval_jet(tau);
            let w = v.norm_sqr();
            let vbar = v.conj();
            out.t.push(t);
            out.q.push(v * v);
            out.qdot.push(d1 * (2.0 * n) / vbar);
            out.qddot.push((d2 - d1.norm_sqr() / vbar) * (2.0 * n * n) / (w * vbar));
        }
        Ok(out)
    }
}

fn excluded(t: f64, windows: &[f64], half_width: f64) -> bool {
    windows.iter().any(|&c| {
        let d = (t - c).rem_euclid(1.0);
        d.min(1.0 - d) < half_width
    })
}

fn ode_defect(model: &FieldModel, t: f64, q: Complex64, v: Complex64, a: Complex64) -> Result<Complex64> {
    let f = model.eval(q, t)?;
    let r = q.norm();
    Ok(a + Complex64::i() * v * f.b + q / (r * r * r) + f.grad_e)
}

fn check_nonvanishing(q: Complex64, node: usize, scale: f64) -> Result<()> {
    if q.norm() <= DEFAULT_CTOL * scale {
        return Err(Error::SingularLoop {
            node,
            min_abs: q.norm(),
        });
    }
    Ok(())
}

fn max_abs(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Sup-norm of the ODE residual over nodes outside the collision windows.
pub fn ode_residual_trajectory(traj: &Trajectory, model: &FieldModel, windows: &[f64], half_width: f64) -> Result<f64> {
    let scale = max_abs(&traj.q);
    let mut sup = 0.0f64;
    for k in 0..traj.t.len() {
        if excluded(traj.t[k], windows, half_width) {
            continue;
        }
        check_nonvanishing(traj.q[k], k, scale)?;
        let d = ode_defect(model, traj.t[k], traj.q[k], traj.qdot[k], traj.qddot[k])?;
        sup = sup.max(d.norm());
    }
    Ok(sup)
}

/// ODE residual of a loop sampled uniformly in time, with spectral
/// derivatives. Collision times in `windows` are excluded with
/// [`DEFAULT_WINDOW`].
pub fn ode_residual(q: &Loop, model: &FieldModel, windows: &[f64]) -> Result<f64> {
    ode_residual_trajectory(&Trajectory::from_loop(q)?, model, windows, DEFAULT_WINDOW)
}

/// The profile `beta = (q'' + B i q' + grad E) / q` and its fit to `mu/|q|^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    /// Real part of beta at each node.
    pub beta: Vec<f64>,
    /// Least-squares constant for `beta |q|^3`.
    pub mu_fit: f64,
    /// `sup |Im beta| |q|^3`.
    pub imag_defect: f64,
    /// `sup |Re beta |q|^3 - mu_fit|`.
    pub fit_defect: f64,
}

pub fn beta_mu_trajectory(traj: &Trajectory, model: &FieldModel) -> Result<BetaFit> {
    let scale = max_abs(&traj.q);
    let mut beta = Vec::with_capacity(traj.q.len());
    let mut scaled = Vec::with_capacity(traj.q.len());
    let mut imag_defect = 0.0f64;
    for k in 0..traj.q.len() {
        let q = traj.q[k];
        check_nonvanishing(q, k, scale)?;
        let f = model.eval(q, traj.t[k])?;
        let b = (traj.qddot[k] + Complex64::i() * traj.qdot[k] * f.b + f.grad_e) / q;
        let cube = q.norm().powi(3);
        beta.push(b.re);
        scaled.push(b.re * cube);
        imag_defect = imag_defect.max(b.im.abs() * cube);
    }
    let mu_fit = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let fit_defect = scaled.iter().map(|s| (s - mu_fit).abs()).fold(0.0, f64::max);
    Ok(BetaFit {
        beta,
        mu_fit,
        imag_defect,
        fit_defect,
    })
}

/// Beta profile of a collision-free loop sampled uniformly in time.
pub fn beta_mu(q: &Loop, model: &FieldModel) -> Result<BetaFit> {
    beta_mu_trajectory(&Trajectory::from_loop(q)?, model)
}

/// `mu_j = -2 ||z||^4 |z'(tau_j)|^2` at every collision of `z`.
pub fn mu_from_collisions(z: &Loop) -> Result<Vec<f64>> {
    let n = z.norm_sq();
    Ok(collision_report(z, DEFAULT_CTOL)?
        .iter()
        .map(|c| -2.0 * n * n * c.speed * c.speed)
        .collect())
}

/// Accepted steps of a direct integration.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub q: Vec<Complex64>,
    pub qdot: Vec<Complex64>,
}

impl OdeSolution {
    /// `|q(T) - q(0)| + |q'(T) - q'(0)|`.
    pub fn shooting_gap(&self) -> f64 {
        let last = self.q.len() - 1;
        (self.q[last] - self.q[0]).norm() + (self.qdot[last] - self.qdot[0]).norm()
    }
}

type State = [f64; 4];

fn rhs(model: &FieldModel, t: f64, y: &State, r_min: f64) -> Result<State> {
    let q = Complex64::new(y[0], y[1]);
    let v = Complex64::new(y[2], y[3]);
    let r = q.norm();
    if r < r_min {
        return Err(Error::NearCollision { t, radius: r });
    }
    let f = model.eval(q, t)?;
    let a = -(Complex64::i() * v * f.b) - q / (r * r * r) - f.grad_e;
    Ok([v.re, v.im, a.re, a.im])
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-12;
const MAX_STEPS: usize = 1_000_000;

/// Adaptive Runge-Kutta integration of the ODE from `t = 0` to `duration`,
/// starting with step `h`. Aborts with a near-collision error once `|q|`
/// drops below [`DEFAULT_R_MIN`].
pub fn integrate_ode(q0: Complex64, v0: Complex64, model: &FieldModel, duration: f64, h: f64) -> Result<OdeSolution> {
    integrate_ode_with(q0, v0, model, duration, h, DEFAULT_R_MIN)
}

pub fn integrate_ode_with(
    q0: Complex64,
    v0: Complex64,
    model: &FieldModel,
    duration: f64,
    h: f64,
    r_min: f64,
) -> Result<OdeSolution> {
    if !(duration >= 0.0) || !(h > 0.0) {
        return Err(Error::InvalidInput(
            "duration must be nonnegative and the step positive".into(),
        ));
    }
    if q0.norm() < r_min {
        return Err(Error::NearCollision {
            t: 0.0,
            radius: q0.norm(),
        });
    }
    let mut sol = OdeSolution {
        t: vec![0.0],
        q: vec![q0],
        qdot: vec![v0],
    };
    let mut t = 0.0;
    let mut y: State = [q0.re, q0.im, v0.re, v0.im];
    let mut h = h.min(duration);
    let mut k = [[0.0; 4]; 7];
    k[0] = rhs(model, t, &y, r_min)?;
    let mut steps = 0;
    while t < duration {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::InvalidInput("step budget exhausted".into()));
        }
        h = h.min(duration - t);
        for s in 1..7 {
            let mut ys = y;
            for (i, yi) in ys.iter_mut().enumerate() {
                *yi += h * (0..s).map(|r| A[s][r] * k[r][i]).sum::<f64>();
            }
            k[s] = rhs(model, t + C[s] * h, &ys, r_min)?;
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for i in 0..4 {
            let high = (0..7).map(|s| B5[s] * k[s][i]).sum::<f64>();
            let low = (0..7).map(|s| B4[s] * k[s][i]).sum::<f64>();
            y5[i] += h * high;
            let sc = ATOL + RTOL * y[i].abs().max(y5[i].abs());
            err = err.max((h * (high - low)).abs() / sc);
        }
        if err <= 1.0 {
            t = if duration - t - h <= 0.0 { duration } else { t + h };
            y = y5;
            k[0] = k[6];
            sol.t.push(t);
            sol.q.push(Complex64::new(y[0], y[1]));
            sol.qdot.push(Complex64::new(y[2], y[3]));
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(sol)
}

/// `H = |q'|^2/2 + E_t(q) - 1/|q|` along a trajectory, and `max - min`.
pub fn energy_trajectory(traj: &Trajectory, model: &FieldModel) -> Result<(Vec<f64>, f64)> {
    let scale = max_abs(&traj.q);
    let mut values = Vec::with_capacity(traj.q.len());
    for k in 0..traj.q.len() {
        check_nonvanishing(traj.q[k], k, scale)?;
        let f = model.eval(traj.q[k], traj.t[k])?;
        values.push(0.5 * traj.qdot[k].norm_sqr() + f.e - 1.0 / traj.q[k].norm());
    }
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((values, hi - lo))
}

pub fn energy_along(q: &Loop, model: &FieldModel) -> Result<(Vec<f64>, f64)> {
    energy_trajectory(&Trajectory::from_loop(q)?, model)
}

/// Thresholds for [`verify_solution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    /// Number of uniform time nodes; 0 means twice the loop resolution.
    pub time_nodes: usize,
    pub window: f64,
    pub ode_tol: f64,
    pub mu_tol: f64,
    pub imag_tol: f64,
    pub delay_tol: f64,
    pub shooting_tol: f64,
    pub energy_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            time_nodes: 0,
            window: DEFAULT_WINDOW,
            ode_tol: 1e-5,
            mu_tol: 1e-5,
            imag_tol: 1e-7,
            delay_tol: 1e-6,
            shooting_tol: 1e-5,
            energy_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ode_residual_sup: f64,
    pub delay_residual_sup: f64,
    /// Absent when the orbit collides.
    pub mu_fit: Option<f64>,
    pub beta_imag_defect: Option<f64>,
    pub mu_j: Vec<f64>,
    pub energy_drift: f64,
    /// Absent when the orbit collides.
    pub shooting_gap: Option<f64>,
    pub winding_mod2: WindingParity,
    pub collisions: Vec<Collision>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Runs every check on a regularized loop. Orbits are evaluated through the
/// chain rule on `z`, so collision orbits need no special treatment beyond
/// the exclusion windows.
pub fn verify_solution(z: &Loop, model: &FieldModel, opts: &VerifyOptions) -> Result<VerificationReport> {
    let pull = Pullback::new(z, model)?;
    let delay_residual_sup = pull.delay_residual().sup_norm();
    let collisions = collision_report(z, DEFAULT_CTOL)?;
    let table = time_map(z)?;
    let windows: Vec<f64> = collisions.iter().map(|c| table.time_at(c.tau)).collect();
    let m = if opts.time_nodes == 0 {
        2 * z.len()
    } else {
        opts.time_nodes
    };
    let traj = Trajectory::from_regularized(z, m)?;
    let ode_residual_sup = ode_residual_trajectory(&traj, model, &windows, opts.window)?;
    let mu_j = mu_from_collisions(z)?;

    let mut failures = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    check(
        delay_residual_sup < opts.delay_tol,
        format!("delay residual {delay_residual_sup:.3e}"),
    );
    check(
        ode_residual_sup < opts.ode_tol,
        format!("ODE residual {ode_residual_sup:.3e}"),
    );
    for mu in &mu_j {
        check((mu + 1.0).abs() < opts.mu_tol, format!("collision mu {mu}"));
    }

    let (mu_fit, beta_imag_defect, shooting_gap, energy_drift) = if collisions.is_empty() {
        let fit = beta_mu_trajectory(&traj, model)?;
        check((fit.mu_fit + 1.0).abs() < opts.mu_tol, format!("mu fit {}", fit.mu_fit));
        check(
            fit.imag_defect < opts.imag_tol,
            format!("beta imaginary defect {:.3e}", fit.imag_defect),
        );
        let (_, drift) = energy_trajectory(&traj, model)?;
        let gap = integrate_ode(traj.q[0], traj.qdot[0], model, 1.0, 1e-3)
            .map(|s| s.shooting_gap())
            .unwrap_or(f64::INFINITY);
        check(gap < opts.shooting_tol, format!("shooting gap {gap:.3e}"));
        (Some(fit.mu_fit), Some(fit.imag_defect), Some(gap), drift)
    } else {
        // energy on collision-free nodes only
        let keep: Vec<usize> = (0..traj.t.len())
            .filter(|&k| !excluded(traj.t[k], &windows, opts.window))
            .collect();
        let sub = Trajectory {
            t: keep.iter().map(|&k| traj.t[k]).collect(),
            q: keep.iter().map(|&k| traj.q[k]).collect(),
            qdot: keep.iter().map(|&k| traj.qdot[k]).collect(),
            qddot: keep.iter().map(|&k| traj.qddot[k]).collect(),
        };
        let drift = if sub.t.is_empty() {
            0.0
        } else {
            energy_trajectory(&sub, model)?.1
        };
        (None, None, None, drift)
    };
    if model.is_autonomous() {
        check(
            energy_drift < opts.energy_tol,
            format!("energy drift {energy_drift:.3e}"),
        );
    }

    Ok(VerificationReport {
        ode_residual_sup,
        delay_residual_sup,
        mu_fit,
        beta_imag_defect,
        mu_j,
        energy_drift,
        shooting_gap,
        winding_mod2: winding_mod2(z),
        collisions,
        passed: failures.is_empty(),
        failures,
    })
}
