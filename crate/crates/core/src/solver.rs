//! Critical points of the blown-up functional and their continuation along
//! families of field models.
//!
//! A solve runs a preconditioned gradient flow with Armijo backtracking on
//! the functional until the gradient is small, then switches to an inexact
//! Newton iteration whose linear systems are solved matrix-free by restarted
//! GMRES with finite-difference Jacobian products.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::action::{ActionBreakdown, Pullback};
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::loops::{HalfInt, Loop, Parity, MIN_NODES};
use crate::reparam::{collision_report, Collision, DEFAULT_CTOL};
use crate::spectral;
use crate::verify::{beta_mu_trajectory, mu_from_collisions, winding_mod2, Trajectory, WindingParity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Target sup-norm of the gradient.
    pub grad_tol: f64,
    /// Initial gradient-flow step.
    pub flow_step: f64,
    /// Gradient sup-norm below which Newton steps are attempted.
    pub newton_switch_tol: f64,
    /// Loop resolution; seeds of another size are resampled.
    #[serde(rename = "N")]
    pub n: usize,
    pub parity: Parity,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 5000,
            grad_tol: 1e-9,
            flow_step: 0.1,
            newton_switch_tol: 1e-3,
            n: 128,
            parity: Parity::Antiperiodic,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParameter {
                name: name.into(),
                reason: reason.into(),
            })
        };
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol", "must be positive");
        }
        if !(self.flow_step > 0.0) {
            return bad("flow_step", "must be positive");
        }
        if !(self.newton_switch_tol > self.grad_tol) {
            return bad("newton_switch_tol", "must exceed grad_tol");
        }
        if self.n < MIN_NODES || !self.n.is_multiple_of(2) {
            return bad("N", "must be even and at least 8");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be positive");
        }
        Ok(())
    }
}

/// Winding information: the half-integer winding of `z` when it misses the
/// origin (the orbit winds twice as often), otherwise only the class mod 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindingTag {
    Number(HalfInt),
    Parity(WindingParity),
}

impl WindingTag {
    pub fn parity(&self) -> WindingParity {
        match self {
            WindingTag::Number(w) if w.is_integer() => WindingParity::Even,
            WindingTag::Number(_) => WindingParity::Odd,
            WindingTag::Parity(p) => *p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub final_grad_norm: f64,
    pub action: ActionBreakdown,
    pub residual_sup: f64,
    pub collisions: Vec<Collision>,
    pub winding: WindingTag,
    pub mu_estimates: Vec<f64>,
}

/// `(1 - d^2/dtau^2)^{-1}`.
fn precondition(g: &Loop) -> Loop {
    let n = g.len();
    let parity = g.parity();
    let samples = spectral::apply_multiplier(g.samples(), parity, |idx| {
        let nu = 2.0 * PI * spectral::frequency(idx, n, parity);
        (1.0 / (1.0 + nu * nu)).into()
    });
    Loop::from_parts(samples, parity)
}

struct State {
    z: Loop,
    value: f64,
    grad: Loop,
    grad_sup: f64,
}

impl State {
    fn new(z: Loop, model: &FieldModel) -> Result<State> {
        let pull = Pullback::new(&z, model)?;
        let grad = pull.gradient();
        Ok(State {
            value: pull.breakdown().total,
            grad_sup: grad.sup_norm(),
            grad,
            z,
        })
    }

    fn grad_l2(&self) -> f64 {
        self.grad.norm_sq().sqrt()
    }
}

enum FlowStep {
    Accepted(State),
    Collapsed,
    Stalled,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e3;

fn flow_step(state: &State, model: &FieldModel, step: &mut f64, floor: f64) -> FlowStep {
    let dir = precondition(&state.grad);
    let slope = state.grad.dot(&dir);
    let mut collapsed = false;
    while *step > MIN_STEP {
        let trial = state.z.axpy(-*step, &dir);
        if trial.norm_sq().sqrt() < floor {
            collapsed = true;
            *step *= 0.5;
            continue;
        }
        collapsed = false;
        if let Ok(next) = State::new(trial, model) {
            if next.value.is_finite() && next.value <= state.value - ARMIJO * *step * slope {
                return FlowStep::Accepted(next);
            }
        }
        *step *= 0.5;
    }
    if collapsed {
        FlowStep::Collapsed
    } else {
        FlowStep::Stalled
    }
}

/// Restarted GMRES for `A x = b` from `x = 0`, stopping at relative
/// residual `rtol`.
fn gmres<F>(apply: F, b: &[f64], rtol: f64, restart: usize, max_restarts: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let dim = b.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let target = rtol * norm(b);
    let mut x = vec![0.0; dim];
    let mut r = b.to_vec();
    for _ in 0..max_restarts {
        let beta = norm(&r);
        if beta <= target || beta == 0.0 {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut rhs = vec![beta];
        for j in 0..restart {
            let mut w = apply(&basis[j])?;
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                col[i] = dot(&w, v);
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= col[i] * vk;
                }
            }
            col[j + 1] = norm(&w);
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / rho, col[j + 1] / rho)
            };
            cs.push(c);
            sn.push(s);
            let next_w = col[j + 1];
            col[j] = rho;
            col[j + 1] = 0.0;
            rhs.push(-s * rhs[j]);
            rhs[j] *= c;
            h.push(col);
            let breakdown = next_w <= 1e-300;
            if !breakdown {
                basis.push(w.iter().map(|v| v / next_w).collect());
            }
            if rhs[j + 1].abs() <= target || breakdown {
                break;
            }
        }
        // back substitution on the triangular factor
        let k = h.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = rhs[i];
            for l in i + 1..k {
                acc -= h[l][i] * y[l];
            }
            y[i] = if h[i][i] == 0.0 { 0.0 } else { acc / h[i][i] };
        }
        for (l, yl) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[l]) {
                *xi += yl * vi;
            }
        }
        let ax = apply(&x)?;
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    }
    Ok(x)
}

/// One inexact Newton step with a backtracking line search on the gradient
/// norm. Returns `None` when no sufficient decrease is found.
fn newton_step(state: &State, model: &FieldModel) -> Result<Option<State>> {
    let parity = state.z.parity();
    let z = state.z.clone();
    let g0 = state.grad.to_real();
    let znorm = z.norm_sq().sqrt();
    // J P v by forward differences of the gradient
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        let v = precondition(&Loop::from_real(v, parity));
        let vnorm = v.norm_sq().sqrt();
        if vnorm == 0.0 {
            return Ok(vec![0.0; g0.len()]);
        }
        let eps = f64::EPSILON.sqrt() * (1.0 + znorm) / vnorm;
        let shifted = Pullback::new(&z.axpy(eps, &v), model)?.gradient().to_real();
        Ok(shifted.iter().zip(&g0).map(|(a, b)| (a - b) / eps).collect())
    };
    let rhs: Vec<f64> = g0.iter().map(|v| -v).collect();
    let y = gmres(apply, &rhs, 0.1, 40, 4)?;
    let delta = precondition(&Loop::from_real(&y, parity));
    let base = state.grad_l2();
    let mut lambda = 1.0;
    for _ in 0..12 {
        if let Ok(next) = State::new(z.axpy(lambda, &delta), model) {
            if next.grad_l2() < (1.0 - ARMIJO * lambda) * base {
                return Ok(Some(next));
            }
        }
        lambda *= 0.5;
    }
    Ok(None)
}

/// Which kind of step produced an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Seed,
    Flow,
    Newton,
}

/// One accepted iterate, passed to the observer of [`solve_critical_observed`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub iteration: usize,
    pub phase: Phase,
    pub value: f64,
    pub grad_sup: f64,
}

/// Searches for a critical point of the blown-up functional near `seed`.
///
/// Non-convergence within `max_iters` is reported through
/// `SolveReport::converged`; only invalid input, a collapse of the loop
/// towards zero, or field-domain violations are errors.
pub fn solve_critical(seed: &Loop, model: &FieldModel, opts: &SolveOptions) -> Result<(Loop, SolveReport)> {
    solve_critical_observed(seed, model, opts, &mut |_| {})
}

/// [`solve_critical`] reporting every accepted iterate to `observer`.
pub fn solve_critical_observed(
    seed: &Loop,
    model: &FieldModel,
    opts: &SolveOptions,
    observer: &mut dyn FnMut(&Iterate),
) -> Result<(Loop, SolveReport)> {
    opts.validate()?;
    if seed.parity() != opts.parity {
        return Err(Error::Parity(format!(
            "seed is {} but the solve asks for {}",
            seed.parity(),
            opts.parity
        )));
    }
    if !(seed.norm_sq() > 0.0) || !seed.norm_sq().is_finite() {
        return Err(Error::DegenerateLoop);
    }
    let seed = if seed.len() == opts.n {
        seed.clone()
    } else {
        seed.resample(opts.n)?
    };
    let floor = 0.1 * seed.norm_sq().sqrt();
    let mut state = State::new(seed, model)?;
    let mut record = |iteration: usize, phase: Phase, state: &State| {
        observer(&Iterate {
            iteration,
            phase,
            value: state.value,
            grad_sup: state.grad_sup,
        })
    };
    record(0, Phase::Seed, &state);
    let mut step = opts.flow_step;
    let mut iterations = 0;
    let mut newton_iterations = 0;
    let mut newton_failures = 0;
    while state.grad_sup > opts.grad_tol && iterations < opts.max_iters {
        iterations += 1;
        if state.grad_sup < opts.newton_switch_tol && newton_failures < 3 {
            if let Some(next) = newton_step(&state, model)? {
                newton_iterations += 1;
                state = next;
                record(iterations, Phase::Newton, &state);
                continue;
            }
            newton_failures += 1;
        }
        match flow_step(&state, model, &mut step, floor) {
            FlowStep::Accepted(next) => {
                state = next;
                record(iterations, Phase::Flow, &state);
                step = (step * 2.0).min(MAX_STEP);
            }
            FlowStep::Collapsed => {
                return Err(Error::DegenerateFlow {
                    norm: state.z.norm_sq().sqrt(),
                })
            }
            FlowStep::Stalled => break,
        }
    }
    let converged = state.grad_sup <= opts.grad_tol;
    let report = build_report(&state, model, converged, iterations, newton_iterations)?;
    Ok((state.z, report))
}

/// Report for a given loop without iterating, e.g. for a loop read from a
/// file. `converged` compares the gradient against `grad_tol`.
pub fn assess(z: &Loop, model: &FieldModel, grad_tol: f64) -> Result<SolveReport> {
    let state = State::new(z.clone(), model)?;
    let converged = state.grad_sup <= grad_tol;
    build_report(&state, model, converged, 0, 0)
}

fn build_report(
    state: &State,
    model: &FieldModel,
    converged: bool,
    iterations: usize,
    newton_iterations: usize,
) -> Result<SolveReport> {
    let z = &state.z;
    let pull = Pullback::new(z, model)?;
    let collisions = collision_report(z, DEFAULT_CTOL)?;
    let winding = if collisions.is_empty() {
        match z.winding_number() {
            Ok(w) => WindingTag::Number(w),
            Err(_) => WindingTag::Parity(winding_mod2(z)),
        }
    } else {
        WindingTag::Parity(winding_mod2(z))
    };
    let mu_estimates = if collisions.is_empty() {
        Trajectory::from_regularized(z, 2 * z.len())
            .and_then(|traj| beta_mu_trajectory(&traj, model))
            .map(|fit| vec![fit.mu_fit])
            .unwrap_or_default()
    } else {
        mu_from_collisions(z)?
    };
    Ok(SolveReport {
        converged,
        iterations,
        newton_iterations,
        final_grad_norm: state.grad_sup,
        action: pull.breakdown(),
        residual_sup: pull.delay_residual().sup_norm(),
        collisions,
        winding,
        mu_estimates,
    })
}

/// Smallest parameter increment tried before a family is truncated.
pub const S_MIN_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub s: f64,
    pub z: Loop,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    /// Every accepted point in order of increasing `s`, including
    /// intermediate points inserted by step bisection.
    pub members: Vec<FamilyMember>,
    /// True when the family stops short of `s = 1`.
    pub truncated: bool,
}

fn solve_member(
    seed: &Loop,
    family: &dyn Fn(f64) -> Result<FieldModel>,
    s: f64,
    opts: &SolveOptions,
) -> Result<FamilyMember> {
    let model = family(s)?;
    let (z, report) = solve_critical(seed, &model, opts)?;
    if !report.converged {
        return Err(Error::InvalidInput(format!("no convergence at s = {s}")));
    }
    Ok(FamilyMember { s, z, report })
}

/// Natural-parameter continuation over `steps` equally spaced values of `s`
/// in `[0, 1]`, each solution seeding the next. A failed step is bisected
/// down to [`S_MIN_STEP`]; below that the partial family is returned with
/// `truncated` set.
pub fn continue_family(
    seed: &Loop,
    family: &dyn Fn(f64) -> Result<FieldModel>,
    steps: usize,
    opts: &SolveOptions,
) -> Result<Family> {
    if steps < 2 {
        return Err(Error::InvalidInput("a family needs at least two steps".into()));
    }
    opts.validate()?;
    let first = solve_member(seed, family, 0.0, opts).map_err(|e| match e {
        Error::InvalidParameter { .. } | Error::UnknownPreset(_) => e,
        other => Error::SeedInvalid(other.to_string()),
    })?;
    let mut current = first.clone();
    let mut members = vec![first];
    let spacing = 1.0 / (steps - 1) as f64;
    for k in 1..steps {
        let target = if k == steps - 1 { 1.0 } else { k as f64 * spacing };
        let mut ds = target - current.s;
        while current.s < target {
            let s = if current.s + ds >= target {
                target
            } else {
                current.s + ds
            };
            match solve_member(&current.z, family, s, opts) {
                Ok(member) => {
                    current = member.clone();
                    members.push(member);
                    ds = (2.0 * ds).min(target - current.s);
                }
                Err(Error::InvalidParameter { name, reason }) => return Err(Error::InvalidParameter { name, reason }),
                Err(_) => {
                    ds *= 0.5;
                    if ds < S_MIN_STEP {
                        return Ok(Family {
                            members,
                            truncated: true,
                        });
                    }
                }
            }
        }
    }
    Ok(Family {
        members,
        truncated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn circle(n: usize, radius: f64) -> Loop {
        Loop::from_fn(n, Parity::Antiperiodic, |t| Complex64::from_polar(radius, PI * t)).unwrap()
    }

    #[test]
    fn options_are_validated() {
        let mut o = SolveOptions::default();
        assert!(o.validate().is_ok());
        o.grad_tol = 1e-2;
        assert!(o.validate().is_err());
        let o = SolveOptions {
            n: 10 + 1,
            ..SolveOptions::default()
        };
        assert!(o.validate().is_err());
    }

    #[test]
    fn preconditioner_is_symmetric() {
        let a = Loop::from_fn(16, Parity::Antiperiodic, |t| Complex64::new((3.0 * t).sin(), t * t)).unwrap();
        let b = Loop::from_fn(16, Parity::Antiperiodic, |t| Complex64::new(t.cos(), (5.0 * t).cos())).unwrap();
        let lhs = precondition(&a).dot(&b);
        let rhs = a.dot(&precondition(&b));
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn gmres_solves_small_system() {
        let m = [[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.5, 0.0, 2.0]];
        let apply =
            |v: &[f64]| -> Result<Vec<f64>> { Ok((0..3).map(|i| (0..3).map(|j| m[i][j] * v[j]).sum()).collect()) };
        let x = gmres(apply, &[1.0, 2.0, 3.0], 1e-12, 10, 2).unwrap();
        let r = apply(&x).unwrap();
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_seed_is_rejected() {
        let z = circle(16, 0.0);
        let opts = SolveOptions {
            n: 16,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_critical(&z, &FieldModel::kepler(), &opts),
            Err(Error::DegenerateLoop)
        ));
    }

    #[test]
    fn scaled_circle_converges() {
        let r = (2.0 * PI).powf(-2.0 / 3.0);
        let seed = circle(32, 1.05 * r.sqrt());
        let opts = SolveOptions {
            n: 32,
            ..SolveOptions::default()
        };
        let (z, report) = solve_critical(&seed, &FieldModel::kepler(), &opts).unwrap();
        assert!(report.converged, "{report:?}");
        assert!((z.norm_sq() - r).abs() < 1e-8);
        assert_eq!(report.winding, WindingTag::Number(HalfInt::from_twice(1)));
    }
}
