//! Acceptance criteria, one line of output per criterion. Runs without the
//! libtest harness so the verdicts are always printed; exits nonzero if any
//! criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use orbits_core::action::{
    action_original, action_parts, delay_residual, electric_original, part_gradients, ActionBreakdown,
};
use orbits_core::solver::{continue_family, solve_critical, SolveOptions};
use orbits_core::verify::{
    energy_along, mu_from_collisions, verify_solution, winding_mod2, Trajectory, VerifyOptions, WindingParity,
};
use orbits_core::{collision_report, sigma_map, FieldModel, Loop, Parity};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 128;

/// Name, check and time budget of one criterion.
type Criterion = (&'static str, fn() -> Verdict, Option<Duration>);

/// Selects one term of the action.
type Part = fn(&ActionBreakdown) -> f64;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn opts(parity: Parity) -> SolveOptions {
    SolveOptions {
        parity,
        ..SolveOptions::default()
    }
}

fn parities() -> [Parity; 2] {
    [Parity::Periodic, Parity::Antiperiodic]
}

fn circular_orbit() -> Verdict {
    let r = kepler_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let seed = perturb(&mut rng, &circle(N, r), 0.05, false);
    let (z, report) = match solve_critical(&seed, &FieldModel::kepler(), &opts(Parity::Antiperiodic)) {
        Ok(out) => out,
        Err(e) => return verdict(false, format!("solver error: {e}")),
    };
    let check = verify_solution(&z, &FieldModel::kepler(), &VerifyOptions::default()).unwrap();
    let radius_err = (z.norm_sq() - r).abs();
    let mu = check.mu_fit.unwrap_or(f64::NAN);
    let gap = check.shooting_gap.unwrap_or(f64::INFINITY);
    verdict(
        report.converged && radius_err < 1e-8 && report.residual_sup < 1e-8 && (mu + 1.0).abs() < 1e-6 && gap < 1e-5,
        format!(
            "| ||z||^2 - r | = {radius_err:.2e}, residual {:.2e}, mu_fit + 1 = {:.2e}, shooting gap {gap:.2e}",
            report.residual_sup,
            mu + 1.0
        ),
    )
}

/// Converged collision solutions used by the collision criteria.
fn collision_solution(collisions: u32, seed: u64) -> Result<Loop, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = perturb(
        &mut rng,
        &cosine(N, collisions, collision_amplitude(collisions)),
        0.05,
        true,
    );
    let mut o = opts(start.parity());
    if collisions > 1 {
        // these orbits are saddles of the functional; descend only via Newton
        o.newton_switch_tol = 1e3;
    }
    let (z, report) = solve_critical(&start, &FieldModel::kepler(), &o).map_err(|e| e.to_string())?;
    if !report.converged {
        return Err(format!("no convergence for {collisions} collisions"));
    }
    Ok(z)
}

fn collision_orbit() -> Verdict {
    let z = match collision_solution(1, 102) {
        Ok(z) => z,
        Err(e) => return verdict(false, e),
    };
    let residual = delay_residual(&z, &FieldModel::kepler()).unwrap().sup_norm();
    let mu = mu_from_collisions(&z).unwrap_or_default();
    let parity = winding_mod2(&z);
    verdict(
        residual < 1e-8 && mu.len() == 1 && (mu[0] + 1.0).abs() < 1e-6 && parity == WindingParity::Odd,
        format!("residual {residual:.2e}, mu_j = {mu:?}, winding mod 2 {parity}"),
    )
}

fn random_direction(rng: &mut ChaCha8Rng, z: &Loop) -> Loop {
    random_loop(rng, z.len(), z.parity(), 6, false, 1.0)
}

fn gradient_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut worst_beyond_noise = 0.0f64;
    let mut count = 0;
    let parts: [(&str, Part); 5] = [
        ("kinetic", |b| b.kinetic),
        ("magnetic", |b| b.magnetic),
        ("coulomb", |b| b.coulomb),
        ("electric", |b| b.electric),
        ("total", |b| b.total),
    ];
    for model in all_models() {
        for parity in parities() {
            for _ in 0..20 {
                let z = random_loop(&mut rng, N, parity, 6, false, 1.0);
                let d = random_direction(&mut rng, &z);
                let g = part_gradients(&z, &model).unwrap();
                let plus = action_parts(&z.axpy(h, &d), &model).unwrap();
                let minus = action_parts(&z.axpy(-h, &d), &model).unwrap();
                for (name, part) in parts {
                    let grad = match name {
                        "kinetic" => &g.kinetic,
                        "magnetic" => &g.magnetic,
                        "coulomb" => &g.coulomb,
                        "electric" => &g.electric,
                        _ => &g.total,
                    };
                    let fd = (part(&plus) - part(&minus)) / (2.0 * h);
                    let exact = grad.l2_inner(&d).unwrap();
                    // rounding in the difference quotient: the finite
                    // difference cannot resolve below eps |F| / h
                    let noise = 10.0 * f64::EPSILON * (part(&plus).abs() + part(&minus).abs()) / (2.0 * h);
                    let err = (fd - exact).abs();
                    let scale = fd.abs().max(exact.abs());
                    if err > 0.0 {
                        worst = worst.max(err / scale);
                        worst_beyond_noise = worst_beyond_noise.max((err - noise).max(0.0) / scale);
                    }
                    count += 1;
                }
            }
        }
    }
    verdict(
        worst_beyond_noise < 1e-5,
        format!(
            "{count} directional derivatives, worst relative error beyond rounding {worst_beyond_noise:.2e} (raw {worst:.2e})"
        ),
    )
}

fn pullback_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (mut total, mut kin, mut coul, mut elec) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let m = 4 * N;
    for model in all_models() {
        for parity in parities() {
            for _ in 0..20 {
                let z = random_loop(&mut rng, N, parity, 3, true, 1.0);
                let parts = action_parts(&z, &model).unwrap();
                let q = sigma_map(&z, m).unwrap();
                let rel = |a: f64, b: f64| {
                    if a == b {
                        0.0
                    } else {
                        (a - b).abs() / a.abs().max(b.abs())
                    }
                };
                total = total.max(rel(parts.total, action_original(&q, &model).unwrap()));
                let traj = Trajectory::from_loop(&q).unwrap();
                let k: f64 = traj.qdot.iter().map(|v| 0.5 * v.norm_sqr()).sum::<f64>() / m as f64;
                let c: f64 = traj.q.iter().map(|v| 1.0 / v.norm()).sum::<f64>() / m as f64;
                kin = kin.max(rel(parts.kinetic, k));
                coul = coul.max(rel(parts.coulomb, c));
                let (e, e1) = electric_original(&q, &model).unwrap();
                elec = elec.max(rel(parts.electric, e)).max(rel(parts.electric_aux, e1));
            }
        }
    }
    verdict(
        total < 1e-7 && kin < 1e-6 && coul < 1e-6 && elec < 1e-6,
        format!("worst relative errors: total {total:.2e}, kinetic {kin:.2e}, coulomb {coul:.2e}, electric {elec:.2e}"),
    )
}

fn symmetry_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let models = all_models();
    let mut failures = Vec::new();
    for i in 0..50 {
        let model = &models[i % models.len()];
        let parity = parities()[i % 2];
        let z = random_loop(&mut rng, N, parity, 3, true, 1.0);
        let minus = z.apply_involution();
        if action_parts(&z, model).unwrap() != action_parts(&minus, model).unwrap() {
            failures.push(format!("#{i} functional"));
        }
        let g = part_gradients(&z, model).unwrap().total;
        if part_gradients(&minus, model).unwrap().total != g.apply_involution() {
            failures.push(format!("#{i} gradient"));
        }
        let q = sigma_map(&z, 2 * N).unwrap();
        if q != sigma_map(&minus, 2 * N).unwrap() {
            failures.push(format!("#{i} blow-up map"));
        }
        if q.winding_number().ok() != z.winding_number().ok().map(|w| w * 2) {
            failures.push(format!("#{i} winding doubling"));
        }
    }
    verdict(failures.is_empty(), format!("50 loops, failures: {failures:?}"))
}

fn residual_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst = 0.0f64;
    for model in all_models() {
        for parity in parities() {
            for _ in 0..20 {
                let z = random_loop(&mut rng, N, parity, (N / 8) as i32 - 1, false, 1.0);
                let g = part_gradients(&z, &model).unwrap().total;
                let r = delay_residual(&z, &model).unwrap();
                worst = worst.max(r.axpy(1.0 / (4.0 * z.norm_sq()), &g).sup_norm());
            }
        }
    }
    verdict(
        worst < 1e-8,
        format!("160 loops, sup |R + grad/(4||z||^2)| = {worst:.2e}"),
    )
}

fn rotating_frame() -> Verdict {
    let seed = circle(N, kepler_radius());
    let family = match continue_family(&seed, &FieldModel::rotating_kepler, 10, &opts(Parity::Antiperiodic)) {
        Ok(f) => f,
        Err(e) => return verdict(false, format!("continuation error: {e}")),
    };
    let mut radius_err = 0.0f64;
    let mut drift = 0.0f64;
    for m in &family.members {
        let r = rotating_radius(m.s);
        for s in m.z.samples() {
            radius_err = radius_err.max((s.norm_sqr() - r).abs());
        }
        let model = FieldModel::rotating_kepler(m.s).unwrap();
        let q = sigma_map(&m.z, 2 * N).unwrap();
        drift = drift.max(energy_along(&q, &model).unwrap().1);
    }
    verdict(
        !family.truncated && family.members.len() >= 10 && radius_err < 1e-6 && drift < 1e-6,
        format!(
            "{} members, max | |z|^2 - r(s) | = {radius_err:.2e}, max energy drift {drift:.2e}",
            family.members.len()
        ),
    )
}

fn collision_structure() -> Verdict {
    let mut solutions = Vec::new();
    for (collisions, seed) in [(1, 102), (2, 107), (3, 108)] {
        match collision_solution(collisions, seed) {
            Ok(z) => solutions.push(z),
            Err(e) => return verdict(false, e),
        }
    }
    let mut ok = true;
    let (mut second, mut third, mut speed, mut spread) = (0.0f64, f64::INFINITY, f64::INFINITY, 0.0f64);
    let mut count = 0;
    for z in &solutions {
        let report = collision_report(z, orbits_core::reparam::DEFAULT_CTOL).unwrap();
        ok &= !report.is_empty();
        for c in &report {
            second = second.max(c.t_second.abs());
            third = third.min(c.t_third);
            speed = speed.min(c.speed);
            count += 1;
        }
        let mu = mu_from_collisions(z).unwrap();
        for a in &mu {
            for b in &mu {
                spread = spread.max((a - b).abs());
            }
        }
    }
    verdict(
        ok && second < 1e-7 && third > 0.0 && speed > 1e-3 && spread < 1e-7,
        format!(
            "{count} collisions on {} orbits: max |t''| {second:.2e}, min t''' {third:.3}, min |z'| {speed:.3}, mu spread {spread:.2e}",
            solutions.len()
        ),
    )
}

fn bicircular_smoke() -> Verdict {
    let m_sun = 1e4;
    let family_fn = move |s: f64| Ok(bicircular(m_sun * s));
    let seed = circle(N, rotating_radius(1.0));
    let o = opts(Parity::Antiperiodic);
    let (plus, minus) = match (
        continue_family(&seed, &family_fn, 5, &o),
        continue_family(&seed.apply_involution(), &family_fn, 5, &o),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return verdict(false, format!("continuation errors: {:?} {:?}", a.err(), b.err())),
    };
    let worst = plus.members.iter().map(|m| m.report.residual_sup).fold(0.0, f64::max);
    let paired = plus.members.len() == minus.members.len()
        && plus
            .members
            .iter()
            .zip(&minus.members)
            .all(|(a, b)| a.s == b.s && b.z == a.z.apply_involution() && a.report == b.report);
    verdict(
        !plus.truncated && worst < 1e-6 && paired,
        format!(
            "m_sun = {m_sun}, {} members, max residual {worst:.2e}, involution pairs intact: {paired}",
            plus.members.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("circular-orbit oracle", circular_orbit, Some(Duration::from_secs(10))),
        ("collision-orbit oracle", collision_orbit, Some(Duration::from_secs(10))),
        (
            "gradient correctness",
            gradient_correctness,
            Some(Duration::from_secs(30)),
        ),
        ("pullback identity", pullback_identity, None),
        ("symmetry suite", symmetry_suite, None),
        ("residual/gradient identity", residual_identity, None),
        (
            "rotating-frame continuation",
            rotating_frame,
            Some(Duration::from_secs(60)),
        ),
        ("collision structure", collision_structure, None),
        (
            "bicircular smoke test",
            bicircular_smoke,
            Some(Duration::from_secs(300)),
        ),
    ];
    let mut all = true;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let passed = v.passed && in_time;
        all &= passed;
        let budget_note = budget.map_or(String::new(), |b| format!(" / {}s", b.as_secs()));
        println!(
            "criterion {}: {} {name}: {} [{:.2}s{budget_note}]",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
