use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use orbits_core::action::{action_parts, delay_residual, part_gradients, ActionBreakdown};
use orbits_core::{make_preset, FieldModel, Loop, Parity};

fn expi(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

fn models() -> Vec<FieldModel> {
    let mut stark = BTreeMap::new();
    stark.insert("f_re".to_string(), 0.3);
    stark.insert("f_im".to_string(), -0.2);
    stark.insert("m".to_string(), 2.0);
    let mut bic = BTreeMap::new();
    bic.insert("m_sun".to_string(), 50.0);
    bic.insert("a_sun".to_string(), 12.0);
    bic.insert("omega_sun".to_string(), 1.0);
    vec![
        FieldModel::kepler(),
        FieldModel::rotating_kepler(0.8).unwrap(),
        make_preset("forced_stark", &stark).unwrap(),
        make_preset("bicircular", &bic).unwrap(),
    ]
}

/// Band-limited test loops (modes well below N/8) so that the pointwise
/// product rule holds on the grid.
fn test_loops(n: usize) -> Vec<Loop> {
    vec![
        Loop::from_fn(n, Parity::Antiperiodic, |t| {
            expi(PI * t) * 0.9 + Complex64::new(0.12, -0.05) * expi(-PI * t) + expi(3.0 * PI * t) * 0.07
        })
        .unwrap(),
        Loop::from_fn(n, Parity::Periodic, |t| {
            expi(2.0 * PI * t) * 0.8 + Complex64::new(0.2, 0.1) + expi(-4.0 * PI * t) * 0.1
        })
        .unwrap(),
    ]
}

fn direction(z: &Loop) -> Loop {
    Loop::from_fn(z.len(), z.parity(), |t| {
        let base = if z.parity() == Parity::Periodic { 0.0 } else { PI * t };
        expi(base) * Complex64::new(0.3, 0.7)
            + expi(base + 2.0 * PI * t) * Complex64::new(-0.4, 0.2)
            + expi(base - 6.0 * PI * t) * 0.25
    })
    .unwrap()
}

type Part = fn(&ActionBreakdown) -> f64;

#[test]
fn gradients_match_central_differences() {
    let parts: [(&str, Part); 5] = [
        ("kinetic", |b| b.kinetic),
        ("magnetic", |b| b.magnetic),
        ("coulomb", |b| b.coulomb),
        ("electric", |b| b.electric),
        ("total", |b| b.total),
    ];
    let h = 1e-5;
    for model in models() {
        for z in test_loops(64) {
            let d = direction(&z);
            let grads = part_gradients(&z, &model).unwrap();
            let plus = action_parts(&z.axpy(h, &d), &model).unwrap();
            let minus = action_parts(&z.axpy(-h, &d), &model).unwrap();
            for (name, part) in parts {
                let fd = (part(&plus) - part(&minus)) / (2.0 * h);
                let g = match name {
                    "kinetic" => &grads.kinetic,
                    "magnetic" => &grads.magnetic,
                    "coulomb" => &grads.coulomb,
                    "electric" => &grads.electric,
                    _ => &grads.total,
                };
                let exact = g.l2_inner(&d).unwrap();
                let scale = 1.0 + fd.abs();
                assert!(
                    (fd - exact).abs() < 1e-7 * scale,
                    "{} {name}: fd {fd} vs {exact}",
                    model.id()
                );
            }
        }
    }
}

#[test]
fn residual_is_scaled_gradient() {
    for model in models() {
        for z in test_loops(128) {
            let g = part_gradients(&z, &model).unwrap().total;
            let r = delay_residual(&z, &model).unwrap();
            let n = z.norm_sq();
            let diff = r.axpy(1.0 / (4.0 * n), &g);
            assert!(
                diff.sup_norm() < 1e-8 * (1.0 + r.sup_norm()),
                "{}: {}",
                model.id(),
                diff.sup_norm()
            );
        }
    }
}
