//! Plot-ready exports of an orbit: CSV tables and a static SVG path.

use std::fmt::Write;

use anyhow::bail;
use num_complex::Complex64;

use orbits_core::{time_map, Loop};

/// One row per uniform time node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub tau: f64,
    pub z: Complex64,
    pub q: Complex64,
}

pub fn sample_orbit(z: &Loop, nodes: usize) -> anyhow::Result<Vec<Sample>> {
    if nodes == 0 {
        bail!("need at least one export node");
    }
    let table = time_map(z)?;
    Ok((0..nodes)
        .map(|k| {
            let t = k as f64 / nodes as f64;
            let tau = table.invert(t);
            let zt = table.interpolant().eval(tau);
            Sample {
                t,
                tau,
                z: zt,
                q: zt * zt,
            }
        })
        .collect())
}

pub const CSV_HEADER: &str = "t,re_q,im_q,abs_q,tau,re_z,im_z";

pub fn to_csv(samples: &[Sample]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t,
            s.q.re,
            s.q.im,
            s.q.norm(),
            s.tau,
            s.z.re,
            s.z.im
        )
        .unwrap();
    }
    out
}

/// The q-curve as one closed path, the attracting center at the origin, and
/// a marker at every collision in `collisions` (loop parameters).
pub fn to_svg(samples: &[Sample], z: &Loop, collisions: &[f64]) -> String {
    let interp = z.interpolant();
    let marks: Vec<Complex64> = collisions
        .iter()
        .map(|&tau| {
            let v = interp.eval(tau);
            v * v
        })
        .collect();
    let points = samples
        .iter()
        .map(|s| s.q)
        .chain(std::iter::once(Complex64::new(0.0, 0.0)));
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo_x = lo_x.min(p.re);
        hi_x = hi_x.max(p.re);
        lo_y = lo_y.min(p.im);
        hi_y = hi_y.max(p.im);
    }
    let span = (hi_x - lo_x).max(hi_y - lo_y).max(1e-12);
    let pad = 0.05 * span;
    let (x0, y0, w) = (lo_x - pad, -hi_y - pad, span + 2.0 * pad);
    let dot = 0.012 * w;
    let stroke = 0.004 * w;

    let mut path = String::new();
    for (i, s) in samples.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(path, "{cmd}{:.9} {:.9} ", s.q.re, -s.q.im).unwrap();
    }
    path.push('Z');

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0} {y0} {w} {w}" width="600" height="600">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"  <path d="{path}" fill="none" stroke="steelblue" stroke-width="{stroke}"/>"#
    )
    .unwrap();
    writeln!(svg, r#"  <circle cx="0" cy="0" r="{dot}" fill="black"/>"#).unwrap();
    for m in marks {
        writeln!(
            svg,
            r#"  <circle class="collision" cx="{}" cy="{}" r="{}" fill="none" stroke="crimson" stroke-width="{stroke}"/>"#,
            m.re,
            -m.im,
            1.8 * dot
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
