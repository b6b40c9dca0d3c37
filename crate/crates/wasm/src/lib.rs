//! Browser bindings for the orbit solver.
//!
//! Every exported function takes a JSON request and returns a JSON string,
//! either `{"ok": ...}` or `{"error": "..."}`. The `*_json` functions behind
//! them are plain Rust and carry the logic.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use orbits_core::solver::{solve_critical_observed, Iterate, SolveOptions, SolveReport};
use orbits_core::verify::{verify_solution, VerificationReport, VerifyOptions};
use orbits_core::{collision_report, time_map, HalfInt, Loop, Parity, PresetConfig};

const CURVE_NODES: usize = 256;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub preset: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ModelSpec {
    fn build(&self) -> Result<orbits_core::FieldModel, String> {
        PresetConfig {
            preset: self.preset.clone(),
            params: self.params.clone(),
            exclusion_radius: None,
        }
        .build()
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    Circle,
    Collision,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub model: ModelSpec,
    pub seed: SeedKind,
    pub amplitude: f64,
    pub winding: f64,
    /// Relative size of a fixed deformation added to the seed.
    #[serde(default)]
    pub deform: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Large values make the solver start with Newton, which is needed for
    /// saddle orbits.
    #[serde(default)]
    pub newton_switch_tol: Option<f64>,
}

fn default_n() -> usize {
    128
}

fn default_max_iters() -> usize {
    2000
}

/// A point of the physical curve at a uniform time node.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub tau: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Serialize)]
pub struct SolveResponse {
    pub trace: Vec<Iterate>,
    pub report: SolveReport,
    pub verification: Option<VerificationReport>,
    pub z: Loop,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    /// Frequency in turns per loop; a half-integer.
    pub k: f64,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreRequest {
    pub modes: Vec<Mode>,
    #[serde(default = "default_n")]
    pub n: usize,
}

#[derive(Debug, Serialize)]
pub struct ExploreResponse {
    pub parity: Parity,
    /// `z` at uniform `tau` nodes.
    pub z_curve: Vec<[f64; 2]>,
    /// `q = z^2` at uniform physical time nodes.
    pub q_curve: Vec<CurvePoint>,
    /// Winding of `q` about the origin, absent when `q` passes through it.
    pub winding: Option<HalfInt>,
    /// Zeros of `z` as `(tau, t)` pairs.
    pub collisions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub model: ModelSpec,
    pub z: Loop,
    /// Multiplies `z` before checking, to see how the checks react.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    let value = match result {
        Ok(v) => serde_json::json!({ "ok": v }),
        Err(e) => serde_json::json!({ "error": e }),
    };
    value.to_string()
}

fn parse<'a, T: Deserialize<'a>>(request: &'a str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn parity_of(winding: f64) -> Result<Parity, String> {
    HalfInt::nearest(winding)
        .filter(|w| w.value() == winding)
        .map(HalfInt::parity)
        .ok_or_else(|| format!("winding {winding} is not a half-integer"))
}

/// Samples `q = z^2` at uniform physical times.
fn physical_curve(z: &Loop, nodes: usize) -> Result<Vec<CurvePoint>, String> {
    let table = time_map(z).map_err(|e| e.to_string())?;
    Ok((0..nodes)
        .map(|k| {
            let t = k as f64 / nodes as f64;
            let tau = table.invert(t);
            let zt = table.interpolant().eval(tau);
            let q = zt * zt;
            CurvePoint {
                t,
                tau,
                x: q.re,
                y: q.im,
            }
        })
        .collect())
}

pub fn build_seed(req: &SolveRequest) -> Result<Loop, String> {
    if !(req.amplitude > 0.0 && req.amplitude.is_finite()) {
        return Err("seed amplitude must be positive".into());
    }
    let parity = parity_of(req.winding)?;
    let (a, w, d) = (req.amplitude, req.winding, req.deform);
    Loop::from_fn(req.n, parity, |tau| {
        let phase = 2.0 * PI * w * tau;
        let base = match req.seed {
            SeedKind::Circle => Complex64::from_polar(a, phase),
            SeedKind::Collision => Complex64::new(a * phase.cos(), 0.0),
        };
        // a fixed mix of neighbouring modes with the same parity
        let bump = Complex64::new(0.0, 2.0 * PI * tau).exp();
        base * (1.0 + d * (0.6 * bump + 0.4 * bump.conj() * bump.conj()))
    })
    .map_err(|e| e.to_string())
}

pub fn solve_json(request: &str) -> Result<SolveResponse, String> {
    let req: SolveRequest = parse(request)?;
    let model = req.model.build()?;
    let seed = build_seed(&req)?;
    let mut opts = SolveOptions {
        n: req.n,
        parity: seed.parity(),
        max_iters: req.max_iters,
        ..SolveOptions::default()
    };
    if let Some(tol) = req.newton_switch_tol {
        opts.newton_switch_tol = tol;
    }
    let mut trace = Vec::new();
    let (z, report) =
        solve_critical_observed(&seed, &model, &opts, &mut |it| trace.push(*it)).map_err(|e| e.to_string())?;
    let verification = verify_solution(&z, &model, &VerifyOptions::default()).ok();
    let curve = physical_curve(&z, CURVE_NODES)?;
    Ok(SolveResponse {
        trace,
        report,
        verification,
        z,
        curve,
    })
}

pub fn explore_json(request: &str) -> Result<ExploreResponse, String> {
    let req: ExploreRequest = parse(request)?;
    let first = req.modes.first().ok_or("need at least one mode")?;
    let parity = parity_of(first.k)?;
    for m in &req.modes {
        if parity_of(m.k)? != parity {
            return Err("all modes must be integers or all half-integers".into());
        }
    }
    let z = Loop::from_fn(req.n, parity, |tau| {
        req.modes
            .iter()
            .map(|m| Complex64::new(m.re, m.im) * Complex64::new(0.0, 2.0 * PI * m.k * tau).exp())
            .sum()
    })
    .map_err(|e| e.to_string())?;
    if z.max_abs() == 0.0 {
        return Err("the loop is identically zero".into());
    }
    let table = time_map(&z).map_err(|e| e.to_string())?;
    let collisions = collision_report(&z, orbits_core::reparam::DEFAULT_CTOL)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|c| [c.tau, table.time_at(c.tau)])
        .collect::<Vec<_>>();
    let winding = if collisions.is_empty() {
        let q = orbits_core::sigma_map(&z, 2 * req.n).map_err(|e| e.to_string())?;
        q.winding_number().ok()
    } else {
        None
    };
    let interp = z.interpolant();
    let z_curve = (0..CURVE_NODES)
        .map(|k| {
            let v = interp.eval(k as f64 / CURVE_NODES as f64);
            [v.re, v.im]
        })
        .collect();
    Ok(ExploreResponse {
        parity,
        z_curve,
        q_curve: physical_curve(&z, CURVE_NODES)?,
        winding,
        collisions,
    })
}

pub fn verify_json(request: &str) -> Result<VerificationReport, String> {
    let req: VerifyRequest = parse(request)?;
    let model = req.model.build()?;
    verify_solution(&req.z.scaled(req.scale), &model, &VerifyOptions::default()).map_err(|e| e.to_string())
}

/// Solves for a critical loop from a circle or collision seed and returns
/// the iterate trace, the report, a verification and the physical curve.
#[wasm_bindgen]
pub fn solve(request: &str) -> String {
    respond(solve_json(request))
}

/// Builds `z` from Fourier modes and shows its image under the blow-up map.
#[wasm_bindgen]
pub fn explore(request: &str) -> String {
    respond(explore_json(request))
}

/// Runs the independent checks on a (possibly rescaled) loop.
#[wasm_bindgen]
pub fn verify(request: &str) -> String {
    respond(verify_json(request))
}
