//! Running one job: `solve`, `verify`, `continue` or `map`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use orbits_core::action::action_parts;
use orbits_core::solver::{continue_family, solve_critical, SolveReport};
use orbits_core::verify::{verify_solution, VerificationReport, VerifyOptions};
use orbits_core::{sigma_map, Error as CoreError, FieldModel, HalfInt, Loop, Parity};

use crate::config::{Command, ExportConfig, ExportFormat, JobConfig, Perturbation, SeedSpec};
use crate::export::{sample_orbit, to_csv, to_svg};
use crate::orbit::{read_loop, OrbitFile, OrbitMeta};

/// Process exit status of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Failure = 1,
    NotConverged = 2,
    InvalidConfig = 3,
    VerificationFailed = 4,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug)]
pub struct JobError {
    pub status: Status,
    pub message: String,
}

impl std::fmt::Display for JobError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for JobError {}

fn fail(status: Status, message: impl std::fmt::Display) -> JobError {
    JobError {
        status,
        message: message.to_string(),
    }
}

fn config_error(e: impl std::fmt::Display) -> JobError {
    fail(Status::InvalidConfig, e)
}

fn io_error(e: impl std::fmt::Display) -> JobError {
    fail(Status::Failure, e)
}

/// What a finished job produced.
#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Loads, validates and runs the job in `config_path`. `out` overrides the
/// configured output directory.
pub fn run_job(command: Command, config_path: &Path, out: Option<&Path>) -> Result<Outcome, JobError> {
    let config = JobConfig::load(config_path).map_err(config_error)?;
    run_config(command, &config, out)
}

pub fn run_config(command: Command, config: &JobConfig, out: Option<&Path>) -> Result<Outcome, JobError> {
    config.validate(command).map_err(config_error)?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match command {
        Command::Solve => solve_job(config, &out_dir),
        Command::Verify => verify_job(config, &out_dir),
        Command::Continue => continue_job(config, &out_dir),
        Command::Map => map_job(config, &out_dir),
    }
}

fn build_model(config: &JobConfig) -> Result<FieldModel, JobError> {
    config
        .model
        .as_ref()
        .ok_or_else(|| config_error("missing [model]"))?
        .build()
        .map_err(config_error)
}

/// The seed loop described by the config, before perturbation.
pub fn build_seed(config: &JobConfig) -> Result<Loop, JobError> {
    let n = config.solver.n;
    let parity = config.solver.parity;
    let seed = config.seed.as_ref().ok_or_else(|| config_error("missing [seed]"))?;
    let z = match seed {
        SeedSpec::Circle { radius, winding } => {
            let w = *winding;
            Loop::from_fn(n, parity, |t| Complex64::from_polar(*radius, 2.0 * PI * w * t))
        }
        SeedSpec::CollisionSeed { amplitude, winding } => {
            let w = *winding;
            Loop::from_fn(n, parity, |t| Complex64::new(amplitude * (2.0 * PI * w * t).cos(), 0.0))
        }
        SeedSpec::File { path } => {
            let z = read_loop(path).map_err(|e| config_error(format!("{e:#}")))?;
            if z.parity() != parity {
                return Err(config_error(format!(
                    "seed file holds a {} loop but the solver asks for {}",
                    z.parity(),
                    parity
                )));
            }
            Ok(z)
        }
    }
    .map_err(config_error)?;
    Ok(match (&config.perturbation, config.random_seed) {
        (Some(p), Some(seed)) => perturb(&z, p, seed),
        _ => z,
    })
}

/// Multiplies the seed by `1 + amplitude * p(tau)` with a random
/// trigonometric polynomial `p` of degree 4 and unit coefficient scale.
fn perturb(z: &Loop, p: &Perturbation, seed: u64) -> Loop {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<[f64; 4]> = (0..4)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let n = z.len();
    let samples = (0..n)
        .map(|j| {
            let t = j as f64 / n as f64;
            let mut v = Complex64::new(0.0, 0.0);
            for (k, c) in coeffs.iter().enumerate() {
                let ph = 2.0 * PI * (k + 1) as f64 * t;
                let im = if p.real { 0.0 } else { c[2] * ph.cos() + c[3] * ph.sin() };
                v += Complex64::new(c[0] * ph.cos() + c[1] * ph.sin(), im);
            }
            z.samples()[j] * (Complex64::new(1.0, 0.0) + v * (p.amplitude / 4.0))
        })
        .collect();
    Loop::new(samples, z.parity()).expect("perturbation keeps the shape")
}

fn solver_error(e: CoreError) -> JobError {
    match e {
        CoreError::Parity(_)
        | CoreError::InvalidParameter { .. }
        | CoreError::InvalidInput(_)
        | CoreError::Shape(_) => config_error(e),
        other => fail(Status::NotConverged, other),
    }
}

fn export_nodes(export: Option<&ExportConfig>, z: &Loop) -> usize {
    match export.map(|e| e.nodes) {
        Some(n) if n > 0 => n,
        _ => 2 * z.len(),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), JobError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(format!("creating {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), JobError> {
    let text = serde_json::to_string_pretty(value).map_err(io_error)?;
    std::fs::write(path, text).map_err(|e| io_error(format!("writing {}: {e}", path.display())))
}

/// Builds the orbit record for a solved loop.
pub fn make_orbit(
    z: Loop,
    model: &FieldModel,
    report: SolveReport,
    verification: Option<VerificationReport>,
) -> Result<OrbitFile, JobError> {
    let q = sigma_map(&z, 2 * z.len()).map_err(io_error)?;
    let action = action_parts(&z, model).map_err(io_error)?;
    Ok(OrbitFile {
        meta: OrbitMeta::new(model, &z),
        z,
        q,
        action,
        report,
        verification,
    })
}

/// Writes the requested export formats next to `stem.json`.
pub fn write_exports(
    orbit: &OrbitFile,
    export: Option<&ExportConfig>,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, JobError> {
    let Some(cfg) = export else { return Ok(Vec::new()) };
    let mut files = Vec::new();
    for format in &cfg.formats {
        files.push(export_orbit(orbit, *format, export_nodes(export, &orbit.z), dir, stem)?);
    }
    Ok(files)
}

/// Writes one export of `orbit` as `dir/stem.{csv,svg}`.
pub fn export_orbit(
    orbit: &OrbitFile,
    format: ExportFormat,
    nodes: usize,
    dir: &Path,
    stem: &str,
) -> Result<PathBuf, JobError> {
    ensure_dir(dir)?;
    let samples = sample_orbit(&orbit.z, nodes).map_err(io_error)?;
    let (path, text) = match format {
        ExportFormat::Csv => (dir.join(format!("{stem}.csv")), to_csv(&samples)),
        ExportFormat::SvgPath => {
            let taus: Vec<f64> = orbit.report.collisions.iter().map(|c| c.tau).collect();
            (dir.join(format!("{stem}.svg")), to_svg(&samples, &orbit.z, &taus))
        }
    };
    std::fs::write(&path, text).map_err(|e| io_error(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

fn describe(report: &SolveReport, verification: &VerificationReport) -> String {
    format!(
        "converged: {}, iterations: {}, |grad|: {:.3e}, action: {:.12}, residual: {:.3e}, collisions: {}, verification: {}",
        report.converged,
        report.iterations,
        report.final_grad_norm,
        report.action.total,
        report.residual_sup,
        report.collisions.len(),
        if verification.passed {
            "passed".to_string()
        } else {
            format!("FAILED ({})", verification.failures.join("; "))
        }
    )
}

fn solve_job(config: &JobConfig, out: &Path) -> Result<Outcome, JobError> {
    let model = build_model(config)?;
    let seed = build_seed(config)?;
    let (z, report) = solve_critical(&seed, &model, &config.solver).map_err(solver_error)?;
    let verification = verify_solution(&z, &model, &config.verify).map_err(|e| fail(Status::VerificationFailed, e))?;
    let summary = describe(&report, &verification);
    let status = if !report.converged {
        Status::NotConverged
    } else if !verification.passed {
        Status::VerificationFailed
    } else {
        Status::Ok
    };
    let orbit = make_orbit(z, &model, report, Some(verification))?;
    ensure_dir(out)?;
    let path = out.join("orbit.json");
    write_json(&path, &orbit)?;
    let mut files = vec![path];
    files.extend(write_exports(&orbit, config.export.as_ref(), out, "orbit")?);
    Ok(Outcome { status, summary, files })
}

fn read_input(config: &JobConfig) -> Result<OrbitFile, JobError> {
    let path = config.input.as_ref().ok_or_else(|| config_error("missing `input`"))?;
    OrbitFile::read(path).map_err(|e| config_error(format!("{e:#}")))
}

fn verify_job(config: &JobConfig, out: &Path) -> Result<Outcome, JobError> {
    let orbit = read_input(config)?;
    let model = orbit.meta.field_model().map_err(config_error)?;
    let options: VerifyOptions = config.verify;
    let report = match verify_solution(&orbit.z, &model, &options) {
        Ok(r) => r,
        Err(e) => {
            return Err(fail(
                Status::VerificationFailed,
                format!("verification impossible: {e}"),
            ))
        }
    };
    ensure_dir(out)?;
    let path = out.join("verification.json");
    write_json(&path, &report)?;
    let orbit_path = out.join("orbit.json");
    let passed = report.passed;
    let mut orbit = orbit;
    orbit.verification = Some(report.clone());
    write_json(&orbit_path, &orbit)?;
    let status = if passed { Status::Ok } else { Status::VerificationFailed };
    let summary = format!(
        "ODE residual {:.3e}, delay residual {:.3e}, mu_fit {:?}, mu_j {:?}, winding mod 2: {}, {}",
        report.ode_residual_sup,
        report.delay_residual_sup,
        report.mu_fit,
        report.mu_j,
        report.winding_mod2,
        if report.passed {
            "passed".to_string()
        } else {
            format!("FAILED ({})", report.failures.join("; "))
        }
    );
    Ok(Outcome {
        status,
        summary,
        files: vec![path, orbit_path],
    })
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    index: usize,
    s: f64,
    value: f64,
    file: String,
    converged: bool,
    residual_sup: f64,
    action: f64,
    verified: bool,
}

#[derive(Debug, Serialize)]
struct Manifest {
    model: String,
    parameter: String,
    from: f64,
    to: f64,
    steps: usize,
    truncated: bool,
    members: Vec<ManifestEntry>,
}

fn continue_job(config: &JobConfig, out: &Path) -> Result<Outcome, JobError> {
    let model_cfg = config.model.clone().ok_or_else(|| config_error("missing [model]"))?;
    let cont = config
        .continuation
        .clone()
        .ok_or_else(|| config_error("missing [continuation]"))?;
    let value_at = |s: f64| cont.from + s * (cont.to - cont.from);
    let family = |s: f64| {
        let mut cfg = model_cfg.clone();
        cfg.params.insert(cont.parameter.clone(), value_at(s));
        cfg.build()
    };
    // catch unknown parameters and invalid ranges before solving
    family(0.0).map_err(config_error)?;
    family(1.0).map_err(config_error)?;
    let seed = build_seed(config)?;
    let result = continue_family(&seed, &family, cont.steps, &config.solver).map_err(solver_error)?;

    ensure_dir(out)?;
    let mut files = Vec::new();
    let mut members = Vec::new();
    let mut all_verified = true;
    for (index, member) in result.members.into_iter().enumerate() {
        let model = family(member.s).map_err(config_error)?;
        let verification = verify_solution(&member.z, &model, &config.verify).ok();
        let verified = verification.as_ref().is_some_and(|v| v.passed);
        all_verified &= verified;
        let converged = member.report.converged;
        let residual_sup = member.report.residual_sup;
        let mut orbit = make_orbit(member.z, &model, member.report, verification)?;
        orbit.meta.s = Some(member.s);
        let stem = format!("orbit_{index:03}");
        let path = out.join(format!("{stem}.json"));
        write_json(&path, &orbit)?;
        files.push(path);
        files.extend(write_exports(&orbit, config.export.as_ref(), out, &stem)?);
        members.push(ManifestEntry {
            index,
            s: member.s,
            value: value_at(member.s),
            file: format!("{stem}.json"),
            converged,
            residual_sup,
            action: orbit.action.total,
            verified,
        });
    }
    let manifest = Manifest {
        model: model_cfg.preset.clone(),
        parameter: cont.parameter.clone(),
        from: cont.from,
        to: cont.to,
        steps: cont.steps,
        truncated: result.truncated,
        members,
    };
    let path = out.join("manifest.json");
    write_json(&path, &manifest)?;
    files.push(path);
    let status = if result.truncated {
        Status::NotConverged
    } else if !all_verified {
        Status::VerificationFailed
    } else {
        Status::Ok
    };
    let summary = format!(
        "{} members, truncated: {}, all verified: {all_verified}",
        manifest.members.len(),
        result.truncated
    );
    Ok(Outcome { status, summary, files })
}

#[derive(Debug, Serialize)]
struct MapOutput {
    parity: Parity,
    winding: Option<HalfInt>,
    q: Loop,
}

fn map_job(config: &JobConfig, out: &Path) -> Result<Outcome, JobError> {
    let path = config.input.as_ref().ok_or_else(|| config_error("missing `input`"))?;
    let z = read_loop(path).map_err(|e| config_error(format!("{e:#}")))?;
    let nodes = export_nodes(config.export.as_ref(), &z);
    let q = sigma_map(&z, nodes).map_err(config_error)?;
    ensure_dir(out)?;
    let winding = q.winding_number().ok();
    let target = out.join("q.json");
    write_json(
        &target,
        &MapOutput {
            parity: z.parity(),
            winding,
            q,
        },
    )?;
    let mut files = vec![target];
    if let Some(cfg) = &config.export {
        let collisions = orbits_core::collision_report(&z, orbits_core::reparam::DEFAULT_CTOL).unwrap_or_default();
        let samples = sample_orbit(&z, nodes).map_err(io_error)?;
        for format in &cfg.formats {
            let (name, text) = match format {
                ExportFormat::Csv => ("q.csv", to_csv(&samples)),
                ExportFormat::SvgPath => {
                    let taus: Vec<f64> = collisions.iter().map(|c| c.tau).collect();
                    ("q.svg", to_svg(&samples, &z, &taus))
                }
            };
            let p = out.join(name);
            std::fs::write(&p, text).map_err(|e| io_error(format!("writing {}: {e}", p.display())))?;
            files.push(p);
        }
    }
    Ok(Outcome {
        status: Status::Ok,
        summary: format!(
            "mapped {} nodes in z to {nodes} time nodes, winding {winding:?}",
            z.len()
        ),
        files,
    })
}
