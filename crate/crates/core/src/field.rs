//! Stark-Zeeman field bundles: electric potential `E_t`, its time derivative
//! and gradient, magnetic field `B` and a gauge one-form `A` with `rot A = B`.
//!
//! Gradients are complex numbers `dE/dx + i dE/dy`. The Coulomb term `-1/|q|`
//! is never part of `E`; consumers add it.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One bundled evaluation of a model at `(q, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub e: f64,
    pub de_dt: f64,
    pub grad_e: Complex64,
    pub b: f64,
    pub a: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Preset {
    Kepler,
    RotatingKepler {
        omega: f64,
    },
    ForcedStark {
        force: Complex64,
        harmonic: f64,
    },
    Bicircular {
        m_earth: f64,
        m_sun: f64,
        a_earth: f64,
        a_sun: f64,
        omega_sun: f64,
    },
}

/// A named, parameterized field model.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    id: String,
    params: BTreeMap<String, f64>,
    preset: Preset,
    exclusion_radius: f64,
}

/// Structured preset description as it appears in job configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetConfig {
    pub preset: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub exclusion_radius: Option<f64>,
}

impl PresetConfig {
    pub fn build(&self) -> Result<FieldModel> {
        let model = make_preset(&self.preset, &self.params)?;
        match self.exclusion_radius {
            Some(r) => model.with_exclusion_radius(r),
            None => Ok(model),
        }
    }
}

fn param(params: &BTreeMap<String, f64>, name: &str, default: f64) -> Result<f64> {
    let v = params.get(name).copied().unwrap_or(default);
    if !v.is_finite() {
        return Err(Error::InvalidParameter {
            name: name.into(),
            reason: "must be finite".into(),
        });
    }
    Ok(v)
}

fn non_negative(name: &str, v: f64) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::InvalidParameter {
            name: name.into(),
            reason: format!("mass must be non-negative, got {v}"),
        });
    }
    Ok(v)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v <= 0.0 {
        return Err(Error::InvalidParameter {
            name: name.into(),
            reason: format!("must be positive, got {v}"),
        });
    }
    Ok(v)
}

fn integral(name: &str, v: f64) -> Result<f64> {
    if v.fract() != 0.0 {
        return Err(Error::InvalidParameter {
            name: name.into(),
            reason: format!("must be an integer to keep E 1-periodic in t, got {v}"),
        });
    }
    Ok(v)
}

/// Earth-moon mass ratio used as the bicircular default.
pub const DEFAULT_EARTH_MASS: f64 = 81.3;

/// Known preset ids and their parameter names.
pub const PRESETS: &[(&str, &[&str])] = &[
    ("kepler", &[]),
    ("rotating_kepler", &["omega"]),
    ("forced_stark", &["f_re", "f_im", "m"]),
    ("bicircular", &["m_earth", "m_sun", "a_earth", "a_sun", "omega_sun"]),
];

/// Builds a preset model. Unspecified parameters take documented defaults:
///
/// * `rotating_kepler`: `omega = 1`.
/// * `forced_stark`: `f_re = 1, f_im = 0, m = 1`.
/// * `bicircular`: `m_earth = 81.3`, `a_earth = (1 + m_earth)^(1/3)` (so the
///   unit-rate frame rotation balances the earth-moon pair), `m_sun = 0`,
///   `a_sun = 389 a_earth`, `omega_sun = 1`.
pub fn make_preset(id: &str, params: &BTreeMap<String, f64>) -> Result<FieldModel> {
    if let Some((_, known)) = PRESETS.iter().find(|(name, _)| *name == id) {
        if let Some(extra) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::InvalidParameter {
                name: extra.clone(),
                reason: format!("not a parameter of preset `{id}`"),
            });
        }
    }
    let (preset, exclusion_radius) = match id {
        "kepler" => (Preset::Kepler, 0.0),
        "rotating_kepler" => (
            Preset::RotatingKepler {
                omega: param(params, "omega", 1.0)?,
            },
            0.0,
        ),
        "forced_stark" => (
            Preset::ForcedStark {
                force: Complex64::new(param(params, "f_re", 1.0)?, param(params, "f_im", 0.0)?),
                harmonic: integral("m", param(params, "m", 1.0)?)?,
            },
            0.0,
        ),
        "bicircular" => {
            let m_earth = non_negative("m_earth", param(params, "m_earth", DEFAULT_EARTH_MASS)?)?;
            let a_earth = positive("a_earth", param(params, "a_earth", (1.0 + m_earth).cbrt())?)?;
            let m_sun = non_negative("m_sun", param(params, "m_sun", 0.0)?)?;
            let a_sun = positive("a_sun", param(params, "a_sun", 389.0 * a_earth)?)?;
            let omega_sun = integral("omega_sun", param(params, "omega_sun", 1.0)?)?;
            (
                Preset::Bicircular {
                    m_earth,
                    m_sun,
                    a_earth,
                    a_sun,
                    omega_sun,
                },
                0.1 * a_earth,
            )
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(FieldModel {
        id: id.to_string(),
        params: params.clone(),
        preset,
        exclusion_radius,
    })
}

impl FieldModel {
    pub fn kepler() -> Self {
        make_preset("kepler", &BTreeMap::new()).expect("kepler preset")
    }

    pub fn rotating_kepler(omega: f64) -> Result<Self> {
        make_preset("rotating_kepler", &BTreeMap::from([("omega".to_string(), omega)]))
    }

    pub fn with_exclusion_radius(mut self, r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "exclusion_radius".into(),
                reason: format!("must be finite and non-negative, got {r}"),
            });
        }
        self.exclusion_radius = r;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }

    /// Config block reproducing this model.
    pub fn config(&self) -> PresetConfig {
        PresetConfig {
            preset: self.id.clone(),
            params: self.params.clone(),
            exclusion_radius: Some(self.exclusion_radius),
        }
    }

    /// True when `E` does not depend on time.
    pub fn is_autonomous(&self) -> bool {
        matches!(self.preset, Preset::Kepler | Preset::RotatingKepler { .. })
    }

    fn sun_position(a_sun: f64, omega_sun: f64, t: f64) -> Complex64 {
        Complex64::from_polar(a_sun, -2.0 * PI * omega_sun * t)
    }

    fn check_domain(&self, q: Complex64, t: f64) -> Result<()> {
        if !(q.re.is_finite() && q.im.is_finite() && t.is_finite()) {
            return Err(Error::Domain {
                re: q.re,
                im: q.im,
                reason: "non-finite position or time".into(),
            });
        }
        if let Preset::Bicircular {
            a_earth,
            a_sun,
            omega_sun,
            ..
        } = self.preset
        {
            let earth = Complex64::new(a_earth, 0.0);
            let sun = Self::sun_position(a_sun, omega_sun, t);
            for (body, at) in [("earth", earth), ("sun", sun)] {
                if (q - at).norm() < self.exclusion_radius {
                    return Err(Error::Domain {
                        re: q.re,
                        im: q.im,
                        reason: format!("inside the {body} exclusion disc"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Evaluates the whole bundle at `(q, t)`.
    pub fn eval(&self, q: Complex64, t: f64) -> Result<FieldSample> {
        self.check_domain(q, t)?;
        let zero = Complex64::new(0.0, 0.0);
        Ok(match self.preset {
            Preset::Kepler => FieldSample {
                e: 0.0,
                de_dt: 0.0,
                grad_e: zero,
                b: 0.0,
                a: (0.0, 0.0),
            },
            Preset::RotatingKepler { omega } => FieldSample {
                e: -0.5 * omega * omega * q.norm_sqr(),
                de_dt: 0.0,
                grad_e: -q * (omega * omega),
                b: 2.0 * omega,
                a: (-omega * q.im, omega * q.re),
            },
            Preset::ForcedStark { force, harmonic } => {
                let phase = 2.0 * PI * harmonic * t;
                let proj = (force.conj() * q).re;
                FieldSample {
                    e: proj * phase.cos(),
                    de_dt: -2.0 * PI * harmonic * proj * phase.sin(),
                    grad_e: force * phase.cos(),
                    b: 0.0,
                    a: (0.0, 0.0),
                }
            }
            Preset::Bicircular {
                m_earth,
                m_sun,
                a_earth,
                a_sun,
                omega_sun,
            } => {
                let earth = Complex64::new(a_earth, 0.0);
                let barycenter = earth * (m_earth / (1.0 + m_earth));
                let sun = Self::sun_position(a_sun, omega_sun, t);
                let sun_vel = sun * Complex64::new(0.0, -2.0 * PI * omega_sun);
                let tidal = m_sun / (a_sun * a_sun * a_sun);
                let de = q - earth;
                let ds = q - sun;
                let re = de.norm();
                let rs = ds.norm();
                let shifted = q - barycenter;
                let e = -0.5 * shifted.norm_sqr() - m_earth / re - m_sun / rs + tidal * (sun.conj() * q).re;
                let grad_e = -shifted + de * (m_earth / (re * re * re)) + ds * (m_sun / (rs * rs * rs)) + sun * tidal;
                // d/dt (-m_s/|q - q_s|) = -m_s Re(conj(q - q_s) q_s') / |q - q_s|^3
                let de_dt = -m_sun * (ds.conj() * sun_vel).re / (rs * rs * rs) + tidal * (sun_vel.conj() * q).re;
                FieldSample {
                    e,
                    de_dt,
                    grad_e,
                    b: 2.0,
                    a: (-q.im, q.re),
                }
            }
        })
    }

    /// Real Jacobian `[[dA1/dq1, dA1/dq2], [dA2/dq1, dA2/dq2]]` of the gauge.
    pub fn gauge_jacobian(&self, _q: Complex64) -> [[f64; 2]; 2] {
        match self.preset {
            Preset::Kepler | Preset::ForcedStark { .. } => [[0.0, 0.0], [0.0, 0.0]],
            Preset::RotatingKepler { omega } => [[0.0, -omega], [omega, 0.0]],
            Preset::Bicircular { .. } => [[0.0, -1.0], [1.0, 0.0]],
        }
    }
}

/// Free-function form of [`FieldModel::eval`].
pub fn eval_field(model: &FieldModel, q: Complex64, t: f64) -> Result<FieldSample> {
    model.eval(q, t)
}

/// `|finite-difference rot A - B(q)|` with central differences of step `h`.
pub fn gauge_consistency(model: &FieldModel, q: Complex64, h: f64) -> Result<f64> {
    let a_at = |dq: Complex64| model.eval(q + dq, 0.0).map(|s| s.a);
    let (_, a2_px) = a_at(Complex64::new(h, 0.0))?;
    let (_, a2_mx) = a_at(Complex64::new(-h, 0.0))?;
    let (a1_py, _) = a_at(Complex64::new(0.0, h))?;
    let (a1_my, _) = a_at(Complex64::new(0.0, -h))?;
    let rot = (a2_px - a2_mx) / (2.0 * h) - (a1_py - a1_my) / (2.0 * h);
    Ok((rot - model.eval(q, 0.0)?.b).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn preset_examples() {
        let k = FieldModel::kepler();
        assert_eq!(k.eval(Complex64::new(1.0, 2.0), 0.3).unwrap().e, 0.0);
        let r = FieldModel::rotating_kepler(1.0).unwrap();
        for q in [Complex64::new(0.0, 0.0), Complex64::new(3.0, -1.0)] {
            assert_eq!(r.eval(q, 0.7).unwrap().b, 2.0);
        }
        let f = make_preset("forced_stark", &p(&[("f_re", 1.0), ("m", 1.0)])).unwrap();
        let s = f.eval(Complex64::new(1.0, 0.0), 0.25).unwrap();
        assert!((s.de_dt + 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn preset_errors() {
        assert!(matches!(
            make_preset("lorenz", &BTreeMap::new()),
            Err(Error::UnknownPreset(_))
        ));
        assert!(matches!(
            make_preset("bicircular", &p(&[("m_sun", -1.0)])),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(make_preset("bicircular", &p(&[("omega_sun", 0.5)])).is_err());
        assert!(make_preset("kepler", &p(&[("omega", 1.0)])).is_err());
    }

    #[test]
    fn eval_examples() {
        let k = FieldModel::kepler().eval(Complex64::new(0.3, 0.1), 0.9).unwrap();
        assert_eq!(k.grad_e, Complex64::new(0.0, 0.0));
        assert_eq!(k.a, (0.0, 0.0));
        let r = FieldModel::rotating_kepler(1.0).unwrap();
        let s = r.eval(Complex64::new(2.0, 0.0), 0.0).unwrap();
        assert_eq!(s.e, -2.0);
        assert_eq!(s.grad_e, Complex64::new(-2.0, 0.0));
    }

    #[test]
    fn bicircular_domain_exclusion() {
        let m = make_preset("bicircular", &BTreeMap::new()).unwrap();
        let a = (1.0 + DEFAULT_EARTH_MASS).cbrt();
        let near_earth = Complex64::new(a + 0.01, 0.0);
        assert!(matches!(m.eval(near_earth, 0.0), Err(Error::Domain { .. })));
        assert!(m.eval(Complex64::new(0.3, 0.1), 0.2).is_ok());
        // earth-moon balance: no net force on the moon at the origin
        let s = m.eval(Complex64::new(0.0, 0.0), 0.0).unwrap();
        assert!(s.grad_e.norm() < 1e-12);
    }

    #[test]
    fn gauge_examples() {
        let q = Complex64::new(1.0, 1.0);
        assert_eq!(gauge_consistency(&FieldModel::kepler(), q, 1e-5).unwrap(), 0.0);
        let r = FieldModel::rotating_kepler(1.0).unwrap();
        assert!(gauge_consistency(&r, q, 1e-5).unwrap() < 1e-8);
        let b = make_preset("bicircular", &p(&[("m_sun", 10.0)])).unwrap();
        assert!(gauge_consistency(&b, Complex64::new(0.4, -0.7), 1e-5).unwrap() < 1e-8);
    }
}
