//! Uniformly sampled loops in the complex plane.
//!
//! A [`Loop`] stores `N` samples at `tau_j = j/N`. Periodic loops satisfy
//! `z(tau + 1) = z(tau)`; antiperiodic (twisted) loops satisfy
//! `z(tau + 1) = -z(tau)` and are expanded in half-integer frequencies.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Smallest admissible number of nodes.
pub const MIN_NODES: usize = 8;

/// Relative tolerance below which a sample counts as a zero for winding purposes.
pub const WINDING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Periodic,
    Antiperiodic,
}

impl Parity {
    /// Sign picked up after one full period.
    pub fn monodromy(self) -> f64 {
        match self {
            Parity::Periodic => 1.0,
            Parity::Antiperiodic => -1.0,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Periodic => f.write_str("periodic"),
            Parity::Antiperiodic => f.write_str("antiperiodic"),
        }
    }
}

/// An element of `Z/2`, stored exactly as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i64);

impl HalfInt {
    pub fn from_twice(twice: i64) -> Self {
        HalfInt(twice)
    }

    pub fn from_int(n: i64) -> Self {
        HalfInt(2 * n)
    }

    /// Rounds to the nearest half-integer; `None` for non-finite input.
    pub fn nearest(x: f64) -> Option<Self> {
        x.is_finite().then(|| HalfInt((2.0 * x).round() as i64))
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Loop parity that carries this winding number.
    pub fn parity(self) -> Parity {
        if self.is_integer() {
            Parity::Periodic
        } else {
            Parity::Antiperiodic
        }
    }
}

impl std::ops::Mul<i64> for HalfInt {
    type Output = HalfInt;
    fn mul(self, rhs: i64) -> HalfInt {
        HalfInt(self.0 * rhs)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        match HalfInt::nearest(x) {
            Some(h) if (h.value() - x).abs() < 1e-12 => Ok(h),
            _ => Err(serde::de::Error::custom(format!("{x} is not a half-integer"))),
        }
    }
}

/// Uniformly sampled complex loop with a parity flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LoopRepr", into = "LoopRepr")]
pub struct Loop {
    samples: Vec<Complex64>,
    parity: Parity,
}

/// On-disk form: `{parity, n, re, im}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LoopRepr {
    parity: Parity,
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<LoopRepr> for Loop {
    type Error = Error;

    fn try_from(r: LoopRepr) -> Result<Self> {
        if r.re.len() != r.n || r.im.len() != r.n {
            return Err(Error::Shape(format!(
                "declared n = {} but re/im have {}/{} entries",
                r.n,
                r.re.len(),
                r.im.len()
            )));
        }
        let samples = r.re.into_iter().zip(r.im).map(|(a, b)| Complex64::new(a, b)).collect();
        Loop::new(samples, r.parity)
    }
}

impl From<Loop> for LoopRepr {
    fn from(l: Loop) -> Self {
        LoopRepr {
            parity: l.parity,
            n: l.samples.len(),
            re: l.samples.iter().map(|z| z.re).collect(),
            im: l.samples.iter().map(|z| z.im).collect(),
        }
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < MIN_NODES || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "loop needs an even number of at least {MIN_NODES} samples, got {n}"
        )));
    }
    Ok(())
}

impl Loop {
    pub fn new(samples: Vec<Complex64>, parity: Parity) -> Result<Self> {
        check_len(samples.len())?;
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        Ok(Loop { samples, parity })
    }

    /// Samples `f(tau_j)` at `tau_j = j/n`.
    pub fn from_fn<F>(n: usize, parity: Parity, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Complex64,
    {
        check_len(n)?;
        Loop::new((0..n).map(|j| f(j as f64 / n as f64)).collect(), parity)
    }

    /// Builds a loop of the same shape without validation; used for results
    /// of linear operations on already valid loops.
    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> Loop {
        debug_assert_eq!(samples.len(), self.samples.len());
        Loop {
            samples,
            parity: self.parity,
        }
    }

    pub(crate) fn from_parts(samples: Vec<Complex64>, parity: Parity) -> Loop {
        Loop { samples, parity }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Node parameter `tau_j`.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.samples.len() as f64
    }

    pub fn same_shape(&self, other: &Loop) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "loops have {} and {} nodes",
                self.len(),
                other.len()
            )));
        }
        if self.parity != other.parity {
            return Err(Error::Shape(format!(
                "loops have parities {} and {}",
                self.parity, other.parity
            )));
        }
        Ok(())
    }

    /// Real L2 inner product `int_0^1 Re(a conj(b)) dtau` by the node rule.
    pub fn l2_inner(&self, other: &Loop) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.dot(other))
    }

    pub(crate) fn dot(&self, other: &Loop) -> f64 {
        let s: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        s / self.len() as f64
    }

    /// `||z||^2`.
    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    /// First derivative in tau.
    pub fn spectral_derivative(&self) -> Loop {
        self.derivative(1)
    }

    pub fn derivative(&self, order: u32) -> Loop {
        self.with_samples(spectral::derivative(&self.samples, self.parity, order))
    }

    /// Total increment of `arg z` over one period divided by `2 pi`.
    pub fn winding_number(&self) -> Result<HalfInt> {
        let scale = self.max_abs();
        let tol = WINDING_TOLERANCE * scale;
        if let Some(node) = self.samples.iter().position(|z| z.norm() <= tol) {
            return Err(Error::WindingUndefined { node, tolerance: tol });
        }
        let n = self.len();
        let sign = self.parity.monodromy();
        let mut total = 0.0;
        for j in 0..n {
            let next = if j + 1 < n {
                self.samples[j + 1]
            } else {
                self.samples[0] * sign
            };
            total += (next * self.samples[j].conj()).arg();
        }
        Ok(HalfInt::nearest(total / (2.0 * PI)).expect("finite samples"))
    }

    /// The involution `z -> -z`.
    pub fn apply_involution(&self) -> Loop {
        self.with_samples(self.samples.iter().map(|z| -z).collect())
    }

    /// `Delta(z)(t) = z(2t)`, turning a twisted loop into a periodic one.
    pub fn double_twisted(&self) -> Result<Loop> {
        if self.parity != Parity::Antiperiodic {
            return Err(Error::Parity("doubling map needs an antiperiodic loop".into()));
        }
        let n = self.len();
        let samples = (0..n)
            .map(|j| {
                let k = 2 * j;
                if k < n {
                    self.samples[k]
                } else {
                    -self.samples[k - n]
                }
            })
            .collect();
        Ok(Loop::from_parts(samples, Parity::Periodic))
    }

    /// Band-limited spectral interpolation onto `m` nodes.
    pub fn resample(&self, m: usize) -> Result<Loop> {
        check_len(m)?;
        let n = self.len();
        let c = spectral::coefficients(&self.samples, self.parity);
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        let half_m = (m / 2) as i64;
        let slot = |k: i64| if k >= 0 { k as usize } else { (m as i64 + k) as usize };
        for (idx, ck) in c.iter().enumerate() {
            let k = spectral::wavenumber(idx, n);
            match self.parity {
                Parity::Periodic if spectral::is_nyquist(idx, n, self.parity) && m > n => {
                    // the sampled Nyquist mode is a cosine; split it symmetrically
                    out[n / 2] += ck * 0.5;
                    out[m - n / 2] += ck * 0.5;
                }
                Parity::Periodic if k.abs() < half_m => out[slot(k)] += ck,
                Parity::Periodic if k.abs() == half_m => out[half_m as usize] += ck,
                Parity::Periodic => {}
                Parity::Antiperiodic if k >= -half_m && k < half_m => out[slot(k)] += ck,
                Parity::Antiperiodic => {}
            }
        }
        Ok(Loop::from_parts(spectral::synthesize(&out, self.parity), self.parity))
    }

    /// Continuous spectral interpolant of the samples.
    pub fn interpolant(&self) -> Interpolant {
        Interpolant {
            coeffs: spectral::coefficients(&self.samples, self.parity),
            parity: self.parity,
        }
    }

    // Real vector-space view used by the solver: [re_0, im_0, re_1, ...].
    pub(crate) fn to_real(&self) -> Vec<f64> {
        self.samples.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub(crate) fn from_real(v: &[f64], parity: Parity) -> Loop {
        let samples = v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        Loop::from_parts(samples, parity)
    }

    pub fn scaled(&self, a: f64) -> Loop {
        self.with_samples(self.samples.iter().map(|z| z * a).collect())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Loop) -> Loop {
        self.with_samples(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| x + y * a)
                .collect(),
        )
    }

    pub fn sup_norm(&self) -> f64 {
        self.max_abs()
    }
}

/// Evaluates a loop's Fourier series at arbitrary parameters.
#[derive(Debug, Clone)]
pub struct Interpolant {
    coeffs: Vec<Complex64>,
    parity: Parity,
}

impl Interpolant {
    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// `d^order z / dtau^order` at `tau`.
    pub fn eval_derivative(&self, tau: f64, order: u32) -> Complex64 {
        let n = self.coeffs.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, ck) in self.coeffs.iter().enumerate() {
            if spectral::is_nyquist(idx, n, self.parity) {
                if order == 0 {
                    acc += ck * (PI * n as f64 * tau).cos();
                }
                continue;
            }
            let omega = 2.0 * PI * spectral::frequency(idx, n, self.parity);
            let phase = Complex64::from_polar(1.0, omega * tau);
            let factor = Complex64::new(0.0, omega).powu(order);
            acc += ck * factor * phase;
        }
        acc
    }

    pub fn eval(&self, tau: f64) -> Complex64 {
        self.eval_derivative(tau, 0)
    }

    /// `(z, z', z'')` at `tau` in a single pass.
    pub fn eval_jet(&self, tau: f64) -> [Complex64; 3] {
        let n = self.coeffs.len();
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (idx, ck) in self.coeffs.iter().enumerate() {
            if spectral::is_nyquist(idx, n, self.parity) {
                out[0] += ck * (PI * n as f64 * tau).cos();
                continue;
            }
            let omega = 2.0 * PI * spectral::frequency(idx, n, self.parity);
            let v = ck * Complex64::from_polar(1.0, omega * tau);
            out[0] += v;
            out[1] += v * Complex64::new(0.0, omega);
            out[2] += v * (-omega * omega);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn expi(x: f64) -> Complex64 {
        Complex64::from_polar(1.0, x)
    }

    #[test]
    fn make_loop_examples() {
        let one = Loop::from_fn(16, Parity::Periodic, |_| c(1.0, 0.0)).unwrap();
        assert!(one.samples().iter().all(|z| *z == c(1.0, 0.0)));
        let tw = Loop::from_fn(16, Parity::Antiperiodic, |t| expi(PI * t)).unwrap();
        assert_eq!(tw.parity(), Parity::Antiperiodic);
        assert!(matches!(
            Loop::new(vec![c(1.0, 0.0); 7], Parity::Periodic),
            Err(Error::InvalidInput(_))
        ));
        assert!(Loop::new(vec![c(1.0, 0.0); 6], Parity::Periodic).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let one = Loop::from_fn(16, Parity::Periodic, |_| c(1.0, 0.0)).unwrap();
        let e = Loop::from_fn(16, Parity::Periodic, |t| expi(2.0 * PI * t)).unwrap();
        assert!((one.l2_inner(&one).unwrap() - 1.0).abs() < 1e-15);
        assert!(e.l2_inner(&one).unwrap().abs() < 1e-15);
        assert!((e.l2_inner(&e).unwrap() - 1.0).abs() < 1e-15);
        let tw = Loop::from_fn(16, Parity::Antiperiodic, |t| expi(PI * t)).unwrap();
        assert!(matches!(tw.l2_inner(&e), Err(Error::Shape(_))));
        let short = Loop::from_fn(8, Parity::Periodic, |_| c(1.0, 0.0)).unwrap();
        assert!(matches!(short.l2_inner(&one), Err(Error::Shape(_))));
    }

    #[test]
    fn derivative_examples() {
        let n = 32;
        let e = Loop::from_fn(n, Parity::Periodic, |t| expi(2.0 * PI * t)).unwrap();
        let de = e.spectral_derivative();
        for (j, d) in de.samples().iter().enumerate() {
            let want = c(0.0, 2.0 * PI) * expi(2.0 * PI * e.node(j));
            assert!((d - want).norm() < 1e-12);
        }
        let one = Loop::from_fn(n, Parity::Periodic, |_| c(1.0, 0.0)).unwrap();
        assert!(one.spectral_derivative().samples().iter().all(|z| z.norm() == 0.0));
        let tw = Loop::from_fn(n, Parity::Antiperiodic, |t| expi(PI * t)).unwrap();
        let dtw = tw.spectral_derivative();
        assert_eq!(dtw.parity(), Parity::Antiperiodic);
        for (j, d) in dtw.samples().iter().enumerate() {
            let want = c(0.0, PI) * expi(PI * tw.node(j));
            assert!((d - want).norm() < 1e-12);
        }
    }

    #[test]
    fn winding_examples() {
        let e3 = Loop::from_fn(32, Parity::Periodic, |t| expi(6.0 * PI * t)).unwrap();
        assert_eq!(e3.winding_number().unwrap(), HalfInt::from_int(3));
        let tw = Loop::from_fn(16, Parity::Antiperiodic, |t| expi(PI * t)).unwrap();
        assert_eq!(tw.winding_number().unwrap(), HalfInt::from_twice(1));
        let one = Loop::from_fn(16, Parity::Periodic, |_| c(1.0, 0.0)).unwrap();
        assert_eq!(one.winding_number().unwrap(), HalfInt::from_int(0));
        let through_zero = Loop::from_fn(16, Parity::Antiperiodic, |t| c((PI * t).cos(), 0.0)).unwrap();
        assert!(matches!(
            through_zero.winding_number(),
            Err(Error::WindingUndefined { node: 8, .. })
        ));
    }

    #[test]
    fn involution_examples() {
        let one = Loop::from_fn(16, Parity::Periodic, |_| c(1.0, 0.0)).unwrap();
        assert!(one.apply_involution().samples().iter().all(|z| *z == c(-1.0, 0.0)));
        let z = Loop::from_fn(16, Parity::Antiperiodic, |t| expi(PI * t) * (1.0 + 0.3 * t)).unwrap();
        assert_eq!(z.apply_involution().apply_involution(), z);
        let w = Loop::from_fn(16, Parity::Antiperiodic, |t| expi(3.0 * PI * t)).unwrap();
        assert_eq!(
            w.winding_number().unwrap(),
            w.apply_involution().winding_number().unwrap()
        );
    }

    #[test]
    fn doubling_examples() {
        let n = 32;
        let tw = Loop::from_fn(n, Parity::Antiperiodic, |t| expi(PI * t)).unwrap();
        let d = tw.double_twisted().unwrap();
        assert_eq!(d.parity(), Parity::Periodic);
        for (j, s) in d.samples().iter().enumerate() {
            assert!((s - expi(2.0 * PI * d.node(j))).norm() < 1e-14);
        }
        assert_eq!(d.winding_number().unwrap(), HalfInt::from_int(1));
        let a = 0.7;
        let cosine = Loop::from_fn(n, Parity::Antiperiodic, |t| c(a * (PI * t).cos(), 0.0)).unwrap();
        let dc = cosine.double_twisted().unwrap();
        for (j, s) in dc.samples().iter().enumerate() {
            assert!((s.re - a * (2.0 * PI * dc.node(j)).cos()).abs() < 1e-14);
        }
        assert!(matches!(d.double_twisted(), Err(Error::Parity(_))));
    }

    #[test]
    fn resample_examples() {
        let n = 16;
        let e = Loop::from_fn(n, Parity::Periodic, |t| expi(2.0 * PI * t)).unwrap();
        let back = e.resample(2 * n).unwrap().resample(n).unwrap();
        for (a, b) in back.samples().iter().zip(e.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        let k = Loop::from_fn(n, Parity::Periodic, |_| c(0.3, -0.2)).unwrap();
        for m in [8, 24, 64] {
            let r = k.resample(m).unwrap();
            assert!(r.samples().iter().all(|z| (z - c(0.3, -0.2)).norm() < 1e-14));
        }
        assert!(matches!(e.resample(33), Err(Error::InvalidInput(_))));
        let tw = Loop::from_fn(n, Parity::Antiperiodic, |t| expi(PI * t) + 0.2 * expi(-3.0 * PI * t)).unwrap();
        let up = tw.resample(48).unwrap();
        for (j, s) in up.samples().iter().enumerate() {
            let t = up.node(j);
            assert!((s - (expi(PI * t) + 0.2 * expi(-3.0 * PI * t))).norm() < 1e-13);
        }
    }

    #[test]
    fn interpolant_reproduces_nodes_and_derivatives() {
        let n = 16;
        let z = Loop::from_fn(n, Parity::Antiperiodic, |t| {
            expi(PI * t) * 0.5 + c(0.1, 0.0) * expi(-PI * t)
        })
        .unwrap();
        let ip = z.interpolant();
        for (j, s) in z.samples().iter().enumerate() {
            assert!((ip.eval(z.node(j)) - s).norm() < 1e-14);
        }
        let dz = z.spectral_derivative();
        let tau = 0.37;
        let jet = ip.eval_jet(tau);
        assert!((jet[1] - dz.interpolant().eval(tau)).norm() < 1e-12);
        assert!((jet[2] - ip.eval_derivative(tau, 2)).norm() < 1e-12);
        // antiperiodic extension
        assert!((ip.eval(tau + 1.0) + ip.eval(tau)).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let z = Loop::from_fn(8, Parity::Antiperiodic, |t| expi(PI * t)).unwrap();
        let s = serde_json::to_string(&z).unwrap();
        assert!(s.contains("\"parity\":\"antiperiodic\"") && s.contains("\"n\":8"));
        let back: Loop = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
        let bad = r#"{"parity":"periodic","n":8,"re":[1,2],"im":[0,0]}"#;
        assert!(serde_json::from_str::<Loop>(bad).is_err());
    }

    #[test]
    fn half_int_display() {
        assert_eq!(HalfInt::from_twice(1).to_string(), "1/2");
        assert_eq!(HalfInt::from_twice(-3).to_string(), "-3/2");
        assert_eq!(HalfInt::from_int(2).to_string(), "2");
        assert_eq!(HalfInt::from_twice(3).parity(), Parity::Antiperiodic);
    }
}
