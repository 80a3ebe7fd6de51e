//! SISO rational transfer functions.
//!
//! Stored in canonical form with a monic denominator. Pole/zero pairs are
//! cancelled only when they agree within a strict relative tolerance, so a
//! right-half-plane pair never disappears silently.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// Cancellation tolerance: a pole/zero pair is removed only when
/// |p - z| < CANCEL_TOL * max(1, |p|).
const CANCEL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
}

/// One frequency-response sample. `at_pole` marks evaluation points that sit
/// numerically on a denominator root; the value there is not meaningful.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FreqSample {
    pub omega: f64,
    pub re: f64,
    pub im: f64,
    pub at_pole: bool,
}

impl FreqSample {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn mag(&self) -> f64 {
        self.value().norm()
    }

    pub fn mag_db(&self) -> f64 {
        20.0 * self.mag().log10()
    }

    pub fn phase_deg(&self) -> f64 {
        self.value().arg().to_degrees()
    }
}

impl TransferFunction {
    /// Builds a canonical (monic-denominator) transfer function.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let (den_monic, lead) = den.monic()?;
        Ok(Self {
            num: num.scale(1.0 / lead),
            den: den_monic,
        })
    }

    pub fn from_coeffs(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        Self::new(Polynomial::new(num), Polynomial::new(den))
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        Self {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// deg(num) <= deg(den); the zero polynomial counts as proper.
    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.den.eval(s)
    }

    pub fn dc_gain(&self) -> f64 {
        let v = self.eval(Complex64::new(0.0, 0.0));
        v.re
    }

    /// Limit of the response as |s| -> infinity along the imaginary axis.
    /// `None` encodes an unbounded (improper) limit.
    pub fn gain_at_infinity(&self) -> Option<f64> {
        if self.num.is_zero() {
            return Some(0.0);
        }
        match self.num.degree().cmp(&self.den.degree()) {
            std::cmp::Ordering::Less => Some(0.0),
            std::cmp::Ordering::Equal => Some(self.num.leading() / self.den.leading()),
            std::cmp::Ordering::Greater => None,
        }
    }

    /// Evaluates the response on a frequency grid; points that land on a
    /// denominator root are flagged instead of silently returning infinity.
    pub fn freq_response(&self, omegas: &[f64]) -> Vec<FreqSample> {
        omegas
            .iter()
            .map(|&w| {
                let s = Complex64::new(0.0, w);
                let dv = self.den.eval(s);
                let at_pole = dv.norm() <= 1e-9 * self.den.scale_at(w.abs().max(1e-300));
                let v = if at_pole {
                    Complex64::new(f64::INFINITY, 0.0)
                } else {
                    self.num.eval(s) / dv
                };
                FreqSample {
                    omega: w,
                    re: v.re,
                    im: v.im,
                    at_pole,
                }
            })
            .collect()
    }

    /// Magnitude at one frequency; infinite when on a pole.
    pub fn mag_at(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        let dv = self.den.eval(s);
        if dv.norm() <= 1e-9 * self.den.scale_at(omega.abs().max(1e-300)) {
            f64::INFINITY
        } else {
            (self.num.eval(s) / dv).norm()
        }
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        self.num.roots()
    }

    /// Strict Hurwitz test on the stored denominator.
    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.poles()?.iter().all(|p| p.re < 0.0))
    }

    /// Series interconnection g2(g1(.)): product of responses.
    pub fn series(&self, other: &Self) -> Result<Self> {
        Self::new(self.num.mul(&other.num), self.den.mul(&other.den)).map(|g| g.simplified())
    }

    /// Unity negative feedback g/(1+g).
    pub fn feedback_unity(&self) -> Result<Self> {
        let den = self.den.add(&self.num);
        if den.is_zero() {
            return Err(Error::Degenerate(
                "1 + g is identically zero; feedback loop is singular".into(),
            ));
        }
        Self::new(self.num.clone(), den).map(|g| g.simplified())
    }

    /// Pointwise sum (n1 d2 + n2 d1)/(d1 d2).
    pub fn add(&self, other: &Self) -> Result<Self> {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        Self::new(num, self.den.mul(&other.den))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// Substitutes s -> -s in both polynomials.
    pub fn flip_s(&self) -> Self {
        // Denominator may lose monicity by a sign; renormalize.
        Self::new(self.num.flip_s(), self.den.flip_s()).expect("flip keeps den nonzero")
    }

    /// Cancels pole/zero pairs that coincide within the strict relative
    /// tolerance. Falls back to the uncancelled form if root finding fails.
    pub fn simplified(&self) -> Self {
        if self.num.is_zero() || self.num.degree() == 0 || self.den.degree() == 0 {
            return self.clone();
        }
        let (zeros, poles) = match (self.num.roots(), self.den.roots()) {
            (Ok(z), Ok(p)) => (z, p),
            _ => return self.clone(),
        };
        let mut keep_z: Vec<Complex64> = Vec::new();
        let mut rem_p = poles;
        let mut cancelled = false;
        for z in zeros {
            let mut matched = None;
            let mut best = f64::INFINITY;
            for (i, p) in rem_p.iter().enumerate() {
                let d = (p - z).norm();
                if d < best {
                    best = d;
                    matched = Some(i);
                }
            }
            match matched {
                Some(i) if best < CANCEL_TOL * rem_p[i].norm().max(1.0) => {
                    rem_p.remove(i);
                    cancelled = true;
                }
                _ => keep_z.push(z),
            }
        }
        if !cancelled {
            return self.clone();
        }
        let gain = self.num.leading(); // den is monic
        let num = Polynomial::from_roots(&keep_z, gain);
        let den = Polynomial::from_roots(&rem_p, 1.0);
        Self::new(num, den).unwrap_or_else(|_| self.clone())
    }
}

impl std::fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

/// Series interconnection of two transfer functions.
pub fn series(g1: &TransferFunction, g2: &TransferFunction) -> Result<TransferFunction> {
    g1.series(g2)
}

/// Unity negative feedback of a forward path.
pub fn feedback_unity(g: &TransferFunction) -> Result<TransferFunction> {
    g.feedback_unity()
}

/// Magnitude to decibels.
pub fn to_db(mag: f64) -> f64 {
    20.0 * mag.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
        TransferFunction::from_coeffs(num.to_vec(), den.to_vec()).unwrap()
    }

    #[test]
    fn canonical_monic_denominator() {
        let g = tf(&[2.0], &[2.0, 4.0]);
        assert_eq!(g.den().coeffs(), &[1.0, 2.0]);
        assert_eq!(g.num().coeffs(), &[1.0]);
    }

    #[test]
    fn series_constants() {
        let g = series(&TransferFunction::constant(2.0), &TransferFunction::constant(3.0)).unwrap();
        assert!((g.dc_gain() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn feedback_integrator() {
        // k/s -> k/(s+k)
        let g = tf(&[5.0], &[1.0, 0.0]);
        let cl = feedback_unity(&g).unwrap();
        assert_eq!(cl.den().coeffs(), &[1.0, 5.0]);
        assert_eq!(cl.num().coeffs(), &[5.0]);
    }

    #[test]
    fn feedback_unstable_to_integrator() {
        // 1/(s-1) -> 1/s, pole at the origin
        let g = tf(&[1.0], &[1.0, -1.0]);
        let cl = feedback_unity(&g).unwrap();
        assert_eq!(cl.den().coeffs(), &[1.0, 0.0]);
        let poles = cl.poles().unwrap();
        assert_eq!(poles.len(), 1);
        assert!(poles[0].norm() < 1e-12);
    }

    #[test]
    fn feedback_degenerate_rejected() {
        // g = -1 exactly: 1 + g == 0
        let g = TransferFunction::constant(-1.0);
        assert!(feedback_unity(&g).is_err());
    }

    #[test]
    fn freq_response_first_order() {
        let g = tf(&[1.0], &[1.0, 1.0]);
        let r = g.freq_response(&[0.0]);
        assert!((r[0].value() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(!r[0].at_pole);
    }

    #[test]
    fn pole_on_grid_is_flagged() {
        let g = tf(&[1.0], &[1.0, 0.0, 1.0]); // poles at +/- j
        let r = g.freq_response(&[1.0]);
        assert!(r[0].at_pole);
    }

    #[test]
    fn stability_classification() {
        assert!(tf(&[1.0], &[1.0, 1.0]).is_stable().unwrap());
        assert!(!tf(&[1.0], &[1.0, -1.0]).is_stable().unwrap());
    }

    #[test]
    fn db_conversion() {
        assert!((to_db(10.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn cancellation_is_strict() {
        // (s+1)(s+2)/((s+1)(s+3)) cancels the exact pair only.
        let num = Polynomial::new(vec![1.0, 1.0]).mul(&Polynomial::new(vec![1.0, 2.0]));
        let den = Polynomial::new(vec![1.0, 1.0]).mul(&Polynomial::new(vec![1.0, 3.0]));
        let g = TransferFunction::new(num, den).unwrap().simplified();
        assert_eq!(g.num().degree(), 1);
        assert_eq!(g.den().degree(), 1);

        // A near-but-not-equal pair survives.
        let num = Polynomial::new(vec![1.0, 1.0]);
        let den = Polynomial::new(vec![1.0, 1.001]);
        let g = TransferFunction::new(num, den).unwrap().simplified();
        assert_eq!(g.num().degree(), 1);
        assert_eq!(g.den().degree(), 1);
    }
}
