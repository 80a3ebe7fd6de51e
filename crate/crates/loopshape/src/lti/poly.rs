//! Real-coefficient polynomials in the Laplace variable.
//!
//! Coefficients are stored highest degree first. Construction trims leading
//! coefficients that are negligibly small relative to the largest one, so a
//! nonzero polynomial always has a nonzero leading coefficient.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative threshold below which a leading coefficient is treated as zero.
const TRIM_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    /// Highest degree first. Empty means the zero polynomial.
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from highest-first coefficients, trimming
    /// negligible leading terms.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut c = coeffs;
        if scale == 0.0 || !scale.is_finite() {
            c.retain(|x| !x.is_finite());
            if c.is_empty() {
                return Self { coeffs: Vec::new() };
            }
            // Keep non-finite input visible rather than masking it.
            return Self { coeffs: c };
        }
        let mut start = 0;
        while start < c.len() && c[start].abs() <= TRIM_REL * scale {
            start += 1;
        }
        Self {
            coeffs: c.split_off(start),
        }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(vec![value])
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Highest-first coefficients. Empty slice for the zero polynomial.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.first().unwrap_or(&0.0)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Magnitude scale of the polynomial at |s| = r, used for relative
    /// smallness tests: sum of |c_i| r^i.
    pub fn scale_at(&self, r: f64) -> f64 {
        let deg = self.degree();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * r.powi((deg - i) as i32))
            .sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[n - self.coeffs.len() + i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            out[n - other.coeffs.len() + i] += c;
        }
        Self::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Substitutes s -> -s (flips the sign of odd-degree coefficients).
    pub fn flip_s(&self) -> Self {
        let deg = self.degree();
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| if (deg - i) % 2 == 1 { -c } else { c })
                .collect(),
        )
    }

    /// Monic version together with the leading coefficient that was divided
    /// out. Errors on the zero polynomial.
    pub fn monic(&self) -> Result<(Self, f64)> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let lead = self.leading();
        Ok((self.scale(1.0 / lead), lead))
    }

    /// Roots via balanced companion-matrix eigenvalues.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() || self.degree() == 0 {
            return Ok(Vec::new());
        }
        let (monic, _) = self.monic()?;
        let n = monic.degree();
        if n == 1 {
            return Ok(vec![Complex64::new(-monic.coeffs[1], 0.0)]);
        }
        if n == 2 {
            let (b, c) = (monic.coeffs[1], monic.coeffs[2]);
            let disc = b * b - 4.0 * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // Numerically stable real quadratic roots.
                let q = -0.5 * (b + b.signum() * sq);
                let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q, c / q) };
                return Ok(vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]);
            }
            let re = -b / 2.0;
            let im = (-disc).sqrt() / 2.0;
            return Ok(vec![Complex64::new(re, im), Complex64::new(re, -im)]);
        }
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -monic.coeffs[n - i];
        }
        balance_in_place(&mut comp);
        complex_eigenvalues(&comp)
    }

    /// Reconstructs a real polynomial `gain * prod (s - r_i)` from a root
    /// set. Roots with nontrivial imaginary parts are paired with their
    /// nearest conjugates so the coefficients stay real.
    pub fn from_roots(roots: &[Complex64], gain: f64) -> Self {
        let mut remaining: Vec<Complex64> = roots.to_vec();
        let mut poly = Polynomial::constant(gain);
        while let Some(r) = remaining.pop() {
            let imag_tol = 1e-9 * (1.0 + r.norm());
            if r.im.abs() <= imag_tol {
                poly = poly.mul(&Polynomial::new(vec![1.0, -r.re]));
            } else {
                // Find and consume the conjugate partner.
                let conj = r.conj();
                let mut best = None;
                let mut best_d = f64::INFINITY;
                for (i, c) in remaining.iter().enumerate() {
                    let d = (c - conj).norm();
                    if d < best_d {
                        best_d = d;
                        best = Some(i);
                    }
                }
                let (re, norm_sq) = match best {
                    Some(i) if best_d <= 1e-6 * (1.0 + r.norm()) => {
                        let partner = remaining.remove(i);
                        let re = 0.5 * (r.re + partner.re);
                        (re, (r.norm() * partner.norm()).max(0.0))
                    }
                    _ => (r.re, r.norm_sqr()),
                };
                poly = poly.mul(&Polynomial::new(vec![1.0, -2.0 * re, norm_sq]));
            }
        }
        poly
    }
}

impl std::fmt::Display for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let deg = self.degree();
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 && deg > 0 {
                continue;
            }
            let p = deg - i;
            if first {
                first = false;
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if c < 0.0 { " - " } else { " + " })?;
            }
            let a = c.abs();
            match p {
                0 => write!(f, "{a}")?,
                1 => {
                    if a != 1.0 {
                        write!(f, "{a}")?;
                    }
                    write!(f, "s")?;
                }
                _ => {
                    if a != 1.0 {
                        write!(f, "{a}")?;
                    }
                    write!(f, "s^{p}")?;
                }
            }
        }
        Ok(())
    }
}

/// Parlett-Reinsch balancing: scales rows/columns by powers of two to bring
/// row and column norms close, improving eigenvalue accuracy for companion
/// and Hamiltonian matrices.
pub(crate) fn balance_in_place(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    if n < 2 {
        return;
    }
    let radix: f64 = 2.0;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c: f64 = 0.0;
            let mut r: f64 = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let mut cc = c;
            let s = c + r;
            while cc < r / radix {
                f *= radix;
                cc *= radix * radix;
            }
            while cc > r * radix {
                f /= radix;
                cc /= radix * radix;
            }
            if (c * f + r / f) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Complex eigenvalues of a real square matrix via the real Schur form.
pub(crate) fn complex_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(1.0e-15, 0)
        .ok_or_else(|| Error::Eigen(format!("Schur iteration failed on {n}x{n} matrix")))?;
    let eigs = schur.complex_eigenvalues();
    Ok(eigs.iter().map(|e| Complex64::new(e.re, e.im)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn trims_leading_junk() {
        let p = Polynomial::new(vec![1e-18, 1.0, 2.0]);
        assert_eq!(p.degree(), 1);
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
    }

    #[test]
    fn arithmetic_identities() {
        let a = Polynomial::new(vec![1.0, 2.0, 3.0]);
        let b = Polynomial::new(vec![2.0, -1.0]);
        let prod = a.mul(&b);
        assert_eq!(prod.coeffs(), &[2.0, 3.0, 4.0, -3.0]);
        let sum = a.add(&b);
        assert_eq!(sum.coeffs(), &[1.0, 4.0, 2.0]);
        assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn eval_horner() {
        let p = Polynomial::new(vec![1.0, -2.0, 1.0]); // (s-1)^2
        let v = p.eval(Complex64::new(3.0, 0.0));
        assert!((v.re - 4.0).abs() < 1e-14);
    }

    #[test]
    fn flip_s_matches_substitution() {
        let p = Polynomial::new(vec![2.0, 3.0, -4.0, 5.0]); // 2s^3+3s^2-4s+5
        let q = p.flip_s();
        let s = Complex64::new(0.7, 1.3);
        let lhs = q.eval(s);
        let rhs = p.eval(-s);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn quadratic_roots_exact() {
        // s^2 + 20 s + 7933 -> -10 +/- j*sqrt(7833)
        let p = Polynomial::new(vec![1.0, 20.0, 7933.0]);
        let r = sorted_re(p.roots().unwrap());
        let im = 7833f64.sqrt();
        assert!((r[0].re + 10.0).abs() < 1e-12);
        assert!((r[0].im.abs() - im).abs() < 1e-9);
    }

    #[test]
    fn companion_roots_residual() {
        let roots = [
            Complex64::new(-121.0, 0.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(-10.0, 7833f64.sqrt()),
            Complex64::new(-10.0, -7833f64.sqrt()),
        ];
        let p = Polynomial::from_roots(&roots, 1.0);
        let found = p.roots().unwrap();
        for r in &found {
            let scale = p.scale_at(r.norm().max(1.0));
            assert!(p.eval(*r).norm() < 1e-6 * scale, "residual too large at {r}");
        }
        // Each printed root recovered to 1e-6 relative.
        for want in &roots {
            let hit = found.iter().any(|g| (g - want).norm() < 1e-6 * want.norm());
            assert!(hit, "missing root {want}");
        }
    }

    #[test]
    fn from_roots_pairs_conjugates() {
        let roots = [Complex64::new(-1.0, 2.0), Complex64::new(-1.0, -2.0)];
        let p = Polynomial::from_roots(&roots, 3.0);
        assert_eq!(p.degree(), 2);
        assert!((p.coeffs()[0] - 3.0).abs() < 1e-14);
        assert!((p.coeffs()[1] - 6.0).abs() < 1e-12);
        assert!((p.coeffs()[2] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn display_factored_terms() {
        let p = Polynomial::new(vec![1.0, 20.0, 7933.0]);
        assert_eq!(format!("{p}"), "s^2 + 20s + 7933");
    }
}
