//! State-space realizations and conversions to/from transfer functions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::poly::{balance_in_place, complex_eigenvalues, Polynomial};
use super::tf::TransferFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("A must be square".into()));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for m in [&a, &b, &c, &d] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::Dimension("matrix entries must be finite".into()));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Static (zero-state) system.
    pub fn from_static_gain(rows: usize, cols: usize, gains: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, cols),
            DMatrix::zeros(rows, 0),
            DMatrix::from_row_slice(rows, cols, gains),
        )
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.n_inputs() == 1 && self.n_outputs() == 1
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let mut a = self.a.clone();
        balance_in_place(&mut a);
        complex_eigenvalues(&a)
    }

    /// Strict Hurwitz test on A.
    pub fn is_hurwitz(&self) -> Result<bool> {
        Ok(self.eigenvalues()?.iter().all(|e| e.re < 0.0))
    }

    /// Frequency response matrix C (jwI - A)^-1 B + D.
    pub fn response_at(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.n_states();
        let bz = self.b.map(|x| Complex64::new(x, 0.0));
        let cz = self.c.map(|x| Complex64::new(x, 0.0));
        let dz = self.d.map(|x| Complex64::new(x, 0.0));
        if n == 0 {
            return Ok(dz);
        }
        let mut m = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += s;
        }
        let lu = m.lu();
        let x = lu
            .solve(&bz)
            .ok_or_else(|| Error::Eigen("response evaluation hit a singular sI - A".into()))?;
        Ok(&cz * x + dz)
    }

    /// Series interconnection: the signal passes through `self`, then
    /// through `next`.
    pub fn series(&self, next: &StateSpace) -> Result<StateSpace> {
        if next.n_inputs() != self.n_outputs() {
            return Err(Error::Dimension(
                "series interconnection input/output mismatch".into(),
            ));
        }
        let (n1, n2) = (self.n_states(), next.n_states());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.b * &self.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        let mut b = DMatrix::zeros(n1 + n2, self.n_inputs());
        b.view_mut((0, 0), (n1, self.n_inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.n_inputs()))
            .copy_from(&(&next.b * &self.d));
        let mut c = DMatrix::zeros(next.n_outputs(), n1 + n2);
        c.view_mut((0, 0), (next.n_outputs(), n1))
            .copy_from(&(&next.d * &self.c));
        c.view_mut((0, n1), (next.n_outputs(), n2)).copy_from(&next.c);
        let d = &next.d * &self.d;
        StateSpace::new(a, b, c, d)
    }
}

/// Controllable-canonical realization of a proper transfer function.
pub fn tf_to_ss(g: &TransferFunction) -> Result<StateSpace> {
    if !g.is_proper() {
        return Err(Error::Improper {
            num_deg: g.num().degree(),
            den_deg: g.den().degree(),
        });
    }
    let den = g.den(); // monic by canonical form
    let n = den.degree();
    if n == 0 {
        let gain = if g.num().is_zero() { 0.0 } else { g.num().leading() };
        return StateSpace::from_static_gain(1, 1, &[gain]);
    }
    // Pad numerator to length n+1 (coefficients of s^n .. s^0).
    let mut b_coef = vec![0.0; n + 1];
    for (i, &c) in g.num().coeffs().iter().enumerate() {
        b_coef[n + 1 - g.num().coeffs().len() + i] = c;
    }
    let a_coef = den.coeffs(); // 1, a_{n-1}, ..., a_0
    let direct = b_coef[0];

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        // last row: -a_0 ... -a_{n-1}
        a[(n - 1, j)] = -a_coef[n - j];
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let mut c = DMatrix::zeros(1, n);
    for j in 0..n {
        // b_j - b_n * a_j for the power-j coefficient
        c[(0, j)] = b_coef[n - j] - direct * a_coef[n - j];
    }
    let d = DMatrix::from_element(1, 1, direct);
    StateSpace::new(a, b, c, d)
}

/// Transfer function of a SISO realization, with near-coincident pole/zero
/// pairs cancelled at the standard tolerance.
///
/// The denominator comes from the eigenvalues of A; the numerator is
/// recovered by sampling C(sI-A)^-1 B + D on a circle enclosing the spectrum
/// and inverting the DFT, which keeps the interpolation perfectly
/// conditioned.
pub fn ss_to_tf(sys: &StateSpace) -> Result<TransferFunction> {
    if !sys.is_siso() {
        return Err(Error::NotSiso {
            inputs: sys.n_inputs(),
            outputs: sys.n_outputs(),
        });
    }
    let n = sys.n_states();
    if n == 0 {
        return Ok(TransferFunction::constant(sys.d[(0, 0)]));
    }
    let eigs = sys.eigenvalues()?;
    let den = Polynomial::from_roots(&eigs, 1.0);

    let rho = eigs.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let radius = 2.0 * (1.0 + rho);
    let m = n + 1;
    let mut samples = Vec::with_capacity(m);
    for j in 0..m {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
        let s = Complex64::from_polar(radius, theta);
        let h = sys.response_at(s)?[(0, 0)];
        samples.push(h * den.eval(s));
    }
    // Inverse DFT gives coefficients of num(radius * w) in powers of w.
    let mut coeffs_low_first = Vec::with_capacity(m);
    for k in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in samples.iter().enumerate() {
            let theta = -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64;
            acc += v * Complex64::from_polar(1.0, theta);
        }
        coeffs_low_first.push(acc.re / m as f64 / radius.powi(k as i32));
    }
    coeffs_low_first.reverse();
    let num = Polynomial::new(coeffs_low_first);
    Ok(TransferFunction::new(num, den)?.simplified())
}

/// Matrix exponential via scaling and squaring with a Pade(13) approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("expm needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = a.iter().map(|x| x.abs()).fold(0.0f64, f64::max) * n as f64;
    if !norm.is_finite() {
        return Err(Error::MatrixExp("non-finite matrix".into()));
    }
    let theta13 = 5.37;
    let squarings = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a_scaled = a * 2f64.powi(-squarings);

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a_scaled * &a_scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
        + B[7] * &a6
        + B[5] * &a4
        + B[3] * &a2
        + B[1] * &ident;
    let u = &a_scaled * u_inner;
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &ident;
    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::MatrixExp("Pade denominator is singular".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}
