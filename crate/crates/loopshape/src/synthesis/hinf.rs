//! H-infinity norm by gamma bisection on the Hamiltonian test matrix.
//!
//! gamma exceeds the norm exactly when the test Hamiltonian has no
//! imaginary-axis eigenvalues, so bisecting between a frequency-sweep lower
//! bound and a doubled upper bound pins the norm to relative accuracy 1e-6.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::log_grid;
use crate::lti::poly::{balance_in_place, complex_eigenvalues};
use crate::lti::StateSpace;

/// Relative accuracy of the bisection.
const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HinfNorm {
    Finite(f64),
    /// The A matrix is not Hurwitz; the supremum over the axis is unbounded.
    Infinite,
}

impl HinfNorm {
    pub fn finite(&self) -> Option<f64> {
        match self {
            HinfNorm::Finite(v) => Some(*v),
            HinfNorm::Infinite => None,
        }
    }
}

fn sigma_max_complex(m: &DMatrix<Complex64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn sigma_max_real(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Largest singular value of the response at one frequency.
pub fn sigma_at(sys: &StateSpace, omega: f64) -> Result<f64> {
    let g = sys.response_at(Complex64::new(0.0, omega))?;
    Ok(sigma_max_complex(&g))
}

fn has_axis_eigenvalue(sys: &StateSpace, gamma: f64) -> Result<bool> {
    let n = sys.n_states();
    let m = sys.n_inputs();
    let p = sys.n_outputs();
    let dt_d = sys.d.transpose() * &sys.d;
    let mut r = DMatrix::<f64>::identity(m, m) * gamma * gamma;
    r -= &dt_d;
    let r_inv = r
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Eigen("gamma^2 I - D'D singular in norm test".into()))?;
    let a_bar = &sys.a + &sys.b * &r_inv * sys.d.transpose() * &sys.c;
    let m12 = &sys.b * &r_inv * sys.b.transpose();
    let inner = DMatrix::<f64>::identity(p, p) + &sys.d * &r_inv * sys.d.transpose();
    let m21 = -(sys.c.transpose() * inner * &sys.c);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_bar);
    h.view_mut((0, n), (n, n)).copy_from(&m12);
    h.view_mut((n, 0), (n, n)).copy_from(&m21);
    h.view_mut((n, n), (n, n)).copy_from(&(-a_bar.transpose()));
    balance_in_place(&mut h);
    let eigs = complex_eigenvalues(&h)?;
    Ok(eigs.iter().any(|e| e.re.abs() < 1e-8 * (1.0 + e.norm())))
}

/// H-infinity norm of a (possibly MIMO) state-space system.
pub fn hinf_norm(sys: &StateSpace) -> Result<HinfNorm> {
    if sys.n_states() == 0 {
        return Ok(HinfNorm::Finite(sigma_max_real(&sys.d)));
    }
    let eigs = sys.eigenvalues()?;
    if eigs.iter().any(|e| e.re >= -1e-12 * (1.0 + e.norm())) {
        return Ok(HinfNorm::Infinite);
    }

    // Lower bound from a frequency sweep anchored on the pole magnitudes.
    let rho_max = eigs.iter().map(|e| e.norm()).fold(1e-6f64, f64::max);
    let rho_min = eigs
        .iter()
        .map(|e| e.norm())
        .fold(f64::INFINITY, f64::min)
        .max(1e-6);
    let lo_w = (rho_min * 1e-3).max(1e-9);
    let hi_w = rho_max * 1e3;
    let mut lower = sigma_max_real(&sys.d).max(sigma_at(sys, 0.0)?);
    for w in log_grid(lo_w, hi_w, 200) {
        lower = lower.max(sigma_at(sys, w)?);
    }
    if lower < 1e-300 {
        return Ok(HinfNorm::Finite(0.0));
    }

    let mut lb = lower;
    let mut ub = lower * (1.0 + 1e-3);
    let mut grow = 0;
    while has_axis_eigenvalue(sys, ub)? {
        ub *= 2.0;
        grow += 1;
        if grow > 80 {
            return Err(Error::Eigen("H-infinity bisection failed to bracket".into()));
        }
    }
    while ub - lb > 0.5 * REL_TOL * ub {
        let mid = 0.5 * (lb + ub);
        if has_axis_eigenvalue(sys, mid)? {
            lb = mid;
        } else {
            ub = mid;
        }
    }
    Ok(HinfNorm::Finite(ub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{tf_to_ss, TransferFunction};

    fn tf(num: &[f64], den: &[f64]) -> StateSpace {
        tf_to_ss(&TransferFunction::from_coeffs(num.to_vec(), den.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn first_order_norm_is_one() {
        let n = hinf_norm(&tf(&[1.0], &[1.0, 1.0])).unwrap().finite().unwrap();
        assert!((n - 1.0).abs() < 2e-6);
    }

    #[test]
    fn static_gain_norm() {
        let sys = StateSpace::from_static_gain(1, 1, &[2.0]).unwrap();
        assert_eq!(hinf_norm(&sys).unwrap(), HinfNorm::Finite(2.0));
    }

    #[test]
    fn resonant_peak_formula() {
        // 1/(s^2 + 0.2 s + 1): zeta = 0.1, peak 1/(2 zeta sqrt(1-zeta^2)).
        let n = hinf_norm(&tf(&[1.0], &[1.0, 0.2, 1.0]))
            .unwrap()
            .finite()
            .unwrap();
        let want = 1.0 / (2.0 * 0.1 * (1.0f64 - 0.01).sqrt());
        assert!((n - want).abs() < 1e-4 * want, "{n} vs {want}");
    }

    #[test]
    fn unstable_system_reports_infinite() {
        assert_eq!(hinf_norm(&tf(&[1.0], &[1.0, -1.0])).unwrap(), HinfNorm::Infinite);
    }
}
