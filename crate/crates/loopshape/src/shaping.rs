//! Loop-shaping weight machinery: first-order weight templates, the stock
//! frequency bound pair, bound-compliance and roll-off checks, the
//! minimum-phase magnitude fit, and shaped-plant assembly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::log_grid;
use crate::lti::{series, to_db, Polynomial, TransferFunction};

/// Parameters of the two first-order weights K (s+alpha)/(s+beta).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightParams {
    pub k1: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub k2: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl WeightParams {
    pub fn identity() -> Self {
        Self {
            k1: 1.0,
            alpha1: 1.0,
            beta1: 1.0,
            k2: 1.0,
            alpha2: 1.0,
            beta2: 1.0,
        }
    }
}

/// Builds (W1, W2) from the template parameters. Stability needs beta > 0,
/// minimum phase needs alpha > 0, and the gains must be nonzero.
pub fn make_weights(p: &WeightParams) -> Result<(TransferFunction, TransferFunction)> {
    let check = |name: &'static str, v: f64, positive: bool| -> Result<()> {
        if !v.is_finite() {
            return Err(Error::WeightParam {
                name,
                reason: format!("must be finite, got {v}"),
            });
        }
        if positive && v <= 0.0 {
            return Err(Error::WeightParam {
                name,
                reason: format!("must be positive, got {v}"),
            });
        }
        if !positive && v == 0.0 {
            return Err(Error::WeightParam {
                name,
                reason: "must be nonzero".into(),
            });
        }
        Ok(())
    };
    check("k1", p.k1, false)?;
    check("alpha1", p.alpha1, true)?;
    check("beta1", p.beta1, true)?;
    check("k2", p.k2, false)?;
    check("alpha2", p.alpha2, true)?;
    check("beta2", p.beta2, true)?;
    let w1 = TransferFunction::from_coeffs(vec![p.k1, p.k1 * p.alpha1], vec![1.0, p.beta1])?;
    let w2 = TransferFunction::from_coeffs(vec![p.k2, p.k2 * p.alpha2], vec![1.0, p.beta2])?;
    Ok((w1.simplified(), w2.simplified()))
}

/// Lower/upper magnitude bounds with the grid they are checked on.
#[derive(Debug, Clone)]
pub struct FrequencyBounds {
    pub lower: TransferFunction,
    pub upper: TransferFunction,
    pub grid: Vec<f64>,
}

impl FrequencyBounds {
    pub fn new(lower: TransferFunction, upper: TransferFunction, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Config("bounds grid must be nonempty".into()));
        }
        for &w in &grid {
            if upper.mag_at(w) < lower.mag_at(w) {
                return Err(Error::Config(format!(
                    "upper bound falls below lower bound at {w} rad/s"
                )));
            }
        }
        Ok(Self { lower, upper, grid })
    }
}

/// Default bound-check grid: 100 log-spaced points over [0.01, 1e4] rad/s.
pub fn default_bounds_grid() -> Vec<f64> {
    log_grid(1e-2, 1e4, 100)
}

/// The stock loop-gain bound pair
/// s_low  =  3 (s+40)(s+3000) / ((s+0.00001)(s+100)(s+200)(s+1000))
/// s_high = 10 (s+40)(s+3000) / (same denominator).
pub fn reference_bounds() -> FrequencyBounds {
    let zeros = Polynomial::new(vec![1.0, 40.0]).mul(&Polynomial::new(vec![1.0, 3000.0]));
    let den = Polynomial::new(vec![1.0, 0.00001])
        .mul(&Polynomial::new(vec![1.0, 100.0]))
        .mul(&Polynomial::new(vec![1.0, 200.0]))
        .mul(&Polynomial::new(vec![1.0, 1000.0]));
    let lower = TransferFunction::new(zeros.scale(3.0), den.clone()).expect("nonzero den");
    let upper = TransferFunction::new(zeros.scale(10.0), den).expect("nonzero den");
    FrequencyBounds {
        lower,
        upper,
        grid: default_bounds_grid(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundRow {
    pub omega_rad_s: f64,
    pub loop_db: f64,
    pub low_db: f64,
    pub high_db: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub rows: Vec<BoundRow>,
    pub pass: bool,
    /// Fraction of grid points inside the bounds.
    pub pass_fraction: f64,
    /// Worst violation in dB; zero when every point passes.
    pub worst_violation_db: f64,
}

/// Per-frequency compliance of |loop| against the bound pair. Violations
/// are data, not errors.
pub fn check_bounds(loop_tf: &TransferFunction, b: &FrequencyBounds) -> BoundsReport {
    let mut rows = Vec::with_capacity(b.grid.len());
    let mut worst = 0.0f64;
    let mut passed = 0usize;
    for &w in &b.grid {
        let loop_db = to_db(loop_tf.mag_at(w));
        let low_db = to_db(b.lower.mag_at(w));
        let high_db = to_db(b.upper.mag_at(w));
        let pass = loop_db >= low_db && loop_db <= high_db;
        if pass {
            passed += 1;
        } else {
            worst = worst.max((low_db - loop_db).max(loop_db - high_db));
        }
        rows.push(BoundRow {
            omega_rad_s: w,
            loop_db,
            low_db,
            high_db,
            pass,
        });
    }
    let n = rows.len();
    BoundsReport {
        pass: passed == n,
        pass_fraction: passed as f64 / n as f64,
        worst_violation_db: worst,
        rows,
    }
}

/// True when the loop magnitude at `omega` sits at least `reduction_db`
/// below the reference plant magnitude there (with a 1e-9 relative slack so
/// exact-boundary cases pass).
pub fn check_rolloff(
    loop_tf: &TransferFunction,
    plant: &TransferFunction,
    omega: f64,
    reduction_db: f64,
) -> bool {
    let target = plant.mag_at(omega) * 10f64.powf(-reduction_db / 20.0);
    loop_tf.mag_at(omega) <= target * (1.0 + 1e-9)
}

/// Result of the minimum-phase magnitude fit.
#[derive(Debug, Clone)]
pub struct MinPhaseFit {
    pub tf: TransferFunction,
    /// RMS error of the fit in dB over the input samples.
    pub rms_db_error: f64,
}

/// Fits a stable minimum-phase transfer function of the given order to
/// magnitude samples by iteratively reweighted least squares on
/// |W(jw)|^2 = N(w^2)/D(w^2), followed by spectral factorization. Roots
/// that land in the right half plane are reflected, and roots on the axis
/// are nudged just left of it, so the result is strictly minimum phase.
pub fn fit_minimum_phase(samples: &[(f64, f64)], order: usize) -> Result<MinPhaseFit> {
    if samples.len() < 2 * order + 1 {
        return Err(Error::FitInput(format!(
            "need at least {} samples for order {order}, got {}",
            2 * order + 1,
            samples.len()
        )));
    }
    if samples.iter().any(|&(w, m)| !(w > 0.0) || !(m > 0.0) || !m.is_finite()) {
        return Err(Error::FitInput(
            "samples need positive frequencies and positive finite magnitudes".into(),
        ));
    }

    // Normalize frequencies by the geometric mean to condition the solve.
    let log_mean =
        samples.iter().map(|&(w, _)| w.ln()).sum::<f64>() / samples.len() as f64;
    let w0 = log_mean.exp();
    let xs: Vec<f64> = samples.iter().map(|&(w, _)| (w / w0).powi(2)).collect();
    let m2: Vec<f64> = samples.iter().map(|&(_, m)| m * m).collect();

    let n_unknowns = 2 * order + 1; // N has order+1 coefficients, D has order (monic)
    let rows = samples.len();
    let mut d_prev: Vec<f64> = vec![1.0; rows];
    let mut coeffs = vec![0.0; n_unknowns];
    for _iter in 0..30 {
        let mut a = DMatrix::<f64>::zeros(rows, n_unknowns);
        let mut rhs = DMatrix::<f64>::zeros(rows, 1);
        for i in 0..rows {
            let wgt = 1.0 / (m2[i] * d_prev[i].abs().max(1e-300));
            let mut xp = 1.0;
            for k in 0..=order {
                a[(i, k)] = wgt * xp;
                if k < order {
                    a[(i, order + 1 + k)] = -wgt * m2[i] * xp;
                }
                xp *= xs[i];
            }
            rhs[(i, 0)] = wgt * m2[i] * xs[i].powi(order as i32);
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin < 1e-13 * smax {
            return Err(Error::FitRankDeficient);
        }
        let sol = svd
            .solve(&rhs, 1e-14 * smax)
            .map_err(|e| Error::FitInput(format!("least squares failed: {e}")))?;
        let new: Vec<f64> = sol.iter().cloned().collect();
        let delta: f64 = new
            .iter()
            .zip(&coeffs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / new.iter().map(|c| c.abs()).sum::<f64>().max(1e-300);
        coeffs = new;
        // Reweight by the fitted denominator for the next pass.
        for i in 0..rows {
            let mut d_val = xs[i].powi(order as i32);
            let mut xp = 1.0;
            for k in 0..order {
                d_val += coeffs[order + 1 + k] * xp;
                xp *= xs[i];
            }
            d_prev[i] = d_val.abs().max(1e-12);
        }
        if delta < 1e-12 {
            break;
        }
    }

    // N(x) low-to-high in coeffs[0..=order]; D(x) = x^order + tail.
    let n_poly_x: Vec<f64> = coeffs[..=order].to_vec();
    let mut d_poly_x: Vec<f64> = coeffs[order + 1..].to_vec();
    d_poly_x.push(1.0);

    let num_s = spectral_factor(&n_poly_x, w0)?;
    let den_s = spectral_factor(&d_poly_x, w0)?;
    let shape = TransferFunction::new(num_s, den_s)?;

    // Log-mean gain match on the samples.
    let mut acc = 0.0;
    for &(w, m) in samples {
        let mag = shape.mag_at(w);
        if mag <= 0.0 || !mag.is_finite() {
            return Err(Error::FitRankDeficient);
        }
        acc += m.ln() - mag.ln();
    }
    let gain = (acc / samples.len() as f64).exp();
    let tf = shape.scale(gain);

    let mut sq = 0.0;
    for &(w, m) in samples {
        let err = to_db(tf.mag_at(w)) - to_db(m);
        sq += err * err;
    }
    let rms = (sq / samples.len() as f64).sqrt();
    Ok(MinPhaseFit {
        tf,
        rms_db_error: rms,
    })
}

/// Left-half-plane spectral factor of an even magnitude-squared polynomial
/// given by its x = (w/w0)^2 coefficients (low to high). Unit leading gain;
/// the caller rescales.
fn spectral_factor(x_coeffs_low: &[f64], w0: f64) -> Result<Polynomial> {
    let mut coeffs = x_coeffs_low.to_vec();
    // Trim negligible leading (highest-order) terms.
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(Error::FitRankDeficient);
    }
    while coeffs.len() > 1 && coeffs.last().unwrap().abs() <= 1e-12 * scale {
        coeffs.pop();
    }
    let mut high_first: Vec<f64> = coeffs.iter().rev().cloned().collect();
    // Normalize sign so the polynomial is positive somewhere on x >= 0.
    if high_first[0] < 0.0 {
        for c in &mut high_first {
            *c = -*c;
        }
    }
    let x_poly = Polynomial::new(high_first);
    let x_roots = x_poly.roots()?;
    let mut s_roots = Vec::with_capacity(x_roots.len());
    for rho in x_roots {
        // x = -(s/w0)^2  =>  s = w0 sqrt(-rho), left-half-plane branch.
        let s = (-rho).sqrt() * w0;
        let mut left = if s.re > 0.0 { -s } else { s };
        let tol = 1e-9 * (1.0 + left.norm());
        if left.re.abs() <= tol {
            // Axis pair: nudge strictly into the left half plane.
            left.re = -1e-6 * (1.0 + left.im.abs());
        }
        s_roots.push(left);
    }
    Ok(Polynomial::from_roots(&s_roots, 1.0))
}

/// A plant together with its weights and the shaped product W2 * P * W1.
#[derive(Debug, Clone)]
pub struct ShapedPlant {
    pub plant: TransferFunction,
    pub w1: TransferFunction,
    pub w2: TransferFunction,
    pub shaped: TransferFunction,
}

/// Assembles the shaped plant.
pub fn shape(
    plant: &TransferFunction,
    w1: &TransferFunction,
    w2: &TransferFunction,
) -> Result<ShapedPlant> {
    let shaped = series(w2, &series(plant, w1)?)?;
    Ok(ShapedPlant {
        plant: plant.clone(),
        w1: w1.clone(),
        w2: w2.clone(),
        shaped,
    })
}

/// Weight-fit target that centers the shaped loop between the bounds: the
/// geometric mean of the bounds divided by the plant magnitude, sampled on
/// the given grid.
pub fn geomean_fit_target(
    plant: &TransferFunction,
    bounds: &FrequencyBounds,
    grid: &[f64],
) -> Vec<(f64, f64)> {
    grid.iter()
        .map(|&w| {
            let gm = (bounds.lower.mag_at(w) * bounds.upper.mag_at(w)).sqrt();
            (w, gm / plant.mag_at(w))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_template_values() {
        let (w1, w2) = make_weights(&WeightParams {
            k1: 1.0,
            alpha1: 1.0,
            beta1: 1.0,
            k2: 3.0,
            alpha2: 40.0,
            beta2: 100.0,
        })
        .unwrap();
        // alpha1 = beta1 collapses W1 to the constant K1.
        assert_eq!(w1.num().degree(), 0);
        assert!((w1.dc_gain() - 1.0).abs() < 1e-12);
        assert!((w2.dc_gain() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn weight_invariants_enforced() {
        let mut p = WeightParams::identity();
        p.beta2 = -1.0;
        let err = make_weights(&p).unwrap_err();
        assert!(format!("{err}").contains("beta2"));
        p = WeightParams::identity();
        p.k1 = 0.0;
        assert!(make_weights(&p).is_err());
    }

    #[test]
    fn weights_are_stable_minimum_phase() {
        let (w1, w2) = make_weights(&WeightParams {
            k1: -2.0,
            alpha1: 5.0,
            beta1: 0.3,
            k2: 0.7,
            alpha2: 100.0,
            beta2: 2.0,
        })
        .unwrap();
        for w in [w1, w2] {
            assert!(w.poles().unwrap().iter().all(|p| p.re < 0.0));
            assert!(w.zeros().unwrap().iter().all(|z| z.re < 0.0));
        }
    }

    #[test]
    fn reference_bounds_shape() {
        let b = reference_bounds();
        // Constant 10/3 ratio at every frequency.
        for &w in &[1e-3, 0.1, 10.0, 1e3] {
            let ratio = b.upper.mag_at(w) / b.lower.mag_at(w);
            assert!((ratio - 10.0 / 3.0).abs() < 1e-9);
        }
        // Near-DC magnitude of the lower bound is about 1800 (65.1 dB).
        let low_dc = b.lower.mag_at(1e-7);
        assert!((low_dc - 1800.0).abs() < 1.0, "got {low_dc}");
        // Strictly proper with relative degree 2.
        assert_eq!(b.lower.den().degree() - b.lower.num().degree(), 2);
        assert!(b.lower.mag_at(1e6) < 1e-4);
    }

    #[test]
    fn bounds_check_midpoint_and_scaling() {
        let b = reference_bounds();
        // A curve through the geometric mean passes everywhere; since
        // check_bounds compares sampled magnitudes, use 2*s_high to fail
        // everywhere by exactly 6.02 dB.
        let double_high = b.upper.scale(2.0);
        let rep = check_bounds(&double_high, &b);
        assert!(!rep.pass);
        assert_eq!(rep.pass_fraction, 0.0);
        assert!((rep.worst_violation_db - 20.0 * 2f64.log10()).abs() < 1e-9);

        let mid = TransferFunction::new(
            b.lower
                .num()
                .scale((10.0f64 / 3.0).sqrt()),
            b.lower.den().clone(),
        )
        .unwrap();
        let rep = check_bounds(&mid, &b);
        assert!(rep.pass, "geometric-mean curve must pass");
        assert_eq!(rep.worst_violation_db, 0.0);
        assert!(rep.rows.iter().all(|r| r.pass));
    }

    #[test]
    fn rolloff_boundary_cases() {
        let plant = crate::missile::reference_plant();
        assert!(!check_rolloff(&plant, &plant, 300.0, 25.0));
        let scaled = plant.scale(10f64.powf(-25.0 / 20.0));
        assert!(check_rolloff(&scaled, &plant, 300.0, 25.0));
        assert!(check_rolloff(&TransferFunction::zero(), &plant, 300.0, 25.0));
    }

    #[test]
    fn fit_constant_order_zero() {
        let samples: Vec<(f64, f64)> = log_grid(0.1, 1e4, 100)
            .into_iter()
            .map(|w| (w, 1.0))
            .collect();
        let fit = fit_minimum_phase(&samples, 0).unwrap();
        assert!(fit.rms_db_error < 1e-9);
        assert!((fit.tf.dc_gain() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_recovers_first_order_shape() {
        let truth = TransferFunction::from_coeffs(vec![1.0, 40.0], vec![1.0, 100.0]).unwrap();
        let samples: Vec<(f64, f64)> = log_grid(0.1, 1e4, 100)
            .into_iter()
            .map(|w| (w, truth.mag_at(w)))
            .collect();
        let fit = fit_minimum_phase(&samples, 1).unwrap();
        assert!(fit.rms_db_error < 0.1, "rms {}", fit.rms_db_error);
        // Pole/zero recovered.
        let z = fit.tf.zeros().unwrap()[0];
        let p = fit.tf.poles().unwrap()[0];
        assert!((z.re + 40.0).abs() < 0.1);
        assert!((p.re + 100.0).abs() < 0.2);
    }

    #[test]
    fn fit_reflects_nonminimum_phase_source() {
        // |(s-40)/(s+100)| equals |(s+40)/(s+100)| on the axis; the fit
        // must return the reflected minimum-phase version.
        let src = TransferFunction::from_coeffs(vec![1.0, -40.0], vec![1.0, 100.0]).unwrap();
        let samples: Vec<(f64, f64)> = log_grid(0.1, 1e4, 100)
            .into_iter()
            .map(|w| (w, src.mag_at(w)))
            .collect();
        let fit = fit_minimum_phase(&samples, 1).unwrap();
        let z = fit.tf.zeros().unwrap()[0];
        assert!(z.re < 0.0, "zero must be reflected into the LHP");
        assert!((z.re + 40.0).abs() < 0.1);
        assert!(fit.rms_db_error < 0.1);
    }

    #[test]
    fn fit_output_strictly_minimum_phase() {
        // Samples from a magnitude with a near-axis notch still produce
        // strictly-LHP roots.
        let truth = TransferFunction::from_coeffs(vec![1.0, 0.02, 1.0], vec![1.0, 2.0, 4.0])
            .unwrap();
        let samples: Vec<(f64, f64)> = log_grid(0.01, 100.0, 200)
            .into_iter()
            .map(|w| (w, truth.mag_at(w)))
            .collect();
        let fit = fit_minimum_phase(&samples, 2).unwrap();
        assert!(fit.tf.poles().unwrap().iter().all(|p| p.re < 0.0));
        assert!(fit.tf.zeros().unwrap().iter().all(|z| z.re < 0.0));
    }

    #[test]
    fn fit_insufficient_samples_rejected() {
        let samples = vec![(1.0, 1.0), (2.0, 1.0)];
        assert!(fit_minimum_phase(&samples, 1).is_err());
    }

    #[test]
    fn shape_identity_and_gain() {
        let plant = TransferFunction::from_coeffs(vec![1.0], vec![1.0, 1.0]).unwrap();
        let one = TransferFunction::constant(1.0);
        let sp = shape(&plant, &one, &one).unwrap();
        assert_eq!(sp.shaped, plant);
        let two = TransferFunction::constant(2.0);
        let three = TransferFunction::constant(3.0);
        let sp = shape(&plant, &two, &three).unwrap();
        assert!((sp.shaped.dc_gain() - 6.0).abs() < 1e-12);
    }
}
