//! The plant family: actuator, aerodynamic derivatives, pitch/roll transfer
//! functions, open-loop assembly, and flight-envelope ingestion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{feedback_unity, series, Polynomial, TransferFunction};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActuatorParams {
    /// Natural frequency, rad/s.
    pub omega_n: f64,
    /// Damping ratio.
    pub zeta: f64,
}

impl ActuatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_n > 0.0) {
            return Err(Error::Envelope(format!(
                "actuator omega_n must be positive, got {}",
                self.omega_n
            )));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::Envelope(format!(
                "actuator zeta must be positive, got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

/// Dimensionless aerodynamic coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroCoefficients {
    pub c_y_beta: f64,
    pub c_y_delta_r: f64,
    pub c_y_r: f64,
    pub c_z_alpha: f64,
    pub c_z_delta_e: f64,
    pub c_z_q: f64,
    pub c_l_delta_a: f64,
    pub c_l_p: f64,
    pub c_m_alpha: f64,
    pub c_m_delta_e: f64,
    pub c_m_q: f64,
    pub c_n_beta: f64,
    pub c_n_delta_r: f64,
    pub c_n_r: f64,
}

impl AeroCoefficients {
    pub fn all_finite(&self) -> bool {
        [
            self.c_y_beta,
            self.c_y_delta_r,
            self.c_y_r,
            self.c_z_alpha,
            self.c_z_delta_e,
            self.c_z_q,
            self.c_l_delta_a,
            self.c_l_p,
            self.c_m_alpha,
            self.c_m_delta_e,
            self.c_m_q,
            self.c_n_beta,
            self.c_n_delta_r,
            self.c_n_r,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// One flight condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoint {
    pub id: String,
    /// Dynamic pressure, force/area.
    pub dynamic_pressure: f64,
    /// Reference area.
    pub reference_area: f64,
    /// Reference diameter.
    pub reference_diameter: f64,
    /// Mass.
    pub mass: f64,
    pub inertia_x: f64,
    pub inertia_y: f64,
    pub inertia_z: f64,
    /// Axial speed.
    pub speed_u: f64,
    /// Total speed used by the derivative formulas.
    pub speed_v: f64,
    /// Descriptive metadata only.
    pub altitude: f64,
    /// Descriptive metadata only.
    pub mach: f64,
    pub coefficients: AeroCoefficients,
}

impl OperatingPoint {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("dynamic_pressure", self.dynamic_pressure),
            ("reference_area", self.reference_area),
            ("reference_diameter", self.reference_diameter),
            ("mass", self.mass),
            ("inertia_y", self.inertia_y),
            ("speed_v", self.speed_v),
        ];
        let bad: Vec<String> = positives
            .iter()
            .filter(|(_, v)| !(*v > 0.0))
            .map(|(n, v)| format!("{n} = {v} (must be > 0)"))
            .collect();
        if !bad.is_empty() {
            return Err(Error::Envelope(format!(
                "operating point '{}': {}",
                self.id,
                bad.join(", ")
            )));
        }
        if !self.coefficients.all_finite() {
            return Err(Error::Envelope(format!(
                "operating point '{}': aerodynamic coefficients must be finite",
                self.id
            )));
        }
        Ok(())
    }
}

/// Dimensional stability and control derivatives evaluated at one operating
/// point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DimensionalDerivatives {
    pub l_delta_a: f64,
    pub z_q: f64,
    pub l_p: f64,
    pub m_delta: f64,
    pub z_delta: f64,
    pub m_alpha: f64,
    pub z_alpha: f64,
    pub m_q: f64,
}

/// Second-order fin actuator with unit DC gain.
pub fn actuator_tf(p: &ActuatorParams) -> Result<TransferFunction> {
    p.validate()?;
    let wn2 = p.omega_n * p.omega_n;
    TransferFunction::from_coeffs(vec![wn2], vec![1.0, 2.0 * p.zeta * p.omega_n, wn2])
}

/// Dimensional derivatives from dynamic pressure, geometry, and
/// coefficients.
pub fn dimensional_derivatives(op: &OperatingPoint) -> DimensionalDerivatives {
    let q = op.dynamic_pressure;
    let s = op.reference_area;
    let d = op.reference_diameter;
    let m = op.mass;
    let iy = op.inertia_y;
    let v = op.speed_v;
    let c = &op.coefficients;
    DimensionalDerivatives {
        l_delta_a: q * s * d * c.c_l_delta_a,
        z_q: s * q * d * c.c_z_q / m,
        l_p: q * s * d * c.c_l_p * (d / (2.0 * v)),
        m_delta: s * q * d * c.c_m_delta_e / iy,
        z_delta: s * q * c.c_z_delta_e / m,
        m_alpha: s * q * d * c.c_m_alpha / iy,
        z_alpha: s * q * c.c_z_alpha / m,
        m_q: s * q * d * d * c.c_m_q / (iy * v),
    }
}

/// Shared short-period denominator of the pitch-rate and acceleration
/// transfer functions.
fn pitch_denominator(d: &DimensionalDerivatives, v: f64) -> Polynomial {
    Polynomial::new(vec![
        1.0,
        -(d.m_q + d.z_alpha / v),
        (d.z_alpha * d.m_q - d.m_alpha * d.z_q) / v - d.m_alpha,
    ])
}

/// Pitch rate per elevator deflection.
pub fn pitch_rate_tf(d: &DimensionalDerivatives, v: f64) -> Result<TransferFunction> {
    if !(v > 0.0) {
        return Err(Error::Envelope(format!("speed must be positive, got {v}")));
    }
    let num = Polynomial::new(vec![
        d.m_delta,
        d.z_delta * d.m_alpha - d.z_alpha * d.m_delta,
    ]);
    TransferFunction::new(num, pitch_denominator(d, v))
}

/// Normal acceleration per pitch rate; shares the pitch-rate denominator
/// coefficient for coefficient.
pub fn accel_per_pitch_rate_tf(d: &DimensionalDerivatives, v: f64) -> Result<TransferFunction> {
    if !(v > 0.0) {
        return Err(Error::Envelope(format!("speed must be positive, got {v}")));
    }
    let num = Polynomial::new(vec![
        d.z_delta,
        d.m_delta * d.z_q - d.z_delta * d.m_q,
        d.z_alpha * d.m_delta - d.z_delta * d.m_alpha,
    ]);
    TransferFunction::new(num, pitch_denominator(d, v))
}

/// Roll rate per aileron deflection.
pub fn roll_tf(d: &DimensionalDerivatives, i_x: f64) -> Result<TransferFunction> {
    if !(i_x > 0.0) {
        return Err(Error::Envelope(format!(
            "roll inertia must be positive, got {i_x}"
        )));
    }
    TransferFunction::from_coeffs(vec![d.l_delta_a], vec![i_x, -d.l_p])
}

/// Open-loop acceleration plant: the pitch-rate loop closed through the
/// actuator with gain k_q, in series with the acceleration response.
pub fn open_loop_plant(
    op: &OperatingPoint,
    actuator: &ActuatorParams,
    k_q: f64,
) -> Result<TransferFunction> {
    op.validate()?;
    let d = dimensional_derivatives(op);
    let q_tf = pitch_rate_tf(&d, op.speed_v)?;
    let az_tf = accel_per_pitch_rate_tf(&d, op.speed_v)?;
    let ga = actuator_tf(actuator)?;
    let forward = series(&TransferFunction::constant(k_q), &series(&ga, &q_tf)?)?;
    let inner = feedback_unity(&forward)?;
    series(&inner, &az_tf)
}

/// The canned fourth-order benchmark plant
/// 863878246 (s-30)(s+25) / ((s+121)(s+3)(s^2+20s+7933)).
pub fn reference_plant() -> TransferFunction {
    let num = Polynomial::new(vec![1.0, -30.0])
        .mul(&Polynomial::new(vec![1.0, 25.0]))
        .scale(863878246.0);
    let den = Polynomial::new(vec![1.0, 121.0])
        .mul(&Polynomial::new(vec![1.0, 3.0]))
        .mul(&Polynomial::new(vec![1.0, 20.0, 7933.0]));
    TransferFunction::new(num, den).expect("fixed denominator is nonzero")
}

/// Factored display form of [`reference_plant`], matching the printed
/// benchmark exactly.
pub const REFERENCE_PLANT_FACTORED: &str =
    "863878246(s-30)(s+25)/((s+121)(s+3)(s^2+20s+7933))";

/// A parsed flight envelope: shared actuator, rate-loop gain, and the
/// operating points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope {
    pub actuator: ActuatorParams,
    pub k_q: f64,
    pub points: Vec<OperatingPoint>,
}

impl Envelope {
    /// Open-loop plant at every operating point, in envelope order.
    pub fn plants(&self) -> Result<Vec<TransferFunction>> {
        self.points
            .iter()
            .map(|op| open_loop_plant(op, &self.actuator, self.k_q))
            .collect()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    actuator: ActuatorParams,
    gains: RawGains,
    #[serde(default)]
    operating_point: Vec<OperatingPoint>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    k_q: f64,
}

/// Parses and validates an envelope document (TOML text with an
/// `[actuator]` section, a `[gains]` section carrying `k_q`, and repeated
/// `[[operating_point]]` blocks).
pub fn load_envelope(text: &str) -> Result<Envelope> {
    let raw: RawEnvelope = toml::from_str(text)
        .map_err(|e| Error::Envelope(format!("envelope parse error: {e}")))?;
    raw.actuator.validate()?;
    if !raw.gains.k_q.is_finite() {
        return Err(Error::Envelope("k_q must be finite".into()));
    }
    if raw.operating_point.is_empty() {
        return Err(Error::Envelope(
            "envelope must contain at least 1 operating point".into(),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut problems = Vec::new();
    for op in &raw.operating_point {
        if !seen.insert(op.id.clone()) {
            problems.push(format!("duplicate operating point id '{}'", op.id));
        }
        if let Err(e) = op.validate() {
            problems.push(format!("{e}"));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Envelope(problems.join("; ")));
    }
    Ok(Envelope {
        actuator: raw.actuator,
        k_q: raw.gains.k_q,
        points: raw.operating_point,
    })
}

/// The synthetic test envelope shipped with the crate (non-physical data:
/// one base condition with dynamic pressure scaled by 0.5, 1, 2, and 4).
pub const SYNTHETIC_ENVELOPE_TOML: &str = include_str!("../data/synthetic_envelope.toml");

/// Parsed form of [`SYNTHETIC_ENVELOPE_TOML`].
pub fn synthetic_envelope() -> Envelope {
    load_envelope(SYNTHETIC_ENVELOPE_TOML).expect("shipped envelope is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn unit_point() -> OperatingPoint {
        OperatingPoint {
            id: "unit".into(),
            dynamic_pressure: 1.0,
            reference_area: 1.0,
            reference_diameter: 1.0,
            mass: 1.0,
            inertia_x: 1.0,
            inertia_y: 1.0,
            inertia_z: 1.0,
            speed_u: 1.0,
            speed_v: 1.0,
            altitude: 0.0,
            mach: 0.0,
            coefficients: AeroCoefficients {
                c_y_beta: 1.0,
                c_y_delta_r: 1.0,
                c_y_r: 1.0,
                c_z_alpha: 1.0,
                c_z_delta_e: 1.0,
                c_z_q: 1.0,
                c_l_delta_a: 1.0,
                c_l_p: 1.0,
                c_m_alpha: 1.0,
                c_m_delta_e: 1.0,
                c_m_q: 1.0,
                c_n_beta: 1.0,
                c_n_delta_r: 1.0,
                c_n_r: 1.0,
            },
        }
    }

    #[test]
    fn actuator_canned_values() {
        let g = actuator_tf(&ActuatorParams {
            omega_n: 200.0,
            zeta: 0.7,
        })
        .unwrap();
        assert_eq!(g.num().coeffs(), &[40000.0]);
        assert_eq!(g.den().coeffs(), &[1.0, 280.0, 40000.0]);
        assert!((g.dc_gain() - 1.0).abs() < 1e-14);
        // |G(j omega_n)| = 1/(2 zeta)
        let mag = g.eval(Complex64::new(0.0, 200.0)).norm();
        assert!((mag - 1.0 / 1.4).abs() < 1e-12);
        // Resonant peak for zeta = 0.7.
        let peak = (0..2000)
            .map(|i| g.mag_at(50.0 + i as f64 * 0.1))
            .fold(0.0f64, f64::max);
        let want = 1.0 / (2.0 * 0.7 * (1.0f64 - 0.49).sqrt());
        assert!((peak - want).abs() < 1e-3);
    }

    #[test]
    fn unit_substitution_derivatives() {
        let d = dimensional_derivatives(&unit_point());
        assert_eq!(d.l_delta_a, 1.0);
        assert_eq!(d.z_q, 1.0);
        assert_eq!(d.l_p, 0.5);
        assert_eq!(d.m_delta, 1.0);
        assert_eq!(d.z_delta, 1.0);
        assert_eq!(d.m_alpha, 1.0);
        assert_eq!(d.z_alpha, 1.0);
        assert_eq!(d.m_q, 1.0);
    }

    #[test]
    fn derivatives_linear_in_dynamic_pressure() {
        let mut op = unit_point();
        op.dynamic_pressure = 2.0;
        let d2 = dimensional_derivatives(&op);
        let d1 = dimensional_derivatives(&unit_point());
        assert_eq!(d2.l_delta_a, 2.0 * d1.l_delta_a);
        assert_eq!(d2.m_q, 2.0 * d1.m_q);
        assert_eq!(d2.z_alpha, 2.0 * d1.z_alpha);
    }

    #[test]
    fn pitch_rate_unit_substitution() {
        let d = dimensional_derivatives(&unit_point());
        let g = pitch_rate_tf(&d, 1.0).unwrap();
        // numerator s + (1*1 - 1*1) = s; denominator s^2 - 2s - 1
        assert_eq!(g.num().coeffs(), &[1.0, 0.0]);
        assert_eq!(g.den().coeffs(), &[1.0, -2.0, -1.0]);
    }

    #[test]
    fn accel_unit_substitution_and_shared_denominator() {
        let d = dimensional_derivatives(&unit_point());
        let q = pitch_rate_tf(&d, 1.0).unwrap();
        let az = accel_per_pitch_rate_tf(&d, 1.0).unwrap();
        assert_eq!(az.num().coeffs(), &[1.0, 0.0, 0.0]);
        assert_eq!(az.den().coeffs(), q.den().coeffs());
    }

    #[test]
    fn zero_derivatives_zero_responses() {
        let d = DimensionalDerivatives {
            l_delta_a: 0.0,
            z_q: 0.0,
            l_p: 0.0,
            m_delta: 0.0,
            z_delta: 0.0,
            m_alpha: 0.0,
            z_alpha: 0.0,
            m_q: 0.0,
        };
        assert!(pitch_rate_tf(&d, 1.0).unwrap().is_zero());
        assert!(accel_per_pitch_rate_tf(&d, 1.0).unwrap().is_zero());
        assert!(roll_tf(&d, 1.0).unwrap().is_zero());
    }

    #[test]
    fn roll_unit_substitution_flags_unstable_pole() {
        let d = dimensional_derivatives(&unit_point());
        let g = roll_tf(&d, 1.0).unwrap();
        assert_eq!(g.den().coeffs(), &[1.0, -0.5]);
        assert!(!g.is_stable().unwrap());
    }

    #[test]
    fn zero_rate_gain_kills_the_plant() {
        let env = synthetic_envelope();
        let g = open_loop_plant(&env.points[0], &env.actuator, 0.0).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn reference_plant_fixture() {
        let g = reference_plant();
        let dc = g.dc_gain();
        let want = 863878246.0 * (-30.0) * 25.0 / (121.0 * 3.0 * 7933.0);
        assert!((dc - want).abs() < 1e-6 * want.abs());
        assert!((dc + 2.2500e5).abs() < 10.0);
        assert_eq!(
            REFERENCE_PLANT_FACTORED,
            "863878246(s-30)(s+25)/((s+121)(s+3)(s^2+20s+7933))"
        );
    }

    #[test]
    fn envelope_rejects_bad_documents() {
        assert!(load_envelope("").is_err());
        let no_points = r#"
[actuator]
omega_n = 200.0
zeta = 0.7
[gains]
k_q = -0.002
"#;
        let err = load_envelope(no_points).unwrap_err();
        assert!(format!("{err}").contains("at least 1"));

        let dup = format!(
            "{}\n{}",
            SYNTHETIC_ENVELOPE_TOML,
            SYNTHETIC_ENVELOPE_TOML
                .split("[[operating_point]]")
                .nth(1)
                .map(|s| format!("[[operating_point]]{s}"))
                .unwrap()
        );
        let err = load_envelope(&dup).unwrap_err();
        assert!(format!("{err}").contains("duplicate"));
    }

    #[test]
    fn synthetic_envelope_scales_with_q() {
        let env = synthetic_envelope();
        assert_eq!(env.points.len(), 4);
        let base = &env.points[1];
        for (i, factor) in [(0usize, 0.5f64), (2, 2.0), (3, 4.0)] {
            let d = dimensional_derivatives(&env.points[i]);
            let db = dimensional_derivatives(base);
            assert!((d.m_alpha - factor * db.m_alpha).abs() < 1e-9 * db.m_alpha.abs());
            assert!((d.z_delta - factor * db.z_delta).abs() < 1e-9 * db.z_delta.abs());
        }
        // All four plants must be stable for the certification fixture.
        for g in env.plants().unwrap() {
            assert!(g.is_stable().unwrap());
        }
    }
}
