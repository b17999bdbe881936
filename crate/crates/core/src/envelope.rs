//! Thermal-failure operating envelope: evaluate the failure boundary in the
//! (rho, t_p) plane, answer safe-drive queries, and fit boundary parameters
//! from observed failure events.
//!
//! The boundary is `rho(t_p) = T_fail / (a (1 - e^{-t_p/(a b)}))` with
//! `a = R_thermal * L_T` (mm K/W) and `b = C / L_T` (J/(mm K)). The product
//! `a b = R_thermal * C` is the boundary's effective time constant in
//! seconds, which is why the exponent uses `t_p / (a b)` rather than the
//! unit-inconsistent `t_p / b`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csvio;

/// Wire failure temperature rise, the melting point of NiCr, in degC above
/// ambient.
pub const DEFAULT_T_FAIL_C: f64 = 1400.0;

/// Default planning margin: headroom fraction kept between a drive and the
/// boundary. Failure is catastrophic (wire melt), so planning at the
/// boundary itself is never acceptable.
pub const DEFAULT_SAFETY_MARGIN: f64 = 0.10;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("margin must lie in [0, 1), got {0}")]
    MarginOutOfRange(f64),
    #[error("envelope fit needs at least 3 failure points, got {0}")]
    TooFewPoints(usize),
    #[error("failure points are unidentifiable: {0}")]
    Degenerate(String),
    #[error("envelope fit did not converge: {0}")]
    FitFailure(String),
    #[error("failure point table: {0}")]
    Table(#[from] csvio::CsvError),
}

/// Fit diagnostics shared by the boundary fit: log-space residuals and the
/// coefficient of determination in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Fitted failure-boundary parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// Length-scaled thermal resistance, mm K/W.
    pub a_mm_k_per_w: f64,
    /// Length-scaled thermal mass, J/(mm K).
    pub b_j_per_mm_k: f64,
    /// Temperature rise to failure, degC above ambient.
    pub t_fail_c: f64,
    pub diagnostics: Option<FitDiagnostics>,
}

impl EnvelopeFit {
    pub fn new(a_mm_k_per_w: f64, b_j_per_mm_k: f64, t_fail_c: f64) -> Result<Self, EnvelopeError> {
        for (name, value) in [
            ("a_mm_k_per_w", a_mm_k_per_w),
            ("b_j_per_mm_k", b_j_per_mm_k),
            ("t_fail_c", t_fail_c),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(EnvelopeError::NonPositive { name, value });
            }
        }
        Ok(Self {
            a_mm_k_per_w,
            b_j_per_mm_k,
            t_fail_c,
            diagnostics: None,
        })
    }

    /// The published fit: a = 6601 mm K/W, b = 6.51 uJ/(mm K), T_fail = 1400.
    pub fn reference() -> Self {
        Self {
            a_mm_k_per_w: 6601.0,
            b_j_per_mm_k: 6.51e-6,
            t_fail_c: DEFAULT_T_FAIL_C,
            diagnostics: None,
        }
    }

    /// Effective boundary time constant `a b = R_thermal C`, seconds.
    pub fn time_constant_s(&self) -> f64 {
        self.a_mm_k_per_w * self.b_j_per_mm_k
    }

    /// Long-pulse asymptote `T_fail / a` in W/mm; below it no pulse duration
    /// reaches the failure temperature.
    pub fn asymptote_w_per_mm(&self) -> f64 {
        self.t_fail_c / self.a_mm_k_per_w
    }
}

/// One observed failure event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailurePoint {
    pub rho_w_per_mm: f64,
    pub t_p_s: f64,
    /// Cavity length of the failed device; annotation only, the boundary is
    /// geometry-agnostic in (rho, t_p).
    pub cavity_length_l_mm: Option<f64>,
}

impl FailurePoint {
    pub fn new(rho_w_per_mm: f64, t_p_s: f64) -> Result<Self, EnvelopeError> {
        if !rho_w_per_mm.is_finite() || rho_w_per_mm <= 0.0 {
            return Err(EnvelopeError::NonPositive {
                name: "rho_w_per_mm",
                value: rho_w_per_mm,
            });
        }
        if !t_p_s.is_finite() || t_p_s <= 0.0 {
            return Err(EnvelopeError::NonPositive {
                name: "t_p_s",
                value: t_p_s,
            });
        }
        Ok(Self {
            rho_w_per_mm,
            t_p_s,
            cavity_length_l_mm: None,
        })
    }
}

/// Failure-boundary power per unit length at pulse duration `t_p`.
///
/// Strictly decreasing and convex in `t_p`, with asymptote `T_fail / a`.
pub fn boundary_rho(fit: &EnvelopeFit, t_p_s: f64) -> Result<f64, EnvelopeError> {
    if !t_p_s.is_finite() || t_p_s <= 0.0 {
        return Err(EnvelopeError::NonPositive {
            name: "t_p_s",
            value: t_p_s,
        });
    }
    let tau = fit.time_constant_s();
    Ok(fit.t_fail_c / (fit.a_mm_k_per_w * (1.0 - (-t_p_s / tau).exp())))
}

/// Longest pulse duration that stays on or below the boundary at drive
/// intensity `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxDuration {
    /// `rho` exceeds the asymptote: the boundary is crossed at this duration.
    Bounded { t_p_s: f64 },
    /// `rho` is at or below the asymptote `T_fail / a`: no finite pulse
    /// duration reaches the failure temperature.
    UnboundedSafe,
}

/// Invert the boundary: `t_p = -(a b) ln(1 - T_fail / (a rho))`.
pub fn max_pulse_duration(fit: &EnvelopeFit, rho_w_per_mm: f64) -> Result<MaxDuration, EnvelopeError> {
    if !rho_w_per_mm.is_finite() || rho_w_per_mm <= 0.0 {
        return Err(EnvelopeError::NonPositive {
            name: "rho_w_per_mm",
            value: rho_w_per_mm,
        });
    }
    if rho_w_per_mm <= fit.asymptote_w_per_mm() {
        return Ok(MaxDuration::UnboundedSafe);
    }
    let tau = fit.time_constant_s();
    let t = -tau * (1.0 - fit.t_fail_c / (fit.a_mm_k_per_w * rho_w_per_mm)).ln();
    Ok(MaxDuration::Bounded { t_p_s: t })
}

/// Verdict of a safe-drive query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub safe: bool,
    /// Requested drive intensity, W/mm.
    pub rho_w_per_mm: f64,
    pub t_p_s: f64,
    pub margin: f64,
    /// Boundary value at `t_p`, W/mm (margin not applied).
    pub boundary_rho_w_per_mm: f64,
    /// `rho / ((1 - margin) * boundary)`; at most 1 when safe.
    pub utilization: f64,
    /// Longest `t_p` that would pass this check at the same rho and margin.
    pub max_safe_t_p_s: Option<f64>,
}

/// Check `rho <= (1 - margin) * boundary_rho(t_p)` and report headroom.
pub fn is_safe(
    fit: &EnvelopeFit,
    rho_w_per_mm: f64,
    t_p_s: f64,
    margin: f64,
) -> Result<SafetyReport, EnvelopeError> {
    if !(0.0..1.0).contains(&margin) {
        return Err(EnvelopeError::MarginOutOfRange(margin));
    }
    if !rho_w_per_mm.is_finite() || rho_w_per_mm < 0.0 {
        return Err(EnvelopeError::NonPositive {
            name: "rho_w_per_mm",
            value: rho_w_per_mm,
        });
    }
    let boundary = boundary_rho(fit, t_p_s)?;
    let allowed = (1.0 - margin) * boundary;
    let utilization = rho_w_per_mm / allowed;
    let max_safe_t_p_s = if rho_w_per_mm > 0.0 {
        match max_pulse_duration(fit, rho_w_per_mm / (1.0 - margin))? {
            MaxDuration::Bounded { t_p_s } => Some(t_p_s),
            MaxDuration::UnboundedSafe => None,
        }
    } else {
        None
    };
    Ok(SafetyReport {
        safe: rho_w_per_mm <= allowed,
        rho_w_per_mm,
        t_p_s,
        margin,
        boundary_rho_w_per_mm: boundary,
        utilization,
        max_safe_t_p_s,
    })
}

/// Least-squares fit of (a, b) to failure points, minimizing squared
/// residuals of log(rho) against the boundary model.
///
/// Failure powers span an order of magnitude, so log residuals weight the
/// boundary uniformly. The optimizer is a coarse grid over the time constant
/// `a b` (with `a` profiled out in closed form) followed by Gauss-Newton
/// refinement of both parameters; deterministic throughout.
pub fn fit_envelope(points: &[FailurePoint], t_fail_c: f64) -> Result<EnvelopeFit, EnvelopeError> {
    if points.len() < 3 {
        return Err(EnvelopeError::TooFewPoints(points.len()));
    }
    if !t_fail_c.is_finite() || t_fail_c <= 0.0 {
        return Err(EnvelopeError::NonPositive {
            name: "t_fail_c",
            value: t_fail_c,
        });
    }
    for p in points {
        if p.rho_w_per_mm <= 0.0 || p.t_p_s <= 0.0 || !p.rho_w_per_mm.is_finite() || !p.t_p_s.is_finite() {
            return Err(EnvelopeError::Degenerate(
                "failure points must have strictly positive finite rho and t_p".into(),
            ));
        }
    }
    let t_min = points.iter().map(|p| p.t_p_s).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.t_p_s).fold(0.0_f64, f64::max);
    if t_max <= t_min * (1.0 + 1e-12) {
        return Err(EnvelopeError::Degenerate(
            "all failure points share one pulse duration; the time constant is unidentifiable".into(),
        ));
    }

    let log_rho: Vec<f64> = points.iter().map(|p| p.rho_w_per_mm.ln()).collect();
    let log_t_fail = t_fail_c.ln();

    // Given tau, the best ln(a) has a closed form: the mean log offset.
    let profile = |ln_tau: f64| -> (f64, f64) {
        let tau = ln_tau.exp();
        let mut offset_sum = 0.0;
        for (p, lr) in points.iter().zip(&log_rho) {
            let f = 1.0 - (-p.t_p_s / tau).exp();
            offset_sum += log_t_fail - f.ln() - lr;
        }
        let ln_a = offset_sum / points.len() as f64;
        let mut sse = 0.0;
        for (p, lr) in points.iter().zip(&log_rho) {
            let f = 1.0 - (-p.t_p_s / tau).exp();
            let r = log_t_fail - ln_a - f.ln() - lr;
            sse += r * r;
        }
        (sse, ln_a)
    };

    // Coarse grid over tau spanning well past the observed durations.
    let lo = (t_min * 1e-2).ln();
    let hi = (t_max * 1e3).ln();
    let grid_n = 400;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..grid_n {
        let ln_tau = lo + (hi - lo) * i as f64 / (grid_n - 1) as f64;
        let (sse, ln_a) = profile(ln_tau);
        if sse < best.0 {
            best = (sse, ln_a, ln_tau);
        }
    }
    let (_, mut ln_a, mut ln_tau) = best;

    // Gauss-Newton on (ln a, ln tau).
    let mut converged = false;
    for _ in 0..200 {
        let tau = ln_tau.exp();
        let mut jtj = [[0.0_f64; 2]; 2];
        let mut jtr = [0.0_f64; 2];
        for (p, lr) in points.iter().zip(&log_rho) {
            let u = p.t_p_s / tau;
            let e = (-u).exp();
            let f = 1.0 - e;
            let r = log_t_fail - ln_a - f.ln() - lr;
            // d r / d ln a = -1; d r / d ln tau = u e / f
            let j = [-1.0, u * e / f];
            for k in 0..2 {
                for l in 0..2 {
                    jtj[k][l] += j[k] * j[l];
                }
                jtr[k] += j[k] * r;
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            return Err(EnvelopeError::FitFailure("singular normal equations".into()));
        }
        let da = (-jtr[0] * jtj[1][1] + jtr[1] * jtj[0][1]) / det;
        let dt = (-jtr[1] * jtj[0][0] + jtr[0] * jtj[1][0]) / det;
        ln_a += da;
        ln_tau += dt;
        if da.abs().max(dt.abs()) < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EnvelopeError::FitFailure("Gauss-Newton did not converge".into()));
    }

    let a = ln_a.exp();
    let tau = ln_tau.exp();
    if !a.is_finite() || !tau.is_finite() || a <= 0.0 || tau <= 0.0 {
        return Err(EnvelopeError::FitFailure(format!(
            "non-physical parameters a = {a}, a*b = {tau}"
        )));
    }

    let mut residuals = Vec::with_capacity(points.len());
    let mut ss_res = 0.0;
    for (p, lr) in points.iter().zip(&log_rho) {
        let f = 1.0 - (-p.t_p_s / tau).exp();
        let r = lr - (log_t_fail - ln_a - f.ln());
        residuals.push(r);
        ss_res += r * r;
    }
    let mean = log_rho.iter().sum::<f64>() / log_rho.len() as f64;
    let ss_tot: f64 = log_rho.iter().map(|lr| (lr - mean) * (lr - mean)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(EnvelopeFit {
        a_mm_k_per_w: a,
        b_j_per_mm_k: tau / a,
        t_fail_c,
        diagnostics: Some(FitDiagnostics { r_squared, residuals }),
    })
}

/// Columns of the failure-point CSV table.
pub const FAILURE_POINT_HEADER: &str = "rho_w_per_mm,t_p_s,cavity_length_l_mm";

/// Read failure points from the CSV table format (`# key=value` metadata
/// comments, then a header row). The cavity-length column may be empty.
pub fn read_failure_points<R: std::io::Read>(reader: R) -> Result<Vec<FailurePoint>, EnvelopeError> {
    let table = csvio::read_table(reader)?;
    csvio::expect_header(&table, &["rho_w_per_mm", "t_p_s", "cavity_length_l_mm"])?;
    let mut points = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let rho = csvio::parse_field(row, 0, i)?;
        let t_p = csvio::parse_field(row, 1, i)?;
        let mut point = FailurePoint::new(rho, t_p)?;
        if row.len() > 2 && !row[2].is_empty() {
            point.cavity_length_l_mm = Some(csvio::parse_field(row, 2, i)?);
        }
        points.push(point);
    }
    Ok(points)
}

/// Write failure points in the CSV table format.
pub fn write_failure_points<W: std::io::Write>(
    mut writer: W,
    points: &[FailurePoint],
) -> std::io::Result<()> {
    writeln!(writer, "{FAILURE_POINT_HEADER}")?;
    for p in points {
        match p.cavity_length_l_mm {
            Some(l) => writeln!(writer, "{},{},{}", p.rho_w_per_mm, p.t_p_s, l)?,
            None => writeln!(writer, "{},{},", p.rho_w_per_mm, p.t_p_s)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn reference() -> EnvelopeFit {
        EnvelopeFit::reference()
    }

    #[test]
    fn asymptote_matches_t_fail_over_a() {
        let fit = reference();
        assert_relative_eq!(fit.asymptote_w_per_mm(), 0.21208907741251326, max_relative = 1e-12);
        // boundary approaches the asymptote from above for long pulses
        let far = boundary_rho(&fit, 10.0).unwrap();
        assert!((far - fit.asymptote_w_per_mm()) / fit.asymptote_w_per_mm() < 1e-9);
    }

    #[test]
    fn boundary_at_one_time_constant() {
        let fit = reference();
        let tau = fit.time_constant_s();
        assert_relative_eq!(tau, 0.04297251, max_relative = 1e-9);
        let rho = boundary_rho(&fit, tau).unwrap();
        let expected = fit.t_fail_c / (fit.a_mm_k_per_w * (1.0 - (-1.0_f64).exp()));
        assert_relative_eq!(rho, expected, max_relative = 1e-15);
        assert_relative_eq!(rho, 0.33552, max_relative = 1e-4);
    }

    #[test]
    fn boundary_is_strictly_decreasing() {
        let fit = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let t1: f64 = rng.gen_range(1e-4..0.5);
            let t2 = t1 * rng.gen_range(1.0001..10.0);
            assert!(boundary_rho(&fit, t1).unwrap() > boundary_rho(&fit, t2).unwrap());
        }
    }

    #[test]
    fn boundary_is_convex() {
        let fit = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let t: f64 = rng.gen_range(1e-3..0.3);
            let h = t * 1e-3;
            let f0 = boundary_rho(&fit, t - h).unwrap();
            let f1 = boundary_rho(&fit, t).unwrap();
            let f2 = boundary_rho(&fit, t + h).unwrap();
            assert!(f0 + f2 - 2.0 * f1 > 0.0, "second difference at t = {t}");
        }
    }

    #[test]
    fn boundary_rejects_non_positive_duration() {
        let fit = reference();
        assert!(boundary_rho(&fit, 0.0).is_err());
        assert!(boundary_rho(&fit, -0.01).is_err());
    }

    #[test]
    fn max_pulse_duration_examples() {
        let fit = reference();
        match max_pulse_duration(&fit, 0.5).unwrap() {
            MaxDuration::Bounded { t_p_s } => {
                assert_relative_eq!(t_p_s, 0.023718976099174845, max_relative = 1e-9);
            }
            MaxDuration::UnboundedSafe => panic!("0.5 W/mm must have a finite failure time"),
        }
        // below the asymptote there is no finite failure time
        assert_eq!(max_pulse_duration(&fit, 0.21).unwrap(), MaxDuration::UnboundedSafe);
        assert_eq!(
            max_pulse_duration(&fit, fit.asymptote_w_per_mm()).unwrap(),
            MaxDuration::UnboundedSafe
        );
    }

    #[test]
    fn inversion_round_trip() {
        // beyond ~10 time constants rho is within float epsilon of the
        // asymptote and no longer encodes the duration, so the round trip
        // is only meaningful below that
        let fit = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let t: f64 = rng.gen_range(1e-4..0.4);
            let rho = boundary_rho(&fit, t).unwrap();
            match max_pulse_duration(&fit, rho).unwrap() {
                MaxDuration::Bounded { t_p_s } => {
                    assert_relative_eq!(t_p_s, t, max_relative = 1e-9);
                    let back = boundary_rho(&fit, t_p_s).unwrap();
                    assert_relative_eq!(back, rho, max_relative = 1e-9);
                }
                MaxDuration::UnboundedSafe => panic!("boundary value must invert"),
            }
        }
    }

    #[test]
    fn safety_classifications() {
        let fit = reference();
        let safe = is_safe(&fit, 0.5, 0.015, 0.0).unwrap();
        assert!(safe.safe);
        assert_relative_eq!(safe.boundary_rho_w_per_mm, 0.7198, max_relative = 1e-3);

        let unsafe_report = is_safe(&fit, 0.5, 0.030, 0.0).unwrap();
        assert!(!unsafe_report.safe);
        assert!(unsafe_report.utilization > 1.0);
        let max_t = unsafe_report.max_safe_t_p_s.unwrap();
        assert_relative_eq!(max_t, 0.0237, max_relative = 2e-3);

        // the endurance-run condition stays safe even with the default margin
        assert!(is_safe(&fit, 0.42, 0.019, 0.0).unwrap().safe);
        assert!(is_safe(&fit, 0.42, 0.019, DEFAULT_SAFETY_MARGIN).unwrap().safe);

        assert!(is_safe(&fit, 0.5, 0.015, 1.0).is_err());
        assert!(is_safe(&fit, 0.5, 0.015, -0.1).is_err());
    }

    #[test]
    fn margin_shrinks_the_allowed_region() {
        let fit = reference();
        // just under the zero-margin boundary at 20 ms
        let boundary = boundary_rho(&fit, 0.020).unwrap();
        let rho = boundary * 0.95;
        assert!(is_safe(&fit, rho, 0.020, 0.0).unwrap().safe);
        assert!(!is_safe(&fit, rho, 0.020, 0.10).unwrap().safe);
    }

    fn synthetic_points(a: f64, b: f64, t_fail: f64, t_ps: &[f64]) -> Vec<FailurePoint> {
        let gen = EnvelopeFit::new(a, b, t_fail).unwrap();
        t_ps.iter()
            .map(|&t| FailurePoint::new(boundary_rho(&gen, t).unwrap(), t).unwrap())
            .collect()
    }

    #[test]
    fn fit_recovers_noiseless_parameters() {
        let t_ps = [0.005, 0.010, 0.020, 0.040, 0.080];
        let points = synthetic_points(6601.0, 6.51e-6, 1400.0, &t_ps);
        let fit = fit_envelope(&points, 1400.0).unwrap();
        assert_relative_eq!(fit.a_mm_k_per_w, 6601.0, max_relative = 1e-3);
        assert_relative_eq!(fit.b_j_per_mm_k, 6.51e-6, max_relative = 1e-3);
        let diag = fit.diagnostics.unwrap();
        assert!(diag.r_squared > 0.999999);
    }

    #[test]
    fn fit_recovers_under_multiplicative_noise() {
        let t_ps = [0.005, 0.010, 0.020, 0.040, 0.080];
        let clean = synthetic_points(6601.0, 6.51e-6, 1400.0, &t_ps);
        let mut r2s = Vec::new();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy: Vec<FailurePoint> = clean
                .iter()
                .map(|p| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    FailurePoint::new(p.rho_w_per_mm * (1.0 + 0.01 * eps), p.t_p_s).unwrap()
                })
                .collect();
            let fit = fit_envelope(&noisy, 1400.0).unwrap();
            assert!(
                (fit.a_mm_k_per_w - 6601.0).abs() / 6601.0 < 0.05,
                "seed {seed}: a = {}",
                fit.a_mm_k_per_w
            );
            assert!(
                (fit.b_j_per_mm_k - 6.51e-6).abs() / 6.51e-6 < 0.05,
                "seed {seed}: b = {}",
                fit.b_j_per_mm_k
            );
            r2s.push(fit.diagnostics.unwrap().r_squared);
        }
        r2s.sort_by(f64::total_cmp);
        let median = r2s[r2s.len() / 2];
        assert!(median >= 0.98, "median r^2 = {median}");
    }

    #[test]
    fn fit_rejects_degenerate_inputs() {
        let two = synthetic_points(6601.0, 6.51e-6, 1400.0, &[0.01, 0.02]);
        assert!(matches!(fit_envelope(&two, 1400.0), Err(EnvelopeError::TooFewPoints(2))));

        let repeated = synthetic_points(6601.0, 6.51e-6, 1400.0, &[0.01, 0.01, 0.01, 0.01]);
        assert!(matches!(fit_envelope(&repeated, 1400.0), Err(EnvelopeError::Degenerate(_))));
    }

    #[test]
    fn fit_is_scale_consistent() {
        // scaling all rho by c scales the fitted a by 1/c (T_fail held fixed)
        let t_ps = [0.004, 0.009, 0.017, 0.033, 0.064, 0.120];
        let points = synthetic_points(6601.0, 6.51e-6, 1400.0, &t_ps);
        let c = 3.0;
        let scaled: Vec<FailurePoint> = points
            .iter()
            .map(|p| FailurePoint::new(p.rho_w_per_mm * c, p.t_p_s).unwrap())
            .collect();
        let fit = fit_envelope(&scaled, 1400.0).unwrap();
        assert_relative_eq!(fit.a_mm_k_per_w, 6601.0 / c, max_relative = 1e-6);
        assert_relative_eq!(fit.time_constant_s(), 6601.0 * 6.51e-6, max_relative = 1e-6);
    }

    #[test]
    fn failure_point_csv_round_trip() {
        let mut points = synthetic_points(6601.0, 6.51e-6, 1400.0, &[0.005, 0.02, 0.08]);
        points[0].cavity_length_l_mm = Some(4.0);
        points[2].cavity_length_l_mm = Some(8.0);
        let mut buf = Vec::new();
        write_failure_points(&mut buf, &points).unwrap();
        let back = read_failure_points(buf.as_slice()).unwrap();
        assert_eq!(back, points);
    }

    #[test]
    fn failure_point_csv_rejects_bad_header() {
        let text = "rho,t\n0.5,0.01\n";
        assert!(read_failure_points(text.as_bytes()).is_err());
    }
}
