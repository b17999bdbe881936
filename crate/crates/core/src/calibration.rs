//! Parameter extraction from measurement traces: cooling time constant,
//! chain gains, wire temperature from shunt-voltage records, and the shared
//! regression utility.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_physics::{air_temp_from_force, ActuatorGeometry, AmbientState, ChainGains, PhysicsError};
use crate::csvio;
use crate::trace_analysis::{QuantityKind, Trace, TraceError, Window};

/// Relative gas-law violation tolerated when calibrating gains from a
/// measured peak tuple.
pub const GAIN_CONSISTENCY_TOLERANCE: f64 = 0.05;

/// Default moving-average width (samples) for the wire-temperature trace.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("fit window needs at least {required} samples, got {found}")]
    WindowTooShort { required: usize, found: usize },
    #[error("exponential fit failed: {0}")]
    FitFailure(String),
    #[error("shunt voltage sample {index} is {value} V; every sample must be strictly positive")]
    NonPositiveShuntSample { index: usize, value: f64 },
    #[error("resistivity table: {0}")]
    InvalidTable(String),
    #[error(
        "peak tuple violates the gas relation by {deviation:.1}%: stated air rise {stated_k:.2} K, \
         force implies {implied_k:.2} K"
    )]
    InconsistentPoint {
        stated_k: f64,
        implied_k: f64,
        deviation: f64,
    },
    #[error("air gain {0} is outside the physical range (0, 1)")]
    GainOutOfRange(f64),
    #[error("regression needs at least 2 distinct x values")]
    DegenerateRegression,
    #[error("log-log regression requires strictly positive data; offending value {value} at index {index}")]
    NonPositiveLogData { index: usize, value: f64 },
    #[error("x and y lengths differ: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
}

/// Series shunt measurement circuit: supply `V_+`, shunt `R_shunt`, and the
/// lumped remaining circuitry `R_circuit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShuntCircuit {
    pub v_plus_v: f64,
    pub r_shunt_ohm: f64,
    pub r_circuit_ohm: f64,
}

impl ShuntCircuit {
    pub fn new(v_plus_v: f64, r_shunt_ohm: f64, r_circuit_ohm: f64) -> Result<Self, CalibrationError> {
        for (name, value) in [
            ("v_plus_v", v_plus_v),
            ("r_shunt_ohm", r_shunt_ohm),
            ("r_circuit_ohm", r_circuit_ohm),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(CalibrationError::NonPositive { name, value });
            }
        }
        Ok(Self {
            v_plus_v,
            r_shunt_ohm,
            r_circuit_ohm,
        })
    }
}

/// Relative resistivity versus temperature, referenced to the first row.
///
/// Rows are normalized on construction so the first row's resistivity is
/// exactly 1; both columns must increase strictly, which is what makes the
/// inverse lookup well defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistivityTable {
    rows: Vec<(f64, f64)>,
}

/// Whether an inverse table lookup had to clamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clamp {
    None,
    Low,
    High,
}

impl ResistivityTable {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self, CalibrationError> {
        if rows.len() < 2 {
            return Err(CalibrationError::InvalidTable(format!(
                "need at least 2 rows, got {}",
                rows.len()
            )));
        }
        let first = rows[0].1;
        if !(first.is_finite() && first > 0.0) {
            return Err(CalibrationError::InvalidTable(
                "first-row resistivity must be strictly positive".into(),
            ));
        }
        let rows: Vec<(f64, f64)> = rows.into_iter().map(|(t, q)| (t, q / first)).collect();
        for pair in rows.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(CalibrationError::InvalidTable(
                    "temperatures must increase strictly".into(),
                ));
            }
            if pair[1].1 <= pair[0].1 {
                return Err(CalibrationError::InvalidTable(
                    "relative resistivity must increase strictly for the lookup to invert".into(),
                ));
            }
        }
        if rows.iter().any(|(t, q)| !t.is_finite() || !q.is_finite() || *q <= 0.0) {
            return Err(CalibrationError::InvalidTable(
                "all entries must be finite and resistivities positive".into(),
            ));
        }
        Ok(Self { rows })
    }

    /// Temperature of the first row, where the relative resistivity is 1.
    pub fn reference_temp_c(&self) -> f64 {
        self.rows[0].0
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    /// Forward interpolation: relative resistivity at a temperature
    /// (clamped at the table ends). Used to synthesize test data.
    pub fn ratio_for_temp(&self, temp_c: f64) -> f64 {
        let rows = &self.rows;
        if temp_c <= rows[0].0 {
            return rows[0].1;
        }
        if temp_c >= rows[rows.len() - 1].0 {
            return rows[rows.len() - 1].1;
        }
        let j = rows.partition_point(|(t, _)| *t <= temp_c) - 1;
        let (t0, q0) = rows[j];
        let (t1, q1) = rows[j + 1];
        q0 + (temp_c - t0) / (t1 - t0) * (q1 - q0)
    }

    fn temp_for_ratio(&self, ratio: f64) -> (f64, Clamp) {
        let rows = &self.rows;
        if ratio <= rows[0].1 {
            return (rows[0].0, if ratio < rows[0].1 { Clamp::Low } else { Clamp::None });
        }
        let last = rows[rows.len() - 1];
        if ratio >= last.1 {
            return (last.0, if ratio > last.1 { Clamp::High } else { Clamp::None });
        }
        let j = rows.partition_point(|(_, q)| *q <= ratio) - 1;
        let (t0, q0) = rows[j];
        let (t1, q1) = rows[j + 1];
        (t0 + (ratio - q0) / (q1 - q0) * (t1 - t0), Clamp::None)
    }

    /// Read the two-column `temp_C,rel_resistivity` CSV.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self, CalibrationError> {
        let table = csvio::read_table(reader).map_err(TraceError::Csv)?;
        csvio::expect_header(&table, &["temp_C", "rel_resistivity"]).map_err(TraceError::Csv)?;
        let mut rows = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            rows.push((
                csvio::parse_field(row, 0, i).map_err(TraceError::Csv)?,
                csvio::parse_field(row, 1, i).map_err(TraceError::Csv)?,
            ));
        }
        Self::new(rows)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: &mut W) -> std::io::Result<()> {
        writeln!(writer, "temp_C,rel_resistivity")?;
        for (t, q) in &self.rows {
            writeln!(writer, "{t},{q}")?;
        }
        Ok(())
    }
}

/// Result of the cooling-transient fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauFit {
    pub tau_s: f64,
    /// Coefficient of determination of the fitted exponential against the
    /// window samples, in the original signal space.
    pub r_squared: f64,
    pub amplitude: f64,
    pub offset: f64,
}

/// Fit `y(t) = A e^{-(t - t_start)/tau} + c` to a decaying window.
///
/// A log-linear fit of the baseline-subtracted signal seeds the time
/// constant; a deterministic variable-projection search (amplitude and
/// offset solved in closed form per candidate tau) then minimizes the
/// squared error in the original space, which keeps the estimate within the
/// stated tolerance at realistic noise levels where the plain log fit
/// degrades.
pub fn fit_tau(trace: &Trace, window: Window) -> Result<TauFit, CalibrationError> {
    let (start, end) = trace.window_indices(window)?;
    let n = end - start + 1;
    if n < 10 {
        return Err(CalibrationError::WindowTooShort { required: 10, found: n });
    }
    let dt = trace.sample_period_s;
    let y: Vec<f64> = trace.samples[start..=end].to_vec();
    let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();

    let tau0 = log_linear_seed(&t, &y)?;

    // golden-section refinement of the profiled SSE over tau
    let golden = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (tau0 / 3.0, tau0 * 3.0);
    let mut a = hi - golden * (hi - lo);
    let mut b = lo + golden * (hi - lo);
    let mut fa = profiled_sse(&t, &y, a).0;
    let mut fb = profiled_sse(&t, &y, b).0;
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - golden * (hi - lo);
            fa = profiled_sse(&t, &y, a).0;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + golden * (hi - lo);
            fb = profiled_sse(&t, &y, b).0;
        }
        if hi - lo < 1e-12 * tau0 {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let (sse, amplitude, offset) = profiled_sse(&t, &y, tau);
    if !(tau.is_finite() && tau > 0.0) || !amplitude.is_finite() {
        return Err(CalibrationError::FitFailure(format!("non-finite result tau = {tau}")));
    }
    if amplitude <= 0.0 {
        return Err(CalibrationError::FitFailure(
            "fitted amplitude is non-positive; the window does not decay".into(),
        ));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(CalibrationError::FitFailure("window is constant; no decay to fit".into()));
    }
    Ok(TauFit {
        tau_s: tau,
        r_squared: 1.0 - sse / ss_tot,
        amplitude,
        offset,
    })
}

/// Initial tau from ordinary least squares on the log of the
/// baseline-subtracted signal. The baseline is the window's tail mean and
/// samples below 10% of the initial amplitude are excluded from the log.
fn log_linear_seed(t: &[f64], y: &[f64]) -> Result<f64, CalibrationError> {
    let n = y.len();
    let tail = n.max(30) / 10;
    let baseline = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let head = (n / 20).max(1);
    let amp = y[..head]
        .iter()
        .map(|v| v - baseline)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(amp.is_finite() && amp > 0.0) {
        return Err(CalibrationError::FitFailure(
            "window does not decay toward its tail baseline".into(),
        ));
    }
    let floor = 0.1 * amp;
    let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (&ti, &yi) in t.iter().zip(y) {
        let z = yi - baseline;
        if z > floor {
            let lz = z.ln();
            sx += ti;
            sy += lz;
            sxx += ti * ti;
            sxy += ti * lz;
            m += 1;
        }
    }
    if m < 2 {
        return Err(CalibrationError::FitFailure(
            "fewer than 2 samples above the log-fit floor".into(),
        ));
    }
    let det = m as f64 * sxx - sx * sx;
    if det <= 0.0 {
        return Err(CalibrationError::FitFailure("degenerate time axis".into()));
    }
    let slope = (m as f64 * sxy - sx * sy) / det;
    if slope >= 0.0 {
        return Err(CalibrationError::FitFailure(format!(
            "log slope {slope} is non-negative; the window does not decay"
        )));
    }
    Ok(-1.0 / slope)
}

/// SSE of the best `A e^{-t/tau} + c` for a fixed tau, with (A, c) from the
/// 2x2 normal equations.
fn profiled_sse(t: &[f64], y: &[f64], tau: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mut s_ee, mut s_e, mut s_ey, mut s_y) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-ti / tau).exp();
        s_ee += e * e;
        s_e += e;
        s_ey += e * yi;
        s_y += yi;
    }
    let det = s_ee * n - s_e * s_e;
    if det.abs() < 1e-300 {
        return (f64::INFINITY, 0.0, 0.0);
    }
    let amplitude = (n * s_ey - s_e * s_y) / det;
    let offset = (s_ee * s_y - s_e * s_ey) / det;
    let mut sse = 0.0;
    for (&ti, &yi) in t.iter().zip(y) {
        let r = yi - (amplitude * (-ti / tau).exp() + offset);
        sse += r * r;
    }
    (sse, amplitude, offset)
}

/// Invert the voltage divider sample by sample:
/// `R_tot = V_+ R_shunt / V_shunt`, then `R_wire = R_tot - R_shunt - R_circuit`.
pub fn wire_resistance_trace(
    shunt_trace: &Trace,
    circuit: &ShuntCircuit,
) -> Result<Trace, CalibrationError> {
    shunt_trace.expect_kind(QuantityKind::ShuntVoltage)?;
    let mut samples = Vec::with_capacity(shunt_trace.len());
    for (index, &v) in shunt_trace.samples.iter().enumerate() {
        if v <= 0.0 {
            return Err(CalibrationError::NonPositiveShuntSample { index, value: v });
        }
        let r_tot = circuit.v_plus_v * circuit.r_shunt_ohm / v;
        samples.push(r_tot - circuit.r_shunt_ohm - circuit.r_circuit_ohm);
    }
    Ok(
        Trace::new(QuantityKind::Resistance, "ohm", shunt_trace.sample_period_s, samples)?
            .with_metadata(shunt_trace.metadata.clone()),
    )
}

/// Wire-temperature trace plus clamp accounting from the inverse table
/// lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct WireTempTrace {
    pub trace: Trace,
    /// Samples whose resistivity ratio fell below the table range.
    pub clamped_low: usize,
    /// Samples whose ratio exceeded the table range (melting-adjacent; the
    /// table is deliberately not extrapolated there).
    pub clamped_high: usize,
}

impl WireTempTrace {
    pub fn clamped(&self) -> bool {
        self.clamped_low + self.clamped_high > 0
    }
}

/// Map a wire-resistance trace to temperature: the ratio `r(t) / r(0)` is
/// pushed through the inverse-interpolated table, then smoothed with a
/// centered moving average (`smoothing_window` samples, edges truncated,
/// width 1 disables smoothing).
pub fn wire_temp_from_resistance(
    r_trace: &Trace,
    table: &ResistivityTable,
    smoothing_window: usize,
) -> Result<WireTempTrace, CalibrationError> {
    r_trace.expect_kind(QuantityKind::Resistance)?;
    if smoothing_window == 0 {
        return Err(CalibrationError::NonPositive {
            name: "smoothing_window",
            value: 0.0,
        });
    }
    let r0 = r_trace.samples[0];
    if r0 <= 0.0 {
        return Err(CalibrationError::NonPositive {
            name: "first resistance sample",
            value: r0,
        });
    }
    let mut clamped_low = 0;
    let mut clamped_high = 0;
    let mut temps = Vec::with_capacity(r_trace.len());
    for &r in &r_trace.samples {
        let (temp, clamp) = table.temp_for_ratio(r / r0);
        match clamp {
            Clamp::Low => clamped_low += 1,
            Clamp::High => clamped_high += 1,
            Clamp::None => {}
        }
        temps.push(temp);
    }
    let smoothed = moving_average(&temps, smoothing_window);
    Ok(WireTempTrace {
        trace: Trace::new(QuantityKind::Temperature, "degC", r_trace.sample_period_s, smoothed)?
            .with_metadata(r_trace.metadata.clone()),
        clamped_low,
        clamped_high,
    })
}

/// Centered moving average with truncated edges.
fn moving_average(samples: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return samples.to_vec();
    }
    let half = window / 2;
    let n = samples.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            samples[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Measured single-pulse peak tuple used to calibrate the chain gains.
/// Temperatures are absolute degC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakObservation {
    pub t_wire_peak_c: f64,
    pub t_air_peak_c: f64,
    pub force_peak_n: f64,
    pub displacement_peak_mm: f64,
}

/// Derive chain gains from one peak tuple: `air_gain = dT_air / dT_wire`,
/// `compliance = z / F`. The stated air rise must agree with the rise the
/// gas relation implies from the force to within
/// [`GAIN_CONSISTENCY_TOLERANCE`], otherwise the point is flagged.
pub fn calibrate_gains(
    point: &PeakObservation,
    geom: &ActuatorGeometry,
    ambient: &AmbientState,
) -> Result<ChainGains, CalibrationError> {
    let t0_c = ambient.t0_c();
    let wire_rise = point.t_wire_peak_c - t0_c;
    let air_rise = point.t_air_peak_c - t0_c;
    for (name, value) in [
        ("wire temperature rise", wire_rise),
        ("air temperature rise", air_rise),
        ("force peak", point.force_peak_n),
        ("displacement peak", point.displacement_peak_mm),
    ] {
        if !value.is_finite() || value <= 0.0 {
            return Err(CalibrationError::NonPositive { name, value });
        }
    }

    let implied_air_k = air_temp_from_force(point.force_peak_n, geom, ambient)?;
    let implied_rise = implied_air_k - ambient.t0_k;
    let deviation = (air_rise - implied_rise).abs() / implied_rise;
    if deviation > GAIN_CONSISTENCY_TOLERANCE {
        return Err(CalibrationError::InconsistentPoint {
            stated_k: air_rise,
            implied_k: implied_rise,
            deviation: deviation * 100.0,
        });
    }

    let air_gain = air_rise / wire_rise;
    if air_gain >= 1.0 {
        return Err(CalibrationError::GainOutOfRange(air_gain));
    }
    Ok(ChainGains::new(air_gain, point.displacement_peak_mm / point.force_peak_n)?)
}

/// Regression space marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSpace {
    Linear,
    LogLog,
}

/// Ordinary least-squares line fit in the chosen space. For log-log the
/// slope/intercept describe `log10(y) = slope * log10(x) + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub space: FitSpace,
}

impl RegressionFit {
    /// Evaluate the fitted line at `x` in the original coordinates.
    pub fn evaluate(&self, x: f64) -> f64 {
        match self.space {
            FitSpace::Linear => self.slope * x + self.intercept,
            FitSpace::LogLog => 10f64.powf(self.slope * x.log10() + self.intercept),
        }
    }
}

/// Least squares in linear or log10-log10 space. Constant `y` over varying
/// `x` fits exactly with zero slope; r-squared is 1 by convention for zero
/// residual on zero variance.
pub fn linear_fit(x: &[f64], y: &[f64], space: FitSpace) -> Result<RegressionFit, CalibrationError> {
    if x.len() != y.len() {
        return Err(CalibrationError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(CalibrationError::DegenerateRegression);
    }
    let (tx, ty): (Vec<f64>, Vec<f64>) = match space {
        FitSpace::Linear => (x.to_vec(), y.to_vec()),
        FitSpace::LogLog => {
            for (index, &v) in x.iter().chain(y.iter()).enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CalibrationError::NonPositiveLogData {
                        index: index % x.len(),
                        value: v,
                    });
                }
            }
            (
                x.iter().map(|v| v.log10()).collect(),
                y.iter().map(|v| v.log10()).collect(),
            )
        }
    };
    let n = tx.len() as f64;
    let mean_x = tx.iter().sum::<f64>() / n;
    let mean_y = ty.iter().sum::<f64>() / n;
    let sxx: f64 = tx.iter().map(|v| (v - mean_x) * (v - mean_x)).sum();
    if sxx == 0.0 {
        return Err(CalibrationError::DegenerateRegression);
    }
    let sxy: f64 = tx.iter().zip(&ty).map(|(&a, &b)| (a - mean_x) * (b - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = tx
        .iter()
        .zip(&ty)
        .map(|(&a, &b)| b - (slope * a + intercept))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ty.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        residuals,
        space,
    })
}
