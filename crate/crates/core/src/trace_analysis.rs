//! Ingestion and reduction of measured or simulated time series: cyclic
//! force decomposition, magnitude spectra, peak statistics, endurance
//! summaries, and surface-temperature statistics.
//!
//! The on-disk format is a two-column CSV: optional `# key=value` metadata
//! comments, a `time_s,<quantity>_<unit>` header, then rows. Sampling must
//! be uniform; jitter beyond 1e-6 of the sample period is rejected on load
//! rather than silently resampled.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csvio;

/// Relative timing jitter tolerated when validating uniform sampling.
pub const MAX_SAMPLING_JITTER: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("sample period must be strictly positive, got {0}")]
    NonPositiveSamplePeriod(f64),
    #[error("trace must contain at least one sample")]
    Empty,
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("unit `{unit}` is not valid for quantity `{kind}`; expected one of {allowed:?}")]
    UnitMismatch {
        kind: &'static str,
        unit: String,
        allowed: &'static [&'static str],
    },
    #[error("expected a {expected} trace, got {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("unknown quantity column `{0}`; expected `<quantity>_<unit>`")]
    UnknownQuantity(String),
    #[error(transparent)]
    Csv(#[from] csvio::CsvError),
    #[error("row {row}: time {found_s} s deviates from the uniform grid value {expected_s} s")]
    NonUniformSampling {
        row: usize,
        expected_s: f64,
        found_s: f64,
    },
    #[error("trace too short: {reason}: need {required}, have {found}")]
    TooShort {
        reason: &'static str,
        required: usize,
        found: usize,
    },
    #[error("sample rate {found_hz} Hz is below the required {required_hz} Hz")]
    SampleRateTooLow { required_hz: f64, found_hz: f64 },
    #[error("window [{start_s}, {end_s}] s does not fit in a trace of {duration_s} s")]
    WindowOutOfRange {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error("no peaks above the prominence threshold")]
    NoPeaks,
    #[error("{0}")]
    Invalid(String),
}

/// What a trace measures. Determines which units are accepted and how the
/// CSV column is labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    Force,
    Displacement,
    ShuntVoltage,
    Temperature,
    Resistance,
    Pressure,
}

impl QuantityKind {
    pub fn label(&self) -> &'static str {
        match self {
            QuantityKind::Force => "force",
            QuantityKind::Displacement => "displacement",
            QuantityKind::ShuntVoltage => "shunt_voltage",
            QuantityKind::Temperature => "temperature",
            QuantityKind::Resistance => "resistance",
            QuantityKind::Pressure => "pressure",
        }
    }

    pub fn allowed_units(&self) -> &'static [&'static str] {
        match self {
            QuantityKind::Force => &["N"],
            QuantityKind::Displacement => &["mm"],
            QuantityKind::ShuntVoltage => &["V"],
            QuantityKind::Temperature => &["K", "degC"],
            QuantityKind::Resistance => &["ohm"],
            QuantityKind::Pressure => &["Pa"],
        }
    }

    fn from_label(label: &str) -> Option<Self> {
        match label {
            "force" => Some(QuantityKind::Force),
            "displacement" => Some(QuantityKind::Displacement),
            "shunt_voltage" => Some(QuantityKind::ShuntVoltage),
            "temperature" => Some(QuantityKind::Temperature),
            "resistance" => Some(QuantityKind::Resistance),
            "pressure" => Some(QuantityKind::Pressure),
            _ => None,
        }
    }
}

/// A uniformly sampled time series of one physical quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub kind: QuantityKind,
    pub unit: String,
    pub sample_period_s: f64,
    pub samples: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl Trace {
    pub fn new(
        kind: QuantityKind,
        unit: &str,
        sample_period_s: f64,
        samples: Vec<f64>,
    ) -> Result<Self, TraceError> {
        if !(sample_period_s.is_finite() && sample_period_s > 0.0) {
            return Err(TraceError::NonPositiveSamplePeriod(sample_period_s));
        }
        if samples.is_empty() {
            return Err(TraceError::Empty);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(TraceError::NonFiniteSample { index });
        }
        if !kind.allowed_units().contains(&unit) {
            return Err(TraceError::UnitMismatch {
                kind: kind.label(),
                unit: unit.to_string(),
                allowed: kind.allowed_units(),
            });
        }
        Ok(Self {
            kind,
            unit: unit.to_string(),
            sample_period_s,
            samples,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, String>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of the last sample: `(n - 1) * dt`.
    pub fn duration_s(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.sample_period_s
    }

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.sample_period_s
    }

    pub fn time_at(&self, index: usize) -> f64 {
        index as f64 * self.sample_period_s
    }

    pub fn expect_kind(&self, expected: QuantityKind) -> Result<(), TraceError> {
        if self.kind != expected {
            return Err(TraceError::KindMismatch {
                expected: expected.label(),
                found: self.kind.label(),
            });
        }
        Ok(())
    }

    /// Inclusive sample range covered by a time window, validated against
    /// the trace bounds.
    pub fn window_indices(&self, window: Window) -> Result<(usize, usize), TraceError> {
        let duration = self.duration_s();
        if !(window.start_s >= 0.0
            && window.end_s > window.start_s
            && window.end_s <= duration * (1.0 + 1e-9) + self.sample_period_s * 1e-9)
        {
            return Err(TraceError::WindowOutOfRange {
                start_s: window.start_s,
                end_s: window.end_s,
                duration_s: duration,
            });
        }
        let dt = self.sample_period_s;
        let start = (window.start_s / dt - 1e-9).ceil().max(0.0) as usize;
        let end = ((window.end_s / dt + 1e-9).floor() as usize).min(self.samples.len() - 1);
        if start > end {
            return Err(TraceError::WindowOutOfRange {
                start_s: window.start_s,
                end_s: window.end_s,
                duration_s: duration,
            });
        }
        Ok((start, end))
    }

    /// Parse the CSV trace format. Requires at least two rows so the sample
    /// period can be inferred; validates the uniform time grid.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TraceError> {
        let table = csvio::read_table(reader)?;
        if table.header.len() != 2 || table.header[0] != "time_s" {
            return Err(TraceError::UnknownQuantity(table.header.join(",")));
        }
        let column = &table.header[1];
        let (label, unit) = column
            .rsplit_once('_')
            .ok_or_else(|| TraceError::UnknownQuantity(column.clone()))?;
        let kind = QuantityKind::from_label(label)
            .ok_or_else(|| TraceError::UnknownQuantity(column.clone()))?;
        if table.rows.len() < 2 {
            return Err(TraceError::TooShort {
                reason: "inferring the sample period",
                required: 2,
                found: table.rows.len(),
            });
        }
        let mut times = Vec::with_capacity(table.rows.len());
        let mut samples = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            times.push(csvio::parse_field(row, 0, i)?);
            samples.push(csvio::parse_field(row, 1, i)?);
        }
        let n = times.len();
        let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TraceError::NonPositiveSamplePeriod(dt));
        }
        for (i, &t) in times.iter().enumerate() {
            let expected = times[0] + i as f64 * dt;
            if (t - expected).abs() > MAX_SAMPLING_JITTER * dt {
                return Err(TraceError::NonUniformSampling {
                    row: i + 1,
                    expected_s: expected,
                    found_s: t,
                });
            }
        }
        Ok(Trace::new(kind, unit, dt, samples)?.with_metadata(table.metadata))
    }

    /// Emit the CSV trace format: sorted metadata comments, header, rows.
    pub fn write_csv<W: Write>(&self, writer: &mut W) -> std::io::Result<()> {
        csvio::write_metadata(writer, &self.metadata)?;
        writeln!(writer, "time_s,{}_{}", self.kind.label(), self.unit)?;
        for (i, sample) in self.samples.iter().enumerate() {
            writeln!(writer, "{},{}", self.time_at(i), sample)?;
        }
        Ok(())
    }
}

/// Half-open time interval within a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start_s: f64,
    pub end_s: f64,
}

impl Window {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Self { start_s, end_s }
    }
}

/// Split of a cyclic response into a slowly varying offset and a
/// pulse-synchronous peak-to-peak component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicDecomposition {
    /// Offset component: mean over the settled window, in trace units.
    pub f0: f64,
    /// Pulse-synchronous component: mean per-period (max - min).
    pub fpp: f64,
    /// Settled window actually analyzed.
    pub window_start_s: f64,
    pub window_end_s: f64,
    /// Complete drive periods inside the window.
    pub periods_used: usize,
}

/// Decompose a settled cyclic trace driven at `drive_rate_hz`.
///
/// Everything after `settle_periods` periods is the analysis window: `f0` is
/// its mean, `fpp` the mean over complete periods of (per-period max minus
/// per-period min). Per-period extremes are robust against the slow offset
/// drift that heat accumulation produces.
pub fn decompose_cyclic(
    trace: &Trace,
    drive_rate_hz: f64,
    settle_periods: usize,
) -> Result<CyclicDecomposition, TraceError> {
    if !(drive_rate_hz.is_finite() && drive_rate_hz > 0.0) {
        return Err(TraceError::Invalid(format!(
            "drive rate must be strictly positive, got {drive_rate_hz}"
        )));
    }
    let dt = trace.sample_period_s;
    let period_s = 1.0 / drive_rate_hz;
    let required_rate = 20.0 * drive_rate_hz;
    if trace.sample_rate_hz() < required_rate * (1.0 - 1e-9) {
        return Err(TraceError::SampleRateTooLow {
            required_hz: required_rate,
            found_hz: trace.sample_rate_hz(),
        });
    }
    let n = trace.len();
    let required_samples = ((settle_periods + 3) as f64 * period_s / dt).ceil() as usize;
    if n < required_samples {
        return Err(TraceError::TooShort {
            reason: "settle + 3 drive periods",
            required: required_samples,
            found: n,
        });
    }

    let start = ((settle_periods as f64 * period_s) / dt - 1e-9).ceil() as usize;
    let window = &trace.samples[start..];
    let f0 = window.iter().sum::<f64>() / window.len() as f64;

    let periods = ((window.len() as f64 * dt) / period_s + 1e-9).floor() as usize;
    if periods == 0 {
        return Err(TraceError::TooShort {
            reason: "one complete period after settling",
            required: start + (period_s / dt).ceil() as usize,
            found: n,
        });
    }
    let mut fpp_sum = 0.0;
    for k in 0..periods {
        let lo = ((k as f64 * period_s) / dt + 1e-9).floor() as usize;
        let hi = ((((k + 1) as f64) * period_s) / dt + 1e-9).floor() as usize;
        let hi = hi.min(window.len());
        let seg = &window[lo..hi];
        let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = seg.iter().copied().fold(f64::INFINITY, f64::min);
        fpp_sum += max - min;
    }

    Ok(CyclicDecomposition {
        f0,
        fpp: fpp_sum / periods as f64,
        window_start_s: start as f64 * dt,
        window_end_s: trace.duration_s(),
        periods_used: periods,
    })
}

/// One-sided discrete Fourier magnitude spectrum.
///
/// Magnitudes are `|X_k| / N`. Writing `c_k = 1` for the DC and Nyquist bins
/// and `c_k = 2` elsewhere, Parseval's identity for the transformed signal
/// reads `sum_n x_n^2 = N * sum_k c_k m_k^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Bin spacing `1 / (N dt)` in Hz.
    pub bin_hz: f64,
    pub frequencies_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    /// Index of the largest-magnitude bin.
    pub fn dominant_bin(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.magnitudes.iter().enumerate() {
            if m > self.magnitudes[best] {
                best = i;
            }
        }
        best
    }

    /// Magnitude at the bin closest to `freq_hz`.
    pub fn magnitude_near(&self, freq_hz: f64) -> f64 {
        let idx = (freq_hz / self.bin_hz).round() as usize;
        self.magnitudes[idx.min(self.magnitudes.len() - 1)]
    }
}

/// Magnitude spectrum of the detrended and optionally high-pass-filtered
/// signal. `highpass_cutoff_hz = None` disables the filter; the mean is
/// always removed before the transform.
pub fn magnitude_spectrum(
    trace: &Trace,
    highpass_cutoff_hz: Option<f64>,
) -> Result<Spectrum, TraceError> {
    let n = trace.len();
    if n < 64 {
        return Err(TraceError::TooShort {
            reason: "spectrum estimation",
            required: 64,
            found: n,
        });
    }
    let mean = trace.samples.iter().sum::<f64>() / n as f64;
    let mut signal: Vec<f64> = trace.samples.iter().map(|s| s - mean).collect();
    if let Some(cutoff) = highpass_cutoff_hz {
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(TraceError::Invalid(format!(
                "high-pass cutoff must be strictly positive, got {cutoff}"
            )));
        }
        highpass_forward_backward(&mut signal, cutoff, trace.sample_period_s);
    }

    let mut buffer: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);

    let bins = n / 2 + 1;
    let bin_hz = 1.0 / (n as f64 * trace.sample_period_s);
    let frequencies_hz = (0..bins).map(|k| k as f64 * bin_hz).collect();
    let magnitudes = buffer[..bins].iter().map(|c| c.norm() / n as f64).collect();
    Ok(Spectrum {
        bin_hz,
        frequencies_hz,
        magnitudes,
    })
}

/// Zero-phase single-pole high-pass: one forward and one backward pass of
/// `y[i] = alpha (y[i-1] + x[i] - x[i-1])` with `alpha = rc / (rc + dt)`.
fn highpass_forward_backward(signal: &mut [f64], cutoff_hz: f64, dt: f64) {
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
    let alpha = rc / (rc + dt);
    let n = signal.len();
    let mut prev_in = signal[0];
    let mut prev_out = signal[0];
    for x in signal.iter_mut().skip(1) {
        let input = *x;
        let out = alpha * (prev_out + input - prev_in);
        prev_in = input;
        prev_out = out;
        *x = out;
    }
    let mut prev_in = signal[n - 1];
    let mut prev_out = signal[n - 1];
    for x in signal.iter_mut().rev().skip(1) {
        let input = *x;
        let out = alpha * (prev_out + input - prev_in);
        prev_in = input;
        prev_out = out;
        *x = out;
    }
}

/// Peak-detection configuration. The prominence threshold is a fraction of
/// the settled peak-to-peak amplitude (the max - min of the last half of the
/// trace) unless an absolute threshold is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    pub prominence_fraction: f64,
    pub absolute_prominence: Option<f64>,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            prominence_fraction: 0.10,
            absolute_prominence: None,
        }
    }
}

/// Indices of local maxima whose prominence (height above the higher of the
/// two neighboring inter-peak minima) clears the threshold. Plateaus count
/// once, at their first sample. Deterministic: a given trace always yields
/// the same indices.
pub fn detect_peaks(trace: &Trace, config: &PeakConfig) -> Result<Vec<usize>, TraceError> {
    let s = &trace.samples;
    let n = s.len();
    let mut candidates = Vec::new();
    let mut i = 1;
    while i < n {
        if s[i] > s[i - 1] {
            let plateau_start = i;
            let mut j = i;
            while j + 1 < n && s[j + 1] == s[i] {
                j += 1;
            }
            if j + 1 < n && s[j + 1] < s[i] {
                candidates.push(plateau_start);
                i = j + 1;
                continue;
            }
            i = j + 1;
            continue;
        }
        i += 1;
    }
    if candidates.is_empty() {
        return Err(TraceError::NoPeaks);
    }

    let threshold = match config.absolute_prominence {
        Some(abs) => abs,
        None => {
            let tail = &s[n / 2..];
            let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
            config.prominence_fraction * (max - min)
        }
    };

    let mut peaks = Vec::with_capacity(candidates.len());
    for (k, &p) in candidates.iter().enumerate() {
        let left_bound = if k == 0 { 0 } else { candidates[k - 1] };
        let right_bound = if k + 1 < candidates.len() {
            candidates[k + 1]
        } else {
            n - 1
        };
        let left_min = s[left_bound..=p].iter().copied().fold(f64::INFINITY, f64::min);
        let right_min = s[p..=right_bound].iter().copied().fold(f64::INFINITY, f64::min);
        let prominence = s[p] - left_min.max(right_min);
        if prominence >= threshold {
            peaks.push(p);
        }
    }
    if peaks.is_empty() {
        return Err(TraceError::NoPeaks);
    }
    Ok(peaks)
}

/// Mean peak value per consecutive group of `group_size` peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakGroup {
    pub group_index: usize,
    pub mean_peak: f64,
}

/// Detect peaks, group them in order, and return per-group means. A trailing
/// group with fewer than `group_size` peaks is dropped.
pub fn peak_stats(
    trace: &Trace,
    group_size: usize,
    config: &PeakConfig,
) -> Result<Vec<PeakGroup>, TraceError> {
    if group_size == 0 {
        return Err(TraceError::Invalid("group size must be at least 1".into()));
    }
    let peaks = detect_peaks(trace, config)?;
    let groups = peaks
        .chunks_exact(group_size)
        .enumerate()
        .map(|(group_index, chunk)| {
            let mean = chunk.iter().map(|&i| trace.samples[i]).sum::<f64>() / group_size as f64;
            PeakGroup {
                group_index,
                mean_peak: mean,
            }
        })
        .collect::<Vec<_>>();
    if groups.is_empty() {
        return Err(TraceError::TooShort {
            reason: "one complete peak group",
            required: group_size,
            found: peaks.len(),
        });
    }
    Ok(groups)
}

/// Maximum temperature rise over a window: max sample minus the window's
/// first sample. Only meaningful for temperature traces.
pub fn surface_temp_stats(trace: &Trace, window: Window) -> Result<f64, TraceError> {
    trace.expect_kind(QuantityKind::Temperature)?;
    let (start, end) = trace.window_indices(window)?;
    let seg = &trace.samples[start..=end];
    let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max - seg[0])
}
