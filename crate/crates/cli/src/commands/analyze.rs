//! `tpp analyze`: trace reduction — cyclic decomposition, spectra,
//! endurance grouping, surface-temperature statistics.

use std::path::{Path, PathBuf};

use clap::Subcommand;
use serde::Serialize;

use tpp_core::calibration::{linear_fit, FitSpace, RegressionFit};
use tpp_core::plot::SvgPlot;
use tpp_core::trace_analysis::{
    decompose_cyclic, magnitude_spectrum, peak_stats, surface_temp_stats, CyclicDecomposition,
    PeakConfig, PeakGroup, Trace, Window,
};

use crate::config::ProjectConfig;
use crate::util::{parse_duration_s, read_to_string, to_pretty_json, write_file, CliError, CliResult};

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Decompose cyclic traces into F0 and F_pp. With several trace/rate
    /// pairs, also fits the log-log F_pp(f) slope.
    Decompose {
        /// Trace CSV; repeatable, paired with --rate by position.
        #[arg(long, required = true)]
        trace: Vec<PathBuf>,
        /// Drive rate in Hz for the trace at the same position.
        #[arg(long, required = true)]
        rate: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        settle: usize,
    },
    /// Magnitude spectrum of a trace (detrended, optionally high-passed).
    Spectrum {
        #[arg(long)]
        trace: PathBuf,
        /// High-pass cutoff in Hz (overrides --rate).
        #[arg(long)]
        highpass: Option<f64>,
        /// Drive rate in Hz; the default cutoff is rate / 2.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Group peak values and report per-group means (endurance reduction).
    Endurance {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 90)]
        group_size: usize,
        /// Prominence threshold as a fraction of the settled peak-to-peak.
        #[arg(long, default_value_t = 0.10)]
        prominence: f64,
    },
    /// Maximum temperature rise over a window.
    SurfaceTemp {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        window_start: String,
        #[arg(long)]
        window_end: String,
    },
}

#[derive(Serialize)]
struct DecomposeEntry {
    trace: String,
    rate_hz: f64,
    decomposition: CyclicDecomposition,
}

#[derive(Serialize)]
struct DecomposeSummary {
    settle_periods: usize,
    entries: Vec<DecomposeEntry>,
    /// Log-log fit of F_pp against rate; present with 2+ traces.
    #[serde(skip_serializing_if = "Option::is_none")]
    fpp_rate_fit: Option<RegressionFit>,
}

#[derive(Serialize)]
struct SpectrumSummary {
    trace: String,
    samples: usize,
    bin_hz: f64,
    highpass_cutoff_hz: Option<f64>,
    dominant_frequency_hz: f64,
    dominant_magnitude: f64,
}

#[derive(Serialize)]
struct EnduranceSummary {
    trace: String,
    group_size: usize,
    groups: usize,
    global_mean_peak: f64,
    max_group_deviation: f64,
    group_means: Vec<PeakGroup>,
}

#[derive(Serialize)]
struct SurfaceTempSummary {
    trace: String,
    window_start_s: f64,
    window_end_s: f64,
    delta_t_surf_k: f64,
}

pub fn run(_config: &ProjectConfig, out_dir: &Path, cmd: &AnalyzeCmd) -> CliResult {
    match cmd {
        AnalyzeCmd::Decompose { trace, rate, settle } => decompose(out_dir, trace, rate, *settle),
        AnalyzeCmd::Spectrum { trace, highpass, rate } => spectrum(out_dir, trace, *highpass, *rate),
        AnalyzeCmd::Endurance { trace, group_size, prominence } => {
            endurance(out_dir, trace, *group_size, *prominence)
        }
        AnalyzeCmd::SurfaceTemp { trace, window_start, window_end } => {
            surface_temp(out_dir, trace, window_start, window_end)
        }
    }
}

fn load_trace(path: &Path) -> CliResult<Trace> {
    let text = read_to_string(path)?;
    Trace::read_csv(text.as_bytes())
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn decompose(out_dir: &Path, traces: &[PathBuf], rates: &[f64], settle: usize) -> CliResult {
    if traces.len() != rates.len() {
        return Err(CliError::validation(format!(
            "{} --trace arguments but {} --rate arguments; they pair by position",
            traces.len(),
            rates.len()
        )));
    }
    let mut entries = Vec::with_capacity(traces.len());
    for (path, &rate) in traces.iter().zip(rates) {
        let trace = load_trace(path)?;
        let decomposition = decompose_cyclic(&trace, rate, settle)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        entries.push(DecomposeEntry {
            trace: path.display().to_string(),
            rate_hz: rate,
            decomposition,
        });
    }

    let fpp_rate_fit = if entries.len() >= 2 {
        let x: Vec<f64> = entries.iter().map(|e| e.rate_hz).collect();
        let y: Vec<f64> = entries.iter().map(|e| e.decomposition.fpp).collect();
        let fit = linear_fit(&x, &y, FitSpace::LogLog).map_err(CliError::validation)?;
        let points: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
        let line: Vec<(f64, f64)> = x.iter().map(|&f| (f, fit.evaluate(f))).collect();
        let svg = SvgPlot::new("F_pp vs pulse rate", "f (Hz)", "F_pp")
            .log_log()
            .scatter("measured", &points)
            .line(&format!("fit slope {:.3}", fit.slope), &line)
            .render();
        write_file(out_dir.join("fpp_vs_rate.svg").as_path(), svg.as_bytes())?;
        Some(fit)
    } else {
        None
    };

    let summary = DecomposeSummary { settle_periods: settle, entries, fpp_rate_fit };
    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("analyze_decompose.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

fn spectrum(out_dir: &Path, path: &Path, highpass: Option<f64>, rate: Option<f64>) -> CliResult {
    let trace = load_trace(path)?;
    let cutoff = highpass.or(rate.map(|r| r / 2.0));
    let spectrum = magnitude_spectrum(&trace, cutoff)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;

    let mut csv = String::from("freq_hz,magnitude\n");
    for (f, m) in spectrum.frequencies_hz.iter().zip(&spectrum.magnitudes) {
        csv.push_str(&format!("{f},{m}\n"));
    }
    write_file(out_dir.join("spectrum.csv").as_path(), csv.as_bytes())?;

    let points: Vec<(f64, f64)> = spectrum
        .frequencies_hz
        .iter()
        .copied()
        .zip(spectrum.magnitudes.iter().copied())
        .collect();
    let svg = SvgPlot::new("Magnitude spectrum", "frequency (Hz)", "magnitude")
        .line("spectrum", &points)
        .render();
    write_file(out_dir.join("analyze_spectrum.svg").as_path(), svg.as_bytes())?;

    let dominant = spectrum.dominant_bin();
    let summary = SpectrumSummary {
        trace: path.display().to_string(),
        samples: trace.len(),
        bin_hz: spectrum.bin_hz,
        highpass_cutoff_hz: cutoff,
        dominant_frequency_hz: spectrum.frequencies_hz[dominant],
        dominant_magnitude: spectrum.magnitudes[dominant],
    };
    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("analyze_spectrum.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

fn endurance(out_dir: &Path, path: &Path, group_size: usize, prominence: f64) -> CliResult {
    let trace = load_trace(path)?;
    let config = PeakConfig { prominence_fraction: prominence, absolute_prominence: None };
    let groups = peak_stats(&trace, group_size, &config)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;

    let global_mean = groups.iter().map(|g| g.mean_peak).sum::<f64>() / groups.len() as f64;
    let max_dev = groups
        .iter()
        .map(|g| (g.mean_peak - global_mean).abs() / global_mean)
        .fold(0.0, f64::max);

    let points: Vec<(f64, f64)> =
        groups.iter().map(|g| (g.group_index as f64, g.mean_peak)).collect();
    let svg = SvgPlot::new("Endurance group means", "group", "mean peak")
        .scatter("group means", &points)
        .render();
    write_file(out_dir.join("endurance_groups.svg").as_path(), svg.as_bytes())?;

    let summary = EnduranceSummary {
        trace: path.display().to_string(),
        group_size,
        groups: groups.len(),
        global_mean_peak: global_mean,
        max_group_deviation: max_dev,
        group_means: groups,
    };
    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("analyze_endurance.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

fn surface_temp(out_dir: &Path, path: &Path, window_start: &str, window_end: &str) -> CliResult {
    let trace = load_trace(path)?;
    let window = Window::new(parse_duration_s(window_start)?, parse_duration_s(window_end)?);
    let delta = surface_temp_stats(&trace, window)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let summary = SurfaceTempSummary {
        trace: path.display().to_string(),
        window_start_s: window.start_s,
        window_end_s: window.end_s,
        delta_t_surf_k: delta,
    };
    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("analyze_surface_temp.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}
