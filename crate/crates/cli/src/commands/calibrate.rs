//! `tpp calibrate`: cooling-constant fit, shunt inversion, and gain
//! extraction.

use std::path::{Path, PathBuf};

use clap::Subcommand;
use serde::Serialize;

use tpp_core::calibration::{
    calibrate_gains, fit_tau, wire_resistance_trace, wire_temp_from_resistance, PeakObservation,
    ShuntCircuit, DEFAULT_SMOOTHING_WINDOW,
};
use tpp_core::params::ParameterFile;
use tpp_core::trace_analysis::{Trace, Window};

use crate::config::ProjectConfig;
use crate::util::{parse_duration_s, read_to_string, to_pretty_json, write_file, CliError, CliResult};

#[derive(Debug, Subcommand)]
pub enum CalibrateCmd {
    /// Fit the cooling time constant to a decaying trace window.
    Tau {
        /// Trace CSV (any quantity with an exponential tail).
        #[arg(long)]
        trace: PathBuf,
        /// Window start (after the pulse end), e.g. `16ms`.
        #[arg(long)]
        window_start: String,
        /// Window end, e.g. `1.1s`.
        #[arg(long)]
        window_end: String,
    },
    /// Invert a shunt-voltage trace to wire resistance (and temperature if a
    /// resistivity table is configured).
    Shunt {
        /// Shunt-voltage trace CSV.
        #[arg(long)]
        trace: PathBuf,
        /// Constant supply voltage V_+.
        #[arg(long)]
        v_plus: f64,
        #[arg(long, default_value_t = 0.22)]
        r_shunt: f64,
        #[arg(long, default_value_t = 2.1)]
        r_circuit: f64,
        /// Resistivity table CSV (overrides the config path).
        #[arg(long)]
        table: Option<PathBuf>,
        /// Moving-average width in samples (1 disables smoothing).
        #[arg(long, default_value_t = DEFAULT_SMOOTHING_WINDOW)]
        smoothing: usize,
    },
    /// Derive chain gains from a measured single-pulse peak tuple.
    Gains {
        #[arg(long)]
        geom: String,
        /// Peak wire temperature, absolute degC.
        #[arg(long)]
        t_wire_peak: f64,
        /// Peak air temperature, absolute degC.
        #[arg(long)]
        t_air_peak: f64,
        /// Peak membrane force, N.
        #[arg(long)]
        force_peak: f64,
        /// Peak free displacement, mm.
        #[arg(long)]
        displacement_peak: f64,
    },
}

#[derive(Serialize)]
struct TauSummary {
    trace: String,
    window_start_s: f64,
    window_end_s: f64,
    tau_s: f64,
    r_squared: f64,
}

#[derive(Serialize)]
struct ShuntSummary {
    trace: String,
    v_plus_v: f64,
    r_shunt_ohm: f64,
    r_circuit_ohm: f64,
    samples: usize,
    r_wire_initial_ohm: f64,
    r_wire_peak_ohm: f64,
    temperature_written: bool,
    clamped_low: usize,
    clamped_high: usize,
    peak_wire_temp_c: Option<f64>,
}

pub fn run(config: &ProjectConfig, out_dir: &Path, cmd: &CalibrateCmd) -> CliResult {
    match cmd {
        CalibrateCmd::Tau { trace, window_start, window_end } => {
            tau(out_dir, trace, window_start, window_end)
        }
        CalibrateCmd::Shunt { trace, v_plus, r_shunt, r_circuit, table, smoothing } => shunt(
            config,
            out_dir,
            trace,
            *v_plus,
            *r_shunt,
            *r_circuit,
            table.as_deref(),
            *smoothing,
        ),
        CalibrateCmd::Gains { geom, t_wire_peak, t_air_peak, force_peak, displacement_peak } => {
            gains(config, out_dir, geom, *t_wire_peak, *t_air_peak, *force_peak, *displacement_peak)
        }
    }
}

fn load_trace(path: &Path) -> CliResult<Trace> {
    let text = read_to_string(path)?;
    Trace::read_csv(text.as_bytes())
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn tau(out_dir: &Path, trace_path: &Path, window_start: &str, window_end: &str) -> CliResult {
    let trace = load_trace(trace_path)?;
    let window = Window::new(parse_duration_s(window_start)?, parse_duration_s(window_end)?);
    let fit = fit_tau(&trace, window).map_err(CliError::validation)?;

    let params = ParameterFile { envelope: None, tau: Some(fit), gains: None };
    write_file(out_dir.join("calibrate_tau.json").as_path(), params.to_json().as_bytes())?;

    let summary = TauSummary {
        trace: trace_path.display().to_string(),
        window_start_s: window.start_s,
        window_end_s: window.end_s,
        tau_s: fit.tau_s,
        r_squared: fit.r_squared,
    };
    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("calibrate_tau_summary.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn shunt(
    config: &ProjectConfig,
    out_dir: &Path,
    trace_path: &Path,
    v_plus: f64,
    r_shunt: f64,
    r_circuit: f64,
    table_path: Option<&Path>,
    smoothing: usize,
) -> CliResult {
    let shunt_trace = load_trace(trace_path)?;
    let circuit = ShuntCircuit::new(v_plus, r_shunt, r_circuit).map_err(CliError::validation)?;
    let r_trace = wire_resistance_trace(&shunt_trace, &circuit).map_err(CliError::validation)?;

    let mut buf = Vec::new();
    r_trace.write_csv(&mut buf).map_err(CliError::internal)?;
    write_file(out_dir.join("wire_resistance.csv").as_path(), &buf)?;

    let mut summary = ShuntSummary {
        trace: trace_path.display().to_string(),
        v_plus_v: v_plus,
        r_shunt_ohm: r_shunt,
        r_circuit_ohm: r_circuit,
        samples: r_trace.len(),
        r_wire_initial_ohm: r_trace.samples[0],
        r_wire_peak_ohm: r_trace.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        temperature_written: false,
        clamped_low: 0,
        clamped_high: 0,
        peak_wire_temp_c: None,
    };

    if let Some(table) = config.resistivity_table(table_path)? {
        let result =
            wire_temp_from_resistance(&r_trace, &table, smoothing).map_err(CliError::validation)?;
        if result.clamped() {
            eprintln!(
                "warning: {} sample(s) below and {} above the resistivity table range were clamped",
                result.clamped_low, result.clamped_high
            );
        }
        let mut buf = Vec::new();
        result.trace.write_csv(&mut buf).map_err(CliError::internal)?;
        write_file(out_dir.join("wire_temperature.csv").as_path(), &buf)?;
        summary.temperature_written = true;
        summary.clamped_low = result.clamped_low;
        summary.clamped_high = result.clamped_high;
        summary.peak_wire_temp_c =
            Some(result.trace.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("calibrate_shunt_summary.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

fn gains(
    config: &ProjectConfig,
    out_dir: &Path,
    geom: &str,
    t_wire_peak: f64,
    t_air_peak: f64,
    force_peak: f64,
    displacement_peak: f64,
) -> CliResult {
    let geometry = config.actuator_geometry(geom)?;
    let ambient = config.ambient_state()?;
    let observation = PeakObservation {
        t_wire_peak_c: t_wire_peak,
        t_air_peak_c: t_air_peak,
        force_peak_n: force_peak,
        displacement_peak_mm: displacement_peak,
    };
    let gains = calibrate_gains(&observation, &geometry, &ambient).map_err(CliError::validation)?;
    let params = ParameterFile { envelope: None, tau: None, gains: Some(gains) };
    let json = params.to_json();
    write_file(out_dir.join("calibrate_gains.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}
