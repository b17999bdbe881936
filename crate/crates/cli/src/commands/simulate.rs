//! `tpp simulate`: single-pulse forward simulation with the safety gate.

use std::collections::BTreeMap;
use std::path::Path;

use clap::Args;
use serde::Serialize;

use tpp_core::core_physics::{electrical_power, power_per_length, ElectricalDrive};
use tpp_core::envelope::{is_safe, SafetyReport};
use tpp_core::plot::SvgPlot;
use tpp_core::thermal_sim::{simulate, PulseSchedule, SimTrace};
use tpp_core::trace_analysis::Trace;

use crate::config::ProjectConfig;
use crate::util::{parse_duration_s, to_pretty_json, write_file, CliError, CliResult};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Geometry preset name from the config.
    #[arg(long)]
    pub geom: String,
    /// Drive power in watts (exclusive with --voltage/--rho).
    #[arg(long)]
    pub power: Option<f64>,
    /// Drive voltage in volts; requires --resistance.
    #[arg(long)]
    pub voltage: Option<f64>,
    /// Wire resistance in ohms, used with --voltage.
    #[arg(long)]
    pub resistance: Option<f64>,
    /// Drive intensity in W/mm of wire (exclusive with --power/--voltage).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Pulse duration, e.g. `75ms`.
    #[arg(long)]
    pub tp: String,
    /// Post-pulse observation window in cooling time constants.
    #[arg(long, default_value_t = 5.0)]
    pub cooldown_taus: f64,
    /// Sample period (default: tp / 512, keeping the pulse edge on-grid).
    #[arg(long)]
    pub sample_period: Option<String>,
    /// Safety margin override (default: config safety_margin).
    #[arg(long)]
    pub margin: Option<f64>,
    /// Run even if the drive violates the envelope.
    #[arg(long)]
    pub allow_unsafe: bool,
}

#[derive(Serialize)]
struct SimulateSummary {
    geometry_preset: String,
    /// Report-only: cavity volume at the default layer-stack depth.
    cavity_volume_ul: f64,
    p_el_w: f64,
    rho_w_per_mm: f64,
    t_p_s: f64,
    sample_period_s: f64,
    t_end_s: f64,
    pulse_energy_j: f64,
    safety: SafetyReport,
    peak_force_n: f64,
    peak_displacement_mm: f64,
    peak_wire_temp_c: f64,
    peak_air_temp_k: f64,
    peak_time_s: f64,
    geometry_warnings: Vec<String>,
}

pub fn run(config: &ProjectConfig, out_dir: &Path, args: &SimulateArgs) -> CliResult {
    let geometry = config.actuator_geometry(&args.geom)?;
    let t_p_s = parse_duration_s(&args.tp)?;
    if t_p_s <= 0.0 {
        return Err(CliError::validation(format!("pulse duration {t_p_s} s must be positive")));
    }

    let p_el_w = match (args.power, args.voltage, args.rho) {
        (Some(p), None, None) => p,
        (None, Some(v), None) => {
            let resistance = args.resistance.ok_or_else(|| {
                CliError::validation("--voltage requires --resistance (wire resistance in ohms)")
            })?;
            let drive = ElectricalDrive::new(v, resistance).map_err(CliError::validation)?;
            electrical_power(&drive)
        }
        (None, None, Some(rho)) => rho * geometry.total_wire_length_mm(),
        _ => {
            return Err(CliError::validation(
                "specify exactly one of --power, --voltage (+ --resistance), or --rho",
            ))
        }
    };
    if !(p_el_w.is_finite() && p_el_w >= 0.0) {
        return Err(CliError::validation(format!("drive power {p_el_w} W must be non-negative")));
    }

    let rho = power_per_length(p_el_w, &geometry).map_err(CliError::validation)?;
    let margin = args.margin.unwrap_or(config.safety_margin);
    let fit = config.envelope_fit()?;
    let safety = is_safe(&fit, rho, t_p_s, margin).map_err(CliError::validation)?;
    if !safety.safe && !args.allow_unsafe {
        return Err(CliError::validation_with(
            format!(
                "drive is outside the envelope: rho = {:.4} W/mm at t_p = {} s exceeds {:.4} W/mm \
                 (margin {}); longest safe pulse {}; pass --allow-unsafe to simulate anyway",
                rho,
                t_p_s,
                (1.0 - margin) * safety.boundary_rho_w_per_mm,
                margin,
                safety
                    .max_safe_t_p_s
                    .map_or("does not exist".to_string(), |t| format!("is {t} s")),
            ),
            &safety,
        ));
    }

    let warnings = geometry.range_warnings();
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }

    let model = config.thermal_model(geometry)?;
    let sample_period_s = match &args.sample_period {
        Some(text) => parse_duration_s(text)?,
        None => t_p_s / 512.0,
    };
    let t_end_s = t_p_s + args.cooldown_taus.max(0.0) * model.tau_cool_s;
    let schedule = PulseSchedule::single_pulse(p_el_w, t_p_s).map_err(CliError::validation)?;
    let sim = simulate(&model, &schedule, t_end_s, sample_period_s).map_err(CliError::validation)?;

    write_channels(out_dir, &sim, &args.geom, p_el_w, t_p_s)?;
    write_file(out_dir.join("simulate_traces.svg").as_path(), plot(&sim).render().as_bytes())?;

    let peak_idx = (0..sim.len())
        .max_by(|&a, &b| sim.force_n[a].total_cmp(&sim.force_n[b]))
        .unwrap_or(0);
    let summary = SimulateSummary {
        geometry_preset: args.geom.clone(),
        cavity_volume_ul: geometry
            .cavity_volume_ul(tpp_core::core_physics::DEFAULT_CAVITY_DEPTH_MM),
        p_el_w,
        rho_w_per_mm: rho,
        t_p_s,
        sample_period_s,
        t_end_s,
        pulse_energy_j: p_el_w * t_p_s,
        safety,
        peak_force_n: sim.peak_force_n(),
        peak_displacement_mm: sim.displacement_mm[peak_idx],
        peak_wire_temp_c: sim.t_wire_rise_k[peak_idx] + model.ambient.t0_c(),
        peak_air_temp_k: sim.t_air_k[peak_idx],
        peak_time_s: sim.time_at(peak_idx),
        geometry_warnings: warnings,
    };
    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("simulate_summary.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

fn write_channels(
    out_dir: &Path,
    sim: &SimTrace,
    geom: &str,
    p_el_w: f64,
    t_p_s: f64,
) -> CliResult {
    let mut metadata = BTreeMap::new();
    metadata.insert("geometry_preset".to_string(), geom.to_string());
    metadata.insert("p_el_w".to_string(), p_el_w.to_string());
    metadata.insert("t_p_s".to_string(), t_p_s.to_string());
    let channels: [(&str, Trace); 5] = [
        ("simulate_force.csv", sim.force_trace()),
        ("simulate_displacement.csv", sim.displacement_trace()),
        ("simulate_wire_temp.csv", sim.wire_temp_trace()),
        ("simulate_air_temp.csv", sim.air_temp_trace()),
        ("simulate_pressure.csv", sim.pressure_trace()),
    ];
    for (name, trace) in channels {
        let trace = trace.with_metadata(metadata.clone());
        let mut buf = Vec::new();
        trace
            .write_csv(&mut buf)
            .map_err(|e| CliError::internal(format!("{name}: {e}")))?;
        write_file(out_dir.join(name).as_path(), &buf)?;
    }
    Ok(())
}

/// All four chain channels on one canvas, each normalized by its own peak so
/// the shared temporal profile is visible; the legend carries the peaks.
fn plot(sim: &SimTrace) -> SvgPlot {
    let time: Vec<f64> = (0..sim.len()).map(|i| sim.time_at(i)).collect();
    let mut plot = SvgPlot::new("Single-pulse response (normalized)", "time (s)", "channel / peak");
    let channels: [(&str, &str, &[f64]); 4] = [
        ("T_wire rise", "K", &sim.t_wire_rise_k),
        ("T_air", "K", &sim.t_air_k),
        ("force", "N", &sim.force_n),
        ("displacement", "mm", &sim.displacement_mm),
    ];
    for (name, unit, samples) in channels {
        let peak = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if peak.abs() > 0.0 { peak } else { 1.0 };
        let points: Vec<(f64, f64)> =
            time.iter().zip(samples).map(|(&t, &v)| (t, v / scale)).collect();
        plot = plot.line(&format!("{name} (peak {peak:.4} {unit})"), &points);
    }
    plot
}
