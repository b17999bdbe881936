//! Cross-module loops that tie the simulator, calibration, envelope, and
//! driver together through their file formats and each other's outputs.

use std::collections::BTreeMap;

use tpp_core::calibration::{calibrate_gains, fit_tau, PeakObservation};
use tpp_core::core_physics::{kelvin_to_celsius, ActuatorGeometry, AmbientState, ChainGains};
use tpp_core::driver_sim::{
    compile_pattern, simulate_pattern, us_to_seconds, Board, ChannelConfig, ChannelId, DriveLevel,
    ModuleConfig, ModuleKind, PatternCommand,
};
use tpp_core::envelope::{
    boundary_rho, fit_envelope, read_failure_points, write_failure_points, EnvelopeFit,
    FailurePoint,
};
use tpp_core::params::ParameterFile;
use tpp_core::thermal_sim::{
    simulate, PulseSchedule, PulseSegment, ThermalModel, DEFAULT_TAU_COOL_S,
};
use tpp_core::trace_analysis::{QuantityKind, Trace, Window};

fn geometry() -> ActuatorGeometry {
    ActuatorGeometry::new(8.0, 2.0, 6.0).unwrap()
}

fn model() -> ThermalModel {
    ThermalModel::from_envelope(
        &EnvelopeFit::reference(),
        geometry(),
        AmbientState::default(),
        ChainGains::default(),
        DEFAULT_TAU_COOL_S,
    )
    .unwrap()
}

#[test]
fn sim_channels_survive_the_csv_trace_format() {
    let schedule = PulseSchedule::single_pulse(4.8, 0.075).unwrap();
    let sim = simulate(&model(), &schedule, 0.5, 0.0005).unwrap();
    for trace in [
        sim.force_trace(),
        sim.displacement_trace(),
        sim.air_temp_trace(),
        sim.wire_temp_trace(),
        sim.pressure_trace(),
    ] {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = Trace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.kind, trace.kind);
        assert_eq!(back.unit, trace.unit);
        assert_eq!(back.len(), trace.len());
        for (a, b) in back.samples.iter().zip(&trace.samples) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn simulated_peaks_calibrate_back_to_the_model_gains() {
    let model = model();
    let schedule = PulseSchedule::single_pulse(4.8, 0.075).unwrap();
    let sim = simulate(&model, &schedule, 0.5, 0.075 / 600.0).unwrap();
    let peak = (0..sim.len())
        .max_by(|&a, &b| sim.force_n[a].total_cmp(&sim.force_n[b]))
        .unwrap();
    let observation = PeakObservation {
        t_wire_peak_c: sim.t_wire_rise_k[peak] + model.ambient.t0_c(),
        t_air_peak_c: kelvin_to_celsius(sim.t_air_k[peak]),
        force_peak_n: sim.force_n[peak],
        displacement_peak_mm: sim.displacement_mm[peak],
    };
    let gains = calibrate_gains(&observation, &model.geometry, &model.ambient).unwrap();
    assert!((gains.air_gain - model.gains.air_gain).abs() / model.gains.air_gain < 1e-9);
    assert!(
        (gains.compliance_mm_per_n - model.gains.compliance_mm_per_n).abs()
            / model.gains.compliance_mm_per_n
            < 1e-9
    );
}

#[test]
fn cooling_tail_of_simulated_displacement_fits_tau_cool() {
    let model = model();
    let schedule = PulseSchedule::single_pulse(4.8, 0.010).unwrap();
    let sim = simulate(&model, &schedule, 1.0, 0.0005).unwrap();
    let fit = fit_tau(&sim.displacement_trace(), Window::new(0.011, 0.9)).unwrap();
    assert!((fit.tau_s - model.tau_cool_s).abs() / model.tau_cool_s < 5e-3);
}

#[test]
fn failure_points_round_trip_through_csv_into_a_fit_and_params_file() {
    let generator = EnvelopeFit::reference();
    let mut points = Vec::new();
    for (i, &t_p) in [0.004, 0.008, 0.016, 0.032, 0.064].iter().enumerate() {
        let mut p = FailurePoint::new(boundary_rho(&generator, t_p).unwrap(), t_p).unwrap();
        p.cavity_length_l_mm = Some([4.0, 6.0, 8.0][i % 3]);
        points.push(p);
    }
    let mut csv = Vec::new();
    write_failure_points(&mut csv, &points).unwrap();
    let loaded = read_failure_points(csv.as_slice()).unwrap();
    let fit = fit_envelope(&loaded, 1400.0).unwrap();
    assert!((fit.a_mm_k_per_w - generator.a_mm_k_per_w).abs() / generator.a_mm_k_per_w < 1e-6);

    let file = ParameterFile { envelope: Some(fit), tau: None, gains: None };
    let json = file.to_json();
    let back = ParameterFile::from_json(&json).unwrap();
    let restored = back.envelope.unwrap();
    assert_eq!(restored.a_mm_k_per_w, file.envelope.as_ref().unwrap().a_mm_k_per_w);
}

#[test]
fn forty_channel_pattern_matches_single_channel_references_bitwise() {
    let modules: Vec<ModuleConfig> = (0..10)
        .map(|module_id| ModuleConfig {
            module_id,
            kind: ModuleKind::Quartet,
            channels: (0..4)
                .map(|slot| ChannelConfig {
                    channel: module_id as ChannelId * 4 + slot,
                    pin: 2 + slot as u8,
                    geometry: ActuatorGeometry::new(4.0, 2.0, 4.0).unwrap(),
                    wire_resistance_ohm: 4.3,
                })
                .collect(),
        })
        .collect();
    let board = Board::new(modules).unwrap();
    let fit = EnvelopeFit::reference();
    let channels: Vec<ChannelId> = board.channel_ids().collect();
    let command = PatternCommand {
        channels: channels.clone(),
        rate_hz: 20.0,
        duty: 0.2,
        duration_s: 0.5,
        drive: DriveLevel::PowerW(2.8),
        start_s: 0.0,
    };
    let log = compile_pattern(&board, &[command], &fit, 0.10).unwrap();

    let channel_model = ThermalModel::from_envelope(
        &fit,
        ActuatorGeometry::new(4.0, 2.0, 4.0).unwrap(),
        AmbientState::default(),
        ChainGains::default(),
        DEFAULT_TAU_COOL_S,
    )
    .unwrap();
    let models: BTreeMap<ChannelId, ThermalModel> =
        channels.iter().map(|&c| (c, channel_model.clone())).collect();
    let dt = 0.001;
    let traces = simulate_pattern(&log, &models, dt, Some(1.0)).unwrap();
    assert_eq!(traces.len(), 40);

    // the per-channel reference: one channel simulated directly
    let segments: Vec<PulseSegment> = (0..10)
        .map(|k| PulseSegment {
            start_s: us_to_seconds(k * 50_000),
            duration_s: us_to_seconds(10_000),
            power_w: 2.8,
        })
        .collect();
    let reference = simulate(&channel_model, &PulseSchedule::new(segments).unwrap(), 1.0, dt).unwrap();
    for (&channel, trace) in &traces {
        assert_eq!(trace, &reference, "channel {channel} deviates from the reference");
    }
}

#[test]
fn wire_temp_channel_reports_absolute_celsius() {
    let model = model();
    let schedule = PulseSchedule::single_pulse(4.8, 0.075).unwrap();
    let sim = simulate(&model, &schedule, 0.2, 0.0005).unwrap();
    let wire = sim.wire_temp_trace();
    assert_eq!(wire.kind, QuantityKind::Temperature);
    assert_eq!(wire.unit, "degC");
    // at rest the channel reads ambient
    assert!((wire.samples[0] - model.ambient.t0_c()).abs() < 1e-12);
}
