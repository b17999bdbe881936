//! `tpp schedule`: compile a pattern file into a gate-event timeline, report
//! the supply budget, and optionally replay it through the thermal model.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use tpp_core::driver_sim::{
    board_report, compile_pattern, simulate_pattern, Board, BoardReport, ChannelId, PatternFile,
};
use tpp_core::thermal_sim::ThermalModel;

use crate::config::ProjectConfig;
use crate::util::{parse_duration_s, read_to_string, to_pretty_json, write_file, CliError, CliResult};

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Pattern JSON file: `{ "modules": [...], "commands": [...] }`.
    #[arg(long)]
    pub pattern: PathBuf,
    /// Safety margin override (default: config safety_margin). Lowering it
    /// below the configured value requires --acknowledge-margin-override.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Confirm a margin override below the configured default.
    #[arg(long)]
    pub acknowledge_margin_override: bool,
    /// Replay the compiled log through per-channel thermal models.
    #[arg(long)]
    pub simulate: bool,
    /// Sample period for --simulate.
    #[arg(long, default_value = "1ms")]
    pub sample_period: String,
    /// Simulation end time (default: last event + 5 cooling constants).
    #[arg(long)]
    pub t_end: Option<String>,
}

#[derive(Serialize)]
struct ScheduleSummary {
    pattern: String,
    margin: f64,
    modules: usize,
    commands: usize,
    events: usize,
    end_us: u64,
    report: BoardReport,
    simulated_channels: Vec<ChannelId>,
}

pub fn run(config: &ProjectConfig, out_dir: &Path, args: &ScheduleArgs) -> CliResult {
    let margin = match args.margin {
        Some(margin) => {
            if margin < config.safety_margin && !args.acknowledge_margin_override {
                return Err(CliError::validation(format!(
                    "margin {margin} is below the configured {}; pass \
                     --acknowledge-margin-override to confirm",
                    config.safety_margin
                )));
            }
            margin
        }
        None => config.safety_margin,
    };

    let text = read_to_string(&args.pattern)?;
    let pattern: PatternFile = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", args.pattern.display())))?;
    let board = Board::new(pattern.modules.clone()).map_err(CliError::validation)?;
    let fit = config.envelope_fit()?;
    let log = compile_pattern(&board, &pattern.commands, &fit, margin).map_err(|e| {
        CliError::validation(format!("pattern rejected: {e}"))
    })?;

    let mut csv = Vec::new();
    log.write_csv(&mut csv).map_err(CliError::internal)?;
    write_file(out_dir.join("gate_events.csv").as_path(), &csv)?;

    let report = board_report(&log);
    write_file(
        out_dir.join("board_report.json").as_path(),
        to_pretty_json(&report)?.as_bytes(),
    )?;

    let mut simulated_channels = Vec::new();
    if args.simulate {
        let sample_period_s = parse_duration_s(&args.sample_period)?;
        let t_end_s = args.t_end.as_deref().map(parse_duration_s).transpose()?;
        let mut models: BTreeMap<ChannelId, ThermalModel> = BTreeMap::new();
        for module in board.modules() {
            for channel in &module.channels {
                models.insert(channel.channel, config.thermal_model(channel.geometry)?);
            }
        }
        let traces =
            simulate_pattern(&log, &models, sample_period_s, t_end_s).map_err(CliError::validation)?;
        for (channel, sim) in &traces {
            let mut buf = Vec::new();
            sim.force_trace()
                .write_csv(&mut buf)
                .map_err(CliError::internal)?;
            write_file(out_dir.join(format!("channel_{channel}_force.csv")).as_path(), &buf)?;
            simulated_channels.push(*channel);
        }
    }

    let summary = ScheduleSummary {
        pattern: args.pattern.display().to_string(),
        margin,
        modules: board.modules().len(),
        commands: pattern.commands.len(),
        events: log.events.len(),
        end_us: log.end_us(),
        report,
        simulated_channels,
    };
    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("schedule_summary.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}
