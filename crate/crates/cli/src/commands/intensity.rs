//! `tpp intensity`: magnitude-estimation reduction, the intensity-power
//! model, its safety-gated inverse, and localization statistics.

use std::path::{Path, PathBuf};

use clap::Subcommand;
use serde::Serialize;

use tpp_core::perception::{
    fit_intensity_model, localization_stats, power_for_intensity, reduce_magnitude, DriveContext,
    IntensityModel, LocalizationLog, MagnitudeDataset, PerceptionError, PowerQuery,
    ReducedIntensity, ZeroRatingPolicy,
};
use tpp_core::plot::SvgPlot;

use crate::config::ProjectConfig;
use crate::util::{read_to_string, to_pretty_json, write_file, CliError, CliResult};

#[derive(Debug, Subcommand)]
pub enum IntensityCmd {
    /// Reduce a ratings CSV and fit the linear intensity model.
    Fit {
        /// CSV with header `participant,power_W,rating`.
        #[arg(long)]
        ratings: PathBuf,
        /// Shift all ratings by this epsilon instead of excluding zeros
        /// from the geometric mean.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Map a target intensity to drive power, gated by the envelope.
    ToPower {
        #[arg(long, allow_negative_numbers = true)]
        target: f64,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
        /// Intensity-model JSON produced by `intensity fit`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        geom: String,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        duty: f64,
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Evaluate the model forward: intensity at a drive power.
    FromPower {
        #[arg(long)]
        power: f64,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix of a localization log.
    Localization {
        /// CSV with header `participant,presented,reported`.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 4)]
        grid: usize,
    },
}

#[derive(Serialize)]
struct IntensityFitOutput {
    model: IntensityModel,
    points: Vec<ReducedIntensity>,
}

#[derive(Serialize)]
struct FromPowerOutput {
    p_el_w: f64,
    intensity: f64,
}

pub fn run(config: &ProjectConfig, out_dir: &Path, cmd: &IntensityCmd) -> CliResult {
    match cmd {
        IntensityCmd::Fit { ratings, epsilon } => fit(out_dir, ratings, *epsilon),
        IntensityCmd::ToPower { target, alpha, beta, model, geom, rate, duty, margin } => to_power(
            config,
            out_dir,
            *target,
            resolve_model(*alpha, *beta, model.as_deref())?,
            geom,
            *rate,
            *duty,
            *margin,
        ),
        IntensityCmd::FromPower { power, alpha, beta, model } => {
            from_power(*power, resolve_model(*alpha, *beta, model.as_deref())?)
        }
        IntensityCmd::Localization { log, grid } => localization(out_dir, log, *grid),
    }
}

fn resolve_model(
    alpha: Option<f64>,
    beta: Option<f64>,
    model_path: Option<&Path>,
) -> CliResult<IntensityModel> {
    match (alpha, beta, model_path) {
        (Some(alpha_per_w), Some(beta), None) => {
            Ok(IntensityModel { alpha_per_w, beta, r_squared: f64::NAN })
        }
        (None, None, Some(path)) => {
            let text = read_to_string(path)?;
            let output: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            let model = output.get("model").unwrap_or(&output);
            serde_json::from_value(model.clone())
                .map_err(|e| CliError::validation(format!("{}: not an intensity model: {e}", path.display())))
        }
        _ => Err(CliError::validation(
            "specify either --alpha and --beta, or --model <json>",
        )),
    }
}

fn fit(out_dir: &Path, ratings: &Path, epsilon: Option<f64>) -> CliResult {
    let text = read_to_string(ratings)?;
    let dataset = MagnitudeDataset::read_csv(text.as_bytes())
        .map_err(|e| CliError::validation(format!("{}: {e}", ratings.display())))?;
    let policy = match epsilon {
        Some(eps) => ZeroRatingPolicy::AddEpsilon(eps),
        None => ZeroRatingPolicy::ExcludeFromGeometricMean,
    };
    let points = reduce_magnitude(&dataset, policy).map_err(CliError::validation)?;
    let model = fit_intensity_model(&points).map_err(CliError::validation)?;

    let scatter: Vec<(f64, f64)> = points.iter().map(|p| (p.power_w, p.intensity)).collect();
    let line: Vec<(f64, f64)> = scatter
        .iter()
        .map(|&(p, _)| (p, model.intensity_for_power(p)))
        .collect();
    let svg = SvgPlot::new("Perceived intensity vs power", "P_el (W)", "intensity")
        .scatter("reduced data", &scatter)
        .line(
            &format!("I = {:.4} P + {:.4}", model.alpha_per_w, model.beta),
            &line,
        )
        .render();
    write_file(out_dir.join("intensity_fit.svg").as_path(), svg.as_bytes())?;

    let output = IntensityFitOutput { model, points };
    let json = to_pretty_json(&output)?;
    write_file(out_dir.join("intensity_model.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn to_power(
    config: &ProjectConfig,
    out_dir: &Path,
    target: f64,
    model: IntensityModel,
    geom: &str,
    rate_hz: f64,
    duty: f64,
    margin: Option<f64>,
) -> CliResult {
    if !(rate_hz > 0.0 && duty > 0.0 && duty < 1.0) {
        return Err(CliError::validation(format!(
            "need rate > 0 and duty in (0, 1), got {rate_hz} Hz and {duty}"
        )));
    }
    let context = DriveContext {
        geometry: config.actuator_geometry(geom)?,
        envelope: config.envelope_fit()?,
        margin: margin.unwrap_or(config.safety_margin),
        t_p_s: duty / rate_hz,
    };
    let query: PowerQuery = match power_for_intensity(&model, target, Some(&context)) {
        Ok(query) => query,
        Err(err @ PerceptionError::UnsafePower { .. }) => {
            let message = err.to_string();
            let PerceptionError::UnsafePower { report, .. } = err else { unreachable!() };
            return Err(CliError::validation_with(message, &report));
        }
        Err(err) => return Err(CliError::validation(err)),
    };
    let json = to_pretty_json(&query)?;
    write_file(out_dir.join("intensity_query.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

fn from_power(power: f64, model: IntensityModel) -> CliResult {
    if !(power.is_finite() && power >= 0.0) {
        return Err(CliError::validation(format!("power {power} W must be non-negative")));
    }
    let output = FromPowerOutput { p_el_w: power, intensity: model.intensity_for_power(power) };
    print!("{}", to_pretty_json(&output)?);
    Ok(())
}

fn localization(out_dir: &Path, log_path: &Path, grid: usize) -> CliResult {
    let text = read_to_string(log_path)?;
    let log = LocalizationLog::read_csv(text.as_bytes(), grid)
        .map_err(|e| CliError::validation(format!("{}: {e}", log_path.display())))?;
    let stats = localization_stats(&log);
    let json = to_pretty_json(&stats)?;
    write_file(out_dir.join("localization_stats.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}
