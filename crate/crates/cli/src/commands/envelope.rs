//! `tpp envelope`: boundary tables and boundary fitting.

use std::path::{Path, PathBuf};

use clap::Subcommand;
use serde::Serialize;

use tpp_core::envelope::{boundary_rho, fit_envelope, read_failure_points};
use tpp_core::params::ParameterFile;
use tpp_core::plot::SvgPlot;

use crate::config::ProjectConfig;
use crate::util::{parse_duration_s, read_to_string, to_pretty_json, write_file, CliError, CliResult};

#[derive(Debug, Subcommand)]
pub enum EnvelopeCmd {
    /// Tabulate the failure boundary rho(t_p) over a duration range.
    Boundary {
        #[arg(long, default_value = "1ms")]
        tp_min: String,
        #[arg(long, default_value = "100ms")]
        tp_max: String,
        #[arg(long, default_value_t = 60)]
        points: usize,
    },
    /// Fit (a, b) to a failure-point CSV table.
    Fit {
        /// CSV with header `rho_w_per_mm,t_p_s,cavity_length_l_mm`.
        #[arg(long)]
        points: PathBuf,
        /// Failure temperature rise in degC (default: config envelope.t_fail_c).
        #[arg(long)]
        t_fail: Option<f64>,
    },
}

#[derive(Serialize)]
struct BoundarySummary {
    a_mm_k_per_w: f64,
    b_j_per_mm_k: f64,
    t_fail_c: f64,
    time_constant_s: f64,
    asymptote_w_per_mm: f64,
    tp_min_s: f64,
    tp_max_s: f64,
    rows: usize,
}

#[derive(Serialize)]
struct FitSummary {
    points: usize,
    a_mm_k_per_w: f64,
    b_j_per_mm_k: f64,
    t_fail_c: f64,
    r_squared: f64,
    asymptote_w_per_mm: f64,
}

pub fn run(config: &ProjectConfig, out_dir: &Path, cmd: &EnvelopeCmd) -> CliResult {
    match cmd {
        EnvelopeCmd::Boundary { tp_min, tp_max, points } => {
            boundary(config, out_dir, tp_min, tp_max, *points)
        }
        EnvelopeCmd::Fit { points, t_fail } => fit(config, out_dir, points, *t_fail),
    }
}

fn boundary(
    config: &ProjectConfig,
    out_dir: &Path,
    tp_min: &str,
    tp_max: &str,
    points: usize,
) -> CliResult {
    let fit = config.envelope_fit()?;
    let tp_min = parse_duration_s(tp_min)?;
    let tp_max = parse_duration_s(tp_max)?;
    if !(tp_min > 0.0 && tp_max > tp_min) {
        return Err(CliError::validation(format!(
            "need 0 < tp-min < tp-max, got {tp_min} and {tp_max}"
        )));
    }
    if points < 2 {
        return Err(CliError::validation("need at least 2 table points"));
    }

    // log-spaced durations match how the envelope is plotted and used
    let log_min = tp_min.ln();
    let log_max = tp_max.ln();
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let t_p = (log_min + (log_max - log_min) * i as f64 / (points - 1) as f64).exp();
        rows.push((t_p, boundary_rho(&fit, t_p).map_err(CliError::validation)?));
    }

    let mut csv = String::new();
    csv.push_str(&format!("# a_mm_k_per_w={}\n", fit.a_mm_k_per_w));
    csv.push_str(&format!("# b_j_per_mm_k={}\n", fit.b_j_per_mm_k));
    csv.push_str(&format!("# t_fail_c={}\n", fit.t_fail_c));
    csv.push_str(&format!("# asymptote_w_per_mm={}\n", fit.asymptote_w_per_mm()));
    csv.push_str("t_p_s,rho_w_per_mm\n");
    for (t_p, rho) in &rows {
        csv.push_str(&format!("{t_p},{rho}\n"));
    }
    write_file(out_dir.join("envelope_boundary.csv").as_path(), csv.as_bytes())?;

    let svg = SvgPlot::new("Operating envelope boundary", "t_p (s)", "rho (W/mm)")
        .log_log()
        .line("boundary", &rows)
        .line(
            "asymptote",
            &[(tp_min, fit.asymptote_w_per_mm()), (tp_max, fit.asymptote_w_per_mm())],
        )
        .render();
    write_file(out_dir.join("envelope_boundary.svg").as_path(), svg.as_bytes())?;

    let summary = BoundarySummary {
        a_mm_k_per_w: fit.a_mm_k_per_w,
        b_j_per_mm_k: fit.b_j_per_mm_k,
        t_fail_c: fit.t_fail_c,
        time_constant_s: fit.time_constant_s(),
        asymptote_w_per_mm: fit.asymptote_w_per_mm(),
        tp_min_s: tp_min,
        tp_max_s: tp_max,
        rows: rows.len(),
    };
    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("envelope_summary.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

fn fit(config: &ProjectConfig, out_dir: &Path, points_path: &Path, t_fail: Option<f64>) -> CliResult {
    let text = read_to_string(points_path)?;
    let points = read_failure_points(text.as_bytes())
        .map_err(|e| CliError::validation(format!("{}: {e}", points_path.display())))?;
    let t_fail_c = t_fail.unwrap_or(config.envelope.t_fail_c);
    let fit = fit_envelope(&points, t_fail_c).map_err(CliError::validation)?;

    let diag = fit.diagnostics.clone().expect("fit always carries diagnostics");
    let summary = FitSummary {
        points: points.len(),
        a_mm_k_per_w: fit.a_mm_k_per_w,
        b_j_per_mm_k: fit.b_j_per_mm_k,
        t_fail_c: fit.t_fail_c,
        r_squared: diag.r_squared,
        asymptote_w_per_mm: fit.asymptote_w_per_mm(),
    };

    let params = ParameterFile { envelope: Some(fit.clone()), tau: None, gains: None };
    write_file(out_dir.join("envelope_fit.json").as_path(), params.to_json().as_bytes())?;

    let measured: Vec<(f64, f64)> = points.iter().map(|p| (p.t_p_s, p.rho_w_per_mm)).collect();
    let t_lo = measured.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_hi = measured.iter().map(|p| p.0).fold(0.0_f64, f64::max);
    let curve: Vec<(f64, f64)> = (0..80)
        .map(|i| {
            let t = (t_lo.ln() + (t_hi.ln() - t_lo.ln()) * i as f64 / 79.0).exp();
            (t, boundary_rho(&fit, t).unwrap_or(f64::NAN))
        })
        .collect();
    let svg = SvgPlot::new("Envelope fit", "t_p (s)", "rho (W/mm)")
        .log_log()
        .scatter("failure points", &measured)
        .line("fitted boundary", &curve)
        .render();
    write_file(out_dir.join("envelope_fit.svg").as_path(), svg.as_bytes())?;

    let json = to_pretty_json(&summary)?;
    write_file(out_dir.join("envelope_fit_summary.json").as_path(), json.as_bytes())?;
    print!("{json}");
    Ok(())
}
