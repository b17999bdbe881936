//! Psychophysical data reduction: magnitude-estimation normalization, the
//! linear intensity-power model, and localization-task statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{linear_fit, CalibrationError, FitSpace};
use crate::core_physics::ActuatorGeometry;
use crate::csvio;
use crate::envelope::{is_safe, EnvelopeError, EnvelopeFit, SafetyReport};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("dataset contains no trials")]
    EmptyDataset,
    #[error("participant `{0}` has no positive rating; a geometric mean cannot exist")]
    AllZeroRatings(String),
    #[error("participant `{participant}` rated power levels {found:?} but the dataset has {expected:?}")]
    LevelsNotShared {
        participant: String,
        expected: Vec<f64>,
        found: Vec<f64>,
    },
    #[error("rating {value} for participant `{participant}` must be a finite non-negative number")]
    InvalidRating { participant: String, value: f64 },
    #[error("intensity model slope {0} does not admit an inverse power mapping")]
    NonInvertibleModel(f64),
    #[error("target intensity {target} maps to non-positive power {power_w} W")]
    NonPositivePower { target: f64, power_w: f64 },
    #[error(
        "power {p_el_w:.3} W exceeds the envelope at t_p = {t_p_s} s; safe maximum is {safe_max_w:.3} W"
    )]
    UnsafePower {
        p_el_w: f64,
        t_p_s: f64,
        safe_max_w: f64,
        report: SafetyReport,
    },
    #[error("localization log is empty")]
    EmptyLog,
    #[error("site {site} is outside the {grid_size}-site grid (participant `{participant}`)")]
    SiteOutOfRange {
        site: usize,
        grid_size: usize,
        participant: String,
    },
    #[error(transparent)]
    Regression(#[from] CalibrationError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("trial log: {0}")]
    Table(#[from] csvio::CsvError),
}

/// One magnitude-estimation response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeTrial {
    pub participant: String,
    pub power_w: f64,
    pub rating: f64,
}

/// All responses of a magnitude-estimation session. Every participant must
/// cover the same power levels and own at least one positive rating.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeDataset {
    trials: Vec<MagnitudeTrial>,
}

impl MagnitudeDataset {
    pub fn new(trials: Vec<MagnitudeTrial>) -> Result<Self, PerceptionError> {
        if trials.is_empty() {
            return Err(PerceptionError::EmptyDataset);
        }
        let mut global_levels: BTreeSet<u64> = BTreeSet::new();
        let mut per_participant: BTreeMap<&str, (BTreeSet<u64>, bool)> = BTreeMap::new();
        for trial in &trials {
            if !trial.rating.is_finite() || trial.rating < 0.0 {
                return Err(PerceptionError::InvalidRating {
                    participant: trial.participant.clone(),
                    value: trial.rating,
                });
            }
            global_levels.insert(trial.power_w.to_bits());
            let entry = per_participant
                .entry(trial.participant.as_str())
                .or_insert_with(|| (BTreeSet::new(), false));
            entry.0.insert(trial.power_w.to_bits());
            entry.1 |= trial.rating > 0.0;
        }
        for (participant, (levels, has_positive)) in &per_participant {
            if !has_positive {
                return Err(PerceptionError::AllZeroRatings(participant.to_string()));
            }
            if levels != &global_levels {
                return Err(PerceptionError::LevelsNotShared {
                    participant: participant.to_string(),
                    expected: global_levels.iter().map(|b| f64::from_bits(*b)).collect(),
                    found: levels.iter().map(|b| f64::from_bits(*b)).collect(),
                });
            }
        }
        Ok(Self { trials })
    }

    pub fn trials(&self) -> &[MagnitudeTrial] {
        &self.trials
    }

    /// Distinct power levels, ascending.
    pub fn power_levels(&self) -> Vec<f64> {
        let mut seen = BTreeSet::new();
        let mut levels: Vec<f64> = Vec::new();
        for t in &self.trials {
            if seen.insert(t.power_w.to_bits()) {
                levels.push(t.power_w);
            }
        }
        levels.sort_by(f64::total_cmp);
        levels
    }

    /// Read the `participant,power_W,rating` CSV.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self, PerceptionError> {
        let table = csvio::read_table(reader)?;
        csvio::expect_header(&table, &["participant", "power_W", "rating"])?;
        let mut trials = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            trials.push(MagnitudeTrial {
                participant: row[0].clone(),
                power_w: csvio::parse_field(row, 1, i)?,
                rating: csvio::parse_field(row, 2, i)?,
            });
        }
        Self::new(trials)
    }
}

/// How "no sensation" (zero) ratings enter the geometric mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroRatingPolicy {
    /// Zeros are excluded from the geometric mean but kept as zeros in the
    /// arithmetic pooling step.
    #[default]
    ExcludeFromGeometricMean,
    /// Every rating is shifted by epsilon before normalization.
    AddEpsilon(f64),
}

/// Pooled normalized intensity at one power level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedIntensity {
    pub power_w: f64,
    pub intensity: f64,
    pub trial_count: usize,
}

/// Reduce raw ratings to per-power intensities: each rating is divided by
/// its participant's geometric mean, then all normalized repetitions at one
/// power level are pooled in a single arithmetic mean (participants with
/// more completed trials weigh proportionally more).
pub fn reduce_magnitude(
    dataset: &MagnitudeDataset,
    policy: ZeroRatingPolicy,
) -> Result<Vec<ReducedIntensity>, PerceptionError> {
    let mut gmeans: BTreeMap<&str, f64> = BTreeMap::new();
    let mut grouped: BTreeMap<&str, Vec<&MagnitudeTrial>> = BTreeMap::new();
    for trial in dataset.trials() {
        grouped.entry(trial.participant.as_str()).or_default().push(trial);
    }
    for (participant, trials) in &grouped {
        let mut log_sum = 0.0;
        let mut count = 0usize;
        for trial in trials {
            let value = match policy {
                ZeroRatingPolicy::ExcludeFromGeometricMean => {
                    if trial.rating > 0.0 {
                        trial.rating
                    } else {
                        continue;
                    }
                }
                ZeroRatingPolicy::AddEpsilon(eps) => trial.rating + eps,
            };
            log_sum += value.ln();
            count += 1;
        }
        if count == 0 {
            return Err(PerceptionError::AllZeroRatings(participant.to_string()));
        }
        gmeans.insert(participant, (log_sum / count as f64).exp());
    }

    let mut pooled: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for trial in dataset.trials() {
        let gmean = gmeans[trial.participant.as_str()];
        let value = match policy {
            ZeroRatingPolicy::ExcludeFromGeometricMean => trial.rating,
            ZeroRatingPolicy::AddEpsilon(eps) => trial.rating + eps,
        };
        let entry = pooled.entry(trial.power_w.to_bits()).or_insert((0.0, 0));
        entry.0 += value / gmean;
        entry.1 += 1;
    }

    let mut reduced: Vec<ReducedIntensity> = pooled
        .into_iter()
        .map(|(bits, (sum, count))| ReducedIntensity {
            power_w: f64::from_bits(bits),
            intensity: sum / count as f64,
            trial_count: count,
        })
        .collect();
    reduced.sort_by(|a, b| a.power_w.total_cmp(&b.power_w));
    Ok(reduced)
}

/// Linear perceived-intensity model `I = alpha P_el + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel {
    pub alpha_per_w: f64,
    pub beta: f64,
    pub r_squared: f64,
}

impl IntensityModel {
    pub fn intensity_for_power(&self, p_el_w: f64) -> f64 {
        self.alpha_per_w * p_el_w + self.beta
    }
}

/// Fit the intensity model to reduced points (ordinary least squares in
/// linear space).
pub fn fit_intensity_model(points: &[ReducedIntensity]) -> Result<IntensityModel, PerceptionError> {
    let x: Vec<f64> = points.iter().map(|p| p.power_w).collect();
    let y: Vec<f64> = points.iter().map(|p| p.intensity).collect();
    let fit = linear_fit(&x, &y, FitSpace::Linear)?;
    Ok(IntensityModel {
        alpha_per_w: fit.slope,
        beta: fit.intercept,
        r_squared: fit.r_squared,
    })
}

/// Drive configuration against which a requested power is envelope-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveContext {
    pub geometry: ActuatorGeometry,
    pub envelope: EnvelopeFit,
    pub margin: f64,
    pub t_p_s: f64,
}

/// Power mapped from a target intensity, with the optional safety verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerQuery {
    pub target_intensity: f64,
    pub p_el_w: f64,
    pub rho_w_per_mm: Option<f64>,
    pub safety: Option<SafetyReport>,
}

/// Invert the intensity model: `P = (I - beta) / alpha`. When a drive
/// context is given the result must pass the envelope check, otherwise the
/// error reports the largest drivable power.
pub fn power_for_intensity(
    model: &IntensityModel,
    target: f64,
    context: Option<&DriveContext>,
) -> Result<PowerQuery, PerceptionError> {
    if !(model.alpha_per_w.is_finite() && model.alpha_per_w > 0.0) {
        return Err(PerceptionError::NonInvertibleModel(model.alpha_per_w));
    }
    let p_el_w = (target - model.beta) / model.alpha_per_w;
    if !(p_el_w.is_finite() && p_el_w > 0.0) {
        return Err(PerceptionError::NonPositivePower { target, power_w: p_el_w });
    }
    let mut query = PowerQuery {
        target_intensity: target,
        p_el_w,
        rho_w_per_mm: None,
        safety: None,
    };
    if let Some(ctx) = context {
        let l_t = ctx.geometry.total_wire_length_mm();
        let rho = p_el_w / l_t;
        let report = is_safe(&ctx.envelope, rho, ctx.t_p_s, ctx.margin)?;
        if !report.safe {
            let safe_max_w =
                (1.0 - ctx.margin) * report.boundary_rho_w_per_mm * l_t;
            return Err(PerceptionError::UnsafePower {
                p_el_w,
                t_p_s: ctx.t_p_s,
                safe_max_w,
                report,
            });
        }
        query.rho_w_per_mm = Some(rho);
        query.safety = Some(report);
    }
    Ok(query)
}

/// One localization response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationTrial {
    pub participant: String,
    pub presented: usize,
    pub reported: usize,
}

/// Localization session over a `grid_size`-site layout (sites numbered from 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationLog {
    pub grid_size: usize,
    trials: Vec<LocalizationTrial>,
}

impl LocalizationLog {
    pub fn new(grid_size: usize, trials: Vec<LocalizationTrial>) -> Result<Self, PerceptionError> {
        if trials.is_empty() {
            return Err(PerceptionError::EmptyLog);
        }
        for trial in &trials {
            for site in [trial.presented, trial.reported] {
                if site == 0 || site > grid_size {
                    return Err(PerceptionError::SiteOutOfRange {
                        site,
                        grid_size,
                        participant: trial.participant.clone(),
                    });
                }
            }
        }
        Ok(Self { grid_size, trials })
    }

    pub fn trials(&self) -> &[LocalizationTrial] {
        &self.trials
    }

    /// Read the `participant,presented,reported` CSV.
    pub fn read_csv<R: std::io::Read>(reader: R, grid_size: usize) -> Result<Self, PerceptionError> {
        let table = csvio::read_table(reader)?;
        csvio::expect_header(&table, &["participant", "presented", "reported"])?;
        let mut trials = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            trials.push(LocalizationTrial {
                participant: row[0].clone(),
                presented: csvio::parse_field(row, 1, i)? as usize,
                reported: csvio::parse_field(row, 2, i)? as usize,
            });
        }
        Self::new(grid_size, trials)
    }
}

/// Accuracy, confusion matrix (rows = presented site, columns = reported),
/// and per-participant accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationStats {
    pub accuracy: f64,
    pub total_trials: usize,
    pub correct_trials: usize,
    pub confusion: Vec<Vec<usize>>,
    pub per_participant: Vec<(String, f64)>,
}

pub fn localization_stats(log: &LocalizationLog) -> LocalizationStats {
    let n = log.grid_size;
    let mut confusion = vec![vec![0usize; n]; n];
    let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut correct = 0usize;
    for trial in log.trials() {
        confusion[trial.presented - 1][trial.reported - 1] += 1;
        let entry = per.entry(trial.participant.as_str()).or_insert((0, 0));
        entry.1 += 1;
        if trial.presented == trial.reported {
            entry.0 += 1;
            correct += 1;
        }
    }
    LocalizationStats {
        accuracy: correct as f64 / log.trials().len() as f64,
        total_trials: log.trials().len(),
        correct_trials: correct,
        confusion,
        per_participant: per
            .into_iter()
            .map(|(id, (c, t))| (id.to_string(), c as f64 / t as f64))
            .collect(),
    }
}
