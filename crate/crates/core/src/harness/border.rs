use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Statistic};
use super::sweep::{with_workers, RunOptions, RunRecord, Sweeper};
use crate::error::{Error, Result};
use crate::spectral::{self, CrossoverCurve, ScalingFit, ScalingModel};

/// Border at one qubit count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorderRow {
    pub n_q: usize,
    pub eps_chi: f64,
    pub stderr: Option<f64>,
    /// Fitted model evaluated at `n_q`.
    pub model_value: f64,
    /// Strength at which the mean eigenstate entropy reaches 1, when tracked.
    pub entropy_border: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorderStudy {
    pub statistic: Statistic,
    pub threshold: f64,
    pub rows: Vec<BorderRow>,
    /// Fit with the regime's fixed exponent.
    pub fit: ScalingFit,
    /// Fit with the exponent free.
    pub free_fit: ScalingFit,
    /// Fixed-exponent fit of the entropy borders, when tracked.
    pub entropy_fit: Option<ScalingFit>,
}

/// Crossing of `threshold` in the direction the statistic moves.
pub fn border_of(curve: &CrossoverCurve, stat: Statistic, threshold: f64) -> Result<f64> {
    if stat.rises() {
        spectral::rising_crossing(curve, threshold)
    } else {
        spectral::eps_chi(curve, threshold)
    }
}

// Standard error of a crossing from the errors of the two bracketing points
// and the local slope in (ln eps, value).
fn crossing_stderr(curve: &CrossoverCurve, eps_chi: f64) -> Option<f64> {
    let pts = curve.points();
    let i = pts
        .windows(2)
        .position(|w| w[0].eps <= eps_chi && eps_chi <= w[1].eps)?;
    let (a, b) = (pts[i], pts[i + 1]);
    if a.eps <= 0.0 {
        return None;
    }
    let slope = (b.value - a.value) / (b.eps.ln() - a.eps.ln());
    let se = a.stderr.max(b.stderr);
    (se.is_finite() && slope != 0.0).then(|| eps_chi * se / slope.abs())
}

fn crossed(curve: &CrossoverCurve, stat: Statistic, threshold: f64) -> Option<(f64, f64)> {
    let pts = curve.points();
    pts.windows(2).find_map(|w| {
        let (a, b) = (w[0].value, w[1].value);
        let hit = if stat.rises() {
            a < threshold && b >= threshold
        } else {
            a > threshold && b <= threshold
        };
        hit.then_some((w[0].eps, w[1].eps))
    })
}

/// Finds the border at each qubit count and fits the regime's scaling law.
///
/// Each qubit count is first scanned on every fourth point of the eps grid,
/// from small to large strengths, until all tracked statistics have crossed
/// their levels; the full grid is then filled in inside the bracketing
/// intervals.
pub fn run_border_study(cfg: &ExperimentConfig) -> Result<RunRecord> {
    run_border_study_with(cfg, &RunOptions::default())
}

pub fn run_border_study_with(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord> {
    let started = Instant::now();
    let mut sweeper = Sweeper::new(cfg, opts)?;
    let grid = cfg.eps_grid.values()?;
    let threshold = cfg.threshold();
    let mut tracked = vec![(cfg.statistic, threshold)];
    if cfg.track_entropy && cfg.statistic != Statistic::Entropy {
        tracked.push((Statistic::Entropy, 1.0));
    }

    let rows = with_workers(cfg.threads, || -> Result<Option<Vec<BorderRow>>> {
        let mut rows = Vec::new();
        for &n_q in &cfg.qubits {
            let coarse: Vec<usize> = (0..grid.len())
                .filter(|i| i % 4 == 0 || *i + 1 == grid.len())
                .collect();
            for &i in &coarse {
                if sweeper.point(n_q, grid[i])?.is_none() {
                    return Ok(None);
                }
                let all_crossed = tracked.iter().all(|&(s, t)| {
                    sweeper
                        .record
                        .curve(n_q, s)
                        .map(|c| crossed(&c, s, t).is_some())
                        .unwrap_or(false)
                });
                if all_crossed {
                    break;
                }
            }
            for &(s, t) in &tracked {
                let curve = sweeper.record.curve(n_q, s)?;
                let Some((lo, hi)) = crossed(&curve, s, t) else {
                    return Err(Error::Range(format!(
                        "{} never crosses {t} at n_q = {n_q} on [{:e}, {:e}]; widen the eps grid",
                        s.name(),
                        grid[0],
                        grid[grid.len() - 1]
                    )));
                };
                for &e in grid.iter().filter(|&&e| e > lo && e < hi) {
                    if sweeper.point(n_q, e)?.is_none() {
                        return Ok(None);
                    }
                }
            }
            let curve = sweeper.record.curve(n_q, cfg.statistic)?;
            let eps_chi = border_of(&curve, cfg.statistic, threshold)?;
            let entropy_border = if tracked.len() > 1 {
                Some(spectral::entropy_border(
                    &sweeper.record.curve(n_q, Statistic::Entropy)?,
                )?)
            } else {
                None
            };
            rows.push(BorderRow {
                n_q,
                eps_chi,
                stderr: crossing_stderr(&curve, eps_chi),
                model_value: f64::NAN,
                entropy_border,
            });
        }
        Ok(Some(rows))
    })??;

    let mut record = sweeper.finish(started);
    let Some(mut rows) = rows else {
        return Ok(record);
    };
    let pairs: Vec<(usize, f64)> = rows.iter().map(|r| (r.n_q, r.eps_chi)).collect();
    let fit = spectral::fit_scaling(&pairs, cfg.regime().scaling_model())?;
    let free_fit = spectral::fit_scaling(&pairs, ScalingModel::FreeExponent)?;
    let entropy_fit = if rows.iter().all(|r| r.entropy_border.is_some()) && tracked.len() > 1 {
        let pairs: Vec<(usize, f64)> = rows
            .iter()
            .map(|r| (r.n_q, r.entropy_border.expect("checked")))
            .collect();
        Some(spectral::fit_scaling(&pairs, cfg.regime().scaling_model())?)
    } else {
        None
    };
    for r in &mut rows {
        r.model_value = fit.predict(r.n_q);
    }
    record.border = Some(BorderStudy {
        statistic: cfg.statistic,
        threshold,
        rows,
        fit,
        free_fit,
        entropy_fit,
    });
    Ok(record)
}
