//! Regret scaling sweeps over the episode budget `K`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::runner::{mean_and_se, run_seed};

/// Least-squares line through `(ln K, ln mean R_K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRegret {
    pub seed: u64,
    pub final_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub episodes: usize,
    pub mean_regret: f64,
    pub std_error: f64,
    pub eta: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
    pub runs: Vec<SeedRegret>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
    /// `None` when the data could not be fitted; see `fit_error`.
    pub fit: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least 4 distinct K values, got {0}")]
    TooFewPoints(usize),
    #[error("mean regret {mean} at K = {k} is not positive")]
    NonPositive { k: f64, mean: f64 },
}

/// Fits `ln mean = slope · ln K + intercept`.
pub fn fit_log_log(points: &[(f64, f64)]) -> std::result::Result<SlopeFit, FitError> {
    let mut ks: Vec<f64> = points.iter().map(|p| p.0).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    if ks.len() < 4 {
        return Err(FitError::TooFewPoints(ks.len()));
    }
    if let Some(&(k, mean)) = points.iter().find(|p| !(p.1 > 0.0) || !(p.0 > 0.0)) {
        return Err(FitError::NonPositive { k, mean });
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Runs `template` at every `K` for every seed (in parallel) and fits the
/// log-log slope of the mean final regret.
pub fn sweep_scaling(template: &ExperimentConfig, ks: &[usize], seeds: &[u64]) -> Result<SweepReport> {
    if ks.is_empty() {
        return Err(Error::Config("sweep needs at least one K".into()));
    }
    let mut base = template.clone();
    if !seeds.is_empty() {
        base.seeds = seeds.to_vec();
    }
    let experiments = ks
        .iter()
        .map(|&k| {
            let mut c = base.clone();
            c.episodes = k;
            c.resolve()
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..ks.len())
        .flat_map(|i| base.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let finals = jobs
        .par_iter()
        .map(|&(i, seed)| run_seed(&experiments[i], seed).map(|r| r.final_regret))
        .collect::<Result<Vec<_>>>()?;
    let per_k = base.seeds.len();
    let points: Vec<SweepPoint> = experiments
        .iter()
        .enumerate()
        .map(|(i, exp)| {
            let chunk = &finals[i * per_k..(i + 1) * per_k];
            let (mean, se) = mean_and_se(chunk);
            SweepPoint {
                episodes: exp.config.episodes,
                mean_regret: mean,
                std_error: se,
                eta: exp.eta,
                gamma: exp.gamma,
                epsilon: exp.epsilon,
                runs: base
                    .seeds
                    .iter()
                    .zip(chunk)
                    .map(|(&seed, &final_regret)| SeedRegret { seed, final_regret })
                    .collect(),
            }
        })
        .collect();
    let data: Vec<(f64, f64)> = points.iter().map(|p| (p.episodes as f64, p.mean_regret)).collect();
    let (fit, fit_error) = match fit_log_log(&data) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SweepReport {
        config: base,
        points,
        fit,
        fit_error,
    })
}
