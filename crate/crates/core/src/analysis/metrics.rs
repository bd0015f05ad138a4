use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Root-mean-square of `errors`.
pub fn rmse(errors: &[f64]) -> Result<f64, AnalysisError> {
    if errors.is_empty() {
        return Err(AnalysisError::Empty("rmse of no errors".into()));
    }
    let ss: f64 = errors.iter().map(|e| e * e).sum();
    Ok((ss / errors.len() as f64).sqrt())
}

/// Point estimate and percentile-bootstrap 95% interval of the RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseCi {
    pub rmse: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Percentile bootstrap over trials. The interval is widened to include the
/// point estimate when resampling skews it to one side.
pub fn aggregate_ci(errors: &[f64], resamples: usize, seed: u64) -> Result<RmseCi, AnalysisError> {
    if errors.len() < 2 {
        return Err(AnalysisError::Empty(format!("bootstrap needs at least 2 errors, got {}", errors.len())));
    }
    if resamples == 0 {
        return Err(AnalysisError::Empty("zero bootstrap resamples".into()));
    }
    let point = rmse(errors)?;
    let n = errors.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let ss: f64 = (0..n).map(|_| errors[rng.random_range(0..n)].powi(2)).sum();
            (ss / n as f64).sqrt()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let lo = quantile(&stats, 0.025).min(point);
    let hi = quantile(&stats, 0.975).max(point);
    Ok(RmseCi { rmse: point, lo, hi, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit, AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::DegenerateFit(format!("{} points", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= f64::EPSILON * n * mx.abs().max(1.0) {
        return Err(AnalysisError::DegenerateFit("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LineFit { slope, intercept, r2 })
}
