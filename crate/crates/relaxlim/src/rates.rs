//! Log-log slope fitting for convergence studies.

use crate::error::{Error, Result};

/// Least-squares line through (log eps, log err) with an RMS residual.
/// `exact_zero` marks the degenerate case where every error vanished and no
/// slope is defined.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub exact_zero: bool,
}

impl RateFit {
    pub fn exact_zero(points: Vec<(f64, f64)>) -> Self {
        Self {
            points,
            slope: 0.0,
            intercept: 0.0,
            residual: 0.0,
            exact_zero: true,
        }
    }
}

/// Fit err ~ C * eps^slope from (eps, err) pairs.
///
/// All-zero errors take the exact-zero path; a mix of zero and nonzero
/// errors (or any negative value) is rejected.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::TraceTooShort(points.len(), 2));
    }
    for &(eps, _) in points {
        if !(eps > 0.0) {
            return Err(Error::DegenerateFit(format!("non-positive eps {eps}")));
        }
    }
    if points.iter().all(|&(_, e)| e == 0.0) {
        return Ok(RateFit::exact_zero(points.to_vec()));
    }
    if points.iter().any(|&(_, e)| !(e > 0.0)) {
        return Err(Error::DegenerateFit(
            "mix of zero/negative and positive errors".into(),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(e, _)| e.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all eps values identical".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let d = y - (slope * x + intercept);
            d * d
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        residual,
        exact_zero: false,
    })
}
