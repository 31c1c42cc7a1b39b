use crate::error::{Error, Result};

/// Floor applied to regret values before taking logs in
/// [`fit_loglog_slope_floored`].
pub const REGRET_FLOOR: f64 = 1e-9;

/// Mean and sample standard deviation.
///
/// Values are summed in sorted order so the result does not depend on the
/// order replications finished in.
pub fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let var = sq.iter().sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Least-squares slope of `ln(regret)` against `ln(T)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::param("points", format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(t, r)) = points.iter().find(|&&(t, r)| !(t > 0.0 && r > 0.0)) {
        return Err(Error::param("points", format!("log-log fit needs positive values, got ({t}, {r})")));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(t, r)| (t.ln(), r.ln())).collect();
    ols_slope(&xy)
}

/// Like [`fit_loglog_slope`], but regret values below [`REGRET_FLOOR`]
/// (a sample path can beat the best leaf in hindsight) are raised to the
/// floor. Returns the slope and which points were floored.
pub fn fit_loglog_slope_floored(points: &[(f64, f64)]) -> Result<(f64, Vec<bool>)> {
    let floored: Vec<bool> = points.iter().map(|&(_, r)| !(r >= REGRET_FLOOR)).collect();
    let raised: Vec<(f64, f64)> = points.iter().map(|&(t, r)| (t, r.max(REGRET_FLOOR))).collect();
    Ok((fit_loglog_slope(&raised)?, floored))
}

fn ols_slope(xy: &[(f64, f64)]) -> Result<f64> {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("points", "all horizons are equal"));
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Reference curve `R / T^(1/(L+1))` for time-average regret, with `R`
/// chosen so the curve passes through the measurement at `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticTrend {
    pub depth: usize,
    pub anchor: u64,
    pub coefficient: f64,
    /// `(T, trend value)` for every grid horizon.
    pub points: Vec<(u64, f64)>,
}

impl AsymptoticTrend {
    pub fn value_at(&self, horizon: u64) -> f64 {
        self.coefficient / (horizon as f64).powf(1.0 / (self.depth as f64 + 1.0))
    }
}

/// `measured` holds `(T, time-average regret)` pairs.
pub fn asymptotic_trend(measured: &[(u64, f64)], depth: usize, anchor: u64) -> Result<AsymptoticTrend> {
    let &(_, at_anchor) = measured
        .iter()
        .find(|&&(t, _)| t == anchor)
        .ok_or_else(|| Error::param("anchor", format!("T = {anchor} is not in the grid")))?;
    let coefficient = at_anchor * (anchor as f64).powf(1.0 / (depth as f64 + 1.0));
    let mut trend = AsymptoticTrend {
        depth,
        anchor,
        coefficient,
        points: Vec::new(),
    };
    let mut grid: Vec<u64> = measured.iter().map(|p| p.0).collect();
    grid.sort_unstable();
    grid.dedup();
    trend.points = grid
        .into_iter()
        .map(|t| (t, if t == anchor { at_anchor } else { trend.value_at(t) }))
        .collect();
    Ok(trend)
}
