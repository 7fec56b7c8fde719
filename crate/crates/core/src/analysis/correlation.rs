use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub coefficient: f64,
    /// Two-sided p-value from the t distribution with `n - 2` degrees of
    /// freedom.
    pub p_value: f64,
    pub n: usize,
}

impl CorrelationResult {
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, AnalysisError> {
    check_lengths(xs, ys)?;
    let n = xs.len();
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::DegenerateInput("constant series"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationResult {
        coefficient: r,
        p_value: t_test_p_value(r, n),
        n,
    })
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, AnalysisError> {
    check_lengths(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// One-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn check_lengths(xs: &[f64], ys: &[f64]) -> Result<(), AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(AnalysisError::DegenerateInput("fewer than 3 observations"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(AnalysisError::DegenerateInput("non-finite value"));
    }
    Ok(())
}

/// `P(|T| ≥ |t|)` for `t = r·sqrt(df / (1 − r²))`, written via the
/// regularized incomplete beta function so that |r| = 1 maps to 0.
fn t_test_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let one_minus_r2 = (1.0 - r * r).max(0.0);
    if one_minus_r2 == 0.0 {
        return 0.0;
    }
    // x = df / (df + t²) = 1 − r²
    beta_reg(df / 2.0, 0.5, one_minus_r2).clamp(0.0, 1.0)
}
