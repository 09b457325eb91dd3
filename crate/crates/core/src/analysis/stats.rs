//! Hypothesis tests and small regression helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    MannWhitneyU,
    ChiSquared,
    KolmogorovSmirnov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub test: TestKind,
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their span.
/// Also returns `Σ (t³ − t)` over tie groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Two-sided Mann–Whitney U test.
///
/// The statistic is `U_a = R_a − n_a(n_a + 1)/2`, the number of pairs with
/// `a > b` plus half the ties. The p-value uses the normal approximation with
/// tie-corrected variance and a 0.5 continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Mann-Whitney sample"));
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = average_ranks(&pooled);
    let ra: f64 = ranks[..a.len()].iter().sum();
    let u = ra - na * (na + 1.0) / 2.0;
    let n = na + nb;
    let mu = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let p_value = if var <= 0.0 || !var.is_finite() {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        (2.0 * std_normal().sf(z)).clamp(0.0, 1.0)
    };
    Ok(TestResult {
        statistic: u,
        p_value,
        test: TestKind::MannWhitneyU,
    })
}

/// Pearson χ² test of independence on a 2×2 table, 1 degree of freedom, no
/// continuity correction.
pub fn chi_squared_2x2(table: [[u64; 2]; 2]) -> Result<TestResult> {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if rows.contains(&0) || cols.contains(&0) {
        return Err(Error::ZeroMarginal);
    }
    let n = (rows[0] + rows[1]) as f64;
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            stat += (table[i][j] as f64 - e).powi(2) / e;
        }
    }
    let dist = ChiSquared::new(1.0).expect("one degree of freedom");
    Ok(TestResult {
        statistic: stat,
        p_value: dist.sf(stat).clamp(0.0, 1.0),
        test: TestKind::ChiSquared,
    })
}

/// One-sample Kolmogorov–Smirnov test against Uniform(`lo`, `hi`).
///
/// p-value from the asymptotic Kolmogorov distribution with Stephens'
/// small-sample adjustment.
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(Error::Empty("KS sample"));
    }
    if !(hi > lo) {
        return Err(Error::InvalidParameter("KS range must be nonempty".into()));
    }
    let mut x: Vec<f64> = samples.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
        test: TestKind::KolmogorovSmirnov,
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = f64::from(k);
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u32 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Ordinary least squares of `y` on `x`, computed about the means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    /// Value of the fit at `x = 0`.
    pub intercept: f64,
    pub x_mean: f64,
    pub y_mean: f64,
    /// `Σ (x − x̄)²`.
    pub sxx: f64,
    /// Residual standard error, `n − 2` degrees of freedom.
    pub residual_se: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.y_mean + self.slope * (x - self.x_mean)
    }

    /// Two-sided p-value of the slope t test; 1 when undefined.
    pub fn slope_p_value(&self) -> f64 {
        if self.n < 3 || self.sxx <= 0.0 {
            return 1.0;
        }
        let se = self.residual_se / self.sxx.sqrt();
        if se == 0.0 {
            return if self.slope == 0.0 { 1.0 } else { 0.0 };
        }
        let t = StudentsT::new(0.0, 1.0, (self.n - 2) as f64).expect("positive dof");
        (2.0 * t.sf((self.slope / se).abs())).clamp(0.0, 1.0)
    }
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("x and y differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::Empty("regression needs two points"));
    }
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("regression x values are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - x_mean) * (b - y_mean)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - y_mean - slope * (a - x_mean)).powi(2))
        .sum();
    let residual_se = if x.len() > 2 { (rss / (n - 2.0)).sqrt() } else { 0.0 };
    Ok(LinearFit {
        slope,
        intercept: y_mean - slope * x_mean,
        x_mean,
        y_mean,
        sxx,
        residual_se,
        n: x.len(),
    })
}

/// Linear-interpolation quantile of sorted data, `q ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}
