//! Small statistical toolkit: compensated sums, weighted least squares,
//! goodness-of-fit tests and autocorrelation estimates.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = NeumaierSum::new();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// `log sum exp(xs)`, computed stably. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + compensated_sum(xs.iter().map(|x| (x - m).exp())).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() as f64 - 1.0)
}

/// Proportion estimate `k/n` with its binomial standard error.
pub fn proportion(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = k as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).expect("positive dof").sf(stat)
}

/// Two-sided normal tail probability of a z-score.
pub fn normal_two_sided_p(z: f64) -> f64 {
    2.0 * (1.0 - normal_cdf(z.abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins_used: usize,
}

/// Pearson chi-square of observed counts against expected probabilities.
///
/// Cells with expected count below 5 are pooled (in index order) so the
/// asymptotic distribution is usable. `fitted` parameters are removed from
/// the degrees of freedom.
pub fn chi_square_gof(observed: &[u64], expected_prob: &[f64], fitted: usize) -> ChiSquareResult {
    assert_eq!(observed.len(), expected_prob.len());
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &pr) in observed.iter().zip(expected_prob) {
        o_acc += o as f64;
        e_acc += pr * nf;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = cells.len().saturating_sub(1 + fitted);
    let p_value = if dof == 0 {
        if statistic < 1e-9 { 1.0 } else { 0.0 }
    } else if statistic.is_finite() {
        chi_square_sf(statistic, dof as f64)
    } else {
        0.0
    };
    ChiSquareResult {
        statistic,
        dof,
        p_value,
        bins_used: cells.len(),
    }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic KS p-value with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Result of a weighted linear least-squares fit `y ~ X beta`.
#[derive(Clone, Debug)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    /// Covariance of the coefficients, scaled by the reduced chi-square when
    /// `scale_by_residuals` was requested.
    pub cov: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
}

impl LinearFit {
    pub fn stderr(&self, i: usize) -> f64 {
        self.cov[i][i].sqrt()
    }
}

/// Weighted least squares via the normal equations. Rows of `design` are the
/// regressors of each observation; weights are inverse variances.
pub fn weighted_least_squares(
    design: &[Vec<f64>],
    y: &[f64],
    weights: &[f64],
    scale_by_residuals: bool,
) -> Option<LinearFit> {
    let n = y.len();
    let k = design.first()?.len();
    if n < k || design.len() != n || weights.len() != n {
        return None;
    }
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for ((row, &yi), &wi) in design.iter().zip(y).zip(weights) {
        for a in 0..k {
            xty[a] += wi * row[a] * yi;
            for b in 0..k {
                xtx[a][b] += wi * row[a] * row[b];
            }
        }
    }
    let inv = invert(&xtx)?;
    let coef: Vec<f64> = (0..k)
        .map(|a| (0..k).map(|b| inv[a][b] * xty[b]).sum())
        .collect();
    let residuals: Vec<f64> = design
        .iter()
        .zip(y)
        .map(|(row, &yi)| yi - row.iter().zip(&coef).map(|(r, c)| r * c).sum::<f64>())
        .collect();
    let chi2: f64 = residuals
        .iter()
        .zip(weights)
        .map(|(r, w)| w * r * r)
        .sum();
    let dof = n - k;
    let scale = if scale_by_residuals && dof > 0 {
        chi2 / dof as f64
    } else {
        1.0
    };
    let cov = inv
        .iter()
        .map(|r| r.iter().map(|v| v * scale).collect())
        .collect();
    Some(LinearFit {
        coef,
        cov,
        residuals,
        chi2,
        dof,
    })
}

/// Gauss-Jordan inverse with partial pivoting; `None` if singular.
fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..k {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..k {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..k {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Integrated autocorrelation time with Sokal's self-consistent window
/// (`M >= c * tau(M)`, c = 6). Independent samples give roughly 0.5.
pub fn integrated_autocorrelation(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 0.5;
    }
    let m = mean(series);
    let centred: Vec<f64> = series.iter().map(|x| x - m).collect();
    let c0 = centred.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct = centred[..n - t]
            .iter()
            .zip(&centred[t..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        tau += ct / c0;
        if t as f64 >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Batch-means estimate of the mean and its standard error.
pub fn batch_means(series: &[f64], batches: usize) -> (f64, f64) {
    let size = series.len() / batches;
    assert!(size > 0, "fewer observations than batches");
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(batches)
        .map(mean)
        .collect();
    (mean(&means), (variance(&means) / batches as f64).sqrt())
}
