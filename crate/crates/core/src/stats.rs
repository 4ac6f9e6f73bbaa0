//! Small descriptive-statistics helpers shared by the estimators.
//!
//! Variances and covariances use the population (divide-by-N) convention so
//! that OLS slopes computed as `cov / var` reproduce the normal equations.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / x.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let r = covariance(x, y) / (variance(x).sqrt() * variance(y).sqrt());
    r.clamp(-1.0, 1.0)
}

/// Mean of `values` weighted by integer `counts`.
pub fn weighted_mean(values: &[f64], counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return mean(values);
    }
    values
        .iter()
        .zip(counts)
        .map(|(v, &c)| v * c as f64)
        .sum::<f64>()
        / total as f64
}

/// Variance of `values` under the discrete distribution given by `counts`.
pub fn weighted_variance(values: &[f64], counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return variance(values);
    }
    let m = weighted_mean(values, counts);
    values
        .iter()
        .zip(counts)
        .map(|(v, &c)| (v - m) * (v - m) * c as f64)
        .sum::<f64>()
        / total as f64
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Least-squares polynomial fit of the given degree; coefficients are
/// returned in ascending powers (`c[0] + c[1] x + ...`).
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Option<Vec<f64>> {
    let m = degree + 1;
    if x.len() != y.len() || x.len() < m {
        return None;
    }
    // Center and scale x for conditioning, then map back.
    let shift = mean(x);
    let scale = x
        .iter()
        .map(|v| (v - shift).abs())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut ata = vec![vec![0.0; m]; m];
    let mut aty = vec![0.0; m];
    for (&xi, &yi) in x.iter().zip(y) {
        let t = (xi - shift) / scale;
        let mut pows = vec![1.0; m];
        for d in 1..m {
            pows[d] = pows[d - 1] * t;
        }
        for r in 0..m {
            aty[r] += pows[r] * yi;
            for c in 0..m {
                ata[r][c] += pows[r] * pows[c];
            }
        }
    }
    let local = solve_dense(ata, aty)?;
    // Expand sum_d local[d] ((x - shift) / scale)^d into powers of x.
    let mut out = vec![0.0; m];
    for (d, &coef) in local.iter().enumerate() {
        let a = coef / scale.powi(d as i32);
        for i in 0..=d {
            out[i] += a * binomial(d, i) * (-shift).powi((d - i) as i32);
        }
    }
    Some(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        let t = [0.0, 0.0, 0.0, 1.0];
        assert_eq!(quantile_sorted(&t, 0.75), 0.25);
    }

    #[test]
    fn weighted_moments() {
        assert_eq!(weighted_mean(&[1.0, 3.0], &[3, 1]), 1.5);
        assert!((weighted_variance(&[1.0, 3.0], &[1, 1]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polyfit_recovers_quadratic() {
        let x: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 * 0.04 + 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v + 1.25 * v * v).collect();
        let c = polyfit(&x, &y, 2).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-8, "{c:?}");
        assert!((c[1] + 2.0).abs() < 1e-9);
        assert!((c[2] - 1.25).abs() < 1e-10);
    }
}
