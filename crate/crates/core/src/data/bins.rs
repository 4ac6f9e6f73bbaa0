use super::Dataset;
use crate::error::{Error, Result};
use crate::stats;

/// Equal-count partition of one predictor.
///
/// Bins are half-open `[e_i, e_{i+1})` except the last, which is closed, so
/// every row lands in exactly one bin. `edges[0]` is the observed minimum and
/// serves as the lower integration bound for accumulated curves.
#[derive(Debug, Clone, PartialEq)]
pub struct BinScheme {
    pub var: usize,
    pub edges: Vec<f64>,
    pub midpoints: Vec<f64>,
    pub members: Vec<Vec<usize>>,
    assignment: Vec<usize>,
}

impl BinScheme {
    /// Partition `x` using the given strictly increasing edges, merging any
    /// empty bin into its right neighbour.
    pub fn from_edges(var: usize, x: &[f64], edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "bin edges must be strictly increasing with at least two entries".into(),
            ));
        }
        let mut edges = edges;
        loop {
            let counts = count_rows(x, &edges);
            let k = counts.len();
            if counts.iter().all(|&c| c > 0) {
                break;
            }
            let mut merged = vec![edges[0]];
            for b in 0..k {
                if counts[b] == 0 && b + 1 < k {
                    continue;
                }
                merged.push(edges[b + 1]);
            }
            if counts[k - 1] == 0 && merged.len() > 2 {
                // Only reachable when x extends past the supplied edges.
                let last = merged.pop().unwrap();
                merged.pop();
                merged.push(last);
            }
            if merged.len() == edges.len() {
                break;
            }
            edges = merged;
        }
        let k = edges.len() - 1;
        let mut members = vec![Vec::new(); k];
        let mut assignment = Vec::with_capacity(x.len());
        for (i, &v) in x.iter().enumerate() {
            let b = locate(&edges, v);
            members[b].push(i);
            assignment.push(b);
        }
        let midpoints = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(BinScheme {
            var,
            edges,
            midpoints,
            members,
            assignment,
        })
    }

    pub fn k(&self) -> usize {
        self.midpoints.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Bin index of each row, in row order.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Bin containing the value `v` (clamped to the outer bins).
    pub fn bin_of(&self, v: f64) -> usize {
        locate(&self.edges, v)
    }

    /// Mean of `values` (indexed by row) within each bin.
    pub fn bin_means(&self, values: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .map(|rows| rows.iter().map(|&i| values[i]).sum::<f64>() / rows.len() as f64)
            .collect()
    }

    /// Sample mean and standard error of `values` within each bin.
    pub fn bin_means_with_se(&self, values: &[f64]) -> Vec<(f64, f64)> {
        self.members
            .iter()
            .map(|rows| {
                let n = rows.len() as f64;
                let m = rows.iter().map(|&i| values[i]).sum::<f64>() / n;
                let ss = rows.iter().map(|&i| (values[i] - m).powi(2)).sum::<f64>();
                let se = if rows.len() > 1 {
                    (ss / (n - 1.0) / n).sqrt()
                } else {
                    0.0
                };
                (m, se)
            })
            .collect()
    }

    /// Grid points between the `lo` and `hi` empirical quantiles of the
    /// binned variable, given as a mask over bins.
    pub fn inner_mask(&self, x: &[f64], lo: f64, hi: f64) -> Vec<bool> {
        let sorted = stats::sorted_copy(x);
        let a = stats::quantile_sorted(&sorted, lo);
        let b = stats::quantile_sorted(&sorted, hi);
        self.midpoints.iter().map(|&m| m >= a && m <= b).collect()
    }
}

fn locate(edges: &[f64], v: f64) -> usize {
    let k = edges.len() - 1;
    let inner = &edges[1..k];
    inner.partition_point(|&e| e <= v).min(k - 1)
}

fn count_rows(x: &[f64], edges: &[f64]) -> Vec<usize> {
    let mut counts = vec![0; edges.len() - 1];
    for &v in x {
        counts[locate(edges, v)] += 1;
    }
    counts
}

/// Equal-count bins on column `j` with edges at the empirical `i/K`
/// quantiles. Repeated edges (ties) are collapsed, which can reduce `K`.
pub fn quantile_bins(d: &Dataset, j: usize, k: usize) -> Result<BinScheme> {
    d.check_index(j)?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("bin count {k} < 2")));
    }
    let x = d.column(j);
    let sorted = stats::sorted_copy(x);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateVariable(d.names()[j].clone()));
    }
    let mut edges: Vec<f64> = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let q = stats::quantile_sorted(&sorted, i as f64 / k as f64);
        if edges.last().is_none_or(|&last| q > last) {
            edges.push(q);
        }
    }
    BinScheme::from_edges(j, x, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn one_col(x: Vec<f64>) -> Dataset {
        Dataset::new(vec!["x".into()], vec![x], None).unwrap()
    }

    #[test]
    fn symmetric_quantiles() {
        let b = quantile_bins(&one_col(vec![1.0, 2.0, 3.0, 4.0]), 0, 2).unwrap();
        assert_eq!(b.edges, vec![1.0, 2.5, 4.0]);
        assert_eq!(b.counts(), vec![2, 2]);
        assert_eq!(b.midpoints, vec![1.75, 3.25]);
    }

    #[test]
    fn ties_collapse_edges() {
        let b = quantile_bins(&one_col(vec![0.0, 0.0, 0.0, 1.0]), 0, 4).unwrap();
        assert_eq!(b.k(), 2);
        assert_eq!(b.counts(), vec![3, 1]);
        assert_eq!(b.edges[0], 0.0);
        assert_eq!(*b.edges.last().unwrap(), 1.0);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let err = quantile_bins(&one_col(vec![2.0; 5]), 0, 4).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariable(_)));
    }

    #[test]
    fn k_below_two_rejected() {
        assert!(quantile_bins(&one_col(vec![1.0, 2.0]), 0, 1).is_err());
    }

    #[test]
    fn empty_bins_merge_rightward() {
        let x = vec![0.0, 0.1, 0.2, 5.0, 5.1];
        let b = BinScheme::from_edges(0, &x, vec![0.0, 1.0, 2.0, 3.0, 5.1]).unwrap();
        assert_eq!(b.edges, vec![0.0, 1.0, 5.1]);
        assert_eq!(b.counts(), vec![3, 2]);
    }

    #[test]
    fn heavy_ties_leave_no_empty_bin() {
        let mut x = vec![0.0; 50];
        x.extend(vec![10.0; 50]);
        x.push(3.0);
        let b = quantile_bins(&one_col(x.clone()), 0, 10).unwrap();
        assert!(b.counts().iter().all(|&c| c > 0));
        assert_eq!(b.counts().iter().sum::<usize>(), x.len());
    }

    #[test]
    fn uniform_counts_concentrate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..100_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = quantile_bins(&one_col(x), 0, 100).unwrap();
        assert_eq!(b.k(), 100);
        for c in b.counts() {
            assert!((800..=1200).contains(&c), "count {c}");
        }
    }

    #[test]
    fn assignment_matches_members() {
        let x = vec![3.0, 1.0, 2.0, 2.0, 5.0, 4.0];
        let b = quantile_bins(&one_col(x), 0, 3).unwrap();
        for (bin, rows) in b.members.iter().enumerate() {
            for &r in rows {
                assert_eq!(b.assignment()[r], bin);
            }
        }
    }
}
