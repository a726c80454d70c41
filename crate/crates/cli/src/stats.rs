//! Summary statistics for return lists and sweep curves.

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, Distribution, Max, Min, OrderStatistics, RankTieBreaker, Statistics};

/// Five-number summary plus mean. Quartiles use the median-unbiased
/// (type 8) quantile estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty list.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut data = Data::new(values.to_vec());
        Some(Summary {
            count: values.len(),
            mean: data.mean().expect("nonempty"),
            median: data.median(),
            lower_quartile: data.lower_quartile(),
            upper_quartile: data.upper_quartile(),
            min: data.min(),
            max: data.max(),
        })
    }
}

/// Spearman rank correlation with average ranks for ties. NaN when either
/// input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let rx = Data::new(x.to_vec()).ranks(RankTieBreaker::Average);
    let ry = Data::new(y.to_vec()).ranks(RankTieBreaker::Average);
    let cov = rx.iter().covariance(ry.iter());
    cov / (rx.iter().std_dev() * ry.iter().std_dev())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_numbers() {
        let s = Summary::of(&[3.0, 1.0, 2.0, 5.0, 4.0]).unwrap();
        assert_eq!((s.count, s.median, s.min, s.max, s.mean), (5, 3.0, 1.0, 5.0, 3.0));
        assert!(s.lower_quartile < s.median && s.median < s.upper_quartile);
        assert!(Summary::of(&[]).is_none());
        let single = Summary::of(&[0.7]).unwrap();
        assert_eq!((single.lower_quartile, single.upper_quartile), (0.7, 0.7));
    }

    #[test]
    fn even_length_median_averages() {
        assert_eq!(Summary::of(&[1.0, 2.0, 3.0, 10.0]).unwrap().median, 2.5);
    }

    #[test]
    fn spearman_is_rank_based() {
        let x = [0.0, 1.0, 2.0, 3.0];
        assert!((spearman(&x, &[1.0, 10.0, 100.0, 1000.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // Ties share their average rank.
        let rho = spearman(&x, &[0.0, 0.0, 1.0, 1.0]);
        assert!((rho - 0.894_427_190_999_916).abs() < 1e-12);
        assert!(spearman(&x, &[1.0; 4]).is_nan());
    }
}
