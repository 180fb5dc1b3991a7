use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Uniform bins over [0, 1]; bin `i` is `[edges[i], edges[i + 1])`, the last
/// bin also holds 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Histogram {
    pub fn to_csv(&self, label: &str) -> String {
        let mut s = String::new();
        for (i, p) in self.probabilities.iter().enumerate() {
            let _ = writeln!(s, "{label},{},{},{p}", self.edges[i], self.edges[i + 1]);
        }
        s
    }
}

pub const HISTOGRAM_HEADER: &str = "series,bin_lo,bin_hi,probability\n";

/// Values outside [0, 1] are clamped into the end bins. Empty input yields
/// all-zero probabilities; zero bins count as one.
pub fn histogram(values: &[f64], n_bins: usize) -> Histogram {
    let n_bins = n_bins.max(1);
    let edges: Vec<f64> = (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect();
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let total = values.len().max(1) as f64;
    Histogram {
        edges,
        probabilities: counts.into_iter().map(|c| c as f64 / total).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value() {
        let h = histogram(&[0.5], 10);
        assert_eq!(h.probabilities[5], 1.0);
        assert_eq!((h.edges[5], h.edges[6]), (0.5, 0.6));
        assert_eq!(h.probabilities.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn endpoints() {
        let h = histogram(&[0.0, 1.0], 4);
        assert_eq!(h.probabilities, vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(h.edges.len(), 5);
    }

    #[test]
    fn tenths_land_in_their_own_bins() {
        let values: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let h = histogram(&values, 10);
        assert!(
            h.probabilities.iter().all(|&p| (p - 0.1).abs() < 1e-12),
            "{:?}",
            h.probabilities
        );
    }
}
