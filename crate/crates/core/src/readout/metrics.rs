use alloc::vec;
use alloc::vec::Vec;

/// Rows are true classes, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.n_classes).map(|i| self.counts[i][i]).sum()
    }

    /// Trace over total; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Per-class precision; `None` for a class never predicted.
    pub fn precision(&self) -> Vec<Option<f64>> {
        (0..self.n_classes)
            .map(|c| {
                let predicted: usize = self.counts.iter().map(|r| r[c]).sum();
                (predicted > 0).then(|| self.counts[c][c] as f64 / predicted as f64)
            })
            .collect()
    }

    /// Per-class recall; `None` for a class absent from the data.
    pub fn recall(&self) -> Vec<Option<f64>> {
        self.row_sums()
            .iter()
            .enumerate()
            .map(|(c, &n)| (n > 0).then(|| self.counts[c][c] as f64 / n as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_predictors() {
        let mut perfect = ConfusionMatrix::new(3);
        let mut constant = ConfusionMatrix::new(10);
        for i in 0..30 {
            perfect.record(i % 3, i % 3);
        }
        for i in 0..100 {
            constant.record(i % 10, 0);
        }
        assert_eq!(perfect.accuracy(), 1.0);
        assert!(perfect.counts.iter().enumerate().all(|(i, r)| r.iter().enumerate().all(|(j, &v)| (i == j) == (v > 0))));
        assert_eq!(constant.accuracy(), 0.1);
        assert_eq!(constant.total(), 100);
        assert_eq!(constant.precision()[0], Some(0.1));
        assert_eq!(constant.precision()[1], None);
        assert_eq!(constant.recall()[0], Some(1.0));
        assert_eq!(constant.recall()[4], Some(0.0));
    }
}
