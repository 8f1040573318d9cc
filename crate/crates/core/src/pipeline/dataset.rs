use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::GaussianParams;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: usize,
}

/// An ordered collection of labelled feature vectors. Order is part of the
/// dataset's identity: trainers iterate records in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<Record>,
    feature_dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(records: Vec<Record>, feature_dim: usize, num_classes: usize) -> Result<Self> {
        if feature_dim == 0 || num_classes == 0 {
            return Err(invalid("feature_dim and num_classes must be positive"));
        }
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != feature_dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("{feature_dim} features"),
                    found: format!("{} features in record {i}", r.features.len()),
                });
            }
            if r.label >= num_classes {
                return Err(invalid(format!(
                    "record {i} has label {} but there are {num_classes} classes",
                    r.label
                )));
            }
            if r.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("dataset features"));
            }
        }
        Ok(Self {
            records,
            feature_dim,
            num_classes,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn features(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.features.as_slice())
    }

    pub(crate) fn require_nonempty(&self, what: &'static str) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Empty(what));
        }
        Ok(())
    }

    /// Copy of the dataset with record `index` removed.
    pub fn without(&self, index: usize) -> Result<Self> {
        if index >= self.records.len() {
            return Err(invalid(format!("index {index} out of range for {} records", self.len())));
        }
        let mut records = self.records.clone();
        records.remove(index);
        Ok(Self { records, ..*self })
    }

    /// Records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| invalid(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records, ..*self })
    }

    /// First `n` records (or all, if fewer).
    pub fn take(&self, n: usize) -> Self {
        Self {
            records: self.records.iter().take(n).cloned().collect(),
            ..*self
        }
    }
}

/// Gaussian class clusters with seeded centres.
///
/// Centres are standard normal vectors drawn from stream 0 of `seed`; a
/// split drawn from stream `k >= 1` places record `r` in class `r mod C` at
/// its centre plus isotropic noise of standard deviation `cluster_spread`.
/// Splits drawn from distinct streams share centres and are independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub cluster_spread: f64,
    pub seed: u64,
}

impl SyntheticSource {
    pub fn new(num_classes: usize, feature_dim: usize, cluster_spread: f64, seed: u64) -> Result<Self> {
        if num_classes == 0 || feature_dim == 0 {
            return Err(invalid("num_classes and feature_dim must be at least 1"));
        }
        if !(cluster_spread.is_finite() && cluster_spread > 0.0) {
            return Err(invalid(format!("cluster_spread must be positive, got {cluster_spread}")));
        }
        Ok(Self {
            num_classes,
            feature_dim,
            cluster_spread,
            seed,
        })
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        let flat = GaussianParams::centered(1.0)
            .expect("unit normal")
            .sample(RngStream::new(self.seed, 0), self.num_classes * self.feature_dim);
        flat.chunks(self.feature_dim).map(<[f64]>::to_vec).collect()
    }

    pub fn generate(&self, records: usize, stream: u64) -> Result<Dataset> {
        if stream == 0 {
            return Err(invalid("stream 0 is reserved for the class centres"));
        }
        let centers = self.centers();
        let noise = GaussianParams::centered(self.cluster_spread)
            .expect("validated spread")
            .sample(RngStream::new(self.seed, stream), records * self.feature_dim);
        let records = (0..records)
            .map(|r| {
                let label = r % self.num_classes;
                let features = centers[label]
                    .iter()
                    .zip(&noise[r * self.feature_dim..(r + 1) * self.feature_dim])
                    .map(|(c, n)| c + n)
                    .collect();
                Record { features, label }
            })
            .collect();
        Dataset::new(records, self.feature_dim, self.num_classes)
    }
}

/// `num_classes * per_class` records drawn from stream 1 of a
/// [`SyntheticSource`], labels cycling `0, 1, …, C-1`.
pub fn make_synthetic_dataset(
    num_classes: usize,
    per_class: usize,
    feature_dim: usize,
    cluster_spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if per_class == 0 {
        return Err(invalid("per_class must be at least 1"));
    }
    SyntheticSource::new(num_classes, feature_dim, cluster_spread, seed)?.generate(num_classes * per_class, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_dataset_cardinality() {
        let d = make_synthetic_dataset(2, 1, 2, 1.0, 7).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.labels(), vec![0, 1]);
        assert_eq!(d.feature_dim(), 2);
    }

    #[test]
    fn deterministic() {
        let a = make_synthetic_dataset(3, 4, 5, 0.5, 11).unwrap();
        let b = make_synthetic_dataset(3, 4, 5, 0.5, 11).unwrap();
        assert_eq!(a, b);
        let c = make_synthetic_dataset(3, 4, 5, 0.5, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_synthetic_dataset(0, 1, 2, 1.0, 0).is_err());
        assert!(make_synthetic_dataset(2, 0, 2, 1.0, 0).is_err());
        assert!(make_synthetic_dataset(2, 1, 2, 0.0, 0).is_err());
        let r = Record {
            features: vec![0.0],
            label: 3,
        };
        assert!(Dataset::new(vec![r], 1, 2).is_err());
        let r = Record {
            features: vec![0.0, 1.0],
            label: 0,
        };
        assert!(Dataset::new(vec![r], 1, 2).is_err());
    }

    #[test]
    fn splits_share_centres() {
        let src = SyntheticSource::new(4, 3, 1e-9, 5).unwrap();
        let a = src.generate(8, 1).unwrap();
        let b = src.generate(8, 2).unwrap();
        for (x, y) in a.records().iter().zip(b.records()) {
            assert_eq!(x.label, y.label);
            for (p, q) in x.features.iter().zip(&y.features) {
                assert!((p - q).abs() < 1e-6);
            }
        }
        assert!(src.generate(3, 0).is_err());
    }

    #[test]
    fn without_and_subset() {
        let d = make_synthetic_dataset(2, 3, 2, 1.0, 1).unwrap();
        let w = d.without(1).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.records()[1], d.records()[2]);
        assert!(d.without(6).is_err());
        let s = d.subset(&[4, 0]).unwrap();
        assert_eq!(s.records()[0], d.records()[4]);
        assert!(d.subset(&[9]).is_err());
    }
}
