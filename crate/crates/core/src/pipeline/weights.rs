//! Flattened parameter vectors.
//!
//! Layers are stored in order. Within a dense layer mapping `inputs` to
//! `outputs` the weight matrix comes first, row-major with one row per output
//! unit (so the weights feeding output `o` are contiguous), followed by the
//! `outputs` biases.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DenseShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl DenseShape {
    pub const fn new(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs }
    }

    pub const fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Canonical layer-shape descriptor, e.g. `dense(32,16)+dense(16,10)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShapeTag(Vec<DenseShape>);

impl ShapeTag {
    pub fn new(layers: Vec<DenseShape>) -> Result<Self> {
        if layers.iter().any(|l| l.inputs == 0 || l.outputs == 0) {
            return Err(Error::InvalidParameter("layer dimensions must be positive".into()));
        }
        Ok(Self(layers))
    }

    /// Zero-parameter tag, written `none`.
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn dense(inputs: usize, outputs: usize) -> Result<Self> {
        Self::new(vec![DenseShape::new(inputs, outputs)])
    }

    pub fn layers(&self) -> &[DenseShape] {
        &self.0
    }

    pub fn param_count(&self) -> usize {
        self.0.iter().map(DenseShape::param_count).sum()
    }
}

impl fmt::Display for ShapeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "dense({},{})", l.inputs, l.outputs)?;
        }
        Ok(())
    }
}

impl FromStr for ShapeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("unparseable shape tag {s:?}"));
        if s.trim() == "none" {
            return Ok(Self::empty());
        }
        let layers = s
            .trim()
            .split('+')
            .map(|part| {
                let inner = part
                    .strip_prefix("dense(")
                    .and_then(|p| p.strip_suffix(')'))
                    .ok_or_else(bad)?;
                let (a, b) = inner.split_once(',').ok_or_else(bad)?;
                Ok(DenseShape::new(
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }
}

impl Serialize for ShapeTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ShapeTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    values: Vec<f64>,
    shape: ShapeTag,
}

impl WeightVector {
    pub fn new(values: Vec<f64>, shape: ShapeTag) -> Result<Self> {
        if values.len() != shape.param_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values for {shape}", shape.param_count()),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Self { values, shape })
    }

    pub fn zeros(shape: ShapeTag) -> Self {
        Self {
            values: vec![0.0; shape.param_count()],
            shape,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> &ShapeTag {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_shape(&self, shape: &ShapeTag) -> Result<()> {
        if &self.shape != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                found: self.shape.to_string(),
            });
        }
        Ok(())
    }

    /// Elementwise `self - other`; shapes must match.
    pub fn difference(&self, other: &Self) -> Result<Vec<f64>> {
        other.ensure_shape(&self.shape)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.difference(other)?.iter().map(|d| d.abs()).sum())
    }

    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.difference(other)?.iter().map(|d| d * d).sum::<f64>().sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_tag_text_round_trip() {
        let t = ShapeTag::new(vec![DenseShape::new(20, 64), DenseShape::new(64, 1)]).unwrap();
        assert_eq!(t.to_string(), "dense(20,64)+dense(64,1)");
        assert_eq!(t.to_string().parse::<ShapeTag>().unwrap(), t);
        assert_eq!(t.param_count(), 20 * 64 + 64 + 64 + 1);
        assert!("dense(3)".parse::<ShapeTag>().is_err());
        assert!("".parse::<ShapeTag>().is_err());
        assert_eq!("none".parse::<ShapeTag>().unwrap(), ShapeTag::empty());
        assert_eq!(ShapeTag::empty().param_count(), 0);
        assert!("dense(0,2)".parse::<ShapeTag>().is_err());
    }

    #[test]
    fn length_must_match_shape() {
        let t = ShapeTag::dense(2, 3).unwrap();
        assert!(WeightVector::new(vec![0.0; 9], t.clone()).is_ok());
        assert!(WeightVector::new(vec![0.0; 8], t).is_err());
    }

    #[test]
    fn distances_require_equal_shapes() {
        let a = WeightVector::new(vec![1.0, -2.0, 0.0], ShapeTag::dense(1, 1).unwrap()).unwrap_err();
        assert!(matches!(a, Error::ShapeMismatch { .. }));
        let t = ShapeTag::dense(1, 2).unwrap();
        let x = WeightVector::new(vec![1.0, -2.0, 0.0, 4.0], t.clone()).unwrap();
        let y = WeightVector::zeros(t);
        assert_eq!(x.l1_distance(&y).unwrap(), 7.0);
        assert_eq!(x.l2_distance(&y).unwrap(), 21f64.sqrt());
        let z = WeightVector::zeros(ShapeTag::dense(2, 1).unwrap());
        assert!(x.l1_distance(&z).is_err());
    }
}
