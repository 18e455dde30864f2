use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpan {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamSpan {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Maps flat coordinates back to the named tensors they came from.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ParamLayout {
    spans: Vec<ParamSpan>,
    len: usize,
}

impl ParamLayout {
    pub fn new(shapes: impl IntoIterator<Item = (String, usize, usize)>) -> Self {
        let mut spans = Vec::new();
        let mut offset = 0;
        for (name, rows, cols) in shapes {
            spans.push(ParamSpan {
                name,
                rows,
                cols,
                offset,
            });
            offset += rows * cols;
        }
        ParamLayout { spans, len: offset }
    }

    pub fn spans(&self) -> &[ParamSpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Name of the tensor holding flat coordinate `index`.
    pub fn locate(&self, index: usize) -> Option<(&str, usize)> {
        self.spans
            .iter()
            .find(|s| s.range().contains(&index))
            .map(|s| (s.name.as_str(), index - s.offset))
    }
}

/// Flat vector of trainable scalars (θ), carrying the layout of the model
/// it was read from. Also used for gradients, Fisher diagonals and update
/// directions, which share the same coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Arc<ParamLayout>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, layout: Arc<ParamLayout>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::LengthMismatch {
                expected: layout.len(),
                actual: values.len(),
            });
        }
        Ok(ParameterVector { values, layout })
    }

    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        ParameterVector {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    /// Vector with no named layout, for toy problems and tests.
    pub fn from_values(values: Vec<f64>) -> Self {
        let layout = Arc::new(ParamLayout::new([("theta".to_string(), 1, values.len())]));
        ParameterVector { values, layout }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.layout.clone())
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.layout.clone())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn check_len(&self, other: &[f64]) -> Result<()> {
        if self.values.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                actual: other.len(),
            });
        }
        Ok(())
    }

    /// `self += k · other`
    pub fn add_scaled(&mut self, k: f64, other: &[f64]) -> Result<()> {
        self.check_len(other)?;
        for (a, b) in self.values.iter_mut().zip(other) {
            *a += k * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        for v in &mut self.values {
            *v *= k;
        }
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Arithmetic mean of equally-shaped vectors, summed in the given order.
pub fn mean_of(vectors: &[ParameterVector]) -> Result<ParameterVector> {
    let first = vectors.first().ok_or(Error::NoBatches("mean"))?;
    let mut acc = first.zeros_like();
    for v in vectors {
        acc.add_scaled(1.0, v)?;
    }
    acc.scale(1.0 / vectors.len() as f64);
    Ok(acc)
}
