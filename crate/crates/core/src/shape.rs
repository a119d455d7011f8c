use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extents of a vector (one entry) or a column-major matrix (two entries).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 {
            return Err(Error::arg(format!(
                "shape must have one or two extents, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::arg(format!("zero extent in shape {dims:?}")));
        }
        Ok(Shape { dims })
    }

    pub fn vector(n: usize) -> Self {
        assert!(n >= 1, "vector length must be positive");
        Shape { dims: vec![n] }
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix extents must be positive");
        Shape { dims: vec![rows, cols] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_matrix(&self) -> bool {
        self.dims.len() == 2
    }

    /// Rows and columns, treating a vector as a single column.
    pub fn rows_cols(&self) -> (usize, usize) {
        match self.dims[..] {
            [n] => (n, 1),
            [r, c] => (r, c),
            _ => unreachable!(),
        }
    }

    /// The vectorized shape with the same number of entries.
    pub fn flat(&self) -> Shape {
        Shape::vector(self.total())
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.dims
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dims[..] {
            [n] => write!(f, "{n}"),
            [r, c] => write!(f, "{r}x{c}"),
            _ => unreachable!(),
        }
    }
}
