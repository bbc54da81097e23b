//! Dense real-valued multi-channel spatial fields.
//!
//! Storage is channel-major, then row-major: element `(c, h, w)` lives at
//! `c * height * width + h * width + w`.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{CnsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(CnsError::invalid(format!(
                "grid dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
        })
    }

    /// Single-channel square grid; panics on zero size.
    pub fn square(size: usize) -> Self {
        Self::new(size, size, 1).expect("square grid size must be positive")
    }

    /// Pixels per channel.
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    /// Total number of scalar entries `C * H * W`.
    pub fn len(&self) -> usize {
        self.plane_len() * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn ensure_eq(&self, other: &GridShape) -> Result<()> {
        if self != other {
            return Err(CnsError::ShapeMismatch {
                expected: self.to_string(),
                actual: other.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    shape: GridShape,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(shape: GridShape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn filled(shape: GridShape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: GridShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(CnsError::ShapeMismatch {
                expected: format!("{} values ({shape})", shape.len()),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for h in 0..shape.height {
                for w in 0..shape.width {
                    data.push(f(c, h, w));
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.shape.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.shape.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.offset(c, h, w)]
    }

    fn offset(&self, c: usize, h: usize, w: usize) -> usize {
        (c * self.shape.height + h) * self.shape.width + w
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Field) {
        debug_assert_eq!(self.shape, other.shape);
        for (y, x) in self.data.iter_mut().zip(&other.data) {
            *y += a * x;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// Element-wise `a * self + b * other`.
    pub fn lincomb(a: f64, x: &Field, b: f64, y: &Field) -> Field {
        debug_assert_eq!(x.shape, y.shape);
        let data = x
            .data
            .iter()
            .zip(&y.data)
            .map(|(p, q)| a * p + b * q)
            .collect();
        Field {
            shape: x.shape,
            data,
        }
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation over all channels and pixels jointly.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        let var = self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64;
        var.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize, usize)> for Field {
    type Output = f64;

    fn index(&self, (c, h, w): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(c, h, w)]
    }
}

impl IndexMut<(usize, usize, usize)> for Field {
    fn index_mut(&mut self, (c, h, w): (usize, usize, usize)) -> &mut f64 {
        let i = self.offset(c, h, w);
        &mut self.data[i]
    }
}
