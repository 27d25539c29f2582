use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality residual accepted for a frame.
pub const FRAME_TOL: f64 = 1e-10;

/// Four orthonormal vectors in `R^m`, `m >= 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourFrame {
    vectors: [Vec<f64>; 4],
}

impl FourFrame {
    pub fn new(vectors: [Vec<f64>; 4]) -> Result<Self> {
        let m = vectors[0].len();
        if m < 4 {
            return Err(Error::InvalidFrame(format!("ambient dimension {m} < 4")));
        }
        if vectors.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidFrame("vectors of unequal length".into()));
        }
        let residual = orthonormality_residual(&vectors);
        if residual > FRAME_TOL {
            return Err(Error::InvalidFrame(format!(
                "not orthonormal: residual {residual:e}"
            )));
        }
        Ok(Self { vectors })
    }

    /// Builds a frame from a row-major `4 x m` array.
    pub fn from_rows(m: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != 4 * m {
            return Err(Error::InvalidFrame(format!(
                "expected {} entries, got {}",
                4 * m,
                rows.len()
            )));
        }
        let v = |a: usize| rows[a * m..(a + 1) * m].to_vec();
        Self::new([v(0), v(1), v(2), v(3)])
    }

    /// `e_{i0}, e_{i1}, e_{i2}, e_{i3}` in `R^m`.
    pub fn coordinate(m: usize, idx: [usize; 4]) -> Result<Self> {
        let unit = |i: usize| {
            let mut v = vec![0.0; m];
            if i < m {
                v[i] = 1.0;
            }
            v
        };
        Self::new([unit(idx[0]), unit(idx[1]), unit(idx[2]), unit(idx[3])])
    }

    /// The first four coordinate vectors of `R^m`.
    pub fn standard(m: usize) -> Result<Self> {
        Self::coordinate(m, [0, 1, 2, 3])
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>; 4] {
        &self.vectors
    }

    #[inline]
    pub fn e(&self, a: usize) -> &[f64] {
        &self.vectors[a]
    }

    pub fn to_rows(&self) -> Vec<f64> {
        self.vectors.iter().flatten().copied().collect()
    }

    /// Same frame with every vector padded by zeros to length `m`.
    pub fn embed(&self, m: usize) -> Result<Self> {
        if m < self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m,
            });
        }
        let pad = |v: &Vec<f64>| {
            let mut w = v.clone();
            w.resize(m, 0.0);
            w
        };
        Ok(Self {
            vectors: [
                pad(&self.vectors[0]),
                pad(&self.vectors[1]),
                pad(&self.vectors[2]),
                pad(&self.vectors[3]),
            ],
        })
    }
}

fn orthonormality_residual(v: &[Vec<f64>]) -> f64 {
    let mut r = 0.0f64;
    for a in 0..v.len() {
        for b in a..v.len() {
            let dot: f64 = v[a].iter().zip(&v[b]).map(|(x, y)| x * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            r = r.max((dot - target).abs());
        }
    }
    r
}

/// The pair `(lambda, mu)` of the parametric conditions, clamped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    lambda: f64,
    mu: f64,
}

impl FrameParams {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self {
            lambda: lambda.clamp(-1.0, 1.0),
            mu: mu.clamp(-1.0, 1.0),
        }
    }

    pub fn ones() -> Self {
        Self::new(1.0, 1.0)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_are_clamped() {
        let p = FrameParams::new(3.0, -1.5);
        assert_eq!((p.lambda(), p.mu()), (1.0, -1.0));
    }

    #[test]
    fn non_orthonormal_rejected() {
        let v = [
            vec![1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ];
        assert!(FourFrame::new(v).is_err());
        assert!(FourFrame::standard(3).is_err());
    }

    #[test]
    fn embedding_pads() {
        let f = FourFrame::standard(4).unwrap().embed(6).unwrap();
        assert_eq!(f.dim(), 6);
        assert_eq!(f.e(3), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
