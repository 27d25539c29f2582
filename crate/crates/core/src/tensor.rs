//! Dense rank-4 arrays over `R^n` and the index machinery shared by the
//! curvature code.
//!
//! Storage is row-major: entry `(i, j, k, l)` lives at `((i*n + j)*n + k)*n + l`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Symmetry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n.pow(4)],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n.pow(4) {
            return Err(Error::InvalidShape(format!(
                "expected {} entries for n = {n}, got {}",
                n.pow(4),
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    /// Builds a tensor entry by entry.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n.pow(4));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Self { n, data }
    }

    #[inline]
    /// The tensor with pair symmetries whose matrix on `i < j`, `k < l` pairs is `m`.
    /// `m` must be square of side `n(n-1)/2`; no Bianchi projection is applied.
    pub fn from_lambda2(n: usize, m: &DMatrix<f64>) -> Self {
        Self::from_fn(n, |i, j, k, l| {
            if i == j || k == l {
                return 0.0;
            }
            let (a, sa) = if i < j { (pair_index(n, i, j), 1.0) } else { (pair_index(n, j, i), -1.0) };
            let (b, sb) = if k < l { (pair_index(n, k, l), 1.0) } else { (pair_index(n, l, k), -1.0) };
            sa * sb * m[(a, b)]
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let p = self.idx(i, j, k, l);
        self.data[p] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &Tensor4) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch in tensor sum");
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch in tensor comparison");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest violation of each of the three pairwise symmetries.
    pub fn symmetry_residuals(&self) -> [(Symmetry, f64); 3] {
        let n = self.n;
        let (mut a1, mut a2, mut ps) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        a1 = a1.max((v + self.get(j, i, k, l)).abs());
                        a2 = a2.max((v + self.get(i, j, l, k)).abs());
                        ps = ps.max((v - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        [
            (Symmetry::FirstPair, a1),
            (Symmetry::SecondPair, a2),
            (Symmetry::PairExchange, ps),
        ]
    }

    /// Max abs of `T_ijkl + T_iklj + T_iljk`.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut r = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let c = self.get(i, j, k, l) + self.get(i, k, l, j) + self.get(i, l, j, k);
                        r = r.max(c.abs());
                    }
                }
            }
        }
        r
    }

    /// The cyclic-sum map `b(T)_ijkl = (T_ijkl + T_iklj + T_iljk)/3`.
    pub fn cyclic_part(&self) -> Tensor4 {
        Tensor4::from_fn(self.n, |i, j, k, l| {
            (self.get(i, j, k, l) + self.get(i, k, l, j) + self.get(i, l, j, k)) / 3.0
        })
    }

    /// Average over the eight images of the antisymmetry and pair symmetry group.
    pub fn symmetrize_pairs(&self) -> Tensor4 {
        Tensor4::from_fn(self.n, |i, j, k, l| {
            (self.get(i, j, k, l) - self.get(j, i, k, l) - self.get(i, j, l, k)
                + self.get(j, i, l, k)
                + self.get(k, l, i, j)
                - self.get(l, k, i, j)
                - self.get(k, l, j, i)
                + self.get(l, k, j, i))
                / 8.0
        })
    }

    /// `T(a, b, c, d) = sum T_ijkl a_i b_j c_k d_l`.
    pub fn contract(&self, a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
        let n = self.n;
        debug_assert!(a.len() == n && b.len() == n && c.len() == n && d.len() == n);
        let mut total = 0.0;
        let mut p = 0;
        for i in 0..n {
            let ai = a[i];
            if ai == 0.0 {
                p += n * n * n;
                continue;
            }
            let mut si = 0.0;
            for bj in b.iter().take(n) {
                let mut sj = 0.0;
                for ck in c.iter().take(n) {
                    let row = &self.data[p..p + n];
                    let sk: f64 = row.iter().zip(d).map(|(t, dl)| t * dl).sum();
                    sj += ck * sk;
                    p += n;
                }
                si += bj * sj;
            }
            total += ai * si;
        }
        total
    }

    /// `(g . T)_ijkl = g_ia g_jb g_kc g_ld T_abcd` for an `n x n` matrix `g`.
    pub fn transform(&self, g: &DMatrix<f64>) -> Tensor4 {
        let n = self.n;
        assert!(g.nrows() == n && g.ncols() == n, "transform matrix must be n x n");
        let mut cur = self.data.clone();
        let mut next = vec![0.0; cur.len()];
        // One mode product per slot; after four passes the slots are back in order.
        for _ in 0..4 {
            for a in 0..n {
                for rest in 0..n * n * n {
                    // cur indexed (a, rest) -> next indexed (rest, i)
                    let v = cur[a * n * n * n + rest];
                    if v == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        next[rest * n + i] += g[(i, a)] * v;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
            next.iter_mut().for_each(|x| *x = 0.0);
        }
        Tensor4 { n, data: cur }
    }

    /// Restriction to the leading `m` coordinates.
    pub fn restrict(&self, m: usize) -> Tensor4 {
        assert!(m <= self.n);
        Tensor4::from_fn(m, |i, j, k, l| self.get(i, j, k, l))
    }
}

impl std::ops::Add for &Tensor4 {
    type Output = Tensor4;
    fn add(self, rhs: &Tensor4) -> Tensor4 {
        self.add_scaled(1.0, rhs)
    }
}

impl std::ops::Sub for &Tensor4 {
    type Output = Tensor4;
    fn sub(self, rhs: &Tensor4) -> Tensor4 {
        self.add_scaled(-1.0, rhs)
    }
}

/// Lexicographic list of index pairs `i < j`, the basis of `Lambda^2 R^n`.
pub fn pair_list(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

/// Position of the pair `(i, j)`, `i < j`, in [`pair_list`].
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// The 2-form `a ^ b` in the pair basis: component `(i,j)` is `a_i b_j - a_j b_i`.
pub fn wedge(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = a.len();
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            out[p] = a[i] * b[j] - a[j] * b[i];
            p += 1;
        }
    }
}
