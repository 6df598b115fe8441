use crate::error::{Error, Result};
use crate::numerics::graph::{Graph, Var};
use crate::numerics::ops::matmul;
use crate::numerics::Tensor;

/// Complex matrix stored as split real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    re: Tensor,
    im: Tensor,
}

impl ComplexMatrix {
    pub fn new(re: Tensor, im: Tensor) -> Result<Self> {
        if re.shape() != im.shape() || re.shape().len() != 2 {
            return Err(Error::shape("complex parts", re.shape(), im.shape()));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            re: Tensor::zeros(rows, cols),
            im: Tensor::zeros(rows, cols),
        }
    }

    /// Builds from `(re, im)` pairs in row-major order.
    pub fn from_pairs(rows: usize, cols: usize, pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries for a {rows}x{cols} matrix",
                pairs.len()
            )));
        }
        Self::new(
            Tensor::matrix(rows, cols, pairs.iter().map(|p| p.0).collect())?,
            Tensor::matrix(rows, cols, pairs.iter().map(|p| p.1).collect())?,
        )
    }

    pub fn rows(&self) -> usize {
        self.re.rows()
    }

    pub fn cols(&self) -> usize {
        self.re.cols()
    }

    pub fn re(&self) -> &Tensor {
        &self.re
    }

    pub fn im(&self) -> &Tensor {
        &self.im
    }

    pub fn get(&self, r: usize, c: usize) -> (f64, f64) {
        (self.re.get(r, c), self.im.get(r, c))
    }

    pub fn set(&mut self, r: usize, c: usize, value: (f64, f64)) {
        self.re.set(r, c, value.0);
        self.im.set(r, c, value.1);
    }

    /// Column `c` as `(re, im)` pairs.
    pub fn column(&self, c: usize) -> Vec<(f64, f64)> {
        (0..self.rows()).map(|r| self.get(r, c)).collect()
    }

    /// Product computed with four real matrix products.
    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        let rr = matmul(&self.re, &other.re)?;
        let ii = matmul(&self.im, &other.im)?;
        let ri = matmul(&self.re, &other.im)?;
        let ir = matmul(&self.im, &other.re)?;
        let re: Vec<f64> = rr.data().iter().zip(ii.data()).map(|(a, b)| a - b).collect();
        let im: Vec<f64> = ri.data().iter().zip(ir.data()).map(|(a, b)| a + b).collect();
        let (r, c) = (rr.rows(), rr.cols());
        Ok(ComplexMatrix {
            re: Tensor::from_raw(r, c, re),
            im: Tensor::from_raw(r, c, im),
        })
    }

    pub fn conj_transpose(&self) -> ComplexMatrix {
        ComplexMatrix {
            re: self.re.transpose(),
            im: self.im.transpose().map(|v| -v),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.re.data().iter().chain(self.im.data()).map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn zip_with(&self, other: &ComplexMatrix, f: impl Fn(f64, f64) -> f64) -> Result<ComplexMatrix> {
        if self.re.shape() != other.re.shape() {
            return Err(Error::shape("complex elementwise", self.re.shape(), other.re.shape()));
        }
        let (r, c) = (self.rows(), self.cols());
        let re = self.re.data().iter().zip(other.re.data()).map(|(a, b)| f(*a, *b)).collect();
        let im = self.im.data().iter().zip(other.im.data()).map(|(a, b)| f(*a, *b)).collect();
        Ok(ComplexMatrix {
            re: Tensor::from_raw(r, c, re),
            im: Tensor::from_raw(r, c, im),
        })
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> ComplexMatrix {
        ComplexMatrix {
            re: self.re.map(|v| v * s),
            im: self.im.map(|v| v * s),
        }
    }

    /// New matrix whose column `k` is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.rows(), perm.len());
        for (k, &src) in perm.iter().enumerate() {
            for r in 0..self.rows() {
                out.set(r, k, self.get(r, src));
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// Row-major `(re, im)` pairs.
    pub fn to_pairs(&self) -> Vec<(f64, f64)> {
        self.re.data().iter().copied().zip(self.im.data().iter().copied()).collect()
    }

    pub fn into_parts(self) -> (Tensor, Tensor) {
        (self.re, self.im)
    }
}

/// Complex value on a [`Graph`], carried as two real nodes.
#[derive(Clone, Copy, Debug)]
pub struct CVar {
    pub re: Var,
    pub im: Var,
}

impl CVar {
    pub fn constant(g: &mut Graph, m: &ComplexMatrix) -> CVar {
        CVar {
            re: g.constant(m.re.clone()),
            im: g.constant(m.im.clone()),
        }
    }

    pub fn value(self, g: &Graph) -> ComplexMatrix {
        ComplexMatrix {
            re: g.value(self.re).clone(),
            im: g.value(self.im).clone(),
        }
    }

    pub fn matmul(self, g: &mut Graph, other: CVar) -> Result<CVar> {
        let rr = g.matmul(self.re, other.re)?;
        let ii = g.matmul(self.im, other.im)?;
        let ri = g.matmul(self.re, other.im)?;
        let ir = g.matmul(self.im, other.re)?;
        Ok(CVar {
            re: g.sub(rr, ii)?,
            im: g.add(ri, ir)?,
        })
    }

    pub fn conj_transpose(self, g: &mut Graph) -> CVar {
        let re = g.transpose(self.re);
        let im = g.transpose(self.im);
        CVar {
            re,
            im: g.scale(im, -1.0),
        }
    }

    /// Element-wise squared modulus.
    pub fn abs2(self, g: &mut Graph) -> Result<Var> {
        let a = g.mul(self.re, self.re)?;
        let b = g.mul(self.im, self.im)?;
        g.add(a, b)
    }
}
