//! Dense row-major complex tensors.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::CMat;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<C64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(alloc::format!("{} entries for shape {:?}", data.len(), shape)));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        let st = strides(&self.shape);
        self.data[idx.iter().zip(&st).map(|(i, s)| i * s).sum::<usize>()]
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::linalg::ksum(self.data.iter().map(|z| z.norm_sqr()))
    }

    pub fn norm(&self) -> f64 {
        num_traits::Float::sqrt(self.norm_sqr())
    }

    pub fn scale(&mut self, s: C64) {
        for z in self.data.iter_mut() {
            *z *= s;
        }
    }

    /// New tensor whose axis `i` is axis `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Tensor {
        assert_eq!(perm.len(), self.rank());
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return self.clone();
        }
        let st = strides(&self.shape);
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let pst: Vec<usize> = perm.iter().map(|&p| st[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        let mut off = 0usize;
        for _ in 0..n {
            data.push(self.data[off]);
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                off += pst[ax];
                if idx[ax] < shape[ax] {
                    break;
                }
                off -= pst[ax] * shape[ax];
                idx[ax] = 0;
            }
        }
        Tensor { shape, data }
    }

    /// Moves axis `from` to position `to`, keeping the others in order.
    pub fn move_axis(&self, from: usize, to: usize) -> Tensor {
        let mut order: Vec<usize> = (0..self.rank()).filter(|&a| a != from).collect();
        order.insert(to, from);
        self.permute(&order)
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(alloc::format!("cannot reshape {:?} to {:?}", self.shape, shape)));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Matrix with rows over `row_axes` (in that order) and columns over the
    /// remaining axes in their original order.
    pub fn matricize(&self, row_axes: &[usize]) -> CMat {
        let mut perm = row_axes.to_vec();
        perm.extend((0..self.rank()).filter(|a| !row_axes.contains(a)));
        let p = self.permute(&perm);
        let r: usize = row_axes.iter().map(|&a| self.shape[a]).product();
        let c = self.data.len().checked_div(r).unwrap_or(0);
        CMat::from_row_slice(r, c, &p.data)
    }

    pub fn from_matrix(m: &CMat, shape: &[usize]) -> Result<Tensor> {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Tensor::from_vec(shape, data)
    }

    /// Contracts axis `a` of `self` with axis `b` of `other`. Result axes are
    /// the remaining axes of `self` followed by the remaining axes of `other`.
    pub fn contract(&self, a: usize, other: &Tensor, b: usize) -> Result<Tensor> {
        if self.shape[a] != other.shape[b] {
            return Err(Error::Shape(alloc::format!("contracting {} with {}", self.shape[a], other.shape[b])));
        }
        let left_axes: Vec<usize> = (0..self.rank()).filter(|&x| x != a).collect();
        let lm = self.matricize(&left_axes);
        let rm = other.matricize(&[b]);
        let prod = crate::linalg::matmul(&lm, &rm);
        let mut shape: Vec<usize> = left_axes.iter().map(|&x| self.shape[x]).collect();
        shape.extend((0..other.rank()).filter(|&x| x != b).map(|x| other.shape[x]));
        Tensor::from_matrix(&prod, &shape)
    }

    /// Fixes axis `axis` at `index`, removing it.
    pub fn slice(&self, axis: usize, index: usize) -> Tensor {
        let moved = self.move_axis(axis, 0);
        let inner: usize = moved.shape[1..].iter().product();
        let data = moved.data[index * inner..(index + 1) * inner].to_vec();
        Tensor { shape: moved.shape[1..].to_vec(), data }
    }

    /// Multiplies axis `axis` by the matrix `m` (new index first):
    /// `out[.., i, ..] = sum_j m[i, j] self[.., j, ..]`.
    pub fn apply_matrix(&self, axis: usize, m: &CMat) -> Result<Tensor> {
        let mt = Tensor::from_matrix(m, &[m.nrows(), m.ncols()])?;
        let t = self.contract(axis, &mt, 1)?;
        Ok(t.move_axis(self.rank() - 1, axis))
    }

    pub fn inner(&self, other: &Tensor) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }
}
