//! Thin wrappers over nalgebra factorizations with the conventions used
//! throughout the crate (descending singular values, thin factors).

use alloc::vec::Vec;
use nalgebra::{DMatrix, SVD};
#[allow(unused_imports)] // std links in its own float methods under `cargo test`
use num_traits::Float;

use crate::{Error, Result, C64};

pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

/// Singular values below this fraction of the largest one are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub vt: CMat,
}

/// Thin SVD with singular values sorted in descending order.
pub fn svd(m: &CMat) -> Result<Svd> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    if r > 2 * c {
        let (q, rr) = qr(m);
        let inner = svd(&rr)?;
        return Ok(Svd { u: matmul(&q, &inner.u), s: inner.s, vt: inner.vt });
    }
    if c > 2 * r {
        let t = svd(&m.adjoint())?;
        return Ok(Svd { u: t.vt.adjoint(), s: t.s, vt: t.u.adjoint() });
    }
    let (u0, sv, vt0) = match real_view(m) {
        Some(r) => {
            let dec = SVD::try_new(r, true, true, f64::EPSILON, 0).ok_or(Error::NoConvergence)?;
            let u = complexify(&dec.u.ok_or(Error::NoConvergence)?);
            let vt = complexify(&dec.v_t.ok_or(Error::NoConvergence)?);
            (u, dec.singular_values, vt)
        }
        None => {
            let dec = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0).ok_or(Error::NoConvergence)?;
            (dec.u.ok_or(Error::NoConvergence)?, dec.singular_values, dec.v_t.ok_or(Error::NoConvergence)?)
        }
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut u = CMat::zeros(r, k);
    let mut vt = CMat::zeros(k, c);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u0.column(src));
        vt.set_row(dst, &vt0.row(src));
        s.push(sv[src]);
    }
    Ok(Svd { u, s, vt })
}

/// `a * b` through the packed complex kernel. Small products go through
/// nalgebra directly.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m.min(k).min(n) <= 4 {
        return a * b;
    }
    let mut c = CMat::zeros(m, n);
    // SAFETY: Complex<f64> is repr(C) with layout [re, im]; all three
    // matrices are dense column-major with the strides given.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

fn dmatmul(a: &RMat, b: &RMat) -> RMat {
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m.min(k).min(n) <= 4 {
        return a * b;
    }
    let mut c = RMat::zeros(m, n);
    // SAFETY: dense column-major buffers with matching strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
    c
}

/// The real part when every imaginary part is exactly zero.
fn real_view(m: &CMat) -> Option<RMat> {
    if m.iter().all(|z| z.im == 0.0) {
        Some(m.map(|z| z.re))
    } else {
        None
    }
}

fn complexify(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Singular values only, descending, from the eigenvalues of the smaller
/// Gram matrix. Values below about `1e-8` of the largest lose relative
/// accuracy, which is harmless for entropies and weights.
pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    if m.nrows().min(m.ncols()) == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    let ev = match real_view(m) {
        Some(r) => {
            let g = if r.nrows() >= r.ncols() { dmatmul(&r.transpose(), &r) } else { dmatmul(&r, &r.transpose()) };
            g.symmetric_eigenvalues()
        }
        None => {
            let g = if m.nrows() >= m.ncols() { matmul(&m.adjoint(), m) } else { matmul(m, &m.adjoint()) };
            g.symmetric_eigenvalues()
        }
    };
    let mut s: Vec<f64> = ev.iter().map(|&x| x.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Thin QR: `m = q r` with `q` of shape rows x min(rows, cols).
pub fn qr(m: &CMat) -> (CMat, CMat) {
    if let Some(r) = real_view(m) {
        let dec = r.qr();
        return (complexify(&dec.q()), complexify(&dec.r()));
    }
    let dec = m.clone().qr();
    (dec.q(), dec.r())
}

/// Numerical rank of a descending singular value list.
pub fn numerical_rank(s: &[f64]) -> usize {
    match s.first() {
        None => 0,
        Some(&top) if top <= 0.0 => 0,
        Some(&top) => s.iter().take_while(|&&x| x > RANK_CUTOFF * top).count(),
    }
}

/// Largest deviation of `m^H m` from the identity.
pub fn isometry_defect(m: &CMat) -> f64 {
    let g = m.adjoint() * m;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Extends orthonormal columns to `cols` orthonormal columns by Gram-Schmidt
/// against the standard basis.
pub fn complete_isometry(m: &CMat, cols: usize) -> CMat {
    let rows = m.nrows();
    let mut out = CMat::zeros(rows, cols);
    let have = m.ncols().min(cols);
    for j in 0..have {
        out.set_column(j, &m.column(j));
    }
    let mut next = have;
    let mut e = 0;
    while next < cols && e < rows {
        let mut v = nalgebra::DVector::<C64>::zeros(rows);
        v[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for j in 0..next {
                let col = out.column(j);
                let proj = col.dotc(&v);
                v -= col * proj;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-6 {
            out.set_column(next, &(v / C64::new(nrm, 0.0)));
            next += 1;
        }
        e += 1;
    }
    out
}

/// Symmetric inverse square root of a real symmetric positive-definite matrix.
pub fn inv_sqrt_spd(m: &RMat) -> Result<RMat> {
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v <= 1e-14 * top.max(1e-300) {
            return Err(Error::IllConditioned("block is singular".into()));
        }
        *v = 1.0 / v.sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * RMat::from_diagonal(&d) * q.transpose())
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &RMat) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Singular values of a real matrix, descending.
pub fn real_singular_values(m: &RMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Kahan-compensated sum.
pub fn ksum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |i, j| {
            let x = (i * 7 + j * 13) as f64;
            C64::new((x * 0.37).sin(), (x * 0.11 + 0.5).cos())
        })
    }

    #[test]
    fn matmul_matches_naive() {
        for &(m, k, n) in &[(2, 3, 4), (9, 7, 11), (40, 33, 17)] {
            let (a, b) = (sample(m, k), sample(k, n).map(|z| z.conj()));
            assert!((matmul(&a, &b) - &a * &b).camax() < 1e-12);
        }
    }

    #[test]
    fn singular_values_agree_with_svd() {
        for &(r, c) in &[(30, 8), (8, 30), (12, 12)] {
            let m = sample(r, c);
            let (a, b) = (singular_values(&m).unwrap(), svd(&m).unwrap().s);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-7 * b[0]);
            }
        }
    }

    #[test]
    fn svd_reconstructs_and_sorts() {
        for &(r, c) in &[(5, 3), (3, 5), (4, 4), (20, 3), (3, 20)] {
            let m = sample(r, c);
            let d = svd(&m).unwrap();
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            let s = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                d.s.len(),
                d.s.iter().map(|&x| C64::new(x, 0.0)),
            ));
            let back = &d.u * s * &d.vt;
            assert!((back - m).norm() < 1e-12);
            assert!(isometry_defect(&d.u) < 1e-12);
        }
    }

    #[test]
    fn completion_keeps_isometry() {
        let m = sample(8, 3);
        let (q, _) = qr(&m);
        let full = complete_isometry(&q, 8);
        assert!(isometry_defect(&full) < 1e-12);
        assert!((full.columns(0, 3) - q).norm() < 1e-14);
    }

    #[test]
    fn inverse_square_root() {
        let m = RMat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let w = inv_sqrt_spd(&m).unwrap();
        let id = &w * &m * &w;
        assert!((id - RMat::identity(2, 2)).norm() < 1e-12);
        assert!(inv_sqrt_spd(&RMat::zeros(2, 2)).is_err());
    }

    #[test]
    fn rank_cutoff() {
        assert_eq!(numerical_rank(&[1.0, 1e-3, 1e-13]), 2);
        assert_eq!(numerical_rank(&[0.0]), 0);
    }
}
