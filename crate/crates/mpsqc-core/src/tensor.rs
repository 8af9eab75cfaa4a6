//! Dense real tensors and the handful of factorizations the rest of the crate leans on.
//!
//! Storage is row-major with explicit dimensions. Matrices are `nalgebra::DMatrix<f64>`;
//! conversions to and from tensors always go through row-major order.

use nalgebra::{DMatrix, SMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch(format!("zero-sized axis in {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} need {n} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { dims, data: vec![0.0; n] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.data)
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Axis `k` of the result is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r || perm.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::DimensionMismatch(format!("{perm:?} is not a permutation of rank {r}")));
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut in_strides = vec![1usize; r];
        for k in (0..r.saturating_sub(1)).rev() {
            in_strides[k] = in_strides[k + 1] * self.dims[k + 1];
        }
        let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            out.push(self.data[src]);
            for k in (0..r).rev() {
                idx[k] += 1;
                src += strides[k];
                if idx[k] < new_dims[k] {
                    break;
                }
                src -= strides[k] * new_dims[k];
                idx[k] = 0;
            }
        }
        Ok(Self { dims: new_dims, data: out })
    }

    /// Rows are the leading `split` axes, columns the rest.
    pub fn to_matrix(&self, split: usize) -> Matrix {
        let rows: usize = self.dims[..split].iter().product();
        let cols: usize = self.dims[split..].iter().product();
        Matrix::from_row_slice(rows, cols, &self.data)
    }

    pub fn from_matrix(m: &Matrix, dims: Vec<usize>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        Self::new(dims, data)
    }
}

/// Contract paired axes of `a` and `b`. The result keeps the free axes of `a`, then of `b`.
pub fn contract(a: &DenseTensor, b: &DenseTensor, axes: &[(usize, usize)]) -> Result<DenseTensor> {
    for &(i, j) in axes {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::DimensionMismatch(format!("axis pair ({i},{j}) out of range")));
        }
        if a.dims[i] != b.dims[j] {
            return Err(Error::DimensionMismatch(format!(
                "axis {i} of a has size {}, axis {j} of b has size {}",
                a.dims[i], b.dims[j]
            )));
        }
    }
    let ca: Vec<usize> = axes.iter().map(|p| p.0).collect();
    let cb: Vec<usize> = axes.iter().map(|p| p.1).collect();
    let fa: Vec<usize> = (0..a.rank()).filter(|k| !ca.contains(k)).collect();
    let fb: Vec<usize> = (0..b.rank()).filter(|k| !cb.contains(k)).collect();
    if fa.len() + ca.len() != a.rank() || fb.len() + cb.len() != b.rank() {
        return Err(Error::DimensionMismatch("repeated axis in contraction".into()));
    }
    let pa: Vec<usize> = fa.iter().chain(&ca).copied().collect();
    let pb: Vec<usize> = cb.iter().chain(&fb).copied().collect();
    let ap = a.permute(&pa)?;
    let bp = b.permute(&pb)?;
    let m: usize = fa.iter().map(|&k| a.dims[k]).product();
    let k: usize = ca.iter().map(|&x| a.dims[x]).product();
    let n: usize = fb.iter().map(|&x| b.dims[x]).product();
    let mut out = vec![0.0; m * n];
    gemm_rowmajor(m, k, n, &ap.data, &bp.data, &mut out);
    let mut dims: Vec<usize> = fa.iter().map(|&x| a.dims[x]).collect();
    dims.extend(fb.iter().map(|&x| b.dims[x]));
    if dims.is_empty() {
        dims.push(1);
    }
    DenseTensor::new(dims, out)
}

/// c (m×n) = a (m×k) · b (k×n), all row-major.
pub(crate) fn gemm_rowmajor(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    // SAFETY: slice lengths are checked above and the strides describe dense row-major blocks.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Strided gemm: c (m×n, row-major) = op(a)·op(b) where the strides encode any transposition.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_strided(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k == 0 {
        c[..m * n].iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `m = L·Q` with `Q·Qᵀ = I`; the diagonal of `L` is made non-negative.
pub fn lq_decompose(m: &Matrix) -> (Matrix, Matrix) {
    let qr = m.transpose().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (r.transpose(), q.transpose())
}

#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * &self.vt
    }

    /// Keep the leading `k` singular triples.
    pub fn truncate(&self, k: usize) -> Svd {
        let k = k.min(self.s.len());
        Svd {
            u: self.u.columns(0, k).into_owned(),
            s: self.s[..k].to_vec(),
            vt: self.vt.rows(0, k).into_owned(),
        }
    }
}

/// Thin SVD with descending singular values. Each left singular vector is signed so
/// that its largest-magnitude entry is positive.
///
/// nalgebra's bidiagonal SVD occasionally returns factors that do not reconstruct the
/// input (seen on wide, nearly rank-deficient matrices), so every result is checked and
/// a one-sided Jacobi SVD takes over when the check fails.
pub fn svd(m: &Matrix) -> Svd {
    let (u0, s0, vt0) = raw_svd(m);
    let k = s0.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s0[b].total_cmp(&s0[a]).then(a.cmp(&b)));
    let mut u = Matrix::zeros(m.nrows(), k);
    let mut vt = Matrix::zeros(k, m.ncols());
    let mut s = Vec::with_capacity(k);
    for (j, &o) in order.iter().enumerate() {
        let col = u0.column(o);
        let mut best = 0usize;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        let sign = if col.len() > 0 && col[best] < 0.0 { -1.0 } else { 1.0 };
        u.set_column(j, &(col * sign));
        vt.set_row(j, &(vt0.row(o) * sign));
        s.push(s0[o].max(0.0));
    }
    Svd { u, s, vt }
}

fn svd_ok(m: &Matrix, u: &Matrix, s: &[f64], vt: &Matrix) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut us = u.clone();
    for (j, &x) in s.iter().enumerate() {
        us.column_mut(j).scale_mut(x);
    }
    let k = s.len();
    let ortho = |q: &Matrix| (q.transpose() * q - Matrix::identity(k, k)).amax();
    s.iter().all(|x| x.is_finite())
        && (us * vt - m).amax() <= 1e-11 * scale
        && ortho(u) < 1e-10
        && ortho(&vt.transpose()) < 1e-10
}

fn raw_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    if m.is_empty() {
        let k = m.nrows().min(m.ncols());
        return (Matrix::zeros(m.nrows(), k), vec![0.0; k], Matrix::zeros(k, m.ncols()));
    }
    let wide = m.nrows() < m.ncols();
    let tall = if wide { m.transpose() } else { m.clone() };
    let dec = nalgebra::linalg::SVD::new(tall.clone(), true, true);
    let (mut u, mut vt) = (dec.u.expect("left vectors requested"), dec.v_t.expect("right vectors requested"));
    let mut s: Vec<f64> = dec.singular_values.iter().cloned().collect();
    if !svd_ok(&tall, &u, &s, &vt) {
        (u, s, vt) = jacobi_svd(&tall);
    }
    if wide {
        (vt.transpose(), s, u.transpose())
    } else {
        (u, s, vt)
    }
}

/// One-sided Jacobi SVD of a tall matrix (rows ≥ cols).
fn jacobi_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (rows, cols) = a.shape();
    let mut w = a.clone();
    let mut v = Matrix::identity(cols, cols);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..cols {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..cols).map(|j| w.column(j).norm()).collect();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let mut u = Matrix::zeros(rows, cols);
    for j in 0..cols {
        if s[j] > 1e-300 && s[j] > 1e-15 * smax {
            u.set_column(j, &(w.column(j) / s[j]));
        }
    }
    // columns of u belonging to zero singular values are completed to an orthonormal set
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0x6a61_636f);
    let keep: Vec<usize> = (0..cols).filter(|&j| u.column(j).norm() > 0.5).collect();
    if keep.len() < cols {
        let q = Matrix::from_fn(rows, keep.len(), |i, c| u[(i, keep[c])]);
        let full = gram_schmidt_complete(&q, &mut rng).expect("orthonormal columns");
        let mut next = keep.len();
        for j in 0..cols {
            if u.column(j).norm() <= 0.5 {
                u.set_column(j, &full.column(next));
                next += 1;
            }
        }
    }
    (u, s, v.transpose())
}

/// Entry `i` is `1/s_i` if `s_i > tol·max(s)`, else 0.
pub fn pseudo_inverse(s: &[f64], tol: f64) -> Vec<f64> {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    s.iter()
        .map(|&x| if smax > 0.0 && x > tol * smax { 1.0 / x } else { 0.0 })
        .collect()
}

/// ‖QᵀQ − I‖_F
pub fn column_orthonormality_residual(q: &Matrix) -> f64 {
    let g = q.transpose() * q;
    (g - Matrix::identity(q.ncols(), q.ncols())).norm()
}

/// Extend orthonormal columns `q` to a square orthogonal matrix. New columns come from
/// Gaussian draws, orthogonalized twice and re-drawn if nearly dependent.
pub fn gram_schmidt_complete<R: Rng + ?Sized>(q: &Matrix, rng: &mut R) -> Result<Matrix> {
    let (n, k) = q.shape();
    if k > n {
        return Err(Error::DimensionMismatch(format!("{n}×{k} has more columns than rows")));
    }
    let res = column_orthonormality_residual(q);
    if res > 1e-10 {
        return Err(Error::NotOrthonormal(res));
    }
    let mut g = Matrix::zeros(n, n);
    g.columns_mut(0, k).copy_from(q);
    for j in k..n {
        loop {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let n0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for _ in 0..2 {
                for c in 0..j {
                    let col = g.column(c);
                    let p: f64 = col.iter().zip(&v).map(|(a, b)| a * b).sum();
                    for (x, a) in v.iter_mut().zip(col.iter()) {
                        *x -= p * a;
                    }
                }
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv > 1e-8 * n0 {
                for (i, x) in v.iter().enumerate() {
                    g[(i, j)] = x / nv;
                }
                break;
            }
        }
    }
    Ok(g)
}

fn skew_residual(a: &Matrix) -> f64 {
    (a + a.transpose()).amax()
}

/// Matrix exponential of a skew-symmetric matrix; the result lies in SO(n).
pub fn expm_skew(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("expm of non-square matrix".into()));
    }
    let r = skew_residual(a);
    if r > 1e-12 * a.amax().max(1.0) {
        return Err(Error::NotSkewSymmetric(r));
    }
    Ok(expm(a))
}

fn norm1(a: &Matrix) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Scaling and squaring with a truncated Taylor series on the scaled matrix (‖·‖₁ ≤ 1/4).
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let nrm = norm1(a);
    let mut s = 0i32;
    while nrm * 0.5f64.powi(s) > 0.25 && s < 60 {
        s += 1;
    }
    let b = a * 0.5f64.powi(s);
    let mut result = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=24 {
        term = &term * &b / k as f64;
        result += &term;
        if term.amax() < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Stack-allocated variant used in optimizer inner loops.
pub fn expm_static<const N: usize>(a: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let mut nrm = 0.0f64;
    for j in 0..N {
        let c: f64 = (0..N).map(|i| a[(i, j)].abs()).sum();
        nrm = nrm.max(c);
    }
    let mut s = 0i32;
    while nrm * 0.5f64.powi(s) > 0.25 && s < 60 {
        s += 1;
    }
    let b = a * 0.5f64.powi(s);
    let mut result = SMatrix::<f64, N, N>::identity();
    let mut term = SMatrix::<f64, N, N>::identity();
    for k in 1..=24 {
        term = term * b / k as f64;
        result += term;
        if term.amax() < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        result = result * result;
    }
    result
}

/// Fréchet derivative of exp at `a` in direction `e`, read off the upper-right block of
/// exp([[a, e], [0, a]]).
pub fn expm_frechet4(a: &SMatrix<f64, 4, 4>, e: &SMatrix<f64, 4, 4>) -> SMatrix<f64, 4, 4> {
    let mut big = SMatrix::<f64, 8, 8>::zeros();
    big.fixed_view_mut::<4, 4>(0, 0).copy_from(a);
    big.fixed_view_mut::<4, 4>(4, 4).copy_from(a);
    big.fixed_view_mut::<4, 4>(0, 4).copy_from(e);
    expm_static(&big).fixed_view::<4, 4>(0, 4).into_owned()
}

pub fn is_power_of_two(n: usize) -> bool {
    n > 0 && n & (n - 1) == 0
}

/// log₂ of a power of two.
pub fn log2_exact(n: usize, what: &'static str) -> Result<usize> {
    if is_power_of_two(n) {
        Ok(n.trailing_zeros() as usize)
    } else {
        Err(Error::NotPowerOfTwo { what, value: n })
    }
}
