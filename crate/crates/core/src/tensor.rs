//! Dense tensors, Tucker weights and the contraction primitives.
//!
//! Storage is row-major in the tensor sense: the last index varies fastest.
//! `flatten`, [`kron`] and every contraction in this module agree on that
//! convention, so `full_contract(core, v) == dot(kron(v), core.data())`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TgpError};
use crate::linalg::Matrix;

/// Default entry budget for [`reconstruct`].
pub const DEFAULT_RECONSTRUCT_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(TgpError::invalid("a tensor needs at least one mode"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(TgpError::invalid(format!("zero extent in dims {dims:?}")));
        }
        let size = checked_product(&dims)?;
        if data.len() != size {
            return Err(TgpError::mismatch(format!(
                "{} values for dims {dims:?} (expected {size})",
                data.len()
            )));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let size = checked_product(&dims)?;
        DenseTensor::new(dims, vec![0.0; size])
    }

    /// Builds a tensor by evaluating `f` at every multi-index, last index fastest.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = DenseTensor::zeros(dims)?;
        let mut idx = vec![0; t.dims.len()];
        for flat in 0..t.data.len() {
            t.data[flat] = f(&idx);
            increment(&mut idx, &t.dims);
        }
        Ok(t)
    }

    /// Tensor with ones where all indices coincide; the identity matrix for two modes.
    pub fn superdiagonal(extent: usize, modes: usize) -> Result<Self> {
        DenseTensor::from_fn(vec![extent; modes], |idx| {
            if idx.iter().all(|&i| i == idx[0]) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn flat_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dims.len() {
            return Err(TgpError::mismatch(format!(
                "multi-index of length {} for a tensor of order {}",
                idx.len(),
                self.dims.len()
            )));
        }
        let mut flat = 0;
        for (&i, &n) in idx.iter().zip(&self.dims) {
            if i >= n {
                return Err(TgpError::IndexOutOfRange { index: i, size: n });
            }
            flat = flat * n + i;
        }
        Ok(flat)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for (slot, &n) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.flat_index(idx)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let flat = self.flat_index(idx)?;
        self.data[flat] = value;
        Ok(())
    }
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d).ok_or(TgpError::SizeLimit {
            requested: usize::MAX,
            limit: usize::MAX,
        })
    })
}

/// Advances a multi-index in last-fastest order; wraps to zero after the final index.
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for d in (0..idx.len()).rev() {
        idx[d] += 1;
        if idx[d] < dims[d] {
            return;
        }
        idx[d] = 0;
    }
}

fn check_vectors(core: &DenseTensor, vectors: &[&[f64]], skip: Option<usize>) -> Result<()> {
    if vectors.len() != core.order() {
        return Err(TgpError::mismatch(format!(
            "{} vectors for a tensor of order {}",
            vectors.len(),
            core.order()
        )));
    }
    for (d, (v, &n)) in vectors.iter().zip(core.dims()).enumerate() {
        if Some(d) != skip && v.len() != n {
            return Err(TgpError::mismatch(format!(
                "vector {d} has length {} but mode {d} has extent {n}",
                v.len()
            )));
        }
    }
    Ok(())
}

/// Contracts the trailing modes `order-1 ..= stop` of `data` (shape `dims`) into `buf`.
/// On return `buf` holds a tensor of shape `dims[..stop]`.
fn contract_trailing(data: &[f64], dims: &[usize], vectors: &[&[f64]], stop: usize, buf: &mut Vec<f64>) {
    buf.clear();
    let order = dims.len();
    if stop >= order {
        buf.extend_from_slice(data);
        return;
    }
    let last = dims[order - 1];
    let v = vectors[order - 1];
    buf.extend(data.chunks_exact(last).map(|chunk| {
        chunk.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }));
    for d in (stop..order - 1).rev() {
        let n = dims[d];
        let v = vectors[d];
        let len = buf.len() / n;
        for j in 0..len {
            let mut s = 0.0;
            for (i, &vi) in v.iter().enumerate() {
                s += buf[j * n + i] * vi;
            }
            buf[j] = s;
        }
        buf.truncate(len);
    }
}

/// `Σ_{i₁..i_D} core[i₁..i_D] ∏_d vectors[d][i_d]`.
pub fn full_contract(core: &DenseTensor, vectors: &[&[f64]]) -> Result<f64> {
    check_vectors(core, vectors, None)?;
    let mut buf = Vec::new();
    Ok(full_contract_unchecked(core, vectors, &mut buf))
}

/// [`full_contract`] without shape checks, reusing `buf` as scratch.
pub(crate) fn full_contract_unchecked(core: &DenseTensor, vectors: &[&[f64]], buf: &mut Vec<f64>) -> f64 {
    contract_trailing(&core.data, &core.dims, vectors, 1, buf);
    buf.iter().zip(vectors[0]).map(|(a, b)| a * b).sum()
}

/// Contracts every mode except `k`; component `l` equals [`full_contract`]
/// with `vectors[k]` replaced by the unit vector `e_l`. `vectors[k]` is ignored.
pub fn contract_all_but_one(core: &DenseTensor, vectors: &[&[f64]], k: usize) -> Result<Vec<f64>> {
    if k >= core.order() {
        return Err(TgpError::IndexOutOfRange {
            index: k,
            size: core.order(),
        });
    }
    check_vectors(core, vectors, Some(k))?;
    let mut buf = Vec::new();
    let mut out = Vec::new();
    contract_all_but_one_unchecked(core, vectors, k, &mut buf, &mut out);
    Ok(out)
}

pub(crate) fn contract_all_but_one_unchecked(
    core: &DenseTensor,
    vectors: &[&[f64]],
    k: usize,
    buf: &mut Vec<f64>,
    out: &mut Vec<f64>,
) {
    let dims = &core.dims;
    contract_trailing(&core.data, dims, vectors, k + 1, buf);
    // buf now has shape dims[..=k]; contract leading modes one at a time.
    let mut len = buf.len();
    for d in 0..k {
        let n = dims[d];
        let rest = len / n;
        let v = vectors[d];
        for j in 0..rest {
            let mut s = 0.0;
            for (i, &vi) in v.iter().enumerate() {
                s += vi * buf[i * rest + j];
            }
            buf[j] = s;
        }
        len = rest;
    }
    out.clear();
    out.extend_from_slice(&buf[..len]);
}

/// Kronecker product, last factor fastest.
pub fn kron(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        return Err(TgpError::Empty("kron needs at least one vector"));
    }
    if vectors.iter().any(|v| v.is_empty()) {
        return Err(TgpError::Empty("kron factor of length zero"));
    }
    let mut out = Vec::new();
    kron_into(vectors, &mut out);
    Ok(out)
}

pub(crate) fn kron_into(vectors: &[&[f64]], out: &mut Vec<f64>) {
    kron_into_buf(vectors, out, &mut Vec::new());
}

/// [`kron_into`] with caller-provided scratch `next`.
pub(crate) fn kron_into_buf(vectors: &[&[f64]], out: &mut Vec<f64>, next: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    for v in vectors {
        next.clear();
        for &a in out.iter() {
            next.extend(v.iter().map(|&b| a * b));
        }
        std::mem::swap(out, next);
    }
}

/// Core tensor `W` (extents `r_d`) and factor matrices `U^(d)` (`n_d × r_d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerWeights {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
}

impl TuckerWeights {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if core.order() != factors.len() {
            return Err(TgpError::mismatch(format!(
                "core of order {} with {} factor matrices",
                core.order(),
                factors.len()
            )));
        }
        for (d, (u, &r)) in factors.iter().zip(core.dims()).enumerate() {
            if u.cols() != r {
                return Err(TgpError::mismatch(format!(
                    "factor {d} has {} columns but core extent is {r}",
                    u.cols()
                )));
            }
        }
        Ok(TuckerWeights { core, factors })
    }

    /// All-zero weights with the given factor row counts and core extents.
    pub fn zeros(rows: &[usize], ranks: &[usize]) -> Result<Self> {
        if rows.len() != ranks.len() {
            return Err(TgpError::mismatch("rows and ranks differ in length"));
        }
        let core = DenseTensor::zeros(ranks.to_vec())?;
        let factors = rows
            .iter()
            .zip(ranks)
            .map(|(&n, &r)| Matrix::zeros(n, r))
            .collect();
        TuckerWeights::new(core, factors)
    }

    pub fn zeros_like(&self) -> Self {
        TuckerWeights {
            core: DenseTensor {
                dims: self.core.dims.clone(),
                data: vec![0.0; self.core.len()],
            },
            factors: self
                .factors
                .iter()
                .map(|u| Matrix::zeros(u.rows(), u.cols()))
                .collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    pub fn feature_lens(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    pub fn same_shape(&self, other: &TuckerWeights) -> bool {
        self.core.dims == other.core.dims
            && self.factors.len() == other.factors.len()
            && self
                .factors
                .iter()
                .zip(&other.factors)
                .all(|(a, b)| a.rows() == b.rows() && a.cols() == b.cols())
    }

    pub fn param_count(&self) -> usize {
        self.core.len() + self.factors.iter().map(|u| u.as_slice().len()).sum::<usize>()
    }

    /// Parameters as one vector: core first, then each factor row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(self.core.data());
        for u in &self.factors {
            out.extend_from_slice(u.as_slice());
        }
        out
    }

    /// Names matching [`to_flat`](Self::to_flat), e.g. `w[0,1]` and `u1[3,0]`.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.param_count());
        for flat in 0..self.core.len() {
            let idx = self.core.multi_index(flat);
            let s: Vec<String> = idx.iter().map(usize::to_string).collect();
            names.push(format!("w[{}]", s.join(",")));
        }
        for (d, u) in self.factors.iter().enumerate() {
            for i in 0..u.rows() {
                for j in 0..u.cols() {
                    names.push(format!("u{d}[{i},{j}]"));
                }
            }
        }
        names
    }

    /// `self += alpha * other` over every parameter block.
    pub fn axpy(&mut self, alpha: f64, other: &TuckerWeights) {
        for (a, b) in self.core.data.iter_mut().zip(&other.core.data) {
            *a += alpha * b;
        }
        for (u, v) in self.factors.iter_mut().zip(&other.factors) {
            for (a, b) in u.as_mut_slice().iter_mut().zip(v.as_slice()) {
                *a += alpha * b;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.core.data.iter_mut().for_each(|x| *x *= alpha);
        for u in &mut self.factors {
            u.as_mut_slice().iter_mut().for_each(|x| *x *= alpha);
        }
    }

    pub fn sum_sq(&self) -> f64 {
        self.core.data.iter().map(|x| x * x).sum::<f64>()
            + self.factors.iter().map(Matrix::frobenius_sq).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.core.data.iter().all(|x| x.is_finite())
            && self
                .factors
                .iter()
                .all(|u| u.as_slice().iter().all(|x| x.is_finite()))
    }
}

/// Mode-`d` product `t ×_d m` where `m` is `n × dims[d]`.
fn mode_product(t: &DenseTensor, d: usize, m: &Matrix) -> DenseTensor {
    let dims = t.dims();
    let outer: usize = dims[..d].iter().product();
    let inner: usize = dims[d + 1..].iter().product();
    let r = dims[d];
    let n = m.rows();
    let mut out = vec![0.0; outer * n * inner];
    for o in 0..outer {
        for i in 0..n {
            let row = m.row(i);
            let dst = &mut out[(o * n + i) * inner..(o * n + i + 1) * inner];
            for (l, &coef) in row.iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                let src = &t.data[(o * r + l) * inner..(o * r + l + 1) * inner];
                for (a, &b) in dst.iter_mut().zip(src) {
                    *a += coef * b;
                }
            }
        }
    }
    let mut new_dims = dims.to_vec();
    new_dims[d] = n;
    DenseTensor {
        dims: new_dims,
        data: out,
    }
}

/// Full-rank tensor `W ×_d U^(d)ᵀ`, refusing results above [`DEFAULT_RECONSTRUCT_LIMIT`] entries.
pub fn reconstruct(tw: &TuckerWeights) -> Result<DenseTensor> {
    reconstruct_with_limit(tw, DEFAULT_RECONSTRUCT_LIMIT)
}

pub fn reconstruct_with_limit(tw: &TuckerWeights, limit: usize) -> Result<DenseTensor> {
    let rows = tw.feature_lens();
    let requested = rows
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .unwrap_or(usize::MAX);
    if requested > limit {
        return Err(TgpError::SizeLimit { requested, limit });
    }
    let mut t = tw.core.clone();
    for (d, u) in tw.factors.iter().enumerate() {
        t = mode_product(&t, d, u);
    }
    Ok(t)
}
