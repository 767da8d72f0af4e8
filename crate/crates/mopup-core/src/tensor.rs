//! Order-d dense tensors with the mode-1-fastest linear layout, mode-k
//! unfolding and mode-k products.
//!
//! The unfolding follows the index map
//! h = i_1 + p_1 (i_2 - 1) + ... (mode-k index removed), so the linear layout
//! of the data is exactly the mode-1 unfolding read column by column.

use crate::error::{argument, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(argument("tensor order must be at least 2"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(argument("tensor dimensions must be positive"));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(argument(format!(
                "data length {} does not match dims product {len}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(argument("tensor contains non-finite entries"));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Raw entries in the mode-1-fastest linear order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Linear offset of a zero-based multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (i, p) in index.iter().zip(&self.dims) {
            debug_assert!(i < p);
            off += i * stride;
            stride *= p;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// A matrix viewed as an order-2 tensor (column-major entry order
    /// matches the mode-1-fastest layout).
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            dims: vec![m.nrows(), m.ncols()],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.order() != 2 {
            return Err(argument("tensor order is not 2"));
        }
        Ok(Matrix::from_column_slice(
            self.dims[0],
            self.dims[1],
            &self.data,
        ))
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl std::ops::Add<&Tensor> for Tensor {
    type Output = Tensor;
    fn add(mut self, rhs: &Tensor) -> Tensor {
        assert_eq!(self.dims, rhs.dims);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        self
    }
}

impl std::ops::Sub<&Tensor> for &Tensor {
    type Output = Tensor;
    fn sub(self, rhs: &Tensor) -> Tensor {
        assert_eq!(self.dims, rhs.dims);
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Tensor {
            dims: self.dims.clone(),
            data,
        }
    }
}

fn check_mode(t: &Tensor, mode: usize) -> Result<()> {
    if mode >= t.order() {
        return Err(argument(format!(
            "mode {mode} out of range for order-{} tensor",
            t.order()
        )));
    }
    Ok(())
}

/// Column strides of the mode-`mode` unfolding: stride of index j is the
/// product of all dims before j with the unfolded mode removed.
fn unfold_strides(dims: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0; dims.len()];
    let mut acc = 1;
    for j in 0..dims.len() {
        if j == mode {
            continue;
        }
        strides[j] = acc;
        acc *= dims[j];
    }
    strides
}

/// Mode-k unfolding: a p_k x (prod of the other dims) matrix.
pub fn unfold(t: &Tensor, mode: usize) -> Result<Matrix> {
    check_mode(t, mode)?;
    let dims = t.dims();
    let pk = dims[mode];
    let ncols = t.len() / pk;
    let col_strides = unfold_strides(dims, mode);
    let mut out = Matrix::zeros(pk, ncols);
    let mut index = vec![0usize; dims.len()];
    for value in t.data() {
        let h: usize = index
            .iter()
            .zip(&col_strides)
            .map(|(i, s)| i * s)
            .sum();
        out[(index[mode], h)] = *value;
        // advance multi-index, mode-1 fastest
        for (i, p) in index.iter_mut().zip(dims) {
            *i += 1;
            if *i < *p {
                break;
            }
            *i = 0;
        }
    }
    Ok(out)
}

/// Inverse of [`unfold`]: rebuilds the tensor with dims `dims` from its
/// mode-`mode` unfolding.
pub fn refold(m: &Matrix, dims: &[usize], mode: usize) -> Result<Tensor> {
    if mode >= dims.len() {
        return Err(argument(format!(
            "mode {mode} out of range for order-{}",
            dims.len()
        )));
    }
    let total: usize = dims.iter().product();
    if m.nrows() != dims[mode] || m.nrows() * m.ncols() != total {
        return Err(argument(format!(
            "unfolding shape {}x{} does not match dims {:?} at mode {mode}",
            m.nrows(),
            m.ncols(),
            dims
        )));
    }
    let col_strides = unfold_strides(dims, mode);
    let mut t = Tensor::zeros(dims.to_vec());
    let mut index = vec![0usize; dims.len()];
    for off in 0..total {
        let h: usize = index
            .iter()
            .zip(&col_strides)
            .map(|(i, s)| i * s)
            .sum();
        t.data_mut()[off] = m[(index[mode], h)];
        for (i, p) in index.iter_mut().zip(dims) {
            *i += 1;
            if *i < *p {
                break;
            }
            *i = 0;
        }
    }
    Ok(t)
}

/// Mode-k product (T x_k B): contracts mode k of the tensor with the columns
/// of `b`, replacing p_k by b.nrows(). Satisfies
/// unfold(result, k) = B * unfold(T, k).
pub fn mode_product(t: &Tensor, b: &Matrix, mode: usize) -> Result<Tensor> {
    check_mode(t, mode)?;
    if b.ncols() != t.dims()[mode] {
        return Err(argument(format!(
            "mode-{mode} product mismatch: matrix has {} columns, tensor dim is {}",
            b.ncols(),
            t.dims()[mode]
        )));
    }
    let mut out_dims = t.dims().to_vec();
    out_dims[mode] = b.nrows();
    let mut out = Tensor::zeros(out_dims.clone());

    let in_stride: usize = t.dims()[..mode].iter().product();
    let out_stride = in_stride; // strides below `mode` are unchanged
    let in_block = in_stride * t.dims()[mode];
    let out_block = out_stride * b.nrows();
    let n_blocks = t.len() / in_block;

    // For each slab of indices above and below the contracted mode, apply
    // the contraction directly from the definition.
    for blk in 0..n_blocks {
        for low in 0..in_stride {
            for a in 0..b.nrows() {
                let mut acc = 0.0;
                for j in 0..t.dims()[mode] {
                    acc += b[(a, j)] * t.data()[blk * in_block + j * in_stride + low];
                }
                out.data_mut()[blk * out_block + a * out_stride + low] = acc;
            }
        }
    }
    Ok(out)
}
