//! A small CPU neural-network engine with hand-written backward passes.
//!
//! Convolutional layers work on `[batch, channel, frame, row, col]` tensors
//! and sequence layers on `[batch, frame, feature]`. Every layer is
//! length-aware: frames at or beyond an item's length are padding, produce
//! zeros and receive no gradient, so a padded batch gives the same per-item
//! results as running the items one by one.

mod conv;
mod init;
mod network;
mod optim;
mod seq;
mod spec;

pub use network::{Network, ParamSlot};
pub use optim::Adam;
pub use spec::{ArchSpec, Complexity, ConvSpec, LayerComplexity, SeqSpec};

use std::fmt::Debug;

use num_traits::Float;

/// Floating-point element type of a network.
pub trait Scalar:
    Float + Default + Debug + Send + Sync + std::iter::Sum + std::ops::AddAssign + std::ops::MulAssign + 'static
{
    /// `C = alpha·A·B + beta·C` with explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
        c_strides: (usize, usize),
    );

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

fn check_extent(len: usize, rows: usize, cols: usize, (rs, cs): (usize, usize), what: &str) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) * rs + (cols - 1) * cs;
        assert!(last < len, "gemm operand {what} out of bounds");
    }
}

macro_rules! impl_scalar {
    ($t:ty, $f:path) => {
        impl Scalar for $t {
            fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                sa: (usize, usize),
                b: &[Self],
                sb: (usize, usize),
                beta: Self,
                c: &mut [Self],
                sc: (usize, usize),
            ) {
                check_extent(a.len(), m, k, sa, "a");
                check_extent(b.len(), k, n, sb, "b");
                check_extent(c.len(), m, n, sc, "c");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: the extents of all three operands were checked above.
                unsafe {
                    $f(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        sa.0 as isize,
                        sa.1 as isize,
                        b.as_ptr(),
                        sb.0 as isize,
                        sb.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        sc.0 as isize,
                        sc.1 as isize,
                    )
                }
            }

            fn from_f64(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Row-major matrix operand: `data` holds `rows × cols` with leading
/// dimension `ld`, optionally read transposed.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a, S> {
    pub data: &'a [S],
    pub ld: usize,
    pub trans: bool,
}

pub(crate) fn mat<S>(data: &[S], ld: usize) -> Mat<'_, S> {
    Mat { data, ld, trans: false }
}

pub(crate) fn mat_t<S>(data: &[S], ld: usize) -> Mat<'_, S> {
    Mat { data, ld, trans: true }
}

impl<S> Mat<'_, S> {
    fn strides(&self) -> (usize, usize) {
        if self.trans {
            (1, self.ld)
        } else {
            (self.ld, 1)
        }
    }
}

/// `C[m×n] (leading dim ldc) = A·B + beta·C`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<S: Scalar>(m: usize, k: usize, n: usize, a: Mat<S>, b: Mat<S>, beta: S, c: &mut [S], ldc: usize) {
    S::gemm_raw(m, k, n, S::one(), a.data, a.strides(), b.data, b.strides(), beta, c, (ldc, 1));
}

/// Dense tensor with a row-major shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    pub shape: Vec<usize>,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![S::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor shape mismatch");
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn from_f32(shape: &[usize], data: &[f32]) -> Self {
        Tensor::from_vec(shape, data.iter().map(|&v| S::from_f64(f64::from(v))).collect())
    }
}

/// Per-call context: item lengths in frames and train/eval mode.
#[derive(Clone, Copy, Debug)]
pub struct Ctx<'a> {
    pub lengths: &'a [usize],
    pub train: bool,
}

pub(crate) fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_with_transposes() {
        // A = [[1,2,3],[4,5,6]], B = [[1,0],[0,1],[1,1]]
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0f64, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0f64; 4];
        gemm(2, 3, 2, mat(&a, 3), mat(&b, 2), 0.0, &mut c, 2);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // Aᵀ·A via the transposed view of the same buffer.
        let mut d = [0.0f64; 9];
        gemm(3, 2, 3, mat_t(&a, 3), mat(&a, 3), 0.0, &mut d, 3);
        assert_eq!(d, [17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
    }
}
