//! Small dense linear algebra over `f64` and `Complex64`.

mod complex;
mod qr;
mod real;
pub mod text;

pub use complex::{det_complex, kron, realify, tilde_vec, untilde_vec, ComplexMatrix};
pub use qr::{qr_decompose, Qr};
pub use real::{kron_real, log_det_spd, nearest_orthogonal, numerical_rank, RealMatrix};

pub use num_complex::Complex64;

/// Shorthand for a complex scalar.
pub const fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The imaginary unit.
pub const J: Complex64 = Complex64::new(0.0, 1.0);

/// `tilde_vec(vec(X))`: the real column vector the generator matrix acts on.
pub fn tilde_vec_of(x: &ComplexMatrix) -> Vec<f64> {
    tilde_vec(&x.vec())
}

/// Inverse of [`tilde_vec_of`] for a matrix of the given shape.
pub fn matrix_from_tilde(v: &[f64], rows: usize, cols: usize) -> ComplexMatrix {
    let z = untilde_vec(v);
    assert_eq!(z.len(), rows * cols, "vector length does not match shape");
    let mut m = ComplexMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = z[j * rows + i];
        }
    }
    m
}
