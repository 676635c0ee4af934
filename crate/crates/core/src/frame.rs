//! Pairwise anticommuting, anti-Hermitian unitary matrices of size `2^a` and the
//! product families built from them.

use crate::error::{Error, Result};
use crate::linalg::{kron, numerical_rank, tilde_vec_of, ComplexMatrix, RealMatrix, J};

/// Largest supported exponent (16 antennas).
pub const MAX_EXPONENT: usize = 4;

const FRAME_TOL: f64 = 1e-12;

/// The three 2x2 generators `P1 = [[0,1],[-1,0]]`, `P2 = [[0,j],[j,0]]`,
/// `P3 = [[1,0],[0,-1]]`.
pub fn pauli_generators() -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let zero = crate::linalg::c64(0.0, 0.0);
    let p1 = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
    let p2 = ComplexMatrix::from_rows(&[&[zero, J], &[J, zero]]);
    let p3 = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
    (p1, p2, p3)
}

fn kron_power(m: &ComplexMatrix, times: usize) -> Option<ComplexMatrix> {
    (0..times).fold(None, |acc, _| match acc {
        None => Some(m.clone()),
        Some(a) => Some(kron(&a, m)),
    })
}

fn kron_chain(parts: &[Option<ComplexMatrix>]) -> ComplexMatrix {
    parts
        .iter()
        .flatten()
        .fold(None::<ComplexMatrix>, |acc, m| match acc {
            None => Some(m.clone()),
            Some(a) => Some(kron(&a, m)),
        })
        .expect("at least one factor")
}

/// `2a` matrices `F_1..F_2a` of size `2^a` (stored zero-based).
#[derive(Debug, Clone)]
pub struct Frame {
    a: usize,
    matrices: Vec<ComplexMatrix>,
}

impl Frame {
    /// Wraps arbitrary matrices, e.g. to check a hand-made frame with [`verify_frame`].
    pub fn from_matrices(a: usize, matrices: Vec<ComplexMatrix>) -> Self {
        Self { a, matrices }
    }

    pub fn exponent(&self) -> usize {
        self.a
    }

    pub fn dim(&self) -> usize {
        1 << self.a
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// `F_i` with the one-based index used throughout the construction.
    pub fn f(&self, i: usize) -> &ComplexMatrix {
        assert!(i >= 1 && i <= self.matrices.len(), "frame index {i} out of range");
        &self.matrices[i - 1]
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }
}

/// Builds the frame for `n = 2^a`:
/// `F_1 = j P3^{⊗a}`, `F_2k = I^{⊗(a-k)} ⊗ P1 ⊗ P3^{⊗(k-1)}` and
/// `F_2k+1 = I^{⊗(a-k)} ⊗ P2 ⊗ P3^{⊗(k-1)}`.
pub fn build_frame(a: usize) -> Result<Frame> {
    if !(1..=MAX_EXPONENT).contains(&a) {
        return Err(Error::UnsupportedSize(format!(
            "frame exponent must be in 1..={MAX_EXPONENT}, got {a}"
        )));
    }
    let (p1, p2, p3) = pauli_generators();
    let i2 = ComplexMatrix::identity(2);
    let mut matrices = vec![kron_power(&p3, a).expect("a >= 1").scale(J); 2 * a];
    for k in 1..=a {
        matrices[2 * k - 1] = kron_chain(&[kron_power(&i2, a - k), Some(p1.clone()), kron_power(&p3, k - 1)]);
        if k < a {
            matrices[2 * k] =
                kron_chain(&[kron_power(&i2, a - k), Some(p2.clone()), kron_power(&p3, k - 1)]);
        }
    }
    Ok(Frame { a, matrices })
}

/// Deviations of a frame from its defining identities.
#[derive(Debug, Clone)]
pub struct FrameReport {
    /// `max_i ||F_i F_i^H - I||_max`
    pub unitarity: f64,
    /// `max_i ||F_i^H + F_i||_max`
    pub anti_hermiticity: f64,
    /// `((i, j), ||F_i F_j + F_j F_i||_F)` for `i < j`, one-based.
    pub anticommutators: Vec<((usize, usize), f64)>,
    /// `||F_i^2 + I||_F`, one entry per matrix.
    pub squares: Vec<f64>,
}

impl FrameReport {
    pub fn max_deviation(&self) -> f64 {
        self.anticommutators
            .iter()
            .map(|(_, d)| *d)
            .chain(self.squares.iter().copied())
            .fold(self.unitarity.max(self.anti_hermiticity), f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= FRAME_TOL
    }
}

pub fn verify_frame(f: &Frame) -> FrameReport {
    let n = f.dim();
    let id = ComplexMatrix::identity(n);
    let mut unitarity: f64 = 0.0;
    let mut anti_hermiticity: f64 = 0.0;
    let mut squares = Vec::with_capacity(f.len());
    for m in f.matrices() {
        unitarity = unitarity.max((m * &m.adjoint()).max_abs_diff(&id));
        anti_hermiticity = anti_hermiticity.max((&m.adjoint() + m).max_abs());
        squares.push((&(m * m) + &id).frobenius_norm());
    }
    let mut anticommutators = Vec::new();
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            let d = f.matrices[i].anticommutator_norm(&f.matrices[j]);
            anticommutators.push(((i + 1, j + 1), d));
        }
    }
    FrameReport {
        unitarity,
        anti_hermiticity,
        anticommutators,
        squares,
    }
}

/// Selects `(j?) F_1^λ1 ... F_2a^λ2a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductMask {
    pub lambdas: Vec<bool>,
    pub j_flag: bool,
}

impl ProductMask {
    pub fn identity(len: usize) -> Self {
        Self {
            lambdas: vec![false; len],
            j_flag: false,
        }
    }

    /// Mask of length `len` selecting the given one-based indices.
    pub fn select(len: usize, indices: &[usize]) -> Self {
        let mut m = Self::identity(len);
        for &i in indices {
            assert!(i >= 1 && i <= len, "index {i} out of range 1..={len}");
            m.lambdas[i - 1] = true;
        }
        m
    }

    /// Mask whose bits are the low `len` bits of `bits` (bit 0 is `F_1`).
    pub fn from_bits(len: usize, bits: u32, j_flag: bool) -> Self {
        Self {
            lambdas: (0..len).map(|i| bits >> i & 1 == 1).collect(),
            j_flag,
        }
    }

    pub fn with_j(mut self, j_flag: bool) -> Self {
        self.j_flag = j_flag;
        self
    }

    /// Number of `F_i` factors.
    pub fn size(&self) -> usize {
        self.lambdas.iter().filter(|&&b| b).count()
    }

    /// Selected one-based indices.
    pub fn indices(&self) -> Vec<usize> {
        self.lambdas
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn bits(&self) -> u32 {
        self.lambdas
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | (u32::from(b) << i))
    }

    pub fn label(&self) -> String {
        let idx = self.indices();
        let body = if idx.is_empty() {
            "I".to_string()
        } else {
            idx.iter().map(|i| format!("F{i}")).collect::<String>()
        };
        if self.j_flag {
            format!("j{body}")
        } else {
            body
        }
    }
}

/// `(j?) F_1^λ1 ... F_2a^λ2a`, factors multiplied in increasing index order.
pub fn subset_product(f: &Frame, m: &ProductMask) -> Result<ComplexMatrix> {
    if m.lambdas.len() != f.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask of length {} for a frame of {} matrices",
            m.lambdas.len(),
            f.len()
        )));
    }
    let mut out = ComplexMatrix::identity(f.dim());
    for (mat, _) in f.matrices.iter().zip(&m.lambdas).filter(|(_, &b)| b) {
        out = &out * mat;
    }
    if m.j_flag {
        out = out.scale(J);
    }
    Ok(out)
}

/// A product of `s` distinct frame matrices squares to `square_sign(s) * I`,
/// with `square_sign(s) = (-1)^{s(s+1)/2}`.
pub fn square_sign(s: usize) -> i32 {
    if (s * (s + 1) / 2) % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Commute,
    Anticommute,
}

/// Relation between products of `r` and `s` distinct frame matrices sharing `p`
/// factors: they commute iff `r, s, p` are all odd, or `rs` and `p` are both even.
pub fn commute_predicate(r: usize, s: usize, p: usize) -> Relation {
    debug_assert!(p <= r.min(s));
    let all_odd = r % 2 == 1 && s % 2 == 1 && p % 2 == 1;
    let even_case = (r * s) % 2 == 0 && p % 2 == 0;
    if all_odd ^ even_case {
        Relation::Commute
    } else {
        Relation::Anticommute
    }
}

/// Confirms that the `2^{2a}` subset products and their `j`-multiples are linearly
/// independent over the reals. Limited to `a <= 3`.
pub fn basis_independence_check(f: &Frame) -> Result<bool> {
    if f.exponent() > 3 {
        return Err(Error::UnsupportedSize(format!(
            "basis check limited to a <= 3, got {}",
            f.exponent()
        )));
    }
    let count = 1u32 << f.len();
    let mut columns = Vec::with_capacity(2 * count as usize);
    for bits in 0..count {
        for j_flag in [false, true] {
            let p = subset_product(f, &ProductMask::from_bits(f.len(), bits, j_flag))?;
            columns.push(tilde_vec_of(&p));
        }
    }
    let m = RealMatrix::from_columns(&columns)?;
    Ok(numerical_rank(&m, 1e-9) == columns.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    #[test]
    fn generators() {
        let (p1, p2, p3) = pauli_generators();
        let id = ComplexMatrix::identity(2);
        assert_eq!(&p1 * &p2, -&(&p2 * &p1));
        assert_eq!(&p3 * &p3, id);
        assert_eq!(&p1 * &p1, -&id);
    }

    #[test]
    fn frame_a1_entries() {
        let f = build_frame(1).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(
            f.f(1),
            &ComplexMatrix::diagonal(&[c64(0.0, 1.0), c64(0.0, -1.0)])
        );
        assert_eq!(f.f(2), &ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]));
    }

    #[test]
    fn frames_verify() {
        for a in 1..=4 {
            let f = build_frame(a).unwrap();
            assert_eq!(f.len(), 2 * a);
            let report = verify_frame(&f);
            assert!(report.passed(), "a = {a}: {}", report.max_deviation());
            assert!(report.max_deviation() <= 1e-15);
        }
        assert!(matches!(build_frame(0), Err(Error::UnsupportedSize(_))));
        assert!(matches!(build_frame(5), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn identity_in_frame_fails() {
        let f = build_frame(2).unwrap();
        let mut ms = f.matrices().to_vec();
        ms[1] = ComplexMatrix::identity(4);
        let report = verify_frame(&Frame::from_matrices(2, ms));
        assert!(!report.passed());
        let (_, d) = report.anticommutators[0];
        // ||F1 I + I F1||_F = 2 ||F1||_F = 2 * sqrt(4)
        assert!((d - 4.0).abs() < 1e-12);
    }

    #[test]
    fn subset_products() {
        let f = build_frame(2).unwrap();
        let id = ComplexMatrix::identity(4);
        assert_eq!(subset_product(&f, &ProductMask::identity(4)).unwrap(), id);
        let p123 = subset_product(&f, &ProductMask::select(4, &[1, 2, 3])).unwrap();
        assert!((&p123 * &p123).max_abs_diff(&id) < 1e-15);
        let p12 = subset_product(&f, &ProductMask::select(4, &[1, 2])).unwrap();
        assert!((&p12 * &p12).max_abs_diff(&-&id) < 1e-15);
        assert!(subset_product(&f, &ProductMask::identity(3)).is_err());
    }

    #[test]
    fn square_signs() {
        assert_eq!(square_sign(1), -1);
        assert_eq!(square_sign(2), -1);
        assert_eq!(square_sign(3), 1);
        assert_eq!(square_sign(4), 1);
    }

    #[test]
    fn commutation_cases() {
        assert_eq!(commute_predicate(1, 1, 0), Relation::Anticommute);
        assert_eq!(commute_predicate(1, 1, 1), Relation::Commute);
        assert_eq!(commute_predicate(2, 2, 0), Relation::Commute);
        assert_eq!(commute_predicate(2, 1, 1), Relation::Anticommute);
    }

    #[test]
    fn basis_independence() {
        assert!(basis_independence_check(&build_frame(1).unwrap()).unwrap());
        assert!(basis_independence_check(&build_frame(2).unwrap()).unwrap());
        let f = build_frame(2).unwrap();
        let mut ms = f.matrices().to_vec();
        ms[3] = ms[2].clone();
        assert!(!basis_independence_check(&Frame::from_matrices(2, ms)).unwrap());
    }

    #[test]
    fn mask_helpers() {
        let m = ProductMask::select(6, &[1, 4, 5]).with_j(true);
        assert_eq!(m.size(), 3);
        assert_eq!(m.indices(), vec![1, 4, 5]);
        assert_eq!(m.label(), "jF1F4F5");
        assert_eq!(ProductMask::from_bits(6, m.bits(), true), m);
    }
}
