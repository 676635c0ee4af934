//! The rate-1, 4-group decodable code for `2^a` antennas, its `W` matrix, the
//! rotated encoding `s_p = W^T V y_p` and its minimum determinant.

use rayon::prelude::*;

use crate::channel::Constellation;
use crate::code::LinearDispersionCode;
use crate::error::{Error, Result};
use crate::frame::{build_frame, subset_product, Frame, ProductMask};
use crate::linalg::{det_complex, nearest_orthogonal, ComplexMatrix, RealMatrix};

/// Generating set of the first group: `jF4F5, jF6F7, ..., jF_{2a-2}F_{2a-1}, F1F2F3`.
pub fn first_group_generators(f: &Frame) -> Vec<ProductMask> {
    let len = f.len();
    let a = f.exponent();
    if a < 2 {
        return Vec::new();
    }
    let mut out: Vec<ProductMask> = (2..a)
        .map(|k| ProductMask::select(len, &[2 * k, 2 * k + 1]).with_j(true))
        .collect();
    out.push(ProductMask::select(len, &[1, 2, 3]));
    out
}

/// Group heads `F1, F2, F3` (`F1, F2, F1F2` when `a = 1`).
pub fn group_heads(f: &Frame) -> Vec<ProductMask> {
    let len = f.len();
    if f.exponent() == 1 {
        vec![
            ProductMask::select(len, &[1]),
            ProductMask::select(len, &[2]),
            ProductMask::select(len, &[1, 2]),
        ]
    } else {
        vec![
            ProductMask::select(len, &[1]),
            ProductMask::select(len, &[2]),
            ProductMask::select(len, &[3]),
        ]
    }
}

/// All products of subsets of `gens`, ordered by binary counting with `gens[0]`
/// as the least significant bit.
pub fn power_set_products(f: &Frame, gens: &[ProductMask]) -> Result<Vec<ComplexMatrix>> {
    let mats: Vec<ComplexMatrix> = gens.iter().map(|g| subset_product(f, g)).collect::<Result<_>>()?;
    Ok((0..1usize << gens.len())
        .map(|bits| {
            mats.iter()
                .enumerate()
                .filter(|(b, _)| bits >> b & 1 == 1)
                .fold(ComplexMatrix::identity(f.dim()), |acc, (_, m)| &acc * m)
        })
        .collect())
}

/// `2^{a+1}` weights in 4 groups of `2^{a-1}`: the first group is the power-set
/// product of the generating set, group `m` is the first group times head `m`.
pub fn build_rate1_4group(a: usize) -> Result<LinearDispersionCode> {
    let f = build_frame(a)?;
    rate1_from_frame(&f)
}

pub fn rate1_from_frame(f: &Frame) -> Result<LinearDispersionCode> {
    let first = power_set_products(f, &first_group_generators(f))?;
    let heads: Vec<ComplexMatrix> = group_heads(f)
        .iter()
        .map(|h| subset_product(f, h))
        .collect::<Result<_>>()?;
    let mut weights = first.clone();
    for h in &heads {
        weights.extend(first.iter().map(|a| a * h));
    }
    LinearDispersionCode::with_contiguous_groups(weights, 4)
}

/// `W[j][i] = sqrt(2/n_t) A_i(2j, 2j)` (zero-based) over the first-group weights.
///
/// Fails unless every first-group weight is diagonal with `±1` entries equal in
/// consecutive pairs, and the result is orthogonal.
pub fn extract_w(code: &LinearDispersionCode) -> Result<RealMatrix> {
    let n = code.n_t();
    let half = n / 2;
    if n < 2 || n % 2 != 0 || code.weights().len() != 2 * n || code.groups().len() != 4 {
        return Err(Error::StructureViolation(
            "expected a rate-1 code with 4 groups of n_t/2 weights".into(),
        ));
    }
    let first = &code.groups()[0];
    if first.len() != half {
        return Err(Error::StructureViolation("first group must hold n_t/2 weights".into()));
    }
    let scale = (2.0 / n as f64).sqrt();
    let mut w = RealMatrix::zeros(half, half);
    for (col, &idx) in first.iter().enumerate() {
        let a = code.weight(idx);
        if !a.is_diagonal(0.0) {
            return Err(Error::StructureViolation(format!("weight {} is not diagonal", idx + 1)));
        }
        for j in 0..half {
            let (p, q) = (a[(2 * j, 2 * j)], a[(2 * j + 1, 2 * j + 1)]);
            let ok = p.im == 0.0 && (p.re == 1.0 || p.re == -1.0) && p == q;
            if !ok {
                return Err(Error::StructureViolation(format!(
                    "weight {} diagonal entries {} and {} are not an equal ±1 pair",
                    idx + 1,
                    2 * j + 1,
                    2 * j + 2
                )));
            }
            w[(j, col)] = scale * p.re;
        }
    }
    if w.orthonormality_defect() > 1e-12 {
        return Err(Error::StructureViolation("W is not orthogonal".into()));
    }
    Ok(w)
}

const V4: [[f64; 2]; 2] = [[0.8507, -0.5257], [0.5257, 0.8507]];

const V8: [[f64; 4]; 4] = [
    [-0.3664, -0.7677, 0.4231, 0.3121],
    [-0.2264, -0.4745, -0.6846, -0.5050],
    [-0.4745, 0.2264, -0.5050, 0.6846],
    [-0.7677, 0.3664, 0.3121, -0.4231],
];

/// Published 4-decimal rotation for `n_t` in `{2, 4, 8}` (`[1]` for two antennas).
pub fn v_literal(n_t: usize) -> Result<RealMatrix> {
    match n_t {
        2 => Ok(RealMatrix::identity(1)),
        4 => Ok(RealMatrix::from_rows(&[&V4[0], &V4[1]])),
        8 => Ok(RealMatrix::from_rows(&[&V8[0], &V8[1], &V8[2], &V8[3]])),
        _ => Err(Error::UnsupportedSize(format!(
            "no stored rotation for n_t = {n_t}; supply V explicitly"
        ))),
    }
}

/// `W`, the rotation `V` and the encoding matrix `W^T V`.
#[derive(Debug, Clone)]
pub struct RotationPair {
    pub w: RealMatrix,
    /// Orthogonal polar factor of `v_literal`, used for encoding.
    pub v: RealMatrix,
    /// The rotation as given (4 decimals for the stored ones).
    pub v_literal: RealMatrix,
    pub r_enc: RealMatrix,
}

impl RotationPair {
    /// Builds the pair from a rate-1 code and any nearly orthogonal `V`.
    pub fn from_code(code: &LinearDispersionCode, v_literal: RealMatrix) -> Result<Self> {
        let w = extract_w(code)?;
        if v_literal.rows() != w.rows() || v_literal.cols() != w.cols() {
            return Err(Error::DimensionMismatch(format!(
                "V must be {}x{}",
                w.rows(),
                w.cols()
            )));
        }
        let v = nearest_orthogonal(&v_literal);
        let r_enc = w.transpose().checked_mul(&v)?;
        Ok(Self {
            w,
            v,
            v_literal,
            r_enc,
        })
    }

    pub fn dim(&self) -> usize {
        self.r_enc.rows()
    }
}

pub fn rotation_pair(n_t: usize) -> Result<RotationPair> {
    let v = v_literal(n_t)?;
    let code = build_rate1_4group(n_t.trailing_zeros() as usize)?;
    RotationPair::from_code(&code, v)
}

/// `S = Σ_p Σ_i s_{p,i} A_{p,i}` with `s_p = W^T V y_p`; `y` has `2 n_t` entries
/// split into 4 consecutive groups. The weights are used as stored.
pub fn encode_layer(y: &[f64], rot: &RotationPair, code: &LinearDispersionCode) -> Result<ComplexMatrix> {
    let half = rot.dim();
    if code.weights().len() != 4 * half || y.len() != 4 * half {
        return Err(Error::DimensionMismatch(format!(
            "encode_layer needs {} symbols and weights, got {} and {}",
            4 * half,
            y.len(),
            code.weights().len()
        )));
    }
    let mut s = ComplexMatrix::zeros(code.n_t(), code.t());
    for (p, group) in code.groups().iter().enumerate() {
        let sp = rot.r_enc.mul_vec(&y[p * half..(p + 1) * half]);
        for (&idx, &x) in group.iter().zip(&sp) {
            s = &s + &code.weight(idx).scale_real(x);
        }
    }
    Ok(s)
}

/// Replaces each group of `dim` weights by `A'_i = Σ_j ω_ji A_j`, `ω = W^T V`.
pub fn rotate_code(code: &LinearDispersionCode, rot: &RotationPair) -> Result<LinearDispersionCode> {
    let half = rot.dim();
    let mut weights = code.weights().to_vec();
    for group in code.groups() {
        if group.len() != half {
            return Err(Error::DimensionMismatch(format!(
                "group of {} weights for a {half}x{half} rotation",
                group.len()
            )));
        }
        for i in 0..half {
            let mut acc = ComplexMatrix::zeros(code.n_t(), code.t());
            for j in 0..half {
                acc = &acc + &code.weight(group[j]).scale_real(rot.r_enc[(j, i)]);
            }
            weights[group[i]] = acc;
        }
    }
    LinearDispersionCode::new(
        weights,
        code.groups().to_vec(),
        code.layer_tags().to_vec(),
        code.power_scale(),
    )
}

/// Minimum of `det(ΔS ΔS^H)` over nonzero codeword differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinDet {
    /// From the product form over single-group differences.
    pub factorized: f64,
    /// Exhaustive over full difference vectors; `None` when `n_t > 4`.
    pub brute: Option<f64>,
}

/// Mixed-radix enumeration of `alphabet^n` minus the all-zero vector (index 0 when
/// `alphabet[0] == 0`).
fn difference_vector(alphabet: &[f64], n: usize, mut idx: u64) -> Vec<f64> {
    let base = alphabet.len() as u64;
    (0..n)
        .map(|_| {
            let d = alphabet[(idx % base) as usize];
            idx /= base;
            d
        })
        .collect()
}

fn difference_alphabet(pam: &Constellation) -> Vec<f64> {
    std::iter::once(0.0).chain(pam.nonzero_differences()).collect()
}

fn check_min_det_inputs(code: &LinearDispersionCode, rot: &RotationPair, pam: &Constellation) -> Result<()> {
    if pam.size_per_real() > 4 {
        return Err(Error::UnsupportedSize(format!(
            "minimum determinant search limited to 4 levels per real symbol, got {}",
            pam.size_per_real()
        )));
    }
    if code.n_t() > 8 {
        return Err(Error::UnsupportedSize("minimum determinant search limited to n_t <= 8".into()));
    }
    if code.weights().len() != 4 * rot.dim() {
        return Err(Error::DimensionMismatch("rotation does not match code".into()));
    }
    Ok(())
}

/// `Π_j (Σ_i d_{i(2j-1)} Δs_i)^4` minimized over nonzero `Δy` of a single group.
pub fn factorized_min_determinant(
    code: &LinearDispersionCode,
    rot: &RotationPair,
    pam: &Constellation,
) -> Result<f64> {
    check_min_det_inputs(code, rot, pam)?;
    let half = rot.dim();
    // d_{i(2j-1)} = sqrt(n_t / 2) W[j][i]
    let d = rot.w.scale((code.n_t() as f64 / 2.0).sqrt());
    let alphabet = difference_alphabet(pam);
    let total = (alphabet.len() as u64).pow(half as u32);
    Ok((1..total)
        .into_par_iter()
        .map(|idx| {
            let dy = difference_vector(&alphabet, half, idx);
            let ds = rot.r_enc.mul_vec(&dy);
            d.mul_vec(&ds).iter().map(|x| x.powi(4)).product::<f64>()
        })
        .reduce(|| f64::INFINITY, f64::min))
}

/// `min |det ΔS|^2` with the difference confined to group `p` (weights as stored).
pub fn group_min_determinant(
    code: &LinearDispersionCode,
    rot: &RotationPair,
    pam: &Constellation,
    p: usize,
) -> Result<f64> {
    check_min_det_inputs(code, rot, pam)?;
    let half = rot.dim();
    let group = code
        .groups()
        .get(p)
        .ok_or_else(|| Error::DimensionMismatch(format!("no group {p}")))?;
    let alphabet = difference_alphabet(pam);
    let total = (alphabet.len() as u64).pow(half as u32);
    Ok((1..total)
        .into_par_iter()
        .map(|idx| {
            let ds = rot.r_enc.mul_vec(&difference_vector(&alphabet, half, idx));
            let mut s = ComplexMatrix::zeros(code.n_t(), code.t());
            for (&i, &x) in group.iter().zip(&ds) {
                s = &s + &code.weight(i).scale_real(x);
            }
            det_complex(&s).norm_sqr()
        })
        .reduce(|| f64::INFINITY, f64::min))
}

/// Exhaustive `min |det ΔS|^2` over all nonzero `Δy` of all four groups.
pub fn brute_min_determinant(
    code: &LinearDispersionCode,
    rot: &RotationPair,
    pam: &Constellation,
) -> Result<f64> {
    check_min_det_inputs(code, rot, pam)?;
    if code.n_t() > 4 {
        return Err(Error::UnsupportedSize("exhaustive search limited to n_t <= 4".into()));
    }
    let n = code.weights().len();
    let alphabet = difference_alphabet(pam);
    let total = (alphabet.len() as u64).pow(n as u32);
    Ok((1..total)
        .into_par_iter()
        .map(|idx| {
            let dy = difference_vector(&alphabet, n, idx);
            let s = encode_layer(&dy, rot, code).expect("shapes checked");
            det_complex(&s).norm_sqr()
        })
        .reduce(|| f64::INFINITY, f64::min))
}

pub fn min_determinant(code: &LinearDispersionCode, rot: &RotationPair, pam: &Constellation) -> Result<MinDet> {
    let factorized = factorized_min_determinant(code, rot, pam)?;
    let brute = if code.n_t() <= 4 {
        Some(brute_min_determinant(code, rot, pam)?)
    } else {
        None
    };
    Ok(MinDet { factorized, brute })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::verify_g_group;
    use crate::linalg::c64;

    fn mask(len: usize, idx: &[usize], j: bool) -> ProductMask {
        ProductMask::select(len, idx).with_j(j)
    }

    #[test]
    fn table_for_eight_antennas() {
        let f = build_frame(3).unwrap();
        let code = build_rate1_4group(3).unwrap();
        // (sign, indices, j) in group-major order
        let expected: [(f64, &[usize], bool); 16] = [
            (1.0, &[], false),
            (1.0, &[4, 5], true),
            (1.0, &[1, 2, 3], false),
            (1.0, &[1, 2, 3, 4, 5], true),
            (1.0, &[1], false),
            (1.0, &[1, 4, 5], true),
            (-1.0, &[2, 3], false),
            (-1.0, &[2, 3, 4, 5], true),
            (1.0, &[2], false),
            (1.0, &[2, 4, 5], true),
            (1.0, &[1, 3], false),
            (1.0, &[1, 3, 4, 5], true),
            (1.0, &[3], false),
            (1.0, &[3, 4, 5], true),
            (-1.0, &[1, 2], false),
            (-1.0, &[1, 2, 4, 5], true),
        ];
        for (i, (sign, idx, j)) in expected.iter().enumerate() {
            let m = subset_product(&f, &mask(6, idx, *j)).unwrap().scale_real(*sign);
            assert_eq!(code.weight(i), &m, "weight {}", i + 1);
        }
    }

    #[test]
    fn two_antennas_give_alamouti() {
        let code = build_rate1_4group(1).unwrap();
        let zero = c64(0.0, 0.0);
        let j = c64(0.0, 1.0);
        let expected = [
            ComplexMatrix::identity(2),
            ComplexMatrix::diagonal(&[j, -j]),
            ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]),
            ComplexMatrix::from_rows(&[&[zero, j], &[j, zero]]),
        ];
        for (a, b) in code.weights().iter().zip(&expected) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn four_antennas_table() {
        let f = build_frame(2).unwrap();
        let code = build_rate1_4group(2).unwrap();
        let p = |idx: &[usize]| subset_product(&f, &ProductMask::select(4, idx)).unwrap();
        assert_eq!(code.weight(0), &ComplexMatrix::identity(4));
        assert_eq!(code.weight(1), &p(&[1, 2, 3]));
        assert_eq!(code.weight(2), &p(&[1]));
        assert_eq!(code.weight(3), &p(&[2, 3]).scale_real(-1.0));
        assert_eq!(code.weight(4), &p(&[2]));
        assert_eq!(code.weight(5), &p(&[1, 3]));
        assert_eq!(code.weight(6), &p(&[3]));
        assert_eq!(code.weight(7), &p(&[1, 2]).scale_real(-1.0));
    }

    #[test]
    fn rate1_codes_are_four_group() {
        for a in 1..=4 {
            let code = build_rate1_4group(a).unwrap();
            assert_eq!(code.weights().len(), 1 << (a + 1));
            let report = verify_g_group(&code, 4).unwrap();
            assert!(report.passed(), "a = {a}: {:?}", report.failures());
            assert!((code.total_energy() - 2.0 * (1 << (2 * a)) as f64).abs() < 1e-12);
        }
        assert!(build_rate1_4group(5).is_err());
    }

    #[test]
    fn swapped_weights_break_cross_group() {
        let code = build_rate1_4group(2).unwrap();
        let mut w = code.weights().to_vec();
        w.swap(1, 2);
        let bad = LinearDispersionCode::with_contiguous_groups(w, 4).unwrap();
        let report = verify_g_group(&bad, 4).unwrap();
        assert!(!report.passed());
        assert!(report.cross_group_hr > 1.0);
    }

    #[test]
    fn w_matrices() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w4 = extract_w(&build_rate1_4group(2).unwrap()).unwrap();
        assert!(w4.max_abs_diff(&RealMatrix::from_rows(&[&[s, -s], &[s, s]])) < 1e-15);
        let w8 = extract_w(&build_rate1_4group(3).unwrap()).unwrap();
        let expected = RealMatrix::from_rows(&[
            &[1.0, -1.0, -1.0, 1.0],
            &[1.0, 1.0, 1.0, 1.0],
            &[1.0, -1.0, 1.0, -1.0],
            &[1.0, 1.0, -1.0, -1.0],
        ])
        .scale(0.5);
        assert!(w8.max_abs_diff(&expected) < 1e-15);
        let w16 = extract_w(&build_rate1_4group(4).unwrap()).unwrap();
        assert!(w16.orthonormality_defect() < 1e-12);
        let bad = build_rate1_4group(2).unwrap().map_weights(|a| a.scale_real(2.0));
        assert!(matches!(extract_w(&bad), Err(Error::StructureViolation(_))));
    }

    #[test]
    fn rotation_pairs() {
        let r4 = rotation_pair(4).unwrap();
        // rounding to 4 decimals leaves ||V^T V - I||_max at about 5.1e-5 and 1.22e-4
        assert!((r4.v_literal.orthonormality_defect() - 5.098e-5).abs() < 1e-8);
        assert!(r4.v.orthonormality_defect() <= 1e-12);
        assert!(r4.v.max_abs_diff(&r4.v_literal) < 5e-5);
        assert!(r4.r_enc.orthonormality_defect() <= 1e-12);
        let r8 = rotation_pair(8).unwrap();
        assert_eq!(r8.v_literal.row(0), &[-0.3664, -0.7677, 0.4231, 0.3121][..]);
        assert!((r8.v_literal.orthonormality_defect() - 1.2218e-4).abs() < 1e-8);
        assert!(r8.v.orthonormality_defect() <= 1e-12);
        assert_eq!(rotation_pair(2).unwrap().dim(), 1);
        assert!(matches!(rotation_pair(16), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn encode_energy_and_primed_weights() {
        for n_t in [2usize, 4, 8] {
            let code = build_rate1_4group(n_t.trailing_zeros() as usize).unwrap();
            let rot = rotation_pair(n_t).unwrap();
            let zero = encode_layer(&vec![0.0; 2 * n_t], &rot, &code).unwrap();
            assert_eq!(zero.max_abs(), 0.0);
            let y: Vec<f64> = (0..2 * n_t).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
            let s = encode_layer(&y, &rot, &code).unwrap();
            let energy: f64 = y.iter().map(|x| x * x).sum::<f64>() * n_t as f64;
            assert!((s.frobenius_norm_sqr() - energy).abs() < 1e-12 * energy);
            let primed = rotate_code(&code, &rot).unwrap();
            let s2 = primed.codeword(&y).unwrap();
            assert!(s.max_abs_diff(&s2) < 1e-12);
            assert!(encode_layer(&y[1..], &rot, &code).is_err());
        }
    }

    #[test]
    fn alamouti_min_det() {
        let code = build_rate1_4group(1).unwrap();
        let rot = rotation_pair(2).unwrap();
        let pam = Constellation::pam(2).unwrap();
        let md = min_determinant(&code, &rot, &pam).unwrap();
        assert!((md.factorized - 4.0).abs() < 1e-12);
        assert!((md.brute.unwrap() - 4.0).abs() < 1e-12);
    }
}
