//! Maximum-likelihood decoders for the real model `y' = g R s + n'` obtained from
//! `H_eq = Q R`, with `g = sqrt(snr / n_t)`.
//!
//! Symbols are ordered as the code's weights: layer 1 first, then group-major
//! within a layer. Under this ordering the leading `2 n_t` block of `R` is
//! `I_4 ⊗ T`, so once the later layers (bottom rows) are fixed the first layer
//! splits into four independent searches.

use std::cmp::Ordering;

use crate::channel::{equivalent_channel, ChannelInstance, Constellation, Prng};
use crate::code::LinearDispersionCode;
use crate::error::{Error, Result};
use crate::linalg::{qr_decompose, tilde_vec_of, Complex64, ComplexMatrix, RealMatrix};
use crate::silver::assemble_generator;

/// Largest hypothesis count `M^k` the exhaustive decoder accepts.
pub const BRUTE_FORCE_LIMIT: f64 = (1u64 << 20) as f64;

/// Structural zeros of `R` must stay below this.
pub const STRUCTURE_LEAK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Alphabet index of every real symbol.
    pub indices: Vec<usize>,
    pub symbols: Vec<f64>,
    pub metric: f64,
    pub nodes_visited: u64,
}

impl DecodeResult {
    fn new(indices: Vec<usize>, cons: &Constellation, metric: f64, nodes_visited: u64) -> Self {
        Self {
            symbols: cons.symbols(&indices),
            indices,
            metric,
            nodes_visited,
        }
    }

    /// Same decision with `offset` added to the metric (e.g. the part of `||y||^2`
    /// outside the range of `Q`).
    pub fn with_offset(mut self, offset: f64) -> Self {
        self.metric += offset;
        self
    }
}

/// `true` when `(m, a)` beats `(best, b)`: smaller metric, or equal metric and
/// lexicographically smaller index vector.
fn improves(m: f64, a: &[usize], best: f64, b: Option<&[usize]>) -> bool {
    match m.partial_cmp(&best) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => b.is_none_or(|b| a < b),
        _ => false,
    }
}

/// Exhaustive ML over the full codebook: `argmin ||Y - g H S||_F^2`.
pub fn brute_force_ml(
    y: &ComplexMatrix,
    ch: &ChannelInstance,
    code: &LinearDispersionCode,
    cons: &Constellation,
) -> Result<DecodeResult> {
    let n = code.weights().len();
    let levels = cons.levels();
    let hypotheses = (levels.len() as f64).powi(n as i32);
    if hypotheses > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchTooLarge {
            hypotheses,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let scale = ch.gain() * code.power_scale();
    let basis: Vec<Vec<Complex64>> = code
        .weights()
        .iter()
        .map(|a| Ok(ch.h.checked_mul(a)?.scale_real(scale).as_slice().to_vec()))
        .collect::<Result<_>>()?;
    if y.rows() != ch.n_r() || y.cols() != code.t() {
        return Err(Error::DimensionMismatch(format!(
            "received block is {}x{}, expected {}x{}",
            y.rows(),
            y.cols(),
            ch.n_r(),
            code.t()
        )));
    }

    struct State<'a> {
        basis: &'a [Vec<Complex64>],
        levels: &'a [f64],
        partial: Vec<Vec<Complex64>>,
        idx: Vec<usize>,
        best: f64,
        best_idx: Vec<usize>,
        leaves: u64,
    }
    fn walk(st: &mut State<'_>, depth: usize) {
        let n = st.basis.len();
        if depth == n {
            st.leaves += 1;
            let m: f64 = st.partial[n].iter().map(Complex64::norm_sqr).sum();
            if m < st.best {
                st.best = m;
                st.best_idx.clone_from(&st.idx);
            }
            return;
        }
        for k in 0..st.levels.len() {
            let x = st.levels[k];
            let (head, tail) = st.partial.split_at_mut(depth + 1);
            for ((out, prev), b) in tail[0].iter_mut().zip(&head[depth]).zip(&st.basis[depth]) {
                *out = prev - b * x;
            }
            st.idx[depth] = k;
            walk(st, depth + 1);
        }
    }
    let mut st = State {
        basis: &basis,
        levels,
        partial: vec![y.as_slice().to_vec(); n + 1],
        idx: vec![0; n],
        best: f64::INFINITY,
        best_idx: vec![0; n],
        leaves: 0,
    };
    walk(&mut st, 0);
    Ok(DecodeResult::new(st.best_idx, cons, st.best, st.leaves))
}

/// Depth-first Schnorr-Euchner enumeration over columns `lo..hi` of an upper
/// triangular `R`, with `z` already stripped of the columns at or beyond `hi`.
struct Enumerator<'a> {
    r: &'a RealMatrix,
    gain: f64,
    z: &'a [f64],
    levels: &'a [f64],
    lo: usize,
    hi: usize,
    /// Take only the nearest point at level `lo`.
    quantize_lo: bool,
    idx: Vec<usize>,
    val: Vec<f64>,
    nodes: u64,
    order: Vec<usize>,
}

impl<'a> Enumerator<'a> {
    fn new(r: &'a RealMatrix, gain: f64, z: &'a [f64], levels: &'a [f64], lo: usize, hi: usize) -> Self {
        let n = r.cols();
        Self {
            r,
            gain,
            z,
            levels,
            lo,
            hi,
            quantize_lo: false,
            idx: vec![0; n],
            val: vec![0.0; n],
            nodes: 0,
            order: Vec::with_capacity(levels.len()),
        }
    }

    /// Calls `leaf(idx, partial)` for every complete assignment whose metric does
    /// not exceed the running radius; `leaf` returns the new radius.
    fn run(&mut self, radius: f64, leaf: &mut dyn FnMut(&[usize], &[f64], f64) -> f64) {
        if self.lo >= self.hi {
            leaf(&self.idx, &self.val, 0.0);
            return;
        }
        let mut radius = radius;
        self.descend(self.hi - 1, 0.0, &mut radius, leaf);
    }

    fn descend(
        &mut self,
        i: usize,
        partial: f64,
        radius: &mut f64,
        leaf: &mut dyn FnMut(&[usize], &[f64], f64) -> f64,
    ) {
        let row = self.r.row(i);
        let mut e = self.z[i];
        for j in i + 1..self.hi {
            e -= self.gain * row[j] * self.val[j];
        }
        let rii = self.gain * row[i];
        let center = e / rii;
        let mut order = std::mem::take(&mut self.order);
        order.clear();
        order.extend(0..self.levels.len());
        let levels = self.levels;
        order.sort_by(|&a, &b| {
            (levels[a] - center)
                .abs()
                .partial_cmp(&(levels[b] - center).abs())
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let take = if self.quantize_lo && i == self.lo { 1 } else { order.len() };
        let candidates: Vec<usize> = order[..take].to_vec();
        self.order = order;
        for k in candidates {
            let d = e - rii * self.levels[k];
            let p = partial + d * d;
            if p > *radius {
                break;
            }
            self.nodes += 1;
            self.idx[i] = k;
            self.val[i] = self.levels[k];
            if i == self.lo {
                *radius = leaf(&self.idx, &self.val, p);
            } else {
                self.descend(i - 1, p, radius, leaf);
            }
        }
    }
}

fn check_triangular(r: &RealMatrix, y_prime: &[f64]) -> Result<()> {
    if r.rows() != r.cols() || r.rows() != y_prime.len() {
        return Err(Error::DimensionMismatch(format!(
            "R is {}x{}, y' has {} entries",
            r.rows(),
            r.cols(),
            y_prime.len()
        )));
    }
    Ok(())
}

/// `||y' - g R s||^2` for the given symbols.
pub fn reduced_metric(y_prime: &[f64], r: &RealMatrix, gain: f64, symbols: &[f64]) -> f64 {
    let rs = r.mul_vec(symbols);
    y_prime.iter().zip(&rs).map(|(y, v)| (y - gain * v).powi(2)).sum()
}

/// Exact ML by Schnorr-Euchner enumeration with an unbounded initial radius.
/// The metric is the reduced one, `||y' - g R s||^2`.
pub fn sphere_decode(y_prime: &[f64], r: &RealMatrix, cons: &Constellation, gain: f64) -> Result<DecodeResult> {
    check_triangular(r, y_prime)?;
    let n = r.cols();
    let mut best = f64::INFINITY;
    let mut best_idx: Option<Vec<usize>> = None;
    let mut en = Enumerator::new(r, gain, y_prime, cons.levels(), 0, n);
    en.run(f64::INFINITY, &mut |idx, _, m| {
        if improves(m, idx, best, best_idx.as_deref()) {
            best = m;
            best_idx = Some(idx.to_vec());
        }
        best
    });
    let idx = best_idx.expect("unbounded radius reaches a leaf");
    let symbols = cons.symbols(&idx);
    let metric = reduced_metric(y_prime, r, gain, &symbols);
    Ok(DecodeResult::new(idx, cons, metric, en.nodes))
}

/// Position of the first layer in `R`: `head` columns in `groups` equal blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadLayout {
    pub head: usize,
    pub group_size: usize,
}

impl HeadLayout {
    pub fn of(code: &LinearDispersionCode) -> Result<Self> {
        let first = code.layer_indices(0);
        let groups = code.groups_in_layer(0);
        let contiguous = first.iter().enumerate().all(|(p, &i)| p == i);
        let size = groups.first().map_or(0, Vec::len);
        let ok = contiguous
            && groups.len() == 4
            && size > 0
            && groups
                .iter()
                .enumerate()
                .all(|(p, g)| g.iter().enumerate().all(|(q, &i)| i == p * size + q));
        if !ok {
            return Err(Error::StructureViolation(
                "first layer must occupy the leading columns in 4 contiguous groups".into(),
            ));
        }
        Ok(Self {
            head: first.len(),
            group_size: size,
        })
    }

    /// Largest entry of `R`'s head block outside the diagonal group blocks, and the
    /// largest difference between a group block and the first one.
    pub fn leak(&self, r: &RealMatrix) -> (f64, f64) {
        let gs = self.group_size;
        let mut leak: f64 = 0.0;
        let mut mismatch: f64 = 0.0;
        for i in 0..self.head {
            for j in 0..self.head {
                if i / gs != j / gs {
                    leak = leak.max(r[(i, j)].abs());
                } else {
                    let (bi, bj) = (i % gs, j % gs);
                    mismatch = mismatch.max((r[(i, j)] - r[(bi, bj)]).abs());
                }
            }
        }
        (leak, mismatch)
    }
}

/// Exact ML that enumerates the later layers and, for each of their hypotheses,
/// solves the first layer as four independent group searches in which the
/// group's first symbol is quantized rather than enumerated.
pub fn conditional_group_decode(
    y_prime: &[f64],
    r: &RealMatrix,
    code: &LinearDispersionCode,
    cons: &Constellation,
    gain: f64,
) -> Result<DecodeResult> {
    check_triangular(r, y_prime)?;
    let n = r.cols();
    if n != code.weights().len() {
        return Err(Error::DimensionMismatch(format!(
            "R has {n} columns for {} weights",
            code.weights().len()
        )));
    }
    let layout = HeadLayout::of(code)?;
    let (leak, mismatch) = layout.leak(r);
    let scale = r.max_abs().max(f64::MIN_POSITIVE);
    if leak.max(mismatch) > STRUCTURE_LEAK_TOL * scale.max(1.0) {
        return Err(Error::StructureViolation(format!(
            "R head block deviates from I_4 ⊗ T by {:.3e}",
            leak.max(mismatch)
        )));
    }
    let levels = cons.levels();
    let (h, gs) = (layout.head, layout.group_size);

    let mut best = f64::INFINITY;
    let mut best_idx: Option<Vec<usize>> = None;
    let mut head_nodes = 0u64;
    let mut z = vec![0.0; h];
    let mut candidate = vec![0usize; n];

    let mut tail = Enumerator::new(r, gain, y_prime, levels, h, n);
    tail.run(f64::INFINITY, &mut |tail_idx, tail_val, tail_metric| {
        // fold the fixed later layers into the head observations
        for (i, zi) in z.iter_mut().enumerate() {
            let row = r.row(i);
            let mut e = y_prime[i];
            for j in h..n {
                e -= gain * row[j] * tail_val[j];
            }
            *zi = e;
        }
        let mut total = tail_metric;
        candidate[h..].copy_from_slice(&tail_idx[h..]);
        for p in 0..4 {
            let lo = p * gs;
            let budget = best - total;
            if budget < 0.0 {
                return best;
            }
            let mut g_best = f64::INFINITY;
            let mut g_idx: Option<Vec<usize>> = None;
            let mut en = Enumerator::new(r, gain, &z, levels, lo, lo + gs);
            en.quantize_lo = true;
            en.run(budget, &mut |idx, _, m| {
                let part = &idx[lo..lo + gs];
                if improves(m, part, g_best, g_idx.as_deref()) {
                    g_best = m;
                    g_idx = Some(part.to_vec());
                }
                g_best
            });
            head_nodes += en.nodes;
            match g_idx {
                Some(g) => {
                    total += g_best;
                    candidate[lo..lo + gs].copy_from_slice(&g);
                }
                None => return best,
            }
        }
        if improves(total, &candidate, best, best_idx.as_deref()) {
            best = total;
            best_idx = Some(candidate.clone());
        }
        best
    });
    let idx = best_idx.expect("unbounded radius reaches a leaf");
    let symbols = cons.symbols(&idx);
    let metric = reduced_metric(y_prime, r, gain, &symbols);
    Ok(DecodeResult::new(idx, cons, metric, tail.nodes + head_nodes))
}

/// QR front end for one channel realization.
#[derive(Debug, Clone)]
pub struct Receiver {
    pub q: RealMatrix,
    pub r: RealMatrix,
    pub gain: f64,
}

/// `y'` and the energy of `y` outside the column space of `Q`.
#[derive(Debug, Clone)]
pub struct Projected {
    pub y_prime: Vec<f64>,
    pub residual: f64,
}

impl Receiver {
    pub fn new(ch: &ChannelInstance, code: &LinearDispersionCode) -> Result<Self> {
        let h_eq = equivalent_channel(ch, &assemble_generator(code))?;
        let qr = qr_decompose(&h_eq)?;
        Ok(Self {
            q: qr.q,
            r: qr.r,
            gain: ch.gain(),
        })
    }

    pub fn project(&self, y: &ComplexMatrix) -> Projected {
        let v = tilde_vec_of(y);
        let y_prime = self.q.tr_mul_vec(&v);
        let total: f64 = v.iter().map(|x| x * x).sum();
        let kept: f64 = y_prime.iter().map(|x| x * x).sum();
        Projected {
            y_prime,
            residual: (total - kept).max(0.0),
        }
    }

    pub fn sphere(&self, y: &ComplexMatrix, cons: &Constellation) -> Result<DecodeResult> {
        let p = self.project(y);
        Ok(sphere_decode(&p.y_prime, &self.r, cons, self.gain)?.with_offset(p.residual))
    }

    pub fn conditional(
        &self,
        y: &ComplexMatrix,
        code: &LinearDispersionCode,
        cons: &Constellation,
    ) -> Result<DecodeResult> {
        let p = self.project(y);
        Ok(conditional_group_decode(&p.y_prime, &self.r, code, cons, self.gain)?.with_offset(p.residual))
    }
}

#[derive(Debug, Clone)]
pub struct RStructureReport {
    pub trials: usize,
    /// Worst entry in any layer's diagonal block outside its group blocks.
    pub max_leak: f64,
    /// Worst difference between a group block and the first group's block.
    pub t_mismatch: f64,
    pub d_is_block_diagonal: bool,
    pub t_is_upper_triangular: bool,
    /// Per later layer: worst off-group entry inside its own diagonal block.
    pub later_block_leak: Vec<f64>,
    /// Channels resampled because `H_eq` was rank deficient.
    pub resampled: usize,
}

impl RStructureReport {
    pub fn passed(&self) -> bool {
        self.d_is_block_diagonal && self.t_is_upper_triangular && self.t_mismatch <= STRUCTURE_LEAK_TOL
    }
}

/// Checks the `I_4 ⊗ T` head pattern of `R` over `trials` random channels.
/// `order`, when given, permutes the symbols first (column `j` becomes weight
/// `order[j]`); the pattern positions stay those of the unpermuted layout.
pub fn r_structure_report(
    code: &LinearDispersionCode,
    n_r: usize,
    trials: usize,
    order: Option<&[usize]>,
    rng: &mut Prng,
) -> Result<RStructureReport> {
    let layout = HeadLayout::of(code)?;
    let used = match order {
        Some(o) => code.permuted(o)?,
        None => code.clone(),
    };
    let n = code.weights().len();
    let per_layer = layout.head;
    let g = assemble_generator(&used);
    let mut report = RStructureReport {
        trials,
        max_leak: 0.0,
        t_mismatch: 0.0,
        d_is_block_diagonal: true,
        t_is_upper_triangular: true,
        later_block_leak: vec![0.0; n / per_layer - 1],
        resampled: 0,
    };
    let mut done = 0;
    while done < trials {
        let ch = crate::channel::sample_channel(code.n_t(), n_r, 1.0, rng);
        let h_eq = equivalent_channel(&ch, &g)?;
        let r = match qr_decompose(&h_eq) {
            Ok(qr) => qr.r,
            Err(Error::RankDeficient { .. }) => {
                report.resampled += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (leak, mismatch) = layout.leak(&r);
        report.max_leak = report.max_leak.max(leak);
        report.t_mismatch = report.t_mismatch.max(mismatch);
        for i in 0..n {
            for j in 0..i {
                report.t_is_upper_triangular &= r[(i, j)] == 0.0;
            }
        }
        for (l, slot) in report.later_block_leak.iter_mut().enumerate() {
            let off = (l + 1) * per_layer;
            for i in 0..per_layer {
                for j in 0..per_layer {
                    if i / layout.group_size != j / layout.group_size {
                        *slot = slot.max(r[(off + i, off + j)].abs());
                    }
                }
            }
        }
        done += 1;
    }
    report.max_leak = report.later_block_leak.iter().fold(report.max_leak, |a, &b| a.max(b));
    report.d_is_block_diagonal = report.max_leak <= STRUCTURE_LEAK_TOL;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, transmit, transmit_noiseless};
    use crate::rate1::build_rate1_4group;
    use crate::silver::silver_code;

    #[test]
    fn diagonal_r_is_quantization() {
        let cons = Constellation::pam(4).unwrap();
        let r = RealMatrix::from_rows(&[&[2.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.5]]);
        let y = [0.3, -5.0, 0.2];
        let out = sphere_decode(&y, &r, &cons, 1.0).unwrap();
        let expected: Vec<usize> = y
            .iter()
            .zip([2.0, 1.0, 0.5])
            .map(|(v, d)| cons.quantize(v / d))
            .collect();
        assert_eq!(out.indices, expected);
    }

    fn setup(n_t: usize, n_r: usize, layers: usize, seed: u64) -> (LinearDispersionCode, ChannelInstance, Prng) {
        let code = silver_code(n_t, layers, None).unwrap();
        let mut rng = Prng::new(seed);
        let ch = sample_channel(n_t, n_r, 10.0, &mut rng);
        (code, ch, rng)
    }

    #[test]
    fn noiseless_recovery() {
        let cons = Constellation::qam(4).unwrap();
        for (n_t, n_r, layers) in [(2, 2, 2), (4, 1, 1), (4, 2, 2)] {
            let (code, ch, mut rng) = setup(n_t, n_r, layers, 3);
            let idx = cons.random_indices(code.weights().len(), &mut rng);
            let s = code.codeword(&cons.symbols(&idx)).unwrap();
            let y = transmit_noiseless(&s, &ch).unwrap();
            let rx = Receiver::new(&ch, &code).unwrap();
            let sd = rx.sphere(&y, &cons).unwrap();
            let cd = rx.conditional(&y, &code, &cons).unwrap();
            assert_eq!(sd.indices, idx);
            assert_eq!(cd.indices, idx);
            assert!(cd.metric < 1e-12);
            if n_t == 2 {
                let bf = brute_force_ml(&y, &ch, &code, &cons).unwrap();
                assert_eq!(bf.indices, idx);
            }
        }
    }

    #[test]
    fn decoders_agree_on_noisy_trials() {
        let cons = Constellation::qam(4).unwrap();
        for seed in 0..50 {
            let (code, ch, mut rng) = setup(2, 2, 2, seed);
            let idx = cons.random_indices(8, &mut rng);
            let s = code.codeword(&cons.symbols(&idx)).unwrap();
            let y = transmit(&s, &ch, &mut rng).unwrap();
            let rx = Receiver::new(&ch, &code).unwrap();
            let bf = brute_force_ml(&y, &ch, &code, &cons).unwrap();
            let sd = rx.sphere(&y, &cons).unwrap();
            let cd = rx.conditional(&y, &code, &cons).unwrap();
            assert!((bf.metric - sd.metric).abs() < 1e-9, "seed {seed}");
            assert!((bf.metric - cd.metric).abs() < 1e-9, "seed {seed}");
            assert_eq!(bf.indices, sd.indices);
            assert_eq!(bf.indices, cd.indices);
        }
    }

    #[test]
    fn brute_force_guard() {
        let (code, ch, _) = setup(4, 4, 4, 1);
        let cons = Constellation::qam(4).unwrap();
        let y = ComplexMatrix::zeros(4, 4);
        assert!(matches!(
            brute_force_ml(&y, &ch, &code, &cons),
            Err(Error::SearchTooLarge { .. })
        ));
    }

    #[test]
    fn structure_holds_and_permutation_breaks_it() {
        let code = silver_code(4, 2, None).unwrap();
        let mut rng = Prng::new(11);
        let report = r_structure_report(&code, 2, 20, None, &mut rng).unwrap();
        assert!(report.passed(), "{report:?}");
        // interleave the two layers
        let order: Vec<usize> = (0..16).map(|j| j / 2 + 8 * (j % 2)).collect();
        let bad = r_structure_report(&code, 2, 5, Some(&order), &mut rng).unwrap();
        assert!(!bad.passed());
        let rate1 = build_rate1_4group(3).unwrap();
        let r8 = r_structure_report(&rate1, 1, 10, None, &mut rng).unwrap();
        assert!(r8.passed());
        assert!(r8.later_block_leak.is_empty());
    }

    #[test]
    fn conditional_rejects_unstructured_r() {
        let code = silver_code(2, 2, None).unwrap();
        let cons = Constellation::qam(4).unwrap();
        let mut r = RealMatrix::identity(8);
        r[(0, 1)] = 0.5;
        assert!(matches!(
            conditional_group_decode(&[0.0; 8], &r, &code, &cons, 1.0),
            Err(Error::StructureViolation(_))
        ));
    }
}
