//! Linear dispersion codes: weight matrices with group and layer metadata.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, text, tilde_vec_of, ComplexMatrix, RealMatrix};

/// Tolerance for the algebraic identities the constructions satisfy exactly.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// `S = Σ s_i A_i` over `2k` real symbols.
///
/// Weights are stored as constructed (unit-modulus unitary for the built-in
/// codes). `power_scale` is the common factor applied when the code is used on a
/// channel, chosen so that `Σ tr(A_i A_i^H) = 2 n_t T` for the scaled weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDispersionCode {
    n_t: usize,
    t: usize,
    weights: Vec<ComplexMatrix>,
    groups: Vec<Vec<usize>>,
    layer_tags: Vec<usize>,
    power_scale: f64,
}

impl LinearDispersionCode {
    pub fn new(
        weights: Vec<ComplexMatrix>,
        groups: Vec<Vec<usize>>,
        layer_tags: Vec<usize>,
        power_scale: f64,
    ) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| Error::DimensionMismatch("code without weights".into()))?;
        let (n_t, t) = (first.rows(), first.cols());
        if weights.iter().any(|w| w.rows() != n_t || w.cols() != t) {
            return Err(Error::DimensionMismatch("weights of unequal shape".into()));
        }
        if weights.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "odd number of weights ({})",
                weights.len()
            )));
        }
        if layer_tags.len() != weights.len() {
            return Err(Error::DimensionMismatch("one layer tag per weight required".into()));
        }
        let mut seen = vec![false; weights.len()];
        for &i in groups.iter().flatten() {
            if i >= weights.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::DimensionMismatch(format!(
                    "groups are not a partition (index {i})"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::DimensionMismatch("groups do not cover every weight".into()));
        }
        Ok(Self {
            n_t,
            t,
            weights,
            groups,
            layer_tags,
            power_scale,
        })
    }

    /// Single-layer code with contiguous equal-size groups.
    pub fn with_contiguous_groups(weights: Vec<ComplexMatrix>, g: usize) -> Result<Self> {
        let n = weights.len();
        if g == 0 || n % g != 0 {
            return Err(Error::DimensionMismatch(format!("{n} weights do not split into {g} groups")));
        }
        let size = n / g;
        let groups = (0..g).map(|p| (p * size..(p + 1) * size).collect()).collect();
        Self::new(weights, groups, vec![0; n], 1.0)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Block length `T`.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of complex symbols `k` (half the weight count).
    pub fn k(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn weights(&self) -> &[ComplexMatrix] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &ComplexMatrix {
        &self.weights[i]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn layer_tags(&self) -> &[usize] {
        &self.layer_tags
    }

    pub fn power_scale(&self) -> f64 {
        self.power_scale
    }

    pub fn n_layers(&self) -> usize {
        self.layer_tags.iter().max().map_or(0, |m| m + 1)
    }

    /// Weight indices of layer `l` in symbol order.
    pub fn layer_indices(&self, l: usize) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.layer_tags[i] == l).collect()
    }

    /// Groups whose members all belong to layer `l`.
    pub fn groups_in_layer(&self, l: usize) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .filter(|g| g.iter().all(|&i| self.layer_tags[i] == l))
            .cloned()
            .collect()
    }

    /// Layer `l` as a standalone code with re-based indices.
    pub fn layer(&self, l: usize) -> Result<Self> {
        let idx = self.layer_indices(l);
        if idx.is_empty() {
            return Err(Error::DimensionMismatch(format!("no layer {l}")));
        }
        let pos = |i: usize| idx.iter().position(|&x| x == i).expect("index in layer");
        let groups = self
            .groups_in_layer(l)
            .iter()
            .map(|g| g.iter().map(|&i| pos(i)).collect())
            .collect();
        let weights = idx.iter().map(|&i| self.weights[i].clone()).collect();
        Self::new(weights, groups, vec![0; idx.len()], self.power_scale)
    }

    /// Weights as used on the channel (`power_scale * A_i`).
    pub fn effective_weights(&self) -> Vec<ComplexMatrix> {
        self.weights.iter().map(|w| w.scale_real(self.power_scale)).collect()
    }

    /// Replaces every weight by `f(A_i)`, keeping the metadata.
    pub fn map_weights(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Self {
            weights: self.weights.iter().map(f).collect(),
            ..self.clone()
        }
    }

    pub fn with_power_scale(mut self, power_scale: f64) -> Self {
        self.power_scale = power_scale;
        self
    }

    /// Reorders symbols: weight `j` of the result is weight `order[j]` of `self`.
    /// Group and layer metadata follow the weights.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.weights.len() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let mut inverse = vec![usize::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let groups = self
            .groups
            .iter()
            .map(|g| g.iter().map(|&i| inverse[i]).collect())
            .collect();
        Self::new(
            order.iter().map(|&i| self.weights[i].clone()).collect(),
            groups,
            order.iter().map(|&i| self.layer_tags[i]).collect(),
            self.power_scale,
        )
    }

    /// `Σ tr(A_i A_i^H)` over the effective weights.
    pub fn total_energy(&self) -> f64 {
        self.power_scale.powi(2) * self.weights.iter().map(|w| w.frobenius_norm_sqr()).sum::<f64>()
    }

    /// `S = Σ s_i (power_scale A_i)`.
    pub fn codeword(&self, symbols: &[f64]) -> Result<ComplexMatrix> {
        if symbols.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} symbols for {} weights",
                symbols.len(),
                self.weights.len()
            )));
        }
        let mut s = ComplexMatrix::zeros(self.n_t, self.t);
        for (w, &x) in self.weights.iter().zip(symbols) {
            if x != 0.0 {
                s = &s + &w.scale_real(x * self.power_scale);
            }
        }
        Ok(s)
    }

    /// Real rank of the stacked `tilde_vec(vec(A_i))` columns.
    pub fn real_rank(&self) -> usize {
        let cols: Vec<Vec<f64>> = self.weights.iter().map(tilde_vec_of).collect();
        numerical_rank(&RealMatrix::from_columns(&cols).expect("equal shapes"), 1e-9)
    }

    pub fn is_linearly_independent(&self) -> bool {
        self.real_rank() == self.weights.len()
    }

    /// Text form: the weights in matrix text format followed by sidecar lines
    /// `group i: ...`, `layer i: ...` (one-based indices) and `power_scale: x`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in &self.weights {
            out.push_str(&text::write_complex_matrix(w));
        }
        for (g, members) in self.groups.iter().enumerate() {
            let idx: Vec<String> = members.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "group {}: {}", g + 1, idx.join(" "));
        }
        for l in 0..self.n_layers() {
            let idx: Vec<String> = self.layer_indices(l).iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "layer {}: {}", l + 1, idx.join(" "));
        }
        let _ = writeln!(out, "power_scale: {}", self.power_scale);
        out
    }

    pub fn from_text(input: &str) -> Result<Self> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut layers: Vec<Vec<usize>> = Vec::new();
        let mut power_scale = 1.0;
        let indices = |line: usize, list: &str| -> Result<Vec<usize>> {
            list.split_whitespace()
                .map(|t| match t.parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(i - 1),
                    _ => Err(Error::Parse {
                        line,
                        message: format!("bad index `{t}`"),
                    }),
                })
                .collect()
        };
        let weights = text::parse_complex_matrices(input, |n, line| {
            if let Some(v) = line.strip_prefix("power_scale:") {
                power_scale = v.trim().parse().map_err(|_| Error::Parse {
                    line: n,
                    message: format!("bad power scale `{}`", v.trim()),
                })?;
                return Ok(true);
            }
            for (key, sink) in [("group", &mut groups), ("layer", &mut layers)] {
                if let Some(rest) = line.strip_prefix(key) {
                    let (_, list) = rest.split_once(':').ok_or(Error::Parse {
                        line: n,
                        message: format!("expected `{key} i: indices`"),
                    })?;
                    sink.push(indices(n, list)?);
                    return Ok(true);
                }
            }
            Ok(false)
        })?;
        let mut layer_tags = vec![0; weights.len()];
        for (l, members) in layers.iter().enumerate() {
            for &i in members {
                if i >= weights.len() {
                    return Err(Error::DimensionMismatch(format!("layer index {} out of range", i + 1)));
                }
                layer_tags[i] = l;
            }
        }
        if groups.is_empty() {
            groups = (0..weights.len()).map(|i| vec![i]).collect();
        }
        Self::new(weights, groups, layer_tags, power_scale)
    }
}

/// Table I layout for one `g`-group layer: `cell(i, m)` is the weight index in row
/// `i`, column (group) `m`, all zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTable {
    rows: usize,
    cols: usize,
}

impl GroupTable {
    pub fn new(weight_count: usize, g: usize) -> Result<Self> {
        if g == 0 || weight_count % g != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{weight_count} weights do not split into {g} groups"
            )));
        }
        Ok(Self {
            rows: weight_count / g,
            cols: g,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell(&self, i: usize, m: usize) -> usize {
        assert!(i < self.rows && m < self.cols);
        m * self.rows + i
    }
}

/// One checked identity with its worst deviation (max-norm of the residual).
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub max_deviation: f64,
}

impl ConditionCheck {
    pub fn passed(&self) -> bool {
        self.max_deviation <= STRUCTURE_TOL
    }
}

/// Outcome of [`verify_g_group`].
#[derive(Debug, Clone)]
pub struct GroupReport {
    /// The six sufficient conditions, in order.
    pub conditions: Vec<ConditionCheck>,
    /// Worst `||A_i A_j^H + A_j A_i^H||_max` over pairs in different groups.
    pub cross_group_hr: f64,
}

impl GroupReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(ConditionCheck::passed) && self.cross_group_hr <= STRUCTURE_TOL
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut f: Vec<_> = self
            .conditions
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.name)
            .collect();
        if self.cross_group_hr > STRUCTURE_TOL {
            f.push("cross-group HR orthogonality");
        }
        f
    }
}

fn hr_residual(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * &b.adjoint()) + &(b * &a.adjoint())
}

/// `A_i A_j^H + A_j A_i^H`.
pub fn hr_matrix(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    hr_residual(a, b)
}

/// Checks a single-layer code against the six sufficient conditions for
/// `g`-group decodability, with groups taken as `g` contiguous blocks.
///
/// The conditions are evaluated on `A_1^{-1} A_i`, so a layer that is a common
/// unitary multiple of a conforming code (the extension layers) is accepted. The
/// cross-group Hurwitz-Radon condition is evaluated on the weights as stored.
pub fn verify_g_group(code: &LinearDispersionCode, g: usize) -> Result<GroupReport> {
    let table = GroupTable::new(code.weights.len(), g)?;
    let n = code.n_t;
    let id = ComplexMatrix::identity(n);
    let first = &code.weights[0];
    let gain = (first * &first.adjoint()).trace().re / n as f64;
    let inv = if gain > 0.0 {
        first.adjoint().scale_real(1.0 / gain)
    } else {
        ComplexMatrix::zeros(n, n)
    };
    let b: Vec<ComplexMatrix> = code.weights.iter().map(|w| &inv * w).collect();
    let at = |i: usize, m: usize| &b[table.cell(i, m)];
    let rows = table.rows();

    let mut c1: f64 = 0.0;
    let mut c3: f64 = 0.0;
    for i in 0..rows {
        c1 = c1.max((at(i, 0) * at(i, 0)).max_abs_diff(&id));
        for j in i + 1..rows {
            c3 = c3.max(at(i, 0).commutator_norm(at(j, 0)));
        }
    }
    let mut c2: f64 = 0.0;
    let mut c4: f64 = 0.0;
    let mut c5: f64 = 0.0;
    let mut c6: f64 = 0.0;
    for m in 1..g {
        let head = at(0, m);
        c2 = c2.max((head * head).max_abs_diff(&-&id));
        for i in 0..rows {
            c4 = c4.max(at(i, 0).commutator_norm(head));
            c6 = c6.max(at(i, m).max_abs_diff(&(at(i, 0) * head)));
        }
        for m2 in m + 1..g {
            c5 = c5.max(head.anticommutator_norm(at(0, m2)));
        }
    }

    let mut cross: f64 = 0.0;
    for p in 0..g {
        for q in p + 1..g {
            for i in 0..rows {
                for j in 0..rows {
                    let r = hr_residual(&code.weights[table.cell(i, p)], &code.weights[table.cell(j, q)]);
                    cross = cross.max(r.max_abs());
                }
            }
        }
    }

    Ok(GroupReport {
        conditions: vec![
            ConditionCheck { name: "first-group weights square to I", max_deviation: c1 },
            ConditionCheck { name: "group heads square to -I", max_deviation: c2 },
            ConditionCheck { name: "first group pairwise commutes", max_deviation: c3 },
            ConditionCheck { name: "first group commutes with heads", max_deviation: c4 },
            ConditionCheck { name: "heads pairwise anticommute", max_deviation: c5 },
            ConditionCheck { name: "group weights are first-group times head", max_deviation: c6 },
        ],
        cross_group_hr: cross,
    })
}
