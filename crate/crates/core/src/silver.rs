//! Layered extension of the rate-1 code into generalized Silver codes, generator
//! matrices and the Hurwitz-Radon / trace diagnostics.

use crate::code::{LinearDispersionCode, STRUCTURE_TOL};
use crate::error::{Error, Result};
use crate::frame::{build_frame, subset_product, Frame, ProductMask};
use crate::linalg::{c64, numerical_rank, tilde_vec_of, Complex64, ComplexMatrix, RealMatrix, J};
use crate::rate1::build_rate1_4group;

/// Default phase (degrees) on even-numbered layers for `n_t >= 4`.
pub const DEFAULT_PHASE_DEG: f64 = 45.0;

/// `U = (1/√7) [[1+j, 1+2j], [-1+2j, 1-j]]`.
pub fn silver_u() -> ComplexMatrix {
    let s = 1.0 / 7f64.sqrt();
    ComplexMatrix::from_rows(&[&[c64(s, s), c64(s, 2.0 * s)], &[c64(-s, 2.0 * s), c64(s, -s)]])
}

/// How one layer is obtained from the first: `phase * (j?) M * A` for a frame
/// product `M`, or `phase * (j?) A * U` when `post_u` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMultiplier {
    pub mask: ProductMask,
    pub phase: Complex64,
    pub post_u: bool,
}

impl LayerMultiplier {
    pub fn pre(mask: ProductMask, phase_deg: f64) -> Self {
        Self {
            mask,
            phase: phase_from_deg(phase_deg),
            post_u: false,
        }
    }

    pub fn label(&self) -> String {
        let body = if self.post_u {
            format!("{}(.)U", if self.mask.j_flag { "j" } else { "" })
        } else {
            self.mask.label()
        };
        let deg = self.phase.arg().to_degrees();
        if deg.abs() < 1e-9 {
            body
        } else {
            format!("e^(j{deg:.4}deg){body}")
        }
    }
}

pub fn phase_from_deg(deg: f64) -> Complex64 {
    let (s, c) = deg.to_radians().sin_cos();
    c64(c, s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub n_t: usize,
    pub multipliers: Vec<LayerMultiplier>,
}

impl LayerPlan {
    pub fn n_layers(&self) -> usize {
        self.multipliers.len()
    }
}

fn exponent_of(n_t: usize) -> Result<usize> {
    if !n_t.is_power_of_two() || !(2..=16).contains(&n_t) {
        return Err(Error::UnsupportedSize(format!("n_t must be 2, 4, 8 or 16, got {n_t}")));
    }
    Ok(n_t.trailing_zeros() as usize)
}

/// Layer plan with the stock phase (`0` for two antennas, 45 degrees otherwise).
pub fn default_layer_plan(n_t: usize, n_layers: usize) -> Result<LayerPlan> {
    let phase = if n_t == 2 { 0.0 } else { DEFAULT_PHASE_DEG };
    layer_plan_with_phase(n_t, n_layers, phase)
}

/// Layers `1..n_t/2` pre-multiply by `I, F4, F6, F4F6, F8, ...` (binary counting
/// over `F4, F6, ..., F_2a`); layers `n_t/2+1..n_t` repeat them times `j`. Even-
/// numbered layers carry `e^{j phase}`. Two antennas use `[I, j(.)U]`.
pub fn layer_plan_with_phase(n_t: usize, n_layers: usize, phase_deg: f64) -> Result<LayerPlan> {
    let a = exponent_of(n_t)?;
    if n_layers == 0 || n_layers > n_t {
        return Err(Error::UnsupportedSize(format!(
            "layer count must be in 1..={n_t}, got {n_layers}"
        )));
    }
    let len = 2 * a;
    let multipliers = if n_t == 2 {
        let mut m = vec![LayerMultiplier::pre(ProductMask::identity(len), 0.0)];
        if n_layers == 2 {
            m.push(LayerMultiplier {
                mask: ProductMask::identity(len).with_j(true),
                phase: phase_from_deg(phase_deg),
                post_u: true,
            });
        }
        m
    } else {
        let gens: Vec<usize> = (2..=a).map(|k| 2 * k).collect();
        let half = n_t / 2;
        (0..n_layers)
            .map(|l| {
                let bits = l % half;
                let idx: Vec<usize> = gens
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| bits >> b & 1 == 1)
                    .map(|(_, &g)| g)
                    .collect();
                let mask = ProductMask::select(len, &idx).with_j(l >= half);
                let deg = if l % 2 == 1 { phase_deg } else { 0.0 };
                LayerMultiplier::pre(mask, deg)
            })
            .collect()
    };
    Ok(LayerPlan { n_t, multipliers })
}

/// Stacks `multiplier_l * G_1` for every layer. Groups are carried over per layer
/// and the power scale becomes `1/sqrt(n_layers)`.
pub fn extend_layers(base: &LinearDispersionCode, plan: &LayerPlan, frame: &Frame) -> Result<LinearDispersionCode> {
    if base.n_t() != plan.n_t || frame.dim() != plan.n_t {
        return Err(Error::DimensionMismatch(format!(
            "plan for n_t = {}, base code n_t = {}, frame size {}",
            plan.n_t,
            base.n_t(),
            frame.dim()
        )));
    }
    let u = silver_u();
    let per_layer = base.weights().len();
    let mut weights = Vec::with_capacity(per_layer * plan.n_layers());
    let mut groups = Vec::new();
    let mut layer_tags = Vec::new();
    for (l, m) in plan.multipliers.iter().enumerate() {
        if (m.phase.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::config("phase", "layer phase must have unit magnitude"));
        }
        let mut factor = subset_product(frame, &ProductMask { j_flag: false, ..m.mask.clone() })?;
        let mut scalar = m.phase;
        if m.mask.j_flag {
            scalar *= J;
        }
        if m.post_u {
            factor = u.clone();
        }
        factor = factor.scale(scalar);
        for a in base.weights() {
            weights.push(if m.post_u { a * &factor } else { &factor * a });
            layer_tags.push(l);
        }
        groups.extend(
            base.groups()
                .iter()
                .map(|g| g.iter().map(|i| i + l * per_layer).collect::<Vec<_>>()),
        );
    }
    let code = LinearDispersionCode::new(
        weights,
        groups,
        layer_tags,
        1.0 / (plan.n_layers() as f64).sqrt(),
    )?;
    let rank = code.real_rank();
    if rank != code.weights().len() {
        return Err(Error::DependentLayers {
            rank,
            expected: code.weights().len(),
        });
    }
    Ok(code)
}

/// The two-antenna Silver code: Alamouti weights `A_1..A_4` followed by `j A_i U`.
pub fn build_silver2() -> LinearDispersionCode {
    let base = build_rate1_4group(1).expect("a = 1 is supported");
    let u = silver_u();
    let mut weights = base.weights().to_vec();
    weights.extend(base.weights().iter().map(|a| (a * &u).scale(J)));
    LinearDispersionCode::new(
        weights,
        (0..8).map(|i| vec![i]).collect(),
        vec![0, 0, 0, 0, 1, 1, 1, 1],
        std::f64::consts::FRAC_1_SQRT_2,
    )
    .expect("well-formed")
}

/// Generalized Silver code with `n_layers` layers and the given even-layer phase
/// (`None` for the default).
pub fn silver_code(n_t: usize, n_layers: usize, phase_deg: Option<f64>) -> Result<LinearDispersionCode> {
    let a = exponent_of(n_t)?;
    let plan = match phase_deg {
        Some(p) => layer_plan_with_phase(n_t, n_layers, p)?,
        None => default_layer_plan(n_t, n_layers)?,
    };
    extend_layers(&build_rate1_4group(a)?, &plan, &build_frame(a)?)
}

/// `G` with columns `tilde_vec(vec(A_i)) / sqrt(n_t)`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    matrix: RealMatrix,
    normalization: f64,
    power_gain: f64,
}

impl GeneratorMatrix {
    /// Normalized generator (orthonormal columns for the Silver codes).
    pub fn matrix(&self) -> &RealMatrix {
        &self.matrix
    }

    /// `1/sqrt(n_t)`
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Factor mapping `matrix()` to the generator of the transmitted codeword.
    pub fn power_gain(&self) -> f64 {
        self.power_gain
    }

    /// Generator of `S = Σ s_i (power_scale A_i)`, i.e. `vec(S)~ = physical() s`.
    pub fn physical(&self) -> RealMatrix {
        self.matrix.scale(self.power_gain)
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.matrix, 1e-9)
    }
}

pub fn assemble_generator(code: &LinearDispersionCode) -> GeneratorMatrix {
    let normalization = 1.0 / (code.n_t() as f64).sqrt();
    let cols: Vec<Vec<f64>> = code
        .weights()
        .iter()
        .map(|a| tilde_vec_of(a).into_iter().map(|x| x * normalization).collect())
        .collect();
    GeneratorMatrix {
        matrix: RealMatrix::from_columns(&cols).expect("equal shapes"),
        normalization,
        power_gain: code.power_scale() / normalization,
    }
}

/// `tr(A B^H) = Σ a_kl conj(b_kl)`.
fn trace_ab_h(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y.conj()).sum()
}

/// `(zero_pairs, total_pairs)` over `i < j`, where a pair counts as zero when
/// `||A_i A_j^H + A_j A_i^H||_F <= 1e-12`.
pub fn hr_pair_census(code: &LinearDispersionCode) -> (usize, usize) {
    let w = code.weights();
    let adj: Vec<ComplexMatrix> = w.iter().map(ComplexMatrix::adjoint).collect();
    let mut zero = 0;
    let mut total = 0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            total += 1;
            let s = &(&w[i] * &adj[j]) + &(&w[j] * &adj[i]);
            if s.frobenius_norm() <= STRUCTURE_TOL {
                zero += 1;
            }
        }
    }
    (zero, total)
}

/// `max_{i<j} |tr(A_i A_j^H + A_j A_i^H)|`.
pub fn self_interference_trace_check(code: &LinearDispersionCode) -> f64 {
    let w = code.weights();
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            worst = worst.max(2.0 * trace_ab_h(&w[i], &w[j]).re.abs());
        }
    }
    worst
}

/// Smallest `min(||A - B||_F, ||A + B||_F) / ||A||_F` between weights of different
/// layers; zero means two layers share a weight up to sign.
pub fn layer_separation(code: &LinearDispersionCode) -> f64 {
    let w = code.weights();
    let tags = code.layer_tags();
    let mut best = f64::INFINITY;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            if tags[i] == tags[j] {
                continue;
            }
            let n = w[i].frobenius_norm();
            let d = (&w[i] - &w[j]).frobenius_norm().min((&w[i] + &w[j]).frobenius_norm());
            best = best.min(d / n);
        }
    }
    best
}
