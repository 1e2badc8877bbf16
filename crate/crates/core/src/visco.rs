//! Fractional viscoelastic constitutive laws driven by a prescribed stress,
//! and identification of their order measure from strain data.
//!
//! * Maxwell: `σ = E_∞ τ^α D^α ε`
//! * Zener: `(1 + a/b) σ = a D^α ε + c (1 + a/b) D^β ε`
//! * Kelvin-Voigt: `σ = E τ^γ ∫_0^1 D^α ε dα`
//!
//! with `E = E_∞ = τ = 1`, `σ(t) = cos t` and `ε(0) = 0.5`.
//!
//! Identification regresses the stress on Grünwald-Letnikov derivative
//! features of the observed strain. Row `i` pairs the features at `t_i` with
//! the stress at `t_{i-1}`, the same alignment the explicit solver uses, so
//! data generated by the solver is reproduced exactly by its own law.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input, DragonError, Result};
use crate::linalg::ridge_lstsq;
use crate::measure::{MultiTermSpec, OrderMeasure};
use crate::solvers::{gl_continue, gl_derivative, Backend, FdeProblem, Trajectory};

/// Initial strain.
pub const EPSILON0: f64 = 0.5;
/// Fraction of the series used for training (temporal prefix).
pub const TRAIN_FRACTION: f64 = 0.8;
/// Number of forecast steps scored after the training prefix.
pub const PREDICT_STEPS: usize = 10;
/// Ridge scale relative to the trace of the normal matrix.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Constitutive model and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViscoModel {
    Maxwell {
        #[serde(default = "maxwell_alpha")]
        alpha: f64,
    },
    Zener {
        #[serde(default = "zener_alpha")]
        alpha: f64,
        #[serde(default = "zener_beta")]
        beta: f64,
        #[serde(default = "zener_ab")]
        a_o: f64,
        #[serde(default = "zener_ab")]
        b_o: f64,
        #[serde(default = "zener_c")]
        c_o: f64,
    },
    KelvinVoigt {
        #[serde(default = "kv_nodes")]
        n_nodes: usize,
    },
}

fn maxwell_alpha() -> f64 {
    0.3
}
fn zener_alpha() -> f64 {
    0.2
}
fn zener_beta() -> f64 {
    0.6
}
fn zener_ab() -> f64 {
    0.1
}
fn zener_c() -> f64 {
    0.25
}
fn kv_nodes() -> usize {
    10
}

impl ViscoModel {
    pub fn maxwell() -> Self {
        ViscoModel::Maxwell {
            alpha: maxwell_alpha(),
        }
    }

    pub fn zener() -> Self {
        ViscoModel::Zener {
            alpha: zener_alpha(),
            beta: zener_beta(),
            a_o: zener_ab(),
            b_o: zener_ab(),
            c_o: zener_c(),
        }
    }

    pub fn kelvin_voigt() -> Self {
        ViscoModel::KelvinVoigt {
            n_nodes: kv_nodes(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ViscoModel::Maxwell { .. } => "maxwell",
            ViscoModel::Zener { .. } => "zener",
            ViscoModel::KelvinVoigt { .. } => "kelvin_voigt",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ViscoModel::Maxwell { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return input(format!("Maxwell order must lie in (0, 1), got {alpha}"));
                }
            }
            ViscoModel::Zener {
                alpha,
                beta,
                a_o,
                b_o,
                c_o,
            } => {
                if !(0.0 < alpha && alpha < beta && beta < 1.0) {
                    return input(format!(
                        "Zener orders must satisfy 0 < alpha < beta < 1, got {alpha}, {beta}"
                    ));
                }
                if !(a_o > 0.0 && b_o > 0.0 && c_o > 0.0) {
                    return input("Zener coefficients must be positive");
                }
            }
            ViscoModel::KelvinVoigt { n_nodes } => {
                if n_nodes < 2 {
                    return input("Kelvin-Voigt quadrature needs at least two intervals");
                }
            }
        }
        Ok(())
    }

    /// Strain-side operator `Σ_j w_j D^{α_j}` and the stress multiplier `s`
    /// such that the law reads `Σ_j w_j D^{α_j} ε = s σ`.
    pub fn law(&self) -> Result<(MultiTermSpec, f64)> {
        self.validate()?;
        match *self {
            ViscoModel::Maxwell { alpha } => Ok((MultiTermSpec::new(vec![(alpha, 1.0)])?, 1.0)),
            ViscoModel::Zener {
                alpha,
                beta,
                a_o,
                b_o,
                c_o,
            } => {
                let s = 1.0 + a_o / b_o;
                Ok((MultiTermSpec::new(vec![(alpha, a_o), (beta, c_o * s)])?, s))
            }
            ViscoModel::KelvinVoigt { n_nodes } => {
                Ok((OrderMeasure::uniform((0.0, 1.0), n_nodes)?.to_spec()?, 1.0))
            }
        }
    }
}

/// Strain series with its driving stress on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub h: f64,
    pub t: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Dataset {
    pub fn new(t: Vec<f64>, epsilon: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if t.len() != epsilon.len() || t.len() != sigma.len() {
            return input("dataset columns have different lengths");
        }
        if t.len() < 2 {
            return input("dataset needs at least two rows");
        }
        if t.iter()
            .chain(&epsilon)
            .chain(&sigma)
            .any(|v| !v.is_finite())
        {
            return input("dataset contains non-finite values");
        }
        let h = t[1] - t[0];
        if !(h > 0.0) {
            return input("dataset times must increase");
        }
        for (i, &ti) in t.iter().enumerate() {
            if (ti - (t[0] + i as f64 * h)).abs() > 1e-9 * (1.0 + ti.abs()) {
                return input(format!("row {i}: time grid is not uniform"));
            }
        }
        if t[0].abs() > 1e-12 {
            return input("dataset must start at t = 0");
        }
        Ok(Self {
            h,
            t,
            epsilon,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Length of the training prefix.
    pub fn train_len(&self) -> usize {
        (self.len() as f64 * TRAIN_FRACTION).floor() as usize
    }
}

/// Solves the model for the strain under `σ(t) = cos t` on `[0, T]`.
pub fn generate(model: &ViscoModel, t_end: f64, h: f64, backend: Backend) -> Result<Dataset> {
    let (spec, s) = model.law()?;
    let rhs = move |t: f64, _y: &[f64], out: &mut [f64]| out[0] = s * t.cos();
    let traj = FdeProblem::new(spec, rhs, vec![EPSILON0], t_end, h)?.solve(backend)?;
    let t = traj.times().to_vec();
    let sigma = t.iter().map(|t| t.cos()).collect();
    Dataset::new(t, traj.component(0), sigma)
}

/// Hypothesis class of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    SingleOrder,
    Distributed,
}

/// Identified law and its errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub model_class: ModelClass,
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
    pub train_mse: f64,
    pub predict_mse: f64,
}

impl FitReport {
    pub fn spec(&self) -> Result<MultiTermSpec> {
        MultiTermSpec::new(
            self.alphas
                .iter()
                .copied()
                .zip(self.weights.iter().copied())
                .collect(),
        )
    }
}

/// Feature columns `[D^{α} ε]_i` for `i = 1..n_train` and lagged targets
/// `σ_{i-1}`.
struct Design {
    features: Vec<Vec<f64>>,
    target: Vec<f64>,
}

fn design(data: &Dataset, alphas: &[f64]) -> Result<Design> {
    if data.len() < 20 {
        return input(format!("need at least 20 data points, got {}", data.len()));
    }
    let n_train = data.train_len();
    if n_train + PREDICT_STEPS > data.len() {
        return input(format!(
            "{} points leave no room for a {PREDICT_STEPS}-step forecast after the training prefix",
            data.len()
        ));
    }
    let first = data.epsilon[0];
    if data.epsilon[..n_train].iter().all(|&e| e == first) {
        return Err(DragonError::Numeric(
            "strain is constant over the training window; nothing to identify".into(),
        ));
    }
    let prefix = &data.epsilon[..n_train];
    let features = alphas
        .iter()
        .map(|&a| {
            crate::fracfn::AlphaOrder::new(a)?;
            Ok(gl_derivative(a, data.h, prefix)[1..].to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let target = data.sigma[..n_train - 1].to_vec();
    Ok(Design { features, target })
}

fn train_mse(d: &Design, weights: &[f64]) -> f64 {
    let rows = d.target.len();
    let mut sse = 0.0;
    for i in 0..rows {
        let pred: f64 = d.features.iter().zip(weights).map(|(f, w)| w * f[i]).sum();
        sse += (pred - d.target[i]).powi(2);
    }
    sse / rows as f64
}

/// Forecasts `PREDICT_STEPS` points after the training prefix with the law
/// `spec`, driven by the recorded stress, and returns the mean squared error.
fn predict_mse(data: &Dataset, spec: &MultiTermSpec) -> Result<f64> {
    let n_train = data.train_len();
    let history = Trajectory::from_states(data.h, 1, data.epsilon[..n_train].to_vec())?;
    let h = data.h;
    let sigma = &data.sigma;
    let drive = |t: f64, _y: &[f64], out: &mut [f64]| {
        let idx = ((t / h).round() as usize).min(sigma.len() - 1);
        out[0] = sigma[idx];
    };
    let forecast = gl_continue(spec, &drive, history, PREDICT_STEPS)?;
    let mse = (n_train..n_train + PREDICT_STEPS)
        .map(|i| (forecast.state(i)[0] - data.epsilon[i]).powi(2))
        .sum::<f64>()
        / PREDICT_STEPS as f64;
    Ok(mse)
}

fn single_fit(d: &Design, col: usize) -> Option<(f64, f64)> {
    let f = &d.features[col];
    let ff: f64 = f.iter().map(|v| v * v).sum();
    if !(ff > 0.0) {
        return None;
    }
    let fy: f64 = f.iter().zip(&d.target).map(|(a, b)| a * b).sum();
    let w = fy / ff;
    let mse = train_mse(
        &Design {
            features: vec![f.clone()],
            target: d.target.clone(),
        },
        &[w],
    );
    Some((w, mse))
}

/// Best single-order law over `alpha_grid`: for each order the closed-form
/// weight `w = Σ D_i σ_i / Σ D_i²`, keeping the order with the smallest
/// training error.
pub fn fit_single_order(data: &Dataset, alpha_grid: &[f64]) -> Result<FitReport> {
    if alpha_grid.is_empty() {
        return input("order grid is empty");
    }
    let d = design(data, alpha_grid)?;
    let mut best: Option<(usize, f64, f64)> = None;
    for col in 0..alpha_grid.len() {
        if let Some((w, mse)) = single_fit(&d, col) {
            if best.is_none_or(|b| mse < b.2) {
                best = Some((col, w, mse));
            }
        }
    }
    let (col, w, mse) =
        best.ok_or_else(|| DragonError::Numeric("all derivative features vanish".into()))?;
    let spec = MultiTermSpec::new(vec![(alpha_grid[col], w)])?;
    Ok(FitReport {
        model_class: ModelClass::SingleOrder,
        alphas: vec![alpha_grid[col]],
        weights: vec![w],
        train_mse: mse,
        predict_mse: predict_mse(data, &spec)?,
    })
}

/// Multi-order law over fixed `alpha_nodes`.
///
/// Weights minimize `Σ_i (Σ_j w_j D^{α_j}_i - σ_{i-1})² + λ ‖w‖²` with
/// `λ = ridge · tr(DᵀD)` (`ridge` defaults to [`DEFAULT_RIDGE`]). The class
/// contains every single-node law, so the single-node closed-form fits are
/// scored alongside the joint solution and the candidate with the smallest
/// training error is returned.
pub fn fit_distributed(
    data: &Dataset,
    alpha_nodes: &[f64],
    ridge: Option<f64>,
) -> Result<FitReport> {
    if alpha_nodes.is_empty() {
        return input("node set is empty");
    }
    if alpha_nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return input("nodes must be strictly increasing");
    }
    if alpha_nodes.len() > data.len() / 2 {
        return input(format!(
            "{} nodes exceed half of the {} data points",
            alpha_nodes.len(),
            data.len()
        ));
    }
    let d = design(data, alpha_nodes)?;
    let rows = d.target.len();
    let m = alpha_nodes.len();
    let a = DMatrix::from_fn(rows, m, |r, c| d.features[c][r]);
    let b = DVector::from_column_slice(&d.target);
    let trace: f64 = d.features.iter().flatten().map(|v| v * v).sum();
    let lambda = ridge.unwrap_or(DEFAULT_RIDGE) * trace;
    let joint = ridge_lstsq(&a, &b, lambda).map_err(|e| match e {
        DragonError::Numeric(msg) => DragonError::Numeric(format!("{msg}; pass a positive ridge")),
        other => other,
    })?;

    let mut best_w: Vec<f64> = joint.iter().copied().collect();
    let mut best_mse = train_mse(&d, &best_w);
    for col in 0..m {
        if let Some((w, mse)) = single_fit(&d, col) {
            if mse < best_mse {
                best_mse = mse;
                best_w = vec![0.0; m];
                best_w[col] = w;
            }
        }
    }
    let spec = MultiTermSpec::new(
        alpha_nodes
            .iter()
            .copied()
            .zip(best_w.iter().copied())
            .collect(),
    )?;
    Ok(FitReport {
        model_class: ModelClass::Distributed,
        alphas: alpha_nodes.to_vec(),
        weights: best_w,
        train_mse: best_mse,
        predict_mse: predict_mse(data, &spec)?,
    })
}

/// Order grid `k / 10`, `k = 1..=10`.
pub fn decimal_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// Order grid `k / 20`, `k = 1..=20`.
pub fn fine_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}
